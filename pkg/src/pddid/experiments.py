"""
Scenario-grid runner for size, bias and power studies.

Every replicate of every cell simulates one dataset and hands that same
dataset to each requested method, so method differences within a cell
reflect the estimator and not the noise. Seeds are derived from
``(master_seed, cell_index, replicate)``; per-replicate results are stored
by index and summed in index order, which makes reports identical for any
worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from pddid._parallel import resolve_workers
from pddid.errors import PdDidError, SliceEmpty
from pddid.panel import ModelSpec, estimate_did
from pddid.permutation import PermutationConfig, pd_did
from pddid.simulate import DgpConfig, simulate_panel

METHODS = ("original", "detrending", "pd")

FULL_LS = tuple(round(0.1 * k, 1) for k in range(-5, 6))
FULL_RHOS = (0.0, 0.5, 0.9)
POWER_GAMMAS_FULL = tuple(round(0.05 * k, 2) for k in range(11))


@dataclass(frozen=True)
class ScenarioGrid:
    gammas: Sequence[float] = (0.0,)
    ls: Sequence[float] = (-0.2, 0.0, 0.2)
    rhos: Sequence[float] = (0.0, 0.5)
    replications: int = 500
    methods: Sequence[str] = METHODS
    perm: PermutationConfig = PermutationConfig(m=200)
    dgp_base: DgpConfig = DgpConfig()
    alpha: float = 0.05
    master_seed: int = 0
    detrend_spec: ModelSpec = ModelSpec(method="detrending")

    def __post_init__(self):
        for name in ("gammas", "ls", "rhos", "methods"):
            value = tuple(getattr(self, name))
            if not value:
                raise ValueError(f"{name} must be nonempty")
            object.__setattr__(self, name, value)
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        # canonical order keeps report layout independent of how methods were listed
        object.__setattr__(self, "methods", tuple(m for m in METHODS if m in self.methods))
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")

    def cells(self) -> list:
        """(gamma, l, rho) triples: rho outermost, gamma innermost."""
        return [(g, l, r) for r in self.rhos for l in self.ls for g in self.gammas]


def full_table_grid(**overrides) -> ScenarioGrid:
    base = dict(ls=FULL_LS, rhos=FULL_RHOS, replications=1000, perm=PermutationConfig(m=1000))
    base.update(overrides)
    return ScenarioGrid(**base)


def power_grid(full: bool = False, **overrides) -> ScenarioGrid:
    base = dict(
        gammas=POWER_GAMMAS_FULL if full else tuple(round(0.1 * k, 1) for k in range(6)),
        ls=(-0.2, 0.0, 0.2),
        rhos=(0.5,),
        replications=1000 if full else 300,
        perm=PermutationConfig(m=1000 if full else 200),
    )
    base.update(overrides)
    return ScenarioGrid(**base)


@dataclass(frozen=True)
class ReportRow:
    gamma: float
    l: float
    rho: float
    method: str
    mean_estimate: float
    bias: float
    rejection_count: int
    rejection_rate: float
    replications: int
    failures: int


@dataclass(frozen=True)
class ExperimentReport:
    rows: tuple
    master_seed: int = 0
    perm_m: int = 0
    alpha: float = 0.05
    meta: dict = field(default_factory=dict, compare=False)

    def row(self, gamma: float, l: float, rho: float, method: str) -> ReportRow:
        for r in self.rows:
            if (r.method == method and math.isclose(r.gamma, gamma, abs_tol=1e-12)
                    and math.isclose(r.l, l, abs_tol=1e-12)
                    and math.isclose(r.rho, rho, abs_tol=1e-12)):
                return r
        raise SliceEmpty(f"no row for gamma={gamma}, l={l}, rho={rho}, method={method}")


def replicate_seeds(master_seed: int, cell_index: int, replicate: int) -> tuple:
    """(dataset seed, permutation seed) for one replicate of one cell."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(cell_index), int(replicate)))
    a, b = ss.generate_state(2, np.uint64)
    return int(a), int(b)


def _run_replicate(grid: ScenarioGrid, cell_index: int, cell: tuple, r: int) -> list:
    gamma, l, rho = cell
    data_seed, perm_seed = replicate_seeds(grid.master_seed, cell_index, r)
    cfg = replace(grid.dgp_base, gamma=gamma, trend_l=l, rho=rho, seed=data_seed)
    ds = simulate_panel(cfg)
    out = []
    for method in grid.methods:
        try:
            if method == "pd":
                res = pd_did(ds, grid.detrend_spec,
                             PermutationConfig(m=grid.perm.m, seed=perm_seed, alpha=grid.perm.alpha))
            elif method == "original":
                res = estimate_did(ds, replace(grid.detrend_spec, method="original"))
            else:
                res = estimate_did(ds, grid.detrend_spec)
            out.append((res.gamma_hat, res.p_value))
        except PdDidError:
            out.append((math.nan, math.nan))
    return out


def _run_chunk(grid: ScenarioGrid, cell_index: int, start: int, stop: int) -> tuple:
    cell = grid.cells()[cell_index]
    return cell_index, start, [_run_replicate(grid, cell_index, cell, r) for r in range(start, stop)]


def run_grid(grid: ScenarioGrid, workers: Optional[int] = None,
             progress: Optional[Callable[[int, int], None]] = None) -> ExperimentReport:
    """Simulate every cell of ``grid`` and aggregate per cell and method.

    A rejection is ``p_value < grid.alpha``. Replicates whose fit fails are
    counted in ``failures`` and excluded from means and rates.
    """
    cells = grid.cells()
    R = grid.replications
    k = len(grid.methods)
    results = np.full((len(cells), R, k, 2), np.nan)

    chunk = max(1, min(25, R))
    tasks = [(ci, s, min(R, s + chunk)) for ci in range(len(cells)) for s in range(0, R, chunk)]
    n_workers = min(resolve_workers(workers), len(tasks))
    done = 0

    def store(payload):
        nonlocal done
        ci, start, reps = payload
        results[ci, start:start + len(reps)] = np.array(reps, dtype=float).reshape(len(reps), k, 2)
        done += 1
        if progress is not None:
            progress(done, len(tasks))

    if n_workers > 1:
        with ProcessPoolExecutor(n_workers) as pool:
            futures = [pool.submit(_run_chunk, grid, *t) for t in tasks]
            for fut in futures:
                store(fut.result())
    else:
        for t in tasks:
            store(_run_chunk(grid, *t))

    rows = []
    for ci, (gamma, l, rho) in enumerate(cells):
        for mi, method in enumerate(grid.methods):
            est = results[ci, :, mi, 0]
            pv = results[ci, :, mi, 1]
            ok = ~(np.isnan(est) | np.isnan(pv))
            n_ok = int(ok.sum())
            failures = R - n_ok
            mean = math.fsum(est[ok]) / n_ok if n_ok else math.nan
            count = int(np.sum(pv[ok] < grid.alpha))
            rows.append(ReportRow(
                gamma=float(gamma), l=float(l), rho=float(rho), method=method,
                mean_estimate=mean, bias=mean - gamma,
                rejection_count=count,
                rejection_rate=count / n_ok if n_ok else math.nan,
                replications=R, failures=failures,
            ))
    return ExperimentReport(
        rows=tuple(rows), master_seed=int(grid.master_seed), perm_m=int(grid.perm.m),
        alpha=float(grid.alpha),
        meta={"gammas": list(grid.gammas), "ls": list(grid.ls), "rhos": list(grid.rhos),
              "methods": list(grid.methods)},
    )


def power_curve(report: ExperimentReport, method: str, l: float, rho: float) -> list:
    """(gamma, rejection_rate, mean_estimate) along one (method, l, rho) slice, by gamma."""
    rows = [r for r in report.rows
            if r.method == method and math.isclose(r.l, l, abs_tol=1e-12)
            and math.isclose(r.rho, rho, abs_tol=1e-12)]
    if not rows:
        raise SliceEmpty(f"report has no rows for method={method}, l={l}, rho={rho}")
    rows.sort(key=lambda r: r.gamma)
    return [(r.gamma, r.rejection_rate, r.mean_estimate) for r in rows]
