"""
Permutational detrending inference.

The point estimate comes from the unpermuted data. An empirical null is
then built by shuffling (outcome, covariates) pairs among the record
slots of each arm separately, which breaks the link between a
measurement and its observation time while keeping arm membership, and
refitting. The null supplies a shifted confidence interval and a rank
p-value.

Replicate ``j`` always draws from its own stream, derived from
``(seed, j)``, so results do not depend on how replicates are scheduled.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from pddid._parallel import resolve_workers
from pddid.errors import PdDidError, PermutationDegenerate
from pddid.glm import gamma_projection
from pddid.panel import GAMMA, DidEstimate, ModelSpec, PanelDataset, build_design, estimate_did

MAX_FAILED_FRACTION = 0.01


@dataclass(frozen=True)
class PermutationConfig:
    m: int = 1000
    seed: int = 0
    alpha: float = 0.05

    def __post_init__(self):
        if int(self.m) < 2:
            raise ValueError(f"need at least 2 permutation replicates, got {self.m}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.alpha * (self.m + 1) < 1:
            warnings.warn(
                f"m={self.m} is too small for a {1 - self.alpha:.0%} interval",
                stacklevel=2,
            )


@dataclass(frozen=True)
class EmpiricalNull:
    """Sorted permutation estimates and their mean."""

    draws: np.ndarray
    mean: float

    @classmethod
    def from_draws(cls, draws) -> "EmpiricalNull":
        d = np.sort(np.asarray(draws, dtype=float))
        if d.size == 0:
            raise ValueError("empirical null needs at least one draw")
        d.setflags(write=False)
        return cls(d, math.fsum(d) / d.size)

    @property
    def m(self) -> int:
        return int(self.draws.size)

    def __eq__(self, other):
        if not isinstance(other, EmpiricalNull):
            return NotImplemented
        return self.mean == other.mean and np.array_equal(self.draws, other.draws)

    __hash__ = None


@dataclass(frozen=True)
class PdDidResult:
    gamma_hat: float
    null: EmpiricalNull = field(repr=False)
    ci_low: float
    ci_high: float
    p_value: float
    m: int
    seed: int
    alpha: float
    n_failed: int
    spec: ModelSpec
    estimate: Optional[DidEstimate] = field(default=None, repr=False, compare=False)


def replicate_rng(seed: int, j: int) -> np.random.Generator:
    """Independent generator for permutation replicate ``j``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(j),))))


def _rng(rng_state) -> np.random.Generator:
    if isinstance(rng_state, np.random.Generator):
        return rng_state
    return np.random.default_rng(rng_state)


class _ArmShuffler:
    """Index permutations that shuffle values within each arm's slots."""

    def __init__(self, treated: np.ndarray):
        self.n = len(treated)
        self.slots = (np.flatnonzero(treated), np.flatnonzero(~treated))

    def __call__(self, rng: np.random.Generator) -> np.ndarray:
        idx = np.arange(self.n)
        for slots in self.slots:
            if slots.size > 1:
                idx[slots] = slots[rng.permutation(slots.size)]
        return idx


def permute_within_arms(dataset: PanelDataset, rng_state=None) -> PanelDataset:
    """Shuffle (outcome, covariates) pairs among the slots of each arm.

    Slot attributes (unit, group, arm, time) stay in place; the pairs move
    together, independently in the intervention and reference arms.
    """
    idx = _ArmShuffler(dataset.treated)(_rng(rng_state))
    return dataset.with_values(dataset.outcome[idx], dataset.covariates[idx])


def empirical_quantile(null: EmpiricalNull, prob: float) -> float:
    """Quantile by linear interpolation between order statistics.

    With ``h = (m - 1) * prob`` (0-based), returns
    ``x[floor(h)] + frac(h) * (x[floor(h) + 1] - x[floor(h)])``.
    """
    if not 0.0 <= prob <= 1.0:
        raise ValueError(f"prob must be in [0, 1], got {prob}")
    x = null.draws
    h = (x.size - 1) * prob
    lo = int(math.floor(h))
    if lo >= x.size - 1:
        return float(x[-1])
    return float(x[lo] + (h - lo) * (x[lo + 1] - x[lo]))


def rank_p_value(gamma_hat: float, null: EmpiricalNull) -> float:
    """Two-sided add-one rank p-value of ``gamma_hat`` within the null draws."""
    x = null.draws
    c_hi = x.size - int(np.searchsorted(x, gamma_hat, side="left"))
    c_lo = int(np.searchsorted(x, gamma_hat, side="right"))
    return min(1.0, 2.0 * (min(c_hi, c_lo) + 1) / (x.size + 1))


def _fast_draws(dataset: PanelDataset, spec: ModelSpec, cfg: PermutationConfig) -> np.ndarray:
    # permuting outcomes leaves the design untouched, so one factorization serves every replicate
    X, y = build_design(dataset, spec)
    c = gamma_projection(X, GAMMA)
    shuffle = _ArmShuffler(dataset.treated)
    return np.array([c @ y[shuffle(replicate_rng(cfg.seed, j))] for j in range(cfg.m)])


def _refit_draw(dataset: PanelDataset, spec: ModelSpec, seed: int, j: int) -> float:
    try:
        return estimate_did(permute_within_arms(dataset, replicate_rng(seed, j)), spec).gamma_hat
    except PdDidError:
        return math.nan


def pd_did(dataset: PanelDataset, spec: ModelSpec = ModelSpec(),
           cfg: PermutationConfig = PermutationConfig(),
           workers: Optional[int] = None) -> PdDidResult:
    """Permutational detrending DID.

    Parameters
    ----------
    dataset : PanelDataset
    spec : ModelSpec
        Model refit on every permuted copy; normally ``method="detrending"``.
    cfg : PermutationConfig
        Replicate count, seed and interval level.
    workers : int, optional
        Thread count for refitting when each replicate needs its own fit
        (covariates or binomial family). Capped by ``PDDID_THREADS``.

    Returns
    -------
    PdDidResult

    Raises
    ------
    PermutationDegenerate
        If more than 1% of permuted fits fail.
    """
    if spec.method != "detrending":
        warnings.warn("permutation inference without detrending ignores trend bias", stacklevel=2)
    est = estimate_did(dataset, spec)

    if spec.family == "gaussian" and not spec.include_covariates:
        draws = _fast_draws(dataset, spec, cfg)
    else:
        n_workers = resolve_workers(workers)
        if n_workers > 1:
            with ThreadPoolExecutor(n_workers) as pool:
                draws = np.array(list(pool.map(
                    lambda j: _refit_draw(dataset, spec, cfg.seed, j), range(cfg.m))))
        else:
            draws = np.array([_refit_draw(dataset, spec, cfg.seed, j) for j in range(cfg.m)])

    failed = np.isnan(draws)
    n_failed = int(failed.sum())
    if n_failed > MAX_FAILED_FRACTION * cfg.m:
        raise PermutationDegenerate(f"{n_failed} of {cfg.m} permuted fits failed")
    null = EmpiricalNull.from_draws(draws[~failed])

    lo = empirical_quantile(null, cfg.alpha / 2)
    hi = empirical_quantile(null, 1 - cfg.alpha / 2)
    return PdDidResult(
        gamma_hat=est.gamma_hat,
        null=null,
        ci_low=lo + est.gamma_hat,
        ci_high=hi + est.gamma_hat,
        p_value=rank_p_value(est.gamma_hat, null),
        m=int(cfg.m),
        seed=int(cfg.seed),
        alpha=float(cfg.alpha),
        n_failed=n_failed,
        spec=spec,
        estimate=est,
    )
