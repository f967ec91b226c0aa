"""
Monte Carlo panel generator.

Outcome for individual ``i`` of group ``g`` observed on day ``t``::

    Y = gamma * I(g, t) + slope_g * t + alpha_g + u_g + v_i + w_it

with ``slope_g = +-l / study_length`` and ``alpha_g = +-alpha_arm`` for
intervention/reference groups, ``u_g`` a group shock, ``v_i`` individual
effects with within-group correlation ``rho``, and ``w_it`` a stationary
AR(1) path over the individual's visits with lag-one correlation ``rho``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from pddid.errors import ConfigInvalid
from pddid.panel import PanelDataset


@dataclass(frozen=True)
class DgpConfig:
    gamma: float = 0.0
    trend_l: float = 0.0
    rho: float = 0.0
    alpha_arm: float = 0.5
    sigma_u: float = 0.1
    sigma_v: float = 1.0
    sigma_w: float = 0.1
    groups_per_arm: int = 2
    n_per_group: int = 200
    study_length: float = 365.0
    cutoff: float = 182.0
    obs_min: int = 1
    obs_max: int = 7
    seed: int = 0

    def validate(self) -> "DgpConfig":
        problems = []
        if not 0.0 <= self.rho < 1.0:
            problems.append(f"rho must be in [0, 1), got {self.rho}")
        for name in ("sigma_u", "sigma_v", "sigma_w"):
            if getattr(self, name) < 0:
                problems.append(f"{name} must be nonnegative")
        if self.groups_per_arm < 1 or self.n_per_group < 1:
            problems.append("groups_per_arm and n_per_group must be positive")
        if not 1 <= self.obs_min <= self.obs_max:
            problems.append(f"need 1 <= obs_min <= obs_max, got {self.obs_min}, {self.obs_max}")
        if self.study_length < 1 or int(self.study_length) != self.study_length:
            problems.append("study_length must be a positive whole number of days")
        elif self.obs_max > self.study_length:
            problems.append("obs_max exceeds the number of distinct visit days")
        if not 0 < self.cutoff < self.study_length:
            problems.append(f"cutoff must lie in (0, study_length), got {self.cutoff}")
        if not 0 <= int(self.seed) < 2**64:
            problems.append("seed must be a 64-bit unsigned integer")
        if problems:
            raise ConfigInvalid("; ".join(problems))
        return self


def second_setting(**overrides) -> DgpConfig:
    """The alternative, lower signal-to-noise parameterization."""
    base = dict(alpha_arm=5.0, sigma_u=1.0, sigma_v=1.0, sigma_w=1.0)
    base.update(overrides)
    return DgpConfig(**base)


def _rng(rng_state) -> np.random.Generator:
    if isinstance(rng_state, np.random.Generator):
        return rng_state
    return np.random.default_rng(rng_state)


def correlated_effects(n: int, rho: float, sigma: float, rng_state=None) -> np.ndarray:
    """Equicorrelated normal effects: a shared draw plus idiosyncratic draws."""
    rng = _rng(rng_state)
    shared = rng.normal(0.0, sigma) if sigma > 0 else 0.0
    own = rng.normal(0.0, sigma, size=n) if sigma > 0 else np.zeros(n)
    return np.sqrt(rho) * shared + np.sqrt(1.0 - rho) * own


def ar1_paths(n_paths: int, k: int, rho: float, sigma: float, rng_state=None) -> np.ndarray:
    """``n_paths`` independent stationary AR(1) paths of length ``k``.

    Marginal variance is ``sigma**2`` at every step.
    """
    rng = _rng(rng_state)
    out = np.zeros((n_paths, k))
    if sigma == 0 or k == 0:
        return out
    z = rng.standard_normal((n_paths, k))
    innov = sigma * np.sqrt(1.0 - rho * rho)
    out[:, 0] = sigma * z[:, 0]
    for j in range(1, k):
        out[:, j] = rho * out[:, j - 1] + innov * z[:, j]
    return out


def ar1_path(k: int, rho: float, sigma: float, rng_state=None) -> np.ndarray:
    return ar1_paths(1, k, rho, sigma, rng_state)[0]


def _visit_days(rng: np.random.Generator, counts: np.ndarray, days: int, width: int) -> np.ndarray:
    """Distinct sorted visit days per row; unused slots hold ``days + 1``.

    Rows whose first ``counts[i]`` draws collide are redrawn, which leaves
    every accepted row uniform over sets of distinct days.
    """
    n = len(counts)
    valid = np.arange(width)[None, :] < counts[:, None]
    out = np.empty((n, width), dtype=np.int64)
    todo = np.arange(n)
    while todo.size:
        draw = rng.integers(1, days + 1, size=(todo.size, width))
        draw = np.where(valid[todo], draw, days + 1)
        draw.sort(axis=1)
        clash = np.any((draw[:, 1:] == draw[:, :-1]) & (draw[:, 1:] <= days), axis=1)
        ok = ~clash
        out[todo[ok]] = draw[ok]
        todo = todo[clash]
    return out


def simulate_panel(config: DgpConfig, rng_state=None) -> PanelDataset:
    """Draw one panel dataset.

    ``rng_state`` may be a ``numpy.random.Generator`` or anything
    ``default_rng`` accepts; when omitted, ``config.seed`` is used.
    Records come out group by group, individual by individual, visits in
    time order.
    """
    cfg = config.validate()
    rng = _rng(cfg.seed if rng_state is None else rng_state)
    days = int(cfg.study_length)
    n_groups = 2 * cfg.groups_per_arm
    n = cfg.n_per_group

    unit_ids, group_ids, treated, times, outcomes = [], [], [], [], []
    for g in range(n_groups):
        is_int = g < cfg.groups_per_arm
        sign = 1.0 if is_int else -1.0
        label = f"{'I' if is_int else 'R'}{g % cfg.groups_per_arm + 1}"
        u_g = rng.normal(0.0, cfg.sigma_u) if cfg.sigma_u > 0 else 0.0
        v = correlated_effects(n, cfg.rho, cfg.sigma_v, rng)
        counts = rng.integers(cfg.obs_min, cfg.obs_max + 1, size=n)
        visits = _visit_days(rng, counts, days, cfg.obs_max)
        w = ar1_paths(n, cfg.obs_max, cfg.rho, cfg.sigma_w, rng)

        mask = np.arange(cfg.obs_max)[None, :] < counts[:, None]
        t = visits[mask].astype(float)
        person = np.repeat(np.arange(n), counts)
        post = t > cfg.cutoff
        y = (
            cfg.gamma * (post & is_int)
            + sign * cfg.trend_l / cfg.study_length * t
            + sign * cfg.alpha_arm
            + u_g
            + v[person]
            + w[mask]
        )
        unit_ids.extend(f"{label}-{i + 1}" for i in person)
        group_ids.extend([label] * len(t))
        treated.append(np.full(len(t), is_int))
        times.append(t)
        outcomes.append(y)

    return PanelDataset(
        unit_ids, group_ids, np.concatenate(treated), np.concatenate(times),
        np.concatenate(outcomes), study_length=cfg.study_length, cutoff=cfg.cutoff,
    )


def with_seed(config: DgpConfig, seed: int) -> DgpConfig:
    return replace(config, seed=int(seed))
