"""
Panel data model, DID design assembly, and single-shot estimation.

A :class:`PanelDataset` is stored column-wise (one numpy array per field)
because every estimator and the permutation engine operate on whole
columns; :attr:`PanelDataset.records` gives the row view when needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from pddid.errors import CollinearTrend, EmptyCell, InconsistentArm, RankDeficient
from pddid.glm import DesignMatrix, FitSummary, fit_logistic, solve_least_squares

INTERVENTION = "intervention"
REFERENCE = "reference"
ARMS = (INTERVENTION, REFERENCE)

METHODS = ("original", "detrending")
FAMILIES = ("gaussian", "binomial")
GRANULARITIES = ("per_group", "per_arm")
MAX_TREND_DEGREE = 5

GAMMA = "gamma"


@dataclass(frozen=True)
class ObservationRecord:
    unit_id: str
    group_id: str
    arm: str
    time: float
    outcome: float
    covariates: tuple = ()


def _readonly(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


class PanelDataset:
    """Immutable collection of outcome records plus the study window.

    Parameters
    ----------
    unit_id, group_id : sequence of str
        Individual and group identifiers, one per record.
    treated : sequence of bool
        True for records in the intervention arm.
    time : sequence of float
        Days since study start, within ``[0, study_length]``.
    outcome : sequence of float
    covariates : array_like of shape (n, k), optional
    study_length : float
    cutoff : float
        Records with ``time > cutoff`` are post-period.
    covariate_names : sequence of str
    """

    __slots__ = ("unit_id", "group_id", "treated", "time", "outcome",
                 "covariates", "study_length", "cutoff", "covariate_names")

    def __init__(self, unit_id, group_id, treated, time, outcome, covariates=None,
                 *, study_length: float, cutoff: float,
                 covariate_names: Sequence[str] = ()):
        n = len(outcome)
        names = tuple(str(c) for c in covariate_names)
        if covariates is None:
            covariates = np.zeros((n, len(names)))
        cov = np.array(covariates, dtype=float).reshape(n, -1) if n else np.zeros((0, len(names)))
        set_ = object.__setattr__
        set_(self, "unit_id", _readonly([str(u) for u in unit_id], object))
        set_(self, "group_id", _readonly([str(g) for g in group_id], object))
        set_(self, "treated", _readonly(treated, bool))
        set_(self, "time", _readonly(time, float))
        set_(self, "outcome", _readonly(outcome, float))
        cov.setflags(write=False)
        set_(self, "covariates", cov)
        set_(self, "study_length", float(study_length))
        set_(self, "cutoff", float(cutoff))
        set_(self, "covariate_names", names)
        self._validate()

    def __setattr__(self, name, value):
        raise AttributeError("PanelDataset is immutable")

    def _validate(self):
        n = len(self.outcome)
        for name in ("unit_id", "group_id", "treated", "time"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has {len(getattr(self, name))} entries, expected {n}")
        if self.covariates.shape != (n, len(self.covariate_names)):
            raise ValueError(
                f"covariates shape {self.covariates.shape} does not match "
                f"{n} records x {len(self.covariate_names)} names"
            )
        if not self.study_length > 0:
            raise ValueError(f"study_length must be positive, got {self.study_length}")
        if not 0 < self.cutoff < self.study_length:
            raise ValueError(f"cutoff {self.cutoff} outside (0, {self.study_length})")
        if n and (self.time.min() < 0 or self.time.max() > self.study_length):
            raise ValueError(f"times must lie in [0, {self.study_length}]")
        if not (np.all(np.isfinite(self.outcome)) and np.all(np.isfinite(self.covariates))):
            raise ValueError("outcomes and covariates must be finite")
        arm_of = {}
        for g, a in zip(self.group_id, self.treated):
            if arm_of.setdefault(g, a) != a:
                raise InconsistentArm(f"group {g!r} appears in both arms")

    @classmethod
    def from_records(cls, records: Iterable[ObservationRecord], *, study_length: float,
                     cutoff: float, covariate_names: Sequence[str] = ()) -> "PanelDataset":
        records = list(records)
        k = len(covariate_names)
        for r in records:
            if r.arm not in ARMS:
                raise ValueError(f"arm must be one of {ARMS}, got {r.arm!r}")
            if len(r.covariates) != k:
                raise ValueError(f"record {r.unit_id!r} has {len(r.covariates)} covariates, expected {k}")
        return cls(
            [r.unit_id for r in records],
            [r.group_id for r in records],
            [r.arm == INTERVENTION for r in records],
            [r.time for r in records],
            [r.outcome for r in records],
            np.array([r.covariates for r in records], dtype=float).reshape(len(records), k),
            study_length=study_length,
            cutoff=cutoff,
            covariate_names=covariate_names,
        )

    @property
    def records(self) -> list:
        return [
            ObservationRecord(u, g, INTERVENTION if a else REFERENCE, float(t), float(y),
                              tuple(float(z) for z in zs))
            for u, g, a, t, y, zs in zip(self.unit_id, self.group_id, self.treated,
                                         self.time, self.outcome, self.covariates)
        ]

    @property
    def post(self) -> np.ndarray:
        return self.time > self.cutoff

    def __len__(self) -> int:
        return len(self.outcome)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PanelDataset):
            return NotImplemented
        return (
            self.study_length == other.study_length
            and self.cutoff == other.cutoff
            and self.covariate_names == other.covariate_names
            and all(np.array_equal(getattr(self, f), getattr(other, f))
                    for f in ("unit_id", "group_id", "treated", "time",
                              "outcome", "covariates"))
        )

    __hash__ = None

    def with_values(self, outcome, covariates=None) -> "PanelDataset":
        """Copy with the same record slots but new outcome/covariate values."""
        return PanelDataset(
            self.unit_id, self.group_id, self.treated, self.time, outcome,
            self.covariates if covariates is None else covariates,
            study_length=self.study_length, cutoff=self.cutoff,
            covariate_names=self.covariate_names,
        )

    def subset(self, mask) -> "PanelDataset":
        mask = np.asarray(mask)
        return PanelDataset(
            self.unit_id[mask], self.group_id[mask], self.treated[mask], self.time[mask],
            self.outcome[mask], self.covariates[mask],
            study_length=self.study_length, cutoff=self.cutoff,
            covariate_names=self.covariate_names,
        )

    def __repr__(self) -> str:
        return (f"PanelDataset(n={len(self)}, groups={len(set(self.group_id))}, "
                f"study_length={self.study_length:g}, cutoff={self.cutoff:g}, "
                f"covariates={list(self.covariate_names)})")


@dataclass(frozen=True)
class ModelSpec:
    """Which DID regression to fit.

    ``trend_granularity`` and ``trend_degree`` only matter for the
    detrending method.
    """

    method: str = "detrending"
    family: str = "gaussian"
    trend_granularity: str = "per_group"
    trend_degree: int = 1
    include_covariates: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.trend_granularity not in GRANULARITIES:
            raise ValueError(f"trend_granularity must be one of {GRANULARITIES}")
        if not 1 <= int(self.trend_degree) <= MAX_TREND_DEGREE:
            raise ValueError(f"trend_degree must be in 1..{MAX_TREND_DEGREE}")


@dataclass(frozen=True)
class DidEstimate:
    gamma_hat: float
    se: float
    p_value: float
    fit: FitSummary = field(repr=False)
    spec: ModelSpec


def _trend_units(dataset: PanelDataset, granularity: str):
    if granularity == "per_arm":
        return [("I", dataset.treated), ("R", ~dataset.treated)]
    groups = sorted(set(dataset.group_id))
    return [(g, dataset.group_id == g) for g in groups]


def check_cells(dataset: PanelDataset) -> None:
    post = dataset.post
    for arm_name, arm in (("intervention", dataset.treated), ("reference", ~dataset.treated)):
        for period, mask in (("pre", ~post), ("post", post)):
            if not np.any(arm & mask):
                raise EmptyCell(f"no {arm_name} records in the {period} period")


def build_design(dataset: PanelDataset, spec: ModelSpec):
    """Assemble the DID regressors and response.

    Column order is fixed: ``intercept``, ``arm``, ``post``, ``gamma``
    (the arm x post interaction), then for detrending one
    ``(time / study_length)**d`` column per trend unit and degree, then
    one ``z_<name>`` column per covariate.

    Returns
    -------
    (DesignMatrix, numpy.ndarray)
    """
    check_cells(dataset)
    if spec.include_covariates and not dataset.covariate_names:
        raise ValueError("include_covariates requested but the dataset has no covariates")

    arm = dataset.treated.astype(float)
    post = dataset.post.astype(float)
    cols = [np.ones(len(dataset)), arm, post, arm * post]
    labels = ["intercept", "arm", "post", GAMMA]

    if spec.method == "detrending":
        scaled = dataset.time / dataset.study_length
        for unit, mask in _trend_units(dataset, spec.trend_granularity):
            for d in range(1, spec.trend_degree + 1):
                cols.append(np.where(mask, scaled ** d, 0.0))
                labels.append(f"trend[{unit}]" if d == 1 else f"trend[{unit}]^{d}")

    if spec.include_covariates:
        for k, name in enumerate(dataset.covariate_names):
            cols.append(dataset.covariates[:, k])
            labels.append(f"z_{name}")

    X = DesignMatrix(np.column_stack(cols), tuple(labels))
    return X, np.array(dataset.outcome)


def fit_design(X: DesignMatrix, y, family: str) -> FitSummary:
    try:
        if family == "binomial":
            return fit_logistic(X, y)
        return solve_least_squares(X, y)
    except RankDeficient as exc:
        trend = [c for c in exc.columns if c.startswith("trend[")]
        if trend and not isinstance(exc, CollinearTrend):
            raise CollinearTrend(str(exc), columns=exc.columns) from exc
        raise


def estimate_did(dataset: PanelDataset, spec: ModelSpec = ModelSpec()) -> DidEstimate:
    """Fit one DID regression and pull out the interaction effect.

    Gaussian fits use OLS with t tests on ``n - p`` degrees of freedom;
    binomial fits use IRLS logistic regression with Wald z tests.
    """
    X, y = build_design(dataset, spec)
    if spec.family == "binomial" and not np.all((y == 0) | (y == 1)):
        raise ValueError("binomial family needs 0/1 outcomes")
    fit = fit_design(X, y, spec.family)
    k = X.index(GAMMA)
    return DidEstimate(
        gamma_hat=float(fit.coefficients[k]),
        se=float(fit.standard_errors[k]),
        p_value=float(fit.p_values[k]),
        fit=fit,
        spec=spec,
    )


def gamma_identity_check(dataset: PanelDataset) -> tuple:
    """Split-sample pre/post fits within each arm.

    Returns ``(beta1, beta0, beta1 - beta0)`` where ``beta1`` and ``beta0``
    are the post-period shifts in the intervention and reference arms. The
    difference must match the joint model's interaction coefficient.
    """
    check_cells(dataset)
    post = dataset.post.astype(float)
    betas = []
    for mask in (dataset.treated, ~dataset.treated):
        X = DesignMatrix(np.column_stack([np.ones(mask.sum()), post[mask]]),
                         ("intercept", "post"))
        betas.append(solve_least_squares(X, dataset.outcome[mask]).coef("post"))
    b1, b0 = betas
    return b1, b0, b1 - b0

