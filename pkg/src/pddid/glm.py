"""
Regression core: least squares and binomial IRLS with classical inference.

Both solvers work from a column-pivoted QR factorization so that rank
problems are detected (and named) before any coefficient is reported. The
trend columns built by :mod:`pddid.panel` are scaled very differently from
the 0/1 dummies, which is why normal equations are avoided here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg, special

from pddid.errors import (
    AllSameClass,
    DimensionMismatch,
    RankDeficient,
    Separation,
)

RANK_RTOL = 1e-10
IRLS_MAX_ITER = 50
IRLS_TOL = 1e-8
SEPARATION_NORM = 1e3
# |linear predictor| beyond this means fitted probabilities are numerically 0 or 1
SEPARATION_ETA = 30.0


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DesignMatrix:
    """Dense regressor matrix with positionally aligned column labels."""

    values: np.ndarray
    column_labels: tuple

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 2:
            raise DimensionMismatch(f"design must be 2-D, got shape {values.shape}")
        labels = tuple(str(c) for c in self.column_labels)
        n, p = values.shape
        if len(labels) != p:
            raise DimensionMismatch(f"{len(labels)} labels for {p} columns")
        if len(set(labels)) != p:
            raise ValueError(f"duplicate column labels in {labels}")
        if p < 1 or n < p:
            raise DimensionMismatch(f"need n >= p >= 1, got n={n}, p={p}")
        if not np.all(np.isfinite(values)):
            raise ValueError("design contains non-finite entries")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_labels", labels)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def index(self, label: str) -> int:
        return self.column_labels.index(label)


@dataclass(frozen=True)
class FitSummary:
    """Solver output for one regression fit."""

    coefficients: np.ndarray
    covariance: np.ndarray
    standard_errors: np.ndarray
    test_statistics: np.ndarray
    p_values: np.ndarray
    residual_variance: Optional[float]
    degrees_of_freedom: int
    family: str
    converged: bool
    column_labels: tuple = field(default=())
    iterations: int = 0

    def __post_init__(self):
        for name in ("coefficients", "covariance", "standard_errors",
                     "test_statistics", "p_values"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "column_labels", tuple(self.column_labels))

    def coef(self, label: str) -> float:
        return float(self.coefficients[self.column_labels.index(label)])


def tail_p_value(statistic: float, df: Optional[float] = None) -> float:
    """Two-sided tail probability of a t (``df`` given) or standard normal statistic.

    The t tail uses the regularized incomplete beta identity
    ``P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2)``; the normal tail uses ``erfc``.
    """
    if not math.isfinite(statistic):
        raise ValueError(f"statistic must be finite, got {statistic}")
    if df is None:
        p = special.erfc(abs(statistic) / math.sqrt(2.0))
    else:
        if df < 1:
            raise ValueError(f"student t needs df >= 1, got {df}")
        t2 = statistic * statistic
        p = special.betainc(0.5 * df, 0.5, df / (df + t2))
    return float(min(1.0, max(0.0, p)))


def _as_design(X) -> DesignMatrix:
    if isinstance(X, DesignMatrix):
        return X
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return DesignMatrix(X, tuple(f"x{k}" for k in range(X.shape[1])))


def _pivoted_qr(X: DesignMatrix, values: Optional[np.ndarray] = None):
    """Economic QR with column pivoting; raise RankDeficient on dependence."""
    A = X.values if values is None else values
    Q, R, piv = linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[0] == 0.0:
        rank = 0
    else:
        rank = int(np.sum(diag > RANK_RTOL * diag[0]))
    if rank < X.p:
        dropped = [X.column_labels[k] for k in piv[rank:]]
        raise RankDeficient(
            f"design has rank {rank} < {X.p}; dependent columns: {', '.join(dropped)}",
            columns=dropped,
        )
    return Q, R, piv


def _unpivot_inverse(R: np.ndarray, piv: np.ndarray) -> np.ndarray:
    """(A^T A)^{-1} in original column order, from the R factor of A P."""
    p = R.shape[0]
    Rinv = linalg.solve_triangular(R, np.eye(p))
    inner = Rinv @ Rinv.T
    out = np.empty_like(inner)
    out[np.ix_(piv, piv)] = inner
    return 0.5 * (out + out.T)


def _check_y(X: DesignMatrix, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] != X.n:
        raise DimensionMismatch(f"response length {y.shape} does not match n={X.n}")
    if not np.all(np.isfinite(y)):
        raise ValueError("response contains non-finite entries")
    return y


def solve_least_squares(X, y) -> FitSummary:
    """Ordinary least squares with homoskedastic model-based inference.

    Parameters
    ----------
    X : DesignMatrix or array_like of shape (n, p)
        Regressors; must have full column rank.
    y : array_like of shape (n,)
        Response.

    Returns
    -------
    FitSummary
        Coefficients, ``s^2 (X'X)^{-1}`` covariance and Student-t tests on
        ``n - p`` degrees of freedom.

    Raises
    ------
    RankDeficient
        If pivoted QR finds linearly dependent columns.
    DimensionMismatch
        If ``len(y) != n``.
    """
    X = _as_design(X)
    y = _check_y(X, y)
    Q, R, piv = _pivoted_qr(X)

    beta = np.empty(X.p)
    beta[piv] = linalg.solve_triangular(R, Q.T @ y)
    resid = y - X.values @ beta
    dof = X.n - X.p
    rss = float(resid @ resid)
    # a saturated fit has no residual information left
    sigma2 = rss / dof if dof > 0 else 0.0

    cov = sigma2 * _unpivot_inverse(R, piv)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = np.where(se > 0, beta / np.where(se > 0, se, 1.0), 0.0)
    if dof > 0:
        pvals = [tail_p_value(t, dof) for t in stat]
    else:
        pvals = [1.0] * X.p
    return FitSummary(
        coefficients=beta,
        covariance=cov,
        standard_errors=se,
        test_statistics=stat,
        p_values=pvals,
        residual_variance=sigma2,
        degrees_of_freedom=dof,
        family="gaussian",
        converged=True,
        column_labels=X.column_labels,
    )


def fit_logistic(X, y, max_iter: int = IRLS_MAX_ITER, tol: float = IRLS_TOL) -> FitSummary:
    """Maximum-likelihood logistic regression by iteratively reweighted least squares.

    Starts from all-zero coefficients and takes full Newton steps. Each
    step solves against the QR factor of ``sqrt(W) X``, so the Fisher
    information is never formed explicitly. ``converged`` is true iff the
    largest absolute score component drops below ``tol`` within
    ``max_iter`` iterations. Inference is by Wald z-tests against the
    inverse Fisher information at the optimum.

    Raises
    ------
    AllSameClass
        If ``y`` holds only zeros or only ones.
    Separation
        If the coefficient norm exceeds 1e3, the weights collapse, or the
        fitted probabilities reach 0 or 1 numerically.
    RankDeficient
        If ``X`` itself is rank deficient.
    """
    X = _as_design(X)
    y = _check_y(X, y)
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("logistic response must be 0/1")
    if y.min() == y.max():
        raise AllSameClass(f"all {X.n} responses equal {y[0]:g}")
    if max_iter < 1 or tol <= 0:
        raise ValueError("max_iter must be positive and tol > 0")
    _pivoted_qr(X)

    A = X.values
    beta = np.zeros(X.p)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = A @ beta
        mu = special.expit(eta)
        score = A.T @ (y - mu)
        if np.max(np.abs(score)) < tol:
            converged = True
            break
        w = mu * (1.0 - mu)
        try:
            _, R, piv = _pivoted_qr(X, np.sqrt(w)[:, None] * A)
        except RankDeficient as exc:
            raise Separation(f"IRLS weights collapsed at iteration {it}") from exc
        step = np.empty(X.p)
        # (R^T R) z = P^T score
        z = linalg.solve_triangular(R, score[piv], trans="T")
        step[piv] = linalg.solve_triangular(R, z)
        beta = beta + step
        if np.linalg.norm(beta) > SEPARATION_NORM:
            raise Separation(
                f"coefficient norm {np.linalg.norm(beta):.3g} exceeds {SEPARATION_NORM:g}"
            )

    eta = A @ beta
    if np.max(np.abs(eta)) > SEPARATION_ETA:
        raise Separation("fitted probabilities numerically 0 or 1")
    mu = special.expit(eta)
    w = mu * (1.0 - mu)
    try:
        _, R, piv = _pivoted_qr(X, np.sqrt(w)[:, None] * A)
    except RankDeficient as exc:
        raise Separation("Fisher information is singular at the optimum") from exc
    cov = _unpivot_inverse(R, piv)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    stat = beta / se
    return FitSummary(
        coefficients=beta,
        covariance=cov,
        standard_errors=se,
        test_statistics=stat,
        p_values=[tail_p_value(z) for z in stat],
        residual_variance=None,
        degrees_of_freedom=X.n - X.p,
        family="binomial",
        converged=converged,
        column_labels=X.column_labels,
        iterations=it,
    )


def gamma_projection(X: DesignMatrix, label: str) -> np.ndarray:
    """Row vector ``c`` with ``c @ y`` equal to the OLS coefficient of ``label``.

    Used to refit many responses against one fixed design.
    """
    Q, R, piv = _pivoted_qr(X)
    k = X.index(label)
    kp = int(np.flatnonzero(piv == k)[0])
    p = X.p
    e = np.zeros(p)
    e[kp] = 1.0
    # row kp of R^{-1}: solve R^T r = e
    row = linalg.solve_triangular(R, e, trans="T")
    return Q @ row

