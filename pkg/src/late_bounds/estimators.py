"""Estimators of the identifiable ingredients: the ITT effect and mu_h.

All variances returned here are asymptotic variances of the root-N scaled
estimator, with N the *total* sample size, e.g. ``sigma2_itt`` estimates
``Var(sqrt(N) * (itt_hat - itt))``. Divide by N for a squared standard error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateArm,
    DegenerateResiduals,
    KnotsNotAscending,
    RankDeficient,
    TooFewDistinct,
    ZeroInstrument,
)
from .model import Adjustment, TrialDataset
from .transform import TransformSpec, apply

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class IttEstimate:
    delta_itt: float
    sigma2_itt: float
    method: str
    n_total: int

    @property
    def se(self) -> float:
        return float(np.sqrt(self.sigma2_itt / self.n_total))


@dataclass(frozen=True)
class MuHEstimate:
    mu_h: float
    sigma2_h: float
    n1: int
    n_total: int = 0

    @property
    def se(self) -> float:
        return float(np.sqrt(self.sigma2_h / self.n_total)) if self.n_total else float("nan")


@dataclass(frozen=True)
class SplineBasis:
    knots: tuple[float, ...]
    columns: np.ndarray  # (n, k-1): linear term then k-2 cubic terms


@dataclass(frozen=True)
class OlsFit:
    coef: np.ndarray
    cov_hc1: np.ndarray
    residuals: np.ndarray
    design: np.ndarray


def itt_diff_means(data: TrialDataset) -> IttEstimate:
    """Difference in arm means with the unpooled two-sample variance."""
    y1 = data.y[data.z == 1]
    y0 = data.y[data.z == 0]
    if len(y1) < 2 or len(y0) < 2:
        raise DegenerateArm(f"each arm needs >= 2 subjects for a variance (control={len(y0)}, intervention={len(y1)})")
    n = data.n
    delta = float(y1.mean() - y0.mean())
    sigma2 = n * (y1.var(ddof=1) / len(y1) + y0.var(ddof=1) / len(y0))
    return IttEstimate(delta, float(sigma2), "diff_means", n)


def quartile_knots(x) -> tuple[float, float, float]:
    """The 0.25/0.50/0.75 sample quantiles (linear interpolation rule)."""
    x = np.asarray(x, dtype=float)
    if len(np.unique(x)) < 4:
        raise TooFewDistinct(f"need >= 4 distinct values for quartile knots, got {len(np.unique(x))}")
    q = np.quantile(x, [0.25, 0.5, 0.75])
    if np.any(np.diff(q) <= 0):
        raise TooFewDistinct("quartile knots are tied; the variable has too little spread")
    return tuple(float(v) for v in q)


def rcs_basis(x, knots) -> SplineBasis:
    """Restricted (natural) cubic spline basis, linear beyond the outer knots.

    Truncated-power form with the cubic terms scaled by the squared span of
    the outer knots, so columns stay on the scale of ``x``.
    """
    t = np.asarray(knots, dtype=float)
    if t.ndim != 1 or len(t) < 3:
        raise KnotsNotAscending(f"need at least 3 knots, got {len(t)}")
    if np.any(np.diff(t) <= 0):
        raise KnotsNotAscending(f"knots must be strictly ascending, got {tuple(t)}")
    x = np.asarray(x, dtype=float)
    k = len(t)
    norm = (t[-1] - t[0]) ** 2
    tail = t[-1] - t[-2]

    def cube(v):
        return np.clip(v, 0.0, None) ** 3

    cols = [x]
    for j in range(k - 2):
        term = (
            cube(x - t[j])
            - cube(x - t[-2]) * (t[-1] - t[j]) / tail
            + cube(x - t[-1]) * (t[-2] - t[j]) / tail
        )
        cols.append(term / norm)
    return SplineBasis(tuple(float(v) for v in t), np.column_stack(cols))


def adjustment_columns(data: TrialDataset, adjustment: Adjustment) -> np.ndarray:
    """Design columns f(l) for an adjustment spec (no intercept, no arm)."""
    cols = [data.column(name)[:, None] for name in adjustment.linear]
    for term in adjustment.splines:
        x = data.column(term.column)
        knots = term.knots if term.knots is not None else quartile_knots(x)
        cols.append(rcs_basis(x, knots).columns)
    if not cols:
        return np.empty((data.n, 0))
    return np.hstack(cols)


def ols_hc1(X: np.ndarray, y: np.ndarray) -> OlsFit:
    """Least squares with an HC1 sandwich covariance; SVD-based rank check."""
    n, p = X.shape
    coef, _, rank, sv = np.linalg.lstsq(X, y, rcond=RANK_RTOL)
    if rank < p:
        raise RankDeficient(f"design matrix has rank {rank} < {p} columns")
    resid = y - X @ coef
    if n <= p:
        if np.allclose(resid, 0.0):
            raise DegenerateResiduals(f"{n} rows for {p} parameters leaves no residual degrees of freedom")
        raise RankDeficient(f"{n} rows for {p} parameters")
    # (X'X)^-1 via the pseudo-inverse from the same decomposition
    xpx_inv = np.linalg.pinv(X.T @ X, rcond=RANK_RTOL)
    meat = (X * resid[:, None] ** 2).T @ X
    cov = xpx_inv @ meat @ xpx_inv * (n / (n - p))
    return OlsFit(coef, cov, resid, X)


def itt_design(data: TrialDataset, adjustment: Adjustment) -> np.ndarray:
    return np.column_stack([np.ones(data.n), data.z.astype(float), adjustment_columns(data, adjustment)])


def itt_ols(data: TrialDataset, adjustment: Adjustment = Adjustment()) -> IttEstimate:
    """Regression ITT: coefficient on the arm in y ~ 1 + z + f(l).

    Consistent for the ITT whatever the form of f, so the variance is the
    heteroskedasticity-robust HC1 sandwich rather than the model-based one.
    """
    X = itt_design(data, adjustment)
    fit = ols_hc1(X, data.y)
    return IttEstimate(float(fit.coef[1]), float(data.n * fit.cov_hc1[1, 1]), "ols_adjusted", data.n)


def estimate_itt(data: TrialDataset, method: str = "diff_means", adjustment: Adjustment = Adjustment()) -> IttEstimate:
    if method == "diff_means":
        return itt_diff_means(data)
    return itt_ols(data, adjustment)


def mu_h_estimate(data: TrialDataset, spec: TransformSpec = TransformSpec()) -> MuHEstimate:
    """Mean of h(A) in the intervention arm and its root-N variance."""
    h = apply(spec, data.a[data.z == 1])
    h = np.atleast_1d(h)
    n1 = len(h)
    mu = float(h.mean())
    if mu <= 0.0:
        raise ZeroInstrument(f"mean of h(A) in the intervention arm is 0 under transform {spec}")
    s2 = float(h.var(ddof=1)) if n1 > 1 else 0.0
    return MuHEstimate(mu, data.n / n1 * s2, n1, data.n)
