"""Delta-method variances, Wald tests and the nonparametric bootstrap.

Bootstrap RNG contract
----------------------
Replicate ``r`` draws its resampling indices from
``numpy.random.Generator(PCG64(SeedSequence(seed, spawn_key=(r,))))``; a
degenerate resample (an empty arm, mean h(A) of zero in the intervention arm,
or a rank-deficient regression design) is redrawn from the *same* stream.
Replicates are evaluated in fixed-size blocks whose boundaries depend only on
B and N, so results are bit-identical for any number of worker threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ConfigError, TooManyDegenerateResamples, ZeroVariance
from .estimators import RANK_RTOL, IttEstimate, MuHEstimate, itt_design
from .late import c_factor
from .model import Adjustment, AnalysisConfig, TrialDataset, check_gamma
from .transform import apply

MAX_REDRAW_FRACTION = 0.10
MAX_TRIES_PER_REPLICATE = 100
_BLOCK_CELLS = 500_000  # rows * replicates evaluated per block


@dataclass(frozen=True)
class VarianceBundle:
    c: float
    sigma2_c: float
    tau2: float
    se_late: float
    n: int


@dataclass(frozen=True)
class WaldTest:
    statistic: float
    p_value: float
    df: int = 1


def var_c(gamma: float, h_a: float, mu: MuHEstimate) -> float:
    """Root-N asymptotic variance of the plug-in c-factor (delta method)."""
    gamma = check_gamma(gamma)
    c = c_factor(gamma, h_a, mu.mu_h)  # raises on a zero denominator
    if mu.sigma2_h == 0.0 or gamma == 1.0:
        return 0.0
    # (1-g)^2 (g + (1-g) h)^2 / den^4 written as c^2 ((1-g)/den)^2 to avoid den^4 underflow
    den = gamma + (1.0 - gamma) * mu.mu_h
    with np.errstate(over="ignore"):  # a vanishing instrument gives an infinite variance
        return float(np.float64(c) ** 2 * (np.float64(1.0 - gamma) / den) ** 2 * mu.sigma2_h)


def var_late(itt: IttEstimate, mu: MuHEstimate, gamma: float, h_a: float) -> VarianceBundle:
    """tau^2 = c^2 sigma2_itt + itt^2 sigma2_c, treating the two as uncorrelated."""
    c = c_factor(gamma, h_a, mu.mu_h)
    s2c = var_c(gamma, h_a, mu)
    tau2 = c * c * itt.sigma2_itt + itt.delta_itt**2 * s2c
    n = itt.n_total
    return VarianceBundle(c, s2c, tau2, float(np.sqrt(tau2 / n)), n)


def wald(estimate: float, tau2: float, n: int) -> WaldTest:
    """Wald chi-square (1 df) test of a zero effect from a root-N variance."""
    if not tau2 > 0:
        raise ZeroVariance(f"Wald test needs a positive variance, got {tau2}")
    w = n * estimate * estimate / tau2
    return WaldTest(float(w), float(stats.chi2.sf(w, df=1)))


def quantile_ci(replicates, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
    """Percentile interval by linear interpolation between order statistics."""
    if not 0.0 < level < 1.0:
        raise ConfigError(f"level must lie in (0, 1), got {level}")
    r = np.asarray(replicates, dtype=float)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(r, [alpha, 1.0 - alpha], axis=0)
    return lo, hi


@dataclass(frozen=True)
class ReportPlan:
    """Quantities recomputed on each resample.

    Columns: ``itt``, ``mu_h``, then ``delta`` for every (gamma, a) pair in
    gamma-major order, then ``xi`` for every gamma.
    """

    gamma_grid: tuple[float, ...]
    a_grid: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "gamma_grid", tuple(check_gamma(g) for g in self.gamma_grid))
        object.__setattr__(self, "a_grid", tuple(float(a) for a in self.a_grid))

    @property
    def labels(self) -> list[str]:
        out = ["itt", "mu_h"]
        out += [f"delta[gamma={g:g},a={a:g}]" for g in self.gamma_grid for a in self.a_grid]
        out += [f"xi[gamma={g:g}]" for g in self.gamma_grid]
        return out

    def delta_index(self, gi: int, ai: int) -> int:
        return 2 + gi * len(self.a_grid) + ai

    def xi_index(self, gi: int) -> int:
        return 2 + len(self.gamma_grid) * len(self.a_grid) + gi


@dataclass(frozen=True)
class BootstrapResult:
    labels: list[str]
    replicates: np.ndarray  # (B, q)
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    se_boot: np.ndarray
    seed: int
    level: float
    redraws: int = 0

    @property
    def n_replicates(self) -> int:
        return self.replicates.shape[0]

    def get(self, label: str) -> dict:
        j = self.labels.index(label)
        return {
            "ci_lower": float(self.ci_lower[j]),
            "ci_upper": float(self.ci_upper[j]),
            "se_boot": float(self.se_boot[j]),
        }


class ReplicateEngine:
    """Vectorized point-estimate pipeline over many index resamples.

    Mirrors :func:`estimate_itt`, :func:`mu_h_estimate` and the late grid.
    Spline knots (if any) are fixed at their full-sample values.
    """

    def __init__(self, data: TrialDataset, plan: ReportPlan, *, transform, itt_method: str = "diff_means", adjustment=None):
        self.n = data.n
        self.z = data.z.astype(float)
        self.y = data.y
        self.h = np.atleast_1d(apply(transform, data.a))
        self.ols = itt_method == "ols_adjusted"
        if self.ols:
            self.X = itt_design(data, adjustment if adjustment is not None else Adjustment())
        self.plan = plan
        self.gammas = np.array(plan.gamma_grid)
        self.h_grid = np.atleast_1d(apply(transform, np.array(plan.a_grid))) if plan.a_grid else np.empty(0)
        self.n_quantities = len(plan.labels)

    def evaluate(self, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (values (m, q), ok (m,)) for an (m, n) array of row indices."""
        m = idx.shape[0]
        zb = self.z[idx]
        n1 = zb.sum(axis=1)
        n0 = self.n - n1
        ok = (n1 > 0) & (n0 > 0)
        safe_n1 = np.where(n1 > 0, n1, 1.0)
        mu = (self.h[idx] * zb).sum(axis=1) / safe_n1
        ok &= mu > 0

        if self.ols:
            Xb = self.X[idx]
            q, r = np.linalg.qr(Xb)
            diag = np.abs(np.diagonal(r, axis1=1, axis2=2))
            full = diag.min(axis=1) > RANK_RTOL * diag.max(axis=1)
            ok &= full
            r = np.where(full[:, None, None], r, np.eye(r.shape[-1]))
            qty = np.einsum("bnp,bn->bp", q, self.y[idx])
            coef = np.linalg.solve(r, qty[..., None])[..., 0]
            itt = coef[:, 1]
        else:
            yb = self.y[idx]
            s1 = (yb * zb).sum(axis=1)
            s0 = yb.sum(axis=1) - s1
            itt = s1 / safe_n1 - s0 / np.where(n0 > 0, n0, 1.0)

        out = np.empty((m, self.n_quantities))
        out[:, 0] = itt
        out[:, 1] = mu
        if len(self.gammas):
            g = self.gammas[None, :]
            den = g + (1.0 - g) * mu[:, None]  # (m, G)
            den = np.where(den > 0, den, 1.0)
            if len(self.h_grid):
                num = g[:, :, None] + (1.0 - g[:, :, None]) * self.h_grid[None, None, :]
                delta = itt[:, None, None] * (num / den[:, :, None])
                conv = (self.gammas[:, None] == 0.0) & (self.h_grid[None, :] == 0.0)
                delta = np.where(conv[None], 0.0, delta)
                out[:, 2 : 2 + delta[0].size] = delta.reshape(m, -1)
            xi_vals = itt[:, None] * ((g + (1.0 - g)) / den) * (1.0 - g) + 0.0
            out[:, self.plan.xi_index(0) :] = xi_vals
        return out, ok


def _worker_count(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get("LATE_BOUNDS_THREADS")
        workers = int(env) if env else 1
    return max(1, int(workers))


def _run_block(engine: ReplicateEngine, seed: int, start: int, stop: int) -> tuple[np.ndarray, int]:
    n = engine.n
    rngs = [np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(r,)))) for r in range(start, stop)]
    idx = np.stack([rng.integers(0, n, size=n) for rng in rngs])
    values, ok = engine.evaluate(idx)
    redraws = 0
    tries = 1
    while not ok.all():
        if tries >= MAX_TRIES_PER_REPLICATE:
            raise TooManyDegenerateResamples(f"a replicate stayed degenerate after {tries} draws")
        bad = np.flatnonzero(~ok)
        redraws += len(bad)
        sub = np.stack([rngs[i].integers(0, n, size=n) for i in bad])
        sub_vals, sub_ok = engine.evaluate(sub)
        values[bad] = sub_vals
        ok[bad] = sub_ok
        tries += 1
    return values, redraws


def run_replicates(engine: ReplicateEngine, n_reps: int, seed: int, workers: int | None = None) -> tuple[np.ndarray, int]:
    block = max(1, _BLOCK_CELLS // max(engine.n, 1))
    bounds = [(s, min(s + block, n_reps)) for s in range(0, n_reps, block)]
    nw = min(_worker_count(workers), len(bounds))
    if nw <= 1:
        parts = [_run_block(engine, seed, s, e) for s, e in bounds]
    else:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            parts = list(pool.map(lambda se: _run_block(engine, seed, *se), bounds))
    values = np.vstack([p[0] for p in parts])
    redraws = sum(p[1] for p in parts)
    if redraws > MAX_REDRAW_FRACTION * n_reps:
        raise TooManyDegenerateResamples(
            f"{redraws} of {n_reps} resamples were degenerate and redrawn; the instrument is too weak for the bootstrap"
        )
    return values, redraws


def summarize_replicates(labels, values: np.ndarray, seed: int, level: float, redraws: int = 0) -> BootstrapResult:
    lo, hi = quantile_ci(values, level)
    se = values.std(axis=0, ddof=1)
    return BootstrapResult(list(labels), values, lo, hi, se, int(seed), float(level), int(redraws))


def bootstrap(
    data: TrialDataset,
    config: AnalysisConfig,
    plan: ReportPlan | None = None,
    *,
    workers: int | None = None,
) -> BootstrapResult:
    """Nonparametric bootstrap of the full point-estimate pipeline.

    Rows are resampled with replacement from the pooled sample. ``plan``
    defaults to the config's gamma grid and its a grid (``None`` -> {0, 1}).
    """
    if plan is None:
        plan = ReportPlan(config.gamma_grid, config.a_grid if config.a_grid is not None else (0.0, 1.0))
    engine = ReplicateEngine(
        data, plan, transform=config.transform, itt_method=config.itt_method, adjustment=config.adjustment
    )
    values, redraws = run_replicates(engine, int(config.bootstrap_reps), int(config.seed), workers)
    return summarize_replicates(plan.labels, values, config.seed, config.ci_level, redraws)
