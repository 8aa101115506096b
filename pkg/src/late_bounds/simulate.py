"""Data-generating mechanism and Monte Carlo harness for the simulation study.

Potential engagement under the intervention is semi-continuous: a point mass
at 1, then (given not 1) a point mass at 0, otherwise logit-normal. All three
parts depend on a standard normal unmeasured confounder ``u`` which also
shifts the outcome. ``l`` is a measured outcome-only covariate.

Seeds: iteration ``k`` of :func:`monte_carlo` generates its dataset from
``SeedSequence(seed, spawn_key=(k, 0))`` and bootstraps with the master seed
drawn from ``SeedSequence(seed, spawn_key=(k, 1))``, so summaries do not
depend on scheduling or worker count.
"""

from __future__ import annotations

import dataclasses
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import integrate, special, stats

from .errors import ConfigError, IterationError, LateBoundsError, NullEcce, ScenarioParseError
from .estimators import itt_ols, mu_h_estimate
from .inference import ReplicateEngine, ReportPlan, run_replicates, var_late
from .late import late_estimate
from .model import Adjustment, TrialDataset, check_gamma, dataset_from_arrays
from .transform import TransformSpec

STRENGTHS = {"low": -1.05, "mid": -0.05, "high": 1.9}
ECCE = -0.8


@dataclass(frozen=True)
class ScenarioSpec:
    n: int
    alpha0: float
    beta1: float
    beta2: float
    alpha01: float = -2.0
    alpha11: float = 1.0
    alpha00: float = -2.0
    alpha10: float = 1.0
    alpha1: float = 0.8
    sigma_a: float = 0.2
    beta0: float = 9.0
    beta3: float = 0.2
    beta4: float = 0.3
    sigma_y: float = 0.8
    p_z: float = 0.5
    name: str = ""

    def __post_init__(self):
        if int(self.n) < 2:
            raise ConfigError(f"n must be at least 2, got {self.n}")
        if not self.sigma_a > 0:
            raise ConfigError(f"sigma_a must be positive, got {self.sigma_a}")
        if not self.sigma_y >= 0:
            raise ConfigError(f"sigma_y must be non-negative, got {self.sigma_y}")
        if not 0 < self.p_z < 1:
            raise ConfigError(f"p_z must lie in (0, 1), got {self.p_z}")

    @property
    def gamma0(self) -> float:
        return true_gamma(self.beta1, self.beta2)

    def replace(self, **changes) -> ScenarioSpec:
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Latent:
    u: np.ndarray
    l: np.ndarray
    a_pot: np.ndarray


def design_scenario(gamma0: float, strength: str, n: int) -> ScenarioSpec:
    """One cell of the simulation design: ECCE fixed at -0.8, NECE = gamma0 * ECCE."""
    beta1 = round(ECCE * gamma0, 12)
    return ScenarioSpec(
        n=int(n),
        alpha0=STRENGTHS[strength],
        beta1=beta1,
        beta2=round(-(0.8 + beta1), 12),
        name=f"t2_g{round(gamma0 * 100):03d}_{strength}_n{n}",
    )


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.default_rng(seed)


def draw_potential_engagement(spec: ScenarioSpec, u: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = len(u)
    at_one = rng.random(n) < special.expit(spec.alpha01 + spec.alpha11 * u)
    at_zero = rng.random(n) < special.expit(spec.alpha00 + spec.alpha10 * u)
    interior = special.expit(spec.alpha0 + spec.alpha1 * u + spec.sigma_a * rng.standard_normal(n))
    return np.where(at_one, 1.0, np.where(at_zero, 0.0, interior))


def gen_dataset(spec: ScenarioSpec, seed=None) -> tuple[TrialDataset, Latent]:
    """One simulated trial; the observed covariate is ``l``."""
    rng = _rng(seed)
    n = int(spec.n)
    u = rng.standard_normal(n)
    l = rng.standard_normal(n)
    z = (rng.random(n) < spec.p_z).astype(float)
    a_pot = draw_potential_engagement(spec, u, rng)
    a = np.where(z == 1, a_pot, 0.0)
    mean = spec.beta0 + spec.beta1 * z + spec.beta2 * a + spec.beta3 * u + spec.beta4 * l
    y = mean + spec.sigma_y * rng.standard_normal(n)
    data = dataset_from_arrays(z, a, y, l[:, None], ("l",))
    return data, Latent(u, l, a_pot)


def true_gamma(beta1: float, beta2: float) -> float:
    """NECE / ECCE = beta1 / (beta1 + beta2); 0 by convention when both vanish."""
    ecce = beta1 + beta2
    if ecce == 0:
        if beta1 == 0:
            return 0.0
        raise NullEcce(f"ECCE beta1 + beta2 is zero while NECE beta1 = {beta1}")
    return beta1 / ecce


_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(64)
_GH_WEIGHTS = _GH_WEIGHTS / _GH_WEIGHTS.sum()


def true_mu_a(spec: ScenarioSpec) -> float:
    """E[A^{z=1}] by quadrature: adaptive over u, Gauss-Hermite for the logit-normal part."""

    def integrand(u):
        p1 = special.expit(spec.alpha01 + spec.alpha11 * u)
        p0 = special.expit(spec.alpha00 + spec.alpha10 * u)
        interior = np.dot(_GH_WEIGHTS, special.expit(spec.alpha0 + spec.alpha1 * u + spec.sigma_a * _GH_NODES))
        return (p1 + (1.0 - p1) * (1.0 - p0) * interior) * stats.norm.pdf(u)

    value, _ = integrate.quad(integrand, -np.inf, np.inf, epsabs=1e-10, epsrel=1e-10, limit=200)
    return float(value)


def true_itt(spec: ScenarioSpec) -> float:
    """beta1 + beta2 * mu_A, i.e. Delta(1) * (gamma0 + (1 - gamma0) * mu_A)."""
    return spec.beta1 + spec.beta2 * true_mu_a(spec)


def true_delta(spec: ScenarioSpec, a) -> np.ndarray:
    return spec.beta1 + spec.beta2 * np.asarray(a, dtype=float)


@dataclass
class McSummary:
    """Aggregates over K Monte Carlo iterations.

    Columns of ``estimates`` follow ``labels``: ``itt`` then one
    ``delta[gamma=..,a=..]`` per (gamma, a) pair.
    """

    labels: list[str]
    K: int
    B: int
    n: int
    mean_est: np.ndarray
    ese: np.ndarray
    mean_se_lst: np.ndarray
    mean_se_boot: np.ndarray
    mean_tau2: np.ndarray
    estimates: np.ndarray
    truth: np.ndarray
    gamma0: float
    mu_a: float
    seed: int
    scenario: str = ""
    warnings: list[str] = field(default_factory=list)

    def row(self, label: str) -> dict:
        j = self.labels.index(label)
        return {
            "quantity": label,
            "truth": float(self.truth[j]),
            "est": float(self.mean_est[j]),
            "ese": float(self.ese[j]),
            "se_lst": float(self.mean_se_lst[j]),
            "se_b": float(self.mean_se_boot[j]) if self.B else None,
        }

    def summary_rows(self) -> list[dict]:
        return [self.row(label) for label in self.labels]

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "K": self.K,
            "B": self.B,
            "n": self.n,
            "seed": self.seed,
            "gamma0": self.gamma0,
            "mu_a": self.mu_a,
            "rows": self.summary_rows(),
            "mean_tau2": dict(zip(self.labels, (float(v) for v in self.mean_tau2))),
            "warnings": list(self.warnings),
        }


def _labels(gammas, a_grid) -> list[str]:
    return ["itt"] + [f"delta[gamma={g:g},a={a:g}]" for g in gammas for a in a_grid]


def _one_iteration(spec: ScenarioSpec, gammas, a_grid, B: int, seed: int, k: int):
    data, _ = gen_dataset(spec, np.random.SeedSequence(seed, spawn_key=(k, 0)))
    itt = itt_ols(data, Adjustment(linear=("l",)))
    mu = mu_h_estimate(data, TransformSpec())
    q = 1 + len(gammas) * len(a_grid)
    est = np.empty(q)
    se = np.empty(q)
    tau2 = np.empty(q)
    est[0], se[0], tau2[0] = itt.delta_itt, itt.se, itt.sigma2_itt
    j = 1
    for g in gammas:
        for a in a_grid:
            pt = late_estimate(itt, mu, g, TransformSpec(), a)
            est[j] = pt.delta
            if pt.convention:
                se[j] = tau2[j] = 0.0
            else:
                vb = var_late(itt, mu, g, pt.h_a)
                se[j], tau2[j] = vb.se_late, vb.tau2
            j += 1

    se_boot = np.full(q, np.nan)
    if B:
        plan = ReportPlan(gammas, a_grid)
        engine = ReplicateEngine(
            data, plan, transform=TransformSpec(), itt_method="ols_adjusted", adjustment=Adjustment(linear=("l",))
        )
        boot_seed = int(np.random.SeedSequence(seed, spawn_key=(k, 1)).generate_state(1, np.uint64)[0])
        values, _ = run_replicates(engine, B, boot_seed, workers=1)
        sd = values.std(axis=0, ddof=1)
        se_boot[0] = sd[0]
        se_boot[1:] = sd[2 : 2 + len(gammas) * len(a_grid)]
    return est, se, se_boot, tau2


def _run_chunk(args):
    spec, gammas, a_grid, B, seed, ks = args
    out = []
    for k in ks:
        try:
            out.append(_one_iteration(spec, gammas, a_grid, B, seed, k))
        except LateBoundsError as exc:
            raise IterationError(k, exc) from exc
    return out


def _mc_workers(workers):
    if workers is None:
        env = os.environ.get("LATE_BOUNDS_THREADS")
        workers = int(env) if env else 1
    return max(1, int(workers))


def monte_carlo(
    spec: ScenarioSpec,
    gammas=None,
    a_grid=(0.0, 1.0),
    K: int = 200,
    B: int = 200,
    seed: int = 0,
    *,
    workers: int | None = None,
) -> McSummary:
    """Repeat generate -> estimate (ITT adjusted linearly for l) -> bootstrap.

    ``gammas`` are the analyst-specified sensitivity values (default: the true
    gamma0 of ``spec``). ``B = 0`` skips the bootstrap.
    """
    if K < 2:
        raise ConfigError(f"need K >= 2 Monte Carlo iterations, got {K}")
    if B == 1 or B < 0:
        raise ConfigError(f"B must be 0 (no bootstrap) or >= 2, got {B}")
    if gammas is None:
        gammas = (spec.gamma0,)
    gammas = tuple(check_gamma(g) for g in gammas)
    a_grid = tuple(float(a) for a in a_grid)

    nw = _mc_workers(workers)
    ks = np.arange(K)
    if nw <= 1:
        results = _run_chunk((spec, gammas, a_grid, B, seed, ks))
    else:
        chunks = [c for c in np.array_split(ks, nw * 4) if len(c)]
        with ProcessPoolExecutor(max_workers=nw) as pool:
            results = [r for part in pool.map(_run_chunk, [(spec, gammas, a_grid, B, seed, c) for c in chunks]) for r in part]

    est = np.array([r[0] for r in results])
    se = np.array([r[1] for r in results])
    se_boot = np.array([r[2] for r in results])
    tau2 = np.array([r[3] for r in results])
    mu_a = true_mu_a(spec)
    truth = np.concatenate([[spec.beta1 + spec.beta2 * mu_a], np.tile(true_delta(spec, a_grid), len(gammas))])
    warnings = []
    if K < 30:
        warnings.append(f"K={K} Monte Carlo iterations: the empirical SE (ESE) is unreliable")
    return McSummary(
        labels=_labels(gammas, a_grid),
        K=int(K),
        B=int(B),
        n=int(spec.n),
        mean_est=est.mean(axis=0),
        ese=est.std(axis=0, ddof=1),
        mean_se_lst=se.mean(axis=0),
        mean_se_boot=se_boot.mean(axis=0),
        mean_tau2=tau2.mean(axis=0),
        estimates=est,
        truth=truth,
        gamma0=spec.gamma0,
        mu_a=mu_a,
        seed=int(seed),
        scenario=spec.name,
        warnings=warnings,
    )


@dataclass(frozen=True)
class MisspecSweep:
    gammas: tuple[float, ...]
    a_grid: tuple[float, ...]
    mean: np.ndarray  # (G, A) mean point estimates
    mc_se: np.ndarray  # (G, A) Monte Carlo SE of those means
    truth: np.ndarray  # (A,) true Delta(a)
    true_itt: float

    @property
    def bias(self) -> np.ndarray:
        return self.mean - self.truth[None, :]


def misspecification_sweep(spec: ScenarioSpec, gammas, a_grid, K: int = 200, seed: int = 0, *, workers=None) -> MisspecSweep:
    """Mean estimates of Delta_gamma(a) when gamma may differ from gamma0."""
    gammas = tuple(float(g) for g in gammas)
    a_grid = tuple(float(a) for a in a_grid)
    mc = monte_carlo(spec, gammas, a_grid, K=K, B=0, seed=seed, workers=workers)
    shape = (len(gammas), len(a_grid))
    return MisspecSweep(
        gammas,
        a_grid,
        mc.mean_est[1:].reshape(shape),
        (mc.ese[1:] / np.sqrt(K)).reshape(shape),
        true_delta(spec, a_grid),
        float(mc.truth[0]),
    )


# ---------------------------------------------------------------------------
# scenario files: one ``name = value`` per line, ``#`` starts a comment

_REQUIRED_KEYS = (
    "n",
    "alpha0",
    "alpha1",
    "alpha01",
    "alpha11",
    "alpha00",
    "alpha10",
    "sigma_a",
    "beta0",
    "beta1",
    "beta2",
    "beta3",
    "beta4",
    "sigma_y",
)
_OPTIONAL_KEYS = ("p_z", "name", "gammas", "a_grid")


def parse_scenario(text: str, *, name: str = "") -> tuple[ScenarioSpec, dict]:
    """Parse a scenario file. Returns the spec and the optional analysis keys
    (``gammas``, ``a_grid``) as tuples of floats."""
    values: dict[str, str] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ScenarioParseError(f"expected 'name = value', got {raw.strip()!r}", line=lineno)
        if key not in _REQUIRED_KEYS and key not in _OPTIONAL_KEYS:
            raise ScenarioParseError(f"unknown key {key!r}", line=lineno, key=key)
        if key in values:
            raise ScenarioParseError(f"duplicate key {key!r} (first set on line {lines[key]})", line=lineno, key=key)
        values[key] = value
        lines[key] = lineno
    for key in _REQUIRED_KEYS:
        if key not in values:
            raise ScenarioParseError(f"missing required key {key!r}", key=key)

    kwargs: dict = {}
    extras: dict = {}
    for key, value in values.items():
        try:
            if key == "name":
                kwargs["name"] = value
            elif key == "n":
                kwargs["n"] = int(value)
            elif key in ("gammas", "a_grid"):
                extras[key] = tuple(float(v) for v in value.split(",") if v.strip())
            else:
                kwargs[key] = float(value)
        except ValueError:
            raise ScenarioParseError(f"bad value for {key!r}: {value!r}", line=lines[key], key=key) from None
    kwargs.setdefault("name", name)
    try:
        spec = ScenarioSpec(**kwargs)
    except ConfigError as exc:
        raise ScenarioParseError(str(exc)) from None
    return spec, extras


def format_scenario(spec: ScenarioSpec, **extras) -> str:
    lines = [f"# gamma0 = {spec.gamma0:g}", f"name = {spec.name}"] if spec.name else [f"# gamma0 = {spec.gamma0:g}"]
    for key in _REQUIRED_KEYS + ("p_z",):
        lines.append(f"{key} = {getattr(spec, key)!r}")
    for key, vals in extras.items():
        lines.append(f"{key} = " + ", ".join(f"{v:g}" for v in vals))
    return "\n".join(lines) + "\n"


def bundled_scenarios() -> list[str]:
    files = resources.files("late_bounds") / "scenarios"
    return sorted(p.name[:-4] for p in files.iterdir() if p.name.endswith(".txt"))


def load_scenario(name_or_path: str) -> tuple[ScenarioSpec, dict]:
    """Read a scenario from a file path, or by bundled name (e.g. ``t2_g050_mid_n250``)."""
    path = Path(name_or_path)
    if path.is_file():
        return parse_scenario(path.read_text(encoding="utf-8"), name=path.stem)
    bundled = resources.files("late_bounds") / "scenarios" / f"{name_or_path}.txt"
    if bundled.is_file():
        return parse_scenario(bundled.read_text(encoding="utf-8"), name=name_or_path)
    raise FileNotFoundError(f"no scenario file or bundled scenario named {name_or_path!r}")
