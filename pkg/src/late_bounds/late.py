"""Engagement-indexed treatment effects under the gamma sensitivity model.

With gamma = Delta(0) / Delta(1) fixed by the analyst, the effect among
subjects whose potential engagement is ``a`` is

    Delta(a) = itt * (gamma + (1 - gamma) h(a)) / (gamma + (1 - gamma) mu_h)

gamma = 0 is the classical IV (exclusion restriction) analysis and gamma = 1
returns the ITT at every engagement level. Sweeping gamma over [0, 1] traces
out sharp bounds on Delta(a).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NonInvertibleTransform, NonPositiveThreshold, ZeroDenominator, ZeroInstrument
from .estimators import IttEstimate, MuHEstimate
from .model import check_gamma
from .transform import TransformSpec, apply, inverse


@dataclass(frozen=True)
class LatePoint:
    gamma: float
    a: float
    h_a: float
    c_factor: float
    delta: float
    lower_bound: float
    upper_bound: float
    convention: bool = False  # (gamma, h(a)) == (0, 0): zero by definition


@dataclass(frozen=True)
class XiResult:
    gamma: float
    xi: float


@dataclass(frozen=True)
class EngagementThreshold:
    """Solution of |Delta_gamma(a)| = t.

    ``status`` is ``"solved"`` (``a_star`` set), ``"always"`` (every engagement
    level already reaches t, so no crossing) or ``"never"``. ``unique`` is
    False for a threshold transform, where ``a_star`` is the cut point zeta.
    """

    a_star: float | None
    h_star: float | None
    status: str
    unique: bool = True


def c_factor(gamma: float, h_a: float, mu_h: float) -> float:
    """(gamma + (1-gamma) h(a)) / (gamma + (1-gamma) mu_h)."""
    gamma = check_gamma(gamma)
    den = gamma + (1.0 - gamma) * mu_h
    if den <= 0.0:
        raise ZeroDenominator(f"gamma + (1 - gamma) * mu_h = {den} (gamma={gamma}, mu_h={mu_h})")
    return (gamma + (1.0 - gamma) * h_a) / den


def _value(x, attr):
    return getattr(x, attr) if hasattr(x, attr) else float(x)


def bounds(itt: IttEstimate | float, mu: MuHEstimate | float, spec: TransformSpec, a: float) -> tuple[float, float]:
    """Sharp bounds on Delta(a) over gamma in [0, 1].

    The extremes sit at gamma = 1 (the ITT) and gamma = 0 (itt * h(a) / mu_h).
    """
    d = _value(itt, "delta_itt")
    m = _value(mu, "mu_h")
    if m <= 0.0:
        raise ZeroInstrument("bounds need mu_h > 0")
    h_a = apply(spec, a)
    wald = d * h_a / m + 0.0  # no negative zero
    return (min(d, wald), max(d, wald))


def late_estimate(itt: IttEstimate | float, mu: MuHEstimate | float, gamma: float, spec: TransformSpec, a: float) -> LatePoint:
    d = _value(itt, "delta_itt")
    m = _value(mu, "mu_h")
    gamma = check_gamma(gamma)
    h_a = apply(spec, a)
    c = c_factor(gamma, h_a, m)
    convention = gamma == 0.0 and h_a == 0.0
    delta = 0.0 if convention else d * c
    lo, hi = bounds(d, m, spec, a)
    return LatePoint(gamma, float(a), h_a, c, delta, lo, hi, convention)


def late_grid(itt, mu, gammas, a_grid, spec: TransformSpec = TransformSpec()) -> list[LatePoint]:
    """Evaluate every (gamma, a) pair, sorted by gamma then a."""
    return [late_estimate(itt, mu, g, spec, a) for g in sorted(gammas) for a in sorted(a_grid)]


def xi(itt: IttEstimate | float, mu: MuHEstimate | float, gamma: float) -> XiResult:
    """Heterogeneity Delta(1) - Delta(0) = Delta(1) * (1 - gamma)."""
    gamma = check_gamma(gamma)
    d = _value(itt, "delta_itt")
    m = _value(mu, "mu_h")
    delta1 = d * c_factor(gamma, 1.0, m)
    return XiResult(gamma, delta1 * (1.0 - gamma) + 0.0)


def gamma_for_xi_threshold(itt: IttEstimate | float, mu: MuHEstimate | float, t: float) -> float | None:
    """gamma* with |xi_gamma| = t; |xi| exceeds t exactly for gamma < gamma*.

    |xi_gamma| decreases from |itt| / mu_h at gamma = 0 to 0 at gamma = 1, so
    there is no solution when t >= |itt| / mu_h.
    """
    if not t > 0:
        raise NonPositiveThreshold(f"threshold must be positive, got {t}")
    d = abs(_value(itt, "delta_itt"))
    m = _value(mu, "mu_h")
    num = d - t * m
    if num <= 0.0:
        return None
    return num / (num + t)


def engagement_for_effect_threshold(
    itt: IttEstimate | float,
    mu: MuHEstimate | float,
    gamma: float,
    spec: TransformSpec,
    t: float,
    *,
    strict: bool = False,
) -> EngagementThreshold:
    """Engagement level a* at which |Delta_gamma(a)| reaches ``t``.

    Since |Delta_gamma(a)| is nondecreasing in a, engagement at or above a*
    gives effects of at least ``t``. For a threshold transform h is not
    invertible; the cut point is returned with ``unique=False``, or
    :class:`NonInvertibleTransform` is raised when ``strict``.
    """
    if not t > 0:
        raise NonPositiveThreshold(f"threshold must be positive, got {t}")
    gamma = check_gamma(gamma)
    d = abs(_value(itt, "delta_itt"))
    m = _value(mu, "mu_h")
    if d == 0.0:
        return EngagementThreshold(None, None, "never")
    if gamma == 1.0:
        status = "always" if d >= t else "never"
        return EngagementThreshold(None, None, status)

    h_star = (t * (gamma + (1.0 - gamma) * m) / d - gamma) / (1.0 - gamma)
    if h_star < 0.0:
        return EngagementThreshold(None, h_star, "always")
    if h_star > 1.0:
        return EngagementThreshold(None, h_star, "never")
    if not spec.invertible:
        if strict:
            raise NonInvertibleTransform(f"{spec} is not invertible; the crossing is the cut point {spec.zeta}")
        return EngagementThreshold(inverse(spec, h_star), h_star, "solved", unique=False)
    return EngagementThreshold(inverse(spec, h_star), h_star, "solved")
