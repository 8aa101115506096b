"""Plot data for sensitivity curves: Delta_gamma(a) over a grid of (gamma, a).

Rows are long format (``gamma, a, h_a, delta, lower, upper, se, ci_lo,
ci_hi``) sorted by gamma then a. Standard errors and intervals are only
available when the sweep is computed from a dataset.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .estimators import IttEstimate, MuHEstimate
from .inference import BootstrapResult, ReportPlan, var_late
from .late import late_estimate
from .transform import TransformSpec, inverse

COLUMNS = ("gamma", "a", "h_a", "delta", "lower", "upper", "se", "ci_lo", "ci_hi")


@dataclass(frozen=True)
class SweepRow:
    gamma: float
    a: float
    h_a: float
    delta: float
    lower: float
    upper: float
    se: float | None = None
    ci_lo: float | None = None
    ci_hi: float | None = None


def default_sweep_a_grid(points: int = 101) -> tuple[float, ...]:
    return tuple(float(v) for v in np.linspace(0.0, 1.0, points))


def sweep_rows(
    itt: IttEstimate | float,
    mu: MuHEstimate | float,
    gammas,
    a_grid,
    spec: TransformSpec = TransformSpec(),
    boot: BootstrapResult | None = None,
) -> list[SweepRow]:
    """Evaluate every (gamma, a) pair.

    ``se`` needs full estimate objects (not bare floats); ``ci_lo``/``ci_hi``
    need a bootstrap run on ``ReportPlan(sorted(gammas), sorted(a_grid))``.
    """
    gammas = sorted(float(g) for g in gammas)
    a_grid = sorted(float(a) for a in a_grid)
    with_se = isinstance(itt, IttEstimate) and isinstance(mu, MuHEstimate)
    plan = ReportPlan(tuple(gammas), tuple(a_grid))
    rows = []
    for gi, g in enumerate(gammas):
        for ai, a in enumerate(a_grid):
            pt = late_estimate(itt, mu, g, spec, a)
            se = ci_lo = ci_hi = None
            if with_se:
                se = 0.0 if pt.convention else var_late(itt, mu, g, pt.h_a).se_late
            if boot is not None:
                j = plan.delta_index(gi, ai)
                ci_lo, ci_hi = (0.0, 0.0) if pt.convention else (float(boot.ci_lower[j]), float(boot.ci_upper[j]))
            rows.append(SweepRow(g, a, pt.h_a, pt.delta, pt.lower_bound, pt.upper_bound, se, ci_lo, ci_hi))
    return rows


def rows_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow(["" if getattr(r, c) is None else repr(getattr(r, c)) for c in COLUMNS])
    return buf.getvalue()


def write_svgs(rows: list[SweepRow], itt: float, mu: float, path, spec: TransformSpec = TransformSpec()) -> list[str]:
    """Write two static line charts and return their paths.

    ``path``: Delta(a) against a, one curve per gamma, with the bound
    envelope shaded. ``<stem>_gamma.svg``: Delta(0) and Delta(1) against gamma.
    Requires matplotlib.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    gammas = sorted({r.gamma for r in rows})
    a_vals = np.array(sorted({r.a for r in rows}))

    fig, ax = plt.subplots(figsize=(6, 4))
    lower = [r.lower for r in rows if r.gamma == gammas[0]]
    upper = [r.upper for r in rows if r.gamma == gammas[0]]
    ax.fill_between(a_vals, lower, upper, color="0.9", label="bounds")
    for g in gammas:
        ax.plot(a_vals, [r.delta for r in rows if r.gamma == g], label=f"gamma = {g:g}")
    ax.plot([inverse(spec, mu)], [itt], "o", color="0.6", label="ITT")
    ax.axhline(0.0, color="0.3", lw=0.5)
    ax.set_xlabel("engagement a")
    ax.set_ylabel("Delta(a)")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)

    gpath = path.with_name(path.stem + "_gamma.svg")
    gg = np.linspace(0.0, 1.0, 101)
    d0 = [late_estimate(itt, mu, g, spec, 0.0).delta for g in gg]
    d1 = [late_estimate(itt, mu, g, spec, 1.0).delta for g in gg]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(gg, d0, label="Delta(0)")
    ax.plot(gg, d1, label="Delta(1)")
    ax.axhline(itt, color="0.6", ls="--", lw=0.8, label="ITT")
    ax.set_xlabel("gamma")
    ax.set_ylabel("effect")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(gpath, format="svg")
    plt.close(fig)
    return [str(path), str(gpath)]
