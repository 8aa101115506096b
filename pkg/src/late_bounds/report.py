"""Full sensitivity analysis of one dataset, packaged as a serializable report.

:func:`analyze` runs the point estimates, delta-method variances, Wald tests
and the bootstrap, and returns an :class:`AnalysisReport`. The report
serializes to JSON (``to_json`` / ``from_json`` round-trip every float
exactly; NaN is written as ``null``) and renders as an aligned text table or
a long-format CSV.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import MissingValue, ZeroVariance
from .estimators import IttEstimate, MuHEstimate, estimate_itt, mu_h_estimate
from .inference import ReportPlan, bootstrap, var_late, wald
from .late import engagement_for_effect_threshold, gamma_for_xi_threshold, late_estimate, xi
from .model import AnalysisConfig, TrialDataset, validate_dataset
from .transform import apply

REQUIRED_COLUMNS = ("z", "a", "y")


def read_csv(path) -> tuple[TrialDataset, str]:
    """Load a trial CSV and return the validated dataset and the sha256 of its bytes.

    Required headers are ``z``, ``a`` and ``y``; every other column is a
    covariate. Row numbers in validation errors count data rows from 0.
    """
    raw = Path(path).read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    reader = csv.DictReader(io.StringIO(raw.decode("utf-8-sig")))
    header = [h.strip() for h in (reader.fieldnames or [])]
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise MissingValue(f"{path}: header lacks required column(s) {', '.join(missing)}")
    reader.fieldnames = header
    covariates = [h for h in header if h not in REQUIRED_COLUMNS]
    rows = list(reader)
    for i, row in enumerate(rows):
        if None in row or any(v is None for v in row.values()):
            raise MissingValue("wrong number of fields", row=i)
    return validate_dataset(rows, covariates), digest


def default_a_grid(mu_h: float) -> tuple[float, ...]:
    """{0, 0.25, mu_h, 1}, deduplicated and sorted."""
    return tuple(sorted({0.0, 0.25, float(mu_h), 1.0}))


@dataclass
class GridCell:
    gamma: float
    a: float
    h_a: float
    status: str  # "estimated" or "convention"
    c_factor: float
    delta: float
    lower_bound: float
    upper_bound: float
    sigma2_c: float
    tau2: float
    se: float
    wald_statistic: float | None
    p_value: float | None
    ci_lower: float | None = None
    ci_upper: float | None = None
    se_boot: float | None = None
    ci_covers_estimate: bool | None = None


@dataclass
class XiCell:
    gamma: float
    xi: float
    ci_lower: float | None = None
    ci_upper: float | None = None


@dataclass
class AnalysisReport:
    itt: dict
    mu_h: dict
    grid: list[GridCell]
    xi_table: list[XiCell]
    thresholds: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def cell(self, gamma: float, a: float) -> GridCell:
        for c in self.grid:
            if c.gamma == gamma and c.a == a:
                return c
        raise KeyError((gamma, a))

    def to_dict(self) -> dict:
        return _clean(asdict(self))

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, allow_nan=False)

    @classmethod
    def from_dict(cls, d: dict) -> AnalysisReport:
        return cls(
            itt=dict(d["itt"]),
            mu_h=dict(d["mu_h"]),
            grid=[GridCell(**c) for c in d["grid"]],
            xi_table=[XiCell(**c) for c in d["xi_table"]],
            thresholds=dict(d.get("thresholds", {})),
            metadata=dict(d.get("metadata", {})),
            warnings=list(d.get("warnings", [])),
        )

    @classmethod
    def from_json(cls, text: str) -> AnalysisReport:
        return cls.from_dict(json.loads(text))

    def to_table(self) -> str:
        return format_table(self)

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = [f.name for f in fields(GridCell)]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for c in self.grid:
            w.writerow([_csv_value(getattr(c, k)) for k in names])
        return buf.getvalue()


def _csv_value(v):
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else v


def _clean(obj):
    """Replace non-finite floats with None and numpy scalars with Python ones."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _wald_or_none(estimate: float, tau2: float, n: int, label: str, warnings: list[str]):
    try:
        return wald(estimate, tau2, n)
    except ZeroVariance:
        warnings.append(f"{label}: zero variance, Wald test not reported")
        return None


def analyze_estimates(
    itt: IttEstimate,
    mu: MuHEstimate,
    config: AnalysisConfig,
    *,
    xi_threshold: float | None = None,
    effect_threshold: float | None = None,
) -> AnalysisReport:
    """Point estimates, variances, tests and thresholds from given ITT and mu_h.

    No bootstrap: CI fields stay ``None``. Useful for injecting reported
    estimates, and the first stage of :func:`analyze`.
    """
    warnings: list[str] = []
    spec = config.transform
    a_grid = config.a_grid if config.a_grid is not None else default_a_grid(mu.mu_h)
    gammas = tuple(sorted(config.gamma_grid))
    a_grid = tuple(sorted(a_grid))
    n = itt.n_total

    wt = _wald_or_none(itt.delta_itt, itt.sigma2_itt, n, "itt", warnings)
    itt_block = {
        "estimate": itt.delta_itt,
        "se": itt.se,
        "sigma2": itt.sigma2_itt,
        "method": itt.method,
        "n": n,
        "wald_statistic": wt.statistic if wt else None,
        "p_value": wt.p_value if wt else None,
        "ci_lower": None,
        "ci_upper": None,
    }
    mu_block = {"estimate": mu.mu_h, "se": mu.se, "sigma2": mu.sigma2_h, "n1": mu.n1, "ci_lower": None, "ci_upper": None}

    grid = []
    for g in gammas:
        for a in a_grid:
            pt = late_estimate(itt, mu, g, spec, a)
            if pt.convention:
                grid.append(GridCell(g, a, pt.h_a, "convention", pt.c_factor, 0.0, pt.lower_bound, pt.upper_bound, 0.0, 0.0, 0.0, None, None))
                continue
            vb = var_late(itt, mu, g, pt.h_a)
            wt = _wald_or_none(pt.delta, vb.tau2, n, f"delta[gamma={g:g},a={a:g}]", warnings)
            grid.append(
                GridCell(
                    g, a, pt.h_a, "estimated", pt.c_factor, pt.delta, pt.lower_bound, pt.upper_bound,
                    vb.sigma2_c, vb.tau2, vb.se_late,
                    wt.statistic if wt else None, wt.p_value if wt else None,
                )
            )
    xi_table = [XiCell(g, xi(itt, mu, g).xi) for g in gammas]

    thresholds: dict = {}
    if xi_threshold is not None:
        thresholds["xi"] = {"t": xi_threshold, "gamma_star": gamma_for_xi_threshold(itt, mu, xi_threshold)}
    if effect_threshold is not None:
        rows = []
        for g in gammas:
            et = engagement_for_effect_threshold(itt, mu, g, spec, effect_threshold)
            rows.append({"gamma": g, "a_star": et.a_star, "h_star": et.h_star, "status": et.status, "unique": et.unique})
        thresholds["effect"] = {"t": effect_threshold, "by_gamma": rows}

    metadata = {
        "version": __version__,
        "transform": str(spec),
        "itt_method": itt.method,
        "adjustment": str(config.adjustment),
        "gamma_grid": list(gammas),
        "a_grid": list(a_grid),
        "n": n,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    return AnalysisReport(itt_block, mu_block, grid, xi_table, thresholds, metadata, warnings)


def analyze(
    data: TrialDataset,
    config: AnalysisConfig,
    *,
    xi_threshold: float | None = None,
    effect_threshold: float | None = None,
    input_digest: str | None = None,
    workers: int | None = None,
) -> AnalysisReport:
    """Estimate, test and bootstrap every (gamma, a) cell of ``config``."""
    itt = estimate_itt(data, config.itt_method, config.adjustment)
    mu = mu_h_estimate(data, config.transform)
    report = analyze_estimates(itt, mu, config, xi_threshold=xi_threshold, effect_threshold=effect_threshold)
    a_grid = tuple(report.metadata["a_grid"])
    gammas = tuple(report.metadata["gamma_grid"])

    plan = ReportPlan(gammas, a_grid)
    boot = bootstrap(data, config, plan, workers=workers)
    lo, hi, sd = boot.ci_lower, boot.ci_upper, boot.se_boot
    report.itt.update(ci_lower=float(lo[0]), ci_upper=float(hi[0]), se_boot=float(sd[0]))
    report.mu_h.update(ci_lower=float(lo[1]), ci_upper=float(hi[1]), se_boot=float(sd[1]))
    for gi in range(len(gammas)):
        for ai in range(len(a_grid)):
            cell = report.grid[gi * len(a_grid) + ai]
            if cell.status == "convention":
                cell.ci_lower = cell.ci_upper = cell.se_boot = 0.0
                cell.ci_covers_estimate = True
                continue
            j = plan.delta_index(gi, ai)
            cell.ci_lower, cell.ci_upper, cell.se_boot = float(lo[j]), float(hi[j]), float(sd[j])
            cell.ci_covers_estimate = bool(cell.ci_lower <= cell.delta <= cell.ci_upper)
            if not cell.ci_covers_estimate:
                report.warnings.append(
                    f"delta[gamma={cell.gamma:g},a={cell.a:g}]: percentile CI [{cell.ci_lower:.4g}, {cell.ci_upper:.4g}] excludes the estimate {cell.delta:.4g}"
                )
        j = plan.xi_index(gi)
        report.xi_table[gi].ci_lower, report.xi_table[gi].ci_upper = float(lo[j]), float(hi[j])

    if boot.redraws:
        report.warnings.append(f"{boot.redraws} degenerate bootstrap resamples were redrawn")
    h1 = np.atleast_1d(apply(config.transform, data.a[data.z == 1]))
    report.metadata.update(
        seed=int(config.seed),
        bootstrap_reps=int(config.bootstrap_reps),
        ci_level=float(config.ci_level),
        redraws=int(boot.redraws),
        input_sha256=input_digest,
        n_intervention=int(data.n1),
        n_control=int(data.n0),
        share_h_positive=float(np.mean(h1 > 0)),
    )
    return report


def _fmt(v, width=7):
    return " " * width if v is None else f"{v:{width}.3f}"


def format_table(report: AnalysisReport) -> str:
    """Aligned text: one row per gamma, one column per a, cells ``est [lo, hi]``."""
    a_grid = report.metadata["a_grid"]
    gammas = report.metadata["gamma_grid"]
    itt, mu = report.itt, report.mu_h
    lines = [
        f"ITT  {itt['estimate']:.3f}  SE {itt['se']:.3f}"
        + (f"  CI [{itt['ci_lower']:.3f}, {itt['ci_upper']:.3f}]" if itt.get("ci_lower") is not None else "")
        + (f"  p {itt['p_value']:.3g}" if itt.get("p_value") is not None else ""),
        f"mu_h {mu['estimate']:.3f}  SE {mu['se']:.3f}  transform {report.metadata['transform']}",
        "",
    ]
    col = 26
    lines.append("gamma  " + "".join(f"{'a=' + format(a, '.3g'):>{col}}" for a in a_grid) + f"{'xi':>{col}}")
    for gi, g in enumerate(gammas):
        cells = []
        for ai in range(len(a_grid)):
            c = report.grid[gi * len(a_grid) + ai]
            text = f"{c.delta:.3f}"
            if c.ci_lower is not None:
                text += f" [{c.ci_lower:.3f}, {c.ci_upper:.3f}]"
            if c.status == "convention":
                text += "*"
            cells.append(f"{text:>{col}}")
        x = report.xi_table[gi]
        xt = f"{x.xi:.3f}" + (f" [{x.ci_lower:.3f}, {x.ci_upper:.3f}]" if x.ci_lower is not None else "")
        lines.append(f"{g:<7.3g}" + "".join(cells) + f"{xt:>{col}}")
    if any(c.status == "convention" for c in report.grid):
        lines.append("* zero by convention at gamma = 0, h(a) = 0")
    th = report.thresholds
    if "xi" in th:
        gs = th["xi"]["gamma_star"]
        lines.append(f"|xi| > {th['xi']['t']:g} for gamma < " + ("(none: never exceeded)" if gs is None else f"{gs:.4f}"))
    if "effect" in th:
        for r in th["effect"]["by_gamma"]:
            desc = {"always": "every engagement level", "never": "no engagement level"}.get(r["status"])
            if desc is None:
                desc = f"a >= {r['a_star']:.4f}" + ("" if r["unique"] else " (cut point)")
            lines.append(f"gamma {r['gamma']:g}: |delta| >= {th['effect']['t']:g} at {desc}")
    return "\n".join(lines) + "\n"
