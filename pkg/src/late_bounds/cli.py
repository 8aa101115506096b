"""Command line interface: ``late-bounds analyze|simulate|sweep``.

Exit codes: 0 success, 2 invalid input or configuration, 3 an estimation
step failed, 4 a file could not be read or written. Warnings go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, ConflictingInputs, LateBoundsError
from .estimators import IttEstimate, MuHEstimate, estimate_itt, mu_h_estimate
from .inference import ReportPlan, bootstrap
from .model import DEFAULT_GAMMA_GRID, Adjustment, AnalysisConfig, SplineTerm
from .report import analyze, read_csv
from .simulate import load_scenario, monte_carlo
from .sweep import default_sweep_a_grid, rows_to_csv, sweep_rows, write_svgs
from .transform import parse as parse_transform

EXIT_OK, EXIT_VALIDATION, EXIT_ESTIMATION, EXIT_IO = 0, 2, 3, 4


def _floats(text: str, what: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise ConfigError(f"{what}: empty list")
    return vals


def _spline(text: str) -> SplineTerm:
    col, sep, policy = text.partition(":")
    if not sep or not col:
        raise ConfigError(f"--spline expects COL:quartiles or COL:k1/k2/k3, got {text!r}")
    if policy == "quartiles":
        return SplineTerm(col)
    try:
        knots = tuple(float(k) for k in policy.split("/"))
    except ValueError:
        raise ConfigError(f"--spline {text!r}: knots must be numbers separated by '/'") from None
    return SplineTerm(col, knots)


def _adjustment(args) -> Adjustment:
    linear = tuple(c.strip() for c in args.adjust.split(",") if c.strip()) if args.adjust else ()
    splines = tuple(_spline(s) for s in args.spline or ())
    return Adjustment(linear, splines)


def _itt_method(choice: str | None, adjustment: Adjustment) -> str:
    if choice is None:
        return "ols_adjusted" if adjustment else "diff_means"
    if choice == "diff" and adjustment:
        raise ConflictingInputs("--adjust/--spline need --itt ols")
    return {"diff": "diff_means", "ols": "ols_adjusted"}[choice]


def _check_columns(data, adjustment: Adjustment):
    names = set(data.covariate_names)
    for col in list(adjustment.linear) + [s.column for s in adjustment.splines]:
        if col not in names:
            raise ConfigError(f"adjustment column {col!r} is not in the data (covariates: {', '.join(sorted(names)) or 'none'})")


def _write(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _warn(messages):
    for m in messages:
        print(f"warning: {m}", file=sys.stderr)


def cmd_analyze(args) -> int:
    data, digest = read_csv(args.data)
    adjustment = _adjustment(args)
    _check_columns(data, adjustment)
    config = AnalysisConfig(
        gamma_grid=_floats(args.gamma_grid, "--gamma-grid"),
        a_grid=None if args.a_grid == "auto" else _floats(args.a_grid, "--a-grid"),
        transform=parse_transform(args.transform),
        itt_method=_itt_method(args.itt, adjustment),
        adjustment=adjustment,
        bootstrap_reps=args.bootstrap,
        ci_level=args.level,
        seed=args.seed,
    )
    report = analyze(
        data,
        config,
        xi_threshold=args.xi_threshold,
        effect_threshold=args.effect_threshold,
        input_digest=digest,
    )
    report.metadata["input"] = str(args.data)
    text = {"json": lambda: report.to_json() + "\n", "table": report.to_table, "csv": report.to_csv}[args.format]()
    _write(text, args.out)
    if args.svg:
        _svg_from_report(report, config, args.svg)
    _warn(report.warnings)
    return EXIT_OK


def _svg_from_report(report, config, path):
    rows = sweep_rows(report.itt["estimate"], report.mu_h["estimate"], config.gamma_grid, default_sweep_a_grid(), config.transform)
    _svgs(rows, report.itt["estimate"], report.mu_h["estimate"], path, config.transform)


def _svgs(rows, itt, mu, path, spec):
    try:
        write_svgs(rows, itt, mu, path, spec)
    except ImportError:
        _warn(["matplotlib is not installed; SVG output skipped (pip install late-bounds[plot])"])


def cmd_simulate(args) -> int:
    spec, extras = load_scenario(args.scenario)
    gammas = _floats(args.gammas, "--gammas") if args.gammas else extras.get("gammas")
    a_grid = _floats(args.a_grid, "--a-grid") if args.a_grid else extras.get("a_grid", (0.0, 1.0))
    summary = monte_carlo(spec, gammas, a_grid, K=args.k, B=args.b, seed=args.seed)
    if args.format == "json":
        text = json.dumps(summary.to_dict(), indent=2, allow_nan=False) + "\n"
    else:
        text = format_mc_table(summary)
    _write(text, args.out)
    _warn(summary.warnings)
    return EXIT_OK


def format_mc_table(summary) -> str:
    head = f"{summary.scenario or 'scenario'}: N={summary.n} K={summary.K} B={summary.B} gamma0={summary.gamma0:.4g} mu_A={summary.mu_a:.4f}"
    lines = [head, f"{'quantity':<24}{'truth':>9}{'Est':>9}{'ESE':>9}{'SE_LST':>9}{'SE_B':>9}"]
    for r in summary.summary_rows():
        se_b = f"{r['se_b']:9.3f}" if r["se_b"] is not None else f"{'-':>9}"
        lines.append(f"{r['quantity']:<24}{r['truth']:9.3f}{r['est']:9.3f}{r['ese']:9.3f}{r['se_lst']:9.3f}{se_b}")
    return "\n".join(lines) + "\n"


def cmd_sweep(args) -> int:
    explicit = args.itt is not None or args.mu_h is not None
    if args.data and explicit:
        raise ConflictingInputs("give either --data or --itt/--mu-h, not both")
    if not args.data and not (args.itt is not None and args.mu_h is not None):
        raise ConfigError("sweep needs --data, or both --itt and --mu-h")
    gammas = _floats(args.gamma_grid, "--gamma-grid")
    a_grid = default_sweep_a_grid() if args.a_grid == "auto" else _floats(args.a_grid, "--a-grid")
    spec = parse_transform(args.transform)

    boot = None
    if args.data:
        data, _ = read_csv(args.data)
        adjustment = _adjustment(args)
        _check_columns(data, adjustment)
        method = _itt_method(args.itt_method, adjustment)
        itt = estimate_itt(data, method, adjustment)
        mu = mu_h_estimate(data, spec)
        if args.bootstrap:
            config = AnalysisConfig(
                gamma_grid=gammas, a_grid=a_grid, transform=spec, itt_method=method, adjustment=adjustment,
                bootstrap_reps=args.bootstrap, ci_level=args.level, seed=args.seed,
            )
            boot = bootstrap(data, config, ReportPlan(tuple(sorted(gammas)), tuple(sorted(a_grid))))
            if boot.redraws:
                _warn([f"{boot.redraws} degenerate bootstrap resamples were redrawn"])
    else:
        if not args.mu_h > 0:
            raise ConfigError(f"--mu-h must be positive, got {args.mu_h}")
        itt, mu = args.itt, args.mu_h
    rows = sweep_rows(itt, mu, gammas, a_grid, spec, boot)
    _write(rows_to_csv(rows), args.out)
    if args.svg:
        itt_v = itt.delta_itt if isinstance(itt, IttEstimate) else itt
        mu_v = mu.mu_h if isinstance(mu, MuHEstimate) else mu
        _svgs(rows, itt_v, mu_v, args.svg, spec)
    return EXIT_OK


def _add_adjust_flags(p):
    p.add_argument("--adjust", metavar="COLS", help="comma-separated covariates adjusted for linearly")
    p.add_argument(
        "--spline", action="append", metavar="COL:POLICY",
        help="restricted cubic spline adjustment; POLICY is 'quartiles' or knots k1/k2/k3 (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    default_gammas = ",".join(f"{g:g}" for g in DEFAULT_GAMMA_GRID)
    parser = argparse.ArgumentParser(prog="late-bounds", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="estimate, test and bootstrap a sensitivity grid for a trial CSV")
    p.add_argument("--data", required=True, metavar="PATH", help="CSV with columns z,a,y and optional covariates")
    p.add_argument("--gamma-grid", default=default_gammas, metavar="LIST")
    p.add_argument("--a-grid", default="auto", metavar="LIST|auto", help="auto: 0, 0.25, mean h(A) among the treated, 1")
    p.add_argument("--transform", default="identity", metavar="SPEC", help="identity, threshold:ZETA or table:PATH")
    _add_adjust_flags(p)
    p.add_argument("--itt", choices=("diff", "ols"), help="ITT estimator (default: ols when adjusting, else diff)")
    p.add_argument("--bootstrap", type=int, default=500, metavar="B")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--xi-threshold", type=float, metavar="T", help="report gamma* below which |xi| exceeds T")
    p.add_argument("--effect-threshold", type=float, metavar="T", help="report a* at which |delta| reaches T, per gamma")
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "table", "csv"), default="json")
    p.add_argument("--svg", metavar="PATH", help="also write sensitivity curves as SVG (needs matplotlib)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="Monte Carlo study under the semi-continuous engagement model")
    p.add_argument("--scenario", required=True, metavar="NAME|PATH", help="bundled scenario name or key = value file")
    p.add_argument("--k", type=int, default=200, help="Monte Carlo iterations")
    p.add_argument("--b", type=int, default=200, help="bootstrap replicates per iteration (0 to skip)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gammas", metavar="LIST", help="specified gamma values (default: scenario's, else the true gamma)")
    p.add_argument("--a-grid", metavar="LIST")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="long-format plot data of delta over (gamma, a)")
    p.add_argument("--data", metavar="PATH")
    p.add_argument("--itt", type=float, metavar="X", help="ITT effect, used with --mu-h instead of --data")
    p.add_argument("--mu-h", type=float, metavar="Y")
    p.add_argument("--gamma-grid", default=default_gammas, metavar="LIST")
    p.add_argument("--a-grid", default="auto", metavar="LIST|auto", help="auto: 101 points on [0, 1]")
    p.add_argument("--transform", default="identity", metavar="SPEC")
    _add_adjust_flags(p)
    p.add_argument("--itt-method", choices=("diff", "ols"))
    p.add_argument("--bootstrap", type=int, default=0, metavar="B", help="replicates for ci_lo/ci_hi (with --data)")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--svg", metavar="PATH")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LateBoundsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
