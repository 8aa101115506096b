"""Monotone engagement transforms h: [0, 1] -> [0, 1].

Three kinds are supported:

* ``identity``: h(a) = a
* ``threshold``: h(a) = 1 if a > zeta else 0
* ``table``: piecewise-linear interpolation through user supplied points

Every transform satisfies h(0) = 0, h(1) = 1 and is nondecreasing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DomainError,
    EndpointViolation,
    MonotonicityViolation,
    TransformSyntaxError,
)

CHECK_GRID_SIZE = 1001


@dataclass(frozen=True)
class TransformSpec:
    kind: str = "identity"
    zeta: float | None = None
    points: tuple[tuple[float, float], ...] = field(default=())

    @classmethod
    def identity(cls) -> TransformSpec:
        return cls("identity")

    @classmethod
    def threshold(cls, zeta: float) -> TransformSpec:
        return validate(cls("threshold", zeta=float(zeta)))

    @classmethod
    def table(cls, points) -> TransformSpec:
        pts = tuple((float(a), float(h)) for a, h in points)
        return validate(cls("table", points=pts))

    @property
    def invertible(self) -> bool:
        return self.kind != "threshold"

    def __call__(self, a):
        return apply(self, a)

    def __str__(self) -> str:
        if self.kind == "threshold":
            return f"threshold:{self.zeta:g}"
        if self.kind == "table":
            return "table:" + ";".join(f"{a:g}/{h:g}" for a, h in self.points)
        return "identity"


def _evaluate(spec: TransformSpec, a: np.ndarray) -> np.ndarray:
    if spec.kind == "identity":
        return a.astype(float, copy=True)
    if spec.kind == "threshold":
        return (a > spec.zeta).astype(float)
    xs, hs = zip(*spec.points)
    return np.interp(a, xs, hs)


def apply(spec: TransformSpec, a):
    """Evaluate h(a) for a scalar or array ``a`` in [0, 1]."""
    arr = np.asarray(a, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"engagement must lie in [0, 1], got {a!r}")
    out = _evaluate(spec, arr)
    if out.ndim == 0:
        return float(out)
    return out


def validate(spec: TransformSpec) -> TransformSpec:
    """Check endpoints and monotonicity; return ``spec`` unchanged if valid."""
    if spec.kind == "identity":
        return spec
    if spec.kind == "threshold":
        if spec.zeta is None or not (0.0 < spec.zeta < 1.0):
            raise EndpointViolation(f"threshold zeta must lie strictly inside (0, 1), got {spec.zeta}")
        return spec
    if spec.kind != "table":
        raise TransformSyntaxError(f"unknown transform kind {spec.kind!r}")

    if len(spec.points) < 2:
        raise EndpointViolation("a table transform needs at least two points")
    xs = np.array([p[0] for p in spec.points])
    hs = np.array([p[1] for p in spec.points])
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(hs))):
        raise TransformSyntaxError("table transform contains non-finite values")
    if np.any(np.diff(xs) <= 0):
        raise MonotonicityViolation("table abscissae must be strictly ascending")
    if xs[0] != 0.0 or xs[-1] != 1.0:
        raise EndpointViolation("table must span exactly [0, 1]")
    if hs[0] != 0.0 or hs[-1] != 1.0:
        raise EndpointViolation(f"table must satisfy h(0) = 0 and h(1) = 1, got h(0) = {hs[0]}, h(1) = {hs[-1]}")

    grid = np.linspace(0.0, 1.0, CHECK_GRID_SIZE)
    vals = _evaluate(spec, grid)
    if np.any(np.diff(vals) < 0) or np.any(np.diff(hs) < 0):
        raise MonotonicityViolation("table transform is not nondecreasing")
    return spec


def inverse(spec: TransformSpec, target: float) -> float:
    """Smallest a in [0, 1] with h(a) >= target (exact for identity/table)."""
    if not 0.0 <= target <= 1.0:
        raise DomainError(f"transform values lie in [0, 1], got {target}")
    if spec.kind == "identity":
        return float(target)
    if spec.kind == "threshold":
        return 0.0 if target <= 0.0 else float(spec.zeta)
    xs = [p[0] for p in spec.points]
    hs = [p[1] for p in spec.points]
    if target <= hs[0]:
        return xs[0]
    for i in range(1, len(xs)):
        if hs[i] >= target:
            # first segment reaching the target; hs[i-1] < target here
            frac = (target - hs[i - 1]) / (hs[i] - hs[i - 1])
            return float(xs[i - 1] + frac * (xs[i] - xs[i - 1]))
    return xs[-1]


def read_table(path) -> TransformSpec:
    """Read a two-column ``a,h`` CSV (header optional) into a table transform."""
    points = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise TransformSyntaxError(f"{path}:{lineno}: expected two columns a,h")
            try:
                points.append((float(row[0]), float(row[1])))
            except ValueError:
                if lineno == 1:
                    continue
                raise TransformSyntaxError(f"{path}:{lineno}: non-numeric entry") from None
    return TransformSpec.table(points)


def parse(text: str) -> TransformSpec:
    """Parse CLI syntax: ``identity``, ``threshold:0.8`` or ``table:path.csv``."""
    text = text.strip()
    if text == "identity":
        return TransformSpec.identity()
    kind, sep, arg = text.partition(":")
    if not sep:
        raise TransformSyntaxError(f"unrecognised transform {text!r}")
    if kind == "threshold":
        try:
            zeta = float(arg)
        except ValueError:
            raise TransformSyntaxError(f"bad threshold value {arg!r}") from None
        return TransformSpec.threshold(zeta)
    if kind == "table":
        if not Path(arg).is_file():
            raise FileNotFoundError(f"transform table not found: {arg}")
        return read_table(arg)
    raise TransformSyntaxError(f"unrecognised transform {text!r}")
