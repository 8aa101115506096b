"""Core data types for a two-arm trial with post-randomization engagement.

A :class:`TrialDataset` holds, per subject, the randomized arm ``z``, the
engagement proportion ``a`` and the outcome ``y``, plus optional baseline
covariates. Control subjects cannot engage, so ``z == 0`` forces ``a == 0``.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np

from .errors import (
    ConfigError,
    ControlEngagement,
    CovariateMismatch,
    EmptyArm,
    InvalidArm,
    MissingValue,
    NonFiniteOutcome,
    OutOfRangeEngagement,
    ZeroInstrument,
)
from .transform import TransformSpec, validate as validate_transform

ITT_METHODS = ("diff_means", "ols_adjusted")


class TrialRow(NamedTuple):
    z: int
    a: float
    y: float
    covariates: tuple[float, ...] = ()


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class TrialDataset:
    """Validated, immutable column store. Build it with :func:`validate_dataset`."""

    z: np.ndarray
    a: np.ndarray
    y: np.ndarray
    covariates: np.ndarray
    covariate_names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "z", _frozen(np.asarray(self.z, dtype=np.int8)))
        object.__setattr__(self, "a", _frozen(np.asarray(self.a, dtype=float)))
        object.__setattr__(self, "y", _frozen(np.asarray(self.y, dtype=float)))
        cov = np.asarray(self.covariates, dtype=float).reshape(len(self.z), -1)
        object.__setattr__(self, "covariates", _frozen(cov))
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))

    def __len__(self) -> int:
        return len(self.z)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrialDataset):
            return NotImplemented
        return (
            self.covariate_names == other.covariate_names
            and np.array_equal(self.z, other.z)
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.covariates, other.covariates)
        )

    __hash__ = None

    @property
    def n(self) -> int:
        return len(self.z)

    @property
    def n1(self) -> int:
        return int(self.z.sum())

    @property
    def n0(self) -> int:
        return self.n - self.n1

    @property
    def arm_counts(self) -> tuple[int, int]:
        return self.n0, self.n1

    @property
    def rows(self) -> list[TrialRow]:
        return [
            TrialRow(int(z), float(a), float(y), tuple(float(c) for c in cov))
            for z, a, y, cov in zip(self.z, self.a, self.y, self.covariates)
        ]

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.covariate_names.index(name)
        except ValueError:
            raise CovariateMismatch(f"unknown covariate {name!r}", column=name) from None
        return self.covariates[:, j]

    def take(self, index) -> TrialDataset:
        """Row subset / resample. Skips validation: callers check degeneracy."""
        index = np.asarray(index)
        return TrialDataset(self.z[index], self.a[index], self.y[index], self.covariates[index], self.covariate_names)


def _is_missing(v) -> bool:
    if v is None:
        return True
    if isinstance(v, str):
        return v.strip() == ""
    try:
        return math.isnan(float(v))
    except (TypeError, ValueError):
        return False


def _as_float(v, *, row: int, column: str) -> float:
    try:
        return float(v)
    except (TypeError, ValueError):
        raise MissingValue(f"not a number: {v!r}", row=row, column=column) from None


def _normalize_record(rec, covariate_names):
    if isinstance(rec, TrialRow):
        return rec.z, rec.a, rec.y, tuple(rec.covariates)
    if isinstance(rec, Mapping):
        cov = tuple(rec.get(name) for name in covariate_names)
        return rec.get("z"), rec.get("a"), rec.get("y"), cov
    z, a, y, *rest = rec
    cov = tuple(rest[0]) if rest else ()
    return z, a, y, cov


def validate_dataset(
    records: Iterable[Any] | TrialDataset,
    covariate_names: Sequence[str] | None = None,
) -> TrialDataset:
    """Validate raw records and build a :class:`TrialDataset`.

    ``records`` may be mappings with keys ``z``, ``a``, ``y`` (plus one key per
    covariate name), :class:`TrialRow` objects, ``(z, a, y[, covariates])``
    tuples or an existing dataset. Missing control-arm engagement becomes 0.
    Row numbers in error messages are 0-based record indices.
    """
    if isinstance(records, TrialDataset):
        if covariate_names is None:
            covariate_names = records.covariate_names
        records = records.rows
    records = list(records)
    if covariate_names is None:
        first = records[0] if records else None
        if isinstance(first, Mapping):
            covariate_names = [k for k in first if k not in ("z", "a", "y")]
        elif isinstance(first, TrialRow):
            covariate_names = [f"x{j}" for j in range(len(first.covariates))]
        else:
            covariate_names = []
    covariate_names = tuple(covariate_names)
    p = len(covariate_names)

    zs = np.empty(len(records), dtype=np.int8)
    as_ = np.empty(len(records))
    ys = np.empty(len(records))
    cov = np.empty((len(records), p))
    for i, rec in enumerate(records):
        z, a, y, c = _normalize_record(rec, covariate_names)
        if _is_missing(z):
            raise MissingValue("arm indicator is missing", row=i, column="z")
        zf = _as_float(z, row=i, column="z")
        if zf not in (0.0, 1.0):
            raise InvalidArm(f"arm must be 0 or 1, got {z!r}", row=i, column="z")
        zi = int(zf)

        if _is_missing(a):
            if zi == 1:
                raise MissingValue("engagement missing for an intervention-arm subject", row=i, column="a")
            af = 0.0
        else:
            af = _as_float(a, row=i, column="a")
            if not (0.0 <= af <= 1.0):
                raise OutOfRangeEngagement(f"engagement must lie in [0, 1], got {af}", row=i, column="a")
            if zi == 0 and af > 0.0:
                raise ControlEngagement(f"control subject has engagement {af} > 0", row=i, column="a")

        if _is_missing(y):
            raise MissingValue("outcome is missing", row=i, column="y")
        yf = _as_float(y, row=i, column="y")
        if not math.isfinite(yf):
            raise NonFiniteOutcome(f"outcome must be finite, got {yf}", row=i, column="y")

        if len(c) != p:
            raise CovariateMismatch(f"expected {p} covariates, got {len(c)}", row=i)
        for j, v in enumerate(c):
            if _is_missing(v):
                raise MissingValue("covariate is missing", row=i, column=covariate_names[j])
            fv = _as_float(v, row=i, column=covariate_names[j])
            if not math.isfinite(fv):
                raise MissingValue(f"covariate must be finite, got {fv}", row=i, column=covariate_names[j])
            cov[i, j] = fv
        zs[i], as_[i], ys[i] = zi, af, yf

    n1 = int(zs.sum())
    if n1 == 0 or n1 == len(zs):
        raise EmptyArm(f"both arms need subjects (control={len(zs) - n1}, intervention={n1})")
    if not np.any(as_[zs == 1] > 0):
        raise ZeroInstrument("every intervention-arm subject has zero engagement")
    return TrialDataset(zs, as_, ys, cov, covariate_names)


def dataset_from_arrays(z, a, y, covariates=None, covariate_names: Sequence[str] = ()) -> TrialDataset:
    """Vectorized counterpart of :func:`validate_dataset` for numeric arrays.

    NaN engagement in the control arm is read as missing and set to 0.
    """
    z = np.asarray(z, dtype=float)
    a = np.array(a, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(z)
    if covariates is None:
        covariates = np.empty((n, 0))
    cov = np.asarray(covariates, dtype=float).reshape(n, -1)
    names = tuple(covariate_names)
    if len(a) != n or len(y) != n:
        raise CovariateMismatch("z, a and y must have the same length")
    if cov.shape[1] != len(names):
        raise CovariateMismatch(f"{cov.shape[1]} covariate columns but {len(names)} names")

    def first(mask):
        return int(np.flatnonzero(mask)[0])

    bad = ~np.isin(z, (0.0, 1.0))
    if bad.any():
        raise InvalidArm(f"arm must be 0 or 1, got {z[first(bad)]}", row=first(bad), column="z")
    ctrl = z == 0
    a[ctrl & np.isnan(a)] = 0.0
    if np.isnan(a).any():
        raise MissingValue("engagement missing for an intervention-arm subject", row=first(np.isnan(a)), column="a")
    bad = (a < 0) | (a > 1) | ~np.isfinite(a)
    if bad.any():
        raise OutOfRangeEngagement(f"engagement must lie in [0, 1], got {a[first(bad)]}", row=first(bad), column="a")
    bad = ctrl & (a > 0)
    if bad.any():
        raise ControlEngagement(f"control subject has engagement {a[first(bad)]} > 0", row=first(bad), column="a")
    bad = ~np.isfinite(y)
    if bad.any():
        raise NonFiniteOutcome(f"outcome must be finite, got {y[first(bad)]}", row=first(bad), column="y")
    bad = ~np.isfinite(cov)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise MissingValue("covariate is missing or non-finite", row=int(i), column=names[j])
    n1 = int((z == 1).sum())
    if n1 == 0 or n1 == n:
        raise EmptyArm(f"both arms need subjects (control={n - n1}, intervention={n1})")
    if not np.any(a[z == 1] > 0):
        raise ZeroInstrument("every intervention-arm subject has zero engagement")
    return TrialDataset(z, a, y, cov, names)


@dataclass(frozen=True)
class SplineTerm:
    """Restricted cubic spline on ``column``; ``knots=None`` means inner quartiles."""

    column: str
    knots: tuple[float, ...] | None = None


@dataclass(frozen=True)
class Adjustment:
    """Covariate adjustment for the regression ITT estimator."""

    linear: tuple[str, ...] = ()
    splines: tuple[SplineTerm, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.linear or self.splines)

    def __str__(self) -> str:
        parts = list(self.linear)
        for s in self.splines:
            policy = "quartiles" if s.knots is None else "/".join(f"{k:g}" for k in s.knots)
            parts.append(f"rcs({s.column}:{policy})")
        return ", ".join(parts) if parts else "none"


def check_gamma(gamma: float) -> float:
    g = float(gamma)
    if not 0.0 <= g <= 1.0:
        raise ConfigError(f"gamma must lie in [0, 1], got {gamma}")
    return g


DEFAULT_GAMMA_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class AnalysisConfig:
    """Settings for a full sensitivity analysis.

    ``a_grid=None`` means the default reporting grid {0, 0.25, mean h(A), 1}.
    """

    gamma_grid: tuple[float, ...] = DEFAULT_GAMMA_GRID
    a_grid: tuple[float, ...] | None = None
    transform: TransformSpec = field(default_factory=TransformSpec.identity)
    itt_method: str = "diff_means"
    adjustment: Adjustment = field(default_factory=Adjustment)
    bootstrap_reps: int = 500
    ci_level: float = 0.95
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gamma_grid", tuple(check_gamma(g) for g in self.gamma_grid))
        if not self.gamma_grid:
            raise ConfigError("gamma grid is empty")
        if self.a_grid is not None:
            grid = tuple(float(a) for a in self.a_grid)
            if not grid or any(not 0.0 <= a <= 1.0 for a in grid):
                raise ConfigError(f"a grid values must lie in [0, 1], got {self.a_grid}")
            object.__setattr__(self, "a_grid", grid)
        validate_transform(self.transform)
        if self.itt_method not in ITT_METHODS:
            raise ConfigError(f"itt_method must be one of {ITT_METHODS}, got {self.itt_method!r}")
        if int(self.bootstrap_reps) < 2:
            raise ConfigError(f"need at least 2 bootstrap replicates, got {self.bootstrap_reps}")
        if not 0.0 < self.ci_level < 1.0:
            raise ConfigError(f"ci_level must lie in (0, 1), got {self.ci_level}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
