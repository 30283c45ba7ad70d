"""Core data types: box domains, boundary conditions, operators, datasets
and hyperparameters, plus the error metric and noise model used everywhere
else in the package.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DimMismatch,
    EmptyDataset,
    LengthMismatch,
    NonFiniteValue,
    PointOutsideDomain,
    ValidationError,
    ZeroReference,
)


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box ``[lower, upper]`` in ``dim`` dimensions."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _frozen(np.atleast_1d(self.lower))
        hi = _frozen(np.atleast_1d(self.upper))
        if lo.ndim != 1 or lo.shape != hi.shape or lo.size < 1:
            raise ValidationError("lower and upper must be equal-length vectors")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValidationError("domain bounds must be finite")
        if np.any(lo >= hi):
            raise ValidationError("domain requires lower < upper on every axis")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, dim: int) -> "Domain":
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, points) -> np.ndarray:
        """Boolean mask of rows of ``points`` inside the closed box."""
        pts = as_points(points, self.dim)
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)

    def check(self, points) -> np.ndarray:
        """Return ``points`` as an ``(N, dim)`` array or raise PointOutsideDomain."""
        pts = as_points(points, self.dim)
        inside = np.all((pts >= self.lower) & (pts <= self.upper), axis=1)
        if not inside.all():
            i = int(np.flatnonzero(~inside)[0])
            raise PointOutsideDomain(i, pts[i])
        return pts

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Domain":
        return cls(np.asarray(d["lower"], float), np.asarray(d["upper"], float))


def as_points(points, dim: int) -> np.ndarray:
    """Coerce ``points`` to an ``(N, dim)`` float array.

    A 1D array is read as N scalar points when ``dim == 1`` and as a single
    point otherwise.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts.reshape(-1, 1) if dim == 1 else pts.reshape(1, -1)
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise DimMismatch(f"expected points of dimension {dim}, got shape {pts.shape}")
    return pts


class BC(str, enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(frozen=True)
class BoundaryConditionSpec:
    """One condition per face of a box.

    ``faces[2*i]`` is the face ``x_i = lower_i`` and ``faces[2*i + 1]`` the
    face ``x_i = upper_i``.
    """

    faces: tuple

    def __post_init__(self):
        faces = tuple(BC(f) for f in self.faces)
        if len(faces) == 0 or len(faces) % 2:
            raise ValidationError("need exactly one condition per face (2*dim faces)")
        object.__setattr__(self, "faces", faces)

    @classmethod
    def uniform(cls, dim: int, bc: BC) -> "BoundaryConditionSpec":
        return cls((bc,) * (2 * dim))

    @property
    def dim(self) -> int:
        return len(self.faces) // 2

    def axis(self, i: int) -> tuple[BC, BC]:
        return self.faces[2 * i], self.faces[2 * i + 1]

    def to_list(self) -> list[str]:
        return [f.value for f in self.faces]


class OperatorKind(str, enum.Enum):
    NEGATIVE_LAPLACIAN = "negative_laplacian"
    HELMHOLTZ = "helmholtz"


@dataclass(frozen=True)
class OperatorSpec:
    """``L u = -lap(u) + k**2 u``; the negative Laplacian is the ``k = 0`` case."""

    kind: OperatorKind = OperatorKind.NEGATIVE_LAPLACIAN
    helmholtz_k: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", OperatorKind(self.kind))
        k = float(self.helmholtz_k)
        if not math.isfinite(k) or k < 0:
            raise ValidationError("helmholtz_k must be finite and >= 0")
        object.__setattr__(self, "helmholtz_k", k)

    @property
    def shift(self) -> float:
        """The zeroth-order coefficient ``k**2`` (0 for the negative Laplacian)."""
        if self.kind is OperatorKind.NEGATIVE_LAPLACIAN:
            return 0.0
        return self.helmholtz_k**2

    @classmethod
    def negative_laplacian(cls) -> "OperatorSpec":
        return cls(OperatorKind.NEGATIVE_LAPLACIAN, 0.0)

    @classmethod
    def helmholtz(cls, k: float) -> "OperatorSpec":
        return cls(OperatorKind.HELMHOLTZ, k)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "k": self.helmholtz_k}


class ObservationKind(str, enum.Enum):
    SOLUTION = "u"
    SOURCE = "f"


@dataclass(frozen=True)
class Dataset:
    """Scattered observations; each row is tagged as a solution or source value."""

    points: np.ndarray
    values: np.ndarray
    kinds: tuple

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        kinds = tuple(ObservationKind(k) for k in self.kinds)
        if not (pts.shape[0] == vals.size == len(kinds)):
            raise LengthMismatch(
                f"points ({pts.shape[0]}), values ({vals.size}) and kinds "
                f"({len(kinds)}) differ in length"
            )
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "values", _frozen(vals))
        object.__setattr__(self, "kinds", kinds)

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.kinds == other.kinds
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def source_mask(self) -> np.ndarray:
        return np.array([k is ObservationKind.SOURCE for k in self.kinds], dtype=bool)

    def subset(self, kind: ObservationKind) -> "Dataset":
        kind = ObservationKind(kind)
        keep = np.array([k is kind for k in self.kinds], dtype=bool)
        return Dataset(self.points[keep], self.values[keep], (kind,) * int(keep.sum()))

    def concat(self, other: "Dataset") -> "Dataset":
        return Dataset(
            np.vstack([self.points, other.points]),
            np.concatenate([self.values, other.values]),
            self.kinds + other.kinds,
        )


def validate_dataset(ds: Dataset, dom: Domain) -> None:
    """Raise if ``ds`` is empty, has non-finite entries, or leaves ``dom``."""
    if len(ds) == 0:
        raise EmptyDataset("dataset has no observations")
    if ds.dim != dom.dim:
        raise DimMismatch(f"dataset is {ds.dim}D but domain is {dom.dim}D")
    if not np.all(np.isfinite(ds.points)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(ds.points), axis=1))[0])
        raise NonFiniteValue(f"non-finite coordinate in row {bad}")
    if not np.all(np.isfinite(ds.values)):
        bad = int(np.flatnonzero(~np.isfinite(ds.values))[0])
        raise NonFiniteValue(f"non-finite value in row {bad}")
    dom.check(ds.points)


@dataclass(frozen=True)
class Hyperparameters:
    s2: float
    ell: float
    sigma2: float = 0.0

    def __post_init__(self):
        for name in ("s2", "ell", "sigma2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not (self.s2 > 0 and math.isfinite(self.s2)):
            raise ValidationError(f"s2 must be positive and finite, got {self.s2}")
        if not (self.ell > 0 and math.isfinite(self.ell)):
            raise ValidationError(f"ell must be positive and finite, got {self.ell}")
        if not (self.sigma2 >= 0 and math.isfinite(self.sigma2)):
            raise ValidationError(f"sigma2 must be >= 0 and finite, got {self.sigma2}")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def to_dict(self) -> dict:
        return {"s2": self.s2, "ell": self.ell, "sigma2": self.sigma2}

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparameters":
        return cls(d["s2"], d["ell"], d["sigma2"])


def relative_l2_error(predicted, truth) -> float:
    """``||predicted - truth|| / ||truth||`` in the Euclidean norm."""
    p = np.asarray(predicted, dtype=float).reshape(-1)
    t = np.asarray(truth, dtype=float).reshape(-1)
    if p.size != t.size:
        raise LengthMismatch(f"lengths differ: {p.size} vs {t.size}")
    ref = np.linalg.norm(t)
    if ref == 0:
        raise ZeroReference("reference vector has zero norm")
    return float(np.linalg.norm(p - t) / ref)


def add_white_noise(values, sigma: float, rng_seed: int) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if not math.isfinite(sigma) or sigma < 0:
        raise ValidationError("sigma must be finite and >= 0")
    if sigma == 0:
        return v.copy()
    rng = np.random.default_rng(rng_seed)
    return v + sigma * rng.standard_normal(v.shape)


# -- CSV ---------------------------------------------------------------------


def dataset_to_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{i + 1}" for i in range(ds.dim)] + ["value", "kind"])
    for p, v, k in zip(ds.points, ds.values, ds.kinds):
        w.writerow([repr(float(c)) for c in p] + [repr(float(v)), k.value])
    return buf.getvalue()


def dataset_from_csv(text: str) -> Dataset:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValidationError("empty CSV")
    header = [h.strip() for h in rows[0]]
    dim = len(header) - 2
    expected = [f"x{i + 1}" for i in range(dim)] + ["value", "kind"]
    if dim < 1 or header != expected:
        raise ValidationError(f"bad dataset header {header!r}; expected {expected!r}")
    pts, vals, kinds = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValidationError(f"line {lineno}: expected {len(header)} fields")
        try:
            pts.append([float(c) for c in row[:dim]])
            vals.append(float(row[dim]))
            kinds.append(ObservationKind(row[dim + 1].strip()))
        except ValueError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    return Dataset(np.array(pts, float).reshape(-1, dim), np.array(vals, float), tuple(kinds))


def write_dataset(ds: Dataset, path) -> None:
    Path(path).write_text(dataset_to_csv(ds), encoding="utf-8", newline="\n")


def read_dataset(path) -> Dataset:
    return dataset_from_csv(Path(path).read_text(encoding="utf-8"))


def make_kinds(n_u: int, n_f: int) -> tuple:
    return (ObservationKind.SOLUTION,) * n_u + (ObservationKind.SOURCE,) * n_f


def stack_points(parts: Sequence, dim: int) -> np.ndarray:
    arrs = [as_points(p, dim) for p in parts if np.size(p)]
    if not arrs:
        return np.empty((0, dim))
    return np.vstack(arrs)
