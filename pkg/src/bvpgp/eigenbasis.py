"""Closed-form eigenpairs of ``-lap + k**2`` on boxes with per-face Dirichlet or
Neumann conditions.

Every shipped family is a tensor product of one-dimensional sine/cosine
factors.  On an axis ``[a, b]`` of width ``w`` with ``t = (x - a) / w`` the
factors are, up to the normalisation ``sqrt(2 / w)``:

=========  =========  ==========================  ===========
lower      upper      factor                      index
=========  =========  ==========================  ===========
Dirichlet  Dirichlet  ``sin(n pi t)``             n = 1, 2, ..
Neumann    Neumann    ``cos(n pi t)``             n = 1, 2, ..
Neumann    Dirichlet  ``cos((2m+1) pi t / 2)``    m = 0, 1, ..
Dirichlet  Neumann    ``sin((2m+1) pi t / 2)``    m = 0, 1, ..
=========  =========  ==========================  ===========

The constant Neumann mode is left out so that every eigenvalue is positive.
Trigonometric factors go through :func:`sinpi`/:func:`cospi`, which return
exact zeros at the boundary faces.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .domain import (
    BC,
    BoundaryConditionSpec,
    Domain,
    Hyperparameters,
    OperatorKind,
    OperatorSpec,
)
from .errors import InvalidOrder, ValidationError


def sinpi(x):
    """``sin(pi * x)`` with exact zeros at integers."""
    r = np.remainder(np.asarray(x, dtype=float), 2.0)
    upper = r >= 1.0
    sign = np.where(upper, -1.0, 1.0)
    r = np.where(upper, r - 1.0, r)
    r = np.minimum(r, 1.0 - r)
    return sign * np.sin(np.pi * r)


def cospi(x):
    """``cos(pi * x)`` with exact zeros at half-integers."""
    return sinpi(np.asarray(x, dtype=float) + 0.5)


_SIN, _COS = 0, 1


def _axis_family(lo_bc: BC, hi_bc: BC, count: int):
    """Return (trig kind, frequencies in units of pi/w, labels) for one axis."""
    if lo_bc is BC.DIRICHLET and hi_bc is BC.DIRICHLET:
        labels = np.arange(1, count + 1)
        return _SIN, labels.astype(float), labels
    if lo_bc is BC.NEUMANN and hi_bc is BC.NEUMANN:
        labels = np.arange(1, count + 1)
        return _COS, labels.astype(float), labels
    labels = np.arange(count)
    freqs = (2 * labels + 1) / 2.0
    return (_COS if lo_bc is BC.NEUMANN else _SIN), freqs, labels


@dataclass(frozen=True)
class EigenPair:
    lam: float
    index: tuple


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """First ``M`` eigenpairs of ``operator`` on ``domain`` under ``bcs``.

    ``orders`` holds the number of one-dimensional factors kept per axis;
    ``M`` is their product.  Pairs are sorted by eigenvalue, ties broken by
    the lexicographic order of the multi-index.
    """

    domain: Domain
    bcs: BoundaryConditionSpec
    operator: OperatorSpec
    orders: tuple

    def __post_init__(self):
        dim = self.domain.dim
        if self.bcs.dim != dim:
            raise ValidationError("boundary spec does not match domain dimension")
        orders = tuple(int(m) for m in self.orders)
        if len(orders) != dim or any(m < 1 for m in orders):
            raise InvalidOrder(f"need one order >= 1 per axis, got {self.orders}")
        object.__setattr__(self, "orders", orders)

        kinds, freqs, labels = [], [], []
        for i in range(dim):
            kind, fr, lab = _axis_family(*self.bcs.axis(i), orders[i])
            kinds.append(kind)
            freqs.append(fr)
            labels.append(lab)
        w = self.domain.widths

        combos = []
        for multi in itertools.product(*[range(m) for m in orders]):
            mu2 = sum((freqs[i][multi[i]] * math.pi / w[i]) ** 2 for i in range(dim))
            index = tuple(int(labels[i][multi[i]]) for i in range(dim))
            combos.append((mu2 + self.operator.shift, index, multi))
        combos.sort(key=lambda c: (c[0], c[1]))

        lams = np.array([c[0] for c in combos])
        lams.setflags(write=False)
        sel = np.array([c[2] for c in combos], dtype=int).reshape(len(combos), dim)
        object.__setattr__(self, "_kinds", tuple(kinds))
        object.__setattr__(self, "_freqs", tuple(np.asarray(f) for f in freqs))
        object.__setattr__(self, "_sel", sel)
        object.__setattr__(self, "_lams", lams)
        object.__setattr__(
            self, "pairs", tuple(EigenPair(float(c[0]), c[1]) for c in combos)
        )

    @property
    def M(self) -> int:
        return len(self.pairs)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._lams

    def _axis_factors(self, x: np.ndarray, i: int, deriv: bool = False) -> np.ndarray:
        lo, w = self.domain.lower[i], self.domain.widths[i]
        t = (x - lo) / w
        arg = np.outer(t, self._freqs[i])
        norm = math.sqrt(2.0 / w)
        if not deriv:
            return norm * (sinpi(arg) if self._kinds[i] == _SIN else cospi(arg))
        scale = norm * self._freqs[i] * math.pi / w
        if self._kinds[i] == _SIN:
            return scale * cospi(arg)
        return -scale * sinpi(arg)

    def evaluate(self, points) -> np.ndarray:
        """``(N, M)`` matrix of eigenfunction values; no domain check."""
        pts = _as2d(points, self.dim)
        out = np.ones((pts.shape[0], self.M))
        for i in range(self.dim):
            out *= self._axis_factors(pts[:, i], i)[:, self._sel[:, i]]
        return out

    def gradient(self, points) -> np.ndarray:
        """``(N, M, dim)`` array of eigenfunction gradients (closed form)."""
        pts = _as2d(points, self.dim)
        vals = [self._axis_factors(pts[:, i], i)[:, self._sel[:, i]] for i in range(self.dim)]
        ders = [
            self._axis_factors(pts[:, i], i, deriv=True)[:, self._sel[:, i]]
            for i in range(self.dim)
        ]
        out = np.empty((pts.shape[0], self.M, self.dim))
        for d in range(self.dim):
            g = ders[d].copy()
            for i in range(self.dim):
                if i != d:
                    g *= vals[i]
            out[:, :, d] = g
        return out

    def phi(self, j: int, x) -> float:
        return float(self.evaluate(np.asarray(x, float).reshape(1, self.dim))[0, j])

    def grad_phi(self, j: int, x) -> np.ndarray:
        return self.gradient(np.asarray(x, float).reshape(1, self.dim))[0, j]

    def to_dict(self) -> dict:
        return {
            "operator": self.operator.kind.value,
            "k": self.operator.helmholtz_k,
            "bcs": self.bcs.to_list(),
            "orders": list(self.orders),
            "domain": self.domain.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EigenBasis":
        return cls(
            Domain.from_dict(d["domain"]),
            BoundaryConditionSpec(tuple(d["bcs"])),
            OperatorSpec(OperatorKind(d["operator"]), d["k"]),
            tuple(d["orders"]),
        )


def _as2d(points, dim):
    pts = np.asarray(points, dtype=float)
    if pts.ndim <= 1:
        pts = pts.reshape(-1, 1) if dim == 1 else pts.reshape(1, dim)
    return pts


def laplacian_1d_dirichlet_basis(M: int, domain: Domain | None = None) -> EigenBasis:
    if M < 1:
        raise InvalidOrder(f"M must be >= 1, got {M}")
    domain = domain or Domain.unit(1)
    return EigenBasis(
        domain,
        BoundaryConditionSpec.uniform(1, BC.DIRICHLET),
        OperatorSpec.negative_laplacian(),
        (M,),
    )


def laplacian_1d_neumann_basis(M: int, domain: Domain | None = None) -> EigenBasis:
    if M < 1:
        raise InvalidOrder(f"M must be >= 1, got {M}")
    domain = domain or Domain.unit(1)
    return EigenBasis(
        domain,
        BoundaryConditionSpec.uniform(1, BC.NEUMANN),
        OperatorSpec.negative_laplacian(),
        (M,),
    )


def helmholtz_2d_mixed_basis(M1: int, k: float, domain: Domain | None = None) -> EigenBasis:
    """Helmholtz eigenbasis with Neumann faces at x=0, y=0 and Dirichlet at x=1, y=1."""
    if M1 < 1:
        raise InvalidOrder(f"M1 must be >= 1, got {M1}")
    domain = domain or Domain.unit(2)
    bcs = BoundaryConditionSpec((BC.NEUMANN, BC.DIRICHLET, BC.NEUMANN, BC.DIRICHLET))
    return EigenBasis(domain, bcs, OperatorSpec.helmholtz(k), (M1, M1))


def basis_matrix(basis: EigenBasis, points, scale_by_lambda: bool = False) -> np.ndarray:
    """Entry ``(i, j)`` is ``phi_j(x_i)``, times ``lambda_j`` when scaled."""
    pts = basis.domain.check(points)
    out = basis.evaluate(pts)
    if scale_by_lambda:
        out = out * basis.eigenvalues
    return out


def spectral_density_se(hp: Hyperparameters, dim: int, omega):
    """Fourier transform of the squared-exponential kernel in ``dim`` dimensions."""
    omega = np.asarray(omega, dtype=float)
    val = hp.s2 * (2.0 * math.pi * hp.ell**2) ** (dim / 2.0) * np.exp(-0.5 * hp.ell**2 * omega**2)
    return float(val) if val.ndim == 0 else val
