"""Covariance kernels.

Three families share one small interface used by the regression code:

* :class:`SEKernel` -- the squared-exponential kernel for solution values.
* :class:`OperatorKernelBlocks` -- the squared-exponential kernel pushed
  through ``L = -lap + kappa**2`` on either argument, giving the co-kriging
  blocks ``k``, ``L' k``, ``L k`` and ``L L' k``.
* :class:`SpectralKernel` -- the truncated eigenfunction expansion
  ``sum_j S(sqrt(lambda_j)) phi_j(x) phi_j(x')``, which satisfies the
  boundary conditions of its basis.

Interface: ``cov(X1, src1, X2, src2)`` where ``src*`` are boolean masks
marking source (``f``) rows, ``cov_derivs`` for the hyperparameter
derivatives, ``prior_var`` for the diagonal, and ``cov_grad_x`` for the
gradient of solution-row covariances in the first argument.

Operator blocks
---------------
With ``a = 1/ell**2``, ``rho = |x - x'|**2``, ``d`` the dimension and
``k = s2 exp(-a rho / 2)``, every block is ``k * P(rho)`` with::

    P_uu = 1
    P_uf = P_fu = d a - a**2 rho + kappa**2
    P_ff = a**4 rho**2 - (2d + 4) a**3 rho + d (d + 2) a**2
           - 2 kappa**2 (a**2 rho - d a) + kappa**4
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .domain import Dataset, Hyperparameters, OperatorSpec, as_points
from .eigenbasis import EigenBasis, spectral_density_se
from .errors import DimMismatch, KindUnsupportedByKernel, UnsupportedOperator


def _sqdist(X1, X2):
    r = X1[:, None, :] - X2[None, :, :]
    return r, np.einsum("ijk,ijk->ij", r, r)


def _mask(src, n):
    if src is None:
        return np.zeros(n, dtype=bool)
    src = np.asarray(src, dtype=bool).reshape(-1)
    if src.size == 1 and n != 1:
        return np.full(n, bool(src[0]))
    return src


class _SEFamily:
    """Shared machinery for the squared-exponential based kernels."""

    hp: Hyperparameters

    @property
    def _shift(self) -> float:
        return 0.0

    def _poly(self, rho, dim, block):
        a = 1.0 / self.hp.ell**2
        c = self._shift
        if block == 0:
            return np.ones_like(rho)
        if block == 1:
            return dim * a - a**2 * rho + c
        return (
            a**4 * rho**2
            - (2 * dim + 4) * a**3 * rho
            + dim * (dim + 2) * a**2
            - 2 * c * (a**2 * rho - dim * a)
            + c**2
        )

    def _poly_da(self, rho, dim, block):
        a = 1.0 / self.hp.ell**2
        c = self._shift
        if block == 0:
            return np.zeros_like(rho)
        if block == 1:
            return dim - 2 * a * rho
        return (
            4 * a**3 * rho**2
            - 3 * (2 * dim + 4) * a**2 * rho
            + 2 * dim * (dim + 2) * a
            - 2 * c * (2 * a * rho - dim)
        )

    def _poly_drho(self, rho, dim, block):
        a = 1.0 / self.hp.ell**2
        c = self._shift
        if block == 0:
            return np.zeros_like(rho)
        if block == 1:
            return np.full_like(rho, -(a**2))
        return 2 * a**4 * rho - (2 * dim + 4) * a**3 - 2 * c * a**2

    def _blocks(self, src1, src2):
        return src1.astype(int)[:, None] + src2.astype(int)[None, :]

    def _check_kinds(self, *masks):
        pass

    def _prepare(self, X1, src1, X2, src2):
        X1 = np.asarray(X1, float)
        X2 = np.asarray(X2, float)
        if X1.ndim == 1:
            X1 = X1.reshape(-1, 1)
        if X2.ndim == 1:
            X2 = X2.reshape(-1, 1)
        if X1.shape[1] != X2.shape[1]:
            raise DimMismatch(f"point dimensions differ: {X1.shape[1]} vs {X2.shape[1]}")
        s1 = _mask(src1, X1.shape[0])
        s2 = _mask(src2, X2.shape[0])
        self._check_kinds(s1, s2)
        return X1, s1, X2, s2

    def cov(self, X1, src1, X2, src2) -> np.ndarray:
        X1, s1, X2, s2 = self._prepare(X1, src1, X2, src2)
        _, rho = _sqdist(X1, X2)
        dim = X1.shape[1]
        k = self.hp.s2 * np.exp(-0.5 * rho / self.hp.ell**2)
        blocks = self._blocks(s1, s2)
        P = np.empty_like(rho)
        for b in np.unique(blocks):
            sel = blocks == b
            P[sel] = self._poly(rho[sel], dim, b)
        return k * P

    def cov_derivs(self, X, src) -> tuple[np.ndarray, np.ndarray]:
        """``(dK/ds2, dK/dell)`` over the rows of ``X``."""
        X, s, _, _ = self._prepare(X, src, X, src)
        _, rho = _sqdist(X, X)
        dim = X.shape[1]
        ell = self.hp.ell
        a = 1.0 / ell**2
        k = self.hp.s2 * np.exp(-0.5 * a * rho)
        blocks = self._blocks(s, s)
        P = np.empty_like(rho)
        dP = np.empty_like(rho)
        for b in np.unique(blocks):
            sel = blocks == b
            P[sel] = self._poly(rho[sel], dim, b)
            dP[sel] = self._poly_da(rho[sel], dim, b)
        K = k * P
        dK_da = k * (-0.5 * rho * P + dP)
        return K / self.hp.s2, dK_da * (-2.0 / ell**3)

    def prior_var(self, X, src) -> np.ndarray:
        X = np.asarray(X, float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        s = _mask(src, X.shape[0])
        self._check_kinds(s)
        zero = np.zeros(X.shape[0])
        return self.hp.s2 * np.where(s, self._poly(zero, X.shape[1], 2), 1.0)

    def cov_grad_x(self, Xs, X2, src2) -> np.ndarray:
        """Gradient in ``x*`` of ``Cov(u(x*), obs_i)``, shape ``(n*, N, dim)``."""
        Xs, ss, X2, s2 = self._prepare(Xs, None, X2, src2)
        r, rho = _sqdist(Xs, X2)
        dim = Xs.shape[1]
        a = 1.0 / self.hp.ell**2
        k = self.hp.s2 * np.exp(-0.5 * a * rho)
        blocks = self._blocks(ss, s2)
        P = np.empty_like(rho)
        dP = np.empty_like(rho)
        for b in np.unique(blocks):
            sel = blocks == b
            P[sel] = self._poly(rho[sel], dim, b)
            dP[sel] = self._poly_drho(rho[sel], dim, b)
        return (k * (-a * P + 2.0 * dP))[:, :, None] * r


@dataclass(frozen=True)
class SEKernel(_SEFamily):
    """``s2 * exp(-|x - x'|**2 / (2 ell**2))``; solution rows only."""

    hp: Hyperparameters

    def with_hp(self, hp: Hyperparameters) -> "SEKernel":
        return replace(self, hp=hp)

    def _check_kinds(self, *masks):
        if any(np.any(m) for m in masks):
            raise KindUnsupportedByKernel("SEKernel cannot model source observations")

    def __call__(self, x, x2) -> float:
        return se_eval(self, x, x2)

    def to_dict(self) -> dict:
        return {"kind": "se"}


@dataclass(frozen=True)
class OperatorKernelBlocks(_SEFamily):
    """Co-kriging blocks of a squared-exponential prior for ``u`` and ``f = L u``."""

    base: SEKernel
    operator: OperatorSpec

    def __post_init__(self):
        if not isinstance(self.operator, OperatorSpec):
            raise UnsupportedOperator(f"unsupported operator {self.operator!r}")

    @property
    def hp(self) -> Hyperparameters:
        return self.base.hp

    @property
    def _shift(self) -> float:
        return self.operator.shift

    def with_hp(self, hp: Hyperparameters) -> "OperatorKernelBlocks":
        return replace(self, base=self.base.with_hp(hp))

    def to_dict(self) -> dict:
        return {"kind": "operator", "operator": self.operator.to_dict()}


@dataclass(frozen=True)
class SpectralKernel:
    """Eigenfunction-expansion kernel weighted by the SE spectral density."""

    basis: EigenBasis
    hp: Hyperparameters

    def with_hp(self, hp: Hyperparameters) -> "SpectralKernel":
        return replace(self, hp=hp)

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def Lambda(self) -> np.ndarray:
        """Diagonal of the spectral weight matrix."""
        return spectral_density_se(self.hp, self.dim, np.sqrt(self.basis.eigenvalues))

    def Lambda_derivs(self) -> tuple[np.ndarray, np.ndarray]:
        """``(dLambda/ds2, dLambda/dell)`` as diagonals."""
        lam = self.Lambda
        ell = self.hp.ell
        return lam / self.hp.s2, lam * (self.dim / ell - ell * self.basis.eigenvalues)

    def features(self, X, src) -> np.ndarray:
        """Rows ``phi(x)`` for solution rows and ``lambda * phi(x)`` for source rows."""
        X = as_points(X, self.dim)
        F = self.basis.evaluate(X)
        s = _mask(src, X.shape[0])
        if s.any():
            F[s] *= self.basis.eigenvalues
        return F

    def cov(self, X1, src1, X2, src2) -> np.ndarray:
        F1 = self.features(X1, src1)
        F2 = self.features(X2, src2)
        return (F1 * self.Lambda) @ F2.T

    def cov_derivs(self, X, src):
        F = self.features(X, src)
        d_s2, d_ell = self.Lambda_derivs()
        return (F * d_s2) @ F.T, (F * d_ell) @ F.T

    def prior_var(self, X, src) -> np.ndarray:
        F = self.features(X, src)
        return (F**2) @ self.Lambda

    def cov_grad_x(self, Xs, X2, src2) -> np.ndarray:
        G = self.basis.gradient(as_points(Xs, self.dim))
        F2 = self.features(X2, src2)
        return np.einsum("sjd,j,nj->snd", G, self.Lambda, F2)

    def __call__(self, x, x2) -> float:
        return spectral_eval(self, x, x2)

    def to_dict(self) -> dict:
        return {"kind": "spectral", "basis": self.basis.to_dict()}


def se_eval(kern: SEKernel, x, x2) -> float:
    x = np.atleast_1d(np.asarray(x, float))
    x2 = np.atleast_1d(np.asarray(x2, float))
    if x.shape != x2.shape:
        raise DimMismatch(f"point dimensions differ: {x.shape} vs {x2.shape}")
    d2 = float(np.sum((x - x2) ** 2))
    return kern.hp.s2 * math.exp(-0.5 * d2 / kern.hp.ell**2)


def operator_blocks_eval(blocks: OperatorKernelBlocks, x, x2):
    """Return ``(k11, k12, k21, k22)`` at the pair ``(x, x2)``."""
    x = np.atleast_1d(np.asarray(x, float)).reshape(1, -1)
    x2 = np.atleast_1d(np.asarray(x2, float)).reshape(1, -1)
    out = []
    for s1, s2 in ((False, False), (False, True), (True, False), (True, True)):
        out.append(float(blocks.cov(x, [s1], x2, [s2])[0, 0]))
    return tuple(out)


def spectral_eval(kern: SpectralKernel, x, x2) -> float:
    dom = kern.basis.domain
    p = dom.check(np.asarray(x, float).reshape(1, kern.dim))
    q = dom.check(np.asarray(x2, float).reshape(1, kern.dim))
    return float(kern.cov(p, None, q, None)[0, 0])


def spectral_joint_gram(kern: SpectralKernel, ds: Dataset):
    """``(Phi_joint, Lambda)`` with ``Lambda`` returned as its diagonal."""
    pts = kern.basis.domain.check(ds.points)
    return kern.features(pts, ds.source_mask), kern.Lambda
