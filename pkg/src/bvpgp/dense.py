"""Exact Gaussian process regression through a dense Cholesky factor.

Serves the squared-exponential baselines (plain GPR and PDE co-kriging) and
gives an O(N^3) reference path for spectral kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .domain import Dataset, Domain, Hyperparameters, ObservationKind
from .errors import CholeskyFailure, NegativeVariance, ValidationError
from .kernels import SpectralKernel

LOG_2PI = math.log(2.0 * math.pi)

# Negative variances down to this fraction of the prior are treated as rounding.
VARIANCE_TOL = 1e-10


@dataclass(frozen=True)
class Posterior:
    mean: np.ndarray
    variance: np.ndarray

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)


def clamp_variance(var: np.ndarray, prior: np.ndarray) -> np.ndarray:
    floor = -VARIANCE_TOL * np.maximum(prior, np.finfo(float).tiny)
    if np.any(var < floor):
        i = int(np.argmin(var - floor))
        raise NegativeVariance(
            f"posterior variance {var[i]:.3e} is negative beyond rounding "
            f"(prior {prior[i]:.3e})"
        )
    return np.maximum(var, 0.0)


def cholesky(A: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of ``A``; raises CholeskyFailure with the failing pivot."""
    if not np.all(np.isfinite(A)):
        raise CholeskyFailure("matrix has non-finite entries", min_pivot=float("nan"))
    c, info = linalg.lapack.dpotrf(A, lower=1, clean=1)
    if info == 0:
        return c
    j = info - 1
    if j == 0:
        pivot = float(A[0, 0])
    else:
        L = linalg.cholesky(A[:j, :j], lower=True)
        row = linalg.solve_triangular(L, A[:j, j], lower=True)
        pivot = float(A[j, j] - row @ row)
    raise CholeskyFailure(
        f"Cholesky failed at row {j} of {A.shape[0]}; min diagonal pivot {pivot:.3e} "
        "(noise variance too small or matrix ill-conditioned)",
        min_pivot=pivot,
    )


def _domain_of(kernel, domain):
    if domain is not None:
        return domain
    if isinstance(kernel, SpectralKernel):
        return kernel.basis.domain
    return None


@dataclass(frozen=True, eq=False)
class DenseModel:
    kernel: object
    dataset: Dataset
    hp: Hyperparameters
    chol: np.ndarray
    alpha: np.ndarray
    domain: Domain | None = None


def assemble_covariance(kernel, ds: Dataset) -> np.ndarray:
    """Joint covariance of the observations (without noise)."""
    X = ds.points
    src = ds.source_mask
    if isinstance(kernel, SpectralKernel):
        X = kernel.basis.domain.check(X)
    return kernel.cov(X, src, X, src)


def fit_dense(kernel, ds: Dataset, hp: Hyperparameters, domain: Domain | None = None) -> DenseModel:
    kernel = kernel.with_hp(hp)
    K = assemble_covariance(kernel, ds)
    K[np.diag_indices_from(K)] += hp.sigma2
    L = cholesky(K)
    alpha = linalg.cho_solve((L, True), ds.values)
    return DenseModel(kernel, ds, hp, L, alpha, _domain_of(kernel, domain))


def _targets(model: DenseModel, targets):
    X = np.asarray(targets, dtype=float)
    dim = model.dataset.dim
    if X.ndim <= 1:
        X = X.reshape(-1, 1) if dim == 1 else X.reshape(1, dim)
    if model.domain is not None:
        X = model.domain.check(X)
    return X


def predict_dense(model: DenseModel, targets, target_kind=ObservationKind.SOLUTION) -> Posterior:
    X = _targets(model, targets)
    is_src = ObservationKind(target_kind) is ObservationKind.SOURCE
    tmask = np.full(X.shape[0], is_src)
    Q = model.kernel.cov(X, tmask, model.dataset.points, model.dataset.source_mask)
    mean = Q @ model.alpha
    v = linalg.solve_triangular(model.chol, Q.T, lower=True)
    prior = model.kernel.prior_var(X, tmask)
    var = prior - np.einsum("ij,ij->j", v, v)
    return Posterior(mean, clamp_variance(var, prior))


def predict_mean_gradient_dense(model: DenseModel, targets) -> np.ndarray:
    """Gradient of the posterior mean of ``u``, shape ``(n*, dim)``."""
    X = _targets(model, targets)
    G = model.kernel.cov_grad_x(X, model.dataset.points, model.dataset.source_mask)
    return np.einsum("snd,n->sd", G, model.alpha)


def lml_dense(model: DenseModel) -> float:
    y = model.dataset.values
    n = y.size
    logdet = 2.0 * np.sum(np.log(np.diag(model.chol)))
    return float(-0.5 * y @ model.alpha - 0.5 * logdet - 0.5 * n * LOG_2PI)


def _dK(model: DenseModel, wrt: str) -> np.ndarray:
    ds = model.dataset
    if wrt == "sigma2":
        return np.eye(len(ds))
    d_s2, d_ell = model.kernel.cov_derivs(ds.points, ds.source_mask)
    if wrt == "s2":
        return d_s2
    if wrt == "ell":
        return d_ell
    raise ValidationError(f"unknown hyperparameter {wrt!r}")


def lml_gradient_dense(model: DenseModel, wrt: str) -> float:
    dK = _dK(model, wrt)
    a = model.alpha
    trace = np.trace(linalg.cho_solve((model.chol, True), dK))
    return float(0.5 * a @ dK @ a - 0.5 * trace)


def lml_and_gradient_dense(model: DenseModel) -> tuple[float, np.ndarray]:
    """LML and its gradient with respect to ``(s2, ell, sigma2)``."""
    ds = model.dataset
    d_s2, d_ell = model.kernel.cov_derivs(ds.points, ds.source_mask)
    Kinv = linalg.cho_solve((model.chol, True), np.eye(len(ds)))
    a = model.alpha
    grad = np.array(
        [
            0.5 * a @ d_s2 @ a - 0.5 * np.sum(Kinv * d_s2),
            0.5 * a @ d_ell @ a - 0.5 * np.sum(Kinv * d_ell),
            0.5 * a @ a - 0.5 * np.trace(Kinv),
        ]
    )
    return lml_dense(model), grad
