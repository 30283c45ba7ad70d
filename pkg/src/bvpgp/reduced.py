"""Reduced-rank inference for spectral kernels via the Woodbury identity.

With features ``Phi`` (N x M, source rows scaled by their eigenvalue) and
spectral weights ``Lambda`` the noisy covariance is
``Phi Lambda Phi^T + sigma2 I``.  All solves go through the M x M matrix
``Z = sigma2 Lambda^{-1} + Phi^T Phi``:

* ``K^{-1} = (I - Phi Z^{-1} Phi^T) / sigma2``
* ``log|K| = (N - M) log sigma2 + log|Z| + sum(log Lambda)``
* posterior mean ``phi*^T w`` and variance ``sigma2 phi*^T Z^{-1} phi*``
  with ``w = Z^{-1} Phi^T y``.

The data enter only through ``Phi^T Phi``, ``Phi^T y`` and the residual
``y - Phi w``, so fitting costs O(N M^2) and every solve O(M^3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg

from .dense import LOG_2PI, Posterior
from .domain import Dataset, Hyperparameters, ObservationKind
from .errors import InvalidCount, NoiseFloorViolation, ValidationError, ZFactorizationFailure
from .kernels import SpectralKernel, spectral_joint_gram

NOISELESS_SIGMA2 = 1e-17
NOISE_FLOOR = 1e-8
LAMBDA_UNDERFLOW = 1e-300


@dataclass(frozen=True, eq=False)
class ReducedModel:
    """Fitted reduced-rank state.

    ``Phi_joint`` and ``dataset`` are ``None`` for a model restored from
    JSON; prediction and the likelihood only need the remaining fields.
    ``rss`` is ``|y - Phi w|^2``.
    """

    kernel: SpectralKernel
    hp: Hyperparameters
    Lambda: np.ndarray
    Z: np.ndarray
    Z_chol: np.ndarray
    proj: np.ndarray
    yty: float
    rss: float
    n: int
    noiseless: bool = False
    Phi_joint: np.ndarray | None = None
    dataset: Dataset | None = None

    @property
    def M(self) -> int:
        return self.Lambda.size

    @property
    def weights(self) -> np.ndarray:
        return linalg.cho_solve((self.Z_chol, True), self.proj)

    def to_dict(self, digest: str | None = None) -> dict:
        return {
            "kernel": self.kernel.to_dict(),
            "hyperparameters": self.hp.to_dict(),
            "noiseless": self.noiseless,
            "dataset_digest": digest,
            "n": self.n,
            "yty": self.yty,
            "rss": self.rss,
            "Lambda": self.Lambda.tolist(),
            "Z": self.Z.reshape(-1).tolist(),
            "proj": self.proj.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReducedModel":
        from .eigenbasis import EigenBasis

        hp = Hyperparameters.from_dict(d["hyperparameters"])
        kernel = SpectralKernel(EigenBasis.from_dict(d["kernel"]["basis"]), hp)
        lam = np.asarray(d["Lambda"], float)
        m = lam.size
        Z = np.asarray(d["Z"], float).reshape(m, m)
        return cls(
            kernel=kernel,
            hp=hp,
            Lambda=lam,
            Z=Z,
            Z_chol=_factor_Z(Z),
            proj=np.asarray(d["proj"], float),
            yty=float(d["yty"]),
            rss=float(d["rss"]),
            n=int(d["n"]),
            noiseless=bool(d["noiseless"]),
        )


def _factor_Z(Z: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(Z)):
        raise ZFactorizationFailure("Z has non-finite entries")
    c, info = linalg.lapack.dpotrf(Z, lower=1, clean=1)
    if info != 0:
        raise ZFactorizationFailure(f"Z is not positive definite (failed at row {info - 1})")
    return c


def fit_reduced(
    kernel: SpectralKernel,
    ds: Dataset,
    hp: Hyperparameters,
    noiseless: bool = False,
    noise_floor: float = NOISE_FLOOR,
) -> ReducedModel:
    """Assemble ``Z`` and the projected data for ``ds``.

    In noiseless mode ``sigma2`` is pinned to ``NOISELESS_SIGMA2`` and at
    least as many observations as basis functions are required.
    """
    M = kernel.basis.M
    if noiseless:
        if len(ds) < M:
            raise InvalidCount(f"noiseless mode needs N >= M (N={len(ds)}, M={M})")
        hp = replace(hp, sigma2=NOISELESS_SIGMA2)
    elif hp.sigma2 < noise_floor:
        raise NoiseFloorViolation(
            f"sigma2={hp.sigma2:.3e} is below the floor {noise_floor:.1e}; "
            "use noiseless mode for interpolation"
        )
    kernel = kernel.with_hp(hp)
    Phi, lam = spectral_joint_gram(kernel, ds)
    if not np.all(np.isfinite(lam)) or np.any(lam < LAMBDA_UNDERFLOW):
        raise ZFactorizationFailure(
            "spectral weights underflow (min %.3e); reduce M or the length scale" % np.min(lam)
        )
    s2n = hp.sigma2
    Z = Phi.T @ Phi
    Z[np.diag_indices_from(Z)] += s2n / lam
    Zc = _factor_Z(Z)
    y = ds.values
    proj = Phi.T @ y
    w = linalg.cho_solve((Zc, True), proj)
    r = y - Phi @ w
    return ReducedModel(
        kernel=kernel,
        hp=hp,
        Lambda=lam,
        Z=Z,
        Z_chol=Zc,
        proj=proj,
        yty=float(y @ y),
        rss=float(r @ r),
        n=len(ds),
        noiseless=noiseless,
        Phi_joint=Phi,
        dataset=ds,
    )


def predict_reduced(model: ReducedModel, targets, target_kind=ObservationKind.SOLUTION) -> Posterior:
    basis = model.kernel.basis
    X = basis.domain.check(targets)
    is_src = ObservationKind(target_kind) is ObservationKind.SOURCE
    F = model.kernel.features(X, np.full(X.shape[0], is_src))
    mean = F @ model.weights
    V = linalg.cho_solve((model.Z_chol, True), F.T)
    var = model.hp.sigma2 * np.einsum("ij,ji->i", F, V)
    return Posterior(mean, np.maximum(var, 0.0))


def predict_mean_gradient_reduced(model: ReducedModel, targets) -> np.ndarray:
    """Closed-form gradient of the posterior mean of ``u``, shape ``(n*, dim)``."""
    basis = model.kernel.basis
    X = basis.domain.check(targets)
    return np.einsum("sjd,j->sd", basis.gradient(X), model.weights)


def _pieces(model: ReducedModel):
    w = model.weights
    wLw = float(w @ (w / model.Lambda))
    # y^T y - y^T Phi w, written as a sum of nonnegative terms
    c = model.rss + model.hp.sigma2 * wLw
    return w, wLw, c


def log_det_reduced(model: ReducedModel) -> float:
    s2n = model.hp.sigma2
    return float(
        (model.n - model.M) * math.log(s2n)
        + 2.0 * np.sum(np.log(np.diag(model.Z_chol)))
        + np.sum(np.log(model.Lambda))
    )


def quad_reduced(model: ReducedModel) -> float:
    """``y^T K^{-1} y``."""
    _, _, c = _pieces(model)
    return c / model.hp.sigma2


def lml_reduced(model: ReducedModel) -> float:
    return float(-0.5 * log_det_reduced(model) - 0.5 * quad_reduced(model) - 0.5 * model.n * LOG_2PI)


def _gradients(model: ReducedModel) -> dict[str, float]:
    s2n = model.hp.sigma2
    lam = model.Lambda
    w, wLw, c = _pieces(model)
    Zinv_diag = np.diag(linalg.cho_solve((model.Z_chol, True), np.eye(model.M)))
    d_s2, d_ell = model.kernel.Lambda_derivs()
    out = {}
    for name, dlam in (("s2", d_s2), ("ell", d_ell)):
        rel = dlam / lam
        # Lambda^{-2} dLambda, formed as (1/Lambda) * (dLambda/Lambda)
        scaled = rel / lam
        dlogdet = -s2n * np.sum(Zinv_diag * scaled) + np.sum(rel)
        dquad = -float(w @ (scaled * w))
        out[name] = -0.5 * (dlogdet + dquad)
    dlogdet = (model.n - model.M) / s2n + np.sum(Zinv_diag / lam)
    dquad = -c / s2n**2 + wLw / s2n
    out["sigma2"] = -0.5 * (dlogdet + dquad)
    return out


def lml_gradient_reduced(model: ReducedModel, wrt: str) -> float:
    grads = _gradients(model)
    if wrt not in grads:
        raise ValidationError(f"unknown hyperparameter {wrt!r}")
    return float(grads[wrt])


def lml_and_gradient_reduced(model: ReducedModel) -> tuple[float, np.ndarray]:
    g = _gradients(model)
    return lml_reduced(model), np.array([g["s2"], g["ell"], g["sigma2"]])
