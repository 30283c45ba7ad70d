"""The four regression methods compared in the experiments.

``unconstrained``
    squared-exponential GPR on solution observations.
``bc``
    spectral kernel (boundary conditions built in) on solution observations.
``pde``
    squared-exponential co-kriging of solution and source observations.
``bvp``
    spectral co-kriging: boundary conditions and PDE together.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dense import DenseModel, Posterior, fit_dense, predict_dense, predict_mean_gradient_dense
from .domain import Dataset, Hyperparameters, ObservationKind
from .eigenbasis import EigenBasis, helmholtz_2d_mixed_basis, laplacian_1d_dirichlet_basis
from .errors import ValidationError
from .kernels import OperatorKernelBlocks, SEKernel, SpectralKernel
from .reduced import ReducedModel, fit_reduced, predict_mean_gradient_reduced, predict_reduced
from .sampling import ManufacturedProblem
from .training import TrainingConfig, TrainingResult, train

METHODS = ("unconstrained", "bc", "pde", "bvp")
_PLACEHOLDER = Hyperparameters(1.0, 1.0, 0.0)


def problem_basis(problem: ManufacturedProblem, M: int) -> EigenBasis:
    """Eigenbasis matching ``problem``; ``M`` is the per-axis order in 2D."""
    if problem.name == "poisson1d":
        return laplacian_1d_dirichlet_basis(M, problem.domain)
    if problem.name == "helmholtz2d":
        return helmholtz_2d_mixed_basis(M, problem.operator.helmholtz_k, problem.domain)
    return EigenBasis(problem.domain, problem.bcs, problem.operator, (M,) * problem.domain.dim)


def method_kernel(method: str, problem: ManufacturedProblem, M: int):
    if method == "unconstrained":
        return SEKernel(_PLACEHOLDER)
    if method == "pde":
        return OperatorKernelBlocks(SEKernel(_PLACEHOLDER), problem.operator)
    if method in ("bc", "bvp"):
        return SpectralKernel(problem_basis(problem, M), _PLACEHOLDER)
    raise ValidationError(f"unknown method {method!r}; expected one of {METHODS}")


def method_data(method: str, ds: Dataset) -> Dataset:
    """Rows of ``ds`` a method can use: solution-only methods drop source rows."""
    if method in ("unconstrained", "bc"):
        sub = ds.subset(ObservationKind.SOLUTION)
        if len(sub) == 0:
            raise ValidationError(f"method {method!r} needs at least one solution observation")
        return sub
    if method in ("pde", "bvp"):
        return ds
    raise ValidationError(f"unknown method {method!r}; expected one of {METHODS}")


@dataclass(frozen=True, eq=False)
class FittedMethod:
    method: str
    model: DenseModel | ReducedModel
    training: TrainingResult | None = None

    @property
    def hp(self) -> Hyperparameters:
        return self.model.hp

    def predict(self, targets, kind=ObservationKind.SOLUTION) -> Posterior:
        if isinstance(self.model, ReducedModel):
            return predict_reduced(self.model, targets, kind)
        return predict_dense(self.model, targets, kind)

    def mean_gradient(self, targets) -> np.ndarray:
        if isinstance(self.model, ReducedModel):
            return predict_mean_gradient_reduced(self.model, targets)
        return predict_mean_gradient_dense(self.model, targets)


def fit_with(method: str, problem: ManufacturedProblem, ds: Dataset, M: int,
             hp: Hyperparameters, noiseless: bool = False) -> FittedMethod:
    kernel = method_kernel(method, problem, M)
    data = method_data(method, ds)
    if isinstance(kernel, SpectralKernel):
        model = fit_reduced(kernel, data, hp, noiseless=noiseless)
    else:
        if noiseless:
            raise ValidationError("noiseless mode is only available for spectral kernels")
        model = fit_dense(kernel, data, hp, domain=problem.domain)
    return FittedMethod(method, model)


def fit_method(method: str, problem: ManufacturedProblem, ds: Dataset, M: int,
               cfg: TrainingConfig) -> FittedMethod:
    """Train hyperparameters by maximum likelihood, then fit the final model."""
    kernel = method_kernel(method, problem, M)
    data = method_data(method, ds)
    result = train(kernel, data, cfg)
    fitted = fit_with(method, problem, ds, M, result.best_hp, noiseless=cfg.noiseless)
    return FittedMethod(method, fitted.model, result)
