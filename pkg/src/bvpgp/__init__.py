"""Gaussian process regression constrained by boundary value problems.

Spectral-expansion kernels built from operator eigenfunctions carry the
boundary conditions; co-kriging with the operator applied to the kernel
carries the PDE.  Inference with the spectral kernels is reduced-rank.
"""

from .dense import Posterior, fit_dense, lml_dense, predict_dense
from .domain import (
    BC,
    BoundaryConditionSpec,
    Dataset,
    Domain,
    Hyperparameters,
    ObservationKind,
    OperatorSpec,
    add_white_noise,
    relative_l2_error,
    validate_dataset,
)
from .eigenbasis import (
    EigenBasis,
    helmholtz_2d_mixed_basis,
    laplacian_1d_dirichlet_basis,
    laplacian_1d_neumann_basis,
)
from .errors import BVPGPError, NumericalError, ValidationError
from .kernels import OperatorKernelBlocks, SEKernel, SpectralKernel
from .methods import METHODS, fit_method, fit_with
from .reduced import fit_reduced, lml_reduced, predict_reduced
from .sampling import lhc_maximin, make_dataset, manufactured, uniform_grid_1d
from .training import TrainingConfig, train

__version__ = "0.1.0"

__all__ = [
    "BC",
    "BVPGPError",
    "BoundaryConditionSpec",
    "Dataset",
    "Domain",
    "EigenBasis",
    "Hyperparameters",
    "METHODS",
    "NumericalError",
    "ObservationKind",
    "OperatorKernelBlocks",
    "OperatorSpec",
    "Posterior",
    "SEKernel",
    "SpectralKernel",
    "TrainingConfig",
    "ValidationError",
    "add_white_noise",
    "fit_dense",
    "fit_method",
    "fit_reduced",
    "fit_with",
    "helmholtz_2d_mixed_basis",
    "laplacian_1d_dirichlet_basis",
    "laplacian_1d_neumann_basis",
    "lhc_maximin",
    "lml_dense",
    "lml_reduced",
    "make_dataset",
    "manufactured",
    "predict_dense",
    "predict_reduced",
    "relative_l2_error",
    "train",
    "uniform_grid_1d",
    "validate_dataset",
]
