"""Observation sites and manufactured test problems."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .domain import (
    BC,
    BoundaryConditionSpec,
    Dataset,
    Domain,
    OperatorSpec,
    add_white_noise,
    make_kinds,
)
from .errors import InvalidCount, UnknownProblem, ValidationError


def _min_distance(pts: np.ndarray) -> float:
    if pts.shape[0] < 2:
        return math.inf
    d, _ = cKDTree(pts).query(pts, k=2)
    return float(d[:, 1].min())


def latin_hypercube(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """One random Latin hypercube on the unit cube: a uniform point per stratum."""
    perms = np.column_stack([rng.permutation(n) for _ in range(dim)])
    return (perms + rng.random((n, dim))) / n


def lhc_maximin(n: int, dim: int, candidates: int = 1000, rng_seed: int = 0) -> np.ndarray:
    """Best of ``candidates`` random Latin hypercubes by minimum pairwise distance.

    Candidates are drawn in sequence from one generator, so a larger
    ``candidates`` only ever adds designs to the pool.
    """
    if n < 1:
        raise InvalidCount("need n >= 1")
    if candidates < 1:
        raise InvalidCount("need candidates >= 1")
    rng = np.random.default_rng(rng_seed)
    best, best_d = None, -1.0
    for _ in range(candidates):
        design = latin_hypercube(n, dim, rng)
        d = _min_distance(design)
        if best is None or d > best_d:
            best, best_d = design, d
    return best


def uniform_grid_1d(n: int) -> np.ndarray:
    """``n`` equispaced points from ``1/n`` to ``1 - 1/n``."""
    if n < 3:
        raise InvalidCount(f"uniform grid needs n >= 3 (got {n}); endpoints coincide at n=2")
    return np.linspace(1.0 / n, 1.0 - 1.0 / n, n)


def scale_to_domain(unit_points: np.ndarray, dom: Domain) -> np.ndarray:
    return dom.lower + np.asarray(unit_points) * dom.widths


@dataclass(frozen=True)
class ManufacturedProblem:
    name: str
    u: Callable[[np.ndarray], np.ndarray]
    f: Callable[[np.ndarray], np.ndarray]
    grad_u: Callable[[np.ndarray], np.ndarray]
    domain: Domain
    bcs: BoundaryConditionSpec
    operator: OperatorSpec


def _poisson1d_u(p):
    x = np.asarray(p, float).reshape(-1, 1)[:, 0]
    return -(x**3 - x) / 6.0


def _poisson1d_f(p):
    return np.asarray(p, float).reshape(-1, 1)[:, 0].copy()


def _poisson1d_grad(p):
    x = np.asarray(p, float).reshape(-1, 1)[:, 0]
    return (-(3 * x**2 - 1) / 6.0)[:, None]


HELMHOLTZ_K = 3.0
_E1 = math.exp(-1.0)


def _xy(p):
    p = np.asarray(p, float).reshape(-1, 2)
    return p[:, 0], p[:, 1]


def _helmholtz_u(p):
    x, y = _xy(p)
    return (1 - x**2) * (1 - y**2) + np.cos(np.pi * x / 2) * (np.exp(-y) + y - (1 + _E1))


def _helmholtz_f(p):
    # -lap(u) + k^2 u for the solution above
    x, y = _xy(p)
    c = np.cos(np.pi * x / 2)
    g = np.exp(-y) + y - (1 + _E1)
    return (
        2 * (1 - x**2)
        + 2 * (1 - y**2)
        + (np.pi / 2) ** 2 * c * g
        - c * np.exp(-y)
        + HELMHOLTZ_K**2 * _helmholtz_u(p)
    )


def _helmholtz_grad(p):
    x, y = _xy(p)
    g = np.exp(-y) + y - (1 + _E1)
    ux = -2 * x * (1 - y**2) - (np.pi / 2) * np.sin(np.pi * x / 2) * g
    uy = -2 * y * (1 - x**2) + np.cos(np.pi * x / 2) * (1 - np.exp(-y))
    return np.column_stack([ux, uy])


def manufactured(name: str) -> ManufacturedProblem:
    if name == "poisson1d":
        return ManufacturedProblem(
            "poisson1d",
            _poisson1d_u,
            _poisson1d_f,
            _poisson1d_grad,
            Domain.unit(1),
            BoundaryConditionSpec.uniform(1, BC.DIRICHLET),
            OperatorSpec.negative_laplacian(),
        )
    if name == "helmholtz2d":
        return ManufacturedProblem(
            "helmholtz2d",
            _helmholtz_u,
            _helmholtz_f,
            _helmholtz_grad,
            Domain.unit(2),
            BoundaryConditionSpec((BC.NEUMANN, BC.DIRICHLET, BC.NEUMANN, BC.DIRICHLET)),
            OperatorSpec.helmholtz(HELMHOLTZ_K),
        )
    raise UnknownProblem(f"unknown problem {name!r}; expected poisson1d or helmholtz2d")


def make_dataset(problem: ManufacturedProblem, sites_u, sites_f, sigma: float, rng_seed: int) -> Dataset:
    """Sample ``u`` at ``sites_u`` and ``f`` at ``sites_f``, then add white noise."""
    dim = problem.domain.dim
    su = np.asarray(sites_u, float).reshape(-1, dim)
    sf = np.asarray(sites_f, float).reshape(-1, dim)
    problem.domain.check(su)
    problem.domain.check(sf)
    if su.shape[0] + sf.shape[0] == 0:
        raise ValidationError("no observation sites given")
    clean = np.concatenate([problem.u(su), problem.f(sf)])
    values = add_white_noise(clean, sigma, rng_seed)
    return Dataset(np.vstack([su, sf]), values, make_kinds(su.shape[0], sf.shape[0]))
