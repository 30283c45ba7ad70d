import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bvpgp.domain import ObservationKind
from bvpgp.errors import InvalidCount, PointOutsideDomain, UnknownProblem
from bvpgp.sampling import (
    _min_distance,
    lhc_maximin,
    make_dataset,
    manufactured,
    uniform_grid_1d,
)


def _residual_fd(problem, x, h=1e-4):
    lap = 0.0
    for e in np.eye(x.size):
        lap += (problem.u(x + h * e)[0] - 2 * problem.u(x)[0] + problem.u(x - h * e)[0]) / h**2
    return -lap + problem.operator.shift * problem.u(x)[0] - problem.f(x)[0]


@given(st.integers(1, 40), st.integers(1, 2), st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_lhc_stratum_property(n, dim, seed):
    X = lhc_maximin(n, dim, candidates=3, rng_seed=seed)
    assert X.shape == (n, dim)
    for d in range(dim):
        strata = np.floor(X[:, d] * n).astype(int)
        assert sorted(strata) == list(range(n))


def test_lhc_single_point():
    X = lhc_maximin(1, 2, rng_seed=5)
    assert X.shape == (1, 2)
    assert np.all((0 <= X) & (X < 1))


def test_maximin_prefix_property():
    for seed in range(5):
        one = lhc_maximin(10, 2, candidates=1, rng_seed=seed)
        many = lhc_maximin(10, 2, candidates=100, rng_seed=seed)
        assert _min_distance(many) >= _min_distance(one)


def test_lhc_errors():
    with pytest.raises(InvalidCount):
        lhc_maximin(0, 1)


def test_uniform_grid_examples():
    assert uniform_grid_1d(4) == pytest.approx([0.25, 5 / 12, 7 / 12, 0.75])
    assert uniform_grid_1d(3) == pytest.approx([1 / 3, 0.5, 2 / 3])
    for n in (3, 10, 257):
        g = uniform_grid_1d(n)
        assert g.size == n and np.all((g > 0) & (g < 1))
    with pytest.raises(InvalidCount):
        uniform_grid_1d(2)


def test_poisson_examples():
    p = manufactured("poisson1d")
    assert p.u([0.0])[0] == 0.0 and p.u([1.0])[0] == 0.0
    # -u'' = x exactly for the cubic
    x = 0.37
    assert -(-(6 * x) / 6.0) == pytest.approx(p.f([x])[0], rel=1e-15)
    assert abs(_residual_fd(p, np.array([x]))) <= 1e-5


def test_helmholtz_boundary_conditions():
    p = manufactured("helmholtz2d")
    t = np.linspace(0, 1, 51)
    assert np.max(np.abs(p.u(np.column_stack([np.ones_like(t), t])))) <= 1e-15
    assert np.max(np.abs(p.u(np.column_stack([t, np.ones_like(t)])))) <= 1e-15
    g = p.grad_u(np.column_stack([np.zeros_like(t), t]))
    assert np.max(np.abs(g[:, 0])) == 0.0
    g = p.grad_u(np.column_stack([t, np.zeros_like(t)]))
    assert np.max(np.abs(g[:, 1])) <= 1e-15


@pytest.mark.parametrize("name", ["poisson1d", "helmholtz2d"])
def test_manufactured_residual(name):
    p = manufactured(name)
    rng = np.random.default_rng(0)
    X = rng.uniform(0.01, 0.99, size=(100, p.domain.dim))
    scale = max(1.0, float(np.abs(p.f(X)).max()))
    for x in X:
        assert abs(_residual_fd(p, x)) <= 1e-5 * scale


@pytest.mark.parametrize("name", ["poisson1d", "helmholtz2d"])
def test_gradient_matches_fd(name):
    p = manufactured(name)
    X = np.random.default_rng(1).random((20, p.domain.dim))
    h = 1e-6
    G = p.grad_u(X)
    for d in range(p.domain.dim):
        e = np.zeros(p.domain.dim)
        e[d] = h
        assert np.allclose(G[:, d], (p.u(X + e) - p.u(X - e)) / (2 * h), atol=1e-8)


def test_unknown_problem():
    with pytest.raises(UnknownProblem):
        manufactured("heat3d")


def test_make_dataset_examples():
    p = manufactured("poisson1d")
    ds = make_dataset(p, [0.5], [], 0.0, 0)
    assert ds.values[0] == pytest.approx(0.0625, rel=1e-15)
    ds = make_dataset(p, [0.2, 0.3], [0.4, 0.5, 0.6], 0.01, 7)
    assert [k.value for k in ds.kinds] == ["u", "u", "f", "f", "f"]
    assert ds == make_dataset(p, [0.2, 0.3], [0.4, 0.5, 0.6], 0.01, 7)
    assert ds.kinds[2] is ObservationKind.SOURCE
    with pytest.raises(PointOutsideDomain):
        make_dataset(p, [1.5], [], 0.0, 0)
