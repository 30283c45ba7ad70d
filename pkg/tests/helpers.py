"""Random problem instances shared by the dense/reduced tests."""

import numpy as np

from bvpgp.domain import Dataset, Hyperparameters, make_kinds
from bvpgp.eigenbasis import helmholtz_2d_mixed_basis, laplacian_1d_dirichlet_basis, laplacian_1d_neumann_basis
from bvpgp.kernels import SpectralKernel


def random_basis(rng):
    choice = rng.integers(3)
    if choice == 0:
        return laplacian_1d_dirichlet_basis(int(rng.integers(1, 9)))
    if choice == 1:
        return laplacian_1d_neumann_basis(int(rng.integers(1, 9)))
    return helmholtz_2d_mixed_basis(int(rng.integers(1, 3)), 3.0)


def random_instance(rng, n_max=50):
    """Spectral kernel with moderate hyperparameters and a mixed u/f dataset."""
    basis = random_basis(rng)
    n = int(rng.integers(1, n_max + 1))
    n_f = int(rng.integers(0, n + 1))
    X = rng.random((n, basis.dim))
    hp = Hyperparameters(
        float(np.exp(rng.uniform(-1, 1))),
        float(rng.uniform(0.1, 0.6)),
        float(np.exp(rng.uniform(np.log(1e-4), np.log(1e-1)))),
    )
    kern = SpectralKernel(basis, hp)
    src = np.arange(n) >= n - n_f
    y = rng.standard_normal(n) * np.where(src, 5.0, 0.1)
    return kern, Dataset(X, y, make_kinds(n - n_f, n_f)), hp


def fd_hyper(lml, hp, name, rel=1e-4):
    """Richardson-extrapolated central difference of ``lml(hp)`` in one hyperparameter."""
    v = getattr(hp, name)

    def central(h):
        up = Hyperparameters(**{**hp.to_dict(), name: v + h})
        dn = Hyperparameters(**{**hp.to_dict(), name: v - h})
        return (lml(up) - lml(dn)) / (2 * h)

    h = rel * v
    return (4 * central(h) - central(2 * h)) / 3


def dense_reference(Phi, Lambda, sigma2, y, targets, digits=40):
    """Dense-path posterior and LML evaluated in extended precision.

    ``Phi`` and ``Lambda`` are the float64 features, so the result is the
    exact dense answer for the same inputs.  ``targets`` maps a label to a
    feature matrix of prediction rows.
    """
    import mpmath as mp

    with mp.workdps(digits):
        P = mp.matrix(Phi.tolist())
        L = mp.diag(Lambda.tolist())
        yv = mp.matrix(list(map(float, y)))
        K = P * L * P.T + mp.mpf(sigma2) * mp.eye(len(y))
        Ki = mp.inverse(K)
        a = Ki * yv
        n = len(y)
        lml = -(yv.T * a)[0] / 2 - mp.log(mp.det(K)) / 2 - n * mp.log(2 * mp.pi) / 2
        out = {"lml": float(lml)}
        for label, F in targets.items():
            Fm = mp.matrix(F.tolist())
            Q = Fm * L * P.T
            mean = Q * a
            var = [(Fm[i, :] * L * Fm[i, :].T)[0] - (Q[i, :] * Ki * Q[i, :].T)[0] for i in range(F.shape[0])]
            out[label] = (np.array([float(mean[i]) for i in range(F.shape[0])]), np.array([float(v) for v in var]))
        return out


def lml_reference(K, sigma2, y, digits=40):
    """LML of ``N(0, K + sigma2 I)`` with the factorisation done in extended precision."""
    import mpmath as mp

    with mp.workdps(digits):
        A = mp.matrix(K.tolist()) + mp.mpf(sigma2) * mp.eye(len(y))
        yv = mp.matrix(list(map(float, y)))
        L = mp.cholesky(A)
        z = mp.lu_solve(L, yv)
        logdet = 2 * mp.fsum(mp.log(L[i, i]) for i in range(len(y)))
        return float(-mp.fdot(z, z) / 2 - logdet / 2 - len(y) * mp.log(2 * mp.pi) / 2)
