"""Maximum-likelihood hyperparameter estimation.

The negative log marginal likelihood is minimised in log-parameter space by a
small projected L-BFGS routine (two-loop recursion, gradient projection onto
the box, backtracking Armijo search).  Infeasible points, such as a failed
Cholesky factorisation, evaluate to ``+inf`` and simply shorten the step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dense import fit_dense, lml_and_gradient_dense
from .domain import Dataset, Hyperparameters
from .errors import AllRestartsFailed, NumericalError, ValidationError
from .kernels import SpectralKernel
from .reduced import NOISELESS_SIGMA2, fit_reduced, lml_and_gradient_reduced

PARAMS = ("s2", "ell", "sigma2")


@dataclass(frozen=True)
class TrainingConfig:
    """Restarts, bounds and initial-value distributions.

    ``bounds`` apply to ``s2``, ``ell`` and the noise standard deviation
    ``sigma``.  Initial values: ``s2 ~ Exponential(s2_scale)``,
    ``ell ~ U[0, ell_max]``, ``sigma ~ U[0, sigma_max]``, clamped into bounds.
    """

    restarts: int = 100
    bounds: dict = field(
        default_factory=lambda: {"s2": (1e-4, 1e4), "ell": (1e-4, 1e4), "sigma": (1e-4, 1e4)}
    )
    s2_scale: float = 1.0
    ell_max: float = 0.5
    sigma_max: float = 0.3
    noiseless: bool = False
    seed: int = 0
    maxiter: int = 200
    gtol: float = 1e-6
    ftol: float = 1e-14
    memory: int = 10

    def __post_init__(self):
        if self.restarts < 1:
            raise ValidationError("restarts must be >= 1")
        for name in ("s2", "ell", "sigma"):
            lo, hi = self.bounds[name]
            if not (0 < lo < hi):
                raise ValidationError(f"bad bounds for {name}: {(lo, hi)}")

    def log_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        b = self.bounds
        lo = [math.log(b["s2"][0]), math.log(b["ell"][0]), 2 * math.log(b["sigma"][0])]
        hi = [math.log(b["s2"][1]), math.log(b["ell"][1]), 2 * math.log(b["sigma"][1])]
        n = 2 if self.noiseless else 3
        return np.array(lo[:n]), np.array(hi[:n])


@dataclass(frozen=True)
class RestartRecord:
    init: Hyperparameters
    final: Hyperparameters
    nlml: float
    converged: bool
    iterations: int
    projected_gradient: float
    message: str

    def to_dict(self) -> dict:
        return {
            "init": self.init.to_dict(),
            "final": self.final.to_dict(),
            "nlml": self.nlml,
            "converged": self.converged,
            "iterations": self.iterations,
            "projected_gradient": self.projected_gradient,
            "message": self.message,
        }


@dataclass(frozen=True)
class TrainingResult:
    best_hp: Hyperparameters
    best_nlml: float
    best_index: int
    records: tuple

    def to_dict(self) -> dict:
        return {
            "best": self.best_hp.to_dict(),
            "best_nlml": self.best_nlml,
            "best_index": self.best_index,
            "restarts": [r.to_dict() for r in self.records],
        }


def nlml_objective(kernel, ds: Dataset, theta: Hyperparameters, noiseless: bool = False):
    """Negative LML and its gradient in ``(s2, ell, sigma2)``.

    Spectral kernels go through the reduced-rank path, everything else
    through the dense path.  Numerical failure gives ``(inf, 0)``.
    """
    try:
        if isinstance(kernel, SpectralKernel):
            model = fit_reduced(kernel, ds, theta, noiseless=noiseless)
            lml, grad = lml_and_gradient_reduced(model)
        else:
            model = fit_dense(kernel, ds, theta)
            lml, grad = lml_and_gradient_dense(model)
    except NumericalError:
        return math.inf, np.zeros(3)
    if not (math.isfinite(lml) and np.all(np.isfinite(grad))):
        return math.inf, np.zeros(3)
    return -lml, -grad


def sample_initial(cfg: TrainingConfig, rng: np.random.Generator) -> Hyperparameters:
    s2 = rng.exponential(cfg.s2_scale)
    ell = rng.uniform(0.0, cfg.ell_max)
    sigma = rng.uniform(0.0, cfg.sigma_max)
    b = cfg.bounds
    s2 = float(np.clip(s2, *b["s2"]))
    ell = float(np.clip(ell, *b["ell"]))
    sigma = float(np.clip(sigma, *b["sigma"]))
    if cfg.noiseless:
        return Hyperparameters(s2, ell, NOISELESS_SIGMA2)
    return Hyperparameters(s2, ell, sigma**2)


def _to_log(hp: Hyperparameters, noiseless: bool) -> np.ndarray:
    x = [math.log(hp.s2), math.log(hp.ell), math.log(hp.sigma2)]
    return np.array(x[:2] if noiseless else x)


def _from_log(x: np.ndarray, noiseless: bool) -> Hyperparameters:
    if noiseless:
        return Hyperparameters(math.exp(x[0]), math.exp(x[1]), NOISELESS_SIGMA2)
    return Hyperparameters(math.exp(x[0]), math.exp(x[1]), math.exp(x[2]))


def projected_gradient(x, g, lo, hi) -> np.ndarray:
    return x - np.clip(x - g, lo, hi)


@dataclass
class _Result:
    x: np.ndarray
    f: float
    g: np.ndarray
    nit: int
    converged: bool
    message: str


def minimize_box(fun, x0, lo, hi, maxiter=200, gtol=1e-6, ftol=1e-14, memory=10) -> _Result:
    """Projected L-BFGS for ``min fun(x)`` subject to ``lo <= x <= hi``.

    ``fun`` returns ``(value, gradient)``; an infinite value marks an
    infeasible point.
    """
    x = np.clip(np.asarray(x0, float), lo, hi)
    f, g = fun(x)
    if not math.isfinite(f):
        return _Result(x, f, g, 0, False, "infeasible initial point")
    S, Y = [], []
    for it in range(1, maxiter + 1):
        pg = projected_gradient(x, g, lo, hi)
        if np.max(np.abs(pg)) <= gtol:
            return _Result(x, f, g, it - 1, True, "projected gradient below tolerance")
        active = ((x <= lo) & (g > 0)) | ((x >= hi) & (g < 0))
        d = _two_loop(g, S, Y)
        d[active] = 0.0
        if not S or d @ g >= 0:
            S, Y = [], []
            d = -g / max(1.0, float(np.max(np.abs(g))))
            d[active] = 0.0
        step = 1.0
        accepted = False
        for _ in range(60):
            x_new = np.clip(x + step * d, lo, hi)
            dx = x_new - x
            if not np.any(dx):
                break
            f_new, g_new = fun(x_new)
            if math.isfinite(f_new) and f_new <= f + 1e-4 * (g @ dx):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            if S:
                S, Y = [], []
                continue
            ok = np.max(np.abs(pg)) <= 10 * gtol
            return _Result(x, f, g, it, ok, "line search failed")
        s, yv = dx, g_new - g
        if s @ yv > 1e-10 * np.linalg.norm(s) * np.linalg.norm(yv):
            S.append(s)
            Y.append(yv)
            if len(S) > memory:
                S.pop(0)
                Y.pop(0)
        df = f - f_new
        x, f, g = x_new, f_new, g_new
        if df <= ftol * max(abs(f), 1.0):
            pg = projected_gradient(x, g, lo, hi)
            if np.max(np.abs(pg)) <= gtol:
                return _Result(x, f, g, it, True, "projected gradient below tolerance")
            if df <= 0 or not S:
                return _Result(x, f, g, it, True, "relative reduction below ftol")
    return _Result(x, f, g, maxiter, False, "iteration limit reached")


def _two_loop(g, S, Y) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(S), reversed(Y)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        alphas.append((rho, a))
        q -= a * y
    if S:
        q *= (S[-1] @ Y[-1]) / (Y[-1] @ Y[-1])
    for (s, y), (rho, a) in zip(zip(S, Y), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def minimize_from(kernel, ds: Dataset, init: Hyperparameters, cfg: TrainingConfig) -> RestartRecord:
    """One bounded minimisation of the negative LML starting at ``init``."""
    nl = cfg.noiseless
    lo, hi = cfg.log_bounds()

    def fun(x):
        theta = _from_log(x, nl)
        val, grad = nlml_objective(kernel, ds, theta, noiseless=nl)
        if not math.isfinite(val):
            return val, np.zeros_like(x)
        scale = np.array([theta.s2, theta.ell, theta.sigma2])
        glog = grad * scale
        return val, glog[:2] if nl else glog

    res = minimize_box(
        fun, _to_log(init, nl), lo, hi,
        maxiter=cfg.maxiter, gtol=cfg.gtol, ftol=cfg.ftol, memory=cfg.memory,
    )
    pg = float(np.max(np.abs(projected_gradient(res.x, res.g, lo, hi))))
    return RestartRecord(
        init=init,
        final=_from_log(res.x, nl),
        nlml=float(res.f),
        converged=bool(res.converged and math.isfinite(res.f)),
        iterations=res.nit,
        projected_gradient=pg,
        message=res.message,
    )


def train(kernel, ds: Dataset, cfg: TrainingConfig) -> TrainingResult:
    """Multi-restart maximum likelihood; restart ``i`` draws from substream ``i``.

    The best converged restart wins (first one on ties).  When no restart
    reports convergence the best finite one is used.
    """
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    records = []
    for ss in streams:
        init = sample_initial(cfg, np.random.default_rng(ss))
        records.append(minimize_from(kernel, ds, init, cfg))
    best = _select(records, converged_only=True)
    if best is None:
        best = _select(records, converged_only=False)
    if best is None:
        raise AllRestartsFailed(f"all {cfg.restarts} restarts failed to reach a finite likelihood")
    rec = records[best]
    return TrainingResult(rec.final, rec.nlml, best, tuple(records))


def _select(records, converged_only: bool):
    best, best_val = None, math.inf
    for i, r in enumerate(records):
        if converged_only and not r.converged:
            continue
        if math.isfinite(r.nlml) and r.nlml < best_val:
            best, best_val = i, r.nlml
    return best
