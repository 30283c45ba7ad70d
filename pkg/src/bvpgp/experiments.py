"""Desk-scale reproductions of the 1D Poisson and 2D Helmholtz studies.

Each experiment expands an :class:`ExperimentSpec` into independent cells
(one method, dataset size, noise level and seed each), fits them, and
returns :class:`ResultRecord` rows in spec order.  Wall time is measured
only when requested so that result files are byte-reproducible.
"""

from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
import scipy

from .domain import Dataset, relative_l2_error
from .errors import InvalidCount, ValidationError
from .methods import METHODS, FittedMethod, fit_method
from .sampling import (
    ManufacturedProblem,
    lhc_maximin,
    make_dataset,
    manufactured,
    uniform_grid_1d,
)
from .training import TrainingConfig

EXPERIMENTS = ("compare1d", "inference1d", "noiseless1d", "compare2d", "inference2d", "noiseless2d")
SAMPLINGS = ("lhc", "uniform")

SITES_U_1D = (0.19, 0.44, 0.62, 0.78, 0.79)
SITES_F_1D = (0.01, 0.37, 0.50, 0.56, 0.71)

RESULT_COLUMNS = (
    "experiment", "method", "n_u", "n_f", "sigma", "M", "seed",
    "error", "nlml", "s2", "ell", "sigma2", "wall_ms",
)

_DESIGN_TAGS = {"u": 0, "f": 1}


@dataclass(frozen=True)
class ExperimentSpec:
    """Sweep description.  Tuple fields are swept as a Cartesian product.

    ``M`` is the number of eigenfunctions in 1D and the per-axis count
    ``M1`` in 2D.  ``n_f`` entries for the noiseless experiments are the
    grid sizes ``2**p``.
    """

    experiment: str
    methods: tuple = ("bvp",)
    n_u: tuple = (0,)
    n_f: tuple = (10,)
    sigma: tuple = (0.01,)
    M: tuple = (8,)
    restarts: int = 100
    seeds: tuple = (0,)
    sampling: str = "uniform"
    lhc_candidates: int = 1000
    timing: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValidationError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        for m in self.methods:
            if m not in METHODS:
                raise ValidationError(f"unknown method {m!r}")
        if self.sampling not in SAMPLINGS:
            raise ValidationError(f"unknown sampling {self.sampling!r}")
        if self.restarts < 1:
            raise InvalidCount("restarts must be >= 1")
        if not self.seeds:
            raise InvalidCount("need at least one seed")
        for n in (*self.n_u, *self.n_f, *self.M):
            if n < 0:
                raise InvalidCount("counts must be non-negative")
        for m in self.methods:
            if m in ("unconstrained", "bc") and max(self.n_u) < 1:
                raise ValidationError(f"method {m!r} needs n_u >= 1")
            if m == "bvp" and max(self.n_u) == 0 and min(self.n_f) < 1:
                raise ValidationError("source-only bvp needs n_f >= 1")

    @property
    def problem(self) -> str:
        return "poisson1d" if self.experiment.endswith("1d") else "helmholtz2d"

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**kw)


def default_spec(experiment: str, n_seeds: int = 10, restarts: int | None = None,
                 max_p: int | None = None) -> ExperimentSpec:
    """Paper configurations scaled to run on a laptop."""
    seeds = tuple(range(n_seeds))
    if experiment == "compare1d":
        spec = ExperimentSpec(experiment, METHODS, (5,), (5,), (0.01,), (8,), 100, seeds)
    elif experiment == "inference1d":
        spec = ExperimentSpec(experiment, ("bvp", "pde"), (0,), (5, 10, 20, 50, 100),
                              (0.001, 0.01, 0.1), (8,), 100, seeds, "uniform")
    elif experiment == "noiseless1d":
        p = 10 if max_p is None else max_p
        spec = ExperimentSpec(experiment, ("bvp",), (0,), tuple(2**q for q in range(2, p + 1)),
                              (0.0,), (4, 8, 16), 20, seeds[:1] or (0,), "uniform")
    elif experiment == "compare2d":
        spec = ExperimentSpec(experiment, ("pde", "bvp"), (10,), (10,), (0.01,), (3,), 50, seeds, "lhc")
    elif experiment == "inference2d":
        spec = ExperimentSpec(experiment, ("bvp",), (0,), (6, 10, 20, 40, 60, 100),
                              (0.001, 0.01, 0.1), (3,), 50, seeds, "lhc")
    elif experiment == "noiseless2d":
        p = 10 if max_p is None else max_p
        spec = ExperimentSpec(experiment, ("bvp",), (0,), tuple(2**q for q in range(2, p + 1)),
                              (0.0,), (2, 3, 4), 20, seeds[:1] or (0,), "lhc")
    else:
        raise ValidationError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
    if restarts is not None:
        spec = replace(spec, restarts=restarts)
    return spec


@dataclass(frozen=True)
class ResultRecord:
    experiment: str
    method: str
    n_u: int
    n_f: int
    sigma: float
    M: int
    seed: int
    error: float
    nlml: float
    s2: float
    ell: float
    sigma2: float
    wall_ms: float | None = None

    def __post_init__(self):
        if not (self.error >= 0):
            raise ValidationError(f"error must be non-negative, got {self.error}")

    def row(self) -> list[str]:
        out = []
        for name in RESULT_COLUMNS:
            v = getattr(self, name)
            if v is None:
                out.append("")
            elif isinstance(v, float):
                out.append(repr(v))
            else:
                out.append(str(v))
        return out


def design_seed(seed: int, role: str, n: int) -> int:
    """Seed for a site design, derived from the run seed, the role and the size."""
    return int(np.random.SeedSequence([seed, _DESIGN_TAGS[role], n]).generate_state(1)[0])


def sites(problem: ManufacturedProblem, role: str, n: int, sampling: str, seed: int,
          candidates: int = 1000) -> np.ndarray:
    dim = problem.domain.dim
    if n == 0:
        return np.empty((0, dim))
    if sampling == "uniform":
        if dim != 1:
            raise ValidationError("uniform sampling is only available in 1D")
        return uniform_grid_1d(n)[:, None]
    return lhc_maximin(n, dim, candidates, design_seed(seed, role, n))


def test_points(problem: ManufacturedProblem) -> np.ndarray:
    """100 points on [0, 1] in 1D, a 100 x 100 grid on the unit square in 2D."""
    t = np.linspace(0.0, 1.0, 100)
    if problem.domain.dim == 1:
        return t[:, None]
    X, Y = np.meshgrid(t, t, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def _record(spec: ExperimentSpec, method: str, ds: Dataset, sigma: float, M: int, seed: int,
            fitted: FittedMethod, problem: ManufacturedProblem, wall_ms) -> ResultRecord:
    X = test_points(problem)
    err = relative_l2_error(fitted.predict(X).mean, problem.u(X))
    n_f = int(np.sum(ds.source_mask))
    hp = fitted.hp
    return ResultRecord(
        spec.experiment, method, len(ds) - n_f, n_f, float(sigma), int(M), int(seed),
        float(err), float(fitted.training.best_nlml), hp.s2, hp.ell, hp.sigma2, wall_ms,
    )


def _fit_cell(spec, problem, method, ds, sigma, M, seed, noiseless=False):
    cfg = TrainingConfig(restarts=spec.restarts, seed=seed, noiseless=noiseless)
    t0 = time.perf_counter()
    fitted = fit_method(method, problem, ds, M, cfg)
    wall = (time.perf_counter() - t0) * 1e3 if spec.timing else None
    return fitted, _record(spec, method, ds, sigma, M, seed, fitted, problem, wall)


def run_compare1d(spec: ExperimentSpec, out_dir=None) -> list[ResultRecord]:
    """Four-method comparison on the fixed 1D sites; writes prediction curves."""
    problem = manufactured("poisson1d")
    X = test_points(problem)
    records = []
    for seed in spec.seeds:
        for sigma in spec.sigma:
            ds = make_dataset(problem, SITES_U_1D, SITES_F_1D, sigma, seed)
            curves = []
            for M in spec.M:
                for method in spec.methods:
                    fitted, rec = _fit_cell(spec, problem, method, ds, sigma, M, seed)
                    records.append(rec)
                    post = fitted.predict(X)
                    curves.append((method, sigma, M, post))
            if out_dir is not None:
                _write_curves(Path(out_dir) / f"compare1d_predictions_seed{seed}.csv", X, curves)
    return records


def _write_curves(path: Path, X, curves) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "sigma", "M", "x", "mean", "std", "lower", "upper"])
    for method, sigma, M, post in curves:
        sd = post.std
        for x, m, s in zip(X[:, 0], post.mean, sd):
            w.writerow([method, repr(float(sigma)), M, repr(float(x)), repr(float(m)), repr(float(s)),
                        repr(float(m - 2 * s)), repr(float(m + 2 * s))])
    path.write_text(buf.getvalue())


def run_inference(spec: ExperimentSpec, out_dir=None) -> list[ResultRecord]:
    """Source-only inference sweep over ``n_f`` and ``sigma``.

    ``pde`` is run both without solution data (the ill-posed case) and with
    two extra noisy solution observations on the boundary in 1D.
    """
    problem = manufactured(spec.problem)
    records = []
    for seed in spec.seeds:
        for sigma in spec.sigma:
            for n_f in spec.n_f:
                sf = sites(problem, "f", n_f, spec.sampling, seed, spec.lhc_candidates)
                for M in spec.M:
                    for method in spec.methods:
                        variants = [np.empty((0, problem.domain.dim))]
                        if method == "pde" and problem.domain.dim == 1:
                            variants.append(np.array([[0.0], [1.0]]))
                        for su in variants:
                            ds = make_dataset(problem, su, sf, sigma, seed)
                            records.append(_fit_cell(spec, problem, method, ds, sigma, M, seed)[1])
    return records


def run_inference1d(spec: ExperimentSpec, out_dir=None) -> list[ResultRecord]:
    return run_inference(spec, out_dir)


def run_noiseless(spec: ExperimentSpec, out_dir=None) -> list[ResultRecord]:
    """Noiseless bvp fits (noise variance pinned) over ``M`` and ``n_f``.

    1D uses uniform grids; 2D draws a fresh maximin design per size.
    Cells with fewer observations than eigenfunctions are skipped.
    """
    problem = manufactured(spec.problem)
    dim = problem.domain.dim
    records = []
    for seed in spec.seeds:
        for M in spec.M:
            total = M**dim
            for n_f in spec.n_f:
                if n_f < total:
                    continue
                sf = sites(problem, "f", n_f, spec.sampling, seed, spec.lhc_candidates)
                ds = make_dataset(problem, np.empty((0, dim)), sf, 0.0, seed)
                records.append(_fit_cell(spec, problem, "bvp", ds, 0.0, M, seed, noiseless=True)[1])
    return records


def run_compare2d(spec: ExperimentSpec, out_dir=None) -> list[ResultRecord]:
    """pde vs bvp on shared maximin designs; writes error fields and boundary traces."""
    problem = manufactured("helmholtz2d")
    X = test_points(problem)
    truth = problem.u(X)
    records = []
    for seed in spec.seeds:
        for sigma in spec.sigma:
            for n_u in spec.n_u:
                for n_f in spec.n_f:
                    su = sites(problem, "u", n_u, spec.sampling, seed, spec.lhc_candidates)
                    sf = sites(problem, "f", n_f, spec.sampling, seed, spec.lhc_candidates)
                    ds = make_dataset(problem, su, sf, sigma, seed)
                    fields, traces = [], []
                    for M in spec.M:
                        for method in spec.methods:
                            fitted, rec = _fit_cell(spec, problem, method, ds, sigma, M, seed)
                            records.append(rec)
                            fields.append((method, M, fitted.predict(X)))
                            traces.append((method, M, boundary_traces(fitted)))
                    if out_dir is not None:
                        tag = f"seed{seed}_nu{n_u}_nf{n_f}_sigma{sigma!r}"
                        _write_field(Path(out_dir) / f"compare2d_field_{tag}.csv", X, truth, fields)
                        _write_traces(Path(out_dir) / f"compare2d_boundary_{tag}.csv", traces)
    return records


def boundary_traces(fitted: FittedMethod, n: int = 100) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Posterior quantities along the four faces of the unit square.

    Returns ``u`` on ``x=1`` and ``y=1``, ``du/dx`` on ``x=0`` and
    ``du/dy`` on ``y=0``, each as ``(t, values)``.
    """
    t = np.linspace(0.0, 1.0, n)
    one, zero = np.ones_like(t), np.zeros_like(t)
    return {
        "u@x=1": (t, fitted.predict(np.column_stack([one, t])).mean),
        "u@y=1": (t, fitted.predict(np.column_stack([t, one])).mean),
        "dudx@x=0": (t, fitted.mean_gradient(np.column_stack([zero, t]))[:, 0]),
        "dudy@y=0": (t, fitted.mean_gradient(np.column_stack([t, zero]))[:, 1]),
    }


def _write_field(path: Path, X, truth, fields) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "M", "x1", "x2", "truth", "mean", "std", "abs_error"])
    for method, M, post in fields:
        sd = post.std
        for (x1, x2), u, m, s in zip(X, truth, post.mean, sd):
            w.writerow([method, M, repr(float(x1)), repr(float(x2)), repr(float(u)),
                        repr(float(m)), repr(float(s)), repr(float(abs(m - u)))])
    path.write_text(buf.getvalue())


def _write_traces(path: Path, traces) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "M", "trace", "t", "value"])
    for method, M, tr in traces:
        for name, (t, v) in tr.items():
            for ti, vi in zip(t, v):
                w.writerow([method, M, name, repr(float(ti)), repr(float(vi))])
    path.write_text(buf.getvalue())


RUNNERS = {
    "compare1d": run_compare1d,
    "inference1d": run_inference1d,
    "noiseless1d": run_noiseless,
    "compare2d": run_compare2d,
    "inference2d": run_inference,
    "noiseless2d": run_noiseless,
}


def run_experiment(spec: ExperimentSpec, out_dir=None) -> list[ResultRecord]:
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    return RUNNERS[spec.experiment](spec, out_dir)


def results_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def results_from_csv(text: str) -> list[ResultRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != RESULT_COLUMNS:
        raise ValidationError("results CSV has an unexpected header")
    ints = {"n_u", "n_f", "M", "seed"}
    strs = {"experiment", "method"}
    out = []
    for row in rows[1:]:
        kw = {}
        for name, cell in zip(RESULT_COLUMNS, row):
            if name in strs:
                kw[name] = cell
            elif name in ints:
                kw[name] = int(cell)
            elif cell == "":
                kw[name] = None
            else:
                kw[name] = float(cell)
        out.append(ResultRecord(**kw))
    return out


def manifest(spec: ExperimentSpec, records) -> dict:
    """Everything needed to rerun ``spec``: the spec, library versions, seeds and timings."""
    from . import __version__

    problem = manufactured(spec.problem)
    designs = []
    if spec.sampling == "lhc":
        for seed in spec.seeds:
            for role, counts in (("u", spec.n_u), ("f", spec.n_f)):
                for n in counts:
                    if n > 0:
                        designs.append({"seed": seed, "role": role, "n": n,
                                        "design_seed": design_seed(seed, role, n)})
    return {
        "spec": spec.to_dict(),
        "problem": problem.name,
        "seeds": list(spec.seeds),
        "design_seeds": designs,
        "versions": {
            "bvpgp": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "wall_ms": [r.wall_ms for r in records],
    }


def emit_results(records, out_dir, spec: ExperimentSpec | None = None) -> Path:
    """Write ``results.csv`` and, given ``spec``, ``manifest.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "results.csv"
    path.write_text(results_to_csv(records))
    if spec is not None:
        (out / "manifest.json").write_text(json.dumps(manifest(spec, records), indent=2) + "\n")
    return path


def read_results(path) -> list[ResultRecord]:
    return results_from_csv(Path(path).read_text())


def spec_from_manifest(path) -> ExperimentSpec:
    return ExperimentSpec.from_dict(json.loads(Path(path).read_text())["spec"])


def median_error(records, method: str, **match) -> float:
    errs = [r.error for r in records
            if r.method == method and all(getattr(r, k) == v for k, v in match.items())]
    if not errs:
        return math.nan
    return float(np.median(errs))
