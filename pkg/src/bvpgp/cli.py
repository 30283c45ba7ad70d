"""``bvpgp`` command-line interface.

Exit codes: 0 on success, 2 for invalid input, 3 for numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .domain import Hyperparameters, dataset_from_csv, dataset_to_csv, read_dataset, validate_dataset, write_dataset
from .errors import NumericalError, ValidationError
from .experiments import (
    EXPERIMENTS,
    SAMPLINGS,
    default_spec,
    emit_results,
    run_experiment,
    sites,
    spec_from_manifest,
)
from .methods import METHODS, FittedMethod, fit_method, fit_with
from .reduced import ReducedModel
from .sampling import make_dataset, manufactured
from .training import TrainingConfig

MODEL_FORMAT = "bvpgp-model/1"


def _problem_for(ds, name: str | None):
    if name is None:
        name = "poisson1d" if ds.dim == 1 else "helmholtz2d"
    problem = manufactured(name)
    if problem.domain.dim != ds.dim:
        raise ValidationError(f"problem {name} is {problem.domain.dim}D but the data are {ds.dim}D")
    return problem


def cmd_gen_data(args) -> int:
    problem = manufactured(args.problem)
    su = sites(problem, "u", args.nu, args.sampling, args.seed)
    sf = sites(problem, "f", args.nf, args.sampling, args.seed)
    ds = make_dataset(problem, su, sf, args.sigma, args.seed)
    write_dataset(ds, args.out)
    return 0


def cmd_train(args) -> int:
    ds = read_dataset(args.data)
    problem = _problem_for(ds, args.problem)
    validate_dataset(ds, problem.domain)
    cfg = TrainingConfig(restarts=args.restarts, seed=args.seed, noiseless=args.noiseless)
    fitted = fit_method(args.method, problem, ds, args.M, cfg)
    text = dataset_to_csv(ds)
    doc = {
        "format": MODEL_FORMAT,
        "method": args.method,
        "problem": problem.name,
        "M": args.M,
        "noiseless": args.noiseless,
        "hyperparameters": fitted.hp.to_dict(),
        "dataset": text,
        "training": fitted.training.to_dict(),
    }
    if isinstance(fitted.model, ReducedModel):
        doc["reduced"] = fitted.model.to_dict(hashlib.sha256(text.encode()).hexdigest())
    Path(args.out).write_text(json.dumps(doc, indent=1) + "\n")
    return 0


def load_model(path) -> FittedMethod:
    """Rebuild a trained model; dense models are refitted from the stored data."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not a model file ({exc})") from exc
    if doc.get("format") != MODEL_FORMAT:
        raise ValidationError(f"{path}: unsupported model format {doc.get('format')!r}")
    if "reduced" in doc:
        return FittedMethod(doc["method"], ReducedModel.from_dict(doc["reduced"]))
    ds = dataset_from_csv(doc["dataset"])
    problem = manufactured(doc["problem"])
    hp = Hyperparameters.from_dict(doc["hyperparameters"])
    return fit_with(doc["method"], problem, ds, doc["M"], hp, noiseless=doc["noiseless"])


def cmd_predict(args) -> int:
    fitted = load_model(args.model)
    doc = json.loads(Path(args.model).read_text())
    dim = manufactured(doc["problem"]).domain.dim
    if args.grid < 2:
        raise ValidationError("--grid must be >= 2")
    t = np.linspace(0.0, 1.0, args.grid)
    if dim == 1:
        X = t[:, None]
    else:
        A, B = np.meshgrid(t, t, indexing="ij")
        X = np.column_stack([A.ravel(), B.ravel()])
    post = fitted.predict(X)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{i + 1}" for i in range(dim)] + ["mean", "std"])
    for x, m, s in zip(X, post.mean, post.std):
        w.writerow([repr(float(v)) for v in x] + [repr(float(m)), repr(float(s))])
    Path(args.out).write_text(buf.getvalue())
    return 0


def cmd_experiment(args) -> int:
    if args.manifest is not None:
        spec = spec_from_manifest(args.manifest)
        if args.experiment is not None and args.experiment != spec.experiment:
            raise ValidationError(f"manifest is for {spec.experiment}, not {args.experiment}")
    elif args.experiment is None:
        raise ValidationError("give an experiment id or --manifest")
    else:
        spec = default_spec(args.experiment, args.seeds, args.restarts, args.max_p)
        if args.sampling is not None:
            spec = replace(spec, sampling=args.sampling)
    if args.timing:
        spec = replace(spec, timing=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = run_experiment(spec, out)
    emit_results(records, out, spec)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bvpgp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="sample a manufactured problem with noise")
    g.add_argument("--problem", required=True, choices=("poisson1d", "helmholtz2d"))
    g.add_argument("--nu", type=int, default=0)
    g.add_argument("--nf", type=int, default=0)
    g.add_argument("--sigma", type=float, default=0.01)
    g.add_argument("--sampling", choices=SAMPLINGS, default="lhc")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="fit hyperparameters by maximum likelihood")
    t.add_argument("--data", required=True)
    t.add_argument("--method", required=True, choices=METHODS)
    t.add_argument("--M", type=int, default=8, help="eigenfunctions (per axis in 2D)")
    t.add_argument("--restarts", type=int, default=100)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--noiseless", action="store_true")
    t.add_argument("--problem", choices=("poisson1d", "helmholtz2d"), default=None)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("predict", help="posterior mean and std on a uniform grid")
    r.add_argument("--model", required=True)
    r.add_argument("--grid", type=int, default=100)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_predict)

    e = sub.add_parser("experiment", help="run a sweep and write results.csv + manifest.json")
    e.add_argument("experiment", nargs="?", choices=EXPERIMENTS)
    e.add_argument("--seeds", type=int, default=10)
    e.add_argument("--restarts", type=int, default=None)
    e.add_argument("--max-p", type=int, default=None, help="largest grid exponent for noiseless sweeps")
    e.add_argument("--sampling", choices=SAMPLINGS, default=None)
    e.add_argument("--manifest", default=None, help="rerun the spec stored in a manifest")
    e.add_argument("--timing", action="store_true", help="record wall time (breaks byte determinism)")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"bvpgp: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"bvpgp: error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"bvpgp: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
