"""Command-line interface: ``nlselect {select,simulate,ratio,verify}``.

Every run writes ``manifest.json`` (arguments, resolved seed, package
versions) next to its outputs.  ``NLSELECT_SEED`` overrides ``--seed``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from contextlib import nullcontext
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .data import Dataset, train_test_split
from .errors import MalformedCsv, MissingColumn, NLSelectError
from .priors import HyperConfig, ModelPriorSpec
from .search import SearchConfig, map_model, run_search
from .simulation import (DESIGNS, METRIC_HEADER, RATIO_HEADER, SimSpec, default_methods, mspe,
                         ratio_experiment, selection_experiment, write_csv)

log = logging.getLogger("nlselect")

def ingest_csv(path, response_column: str) -> Dataset:
    """Read a numeric CSV with a header row and return a standardized dataset.

    The response column is removed from the design and centred; all other
    columns are centred and scaled.  Constant columns raise
    ``ZeroVarianceColumn`` naming them.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if len(rows) < 3:
        raise MalformedCsv(f"{path}: need a header and at least two data rows")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise MalformedCsv(f"{path}: duplicate column names in header")
    if response_column not in header:
        raise MissingColumn(f"{path}: no column named {response_column!r}; have {header}")
    width = len(header)
    if width < 2:
        raise MalformedCsv(f"{path}: need the response and at least one covariate")
    values = np.empty((len(rows) - 1, width))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise MalformedCsv(f"{path}: line {i} has {len(row)} fields, expected {width}")
        try:
            values[i - 2] = [float(v) for v in row]
        except ValueError:
            raise MalformedCsv(f"{path}: non-numeric value on line {i}") from None
    if not np.all(np.isfinite(values)):
        raise MalformedCsv(f"{path}: non-finite values")
    j = header.index(response_column)
    names = tuple(h for k, h in enumerate(header) if k != j)
    x = np.delete(values, j, axis=1)
    return Dataset(x, values[:, j], columns=names).standardize()


def write_dataset_csv(path, dataset: Dataset, response_column: str = "y") -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(dataset.columns) + [response_column])
        for xi, yi in zip(dataset.x, dataset.y):
            writer.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])


# argument parsing

def _tau(text: str) -> Optional[float]:
    if text == "hier":
        return None
    if text.startswith("fixed:"):
        try:
            value = float(text.split(":", 1)[1])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad tau value in {text!r}") from None
        if not value > 0:
            raise argparse.ArgumentTypeError("fixed tau must be positive")
        return value
    raise argparse.ArgumentTypeError("expected 'hier' or 'fixed:<value>'")


def _model_prior(text: str) -> ModelPriorSpec:
    try:
        return ModelPriorSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_common(sp):
    g = sp.add_argument_group("prior")
    g.add_argument("--r", type=int, default=2, help="pMOM order (default 2)")
    g.add_argument("--alpha1", type=float, default=0.01)
    g.add_argument("--alpha2", type=float, default=0.01)
    g.add_argument("--tau", type=_tau, default=None, metavar="{hier|fixed:<v>}",
                   help="hierarchical tau (default) or a fixed value")
    g.add_argument("--model-prior", type=_model_prior, default=ModelPriorSpec(),
                   metavar="{uniform|complexity:<c1>,<c2>}")
    g.add_argument("--qn", type=int, default=None, help="model size cap (default ceil(n/2))")
    s = sp.add_argument_group("search")
    s.add_argument("--temps", type=_float_list, default=None,
                   help="temperature ladder, comma separated (default 10 values from 3 to 1)")
    s.add_argument("--iters", type=int, default=30, help="iterations per temperature")
    s.add_argument("--screen", type=int, default=None, help="screen size (default max(20, n/log n))")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=1, help="worker processes / threads")
    sp.add_argument("--out", type=Path, default=Path("nlselect_out"))


def _add_sim(sp, multi_p: bool):
    if multi_p:
        sp.add_argument("--p", type=_int_list, default=[100, 200, 400], help="comma-separated p values")
    else:
        sp.add_argument("--p", type=int, default=200)
    sp.add_argument("--n", type=int, default=None, help="sample size (default p/5)")
    sp.add_argument("--design", choices=list(DESIGNS), default="iso")
    sp.add_argument("--pattern", choices=["large", "mixed"], default="large")
    sp.add_argument("--reps", type=int, default=20)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nlselect", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nlselect {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("select", help="MAP model and inclusion probabilities for a CSV dataset")
    sp.add_argument("--data", type=Path, required=True)
    sp.add_argument("--response", required=True, help="name of the response column")
    sp.add_argument("--holdout", type=float, nargs="?", const=0.2, default=None,
                    help="hold out this fraction of rows for MSPE (0.2 when given without a value)")
    sp.add_argument("--top", type=int, default=20, help="number of top models to report")
    _add_common(sp)

    sp = sub.add_parser("simulate", help="selection metrics over simulated repetitions")
    _add_sim(sp, multi_p=False)
    sp.add_argument("--methods", default="hyper,fixed",
                    help="comma list from {hyper, fixed}; fixed uses tau=0.072")
    _add_common(sp)

    sp = sub.add_parser("ratio", help="posterior-ratio curves over a sweep of p")
    _add_sim(sp, multi_p=True)
    sp.add_argument("--scenarios", type=_int_list, default=[1, 2, 3, 4])
    _add_common(sp)

    sp = sub.add_parser("verify", help="check fast paths against the oracles")
    sp.add_argument("--draws", type=int, default=1_000_000, help="Monte Carlo draws per tail check")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", type=Path, default=Path("nlselect_out"))
    return parser


def resolve_seed(args) -> int:
    env = os.environ.get("NLSELECT_SEED")
    if env is not None and env != "":
        try:
            return int(env)
        except ValueError:
            raise SystemExit(f"NLSELECT_SEED must be an integer, got {env!r}") from None
    return args.seed


def hyper_from_args(args) -> HyperConfig:
    return HyperConfig(r=args.r, alpha1=args.alpha1, alpha2=args.alpha2, fixed_tau=args.tau,
                       model_prior=args.model_prior, q_n=args.qn)


def search_from_args(args, seed: int) -> SearchConfig:
    scfg = SearchConfig(iterations_per_temperature=args.iters, screen_size=args.screen, seed=seed)
    if args.temps:
        scfg = replace(scfg, temperature_ladder=tuple(args.temps))
    return scfg


def _versions():
    import numba
    import scipy
    return {"nlselect": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}


def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, ModelPriorSpec):
        return str(v)
    return v


def write_manifest(out: Path, args, seed: int) -> None:
    config = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k != "func"}
    manifest = {"command": args.command, "config": config, "seed": seed, "versions": _versions()}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _pool(threads: int, processes: bool):
    if threads <= 1:
        return nullcontext(None)
    return ProcessPoolExecutor(threads) if processes else ThreadPoolExecutor(threads)


# commands

def cmd_select(args, seed: int) -> int:
    data = ingest_csv(args.data, args.response)
    cfg = hyper_from_args(args)
    scfg = search_from_args(args, seed)
    train, test = data, None
    if args.holdout is not None:
        # standardize first, then split, as in the data-analysis workflow
        train, test = train_test_split(data, args.holdout, seed)
    with _pool(args.threads, processes=False) as pool:
        scored = run_search(train, cfg, scfg, executor=pool)
    best = map_model(scored)
    names = data.columns
    top = scored.top(args.top)
    incl = scored.inclusion_probabilities(data.p)
    result = {
        "map_model": list(best.model),
        "map_columns": [names[j] for j in best.model],
        "log_marginal": best.log_marginal,
        "log_posterior_unnorm": best.log_posterior_unnorm,
        "models_scored": len(scored),
        "failed_fits": len(scored.failures),
        "top_models": [{"model": list(e.model), "columns": [names[j] for j in e.model],
                        "log_marginal": e.log_marginal,
                        "log_posterior_unnorm": e.log_posterior_unnorm} for e in top],
        "inclusion_probabilities": {names[j]: float(incl[j]) for j in range(data.p)},
    }
    if test is not None:
        result["n_train"], result["n_test"] = train.n, test.n
        result["mspe"] = mspe(train, test, best.model)
    (args.out / "select.json").write_text(json.dumps(result, indent=2) + "\n")
    with open(args.out / "top_models.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "model", "size", "log_marginal", "log_prior", "log_posterior"])
        for i, e in enumerate(top, start=1):
            w.writerow([i, " ".join(names[j] for j in e.model), len(e.model), f"{e.log_marginal:.10g}",
                        f"{e.log_prior:.10g}", f"{e.log_posterior_unnorm:.10g}"])
    with open(args.out / "inclusion.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["column", "name", "probability"])
        for j in range(data.p):
            w.writerow([j, names[j], f"{incl[j]:.10g}"])
    print(f"MAP model: {result['map_columns']} (log posterior {best.log_posterior_unnorm:.4f})")
    return 0


def _methods(args):
    base = hyper_from_args(args)
    table = dict(zip(("hyper", "fixed"), default_methods(base)))
    chosen = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in chosen if m not in table]
    if bad or not chosen:
        raise SystemExit(f"--methods must be a comma list from {sorted(table)}, got {args.methods!r}")
    return [table[m] for m in chosen]


def cmd_simulate(args, seed: int) -> int:
    spec = SimSpec(p=args.p, n=args.n, design=args.design, beta_pattern=args.pattern,
                   repetitions=args.reps, seed=seed)
    with _pool(args.threads, processes=True) as pool:
        rows, details = selection_experiment(spec, _methods(args), search_from_args(args, seed), pool)
    write_csv(args.out / "metrics.csv", rows, METRIC_HEADER)
    with open(args.out / "repetitions.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rep", "method", "selected", "truth", "ppv", "tpr", "fpr"])
        for d in details:
            w.writerow([d.rep, d.method, " ".join(map(str, d.selected)), " ".join(map(str, d.truth)),
                        f"{d.metrics.ppv:.10g}", f"{d.metrics.tpr:.10g}", f"{d.metrics.fpr:.10g}"])
    for r in rows:
        print(f"{r.method:>12}  PPV {r.ppv:.3f}  TPR {r.tpr:.3f}  FPR {r.fpr:.4f}")
    return 0


def cmd_ratio(args, seed: int) -> int:
    base = SimSpec(p=max(args.p), n=args.n, design=args.design, beta_pattern=args.pattern,
                   repetitions=args.reps, seed=seed)
    with _pool(args.threads, processes=True) as pool:
        rows = ratio_experiment(base, args.scenarios, args.p, hyper_from_args(args), pool)
    write_csv(args.out / "ratio.csv", rows, RATIO_HEADER)
    for r in rows:
        print(f"p={r.p:<5} scenario {r.scenario}  mean log ratio {r.mean_log_ratio:10.3f} (se {r.stderr:.3f})")
    return 0


def cmd_verify(args, seed: int) -> int:
    from .verify import run_checks
    results = run_checks(draws=args.draws)
    failed = [r for r in results if not r.passed]
    report = {"passed": not failed, "checks": [r.as_dict() for r in results]}
    (args.out / "verify.json").write_text(json.dumps(report, indent=2) + "\n")
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.value:.4g} (threshold {r.threshold:.4g})")
    return 1 if failed else 0


COMMANDS = {"select": cmd_select, "simulate": cmd_simulate, "ratio": cmd_ratio, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    seed = resolve_seed(args)
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        write_manifest(args.out, args, seed)
        return COMMANDS[args.command](args, seed)
    except (NLSelectError, OSError) as exc:
        print(f"nlselect: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
