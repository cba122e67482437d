"""Command-line interface: ``sembcd {validate,fit,simulate,lrt,bench}``.

Exit codes: 0 success, 2 unreadable or malformed input, 3 input that is
well-formed but unusable (ill-posed graph, too few samples, rank-deficient
data, non-nested models), 4 a fit that aborted.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from ._jit import backend
from .bcd import FitConfig, fit
from .graph import GraphError, MixedGraph, load_graph, save_graph
from .inference import FitFailedError, NestingError, lrt, subsample_lrt
from .likelihood import DataError, DataFormatError, Dataset, implied_covariance
from .simulate import (
    BenchRow,
    SimConfig,
    default_workers,
    random_graph,
    random_params,
    replication_rng,
    run_benchmark,
    sample_data,
    standard_configs,
)
from .wellposed import is_well_posed

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INVALID = 3
EXIT_FIT = 4
SCHEMA = 1

log = logging.getLogger("sembcd")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _emit(doc: dict, kind: str) -> None:
    json.dump({"schema": SCHEMA, "kind": kind, **doc}, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _read_graph(path: str) -> MixedGraph:
    try:
        return load_graph(path)
    except FileNotFoundError as exc:
        raise CliError(f"cannot read graph: {exc}", EXIT_PARSE) from exc
    except (GraphError, OSError) as exc:
        raise CliError(f"bad graph file {path}: {exc}", EXIT_PARSE) from exc


def _read_data(args, g: MixedGraph) -> Dataset:
    try:
        d = Dataset.from_csv(args.data, header=args.header, center=args.center, scale=args.scale)
    except FileNotFoundError as exc:
        raise CliError(f"cannot read data: {exc}", EXIT_PARSE) from exc
    except DataFormatError as exc:
        raise CliError(f"malformed data: {exc}", EXIT_PARSE) from exc
    except DataError as exc:
        raise CliError(f"unusable data: {exc}", EXIT_INVALID) from exc
    if d.n != g.n:
        raise CliError(f"data has {d.n} columns but the graph has {g.n} nodes", EXIT_INVALID)
    return d


def _fit_config(args) -> FitConfig:
    return FitConfig(
        tol_loglik=args.tol_loglik,
        tol_param=args.tol_param,
        tol_score=args.tol_score,
        max_sweeps=args.max_sweeps,
        init=args.init,
        seed=args.seed,
        check_conditions=args.check,
    )


def cmd_validate(args) -> int:
    g = _read_graph(args.graph)
    report = is_well_posed(g, warn=False)
    _emit({"graph": g.to_dict(), **report.to_dict()}, "well_posed_report")
    if not report.overall:
        print(
            f"warning: half-collider condition fails at nodes {report.failing_nodes}; "
            "block updates are not unique there and the model is not identifiable",
            file=sys.stderr,
        )
        return EXIT_INVALID
    return EXIT_OK


def cmd_fit(args) -> int:
    g = _read_graph(args.graph)
    d = _read_data(args, g)
    res = fit(g, d, _fit_config(args))
    doc = res.to_dict()
    doc["Sigma"] = implied_covariance(res.params).tolist()
    doc["backend"] = backend()
    _emit(doc, "fit_result")
    if args.params_out:
        with open(args.params_out, "w") as fh:
            json.dump({"schema": SCHEMA, "kind": "params", **res.params.to_dict()}, fh, indent=2)
    if not res.status.ok:
        print(f"error: fit aborted at node {res.failed_node}: {res.status.value}", file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


def _sim_config(args, replications: int = 1) -> SimConfig:
    try:
        return SimConfig(
            n_nodes=args.nodes,
            sample_size=args.samples,
            cycle_len=args.cycle,
            p_directed=args.pdir,
            p_bidirected=args.pbidir,
            replications=replications,
            seed=args.seed,
            allow_cycle_chords=args.cycle_chords,
        )
    except ValueError as exc:
        raise CliError(f"invalid simulation settings: {exc}", EXIT_PARSE) from exc


def cmd_simulate(args) -> int:
    cfg = _sim_config(args)
    rng = replication_rng(cfg.seed, 0)
    g = random_graph(cfg, rng)
    p, _ = random_params(g, rng)
    d = sample_data(p, cfg.sample_size, rng)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_graph(g, out / "graph.json")
    with open(out / "params.json", "w") as fh:
        json.dump({"schema": SCHEMA, "kind": "params", **p.to_dict()}, fh, indent=2)
    np.savetxt(out / "data.csv", d.Y.T, delimiter=",", fmt="%.17g")
    _emit({"graph": str(out / "graph.json"), "params": str(out / "params.json"),
           "data": str(out / "data.csv")}, "simulation")
    return EXIT_OK


def cmd_lrt(args) -> int:
    g0 = _read_graph(args.graph_null)
    g1 = _read_graph(args.graph_alt)
    d = _read_data(args, g1)
    cfg = _fit_config(args)
    try:
        res = lrt(g0, g1, d, cfg)
        doc = res.to_dict()
        if args.subsample_b:
            sub = subsample_lrt(
                g0, g1, d, args.subsample_b, args.n_sub, cfg,
                rng=args.seed, scale_stat=args.scale_stat, full_stat=res.stat,
            )
            doc["subsample"] = sub.to_dict()
    except NestingError as exc:
        raise CliError(str(exc), EXIT_INVALID) from exc
    except FitFailedError as exc:
        raise CliError(str(exc), EXIT_FIT) from exc
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INVALID) from exc
    _emit(doc, "lrt_result")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.preset == "standard":
        configs = standard_configs(args.reps, args.seed)
    else:
        configs = [_sim_config(args, args.reps)]
    workers = default_workers(args.threads)
    fit_cfg = FitConfig(max_sweeps=args.max_sweeps)
    rows = []
    for cfg in configs:
        row = run_benchmark(cfg, fit_cfg, n_jobs=workers)
        log.info("finished V=%d N=%d k=%d d=%.2f", cfg.n_nodes, cfg.sample_size, cfg.cycle_len, cfg.p_directed)
        rows.append(row)
    if args.format == "json":
        _emit({"rows": [r.to_dict() for r in rows]}, "bench")
    else:
        writer = csv.DictWriter(sys.stdout, fieldnames=BenchRow.FIELDS, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow(asdict(r))
    return EXIT_OK


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol-loglik", type=float, default=1e-8)
    p.add_argument("--tol-param", type=float, default=1e-6)
    p.add_argument("--tol-score", type=float, default=1e-6)
    p.add_argument("--max-sweeps", type=int, default=5000)
    p.add_argument("--init", choices=("least_squares", "random"), default="least_squares")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--check", action="store_true", help="run the well-posedness check first")


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--header", action="store_true", help="skip the first CSV line")
    p.add_argument("--center", action="store_true", help="subtract column means")
    p.add_argument("--scale", action="store_true", help="center and scale columns to unit variance")


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--nodes", type=int, default=10)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--cycle", type=int, default=0)
    p.add_argument("--pdir", type=float, default=0.1)
    p.add_argument("--pbidir", type=float, default=None, help="defaults to pdir/2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cycle-chords", action="store_true", help="allow edges among cycle nodes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sembcd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check that every block update is well posed")
    p.add_argument("graph")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("fit", help="maximum likelihood fit by block-coordinate descent")
    p.add_argument("graph")
    p.add_argument("data")
    _add_data_flags(p)
    _add_fit_flags(p)
    p.add_argument("--params-out", help="also write the fitted parameters here")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="draw a random graph, parameters and data")
    _add_sim_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("lrt", help="likelihood-ratio test between nested graphs")
    p.add_argument("graph_null")
    p.add_argument("graph_alt")
    p.add_argument("data")
    _add_data_flags(p)
    _add_fit_flags(p)
    p.add_argument("--subsample-b", type=int, default=0)
    p.add_argument("--n-sub", type=int, default=100)
    p.add_argument("--scale-stat", action="store_true", help="rescale subsample statistics by N/b")
    p.set_defaults(func=cmd_lrt)

    p = sub.add_parser("bench", help="simulate-and-fit benchmark, one CSV row per setting")
    _add_sim_flags(p)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--max-sweeps", type=int, default=5000)
    p.add_argument("--threads", type=int, default=None, help="worker processes (SEM_BCD_THREADS overrides)")
    p.add_argument("--preset", choices=("standard",), default=None, help="run all 24 standard settings")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
