"""Command-line interface.

Subcommands: ``test``, ``simulate``, ``generate``, ``perturb``.

``test`` exits with 0 when the null hypothesis is accepted, 1 when it is
rejected and 2 on any error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .clustering import load_partition
from .graph import GraphPopulation, load_edge_list, load_population, save_edge_list, save_population
from .harness import ALL_TESTS, ExperimentSpec, run_experiment, table_to_csv
from .models import (SbmSpec, derive_rng, plant_er_subgraph, sample_population,
                     sbm_population_adjacency, toggle_edges)
from .multi import BootstrapConfig, test_asymp_chi2, test_asymp_normal, test_boot
from .single import test_asymp_tw, test_boot_single

EXIT_ACCEPT, EXIT_REJECT, EXIT_ERROR = 0, 1, 2


class UsageError(Exception):
    pass


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 0)")
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker processes (default 1)")
    p.add_argument("--output", choices=["json", "csv"], default=argparse.SUPPRESS,
                   help="result format on stdout (default json)")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="graphtest", parents=[common],
                                 description="Two-sample hypothesis tests for graphs on a common vertex set.")
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", parents=[common], help="run one test on two graphs or populations")
    t.add_argument("first", help="population manifest (.json) or edge-list file")
    t.add_argument("second", help="population manifest (.json) or edge-list file")
    t.add_argument("--test", required=True, choices=ALL_TESTS)
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--b", type=int, default=200, help="bootstrap replicates")
    t.add_argument("--rank", type=int, default=2, help="rank / number of communities for m = 1 tests")
    t.add_argument("--communities", help="file with one block id per vertex (asymp-tw)")
    t.add_argument("--n", type=int, help="vertex count, required for bare edge-list inputs")
    t.add_argument("--report", choices=["p", "neglog"], default="p",
                   help="'neglog' adds -ln(p-value) to the output")

    s = sub.add_parser("simulate", parents=[common], help="Monte-Carlo rejection rates on the two-block SBM")
    s.add_argument("--config", help="JSON file with ExperimentSpec fields")
    s.add_argument("--n", type=int, nargs="+", dest="ns")
    s.add_argument("--m", type=int, nargs="+", dest="ms")
    s.add_argument("--tests", nargs="+", choices=ALL_TESTS)
    s.add_argument("--eps", type=float, nargs="+", dest="epsilons")
    s.add_argument("--rho", type=float, nargs="+", dest="rhos")
    s.add_argument("--rank", type=int, nargs="+", dest="ranks")
    s.add_argument("--p", type=float)
    s.add_argument("--q", type=float)
    s.add_argument("--trials", type=int)
    s.add_argument("--alpha", type=float)
    s.add_argument("--b", type=int)
    s.add_argument("--out", help="also write the CSV table to this path")
    s.add_argument("--timing", action="store_true", help="include wall times (not reproducible)")

    g = sub.add_parser("generate", parents=[common], help="sample SBM graphs into edge-list files")
    g.add_argument("--out-dir", required=True)
    g.add_argument("--n", type=int, help="two-block design: vertex count")
    g.add_argument("--p", type=float, default=0.1)
    g.add_argument("--q", type=float, default=0.05)
    g.add_argument("--eps", type=float, default=0.0)
    g.add_argument("--rho", type=float, default=1.0)
    g.add_argument("--sbm", help='JSON file {"block_sizes": [...], "B": [[...]]} instead of the two-block design')
    g.add_argument("--m", type=int, default=1, help="number of graphs")
    g.add_argument("--stem", default="graph")

    pt = sub.add_parser("perturb", parents=[common], help="plant an ER subgraph or toggle vertex pairs")
    pt.add_argument("input", help="edge-list file")
    pt.add_argument("--n", type=int, required=True)
    pt.add_argument("--out", required=True)
    how = pt.add_mutually_exclusive_group(required=True)
    how.add_argument("--plant", type=int, metavar="K", help="resample the subgraph on K random vertices")
    how.add_argument("--toggle", type=int, metavar="COUNT", help="flip COUNT random vertex pairs")
    pt.add_argument("--p-er", type=float, default=0.3, help="edge probability of the planted subgraph")
    return ap


def _load_input(path: str, n: int | None) -> GraphPopulation:
    if path.endswith(".json"):
        return load_population(path)
    if n is None:
        raise UsageError(f"--n is required to read the edge list {path}")
    return GraphPopulation([load_edge_list(path, n)])


def _emit(records: list[dict], fmt: str, out=None) -> None:
    out = out or sys.stdout
    if fmt == "json":
        out.write(json.dumps(records[0] if len(records) == 1 else records, sort_keys=True, indent=2) + "\n")
        return
    flat = []
    for rec in records:
        rec = dict(rec)
        details = rec.pop("details", {})
        rec.update({f"details.{k}": json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in details.items()})
        flat.append(rec)
    cols = sorted({k for rec in flat for k in rec})
    w = csv.DictWriter(out, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(flat)


def cmd_test(args) -> int:
    pop_g = _load_input(args.first, args.n)
    pop_h = _load_input(args.second, args.n)
    seed = args.seed
    name = args.test
    if name in ("asymp-tw", "boot-ase", "boot-epa"):
        if pop_g.m != 1 or pop_h.m != 1:
            raise UsageError(f"{name} compares exactly one graph per side, got m={pop_g.m} and m={pop_h.m}")
        g, h = pop_g[0], pop_h[0]
        if name == "asymp-tw":
            r = load_partition(args.communities, g.n) if args.communities else args.rank
            outcome = test_asymp_tw(g, h, r, args.alpha, seed=seed)
        else:
            outcome = test_boot_single(g, h, name.split("-")[1], args.rank, args.alpha, BootstrapConfig(args.b, seed))
    else:
        if pop_g.m < 2 or pop_h.m < 2:
            raise UsageError(f"{name} needs at least two graphs per population, got m={pop_g.m} and m={pop_h.m}")
        if name == "asymp-normal":
            outcome = test_asymp_normal(pop_g, pop_h, args.alpha)
        elif name == "asymp-chi2":
            outcome = test_asymp_chi2(pop_g, pop_h, args.alpha)
        else:
            outcome = test_boot(pop_g, pop_h, name.split("-")[1], args.alpha, BootstrapConfig(args.b, seed))
    rec = outcome.to_dict()
    if args.report != "neglog":
        rec.pop("neglog_p")
    _emit([rec], args.output)
    return EXIT_REJECT if outcome.reject else EXIT_ACCEPT


_SIM_FIELDS = ("ns", "ms", "tests", "epsilons", "rhos", "ranks", "p", "q", "trials", "alpha", "b")


def cmd_simulate(args) -> int:
    fields = json.loads(Path(args.config).read_text()) if args.config else {}
    for f in _SIM_FIELDS:
        v = getattr(args, f)
        if v is not None:
            fields[f] = v
    if args.seed_given:
        fields["seed"] = args.seed
    for f in ("ns", "ms", "tests"):
        if f not in fields:
            raise UsageError(f"simulate needs {f!r} from a flag or the config file")
    spec = ExperimentSpec.from_dict(fields)
    table = run_experiment(spec, threads=args.threads)
    if args.out:
        Path(args.out).write_text(table_to_csv(table, args.timing), encoding="utf-8")
    if args.output == "csv":
        sys.stdout.write(table_to_csv(table, args.timing))
    else:
        sys.stdout.write(table.to_json(spec, args.timing) + "\n")
    if args.timing:
        for test, sec in table.timing().items():
            print(f"{test}: {sec:.4f} s/trial", file=sys.stderr)
    return 0


def cmd_generate(args) -> int:
    if args.sbm:
        spec = SbmSpec.from_json(Path(args.sbm).read_text())
    elif args.n:
        spec = SbmSpec.two_block(args.n, args.p, args.q, args.eps, args.rho)
    else:
        raise UsageError("generate needs --n (two-block design) or --sbm FILE")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pop = sample_population(sbm_population_adjacency(spec), args.m, derive_rng(args.seed))
    manifest = out / f"{args.stem}.json"
    save_population(pop, manifest, stem=args.stem)
    _emit([{"manifest": str(manifest), "n": pop.n, "m": pop.m, "sbm": json.loads(spec.to_json())}], args.output)
    return 0


def cmd_perturb(args) -> int:
    g = load_edge_list(args.input, args.n)
    rng = derive_rng(args.seed)
    if args.plant is not None:
        h = plant_er_subgraph(g, args.plant, args.p_er, rng)
        what = {"operation": "plant", "k": args.plant, "p_er": args.p_er}
    else:
        h = toggle_edges(g, args.toggle, rng)
        what = {"operation": "toggle", "count": args.toggle}
    save_edge_list(h, args.out)
    _emit([{**what, "out": args.out, "edges_before": g.num_edges, "edges_after": h.num_edges}], args.output)
    return 0


_COMMANDS = {"test": cmd_test, "simulate": cmd_simulate, "generate": cmd_generate, "perturb": cmd_perturb}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_ACCEPT
    args.seed_given = "seed" in vars(args)
    for name, default in (("seed", 0), ("threads", 1), ("output", "json")):
        if not hasattr(args, name):
            setattr(args, name, default)
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, ValueError, OSError, KeyError, TypeError) as exc:
        print(f"graphtest {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
