"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 budget exhausted, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema

from . import absorbing, analyzer, constructions, extremal, io, solver
from .errors import (
    BadModulus,
    HypertileError,
    InvariantViolation,
    ResourceLimit,
)
from .hypergraph import edge_census, min_codegree, min_vertex_degree
from .params import DeskParams

EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_INVARIANT = 0, 2, 3, 4
SCAN_COLUMNS = ("n", "seed", "delta2", "verdict", "stage", "wall_ms")

log = logging.getLogger("hypertile")


class InputError(HypertileError):
    pass


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("hypertile").joinpath(f"schemas/{name}.v1.json").read_text()
    return json.loads(text)


def emit(name: str, payload: dict) -> None:
    payload = {"schema": f"hypertile/{name}/v1", **payload}
    try:
        jsonschema.validate(payload, load_schema(name))
    except jsonschema.ValidationError as exc:
        raise InvariantViolation(f"{name} output violates its schema: {exc.message}") from None
    print(json.dumps(payload, sort_keys=True))


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _read(path: str):
    try:
        return io.read_graph(path)
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None


def _read_partition(path: str | None, graph_path: str, n: int):
    p = Path(path) if path else io.sidecar_path(graph_path)
    if not p.exists():
        return None
    return io.parse_partition(p.read_text(), n)


# -- gen ----------------------------------------------------------------------------------


def cmd_gen(args) -> int:
    kind, sizes = args.kind, args.sizes
    seed = args.seed
    need = {"spaceB": 2, "vdeg": 1, "random": 1, "perturb": 1}[kind]
    if len(sizes) != need:
        raise InputError(f"gen {kind} takes {need} size argument(s), got {len(sizes)}")
    if kind == "spaceB":
        G, part = constructions.build_space_B(*sizes)
        A, B = part.A, part.B
    elif kind == "vdeg":
        G, part = constructions.build_vertexdeg_extremal(sizes[0])
        A, B = part.A, part.B
    elif kind == "random":
        n = sizes[0]
        floor = n // 2 - 1 if args.floor is None else args.floor
        G = constructions.random_with_min_codegree(n, floor, args.p, seed)
        part = analyzer.best_balanced_bipartition(G, seed=seed)
        A, B = part.A, part.B
    else:
        n = sizes[0]
        if n % 2:
            raise InputError(f"perturb needs an even n, got {n}")
        G, part = constructions.near_extremal_instance(n // 2, args.removals, seed)
        A, B = part.A, part.B
    text = io.serialize_graph(G)
    sidecar = io.serialize_partition(A, B)
    graph_path = part_path = None
    if args.out:
        graph_path = Path(args.out)
        part_path = io.sidecar_path(graph_path)
        graph_path.write_text(text)
        part_path.write_text(sidecar)
    if args.json:
        emit(
            "gen",
            {
                "kind": kind,
                "n": G.n,
                "m": G.m,
                "seed": seed if kind in ("random", "perturb") else None,
                "graph": str(graph_path) if graph_path else None,
                "partition": str(part_path) if part_path else None,
                "min_codegree": min_codegree(G),
            },
        )
    elif not args.out:
        sys.stdout.write(text)
    return EXIT_OK


# -- analyze ----------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    G = _read(args.file)
    verdict = analyzer.is_gamma_extremal(G, args.gamma, seed=args.seed)
    part = _read_partition(args.partition, args.file, G.n) if args.partition else None
    A, B = part if part else (sorted(verdict.witness.A), sorted(verdict.witness.B))
    slack = analyzer.check_le_bound(G)
    typ = analyzer.typical_triples(G, A, B, args.rho)
    emit(
        "analyze",
        {
            "n": G.n,
            "m": G.m,
            "min_codegree": min_codegree(G),
            "min_vertex_degree": min_vertex_degree(G) if G.n else None,
            "extremal": verdict.to_json(),
            "le_slack": slack.slack,
            "jsystem": list(analyzer.jsystem_degree_sequence(G)),
            "census": list(edge_census(G, A, B)),
            "typicality": {"rho": str(typ.rho), "count": typ.count},
        },
    )
    return EXIT_OK


# -- solve ------------------------------------------------------------------------------------


def cmd_solve(args) -> int:
    G = _read(args.file)
    if args.mode == "factor":
        res = solver.has_perfect_factor(G, budget=args.budget, workers=args.workers)
    elif args.mode == "max":
        res = solver.max_tiling(G, budget=args.budget, seed=args.seed)
    else:
        t = solver.greedy_almost_tiling(G, seed=args.seed)
        verdict = solver.Verdict.FACTOR if 4 * len(t) == G.n else solver.Verdict.UNKNOWN
        res = solver.SolveResult(verdict, t, 0, 0.0, optimal=False)
    if res.tiling is not None:
        ok, why = solver.verify_tiling(G, res.tiling, require_perfect=res.verdict is solver.Verdict.FACTOR)
        if not ok:
            raise InvariantViolation(f"solver returned an invalid tiling: {why}")
    emit("solve", {"mode": args.mode, **res.to_json(), "optimal": res.optimal})
    if res.verdict is solver.Verdict.UNKNOWN and args.mode == "factor":
        return EXIT_BUDGET
    return EXIT_OK


# -- factor ------------------------------------------------------------------------------------


def cmd_factor(args) -> int:
    G = _read(args.file)
    params = DeskParams(seed=args.seed)
    res = extremal.extremal_factor(G, args.gamma, params, fallback=args.fallback == "on", budget=args.budget)
    emit("factor", res.to_json())
    return EXIT_BUDGET if res.verdict is solver.Verdict.UNKNOWN else EXIT_OK


# -- absorb -------------------------------------------------------------------------------------


def cmd_absorb(args) -> int:
    if args.file:
        G = _read(args.file)
    elif args.demo:
        G = constructions.complete_graph(16)
    else:
        raise InputError("absorb needs a graph file or --demo")
    changes = {"seed": args.seed, "c": args.c}
    if args.tau is not None:
        changes["tau_connectors"] = args.tau
    if args.epsilon is not None:
        changes["epsilon"] = args.epsilon
    params = DeskParams(**changes)
    report: dict = {"n": G.n, "params": params.to_json(), "trials": 0, "successes": 0, "failures": []}
    report["closed_partition"] = absorbing.closed_partition(G, params).to_json()
    try:
        W = absorbing.build_absorbing_set(G, params)
    except HypertileError as exc:
        report["builder"] = {"ok": False, "error": f"{type(exc).__name__}: {exc}"}
        emit("absorb", report)
        return EXIT_OK
    report["builder"] = {"ok": True, **W.to_json()}
    free = [v for v in range(G.n) if v not in W.W]
    rng = random.Random(f"absorb-trials:{args.seed}")
    oracle = solver.FactorOracle(G)
    trials = args.trials if len(free) >= 4 else 0
    for _ in range(trials):
        U = sorted(rng.sample(free, 4))
        try:
            t = absorbing.absorb(G, W, U, oracle)
            ok, why = solver.verify_tiling(G, t, True, set(W.W) | set(U))
            if not ok:
                raise InvariantViolation(f"absorb returned an invalid factor: {why}")
            report["successes"] += 1
        except absorbing.AbsorbFailed as exc:
            report["failures"].append({"U": U, "error": str(exc)})
    report["trials"] = trials
    emit("absorb", report)
    return EXIT_OK


# -- scan ---------------------------------------------------------------------------------------


def _trial_seed(master: int, n: int, trial: int) -> int:
    return random.Random(f"{master}:{n}:{trial}").getrandbits(63)


def _scan_one(job: tuple[int, int, int, float, int]) -> dict:
    n, trial, master, p, budget = job
    seed = _trial_seed(master, n, trial)
    if trial == 0:
        G, _ = constructions.lower_bound_instance(n)
        stage = "certificate"
    else:
        G = constructions.random_with_min_codegree(n, n // 2 - 1, p, seed)
        stage = "exact"
    res = solver.has_perfect_factor(G, budget=budget)
    if res.tiling is not None and not solver.verify_tiling(G, res.tiling, True)[0]:
        raise InvariantViolation(f"scan produced an invalid factor at n={n}, trial={trial}")
    return {"n": n, "seed": seed, "delta2": min_codegree(G), "verdict": res.verdict.value, "stage": stage, "wall_ms": round(res.wall_ms, 3)}


def cmd_scan(args) -> int:
    for n in args.n:
        if n % 4 or n < 8:
            raise BadModulus(f"scan sizes must be multiples of 4 and at least 8, got {n}")
    budget = solver.default_budget() if args.budget is None else args.budget
    jobs = [(n, t, args.seed, args.p, budget) for n in args.n for t in range(args.trials)]
    log.info("scan master seed %d, %d jobs", args.seed, len(jobs))
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            records = list(pool.map(_scan_one, jobs))
    else:
        records = [_scan_one(j) for j in jobs]
    writer = csv.DictWriter(sys.stdout, fieldnames=SCAN_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(records)
    for n in args.n:
        rows = [r for r in records if r["n"] == n and r["stage"] == "exact"]
        decided = [r for r in rows if r["verdict"] != "Unknown"]
        factors = sum(1 for r in decided if r["verdict"] == "Factor")
        rate = f"{factors / len(decided):.4f}" if decided else "nan"
        unknown = len(rows) - len(decided)
        print(f"# summary n={n} random_trials={len(rows)} factor_rate={rate} unknown={unknown}", file=sys.stderr)
    return EXIT_OK


# -- roundtrip -----------------------------------------------------------------------------------


def cmd_roundtrip(args) -> int:
    try:
        text = Path(args.file).read_text()
    except FileNotFoundError:
        raise InputError(f"no such file: {args.file}") from None
    rt = io.roundtrip_text(text)
    if args.json:
        emit("roundtrip", {"file": args.file, "ok": rt.ok, "normalized": rt.normalized, "notes": rt.notes})
    else:
        print("true" if rt.ok else "false")
        for note in rt.notes:
            print(f"# {note}", file=sys.stderr)
    if not rt.ok:
        raise InvariantViolation("serialization is not idempotent")
    return EXIT_OK


# -- entry point -------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    def flags(suppress: bool) -> argparse.ArgumentParser:
        # subcommand copies must not reset values given before the subcommand
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        p = argparse.ArgumentParser(add_help=False)
        p.add_argument("--workers", type=int, default=d(1), help="worker processes for parallel searches")
        p.add_argument("--budget", type=int, default=d(None), help="node budget (default: HYPERTILE_BUDGET or 2000000)")
        p.add_argument("--json", action="store_true", default=d(False), help="machine-readable output where optional")
        p.add_argument("--seed", type=int, default=d(0), help="master seed for every randomized step")
        return p

    common = flags(True)
    parser = argparse.ArgumentParser(prog="hypertile", description="K4^- tilings of 3-graphs", parents=[flags(False)])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate an instance and its partition sidecar")
    g.add_argument("kind", choices=["spaceB", "vdeg", "random", "perturb"])
    g.add_argument("sizes", type=int, nargs="+")
    g.add_argument("--floor", type=int, default=None, help="codegree floor for random (default n/2-1)")
    g.add_argument("--p", type=float, default=0.6, help="edge probability for random")
    g.add_argument("--removals", type=int, default=5, help="edge removals for perturb")
    g.add_argument("--out", default=None, help="graph file; the sidecar goes to <out>.part")
    g.set_defaults(func=cmd_gen)

    a = sub.add_parser("analyze", parents=[common], help="extremality and counting diagnostics (JSON)")
    a.add_argument("file")
    a.add_argument("--gamma", type=_fraction, default=Fraction(1, 20))
    a.add_argument("--rho", type=_fraction, default=Fraction(1, 10))
    a.add_argument("--partition", default=None, help="sidecar to use instead of the best balanced split")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("solve", parents=[common], help="exact, maximum or greedy tiling (JSON)")
    s.add_argument("file")
    s.add_argument("--mode", choices=["factor", "max", "greedy"], default="factor")
    s.set_defaults(func=cmd_solve)

    f = sub.add_parser("factor", parents=[common], help="constructive extremal pipeline (JSON trace)")
    f.add_argument("file")
    f.add_argument("--gamma", type=_fraction, default=None)
    f.add_argument("--fallback", choices=["on", "off"], default="on")
    f.set_defaults(func=cmd_factor)

    b = sub.add_parser("absorb", parents=[common], help="absorbing-set builder and absorb trials (JSON)")
    b.add_argument("file", nargs="?")
    b.add_argument("--tau", type=int, default=None, help="length-1 connector threshold")
    b.add_argument("--c", type=int, default=4, help="connector length bound")
    b.add_argument("--epsilon", type=_fraction, default=None, help="absorbing-set size fraction")
    b.add_argument("--demo", action="store_true", help="use K_16 when no file is given")
    b.add_argument("--trials", type=int, default=50)
    b.set_defaults(func=cmd_absorb)

    sc = sub.add_parser("scan", parents=[common], help="codegree-threshold scan (CSV on stdout)")
    sc.add_argument("n", type=int, nargs="+")
    sc.add_argument("--trials", type=int, default=100)
    sc.add_argument("--p", type=float, default=0.6)
    sc.set_defaults(func=cmd_scan)

    r = sub.add_parser("roundtrip", parents=[common], help="check canonical parse/serialize round trip")
    r.add_argument("file")
    r.set_defaults(func=cmd_roundtrip)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.budget is not None and args.budget < 0:
        print("error: --budget must be non-negative", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ResourceLimit as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (HypertileError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
