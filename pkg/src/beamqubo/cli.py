"""Command line interface: build | presolve | solve | bench.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .baseline import best_fit
from .errors import BeamQuboError, FormatError, ValidationError
from .geometry import GeoPoint, SatelliteGeometry, build_proximity_graph
from .graph import write_edge_list
from .harness import (
    DEFAULT_BBOX,
    ExperimentConfig,
    load_ais_csv,
    run_experiment,
    synthesize_users,
    write_outputs,
)
from .presolve import build_reduced_hamiltonian, merge, presolve, presolve_report
from .qubo import ProblemInstance, build_qubo, write_qubo_file
from .sampler import RemoteEndpoint, default_schedule, remote_submit, simulated_annealing, solve_exact


class _Parser(argparse.ArgumentParser):
    """argparse, but argument problems exit with code 1 (config error)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_instance_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--users", type=int, default=None,
                   help="number of synthetic users (ignored with --ais)")
    p.add_argument("--ais", type=str, default=None, metavar="PATH",
                   help="AIS CSV file with vessel positions")
    p.add_argument("--bbox", type=str, default=None, metavar="W,S,E,N",
                   help="bounding box west,south,east,north in degrees "
                        f"(default {','.join(str(v) for v in DEFAULT_BBOX)})")
    p.add_argument("--alpha-deg", type=float, default=5.0,
                   help="beam cone angle in degrees (default 5.0)")
    p.add_argument("--capacity", type=int, default=20,
                   help="per-beam user capacity W (default 20)")
    p.add_argument("--beams", type=int, default=None,
                   help="beam budget B (default: number of users)")
    p.add_argument("--sat-lat", type=float, default=26.812309)
    p.add_argument("--sat-lon", type=float, default=-85.386382)
    p.add_argument("--sat-alt-km", type=float, default=1110.0)
    p.add_argument("--clusters", type=int, default=5,
                   help="synthetic cluster count (default 5)")
    p.add_argument("--spread-deg", type=float, default=0.08,
                   help="synthetic cluster scatter in degrees (default 0.08)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lam", type=float, default=None,
                   help="penalty weight (default B+1)")


def _add_backend_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=("exact", "sa", "remote"), default="sa")
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--reads", type=int, default=100)
    p.add_argument("--annealer-capacity", type=int, default=2000,
                   help="max free variables the backend accepts")
    p.add_argument("--allow-active-beam-join", action="store_true",
                   help="let unassigned users enter partially filled active beams")


def _parse_bbox(text: str | None) -> tuple[float, float, float, float]:
    if text is None:
        return DEFAULT_BBOX
    parts = text.split(",")
    if len(parts) != 4:
        raise ValidationError("--bbox needs four comma-separated numbers: W,S,E,N")
    try:
        west, south, east, north = (float(v) for v in parts)
    except ValueError as exc:
        raise ValidationError(f"bad --bbox value {text!r}") from exc
    return west, south, east, north


def _satellite(args) -> SatelliteGeometry:
    return SatelliteGeometry(
        position=GeoPoint(latitude=args.sat_lat, longitude=args.sat_lon,
                          altitude=args.sat_alt_km),
        cone_angle_alpha=float(np.radians(args.alpha_deg)),
    )


def _instance(args) -> ProblemInstance:
    bbox = _parse_bbox(args.bbox)
    if args.ais:
        users = load_ais_csv(args.ais, bbox)
        if args.users is not None and args.users < len(users):
            rng = np.random.default_rng(args.seed)
            pick = rng.choice(len(users), size=args.users, replace=False)
            from .geometry import UserSet
            users = UserSet(tuple(users.users[int(i)] for i in pick))
    else:
        if args.users is None:
            raise ValidationError("either --users or --ais is required")
        users = synthesize_users(args.users, args.clusters, args.spread_deg,
                                 args.seed, bbox)
    graph = build_proximity_graph(users, _satellite(args))
    beams = args.beams if args.beams is not None else graph.n
    return ProblemInstance(graph, beams, args.capacity)


def _cmd_build(args) -> int:
    inst = _instance(args)
    qubo, layout = build_qubo(inst, args.lam)
    os.makedirs(args.out, exist_ok=True)
    qubo_path = os.path.join(args.out, "qubo.txt")
    graph_path = os.path.join(args.out, "graph.txt")
    with open(qubo_path, "w") as fh:
        fh.write(write_qubo_file(qubo))
    with open(graph_path, "w") as fh:
        fh.write(write_edge_list(inst.graph))
    print(f"users={inst.N} beams={inst.B} capacity={inst.W} "
          f"variables={layout.size} entries={qubo.num_entries}")
    print(f"wrote {qubo_path}")
    print(f"wrote {graph_path}")
    return 0


def _cmd_presolve(args) -> int:
    inst = _instance(args)
    state = presolve(inst)
    report = presolve_report(state, inst, args.allow_active_beam_join)
    sys.stdout.write(report)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "presolve.txt")
        with open(path, "w") as fh:
            fh.write(report)
        print(f"wrote {path}")
    return 0


def _cmd_solve(args) -> int:
    inst = _instance(args)
    state = presolve(inst)
    if state.fully_assigned:
        from .harness import _presolved_solution

        sol = _presolved_solution(state, inst)
        solved_by = "presolve"
    else:
        qubo, layout = build_qubo(inst, args.lam)
        reduced = build_reduced_hamiltonian(
            state, inst, qubo=qubo, layout=layout,
            allow_active_beam_join=args.allow_active_beam_join,
            max_free_variables=args.annealer_capacity)
        if args.backend == "exact":
            result = solve_exact(reduced.qubo)
        elif args.backend == "sa":
            sched = default_schedule(reduced.qubo, sweeps=args.sweeps,
                                     reads=args.reads, seed=args.seed)
            result = simulated_annealing(reduced.qubo, sched)
        else:
            result = remote_submit(reduced.qubo, RemoteEndpoint.from_env(),
                                   num_reads=args.reads)
        sol = merge(reduced, result.best.bits, inst)
        solved_by = f"annealer[{args.backend}], {reduced.size} free variables"

    order = None
    if args.shuffle_seed is not None:
        order = np.random.default_rng(args.shuffle_seed).permutation(inst.N).tolist()
    bf = best_fit(inst, order)
    print(f"solved by:        {solved_by}")
    print(f"active beams:     {sol.objective}")
    print(f"feasible:         {sol.feasible}")
    if not sol.feasible:
        print(f"violations:       {[f'{v.constraint}{v.where}' for v in sol.violations]}")
    print(f"lp lower bound:   {state.lp_lower_bound:.6f}")
    print(f"best fit beams:   {bf.objective}")
    return 0


def _cmd_bench(args) -> int:
    counts = tuple(int(v) for v in args.counts.split(","))
    cfg = ExperimentConfig(
        user_counts=counts,
        realizations=args.realizations,
        satellite=_satellite(args),
        capacity=args.capacity,
        beams=args.beams,
        backend=args.backend,
        sweeps=args.sweeps,
        reads=args.reads,
        ais_path=args.ais,
        bbox=_parse_bbox(args.bbox),
        clusters=args.clusters,
        spread_deg=args.spread_deg,
        master_seed=args.seed,
        lam=args.lam,
        allow_active_beam_join=args.allow_active_beam_join,
        annealer_capacity=args.annealer_capacity,
        workers=args.workers,
    )
    records, summary = run_experiment(cfg)
    csv_path, json_path = write_outputs(records, summary, args.out,
                                        include_timings=args.timings)
    print(json.dumps(summary["overall"], indent=2, sort_keys=True))
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="beamqubo",
                     description="Beam placement via clique-cover QUBO with presolve")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", parents=[], help="construct and export the full QUBO")
    _add_instance_args(p)
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("presolve", help="run the two-step presolve and report")
    _add_instance_args(p)
    p.add_argument("--allow-active-beam-join", action="store_true")
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=_cmd_presolve)

    p = sub.add_parser("solve", help="presolve, anneal the rest, compare to Best Fit")
    _add_instance_args(p)
    _add_backend_args(p)
    p.add_argument("--shuffle-seed", type=int, default=None,
                   help="randomize the Best Fit user order with this seed")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("bench", help="seeded realization sweep with CSV/JSON output")
    _add_instance_args(p)
    _add_backend_args(p)
    p.add_argument("--counts", type=str, required=True, metavar="N1,N2,...",
                   help="user counts to sweep")
    p.add_argument("--realizations", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timings", action="store_true",
                   help="include (non-reproducible) timing columns in the CSV")
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=_cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, FormatError) as exc:
        print(f"beamqubo: config error: {exc}", file=sys.stderr)
        return 1
    except BeamQuboError as exc:
        print(f"beamqubo: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
