"""Experiment pipeline: sample instances, presolve, anneal, compare, report.

Each realization is a pure function of the experiment config and the master
seed; per-realization seeds come from a counter-based split so serial and
parallel sweeps emit identical records.  Timing columns are excluded from
the CSV by default to keep reruns byte-comparable.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from time import perf_counter

import numpy as np

from .baseline import best_fit
from .errors import BeamQuboError, FormatError, ValidationError
from .geometry import GeoPoint, SatelliteGeometry, UserSet, build_proximity_graph
from .presolve import (
    base_assignment_bits,
    build_reduced_hamiltonian,
    free_variable_count,
    merge,
    presolve,
)
from .qubo import (
    BeamSolution,
    ProblemInstance,
    VariableLayout,
    build_qubo,
    decode,
    qubit_count,
)
from .sampler import RemoteEndpoint, default_schedule, remote_submit, simulated_annealing, solve_exact

logger = logging.getLogger("beamqubo.harness")

# Gulf of Mexico (west, south, east, north); our choice, the vessel-location
# study region is not published with an explicit box.
DEFAULT_BBOX = (-98.0, 18.0, -80.0, 31.0)

# Table-derived defaults for the reference scenario.
DEFAULT_SATELLITE = SatelliteGeometry(
    position=GeoPoint(latitude=26.812309, longitude=-85.386382, altitude=1110.0),
    cone_angle_alpha=np.radians(5.0),
)


def load_ais_csv(path: str, bbox: tuple[float, float, float, float]) -> UserSet:
    """Read vessel positions from an AIS CSV and keep one row per vessel.

    The header must contain LAT, LON and a vessel identifier column (MMSI or
    a generic id).  Rows outside ``bbox = (west, south, east, north)`` are
    dropped, then duplicates collapse to the first occurrence per vessel.
    Unparseable rows are skipped and counted in a warning.
    """
    west, south, east, north = bbox
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise FormatError(f"{path}: missing CSV header")
        by_upper = {name.strip().upper(): name for name in reader.fieldnames}
        lat_col = by_upper.get("LAT")
        lon_col = by_upper.get("LON")
        id_col = None
        for candidate in ("MMSI", "VESSELID", "VESSEL_ID", "ID"):
            if candidate in by_upper:
                id_col = by_upper[candidate]
                break
        missing = [label for label, col in
                   (("LAT", lat_col), ("LON", lon_col), ("vessel id", id_col))
                   if col is None]
        if missing:
            raise FormatError(
                f"{path}: missing columns {missing}; header has {reader.fieldnames}")

        skipped = 0
        seen: dict[str, GeoPoint] = {}
        order: list[str] = []
        for row in reader:
            try:
                vessel = str(row[id_col]).strip()
                lat = float(row[lat_col])
                lon = float(row[lon_col])
                if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                    raise ValueError("coordinates out of range")
            except (KeyError, TypeError, ValueError):
                skipped += 1
                continue
            if not (west <= lon <= east and south <= lat <= north):
                continue
            if vessel not in seen:
                seen[vessel] = GeoPoint(latitude=lat, longitude=lon, altitude=0.0)
                order.append(vessel)
    if skipped:
        logger.warning("%s: skipped %d unparseable rows", path, skipped)
    return UserSet(tuple((vid, seen[vid]) for vid in order))


def synthesize_users(n: int, clusters: int, spread_deg: float, seed: int,
                     bbox: tuple[float, float, float, float] = DEFAULT_BBOX) -> UserSet:
    """Clustered synthetic users: uniform centers, normal scatter around them."""
    if n < 1:
        raise ValidationError("need at least one user")
    if clusters < 1:
        raise ValidationError("need at least one cluster")
    west, south, east, north = bbox
    rng = np.random.default_rng(seed)
    centers_lon = rng.uniform(west, east, size=clusters)
    centers_lat = rng.uniform(south, north, size=clusters)
    members = rng.integers(0, clusters, size=n)
    lons = centers_lon[members] + rng.normal(0.0, spread_deg, size=n)
    lats = centers_lat[members] + rng.normal(0.0, spread_deg, size=n)
    lats = np.clip(lats, -90.0, 90.0)
    lons = np.clip(lons, -180.0, 180.0)
    users = tuple(
        (f"u{i:04d}", GeoPoint(latitude=float(lats[i]), longitude=float(lons[i]),
                               altitude=0.0))
        for i in range(n)
    )
    return UserSet(users)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a sweep needs; B defaults to the user count of each instance."""

    user_counts: tuple[int, ...]
    realizations: int
    satellite: SatelliteGeometry = DEFAULT_SATELLITE
    capacity: int = 20
    beams: int | None = None
    backend: str = "sa"
    sweeps: int = 1000
    reads: int = 100
    ais_path: str | None = None
    bbox: tuple[float, float, float, float] = DEFAULT_BBOX
    clusters: int = 5
    spread_deg: float = 0.08
    master_seed: int = 0
    lam: float | None = None
    allow_active_beam_join: bool = False
    annealer_capacity: int | None = 2000
    workers: int = 1

    def __post_init__(self):
        if self.realizations < 1:
            raise ValidationError("realizations must be >= 1")
        if not self.user_counts or any(n < 1 for n in self.user_counts):
            raise ValidationError("user counts must be positive")
        if self.backend not in ("exact", "sa", "remote"):
            raise ValidationError(f"unknown backend {self.backend!r}")


@dataclass
class RealizationRecord:
    """One row of the sweep output; timings are volatile and stay out of the CSV."""

    index: int
    n_users: int
    seed: int
    total_variables: int
    free_variables: int
    reduction_ratio: float
    solved_by: str                   # presolve | annealer | failed
    feasible: bool
    objective_qa: int | None
    objective_best_fit: int | None
    lp_lower_bound: float | None
    error: str = ""
    timings: dict[str, float] = field(default_factory=dict)


CSV_COLUMNS = [
    "index", "n_users", "seed", "total_variables", "free_variables",
    "reduction_ratio", "solved_by", "feasible", "objective_qa",
    "objective_best_fit", "lp_lower_bound", "error",
]
TIMING_COLUMNS = ["t_presolve", "t_build", "t_solve", "t_best_fit"]


def _presolved_solution(state, inst) -> BeamSolution:
    layout = VariableLayout(inst.N, inst.B, inst.W)
    return decode(base_assignment_bits(state, layout), layout, inst)


def run_realization(cfg: ExperimentConfig, index: int, n: int,
                    ais_users: UserSet | None) -> RealizationRecord:
    """Sample one instance, run presolve + backend + baseline, collect metrics."""
    ss = np.random.SeedSequence(cfg.master_seed, spawn_key=(index,))
    words = ss.generate_state(2)
    seed_data = int(words[0])
    seed_anneal = int(words[1])
    timings: dict[str, float] = {}

    if ais_users is not None:
        rng = np.random.default_rng(seed_data)
        pick = rng.choice(len(ais_users), size=n, replace=False)
        users = UserSet(tuple(ais_users.users[int(i)] for i in pick))
    else:
        users = synthesize_users(n, cfg.clusters, cfg.spread_deg, seed_data, cfg.bbox)

    graph = build_proximity_graph(users, cfg.satellite)
    B = cfg.beams if cfg.beams is not None else n
    inst = ProblemInstance(graph, B, cfg.capacity)
    S = qubit_count(n, B, cfg.capacity)

    record = RealizationRecord(
        index=index, n_users=n, seed=seed_data, total_variables=S,
        free_variables=0, reduction_ratio=1.0, solved_by="failed",
        feasible=False, objective_qa=None, objective_best_fit=None,
        lp_lower_bound=None, timings=timings,
    )

    try:
        t0 = perf_counter()
        state = presolve(inst)
        timings["t_presolve"] = perf_counter() - t0
        record.lp_lower_bound = state.lp_lower_bound

        if state.fully_assigned:
            sol = _presolved_solution(state, inst)
            record.solved_by = "presolve"
            record.feasible = sol.feasible
            record.objective_qa = sol.objective
        else:
            record.free_variables = free_variable_count(
                state, inst, cfg.allow_active_beam_join)
            record.reduction_ratio = 1.0 - record.free_variables / S
            t0 = perf_counter()
            qubo, layout = build_qubo(inst, cfg.lam)
            timings["t_build"] = perf_counter() - t0
            reduced = build_reduced_hamiltonian(
                state, inst, qubo=qubo, layout=layout,
                allow_active_beam_join=cfg.allow_active_beam_join,
                max_free_variables=cfg.annealer_capacity)
            t0 = perf_counter()
            if cfg.backend == "exact":
                result = solve_exact(reduced.qubo)
            elif cfg.backend == "sa":
                sched = default_schedule(reduced.qubo, sweeps=cfg.sweeps,
                                         reads=cfg.reads, seed=seed_anneal)
                result = simulated_annealing(reduced.qubo, sched)
            else:
                result = remote_submit(reduced.qubo, RemoteEndpoint.from_env(),
                                       num_reads=cfg.reads)
            timings["t_solve"] = perf_counter() - t0
            sol = merge(reduced, result.best.bits, inst)
            record.solved_by = "annealer"
            record.feasible = sol.feasible
            record.objective_qa = sol.objective
    except BeamQuboError as exc:
        record.solved_by = "failed"
        record.feasible = False
        record.error = f"{type(exc).__name__}: {exc}"

    try:
        t0 = perf_counter()
        bf = best_fit(inst)
        timings["t_best_fit"] = perf_counter() - t0
        record.objective_best_fit = bf.objective
    except BeamQuboError as exc:
        record.error = (record.error + "; " if record.error else "") + \
            f"best_fit {type(exc).__name__}: {exc}"
    return record


def run_experiment(cfg: ExperimentConfig) -> tuple[list[RealizationRecord], dict]:
    """Run the full sweep and aggregate the summary statistics."""
    ais_users = None
    if cfg.ais_path is not None:
        ais_users = load_ais_csv(cfg.ais_path, cfg.bbox)
        if len(ais_users) < max(cfg.user_counts):
            raise ValidationError(
                f"AIS file provides {len(ais_users)} users inside the box, "
                f"fewer than the largest requested count {max(cfg.user_counts)}")

    tasks = []
    index = 0
    for n in cfg.user_counts:
        for _ in range(cfg.realizations):
            tasks.append((index, n))
            index += 1

    if cfg.workers <= 1:
        records = [run_realization(cfg, i, n, ais_users) for i, n in tasks]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(run_realization, cfg, i, n, ais_users)
                       for i, n in tasks]
            records = [f.result() for f in futures]
    records.sort(key=lambda r: r.index)
    return records, summarize(records, cfg)


def summarize(records: list[RealizationRecord], cfg: ExperimentConfig) -> dict:
    """Aggregate success probability, ratio quantiles and objective comparisons."""

    def stats(group: list[RealizationRecord]) -> dict:
        total = len(group)
        feasible = [r for r in group if r.feasible]
        annealer = [r for r in group if r.solved_by == "annealer"]
        annealer_ok = [r for r in annealer if r.feasible]
        ratios = np.array([r.reduction_ratio for r in group]) if group else np.zeros(0)
        qa_vs_bf = [
            r for r in annealer_ok
            if r.objective_best_fit is not None and r.objective_qa <= r.objective_best_fit
        ]
        out = {
            "realizations": total,
            "success_probability": len(feasible) / total if total else 0.0,
            "presolve_only": sum(r.solved_by == "presolve" for r in group),
            "annealer_solved": len(annealer),
            "failed": sum(r.solved_by == "failed" for r in group),
            "reduction_ratio_q1": float(np.percentile(ratios, 25)) if total else None,
            "reduction_ratio_median": float(np.percentile(ratios, 50)) if total else None,
            "reduction_ratio_q3": float(np.percentile(ratios, 75)) if total else None,
            "qa_not_worse_than_best_fit": len(qa_vs_bf),
        }
        if feasible:
            out["mean_objective_qa"] = float(np.mean([r.objective_qa for r in feasible]))
        bf = [r.objective_best_fit for r in group if r.objective_best_fit is not None]
        if bf:
            out["mean_objective_best_fit"] = float(np.mean(bf))
        lb = [r.lp_lower_bound for r in group if r.lp_lower_bound is not None]
        if lb:
            out["mean_lp_lower_bound"] = float(np.mean(lb))
        return out

    per_count = {}
    for n in sorted({r.n_users for r in records}):
        per_count[str(n)] = stats([r for r in records if r.n_users == n])
    return {
        "master_seed": cfg.master_seed,
        "backend": cfg.backend,
        "capacity": cfg.capacity,
        "overall": stats(records),
        "per_count": per_count,
    }


def records_to_csv(records: list[RealizationRecord], include_timings: bool = False) -> str:
    """Render records as CSV text.

    The leading comment line documents the convention for fully presolved
    realizations: free_variables = 0 and reduction_ratio = 1.0 even though no
    annealer call happened.  Timing columns are opt-in because they are not
    reproducible across runs.
    """
    buf = io.StringIO()
    buf.write("# reduction_ratio = 1 - free_variables/total_variables; "
              "fully presolved rows report free_variables=0, ratio=1.0\n")
    columns = CSV_COLUMNS + (TIMING_COLUMNS if include_timings else [])
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in records:
        row = [
            r.index, r.n_users, r.seed, r.total_variables, r.free_variables,
            repr(float(r.reduction_ratio)), r.solved_by, int(r.feasible),
            "" if r.objective_qa is None else r.objective_qa,
            "" if r.objective_best_fit is None else r.objective_best_fit,
            "" if r.lp_lower_bound is None else repr(float(r.lp_lower_bound)),
            r.error,
        ]
        if include_timings:
            row.extend(repr(r.timings.get(k, 0.0)) for k in TIMING_COLUMNS)
        writer.writerow(row)
    return buf.getvalue()


def write_outputs(records: list[RealizationRecord], summary: dict, out_dir: str,
                  include_timings: bool = False) -> tuple[str, str]:
    """Write records.csv and summary.json under ``out_dir``; returns the paths."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "records.csv")
    json_path = os.path.join(out_dir, "summary.json")
    with open(csv_path, "w", newline="") as fh:
        fh.write(records_to_csv(records, include_timings=include_timings))
    with open(json_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path
