"""Beam placement for LEO satellites as a clique-cover QUBO.

Pipeline: build the proximity graph from user/satellite geometry, formulate
the penalized QUBO, shrink it with the two-step presolve (greedy independent
set + LP relaxation), solve the reduced Hamiltonian with a pluggable
backend, and merge back into a full assignment.
"""
from .baseline import best_fit
from .errors import (
    BeamQuboError,
    BudgetExhaustedError,
    CapacityError,
    DegenerateGeometryError,
    FormatError,
    LpInfeasibleError,
    LpIterationLimitError,
    LpUnboundedError,
    ProtocolError,
    TransportError,
    ValidationError,
)
from .geometry import (
    EARTH_RADIUS_KM,
    GeoPoint,
    SatelliteGeometry,
    UserSet,
    angular_separation,
    build_proximity_graph,
    to_ecef,
)
from .graph import (
    ProximityGraph,
    greedy_independent_set,
    is_clique,
    is_independent,
    read_edge_list,
    write_edge_list,
)
from .harness import (
    ExperimentConfig,
    RealizationRecord,
    load_ais_csv,
    records_to_csv,
    run_experiment,
    synthesize_users,
    write_outputs,
)
from .presolve import (
    PresolveState,
    ReducedHamiltonian,
    build_reduced_hamiltonian,
    free_variable_count,
    merge,
    presolve,
    presolve_report,
)
from .qubo import (
    BeamSolution,
    IsingModel,
    ProblemInstance,
    QuboMatrix,
    VariableLayout,
    Violation,
    build_qubo,
    check_feasibility,
    condition,
    decode,
    energy,
    feasible_bits,
    ising_energy,
    qubit_count,
    qubo_to_ising,
    read_qubo_file,
    write_qubo_file,
)
from .sampler import (
    AnnealSchedule,
    RemoteEndpoint,
    Sample,
    SampleResult,
    default_schedule,
    remote_submit,
    simulated_annealing,
    solve_exact,
)
from .simplex import LinearProgram, lp_solve

__version__ = "0.1.0"
