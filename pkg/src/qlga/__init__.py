"""Classical simulator for local-gate quantum algorithms of many-body Schrodinger dynamics."""

from ._backend import BACKEND, set_num_threads
from .gates import (
    FERMION,
    HARD_BOSON,
    CollisionSpec,
    KineticParams,
    TwoQbitGate,
    build_collision_matrix,
    build_exchange_gate,
    build_external_phase,
    build_pair_phase,
    build_s_gate,
    lift_collision,
    validate_kinetic,
)
from .lattice import BRICK1D, QLGA, LatticeSpec, PairSchedule, advection_schedule, brick_schedules, build_lattice
from .state import (
    DenseState,
    SectorState,
    apply_gate,
    apply_phase,
    density_profile,
    init_basis,
    inner_product,
    norm,
    sample_measurement,
    sector_to_dense,
)
from .dynamics import (
    GateCount,
    InitialState,
    PairPotential,
    PotentialField,
    RunConfig,
    gate_count,
    pair_potential_pass,
    qlga_step,
    run_brick,
    run_qlga,
    step_brick,
)

__version__ = "0.1.0"
