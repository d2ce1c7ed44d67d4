"""Inertial parallel asynchronous forward-backward iterations.

The fixed-point map is ``T = T_A o T_B`` with ``T_B = I - gamma B`` a forward
step on a cocoercive, strongly monotone ``B`` and ``T_A`` a block-separable
backward (resolvent) map.  Synchronous, cyclic and asynchronous variants run
on a shared :class:`OperatorPair`; the asynchronous one runs against a seeded
discrete-event scheduler and records an auditable trace.
"""

from .errors import (
    BoundedDelayError,
    ContractError,
    ConvergenceError,
    DivergenceError,
    ParameterError,
    PreconditionError,
    ProtocolError,
    TraceFormatError,
)
from .operators import (
    BackwardBlocks,
    BlockPartition,
    BlockVector,
    BoxProjection,
    BoxQP,
    BoxQPProx,
    ForwardOperator,
    IdentityBlock,
    OperatorPair,
    SeparableQuadraticProx,
    apply_S,
    apply_T,
    apply_forward_step,
    estimate_lipschitz,
    power_iteration,
    probe_cocoercive,
    probe_nonexpansive,
    probe_quasi_strong,
    prox_box_qp,
    prox_separable_quadratic,
    quadratic_forward,
    zero_forward,
)
from .engines import RunResult, SyncParams, run_cyclic_coordinate_km, run_heavy_ball, run_km, run_sync_fbs
from .scheduler import AgentProfile, ScheduleConfig, TauReport, measure_tau
from .trace import Trace, TraceEvent
from .protocol import (
    AsyncParams,
    DecompositionReport,
    DelayReport,
    check_decomposition,
    reconstruct_error,
    replay,
    run_async,
    run_sync_timed,
    verify_delay_bounds,
)
from .theory import (
    IssReport,
    TheoryConstants,
    TheoryInputs,
    best_delta_epsilon,
    check_iss,
    compute_nu,
    compute_Y_X,
    contraction_margin,
    eta_bound,
    eta_max,
    q_of_eta,
    r_of_eta,
    rate,
    theory_constants,
)
from .instances import QuadraticInstance, make_quadratic
from .dispatch import DispatchProblem, make_problem, solve_reference

__version__ = "0.1.0"
