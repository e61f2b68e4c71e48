"""Averaged-function analysis and limit-cycle verification for a family of
piecewise-linear control systems built on nested isochronous centers.

The pipeline: model a 2n-dimensional system, average its first-order
perturbation over the fast angle (averaging), locate and classify zeros of
the averaged function (zeros), and verify the predicted cycles by
event-aware integration (flow).  quadrature supplies the independent numeric
oracle the closed forms are checked against; cli wires everything to a
command line.
"""

__version__ = "0.1.0"

from .averaging import (
    DegeneracyKind,
    DegeneracyVerdict,
    PolarPoint,
    Region,
    averaged_function,
    big_k,
    big_k_prime,
    big_l,
    classify,
    i_integral,
    j_integral,
)
from .flow import (
    LimitCycleResult,
    NoReturnError,
    SlidingDetected,
    SweepRow,
    Trajectory,
    TrajectoryEvent,
    TransversalityLost,
    audit_crossings,
    epsilon_sweep,
    find_limit_cycle,
    integrate,
    load_trajectory_csv,
    poincare_map,
    seed_to_section,
)
from .model import (
    ControlSystem,
    Family,
    Nonlinearity,
    block_frequency,
    saturation,
    sign_step,
    unperturbed_matrix,
    vector_field,
)
from .quadrature import (
    QuadratureConfig,
    QuadratureRule,
    ToleranceNotMet,
    averaged_component_numeric,
    integral_numeric,
)
from .zeros import (
    DegenerateBlockError,
    NoConvergenceError,
    NoProgressError,
    SeamError,
    ZeroReport,
    assemble_zero,
    jacobian,
    newton_polish,
    solve_block,
    solve_radial,
)

__all__ = [
    "__version__",
    "ControlSystem",
    "Family",
    "Nonlinearity",
    "block_frequency",
    "saturation",
    "sign_step",
    "unperturbed_matrix",
    "vector_field",
    "DegeneracyKind",
    "DegeneracyVerdict",
    "PolarPoint",
    "Region",
    "averaged_function",
    "big_k",
    "big_k_prime",
    "big_l",
    "classify",
    "i_integral",
    "j_integral",
    "QuadratureConfig",
    "QuadratureRule",
    "ToleranceNotMet",
    "averaged_component_numeric",
    "integral_numeric",
    "DegenerateBlockError",
    "NoConvergenceError",
    "NoProgressError",
    "SeamError",
    "ZeroReport",
    "assemble_zero",
    "jacobian",
    "newton_polish",
    "solve_block",
    "solve_radial",
    "LimitCycleResult",
    "NoReturnError",
    "SlidingDetected",
    "SweepRow",
    "Trajectory",
    "TrajectoryEvent",
    "TransversalityLost",
    "audit_crossings",
    "epsilon_sweep",
    "find_limit_cycle",
    "integrate",
    "load_trajectory_csv",
    "poincare_map",
    "seed_to_section",
]
