"""Terminal assignment cells of training-free flow matching from a standard
Gaussian to a uniform discrete target, compared with optimal-transport
Laguerre cells."""

from .core import (
    UNRESOLVED,
    AtomSet,
    CheckResult,
    DimensionMismatch,
    DuplicateAtoms,
    FlowConfig,
    GridSpec,
    InvalidTime,
    LabelField,
    LengthMismatch,
    NonFiniteState,
    NonOrthogonal,
    NotConverged,
    RunReport,
    SDFMError,
    StepLimitExceeded,
    Trajectory,
    four_point_example,
    load_atoms,
    make_atoms,
    random_atoms,
    save_atoms,
    ten_atom_example,
)
from .flow import assign, assign_many, center_curve, flow_map, integrate_forward, tessellate, terminal_map
from .ot import laguerre_assign, solve_weights, tessellate_laguerre
from .velocity import softmax_weights, velocity, velocity_jacobian

__version__ = "0.1.0"
