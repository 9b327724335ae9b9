"""Total variation flow and nonlocal facet curvature on the periodic torus."""
from .energy import SmoothedEnergy, operator_Em, wulff_value
from .errors import (
    BarrierFailure,
    BlowUpError,
    ConfigError,
    ConstructionError,
    NonConvergenceError,
    ResolutionError,
    SolverError,
    TVFlowError,
)
from .facets import (
    CurvatureConfig,
    ObstacleConfig,
    make_pair,
    nonlocal_curvature_obstacle,
    nonlocal_curvature_resolvent,
)
from .flow import BarrierSpec, EllipticOperatorF, FlowConfig, evolve, evolve_semigroup_tv
from .grid import PeriodicGrid, divergence_backward, gradient_forward, lipschitz_seminorm
from .resolvent import ResolventConfig, solve_resolvent_smooth, solve_resolvent_tv

__version__ = "0.1.0"
