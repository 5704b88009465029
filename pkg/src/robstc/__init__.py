"""Self-triggered stabilization of input-affine systems under bounded measurement error.

The package computes, for a control Lyapunov function and a sensor accuracy,
the largest measurement error each state tolerates, a uniform accuracy
requirement, and dwell times until the next measurement, then simulates the
resulting closed loop.
"""
from .bounds import (BoundsContext, EpsBarBreakdown, GridSpec, build_context, eps_bar,
                     eps_bar_field, eps_min, index_set, lipschitz_constants, sup_dynamics,
                     working_set)
from .decay import (AdmissiblePolytope, BetaVector, beta, beta_batch, is_nonempty, phi,
                    robust_polytope, select_control)
from .errors import (AccuracyInsufficient, ConfigError, DomainError, EmptyPolytope,
                     EvaluatorError, GeometryInfeasible, NoBoundExists, NonPositiveDwell,
                     RobSTCError)
from .scenarios import ScenarioSpec, get_scenario, prepare, simulate, verify_assumptions
from .sim import SimConfig, Trace, integrate_step, measure, run_closed_loop
from .sysmodel import (ControlAffineSystem, InputBox, LyapunovPackage, Region,
                       StabilizingFeedback, make_cubic3d_system, make_lotka_volterra_system,
                       make_train_system)
from .trigger import BallGeometry, ball_geometry, delta_k, displacement_bound

__version__ = "0.1.0"
