"""Safety filters for keeping control-affine systems between parallel
boundaries, built on constant-sum barrier pairs.

The library provides the joint slab constraint of a constant-sum pair, its
closed-form minimally invasive filter, a backstepping construction lifting
pairs of high relative degree to filterable level-n pairs, benchmark systems
(double integrator, integrator-extended unicycle), and a fixed-step
closed-loop simulator with event detection.
"""

from .core import (BarrierField, ClassKInfty, ConfigurationError,
                   ConstraintSlab, ControlAffineSystem, NumericalDomainError,
                   ParallelPair, class_k_linear, eval_slab, verify_parallel)
from .safety_filter import (ActiveBranch, FilterResult, InfeasibleSlabError,
                            feasibility_gap, solve_closed_form,
                            zero_lg_consistency)
from .backstepping import (BacksteppingChain, InitialConditionError, SmoothJet,
                           build_chain, gain_lower_bound, membership,
                           relative_degree_diagnostic, target_slab)
from .systems import (SingleCbfBaseline, UnicycleState, check_gradient_nonzero,
                      double_integrator, sine_corridor, single_cbf_baseline,
                      unicycle_extended, unicycle_lie_terms)
from .sim import (EventKind, ScenarioConfig, SimEvent, Trajectory,
                  build_scenario_artifacts, closed_loop_control, rk4_step,
                  run_scenario)

__version__ = "0.1.0"

__all__ = [
    "ActiveBranch", "BacksteppingChain", "BarrierField", "ClassKInfty",
    "ConfigurationError", "ConstraintSlab", "ControlAffineSystem", "EventKind",
    "FilterResult", "InfeasibleSlabError", "InitialConditionError",
    "NumericalDomainError", "ParallelPair", "ScenarioConfig", "SimEvent",
    "SingleCbfBaseline", "SmoothJet", "Trajectory", "UnicycleState",
    "build_chain", "build_scenario_artifacts", "check_gradient_nonzero",
    "class_k_linear", "closed_loop_control", "double_integrator", "eval_slab",
    "feasibility_gap", "gain_lower_bound", "membership",
    "relative_degree_diagnostic", "rk4_step", "run_scenario", "sine_corridor",
    "single_cbf_baseline", "solve_closed_form", "target_slab",
    "unicycle_extended", "unicycle_lie_terms", "verify_parallel",
    "zero_lg_consistency",
]
