"""Non-linear Bellman equations on finite tabular MDPs."""

from .experiments import SweepResult, action_gap_sweep, discount_curves, ordering_grid
from .mdp import Mdp, Policy, RngState, Trajectory, rollout, sample_step, stationary_distribution, validate
from .returns import (OrderingVerdict, hyperbolic_return, prefers_later, transformed_return,
                      verify_ordering_equivalence)
from .solvers import (DivergenceError, NonConvergenceError, SolveDiagnostics, TdConfig,
                      action_values, apply_operator, empirical_contraction, fixed_point,
                      greedy_policy, td0)
from .transforms import (DiscountFunction, Family, HdtdSingularity, Kind, TransformSpec,
                         discount_apply, discount_derivative, eval_target,
                         hyperbolic_equivalent_g, lipschitz_bound, squash, unsquash)

__version__ = "0.1.0"
