"""Time-optimal trajectories for the triple integrator under box constraints."""

from .core import (
    INFEASIBLE,
    OPTIMAL,
    InvariantError,
    Limits,
    ProblemInstance,
    Segment,
    Solution,
    State2,
    State3,
    Trajectory,
    instance_from_dict,
    instance_to_dict,
    solution_from_dict,
    solution_to_dict,
)
from .kinematics import (
    check_feasible,
    eval_at,
    negate,
    phi,
    rollout,
    scale,
    segment_extrema,
)

__all__ = [
    "INFEASIBLE",
    "OPTIMAL",
    "InvariantError",
    "Limits",
    "ProblemInstance",
    "Segment",
    "Solution",
    "State2",
    "State3",
    "Trajectory",
    "check_feasible",
    "eval_at",
    "instance_from_dict",
    "instance_to_dict",
    "negate",
    "phi",
    "rollout",
    "scale",
    "segment_extrema",
    "solution_from_dict",
    "solution_to_dict",
    "solve",
    "solve2",
    "solve3",
]


def solve2(x0, xf, limits):
    from .planner2 import solve2 as _solve2

    return _solve2(x0, xf, limits)


def solve3(x0, xf, limits):
    from .planner3 import solve3_full as _solve3

    return _solve3(x0, xf, limits)


def solve(instance: ProblemInstance) -> Solution:
    """Solve a 2nd- or 3rd-order instance time-optimally."""
    if instance.order == 2:
        return solve2(instance.x0, instance.xf, instance.limits)
    return solve3(instance.x0, instance.xf, instance.limits)
