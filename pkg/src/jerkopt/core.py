"""Domain types for the jerk-limited time-optimal planner.

States follow the chain-of-integrators reading: x1 is acceleration-like,
x2 velocity-like, x3 position-like, and the control u is the jerk. All
types are immutable after construction and validate their invariants on
construction. Unbounded constraint sides are represented by +/-inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# Solver-internal tolerance on states, normalized by max(1, |bound|).
TOL_SOLVE = 1e-9
# Membership tolerance for switching curves/surfaces (normalized coords).
TOL_MEMBER = 1e-10
# Roots in [-TIME_SNAP, 0) are snapped to zero-duration arcs.
TIME_SNAP = 1e-10
# Benchmark gate: constraint exceedance and open-loop error.
TOL_EXCEED = 1e-3
TOL_EO = 1e-4

ARC_TOKENS = ("0+", "0-", "1+", "1-", "2+", "2-")
MARKER_TOKENS = ("T+", "T-")

NEGATE_TOKEN = {
    "0+": "0-", "0-": "0+",
    "1+": "1-", "1-": "1+",
    "2+": "2-", "2-": "2+",
    "T+": "T-", "T-": "T+",
}

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"


class InvariantError(ValueError):
    """Raised when a constructor rejects a value; names the violated invariant."""


def _require_finite(name, value):
    if not math.isfinite(value):
        raise InvariantError(f"{name} must be finite, got {value!r}")
    return float(value)


@dataclass(frozen=True, slots=True)
class State2:
    """Second-order state (acceleration-like, velocity-like)."""

    x1: float
    x2: float

    def __post_init__(self):
        object.__setattr__(self, "x1", _require_finite("State2.x1", self.x1))
        object.__setattr__(self, "x2", _require_finite("State2.x2", self.x2))

    def __iter__(self):
        yield self.x1
        yield self.x2

    def astuple(self):
        return (self.x1, self.x2)


@dataclass(frozen=True, slots=True)
class State3:
    """Third-order state (acceleration-like, velocity-like, position-like)."""

    x1: float
    x2: float
    x3: float

    def __post_init__(self):
        object.__setattr__(self, "x1", _require_finite("State3.x1", self.x1))
        object.__setattr__(self, "x2", _require_finite("State3.x2", self.x2))
        object.__setattr__(self, "x3", _require_finite("State3.x3", self.x3))

    def __iter__(self):
        yield self.x1
        yield self.x2
        yield self.x3

    def astuple(self):
        return (self.x1, self.x2, self.x3)

    def project(self) -> State2:
        return State2(self.x1, self.x2)


def make_state(components) -> State2 | State3:
    comps = tuple(float(c) for c in components)
    if len(comps) == 2:
        return State2(*comps)
    if len(comps) == 3:
        return State3(*comps)
    raise InvariantError(f"state must have 2 or 3 components, got {len(comps)}")


@dataclass(frozen=True, slots=True)
class Limits:
    """Asymmetric box constraints on control and states.

    lo/hi are 3-tuples indexed by state order minus one; an unbounded side
    is +/-inf (never a large finite number). Control bounds must straddle
    zero, as must acceleration and velocity bounds on each finite side;
    position bounds only need lo < hi.
    """

    umin: float
    umax: float
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        umin = float(self.umin)
        umax = float(self.umax)
        if math.isnan(umin) or math.isnan(umax) or math.isinf(umin) or math.isinf(umax):
            raise InvariantError("control bounds must be finite")
        if not (umin < 0.0 < umax):
            raise InvariantError(f"need umin < 0 < umax, got [{umin}, {umax}]")
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3:
            raise InvariantError("lo/hi must have three entries")
        for k in range(3):
            if math.isnan(lo[k]) or math.isnan(hi[k]):
                raise InvariantError(f"bound {k + 1} is NaN")
            if not lo[k] < hi[k]:
                raise InvariantError(f"need lo[{k + 1}] < hi[{k + 1}]")
        for k in (0, 1):
            if math.isfinite(lo[k]) and not lo[k] < 0.0:
                raise InvariantError(f"finite lo[{k + 1}] must be < 0")
            if math.isfinite(hi[k]) and not hi[k] > 0.0:
                raise InvariantError(f"finite hi[{k + 1}] must be > 0")
        object.__setattr__(self, "umin", umin)
        object.__setattr__(self, "umax", umax)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def bound_for(self, token: str) -> float:
        """Pinned state value for a constrained arc token like '1-' or '2+'."""
        k = int(token[0])
        return self.hi[k - 1] if token[1] == "+" else self.lo[k - 1]

    def contains(self, state, tol_scale: float = 1e-12) -> bool:
        for k, v in enumerate(state):
            lo, hi = self.lo[k], self.hi[k]
            if v < lo - tol_scale * max(1.0, abs(lo)):
                return False
            if v > hi + tol_scale * max(1.0, abs(hi)):
                return False
        return True


def is_arc_token(token: str) -> bool:
    return token in ARC_TOKENS


def is_marker_token(token: str) -> bool:
    return token in MARKER_TOKENS


def check_tokens(tokens, limits: Limits | None = None):
    """Structural Asl validation (grammar validation lives in planner3)."""
    tokens = tuple(tokens)
    prev_arc = None
    prev_marker = None
    for tok in tokens:
        if tok in ARC_TOKENS:
            if tok == prev_arc and prev_marker is None:
                raise InvariantError(f"consecutive identical arc tokens {tok!r}")
            if limits is not None and tok[0] in "12":
                if not math.isfinite(limits.bound_for(tok)):
                    raise InvariantError(f"token {tok!r} references an unbounded side")
            prev_arc, prev_marker = tok, None
        elif tok in MARKER_TOKENS:
            if tok == prev_marker:
                raise InvariantError(f"consecutive same-sign markers {tok!r}")
            if limits is not None:
                bound = limits.hi[2] if tok == "T+" else limits.lo[2]
                if not math.isfinite(bound):
                    raise InvariantError(f"marker {tok!r} references an unbounded side")
            prev_marker, prev_arc = tok, None
        else:
            raise InvariantError(f"unknown token {tok!r}")
    return tokens


@dataclass(frozen=True, slots=True)
class Segment:
    """Constant-control piece of a trajectory."""

    u: float
    dt: float
    label: str

    def __post_init__(self):
        u = _require_finite("Segment.u", self.u)
        dt = _require_finite("Segment.dt", self.dt)
        if dt < 0.0:
            raise InvariantError(f"Segment.dt must be >= 0, got {dt}")
        if self.label not in ARC_TOKENS:
            raise InvariantError(f"Segment.label must be an arc token, got {self.label!r}")
        if self.label[0] in "12" and u != 0.0:
            raise InvariantError("constrained arcs carry u = 0")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "dt", dt)


@dataclass(frozen=True)
class Trajectory:
    """Initial state plus ordered constant-control segments.

    markers are (index-between-segments, token) pairs: index i marks the
    instant after segment i-1 and before segment i. Breakpoint states are
    cached on construction for O(1) access.
    """

    x0: State2 | State3
    segments: tuple[Segment, ...]
    markers: tuple[tuple[int, str], ...] = ()
    breakpoints: tuple[tuple, ...] = field(init=False, repr=False, compare=False)
    times: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "markers", tuple(self.markers))
        n = len(self.segments)
        for idx, tok in self.markers:
            if not 0 <= idx <= n:
                raise InvariantError(f"marker index {idx} out of range")
            if tok not in MARKER_TOKENS:
                raise InvariantError(f"marker token {tok!r} invalid")
        order = 3 if isinstance(self.x0, State3) else 2
        state = self.x0.astuple()
        breaks = [state]
        times = [0.0]
        t = 0.0
        for seg in self.segments:
            state = _phi_tuple(state, seg.u, seg.dt, order)
            t += seg.dt
            breaks.append(state)
            times.append(t)
        object.__setattr__(self, "breakpoints", tuple(breaks))
        object.__setattr__(self, "times", tuple(times))

    @property
    def order(self) -> int:
        return 3 if isinstance(self.x0, State3) else 2

    @property
    def tf(self) -> float:
        return self.times[-1]

    @property
    def endpoint(self) -> tuple:
        return self.breakpoints[-1]

    def asl(self) -> tuple[str, ...]:
        """Token list: arc labels with markers spliced at their junctions."""
        by_index: dict[int, list[str]] = {}
        for idx, tok in self.markers:
            by_index.setdefault(idx, []).append(tok)
        out: list[str] = []
        for i, seg in enumerate(self.segments):
            out.extend(by_index.get(i, ()))
            out.append(seg.label)
        out.extend(by_index.get(len(self.segments), ()))
        return tuple(out)


def _phi_tuple(x, u, t, order):
    # Exact constant-control flow; duplicated from kinematics to keep core
    # import-free (kinematics re-exports the public phi).
    if order == 2:
        x1, x2 = x
        return (x1 + u * t, x2 + t * (x1 + 0.5 * u * t))
    x1, x2, x3 = x
    return (
        x1 + u * t,
        x2 + t * (x1 + 0.5 * u * t),
        x3 + t * (x2 + t * (0.5 * x1 + u * t / 6.0)),
    )


@dataclass(frozen=True, slots=True)
class ProblemInstance:
    """Boundary-value problem: drive x0 to xf inside the box."""

    order: int
    x0: State2 | State3
    xf: State2 | State3
    limits: Limits

    def __post_init__(self):
        if self.order not in (2, 3):
            raise InvariantError(f"order must be 2 or 3, got {self.order}")
        want = State3 if self.order == 3 else State2
        if not isinstance(self.x0, want) or not isinstance(self.xf, want):
            raise InvariantError("boundary states must match the problem order")
        for name, st in (("x0", self.x0), ("xf", self.xf)):
            if not self.limits.contains(st):
                raise InvariantError(f"{name} violates the state box")


@dataclass(frozen=True, slots=True)
class Solution:
    """Planner output; trajectory is meaningful only when status is Optimal."""

    status: str
    trajectory: Trajectory | None = None
    asl: tuple[str, ...] = ()

    def __post_init__(self):
        if self.status not in (OPTIMAL, INFEASIBLE):
            raise InvariantError(f"status must be Optimal or Infeasible, got {self.status!r}")
        if self.status == OPTIMAL and self.trajectory is None:
            raise InvariantError("Optimal solution requires a trajectory")
        object.__setattr__(self, "asl", check_tokens(self.asl))
        if self.status == OPTIMAL and self.asl:
            if self.asl[0] not in ARC_TOKENS or self.asl[-1] not in ARC_TOKENS:
                raise InvariantError("Asl must start and end with an arc token")

    @property
    def tf(self) -> float:
        return self.trajectory.tf if self.trajectory is not None else math.inf


# --- JSON layer ------------------------------------------------------------
#
# instance: {order, x0, xf, limits: {umin, umax, lo: [...], hi: [...]}}
#   with absent or null bound entries meaning unbounded;
# solution: {status, tf, asl, segments: [{u, dt, label}], x0}
#   (x0 is carried so a solution file can be sampled standalone).


def _bound_to_json(v):
    return None if math.isinf(v) else v


def _bound_from_json(v, side):
    if v is None:
        return -math.inf if side == "lo" else math.inf
    return float(v)


def limits_to_dict(limits: Limits, order: int = 3) -> dict:
    return {
        "umin": limits.umin,
        "umax": limits.umax,
        "lo": [_bound_to_json(v) for v in limits.lo[:order]],
        "hi": [_bound_to_json(v) for v in limits.hi[:order]],
    }


def limits_from_dict(d: dict) -> Limits:
    lo = list(d.get("lo") or [])
    hi = list(d.get("hi") or [])
    lo += [None] * (3 - len(lo))
    hi += [None] * (3 - len(hi))
    return Limits(
        umin=float(d["umin"]),
        umax=float(d["umax"]),
        lo=tuple(_bound_from_json(v, "lo") for v in lo[:3]),
        hi=tuple(_bound_from_json(v, "hi") for v in hi[:3]),
    )


def instance_to_dict(p: ProblemInstance) -> dict:
    return {
        "order": p.order,
        "x0": list(p.x0.astuple()),
        "xf": list(p.xf.astuple()),
        "limits": limits_to_dict(p.limits, p.order),
    }


def instance_from_dict(d: dict) -> ProblemInstance:
    order = int(d["order"])
    return ProblemInstance(
        order=order,
        x0=make_state(d["x0"]),
        xf=make_state(d["xf"]),
        limits=limits_from_dict(d["limits"]),
    )


def solution_to_dict(sol: Solution) -> dict:
    out = {"status": sol.status, "tf": sol.tf if sol.status == OPTIMAL else None,
           "asl": list(sol.asl), "segments": []}
    if sol.trajectory is not None:
        out["x0"] = list(sol.trajectory.x0.astuple())
        out["segments"] = [
            {"u": s.u, "dt": s.dt, "label": s.label} for s in sol.trajectory.segments
        ]
    return out


def solution_from_dict(d: dict) -> Solution:
    status = d["status"]
    if status == INFEASIBLE:
        return Solution(status=INFEASIBLE)
    segments = tuple(Segment(s["u"], s["dt"], s["label"]) for s in d["segments"])
    asl = tuple(d.get("asl") or ())
    markers = _markers_from_asl(asl)
    traj = Trajectory(x0=make_state(d["x0"]), segments=segments, markers=markers)
    return Solution(status=OPTIMAL, trajectory=traj, asl=asl)


def _markers_from_asl(asl) -> tuple[tuple[int, str], ...]:
    markers = []
    seg_index = 0
    for tok in asl:
        if tok in MARKER_TOKENS:
            markers.append((seg_index, tok))
        else:
            seg_index += 1
    return tuple(markers)
