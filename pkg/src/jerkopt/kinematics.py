"""Exact constant-control flow of the integrator chain and trajectory tools.

Everything here is closed form: no ODE integration anywhere. Feasibility is
decided from per-segment polynomial extrema so checker resolution never eats
into the acceptance tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import (
    InvariantError,
    Limits,
    NEGATE_TOKEN,
    ProblemInstance,
    Segment,
    State2,
    State3,
    Trajectory,
    make_state,
)


def phi(x, u: float, t: float):
    """Flow of (x1' = u, x2' = x1, x3' = x2) from state x over signed time t.

    Accepts 2- or 3-component states; returns a plain tuple of the same
    length. Exact polynomial evaluation, valid for negative t (backward
    integration).
    """
    if len(x) == 2:
        x1, x2 = x
        return (x1 + u * t, x2 + t * (x1 + 0.5 * u * t))
    x1, x2, x3 = x
    return (
        x1 + u * t,
        x2 + t * (x1 + 0.5 * u * t),
        x3 + t * (x2 + t * (0.5 * x1 + u * t / 6.0)),
    )


def rollout(x0, segments) -> Trajectory:
    """Fold phi over (u, dt[, label]) specs or Segment objects."""
    segs = []
    for spec in segments:
        if isinstance(spec, Segment):
            segs.append(spec)
            continue
        if len(spec) == 3:
            u, dt, label = spec
        else:
            u, dt = spec
            label = "0+" if u >= 0 else "0-"
        if dt < 0:
            raise InvariantError(f"segment duration must be >= 0, got {dt}")
        segs.append(Segment(u=float(u), dt=float(dt), label=label))
    x0 = x0 if isinstance(x0, (State2, State3)) else make_state(x0)
    return Trajectory(x0=x0, segments=tuple(segs))


def eval_at(traj: Trajectory, t: float):
    """State at absolute time t in [0, tf]; continuous across breakpoints."""
    tf = traj.tf
    if t < -1e-12 or t > tf + 1e-12:
        raise ValueError(f"t = {t} outside [0, {tf}]")
    t = min(max(t, 0.0), tf)
    times = traj.times
    # Linear scan: segment counts are tiny (<= ~16).
    for i, seg in enumerate(traj.segments):
        if t <= times[i + 1] or i == len(traj.segments) - 1:
            return phi(traj.breakpoints[i], seg.u, t - times[i])
    return traj.breakpoints[0] if not traj.segments else traj.breakpoints[-1]


def _quad_roots_in(a, b, c, lo, hi):
    """Real roots of a t^2 + b t + c in [lo, hi]."""
    out = []
    if a == 0.0:
        if b != 0.0:
            r = -c / b
            if lo <= r <= hi:
                out.append(r)
        return out
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return out
    s = math.sqrt(disc)
    # Numerically stable split.
    q = -0.5 * (b + math.copysign(s, b)) if b != 0.0 else 0.5 * s
    cands = {q / a}
    if q != 0.0:
        cands.add(c / q)
    else:
        cands.add(0.0)
    for r in cands:
        if lo <= r <= hi:
            out.append(r)
    return out


def segment_extrema(x_at_entry, u: float, dt: float):
    """Per-component (min, max) over [0, dt] for a constant-control segment.

    Exact: x1 is linear, x2 quadratic, x3 cubic in local time; extrema come
    from the roots of the derivative polynomials clipped to [0, dt].
    """
    lo, hi, _, _ = _segment_extrema_times(x_at_entry, u, dt)
    return tuple(zip(lo, hi))


def _segment_extrema_times(x, u, dt):
    """Extrema with their local times: (mins, maxs, argmins, argmaxs)."""
    order = len(x)
    x1 = x[0]
    x2 = x[1]
    mins, maxs, tmins, tmaxs = [], [], [], []

    def scan(values):
        lo_v, hi_v = math.inf, -math.inf
        lo_t = hi_t = 0.0
        for tv, v in values:
            if v < lo_v:
                lo_v, lo_t = v, tv
            if v > hi_v:
                hi_v, hi_t = v, tv
        mins.append(lo_v)
        maxs.append(hi_v)
        tmins.append(lo_t)
        tmaxs.append(hi_t)

    # x1(t) = x1 + u t: monotone.
    scan([(0.0, x1), (dt, x1 + u * dt)])

    # x2(t): derivative x1 + u t.
    cands = [0.0, dt]
    if u != 0.0:
        tc = -x1 / u
        if 0.0 < tc < dt:
            cands.append(tc)
    scan([(tv, x2 + tv * (x1 + 0.5 * u * tv)) for tv in cands])

    if order == 3:
        x3 = x[2]
        cands = [0.0, dt]
        cands.extend(_quad_roots_in(0.5 * u, x1, x2, 0.0, dt))
        scan([(tv, x3 + tv * (x2 + tv * (0.5 * x1 + u * tv / 6.0))) for tv in cands])

    return mins, maxs, tmins, tmaxs


@dataclass(frozen=True, slots=True)
class FeasibilityReport:
    feasible: bool
    worst_violation: dict
    violating_times: tuple


def check_feasible(traj: Trajectory, limits: Limits, tol: float = 1e-9) -> FeasibilityReport:
    """Exact box-constraint check of a trajectory.

    Exceedances are absolute; feasible iff every finite bound's exceedance
    is <= tol, control included.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    worst = {}
    violations = []

    def record(cid, exceed, seg_idx, t_local):
        if exceed > worst.get(cid, 0.0):
            worst[cid] = exceed
        if exceed > tol:
            violations.append((seg_idx, t_local, cid))

    order = traj.order
    for i, seg in enumerate(traj.segments):
        record("u_max", seg.u - limits.umax, i, 0.0)
        record("u_min", limits.umin - seg.u, i, 0.0)
        mins, maxs, tmins, tmaxs = _segment_extrema_times(traj.breakpoints[i], seg.u, seg.dt)
        for k in range(order):
            hi = limits.hi[k]
            lo = limits.lo[k]
            if math.isfinite(hi):
                record(f"x{k + 1}_max", maxs[k] - hi, i, tmaxs[k])
            if math.isfinite(lo):
                record(f"x{k + 1}_min", lo - mins[k], i, tmins[k])
    feasible = all(v <= tol for v in worst.values())
    return FeasibilityReport(feasible=feasible, worst_violation=worst,
                             violating_times=tuple(violations))


def negate(p: ProblemInstance) -> ProblemInstance:
    """Mirror the problem through the origin; an involution.

    Solutions map by pointwise negation with equal tf, and Asl tokens map
    sign-wise (0+ <-> 0-, k+ <-> k-, T+ <-> T-).
    """
    lim = p.limits
    neg_limits = Limits(
        umin=-lim.umax,
        umax=-lim.umin,
        lo=tuple(-v for v in lim.hi),
        hi=tuple(-v for v in lim.lo),
    )
    return ProblemInstance(
        order=p.order,
        x0=make_state(tuple(-v for v in p.x0)),
        xf=make_state(tuple(-v for v in p.xf)),
        limits=neg_limits,
    )


def negate_trajectory(traj: Trajectory) -> Trajectory:
    segs = tuple(
        Segment(u=-s.u, dt=s.dt, label=NEGATE_TOKEN[s.label]) for s in traj.segments
    )
    markers = tuple((i, NEGATE_TOKEN[tok]) for i, tok in traj.markers)
    return Trajectory(
        x0=make_state(tuple(-v for v in traj.x0)), segments=segs, markers=markers
    )


def negate_tokens(tokens):
    return tuple(NEGATE_TOKEN[t] for t in tokens)


def scale(p: ProblemInstance, sigma: float, alpha: float) -> ProblemInstance:
    """Time dilation by sigma and amplitude scaling by alpha.

    Maps x1 -> alpha x1 / sigma^2, x2 -> alpha x2 / sigma, x3 -> alpha x3
    (bounds likewise, u by alpha / sigma^3); the optimal tf scales by sigma
    and the Asl is unchanged.
    """
    if not (sigma > 0 and alpha > 0):
        raise InvariantError("scale factors must be positive")
    f = (alpha / sigma**2, alpha / sigma, alpha)

    def sc_state(st):
        return make_state(tuple(f[k] * v for k, v in enumerate(st)))

    fu = alpha / sigma**3
    lim = p.limits
    return ProblemInstance(
        order=p.order,
        x0=sc_state(p.x0),
        xf=sc_state(p.xf),
        limits=Limits(
            umin=fu * lim.umin,
            umax=fu * lim.umax,
            lo=tuple(f[k] * lim.lo[k] for k in range(3)),
            hi=tuple(f[k] * lim.hi[k] for k in range(3)),
        ),
    )
