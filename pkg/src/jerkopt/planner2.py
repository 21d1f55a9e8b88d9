"""Time-optimal planner for the double integrator under box constraints.

States are (x1, x2) = (acceleration-like, velocity-like), the control is
the jerk-like input bounded in [umin, umax], x1 is box-bounded by lo[1],
hi[1] and x2 by lo[2], hi[2]. The optimal control is bang-bang with at most
one constrained hold at an x1 bound, so every candidate profile is closed
form; x2 bounds restrict feasibility but are never ridden.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import (
    INFEASIBLE,
    OPTIMAL,
    InvariantError,
    Limits,
    Segment,
    Solution,
    State2,
    TOL_MEMBER,
    TIME_SNAP,
    Trajectory,
)

_DUR_TRIM = 1e-12


def _scale2(z, f):
    return max(1.0, abs(z[0]), abs(z[1]), abs(f[0]), abs(f[1]))


def _x2_window_ok(x1a, x1b, x2a, u, lo2, hi2, tol):
    """x2 range over one ramp from accel x1a to x1b entered at velocity x2a.

    x2 is monotone in x1's sign regions; its extremum sits at the x1 = 0
    crossing when the ramp spans it.
    """
    x2b = x2a + (x1b * x1b - x1a * x1a) / (2.0 * u)
    m_lo = min(x2a, x2b)
    m_hi = max(x2a, x2b)
    if (x1a < 0.0 < x1b) or (x1b < 0.0 < x1a):
        xc = x2a - x1a * x1a / (2.0 * u)
        m_lo = min(m_lo, xc)
        m_hi = max(m_hi, xc)
    return m_lo >= lo2 - tol and m_hi <= hi2 + tol


def _hold_ok(x2a, level, dur, lo2, hi2, tol):
    x2b = x2a + level * dur
    return min(x2a, x2b) >= lo2 - tol and max(x2a, x2b) <= hi2 + tol


def bbs_candidates(x0, xf, limits: Limits, tol=1e-9):
    """All feasible bang-bang(-singular) profiles connecting the states.

    Returns (tokens, durations, accel_nodes) triples sorted by total
    duration; both roots of each two-arc family are kept, plus the
    one-hold variants, so the result is the complete BBS control set used
    by the relative-direction parity rule.
    """
    z1, z2 = x0[0], x0[1]
    f1, f2 = xf[0], xf[1]
    up, um = limits.umax, limits.umin
    H1, L1 = limits.hi[0], limits.lo[0]
    lo2, hi2 = limits.lo[1], limits.hi[1]
    scale = _scale2(x0, xf)
    stol = tol * scale
    out = []

    def push(tokens, durs, nodes):
        snapped = []
        for d in durs:
            if d < -TIME_SNAP * max(1.0, scale):
                return
            snapped.append(max(d, 0.0))
        # x2 feasibility along the profile.
        x2 = z2
        for i, tok in enumerate(tokens):
            if tok[0] == "0":
                u = up if tok == "0+" else um
                if not _x2_window_ok(nodes[i], nodes[i + 1], x2, u, lo2, hi2, stol):
                    return
                x2 += (nodes[i + 1] ** 2 - nodes[i] ** 2) / (2.0 * u)
            else:
                if not _hold_ok(x2, nodes[i], snapped[i], lo2, hi2, stol):
                    return
                x2 += nodes[i] * snapped[i]
        if abs(x2 - f2) > 1e-7 * scale:
            return
        out.append((tuple(tokens), tuple(snapped), tuple(nodes)))

    # Up-down family: peak q with z1 <= q >= f1.
    D = 1.0 / (2.0 * up) - 1.0 / (2.0 * um)
    K = (f2 - z2 + (z1 * z1) / (2.0 * up) - (f1 * f1) / (2.0 * um)) / D
    if K >= 0.0:
        r = math.sqrt(K)
        for q in (r, -r):
            if q >= z1 - stol and q >= f1 - stol and q <= H1 + stol:
                qq = min(q, H1)
                push(("0+", "0-"), ((qq - z1) / up, (f1 - qq) / um), (z1, qq, f1))
            if q == -r and r == 0.0:
                break
    # Up-hold-down: peak pinned at hi[1].
    if math.isfinite(H1) and H1 >= z1 - stol and H1 >= f1 - stol:
        m = (f2 - z2 - (H1 * H1 - z1 * z1) / (2.0 * up)
             - (f1 * f1 - H1 * H1) / (2.0 * um)) / H1
        push(("0+", "1+", "0-"), ((H1 - z1) / up, m, (f1 - H1) / um),
             (z1, H1, H1, f1))

    # Down-up family: valley p with z1 >= p <= f1.
    Dm = -D
    Km = (f2 - z2 + (z1 * z1) / (2.0 * um) - (f1 * f1) / (2.0 * up)) / Dm
    if Km >= 0.0:
        r = math.sqrt(Km)
        for p in (-r, r):
            if p <= z1 + stol and p <= f1 + stol and p >= L1 - stol:
                pp = max(p, L1)
                push(("0-", "0+"), ((pp - z1) / um, (f1 - pp) / up), (z1, pp, f1))
            if p == r and r == 0.0:
                break
    # Down-hold-up: valley pinned at lo[1].
    if math.isfinite(L1) and L1 <= z1 + stol and L1 <= f1 + stol:
        m = (f2 - z2 - (L1 * L1 - z1 * z1) / (2.0 * um)
             - (f1 * f1 - L1 * L1) / (2.0 * up)) / L1
        push(("0-", "1-", "0+"), ((L1 - z1) / um, m, (f1 - L1) / up),
             (z1, L1, L1, f1))

    # Deduplicate profiles that coincide (e.g. peak exactly at the bound).
    out.sort(key=lambda c: sum(c[1]))
    dedup = []
    for cand in out:
        total = sum(cand[1])
        dup = False
        for kept in dedup:
            if abs(sum(kept[1]) - total) < 1e-8 * max(1.0, total):
                a = _control_signature(kept, limits)
                b = _control_signature(cand, limits)
                if a == b:
                    dup = True
                    break
        if not dup:
            dedup.append(cand)
    return dedup


def _control_signature(cand, limits):
    tokens, durs, _ = cand
    sig = []
    for tok, d in zip(tokens, durs):
        if d > 1e-9:
            u = limits.umax if tok == "0+" else limits.umin if tok == "0-" else 0.0
            sig.append((round(u, 12), round(d, 6)))
    return tuple(sig)


def all_bbs_controls(x0, xf, limits: Limits):
    """Every feasible BBS control as (asl_tokens, durations); |result| is
    0, 1 or 3 away from degenerate boundaries."""
    cands = bbs_candidates(tuple(x0), tuple(xf), limits)
    return [(c[0], c[1]) for c in cands]


def _trim_profile(tokens, durs, scale):
    keep_t, keep_d = [], []
    for tok, d in zip(tokens, durs):
        if d > _DUR_TRIM * max(1.0, scale):
            if keep_t and keep_t[-1] == tok:
                keep_d[-1] += d
            else:
                keep_t.append(tok)
                keep_d.append(d)
    return keep_t, keep_d


def _profile_to_solution(x0, tokens, durs, limits, scale):
    tokens, durs = _trim_profile(tokens, durs, scale)
    segs = []
    for tok, d in zip(tokens, durs):
        u = limits.umax if tok == "0+" else limits.umin if tok == "0-" else 0.0
        segs.append(Segment(u=u, dt=d, label=tok))
    traj = Trajectory(x0=State2(*x0), segments=tuple(segs))
    return Solution(status=OPTIMAL, trajectory=traj, asl=traj.asl())


def solve2(x0, xf, limits: Limits) -> Solution:
    """Time-optimal double-integrator solution, or Infeasible."""
    x0 = tuple(x0) if not isinstance(x0, State2) else x0.astuple()
    xf = tuple(xf) if not isinstance(xf, State2) else xf.astuple()
    if not (limits.contains(x0) and limits.contains(xf)):
        return Solution(status=INFEASIBLE)
    scale = _scale2(x0, xf)
    if max(abs(a - b) for a, b in zip(x0, xf)) <= 1e-13 * scale:
        traj = Trajectory(x0=State2(*x0), segments=())
        return Solution(status=OPTIMAL, trajectory=traj, asl=())
    cands = bbs_candidates(x0, xf, limits)
    if not cands:
        return Solution(status=INFEASIBLE)
    tokens, durs, _ = cands[0]
    return _profile_to_solution(x0, tokens, durs, limits, scale)


# --- Switching curves and the closed-loop law --------------------------------


@dataclass(frozen=True)
class Manifold2:
    """Switching curves of a fixed 2nd-order terminal state.

    Provides membership tests for the single-ramp curves and the
    hold-then-ramp curves, and the height of the composite ramp curve used
    by the region classification.
    """

    xf: State2
    limits: Limits

    def curve_x2(self, x1: float) -> float:
        """x2 on the composite single-ramp curve above accel x1."""
        f1, f2 = self.xf.x1, self.xf.x2
        u = self.limits.umax if x1 <= f1 else self.limits.umin
        return f2 + (x1 * x1 - f1 * f1) / (2.0 * u)

    def on_ramp_curve(self, x, tol=TOL_MEMBER):
        """Arc token if x lies on the 0+ or 0- curve (reaching xf forward)."""
        f1 = self.xf.x1
        scale = _scale2(x, self.xf.astuple())
        if abs(x[1] - self.curve_x2(x[0])) > tol * scale:
            return None
        return "0+" if x[0] <= f1 + tol * scale else "0-"

    def on_hold_curve(self, x, tol=TOL_MEMBER):
        """Arc token if x lies on the 1-0+ or 1+0- curve."""
        f1, f2 = self.xf.x1, self.xf.x2
        lim = self.limits
        scale = _scale2(x, self.xf.astuple())
        L1, H1 = lim.lo[0], lim.hi[0]
        if math.isfinite(L1) and abs(x[0] - L1) <= tol * scale:
            left = f2 + (L1 * L1 - f1 * f1) / (2.0 * lim.umax)
            if left + tol * scale < x[1] <= lim.hi[1] + tol * scale:
                return "1-"
        if math.isfinite(H1) and abs(x[0] - H1) <= tol * scale:
            right = f2 + (H1 * H1 - f1 * f1) / (2.0 * lim.umin)
            if lim.lo[1] - tol * scale <= x[1] < right - tol * scale:
                return "1+"
        return None


def control2(x, manifold: Manifold2) -> float:
    """Closed-loop time-optimal control for the double integrator.

    States within membership tolerance of a switching curve take the
    curve's control (ties resolve onto the curve, never the bang value).
    """
    lim = manifold.limits
    if not lim.contains(tuple(x), 1e-9):
        raise InvariantError("state outside the admissible box")
    tok = manifold.on_ramp_curve(x)
    if tok == "0+":
        return lim.umax
    if tok == "0-":
        return lim.umin
    if manifold.on_hold_curve(x) is not None:
        return 0.0
    if x[1] > manifold.curve_x2(x[0]):
        return lim.umin
    return lim.umax
