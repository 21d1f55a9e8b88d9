"""Time-optimal planner for the triple integrator under full box constraints.

Solves in three layers: a parity rule decides which side of the composite
switching surface the start state lies on; the position-unconstrained
solver rides the max-velocity line or splices a descent family onto the
climb profile; the full solver inserts tangent touches of the position
bounds and recurses on the remaining subproblem.
"""

from __future__ import annotations

import math

from .core import (
    INFEASIBLE,
    OPTIMAL,
    Limits,
    MARKER_TOKENS,
    Segment,
    Solution,
    State3,
    TIME_SNAP,
    Trajectory,
)
from .kinematics import check_feasible, negate_tokens, phi
from .planner2 import bbs_candidates, solve2
from .rootfind import ConnectionTemplate, solve_connection

HIGHER = "Higher"
LOWER = "Lower"
_DUR_TRIM = 1e-12
_MAX_TANGENT_DEPTH = 8

_T_UVU = ConnectionTemplate(("0+", "0-", "0+"))
_T_UVLU = ConnectionTemplate(("0+", "0-", "1-", "0+"))
_T_HVU = ConnectionTemplate(("1+", "0-", "0+"))
_T_HVLU = ConnectionTemplate(("1+", "0-", "1-", "0+"))
_T_VU = ConnectionTemplate(("0-", "0+"))
_T_VLU = ConnectionTemplate(("0-", "1-", "0+"))
_TAN_IN = {
    "T-": (ConnectionTemplate(("0+", "0-"), mode="tangent-in"),
           ConnectionTemplate(("0+", "1+", "0-"), mode="tangent-in")),
    "T+": (ConnectionTemplate(("0-", "0+"), mode="tangent-in"),
           ConnectionTemplate(("0-", "1-", "0+"), mode="tangent-in")),
}
_TAN_OUT = {
    "T-": (ConnectionTemplate(("0+", "0-"), mode="tangent-out"),
           ConnectionTemplate(("0+", "1+", "0-"), mode="tangent-out")),
    "T+": (ConnectionTemplate(("0-", "0+"), mode="tangent-out"),
           ConnectionTemplate(("0-", "1-", "0+"), mode="tangent-out")),
}


def _scale3(*states):
    s = 1.0
    for st in states:
        for v in st:
            a = abs(v)
            if a > s:
                s = a
    return s


def _nopos_limits(limits: Limits) -> Limits:
    if math.isinf(limits.lo[2]) and math.isinf(limits.hi[2]):
        return limits
    return Limits(umin=limits.umin, umax=limits.umax,
                  lo=(limits.lo[0], limits.lo[1], -math.inf),
                  hi=(limits.hi[0], limits.hi[1], math.inf))


def _mirror_limits(limits: Limits) -> Limits:
    return Limits(umin=-limits.umax, umax=-limits.umin,
                  lo=tuple(-v for v in limits.hi),
                  hi=tuple(-v for v in limits.lo))


def _u_of(token, limits):
    if token == "0+":
        return limits.umax
    if token == "0-":
        return limits.umin
    return 0.0


def _lift_terminal_x3(x, tokens, durs, limits):
    """Terminal 3-state after following a 2nd-order profile from 3-state x."""
    st = tuple(x)
    for tok, d in zip(tokens, durs):
        st = phi(st, _u_of(tok, limits), d)
    return st


def relative_direction(x0, xf, limits: Limits) -> str:
    """Parity rule: side of the composite switching surface, or Infeasible.

    Enumerates every feasible 2nd-order BBS control between the state
    projections, integrates each through the position component, and counts
    arrivals at or above the target position; odd means Higher.
    """
    x0 = tuple(x0)
    xf = tuple(xf)
    scale = _scale3(x0, xf)
    if max(abs(a - b) for a, b in zip(x0, xf)) <= 1e-13 * scale:
        return LOWER
    cands = bbs_candidates(x0[:2], xf[:2], limits)
    if not cands:
        return INFEASIBLE
    count = 0
    tie = 1e-12 * scale
    for tokens, durs, _nodes in cands:
        end = _lift_terminal_x3(x0, tokens, durs, limits)
        if end[2] >= xf[2] - tie:
            count += 1
    return HIGHER if count % 2 == 1 else LOWER


def _segments_from(tokens, durs, limits, scale):
    """Build trimmed segments, merging equal-control neighbours."""
    segs = []
    for tok, d in zip(tokens, durs):
        if d <= _DUR_TRIM * max(1.0, scale):
            continue
        u = _u_of(tok, limits)
        if segs and segs[-1].label == tok:
            segs[-1] = Segment(u=u, dt=segs[-1].dt + d, label=tok)
        else:
            segs.append(Segment(u=u, dt=d, label=tok))
    return segs


def _make_solution(x0, segs, markers=()):
    traj = Trajectory(x0=State3(*x0), segments=tuple(segs), markers=tuple(markers))
    return Solution(status=OPTIMAL, trajectory=traj, asl=traj.asl())


def _candidate_ok(x0, tokens, durs, xf, limits, scale):
    st = tuple(x0)
    for tok, d in zip(tokens, durs):
        st = phi(st, _u_of(tok, limits), d)
    if max(abs(a - b) for a, b in zip(st, xf)) > 1e-8 * scale:
        return False
    segs = _segments_from(tokens, durs, limits, scale)
    traj = Trajectory(x0=State3(*x0), segments=tuple(segs))
    return check_feasible(traj, limits, tol=1e-9 * max(1.0, scale)).feasible


def solve3_no_position(x0, xf, limits: Limits, _mirrored=False) -> Solution:
    """Position-unconstrained 3rd-order solve (position bounds ignored)."""
    x0 = tuple(x0)
    xf = tuple(xf)
    limits = _nopos_limits(limits)
    scale = _scale3(x0, xf)
    if max(abs(a - b) for a, b in zip(x0, xf)) <= 1e-13 * scale:
        return _make_solution(x0, ())

    direction = relative_direction(x0, xf, limits)
    if direction == INFEASIBLE:
        return Solution(status=INFEASIBLE)
    if direction == HIGHER and not _mirrored:
        mirrored = solve3_no_position(tuple(-v for v in x0), tuple(-v for v in xf),
                                      _mirror_limits(limits), _mirrored=True)
        return _unmirror(mirrored)

    hi2 = limits.hi[1]
    candidates = []

    if math.isfinite(hi2):
        up_sol = solve2(x0[:2], (0.0, hi2), limits)
        down_sol = solve2((0.0, hi2), xf[:2], limits)
        if up_sol.status == OPTIMAL and down_sol.status == OPTIMAL:
            up_tokens = [s.label for s in up_sol.trajectory.segments]
            up_durs = [s.dt for s in up_sol.trajectory.segments]
            down_tokens = [s.label for s in down_sol.trajectory.segments]
            down_durs = [s.dt for s in down_sol.trajectory.segments]
            arrival = _lift_terminal_x3(x0, up_tokens, up_durs, limits)
            ddown = _lift_terminal_x3((0.0, hi2, 0.0), down_tokens, down_durs, limits)
            required = xf[2] - ddown[2]
            gap = required - arrival[2]
            if gap >= -1e-11 * max(1.0, scale):
                cruise = max(gap, 0.0) / hi2
                tokens = tuple(up_tokens) + ("2+",) + tuple(down_tokens)
                durs = tuple(up_durs) + (cruise,) + tuple(down_durs)
                candidates.append((tokens, durs))
            else:
                cand = _bracket_connect(x0, xf, limits, up_tokens, up_durs, scale)
                candidates.extend(cand)

    if not candidates:
        candidates.extend(_enumerate_templates(x0, xf, limits))

    best = None
    for tokens, durs in candidates:
        total = sum(durs)
        if best is not None and total >= best[0] - 1e-12:
            continue
        if _candidate_ok(x0, tokens, durs, xf, limits, scale):
            best = (total, tokens, durs)
    if best is None:
        for tokens, durs in _enumerate_templates(x0, xf, limits):
            total = sum(durs)
            if best is not None and total >= best[0] - 1e-12:
                continue
            if _candidate_ok(x0, tokens, durs, xf, limits, scale):
                best = (total, tokens, durs)
    if best is None:
        return Solution(status=INFEASIBLE)
    _, tokens, durs = best
    return _make_solution(x0, _segments_from(tokens, durs, limits, scale))


def _unmirror(sol: Solution) -> Solution:
    if sol.status != OPTIMAL:
        return sol
    traj = sol.trajectory
    segs = tuple(Segment(u=-s.u, dt=s.dt,
                         label=negate_tokens((s.label,))[0]) for s in traj.segments)
    markers = tuple((i, negate_tokens((t,))[0]) for i, t in traj.markers)
    x0 = tuple(-v for v in traj.x0)
    return _make_solution(x0, segs, markers)


def _bracket_connect(x0, xf, limits, up_tokens, up_durs, scale):
    """Find the climb arc whose ends straddle the target and splice on a
    descent family from the bracket's lower end."""
    # Breakpoint states along the climb.
    states = [tuple(x0)]
    for tok, d in zip(up_tokens, up_durs):
        states.append(phi(states[-1], _u_of(tok, limits), d))
    dirs = []
    for st in states:
        dirs.append(relative_direction(st, xf, limits))
    k = None
    for i in range(len(up_tokens)):
        if dirs[i] == LOWER and dirs[i + 1] in (HIGHER, INFEASIBLE):
            k = i
            break
    out = []
    if k is None:
        return out
    prefix_tokens = tuple(up_tokens[:k])
    prefix_durs = tuple(up_durs[:k])
    z = states[k]
    r1 = up_tokens[k]
    if r1 == "0+":
        templates = (_T_UVU, _T_UVLU)
    elif r1 == "1+":
        templates = (_T_HVU, _T_HVLU)
    else:
        # Crossing at the final brake arc boundary: the bracket start lies on
        # the descent surface itself.
        templates = (_T_VU, _T_VLU)
    for tmpl in templates:
        try:
            sols = solve_connection(tmpl, z, xf, limits)
        except Exception:
            continue
        for durs in sols:
            out.append((prefix_tokens + tmpl.tokens, prefix_durs + tuple(durs)))
    return out


def _enumerate_templates(x0, xf, limits):
    """All descent/climb families from x0 directly; the completeness net
    when the max-velocity line is unbounded or the bracket degenerates."""
    out = []
    for tmpl in (_T_UVU, _T_UVLU, _T_VU, _T_VLU):
        try:
            sols = solve_connection(tmpl, x0, xf, limits)
        except Exception:
            continue
        for durs in sols:
            out.append((tmpl.tokens, tuple(durs)))
    H1 = limits.hi[0]
    if math.isfinite(H1):
        s0 = (H1 - x0[0]) / limits.umax
        if s0 >= -TIME_SNAP:
            s0 = max(s0, 0.0)
            w = phi(x0, limits.umax, s0)
            for tmpl in (_T_HVU, _T_HVLU):
                try:
                    sols = solve_connection(tmpl, w, xf, limits)
                except Exception:
                    continue
                for durs in sols:
                    out.append((("0+",) + tmpl.tokens, (s0,) + tuple(durs)))
    return out


# --- Full solver with position bounds -----------------------------------------


def solve3_full(x0, xf, limits: Limits) -> Solution:
    """3rd-order solve honoring position bounds via tangent insertions."""
    x0 = tuple(x0)
    xf = tuple(xf)
    return _solve_full(x0, xf, limits, 0)


def _solve_full(x0, xf, limits, depth):
    scale = _scale3(x0, xf)
    base = solve3_no_position(x0, xf, limits)
    if base.status != OPTIMAL:
        return base
    if math.isinf(limits.lo[2]) and math.isinf(limits.hi[2]):
        return base
    report = check_feasible(base.trajectory, limits, tol=1e-9 * max(1.0, scale))
    if report.feasible:
        return base
    if depth >= _MAX_TANGENT_DEPTH:
        return Solution(status=INFEASIBLE)

    marker, t_violation = _first_position_violation(base.trajectory, report)
    if marker is None:
        return Solution(status=INFEASIBLE)
    level = limits.lo[2] if marker == "T-" else limits.hi[2]

    sides = ("x0", "xf") if t_violation <= 0.5 * base.tf else ("xf", "x0")
    best = None
    for side in sides:
        sol = _tangent_side(side, x0, xf, limits, marker, level, depth, scale)
        if sol is not None and (best is None or sol.tf < best.tf - 1e-12):
            best = sol
        if best is not None:
            break
    return best if best is not None else Solution(status=INFEASIBLE)


def _first_position_violation(traj, report):
    """Marker token and absolute time of the earliest position violation."""
    first = None
    for seg_idx, t_local, cid in report.violating_times:
        if cid not in ("x3_min", "x3_max"):
            continue
        t_abs = traj.times[seg_idx] + t_local
        if first is None or t_abs < first[1]:
            first = ("T-" if cid == "x3_min" else "T+", t_abs)
    if first is None:
        return None, 0.0
    return first


def _tangent_side(side, x0, xf, limits, marker, level, depth, scale):
    """Fix a tangent point by connecting one boundary side to the position
    plane with a 2nd-order family, then recurse on the remainder."""
    results = []
    if side == "x0":
        for tmpl in _TAN_IN[marker]:
            try:
                cands = solve_connection(tmpl, x0, None, limits, plane_level=level)
            except Exception:
                continue
            for durs, tangent in cands:
                segs = _segments_from(tmpl.tokens, durs, limits, scale)
                block = Trajectory(x0=State3(*x0), segments=tuple(segs))
                if not check_feasible(block, limits, tol=1e-9 * max(1.0, scale)).feasible:
                    continue
                rest = _solve_full(tangent, xf, limits, depth + 1)
                if rest.status != OPTIMAL:
                    continue
                sol = _assemble(x0, segs, marker, rest, prefix_first=True, limits=limits,
                                xf=xf, scale=scale)
                if sol is not None:
                    results.append(sol)
    else:
        for tmpl in _TAN_OUT[marker]:
            try:
                cands = solve_connection(tmpl, None, xf, limits, plane_level=level)
            except Exception:
                continue
            for durs, tangent in cands:
                segs = _segments_from(tmpl.tokens, durs, limits, scale)
                block = Trajectory(x0=State3(*tangent), segments=tuple(segs))
                if not check_feasible(block, limits, tol=1e-9 * max(1.0, scale)).feasible:
                    continue
                rest = _solve_full(x0, tangent, limits, depth + 1)
                if rest.status != OPTIMAL:
                    continue
                sol = _assemble(x0, segs, marker, rest, prefix_first=False, limits=limits,
                                xf=xf, scale=scale)
                if sol is not None:
                    results.append(sol)
    if not results:
        return None
    results.sort(key=lambda s: s.tf)
    return results[0]


def _assemble(x0, block_segs, marker, rest, prefix_first, limits, xf, scale):
    rest_traj = rest.trajectory
    if prefix_first:
        segs = list(block_segs) + list(rest_traj.segments)
        m_idx = len(block_segs)
        markers = [(m_idx, marker)]
        markers += [(i + m_idx, t) for i, t in rest_traj.markers]
    else:
        segs = list(rest_traj.segments) + list(block_segs)
        m_idx = len(rest_traj.segments)
        markers = [(i, t) for i, t in rest_traj.markers]
        markers += [(m_idx, marker)]
    # A tangent marker at the very boundary of the horizon is a degenerate
    # annotation; drop it rather than emit an Asl framed by markers.
    markers = [(i, t) for i, t in markers if 0 < i < len(segs)]
    markers.sort()
    sol = _make_solution(x0, segs, markers)
    end = sol.trajectory.endpoint
    if max(abs(a - b) for a, b in zip(end, xf)) > 1e-8 * max(1.0, scale):
        return None
    if not check_feasible(sol.trajectory, limits, tol=1e-9 * max(1.0, scale)).feasible:
        return None
    if not validate_asl(sol.asl):
        return None
    return sol


# --- Asl grammar ---------------------------------------------------------------

_A3_PLUS = (
    ("0+", "0-", "0+"),
    ("0+", "1+", "0-", "0+"),
    ("0+", "0-", "1-", "0+"),
    ("0+", "1+", "0-", "1-", "0+"),
    ("0+", "0-", "2+", "0-", "1-", "0+"),
    ("0+", "1+", "0-", "2+", "0-", "1-", "0+"),
)
_A3_MINUS = tuple(negate_tokens(p) for p in _A3_PLUS)
_A2_PLUS = (("0+", "0-"), ("0+", "1+", "0-"))
_A2_MINUS = tuple(negate_tokens(p) for p in _A2_PLUS)


def _embeds(block, patterns):
    """block is an order-preserving subsequence of one of the patterns."""
    for pat in patterns:
        i = 0
        for tok in block:
            while i < len(pat) and pat[i] != tok:
                i += 1
            if i == len(pat):
                break
            i += 1
        else:
            return True
    return False


def validate_asl(asl) -> bool:
    """Check a token sequence against the admissible switching-law grammar.

    Admissible sequences are a single climb/descent family, optionally
    flanked by alternating tangent markers with two-arc families between
    them; zero-duration padding arcs and empty flanks are allowed.
    """
    asl = tuple(asl)
    blocks = [[]]
    markers = []
    prev = None
    for tok in asl:
        if tok in MARKER_TOKENS:
            if prev == tok:
                return False
            markers.append(tok)
            blocks.append([])
            prev = tok
        elif tok in ("0+", "0-", "1+", "1-", "2+", "2-"):
            if blocks[-1] and blocks[-1][-1] == tok:
                return False
            blocks[-1].append(tok)
            prev = None
        else:
            return False
    for a, b in zip(markers, markers[1:]):
        if a == b:
            return False
    if not markers:
        return _embeds(blocks[0], _A3_PLUS) or _embeds(blocks[0], _A3_MINUS)

    n = len(blocks)
    for alpha in range(n):
        for a3, sign in ((_A3_PLUS, "+"), (_A3_MINUS, "-")):
            if not _embeds(blocks[alpha], a3):
                continue
            # Marker adjacent to the main block: before it T+ for a climb
            # family, T- for a descent family; after it the opposite.
            before = "T+" if sign == "+" else "T-"
            after = "T-" if sign == "+" else "T+"
            if alpha > 0 and markers[alpha - 1] != before:
                continue
            if alpha < n - 1 and markers[alpha] != after:
                continue
            ok = True
            for i in range(alpha):
                # Left flank: sign set by the marker to the block's right.
                fam = _A2_PLUS if markers[i] == "T-" else _A2_MINUS
                if not _embeds(blocks[i], fam):
                    ok = False
                    break
            if ok:
                for i in range(alpha + 1, n):
                    # Right flank: sign set by the marker to the block's left.
                    fam = _A2_PLUS if markers[i - 1] == "T-" else _A2_MINUS
                    if not _embeds(blocks[i], fam):
                        ok = False
                        break
            if ok:
                return True
    return False
