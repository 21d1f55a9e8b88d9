"""Real-root isolation for low-degree polynomials and arc-connection solving.

Polynomials are plain coefficient lists in ascending degree. Isolation uses
a Sturm chain (terminated at the numerical gcd, so multiple roots collapse
to their distinct values), bisection to a narrow bracket, and a damped
Newton polish. Everything is deterministic.

Connection systems: each arc-sequence template's boundary equations
eliminate to one univariate polynomial of degree <= 6 in a switch
acceleration (cross-checked symbolically in tools/check_reductions.py).
Rather than carrying the expanded coefficient formulas, the eliminated
polynomial is evaluated pointwise — for the two-free-switch templates as
the product of the boundary residual over both branches of the square-root
substitution, which is conjugate-symmetric and hence polynomial — and its
exact coefficients are recovered by interpolation at Chebyshev nodes.
Candidates are then polished by damped Newton on the full system.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .core import InvariantError, Limits, TIME_SNAP
from .kinematics import phi

_TRIM_REL = 1e-14
_BISECT_WIDTH = 1e-10


def poly_eval(coeffs, x):
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def poly_deriv(coeffs):
    return [k * c for k, c in enumerate(coeffs)][1:]


def trim(coeffs, rel=_TRIM_REL):
    """Drop near-zero leading coefficients (relative to the largest)."""
    scale = max((abs(c) for c in coeffs), default=0.0)
    if scale == 0.0:
        return []
    tol = rel * scale
    out = list(coeffs)
    while out and abs(out[-1]) <= tol:
        out.pop()
    return out


def _poly_rem(num, den):
    """Remainder of num / den (ascending coefficient lists)."""
    num = list(num)
    dn = len(den) - 1
    lead = den[-1]
    for k in range(len(num) - 1, dn - 1, -1):
        f = num[k] / lead
        if f != 0.0:
            for j in range(dn + 1):
                num[k - dn + j] -= f * den[j]
        num[k] = 0.0
    return num[:dn] if dn > 0 else []


def _sturm_chain(coeffs):
    """Sturm chain with positive rescaling; stops at the numerical gcd.

    Chain elements are rescaled to unit max-norm, so remainders below an
    absolute 1e-12 are gcd-level noise and terminate the chain (this is what
    collapses multiple roots to their distinct values).
    """
    chain = [coeffs]
    d = trim(poly_deriv(coeffs))
    if d:
        chain.append(d)
    while len(chain) >= 2 and len(chain[-1]) > 1:
        rem = [c if abs(c) > 1e-12 else 0.0 for c in _poly_rem(chain[-2], chain[-1])]
        rem = trim(rem, rel=1e-12)
        if not rem:
            break
        scale = max(abs(c) for c in rem)
        chain.append([-c / scale for c in rem])
    return chain


def _sign_changes(chain, x):
    count = 0
    prev = 0.0
    for poly in chain:
        v = poly_eval(poly, x)
        if v == 0.0:
            continue
        if prev != 0.0 and (v > 0.0) != (prev > 0.0):
            count += 1
        prev = v
    return count


def _newton_polish(coeffs, deriv, x, lo, hi, iters=40):
    for _ in range(iters):
        f = poly_eval(coeffs, x)
        if f == 0.0:
            return x
        d = poly_eval(deriv, x)
        if d == 0.0:
            return x
        step = f / d
        nx = x - step
        if not lo <= nx <= hi:
            return x
        if abs(step) <= 1e-16 * max(1.0, abs(x)):
            return nx
        x = nx
    return x


def real_roots(coeffs, interval):
    """All real roots of the polynomial in [a, b], multiplicities collapsed.

    Each root is polished toward |p(r)| <= ~1e-12 * max|coeff| *
    max(1,|r|)^deg. Returns a sorted list; raises on the zero polynomial.
    """
    a, b = interval
    if not a < b:
        raise InvariantError(f"need a < b, got [{a}, {b}]")
    c = trim(coeffs)
    if not c:
        raise InvariantError("zero polynomial has no isolated roots")
    deg = len(c) - 1
    if deg == 0:
        return []
    scale = max(abs(v) for v in c)
    c = [v / scale for v in c]
    if deg == 1:
        r = -c[0] / c[1]
        return [r] if a <= r <= b else []
    if deg == 2:
        return sorted(_quadratic_roots(c[2], c[1], c[0], a, b))
    deriv = poly_deriv(c)

    # Endpoint roots first: the Sturm count below treats the open interval.
    roots = []
    ends_tol = 1e-12 * max(1.0, abs(a), abs(b)) ** deg
    lo, hi = a, b
    if abs(poly_eval(c, a)) <= ends_tol:
        roots.append(a)
        lo = a + max(1e-9, 1e-9 * abs(a))
    if abs(poly_eval(c, b)) <= ends_tol:
        roots.append(b)
        hi = b - max(1e-9, 1e-9 * abs(b))
    if lo >= hi:
        return sorted(set(roots))

    chain = _sturm_chain(c)
    total = _sign_changes(chain, lo) - _sign_changes(chain, hi)
    if total <= 0:
        return sorted(set(roots))
    # Early chain termination means a nontrivial gcd(p, p'): p has multiple
    # roots. Those are the gcd's roots, which carry lower multiplicity and
    # are far better conditioned, so refine against the gcd where it agrees.
    gcd_poly = chain[-1] if len(chain) < deg + 1 and len(chain[-1]) > 1 else None

    stack = [(lo, hi, total)]
    isolated = []
    while stack:
        x0, x1, n = stack.pop()
        if n == 0:
            continue
        if n == 1 or x1 - x0 <= _BISECT_WIDTH:
            isolated.append((x0, x1))
            continue
        mid = 0.5 * (x0 + x1)
        nl = _sign_changes(chain, x0) - _sign_changes(chain, mid)
        stack.append((x0, mid, nl))
        stack.append((mid, x1, n - nl))

    for x0, x1 in isolated:
        f0 = poly_eval(c, x0)
        f1 = poly_eval(c, x1)
        if f0 == 0.0:
            roots.append(x0)
            continue
        if f1 == 0.0:
            roots.append(x1)
            continue
        if (f0 > 0.0) != (f1 > 0.0):
            # Bisect to a modest bracket; the guarded Newton below finishes.
            coarse = max(_BISECT_WIDTH, 1e-6 * (abs(x0) + abs(x1) + 1.0))
            rev = c[::-1]
            pos0 = f0 > 0.0
            while x1 - x0 > coarse:
                mid = 0.5 * (x0 + x1)
                fm = 0.0
                for cv in rev:
                    fm = fm * mid + cv
                if fm == 0.0:
                    x0 = x1 = mid
                    break
                if (fm > 0.0) == pos0:
                    x0 = mid
                else:
                    x1 = mid
        else:
            # Even-multiplicity root: squeeze with Sturm counts instead.
            while x1 - x0 > _BISECT_WIDTH:
                mid = 0.5 * (x0 + x1)
                if _sign_changes(chain, x0) - _sign_changes(chain, mid) >= 1:
                    x1 = mid
                else:
                    x0 = mid
        mid = 0.5 * (x0 + x1)
        pad = 1e-9 + 0.6 * (x1 - x0)
        r = _newton_polish(c, deriv, mid, x0 - pad, x1 + pad)
        # Newton can stall away from clustered roots; keep the better point.
        if abs(poly_eval(c, r)) > abs(poly_eval(c, mid)):
            r = mid
        if gcd_poly is not None:
            pad = 1e-5 * max(1.0, abs(r))
            sub = real_roots(gcd_poly, (r - pad, r + pad))
            if len(sub) == 1:
                r = sub[0]
        roots.append(r)

    roots.sort()
    out = []
    span = max(1.0, abs(a), abs(b))
    for r in roots:
        if not out or r - out[-1] > 1e-9 * span:
            out.append(r)
    return out


def _quadratic_roots(a2, a1, a0, lo, hi):
    if a2 == 0.0:
        if a1 == 0.0:
            return []
        r = -a0 / a1
        return [r] if lo <= r <= hi else []
    disc = a1 * a1 - 4.0 * a2 * a0
    if disc < 0.0:
        return []
    s = math.sqrt(disc)
    q = -0.5 * (a1 + math.copysign(s, a1)) if a1 != 0.0 else 0.5 * s
    roots = {q / a2}
    roots.add(a0 / q if q != 0.0 else 0.0)
    return [r for r in roots if lo <= r <= hi]


def _roots_by_derivative(c, lo, hi):
    """Roots of a trimmed polynomial in [lo, hi] via derivative recursion.

    The derivative's roots split [lo, hi] into monotone pieces; each piece
    holds at most one root, found by safeguarded Newton. Critical points
    where |p| is tiny are kept as (multiple-root) candidates. This is the
    fast path used by the connection solver; every candidate it produces is
    verified against the full boundary system afterwards, and the Sturm
    route (real_roots) remains the reference implementation.
    """
    deg = len(c) - 1
    if deg <= 0:
        return []
    if deg == 1:
        r = -c[0] / c[1]
        return [r] if lo <= r <= hi else []
    if deg == 2:
        return sorted(_quadratic_roots(c[2], c[1], c[0], lo, hi))
    d = [k * c[k] for k in range(1, deg + 1)]
    dm = max(abs(v) for v in d)
    crit = _roots_by_derivative([v / dm for v in d], lo, hi)
    pts = [lo] + crit + [hi]
    rev = c[::-1]
    drev = d[::-1]

    def ev(x):
        acc = 0.0
        for cv in rev:
            acc = acc * x + cv
        return acc

    vals = [ev(x) for x in pts]
    roots = []
    crit_tol = 1e-9 * max(1.0, abs(lo), abs(hi)) ** deg
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        fa, fb = vals[i], vals[i + 1]
        if abs(fa) <= crit_tol:
            # Near-multiple root at the piece boundary; keep it, but still
            # scan the piece (its sign is informative for a further root).
            roots.append(a)
        if (fa > 0.0) == (fb > 0.0):
            continue
        # Safeguarded Newton on a monotone piece.
        x = 0.5 * (a + b)
        for _ in range(60):
            fx = ev(x)
            if fx == 0.0:
                break
            if (fx > 0.0) == (fa > 0.0):
                a = x
            else:
                b = x
            dv = 0.0
            for cv in drev:
                dv = dv * x + cv
            nx = x - fx / dv if dv != 0.0 else 0.5 * (a + b)
            if not a < nx < b:
                nx = 0.5 * (a + b)
            if abs(nx - x) <= 1e-15 * max(1.0, abs(x)):
                x = nx
                break
            x = nx
        roots.append(x)
    if abs(vals[-1]) <= crit_tol:
        roots.append(hi)
    roots.sort()
    out = []
    span = 1e-11 * max(1.0, abs(lo), abs(hi))
    for r in roots:
        if not out or r - out[-1] > span:
            out.append(r)
    return out


# --- Interpolation-based coefficient recovery --------------------------------


def _cheb_nodes(deg):
    return [math.cos(math.pi * k / deg) for k in range(deg + 1)]


def _inv_vandermonde(nodes):
    n = len(nodes)
    m = [[nodes[r] ** c for c in range(n)] + [1.0 if k == r else 0.0 for k in range(n)]
         for r in range(n)]
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(m[r][col]))
        m[col], m[piv] = m[piv], m[col]
        pv = m[col][col]
        m[col] = [v / pv for v in m[col]]
        for r in range(n):
            if r != col:
                f = m[r][col]
                if f != 0.0:
                    m[r] = [a - f * b for a, b in zip(m[r], m[col])]
    return [[m[r][n + c] for c in range(n)] for r in range(n)]


_NODES = {d: _cheb_nodes(d) for d in (2, 3, 4, 6)}
# Row r of the inverse maps sampled values to the coefficient of y^r.
_INV = {d: _inv_vandermonde(_NODES[d]) for d in (2, 3, 4, 6)}


def _interp_roots(fun, deg, xlo, xhi):
    """Roots of the degree-deg polynomial fun over a generous interval.

    fun is sampled at Chebyshev nodes mapped onto [xlo, xhi]; since the
    interpolant of a polynomial is the polynomial itself, roots may also be
    recovered somewhat outside the sampling window (up to the Cauchy bound,
    capped for conditioning).
    """
    c = 0.5 * (xlo + xhi)
    h = 0.5 * (xhi - xlo)
    if h <= 1e-9:
        h = 1.0
    vals = [fun(c + h * y) for y in _NODES[deg]]
    vscale = max(abs(v) for v in vals)
    if vscale == 0.0:
        return []
    vals = [v / vscale for v in vals]
    coeffs = [sum(row[k] * vals[k] for k in range(deg + 1)) for row in _INV[deg]]
    # Interpolation noise sits around 1e-13 relative; trimming at 1e-10
    # drops numerically-absent leading degrees (the three-bang template is
    # genuinely degree 4 of its sampled 6).
    coeffs = trim(coeffs, rel=1e-10)
    if len(coeffs) <= 1:
        return []
    lead = abs(coeffs[-1])
    bound = 1.0 + max(abs(v) for v in coeffs[:-1]) / lead
    bound = min(max(bound, 1.0 + 1e-9), 32.0)
    ys = _roots_by_derivative(coeffs, -bound, bound)
    return [c + h * y for y in ys]


# --- Arc algebra helpers ------------------------------------------------------


def _branch_values(s2, rp, rm, scale):
    """Candidate values of the odd variable y with y^2 = s2.

    rp/rm are the residuals at y = +/-sqrt(s2) (real branch). Near s2 = 0
    the eliminated polynomial has a near-double root and the recovered point
    may sit slightly on the complex side, so both tiny branches are seeded
    and left to the Newton polish.
    """
    tol = 1e-7 * scale
    if s2 < -tol:
        return []
    if s2 <= tol:
        s = math.sqrt(abs(s2))
        return [0.0, s, -s] if s > 0.0 else [0.0]
    s = math.sqrt(s2)
    a_half = 0.5 * (rp + rm)
    b_half = 0.5 * (rp - rm) / s
    if abs(b_half) > 1e-9 * max(1.0, abs(a_half)):
        return [-a_half / b_half]
    return [s, -s]


def _dx2(a, b, u):
    """Velocity gain ramping the acceleration from a to b under jerk u."""
    return (b * b - a * a) / (2.0 * u)


def _dx3(w, a, b, u):
    """Position gain over the same ramp, entered at velocity w."""
    d = b - a
    return (w * d) / u + d * d * (2.0 * a + b) / (6.0 * u * u)


# --- Connection templates -----------------------------------------------------


@dataclass(frozen=True, slots=True)
class ConnectionTemplate:
    """Arc-sequence skeleton with unknown durations.

    mode is 'point' (match a full end state), 'tangent-in' (end on the
    plane {x2 = 0, x3 = level} with free, sign-restricted end acceleration)
    or 'tangent-out' (start on that plane, free start acceleration).
    """

    tokens: tuple[str, ...]
    mode: str = "point"

    def __post_init__(self):
        if self.mode not in ("point", "tangent-in", "tangent-out"):
            raise InvariantError(f"unknown boundary mode {self.mode!r}")
        object.__setattr__(self, "tokens", tuple(self.tokens))


_MIRROR = {"0+": "0-", "0-": "0+", "1+": "1-", "1-": "1+", "2+": "2-", "2-": "2+"}


def _mirror_limits(limits):
    return Limits(umin=-limits.umax, umax=-limits.umin,
                  lo=tuple(-v for v in limits.hi), hi=tuple(-v for v in limits.lo))


def solve_connection(tmpl: ConnectionTemplate, x_start, x_end, limits: Limits,
                     plane_level: float | None = None):
    """Duration vectors (all >= 0) realizing the template between boundaries.

    Point mode matches x_end exactly (2- or 3-component); tangent modes
    replace the plane-side boundary with (e, 0, plane_level), e >= 0 for the
    positive-lead family. Results are sorted by total duration, each
    reproducing the boundary to ~1e-9 after rollout; tangent modes return
    (durations, tangent_state) pairs. Empty list means no connection.
    """
    tokens = tmpl.tokens
    if not tokens:
        raise InvariantError("empty template")
    if any(t[0] == "2" for t in tokens):
        raise InvariantError("velocity-cruise templates are assembled by the planner")

    lead_sign = tokens[0][1]
    if lead_sign == "-":
        mirrored = ConnectionTemplate(tuple(_MIRROR[t] for t in tokens), tmpl.mode)
        res = solve_connection(
            mirrored,
            tuple(-v for v in x_start) if x_start is not None else None,
            tuple(-v for v in x_end) if x_end is not None else None,
            _mirror_limits(limits),
            -plane_level if plane_level is not None else None,
        )
        if tmpl.mode == "point":
            return res
        return [(durs, tuple(-v for v in st)) for durs, st in res]

    if tmpl.mode == "point" and len(x_start) == 2:
        return _solve_point2(tokens, x_start, x_end, limits)
    if tmpl.mode == "point":
        return _solve_point3(tokens, x_start, x_end, limits)
    if tmpl.mode == "tangent-in":
        return _solve_tangent_in(tokens, x_start, limits, plane_level)
    return _solve_tangent_out(tokens, x_end, limits, plane_level)


def _accel_window(limits, *vals):
    """Sampling window for a switch acceleration."""
    span = 1.0
    for v in vals:
        if v is not None and math.isfinite(v):
            span = max(span, abs(v))
    lo1, hi1 = limits.lo[0], limits.hi[0]
    lo = lo1 if math.isfinite(lo1) else -4.0 * span - 1.0
    hi = hi1 if math.isfinite(hi1) else 4.0 * span + 1.0
    pad = 1e-6 * max(1.0, abs(lo), abs(hi))
    return lo - pad, hi + pad


def _controls_for(tokens, limits):
    out = []
    for t in tokens:
        if t == "0+":
            out.append(limits.umax)
        elif t == "0-":
            out.append(limits.umin)
        else:
            out.append(0.0)
    return out


def _snap_durations(durs, snap):
    out = []
    for d in durs:
        if d < -snap:
            return None
        out.append(0.0 if d < 0.0 else d)
    return tuple(out)


def _scale_of(*states):
    s = 1.0
    for st in states:
        if st is not None:
            for v in st:
                if math.isfinite(v):
                    s = max(s, abs(v))
    return s


def _solve_point3(tokens, z, f, limits):
    up, um = limits.umax, limits.umin
    H1, L1 = limits.hi[0], limits.lo[0]
    z1, z2, z3 = z
    f1, f2, f3 = f
    d2 = f2 - z2
    key = tuple(tokens)
    cands = []

    if key == ("0+",):
        cands.append(((f1 - z1) / up,))

    elif key == ("0+", "0-"):
        # Two unknowns against three equations: solvable only on-surface.
        D = 1.0 / (2.0 * up) - 1.0 / (2.0 * um)
        rhs = (d2 + (z1 * z1 - f1 * f1) / (2.0 * up)) / D + f1 * f1
        if rhs >= 0.0:
            for pv in (math.sqrt(rhs), -math.sqrt(rhs)):
                cands.append(((pv - z1) / up, (f1 - pv) / um))

    elif key == ("0+", "1+", "0-"):
        # One unknown hold; on-surface membership solve.
        if math.isfinite(H1):
            w2 = z2 + _dx2(z1, H1, up)
            rem = f2 - w2 - _dx2(H1, f1, um)
            cands.append((((H1 - z1) / up, rem / H1, (f1 - H1) / um)))

    elif key == ("0+", "0-", "0+"):
        D = 1.0 / (2.0 * up) - 1.0 / (2.0 * um)
        gamma = (d2 + (z1 * z1 - f1 * f1) / (2.0 * up)) / D
        iu6m = 1.0 / (6.0 * um * um)
        iu6p = 1.0 / (6.0 * up * up)

        def resid(pv, qv, w2, base):
            # v2 is branch-independent: q^2 - p^2 = -gamma on both branches.
            v2 = w2 - gamma / (2.0 * um)
            dq = qv - pv
            df = f1 - qv
            return (base + w2 * dq / um + dq * dq * (2.0 * pv + qv) * iu6m
                    + v2 * df / up + df * df * (2.0 * qv + f1) * iu6p)

        def pfun(pv):
            w2 = z2 + (pv * pv - z1 * z1) / (2.0 * up)
            base = _dx3(z2, z1, pv, up) + z3 - f3
            s = cmath.sqrt(pv * pv - gamma)
            return (resid(pv, s, w2, base) * resid(pv, -s, w2, base)).real

        wlo, whi = _accel_window(limits, z1, f1, math.sqrt(abs(gamma)))
        for pv in _interp_roots(pfun, 6, wlo, whi):
            s2 = pv * pv - gamma
            s = math.sqrt(abs(s2))
            w2 = z2 + (pv * pv - z1 * z1) / (2.0 * up)
            base = _dx3(z2, z1, pv, up) + z3 - f3
            ep = resid(pv, s, w2, base)
            em = resid(pv, -s, w2, base)
            for qv in _branch_values(s2, ep, em, max(1.0, pv * pv, abs(gamma))):
                cands.append(((pv - z1) / up, (qv - pv) / um, (f1 - qv) / up))

    elif key == ("0+", "0-", "1-", "0+"):
        if not math.isfinite(L1):
            return []

        def pfun(pv):
            w2 = z2 + _dx2(z1, pv, up)
            v2 = w2 + _dx2(pv, L1, um)
            bb = (f2 - v2 - _dx2(L1, f1, up)) / L1
            return (_dx3(z2, z1, pv, up) + _dx3(w2, pv, L1, um)
                    + v2 * bb + 0.5 * L1 * bb * bb
                    + _dx3(v2 + L1 * bb, L1, f1, up) + z3 - f3)

        wlo, whi = _accel_window(limits, z1, f1)
        for pv in _interp_roots(pfun, 4, wlo, whi):
            w2 = z2 + _dx2(z1, pv, up)
            v2 = w2 + _dx2(pv, L1, um)
            bb = (f2 - v2 - _dx2(L1, f1, up)) / L1
            cands.append(((pv - z1) / up, (L1 - pv) / um, bb, (f1 - L1) / up))

    elif key == ("1+", "0-", "0+"):
        if not math.isfinite(H1):
            return []

        def qfun(qv):
            mm = (f2 - z2 - _dx2(H1, qv, um) - _dx2(qv, f1, up)) / H1
            w2 = z2 + H1 * mm
            return (z2 * mm + 0.5 * H1 * mm * mm
                    + _dx3(w2, H1, qv, um)
                    + _dx3(w2 + _dx2(H1, qv, um), qv, f1, up) + z3 - f3)

        wlo, whi = _accel_window(limits, z1, f1)
        for qv in _interp_roots(qfun, 4, wlo, whi):
            mm = (f2 - z2 - _dx2(H1, qv, um) - _dx2(qv, f1, up)) / H1
            cands.append((mm, (qv - H1) / um, (f1 - qv) / up))

    elif key == ("1+", "0-", "1-", "0+"):
        if not (math.isfinite(H1) and math.isfinite(L1)):
            return []
        c_mid = _dx2(H1, L1, um)
        c_end = _dx2(L1, f1, up)

        def bfun(bb):
            mm = (f2 - z2 - c_mid - L1 * bb - c_end) / H1
            w2 = z2 + H1 * mm
            v2 = w2 + c_mid
            return (z2 * mm + 0.5 * H1 * mm * mm
                    + _dx3(w2, H1, L1, um)
                    + v2 * bb + 0.5 * L1 * bb * bb
                    + _dx3(v2 + L1 * bb, L1, f1, up) + z3 - f3)

        tmax = _time_ceiling(limits, z, f)
        for bb in _interp_roots(bfun, 2, 0.0, tmax):
            mm = (f2 - z2 - c_mid - L1 * bb - c_end) / H1
            cands.append((mm, (L1 - H1) / um, bb, (f1 - L1) / up))

    else:
        raise InvariantError(f"unsupported point template {tokens}")

    return _finish_point(tokens, z, f, limits, cands)


def _solve_tangent_in(tokens, z, limits, level):
    """Positive-lead entry family into a lower-bound tangent point."""
    up, um = limits.umax, limits.umin
    H1 = limits.hi[0]
    z1, z2, z3 = z
    key = tuple(tokens)
    cands = []

    if key == ("0+", "0-"):
        c2 = 1.0 - um / up
        c0 = (um / up) * z1 * z1 - 2.0 * um * z2

        def efun(pv):
            ev = cmath.sqrt(c2 * pv * pv + c0)
            w2 = z2 + _dx2(z1, pv, up)
            r_p = _dx3(z2, z1, pv, up) + _dx3(w2, pv, ev, um) + z3 - level
            r_m = _dx3(z2, z1, pv, up) + _dx3(w2, pv, -ev, um) + z3 - level
            return (r_p * r_m).real

        wlo, whi = _accel_window(limits, z1, math.sqrt(abs(c0)))
        for pv in _interp_roots(efun, 6, wlo, whi):
            s2 = c2 * pv * pv + c0
            s = math.sqrt(abs(s2))
            w2 = z2 + _dx2(z1, pv, up)
            rp = _dx3(z2, z1, pv, up) + _dx3(w2, pv, s, um) + z3 - level
            rm = _dx3(z2, z1, pv, up) + _dx3(w2, pv, -s, um) + z3 - level
            for ev in _branch_values(s2, rp, rm, max(1.0, pv * pv, abs(c0))):
                cands.append(((pv - z1) / up, (ev - pv) / um))

    elif key == ("0+", "1+", "0-"):
        if not math.isfinite(H1):
            return []
        w2 = z2 + _dx2(z1, H1, up)
        w3 = z3 + _dx3(z2, z1, H1, up)

        def efun(ev):
            mm = -(w2 + _dx2(H1, ev, um)) / H1
            v2 = w2 + H1 * mm
            return (w3 + w2 * mm + 0.5 * H1 * mm * mm
                    + _dx3(v2, H1, ev, um) - level)

        wlo, whi = _accel_window(limits, z1)
        for ev in _interp_roots(efun, 4, wlo, whi):
            mm = -(w2 + _dx2(H1, ev, um)) / H1
            cands.append(((H1 - z1) / up, mm, (ev - H1) / um))
    else:
        raise InvariantError(f"unsupported tangent-in template {tokens}")

    return _finish_tangent_in(tokens, z, limits, level, cands)


def _solve_tangent_out(tokens, f, limits, level):
    """Positive-lead exit family out of a lower-bound tangent point."""
    up, um = limits.umax, limits.umin
    H1 = limits.hi[0]
    f1, f2, f3 = f
    key = tuple(tokens)
    cands = []

    if key == ("0+", "0-"):
        c2 = 1.0 - up / um
        c0 = (up / um) * f1 * f1 - 2.0 * up * f2

        def pfun(pv):
            ev = cmath.sqrt(c2 * pv * pv + c0)
            r_p = (_dx3(0.0, ev, pv, up)
                   + _dx3(_dx2(ev, pv, up), pv, f1, um) + level - f3)
            ev = -ev
            r_m = (_dx3(0.0, ev, pv, up)
                   + _dx3(_dx2(ev, pv, up), pv, f1, um) + level - f3)
            return (r_p * r_m).real

        wlo, whi = _accel_window(limits, f1, math.sqrt(abs(c0)))
        for pv in _interp_roots(pfun, 6, wlo, whi):
            s2 = c2 * pv * pv + c0
            s = math.sqrt(abs(s2))
            rp = (_dx3(0.0, s, pv, up)
                  + _dx3(_dx2(s, pv, up), pv, f1, um) + level - f3)
            rm = (_dx3(0.0, -s, pv, up)
                  + _dx3(_dx2(-s, pv, up), pv, f1, um) + level - f3)
            for ev in _branch_values(s2, rp, rm, max(1.0, pv * pv, abs(c0))):
                cands.append((ev, (pv - ev) / up, (f1 - pv) / um))

    elif key == ("0+", "1+", "0-"):
        if not math.isfinite(H1):
            return []

        def efun(ev):
            mm = (f2 - _dx2(ev, H1, up) - _dx2(H1, f1, um)) / H1
            w2 = _dx2(ev, H1, up)
            return (_dx3(0.0, ev, H1, up) + w2 * mm + 0.5 * H1 * mm * mm
                    + _dx3(w2 + H1 * mm, H1, f1, um) + level - f3)

        wlo, whi = _accel_window(limits, f1)
        for ev in _interp_roots(efun, 4, wlo, whi):
            mm = (f2 - _dx2(ev, H1, up) - _dx2(H1, f1, um)) / H1
            cands.append((ev, (H1 - ev) / up, mm, (f1 - H1) / um))
    else:
        raise InvariantError(f"unsupported tangent-out template {tokens}")

    return _finish_tangent_out(tokens, f, limits, level, cands)


def _time_ceiling(limits, *states):
    scale = _scale_of(*states)
    rate = min(limits.umax, -limits.umin)
    return 16.0 * (scale / rate + 1.0) ** 2 + 16.0


# --- Candidate polishing and verification -------------------------------------


def _newton_refine(x_start, controls, durs, pins, targets, free_start=False,
                   start_level=None):
    """Damped Newton on durations (and optionally the free start accel).

    pins: (arc_index, accel_value) entry-acceleration equalities for
    constrained arcs. targets: list of (component, value) endpoint
    equalities. free_start: the start state is (e, 0, start_level) with e an
    extra unknown appended to the vector.
    """
    n = len(durs)
    vec = list(durs) + ([x_start[0]] if free_start else [])
    for _ in range(14):
        if free_start:
            start = (vec[n], 0.0, start_level)
        else:
            start = tuple(x_start)
        states = [start]
        for u, d in zip(controls, vec[:n]):
            states.append(phi(states[-1], u, d))
        rows = []
        res = []
        for comp, val in targets:
            res.append(states[-1][comp] - val)
            rows.append(("end", comp))
        for idx, level in pins:
            res.append(states[idx][0] - level)
            rows.append(("pin", idx))
        err = max(abs(r) for r in res)
        scale = _scale_of(start, states[-1])
        if err <= 1e-13 * scale:
            break
        cols = []
        for i in range(n):
            st = states[i + 1]
            dyn = (controls[i], st[0], st[1])
            col = []
            for kind, what in rows:
                if kind == "end":
                    tau = sum(vec[i + 1:n])
                    if what == 0:
                        col.append(dyn[0])
                    elif what == 1:
                        col.append(dyn[0] * tau + dyn[1])
                    else:
                        col.append(dyn[0] * tau * tau / 2.0 + dyn[1] * tau + dyn[2])
                else:
                    col.append(controls[i] if i < what else 0.0)
            cols.append(col)
        if free_start:
            col = []
            for kind, what in rows:
                if kind == "end":
                    tau = sum(vec[:n])
                    col.append((1.0, tau, tau * tau / 2.0)[what])
                else:
                    col.append(1.0)
            cols.append(col)
        step = _lstsq_step(cols, res)
        if step is None:
            break
        changed = False
        for i in range(len(vec)):
            nv = vec[i] - step[i]
            if i < n and nv < 0.0:
                nv = 0.0
            if nv != vec[i]:
                changed = True
            vec[i] = nv
        if not changed:
            break
    return tuple(vec[:n]), (vec[n] if free_start else None)


def _lstsq_step(cols, res):
    """Newton step for J step = res, J given column-wise (m rows, n cols).

    Square systems solve directly; over/under-determined ones go through
    the minimal-norm normal equations.
    """
    m = len(res)
    n = len(cols)
    if m == n:
        step = _gauss_solve([[cols[i][r] for i in range(n)] for r in range(m)],
                            list(res))
        if step is not None:
            return step
    jjt = [[sum(cols[i][r] * cols[i][c] for i in range(n)) for c in range(m)]
           for r in range(m)]
    y = _gauss_solve(jjt, list(res))
    if y is None:
        return None
    return [sum(cols[i][r] * y[r] for r in range(m)) for i in range(n)]


def _gauss_solve(a, b):
    m = [row[:] + [bv] for row, bv in zip(a, b)]
    n = len(b)
    big = max((abs(v) for row in m for v in row[:n]), default=0.0)
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(m[r][col]))
        if abs(m[piv][col]) <= 1e-13 * (1.0 + big):
            return None
        m[col], m[piv] = m[piv], m[col]
        for r in range(n):
            if r != col:
                f = m[r][col] / m[col][col]
                for k in range(col, n + 1):
                    m[r][k] -= f * m[col][k]
    return [m[r][n] / m[r][r] for r in range(n)]


def _pins_for(tokens, limits):
    return [(i, limits.bound_for(t)) for i, t in enumerate(tokens) if t[0] in "12"]


def _finish_point(tokens, z, f, limits, cands):
    controls = _controls_for(tokens, limits)
    pins = _pins_for(tokens, limits)
    scale = _scale_of(z, f)
    snap = TIME_SNAP * 10.0
    targets = [(k, f[k]) for k in range(3)]
    out, seen = [], set()
    for durs in cands:
        if any(not math.isfinite(d) for d in durs):
            continue
        snapped = _snap_durations(durs, max(snap, 1e-7 * sum(abs(d) for d in durs)))
        if snapped is None:
            continue
        refined, _ = _newton_refine(z, controls, snapped, pins, targets)
        st = tuple(z)
        ok = True
        states = [st]
        for u, d in zip(controls, refined):
            st = phi(st, u, d)
            states.append(st)
        for idx, level in pins:
            if abs(states[idx][0] - level) > 1e-7 * max(1.0, abs(level)):
                ok = False
                break
        if not ok:
            continue
        if max(abs(st[k] - f[k]) for k in range(3)) > 1e-8 * scale:
            continue
        sig = tuple(round(d, 9) for d in refined)
        if sig in seen:
            continue
        seen.add(sig)
        out.append(refined)
    out.sort(key=sum)
    return out


def _finish_tangent_in(tokens, z, limits, level, cands):
    controls = _controls_for(tokens, limits)
    pins = _pins_for(tokens, limits)
    scale = _scale_of(z, (0.0, 0.0, level))
    targets = [(1, 0.0), (2, level)]
    out, seen = [], set()
    for durs in cands:
        if any(not math.isfinite(d) for d in durs):
            continue
        snapped = _snap_durations(durs, TIME_SNAP * 10.0)
        if snapped is None:
            continue
        refined, _ = _newton_refine(z, controls, snapped, pins, targets)
        st = tuple(z)
        states = [st]
        for u, d in zip(controls, refined):
            st = phi(st, u, d)
            states.append(st)
        ok = all(abs(states[idx][0] - lvl) <= 1e-7 * max(1.0, abs(lvl))
                 for idx, lvl in pins)
        if not ok:
            continue
        if abs(st[1]) > 1e-8 * scale or abs(st[2] - level) > 1e-8 * scale:
            continue
        if st[0] < -1e-8 * scale:
            continue
        sig = tuple(round(d, 9) for d in refined)
        if sig in seen:
            continue
        seen.add(sig)
        out.append((refined, (max(st[0], 0.0), 0.0, level)))
    out.sort(key=lambda item: sum(item[0]))
    return out


def _finish_tangent_out(tokens, f, limits, level, cands):
    controls = _controls_for(tokens, limits)
    pins = _pins_for(tokens, limits)
    scale = _scale_of(f, (0.0, 0.0, level))
    targets = [(k, f[k]) for k in range(3)]
    out, seen = [], set()
    for cand in cands:
        ev, durs = cand[0], cand[1:]
        if not math.isfinite(ev) or any(not math.isfinite(d) for d in durs):
            continue
        if ev < -1e-8 * scale:
            continue
        snapped = _snap_durations(durs, TIME_SNAP * 10.0)
        if snapped is None:
            continue
        start = (max(ev, 0.0), 0.0, level)
        refined, e_ref = _newton_refine(start, controls, snapped, pins, targets,
                                        free_start=True, start_level=level)
        if e_ref is None or e_ref < -1e-8 * scale:
            continue
        st = (max(e_ref, 0.0), 0.0, level)
        states = [st]
        for u, d in zip(controls, refined):
            st = phi(st, u, d)
            states.append(st)
        ok = all(abs(states[idx][0] - lvl) <= 1e-7 * max(1.0, abs(lvl))
                 for idx, lvl in pins)
        if not ok:
            continue
        if max(abs(st[k] - f[k]) for k in range(3)) > 1e-8 * scale:
            continue
        sig = (round(states[0][0], 9),) + tuple(round(d, 9) for d in refined)
        if sig in seen:
            continue
        seen.add(sig)
        out.append((refined, states[0]))
    out.sort(key=lambda item: sum(item[0]))
    return out


def _solve_point2(tokens, z, f, limits):
    """Second-order point connections: closed-form quadratics."""
    z1, z2 = z
    f1, f2 = f
    up, um = limits.umax, limits.umin
    H1, L1 = limits.hi[0], limits.lo[0]
    key = tuple(tokens)
    cands = []
    if key == ("0+",):
        cands.append(((f1 - z1) / up,))
    elif key == ("0-",):
        cands.append(((f1 - z1) / um,))
    elif key == ("0+", "0-"):
        D = 1.0 / (2.0 * up) - 1.0 / (2.0 * um)
        rhs = (f2 - z2 + z1 * z1 / (2.0 * up) - f1 * f1 / (2.0 * um)) / D
        if rhs >= 0.0:
            for pv in (math.sqrt(rhs), -math.sqrt(rhs)):
                cands.append(((pv - z1) / up, (f1 - pv) / um))
    elif key == ("0-", "0+"):
        D = 1.0 / (2.0 * um) - 1.0 / (2.0 * up)
        rhs = (f2 - z2 + z1 * z1 / (2.0 * um) - f1 * f1 / (2.0 * up)) / D
        if rhs >= 0.0:
            for pv in (math.sqrt(rhs), -math.sqrt(rhs)):
                cands.append(((pv - z1) / um, (f1 - pv) / up))
    elif key == ("0+", "1+", "0-"):
        if math.isfinite(H1):
            num = f2 - z2 - _dx2(z1, H1, up) - _dx2(H1, f1, um)
            cands.append((((H1 - z1) / up, num / H1, (f1 - H1) / um)))
    elif key == ("0-", "1-", "0+"):
        if math.isfinite(L1):
            num = f2 - z2 - _dx2(z1, L1, um) - _dx2(L1, f1, up)
            cands.append((((L1 - z1) / um, num / L1, (f1 - L1) / up)))
    elif key == ("1+", "0-"):
        if math.isfinite(H1):
            num = f2 - z2 - _dx2(H1, f1, um)
            cands.append(((num / H1, (f1 - H1) / um)))
    elif key == ("1-", "0+"):
        if math.isfinite(L1):
            num = f2 - z2 - _dx2(L1, f1, up)
            cands.append(((num / L1, (f1 - L1) / up)))
    else:
        raise InvariantError(f"unsupported 2nd-order template {tokens}")

    controls = _controls_for(tokens, limits)
    pins = _pins_for(tokens, limits)
    scale = _scale_of(z, f)
    out = []
    for durs in cands:
        if any(not math.isfinite(d) for d in durs):
            continue
        snapped = _snap_durations(durs, TIME_SNAP * 10.0)
        if snapped is None:
            continue
        st = tuple(z)
        states = [st]
        for u, d in zip(controls, snapped):
            st = phi(st, u, d)
            states.append(st)
        if any(abs(states[idx][0] - lvl) > 1e-7 * max(1.0, abs(lvl))
               for idx, lvl in pins):
            continue
        if max(abs(st[k] - f[k]) for k in range(2)) > 1e-8 * scale:
            continue
        out.append(snapped)
    out.sort(key=sum)
    return out
