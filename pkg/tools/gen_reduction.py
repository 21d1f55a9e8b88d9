"""Offline derivation of the connection-system reductions.

Each arc-sequence template's boundary equations form a small polynomial
system in the unknown switch accelerations / hold durations. This script
eliminates down to a single univariate polynomial per template (degree 6 at
worst) plus back-substitution formulas, and emits the module
src/jerkopt/_reductions.py with the coefficient expressions CSE-compressed.

Run manually when the template set changes:

    python tools/gen_reduction.py > src/jerkopt/_reductions.py
"""

from __future__ import annotations

import sys

import sympy as sp

# Boundary data: start z, target f, jerk bounds up/um (max/min), pinned
# acceleration levels H1/L1 (hi/lo), tangent-plane position level L3.
z1, z2, z3 = sp.symbols("z1 z2 z3")
f1, f2, f3 = sp.symbols("f1 f2 f3")
up, um = sp.symbols("up um")
H1, L1, L3 = sp.symbols("H1 L1 L3")
p, q, e, m, b = sp.symbols("p q e m b")


def bang(state, u, v):
    """Ramp the acceleration from state[0] to v under constant jerk u."""
    x1, x2, x3 = state
    tau = (v - x1) / u
    return (
        v,
        x2 + (v**2 - x1**2) / (2 * u),
        sp.expand(x3 + x2 * tau + x1 * tau**2 / 2 + u * tau**3 / 6),
    )


def hold(state, dur):
    """Constrained arc: acceleration pinned at state[0], u = 0."""
    x1, x2, x3 = state
    return (x1, x2 + x1 * dur, sp.expand(x3 + x2 * dur + x1 * dur**2 / 2))


def reduce_even_odd(expr, var, square_sub):
    """Split expr (poly in var) into even + var*odd using var^2 = square_sub."""
    poly = sp.Poly(sp.expand(expr), var)
    even = sp.Integer(0)
    odd = sp.Integer(0)
    for (j,), c in poly.terms():
        k, r = divmod(j, 2)
        term = c * square_sub**k
        if r == 0:
            even += term
        else:
            odd += term
    return sp.expand(even), sp.expand(odd)


def poly_coeffs(expr, var, degree):
    poly = sp.Poly(sp.expand(expr), var)
    assert poly.degree() <= degree, (poly.degree(), degree)
    return [sp.expand(poly.coeff_monomial(var**k)) for k in range(degree + 1)]


def emit(name, params, outputs, doc):
    """Print a function computing the named coefficient lists via CSE."""
    flat = []
    layout = []
    for label, exprs in outputs:
        layout.append((label, len(exprs)))
        flat.extend(exprs)
    reps, reduced = sp.cse(flat, optimizations="basic")
    print(f"\n\ndef {name}({', '.join(params)}):")
    print(f'    """{doc}"""')
    for sym, expr in reps:
        print(f"    {sym} = {sp.pycode(expr)}")
    i = 0
    names = []
    for label, n in layout:
        parts = ", ".join(sp.pycode(reduced[i + k]) for k in range(n))
        print(f"    {label} = ({parts},)")
        names.append(label)
        i += n
    print(f"    return {', '.join(names)}")


def tmpl_uvu():
    """[0+ 0- 0+] point to point; unknowns: switch accels p >= q."""
    s = bang((z1, z2, z3), up, p)
    s = bang(s, um, q)
    s = bang(s, up, f1)
    e2 = sp.expand(s[1] - f2)
    e3 = sp.expand(s[2] - f3)
    # e2 is linear in q^2: q^2 = G(p).
    G = sp.solve(e2, q**2)[0]
    G = sp.expand(G)
    A, B = reduce_even_odd(e3, q, G)
    final = sp.expand(A**2 - G * B**2)
    d = sp.Poly(final, p).degree()
    print(f"# template uvu: univariate degree {d}", file=sys.stderr)
    emit(
        "coeffs_uvu",
        ["z1", "z2", "z3", "f1", "f2", "f3", "up", "um"],
        [
            ("P", poly_coeffs(final, p, 6)),
            ("A", poly_coeffs(A, p, 3)),
            ("B", poly_coeffs(B, p, 2)),
            ("G", poly_coeffs(G, p, 2)),
        ],
        "[0+,0-,0+]: P(p) = 0; q = -A(p)/B(p); q^2 = G(p).",
    )


def tmpl_uvlu():
    """[0+ 0- 1-hold 0+]; unknowns: peak p and hold duration b."""
    s = bang((z1, z2, z3), up, p)
    s = bang(s, um, L1)
    s = hold(s, b)
    s = bang(s, up, f1)
    e2 = sp.expand(s[1] - f2)
    e3 = sp.expand(s[2] - f3)
    bsol = sp.expand(sp.solve(e2, b)[0])
    final = sp.expand(e3.subs(b, bsol))
    d = sp.Poly(final, p).degree()
    print(f"# template uvlu: univariate degree {d}", file=sys.stderr)
    emit(
        "coeffs_uvlu",
        ["z1", "z2", "z3", "f1", "f2", "f3", "up", "um", "L1"],
        [
            ("P", poly_coeffs(final, p, 4)),
            ("BN", poly_coeffs(sp.fraction(sp.together(bsol))[0], p, 2)),
            ("BD", [sp.fraction(sp.together(bsol))[1]]),
        ],
        "[0+,0-,1-,0+]: P(p) = 0; hold b = BN(p)/BD.",
    )


def tmpl_hvu():
    """[1+hold 0- 0+] from z1 == hi1; unknowns: hold m and valley q."""
    s = hold((H1, z2, z3), m)
    s = bang(s, um, q)
    s = bang(s, up, f1)
    e2 = sp.expand(s[1] - f2)
    e3 = sp.expand(s[2] - f3)
    msol = sp.expand(sp.solve(e2, m)[0])
    final = sp.expand(e3.subs(m, msol))
    d = sp.Poly(final, q).degree()
    print(f"# template hvu: univariate degree {d}", file=sys.stderr)
    emit(
        "coeffs_hvu",
        ["z2", "z3", "f1", "f2", "f3", "up", "um", "H1"],
        [
            ("P", poly_coeffs(final, q, 4)),
            ("MN", poly_coeffs(sp.fraction(sp.together(msol))[0], q, 2)),
            ("MD", [sp.fraction(sp.together(msol))[1]]),
        ],
        "[1+,0-,0+] from x1=hi1: P(q) = 0; hold m = MN(q)/MD.",
    )


def tmpl_hvlu():
    """[1+hold 0- 1-hold 0+]; unknowns: hold durations m, b."""
    s = hold((H1, z2, z3), m)
    s = bang(s, um, L1)
    s = hold(s, b)
    s = bang(s, up, f1)
    e2 = sp.expand(s[1] - f2)
    e3 = sp.expand(s[2] - f3)
    msol = sp.expand(sp.solve(e2, m)[0])
    final = sp.expand(e3.subs(m, msol))
    d = sp.Poly(final, b).degree()
    print(f"# template hvlu: univariate degree {d}", file=sys.stderr)
    emit(
        "coeffs_hvlu",
        ["z2", "z3", "f1", "f2", "f3", "up", "um", "H1", "L1"],
        [
            ("P", poly_coeffs(final, b, 2)),
            ("MN", poly_coeffs(sp.fraction(sp.together(msol))[0], b, 1)),
            ("MD", [sp.fraction(sp.together(msol))[1]]),
        ],
        "[1+,0-,1-,0+]: P(b) = 0; hold m = MN(b)/MD.",
    )


def tmpl_tan_in_uv():
    """[0+ 0-] from z to the tangent plane (e, 0, L3); unknowns p, e."""
    s = bang((z1, z2, z3), up, p)
    s = bang(s, um, e)
    e2 = sp.expand(s[1] - 0)
    e3 = sp.expand(s[2] - L3)
    G = sp.expand(sp.solve(e2, e**2)[0])
    A, B = reduce_even_odd(e3, e, G)
    final = sp.expand(A**2 - G * B**2)
    d = sp.Poly(final, p).degree()
    print(f"# template tan_in_uv: univariate degree {d}", file=sys.stderr)
    emit(
        "coeffs_tan_in_uv",
        ["z1", "z2", "z3", "up", "um", "L3"],
        [
            ("P", poly_coeffs(final, p, 6)),
            ("A", poly_coeffs(A, p, 3)),
            ("B", poly_coeffs(B, p, 2)),
            ("G", poly_coeffs(G, p, 2)),
        ],
        "[0+,0-] to plane (e,0,L3): P(p) = 0; e = -A(p)/B(p); e^2 = G(p).",
    )


def tmpl_tan_in_uhv():
    """[0+ 1+hold 0-] from z to the plane; unknowns m, e (first ramp pinned)."""
    s = bang((z1, z2, z3), up, H1)
    s = hold(s, m)
    s = bang(s, um, e)
    e2 = sp.expand(s[1] - 0)
    e3 = sp.expand(s[2] - L3)
    msol = sp.expand(sp.solve(e2, m)[0])
    final = sp.expand(e3.subs(m, msol))
    d = sp.Poly(final, e).degree()
    print(f"# template tan_in_uhv: univariate degree {d}", file=sys.stderr)
    emit(
        "coeffs_tan_in_uhv",
        ["z1", "z2", "z3", "up", "um", "H1", "L3"],
        [
            ("P", poly_coeffs(final, e, 4)),
            ("MN", poly_coeffs(sp.fraction(sp.together(msol))[0], e, 2)),
            ("MD", [sp.fraction(sp.together(msol))[1]]),
        ],
        "[0+,1+,0-] to plane: P(e) = 0; hold m = MN(e)/MD.",
    )


def tmpl_tan_out_uv():
    """[0+ 0-] from the plane (e, 0, L3) to f; unknowns e, p."""
    s = bang((e, sp.Integer(0), L3), up, p)
    s = bang(s, um, f1)
    e2 = sp.expand(s[1] - f2)
    e3 = sp.expand(s[2] - f3)
    G = sp.expand(sp.solve(e2, e**2)[0])
    A, B = reduce_even_odd(e3, e, G)
    final = sp.expand(A**2 - G * B**2)
    d = sp.Poly(final, p).degree()
    print(f"# template tan_out_uv: univariate degree {d}", file=sys.stderr)
    emit(
        "coeffs_tan_out_uv",
        ["f1", "f2", "f3", "up", "um", "L3"],
        [
            ("P", poly_coeffs(final, p, 6)),
            ("A", poly_coeffs(A, p, 3)),
            ("B", poly_coeffs(B, p, 2)),
            ("G", poly_coeffs(G, p, 2)),
        ],
        "plane (e,0,L3) via [0+,0-] to f: P(p) = 0; e = -A(p)/B(p); e^2 = G(p).",
    )


def tmpl_tan_out_uhv():
    """[0+ 1+hold 0-] from the plane to f; unknowns e, m (last ramp pinned)."""
    s = bang((e, sp.Integer(0), L3), up, H1)
    s = hold(s, m)
    s = bang(s, um, f1)
    e2 = sp.expand(s[1] - f2)
    e3 = sp.expand(s[2] - f3)
    msol = sp.expand(sp.solve(e2, m)[0])
    final = sp.expand(e3.subs(m, msol))
    d = sp.Poly(final, e).degree()
    print(f"# template tan_out_uhv: univariate degree {d}", file=sys.stderr)
    emit(
        "coeffs_tan_out_uhv",
        ["f1", "f2", "f3", "up", "um", "H1", "L3"],
        [
            ("P", poly_coeffs(final, e, 4)),
            ("MN", poly_coeffs(sp.fraction(sp.together(msol))[0], e, 2)),
            ("MD", [sp.fraction(sp.together(msol))[1]]),
        ],
        "plane via [0+,1+,0-] to f: P(e) = 0; hold m = MN(e)/MD.",
    )


def main():
    print('"""Connection-system reductions (generated by tools/gen_reduction.py).')
    print()
    print("Each function returns coefficient tuples (ascending degree) of the")
    print("eliminated univariate polynomial plus back-substitution data for one")
    print('arc-sequence template. Do not edit by hand."""')
    tmpl_uvu()
    tmpl_uvlu()
    tmpl_hvu()
    tmpl_hvlu()
    tmpl_tan_in_uv()
    tmpl_tan_in_uhv()
    tmpl_tan_out_uv()
    tmpl_tan_out_uhv()


if __name__ == "__main__":
    main()
