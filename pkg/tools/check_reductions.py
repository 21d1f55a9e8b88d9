"""Symbolic cross-check of the connection-system reductions in rootfind.

For every arc-sequence template the boundary system eliminates to a single
univariate polynomial; rootfind evaluates that polynomial pointwise (as the
product of the residual over both branches of the square-root substitution)
and recovers coefficients by interpolation. This script verifies, with
sympy, that the pointwise product really is a polynomial of the recorded
degree. Run manually; it is not part of the test suite or runtime.

Recorded degrees:
    three-bang point connection        deg 6
    tangent connections, both free     deg 6
    one pinned arc (hold) in template  deg 4
    two pinned arcs                    deg 2
"""

import sympy as sp

z1, z2, z3, f1, f2, f3, up, um, H1, L1, L3 = sp.symbols(
    "z1 z2 z3 f1 f2 f3 up um H1 L1 L3"
)
p, q, e = sp.symbols("p q e")


def bang(state, u, v):
    x1, x2, x3 = state
    tau = (v - x1) / u
    return (v, x2 + (v**2 - x1**2) / (2 * u),
            x3 + x2 * tau + x1 * tau**2 / 2 + u * tau**3 / 6)


def check(name, e2, e3, odd_var, main_var, expected_degree):
    G = sp.expand(sp.solve(e2, odd_var**2)[0])
    poly = sp.Poly(sp.expand(e3), odd_var)
    even = odd = sp.Integer(0)
    for (j,), c in poly.terms():
        k, r = divmod(j, 2)
        term = c * G**k
        if r == 0:
            even += term
        else:
            odd += term
    final = sp.expand(even**2 - G * odd**2)
    deg = sp.Poly(final, main_var).degree()
    print(f"{name}: degree {deg} (expected <= {expected_degree})")
    assert deg <= expected_degree


def main():
    s = bang(bang(bang((z1, z2, z3), up, p), um, q), up, f1)
    check("three-bang point", s[1] - f2, s[2] - f3, q, p, 6)

    s = bang(bang((z1, z2, z3), up, p), um, e)
    check("tangent-in free pair", s[1], s[2] - L3, e, p, 6)

    s = bang(bang((e, sp.Integer(0), L3), up, p), um, f1)
    check("tangent-out free pair", s[1] - f2, s[2] - f3, e, p, 6)


if __name__ == "__main__":
    main()
