#!/usr/bin/env python3
"""Symbolic cross-checks for the curvature and evolution formulas.

Run this before trusting the numerical pipeline. It verifies, with exact
symbolic algebra (sympy), the facts that the Rust test suite freezes as
oracles:

  1. The gauge-wave metric diag(-H, H, 1) with H = H(x - t) is Ricci-flat,
     satisfies the harmonic coordinate condition (contracted Christoffels
     vanish), and solves the second-order evolution system
         g^{ab} d_a d_b g_{mn} = 2 H_{mn}
     with the quadratic source H_{mn} used by the code.
  2. The two sign conventions for the Gamma*Gamma contraction term in the
     Ricci tensor are NOT equivalent on the gauge wave; only the standard
     one (plus sign) is Ricci-flat there.
  3. For a static metric diag(-1, 1, 1 + P(x)) (profile in the first
     spatial coordinate, perturbation on the transverse diagonal
     component) the scalar curvature has the closed form
         R = -P'' / (1 + P) + P'^2 / (2 (1 + P)^2),
     so a C^{1,delta}-only point in P produces a curvature blow-up.
  4. For the longitudinal variant diag(-1, 1 + P(x), 1) the curvature
     vanishes identically: the second-derivative terms cancel.

Usage: python3 python/symbolic_oracle.py
"""

import sympy as sp


def christoffel(g, coords):
    dim = len(coords)
    ginv = g.inv()
    gamma = [[[sp.S(0)] * dim for _ in range(dim)] for _ in range(dim)]
    for m in range(dim):
        for a in range(dim):
            for b in range(dim):
                expr = sp.S(0)
                for r in range(dim):
                    expr += ginv[m, r] * (
                        sp.diff(g[r, a], coords[b])
                        + sp.diff(g[r, b], coords[a])
                        - sp.diff(g[a, b], coords[r])
                    )
                gamma[m][a][b] = sp.simplify(expr / 2)
    return gamma


def contracted_gamma(g, gamma, coords):
    dim = len(coords)
    ginv = g.inv()
    out = []
    for m in range(dim):
        expr = sp.S(0)
        for a in range(dim):
            for b in range(dim):
                expr += ginv[a, b] * gamma[m][a][b]
        out.append(sp.simplify(expr))
    return out


def ricci(g, coords, gamma_term_sign):
    """Ricci tensor with a selectable sign on the Gamma^a_{mn} Gamma^b_{ab} term.

    gamma_term_sign=+1 is the standard convention
      R_mn = d_a G^a_mn - d_n G^a_am + G^a_ab G^b_mn - G^a_mb G^b_na.
    """
    dim = len(coords)
    gamma = christoffel(g, coords)
    ric = sp.zeros(dim, dim)
    for m in range(dim):
        for n in range(dim):
            expr = sp.S(0)
            for a in range(dim):
                expr += sp.diff(gamma[a][m][n], coords[a])
                expr -= sp.diff(gamma[a][a][m], coords[n])
            for a in range(dim):
                for b in range(dim):
                    expr += gamma_term_sign * gamma[a][m][n] * gamma[b][a][b]
                    expr -= gamma[a][m][b] * gamma[b][n][a]
            ric[m, n] = sp.simplify(expr)
    return ric


def harmonic_source(g, coords):
    """Quadratic source H_mn of the reduced (harmonic-gauge) system:

    H_mn = g^{ab} g_{de} G^d_{mb} G^e_{na}
         + 1/2 ( d_a g_mn * G^a
               + g_{nr} G^r_{ab} g^{ae} g^{bs} d_m g_{es}
               + g_{mr} G^r_{ab} g^{ae} g^{bs} d_n g_{es} )
    """
    dim = len(coords)
    ginv = g.inv()
    gamma = christoffel(g, coords)
    gup = contracted_gamma(g, gamma, coords)
    out = sp.zeros(dim, dim)
    for m in range(dim):
        for n in range(dim):
            expr = sp.S(0)
            for a in range(dim):
                for b in range(dim):
                    for d in range(dim):
                        for e in range(dim):
                            expr += ginv[a, b] * g[d, e] * gamma[d][m][b] * gamma[e][n][a]
            half = sp.S(0)
            for a in range(dim):
                half += sp.diff(g[m, n], coords[a]) * gup[a]
            for r in range(dim):
                for a in range(dim):
                    for b in range(dim):
                        for e in range(dim):
                            for s in range(dim):
                                half += (
                                    g[n, r] * gamma[r][a][b] * ginv[a, e] * ginv[b, s]
                                    * sp.diff(g[e, s], coords[m])
                                )
                                half += (
                                    g[m, r] * gamma[r][a][b] * ginv[a, e] * ginv[b, s]
                                    * sp.diff(g[e, s], coords[n])
                                )
            out[m, n] = sp.simplify(expr + half / 2)
    return out


def check_gauge_wave():
    t, x, y = sp.symbols("t x y", real=True)
    coords = [t, x, y]
    amp, k = sp.symbols("A k", positive=True)
    h_fun = 1 - amp * sp.sin(k * (x - t))
    g = sp.diag(-h_fun, h_fun, 1)
    dim = 3

    gamma = christoffel(g, coords)
    gup = contracted_gamma(g, gamma, coords)
    print("gauge wave: contracted Christoffels:", [sp.simplify(e) for e in gup])
    assert all(sp.simplify(e) == 0 for e in gup), "gauge wave is not harmonic"

    ric_std = ricci(g, coords, +1)
    print("gauge wave: Ricci (standard sign):", sp.simplify(ric_std))
    assert sp.simplify(ric_std) == sp.zeros(dim, dim), "standard Ricci not flat"

    ric_alt = ricci(g, coords, -1)
    nonzero = [(m, n) for m in range(dim) for n in range(dim)
               if sp.simplify(ric_alt[m, n]) != 0]
    print("gauge wave: Ricci (flipped Gamma*Gamma sign) nonzero entries:", nonzero)
    assert nonzero, "expected flipped-sign convention to fail on the gauge wave"

    source = harmonic_source(g, coords)
    ginv = g.inv()
    for m in range(dim):
        for n in range(dim):
            wave = sp.S(0)
            for a in range(dim):
                for b in range(dim):
                    wave += ginv[a, b] * sp.diff(g[m, n], coords[a], coords[b])
            resid = sp.simplify(wave - 2 * source[m, n])
            assert resid == 0, f"reduced system fails at ({m},{n}): {resid}"
    print("gauge wave: g^ab d_a d_b g_mn = 2 H_mn holds for all components")

    # Third first-order equation in evolution form, with the -g_00 prefactor
    # (equals 1/g^00 for this block-diagonal metric).
    for m in range(dim):
        for n in range(dim):
            h_mn = sp.diff(g[m, n], t)
            lhs = sp.diff(h_mn, t)
            rhs = -g[0, 0] * (
                2 * ginv[0, 1] * sp.diff(h_mn, x)
                + 2 * ginv[0, 2] * sp.diff(h_mn, y)
                + sum(
                    ginv[i, j] * sp.diff(g[m, n], coords[i], coords[j])
                    for i in (1, 2)
                    for j in (1, 2)
                )
                - 2 * source[m, n]
            )
            assert sp.simplify(lhs - rhs) == 0, f"first-order form fails at ({m},{n})"
    print("gauge wave: first-order evolution form holds for all components")


def check_static_profiles():
    t, x, y = sp.symbols("t x y", real=True)
    coords = [t, x, y]

    # General transverse perturbation P(x, y) on g_22: only the second
    # derivative along x survives in R; d^2/dy^2 and the mixed derivative
    # cancel identically. A radial P therefore puts the curvature
    # singularity at the origin alone.
    p2 = sp.Function("P")(x, y)
    general = sp.diag(-1, 1, 1 + p2)
    ric_g = ricci(general, coords, +1)
    ginv_g = general.inv()
    scal_g = sp.simplify(sum(ginv_g[m, n] * ric_g[m, n] for m in range(3) for n in range(3)))
    expected_g = sp.simplify(
        -sp.diff(p2, x, 2) / (1 + p2) + sp.diff(p2, x) ** 2 / (2 * (1 + p2) ** 2)
    )
    print("transverse static metric: R =", scal_g)
    assert sp.simplify(scal_g - expected_g) == 0, "closed-form scalar curvature mismatch"
    assert sp.simplify(sp.diff(scal_g, sp.diff(p2, y, 2))) == 0
    assert sp.simplify(sp.diff(scal_g, sp.diff(p2, x, y))) == 0

    p_fun = sp.Function("Q")(x)
    longitudinal = sp.diag(-1, 1 + p_fun, 1)
    ric_l = ricci(longitudinal, coords, +1)
    print("longitudinal static metric: Ricci =", sp.simplify(ric_l))
    assert sp.simplify(ric_l) == sp.zeros(3, 3), "longitudinal metric should be flat"


if __name__ == "__main__":
    check_gauge_wave()
    check_static_profiles()
    print("all symbolic checks passed")
