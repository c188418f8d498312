//! Pointwise tensor algebra for one space-time point: metric inverse,
//! Christoffel symbols and their contraction, the quadratic source of the
//! reduced (harmonic-gauge) system, and Lorentz-signature checks.
//!
//! Index 0 is time; space-time dimension is n + 1 with n at most 3, so all
//! storage is fixed-size and allocation-free. Time derivatives of the metric
//! are never formed here — callers supply them (the evolution carries
//! h = dg/dt as its own unknown), so curvature stays a pure diagnostic.

use nalgebra::DMatrix;

use crate::error::Error;
use crate::Result;

/// Maximum space-time dimension (n = 3 spatial).
pub const MAX_DIM: usize = 4;

/// Default determinant floor below which a metric counts as degenerate.
pub const EPS_DET: f64 = 1e-10;

/// Derivative stack: `d[rho][mu][nu]` holds the partial of g_{mu nu} along
/// direction rho, with rho = 0 the time direction.
pub type DerivStack = [[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM];

/// A symmetric space-time metric at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMetric {
    dim: usize,
    m: [[f64; MAX_DIM]; MAX_DIM],
}

impl PointMetric {
    /// Builds from a function of (mu, nu); only mu <= nu is consulted, the
    /// matrix is symmetrized exactly.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!((2..=MAX_DIM).contains(&dim));
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        for mu in 0..dim {
            for nu in mu..dim {
                let v = f(mu, nu);
                m[mu][nu] = v;
                m[nu][mu] = v;
            }
        }
        PointMetric { dim, m }
    }

    /// Flat metric diag(-1, 1, .., 1) in n + 1 dimensions.
    pub fn minkowski(n: usize) -> Self {
        PointMetric::from_fn(n + 1, |mu, nu| {
            if mu != nu {
                0.0
            } else if mu == 0 {
                -1.0
            } else {
                1.0
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, mu: usize, nu: usize) -> f64 {
        self.m[mu][nu]
    }

    pub fn set_sym(&mut self, mu: usize, nu: usize, v: f64) {
        self.m[mu][nu] = v;
        self.m[nu][mu] = v;
    }

    /// Determinant by cofactor-free pivoted elimination.
    pub fn det(&self) -> f64 {
        let mut a = self.m;
        let d = self.dim;
        let mut det = 1.0;
        for col in 0..d {
            let mut piv = col;
            for r in col + 1..d {
                if a[r][col].abs() > a[piv][col].abs() {
                    piv = r;
                }
            }
            if a[piv][col] == 0.0 {
                return 0.0;
            }
            if piv != col {
                a.swap(piv, col);
                det = -det;
            }
            det *= a[col][col];
            for r in col + 1..d {
                let factor = a[r][col] / a[col][col];
                for c in col..d {
                    a[r][c] -= factor * a[col][c];
                }
            }
        }
        det
    }

    /// Inverse via pivoted Gauss-Jordan elimination. Fails when |det| drops
    /// below `eps_det`; the caller attaches the grid location.
    pub fn invert(&self, eps_det: f64) -> Result<PointMetric> {
        let d = self.dim;
        let det = self.det();
        if det.abs() <= eps_det {
            return Err(Error::DegenerateMetric {
                det,
                eps: eps_det,
                index: Vec::new(),
            });
        }
        let mut a = self.m;
        let mut inv = [[0.0; MAX_DIM]; MAX_DIM];
        for (i, row) in inv.iter_mut().enumerate().take(d) {
            row[i] = 1.0;
        }
        for col in 0..d {
            let mut piv = col;
            for r in col + 1..d {
                if a[r][col].abs() > a[piv][col].abs() {
                    piv = r;
                }
            }
            if piv != col {
                a.swap(piv, col);
                inv.swap(piv, col);
            }
            let p = a[col][col];
            for c in 0..d {
                a[col][c] /= p;
                inv[col][c] /= p;
            }
            for r in 0..d {
                if r == col {
                    continue;
                }
                let factor = a[r][col];
                if factor == 0.0 {
                    continue;
                }
                for c in 0..d {
                    a[r][c] -= factor * a[col][c];
                    inv[r][c] -= factor * inv[col][c];
                }
            }
        }
        // Symmetrize: the inverse of a symmetric matrix is symmetric, but
        // elimination round-off breaks it at the last bit.
        let mut out = PointMetric {
            dim: d,
            m: [[0.0; MAX_DIM]; MAX_DIM],
        };
        for mu in 0..d {
            for nu in mu..d {
                out.set_sym(mu, nu, 0.5 * (inv[mu][nu] + inv[nu][mu]));
            }
        }
        Ok(out)
    }

    /// Max-norm of g * other - identity; residual check for inverses.
    pub fn product_residual(&self, other: &PointMetric) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += self.m[i][k] * other.m[k][j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    /// Eigenvalues of the symmetric matrix, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let d = self.dim;
        let mat = DMatrix::from_fn(d, d, |i, j| self.m[i][j]);
        let mut ev: Vec<f64> = mat.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }
}

/// Eigenvalue sign pattern and degeneracy margin of a symmetric metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignatureInfo {
    pub negative: usize,
    pub positive: usize,
    pub zero: usize,
    /// min |eigenvalue| — the distance from degeneracy.
    pub min_abs: f64,
}

impl SignatureInfo {
    /// True when the pattern is Lorentzian: exactly one negative eigenvalue,
    /// the rest positive.
    pub fn is_lorentzian(&self, dim: usize) -> bool {
        self.negative == 1 && self.positive == dim - 1 && self.zero == 0
    }
}

/// Counts eigenvalues by sign and reports the margin min |lambda|.
pub fn signature(g: &PointMetric) -> SignatureInfo {
    let mut info = SignatureInfo {
        negative: 0,
        positive: 0,
        zero: 0,
        min_abs: f64::INFINITY,
    };
    for ev in g.eigenvalues() {
        if ev == 0.0 {
            info.zero += 1;
        } else if ev < 0.0 {
            info.negative += 1;
        } else {
            info.positive += 1;
        }
        info.min_abs = info.min_abs.min(ev.abs());
    }
    info
}

/// Christoffel symbols of the second kind at one point, plus the contraction
/// Gamma^mu = g^{alpha beta} Gamma^mu_{alpha beta}.
#[derive(Debug, Clone, Copy)]
pub struct ChristoffelPoint {
    dim: usize,
    /// gamma[mu][alpha][beta], symmetric in (alpha, beta).
    gamma: [[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM],
    /// Contracted symbols Gamma^mu.
    pub contracted: [f64; MAX_DIM],
}

impl ChristoffelPoint {
    #[inline]
    pub fn get(&self, mu: usize, alpha: usize, beta: usize) -> f64 {
        self.gamma[mu][alpha][beta]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Trace Gamma^alpha_{alpha mu} (one upper against first lower).
    pub fn trace(&self, mu: usize) -> f64 {
        (0..self.dim).map(|a| self.gamma[a][a][mu]).sum()
    }
}

/// Gamma^mu_{alpha beta} = 1/2 g^{mu rho} (g_{rho alpha, beta}
/// + g_{rho beta, alpha} - g_{alpha beta, rho}), with dg[0] the time
/// derivative (that is, h) supplied by the caller.
pub fn christoffel(g_inv: &PointMetric, dg: &DerivStack) -> ChristoffelPoint {
    let d = g_inv.dim();
    let mut gamma = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
    for mu in 0..d {
        for alpha in 0..d {
            for beta in alpha..d {
                let mut s = 0.0;
                for rho in 0..d {
                    s += g_inv.get(mu, rho)
                        * (dg[beta][rho][alpha] + dg[alpha][rho][beta] - dg[rho][alpha][beta]);
                }
                let v = 0.5 * s;
                gamma[mu][alpha][beta] = v;
                gamma[mu][beta][alpha] = v;
            }
        }
    }
    let mut contracted = [0.0; MAX_DIM];
    for (mu, out) in contracted.iter_mut().enumerate().take(d) {
        let mut s = 0.0;
        for alpha in 0..d {
            for beta in 0..d {
                s += g_inv.get(alpha, beta) * gamma[mu][alpha][beta];
            }
        }
        *out = s;
    }
    ChristoffelPoint {
        dim: d,
        gamma,
        contracted,
    }
}

/// Quadratic source H_{mu nu} of the reduced system:
///
/// H_{mu nu} = g^{ab} g_{de} Gamma^d_{mu b} Gamma^e_{nu a}
///   + 1/2 ( dg_{mu nu, a} Gamma^a
///         + g_{nu r} Gamma^r_{ab} g^{ae} g^{bs} dg_{es, mu}
///         + g_{mu r} Gamma^r_{ab} g^{ae} g^{bs} dg_{es, nu} ).
///
/// Symmetric by construction. `dg` follows the same convention as in
/// [`christoffel`] (index 0 = time).
pub fn harmonic_source(
    g: &PointMetric,
    g_inv: &PointMetric,
    gamma: &ChristoffelPoint,
    dg: &DerivStack,
) -> [[f64; MAX_DIM]; MAX_DIM] {
    let d = g.dim();
    // raised[r][e][s] = Gamma^r_{ab} g^{ae} g^{bs}
    let mut raised = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
    for r in 0..d {
        for e in 0..d {
            for s in 0..d {
                let mut acc = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        acc += gamma.get(r, a, b) * g_inv.get(a, e) * g_inv.get(b, s);
                    }
                }
                raised[r][e][s] = acc;
            }
        }
    }
    let mut out = [[0.0; MAX_DIM]; MAX_DIM];
    for mu in 0..d {
        for nu in mu..d {
            let mut quad = 0.0;
            for a in 0..d {
                for b in 0..d {
                    let gab = g_inv.get(a, b);
                    if gab == 0.0 {
                        continue;
                    }
                    for dd in 0..d {
                        for e in 0..d {
                            quad += gab * g.get(dd, e) * gamma.get(dd, mu, b) * gamma.get(e, nu, a);
                        }
                    }
                }
            }
            let mut half = 0.0;
            for a in 0..d {
                half += dg[a][mu][nu] * gamma.contracted[a];
            }
            for r in 0..d {
                for e in 0..d {
                    for s in 0..d {
                        half += g.get(nu, r) * raised[r][e][s] * dg[mu][e][s];
                        half += g.get(mu, r) * raised[r][e][s] * dg[nu][e][s];
                    }
                }
            }
            let v = quad + 0.5 * half;
            out[mu][nu] = v;
            out[nu][mu] = v;
        }
    }
    out
}

/// Number of unknowns of the first-order system in n spatial dimensions:
/// (n+1)(n+2)^2 / 2 components across g, its spatial derivatives, and h.
pub fn unknown_count(n: usize) -> usize {
    assert!(n >= 1);
    (n + 1) * (n + 2) * (n + 2) / 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_nondegenerate(rng: &mut impl Rng, n: usize) -> PointMetric {
        // Flat plus a small random symmetric perturbation stays Lorentzian.
        let mut g = PointMetric::minkowski(n);
        for mu in 0..=n {
            for nu in mu..=n {
                g.set_sym(mu, nu, g.get(mu, nu) + 0.2 * rng.gen_range(-1.0..1.0));
            }
        }
        g
    }

    #[test]
    fn minkowski_is_self_inverse() {
        for n in 1..=3 {
            let g = PointMetric::minkowski(n);
            let inv = g.invert(EPS_DET).unwrap();
            assert_eq!(inv, g);
        }
    }

    #[test]
    fn diagonal_inverse() {
        let g = PointMetric::from_fn(3, |mu, nu| {
            if mu != nu {
                0.0
            } else {
                [-2.0, 0.5, 0.5][mu]
            }
        });
        let inv = g.invert(EPS_DET).unwrap();
        assert_abs_diff_eq!(inv.get(0, 0), -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(inv.get(1, 1), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(inv.get(2, 2), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn random_inverse_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=3 {
            for _ in 0..50 {
                let g = random_nondegenerate(&mut rng, n);
                let inv = g.invert(EPS_DET).unwrap();
                assert!(g.product_residual(&inv) < 1e-10);
            }
        }
    }

    #[test]
    fn degenerate_metric_is_rejected() {
        let g = PointMetric::from_fn(3, |mu, nu| if mu == nu && mu > 0 { 1.0 } else { 0.0 });
        match g.invert(EPS_DET) {
            Err(Error::DegenerateMetric { det, .. }) => assert!(det.abs() <= EPS_DET),
            other => panic!("expected degeneracy error, got {other:?}"),
        }
    }

    #[test]
    fn trace_identity_g_inv_g() {
        // g^{mu nu} g_{mu nu} = n + 1 for any nondegenerate metric.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=3 {
            for _ in 0..20 {
                let g = random_nondegenerate(&mut rng, n);
                let inv = g.invert(EPS_DET).unwrap();
                let mut tr = 0.0;
                for mu in 0..=n {
                    for nu in 0..=n {
                        tr += inv.get(mu, nu) * g.get(mu, nu);
                    }
                }
                assert_abs_diff_eq!(tr, (n + 1) as f64, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn flat_christoffels_vanish() {
        let g = PointMetric::minkowski(2);
        let inv = g.invert(EPS_DET).unwrap();
        let dg: DerivStack = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
        let gamma = christoffel(&inv, &dg);
        for mu in 0..3 {
            assert_eq!(gamma.contracted[mu], 0.0);
            for a in 0..3 {
                for b in 0..3 {
                    assert_eq!(gamma.get(mu, a, b), 0.0);
                }
            }
        }
    }

    #[test]
    fn christoffel_of_stretched_axis() {
        // g11 = 1 + eps*x1 frozen in time: Gamma^1_11 = eps / (2 (1 + eps x1)).
        let eps = 0.05;
        let x1 = 0.3;
        let g11 = 1.0 + eps * x1;
        let g = PointMetric::from_fn(3, |mu, nu| {
            if mu != nu {
                0.0
            } else {
                [-1.0, g11, 1.0][mu]
            }
        });
        let inv = g.invert(EPS_DET).unwrap();
        let mut dg: DerivStack = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
        dg[1][1][1] = eps;
        let gamma = christoffel(&inv, &dg);
        assert_abs_diff_eq!(gamma.get(1, 1, 1), eps / (2.0 * g11), epsilon = 1e-14);
    }

    #[test]
    fn christoffel_symmetric_in_lower_indices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_nondegenerate(&mut rng, 2);
        let inv = g.invert(EPS_DET).unwrap();
        let mut dg: DerivStack = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
        for r in 0..3 {
            for mu in 0..3 {
                for nu in mu..3 {
                    let v = rng.gen_range(-0.5..0.5);
                    dg[r][mu][nu] = v;
                    dg[r][nu][mu] = v;
                }
            }
        }
        let gamma = christoffel(&inv, &dg);
        for mu in 0..3 {
            for a in 0..3 {
                for b in 0..3 {
                    assert_eq!(gamma.get(mu, a, b), gamma.get(mu, b, a));
                }
            }
        }
    }

    #[test]
    fn flat_source_vanishes() {
        let g = PointMetric::minkowski(3);
        let inv = g.invert(EPS_DET).unwrap();
        let dg: DerivStack = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
        let gamma = christoffel(&inv, &dg);
        let h = harmonic_source(&g, &inv, &gamma, &dg);
        for row in h.iter().take(4) {
            for v in row.iter().take(4) {
                assert_eq!(*v, 0.0);
            }
        }
    }

    /// Independent re-implementation of the quadratic source with plain
    /// quintuple loops and no shared precomputation; oracle for the
    /// production path.
    fn harmonic_source_naive(
        g: &PointMetric,
        g_inv: &PointMetric,
        gamma: &ChristoffelPoint,
        dg: &DerivStack,
    ) -> [[f64; MAX_DIM]; MAX_DIM] {
        let d = g.dim();
        let mut out = [[0.0; MAX_DIM]; MAX_DIM];
        for mu in 0..d {
            for nu in 0..d {
                let mut v = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        for dd in 0..d {
                            for e in 0..d {
                                v += g_inv.get(a, b)
                                    * g.get(dd, e)
                                    * gamma.get(dd, mu, b)
                                    * gamma.get(e, nu, a);
                            }
                        }
                    }
                }
                let mut half = 0.0;
                for a in 0..d {
                    half += dg[a][mu][nu] * gamma.contracted[a];
                }
                for r in 0..d {
                    for a in 0..d {
                        for b in 0..d {
                            for e in 0..d {
                                for s in 0..d {
                                    half += g.get(nu, r)
                                        * gamma.get(r, a, b)
                                        * g_inv.get(a, e)
                                        * g_inv.get(b, s)
                                        * dg[mu][e][s];
                                    half += g.get(mu, r)
                                        * gamma.get(r, a, b)
                                        * g_inv.get(a, e)
                                        * g_inv.get(b, s)
                                        * dg[nu][e][s];
                                }
                            }
                        }
                    }
                }
                out[mu][nu] = v + 0.5 * half;
            }
        }
        out
    }

    #[test]
    fn source_matches_independent_implementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..30 {
            let g = random_nondegenerate(&mut rng, 2);
            let inv = g.invert(EPS_DET).unwrap();
            let mut dg: DerivStack = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
            for r in 0..3 {
                for mu in 0..3 {
                    for nu in mu..3 {
                        let v = rng.gen_range(-0.3..0.3);
                        dg[r][mu][nu] = v;
                        dg[r][nu][mu] = v;
                    }
                }
            }
            let gamma = christoffel(&inv, &dg);
            let fast = harmonic_source(&g, &inv, &gamma, &dg);
            let slow = harmonic_source_naive(&g, &inv, &gamma, &dg);
            for mu in 0..3 {
                for nu in 0..3 {
                    assert_abs_diff_eq!(fast[mu][nu], slow[mu][nu], epsilon = 1e-12);
                    assert_abs_diff_eq!(fast[mu][nu], fast[nu][mu], epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn source_with_vanishing_contraction_keeps_quadratic_terms() {
        // diag(-H, H, 1) has vanishing contracted symbols for any H(t, x),
        // so the dg * Gamma^a summand drops while the quadratic terms
        // survive. (A traveling H(x - t) would also null the quadratic
        // part — the sample must be "standing", ht != -hx.)
        let hw = 0.8; // H at the sample point
        let hx = 0.3; // dH/dx
        let ht = 0.25; // dH/dt
        let g = PointMetric::from_fn(3, |mu, nu| {
            if mu != nu {
                0.0
            } else {
                [-hw, hw, 1.0][mu]
            }
        });
        let inv = g.invert(EPS_DET).unwrap();
        let mut dg: DerivStack = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
        dg[0][0][0] = -ht;
        dg[0][1][1] = ht;
        dg[1][0][0] = -hx;
        dg[1][1][1] = hx;
        let gamma = christoffel(&inv, &dg);
        for mu in 0..3 {
            assert_abs_diff_eq!(gamma.contracted[mu], 0.0, epsilon = 1e-14);
        }
        assert!(gamma.get(1, 0, 0).abs() > 1e-3);
        let h = harmonic_source(&g, &inv, &gamma, &dg);
        assert!(h[0][0].abs() > 1e-4, "quadratic terms should survive");
    }

    #[test]
    fn signature_of_minkowski() {
        for n in 1..=3 {
            let info = signature(&PointMetric::minkowski(n));
            assert_eq!((info.negative, info.positive), (1, n));
            assert_abs_diff_eq!(info.min_abs, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn signature_of_diagonal_sample() {
        let g = PointMetric::from_fn(3, |mu, nu| {
            if mu != nu {
                0.0
            } else {
                [-0.5, 2.0, 3.0][mu]
            }
        });
        let info = signature(&g);
        assert_eq!((info.negative, info.positive), (1, 2));
        assert_abs_diff_eq!(info.min_abs, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn signature_flags_zero_eigenvalue() {
        let g = PointMetric::from_fn(3, |mu, nu| {
            if mu != nu {
                0.0
            } else {
                [-1.0, 0.0, 1.0][mu]
            }
        });
        let info = signature(&g);
        assert_eq!(info.min_abs, 0.0);
        assert!(!info.is_lorentzian(3));
    }

    #[test]
    fn unknown_counts() {
        assert_eq!(unknown_count(3), 50);
        assert_eq!(unknown_count(2), 24);
        assert_eq!(unknown_count(1), 9);
    }
}
