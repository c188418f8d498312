//! Field-level containers: symmetric tensor component fields over the grid,
//! metric slices with cached inverses and first derivatives, and space-time
//! histories of the first-order unknowns (g, g_,k, h).
//!
//! Symmetric pairs (mu <= nu) are stored once; all pointwise algebra goes
//! through [`crate::tensor`].

use serde::Serialize;

use crate::error::Error;
use crate::grid::{GridSpec, ScalarGridField, TimeGrid};
use crate::tensor::{self, ChristoffelPoint, DerivStack, PointMetric, MAX_DIM};
use crate::Result;

/// Triangular indexing for symmetric (mu, nu) pairs in `dim` space-time
/// dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymIndex {
    pub dim: usize,
}

impl SymIndex {
    pub fn new(dim: usize) -> Self {
        assert!((2..=MAX_DIM).contains(&dim));
        SymIndex { dim }
    }

    /// Number of independent components, dim (dim + 1) / 2.
    pub fn count(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    /// Flat index of the pair (mu, nu); arguments may come in either order.
    pub fn flat(&self, mu: usize, nu: usize) -> usize {
        let (mu, nu) = if mu <= nu { (mu, nu) } else { (nu, mu) };
        mu * self.dim - mu * (mu + 1) / 2 + nu
    }

    /// All pairs (mu <= nu) in flat order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.count());
        for mu in 0..self.dim {
            for nu in mu..self.dim {
                out.push((mu, nu));
            }
        }
        out
    }
}

/// One symmetric space-time tensor sampled over the spatial grid, stored as
/// one scalar field per independent component.
#[derive(Debug, Clone)]
pub struct SymFields {
    pub grid: GridSpec,
    pub sym: SymIndex,
    comps: Vec<ScalarGridField>,
}

impl SymFields {
    pub fn zeros(grid: GridSpec, dim: usize) -> Self {
        let sym = SymIndex::new(dim);
        SymFields {
            grid,
            sym,
            comps: (0..sym.count()).map(|_| ScalarGridField::zeros(grid)).collect(),
        }
    }

    /// Samples each component from a function of (mu, nu, position).
    pub fn from_fn(grid: GridSpec, dim: usize, mut f: impl FnMut(usize, usize, &[f64]) -> f64) -> Self {
        let sym = SymIndex::new(dim);
        let comps = sym
            .pairs()
            .into_iter()
            .map(|(mu, nu)| ScalarGridField::from_fn(grid, |x| f(mu, nu, x)))
            .collect();
        SymFields { grid, sym, comps }
    }

    /// Constant flat metric diag(-1, 1, .., 1).
    pub fn minkowski(grid: GridSpec) -> Self {
        let dim = grid.n + 1;
        SymFields::from_fn(grid, dim, |mu, nu, _| {
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
        self.sym.dim
    }

    pub fn comp(&self, mu: usize, nu: usize) -> &ScalarGridField {
        &self.comps[self.sym.flat(mu, nu)]
    }

    pub fn comp_mut(&mut self, mu: usize, nu: usize) -> &mut ScalarGridField {
        let i = self.sym.flat(mu, nu);
        &mut self.comps[i]
    }

    pub fn components(&self) -> &[ScalarGridField] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [ScalarGridField] {
        &mut self.comps
    }

    /// Gathers the tensor at one (linear) grid index.
    pub fn point(&self, linear: usize) -> PointMetric {
        PointMetric::from_fn(self.sym.dim, |mu, nu| {
            self.comps[self.sym.flat(mu, nu)].as_slice()[linear]
        })
    }

    /// Writes the symmetric matrix `m` at one linear grid index.
    pub fn set_point(&mut self, linear: usize, m: &[[f64; MAX_DIM]; MAX_DIM]) {
        for (flat, (mu, nu)) in self.sym.pairs().into_iter().enumerate() {
            self.comps[flat].as_slice_mut()[linear] = m[mu][nu];
        }
    }

    pub fn sup_distance(&self, other: &SymFields) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.sup_distance(b))
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.comps.iter().map(|c| c.sup_norm()).fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.comps.iter().all(|c| c.all_finite())
    }
}

/// Converts a linear index into the grid multi-index (row-major).
pub fn unravel(grid: &GridSpec, mut linear: usize) -> Vec<usize> {
    let mut idx = vec![0usize; grid.n];
    for a in (0..grid.n).rev() {
        idx[a] = linear % grid.points;
        linear /= grid.points;
    }
    idx
}

/// Metric data on one time slice: components, cached pointwise inverse, and
/// first spatial derivatives.
#[derive(Debug, Clone)]
pub struct MetricSlice {
    pub grid: GridSpec,
    pub g: SymFields,
    pub g_inv: SymFields,
    /// dg[k] holds the derivatives along spatial axis k (0-based).
    pub dg: Vec<SymFields>,
    pub eps_det: f64,
}

impl MetricSlice {
    /// Builds the slice, inverting the metric at every grid point.
    pub fn build(g: SymFields, dg: Vec<SymFields>, eps_det: f64) -> Result<Self> {
        let grid = g.grid;
        assert_eq!(dg.len(), grid.n, "one derivative set per spatial axis");
        let g_inv = invert_fields(&g, eps_det)?;
        Ok(MetricSlice {
            grid,
            g,
            g_inv,
            dg,
            eps_det,
        })
    }
}

/// Pointwise inverse of a metric field; the error carries the grid location.
pub fn invert_fields(g: &SymFields, eps_det: f64) -> Result<SymFields> {
    let mut out = SymFields::zeros(g.grid, g.dim());
    for linear in 0..g.grid.len() {
        let gp = g.point(linear);
        let inv = gp.invert(eps_det).map_err(|e| match e {
            Error::DegenerateMetric { det, eps, .. } => Error::DegenerateMetric {
                det,
                eps,
                index: unravel(&g.grid, linear),
            },
            other => other,
        })?;
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        for mu in 0..g.dim() {
            for nu in 0..g.dim() {
                m[mu][nu] = inv.get(mu, nu);
            }
        }
        out.set_point(linear, &m);
    }
    Ok(out)
}

/// Uniform Lorentz margin of one slice: the minimum over grid points of
/// min |eigenvalue|, with the requirement that every point shows exactly one
/// negative eigenvalue. Returns 0 margin when the count fails anywhere.
#[derive(Debug, Clone, Serialize)]
pub struct LorentzMargin {
    pub margin: f64,
    pub lorentzian_everywhere: bool,
    /// Grid index of the first point violating the eigenvalue count, if any.
    pub first_violation: Option<Vec<usize>>,
    /// Auxiliary statistic: inf and sup over the grid of
    /// |lambda_neg| / sum(lambda_pos), an eigenvalue surrogate for the
    /// quadratic-form ratio condition.
    pub ratio_inf: f64,
    pub ratio_sup: f64,
}

pub fn lorentz_margin(g: &SymFields) -> LorentzMargin {
    let dim = g.dim();
    let mut margin = f64::INFINITY;
    let mut ok = true;
    let mut first_violation = None;
    let mut ratio_inf = f64::INFINITY;
    let mut ratio_sup: f64 = 0.0;
    for linear in 0..g.grid.len() {
        let info = tensor::signature(&g.point(linear));
        margin = margin.min(info.min_abs);
        if !info.is_lorentzian(dim) {
            ok = false;
            if first_violation.is_none() {
                first_violation = Some(unravel(&g.grid, linear));
            }
        }
        let ev = g.point(linear).eigenvalues();
        let neg: f64 = ev.iter().filter(|v| **v < 0.0).map(|v| v.abs()).sum();
        let pos: f64 = ev.iter().filter(|v| **v > 0.0).sum();
        if pos > 0.0 {
            let r = neg / pos;
            ratio_inf = ratio_inf.min(r);
            ratio_sup = ratio_sup.max(r);
        }
    }
    LorentzMargin {
        margin: if ok { margin } else { 0.0 },
        lorentzian_everywhere: ok,
        first_violation,
        ratio_inf,
        ratio_sup,
    }
}

/// Space-time history of the first-order unknowns over a time grid.
#[derive(Debug, Clone)]
pub struct FieldsHistory {
    pub grid: GridSpec,
    pub time: TimeGrid,
    /// Metric components per slice.
    pub g: Vec<SymFields>,
    /// Spatial-derivative components per slice: dg[m][k].
    pub dg: Vec<Vec<SymFields>>,
    /// Time-derivative components per slice.
    pub h: Vec<SymFields>,
}

impl FieldsHistory {
    pub fn zeros(grid: GridSpec, time: TimeGrid) -> Self {
        let dim = grid.n + 1;
        let slices = time.slices();
        FieldsHistory {
            grid,
            time,
            g: (0..slices).map(|_| SymFields::zeros(grid, dim)).collect(),
            dg: (0..slices)
                .map(|_| (0..grid.n).map(|_| SymFields::zeros(grid, dim)).collect())
                .collect(),
            h: (0..slices).map(|_| SymFields::zeros(grid, dim)).collect(),
        }
    }

    pub fn slices(&self) -> usize {
        self.g.len()
    }

    pub fn all_finite(&self) -> bool {
        self.g.iter().all(SymFields::all_finite)
            && self.h.iter().all(SymFields::all_finite)
            && self.dg.iter().flatten().all(SymFields::all_finite)
    }

    /// Sup distance across every family and slice.
    pub fn sup_distance(&self, other: &FieldsHistory) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, b) in self.g.iter().zip(&other.g) {
            worst = worst.max(a.sup_distance(b));
        }
        for (a, b) in self.h.iter().zip(&other.h) {
            worst = worst.max(a.sup_distance(b));
        }
        for (da, db) in self.dg.iter().zip(&other.dg) {
            for (a, b) in da.iter().zip(db) {
                worst = worst.max(a.sup_distance(b));
            }
        }
        worst
    }
}

/// Per-slice Christoffel data as grid fields.
pub struct GammaFields {
    pub grid: GridSpec,
    pub sym: SymIndex,
    /// gamma[mu][flat(a,b)]
    pub gamma: Vec<Vec<ScalarGridField>>,
    /// Contracted symbols Gamma^mu = g^{ab} Gamma^mu_{ab}.
    pub contracted: Vec<ScalarGridField>,
    /// Traces Gamma^a_{a mu}.
    pub trace: Vec<ScalarGridField>,
}

/// Assembles the derivative stack at one linear index from stored fields.
#[inline]
pub fn deriv_stack_at(
    dg: &[SymFields],
    h: &SymFields,
    sym: &SymIndex,
    linear: usize,
) -> DerivStack {
    let mut out: DerivStack = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
    let dim = sym.dim;
    for (flat, (mu, nu)) in sym.pairs().into_iter().enumerate() {
        let hv = h.components()[flat].as_slice()[linear];
        out[0][mu][nu] = hv;
        out[0][nu][mu] = hv;
        for (k, dgk) in dg.iter().enumerate() {
            let v = dgk.components()[flat].as_slice()[linear];
            out[k + 1][mu][nu] = v;
            out[k + 1][nu][mu] = v;
        }
    }
    debug_assert!(dim <= MAX_DIM);
    out
}

/// Computes Christoffel fields for one slice (needs the cached inverse).
pub fn gamma_fields(g_inv: &SymFields, dg: &[SymFields], h: &SymFields) -> GammaFields {
    let grid = g_inv.grid;
    let sym = g_inv.sym;
    let dim = sym.dim;
    let mut gamma: Vec<Vec<ScalarGridField>> = (0..dim)
        .map(|_| (0..sym.count()).map(|_| ScalarGridField::zeros(grid)).collect())
        .collect();
    let mut contracted: Vec<ScalarGridField> =
        (0..dim).map(|_| ScalarGridField::zeros(grid)).collect();
    let mut trace: Vec<ScalarGridField> =
        (0..dim).map(|_| ScalarGridField::zeros(grid)).collect();
    let pairs = sym.pairs();
    for linear in 0..grid.len() {
        let ginv_pt = g_inv.point(linear);
        let stack = deriv_stack_at(dg, h, &sym, linear);
        let gp: ChristoffelPoint = tensor::christoffel(&ginv_pt, &stack);
        for mu in 0..dim {
            for (flat, (a, b)) in pairs.iter().enumerate() {
                gamma[mu][flat].as_slice_mut()[linear] = gp.get(mu, *a, *b);
            }
            contracted[mu].as_slice_mut()[linear] = gp.contracted[mu];
            trace[mu].as_slice_mut()[linear] = gp.trace(mu);
        }
    }
    GammaFields {
        grid,
        sym,
        gamma,
        contracted,
        trace,
    }
}

/// Computes the quadratic source H_{mu nu} for one slice as fields.
pub fn source_fields(
    g: &SymFields,
    g_inv: &SymFields,
    dg: &[SymFields],
    h: &SymFields,
) -> SymFields {
    let grid = g.grid;
    let sym = g.sym;
    let mut out = SymFields::zeros(grid, sym.dim);
    for linear in 0..grid.len() {
        let gp = g.point(linear);
        let ginv_pt = g_inv.point(linear);
        let stack = deriv_stack_at(dg, h, &sym, linear);
        let gamma = tensor::christoffel(&ginv_pt, &stack);
        let hsrc = tensor::harmonic_source(&gp, &ginv_pt, &gamma, &stack);
        out.set_point(linear, &hsrc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn sym_index_roundtrip() {
        for dim in 2..=4 {
            let sym = SymIndex::new(dim);
            let pairs = sym.pairs();
            assert_eq!(pairs.len(), sym.count());
            for (flat, (mu, nu)) in pairs.iter().enumerate() {
                assert_eq!(sym.flat(*mu, *nu), flat);
                assert_eq!(sym.flat(*nu, *mu), flat);
            }
        }
    }

    #[test]
    fn unravel_roundtrip() {
        let g = make_grid(2, 16, 1.0, false).unwrap();
        for linear in [0usize, 1, 15, 16, 255] {
            let idx = unravel(&g, linear);
            let back = idx[0] * g.points + idx[1];
            assert_eq!(back, linear);
        }
    }

    #[test]
    fn minkowski_slice_margin() {
        let grid = make_grid(2, 16, 1.0, true).unwrap();
        let g = SymFields::minkowski(grid);
        let m = lorentz_margin(&g);
        assert!(m.lorentzian_everywhere);
        assert!((m.margin - 1.0).abs() < 1e-12);
    }

    #[test]
    fn margin_zero_on_signature_flip() {
        let grid = make_grid(1, 16, 1.0, true).unwrap();
        let mut g = SymFields::minkowski(grid);
        // Flip the spatial eigenvalue at one point.
        g.comp_mut(1, 1).as_slice_mut()[3] = -0.5;
        let m = lorentz_margin(&g);
        assert!(!m.lorentzian_everywhere);
        assert_eq!(m.margin, 0.0);
        assert_eq!(m.first_violation, Some(vec![3]));
    }

    #[test]
    fn flat_gamma_fields_vanish() {
        let grid = make_grid(2, 16, 1.0, true).unwrap();
        let g = SymFields::minkowski(grid);
        let g_inv = invert_fields(&g, 1e-10).unwrap();
        let dg: Vec<SymFields> = (0..grid.n).map(|_| SymFields::zeros(grid, 3)).collect();
        let h = SymFields::zeros(grid, 3);
        let gf = gamma_fields(&g_inv, &dg, &h);
        for mu in 0..3 {
            assert_eq!(gf.contracted[mu].sup_norm(), 0.0);
            for f in &gf.gamma[mu] {
                assert_eq!(f.sup_norm(), 0.0);
            }
        }
        let src = source_fields(&g, &g_inv, &dg, &h);
        assert_eq!(src.sup_norm(), 0.0);
    }
}
