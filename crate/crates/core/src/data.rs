//! Construction of the singular Cauchy data: the C^{1,δ}-but-not-C² profile,
//! smooth mollifiers, flat-plus-perturbation metrics, and the admissibility
//! report that gates the evolution.
//!
//! Naming: `plateau_radius`/`support_radius` are the mollifier radii,
//! `amplitude` is the perturbation size, and Hölder exponents are passed
//! explicitly where they appear — three different roles, three different
//! names.
//!
//! The phase cos(1/z^α) is ill-defined for z < 0 with fractional α; this
//! module uses cos(|z|^{-α}) throughout, which preserves every stated
//! derivative and regularity property (the cubic factor keeps the profile
//! odd around the origin aside from the constant offset).

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fields::{self, LorentzMargin, MetricSlice, SymFields};
use crate::grid::{self, GridSpec, ScalarGridField};
use crate::tensor::EPS_DET;
use crate::Result;

/// Parameters of the singular profile f(z) = (C + z³ cos|z|^{-α}) φ(z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularProfileParams {
    /// Offset constant C > 0.
    pub offset: f64,
    /// Singularity exponent α in (0.5, 1).
    pub alpha: f64,
    /// Inner mollifier radius: φ ≡ 1 on |z| <= plateau_radius.
    pub plateau_radius: f64,
    /// Outer mollifier radius: φ ≡ 0 on |z| >= support_radius.
    pub support_radius: f64,
}

impl SingularProfileParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.5 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "singularity exponent must lie in (0.5, 1), got {}",
                self.alpha
            )));
        }
        if !(self.offset > 0.0) {
            return Err(Error::Config(format!(
                "profile offset must be positive, got {}",
                self.offset
            )));
        }
        if !(self.plateau_radius > 0.0 && self.plateau_radius < self.support_radius) {
            return Err(Error::Config(format!(
                "need 0 < plateau_radius < support_radius, got {} and {}",
                self.plateau_radius, self.support_radius
            )));
        }
        Ok(())
    }

    fn fits_in(&self, grid: &GridSpec) -> Result<()> {
        if self.support_radius >= grid.half_width {
            return Err(Error::Config(format!(
                "support radius {} does not fit inside the box (L = {})",
                self.support_radius, grid.half_width
            )));
        }
        Ok(())
    }
}

impl Default for SingularProfileParams {
    fn default() -> Self {
        SingularProfileParams {
            offset: 1.0,
            alpha: 0.75,
            plateau_radius: 0.4,
            support_radius: 0.8,
        }
    }
}

fn psi(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// Smooth transition built from the classic exp(-1/u) factor: 0 for u <= 0,
/// 1 for u >= 1, strictly increasing in between.
fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = psi(u);
        a / (a + psi(1.0 - u))
    }
}

/// C^∞ mollifier: exactly 1 on |z| <= plateau, exactly 0 on |z| >= support,
/// strictly monotone in between.
pub fn bump(z: f64, plateau: f64, support: f64) -> f64 {
    debug_assert!(plateau > 0.0 && plateau < support);
    smooth_step((support - z.abs()) / (support - plateau))
}

/// The singular profile f(z) = (C + z³ cos|z|^{-α}) φ(z), with f(0) = C.
pub fn singular_profile(z: f64, p: &SingularProfileParams) -> f64 {
    let phi = bump(z, p.plateau_radius, p.support_radius);
    if phi == 0.0 {
        return 0.0;
    }
    (p.offset + cubic_part(z, p.alpha)) * phi
}

fn cubic_part(z: f64, alpha: f64) -> f64 {
    if z == 0.0 {
        0.0
    } else {
        z.powi(3) * z.abs().powf(-alpha).cos()
    }
}

/// First derivative of f on the plateau (φ ≡ 1 there, so the mollifier does
/// not contribute): f'(z) = 3z² cos|z|^{-α} + α |z|^{2-α} sin|z|^{-α},
/// an even function with f'(0) = 0.
pub fn singular_profile_d1(z: f64, p: &SingularProfileParams) -> f64 {
    debug_assert!(z.abs() <= p.plateau_radius + 1e-12);
    if z == 0.0 {
        return 0.0;
    }
    let u = z.abs();
    let w = u.powf(-p.alpha);
    3.0 * z * z * w.cos() + p.alpha * u.powf(2.0 - p.alpha) * w.sin()
}

/// Closed-form second derivative of f on the plateau, undefined at z = 0:
///
///   f''(z) = sign(z) [ 6|z| cos w + (3α + α(2-α)) |z|^{1-α} sin w
///                      - α² |z|^{1-2α} cos w ],   w = |z|^{-α}.
///
/// The last term is the only singular one; its magnitude envelope is
/// α² |z|^{1-2α} with exponent 1 - 2α in (-0.5, 0).
pub fn singular_profile_d2(z: f64, p: &SingularProfileParams) -> Result<f64> {
    if z == 0.0 {
        return Err(Error::UndefinedPoint);
    }
    debug_assert!(z.abs() <= p.plateau_radius + 1e-12);
    let a = p.alpha;
    let u = z.abs();
    let w = u.powf(-a);
    let val = 6.0 * u * w.cos() + (3.0 * a + a * (2.0 - a)) * u.powf(1.0 - a) * w.sin()
        - a * a * u.powf(1.0 - 2.0 * a) * w.cos();
    Ok(z.signum() * val)
}

/// How the univariate profile is applied to the flat metric.
///
/// `Radial` feeds the profile the Euclidean radius and perturbs a transverse
/// diagonal component (g₂₂ for n >= 2): the only second derivatives of the
/// perturbation that survive in the Ricci tensor are the transverse ones, so
/// the curvature blows up exactly at the origin and nowhere else — the
/// one-bad-point structure every diagnostic assumes.
///
/// `Longitudinal` perturbs g₁₁ with the profile in x¹; all of its second
/// derivatives cancel identically (the metric is flat for any univariate
/// profile — verified symbolically), which makes it the curvature-trivial
/// control case, and the only option in n = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Radial,
    Longitudinal,
}

impl Orientation {
    /// The perturbed diagonal component index (spatial), given n.
    fn component(&self, n: usize) -> usize {
        match self {
            Orientation::Longitudinal => 1,
            Orientation::Radial => {
                if n >= 2 {
                    2
                } else {
                    1
                }
            }
        }
    }

    fn profile_argument(&self, x: &[f64]) -> f64 {
        match self {
            Orientation::Longitudinal => x[0],
            Orientation::Radial => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }
}

/// Initial time-derivative choice for the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum TimeDerivativeMode {
    /// Time-symmetric data, h0 ≡ 0.
    Zero,
    /// Smooth compactly supported field on the perturbed component.
    SmoothBump { amplitude: f64 },
}

/// The admissibility report attached to every data list.
#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub lorentz: LorentzMargin,
    pub margin_required: f64,
    /// Sobolev order used for the norms (must exceed n/2 + 1).
    pub sobolev_order: f64,
    /// Discrete H^s norm per metric component (flat symmetric order).
    pub g_sobolev: Vec<f64>,
    /// Discrete H^s norm per h component.
    pub h_sobolev: Vec<f64>,
    /// max over component pairs of sup |g_{μν}(x) g^{λρ}(x)|.
    pub product_bound: f64,
    /// sup over components and axes of |stored dg - spectral derivative of g|.
    pub dg_consistency: f64,
    pub passed: bool,
    pub failure: Option<String>,
}

/// The Cauchy data triple (g0, h0, g0_,k) with its admissibility report.
#[derive(Debug, Clone)]
pub struct DataList {
    pub slice: MetricSlice,
    pub h0: SymFields,
    pub admissibility: AdmissibilityReport,
    /// Profile parameters when the data came from the singular builder.
    pub profile: Option<(SingularProfileParams, f64, Orientation)>,
}

impl DataList {
    pub fn grid(&self) -> GridSpec {
        self.slice.grid
    }

    /// Builds a data list from explicit metric and time-derivative fields;
    /// spatial derivatives are spectral. The admissibility report is always
    /// produced — callers gate on its flags.
    pub fn from_metric_fields(g: SymFields, h0: SymFields, sobolev_order: f64) -> Result<DataList> {
        let grid = g.grid;
        let margin = fields::lorentz_margin(&g);
        let dg: Vec<SymFields> = (0..grid.n)
            .map(|k| {
                let mut d = SymFields::zeros(grid, g.dim());
                for (i, c) in g.components().iter().enumerate() {
                    d.components_mut()[i] = grid::spatial_derivative(c, k);
                }
                d
            })
            .collect();
        // A signature flip need not make the matrix singular; keep building
        // so the failed report can locate the bad point.
        let slice = MetricSlice::build(g, dg, EPS_DET)?;
        let mut list = DataList {
            slice,
            h0,
            admissibility: AdmissibilityReport {
                lorentz: margin,
                margin_required: 0.0,
                sobolev_order,
                g_sobolev: Vec::new(),
                h_sobolev: Vec::new(),
                product_bound: f64::NAN,
                dg_consistency: f64::NAN,
                passed: false,
                failure: None,
            },
        profile: None,
        };
        list.admissibility = check_admissible(&list, sobolev_order, 0.0)?;
        Ok(list)
    }
}

/// Default required uniform Lorentz margin for the singular builder.
pub const DEFAULT_MARGIN_REQUIRED: f64 = 0.5;

/// Builds the flat-plus-singular-profile data: the perturbed diagonal
/// component receives amp · φ(z) · f(z) with z the orientation's profile
/// argument (the radius by default), h0 follows the requested mode, and dg
/// is spectral except on the plateau, where the closed-form derivative
/// replaces it (the one region where the spectral route converges slowly).
///
/// Fails with a rejected-data error when the uniform Lorentz margin drops
/// below `DEFAULT_MARGIN_REQUIRED` or a signature count fails anywhere.
pub fn build_singular_data(
    grid: GridSpec,
    p: &SingularProfileParams,
    amplitude: f64,
    orientation: Orientation,
    h0_mode: TimeDerivativeMode,
) -> Result<DataList> {
    p.validate()?;
    p.fits_in(&grid)?;
    let dim = grid.n + 1;
    let comp = orientation.component(grid.n);

    let mut g = SymFields::minkowski(grid);
    {
        let perturbed = g.comp_mut(comp, comp);
        let bumped = ScalarGridField::from_fn(grid, |x| {
            let z = orientation.profile_argument(x);
            amplitude * bump(z, p.plateau_radius, p.support_radius) * singular_profile(z, p)
        });
        *perturbed = perturbed.add(&bumped);
    }

    let margin = fields::lorentz_margin(&g);
    if !margin.lorentzian_everywhere || margin.margin < DEFAULT_MARGIN_REQUIRED {
        return Err(Error::RejectedData {
            achieved: margin.margin,
            required: DEFAULT_MARGIN_REQUIRED,
        });
    }

    let h0 = match h0_mode {
        TimeDerivativeMode::Zero => SymFields::zeros(grid, dim),
        TimeDerivativeMode::SmoothBump { amplitude: ha } => {
            let mut h = SymFields::zeros(grid, dim);
            *h.comp_mut(comp, comp) = ScalarGridField::from_fn(grid, |x| {
                let z = orientation.profile_argument(x);
                ha * bump(z, p.plateau_radius, p.support_radius)
            });
            h
        }
    };

    // Spectral derivatives everywhere, then the closed form on the plateau
    // of the perturbed component.
    let mut dg: Vec<SymFields> = (0..grid.n)
        .map(|k| {
            let mut d = SymFields::zeros(grid, dim);
            for (i, c) in g.components().iter().enumerate() {
                d.components_mut()[i] = grid::spatial_derivative(c, k);
            }
            d
        })
        .collect();
    {
        let shape = grid.shape();
        let mut idx = vec![0usize; grid.n];
        let mut pos = vec![0.0f64; grid.n];
        for linear in 0..grid.len() {
            let mut rem = linear;
            for a in (0..grid.n).rev() {
                idx[a] = rem % shape[a];
                rem /= shape[a];
            }
            for (a, v) in pos.iter_mut().enumerate() {
                *v = grid.coord(idx[a]);
            }
            let z = orientation.profile_argument(&pos);
            if z.abs() > p.plateau_radius || z == 0.0 {
                continue;
            }
            let df = amplitude * singular_profile_d1(z, p);
            match orientation {
                Orientation::Longitudinal => {
                    dg[0].comp_mut(comp, comp).as_slice_mut()[linear] = df;
                }
                Orientation::Radial => {
                    // d/dx_k f(r) = f'(r) x_k / r on every axis.
                    for (k, dgk) in dg.iter_mut().enumerate() {
                        dgk.comp_mut(comp, comp).as_slice_mut()[linear] = df * pos[k] / z;
                    }
                }
            }
        }
    }

    let slice = MetricSlice::build(g, dg, EPS_DET)?;
    let sobolev_order = grid.n as f64 / 2.0 + 1.1;
    let mut list = DataList {
        slice,
        h0,
        admissibility: AdmissibilityReport {
            lorentz: margin,
            margin_required: DEFAULT_MARGIN_REQUIRED,
            sobolev_order,
            g_sobolev: Vec::new(),
            h_sobolev: Vec::new(),
            product_bound: f64::NAN,
            dg_consistency: f64::NAN,
            passed: false,
            failure: None,
        },
        profile: Some((*p, amplitude, orientation)),
    };
    list.admissibility = check_admissible(&list, sobolev_order, DEFAULT_MARGIN_REQUIRED)?;
    Ok(list)
}

/// Smooth control data: flat metric plus amp · φ(x¹) on a diagonal
/// component. Used for time-symmetry and linearization checks.
pub fn build_bump_data(
    grid: GridSpec,
    plateau: f64,
    support: f64,
    amplitude: f64,
    component: (usize, usize),
) -> Result<DataList> {
    let dim = grid.n + 1;
    let mut g = SymFields::minkowski(grid);
    {
        let target = g.comp_mut(component.0, component.1);
        let bumped = ScalarGridField::from_fn(grid, |x| amplitude * bump(x[0], plateau, support));
        *target = target.add(&bumped);
    }
    let h0 = SymFields::zeros(grid, dim);
    DataList::from_metric_fields(g, h0, grid.n as f64 / 2.0 + 1.1)
}

/// Produces the admissibility report: uniform Lorentz margin, discrete H^s
/// norms of every component of g0 and h0, the sup bound on products
/// g_{μν} g^{λρ}, and the consistency of the stored first derivatives with
/// spectral differentiation.
pub fn check_admissible(d: &DataList, s: f64, margin_required: f64) -> Result<AdmissibilityReport> {
    let n = d.grid().n;
    if s <= n as f64 / 2.0 + 1.0 {
        return Err(Error::Config(format!(
            "Sobolev order must exceed n/2 + 1 = {}, got {s}",
            n as f64 / 2.0 + 1.0
        )));
    }
    let lorentz = fields::lorentz_margin(&d.slice.g);
    let g_sobolev: Vec<f64> = d
        .slice
        .g
        .components()
        .iter()
        .map(|c| grid::sobolev_norm(c, s))
        .collect();
    let h_sobolev: Vec<f64> = d
        .h0
        .components()
        .iter()
        .map(|c| grid::sobolev_norm(c, s))
        .collect();

    let mut product_bound: f64 = 0.0;
    for gc in d.slice.g.components() {
        for ic in d.slice.g_inv.components() {
            let sup = gc
                .as_slice()
                .iter()
                .zip(ic.as_slice())
                .fold(0.0f64, |m, (a, b)| m.max((a * b).abs()));
            product_bound = product_bound.max(sup);
        }
    }

    let mut dg_consistency: f64 = 0.0;
    for (k, dgk) in d.slice.dg.iter().enumerate() {
        for (i, c) in d.slice.g.components().iter().enumerate() {
            let spectral = grid::spatial_derivative(c, k);
            dg_consistency = dg_consistency.max(spectral.sup_distance(&dgk.components()[i]));
        }
    }

    let finite = g_sobolev.iter().chain(&h_sobolev).all(|v| v.is_finite())
        && product_bound.is_finite();
    let mut failure = None;
    if !lorentz.lorentzian_everywhere {
        failure = Some(format!(
            "signature count fails at grid index {:?}",
            lorentz.first_violation
        ));
    } else if lorentz.margin < margin_required {
        failure = Some(format!(
            "Lorentz margin {} below required {}",
            lorentz.margin, margin_required
        ));
    } else if !finite {
        failure = Some("non-finite norm in admissibility check".to_string());
    }
    Ok(AdmissibilityReport {
        passed: failure.is_none(),
        lorentz,
        margin_required,
        sobolev_order: s,
        g_sobolev,
        h_sobolev,
        product_bound,
        dg_consistency,
        failure,
    })
}
