//! Curvature history, blow-up exponent fitting, generalized-affine-parameter
//! curve lengths, and constraint/signature monitors.
//!
//! Curvature is a pure diagnostic: it reads stored histories and never feeds
//! back into the evolution. Time derivatives of the Christoffel fields use
//! second-order differences across stored slices (one-sided at the ends), so
//! a history of identical slices has exactly vanishing time terms — static
//! data can be probed by replicating its slice.

use serde::Serialize;

use crate::data::DataList;
use crate::error::Error;
use crate::fields::{self, FieldsHistory, GammaFields, SymFields};
use crate::grid::{self, ScalarGridField, TimeGrid};
use crate::picard::exclusion_mask;
use crate::tensor::EPS_DET;
use crate::Result;

/// Scalar curvature and (symmetrized) Ricci components on one slice.
pub struct CurvatureSlice {
    pub scalar: ScalarGridField,
    /// Ricci components in symmetric flat order.
    pub ricci: SymFields,
    /// sup of the antisymmetric part before symmetrization — a discretization
    /// check, zero in the continuum.
    pub asymmetry_sup: f64,
}

fn time_derivative_stack(values: &[&ScalarGridField], m: usize, dt: f64) -> ScalarGridField {
    let last = values.len() - 1;
    if m == 0 {
        values[0]
            .scaled(-3.0)
            .add(&values[1].scaled(4.0))
            .add(&values[2].scaled(-1.0))
            .scaled(1.0 / (2.0 * dt))
    } else if m == last {
        values[last]
            .scaled(3.0)
            .add(&values[last - 1].scaled(-4.0))
            .add(&values[last - 2].scaled(1.0))
            .scaled(1.0 / (2.0 * dt))
    } else {
        values[m + 1].sub(&values[m - 1]).scaled(1.0 / (2.0 * dt))
    }
}

/// Assembles one slice's Ricci tensor and scalar from its Christoffel
/// fields plus (optional) time derivatives of the time-indexed Christoffel
/// components and traces. `None` time derivatives mean a static slice.
fn assemble_curvature(
    gf: &GammaFields,
    g_inv: &SymFields,
    dt_gamma0: Option<&[ScalarGridField]>,
    dt_trace: Option<&[ScalarGridField]>,
) -> CurvatureSlice {
    let grid = gf.grid;
    let sym = gf.sym;
    let dim = sym.dim;
    let mut ricci = SymFields::zeros(grid, dim);
    let mut asymmetry: f64 = 0.0;

    // d_nu T_mu for every ordered pair (index 0 = time).
    let mut d_trace: Vec<Vec<ScalarGridField>> = Vec::with_capacity(dim);
    for mu in 0..dim {
        let mut per_nu = Vec::with_capacity(dim);
        per_nu.push(match dt_trace {
            Some(stack) => stack[mu].clone(),
            None => ScalarGridField::zeros(grid),
        });
        for k in 0..grid.n {
            per_nu.push(grid::spatial_derivative(&gf.trace[mu], k));
        }
        d_trace.push(per_nu);
    }

    for (mu, nu) in sym.pairs() {
        let flat = sym.flat(mu, nu);
        // sum_a d_a Gamma^a_{mu nu}
        let mut div_gamma = match dt_gamma0 {
            Some(stack) => stack[flat].clone(),
            None => ScalarGridField::zeros(grid),
        };
        for k in 0..grid.n {
            div_gamma = div_gamma.add(&grid::spatial_derivative(&gf.gamma[k + 1][flat], k));
        }
        // symmetrized mixed term and its asymmetry
        let anti = d_trace[mu][nu].sub(&d_trace[nu][mu]).scaled(0.5);
        asymmetry = asymmetry.max(anti.sup_norm());
        let mixed = d_trace[mu][nu].add(&d_trace[nu][mu]).scaled(0.5);

        // + Gamma^a_{ab} Gamma^b_{mu nu} - Gamma^a_{mu b} Gamma^b_{nu a}
        let mut quad = ScalarGridField::zeros(grid);
        for b in 0..dim {
            quad = quad.add(&gf.trace[b].mul(&gf.gamma[b][flat]));
        }
        for a in 0..dim {
            for b in 0..dim {
                quad = quad.sub(&gf.gamma[a][sym.flat(mu, b)].mul(&gf.gamma[b][sym.flat(nu, a)]));
            }
        }
        *ricci.comp_mut(mu, nu) = div_gamma.sub(&mixed).add(&quad);
    }

    // R = g^{mu nu} R_{mu nu}
    let mut scalar = ScalarGridField::zeros(grid);
    for (mu, nu) in sym.pairs() {
        let weight = if mu == nu { 1.0 } else { 2.0 };
        scalar = scalar.add(&g_inv.comp(mu, nu).mul(ricci.comp(mu, nu)).scaled(weight));
    }
    CurvatureSlice {
        scalar,
        ricci,
        asymmetry_sup: asymmetry,
    }
}

/// Scalar curvature (and Ricci) for every stored slice.
///
/// R_mn = d_a Gamma^a_mn - d_(n Gamma^a_{a m)) + Gamma^a_{ab} Gamma^b_mn
///        - Gamma^a_{mb} Gamma^b_{na},
/// with the mixed second-derivative term symmetrized (it is symmetric in the
/// continuum; the residual asymmetry is reported per slice).
pub fn curvature_history(hist: &FieldsHistory) -> Result<Vec<CurvatureSlice>> {
    let slices = hist.slices();
    if slices < 3 {
        return Err(Error::Stencil {
            needed: 3,
            have: slices,
        });
    }
    let grid = hist.grid;
    let dim = grid.n + 1;
    let dt = hist.time.dt();
    let sym = hist.g[0].sym;

    // Christoffel fields and inverses per slice.
    let mut inverses: Vec<SymFields> = Vec::with_capacity(slices);
    let mut gammas: Vec<GammaFields> = Vec::with_capacity(slices);
    for m in 0..slices {
        let g_inv = fields::invert_fields(&hist.g[m], EPS_DET)?;
        let gf = fields::gamma_fields(&g_inv, &hist.dg[m], &hist.h[m]);
        inverses.push(g_inv);
        gammas.push(gf);
    }

    let mut out = Vec::with_capacity(slices);
    for m in 0..slices {
        let dt_gamma0: Vec<ScalarGridField> = (0..sym.count())
            .map(|flat| {
                let stack: Vec<&ScalarGridField> =
                    gammas.iter().map(|g| &g.gamma[0][flat]).collect();
                time_derivative_stack(&stack, m, dt)
            })
            .collect();
        let dt_trace: Vec<ScalarGridField> = (0..dim)
            .map(|mu| {
                let stack: Vec<&ScalarGridField> = gammas.iter().map(|g| &g.trace[mu]).collect();
                time_derivative_stack(&stack, m, dt)
            })
            .collect();
        out.push(assemble_curvature(
            &gammas[m],
            &inverses[m],
            Some(&dt_gamma0),
            Some(&dt_trace),
        ));
    }
    Ok(out)
}

/// Replicates the data slice into a short constant-in-time history, so the
/// time terms of any stencil vanish identically.
pub fn static_history(data: &DataList, slices: usize) -> FieldsHistory {
    let steps = slices.max(3) - 1;
    let time = TimeGrid {
        horizon: steps as f64,
        steps,
    };
    let grid = data.grid();
    let mut hist = FieldsHistory::zeros(grid, time);
    for m in 0..time.slices() {
        hist.g[m] = data.slice.g.clone();
        hist.h[m] = data.h0.clone();
        hist.dg[m] = data.slice.dg.clone();
    }
    hist
}

/// Curvature of the data slice alone, treated as momentarily static: all
/// time derivatives of the Christoffel fields vanish (equivalent to running
/// [`curvature_history`] on a replicated-slice history, but without holding
/// several copies of the Christoffel fields).
pub fn curvature_static(data: &DataList) -> Result<CurvatureSlice> {
    let gf = fields::gamma_fields(&data.slice.g_inv, &data.slice.dg, &data.h0);
    Ok(assemble_curvature(&gf, &data.slice.g_inv, None, None))
}

/// Result of fitting |R|_max(r) ~ r^beta over shrinking shells.
#[derive(Debug, Clone, Serialize)]
pub struct BlowupFit {
    /// Shell center radii, ascending.
    pub radii: Vec<f64>,
    /// max |R| per shell.
    pub maxima: Vec<f64>,
    /// Fitted log-log slope.
    pub exponent: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
}

/// Noise floor below which maxima are treated as zero curvature.
pub const BLOWUP_NOISE_FLOOR: f64 = 1e-10;

/// Least-squares slope of log |R|_max against log r over shells around the
/// given radii. Radii must number at least 4, reach down to at least 2h but
/// not below, and span at least one decade.
pub fn fit_blowup_exponent(
    field: &ScalarGridField,
    center: &[f64],
    radii: &[f64],
) -> Result<BlowupFit> {
    let grid = field.grid;
    if radii.len() < 4 {
        return Err(Error::Fit(format!(
            "need at least 4 radii, got {}",
            radii.len()
        )));
    }
    let mut sorted: Vec<f64> = radii.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let min_r = sorted[0];
    let max_r = sorted[sorted.len() - 1];
    if min_r < 2.0 * grid.spacing() {
        return Err(Error::Fit(format!(
            "smallest radius {min_r} is below 2h = {}",
            2.0 * grid.spacing()
        )));
    }
    if max_r / min_r < 10.0 {
        return Err(Error::Fit(format!(
            "radii span {:.2}x, need at least a decade",
            max_r / min_r
        )));
    }

    // Geometric shell boundaries centered on the requested radii.
    let mut bounds = Vec::with_capacity(sorted.len() + 1);
    let first_ratio = (sorted[1] / sorted[0]).sqrt();
    bounds.push(sorted[0] / first_ratio);
    for w in sorted.windows(2) {
        bounds.push((w[0] * w[1]).sqrt());
    }
    let last_ratio = (sorted[sorted.len() - 1] / sorted[sorted.len() - 2]).sqrt();
    bounds.push(sorted[sorted.len() - 1] * last_ratio);

    let corner = grid.half_width * (grid.n as f64).sqrt();
    if bounds[bounds.len() - 1] > corner {
        return Err(Error::Fit(format!(
            "largest shell (outer bound {:.3}) extends beyond the box (corner radius {:.3}); \
             use a finer grid or smaller radii",
            bounds[bounds.len() - 1],
            corner
        )));
    }

    let mut maxima = vec![0.0f64; sorted.len()];
    let mut counts = vec![0usize; sorted.len()];
    for (linear, v) in field.as_slice().iter().enumerate() {
        let idx = fields::unravel(&grid, linear);
        let pos = grid.position(&idx);
        let r = pos
            .iter()
            .zip(center)
            .map(|(x, c)| (x - c) * (x - c))
            .sum::<f64>()
            .sqrt();
        for s in 0..sorted.len() {
            if r >= bounds[s] && r < bounds[s + 1] {
                maxima[s] = maxima[s].max(v.abs());
                counts[s] += 1;
                break;
            }
        }
    }
    if counts.iter().any(|c| *c == 0) {
        return Err(Error::Fit(
            "empty shell: radii too fine for the grid".to_string(),
        ));
    }
    if maxima.iter().all(|m| *m < BLOWUP_NOISE_FLOOR) {
        return Err(Error::Fit(format!(
            "all shell maxima below the noise floor {BLOWUP_NOISE_FLOOR:e}; nothing to fit"
        )));
    }

    let xs: Vec<f64> = sorted.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = maxima.iter().map(|m| m.max(1e-300).ln()).collect();
    let nf = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum::<f64>()
        / nf)
        .sqrt();
    Ok(BlowupFit {
        radii: sorted,
        maxima,
        exponent: slope,
        residual,
    })
}

/// Integrand convention for the g.a.p. length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapConvention {
    /// sum_i g(dgamma/ds, e_i), exactly as defined (no absolute values).
    AsWritten,
    /// sqrt(sum_i g(dgamma/ds, e_i)^2), the standard-orthonormality variant.
    RootSquares,
}

/// A sampled curve through space-time with a frame along it.
#[derive(Debug, Clone)]
pub struct CurveSample {
    /// Strictly increasing parameter values.
    pub params: Vec<f64>,
    /// Space-time positions (t, x1, .., xn) per sample.
    pub positions: Vec<Vec<f64>>,
    /// n + 1 frame vectors per sample (rows), each with n + 1 components.
    pub frames: Vec<Vec<Vec<f64>>>,
}

fn det_general(m: &[Vec<f64>]) -> f64 {
    let d = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
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
            let f = a[r][col] / a[col][col];
            for c in col..d {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    det
}

impl CurveSample {
    pub fn new(
        params: Vec<f64>,
        positions: Vec<Vec<f64>>,
        frames: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if params.len() < 2 || params.len() != positions.len() || params.len() != frames.len() {
            return Err(Error::Config(
                "curve needs matching params/positions/frames with at least 2 samples".to_string(),
            ));
        }
        for w in params.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config(
                    "curve parameters must be strictly increasing".to_string(),
                ));
            }
        }
        for frame in &frames {
            if det_general(frame).abs() <= 1e-8 {
                return Err(Error::Config(
                    "frame vectors are linearly dependent".to_string(),
                ));
            }
        }
        Ok(CurveSample {
            params,
            positions,
            frames,
        })
    }

    /// Straight segment between two space-time points with the coordinate
    /// basis as frame.
    pub fn line(from: &[f64], to: &[f64], samples: usize) -> Result<Self> {
        if samples < 2 {
            return Err(Error::Config("a curve needs at least 2 samples".to_string()));
        }
        let dim = from.len();
        let params: Vec<f64> = (0..samples)
            .map(|j| j as f64 / (samples - 1) as f64)
            .collect();
        let positions: Vec<Vec<f64>> = params
            .iter()
            .map(|s| (0..dim).map(|a| from[a] + s * (to[a] - from[a])).collect())
            .collect();
        let frame: Vec<Vec<f64>> = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let frames = vec![frame; samples];
        CurveSample::new(params, positions, frames)
    }

    /// Tangents by centered differences (one-sided at the ends).
    pub fn tangents(&self) -> Vec<Vec<f64>> {
        let dim = self.positions[0].len();
        let last = self.params.len() - 1;
        (0..=last)
            .map(|j| {
                let (a, b) = if j == 0 {
                    (0, 1)
                } else if j == last {
                    (last - 1, last)
                } else {
                    (j - 1, j + 1)
                };
                let ds = self.params[b] - self.params[a];
                (0..dim)
                    .map(|c| (self.positions[b][c] - self.positions[a][c]) / ds)
                    .collect()
            })
            .collect()
    }
}

/// Multilinear interpolation of one component field at (t, x).
fn interp_component(
    hist: &FieldsHistory,
    flat: usize,
    t: f64,
    x: &[f64],
    sample: usize,
) -> Result<f64> {
    let grid = hist.grid;
    let horizon = hist.time.horizon;
    let tol = 1e-9 * horizon.max(1.0);
    let out_of_domain = || Error::CurveDomain {
        sample,
        location: std::iter::once(t).chain(x.iter().copied()).collect(),
    };
    if t < -tol || t > horizon + tol {
        return Err(out_of_domain());
    }
    for &c in x {
        if c.abs() > grid.half_width {
            return Err(out_of_domain());
        }
    }
    let dt = hist.time.dt();
    let steps = hist.time.steps;
    let tf = (t / dt).clamp(0.0, steps as f64);
    let m0 = (tf.floor() as usize).min(steps - 1);
    let wt = tf - m0 as f64;

    let spatial = |slice: &SymFields| -> f64 {
        let f = &slice.components()[flat];
        let h = grid.spacing();
        let shift = if grid.offset_origin { 0.5 } else { 0.0 };
        let mut base = vec![0usize; grid.n];
        let mut frac = vec![0.0f64; grid.n];
        for a in 0..grid.n {
            let u = (x[a] + grid.half_width) / h - shift;
            let fl = u.floor();
            base[a] = (fl.rem_euclid(grid.points as f64)) as usize % grid.points;
            frac[a] = u - fl;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << grid.n) {
            let mut w = 1.0;
            let mut linear = 0usize;
            for a in 0..grid.n {
                let up = corner >> a & 1 == 1;
                let ia = if up { (base[a] + 1) % grid.points } else { base[a] };
                w *= if up { frac[a] } else { 1.0 - frac[a] };
                linear = linear * grid.points + ia;
            }
            acc += w * f.as_slice()[linear];
        }
        acc
    };
    let v0 = spatial(&hist.g[m0]);
    let v1 = spatial(&hist.g[m0 + 1]);
    Ok(v0 * (1.0 - wt) + v1 * wt)
}

/// Generalized-affine-parameter length of a sampled curve with respect to
/// its frame: the trapezoid quadrature of sum_i g(dgamma/ds, e_i) (or its
/// root-of-squares variant) with the metric interpolated multilinearly from
/// the stored history.
pub fn gap_length(
    curve: &CurveSample,
    hist: &FieldsHistory,
    convention: GapConvention,
) -> Result<f64> {
    let dim = hist.grid.n + 1;
    let sym = hist.g[0].sym;
    let tangents = curve.tangents();
    let mut integrand = Vec::with_capacity(curve.params.len());
    for j in 0..curve.params.len() {
        let pos = &curve.positions[j];
        let t = pos[0];
        let x = &pos[1..];
        let mut gval = vec![vec![0.0; dim]; dim];
        for (mu, nu) in sym.pairs() {
            let v = interp_component(hist, sym.flat(mu, nu), t, x, j)?;
            gval[mu][nu] = v;
            gval[nu][mu] = v;
        }
        let tangent = &tangents[j];
        let mut total = 0.0;
        let mut squares = 0.0;
        for e in &curve.frames[j] {
            let mut pairing = 0.0;
            for mu in 0..dim {
                for nu in 0..dim {
                    pairing += gval[mu][nu] * tangent[mu] * e[nu];
                }
            }
            total += pairing;
            squares += pairing * pairing;
        }
        integrand.push(match convention {
            GapConvention::AsWritten => total,
            GapConvention::RootSquares => squares.sqrt(),
        });
    }
    let mut acc = 0.0;
    for j in 0..curve.params.len() - 1 {
        let ds = curve.params[j + 1] - curve.params[j];
        acc += 0.5 * (integrand[j] + integrand[j + 1]) * ds;
    }
    Ok(acc)
}

/// Per-slice sup |Gamma^mu| outside the excluded ball.
#[derive(Debug, Clone, Serialize)]
pub struct ConstraintSeries {
    pub times: Vec<f64>,
    /// sup_per_mu[m][mu].
    pub sup_per_mu: Vec<Vec<f64>>,
    /// The t = 0 values.
    pub initial: Vec<f64>,
    pub excluded_radius: f64,
}

impl ConstraintSeries {
    pub fn overall_sup(&self) -> f64 {
        self.sup_per_mu
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(*v))
    }

    pub fn initial_sup(&self) -> f64 {
        self.initial.iter().fold(0.0f64, |m, v| m.max(*v))
    }
}

/// Tracks the contracted Christoffels Gamma^mu = g^{ab} Gamma^mu_{ab} along
/// the evolution; they vanish identically in harmonic gauge and their
/// initial smallness should persist over the horizon.
pub fn constraint_monitor(hist: &FieldsHistory, r_excl: f64) -> Result<ConstraintSeries> {
    let grid = hist.grid;
    let dim = grid.n + 1;
    let mask = exclusion_mask(&grid, r_excl);
    let mut times = Vec::with_capacity(hist.slices());
    let mut sup_per_mu = Vec::with_capacity(hist.slices());
    for m in 0..hist.slices() {
        let g_inv = fields::invert_fields(&hist.g[m], EPS_DET)?;
        let gf = fields::gamma_fields(&g_inv, &hist.dg[m], &hist.h[m]);
        let sups: Vec<f64> = (0..dim)
            .map(|mu| {
                gf.contracted[mu]
                    .as_slice()
                    .iter()
                    .zip(&mask)
                    .filter(|(_, keep)| **keep)
                    .fold(0.0f64, |acc, (v, _)| acc.max(v.abs()))
            })
            .collect();
        times.push(hist.time.time(m));
        sup_per_mu.push(sups);
    }
    Ok(ConstraintSeries {
        initial: sup_per_mu[0].clone(),
        times,
        sup_per_mu,
        excluded_radius: r_excl,
    })
}

/// Per-slice uniform Lorentz margin series.
#[derive(Debug, Clone, Serialize)]
pub struct SignatureSeries {
    pub times: Vec<f64>,
    pub margins: Vec<f64>,
    /// First slice whose margin hits zero (signature count failure), if any.
    pub first_failure: Option<usize>,
}

pub fn signature_monitor(hist: &FieldsHistory) -> SignatureSeries {
    let mut times = Vec::with_capacity(hist.slices());
    let mut margins = Vec::with_capacity(hist.slices());
    let mut first_failure = None;
    for m in 0..hist.slices() {
        let lm = fields::lorentz_margin(&hist.g[m]);
        times.push(hist.time.time(m));
        margins.push(lm.margin);
        if lm.margin == 0.0 && first_failure.is_none() {
            first_failure = Some(m);
        }
    }
    SignatureSeries {
        times,
        margins,
        first_failure,
    }
}
