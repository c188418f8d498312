//! The viscosity-extended first-order system, its heat-kernel Picard
//! iteration, contraction monitoring, the viscosity sweep, and the residual
//! of candidate solutions against the inviscid system.
//!
//! One iteration maps the full space-time history of the previous iterate
//! through the Duhamel representations
//!
//!   g^l      = g0   *sp G  +  h^{l-1} * G
//!   g^l_{,k} = g0,k *sp G  +  h^{l-1} * G_{,k}
//!   h^l      = h0   *sp G  -  (C_k h^{l-1}) * G_{,k}  +  (C_k,k h^{l-1}) * G
//!                          -  (D^{km} g^{l-1}_{,k}) * G_{,m}
//!                          +  (D^{km}_{,m} g^{l-1}_{,k}) * G
//!                          +  (2 p H^{l-1}) * G
//!
//! with C_k = p 2 g^{0k}, D^{km} = p g^{km}, and p the time-time prefactor
//! (the metric component g_00 by default, or 1/g^00 behind a switch; the two
//! agree for block metrics). Moving the derivative onto the kernel keeps
//! every convolved term first-order in the metric. All coefficient fields
//! are frozen at the previous iterate: pure fixed-point iteration, no
//! Newton acceleration.
//!
//! The t = 0 slice of every iterate is the data itself (the kernel tends to
//! the identity), so increments vanish identically on the initial slice.

use serde::{Deserialize, Serialize};

use crate::data::DataList;
use crate::error::Error;
use crate::fields::{self, FieldsHistory, SymFields};
use crate::grid::{self, GridSpec, ScalarGridField, TimeGrid};
use crate::kernel::{EndpointRule, SpacetimeConvolver};
use crate::tensor::EPS_DET;
use crate::Result;

/// Which field multiplies the spatial-derivative bracket in the h update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Prefactor {
    /// The covariant time-time component g_00 (as written in the system).
    #[default]
    G00,
    /// 1/g^00, the factor a direct second-order reduction produces.
    InvG00,
}

/// Scheme configuration for one fixed-point run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub horizon: f64,
    pub steps: usize,
    pub nu0: f64,
    pub max_iters: usize,
    /// Fixed-point tolerance on the combined increment norm.
    pub tol_fix: f64,
    /// Largest acceptable contraction ratio (must be < 1).
    pub tol_contract: f64,
    pub prefactor: Prefactor,
    pub endpoint: EndpointRule,
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_contract > 0.0 && self.tol_contract < 1.0) {
            return Err(Error::Config(format!(
                "tol_contract must lie in (0, 1), got {}",
                self.tol_contract
            )));
        }
        if self.max_iters < 2 {
            return Err(Error::Config("max_iters must be at least 2".to_string()));
        }
        if !(self.nu0 > 0.0) {
            return Err(Error::Config(format!(
                "viscosity must be positive, got {}",
                self.nu0
            )));
        }
        if !(self.tol_fix > 0.0) {
            return Err(Error::Config("tol_fix must be positive".to_string()));
        }
        TimeGrid::new(self.horizon, self.steps)?;
        Ok(())
    }

    pub fn time_grid(&self) -> TimeGrid {
        TimeGrid {
            horizon: self.horizon,
            steps: self.steps,
        }
    }
}

/// Sup, Lipschitz-proxy, and per-slice H2 norms of one increment family.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct FamilyNorms {
    pub sup: f64,
    /// sup over axes and points of |f(x + h e) - f(x)| / h.
    pub lipschitz: f64,
    /// max over slices and components of the discrete H2 norm.
    pub h2: f64,
}

impl FamilyNorms {
    fn max(&self) -> f64 {
        self.sup.max(self.lipschitz).max(self.h2)
    }
}

/// Per-iteration increment record.
#[derive(Debug, Clone, Serialize)]
pub struct IncrementRecord {
    pub iteration: usize,
    pub g: FamilyNorms,
    pub dg: FamilyNorms,
    pub h: FamilyNorms,
    /// One scalar per iteration: the maximum over families and norm kinds.
    pub combined: f64,
}

/// Contraction history of one fixed-point run.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionRecord {
    pub horizon: f64,
    pub nu0: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Combined increment norm per iteration (starting at l = 1).
    pub norms: Vec<f64>,
    /// Ratios c_l = |delta_l| / |delta_{l-1}| (starting at l = 2).
    pub ratios: Vec<f64>,
    pub records: Vec<IncrementRecord>,
}

impl ContractionRecord {
    /// True when some window of `window` consecutive ratios stays at or
    /// below `bound` (immediate convergence counts: there is nothing left
    /// to contract).
    pub fn contraction_ok(&self, bound: f64, window: usize) -> bool {
        if self.converged && self.ratios.len() < window {
            return true;
        }
        self.ratios
            .windows(window)
            .any(|w| w.iter().all(|r| *r <= bound))
    }
}

/// Iteration state: previous and current iterate histories plus the
/// increment records.
pub struct IterationState {
    pub iteration: usize,
    pub previous: Option<FieldsHistory>,
    pub current: FieldsHistory,
    pub increments: Vec<IncrementRecord>,
}

/// Precomputed machinery shared by every iteration at fixed data and
/// configuration: the convolution engine and the kernel-smoothed data
/// histories.
pub struct Stepper {
    pub grid: GridSpec,
    pub time: TimeGrid,
    pub cfg: SchemeConfig,
    conv: SpacetimeConvolver,
    /// Spatially smoothed data: g0 *sp G(t), g0,k *sp G(t), h0 *sp G(t),
    /// with the t = 0 slices equal to the data exactly.
    base: FieldsHistory,
}

impl Stepper {
    pub fn new(data: &DataList, cfg: &SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        if !data.admissibility.passed {
            return Err(Error::InadmissibleData(format!(
                "data list failed admissibility: {:?}",
                data.admissibility.failure
            )));
        }
        let grid = data.grid();
        let time = cfg.time_grid();
        let conv = SpacetimeConvolver::new(grid, cfg.nu0, time.dt(), time.steps);
        let mut base = FieldsHistory::zeros(grid, time);
        for m in 0..time.slices() {
            let t = time.time(m);
            if m == 0 {
                base.g[0] = data.slice.g.clone();
                base.h[0] = data.h0.clone();
                base.dg[0] = data.slice.dg.clone();
                continue;
            }
            base.g[m] = smooth_fields(&data.slice.g, cfg.nu0, t);
            base.h[m] = smooth_fields(&data.h0, cfg.nu0, t);
            for k in 0..grid.n {
                base.dg[m][k] = smooth_fields(&data.slice.dg[k], cfg.nu0, t);
            }
        }
        Ok(Stepper {
            grid,
            time,
            cfg: *cfg,
            conv,
            base,
        })
    }

    /// The l = 0 iterate: the smoothed data histories themselves.
    pub fn initial(&self) -> FieldsHistory {
        self.base.clone()
    }

    /// One Picard step: consumes the previous iterate's history, returns the
    /// next. Degeneracy anywhere in the previous iterate aborts with the
    /// slice and grid location.
    pub fn step(&self, prev: &FieldsHistory) -> Result<FieldsHistory> {
        let grid = self.grid;
        let n = grid.n;
        let dim = n + 1;
        let sym = prev.g[0].sym;
        let slices = self.time.slices();

        // Coefficient fields of the previous iterate, per slice.
        let mut coef_c: Vec<Vec<ScalarGridField>> = Vec::with_capacity(slices); // C_k
        let mut coef_div_c: Vec<ScalarGridField> = Vec::with_capacity(slices); // C_k,k summed
        let mut coef_d: Vec<Vec<Vec<ScalarGridField>>> = Vec::with_capacity(slices); // D^{km}
        let mut coef_e: Vec<Vec<ScalarGridField>> = Vec::with_capacity(slices); // D^{km}_{,m} summed over m
        let mut coef_w: Vec<SymFields> = Vec::with_capacity(slices); // 2 p H
        for m in 0..slices {
            let g_inv = fields::invert_fields(&prev.g[m], EPS_DET).map_err(|e| match e {
                Error::DegenerateMetric { det, index, .. } => Error::SignatureLoss {
                    slice: m,
                    index,
                    detail: format!("metric determinant {det:.3e} below threshold"),
                },
                other => other,
            })?;
            let pf = match self.cfg.prefactor {
                Prefactor::G00 => prev.g[m].comp(0, 0).clone(),
                Prefactor::InvG00 => {
                    let mut f = g_inv.comp(0, 0).clone();
                    for v in f.as_slice_mut() {
                        *v = 1.0 / *v;
                    }
                    f
                }
            };
            let c_k: Vec<ScalarGridField> = (0..n)
                .map(|k| pf.mul(g_inv.comp(0, k + 1)).scaled(2.0))
                .collect();
            let mut div_c = ScalarGridField::zeros(grid);
            for (k, c) in c_k.iter().enumerate() {
                div_c = div_c.add(&grid::spatial_derivative(c, k));
            }
            let d_km: Vec<Vec<ScalarGridField>> = (0..n)
                .map(|k| {
                    (0..n)
                        .map(|mm| pf.mul(g_inv.comp(k + 1, mm + 1)))
                        .collect()
                })
                .collect();
            let e_k: Vec<ScalarGridField> = (0..n)
                .map(|k| {
                    let mut acc = ScalarGridField::zeros(grid);
                    for mm in 0..n {
                        acc = acc.add(&grid::spatial_derivative(&d_km[k][mm], mm));
                    }
                    acc
                })
                .collect();
            let hsrc = fields::source_fields(&prev.g[m], &g_inv, &prev.dg[m], &prev.h[m]);
            let mut w = SymFields::zeros(grid, dim);
            for (i, c) in hsrc.components().iter().enumerate() {
                w.components_mut()[i] = pf.mul(c).scaled(2.0);
            }
            coef_c.push(c_k);
            coef_div_c.push(div_c);
            coef_d.push(d_km);
            coef_e.push(e_k);
            coef_w.push(w);
        }

        let mut next = FieldsHistory::zeros(grid, self.time);
        let all_derivs: Vec<Option<usize>> = std::iter::once(None)
            .chain((0..n).map(Some))
            .collect();

        for flat in 0..sym.count() {
            // h^{l-1} history for this component, convolved with G and G_{,k}.
            let h_hist: Vec<ScalarGridField> = (0..slices)
                .map(|m| prev.h[m].components()[flat].clone())
                .collect();
            let h_convs = self
                .conv
                .convolve_all_multi(&h_hist, &all_derivs, self.cfg.endpoint);

            for m in 0..slices {
                next.g[m].components_mut()[flat] = self.base.g[m].components()[flat]
                    .add(&h_convs[0][m]);
                for k in 0..n {
                    next.dg[m][k].components_mut()[flat] = self.base.dg[m][k].components()[flat]
                        .add(&h_convs[1 + k][m]);
                }
            }

            // y_k = C_k h + sum_j D^{jk} g_{,j}: enters as -(y_k * G_{,k}).
            // z = C_k,k h + D^{km}_{,m} g_{,k} + 2 p H: enters as +(z * G).
            let mut z_hist: Vec<ScalarGridField> = Vec::with_capacity(slices);
            for m in 0..slices {
                let hval = &prev.h[m].components()[flat];
                let mut z = coef_div_c[m].mul(hval);
                for k in 0..n {
                    z = z.add(&coef_e[m][k].mul(&prev.dg[m][k].components()[flat]));
                }
                z = z.add(&coef_w[m].components()[flat]);
                z_hist.push(z);
            }
            let z_conv = self.conv.convolve_all(&z_hist, None, self.cfg.endpoint);

            let mut h_updates: Vec<ScalarGridField> =
                (0..slices).map(|_| ScalarGridField::zeros(grid)).collect();
            for axis in 0..n {
                let y_hist: Vec<ScalarGridField> = (0..slices)
                    .map(|m| {
                        let mut y = coef_c[m][axis].mul(&prev.h[m].components()[flat]);
                        for j in 0..n {
                            y = y.add(
                                &coef_d[m][j][axis].mul(&prev.dg[m][j].components()[flat]),
                            );
                        }
                        y
                    })
                    .collect();
                let y_conv = self
                    .conv
                    .convolve_all(&y_hist, Some(axis), self.cfg.endpoint);
                for m in 0..slices {
                    h_updates[m] = h_updates[m].sub(&y_conv[m]);
                }
            }
            for m in 0..slices {
                next.h[m].components_mut()[flat] = self.base.h[m].components()[flat]
                    .add(&z_conv[m])
                    .add(&h_updates[m]);
            }
        }

        // The initial slice is the data, exactly.
        next.g[0] = self.base.g[0].clone();
        next.h[0] = self.base.h[0].clone();
        next.dg[0] = self.base.dg[0].clone();

        if !next.all_finite() {
            return Err(Error::Divergence {
                iteration: 0,
                detail: "non-finite value in iterate".to_string(),
            });
        }
        Ok(next)
    }
}

/// Applies the exact heat multiplier to every component of a field set.
fn smooth_fields(f: &SymFields, nu0: f64, t: f64) -> SymFields {
    let mut out = SymFields::zeros(f.grid, f.dim());
    for (i, c) in f.components().iter().enumerate() {
        out.components_mut()[i] = crate::kernel::heat_smooth(c, nu0, t);
    }
    out
}

fn family_norms(slices_a: &[SymFields], slices_b: &[SymFields]) -> FamilyNorms {
    let mut out = FamilyNorms::default();
    for (a, b) in slices_a.iter().zip(slices_b) {
        for (ca, cb) in a.components().iter().zip(b.components()) {
            let delta = ca.sub(cb);
            out.sup = out.sup.max(delta.sup_norm());
            out.lipschitz = out.lipschitz.max(lipschitz_proxy(&delta));
            out.h2 = out.h2.max(grid::sobolev_norm(&delta, 2.0));
        }
    }
    out
}

/// sup over axes and points of the periodic forward difference quotient.
fn lipschitz_proxy(f: &ScalarGridField) -> f64 {
    let grid = f.grid;
    let h = grid.spacing();
    let mut worst: f64 = 0.0;
    let src = &f.values;
    use ndarray::{Dimension, IxDyn};
    for axis in 0..grid.n {
        for (idx, v) in src.indexed_iter() {
            let mut j = idx.slice().to_vec();
            j[axis] = (j[axis] + 1) % grid.points;
            let diff = (src[IxDyn(&j)] - v).abs() / h;
            worst = worst.max(diff);
        }
    }
    worst
}

fn increment_record(iteration: usize, prev: &FieldsHistory, next: &FieldsHistory) -> IncrementRecord {
    let g = family_norms(&next.g, &prev.g);
    let h = family_norms(&next.h, &prev.h);
    let mut dg = FamilyNorms::default();
    for k in 0..next.grid.n {
        let a: Vec<SymFields> = next.dg.iter().map(|s| s[k].clone()).collect();
        let b: Vec<SymFields> = prev.dg.iter().map(|s| s[k].clone()).collect();
        let fam = family_norms(&a, &b);
        dg.sup = dg.sup.max(fam.sup);
        dg.lipschitz = dg.lipschitz.max(fam.lipschitz);
        dg.h2 = dg.h2.max(fam.h2);
    }
    let combined = g.max().max(dg.max()).max(h.max());
    IncrementRecord {
        iteration,
        g,
        dg,
        h,
        combined,
    }
}

/// Builds the l = 0 iterate from an admissible data list.
pub fn init_iteration(data: &DataList, cfg: &SchemeConfig) -> Result<IterationState> {
    let stepper = Stepper::new(data, cfg)?;
    Ok(IterationState {
        iteration: 0,
        previous: None,
        current: stepper.initial(),
        increments: Vec::new(),
    })
}

/// How many consecutive non-contracting ratios abort the run.
const NONCONTRACTION_WINDOW: usize = 3;

/// Iterates to the fixed point. Success: the combined increment norm falls
/// below tol_fix. Non-contraction (three consecutive ratios at or above 1)
/// aborts with the record attached; degeneracy and non-finite values abort
/// with their own errors.
pub fn run_fixed_point(
    data: &DataList,
    cfg: &SchemeConfig,
) -> Result<(FieldsHistory, ContractionRecord)> {
    run_fixed_point_with(data, cfg, None)
}

/// Like [`run_fixed_point`], optionally resuming from a checkpointed iterate
/// instead of the smoothed data.
pub fn run_fixed_point_with(
    data: &DataList,
    cfg: &SchemeConfig,
    resume: Option<FieldsHistory>,
) -> Result<(FieldsHistory, ContractionRecord)> {
    let stepper = Stepper::new(data, cfg)?;
    let mut current = match resume {
        Some(hist) => {
            if hist.grid != stepper.grid || hist.time != stepper.time {
                return Err(Error::ShapeMismatch(
                    "resume checkpoint does not match the configured grid/time".to_string(),
                ));
            }
            hist
        }
        None => stepper.initial(),
    };
    let mut norms: Vec<f64> = Vec::new();
    let mut ratios: Vec<f64> = Vec::new();
    let mut records: Vec<IncrementRecord> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for l in 1..=cfg.max_iters {
        let next = stepper.step(&current).map_err(|e| match e {
            Error::Divergence { detail, .. } => Error::Divergence {
                iteration: l,
                detail,
            },
            other => other,
        })?;
        let record = increment_record(l, &current, &next);
        let delta = record.combined;
        if let Some(last) = norms.last() {
            if *last > 0.0 {
                ratios.push(delta / last);
            }
        }
        norms.push(delta);
        records.push(record);
        current = next;
        iterations = l;

        if delta <= cfg.tol_fix {
            converged = true;
            break;
        }
        if ratios.len() >= NONCONTRACTION_WINDOW
            && ratios[ratios.len() - NONCONTRACTION_WINDOW..]
                .iter()
                .all(|r| *r >= 1.0)
        {
            return Err(Error::ContractionFailure {
                iterations: l,
                ratios,
                norms,
            });
        }
    }
    if !converged {
        return Err(Error::ContractionFailure {
            iterations,
            ratios,
            norms,
        });
    }
    Ok((
        current,
        ContractionRecord {
            horizon: cfg.horizon,
            nu0: cfg.nu0,
            iterations,
            converged,
            norms,
            ratios,
            records,
        },
    ))
}

/// Halves the horizon until the fixed point converges with contraction
/// ratios within tolerance; returns the successful configuration too.
pub fn run_fixed_point_auto(
    data: &DataList,
    cfg: &SchemeConfig,
    max_halvings: usize,
) -> Result<(FieldsHistory, ContractionRecord, SchemeConfig)> {
    let mut attempt = *cfg;
    let mut last_err = None;
    for _ in 0..=max_halvings {
        match run_fixed_point(data, &attempt) {
            Ok((fields, record)) => {
                if record.contraction_ok(attempt.tol_contract, NONCONTRACTION_WINDOW) {
                    return Ok((fields, record, attempt));
                }
                last_err = Some(Error::ContractionFailure {
                    iterations: record.iterations,
                    ratios: record.ratios,
                    norms: record.norms,
                });
            }
            Err(e @ (Error::ContractionFailure { .. } | Error::Divergence { .. })) => {
                last_err = Some(e);
            }
            Err(other) => return Err(other),
        }
        attempt.horizon *= 0.5;
    }
    Err(last_err.unwrap_or(Error::Config(
        "auto horizon search exhausted without an attempt".to_string(),
    )))
}

/// Sweep summary (serializable part of the sweep outcome).
#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub nus: Vec<f64>,
    pub horizon: f64,
    pub runs: Vec<ContractionRecord>,
    /// Sup-norm distances between successive viscosity solutions.
    pub distances: Vec<f64>,
    /// Present when there are at least two distances: every later distance
    /// at most 70% of its predecessor.
    pub cauchy_decreasing: Option<bool>,
}

/// Full sweep outcome.
pub struct SweepOutcome {
    pub summary: SweepSummary,
    pub solutions: Vec<FieldsHistory>,
    /// Linear-in-viscosity Richardson extrapolation toward zero viscosity
    /// from the two finest solutions (when available).
    pub extrapolated: Option<FieldsHistory>,
}

/// Kernel resolution policy for the sweep: the kernel must be resolved at
/// horizon scale, sqrt(4 nu T) >= h, and nu >= h^2.
pub fn sweep_resolution_floor(grid: &GridSpec, horizon: f64) -> f64 {
    let h = grid.spacing();
    (h * h / (4.0 * horizon)).max(h * h)
}

/// Runs the fixed point for each viscosity in a decreasing sequence and
/// reports the pairwise distances between successive solutions plus a
/// zero-viscosity extrapolation.
pub fn viscosity_sweep(
    data: &DataList,
    cfg: &SchemeConfig,
    nus: &[f64],
) -> Result<SweepOutcome> {
    if nus.is_empty() {
        return Err(Error::Config("empty viscosity sequence".to_string()));
    }
    for pair in nus.windows(2) {
        if pair[1] >= pair[0] {
            return Err(Error::Config(
                "viscosity sequence must be strictly decreasing".to_string(),
            ));
        }
    }
    let floor = sweep_resolution_floor(&data.grid(), cfg.horizon);
    for &nu in nus {
        if nu < floor {
            return Err(Error::Config(format!(
                "viscosity {nu} under-resolved on this grid (floor {floor:.3e}); refine the grid"
            )));
        }
    }
    let mut runs = Vec::new();
    let mut solutions: Vec<FieldsHistory> = Vec::new();
    for &nu in nus {
        let mut run_cfg = *cfg;
        run_cfg.nu0 = nu;
        let (fields, record) = run_fixed_point(data, &run_cfg).map_err(|e| Error::SweepFailure {
            nu0: nu,
            source: Box::new(e),
        })?;
        runs.push(record);
        solutions.push(fields);
    }
    let distances: Vec<f64> = solutions
        .windows(2)
        .map(|w| w[0].sup_distance(&w[1]))
        .collect();
    let cauchy_decreasing = if distances.len() >= 2 {
        Some(distances.windows(2).all(|w| w[1] <= 0.7 * w[0]))
    } else {
        None
    };
    let extrapolated = if solutions.len() >= 2 {
        let fine = &solutions[solutions.len() - 1];
        let coarse = &solutions[solutions.len() - 2];
        let nu_f = nus[nus.len() - 1];
        let nu_c = nus[nus.len() - 2];
        let factor = nu_f / (nu_c - nu_f);
        Some(extrapolate(fine, coarse, factor))
    } else {
        None
    };
    Ok(SweepOutcome {
        summary: SweepSummary {
            nus: nus.to_vec(),
            horizon: cfg.horizon,
            runs,
            distances,
            cauchy_decreasing,
        },
        solutions,
        extrapolated,
    })
}

/// fine + factor (fine - coarse), componentwise over all families.
fn extrapolate(fine: &FieldsHistory, coarse: &FieldsHistory, factor: f64) -> FieldsHistory {
    let mut out = fine.clone();
    let combine = |a: &ScalarGridField, b: &ScalarGridField| a.add(&a.sub(b).scaled(factor));
    for m in 0..out.slices() {
        for i in 0..out.g[m].components().len() {
            out.g[m].components_mut()[i] =
                combine(&fine.g[m].components()[i], &coarse.g[m].components()[i]);
            out.h[m].components_mut()[i] =
                combine(&fine.h[m].components()[i], &coarse.h[m].components()[i]);
            for k in 0..out.grid.n {
                out.dg[m][k].components_mut()[i] = combine(
                    &fine.dg[m][k].components()[i],
                    &coarse.dg[m][k].components()[i],
                );
            }
        }
    }
    out
}

/// Residual sup norms of the three inviscid evolution equations over a
/// probe region that excludes a ball around the origin.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    /// sup |dg/dt - h|.
    pub eq_g: f64,
    /// sup |d(g_,k)/dt - d h / dx^k|.
    pub eq_dg: f64,
    /// sup |dh/dt + p (2 g^{0k} h_,k + g^{km} g_{,k,m} - 2 H)|.
    pub eq_h: f64,
    pub combined: f64,
    pub excluded_radius: f64,
}

fn masked_sup(f: &ScalarGridField, mask: &[bool]) -> f64 {
    f.as_slice()
        .iter()
        .zip(mask)
        .filter(|(_, keep)| **keep)
        .fold(0.0f64, |m, (v, _)| m.max(v.abs()))
}

/// Keep points at radius >= r_excl from the origin.
pub fn exclusion_mask(grid: &GridSpec, r_excl: f64) -> Vec<bool> {
    let mut mask = vec![true; grid.len()];
    if r_excl <= 0.0 {
        return mask;
    }
    for (linear, keep) in mask.iter_mut().enumerate() {
        let idx = fields::unravel(grid, linear);
        *keep = grid.radius(&idx) >= r_excl;
    }
    mask
}

/// Second-order time derivative of a per-slice component stack.
fn time_derivative(values: &[&ScalarGridField], m: usize, dt: f64) -> ScalarGridField {
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

/// Evaluates all three equations of the inviscid first-order system on a
/// stored history, with centered (one-sided at the ends) time differences
/// and spectral space derivatives. Pure diagnostic.
pub fn harmonic_residual(
    fields_hist: &FieldsHistory,
    prefactor: Prefactor,
    r_excl: f64,
) -> Result<ResidualReport> {
    let slices = fields_hist.slices();
    if slices < 3 {
        return Err(Error::Stencil {
            needed: 3,
            have: slices,
        });
    }
    let grid = fields_hist.grid;
    let n = grid.n;
    let dt = fields_hist.time.dt();
    let sym = fields_hist.g[0].sym;
    let mask = exclusion_mask(&grid, r_excl);

    let mut eq_g: f64 = 0.0;
    let mut eq_dg: f64 = 0.0;
    let mut eq_h: f64 = 0.0;
    for m in 0..slices {
        let g_inv = fields::invert_fields(&fields_hist.g[m], EPS_DET)?;
        let pf = match prefactor {
            Prefactor::G00 => fields_hist.g[m].comp(0, 0).clone(),
            Prefactor::InvG00 => {
                let mut f = g_inv.comp(0, 0).clone();
                for v in f.as_slice_mut() {
                    *v = 1.0 / *v;
                }
                f
            }
        };
        let hsrc = fields::source_fields(
            &fields_hist.g[m],
            &g_inv,
            &fields_hist.dg[m],
            &fields_hist.h[m],
        );
        for flat in 0..sym.count() {
            let g_stack: Vec<&ScalarGridField> =
                fields_hist.g.iter().map(|s| &s.components()[flat]).collect();
            let h_stack: Vec<&ScalarGridField> =
                fields_hist.h.iter().map(|s| &s.components()[flat]).collect();
            // dg/dt = h
            let r1 = time_derivative(&g_stack, m, dt).sub(&fields_hist.h[m].components()[flat]);
            eq_g = eq_g.max(masked_sup(&r1, &mask));
            // d(g_,k)/dt = dh/dx^k
            for k in 0..n {
                let dgk_stack: Vec<&ScalarGridField> = fields_hist
                    .dg
                    .iter()
                    .map(|s| &s[k].components()[flat])
                    .collect();
                let r2 = time_derivative(&dgk_stack, m, dt).sub(&grid::spatial_derivative(
                    &fields_hist.h[m].components()[flat],
                    k,
                ));
                eq_dg = eq_dg.max(masked_sup(&r2, &mask));
            }
            // dh/dt = -p (2 g^{0k} dh/dx^k + g^{km} d g_{,k}/dx^m - 2 H)
            let mut bracket = hsrc.components()[flat].scaled(-2.0);
            for k in 0..n {
                let dh = grid::spatial_derivative(&fields_hist.h[m].components()[flat], k);
                bracket = bracket.add(&g_inv.comp(0, k + 1).mul(&dh).scaled(2.0));
                for mm in 0..n {
                    let ddg =
                        grid::spatial_derivative(&fields_hist.dg[m][k].components()[flat], mm);
                    bracket = bracket.add(&g_inv.comp(k + 1, mm + 1).mul(&ddg));
                }
            }
            let r3 = time_derivative(&h_stack, m, dt).add(&pf.mul(&bracket));
            eq_h = eq_h.max(masked_sup(&r3, &mask));
        }
    }
    Ok(ResidualReport {
        eq_g,
        eq_dg,
        eq_h,
        combined: eq_g.max(eq_dg).max(eq_h),
        excluded_radius: r_excl,
    })
}
