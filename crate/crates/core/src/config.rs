//! Run configuration: one JSON file drives one run. Defaults are applied at
//! load and echoed back in canonical form, so a run is reproducible from the
//! hash of its echoed configuration alone. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Orientation, SingularProfileParams, TimeDerivativeMode};
use crate::error::Error;
use crate::grid::{self, GridSpec};
use crate::kernel::EndpointRule;
use crate::picard::{Prefactor, SchemeConfig};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub points: usize,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "default_true")]
    pub offset_origin: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection {
            horizon: default_horizon(),
            steps: default_steps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Profile offset constant (the value at the origin).
    #[serde(default = "default_offset")]
    pub offset: f64,
    /// Singularity exponent, must lie in (0.5, 1).
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_plateau")]
    pub plateau_radius: f64,
    #[serde(default = "default_support")]
    pub support_radius: f64,
    /// Perturbation amplitude; 0 gives flat data.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_orientation")]
    pub orientation: Orientation,
    #[serde(default = "default_h0")]
    pub time_derivative: TimeDerivativeMode,
    /// Sobolev order for admissibility; defaults to n/2 + 1.1.
    #[serde(default)]
    pub sobolev_order: Option<f64>,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            offset: default_offset(),
            alpha: default_alpha(),
            plateau_radius: default_plateau(),
            support_radius: default_support(),
            amplitude: default_amplitude(),
            orientation: default_orientation(),
            time_derivative: default_h0(),
            sobolev_order: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    /// Single viscosity for evolve/residual runs.
    #[serde(default = "default_nu0")]
    pub viscosity: f64,
    /// Decreasing sequence for the sweep; defaults to three halvings from
    /// the single viscosity.
    #[serde(default)]
    pub viscosity_sequence: Option<Vec<f64>>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol_fix")]
    pub tol_fix: f64,
    #[serde(default = "default_tol_contract")]
    pub tol_contract: f64,
    #[serde(default)]
    pub prefactor: Prefactor,
    #[serde(default)]
    pub endpoint_rule: EndpointRule,
    /// Halve the horizon until contraction ratios pass.
    #[serde(default)]
    pub auto_horizon: bool,
    #[serde(default = "default_max_halvings")]
    pub max_halvings: usize,
}

impl Default for SchemeSection {
    fn default() -> Self {
        SchemeSection {
            viscosity: default_nu0(),
            viscosity_sequence: None,
            max_iters: default_max_iters(),
            tol_fix: default_tol_fix(),
            tol_contract: default_tol_contract(),
            prefactor: Prefactor::default(),
            endpoint_rule: EndpointRule::default(),
            auto_horizon: false,
            max_halvings: default_max_halvings(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSection {
    /// Start point (t, x1, .., xn). Defaults to a generic point at t = 0.
    #[serde(default)]
    pub from: Option<Vec<f64>>,
    /// Number of samples along the segment.
    #[serde(default = "default_curve_samples")]
    pub samples: usize,
}

impl Default for CurveSection {
    fn default() -> Self {
        CurveSection {
            from: None,
            samples: default_curve_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    /// Radii for the blow-up fit; defaults to a decade above 4h.
    #[serde(default)]
    pub fit_radii: Option<Vec<f64>>,
    /// Excluded-ball radius around the origin, in grid cells.
    #[serde(default = "default_excluded_cells")]
    pub excluded_radius_cells: f64,
    #[serde(default)]
    pub curve: CurveSection,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        DiagnosticsSection {
            fit_radii: None,
            excluded_radius_cells: default_excluded_cells(),
            curve: CurveSection::default(),
        }
    }
}

/// The complete configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub scheme: SchemeSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_half_width() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_horizon() -> f64 {
    0.1
}
fn default_steps() -> usize {
    16
}
fn default_offset() -> f64 {
    1.0
}
fn default_alpha() -> f64 {
    0.75
}
fn default_plateau() -> f64 {
    0.4
}
fn default_support() -> f64 {
    0.8
}
fn default_amplitude() -> f64 {
    0.1
}
fn default_orientation() -> Orientation {
    Orientation::Radial
}
fn default_h0() -> TimeDerivativeMode {
    TimeDerivativeMode::Zero
}
fn default_nu0() -> f64 {
    0.02
}
fn default_max_iters() -> usize {
    40
}
fn default_tol_fix() -> f64 {
    1e-8
}
fn default_tol_contract() -> f64 {
    0.9
}
fn default_max_halvings() -> usize {
    6
}
fn default_curve_samples() -> usize {
    64
}
fn default_excluded_cells() -> f64 {
    4.0
}
fn default_seed() -> u64 {
    42
}

impl RunConfig {
    /// Full validation with field paths in the messages.
    pub fn validate(&self) -> Result<()> {
        grid::make_grid(
            self.grid.n,
            self.grid.points,
            self.grid.half_width,
            self.grid.offset_origin,
        )
        .map_err(|e| Error::Config(format!("grid: {e}")))?;
        if !(self.data.alpha > 0.5 && self.data.alpha < 1.0) {
            return Err(Error::Config(format!(
                "data.alpha: singularity exponent must lie in (0.5, 1), got {}",
                self.data.alpha
            )));
        }
        self.profile()
            .validate()
            .map_err(|e| Error::Config(format!("data: {e}")))?;
        if self.data.support_radius >= self.grid.half_width {
            return Err(Error::Config(format!(
                "data.support_radius: {} does not fit inside the box (half_width {})",
                self.data.support_radius, self.grid.half_width
            )));
        }
        self.scheme_config()
            .validate()
            .map_err(|e| Error::Config(format!("scheme: {e}")))?;
        if let Some(seq) = &self.scheme.viscosity_sequence {
            if seq.is_empty() {
                return Err(Error::Config(
                    "scheme.viscosity_sequence: must not be empty".to_string(),
                ));
            }
            for w in seq.windows(2) {
                if w[1] >= w[0] {
                    return Err(Error::Config(
                        "scheme.viscosity_sequence: must be strictly decreasing".to_string(),
                    ));
                }
            }
            if seq[seq.len() - 1] <= 0.0 {
                return Err(Error::Config(
                    "scheme.viscosity_sequence: must stay positive".to_string(),
                ));
            }
        }
        if self.diagnostics.excluded_radius_cells < 0.0 {
            return Err(Error::Config(
                "diagnostics.excluded_radius_cells: must be nonnegative".to_string(),
            ));
        }
        if let Some(radii) = &self.diagnostics.fit_radii {
            if radii.len() < 4 {
                return Err(Error::Config(
                    "diagnostics.fit_radii: need at least 4 radii".to_string(),
                ));
            }
        }
        if self.diagnostics.curve.samples < 2 {
            return Err(Error::Config(
                "diagnostics.curve.samples: need at least 2".to_string(),
            ));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        grid::make_grid(
            self.grid.n,
            self.grid.points,
            self.grid.half_width,
            self.grid.offset_origin,
        )
    }

    pub fn profile(&self) -> SingularProfileParams {
        SingularProfileParams {
            offset: self.data.offset,
            alpha: self.data.alpha,
            plateau_radius: self.data.plateau_radius,
            support_radius: self.data.support_radius,
        }
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        SchemeConfig {
            horizon: self.time.horizon,
            steps: self.time.steps,
            nu0: self.scheme.viscosity,
            max_iters: self.scheme.max_iters,
            tol_fix: self.scheme.tol_fix,
            tol_contract: self.scheme.tol_contract,
            prefactor: self.scheme.prefactor,
            endpoint: self.scheme.endpoint_rule,
        }
    }

    /// The sweep sequence: explicit, or three halvings from the single
    /// viscosity.
    pub fn sweep_sequence(&self) -> Vec<f64> {
        self.scheme.viscosity_sequence.clone().unwrap_or_else(|| {
            vec![
                self.scheme.viscosity,
                self.scheme.viscosity / 2.0,
                self.scheme.viscosity / 4.0,
            ]
        })
    }

    /// Excluded-ball radius in physical units.
    pub fn excluded_radius(&self) -> f64 {
        self.diagnostics.excluded_radius_cells * 2.0 * self.grid.half_width
            / self.grid.points as f64
    }

    /// Blow-up fit radii: explicit, or a decade starting at 4h.
    pub fn fit_radii(&self) -> Vec<f64> {
        if let Some(r) = &self.diagnostics.fit_radii {
            let mut r = r.clone();
            r.sort_by(|a, b| a.partial_cmp(b).unwrap());
            return r;
        }
        let h = 2.0 * self.grid.half_width / self.grid.points as f64;
        let r0 = 4.0 * h;
        (0..6)
            .map(|i| r0 * 10.0f64.powf(i as f64 / 5.0))
            .collect()
    }

    /// Canonical JSON with every default filled in.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the canonical form, hex-encoded.
    pub fn hash(&self) -> Result<String> {
        let canon = self.canonical_json()?;
        let digest = Sha256::digest(canon.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Loads and validates a configuration file; parse errors carry the line,
/// validation errors the field path.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| {
        Error::Config(format!(
            "{}: parse error at line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    cfg.validate()?;
    Ok(cfg)
}
