//! Exact harmonic-gauge wave testbed: diag(-H, H, 1, ..) with
//! H = 1 - A sin(k (x1 - t)).
//!
//! The family diag(-H, H, 1, ..) has vanishing contracted Christoffels for
//! any profile H(t, x1); the traveling choice additionally solves the
//! reduced vacuum system exactly (verified symbolically in
//! python/symbolic_oracle.py). Sampling it on the grid gives a baseline for
//! residual and constraint diagnostics: whatever those report on this data
//! is pure discretization error.

use crate::fields::{FieldsHistory, SymFields};
use crate::grid::{GridSpec, ScalarGridField, TimeGrid};

/// Parameters of the traveling gauge wave.
#[derive(Debug, Clone, Copy)]
pub struct GaugeWave {
    /// Wave amplitude (must stay below 1 to keep the metric Lorentzian).
    pub amplitude: f64,
    /// Number of full wavelengths across the box (the wavelength is
    /// 2L / periods, so the sampled field is exactly periodic).
    pub periods: usize,
}

impl Default for GaugeWave {
    fn default() -> Self {
        GaugeWave {
            amplitude: 0.1,
            periods: 1,
        }
    }
}

impl GaugeWave {
    pub fn wavenumber(&self, grid: &GridSpec) -> f64 {
        std::f64::consts::PI * self.periods as f64 / grid.half_width
    }

    fn h_profile(&self, k: f64, t: f64, x1: f64) -> (f64, f64, f64) {
        let phase = k * (x1 - t);
        let h = 1.0 - self.amplitude * phase.sin();
        let hx = -self.amplitude * k * phase.cos();
        let ht = self.amplitude * k * phase.cos();
        (h, hx, ht)
    }

    /// Samples g, its spatial derivatives, and h = dg/dt analytically on the
    /// space-time grid.
    pub fn sample_history(&self, grid: GridSpec, time: TimeGrid) -> FieldsHistory {
        assert!(self.amplitude.abs() < 1.0);
        let dim = grid.n + 1;
        let k = self.wavenumber(&grid);
        let mut out = FieldsHistory::zeros(grid, time);
        for m in 0..time.slices() {
            let t = time.time(m);
            out.g[m] = SymFields::from_fn(grid, dim, |mu, nu, x| {
                let (h, _, _) = self.h_profile(k, t, x[0]);
                match (mu, nu) {
                    (0, 0) => -h,
                    (1, 1) => h,
                    (a, b) if a == b => 1.0,
                    _ => 0.0,
                }
            });
            out.h[m] = SymFields::from_fn(grid, dim, |mu, nu, x| {
                let (_, _, ht) = self.h_profile(k, t, x[0]);
                match (mu, nu) {
                    (0, 0) => -ht,
                    (1, 1) => ht,
                    _ => 0.0,
                }
            });
            // Only the x1 derivative is nonzero.
            out.dg[m][0] = SymFields::from_fn(grid, dim, |mu, nu, x| {
                let (_, hx, _) = self.h_profile(k, t, x[0]);
                match (mu, nu) {
                    (0, 0) => -hx,
                    (1, 1) => hx,
                    _ => 0.0,
                }
            });
            for axis in 1..grid.n {
                out.dg[m][axis] = SymFields::zeros(grid, dim);
            }
        }
        out
    }

    /// The exact metric slice at one time, as plain fields.
    pub fn sample_slice(&self, grid: GridSpec, t: f64) -> SymFields {
        let dim = grid.n + 1;
        let k = self.wavenumber(&grid);
        SymFields::from_fn(grid, dim, |mu, nu, x| {
            let (h, _, _) = self.h_profile(k, t, x[0]);
            match (mu, nu) {
                (0, 0) => -h,
                (1, 1) => h,
                (a, b) if a == b => 1.0,
                _ => 0.0,
            }
        })
    }

    /// Pointwise scalar field H(t, x1) for tests.
    pub fn profile_field(&self, grid: GridSpec, t: f64) -> ScalarGridField {
        let k = self.wavenumber(&grid);
        ScalarGridField::from_fn(grid, |x| self.h_profile(k, t, x[0]).0)
    }
}
