//! Discretized periodic spatial box, spectral derivatives, and the discrete
//! Sobolev/Hölder norm proxies used by every other module.
//!
//! The domain is the periodic box [-L, L)^n with N points per axis and
//! spacing h = 2L/N. With the origin offset enabled, every grid point is
//! shifted by h/2 per axis so the coordinate origin is never a sample —
//! fields with one bad point at the origin are probed by shrinking radii,
//! never by point evaluation.
//!
//! Derivatives are spectral (Fourier) and therefore exact for band-limited
//! fields independent of N; a 4th-order centered finite-difference backend
//! is kept as a cross-check oracle.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{ArrayD, Axis, Dimension, IxDyn};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Spatial dimensions supported by the box.
pub const MAX_SPATIAL_DIM: usize = 3;

/// The discretized periodic spatial box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Spatial dimension, 1 to 3.
    pub n: usize,
    /// Points per axis (even, at least 16).
    pub points: usize,
    /// Box half-width L; the box is [-L, L)^n.
    pub half_width: f64,
    /// Shift every sample by h/2 per axis so the origin is not a grid point.
    pub offset_origin: bool,
}

/// Builds a validated grid.
pub fn make_grid(n: usize, points: usize, half_width: f64, offset_origin: bool) -> Result<GridSpec> {
    if n == 0 || n > MAX_SPATIAL_DIM {
        return Err(Error::Config(format!(
            "spatial dimension must be 1..={MAX_SPATIAL_DIM}, got {n}"
        )));
    }
    if points < 16 || points % 2 != 0 {
        return Err(Error::Config(format!(
            "points per axis must be even and >= 16, got {points}"
        )));
    }
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(Error::Config(format!(
            "box half-width must be positive and finite, got {half_width}"
        )));
    }
    Ok(GridSpec {
        n,
        points,
        half_width,
        offset_origin,
    })
}

impl GridSpec {
    /// Grid spacing h = 2L/N.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// Shape of a scalar field over the grid: `n` axes of `points` each.
    pub fn shape(&self) -> Vec<usize> {
        vec![self.points; self.n]
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.points.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of sample `i` along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        let shift = if self.offset_origin { 0.5 } else { 0.0 };
        -self.half_width + (i as f64 + shift) * self.spacing()
    }

    /// All coordinates along one axis.
    pub fn coords(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.coord(i)).collect()
    }

    /// Position vector of a multi-index.
    pub fn position(&self, index: &[usize]) -> Vec<f64> {
        index.iter().map(|&i| self.coord(i)).collect()
    }

    /// Euclidean distance of a multi-index from the coordinate origin.
    pub fn radius(&self, index: &[usize]) -> f64 {
        self.position(index).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Physical wavenumber of Fourier mode `m` along one axis, k = pi * m~ / L
    /// with m~ the signed mode index.
    pub fn wavenumber(&self, m: usize) -> f64 {
        let half = self.points / 2;
        let signed = if m <= half {
            m as isize
        } else {
            m as isize - self.points as isize
        };
        std::f64::consts::PI * signed as f64 / self.half_width
    }
}

/// Uniform time grid: `steps` intervals of width dt = T / steps, storing
/// `steps + 1` slices t_0 = 0 .. t_steps = T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::Config(format!(
                "time horizon must be positive, got {horizon}"
            )));
        }
        if steps < 2 {
            return Err(Error::Config(format!(
                "need at least 2 time steps, got {steps}"
            )));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Number of stored slices (steps + 1).
    pub fn slices(&self) -> usize {
        self.steps + 1
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.dt()
    }
}

/// A real scalar field sampled on the grid.
#[derive(Debug, Clone)]
pub struct ScalarGridField {
    pub grid: GridSpec,
    pub values: ArrayD<f64>,
}

impl ScalarGridField {
    pub fn zeros(grid: GridSpec) -> Self {
        ScalarGridField {
            grid,
            values: ArrayD::zeros(IxDyn(&grid.shape())),
        }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        ScalarGridField {
            grid,
            values: ArrayD::from_elem(IxDyn(&grid.shape()), c),
        }
    }

    /// Samples a function of the position vector.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let mut values = ArrayD::zeros(IxDyn(&grid.shape()));
        let mut pos = vec![0.0; grid.n];
        for (idx, v) in values.indexed_iter_mut() {
            for (a, p) in pos.iter_mut().enumerate() {
                *p = grid.coord(idx[a]);
            }
            *v = f(&pos);
        }
        ScalarGridField { grid, values }
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice().expect("grid fields are standard layout")
    }

    pub fn as_slice_mut(&mut self) -> &mut [f64] {
        self.values
            .as_slice_mut()
            .expect("grid fields are standard layout")
    }

    pub fn sup_norm(&self) -> f64 {
        self.as_slice().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete L1 norm, h^n * sum |f|.
    pub fn l1_norm(&self) -> f64 {
        let hn = self.grid.spacing().powi(self.grid.n as i32);
        hn * self.as_slice().iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Discrete integral, h^n * sum f.
    pub fn integral(&self) -> f64 {
        let hn = self.grid.spacing().powi(self.grid.n as i32);
        hn * self.as_slice().iter().sum::<f64>()
    }

    pub fn sup_distance(&self, other: &ScalarGridField) -> f64 {
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn scaled(&self, c: f64) -> ScalarGridField {
        ScalarGridField {
            grid: self.grid,
            values: &self.values * c,
        }
    }

    pub fn add(&self, other: &ScalarGridField) -> ScalarGridField {
        ScalarGridField {
            grid: self.grid,
            values: &self.values + &other.values,
        }
    }

    pub fn sub(&self, other: &ScalarGridField) -> ScalarGridField {
        ScalarGridField {
            grid: self.grid,
            values: &self.values - &other.values,
        }
    }

    pub fn mul(&self, other: &ScalarGridField) -> ScalarGridField {
        ScalarGridField {
            grid: self.grid,
            values: &self.values * &other.values,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }
}

// ---------------------------------------------------------------------------
// FFT machinery
// ---------------------------------------------------------------------------

type PlanKey = (usize, bool);

fn plan_for(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<PlanKey, Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().expect("fft plan cache poisoned");
    cache
        .entry((len, forward))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if forward {
                planner.plan_fft_forward(len)
            } else {
                planner.plan_fft_inverse(len)
            }
        })
        .clone()
}

/// In-place FFT along one axis of a complex array (inverse is normalized).
pub fn fft_axis(data: &mut ArrayD<Complex64>, axis: usize, forward: bool) {
    let len = data.shape()[axis];
    let plan = plan_for(len, forward);
    let mut lane_buf = vec![Complex64::new(0.0, 0.0); len];
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    let inv_len = 1.0 / len as f64;
    for mut lane in data.lanes_mut(Axis(axis)) {
        for (b, v) in lane_buf.iter_mut().zip(lane.iter()) {
            *b = *v;
        }
        plan.process_with_scratch(&mut lane_buf, &mut scratch);
        if forward {
            for (v, b) in lane.iter_mut().zip(lane_buf.iter()) {
                *v = *b;
            }
        } else {
            for (v, b) in lane.iter_mut().zip(lane_buf.iter()) {
                *v = *b * inv_len;
            }
        }
    }
}

/// Full n-dimensional forward transform of a real field.
pub fn forward_fft(field: &ScalarGridField) -> ArrayD<Complex64> {
    let mut data = field.values.mapv(|v| Complex64::new(v, 0.0));
    for axis in 0..field.grid.n {
        fft_axis(&mut data, axis, true);
    }
    data
}

/// Inverse of [`forward_fft`], discarding the imaginary part.
pub fn inverse_fft(grid: GridSpec, mut data: ArrayD<Complex64>) -> ScalarGridField {
    for axis in 0..grid.n {
        fft_axis(&mut data, axis, false);
    }
    ScalarGridField {
        grid,
        values: data.mapv(|c| c.re),
    }
}

/// Spectral (Fourier) derivative along `axis`; exact for band-limited fields.
/// The Nyquist mode is zeroed, the standard choice for real signals.
pub fn spatial_derivative(field: &ScalarGridField, axis: usize) -> ScalarGridField {
    let grid = field.grid;
    assert!(axis < grid.n, "axis {axis} out of range for n = {}", grid.n);
    let mut data = field.values.mapv(|v| Complex64::new(v, 0.0));
    fft_axis(&mut data, axis, true);
    let half = grid.points / 2;
    for (idx, v) in data.indexed_iter_mut() {
        let m = idx[axis];
        if m == half {
            *v = Complex64::new(0.0, 0.0);
        } else {
            *v *= Complex64::new(0.0, grid.wavenumber(m));
        }
    }
    fft_axis(&mut data, axis, false);
    ScalarGridField {
        grid,
        values: data.mapv(|c| c.re),
    }
}

/// 4th-order centered finite-difference derivative with periodic wrap.
/// Cross-check oracle for [`spatial_derivative`].
pub fn fd4_derivative(field: &ScalarGridField, axis: usize) -> ScalarGridField {
    let grid = field.grid;
    let np = grid.points;
    let h = grid.spacing();
    let mut out = field.values.clone();
    {
        let src = &field.values;
        for (idx, v) in out.indexed_iter_mut() {
            let at = |off: isize| {
                let mut j = idx.slice().to_vec();
                j[axis] = ((idx[axis] as isize + off).rem_euclid(np as isize)) as usize;
                src[IxDyn(&j)]
            };
            *v = (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h);
        }
    }
    ScalarGridField { grid, values: out }
}

/// Discrete Sobolev norm (sum_k (1 + |k|^2)^s |f_k|^2)^{1/2} with modes scaled
/// to the box and coefficients normalized so s = 0 reproduces the L2 norm.
pub fn sobolev_norm(field: &ScalarGridField, s: f64) -> f64 {
    assert!(s >= 0.0, "sobolev order must be nonnegative");
    let grid = field.grid;
    let spec = forward_fft(field);
    let volume = (2.0 * grid.half_width).powi(grid.n as i32);
    let scale = volume / (grid.len() as f64).powi(2);
    let mut acc = 0.0;
    for (idx, v) in spec.indexed_iter() {
        let mut k2 = 0.0;
        for a in 0..grid.n {
            let k = grid.wavenumber(idx[a]);
            k2 += k * k;
        }
        acc += (1.0 + k2).powf(s) * v.norm_sqr();
    }
    (scale * acc).sqrt()
}

/// Width of the pair stencil used by the Hölder quotient, in grid cells.
const HOLDER_STENCIL: usize = 4;

/// Discrete proxy for the C^{1,δ} norm: sup |f| + sup |∇f| plus the maximal
/// Hölder quotient |∇f(z) - ∇f(y)| / |z - y|^δ over grid-point pairs within a
/// small stencil.
///
/// The gradient here is a centered finite difference, one-sided at the box
/// edge (no periodic wrap): the proxy targets compactly supported profiles
/// for which the box boundary is far from the interesting region.
pub fn holder_norm_proxy(field: &ScalarGridField, delta: f64) -> f64 {
    assert!(
        delta > 0.0 && delta <= 1.0,
        "Hölder exponent must lie in (0, 1], got {delta}"
    );
    let grid = field.grid;
    let np = grid.points;
    let h = grid.spacing();

    // Per-axis non-wrapping gradient components.
    let mut grads: Vec<ArrayD<f64>> = Vec::with_capacity(grid.n);
    for axis in 0..grid.n {
        let mut g = field.values.clone();
        let src = &field.values;
        for (idx, v) in g.indexed_iter_mut() {
            let i = idx[axis];
            let at = |j: usize| {
                let mut k = idx.slice().to_vec();
                k[axis] = j;
                src[IxDyn(&k)]
            };
            *v = if i == 0 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
            } else if i == np - 1 {
                (3.0 * at(np - 1) - 4.0 * at(np - 2) + at(np - 3)) / (2.0 * h)
            } else {
                (at(i + 1) - at(i - 1)) / (2.0 * h)
            };
        }
        grads.push(g);
    }

    let grad_mag = |idx: &IxDyn| -> f64 {
        grads
            .iter()
            .map(|g| {
                let v = g[idx.clone()];
                v * v
            })
            .sum::<f64>()
            .sqrt()
    };

    let mut sup_f: f64 = 0.0;
    let mut sup_grad: f64 = 0.0;
    let mut quotient: f64 = 0.0;
    for (idx, v) in field.values.indexed_iter() {
        sup_f = sup_f.max(v.abs());
        let here = IxDyn(idx.slice());
        sup_grad = sup_grad.max(grad_mag(&here));
        for axis in 0..grid.n {
            for d in 1..=HOLDER_STENCIL {
                let j = idx[axis] + d;
                if j >= np {
                    continue;
                }
                let mut other = idx.slice().to_vec();
                other[axis] = j;
                let other = IxDyn(&other);
                let mut diff2 = 0.0;
                for g in &grads {
                    let dv = g[here.clone()] - g[other.clone()];
                    diff2 += dv * dv;
                }
                let dist = d as f64 * h;
                quotient = quotient.max(diff2.sqrt() / dist.powf(delta));
            }
        }
    }
    sup_f + sup_grad + quotient
}
