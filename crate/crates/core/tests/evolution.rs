//! Cross-module integration tests: time-reversal symmetry of the evolution,
//! checkpoint/resume equivalence, and the curvature pipeline against an
//! independent pointwise finite-difference evaluation.

use harmlab::data::{build_bump_data, DataList};
use harmlab::diagnostics::{curvature_history, curvature_static};
use harmlab::fields::{FieldsHistory, SymFields};
use harmlab::grid::{make_grid, ScalarGridField, TimeGrid};
use harmlab::io;
use harmlab::kernel::EndpointRule;
use harmlab::picard::{harmonic_residual, run_fixed_point, Prefactor, SchemeConfig, Stepper};
use harmlab::tensor::{self, DerivStack, PointMetric, EPS_DET, MAX_DIM};

fn small_cfg(horizon: f64, steps: usize) -> SchemeConfig {
    SchemeConfig {
        horizon,
        steps,
        nu0: 0.02,
        max_iters: 50,
        tol_fix: 1e-10,
        tol_contract: 0.9,
        prefactor: Prefactor::G00,
        endpoint: EndpointRule::ApproxIdentity,
    }
}

#[test]
fn time_reversal_returns_to_the_initial_slice() {
    // Evolve smooth even data with h0 = 0 for time T, negate h, evolve again:
    // the viscous term is the only symmetry breaker, so the recovered slice
    // matches the data within twice the residual level of the runs.
    let grid = make_grid(2, 32, 1.0, true).unwrap();
    let data = build_bump_data(grid, 0.3, 0.7, 0.05, (2, 2)).unwrap();
    let cfg = small_cfg(0.04, 8);
    let (forward, _) = run_fixed_point(&data, &cfg).unwrap();
    let res_fwd = harmonic_residual(&forward, Prefactor::G00, 0.0)
        .unwrap()
        .combined;

    let last = forward.slices() - 1;
    let g_final = forward.g[last].clone();
    let mut h_neg = forward.h[last].clone();
    for c in h_neg.components_mut() {
        *c = c.scaled(-1.0);
    }
    let reversed = DataList::from_metric_fields(g_final, h_neg, 2.1).unwrap();
    assert!(reversed.admissibility.passed);
    let (backward, _) = run_fixed_point(&reversed, &cfg).unwrap();
    let res_bwd = harmonic_residual(&backward, Prefactor::G00, 0.0)
        .unwrap()
        .combined;

    let recovered = &backward.g[backward.slices() - 1];
    let err = recovered.sup_distance(&data.slice.g);
    let tol = 2.0 * res_fwd.max(res_bwd);
    assert!(
        err <= tol,
        "time reversal error {err:.3e} exceeds 2x residual level {tol:.3e}"
    );
}

#[test]
fn checkpoint_resume_matches_continuous_run() {
    let dir = tempfile::tempdir().unwrap();
    let grid = make_grid(2, 16, 1.0, true).unwrap();
    let data = build_bump_data(grid, 0.3, 0.7, 0.05, (2, 2)).unwrap();
    let cfg = small_cfg(0.05, 4);
    let stepper = Stepper::new(&data, &cfg).unwrap();
    let first = stepper.step(&stepper.initial()).unwrap();

    let manifest =
        io::save_checkpoint(dir.path(), &first, 1, cfg.nu0, "test", None).unwrap();
    let (_, restored) = io::load_checkpoint(&manifest).unwrap();
    assert_eq!(restored.sup_distance(&first), 0.0, "checkpoint must be exact");

    let direct = stepper.step(&first).unwrap();
    let resumed = stepper.step(&restored).unwrap();
    assert_eq!(
        direct.sup_distance(&resumed),
        0.0,
        "resumed step must reproduce the continuous run bitwise"
    );
}

// ---------------------------------------------------------------------------
// Curvature pipeline vs an independent pointwise evaluation.
// ---------------------------------------------------------------------------

const AMP: f64 = 0.05;

/// A smooth analytic metric, low-mode in space and linear in time, with all
/// derivatives available in closed form.
fn analytic_metric(t: f64, x: f64, y: f64) -> PointMetric {
    use std::f64::consts::PI;
    PointMetric::from_fn(3, |mu, nu| match (mu, nu) {
        (0, 0) => -1.0 + AMP * (PI * x).sin() * (PI * y).cos() * (1.0 + 0.2 * t),
        (1, 1) => 1.0 + AMP * (PI * x).cos() * (1.0 - 0.3 * t),
        (2, 2) => 1.0 + AMP * (PI * y).sin() * (1.0 + 0.1 * t),
        (0, 1) => 0.3 * AMP * (PI * x).sin() * (PI * y).sin() * t,
        (1, 2) => 0.2 * AMP * (2.0 * PI * x).sin() * (PI * y).cos(),
        _ => 0.0,
    })
}

fn metric_derivative(dir: usize, t: f64, x: f64, y: f64) -> [[f64; MAX_DIM]; MAX_DIM] {
    // Central differences of the closed form; step small enough that the
    // truncation error sits far below the comparison tolerance.
    let e = 1e-5;
    let (ta, xa, ya, tb, xb, yb) = match dir {
        0 => (t + e, x, y, t - e, x, y),
        1 => (t, x + e, y, t, x - e, y),
        _ => (t, x, y + e, t, x, y - e),
    };
    let ga = analytic_metric(ta, xa, ya);
    let gb = analytic_metric(tb, xb, yb);
    let mut out = [[0.0; MAX_DIM]; MAX_DIM];
    for mu in 0..3 {
        for nu in 0..3 {
            out[mu][nu] = (ga.get(mu, nu) - gb.get(mu, nu)) / (2.0 * e);
        }
    }
    out
}

fn gamma_at(t: f64, x: f64, y: f64) -> tensor::ChristoffelPoint {
    let g = analytic_metric(t, x, y);
    let g_inv = g.invert(EPS_DET).unwrap();
    let mut stack: DerivStack = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
    for dir in 0..3 {
        let d = metric_derivative(dir, t, x, y);
        for mu in 0..3 {
            for nu in 0..3 {
                stack[dir][mu][nu] = d[mu][nu];
            }
        }
    }
    tensor::christoffel(&g_inv, &stack)
}

/// Scalar curvature at one point with every Christoffel derivative taken by
/// finite differences of the closed-form metric — fully independent of the
/// grid pipeline.
fn scalar_curvature_fd(t: f64, x: f64, y: f64) -> f64 {
    let e = 1e-4;
    let gamma = gamma_at(t, x, y);
    let dgamma = |dir: usize| -> tensor::ChristoffelPoint {
        match dir {
            0 => gamma_at(t + e, x, y),
            1 => gamma_at(t, x + e, y),
            _ => gamma_at(t, x, y + e),
        }
    };
    let mgamma = |dir: usize| -> tensor::ChristoffelPoint {
        match dir {
            0 => gamma_at(t - e, x, y),
            1 => gamma_at(t, x - e, y),
            _ => gamma_at(t, x, y - e),
        }
    };
    let mut ric = [[0.0f64; 3]; 3];
    for mu in 0..3 {
        for nu in 0..3 {
            let mut val = 0.0;
            for a in 0..3 {
                let plus = dgamma(a);
                let minus = mgamma(a);
                val += (plus.get(a, mu, nu) - minus.get(a, mu, nu)) / (2.0 * e);
            }
            let plus = dgamma(nu);
            let minus = mgamma(nu);
            for a in 0..3 {
                val -= (plus.get(a, a, mu) - minus.get(a, a, mu)) / (2.0 * e);
            }
            for a in 0..3 {
                for b in 0..3 {
                    val += gamma.get(a, a, b) * gamma.get(b, mu, nu)
                        - gamma.get(a, mu, b) * gamma.get(b, nu, a);
                }
            }
            ric[mu][nu] = val;
        }
    }
    let g_inv = analytic_metric(t, x, y).invert(EPS_DET).unwrap();
    let mut scalar = 0.0;
    for mu in 0..3 {
        for nu in 0..3 {
            scalar += g_inv.get(mu, nu) * ric[mu][nu];
        }
    }
    scalar
}

#[test]
fn curvature_pipeline_matches_pointwise_finite_differences() {
    let grid = make_grid(2, 32, 1.0, false).unwrap();
    let time = TimeGrid::new(0.1, 16).unwrap();
    let mut hist = FieldsHistory::zeros(grid, time);
    for m in 0..hist.slices() {
        let t = time.time(m);
        hist.g[m] = SymFields::from_fn(grid, 3, |mu, nu, x| {
            analytic_metric(t, x[0], x[1]).get(mu, nu)
        });
        hist.h[m] = SymFields::from_fn(grid, 3, |mu, nu, x| {
            metric_derivative(0, t, x[0], x[1])[mu][nu]
        });
        for k in 0..2 {
            hist.dg[m][k] = SymFields::from_fn(grid, 3, |mu, nu, x| {
                metric_derivative(k + 1, t, x[0], x[1])[mu][nu]
            });
        }
    }
    let slices = curvature_history(&hist).unwrap();

    // Compare at a few interior grid points of an interior slice.
    let m = 8;
    let t = time.time(m);
    let scalar = &slices[m].scalar;
    for (i, j) in [(5usize, 9usize), (11, 3), (20, 27)] {
        let x = grid.coord(i);
        let y = grid.coord(j);
        let independent = scalar_curvature_fd(t, x, y);
        let pipeline = scalar.values[[i, j]];
        let denom = independent.abs().max(1.0);
        assert!(
            (pipeline - independent).abs() / denom < 1e-6,
            "scalar curvature mismatch at ({x}, {y}): pipeline {pipeline}, independent {independent}"
        );
    }
}

#[test]
fn linearized_curvature_scales_with_amplitude() {
    // Flat plus a smooth generic perturbation of amplitude a: ||R||_sup is
    // O(a), so the log-log slope over a decade of amplitudes is 1.
    use std::f64::consts::PI;
    let grid = make_grid(2, 32, 1.0, true).unwrap();
    let sup_r = |a: f64| {
        let g = SymFields::from_fn(grid, 3, |mu, nu, x| {
            let base = if mu != nu {
                0.0
            } else if mu == 0 {
                -1.0
            } else {
                1.0
            };
            let wiggle = match (mu, nu) {
                (0, 0) => (PI * x[0]).sin() * (PI * x[1]).cos(),
                (1, 1) => (PI * x[1]).sin() + 0.5 * (2.0 * PI * x[0]).cos(),
                (2, 2) => (PI * x[0]).cos() * (PI * x[1]).sin(),
                (0, 1) => 0.4 * (PI * x[0]).sin(),
                (1, 2) => 0.3 * (PI * x[1]).cos(),
                _ => 0.2,
            };
            base + a * wiggle
        });
        let data = DataList::from_metric_fields(g, SymFields::zeros(grid, 3), 2.1).unwrap();
        curvature_static(&data).unwrap().scalar.sup_norm()
    };
    let r3 = sup_r(1e-3);
    let r4 = sup_r(1e-4);
    let slope = (r3 / r4).log10();
    assert!(
        (slope - 1.0).abs() < 0.05,
        "linearized curvature slope {slope} (sup {r3:.3e} vs {r4:.3e})"
    );
}
