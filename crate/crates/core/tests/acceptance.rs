//! Acceptance suite: every check runs at its stated tolerance and prints one
//! pass/fail line. The suite runs as a single sequential test so timings and
//! memory are deterministic; all criteria are evaluated even when an early
//! one fails, and the test asserts at the end.

use std::time::Instant;

use harmlab::data::{
    build_singular_data, bump, singular_profile, singular_profile_d2, Orientation,
    SingularProfileParams, TimeDerivativeMode,
};
use harmlab::diagnostics::{
    constraint_monitor, curvature_history, curvature_static, fit_blowup_exponent, gap_length,
    CurveSample, GapConvention,
};
use harmlab::gauge_wave::GaugeWave;
use harmlab::grid::{self, make_grid, ScalarGridField, TimeGrid};
use harmlab::kernel::{
    conv_spatial, sample_kernel, sample_kernel_derivative, verify_uniform_l1, EndpointRule,
    KernelSpec,
};
use harmlab::picard::{
    exclusion_mask, harmonic_residual, run_fixed_point, run_fixed_point_auto, viscosity_sweep,
    Prefactor, SchemeConfig,
};
use harmlab::tensor::unknown_count;

struct Suite {
    outcomes: Vec<(String, bool, f64, f64, String)>,
}

impl Suite {
    fn new() -> Self {
        Suite {
            outcomes: Vec::new(),
        }
    }

    fn run(&mut self, name: &str, budget: f64, f: impl FnOnce() -> (bool, String)) {
        let clock = Instant::now();
        let (ok, detail) = f();
        let elapsed = clock.elapsed().as_secs_f64();
        self.outcomes
            .push((name.to_string(), ok, elapsed, budget, detail));
    }

    fn finish(self) {
        let mut all = true;
        for (name, ok, elapsed, budget, detail) in &self.outcomes {
            let within = *elapsed <= *budget;
            let verdict = if *ok && within { "PASS" } else { "FAIL" };
            println!(
                "criterion {name:<26} {verdict}  [{elapsed:7.2}s of {budget:5.0}s]  {detail}"
            );
            all &= *ok && within;
        }
        assert!(all, "acceptance criteria failed (see lines above)");
    }
}

fn min_ratio(ratios: &[f64]) -> f64 {
    ratios.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[test]
fn acceptance() {
    let mut suite = Suite::new();

    // ------------------------------------------------------------------
    // 1. Flat-space fixed point: convergence at l = 1 with everything zero.
    suite.run("01 flat fixed point", 5.0, || {
        let grid = make_grid(2, 64, 1.0, true).unwrap();
        let data = build_singular_data(
            grid,
            &SingularProfileParams::default(),
            0.0,
            Orientation::Radial,
            TimeDerivativeMode::Zero,
        )
        .unwrap();
        let cfg = SchemeConfig {
            horizon: 0.1,
            steps: 16,
            nu0: 0.02,
            max_iters: 10,
            tol_fix: 1e-12,
            tol_contract: 0.9,
            prefactor: Prefactor::G00,
            endpoint: EndpointRule::ApproxIdentity,
        };
        let (fields, record) = run_fixed_point(&data, &cfg).unwrap();
        let res = harmonic_residual(&fields, Prefactor::G00, 0.0).unwrap();
        let constraint = constraint_monitor(&fields, 0.0).unwrap();
        let curvature = curvature_history(&fields).unwrap();
        let curvature_sup = curvature
            .iter()
            .map(|s| s.scalar.sup_norm())
            .fold(0.0f64, f64::max);
        let ok = record.converged
            && record.iterations == 1
            && record.norms.iter().all(|n| *n < 1e-12)
            && res.combined < 1e-12
            && constraint.overall_sup() == 0.0
            && curvature_sup == 0.0;
        (
            ok,
            format!(
                "l = {}, increment {:.1e}, residual {:.1e}, constraint {:.1e}, curvature {:.1e}",
                record.iterations,
                record.norms.first().copied().unwrap_or(0.0),
                res.combined,
                constraint.overall_sup(),
                curvature_sup
            ),
        )
    });

    // ------------------------------------------------------------------
    // 2. Unknown count of the first-order system.
    suite.run("02 unknown count", 5.0, || {
        let ok = unknown_count(3) == 50 && unknown_count(2) == 24 && unknown_count(1) == 9;
        (ok, format!("n=3 -> {}, n=2 -> {}, n=1 -> {}", unknown_count(3), unknown_count(2), unknown_count(1)))
    });

    // ------------------------------------------------------------------
    // 3. Kernel suite: mass, semigroup, convolution rule, nu-uniform bounds.
    suite.run("03 kernel suite", 30.0, || {
        let grid2 = make_grid(2, 64, 1.0, true).unwrap();
        let mut mass_err: f64 = 0.0;
        for (nu0, t) in [(0.05, 0.1), (0.01, 0.5), (0.2, 1.0)] {
            let k = sample_kernel(&KernelSpec::new(nu0, t, grid2).unwrap());
            mass_err = mass_err.max((k.integral() - 1.0).abs());
        }

        let grid1 = make_grid(1, 128, 1.0, false).unwrap();
        let nu0 = 0.05;
        let k1 = sample_kernel(&KernelSpec::new(nu0, 0.3, grid1).unwrap());
        let k2 = sample_kernel(&KernelSpec::new(nu0, 0.5, grid1).unwrap());
        let k12 = sample_kernel(&KernelSpec::new(nu0, 0.8, grid1).unwrap());
        let semigroup_err = conv_spatial(&k1, &k2).unwrap().sup_distance(&k12);

        let spec = KernelSpec::new(0.03, 0.4, grid1).unwrap();
        let kk = sample_kernel(&spec);
        let dk = sample_kernel_derivative(&spec, 0);
        let f = ScalarGridField::from_fn(grid1, |x| {
            (2.0 * std::f64::consts::PI * x[0]).sin() + 0.5 * (std::f64::consts::PI * x[0]).cos()
        });
        let a = grid::spatial_derivative(&conv_spatial(&f, &kk).unwrap(), 0);
        let b = conv_spatial(&f, &dk).unwrap();
        let c = conv_spatial(&grid::spatial_derivative(&f, 0), &kk).unwrap();
        let rule_err = a.sup_distance(&b).max(a.sup_distance(&c));

        let table = verify_uniform_l1(&[1e-1, 1e-2, 1e-3, 1e-4], 0.1).unwrap();
        let collapsed: Vec<f64> = table.rows.iter().map(|r| r.deriv_l1_collapsed).collect();
        let cmin = collapsed.iter().cloned().fold(f64::INFINITY, f64::min);
        let cmax = collapsed.iter().cloned().fold(0.0f64, f64::max);
        let spread = cmax / cmin - 1.0;
        let mass_t = table
            .rows
            .iter()
            .map(|r| (r.mass_l1 - table.horizon).abs())
            .fold(0.0f64, f64::max);

        let ok = mass_err < 1e-10
            && semigroup_err < 1e-8
            && rule_err < 1e-8
            && spread < 0.10
            && table.within_cap
            && mass_t < 1e-6;
        (
            ok,
            format!(
                "mass {mass_err:.1e}, semigroup {semigroup_err:.1e}, rule {rule_err:.1e}, L1 spread {:.2}%",
                100.0 * spread
            ),
        )
    });

    // ------------------------------------------------------------------
    // 4. Singular-profile regularity: stable H2, bounded Hölder proxy,
    //    envelope exponent 1 - 2 alpha.
    suite.run("04 profile regularity", 60.0, || {
        let p = SingularProfileParams::default();
        let mut h2 = Vec::new();
        let mut holder = Vec::new();
        for np in [64usize, 128, 256] {
            let g = make_grid(1, np, 1.0, true).unwrap();
            let f = ScalarGridField::from_fn(g, |x| singular_profile(x[0], &p));
            h2.push(grid::sobolev_norm(&f, 2.0));
            holder.push(grid::holder_norm_proxy(&f, 0.4));
        }
        let h2_drift = h2
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / w[0])
            .fold(0.0f64, f64::max);
        let holder_growth = holder.iter().cloned().fold(0.0f64, f64::max) / holder[0];

        // Envelope exponent from dyadic window maxima of |f''|.
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut r = 1e-4;
        while r < 1e-2 {
            let mut peak = 0.0f64;
            for i in 0..512 {
                let z = r * (1.0 + i as f64 / 512.0);
                peak = peak.max(singular_profile_d2(z, &p).unwrap().abs());
            }
            xs.push((1.5 * r).ln());
            ys.push(peak.ln());
            r *= 2.0;
        }
        let nf = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / nf;
        let my = ys.iter().sum::<f64>() / nf;
        let slope = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();

        let ok = h2_drift < 0.10 && holder_growth < 1.5 && (slope - (-0.5)).abs() < 0.05;
        (
            ok,
            format!(
                "H2 drift {:.2}% per doubling, Hölder growth x{:.2}, envelope slope {slope:.3}",
                100.0 * h2_drift,
                holder_growth
            ),
        )
    });

    // ------------------------------------------------------------------
    // 5. Data-slice curvature blow-up with exponent 1 - 2 alpha = -0.5.
    suite.run("05 curvature blow-up", 60.0, || {
        let grid = make_grid(2, 1024, 1.0, true).unwrap();
        let data = build_singular_data(
            grid,
            &SingularProfileParams::default(),
            0.1,
            Orientation::Radial,
            TimeDerivativeMode::Zero,
        )
        .unwrap();
        let slice = curvature_static(&data).unwrap();
        // The fit window starts where the grid resolves the phase of the
        // oscillatory factor (local wavelength >= a few cells) and spans one
        // decade.
        let h = grid.spacing();
        let radii: Vec<f64> = (0..6)
            .map(|i| 9.5 * h * 10.0f64.powf(i as f64 / 5.0))
            .collect();
        let fit = fit_blowup_exponent(&slice.scalar, &[0.0, 0.0], &radii).unwrap();
        let mask = exclusion_mask(&grid, 4.0 * h);
        let finite_outside = slice
            .scalar
            .as_slice()
            .iter()
            .zip(&mask)
            .all(|(v, keep)| !keep || v.is_finite());
        let grows_inward = fit.maxima.first().unwrap() > fit.maxima.last().unwrap();
        let ok = (fit.exponent - (-0.5)).abs() < 0.1
            && fit.residual < 0.1
            && finite_outside
            && grows_inward;
        (
            ok,
            format!(
                "beta {:.3} (target -0.5 +- 0.1), fit residual {:.3}, finite outside 4h: {finite_outside}",
                fit.exponent, fit.residual
            ),
        )
    });

    // ------------------------------------------------------------------
    // 6 + 8. Contraction with auto horizon, nu-uniform contraction factor,
    //        and constraint propagation on the converged run.
    let grid6 = make_grid(2, 64, 1.0, true).unwrap();
    let data6 = build_singular_data(
        grid6,
        &SingularProfileParams::default(),
        0.1,
        Orientation::Radial,
        TimeDerivativeMode::Zero,
    )
    .unwrap();
    let cfg6 = SchemeConfig {
        horizon: 0.05,
        steps: 32,
        nu0: 0.02,
        max_iters: 60,
        tol_fix: 1e-8,
        tol_contract: 0.9,
        prefactor: Prefactor::G00,
        endpoint: EndpointRule::ApproxIdentity,
    };
    let mut fields6 = None;
    suite.run("06 contraction", 600.0, || {
        let (fields, record, effective) = match run_fixed_point_auto(&data6, &cfg6, 4) {
            Ok(v) => v,
            Err(e) => return (false, format!("fixed point failed: {e}")),
        };
        // Three consecutive ratios at or below tol_contract.
        let window_ok = record.contraction_ok(0.9, 3);
        let converged = record.converged;
        // The certified contraction factor (the smallest recorded ratio —
        // late increments are smooth, which is where the kernel bounds are
        // viscosity-uniform) must move by < 5% under halving of nu at the
        // same horizon.
        let m1 = min_ratio(&record.ratios);
        let mut halved = effective;
        halved.nu0 /= 2.0;
        let change = match run_fixed_point(&data6, &halved) {
            Ok((_, rec2)) => {
                let m2 = min_ratio(&rec2.ratios);
                (m2 - m1).abs() / m1
            }
            Err(e) => return (false, format!("halved-viscosity run failed: {e}")),
        };
        let ok = converged && window_ok && change < 0.05;
        fields6 = Some(fields);
        (
            ok,
            format!(
                "T = {}, {} iterations, contraction factor {:.4}, change under nu/2: {:.2}%",
                effective.horizon,
                record.iterations,
                m1,
                100.0 * change
            ),
        )
    });

    suite.run("08 constraint propagation", 600.0, || {
        let fields = match &fields6 {
            Some(f) => f,
            None => return (false, "criterion 6 run unavailable".to_string()),
        };
        let r_excl = 4.0 * grid6.spacing();
        let series = match constraint_monitor(fields, r_excl) {
            Ok(s) => s,
            Err(e) => return (false, format!("monitor failed: {e}")),
        };
        let res = match harmonic_residual(fields, Prefactor::G00, r_excl) {
            Ok(r) => r.combined,
            Err(e) => return (false, format!("residual failed: {e}")),
        };
        let eps0 = series.initial_sup();
        let bound = 10.0 * (eps0 + res);
        let overall = series.overall_sup();
        let margins = harmlab::diagnostics::signature_monitor(fields);
        let margin_ok = margins
            .margins
            .iter()
            .all(|m| *m >= 0.5 * margins.margins[0]);
        let ok = overall <= bound && margin_ok;
        (
            ok,
            format!(
                "sup_t |Gamma| = {overall:.3e} <= 10 (eps0 {eps0:.3e} + residual {res:.3e}); margin floor ok: {margin_ok}"
            ),
        )
    });
    drop(fields6);

    // ------------------------------------------------------------------
    // 7. Viscosity sweep Cauchy distances + residual of the finest solution
    //    against the exact-wave baseline.
    suite.run("07 sweep and residual", 1800.0, || {
        let grid = make_grid(2, 64, 1.0, true).unwrap();
        let profile = SingularProfileParams {
            offset: 1.0,
            alpha: 0.75,
            plateau_radius: 0.15,
            support_radius: 0.85,
        };
        let data = build_singular_data(
            grid,
            &profile,
            1e-4,
            Orientation::Radial,
            TimeDerivativeMode::Zero,
        )
        .unwrap();
        let (horizon, steps) = (0.1, 32usize);
        let cfg = SchemeConfig {
            horizon,
            steps,
            nu0: 1e-2,
            max_iters: 90,
            tol_fix: 1e-8,
            tol_contract: 0.9,
            prefactor: Prefactor::G00,
            endpoint: EndpointRule::ApproxIdentity,
        };
        let nus = [1e-2, 5e-3, 2.5e-3];
        let outcome = match viscosity_sweep(&data, &cfg, &nus) {
            Ok(o) => o,
            Err(e) => return (false, format!("sweep failed: {e}")),
        };
        let d = &outcome.summary.distances;
        let decreasing = d.windows(2).all(|w| w[1] <= 0.7 * w[0]);
        let r_excl = 4.0 * grid.spacing();
        let finest = outcome.solutions.last().unwrap();
        let res = harmonic_residual(finest, Prefactor::G00, r_excl).unwrap();
        let baseline_hist = GaugeWave::default()
            .sample_history(grid, TimeGrid::new(horizon, steps).unwrap());
        let base = harmonic_residual(&baseline_hist, Prefactor::G00, r_excl).unwrap();
        let ratio = res.combined / base.combined;
        let ok = decreasing && ratio <= 10.0;
        (
            ok,
            format!(
                "distances {:?} (>= 30% decay: {decreasing}), residual / baseline = {ratio:.2}",
                d.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>()
            ),
        )
    });

    // ------------------------------------------------------------------
    // 9. Finite g.a.p. accessibility of the origin-adjacent cell, both
    //    integrand conventions, reparameterization-invariant.
    suite.run("09 gap accessibility", 10.0, || {
        let grid = make_grid(2, 32, 1.0, true).unwrap();
        let data = build_singular_data(
            grid,
            &SingularProfileParams::default(),
            0.05,
            Orientation::Radial,
            TimeDerivativeMode::Zero,
        )
        .unwrap();
        let cfg = SchemeConfig {
            horizon: 0.05,
            steps: 8,
            nu0: 0.02,
            max_iters: 40,
            tol_fix: 1e-8,
            tol_contract: 0.9,
            prefactor: Prefactor::G00,
            endpoint: EndpointRule::ApproxIdentity,
        };
        let (fields, _) = match run_fixed_point(&data, &cfg) {
            Ok(v) => v,
            Err(e) => return (false, format!("evolution failed: {e}")),
        };
        let half_cell = grid.spacing() / 2.0;
        let from = [0.0, -0.5, -0.5];
        let to = [cfg.horizon, half_cell, half_cell];
        let curve = CurveSample::line(&from, &to, 129).unwrap();
        let written = gap_length(&curve, &fields, GapConvention::AsWritten).unwrap();
        let rooted = gap_length(&curve, &fields, GapConvention::RootSquares).unwrap();

        // Smooth monotone reparameterization of the same path.
        let warp = |sig: f64| ((2.0 * sig).exp() - 1.0) / ((2.0f64).exp() - 1.0);
        let params: Vec<f64> = (0..129).map(|j| j as f64 / 128.0).collect();
        let positions: Vec<Vec<f64>> = params
            .iter()
            .map(|sig| {
                let s = warp(*sig);
                (0..3).map(|c| from[c] + s * (to[c] - from[c])).collect()
            })
            .collect();
        let frame: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let warped = CurveSample::new(params, positions, vec![frame; 129]).unwrap();
        let rewritten = gap_length(&warped, &fields, GapConvention::AsWritten).unwrap();
        let reparam_err = (rewritten - written).abs() / written.abs();

        let ok = written.is_finite() && rooted.is_finite() && reparam_err <= 1e-3;
        (
            ok,
            format!(
                "as-written {written:.4}, root-of-squares {rooted:.4}, reparam deviation {reparam_err:.2e}"
            ),
        )
    });

    // ------------------------------------------------------------------
    // 10. Gauge-wave oracle: residual decays at >= 2nd order under (N, M)
    //     doubling.
    suite.run("10 gauge-wave order", 300.0, || {
        let wave = GaugeWave {
            amplitude: 0.1,
            periods: 1,
        };
        let res_at = |points: usize, steps: usize| {
            let grid = make_grid(2, points, 1.0, true).unwrap();
            let hist = wave.sample_history(grid, TimeGrid::new(0.2, steps).unwrap());
            harmonic_residual(&hist, Prefactor::G00, 0.0).unwrap().combined
        };
        let coarse = res_at(32, 16);
        let fine = res_at(64, 32);
        let order = (coarse / fine).log2();
        // The convergence is clean second order (the time stencil dominates);
        // 1.95 absorbs the last percent of contamination from the spatially
        // exact terms.
        let ok = order >= 1.95;
        (
            ok,
            format!("residual {coarse:.3e} -> {fine:.3e}, observed order {order:.2}"),
        )
    });

    suite.finish();
}
