//! Command-line driver: one configuration file, one output directory, one
//! subcommand per stage. Stages write their artifacts plus a JSON fragment
//! under <out>/stages/; `report` assembles the fragments into the master
//! report and validates it against the published schema.
//!
//! Exit codes: 0 success, 2 validation failure, 3 contraction failure,
//! 4 signature loss, 5 I/O.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use harmlab::config::{load_config, RunConfig};
use harmlab::data::{build_singular_data, DataList};
use harmlab::diagnostics::{
    constraint_monitor, curvature_history, curvature_static, fit_blowup_exponent, gap_length,
    signature_monitor, static_history, CurveSample, GapConvention,
};
use harmlab::error::Error;
use harmlab::fields::FieldsHistory;
use harmlab::gauge_wave::GaugeWave;
use harmlab::grid::TimeGrid;
use harmlab::io;
use harmlab::kernel::verify_uniform_l1;
use harmlab::picard::{
    harmonic_residual, run_fixed_point_auto, run_fixed_point_with, viscosity_sweep,
};
use harmlab::report::{report_schema, validate_against_schema};
use harmlab::Result;

#[derive(Parser)]
#[command(
    name = "harmlab",
    about = "Viscosity-regularized harmonic-gauge evolution laboratory",
    version
)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true, default_value = "harmlab.json")]
    config: PathBuf,
    /// Output directory for dumps, tables, and the report.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct the Cauchy data; write raw dumps plus the admissibility sidecar.
    BuildData,
    /// Print and record the admissibility report (exit 2 when it fails).
    CheckData,
    /// Run the fixed-point iteration; writes a checkpoint and the monitors.
    Evolve {
        /// Resume from a checkpoint manifest.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Fixed-point runs over the viscosity sequence with Cauchy distances.
    Sweep,
    /// Residual of the evolved solution against the exact-wave baseline.
    Residual {
        /// Evaluate a checkpointed history instead of re-running.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Data-slice curvature and blow-up fit; with a checkpoint, also the
    /// curvature history of the evolved fields.
    Curvature {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Generalized-affine-parameter length of a coordinate-time curve into
    /// the cell adjacent to the origin.
    GapLength {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Kernel mass and derivative bound table over the viscosity sequence.
    VerifyKernel,
    /// Assemble stage fragments into report.json and validate it.
    Report,
}

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn stage_dir(out: &Path) -> PathBuf {
    out.join("stages")
}

fn write_stage(out: &Path, name: &str, value: Value, elapsed: f64) -> Result<()> {
    let dir = stage_dir(out);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let fragment = json!({ "status": "present", "value": value });
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&fragment)?)
        .map_err(|e| Error::io(path.display().to_string(), e))?;

    let timings_path = dir.join("timings.json");
    let mut timings: Value = match std::fs::read_to_string(&timings_path) {
        Ok(text) => serde_json::from_str(&text).unwrap_or_else(|_| json!({})),
        Err(_) => json!({}),
    };
    timings[name] = json!(elapsed);
    std::fs::write(&timings_path, serde_json::to_string_pretty(&timings)?)
        .map_err(|e| Error::io(timings_path.display().to_string(), e))?;
    Ok(())
}

fn load_run(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = load_config(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::io(cli.out.display().to_string(), e))?;
    Ok(cfg)
}

fn build_data(cfg: &RunConfig) -> Result<DataList> {
    let grid = cfg.grid_spec()?;
    build_singular_data(
        grid,
        &cfg.profile(),
        cfg.data.amplitude,
        cfg.data.orientation,
        cfg.data.time_derivative,
    )
}

fn origin_cell_position(cfg: &RunConfig) -> Result<Vec<f64>> {
    let grid = cfg.grid_spec()?;
    // Nearest sample to the origin: index N/2, half a cell out when the
    // origin offset is on — otherwise step one full cell away from 0.
    let i = grid.points / 2;
    let coord = grid.coord(i);
    let near = if coord == 0.0 { grid.coord(i + 1) } else { coord };
    Ok(vec![near; grid.n])
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_run(cli)?;
    let hash = cfg.hash()?;
    match &cli.command {
        Command::BuildData => {
            let clock = Instant::now();
            let data = build_data(&cfg)?;
            let grid = data.grid();
            let g_fields: Vec<_> = data.slice.g.components().iter().collect();
            io::write_dump(&cli.out.join("data_g.nsgf"), &grid, &g_fields)?;
            let h_fields: Vec<_> = data.h0.components().iter().collect();
            io::write_dump(&cli.out.join("data_h.nsgf"), &grid, &h_fields)?;
            for k in 0..grid.n {
                let fields: Vec<_> = data.slice.dg[k].components().iter().collect();
                io::write_dump(&cli.out.join(format!("data_dg{k}.nsgf")), &grid, &fields)?;
            }
            if grid.n <= 2 {
                let c = grid.n.min(2);
                io::write_csv_fields(
                    &cli.out.join("data_perturbed_component.csv"),
                    &grid,
                    &["g_perturbed"],
                    &[data.slice.g.comp(c, c)],
                )?;
            }
            let sidecar = json!({
                "config_hash": hash,
                "profile": cfg.profile(),
                "amplitude": cfg.data.amplitude,
                "orientation": cfg.data.orientation,
                "admissibility": data.admissibility,
            });
            let sidecar_path = cli.out.join("data.json");
            std::fs::write(&sidecar_path, serde_json::to_string_pretty(&sidecar)?)
                .map_err(|e| Error::io(sidecar_path.display().to_string(), e))?;
            write_stage(
                &cli.out,
                "admissibility",
                serde_json::to_value(&data.admissibility)?,
                clock.elapsed().as_secs_f64(),
            )?;
            println!(
                "data built: margin {:.3}, product bound {:.3}, dumps in {}",
                data.admissibility.lorentz.margin,
                data.admissibility.product_bound,
                cli.out.display()
            );
            Ok(())
        }
        Command::CheckData => {
            let clock = Instant::now();
            let data = build_data(&cfg)?;
            write_stage(
                &cli.out,
                "admissibility",
                serde_json::to_value(&data.admissibility)?,
                clock.elapsed().as_secs_f64(),
            )?;
            println!("{}", serde_json::to_string_pretty(&data.admissibility)?);
            if data.admissibility.passed {
                println!("admissibility: PASS");
                Ok(())
            } else {
                Err(Error::InadmissibleData(
                    data.admissibility
                        .failure
                        .unwrap_or_else(|| "unspecified".to_string()),
                ))
            }
        }
        Command::Evolve { resume } => {
            let clock = Instant::now();
            let data = build_data(&cfg)?;
            let scheme = cfg.scheme_config();
            let (fields, record, effective) = if cfg.scheme.auto_horizon {
                run_fixed_point_auto(&data, &scheme, cfg.scheme.max_halvings)?
            } else {
                let initial = match resume {
                    Some(path) => Some(io::load_checkpoint(path)?.1),
                    None => None,
                };
                let (f, r) = run_fixed_point_with(&data, &scheme, initial)?;
                (f, r, scheme)
            };
            io::save_checkpoint(
                &cli.out.join("checkpoints"),
                &fields,
                record.iterations,
                effective.nu0,
                &hash,
                record.norms.last().copied(),
            )?;
            let r_excl = cfg.excluded_radius();
            let constraint = constraint_monitor(&fields, r_excl)?;
            let sig = signature_monitor(&fields);
            write_stage(
                &cli.out,
                "contraction",
                serde_json::to_value(&record)?,
                clock.elapsed().as_secs_f64(),
            )?;
            write_stage(&cli.out, "constraint", serde_json::to_value(&constraint)?, 0.0)?;
            write_stage(&cli.out, "signature", serde_json::to_value(&sig)?, 0.0)?;
            println!(
                "converged in {} iterations at T = {} (ratios: {:?})",
                record.iterations, effective.horizon, record.ratios
            );
            if !record.contraction_ok(effective.tol_contract, 3) {
                return Err(Error::ContractionFailure {
                    iterations: record.iterations,
                    ratios: record.ratios,
                    norms: record.norms,
                });
            }
            if let Some(first) = sig.first_failure {
                return Err(Error::SignatureLoss {
                    slice: first,
                    index: vec![],
                    detail: "Lorentz margin hit zero along the evolution".to_string(),
                });
            }
            Ok(())
        }
        Command::Sweep => {
            let clock = Instant::now();
            let data = build_data(&cfg)?;
            let scheme = cfg.scheme_config();
            let nus = cfg.sweep_sequence();
            let outcome = viscosity_sweep(&data, &scheme, &nus)?;
            if let Some(extrapolated) = &outcome.extrapolated {
                io::save_checkpoint(
                    &cli.out.join("extrapolated"),
                    extrapolated,
                    0,
                    0.0,
                    &hash,
                    None,
                )?;
            }
            write_stage(
                &cli.out,
                "sweep",
                serde_json::to_value(&outcome.summary)?,
                clock.elapsed().as_secs_f64(),
            )?;
            println!(
                "sweep over {:?}: distances {:?} (cauchy: {:?})",
                nus, outcome.summary.distances, outcome.summary.cauchy_decreasing
            );
            Ok(())
        }
        Command::Residual { checkpoint } => {
            let clock = Instant::now();
            let scheme = cfg.scheme_config();
            let fields: FieldsHistory = match checkpoint {
                Some(path) => io::load_checkpoint(path)?.1,
                None => {
                    let data = build_data(&cfg)?;
                    run_fixed_point_with(&data, &scheme, None)?.0
                }
            };
            let r_excl = cfg.excluded_radius();
            let run_res = harmonic_residual(&fields, scheme.prefactor, r_excl)?;
            let wave = GaugeWave::default();
            let baseline_hist = wave.sample_history(
                cfg.grid_spec()?,
                TimeGrid::new(fields.time.horizon, fields.time.steps)?,
            );
            let base_res = harmonic_residual(&baseline_hist, scheme.prefactor, r_excl)?;
            let section = json!({
                "run": run_res,
                "gauge_wave_baseline": base_res,
                "ratio_to_baseline": run_res.combined / base_res.combined,
            });
            write_stage(&cli.out, "residual", section, clock.elapsed().as_secs_f64())?;
            println!(
                "residual {:.3e} vs gauge-wave baseline {:.3e} (ratio {:.2})",
                run_res.combined,
                base_res.combined,
                run_res.combined / base_res.combined
            );
            Ok(())
        }
        Command::Curvature { checkpoint } => {
            let clock = Instant::now();
            let data = build_data(&cfg)?;
            let slice = curvature_static(&data)?;
            let grid = data.grid();
            let center = vec![0.0; grid.n];
            let fit = fit_blowup_exponent(&slice.scalar, &center, &cfg.fit_radii())?;
            write_stage(
                &cli.out,
                "blowup",
                serde_json::to_value(&fit)?,
                clock.elapsed().as_secs_f64(),
            )?;
            if grid.n <= 2 {
                io::write_csv_fields(
                    &cli.out.join("scalar_curvature.csv"),
                    &grid,
                    &["scalar_curvature"],
                    &[&slice.scalar],
                )?;
            }
            println!(
                "blow-up fit: exponent {:.3} (log-log residual {:.3})",
                fit.exponent, fit.residual
            );
            if let Some(path) = checkpoint {
                let hist = io::load_checkpoint(path)?.1;
                let slices = curvature_history(&hist)?;
                let rows: Vec<Vec<f64>> = slices
                    .iter()
                    .enumerate()
                    .map(|(m, s)| vec![hist.time.time(m), s.scalar.sup_norm()])
                    .collect();
                io::write_csv_table(
                    &cli.out.join("curvature_history.csv"),
                    &["t", "sup_abs_scalar_curvature"],
                    &rows,
                )?;
                println!("curvature history written for {} slices", slices.len());
            }
            Ok(())
        }
        Command::GapLength { checkpoint } => {
            let clock = Instant::now();
            let scheme = cfg.scheme_config();
            let fields = match checkpoint {
                Some(path) => io::load_checkpoint(path)?.1,
                None => {
                    let data = build_data(&cfg)?;
                    match run_fixed_point_with(&data, &scheme, None) {
                        Ok((f, _)) => f,
                        // The curve only needs a metric history; static data
                        // still answers the accessibility question.
                        Err(Error::ContractionFailure { .. }) => static_history(&data, 3),
                        Err(e) => return Err(e),
                    }
                }
            };
            let grid = fields.grid;
            let target = origin_cell_position(&cfg)?;
            let from = cfg.diagnostics.curve.from.clone().unwrap_or_else(|| {
                let mut v = vec![0.0];
                v.extend(std::iter::repeat(-grid.half_width / 2.0).take(grid.n));
                v
            });
            let mut to = vec![fields.time.horizon];
            to.extend(target.iter());
            let curve = CurveSample::line(&from, &to, cfg.diagnostics.curve.samples)?;
            let written = gap_length(&curve, &fields, GapConvention::AsWritten)?;
            let rooted = gap_length(&curve, &fields, GapConvention::RootSquares)?;
            let finite = written.is_finite() && rooted.is_finite();
            let section = json!({
                "as_written": written,
                "root_squares": rooted,
                "finite": finite,
            });
            write_stage(&cli.out, "gap", section, clock.elapsed().as_secs_f64())?;
            println!(
                "g.a.p. length into the origin cell: as-written {written:.6}, root-of-squares {rooted:.6}"
            );
            Ok(())
        }
        Command::VerifyKernel => {
            let clock = Instant::now();
            let nus = cfg
                .scheme
                .viscosity_sequence
                .clone()
                .unwrap_or_else(|| vec![1e-1, 1e-2, 1e-3, 1e-4]);
            let table = verify_uniform_l1(&nus, cfg.time.horizon)?;
            let rows: Vec<Vec<f64>> = table
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.nu0,
                        r.mass_l1,
                        r.deriv_l1_raw,
                        r.deriv_l1_collapsed,
                        if r.resolved { 1.0 } else { 0.0 },
                    ]
                })
                .collect();
            io::write_csv_table(
                &cli.out.join("kernel_bounds.csv"),
                &[
                    "nu0",
                    "mass_l1",
                    "deriv_l1_raw",
                    "deriv_l1_collapsed",
                    "resolved",
                ],
                &rows,
            )?;
            write_stage(
                &cli.out,
                "kernel_bounds",
                serde_json::to_value(&table)?,
                clock.elapsed().as_secs_f64(),
            )?;
            for row in &table.rows {
                if !row.resolved {
                    eprintln!(
                        "warning: kernel under-resolved at nu0 = {} (capped lattice)",
                        row.nu0
                    );
                }
            }
            println!(
                "kernel table over {:?}: collapsed derivative norms within cap: {}",
                nus, table.within_cap
            );
            Ok(())
        }
        Command::Report => {
            let sections = [
                "admissibility",
                "contraction",
                "sweep",
                "residual",
                "blowup",
                "constraint",
                "signature",
                "kernel_bounds",
                "gap",
            ];
            let dir = stage_dir(&cli.out);
            let mut report = json!({
                "config_hash": hash,
                "seed": cfg.seed,
                "config": serde_json::to_value(&cfg)?,
                "timings": json!({}),
            });
            for name in sections {
                let path = dir.join(format!("{name}.json"));
                let fragment = match std::fs::read_to_string(&path) {
                    Ok(text) => serde_json::from_str(&text)?,
                    Err(_) => json!({
                        "status": "skipped",
                        "reason": format!("stage '{name}' has not produced output"),
                    }),
                };
                report[name] = fragment;
            }
            let timings_path = dir.join("timings.json");
            if let Ok(text) = std::fs::read_to_string(&timings_path) {
                if let Ok(t) = serde_json::from_str::<Value>(&text) {
                    report["timings"] = t;
                }
            }
            let schema: Value = serde_json::from_str(report_schema())?;
            validate_against_schema(&report, &schema)
                .map_err(|e| Error::Config(format!("report failed schema validation: {e}")))?;
            let path = cli.out.join("report.json");
            std::fs::write(&path, serde_json::to_string_pretty(&report)?)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            println!("report written to {}", path.display());
            Ok(())
        }
    }
}
