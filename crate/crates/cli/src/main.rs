//! `rombo` — batch front end for massless-boundary reduced-order contact
//! simulation: model reduction, time integration, harmonic balance and the
//! built-in benchmark scenarios.

mod bench;
mod config;
mod log;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use rombo_core::error::{Error, Result};
use rombo_core::hbm::{probe_harmonics, HbmLoad, HbmOptions, HbmSystem, SweepPolicy};
use rombo_core::scenarios::EnergyModel;
use rombo_core::stepping::{simulate, SimOptions};

#[derive(Parser)]
#[command(name = "rombo", version, about = "Massless-boundary reduced-order contact dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a model and export the reduced-order bundle.
    Reduce(CommonArgs),
    /// Time-integrate a contact problem and write the time series.
    Simulate(CommonArgs),
    /// Periodic steady states by harmonic balance (frequency sweep or list).
    Hbm(CommonArgs),
    /// Run a built-in benchmark scenario.
    Bench(BenchArgs),
    /// Validate imported matrices and their sidecar description.
    ImportCheck(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for independent runs (results are identical for any
    /// value).
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Record every k-th time level.
    #[arg(long)]
    stride: Option<usize>,
    /// Seed recorded with the outputs (randomized studies only).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    /// Scenario name: bouncing-bar, plate or rub.
    scenario: String,
    /// Optional scenario parameter overrides (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    log::init_from_env();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Reduce(args) => run_reduce(&args),
        Command::Simulate(args) => run_simulate(&args),
        Command::Hbm(args) => run_hbm(&args),
        Command::Bench(args) => bench::run(&args),
        Command::ImportCheck(args) => run_import_check(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn apply_overrides(cfg: &mut config::RunConfig, args: &CommonArgs) {
    if let Some(stride) = args.stride {
        cfg.output_stride = stride.max(1);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
}

fn run_reduce(args: &CommonArgs) -> Result<()> {
    let mut cfg = config::parse_config(&args.config)?;
    apply_overrides(&mut cfg, args);
    prepare_out(&args.out)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let model = config::build_model(&cfg, base)?;
    log::info(format!(
        "reducing {}-DOF model with {} boundary DOFs",
        model.n_dofs(),
        model.boundary_dofs.len()
    ));
    let red = config::build_reduced(&cfg, &model)?;

    rombo_core::mmio::write_symmetric(&args.out.join("Ktil.mtx"), &red.ktil)?;
    rombo_core::mmio::write_symmetric(&args.out.join("Mtil.mtx"), &red.mtil)?;
    rombo_core::mmio::write_symmetric(&args.out.join("Dtil.mtx"), &red.dtil)?;
    rombo_core::mmio::write_array(&args.out.join("R.mtx"), &red.r)?;
    let red_cfg = cfg.reduction.as_ref().unwrap();
    let manifest = serde_json::json!({
        "method": format!("{:?}", red_cfg.method),
        "n_mod": red_cfg.n_mod,
        "n_boundary": red.n_boundary,
        "n_reduced": red.n_red(),
        "massless": red.massless,
        "omegas_inner_rad_s": red.omegas_inner,
    });
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest");
    text.push('\n');
    fs::write(args.out.join("manifest.json"), text)?;
    output::write_config_echo(&args.out, &config::emit_config(&cfg))?;
    log::info("reduced bundle written");
    Ok(())
}

fn run_simulate(args: &CommonArgs) -> Result<()> {
    let mut cfg = config::parse_config(&args.config)?;
    apply_overrides(&mut cfg, args);
    prepare_out(&args.out)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let model = config::build_model(&cfg, base)?;
    let red = config::build_reduced(&cfg, &model)?;
    let contact = config::build_contact(&cfg)?;
    let integrator = cfg
        .integrator
        .ok_or_else(|| Error::InvalidSpec("an 'integrator' is required".into()))?
        .to_core();
    let dt = cfg
        .dt_s
        .ok_or_else(|| Error::InvalidSpec("'dt_s' is required".into()))?;
    let [t0, t1] = cfg
        .t_span_s
        .ok_or_else(|| Error::InvalidSpec("'t_span_s' is required".into()))?;

    let ic = config::build_initial(&cfg, &model, &red);
    let mut opts = SimOptions::new(dt, t0, t1);
    opts.stride = cfg.output_stride;
    opts.probes = config::build_probes(&cfg, &red);
    let energy = match &cfg.gravity {
        Some(g) => {
            let rigid = rombo_core::scenarios::rigid_in_reduced(&red, &model, g.axis);
            EnergyModel::with_gravity(&red, &model, g.a_g_m_s2, g.axis, Some(rigid))
        }
        None => EnergyModel::elastic(&red),
    };
    opts.energy = Some(energy.as_fn());

    log::info(format!(
        "integrating {} steps of a {}-coordinate reduced model",
        ((t1 - t0) / dt).round() as usize,
        red.n_red()
    ));
    let series = simulate(&red, &contact, integrator, &opts, &ic)?;
    output::write_series_csv(&args.out.join("series.csv"), &series)?;
    let max_residual = series
        .records
        .iter()
        .map(|r| r.residual)
        .fold(0.0f64, f64::max);
    let summary = serde_json::json!({
        "records": series.len(),
        "t_end_s": series.records.last().map(|r| r.t),
        "energy_drift_rel": rombo_core::scenarios::energy_drift(&series),
        "max_boundary_residual_rel": max_residual,
        "seed": cfg.seed,
    });
    output::write_summary(&args.out.join("summary.json"), summary)?;
    output::write_config_echo(&args.out, &config::emit_config(&cfg))?;
    log::info("time series written");
    Ok(())
}

fn run_hbm(args: &CommonArgs) -> Result<()> {
    let mut cfg = config::parse_config(&args.config)?;
    apply_overrides(&mut cfg, args);
    prepare_out(&args.out)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let model = config::build_model(&cfg, base)?;
    let red = config::build_reduced(&cfg, &model)?;
    let contact = config::build_contact(&cfg)?;
    let hbm_cfg = cfg
        .hbm
        .clone()
        .ok_or_else(|| Error::InvalidSpec("an 'hbm' section is required".into()))?;

    let mut f_full = DVector::zeros(model.n_dofs());
    if hbm_cfg.forcing.dof >= model.n_dofs() {
        return Err(Error::InvalidSpec(format!(
            "hbm.forcing.dof {} out of range",
            hbm_cfg.forcing.dof
        )));
    }
    f_full[hbm_cfg.forcing.dof] = hbm_cfg.forcing.amplitude_n;
    let f_red = red.r.transpose() * f_full;
    let load = HbmLoad {
        terms: vec![(hbm_cfg.forcing.harmonic, f_red, 0.0)],
    };
    let opts = HbmOptions {
        h_max: hbm_cfg.h_max,
        n_aft: hbm_cfg.n_aft,
        eps_dl: hbm_cfg.eps_dl,
        ..HbmOptions::default()
    };
    let system = HbmSystem::new(&red, &contact, &load, opts)?;

    let probes = config::build_probes(&cfg, &red);
    let probe = probes
        .first()
        .cloned()
        .unwrap_or_else(|| rombo_core::stepping::Probe::full_dof(&red, hbm_cfg.forcing.dof, "qF"));

    // collect (omega, solution) points
    let points: Vec<(f64, Option<rombo_core::hbm::FourierSolution>, usize)> =
        if let Some(sweep_cfg) = &hbm_cfg.omega_rad_s.sweep {
            let policy = SweepPolicy {
                n_points: sweep_cfg.n_points,
                max_bisect: 6,
            };
            rombo_core::hbm::sweep(&system, sweep_cfg.from, sweep_cfg.to, &policy)?
                .into_iter()
                .map(|p| (p.omega, p.solution, p.iterations))
                .collect()
        } else {
            let mut out = Vec::new();
            let mut seed = None;
            for &omega in &hbm_cfg.omega_rad_s.list {
                match system.solve_fixed_frequency(omega, seed.as_ref()) {
                    Ok((sol, iters)) => {
                        seed = Some(sol.clone());
                        out.push((omega, Some(sol), iters));
                    }
                    Err(e) => {
                        log::info(format!("omega {omega:.6e}: {e}"));
                        out.push((omega, None, 0));
                    }
                }
            }
            out
        };

    // CSV: omega, |qR(h)| for h = 0..=H, newton iterations, converged flag
    let mut header: Vec<String> = vec!["omega".into()];
    for h in 0..=opts.h_max {
        header.push(format!("abs_qR_h{h}"));
    }
    header.push("newton_iters".into());
    header.push("converged".into());
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut rows = Vec::new();
    let mut n_converged = 0usize;
    for (omega, sol, iters) in &points {
        let mut row = vec![*omega];
        match sol {
            Some(sol) => {
                n_converged += 1;
                for h in 0..=opts.h_max {
                    let mut c = nalgebra::Complex::new(0.0, 0.0);
                    for i in 0..probe.row.len() {
                        c += sol.coeffs[h][i] * probe.row[i];
                    }
                    let mag = if h == 0 { c.re.abs() } else { 2.0 * c.norm() };
                    row.push(mag);
                }
                let _ = probe_harmonics(sol, &probe.row);
                row.push(*iters as f64);
                row.push(1.0);
            }
            None => {
                row.extend(std::iter::repeat_n(f64::NAN, opts.h_max + 1));
                row.push(0.0);
                row.push(0.0);
            }
        }
        rows.push(row);
    }
    output::write_table_csv(&args.out.join("hbm.csv"), &header_refs, &rows)?;
    let summary = serde_json::json!({
        "points": points.len(),
        "converged": n_converged,
        "h_max": opts.h_max,
        "n_aft": opts.n_aft,
        "eps_dl": opts.eps_dl,
        "seed": cfg.seed,
    });
    output::write_summary(&args.out.join("summary.json"), summary)?;
    output::write_config_echo(&args.out, &config::emit_config(&cfg))?;
    log::info(format!(
        "harmonic balance: {n_converged}/{} points converged",
        points.len()
    ));
    Ok(())
}

fn run_import_check(args: &CommonArgs) -> Result<()> {
    let cfg = config::parse_config(&args.config)?;
    let m = cfg
        .model
        .matrices
        .as_ref()
        .ok_or_else(|| Error::InvalidSpec("import-check needs a 'matrices' model".into()))?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let model = config::build_model(&cfg, base)?;
    model.validate(1e-10)?;
    println!(
        "ok: {} DOFs, {} boundary DOFs, K/M/D symmetric, M positive definite",
        model.n_dofs(),
        model.boundary_dofs.len()
    );
    let _ = m;
    Ok(())
}
