//! Built-in benchmark scenarios: bouncing bar, plate against a wall, and
//! the blade-casing rub analog. Each run emits per-run CSV files plus a
//! summary JSON with the headline metrics (energy drift, rms-error table,
//! largest stable time step found by search).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use rombo_core::cms::ReductionMethod;
use rombo_core::error::{Error, Result};
use rombo_core::scenarios::{
    bar_courant, bouncing_bar, contact_bursts, energy_drift, flight_phases, rms_error,
    shock_arrival, BarDropParams, PlateAnalog, PlateParams, RubAnalog, RubParams, RubVariant,
};
use rombo_core::stepping::Integrator;

use crate::config::parse_error;
use crate::{log, output, BenchArgs};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BarBench {
    n_elems: Option<usize>,
    n_mod: Option<usize>,
    q0_m: Option<f64>,
    a_g_m_s2: Option<f64>,
    dt_s: Option<f64>,
    t_end_s: Option<f64>,
    moreau_t_end_s: Option<f64>,
    search_stability: Option<bool>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlateBench {
    elems: Option<[usize; 3]>,
    n_mod: Option<usize>,
    force_n: Option<f64>,
    sweep_low_ratio: Option<f64>,
    sweep_high_ratio: Option<f64>,
    steps_per_period: Option<usize>,
    rate_percent: Option<f64>,
    rate_periods: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RubBench {
    elems: Option<[usize; 3]>,
    n_mod: Option<usize>,
    n_per_rev: Option<usize>,
    n_revs: Option<f64>,
    rms_levels: Option<Vec<usize>>,
    rms_reference_n: Option<usize>,
    rms_revs: Option<f64>,
    search_stability: Option<bool>,
}

fn read_overrides<T: Default + for<'de> Deserialize<'de>>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(de).map_err(|e| parse_error(p, &e))
        }
    }
}

pub fn run(args: &BenchArgs) -> Result<()> {
    fs::create_dir_all(&args.out)?;
    match args.scenario.as_str() {
        "bouncing-bar" => bench_bar(args),
        "plate" => bench_plate(args),
        "rub" => bench_rub(args),
        other => Err(Error::InvalidSpec(format!(
            "unknown benchmark scenario '{other}' (expected bouncing-bar, plate or rub)"
        ))),
    }
}

fn bench_bar(args: &BenchArgs) -> Result<()> {
    let over: BarBench = read_overrides(args.config.as_deref())?;
    let stride = args.stride.unwrap_or(1);
    let base = BarDropParams {
        n_elems: over.n_elems.unwrap_or(1000),
        n_mod: over.n_mod.unwrap_or(20),
        q0: over.q0_m.unwrap_or(0.5),
        a_g: over.a_g_m_s2.unwrap_or(10.0),
        dt: over.dt_s.unwrap_or(1e-4),
        t_end: over.t_end_s.unwrap_or(16.0),
        ..BarDropParams::default()
    };
    log::info(format!(
        "bouncing bar: {} elements, Courant {:.3}",
        base.n_elems,
        bar_courant(base.n_elems, base.dt)
    ));

    // massless Craig-Bampton + leapfrog
    let series = bouncing_bar(&base)?.run(stride)?;
    output::write_series_csv(&args.out.join("bar_massless.csv"), &series)?;
    let apexes: Vec<f64> = flight_phases(&series, 0)
        .iter()
        .filter(|p| p.duration() > 0.1)
        .map(|p| p.apex)
        .collect();
    let arrival = shock_arrival(&series, 0, base.a_g).map(|(tc, ta)| ta - tc);
    let min_gap = series
        .records
        .iter()
        .map(|r| r.q_b[0])
        .fold(f64::INFINITY, f64::min);

    // mass-carrying references
    let moreau_t_end = over.moreau_t_end_s.unwrap_or(8.0);
    let mut moreau_drift = serde_json::Map::new();
    for (name, eps) in [("plastic", 0.0), ("elastic", 1.0)] {
        let p = BarDropParams {
            method: ReductionMethod::CraigBampton,
            integrator: Integrator::Moreau,
            restitution_n: eps,
            t_end: moreau_t_end,
            ..base.clone()
        };
        let s = bouncing_bar(&p)?.run(stride)?;
        output::write_series_csv(&args.out.join(format!("bar_moreau_{name}.csv")), &s)?;
        moreau_drift.insert(name.into(), serde_json::json!(energy_drift(&s)));
    }

    // largest stable time step by doubling (short windows)
    let mut stability = serde_json::Map::new();
    if over.search_stability.unwrap_or(true) {
        let probe = |method: ReductionMethod, integrator: Integrator, dt: f64| -> bool {
            let p = BarDropParams {
                method,
                integrator,
                restitution_n: 1.0,
                dt,
                t_end: 2.0,
                ..base.clone()
            };
            bouncing_bar(&p).and_then(|s| s.run(64)).is_ok()
        };
        let search = |method: ReductionMethod, integrator: Integrator| -> f64 {
            let mut dt = base.dt;
            let mut last_stable = 0.0;
            while dt < 0.1 && probe(method, integrator, dt) {
                log::debug(format!("{method:?} stable at dt = {dt:.3e}"));
                last_stable = dt;
                dt *= 2.0;
            }
            // refine the bracket to ~5 % resolution
            let mut lo = last_stable;
            let mut hi = dt.min(0.1);
            for _ in 0..5 {
                let mid = 0.5 * (lo + hi);
                if probe(method, integrator, mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let massless = search(
            ReductionMethod::MasslessCraigBampton,
            Integrator::LeapfrogFrictionless,
        );
        let carrying = search(ReductionMethod::CraigBampton, Integrator::Moreau);
        stability.insert("massless_largest_stable_dt_s".into(), massless.into());
        stability.insert("mass_carrying_largest_stable_dt_s".into(), carrying.into());
        stability.insert(
            "stability_ratio".into(),
            serde_json::json!(massless / carrying.max(f64::MIN_POSITIVE)),
        );
    }

    let summary = serde_json::json!({
        "scenario": "bouncing-bar",
        "courant": bar_courant(base.n_elems, base.dt),
        "energy_drift_rel": energy_drift(&series),
        "min_gap_m": min_gap,
        "apexes_m": apexes,
        "shock_travel_s": arrival,
        "moreau_energy_drift": moreau_drift,
        "stability": stability,
    });
    output::write_summary(&args.out.join("summary.json"), summary)?;
    write_bench_echo(args, &serde_json::to_value(&over).unwrap())?;
    Ok(())
}

fn bench_plate(args: &BenchArgs) -> Result<()> {
    let over: PlateBench = read_overrides(args.config.as_deref())?;
    let stride = args.stride.unwrap_or(1);
    let params = PlateParams {
        elems: over.elems.unwrap_or([2, 2, 20]),
        n_mod: over.n_mod.unwrap_or(20),
        force_n: over.force_n.unwrap_or(1.0),
        ..PlateParams::default()
    };
    let analog = PlateAnalog::build(&params)?;
    log::info(format!(
        "plate analog: first open-contact frequency {:.2} rad/s",
        analog.omega1
    ));
    let lo = analog.omega1 * over.sweep_low_ratio.unwrap_or(0.95);
    let hi = analog.omega1 * over.sweep_high_ratio.unwrap_or(1.08);
    let spp = over.steps_per_period.unwrap_or(500);
    let rate = over.rate_percent.unwrap_or(1.5) / 100.0;
    let rate_periods = over.rate_periods.unwrap_or(100.0);

    let mut peaks = serde_json::Map::new();
    for (name, a, b) in [("up", lo, hi), ("down", hi, lo)] {
        let scenario = analog.swept_scenario(a, b, rate, rate_periods, spp);
        let series = scenario.run(stride)?;
        output::write_series_csv(&args.out.join(format!("plate_sweep_{name}.csv")), &series)?;
        let peak = series
            .records
            .iter()
            .map(|r| r.probes_q[0].abs())
            .fold(0.0f64, f64::max);
        peaks.insert(format!("sweep_{name}_peak_m"), peak.into());
    }
    let summary = serde_json::json!({
        "scenario": "plate",
        "omega1_rad_s": analog.omega1,
        "peaks": peaks,
    });
    output::write_summary(&args.out.join("summary.json"), summary)?;
    write_bench_echo(args, &serde_json::to_value(&over).unwrap())?;
    Ok(())
}

fn bench_rub(args: &BenchArgs) -> Result<()> {
    let over: RubBench = read_overrides(args.config.as_deref())?;
    let stride = args.stride.unwrap_or(1);
    let params = RubParams {
        elems: over.elems.unwrap_or([2, 2, 12]),
        n_mod: over.n_mod.unwrap_or(20),
        ..RubParams::default()
    };
    let analog = RubAnalog::build(&params)?;
    log::info(format!(
        "rub analog: omega1 = {:.1} rad/s, revolution period {:.4e} s",
        analog.omega1, analog.t_rev
    ));

    let n_per_rev = over.n_per_rev.unwrap_or(2000);
    let n_revs = over.n_revs.unwrap_or(30.0);
    let series = analog
        .scenario(RubVariant::Massless, n_per_rev, n_revs)
        .run(stride)?;
    output::write_series_csv(&args.out.join("rub_massless.csv"), &series)?;
    let t_end = series.records.last().map(|r| r.t).unwrap_or(0.0);
    let bursts_last_rev = contact_bursts(
        &series,
        t_end - analog.t_rev,
        t_end,
        0.08 * analog.t_rev,
    );

    // self-convergence table, fanned out over worker threads
    let levels = over.rms_levels.clone().unwrap_or_else(|| vec![500, 1000, 2000]);
    let rms_revs = over.rms_revs.unwrap_or(5.0);
    let ref_n = over.rms_reference_n.unwrap_or(8000);
    let reference = analog.scenario(RubVariant::Massless, ref_n, rms_revs).run(1)?;
    let t_ref = reference.times();
    let x_ref = reference.probe_q(0);
    let threads = args.threads.max(1);
    let mut table: Vec<(usize, f64)> = Vec::new();
    std::thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::new();
        for chunk in levels.chunks(levels.len().div_ceil(threads)) {
            let analog = &analog;
            let t_ref = &t_ref;
            let x_ref = &x_ref;
            handles.push(scope.spawn(move || -> Result<Vec<(usize, f64)>> {
                let mut out = Vec::new();
                for &n in chunk {
                    let s = analog.scenario(RubVariant::Massless, n, rms_revs).run(1)?;
                    let e = rms_error(&s.times(), &s.probe_q(0), t_ref, x_ref)?;
                    out.push((n, e));
                }
                Ok(out)
            }));
        }
        for h in handles {
            table.extend(h.join().expect("worker thread panicked")?);
        }
        Ok(())
    })?;
    table.sort_by_key(|&(n, _)| n);
    let rows: Vec<Vec<f64>> = table.iter().map(|&(n, e)| vec![n as f64, e]).collect();
    output::write_table_csv(&args.out.join("rub_eps_rms.csv"), &["n_per_rev", "eps_rms"], &rows)?;

    let mut stability = serde_json::Map::new();
    if over.search_stability.unwrap_or(true) {
        let min_stable = |variant: RubVariant| {
            rombo_core::scenarios::min_stable_steps(
                |n| analog.scenario(variant, n, 3.0).run(16).is_ok(),
                64,
                16384,
            )
        };
        let massless = min_stable(RubVariant::Massless);
        let carrying = min_stable(RubVariant::MassCarrying);
        stability.insert("massless_min_stable_n_per_rev".into(), serde_json::json!(massless));
        stability.insert(
            "mass_carrying_min_stable_n_per_rev".into(),
            serde_json::json!(carrying),
        );
        if let (Some(a), Some(b)) = (massless, carrying) {
            stability.insert(
                "relative_stability".into(),
                serde_json::json!(b as f64 / a as f64),
            );
        }
    }

    let summary = serde_json::json!({
        "scenario": "rub",
        "omega1_rad_s": analog.omega1,
        "t_rev_s": analog.t_rev,
        "bursts_last_revolution": bursts_last_rev,
        "eps_rms_table": table.iter().map(|&(n, e)| serde_json::json!({"n_per_rev": n, "eps_rms": e})).collect::<Vec<_>>(),
        "stability": stability,
    });
    output::write_summary(&args.out.join("summary.json"), summary)?;
    write_bench_echo(args, &serde_json::to_value(&over).unwrap())?;
    Ok(())
}

fn write_bench_echo(args: &BenchArgs, overrides: &serde_json::Value) -> Result<()> {
    let echo = serde_json::json!({
        "scenario": args.scenario,
        "overrides": overrides,
        "stride": args.stride,
        "seed": args.seed,
        "threads": args.threads,
    });
    let mut text = serde_json::to_string_pretty(&echo).expect("echo");
    text.push('\n');
    fs::write(args.out.join("config.resolved.json"), text)?;
    Ok(())
}
