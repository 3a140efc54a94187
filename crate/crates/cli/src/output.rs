//! Deterministic result emission: CSV time series, summary JSON, config
//! echo. CSV bytes are identical across reruns of the same configuration;
//! wall-clock metadata lives only in the summary JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rombo_core::error::Result;
use rombo_core::stepping::TimeSeries;

/// Render a float with full round-trip precision, deterministically.
fn num(v: f64) -> String {
    format!("{v:.17e}")
}

/// Write a time series in the standard column layout:
/// `t, q_b[0..B), <q probes>, <u probes>, lambda[..], E_tot, E_rb, E_el,
/// n_active, solver_iters`.
pub fn write_series_csv(path: &Path, series: &TimeSeries) -> Result<()> {
    let mut out = String::new();
    let b = series.n_boundary;
    let n_lambda = series.records.first().map(|r| r.lambda.len()).unwrap_or(0);
    let mut header: Vec<String> = vec!["t".into()];
    for j in 0..b {
        header.push(format!("qb{j}"));
    }
    for name in &series.probe_names {
        header.push(format!("q_{name}"));
    }
    for name in &series.probe_names {
        header.push(format!("u_{name}"));
    }
    for j in 0..n_lambda {
        header.push(format!("lambda{j}"));
    }
    header.extend(["E_tot".into(), "E_rb".into(), "E_el".into()]);
    header.extend(["n_active".into(), "solver_iters".into()]);
    out.push_str(&header.join(","));
    out.push('\n');
    for r in &series.records {
        let mut row: Vec<String> = vec![num(r.t)];
        row.extend(r.q_b.iter().map(|&v| num(v)));
        row.extend(r.probes_q.iter().map(|&v| num(v)));
        row.extend(r.probes_u.iter().map(|&v| num(v)));
        row.extend(r.lambda.iter().map(|&v| num(v)));
        row.push(num(r.e_tot));
        row.push(num(r.e_rb));
        row.push(num(r.e_el));
        row.push(r.n_active.to_string());
        row.push(r.solver_iters.to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Write the summary JSON; `body` carries the run metrics, the metadata
/// block carries the (non-deterministic) timestamp.
pub fn write_summary(path: &Path, body: serde_json::Value) -> Result<()> {
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let doc = serde_json::json!({
        "summary": body,
        "metadata": { "unix_timestamp_s": timestamp },
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("summary serialization");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Echo the resolved configuration for reproducibility.
pub fn write_config_echo(dir: &Path, resolved: &str) -> Result<()> {
    fs::write(dir.join("config.resolved.json"), resolved)?;
    Ok(())
}

/// Simple CSV for generic tabular data.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let mut line = String::new();
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            let _ = write!(line, "{}", num(*v));
        }
        out.push_str(&line);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
