//! Output files of a run.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use stochsep::benchmarks::BenchmarkRun;
use stochsep::mcoracle::MCResult;
use stochsep::stats::{kde, moments, pdf_l1_distance, shared_grid, DEFAULT_GRID_POINTS};

use crate::CliError;

/// Oracle output attached to a run.
pub struct OracleReport {
    pub result: MCResult,
    pub distance: f64,
}

pub fn write_all(dir: &Path, run: &BenchmarkRun, oracle: Option<&MCResult>) -> Result<Option<OracleReport>, CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("convergence.csv"), run.solution.history_csv())?;
    fs::write(dir.join("modes.csv"), modes_csv(run))?;
    fs::write(dir.join("lambda_samples.csv"), lambda_csv(run))?;

    let mut report = None;
    let sets: Vec<&[f64]> = match oracle {
        Some(o) => vec![&run.probe_values, &o.values],
        None => vec![&run.probe_values],
    };
    let grid = shared_grid(&sets, DEFAULT_GRID_POINTS)?;
    let pdf = kde(&run.probe_values, &grid)?;
    fs::write(dir.join("pdf.csv"), pdf.to_csv())?;
    if let Some(o) = oracle {
        let opdf = kde(&o.values, &grid)?;
        fs::write(dir.join("oracle_pdf.csv"), opdf.to_csv())?;
        fs::write(dir.join("oracle_samples.csv"), o.to_csv())?;
        report = Some(OracleReport { result: o.clone(), distance: pdf_l1_distance(&pdf, &opdf)? });
    }
    fs::write(dir.join("summary.txt"), summary(run, report.as_ref())?)?;
    Ok(report)
}

fn modes_csv(run: &BenchmarkRun) -> String {
    let k = run.solution.len();
    let mut out = String::new();
    let mut header: Vec<String> = run.coordinate_labels.iter().map(|s| s.to_string()).collect();
    header.extend((1..=k).map(|i| format!("d{i}")));
    out.push_str(&header.join(","));
    out.push('\n');
    for (row, coords) in run.coordinates.iter().enumerate() {
        let mut cells: Vec<String> = coords.iter().map(|c| format!("{c:e}")).collect();
        cells.extend((0..k).map(|i| format!("{:e}", run.solution.mode(i)[row])));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn lambda_csv(run: &BenchmarkRun) -> String {
    let k = run.solution.len();
    let mut out = String::from("sample");
    for i in 1..=k {
        write!(out, ",lambda{i}").unwrap();
    }
    out.push('\n');
    for n in 0..run.probe_values.len() {
        write!(out, "{n}").unwrap();
        for i in 0..k {
            write!(out, ",{:e}", run.solution.lambda(i)[n]).unwrap();
        }
        out.push('\n');
    }
    out
}

fn summary(run: &BenchmarkRun, oracle: Option<&OracleReport>) -> Result<String, CliError> {
    let s = &run.settings;
    let m = moments(&run.probe_values)?;
    let probe: Vec<String> = s.probe.iter().map(|v| v.to_string()).collect();
    let mut out = String::new();
    let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
    kv("problem", run.benchmark.to_string());
    kv("M", s.m.to_string());
    kv("N", s.n.to_string());
    kv("seed", s.seed.to_string());
    kv("eps1", format!("{:e}", s.eps_global));
    kv("eps2", format!("{:e}", s.eps_local));
    kv("retained_terms", run.solution.len().to_string());
    kv("converged", run.converged.to_string());
    kv("exhausted", run.solution.exhausted.to_string());
    kv("final_eps_global", format!("{:e}", run.solution.history.last().map_or(f64::NAN, |r| r.eps_global)));
    kv("probe", probe.join(","));
    kv("probe_mean", format!("{:e}", m.mean));
    kv("probe_std", format!("{:e}", m.std));
    for (k, v) in &run.notes {
        kv(k, v.clone());
    }
    if let Some(o) = oracle {
        kv("oracle_samples", o.result.n_mc.to_string());
        kv("oracle_failures", o.result.failures.to_string());
        kv("oracle_mean", format!("{:e}", o.result.summary.mean));
        kv("oracle_std", format!("{:e}", o.result.summary.std));
        kv("pdf_l1_distance", format!("{:e}", o.distance));
    }
    kv("wall_time_s", format!("{:.3}", run.wall_time.as_secs_f64()));
    Ok(out)
}
