use crate::{Cli, Failure, Format};
use serde::Serialize;
use sojourn::report::{histogram_qq_svg, RunManifest};
use sojourn::ExperimentReport;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

fn io(e: std::io::Error) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Prints key/value pairs as a JSON object or a two-row CSV.
pub fn print_kv(format: Format, pairs: &[(&str, serde_json::Value)]) {
    match format {
        Format::Json => {
            let map: serde_json::Map<String, serde_json::Value> =
                pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
            println!("{}", serde_json::Value::Object(map));
        }
        Format::Csv => {
            println!("{}", pairs.iter().map(|(k, _)| *k).collect::<Vec<_>>().join(","));
            let vals: Vec<String> = pairs
                .iter()
                .map(|(_, v)| match v.as_f64() {
                    Some(x) if !v.is_u64() => format!("{x:.16e}"),
                    _ => v.to_string(),
                })
                .collect();
            println!("{}", vals.join(","));
        }
    }
}

/// A run in progress: identity and start time for the manifest.
pub struct Run {
    command: String,
    hash: String,
    seed: u64,
    started: String,
}

impl Run {
    pub fn start(command: &str, hash: String, seed: u64) -> Self {
        Run {
            command: command.to_string(),
            hash,
            seed,
            started: chrono::Utc::now().to_rfc3339(),
        }
    }
}

pub fn finish_run(run: Run, dir: &Path, outputs: Vec<PathBuf>) -> Result<(), Failure> {
    let manifest = RunManifest {
        command: run.command,
        config_hash: run.hash,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: run.seed,
        started: run.started,
        finished: chrono::Utc::now().to_rfc3339(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    manifest.write(&dir.join("manifest.json"))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(io)
}

pub fn write_draws(path: &Path, draws: &[f64]) -> Result<(), Failure> {
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "index,value").map_err(io)?;
    for (i, v) in draws.iter().enumerate() {
        writeln!(w, "{i},{v:.16e}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_plot(path: &Path, values: &[f64], title: &str) -> Result<PathBuf, Failure> {
    let svg = histogram_qq_svg(values, title)?;
    std::fs::write(path, svg).map_err(io)?;
    Ok(path.to_path_buf())
}

/// Per-window summary table for `--format csv`.
fn write_summary_csv(path: &Path, report: &ExperimentReport) -> Result<(), Failure> {
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "window_index,size,volume,centering,scale,raw_mean,raw_variance,mean,variance,skewness,excess_kurtosis,ks,ks_p_value")
        .map_err(io)?;
    for s in &report.windows {
        let (ks, p) = s.ks.map_or((f64::NAN, f64::NAN), |k| (k.distance, k.p_value));
        let vals = [
            s.size,
            s.volume,
            s.centering,
            s.scale,
            s.raw_mean,
            s.raw_variance,
            s.standardized.mean,
            s.standardized.variance,
            s.standardized.skewness,
            s.standardized.excess_kurtosis,
            ks,
            p,
        ];
        let cols: Vec<String> = vals.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{},{}", s.window_index, cols.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes report, records and plots, prints the summary line and maps
/// the check outcome to the exit status.
pub fn emit_report(cli: &Cli, run: Run, report: &ExperimentReport) -> Result<u8, Failure> {
    let dir = &cli.global.out;
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut files = Vec::new();
    let summary = match cli.global.format {
        Format::Json => {
            let p = dir.join("report.json");
            write_json(&p, report)?;
            p
        }
        Format::Csv => {
            let p = dir.join("report.csv");
            write_summary_csv(&p, report)?;
            p
        }
    };
    files.push(summary.clone());
    let records = dir.join("records.csv");
    report.write_csv(BufWriter::new(File::create(&records).map_err(io)?))?;
    files.push(records);
    if cli.global.plot {
        for w in &report.windows {
            let p = dir.join(format!("window_{}.svg", w.window_index));
            let title = format!("{} window {} (n = {})", report.experiment, w.window_index, w.size);
            files.push(write_plot(&p, &report.standardized(w.window_index), &title)?);
        }
    }
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    let passed = report.checks.iter().filter(|c| c.passed).count();
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    println!(
        "{} seed={} replicates={}: {} ({}/{} checks){} -> {}",
        report.experiment,
        report.seed,
        report.replicates,
        if report.passed() { "PASS" } else { "FAIL" },
        passed,
        report.checks.len(),
        if failed.is_empty() { String::new() } else { format!(" failed: {}", failed.join(", ")) },
        summary.display()
    );
    finish_run(run, dir, files)?;
    Ok(if report.passed() { 0 } else { 1 })
}
