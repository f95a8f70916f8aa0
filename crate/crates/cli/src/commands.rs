use crate::output::{finish_run, print_kv, Run};
use crate::{Cli, Command, Failure, Format, Shape};
use serde::{Deserialize, Serialize};
use sojourn::hermite::{hermite_coefficient, hermite_rank, RANK_TOL};
use sojourn::limit_lab::{
    resolved_oracle, run_experiment, run_fgn_experiment, run_random_volatility_experiment, AXIS_NODE_CAP,
};
use sojourn::lrd::{check_condcor2, check_spatiotemporal, default_probe_radii, delta_ratio, lrd_classify};
use sojourn::normalizer::plan_sigma;
use sojourn::oracle::{OracleGrid, WindowShape};
use sojourn::report::{config_hash, parse_config};
use sojourn::stats::moments;
use sojourn::{
    ConditionReport, CovarianceModel, ExperimentConfig, FgnExperiment, GridSpec, LrdClass, NormalizationMethod,
    SpectralDensity, Subordinator, Verdict, VolatilityExperiment,
};
use std::path::PathBuf;

pub fn dispatch(cli: &Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Hermite(a) => hermite(cli, a),
        Command::Sigma(a) => sigma(cli, a),
        Command::Check(a) => check(cli, a.path.as_ref()),
        Command::Experiment(a) => experiment(cli, a.path.as_ref(), a.replicates),
        Command::Fgn(a) => fgn(cli, a),
        Command::Rosenblatt(a) => rosenblatt(cli, a),
        Command::Volatility(a) => volatility(cli, a.path.as_ref(), a.replicates),
    }
}

fn config_path(cli: &Cli, positional: Option<&PathBuf>) -> Result<PathBuf, Failure> {
    positional
        .or(cli.global.config.as_ref())
        .cloned()
        .ok_or_else(|| Failure::Usage("a config file is required (positional or --config)".into()))
}

fn read_text(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn parse_json<T: for<'de> Deserialize<'de>>(what: &str, text: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::Usage(format!("invalid {what}: {e}")))
}

fn subordinator(spec: &str) -> Result<Subordinator, Failure> {
    let f = if spec.trim_start().starts_with('{') {
        parse_json::<Subordinator>("subordinator", spec)?
    } else {
        Subordinator::parse_compact(spec).map_err(|e| Failure::Usage(e.to_string()))?
    };
    f.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(f)
}

fn hermite(cli: &Cli, a: &crate::HermiteArgs) -> Result<u8, Failure> {
    let f = subordinator(&a.f)?;
    if !(a.sigma > 0.0 && a.sigma.is_finite()) || !a.u.is_finite() {
        return Err(Failure::Usage("--sigma must be positive and --u finite".into()));
    }
    let numeric = |e: sojourn::Error| Failure::Runtime(e.to_string());
    if a.rank {
        let r = hermite_rank(&f, a.u, a.sigma, RANK_TOL).map_err(numeric)?;
        print_kv(cli.global.format, &[("rank", serde_json::json!(r.rank))]);
    } else {
        let k = a.k.expect("clap enforces --k or --rank");
        let v = hermite_coefficient(&f, a.u, a.sigma, k).map_err(numeric)?;
        print_kv(cli.global.format, &[("a_k", serde_json::json!(v))]);
    }
    Ok(0)
}

fn method(name: &str) -> Result<NormalizationMethod, Failure> {
    Ok(match name {
        "quadrature" => NormalizationMethod::Quadrature,
        "lattice_sum" => NormalizationMethod::LatticeSum,
        "closed_form_fgn" => NormalizationMethod::ClosedFormFgn,
        "asymptotic_example27" => NormalizationMethod::PowerLawAsymptotic,
        other => return Err(Failure::Usage(format!("unknown method '{other}'"))),
    })
}

fn sigma(cli: &Cli, a: &crate::SigmaArgs) -> Result<u8, Failure> {
    let model: CovarianceModel = parse_json("model", &a.model)?;
    model.validate()?;
    let window = if a.mesh.is_empty() {
        GridSpec::unit(&a.extents)
    } else if a.mesh.len() == 1 {
        GridSpec::with_mesh(&a.extents, &vec![a.mesh[0]; a.extents.len()])
    } else {
        GridSpec::with_mesh(&a.extents, &a.mesh)
    };
    let plan = plan_sigma(&model, &window, a.m, method(&a.method)?)?;
    match cli.global.format {
        Format::Json => println!("{}", serde_json::to_string(&plan).map_err(|e| Failure::Runtime(e.to_string()))?),
        Format::Csv => {
            println!("m,value,error");
            println!("{},{:.16e},{:.16e}", plan.m, plan.value, plan.error);
        }
    }
    Ok(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Condition {
    DeltaRatio,
    Condcor2,
    Spatiotemporal,
    LrdClassify,
}

/// Config of the `check` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckConfig {
    condition: Condition,
    model: CovarianceModel,
    /// Probe sizes or radii.
    #[serde(default)]
    sizes: Vec<f64>,
    /// Per-axis radii for condcor2.
    #[serde(default)]
    windows: Vec<Vec<f64>>,
    #[serde(default)]
    delta: Option<f64>,
}

#[derive(Serialize)]
struct CheckOutput<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    class: Option<LrdClass>,
    report: &'a ConditionReport,
}

fn check(cli: &Cli, path: Option<&PathBuf>) -> Result<u8, Failure> {
    let path = config_path(cli, path)?;
    let cfg: CheckConfig = parse_json("check config", &read_text(&path)?)?;
    cfg.model.validate()?;
    let run = Run::start("check", config_hash(&cfg)?, cli.global.seed.unwrap_or(0));
    let need_delta = || cfg.delta.ok_or_else(|| Failure::Usage("this condition needs \"delta\"".into()));
    let mut class = None;
    let report = match cfg.condition {
        Condition::DeltaRatio => {
            let sizes = if cfg.sizes.is_empty() { vec![64.0, 128.0, 256.0, 512.0, 1024.0] } else { cfg.sizes.clone() };
            delta_ratio(&cfg.model, &sizes)?
        }
        Condition::Condcor2 => {
            let windows = if cfg.windows.is_empty() {
                let d = sojourn::models::Covariance::dim(&cfg.model);
                cfg.sizes.iter().map(|r| vec![*r; d]).collect()
            } else {
                cfg.windows.clone()
            };
            check_condcor2(&cfg.model, &windows, need_delta()?)?
        }
        Condition::Spatiotemporal => {
            let radii = if cfg.sizes.is_empty() { default_probe_radii() } else { cfg.sizes.clone() };
            check_spatiotemporal(&cfg.model, &radii, need_delta()?)?
        }
        Condition::LrdClassify => {
            let radii = if cfg.sizes.is_empty() { default_probe_radii() } else { cfg.sizes.clone() };
            let (c, r) = lrd_classify(&cfg.model, &radii)?;
            class = Some(c);
            r
        }
    };
    let out = CheckOutput { class, report: &report };
    match cli.global.format {
        Format::Json => println!("{}", serde_json::to_string(&out).map_err(|e| Failure::Runtime(e.to_string()))?),
        Format::Csv => report.write_csv(std::io::stdout())?,
    }
    let mut files = Vec::new();
    std::fs::create_dir_all(&cli.global.out).map_err(|e| Failure::Runtime(e.to_string()))?;
    let json = cli.global.out.join("check.json");
    crate::output::write_json(&json, &out)?;
    files.push(json);
    let csv = cli.global.out.join("check.csv");
    report.write_csv(std::fs::File::create(&csv).map_err(|e| Failure::Runtime(e.to_string()))?)?;
    files.push(csv);
    finish_run(run, &cli.global.out, files)?;
    Ok(match report.verdict {
        Verdict::Satisfied => 0,
        Verdict::Violated => 1,
        Verdict::Inconclusive => 4,
    })
}

fn parse_checked<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, Failure> {
    parse_config(text).map_err(|e| match e {
        sojourn::Error::Format(m) => Failure::Usage(format!("config schema violation: {m}")),
        other => Failure::Runtime(other.to_string()),
    })
}

fn experiment(cli: &Cli, path: Option<&PathBuf>, replicates: Option<usize>) -> Result<u8, Failure> {
    let path = config_path(cli, path)?;
    let mut cfg: ExperimentConfig = parse_checked(&read_text(&path)?)?;
    if let Some(s) = cli.global.seed {
        cfg.seed = s;
    }
    if let Some(n) = replicates {
        cfg.replicates = n;
    }
    cfg.validate()?;
    let run = Run::start("experiment", config_hash(&cfg)?, cfg.seed);
    let report = run_experiment(&cfg)?;
    crate::output::emit_report(cli, run, &report)
}

fn fgn(cli: &Cli, a: &crate::FgnArgs) -> Result<u8, Failure> {
    let mut exp = match cli.global.config.as_ref() {
        Some(p) => parse_json::<FgnExperiment>("fgn config", &read_text(p)?)?,
        None => {
            if a.hurst.is_empty() || a.ladder.is_empty() {
                return Err(Failure::Usage("fgn needs --hurst and --ladder (or --config)".into()));
            }
            FgnExperiment {
                hurst: Vec::new(),
                gamma: None,
                level: 0.0,
                ladder: Vec::new(),
                replicates: 1000,
                seed: 1,
                axis_node_cap: AXIS_NODE_CAP,
            }
        }
    };
    if !a.hurst.is_empty() {
        exp.hurst = a.hurst.clone();
    }
    if !a.gamma.is_empty() {
        exp.gamma = Some(a.gamma.clone());
    }
    if !a.ladder.is_empty() {
        exp.ladder = a.ladder.clone();
    }
    if let Some(u) = a.level {
        exp.level = u;
    }
    if let Some(n) = a.replicates {
        exp.replicates = n;
    }
    if let Some(c) = a.axis_cap {
        exp.axis_node_cap = c;
    }
    if let Some(s) = cli.global.seed {
        exp.seed = s;
    }
    let run = Run::start("fgn", config_hash(&exp)?, exp.seed);
    let report = run_fgn_experiment(&exp)?;
    crate::output::emit_report(cli, run, &report)
}

fn volatility(cli: &Cli, path: Option<&PathBuf>, replicates: Option<usize>) -> Result<u8, Failure> {
    let path = config_path(cli, path)?;
    let mut exp: VolatilityExperiment = parse_json("volatility config", &read_text(&path)?)?;
    if let Some(s) = cli.global.seed {
        exp.seed = s;
    }
    if let Some(n) = replicates {
        exp.replicates = n;
    }
    let run = Run::start("volatility", config_hash(&exp)?, exp.seed);
    let report = run_random_volatility_experiment(&exp)?;
    crate::output::emit_report(cli, run, &report)
}

#[derive(Debug, Serialize)]
struct OracleSummary {
    m: usize,
    density: SpectralDensity,
    cells: Vec<usize>,
    truncation: Vec<f64>,
    draws: usize,
    seed: u64,
    mean: f64,
    variance: f64,
    skewness: f64,
    excess_kurtosis: f64,
}

fn rosenblatt(cli: &Cli, a: &crate::RosenblattArgs) -> Result<u8, Failure> {
    let density = match &a.density {
        Some(j) => parse_json::<SpectralDensity>("density", j)?,
        None => SpectralDensity::AnisotropicProduct { gammas: a.gammas.clone() },
    };
    density.validate()?;
    let shape = match a.shape {
        Shape::Box => WindowShape::Box,
        Shape::Ball => WindowShape::Ball,
    };
    let d = density.dim();
    let grid = OracleGrid {
        cells: vec![a.cells; d],
        truncation: vec![a.truncation; d],
    };
    let seed = cli.global.seed.unwrap_or(1);
    let run = Run::start(
        "rosenblatt",
        config_hash(&(a.m, &density, &grid, a.draws, seed))?,
        seed,
    );
    let kernel = resolved_oracle(a.m, &density, shape, grid)?;
    let draws = kernel.draws(seed, a.draws);
    let mo = moments(&draws)?;
    let summary = OracleSummary {
        m: a.m,
        density,
        cells: kernel.grid().cells.clone(),
        truncation: kernel.grid().truncation.clone(),
        draws: a.draws,
        seed,
        mean: mo.mean,
        variance: mo.variance,
        skewness: mo.skewness,
        excess_kurtosis: mo.excess_kurtosis,
    };
    std::fs::create_dir_all(&cli.global.out).map_err(|e| Failure::Runtime(e.to_string()))?;
    let mut files = Vec::new();
    let json = cli.global.out.join("oracle.json");
    crate::output::write_json(&json, &summary)?;
    files.push(json);
    let csv = cli.global.out.join("oracle.csv");
    crate::output::write_draws(&csv, &draws)?;
    files.push(csv);
    if cli.global.plot {
        files.push(crate::output::write_plot(&cli.global.out.join("oracle.svg"), &draws, "Hermite oracle draws")?);
    }
    println!(
        "rosenblatt m={}: {} draws, skewness {:.4}, excess kurtosis {:.4}",
        a.m, a.draws, mo.skewness, mo.excess_kurtosis
    );
    finish_run(run, &cli.global.out, files)?;
    Ok(0)
}
