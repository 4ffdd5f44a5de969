//! `tvlad` command line: simulate tvAR paths, fit the local self-weighted
//! LAD estimator, run the multiplier bootstrap and its tests, compute Hill
//! curves, and reproduce the simulation studies.
//!
//! Every artifact embeds the seed in use and a SHA-256 hash of the fully
//! resolved configuration; the resolved configuration is also echoed to
//! stdout. Exit codes: 1 configuration, 2 data, 3 numeric, 4 internal.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use tvlad::bootstrap::{
    bonferroni_schedule, bootstrap_covariance, bootstrap_replicates, equivalence_test,
    MultiplierSpec,
};
use tvlad::diagnostics::{hill_curve, TailSide};
use tvlad::estimator::{baseline_at, lswlade_grid, Bandwidth, BaselineKind, BoundaryPolicy};
use tvlad::experiments::{
    run_coverage_study, run_mae_study, run_size_power_study, ErrorMetric, StudyConfig,
};
use tvlad::io::{ingest_csv, write_series_csv_with_comments, ColumnSel, Transform};
use tvlad::process::{simulate_tvar, DEFAULT_BURN_IN};
use tvlad::weights::WeightSpec;
use tvlad::{Error, EstimationConfig, TvModel};

#[derive(Parser)]
#[command(
    name = "tvlad",
    version,
    about = "Local self-weighted LAD inference for time-varying autoregressions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a tvAR path from a model JSON file.
    Simulate(SimulateArgs),
    /// Fit the local estimator on a grid of points.
    Estimate(EstimateArgs),
    /// Run the multiplier bootstrap at one point.
    Bootstrap(BootstrapArgs),
    /// Test equality of the coefficient vector at two points.
    Test(TestArgs),
    /// Hill tail-index curve.
    Hill(HillArgs),
    /// Reproduce a simulation study from a config file.
    Study(StudyArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Model JSON: {"p":1,"coeffs":[...],"innovation":{...}}
    #[arg(long)]
    model: PathBuf,
    /// Series length T.
    #[arg(long = "len", visible_alias = "T")]
    len: usize,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Input CSV path.
    #[arg(long = "input", visible_alias = "in")]
    input: PathBuf,
    /// Column name or zero-based index.
    #[arg(long, default_value = "value")]
    column: String,
    /// Transform applied to the column.
    #[arg(long, value_enum, default_value_t = TransformArg::None)]
    transform: TransformArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TransformArg {
    None,
    LogReturn,
}

impl From<TransformArg> for Transform {
    fn from(t: TransformArg) -> Self {
        match t {
            TransformArg::None => Transform::None,
            TransformArg::LogReturn => Transform::LogReturn,
        }
    }
}

#[derive(Args, Clone)]
struct WeightArgs {
    /// Weight family: ling | smooth_indicator | pan | unit.
    #[arg(long, default_value = "smooth_indicator")]
    weight: String,
    /// Constant for ling or a fixed smooth-indicator cutoff.
    #[arg(long)]
    c: Option<f64>,
    /// Quantile level for the smooth-indicator cutoff.
    #[arg(long)]
    q: Option<f64>,
}

impl WeightArgs {
    fn resolve(&self) -> Result<WeightSpec, Error> {
        match self.weight.as_str() {
            "ling" => Ok(WeightSpec::ling(self.c.unwrap_or(0.5))),
            "smooth_indicator" => match (self.c, self.q) {
                (Some(c), None) => Ok(WeightSpec::smooth_indicator_cutoff(c)),
                (None, q) => Ok(WeightSpec::smooth_indicator_quantile(q.unwrap_or(0.90))),
                (Some(_), Some(_)) => Err(Error::Config(
                    "pass either --c or --q for the smooth indicator, not both".into(),
                )),
            },
            "pan" => Ok(WeightSpec::PanDecay),
            "unit" => Ok(WeightSpec::Unit),
            other => Err(Error::Config(format!(
                "unknown weight '{other}' (expected ling, smooth_indicator, pan or unit)"
            ))),
        }
    }
}

#[derive(Args, Clone)]
struct FitArgs {
    /// Autoregressive order p.
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// Bandwidth: "rule" or a fixed value in (0, 0.5).
    #[arg(long, default_value = "rule")]
    bandwidth: String,
    /// Boundary policy for points near 0 or 1.
    #[arg(long, value_enum, default_value_t = BoundaryArg::Strict)]
    boundary: BoundaryArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BoundaryArg {
    Strict,
    Truncate,
}

impl FitArgs {
    fn config(&self, weight: WeightSpec) -> Result<EstimationConfig, Error> {
        let bandwidth = match self.bandwidth.as_str() {
            "rule" => Bandwidth::Rule,
            v => Bandwidth::Fixed(
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad bandwidth '{v}'")))?,
            ),
        };
        Ok(EstimationConfig {
            weight,
            kernel: Default::default(),
            bandwidth,
            order: self.p,
            boundary: match self.boundary {
                BoundaryArg::Strict => BoundaryPolicy::Strict,
                BoundaryArg::Truncate => BoundaryPolicy::Truncate,
            },
        })
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Grid start:end:step, or a single point via --u0.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    u0: Option<f64>,
    #[command(flatten)]
    weight: WeightArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Also fit the unweighted baseline (l2 or lad) at each point.
    #[arg(long)]
    baseline: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BootstrapArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    u0: f64,
    /// Number of bootstrap replicates.
    #[arg(long = "m", visible_alias = "M", default_value_t = 5000)]
    m: usize,
    #[arg(long, value_enum, default_value_t = MultiplierArg::Exponential)]
    multiplier: MultiplierArg,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    weight: WeightArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Replicates CSV output.
    #[arg(long)]
    out: PathBuf,
    /// Summary JSON (base fit, covariance); defaults to <out>.summary.json.
    #[arg(long)]
    summary_out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MultiplierArg {
    Exponential,
    Gaussian,
    TwoPoint,
}

impl From<MultiplierArg> for MultiplierSpec {
    fn from(m: MultiplierArg) -> Self {
        match m {
            MultiplierArg::Exponential => MultiplierSpec::Exponential1,
            MultiplierArg::Gaussian => MultiplierSpec::Gaussian11,
            MultiplierArg::TwoPoint => MultiplierSpec::two_point(),
        }
    }
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    u1: f64,
    #[arg(long)]
    u2: f64,
    #[arg(long = "m", visible_alias = "M", default_value_t = 1000)]
    m: usize,
    #[arg(long, value_enum, default_value_t = MultiplierArg::Exponential)]
    multiplier: MultiplierArg,
    #[arg(long)]
    seed: Option<u64>,
    /// Bonferroni family size: adjusts the reported critical values.
    #[arg(long, default_value_t = 1)]
    bonferroni_k: usize,
    #[command(flatten)]
    weight: WeightArgs,
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HillArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum)]
    side: SideArg,
    #[arg(long, default_value_t = 10)]
    k_min: usize,
    #[arg(long)]
    k_max: usize,
    #[arg(long, default_value_t = 1)]
    step: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SideArg {
    Left,
    Right,
}

#[derive(Args)]
struct StudyArgs {
    /// Study kind.
    #[arg(value_enum)]
    kind: StudyKind,
    /// StudyConfig JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Metadata sidecar; defaults to <out>.meta.json.
    #[arg(long)]
    meta_out: Option<PathBuf>,
    /// First test point (size-power).
    #[arg(long, default_value_t = 0.2)]
    u1: f64,
    /// Second test points (size-power), comma separated.
    #[arg(long, default_value = "0.7,0.75,0.8")]
    u2: String,
    /// Region center (coverage).
    #[arg(long, default_value_t = 0.5)]
    u0: f64,
    /// Levels, comma separated: significance for size-power, nominal
    /// coverage for coverage.
    #[arg(long)]
    levels: Option<String>,
    #[command(flatten)]
    weight: WeightArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StudyKind {
    Mae,
    Mse,
    SizePower,
    Coverage,
}

fn main() {
    init_thread_pool();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Bootstrap(a) => cmd_bootstrap(a),
        Command::Test(a) => cmd_test(a),
        Command::Hill(a) => cmd_hill(a),
        Command::Study(a) => cmd_study(a),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(e.exit_category());
    }
}

fn init_thread_pool() {
    if let Ok(v) = std::env::var("TVLAD_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| rand::random::<u64>())
}

fn config_hash<T: Serialize>(resolved: &T) -> Result<String, Error> {
    let js = serde_json::to_string(resolved)
        .map_err(|e| Error::Config(format!("config serialization failed: {e}")))?;
    let mut hasher = Sha256::new();
    hasher.update(js.as_bytes());
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn echo_config(resolved: &serde_json::Value) {
    println!("{resolved}");
}

fn read_to_string(path: &PathBuf) -> Result<String, Error> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))
}

fn write_string(path: &PathBuf, content: &str) -> Result<(), Error> {
    std::fs::write(path, content)
        .map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &PathBuf, value: &T) -> Result<(), Error> {
    let js = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    write_string(path, &js)
}

fn load_series(input: &InputArgs) -> Result<Vec<f64>, Error> {
    ingest_csv(
        &input.input,
        &ColumnSel::parse(&input.column),
        input.transform.into(),
    )
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "grid '{spec}' is not start:end:step"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad grid number '{p}'")))
        })
        .collect::<Result<_, _>>()?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if step <= 0.0 || end < start {
        return Err(Error::Config(format!(
            "grid '{spec}' must have end >= start, step > 0"
        )));
    }
    let mut grid = Vec::new();
    let n = ((end - start) / step).round() as usize;
    for k in 0..=n {
        // snap accumulated points to 12 decimals so 0.1:0.9:0.1 yields
        // 0.3 rather than 0.30000000000000004 in configs and outputs
        let u = ((start + step * k as f64) * 1e12).round() / 1e12;
        if u <= end + 1e-12 {
            grid.push(u);
        }
    }
    Ok(grid)
}

fn parse_levels(spec: &Option<String>, default: &[f64]) -> Result<Vec<f64>, Error> {
    match spec {
        None => Ok(default.to_vec()),
        Some(s) => s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad level '{p}'")))
            })
            .collect(),
    }
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), Error> {
    let model: TvModel = serde_json::from_str(&read_to_string(&a.model)?)
        .map_err(|e| Error::Config(format!("bad model file: {e}")))?;
    let seed = resolve_seed(a.seed);
    let resolved = json!({
        "command": "simulate",
        "model": model,
        "len": a.len,
        "burn_in": a.burn_in,
        "seed": seed,
    });
    let hash = config_hash(&resolved)?;
    let series = simulate_tvar(&model, a.len, a.burn_in, seed)?;
    write_series_csv_with_comments(&a.out, &series, &[format!("config_sha256={hash}")])?;
    echo_config(&json!({ "config": resolved, "config_sha256": hash, "out": a.out }));
    Ok(())
}

fn cmd_estimate(a: EstimateArgs) -> Result<(), Error> {
    let series = load_series(&a.input)?;
    let weight = a.weight.resolve()?;
    let config = a.fit.config(weight)?;
    let grid = match (&a.grid, a.u0) {
        (Some(g), None) => parse_grid(g)?,
        (None, Some(u)) => vec![u],
        _ => return Err(Error::Config("pass exactly one of --grid or --u0".into())),
    };
    let resolved = json!({
        "command": "estimate",
        "input": a.input.input,
        "column": a.input.column,
        "config": config,
        "grid": grid,
        "baseline": a.baseline,
    });
    let hash = config_hash(&resolved)?;

    let fits = lswlade_grid(&series, &grid, &config);
    let baseline = match a.baseline.as_deref() {
        None => None,
        Some("l2") => Some(BaselineKind::L2),
        Some("lad") => Some(BaselineKind::Lad),
        Some(other) => {
            return Err(Error::Config(format!(
                "unknown baseline '{other}' (l2 or lad)"
            )))
        }
    };
    let results: Vec<serde_json::Value> = fits
        .into_iter()
        .map(|(u0, fit)| {
            let base = baseline
                .map(|b| baseline_at(&series, u0, &config, b).ok())
                .unwrap_or(None);
            match fit {
                Ok(f) => json!({ "u0": u0, "fit": f, "baseline": base }),
                Err(e) => json!({ "u0": u0, "error": e.to_string(), "baseline": base }),
            }
        })
        .collect();
    write_json(
        &a.out,
        &json!({ "config": resolved, "config_sha256": hash, "results": results }),
    )?;
    echo_config(&json!({ "config": resolved, "config_sha256": hash, "out": a.out }));
    Ok(())
}

fn cmd_bootstrap(a: BootstrapArgs) -> Result<(), Error> {
    let series = load_series(&a.input)?;
    let weight = a.weight.resolve()?;
    let config = a.fit.config(weight)?;
    let seed = resolve_seed(a.seed);
    let multiplier: MultiplierSpec = a.multiplier.into();
    let resolved = json!({
        "command": "bootstrap",
        "input": a.input.input,
        "column": a.input.column,
        "config": config,
        "u0": a.u0,
        "m": a.m,
        "multiplier": multiplier,
        "seed": seed,
    });
    let hash = config_hash(&resolved)?;

    let ensemble = bootstrap_replicates(&series, &[a.u0], &config, a.m, multiplier, seed)?;
    let cov = bootstrap_covariance(&ensemble)?;
    let mut csv = format!("# seed={seed}\n# config_sha256={hash}\n");
    csv.push_str(&ensemble.to_csv());
    write_string(&a.out, &csv)?;

    let summary_path = a
        .summary_out
        .unwrap_or_else(|| a.out.with_extension("summary.json"));
    write_json(
        &summary_path,
        &json!({
            "config": resolved,
            "config_sha256": hash,
            "seed": seed,
            "base_fit": ensemble.base_fits[0],
            "covariance": cov,
            "usable_replicates": ensemble.replicates.len(),
            "flagged_replicates": ensemble.flagged,
            "excluded_replicates": ensemble.excluded,
        }),
    )?;
    echo_config(
        &json!({ "config": resolved, "config_sha256": hash, "out": a.out, "summary": summary_path }),
    );
    Ok(())
}

fn cmd_test(a: TestArgs) -> Result<(), Error> {
    let series = load_series(&a.input)?;
    let weight = a.weight.resolve()?;
    let config = a.fit.config(weight)?;
    let seed = resolve_seed(a.seed);
    let multiplier: MultiplierSpec = a.multiplier.into();
    let resolved = json!({
        "command": "test",
        "input": a.input.input,
        "column": a.input.column,
        "config": config,
        "u1": a.u1,
        "u2": a.u2,
        "m": a.m,
        "multiplier": multiplier,
        "bonferroni_k": a.bonferroni_k,
        "seed": seed,
    });
    let hash = config_hash(&resolved)?;

    let report = equivalence_test(&series, a.u1, a.u2, &config, a.m, multiplier, seed)?;
    let mut adjusted = serde_json::Map::new();
    for level in [0.10, 0.05, 0.01] {
        let crit = bonferroni_schedule(level, a.bonferroni_k, report.df)?;
        adjusted.insert(
            format!("{level:.2}"),
            json!({ "critical_value": crit, "reject": report.statistic > crit }),
        );
    }
    write_json(
        &a.out,
        &json!({
            "config": resolved,
            "config_sha256": hash,
            "seed": seed,
            "report": report,
            "bonferroni": adjusted,
        }),
    )?;
    echo_config(&json!({ "config": resolved, "config_sha256": hash, "out": a.out }));
    Ok(())
}

fn cmd_hill(a: HillArgs) -> Result<(), Error> {
    let series = load_series(&a.input)?;
    let side = match a.side {
        SideArg::Left => TailSide::Left,
        SideArg::Right => TailSide::Right,
    };
    let resolved = json!({
        "command": "hill",
        "input": a.input.input,
        "column": a.input.column,
        "side": side,
        "k_min": a.k_min,
        "k_max": a.k_max,
        "step": a.step,
    });
    let hash = config_hash(&resolved)?;
    let curve = hill_curve(&series, a.k_min, a.k_max, a.step, side)?;
    let mut csv = format!("# config_sha256={hash}\n");
    csv.push_str(&curve.to_csv());
    write_string(&a.out, &csv)?;
    echo_config(&json!({
        "config": resolved,
        "config_sha256": hash,
        "out": a.out,
        "plateau_median": curve.plateau_median(),
        "drift_ratio": curve.drift_ratio(),
        "n_used": curve.n_used,
    }));
    Ok(())
}

fn cmd_study(a: StudyArgs) -> Result<(), Error> {
    let cfg: StudyConfig = serde_json::from_str(&read_to_string(&a.config)?)
        .map_err(|e| Error::Config(format!("bad study config: {e}")))?;
    let weight = a.weight.resolve()?;
    let kind_name = match a.kind {
        StudyKind::Mae => "mae",
        StudyKind::Mse => "mse",
        StudyKind::SizePower => "size_power",
        StudyKind::Coverage => "coverage",
    };
    let resolved = json!({
        "command": "study",
        "kind": kind_name,
        "study": cfg,
        "u0": a.u0,
        "u1": a.u1,
        "u2": a.u2,
        "levels": a.levels,
    });
    let hash = config_hash(&resolved)?;

    let table = match a.kind {
        StudyKind::Mae => run_mae_study(&cfg, ErrorMetric::Mae)?,
        StudyKind::Mse => run_mae_study(&cfg, ErrorMetric::Mse)?,
        StudyKind::SizePower => {
            let u2: Vec<f64> =
                a.u2.split(',')
                    .map(|p| {
                        p.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Config(format!("bad u2 '{p}'")))
                    })
                    .collect::<Result<_, _>>()?;
            let levels = parse_levels(&a.levels, &[0.10, 0.05])?;
            run_size_power_study(&cfg, a.u1, &u2, &levels, weight)?
        }
        StudyKind::Coverage => {
            let levels = parse_levels(&a.levels, &[0.90, 0.95])?;
            run_coverage_study(&cfg, a.u0, &levels, weight)?
        }
    };

    let mut csv = format!("# seed={}\n# config_sha256={hash}\n", cfg.seed);
    csv.push_str(&table.to_csv());
    write_string(&a.out, &csv)?;
    let meta_path = a
        .meta_out
        .unwrap_or_else(|| a.out.with_extension("meta.json"));
    write_json(
        &meta_path,
        &json!({ "config": resolved, "config_sha256": hash, "seed": cfg.seed, "metadata": table.metadata }),
    )?;
    println!("{}", table.to_pretty());
    echo_config(
        &json!({ "config": resolved, "config_sha256": hash, "out": a.out, "meta": meta_path }),
    );
    Ok(())
}
