//! `polyspec` command-line interface.
//!
//! Exit status: 0 on success, 2 on usage errors (bad flags, unknown tags or
//! labels), 1 when a computation fails. Errors go to stderr as one line,
//! `error[CODE]: message`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use polyspec::asymvar::{cov_matrix, default_grid_n, SpectraSource, VarianceRequest};
use polyspec::features::{extract_panel, feature_weights, kmeans, preprocess_gdp};
use polyspec::lintest::{blt_statistic, CumulantSource, LinTestConfig, PValueMethod};
use polyspec::models::{parse_model, ConstantConvention, LinearModel, ModelSpec};
use polyspec::partitions::{all_schemes, SchemeCounting};
use polyspec::polymean::{Estimator, EstimatorOptions};
use polyspec::series::read_series_csv;
use polyspec::simlab::{mse_experiment, power_curve, simulate_replicate, MseDesign, SimSpec};
use polyspec::weights::{mse_study_weights, parse_weight, WeightFunction};
use polyspec::Error;

const SCHEMA: &str = "polyspec/1";

#[derive(Parser, Debug)]
#[command(name = "polyspec", version, about = "Polyspectral means, asymptotic variances and the bispectral linearity test")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "POLYSPEC_THREADS")]
    threads: Option<usize>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate polyspectral means of a series.
    Estimate(EstimateArgs),
    /// Asymptotic covariance matrix of polyspectral mean estimates.
    Variance(VarianceArgs),
    /// Bispectral linearity test.
    Lintest(LintestArgs),
    /// Simulate replicates of a model.
    Simulate(SimulateArgs),
    /// MSE study of the asymptotic variance.
    MseTable(MseArgs),
    /// Rejection rates of the linearity test on quadratic MA data.
    PowerCurve(PowerArgs),
    /// Bispectral features and k-means clustering of a wide panel.
    Cluster(ClusterArgs),
    /// Partition schemes.
    Partitions {
        #[command(subcommand)]
        action: PartitionsAction,
    },
}

#[derive(Subcommand, Debug)]
enum PartitionsAction {
    /// Print every scheme for order k as JSON.
    Dump {
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Counting::Unordered)]
        counting: Counting,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Counting {
    Unordered,
    Ordered,
}

impl From<Counting> for SchemeCounting {
    fn from(c: Counting) -> Self {
        match c {
            Counting::Unordered => SchemeCounting::Unordered,
            Counting::Ordered => SchemeCounting::Ordered,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Convention {
    Cumulant,
    Central,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum PMethod {
    Mc,
    Imhof,
}

impl From<PMethod> for PValueMethod {
    fn from(p: PMethod) -> Self {
        match p {
            PMethod::Mc => PValueMethod::MonteCarlo,
            PMethod::Imhof => PValueMethod::Imhof,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Cumulants {
    Residual,
    Model,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Series CSV (one value per row, optional header, optional id column).
    #[arg(long)]
    input: PathBuf,
    /// Weight label, repeatable (e.g. `lag:h=3`, `band`, `cosprod`).
    #[arg(long = "weight", required = true)]
    weights: Vec<String>,
    /// Order for labels that need one.
    #[arg(long)]
    k: Option<usize>,
    /// Model tag used for standard errors and lintest weights.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    grid_n: Option<usize>,
    /// Use the series as given instead of subtracting its mean.
    #[arg(long)]
    no_center: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Debug)]
struct VarianceArgs {
    #[arg(long = "weight", required = true)]
    weights: Vec<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    model: String,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long, value_enum, default_value_t = Counting::Unordered)]
    counting: Counting,
    /// Constants of linear-model spectra.
    #[arg(long, value_enum, default_value_t = Convention::Cumulant)]
    convention: Convention,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Debug)]
struct LintestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Null linear model, e.g. `ar1:phi=0.976`.
    #[arg(long)]
    model: String,
    #[arg(long = "M", default_value_t = 10)]
    m: usize,
    #[arg(long, value_enum, default_value_t = PMethod::Mc)]
    pvalue: PMethod,
    #[arg(long, default_value_t = 200_000)]
    draws: usize,
    #[arg(long, value_enum, default_value_t = Cumulants::Residual)]
    cumulants: Cumulants,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    model: String,
    #[arg(long = "T")]
    t: usize,
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = polyspec::simlab::DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct MseArgs {
    /// Comma-separated model tags.
    #[arg(long, default_value = "ar2-exp,ar2-chisq,arma21-exp,arma21-chisq,hermite")]
    models: String,
    /// Weight labels (default: cosprod, band, cone).
    #[arg(long = "weight")]
    weights: Vec<String>,
    #[arg(long = "T", default_value_t = 100)]
    t: usize,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 50)]
    outer_reps: usize,
    /// 1000 outer replicates.
    #[arg(long, conflicts_with = "outer_reps")]
    full_scale: bool,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct PowerArgs {
    /// Comma-separated θ values.
    #[arg(long, default_value = "0,2.5,5,7.5,10")]
    thetas: String,
    #[arg(long = "T", default_value_t = 100)]
    t: usize,
    #[arg(long, default_value_t = 300)]
    reps: usize,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long = "M", default_value_t = 10)]
    m: usize,
    /// Null model (linear).
    #[arg(long, default_value = "ma1:theta=0.4")]
    model: String,
    #[arg(long, value_enum, default_value_t = PMethod::Imhof)]
    pvalue: PMethod,
    #[arg(long, default_value_t = 20_000)]
    draws: usize,
    #[arg(long, value_enum, default_value_t = Cumulants::Model)]
    cumulants: Cumulants,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    /// Wide CSV: id, then one column per period.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Write centroids as JSON to this file (CSV format only).
    #[arg(long)]
    centroids: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

enum Failure {
    Usage(String, String),
    Compute(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.code().to_string(), e.to_string())
}

fn io_err(e: io::Error) -> Failure {
    Failure::Compute(Error::Input(format!("i/o: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(code, msg)) => {
            eprintln!("error[{code}]: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("E_USAGE".into(), "--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Compute(Error::Config(e.to_string())))?;
    }
    let output = match cli.command {
        Command::Estimate(a) => estimate(a)?,
        Command::Variance(a) => variance_cmd(a)?,
        Command::Lintest(a) => lintest(a)?,
        Command::Simulate(a) => simulate(a)?,
        Command::MseTable(a) => mse_table(a)?,
        Command::PowerCurve(a) => power(a)?,
        Command::Cluster(a) => cluster(a)?,
        Command::Partitions {
            action: PartitionsAction::Dump { k, counting },
        } => partitions_dump(k, counting)?,
    };
    match cli.out {
        Some(path) => std::fs::write(path, output).map_err(io_err)?,
        None => {
            let mut w = BufWriter::new(io::stdout().lock());
            w.write_all(output.as_bytes()).map_err(io_err)?;
            w.flush().map_err(io_err)?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Failure::Compute(Error::Numerical(e.to_string())))?;
    s.push('\n');
    Ok(s)
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Failure::Compute(Error::Input(e.to_string()));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(&r).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Compute(Error::Input(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn open(path: &PathBuf) -> Result<File, Failure> {
    File::open(path).map_err(|e| Failure::Compute(Error::Input(format!("{}: {e}", path.display()))))
}

fn model_arg(tag: &str) -> Result<ModelSpec, Failure> {
    parse_model(tag).map_err(usage)
}

fn linear_arg(tag: &str) -> Result<LinearModel, Failure> {
    let spec = model_arg(tag)?;
    spec.linear()
        .cloned()
        .ok_or_else(|| Failure::Usage("E_CONFIG".into(), format!("model {tag:?} is not linear")))
}

fn weights_arg(labels: &[String], k: Option<usize>, model: Option<&LinearModel>) -> Result<Vec<WeightFunction>, Failure> {
    let w: Vec<WeightFunction> = labels
        .iter()
        .map(|l| parse_weight(l, k, model))
        .collect::<polyspec::Result<_>>()
        .map_err(usage)?;
    if let Some(first) = w.first() {
        if w.iter().any(|g| g.order != first.order) {
            return Err(Failure::Usage("E_ORDER".into(), "all weights must have the same order".into()));
        }
    }
    Ok(w)
}

#[derive(Serialize)]
struct Complex {
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct EstimateRow {
    weight: String,
    order: usize,
    value: Complex,
    #[serde(skip_serializing_if = "Option::is_none")]
    stderr: Option<f64>,
}

#[derive(Serialize)]
struct EstimateOut {
    schema: &'static str,
    t: usize,
    centered: bool,
    estimates: Vec<EstimateRow>,
}

fn estimate(a: EstimateArgs) -> Result<String, Failure> {
    let model = a.model.as_deref().map(model_arg).transpose()?;
    let weights = weights_arg(&a.weights, a.k, model.as_ref().and_then(|m| m.linear()))?;
    let series = read_series_csv(open(&a.input)?)?;
    let est = Estimator::new(
        series.len(),
        &weights,
        EstimatorOptions {
            center: !a.no_center,
            parallel: true,
        },
    )?;
    let values = est.estimate(&series)?;
    let stderrs: Vec<Option<f64>> = match &model {
        Some(m) => {
            let k = weights[0].order;
            let source = SpectraSource::from_model(m, k);
            let n = a.grid_n.unwrap_or_else(|| default_grid_n(&source, k));
            let cov = cov_matrix(&VarianceRequest::new(weights.clone(), source, n)?)?;
            (0..weights.len())
                .map(|i| Some((cov.get(i, i).max(0.0) / series.len() as f64).sqrt()))
                .collect()
        }
        None => vec![None; weights.len()],
    };
    let rows: Vec<EstimateRow> = values
        .into_iter()
        .zip(stderrs)
        .map(|(e, s)| EstimateRow {
            weight: e.weight_label,
            order: e.order,
            value: Complex {
                re: e.value.re,
                im: e.value.im,
            },
            stderr: s,
        })
        .collect();
    match a.format {
        Format::Json => to_json(&EstimateOut {
            schema: SCHEMA,
            t: series.len(),
            centered: !a.no_center,
            estimates: rows,
        }),
        Format::Csv => csv_string(
            &["weight", "order", "re", "im", "stderr"],
            rows.into_iter()
                .map(|r| {
                    vec![
                        r.weight,
                        r.order.to_string(),
                        r.value.re.to_string(),
                        r.value.im.to_string(),
                        r.stderr.map(|v| v.to_string()).unwrap_or_default(),
                    ]
                })
                .collect(),
        ),
    }
}

#[derive(Serialize)]
struct VarianceOut {
    schema: &'static str,
    model: String,
    k: usize,
    grid_n: usize,
    weights: Vec<String>,
    matrix: Vec<Vec<f64>>,
}

fn variance_cmd(a: VarianceArgs) -> Result<String, Failure> {
    let mut spec = model_arg(&a.model)?;
    if let (Convention::Central, ModelSpec::Linear { model, innovation, .. }) = (a.convention, &mut spec) {
        *model = LinearModel::with_convention(model.ar().to_vec(), model.ma().to_vec(), *innovation, ConstantConvention::CentralMoment)
            .map_err(usage)?;
    }
    let weights = weights_arg(&a.weights, a.k, spec.linear())?;
    let k = weights[0].order;
    let source = SpectraSource::from_model(&spec, k);
    let grid_n = a.grid_n.unwrap_or_else(|| default_grid_n(&source, k));
    let req = VarianceRequest::new(weights.clone(), source, grid_n).map_err(usage)?.with_counting(a.counting.into());
    let cov = cov_matrix(&req)?;
    let out = VarianceOut {
        schema: SCHEMA,
        model: a.model,
        k,
        grid_n,
        weights: cov.weight_labels.clone(),
        matrix: cov.rows(),
    };
    match a.format {
        Format::Json => to_json(&out),
        Format::Csv => {
            let mut header = vec!["weight"];
            header.extend(out.weights.iter().map(|s| s.as_str()));
            let rows = out
                .weights
                .iter()
                .zip(&out.matrix)
                .map(|(w, r)| std::iter::once(w.clone()).chain(r.iter().map(|v| v.to_string())).collect())
                .collect();
            csv_string(&header, rows)
        }
    }
}

#[derive(Serialize)]
struct Term {
    j: i64,
    k: i64,
    estimate: Complex,
    variance: f64,
    contribution: f64,
}

#[derive(Serialize)]
struct LintestOut {
    schema: &'static str,
    model: String,
    t: usize,
    m: usize,
    statistic: f64,
    pvalue: f64,
    pvalue_method: &'static str,
    cumulants: [f64; 5],
    eigenvalues: Vec<f64>,
    terms: Vec<Term>,
}

fn lintest(a: LintestArgs) -> Result<String, Failure> {
    let model = linear_arg(&a.model)?;
    let series = read_series_csv(open(&a.input)?)?;
    let mut cfg = LinTestConfig::new(model);
    cfg.m = a.m;
    cfg.pvalue_method = a.pvalue.into();
    cfg.mc_draws = a.draws;
    cfg.seed = a.seed;
    cfg.cumulants = match a.cumulants {
        Cumulants::Residual => CumulantSource::Residual,
        Cumulants::Model => CumulantSource::Model,
    };
    let r = blt_statistic(&series, &cfg)?;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    to_json(&LintestOut {
        schema: SCHEMA,
        model: a.model,
        t: series.len(),
        m: a.m,
        statistic: r.statistic,
        pvalue: r.pvalue,
        pvalue_method: match a.pvalue {
            PMethod::Mc => "monte-carlo",
            PMethod::Imhof => "imhof",
        },
        cumulants: r.cumulants,
        eigenvalues: r.eigenvalues,
        terms: r
            .per_term
            .into_iter()
            .map(|t| Term {
                j: t.j,
                k: t.k,
                estimate: Complex {
                    re: t.estimate.re,
                    im: t.estimate.im,
                },
                variance: t.variance,
                contribution: t.contribution,
            })
            .collect(),
    })
}

#[derive(Serialize)]
struct SimulateOut {
    schema: &'static str,
    model: String,
    t: usize,
    seed: u64,
    burn_in: usize,
    replicates: Vec<Vec<f64>>,
}

fn simulate(a: SimulateArgs) -> Result<String, Failure> {
    let model = model_arg(&a.model)?;
    let mut spec = SimSpec::new(model, a.t, a.replicates, a.seed);
    spec.burn_in = a.burn_in;
    let reps: Vec<Vec<f64>> = (0..a.replicates as u64)
        .map(|r| simulate_replicate(&spec, r).map(|s| s.into_values()))
        .collect::<polyspec::Result<_>>()
        .map_err(|e| match e {
            Error::Input(_) => usage(e),
            other => Failure::Compute(other),
        })?;
    match a.format {
        Format::Json => to_json(&SimulateOut {
            schema: SCHEMA,
            model: a.model,
            t: a.t,
            seed: a.seed,
            burn_in: a.burn_in,
            replicates: reps,
        }),
        Format::Csv => {
            let mut rows = Vec::new();
            for (r, vals) in reps.iter().enumerate() {
                for (t, v) in vals.iter().enumerate() {
                    rows.push(vec![r.to_string(), (t + 1).to_string(), v.to_string()]);
                }
            }
            csv_string(&["replicate", "t", "value"], rows)
        }
    }
}

#[derive(Serialize)]
struct MseRowOut {
    model: String,
    weight: String,
    variance: f64,
    mean_estimate: f64,
    mse: f64,
    scaled_mse: f64,
}

#[derive(Serialize)]
struct MseOut {
    schema: &'static str,
    t: usize,
    replicates: usize,
    outer_replicates: usize,
    seed: u64,
    rows: Vec<MseRowOut>,
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect()
}

fn mse_table(a: MseArgs) -> Result<String, Failure> {
    let models: Vec<ModelSpec> = split_list(&a.models).iter().map(|t| model_arg(t)).collect::<Result<_, _>>()?;
    let weights = if a.weights.is_empty() {
        mse_study_weights()
    } else {
        weights_arg(&a.weights, Some(2), None)?
    };
    let design = MseDesign {
        t: a.t,
        replicates: a.reps,
        outer_replicates: if a.full_scale { 1000 } else { a.outer_reps },
        seed: a.seed,
        grid_n: a.grid_n,
    };
    let r = mse_experiment(&models, &weights, &design)?;
    let rows: Vec<MseRowOut> = r
        .rows
        .into_iter()
        .map(|x| MseRowOut {
            model: x.model,
            weight: x.weight,
            variance: x.variance,
            mean_estimate: x.mean_estimate,
            mse: x.mse,
            scaled_mse: x.scaled_mse,
        })
        .collect();
    match a.format {
        Format::Json => to_json(&MseOut {
            schema: SCHEMA,
            t: r.t,
            replicates: r.replicates,
            outer_replicates: r.outer_replicates,
            seed: r.seed,
            rows,
        }),
        Format::Csv => csv_string(
            &["model", "weight", "variance", "mean_estimate", "mse", "scaled_mse"],
            rows.into_iter()
                .map(|x| {
                    vec![
                        x.model,
                        x.weight,
                        x.variance.to_string(),
                        x.mean_estimate.to_string(),
                        x.mse.to_string(),
                        x.scaled_mse.to_string(),
                    ]
                })
                .collect(),
        ),
    }
}

#[derive(Serialize)]
struct PowerRow {
    theta: f64,
    rate: f64,
    rejections: usize,
    replicates: usize,
    stderr: f64,
}

#[derive(Serialize)]
struct PowerOut {
    schema: &'static str,
    t: usize,
    m: usize,
    level: f64,
    seed: u64,
    points: Vec<PowerRow>,
}

fn power(a: PowerArgs) -> Result<String, Failure> {
    let thetas: Vec<f64> = split_list(&a.thetas)
        .iter()
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Failure::Usage("E_USAGE".into(), format!("invalid theta {s:?}")))
        })
        .collect::<Result<_, _>>()?;
    let model = linear_arg(&a.model)?;
    let mut cfg = LinTestConfig::new(model);
    cfg.m = a.m;
    cfg.pvalue_method = a.pvalue.into();
    cfg.mc_draws = a.draws;
    cfg.seed = a.seed;
    cfg.cumulants = match a.cumulants {
        Cumulants::Residual => CumulantSource::Residual,
        Cumulants::Model => CumulantSource::Model,
    };
    let curve = power_curve(&thetas, a.t, a.reps, a.level, &cfg, a.seed)?;
    let points: Vec<PowerRow> = curve
        .into_iter()
        .map(|p| PowerRow {
            theta: p.theta,
            rate: p.rate.rate(),
            rejections: p.rate.rejections,
            replicates: p.rate.replicates,
            stderr: p.rate.stderr(),
        })
        .collect();
    match a.format {
        Format::Json => to_json(&PowerOut {
            schema: SCHEMA,
            t: a.t,
            m: a.m,
            level: a.level,
            seed: a.seed,
            points,
        }),
        Format::Csv => csv_string(
            &["theta", "rate", "rejections", "replicates", "stderr"],
            points
                .into_iter()
                .map(|p| {
                    vec![
                        p.theta.to_string(),
                        p.rate.to_string(),
                        p.rejections.to_string(),
                        p.replicates.to_string(),
                        p.stderr.to_string(),
                    ]
                })
                .collect(),
        ),
    }
}

#[derive(Serialize)]
struct Assignment {
    id: String,
    cluster: usize,
}

#[derive(Serialize)]
struct Skipped {
    id: String,
    reason: String,
}

#[derive(Serialize)]
struct ClusterOut {
    schema: &'static str,
    k: usize,
    seed: u64,
    inertia: f64,
    iterations: usize,
    features: Vec<String>,
    assignments: Vec<Assignment>,
    centroids: Vec<Vec<f64>>,
    skipped: Vec<Skipped>,
}

fn cluster(a: ClusterArgs) -> Result<String, Failure> {
    let panel = preprocess_gdp(open(&a.input)?)?;
    for (id, why) in &panel.skipped {
        eprintln!("warning: skipped {id}: {why}");
    }
    let weights = feature_weights();
    let feats = extract_panel(&panel.series, &weights)?;
    let x: Vec<Vec<f64>> = feats.iter().map(|f| f.features.clone()).collect();
    let fit = kmeans(&x, a.k, a.seed, a.max_iter)?;
    let out = ClusterOut {
        schema: SCHEMA,
        k: a.k,
        seed: a.seed,
        inertia: fit.inertia,
        iterations: fit.iterations,
        features: weights.iter().map(|w| w.label.clone()).collect(),
        assignments: feats
            .iter()
            .zip(&fit.labels)
            .map(|(f, &c)| Assignment {
                id: f.id.clone(),
                cluster: c,
            })
            .collect(),
        centroids: fit.centroids,
        skipped: panel
            .skipped
            .into_iter()
            .map(|(id, reason)| Skipped { id, reason })
            .collect(),
    };
    match a.format {
        Format::Json => to_json(&out),
        Format::Csv => {
            if let Some(path) = &a.centroids {
                std::fs::write(path, to_json(&out)?).map_err(io_err)?;
            }
            csv_string(
                &["id", "cluster"],
                out.assignments.into_iter().map(|x| vec![x.id, x.cluster.to_string()]).collect(),
            )
        }
    }
}

#[derive(Serialize)]
struct SchemeOut {
    m: usize,
    a: Vec<Vec<u8>>,
    b: Vec<Vec<u8>>,
    block_orders: Vec<usize>,
}

#[derive(Serialize)]
struct PartitionsOut {
    schema: &'static str,
    k: usize,
    counting: &'static str,
    count: usize,
    schemes: Vec<SchemeOut>,
}

fn partitions_dump(k: usize, counting: Counting) -> Result<String, Failure> {
    let schemes = all_schemes(k, counting.into()).map_err(usage)?;
    to_json(&PartitionsOut {
        schema: SCHEMA,
        k,
        counting: match counting {
            Counting::Unordered => "unordered",
            Counting::Ordered => "ordered",
        },
        count: schemes.len(),
        schemes: schemes
            .into_iter()
            .map(|s| SchemeOut {
                m: s.m,
                a: s.a.to_rows(),
                b: s.b.to_rows(),
                block_orders: s.block_orders,
            })
            .collect(),
    })
}
