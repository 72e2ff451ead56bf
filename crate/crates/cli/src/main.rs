use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lfsgsc::algos::{self, AlgorithmKind, ScAlgorithmSpec};
use lfsgsc::bench::{self, BenchConfig, DataSource, ModeSelection, SearchOutcome, SearchSpec};
use lfsgsc::data::{self, LabelVector, MatrixFormat, SyntheticSpec};
use lfsgsc::interpret::{self, ImageFormat};
use lfsgsc::lfsg::{self, HyperGrid, LfsgConfig};
use lfsgsc::metrics;
use lfsgsc::oos::{self, Kernel, KERNEL_RANK_TOL};
use serde::{Deserialize, Serialize};
use serde_json::json;

const EXIT_USAGE: u8 = 1;
const EXIT_WARNING: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "lfsgsc",
    version,
    about = "Subspace clustering with label-free self-guided hyperparameter search"
)]
#[command(
    after_help = "Exit codes: 0 success, 1 usage or config error, 2 finished with a warning, 3 runtime failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a union-of-subspaces data set
    Gen(GenArgs),
    /// Cluster a data set with fixed hyperparameters
    Cluster(ClusterArgs),
    /// Search hyperparameters (LFSG, oracle or both) from a JSON config
    Hpo(HpoArgs),
    /// Run the repeated-split benchmark from a JSON config
    Bench(BenchArgs),
    /// Compare two label files
    Eval(EvalArgs),
    /// Assign held-out points to the subspaces of a clustered training set
    Oos(OosArgs),
    /// Export one image per cluster representative
    Viz(VizArgs),
    /// Print a config template with every default filled in
    ConfigSchema(SchemaArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Matrix file (.bin or .csv; columns are samples)
    #[arg(long)]
    data: PathBuf,
    /// Force the matrix format instead of inferring it from the extension
    #[arg(long)]
    format: Option<MatrixFormat>,
    /// The file stores one sample per row
    #[arg(long)]
    transpose: bool,
}

impl DataArgs {
    fn source(&self, labels: Option<&Path>) -> DataSource {
        DataSource {
            matrix: self.data.clone(),
            labels: labels.map(Path::to_path_buf),
            format: self.format,
            transpose: self.transpose,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 4)]
    clusters: usize,
    #[arg(long, default_value_t = 30)]
    ambient: usize,
    /// Dimension of every subspace
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 40)]
    per_cluster: usize,
    /// Standard deviation of the additive Gaussian noise
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FileFormat::Bin)]
    format: FileFormat,
    /// Output directory
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FileFormat {
    Bin,
    Csv,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "lsr")]
    algorithm: AlgorithmKind,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Gaussian kernel width (kernel_lsr)
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Graph filter order (gf_lsr)
    #[arg(long, default_value_t = 1)]
    order: usize,
    #[arg(long)]
    clusters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// True labels; when given, ACC/NMI/F1 are printed
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output label file
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct HpoArgs {
    /// JSON config (see `config-schema hpo`)
    #[arg(long)]
    config: PathBuf,
    /// Override the mode in the config
    #[arg(long)]
    mode: Option<ModeSelection>,
    /// Output directory
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON config (see `config-schema bench`)
    #[arg(long)]
    config: PathBuf,
    /// Run the splits one after another instead of in parallel
    #[arg(long)]
    serial: bool,
    /// Output directory
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    pred: PathBuf,
}

#[derive(Args)]
struct OosArgs {
    /// Training matrix
    #[arg(long)]
    train: PathBuf,
    /// Cluster labels of the training samples
    #[arg(long)]
    train_labels: PathBuf,
    /// Held-out matrix
    #[arg(long)]
    test: PathBuf,
    /// True labels of the held-out samples; when given, accuracy is printed
    #[arg(long)]
    test_labels: Option<PathBuf>,
    /// Subspace dimension per cluster
    #[arg(long, default_value_t = 12)]
    dim: usize,
    /// Fit a Gaussian-kernel model with this width instead of a linear one
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    transpose: bool,
    /// Output label file
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct VizArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    labels: PathBuf,
    /// Number of singular directions combined per cluster
    #[arg(long, default_value_t = 12)]
    dim: usize,
    /// Image rows
    #[arg(long)]
    dx: usize,
    /// Image columns
    #[arg(long)]
    dy: usize,
    #[arg(long, default_value = "pgm")]
    image_format: ImageFormat,
    /// Output directory
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct SchemaArgs {
    #[arg(value_enum, default_value_t = SchemaKind::Bench)]
    kind: SchemaKind,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemaKind {
    Hpo,
    Bench,
}

/// Config of the `hpo` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct HpoConfig {
    data: DataSource,
    #[serde(flatten)]
    search: SearchSpec,
    /// Defaults to the number of classes in the label file.
    #[serde(default)]
    clusters: Option<usize>,
    #[serde(default)]
    seed: u64,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<lfsgsc::Error>() {
            Some(e) if is_runtime(e) => EXIT_RUNTIME,
            Some(_) => EXIT_USAGE,
            None => EXIT_RUNTIME,
        };
        Self { code, error }
    }
}

impl From<lfsgsc::Error> for Failure {
    fn from(e: lfsgsc::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn is_runtime(e: &lfsgsc::Error) -> bool {
    use lfsgsc::Error::*;
    matches!(
        e,
        EigFailure | SolveFailure(..) | EmptyCluster(..) | Empty | EmptySample
    )
}

fn usage(error: anyhow::Error) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error,
    }
}

type CmdResult = std::result::Result<u8, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Cluster(a) => cmd_cluster(&a),
        Command::Hpo(a) => cmd_hpo(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Oos(a) => cmd_oos(&a),
        Command::Viz(a) => cmd_viz(&a),
        Command::ConfigSchema(a) => cmd_schema(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> std::result::Result<T, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(usage)?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(usage)
}

fn scores(pred: &LabelVector, truth: &LabelVector) -> lfsgsc::Result<[f64; 3]> {
    Ok([
        metrics::acc(pred, truth)?,
        metrics::nmi(pred, truth)?,
        metrics::pairwise_f1(pred, truth)?,
    ])
}

fn score_line(s: [f64; 3]) -> String {
    format!("ACC {:.2} NMI {:.2} F1 {:.2}", s[0], s[1], s[2])
}

fn cmd_gen(a: &GenArgs) -> CmdResult {
    if a.dim == 0 || a.dim >= a.ambient {
        return Err(usage(anyhow!(
            "--dim must be in 1..{} (got {})",
            a.ambient,
            a.dim
        )));
    }
    let spec = SyntheticSpec::uniform(a.clusters, a.ambient, a.dim, a.per_cluster, a.noise, a.seed);
    let (x, y) = data::generate_synthetic(&spec)?;
    let (name, fmt) = match a.format {
        FileFormat::Bin => ("data.bin", MatrixFormat::Bin),
        FileFormat::Csv => ("data.csv", MatrixFormat::Csv),
    };
    data::save_matrix(&a.output.join(name), fmt, &x)?;
    data::save_labels(&a.output.join("labels.txt"), &y)?;
    println!(
        "D={} N={} C={} -> {}",
        x.dim(),
        x.samples(),
        y.num_clusters(),
        a.output.display()
    );
    Ok(0)
}

fn cmd_cluster(a: &ClusterArgs) -> CmdResult {
    let (x, truth) = a.data.source(a.truth.as_deref()).load()?;
    let spec = ScAlgorithmSpec {
        kind: a.algorithm,
        lambda: a.lambda,
        sigma2: a.sigma2,
        filter_order: a.order,
        ..ScAlgorithmSpec::lsr(a.lambda)
    };
    let r = algos::cluster(&x, &spec, a.clusters, a.seed)?;
    data::save_labels(&a.output, &r.labels)?;
    if let Some(t) = truth {
        println!("{}", score_line(scores(&r.labels, &t)?));
    }
    if spec.kind == AlgorithmKind::GfLsr && r.iterations >= spec.gf_max_iter {
        log::warn!(
            "graph filtering stopped at the iteration cap ({})",
            spec.gf_max_iter
        );
        return Ok(EXIT_WARNING);
    }
    Ok(0)
}

fn outcome_json(
    o: &SearchOutcome,
    names: &[&str],
    truth: Option<&LabelVector>,
) -> lfsgsc::Result<serde_json::Value> {
    let optimum: serde_json::Map<_, _> = names
        .iter()
        .zip(&o.optimum)
        .map(|(n, v)| (n.to_string(), json!(v)))
        .collect();
    let mut v = json!({
        "mode": o.mode.name(),
        "optimum": optimum,
        "converged": o.converged,
        "evaluations": o.evaluations,
        "iterations": o.traces.iter().map(Vec::len).collect::<Vec<_>>(),
        "warnings": o.warnings,
    });
    if let Some(g) = o.grid_optimum {
        v["grid_optimum"] = json!(g);
    }
    if let Some(t) = truth {
        let s = scores(&o.labels, t)?;
        v["scores"] = json!({"acc": s[0], "nmi": s[1], "f1": s[2]});
    }
    Ok(v)
}

fn cmd_hpo(a: &HpoArgs) -> CmdResult {
    let mut config: HpoConfig = read_config(&a.config)?;
    if let Some(m) = a.mode {
        config.search.mode = m;
    }
    let (x, truth) = config.data.load()?;
    let clusters = config
        .clusters
        .or(truth.as_ref().map(LabelVector::num_clusters))
        .ok_or_else(|| usage(anyhow!("config needs `clusters` or a label file")))?;
    let names = config.search.parameter_names();
    let mut reports = Vec::new();
    let mut outcomes = Vec::new();
    for mode in config.search.mode.modes() {
        let o = bench::run_search(
            &x,
            truth.as_ref(),
            &config.search,
            clusters,
            config.seed,
            mode,
        )?;
        for (i, trace) in o.traces.iter().enumerate() {
            let file = match o.traces.len() {
                1 => format!("trace_{}.csv", mode.name()),
                _ => format!("trace_{}_{}.csv", mode.name(), names[i]),
            };
            write(&a.output.join(file), lfsg::trace_csv(trace))?;
        }
        data::save_labels(
            &a.output.join(format!("labels_{}.txt", mode.name())),
            &o.labels,
        )?;
        for w in &o.warnings {
            log::warn!("{}: {w}", mode.name());
        }
        let optimum: Vec<String> = names
            .iter()
            .zip(&o.optimum)
            .map(|(n, v)| format!("{n}* = {v:.6e}"))
            .collect();
        let mut line = format!("{:<6} {}", mode.name(), optimum.join(", "));
        if let Some(t) = &truth {
            line.push_str(&format!("  {}", score_line(scores(&o.labels, t)?)));
        }
        if !o.converged {
            line.push_str("  (not converged)");
        }
        println!("{line}");
        reports.push(outcome_json(&o, &names, truth.as_ref())?);
        outcomes.push(o);
    }
    let mut summary = json!({
        "algorithm": config.search.algorithm.kind.name(),
        "parameters": names,
        "clusters": clusters,
        "metric": config.search.lfsg.metric.name(),
        "results": reports,
    });
    if let (Some(t), [l, o]) = (&truth, outcomes.as_slice()) {
        let (sl, so) = (scores(&l.labels, t)?, scores(&o.labels, t)?);
        summary["gap"] = json!({"acc": so[0] - sl[0], "nmi": so[1] - sl[1], "f1": so[2] - sl[2]});
        println!(
            "gap    (oracle - lfsg) ACC {:+.2} NMI {:+.2} F1 {:+.2}",
            so[0] - sl[0],
            so[1] - sl[1],
            so[2] - sl[2]
        );
    }
    let text = serde_json::to_string_pretty(&summary).map_err(anyhow::Error::from)?;
    write(&a.output.join("summary.json"), text + "\n")?;
    if outcomes.iter().all(|o| o.converged) {
        Ok(0)
    } else {
        Ok(EXIT_WARNING)
    }
}

fn cmd_bench(a: &BenchArgs) -> CmdResult {
    let config: BenchConfig = read_config(&a.config)?;
    config.validate()?;
    let (x, y) = config.data.load()?;
    let y = y.ok_or_else(|| usage(anyhow!("bench needs a label file (`data.labels`)")))?;
    let report = bench::run_bench(&config, &x, &y, !a.serial)?;
    write(&a.output.join("report.csv"), report.to_csv())?;
    let summary = report.summary();
    write(&a.output.join("summary.txt"), &summary)?;
    print!("{summary}");
    let all_converged = report.runs.iter().all(|r| match &r.status {
        bench::RunStatus::Ok(s) => s.iter().all(|m| m.converged),
        bench::RunStatus::Failed(_) => false,
    });
    if report.failed_runs() == report.runs.len() {
        Err(Failure {
            code: EXIT_RUNTIME,
            error: anyhow!("every run failed"),
        })
    } else if all_converged {
        Ok(0)
    } else {
        Ok(EXIT_WARNING)
    }
}

fn cmd_eval(a: &EvalArgs) -> CmdResult {
    let truth = data::load_labels(&a.truth)?;
    let pred = data::load_labels(&a.pred)?;
    println!("{}", score_line(scores(&pred, &truth)?));
    Ok(0)
}

fn cmd_oos(a: &OosArgs) -> CmdResult {
    let load = |p: &Path| data::load_matrix(p, MatrixFormat::from_path(p), a.transpose);
    let train = load(&a.train)?;
    let labels = data::load_labels(&a.train_labels)?;
    let test = load(&a.test)?;
    let pred = match a.sigma2 {
        None => oos::assign_all(&oos::fit_subspace_model(&train, &labels, a.dim)?, &test)?,
        Some(sigma2) => {
            let model = oos::fit_kernel_oos(
                &train,
                &labels,
                a.dim,
                Kernel::Gaussian { sigma2 },
                KERNEL_RANK_TOL,
            )?;
            oos::assign_kernel_all(&model, &test)?
        }
    };
    data::save_labels(&a.output, &pred)?;
    if let Some(p) = &a.test_labels {
        let truth = data::load_labels(p)?;
        println!("OOS {}", score_line(scores(&pred, &truth)?));
    }
    Ok(0)
}

fn cmd_viz(a: &VizArgs) -> CmdResult {
    let (x, y) = a.data.source(Some(&a.labels)).load()?;
    let y = y.expect("labels requested");
    let reps = interpret::cluster_representatives(&x, &y, a.dim)?;
    let images = reps
        .iter()
        .map(|r| Ok((r.cluster, r.image(a.dx, a.dy)?)))
        .collect::<lfsgsc::Result<Vec<_>>>()?;
    let paths = interpret::export_images(&images, &a.output, a.image_format)?;
    println!("wrote {} images to {}", paths.len(), a.output.display());
    Ok(0)
}

fn cmd_schema(a: &SchemaArgs) -> CmdResult {
    let data = DataSource {
        matrix: PathBuf::from("data.bin"),
        labels: Some(PathBuf::from("labels.txt")),
        format: None,
        transpose: false,
    };
    let search = SearchSpec {
        algorithm: ScAlgorithmSpec::lsr(1.0),
        grid: HyperGrid::decades(-5, 1)?,
        secondary_grid: None,
        lfsg: LfsgConfig::default(),
        mode: ModeSelection::Both,
    };
    let value = match a.kind {
        SchemaKind::Hpo => serde_json::to_value(HpoConfig {
            data,
            search,
            clusters: None,
            seed: 0,
        }),
        SchemaKind::Bench => serde_json::to_value(BenchConfig {
            data,
            search,
            runs: 25,
            in_per_class: 50,
            out_per_class: 50,
            subspace_dim: 12,
            seed: 0,
            kernel_rank_tol: KERNEL_RANK_TOL,
        }),
    }
    .map_err(anyhow::Error::from)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&value).map_err(anyhow::Error::from)?
    );
    Ok(0)
}
