//! `rgp`: sample targets, train projections, score and evaluate.

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use rgp_core::dataio::{load_csv, one_class_split, ColumnRef, CsvSchema, DatasetManifest, LabeledDataset};
use rgp_core::divergence::{
    cost_matrix, mmd2_unbiased, sinkhorn, uniform_marginal, KernelConfig, DEFAULT_SINKHORN_EPSILON,
    DEFAULT_SINKHORN_MAX_ITER, DEFAULT_SINKHORN_TOL,
};
use rgp_core::experiment::{ExperimentSettings, CALIBRATION_SEED};
use rgp_core::metrics::{auc, f1_with, PositiveClass};
use rgp_core::sampler::{sample, TargetKind, TargetSpec};
use rgp_core::scoring::{ScoreMode, ScoreModel, DEFAULT_THRESHOLD_QUANTILE};
use rgp_core::trainer::{auto_gamma, train, Checkpoint};
use rgp_core::{rng_from_seed, Label, RgpError};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rgp", version, about = "Restricted generative projection for one-class anomaly detection")]
struct Cli {
    /// Seed for sampling, splitting and training.
    #[arg(long, global = true, env = "RGP_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw points from a target distribution.
    Sample(SampleArgs),
    /// Train an encoder/decoder pair on the normal rows of a dataset.
    Train(TrainArgs),
    /// Score rows with a trained checkpoint.
    Score(ScoreArgs),
    /// Compare a score file with labelled data.
    Eval(EvalArgs),
    /// Export 2-D projections for plotting.
    Project(ProjectArgs),
    /// Divergence between two CSV point sets.
    Diag(DiagArgs),
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    kind: TargetKind,
    #[arg(long)]
    dim: usize,
    /// Outer radius; calibrated when omitted.
    #[arg(long)]
    r: Option<f64>,
    /// Inner radius for ubhs; calibrated when omitted.
    #[arg(long = "r-inner")]
    r_inner: Option<f64>,
    #[arg(long)]
    n: usize,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset manifest or run config (`key=value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for checkpoint, report and split CSVs.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    #[arg(long = "latent-dim")]
    latent_dim: Option<usize>,
    #[arg(long)]
    target: Option<String>,
    /// Hidden widths, e.g. `32,32`, or `auto`.
    #[arg(long)]
    hidden: Option<String>,
    /// Extra `key=value` settings; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct ModeArgs {
    /// `hard`, `soft` or `soft:K`.
    #[arg(long)]
    mode: Option<String>,
    /// Neighbour count for soft scores.
    #[arg(long)]
    k: Option<usize>,
    /// Training-score quantile used as threshold.
    #[arg(long)]
    quantile: Option<f64>,
    /// `key=value` file supplying `k` and `threshold_quantile` defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Features in the checkpoint's input space (e.g. `test.csv` from train).
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    mode: ModeArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Output of `score`.
    #[arg(long)]
    scores: PathBuf,
    /// CSV with a `label` column, rows aligned with the scores.
    #[arg(long)]
    labels: PathBuf,
    /// Count normal rows as positives for precision, recall and F1.
    #[arg(long = "positive-normal")]
    positive_normal: bool,
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Extra rows to project; tagged by label when a label column exists.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagArgs {
    /// Unbiased MMD² between two files.
    #[arg(long, num_args = 2, value_names = ["A", "B"], required_unless_present = "sinkhorn", conflicts_with = "sinkhorn")]
    mmd: Option<Vec<PathBuf>>,
    /// Entropic transport cost between two equally sized files.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    sinkhorn: Option<Vec<PathBuf>>,
    /// Kernel gamma; taken from the first file when omitted.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Sample(a) => cmd_sample(a, cli.seed),
        Command::Train(a) => cmd_train(a, cli.seed),
        Command::Score(a) => cmd_score(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Project(a) => cmd_project(a),
        Command::Diag(a) => cmd_diag(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                RgpError::Numerical(_) => 3,
                _ => 2,
            })
        }
    }
}

type Result<T> = rgp_core::Result<T>;

fn usage(msg: impl Into<String>) -> RgpError {
    RgpError::InvalidArgument(msg.into())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| RgpError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn split_kv(s: &str) -> Result<(String, String)> {
    let (k, v) = s.split_once('=').ok_or_else(|| usage(format!("expected KEY=VALUE, got {s:?}")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Flat `key=value` lines, `#` comments allowed.
fn read_kv(path: &Path) -> Result<Vec<(String, String)>> {
    read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(split_kv)
        .collect()
}

/// Numeric CSV with a header; the `label` column, when present, becomes the
/// labels.
fn read_points(path: &Path) -> Result<LabeledDataset> {
    let first = read_text(path)?.lines().next().unwrap_or_default().to_string();
    let has_label = first.split(',').any(|c| c.trim() == "label");
    let schema = CsvSchema { label_column: has_label.then(|| ColumnRef::Name("label".into())), ..CsvSchema::default() };
    let ds = load_csv(path, &schema)?;
    if ds.rejected_rows > 0 {
        return Err(RgpError::Parse(format!("{}: {} malformed rows", path.display(), ds.rejected_rows)));
    }
    Ok(ds)
}

fn cmd_sample(a: SampleArgs, seed: u64) -> Result<()> {
    if a.r_inner.is_some() && a.kind != TargetKind::Ubhs {
        return Err(usage("--r-inner only applies to ubhs"));
    }
    let spec = match (a.kind, a.r, a.r_inner) {
        (TargetKind::Ubhs, Some(r), Some(inner)) => TargetSpec::new(a.kind, a.dim, r, inner)?,
        (kind, Some(r), _) if kind != TargetKind::Ubhs => TargetSpec::new(kind, a.dim, r, 0.0)?,
        (kind, r, inner) => {
            let c = TargetSpec::calibrated(kind, a.dim, &mut rng_from_seed(CALIBRATION_SEED))?;
            TargetSpec::new(kind, a.dim, r.unwrap_or(c.radius()), inner.unwrap_or(c.inner_radius()))?
        }
    };
    let batch = sample(&spec, a.n, &mut rng_from_seed(seed))?;
    batch.write_csv(output(a.out.as_deref())?, true)
}

fn cmd_train(a: TrainArgs, seed: u64) -> Result<()> {
    let manifest = DatasetManifest::load(&a.config)?;
    let mut settings = ExperimentSettings::from_manifest(&manifest)?;
    let flags = [
        ("objective", a.objective.clone()),
        ("lambda", a.lambda.map(|v| v.to_string())),
        ("lr", a.lr.map(|v| v.to_string())),
        ("epochs", a.epochs.map(|v| v.to_string())),
        ("batch_size", a.batch_size.map(|v| v.to_string())),
        ("latent_dim", a.latent_dim.map(|v| v.to_string())),
        ("target", a.target.clone()),
        ("hidden", a.hidden.clone()),
    ];
    let mut overrides: Vec<(String, String)> = a.set.iter().map(|s| split_kv(s)).collect::<Result<_>>()?;
    overrides.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
    for (k, v) in &overrides {
        settings.apply(k, v)?;
    }
    let cfg = settings.train_config(seed)?;

    let ds = manifest.load_dataset()?;
    let split = one_class_split(&ds, settings.train_fraction, seed)?;
    let out = train(split.train.features.view(), &cfg)?;
    let projected = out.encoder.forward(split.train.features.view())?;

    fs::create_dir_all(&a.out)?;
    let ck = Checkpoint { config: cfg, encoder: out.encoder, decoder: out.decoder, projected_train: Some(projected) };
    fs::write(a.out.join("checkpoint.txt"), ck.to_text())?;
    out.report.write_csv(fs::File::create(a.out.join("report.csv"))?)?;
    split.train.write_csv(fs::File::create(a.out.join("train.csv"))?)?;
    split.test.write_csv(fs::File::create(a.out.join("test.csv"))?)?;
    fs::write(
        a.out.join("score.conf"),
        format!("k={}\nthreshold_quantile={}\nseed={seed}\n", settings.k, settings.threshold_quantile),
    )?;

    let last = out.report.last().ok_or_else(|| usage("training ran no epochs"))?;
    println!("epochs={}", last.epoch + 1);
    println!("term1={}", last.term1);
    println!("term2={}", last.term2);
    println!("total={}", last.total);
    println!("train_rows={}", split.train.len());
    println!("test_rows={}", split.test.len());
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_text(&read_text(path)?)
}

/// Mode and quantile from flags, then the config file, then defaults.
fn resolve_mode(m: &ModeArgs) -> Result<(ScoreMode, f64)> {
    let (mut k, mut p) = (None, None);
    if let Some(path) = &m.config {
        for (key, v) in read_kv(path)? {
            match key.as_str() {
                "k" => k = Some(v.parse().map_err(|_| usage(format!("bad k {v:?}")))?),
                "threshold_quantile" => p = Some(v.parse().map_err(|_| usage(format!("bad threshold_quantile {v:?}")))?),
                _ => {}
            }
        }
    }
    let k = m.k.or(k).unwrap_or(3);
    let mode = match m.mode.as_deref() {
        None | Some("soft") => ScoreMode::Soft { k },
        Some(text) => match text.parse()? {
            ScoreMode::Hard if m.k.is_some() => return Err(usage("--k only applies to soft scores")),
            ScoreMode::Soft { k: mk } if m.k.is_some_and(|fk| fk != mk) => return Err(usage("--mode soft:K and --k disagree")),
            mode => mode,
        },
    };
    Ok((mode, m.quantile.or(p).unwrap_or(DEFAULT_THRESHOLD_QUANTILE)))
}

fn cmd_score(a: ScoreArgs) -> Result<()> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let data = read_points(&a.data)?;
    let (mode, p) = resolve_mode(&a.mode)?;
    let projected = ck.projected_train.ok_or_else(|| usage("checkpoint has no projected training rows"))?;
    let mut model = ScoreModel::new(ck.encoder, ck.config.target, projected, mode)?;
    let threshold = model.calibrate(p)?;
    let c = model.classify(data.features.view())?;
    c.write_csv(output(a.out.as_deref())?)?;
    eprintln!("threshold={threshold} abnormal={} of {}", c.abnormal_count(), c.labels.len());
    Ok(())
}

fn read_scores(path: &Path) -> Result<(Vec<f64>, Vec<Label>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| usage(format!("{} has no {name} column", path.display())));
    let (si, pi) = (col("raw_score")?, col("predicted_label")?);
    let (mut scores, mut preds) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        scores.push(rec[si].parse::<f64>().map_err(|_| RgpError::Parse(format!("bad score {:?}", &rec[si])))?);
        preds.push(rec[pi].parse::<Label>()?);
    }
    Ok((scores, preds))
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let (scores, preds) = read_scores(&a.scores)?;
    let labels = read_points(&a.labels)?.labels.ok_or_else(|| usage(format!("{} has no label column", a.labels.display())))?;
    let positive = if a.positive_normal { PositiveClass::Normal } else { PositiveClass::Abnormal };
    let mut r = f1_with(&preds, &labels, positive)?;
    r.auc = match auc(&scores, &labels) {
        Ok(v) => Some(v),
        Err(RgpError::InvalidArgument(_)) => None,
        Err(e) => return Err(e),
    };
    print!("{}", r.to_report());
    Ok(())
}

fn cmd_project(a: ProjectArgs) -> Result<()> {
    let ck = load_checkpoint(&a.checkpoint)?;
    if ck.config.target.dim() != 2 {
        return Err(usage("projection export requires latent dim 2"));
    }
    let mut rows: Vec<(f64, f64, String)> = Vec::new();
    if let Some(p) = &ck.projected_train {
        rows.extend(p.rows().into_iter().map(|r| (r[0], r[1], "train".to_string())));
    }
    if let Some(path) = &a.data {
        let ds = read_points(path)?;
        let z = ck.encoder.forward(ds.features.view())?;
        for (i, r) in z.rows().into_iter().enumerate() {
            let tag = ds.labels.as_ref().map_or("test", |l| l[i].as_str());
            rows.push((r[0], r[1], tag.to_string()));
        }
    }
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "z0,z1,split_tag")?;
    for (x, y, tag) in rows {
        writeln!(out, "{x:e},{y:e},{tag}")?;
    }
    out.flush()?;
    Ok(())
}

fn points(path: &Path) -> Result<Array2<f64>> {
    Ok(read_points(path)?.features)
}

fn cmd_diag(a: DiagArgs) -> Result<()> {
    if let Some(files) = &a.mmd {
        let (x, y) = (points(&files[0])?, points(&files[1])?);
        let kernel = match a.gamma {
            Some(g) => KernelConfig::new(g)?,
            None => auto_gamma(x.view())?,
        };
        println!("mmd2={:e}", mmd2_unbiased(x.view(), y.view(), &kernel)?);
        println!("gamma={:e}", kernel.gamma());
    } else if let Some(files) = &a.sinkhorn {
        let (x, y) = (points(&files[0])?, points(&files[1])?);
        let eps = a.epsilon.unwrap_or(DEFAULT_SINKHORN_EPSILON);
        let c = cost_matrix(x.view(), y.view())?;
        let (ua, ub) = (uniform_marginal(x.nrows()), uniform_marginal(y.nrows()));
        let t = sinkhorn(c.view(), ua.view(), ub.view(), eps, DEFAULT_SINKHORN_MAX_ITER, DEFAULT_SINKHORN_TOL)?;
        println!("cost={:e}", t.cost);
        println!("regularized_cost={:e}", t.regularized_cost(eps));
        println!("iterations={}", t.iterations);
        println!("converged={}", t.converged);
    }
    Ok(())
}
