//! The `tsa` command-line tool: data preparation, training, weight
//! estimation, posterior inspection, nearest-neighbour evaluation, filter
//! export and the DFT consistency check.

pub mod dft;
pub mod export;
pub mod knn;

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tsa_core::circular::{gvm_log_pdf, vm_log_pdf};
use tsa_core::data::{
    build_rotated_mnist, gen_patch_pairs, in_disk, load_dataset, load_idx_images, load_idx_labels, load_model,
    rotate_image, save_dataset, save_model, Dataset, Image, LabeledSet, Model, PairBatch,
};
use tsa_core::inference::{map_coupled, posterior_coupled, posterior_maximal};
use tsa_core::learning::{estimate_weights, sgd_train_from, train_log_csv, TrainConfig, WeightEstimate};

use knn::{KnnReport, Metric};

/// Invalid flag combination; reported like a parse error (exit code 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(name = "tsa", version, about = "Toroidal subgroup analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate rotated noise-patch pairs or a rotated-MNIST set.
    MakeData(MakeDataArgs),
    /// Learn a basis by SGD on the marginal likelihood of pairs.
    Train(TrainArgs),
    /// Estimate integer weights by infinitesimal image rotation.
    EstimateWeights(EstimateWeightsArgs),
    /// Dump the posterior over the transformation relating two vectors.
    Infer(InferArgs),
    /// One-nearest-neighbour error rates under several metrics.
    KnnEval(KnnEvalArgs),
    /// Render the learned filters as a PGM grid sorted by |ω|.
    ExportFilters(ExportFiltersArgs),
    /// Compare sinusoid-basis posteriors with a directly computed DFT.
    DftCheck(DftCheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataKind {
    Patches,
    MnistRot,
}

#[derive(Debug, Args)]
pub struct MakeDataArgs {
    #[arg(long, value_enum)]
    pub kind: DataKind,
    /// Number of pairs, or of digits (default: all after --skip).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 16)]
    pub side: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub mnist_images: Option<PathBuf>,
    #[arg(long)]
    pub mnist_labels: Option<PathBuf>,
    /// Leading digits to skip, for disjoint train/test splits of one file.
    #[arg(long, default_value_t = 0)]
    pub skip: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Pair dataset produced by make-data.
    #[arg(long)]
    pub data: PathBuf,
    /// Number of filters (columns of W); twice the number of subspaces.
    #[arg(long, default_value_t = 100)]
    pub filters: usize,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.25)]
    pub alpha0: f64,
    #[arg(long, default_value_t = 100)]
    pub minibatch: usize,
    #[arg(long, default_value_t = 1)]
    pub passes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Training log (default: <out>.log.csv).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Continue from this model instead of a random basis.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Passes already completed by --init (sets the learning-rate counter).
    #[arg(long, default_value_t = 0)]
    pub start_pass: usize,
    /// Held-out pairs evaluated at checkpoints.
    #[arg(long)]
    pub eval: Option<PathBuf>,
    /// Checkpoint log (default: <out>.eval.csv).
    #[arg(long)]
    pub eval_log: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub checkpoint_every: usize,
    /// Verify the analytic gradient against central differences first.
    #[arg(long)]
    pub check_gradient: bool,
}

#[derive(Debug, Args)]
pub struct EstimateWeightsArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Output model (default: overwrite --model).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Rotation step in degrees.
    #[arg(long, default_value_t = 0.1)]
    pub delta_deg: f64,
    /// Number of noise patches in the estimation batch.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InferMode {
    Maximal,
    Coupled,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Vector as a file of numbers or an inline comma-separated list.
    #[arg(long)]
    pub x: String,
    #[arg(long)]
    pub y: String,
    #[arg(long, value_enum, default_value_t = InferMode::Coupled)]
    pub mode: InferMode,
    #[arg(long, default_value_t = 360)]
    pub grid: usize,
    /// Density CSV (default: stdout, with the summary on stderr).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KnnEvalArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Comma-separated metrics (default: all that the inputs allow).
    #[arg(long, value_delimiter = ',')]
    pub metric: Vec<Metric>,
    /// Evaluate only the first N test items.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Never match test item i with training item i.
    #[arg(long)]
    pub exclude_self: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportFiltersArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DftCheckArgs {
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 10)]
    pub signals: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Check this comma-separated signal instead of random ones.
    #[arg(long)]
    pub signal: Option<String>,
}

/// Execute a parsed command, writing reports to `out` and notes to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::MakeData(a) => make_data(&a, out),
        Command::Train(a) => train(&a, out),
        Command::EstimateWeights(a) => cmd_estimate_weights(&a, out),
        Command::Infer(a) => infer(&a, out, err),
        Command::KnnEval(a) => knn_eval(&a, out, err),
        Command::ExportFilters(a) => export_filters(&a, out),
        Command::DftCheck(a) => dft_check(&a, out),
    }
}

/// Parse `args` (without the program name) and run.
pub fn run_args<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(std::iter::once("tsa".into()).chain(args.into_iter().map(Into::into)))
        .map_err(|e| usage(e.to_string()))?;
    run(cli, out, err)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_pairs(path: &Path) -> Result<PairBatch> {
    match load_dataset(path).with_context(|| format!("loading {}", path.display()))? {
        Dataset::Pairs(b) => Ok(b),
        Dataset::Labeled(_) => bail!("{} holds labeled images, not pairs", path.display()),
    }
}

fn load_labeled(path: &Path) -> Result<LabeledSet> {
    match load_dataset(path).with_context(|| format!("loading {}", path.display()))? {
        Dataset::Labeled(s) => Ok(s),
        Dataset::Pairs(_) => bail!("{} holds pairs, not labeled images", path.display()),
    }
}

fn load_model_at(path: &Path) -> Result<Model> {
    load_model(path).with_context(|| format!("loading model {}", path.display()))
}

fn make_data(a: &MakeDataArgs, out: &mut dyn Write) -> Result<()> {
    match a.kind {
        DataKind::Patches => {
            let n = a.n.ok_or_else(|| usage("--kind patches requires --n"))?;
            let batch = gen_patch_pairs(a.seed, n, a.side)?;
            save_dataset(&Dataset::Pairs(batch), &a.out)?;
            writeln!(out, "wrote {n} pairs of {0}x{0} patches to {1}", a.side, a.out.display())?;
        }
        DataKind::MnistRot => {
            let images = a
                .mnist_images
                .as_ref()
                .ok_or_else(|| usage("--kind mnist-rot requires --mnist-images"))?;
            let labels = a
                .mnist_labels
                .as_ref()
                .ok_or_else(|| usage("--kind mnist-rot requires --mnist-labels"))?;
            let mut images = load_idx_images(images)?;
            let mut labels = load_idx_labels(labels)?;
            if images.count != labels.len() {
                bail!("{} images but {} labels", images.count, labels.len());
            }
            let start = a.skip.min(images.count);
            let n = a.n.unwrap_or(images.count - start).min(images.count - start);
            let size = images.rows * images.cols;
            images.pixels = images.pixels[start * size..(start + n) * size].to_vec();
            images.count = n;
            labels = labels[start..start + n].to_vec();
            let set = build_rotated_mnist(&images, &labels, a.seed, a.side)?;
            save_dataset(&Dataset::Labeled(set), &a.out)?;
            writeln!(out, "wrote {n} rotated digits at {0}x{0} to {1}", a.side, a.out.display())?;
        }
    }
    Ok(())
}

fn train(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    if a.filters == 0 || a.filters % 2 != 0 {
        return Err(usage(format!("--filters must be a positive even number, got {}", a.filters)));
    }
    let data = load_pairs(&a.data)?;
    let eval = a.eval.as_deref().map(load_pairs).transpose()?;
    let init = a.init.as_deref().map(load_model_at).transpose()?.map(|m| m.basis);
    let config = TrainConfig {
        alpha0: a.alpha0,
        minibatch: a.minibatch,
        passes: a.passes,
        start_pass: a.start_pass,
        sigma: a.sigma,
        seed: a.seed,
        n_subspaces: a.filters / 2,
        check_gradient: a.check_gradient,
        checkpoint_every: a.checkpoint_every,
    };
    let outcome = sgd_train_from(&config, &data, init, eval.as_ref())?;
    if let Some(rel) = outcome.gradient_check {
        writeln!(out, "gradient check: max relative deviation {rel:e}")?;
        if rel >= 1e-5 {
            bail!("analytic gradient disagrees with finite differences ({rel:e})");
        }
    }
    let log_path = a.log.clone().unwrap_or_else(|| with_suffix(&a.out, ".log.csv"));
    write_file(&log_path, train_log_csv(&outcome.log).as_bytes())?;
    if eval.is_some() {
        let mut csv = String::from("step,mean_log_marginal\n");
        for c in &outcome.checkpoints {
            let _ = writeln!(csv, "{},{}", c.step, c.mean_log_marginal);
        }
        let path = a.eval_log.clone().unwrap_or_else(|| with_suffix(&a.out, ".eval.csv"));
        write_file(&path, csv.as_bytes())?;
    }
    save_model(&Model::with_uniform_prior(outcome.basis), &a.out)?;
    if let Some(last) = outcome.log.last() {
        writeln!(
            out,
            "trained {} steps; last minibatch mean log marginal {}",
            last.step, last.mean_log_marginal
        )?;
    }
    Ok(())
}

/// Standard-normal probe patches for weight estimation, zeroed outside the
/// inscribed disk so that a rotation by 0 reproduces them exactly.
pub fn weight_probe_batch(side: usize, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let mut xs = gen_patch_pairs(seed, n, side)?.x;
    for mut col in xs.column_iter_mut() {
        for r in 0..side {
            for c in 0..side {
                if !in_disk(side, r, c) {
                    col[r * side + c] = 0.0;
                }
            }
        }
    }
    Ok(xs)
}

fn image_side(dim: usize) -> Result<usize> {
    let side = (dim as f64).sqrt().round() as usize;
    if side * side != dim {
        bail!("model dimension {dim} is not a square image");
    }
    Ok(side)
}

/// Weight estimate of an image model under raster rotation.
pub fn estimate_image_weights(model: &Model, delta: f64, n: usize, seed: u64) -> Result<WeightEstimate> {
    let side = image_side(model.basis.dim())?;
    let xs = weight_probe_batch(side, n, seed)?;
    let rotate = |x: &[f64], a: f64| {
        let img = Image::square(side, x.to_vec()).expect("square probe");
        rotate_image(&img, a).expect("square probe").into_data()
    };
    Ok(estimate_weights(&model.basis, &xs, rotate, delta)?)
}

pub fn weight_table_csv(est: &WeightEstimate) -> String {
    let mut csv = String::from("subspace,omega,rate,precision,low_confidence\n");
    for j in export::order_by_abs_weight(&est.omega) {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            j, est.omega[j], est.rate[j], est.precision[j], est.low_confidence[j]
        );
    }
    csv
}

fn cmd_estimate_weights(a: &EstimateWeightsArgs, out: &mut dyn Write) -> Result<()> {
    if !(a.delta_deg > 0.0) {
        return Err(usage("--delta-deg must be positive"));
    }
    let model = load_model_at(&a.model)?;
    let est = estimate_image_weights(&model, a.delta_deg.to_radians(), a.n, a.seed)?;
    out.write_all(weight_table_csv(&est).as_bytes())?;
    let flagged = est.low_confidence.iter().filter(|&&f| f).count();
    if flagged > 0 {
        writeln!(out, "# {flagged} low-confidence subspaces (weight 0)")?;
    }
    let basis = model.basis.with_omega(est.omega)?;
    let updated = Model::new(basis, model.prior)?;
    save_model(&updated, a.out.as_ref().unwrap_or(&a.model))?;
    Ok(())
}

/// Numbers from a file, or an inline comma-separated list.
pub fn parse_vector(spec: &str) -> Result<Vec<f64>> {
    let text = if Path::new(spec).is_file() {
        std::fs::read_to_string(spec).with_context(|| format!("reading {spec}"))?
    } else {
        spec.to_string()
    };
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("'{t}' is not a number")))
        .collect()
}

fn infer(a: &InferArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    if a.grid == 0 {
        return Err(usage("--grid must be positive"));
    }
    let model = load_model_at(&a.model)?;
    let x = parse_vector(&a.x)?;
    let y = parse_vector(&a.y)?;
    let h = TAU / a.grid as f64;
    let mut csv = String::new();
    let mut summary = String::new();
    match a.mode {
        InferMode::Maximal => {
            let post = posterior_maximal(&model.basis, &x, &y, &model.prior.maximal)?;
            csv.push_str("subspace,angle,density\n");
            for (j, eta) in post.eta.iter().enumerate() {
                for i in 0..a.grid {
                    let s = h * i as f64;
                    let _ = writeln!(csv, "{j},{s},{}", vm_log_pdf(s, eta).exp());
                }
                let _ = writeln!(summary, "subspace={j} mean={} precision={}", eta.mu(), eta.kappa());
            }
        }
        InferMode::Coupled => {
            let post = posterior_coupled(&model.basis, &x, &y, &model.prior.coupled)?;
            csv.push_str("angle,density\n");
            let (mut c, mut s_acc) = (0.0, 0.0);
            for i in 0..a.grid {
                let s = h * i as f64;
                let p = gvm_log_pdf(s, &post.gvm).exp();
                c += h * p * s.cos();
                s_acc += h * p * s.sin();
                let _ = writeln!(csv, "{s},{p}");
            }
            let map = map_coupled(&post).value();
            let mean = tsa_core::toral::wrap_angle(s_acc.atan2(c));
            let _ = writeln!(
                summary,
                "map={map} mean={mean} resultant_length={}",
                c.hypot(s_acc)
            );
        }
    }
    match &a.out {
        Some(path) => {
            write_file(path, csv.as_bytes())?;
            out.write_all(summary.as_bytes())?;
        }
        None => {
            out.write_all(csv.as_bytes())?;
            err.write_all(summary.as_bytes())?;
        }
    }
    Ok(())
}

fn knn_eval(a: &KnnEvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let model = a.model.as_deref().map(load_model_at).transpose()?;
    let metrics: Vec<Metric> = if a.metric.is_empty() {
        Metric::ALL
            .into_iter()
            .filter(|m| model.is_some() || !m.needs_model())
            .collect()
    } else {
        a.metric.clone()
    };
    if let Some(m) = metrics.iter().find(|m| m.needs_model() && model.is_none()) {
        return Err(usage(format!("metric {m} requires --model")));
    }
    let train = load_labeled(&a.train)?;
    let mut test = load_labeled(&a.test)?;
    if let Some(limit) = a.limit {
        if limit > test.len() {
            writeln!(err, "warning: --limit {limit} exceeds the {} test items; using all", test.len())?;
        }
        test = test.slice(0, limit);
    }
    let basis = model.as_ref().map(|m| &m.basis);
    let reports = metrics
        .iter()
        .map(|&m| knn::evaluate(m, basis, &train, &test, a.exclude_self))
        .collect::<Result<Vec<KnnReport>, _>>()?;
    let csv = knn::reports_csv(&reports);
    match &a.out {
        Some(path) => write_file(path, csv.as_bytes()),
        None => Ok(out.write_all(csv.as_bytes())?),
    }
}

fn export_filters(a: &ExportFiltersArgs, out: &mut dyn Write) -> Result<()> {
    let model = load_model_at(&a.model)?;
    let pgm = export::render_filters_pgm(&model.basis).map_err(anyhow::Error::msg)?;
    write_file(&a.out, &pgm)?;
    writeln!(out, "wrote {} filters to {}", model.basis.w().ncols(), a.out.display())?;
    Ok(())
}

fn dft_check(a: &DftCheckArgs, out: &mut dyn Write) -> Result<()> {
    let signals: Vec<Vec<f64>> = match &a.signal {
        Some(spec) => vec![parse_vector(spec)?],
        None => {
            if a.dim < 3 {
                return Err(usage("--dim must be at least 3"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            (0..a.signals)
                .map(|_| (0..a.dim).map(|_| StandardNormal.sample(&mut rng)).collect())
                .collect()
        }
    };
    let (mut dk, mut dm) = (0.0f64, 0.0f64);
    for x in &signals {
        let (k, m) = dft::max_deviation(x, 1e-9)?;
        dk = dk.max(k);
        dm = dm.max(m);
    }
    let dim = signals.first().map_or(a.dim, Vec::len);
    writeln!(out, "dim,signals,max_modulus_deviation,max_phase_deviation")?;
    writeln!(out, "{dim},{},{dk:e},{dm:e}", signals.len())?;
    Ok(())
}
