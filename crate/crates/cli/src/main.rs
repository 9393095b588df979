use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mlpdm::data::{load_bin, load_emnist_pooled, load_idx, save_bin, stratified_split, Dataset, SplitSpec};
use mlpdm::harness::{
    conv_mult_count, conv_out_dim, evaluate, flop_count, grid_search_with, overfit_report, pipeline, write_results_csv,
    ExperimentConfig, Grid, Splits,
};
use mlpdm::harness::pipeline::project;
use mlpdm::harness::report::fmt_value;
use mlpdm::nn::Network;
use mlpdm::pca::{CovarianceEigen, PcaModel};
use mlpdm::prune::{
    prune_by_mean_distance, prune_by_reconstruction_rmse, sorted_score_curve, PruneMethod, PruneReport,
};

#[derive(Parser)]
#[command(name = "mlpdm", version, about = "Train and analyse MLPs on Balanced EMNIST")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert IDX files into normalised, split EMDS datasets
    Ingest(IngestArgs),
    /// Train one configuration (with its optional prune and PCA stages)
    Train(TrainArgs),
    /// Run a grid search over configuration fields
    Grid(GridArgs),
    /// Fit PCA on a training set and project all splits
    Pca(PcaArgs),
    /// Prune a training set and report per-sample scores
    Prune(PruneArgs),
    /// Count forward multiplications
    Flops(FlopsArgs),
    /// Evaluate a saved model on a dataset
    Eval(EvalArgs),
}

/// One flag per configuration field; each overrides the config file.
#[derive(Args, Default)]
struct ConfigArgs {
    /// Configuration file of `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    /// Comma-separated layer widths, input first
    #[arg(long)]
    architecture: Option<String>,
    #[arg(long)]
    activation: Option<String>,
    /// Comma-separated keep probabilities per hidden layer, or `none`
    #[arg(long)]
    dropout_keep: Option<String>,
    /// none, l1 or l2
    #[arg(long)]
    penalty: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    /// sgd or adam
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    /// Component count, or `none`
    #[arg(long)]
    pca_components: Option<String>,
    /// none, mean-distance or reconstruction-rmse
    #[arg(long)]
    prune: Option<String>,
    #[arg(long)]
    prune_keep: Option<String>,
    #[arg(long)]
    prune_chain: Option<String>,
    #[arg(long)]
    chain_keep: Option<String>,
    /// Early-stopping patience in epochs, or `none`
    #[arg(long)]
    patience: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        let overrides = [
            ("seed", &self.seed),
            ("architecture", &self.architecture),
            ("activation", &self.activation),
            ("dropout_keep", &self.dropout_keep),
            ("penalty", &self.penalty),
            ("lambda", &self.lambda),
            ("optimizer", &self.optimizer),
            ("learning_rate", &self.learning_rate),
            ("epochs", &self.epochs),
            ("batch_size", &self.batch_size),
            ("prune_keep", &self.prune_keep),
            ("prune_chain", &self.prune_chain),
            ("chain_keep", &self.chain_keep),
            ("prune", &self.prune),
            ("pca_components", &self.pca_components),
            ("patience", &self.patience),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v).with_context(|| format!("--{}", key.replace('_', "-")))?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct IngestArgs {
    /// Directory holding the four uncompressed Balanced EMNIST IDX files
    #[arg(long, conflicts_with_all = ["images", "labels"])]
    emnist_dir: Option<PathBuf>,
    /// A single IDX image file (used instead of --emnist-dir)
    #[arg(long, requires = "labels")]
    images: Option<PathBuf>,
    #[arg(long, requires = "images")]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 100_000)]
    train_count: usize,
    #[arg(long, default_value_t = 15_800)]
    valid_count: usize,
    #[arg(long, default_value_t = 15_800)]
    test_count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Directory with train.emds, valid.emds and test.emds
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Grid file with `key = v1 | v2 | ...` lines
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PcaArgs {
    /// Directory with train.emds, valid.emds and test.emds
    #[arg(long)]
    data_dir: PathBuf,
    /// Number of components to keep
    #[arg(long, default_value_t = 78)]
    components: usize,
    /// Pick the smallest count reaching this cumulative variance ratio instead
    #[arg(long)]
    variance: Option<f64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PruneArgs {
    /// Training set to prune (EMDS)
    #[arg(long)]
    data: PathBuf,
    /// mean-distance or reconstruction-rmse
    #[arg(long, default_value = "mean-distance")]
    method: String,
    /// Samples kept per class
    #[arg(long, default_value_t = 2000)]
    keep: usize,
    /// Components of the PCA used for reconstruction scores
    #[arg(long, default_value_t = 78)]
    components: usize,
    /// Mean-distance pruning to this many per class before the chosen method
    #[arg(long)]
    chain_keep: Option<usize>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct FlopsArgs {
    /// Comma-separated layer widths
    #[arg(long)]
    architecture: Option<String>,
    /// Square input size of a convolution layer
    #[arg(long)]
    conv_input: Option<usize>,
    #[arg(long, default_value_t = 7)]
    conv_filter: usize,
    #[arg(long, default_value_t = 3)]
    conv_padding: usize,
    #[arg(long, default_value_t = 2)]
    conv_stride: usize,
    #[arg(long, default_value_t = 1)]
    conv_channels: usize,
    #[arg(long, default_value_t = 64)]
    conv_filters: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Dataset to score (EMDS)
    #[arg(long)]
    data: PathBuf,
    /// PCA model applied to the data before the network
    #[arg(long)]
    pca: Option<PathBuf>,
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn ingest(args: IngestArgs) -> Result<()> {
    let raw = match (&args.emnist_dir, &args.images, &args.labels) {
        (Some(dir), _, _) => load_emnist_pooled(dir)?,
        (None, Some(img), Some(lbl)) => load_idx(img, lbl)?,
        _ => bail!("pass --emnist-dir or both --images and --labels"),
    };
    let full = raw.normalize()?;
    let spec = SplitSpec {
        train_count: args.train_count,
        valid_count: args.valid_count,
        test_count: args.test_count,
        seed: args.seed,
    };
    let (train, valid, test) = stratified_split(&full, &spec)?;
    let splits = Splits { train, valid, test };
    splits.save(&args.out_dir)?;
    let counts = splits.train.class_counts();
    let present: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
    println!(
        "ingested {} samples: train {} valid {} test {} (train per class {}..={})",
        full.len(),
        splits.train.len(),
        splits.valid.len(),
        splits.test.len(),
        present.iter().min().unwrap_or(&0),
        present.iter().max().unwrap_or(&0)
    );
    Ok(())
}

fn train_cmd(args: TrainArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let splits = Splits::load(&args.data_dir)?;
    let out = pipeline(&cfg, &splits, Some(&args.out_dir))?;
    let r = &out.trained.result;
    println!("status: {:?}", r.status);
    println!("training samples: {}", out.train_set.len());
    println!("best valid acc: {} (epoch {})", fmt_value(r.best_valid_acc), r.best_epoch);
    if let Some(last) = r.final_metrics() {
        println!(
            "final: train loss {} acc {}, valid loss {} acc {}",
            fmt_value(last.train_loss),
            fmt_value(last.train_acc),
            fmt_value(last.valid_loss),
            fmt_value(last.valid_acc)
        );
        let secs: f64 = r.history.iter().map(|m| m.epoch_seconds).sum();
        println!("mean epoch seconds: {:.3}", secs / r.history.len() as f64);
    }
    if r.history.len() >= 2 {
        let o = overfit_report(&r.history)?;
        println!(
            "min valid loss at epoch {}, rebound {:.4}, final gap {:.4}",
            o.min_valid_loss_epoch, o.valid_loss_rebound, o.final_generalization_gap
        );
    }
    println!(
        "test: loss {} acc {}",
        fmt_value(r.test_loss.unwrap_or(f64::NAN)),
        fmt_value(r.test_acc.unwrap_or(f64::NAN))
    );
    println!("artifacts in {}", args.out_dir.display());
    Ok(())
}

fn grid_cmd(args: GridArgs) -> Result<()> {
    let base = args.config.resolve()?;
    let grid = Grid::parse(&fs::read_to_string(&args.grid).with_context(|| format!("reading {}", args.grid.display()))?)?;
    let splits = Splits::load(&args.data_dir)?;
    let results = grid_search_with(&base, &grid, |cfg| pipeline(cfg, &splits, None).map(|o| o.trained.result))?;
    fs::create_dir_all(&args.out_dir)?;
    let path = args.out_dir.join("results.csv");
    write_results_csv(BufWriter::new(File::create(&path)?), &grid, &results)?;
    println!("{} runs, results in {}", results.len(), path.display());
    Ok(())
}

fn pca_cmd(args: PcaArgs) -> Result<()> {
    let splits = Splits::load(&args.data_dir)?;
    let eig = CovarianceEigen::fit(&splits.train.features)?;
    let k = match args.variance {
        Some(t) => eig.spectrum.choose_k(t)?,
        None => args.components,
    };
    let model = eig.model(k)?;
    fs::create_dir_all(&args.out_dir)?;
    let cum = eig.spectrum.cumulative_evr();
    let total = eig.spectrum.total();
    write_file(&args.out_dir.join("cumulative_evr.csv"), |w| {
        writeln!(w, "component,eigenvalue,evr,cumulative_evr")?;
        for (i, (v, c)) in eig.spectrum.values().iter().zip(&cum).enumerate() {
            let evr = if total > 0.0 { v / total } else { 0.0 };
            writeln!(w, "{},{},{},{}", i + 1, fmt_value(*v), fmt_value(evr), fmt_value(*c))?;
        }
        Ok(())
    })?;
    model.save(args.out_dir.join("pca.pcam"))?;
    let projected = Splits {
        train: project(&model, &splits.train)?,
        valid: project(&model, &splits.valid)?,
        test: project(&model, &splits.test)?,
    };
    projected.save(&args.out_dir)?;
    println!("{k} components capture {:.4} of the variance", cum[k - 1]);
    Ok(())
}

fn prune_cmd(args: PruneArgs) -> Result<()> {
    let method: PruneMethod = args.method.parse()?;
    let mut data = load_bin(&args.data)?;
    fs::create_dir_all(&args.out_dir)?;
    let mut reports: Vec<PruneReport> = Vec::new();
    if let Some(chain) = args.chain_keep {
        let r = prune_by_mean_distance(&data.features, &data.labels, chain)?;
        data = data.subset(&r.kept, data.name.clone());
        reports.push(r);
    }
    let report = match method {
        PruneMethod::MeanDistance => prune_by_mean_distance(&data.features, &data.labels, args.keep)?,
        PruneMethod::ReconstructionRmse => {
            let model = PcaModel::fit(&data.features, args.components)?;
            prune_by_reconstruction_rmse(&data.features, &data.labels, &model, args.keep)?
        }
    };
    let pruned: Dataset = data.subset(&report.kept, format!("{}-pruned", data.name));
    reports.push(report);
    for (i, r) in reports.iter().enumerate() {
        let stem = if i + 1 == reports.len() { "prune".to_string() } else { format!("prune-stage{}", i + 1) };
        write_file(&args.out_dir.join(format!("{stem}.csv")), |w| r.write_csv(w))?;
        let curves = sorted_score_curve(r);
        write_file(&args.out_dir.join(format!("{stem}-curve.csv")), |w| {
            writeln!(w, "rank,average")?;
            for (rank, v) in curves.average.iter().enumerate() {
                writeln!(w, "{rank},{}", fmt_value(*v))?;
            }
            Ok(())
        })?;
    }
    save_bin(&pruned, args.out_dir.join("pruned.emds"))?;
    println!("kept {} of {} samples ({method})", pruned.len(), data.len());
    Ok(())
}

fn flops_cmd(args: FlopsArgs) -> Result<()> {
    if args.architecture.is_none() && args.conv_input.is_none() {
        bail!("pass --architecture and/or --conv-input");
    }
    if let Some(a) = &args.architecture {
        let widths = a
            .split(',')
            .map(|w| w.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .context("--architecture must be comma-separated integers")?;
        println!("dense multiplications: {}", flop_count(&widths)?);
    }
    if let Some(i) = args.conv_input {
        let out = conv_out_dim(i, args.conv_filter, args.conv_padding, args.conv_stride)?;
        let mults = conv_mult_count(
            i,
            args.conv_filter,
            args.conv_padding,
            args.conv_stride,
            args.conv_channels,
            args.conv_filters,
        )?;
        println!("conv output: {out}x{out}");
        println!("conv multiplications: {mults}");
    }
    Ok(())
}

fn eval_cmd(args: EvalArgs) -> Result<()> {
    let network = Network::load(&args.model)?;
    let mut data = load_bin(&args.data)?;
    if let Some(p) = &args.pca {
        data = project(&PcaModel::load(p)?, &data)?;
    }
    let (loss, acc) = evaluate(&network, &data)?;
    println!("samples: {}", data.len());
    println!("loss: {}", fmt_value(loss));
    println!("accuracy: {}", fmt_value(acc));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Train(a) => train_cmd(a),
        Command::Grid(a) => grid_cmd(a),
        Command::Pca(a) => pca_cmd(a),
        Command::Prune(a) => prune_cmd(a),
        Command::Flops(a) => flops_cmd(a),
        Command::Eval(a) => eval_cmd(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
