//! Command-line driver: fit embeddings, evaluate zero-shot accuracy, search
//! fusion weights, sweep the embedding dimension, generate synthetic data
//! and time the pipeline.

mod config;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context as _};
use clap::{Parser, Subcommand};
use mbfa::embedding::whitened_gram;
use mbfa::io::fmt_f64;
use mbfa::pipeline::training_views;
use mbfa::{
    benchmark, generate_synthetic, grid_search_weights, save_dataset, sweep_dimension, train, EmbeddingModel,
    FusionWeights, Method, SyntheticSpec, ViewSpec, ZslDataset, ZslModel,
};

use crate::config::{RunArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "mbfa", version, about = "Multi-view embeddings for zero-shot classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit an embedding on the seen classes and write model.json.
    Fit(RunArgs),
    /// Classify the unseen instances; writes report.json and confusion.csv.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Use a fitted model instead of fitting a new one.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Search fusion weights on held-out seen classes.
    GridSearch(RunArgs),
    /// Accuracy for several embedding dimensions; writes sweep.csv.
    SweepD {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        d_list: Vec<usize>,
    },
    /// Generate a synthetic dataset (manifest.json plus CSV files).
    Synth(SynthArgs),
    /// Time fitting and per-image inference.
    Bench(RunArgs),
}

#[derive(Debug, clap::Args)]
struct SynthArgs {
    /// Full generator spec as JSON; overrides the other flags.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    latent_dim: usize,
    #[arg(long, default_value_t = 12)]
    classes: usize,
    #[arg(long, default_value_t = 30)]
    instances: usize,
    #[arg(long, default_value_t = 4)]
    unseen: usize,
    /// Noise level for the latent instances and every view.
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    /// Visual dimension followed by each side-information dimension.
    #[arg(long, value_delimiter = ',', default_value = "20,10,12")]
    view_dims: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "synthetic")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Fit(args) => cmd_fit(args),
        Command::Evaluate { run, model } => cmd_evaluate(run, model),
        Command::GridSearch(args) => cmd_grid_search(args),
        Command::SweepD { run, d_list } => cmd_sweep_d(run, d_list),
        Command::Synth(args) => cmd_synth(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn write_json(path: PathBuf, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn list(values: &[f64]) -> String {
    values.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(",")
}

fn fit_and_log(config: &RunConfig, dataset: &ZslDataset) -> anyhow::Result<ZslModel> {
    let opts = config.train_options()?;
    let start = Instant::now();
    let zsl = train(dataset, &config.selection, &opts)?;
    let elapsed = start.elapsed().as_secs_f64();

    let model = &zsl.model;
    let views = training_views(dataset, &config.selection, &dataset.instances_of(dataset.seen()))?;
    println!(
        "fitted {} d={} views={:?} ({})",
        model.method,
        model.d,
        model.view_dims,
        model.view_names.join(", ")
    );
    println!("eigenvalues: {}", list(&model.eigenvalues));
    println!(
        "objective: {} (sum of eigenvalues {})",
        fmt_f64(model.objective_value(&views)?),
        fmt_f64(model.eigenvalues.iter().sum())
    );
    match model.method {
        Method::Mbfa => println!(
            "stacked orthonormality defect: {}",
            fmt_f64(model.stacked_orthonormality_defect())
        ),
        Method::Mcca => {
            let gram = whitened_gram(model, &views, config.reg)?;
            let defect = (0..gram.rows())
                .flat_map(|i| (0..gram.cols()).map(move |j| (i, j)))
                .map(|(i, j)| (gram.get(i, j) - if i == j { 1.0 } else { 0.0 }).abs())
                .fold(0.0, f64::max);
            println!("whitening defect |W'DW - I|: {}", fmt_f64(defect));
        }
    }
    println!(
        "per-view orthonormality defects: {}",
        list(&model.block_orthonormality_defects())
    );
    eprintln!("fit time: {elapsed:.3} s");
    Ok(zsl)
}

fn cmd_fit(args: RunArgs) -> anyhow::Result<()> {
    let (config, dataset) = RunConfig::resolve(args)?;
    let out = config.prepare_out()?;
    let zsl = fit_and_log(&config, &dataset)?;
    write_json(out.join("model.json"), &zsl.model)
}

/// Fixed weights, or the grid-search choice for validation split `repeat`.
fn weights_for(config: &RunConfig, dataset: &ZslDataset, repeat: usize) -> anyhow::Result<FusionWeights> {
    if let Some(w) = config.fixed_weights()? {
        return Ok(w);
    }
    let search = grid_search_weights(
        dataset,
        &config.selection,
        &config.train_options()?,
        &config.search_options(repeat),
    )?;
    Ok(search.weights)
}

fn cmd_evaluate(args: RunArgs, model_path: Option<PathBuf>) -> anyhow::Result<()> {
    let (mut config, dataset) = RunConfig::resolve(args)?;
    let zsl = match &model_path {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
            let model: EmbeddingModel =
                serde_json::from_str(&text).with_context(|| format!("parsing model {}", path.display()))?;
            config.d.get_or_insert(model.d);
            config.method = model.method;
            ZslModel::from_model(model, &dataset, &config.selection)
                .with_context(|| format!("model {} does not match the dataset", path.display()))?
        }
        None => {
            let zsl = fit_and_log(&config, &dataset)?;
            write_json(config.prepare_out()?.join("model.json"), &zsl.model)?;
            zsl
        }
    };
    let out = config.prepare_out()?;

    let mut first = None;
    let mut accuracies = Vec::with_capacity(config.repeats);
    for repeat in 0..config.repeats {
        let weights = weights_for(&config, &dataset, repeat)?;
        let start = Instant::now();
        let report = zsl.evaluate(&dataset, &weights)?;
        let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
        println!(
            "repeat {repeat}: weights {} accuracy {}",
            list(weights.alphas()),
            fmt_f64(report.mean_per_class_top1)
        );
        eprintln!(
            "repeat {repeat}: inference {:.6} ms per image",
            elapsed_ms / report.total() as f64
        );
        accuracies.push(report.mean_per_class_top1);
        first.get_or_insert(report);
    }
    let mut report = first.expect("at least one repeat");
    if config.repeats > 1 {
        report = report.with_repeats(accuracies)?;
    }
    println!("{}", report.summary());
    for (c, acc) in report.classes.iter().zip(&report.per_class_accuracy) {
        println!("  {}: {}", dataset.class_names()[*c], fmt_f64(*acc));
    }
    write_json(out.join("report.json"), &report)?;
    fs::write(out.join("confusion.csv"), report.confusion_csv(dataset.class_names()))?;
    Ok(())
}

fn cmd_grid_search(args: RunArgs) -> anyhow::Result<()> {
    let (config, dataset) = RunConfig::resolve(args)?;
    config.prepare_out()?;
    let opts = config.train_options()?;
    for repeat in 0..config.repeats {
        let search = grid_search_weights(&dataset, &config.selection, &opts, &config.search_options(repeat))?;
        if search.candidates.is_empty() {
            println!("single side-information type: weights fixed at 1");
        } else {
            println!(
                "repeat {repeat}: validation classes {:?}, {} candidates",
                search.val_classes,
                search.candidates.len()
            );
            for (weights, accuracy) in &search.candidates {
                println!("  weights {} accuracy {}", list(weights.alphas()), fmt_f64(*accuracy));
            }
        }
        println!("repeat {repeat}: selected weights {}", list(search.weights.alphas()));
    }
    Ok(())
}

fn cmd_sweep_d(args: RunArgs, d_list: Vec<usize>) -> anyhow::Result<()> {
    let (mut config, dataset) = RunConfig::resolve(args)?;
    if d_list.contains(&0) {
        bail!("--d-list entries must be >= 1");
    }
    // The weight search runs at the first listed dimension unless --d is set.
    config.d.get_or_insert(d_list[0]);
    let out = config.prepare_out()?;
    let weights = weights_for(&config, &dataset, 0)?;
    println!("weights {}", list(weights.alphas()));
    let rows = sweep_dimension(&dataset, &config.selection, &weights, &d_list, &config.train_options()?)?;
    let mut csv = String::from("d,accuracy\n");
    for (d, accuracy) in rows {
        println!("d={d} accuracy {}", fmt_f64(accuracy));
        csv.push_str(&format!("{d},{}\n", fmt_f64(accuracy)));
    }
    fs::write(out.join("sweep.csv"), csv)?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> anyhow::Result<()> {
    let spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => SyntheticSpec {
            latent_dim: args.latent_dim,
            class_count: args.classes,
            instances_per_class: args.instances,
            unseen_count: args.unseen,
            latent_sigma: args.sigma,
            views: args
                .view_dims
                .iter()
                .map(|&dim| ViewSpec::new(dim, args.sigma))
                .collect(),
            seed: args.seed,
        },
    };
    let dataset = generate_synthetic(&spec)?;
    let manifest = save_dataset(&dataset, &args.out)?;
    write_json(args.out.join("run-config.json"), &spec)?;
    println!(
        "wrote {} ({} instances, {} classes, {} side-information types)",
        manifest.display(),
        dataset.labels().len(),
        dataset.class_names().len(),
        dataset.side_info().len()
    );
    Ok(())
}

fn cmd_bench(args: RunArgs) -> anyhow::Result<()> {
    let (config, dataset) = RunConfig::resolve(args)?;
    config.prepare_out()?;
    let weights = match config.fixed_weights()? {
        Some(w) => w,
        None => FusionWeights::uniform(config.selection.len()),
    };
    let timing = benchmark(
        &dataset,
        &config.selection,
        &config.train_options()?,
        &weights,
        config.repeats,
    )?;
    println!("fit seconds: {}", fmt_f64(timing.fit_seconds));
    println!("test total ms: {}", fmt_f64(timing.test_total_ms));
    println!("per-image ms: {}", fmt_f64(timing.per_image_ms));
    println!("test instances: {}, repeats: {}", timing.test_instances, timing.repeats);
    Ok(())
}
