use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _};
use clap::Args;
use mbfa::embedding::DEFAULT_MCCA_REG;
use mbfa::{FusionWeights, GridSearchOptions, Method, TrainOptions, ZslDataset};
use serde::{Deserialize, Serialize};

/// Flags shared by the dataset-driven subcommands. Every field may also come
/// from `--config`; flags given on the command line win.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunArgs {
    /// JSON file with any of these settings.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Dataset manifest (JSON).
    #[arg(long)]
    pub manifest: Option<PathBuf>,

    /// Embedding method: MBFA or MCCA.
    #[arg(long)]
    pub method: Option<String>,

    /// Dimension of the shared embedding space.
    #[arg(long)]
    pub d: Option<usize>,

    /// Side-information types to use, by name or index (comma list).
    /// Defaults to all of them.
    #[arg(long, value_delimiter = ',')]
    pub side_info: Option<Vec<String>>,

    /// Fixed fusion weights, one per selected type (normalized to sum 1).
    #[arg(long, value_delimiter = ',', conflicts_with = "grid_step")]
    pub weights: Option<Vec<f64>>,

    /// Spacing of the fusion-weight grid search.
    #[arg(long)]
    pub grid_step: Option<f64>,

    /// Share of seen classes held out for the weight search.
    #[arg(long)]
    pub val_fraction: Option<f64>,

    /// MCCA ridge, relative to each view's average variance.
    #[arg(long)]
    pub reg: Option<f64>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Repeated validation splits for the weight search.
    #[arg(long)]
    pub repeats: Option<usize>,

    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    /// Applies the optional config file underneath the flags.
    pub fn merged(self) -> anyhow::Result<RunArgs> {
        let Some(path) = &self.config else {
            return Ok(self);
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base: RunArgs =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(RunArgs {
            config: self.config,
            manifest: self.manifest.or(base.manifest),
            method: self.method.or(base.method),
            d: self.d.or(base.d),
            side_info: self.side_info.or(base.side_info),
            weights: self.weights.or(base.weights),
            grid_step: self.grid_step.or(base.grid_step),
            val_fraction: self.val_fraction.or(base.val_fraction),
            reg: self.reg.or(base.reg),
            seed: self.seed.or(base.seed),
            repeats: self.repeats.or(base.repeats),
            out: self.out.or(base.out),
        })
    }
}

/// Fully resolved settings, echoed to `run-config.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub side_info: Vec<String>,
    pub d: Option<usize>,
    pub method: Method,
    pub reg: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub grid_step: f64,
    pub val_fraction: f64,
    pub seed: u64,
    pub repeats: usize,
    pub out: PathBuf,
    #[serde(skip)]
    pub selection: Vec<usize>,
}

impl RunConfig {
    pub fn resolve(args: RunArgs) -> anyhow::Result<(RunConfig, ZslDataset)> {
        let args = args.merged()?;
        let manifest = args.manifest.context("--manifest is required")?;
        let dataset =
            mbfa::load_dataset(&manifest).with_context(|| format!("loading dataset {}", manifest.display()))?;
        let method: Method = args.method.as_deref().unwrap_or("MBFA").parse()?;
        let repeats = args.repeats.unwrap_or(1);
        if repeats == 0 {
            bail!("--repeats must be >= 1");
        }
        if args.d == Some(0) {
            bail!("--d must be >= 1");
        }
        let selection: Vec<usize> = match &args.side_info {
            None => (0..dataset.side_info().len()).collect(),
            Some(names) => names
                .iter()
                .map(|n| side_info_index(&dataset, n))
                .collect::<anyhow::Result<_>>()?,
        };
        let side_info = selection.iter().map(|&k| dataset.side_info()[k].name.clone()).collect();
        let config = RunConfig {
            manifest,
            side_info,
            d: args.d,
            method,
            reg: args.reg.unwrap_or(DEFAULT_MCCA_REG),
            weights: args.weights,
            grid_step: args.grid_step.unwrap_or(0.1),
            val_fraction: args.val_fraction.unwrap_or(0.2),
            seed: args.seed.unwrap_or(0),
            repeats,
            out: args.out.unwrap_or_else(|| PathBuf::from("out")),
            selection,
        };
        Ok((config, dataset))
    }

    pub fn d(&self) -> anyhow::Result<usize> {
        self.d.context("--d is required")
    }

    pub fn train_options(&self) -> anyhow::Result<TrainOptions> {
        Ok(TrainOptions {
            d: self.d()?,
            method: self.method,
            reg: self.reg,
        })
    }

    pub fn search_options(&self, repeat: usize) -> GridSearchOptions {
        GridSearchOptions {
            grid_step: self.grid_step,
            val_fraction: self.val_fraction,
            seed: self.seed + repeat as u64,
        }
    }

    pub fn fixed_weights(&self) -> anyhow::Result<Option<FusionWeights>> {
        let Some(raw) = &self.weights else {
            return Ok(None);
        };
        if raw.len() != self.selection.len() {
            bail!(
                "{} weights given for {} side-information types",
                raw.len(),
                self.selection.len()
            );
        }
        Ok(Some(FusionWeights::normalized(raw)?))
    }

    pub fn prepare_out(&self) -> anyhow::Result<&Path> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(self.out.join("run-config.json"), text)?;
        Ok(&self.out)
    }
}

fn side_info_index(dataset: &ZslDataset, name: &str) -> anyhow::Result<usize> {
    if let Some(k) = dataset.side_info_index(name) {
        return Ok(k);
    }
    match name.parse::<usize>() {
        Ok(k) if k < dataset.side_info().len() => Ok(k),
        _ => {
            let known: Vec<_> = dataset.side_info().iter().map(|s| s.name.as_str()).collect();
            bail!("unknown side information {name:?} (available: {})", known.join(", "))
        }
    }
}
