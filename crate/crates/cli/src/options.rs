//! Flag definitions and merging with JSON config files.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use otcoarsen::data::FeatureSpec;
use otcoarsen::gnn::Activation;
use otcoarsen::train::TrainConfig;
use serde_json::{Map, Value};

use crate::failure::{usage, Failure};

#[derive(Debug, Parser)]
#[command(name = "otcoarsen", version, about = "Unsupervised graph coarsening trained by entropic optimal transport")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cross-validate on a dataset; write a checkpoint and a metrics file.
    Train(TrainArgs),
    /// Re-run the classifier stage with the frozen models of a checkpoint.
    Eval(EvalArgs),
    /// Cross-validate over a grid of gamma and k values; write a CSV table.
    Sweep(SweepArgs),
    /// Write the coarsening sequence of one graph as DOT files.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FeatureMode {
    NodeLabelOneHot,
    NodeAttributes,
    DegreeOneHot,
}

#[derive(Debug, Clone, Args)]
pub struct DatasetArgs {
    /// TU dataset directory, or a name looked up under ./data/.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// File prefix inside the dataset directory [default: directory name].
    #[arg(long)]
    pub name: Option<String>,
    /// Node feature construction [default: node labels if present, else degree].
    #[arg(long, value_enum)]
    pub features: Option<FeatureMode>,
    /// Degree cap for degree one-hot features.
    #[arg(long)]
    pub max_degree: Option<usize>,
    /// Keep a seeded random fraction of the graphs, in (0, 1].
    #[arg(long)]
    pub subsample: Option<f64>,
}

/// One flag per [`TrainConfig`] field.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON file supplying any flag; command-line values take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub lr_decay: Option<f64>,
    #[arg(long)]
    pub decay_every: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long, value_parser = parse_activation)]
    pub decoder_activation: Option<Activation>,
    #[arg(long)]
    pub classifier_hidden: Option<usize>,
    #[arg(long)]
    pub classifier_epochs: Option<usize>,
    #[arg(long)]
    pub classifier_batch: Option<usize>,
}

fn parse_activation(s: &str) -> Result<Activation, String> {
    serde_json::from_value(Value::String(s.into())).map_err(|_| format!("unknown activation {s:?}"))
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Output directory for checkpoint.json and metrics.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Also write the report as JSON to this path.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Comma-separated gamma values.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub gammas: Vec<f64>,
    /// Comma-separated Sinkhorn step counts.
    #[arg(long = "ks", value_delimiter = ',', required = true, num_args = 1..)]
    pub ks: Vec<usize>,
    /// Grid points evaluated concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// CSV output path.
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Graph index within the dataset (0-based).
    #[arg(long)]
    pub graph: usize,
    /// Fold whose model drives the coarsening.
    #[arg(long, default_value_t = 0)]
    pub fold: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Dataset flags after config merging.
#[derive(Debug, Clone)]
pub struct DatasetChoice {
    pub dir: PathBuf,
    pub name: String,
    pub features: Option<FeatureSpec>,
    pub subsample: Option<f64>,
}

fn read_config(path: &Path) -> Result<Map<String, Value>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::runtime(format!("cannot read {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(Failure::runtime(format!("{}: config must be a JSON object", path.display()))),
        Err(e) => Err(Failure::runtime(format!("{}: {e}", path.display()))),
    }
}

fn take<T: serde::de::DeserializeOwned>(map: &mut Map<String, Value>, key: &str) -> Result<Option<T>, Failure> {
    map.remove(key)
        .map(|v| serde_json::from_value(v).map_err(|e| Failure::runtime(format!("config key {key}: {e}"))))
        .transpose()
}

/// Resolves the training configuration and dataset flags: defaults, then the
/// JSON config file, then explicit flags.
pub fn resolve(cfg: &ConfigArgs, data: &DatasetArgs) -> Result<(TrainConfig, DatasetChoice), Failure> {
    let mut file = match &cfg.config {
        Some(path) => read_config(path)?,
        None => Map::new(),
    };
    let dataset: Option<PathBuf> = data.dataset.clone().or(take(&mut file, "dataset")?);
    let name: Option<String> = data.name.clone().or(take(&mut file, "name")?);
    let features: Option<FeatureMode> = match data.features {
        Some(f) => Some(f),
        None => take::<String>(&mut file, "features")?
            .map(|s| FeatureMode::from_str(&s, true).map_err(|e| Failure::runtime(format!("config key features: {e}"))))
            .transpose()?,
    };
    let max_degree: Option<usize> = data.max_degree.or(take(&mut file, "max_degree")?);
    let subsample: Option<f64> = data.subsample.or(take(&mut file, "subsample")?);

    let overrides = [
        ("gamma", cfg.gamma.map(Value::from)),
        ("k", cfg.k.map(Value::from)),
        ("p", cfg.p.map(Value::from)),
        ("ratio", cfg.ratio.map(Value::from)),
        ("levels", cfg.levels.map(Value::from)),
        ("hidden", cfg.hidden.map(Value::from)),
        ("lr", cfg.lr.map(Value::from)),
        ("max_epochs", cfg.max_epochs.map(Value::from)),
        ("lr_decay", cfg.lr_decay.map(Value::from)),
        ("decay_every", cfg.decay_every.map(Value::from)),
        ("seed", cfg.seed.map(Value::from)),
        ("folds", cfg.folds.map(Value::from)),
        ("val_fraction", cfg.val_fraction.map(Value::from)),
        ("decoder_activation", cfg.decoder_activation.map(|a| serde_json::to_value(a).expect("activation serialises"))),
        ("classifier_hidden", cfg.classifier_hidden.map(Value::from)),
        ("classifier_epochs", cfg.classifier_epochs.map(Value::from)),
        ("classifier_batch", cfg.classifier_batch.map(Value::from)),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            file.insert(key.into(), v);
        }
    }
    let train: TrainConfig = serde_json::from_value(Value::Object(file)).map_err(|e| Failure::runtime(format!("config: {e}")))?;
    train.validate().map_err(|e| usage(e.to_string()))?;

    let Some(dataset) = dataset else {
        return Err(usage("the following required arguments were not provided:\n  --dataset <DATASET>"));
    };
    let dir = if dataset.is_dir() {
        dataset
    } else {
        let fallback = Path::new("data").join(&dataset);
        if fallback.is_dir() { fallback } else { dataset }
    };
    let name = match name {
        Some(n) => n,
        None => dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| usage("cannot infer dataset name; pass --name"))?,
    };
    let features = features.map(|mode| match mode {
        FeatureMode::NodeLabelOneHot => FeatureSpec::NodeLabelOneHot,
        FeatureMode::NodeAttributes => FeatureSpec::NodeAttributes,
        FeatureMode::DegreeOneHot => FeatureSpec::DegreeOneHot {
            max_degree: max_degree.unwrap_or(otcoarsen::data::DEFAULT_MAX_DEGREE),
        },
    });
    if let Some(f) = subsample {
        if !(f > 0.0 && f <= 1.0) {
            return Err(usage(format!("--subsample must lie in (0, 1], got {f}")));
        }
    }
    Ok((
        train,
        DatasetChoice {
            dir,
            name,
            features,
            subsample,
        },
    ))
}
