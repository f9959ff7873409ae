//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dsner_core::trainer::TrainerConfig;
use dsner_core::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub trainer: TrainerConfig,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub dev_embeddings: Option<PathBuf>,
    pub test_embeddings: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            trainer: TrainerConfig::default(),
            train: None,
            dev: None,
            test: None,
            embeddings: None,
            dev_embeddings: None,
            test_embeddings: None,
            out_dir: PathBuf::from("."),
            threads: 1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "1" | "yes" => Ok(true),
        "false" | "off" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean {value:?} for {key}"))),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.trainer;
        match key {
            "seed" => self.seed = Some(parse(key, value)?),
            "lambda" => t.lambda = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "warmup_epochs" => t.warmup_epochs = parse(key, value)?,
            "learning_rate" => t.learning_rate = parse(key, value)?,
            "weight_decay" => t.weight_decay = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "ues" => t.ues = parse_bool(key, value)?,
            "npe" => t.npe = parse_bool(key, value)?,
            "max_span_len" => t.max_span_len = parse(key, value)?,
            "npe_min_support" => t.npe_min_support = parse(key, value)?,
            "k_folds" => t.k_folds = parse(key, value)?,
            "select_on_dev" => t.select_on_dev = parse_bool(key, value)?,
            "embed_dim" => t.model.embed_dim = parse(key, value)?,
            "hidden_dim" => t.model.hidden_dim = parse(key, value)?,
            "context_window" => t.model.context_window = parse(key, value)?,
            "dropout" => t.model.dropout = parse(key, value)?,
            "train" => self.train = Some(value.into()),
            "dev" => self.dev = Some(value.into()),
            "test" => self.test = Some(value.into()),
            "embeddings" => self.embeddings = Some(value.into()),
            "dev_embeddings" => self.dev_embeddings = Some(value.into()),
            "test_embeddings" => self.test_embeddings = Some(value.into()),
            "out_dir" => self.out_dir = value.into(),
            "threads" => self.threads = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a config file; `#` starts a comment.
    pub fn load(&mut self, text: &str) -> Result<()> {
        for (ix, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: ix + 1,
                message: "expected key = value".into(),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        self.load(&std::fs::read_to_string(path)?)
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a seed is required (--seed or `seed =` in the config)".into()))
    }

    pub fn dump(&self) -> String {
        let t = &self.trainer;
        let path = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("seed", self.seed.map_or(String::new(), |s| s.to_string()));
        put("lambda", t.lambda.to_string());
        put("epochs", t.epochs.to_string());
        put("warmup_epochs", t.warmup_epochs.to_string());
        put("learning_rate", t.learning_rate.to_string());
        put("weight_decay", t.weight_decay.to_string());
        put("batch_size", t.batch_size.to_string());
        put("ues", t.ues.to_string());
        put("npe", t.npe.to_string());
        put("max_span_len", t.max_span_len.to_string());
        put("npe_min_support", t.npe_min_support.to_string());
        put("k_folds", t.k_folds.to_string());
        put("select_on_dev", t.select_on_dev.to_string());
        put("embed_dim", t.model.embed_dim.to_string());
        put("hidden_dim", t.model.hidden_dim.to_string());
        put("context_window", t.model.context_window.to_string());
        put("dropout", t.model.dropout.to_string());
        put("train", path(&self.train));
        put("dev", path(&self.dev));
        put("test", path(&self.test));
        put("embeddings", path(&self.embeddings));
        put("dev_embeddings", path(&self.dev_embeddings));
        put("test_embeddings", path(&self.test_embeddings));
        put("out_dir", self.out_dir.display().to_string());
        put("threads", self.threads.to_string());
        out
    }
}
