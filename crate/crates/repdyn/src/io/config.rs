//! Flat `key = value` run configuration. Every training hyperparameter is
//! a named key whose default is the stock recipe for the dataset at hand;
//! unknown keys fail fast and type errors cite line numbers.

use std::collections::BTreeMap;

use crate::error::IoError;
use crate::kae::KaeTrainConfig;
use crate::resnet::MlpTrainConfig;

/// Raw parse of a config file: `(line, key, value)` triples in file order.
/// Syntax: `key = value` per line, `#` comments, blank lines ignored;
/// sections are expressed as dotted key prefixes (`kae.lambda_dist`).
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    pub pairs: Vec<(usize, String, String)>,
}

pub fn parse_config(text: &str) -> Result<ConfigFile, IoError> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if stripped.is_empty() {
            continue;
        }
        let Some((key, value)) = stripped.split_once('=') else {
            return Err(IoError::Config {
                line,
                detail: format!("expected `key = value`, found `{stripped}`"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(IoError::Config {
                line,
                detail: "empty key or value".into(),
            });
        }
        pairs.push((line, key.to_string(), value.to_string()));
    }
    Ok(ConfigFile { pairs })
}

/// Host-MLP stage settings: architecture plus training recipe.
#[derive(Debug, Clone)]
pub struct MlpSettings {
    pub width: usize,
    pub blocks: usize,
    pub cfg: MlpTrainConfig,
}

/// KAE stage settings: architecture plus training recipe.
#[derive(Debug, Clone)]
pub struct KaeSettings {
    pub hidden: usize,
    pub observable_dim: usize,
    pub k_steps: usize,
    pub cfg: KaeTrainConfig,
}

/// Effective configuration for a run: dataset-appropriate defaults with
/// file overrides applied.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: String,
    pub mlp: MlpSettings,
    pub kae: KaeSettings,
}

impl RunConfig {
    /// Stock defaults for the named dataset; anything other than `mnist*`
    /// gets the Yin-Yang recipe.
    pub fn defaults_for(dataset: &str) -> Self {
        if dataset.starts_with("mnist") {
            Self {
                dataset: dataset.to_string(),
                mlp: MlpSettings {
                    width: 784,
                    blocks: 4,
                    cfg: MlpTrainConfig::mnist(0),
                },
                kae: KaeSettings {
                    hidden: 1000,
                    observable_dim: 800,
                    k_steps: 50,
                    cfg: KaeTrainConfig::mnist(0),
                },
            }
        } else {
            Self {
                dataset: dataset.to_string(),
                mlp: MlpSettings {
                    width: 10,
                    blocks: 4,
                    cfg: MlpTrainConfig::yinyang(0),
                },
                kae: KaeSettings {
                    hidden: 30,
                    observable_dim: 20,
                    k_steps: 50,
                    cfg: KaeTrainConfig::yinyang(0),
                },
            }
        }
    }

    /// Overlays file pairs onto the defaults. Unknown keys and malformed
    /// values are rejected with their line numbers.
    pub fn apply(&mut self, file: &ConfigFile) -> Result<(), IoError> {
        for (line, key, value) in &file.pairs {
            self.apply_one(*line, key, value)?;
        }
        Ok(())
    }

    fn apply_one(&mut self, line: usize, key: &str, value: &str) -> Result<(), IoError> {
        fn parse<T: std::str::FromStr>(
            line: usize,
            key: &str,
            value: &str,
            ty: &str,
        ) -> Result<T, IoError> {
            value.parse().map_err(|_| IoError::Config {
                line,
                detail: format!("`{key}`: cannot parse `{value}` as {ty}"),
            })
        }
        let m = &mut self.mlp;
        let k = &mut self.kae;
        match key {
            "mlp.width" => m.width = parse(line, key, value, "integer")?,
            "mlp.blocks" => m.blocks = parse(line, key, value, "integer")?,
            "mlp.epochs" => m.cfg.epochs = parse(line, key, value, "integer")?,
            "mlp.batch" => m.cfg.batch_size = parse(line, key, value, "integer")?,
            "mlp.momentum" => m.cfg.momentum = parse(line, key, value, "real")?,
            "mlp.weight_decay" => m.cfg.weight_decay = parse(line, key, value, "real")?,
            "mlp.peak_lr" => m.cfg.peak_lr = parse(line, key, value, "real")?,
            "mlp.seed" => m.cfg.seed = parse(line, key, value, "integer")?,
            "mlp.eval_every" => m.cfg.eval_every = parse(line, key, value, "integer")?,
            "kae.hidden" => k.hidden = parse(line, key, value, "integer")?,
            "kae.observable_dim" => k.observable_dim = parse(line, key, value, "integer")?,
            "kae.k_steps" => k.k_steps = parse(line, key, value, "integer")?,
            "kae.epochs" => k.cfg.epochs = parse(line, key, value, "integer")?,
            "kae.batch" => k.cfg.batch = parse(line, key, value, "integer")?,
            "kae.lr" => k.cfg.learning_rate = parse(line, key, value, "real")?,
            "kae.lr_decay" => {
                k.cfg.lr_decay = parse(line, key, value, "`constant` or `cosine`")?
            }
            "kae.weight_decay" => k.cfg.weight_decay = parse(line, key, value, "real")?,
            "kae.seed" => k.cfg.seed = parse(line, key, value, "integer")?,
            "kae.lambda_recon" => k.cfg.weights.recon = parse(line, key, value, "real")?,
            "kae.lambda_linear" => k.cfg.weights.linear = parse(line, key, value, "real")?,
            "kae.lambda_state" => k.cfg.weights.state = parse(line, key, value, "real")?,
            "kae.lambda_dist" => k.cfg.weights.dist = parse(line, key, value, "real")?,
            other => {
                return Err(IoError::Config {
                    line,
                    detail: format!("unknown key `{other}`"),
                })
            }
        }
        Ok(())
    }

    /// Flat snapshot of every effective key, for the run manifest.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("dataset", self.dataset.clone());
        put("mlp.width", self.mlp.width.to_string());
        put("mlp.blocks", self.mlp.blocks.to_string());
        put("mlp.epochs", self.mlp.cfg.epochs.to_string());
        put("mlp.batch", self.mlp.cfg.batch_size.to_string());
        put("mlp.momentum", self.mlp.cfg.momentum.to_string());
        put("mlp.weight_decay", self.mlp.cfg.weight_decay.to_string());
        put("mlp.peak_lr", self.mlp.cfg.peak_lr.to_string());
        put("mlp.seed", self.mlp.cfg.seed.to_string());
        put("mlp.eval_every", self.mlp.cfg.eval_every.to_string());
        put("kae.hidden", self.kae.hidden.to_string());
        put("kae.observable_dim", self.kae.observable_dim.to_string());
        put("kae.k_steps", self.kae.k_steps.to_string());
        put("kae.epochs", self.kae.cfg.epochs.to_string());
        put("kae.batch", self.kae.cfg.batch.to_string());
        put("kae.lr", self.kae.cfg.learning_rate.to_string());
        put("kae.lr_decay", self.kae.cfg.lr_decay.to_string());
        put("kae.weight_decay", self.kae.cfg.weight_decay.to_string());
        put("kae.seed", self.kae.cfg.seed.to_string());
        put("kae.lambda_recon", self.kae.cfg.weights.recon.to_string());
        put("kae.lambda_linear", self.kae.cfg.weights.linear.to_string());
        put("kae.lambda_state", self.kae.cfg.weights.state.to_string());
        put("kae.lambda_dist", self.kae.cfg.weights.dist.to_string());
        map
    }
}
