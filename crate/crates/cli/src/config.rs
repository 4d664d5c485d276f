//! TOML run configuration. Every section is optional; command-line flags
//! override the loaded values.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pw2ss_core::label_gen::LabelGenConfig;
use pw2ss_model::embed::FileEmbedder;
use pw2ss_model::{HashedTrigramEmbedder, ScreenTransformerConfig, TextEmbedder, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::io::read_text;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutSection {
    pub epochs: usize,
    pub lr: f64,
}

impl Default for LayoutSection {
    fn default() -> Self {
        Self { epochs: 200, lr: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub epochs: usize,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        Self { epochs: 300 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    /// JSONL of `{"text", "vec"}` rows; hashed trigrams when absent.
    pub text_embeddings: Option<PathBuf>,
    pub label_gen: LabelGenConfig,
    pub model: ScreenTransformerConfig,
    pub pretrain: TrainConfig,
    pub finetune: TrainConfig,
    pub layout: LayoutSection,
    pub classifier: ClassifierSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            text_embeddings: None,
            label_gen: LabelGenConfig::default(),
            model: ScreenTransformerConfig::default(),
            pretrain: TrainConfig::default(),
            finetune: TrainConfig::default(),
            layout: LayoutSection::default(),
            classifier: ClassifierSection::default(),
        }
    }
}

impl RunConfig {
    /// Defaults when `path` is `None`. Relative embedding paths resolve
    /// against the config file's directory.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = read_text(path)?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let (Some(p), Some(dir)) = (cfg.text_embeddings.as_mut(), path.parent()) {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        cfg.validate().with_context(|| format!("invalid config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            bail!("config version {} is not supported (expected {CONFIG_VERSION})", self.version);
        }
        self.label_gen.validate()?;
        self.model.validate()?;
        for (name, t) in [("pretrain", &self.pretrain), ("finetune", &self.finetune)] {
            t.optimizer.validate().map_err(|e| anyhow::anyhow!("{name}.optimizer: {e}"))?;
        }
        if let Some(p) = &self.text_embeddings {
            if !p.is_file() {
                bail!("text_embeddings file {} does not exist", p.display());
            }
        }
        Ok(())
    }

    /// The configured text embedder, checked against a model's text width.
    pub fn embedder(&self, text_dim: usize) -> Result<Box<dyn TextEmbedder>> {
        let e: Box<dyn TextEmbedder> = match &self.text_embeddings {
            Some(p) => Box::new(FileEmbedder::from_jsonl(&read_text(p)?).with_context(|| format!("loading {}", p.display()))?),
            None => Box::new(HashedTrigramEmbedder {
                dim: text_dim,
            }),
        };
        if e.dim() != text_dim {
            bail!("text embeddings have width {} but the model expects {text_dim}", e.dim());
        }
        Ok(e)
    }
}
