use serde::{Deserialize, Serialize};

use crate::embed::layout::{DEFAULT_GRID, DEFAULT_HIDDEN};
use crate::embed::text::DEFAULT_TEXT_DIM;
use crate::error::{ModelError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreenTransformerConfig {
    pub layers: usize,
    pub d_model: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    /// Token budget including the layout token.
    pub max_len: usize,
    pub mask_ratio: f64,
    pub app_classes: usize,
    pub text_dim: usize,
    pub layout_grid: usize,
    pub layout_hidden: usize,
}

impl Default for ScreenTransformerConfig {
    fn default() -> Self {
        Self {
            layers: 6,
            d_model: 128,
            heads: 4,
            ffn_dim: 256,
            max_len: 128,
            mask_ratio: 0.15,
            app_classes: 26,
            text_dim: DEFAULT_TEXT_DIM,
            layout_grid: DEFAULT_GRID,
            layout_hidden: DEFAULT_HIDDEN,
        }
    }
}

impl ScreenTransformerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.layers == 0 || self.d_model == 0 || self.heads == 0 || self.ffn_dim == 0 {
            return bad("layers, d_model, heads and ffn_dim must be positive".into());
        }
        if self.d_model % self.heads != 0 {
            return bad(format!("d_model {} is not divisible by heads {}", self.d_model, self.heads));
        }
        if self.d_model < 2 {
            return bad("d_model must be at least 2".into());
        }
        if !(self.mask_ratio > 0.0 && self.mask_ratio < 1.0) {
            return bad(format!("mask_ratio must lie in (0, 1), got {}", self.mask_ratio));
        }
        if self.max_len < 1 || self.app_classes < 1 || self.text_dim < 1 {
            return bad("max_len, app_classes and text_dim must be positive".into());
        }
        if self.layout_grid < 2 || self.layout_hidden < 1 {
            return bad("layout_grid must be at least 2 and layout_hidden positive".into());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }
}
