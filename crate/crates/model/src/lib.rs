//! Pixel-Word embeddings, the Screen Transformer with its pretraining and
//! downstream heads, and cosine screen retrieval.
//!
//! Weights live in a 64-bit [`pw2ss_nn::ParamStore`]; screens are first
//! turned into model-independent [`embed::ScreenInputs`] (canonical token
//! order, content vectors, position buckets, layout raster) and then
//! embedded by [`transformer::ScreenTransformer::build_tokens`].

pub mod embed;
pub mod error;
pub mod transformer;

pub use embed::{prepare_screen, HashedTrigramEmbedder, ScreenInputs, TextEmbedder};
pub use error::{ModelError, Result};
pub use transformer::{
    build_index, pretrain, retrieve, train_task, RetrievalIndex, ScreenTransformer, ScreenTransformerConfig, Task,
    TaskExample, TaskLabels, TrainConfig,
};
