//! Pixel-Word tokens: content embeddings, 2-D position buckets and the
//! screen-level layout embedding.

pub mod layout;
pub mod position;
pub mod text;
pub mod tokens;

pub use layout::{layout_raster, train_layout_autoencoder, AutoencoderTrainConfig, LayoutAutoencoder};
pub use position::{position_buckets, position_embedding, BUCKETS};
pub use text::{cosine, embed_graphic, FileEmbedder, HashedTrigramEmbedder, TextEmbedder};
pub use tokens::{prepare_screen, reading_order, ScreenInputs};
