//! The Screen Transformer: a post-norm encoder over Pixel-Word tokens with
//! masked-prediction pretraining and task heads.

pub mod config;
pub mod heads;
pub mod model;
pub mod retrieval;
pub mod train;

pub use config::ScreenTransformerConfig;
pub use heads::{argmax, screen_repr, Task, TaskExample, TaskLabels};
pub use model::{Encoded, Net, ScreenTransformer};
pub use retrieval::{build_index, retrieve, Hit, RetrievalIndex};
pub use train::{plan_mask, pretrain, train_task, MaskPlan, TrainConfig, TrainReport};
