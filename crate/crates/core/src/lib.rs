//! GUI-side data model and evaluation for Pixel-Words.
//!
//! - [`geometry`]: boxes, IoU and the center criterion.
//! - [`vh`]: View-Hierarchy trees and their JSON form.
//! - [`pixel`]: Pixel-Words, Screen-Sentences and the icon taxonomy.
//! - [`raster`]: binary PPM screenshots.
//! - [`label_gen`]: pseudo-label generation from VH metadata and OCR.
//! - [`metrics`]: COCO-style detection metrics and top-1 accuracy.
//!
//! Geometry is generic over the scalar type; the root aliases fix `f64`.

pub mod geometry;
pub mod label_gen;
pub mod metrics;
pub mod pixel;
pub mod raster;
pub mod vh;

pub use geometry::{center_hit, iou, InvalidBox};
pub use pixel::{PixelKind, PixelWord, ScreenSentence};
pub use raster::Raster;
pub use vh::{parse_vh, serialize_vh, ViewHierarchy, ViewNode};

/// Screen-space box in 64-bit coordinates.
pub type BBox = geometry::BBox<f64>;
/// Screen-space box in 32-bit coordinates.
pub type BBoxF32 = geometry::BBox<f32>;
