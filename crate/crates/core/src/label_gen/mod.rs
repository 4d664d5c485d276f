//! Pixel-Words pseudo-labels from View-Hierarchy metadata plus OCR.
//!
//! Text Pixel-Words are OCR lines that fall inside text-like VH nodes.
//! Graphic Pixel-Words come from candidate VH nodes and from the regions
//! between each text box and its parent frame, filtered by a patch
//! classifier. Screens whose OCR and VH text counts disagree are dropped.

mod classifier;
mod clean;
mod features;
mod proposals;
mod text;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pixel::{PixelWord, ScreenSentence, OTHER_CATEGORY};
use crate::raster::Raster;
use crate::vh::ViewHierarchy;
use crate::BBox;

pub use classifier::{train_proposal_classifier, LogisticModel, ProposalScorer, TrainReport};
pub use clean::{clean_screens, relative_mismatch, CleanReport};
pub use features::{patch_features, patch_features_with_background, PatchFeatures, FEATURE_DIM};
pub use proposals::{graphic_proposals, parent_frame, score_proposals, scored_proposals, spaced_regions, ScoredProposal};
pub use text::{extract_text_pixel_words, vh_text_count};

#[derive(Debug, Error, PartialEq)]
pub enum LabelGenError {
    #[error("text box does not intersect its parent frame")]
    DisjointInputs,
    #[error("patch has zero area after clamping to the screenshot")]
    EmptyPatch,
    #[error("classifier training needs both labels, got only {0}")]
    DegenerateDataset(u8),
    #[error("feature vectors must all have {expected} entries, found {found}")]
    FeatureWidth { expected: usize, found: usize },
    #[error("invalid label-generation config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcrLine {
    pub text: String,
    pub bbox: BBox,
}

/// One screen's OCR result, as stored in OCR JSONL files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcrScreen {
    pub screen_id: String,
    pub lines: Vec<OcrLine>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelGenConfig {
    /// Lowercase substrings marking a class name as text-bearing.
    pub text_class_keywords: Vec<String>,
    /// Full or simple (after the last `.`) class names that propose graphics.
    pub graphic_class_candidates: Vec<String>,
    pub score_thres: f64,
    pub clean_rel_mismatch: f64,
    pub min_proposal_side: f64,
    /// Overlapping kept graphics above this IoU are suppressed.
    pub nms_iou: f64,
}

impl Default for LabelGenConfig {
    fn default() -> Self {
        Self {
            text_class_keywords: ["text", "label", "button"].map(String::from).to_vec(),
            graphic_class_candidates: [
                "ImageView",
                "ImageButton",
                "Icon",
                "Image",
                "CheckBox",
                "RadioButton",
                "Switch",
                "ToggleButton",
            ]
            .map(String::from)
            .to_vec(),
            score_thres: 0.5,
            clean_rel_mismatch: 0.5,
            min_proposal_side: 4.0,
            nms_iou: 0.5,
        }
    }
}

impl LabelGenConfig {
    pub fn validate(&self) -> Result<(), LabelGenError> {
        let bad = |m: &str| Err(LabelGenError::InvalidConfig(m.to_string()));
        if self.text_class_keywords.is_empty() || self.graphic_class_candidates.is_empty() {
            return bad("class-name sets must be non-empty");
        }
        if !(self.score_thres > 0.0 && self.score_thres < 1.0) {
            return bad("score_thres must lie in (0, 1)");
        }
        if !(self.clean_rel_mismatch > 0.0 && self.clean_rel_mismatch <= 1.0) {
            return bad("clean_rel_mismatch must lie in (0, 1]");
        }
        if !(self.min_proposal_side >= 0.0) {
            return bad("min_proposal_side must be non-negative");
        }
        Ok(())
    }
}

/// Pseudo-labels of one screen before cleaning.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledScreen {
    /// Text Pixel-Words first, then graphics in descending score order.
    pub sentence: ScreenSentence,
    /// Classifier score of each graphic, aligned with the graphic Pixel-Words.
    pub graphic_scores: Vec<f64>,
    pub vh_text_count: usize,
    pub ocr_text_count: usize,
}

/// Runs text extraction, proposal generation and proposal scoring on one screen.
/// Graphics get the `other` category.
pub fn label_screen(
    vh: &ViewHierarchy,
    ocr: &[OcrLine],
    raster: &Raster,
    clf: &impl ProposalScorer,
    cfg: &LabelGenConfig,
) -> LabeledScreen {
    let texts = extract_text_pixel_words(vh, ocr, cfg);
    let text_boxes: Vec<BBox> = texts.iter().map(|p| p.bbox).collect();
    let proposals = graphic_proposals(vh, &text_boxes, cfg);
    let scored = scored_proposals(raster, &proposals, clf, cfg);
    let nodes = vh.nodes();
    let mut words = texts;
    let mut scores = Vec::with_capacity(scored.len());
    for s in scored {
        let clickable = nodes.iter().find(|n| n.bounds == s.bbox).map(|n| n.clickable);
        words.push(
            PixelWord::graphic(OTHER_CATEGORY, s.bbox)
                .expect("other is a valid category")
                .with_clickable(clickable),
        );
        scores.push(s.score);
    }
    LabeledScreen {
        sentence: ScreenSentence::new(vh.screen_id.clone(), vh.screen_width, vh.screen_height, words),
        graphic_scores: scores,
        vh_text_count: vh_text_count(vh, cfg),
        ocr_text_count: ocr.iter().filter(|l| !l.text.trim().is_empty()).count(),
    }
}
