use super::features::patch_features_with_background;
use super::{LabelGenConfig, LabelGenError, ProposalScorer};
use crate::geometry::iou;
use crate::pixel::{PixelWord, OTHER_CATEGORY};
use crate::raster::Raster;
use crate::vh::{ViewHierarchy, ViewNode};
use crate::BBox;

fn is_candidate(class_name: &str, cfg: &LabelGenConfig) -> bool {
    let simple = class_name.rsplit('.').next().unwrap_or(class_name);
    cfg.graphic_class_candidates
        .iter()
        .any(|c| c == class_name || c == simple)
}

/// Top, bottom, left and right strips of `parent` around `text`, skipping
/// degenerate ones.
pub fn spaced_regions(parent: &BBox, text: &BBox) -> Result<Vec<BBox>, LabelGenError> {
    let t = text.clamp_within(parent);
    if parent.intersection(text).is_none() {
        return Err(LabelGenError::DisjointInputs);
    }
    let p = parent;
    let candidates = [
        (p.x_min, p.y_min, p.x_max, t.y_min),
        (p.x_min, t.y_max, p.x_max, p.y_max),
        (p.x_min, p.y_min, t.x_min, p.y_max),
        (t.x_max, p.y_min, p.x_max, p.y_max),
    ];
    Ok(candidates
        .into_iter()
        .filter(|&(x0, y0, x1, y1)| x1 > x0 && y1 > y0)
        .map(|(x0, y0, x1, y1)| BBox::new(x0, y0, x1, y1))
        .collect())
}

/// Deepest node containing `text` whose bounds differ from it; ties go to
/// the earliest node in pre-order.
pub fn parent_frame<'a>(vh: &'a ViewHierarchy, text: &BBox) -> Option<&'a ViewNode> {
    let mut best: Option<&ViewNode> = None;
    for n in vh.nodes() {
        if n.bounds.contains(text) && n.bounds != *text && best.map_or(true, |b| n.depth() > b.depth()) {
            best = Some(n);
        }
    }
    best
}

/// Candidate-class node bounds followed by spaced regions of every text box.
pub fn graphic_proposals(vh: &ViewHierarchy, text_boxes: &[BBox], cfg: &LabelGenConfig) -> Vec<BBox> {
    let mut raw = Vec::new();
    for n in vh.nodes() {
        if is_candidate(&n.class_name, cfg) || n.ancestors.iter().any(|a| is_candidate(a, cfg)) {
            raw.push(n.bounds);
        }
    }
    for t in text_boxes {
        if let Some(parent) = parent_frame(vh, t) {
            if let Ok(regions) = spaced_regions(&parent.bounds, t) {
                raw.extend(regions);
            }
        }
    }
    let min = cfg.min_proposal_side;
    let mut out: Vec<BBox> = Vec::with_capacity(raw.len());
    for b in raw {
        if b.width() >= min && b.height() >= min && b.area() > 0.0 && !out.contains(&b) {
            out.push(b);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredProposal {
    pub bbox: BBox,
    pub score: f64,
}

/// Proposals scoring above `score_thres`, suppressed so that no two kept
/// boxes overlap beyond `nms_iou`, in descending score order (ties keep
/// input order).
pub fn scored_proposals(
    raster: &Raster,
    proposals: &[BBox],
    clf: &impl ProposalScorer,
    cfg: &LabelGenConfig,
) -> Vec<ScoredProposal> {
    let bg = raster.background();
    let mut passing: Vec<ScoredProposal> = proposals
        .iter()
        .filter_map(|b| {
            let f = patch_features_with_background(raster, bg, b).ok()?;
            let score = clf.score(&f);
            (score > cfg.score_thres).then_some(ScoredProposal { bbox: *b, score })
        })
        .collect();
    passing.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut kept: Vec<ScoredProposal> = Vec::new();
    for p in passing {
        if kept.iter().all(|k| iou(&k.bbox, &p.bbox) <= cfg.nms_iou) {
            kept.push(p);
        }
    }
    kept
}

/// Graphic Pixel-Words (category `other`) for the kept proposals.
pub fn score_proposals(
    raster: &Raster,
    proposals: &[BBox],
    clf: &impl ProposalScorer,
    cfg: &LabelGenConfig,
) -> Vec<PixelWord> {
    scored_proposals(raster, proposals, clf, cfg)
        .into_iter()
        .map(|s| PixelWord::graphic(OTHER_CATEGORY, s.bbox).expect("valid category"))
        .collect()
}
