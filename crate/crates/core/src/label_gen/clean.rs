use serde::Serialize;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CleanReport {
    pub kept: usize,
    /// Input positions of dropped screens.
    pub dropped: Vec<usize>,
}

/// `|ocr - vh| / max(ocr, vh, 1)`.
pub fn relative_mismatch(vh_text_count: usize, ocr_text_count: usize) -> f64 {
    let diff = vh_text_count.abs_diff(ocr_text_count) as f64;
    diff / vh_text_count.max(ocr_text_count).max(1) as f64
}

/// Keeps screens whose relative text-count mismatch is at most `rel_mismatch`.
pub fn clean_screens<T: Clone>(screens: &[(T, usize, usize)], rel_mismatch: f64) -> (Vec<(T, usize, usize)>, CleanReport) {
    let mut kept = Vec::new();
    let mut report = CleanReport::default();
    for (i, (s, vh, ocr)) in screens.iter().enumerate() {
        if relative_mismatch(*vh, *ocr) > rel_mismatch {
            report.dropped.push(i);
        } else {
            kept.push((s.clone(), *vh, *ocr));
        }
    }
    report.kept = kept.len();
    (kept, report)
}
