use super::{LabelGenConfig, OcrLine};
use crate::geometry::center_hit;
use crate::pixel::PixelWord;
use crate::vh::{ViewHierarchy, ViewNode};

pub(super) fn is_text_class(class_name: &str, cfg: &LabelGenConfig) -> bool {
    let lower = class_name.to_lowercase();
    cfg.text_class_keywords.iter().any(|k| lower.contains(k.as_str()))
}

/// One Text Pixel-Word per OCR line whose center lies in a text-like node.
/// Clickability comes from the deepest such node.
pub fn extract_text_pixel_words(vh: &ViewHierarchy, ocr: &[OcrLine], cfg: &LabelGenConfig) -> Vec<PixelWord> {
    let text_nodes: Vec<&ViewNode> = vh
        .nodes()
        .into_iter()
        .filter(|n| is_text_class(&n.class_name, cfg))
        .collect();
    let mut out = Vec::new();
    for line in ocr {
        let content = line.text.trim();
        if content.is_empty() {
            continue;
        }
        let mut host: Option<&ViewNode> = None;
        for n in text_nodes.iter().filter(|n| center_hit(&line.bbox, &n.bounds)) {
            if host.map_or(true, |h| n.depth() > h.depth()) {
                host = Some(n);
            }
        }
        if let Some(h) = host {
            let pw = PixelWord::text(content, line.bbox).expect("trimmed content is non-empty");
            out.push(pw.with_clickable(Some(h.clickable)));
        }
    }
    out
}

/// Number of text-like nodes carrying non-blank text.
pub fn vh_text_count(vh: &ViewHierarchy, cfg: &LabelGenConfig) -> usize {
    vh.nodes()
        .into_iter()
        .filter(|n| is_text_class(&n.class_name, cfg) && n.text.as_deref().is_some_and(|t| !t.trim().is_empty()))
        .count()
}
