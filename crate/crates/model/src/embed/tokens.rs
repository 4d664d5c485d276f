//! Model-independent token inputs of one screen: canonical Pixel-Word
//! order, raw content vectors, position buckets and the layout raster.

use std::cmp::Ordering;

use pw2ss_core::{PixelKind, PixelWord, ScreenSentence};
use pw2ss_nn::Tensor;

use super::layout::layout_raster;
use super::position::position_buckets;
use super::text::{embed_graphic, TextEmbedder};

fn kind_key(p: &PixelWord) -> (u8, &str, usize) {
    match &p.kind {
        PixelKind::Text(t) => (0, t.as_str(), 0),
        PixelKind::Graphic(c) => (1, "", *c),
    }
}

/// Reading order: by `y_min`, then `x_min`; the remaining box coordinates,
/// kind, content and clickability make the order total, so any permutation
/// of the same Pixel-Words sorts identically.
pub fn reading_order(words: &[PixelWord]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..words.len()).collect();
    idx.sort_by(|&a, &b| {
        let (p, q) = (&words[a], &words[b]);
        let (pb, qb) = (&p.bbox, &q.bbox);
        pb.y_min
            .total_cmp(&qb.y_min)
            .then(pb.x_min.total_cmp(&qb.x_min))
            .then(pb.y_max.total_cmp(&qb.y_max))
            .then(pb.x_max.total_cmp(&qb.x_max))
            .then_with(|| kind_key(p).cmp(&kind_key(q)))
            .then(p.clickable.cmp(&q.clickable))
            .then(Ordering::Equal)
    });
    idx
}

/// Everything needed to embed one screen, before any learned weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ScreenInputs {
    pub screen_id: String,
    /// `[n_words, text_dim]` content vectors in token order; `None` without words.
    pub content: Option<Tensor>,
    /// Position buckets per token; token 0 is the full screen.
    pub buckets: Vec<[usize; 6]>,
    /// `[2 G^2]` coverage raster of all Pixel-Words.
    pub raster: Tensor,
    /// Pixel-Word index of token `t + 1`.
    pub word_index: Vec<usize>,
}

impl ScreenInputs {
    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn n_words(&self) -> usize {
        self.word_index.len()
    }

    /// Token holding Pixel-Word `w`, if it survived truncation.
    pub fn token_of(&self, w: usize) -> Option<usize> {
        self.word_index.iter().position(|&i| i == w).map(|p| p + 1)
    }
}

/// Canonically ordered inputs truncated to `max_len` tokens (layout included).
pub fn prepare_screen(screen: &ScreenSentence, embedder: &dyn TextEmbedder, grid: usize, max_len: usize) -> ScreenInputs {
    let (w, h) = (f64::from(screen.screen_width), f64::from(screen.screen_height));
    let mut order = reading_order(&screen.pixel_words);
    order.truncate(max_len.saturating_sub(1));
    let mut buckets = vec![position_buckets(&screen.screen_box(), w, h)];
    let mut data = Vec::with_capacity(order.len() * embedder.dim());
    for &i in &order {
        let p = &screen.pixel_words[i];
        buckets.push(position_buckets(&p.bbox, w, h));
        match &p.kind {
            PixelKind::Text(t) => data.extend(embedder.embed(t)),
            PixelKind::Graphic(c) => data.extend(embed_graphic(*c, embedder)),
        }
    }
    let content = (!order.is_empty()).then(|| Tensor::new(vec![order.len(), embedder.dim()], data).expect("one row per word"));
    ScreenInputs {
        screen_id: screen.screen_id.clone(),
        content,
        buckets,
        raster: layout_raster(screen, grid),
        word_index: order,
    }
}
