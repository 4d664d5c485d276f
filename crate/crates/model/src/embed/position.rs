//! 2-D position buckets: `(x_min, y_min, x_max, y_max, w, h)` each mapped to
//! `0..=1000` relative to the screen.

use pw2ss_core::BBox;
use pw2ss_nn::Tensor;

pub const BUCKETS: usize = 1001;
pub const POSITION_FIELDS: [&str; 6] = ["x_min", "y_min", "x_max", "y_max", "w", "h"];

/// `floor(1000 * value / extent)` clamped to `0..=1000`.
pub fn quantize(value: f64, extent: f64) -> usize {
    let q = (1000.0 * value / extent).floor();
    if q.is_nan() || q <= 0.0 {
        0
    } else {
        (q as usize).min(BUCKETS - 1)
    }
}

pub fn position_buckets(b: &BBox, screen_w: f64, screen_h: f64) -> [usize; 6] {
    [
        quantize(b.x_min, screen_w),
        quantize(b.y_min, screen_h),
        quantize(b.x_max, screen_w),
        quantize(b.y_max, screen_h),
        quantize(b.width(), screen_w),
        quantize(b.height(), screen_h),
    ]
}

/// Sum of the six table rows selected by the box's buckets.
pub fn position_embedding(b: &BBox, screen_w: f64, screen_h: f64, tables: &[&Tensor; 6]) -> Vec<f64> {
    let buckets = position_buckets(b, screen_w, screen_h);
    let mut out = vec![0.0; tables[0].cols()];
    for (t, &k) in tables.iter().zip(&buckets) {
        for (o, v) in out.iter_mut().zip(t.row(k)) {
            *o += v;
        }
    }
    out
}
