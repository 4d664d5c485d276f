use serde::{Deserialize, Serialize};

use super::LabelGenError;
use crate::raster::{Raster, Rgb};
use crate::BBox;

pub const FEATURE_DIM: usize = 6;

/// `[relative area, aspect w/h, mean luminance, luminance variance,
/// edge density, non-background fraction]`, luminance scaled to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PatchFeatures(pub [f64; FEATURE_DIM]);

impl PatchFeatures {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn rel_area(&self) -> f64 {
        self.0[0]
    }

    pub fn aspect(&self) -> f64 {
        self.0[1]
    }

    pub fn mean_luminance(&self) -> f64 {
        self.0[2]
    }

    pub fn luminance_variance(&self) -> f64 {
        self.0[3]
    }

    pub fn edge_density(&self) -> f64 {
        self.0[4]
    }

    pub fn foreground_fraction(&self) -> f64 {
        self.0[5]
    }
}

fn luminance(c: Rgb) -> f64 {
    (0.299 * f64::from(c[0]) + 0.587 * f64::from(c[1]) + 0.114 * f64::from(c[2])) / 255.0
}

/// Features of the patch under `bbox`, with the screenshot's most frequent
/// color as background.
pub fn patch_features(raster: &Raster, bbox: &BBox) -> Result<PatchFeatures, LabelGenError> {
    patch_features_with_background(raster, raster.background(), bbox)
}

/// [`patch_features`] with a precomputed background color.
pub fn patch_features_with_background(raster: &Raster, bg: Rgb, bbox: &BBox) -> Result<PatchFeatures, LabelGenError> {
    let (x0, y0, x1, y1) = raster.pixel_span(bbox);
    if x1 <= x0 || y1 <= y0 {
        return Err(LabelGenError::EmptyPatch);
    }
    let (w, h) = ((x1 - x0) as usize, (y1 - y0) as usize);
    let n = (w * h) as f64;
    let mut lum = Vec::with_capacity(w * h);
    let mut foreground = 0usize;
    for y in y0..y1 {
        for x in x0..x1 {
            let c = raster.get(x, y);
            lum.push(luminance(c));
            if c != bg {
                foreground += 1;
            }
        }
    }
    let mean = lum.iter().sum::<f64>() / n;
    let var = lum.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let mut grad = 0.0;
    for r in 0..h {
        for c in 0..w {
            let v = lum[r * w + c];
            if c + 1 < w {
                grad += (lum[r * w + c + 1] - v).abs();
            }
            if r + 1 < h {
                grad += (lum[(r + 1) * w + c] - v).abs();
            }
        }
    }
    let screen = f64::from(raster.width()) * f64::from(raster.height());
    Ok(PatchFeatures([
        n / screen,
        w as f64 / h as f64,
        mean,
        var,
        grad / n,
        foreground as f64 / n,
    ]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::WHITE;

    #[test]
    fn constant_patch() {
        let r = Raster::filled(20, 20, WHITE);
        let f = patch_features(&r, &BBox::new(0.0, 0.0, 10.0, 10.0)).unwrap();
        assert_eq!(f.luminance_variance(), 0.0);
        assert_eq!(f.edge_density(), 0.0);
        assert_eq!(f.foreground_fraction(), 0.0);
        assert_eq!(f.rel_area(), 0.25);
    }

    #[test]
    fn half_black_patch() {
        let mut r = Raster::filled(20, 20, WHITE);
        r.fill_rect(&BBox::new(0.0, 0.0, 5.0, 10.0), [0, 0, 0]);
        let f = patch_features(&r, &BBox::new(0.0, 0.0, 10.0, 10.0)).unwrap();
        assert_eq!(f.foreground_fraction(), 0.5);
        assert!((f.mean_luminance() - 0.5).abs() < 1e-12);
        assert!((f.luminance_variance() - 0.25).abs() < 1e-12);
        // one vertical edge of height 10 over 100 pixels
        assert!((f.edge_density() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn full_screen_and_empty() {
        let r = Raster::filled(8, 6, WHITE);
        let f = patch_features(&r, &BBox::new(0.0, 0.0, 8.0, 6.0)).unwrap();
        assert_eq!(f.rel_area(), 1.0);
        assert!((f.aspect() - 8.0 / 6.0).abs() < 1e-15);
        assert_eq!(
            patch_features(&r, &BBox::new(10.0, 10.0, 20.0, 20.0)),
            Err(LabelGenError::EmptyPatch)
        );
        assert_eq!(
            patch_features(&r, &BBox::new(2.0, 2.0, 2.0, 5.0)),
            Err(LabelGenError::EmptyPatch)
        );
    }
}
