//! RGB screenshots stored as binary PPM (`P6`, maxval 255).

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::BBox;

pub type Rgb = [u8; 3];

pub const WHITE: Rgb = [255, 255, 255];

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("malformed PPM: {0}")]
    Malformed(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    pixels: Vec<Rgb>,
}

impl Raster {
    pub fn filled(width: u32, height: u32, color: Rgb) -> Self {
        assert!(width > 0 && height > 0, "raster needs positive size");
        Self {
            width,
            height,
            pixels: vec![color; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, c: Rgb) {
        let w = self.width as usize;
        self.pixels[y as usize * w + x as usize] = c;
    }

    /// Integer pixel span `[x0, x1) x [y0, y1)` covered by a box after clamping.
    pub fn pixel_span(&self, b: &BBox) -> (u32, u32, u32, u32) {
        let cx = |v: f64| v.floor().clamp(0.0, f64::from(self.width)) as u32;
        let cy = |v: f64| v.floor().clamp(0.0, f64::from(self.height)) as u32;
        let cx1 = |v: f64| v.ceil().clamp(0.0, f64::from(self.width)) as u32;
        let cy1 = |v: f64| v.ceil().clamp(0.0, f64::from(self.height)) as u32;
        (cx(b.x_min), cy(b.y_min), cx1(b.x_max), cy1(b.y_max))
    }

    pub fn fill_rect(&mut self, b: &BBox, c: Rgb) {
        let (x0, y0, x1, y1) = self.pixel_span(b);
        for y in y0..y1 {
            for x in x0..x1 {
                self.set(x, y, c);
            }
        }
    }

    /// Filled ellipse inscribed in `b`.
    pub fn fill_ellipse(&mut self, b: &BBox, c: Rgb) {
        let (x0, y0, x1, y1) = self.pixel_span(b);
        let (cx, cy) = b.center();
        let (rx, ry) = (b.width() / 2.0, b.height() / 2.0);
        if rx <= 0.0 || ry <= 0.0 {
            return;
        }
        for y in y0..y1 {
            for x in x0..x1 {
                let dx = (f64::from(x) + 0.5 - cx) / rx;
                let dy = (f64::from(y) + 0.5 - cy) / ry;
                if dx * dx + dy * dy <= 1.0 {
                    self.set(x, y, c);
                }
            }
        }
    }

    /// Horizontal stripes of height `stripe` alternating `c` and untouched rows.
    pub fn fill_stripes(&mut self, b: &BBox, c: Rgb, stripe: u32) {
        let (x0, y0, x1, y1) = self.pixel_span(b);
        let stripe = stripe.max(1);
        for y in y0..y1 {
            if ((y - y0) / stripe) % 2 == 0 {
                for x in x0..x1 {
                    self.set(x, y, c);
                }
            }
        }
    }

    /// Most frequent color; ties go to the smallest packed `0xRRGGBB`.
    pub fn background(&self) -> Rgb {
        let mut counts: HashMap<Rgb, usize> = HashMap::new();
        for &p in &self.pixels {
            *counts.entry(p).or_default() += 1;
        }
        let pack = |c: &Rgb| (u32::from(c[0]) << 16) | (u32::from(c[1]) << 8) | u32::from(c[2]);
        counts
            .into_iter()
            .max_by(|(a, na), (b, nb)| na.cmp(nb).then_with(|| pack(b).cmp(&pack(a))))
            .map(|(c, _)| c)
            .expect("raster is non-empty")
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self, RasterError> {
        let bad = |m: &str| RasterError::Malformed(m.to_string());
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            // whitespace and comments between header tokens
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
        }
        if fields[0] != "P6" {
            return Err(bad("only binary P6 is supported"));
        }
        let num = |s: &str| s.parse::<u32>().map_err(|_| bad("bad header number"));
        let (w, h, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        if w == 0 || h == 0 {
            return Err(bad("zero-sized image"));
        }
        if maxval != 255 {
            return Err(bad("maxval must be 255"));
        }
        pos += 1;
        let n = w as usize * h as usize;
        let body = bytes.get(pos..pos + 3 * n).ok_or_else(|| bad("truncated pixel data"))?;
        let pixels = body.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Ok(Self {
            width: w,
            height: h,
            pixels,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        let path = path.as_ref();
        fs::write(path, self.to_ppm()).map_err(|source| RasterError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|source| RasterError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_ppm(&bytes)
    }
}
