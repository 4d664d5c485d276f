//! Layout embedding: a coverage raster of the Pixel-Word boxes squeezed
//! through the encoder half of a small autoencoder.

use pw2ss_core::{BBox, ScreenSentence};
use pw2ss_nn::init::{named_rng, xavier_uniform};
use pw2ss_nn::{AdamW, OptimizerConfig, ParamId, ParamStore, Tape, Tensor, Var};

use crate::error::{ModelError, Result};

pub const DEFAULT_GRID: usize = 32;
pub const DEFAULT_HIDDEN: usize = 256;

/// Area of the union of axis-aligned rectangles (all inside one cell).
fn union_area(rects: &[BBox]) -> f64 {
    match rects {
        [] => 0.0,
        [r] => r.area(),
        _ => {
            let mut xs: Vec<f64> = rects.iter().flat_map(|r| [r.x_min, r.x_max]).collect();
            let mut ys: Vec<f64> = rects.iter().flat_map(|r| [r.y_min, r.y_max]).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            ys.sort_by(f64::total_cmp);
            ys.dedup();
            let mut area = 0.0;
            for xw in xs.windows(2) {
                for yw in ys.windows(2) {
                    let (cx, cy) = ((xw[0] + xw[1]) / 2.0, (yw[0] + yw[1]) / 2.0);
                    if rects.iter().any(|r| r.contains_point(cx, cy)) {
                        area += (xw[1] - xw[0]) * (yw[1] - yw[0]);
                    }
                }
            }
            area
        }
    }
}

/// `[2 * G * G]` grid, channel-major: channel 0 text, channel 1 graphics;
/// each cell holds the fraction of its area covered by that channel's boxes.
pub fn layout_raster(screen: &ScreenSentence, grid: usize) -> Tensor {
    assert!(grid >= 2, "layout grid must be at least 2");
    let (w, h) = (f64::from(screen.screen_width), f64::from(screen.screen_height));
    let (cw, ch) = (w / grid as f64, h / grid as f64);
    let mut cells: Vec<Vec<BBox>> = vec![Vec::new(); 2 * grid * grid];
    for pw in &screen.pixel_words {
        let channel = usize::from(pw.is_graphic());
        let b = pw.bbox.clamp_to(w, h);
        let c0 = ((b.x_min / cw).floor() as usize).min(grid - 1);
        let c1 = ((b.x_max / cw).ceil() as usize).min(grid);
        let r0 = ((b.y_min / ch).floor() as usize).min(grid - 1);
        let r1 = ((b.y_max / ch).ceil() as usize).min(grid);
        for r in r0..r1 {
            for c in c0..c1 {
                let cell = BBox::new(c as f64 * cw, r as f64 * ch, (c + 1) as f64 * cw, (r + 1) as f64 * ch);
                if let Some(part) = cell.intersection(&b) {
                    cells[channel * grid * grid + r * grid + c].push(part);
                }
            }
        }
    }
    let cell_area = cw * ch;
    let data = cells
        .iter()
        .map(|rs| (union_area(rs) / cell_area).clamp(0.0, 1.0))
        .collect();
    Tensor::new(vec![2 * grid * grid], data).expect("grid is non-empty")
}

#[derive(Clone, Copy, Debug)]
struct Ids {
    ew1: ParamId,
    eb1: ParamId,
    ew2: ParamId,
    eb2: ParamId,
    dw1: ParamId,
    db1: ParamId,
    dw2: ParamId,
    db2: ParamId,
}

/// `2G^2 -> hidden -> d_model` encoder with a mirrored decoder.
#[derive(Clone, Debug)]
pub struct LayoutAutoencoder {
    pub grid: usize,
    pub hidden: usize,
    pub d_model: usize,
    pub store: ParamStore,
    ids: Ids,
}

pub const ENCODER_PARAMS: [&str; 4] = ["layout.enc.w1", "layout.enc.b1", "layout.enc.w2", "layout.enc.b2"];

/// Encoder forward on a tape; `x` is `[n, 2G^2]`.
pub(crate) fn encoder_forward<'p>(tape: &mut Tape<'p>, store: &'p ParamStore, x: Var) -> Result<Var> {
    let id = |n: &str| store.id(n).ok_or_else(|| pw2ss_nn::NnError::MissingParameter(n.to_string()));
    let [w1, b1, w2, b2] = ENCODER_PARAMS.map(|n| id(n));
    let (w1, b1, w2, b2) = (
        tape.param(store, w1?),
        tape.param(store, b1?),
        tape.param(store, w2?),
        tape.param(store, b2?),
    );
    let h = tape.linear(x, w1, b1)?;
    let h = tape.gelu(h);
    Ok(tape.linear(h, w2, b2)?)
}

/// Layout embedding of one raster using the `layout.enc.*` weights in `store`.
pub fn encode_layout(store: &ParamStore, raster: &Tensor) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let x = tape.constant(raster.reshape(&[1, raster.len()])?);
    let z = encoder_forward(&mut tape, store, x)?;
    Ok(tape.value(z).data().to_vec())
}

impl LayoutAutoencoder {
    pub fn new(grid: usize, hidden: usize, d_model: usize, seed: u64) -> Self {
        let input = 2 * grid * grid;
        let mut store = ParamStore::new();
        let mut add = |name: &str, shape: &[usize], fan_in: usize, fan_out: usize| {
            let mut rng = named_rng(seed, name);
            let t = if shape.len() == 1 {
                Tensor::zeros(shape)
            } else {
                xavier_uniform(&mut rng, shape, fan_in, fan_out)
            };
            store.add(name, t).expect("unique layout names")
        };
        let ids = Ids {
            ew1: add("layout.enc.w1", &[input, hidden], input, hidden),
            eb1: add("layout.enc.b1", &[hidden], 0, 0),
            ew2: add("layout.enc.w2", &[hidden, d_model], hidden, d_model),
            eb2: add("layout.enc.b2", &[d_model], 0, 0),
            dw1: add("layout.dec.w1", &[d_model, hidden], d_model, hidden),
            db1: add("layout.dec.b1", &[hidden], 0, 0),
            dw2: add("layout.dec.w2", &[hidden, input], hidden, input),
            db2: add("layout.dec.b2", &[input], 0, 0),
        };
        Self {
            grid,
            hidden,
            d_model,
            store,
            ids,
        }
    }

    pub fn embed(&self, raster: &Tensor) -> Result<Vec<f64>> {
        encode_layout(&self.store, raster)
    }

    fn reconstruction_loss<'p>(&'p self, tape: &mut Tape<'p>, batch: &Tensor) -> Result<Var> {
        let x = tape.constant(batch.clone());
        let z = encoder_forward(tape, &self.store, x)?;
        let (w1, b1) = (tape.param(&self.store, self.ids.dw1), tape.param(&self.store, self.ids.db1));
        let (w2, b2) = (tape.param(&self.store, self.ids.dw2), tape.param(&self.store, self.ids.db2));
        let h = tape.linear(z, w1, b1)?;
        let h = tape.gelu(h);
        let y = tape.linear(h, w2, b2)?;
        Ok(tape.mse_loss(y, x)?)
    }

    /// Mean squared reconstruction error over `rasters`.
    pub fn loss(&self, rasters: &[Tensor]) -> Result<f64> {
        let batch = stack(rasters)?;
        let mut tape = Tape::new();
        let l = self.reconstruction_loss(&mut tape, &batch)?;
        Ok(tape.value(l).item())
    }

    /// Ids of the encoder half, in [`ENCODER_PARAMS`] order.
    pub fn encoder_ids(&self) -> [ParamId; 4] {
        [self.ids.ew1, self.ids.eb1, self.ids.ew2, self.ids.eb2]
    }
}

fn stack(rasters: &[Tensor]) -> Result<Tensor> {
    let first = rasters.first().ok_or(ModelError::DegenerateDataset)?;
    let mut data = Vec::with_capacity(rasters.len() * first.len());
    for r in rasters {
        if r.len() != first.len() {
            return Err(ModelError::InvalidConfig("rasters differ in size".into()));
        }
        data.extend_from_slice(r.data());
    }
    Ok(Tensor::new(vec![rasters.len(), first.len()], data)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AutoencoderTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for AutoencoderTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 1e-3,
            seed: 0,
        }
    }
}

/// Full-batch AdamW on mean squared reconstruction error. Returns the model
/// and the loss before each epoch's update.
pub fn train_layout_autoencoder(
    rasters: &[Tensor],
    grid: usize,
    hidden: usize,
    d_model: usize,
    cfg: &AutoencoderTrainConfig,
) -> Result<(LayoutAutoencoder, Vec<f64>)> {
    let batch = stack(rasters)?;
    if batch.cols() != 2 * grid * grid {
        return Err(ModelError::InvalidConfig(format!(
            "raster width {} does not match grid {grid}",
            batch.cols()
        )));
    }
    let mut ae = LayoutAutoencoder::new(grid, hidden, d_model, cfg.seed);
    let mut opt = AdamW::new(OptimizerConfig {
        lr: cfg.lr,
        weight_decay: 0.0,
        ..Default::default()
    });
    let mut curve = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        ae.store.zero_grads();
        let grads = {
            let mut tape = Tape::new();
            let l = ae.reconstruction_loss(&mut tape, &batch)?;
            curve.push(tape.value(l).item());
            tape.backward(l)?
        };
        grads.accumulate_into(&mut ae.store)?;
        opt.step(&mut ae.store, cfg.lr);
    }
    Ok((ae, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use pw2ss_core::PixelWord;

    fn screen(words: Vec<PixelWord>) -> ScreenSentence {
        ScreenSentence::new("s", 100, 100, words)
    }

    #[test]
    fn raster_examples() {
        assert!(layout_raster(&screen(vec![]), 4).data().iter().all(|&v| v == 0.0));

        let full = PixelWord::text("all", BBox::new(0.0, 0.0, 100.0, 100.0)).unwrap();
        let r = layout_raster(&screen(vec![full]), 4);
        assert!(r.data()[..16].iter().all(|&v| v == 1.0));
        assert!(r.data()[16..].iter().all(|&v| v == 0.0));

        let quarter = PixelWord::graphic(0, BBox::new(0.0, 0.0, 50.0, 50.0)).unwrap();
        let r = layout_raster(&screen(vec![quarter]), 2);
        assert_eq!(&r.data()[4..], &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn coverage_matches_area() {
        let words = vec![
            PixelWord::text("a", BBox::new(3.0, 7.0, 41.5, 19.0)).unwrap(),
            PixelWord::text("b", BBox::new(50.0, 60.0, 97.0, 99.0)).unwrap(),
        ];
        let g = 8;
        let r = layout_raster(&screen(words), g);
        let cell = (100.0 / g as f64) * (100.0 / g as f64);
        let covered: f64 = r.data()[..g * g].iter().map(|v| v * cell).sum();
        let truth = 38.5 * 12.0 + 47.0 * 39.0;
        assert!((covered - truth).abs() < 1e-9);
    }

    #[test]
    fn overlapping_boxes_count_once() {
        let words = vec![
            PixelWord::graphic(0, BBox::new(0.0, 0.0, 50.0, 50.0)).unwrap(),
            PixelWord::graphic(1, BBox::new(25.0, 0.0, 50.0, 50.0)).unwrap(),
        ];
        let r = layout_raster(&screen(words), 2);
        assert_eq!(r.data()[4], 1.0);
    }

    #[test]
    fn zero_raster_is_bias_path() {
        let ae = LayoutAutoencoder::new(2, 3, 4, 5);
        let z = ae.embed(&Tensor::zeros(&[8])).unwrap();
        assert_eq!(z, ae.embed(&Tensor::zeros(&[8])).unwrap());
        // biases start at zero and gelu(0) = 0
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn training_reduces_loss() {
        let rasters: Vec<Tensor> = (0..16)
            .map(|i| {
                let f = i as f64;
                let b = BBox::new(5.0 * (i % 4) as f64, 4.0 * f, 40.0 + f, 10.0 + 5.0 * f);
                let w = if i % 2 == 0 {
                    PixelWord::text("t", b).unwrap()
                } else {
                    PixelWord::graphic(3, b).unwrap()
                };
                layout_raster(&screen(vec![w]), 8)
            })
            .collect();
        let cfg = AutoencoderTrainConfig {
            epochs: 300,
            lr: 3e-3,
            seed: 1,
        };
        let (ae, curve) = train_layout_autoencoder(&rasters, 8, 32, 16, &cfg).unwrap();
        let last = ae.loss(&rasters).unwrap();
        assert!(last < 0.1 * curve[0], "{} -> {last}", curve[0]);
        assert!(matches!(
            train_layout_autoencoder(&[], 8, 32, 16, &cfg),
            Err(ModelError::DegenerateDataset)
        ));
    }
}
