//! Finite-difference check of the six-layer model with every head.
//! Shared by the model tests and the acceptance suite.

use pw2ss_core::{BBox, PixelWord, ScreenSentence};
use pw2ss_model::embed::position::POSITION_FIELDS;
use pw2ss_model::transformer::model::Net;
use pw2ss_model::transformer::MaskPlan;
use pw2ss_model::{prepare_screen, HashedTrigramEmbedder, ScreenInputs, ScreenTransformer, ScreenTransformerConfig, TaskLabels};
use pw2ss_nn::gradcheck::{grad_check_params, relative_error, GradCheckConfig};
use pw2ss_nn::init::named_rng;
use pw2ss_nn::{Tape, Tensor, Var};
use rand::Rng;

pub const TOLERANCE: f64 = 1e-5;
/// Five-point stencil step: the two-point rule's `h^2` truncation error is
/// visible at 1e-5 through six layer norms, while smaller steps amplify
/// rounding on parameters whose true gradient is zero (key biases).
pub const STEP: f64 = 1e-4;

pub fn config() -> ScreenTransformerConfig {
    ScreenTransformerConfig {
        layers: 6,
        d_model: 8,
        heads: 2,
        ffn_dim: 16,
        max_len: 8,
        text_dim: 6,
        layout_grid: 2,
        layout_hidden: 4,
        app_classes: 3,
        ..Default::default()
    }
}

/// Layout token plus two Pixel-Words at seed-dependent positions.
pub fn screen(seed: u64) -> ScreenInputs {
    let mut rng = named_rng(seed, "screen");
    let mut word = |text: bool| {
        let x = rng.gen_range(0.0..60.0);
        let y = rng.gen_range(0.0..160.0);
        let b = BBox::new(x, y, x + rng.gen_range(5.0..40.0), y + rng.gen_range(5.0..40.0));
        if text {
            PixelWord::text("open settings", b).unwrap()
        } else {
            PixelWord::graphic(rng.gen_range(0..32), b).unwrap()
        }
    };
    let words = vec![word(true), word(false)];
    prepare_screen(&ScreenSentence::new("g", 100, 200, words), &HashedTrigramEmbedder { dim: 6 }, 2, 8)
}

/// Masked-prediction loss plus all three task losses.
pub fn total_loss<'p>(m: Net<'p>, tape: &mut Tape<'p>, inp: &ScreenInputs, targets: &Tensor) -> pw2ss_model::Result<Var> {
    let plan = MaskPlan { indices: vec![2] };
    let mut loss = m.masked_loss(tape, inp, &plan, targets)?;
    let out = m.forward(tape, inp)?;
    for labels in [
        TaskLabels::Click(vec![(1, true), (2, false)]),
        TaskLabels::Relation(vec![(1, 2, true)]),
        TaskLabels::App(1),
    ] {
        let l = m.task_loss(tape, out, &labels)?;
        loss = tape.add(loss, l)?;
    }
    Ok(loss)
}

/// Sampled coordinates of every trainable parameter over `seeds` seeds.
/// Returns the worst relative error.
pub fn check_sampled(seeds: u64) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let mut model = ScreenTransformer::new(config(), seed).map_err(|e| e.to_string())?;
        let inp = screen(seed);
        let targets = model.pretrain_targets(&inp).map_err(|e| e.to_string())?;
        let ids = model.trainable_ids();
        let cfg = model.cfg;
        let gc = GradCheckConfig {
            h: STEP,
            five_point: true,
            tolerance: TOLERANCE,
            coords_per_param: 12,
            seed,
            ..Default::default()
        };
        let report = grad_check_params(
            &mut model.store,
            &ids,
            |tape, store| {
                total_loss(Net::new(cfg, store), tape, &inp, &targets).map_err(|e| pw2ss_nn::NnError::InvalidTensor(e.to_string()))
            },
            &gc,
        )
        .map_err(|e| format!("seed {seed}: {e}"))?;
        worst = worst.max(report.max_rel_err);
        if !report.passed {
            return Err(format!("seed {seed}: {:?}", report.worst()));
        }
    }
    Ok(worst)
}

/// Sampled coordinates rarely land on the few position rows a screen uses,
/// so those rows are checked exhaustively.
pub fn check_position_rows(seeds: u64) -> Result<f64, String> {
    let h = STEP;
    let mut worst = 0.0f64;
    for seed in 0..seeds {
        let mut model = ScreenTransformer::new(config(), seed).unwrap();
        let inp = screen(seed);
        let targets = model.pretrain_targets(&inp).unwrap();
        let eval = |m: &ScreenTransformer| {
            let mut tape = Tape::new();
            let l = total_loss(m.net(), &mut tape, &inp, &targets).unwrap();
            tape.value(l).item()
        };
        let grads = {
            let mut tape = Tape::new();
            let l = total_loss(model.net(), &mut tape, &inp, &targets).unwrap();
            tape.backward(l).unwrap()
        };
        for (f, field) in POSITION_FIELDS.iter().enumerate() {
            let id = model.id(&format!("embed.pos.{field}")).unwrap();
            let g = grads.param_grad(id).unwrap();
            let mut rows: Vec<usize> = inp.buckets.iter().map(|b| b[f]).collect();
            rows.sort_unstable();
            rows.dedup();
            for r in rows {
                for c in 0..model.cfg.d_model {
                    let k = r * model.cfg.d_model + c;
                    let orig = model.store.value(id).data()[k];
                    let mut at = |off: f64| {
                        model.store.get_mut(id).value.data_mut()[k] = orig + off * h;
                        let v = eval(&model);
                        model.store.get_mut(id).value.data_mut()[k] = orig;
                        v
                    };
                    let numeric = (8.0 * (at(1.0) - at(-1.0)) - (at(2.0) - at(-2.0))) / (12.0 * h);
                    let err = relative_error(g.data()[k], numeric, 1e-4);
                    worst = worst.max(err);
                    if err >= TOLERANCE {
                        return Err(format!("{field}[{r},{c}] seed {seed}: {} vs {numeric}", g.data()[k]));
                    }
                }
            }
        }
    }
    Ok(worst)
}
