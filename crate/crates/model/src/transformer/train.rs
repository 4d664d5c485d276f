//! Masked Pixel-Words pretraining and downstream fine-tuning loops.

use pw2ss_nn::init::named_rng;
use pw2ss_nn::{lr_schedule, AdamW, OptimizerConfig, Tape, Tensor, Var};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::heads::TaskExample;
use super::model::{Net, ScreenTransformer};
use crate::embed::tokens::ScreenInputs;
use crate::error::{ModelError, Result};

/// Token indices to mask, sorted, never the layout token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskPlan {
    pub indices: Vec<usize>,
}

/// `k = max(1, round(ratio * (n - 1)))` tokens drawn without replacement from `1..n`.
pub fn plan_mask(n_tokens: usize, mask_ratio: f64, rng: &mut impl Rng) -> Result<MaskPlan> {
    if n_tokens < 2 {
        return Err(ModelError::NoMaskableTokens(n_tokens));
    }
    let words = n_tokens - 1;
    let k = ((mask_ratio * words as f64).round() as usize).clamp(1, words);
    let mut indices: Vec<usize> = sample(rng, words, k).into_iter().map(|i| i + 1).collect();
    indices.sort_unstable();
    Ok(MaskPlan { indices })
}

impl<'s> Net<'s> {
    /// Regression targets: the projected content of every word token, `[n_words, d]`.
    pub fn targets(&self, inp: &ScreenInputs) -> Result<Tensor> {
        let mut tape = Tape::new();
        let proj = self
            .project_content(&mut tape, inp)?
            .ok_or(ModelError::NoMaskableTokens(inp.len()))?;
        Ok(tape.value(proj).clone())
    }

    /// Mean squared L2 distance between predictions and `targets` over the
    /// masked tokens only.
    pub fn masked_loss(
        &self,
        tape: &mut Tape<'s>,
        inp: &ScreenInputs,
        plan: &MaskPlan,
        targets: &Tensor,
    ) -> Result<Var> {
        if let Some(&bad) = plan.indices.iter().find(|&&i| i == 0 || i >= inp.len()) {
            return Err(ModelError::TokenOutOfRange(bad, inp.len()));
        }
        let tokens = self.build_tokens(tape, inp, &plan.indices)?;
        let out = self.encode(tape, tokens, false)?.outputs;
        let picked = tape.gather_rows(out, &plan.indices)?;
        let pred = self.linear(tape, picked, "head.pretrain.w", "head.pretrain.b")?;
        let rows: Vec<usize> = plan.indices.iter().map(|i| i - 1).collect();
        let all = tape.constant(targets.clone());
        let target = tape.gather_rows(all, &rows)?;
        Ok(tape.l2_loss(pred, target)?)
    }

    /// Masked-prediction loss of one screen with its own detached targets.
    pub fn pretrain_loss(&self, tape: &mut Tape<'s>, inp: &ScreenInputs, plan: &MaskPlan) -> Result<Var> {
        let targets = self.targets(inp)?;
        self.masked_loss(tape, inp, plan, &targets)
    }
}

impl ScreenTransformer {
    /// Regression targets: the projected content of every word token, `[n_words, d]`.
    pub fn pretrain_targets(&self, inp: &ScreenInputs) -> Result<Tensor> {
        self.net().targets(inp)
    }

    /// Mean masked loss over `screens` with masks drawn from `seed`; no update.
    pub fn pretrain_eval_loss(&self, screens: &[ScreenInputs], seed: u64) -> Result<f64> {
        let mut rng = named_rng(seed, "eval_mask");
        let mut total = 0.0;
        let mut n = 0;
        for inp in screens.iter().filter(|s| s.len() >= 2) {
            let plan = plan_mask(inp.len(), self.cfg.mask_ratio, &mut rng)?;
            let mut tape = Tape::new();
            let l = self.net().pretrain_loss(&mut tape, inp, &plan)?;
            total += tape.value(l).item();
            n += 1;
        }
        if n == 0 {
            return Err(ModelError::DegenerateDataset);
        }
        Ok(total / n as f64)
    }
}

/// Schedule, batching and seed of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub seed: u64,
    /// Train only the task head, keeping embeddings and encoder fixed.
    pub freeze_backbone: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            epochs: 50,
            seed: 0,
            freeze_backbone: false,
        }
    }
}

/// Mean batch loss at every optimizer step, in order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss_curve: Vec<f64>,
    pub steps: usize,
    pub train_accuracy: Option<f64>,
}

/// Shared mini-batch loop: shuffles indices per epoch, averages per-example
/// gradients over each batch and applies one AdamW step per batch.
fn run_batches<F>(model: &mut ScreenTransformer, n: usize, cfg: &TrainConfig, opt: &mut AdamW, mut loss_of: F) -> Result<Vec<f64>>
where
    F: for<'p> FnMut(Net<'p>, &mut Tape<'p>, usize) -> Result<Var>,
{
    cfg.optimizer.validate().map_err(ModelError::InvalidConfig)?;
    let bs = cfg.optimizer.batch_size.min(n.max(1));
    let steps_per_epoch = n.div_ceil(bs);
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle = named_rng(cfg.seed, "shuffle");
    let mut curve = Vec::with_capacity(cfg.epochs * steps_per_epoch);
    let mut step = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        for batch in order.chunks(bs) {
            step += 1;
            model.store.zero_grads();
            let scale = 1.0 / batch.len() as f64;
            let mut total = 0.0;
            for &i in batch {
                let grads = {
                    let mut tape = Tape::new();
                    let l = loss_of(model.net(), &mut tape, i)?;
                    total += tape.value(l).item();
                    tape.backward(l)?
                };
                grads.accumulate_scaled(&mut model.store, scale)?;
            }
            curve.push(total * scale);
            opt.step(&mut model.store, lr_schedule(step, steps_per_epoch, &cfg.optimizer));
        }
    }
    Ok(curve)
}

/// Masked Pixel-Words pretraining. Screens without Pixel-Words are skipped.
pub fn pretrain(model: &mut ScreenTransformer, screens: &[ScreenInputs], cfg: &TrainConfig) -> Result<(TrainReport, AdamW)> {
    let usable: Vec<&ScreenInputs> = screens.iter().filter(|s| s.len() >= 2).collect();
    if usable.is_empty() {
        return Err(ModelError::DegenerateDataset);
    }
    let mut opt = AdamW::new(cfg.optimizer.clone());
    let mut mask_rng = named_rng(cfg.seed, "mask");
    let ratio = model.cfg.mask_ratio;
    let curve = run_batches(model, usable.len(), cfg, &mut opt, |m, tape, i| {
        let plan = plan_mask(usable[i].len(), ratio, &mut mask_rng)?;
        m.pretrain_loss(tape, usable[i], &plan)
    })?;
    let steps = curve.len();
    Ok((
        TrainReport {
            loss_curve: curve,
            steps,
            train_accuracy: None,
        },
        opt,
    ))
}

/// Fine-tunes on labeled examples of a single task with cross-entropy.
pub fn train_task(model: &mut ScreenTransformer, examples: &[TaskExample], cfg: &TrainConfig) -> Result<(TrainReport, AdamW)> {
    let Some(first) = examples.first() else {
        return Err(ModelError::DegenerateDataset);
    };
    let task = first.labels.task();
    if examples.iter().any(|e| e.labels.task() != task || e.labels.count() == 0) {
        return Err(ModelError::DegenerateDataset);
    }
    if cfg.freeze_backbone {
        model.set_backbone_frozen(true);
    }
    let mut opt = AdamW::new(cfg.optimizer.clone());
    let result = run_batches(model, examples.len(), cfg, &mut opt, |m, tape, i| {
        let o = m.forward(tape, &examples[i].inputs)?;
        m.task_loss(tape, o, &examples[i].labels)
    });
    if cfg.freeze_backbone {
        model.set_backbone_frozen(false);
    }
    let curve = result?;
    let acc = model.accuracy(examples)?;
    let steps = curve.len();
    Ok((
        TrainReport {
            loss_curve: curve,
            steps,
            train_accuracy: Some(acc),
        },
        opt,
    ))
}
