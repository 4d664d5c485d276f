use pw2ss_nn::init::{named_rng, uniform};
use pw2ss_nn::{AdamW, OptimizerConfig, ParamStore, Tape, Tensor};
use serde::{Deserialize, Serialize};

use super::{LabelGenError, PatchFeatures};

/// Anything that maps patch features to a graphic probability.
pub trait ProposalScorer {
    fn score(&self, features: &PatchFeatures) -> f64;
}

impl<F: Fn(&PatchFeatures) -> f64> ProposalScorer for F {
    fn score(&self, features: &PatchFeatures) -> f64 {
        self(features)
    }
}

/// Logistic regression over standardized features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        let mut z = self.bias;
        for (((&v, &m), &s), &w) in x.iter().zip(&self.mean).zip(&self.std).zip(&self.weights) {
            z += w * (v - m) / s;
        }
        z
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        let z = self.logit(x);
        if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        }
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.logit(x) > 0.0)
    }

    pub fn accuracy(&self, samples: &[(Vec<f64>, u8)]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let hits = samples.iter().filter(|(x, y)| self.predict(x) == *y).count();
        hits as f64 / samples.len() as f64
    }
}

impl ProposalScorer for LogisticModel {
    fn score(&self, features: &PatchFeatures) -> f64 {
        self.probability(features.as_slice())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainReport {
    pub loss_curve: Vec<f64>,
    pub train_accuracy: f64,
}

const CLF_LR: f64 = 0.05;

/// Full-batch logistic regression with AdamW on the tape. Features are
/// standardized with the training mean and standard deviation.
pub fn train_proposal_classifier(
    samples: &[(Vec<f64>, u8)],
    epochs: usize,
    seed: u64,
) -> Result<(LogisticModel, TrainReport), LabelGenError> {
    let dim = samples.first().map_or(0, |(x, _)| x.len());
    if let Some((x, _)) = samples.iter().find(|(x, _)| x.len() != dim) {
        return Err(LabelGenError::FeatureWidth {
            expected: dim,
            found: x.len(),
        });
    }
    let positives = samples.iter().filter(|(_, y)| *y == 1).count();
    if positives == 0 || positives == samples.len() || dim == 0 {
        return Err(LabelGenError::DegenerateDataset(samples.first().map_or(0, |s| s.1)));
    }
    let n = samples.len() as f64;
    let mut mean = vec![0.0; dim];
    for (x, _) in samples {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / n;
        }
    }
    let mut std = vec![0.0; dim];
    for (x, _) in samples {
        for ((s, v), m) in std.iter_mut().zip(x).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in &mut std {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }
    let mut z = Vec::with_capacity(samples.len() * dim);
    for (x, _) in samples {
        z.extend(x.iter().zip(&mean).zip(&std).map(|((v, m), s)| (v - m) / s));
    }
    let xs = Tensor::new(vec![samples.len(), dim], z).expect("rectangular samples");
    let labels: Vec<f64> = samples.iter().map(|(_, y)| f64::from(*y)).collect();

    let mut store = ParamStore::new();
    let mut rng = named_rng(seed, "clf.w");
    let w = store.add("clf.w", uniform(&mut rng, &[dim, 1], 0.1)).expect("fresh store");
    let b = store.add("clf.b", Tensor::zeros(&[1])).expect("fresh store");
    let mut opt = AdamW::new(OptimizerConfig {
        lr: CLF_LR,
        weight_decay: 0.0,
        eps: 1e-8,
        ..Default::default()
    });
    let mut loss_curve = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        store.zero_grads();
        let grads = {
            let mut tape = Tape::new();
            let x = tape.constant(xs.clone());
            let (wv, bv) = (tape.param(&store, w), tape.param(&store, b));
            let logits = tape.linear(x, wv, bv).expect("matching widths");
            let loss = tape.bce_with_logits(logits, &labels).expect("one label per row");
            loss_curve.push(tape.value(loss).item());
            tape.backward(loss).expect("scalar loss")
        };
        grads.accumulate_into(&mut store).expect("same shapes");
        opt.step(&mut store, CLF_LR);
    }
    let model = LogisticModel {
        mean,
        std,
        weights: store.value(w).data().to_vec(),
        bias: store.value(b).item(),
    };
    let train_accuracy = model.accuracy(samples);
    Ok((
        model,
        TrainReport {
            loss_curve,
            train_accuracy,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use pw2ss_nn::init::named_rng;
    use rand::Rng;

    /// 20 points labeled by the side of `a + b = 1`, none within 0.2 of the line.
    fn toy() -> Vec<(Vec<f64>, u8)> {
        let mut rng = named_rng(3, "toy");
        let mut out = Vec::new();
        while out.len() < 20 {
            let a: f64 = rng.gen_range(0.0..1.0);
            let b: f64 = rng.gen_range(0.0..1.0);
            if (a + b - 1.0).abs() > 0.2 {
                out.push((vec![a, b], u8::from(a + b > 1.0)));
            }
        }
        out
    }

    #[test]
    fn separable_toy_set() {
        let data = toy();
        let (model, report) = train_proposal_classifier(&data, 300, 0).unwrap();
        assert_eq!(report.train_accuracy, 1.0);
        // every positive logit is above every negative one
        let lo_pos = data.iter().filter(|s| s.1 == 1).map(|s| model.logit(&s.0)).fold(f64::INFINITY, f64::min);
        let hi_neg = data.iter().filter(|s| s.1 == 0).map(|s| model.logit(&s.0)).fold(f64::NEG_INFINITY, f64::max);
        assert!(hi_neg < 0.0 && lo_pos > 0.0);
    }

    #[test]
    fn single_class_is_degenerate() {
        let data = vec![(vec![0.0, 1.0], 1), (vec![1.0, 0.0], 1)];
        assert_eq!(
            train_proposal_classifier(&data, 10, 0).unwrap_err(),
            LabelGenError::DegenerateDataset(1)
        );
    }

    #[test]
    fn deterministic() {
        let data = toy();
        let a = train_proposal_classifier(&data, 50, 9).unwrap().0;
        let b = train_proposal_classifier(&data, 50, 9).unwrap().0;
        assert_eq!(a, b);
    }
}
