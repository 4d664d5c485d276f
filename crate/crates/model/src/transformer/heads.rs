//! Downstream heads: clickability, pairwise relation, app type, and the
//! max-pooled screen representation.

use pw2ss_core::ScreenSentence;
use pw2ss_nn::{Tape, Tensor, Var};

use super::model::{Net, ScreenTransformer};
use crate::embed::tokens::ScreenInputs;
use crate::error::{ModelError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Click,
    Relation,
    App,
}

impl Task {
    pub fn head(self) -> &'static str {
        match self {
            Task::Click => "click",
            Task::Relation => "relation",
            Task::App => "app",
        }
    }
}

/// Supervision of one screen, in token indices.
#[derive(Clone, Debug, PartialEq)]
pub enum TaskLabels {
    /// `(token, clickable)` pairs.
    Click(Vec<(usize, bool)>),
    /// `(i, j, related)` triples.
    Relation(Vec<(usize, usize, bool)>),
    App(usize),
}

impl TaskLabels {
    pub fn task(&self) -> Task {
        match self {
            TaskLabels::Click(_) => Task::Click,
            TaskLabels::Relation(_) => Task::Relation,
            TaskLabels::App(_) => Task::App,
        }
    }

    pub fn count(&self) -> usize {
        match self {
            TaskLabels::Click(v) => v.len(),
            TaskLabels::Relation(v) => v.len(),
            TaskLabels::App(_) => 1,
        }
    }

    /// Labels of `screen` for `task` mapped onto the tokens of `inp`.
    /// Pixel-Words lost to truncation are dropped.
    pub fn from_screen(task: Task, screen: &ScreenSentence, inp: &ScreenInputs) -> Option<Self> {
        match task {
            Task::Click => {
                let v: Vec<_> = screen
                    .pixel_words
                    .iter()
                    .enumerate()
                    .filter_map(|(w, p)| Some((inp.token_of(w)?, p.clickable?)))
                    .collect();
                (!v.is_empty()).then_some(TaskLabels::Click(v))
            }
            Task::Relation => {
                let v: Vec<_> = screen
                    .relations
                    .as_ref()?
                    .iter()
                    .filter_map(|&(i, j, l)| Some((inp.token_of(i)?, inp.token_of(j)?, l != 0)))
                    .collect();
                (!v.is_empty()).then_some(TaskLabels::Relation(v))
            }
            Task::App => screen.app_type.map(TaskLabels::App),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskExample {
    pub inputs: ScreenInputs,
    pub labels: TaskLabels,
}

fn check_token(i: usize, n: usize) -> Result<()> {
    if i == 0 {
        Err(ModelError::LayoutTokenQueried)
    } else if i >= n {
        Err(ModelError::TokenOutOfRange(i, n))
    } else {
        Ok(())
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

impl<'s> Net<'s> {
    /// `d -> d -> d/2 -> out` with gelu between layers.
    pub(crate) fn mlp3(&self, tape: &mut Tape<'s>, head: &str, x: Var) -> Result<Var> {
        let n = |s: &str| format!("head.{head}.{s}");
        let h = self.linear(tape, x, &n("w1"), &n("b1"))?;
        let h = tape.gelu(h);
        let h = self.linear(tape, h, &n("w2"), &n("b2"))?;
        let h = tape.gelu(h);
        self.linear(tape, h, &n("w3"), &n("b3"))
    }

    /// `[m, 2]` clickability logits for `tokens` of `outputs: [n, d]`.
    pub fn click_logits(&self, tape: &mut Tape<'s>, outputs: Var, tokens: &[usize]) -> Result<Var> {
        let n = tape.shape(outputs)[0];
        for &t in tokens {
            check_token(t, n)?;
        }
        let x = tape.gather_rows(outputs, tokens)?;
        self.mlp3(tape, "click", x)
    }

    /// `[m, 2]` relation logits from `outputs[i] + outputs[j]`.
    pub fn relation_logits(&self, tape: &mut Tape<'s>, outputs: Var, pairs: &[(usize, usize)]) -> Result<Var> {
        let n = tape.shape(outputs)[0];
        for &(i, j) in pairs {
            if i == j || i == 0 || j == 0 || i >= n || j >= n {
                return Err(ModelError::InvalidPair(i, j, n));
            }
        }
        let a: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let xa = tape.gather_rows(outputs, &a)?;
        let xb = tape.gather_rows(outputs, &b)?;
        let x = tape.add(xa, xb)?;
        self.mlp3(tape, "relation", x)
    }

    /// `[1, C]` app-type logits over the max-pooled outputs.
    pub fn app_logits(&self, tape: &mut Tape<'s>, outputs: Var) -> Result<Var> {
        let pooled = tape.max_rows(outputs);
        let d = tape.shape(pooled)[0];
        let x = tape.reshape(pooled, &[1, d])?;
        self.mlp3(tape, "app", x)
    }

    /// Mean cross-entropy of one example's labels.
    pub fn task_loss(&self, tape: &mut Tape<'s>, outputs: Var, labels: &TaskLabels) -> Result<Var> {
        match labels {
            TaskLabels::Click(v) => {
                let tokens: Vec<usize> = v.iter().map(|p| p.0).collect();
                let classes: Vec<usize> = v.iter().map(|p| usize::from(p.1)).collect();
                let logits = self.click_logits(tape, outputs, &tokens)?;
                Ok(tape.cross_entropy(logits, &classes)?)
            }
            TaskLabels::Relation(v) => {
                let pairs: Vec<(usize, usize)> = v.iter().map(|p| (p.0, p.1)).collect();
                let classes: Vec<usize> = v.iter().map(|p| usize::from(p.2)).collect();
                let logits = self.relation_logits(tape, outputs, &pairs)?;
                Ok(tape.cross_entropy(logits, &classes)?)
            }
            TaskLabels::App(c) => {
                if *c >= self.cfg.app_classes {
                    return Err(ModelError::InvalidConfig(format!(
                        "app class {c} outside 0..{}",
                        self.cfg.app_classes
                    )));
                }
                let logits = self.app_logits(tape, outputs)?;
                Ok(tape.cross_entropy(logits, &[*c])?)
            }
        }
    }
}

impl ScreenTransformer {
    /// Coordinatewise maximum of all outputs, layout token included.
    pub fn screen_repr(&self, inp: &ScreenInputs) -> Result<Vec<f64>> {
        Ok(screen_repr(&self.outputs(inp)?))
    }

    /// Probability that `token` is clickable.
    pub fn clickability(&self, inp: &ScreenInputs, token: usize) -> Result<f64> {
        check_token(token, inp.len())?;
        let mut tape = Tape::new();
        let net = self.net();
        let o = net.forward(&mut tape, inp)?;
        let l = net.click_logits(&mut tape, o, &[token])?;
        Ok(softmax(tape.value(l).row(0))[1])
    }

    /// `[p(unrelated), p(related)]` for tokens `i`, `j`.
    pub fn relation_probs(&self, inp: &ScreenInputs, i: usize, j: usize) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let net = self.net();
        let o = net.forward(&mut tape, inp)?;
        let l = net.relation_logits(&mut tape, o, &[(i, j)])?;
        Ok(softmax(tape.value(l).row(0)))
    }

    pub fn app_classify(&self, inp: &ScreenInputs) -> Result<usize> {
        let mut tape = Tape::new();
        let net = self.net();
        let o = net.forward(&mut tape, inp)?;
        let l = net.app_logits(&mut tape, o)?;
        Ok(argmax(tape.value(l).row(0)))
    }

    /// `(correct, total)` predictions for one example.
    pub fn score_example(&self, ex: &TaskExample) -> Result<(usize, usize)> {
        let mut tape = Tape::new();
        let net = self.net();
        let o = net.forward(&mut tape, &ex.inputs)?;
        let (logits, truth): (Var, Vec<usize>) = match &ex.labels {
            TaskLabels::Click(v) => {
                let t: Vec<usize> = v.iter().map(|p| p.0).collect();
                (net.click_logits(&mut tape, o, &t)?, v.iter().map(|p| usize::from(p.1)).collect())
            }
            TaskLabels::Relation(v) => {
                let p: Vec<(usize, usize)> = v.iter().map(|p| (p.0, p.1)).collect();
                (net.relation_logits(&mut tape, o, &p)?, v.iter().map(|p| usize::from(p.2)).collect())
            }
            TaskLabels::App(c) => (net.app_logits(&mut tape, o)?, vec![*c]),
        };
        let l = tape.value(logits);
        let correct = truth.iter().enumerate().filter(|&(r, &c)| argmax(l.row(r)) == c).count();
        Ok((correct, truth.len()))
    }

    /// Fraction of correctly predicted labels over all examples.
    pub fn accuracy(&self, examples: &[TaskExample]) -> Result<f64> {
        let (mut ok, mut total) = (0, 0);
        for ex in examples {
            let (c, t) = self.score_example(ex)?;
            ok += c;
            total += t;
        }
        if total == 0 {
            return Err(ModelError::DegenerateDataset);
        }
        Ok(ok as f64 / total as f64)
    }
}

/// Coordinatewise maximum over the rows of `[n, d]` outputs.
pub fn screen_repr(outputs: &Tensor) -> Vec<f64> {
    let mut best = outputs.row(0).to_vec();
    for r in 1..outputs.rows() {
        for (b, &v) in best.iter_mut().zip(outputs.row(r)) {
            if v > *b {
                *b = v;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{prepare_screen, HashedTrigramEmbedder};
    use crate::transformer::ScreenTransformerConfig;
    use pw2ss_core::{BBox, PixelWord};

    fn tiny() -> ScreenTransformerConfig {
        ScreenTransformerConfig {
            layers: 1,
            d_model: 8,
            heads: 2,
            ffn_dim: 8,
            max_len: 16,
            text_dim: 12,
            layout_grid: 2,
            layout_hidden: 4,
            app_classes: 3,
            ..Default::default()
        }
    }

    fn inp() -> ScreenInputs {
        let s = ScreenSentence::new(
            "s",
            100,
            100,
            vec![
                PixelWord::text("a", BBox::new(0.0, 0.0, 10.0, 10.0)).unwrap(),
                PixelWord::graphic(1, BBox::new(20.0, 0.0, 30.0, 10.0)).unwrap(),
            ],
        );
        prepare_screen(&s, &HashedTrigramEmbedder { dim: 12 }, 2, 16)
    }

    #[test]
    fn repr_examples() {
        let one = Tensor::from_rows(&[vec![1.0, -2.0]]).unwrap();
        assert_eq!(screen_repr(&one), vec![1.0, -2.0]);
        let two = Tensor::from_rows(&[vec![1.0, -2.0], vec![0.0, 3.0]]).unwrap();
        assert_eq!(screen_repr(&two), vec![1.0, 3.0]);
    }

    #[test]
    fn click_probabilities_and_layout_error() {
        let m = ScreenTransformer::new(tiny(), 1).unwrap();
        let p = m.clickability(&inp(), 1).unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert!(matches!(m.clickability(&inp(), 0), Err(ModelError::LayoutTokenQueried)));
        assert!(matches!(m.clickability(&inp(), 5), Err(ModelError::TokenOutOfRange(5, 3))));
    }

    #[test]
    fn relation_is_symmetric_and_validated() {
        let m = ScreenTransformer::new(tiny(), 2).unwrap();
        let a = m.relation_probs(&inp(), 1, 2).unwrap();
        let b = m.relation_probs(&inp(), 2, 1).unwrap();
        assert_eq!(a, b);
        assert!(((a[0] + a[1]) - 1.0).abs() < 1e-15);
        assert!(matches!(m.relation_probs(&inp(), 1, 1), Err(ModelError::InvalidPair(1, 1, 3))));
        assert!(matches!(m.relation_probs(&inp(), 0, 1), Err(ModelError::InvalidPair(0, 1, 3))));
    }

    #[test]
    fn zero_head_predicts_class_zero() {
        let mut m = ScreenTransformer::new(tiny(), 3).unwrap();
        for name in ["head.app.w3", "head.app.b3"] {
            let id = m.id(name).unwrap();
            let shape = m.store.value(id).shape().to_vec();
            m.store.assign(id, Tensor::zeros(&shape)).unwrap();
        }
        assert_eq!(m.app_classify(&inp()).unwrap(), 0);
        assert_eq!(argmax(&[2.0, 2.0, 1.0]), 0);
        assert_eq!(argmax(&[1.0, 2.0, 2.0]), 1);
    }
}
