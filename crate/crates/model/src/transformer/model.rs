//! Parameters, token construction and the post-norm encoder.

use pw2ss_nn::checkpoint::Checkpoint;
use pw2ss_nn::init::{named_rng, uniform, xavier_uniform};
use pw2ss_nn::{AdamW, NnError, ParamId, ParamStore, Tape, Tensor, Var};
use serde_json::Value as Json;

use super::config::ScreenTransformerConfig;
use crate::embed::layout::{encoder_forward, LayoutAutoencoder, ENCODER_PARAMS};
use crate::embed::position::{BUCKETS, POSITION_FIELDS};
use crate::embed::tokens::ScreenInputs;
use crate::error::{ModelError, Result};

pub const HEADS: [&str; 3] = ["click", "relation", "app"];

/// Parameters of the Screen Transformer with its pretraining and task heads.
#[derive(Clone, Debug)]
pub struct ScreenTransformer {
    pub cfg: ScreenTransformerConfig,
    pub store: ParamStore,
}

/// Encoder outputs on a tape, plus the attention maps when traced.
pub struct Encoded {
    pub outputs: Var,
    pub attention: Vec<Tensor>,
}

/// Borrowed view of a model's config and weights; every forward pass
/// records through one of these.
#[derive(Clone, Copy, Debug)]
pub struct Net<'s> {
    pub cfg: ScreenTransformerConfig,
    pub store: &'s ParamStore,
}

impl<'s> Net<'s> {
    pub fn new(cfg: ScreenTransformerConfig, store: &'s ParamStore) -> Self {
        Self { cfg, store }
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.store
            .id(name)
            .ok_or_else(|| NnError::MissingParameter(name.to_string()).into())
    }

    pub(crate) fn p(&self, tape: &mut Tape<'s>, name: &str) -> Result<Var> {
        Ok(tape.param(self.store, self.id(name)?))
    }

    pub(crate) fn linear(&self, tape: &mut Tape<'s>, x: Var, w: &str, b: &str) -> Result<Var> {
        let (w, b) = (self.p(tape, w)?, self.p(tape, b)?);
        Ok(tape.linear(x, w, b)?)
    }

    /// Shared content projection `[n_words, text_dim] -> [n_words, d]`.
    pub fn project_content(&self, tape: &mut Tape<'s>, inp: &ScreenInputs) -> Result<Option<Var>> {
        match &inp.content {
            None => Ok(None),
            Some(c) => {
                let x = tape.constant(c.clone());
                Ok(Some(self.linear(tape, x, "embed.content.w", "embed.content.b")?))
            }
        }
    }

    /// `[n, d]` input tokens. Tokens listed in `masked` (never 0) take the
    /// mask vector in place of their content; positions are always added.
    pub fn build_tokens(&self, tape: &mut Tape<'s>, inp: &ScreenInputs, masked: &[usize]) -> Result<Var> {
        let n = inp.len();
        if n > self.cfg.max_len {
            return Err(ModelError::SequenceTooLong {
                len: n,
                max: self.cfg.max_len,
            });
        }
        let raster = tape.constant(inp.raster.reshape(&[1, inp.raster.len()])?);
        let layout = encoder_forward(tape, self.store, raster)?;
        let layout = tape.detach(layout);

        let mut rows = vec![layout];
        if let Some(proj) = self.project_content(tape, inp)? {
            let nw = inp.n_words();
            let words = if masked.is_empty() {
                proj
            } else {
                let mask = self.p(tape, "embed.mask")?;
                let stacked = tape.concat_rows(&[proj, mask])?;
                let idx: Vec<usize> = (1..n)
                    .map(|t| if masked.contains(&t) { nw } else { t - 1 })
                    .collect();
                tape.gather_rows(stacked, &idx)?
            };
            rows.push(words);
        }
        let content = if rows.len() == 1 { layout } else { tape.concat_rows(&rows)? };

        let mut pos: Option<Var> = None;
        for (f, field) in POSITION_FIELDS.iter().enumerate() {
            let table = self.p(tape, &format!("embed.pos.{field}"))?;
            let idx: Vec<usize> = inp.buckets.iter().map(|b| b[f]).collect();
            let g = tape.gather_rows(table, &idx)?;
            pos = Some(match pos {
                None => g,
                Some(acc) => tape.add(acc, g)?,
            });
        }
        Ok(tape.add(content, pos.expect("six position fields"))?)
    }

    /// Runs the encoder stack over `[n, d]` tokens.
    pub fn encode(&self, tape: &mut Tape<'s>, tokens: Var, trace: bool) -> Result<Encoded> {
        let n = tape.shape(tokens)[0];
        if n > self.cfg.max_len {
            return Err(ModelError::SequenceTooLong {
                len: n,
                max: self.cfg.max_len,
            });
        }
        let dh = self.cfg.head_dim();
        let inv = 1.0 / (dh as f64).sqrt();
        let mut attention = Vec::new();
        let mut x = tokens;
        for l in 0..self.cfg.layers {
            let name = |n: &str| format!("enc.{l}.{n}");
            let q = self.linear(tape, x, &name("attn.wq"), &name("attn.bq"))?;
            let k = self.linear(tape, x, &name("attn.wk"), &name("attn.bk"))?;
            let v = self.linear(tape, x, &name("attn.wv"), &name("attn.bv"))?;
            let mut heads = Vec::with_capacity(self.cfg.heads);
            for h in 0..self.cfg.heads {
                let qh = tape.slice_cols(q, h * dh, dh)?;
                let kh = tape.slice_cols(k, h * dh, dh)?;
                let vh = tape.slice_cols(v, h * dh, dh)?;
                let kt = tape.transpose(kh)?;
                let scores = tape.matmul(qh, kt)?;
                let scores = tape.scale(scores, inv);
                let a = tape.softmax(scores);
                if trace {
                    attention.push(tape.value(a).clone());
                }
                heads.push(tape.matmul(a, vh)?);
            }
            let cat = if heads.len() == 1 { heads[0] } else { tape.concat_cols(&heads)? };
            let attn = self.linear(tape, cat, &name("attn.wo"), &name("attn.bo"))?;
            let r = tape.add(x, attn)?;
            let (g, b) = (self.p(tape, &name("ln1.g"))?, self.p(tape, &name("ln1.b"))?);
            let h1 = tape.layer_norm(r, g, b)?;
            let f = self.linear(tape, h1, &name("ffn.w1"), &name("ffn.b1"))?;
            let f = tape.gelu(f);
            let f = self.linear(tape, f, &name("ffn.w2"), &name("ffn.b2"))?;
            let r = tape.add(h1, f)?;
            let (g, b) = (self.p(tape, &name("ln2.g"))?, self.p(tape, &name("ln2.b"))?);
            x = tape.layer_norm(r, g, b)?;
        }
        Ok(Encoded { outputs: x, attention })
    }

    /// Unmasked encoder outputs of a screen.
    pub fn forward(&self, tape: &mut Tape<'s>, inp: &ScreenInputs) -> Result<Var> {
        let tokens = self.build_tokens(tape, inp, &[])?;
        Ok(self.encode(tape, tokens, false)?.outputs)
    }
}

fn add_param(store: &mut ParamStore, seed: u64, name: &str, t: impl FnOnce(&mut rand_chacha::ChaCha8Rng) -> Tensor) {
    let mut rng = named_rng(seed, name);
    store.add(name, t(&mut rng)).expect("parameter names are unique");
}

fn add_linear(store: &mut ParamStore, seed: u64, w: &str, b: &str, fan_in: usize, fan_out: usize) {
    add_param(store, seed, w, |r| xavier_uniform(r, &[fan_in, fan_out], fan_in, fan_out));
    add_param(store, seed, b, |_| Tensor::zeros(&[fan_out]));
}

/// Output projection of a residual branch, shrunk by `1/sqrt(2 layers)` so
/// that the residual path dominates at initialization.
fn add_residual_linear(store: &mut ParamStore, seed: u64, w: &str, b: &str, fan_in: usize, fan_out: usize, layers: usize) {
    let gain = 1.0 / ((2 * layers) as f64).sqrt();
    add_param(store, seed, w, |r| xavier_uniform(r, &[fan_in, fan_out], fan_in, fan_out).map(|v| v * gain));
    add_param(store, seed, b, |_| Tensor::zeros(&[fan_out]));
}

impl ScreenTransformer {
    /// Fresh weights drawn from per-parameter named streams of `seed`.
    pub fn new(cfg: ScreenTransformerConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d_model;
        let mut s = ParamStore::new();
        add_linear(&mut s, seed, "embed.content.w", "embed.content.b", cfg.text_dim, d);
        for f in POSITION_FIELDS {
            add_param(&mut s, seed, &format!("embed.pos.{f}"), |r| xavier_uniform(r, &[BUCKETS, d], BUCKETS, d));
        }
        add_param(&mut s, seed, "embed.mask", |r| uniform(r, &[1, d], 0.02));

        let ae = LayoutAutoencoder::new(cfg.layout_grid, cfg.layout_hidden, d, seed);
        for name in ENCODER_PARAMS {
            let id = ae.store.id(name).expect("autoencoder owns its encoder");
            s.add(name, ae.store.value(id).clone())?;
        }

        for l in 0..cfg.layers {
            let p = |n: &str| format!("enc.{l}.{n}");
            for proj in ["q", "k", "v"] {
                add_linear(&mut s, seed, &p(&format!("attn.w{proj}")), &p(&format!("attn.b{proj}")), d, d);
            }
            add_residual_linear(&mut s, seed, &p("attn.wo"), &p("attn.bo"), d, d, cfg.layers);
            add_param(&mut s, seed, &p("ln1.g"), |_| Tensor::filled(&[d], 1.0));
            add_param(&mut s, seed, &p("ln1.b"), |_| Tensor::zeros(&[d]));
            add_linear(&mut s, seed, &p("ffn.w1"), &p("ffn.b1"), d, cfg.ffn_dim);
            add_residual_linear(&mut s, seed, &p("ffn.w2"), &p("ffn.b2"), cfg.ffn_dim, d, cfg.layers);
            add_param(&mut s, seed, &p("ln2.g"), |_| Tensor::filled(&[d], 1.0));
            add_param(&mut s, seed, &p("ln2.b"), |_| Tensor::zeros(&[d]));
        }

        add_linear(&mut s, seed, "head.pretrain.w", "head.pretrain.b", d, d);
        for head in HEADS {
            let out = if head == "app" { cfg.app_classes } else { 2 };
            let h = d / 2;
            add_linear(&mut s, seed, &format!("head.{head}.w1"), &format!("head.{head}.b1"), d, d);
            add_linear(&mut s, seed, &format!("head.{head}.w2"), &format!("head.{head}.b2"), d, h);
            add_linear(&mut s, seed, &format!("head.{head}.w3"), &format!("head.{head}.b3"), h, out);
        }
        s.set_trainable("layout.", false);
        Ok(Self { cfg, store: s })
    }

    /// Replaces the layout encoder with a trained autoencoder's (kept frozen).
    pub fn install_layout(&mut self, ae: &LayoutAutoencoder) -> Result<()> {
        if ae.grid != self.cfg.layout_grid || ae.hidden != self.cfg.layout_hidden || ae.d_model != self.cfg.d_model {
            return Err(ModelError::InvalidConfig(format!(
                "autoencoder {}x{}/{}/{} does not fit the model",
                ae.grid, ae.grid, ae.hidden, ae.d_model
            )));
        }
        for (name, src) in ENCODER_PARAMS.iter().zip(ae.encoder_ids()) {
            let id = self.id(name)?;
            self.store.assign(id, ae.store.value(src).clone())?;
        }
        Ok(())
    }

    pub fn net(&self) -> Net<'_> {
        Net::new(self.cfg, &self.store)
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.net().id(name)
    }

    /// Freezes (or unfreezes) the embeddings and encoder for head-only training.
    pub fn set_backbone_frozen(&mut self, frozen: bool) {
        self.store.set_trainable("embed.", !frozen);
        self.store.set_trainable("enc.", !frozen);
    }

    /// `[n, d]` encoder outputs as a plain tensor.
    pub fn outputs(&self, inp: &ScreenInputs) -> Result<Tensor> {
        let mut tape = Tape::new();
        let o = self.net().forward(&mut tape, inp)?;
        Ok(tape.value(o).clone())
    }

    /// Trainable parameter ids (the layout encoder stays frozen).
    pub fn trainable_ids(&self) -> Vec<ParamId> {
        self.store.iter().filter(|(_, p)| p.trainable).map(|(id, _)| id).collect()
    }

    pub fn checkpoint(&self, opt: Option<&AdamW>, meta: Json) -> Checkpoint {
        let config = serde_json::to_value(&self.cfg).expect("config serializes");
        Checkpoint::capture(&self.store, opt, config, meta)
    }

    /// Rebuilds a model from the config in the manifest and loads its weights.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let cfg: ScreenTransformerConfig = serde_json::from_value(ckpt.config.clone())
            .map_err(|e| ModelError::InvalidConfig(format!("checkpoint config: {e}")))?;
        let mut model = Self::new(cfg, 0)?;
        ckpt.load_into(&mut model.store)?;
        Ok(model)
    }
}
