//! One function per subcommand. Each is a pure function of its input files,
//! the run configuration and the seed.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use pw2ss_core::label_gen::{clean_screens, label_screen, train_proposal_classifier, vh_text_count, LogisticModel, OcrScreen};
use pw2ss_core::metrics::{evaluate, pr_curve, Detection, GroundTruth, MetricReport};
use pw2ss_core::{parse_vh, Raster, ScreenSentence};
use pw2ss_model::embed::{layout_raster, train_layout_autoencoder, AutoencoderTrainConfig};
use pw2ss_model::{
    build_index, pretrain, prepare_screen, retrieve, train_task, RetrievalIndex, ScreenInputs, ScreenTransformer, Task,
    TaskExample, TaskLabels,
};
use pw2ss_nn::checkpoint::Checkpoint;
use pw2ss_nn::AdamW;
use serde::Serialize;
use serde_json::{json, Value as Json};

use crate::config::RunConfig;
use crate::fixtures::{write_fixtures, FixtureSpec, PatchSample};
use crate::io::{read_json, read_jsonl, read_text, write_json, write_jsonl};

pub fn gen_fixtures(spec: &FixtureSpec, out: &Path) -> Result<()> {
    let screens = write_fixtures(spec, out)?;
    eprintln!("wrote {} screens to {}", screens.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct ClassifierMetrics {
    train_samples: usize,
    heldout_samples: usize,
    train_accuracy: f64,
    heldout_accuracy: f64,
    loss_curve: Vec<f64>,
}

/// Rows whose line index is `3 mod 4` are held out.
pub fn train_proposal_clf(cfg: &RunConfig, patches: &Path, out: &Path, metrics: &Path) -> Result<()> {
    let rows: Vec<PatchSample> = read_jsonl(patches)?;
    let (mut train, mut held) = (Vec::new(), Vec::new());
    for (i, r) in rows.into_iter().enumerate() {
        let s = (r.features, r.label);
        if i % 4 == 3 {
            held.push(s);
        } else {
            train.push(s);
        }
    }
    let (model, report) = train_proposal_classifier(&train, cfg.classifier.epochs, cfg.seed)
        .with_context(|| format!("training on {}", patches.display()))?;
    let heldout_accuracy = if held.is_empty() { f64::NAN } else { model.accuracy(&held) };
    write_json(out, &model)?;
    write_json(
        metrics,
        &ClassifierMetrics {
            train_samples: train.len(),
            heldout_samples: held.len(),
            train_accuracy: report.train_accuracy,
            heldout_accuracy,
            loss_curve: report.loss_curve,
        },
    )?;
    Ok(())
}

/// Pseudo-labels for every screen of the OCR file. VH files are
/// `<vh_dir>/<id>.json`, screenshots `<screens_dir>/<id>.ppm`.
pub fn gen_labels(cfg: &RunConfig, vh_dir: &Path, ocr: &Path, screens_dir: &Path, classifier: &Path, out: &Path) -> Result<()> {
    let ocr: Vec<OcrScreen> = read_jsonl(ocr)?;
    let clf: LogisticModel = read_json(classifier)?;
    let mut labeled = Vec::with_capacity(ocr.len());
    for o in &ocr {
        let vh_path = vh_dir.join(format!("{}.json", o.screen_id));
        let (vh, _) = parse_vh(&read_text(&vh_path)?).with_context(|| format!("parsing {}", vh_path.display()))?;
        let raster_path = screens_dir.join(format!("{}.ppm", o.screen_id));
        let raster = Raster::load(&raster_path).with_context(|| format!("reading {}", raster_path.display()))?;
        let mut s = label_screen(&vh, &o.lines, &raster, &clf, &cfg.label_gen).sentence;
        s.screen_id = o.screen_id.clone();
        s.raster_path = Some(raster_path.display().to_string());
        labeled.push(s);
    }
    write_jsonl(out, labeled.iter())?;
    Ok(())
}

#[derive(Serialize)]
struct CleanSummary {
    kept: usize,
    dropped: Vec<String>,
    rel_mismatch: f64,
}

/// Drops labeled screens whose VH and OCR text counts disagree too much.
pub fn clean(cfg: &RunConfig, labels: &Path, vh_dir: &Path, ocr: &Path, out: &Path, report: Option<&Path>) -> Result<()> {
    let screens: Vec<ScreenSentence> = read_jsonl(labels)?;
    let ocr: Vec<OcrScreen> = read_jsonl(ocr)?;
    let ocr: BTreeMap<&str, &OcrScreen> = ocr.iter().map(|o| (o.screen_id.as_str(), o)).collect();
    let mut counted = Vec::with_capacity(screens.len());
    for s in screens {
        let vh_path = vh_dir.join(format!("{}.json", s.screen_id));
        let (vh, _) = parse_vh(&read_text(&vh_path)?).with_context(|| format!("parsing {}", vh_path.display()))?;
        let o = ocr
            .get(s.screen_id.as_str())
            .ok_or_else(|| anyhow!("screen `{}` has no OCR record", s.screen_id))?;
        let n_ocr = o.lines.iter().filter(|l| !l.text.trim().is_empty()).count();
        let n_vh = vh_text_count(&vh, &cfg.label_gen);
        counted.push((s, n_vh, n_ocr));
    }
    let (kept, rep) = clean_screens(&counted, cfg.label_gen.clean_rel_mismatch);
    write_jsonl(out, kept.iter().map(|k| &k.0))?;
    if let Some(p) = report {
        write_json(
            p,
            &CleanSummary {
                kept: rep.kept,
                dropped: rep.dropped.iter().map(|&i| counted[i].0.screen_id.clone()).collect(),
                rel_mismatch: cfg.label_gen.clean_rel_mismatch,
            },
        )?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum WordKind {
    Text,
    Graphic,
    All,
}

fn boxes(screens: &[ScreenSentence], kind: WordKind) -> Vec<(String, pw2ss_core::BBox)> {
    screens
        .iter()
        .flat_map(|s| {
            s.pixel_words
                .iter()
                .filter(move |p| match kind {
                    WordKind::Text => p.is_text(),
                    WordKind::Graphic => p.is_graphic(),
                    WordKind::All => true,
                })
                .map(move |p| (s.screen_id.clone(), p.bbox))
        })
        .collect()
}

#[derive(Serialize)]
struct DetReport {
    text: MetricReport,
    graphic: MetricReport,
    all: MetricReport,
    /// `(recall, precision)` points at IoU 0.5.
    pr_curve50: BTreeMap<&'static str, Vec<(f64, f64)>>,
}

/// Class-agnostic detection metrics of predicted Pixel-Words (score 1.0)
/// against ground truth, for text, graphics and both.
pub fn eval_det(pred: &Path, gt: &Path, out: &Path) -> Result<()> {
    let pred: Vec<ScreenSentence> = read_jsonl(pred)?;
    let gt: Vec<ScreenSentence> = read_jsonl(gt)?;
    let mut reports = Vec::new();
    let mut curves = BTreeMap::new();
    for (name, kind) in [("text", WordKind::Text), ("graphic", WordKind::Graphic), ("all", WordKind::All)] {
        let dets: Vec<Detection> = boxes(&pred, kind)
            .into_iter()
            .map(|(image_id, bbox)| Detection {
                image_id,
                bbox,
                score: 1.0,
            })
            .collect();
        let gts: Vec<GroundTruth> = boxes(&gt, kind)
            .into_iter()
            .map(|(image_id, bbox)| GroundTruth { image_id, bbox })
            .collect();
        reports.push(evaluate(&dets, &gts));
        curves.insert(name, pr_curve(&dets, &gts, 0.5));
    }
    let [text, graphic, all]: [MetricReport; 3] = reports.try_into().expect("three kinds");
    write_json(
        out,
        &DetReport {
            text,
            graphic,
            all,
            pr_curve50: curves,
        },
    )?;
    Ok(())
}

fn load_screens(path: &Path) -> Result<Vec<ScreenSentence>> {
    let screens: Vec<ScreenSentence> = read_jsonl(path)?;
    if screens.is_empty() {
        bail!("{} contains no screens", path.display());
    }
    for s in &screens {
        s.validate().with_context(|| format!("screen `{}` in {}", s.screen_id, path.display()))?;
    }
    Ok(screens)
}

fn inputs_for(cfg: &RunConfig, model: &ScreenTransformer, screens: &[ScreenSentence]) -> Result<Vec<ScreenInputs>> {
    let emb = cfg.embedder(model.cfg.text_dim)?;
    Ok(screens
        .iter()
        .map(|s| prepare_screen(s, emb.as_ref(), model.cfg.layout_grid, model.cfg.max_len))
        .collect())
}

fn load_model(path: &Path) -> Result<ScreenTransformer> {
    let ckpt = Checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    ScreenTransformer::from_checkpoint(&ckpt).with_context(|| format!("restoring model from {}", path.display()))
}

fn save_model(model: &ScreenTransformer, opt: Option<&AdamW>, meta: Json, path: &Path) -> Result<()> {
    model
        .checkpoint(opt, meta)
        .save(path)
        .with_context(|| format!("writing checkpoint {}", path.display()))
}

#[derive(Serialize)]
struct PretrainMetrics {
    screens: usize,
    steps: usize,
    first_loss: Option<f64>,
    final_loss: Option<f64>,
    eval_loss: f64,
    loss_curve: Vec<f64>,
    layout_loss_curve: Vec<f64>,
}

/// Trains the layout autoencoder, installs its encoder and runs masked
/// Pixel-Words pretraining.
pub fn run_pretrain(cfg: &RunConfig, data: &Path, out: &Path, metrics: &Path) -> Result<()> {
    let screens = load_screens(data)?;
    let mut model = ScreenTransformer::new(cfg.model, cfg.seed)?;
    let mut layout_curve = Vec::new();
    if cfg.layout.epochs > 0 {
        let rasters: Vec<_> = screens.iter().map(|s| layout_raster(s, cfg.model.layout_grid)).collect();
        let (ae, curve) = train_layout_autoencoder(
            &rasters,
            cfg.model.layout_grid,
            cfg.model.layout_hidden,
            cfg.model.d_model,
            &AutoencoderTrainConfig {
                epochs: cfg.layout.epochs,
                lr: cfg.layout.lr,
                seed: cfg.seed,
            },
        )?;
        model.install_layout(&ae)?;
        layout_curve = curve;
    }
    let inputs = inputs_for(cfg, &model, &screens)?;
    let (report, opt) = if cfg.pretrain.epochs == 0 {
        Default::default()
    } else {
        let (r, o) = pretrain(&mut model, &inputs, &cfg.pretrain)?;
        (r, Some(o))
    };
    let eval_loss = model.pretrain_eval_loss(&inputs, cfg.pretrain.seed)?;
    let meta = json!({"command": "pretrain", "seed": cfg.seed, "train": cfg.pretrain, "screens": screens.len()});
    save_model(&model, opt.as_ref(), meta, out)?;
    write_json(
        metrics,
        &PretrainMetrics {
            screens: screens.len(),
            steps: report.steps,
            first_loss: report.loss_curve.first().copied(),
            final_loss: report.loss_curve.last().copied(),
            eval_loss,
            loss_curve: report.loss_curve,
            layout_loss_curve: layout_curve,
        },
    )?;
    Ok(())
}

fn task_examples(cfg: &RunConfig, model: &ScreenTransformer, screens: &[ScreenSentence], task: Task) -> Result<Vec<TaskExample>> {
    let inputs = inputs_for(cfg, model, screens)?;
    let examples: Vec<TaskExample> = screens
        .iter()
        .zip(inputs)
        .filter_map(|(s, inp)| {
            TaskLabels::from_screen(task, s, &inp).map(|labels| TaskExample { inputs: inp, labels })
        })
        .collect();
    if examples.is_empty() {
        bail!("no screen carries {} labels", task.head());
    }
    Ok(examples)
}

#[derive(Serialize)]
struct TaskMetrics {
    task: &'static str,
    examples: usize,
    steps: usize,
    train_accuracy: Option<f64>,
    loss_curve: Vec<f64>,
}

/// Fine-tunes one downstream head, starting from `init` when given.
pub fn run_train_task(cfg: &RunConfig, task: Task, data: &Path, init: Option<&Path>, out: &Path, metrics: &Path) -> Result<()> {
    let screens = load_screens(data)?;
    let mut model = match init {
        Some(p) => load_model(p)?,
        None => ScreenTransformer::new(cfg.model, cfg.seed)?,
    };
    let examples = task_examples(cfg, &model, &screens, task)?;
    let (report, opt) = train_task(&mut model, &examples, &cfg.finetune)?;
    let meta = json!({
        "command": format!("train-{}", task.head()),
        "seed": cfg.seed,
        "train": cfg.finetune,
        "init": init.map(|p| p.display().to_string()),
    });
    save_model(&model, Some(&opt), meta, out)?;
    write_json(
        metrics,
        &TaskMetrics {
            task: task.head(),
            examples: examples.len(),
            steps: report.steps,
            train_accuracy: report.train_accuracy,
            loss_curve: report.loss_curve,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct EvalMetrics {
    task: &'static str,
    examples: usize,
    correct: usize,
    total: usize,
    accuracy: f64,
}

pub fn eval_task(cfg: &RunConfig, task: Task, data: &Path, checkpoint: &Path, out: &Path) -> Result<()> {
    let screens = load_screens(data)?;
    let model = load_model(checkpoint)?;
    let examples = task_examples(cfg, &model, &screens, task)?;
    let (mut correct, mut total) = (0, 0);
    for ex in &examples {
        let (c, t) = model.score_example(ex)?;
        correct += c;
        total += t;
    }
    write_json(
        out,
        &EvalMetrics {
            task: task.head(),
            examples: examples.len(),
            correct,
            total,
            accuracy: correct as f64 / total as f64,
        },
    )?;
    Ok(())
}

pub fn run_build_index(cfg: &RunConfig, data: &Path, checkpoint: &Path, out: &Path) -> Result<()> {
    let screens = load_screens(data)?;
    let model = load_model(checkpoint)?;
    let inputs = inputs_for(cfg, &model, &screens)?;
    write_json(out, &build_index(&model, &inputs)?)?;
    Ok(())
}

/// Ranks the index against screen `query` of `data`; prints JSON to stdout
/// when `out` is `None`.
pub fn run_retrieve(
    cfg: &RunConfig,
    index: &Path,
    checkpoint: &Path,
    data: &Path,
    query: &str,
    k: usize,
    out: Option<&Path>,
) -> Result<()> {
    if k == 0 {
        bail!("k must be at least 1");
    }
    let index: RetrievalIndex = read_json(index)?;
    let model = load_model(checkpoint)?;
    let screens = load_screens(data)?;
    let s = screens
        .iter()
        .find(|s| s.screen_id == query)
        .ok_or_else(|| anyhow!("query screen `{query}` not found in {}", data.display()))?;
    let inp = inputs_for(cfg, &model, std::slice::from_ref(s))?.remove(0);
    let hits = retrieve(&model, &inp, &index, k)?;
    match out {
        Some(p) => write_json(p, &hits)?,
        None => println!("{}", serde_json::to_string_pretty(&hits)?),
    }
    Ok(())
}
