//! `pw2ss` command-line pipeline: synthetic fixtures, pseudo-labels,
//! cleaning, detection metrics, pretraining, downstream heads, retrieval
//! and report export.

pub mod commands;
pub mod config;
pub mod fixtures;
pub mod io;
pub mod report;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use pw2ss_model::Task;

use crate::config::RunConfig;
use crate::fixtures::FixtureSpec;

#[derive(Debug, Parser)]
#[command(name = "pw2ss", version, about = "Pixel-Words to Screen-Sentence pipeline")]
pub struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured top-level seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct TrainOutputs {
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Metrics JSON to write.
    #[arg(long)]
    pub metrics: PathBuf,
    /// Overrides the configured epoch count.
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TaskArgs {
    /// Screen-Sentence JSONL with labels.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint to fine-tune; a fresh model otherwise.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[command(flatten)]
    pub outputs: TrainOutputs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Click,
    Relation,
    App,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Click => Task::Click,
            TaskArg::Relation => Task::Relation,
            TaskArg::App => Task::App,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic dataset with exact labels.
    GenFixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        n_screens: usize,
        #[arg(long, default_value_t = 26)]
        app_classes: usize,
        #[arg(long, default_value_t = 180)]
        width: u32,
        #[arg(long, default_value_t = 320)]
        height: u32,
    },
    /// Fit the logistic proposal classifier on patch samples.
    TrainProposalClf {
        #[arg(long)]
        patches: PathBuf,
        /// Classifier JSON to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Pseudo-label screens from VH, OCR and screenshots.
    GenLabels {
        #[arg(long)]
        vh_dir: PathBuf,
        #[arg(long)]
        ocr: PathBuf,
        #[arg(long)]
        screens_dir: PathBuf,
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Drop screens whose VH and OCR text counts disagree.
    Clean {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        vh_dir: PathBuf,
        #[arg(long)]
        ocr: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Detection metrics of predicted Pixel-Words against ground truth.
    EvalDet {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Masked Pixel-Words pretraining.
    Pretrain {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        outputs: TrainOutputs,
        /// Overrides the configured layout-autoencoder epochs.
        #[arg(long)]
        layout_epochs: Option<usize>,
    },
    /// Fine-tune the clickability head.
    TrainClick(TaskArgs),
    /// Fine-tune the relation head.
    TrainRelation(TaskArgs),
    /// Fine-tune the app-type head.
    TrainApp(TaskArgs),
    /// Accuracy of a checkpoint on one task.
    EvalTask {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Screen representations of every screen for retrieval.
    BuildIndex {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Top-k most similar indexed screens to a query screen.
    Retrieve {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Screen-Sentence JSONL holding the query.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a metrics JSON as CSV and plot data.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        plot: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match cli.command {
        Command::GenFixtures {
            out,
            n_screens,
            app_classes,
            width,
            height,
        } => commands::gen_fixtures(
            &FixtureSpec {
                seed: cfg.seed,
                n_screens,
                app_classes,
                screen_width: width,
                screen_height: height,
            },
            &out,
        ),
        Command::TrainProposalClf {
            patches,
            out,
            metrics,
            epochs,
        } => {
            if let Some(e) = epochs {
                cfg.classifier.epochs = e;
            }
            commands::train_proposal_clf(&cfg, &patches, &out, &metrics)
        }
        Command::GenLabels {
            vh_dir,
            ocr,
            screens_dir,
            classifier,
            out,
        } => commands::gen_labels(&cfg, &vh_dir, &ocr, &screens_dir, &classifier, &out),
        Command::Clean {
            labels,
            vh_dir,
            ocr,
            out,
            report,
        } => commands::clean(&cfg, &labels, &vh_dir, &ocr, &out, report.as_deref()),
        Command::EvalDet { pred, gt, out } => commands::eval_det(&pred, &gt, &out),
        Command::Pretrain {
            data,
            outputs,
            layout_epochs,
        } => {
            if let Some(e) = outputs.epochs {
                cfg.pretrain.epochs = e;
            }
            if let Some(e) = layout_epochs {
                cfg.layout.epochs = e;
            }
            commands::run_pretrain(&cfg, &data, &outputs.out, &outputs.metrics)
        }
        Command::TrainClick(a) => train(&mut cfg, Task::Click, a),
        Command::TrainRelation(a) => train(&mut cfg, Task::Relation, a),
        Command::TrainApp(a) => train(&mut cfg, Task::App, a),
        Command::EvalTask {
            task,
            data,
            checkpoint,
            out,
        } => commands::eval_task(&cfg, task.into(), &data, &checkpoint, &out),
        Command::BuildIndex { data, checkpoint, out } => commands::run_build_index(&cfg, &data, &checkpoint, &out),
        Command::Retrieve {
            index,
            checkpoint,
            data,
            query,
            k,
            out,
        } => commands::run_retrieve(&cfg, &index, &checkpoint, &data, &query, k, out.as_deref()),
        Command::Report { input, csv, plot } => {
            let doc: serde_json::Value = io::read_json(&input)?;
            let (text, data) = report::render(&doc);
            io::write_text(&csv, &text)?;
            io::write_json(&plot, &data)?;
            Ok(())
        }
    }
}

fn train(cfg: &mut RunConfig, task: Task, a: TaskArgs) -> Result<()> {
    if let Some(e) = a.outputs.epochs {
        cfg.finetune.epochs = e;
    }
    commands::run_train_task(cfg, task, &a.data, a.init.as_deref(), &a.outputs.out, &a.outputs.metrics)
}
