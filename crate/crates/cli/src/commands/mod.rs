//! One module per subcommand, plus the flag bundles and small helpers
//! they share.

pub mod compare;
pub mod eval;
pub mod gradcheck;
pub mod riskcheck;
pub mod synth;
pub mod train;

use std::path::{Path, PathBuf};

use serde::Serialize;
use zlpr::data::{load_dataset, Dataset};
use zlpr::losses::{LossKind, LossSpec};
use zlpr::metrics::MetricsReport;

use crate::error::CliError;
use crate::manifest::RunManifest;

/// Loss hyperparameters exposed on the command line. Kinds that do not
/// read a given knob simply ignore it, so one bundle serves every loss.
#[derive(Debug, clap::Args)]
pub struct LossHyperFlags {
    /// Score threshold for tlpr (0 reduces it to zlpr).
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,
    /// Modulating exponent for focal.
    #[arg(long, default_value_t = 2.0)]
    pub focal_gamma: f64,
    /// Margin for hinge_rank.
    #[arg(long, default_value_t = 1.0)]
    pub hinge_margin: f64,
    /// Margin for warp.
    #[arg(long, default_value_t = 1.0)]
    pub warp_margin: f64,
    /// Largest number of pairs lsep_sampled scores per example.
    #[arg(long, default_value_t = 1000)]
    pub sample_budget: usize,
    /// Seed for the pair subsample drawn by lsep_sampled.
    #[arg(long, default_value_t = 0)]
    pub sample_seed: u64,
}

impl LossHyperFlags {
    pub fn spec(&self, kind: LossKind) -> LossSpec {
        let mut spec = LossSpec::new(kind);
        spec.threshold = self.threshold;
        spec.focal_gamma = self.focal_gamma;
        spec.hinge_margin = self.hinge_margin;
        spec.warp_margin = self.warp_margin;
        spec.sample_budget = self.sample_budget;
        spec.sample_seed = self.sample_seed;
        spec
    }

    pub fn record(&self, manifest: &mut RunManifest) {
        manifest
            .flag("threshold", self.threshold)
            .flag("focal-gamma", self.focal_gamma)
            .flag("hinge-margin", self.hinge_margin)
            .flag("warp-margin", self.warp_margin)
            .flag("sample-budget", self.sample_budget)
            .flag("sample-seed", self.sample_seed);
    }
}

/// Training protocol flags shared by `train` and `compare`.
#[derive(Debug, clap::Args)]
pub struct ProtocolFlags {
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = 2e-4)]
    pub lr: f64,
    /// Seed for the train/validation/test split shuffle.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
}

impl ProtocolFlags {
    pub fn record(&self, manifest: &mut RunManifest) {
        manifest
            .flag("epochs", self.epochs)
            .flag("batch-size", self.batch_size)
            .flag("lr", self.lr)
            .flag("split-seed", self.split_seed);
        manifest.seed("split", self.split_seed);
    }
}

pub(crate) fn parse_loss(name: &str) -> Result<LossKind, CliError> {
    name.parse().map_err(CliError::Usage)
}

/// `synth` writes `data.jsonl` into a directory, so dataset flags accept
/// either that directory or a file path.
pub(crate) fn resolve_dataset_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("data.jsonl")
    } else {
        path.to_path_buf()
    }
}

pub(crate) fn load_dataset_arg(path: &Path) -> Result<Dataset, CliError> {
    Ok(load_dataset(&resolve_dataset_path(path))?)
}

/// One machine-readable report line: a split/loss tag in front of the
/// metric fields, names matching the report struct exactly.
#[derive(Serialize)]
pub(crate) struct ReportLine<'a> {
    pub split: &'a str,
    pub loss: &'a str,
    #[serde(flatten)]
    pub metrics: &'a MetricsReport,
}

pub(crate) fn report_json(split: &str, loss: &str, metrics: &MetricsReport) -> String {
    serde_json::to_string(&ReportLine {
        split,
        loss,
        metrics,
    })
    .expect("report serialization cannot fail")
}

pub(crate) fn human_metrics(report: &MetricsReport) -> String {
    format!(
        "SubACC {:.4}  MLC-F1 {:.4}  Micro-F1 {:.4}  Macro-F1 {:.4}  AvgPrec {:.4}  RankLoss {:.4}",
        report.sub_acc,
        report.mlc_f1,
        report.micro_f1,
        report.macro_f1,
        report.avg_prec,
        report.rank_loss
    )
}
