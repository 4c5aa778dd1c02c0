//! `zlpr eval`: score a saved model on a dataset. The decision rule
//! defaults to whatever the model was trained to be evaluated with,
//! recorded in its provenance.

use std::path::PathBuf;

use zlpr::losses::DecisionRule;
use zlpr::trainer::{evaluate, LinearModel};

use crate::commands::{human_metrics, load_dataset_arg, report_json};
use crate::error::CliError;
use crate::manifest::RunManifest;

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Saved model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset file, or a directory containing data.jsonl.
    #[arg(long)]
    pub data: PathBuf,
    /// Decision rule override: zero_threshold, threshold=<t>, or
    /// top_k=<k>. Defaults to the rule in the model's provenance.
    #[arg(long)]
    pub rule: Option<String>,
    /// Optional output directory for report.jsonl and manifest.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &EvalArgs) -> Result<(), CliError> {
    let model = LinearModel::load(&args.model)?;
    let dataset = load_dataset_arg(&args.data)?;

    if dataset.feature_count() != model.feature_count() {
        return Err(CliError::Usage(format!(
            "model expects {} features but the dataset carries {}",
            model.feature_count(),
            dataset.feature_count()
        )));
    }
    if dataset.label_count() != model.label_count() {
        return Err(CliError::Usage(format!(
            "model scores {} categories but the dataset carries {}",
            model.label_count(),
            dataset.label_count()
        )));
    }

    let rule: DecisionRule = match (&args.rule, &model.provenance) {
        (Some(text), _) => text.parse().map_err(CliError::Usage)?,
        (None, Some(provenance)) => provenance
            .decision_rule
            .parse()
            .map_err(|e: String| CliError::Io(format!("model provenance: {e}")))?,
        (None, None) => DecisionRule::ZeroThreshold,
    };
    let loss = model
        .provenance
        .as_ref()
        .map_or("unknown", |p| p.loss.as_str());

    let report = evaluate(&model, &dataset, rule)?;
    println!("rule: {rule}");
    println!("eval: {}", human_metrics(&report));
    let line = report_json("eval", loss, &report);
    println!("{line}");

    if let Some(out) = &args.out {
        let mut manifest = RunManifest::new("eval");
        manifest
            .flag("model", args.model.display())
            .flag("data", args.data.display())
            .flag("rule", rule)
            .flag("out", out.display());
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("report.jsonl"), line + "\n")?;
        manifest.artifact("report.jsonl");
        manifest.write(out)?;
    }
    Ok(())
}
