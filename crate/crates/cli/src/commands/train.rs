//! `zlpr train`: split a dataset 8:1:1, train a linear model, and write
//! the model, history, split files, test report, and manifest.

use std::path::PathBuf;

use zlpr::data::{save_dataset, split};
use zlpr::trainer::{default_decision_rule, evaluate, train, TrainConfig};

use crate::commands::{
    load_dataset_arg, parse_loss, report_json, human_metrics, LossHyperFlags, ProtocolFlags,
};
use crate::error::CliError;
use crate::manifest::RunManifest;

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    /// Dataset file, or a directory containing data.jsonl.
    #[arg(long)]
    pub data: PathBuf,
    /// Loss kind to train with.
    #[arg(long, default_value = "zlpr")]
    pub loss: String,
    /// Weight initialization seed (also the batch shuffle seed unless
    /// --shuffle-seed is given).
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Batch shuffle seed; defaults to --seed.
    #[arg(long)]
    pub shuffle_seed: Option<u64>,
    #[command(flatten)]
    pub protocol: ProtocolFlags,
    #[command(flatten)]
    pub hyper: LossHyperFlags,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &TrainArgs) -> Result<(), CliError> {
    let shuffle_seed = args.shuffle_seed.unwrap_or(args.seed);
    let mut manifest = RunManifest::new("train");
    manifest
        .flag("data", args.data.display())
        .flag("loss", &args.loss)
        .flag("seed", args.seed)
        .flag("shuffle-seed", shuffle_seed)
        .flag("out", args.out.display());
    args.protocol.record(&mut manifest);
    args.hyper.record(&mut manifest);
    manifest.seed("init", args.seed).seed("shuffle", shuffle_seed);

    let kind = parse_loss(&args.loss)?;
    let dataset = load_dataset_arg(&args.data)?;
    let (train_ds, val_ds, test_ds) = split(&dataset, args.protocol.split_seed)?;

    let config = TrainConfig {
        loss: args.hyper.spec(kind),
        epochs: args.protocol.epochs,
        batch_size: args.protocol.batch_size,
        learning_rate: args.protocol.lr,
        init_seed: args.seed,
        shuffle_seed,
        decision_rule: None,
    };
    let (model, history) = train(&config, &train_ds, &val_ds)?;
    for record in &history.records {
        println!(
            "epoch {:>3}: train loss {:.6}  val SubACC {:.4}  val RankLoss {:.4}",
            record.epoch,
            record.train_loss,
            record.validation.sub_acc,
            record.validation.rank_loss
        );
    }

    let rule = config
        .decision_rule
        .unwrap_or_else(|| default_decision_rule(&config.loss, &train_ds));
    let test_report = evaluate(&model, &test_ds, rule)?;
    println!("test: {}", human_metrics(&test_report));

    std::fs::create_dir_all(&args.out)?;
    save_dataset(&train_ds, &args.out.join("train.jsonl"))?;
    save_dataset(&val_ds, &args.out.join("val.jsonl"))?;
    save_dataset(&test_ds, &args.out.join("test.jsonl"))?;
    model.save(&args.out.join("model.json"))?;
    let history_body = serde_json::to_string_pretty(&history)
        .map_err(|e| CliError::Io(format!("history serialization: {e}")))?;
    std::fs::write(args.out.join("history.json"), history_body + "\n")?;

    let validation_line = report_json(
        "validation",
        kind.name(),
        &history
            .records
            .last()
            .expect("training always runs at least one epoch")
            .validation,
    );
    let test_line = report_json("test", kind.name(), &test_report);
    std::fs::write(
        args.out.join("report.jsonl"),
        format!("{validation_line}\n{test_line}\n"),
    )?;

    for name in [
        "train.jsonl",
        "val.jsonl",
        "test.jsonl",
        "model.json",
        "history.json",
        "report.jsonl",
    ] {
        manifest.artifact(name);
    }
    manifest.write(&args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}
