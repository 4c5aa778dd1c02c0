//! `zlpr compare`: train each requested loss across the requested seeds on
//! one shared split, then tabulate per-loss test metrics (mean over seeds)
//! with a winner mark per column.

use std::path::PathBuf;

use serde::Serialize;
use zlpr::data::{split, Dataset};
use zlpr::losses::LossKind;
use zlpr::metrics::MetricsReport;
use zlpr::trainer::{default_decision_rule, evaluate, train, TrainConfig};

use crate::commands::{load_dataset_arg, parse_loss, LossHyperFlags, ProtocolFlags};
use crate::error::CliError;
use crate::manifest::RunManifest;

/// Table columns, in order. `RankLoss` is the only one where lower wins.
const COLUMNS: [&str; 6] = [
    "SubACC", "MLC-F1", "Micro-F1", "Macro-F1", "AvgPrec", "RankLoss",
];

#[derive(Debug, clap::Args)]
pub struct CompareArgs {
    /// Comma-separated loss kinds, e.g. zlpr,bce,fl.
    #[arg(long)]
    pub losses: String,
    /// Dataset file, or a directory containing data.jsonl.
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated training seeds; each seeds both initialization and
    /// shuffling for its run.
    #[arg(long, default_value = "1,2,3")]
    pub seeds: String,
    #[command(flatten)]
    pub protocol: ProtocolFlags,
    #[command(flatten)]
    pub hyper: LossHyperFlags,
    /// Optional output directory for compare.jsonl and manifest.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Mean test metrics for one loss, field names matching the report struct.
#[derive(Debug, Serialize)]
struct CompareRow {
    loss: String,
    seeds: Vec<u64>,
    failed_cells: usize,
    sub_acc: f64,
    mlc_f1: f64,
    micro_f1: f64,
    macro_f1: f64,
    avg_prec: f64,
    rank_loss: f64,
}

impl CompareRow {
    fn column(&self, index: usize) -> f64 {
        match index {
            0 => self.sub_acc,
            1 => self.mlc_f1,
            2 => self.micro_f1,
            3 => self.macro_f1,
            4 => self.avg_prec,
            _ => self.rank_loss,
        }
    }
}

fn mean_row(kind: LossKind, seeds: &[u64], reports: &[MetricsReport], failed: usize) -> CompareRow {
    let n = reports.len() as f64;
    let mean = |pick: fn(&MetricsReport) -> f64| reports.iter().map(pick).sum::<f64>() / n;
    CompareRow {
        loss: kind.name().to_string(),
        seeds: seeds.to_vec(),
        failed_cells: failed,
        sub_acc: mean(|r| r.sub_acc),
        mlc_f1: mean(|r| r.mlc_f1),
        micro_f1: mean(|r| r.micro_f1),
        macro_f1: mean(|r| r.macro_f1),
        avg_prec: mean(|r| r.avg_prec),
        rank_loss: mean(|r| r.rank_loss),
    }
}

fn train_cell(
    kind: LossKind,
    seed: u64,
    args: &CompareArgs,
    train_ds: &Dataset,
    val_ds: &Dataset,
    test_ds: &Dataset,
) -> Result<MetricsReport, CliError> {
    let config = TrainConfig {
        loss: args.hyper.spec(kind),
        epochs: args.protocol.epochs,
        batch_size: args.protocol.batch_size,
        learning_rate: args.protocol.lr,
        init_seed: seed,
        shuffle_seed: seed,
        decision_rule: None,
    };
    let (model, _) = train(&config, train_ds, val_ds)?;
    let rule = default_decision_rule(&config.loss, train_ds);
    Ok(evaluate(&model, test_ds, rule)?)
}

fn print_table(rows: &[CompareRow]) {
    print!("{:<14}", "loss");
    for name in COLUMNS {
        print!("{name:>10}");
    }
    println!();
    // Winner per column: lowest for RankLoss (last), highest elsewhere.
    let winners: Vec<Option<f64>> = (0..COLUMNS.len())
        .map(|c| {
            let scored: Vec<f64> = rows
                .iter()
                .map(|r| r.column(c))
                .filter(|v| !v.is_nan())
                .collect();
            if scored.is_empty() {
                None
            } else if c == COLUMNS.len() - 1 {
                Some(scored.iter().copied().fold(f64::INFINITY, f64::min))
            } else {
                Some(scored.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            }
        })
        .collect();
    for row in rows {
        print!("{:<14}", row.loss);
        for (c, winner) in winners.iter().enumerate() {
            let value = row.column(c);
            let mark = if winner.is_some_and(|w| value == w) {
                "*"
            } else {
                ""
            };
            if value.is_nan() {
                print!("{:>10}", "-");
            } else {
                print!("{:>10}", format!("{value:.4}{mark}"));
            }
        }
        println!();
    }
}

pub fn run(args: &CompareArgs) -> Result<(), CliError> {
    let kinds: Vec<LossKind> = args
        .losses
        .split(',')
        .map(|name| parse_loss(name.trim()))
        .collect::<Result<_, _>>()?;
    let seeds: Vec<u64> = args
        .seeds
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad seed '{}'", s.trim())))
        })
        .collect::<Result<_, _>>()?;
    if kinds.is_empty() || seeds.is_empty() {
        return Err(CliError::Usage(
            "--losses and --seeds must each name at least one entry".to_string(),
        ));
    }

    let dataset = load_dataset_arg(&args.data)?;
    let (train_ds, val_ds, test_ds) = split(&dataset, args.protocol.split_seed)?;

    let mut rows = Vec::with_capacity(kinds.len());
    for &kind in &kinds {
        let mut reports = Vec::new();
        let mut failed = 0usize;
        for &seed in &seeds {
            match train_cell(kind, seed, args, &train_ds, &val_ds, &test_ds) {
                Ok(report) => reports.push(report),
                Err(e) => {
                    eprintln!("warning: {} with seed {seed} failed: {e}", kind.name());
                    failed += 1;
                }
            }
        }
        if reports.is_empty() {
            rows.push(CompareRow {
                loss: kind.name().to_string(),
                seeds: seeds.clone(),
                failed_cells: failed,
                sub_acc: f64::NAN,
                mlc_f1: f64::NAN,
                micro_f1: f64::NAN,
                macro_f1: f64::NAN,
                avg_prec: f64::NAN,
                rank_loss: f64::NAN,
            });
        } else {
            rows.push(mean_row(kind, &seeds, &reports, failed));
        }
    }

    print_table(&rows);
    println!();
    let mut lines = String::new();
    for row in &rows {
        let line = serde_json::to_string(row)
            .map_err(|e| CliError::Io(format!("row serialization: {e}")))?;
        println!("{line}");
        lines.push_str(&line);
        lines.push('\n');
    }

    if let Some(out) = &args.out {
        let mut manifest = RunManifest::new("compare");
        manifest
            .flag("losses", &args.losses)
            .flag("data", args.data.display())
            .flag("seeds", &args.seeds)
            .flag("out", out.display());
        args.protocol.record(&mut manifest);
        args.hyper.record(&mut manifest);
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("compare.jsonl"), lines)?;
        manifest.artifact("compare.jsonl");
        manifest.write(out)?;
    }

    if rows.iter().all(|r| r.sub_acc.is_nan()) {
        return Err(CliError::Check("every comparison cell failed".to_string()));
    }
    Ok(())
}
