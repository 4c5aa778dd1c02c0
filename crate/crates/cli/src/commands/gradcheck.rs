//! `zlpr gradcheck`: sweep analytic gradients against central differences
//! and print one table row per loss kind.

use zlpr::gradcheck::{check_kind, GradCheckConfig};
use zlpr::losses::LossKind;

use crate::commands::parse_loss;
use crate::error::CliError;

#[derive(Debug, clap::Args)]
pub struct GradcheckArgs {
    /// A loss kind, or "all" for the whole family.
    #[arg(long, default_value = "all")]
    pub loss: String,
    /// Random instances per kind.
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Maximum accepted symmetric relative error per coordinate.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Instance sampler seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest category count sampled.
    #[arg(long, default_value_t = 8)]
    pub max_labels: usize,
    /// Debug knob: bias added to every analytic gradient entry, to prove
    /// the failure path fires.
    #[arg(long, hide = true, default_value_t = 0.0)]
    pub inject_error: f64,
}

pub fn run(args: &GradcheckArgs) -> Result<(), CliError> {
    let kinds: Vec<LossKind> = if args.loss == "all" {
        LossKind::ALL.to_vec()
    } else {
        vec![parse_loss(&args.loss)?]
    };
    let cfg = GradCheckConfig {
        trials: args.trials,
        tolerance: args.tol,
        seed: args.seed,
        max_labels: args.max_labels,
        perturbation: args.inject_error,
        ..GradCheckConfig::default()
    };

    println!(
        "{:<14} {:>7} {:>12} {:>9}  status",
        "loss", "trials", "max_error", "failures"
    );
    let mut failed = Vec::new();
    for kind in kinds {
        let report = check_kind(kind, &cfg);
        println!(
            "{:<14} {:>7} {:>12.3e} {:>9}  {}",
            report.kind.name(),
            report.trials,
            report.max_error,
            report.failures,
            if report.passed { "pass" } else { "FAIL" }
        );
        if !report.passed {
            failed.push(report.kind.name());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "gradient check failed for: {}",
            failed.join(", ")
        )))
    }
}
