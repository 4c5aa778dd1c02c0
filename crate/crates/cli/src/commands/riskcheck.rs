//! `zlpr riskcheck`: minimize the exact expected loss over an explicit
//! joint label distribution, print the minimizer and its decomposition,
//! and verify the closed-form cross-checks.

use std::path::PathBuf;

use zlpr::losses::{soft_zlpr, LossKind, LossSpec};
use zlpr::numerics::stable_sigmoid;
use zlpr::risk::{
    bce_logodds_solution, descend, minimize_expected_loss, JointLabelDistribution, RiskError,
    MAX_DESCENT_ITERATIONS,
};
use zlpr::types::{LogitVector, SoftLabel};

use crate::commands::parse_loss;
use crate::error::CliError;

/// Agreement bound for every closed-form comparison the command runs.
const CHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, clap::Args)]
pub struct RiskcheckArgs {
    /// Joint label distribution file.
    #[arg(long, conflicts_with = "builtin")]
    pub joint: Option<PathBuf>,
    /// Named built-in joint: "bernoulli-075" (L=1, P(1)=0.75) or
    /// "coupled-pair" (L=2 with strong positive coupling).
    #[arg(long)]
    pub builtin: Option<String>,
    /// Loss whose expected value is minimized.
    #[arg(long, default_value = "zlpr")]
    pub loss: String,
    /// Score threshold for tlpr.
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,
    /// Descent stopping tolerance on the gradient max-norm.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

fn resolve_joint(args: &RiskcheckArgs) -> Result<(JointLabelDistribution, String), CliError> {
    match (&args.joint, &args.builtin) {
        (Some(path), None) => Ok((
            JointLabelDistribution::load(path)?,
            path.display().to_string(),
        )),
        (None, Some(name)) => match name.as_str() {
            "bernoulli-075" => Ok((
                JointLabelDistribution::bernoulli(0.75).expect("0.75 is interior"),
                name.clone(),
            )),
            "coupled-pair" => Ok((
                JointLabelDistribution::example_coupled_pair(),
                name.clone(),
            )),
            other => Err(CliError::Usage(format!(
                "unknown built-in joint '{other}' (expected bernoulli-075 or coupled-pair)"
            ))),
        },
        _ => Err(CliError::Usage(
            "provide exactly one of --joint or --builtin".to_string(),
        )),
    }
}

fn fmt_vec(values: &[f64]) -> String {
    let inner: Vec<String> = values.iter().map(|v| format!("{v:.6}")).collect();
    format!("[{}]", inner.join(", "))
}

pub fn run(args: &RiskcheckArgs) -> Result<(), CliError> {
    let (joint, source) = resolve_joint(args)?;
    let kind = parse_loss(&args.loss)?;
    let mut spec = LossSpec::new(kind);
    spec.threshold = args.threshold;
    let zeros = LogitVector::new(vec![0.0; joint.label_count()]).expect("zeros are finite");

    println!("joint: {source} (L = {})", joint.label_count());
    println!("loss: {kind}");

    let report = match minimize_expected_loss(&joint, &spec, &zeros, args.tol) {
        Ok(report) => report,
        Err(RiskError::NoConvergence {
            iterations,
            gradient_norm,
            best,
        }) => {
            println!("did not converge after {iterations} iterations");
            println!("best iterate: {}", fmt_vec(&best.position));
            println!("best value: {:.6}", best.value);
            println!("best gradient max-norm: {:.3e}", best.gradient_norm);
            return Err(CliError::Numerical(format!(
                "descent stalled at gradient max-norm {gradient_norm:.3e} (tolerance {:.3e})",
                args.tol
            )));
        }
        Err(e) => return Err(e.into()),
    };

    println!("minimizer: {}", fmt_vec(&report.scores));
    println!("expected loss at minimizer: {:.6}", report.value);
    println!(
        "gradient max-norm: {:.3e} ({} iterations)",
        report.gradient_norm, report.iterations
    );
    println!("marginal log-odds: {}", fmt_vec(&report.marginal_logits));

    let mut failures: Vec<String> = Vec::new();

    if let Some(corrections) = &report.dependence_corrections {
        println!("dependence corrections: {}", fmt_vec(corrections));
        let max_coupling = corrections.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        println!("max |dependence correction|: {max_coupling:.6}");
        let residual = report
            .scores
            .iter()
            .zip(report.marginal_logits.iter().zip(corrections))
            .map(|(s, (t1, t2))| (s - 0.5 * (t1 + t2)).abs())
            .fold(0.0_f64, f64::max);
        let ok = residual <= CHECK_TOLERANCE;
        println!(
            "check decomposition s = (log-odds + correction)/2: residual {residual:.3e} -> {}",
            if ok { "ok" } else { "FAILED" }
        );
        if !ok {
            failures.push("decomposition".to_string());
        }
    } else if kind == LossKind::Zlpr {
        println!("dependence corrections: undefined (a marginal sits at 0 or 1)");
    }

    // Cross-check: the expected binary cross-entropy has a closed-form
    // minimizer at the per-category log-odds. Run it regardless of --loss.
    match bce_logodds_solution(&joint) {
        Ok(closed_form) => {
            let bce_report =
                minimize_expected_loss(&joint, &LossSpec::new(LossKind::Bce), &zeros, args.tol)?;
            let deviation = bce_report
                .scores
                .iter()
                .zip(&closed_form)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            let ok = deviation <= CHECK_TOLERANCE;
            println!(
                "check bce minimizer vs log-odds {}: deviation {deviation:.3e} -> {}",
                fmt_vec(&closed_form),
                if ok { "ok" } else { "FAILED" }
            );
            if !ok {
                failures.push("bce-log-odds".to_string());
            }
        }
        Err(RiskError::DegenerateMarginal { label, .. }) => {
            println!("check bce minimizer vs log-odds: skipped (category {label} is degenerate)");
        }
        Err(e) => return Err(e.into()),
    }

    // Cross-check: minimizing the soft pairwise rank loss against targets
    // p leaves sigmoid(2 s*) = p, so the marginals are recoverable from
    // the minimizer.
    let marginals = joint.marginals();
    if marginals.iter().all(|&p| p > 0.0 && p < 1.0) {
        let targets = SoftLabel::new(marginals.clone()).expect("interior marginals");
        let objective = |s: &[f64]| {
            let result = soft_zlpr(
                &targets,
                &LogitVector::new(s.to_vec()).expect("descent keeps scores finite"),
            )
            .expect("soft loss accepts interior targets");
            (result.value, result.gradient)
        };
        let outcome = descend(
            objective,
            zeros.scores(),
            args.tol,
            MAX_DESCENT_ITERATIONS,
        )?;
        let recovery = outcome
            .position
            .iter()
            .zip(&marginals)
            .map(|(&s, &p)| (stable_sigmoid(2.0 * s) - p).abs())
            .fold(0.0_f64, f64::max);
        let ok = recovery <= CHECK_TOLERANCE;
        println!(
            "check soft-loss marginal recovery: max |sigmoid(2s) - p| = {recovery:.3e} -> {}",
            if ok { "ok" } else { "FAILED" }
        );
        if !ok {
            failures.push("soft-recovery".to_string());
        }
    } else {
        println!("check soft-loss marginal recovery: skipped (degenerate marginal)");
    }

    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "risk checks failed: {}",
            failures.join(", ")
        )))
    }
}
