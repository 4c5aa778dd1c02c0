//! Checks the expected-risk machinery against oracles that share none of
//! its code: Monte-Carlo sampling, the closed-form cross-entropy minimizer,
//! and finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zlpr::losses::{evaluate_loss, LossKind, LossSpec};
use zlpr::risk::{
    bce_logodds_solution, expected_loss, minimize_expected_loss, JointLabelDistribution,
};
use zlpr::types::LogitVector;

fn random_interior_joint(rng: &mut ChaCha8Rng, max_labels: usize) -> JointLabelDistribution {
    let width = rng.gen_range(1..=max_labels);
    let raw: Vec<f64> = (0..1usize << width)
        .map(|_| rng.gen_range(0.05..1.0))
        .collect();
    let total: f64 = raw.iter().sum();
    JointLabelDistribution::new(width, raw.iter().map(|v| v / total).collect()).unwrap()
}

#[test]
fn expected_loss_matches_monte_carlo_sampling() {
    let joint = JointLabelDistribution::example_coupled_pair();
    let scores = LogitVector::new(vec![0.7, -0.3]).unwrap();
    let draws = 300_000usize;
    for kind in [LossKind::Zlpr, LossKind::Bce] {
        let spec = LossSpec::new(kind);
        let exact = expected_loss(&joint, &scores, &spec).unwrap().value;

        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..draws {
            let mask = joint.sample(&mut rng);
            let label = joint.label_for_mask(mask);
            let value = evaluate_loss(&spec, &label, &scores).unwrap().value;
            sum += value;
            sum_sq += value * value;
        }
        let mean = sum / draws as f64;
        let variance = (sum_sq - draws as f64 * mean * mean) / (draws as f64 - 1.0);
        let std_err = (variance / draws as f64).sqrt();
        assert!(
            (mean - exact).abs() <= 3.0 * std_err + 1e-12,
            "{kind}: exact {exact} vs sampled {mean} (std err {std_err})"
        );
    }
}

#[test]
fn bce_minimizer_matches_the_log_odds_formula_on_random_joints() {
    let mut rng = ChaCha8Rng::seed_from_u64(72);
    for _ in 0..10 {
        let joint = random_interior_joint(&mut rng, 4);
        let closed_form = bce_logodds_solution(&joint).unwrap();
        let init = LogitVector::new(vec![0.0; joint.label_count()]).unwrap();
        let report =
            minimize_expected_loss(&joint, &LossSpec::new(LossKind::Bce), &init, 1e-8).unwrap();
        assert!(report.dependence_corrections.is_none());
        for (numeric, analytic) in report.scores.iter().zip(&closed_form) {
            assert!(
                (numeric - analytic).abs() <= 1e-4,
                "descent {numeric} vs log-odds {analytic}"
            );
        }
    }
}

#[test]
fn stationary_scores_split_into_marginal_and_dependence_halves() {
    let mut rng = ChaCha8Rng::seed_from_u64(73);
    for _ in 0..10 {
        let joint = random_interior_joint(&mut rng, 3);
        let init = LogitVector::new(vec![0.0; joint.label_count()]).unwrap();
        let report =
            minimize_expected_loss(&joint, &LossSpec::new(LossKind::Zlpr), &init, 1e-8).unwrap();
        let corrections = report
            .dependence_corrections
            .as_ref()
            .expect("interior marginals");
        for (l, &c) in corrections.iter().enumerate() {
            let reconstructed = 0.5 * (report.marginal_logits[l] + c);
            assert!(
                (report.scores[l] - reconstructed).abs() <= 1e-4,
                "label {l}: score {} vs decomposition {reconstructed}",
                report.scores[l]
            );
        }
    }
}

#[test]
fn expected_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(74);
    let joint = JointLabelDistribution::example_coupled_pair();
    let kinds = [
        LossKind::Zlpr,
        LossKind::Tlpr,
        LossKind::SoftZlpr,
        LossKind::Bce,
        LossKind::Focal,
        LossKind::Dice1,
        LossKind::Lsep,
        LossKind::LsepSampled,
        LossKind::BpmllLog,
    ];
    let h = 1e-6;
    for kind in kinds {
        let mut spec = LossSpec::new(kind);
        spec.threshold = 0.4;
        let scores: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let result = expected_loss(
            &joint,
            &LogitVector::new(scores.clone()).unwrap(),
            &spec,
        )
        .unwrap();
        for l in 0..2 {
            let mut plus = scores.clone();
            plus[l] += h;
            let mut minus = scores.clone();
            minus[l] -= h;
            let up = expected_loss(&joint, &LogitVector::new(plus).unwrap(), &spec)
                .unwrap()
                .value;
            let down = expected_loss(&joint, &LogitVector::new(minus).unwrap(), &spec)
                .unwrap()
                .value;
            let fd = (up - down) / (2.0 * h);
            assert!(
                (fd - result.gradient[l]).abs() <= 1e-6 * result.gradient[l].abs().max(1.0),
                "{kind}, label {l}: finite difference {fd} vs gradient {}",
                result.gradient[l]
            );
        }
    }
}
