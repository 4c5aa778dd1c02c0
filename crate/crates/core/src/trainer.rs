//! Deterministic desk-scale training: a linear scorer, analytic
//! backpropagation through any loss kind, hand-rolled Adam, and model
//! evaluation.
//!
//! Given the seeds, training is bit-reproducible: weights initialize from
//! ChaCha8 on `init_seed`, and epoch `e` shuffles with stream `e + 1` of
//! `shuffle_seed` (see [`crate::data::batch_iterator`]).

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{batch_iterator, Dataset, Example};
use crate::losses::{
    decide, evaluate_batch, DecisionRule, LossError, LossSpec, ScoreBatch,
};
use crate::metrics::{aggregate_report, EvaluationRecord, MetricsError, MetricsReport};
use crate::types::{DomainError, LogitVector};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("model expects {expected} features, got {got}")]
    FeatureMismatch { expected: usize, got: usize },
    #[error("model scores {expected} categories but the data carries {got}")]
    LabelMismatch { expected: usize, got: usize },
    #[error("optimizer tracks {expected} parameters, got {got} gradients")]
    ParameterMismatch { expected: usize, got: usize },
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("{role} dataset is empty")]
    EmptyDataset { role: &'static str },
    #[error("invalid training settings: {message}")]
    Config { message: String },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Format(#[from] serde_json::Error),
}

/// How a saved model came to be: everything needed to reproduce it and to
/// evaluate it the same way later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Name of the random generator family ("chacha8").
    pub generator: String,
    pub init_seed: u64,
    pub shuffle_seed: u64,
    pub loss: String,
    pub decision_rule: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dataset: String,
}

/// A linear scorer `s = W·x + b` with `W` stored row-major (`L×F`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    feature_count: usize,
    label_count: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    pub provenance: Option<Provenance>,
}

impl LinearModel {
    /// Initializes weights uniformly in `[-1/√F, +1/√F]` from `init_seed`
    /// and the bias at zero.
    pub fn init(feature_count: usize, label_count: usize, init_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
        let bound = 1.0 / (feature_count as f64).sqrt();
        let weights = (0..feature_count * label_count)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        Self {
            feature_count,
            label_count,
            weights,
            bias: vec![0.0; label_count],
            provenance: None,
        }
    }

    pub fn zeros(feature_count: usize, label_count: usize) -> Self {
        Self {
            feature_count,
            label_count,
            weights: vec![0.0; feature_count * label_count],
            bias: vec![0.0; label_count],
            provenance: None,
        }
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn weight(&self, label: usize, feature: usize) -> f64 {
        self.weights[label * self.feature_count + feature]
    }

    pub fn set_weight(&mut self, label: usize, feature: usize, value: f64) {
        self.weights[label * self.feature_count + feature] = value;
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn set_bias(&mut self, label: usize, value: f64) {
        self.bias[label] = value;
    }

    pub fn forward(&self, features: &[f64]) -> Result<LogitVector, TrainError> {
        if features.len() != self.feature_count {
            return Err(TrainError::FeatureMismatch {
                expected: self.feature_count,
                got: features.len(),
            });
        }
        let scores = (0..self.label_count)
            .map(|l| {
                let row = &self.weights[l * self.feature_count..(l + 1) * self.feature_count];
                row.iter().zip(features).map(|(w, x)| w * x).sum::<f64>() + self.bias[l]
            })
            .collect();
        Ok(LogitVector::new(scores)?)
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn flatten(&self) -> Vec<f64> {
        self.weights.iter().chain(&self.bias).copied().collect()
    }

    fn unflatten(&mut self, params: &[f64]) {
        let split = self.weights.len();
        self.weights.copy_from_slice(&params[..split]);
        self.bias.copy_from_slice(&params[split..]);
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let model: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        if model.weights.len() != model.feature_count * model.label_count
            || model.bias.len() != model.label_count
        {
            return Err(TrainError::ParameterMismatch {
                expected: model.feature_count * model.label_count + model.label_count,
                got: model.weights.len() + model.bias.len(),
            });
        }
        if let Some((index, &value)) = model
            .weights
            .iter()
            .chain(&model.bias)
            .enumerate()
            .find(|(_, p)| !p.is_finite())
        {
            return Err(TrainError::Domain(DomainError::NonFiniteScore {
                index,
                value,
            }));
        }
        Ok(model)
    }
}

/// Adam with bias correction over one flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(parameter_count: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            first_moment: vec![0.0; parameter_count],
            second_moment: vec![0.0; parameter_count],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One update in place: `p -= lr · m̂ / (√v̂ + ε)` with bias-corrected
    /// moments.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), TrainError> {
        if params.len() != self.first_moment.len() || grads.len() != self.first_moment.len() {
            return Err(TrainError::ParameterMismatch {
                expected: self.first_moment.len(),
                got: params.len().max(grads.len()),
            });
        }
        self.step_count += 1;
        let correction1 = 1.0 - self.beta1.powi(self.step_count as i32);
        let correction2 = 1.0 - self.beta2.powi(self.step_count as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.first_moment[i] = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            self.second_moment[i] =
                self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.first_moment[i] / correction1;
            let v_hat = self.second_moment[i] / correction2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Training protocol settings. Defaults: 20 epochs, batches of 32,
/// learning rate 2e-4.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub loss: LossSpec,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub init_seed: u64,
    pub shuffle_seed: u64,
    /// `None` picks the loss kind's convention via
    /// [`default_decision_rule`].
    pub decision_rule: Option<DecisionRule>,
}

impl TrainConfig {
    pub fn new(loss: LossSpec) -> Self {
        Self {
            loss,
            epochs: 20,
            batch_size: 32,
            learning_rate: 2e-4,
            init_seed: 0,
            shuffle_seed: 0,
            decision_rule: None,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::Config {
                message: "epochs must be at least 1".to_string(),
            });
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config {
                message: "batch_size must be at least 1".to_string(),
            });
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(TrainError::Config {
                message: format!("learning_rate must be positive, got {}", self.learning_rate),
            });
        }
        self.loss.validate()?;
        Ok(())
    }
}

/// The decision rule a loss kind's scores are read with when none is
/// configured: strict zero thresholding where the loss trains an implicit
/// threshold, otherwise top-k with k = the training set's mean label
/// cardinality rounded (at least 1), since a pure ranking objective pins
/// down an order but no cut point.
pub fn default_decision_rule(spec: &LossSpec, train: &Dataset) -> DecisionRule {
    if spec.kind.is_rank_only() {
        let k = train.mean_cardinality().round() as usize;
        DecisionRule::TopK(k.clamp(1, train.label_count()))
    } else {
        DecisionRule::ZeroThreshold
    }
}

/// Parameter gradients of the batch objective, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGradients {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ParameterGradients {
    fn flatten(self) -> Vec<f64> {
        let mut flat = self.weights;
        flat.extend(self.bias);
        flat
    }
}

/// Batch objective value and its exact parameter gradients:
/// `∂J/∂W[l,f] = Σ_k g_k[l]·x_k[f]` and `∂J/∂b[l] = Σ_k g_k[l]`, where the
/// per-example logit gradients `g_k` already carry the batch-mean scale.
pub fn backward(
    model: &LinearModel,
    batch: &[&Example],
    spec: &LossSpec,
) -> Result<(f64, ParameterGradients), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyDataset { role: "batch" });
    }
    let mut logits = Vec::with_capacity(batch.len());
    let mut labels = Vec::with_capacity(batch.len());
    for example in batch {
        if example.label.label_count() != model.label_count {
            return Err(TrainError::LabelMismatch {
                expected: model.label_count,
                got: example.label.label_count(),
            });
        }
        logits.push(model.forward(&example.features)?);
        labels.push(example.label.clone());
    }
    let result = evaluate_batch(spec, &ScoreBatch::new(logits, labels)?)?;
    let mut grads = ParameterGradients {
        weights: vec![0.0; model.weights.len()],
        bias: vec![0.0; model.label_count],
    };
    for (example, gradient) in batch.iter().zip(&result.gradients) {
        for (l, g) in gradient.iter().enumerate() {
            let row = &mut grads.weights
                [l * model.feature_count..(l + 1) * model.feature_count];
            for (w, x) in row.iter_mut().zip(&example.features) {
                *w += g * x;
            }
            grads.bias[l] += g;
        }
    }
    Ok((result.value, grads))
}

/// One epoch's record: mean batch objective and the validation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

/// Trains a fresh linear model. Bit-deterministic given
/// `(config, datasets)`; the returned model carries its provenance block.
pub fn train(
    config: &TrainConfig,
    train_ds: &Dataset,
    val_ds: &Dataset,
) -> Result<(LinearModel, TrainHistory), TrainError> {
    config.validate()?;
    if train_ds.is_empty() {
        return Err(TrainError::EmptyDataset { role: "training" });
    }
    if val_ds.is_empty() {
        return Err(TrainError::EmptyDataset { role: "validation" });
    }
    if val_ds.feature_count() != train_ds.feature_count() {
        return Err(TrainError::FeatureMismatch {
            expected: train_ds.feature_count(),
            got: val_ds.feature_count(),
        });
    }
    if val_ds.label_count() != train_ds.label_count() {
        return Err(TrainError::LabelMismatch {
            expected: train_ds.label_count(),
            got: val_ds.label_count(),
        });
    }
    let rule = config
        .decision_rule
        .unwrap_or_else(|| default_decision_rule(&config.loss, train_ds));
    let mut model = LinearModel::init(
        train_ds.feature_count(),
        train_ds.label_count(),
        config.init_seed,
    );
    let mut adam = AdamState::new(model.parameter_count(), config.learning_rate);
    let mut history = TrainHistory {
        records: Vec::with_capacity(config.epochs),
    };
    for epoch in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut batch_count = 0usize;
        let batches = batch_iterator(train_ds, config.batch_size, config.shuffle_seed, epoch as u64);
        for (batch_index, batch) in batches.iter().enumerate() {
            let (value, grads) = match backward(&model, batch, &config.loss) {
                Ok(out) => out,
                Err(TrainError::Domain(DomainError::NonFiniteScore { .. })) => {
                    return Err(TrainError::NonFiniteLoss {
                        epoch,
                        batch: batch_index,
                    })
                }
                Err(other) => return Err(other),
            };
            if !value.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                });
            }
            let mut params = model.flatten();
            adam.step(&mut params, &grads.flatten())?;
            model.unflatten(&params);
            loss_sum += value;
            batch_count += 1;
        }
        history.records.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batch_count as f64,
            validation: evaluate(&model, val_ds, rule)?,
        });
    }
    model.provenance = Some(Provenance {
        generator: "chacha8".to_string(),
        init_seed: config.init_seed,
        shuffle_seed: config.shuffle_seed,
        loss: config.loss.kind.name().to_string(),
        decision_rule: rule.to_string(),
        epochs: config.epochs,
        batch_size: config.batch_size,
        learning_rate: config.learning_rate,
        dataset: train_ds.name().to_string(),
    });
    Ok((model, history))
}

/// Scores every example, hardens the scores with the rule, and aggregates
/// the metrics report.
pub fn evaluate(
    model: &LinearModel,
    ds: &Dataset,
    rule: DecisionRule,
) -> Result<MetricsReport, TrainError> {
    if ds.is_empty() {
        return Err(TrainError::EmptyDataset { role: "evaluation" });
    }
    let mut records = Vec::with_capacity(ds.len());
    for example in ds.examples() {
        let scores = model.forward(&example.features)?;
        let predicted = decide(&scores, rule)?;
        records.push(EvaluationRecord::new(
            example.label.clone(),
            predicted,
            scores,
        )?);
    }
    Ok(aggregate_report(&records)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, GeneratorMode, SyntheticSpec};
    use crate::losses::LossKind;
    use crate::numerics::symmetric_relative_error;
    use crate::types::MultiHotLabel;

    fn example(features: &[f64], positives: &[usize], label_count: usize) -> Example {
        Example {
            features: features.to_vec(),
            label: MultiHotLabel::from_indices(label_count, positives).unwrap(),
        }
    }

    #[test]
    fn forward_is_a_matrix_product() {
        let zero = LinearModel::zeros(2, 3);
        assert_eq!(zero.forward(&[1.0, -2.0]).unwrap().scores(), &[0.0; 3]);

        let mut identity = LinearModel::zeros(2, 2);
        identity.set_weight(0, 0, 1.0);
        identity.set_weight(1, 1, 1.0);
        assert_eq!(
            identity.forward(&[1.0, -2.0]).unwrap().scores(),
            &[1.0, -2.0]
        );

        let mut model = LinearModel::zeros(2, 3);
        // W = [[1, 2], [3, 4], [5, 6]], b = [0.5, -0.5, 0.25]
        let rows = [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        for (l, row) in rows.iter().enumerate() {
            for (f, w) in row.iter().enumerate() {
                model.set_weight(l, f, *w);
            }
        }
        model.set_bias(0, 0.5);
        model.set_bias(1, -0.5);
        model.set_bias(2, 0.25);
        let x = [0.5, -1.5];
        let s = model.forward(&x).unwrap();
        // Hand multiply.
        assert_eq!(
            s.scores(),
            &[
                1.0 * 0.5 + 2.0 * -1.5 + 0.5,
                3.0 * 0.5 + 4.0 * -1.5 - 0.5,
                5.0 * 0.5 + 6.0 * -1.5 + 0.25
            ]
        );
        assert!(matches!(
            model.forward(&[1.0]),
            Err(TrainError::FeatureMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn initialization_respects_the_fan_in_bound() {
        let model = LinearModel::init(16, 4, 3);
        let bound = 1.0 / 4.0;
        for l in 0..4 {
            for f in 0..16 {
                assert!(model.weight(l, f).abs() <= bound);
            }
        }
        assert_eq!(model.bias(), &[0.0; 4]);
        assert_eq!(model, LinearModel::init(16, 4, 3));
        assert_ne!(model, LinearModel::init(16, 4, 4));
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut params = vec![1.0, -2.0, 0.5];
        let mut adam = AdamState::new(3, 2e-4);
        adam.step(&mut params, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(params, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn adam_first_step_moves_by_the_learning_rate() {
        let mut params = vec![0.0];
        let mut adam = AdamState::new(1, 2e-4);
        adam.step(&mut params, &[1.0]).unwrap();
        assert!((params[0] + 2e-4).abs() < 1e-8, "step {}", params[0]);
        // Sign of the gradient, not its size: a tiny gradient moves the
        // parameter by nearly the same amount.
        let mut params = vec![0.0];
        let mut adam = AdamState::new(1, 2e-4);
        adam.step(&mut params, &[1e-3]).unwrap();
        assert!((params[0] + 2e-4).abs() < 1e-7, "step {}", params[0]);
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let mut params = vec![1.0];
        let mut adam = AdamState::new(1, 0.05);
        let mut last = params[0] * params[0];
        for _ in 0..10 {
            let grads = vec![2.0 * params[0]];
            adam.step(&mut params, &grads).unwrap();
            let value = params[0] * params[0];
            assert!(value < last, "f stalled at {value}");
            last = value;
        }
    }

    #[test]
    fn adam_rejects_shape_mismatches() {
        let mut adam = AdamState::new(2, 1e-3);
        let mut params = vec![0.0, 0.0];
        assert!(matches!(
            adam.step(&mut params, &[1.0]),
            Err(TrainError::ParameterMismatch { expected: 2, .. })
        ));
    }

    #[test]
    fn backward_single_scalar_is_the_chain_rule() {
        let mut model = LinearModel::zeros(1, 1);
        model.set_weight(0, 0, 0.5);
        model.set_bias(0, -0.25);
        let ex = example(&[2.0], &[0], 1);
        let spec = LossSpec::new(LossKind::Bce);
        let (value, grads) = backward(&model, &[&ex], &spec).unwrap();
        let s = 0.5 * 2.0 - 0.25;
        let direct = crate::losses::evaluate_loss(
            &spec,
            &ex.label,
            &LogitVector::new(vec![s]).unwrap(),
        )
        .unwrap();
        assert_eq!(value, direct.value);
        assert_eq!(grads.weights, vec![direct.gradient[0] * 2.0]);
        assert_eq!(grads.bias, vec![direct.gradient[0]]);
    }

    #[test]
    fn backward_matches_finite_differences_for_every_kind() {
        let batch = [
            example(&[0.3, -0.7], &[0, 2], 3),
            example(&[-1.1, 0.4], &[1], 3),
            example(&[0.9, 0.2], &[0], 3),
        ];
        let refs: Vec<&Example> = batch.iter().collect();
        for kind in LossKind::ALL {
            let spec = LossSpec::new(kind);
            let mut model = LinearModel::init(2, 3, 17);
            // Shift weights away from hinge kinks and rank ties.
            model.set_bias(0, 0.11);
            model.set_bias(1, -0.23);
            model.set_bias(2, 0.37);
            let (_, grads) = backward(&model, &refs, &spec).unwrap();
            let analytic = grads.flatten();
            let base = model.flatten();
            let numeric = crate::numerics::finite_difference_gradient(
                |p| {
                    let mut probe = model.clone();
                    probe.unflatten(p);
                    backward(&probe, &refs, &spec).unwrap().0
                },
                &base,
                1e-5,
            )
            .unwrap();
            for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
                let error = symmetric_relative_error(*a, *n);
                assert!(
                    error < 1e-4,
                    "{kind} parameter {i}: analytic {a} vs numeric {n}"
                );
            }
        }
    }

    fn small_dataset(n: usize, noise: f64, seed: u64) -> Dataset {
        generate_synthetic(
            &SyntheticSpec {
                mode: GeneratorMode::Independent,
                example_count: n,
                feature_count: 8,
                label_count: 4,
                noise_std: noise,
                coupling: None,
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn training_is_bit_deterministic() {
        let ds = small_dataset(60, 0.2, 5);
        let (train_ds, val_ds, _) = crate::data::split(&ds, 0).unwrap();
        let mut config = TrainConfig::new(LossSpec::new(LossKind::Zlpr));
        config.epochs = 3;
        let (model_a, history_a) = train(&config, &train_ds, &val_ds).unwrap();
        let (model_b, history_b) = train(&config, &train_ds, &val_ds).unwrap();
        assert_eq!(model_a, model_b);
        assert_eq!(history_a, history_b);
        assert_eq!(
            serde_json::to_string(&model_a).unwrap(),
            serde_json::to_string(&model_b).unwrap()
        );
        assert_eq!(history_a.records.len(), 3);
        let provenance = model_a.provenance.as_ref().unwrap();
        assert_eq!(provenance.loss, "zlpr");
        assert_eq!(provenance.decision_rule, "zero_threshold");
        assert_eq!(provenance.learning_rate, 2e-4);
    }

    #[test]
    fn rank_only_losses_default_to_top_k() {
        let ds = small_dataset(50, 0.2, 6);
        let spec = LossSpec::new(LossKind::Lsep);
        let rule = default_decision_rule(&spec, &ds);
        let k = ds.mean_cardinality().round() as usize;
        assert_eq!(rule, DecisionRule::TopK(k.clamp(1, 4)));
        assert_eq!(
            default_decision_rule(&LossSpec::new(LossKind::Zlpr), &ds),
            DecisionRule::ZeroThreshold
        );
    }

    #[test]
    fn separable_data_is_overfit_to_perfect_subset_accuracy() {
        let ds = small_dataset(200, 0.0, 9);
        let mut config = TrainConfig::new(LossSpec::new(LossKind::Zlpr));
        config.epochs = 1000;
        config.learning_rate = 0.05;
        let (model, _) = train(&config, &ds, &ds).unwrap();
        let report = evaluate(&model, &ds, DecisionRule::ZeroThreshold).unwrap();
        assert_eq!(report.sub_acc, 1.0, "report: {report:?}");
    }

    #[test]
    fn loss_decreases_over_fifty_steps_for_smooth_kinds() {
        // Every label vector mixed, so the pair losses always have work.
        let patterns: [&[usize]; 6] = [&[0], &[1], &[2], &[0, 1], &[0, 2], &[1, 2]];
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let batch: Vec<Example> = patterns
            .iter()
            .cycle()
            .take(8)
            .map(|positives| {
                let features: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                example(&features, positives, 3)
            })
            .collect();
        let refs: Vec<&Example> = batch.iter().collect();
        for kind in LossKind::ALL {
            if matches!(kind, LossKind::HingeRank | LossKind::Warp) {
                continue; // subgradient methods may stall at kinks
            }
            let spec = LossSpec::new(kind);
            let mut model = LinearModel::init(4, 3, 31);
            let mut adam = AdamState::new(model.parameter_count(), 1e-2);
            let (initial, _) = backward(&model, &refs, &spec).unwrap();
            let mut value = initial;
            for _ in 0..50 {
                let (v, grads) = backward(&model, &refs, &spec).unwrap();
                value = v;
                let mut params = model.flatten();
                adam.step(&mut params, &grads.flatten()).unwrap();
                model.unflatten(&params);
            }
            assert!(
                value < initial,
                "{kind}: {initial} -> {value} after 50 steps"
            );
        }
    }

    #[test]
    fn model_files_round_trip() {
        let ds = small_dataset(40, 0.2, 12);
        let mut config = TrainConfig::new(LossSpec::new(LossKind::Bce));
        config.epochs = 2;
        let (model, _) = train(&config, &ds, &ds).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let back = LinearModel::load(&path).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn exploding_parameters_abort_training() {
        // Adam moves each parameter by about one learning rate per step, so
        // a learning rate at the float ceiling overflows the very next
        // forward pass.
        let ds = small_dataset(40, 0.0, 13);
        let mut config = TrainConfig::new(LossSpec::new(LossKind::Bce));
        config.epochs = 50;
        config.learning_rate = f64::MAX;
        match train(&config, &ds, &ds) {
            Err(TrainError::NonFiniteLoss { .. }) => {}
            Err(other) => panic!("expected the non-finite abort, got {other}"),
            Ok(_) => panic!("training should abort"),
        }
    }

    #[test]
    fn evaluation_composes_forward_decide_and_the_report() {
        let batch = [
            example(&[1.0, 0.0], &[0], 2),
            example(&[0.0, 1.0], &[1], 2),
            example(&[-1.0, -1.0], &[], 2),
        ];
        let ds = Dataset::new("hand".to_string(), 2, 2, batch.to_vec()).unwrap();
        // Oracle weights: each category keyed to one feature.
        let mut model = LinearModel::zeros(2, 2);
        model.set_weight(0, 0, 2.0);
        model.set_weight(1, 1, 2.0);
        let report = evaluate(&model, &ds, DecisionRule::ZeroThreshold).unwrap();
        assert_eq!(report.sub_acc, 1.0);
        // A zero model predicts nothing under the strict threshold.
        let zero = LinearModel::zeros(2, 2);
        let report = evaluate(&zero, &ds, DecisionRule::ZeroThreshold).unwrap();
        assert!((report.sub_acc - 1.0 / 3.0).abs() < 1e-15);
    }
}
