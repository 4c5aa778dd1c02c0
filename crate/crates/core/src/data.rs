//! Datasets: seeded synthetic generation, JSONL persistence, the 8:1:1
//! split, and per-epoch batching.
//!
//! Everything randomized here is a pure function of its seeds. The
//! generator is ChaCha8 seeded with `seed_from_u64`; per-epoch shuffles
//! reuse the dataset shuffle seed and select stream `epoch + 1`, so every
//! epoch sees a fresh but reproducible permutation.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::risk::JointLabelDistribution;
use crate::types::MultiHotLabel;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid generator settings: {message}")]
    Spec { message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("split needs at least 10 examples, got {size}")]
    TooSmall { size: usize },
}

/// One observation: a feature vector and its label set.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: MultiHotLabel,
}

/// An immutable collection of uniformly-shaped examples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    feature_count: usize,
    label_count: usize,
    examples: Vec<Example>,
}

impl Dataset {
    pub fn new(
        name: String,
        feature_count: usize,
        label_count: usize,
        examples: Vec<Example>,
    ) -> Result<Self, DataError> {
        for (index, example) in examples.iter().enumerate() {
            if example.features.len() != feature_count {
                return Err(DataError::Schema {
                    line: index + 2,
                    message: format!(
                        "example has {} features, expected {feature_count}",
                        example.features.len()
                    ),
                });
            }
            if example.label.label_count() != label_count {
                return Err(DataError::Schema {
                    line: index + 2,
                    message: format!(
                        "example has {} categories, expected {label_count}",
                        example.label.label_count()
                    ),
                });
            }
            if let Some(bad) = example.features.iter().find(|f| !f.is_finite()) {
                return Err(DataError::Schema {
                    line: index + 2,
                    message: format!("non-finite feature {bad}"),
                });
            }
        }
        Ok(Self {
            name,
            feature_count,
            label_count,
            examples,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Mean number of positive categories per example.
    pub fn mean_cardinality(&self) -> f64 {
        if self.examples.is_empty() {
            return 0.0;
        }
        let total: usize = self
            .examples
            .iter()
            .map(|e| e.label.positive_count())
            .sum();
        total as f64 / self.examples.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorMode {
    /// Each category gets its own ground-truth hyperplane; bits are set
    /// independently given the features.
    Independent,
    /// Label configurations are drawn from an explicit joint distribution
    /// and features cluster around a per-configuration centroid, so the
    /// labels carry dependence that no set of per-category marginals can
    /// express.
    Coupled,
}

impl fmt::Display for GeneratorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorMode::Independent => "independent",
            GeneratorMode::Coupled => "coupled",
        })
    }
}

impl FromStr for GeneratorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "independent" => Ok(GeneratorMode::Independent),
            "coupled" => Ok(GeneratorMode::Coupled),
            other => Err(format!(
                "unknown generator mode '{other}' (expected independent or coupled)"
            )),
        }
    }
}

/// Settings for [`generate_synthetic`].
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub mode: GeneratorMode,
    pub example_count: usize,
    pub feature_count: usize,
    pub label_count: usize,
    /// Independent mode: standard deviation of the noise added to each
    /// hyperplane score. Coupled mode: standard deviation of the feature
    /// scatter around each configuration centroid.
    pub noise_std: f64,
    /// Required in coupled mode; must match `label_count`.
    pub coupling: Option<JointLabelDistribution>,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let fail = |message: String| Err(DataError::Spec { message });
        if self.example_count == 0 {
            return fail("example_count must be at least 1".to_string());
        }
        if self.feature_count == 0 {
            return fail("feature_count must be at least 1".to_string());
        }
        if self.label_count == 0 {
            return fail("label_count must be at least 1".to_string());
        }
        if !self.noise_std.is_finite() || self.noise_std < 0.0 {
            return fail(format!("noise_std must be finite and >= 0, got {}", self.noise_std));
        }
        match (self.mode, &self.coupling) {
            (GeneratorMode::Coupled, None) => {
                fail("coupled mode needs a coupling distribution".to_string())
            }
            (GeneratorMode::Coupled, Some(joint)) if joint.label_count() != self.label_count => {
                fail(format!(
                    "coupling has {} categories but the dataset wants {}",
                    joint.label_count(),
                    self.label_count
                ))
            }
            (GeneratorMode::Independent, Some(_)) => {
                fail("independent mode does not take a coupling distribution".to_string())
            }
            _ => Ok(()),
        }
    }
}

/// Distance of the per-configuration centroids from the origin in coupled
/// mode, before standardization.
const CENTROID_SCALE: f64 = 3.0;

fn standardize(examples: &mut [Example], feature_count: usize) {
    let n = examples.len() as f64;
    for d in 0..feature_count {
        let mean = examples.iter().map(|e| e.features[d]).sum::<f64>() / n;
        let variance = examples
            .iter()
            .map(|e| (e.features[d] - mean).powi(2))
            .sum::<f64>()
            / n;
        let std = variance.sqrt();
        for example in examples.iter_mut() {
            example.features[d] -= mean;
            if std > 1e-12 {
                example.features[d] /= std;
            }
        }
    }
}

/// Generates a dataset deterministically from `(spec, seed)`. Features are
/// standardized to zero mean and unit variance per dimension over the
/// generated sample.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Dataset, DataError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
    let mut examples = Vec::with_capacity(spec.example_count);
    match spec.mode {
        GeneratorMode::Independent => {
            let hyperplanes: Vec<Vec<f64>> = (0..spec.label_count)
                .map(|_| (0..spec.feature_count).map(|_| normal(&mut rng)).collect())
                .collect();
            for _ in 0..spec.example_count {
                let features: Vec<f64> =
                    (0..spec.feature_count).map(|_| normal(&mut rng)).collect();
                let bits: Vec<bool> = hyperplanes
                    .iter()
                    .map(|w| {
                        let score: f64 =
                            w.iter().zip(&features).map(|(wi, xi)| wi * xi).sum();
                        score + spec.noise_std * normal(&mut rng) > 0.0
                    })
                    .collect();
                examples.push(Example {
                    features,
                    label: MultiHotLabel::new(bits).expect("label_count >= 1"),
                });
            }
        }
        GeneratorMode::Coupled => {
            let joint = spec.coupling.as_ref().expect("validated above");
            // One centroid per configuration with mass, in mask order.
            let centroids: Vec<(usize, Vec<f64>)> = joint
                .configurations()
                .filter(|&(_, p)| p > 0.0)
                .map(|(mask, _)| {
                    let centroid = (0..spec.feature_count)
                        .map(|_| CENTROID_SCALE * normal(&mut rng))
                        .collect();
                    (mask, centroid)
                })
                .collect();
            for _ in 0..spec.example_count {
                let mask = joint.sample(&mut rng);
                let centroid = &centroids
                    .iter()
                    .find(|(m, _)| *m == mask)
                    .expect("sample stays on the support")
                    .1;
                let features: Vec<f64> = centroid
                    .iter()
                    .map(|c| c + spec.noise_std * normal(&mut rng))
                    .collect();
                examples.push(Example {
                    features,
                    label: joint.label_for_mask(mask),
                });
            }
        }
    }
    standardize(&mut examples, spec.feature_count);
    let name = format!(
        "synthetic-{}-n{}-f{}-l{}-seed{}",
        spec.mode, spec.example_count, spec.feature_count, spec.label_count, seed
    );
    Dataset::new(name, spec.feature_count, spec.label_count, examples)
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    name: String,
    num_features: usize,
    num_labels: usize,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    features: Vec<f64>,
    labels: Vec<usize>,
}

/// Serializes a dataset in the JSONL format: one header object
/// (`name`, `num_features`, `num_labels`) followed by one record object
/// (`features`, `labels` as sorted positive indices) per example.
pub fn dataset_to_jsonl(ds: &Dataset) -> String {
    let mut out = String::new();
    let header = HeaderLine {
        name: ds.name.clone(),
        num_features: ds.feature_count,
        num_labels: ds.label_count,
    };
    out.push_str(&serde_json::to_string(&header).expect("header serializes"));
    out.push('\n');
    for example in &ds.examples {
        let record = RecordLine {
            features: example.features.clone(),
            labels: example.label.to_indices(),
        };
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<(), DataError> {
    fs::write(path, dataset_to_jsonl(ds))?;
    Ok(())
}

/// Parses the JSONL format; errors carry 1-based line numbers.
pub fn dataset_from_jsonl(text: &str) -> Result<Dataset, DataError> {
    let mut lines = text.lines().enumerate();
    let Some((_, header_line)) = lines.next() else {
        return Err(DataError::Parse {
            line: 1,
            message: "empty file: expected a header object".to_string(),
        });
    };
    let header: HeaderLine =
        serde_json::from_str(header_line).map_err(|e| DataError::Parse {
            line: 1,
            message: format!("bad header: {e}"),
        })?;
    let mut examples = Vec::new();
    for (index, raw) in lines {
        let line = index + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: RecordLine = serde_json::from_str(raw).map_err(|e| DataError::Parse {
            line,
            message: format!("bad record: {e}"),
        })?;
        if record.features.len() != header.num_features {
            return Err(DataError::Schema {
                line,
                message: format!(
                    "record has {} features, expected {}",
                    record.features.len(),
                    header.num_features
                ),
            });
        }
        if let Some(bad) = record.features.iter().find(|f| !f.is_finite()) {
            return Err(DataError::Schema {
                line,
                message: format!("non-finite feature {bad}"),
            });
        }
        let label = MultiHotLabel::from_indices(header.num_labels, &record.labels)
            .map_err(|e| DataError::Schema {
                line,
                message: e.to_string(),
            })?;
        examples.push(Example {
            features: record.features,
            label,
        });
    }
    Dataset::new(header.name, header.num_features, header.num_labels, examples)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DataError> {
    dataset_from_jsonl(&fs::read_to_string(path)?)
}

/// Shuffles with the seed and cuts 8:1:1 — validation and test each take
/// `floor(N/10)` examples, training keeps the remainder.
pub fn split(ds: &Dataset, seed: u64) -> Result<(Dataset, Dataset, Dataset), DataError> {
    if ds.len() < 10 {
        return Err(DataError::TooSmall { size: ds.len() });
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let tenth = ds.len() / 10;
    let train_len = ds.len() - 2 * tenth;
    let gather = |slice: &[usize], suffix: &str| {
        Dataset::new(
            format!("{}-{suffix}", ds.name),
            ds.feature_count,
            ds.label_count,
            slice.iter().map(|&i| ds.examples[i].clone()).collect(),
        )
        .expect("examples come from a valid dataset")
    };
    Ok((
        gather(&order[..train_len], "train"),
        gather(&order[train_len..train_len + tenth], "val"),
        gather(&order[train_len + tenth..], "test"),
    ))
}

/// Batches for one epoch: a seeded permutation of the dataset cut into
/// chunks of `batch_size`, final partial chunk kept. Epoch `e` uses RNG
/// stream `e + 1` of `shuffle_seed`, so epochs differ but rerunning an
/// epoch reproduces it.
///
/// Panics if `batch_size` is zero.
pub fn batch_iterator(
    ds: &Dataset,
    batch_size: usize,
    shuffle_seed: u64,
    epoch: u64,
) -> Vec<Vec<&Example>> {
    assert!(batch_size >= 1, "batch_size must be at least 1");
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    rng.set_stream(epoch + 1);
    order.shuffle(&mut rng);
    order
        .chunks(batch_size)
        .map(|chunk| chunk.iter().map(|&i| &ds.examples[i]).collect())
        .collect()
}
