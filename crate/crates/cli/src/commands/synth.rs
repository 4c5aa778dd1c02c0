//! `zlpr synth`: generate a seeded synthetic dataset and write it with its
//! manifest.

use std::path::PathBuf;

use zlpr::data::{generate_synthetic, save_dataset, GeneratorMode, SyntheticSpec};
use zlpr::risk::JointLabelDistribution;

use crate::error::CliError;
use crate::manifest::RunManifest;

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    /// Label generator: independent hyperplanes or an explicit coupled
    /// joint distribution.
    #[arg(long)]
    pub mode: String,
    /// Feature dimension.
    #[arg(long)]
    pub features: usize,
    /// Number of categories.
    #[arg(long)]
    pub labels: usize,
    /// Number of examples.
    #[arg(long)]
    pub samples: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Noise scale (hyperplane score noise or centroid scatter).
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    /// Joint label distribution file; required for --mode coupled.
    #[arg(long)]
    pub coupling_file: Option<PathBuf>,
    /// Output directory for data.jsonl and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &SynthArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("synth");
    manifest
        .flag("mode", &args.mode)
        .flag("features", args.features)
        .flag("labels", args.labels)
        .flag("samples", args.samples)
        .flag("seed", args.seed)
        .flag("noise", args.noise)
        .flag("out", args.out.display());
    manifest.seed("generator", args.seed);

    let mode: GeneratorMode = args.mode.parse().map_err(CliError::Usage)?;
    let coupling = match (&mode, &args.coupling_file) {
        (GeneratorMode::Coupled, None) => {
            return Err(CliError::Usage(
                "--mode coupled requires --coupling-file".to_string(),
            ));
        }
        (GeneratorMode::Independent, Some(_)) => {
            return Err(CliError::Usage(
                "--coupling-file only applies to --mode coupled".to_string(),
            ));
        }
        (GeneratorMode::Coupled, Some(path)) => {
            manifest.flag("coupling-file", path.display());
            Some(JointLabelDistribution::load(path)?)
        }
        (GeneratorMode::Independent, None) => None,
    };

    let spec = SyntheticSpec {
        mode,
        example_count: args.samples,
        feature_count: args.features,
        label_count: args.labels,
        noise_std: args.noise,
        coupling,
    };
    let dataset = generate_synthetic(&spec, args.seed)?;

    std::fs::create_dir_all(&args.out)?;
    save_dataset(&dataset, &args.out.join("data.jsonl"))?;
    manifest.artifact("data.jsonl");
    manifest.write(&args.out)?;

    println!(
        "wrote {} ({} examples, {} features, {} categories, mean cardinality {:.3})",
        args.out.join("data.jsonl").display(),
        dataset.len(),
        dataset.feature_count(),
        dataset.label_count(),
        dataset.mean_cardinality()
    );
    Ok(())
}
