//! Split, train, score and evaluate one dataset for one seed.

use crate::dataio::{one_class_split, DatasetManifest, LabeledDataset, OneClassSplit};
use crate::error::{invalid, Result, RgpError};
use crate::fmt::parse_f64;
use crate::metrics::{evaluate, EvalResult};
use crate::rng_from_seed;
use crate::sampler::{TargetKind, TargetSpec};
use crate::scoring::{ScoreMode, ScoreModel};
use crate::trainer::{train, Checkpoint, TrainConfig, TrainReport};

/// Radius calibration always uses this seed, so every run on a given
/// latent dimension shares one target.
pub const CALIBRATION_SEED: u64 = 0x00C0_FFEE;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSettings {
    pub train_fraction: f64,
    pub latent_dim: usize,
    pub k: usize,
    pub lambda: f64,
    pub lr: f64,
    pub target: TargetKind,
    /// Explicit radii; calibrated when absent.
    pub radius: Option<f64>,
    pub inner_radius: Option<f64>,
    pub threshold_quantile: f64,
    /// Further training options as `key=value` pairs (see
    /// [`TrainConfig::set`]).
    pub train_overrides: Vec<(String, String)>,
}

impl ExperimentSettings {
    pub fn from_manifest(m: &DatasetManifest) -> Result<Self> {
        let mut s = Self {
            train_fraction: m.train_fraction,
            latent_dim: m.latent_dim,
            k: m.k,
            lambda: m.lambda,
            lr: m.lr,
            target: m.target.parse()?,
            radius: None,
            inner_radius: None,
            threshold_quantile: m.threshold_quantile,
            train_overrides: Vec::new(),
        };
        for (k, v) in &m.extra {
            s.apply(k, v)?;
        }
        Ok(s)
    }

    /// One override; unknown keys are kept for the training config, which
    /// rejects them later if it does not know them either.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || parse_f64(value).ok_or_else(|| invalid(format!("bad number {value:?} for {key}")));
        match key {
            "train_fraction" => self.train_fraction = num()?,
            "latent_dim" => self.latent_dim = value.parse().map_err(|_| invalid(format!("bad latent_dim {value:?}")))?,
            "k" => self.k = value.parse().map_err(|_| invalid(format!("bad k {value:?}")))?,
            "lambda" => self.lambda = num()?,
            "lr" => self.lr = num()?,
            "target" => self.target = value.parse()?,
            "radius" => self.radius = Some(num()?),
            "inner_radius" => self.inner_radius = Some(num()?),
            "threshold_quantile" => self.threshold_quantile = num()?,
            _ => self.train_overrides.push((key.to_string(), value.to_string())),
        }
        Ok(())
    }

    pub fn target_spec(&self) -> Result<TargetSpec> {
        let calibrated = TargetSpec::calibrated(self.target, self.latent_dim, &mut rng_from_seed(CALIBRATION_SEED))?;
        match (self.radius, self.inner_radius) {
            (None, None) => Ok(calibrated),
            (r, inner) => TargetSpec::new(
                self.target,
                self.latent_dim,
                r.unwrap_or(calibrated.radius()),
                inner.unwrap_or(calibrated.inner_radius()),
            ),
        }
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::new(self.target_spec()?);
        cfg.lambda = self.lambda;
        cfg.lr = self.lr;
        cfg.seed = seed;
        for (k, v) in &self.train_overrides {
            if !cfg.set(k, v)? {
                return Err(invalid(format!("unknown setting {k:?}")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub hard: EvalResult,
    pub soft: EvalResult,
    pub report: TrainReport,
    pub checkpoint: Checkpoint,
    pub split: OneClassSplit,
}

/// Splits `ds` with `seed`, trains with `seed`, and evaluates both score
/// modes on the test split.
pub fn run(ds: &LabeledDataset, settings: &ExperimentSettings, seed: u64) -> Result<ExperimentResult> {
    let split = one_class_split(ds, settings.train_fraction, seed)?;
    let cfg = settings.train_config(seed)?;
    let out = train(split.train.features.view(), &cfg)?;
    let projected = out.encoder.forward(split.train.features.view())?;
    let labels = split.test.labels.as_deref().ok_or_else(|| RgpError::DegenerateData("test split has no labels".into()))?;

    let mut results = Vec::with_capacity(2);
    for mode in [ScoreMode::Hard, ScoreMode::Soft { k: settings.k }] {
        let mut model = ScoreModel::new(out.encoder.clone(), cfg.target, projected.clone(), mode)?;
        model.calibrate(settings.threshold_quantile)?;
        let c = model.classify(split.test.features.view())?;
        results.push(evaluate(&c.scores, &c.labels, labels)?);
    }
    Ok(ExperimentResult {
        hard: results[0],
        soft: results[1],
        report: out.report,
        checkpoint: Checkpoint { config: cfg, encoder: out.encoder, decoder: out.decoder, projected_train: Some(projected) },
        split,
    })
}

/// Loads the manifest's data, applies `overrides`, and runs one seed.
pub fn run_manifest(manifest: &DatasetManifest, seed: u64, overrides: &[(String, String)]) -> Result<ExperimentResult> {
    let mut settings = ExperimentSettings::from_manifest(manifest)?;
    for (k, v) in overrides {
        settings.apply(k, v)?;
    }
    run(&manifest.load_dataset()?, &settings, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::sample_standard_normal;
    use crate::Label;
    use ndarray::{concatenate, Axis};
    use std::path::Path;

    fn blobs(seed: u64) -> LabeledDataset {
        let mut rng = rng_from_seed(seed);
        let normal = sample_standard_normal(4, 300, &mut rng) * 0.5;
        let abnormal = sample_standard_normal(4, 30, &mut rng) * 0.5 + 3.0;
        let x = concatenate(Axis(0), &[normal.view(), abnormal.view()]).unwrap();
        let labels = (0..330).map(|i| if i < 300 { Label::Normal } else { Label::Abnormal }).collect();
        LabeledDataset::new("blobs", x, Some(labels)).unwrap()
    }

    fn settings() -> ExperimentSettings {
        let m = DatasetManifest::parse("data=x.csv\nlatent_dim=4\nk=3\nepochs=40\nbatch_size=64\n", Path::new(".")).unwrap();
        ExperimentSettings::from_manifest(&m).unwrap()
    }

    #[test]
    fn separable_blobs_score_well() {
        let r = run(&blobs(1), &settings(), 7).unwrap();
        assert!(r.soft.auc.unwrap() > 0.95, "{:?}", r.soft);
        assert!(r.hard.auc.unwrap() > 0.95, "{:?}", r.hard);
        // 15 of 150 test normals sit above the 0.9 training quantile.
        assert!(r.soft.recall > 0.9 && r.soft.fp <= 30, "{:?}", r.soft);
        assert_eq!(r.split.train.len(), 150);
        assert_eq!(r.checkpoint.config.epochs, 40);
    }

    #[test]
    fn overrides_reach_training() {
        let mut s = settings();
        s.apply("lambda", "0").unwrap();
        s.apply("hidden", "8").unwrap();
        s.apply("target", "uohs").unwrap();
        let cfg = s.train_config(3).unwrap();
        assert_eq!(cfg.lambda, 0.0);
        assert_eq!(cfg.hidden, Some(vec![8]));
        assert_eq!(cfg.target.radius(), 1.0);
        s.apply("bogus", "1").unwrap();
        assert!(s.train_config(3).is_err());
    }

    #[test]
    fn target_calibration_is_seed_independent() {
        let s = settings();
        assert_eq!(s.train_config(1).unwrap().target, s.train_config(2).unwrap().target);
    }
}
