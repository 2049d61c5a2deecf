//! Anomaly scores computed from a trained encoder.
//!
//! Hard scores measure where `f(x)` sits relative to the target support:
//!
//! | target | score |
//! |--------|-------|
//! | UoHS | `abs(|f(x)| - r)` |
//! | GiHS, UiHS | `|f(x)|` |
//! | UbHS | `(|f(x)| - r) (|f(x)| - r_inner)`, negative inside the shell |
//!
//! Soft scores are the mean distance from `f(x)` to its `k` nearest
//! projected training rows. In both modes a row is abnormal when its score
//! is strictly greater than the threshold.

use std::io::Write;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};

use crate::divergence::sq_dist;
use crate::error::{invalid, mismatch, Result, RgpError};
use crate::fmt::f64_exact;
use crate::net::MlpParams;
use crate::sampler::{quantile_rank, TargetKind, TargetSpec};
use crate::Label;

pub const DEFAULT_THRESHOLD_QUANTILE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    Hard,
    Soft { k: usize },
}

impl FromStr for ScoreMode {
    type Err = RgpError;

    /// `hard`, `soft` (k = 3) or `soft:K`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "hard" => Ok(ScoreMode::Hard),
            "soft" => Ok(ScoreMode::Soft { k: 3 }),
            other => {
                let k = other
                    .strip_prefix("soft:")
                    .and_then(|k| k.parse::<usize>().ok())
                    .ok_or_else(|| invalid(format!("unknown score mode {other:?} (expected hard, soft or soft:K)")))?;
                Ok(ScoreMode::Soft { k })
            }
        }
    }
}

impl std::fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScoreMode::Hard => f.write_str("hard"),
            ScoreMode::Soft { k } => write!(f, "soft:{k}"),
        }
    }
}

/// Hard score of a latent point.
pub fn hard_score_latent(spec: &TargetSpec, z: &[f64]) -> f64 {
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = spec.radius();
    match spec.kind() {
        TargetKind::Uohs => (norm - r).abs(),
        TargetKind::Gihs | TargetKind::Uihs => norm,
        TargetKind::Ubhs => (norm - r) * (norm - spec.inner_radius()),
    }
}

/// Mean distance from `z` to its `k` nearest rows of `reference`. Ties at
/// the k-th distance go to the lower row index.
pub fn soft_score_latent(reference: ArrayView2<f64>, z: &[f64], k: usize) -> Result<f64> {
    knn_mean(reference, z, k, None)
}

fn knn_mean(reference: ArrayView2<f64>, z: &[f64], k: usize, skip: Option<usize>) -> Result<f64> {
    let n = reference.nrows() - usize::from(skip.is_some());
    if k == 0 || k > n {
        return Err(invalid(format!("k must be in 1..={n}, got {k}")));
    }
    if reference.ncols() != z.len() {
        return Err(mismatch(format!("reference rows have {} dims, query has {}", reference.ncols(), z.len())));
    }
    let mut d: Vec<(f64, usize)> = reference
        .rows()
        .into_iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .map(|(i, row)| {
            let s = match row.as_slice() {
                Some(sl) => sq_dist(sl, z),
                None => row.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum(),
            };
            (s, i)
        })
        .collect();
    let by_dist_then_index = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < n {
        d.select_nth_unstable_by(k - 1, by_dist_then_index);
    }
    let mut nearest = d[..k].to_vec();
    nearest.sort_by(by_dist_then_index);
    Ok(nearest.iter().map(|(s, _)| s.sqrt()).sum::<f64>() / k as f64)
}

/// The `ceil(p n)`-th smallest score (1-indexed).
pub fn calibrate_threshold(scores: &[f64], p: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(invalid("cannot calibrate a threshold from no scores"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("threshold quantile must be in (0, 1), got {p}")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(RgpError::Numerical("NaN training score".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[quantile_rank(p, sorted.len())])
}

/// Which training scores set the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Calibration {
    /// Training rows scored as if new, so each is its own nearest neighbour.
    WithSelf,
    /// Each training row scored against the others only; matches the
    /// distribution of scores on unseen normal rows.
    #[default]
    LeaveOneOut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub labels: Vec<Label>,
    pub scores: Vec<f64>,
}

impl Classification {
    pub fn abnormal_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_abnormal()).count()
    }

    /// `row_id,raw_score,predicted_label`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "row_id,raw_score,predicted_label")?;
        for (i, (s, l)) in self.scores.iter().zip(&self.labels).enumerate() {
            writeln!(out, "{i},{},{l}", f64_exact(*s))?;
        }
        Ok(())
    }
}

/// Encoder, target and projected training rows, plus the calibrated
/// threshold once [`ScoreModel::calibrate`] has run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreModel {
    encoder: MlpParams,
    spec: TargetSpec,
    projected_train: Array2<f64>,
    mode: ScoreMode,
    threshold: Option<f64>,
    threshold_quantile: f64,
}

impl ScoreModel {
    pub fn new(encoder: MlpParams, spec: TargetSpec, projected_train: Array2<f64>, mode: ScoreMode) -> Result<Self> {
        if encoder.out_dim() != spec.dim() {
            return Err(mismatch(format!("encoder outputs {} dims, target has {}", encoder.out_dim(), spec.dim())));
        }
        if projected_train.ncols() != spec.dim() {
            return Err(mismatch(format!(
                "projected training rows have {} dims, target has {}",
                projected_train.ncols(),
                spec.dim()
            )));
        }
        if let ScoreMode::Soft { k } = mode {
            if projected_train.nrows() == 0 {
                return Err(invalid("soft scoring needs projected training rows"));
            }
            if k == 0 || k > projected_train.nrows() {
                return Err(invalid(format!("k must be in 1..={}, got {k}", projected_train.nrows())));
            }
        }
        Ok(Self {
            encoder,
            spec,
            projected_train,
            mode,
            threshold: None,
            threshold_quantile: DEFAULT_THRESHOLD_QUANTILE,
        })
    }

    /// Projects `train` through the encoder, then calibrates at quantile `p`.
    pub fn fit(encoder: MlpParams, spec: TargetSpec, train: ArrayView2<f64>, mode: ScoreMode, p: f64) -> Result<Self> {
        let projected = encoder.forward(train)?;
        let mut model = Self::new(encoder, spec, projected, mode)?;
        model.calibrate(p)?;
        Ok(model)
    }

    pub fn encoder(&self) -> &MlpParams {
        &self.encoder
    }

    pub fn spec(&self) -> &TargetSpec {
        &self.spec
    }

    pub fn projected_train(&self) -> &Array2<f64> {
        &self.projected_train
    }

    pub fn mode(&self) -> ScoreMode {
        self.mode
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn threshold_quantile(&self) -> f64 {
        self.threshold_quantile
    }

    /// Switches scoring mode; the threshold must be recalibrated.
    pub fn with_mode(self, mode: ScoreMode) -> Result<Self> {
        Self::new(self.encoder, self.spec, self.projected_train, mode)
    }

    /// Scores of latent points.
    pub fn score_latent(&self, latent: ArrayView2<f64>) -> Result<Vec<f64>> {
        if latent.ncols() != self.spec.dim() {
            return Err(mismatch(format!("latent rows have {} dims, expected {}", latent.ncols(), self.spec.dim())));
        }
        latent
            .rows()
            .into_iter()
            .map(|row| {
                let z = row.to_vec();
                match self.mode {
                    ScoreMode::Hard => Ok(hard_score_latent(&self.spec, &z)),
                    ScoreMode::Soft { k } => soft_score_latent(self.projected_train.view(), &z, k),
                }
            })
            .collect()
    }

    pub fn score(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        let latent = self.encoder.forward(x)?;
        self.score_latent(latent.view())
    }

    pub fn score_one(&self, x: &[f64]) -> Result<f64> {
        let row = ArrayView2::from_shape((1, x.len()), x).expect("one row");
        Ok(self.score(row)?[0])
    }

    /// Scores of the training rows themselves; under soft scoring each row
    /// counts itself among its neighbours.
    pub fn train_scores(&self) -> Result<Vec<f64>> {
        self.score_latent(self.projected_train.view())
    }

    /// Like [`ScoreModel::train_scores`], but a soft score never uses the row
    /// itself as a neighbour. Hard scores are unchanged.
    pub fn train_scores_leave_one_out(&self) -> Result<Vec<f64>> {
        match self.mode {
            ScoreMode::Hard => self.train_scores(),
            ScoreMode::Soft { k } => self
                .projected_train
                .rows()
                .into_iter()
                .enumerate()
                .map(|(i, row)| knn_mean(self.projected_train.view(), &row.to_vec(), k, Some(i)))
                .collect(),
        }
    }

    /// Threshold from [`Calibration::LeaveOneOut`] training scores.
    pub fn calibrate(&mut self, p: f64) -> Result<f64> {
        self.calibrate_with(p, Calibration::LeaveOneOut)
    }

    pub fn calibrate_with(&mut self, p: f64, how: Calibration) -> Result<f64> {
        let scores = match how {
            Calibration::WithSelf => self.train_scores()?,
            Calibration::LeaveOneOut => self.train_scores_leave_one_out()?,
        };
        let t = calibrate_threshold(&scores, p)?;
        self.threshold = Some(t);
        self.threshold_quantile = p;
        Ok(t)
    }

    pub fn set_threshold(&mut self, threshold: f64) {
        self.threshold = Some(threshold);
    }

    pub fn classify(&self, x: ArrayView2<f64>) -> Result<Classification> {
        let threshold = self.threshold.ok_or_else(|| invalid("score model has no calibrated threshold"))?;
        if x.nrows() == 0 {
            if x.ncols() != self.encoder.in_dim() {
                return Err(mismatch("input column count does not match the encoder"));
            }
            return Ok(Classification { labels: Vec::new(), scores: Vec::new() });
        }
        let scores = self.score(x)?;
        let labels = scores
            .iter()
            .map(|&s| if s > threshold { Label::Abnormal } else { Label::Normal })
            .collect();
        Ok(Classification { labels, scores })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_params, Activation, Layer};
    use crate::rng_from_seed;
    use crate::sampler::sample_standard_normal;
    use ndarray::{array, Array1};
    use proptest::prelude::*;

    fn identity_encoder(d: usize) -> MlpParams {
        MlpParams::new(vec![Layer { weight: Array2::eye(d), bias: Array1::zeros(d), activation: Activation::Identity }]).unwrap()
    }

    #[test]
    fn hard_score_hand_cases() {
        let uohs = TargetSpec::new(TargetKind::Uohs, 2, 1.0, 0.0).unwrap();
        assert_eq!(hard_score_latent(&uohs, &[0.6, 0.8]), 0.0);
        let gihs = TargetSpec::new(TargetKind::Gihs, 3, 2.0, 0.0).unwrap();
        assert_eq!(hard_score_latent(&gihs, &[0.0, 0.0, 0.0]), 0.0);
        let ubhs = TargetSpec::new(TargetKind::Ubhs, 2, 2.0, 1.0).unwrap();
        assert!((hard_score_latent(&ubhs, &[1.5, 0.0]) + 0.25).abs() < 1e-15);
        assert!(hard_score_latent(&ubhs, &[2.5, 0.0]) > 0.0);
        assert!(hard_score_latent(&ubhs, &[0.5, 0.0]) > 0.0);
    }

    #[test]
    fn soft_score_hand_cases() {
        let train = array![[1.0], [3.0], [5.0]];
        assert_eq!(soft_score_latent(train.view(), &[0.0], 2).unwrap(), 2.0);
        assert_eq!(soft_score_latent(train.view(), &[3.0], 1).unwrap(), 0.0);
        assert_eq!(soft_score_latent(train.view(), &[0.0], 3).unwrap(), 3.0);
        assert!(soft_score_latent(train.view(), &[0.0], 4).is_err());
        assert!(soft_score_latent(train.view(), &[0.0], 0).is_err());
    }

    #[test]
    fn threshold_hand_cases() {
        let s: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(calibrate_threshold(&s, 0.9).unwrap(), 9.0);
        assert_eq!(calibrate_threshold(&[4.0; 7], 0.3).unwrap(), 4.0);
        assert_eq!(calibrate_threshold(&[5.0], 0.5).unwrap(), 5.0);
        assert!(calibrate_threshold(&[], 0.5).is_err());
        assert!(calibrate_threshold(&s, 1.0).is_err());
    }

    #[test]
    fn classify_boundary_and_guards() {
        let enc = identity_encoder(1);
        let spec = TargetSpec::new(TargetKind::Gihs, 1, 2.0, 0.0).unwrap();
        let mut m = ScoreModel::new(enc, spec, array![[0.0], [1.0]], ScoreMode::Hard).unwrap();
        assert!(m.classify(array![[1.0]].view()).is_err());
        m.set_threshold(1.0);
        let c = m.classify(array![[1.0], [-1.5], [0.2]].view()).unwrap();
        assert_eq!(c.labels, vec![Label::Normal, Label::Abnormal, Label::Normal]);
        assert_eq!(c.scores, vec![1.0, 1.5, 0.2]);
        let empty = m.classify(Array2::<f64>::zeros((0, 1)).view()).unwrap();
        assert!(empty.labels.is_empty() && empty.scores.is_empty());
    }

    #[test]
    fn model_rejects_bad_shapes() {
        let spec = TargetSpec::new(TargetKind::Gihs, 2, 2.0, 0.0).unwrap();
        assert!(ScoreModel::new(identity_encoder(3), spec, Array2::zeros((4, 2)), ScoreMode::Hard).is_err());
        assert!(ScoreModel::new(identity_encoder(2), spec, Array2::zeros((4, 3)), ScoreMode::Hard).is_err());
        assert!(ScoreModel::new(identity_encoder(2), spec, Array2::zeros((4, 2)), ScoreMode::Soft { k: 5 }).is_err());
    }

    #[test]
    fn training_abnormal_fraction_tracks_quantile() {
        let mut rng = rng_from_seed(5);
        let x = sample_standard_normal(3, 400, &mut rng);
        let enc = init_params(&[3, 8, 2], &[Activation::Tanh, Activation::Identity], 1).unwrap();
        let spec = TargetSpec::new(TargetKind::Gihs, 2, 2.0, 0.0).unwrap();
        for mode in [ScoreMode::Hard, ScoreMode::Soft { k: 3 }] {
            let mut m = ScoreModel::fit(enc.clone(), spec, x.view(), mode, 0.9).unwrap();
            let loo = m.train_scores_leave_one_out().unwrap();
            assert_eq!(loo.iter().filter(|&&s| s > m.threshold().unwrap()).count(), 40);
            assert!(m.classify(x.view()).unwrap().abnormal_count() <= 40);
            m.calibrate_with(0.9, Calibration::WithSelf).unwrap();
            assert_eq!(m.classify(x.view()).unwrap().abnormal_count(), 40, "{mode}");
        }
    }

    #[test]
    fn leave_one_out_scores() {
        let spec = TargetSpec::new(TargetKind::Gihs, 1, 2.0, 0.0).unwrap();
        let m = ScoreModel::new(identity_encoder(1), spec, array![[0.0], [1.0], [3.0]], ScoreMode::Soft { k: 1 }).unwrap();
        assert_eq!(m.train_scores().unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(m.train_scores_leave_one_out().unwrap(), vec![1.0, 1.0, 2.0]);
        assert!(ScoreModel::new(identity_encoder(1), spec, array![[0.0]], ScoreMode::Soft { k: 1 })
            .unwrap()
            .train_scores_leave_one_out()
            .is_err());
    }

    #[test]
    fn score_csv_layout() {
        let c = Classification { labels: vec![Label::Normal, Label::Abnormal], scores: vec![0.5, 2.0] };
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "row_id,raw_score,predicted_label\n0,5.0000000000000000e-1,normal\n1,2.0000000000000000e0,abnormal\n"
        );
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("hard".parse::<ScoreMode>().unwrap(), ScoreMode::Hard);
        assert_eq!("soft:5".parse::<ScoreMode>().unwrap(), ScoreMode::Soft { k: 5 });
        assert!("soft:x".parse::<ScoreMode>().is_err());
    }

    fn brute_force(reference: &Array2<f64>, z: &[f64], k: usize) -> f64 {
        let mut d: Vec<f64> = reference
            .rows()
            .into_iter()
            .map(|r| r.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .collect();
        d.sort_by(f64::total_cmp);
        d[..k].iter().sum::<f64>() / k as f64
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn soft_score_matches_full_sort(seed in any::<u64>(), n in 1usize..40, d in 1usize..5, kfrac in 0.0f64..1.0) {
            let mut rng = rng_from_seed(seed);
            let reference = sample_standard_normal(d, n, &mut rng);
            let q = sample_standard_normal(d, 1, &mut rng);
            let k = 1 + ((n - 1) as f64 * kfrac) as usize;
            let got = soft_score_latent(reference.view(), q.row(0).as_slice().unwrap(), k).unwrap();
            let want = brute_force(&reference, q.row(0).as_slice().unwrap(), k);
            prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0));
        }

        #[test]
        fn soft_score_ignores_row_order(seed in any::<u64>(), n in 2usize..30) {
            let mut rng = rng_from_seed(seed);
            let reference = sample_standard_normal(2, n, &mut rng);
            let q = sample_standard_normal(2, 1, &mut rng);
            let rev: Vec<usize> = (0..n).rev().collect();
            let permuted = reference.select(ndarray::Axis(0), &rev);
            let k = n.div_ceil(2);
            let a = soft_score_latent(reference.view(), q.row(0).as_slice().unwrap(), k).unwrap();
            let b = soft_score_latent(permuted.view(), q.row(0).as_slice().unwrap(), k).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn hard_scores_respect_sign_rules(x in -5.0f64..5.0, y in -5.0f64..5.0) {
            let z = [x, y];
            let norm = (x * x + y * y).sqrt();
            for kind in [TargetKind::Gihs, TargetKind::Uihs, TargetKind::Uohs] {
                let spec = TargetSpec::new(kind, 2, 2.0, 0.0).unwrap();
                prop_assert!(hard_score_latent(&spec, &z) >= 0.0);
            }
            let shell = TargetSpec::new(TargetKind::Ubhs, 2, 2.0, 1.0).unwrap();
            let s = hard_score_latent(&shell, &z);
            prop_assert_eq!(s < 0.0, norm > 1.0 && norm < 2.0);
        }

        #[test]
        fn raising_threshold_never_adds_abnormals(seed in any::<u64>(), t in 0.0f64..3.0, dt in 0.0f64..1.0) {
            let mut rng = rng_from_seed(seed);
            let x = sample_standard_normal(2, 30, &mut rng);
            let spec = TargetSpec::new(TargetKind::Gihs, 2, 2.0, 0.0).unwrap();
            let mut m = ScoreModel::new(identity_encoder(2), spec, x.clone(), ScoreMode::Hard).unwrap();
            m.set_threshold(t);
            let low = m.classify(x.view()).unwrap().abnormal_count();
            m.set_threshold(t + dt);
            prop_assert!(m.classify(x.view()).unwrap().abnormal_count() <= low);
        }
    }
}
