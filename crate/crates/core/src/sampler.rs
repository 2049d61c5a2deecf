//! Bounded target distributions.
//!
//! Four targets are supported, all centred at the origin of the latent space:
//!
//! * **GiHS**: standard Gaussian truncated to the ball of radius `r`;
//! * **UiHS**: uniform in the ball of radius `r`;
//! * **UbHS**: uniform in the shell `r' <= |z| <= r`;
//! * **UoHS**: uniform on the sphere of radius `r`.
//!
//! GiHS is drawn by rejection from `N(0, I)`. UiHS and UbHS are drawn
//! directly (uniform direction times an inverse-CDF radius) because cube
//! rejection has acceptance [`volume_ratio_eta`], which collapses with the
//! dimension. The cube-rejection sampler is kept as
//! [`sample_uniform_ball_rejection`] for cross-checking at small `d`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayViewMut1};
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result, RgpError};
use crate::fmt::f64_exact;
use crate::Rng;

/// Default quantile for the GiHS/UiHS radius.
pub const DEFAULT_RADIUS_QUANTILE: f64 = 0.9;
/// Default quantiles for the UbHS outer and inner radii.
pub const DEFAULT_OUTER_QUANTILE: f64 = 0.95;
pub const DEFAULT_INNER_QUANTILE: f64 = 0.05;
pub const DEFAULT_TRIAL_COUNT: usize = 100_000;
/// Relative tolerance on norms used by the support checks.
pub const SUPPORT_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetKind {
    /// Gaussian in hypersphere (truncated standard Gaussian).
    Gihs,
    /// Uniform in hypersphere.
    Uihs,
    /// Uniform between hyperspheres.
    Ubhs,
    /// Uniform on hypersphere.
    Uohs,
}

impl TargetKind {
    pub const ALL: [TargetKind; 4] = [TargetKind::Gihs, TargetKind::Uihs, TargetKind::Ubhs, TargetKind::Uohs];

    pub fn as_str(self) -> &'static str {
        match self {
            TargetKind::Gihs => "gihs",
            TargetKind::Uihs => "uihs",
            TargetKind::Ubhs => "ubhs",
            TargetKind::Uohs => "uohs",
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetKind {
    type Err = RgpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gihs" => Ok(TargetKind::Gihs),
            "uihs" => Ok(TargetKind::Uihs),
            "ubhs" => Ok(TargetKind::Ubhs),
            "uohs" => Ok(TargetKind::Uohs),
            other => Err(invalid(format!("unknown target kind {other:?} (expected gihs, uihs, ubhs or uohs)"))),
        }
    }
}

/// A target distribution with its latent dimension and radii.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpec {
    kind: TargetKind,
    dim: usize,
    radius: f64,
    inner_radius: f64,
}

impl TargetSpec {
    /// `inner_radius` is only read for UbHS; it is stored as 0 otherwise.
    pub fn new(kind: TargetKind, dim: usize, radius: f64, inner_radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("target dimension must be at least 1"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid(format!("target radius must be positive and finite, got {radius}")));
        }
        let inner_radius = if kind == TargetKind::Ubhs {
            if !(inner_radius > 0.0 && inner_radius < radius) {
                return Err(invalid(format!(
                    "UbHS needs 0 < inner radius < radius, got inner={inner_radius} radius={radius}"
                )));
            }
            inner_radius
        } else {
            0.0
        };
        Ok(Self { kind, dim, radius, inner_radius })
    }

    /// Builds a target with the default radii.
    ///
    /// GiHS and UiHS use the 0.9 norm quantile of their base distribution,
    /// UbHS the 0.95/0.05 quantiles of the uniform cube, UoHS the unit sphere.
    pub fn calibrated(kind: TargetKind, dim: usize, rng: &mut Rng) -> Result<Self> {
        match kind {
            TargetKind::Gihs | TargetKind::Uihs => {
                let r = calibrate_radius(kind, dim, DEFAULT_RADIUS_QUANTILE, DEFAULT_TRIAL_COUNT, rng)?;
                Self::new(kind, dim, r, 0.0)
            }
            TargetKind::Ubhs => {
                let (outer, inner) = calibrate_shell(dim, DEFAULT_OUTER_QUANTILE, DEFAULT_INNER_QUANTILE, DEFAULT_TRIAL_COUNT, rng)?;
                Self::new(kind, dim, outer, inner)
            }
            TargetKind::Uohs => Self::new(kind, dim, 1.0, 0.0),
        }
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    /// Whether a point with this norm violates the support constraint.
    pub fn violates_support(&self, norm: f64, rel_tol: f64) -> bool {
        let r = self.radius;
        match self.kind {
            TargetKind::Gihs | TargetKind::Uihs => norm > r * (1.0 + rel_tol),
            TargetKind::Ubhs => norm > r * (1.0 + rel_tol) || norm < self.inner_radius * (1.0 - rel_tol),
            TargetKind::Uohs => (norm - r).abs() > r * rel_tol,
        }
    }
}

/// Draws from a target distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub points: Array2<f64>,
    pub spec: TargetSpec,
    /// Base-distribution proposals consumed. Equals the row count for the
    /// direct samplers; larger for GiHS rejection.
    pub base_draws: usize,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    /// Number of rows outside the support of `spec` at [`SUPPORT_REL_TOL`].
    pub fn support_violations(&self) -> usize {
        self.points
            .rows()
            .into_iter()
            .filter(|row| self.spec.violates_support(l2_norm(*row), SUPPORT_REL_TOL))
            .count()
    }

    /// One row per sample, `.` decimal separator, no header unless asked.
    pub fn write_csv<W: Write>(&self, mut out: W, header: bool) -> Result<()> {
        if header {
            let names: Vec<String> = (0..self.spec.dim).map(|j| format!("z{j}")).collect();
            writeln!(out, "{}", names.join(","))?;
        }
        for row in self.points.rows() {
            let cells: Vec<String> = row.iter().map(|&v| f64_exact(v)).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

pub(crate) fn l2_norm(row: ArrayView1<f64>) -> f64 {
    row.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn fill_gaussian(mut row: ArrayViewMut1<f64>, rng: &mut Rng) {
    for v in row.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

/// Fills `row` with a uniform direction scaled to `radius`.
fn fill_sphere(mut row: ArrayViewMut1<f64>, radius: f64, rng: &mut Rng) {
    loop {
        fill_gaussian(row.view_mut(), rng);
        let norm = l2_norm(row.view());
        // A zero Gaussian vector has probability zero but would divide by 0.
        if norm > 0.0 {
            row.mapv_inplace(|v| v * radius / norm);
            return;
        }
    }
}

/// `n` rows of `N(0, I_dim)`.
pub fn sample_standard_normal(dim: usize, n: usize, rng: &mut Rng) -> Array2<f64> {
    let mut out = Array2::zeros((n, dim));
    for row in out.rows_mut() {
        fill_gaussian(row, rng);
    }
    out
}

/// `n` rows of `U(-half_width, half_width)^dim`.
pub fn sample_cube(dim: usize, half_width: f64, n: usize, rng: &mut Rng) -> Array2<f64> {
    let mut out = Array2::zeros((n, dim));
    for v in out.iter_mut() {
        *v = rng.random_range(-half_width..half_width);
    }
    out
}

/// Radius such that a fraction `p` of the base distribution's draws fall
/// inside it: the `ceil(p * trial_count)`-th smallest norm of `trial_count`
/// draws from `N(0, I)` (GiHS) or `U(-1, 1)^d` (UiHS).
pub fn calibrate_radius(kind: TargetKind, dim: usize, p: f64, trial_count: usize, rng: &mut Rng) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("quantile must lie in (0, 1), got {p}")));
    }
    if trial_count < 1000 {
        return Err(invalid(format!("trial_count must be at least 1000, got {trial_count}")));
    }
    if dim == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let draws = match kind {
        TargetKind::Gihs => sample_standard_normal(dim, trial_count, rng),
        TargetKind::Uihs => sample_cube(dim, 1.0, trial_count, rng),
        TargetKind::Ubhs | TargetKind::Uohs => {
            return Err(invalid(format!(
                "radius calibration applies to gihs and uihs only, not {kind} (use calibrate_shell for ubhs)"
            )))
        }
    };
    let mut norms: Vec<f64> = draws.rows().into_iter().map(l2_norm).collect();
    norms.sort_by(f64::total_cmp);
    Ok(norms[quantile_rank(p, trial_count)])
}

/// Outer and inner UbHS radii from two uniform-cube calibrations.
pub fn calibrate_shell(dim: usize, outer_p: f64, inner_p: f64, trial_count: usize, rng: &mut Rng) -> Result<(f64, f64)> {
    if inner_p >= outer_p {
        return Err(invalid(format!("inner quantile {inner_p} must be below outer quantile {outer_p}")));
    }
    let outer = calibrate_radius(TargetKind::Uihs, dim, outer_p, trial_count, rng)?;
    let inner = calibrate_radius(TargetKind::Uihs, dim, inner_p, trial_count, rng)?;
    Ok((outer, inner))
}

/// Zero-based index of the `ceil(p * n)`-th smallest element.
pub(crate) fn quantile_rank(p: f64, n: usize) -> usize {
    let rank = (p * n as f64).ceil() as usize;
    rank.clamp(1, n) - 1
}

/// Draws `n` i.i.d. points from `spec`.
pub fn sample(spec: &TargetSpec, n: usize, rng: &mut Rng) -> Result<SampleBatch> {
    if n == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let d = spec.dim;
    let r = spec.radius;
    let mut points = Array2::zeros((n, d));
    let mut base_draws = n;
    match spec.kind {
        TargetKind::Gihs => {
            base_draws = sample_truncated_gaussian(&mut points, r, rng)?;
        }
        TargetKind::Uihs => {
            for row in points.rows_mut() {
                let u: f64 = rng.random();
                fill_sphere(row, r * u.powf(1.0 / d as f64), rng);
            }
        }
        TargetKind::Ubhs => {
            // Radius CDF on [r', r] is (s^d - r'^d) / (r^d - r'^d); work in
            // units of r so large d cannot overflow.
            let inner_frac = (spec.inner_radius / r).powi(d as i32);
            for row in points.rows_mut() {
                let u: f64 = rng.random();
                let s = r * (inner_frac + u * (1.0 - inner_frac)).powf(1.0 / d as f64);
                fill_sphere(row, s, rng);
            }
        }
        TargetKind::Uohs => {
            for row in points.rows_mut() {
                fill_sphere(row, r, rng);
            }
        }
    }
    Ok(SampleBatch { points, spec: *spec, base_draws })
}

/// Rejection from `N(0, I)`, proposing in blocks sized from the tail bound.
/// Returns the number of proposals consumed.
fn sample_truncated_gaussian(points: &mut Array2<f64>, r: f64, rng: &mut Rng) -> Result<usize> {
    let (n, d) = points.dim();
    let tail = prop1_bound(d, r).unwrap_or(0.5).min(0.99);
    let max_draws = n.saturating_mul(10_000).max(10_000_000);
    let mut proposal = vec![0.0; d];
    let mut accepted = 0;
    let mut draws = 0usize;
    while accepted < n {
        let remaining = n - accepted;
        let block = ((remaining as f64) / (1.0 - tail)).ceil() as usize;
        for _ in 0..block.max(1) {
            draws += 1;
            for v in proposal.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let norm = proposal.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm <= r {
                points.row_mut(accepted).iter_mut().zip(&proposal).for_each(|(dst, &src)| *dst = src);
                accepted += 1;
                if accepted == n {
                    break;
                }
            }
        }
        if draws > max_draws {
            return Err(RgpError::Numerical(format!(
                "truncated Gaussian acceptance too low: {accepted} of {draws} proposals inside radius {r} at d={d}"
            )));
        }
    }
    Ok(draws)
}

/// Uniform-in-ball by rejection from the enclosing cube.
///
/// Acceptance is [`volume_ratio_eta`]`(dim)`; only practical for small `dim`.
/// Returns the batch and the number of cube proposals consumed.
pub fn sample_uniform_ball_rejection(dim: usize, r: f64, n: usize, rng: &mut Rng) -> Result<SampleBatch> {
    let spec = TargetSpec::new(TargetKind::Uihs, dim, r, 0.0)?;
    if dim > 12 {
        return Err(invalid(format!("cube rejection is infeasible at d={dim}; use sample()")));
    }
    let mut points = Array2::zeros((n, dim));
    let mut proposal = vec![0.0; dim];
    let mut accepted = 0;
    let mut draws = 0;
    while accepted < n {
        draws += 1;
        for v in proposal.iter_mut() {
            *v = rng.random_range(-r..r);
        }
        if proposal.iter().map(|v| v * v).sum::<f64>().sqrt() <= r {
            points.row_mut(accepted).iter_mut().zip(&proposal).for_each(|(dst, &src)| *dst = src);
            accepted += 1;
        }
    }
    Ok(SampleBatch { points, spec, base_draws: draws })
}

/// Upper bound on `Pr(|z| >= r)` for `z ~ N(0, I_dim)`, valid for `r > sqrt(dim)`:
/// `exp(-alpha / 2)` with `alpha = sqrt(dim + 2 r^2) - sqrt(dim)`.
pub fn prop1_bound(dim: usize, r: f64) -> Result<f64> {
    let d = dim as f64;
    if dim == 0 || !(r > d.sqrt()) {
        return Err(invalid(format!("Gaussian tail bound needs r > sqrt(d), got r={r}, d={dim}")));
    }
    let alpha = (d + 2.0 * r * r).sqrt() - d.sqrt();
    Ok((-0.5 * alpha).exp())
}

/// Upper bound `dim / (3 t^2)` on `Pr(|z| >= r t)` for `z ~ U(-r, r)^dim`.
/// Values above 1 are returned unchanged (the bound is then vacuous).
pub fn prop2_bound(dim: usize, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(format!("uniform tail bound needs t > 0, got {t}")));
    }
    Ok(dim as f64 / (3.0 * t * t))
}

/// Volume of the unit ball over the volume of the enclosing cube `[-1, 1]^d`.
pub fn volume_ratio_eta(dim: usize) -> f64 {
    assert!(dim >= 1, "dimension must be at least 1");
    let d = dim as f64;
    let ln = 0.5 * d * std::f64::consts::PI.ln() - d.ln() - (d - 1.0) * std::f64::consts::LN_2 - libm::lgamma(0.5 * d);
    ln.exp()
}

/// Points per unit volume when `n` samples fill the target's support.
/// UoHS has a zero-volume support and returns `f64::INFINITY`.
pub fn density(spec: &TargetSpec, n: usize) -> f64 {
    let d = spec.dim as f64;
    let ln_unit_ball = 0.5 * d * std::f64::consts::PI.ln() - libm::lgamma(0.5 * d + 1.0);
    let ln_volume = match spec.kind {
        TargetKind::Gihs | TargetKind::Uihs => ln_unit_ball + d * spec.radius.ln(),
        TargetKind::Ubhs => {
            let ratio = (spec.inner_radius / spec.radius).powf(d);
            ln_unit_ball + d * spec.radius.ln() + (1.0 - ratio).ln()
        }
        TargetKind::Uohs => return f64::INFINITY,
    };
    ((n as f64).ln() - ln_volume).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    #[test]
    fn spec_validation() {
        assert!(TargetSpec::new(TargetKind::Gihs, 0, 1.0, 0.0).is_err());
        assert!(TargetSpec::new(TargetKind::Gihs, 2, 0.0, 0.0).is_err());
        assert!(TargetSpec::new(TargetKind::Ubhs, 2, 1.0, 1.0).is_err());
        assert!(TargetSpec::new(TargetKind::Ubhs, 2, 1.0, 0.0).is_err());
        let s = TargetSpec::new(TargetKind::Uihs, 2, 1.0, 0.5).unwrap();
        assert_eq!(s.inner_radius(), 0.0);
        assert_eq!("UbHS".parse::<TargetKind>().unwrap(), TargetKind::Ubhs);
    }

    #[test]
    fn calibrate_half_normal_quantile() {
        // 90% quantile of |N(0,1)| = Phi^-1(0.95).
        let mut rng = rng_from_seed(1);
        let r = calibrate_radius(TargetKind::Gihs, 1, 0.9, 1_000_000, &mut rng).unwrap();
        assert!((r - 1.644_853_626_951_472).abs() < 0.01, "{r}");
    }

    #[test]
    fn calibrate_uniform_median() {
        let mut rng = rng_from_seed(2);
        let r = calibrate_radius(TargetKind::Uihs, 1, 0.5, 1_000_000, &mut rng).unwrap();
        assert!((r - 0.5).abs() < 0.005, "{r}");
    }

    #[test]
    fn calibrate_chi2_quantile() {
        // chi with 2 dof: 90% quantile is sqrt(-2 ln 0.1).
        let mut rng = rng_from_seed(3);
        let r = calibrate_radius(TargetKind::Gihs, 2, 0.9, 1_000_000, &mut rng).unwrap();
        assert!((r - 2.145_966_026_289_347).abs() < 0.01, "{r}");
    }

    #[test]
    fn calibrate_rejects_bad_input() {
        let mut rng = rng_from_seed(0);
        assert!(calibrate_radius(TargetKind::Gihs, 2, 0.0, 1000, &mut rng).is_err());
        assert!(calibrate_radius(TargetKind::Gihs, 2, 1.0, 1000, &mut rng).is_err());
        assert!(calibrate_radius(TargetKind::Gihs, 2, 0.5, 999, &mut rng).is_err());
        assert!(calibrate_radius(TargetKind::Uohs, 2, 0.5, 1000, &mut rng).is_err());
        assert!(calibrate_radius(TargetKind::Ubhs, 2, 0.5, 1000, &mut rng).is_err());
    }

    #[test]
    fn uohs_rows_have_unit_norm() {
        let spec = TargetSpec::new(TargetKind::Uohs, 2, 1.0, 0.0).unwrap();
        let batch = sample(&spec, 100, &mut rng_from_seed(4)).unwrap();
        for row in batch.points.rows() {
            assert!((l2_norm(row) - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn gihs_rejection_rate_matches_chi2_tail() {
        // For d=2, Pr(|z| > r) = exp(-r^2 / 2).
        let spec = TargetSpec::new(TargetKind::Gihs, 2, 2.0, 0.0).unwrap();
        let batch = sample(&spec, 100_000, &mut rng_from_seed(5)).unwrap();
        let rejected = (batch.base_draws - batch.len()) as f64 / batch.base_draws as f64;
        let expected = (-2.0f64).exp();
        let se = (expected * (1.0 - expected) / batch.base_draws as f64).sqrt();
        assert!((rejected - expected).abs() < 4.0 * se, "{rejected} vs {expected}");
        assert_eq!(batch.support_violations(), 0);
    }

    #[test]
    fn uihs_radial_cdf_ks() {
        // Radial CDF of the uniform 3-ball is s^3.
        let spec = TargetSpec::new(TargetKind::Uihs, 3, 1.0, 0.0).unwrap();
        let batch = sample(&spec, 100_000, &mut rng_from_seed(6)).unwrap();
        let mut norms: Vec<f64> = batch.points.rows().into_iter().map(l2_norm).collect();
        norms.sort_by(f64::total_cmp);
        let n = norms.len() as f64;
        let d = norms
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let f = s.powi(3);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        // One-sample KS critical value at the 1% level.
        assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn prop1_values() {
        let b = prop1_bound(2, 2.0).unwrap();
        assert!((b - 0.417_265_717_078_139_1).abs() < 1e-12, "{b}");
        assert!((-2.0f64).exp() <= b);
        assert!(prop1_bound(2, 2f64.sqrt()).is_err());
        let mut last = 1.0;
        for r in [1.5, 3.0, 10.0, 100.0, 1000.0] {
            let v = prop1_bound(1, r).unwrap();
            assert!(v < last);
            last = v;
        }
        assert!(last < 1e-100);
    }

    #[test]
    fn prop2_values() {
        assert_eq!(prop2_bound(3, 2.0).unwrap(), 0.25);
        assert!((prop2_bound(1, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((prop2_bound(2, 10.0).unwrap() - 2.0 / 300.0).abs() < 1e-15);
        assert_eq!(prop2_bound(30, 1.0).unwrap(), 10.0);
        assert!(prop2_bound(2, 0.0).is_err());
    }

    #[test]
    fn eta_values() {
        assert!((volume_ratio_eta(1) - 1.0).abs() < 1e-14);
        assert!((volume_ratio_eta(2) - std::f64::consts::FRAC_PI_4).abs() < 1e-14);
        assert!((volume_ratio_eta(3) - std::f64::consts::PI / 6.0).abs() < 1e-14);
        let e20 = volume_ratio_eta(20);
        assert!((e20 / 2.461_136_950_494_199e-8 - 1.0).abs() < 1e-10, "{e20}");
        for d in 1..40 {
            assert!(volume_ratio_eta(d + 1) < volume_ratio_eta(d));
        }
    }

    #[test]
    fn density_values() {
        let uohs = TargetSpec::new(TargetKind::Uohs, 5, 1.0, 0.0).unwrap();
        assert!(density(&uohs, 10).is_infinite());
        let gihs = TargetSpec::new(TargetKind::Gihs, 2, 1.0, 0.0).unwrap();
        assert!((density(&gihs, 100) - 31.830_988_618_379_067).abs() < 1e-10);
        let ubhs = TargetSpec::new(TargetKind::Ubhs, 1, 2.0, 1.0).unwrap();
        assert!((density(&ubhs, 1) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn same_seed_same_batch() {
        for kind in TargetKind::ALL {
            let spec = TargetSpec::new(kind, 3, 1.5, 0.5).unwrap();
            let a = sample(&spec, 500, &mut rng_from_seed(9)).unwrap();
            let b = sample(&spec, 500, &mut rng_from_seed(9)).unwrap();
            assert!(a.points.iter().zip(b.points.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn csv_export() {
        let spec = TargetSpec::new(TargetKind::Uohs, 2, 1.0, 0.0).unwrap();
        let batch = sample(&spec, 3, &mut rng_from_seed(0)).unwrap();
        let mut buf = Vec::new();
        batch.write_csv(&mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "z0,z1");
        assert_eq!(lines.len(), 4);
        let x: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
        assert_eq!(x.to_bits(), batch.points[[0, 0]].to_bits());
    }
}
