//! Browser bindings: draw target samples, fit a small 2-D model, and paint
//! its anomaly scores over the plane.

use ndarray::{concatenate, Array2, Axis};
use rgp_core::experiment::CALIBRATION_SEED;
use rgp_core::sampler::{sample, sample_standard_normal, TargetKind, TargetSpec};
use rgp_core::scoring::{ScoreMode, ScoreModel};
use rgp_core::trainer::{train, TrainConfig};
use rgp_core::{rng_from_seed, RgpError};
use wasm_bindgen::prelude::*;

fn js_err(e: RgpError) -> JsError {
    JsError::new(&e.to_string())
}

fn target(kind: &str) -> Result<TargetSpec, RgpError> {
    let kind: TargetKind = kind.parse()?;
    TargetSpec::calibrated(kind, 2, &mut rng_from_seed(CALIBRATION_SEED))
}

fn flat(a: &Array2<f64>) -> Vec<f64> {
    a.iter().copied().collect()
}

/// `n` points from the 2-D target `kind`, as `[x0, y0, x1, y1, ...]`.
#[wasm_bindgen]
pub fn sample_target(kind: &str, n: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    let spec = target(kind).map_err(js_err)?;
    Ok(flat(&sample(&spec, n, &mut rng_from_seed(seed.into())).map_err(js_err)?.points))
}

/// Normal data for the demo: two elongated clusters.
fn toy_data(n: usize, seed: u64) -> Array2<f64> {
    let mut rng = rng_from_seed(seed);
    let half = n / 2;
    let mut a = sample_standard_normal(2, half, &mut rng);
    let mut b = sample_standard_normal(2, n - half, &mut rng);
    for mut r in a.rows_mut() {
        r[0] = 0.9 * r[0] - 1.2;
        r[1] *= 0.3;
    }
    for mut r in b.rows_mut() {
        r[0] *= 0.3;
        r[1] = 0.9 * r[1] + 1.2;
    }
    concatenate(Axis(0), &[a.view(), b.view()]).expect("same width")
}

#[wasm_bindgen]
pub struct ToyModel {
    data: Array2<f64>,
    hard: ScoreModel,
    soft: ScoreModel,
    final_mmd: f64,
    final_mse: f64,
}

#[wasm_bindgen]
impl ToyModel {
    /// Trains on 300 toy points mapped onto the 2-D target `kind`.
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, epochs: usize, lambda: f64, seed: u32) -> Result<ToyModel, JsError> {
        let data = toy_data(300, seed.into());
        let mut cfg = TrainConfig::new(target(kind).map_err(js_err)?);
        cfg.epochs = epochs;
        cfg.lambda = lambda;
        cfg.lr = 5e-3;
        cfg.batch_size = 100;
        cfg.seed = seed.into();
        cfg.hidden = Some(vec![16, 16]);
        let out = train(data.view(), &cfg).map_err(js_err)?;
        let last = *out.report.last().expect("at least one epoch");
        let projected = out.encoder.forward(data.view()).map_err(js_err)?;
        let fit = |mode| -> Result<ScoreModel, RgpError> {
            let mut m = ScoreModel::new(out.encoder.clone(), cfg.target, projected.clone(), mode)?;
            m.calibrate(0.95)?;
            Ok(m)
        };
        Ok(ToyModel {
            hard: fit(ScoreMode::Hard).map_err(js_err)?,
            soft: fit(ScoreMode::Soft { k: 5 }).map_err(js_err)?,
            data,
            final_mmd: last.term1,
            final_mse: last.term2,
        })
    }

    pub fn train_points(&self) -> Vec<f64> {
        flat(&self.data)
    }

    pub fn projected_points(&self) -> Vec<f64> {
        flat(self.soft.projected_train())
    }

    pub fn radius(&self) -> f64 {
        self.hard.spec().radius()
    }

    pub fn inner_radius(&self) -> f64 {
        self.hard.spec().inner_radius()
    }

    pub fn final_mmd(&self) -> f64 {
        self.final_mmd
    }

    pub fn final_mse(&self) -> f64 {
        self.final_mse
    }

    pub fn threshold(&self, soft: bool) -> f64 {
        self.model(soft).threshold().expect("calibrated at construction")
    }

    /// Scores on an `nx` by `ny` grid over `[x0, x1] x [y0, y1]`, row by row
    /// from `y0`.
    #[allow(clippy::too_many_arguments)]
    pub fn score_field(&self, soft: bool, x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Result<Vec<f64>, JsError> {
        if nx < 2 || ny < 2 {
            return Err(JsError::new("grid needs at least 2 points per side"));
        }
        let grid = Array2::from_shape_fn((nx * ny, 2), |(i, c)| {
            let (ix, iy) = (i % nx, i / nx);
            if c == 0 {
                x0 + (x1 - x0) * ix as f64 / (nx - 1) as f64
            } else {
                y0 + (y1 - y0) * iy as f64 / (ny - 1) as f64
            }
        });
        self.model(soft).score(grid.view()).map_err(js_err)
    }
}

impl ToyModel {
    fn model(&self, soft: bool) -> &ScoreModel {
        if soft {
            &self.soft
        } else {
            &self.hard
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_are_flat_pairs() {
        let v = sample_target("uohs", 50, 1).unwrap();
        assert_eq!(v.len(), 100);
        let spec = target("uohs").unwrap();
        for p in v.chunks(2) {
            assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - spec.radius()).abs() < 1e-9);
        }
        assert_eq!(v, sample_target("uohs", 50, 1).unwrap());
    }

    #[test]
    fn toy_model_flags_far_points() {
        let m = ToyModel::new("uihs", 40, 1.0, 3).unwrap();
        assert_eq!(m.train_points().len(), 600);
        assert_eq!(m.projected_points().len(), 600);
        for soft in [false, true] {
            let field = m.score_field(soft, -6.0, 6.0, -6.0, 6.0, 13, 13).unwrap();
            assert_eq!(field.len(), 169);
            // Corner (6, 6) is far from both clusters.
            assert!(field[168] > m.threshold(soft), "soft={soft}");
        }
        assert!(m.final_mmd().is_finite() && m.final_mse() >= 0.0);
    }
}
