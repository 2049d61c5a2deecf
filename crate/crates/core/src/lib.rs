//! Restricted generative projection (RGP) for one-class classification.
//!
//! An encoder is trained on normal data only so that its outputs match a
//! bounded target distribution (truncated Gaussian, uniform in a ball, uniform
//! in a shell, uniform on a sphere), while a decoder keeps the projection
//! informative. Test points are then scored by how far their projection falls
//! from the target support (hard score) or from the projected training set
//! (soft, k-nearest-neighbour score).
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`sampler`] | target distributions, radius calibration, tail bounds |
//! | [`divergence`] | unbiased MMD² and its gradient, Sinkhorn transport |
//! | [`net`] | feedforward encoder/decoder, backprop, Adam |
//! | [`trainer`] | the three objectives and the mini-batch training loop |
//! | [`scoring`] | hard/soft anomaly scores, threshold calibration |
//! | [`metrics`] | ROC AUC and F1 |
//! | [`dataio`] | CSV loading, standardization, one-class splits, manifests |
//! | [`experiment`] | end-to-end train/score/evaluate on a manifest |

pub mod dataio;
pub mod divergence;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod net;
pub mod sampler;
pub mod scoring;
pub mod trainer;

mod fmt;

pub use error::{Result, RgpError};

use rand::SeedableRng;

/// Seeded generator used everywhere randomness is needed.
///
/// ChaCha8 gives the same stream on every platform, which keeps samples,
/// initializations and training runs reproducible across native and wasm.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Creates the crate's generator from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Ground-truth or predicted class of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Normal,
    Abnormal,
}

impl Label {
    pub fn is_abnormal(self) -> bool {
        matches!(self, Label::Abnormal)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Abnormal => "abnormal",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = RgpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "normal" | "0" => Ok(Label::Normal),
            "abnormal" | "1" => Ok(Label::Abnormal),
            other => Err(RgpError::Parse(format!("unknown label {other:?}"))),
        }
    }
}
