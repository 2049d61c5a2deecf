//! Training objectives and the mini-batch loop.
//!
//! Every objective pairs a distribution term on the encoder outputs
//! `f(X)` against target draws `Z` with a reconstruction term weighted by
//! `lambda`:
//!
//! | objective | term1 | term2 |
//! |-----------|-------|-------|
//! | `Rgp` | `MMD²(f(X), Z)` | `mean_i |x_i - g(f(x_i))|^2` |
//! | `DoubleMmd` | `MMD²(f(X), Z)` | `MMD²(g(f(X)), X)` |
//! | `Sinkhorn` | `<P, C> + eps sum P ln P` | `mean_i |x_i - g(f(x_i))|^2` |
//!
//! and `total = term1 + lambda * term2`. Sinkhorn gradients treat the plan
//! `P` as a constant.

use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;

use crate::divergence::{
    cost_matrix, gamma_from_data, mmd2_with_grad, sinkhorn, uniform_marginal, KernelConfig, DEFAULT_SINKHORN_EPSILON,
    DEFAULT_SINKHORN_MAX_ITER, DEFAULT_SINKHORN_TOL,
};
use crate::error::{invalid, mismatch, Result, RgpError};
use crate::fmt::{f64_exact, parse_f64, parse_kv};
use crate::net::{build_autoencoder, default_hidden, join_floats, parse_floats, Activation, AdamState, MlpGrads, MlpParams, DEFAULT_LEAKY_SLOPE};
use crate::sampler::{sample, TargetKind, TargetSpec};
use crate::{rng_from_seed, Rng};

/// Rows used by the bandwidth heuristic; larger sets are strided down to
/// this many to keep the pairwise pass quadratic in a small number.
pub const GAMMA_MAX_ROWS: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Rgp,
    DoubleMmd,
    Sinkhorn,
}

impl Objective {
    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Rgp => "rgp",
            Objective::DoubleMmd => "double-mmd",
            Objective::Sinkhorn => "sinkhorn",
        }
    }
}

impl FromStr for Objective {
    type Err = RgpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rgp" | "mmd" => Ok(Objective::Rgp),
            "double-mmd" | "double_mmd" | "doublemmd" => Ok(Objective::DoubleMmd),
            "sinkhorn" | "ot" => Ok(Objective::Sinkhorn),
            other => Err(invalid(format!("unknown objective {other:?} (expected rgp, double-mmd or sinkhorn)"))),
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaMode {
    /// `1 / dbar^2` from the whole training set.
    AutoFromData,
    Fixed(f64),
}

impl FromStr for GammaMode {
    type Err = RgpError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "auto" {
            return Ok(GammaMode::AutoFromData);
        }
        let g = parse_f64(s.strip_prefix("fixed:").unwrap_or(s)).ok_or_else(|| invalid(format!("bad gamma {s:?}")))?;
        KernelConfig::new(g)?;
        Ok(GammaMode::Fixed(g))
    }
}

impl std::fmt::Display for GammaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GammaMode::AutoFromData => f.write_str("auto"),
            GammaMode::Fixed(g) => write!(f, "fixed:{}", f64_exact(*g)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub objective: Objective,
    pub lambda: f64,
    /// Entropic regularization, Sinkhorn objective only.
    pub epsilon: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub target: TargetSpec,
    pub seed: u64,
    pub gamma_mode: GammaMode,
    /// Hidden widths shared (mirrored) by encoder and decoder. `None` means
    /// [`default_hidden`] of the input dimension.
    pub hidden: Option<Vec<usize>>,
    pub hidden_activation: Activation,
    pub sinkhorn_max_iter: usize,
    pub sinkhorn_tol: f64,
}

impl TrainConfig {
    pub fn new(target: TargetSpec) -> Self {
        Self {
            objective: Objective::Rgp,
            lambda: 1.0,
            epsilon: DEFAULT_SINKHORN_EPSILON,
            lr: 1e-3,
            batch_size: 256,
            epochs: 500,
            target,
            seed: 0,
            gamma_mode: GammaMode::AutoFromData,
            hidden: None,
            hidden_activation: Activation::LeakyRelu(DEFAULT_LEAKY_SLOPE),
            sinkhorn_max_iter: DEFAULT_SINKHORN_MAX_ITER,
            sinkhorn_tol: DEFAULT_SINKHORN_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(invalid(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(invalid(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.batch_size < 2 {
            return Err(invalid(format!("batch size must be at least 2, got {}", self.batch_size)));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs must be at least 1"));
        }
        if let Some(h) = &self.hidden {
            if h.contains(&0) {
                return Err(invalid("hidden widths must be positive"));
            }
        }
        if self.sinkhorn_max_iter == 0 {
            return Err(invalid("sinkhorn_max_iter must be at least 1"));
        }
        Ok(())
    }

    pub fn hidden_for(&self, input_dim: usize) -> Vec<usize> {
        self.hidden.clone().unwrap_or_else(|| default_hidden(input_dim))
    }

    /// Sets one non-target field from text. Returns `Ok(false)` for keys that
    /// are not training options.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        let bad = |what: &str| invalid(format!("bad value {value:?} for {what}"));
        match key {
            "objective" => self.objective = value.parse()?,
            "lambda" => self.lambda = parse_f64(value).ok_or_else(|| bad(key))?,
            "epsilon" => self.epsilon = parse_f64(value).ok_or_else(|| bad(key))?,
            "lr" => self.lr = parse_f64(value).ok_or_else(|| bad(key))?,
            "batch_size" => self.batch_size = value.parse().map_err(|_| bad(key))?,
            "epochs" => self.epochs = value.parse().map_err(|_| bad(key))?,
            "seed" => self.seed = value.parse().map_err(|_| bad(key))?,
            "gamma" | "gamma_mode" => self.gamma_mode = value.parse()?,
            "hidden" => self.hidden = parse_hidden(value)?,
            "hidden_activation" | "activation" => self.hidden_activation = value.parse()?,
            "sinkhorn_max_iter" => self.sinkhorn_max_iter = value.parse().map_err(|_| bad(key))?,
            "sinkhorn_tol" => self.sinkhorn_tol = parse_f64(value).ok_or_else(|| bad(key))?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Every field as `key=value` lines, target included.
    pub fn to_kv_text(&self) -> String {
        let mut s = String::new();
        let hidden = match &self.hidden {
            None => "auto".to_string(),
            Some(h) if h.is_empty() => "none".to_string(),
            Some(h) => h.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(","),
        };
        for (k, v) in [
            ("objective", self.objective.to_string()),
            ("lambda", f64_exact(self.lambda)),
            ("epsilon", f64_exact(self.epsilon)),
            ("lr", f64_exact(self.lr)),
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("seed", self.seed.to_string()),
            ("gamma_mode", self.gamma_mode.to_string()),
            ("hidden", hidden),
            ("hidden_activation", self.hidden_activation.to_string()),
            ("sinkhorn_max_iter", self.sinkhorn_max_iter.to_string()),
            ("sinkhorn_tol", f64_exact(self.sinkhorn_tol)),
            ("target", self.target.kind().to_string()),
            ("latent_dim", self.target.dim().to_string()),
            ("radius", f64_exact(self.target.radius())),
            ("inner_radius", f64_exact(self.target.inner_radius())),
        ] {
            writeln!(s, "{k}={v}").unwrap();
        }
        s
    }

    /// Inverse of [`TrainConfig::to_kv_text`]; the target must be fully given.
    pub fn from_kv(pairs: &[(String, String)]) -> Result<Self> {
        let get = |k: &str| pairs.iter().rev().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
        let need = |k: &str| get(k).ok_or_else(|| RgpError::Parse(format!("missing {k}")));
        let kind: TargetKind = need("target")?.parse()?;
        let dim: usize = need("latent_dim")?.parse().map_err(|_| RgpError::Parse("bad latent_dim".into()))?;
        let radius = parse_f64(need("radius")?).ok_or_else(|| RgpError::Parse("bad radius".into()))?;
        let inner = get("inner_radius").and_then(parse_f64).unwrap_or(0.0);
        let mut cfg = Self::new(TargetSpec::new(kind, dim, radius, inner)?);
        for (k, v) in pairs {
            if !cfg.set(k, v)? && !matches!(k.as_str(), "target" | "latent_dim" | "radius" | "inner_radius") {
                return Err(RgpError::Parse(format!("unknown config key {k:?}")));
            }
        }
        Ok(cfg)
    }
}

pub fn parse_hidden(value: &str) -> Result<Option<Vec<usize>>> {
    match value.trim() {
        "auto" | "" => Ok(None),
        "none" => Ok(Some(Vec::new())),
        v => v
            .split(',')
            .map(|w| w.trim().parse::<usize>().map_err(|_| invalid(format!("bad hidden width {w:?}"))))
            .collect::<Result<Vec<_>>>()
            .map(Some),
    }
}

/// Loss terms and gradients for both networks.
#[derive(Debug, Clone)]
pub struct ObjectiveValue {
    pub term1: f64,
    /// Unscaled second term; `total = term1 + lambda * term2`.
    pub term2: f64,
    pub total: f64,
    pub encoder_grads: MlpGrads,
    pub decoder_grads: MlpGrads,
    /// Sinkhorn objective only.
    pub sinkhorn_converged: Option<bool>,
}

fn check_batches(x: &ArrayView2<f64>, z: &ArrayView2<f64>, enc: &MlpParams, dec: &MlpParams, min_rows: usize) -> Result<()> {
    if x.nrows() != z.nrows() {
        return Err(mismatch(format!("data batch has {} rows, target batch {}", x.nrows(), z.nrows())));
    }
    if x.nrows() < min_rows {
        return Err(invalid(format!("batch needs at least {min_rows} rows, got {}", x.nrows())));
    }
    if enc.out_dim() != z.ncols() {
        return Err(mismatch(format!("encoder outputs {} dims, target has {}", enc.out_dim(), z.ncols())));
    }
    if dec.in_dim() != enc.out_dim() || dec.out_dim() != enc.in_dim() {
        return Err(mismatch(format!(
            "decoder maps {} -> {} but encoder maps {} -> {}",
            dec.in_dim(),
            dec.out_dim(),
            enc.in_dim(),
            enc.out_dim()
        )));
    }
    Ok(())
}

/// Decoder pass plus reconstruction term. Returns
/// `(mean squared error, decoder grads, grad wrt latent)`.
fn reconstruction(dec: &MlpParams, latent: &Array2<f64>, x: &ArrayView2<f64>, lambda: f64) -> Result<(f64, MlpGrads, Array2<f64>)> {
    let trace = dec.forward_trace(latent.view())?;
    let diff = trace.output() - x;
    let n = x.nrows() as f64;
    let mse = diff.iter().map(|v| v * v).sum::<f64>() / n;
    let upstream = diff * (2.0 * lambda / n);
    let (grads, g_latent) = dec.backward_from_trace(&trace, upstream.view())?;
    Ok((mse, grads, g_latent))
}

/// Reconstruction-regularized MMD objective.
pub fn objective_rgp(
    enc: &MlpParams,
    dec: &MlpParams,
    x: ArrayView2<f64>,
    z: ArrayView2<f64>,
    lambda: f64,
    kernel: &KernelConfig,
) -> Result<ObjectiveValue> {
    check_batches(&x, &z, enc, dec, 2)?;
    let trace = enc.forward_trace(x)?;
    let (mmd, mut g_latent) = mmd2_with_grad(trace.output().view(), z, kernel)?;
    let (mse, decoder_grads, g_rec) = reconstruction(dec, trace.output(), &x, lambda)?;
    g_latent += &g_rec;
    let (encoder_grads, _) = enc.backward_from_trace(&trace, g_latent.view())?;
    Ok(ObjectiveValue {
        term1: mmd,
        term2: mse,
        total: mmd + lambda * mse,
        encoder_grads,
        decoder_grads,
        sinkhorn_converged: None,
    })
}

/// MMD in latent space plus MMD between decoded projections and the batch.
pub fn objective_double_mmd(
    enc: &MlpParams,
    dec: &MlpParams,
    x: ArrayView2<f64>,
    z: ArrayView2<f64>,
    lambda: f64,
    latent_kernel: &KernelConfig,
    data_kernel: &KernelConfig,
) -> Result<ObjectiveValue> {
    check_batches(&x, &z, enc, dec, 2)?;
    let trace = enc.forward_trace(x)?;
    let (mmd, mut g_latent) = mmd2_with_grad(trace.output().view(), z, latent_kernel)?;
    let dtrace = dec.forward_trace(trace.output().view())?;
    let (mmd_x, g_recon) = mmd2_with_grad(dtrace.output().view(), x, data_kernel)?;
    let (decoder_grads, g_rec) = dec.backward_from_trace(&dtrace, (g_recon * lambda).view())?;
    g_latent += &g_rec;
    let (encoder_grads, _) = enc.backward_from_trace(&trace, g_latent.view())?;
    Ok(ObjectiveValue {
        term1: mmd,
        term2: mmd_x,
        total: mmd + lambda * mmd_x,
        encoder_grads,
        decoder_grads,
        sinkhorn_converged: None,
    })
}

/// Entropic transport objective: solves for the plan on uniform marginals,
/// then differentiates with the plan held fixed.
#[allow(clippy::too_many_arguments)]
pub fn objective_sinkhorn(
    enc: &MlpParams,
    dec: &MlpParams,
    x: ArrayView2<f64>,
    z: ArrayView2<f64>,
    lambda: f64,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<ObjectiveValue> {
    check_batches(&x, &z, enc, dec, 1)?;
    let latent = enc.forward(x)?;
    let c = cost_matrix(latent.view(), z)?;
    let n = x.nrows();
    let marg = uniform_marginal(n);
    let plan = sinkhorn(c.view(), marg.view(), marg.view(), epsilon, max_iter, tol)?;
    let mut v = objective_sinkhorn_with_plan(enc, dec, x, z, lambda, epsilon, plan.plan.view())?;
    v.sinkhorn_converged = Some(plan.converged);
    Ok(v)
}

/// The Sinkhorn objective evaluated at a given plan. Its gradient is the
/// one used in training.
pub fn objective_sinkhorn_with_plan(
    enc: &MlpParams,
    dec: &MlpParams,
    x: ArrayView2<f64>,
    z: ArrayView2<f64>,
    lambda: f64,
    epsilon: f64,
    plan: ArrayView2<f64>,
) -> Result<ObjectiveValue> {
    check_batches(&x, &z, enc, dec, 1)?;
    let n = x.nrows();
    if plan.dim() != (n, n) {
        return Err(mismatch(format!("plan is {:?}, batch has {n} rows", plan.dim())));
    }
    let trace = enc.forward_trace(x)?;
    let latent = trace.output();
    let c = cost_matrix(latent.view(), z)?;
    let transport: f64 = plan.iter().zip(c.iter()).map(|(p, c)| p * c).sum();
    let neg_entropy: f64 = plan.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum();
    let term1 = transport + epsilon * neg_entropy;
    // d/dzt_i sum_j P_ij |zt_i - z_j|^2 = 2 (rowsum_i zt_i - (P Z)_i)
    let row_mass = plan.sum_axis(Axis(1));
    let mut g_latent = (latent * &row_mass.insert_axis(Axis(1)) - plan.dot(&z)) * 2.0;
    let (mse, decoder_grads, g_rec) = reconstruction(dec, latent, &x, lambda)?;
    g_latent += &g_rec;
    let (encoder_grads, _) = enc.backward_from_trace(&trace, g_latent.view())?;
    Ok(ObjectiveValue {
        term1,
        term2: mse,
        total: term1 + lambda * mse,
        encoder_grads,
        decoder_grads,
        sinkhorn_converged: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Batch means.
    pub term1: f64,
    pub term2: f64,
    pub total: f64,
    pub sinkhorn_unconverged: usize,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
    pub kernel_gamma: Option<f64>,
    pub data_gamma: Option<f64>,
    pub steps: usize,
    /// Seconds; not measured on wasm.
    pub wall_time: Option<f64>,
}

impl TrainReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "epoch,term1,term2,total")?;
        for r in &self.records {
            writeln!(out, "{},{},{},{}", r.epoch, f64_exact(r.term1), f64_exact(r.term2), f64_exact(r.total))?;
        }
        Ok(())
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub encoder: MlpParams,
    pub decoder: MlpParams,
    pub report: TrainReport,
}

/// Bandwidth from at most [`GAMMA_MAX_ROWS`] evenly strided rows.
pub fn auto_gamma(x: ArrayView2<f64>) -> Result<KernelConfig> {
    if x.nrows() <= GAMMA_MAX_ROWS {
        return gamma_from_data(x);
    }
    let stride = x.nrows().div_ceil(GAMMA_MAX_ROWS);
    gamma_from_data(x.slice(s![..;stride, ..]))
}

/// Epoch batches over a shuffled order. A trailing batch of one row is
/// padded with a second, already-seen row so that every batch has at least
/// two rows.
fn epoch_batches(n: usize, batch: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch).map(<[usize]>::to_vec).collect();
    if let Some(last) = batches.last_mut() {
        if last.len() == 1 && n > 1 {
            last.push(order[0]);
        }
    }
    batches
}

/// Trains encoder and decoder on (standardized, normal-only) rows `data`.
pub fn train(data: ArrayView2<f64>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = data.nrows();
    if n < 2 {
        return Err(invalid(format!("training needs at least 2 rows, got {n}")));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(invalid("training data contains NaN or infinite values"));
    }
    #[cfg(not(target_arch = "wasm32"))]
    let started = std::time::Instant::now();

    let mut rng = rng_from_seed(cfg.seed);
    let m = data.ncols();
    let d = cfg.target.dim();
    let hidden = cfg.hidden_for(m);
    let (mut enc, mut dec) = build_autoencoder(m, d, &hidden, cfg.hidden_activation, &mut rng)?;

    let needs_kernel = cfg.objective != Objective::Sinkhorn;
    let kernel = match (needs_kernel, cfg.gamma_mode) {
        (false, _) => None,
        (true, GammaMode::Fixed(g)) => Some(KernelConfig::new(g)?),
        (true, GammaMode::AutoFromData) => Some(auto_gamma(data)?),
    };
    let data_kernel = match cfg.objective {
        Objective::DoubleMmd => Some(auto_gamma(data)?),
        _ => None,
    };

    let mut enc_opt = AdamState::new(&enc, cfg.lr)?;
    let mut dec_opt = AdamState::new(&dec, cfg.lr)?;
    let batch = cfg.batch_size.min(n);
    let mut records = Vec::with_capacity(cfg.epochs);
    let mut steps = 0;

    for epoch in 0..cfg.epochs {
        let batches = epoch_batches(n, batch, &mut rng);
        let (mut t1, mut t2, mut tot, mut unconverged) = (0.0, 0.0, 0.0, 0);
        for (b, idx) in batches.iter().enumerate() {
            let xb = data.select(Axis(0), idx);
            let zb = sample(&cfg.target, idx.len(), &mut rng)?.points;
            let v = match cfg.objective {
                Objective::Rgp => objective_rgp(&enc, &dec, xb.view(), zb.view(), cfg.lambda, kernel.as_ref().expect("set above"))?,
                Objective::DoubleMmd => objective_double_mmd(
                    &enc,
                    &dec,
                    xb.view(),
                    zb.view(),
                    cfg.lambda,
                    kernel.as_ref().expect("set above"),
                    data_kernel.as_ref().expect("set above"),
                )?,
                Objective::Sinkhorn => objective_sinkhorn(
                    &enc,
                    &dec,
                    xb.view(),
                    zb.view(),
                    cfg.lambda,
                    cfg.epsilon,
                    cfg.sinkhorn_max_iter,
                    cfg.sinkhorn_tol,
                )?,
            };
            if !(v.term1.is_finite() && v.term2.is_finite() && v.total.is_finite()) {
                return Err(RgpError::Numerical(format!(
                    "non-finite loss at epoch {epoch}, batch {b}: term1={} term2={} total={}",
                    v.term1, v.term2, v.total
                )));
            }
            if v.sinkhorn_converged == Some(false) {
                unconverged += 1;
            }
            enc_opt.step(&mut enc, &v.encoder_grads).map_err(|e| at_step(e, epoch, b, &v))?;
            dec_opt.step(&mut dec, &v.decoder_grads).map_err(|e| at_step(e, epoch, b, &v))?;
            t1 += v.term1;
            t2 += v.term2;
            tot += v.total;
            steps += 1;
        }
        let nb = batches.len() as f64;
        records.push(EpochRecord {
            epoch,
            term1: t1 / nb,
            term2: t2 / nb,
            total: tot / nb,
            sinkhorn_unconverged: unconverged,
        });
    }

    #[cfg(not(target_arch = "wasm32"))]
    let wall_time = Some(started.elapsed().as_secs_f64());
    #[cfg(target_arch = "wasm32")]
    let wall_time = None;

    Ok(TrainOutcome {
        encoder: enc,
        decoder: dec,
        report: TrainReport {
            records,
            kernel_gamma: kernel.map(|k| k.gamma()),
            data_gamma: data_kernel.map(|k| k.gamma()),
            steps,
            wall_time,
        },
    })
}

fn at_step(e: RgpError, epoch: usize, batch: usize, v: &ObjectiveValue) -> RgpError {
    match e {
        RgpError::Numerical(msg) => RgpError::Numerical(format!(
            "{msg} at epoch {epoch}, batch {batch} (term1={} term2={} total={})",
            v.term1, v.term2, v.total
        )),
        other => other,
    }
}

/// Trained networks with the configuration that produced them and, when
/// present, the encoder outputs of the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub encoder: MlpParams,
    pub decoder: MlpParams,
    pub projected_train: Option<Array2<f64>>,
}

const CHECKPOINT_HEADER: &str = "rgp-checkpoint 1";

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{CHECKPOINT_HEADER}").unwrap();
        s.push_str(&self.config.to_kv_text());
        writeln!(s, "[encoder]").unwrap();
        s.push_str(&self.encoder.to_text());
        writeln!(s, "[decoder]").unwrap();
        s.push_str(&self.decoder.to_text());
        if let Some(p) = &self.projected_train {
            writeln!(s, "[projected_train] {} {}", p.nrows(), p.ncols()).unwrap();
            for row in p.rows() {
                writeln!(s, "{}", join_floats(row.iter())).unwrap();
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(CHECKPOINT_HEADER) {
            return Err(RgpError::Parse("not an rgp checkpoint".into()));
        }
        let mut kv_text = String::new();
        loop {
            match lines.next() {
                Some(l) if l.trim() == "[encoder]" => break,
                Some(l) => {
                    kv_text.push_str(l);
                    kv_text.push('\n');
                }
                None => return Err(RgpError::Parse("checkpoint has no [encoder] block".into())),
            }
        }
        let config = TrainConfig::from_kv(&parse_kv(&kv_text)?)?;
        let encoder = MlpParams::read_lines(&mut lines)?;
        match lines.by_ref().find(|l| !l.trim().is_empty()).map(str::trim) {
            Some("[decoder]") => {}
            other => return Err(RgpError::Parse(format!("expected [decoder], got {other:?}"))),
        }
        let decoder = MlpParams::read_lines(&mut lines)?;
        let projected_train = match lines.by_ref().find(|l| !l.trim().is_empty()) {
            None => None,
            Some(head) => {
                let dims: Vec<&str> = head.split_whitespace().collect();
                let (rows, cols) = match dims.as_slice() {
                    ["[projected_train]", r, c] => (
                        r.parse::<usize>().map_err(|_| RgpError::Parse("bad row count".into()))?,
                        c.parse::<usize>().map_err(|_| RgpError::Parse("bad column count".into()))?,
                    ),
                    _ => return Err(RgpError::Parse(format!("unexpected checkpoint line {head:?}"))),
                };
                let mut vals = Vec::with_capacity(rows * cols);
                for _ in 0..rows {
                    let row = parse_floats(lines.next().ok_or_else(|| RgpError::Parse("truncated projections".into()))?)?;
                    if row.len() != cols {
                        return Err(RgpError::Parse("projection row has the wrong width".into()));
                    }
                    vals.extend(row);
                }
                Some(Array2::from_shape_vec((rows, cols), vals).expect("sized above"))
            }
        };
        let ck = Self { config, encoder, decoder, projected_train };
        ck.check()?;
        Ok(ck)
    }

    fn check(&self) -> Result<()> {
        let d = self.config.target.dim();
        if self.encoder.out_dim() != d || self.decoder.in_dim() != d || self.decoder.out_dim() != self.encoder.in_dim() {
            return Err(mismatch("checkpoint networks do not match its latent dimension"));
        }
        if let Some(p) = &self.projected_train {
            if p.ncols() != d {
                return Err(mismatch("projected training rows do not match the latent dimension"));
            }
        }
        Ok(())
    }
}
