//! Distribution distances used by the training objectives.
//!
//! * unbiased MMD² with a Gaussian kernel `k(x, y) = exp(-gamma |x - y|^2)`,
//!   plus its exact gradient with respect to the first sample set;
//! * the mean-pairwise-distance bandwidth heuristic `gamma = 1 / dbar^2`;
//! * entropic optimal transport solved by Sinkhorn scaling, in the log
//!   domain by default.
//!
//! All loops sum in a fixed order, so results are bit-reproducible for a
//! given input.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{invalid, mismatch, Result, RgpError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    gamma: f64,
}

impl KernelConfig {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid(format!("kernel gamma must be positive and finite, got {gamma}")));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        (-self.gamma * sq_dist(x, y)).exp()
    }
}

#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

type Contig<'a> = ndarray::CowArray<'a, f64, ndarray::Ix2>;

fn rows_of<'a>(x: &'a Contig<'_>) -> Vec<&'a [f64]> {
    x.rows().into_iter().map(|r| r.to_slice().expect("row-major rows")).collect()
}

fn contiguous(x: ArrayView2<'_, f64>) -> Contig<'_> {
    if x.is_standard_layout() {
        x.into()
    } else {
        x.as_standard_layout().into_owned().into()
    }
}

/// Kernel bandwidth from the mean Euclidean distance over all ordered pairs:
/// `dbar = sum_{i,j} |x_i - x_j| / (n (n - 1))`, `gamma = 1 / dbar^2`.
pub fn gamma_from_data(x: ArrayView2<f64>) -> Result<KernelConfig> {
    let n = x.nrows();
    if n < 2 {
        return Err(invalid(format!("bandwidth heuristic needs at least 2 rows, got {n}")));
    }
    let x = contiguous(x);
    let rows = rows_of(&x);
    let mut total = 0.0;
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in (i + 1)..n {
            row_sum += sq_dist(rows[i], rows[j]).sqrt();
        }
        total += row_sum;
    }
    // Each unordered pair appears twice in the ordered double sum.
    let mean = 2.0 * total / (n as f64 * (n as f64 - 1.0));
    if !(mean > 0.0) {
        return Err(RgpError::DegenerateData("all rows are identical; mean pairwise distance is 0".into()));
    }
    KernelConfig::new(1.0 / (mean * mean))
}

fn check_pair(x: &ArrayView2<f64>, y: &ArrayView2<f64>) -> Result<()> {
    if x.ncols() != y.ncols() {
        return Err(mismatch(format!("sample sets have {} and {} columns", x.ncols(), y.ncols())));
    }
    if x.nrows() < 2 || y.nrows() < 2 {
        return Err(invalid(format!(
            "unbiased MMD needs at least 2 rows per set, got {} and {}",
            x.nrows(),
            y.nrows()
        )));
    }
    Ok(())
}

/// Sum of `k(a_i, a_j)` over ordered pairs `i != j`.
fn within_sum(rows: &[&[f64]], cfg: &KernelConfig) -> f64 {
    let mut total = 0.0;
    for i in 0..rows.len() {
        let mut s = 0.0;
        for j in (i + 1)..rows.len() {
            s += cfg.eval(rows[i], rows[j]);
        }
        total += s;
    }
    2.0 * total
}

/// Unbiased MMD² estimate between the row sets `x` (m rows) and `y` (n rows).
///
/// Can be slightly negative when the two distributions agree.
pub fn mmd2_unbiased(x: ArrayView2<f64>, y: ArrayView2<f64>, cfg: &KernelConfig) -> Result<f64> {
    check_pair(&x, &y)?;
    let (x, y) = (contiguous(x), contiguous(y));
    let (xr, yr) = (rows_of(&x), rows_of(&y));
    let (m, n) = (xr.len() as f64, yr.len() as f64);
    let xx = within_sum(&xr, cfg) / (m * (m - 1.0));
    let yy = within_sum(&yr, cfg) / (n * (n - 1.0));
    let mut xy = 0.0;
    for a in &xr {
        let mut s = 0.0;
        for b in &yr {
            s += cfg.eval(a, b);
        }
        xy += s;
    }
    Ok(xx + yy - 2.0 * xy / (m * n))
}

/// Gradient of [`mmd2_unbiased`] with respect to every entry of `x`.
pub fn mmd2_grad_x(x: ArrayView2<f64>, y: ArrayView2<f64>, cfg: &KernelConfig) -> Result<Array2<f64>> {
    mmd2_with_grad(x, y, cfg).map(|(_, g)| g)
}

/// MMD² value and its gradient with respect to `x` in one pass.
pub fn mmd2_with_grad(x: ArrayView2<f64>, y: ArrayView2<f64>, cfg: &KernelConfig) -> Result<(f64, Array2<f64>)> {
    check_pair(&x, &y)?;
    let (x, y) = (contiguous(x), contiguous(y));
    let (xr, yr) = (rows_of(&x), rows_of(&y));
    let (m, n, d) = (xr.len(), yr.len(), x.ncols());
    let (mf, nf) = (m as f64, n as f64);
    let gamma = cfg.gamma();

    let mut grad = Array2::<f64>::zeros((m, d));
    let c_xx = 1.0 / (mf * (mf - 1.0));
    let c_xy = 2.0 / (mf * nf);

    let mut xx = 0.0;
    for i in 0..m {
        let mut s = 0.0;
        for j in (i + 1)..m {
            let k = cfg.eval(xr[i], xr[j]);
            s += k;
            // d/dx_i of 2 k(x_i, x_j) is -4 gamma k (x_i - x_j); mirrored for x_j.
            let w = -4.0 * gamma * c_xx * k;
            if w != 0.0 {
                for t in 0..d {
                    let diff = xr[i][t] - xr[j][t];
                    grad[[i, t]] += w * diff;
                    grad[[j, t]] -= w * diff;
                }
            }
        }
        xx += s;
    }
    let xx = 2.0 * xx * c_xx;
    let yy = within_sum(&yr, cfg) / (nf * (nf - 1.0));

    let mut xy = 0.0;
    for i in 0..m {
        let mut s = 0.0;
        for yj in &yr {
            let k = cfg.eval(xr[i], yj);
            s += k;
            let w = 2.0 * gamma * c_xy * k;
            if w != 0.0 {
                for t in 0..d {
                    grad[[i, t]] += w * (xr[i][t] - yj[t]);
                }
            }
        }
        xy += s;
    }
    Ok((xx + yy - c_xy * xy, grad))
}

/// Squared Euclidean cost `C[i, j] = |x_i - y_j|^2`.
pub fn cost_matrix(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != y.ncols() {
        return Err(mismatch(format!("point sets have {} and {} columns", x.ncols(), y.ncols())));
    }
    let (x, y) = (contiguous(x), contiguous(y));
    let (xr, yr) = (rows_of(&x), rows_of(&y));
    Ok(Array2::from_shape_fn((xr.len(), yr.len()), |(i, j)| sq_dist(xr[i], yr[j])))
}

pub const DEFAULT_SINKHORN_EPSILON: f64 = 0.01;
pub const DEFAULT_SINKHORN_MAX_ITER: usize = 1000;
pub const DEFAULT_SINKHORN_TOL: f64 = 1e-6;

/// Result of a Sinkhorn solve.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    /// Coupling with row sums `a` and column sums `b`.
    pub plan: Array2<f64>,
    /// `<plan, C>_F`.
    pub cost: f64,
    /// `sum_ij plan_ij ln plan_ij` (with `0 ln 0 = 0`).
    pub neg_entropy: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest row-marginal violation at exit; columns are exact after each
    /// sweep.
    pub marginal_error: f64,
    /// `<plan, C>_F` after every sweep.
    pub cost_history: Vec<f64>,
}

impl TransportPlan {
    /// Entropic objective `<plan, C> + epsilon * sum plan ln plan`.
    pub fn regularized_cost(&self, epsilon: f64) -> f64 {
        self.cost + epsilon * self.neg_entropy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SinkhornMode {
    /// Dual potentials updated with log-sum-exp; survives small epsilon.
    #[default]
    Log,
    /// Classic `u = a / K v`, `v = b / K^T u` scaling on `K = exp(-C / eps)`.
    Plain,
}

/// Uniform weights `1/n`.
pub fn uniform_marginal(n: usize) -> Array1<f64> {
    Array1::from_elem(n, 1.0 / n as f64)
}

fn check_simplex(w: &ArrayView1<f64>, name: &str) -> Result<()> {
    if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(invalid(format!("marginal {name} has negative or non-finite entries")));
    }
    let s: f64 = w.sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(invalid(format!("marginal {name} sums to {s}, expected 1")));
    }
    Ok(())
}

/// Entropic-regularized transport between marginals `a` and `b` under cost
/// `c`, solved in the log domain.
pub fn sinkhorn(
    c: ArrayView2<f64>,
    a: ArrayView1<f64>,
    b: ArrayView1<f64>,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<TransportPlan> {
    sinkhorn_with_mode(c, a, b, epsilon, max_iter, tol, SinkhornMode::Log)
}

pub fn sinkhorn_with_mode(
    c: ArrayView2<f64>,
    a: ArrayView1<f64>,
    b: ArrayView1<f64>,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
    mode: SinkhornMode,
) -> Result<TransportPlan> {
    let (m, n) = c.dim();
    if a.len() != m || b.len() != n {
        return Err(mismatch(format!(
            "cost is {m}x{n} but marginals have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(RgpError::Numerical("cost matrix contains non-finite entries".into()));
    }
    check_simplex(&a, "a")?;
    check_simplex(&b, "b")?;
    match mode {
        SinkhornMode::Log => sinkhorn_log(c, a, b, epsilon, max_iter, tol),
        SinkhornMode::Plain => sinkhorn_plain(c, a, b, epsilon, max_iter, tol),
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn finish(plan: Array2<f64>, c: &ArrayView2<f64>, iterations: usize, converged: bool, marginal_error: f64, cost_history: Vec<f64>) -> TransportPlan {
    let cost = frobenius(&plan, c);
    let neg_entropy = plan.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum();
    TransportPlan { plan, cost, neg_entropy, iterations, converged, marginal_error, cost_history }
}

fn frobenius(plan: &Array2<f64>, c: &ArrayView2<f64>) -> f64 {
    plan.iter().zip(c.iter()).map(|(p, c)| p * c).sum()
}

fn row_error(plan: &Array2<f64>, a: &ArrayView1<f64>) -> f64 {
    plan.rows()
        .into_iter()
        .zip(a.iter())
        .map(|(row, &ai)| (row.sum() - ai).abs())
        .fold(0.0, f64::max)
}

fn sinkhorn_log(
    c: ArrayView2<f64>,
    a: ArrayView1<f64>,
    b: ArrayView1<f64>,
    eps: f64,
    max_iter: usize,
    tol: f64,
) -> Result<TransportPlan> {
    let (m, n) = c.dim();
    let log_a: Vec<f64> = a.iter().map(|v| v.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|v| v.ln()).collect();
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let mut plan = Array2::<f64>::zeros((m, n));
    let mut history = Vec::new();
    let mut err = f64::INFINITY;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        for i in 0..m {
            f[i] = if log_a[i] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                eps * log_a[i] - eps * log_sum_exp((0..n).map(|j| (g[j] - c[[i, j]]) / eps))
            };
        }
        for j in 0..n {
            g[j] = if log_b[j] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                eps * log_b[j] - eps * log_sum_exp((0..m).map(|i| (f[i] - c[[i, j]]) / eps))
            };
        }
        for ((i, j), p) in plan.indexed_iter_mut() {
            *p = ((f[i] + g[j] - c[[i, j]]) / eps).exp();
        }
        if plan.iter().any(|p| !p.is_finite()) {
            return Err(RgpError::Numerical("Sinkhorn plan became non-finite".into()));
        }
        history.push(frobenius(&plan, &c));
        err = row_error(&plan, &a);
        if err <= tol {
            return Ok(finish(plan, &c, iterations, true, err, history));
        }
    }
    Ok(finish(plan, &c, iterations, false, err, history))
}

fn sinkhorn_plain(
    c: ArrayView2<f64>,
    a: ArrayView1<f64>,
    b: ArrayView1<f64>,
    eps: f64,
    max_iter: usize,
    tol: f64,
) -> Result<TransportPlan> {
    let (m, n) = c.dim();
    let k = c.mapv(|v| (-v / eps).exp());
    let mut u = Array1::<f64>::ones(m);
    let mut v = Array1::<f64>::ones(n);
    let mut history = Vec::new();
    let mut err = f64::INFINITY;
    let mut iterations = 0;
    let failure = || {
        RgpError::Numerical(format!(
            "plain-domain Sinkhorn produced NaN/inf (epsilon={eps} is too small for the cost scale); use the log-domain mode"
        ))
    };

    while iterations < max_iter {
        iterations += 1;
        let kv = k.dot(&v);
        u = &a / &kv;
        let ktu = k.t().dot(&u);
        v = &b / &ktu;
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(failure());
        }
        let plan = Array2::from_shape_fn((m, n), |(i, j)| u[i] * k[[i, j]] * v[j]);
        history.push(frobenius(&plan, &c));
        err = row_error(&plan, &a);
        if !err.is_finite() {
            return Err(failure());
        }
        if err <= tol {
            return Ok(finish(plan, &c, iterations, true, err, history));
        }
    }
    let plan = Array2::from_shape_fn((m, n), |(i, j)| u[i] * k[[i, j]] * v[j]);
    Ok(finish(plan, &c, iterations, false, err, history))
}
