//! Posterior moments of the mutual information under a Dirichlet posterior.
//!
//! Everything here is driven by the log dependence ratio of each cell,
//! `l_ij = log(n_ij n / (n_{i+} n_{+j}))`, and the plug-in statistics built from it:
//!
//! ```text
//! J = sum (n_ij/n) l_ij            K = sum (n_ij/n) l_ij^2      L = sum (n_ij/n) l_ij^3
//! M = sum (1/n_ij - 1/n_{i+} - 1/n_{+j} + 1/n) n_ij l_ij
//! Q = 1 - sum n_ij^2 / (n_{i+} n_{+j})
//! P = sum_i n J_{i+}^2 / n_{i+} + sum_j n J_{+j}^2 / n_{+j}
//! ```
//!
//! with `J_{i+}`, `J_{+j}` the row and column partial sums of `J`. The
//! expansions keep the shifted denominators `n + 1` and `(n + 1)(n + 2)`;
//! the third and fourth central moments keep a plain `n^2`.
//!
//! Zero cells follow the `x log x -> 0` convention in `J`, `K`, `L` and `Q`.
//! `M` diverges like `log n_ij` as a cell empties, so `M`, `P` and everything
//! built on them require strictly positive counts.

use serde::Serialize;

use crate::error::{Cell, Error, Result};
use crate::special::digamma_fast;
use crate::table::PosteriorCounts;

/// Below this `K - J^2` (nats^2) a table is treated as exactly independent.
pub const INDEPENDENCE_EPS: f64 = 1e-20;

/// Joint probabilities `q_ij` of an `r x s` table, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ProbMatrix {
    /// Entries must be non-negative and sum to 1 within `1e-9`.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Probability(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Probability(format!(
                "entry ({},{}) = {} is not a probability",
                k / cols,
                k % cols,
                data[k]
            )));
        }
        let sum: f64 = data.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Probability(format!("entries sum to {sum}, not 1")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Probability("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Posterior means `n_ij / n`.
    pub fn from_counts(c: &PosteriorCounts) -> Self {
        Self {
            rows: c.rows(),
            cols: c.cols(),
            data: c.posterior_mean(),
        }
    }

    /// Wraps already-normalized data without validation. Used by the sampler.
    pub(crate) fn from_normalized(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        marginals(self.rows, self.cols, &self.data)
    }
}

fn marginals(rows: usize, cols: usize, data: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut row = vec![0.0; rows];
    let mut col = vec![0.0; cols];
    for (k, &v) in data.iter().enumerate() {
        row[k / cols] += v;
        col[k % cols] += v;
    }
    (row, col)
}

/// Plug-in mutual information `sum q_ij log(q_ij / (q_{i+} q_{+j}))`.
pub fn point_mi(q: &ProbMatrix) -> f64 {
    mi_of(q.rows, q.cols, &q.data)
}

/// Mutual information of row-major probabilities without validation.
pub(crate) fn mi_of(rows: usize, cols: usize, data: &[f64]) -> f64 {
    let (row, col) = marginals(rows, cols, data);
    let mut acc = 0.0;
    for (k, &v) in data.iter().enumerate() {
        if v > 0.0 {
            acc += v * (v / (row[k / cols] * col[k % cols])).ln();
        }
    }
    // rounding can leave a few ulps below zero at independence
    acc.max(0.0)
}

/// Plug-in statistics of the posterior means.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointStats {
    pub j: f64,
    pub k: f64,
    pub l: f64,
    /// `None` when some cell is zero.
    pub m: Option<f64>,
    pub q: f64,
    /// `None` when some cell is zero.
    pub p: Option<f64>,
    pub row_j: Vec<f64>,
    pub col_j: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl PointStats {
    /// `K - J^2`, clamped at 0 against rounding.
    pub fn k_minus_j2(&self) -> f64 {
        (self.k - self.j * self.j).max(0.0)
    }
}

/// Computes `J, K, L, M, Q, P` and the row/column partial sums of `J`.
pub fn point_stats(c: &PosteriorCounts) -> PointStats {
    let (r, s) = (c.rows(), c.cols());
    let n = c.total();
    let (rows, cols) = (c.row_sums(), c.col_sums());
    let mut row_j = vec![0.0; r];
    let mut col_j = vec![0.0; s];
    let (mut k_acc, mut l_acc, mut m_acc, mut sq_acc) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..r {
        for j in 0..s {
            let nij = c.get(i, j);
            if nij == 0.0 {
                continue;
            }
            let log_ratio = (nij * n / (rows[i] * cols[j])).ln();
            let w = nij / n;
            row_j[i] += w * log_ratio;
            col_j[j] += w * log_ratio;
            k_acc += w * log_ratio * log_ratio;
            l_acc += w * log_ratio * log_ratio * log_ratio;
            m_acc += (1.0 / nij - 1.0 / rows[i] - 1.0 / cols[j] + 1.0 / n) * nij * log_ratio;
            sq_acc += nij * nij / (rows[i] * cols[j]);
        }
    }
    let j_total: f64 = row_j.iter().sum();
    let mut diagnostics = Vec::new();
    let (m, p) = if c.all_positive() {
        let p_rows: f64 = row_j
            .iter()
            .zip(rows)
            .map(|(ji, ni)| n * ji * ji / ni)
            .sum();
        let p_cols: f64 = col_j
            .iter()
            .zip(cols)
            .map(|(jj, nj)| n * jj * jj / nj)
            .sum();
        (Some(m_acc), Some(p_rows + p_cols))
    } else {
        diagnostics.push(format!(
            "M and P undefined: zero cells at {:?}",
            c.zero_cells()
        ));
        (None, None)
    };
    PointStats {
        j: j_total,
        k: k_acc,
        l: l_acc,
        m,
        q: 1.0 - sq_acc,
        p,
        row_j,
        col_j,
        diagnostics,
    }
}

/// Exact posterior mean
/// `E[I] = (1/n) sum n_ij [psi(n_ij+1) - psi(n_{i+}+1) - psi(n_{+j}+1) + psi(n+1)]`.
pub fn mean_exact(c: &PosteriorCounts) -> f64 {
    if c.is_degenerate_shape() {
        return 0.0;
    }
    let n = c.total();
    let psi_n = digamma_fast(n + 1.0);
    let psi_rows: Vec<f64> = c.row_sums().iter().map(|v| digamma_fast(v + 1.0)).collect();
    let psi_cols: Vec<f64> = c.col_sums().iter().map(|v| digamma_fast(v + 1.0)).collect();
    let mut acc = 0.0;
    for (i, pr) in psi_rows.iter().enumerate() {
        for (j, pc) in psi_cols.iter().enumerate() {
            let nij = c.get(i, j);
            if nij > 0.0 {
                acc += nij * (digamma_fast(nij + 1.0) - pr - pc + psi_n);
            }
        }
    }
    acc / n
}

fn dof_product(c: &PosteriorCounts) -> f64 {
    ((c.rows() - 1) * (c.cols() - 1)) as f64
}

/// `J + (r-1)(s-1) / (2(n+1))`.
pub fn mean_o2(c: &PosteriorCounts) -> f64 {
    if c.is_degenerate_shape() {
        return 0.0;
    }
    mean_o2_from(c, &point_stats(c))
}

fn mean_o2_from(c: &PosteriorCounts, st: &PointStats) -> f64 {
    st.j + dof_product(c) / (2.0 * (c.total() + 1.0))
}

/// Leading-order variance `(K - J^2) / (n + 1)`.
pub fn var_o1(c: &PosteriorCounts) -> f64 {
    if c.is_degenerate_shape() {
        return 0.0;
    }
    var_o1_from(c, &point_stats(c))
}

fn var_o1_from(c: &PosteriorCounts, st: &PointStats) -> f64 {
    st.k_minus_j2() / (c.total() + 1.0)
}

/// Variance through second order,
/// `(K - J^2)/(n+1) + (M + (r-1)(s-1)(1/2 - J) - Q) / ((n+1)(n+2))`.
///
/// Can be negative far outside the regime `r s << n`; the value is returned
/// as is. Requires strictly positive counts.
pub fn var_o2(c: &PosteriorCounts) -> Result<f64> {
    if c.is_degenerate_shape() {
        return Ok(0.0);
    }
    c.require_all_positive()?;
    Ok(var_o2_from(c, &point_stats(c)))
}

fn var_o2_from(c: &PosteriorCounts, st: &PointStats) -> f64 {
    let n = c.total();
    let m = st.m.expect("caller checked all_positive");
    let correction = m + dof_product(c) * (0.5 - st.j) - st.q;
    var_o1_from(c, st) + correction / ((n + 1.0) * (n + 2.0))
}

/// Leading-order third central moment
/// `(2/n^2)(2J^3 - 3KJ + L) + (3/n^2)(K + J^2 - P)`.
pub fn central3(c: &PosteriorCounts) -> Result<f64> {
    if c.is_degenerate_shape() {
        return Ok(0.0);
    }
    c.require_all_positive()?;
    Ok(central3_from(c, &point_stats(c)))
}

fn central3_from(c: &PosteriorCounts, st: &PointStats) -> f64 {
    let n2 = c.total() * c.total();
    let p = st.p.expect("caller checked all_positive");
    let (j, k) = (st.j, st.k);
    2.0 / n2 * (2.0 * j * j * j - 3.0 * k * j + st.l) + 3.0 / n2 * (k + j * j - p)
}

/// Leading-order fourth central moment `3 (K - J^2)^2 / n^2`.
pub fn central4(c: &PosteriorCounts) -> f64 {
    if c.is_degenerate_shape() {
        return 0.0;
    }
    central4_from(c, &point_stats(c))
}

fn central4_from(c: &PosteriorCounts, st: &PointStats) -> f64 {
    let kj = st.k_minus_j2();
    3.0 * kj * kj / (c.total() * c.total())
}

/// Skewness and kurtosis from the leading-order third and fourth central moments.
///
/// The divisor is `var_o2` when it is finite and positive, `var_o1` otherwise.
/// Tables with vanishing leading-order variance (exact independence, single
/// row or column) are reported as [`Error::Degenerate`].
pub fn skew_kurt(c: &PosteriorCounts) -> Result<(f64, f64)> {
    if c.is_degenerate_shape() {
        return Err(Error::Degenerate("single row or column: I is identically 0".into()));
    }
    c.require_all_positive()?;
    let st = point_stats(c);
    skew_kurt_from(c, &st)
}

fn skew_kurt_from(c: &PosteriorCounts, st: &PointStats) -> Result<(f64, f64)> {
    if st.k_minus_j2() <= INDEPENDENCE_EPS {
        return Err(Error::Degenerate(
            "leading-order variance vanishes (independent table); skewness and kurtosis undefined"
                .into(),
        ));
    }
    let v2 = var_o2_from(c, st);
    let var = if v2.is_finite() && v2 > 0.0 {
        v2
    } else {
        var_o1_from(c, st)
    };
    Ok((
        central3_from(c, st) / var.powf(1.5),
        central4_from(c, st) / (var * var),
    ))
}

/// Dense `rs x rs` covariance of the cell probabilities, row-major over cell
/// index `i * s + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceTensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CovarianceTensor {
    /// `data` holds `(rs)^2` entries indexed by `((i s + j), (k s + l))`.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let dim = rows * cols;
        if data.len() != dim * dim {
            return Err(Error::InvalidArgument(format!(
                "covariance for {rows}x{cols} needs {} entries, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        let dim = rows * cols;
        Self {
            rows,
            cols,
            data: vec![0.0; dim * dim],
        }
    }

    /// Number of cells `r s`.
    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    /// `Cov(pi_a, pi_b)` for flat cell indices `a`, `b`.
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.dim() + b]
    }

    /// `Cov(pi_ij, pi_kl)`.
    pub fn cell(&self, (i, j): Cell, (k, l): Cell) -> f64 {
        self.get(i * self.cols + j, k * self.cols + l)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Dirichlet covariance `Cov(pi_ij, pi_kl) = (q_ij d_ik d_jl - q_ij q_kl) / (n + 1)`.
pub fn dirichlet_covariance(c: &PosteriorCounts) -> CovarianceTensor {
    let q = c.posterior_mean();
    let dim = q.len();
    let scale = 1.0 / (c.total() + 1.0);
    let mut data = vec![0.0; dim * dim];
    for a in 0..dim {
        for b in 0..dim {
            let diag = if a == b { q[a] } else { 0.0 };
            data[a * dim + b] = (diag - q[a] * q[b]) * scale;
        }
    }
    CovarianceTensor {
        rows: c.rows(),
        cols: c.cols(),
        data,
    }
}

/// Mean (through `O(1/n)`) and leading-order variance of `I` for an arbitrary
/// posterior with mean `qhat` and cell covariance `cov`, by direct evaluation
/// of the second-order Taylor expansion of `I` around `qhat`.
///
/// The Hessian kernel divides by `qhat`, so every entry must be positive.
pub fn mean_var_from_cov(qhat: &ProbMatrix, cov: &CovarianceTensor) -> Result<(f64, f64)> {
    let (r, s) = (qhat.rows(), qhat.cols());
    if cov.rows != r || cov.cols != s {
        return Err(Error::ShapeMismatch {
            expected_rows: r,
            expected_cols: s,
            rows: cov.rows,
            cols: cov.cols,
        });
    }
    if let Some(k) = qhat.data().iter().position(|&v| v <= 0.0) {
        return Err(Error::Probability(format!(
            "zero probability at ({},{})",
            k / s,
            k % s
        )));
    }
    let dim = r * s;
    let scale = cov.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for a in 0..dim {
        for b in a + 1..dim {
            if (cov.get(a, b) - cov.get(b, a)).abs() > 1e-12 * scale {
                return Err(Error::InvalidArgument(format!(
                    "covariance is not symmetric at ({a},{b})"
                )));
            }
        }
    }
    let (row, col) = qhat.marginals();
    let log_ratio: Vec<f64> = (0..dim)
        .map(|a| (qhat.data[a] / (row[a / s] * col[a % s])).ln())
        .collect();

    let mut curvature = 0.0;
    let mut variance = 0.0;
    for a in 0..dim {
        let (i, j) = (a / s, a % s);
        for b in 0..dim {
            let (k, l) = (b / s, b % s);
            let cv = cov.get(a, b);
            let mut h = 0.0;
            if i == k && j == l {
                h += 1.0 / qhat.data[a];
            }
            if i == k {
                h -= 1.0 / row[i];
            }
            if j == l {
                h -= 1.0 / col[j];
            }
            curvature += h * cv;
            variance += log_ratio[a] * log_ratio[b] * cv;
        }
    }
    Ok((point_mi(qhat) + 0.5 * curvature, variance))
}

/// Validity and degeneracy flags attached to a [`MomentSummary`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    /// `r s / n`; the expansions are accurate roughly to `(rs/n)^{1..2}`.
    pub rs_over_n: f64,
    /// Single row or column, so `I` is identically 0.
    pub degenerate_shape: bool,
    /// `K - J^2` vanishes: leading-order variance is zero.
    pub independence_degenerate: bool,
    pub zero_cells: Vec<Cell>,
    /// `var_o2` came out negative.
    pub var_o2_negative: bool,
    /// Set when `var_o2 < 0` or `rs/n >= 1`.
    pub validity_warning: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// All moment outputs for one posterior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSummary {
    pub mean_exact: f64,
    pub mean_o2: f64,
    pub var_o1: f64,
    pub var_o2: Option<f64>,
    pub central3: Option<f64>,
    pub central4: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    pub i_max: f64,
    pub diagnostics: Diagnostics,
}

impl MomentSummary {
    /// Highest-order variance available: `var_o2` if present, else `var_o1`.
    pub fn best_variance(&self) -> f64 {
        self.var_o2.unwrap_or(self.var_o1)
    }
}

/// Evaluates every moment operation once, turning degeneracies into flags.
pub fn summarize(c: &PosteriorCounts) -> MomentSummary {
    let rs_over_n = (c.rows() * c.cols()) as f64 / c.total();
    let mut diagnostics = Diagnostics {
        rs_over_n,
        degenerate_shape: c.is_degenerate_shape(),
        independence_degenerate: false,
        zero_cells: c.zero_cells(),
        var_o2_negative: false,
        validity_warning: rs_over_n >= 1.0,
        notes: Vec::new(),
    };
    if c.is_degenerate_shape() {
        diagnostics
            .notes
            .push("single row or column: I is identically 0".into());
        return MomentSummary {
            mean_exact: 0.0,
            mean_o2: 0.0,
            var_o1: 0.0,
            var_o2: Some(0.0),
            central3: Some(0.0),
            central4: 0.0,
            skewness: None,
            kurtosis: None,
            i_max: c.i_max(),
            diagnostics,
        };
    }

    let st = point_stats(c);
    diagnostics.independence_degenerate = st.k_minus_j2() <= INDEPENDENCE_EPS;
    let (var2, c3) = if c.all_positive() {
        (Some(var_o2_from(c, &st)), Some(central3_from(c, &st)))
    } else {
        diagnostics
            .notes
            .push("zero cells: var_o2, central3, skewness and kurtosis not available".into());
        (None, None)
    };
    if let Some(v) = var2 {
        if v < 0.0 {
            diagnostics.var_o2_negative = true;
            diagnostics.validity_warning = true;
            diagnostics
                .notes
                .push("var_o2 is negative: sample too small for the expansion".into());
        }
    }
    let (skewness, kurtosis) = if c.all_positive() {
        match skew_kurt_from(c, &st) {
            Ok((sk, ku)) => (Some(sk), Some(ku)),
            Err(e) => {
                diagnostics.notes.push(e.to_string());
                (None, None)
            }
        }
    } else {
        (None, None)
    };
    MomentSummary {
        mean_exact: mean_exact(c),
        mean_o2: mean_o2_from(c, &st),
        var_o1: var_o1_from(c, &st),
        var_o2: var2,
        central3: c3,
        central4: central4_from(c, &st),
        skewness,
        kurtosis,
        i_max: c.i_max(),
        diagnostics,
    }
}
