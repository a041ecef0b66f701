//! Four-moment fit `p(I) ∝ (1 + b I + c I^2) p0(I | mu, sigma^2)`.
//!
//! The fit is solved in the base's standardized variable `z = (I - mu) / sigma`,
//! where the modulation reads `(1 - gamma) + beta z + gamma z^2` and is
//! normalized for any `(beta, gamma)`. Location and scale then follow in closed
//! form from the target mean and variance, leaving two equations (skewness,
//! kurtosis) for a normal base and three (plus the gamma shape constraint
//! `mu / sigma = sqrt(shape)`) for a gamma base.
//!
//! Starting Newton at `b = c = 0` does not work: there the derivative in `b`
//! is proportional to the derivative in `mu`, so the Jacobian is singular. The
//! solver instead runs damped Newton from a fixed grid of starts and keeps the
//! converged root with the smallest modulation `beta^2 + gamma^2`.

use super::{raw_from_cumulants, BaseFamily, Family, FitDiagnostics, FitParams, FitResult, RawMoments};
use crate::error::{Error, Result};

/// Maximum relative deviation of achieved from requested raw moments.
pub const ANSATZ_RESIDUAL_TOL: f64 = 1e-8;

/// Points of the non-negativity check on `[0, 1.05 I_max]`.
pub const NEGATIVITY_GRID: usize = 1024;

const MAX_ITER: usize = 200;
const ROOT_TOL: f64 = 1e-12;
const MAX_HALVINGS: usize = 40;
const BETA_STARTS: [f64; 6] = [-1.0, -0.5, -0.2, 0.2, 0.5, 1.0];
const GAMMA_STARTS: [f64; 5] = [-0.3, -0.1, 0.0, 0.1, 0.3];
const LN_SHAPE_OFFSETS: [f64; 3] = [0.0, -1.0, 1.0];

/// Moments `E[z^k]`, k = 0..=6, of the standardized base.
fn base_moments(base: BaseFamily, shape: f64) -> [f64; 7] {
    match base {
        BaseFamily::Normal => [1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0],
        BaseFamily::Gamma => {
            // standardized gamma: kappa_k = (k-1)! a^(1 - k/2) for k >= 2
            let mut kappa = [0.0; 7];
            let mut fact = 1.0;
            for (k, slot) in kappa.iter_mut().enumerate().skip(2) {
                fact *= (k - 1) as f64;
                *slot = fact * shape.powf(1.0 - k as f64 / 2.0);
            }
            let m = raw_from_cumulants(&kappa);
            [m[0], m[1], m[2], m[3], m[4], m[5], m[6]]
        }
    }
}

/// `E[z^k]`, k = 0..=4, under the modulated base.
fn modulated(h: &[f64; 7], beta: f64, gamma: f64) -> [f64; 5] {
    std::array::from_fn(|k| (1.0 - gamma) * h[k] + beta * h[k + 1] + gamma * h[k + 2])
}

struct Shape {
    mean: f64,
    var: f64,
    skew: f64,
    kurt: f64,
}

fn shape_of(m: &[f64; 5]) -> Option<Shape> {
    let mean = m[1];
    let var = m[2] - mean * mean;
    if !(var > 0.0) || !var.is_finite() {
        return None;
    }
    let c3 = m[3] - 3.0 * mean * m[2] + 2.0 * mean.powi(3);
    let c4 = m[4] - 4.0 * mean * m[3] + 6.0 * mean * mean * m[2] - 3.0 * mean.powi(4);
    Some(Shape {
        mean,
        var,
        skew: c3 / var.powf(1.5),
        kurt: c4 / (var * var),
    })
}

struct Problem {
    base: BaseFamily,
    mean_over_sd: f64,
    skew: f64,
    kurt: f64,
}

/// Unknowns: `[beta, gamma]` (normal) or `[ln shape, beta, gamma]` (gamma).
struct Point {
    shape: f64,
    beta: f64,
    gamma: f64,
}

impl Problem {
    fn unpack(&self, x: &[f64]) -> Option<Point> {
        match self.base {
            BaseFamily::Normal => Some(Point {
                shape: f64::NAN,
                beta: x[0],
                gamma: x[1],
            }),
            BaseFamily::Gamma => {
                if x[0].abs() > 50.0 {
                    return None;
                }
                Some(Point {
                    shape: x[0].exp(),
                    beta: x[1],
                    gamma: x[2],
                })
            }
        }
    }

    fn residual(&self, x: &[f64]) -> Option<Vec<f64>> {
        let p = self.unpack(x)?;
        let s = shape_of(&modulated(&base_moments(self.base, p.shape), p.beta, p.gamma))?;
        let mut r = Vec::with_capacity(3);
        if self.base == BaseFamily::Gamma {
            r.push((p.shape.sqrt() + s.mean) / s.var.sqrt() - self.mean_over_sd);
        }
        r.push(s.skew - self.skew);
        r.push(s.kurt - self.kurt);
        r.iter().all(|v| v.is_finite()).then_some(r)
    }
}

fn norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[pivot][col].abs() > 1e-300) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for (k, row) in rest.iter_mut().enumerate() {
            let f = row[col] / pivot_row[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[col + 1 + k] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn jacobian(p: &Problem, x: &[f64], r: &[f64]) -> Option<Vec<Vec<f64>>> {
    let n = x.len();
    let mut jac = vec![vec![0.0; n]; n];
    for j in 0..n {
        let h = 1e-7 * (1.0 + x[j].abs());
        let mut xp = x.to_vec();
        xp[j] += h;
        let mut xm = x.to_vec();
        xm[j] -= h;
        let col = match (p.residual(&xp), p.residual(&xm)) {
            (Some(rp), Some(rm)) => rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect(),
            (Some(rp), None) => rp.iter().zip(r).map(|(a, b)| (a - b) / h).collect(),
            (None, Some(rm)) => r.iter().zip(&rm).map(|(a, b)| (a - b) / h).collect(),
            (None, None) => return None,
        };
        let col: Vec<f64> = col;
        for i in 0..n {
            jac[i][j] = col[i];
        }
    }
    Some(jac)
}

struct Root {
    x: Vec<f64>,
    residual: f64,
    iterations: usize,
}

fn newton(p: &Problem, x0: Vec<f64>) -> Option<Root> {
    let mut x = x0;
    let mut r = p.residual(&x)?;
    let mut current = norm(&r);
    for it in 0..MAX_ITER {
        if current <= ROOT_TOL {
            return Some(Root {
                x,
                residual: current,
                iterations: it,
            });
        }
        let jac = jacobian(p, &x, &r)?;
        let step = solve(jac, r.iter().map(|v| -v).collect())?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a + lambda * d).collect();
            if let Some(rt) = p.residual(&trial) {
                let n = norm(&rt);
                if n < current {
                    x = trial;
                    r = rt;
                    current = n;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (current <= ROOT_TOL).then_some(Root {
        x,
        residual: current,
        iterations: MAX_ITER,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn build(
    base: BaseFamily,
    target: &RawMoments,
    sd: f64,
    point: &Point,
    iterations: usize,
) -> Option<FitResult> {
    let m = modulated(&base_moments(base, point.shape), point.beta, point.gamma);
    let s = shape_of(&m)?;
    let sigma = sd / s.var.sqrt();
    let mu = match base {
        BaseFamily::Normal => target.mean() - sigma * s.mean,
        BaseFamily::Gamma => point.shape.sqrt() * sigma,
    };
    let achieved: [f64; 4] = std::array::from_fn(|i| {
        let k = i + 1;
        (0..=k)
            .map(|j| binomial(k, j) * mu.powi((k - j) as i32) * sigma.powi(j as i32) * m[j])
            .sum()
    });
    let residual = achieved
        .iter()
        .zip(&target.0)
        .map(|(a, t)| (a - t).abs() / t.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    // the modulation at I = 0, and its coefficients in I
    let z0 = -mu / sigma;
    let at_zero = (1.0 - point.gamma) + point.beta * z0 + point.gamma * z0 * z0;
    let b = (point.beta + 2.0 * point.gamma * z0) / (sigma * at_zero);
    let c = point.gamma / (sigma * sigma * at_zero);
    Some(FitResult {
        family: Family::PolyAnsatz,
        params: FitParams::PolyAnsatz {
            base,
            b,
            c,
            mu,
            sigma2: sigma * sigma,
            normalization: 1.0 / at_zero,
            beta: point.beta,
            gamma: point.gamma,
        },
        moments_achieved: achieved,
        diagnostics: FitDiagnostics {
            iterations,
            residual,
            ..FitDiagnostics::default()
        },
    })
}

/// Fits `(1 + b I + c I^2) p0(I | mu, sigma^2)` to four raw moments.
///
/// Errors with [`Error::InvalidMoments`] unless `m1 > 0` and `m2 > m1^2`, and with [`Error::NonConvergence`] when no start reaches a
/// root whose achieved raw moments are within [`ANSATZ_RESIDUAL_TOL`].
///
/// Moment sequences that no non-negative density can have (3×3 Hankel matrix
/// not positive semidefinite) are still fitted; the result is then a signed
/// approximant and carries a note. With `i_max` the density is checked for
/// negative values on a [`NEGATIVITY_GRID`]-point grid over `[0, 1.05 I_max]`
/// and the mass above `I_max` is reported.
pub fn fit_poly_ansatz(
    moments: &RawMoments,
    base: BaseFamily,
    i_max: Option<f64>,
) -> Result<FitResult> {
    if moments.0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMoments("moments must be finite".into()));
    }
    let mean = moments.mean();
    let (var, c3, c4) = moments.central();
    if !(var > 0.0) {
        return Err(Error::InvalidMoments(format!(
            "moment matrix not positive definite: m2 - m1^2 = {var:e} <= 0"
        )));
    }
    if !(mean > 0.0) {
        return Err(Error::InvalidMoments(format!("mean must be positive, got {mean}")));
    }
    let mut notes = Vec::new();
    let hankel = var * c4 - c3 * c3 - var.powi(3);
    if hankel < -1e-12 * (var * c4.abs() + c3 * c3 + var.powi(3)) {
        notes.push(format!(
            "moments are not those of any non-negative density (Hankel determinant {hankel:e}); \
             the fit is a signed approximant"
        ));
    }
    let sd = var.sqrt();
    let problem = Problem {
        base,
        mean_over_sd: mean / sd,
        skew: c3 / var.powf(1.5),
        kurt: c4 / (var * var),
    };

    // the plain base already matches: no modulation needed
    let ln_shape0 = (mean * mean / var).ln();
    let trivial = match base {
        BaseFamily::Normal => vec![0.0, 0.0],
        BaseFamily::Gamma => vec![ln_shape0, 0.0, 0.0],
    };
    let mut best: Option<(f64, Root)> = None;
    let mut best_residual = f64::INFINITY;
    if let Some(r) = problem.residual(&trivial) {
        best_residual = norm(&r);
        if best_residual <= ROOT_TOL {
            best = Some((
                0.0,
                Root {
                    x: trivial,
                    residual: best_residual,
                    iterations: 0,
                },
            ));
        }
    }

    if best.is_none() {
        let mut starts = Vec::new();
        for &beta in &BETA_STARTS {
            for &gamma in &GAMMA_STARTS {
                match base {
                    BaseFamily::Normal => starts.push(vec![beta, gamma]),
                    BaseFamily::Gamma => {
                        for off in LN_SHAPE_OFFSETS {
                            starts.push(vec![ln_shape0 + off, beta, gamma]);
                        }
                    }
                }
            }
        }
        for start in starts {
            let Some(root) = newton(&problem, start) else { continue };
            let p = problem.unpack(&root.x).expect("root is in range");
            let size = p.beta * p.beta + p.gamma * p.gamma;
            best_residual = best_residual.min(root.residual);
            let better = best.as_ref().is_none_or(|(s, _)| size < *s - 1e-12);
            if better {
                best = Some((size, root));
            }
        }
    }

    let Some((_, root)) = best else {
        return Err(Error::NonConvergence { best_residual });
    };
    let point = problem.unpack(&root.x).expect("root is in range");
    let mut fit = build(base, moments, sd, &point, root.iterations)
        .ok_or(Error::NonConvergence { best_residual: root.residual })?;
    if !(fit.diagnostics.residual <= ANSATZ_RESIDUAL_TOL) {
        return Err(Error::NonConvergence {
            best_residual: fit.diagnostics.residual,
        });
    }
    fit.diagnostics.notes = notes;
    if let Some(i_max) = i_max {
        fit.check_support(i_max);
        if fit.diagnostics.negative_density == Some(true) {
            fit.diagnostics
                .notes
                .push("density is negative somewhere on [0, 1.05 I_max]".into());
        }
    }
    Ok(fit)
}

/// Grid check of the fitted density on `[0, 1.05 i_max]`.
pub(crate) fn has_negative_density(fit: &FitResult, i_max: f64) -> bool {
    let hi = 1.05 * i_max;
    (0..NEGATIVITY_GRID).any(|k| {
        let x = hi * k as f64 / (NEGATIVITY_GRID - 1) as f64;
        fit.density(x) < 0.0
    })
}
