//! Closed-form densities for `p(I | n)` matched to computed moments, and their
//! upper tails `p(I > I* | n)`.
//!
//! Two-moment fits invert the normal, gamma and log-normal parameterizations
//! directly. The four-moment fit multiplies a base density by a quadratic,
//! `p(I) ∝ (1 + b I + c I^2) p0(I | mu, sigma^2)`; see [`fit_poly_ansatz`].
//!
//! All densities live on the whole real line (normal) or `[0, ∞)`; they are not
//! truncated at `I_max`, and the mass they put above it is reported instead.

mod ansatz;
mod quadrature;

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::moments::MomentSummary;

pub use ansatz::{fit_poly_ansatz, ANSATZ_RESIDUAL_TOL, NEGATIVITY_GRID};
pub use quadrature::{integrate, integrate_upper, Quadrature};

/// Absolute tolerance of [`survival_quadrature`].
pub const QUADRATURE_TOL: f64 = 1e-11;

/// Density families offered by the fitters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Normal,
    Gamma,
    Lognormal,
    PolyAnsatz,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(Self::Normal),
            "gamma" => Ok(Self::Gamma),
            "lognormal" => Ok(Self::Lognormal),
            "ansatz" | "poly_ansatz" => Ok(Self::PolyAnsatz),
            other => Err(Error::InvalidArgument(format!("unknown family `{other}`"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Normal => "normal",
            Self::Gamma => "gamma",
            Self::Lognormal => "lognormal",
            Self::PolyAnsatz => "poly_ansatz",
        })
    }
}

/// Base density `p0` of the four-moment ansatz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseFamily {
    Normal,
    Gamma,
}

impl FromStr for BaseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(Self::Normal),
            "gamma" => Ok(Self::Gamma),
            other => Err(Error::InvalidArgument(format!("unknown base family `{other}`"))),
        }
    }
}

/// First four raw moments `E[I^k]`, k = 1..4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RawMoments(pub [f64; 4]);

impl RawMoments {
    /// Raw moments from the mean and the second to fourth central moments.
    pub fn from_central(mean: f64, variance: f64, central3: f64, central4: f64) -> Self {
        let m = mean;
        Self([
            m,
            variance + m * m,
            central3 + 3.0 * m * variance + m * m * m,
            central4 + 4.0 * m * central3 + 6.0 * m * m * variance + m.powi(4),
        ])
    }

    /// Exact mean, best variance and the leading-order third/fourth central
    /// moments of a summary; `None` if the third moment is unavailable.
    pub fn from_summary(s: &MomentSummary) -> Option<Self> {
        Some(Self::from_central(
            s.mean_exact,
            s.best_variance(),
            s.central3?,
            s.central4,
        ))
    }

    pub fn mean(&self) -> f64 {
        self.0[0]
    }

    /// `(variance, central3, central4)`.
    pub fn central(&self) -> (f64, f64, f64) {
        let [m1, m2, m3, m4] = self.0;
        let var = m2 - m1 * m1;
        let c3 = m3 - 3.0 * m1 * m2 + 2.0 * m1.powi(3);
        let c4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
        (var, c3, c4)
    }
}

/// Family-specific parameters of a fitted density.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FitParams {
    Normal {
        mean: f64,
        variance: f64,
    },
    Gamma {
        shape: f64,
        scale: f64,
    },
    Lognormal {
        log_mean: f64,
        log_variance: f64,
    },
    /// `p(I) = (1 + b I + c I^2) p0(I | mu, sigma2) / normalization`.
    PolyAnsatz {
        base: BaseFamily,
        b: f64,
        c: f64,
        mu: f64,
        sigma2: f64,
        normalization: f64,
        /// The same modulation written in the base's standardized variable
        /// `z = (I - mu) / sigma` as `(1 - gamma) + beta z + gamma z^2`; stays
        /// finite even when the polynomial vanishes at `I = 0`.
        beta: f64,
        gamma: f64,
    },
}

/// Fit quality and sanity flags.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct FitDiagnostics {
    /// Newton iterations spent on the accepted root (0 for closed forms).
    pub iterations: usize,
    /// Largest relative deviation between requested and achieved raw moments.
    pub residual: f64,
    /// Result of the grid check on `[0, 1.05 I_max]`; `None` if not checked.
    pub negative_density: Option<bool>,
    /// `p(I > I_max)` under the fitted density; `None` if `I_max` was not supplied.
    pub mass_above_i_max: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// A fitted density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub family: Family,
    pub params: FitParams,
    /// First four raw moments of the fitted density.
    pub moments_achieved: [f64; 4],
    pub diagnostics: FitDiagnostics,
}

impl FitResult {
    /// Density at `x`. For the ansatz this can be negative.
    pub fn density(&self, x: f64) -> f64 {
        match self.params {
            FitParams::Normal { mean, variance } => normal_pdf(x, mean, variance),
            FitParams::Gamma { shape, scale } => gamma_pdf(x, shape, scale),
            FitParams::Lognormal {
                log_mean,
                log_variance,
            } => lognormal_pdf(x, log_mean, log_variance),
            FitParams::PolyAnsatz {
                base,
                mu,
                sigma2,
                beta,
                gamma,
                ..
            } => {
                let z = (x - mu) / sigma2.sqrt();
                let modulation = (1.0 - gamma) + beta * z + gamma * z * z;
                modulation * base_pdf(base, x, mu, sigma2)
            }
        }
    }

    /// Mean and variance of the fitted density, in closed form where the
    /// family has one (raw moments lose the variance to cancellation when it is
    /// small against the squared mean).
    pub fn mean_variance(&self) -> (f64, f64) {
        match self.params {
            FitParams::Normal { mean, variance } => (mean, variance),
            FitParams::Gamma { shape, scale } => (shape * scale, shape * scale * scale),
            FitParams::Lognormal {
                log_mean,
                log_variance,
            } => (
                (log_mean + 0.5 * log_variance).exp(),
                log_variance.exp_m1() * (2.0 * log_mean + log_variance).exp(),
            ),
            FitParams::PolyAnsatz { .. } => {
                let [m1, m2, ..] = self.moments_achieved;
                (m1, m2 - m1 * m1)
            }
        }
    }

    /// Fills the support diagnostics for posterior support `[0, i_max]`.
    pub fn check_support(&mut self, i_max: f64) {
        self.diagnostics.mass_above_i_max = Some(survival(self, i_max));
        if let FitParams::PolyAnsatz { .. } = self.params {
            self.diagnostics.negative_density = Some(ansatz::has_negative_density(self, i_max));
        }
    }
}

fn normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let z = (x - mean) / variance.sqrt();
    (-0.5 * z * z).exp() / (2.0 * PI * variance).sqrt()
}

fn gamma_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    ((shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()).exp()
}

fn lognormal_pdf(x: f64, log_mean: f64, log_variance: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let z = (x.ln() - log_mean) / log_variance.sqrt();
    (-0.5 * z * z).exp() / (x * (2.0 * PI * log_variance).sqrt())
}

fn base_pdf(base: BaseFamily, x: f64, mu: f64, sigma2: f64) -> f64 {
    match base {
        BaseFamily::Normal => normal_pdf(x, mu, sigma2),
        BaseFamily::Gamma => gamma_pdf(x, mu * mu / sigma2, sigma2 / mu),
    }
}

/// Upper tail of the standard normal.
fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// Regularized upper incomplete gamma `Q(a, y)`.
fn gamma_sf(shape: f64, y: f64) -> f64 {
    if y <= 0.0 {
        1.0
    } else {
        gamma_ur(shape, y)
    }
}

/// Raw moments `E[X^k]`, k = 0..=order, from cumulants `kappa[1..=order]`
/// (`kappa[0]` is ignored).
pub(crate) fn raw_from_cumulants(kappa: &[f64]) -> Vec<f64> {
    let order = kappa.len() - 1;
    let mut m = vec![1.0];
    for k in 1..=order {
        let mut acc = 0.0;
        let mut binom = 1.0; // C(k-1, j-1)
        for j in 1..=k {
            acc += binom * kappa[j] * m[k - j];
            binom = binom * (k - j) as f64 / j as f64;
        }
        m.push(acc);
    }
    m
}

fn first_four(m: &[f64]) -> [f64; 4] {
    [m[1], m[2], m[3], m[4]]
}

/// Two-moment fit by closed-form parameter inversion.
///
/// * normal: mean and variance as given (`mean >= 0`);
/// * gamma: `shape = mean^2 / variance`, `scale = variance / mean`;
/// * log-normal: `log_variance = ln(1 + variance / mean^2)`,
///   `log_mean = ln(mean) - log_variance / 2`.
pub fn fit_two_moment(mean: f64, variance: f64, family: Family) -> Result<FitResult> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::InvalidMoments(format!(
            "variance must be positive, got {variance}"
        )));
    }
    if !mean.is_finite() {
        return Err(Error::InvalidMoments(format!("mean must be finite, got {mean}")));
    }
    let (params, raw) = match family {
        Family::Normal => {
            if mean < 0.0 {
                return Err(Error::InvalidMoments(format!(
                    "normal fit needs mean >= 0, got {mean}"
                )));
            }
            let raw = raw_from_cumulants(&[0.0, mean, variance, 0.0, 0.0]);
            (FitParams::Normal { mean, variance }, raw)
        }
        Family::Gamma => {
            if !(mean > 0.0) {
                return Err(Error::InvalidMoments(format!(
                    "gamma fit needs mean > 0, got {mean}"
                )));
            }
            let shape = mean * mean / variance;
            let scale = variance / mean;
            let raw = gamma_raw_moments(shape, scale, 4);
            (FitParams::Gamma { shape, scale }, raw)
        }
        Family::Lognormal => {
            if !(mean > 0.0) {
                return Err(Error::InvalidMoments(format!(
                    "log-normal fit needs mean > 0, got {mean}"
                )));
            }
            let log_variance = (variance / (mean * mean)).ln_1p();
            let log_mean = mean.ln() - 0.5 * log_variance;
            let raw = (0..=4)
                .map(|k| {
                    let k = k as f64;
                    (k * log_mean + 0.5 * k * k * log_variance).exp()
                })
                .collect::<Vec<_>>();
            (
                FitParams::Lognormal {
                    log_mean,
                    log_variance,
                },
                raw,
            )
        }
        Family::PolyAnsatz => {
            return Err(Error::InvalidArgument(
                "the polynomial ansatz needs four moments; use fit_poly_ansatz".into(),
            ))
        }
    };
    let mut fit = FitResult {
        family,
        params,
        moments_achieved: first_four(&raw),
        diagnostics: FitDiagnostics::default(),
    };
    let (m, v) = fit.mean_variance();
    fit.diagnostics.residual =
        ((m - mean).abs() / mean.abs().max(f64::MIN_POSITIVE)).max((v - variance).abs() / variance);
    Ok(fit)
}

fn gamma_raw_moments(shape: f64, scale: f64, order: usize) -> Vec<f64> {
    let mut m = vec![1.0];
    for k in 0..order {
        let prev = m[k];
        m.push(prev * scale * (shape + k as f64));
    }
    m
}

/// `p(I > i_star)` under the fitted density.
///
/// Normal, gamma and log-normal use their standard upper-tail functions. The
/// ansatz tail reduces to partial moments of its base: with `z` the base's
/// standardized variable and `t` the standardized threshold,
///
/// * normal base: `S = Phi^c(t) + (beta + gamma t) phi(t)`;
/// * gamma base (shape `a`, `y = i_star / scale`, `d = y^a e^-y / Gamma(a+1)`):
///   `S = Q(a, y) + d (beta sqrt(a) + gamma (1 - a + y))`.
pub fn survival(f: &FitResult, i_star: f64) -> f64 {
    match f.params {
        FitParams::Normal { mean, variance } => normal_sf((i_star - mean) / variance.sqrt()),
        FitParams::Gamma { shape, scale } => gamma_sf(shape, i_star / scale),
        FitParams::Lognormal {
            log_mean,
            log_variance,
        } => {
            if i_star <= 0.0 {
                1.0
            } else {
                normal_sf((i_star.ln() - log_mean) / log_variance.sqrt())
            }
        }
        FitParams::PolyAnsatz {
            base,
            mu,
            sigma2,
            beta,
            gamma,
            ..
        } => match base {
            BaseFamily::Normal => {
                let t = (i_star - mu) / sigma2.sqrt();
                let phi = (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
                normal_sf(t) + (beta + gamma * t) * phi
            }
            BaseFamily::Gamma => {
                if i_star <= 0.0 {
                    return 1.0;
                }
                let shape = mu * mu / sigma2;
                let y = i_star / (sigma2 / mu);
                let d = (shape * y.ln() - y - ln_gamma(shape + 1.0)).exp();
                gamma_sf(shape, y) + d * (beta * shape.sqrt() + gamma * (1.0 - shape + y))
            }
        },
    }
}

/// `p(I > i_star)` by adaptive Gauss–Kronrod quadrature of [`FitResult::density`]
/// on `[i_star, ∞)`, absolute tolerance [`QUADRATURE_TOL`].
pub fn survival_quadrature(f: &FitResult, i_star: f64) -> Quadrature {
    let lower = match f.family {
        Family::Normal => i_star,
        Family::PolyAnsatz => match f.params {
            FitParams::PolyAnsatz {
                base: BaseFamily::Normal,
                ..
            } => i_star,
            _ => i_star.max(0.0),
        },
        _ => i_star.max(0.0),
    };
    let [m1, m2, ..] = f.moments_achieved;
    let sd = (m2 - m1 * m1).max(0.0).sqrt().max(f64::MIN_POSITIVE);
    // Integrate the bulk on a finite interval so a narrow peak far above the
    // threshold is resolved, then map the remaining tail.
    let split = m1 + 20.0 * sd;
    let density = |x: f64| f.density(x);
    if lower >= split {
        return integrate_upper(density, lower, sd, QUADRATURE_TOL);
    }
    let bulk = integrate(density, lower, split, 0.5 * QUADRATURE_TOL);
    let tail = integrate_upper(density, split, sd, 0.5 * QUADRATURE_TOL);
    Quadrature {
        value: bulk.value + tail.value,
        error: bulk.error + tail.error,
        evaluations: bulk.evaluations + tail.evaluations,
        converged: bulk.converged && tail.converged,
    }
}
