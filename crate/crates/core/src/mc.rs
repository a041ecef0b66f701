//! Monte Carlo oracle for `p(I | n)`.
//!
//! Dirichlet samples are drawn as normalized independent Gamma variates,
//! `pi_ij = x_ij / x_++` with `x_ij ~ Gamma(n_ij, 1)`.
//!
//! Samples are generated in fixed chunks of [`CHUNK`] draws. Chunk `k` uses a
//! ChaCha stream seeded by `seed` with stream index `k`, so the output depends
//! only on `(seed, N, counts)`, never on the number of worker threads. Values
//! are accumulated sequentially in sample order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{survival, FitResult};
use crate::moments::ProbMatrix;
use crate::table::PosteriorCounts;

/// Draws per random sub-stream.
pub const CHUNK: usize = 8192;

/// Batches used for the standard errors.
pub const BATCHES: usize = 32;

pub const DEFAULT_BINS: usize = 128;

pub const MIN_SAMPLES: usize = 100;

/// Run parameters of [`mc_estimate_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    /// Tail frequencies `p(I > t)` are reported for each threshold.
    pub thresholds: Vec<f64>,
    /// Equal-width histogram bins on `[0, I_max]`.
    pub bins: usize,
}

impl McConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            thresholds: Vec::new(),
            bins: DEFAULT_BINS,
        }
    }
}

/// A sample statistic with its batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tail {
    pub threshold: f64,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `bins + 1` edges from 0 to `I_max`.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Empirical moments of `I` over Dirichlet samples.
///
/// Variance, skewness and kurtosis are the bias-uncorrected sample forms
/// `m2`, `m3 / m2^1.5` and `m4 / m2^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub samples: usize,
    pub mean: Estimate,
    pub variance: Estimate,
    pub skewness: Estimate,
    pub kurtosis: Estimate,
    pub tails: Vec<Tail>,
    pub histogram: Histogram,
    pub seed: u64,
}

impl McEstimate {
    /// Total-variation distance between the histogram and `fit`'s mass in the
    /// same bins. Fitted mass below 0 or above `I_max` counts as mismatch.
    pub fn histogram_distance(&self, fit: &FitResult) -> f64 {
        let h = &self.histogram;
        let n = self.samples as f64;
        let tail = |x: f64| survival(fit, x);
        let mut total = (1.0 - tail(0.0)).abs() + tail(*h.edges.last().expect("edges")).abs();
        for (k, &count) in h.counts.iter().enumerate() {
            let fitted = tail(h.edges[k]) - tail(h.edges[k + 1]);
            total += (count as f64 / n - fitted).abs();
        }
        0.5 * total
    }
}

struct Sampler {
    rows: usize,
    cols: usize,
    gammas: Vec<Gamma<f64>>,
}

impl Sampler {
    fn new(c: &PosteriorCounts) -> Result<Self> {
        c.require_all_positive()?;
        let gammas = c
            .entries()
            .iter()
            .map(|&a| {
                Gamma::new(a, 1.0)
                    .map_err(|e| Error::Probability(format!("gamma shape {a}: {e}")))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            rows: c.rows(),
            cols: c.cols(),
            gammas,
        })
    }

    /// Fills `out` with one normalized Dirichlet draw.
    fn draw(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        loop {
            let mut total = 0.0;
            for (slot, g) in out.iter_mut().zip(&self.gammas) {
                *slot = g.sample(rng);
                total += *slot;
            }
            // all-underflow is possible only for absurdly small shapes
            if total > 0.0 {
                out.iter_mut().for_each(|v| *v /= total);
                return;
            }
        }
    }

    fn mi(&self, p: &[f64], row: &mut [f64], col: &mut [f64]) -> f64 {
        row.fill(0.0);
        col.fill(0.0);
        for (k, &v) in p.iter().enumerate() {
            row[k / self.cols] += v;
            col[k % self.cols] += v;
        }
        let mut acc = 0.0;
        for (k, &v) in p.iter().enumerate() {
            if v > 0.0 {
                acc += v * (v / (row[k / self.cols] * col[k % self.cols])).ln();
            }
        }
        acc.max(0.0)
    }

    fn chunk(&self, seed: u64, index: usize, len: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        let mut p = vec![0.0; self.rows * self.cols];
        let mut row = vec![0.0; self.rows];
        let mut col = vec![0.0; self.cols];
        (0..len)
            .map(|_| {
                self.draw(&mut rng, &mut p);
                self.mi(&p, &mut row, &mut col)
            })
            .collect()
    }
}

/// One Dirichlet draw with parameters `c`.
///
/// Errors with [`Error::ZeroCells`] if any parameter is zero.
pub fn sample_dirichlet<R: rand::Rng + ?Sized>(c: &PosteriorCounts, rng: &mut R) -> Result<ProbMatrix> {
    let sampler = Sampler::new(c)?;
    let mut data: Vec<f64> = sampler.gammas.iter().map(|g| g.sample(rng)).collect();
    let total: f64 = data.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Probability("all gamma variates underflowed".into()));
    }
    data.iter_mut().for_each(|v| *v /= total);
    Ok(ProbMatrix::from_normalized(c.rows(), c.cols(), data))
}

/// Draws `N` values of `I(pi)` with `pi ~ Dirichlet(c)`, in sample order.
pub fn sample_mi(c: &PosteriorCounts, samples: usize, seed: u64) -> Result<Vec<f64>> {
    let sampler = Sampler::new(c)?;
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|k| sampler.chunk(seed, k, CHUNK.min(samples - k * CHUNK)))
        .collect();
    Ok(parts.concat())
}

#[derive(Clone, Copy)]
struct Stats {
    mean: f64,
    var: f64,
    skew: f64,
    kurt: f64,
}

fn stats(x: &[f64]) -> Stats {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    let (skew, kurt) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    } else {
        (0.0, 0.0)
    };
    Stats {
        mean,
        var: m2,
        skew,
        kurt,
    }
}

/// Standard error of a statistic from its values on equal batches.
fn batch_se(values: &[f64]) -> f64 {
    let b = values.len() as f64;
    let mean = values.iter().sum::<f64>() / b;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (b - 1.0) / b).sqrt()
}

/// Monte Carlo moments of `I` with the default histogram; see [`mc_estimate_with`].
pub fn mc_estimate(
    c: &PosteriorCounts,
    samples: usize,
    seed: u64,
    thresholds: &[f64],
) -> Result<McEstimate> {
    mc_estimate_with(
        c,
        &McConfig {
            thresholds: thresholds.to_vec(),
            ..McConfig::new(samples, seed)
        },
    )
}

/// Monte Carlo moments of `I` under `Dirichlet(c)`.
///
/// Standard errors come from [`BATCHES`] contiguous batch means. Requires
/// `samples >= 100` and strictly positive counts.
pub fn mc_estimate_with(c: &PosteriorCounts, cfg: &McConfig) -> Result<McEstimate> {
    if cfg.samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_SAMPLES} samples, got {}",
            cfg.samples
        )));
    }
    if cfg.bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    let values = sample_mi(c, cfg.samples, cfg.seed)?;
    let all = stats(&values);

    let n = values.len();
    let per_batch: Vec<Stats> = (0..BATCHES)
        .map(|b| stats(&values[b * n / BATCHES..(b + 1) * n / BATCHES]))
        .collect();
    let se = |f: fn(&Stats) -> f64| batch_se(&per_batch.iter().map(f).collect::<Vec<_>>());

    let tails = cfg
        .thresholds
        .iter()
        .map(|&t| Tail {
            threshold: t,
            frequency: values.iter().filter(|&&v| v > t).count() as f64 / n as f64,
        })
        .collect();

    let i_max = c.i_max();
    let bins = cfg.bins;
    let edges = (0..=bins).map(|k| i_max * k as f64 / bins as f64).collect();
    let mut counts = vec![0u64; bins];
    for &v in &values {
        let k = if i_max > 0.0 {
            ((v / i_max * bins as f64) as usize).min(bins - 1)
        } else {
            0
        };
        counts[k] += 1;
    }

    Ok(McEstimate {
        samples: n,
        mean: Estimate {
            value: all.mean,
            se: se(|s| s.mean),
        },
        variance: Estimate {
            value: all.var,
            se: se(|s| s.var),
        },
        skewness: Estimate {
            value: all.skew,
            se: se(|s| s.skew),
        },
        kurtosis: Estimate {
            value: all.kurt,
            se: se(|s| s.kurt),
        },
        tails,
        histogram: Histogram { edges, counts },
        seed: cfg.seed,
    })
}
