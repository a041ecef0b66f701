//! Digamma function on the positive reals.
//!
//! The general path lifts the argument with `psi(x) = psi(x + 1) - 1/x` until
//! it reaches [`LIFT_THRESHOLD`], then sums the Stirling-type asymptotic series
//! `psi(z) = ln z - 1/(2z) - sum_k B_2k / (2k z^2k)`.
//!
//! Integer and half-integer arguments have exact partial-harmonic forms
//!
//! ```text
//! psi(m)       = -gamma + sum_{k=1}^{m-1} 1/k
//! psi(m + 1/2) = -gamma - 2 ln 2 + 2 sum_{k=1}^{m} 1/(2k - 1)
//! ```
//!
//! which are tabulated lazily up to argument [`TABLE_MAX`].
//!
//! Note the sign of the `2 ln 2` term: `psi(1/2) = -gamma - 2 ln 2` is forced by
//! the recurrence anchored at `psi(1) = -gamma`. A `+2 ln 2` variant sometimes
//! seen in print is off by `4 ln 2`.

use std::f64::consts::LN_2;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Euler–Mascheroni constant, `psi(1) = -EULER_GAMMA`.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// The recurrence lifts arguments to at least this value before the series is used.
pub const LIFT_THRESHOLD: f64 = 8.0;

/// Largest argument served by the integer/half-integer lookup table.
pub const TABLE_MAX: usize = 512;

/// `B_2k / (2k)` for k = 1..7.
const ASYMPTOTIC: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

/// Digamma `psi(x)` for `x > 0`.
///
/// Absolute error is below `1e-10` for `x >= 1e-6`; away from the pole it is a
/// few ulps.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("digamma requires finite x > 0, got {x}")));
    }
    Ok(digamma_unchecked(x))
}

/// [`digamma`] without the domain check. `x` must be finite and positive.
pub(crate) fn digamma_unchecked(x: f64) -> f64 {
    if x >= LIFT_THRESHOLD {
        return asymptotic(x);
    }
    // Sum the lift terms smallest-first and subtract 1/x last; near the pole
    // 1/x dominates and is applied as an error-free hi+lo pair.
    let mut z = x + 1.0;
    let mut lift = 0.0;
    while z < LIFT_THRESHOLD {
        lift += 1.0 / z;
        z += 1.0;
    }
    let hi = 1.0 / x;
    let lo = -(hi.mul_add(x, -1.0)) / x;
    ((asymptotic(z) - lift) - lo) - hi
}

fn asymptotic(z: f64) -> f64 {
    let inv2 = 1.0 / (z * z);
    let mut poly = 0.0;
    for c in ASYMPTOTIC.iter().rev() {
        poly = (poly + c) * inv2;
    }
    z.ln() - 0.5 / z - poly
}

struct Tables {
    /// `psi(m)` at index `m`, index 0 unused.
    integer: Vec<f64>,
    /// `psi(m + 1/2)` at index `m`.
    half: Vec<f64>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut integer = Vec::with_capacity(TABLE_MAX + 1);
        integer.push(f64::NAN);
        let mut acc = -EULER_GAMMA;
        for m in 1..=TABLE_MAX {
            integer.push(acc);
            acc += 1.0 / m as f64;
        }
        let mut half = Vec::with_capacity(TABLE_MAX + 1);
        let mut acc = -EULER_GAMMA - 2.0 * LN_2;
        for m in 0..=TABLE_MAX {
            half.push(acc);
            acc += 2.0 / (2 * m + 1) as f64;
        }
        Tables { integer, half }
    })
}

/// `psi(m)` for integer `m >= 1` from the partial harmonic sum.
pub fn digamma_integer(m: i64) -> Result<f64> {
    if m < 1 {
        return Err(Error::Domain(format!("digamma_integer requires m >= 1, got {m}")));
    }
    let m = m as usize;
    if m <= TABLE_MAX {
        return Ok(tables().integer[m]);
    }
    let tail: f64 = (TABLE_MAX..m).rev().map(|k| 1.0 / k as f64).sum();
    Ok(tables().integer[TABLE_MAX] + tail)
}

/// `psi(m + 1/2)` for integer `m >= 0`.
pub fn digamma_half_integer(m: i64) -> Result<f64> {
    if m < 0 {
        return Err(Error::Domain(format!(
            "digamma_half_integer requires m >= 0, got {m}"
        )));
    }
    let m = m as usize;
    if m <= TABLE_MAX {
        return Ok(tables().half[m]);
    }
    let tail: f64 = (TABLE_MAX + 1..=m)
        .rev()
        .map(|k| 2.0 / (2 * k - 1) as f64)
        .sum();
    Ok(tables().half[TABLE_MAX] + tail)
}

/// `psi(x)` taking the table when `x` is an integer or half-integer within it.
///
/// Used by the moment engine, which evaluates `psi(n_ij + 1)` for every cell.
pub(crate) fn digamma_fast(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x <= TABLE_MAX as f64 + 0.5 {
        let twice = 2.0 * x;
        if twice.fract() == 0.0 {
            let t = twice as usize;
            return if t.is_multiple_of(2) {
                tables().integer[t / 2]
            } else {
                tables().half[t / 2]
            };
        }
    }
    digamma_unchecked(x)
}
