//! Adaptive 15-point Gauss–Kronrod integration.

use serde::Serialize;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const INITIAL_PIECES: usize = 16;
const MAX_PIECES: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadrature {
    pub value: f64,
    /// Sum of the per-interval `|Kronrod - Gauss|` differences.
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Piece {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        k += WGK[j] * pair;
        if j % 2 == 1 {
            g += WG[j / 2] * pair;
        }
    }
    Piece {
        a,
        b,
        value: k * half,
        error: ((k - g) * half).abs(),
    }
}

/// `∫_a^b f` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Quadrature {
    let width = (b - a) / INITIAL_PIECES as f64;
    let mut pieces: Vec<Piece> = (0..INITIAL_PIECES)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == INITIAL_PIECES { b } else { lo + width };
            kronrod(&f, lo, hi)
        })
        .collect();
    let total_error = |p: &[Piece]| p.iter().map(|x| x.error).sum::<f64>();
    while total_error(&pieces) > tol && pieces.len() < MAX_PIECES {
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("non-empty");
        let p = pieces.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            // interval exhausted at machine precision
            pieces.push(p);
            break;
        }
        pieces.push(kronrod(&f, p.a, mid));
        pieces.push(kronrod(&f, mid, p.b));
    }
    // sum smallest-first
    let mut values: Vec<f64> = pieces.iter().map(|p| p.value).collect();
    values.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    let error = total_error(&pieces);
    Quadrature {
        value: values.iter().sum(),
        error,
        evaluations: 15 * (2 * pieces.len() - INITIAL_PIECES),
        converged: error <= tol,
    }
}

/// `∫_a^∞ f` via `x = a + scale * t / (1 - t)`; `scale` should be the width of
/// the bulk of `f` so the mapped integrand is not concentrated near `t = 0`.
pub fn integrate_upper<F: Fn(f64) -> f64>(f: F, a: f64, scale: f64, tol: f64) -> Quadrature {
    integrate(
        |t| {
            let u = 1.0 - t;
            let v = f(a + scale * t / u) * scale / (u * u);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}
