//! Shared inputs for the benchmarks.

use midist_core::PosteriorCounts;

/// Deterministic `r × s` table with all counts positive and total roughly `n`.
pub fn table(r: usize, s: usize, n: f64) -> PosteriorCounts {
    let weights: Vec<f64> = (0..r * s)
        .map(|k| {
            let (i, j) = (k / s, k % s);
            1.0 + ((i * 7 + j * 3 + i * j) % 11) as f64 + if i == j % r { 5.0 } else { 0.0 }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let entries = weights.iter().map(|w| (w * n / total).max(0.5)).collect();
    PosteriorCounts::from_entries(r, s, entries).expect("valid table")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_positive() {
        let t = table(5, 7, 1000.0);
        assert!(t.all_positive());
        assert!((t.total() - 1000.0).abs() < 50.0);
    }
}
