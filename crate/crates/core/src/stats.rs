//! Error analysis for correlated Monte Carlo series.

use serde::{Deserialize, Serialize};

/// Mean with a one-sigma error bar.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub err: f64,
}

impl Estimate {
    pub fn new(mean: f64, err: f64) -> Self {
        Estimate { mean, err }
    }

    /// True when `value` lies within `k` error bars (plus an absolute slack).
    pub fn agrees_with(&self, value: f64, k: f64, slack: f64) -> bool {
        (self.mean - value).abs() <= k * self.err + slack
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error from blocking: block sizes double while at least 16 blocks
/// remain, and the error is read off the first plateau (consecutive levels
/// within 5%), falling back to the largest level estimate.
pub fn blocking_error(xs: &[f64]) -> f64 {
    let levels = blocking_levels(xs);
    if levels.is_empty() {
        return 0.0;
    }
    for w in levels.windows(2) {
        if w[0] > 0.0 && ((w[1] - w[0]) / w[0]).abs() < 0.05 {
            return w[0].max(w[1]);
        }
    }
    levels.iter().copied().fold(0.0, f64::max)
}

/// Naive standard error at each blocking level.
pub fn blocking_levels(xs: &[f64]) -> Vec<f64> {
    let mut data: Vec<f64> = xs.to_vec();
    let mut out = Vec::new();
    while data.len() >= 16 {
        let n = data.len() as f64;
        let m = mean(&data);
        let var = data.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        out.push((var / n).sqrt());
        data = data.chunks_exact(2).map(|c| 0.5 * (c[0] + c[1])).collect();
    }
    out
}

pub fn blocked_estimate(xs: &[f64]) -> Estimate {
    Estimate::new(mean(xs), blocking_error(xs))
}

/// Jackknife over `n_blocks` contiguous blocks for a nonlinear function of
/// several sample means. `series[k]` holds the samples of the k-th input.
pub fn jackknife<F>(series: &[&[f64]], n_blocks: usize, f: F) -> Estimate
where
    F: Fn(&[f64]) -> f64,
{
    let n = series.first().map_or(0, |s| s.len());
    let full: Vec<f64> = series.iter().map(|s| mean(s)).collect();
    let value = f(&full);
    let nb = n_blocks.min(n);
    if nb < 2 {
        return Estimate::new(value, 0.0);
    }
    let size = n / nb;
    let sums: Vec<f64> = series.iter().map(|s| s.iter().sum()).collect();
    let mut reps = Vec::with_capacity(nb);
    for b in 0..nb {
        let (lo, hi) = (b * size, if b + 1 == nb { n } else { (b + 1) * size });
        let left = (n - (hi - lo)) as f64;
        let means: Vec<f64> = series
            .iter()
            .zip(&sums)
            .map(|(s, total)| (total - s[lo..hi].iter().sum::<f64>()) / left)
            .collect();
        reps.push(f(&means));
    }
    let rm = mean(&reps);
    let var = reps.iter().map(|r| (r - rm).powi(2)).sum::<f64>() * (nb as f64 - 1.0) / nb as f64;
    Estimate::new(value, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn independent_samples_match_naive_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..65536).map(|_| rng.gen::<f64>()).collect();
        let naive = (1.0 / 12.0 / 65536.0f64).sqrt();
        let e = blocking_error(&xs);
        assert!((e / naive - 1.0).abs() < 0.15, "{e} vs {naive}");
    }

    #[test]
    fn correlated_samples_inflate_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x = 0.0;
        let xs: Vec<f64> = (0..65536)
            .map(|_| {
                x = 0.95 * x + rng.gen::<f64>() - 0.5;
                x
            })
            .collect();
        let naive = blocking_levels(&xs)[0];
        // Integrated autocorrelation (1+ρ)/(1-ρ) = 39 inflates the variance.
        let e = blocking_error(&xs);
        assert!(e > 4.0 * naive);
    }

    #[test]
    fn jackknife_of_linear_function_matches_plain_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..6400).map(|_| rng.gen::<f64>()).collect();
        let jk = jackknife(&[&xs], 64, |m| 2.0 * m[0]);
        let naive = 2.0 * (1.0 / 12.0 / 6400.0f64).sqrt();
        assert!((jk.mean - 2.0 * mean(&xs)).abs() < 1e-12);
        assert!((jk.err / naive - 1.0).abs() < 0.3);
    }
}
