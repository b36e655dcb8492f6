use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Two-sided z for 95% coverage.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for a binomial proportion. Behaves sensibly at
/// p-hat near 0 or 1, which is exactly where colorability curves live.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::invalid("wilson interval needs at least one trial"));
    }
    if successes > trials {
        return Err(Error::invalid("successes exceed trials"));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // At the boundaries the matching endpoint is exactly 0 or 1; evaluating
    // the formula there only loses that to rounding.
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    Ok((lo, hi))
}

/// Sample mean and standard error (Bessel-corrected).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean and stderr from exact moment sums: s1 = sum x_i, s2 = sum x_i^2.
pub fn mean_stderr_from_sums(s1: f64, s2: f64, n: u64) -> (f64, f64) {
    let nf = n as f64;
    let mean = s1 / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((s2 - s1 * s1 / nf) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Total variation distance between two distributions on the same support.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::invalid("tv distance needs equal supports"));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
    /// Cells after merging low-expectation bins.
    pub bins: usize,
}

/// Pearson goodness-of-fit of observed counts against expected cell
/// probabilities. Adjacent cells are merged left to right until each merged
/// cell expects at least 5 observations; the tail remainder folds into the
/// last cell. With one cell left the statistic is 0 by convention.
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64]) -> Result<ChiSquareReport> {
    if observed.len() != expected_probs.len() || observed.is_empty() {
        return Err(Error::invalid("observed and expected shapes differ"));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(Error::invalid("no observations"));
    }
    let psum: f64 = expected_probs.iter().sum();
    if expected_probs.iter().any(|&p| p < -1e-12) || (psum - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!("expected probabilities sum to {psum}, not 1")));
    }

    let mut cells: Vec<(u64, f64)> = Vec::new(); // (observed, expected count)
    let mut acc_o = 0u64;
    let mut acc_e = 0.0f64;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        acc_o += o;
        acc_e += p * total as f64;
        if acc_e >= 5.0 {
            cells.push((acc_o, acc_e));
            acc_o = 0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 || acc_o > 0 {
        if let Some(last) = cells.last_mut() {
            last.0 += acc_o;
            last.1 += acc_e;
        } else {
            cells.push((acc_o, acc_e));
        }
    }

    if cells.len() < 2 {
        return Ok(ChiSquareReport { statistic: 0.0, dof: 0, p_value: 1.0, bins: cells.len() });
    }
    let statistic: f64 = cells
        .iter()
        .map(|&(o, e)| {
            let diff = o as f64 - e;
            diff * diff / e
        })
        .sum();
    let dof = (cells.len() - 1) as u64;
    let dist = ChiSquared::new(dof as f64)
        .map_err(|e| Error::invalid(format!("chi-square dof {dof}: {e}")))?;
    let p_value = (1.0 - dist.cdf(statistic)).clamp(0.0, 1.0);
    Ok(ChiSquareReport { statistic, dof, p_value, bins: cells.len() })
}
