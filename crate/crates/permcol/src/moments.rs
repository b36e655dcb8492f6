use crate::error::{Error, Result};
use crate::numerics::{bisect, golden_section_max, log_sum_exp};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

/// Analytic-side parameters: color count and average degree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentParams {
    k: u32,
    d: f64,
}

impl MomentParams {
    pub fn new(k: u32, d: f64) -> Result<Self> {
        if k < 3 {
            return Err(Error::invalid(format!("second-moment analysis needs k >= 3, got {k}")));
        }
        if !d.is_finite() || d < 0.0 {
            return Err(Error::invalid(format!("average degree must be finite and >= 0, got {d}")));
        }
        Ok(MomentParams { k, d })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn d(&self) -> f64 {
        self.d
    }
}

fn check_unit_interval(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid(format!("{name}={x} outside [0, 1]")));
    }
    Ok(())
}

fn check_k(k: u32, min: u32) -> Result<()> {
    if k < min {
        return Err(Error::invalid(format!("k={k} below minimum {min}")));
    }
    Ok(())
}

/// Natural-log entropy h with the limit convention h(0) = h(1) = 0.
pub fn entropy(zeta: f64) -> Result<f64> {
    check_unit_interval("zeta", zeta)?;
    if zeta == 0.0 || zeta == 1.0 {
        return Ok(0.0);
    }
    Ok(-zeta * zeta.ln() - (1.0 - zeta) * (-zeta).ln_1p())
}

/// Probability that one uniformly decorated edge is satisfied by both of a
/// pair of colorings agreeing on a fraction zeta of the vertices:
/// p = zeta^2 (1-1/k) + 2 zeta (1-zeta)(1-2/k) + (1-zeta)^2 (1-2/k+1/(k(k-1))).
pub fn pair_prob(zeta: f64, k: u32) -> Result<f64> {
    check_unit_interval("zeta", zeta)?;
    check_k(k, 2)?;
    let kf = k as f64;
    let both = 1.0 - 2.0 / kf + 1.0 / (kf * (kf - 1.0));
    Ok(zeta * zeta * (1.0 - 1.0 / kf)
        + 2.0 * zeta * (1.0 - zeta) * (1.0 - 2.0 / kf)
        + (1.0 - zeta) * (1.0 - zeta) * both)
}

/// Excess of the pair probability over its independent baseline:
/// p(zeta)/(1-1/k)^2 = 1 + (k zeta - 1)^2 / (k-1)^3, exactly. Feeding the
/// right-hand fraction through ln_1p keeps the edge term of phi at machine
/// zero near zeta = 1/k instead of losing it to cancellation.
fn pair_excess(zeta: f64, k: u32) -> f64 {
    let kf = k as f64;
    let t = kf * zeta - 1.0;
    t * t / ((kf - 1.0) * (kf - 1.0) * (kf - 1.0))
}

/// Exponential rate of the overlap-zeta term of the second moment:
/// phi = h(zeta) + (1-zeta) ln(k-1) - ln k + (d/2) ln(p(zeta)/(1-1/k)^2).
/// phi(1/k) = 0; colorability needs phi < 0 away from 1/k.
pub fn phi(zeta: f64, p: &MomentParams) -> Result<f64> {
    let kf = p.k as f64;
    Ok(entropy(zeta)? + (1.0 - zeta) * (kf - 1.0).ln() - kf.ln()
        + 0.5 * p.d * pair_excess(zeta, p.k).ln_1p())
}

/// Quadratic overestimate of ln(1+x) used by the psi bound:
/// ell(x) = x - (x^2/2)(1 - 2/(3(k-1))); ell(x) >= ln(1+x) on (-1, 1/(k-1)].
pub fn ell(x: f64, k: u32) -> Result<f64> {
    check_k(k, 2)?;
    Ok(x - 0.5 * x * x * (1.0 - 2.0 / (3.0 * ((k as f64) - 1.0))))
}

/// Upper envelope of phi with the log replaced by ell; tight at zeta = 1/k.
pub fn psi(zeta: f64, p: &MomentParams) -> Result<f64> {
    let kf = p.k as f64;
    Ok(entropy(zeta)? + (1.0 - zeta) * (kf - 1.0).ln() - kf.ln()
        + 0.5 * p.d * ell(pair_excess(zeta, p.k), p.k)?)
}

/// Closed-form second derivative of psi at the center:
/// psi''(1/k) = k^2/(k-1)^3 (d - (k-1)^2), negative exactly when d < (k-1)^2.
pub fn psi_pp_center(p: &MomentParams) -> f64 {
    let kf = p.k as f64;
    let km1 = kf - 1.0;
    kf * kf / (km1 * km1 * km1) * (p.d - km1 * km1)
}

/// Closed-form fourth derivative of psi, negative on all of (0, 1):
/// -2 (1/zeta^3 + 1/(1-zeta)^3 + d k^4 (3k-5)/(k-1)^7).
/// Consequently psi has at most two local maxima.
pub fn psi_fourth(zeta: f64, p: &MomentParams) -> Result<f64> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::invalid(format!("zeta={zeta} outside (0, 1)")));
    }
    let kf = p.k as f64;
    let km1 = kf - 1.0;
    Ok(-2.0
        * (zeta.powi(-3)
            + (1.0 - zeta).powi(-3)
            + p.d * kf.powi(4) * (3.0 * kf - 5.0) / km1.powi(7)))
}

/// What a grid-plus-refinement scan of phi found.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanReport {
    pub k: u32,
    pub d: f64,
    pub grid_resolution: usize,
    /// Global maximizer over [0, 1] after refinement.
    pub zeta_max: f64,
    pub max_value: f64,
    /// All distinct local maxima, sorted by zeta.
    pub local_maxima: Vec<(f64, f64)>,
    /// Central finite difference of phi'' at zeta = 1/k.
    pub curvature_at_center: f64,
    /// True iff the global max sits at 1/k with |phi| below 1e-9, every
    /// other local max is below -1e-6, and the center curvature is negative.
    pub condition_holds: bool,
}

/// Absolute tolerance on |phi(zeta_max)| for the center to count as the
/// global maximum.
pub const SCAN_ZERO_TOL: f64 = 1e-9;
/// Any non-center local maximum must sit below this level.
pub const SCAN_NEG_TOL: f64 = -1e-6;
/// Positions closer than this are the same maximum.
const SCAN_POS_TOL: f64 = 1e-6;

/// Local maxima of f on [0, 1]: uniform grid, then golden-section refinement
/// in each bracket around a discrete peak, then merging of coincident
/// positions. Returns maxima sorted by position.
fn scan_local_maxima<F: Fn(f64) -> f64>(
    f: F,
    resolution: usize,
    refine_tol: f64,
) -> Vec<(f64, f64)> {
    let vals: Vec<f64> = (0..=resolution)
        .map(|i| f(i as f64 / resolution as f64))
        .collect();
    let mut candidates: Vec<usize> = Vec::new();
    for i in 0..=resolution {
        let left_ok = i == 0 || vals[i] >= vals[i - 1];
        let right_ok = i == resolution || vals[i] >= vals[i + 1];
        // Strict rise on at least one side keeps plateau interiors out while
        // still catching every peak cell.
        let strict = (i > 0 && vals[i] > vals[i - 1])
            || (i < resolution && vals[i] > vals[i + 1])
            || (i == 0 && resolution > 0 && vals[0] > vals[1])
            || (i == resolution && resolution > 0 && vals[resolution] > vals[resolution - 1]);
        if left_ok && right_ok && strict {
            candidates.push(i);
        }
    }
    if candidates.is_empty() {
        // Constant function: report the left endpoint.
        return vec![(0.0, vals[0])];
    }
    let mut refined: Vec<(f64, f64)> = candidates
        .iter()
        .map(|&i| {
            let lo = if i == 0 { 0.0 } else { (i - 1) as f64 / resolution as f64 };
            let hi = if i == resolution { 1.0 } else { (i + 1) as f64 / resolution as f64 };
            let (x, fx) = golden_section_max(&f, lo, hi, refine_tol);
            // Keep the grid point when refinement failed to improve on it
            // (possible right at interval ends).
            let gx = i as f64 / resolution as f64;
            if vals[i] > fx { (gx, vals[i]) } else { (x, fx) }
        })
        .collect();
    refined.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (x, fx) in refined {
        match merged.last_mut() {
            Some((px, pfx)) if (x - *px).abs() < SCAN_POS_TOL => {
                if fx > *pfx {
                    *px = x;
                    *pfx = fx;
                }
            }
            _ => merged.push((x, fx)),
        }
    }
    merged
}

/// Scans phi over [0, 1] and certifies the second-moment condition: the
/// global maximum is the centered zero at 1/k, everything else is strictly
/// below, and the center curvature is negative.
pub fn scan_second_moment(
    p: &MomentParams,
    resolution: usize,
    refine_tol: f64,
) -> Result<ScanReport> {
    if resolution < 1_000 {
        return Err(Error::invalid(format!("resolution {resolution} below 1000")));
    }
    if refine_tol <= 0.0 || !refine_tol.is_finite() {
        return Err(Error::invalid(format!("bad refinement tolerance {refine_tol}")));
    }
    let f = |z: f64| phi(z, p).expect("zeta stays in [0, 1]");
    let local_maxima = scan_local_maxima(f, resolution, refine_tol);
    let (zeta_max, max_value) = local_maxima
        .iter()
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one maximum");

    let center = 1.0 / p.k as f64;
    let h = (1e-4f64).min(0.5 * center).min(0.5 * (1.0 - center));
    let curvature_at_center = (f(center + h) - 2.0 * f(center) + f(center - h)) / (h * h);

    let center_is_global = (zeta_max - center).abs() < SCAN_POS_TOL && max_value.abs() < SCAN_ZERO_TOL;
    let others_negative = local_maxima
        .iter()
        .filter(|(z, _)| (z - center).abs() >= SCAN_POS_TOL)
        .all(|&(_, v)| v < SCAN_NEG_TOL);
    let condition_holds = center_is_global && others_negative && curvature_at_center < 0.0;

    Ok(ScanReport {
        k: p.k,
        d: p.d,
        grid_resolution: resolution,
        zeta_max,
        max_value,
        local_maxima,
        curvature_at_center,
        condition_holds,
    })
}

/// Degree above which the expected number of colorings vanishes:
/// 2 ln k / (-ln(1 - 1/k)). Always below 2k ln k - ln k.
pub fn first_moment_bound(k: u32) -> Result<f64> {
    check_k(k, 2)?;
    Ok(2.0 * (k as f64).ln() / -(-1.0 / k as f64).ln_1p())
}

/// Lower end of the asymptotic threshold window, 2k ln k - ln k - 2.
pub fn asymptotic_lower(k: u32) -> f64 {
    let kf = k as f64;
    2.0 * kf * kf.ln() - kf.ln() - 2.0
}

/// Upper end of the asymptotic threshold window, 2k ln k - ln k - 1.
pub fn asymptotic_upper(k: u32) -> f64 {
    let kf = k as f64;
    2.0 * kf * kf.ln() - kf.ln() - 1.0
}

fn big_binomial(n: u32, r: u32) -> BigInt {
    if r > n {
        return BigInt::from(0);
    }
    let r = r.min(n - r);
    let mut acc = BigInt::from(1);
    for i in 0..r {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Probability that tossing b balls into k-1 bins uniformly leaves exactly
/// c-1 bins empty, by inclusion-exclusion:
/// C(k-1, c-1) sum_j (-1)^j C(k-c, j) ((k-c-j)/(k-1))^b, exact.
pub fn exact_q(b: u32, k: u32, c: u32) -> Result<BigRational> {
    check_k(k, 2)?;
    if c < 1 || c > k {
        return Err(Error::invalid(format!("c={c} outside 1..={k}")));
    }
    if b == 0 {
        let hit = if c == k { 1 } else { 0 };
        return Ok(BigRational::from_integer(hit.into()));
    }
    let mut sum = BigRational::from_integer(0.into());
    for j in 0..=(k - c) {
        let occupied = k - c - j; // bins allowed to receive balls
        let frac = BigRational::new(BigInt::from(occupied), BigInt::from(k - 1));
        let mut term = BigRational::from_integer(big_binomial(k - c, j)) * frac.pow(b as i32);
        if j % 2 == 1 {
            term = -term;
        }
        sum += term;
    }
    Ok(BigRational::from_integer(big_binomial(k - 1, c - 1)) * sum)
}

/// The whole row Q(b, k, .) for c = 1..=k.
pub fn exact_q_row(b: u32, k: u32) -> Result<Vec<BigRational>> {
    (1..=k).map(|c| exact_q(b, k, c)).collect()
}

/// Expected reciprocal of the available-color count when each of the k-1
/// non-self colors is forbidden independently with probability 1-r:
/// sum_c (1/c) C(k-1, c-1) r^{c-1} (1-r)^{k-c} = (1 - (1-r)^k) / (k r).
pub fn poissonized_inverse_mean(k: u32, r: f64) -> Result<f64> {
    check_k(k, 1)?;
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::invalid(format!("r={r} outside (0, 1]; the r -> 0 limit is 1")));
    }
    Ok((1.0 - (1.0 - r).powi(k as i32)) / (k as f64 * r))
}

/// Exponential rate of the expected cluster-weighted count:
/// f(d) = (d/2) ln(1-1/k) + d/(k-1) + ln(1 - (1 - e^{-d/(k-1)})^k).
/// f(0) = 0, and the weighted first-moment bound is its positive root.
pub fn f_rate(d: f64, k: u32) -> Result<f64> {
    check_k(k, 2)?;
    if !d.is_finite() || d < 0.0 {
        return Err(Error::invalid(format!("degree d={d} must be finite and >= 0")));
    }
    let kf = k as f64;
    let x = d / (kf - 1.0);
    // (1 - e^{-x})^k through logs; at x = 0 the IEEE chain
    // ln_1p(-1) = -inf, exp(k * -inf) = 0 gives the right limit.
    let ln_base = (-(-x).exp()).ln_1p();
    let q = (kf * ln_base).exp();
    Ok(0.5 * d * (-1.0 / kf).ln_1p() + x + (-q).ln_1p())
}

/// Positive root of f_rate, bracketed inside [k ln k, 3k ln k] (the bracket
/// excludes the trivial root at 0). Expands the right end a few times before
/// giving up if the sign change is missing.
pub fn improved_upper_bound(k: u32, tolerance: f64) -> Result<f64> {
    check_k(k, 3)?;
    if tolerance <= 0.0 || !tolerance.is_finite() {
        return Err(Error::invalid(format!("bad tolerance {tolerance}")));
    }
    let kf = k as f64;
    let lo = kf * kf.ln();
    let mut hi = 3.0 * kf * kf.ln();
    let f = |d: f64| f_rate(d, k).expect("bracket stays nonnegative");
    let mut expansions = 0;
    while f(lo).signum() == f(hi).signum() && expansions < 6 {
        hi *= 1.5;
        expansions += 1;
    }
    bisect(f, lo, hi, tolerance)
}

/// ln E[X] = n ln k + m ln(1 - 1/k) for the count of permuted colorings.
pub fn expected_x_log(n: u64, m: u64, k: u32) -> Result<f64> {
    check_k(k, 2)?;
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    Ok(n as f64 * (k as f64).ln() + m as f64 * (-1.0 / k as f64).ln_1p())
}

/// ln E[X^2] = n ln k + ln sum_z C(n,z) (k-1)^{n-z} p(z/n)^m, evaluated in
/// log space with log-sum-exp; exact for the with-replacement model.
pub fn expected_x2_log(n: u64, m: u64, k: u32) -> Result<f64> {
    check_k(k, 2)?;
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    let kf = k as f64;
    let mut terms = Vec::with_capacity(n as usize + 1);
    let mut ln_binom = 0.0f64; // ln C(n, z), updated incrementally
    for z in 0..=n {
        if z > 0 {
            ln_binom += ((n - z + 1) as f64).ln() - (z as f64).ln();
        }
        let p = pair_prob(z as f64 / n as f64, k)?;
        terms.push(ln_binom + (n - z) as f64 * (kf - 1.0).ln() + m as f64 * p.ln());
    }
    Ok(n as f64 * kf.ln() + log_sum_exp(&terms))
}

/// One row of the bounds table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsRow {
    pub k: u32,
    pub fm_upper: f64,
    pub improved_upper: f64,
    pub asym_lower: f64,
    pub asym_upper: f64,
}

pub fn bounds_row(k: u32, tolerance: f64) -> Result<BoundsRow> {
    Ok(BoundsRow {
        k,
        fm_upper: first_moment_bound(k)?,
        improved_upper: improved_upper_bound(k, tolerance)?,
        asym_lower: asymptotic_lower(k),
        asym_upper: asymptotic_upper(k),
    })
}

pub fn bounds_table(k_min: u32, k_max: u32, tolerance: f64) -> Result<Vec<BoundsRow>> {
    if k_min < 3 || k_max < k_min {
        return Err(Error::invalid(format!("bad k range {k_min}..={k_max}")));
    }
    (k_min..=k_max).map(|k| bounds_row(k, tolerance)).collect()
}

/// Smallest k in [3, k_max] from which the second-moment condition holds at
/// d = 2k ln k - ln k - 2 - eps for every k up to k_max; None if no such
/// point. The asymptotic statement leaves the onset unspecified, so it is
/// measured rather than assumed.
pub fn smallest_k_condition(eps: f64, k_max: u32, resolution: usize) -> Result<Option<u32>> {
    use rayon::prelude::*;
    if eps <= 0.0 || !eps.is_finite() {
        return Err(Error::invalid(format!("bad eps {eps}")));
    }
    let holds: Vec<bool> = (3..=k_max)
        .into_par_iter()
        .map(|k| {
            let d = (asymptotic_lower(k) - eps).max(0.0);
            let p = MomentParams::new(k, d)?;
            Ok(scan_second_moment(&p, resolution, 1e-10)?.condition_holds)
        })
        .collect::<Result<_>>()?;
    // Last run of consecutive true values reaching k_max.
    let mut k0 = None;
    for (i, &h) in holds.iter().enumerate() {
        if h {
            if k0.is_none() {
                k0 = Some(3 + i as u32);
            }
        } else {
            k0 = None;
        }
    }
    Ok(k0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use num_traits::{One, ToPrimitive, Zero};

    fn params(k: u32, d: f64) -> MomentParams {
        MomentParams::new(k, d).unwrap()
    }

    #[test]
    fn entropy_values() {
        assert_eq!(entropy(0.0).unwrap(), 0.0);
        assert_eq!(entropy(1.0).unwrap(), 0.0);
        assert_relative_eq!(entropy(0.5).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(entropy(0.25).unwrap(), 0.5623351446188083, epsilon = 1e-14);
        assert!(entropy(-0.1).is_err());
        assert!(entropy(1.1).is_err());
    }

    #[test]
    fn pair_prob_values() {
        for k in [2u32, 3, 5, 17] {
            let kf = k as f64;
            assert_relative_eq!(
                pair_prob(1.0 / kf, k).unwrap(),
                (1.0 - 1.0 / kf) * (1.0 - 1.0 / kf),
                epsilon = 1e-15
            );
            assert_relative_eq!(pair_prob(1.0, k).unwrap(), 1.0 - 1.0 / kf, epsilon = 1e-15);
        }
        assert_relative_eq!(pair_prob(0.0, 3).unwrap(), 0.5, epsilon = 1e-15);
        assert!(pair_prob(0.5, 1).is_err());
    }

    #[test]
    fn pair_excess_identity_matches_direct_ratio() {
        // p(zeta)/(1-1/k)^2 - 1 == (k zeta - 1)^2/(k-1)^3 on a dense grid.
        for k in [3u32, 4, 7, 20, 100] {
            let kf = k as f64;
            let base = (1.0 - 1.0 / kf) * (1.0 - 1.0 / kf);
            for i in 0..=500 {
                let z = i as f64 / 500.0;
                let direct = pair_prob(z, k).unwrap() / base - 1.0;
                assert_relative_eq!(pair_excess(z, k), direct, epsilon = 1e-10, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn phi_fixed_values() {
        let p = params(3, 4.0);
        // The entropy and linear terms cancel at the center only up to one
        // ulp; the edge term is held at machine zero by pair_excess.
        assert_abs_diff_eq!(phi(1.0 / 3.0, &p).unwrap(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(phi(1.0, &p).unwrap(), -0.2876820724517809, epsilon = 1e-12);
        assert_relative_eq!(phi(0.0, &p).unwrap(), -0.16989903679539747, epsilon = 1e-12);
        for k in [4u32, 9, 50] {
            let p = params(k, 3.7);
            assert_abs_diff_eq!(phi(1.0 / k as f64, &p).unwrap(), 0.0, epsilon = 1e-15);
        }
        assert!(phi(1.5, &p).is_err());
    }

    #[test]
    fn ell_values_and_log_bound() {
        assert_eq!(ell(0.0, 5).unwrap(), 0.0);
        assert_relative_eq!(ell(0.1, 4).unwrap(), 0.09611111111111112, epsilon = 1e-15);
        // ell dominates ln(1+x) up to the domain edge x = 1/(k-1).
        for k in [2u32, 3, 10, 40] {
            let edge = 1.0 / (k as f64 - 1.0);
            for i in 1..=200 {
                let x = -0.9 + (edge + 0.9) * i as f64 / 200.0;
                assert!(
                    ell(x, k).unwrap() >= x.ln_1p() - 1e-15,
                    "k={k} x={x}"
                );
            }
        }
    }

    #[test]
    fn psi_center_derivatives() {
        assert_eq!(psi_pp_center(&params(3, 4.0)), 0.0);
        assert_eq!(psi_pp_center(&params(3, 5.0)), 1.125);
        // Finite differences of psi reproduce the closed form.
        for (k, d) in [(3u32, 1.0), (5, 9.0), (10, 40.0), (20, 114.0), (40, 250.0)] {
            let p = params(k, d);
            let z = 1.0 / k as f64;
            let h = 3e-5;
            let fd = (psi(z + h, &p).unwrap() - 2.0 * psi(z, &p).unwrap()
                + psi(z - h, &p).unwrap())
                / (h * h);
            assert_relative_eq!(fd, psi_pp_center(&p), max_relative = 1e-6);
        }
    }

    #[test]
    fn psi_dominates_phi_on_grid() {
        // psi >= phi with equality only at the center, over the test matrix.
        for k in 3u32..=40 {
            let fm = first_moment_bound(k).unwrap();
            let mut d = 1.0;
            while d <= fm {
                let p = params(k, d);
                let center = 1.0 / k as f64;
                for i in 0..=400 {
                    let z = i as f64 / 400.0;
                    let gap = psi(z, &p).unwrap() - phi(z, &p).unwrap();
                    assert!(gap >= -1e-12, "k={k} d={d} z={z} gap={gap}");
                    if (z - center).abs() > 1e-3 {
                        assert!(gap > 0.0, "k={k} d={d} z={z}");
                    }
                }
                let center_gap = psi(center, &p).unwrap() - phi(center, &p).unwrap();
                assert!(center_gap.abs() < 1e-12);
                d += (fm - 1.0).max(1.0) / 6.0;
            }
        }
    }

    #[test]
    fn psi_fourth_always_negative() {
        for k in [2u32, 3, 5, 20, 200] {
            for d in [0.0, 0.5, 5.0, 100.0] {
                let p = MomentParams::new(k.max(3), d).unwrap();
                for i in 1..500 {
                    let z = i as f64 / 500.0;
                    assert!(psi_fourth(z, &p).unwrap() < 0.0, "k={k} d={d} z={z}");
                }
            }
        }
        assert!(psi_fourth(0.0, &params(3, 1.0)).is_err());
    }

    #[test]
    fn psi_has_at_most_two_local_maxima() {
        // Direct consequence of the negative fourth derivative; checked with
        // the same scan machinery phi uses.
        for (k, d) in [(3u32, 2.0), (20, 114.0), (20, 125.0), (7, 30.0), (40, 100.0)] {
            let p = params(k, d);
            let maxima = scan_local_maxima(|z| psi(z, &p).unwrap(), 20_000, 1e-10);
            assert!(maxima.len() <= 2, "k={k} d={d} maxima={maxima:?}");
        }
    }

    #[test]
    fn scan_certifies_k20_below_threshold() {
        let k = 20u32;
        let d = asymptotic_lower(k) - 0.1;
        let rep = scan_second_moment(&params(k, d), 100_000, 1e-10).unwrap();
        assert!(rep.condition_holds, "{rep:?}");
        assert!((rep.zeta_max - 0.05).abs() < 1e-6);
        assert!(rep.max_value.abs() < 1e-9);
        assert!(rep.curvature_at_center < 0.0);

        // Doubling the resolution must not flip the verdict.
        let rep2 = scan_second_moment(&params(k, d), 200_000, 1e-10).unwrap();
        assert_eq!(rep.condition_holds, rep2.condition_holds);
    }

    #[test]
    fn scan_rejects_k20_above_first_moment_bound() {
        let k = 20u32;
        let d = first_moment_bound(k).unwrap() + 5.0;
        let rep = scan_second_moment(&params(k, d), 100_000, 1e-10).unwrap();
        assert!(!rep.condition_holds, "{rep:?}");
        // The dominant maximum has moved near 1 - a/k for small a.
        assert!(rep.zeta_max > 0.9, "{rep:?}");
        assert!(rep.max_value > 0.0);
        let rep2 = scan_second_moment(&params(k, d), 200_000, 1e-10).unwrap();
        assert_eq!(rep.condition_holds, rep2.condition_holds);
    }

    #[test]
    fn scan_with_no_edges_maximizes_entropy_at_center() {
        let rep = scan_second_moment(&params(7, 0.0), 10_000, 1e-10).unwrap();
        assert!(rep.condition_holds, "{rep:?}");
        assert!((rep.zeta_max - 1.0 / 7.0).abs() < 1e-6);
        assert!(scan_second_moment(&params(7, 0.0), 10, 1e-10).is_err());
    }

    #[test]
    fn first_moment_bound_values() {
        assert_relative_eq!(first_moment_bound(2).unwrap(), 2.0, epsilon = 1e-15);
        assert_relative_eq!(first_moment_bound(3).unwrap(), 5.41902258270291, epsilon = 1e-12);
        // Approaches 2k ln k - ln k from below, within 1 at k = 1000.
        let fm = first_moment_bound(1000).unwrap();
        let asym = 2.0 * 1000.0 * 1000f64.ln() - 1000f64.ln();
        assert!(fm < asym && asym - fm < 1.0, "fm={fm} asym={asym}");
        assert!(first_moment_bound(1).is_err());
    }

    #[test]
    fn exact_q_small_cases() {
        let half = BigRational::new(1.into(), 2.into());
        assert_eq!(exact_q(2, 3, 1).unwrap(), half);
        assert_eq!(exact_q(2, 3, 2).unwrap(), half);
        assert!(exact_q(2, 3, 3).unwrap().is_zero());

        // b=0: all bins empty. b=1: exactly one occupied.
        for k in [2u32, 5, 9] {
            assert!(exact_q(0, k, k).unwrap().is_one());
            assert!(exact_q(1, k, k - 1).unwrap().is_one());
        }

        let row = exact_q_row(4, 5).unwrap();
        let expect = [(3i64, 32i64), (9, 16), (21, 64), (1, 64), (0, 1)];
        for (q, (n, d)) in row.iter().zip(expect) {
            assert_eq!(*q, BigRational::new(n.into(), d.into()));
        }
        assert!(exact_q(1, 5, 0).is_err());
        assert!(exact_q(1, 5, 6).is_err());
    }

    #[test]
    fn exact_q_rows_sum_to_one() {
        for k in 2u32..=30 {
            for b in 0u32..=30 {
                let sum: BigRational = exact_q_row(b, k).unwrap().into_iter().sum();
                assert!(sum.is_one(), "k={k} b={b} sum={sum}");
            }
        }
    }

    #[test]
    fn exact_q_matches_brute_force_placements() {
        // Direct enumeration over all (k-1)^b placements.
        for (b, k) in [(2u32, 3u32), (3, 4), (4, 5), (5, 3)] {
            let bins = (k - 1) as usize;
            let total = bins.pow(b);
            let mut counts = vec![0u64; k as usize + 1];
            for code in 0..total {
                let mut x = code;
                let mut occupied = vec![false; bins];
                for _ in 0..b {
                    occupied[x % bins] = true;
                    x /= bins;
                }
                let empty = occupied.iter().filter(|&&o| !o).count();
                counts[empty + 1] += 1;
            }
            for c in 1..=k {
                let brute = BigRational::new(
                    BigInt::from(counts[c as usize]),
                    BigInt::from(total as u64),
                );
                assert_eq!(exact_q(b, k, c).unwrap(), brute, "b={b} k={k} c={c}");
            }
        }
    }

    #[test]
    fn poissonized_identity() {
        assert_relative_eq!(poissonized_inverse_mean(4, 1.0).unwrap(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(poissonized_inverse_mean(2, 0.5).unwrap(), 0.75, epsilon = 1e-15);
        assert!(poissonized_inverse_mean(4, 0.0).is_err());
        assert!(poissonized_inverse_mean(4, 1.5).is_err());

        // Closed form equals the explicit binomial sum.
        let mut rng = crate::rng::seed_rng(23);
        use rand::RngExt;
        for _ in 0..1000 {
            let k = rng.random_range(1u32..=40);
            let r: f64 = rng.random_range(1e-6..=1.0);
            let direct: f64 = (1..=k)
                .map(|c| {
                    let binom = big_binomial(k - 1, c - 1).to_f64().unwrap();
                    binom * r.powi(c as i32 - 1) * (1.0 - r).powi((k - c) as i32) / c as f64
                })
                .sum();
            assert_relative_eq!(
                poissonized_inverse_mean(k, r).unwrap(),
                direct,
                epsilon = 1e-12,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn f_rate_values_and_signs() {
        for k in [2u32, 3, 50, 200] {
            assert_eq!(f_rate(0.0, k).unwrap(), 0.0);
        }
        // Sign flips across the asymptotic upper bound.
        for k in [50u32, 100, 200] {
            let edge = asymptotic_upper(k);
            assert!(f_rate(edge + 0.1, k).unwrap() < 0.0, "k={k}");
            assert!(f_rate(edge - 0.1, k).unwrap() > 0.0, "k={k}");
        }
        assert!(f_rate(asymptotic_upper(100) + 0.5, 100).unwrap() < 0.0);
        assert!(f_rate(-1.0, 4).is_err());
    }

    #[test]
    fn improved_upper_bound_values() {
        let root = improved_upper_bound(3, 1e-9).unwrap();
        assert!((root - 5.011).abs() < 0.005, "root={root}");
        assert_relative_eq!(root, 5.010846410552879, epsilon = 1e-8);
        assert!(root < first_moment_bound(3).unwrap());
        // Large k: within 0.1 of the asymptote.
        let root = improved_upper_bound(1000, 1e-9).unwrap();
        assert!((root - asymptotic_upper(1000)).abs() < 0.1, "root={root}");
        assert!(improved_upper_bound(2, 1e-9).is_err());
    }

    #[test]
    fn bounds_rows_are_ordered() {
        for row in bounds_table(3, 60, 1e-9).unwrap() {
            assert!(row.improved_upper < row.fm_upper, "k={}", row.k);
            let plain_fm = 2.0 * (row.k as f64) * (row.k as f64).ln() - (row.k as f64).ln();
            assert!(row.fm_upper < plain_fm, "k={}", row.k);
            assert!(row.asym_lower < row.asym_upper);
        }
        assert!(bounds_table(2, 5, 1e-9).is_err());
        assert!(bounds_table(5, 4, 1e-9).is_err());
    }

    #[test]
    fn expected_x_log_values() {
        assert_relative_eq!(expected_x_log(1, 0, 5).unwrap(), 5f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(
            expected_x_log(5, 6, 3).unwrap(),
            (64.0f64 / 3.0).ln(),
            epsilon = 1e-12
        );
        // Above the first-moment bound the per-vertex rate is negative.
        let k = 7u32;
        let d = first_moment_bound(k).unwrap() + 0.3;
        let rate = (k as f64).ln() + d / 2.0 * (-1.0 / k as f64).ln_1p();
        assert!(rate < 0.0);
        assert!(expected_x_log(0, 0, 3).is_err());
    }

    #[test]
    fn expected_x2_log_values() {
        assert_relative_eq!(
            expected_x2_log(1, 0, 4).unwrap(),
            16f64.ln(),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            expected_x2_log(7, 0, 4).unwrap(),
            14.0 * 4f64.ln(),
            epsilon = 1e-12
        );
        // Frozen high-precision value for (n, m, k) = (4, 3, 3); the
        // acceptance suite re-derives it by brute-force pair enumeration.
        assert_relative_eq!(
            expected_x2_log(4, 3, 3).unwrap(),
            6.555725292226148,
            epsilon = 1e-12
        );
    }

    #[test]
    fn second_moment_dominates_squared_first() {
        for n in 1u64..=8 {
            for m in [0u64, 1, 3, 7, 12] {
                for k in [2u32, 3, 5] {
                    let x2 = expected_x2_log(n, m, k).unwrap();
                    let x = expected_x_log(n, m, k).unwrap();
                    assert!(x2 >= 2.0 * x - 1e-10, "n={n} m={m} k={k}");
                }
            }
        }
    }

    #[test]
    fn condition_onset_is_low() {
        // With eps = 1.0 the certificate already holds from small k; spot
        // scan at modest resolution for speed.
        let k0 = smallest_k_condition(1.0, 40, 20_000).unwrap();
        assert_eq!(k0, Some(3));
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Entropy is symmetric and maximal at 1/2.
            #[test]
            fn entropy_symmetric(z in 0.0f64..=1.0) {
                let a = entropy(z).unwrap();
                let b = entropy(1.0 - z).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!(a <= 2f64.ln() + 1e-15);
            }

            // pair_prob stays inside (0, 1) and phi stays finite.
            #[test]
            fn pair_prob_in_unit(z in 0.0f64..=1.0, k in 2u32..=64) {
                let p = pair_prob(z, k).unwrap();
                prop_assert!(p > 0.0 && p < 1.0);
            }

            #[test]
            fn phi_finite_and_dominated(z in 0.0f64..=1.0, k in 3u32..=40, d in 0.0f64..=20.0) {
                let p = MomentParams::new(k, d).unwrap();
                let v = phi(z, &p).unwrap();
                prop_assert!(v.is_finite());
                prop_assert!(v <= psi(z, &p).unwrap() + 1e-12);
            }

            // Q rows are distributions for arbitrary (b, k).
            #[test]
            fn q_row_is_distribution(b in 0u32..=40, k in 2u32..=25) {
                let row = exact_q_row(b, k).unwrap();
                let sum: BigRational = row.iter().cloned().sum();
                prop_assert!(sum.is_one());
                prop_assert!(row.iter().all(|q| *q >= BigRational::from_integer(0.into())));
            }
        }
    }
}
