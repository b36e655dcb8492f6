//! Seeded Monte Carlo harness tying the sampler, the exact solver, and the
//! closed-form moment formulas together: colorability curves, threshold
//! bisection, moment cross-checks, and empirical verification of the
//! distributional lemmas behind the weighted first moment.
//!
//! Determinism contract: trial t draws from `trial_rng(master_seed, t)` and
//! aggregation is exact (integer or rational) and associative, so every
//! estimator returns bit-identical results for any thread count or
//! scheduling order.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};

use crate::error::{Error, Result};
use crate::graph::{sample_graph, DecoratedEdge, DecoratedGraph, ModelParams};
use crate::moments;
use crate::perm::{Permutation, MAX_COLORS};
use crate::rng::{derive_seed, trial_rng};
use crate::solver::{self, Coloring, Status};
use crate::stats::{self, ChiSquareReport, Z_95};

/// Per-trial search budget (partial assignments tried). A trial that hits it
/// is flagged and excluded from the estimate, never guessed.
pub const TRIAL_BUDGET: u64 = 10_000_000;

/// One Monte Carlo experiment: a model point, a trial count, and the master
/// seed all trial streams derive from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub params: ModelParams,
    pub trials: u64,
    pub master_seed: u64,
}

impl TrialSpec {
    pub fn new(params: ModelParams, trials: u64, master_seed: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::invalid("trial count must be at least 1"));
        }
        Ok(TrialSpec { params, trials, master_seed })
    }
}

/// A sample mean with its standard error and an optional exact reference
/// value for the same quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
    pub reference: Option<f64>,
}

/// Fraction of sampled instances that admit a permuted coloring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorabilityReport {
    /// Trials requested.
    pub trials: u64,
    /// Trials that exhausted the search budget; excluded from the estimate.
    pub excluded: u64,
    pub colorable: u64,
    /// colorable / (trials - excluded).
    pub p_hat: f64,
    /// Wilson 95% interval for p_hat.
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl ColorabilityReport {
    pub fn estimate(&self) -> Estimate {
        let n = (self.trials - self.excluded) as f64;
        Estimate {
            mean: self.p_hat,
            stderr: (self.p_hat * (1.0 - self.p_hat) / n).sqrt(),
            trials: self.trials - self.excluded,
            reference: None,
        }
    }
}

/// Estimates Pr[a sampled instance is colorable] by exact decision per trial.
pub fn mc_colorable(spec: &TrialSpec) -> Result<ColorabilityReport> {
    let (colorable, excluded) = (0..spec.trials)
        .into_par_iter()
        .map(|t| -> Result<(u64, u64)> {
            let mut rng = trial_rng(spec.master_seed, t);
            let g = sample_graph(&spec.params, &mut rng);
            match solver::decide(&g, Some(TRIAL_BUDGET)) {
                Ok(r) => Ok((u64::from(r.status == Status::Colorable), 0)),
                Err(Error::BudgetExhausted { .. }) => Ok((0, 1)),
                Err(e) => Err(e),
            }
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let included = spec.trials - excluded;
    if included == 0 {
        return Err(Error::invalid("every trial exhausted the search budget"));
    }
    let p_hat = colorable as f64 / included as f64;
    let (ci_lo, ci_hi) = stats::wilson_interval(colorable, included, Z_95)?;
    Ok(ColorabilityReport {
        trials: spec.trials,
        excluded,
        colorable,
        p_hat,
        ci_lo,
        ci_hi,
    })
}

/// Sample moments of the coloring count X and the weighted count Z, with the
/// closed-form references for E[X] and E[X^2] attached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub x: Estimate,
    pub x2: Estimate,
    pub z: Estimate,
    /// Trials where the exact identity colorable <=> X >= 1 <=> Z >= 1 failed
    /// (always 0 unless the solver is broken).
    pub identity_violations: u64,
}

struct MomentSums {
    x1: BigUint,
    x2: BigUint,
    x4: BigUint,
    z1: BigRational,
    z2: BigRational,
    violations: u64,
}

impl MomentSums {
    fn zero() -> Self {
        MomentSums {
            x1: BigUint::zero(),
            x2: BigUint::zero(),
            x4: BigUint::zero(),
            z1: BigRational::zero(),
            z2: BigRational::zero(),
            violations: 0,
        }
    }

    fn merge(a: Self, b: Self) -> Self {
        MomentSums {
            x1: a.x1 + b.x1,
            x2: a.x2 + b.x2,
            x4: a.x4 + b.x4,
            z1: a.z1 + b.z1,
            z2: a.z2 + b.z2,
            violations: a.violations + b.violations,
        }
    }
}

/// Per-trial exact X (coloring count), X^2, X^4, Z, Z^2, averaged over
/// sampled instances. Moment sums are exact integers and rationals, so the
/// result does not depend on summation order.
pub fn mc_moments(spec: &TrialSpec) -> Result<MomentReport> {
    let p = spec.params;
    let sums = (0..spec.trials)
        .into_par_iter()
        .map(|t| -> Result<MomentSums> {
            let mut rng = trial_rng(spec.master_seed, t);
            let g = sample_graph(&p, &mut rng);
            let x = solver::count_colorings(&g)?;
            let z = solver::z_weight(&g)?;
            let decided = solver::decide(&g, None)?;
            let colorable = decided.status == Status::Colorable;
            let identity_ok =
                colorable == (x >= BigUint::one()) && colorable == (z >= BigRational::one());
            let x2 = &x * &x;
            Ok(MomentSums {
                x4: &x2 * &x2,
                z2: &z * &z,
                x1: x,
                x2,
                z1: z,
                violations: u64::from(!identity_ok),
            })
        })
        .try_reduce(MomentSums::zero, |a, b| Ok(MomentSums::merge(a, b)))?;

    let trials = spec.trials;
    let to_f = |b: &BigUint| b.to_f64().expect("within counting cap");
    let (x_mean, x_err) = stats::mean_stderr_from_sums(to_f(&sums.x1), to_f(&sums.x2), trials);
    let (x2_mean, x2_err) = stats::mean_stderr_from_sums(to_f(&sums.x2), to_f(&sums.x4), trials);
    let (z_mean, z_err) = stats::mean_stderr_from_sums(
        sums.z1.to_f64().expect("bounded by X"),
        sums.z2.to_f64().expect("bounded by X^2"),
        trials,
    );
    let x_ref = moments::expected_x_log(p.n as u64, p.m as u64, p.k as u32)?.exp();
    let x2_ref = moments::expected_x2_log(p.n as u64, p.m as u64, p.k as u32)?.exp();
    Ok(MomentReport {
        x: Estimate { mean: x_mean, stderr: x_err, trials, reference: Some(x_ref) },
        x2: Estimate { mean: x2_mean, stderr: x2_err, trials, reference: Some(x2_ref) },
        z: Estimate { mean: z_mean, stderr: z_err, trials, reference: None },
        identity_violations: sums.violations,
    })
}

/// One evaluated point on a colorability curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Average degree 2m/n actually realized by the integer edge count.
    pub d: f64,
    pub m: usize,
    pub trials: u64,
    pub excluded: u64,
    pub colorable: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Finite-size threshold estimate: where the colorability curve crosses the
/// target probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub n: usize,
    pub k: usize,
    pub target: f64,
    pub d_hat: f64,
    /// Degrees bracketing the crossing, lo anchored at m = 0 initially.
    pub bracket: (f64, f64),
    /// Every point evaluated during bisection, ascending in d.
    pub curve: Vec<CurvePoint>,
    /// Statistically significant non-monotonicity, reported not fatal.
    pub warnings: Vec<String>,
}

fn eval_curve_point(
    n: usize,
    k: usize,
    m: usize,
    trials: u64,
    seed: u64,
) -> Result<CurvePoint> {
    let point_seed = derive_seed(seed, m as u64);
    let params = ModelParams::new(n, m, k, point_seed)?;
    let spec = TrialSpec::new(params, trials, point_seed)?;
    let r = mc_colorable(&spec)?;
    Ok(CurvePoint {
        d: params.d(),
        m,
        trials: r.trials,
        excluded: r.excluded,
        colorable: r.colorable,
        p_hat: r.p_hat,
        ci_lo: r.ci_lo,
        ci_hi: r.ci_hi,
    })
}

/// Bisects on the edge count m (d = 2m/n moves in steps of 2/n) until the
/// Wilson interval at the midpoint contains the target (the crossing is
/// found) or adjacent edge counts bracket it (resolution exhausted). Each
/// curve point gets its own seed derived from (seed, m), so the curve is
/// reproducible point by point.
pub fn threshold_bisect(
    n: usize,
    k: usize,
    trials_per_point: u64,
    target: f64,
    seed: u64,
) -> Result<ThresholdReport> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid(format!("target {target} outside (0, 1)")));
    }
    let mut cache: BTreeMap<usize, CurvePoint> = BTreeMap::new();
    let eval = |m: usize, cache: &mut BTreeMap<usize, CurvePoint>| -> Result<CurvePoint> {
        if let Some(pt) = cache.get(&m) {
            return Ok(*pt);
        }
        let pt = eval_curve_point(n, k, m, trials_per_point, seed)?;
        cache.insert(m, pt);
        Ok(pt)
    };

    // The empty graph anchors the low end at probability exactly 1.
    let mut lo_m = 0usize;
    eval(lo_m, &mut cache)?;
    // First moment bound: above it colorability dies, so it seeds the high
    // end; doubling covers finite-size spillover.
    let mut hi_m = ModelParams::m_for_degree(n, moments::first_moment_bound(k as u32)?).max(1);
    let mut expansions = 0;
    while eval(hi_m, &mut cache)?.ci_hi >= target {
        hi_m *= 2;
        expansions += 1;
        if expansions > 8 {
            return Err(Error::NoSignChange {
                lo: 0.0,
                hi: 2.0 * hi_m as f64 / n as f64,
            });
        }
    }

    let d_of = |m: usize| 2.0 * m as f64 / n as f64;
    let mut d_hat = None;
    while hi_m - lo_m > 1 {
        let mid = usize::midpoint(lo_m, hi_m);
        let pt = eval(mid, &mut cache)?;
        if pt.ci_lo > target {
            lo_m = mid;
        } else if pt.ci_hi < target {
            hi_m = mid;
        } else {
            // The interval straddles the target: mid is the crossing at this
            // trial budget.
            d_hat = Some(pt.d);
            break;
        }
    }
    let d_hat = d_hat.unwrap_or_else(|| (d_of(lo_m) + d_of(hi_m)) / 2.0);

    let curve: Vec<CurvePoint> = cache.into_values().collect();
    let mut warnings = Vec::new();
    for w in curve.windows(2) {
        // Significant rise with d: the intervals separate the wrong way.
        if w[1].p_hat > w[0].p_hat && w[1].ci_lo > w[0].ci_hi {
            warnings.push(format!(
                "colorability rose from {:.4} at d={:.3} to {:.4} at d={:.3} beyond interval overlap",
                w[0].p_hat, w[0].d, w[1].p_hat, w[1].d
            ));
        }
    }
    Ok(ThresholdReport {
        n,
        k,
        target,
        d_hat,
        bracket: (d_of(lo_m), d_of(hi_m)),
        curve,
        warnings,
    })
}

/// Empirical distribution of the available-color count at a star center
/// against the exact occupancy law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailableColorsReport {
    pub k: usize,
    pub deg: usize,
    pub trials: u64,
    /// Counts of c = 1..=k at index c-1.
    pub observed: Vec<u64>,
    /// Exact reference probabilities for the same support.
    pub expected: Vec<f64>,
    /// Total variation distance between observed frequencies and reference.
    pub tv: f64,
    /// Total variation distance between the histograms conditioned on two
    /// different center colors; the law must not depend on the coloring.
    pub split_tv: f64,
}

fn check_stat_preconditions(k: usize, trials: u64) -> Result<()> {
    if !(2..=MAX_COLORS).contains(&k) {
        return Err(Error::invalid(format!("k={k} outside supported 2..={MAX_COLORS}")));
    }
    if trials < 10_000 {
        return Err(Error::invalid("distributional checks need at least 10^4 trials"));
    }
    Ok(())
}

/// Samples decorated stars with `deg` leaves plus a uniform proper coloring
/// (center first, then each leaf uniformly off its one forbidden color; leaf
/// counts do not depend on the center color, so this two-stage draw is the
/// uniform distribution). Histograms the center's available-color count.
pub fn check_available_colors(
    k: usize,
    deg: usize,
    trials: u64,
    seed: u64,
) -> Result<AvailableColorsReport> {
    check_stat_preconditions(k, trials)?;
    if k > solver::MAX_SOLVER_COLORS {
        return Err(Error::invalid(format!(
            "available-color counting supports k <= {}",
            solver::MAX_SOLVER_COLORS
        )));
    }
    struct Hist {
        total: Vec<u64>,
        // Conditioned on the center color being 0, resp. 1.
        c0: Vec<u64>,
        c1: Vec<u64>,
    }
    let zero = || Hist {
        total: vec![0; k],
        c0: vec![0; k],
        c1: vec![0; k],
    };
    let merge = |mut a: Hist, b: Hist| {
        for (x, y) in a.total.iter_mut().zip(&b.total) {
            *x += y;
        }
        for (x, y) in a.c0.iter_mut().zip(&b.c0) {
            *x += y;
        }
        for (x, y) in a.c1.iter_mut().zip(&b.c1) {
            *x += y;
        }
        a
    };
    let hist = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Hist> {
            let mut rng = trial_rng(seed, t);
            let edges: Vec<DecoratedEdge> = (0..deg)
                .map(|i| DecoratedEdge {
                    u: 0,
                    v: i + 1,
                    pi: Permutation::sample(k, &mut rng).expect("k validated"),
                })
                .collect();
            let center = rng.random_range(0..k) as u8;
            let mut cols = vec![center];
            for e in &edges {
                let forbidden = e.pi.apply(center)?;
                // Uniform over the k-1 colors that keep the leaf proper.
                let draw = rng.random_range(0..k - 1) as u8;
                cols.push(if draw >= forbidden { draw + 1 } else { draw });
            }
            let g = DecoratedGraph::new(deg + 1, k, edges)?;
            let c = solver::available_colors(&g, &Coloring(cols), 0)?;
            let mut h = zero();
            h.total[c - 1] = 1;
            if center == 0 {
                h.c0[c - 1] = 1;
            } else if center == 1 {
                h.c1[c - 1] = 1;
            }
            Ok(h)
        })
        .try_reduce(zero, |a, b| Ok(merge(a, b)))?;

    let expected: Vec<f64> = moments::exact_q_row(deg as u32, k as u32)?
        .iter()
        .map(|q| q.to_f64().expect("probability"))
        .collect();
    let freq: Vec<f64> = hist.total.iter().map(|&o| o as f64 / trials as f64).collect();
    let tv = stats::tv_distance(&freq, &expected)?;

    let n0: u64 = hist.c0.iter().sum();
    let n1: u64 = hist.c1.iter().sum();
    if n0 == 0 || n1 == 0 {
        return Err(Error::invalid("split-sample comparison got an empty split"));
    }
    let f0: Vec<f64> = hist.c0.iter().map(|&o| o as f64 / n0 as f64).collect();
    let f1: Vec<f64> = hist.c1.iter().map(|&o| o as f64 / n1 as f64).collect();
    let split_tv = stats::tv_distance(&f0, &f1)?;

    Ok(AvailableColorsReport {
        k,
        deg,
        trials,
        observed: hist.total,
        expected,
        tv,
        split_tv,
    })
}

/// Joint uniformity of the color images across one edge, and the self-loop
/// variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeIndepReport {
    pub k: usize,
    pub trials: u64,
    /// Goodness of fit of (pi(s(u)), pi^-1(s(v))) against uniform on
    /// ([k]-s(v)) x ([k]-s(u)), rank-normalized into a (k-1)^2 table.
    pub edge: ChiSquareReport,
    /// Same for a self-loop: (pi(s(v)), pi^-1(s(v))) against ([k]-s(v))^2.
    pub self_loop: ChiSquareReport,
}

// Rank of color x inside [k] with `skip` removed; x != skip required.
fn rank_without(x: u8, skip: u8) -> usize {
    debug_assert_ne!(x, skip);
    x as usize - usize::from(x > skip)
}

/// Samples uniform proper (permutation, coloring) pairs for a single edge
/// and for a single self-loop, then tests the joint image distribution for
/// uniformity. The edge draw is two-stage (the proper count is constant in
/// the permutation and end color); the loop draw rejects improper pairs
/// since its proper count varies with the permutation's fixed points.
pub fn check_edge_indep(k: usize, trials: u64, seed: u64) -> Result<EdgeIndepReport> {
    check_stat_preconditions(k, trials)?;
    let cells = (k - 1) * (k - 1);
    let merge = |mut a: Vec<u64>, b: Vec<u64>| {
        for (x, y) in a.iter_mut().zip(&b) {
            *x += y;
        }
        a
    };
    let counts = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<u64>> {
            // First half of the table: edge pairs; second half: loop pairs.
            let mut h = vec![0u64; 2 * cells];
            let mut rng = trial_rng(seed, t);

            let pi = Permutation::sample(k, &mut rng).expect("k validated");
            let su = rng.random_range(0..k) as u8;
            let image = pi.apply(su)?;
            let draw = rng.random_range(0..k - 1) as u8;
            let sv = if draw >= image { draw + 1 } else { draw };
            let a = rank_without(image, sv);
            let b = rank_without(pi.invert().apply(sv)?, su);
            h[a * (k - 1) + b] = 1;

            // Proper loop pairs: color not fixed by the permutation.
            let (pi, c) = loop {
                let pi = Permutation::sample(k, &mut rng).expect("k validated");
                let c = rng.random_range(0..k) as u8;
                if pi.apply(c)? != c {
                    break (pi, c);
                }
            };
            let a = rank_without(pi.apply(c)?, c);
            let b = rank_without(pi.invert().apply(c)?, c);
            h[cells + a * (k - 1) + b] = 1;
            Ok(h)
        })
        .try_reduce(|| vec![0u64; 2 * cells], |a, b| Ok(merge(a, b)))?;

    let uniform = vec![1.0 / cells as f64; cells];
    let edge = stats::chi_square_gof(&counts[..cells], &uniform)?;
    let self_loop = stats::chi_square_gof(&counts[cells..], &uniform)?;
    Ok(EdgeIndepReport { k, trials, edge, self_loop })
}

/// Degree marginal of one vertex against the exact with-replacement law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeModelReport {
    pub trials: u64,
    /// Fit of deg(v0) against Binomial(2m, 1/n).
    pub chi: ChiSquareReport,
    /// Instances whose degrees did not sum to 2m (always 0).
    pub sum_violations: u64,
}

/// Histograms the degree of vertex 0 over sampled instances and fits it
/// against Binomial(2m, 1/n), the marginal of 2m independent uniform
/// endpoint draws. Also confirms the conservation law sum(deg) = 2m on
/// every instance.
pub fn check_degree_model(
    params: &ModelParams,
    trials: u64,
    seed: u64,
) -> Result<DegreeModelReport> {
    check_stat_preconditions(params.k, trials)?;
    let bins = 2 * params.m + 1;
    struct Acc {
        hist: Vec<u64>,
        violations: u64,
    }
    let zero = || Acc { hist: vec![0; bins], violations: 0 };
    let acc = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let g = sample_graph(params, &mut rng);
            let degs = g.degree_sequence();
            let mut a = zero();
            a.hist[degs[0]] = 1;
            a.violations = u64::from(degs.iter().sum::<usize>() != 2 * params.m);
            a
        })
        .reduce(zero, |mut a, b| {
            for (x, y) in a.hist.iter_mut().zip(&b.hist) {
                *x += y;
            }
            a.violations += b.violations;
            a
        });

    let marginal = Binomial::new(1.0 / params.n as f64, 2 * params.m as u64)
        .map_err(|e| Error::invalid(format!("binomial reference: {e}")))?;
    let expected: Vec<f64> = (0..bins as u64).map(|x| marginal.pmf(x)).collect();
    let chi = stats::chi_square_gof(&acc.hist, &expected)?;
    Ok(DegreeModelReport {
        trials,
        chi,
        sum_violations: acc.violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(n: usize, m: usize, k: usize, trials: u64, seed: u64) -> TrialSpec {
        let params = ModelParams::new(n, m, k, seed).unwrap();
        TrialSpec::new(params, trials, seed).unwrap()
    }

    #[test]
    fn trial_spec_needs_trials() {
        let params = ModelParams::new(4, 2, 3, 0).unwrap();
        assert!(TrialSpec::new(params, 0, 0).is_err());
        assert!(TrialSpec::new(params, 1, 0).is_ok());
    }

    #[test]
    fn empty_graph_estimate_is_exactly_one() {
        let r = mc_colorable(&spec(6, 0, 3, 400, 11)).unwrap();
        assert_eq!(r.p_hat, 1.0);
        assert_eq!(r.colorable, 400);
        assert_eq!(r.excluded, 0);
        assert_eq!(r.ci_hi, 1.0);
        assert!(r.ci_lo < 1.0);
        assert_eq!(r.estimate().stderr, 0.0);
    }

    #[test]
    fn single_self_loop_rate_matches_exact_law() {
        // One loop on one vertex is colorable iff the permutation is not the
        // identity: 1 - 1/3! = 5/6.
        let trials = 20_000u64;
        let r = mc_colorable(&spec(1, 1, 3, trials, 21)).unwrap();
        let p = 5.0 / 6.0;
        let tol = 5.0 * (p * (1.0 - p) / trials as f64).sqrt();
        assert!((r.p_hat - p).abs() < tol, "p_hat {} vs 5/6", r.p_hat);
        assert!(r.ci_lo < p && p < r.ci_hi);
    }

    #[test]
    fn colorable_deterministic_across_thread_counts() {
        let s = spec(12, 14, 3, 600, 77);
        let base = mc_colorable(&s).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| mc_colorable(&s).unwrap());
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| mc_colorable(&s).unwrap());
        assert_eq!(base, single);
        assert_eq!(base, four);
    }

    #[test]
    fn moments_edge_free_case_is_deterministic() {
        let r = mc_moments(&spec(4, 0, 3, 200, 5)).unwrap();
        assert_eq!(r.x.mean, 81.0);
        assert_eq!(r.x.stderr, 0.0);
        assert_eq!(r.x2.mean, 81.0 * 81.0);
        assert_eq!(r.x2.stderr, 0.0);
        assert_eq!(r.z.mean, 1.0);
        assert_eq!(r.z.stderr, 0.0);
        assert_eq!(r.identity_violations, 0);
        assert_relative_eq!(r.x.reference.unwrap(), 81.0, max_relative = 1e-12);
    }

    #[test]
    fn moments_track_closed_forms() {
        let r = mc_moments(&spec(5, 6, 3, 4000, 9)).unwrap();
        let x_ref = r.x.reference.unwrap();
        assert_relative_eq!(x_ref, 64.0 / 3.0, max_relative = 1e-12);
        assert!(
            (r.x.mean - x_ref).abs() <= 4.0 * r.x.stderr,
            "X mean {} ref {x_ref} stderr {}",
            r.x.mean,
            r.x.stderr
        );
        let x2_ref = r.x2.reference.unwrap();
        assert!(
            (r.x2.mean - x2_ref).abs() <= 4.0 * r.x2.stderr,
            "X^2 mean {} ref {x2_ref} stderr {}",
            r.x2.mean,
            r.x2.stderr
        );
        // Z sums weights over proper colorings only, so Z <= X pointwise.
        assert!(r.z.mean <= r.x.mean + 1e-12);
        assert!(r.z.stderr > 0.0);
        assert_eq!(r.identity_violations, 0);
    }

    #[test]
    fn threshold_brackets_crossing() {
        let r = threshold_bisect(20, 3, 400, 0.5, 3).unwrap();
        assert!(r.bracket.0 <= r.d_hat && r.d_hat <= r.bracket.1);
        // Finite-size crossing sits in the interior of the scanned band.
        assert!(r.d_hat > 1.0 && r.d_hat < 9.0, "d_hat {}", r.d_hat);
        // The anchor point m = 0 is on the curve with probability one.
        assert_eq!(r.curve[0].m, 0);
        assert_eq!(r.curve[0].p_hat, 1.0);
        for w in r.curve.windows(2) {
            assert!(w[0].d < w[1].d);
        }
        let rerun = threshold_bisect(20, 3, 400, 0.5, 3).unwrap();
        assert_eq!(r, rerun);
    }

    #[test]
    fn threshold_validates_inputs() {
        assert!(threshold_bisect(20, 3, 100, 0.0, 1).is_err());
        assert!(threshold_bisect(20, 3, 100, 1.0, 1).is_err());
        assert!(threshold_bisect(20, 3, 100, f64::NAN, 1).is_err());
        assert!(threshold_bisect(20, 3, 0, 0.5, 1).is_err());
    }

    #[test]
    fn available_colors_degree_zero_is_exact() {
        let r = check_available_colors(4, 0, 10_000, 13).unwrap();
        assert_eq!(r.tv, 0.0);
        assert_eq!(r.observed[3], 10_000);
        assert_eq!(&r.observed[..3], &[0, 0, 0]);
        assert_eq!(r.expected[3], 1.0);
    }

    #[test]
    fn available_colors_match_occupancy_law() {
        let r = check_available_colors(3, 2, 40_000, 17).unwrap();
        // Exact law for two forbidden draws over three colors: c = 1 and
        // c = 2 each with probability 1/2, c = 3 impossible.
        assert_relative_eq!(r.expected[0], 0.5, max_relative = 1e-12);
        assert_relative_eq!(r.expected[1], 0.5, max_relative = 1e-12);
        assert_eq!(r.expected[2], 0.0);
        assert_eq!(r.observed[2], 0);
        assert!(r.tv < 0.02, "tv {}", r.tv);
        assert!(r.split_tv < 0.05, "split tv {}", r.split_tv);
    }

    #[test]
    fn available_colors_deterministic() {
        let a = check_available_colors(5, 3, 10_000, 3).unwrap();
        let b = check_available_colors(5, 3, 10_000, 3).unwrap();
        assert_eq!(a, b);
        let c = check_available_colors(5, 3, 10_000, 4).unwrap();
        assert_ne!(a.observed, c.observed);
    }

    #[test]
    fn stat_preconditions_enforced() {
        assert!(check_available_colors(3, 2, 9_999, 1).is_err());
        assert!(check_edge_indep(1, 10_000, 1).is_err());
        let params = ModelParams::new(5, 3, 3, 0).unwrap();
        assert!(check_degree_model(&params, 100, 1).is_err());
    }

    #[test]
    fn edge_indep_k2_has_single_cell() {
        let r = check_edge_indep(2, 10_000, 19).unwrap();
        assert_eq!(r.edge.statistic, 0.0);
        assert_eq!(r.edge.p_value, 1.0);
        assert_eq!(r.self_loop.statistic, 0.0);
        assert_eq!(r.self_loop.p_value, 1.0);
    }

    #[test]
    fn edge_indep_uniform_at_k3_and_k4() {
        for (k, seed) in [(3usize, 23u64), (4, 29)] {
            let r = check_edge_indep(k, 40_000, seed).unwrap();
            assert!(r.edge.p_value > 0.001, "k={k} edge p {}", r.edge.p_value);
            assert!(
                r.self_loop.p_value > 0.001,
                "k={k} loop p {}",
                r.self_loop.p_value
            );
        }
    }

    // The loop lemma holds exactly: over all proper (permutation, color)
    // pairs for k = 3, the rank-normalized image pair is uniform.
    #[test]
    fn loop_image_pairs_uniform_by_enumeration() {
        let perms = [
            [0u8, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let mut counts = [0u32; 4];
        let mut proper_pairs = 0;
        for image in perms {
            let pi = Permutation::new(image.to_vec()).unwrap();
            for c in 0..3u8 {
                if pi.apply(c).unwrap() == c {
                    continue;
                }
                proper_pairs += 1;
                let a = rank_without(pi.apply(c).unwrap(), c);
                let b = rank_without(pi.invert().apply(c).unwrap(), c);
                counts[a * 2 + b] += 1;
            }
        }
        assert_eq!(proper_pairs, 12);
        assert_eq!(counts, [3, 3, 3, 3]);
    }

    #[test]
    fn degree_model_matches_binomial_marginal() {
        let params = ModelParams::new(10, 15, 3, 0).unwrap();
        let r = check_degree_model(&params, 40_000, 31).unwrap();
        assert!(r.chi.p_value > 0.001, "p {}", r.chi.p_value);
        assert_eq!(r.sum_violations, 0);
    }

    #[test]
    fn degree_model_single_vertex_is_constant() {
        let params = ModelParams::new(1, 4, 3, 0).unwrap();
        let r = check_degree_model(&params, 10_000, 37).unwrap();
        // Every edge endpoint lands on the only vertex: degree 8 always.
        assert_eq!(r.chi.statistic, 0.0);
        assert_eq!(r.chi.p_value, 1.0);
        assert_eq!(r.sum_violations, 0);
    }
}
