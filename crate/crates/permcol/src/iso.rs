//! Brute-force verification of the product-cube isoperimetric inequality:
//! for every nonempty S ⊆ [k]^n the weight Z(S) = Σ_{σ∈S} ∏_v 1/c_S(σ,v)
//! is at least 1, where c_S(σ,v) counts the cells of S that agree with σ
//! everywhere except possibly on axis v (σ itself included).
//!
//! Everything here runs in exact rationals. The inequality is tight (Z = 1
//! on cylinders over singletons, among others), so a floating comparison
//! would misreport near-extremal sets.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, RngExt};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::trial_rng;

/// Hard size limit on the cell array: k^n must stay enumerable in memory.
pub const MAX_CELLS: usize = 1 << 20;

/// Largest cell count for which `exhaustive_check` will walk all 2^(k^n)
/// subsets.
pub const MAX_EXHAUSTIVE_CELLS: usize = 16;

/// An explicit subset of the product cube [k]^n.
///
/// Cells are indexed in mixed radix with axis 0 least significant: the point
/// (d_0, d_1, ..., d_{n-1}) lives at index Σ d_i k^i. Fixing the order makes
/// argmin reports from exhaustive runs reproducible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubeSubset {
    k: usize,
    n: usize,
    membership: Vec<bool>,
}

impl CubeSubset {
    /// Builds a subset from an explicit indicator vector of length k^n.
    pub fn new(k: usize, n: usize, membership: Vec<bool>) -> Result<Self> {
        let cells = cube_cells(k, n)?;
        if membership.len() != cells {
            return Err(Error::invalid(format!(
                "indicator length {} does not match k^n = {cells}",
                membership.len()
            )));
        }
        Ok(CubeSubset { k, n, membership })
    }

    pub fn empty(k: usize, n: usize) -> Result<Self> {
        let cells = cube_cells(k, n)?;
        Ok(CubeSubset {
            k,
            n,
            membership: vec![false; cells],
        })
    }

    pub fn full(k: usize, n: usize) -> Result<Self> {
        let cells = cube_cells(k, n)?;
        Ok(CubeSubset {
            k,
            n,
            membership: vec![true; cells],
        })
    }

    /// Builds the subset {p_1, ..., p_t} from explicit points.
    pub fn from_points(k: usize, n: usize, points: &[&[usize]]) -> Result<Self> {
        let mut s = CubeSubset::empty(k, n)?;
        for p in points {
            let idx = s.encode(p)?;
            s.membership[idx] = true;
        }
        Ok(s)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of cells in the cube, k^n.
    pub fn cube_size(&self) -> usize {
        self.membership.len()
    }

    /// Number of member cells.
    pub fn len(&self) -> usize {
        self.membership.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.membership.iter().any(|&b| b)
    }

    /// Mixed-radix cell index of a point, axis 0 least significant.
    pub fn encode(&self, point: &[usize]) -> Result<usize> {
        if point.len() != self.n {
            return Err(Error::invalid(format!(
                "point has {} coordinates, cube has {} axes",
                point.len(),
                self.n
            )));
        }
        let mut idx = 0usize;
        for (axis, &d) in point.iter().enumerate() {
            if d >= self.k {
                return Err(Error::invalid(format!(
                    "coordinate {d} on axis {axis} is outside [0, {})",
                    self.k
                )));
            }
            idx += d * self.k.pow(axis as u32);
        }
        Ok(idx)
    }

    /// Inverse of `encode`.
    pub fn decode(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.cube_size() {
            return Err(Error::invalid(format!(
                "cell index {index} is outside [0, {})",
                self.cube_size()
            )));
        }
        let mut rest = index;
        let mut point = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            point.push(rest % self.k);
            rest /= self.k;
        }
        Ok(point)
    }

    pub fn insert(&mut self, point: &[usize]) -> Result<()> {
        let idx = self.encode(point)?;
        self.membership[idx] = true;
        Ok(())
    }

    pub fn contains(&self, point: &[usize]) -> Result<bool> {
        Ok(self.membership[self.encode(point)?])
    }

    pub fn contains_index(&self, index: usize) -> bool {
        self.membership.get(index).copied().unwrap_or(false)
    }

    /// Indices of all member cells, ascending.
    pub fn member_indices(&self) -> Vec<usize> {
        self.membership
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// Member cells as coordinate vectors, in index order.
    pub fn member_points(&self) -> Vec<Vec<usize>> {
        self.member_indices()
            .into_iter()
            .map(|i| self.decode(i).expect("member index in range"))
            .collect()
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.n {
            return Err(Error::invalid(format!(
                "axis {axis} is outside [0, {})",
                self.n
            )));
        }
        Ok(())
    }

    // Count of member cells on the axis line through `index`. No membership
    // precondition; used by both the weight sum and the public counter.
    fn line_count(&self, index: usize, axis: usize) -> usize {
        let stride = self.k.pow(axis as u32);
        let digit = (index / stride) % self.k;
        let base = index - digit * stride;
        (0..self.k)
            .filter(|c| self.membership[base + c * stride])
            .count()
    }

    /// c_S(σ, v): the number of member cells agreeing with σ off axis v,
    /// σ itself included (so always ≥ 1 when defined).
    pub fn neighbor_count(&self, point: &[usize], axis: usize) -> Result<usize> {
        self.check_axis(axis)?;
        let idx = self.encode(point)?;
        if !self.membership[idx] {
            return Err(Error::invalid(format!(
                "point {point:?} is not a member of the subset"
            )));
        }
        Ok(self.line_count(idx, axis))
    }

    /// Z(S) = Σ_{σ∈S} ∏_v 1/c_S(σ,v), exact. Zero iff S is empty.
    pub fn subset_z(&self) -> BigRational {
        let mut total = BigRational::zero();
        for idx in 0..self.cube_size() {
            if !self.membership[idx] {
                continue;
            }
            let mut denom = BigInt::one();
            for axis in 0..self.n {
                denom *= BigInt::from(self.line_count(idx, axis));
            }
            total += BigRational::new(BigInt::one(), denom);
        }
        total
    }

    /// Cyl_v(S): the union of full axis-v lines through every member cell.
    /// Idempotent per axis; thickening every axis yields the full cube.
    pub fn cylinder_thicken(&self, axis: usize) -> Result<CubeSubset> {
        self.check_axis(axis)?;
        let stride = self.k.pow(axis as u32);
        let mut out = vec![false; self.cube_size()];
        for idx in 0..self.cube_size() {
            if !self.membership[idx] {
                continue;
            }
            let digit = (idx / stride) % self.k;
            let base = idx - digit * stride;
            for c in 0..self.k {
                out[base + c * stride] = true;
            }
        }
        Ok(CubeSubset {
            k: self.k,
            n: self.n,
            membership: out,
        })
    }
}

fn cube_cells(k: usize, n: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::invalid("cube arity k must be at least 1"));
    }
    if n == 0 {
        return Err(Error::invalid("cube dimension n must be at least 1"));
    }
    let cells = k
        .checked_pow(u32::try_from(n).map_err(|_| Error::invalid("dimension n too large"))?)
        .filter(|&c| c <= MAX_CELLS)
        .ok_or_else(|| {
            Error::invalid(format!("k^n exceeds the cell limit {MAX_CELLS}"))
        })?;
    Ok(cells)
}

/// Checks that thickening along one axis does not increase the weight:
/// Z(Cyl_v(S)) ≤ Z(S), compared exactly.
pub fn verify_monotone(s: &CubeSubset, axis: usize) -> Result<bool> {
    if s.is_empty() {
        return Err(Error::invalid("monotonicity check needs a nonempty subset"));
    }
    let thickened = s.cylinder_thicken(axis)?;
    Ok(thickened.subset_z() <= s.subset_z())
}

/// Walks the full thickening chain T_0 = S, T_v = Cyl_v(T_{v-1}) and checks
/// Z(T_0) ≥ Z(T_1) ≥ ... ≥ Z(T_n) = 1. The last set is the whole cube, so a
/// correct implementation always ends at exactly 1.
pub fn thickening_chain_monotone(s: &CubeSubset) -> Result<bool> {
    if s.is_empty() {
        return Err(Error::invalid("thickening chain needs a nonempty subset"));
    }
    let mut current = s.clone();
    let mut z = current.subset_z();
    for axis in 0..s.n() {
        current = current.cylinder_thicken(axis)?;
        let next = current.subset_z();
        if next > z {
            return Ok(false);
        }
        z = next;
    }
    Ok(z == BigRational::one())
}

/// Outcome of walking every nonempty subset of a small cube.
#[derive(Debug, Clone)]
pub struct ExhaustiveReport {
    pub k: usize,
    pub n: usize,
    /// Number of nonempty subsets examined, 2^(k^n) - 1.
    pub subsets: u64,
    pub min_z: BigRational,
    /// A subset attaining the minimum (smallest bitmask among ties).
    pub argmin: CubeSubset,
    pub all_ge_one: bool,
}

/// Evaluates Z on every nonempty subset of [k]^n and reports the minimum.
/// Refuses cubes with more than `MAX_EXHAUSTIVE_CELLS` cells; the subset
/// space is 2^(k^n).
pub fn exhaustive_check(k: usize, n: usize) -> Result<ExhaustiveReport> {
    let cells = cube_cells(k, n)?;
    if cells > MAX_EXHAUSTIVE_CELLS {
        return Err(Error::CapExceeded {
            log2_states: cells as f64,
            log2_cap: MAX_EXHAUSTIVE_CELLS as f64,
        });
    }
    let total: u64 = 1u64 << cells;
    let from_mask = |mask: u64| -> CubeSubset {
        CubeSubset {
            k,
            n,
            membership: (0..cells).map(|i| mask >> i & 1 == 1).collect(),
        }
    };
    // Subset masks are split across tasks; each task carries its own exact
    // minimum and the merge is an associative min with mask tie-break.
    let best = (1..total)
        .into_par_iter()
        .map(|mask| (from_mask(mask).subset_z(), mask))
        .reduce_with(|a, b| {
            if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        })
        .expect("at least one nonempty subset");
    let (min_z, argmin_mask) = best;
    let all_ge_one = min_z >= BigRational::one();
    Ok(ExhaustiveReport {
        k,
        n,
        subsets: total - 1,
        min_z,
        argmin: from_mask(argmin_mask),
        all_ge_one,
    })
}

/// Outcome of randomized verification over sampled subsets.
#[derive(Debug, Clone)]
pub struct RandomCheckReport {
    pub k: usize,
    pub n: usize,
    /// Subsets examined: `trials` random draws plus the structured family.
    pub subsets: u64,
    pub min_z: BigRational,
    /// Samples with Z < 1.
    pub weight_failures: u64,
    /// Samples whose thickening chain rose somewhere or missed Z = 1 at the
    /// full cube.
    pub chain_failures: u64,
    pub all_ok: bool,
}

// Independent-inclusion densities for the random draws. Sparse sets stress
// the singleton-like regime, dense ones the near-cube regime.
const SAMPLE_DENSITIES: [f64; 4] = [0.1, 0.3, 0.5, 0.9];

fn random_subset<R: Rng>(k: usize, n: usize, density: f64, rng: &mut R) -> CubeSubset {
    let cells = k.pow(n as u32);
    let mut membership: Vec<bool> = (0..cells).map(|_| rng.random::<f64>() < density).collect();
    if !membership.iter().any(|&b| b) {
        // The inequality only speaks about nonempty sets.
        membership[rng.random_range(0..cells)] = true;
    }
    CubeSubset { k, n, membership }
}

// Structured sets that sit near the inequality's extremes: axis-aligned
// subcubes (Z = 1) and shifted diagonals (Z = k when the shift is coprime
// to k, the worst known cases).
fn structured_family(k: usize, n: usize) -> Vec<CubeSubset> {
    let mut family = Vec::new();
    for dim in 0..=n {
        for anchor in [0, k - 1] {
            let mut s = CubeSubset::empty(k, n).expect("validated by caller");
            for idx in 0..s.cube_size() {
                let point = s.decode(idx).expect("index in range");
                if point[dim..].iter().all(|&d| d == anchor) {
                    s.membership[idx] = true;
                }
            }
            family.push(s);
        }
    }
    for shift in 0..k {
        let mut s = CubeSubset::empty(k, n).expect("validated by caller");
        for c in 0..k {
            let point: Vec<usize> = (0..n).map(|j| (c + j * shift) % k).collect();
            s.insert(&point).expect("point in range");
        }
        family.push(s);
    }
    family
}

/// Samples `trials` subsets by independent cell inclusion (cycling through
/// densities 0.1, 0.3, 0.5, 0.9), appends the structured family, and checks
/// Z ≥ 1 plus thickening-chain monotonicity on every sample. Exact
/// arithmetic throughout; `seed` fixes the drawn sets.
pub fn random_check(k: usize, n: usize, trials: u64, seed: u64) -> Result<RandomCheckReport> {
    // Validates k, n and the cell cap up front.
    let _ = cube_cells(k, n)?;
    if trials == 0 {
        return Err(Error::invalid("random check needs at least one trial"));
    }
    let structured = structured_family(k, n);
    struct Acc {
        min_z: BigRational,
        weight_failures: u64,
        chain_failures: u64,
    }
    let check_one = |s: &CubeSubset| -> Acc {
        let z = s.subset_z();
        let chain_ok = thickening_chain_monotone(s).expect("sample sets are nonempty");
        Acc {
            weight_failures: u64::from(z < BigRational::one()),
            chain_failures: u64::from(!chain_ok),
            min_z: z,
        }
    };
    let merge = |a: Acc, b: Acc| Acc {
        min_z: a.min_z.min(b.min_z),
        weight_failures: a.weight_failures + b.weight_failures,
        chain_failures: a.chain_failures + b.chain_failures,
    };
    let random_part = (0..trials)
        .into_par_iter()
        .map(|t| {
            let density = SAMPLE_DENSITIES[(t % SAMPLE_DENSITIES.len() as u64) as usize];
            let mut rng = trial_rng(seed, t);
            check_one(&random_subset(k, n, density, &mut rng))
        })
        .reduce_with(merge);
    let structured_part = structured.par_iter().map(check_one).reduce_with(merge);
    let combined = match (random_part, structured_part) {
        (Some(a), Some(b)) => merge(a, b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => unreachable!("trials >= 1"),
    };
    let subsets = trials + structured.len() as u64;
    let all_ok = combined.weight_failures == 0 && combined.chain_failures == 0;
    Ok(RandomCheckReport {
        k,
        n,
        subsets,
        min_z: combined.min_z,
        weight_failures: combined.weight_failures,
        chain_failures: combined.chain_failures,
        all_ok,
    })
}
