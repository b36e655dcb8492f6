use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Largest supported alphabet. Colors are stored as `u8`, so an image entry
/// can name at most 256 distinct colors.
pub const MAX_COLORS: usize = 256;

/// A bijection on the color set {0, .., k-1}, stored as its image table:
/// `image[c]` is where color `c` goes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Permutation {
    image: Vec<u8>,
}

impl Permutation {
    /// The identity on k colors.
    pub fn identity(k: usize) -> Result<Self> {
        check_k(k)?;
        Ok(Permutation {
            image: (0..k as u16).map(|c| c as u8).collect(),
        })
    }

    /// Builds a permutation from an explicit image table, rejecting anything
    /// that is not a bijection on {0, .., len-1}.
    pub fn new(image: Vec<u8>) -> Result<Self> {
        check_k(image.len())?;
        let mut seen = [false; MAX_COLORS];
        for &c in &image {
            if (c as usize) >= image.len() {
                return Err(Error::invalid(format!(
                    "image entry {c} out of range for k={}",
                    image.len()
                )));
            }
            if seen[c as usize] {
                return Err(Error::invalid(format!("image entry {c} repeats")));
            }
            seen[c as usize] = true;
        }
        Ok(Permutation { image })
    }

    /// Uniform sample over all k! permutations: a Fisher-Yates shuffle of the
    /// identity table, consuming a fixed number of draws from `rng`.
    pub fn sample<R: Rng>(k: usize, rng: &mut R) -> Result<Self> {
        let mut p = Permutation::identity(k)?;
        p.image.shuffle(rng);
        Ok(p)
    }

    pub fn k(&self) -> usize {
        self.image.len()
    }

    pub fn image(&self) -> &[u8] {
        &self.image
    }

    /// Checked application; out-of-range colors are a caller error.
    pub fn apply(&self, c: u8) -> Result<u8> {
        self.image
            .get(c as usize)
            .copied()
            .ok_or_else(|| Error::invalid(format!("color {c} out of range for k={}", self.k())))
    }

    /// Unchecked application for validated colors (indexing panics otherwise).
    #[inline]
    pub(crate) fn map(&self, c: u8) -> u8 {
        self.image[c as usize]
    }

    pub fn invert(&self) -> Self {
        let mut inv = vec![0u8; self.image.len()];
        for (c, &ic) in self.image.iter().enumerate() {
            inv[ic as usize] = c as u8;
        }
        Permutation { image: inv }
    }

    /// Composition in "apply `other` first" order: the result maps c to
    /// self(other(c)).
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.k() != other.k() {
            return Err(Error::invalid(format!(
                "composing permutations of different k ({} vs {})",
                self.k(),
                other.k()
            )));
        }
        Ok(Permutation {
            image: other.image.iter().map(|&c| self.map(c)).collect(),
        })
    }

    pub fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(c, &ic)| c == ic as usize)
    }

    /// Bitmask of the fixed points, for k <= 64.
    pub(crate) fn fixed_point_mask(&self) -> u64 {
        debug_assert!(self.k() <= 64);
        let mut mask = 0u64;
        for (c, &ic) in self.image.iter().enumerate() {
            if c == ic as usize {
                mask |= 1 << c;
            }
        }
        mask
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("permutation needs at least one color"));
    }
    if k > MAX_COLORS {
        return Err(Error::invalid(format!("k={k} exceeds {MAX_COLORS} colors")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn identity_applies() {
        let id = Permutation::identity(3).unwrap();
        assert_eq!(id.apply(2).unwrap(), 2);
        assert!(id.is_identity());
        assert!(id.apply(3).is_err());
    }

    #[test]
    fn k1_only_permutation() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let p = Permutation::sample(1, &mut rng).unwrap();
        assert_eq!(p.image(), &[0]);
        assert!(Permutation::sample(0, &mut rng).is_err());
    }

    #[test]
    fn transposition_cases() {
        let t = Permutation::new(vec![1, 0, 2]).unwrap();
        assert_eq!(t.apply(2).unwrap(), 2);
        assert_eq!(t.apply(0).unwrap(), 1);
    }

    #[test]
    fn rejects_non_bijections() {
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
        assert!(Permutation::new(vec![]).is_err());
    }

    #[test]
    fn invert_three_cycle() {
        // 0 -> 1 -> 2 -> 0 inverts to 0 -> 2 -> 1 -> 0.
        let c = Permutation::new(vec![1, 2, 0]).unwrap();
        assert_eq!(c.invert().image(), &[2, 0, 1]);
        assert!(Permutation::identity(4).unwrap().invert().is_identity());
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let a = Permutation::sample(3, &mut ChaCha12Rng::seed_from_u64(42)).unwrap();
        let b = Permutation::sample(3, &mut ChaCha12Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_is_uniform_over_s3() {
        // Chi-square against uniform over the 6 elements of S_3.
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let trials = 1_000_000u64;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..trials {
            let p = Permutation::sample(3, &mut rng).unwrap();
            *counts.entry(p.image().to_vec()).or_insert(0u64) += 1;
        }
        assert_eq!(counts.len(), 6);
        let expect = trials as f64 / 6.0;
        let stat: f64 = counts
            .values()
            .map(|&o| (o as f64 - expect).powi(2) / expect)
            .sum();
        // 5 dof; chi-square beyond 30 has probability ~1.5e-5.
        assert!(stat < 30.0, "chi-square statistic {stat} too large");
    }

    #[test]
    fn compose_applies_right_argument_first() {
        let p = Permutation::new(vec![1, 2, 0]).unwrap();
        let q = Permutation::new(vec![0, 2, 1]).unwrap();
        let pq = p.compose(&q).unwrap();
        for c in 0..3u8 {
            assert_eq!(pq.apply(c).unwrap(), p.apply(q.apply(c).unwrap()).unwrap());
        }
        let mismatched = Permutation::identity(4).unwrap();
        assert!(p.compose(&mismatched).is_err());
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        fn arb_perm(k: usize) -> impl Strategy<Value = Permutation> {
            any::<u64>().prop_map(move |seed| {
                Permutation::sample(k, &mut ChaCha12Rng::seed_from_u64(seed)).unwrap()
            })
        }

        proptest! {
            // Group law: p composed with its inverse is the identity.
            #[test]
            fn inverse_cancels(p in arb_perm(6)) {
                prop_assert!(p.compose(&p.invert()).unwrap().is_identity());
                prop_assert!(p.invert().compose(&p).unwrap().is_identity());
            }

            // Associativity of composition.
            #[test]
            fn compose_is_associative(p in arb_perm(5), q in arb_perm(5), r in arb_perm(5)) {
                let left = p.compose(&q).unwrap().compose(&r).unwrap();
                let right = p.compose(&q.compose(&r).unwrap()).unwrap();
                prop_assert_eq!(left, right);
            }

            // Double inversion is the identity map on permutations.
            #[test]
            fn invert_is_involution(p in arb_perm(7)) {
                prop_assert_eq!(p.invert().invert(), p);
            }
        }
    }
}
