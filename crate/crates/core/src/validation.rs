//! Redundancy rejection for proposals.
//!
//! Instances are compared through their preference sets (the bitset of their
//! inliers). The Jaccard similarity of two sets is estimated from fixed-size
//! min-hash signatures, so a comparison costs O(K) whatever the point count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{residual, Datum, Instance};
use crate::scoring::CompoundModel;

pub const DEFAULT_NUM_HASHES: usize = 512;
pub const DEFAULT_HASH_SEED: u64 = 0x5E_ED0F_4A55;

/// Inlier indicator over a fixed point set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreferenceSet {
    len: usize,
    words: Vec<u64>,
}

impl PreferenceSet {
    pub fn empty(len: usize) -> Self {
        PreferenceSet { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = PreferenceSet::empty(len);
        for i in indices {
            s.insert(i);
        }
        s
    }

    /// Points with residual strictly below `eps`.
    pub fn of_instance(instance: &Instance, data: &[Datum], eps: f64) -> Self {
        PreferenceSet::from_indices(
            data.len(),
            data.iter().enumerate().filter(|(_, d)| residual(instance, d) < eps).map(|(i, _)| i),
        )
    }

    /// Inliers of the compound model, i.e. the union of the active instances' sets.
    pub fn of_compound(cm: &CompoundModel) -> Self {
        PreferenceSet::from_indices(cm.n_points(), (0..cm.n_points()).filter(|&i| cm.is_inlier(i)))
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.len, "index {i} outside preference set of length {}", self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn union(&self, other: &PreferenceSet) -> PreferenceSet {
        assert_eq!(self.len, other.len);
        PreferenceSet { len: self.len, words: self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect() }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &bits)| {
            let mut bits = bits;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(w * 64 + tz)
            })
        })
    }
}

/// Exact Jaccard similarity; two empty sets have similarity 0.
pub fn jaccard_exact(a: &PreferenceSet, b: &PreferenceSet) -> f64 {
    assert_eq!(a.len, b.len, "preference sets over different point sets");
    let (mut inter, mut union) = (0u64, 0u64);
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones() as u64;
        union += (x | y).count_ones() as u64;
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A family of K multiply-add hash functions over premixed element keys.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinHasher {
    seed: u64,
    coeffs: Vec<(u64, u64)>,
}

impl Default for MinHasher {
    fn default() -> Self {
        MinHasher::new(DEFAULT_NUM_HASHES, DEFAULT_HASH_SEED)
    }
}

impl MinHasher {
    pub fn new(num_hashes: usize, seed: u64) -> Self {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            splitmix64(state)
        };
        let coeffs = (0..num_hashes).map(|_| (next() | 1, next())).collect();
        MinHasher { seed, coeffs }
    }

    pub fn num_hashes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn signature(&self, set: &PreferenceSet) -> MinHashSignature {
        let mut values = vec![u64::MAX; self.coeffs.len()];
        let mut empty = true;
        for i in set.iter() {
            empty = false;
            let key = splitmix64(i as u64 ^ self.seed);
            for (v, &(a, b)) in values.iter_mut().zip(&self.coeffs) {
                let h = a.wrapping_mul(key).wrapping_add(b);
                if h < *v {
                    *v = h;
                }
            }
        }
        MinHashSignature { seed: self.seed, values, empty }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinHashSignature {
    seed: u64,
    values: Vec<u64>,
    empty: bool,
}

impl MinHashSignature {
    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn is_empty_set(&self) -> bool {
        self.empty
    }
}

/// Fraction of positions where the two signatures agree.
pub fn minhash_estimate(a: &MinHashSignature, b: &MinHashSignature) -> Result<f64> {
    if a.seed != b.seed || a.values.len() != b.values.len() || a.values.is_empty() {
        return Err(Error::SignatureMismatch);
    }
    if a.empty || b.empty {
        return Ok(0.0);
    }
    let agree = a.values.iter().zip(&b.values).filter(|(x, y)| x == y).count();
    Ok(agree as f64 / a.values.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Accept,
    Reject,
}

/// Accepts when the Jaccard distance `1 - J` reaches `min_distance`
/// (compared with a few ulps of slack so that `J = 0.9, 0.1` accepts).
pub fn verdict(similarity: f64, min_distance: f64) -> Verdict {
    if 1.0 - similarity >= min_distance - 1e-12 {
        Verdict::Accept
    } else {
        Verdict::Reject
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityMode {
    #[default]
    MinHash,
    Exact,
}

/// Proposal validation against the compound preference set.
#[derive(Clone, Debug)]
pub struct Validator {
    hasher: MinHasher,
    mode: SimilarityMode,
    min_distance: f64,
}

impl Validator {
    pub fn new(min_distance: f64, mode: SimilarityMode, hasher: MinHasher) -> Result<Self> {
        if !(0.0..=1.0).contains(&min_distance) {
            return Err(Error::ConfigInvalid("Jaccard-distance threshold must lie in [0, 1]".into()));
        }
        Ok(Validator { hasher, mode, min_distance })
    }

    pub fn similarity(&self, proposal: &PreferenceSet, compound: &PreferenceSet) -> f64 {
        match self.mode {
            SimilarityMode::Exact => jaccard_exact(proposal, compound),
            SimilarityMode::MinHash => {
                let (a, b) = (self.hasher.signature(proposal), self.hasher.signature(compound));
                minhash_estimate(&a, &b).expect("signatures from one hasher")
            }
        }
    }

    pub fn validate(&self, proposal: &PreferenceSet, compound: &PreferenceSet) -> Verdict {
        verdict(self.similarity(proposal, compound), self.min_distance)
    }
}

/// Validation from precomputed signatures.
pub fn validate(proposal: &MinHashSignature, compound: &MinHashSignature, min_distance: f64) -> Result<Verdict> {
    Ok(verdict(minhash_estimate(proposal, compound)?, min_distance))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(len: usize, r: std::ops::Range<usize>) -> PreferenceSet {
        PreferenceSet::from_indices(len, r)
    }

    #[test]
    fn exact_jaccard_examples() {
        let a = set(200, 1..61);
        let b = set(200, 41..101);
        assert_eq!(jaccard_exact(&a, &a), 1.0);
        assert_eq!(jaccard_exact(&a, &set(200, 100..150)), 0.0);
        assert_eq!(jaccard_exact(&a, &b), 0.2);
        assert_eq!(jaccard_exact(&PreferenceSet::empty(10), &PreferenceSet::empty(10)), 0.0);
    }

    #[test]
    fn bitset_iteration_roundtrip() {
        let idx = vec![0, 3, 63, 64, 65, 127, 128, 199];
        let s = PreferenceSet::from_indices(200, idx.clone());
        assert_eq!(s.iter().collect::<Vec<_>>(), idx);
        assert_eq!(s.count(), idx.len());
        assert!(s.contains(64) && !s.contains(62));
    }

    #[test]
    fn identical_sets_estimate_one() {
        let h = MinHasher::default();
        let a = h.signature(&set(300, 10..90));
        assert_eq!(minhash_estimate(&a, &a.clone()).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_sets_estimate_near_zero() {
        let h = MinHasher::default();
        let a = h.signature(&set(1000, 0..300));
        let b = h.signature(&set(1000, 500..800));
        assert!(minhash_estimate(&a, &b).unwrap() < 3.0 / 512.0);
    }

    #[test]
    fn twenty_percent_overlap_within_three_sigma_for_most_seeds() {
        let a = set(200, 1..61);
        let b = set(200, 41..101);
        let tol = 3.0 * (0.2f64 * 0.8 / 512.0).sqrt();
        let seeds = 200;
        let within = (0..seeds)
            .filter(|&s| {
                let h = MinHasher::new(512, s as u64 * 7919 + 1);
                (minhash_estimate(&h.signature(&a), &h.signature(&b)).unwrap() - 0.2).abs() <= tol
            })
            .count();
        assert!(within as f64 >= 0.99 * seeds as f64, "{within}/{seeds}");
    }

    #[test]
    fn mismatched_families_error() {
        let a = MinHasher::new(64, 1).signature(&set(10, 0..5));
        let b = MinHasher::new(64, 2).signature(&set(10, 0..5));
        let c = MinHasher::new(32, 1).signature(&set(10, 0..5));
        assert_eq!(minhash_estimate(&a, &b), Err(Error::SignatureMismatch));
        assert_eq!(minhash_estimate(&a, &c), Err(Error::SignatureMismatch));
    }

    #[test]
    fn verdict_examples() {
        let v = Validator::new(0.1, SimilarityMode::MinHash, MinHasher::default()).unwrap();
        let a = set(100, 0..50);
        assert_eq!(v.validate(&a, &a), Verdict::Reject);
        assert_eq!(v.validate(&a, &set(100, 50..100)), Verdict::Accept);
        assert_eq!(verdict(0.95, 0.1), Verdict::Reject);
        assert_eq!(verdict(0.9, 0.1), Verdict::Accept);
        assert!(Validator::new(1.5, SimilarityMode::Exact, MinHasher::default()).is_err());
    }

    #[test]
    fn growing_overlap_never_flips_reject_to_accept() {
        // union fixed at 0..200, proposal fixed at 0..100, compound grows leftward
        let proposal = set(200, 0..100);
        for mode in [SimilarityMode::Exact, SimilarityMode::MinHash] {
            let v = Validator::new(0.6, mode, MinHasher::default()).unwrap();
            let mut rejected = false;
            let mut last_sim = -1.0;
            for overlap in 0..=100 {
                let compound = set(200, 100 - overlap..200);
                let sim = v.similarity(&proposal, &compound);
                assert!(sim >= last_sim);
                last_sim = sim;
                match v.validate(&proposal, &compound) {
                    Verdict::Reject => rejected = true,
                    Verdict::Accept => assert!(!rejected, "{mode:?} flipped back at overlap {overlap}"),
                }
            }
            assert!(rejected);
        }
    }
}
