//! Finite discrete distributions, the empirical estimator and the sup-norm
//! distance between probability mass functions.
//!
//! The convergence experiment draws samples from a sampling distribution
//! `D'` placed at a known distance `delta` from a target `D_I`, and tracks the
//! distance of the empirical measure to the target as the sample grows. By
//! the triangle inequality that distance is at most the empirical-to-`D'`
//! distance plus `delta`, and the first term vanishes as `n` grows.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Probability mass function over finitely many distinct atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution<A: Ord> {
    masses: BTreeMap<A, f64>,
}

impl<A: Ord + Clone> DiscreteDistribution<A> {
    pub fn new<I: IntoIterator<Item = (A, f64)>>(pairs: I) -> Result<Self> {
        let mut masses = BTreeMap::new();
        for (atom, p) in pairs {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::InvalidDistribution("masses must be finite and >= 0"));
            }
            if masses.insert(atom, p).is_some() {
                return Err(Error::InvalidDistribution("atoms must be distinct"));
            }
        }
        if masses.is_empty() {
            return Err(Error::InvalidDistribution("empty support"));
        }
        let total: f64 = masses.values().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution("masses must sum to 1"));
        }
        Ok(Self { masses })
    }

    /// Mass of `atom`, 0 outside the support.
    pub fn mass(&self, atom: &A) -> f64 {
        self.masses.get(atom).copied().unwrap_or(0.0)
    }

    pub fn support(&self) -> impl Iterator<Item = &A> {
        self.masses.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&A, f64)> {
        self.masses.iter().map(|(a, &p)| (a, p))
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// `n` iid draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<A> {
        let atoms: Vec<&A> = self.masses.keys().collect();
        let weights: Vec<f64> = self.masses.values().copied().collect();
        let index = WeightedIndex::new(&weights).expect("validated masses");
        (0..n).map(|_| atoms[index.sample(rng)].clone()).collect()
    }
}

/// Relative frequencies of the observed atoms.
pub fn empirical<A: Ord + Clone>(samples: &[A]) -> Result<DiscreteDistribution<A>> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut counts: BTreeMap<A, usize> = BTreeMap::new();
    for s in samples {
        *counts.entry(s.clone()).or_insert(0) += 1;
    }
    let n = samples.len() as f64;
    Ok(DiscreteDistribution {
        masses: counts.into_iter().map(|(a, c)| (a, c as f64 / n)).collect(),
    })
}

/// `sup_x |p(x) - q(x)|` over the union of both supports.
pub fn d_k<A: Ord + Clone>(p: &DiscreteDistribution<A>, q: &DiscreteDistribution<A>) -> f64 {
    let from_p = p.iter().map(|(a, m)| (m - q.mass(a)).abs());
    let only_q = q
        .iter()
        .filter(|(a, _)| !p.masses.contains_key(*a))
        .map(|(_, m)| m);
    from_p.chain(only_q).fold(0.0, f64::max)
}

/// Builds a sampling distribution at distance exactly `delta` from `target`
/// by moving `delta` mass from the most probable atom (smallest such atom on
/// ties) to `failure_atom`, the extractor's failure output (for instance the
/// empty image). `failure_atom` may already be in the support.
pub fn delta_perturbed<A: Ord + Clone>(
    target: &DiscreteDistribution<A>,
    delta: f64,
    failure_atom: A,
) -> Result<DiscreteDistribution<A>> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter("delta must be >= 0"));
    }
    if delta == 0.0 {
        return Ok(target.clone());
    }
    let (donor, donor_mass) = target
        .iter()
        .filter(|(a, _)| **a != failure_atom)
        .fold(None::<(&A, f64)>, |best, (a, m)| match best {
            Some((_, bm)) if bm >= m => best,
            _ => Some((a, m)),
        })
        .ok_or(Error::InvalidParameter("target has no atom other than the failure atom"))?;
    if donor_mass < delta {
        return Err(Error::InvalidParameter("delta exceeds the largest atom mass"));
    }
    let mut masses = target.masses.clone();
    let donor = donor.clone();
    *masses.get_mut(&donor).expect("donor in support") -= delta;
    *masses.entry(failure_atom).or_insert(0.0) += delta;
    Ok(DiscreteDistribution { masses })
}

/// Distances recorded by one convergence run.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub sizes: Vec<usize>,
    /// `d_k(empirical_n, target)` for each size.
    pub distances: Vec<f64>,
    /// `d_k(empirical_n, sampling distribution)` for each size.
    pub sampling_distances: Vec<f64>,
    /// `d_k(sampling distribution, target)`.
    pub sampling_gap: f64,
    pub delta_bound: f64,
}

impl ConvergenceReport {
    /// Every recorded distance obeys
    /// `d(emp, target) <= d(emp, D') + d(D', target)`, up to rounding.
    pub fn triangle_holds(&self) -> bool {
        self.distances
            .iter()
            .zip(&self.sampling_distances)
            .all(|(d, s)| *d <= s + self.sampling_gap + 1e-12)
    }

    /// Distances strictly decrease across sizes.
    pub fn strictly_decreasing(&self) -> bool {
        self.distances.windows(2).all(|w| w[1] < w[0])
    }
}

/// Child seed stream for repetition `rep`; streams of different repetitions
/// never overlap, so results do not depend on scheduling.
pub fn repetition_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// For each size, draws a fresh iid sample from `sampling`, forms its
/// empirical measure and records its distance to `target`.
pub fn convergence_experiment<A: Ord + Clone, R: Rng + ?Sized>(
    target: &DiscreteDistribution<A>,
    sampling: &DiscreteDistribution<A>,
    delta_bound: f64,
    sizes: &[usize],
    rng: &mut R,
) -> Result<ConvergenceReport> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::InvalidParameter("sizes must be non-empty and >= 1"));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("sizes must be strictly ascending"));
    }
    let sampling_gap = d_k(sampling, target);
    let mut distances = Vec::with_capacity(sizes.len());
    let mut sampling_distances = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let emp = empirical(&sampling.sample(rng, n))?;
        distances.push(d_k(&emp, target));
        sampling_distances.push(d_k(&emp, sampling));
    }
    Ok(ConvergenceReport {
        sizes: sizes.to_vec(),
        distances,
        sampling_distances,
        sampling_gap,
        delta_bound,
    })
}
