//! Convergence experiment over segmentation outputs of synthetic images.
//!
//! Atoms are the OIDT encodings of relevance maps, so two images share an
//! atom exactly when their maps are identical. The empty map stands for a
//! failed extraction.

use std::io::Write;

use oidd_core::empdist::{self, ConvergenceReport, DiscreteDistribution};
use oidd_core::felzseg::RelevanceExtractor;
use oidd_core::synth::{self, SynthSpec};
use oidd_core::BinaryMap;

use crate::error::Result;
use crate::params::DetectorParams;
use crate::tensorio;

pub type Atom = Vec<u8>;

/// Empirical distribution of the relevance maps of the first `images`
/// training-split images, plus the failure atom.
pub fn synthetic_target(spec: &SynthSpec, params: &DetectorParams, images: usize) -> Result<(DiscreteDistribution<Atom>, Atom)> {
    let corpus = synth::generate_synthetic(spec)?;
    let extractor = params.expert();
    let atoms = corpus
        .in_dist_train
        .iter()
        .take(images.max(1))
        .map(|it| extractor.extract(&it.image).map(|m| tensorio::binary_map_bytes(&m)))
        .collect::<oidd_core::Result<Vec<_>>>()?;
    let failure = tensorio::binary_map_bytes(&BinaryMap::zeros(spec.side, spec.side)?);
    Ok((empdist::empirical(&atoms)?, failure))
}

/// Runs one repetition with `D'` at distance `delta` from `target`.
pub fn run(
    target: &DiscreteDistribution<Atom>,
    failure: Atom,
    delta: f64,
    sizes: &[usize],
    seed: u64,
    rep: u64,
) -> Result<ConvergenceReport> {
    let sampling = empdist::delta_perturbed(target, delta, failure)?;
    let mut rng = empdist::repetition_rng(seed, rep);
    Ok(empdist::convergence_experiment(target, &sampling, delta, sizes, &mut rng)?)
}

/// CSV with columns `n,d_k,delta_bound`.
pub fn write_csv<W: Write>(w: W, report: &ConvergenceReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n", "d_k", "delta_bound"])?;
    for (n, d) in report.sizes.iter().zip(&report.distances) {
        out.write_record([n.to_string(), d.to_string(), report.delta_bound.to_string()])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}
