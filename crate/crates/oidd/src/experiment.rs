//! Scoring with any of the five detectors and the synthetic evaluation run.
//!
//! In-distribution training-style images are the positives of every report.
//! The negatives are the chosen split: `in_dist_shifted` (in-distribution
//! content on unseen backgrounds, where a good detector should show no
//! separation), `ood_spurious` (backgrounds only), `ood_novel` (glyphs of
//! no known class) or `ood` (both OOD kinds).

use std::io::Write;
use std::path::Path;

use oidd_core::metrics::{self, EvalReport, ScoredSample, Truth};
use oidd_core::odin::{self, LinearClassifier};
use oidd_core::refdetect::{self, ReferenceSet};
use oidd_core::segscore::{self, PipelineError};
use oidd_core::synth::{self, SynthItem, SynthSpec};
use oidd_core::{felzseg::RelevanceExtractor, DetectionScore, RgbImage, ScoreKind, SegmentationBackend};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::DetectorParams;

pub const EVAL_SPLITS: [&str; 4] = ["in_dist_shifted", "ood_spurious", "ood_novel", "ood"];

pub fn parse_detector(name: &str) -> Result<ScoreKind> {
    ScoreKind::from_name(&name.to_ascii_lowercase()).ok_or_else(|| Error::UnknownDetector(name.into()))
}

fn backend_err<E: Into<Error>>(e: PipelineError<E>) -> Error {
    match e {
        PipelineError::Core(e) => e.into(),
        PipelineError::Backend(e) => e.into(),
    }
}

/// Everything needed to score an image. The classifier is required by the
/// baseline, ODIN and ODS detectors, the reference set by SSIM-max.
pub struct Scorer<S> {
    pub params: DetectorParams,
    pub segmenter: S,
    pub classifier: Option<LinearClassifier>,
    pub refs: Option<ReferenceSet>,
}

impl<S> Scorer<S>
where
    S: SegmentationBackend,
    S::Error: Into<Error>,
{
    fn classifier(&self, kind: ScoreKind) -> Result<&LinearClassifier> {
        self.classifier.as_ref().ok_or_else(|| Error::MissingResource {
            detector: kind.name().into(),
            what: "a classifier",
        })
    }

    /// Checks that the resources for `kind` are present.
    pub fn ensure(&self, kind: ScoreKind) -> Result<()> {
        match kind {
            ScoreKind::Bls => Ok(()),
            ScoreKind::SsimMax => self.refs.as_ref().map(|_| ()).ok_or(Error::MissingResource {
                detector: kind.name().into(),
                what: "a reference set",
            }),
            _ => self.classifier(kind).map(|_| ()),
        }
    }

    pub fn score(&self, kind: ScoreKind, image: &RgbImage) -> Result<DetectionScore> {
        match kind {
            ScoreKind::Bls => segscore::bls_image(image, &self.segmenter).map_err(backend_err),
            ScoreKind::Ods => {
                segscore::ods(image, self.classifier(kind)?, &self.segmenter, &self.params.odin).map_err(backend_err)
            }
            ScoreKind::Baseline => Ok(odin::baseline_score(image, self.classifier(kind)?)?),
            ScoreKind::Odin => Ok(odin::odin_score(image, self.classifier(kind)?, &self.params.odin)?),
            ScoreKind::SsimMax => {
                self.ensure(kind)?;
                let refs = self.refs.as_ref().expect("checked");
                let relevant = self.params.expert().extract(image)?;
                let (value, _) = refdetect::ssim_max(&relevant, refs, &self.params.ssim)?;
                Ok(DetectionScore { value, kind })
            }
        }
    }

    /// Scores a batch in parallel; the output order matches the input.
    pub fn score_all(&self, kind: ScoreKind, images: &[&RgbImage]) -> Result<Vec<f64>>
    where
        S: Sync,
    {
        self.ensure(kind)?;
        images
            .par_iter()
            .map(|img| self.score(kind, img).map(|s| s.value))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub detectors: Vec<String>,
    pub splits: Vec<String>,
    pub params: DetectorParams,
    pub synth: SynthSpec,
    /// Seed for reference-set sampling.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            detectors: ScoreKind::ALL.iter().map(|k| k.name().to_string()).collect(),
            splits: EVAL_SPLITS.iter().map(|s| s.to_string()).collect(),
            params: DetectorParams::default(),
            synth: SynthSpec::default(),
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub tag: String,
    pub truth: String,
    pub detector: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorReport {
    pub detector: ScoreKind,
    pub split: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub detector: String,
    pub split: String,
    pub auroc: f64,
    pub tnr_at_95tpr: f64,
    pub epsilon: f64,
    pub positives: usize,
    pub negatives: usize,
    pub roc: Vec<[f64; 2]>,
}

impl DetectorReport {
    pub fn to_json(&self) -> ReportJson {
        ReportJson {
            detector: self.detector.name().into(),
            split: self.split.clone(),
            auroc: self.report.auroc,
            tnr_at_95tpr: self.report.tnr_at_95tpr,
            epsilon: self.report.epsilon_at_95tpr,
            positives: self.report.positives,
            negatives: self.report.negatives,
            roc: self.report.roc.iter().map(|p| [p.fpr, p.tpr]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub reports: Vec<DetectorReport>,
    pub samples: Vec<SampleRow>,
}

impl ExperimentResult {
    pub fn report(&self, detector: ScoreKind, split: &str) -> Option<&EvalReport> {
        self.reports
            .iter()
            .find(|r| r.detector == detector && r.split == split)
            .map(|r| &r.report)
    }
}

fn split_items<'a>(corpus: &'a synth::SynthCorpus, split: &str) -> Result<Vec<(usize, &'a SynthItem)>> {
    let ood_kind = |tag: &'static str| -> Vec<(usize, &SynthItem)> {
        corpus.ood.iter().enumerate().filter(|(_, it)| it.kind.tag() == tag).collect()
    };
    Ok(match split {
        "in_dist_shifted" => corpus.in_dist_shifted.iter().enumerate().collect(),
        "ood" => corpus.ood.iter().enumerate().collect(),
        "ood_spurious" => ood_kind("ood_spurious"),
        "ood_novel" => ood_kind("ood_novel"),
        other => return Err(Error::MissingSplit(other.into())),
    })
}

fn tag(item: &SynthItem, index: usize) -> String {
    format!("{}/{index:04}", item.kind.tag())
}

/// Generates the synthetic corpus, fits the classifier and builds the
/// reference set on the training split, then scores every requested
/// (detector, split) pair. Reports follow the config order, detectors outer.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let detectors: Vec<ScoreKind> = config.detectors.iter().map(|d| parse_detector(d)).collect::<Result<_>>()?;
    if detectors.is_empty() || config.splits.is_empty() {
        return Err(Error::Invalid("config needs at least one detector and one split".into()));
    }
    config.params.validate()?;
    if config.params.num_classes != config.synth.num_classes {
        return Err(Error::Invalid("params.num_classes must equal synth.num_classes".into()));
    }
    let corpus = synth::generate_synthetic(&config.synth)?;
    let negatives: Vec<(String, Vec<(usize, &SynthItem)>)> = config
        .splits
        .iter()
        .map(|s| Ok((s.clone(), split_items(&corpus, s)?)))
        .collect::<Result<_>>()?;

    let needs_clf = detectors
        .iter()
        .any(|k| matches!(k, ScoreKind::Ods | ScoreKind::Baseline | ScoreKind::Odin));
    let classifier = if needs_clf {
        let train: Vec<(&RgbImage, usize)> = corpus
            .in_dist_train
            .iter()
            .map(|it| (&it.image, it.label.expect("training items are labeled")))
            .collect();
        Some(odin::fit_linear_classifier(&train, config.params.num_classes, &config.params.fit)?)
    } else {
        None
    };
    let refs = if detectors.contains(&ScoreKind::SsimMax) {
        Some(refdetect::build_reference_set(
            &synth::labeled(&corpus.in_dist_train),
            config.params.num_classes,
            &config.params.expert(),
            config.seed,
        )?)
    } else {
        None
    };
    let scorer = Scorer {
        params: config.params.clone(),
        segmenter: config.params.toy_segmenter()?,
        classifier,
        refs,
    };

    // every item is scored once per detector: positives, then each split
    // (items shared between splits are looked up, not rescored)
    let mut ordered: Vec<(String, Truth, &RgbImage)> = corpus
        .in_dist_train
        .iter()
        .enumerate()
        .map(|(i, it)| (tag(it, i), Truth::InDistribution, &it.image))
        .collect();
    let positives = ordered.len();
    for (_, items) in &negatives {
        for &(i, it) in items {
            let t = tag(it, i);
            if !ordered.iter().any(|(existing, _, _)| *existing == t) {
                let truth = if it.label.is_some() { Truth::InDistribution } else { Truth::Ood };
                ordered.push((t, truth, &it.image));
            }
        }
    }
    let images: Vec<&RgbImage> = ordered.iter().map(|(_, _, img)| *img).collect();

    let mut reports = Vec::new();
    let mut samples = Vec::new();
    for &kind in &detectors {
        let scores = scorer.score_all(kind, &images)?;
        for ((t, truth, _), &score) in ordered.iter().zip(&scores) {
            samples.push(SampleRow {
                tag: t.clone(),
                truth: truth.name().into(),
                detector: kind.name().into(),
                score,
            });
        }
        let lookup = |t: &str| {
            let at = ordered.iter().position(|(e, _, _)| e == t).expect("scored");
            scores[at]
        };
        for (split, items) in &negatives {
            let mut set: Vec<ScoredSample> = ordered[..positives]
                .iter()
                .zip(&scores)
                .map(|((t, _, _), &s)| ScoredSample::new(s, Truth::InDistribution, t.clone()))
                .collect();
            for &(i, it) in items {
                let t = tag(it, i);
                set.push(ScoredSample::new(lookup(&t), Truth::Ood, t));
            }
            reports.push(DetectorReport {
                detector: kind,
                split: split.clone(),
                report: metrics::evaluate(&set)?,
            });
        }
    }
    Ok(ExperimentResult { reports, samples })
}

pub fn write_samples_csv<W: Write>(w: W, rows: &[SampleRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_roc_csv<W: Write>(w: W, reports: &[DetectorReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["detector", "split", "fpr", "tpr"])?;
    for r in reports {
        for p in &r.report.roc {
            out.write_record([
                r.detector.name(),
                r.split.as_str(),
                &p.fpr.to_string(),
                &p.tpr.to_string(),
            ])?;
        }
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Writes `reports.json`, `samples.csv` and `roc.csv` into `dir`.
pub fn write_outputs(dir: impl AsRef<Path>, result: &ExperimentResult) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json: Vec<ReportJson> = result.reports.iter().map(DetectorReport::to_json).collect();
    crate::params::write_json(dir.join("reports.json"), &json)?;
    let open = |name: &str| {
        let p = dir.join(name);
        std::fs::File::create(&p).map_err(|e| Error::io(p, e))
    };
    write_samples_csv(open("samples.csv")?, &result.samples)?;
    write_roc_csv(open("roc.csv")?, &result.reports)?;
    Ok(())
}
