use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use oidd::backend::FileSegmentation;
use oidd::core::felzseg::RelevanceExtractor;
use oidd::core::metrics;
use oidd::core::odin;
use oidd::core::refdetect;
use oidd::core::segscore::{self, v_score};
use oidd::core::synth::{self, SynthSpec};
use oidd::core::{BinaryMap, RgbImage, ScoreKind, SegmentationBackend, Verdict};
use oidd::experiment::{self, ExperimentConfig, Scorer};
use oidd::params;
use oidd::{convergence, corpus_io, refstore, tensorio, Error, Result};
use serde_json::json;

const EXIT_OOD: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;

#[derive(Parser)]
#[command(name = "oidd", version, about = "Out-of-intended-distribution detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus (PPM images, PGM masks, manifest).
    Synth {
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Overrides the seed of the spec.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment one image and write the result as an OIDT tensor.
    Segment {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        params: Option<PathBuf>,
        /// Precomputed segmentation map for `--method file`.
        #[arg(long)]
        segmap: Option<PathBuf>,
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reference-set commands.
    Refset {
        #[command(subcommand)]
        command: RefsetCommand,
    },
    /// Print the score of one image.
    Score {
        #[arg(long)]
        detector: String,
        #[command(flatten)]
        res: Resources,
        input: PathBuf,
    },
    /// Pick the threshold that accepts the target share of in-distribution images.
    Calibrate {
        #[arg(long)]
        detector: String,
        #[command(flatten)]
        res: Resources,
        /// Corpus directory written by `synth`.
        #[arg(long = "in-dist")]
        in_dist: PathBuf,
        #[arg(long, default_value = "in_dist_train")]
        split: String,
        #[arg(long = "target-tpr", default_value_t = 0.95)]
        target_tpr: f64,
    },
    /// Exit 0 for in-distribution, 1 for OOD; the verdict is printed as JSON.
    Detect {
        #[arg(long)]
        detector: String,
        #[arg(long)]
        epsilon: f64,
        #[command(flatten)]
        res: Resources,
        input: PathBuf,
    },
    /// Run the synthetic evaluation and write reports.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the linear classifier on a corpus split.
    FitClassifier {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "in_dist_train")]
        split: String,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render an OIDT map as a black and white PGM.
    Render {
        #[arg(long)]
        map: PathBuf,
        /// Class count for segmentation maps (f32 tensors).
        #[arg(long)]
        num_classes: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Distance of the empirical distribution of relevance maps to its target.
    Convergence {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        params: Option<PathBuf>,
        /// Number of training images forming the target distribution.
        #[arg(long, default_value_t = 40)]
        images: usize,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum RefsetCommand {
    /// Sample one image per class and store its relevance map.
    Build {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "in_dist_train")]
        split: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Felz,
    Toy,
    File,
}

/// Learned state and parameters shared by the scoring commands.
#[derive(Args)]
struct Resources {
    #[arg(long)]
    params: Option<PathBuf>,
    /// Classifier written by `fit-classifier` (baseline, odin, ods).
    #[arg(long)]
    classifier: Option<PathBuf>,
    /// Reference-set directory written by `refset build` (ssim).
    #[arg(long)]
    refs: Option<PathBuf>,
    /// Use this precomputed segmentation map instead of the toy segmenter.
    #[arg(long)]
    segmap: Option<PathBuf>,
}

enum Backend {
    Toy(oidd::core::toyseg::ToySegmenter),
    File(FileSegmentation),
}

impl SegmentationBackend for Backend {
    type Error = Error;

    fn segment(&self, image: &RgbImage) -> Result<oidd::core::SegMap> {
        match self {
            Backend::Toy(t) => Ok(t.segment_image(image)),
            Backend::File(f) => f.segment(image),
        }
    }
}

impl Resources {
    fn scorer(&self, kind: ScoreKind) -> Result<Scorer<Backend>> {
        let params = params::load_params(self.params.as_deref())?;
        let segmenter = match &self.segmap {
            Some(p) => Backend::File(FileSegmentation::new(p, params.num_classes)),
            None => Backend::Toy(params.toy_segmenter()?),
        };
        let classifier = self.classifier.as_ref().map(tensorio::read_classifier).transpose()?;
        let refs = match &self.refs {
            Some(dir) => {
                let (refs, manifest) = refstore::load_reference_set(dir)?;
                manifest.check_params(&params)?;
                Some(refs)
            }
            None => None,
        };
        let scorer = Scorer {
            params,
            segmenter,
            classifier,
            refs,
        };
        scorer.ensure(kind)?;
        Ok(scorer)
    }
}

fn print_json(v: &serde_json::Value) {
    // a closed stdout (e.g. piped into `head`) is not an error of ours
    let _ = writeln!(std::io::stdout(), "{v}");
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Synth { spec, seed, out } => {
            let mut spec: SynthSpec = match spec {
                Some(p) => params::read_json(p)?,
                None => SynthSpec::default(),
            };
            if let Some(s) = seed {
                spec.seed = s;
            }
            let corpus = synth::generate_synthetic(&spec)?;
            create_dir(&out)?;
            let manifest = corpus_io::write_corpus(&out, &spec, &corpus)?;
            print_json(&json!({"out": out, "items": manifest.items.len()}));
        }
        Command::Segment {
            method,
            params: p,
            segmap,
            input,
            out,
        } => {
            let params = params::load_params(p.as_deref())?;
            let image = tensorio::read_image(&input)?;
            match method {
                Method::Felz => {
                    let map = params.expert().extract(&image)?;
                    tensorio::write_binary_map(&out, &map)?;
                    print_json(&json!({"method": "felz", "foreground": map.count_ones()}));
                }
                Method::Toy => {
                    let map = params.toy_segmenter()?.segment_image(&image);
                    tensorio::write_segmap(&out, &map)?;
                    print_json(&json!({"method": "toy", "bls": segscore::bls(&map).value}));
                }
                Method::File => {
                    let path = segmap.ok_or(Error::MissingResource {
                        detector: "file".into(),
                        what: "--segmap",
                    })?;
                    let map = FileSegmentation::new(path, params.num_classes).segment(&image)?;
                    tensorio::write_segmap(&out, &map)?;
                    print_json(&json!({"method": "file", "bls": segscore::bls(&map).value}));
                }
            }
        }
        Command::Refset {
            command:
                RefsetCommand::Build {
                    corpus,
                    split,
                    seed,
                    params: p,
                    out,
                },
        } => {
            let params = params::load_params(p.as_deref())?;
            let corpus = corpus_io::read_corpus(&corpus)?;
            let labeled = corpus.labeled(&split)?;
            let refs = refdetect::build_reference_set(&labeled, params.num_classes, &params.expert(), seed)?;
            let manifest = refstore::save_reference_set(&out, &refs, &params)?;
            print_json(&json!({"out": out, "entries": manifest.entries.len(), "params_hash": manifest.params_hash}));
        }
        Command::Score { detector, res, input } => {
            let kind = experiment::parse_detector(&detector)?;
            let scorer = res.scorer(kind)?;
            let image = tensorio::read_image(&input)?;
            let score = scorer.score(kind, &image)?;
            print_json(&json!({"detector": kind.name(), "score": score.value}));
        }
        Command::Calibrate {
            detector,
            res,
            in_dist,
            split,
            target_tpr,
        } => {
            let kind = experiment::parse_detector(&detector)?;
            let scorer = res.scorer(kind)?;
            let corpus = corpus_io::read_corpus(&in_dist)?;
            let images: Vec<&RgbImage> = corpus.select(&split)?.into_iter().map(|it| &it.image).collect();
            let scores = scorer.score_all(kind, &images)?;
            let epsilon = metrics::calibrate_epsilon(&scores, target_tpr)?;
            let accepted = scores.iter().filter(|&&s| s >= epsilon).count();
            print_json(&json!({
                "detector": kind.name(),
                "epsilon": epsilon,
                "tpr": accepted as f64 / scores.len() as f64,
                "n": scores.len(),
            }));
        }
        Command::Detect {
            detector,
            epsilon,
            res,
            input,
        } => {
            if !(0.0..=1.0).contains(&epsilon) {
                return Err(Error::Invalid("--epsilon must lie in [0, 1]".into()));
            }
            let kind = experiment::parse_detector(&detector)?;
            let scorer = res.scorer(kind)?;
            let image = tensorio::read_image(&input)?;
            let score = scorer.score(kind, &image)?.value;
            let verdict = Verdict::from_score(score, epsilon);
            print_json(&json!({
                "detector": kind.name(),
                "score": score,
                "epsilon": epsilon,
                "ood": verdict.as_u8(),
                "verdict": if verdict.is_ood() { "ood" } else { "in_distribution" },
            }));
            if verdict.is_ood() {
                return Ok(EXIT_OOD);
            }
        }
        Command::Eval { config, out } => {
            let config: ExperimentConfig = match config {
                Some(p) => params::read_json(p)?,
                None => ExperimentConfig::default(),
            };
            let result = experiment::run_experiment(&config)?;
            experiment::write_outputs(&out, &result)?;
            let summary: Vec<_> = result
                .reports
                .iter()
                .map(|r| json!({"detector": r.detector.name(), "split": r.split, "auroc": r.report.auroc}))
                .collect();
            print_json(&json!({"out": out, "reports": summary}));
        }
        Command::FitClassifier {
            corpus,
            split,
            params: p,
            out,
        } => {
            let params = params::load_params(p.as_deref())?;
            let corpus = corpus_io::read_corpus(&corpus)?;
            let labeled = corpus.labeled(&split)?;
            let samples: Vec<(&RgbImage, usize)> = labeled.items.iter().map(|(x, l)| (x, *l)).collect();
            let clf = odin::fit_linear_classifier(&samples, params.num_classes, &params.fit)?;
            let correct = samples
                .iter()
                .filter(|(x, l)| {
                    use odin::Classifier;
                    odin::argmax(&clf.logits(x.as_slice())) == *l
                })
                .count();
            tensorio::write_classifier(&out, &clf)?;
            print_json(&json!({"out": out, "train_accuracy": correct as f64 / samples.len() as f64}));
        }
        Command::Render { map, num_classes, out } => {
            let t = tensorio::read_tensor(&map)?;
            let tensor_err = |source| Error::Tensor {
                path: map.clone(),
                source,
            };
            let mask = match t.dtype() {
                tensorio::DType::U8 => tensorio::as_binary_map(&t).map_err(tensor_err)?,
                tensorio::DType::F32 => {
                    let n = num_classes.ok_or(Error::MissingResource {
                        detector: "render".into(),
                        what: "--num-classes for a segmentation map",
                    })?;
                    let m = tensorio::as_segmap(&t, n).map_err(tensor_err)?;
                    let fg = m.pixels().map(|q| u8::from(v_score(q) != 0.0)).collect();
                    BinaryMap::new(m.height(), m.width(), fg)?
                }
            };
            tensorio::write_binary_pgm(&out, &mask)?;
            print_json(&json!({"out": out, "foreground": mask.count_ones()}));
        }
        Command::Convergence {
            spec,
            params: p,
            images,
            delta,
            sizes,
            seed,
            out,
        } => {
            let spec: SynthSpec = match spec {
                Some(p) => params::read_json(p)?,
                None => SynthSpec::default(),
            };
            let params = params::load_params(p.as_deref())?;
            let (target, failure) = convergence::synthetic_target(&spec, &params, images)?;
            let report = convergence::run(&target, failure, delta, &sizes, seed, 0)?;
            match out {
                Some(path) => {
                    let f = std::fs::File::create(&path).map_err(|e| Error::Io {
                        path: path.clone(),
                        source: e,
                    })?;
                    convergence::write_csv(f, &report)?;
                }
                None => convergence::write_csv(std::io::stdout().lock(), &report)?,
            }
        }
    }
    Ok(0)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::UnknownDetector(_) | Error::MissingSplit(_) | Error::MissingResource { .. } => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn report_error(kind: &str, message: &str) {
    let v = json!({"error": kind, "message": message});
    let _ = writeln!(std::io::stderr(), "{v}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            report_error("usage", e.to_string().trim_end());
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            ExitCode::from(exit_code(&e))
        }
    }
}
