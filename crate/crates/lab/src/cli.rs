//! Command-line front door.
//!
//! Exit codes: 0 success, 2 validation error (including argument parsing),
//! 3 numerical failure (rank-deficient input, degenerate subspace or
//! direction, collapsed acceptance rate, failed selftest), 1 I/O error.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use cube_shadows_core::error::Error as CoreError;
use cube_shadows_core::moments::body_report;
use cube_shadows_core::sampler::{rejection_sample, sample_uniform, SampleBatch};
use cube_shadows_core::subspace::Subspace;
use cube_shadows_core::tiling::{enumerate_tiling, Face, TilingTolerances};

use crate::formats::{
    self, csv_meta_header, emit, float17, histogram_export, lemma31_export, lipschitz_export,
    summary_export, Meta, MomentReportExport, TilingExport,
};
use crate::grassmann::{
    deviation_histogram, ensemble_run_streamed, lemma31_experiment, lipschitz_probe,
    EnsembleConfig, EnsembleRecord,
};
use crate::selftest;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
    Io(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Validation(m) => m.clone(),
            CliError::Numerical(m) => m.clone(),
            CliError::Io(e) => format!("{e:#}"),
        }
    }
}

fn classify(e: CoreError) -> CliError {
    match e {
        CoreError::RankDeficient { .. }
        | CoreError::DegenerateSubspace
        | CoreError::DegenerateDirection { .. }
        | CoreError::AcceptanceTooLow { .. }
        | CoreError::NumericalFailure(_) => CliError::Numerical(e.to_string()),
        _ => CliError::Validation(e.to_string()),
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        // ensemble trials surface core errors through anyhow; keep their
        // numerical/validation classification
        match e.downcast::<CoreError>() {
            Ok(core) => classify(core),
            Err(e) => CliError::Io(e),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(
    name = "cube-shadows",
    version,
    about = "Exact tilings, moments and Monte Carlo verification for cube shadows"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Base RNG seed (every artifact records it).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker thread cap; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Output file; stdout when absent. Relative paths honor
    /// CUBE_SHADOWS_OUTPUT_DIR.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Output format (defaults: csv for sample/ensemble, json otherwise).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact tiling + moment report of one shadow.
    Analyze {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Load the subspace from a file instead of drawing it Haar-random.
        #[arg(long)]
        subspace_file: Option<PathBuf>,
        /// Sweep direction in E⊥-coordinates (comma-separated floats).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        direction: Option<Vec<f64>>,
        /// Also export the tiling as JSON to this path.
        #[arg(long)]
        tiling_out: Option<PathBuf>,
    },
    /// Haar-ensemble run: per-subspace records plus a summary.
    Ensemble {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        /// Report the fraction of subspaces whose ratio exceeds this.
        #[arg(long, default_value_t = 1.0)]
        ratio_threshold: f64,
    },
    /// Empirical Grassmannian mean of the face moment vs the closed form.
    Lemma31 {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 2000)]
        trials: u64,
        /// Fixed coordinates of the probed face (1-based, comma-separated);
        /// defaults to 1..k.
        #[arg(long, value_delimiter = ',')]
        face_indices: Option<Vec<u32>>,
        /// Signs of the probed face as a +/- string, e.g. "+-".
        #[arg(long)]
        face_signs: Option<String>,
    },
    /// Lipschitz probe of the face moment against projector distances.
    Lipschitz {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 1000)]
        pairs: u64,
        #[arg(long, value_delimiter = ',')]
        face_indices: Option<Vec<u32>>,
        #[arg(long)]
        face_signs: Option<String>,
    },
    /// Histogram of face-moment deviations from the Grassmannian mean.
    Histogram {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 500)]
        trials: u64,
        #[arg(long, default_value_t = 40)]
        bins: usize,
    },
    /// Draw uniform samples from a shadow.
    Sample {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        subspace_file: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        n_samples: usize,
        #[arg(long, value_enum, default_value_t = Method::Exact)]
        method: Method,
    },
    /// Run the built-in verification suites.
    Selftest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Exact,
    Rejection,
}

fn validate_nk(n: usize, k: usize) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Validation("n must be positive".into()));
    }
    if k >= n {
        return Err(CliError::Validation(format!("k must be < n (got n={n}, k={k})")));
    }
    if k == 0 {
        return Err(CliError::Validation("k must be at least 1".into()));
    }
    Ok(())
}

fn resolve_subspace(
    n: usize,
    k: usize,
    file: Option<&PathBuf>,
    seed: u64,
) -> Result<Subspace, CliError> {
    match file {
        Some(path) => formats::load_subspace(path).map_err(|e| {
            // distinguish unreadable/malformed files from numerically bad rows
            let full = format!("{e:#}");
            if full.contains("subspace rows rejected") {
                CliError::Numerical(full)
            } else {
                CliError::Validation(full)
            }
        }),
        None => {
            validate_nk(n, k)?;
            Subspace::haar(n, k, seed).map_err(classify)
        }
    }
}

fn build_face(
    n: usize,
    k: usize,
    indices: Option<Vec<u32>>,
    signs: Option<String>,
) -> Result<Face, CliError> {
    let fixed = indices.unwrap_or_else(|| (1..=k as u32).collect());
    let signs = match signs {
        None => vec![1i8; fixed.len()],
        Some(text) => text
            .chars()
            .map(|c| match c {
                '+' => Ok(1i8),
                '-' => Ok(-1i8),
                other => Err(CliError::Validation(format!(
                    "face signs must be a +/- string, found `{other}`"
                ))),
            })
            .collect::<Result<_, _>>()?,
    };
    Face::new(fixed, signs, n).map_err(classify)
}

fn init_threads(threads: usize) {
    if threads > 0 {
        // ignore the error if a global pool already exists (tests)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

pub fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    dispatch(cli)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    init_threads(cli.threads);
    let meta = Meta::new(cli.seed, command_line());
    let seed = cli.seed;
    let output = cli.output.as_deref();
    let io = |e: anyhow::Error| CliError::from(e);

    match cli.command {
        Command::Analyze { n, k, subspace_file, direction, tiling_out } => {
            let s = resolve_subspace(n, k, subspace_file.as_ref(), seed)?;
            if let Some(d) = &direction {
                if d.len() != s.k() {
                    return Err(CliError::Validation(format!(
                        "direction must have k = {} coordinates, got {}",
                        s.k(),
                        d.len()
                    )));
                }
            }
            let t = enumerate_tiling(&s, direction.as_deref(), seed, &TilingTolerances::default())
                .map_err(classify)?;
            let report = body_report(&t).map_err(classify)?;
            let export = MomentReportExport::from_report(&report, meta.clone());
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => {
                    emit(output, formats::to_json_string(&export).map_err(io)?.as_bytes())
                        .map_err(io)?;
                }
                Format::Csv => {
                    let mut buf = Vec::new();
                    formats::write_report_csv(&mut buf, &meta, &export)
                        .map_err(|e| CliError::Io(e.into()))?;
                    emit(output, &buf).map_err(io)?;
                }
            }
            if let Some(path) = tiling_out {
                let tx = TilingExport::from_tiling(&t, meta.clone());
                let body = formats::to_json_string(&tx).map_err(io)?;
                emit(Some(&path), body.as_bytes()).map_err(io)?;
            }
            Ok(())
        }

        Command::Ensemble { n, k, trials, ratio_threshold } => {
            validate_nk(n, k)?;
            let mut cfg = EnsembleConfig::new(n, k, trials, seed);
            cfg.ratio_threshold = ratio_threshold;
            match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    // stream records as they complete (append-only)
                    let mut writer: Box<dyn std::io::Write> = match output {
                        Some(p) => {
                            let p = formats::resolve_output(p);
                            Box::new(
                                fs::File::create(&p)
                                    .map_err(|e| CliError::Io(anyhow::Error::new(e)))?,
                            )
                        }
                        None => Box::new(std::io::stdout()),
                    };
                    writer
                        .write_all(csv_meta_header(&meta).as_bytes())
                        .and_then(|_| writeln!(writer, "{}", formats::ENSEMBLE_CSV_HEADER))
                        .map_err(|e| CliError::Io(e.into()))?;
                    let mut sink = |r: &EnsembleRecord| -> anyhow::Result<()> {
                        writeln!(writer, "{}", formats::ensemble_record_row(r))?;
                        writer.flush()?;
                        Ok(())
                    };
                    let (_records, summary) = ensemble_run_streamed(&cfg, &mut sink)?;
                    let sx = summary_export(&summary, n, k, meta.clone());
                    eprintln!("{}", formats::to_json_string(&sx).map_err(io)?.trim_end());
                }
                Format::Json => {
                    let (records, summary) = ensemble_run_streamed(&cfg, &mut |_| Ok(()))?;
                    #[derive(serde::Serialize)]
                    struct EnsembleJson {
                        meta: Meta,
                        summary: crate::formats::EnsembleSummaryExport,
                        records: Vec<RecordJson>,
                    }
                    #[derive(serde::Serialize)]
                    struct RecordJson {
                        seed: u64,
                        n: usize,
                        k: usize,
                        ratio: f64,
                        mean_sq: f64,
                        variance: f64,
                        lambda_sq: f64,
                        max_face_dev: f64,
                        l: usize,
                        wall_time: f64,
                    }
                    let body = EnsembleJson {
                        meta: meta.clone(),
                        summary: summary_export(&summary, n, k, meta.clone()),
                        records: records
                            .iter()
                            .map(|r| RecordJson {
                                seed: r.seed,
                                n: r.n,
                                k: r.k,
                                ratio: r.ratio,
                                mean_sq: r.mean_sq,
                                variance: r.variance,
                                lambda_sq: r.lambda_sq,
                                max_face_dev: r.max_face_dev,
                                l: r.l,
                                wall_time: r.wall_time,
                            })
                            .collect(),
                    };
                    emit(output, formats::to_json_string(&body).map_err(io)?.as_bytes())
                        .map_err(io)?;
                }
            }
            Ok(())
        }

        Command::Lemma31 { n, k, trials, face_indices, face_signs } => {
            validate_nk(n, k)?;
            let face = build_face(n, k, face_indices, face_signs)?;
            let record = lemma31_experiment(n, k, &face, trials, seed).map_err(classify)?;
            let export = lemma31_export(&record, meta.clone());
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => {
                    emit(output, formats::to_json_string(&export).map_err(io)?.as_bytes())
                        .map_err(io)?;
                }
                Format::Csv => {
                    let mut buf = String::new();
                    buf.push_str(&csv_meta_header(&meta));
                    buf.push_str("n,k,trials,empirical_mean,se,target,z_score\n");
                    let _ = writeln!(
                        buf,
                        "{},{},{},{},{},{},{}",
                        export.n,
                        export.k,
                        export.trials,
                        float17(export.empirical_mean),
                        float17(export.se),
                        float17(export.target),
                        float17(export.z_score)
                    );
                    emit(output, buf.as_bytes()).map_err(io)?;
                }
            }
            Ok(())
        }

        Command::Lipschitz { n, k, pairs, face_indices, face_signs } => {
            validate_nk(n, k)?;
            let face = build_face(n, k, face_indices, face_signs)?;
            let probe = lipschitz_probe(n, k, &face, pairs, seed).map_err(classify)?;
            let export = lipschitz_export(&probe, meta.clone());
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => {
                    emit(output, formats::to_json_string(&export).map_err(io)?.as_bytes())
                        .map_err(io)?;
                }
                Format::Csv => {
                    let mut buf = String::new();
                    buf.push_str(&csv_meta_header(&meta));
                    let _ = writeln!(buf, "# bound_op: {}", float17(export.bound_op));
                    let _ =
                        writeln!(buf, "# max_ratio_op: {}", float17(export.max_ratio_op));
                    buf.push_str("seed1,seed2,delta_f,op_dist,hs_dist\n");
                    for p in &export.pairs {
                        let _ = writeln!(
                            buf,
                            "{},{},{},{},{}",
                            p.seed1,
                            p.seed2,
                            float17(p.delta_f),
                            float17(p.op_dist),
                            float17(p.hs_dist)
                        );
                    }
                    emit(output, buf.as_bytes()).map_err(io)?;
                }
            }
            Ok(())
        }

        Command::Histogram { n, k, trials, bins } => {
            validate_nk(n, k)?;
            let h = deviation_histogram(n, k, trials, bins, seed).map_err(classify)?;
            let export = histogram_export(&h, meta.clone());
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => {
                    emit(output, formats::to_json_string(&export).map_err(io)?.as_bytes())
                        .map_err(io)?;
                }
                Format::Csv => {
                    let mut buf = String::new();
                    buf.push_str(&csv_meta_header(&meta));
                    buf.push_str("bin_lo,bin_hi,count\n");
                    for i in 0..export.counts.len() {
                        let _ = writeln!(
                            buf,
                            "{},{},{}",
                            float17(export.bin_edges[i]),
                            float17(export.bin_edges[i + 1]),
                            export.counts[i]
                        );
                    }
                    emit(output, buf.as_bytes()).map_err(io)?;
                }
            }
            Ok(())
        }

        Command::Sample { n, k, subspace_file, n_samples, method } => {
            let s = resolve_subspace(n, k, subspace_file.as_ref(), seed)?;
            let batch: SampleBatch = match method {
                Method::Exact => {
                    let t = enumerate_tiling(&s, None, seed, &TilingTolerances::default())
                        .map_err(classify)?;
                    sample_uniform(&t, n_samples, seed).map_err(classify)?
                }
                Method::Rejection => rejection_sample(&s, n_samples, seed).map_err(classify)?,
            };
            match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    let mut buf = Vec::new();
                    formats::write_samples_csv(&mut buf, &meta, &batch)
                        .map_err(|e| CliError::Io(e.into()))?;
                    emit(output, &buf).map_err(io)?;
                }
                Format::Json => {
                    #[derive(serde::Serialize)]
                    struct SamplesJson {
                        meta: Meta,
                        dim: usize,
                        method: &'static str,
                        points: Vec<Vec<f64>>,
                        tile_ids: Vec<i64>,
                    }
                    let body = SamplesJson {
                        meta: meta.clone(),
                        dim: batch.dim,
                        method: match method {
                            Method::Exact => "exact",
                            Method::Rejection => "rejection",
                        },
                        points: (0..batch.len()).map(|i| batch.point(i).to_vec()).collect(),
                        tile_ids: if batch.tile_ids.is_empty() {
                            vec![-1; batch.len()]
                        } else {
                            batch.tile_ids.iter().map(|&t| t as i64).collect()
                        },
                    };
                    emit(output, formats::to_json_string(&body).map_err(io)?.as_bytes())
                        .map_err(io)?;
                }
            }
            Ok(())
        }

        Command::Selftest => {
            let mut out = std::io::stdout();
            let ok = selftest::run_all(&mut out).map_err(|e| CliError::Io(e.into()))?;
            if ok {
                Ok(())
            } else {
                Err(CliError::Numerical("selftest reported failures".into()))
            }
        }
    }
}
