//! Haar-ensemble experiments over the Grassmannian.
//!
//! Every experiment derives one standalone seed per trial (or per pair)
//! with `derive_seed`, so any single record can be reproduced in isolation
//! and parallel scheduling cannot change results. Closed-form targets:
//!
//! * the Grassmannian mean of the face moment is
//!   `(n-k)(n+2k)/(3n)`, independent of the face;
//! * the face-moment function `f(E) = E_F|P_E x|²` satisfies
//!   `|f(E₁) - f(E₂)| ≤ (8k/3)·‖P₁-P₂‖_op`, hence also
//!   `(8√2k/3)` against the orthogonal-group metric that dominates the
//!   operator norm;
//! * every face moment lies in `[(n-2k)/3, (n+2k)/3]`, so deviations from
//!   the Grassmannian mean can never exceed the width of that interval.

use std::time::Instant;

use anyhow::Result;
use rayon::prelude::*;

use cube_shadows_core::error::Error;
use cube_shadows_core::moments::{face_moment, BoundFlags};
use cube_shadows_core::rng::derive_seed;
use cube_shadows_core::subspace::Subspace;
use cube_shadows_core::tiling::{Face, TilingTolerances};

use crate::parallel::streaming_report_par;

/// Trials are streamed to the sink in groups of this size, in trial order.
const WRITE_GROUP: u64 = 16;

#[derive(Clone, Debug)]
pub struct EnsembleConfig {
    pub n: usize,
    pub k: usize,
    pub trials: u64,
    pub seed: u64,
    /// Threshold for the reported exceedance fraction.
    pub ratio_threshold: f64,
    pub tolerances: TilingTolerances,
}

impl EnsembleConfig {
    pub fn new(n: usize, k: usize, trials: u64, seed: u64) -> Self {
        Self {
            n,
            k,
            trials,
            seed,
            ratio_threshold: 1.0,
            tolerances: TilingTolerances::default(),
        }
    }
}

/// Per-subspace record of one ensemble trial.
#[derive(Clone, Debug)]
pub struct EnsembleRecord {
    /// Derived seed that regenerates this subspace standalone.
    pub seed: u64,
    pub n: usize,
    pub k: usize,
    pub ratio: f64,
    pub mean_sq: f64,
    pub variance: f64,
    pub lambda_sq: f64,
    pub max_face_dev: f64,
    /// Tile count.
    pub l: usize,
    /// Seconds spent on this trial (informational; not covered by the
    /// byte-determinism guarantee).
    pub wall_time: f64,
    pub flags: BoundFlags,
}

#[derive(Clone, Debug)]
pub struct EnsembleSummary {
    pub trials: u64,
    pub max_ratio: f64,
    /// `(q, value)` pairs for q in {0, 0.25, 0.5, 0.75, 0.9, 1}.
    pub ratio_quantiles: Vec<(f64, f64)>,
    /// Fraction of records violating any closed-form bound (must be 0).
    pub violation_fraction: f64,
    pub ratio_threshold: f64,
    /// Fraction of records with ratio above the threshold.
    pub exceed_fraction: f64,
}

fn run_trial(cfg: &EnsembleConfig, trial: u64) -> Result<EnsembleRecord, Error> {
    let trial_seed = derive_seed(cfg.seed, trial);
    let start = Instant::now();
    let s = Subspace::haar(cfg.n, cfg.k, trial_seed)?;
    let (report, _xi) = streaming_report_par(&s, None, trial_seed, &cfg.tolerances)?;
    Ok(EnsembleRecord {
        seed: trial_seed,
        n: cfg.n,
        k: cfg.k,
        ratio: report.ratio,
        mean_sq: report.mean_sq,
        variance: report.variance,
        lambda_sq: report.lambda_sq,
        max_face_dev: report.max_face_dev,
        l: report.l,
        wall_time: start.elapsed().as_secs_f64(),
        flags: report.bound_flags,
    })
}

/// Run the ensemble, streaming records to `sink` in trial order as groups
/// complete (append-only, so a crash keeps every finished group).
pub fn ensemble_run_streamed(
    cfg: &EnsembleConfig,
    sink: &mut dyn FnMut(&EnsembleRecord) -> Result<()>,
) -> Result<(Vec<EnsembleRecord>, EnsembleSummary)> {
    if cfg.trials == 0 {
        return Err(anyhow::anyhow!("trials must be at least 1"));
    }
    if cfg.k < 1 || cfg.k >= cfg.n {
        return Err(anyhow::anyhow!("k must be < n (and at least 1)"));
    }
    let mut records: Vec<EnsembleRecord> = Vec::with_capacity(cfg.trials as usize);
    let mut lo = 0u64;
    while lo < cfg.trials {
        let hi = (lo + WRITE_GROUP).min(cfg.trials);
        let group: Result<Vec<EnsembleRecord>, Error> =
            (lo..hi).into_par_iter().map(|t| run_trial(cfg, t)).collect();
        let group = group?;
        for r in &group {
            sink(r)?;
        }
        records.extend(group);
        lo = hi;
    }
    let summary = summarize(&records, cfg.ratio_threshold);
    Ok((records, summary))
}

/// Run the ensemble without streaming output.
pub fn ensemble_run(cfg: &EnsembleConfig) -> Result<(Vec<EnsembleRecord>, EnsembleSummary)> {
    ensemble_run_streamed(cfg, &mut |_| Ok(()))
}

fn summarize(records: &[EnsembleRecord], threshold: f64) -> EnsembleSummary {
    let mut ratios: Vec<f64> = records.iter().map(|r| r.ratio).collect();
    ratios.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
    let quantile = |q: f64| -> f64 {
        let idx = ((ratios.len() - 1) as f64 * q).round() as usize;
        ratios[idx]
    };
    let violations = records
        .iter()
        .filter(|r| {
            !(r.flags.mean_within_bounds
                && r.flags.lambda_above_lower
                && r.flags.face_dev_within_bound)
        })
        .count();
    let exceed = records.iter().filter(|r| r.ratio > threshold).count();
    EnsembleSummary {
        trials: records.len() as u64,
        max_ratio: *ratios.last().expect("nonempty ensemble"),
        ratio_quantiles: [0.0, 0.25, 0.5, 0.75, 0.9, 1.0]
            .iter()
            .map(|&q| (q, quantile(q)))
            .collect(),
        violation_fraction: violations as f64 / records.len() as f64,
        ratio_threshold: threshold,
        exceed_fraction: exceed as f64 / records.len() as f64,
    }
}

// ---------------------------------------------------------------------------
// Grassmannian mean of the face moment
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct Lemma31Record {
    pub n: usize,
    pub k: usize,
    pub face: Face,
    pub trials: u64,
    pub empirical_mean: f64,
    pub se: f64,
    /// `(n-k)(n+2k)/(3n)`.
    pub target: f64,
    pub z_score: f64,
}

/// Closed-form Grassmannian mean of `E_F|P_E x|²` (face-independent).
pub fn grassmann_face_moment_mean(n: usize, k: usize) -> f64 {
    let (nf, kf) = (n as f64, k as f64);
    (nf - kf) * (nf + 2.0 * kf) / (3.0 * nf)
}

/// Estimate the Grassmannian mean of the face moment and compare with the
/// closed form.
pub fn lemma31_experiment(
    n: usize,
    k: usize,
    face: &Face,
    trials: u64,
    seed: u64,
) -> Result<Lemma31Record, Error> {
    if trials < 2 {
        return Err(Error::InvalidParameter("need at least 2 trials".into()));
    }
    let values: Result<Vec<f64>, Error> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = Subspace::haar(n, k, derive_seed(seed, t))?;
            face_moment(&s, face)
        })
        .collect();
    let values = values?;
    let nf = trials as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    let se = (var / nf).sqrt();
    let target = grassmann_face_moment_mean(n, k);
    Ok(Lemma31Record {
        n,
        k,
        face: face.clone(),
        trials,
        empirical_mean: mean,
        se,
        target,
        z_score: (mean - target) / se.max(f64::MIN_POSITIVE),
    })
}

// ---------------------------------------------------------------------------
// Lipschitz probe of the face moment
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct PairRecord {
    pub seed1: u64,
    pub seed2: u64,
    pub delta_f: f64,
    pub op_dist: f64,
    pub hs_dist: f64,
}

#[derive(Clone, Debug)]
pub struct LipschitzProbe {
    pub n: usize,
    pub k: usize,
    pub face: Face,
    pub pairs: Vec<PairRecord>,
    /// `8k/3` — the bound against the projector operator norm.
    pub bound_op: f64,
    /// `8√2·k/3` — the bound against the orthogonal-group metric.
    pub bound_group_metric: f64,
    pub max_ratio_op: f64,
    pub max_ratio_hs: f64,
    /// Pairs excluded as numerically identical (0/0 ratios).
    pub degenerate_excluded: u64,
}

/// Probe `|f(E₁)-f(E₂)|` against projector distances over Haar pairs.
pub fn lipschitz_probe(
    n: usize,
    k: usize,
    face: &Face,
    pairs: u64,
    seed: u64,
) -> Result<LipschitzProbe, Error> {
    if pairs < 1 {
        return Err(Error::InvalidParameter("need at least 1 pair".into()));
    }
    let records: Result<Vec<PairRecord>, Error> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let seed1 = derive_seed(seed, 2 * i);
            let seed2 = derive_seed(seed, 2 * i + 1);
            let e1 = Subspace::haar(n, k, seed1)?;
            let e2 = Subspace::haar(n, k, seed2)?;
            let delta_f = (face_moment(&e1, face)? - face_moment(&e2, face)?).abs();
            let d = e1.projector_distance(&e2)?;
            Ok(PairRecord { seed1, seed2, delta_f, op_dist: d.op, hs_dist: d.hs })
        })
        .collect();
    let records = records?;
    let mut max_op = 0.0f64;
    let mut max_hs = 0.0f64;
    let mut degenerate = 0u64;
    for r in &records {
        if r.op_dist <= 1e-12 {
            degenerate += 1;
            continue;
        }
        max_op = max_op.max(r.delta_f / r.op_dist);
        max_hs = max_hs.max(r.delta_f / r.hs_dist);
    }
    let kf = k as f64;
    Ok(LipschitzProbe {
        n,
        k,
        face: face.clone(),
        pairs: records,
        bound_op: 8.0 * kf / 3.0,
        bound_group_metric: 8.0 * core::f64::consts::SQRT_2 * kf / 3.0,
        max_ratio_op: max_op,
        max_ratio_hs: max_hs,
        degenerate_excluded: degenerate,
    })
}

// ---------------------------------------------------------------------------
// Deviation histogram
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct TailFraction {
    pub t: f64,
    /// `t·√n`.
    pub threshold: f64,
    pub fraction: f64,
}

#[derive(Clone, Debug)]
pub struct Histogram {
    pub n: usize,
    pub k: usize,
    pub trials: u64,
    /// Grassmannian mean the deviations are measured against.
    pub target: f64,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub tail_fractions: Vec<TailFraction>,
    pub min_dev: f64,
    pub max_dev: f64,
    pub faces_total: u64,
}

const TAIL_MULTIPLIERS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// Histogram of `E_F|P_E x|² - (n-k)(n+2k)/(3n)` over Haar subspaces and
/// all faces of each tiling.
pub fn deviation_histogram(
    n: usize,
    k: usize,
    trials: u64,
    bins: usize,
    seed: u64,
) -> Result<Histogram, Error> {
    if trials < 1 || bins < 1 {
        return Err(Error::InvalidParameter("need trials ≥ 1 and bins ≥ 1".into()));
    }
    let target = grassmann_face_moment_mean(n, k);
    let (nf, kf) = (n as f64, k as f64);
    // face moments live in [(n-2k)/3, (n+2k)/3]; the histogram spans the
    // deviations of that interval from the target
    let lo = (nf - 2.0 * kf) / 3.0 - target;
    let hi = (nf + 2.0 * kf) / 3.0 - target;
    let width = (hi - lo) / bins as f64;
    let bin_edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let tol = TilingTolerances::default();

    struct Partial {
        counts: Vec<u64>,
        tails: [u64; 4],
        min_dev: f64,
        max_dev: f64,
        faces: u64,
    }

    let partials: Result<Vec<Partial>, Error> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = derive_seed(seed, t);
            let s = Subspace::haar(n, k, trial_seed)?;
            let (report, _xi) = streaming_report_par(&s, None, trial_seed, &tol)?;
            let mut p = Partial {
                counts: vec![0; bins],
                tails: [0; 4],
                min_dev: f64::INFINITY,
                max_dev: f64::NEG_INFINITY,
                faces: 0,
            };
            for pt in &report.per_tile {
                let value = pt.mean_sq;
                if value < (nf - 2.0 * kf) / 3.0 - 1e-9 || value > (nf + 2.0 * kf) / 3.0 + 1e-9 {
                    return Err(Error::NumericalFailure(
                        "face moment escaped its closed-form bounds",
                    ));
                }
                let dev = value - target;
                if dev.abs() > 2.0 * kf {
                    return Err(Error::NumericalFailure(
                        "face deviation exceeded the exact 2k bound",
                    ));
                }
                let idx = (((dev - lo) / width) as usize).min(bins - 1);
                p.counts[idx] += 1;
                for (slot, m) in TAIL_MULTIPLIERS.iter().enumerate() {
                    if dev.abs() > m * nf.sqrt() {
                        p.tails[slot] += 1;
                    }
                }
                p.min_dev = p.min_dev.min(dev);
                p.max_dev = p.max_dev.max(dev);
                p.faces += 1;
            }
            Ok(p)
        })
        .collect();
    let partials = partials?;

    let mut counts = vec![0u64; bins];
    let mut tails = [0u64; 4];
    let mut min_dev = f64::INFINITY;
    let mut max_dev = f64::NEG_INFINITY;
    let mut faces_total = 0u64;
    for p in partials {
        for (a, b) in counts.iter_mut().zip(&p.counts) {
            *a += b;
        }
        for (a, b) in tails.iter_mut().zip(&p.tails) {
            *a += b;
        }
        min_dev = min_dev.min(p.min_dev);
        max_dev = max_dev.max(p.max_dev);
        faces_total += p.faces;
    }
    let tail_fractions = TAIL_MULTIPLIERS
        .iter()
        .zip(tails)
        .map(|(&t, c)| TailFraction {
            t,
            threshold: t * nf.sqrt(),
            fraction: c as f64 / faces_total as f64,
        })
        .collect();
    Ok(Histogram {
        n,
        k,
        trials,
        target,
        bin_edges,
        counts,
        tail_fractions,
        min_dev,
        max_dev,
        faces_total,
    })
}
