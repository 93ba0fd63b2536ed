//! File formats: JSON and CSV exports with metadata headers, and the
//! plain-text subspace ingestion format.
//!
//! Every artifact begins with a metadata header carrying the tool version,
//! the seed, the random-generator identifier and the command line, so any
//! output can be regenerated from its own header. Floats are printed with
//! 17 significant digits (`{:.16e}`), which round-trips `f64` exactly —
//! re-emitting a parsed export reproduces it byte for byte. The conjecture
//! ratio is the one exception: it is rounded to 15 significant digits
//! before emission.
//!
//! JSON schemas (keys are stable):
//! * tiling: `n, k, xi, total_volume, tiles:[{fixed, signs, weight,
//!   volume, shift}]` — `fixed` holds 1-based coordinate indices;
//! * moment report: `mean_sq, variance, lambda_sq, ratio, bounds:{
//!   mean_lower, mean_upper, lambda_lower, lemma26_ok,
//!   lemma25_max_var_over_n}, per_tile:[{index, mean_sq, variance}]`.
//!
//! CSV schemas:
//! * samples: `coord_1,…,coord_{n-k},tile_id` (tile_id `-1` for the
//!   rejection sampler, which has no tile attribution);
//! * ensembles: `seed,n,k,ratio,mean_sq,variance,lambda_sq,max_face_dev,
//!   l,wall_time`.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};

use cube_shadows_core::linalg::Matrix;
use cube_shadows_core::moments::MomentReport;
use cube_shadows_core::rng::GENERATOR_ID;
use cube_shadows_core::sampler::{SampleBatch, SampleMethod};
use cube_shadows_core::subspace::Subspace;
use cube_shadows_core::tiling::Tiling;

use crate::grassmann::{EnsembleRecord, EnsembleSummary, Histogram, Lemma31Record, LipschitzProbe};

/// Header recorded at the start of every emitted artifact.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Meta {
    pub version: String,
    pub seed: u64,
    pub generator: String,
    pub command: String,
}

impl Meta {
    pub fn new(seed: u64, command: String) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            generator: GENERATOR_ID.to_string(),
            command,
        }
    }
}

/// `f64` with 17 significant digits; parses back to the identical value.
pub fn float17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Round to 15 significant digits (used for the conjecture ratio).
pub fn round15(v: f64) -> f64 {
    format!("{v:.14e}").parse().expect("formatted float reparses")
}

// ---------------------------------------------------------------------------
// JSON plumbing: serde_json with a fixed float format
// ---------------------------------------------------------------------------

struct Sig17Formatter;

impl serde_json::ser::Formatter for Sig17Formatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize as JSON with 17-significant-digit floats and a trailing
/// newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17Formatter);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf)?)
}

// ---------------------------------------------------------------------------
// Export DTOs
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TileExport {
    pub fixed: Vec<u32>,
    pub signs: Vec<i8>,
    pub weight: f64,
    pub volume: f64,
    pub shift: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TilingExport {
    pub meta: Meta,
    pub n: usize,
    pub k: usize,
    pub xi: Vec<f64>,
    pub total_volume: f64,
    pub tiles: Vec<TileExport>,
}

impl TilingExport {
    pub fn from_tiling(t: &Tiling, meta: Meta) -> Self {
        Self {
            meta,
            n: t.subspace().n(),
            k: t.subspace().k(),
            xi: t.direction().to_vec(),
            total_volume: t.total_volume(),
            tiles: t
                .tiles()
                .iter()
                .map(|tile| TileExport {
                    fixed: tile.face.fixed().to_vec(),
                    signs: tile.face.signs().to_vec(),
                    weight: tile.weight,
                    volume: tile.volume,
                    shift: tile.shift.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BoundsExport {
    pub mean_lower: f64,
    pub mean_upper: f64,
    pub lambda_lower: f64,
    pub lemma26_ok: bool,
    pub lemma25_max_var_over_n: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PerTileExport {
    pub index: usize,
    pub mean_sq: f64,
    pub variance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MomentReportExport {
    pub meta: Meta,
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub mean_sq: f64,
    pub variance: f64,
    pub lambda_sq: f64,
    /// Rounded to 15 significant digits.
    pub ratio: f64,
    pub max_face_dev: f64,
    pub bounds: BoundsExport,
    pub per_tile: Vec<PerTileExport>,
}

impl MomentReportExport {
    pub fn from_report(r: &MomentReport, meta: Meta) -> Self {
        Self {
            meta,
            n: r.n,
            k: r.k,
            l: r.l,
            mean_sq: r.mean_sq,
            variance: r.variance,
            lambda_sq: r.lambda_sq,
            ratio: round15(r.ratio),
            max_face_dev: r.max_face_dev,
            bounds: BoundsExport {
                mean_lower: r.mean_lower_bound(),
                mean_upper: r.mean_upper_bound(),
                lambda_lower: r.lambda_lower_bound(),
                lemma26_ok: r.bound_flags.face_dev_within_bound,
                lemma25_max_var_over_n: r.max_tile_variance_over_n,
            },
            per_tile: r
                .per_tile
                .iter()
                .map(|p| PerTileExport { index: p.index, mean_sq: p.mean_sq, variance: p.variance })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Lemma31Export {
    pub meta: Meta,
    pub n: usize,
    pub k: usize,
    pub face_fixed: Vec<u32>,
    pub face_signs: Vec<i8>,
    pub trials: u64,
    pub empirical_mean: f64,
    pub se: f64,
    pub target: f64,
    pub z_score: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LipschitzPairExport {
    pub seed1: u64,
    pub seed2: u64,
    pub delta_f: f64,
    pub op_dist: f64,
    pub hs_dist: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LipschitzExport {
    pub meta: Meta,
    pub n: usize,
    pub k: usize,
    pub face_fixed: Vec<u32>,
    pub face_signs: Vec<i8>,
    pub pairs: Vec<LipschitzPairExport>,
    pub bound_op: f64,
    pub bound_group_metric: f64,
    pub max_ratio_op: f64,
    pub max_ratio_hs: f64,
    pub degenerate_excluded: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailFractionExport {
    pub t: f64,
    pub threshold: f64,
    pub fraction: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HistogramExport {
    pub meta: Meta,
    pub n: usize,
    pub k: usize,
    pub trials: u64,
    pub target: f64,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub tail_fractions: Vec<TailFractionExport>,
    pub min_dev: f64,
    pub max_dev: f64,
    pub faces_total: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleSummaryExport {
    pub meta: Meta,
    pub n: usize,
    pub k: usize,
    pub trials: u64,
    pub max_ratio: f64,
    pub ratio_quantiles: Vec<(f64, f64)>,
    pub violation_fraction: f64,
    pub ratio_threshold: f64,
    pub exceed_fraction: f64,
}

pub fn lemma31_export(r: &Lemma31Record, meta: Meta) -> Lemma31Export {
    Lemma31Export {
        meta,
        n: r.n,
        k: r.k,
        face_fixed: r.face.fixed().to_vec(),
        face_signs: r.face.signs().to_vec(),
        trials: r.trials,
        empirical_mean: r.empirical_mean,
        se: r.se,
        target: r.target,
        z_score: r.z_score,
    }
}

pub fn lipschitz_export(p: &LipschitzProbe, meta: Meta) -> LipschitzExport {
    LipschitzExport {
        meta,
        n: p.n,
        k: p.k,
        face_fixed: p.face.fixed().to_vec(),
        face_signs: p.face.signs().to_vec(),
        pairs: p
            .pairs
            .iter()
            .map(|r| LipschitzPairExport {
                seed1: r.seed1,
                seed2: r.seed2,
                delta_f: r.delta_f,
                op_dist: r.op_dist,
                hs_dist: r.hs_dist,
            })
            .collect(),
        bound_op: p.bound_op,
        bound_group_metric: p.bound_group_metric,
        max_ratio_op: p.max_ratio_op,
        max_ratio_hs: p.max_ratio_hs,
        degenerate_excluded: p.degenerate_excluded,
    }
}

pub fn histogram_export(h: &Histogram, meta: Meta) -> HistogramExport {
    HistogramExport {
        meta,
        n: h.n,
        k: h.k,
        trials: h.trials,
        target: h.target,
        bin_edges: h.bin_edges.clone(),
        counts: h.counts.clone(),
        tail_fractions: h
            .tail_fractions
            .iter()
            .map(|t| TailFractionExport { t: t.t, threshold: t.threshold, fraction: t.fraction })
            .collect(),
        min_dev: h.min_dev,
        max_dev: h.max_dev,
        faces_total: h.faces_total,
    }
}

pub fn summary_export(
    s: &EnsembleSummary,
    n: usize,
    k: usize,
    meta: Meta,
) -> EnsembleSummaryExport {
    EnsembleSummaryExport {
        meta,
        n,
        k,
        trials: s.trials,
        max_ratio: s.max_ratio,
        ratio_quantiles: s.ratio_quantiles.clone(),
        violation_fraction: s.violation_fraction,
        ratio_threshold: s.ratio_threshold,
        exceed_fraction: s.exceed_fraction,
    }
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// `# key: value` metadata comment lines that start every CSV artifact.
pub fn csv_meta_header(meta: &Meta) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# version: {}", meta.version);
    let _ = writeln!(s, "# seed: {}", meta.seed);
    let _ = writeln!(s, "# generator: {}", meta.generator);
    let _ = writeln!(s, "# command: {}", meta.command);
    s
}

pub const ENSEMBLE_CSV_HEADER: &str =
    "seed,n,k,ratio,mean_sq,variance,lambda_sq,max_face_dev,l,wall_time";

pub fn ensemble_record_row(r: &EnsembleRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.seed,
        r.n,
        r.k,
        float17(r.ratio),
        float17(r.mean_sq),
        float17(r.variance),
        float17(r.lambda_sq),
        float17(r.max_face_dev),
        r.l,
        float17(r.wall_time),
    )
}

pub fn write_ensemble_csv<W: Write>(
    w: &mut W,
    meta: &Meta,
    records: &[EnsembleRecord],
) -> io::Result<()> {
    w.write_all(csv_meta_header(meta).as_bytes())?;
    writeln!(w, "{ENSEMBLE_CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", ensemble_record_row(r))?;
    }
    Ok(())
}

pub fn write_samples_csv<W: Write>(w: &mut W, meta: &Meta, b: &SampleBatch) -> io::Result<()> {
    w.write_all(csv_meta_header(meta).as_bytes())?;
    let mut header = String::new();
    for c in 1..=b.dim {
        let _ = write!(header, "coord_{c},");
    }
    header.push_str("tile_id");
    writeln!(w, "{header}")?;
    for i in 0..b.len() {
        let mut row = String::new();
        for v in b.point(i) {
            let _ = write!(row, "{},", float17(*v));
        }
        match b.method {
            SampleMethod::Exact => {
                let _ = write!(row, "{}", b.tile_ids[i]);
            }
            SampleMethod::Rejection => {
                let _ = write!(row, "-1");
            }
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}

/// Flat one-row CSV rendering of a moment report.
pub fn write_report_csv<W: Write>(
    w: &mut W,
    meta: &Meta,
    e: &MomentReportExport,
) -> io::Result<()> {
    w.write_all(csv_meta_header(meta).as_bytes())?;
    writeln!(
        w,
        "n,k,l,mean_sq,variance,lambda_sq,ratio,max_face_dev,mean_lower,mean_upper,lambda_lower,lemma26_ok,lemma25_max_var_over_n"
    )?;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        e.n,
        e.k,
        e.l,
        float17(e.mean_sq),
        float17(e.variance),
        float17(e.lambda_sq),
        float17(e.ratio),
        float17(e.max_face_dev),
        float17(e.bounds.mean_lower),
        float17(e.bounds.mean_upper),
        float17(e.bounds.lambda_lower),
        e.bounds.lemma26_ok,
        float17(e.bounds.lemma25_max_var_over_n),
    )
}

// ---------------------------------------------------------------------------
// Subspace file format
// ---------------------------------------------------------------------------

/// Parse the plain-text subspace format: line 1 is `n k`, followed by
/// `n-k` rows of `n` decimal floats (orthonormalized on load).
pub fn parse_subspace_text(text: &str) -> Result<Subspace> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let header = lines.next().ok_or_else(|| anyhow!("empty subspace file"))?;
    let mut it = header.split_whitespace();
    let n: usize = it
        .next()
        .ok_or_else(|| anyhow!("missing n in header"))?
        .parse()
        .context("parsing n")?;
    let k: usize = it
        .next()
        .ok_or_else(|| anyhow!("missing k in header"))?
        .parse()
        .context("parsing k")?;
    if it.next().is_some() {
        return Err(anyhow!("header must be exactly `n k`"));
    }
    if k >= n {
        return Err(anyhow!("k must be < n (got n={n}, k={k})"));
    }
    let mut rows = Vec::with_capacity(n - k);
    for (i, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().with_context(|| format!("row {}: bad float `{t}`", i + 1)))
            .collect::<Result<_>>()?;
        if row.len() != n {
            return Err(anyhow!("row {} has {} entries, expected {n}", i + 1, row.len()));
        }
        rows.push(row);
        if rows.len() == n - k {
            break;
        }
    }
    if rows.len() != n - k {
        return Err(anyhow!("expected {} basis rows, found {}", n - k, rows.len()));
    }
    let mut m = Matrix::zeros(n - k, n);
    for (i, r) in rows.iter().enumerate() {
        m.row_mut(i).copy_from_slice(r);
    }
    Subspace::from_rows(m).map_err(|e| anyhow!("subspace rows rejected: {e}"))
}

pub fn load_subspace(path: &Path) -> Result<Subspace> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_subspace_text(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Render a subspace in the ingestion format (used by tests and demos).
pub fn subspace_to_text(s: &Subspace) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", s.n(), s.k());
    for i in 0..s.dim() {
        let row: Vec<String> = s.basis().row(i).iter().map(|v| float17(*v)).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

// ---------------------------------------------------------------------------
// Output destination
// ---------------------------------------------------------------------------

/// Resolve an output path against the directory override environment
/// variable (`CUBE_SHADOWS_OUTPUT_DIR`), which applies to relative paths
/// only.
pub fn resolve_output(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("CUBE_SHADOWS_OUTPUT_DIR") {
        Some(dir) => PathBuf::from(dir).join(path),
        None => path.to_path_buf(),
    }
}

/// Write bytes to a file (with directory override) or stdout.
pub fn emit(output: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match output {
        Some(p) => {
            let p = resolve_output(p);
            fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            io::stdout().write_all(bytes).context("writing to stdout")
        }
    }
}
