//! Exact moments of the uniform measure on a cube shadow.
//!
//! For `x` uniform on a projected face `P_E(F) = a_F + T_F(B∞^m)` with
//! `m = n-k`, every quantity below is in closed form (coordinates of the
//! cube are independent uniform on `[-1,1]`, with `E u² = 1/3`,
//! `E u⁴ = 1/5`):
//!
//! * directional second moment over the face,
//!   `E⟨x,θ⟩² = 1/3 + (Σ_j ε_j θ_{i_j})² - (1/3)Σ_j θ_{i_j}²`;
//! * face moment `E|x|² = m/3 + |a_F|² - (1/3) Σ_j |P_E e_{i_j}|²`;
//! * variance of the centered quadratic form `u ↦ uᵀQu`,
//!   `Var = (4/45) Σ_i q_ii² + (2/9) Σ_{i≠j} q_ij²`;
//! * tile variance via the translation identity
//!   `Var_{a+ν}|x|² = Var_ν|x|² + 4E_ν⟨a,x⟩²`, giving
//!   `Var = Var(uᵀQu) + (4/3)|T_Fᵀ a_F|²`;
//! * whole-body mean, variance (total-variance decomposition over tiles),
//!   covariance `Σ w_i((1/3)T_iT_iᵀ + a_ia_iᵀ)`, its largest eigenvalue
//!   `λ²`, and the ratio `Var|x|² / (λ²·E|x|²)`.
//!
//! The accumulator underneath exploits orthonormality of the basis rows:
//! with `b_j` the E-coordinates of `P_E e_j`, one has `Σ_j b_j b_jᵀ = I`,
//! so per-tile quantities reduce to `O(k²·m)` work instead of `O(m³)`,
//! and the covariance assembles once at the end from coefficient matrices.
//! The tests pin these reductions against the direct formulas.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::math::{abs, NeumaierSum};
use crate::subspace::Subspace;
use crate::tiling::{
    det_scan_range, for_each_tile_range, pow2, subset_space, tile_geometry, Face, SubsetSpace,
    TileGeometry, Tiling, TilingTolerances,
};

/// Fixed rank-chunk size shared by every driver of the tile scan, so that
/// chunked (possibly parallel) accumulation always merges identically.
pub const TILE_CHUNK: u64 = 8192;

/// Pass/fail record of the closed-form bounds a report was checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundFlags {
    /// `(n-2k)/3 ≤ E|x|² ≤ (n+2k)/3`.
    pub mean_within_bounds: bool,
    /// `λ² ≥ E|x|²/(n-k) ≥ (n-2k)/(3(n-k))`.
    pub lambda_above_lower: bool,
    /// `max_i |E_i - E|x|²| ≤ 4k/3`.
    pub face_dev_within_bound: bool,
}

/// Per-tile moment record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerTileMoments {
    pub index: usize,
    pub mean_sq: f64,
    pub variance: f64,
}

/// Exact moment summary of the uniform measure on a shadow.
#[derive(Clone, Debug)]
pub struct MomentReport {
    pub n: usize,
    pub k: usize,
    /// Number of tiles.
    pub l: usize,
    /// `E_μ |x|²`.
    pub mean_sq: f64,
    /// `Var_μ |x|²`.
    pub variance: f64,
    /// Covariance matrix in E-coordinates.
    pub covariance: Matrix,
    /// Largest covariance eigenvalue `λ_μ²`. Maximizing over directions
    /// inside `E` equals the maximum over all of `S^{n-1}`: the measure is
    /// supported on `E`, so components in `E⊥` contribute nothing.
    pub lambda_sq: f64,
    /// `Var_μ|x|² / (λ_μ² · E_μ|x|²)`.
    pub ratio: f64,
    /// `max_i |E_i - E_μ|x|²|`.
    pub max_face_dev: f64,
    /// `max_i Var_i / n` (the empirical constant of the per-tile variance
    /// bound; reported, never asserted against a specific constant).
    pub max_tile_variance_over_n: f64,
    pub per_tile: Vec<PerTileMoments>,
    pub bound_flags: BoundFlags,
}

impl MomentReport {
    /// Closed-form lower bound `(n-2k)/3` on the mean.
    pub fn mean_lower_bound(&self) -> f64 {
        (self.n as f64 - 2.0 * self.k as f64) / 3.0
    }

    /// Closed-form upper bound `(n+2k)/3` on the mean.
    pub fn mean_upper_bound(&self) -> f64 {
        (self.n as f64 + 2.0 * self.k as f64) / 3.0
    }

    /// Closed-form lower bound `(n-2k)/(3(n-k))` on `λ²`.
    pub fn lambda_lower_bound(&self) -> f64 {
        (self.n as f64 - 2.0 * self.k as f64) / (3.0 * (self.n - self.k) as f64)
    }
}

/// `E_{P_E(F)} ⟨x,θ⟩²` for a unit `θ ∈ E` given in ambient coordinates.
pub fn face_moment_dir(s: &Subspace, f: &Face, theta: &[f64]) -> Result<f64> {
    if theta.len() != s.n() {
        return Err(Error::DimensionMismatch { expected: s.n(), got: theta.len() });
    }
    let norm = linalg::norm(theta);
    if abs(norm - 1.0) > 1e-10 {
        return Err(Error::NotUnit { norm });
    }
    let proj = s.project(theta)?;
    let residual_sq: f64 = theta
        .iter()
        .zip(&proj)
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    let residual = crate::math::sqrt(residual_sq);
    if residual > 1e-10 {
        return Err(Error::NotInSubspace { residual });
    }
    validate_face(s, f)?;
    let mut signed_sum = 0.0;
    let mut sq_sum = 0.0;
    for (j, &sg) in f.fixed0().zip(f.signs()) {
        signed_sum += sg as f64 * theta[j];
        sq_sum += theta[j] * theta[j];
    }
    Ok(1.0 / 3.0 + signed_sum * signed_sum - sq_sum / 3.0)
}

/// `E_{P_E(F)} |x|² = (n-k)/3 + |P_E(Σ_j ε_j e_{i_j})|² - (1/3)Σ_j |P_E e_{i_j}|²`.
pub fn face_moment(s: &Subspace, f: &Face) -> Result<f64> {
    validate_face(s, f)?;
    let m = s.dim() as f64;
    let fixed0: Vec<usize> = f.fixed0().collect();
    let shift = crate::tiling::face_shift(s, &fixed0, f.signs());
    let fixed_norm: f64 = fixed0.iter().map(|&j| s.projected_axis_norm_sq(j)).sum();
    Ok(m / 3.0 + linalg::norm_sq(&shift) - fixed_norm / 3.0)
}

fn validate_face(s: &Subspace, f: &Face) -> Result<()> {
    if f.k() != s.k() {
        return Err(Error::InvalidParameter(alloc::format!(
            "face fixes {} coordinates but subspace has codimension {}",
            f.k(),
            s.k()
        )));
    }
    if let Some(&last) = f.fixed().last() {
        if last as usize > s.n() {
            return Err(Error::InvalidParameter(alloc::format!(
                "face index {last} exceeds n = {}",
                s.n()
            )));
        }
    }
    Ok(())
}

/// Variance of `u ↦ uᵀQu` for `u` uniform on `B∞^m` and symmetric `Q`:
/// `(4/45) Σ_i q_ii² + (2/9) Σ_{i≠j} q_ij²`.
pub fn centered_quadratic_variance(q: &Matrix) -> Result<f64> {
    if q.rows() != q.cols() {
        return Err(Error::DimensionMismatch { expected: q.rows(), got: q.cols() });
    }
    let asym = q.max_asymmetry();
    if asym > 1e-10 {
        return Err(Error::AsymmetricInput { max_asymmetry: asym });
    }
    Ok(cqv_unchecked(q))
}

fn cqv_unchecked(q: &Matrix) -> f64 {
    let m = q.rows();
    let mut diag_sq = 0.0;
    for i in 0..m {
        let d = q.get(i, i);
        diag_sq += d * d;
    }
    let off_sq = q.frobenius_norm_sq() - diag_sq;
    (4.0 / 45.0) * diag_sq + (2.0 / 9.0) * off_sq
}

/// `Var_{P_E(F)} |x|²` from a tile geometry: the centered quadratic-form
/// variance plus the translation term `(4/3)|T_Fᵀ a_F|²`.
pub fn tile_variance(g: &TileGeometry) -> f64 {
    let tta = g.map.tr_matvec(&g.shift);
    cqv_unchecked(&g.gram) + (4.0 / 3.0) * linalg::norm_sq(&tta)
}

/// Streaming accumulator for tile moments.
///
/// Feed tiles in rank order (chunks may be computed independently and
/// merged in rank order); [`finalize`](Self::finalize) produces the
/// [`MomentReport`]. Per-tile means and variances are retained so the
/// final mean/variance sums do not depend on the chunking.
#[derive(Clone, Debug)]
pub struct MomentAccumulator {
    n: usize,
    k: usize,
    m: usize,
    /// `|b_j|²` for every ambient column `j`.
    col_norm_sq: Vec<f64>,
    /// `Σ_j |b_j|⁴`.
    col_norm_4_total: f64,
    vols: Vec<f64>,
    means: Vec<f64>,
    vars: Vec<f64>,
    /// `d_j = Σ_{tiles with j fixed} vol`.
    fixed_vol: Vec<f64>,
    /// `c_{jj'} = Σ_{tiles with j,j' fixed} vol·ε_j·ε_{j'}` (symmetric).
    vertex_coef: Matrix,
    /// `Σ vol·a` (for the antipodal balance check).
    shift_sum: Vec<f64>,
    // scratch
    cols: Vec<f64>,
    a: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(s: &Subspace) -> Self {
        let n = s.n();
        let m = s.dim();
        let k = s.k();
        let col_norm_sq: Vec<f64> = (0..n).map(|j| s.projected_axis_norm_sq(j)).collect();
        let col_norm_4_total = col_norm_sq.iter().map(|x| x * x).sum();
        Self {
            n,
            k,
            m,
            col_norm_sq,
            col_norm_4_total,
            vols: Vec::new(),
            means: Vec::new(),
            vars: Vec::new(),
            fixed_vol: vec![0.0; n],
            vertex_coef: Matrix::zeros(n, n),
            shift_sum: vec![0.0; m],
            cols: vec![0.0; k * m],
            a: vec![0.0; m],
        }
    }

    pub fn tiles_seen(&self) -> usize {
        self.vols.len()
    }

    /// Add one tile given its fixed coordinates (0-based), signs and volume.
    pub fn add_tile(&mut self, s: &Subspace, fixed0: &[usize], signs: &[i8], volume: f64) {
        let m = self.m;
        let kf = fixed0.len();
        debug_assert_eq!(kf, self.k);
        let basis = s.basis();
        // gather the k fixed columns and the face vertex projection a
        self.a.iter_mut().for_each(|x| *x = 0.0);
        for (slot, (&j, &sg)) in fixed0.iter().zip(signs).enumerate() {
            for r in 0..m {
                let v = basis.get(r, j);
                self.cols[slot * m + r] = v;
                self.a[r] += sg as f64 * v;
            }
        }
        let a_sq = linalg::norm_sq(&self.a);
        let mut sum_fixed_2 = 0.0;
        let mut sum_fixed_4 = 0.0;
        for &j in fixed0 {
            let c = self.col_norm_sq[j];
            sum_fixed_2 += c;
            sum_fixed_4 += c * c;
        }
        let mean_i = m as f64 / 3.0 + a_sq - sum_fixed_2 / 3.0;

        // ‖Q‖F² = ‖T Tᵀ‖F² with T Tᵀ = I - Σ_{j∈S} b_j b_jᵀ
        let mut wf2 = 0.0;
        for p in 0..kf {
            let cp = &self.cols[p * m..(p + 1) * m];
            for q in 0..kf {
                let cq = &self.cols[q * m..(q + 1) * m];
                let d = linalg::dot(cp, cq);
                wf2 += d * d;
            }
        }
        let q_frob2 = m as f64 - 2.0 * sum_fixed_2 + wf2;
        let diag_q_sq = self.col_norm_4_total - sum_fixed_4;
        let cqv = (4.0 / 45.0) * diag_q_sq + (2.0 / 9.0) * (q_frob2 - diag_q_sq);

        // |T_Fᵀ a|² = |a|² - Σ_{j∈S} ⟨b_j, a⟩²
        let mut fixed_a_sq = 0.0;
        for p in 0..kf {
            let d = linalg::dot(&self.cols[p * m..(p + 1) * m], &self.a);
            fixed_a_sq += d * d;
        }
        let var_i = cqv + (4.0 / 3.0) * (a_sq - fixed_a_sq);

        self.vols.push(volume);
        self.means.push(mean_i);
        self.vars.push(var_i);
        for (pi, (&j, &sj)) in fixed0.iter().zip(signs).enumerate() {
            self.fixed_vol[j] += volume;
            for (qi, (&j2, &sj2)) in fixed0.iter().zip(signs).enumerate().skip(pi) {
                let w = volume * (sj as f64) * (sj2 as f64);
                let cur = self.vertex_coef.get(j, j2) + w;
                self.vertex_coef.set(j, j2, cur);
                if qi != pi {
                    self.vertex_coef.set(j2, j, cur);
                }
            }
        }
        linalg::axpy(volume, &self.a, &mut self.shift_sum);
    }

    /// Merge a chunk computed over a later rank range (call in rank order).
    pub fn merge(&mut self, other: MomentAccumulator) {
        self.vols.extend_from_slice(&other.vols);
        self.means.extend_from_slice(&other.means);
        self.vars.extend_from_slice(&other.vars);
        for (a, b) in self.fixed_vol.iter_mut().zip(&other.fixed_vol) {
            *a += b;
        }
        self.vertex_coef.add_assign(&other.vertex_coef);
        for (a, b) in self.shift_sum.iter_mut().zip(&other.shift_sum) {
            *a += b;
        }
    }

    /// Weighted shift balance `Σ w_i a_i` (zero for an origin-symmetric
    /// shadow).
    pub fn shift_balance(&self) -> Vec<f64> {
        let total = self.total_volume();
        self.shift_sum.iter().map(|x| x / total).collect()
    }

    fn total_volume(&self) -> f64 {
        let mut t = NeumaierSum::new();
        for &v in &self.vols {
            t.add(v);
        }
        t.value()
    }

    pub fn finalize(self, s: &Subspace) -> Result<MomentReport> {
        let l = self.vols.len();
        if l == 0 {
            return Err(Error::DegenerateSubspace);
        }
        let (n, k, m) = (self.n, self.k, self.m);
        let total = self.total_volume();
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::DegenerateSubspace);
        }

        let mut mean_acc = NeumaierSum::new();
        for (&v, &e) in self.vols.iter().zip(&self.means) {
            mean_acc.add(v * e);
        }
        let mean_sq = mean_acc.value() / total;

        // total-variance decomposition: Σ w Var_i + Σ w (E_i - mean)²
        let mut within = NeumaierSum::new();
        let mut between = NeumaierSum::new();
        let mut max_dev = 0.0f64;
        let mut max_var = 0.0f64;
        for i in 0..l {
            let w = self.vols[i] / total;
            within.add(w * self.vars[i]);
            let dev = self.means[i] - mean_sq;
            between.add(w * dev * dev);
            max_dev = max_dev.max(abs(dev));
            max_var = max_var.max(self.vars[i]);
        }
        let variance = within.value() + between.value();

        // covariance = [(V/3)·I + B·G·Bᵀ] / V with
        // G = vertex_coef - (1/3)·diag(fixed_vol)
        let mut g = self.vertex_coef;
        for j in 0..n {
            let cur = g.get(j, j) - self.fixed_vol[j] / 3.0;
            g.set(j, j, cur);
        }
        let bg = s.basis().matmul(&g); // m×n
        let mut covariance = bg.matmul(&s.basis().transpose()); // m×m
        for i in 0..m {
            let cur = covariance.get(i, i) + total / 3.0;
            covariance.set(i, i, cur);
        }
        covariance.scale(1.0 / total);
        // symmetrize away rounding asymmetry before the eigen solve
        for i in 0..m {
            for j in (i + 1)..m {
                let v = 0.5 * (covariance.get(i, j) + covariance.get(j, i));
                covariance.set(i, j, v);
                covariance.set(j, i, v);
            }
        }

        let lambda_sq = linalg::sym_max_eigenvalue(&covariance);
        let ratio = variance / (lambda_sq * mean_sq);

        let tol = 1e-9;
        let nf = n as f64;
        let kf = k as f64;
        let bound_flags = BoundFlags {
            mean_within_bounds: mean_sq >= (nf - 2.0 * kf) / 3.0 - tol
                && mean_sq <= (nf + 2.0 * kf) / 3.0 + tol,
            lambda_above_lower: lambda_sq >= mean_sq / m as f64 - tol
                && lambda_sq >= (nf - 2.0 * kf) / (3.0 * m as f64) - tol,
            face_dev_within_bound: max_dev <= 4.0 * kf / 3.0 + tol,
        };

        let per_tile = (0..l)
            .map(|i| PerTileMoments { index: i, mean_sq: self.means[i], variance: self.vars[i] })
            .collect();

        Ok(MomentReport {
            n,
            k,
            l,
            mean_sq,
            variance,
            covariance,
            lambda_sq,
            ratio,
            max_face_dev: max_dev,
            max_tile_variance_over_n: max_var / nf,
            per_tile,
            bound_flags,
        })
    }
}

/// Moment report of a materialized tiling.
pub fn body_report(t: &Tiling) -> Result<MomentReport> {
    let s = t.subspace();
    let mut acc = MomentAccumulator::new(s);
    let mut fixed0: Vec<usize> = Vec::with_capacity(s.k());
    for tile in t.tiles() {
        fixed0.clear();
        fixed0.extend(tile.face.fixed0());
        acc.add_tile(s, &fixed0, tile.face.signs(), tile.volume);
    }
    acc.finalize(s)
}

/// Moment report computed by streaming over subsets without materializing
/// tiles, in fixed chunks of [`TILE_CHUNK`] ranks.
///
/// Behaves like `body_report(enumerate_tiling(..))` but with `O(l)` memory
/// for the per-tile scalars only. Returns the report together with the
/// sweep direction that was used.
pub fn streaming_report(
    s: &Subspace,
    direction: Option<&[f64]>,
    seed: u64,
    tol: &TilingTolerances,
) -> Result<(MomentReport, Vec<f64>)> {
    let space = subset_space(s, tol)?;
    let dets = det_scan_range(s, &space, 0, space.count());
    let max_det = dets.iter().fold(0.0f64, |m, &d| m.max(d));
    if max_det <= 0.0 {
        return Err(Error::DegenerateSubspace);
    }
    let cutoff = tol.det_rel * max_det;
    let scan = |xi: &[f64]| -> Result<MomentAccumulator> {
        let mut acc = MomentAccumulator::new(s);
        accumulate_chunked(s, &space, xi, &dets, cutoff, tol.sign_rel, &mut acc)?;
        Ok(acc)
    };
    let (acc, xi) = crate::tiling::run_with_direction(s, direction, seed, tol, scan)?;
    Ok((acc.finalize(s)?, xi))
}

/// Feed every accepted tile of ranks `lo..hi` into the accumulator.
/// `dets` covers exactly this range (`dets[i]` is rank `lo + i`).
#[allow(clippy::too_many_arguments)]
pub fn accumulate_range(
    s: &Subspace,
    space: &SubsetSpace,
    xi: &[f64],
    dets: &[f64],
    cutoff: f64,
    sign_rel: f64,
    lo: u64,
    hi: u64,
    acc: &mut MomentAccumulator,
) -> Result<()> {
    let volume_scale = pow2(s.dim());
    for_each_tile_range(s, space, xi, dets, cutoff, lo, hi, sign_rel, &mut |t| {
        acc.add_tile(s, t.fixed0, t.signs, volume_scale * t.abs_det);
    })
}

/// Drive the accumulator over the full rank range in [`TILE_CHUNK`]
/// chunks, one fresh partial per chunk merged in rank order — the exact
/// structure a parallel driver uses, so sequential and parallel runs agree
/// bit for bit.
pub fn accumulate_chunked(
    s: &Subspace,
    space: &SubsetSpace,
    xi: &[f64],
    dets: &[f64],
    cutoff: f64,
    sign_rel: f64,
    acc: &mut MomentAccumulator,
) -> Result<()> {
    let count = space.count().max(1);
    let mut lo = 0u64;
    while lo < count {
        let hi = (lo + TILE_CHUNK).min(count);
        let local = &dets[lo as usize..hi as usize];
        let mut part = MomentAccumulator::new(s);
        accumulate_range(s, space, xi, local, cutoff, sign_rel, lo, hi, &mut part)?;
        acc.merge(part);
        lo = hi;
    }
    Ok(())
}

/// Per-tile mean and variance by the direct geometry route (explicit
/// `T_F`, `Q`, LU) — the slow path tests pin the accumulator reductions
/// against.
#[doc(hidden)]
pub fn tile_moments_direct(s: &Subspace, f: &Face) -> Result<(f64, f64)> {
    let g = tile_geometry(s, f)?;
    let mean = face_moment(s, f)?;
    Ok((mean, tile_variance(&g)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::math::sqrt;
    use crate::rng::stream_rng;
    use crate::tiling::enumerate_tiling;
    use rand::Rng;

    fn approx(a: f64, b: f64, tol: f64) {
        assert!(abs(a - b) <= tol, "{a} vs {b} (tol {tol})");
    }

    fn diag_plane() -> Subspace {
        Subspace::from_rows(Matrix::from_rows(&[&[1.0, 1.0]])).unwrap()
    }

    fn diag_space() -> Subspace {
        Subspace::from_rows(Matrix::from_rows(&[&[1.0, -1.0, 0.0], &[1.0, 1.0, -2.0]])).unwrap()
    }

    #[test]
    fn face_moment_dir_examples() {
        let s = diag_plane();
        let f = Face::new(vec![1], vec![1], 2).unwrap();
        let theta = [core::f64::consts::FRAC_1_SQRT_2; 2];
        approx(face_moment_dir(&s, &f, &theta).unwrap(), 2.0 / 3.0, 1e-14);

        // θ with no component on the fixed coordinates collapses to 1/3
        let s3 = Subspace::axis_aligned(4, 1).unwrap();
        let f3 = Face::new(vec![4], vec![1], 4).unwrap();
        approx(
            face_moment_dir(&s3, &f3, &[1.0, 0.0, 0.0, 0.0]).unwrap(),
            1.0 / 3.0,
            1e-14,
        );

        // rejects non-unit and out-of-subspace directions
        assert!(matches!(
            face_moment_dir(&s, &f, &[1.0, 1.0]),
            Err(Error::NotUnit { .. })
        ));
        assert!(matches!(
            face_moment_dir(&s, &f, &[1.0, 0.0]),
            Err(Error::NotInSubspace { .. })
        ));
    }

    #[test]
    fn face_moment_examples() {
        let axis = Subspace::axis_aligned(9, 2).unwrap();
        let f = Face::new(vec![8, 9], vec![1, -1], 9).unwrap();
        approx(face_moment(&axis, &f).unwrap(), 7.0 / 3.0, 1e-14);

        let s = diag_space();
        let f3 = Face::new(vec![3], vec![1], 3).unwrap();
        approx(face_moment(&s, &f3).unwrap(), 10.0 / 9.0, 1e-13);

        let plane = diag_plane();
        let f1 = Face::new(vec![1], vec![1], 2).unwrap();
        approx(face_moment(&plane, &f1).unwrap(), 2.0 / 3.0, 1e-14);
    }

    #[test]
    fn face_moment_matches_geometry_trace() {
        // E|x|² = trace(Q)/3 + |a|²
        for seed in 0..5 {
            let s = Subspace::haar(8, 2, seed).unwrap();
            let t = enumerate_tiling(&s, None, seed, &TilingTolerances::default()).unwrap();
            for (i, tile) in t.tiles().iter().enumerate() {
                let g = t.geometry(i);
                let direct = g.gram.trace() / 3.0 + linalg::norm_sq(&g.shift);
                approx(face_moment(&s, &tile.face).unwrap(), direct, 1e-10);
            }
        }
    }

    #[test]
    fn cqv_examples_and_mc_oracle() {
        assert_eq!(centered_quadratic_variance(&Matrix::zeros(3, 3)).unwrap(), 0.0);
        approx(
            centered_quadratic_variance(&Matrix::identity(5)).unwrap(),
            4.0 * 5.0 / 45.0,
            1e-15,
        );
        let half = Matrix::from_rows(&[&[0.5]]);
        approx(centered_quadratic_variance(&half).unwrap(), 1.0 / 45.0, 1e-15);

        let mut bad = Matrix::zeros(2, 2);
        bad.set(0, 1, 1.0);
        assert!(matches!(
            centered_quadratic_variance(&bad),
            Err(Error::AsymmetricInput { .. })
        ));

        // Monte Carlo validation of the closed form on random symmetric Q
        let mut rng = stream_rng(2024, 5);
        for trial in 0..3 {
            let m = 2 + trial;
            let mut q = Matrix::zeros(m, m);
            for i in 0..m {
                for j in i..m {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    q.set(i, j, v);
                    q.set(j, i, v);
                }
            }
            let exact = centered_quadratic_variance(&q).unwrap();
            let n_mc = 2_000_000usize;
            let (mut s1, mut s2) = (0.0f64, 0.0f64);
            for _ in 0..n_mc {
                let u: alloc::vec::Vec<f64> =
                    (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
                let mut quad = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        quad += q.get(i, j) * u[i] * u[j];
                    }
                }
                s1 += quad;
                s2 += quad * quad;
            }
            let mean = s1 / n_mc as f64;
            let var = s2 / n_mc as f64 - mean * mean;
            // SE of a sample variance ~ var·√(2/N) is a fine proxy here
            let se = var * sqrt(2.0 / n_mc as f64) + 1e-12;
            assert!(
                abs(var - exact) <= 6.0 * se,
                "MC {var} vs exact {exact} (se {se})"
            );
        }
    }

    #[test]
    fn tile_variance_examples() {
        let plane = diag_plane();
        let f = Face::new(vec![1], vec![1], 2).unwrap();
        let g = tile_geometry(&plane, &f).unwrap();
        approx(tile_variance(&g), 16.0 / 45.0, 1e-14);

        let axis = Subspace::axis_aligned(7, 1).unwrap();
        let fa = Face::new(vec![7], vec![-1], 7).unwrap();
        let ga = tile_geometry(&axis, &fa).unwrap();
        approx(tile_variance(&ga), 4.0 * 6.0 / 45.0, 1e-14);

        let s = diag_space();
        let f3 = Face::new(vec![3], vec![1], 3).unwrap();
        let g3 = tile_geometry(&s, &f3).unwrap();
        approx(tile_variance(&g3), 172.0 / 405.0, 1e-13);
    }

    #[test]
    fn accumulator_matches_direct_route() {
        // the O(k²m) reductions inside the accumulator equal the direct
        // geometry-based formulas tile by tile
        for seed in 0..6 {
            let s = Subspace::haar(9, 3, seed).unwrap();
            let t = enumerate_tiling(&s, None, seed, &TilingTolerances::default()).unwrap();
            let report = body_report(&t).unwrap();
            for (i, tile) in t.tiles().iter().enumerate() {
                let (mean, var) = tile_moments_direct(&s, &tile.face).unwrap();
                approx(report.per_tile[i].mean_sq, mean, 1e-11);
                approx(report.per_tile[i].variance, var, 1e-11);
            }
        }
    }

    #[test]
    fn body_report_diag_plane_exact() {
        let t = enumerate_tiling(&diag_plane(), Some(&[1.0]), 0, &TilingTolerances::default())
            .unwrap();
        let r = body_report(&t).unwrap();
        approx(r.mean_sq, 2.0 / 3.0, 1e-13);
        approx(r.variance, 16.0 / 45.0, 1e-13);
        approx(r.lambda_sq, 2.0 / 3.0, 1e-13);
        approx(r.ratio, 0.8, 1e-12);
        assert!(r.bound_flags.mean_within_bounds);
        assert!(r.bound_flags.lambda_above_lower);
        assert!(r.bound_flags.face_dev_within_bound);
    }

    #[test]
    fn body_report_axis_aligned_exact() {
        for (n, k) in [(5usize, 1usize), (12, 4), (30, 6)] {
            let s = Subspace::axis_aligned(n, k).unwrap();
            let t = enumerate_tiling(&s, None, 1, &TilingTolerances::default()).unwrap();
            let r = body_report(&t).unwrap();
            let m = (n - k) as f64;
            approx(r.mean_sq, m / 3.0, 1e-12);
            approx(r.variance, 4.0 * m / 45.0, 1e-12);
            approx(r.lambda_sq, 1.0 / 3.0, 1e-12);
            approx(r.ratio, 0.8, 1e-12);
            approx(r.max_face_dev, 0.0, 1e-15);
        }
    }

    #[test]
    fn body_report_cube_diagonal_exact() {
        let t = enumerate_tiling(&diag_space(), Some(&[1.0]), 0, &TilingTolerances::default())
            .unwrap();
        let r = body_report(&t).unwrap();
        approx(r.mean_sq, 10.0 / 9.0, 1e-13);
        approx(r.variance, 172.0 / 405.0, 1e-13);
        approx(r.lambda_sq, 5.0 / 9.0, 1e-13);
        approx(r.ratio, 86.0 / 125.0, 1e-12);
        // covariance is (5/9)·I by symmetry
        let mut expected = Matrix::identity(2);
        expected.scale(5.0 / 9.0);
        assert!(r.covariance.sub(&expected).max_abs() < 1e-12);
    }

    #[test]
    fn report_invariants_on_haar_ensemble() {
        for seed in 0..10 {
            let s = Subspace::haar(10, 2, seed).unwrap();
            let t = enumerate_tiling(&s, None, seed, &TilingTolerances::default()).unwrap();
            let r = body_report(&t).unwrap();
            // covariance PSD with trace = mean
            let eig = linalg::sym_eigenvalues(&r.covariance);
            assert!(eig[0] > -1e-12);
            approx(r.covariance.trace(), r.mean_sq, 1e-10);
            // variance decomposition identity against per-tile data
            let mut within = 0.0;
            let mut between = 0.0;
            for (tile, pt) in t.tiles().iter().zip(&r.per_tile) {
                within += tile.weight * pt.variance;
                between += tile.weight * (pt.mean_sq - r.mean_sq).powi(2);
            }
            approx(r.variance, within + between, 1e-10);
            assert!(r.variance >= 0.0);
            assert!(r.bound_flags.mean_within_bounds);
            assert!(r.bound_flags.lambda_above_lower);
            assert!(r.bound_flags.face_dev_within_bound);
        }
    }

    #[test]
    fn centered_directional_moment_identity() {
        // face_moment_dir(f, θ) - ⟨a_F, θ⟩² = 1/3 - (1/3)Σ θ_{i_j}²
        let mut rng = stream_rng(31, 9);
        for seed in 0..5 {
            let s = Subspace::haar(8, 2, seed).unwrap();
            let t = enumerate_tiling(&s, None, seed, &TilingTolerances::default()).unwrap();
            for tile in t.tiles().iter().take(6) {
                // random unit θ ∈ E
                let g: alloc::vec::Vec<f64> = (0..s.dim())
                    .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                    .collect();
                let mut theta = s.embed(&g).unwrap();
                let nrm = linalg::norm(&theta);
                theta.iter_mut().for_each(|x| *x /= nrm);
                let theta_e = s.to_e_coords(&theta).unwrap();
                let val = face_moment_dir(&s, &tile.face, &theta).unwrap();
                let shift_dot = linalg::dot(&tile.shift, &theta_e);
                let lhs = val - shift_dot * shift_dot;
                let sq: f64 = tile.face.fixed0().map(|j| theta[j] * theta[j]).sum();
                approx(lhs, 1.0 / 3.0 - sq / 3.0, 1e-10);
            }
        }
    }

    #[test]
    fn sphere_average_recovers_face_moment() {
        // (n-k)·E_θ face_moment_dir = face_moment over Haar unit θ ∈ E
        let s = Subspace::haar(9, 2, 4).unwrap();
        let t = enumerate_tiling(&s, None, 4, &TilingTolerances::default()).unwrap();
        let tile = &t.tiles()[0];
        let mut rng = stream_rng(55, 3);
        let draws = 1000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..draws {
            let g: alloc::vec::Vec<f64> = (0..s.dim())
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let mut theta = s.embed(&g).unwrap();
            let nrm = linalg::norm(&theta);
            theta.iter_mut().for_each(|x| *x /= nrm);
            let v = s.dim() as f64 * face_moment_dir(&s, &tile.face, &theta).unwrap();
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / draws as f64;
        let var = (sumsq / draws as f64 - mean * mean).max(0.0);
        let se = sqrt(var / draws as f64);
        let exact = face_moment(&s, &tile.face).unwrap();
        assert!(abs(mean - exact) <= 4.0 * se, "{mean} vs {exact} (se {se})");
    }

    #[test]
    fn streaming_matches_materialized() {
        for seed in 0..4 {
            let s = Subspace::haar(10, 3, seed).unwrap();
            let tol = TilingTolerances::default();
            let t = enumerate_tiling(&s, None, seed, &tol).unwrap();
            let direct = body_report(&t).unwrap();
            let (streamed, xi) = streaming_report(&s, None, seed, &tol).unwrap();
            assert_eq!(xi, t.direction());
            assert_eq!(direct.l, streamed.l);
            approx(direct.mean_sq, streamed.mean_sq, 1e-12);
            approx(direct.variance, streamed.variance, 1e-12);
            approx(direct.lambda_sq, streamed.lambda_sq, 1e-12);
        }
    }
}
