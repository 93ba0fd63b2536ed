//! Uniform sampling on a cube shadow and Monte Carlo moment estimators.
//!
//! Two independent samplers target the same law (uniform on `K`):
//!
//! * [`sample_uniform`] draws a tile with probability equal to its weight
//!   and maps a uniform cube point through the tile's affine map — exact by
//!   the tiling decomposition;
//! * [`rejection_sample`] proposes uniformly in the tight axis-aligned box
//!   of `K` in E-coordinates (half-width `‖b_r‖₁` per coordinate, the
//!   support of `K` along each basis direction) and accepts by an
//!   LP-feasibility membership test that never looks at the tiling.
//!
//! Agreement of their estimates is the primary cross-check of the tiling
//! construction. Both samplers fill fixed-size batches on dedicated RNG
//! streams, so results are reproducible bit-for-bit and independent of any
//! parallel schedule over batches.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::math::{abs, sqrt, NeumaierSum};
use crate::rng::{stream_rng, STREAM_REJECT, STREAM_SAMPLE};
use crate::simplex::PhaseOneSimplex;
use crate::subspace::Subspace;
use crate::tiling::Tiling;

/// Samples per RNG stream; fixed so that batch contents never depend on
/// how many batches are processed concurrently.
pub const SAMPLE_BATCH: usize = 4096;

/// Rejection-sampler guard: abort once a batch has made this many
/// proposals at an acceptance rate below [`MIN_ACCEPTANCE`].
const GUARD_PROPOSALS: u64 = 100_000;
const MIN_ACCEPTANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleMethod {
    Exact,
    Rejection,
}

/// A batch of points in E-coordinates.
#[derive(Clone, Debug)]
pub struct SampleBatch {
    pub dim: usize,
    /// Row-major `len × dim`.
    pub points: Vec<f64>,
    /// Tile index per point; empty for rejection batches.
    pub tile_ids: Vec<u32>,
    pub seed: u64,
    pub method: SampleMethod,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.points.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

/// Monte Carlo estimates of `E|x|²` and `Var|x|²` with standard errors.
#[derive(Clone, Copy, Debug)]
pub struct MCMoments {
    pub mean_sq_hat: f64,
    pub var_sq_hat: f64,
    pub se_mean: f64,
    /// Standard error of the variance estimate via the fourth central
    /// moment.
    pub se_var: f64,
    pub n_samples: usize,
}

/// Exact uniform sampling on `K` through the tiling: tile `i` with
/// probability `w_i`, then `a_i + T_i·u` for `u` uniform on the cube.
pub fn sample_uniform(t: &Tiling, n_samples: usize, seed: u64) -> Result<SampleBatch> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    let s = t.subspace();
    let m = s.dim();
    let l = t.len();
    // cumulative volumes for the tile draw
    let mut cum = Vec::with_capacity(l + 1);
    cum.push(0.0);
    let mut run = 0.0;
    for tile in t.tiles() {
        run += tile.volume;
        cum.push(run);
    }
    let total = run;
    // per-tile affine maps, built once
    let maps: Vec<Matrix> = (0..l).map(|i| t.geometry(i).map).collect();

    let mut points = Vec::with_capacity(n_samples * m);
    let mut tile_ids = Vec::with_capacity(n_samples);
    let mut u = vec![0.0; m];
    let batches = n_samples.div_ceil(SAMPLE_BATCH);
    for b in 0..batches {
        let quota = SAMPLE_BATCH.min(n_samples - b * SAMPLE_BATCH);
        let mut rng = stream_rng(seed, STREAM_SAMPLE + b as u64);
        for _ in 0..quota {
            let target: f64 = rng.random::<f64>() * total;
            let idx = partition_point(&cum, target).min(l - 1);
            for ui in u.iter_mut() {
                *ui = rng.random_range(-1.0..1.0);
            }
            let tile = &t.tiles()[idx];
            let mut x = maps[idx].matvec(&u);
            for (xi, si) in x.iter_mut().zip(&tile.shift) {
                *xi += si;
            }
            points.extend_from_slice(&x);
            tile_ids.push(idx as u32);
        }
    }
    Ok(SampleBatch { dim: m, points, tile_ids, seed, method: SampleMethod::Exact })
}

/// Index of the cumulative cell containing `target`: largest `i` with
/// `cum[i] ≤ target`.
fn partition_point(cum: &[f64], target: f64) -> usize {
    let mut lo = 0usize;
    let mut hi = cum.len() - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if cum[mid] <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Membership of `x` (E-coordinates) in `K = P_E(B∞ⁿ)`, decided by
/// phase-1 LP feasibility of `{ y : B·y = x, -1 ≤ y ≤ 1 }` at tolerance
/// `tol`. Entirely independent of the tiling.
pub fn contains(s: &Subspace, x: &[f64], tol: f64) -> Result<bool> {
    if x.len() != s.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), got: x.len() });
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let mut solver = PhaseOneSimplex::new(s.dim(), s.n());
    Ok(solver.solve(s.basis(), x)? <= tol)
}

/// Rejection sampling of the uniform law on `K`, independent of the
/// tiling. Proposals are uniform in the exact axis-aligned bounding box
/// (half-widths `‖b_r‖₁`); acceptance is the LP membership test at
/// tolerance 1e-9.
pub fn rejection_sample(s: &Subspace, n_samples: usize, seed: u64) -> Result<SampleBatch> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    let m = s.dim();
    let half: Vec<f64> = (0..m)
        .map(|r| s.basis().row(r).iter().map(|v| abs(*v)).sum())
        .collect();
    let mut points = Vec::with_capacity(n_samples * m);
    let mut solver = PhaseOneSimplex::new(m, s.n());
    let mut x = vec![0.0; m];
    let batches = n_samples.div_ceil(SAMPLE_BATCH);
    for b in 0..batches {
        let quota = SAMPLE_BATCH.min(n_samples - b * SAMPLE_BATCH);
        let mut rng = stream_rng(seed, STREAM_REJECT + b as u64);
        let mut accepted = 0u64;
        let mut proposals = 0u64;
        while (accepted as usize) < quota {
            proposals += 1;
            for (xi, h) in x.iter_mut().zip(&half) {
                *xi = rng.random_range(-*h..*h);
            }
            if solver.solve(s.basis(), &x)? <= 1e-9 {
                points.extend_from_slice(&x);
                accepted += 1;
            } else if proposals >= GUARD_PROPOSALS
                && (accepted as f64) < MIN_ACCEPTANCE * proposals as f64
            {
                return Err(Error::AcceptanceTooLow { accepted, proposals });
            }
        }
    }
    Ok(SampleBatch {
        dim: m,
        points,
        tile_ids: Vec::new(),
        seed,
        method: SampleMethod::Rejection,
    })
}

/// Estimate `E|x|²` and `Var|x|²` from a batch, with standard errors
/// (variance SE via the fourth central moment).
pub fn mc_moments(b: &SampleBatch) -> Result<MCMoments> {
    let n = b.len();
    if n < 2 {
        return Err(Error::EmptyBatch { min: 2, got: n });
    }
    let nf = n as f64;
    let mut sum = NeumaierSum::new();
    for i in 0..n {
        sum.add(linalg::norm_sq(b.point(i)));
    }
    let mean = sum.value() / nf;
    let mut m2 = NeumaierSum::new();
    let mut m4 = NeumaierSum::new();
    for i in 0..n {
        let d = linalg::norm_sq(b.point(i)) - mean;
        m2.add(d * d);
        m4.add(d * d * d * d);
    }
    let var = m2.value() / (nf - 1.0);
    let fourth = m4.value() / nf;
    let se_mean = sqrt(var / nf);
    let var_of_var = ((fourth - var * var * (nf - 3.0) / (nf - 1.0)) / nf).max(0.0);
    Ok(MCMoments {
        mean_sq_hat: mean,
        var_sq_hat: var,
        se_mean,
        se_var: sqrt(var_of_var),
        n_samples: n,
    })
}

/// `|a - b| ≤ z·√(se_a² + se_b²)` — the combined-standard-error agreement
/// test used throughout the verification suites.
pub fn within_combined_se(a: f64, se_a: f64, b: f64, se_b: f64, z: f64) -> bool {
    abs(a - b) <= z * sqrt(se_a * se_a + se_b * se_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiling::{enumerate_tiling, locate, LocateOutcome, TilingTolerances};

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
    fn exact_sampler_hits_known_mean() {
        let t = enumerate_tiling(&diag_plane(), Some(&[1.0]), 0, &TilingTolerances::default())
            .unwrap();
        let b = sample_uniform(&t, 100_000, 42).unwrap();
        let mc = mc_moments(&b).unwrap();
        assert!(
            abs(mc.mean_sq_hat - 2.0 / 3.0) <= 4.0 * mc.se_mean,
            "{} vs 2/3 (se {})",
            mc.mean_sq_hat,
            mc.se_mean
        );
        assert!(
            abs(mc.var_sq_hat - 16.0 / 45.0) <= 4.0 * mc.se_var,
            "{} vs 16/45 (se {})",
            mc.var_sq_hat,
            mc.se_var
        );
    }

    #[test]
    fn exact_sampler_is_deterministic() {
        let t = enumerate_tiling(&diag_space(), None, 3, &TilingTolerances::default()).unwrap();
        let a = sample_uniform(&t, 5000, 9).unwrap();
        let b = sample_uniform(&t, 5000, 9).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.tile_ids, b.tile_ids);
        let c = sample_uniform(&t, 5000, 10).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn axis_aligned_samples_locate_in_single_tile() {
        let s = Subspace::axis_aligned(6, 2).unwrap();
        let t = enumerate_tiling(&s, None, 1, &TilingTolerances::default()).unwrap();
        let b = sample_uniform(&t, 500, 7).unwrap();
        for i in 0..b.len() {
            match locate(&t, b.point(i), 1e-9).unwrap() {
                LocateOutcome::Interior { tile, .. } => assert_eq!(tile, 0),
                other => panic!("expected interior of the single tile, got {other:?}"),
            }
        }
    }

    #[test]
    fn tile_frequencies_match_weights_chi_square() {
        // 3 equal tiles: χ² with 2 degrees of freedom; the critical value
        // at significance 1e-6 is -2·ln(1e-6) in closed form
        let t = enumerate_tiling(&diag_space(), Some(&[1.0]), 0, &TilingTolerances::default())
            .unwrap();
        let n = 30_000usize;
        let b = sample_uniform(&t, n, 5).unwrap();
        let mut counts = [0usize; 3];
        for &id in &b.tile_ids {
            counts[id as usize] += 1;
        }
        let mut chi2 = 0.0;
        for (i, tile) in t.tiles().iter().enumerate() {
            let expect = tile.weight * n as f64;
            let d = counts[i] as f64 - expect;
            chi2 += d * d / expect;
        }
        let critical = -2.0 * (1e-6f64).ln();
        assert!(chi2 <= critical, "chi2 {chi2} vs {critical}");
    }

    #[test]
    fn contains_examples() {
        let axis = Subspace::axis_aligned(5, 2).unwrap();
        assert!(contains(&axis, &[0.5, -0.9, 0.0], 1e-9).unwrap());
        assert!(!contains(&axis, &[1.01, 0.0, 0.0], 1e-9).unwrap());

        let plane = diag_plane();
        assert!(contains(&plane, &[1.0], 1e-9).unwrap());
        assert!(!contains(&plane, &[1.5], 1e-9).unwrap());
        // boundary of the segment at √2
        assert!(contains(&plane, &[core::f64::consts::SQRT_2 - 1e-12], 1e-9).unwrap());
        assert!(!contains(&plane, &[core::f64::consts::SQRT_2 + 1e-6], 1e-9).unwrap());
    }

    #[test]
    fn contains_support_function_oracle() {
        // the extreme point of K in direction d is the projection of the
        // cube vertex sign(Bᵀd), achieving ⟨d,·⟩ = ‖Bᵀd‖₁; shrinking it
        // stays inside (K is convex with 0 ∈ K), scaling it out leaves the
        // supporting halfspace
        let s = Subspace::haar(7, 2, 13).unwrap();
        let mut rng = stream_rng(99, 40);
        for _ in 0..20 {
            let mut d: Vec<f64> = (0..s.dim())
                .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let nrm = linalg::norm(&d);
            d.iter_mut().for_each(|v| *v /= nrm);
            let vertex: Vec<f64> = s
                .basis()
                .tr_matvec(&d)
                .iter()
                .map(|v| if *v >= 0.0 { 1.0 } else { -1.0 })
                .collect();
            let extreme = s.to_e_coords(&vertex).unwrap();
            let support: f64 = s.basis().tr_matvec(&d).iter().map(|v| abs(*v)).sum();
            approx(linalg::dot(&d, &extreme), support, 1e-12);
            let inside: Vec<f64> = extreme.iter().map(|v| v * 0.999).collect();
            let outside: Vec<f64> = extreme.iter().map(|v| v * 1.001).collect();
            assert!(contains(&s, &inside, 1e-9).unwrap());
            assert!(!contains(&s, &outside, 1e-9).unwrap());
        }
    }

    #[test]
    fn projected_cube_points_are_contained() {
        let s = Subspace::haar(8, 2, 21).unwrap();
        let mut rng = stream_rng(100, 41);
        for _ in 0..200 {
            let y: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = s.to_e_coords(&y).unwrap();
            assert!(contains(&s, &x, 1e-9).unwrap());
        }
    }

    #[test]
    fn rejection_box_is_tight_for_flat_cases() {
        // for the diagonal line the box equals the shadow, so everything
        // is accepted and the estimates match the exact values
        let plane = diag_plane();
        let b = rejection_sample(&plane, 50_000, 4).unwrap();
        assert_eq!(b.len(), 50_000);
        let mc = mc_moments(&b).unwrap();
        assert!(abs(mc.mean_sq_hat - 2.0 / 3.0) <= 4.0 * mc.se_mean);
        assert!(b.tile_ids.is_empty());
    }

    #[test]
    fn axis_aligned_rejection_accepts_everything() {
        // box half-widths are the ℓ₁ row norms, which equal 1 for an
        // axis-aligned basis, so the box IS the shadow: replaying the raw
        // proposal stream must reproduce the accepted points one for one
        let s = Subspace::axis_aligned(5, 2).unwrap();
        let n_samples = 6000;
        let b = rejection_sample(&s, n_samples, 33).unwrap();
        let mut replay = Vec::with_capacity(n_samples * 3);
        for batch in 0..n_samples.div_ceil(SAMPLE_BATCH) {
            let quota = SAMPLE_BATCH.min(n_samples - batch * SAMPLE_BATCH);
            let mut rng = stream_rng(33, STREAM_REJECT + batch as u64);
            for _ in 0..quota {
                for _ in 0..3 {
                    replay.push(rng.random_range(-1.0f64..1.0));
                }
            }
        }
        assert_eq!(b.points, replay);
    }

    #[test]
    fn rejection_matches_exact_sampler() {
        let s = diag_space();
        let rej = rejection_sample(&s, 60_000, 17).unwrap();
        let mc_r = mc_moments(&rej).unwrap();
        approx(mc_r.mean_sq_hat, 10.0 / 9.0, 4.0 * mc_r.se_mean);

        let t = enumerate_tiling(&s, None, 17, &TilingTolerances::default()).unwrap();
        let exa = sample_uniform(&t, 60_000, 18).unwrap();
        let mc_e = mc_moments(&exa).unwrap();
        assert!(within_combined_se(
            mc_r.mean_sq_hat,
            mc_r.se_mean,
            mc_e.mean_sq_hat,
            mc_e.se_mean,
            4.0
        ));
        assert!(within_combined_se(
            mc_r.var_sq_hat,
            mc_r.se_var,
            mc_e.var_sq_hat,
            mc_e.se_var,
            4.0
        ));

        // every rejection-accepted point locates in a valid tile
        for i in 0..200 {
            assert!(!matches!(
                locate(&t, rej.point(i), 1e-9).unwrap(),
                LocateOutcome::Outside
            ));
        }
    }

    #[test]
    fn rejection_is_deterministic() {
        let s = Subspace::haar(6, 1, 2).unwrap();
        let a = rejection_sample(&s, 2000, 77).unwrap();
        let b = rejection_sample(&s, 2000, 77).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn exact_sampler_points_pass_membership() {
        let s = Subspace::haar(7, 2, 31).unwrap();
        let t = enumerate_tiling(&s, None, 31, &TilingTolerances::default()).unwrap();
        let b = sample_uniform(&t, 2000, 1).unwrap();
        for i in 0..b.len() {
            assert!(contains(&s, b.point(i), 1e-9).unwrap());
        }
    }

    #[test]
    fn mc_moments_degenerate_batch() {
        let b = SampleBatch {
            dim: 2,
            points: vec![0.3, 0.4, 0.3, 0.4, 0.3, 0.4],
            tile_ids: vec![],
            seed: 0,
            method: SampleMethod::Rejection,
        };
        let mc = mc_moments(&b).unwrap();
        approx(mc.var_sq_hat, 0.0, 1e-15);
        approx(mc.mean_sq_hat, 0.25, 1e-15);

        let tiny = SampleBatch {
            dim: 1,
            points: vec![0.1],
            tile_ids: vec![],
            seed: 0,
            method: SampleMethod::Rejection,
        };
        assert!(matches!(mc_moments(&tiny), Err(Error::EmptyBatch { min: 2, got: 1 })));
    }
}
