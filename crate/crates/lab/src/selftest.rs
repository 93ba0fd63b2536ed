//! The built-in verification suite behind `cube-shadows selftest`.
//!
//! Each suite re-derives one of the library's contracts at desk scale:
//! exact identities at tight tolerances, statistical agreements at four
//! combined standard errors. The full-size counterparts live in the
//! acceptance test target; this command is the quick field check.

use std::time::Instant;

use cube_shadows_core::linalg::{self, Matrix};
use cube_shadows_core::moments::{
    body_report, centered_quadratic_variance, face_moment, face_moment_dir, streaming_report,
};
use cube_shadows_core::rng::{derive_seed, stream_rng};
use cube_shadows_core::sampler::{
    contains, mc_moments, rejection_sample, sample_uniform, within_combined_se,
};
use cube_shadows_core::subspace::{haar_unit_vector, Subspace};
use cube_shadows_core::tiling::{
    enumerate_tiling, locate, zonotope_volume, LocateOutcome, TilingTolerances,
};
use rand::Rng;

use crate::stats::{chi_square_critical, chi_square_statistic};

type SuiteResult = Result<(), String>;

fn fail(msg: String) -> SuiteResult {
    Err(msg)
}

fn subspace_invariants() -> SuiteResult {
    for seed in 0..20 {
        let s = Subspace::haar(10, 2, seed).unwrap();
        let err = s.orthonormality_error();
        if err > 1e-12 {
            return fail(format!("orthonormality residual {err} at seed {seed}"));
        }
        let p = s.projector();
        let q = s.complement_basis().transpose().matmul(s.complement_basis());
        let mut sum = p.clone();
        sum.add_assign(&q);
        let dev = sum.sub(&Matrix::identity(10)).max_abs();
        if dev > 1e-10 {
            return fail(format!("P + P⊥ deviates from identity by {dev}"));
        }
    }
    Ok(())
}

fn weight_normalization() -> SuiteResult {
    let tol = TilingTolerances::default();
    for (n, k) in [(8usize, 2usize), (10, 2)] {
        for seed in 0..10 {
            let s = Subspace::haar(n, k, derive_seed(1, seed)).unwrap();
            let t = enumerate_tiling(&s, None, seed, &tol).unwrap();
            let wsum: f64 = t.tiles().iter().map(|x| x.weight).sum();
            if (wsum - 1.0).abs() > 1e-10 {
                return fail(format!("weights sum to {wsum} at (n,k)=({n},{k}) seed {seed}"));
            }
            let mut bal = vec![0.0; s.dim()];
            for tile in t.tiles() {
                linalg::axpy(tile.weight, &tile.shift, &mut bal);
            }
            if bal.iter().any(|&x| x.abs() > 1e-10) {
                return fail(format!("weighted shifts unbalanced at seed {seed}"));
            }
        }
    }
    Ok(())
}

fn volume_cross_check() -> SuiteResult {
    let tol = TilingTolerances::default();
    for (n, k) in [(8usize, 1usize), (8, 2), (10, 2), (12, 3)] {
        for seed in 0..5 {
            let s = Subspace::haar(n, k, derive_seed(2, seed)).unwrap();
            let t = enumerate_tiling(&s, None, seed, &tol).unwrap();
            let zv = zonotope_volume(&s).unwrap();
            let rel = (t.total_volume() - zv).abs() / zv;
            if rel > 1e-9 {
                return fail(format!(
                    "tiling volume {} vs zonotope {zv} (rel {rel}) at ({n},{k})",
                    t.total_volume()
                ));
            }
        }
    }
    Ok(())
}

fn translation_identity() -> SuiteResult {
    let mut rng = stream_rng(3, 1);
    for trial in 0..10 {
        let m = 2 + trial % 3;
        let mut tmat = Matrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                tmat.set(i, j, rng.random_range(-1.0..1.0));
            }
        }
        let a: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let q = tmat.gram_cols();
        let tta = tmat.tr_matvec(&a);
        let exact = centered_quadratic_variance(&q).unwrap()
            + (4.0 / 3.0) * tta.iter().map(|v| v * v).sum::<f64>();
        let n_mc = 200_000;
        let (mut s1, mut s2, mut s3, mut s4) = (0.0f64, 0.0, 0.0, 0.0);
        let mut u = vec![0.0; m];
        for _ in 0..n_mc {
            for ui in u.iter_mut() {
                *ui = rng.random_range(-1.0..1.0);
            }
            let mut x = tmat.matvec(&u);
            for (xi, ai) in x.iter_mut().zip(&a) {
                *xi += ai;
            }
            let v: f64 = x.iter().map(|c| c * c).sum();
            s1 += v;
            s2 += v * v;
            s3 += v * v * v;
            s4 += v * v * v * v;
        }
        let nf = n_mc as f64;
        let mean = s1 / nf;
        let var = s2 / nf - mean * mean;
        let m4 = s4 / nf - 4.0 * mean * s3 / nf + 6.0 * mean * mean * s2 / nf
            - 3.0 * mean.powi(4);
        let se = ((m4 - var * var).max(0.0) / nf).sqrt() + 1e-12;
        if (var - exact).abs() > 4.0 * se {
            return fail(format!("trial {trial}: MC {var} vs exact {exact} (se {se})"));
        }
    }
    Ok(())
}

fn directional_moment_consistency() -> SuiteResult {
    // face_moment_dir(f, θ) - ⟨a_F, θ⟩² = 1/3 - (1/3)Σ θ_{i_j}², exactly
    let mut rng = stream_rng(4, 2);
    for seed in 0..5 {
        let s = Subspace::haar(9, 2, derive_seed(4, seed)).unwrap();
        let t = enumerate_tiling(&s, None, seed, &TilingTolerances::default()).unwrap();
        for tile in t.tiles().iter().take(4) {
            let g = haar_unit_vector(s.dim(), &mut rng);
            let theta = s.embed(&g).unwrap();
            let theta_e = s.to_e_coords(&theta).unwrap();
            let val = face_moment_dir(&s, &tile.face, &theta)
                .map_err(|e| format!("direction rejected: {e}"))?;
            let sdot = linalg::dot(&tile.shift, &theta_e);
            let fixed_sq: f64 = tile.face.fixed0().map(|j| theta[j] * theta[j]).sum();
            let dev = (val - sdot * sdot - (1.0 / 3.0 - fixed_sq / 3.0)).abs();
            if dev > 1e-10 {
                return fail(format!("directional identity off by {dev}"));
            }
        }
    }
    Ok(())
}

fn sphere_average_identity() -> SuiteResult {
    let s = Subspace::haar(8, 2, 11).unwrap();
    let t = enumerate_tiling(&s, None, 11, &TilingTolerances::default()).unwrap();
    let tile = &t.tiles()[0];
    let mut rng = stream_rng(5, 3);
    let draws = 1000;
    let (mut sum, mut sumsq) = (0.0f64, 0.0f64);
    for _ in 0..draws {
        let g = haar_unit_vector(s.dim(), &mut rng);
        let theta = s.embed(&g).unwrap();
        let v = s.dim() as f64 * face_moment_dir(&s, &tile.face, &theta).unwrap();
        sum += v;
        sumsq += v * v;
    }
    let mean = sum / draws as f64;
    let se = (((sumsq / draws as f64 - mean * mean).max(0.0)) / draws as f64).sqrt();
    let exact = face_moment(&s, &tile.face).unwrap();
    if (mean - exact).abs() > 4.0 * se {
        return fail(format!("sphere average {mean} vs face moment {exact} (se {se})"));
    }
    Ok(())
}

fn sampler_oracle_equivalence() -> SuiteResult {
    let tol = TilingTolerances::default();
    for (n, k, seed) in [(6usize, 1usize, 0u64), (6, 2, 1), (7, 2, 2)] {
        let s = Subspace::haar(n, k, derive_seed(6, seed)).unwrap();
        let t = enumerate_tiling(&s, None, seed, &tol).unwrap();
        let exact = mc_moments(&sample_uniform(&t, 30_000, seed).unwrap()).unwrap();
        let rej = mc_moments(&rejection_sample(&s, 30_000, seed + 1).unwrap()).unwrap();
        if !within_combined_se(exact.mean_sq_hat, exact.se_mean, rej.mean_sq_hat, rej.se_mean, 4.0)
        {
            return fail(format!(
                "mean mismatch at ({n},{k}): exact {} vs rejection {}",
                exact.mean_sq_hat, rej.mean_sq_hat
            ));
        }
        if !within_combined_se(exact.var_sq_hat, exact.se_var, rej.var_sq_hat, rej.se_var, 4.0) {
            return fail(format!(
                "variance mismatch at ({n},{k}): exact {} vs rejection {}",
                exact.var_sq_hat, rej.var_sq_hat
            ));
        }
        let report = body_report(&t).unwrap();
        if (report.mean_sq - exact.mean_sq_hat).abs() > 4.0 * exact.se_mean {
            return fail(format!("closed-form mean outside sampler band at ({n},{k})"));
        }
        if (report.variance - exact.var_sq_hat).abs() > 4.0 * exact.se_var {
            return fail(format!("closed-form variance outside sampler band at ({n},{k})"));
        }
    }
    Ok(())
}

fn membership_consistency() -> SuiteResult {
    let s = Subspace::haar(7, 2, 13).unwrap();
    let t = enumerate_tiling(&s, None, 13, &TilingTolerances::default()).unwrap();
    let b = sample_uniform(&t, 2000, 0).unwrap();
    for i in 0..b.len() {
        if !contains(&s, b.point(i), 1e-9).map_err(|e| e.to_string())? {
            return fail(format!("exact-sampler point {i} failed membership"));
        }
    }
    let r = rejection_sample(&s, 1000, 1).unwrap();
    for i in 0..r.len() {
        if matches!(locate(&t, r.point(i), 1e-9).unwrap(), LocateOutcome::Outside) {
            return fail(format!("rejection point {i} not located in any tile"));
        }
    }
    Ok(())
}

fn tile_frequency_chi_square() -> SuiteResult {
    let s = Subspace::haar(10, 2, 21).unwrap();
    let t = enumerate_tiling(&s, None, 21, &TilingTolerances::default()).unwrap();
    let n = 20_000usize;
    let b = sample_uniform(&t, n, 9).unwrap();
    let mut counts = vec![0u64; t.len()];
    for &id in &b.tile_ids {
        counts[id as usize] += 1;
    }
    let probs: Vec<f64> = t.tiles().iter().map(|x| x.weight).collect();
    let chi2 = chi_square_statistic(&counts, &probs);
    let critical = chi_square_critical((t.len() - 1) as f64, 1e-6);
    if chi2 > critical {
        return fail(format!("chi-square {chi2} above critical {critical}"));
    }
    Ok(())
}

fn closed_form_bounds_ensemble() -> SuiteResult {
    let tol = TilingTolerances::default();
    for k in 1..=3usize {
        for trial in 0..30u64 {
            let seed = derive_seed(7 + k as u64, trial);
            let s = Subspace::haar(14, k, seed).unwrap();
            let (r, _) = streaming_report(&s, None, seed, &tol).unwrap();
            if !(r.bound_flags.mean_within_bounds
                && r.bound_flags.lambda_above_lower
                && r.bound_flags.face_dev_within_bound)
            {
                return fail(format!("bound violation at k={k} trial {trial}"));
            }
        }
    }
    Ok(())
}

fn determinism() -> SuiteResult {
    let s1 = Subspace::haar(9, 2, 123).unwrap();
    let s2 = Subspace::haar(9, 2, 123).unwrap();
    if s1.basis().data() != s2.basis().data() {
        return fail("haar draw not reproducible".into());
    }
    let tol = TilingTolerances::default();
    let (a, _) = streaming_report(&s1, None, 123, &tol).unwrap();
    let (b, _) = streaming_report(&s2, None, 123, &tol).unwrap();
    if a.ratio.to_bits() != b.ratio.to_bits() {
        return fail("streaming report not bit-stable".into());
    }
    let t = enumerate_tiling(&s1, None, 123, &tol).unwrap();
    let x = sample_uniform(&t, 4000, 5).unwrap();
    let y = sample_uniform(&t, 4000, 5).unwrap();
    if x.points != y.points {
        return fail("sampler not bit-stable".into());
    }
    Ok(())
}

/// Run every suite, printing one status line each; returns `true` when all
/// pass.
type Suite = (&'static str, fn() -> SuiteResult);

pub fn run_all(out: &mut dyn std::io::Write) -> std::io::Result<bool> {
    let suites: Vec<Suite> = vec![
        ("subspace-invariants", subspace_invariants),
        ("weight-normalization", weight_normalization),
        ("volume-cross-check", volume_cross_check),
        ("translation-identity", translation_identity),
        ("directional-moment-consistency", directional_moment_consistency),
        ("sphere-average-identity", sphere_average_identity),
        ("sampler-oracle-equivalence", sampler_oracle_equivalence),
        ("membership-consistency", membership_consistency),
        ("tile-frequency-chi-square", tile_frequency_chi_square),
        ("closed-form-bounds-ensemble", closed_form_bounds_ensemble),
        ("determinism", determinism),
    ];
    let mut all_ok = true;
    for (name, suite) in suites {
        let start = Instant::now();
        match suite() {
            Ok(()) => {
                writeln!(out, "PASS {name} ({:.2}s)", start.elapsed().as_secs_f64())?;
            }
            Err(msg) => {
                all_ok = false;
                writeln!(out, "FAIL {name}: {msg}")?;
            }
        }
    }
    Ok(all_ok)
}

#[cfg(test)]
mod tests {
    #[test]
    fn selftest_passes() {
        let mut buf = Vec::new();
        assert!(super::run_all(&mut buf).unwrap(), "{}", String::from_utf8_lossy(&buf));
    }
}
