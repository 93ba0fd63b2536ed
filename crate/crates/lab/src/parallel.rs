//! Deterministic parallel drive of the tile scan.
//!
//! The subset range `0..C(m,k)` is cut into fixed chunks of
//! [`TILE_CHUNK`] ranks. Chunks are processed by rayon in any order, then
//! merged in rank order, so the result is identical for every thread
//! count (including one).

use anyhow::Result;
use rayon::prelude::*;

use cube_shadows_core::moments::{accumulate_range, MomentAccumulator, MomentReport, TILE_CHUNK};
use cube_shadows_core::subspace::Subspace;
use cube_shadows_core::tiling::{
    det_scan_range, run_with_direction, subset_space, TilingTolerances,
};

fn chunk_grid(count: u64) -> Vec<(u64, u64)> {
    let end = count.max(1);
    let mut grid = Vec::with_capacity(end.div_ceil(TILE_CHUNK) as usize);
    let mut lo = 0;
    while lo < end {
        let hi = (lo + TILE_CHUNK).min(end);
        grid.push((lo, hi));
        lo = hi;
    }
    grid
}

/// Parallel equivalent of `cube_shadows_core::moments::streaming_report`.
pub fn streaming_report_par(
    s: &Subspace,
    direction: Option<&[f64]>,
    seed: u64,
    tol: &TilingTolerances,
) -> Result<(MomentReport, Vec<f64>), cube_shadows_core::Error> {
    let space = subset_space(s, tol)?;
    let grid = chunk_grid(space.count());
    let dets: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&(lo, hi)| det_scan_range(s, &space, lo, hi))
        .collect();
    let max_det = dets
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0f64, |m, &d| m.max(d));
    if max_det <= 0.0 {
        return Err(cube_shadows_core::Error::DegenerateSubspace);
    }
    let cutoff = tol.det_rel * max_det;

    let (acc, xi) = run_with_direction(s, direction, seed, tol, |xi| {
        let partials: Result<Vec<MomentAccumulator>, cube_shadows_core::Error> = grid
            .par_iter()
            .zip(&dets)
            .map(|(&(lo, hi), chunk)| {
                let mut acc = MomentAccumulator::new(s);
                accumulate_range(s, &space, xi, chunk, cutoff, tol.sign_rel, lo, hi, &mut acc)?;
                Ok(acc)
            })
            .collect();
        let mut it = partials?.into_iter();
        let mut head = it.next().expect("grid is nonempty");
        for p in it {
            head.merge(p);
        }
        Ok(head)
    })?;
    Ok((acc.finalize(s)?, xi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use cube_shadows_core::moments::streaming_report;

    #[test]
    fn parallel_matches_sequential_chunked() {
        // same chunk grid, same merge order: results agree to the last bit
        for seed in 0..3 {
            let s = Subspace::haar(11, 3, seed).unwrap();
            let tol = TilingTolerances::default();
            let (a, xi_a) = streaming_report(&s, None, seed, &tol).unwrap();
            let (b, xi_b) = streaming_report_par(&s, None, seed, &tol).unwrap();
            assert_eq!(xi_a, xi_b);
            assert_eq!(a.l, b.l);
            assert_eq!(a.mean_sq.to_bits(), b.mean_sq.to_bits());
            assert_eq!(a.variance.to_bits(), b.variance.to_bits());
            assert_eq!(a.lambda_sq.to_bits(), b.lambda_sq.to_bits());
        }
    }
}
