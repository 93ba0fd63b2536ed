//! The face tiling of a cube shadow.
//!
//! For a subspace `E` with codimension `k ≥ 1`, the shadow `K = P_E(B∞ⁿ)`
//! is tiled by the projections of certain `(n-k)`-faces of the cube. A face
//! fixes `k` coordinates at signs `ε`, and its projection is the affine
//! cube image `P_E(F) = a_F + T_F(B∞^{n-k})`.
//!
//! The tiling is selected by a generic sweep direction `ξ ∈ E⊥`: over the
//! fiber of an interior shadow point, the tiling face is the one maximizing
//! `⟨ξ, ·⟩`, which happens exactly when the fixed-coordinate normals
//! `ε_i·P_{E⊥} e_i` positively span `ξ`. Concretely, for each `k`-subset
//! `S` of coordinates let `M_S` be the `k×k` matrix whose columns are the
//! `E⊥`-coordinates of `P_{E⊥} e_i`, `i ∈ S`. If `M_S` is nonsingular,
//! solving `M_S·c = ξ` and taking `ε_i = sign(c_i)` yields the unique sign
//! pattern whose face belongs to the tiling.
//!
//! Tile volumes are `2^{n-k}·|det T_F|`, and `|det T_F| = |det M_S|`
//! because complementary minors of a matrix with orthonormal rows agree in
//! absolute value; enumeration uses the cheap `k×k` determinant and the
//! tests pin the identity against the direct `(n-k)×(n-k)` one.
//!
//! Enumeration is rank-driven: subsets are indexed `0..count` in
//! lexicographic order, so ranges can be scanned independently (and in
//! parallel by the companion crate) while keeping one global order.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::combinatorics::{binomial_capped, next_combination, unrank_combination};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::math::{abs, NeumaierSum};
use crate::rng::{stream_rng, STREAM_DIRECTION};
use crate::subspace::{haar_unit_vector, Subspace};

/// An `(n-k)`-face of the cube: `k` fixed coordinates and their signs.
///
/// Coordinate indices are 1-based (the convention of the exported file
/// formats) and strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Face {
    fixed: Vec<u32>,
    signs: Vec<i8>,
}

impl Face {
    pub fn new(fixed: Vec<u32>, signs: Vec<i8>, n: usize) -> Result<Self> {
        if fixed.len() != signs.len() {
            return Err(Error::InvalidParameter(format!(
                "face has {} indices but {} signs",
                fixed.len(),
                signs.len()
            )));
        }
        for w in fixed.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidParameter(
                    "face indices must be strictly increasing".into(),
                ));
            }
        }
        if let (Some(&first), Some(&last)) = (fixed.first(), fixed.last()) {
            if first < 1 || last as usize > n {
                return Err(Error::InvalidParameter(format!(
                    "face indices must lie in [1, {n}]"
                )));
            }
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidParameter("face signs must be ±1".into()));
        }
        Ok(Self { fixed, signs })
    }

    /// 1-based fixed coordinate indices, ascending.
    pub fn fixed(&self) -> &[u32] {
        &self.fixed
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn k(&self) -> usize {
        self.fixed.len()
    }

    /// 0-based fixed coordinate indices.
    pub fn fixed0(&self) -> impl Iterator<Item = usize> + '_ {
        self.fixed.iter().map(|&i| i as usize - 1)
    }

    /// The spanning cube vertex `Σ_j ε_j e_{i_j}` in ambient coordinates.
    pub fn vertex(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for (i0, &s) in self.fixed0().zip(self.signs.iter()) {
            v[i0] = s as f64;
        }
        v
    }
}

/// Affine description of a projected face, `P_E(F) = shift + map·B∞^{n-k}`,
/// in E-coordinates.
#[derive(Clone, Debug)]
pub struct TileGeometry {
    /// `a_F` in E-coordinates.
    pub shift: Vec<f64>,
    /// `T_F`: columns are the E-coordinates of `P_E e_j` over free `j`,
    /// ascending.
    pub map: Matrix,
    /// `Q = T_Fᵀ·T_F`.
    pub gram: Matrix,
    /// `2^{n-k}·|det T_F|`.
    pub volume: f64,
}

/// One tile of the shadow. The linear map is recomputed on demand via
/// [`Tiling::geometry`]; storing it per tile would cost `O(l·(n-k)²)`
/// memory, prohibitive at large subset counts.
#[derive(Clone, Debug)]
pub struct Tile {
    pub face: Face,
    /// `|P_E(F)| / |K|`.
    pub weight: f64,
    pub volume: f64,
    /// `a_F` in E-coordinates.
    pub shift: Vec<f64>,
}

/// The tiling of `K = P_E(B∞ⁿ)`: faces, weights, volumes and the sweep
/// direction that produced them. Tiles are sorted by (subset, signs), which
/// is the lexicographic enumeration order.
#[derive(Clone, Debug)]
pub struct Tiling {
    subspace: Subspace,
    tiles: Vec<Tile>,
    total_volume: f64,
    /// Sweep direction in E⊥-coordinates.
    direction: Vec<f64>,
}

impl Tiling {
    pub fn subspace(&self) -> &Subspace {
        &self.subspace
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    /// Number of tiles `l`.
    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn total_volume(&self) -> f64 {
        self.total_volume
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    /// Recompute the affine geometry of tile `i`.
    pub fn geometry(&self, i: usize) -> TileGeometry {
        tile_geometry(&self.subspace, &self.tiles[i].face)
            .expect("stored face is valid for its subspace")
    }
}

/// Result of point location in a tiling.
#[derive(Clone, Debug, PartialEq)]
pub enum LocateOutcome {
    /// Exactly one tile contains the point.
    Interior { tile: usize, preimage: Vec<f64> },
    /// Two or more tiles accept within tolerance; the lowest index is
    /// returned along with all candidates.
    Boundary { tile: usize, candidates: Vec<usize>, preimage: Vec<f64> },
    /// The point lies outside the shadow.
    Outside,
}

/// Tolerances and caps for tiling enumeration.
#[derive(Clone, Debug)]
pub struct TilingTolerances {
    /// Subsets with `|det M_S| ≤ det_rel·max_S |det M_S|` are excluded as
    /// degenerate (scale-aware cutoff).
    pub det_rel: f64,
    /// `|c_i| ≤ sign_rel·|c|∞` in the sign solve means the sweep direction
    /// lies on a cone facet.
    pub sign_rel: f64,
    /// Box-constraint slack accepted by point location.
    pub locate_tol: f64,
    /// Resampling budget for an auto-drawn sweep direction.
    pub direction_attempts: u32,
    /// Hard cap on the number of enumerated subsets.
    pub subset_cap: u64,
    /// Generator columns with sup-norm below this are pruned up front;
    /// they cannot participate in any nonsingular subset.
    pub column_prune: f64,
}

impl Default for TilingTolerances {
    fn default() -> Self {
        Self {
            det_rel: 1e-10,
            sign_rel: 1e-10,
            locate_tol: 1e-9,
            direction_attempts: 16,
            subset_cap: 10_000_000,
            column_prune: 1e-13,
        }
    }
}

/// The effective subset enumeration for a subspace after column pruning.
#[derive(Clone, Debug)]
pub struct SubsetSpace {
    /// 0-based ambient coordinate indices kept after pruning, ascending.
    indices: Vec<usize>,
    k: usize,
    count: u64,
}

impl SubsetSpace {
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Prune complement columns that are numerically zero (their coordinates
/// can never be fixed by a tile) and check the enumeration cap on what
/// remains.
pub fn subset_space(s: &Subspace, tol: &TilingTolerances) -> Result<SubsetSpace> {
    let k = s.k();
    let c = s.complement_basis();
    let mut indices = Vec::new();
    for j in 0..s.n() {
        let sup = (0..k).fold(0.0f64, |m, r| m.max(abs(c.get(r, j))));
        if sup > tol.column_prune {
            indices.push(j);
        }
    }
    if indices.len() < k {
        return Err(Error::DegenerateSubspace);
    }
    let count = binomial_capped(indices.len() as u64, k as u64, tol.subset_cap)
        .ok_or(Error::TooManySubsets {
            count: full_count(indices.len() as u64, k as u64),
            cap: tol.subset_cap,
        })?;
    Ok(SubsetSpace { indices, k, count })
}

fn full_count(m: u64, k: u64) -> u128 {
    // count for the error message only; saturate instead of overflowing
    let k = k.min(m - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((m - i) as u128) / (i + 1) as u128;
    }
    acc
}

/// `|det M_S|` for every subset rank in `lo..hi`, in rank order.
pub fn det_scan_range(s: &Subspace, space: &SubsetSpace, lo: u64, hi: u64) -> Vec<f64> {
    let k = space.k;
    let c = s.complement_basis();
    let mut out = Vec::with_capacity((hi.saturating_sub(lo)) as usize);
    if k == 0 {
        if lo == 0 && hi >= 1 {
            out.push(1.0);
        }
        return out;
    }
    if lo >= hi {
        return out;
    }
    let mut comb: Vec<usize> = Vec::with_capacity(k);
    unrank_combination(space.indices.len(), k, lo, &mut comb);
    let mut m = Matrix::zeros(k, k);
    let mut rank = lo;
    loop {
        for (col, &pos) in comb.iter().enumerate() {
            let amb = space.indices[pos];
            for row in 0..k {
                m.set(row, col, c.get(row, amb));
            }
        }
        out.push(abs(linalg::lu_det(&m)));
        rank += 1;
        if rank >= hi || !next_combination(space.indices.len(), &mut comb) {
            break;
        }
    }
    out
}

/// A tile discovered during enumeration, borrowed from scan buffers.
#[derive(Debug)]
pub struct TileRef<'a> {
    /// 0-based ambient indices of the fixed coordinates, ascending.
    pub fixed0: &'a [usize],
    pub signs: &'a [i8],
    /// `|det M_S| = |det T_F|`.
    pub abs_det: f64,
    /// Global subset rank.
    pub rank: u64,
}

/// Walk subset ranks `lo..hi` and invoke `visit` on each accepted tile.
///
/// `dets` must be the determinant scan for the same range (`dets[i]` is
/// rank `lo + i`) and `cutoff` the absolute determinant cutoff. Fails with
/// [`Error::DegenerateDirection`] when the sign solve is ambiguous for a
/// nondegenerate subset.
#[allow(clippy::too_many_arguments)]
pub fn for_each_tile_range(
    s: &Subspace,
    space: &SubsetSpace,
    xi: &[f64],
    dets: &[f64],
    cutoff: f64,
    lo: u64,
    hi: u64,
    sign_rel: f64,
    visit: &mut dyn FnMut(TileRef<'_>),
) -> Result<()> {
    let k = space.k;
    let c = s.complement_basis();
    if k == 0 {
        if lo == 0 && hi >= 1 {
            visit(TileRef { fixed0: &[], signs: &[], abs_det: 1.0, rank: 0 });
        }
        return Ok(());
    }
    if lo >= hi {
        return Ok(());
    }
    debug_assert_eq!(dets.len() as u64, hi - lo);
    let mut comb: Vec<usize> = Vec::with_capacity(k);
    unrank_combination(space.indices.len(), k, lo, &mut comb);
    let mut m = Matrix::zeros(k, k);
    let mut fixed = vec![0usize; k];
    let mut signs = vec![0i8; k];
    let mut rank = lo;
    loop {
        let det = dets[(rank - lo) as usize];
        if det > cutoff {
            for (col, &pos) in comb.iter().enumerate() {
                let amb = space.indices[pos];
                fixed[col] = amb;
                for row in 0..k {
                    m.set(row, col, c.get(row, amb));
                }
            }
            let coeffs = linalg::lu_solve(&m, xi, 1e-300)
                .ok_or(Error::NumericalFailure("sign solve on nonsingular subset failed"))?;
            let cmax = coeffs.iter().fold(0.0f64, |mx, &v| mx.max(abs(v)));
            if coeffs.iter().any(|&v| abs(v) <= sign_rel * cmax) {
                return Err(Error::DegenerateDirection { attempts: 1 });
            }
            for (sg, &v) in signs.iter_mut().zip(&coeffs) {
                *sg = if v > 0.0 { 1 } else { -1 };
            }
            visit(TileRef { fixed0: &fixed, signs: &signs, abs_det: det, rank });
        }
        rank += 1;
        if rank >= hi || !next_combination(space.indices.len(), &mut comb) {
            break;
        }
    }
    Ok(())
}

/// Affine geometry of one projected face, built directly from the face.
pub fn tile_geometry(s: &Subspace, f: &Face) -> Result<TileGeometry> {
    let n = s.n();
    let m = s.dim();
    if f.k() != s.k() {
        return Err(Error::InvalidParameter(format!(
            "face fixes {} coordinates but subspace has codimension {}",
            f.k(),
            s.k()
        )));
    }
    if let Some(&last) = f.fixed().last() {
        if last as usize > n {
            return Err(Error::InvalidParameter(format!(
                "face index {last} exceeds n = {n}"
            )));
        }
    }
    let shift = s.to_e_coords(&f.vertex(n))?;
    let mut map = Matrix::zeros(m, m);
    let mut col = 0;
    let mut fixed_iter = f.fixed0().peekable();
    for j in 0..n {
        if fixed_iter.peek() == Some(&j) {
            fixed_iter.next();
            continue;
        }
        for row in 0..m {
            map.set(row, col, s.basis().get(row, j));
        }
        col += 1;
    }
    debug_assert_eq!(col, m);
    let gram = map.gram_cols();
    let volume = pow2(m) * abs(linalg::lu_det(&map));
    Ok(TileGeometry { shift, map, gram, volume })
}

/// `2^m`, exactly.
#[inline]
pub(crate) fn pow2(m: usize) -> f64 {
    let mut v = 1.0;
    for _ in 0..m {
        v *= 2.0;
    }
    v
}

/// E-coordinates of the face vertex `Σ_j ε_j e_{i_j}` from raw parts.
pub(crate) fn face_shift(s: &Subspace, fixed0: &[usize], signs: &[i8]) -> Vec<f64> {
    let mut shift = vec![0.0; s.dim()];
    for (&j, &sg) in fixed0.iter().zip(signs) {
        let col = s.basis_column(j);
        linalg::axpy(sg as f64, &col, &mut shift);
    }
    shift
}

/// Run `build` under a sweep direction: the supplied one (validated, no
/// retry) or Haar-random unit directions drawn from `seed` with up to
/// `tol.direction_attempts` resamples on degeneracy. Returns the result
/// together with the direction that succeeded.
pub fn run_with_direction<T>(
    s: &Subspace,
    direction: Option<&[f64]>,
    seed: u64,
    tol: &TilingTolerances,
    mut build: impl FnMut(&[f64]) -> Result<T>,
) -> Result<(T, Vec<f64>)> {
    let k = s.k();
    match direction {
        Some(xi) => {
            if xi.len() != k {
                return Err(Error::DimensionMismatch { expected: k, got: xi.len() });
            }
            if linalg::norm(xi) == 0.0 {
                return Err(Error::InvalidParameter("sweep direction must be nonzero".into()));
            }
            Ok((build(xi)?, xi.to_vec()))
        }
        None if k == 0 => Ok((build(&[])?, Vec::new())),
        None => {
            let mut rng = stream_rng(seed, STREAM_DIRECTION);
            let mut attempts = 0;
            loop {
                let xi = haar_unit_vector(k, &mut rng);
                attempts += 1;
                match build(&xi) {
                    Ok(t) => break Ok((t, xi)),
                    Err(Error::DegenerateDirection { .. }) => {
                        if attempts >= tol.direction_attempts {
                            break Err(Error::DegenerateDirection { attempts });
                        }
                    }
                    Err(e) => break Err(e),
                }
            }
        }
    }
}

/// Enumerate the tiling of `K = P_E(B∞ⁿ)`.
///
/// `direction` supplies the sweep direction `ξ` in E⊥-coordinates; when
/// absent, a Haar-random unit direction is drawn from `seed` and resampled
/// up to `tol.direction_attempts` times if degenerate. An explicitly
/// supplied degenerate direction fails immediately.
pub fn enumerate_tiling(
    s: &Subspace,
    direction: Option<&[f64]>,
    seed: u64,
    tol: &TilingTolerances,
) -> Result<Tiling> {
    let space = subset_space(s, tol)?;
    let dets = det_scan_range(s, &space, 0, space.count());
    let max_det = dets.iter().fold(0.0f64, |m, &d| m.max(d));
    if max_det <= 0.0 {
        return Err(Error::DegenerateSubspace);
    }
    let cutoff = tol.det_rel * max_det;

    let build = |xi: &[f64]| -> Result<Vec<Tile>> {
        let mut tiles = Vec::new();
        for_each_tile_range(
            s,
            &space,
            xi,
            &dets,
            cutoff,
            0,
            space.count(),
            tol.sign_rel,
            &mut |t| {
                let fixed: Vec<u32> = t.fixed0.iter().map(|&i| i as u32 + 1).collect();
                tiles.push(Tile {
                    face: Face { fixed, signs: t.signs.to_vec() },
                    weight: 0.0,
                    volume: pow2(s.dim()) * t.abs_det,
                    shift: face_shift(s, t.fixed0, t.signs),
                });
            },
        )?;
        Ok(tiles)
    };

    let (tiles, xi) = run_with_direction(s, direction, seed, tol, build)?;
    finalize_tiling(s.clone(), tiles, xi)
}

fn finalize_tiling(
    subspace: Subspace,
    mut tiles: Vec<Tile>,
    direction: Vec<f64>,
) -> Result<Tiling> {
    if tiles.is_empty() {
        return Err(Error::DegenerateSubspace);
    }
    let mut total = NeumaierSum::new();
    for t in &tiles {
        total.add(t.volume);
    }
    let total_volume = total.value();
    if !total_volume.is_finite() || total_volume <= 0.0 {
        return Err(Error::DegenerateSubspace);
    }
    for t in &mut tiles {
        t.weight = t.volume / total_volume;
    }
    Ok(Tiling { subspace, tiles, total_volume, direction })
}

/// Locate `x` (E-coordinates) in the tiling and reconstruct a cube point
/// over it.
///
/// Each tile is tested by solving `T_F·u = x - a_F` and checking
/// `|u_j| ≤ 1 + tol`. Interior points accept in exactly one tile; points
/// within tolerance of tile boundaries may accept in several and are
/// reported as [`LocateOutcome::Boundary`], lowest index first.
pub fn locate(t: &Tiling, x: &[f64], tol: f64) -> Result<LocateOutcome> {
    let s = t.subspace();
    let m = s.dim();
    if x.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: x.len() });
    }
    let mut candidates: Vec<usize> = Vec::new();
    let mut first_preimage: Option<Vec<f64>> = None;
    for (idx, tile) in t.tiles.iter().enumerate() {
        let geom = tile_geometry(s, &tile.face)?;
        let rhs: Vec<f64> = x.iter().zip(&geom.shift).map(|(a, b)| a - b).collect();
        let Some(u) = linalg::lu_solve(&geom.map, &rhs, 1e-14) else {
            continue;
        };
        if u.iter().all(|&v| abs(v) <= 1.0 + tol) {
            if first_preimage.is_none() {
                let mut y = tile.face.vertex(s.n());
                let mut free = 0;
                let mut fixed_iter = tile.face.fixed0().peekable();
                for (j, yj) in y.iter_mut().enumerate() {
                    if fixed_iter.peek() == Some(&j) {
                        fixed_iter.next();
                        continue;
                    }
                    *yj = u[free];
                    free += 1;
                }
                first_preimage = Some(y);
            }
            candidates.push(idx);
        }
    }
    Ok(match (candidates.len(), first_preimage) {
        (0, _) => LocateOutcome::Outside,
        (1, Some(p)) => LocateOutcome::Interior { tile: candidates[0], preimage: p },
        (_, Some(p)) => LocateOutcome::Boundary { tile: candidates[0], candidates, preimage: p },
        _ => unreachable!("candidates imply a preimage"),
    })
}

/// Independent zonotope volume of the shadow,
/// `vol(K) = 2^{n-k} Σ_{|T| = n-k} |det([P_E e_j]_{j ∈ T})|`,
/// summing over `(n-k)`-subsets of generators with determinants taken in
/// E-coordinates.
///
/// This is the oracle against which tiling volumes are cross-checked; it
/// never looks at the complement basis or the sweep direction.
pub fn zonotope_volume(s: &Subspace) -> Result<f64> {
    zonotope_volume_with(s, &TilingTolerances::default())
}

pub fn zonotope_volume_with(s: &Subspace, tol: &TilingTolerances) -> Result<f64> {
    let m = s.dim();
    let b = s.basis();
    // generators with numerically zero projection cannot contribute to any
    // determinant
    let mut indices = Vec::new();
    for j in 0..s.n() {
        let sup = (0..m).fold(0.0f64, |mx, r| mx.max(abs(b.get(r, j))));
        if sup > tol.column_prune {
            indices.push(j);
        }
    }
    if indices.len() < m {
        return Ok(0.0);
    }
    let count = binomial_capped(indices.len() as u64, m as u64, tol.subset_cap)
        .ok_or(Error::TooManySubsets {
            count: full_count(indices.len() as u64, m as u64),
            cap: tol.subset_cap,
        })?;
    let mut comb: Vec<usize> = (0..m).collect();
    let mut mat = Matrix::zeros(m, m);
    let mut sum = NeumaierSum::new();
    for _rank in 0..count {
        for (col, &pos) in comb.iter().enumerate() {
            let amb = indices[pos];
            for row in 0..m {
                mat.set(row, col, b.get(row, amb));
            }
        }
        sum.add(abs(linalg::lu_det(&mat)));
        if !next_combination(indices.len(), &mut comb) {
            break;
        }
    }
    Ok(pow2(m) * sum.value())
}
