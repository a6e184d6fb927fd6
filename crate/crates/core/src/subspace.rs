//! The shallow generative model: one PCA subspace per 8×8 block of the
//! observation, scored by reconstruction residual, with a binary occlusion
//! mask and incremental (forgetting) updates.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::imagery::{PatchVector, PATCH_DIM, PATCH_SIDE};
use crate::linalg::{dot, left_svd, norm_sq};

/// Blocks per side of the grid.
pub const GRID: usize = 4;
pub const BLOCK_COUNT: usize = GRID * GRID;
pub const BLOCK_SIDE: usize = PATCH_SIDE / GRID;
pub const BLOCK_DIM: usize = BLOCK_SIDE * BLOCK_SIDE;
/// Eigenvectors kept per subspace.
pub const DEFAULT_MAX_RANK: usize = 16;
/// Default occlusion threshold on a block score, about `exp(-4)`.
pub const DEFAULT_MASK_DELTA: f64 = 0.018;

/// Singular values at or below `max(REL_TOL·σ_max, ABS_TOL)` are treated as
/// numerical noise and dropped from the basis.
const REL_TOL: f64 = 1e-10;
const ABS_TOL: f64 = 1e-12;

/// A PCA subspace: mean, orthonormal basis (stored as columns), singular
/// values in descending order, and the (possibly decayed) sample count.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    mean: Vec<f64>,
    basis: Vec<Vec<f64>>,
    singular_values: Vec<f64>,
    effective_count: f64,
}

/// Subspace of one 64-pixel block.
pub type BlockSubspace = Subspace;
/// Subspace of a whole 1024-pixel observation.
pub type GlobalSubspace = Subspace;

impl Subspace {
    /// No data seen yet: zero mean, empty basis, zero count.
    pub fn empty(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            basis: Vec::new(),
            singular_values: Vec::new(),
            effective_count: 0.0,
        }
    }

    /// A single observation: its value becomes the mean, basis empty.
    pub fn from_mean(mean: Vec<f64>) -> Self {
        Self {
            mean,
            basis: Vec::new(),
            singular_values: Vec::new(),
            effective_count: 1.0,
        }
    }

    /// Builds a subspace from explicit parts, checking every invariant.
    pub fn from_parts(
        mean: Vec<f64>,
        basis: Vec<Vec<f64>>,
        singular_values: Vec<f64>,
        effective_count: f64,
    ) -> Result<Self> {
        let s = Self {
            mean,
            basis,
            singular_values,
            effective_count,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.mean.len();
        if self.basis.len() != self.singular_values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.len(),
                actual: self.singular_values.len(),
            });
        }
        if self.basis.len() > dim {
            return Err(Error::InvalidConfig("rank exceeds dimension"));
        }
        for col in &self.basis {
            if col.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: col.len(),
                });
            }
        }
        if self.orthonormality_error() > 1e-10 {
            return Err(Error::Numeric("basis not orthonormal"));
        }
        if self.singular_values.windows(2).any(|w| w[0] < w[1])
            || self.singular_values.iter().any(|s| !(*s >= 0.0))
        {
            return Err(Error::Numeric("singular values must be nonnegative and descending"));
        }
        if !(self.effective_count >= 0.0) {
            return Err(Error::Numeric("negative sample count"));
        }
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn effective_count(&self) -> f64 {
        self.effective_count
    }

    /// Largest entry of `|UᵀU − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max(libm::fabs(dot(a, b) - target));
            }
        }
        worst
    }

    /// `‖(x − u) − U·Uᵀ·(x − u)‖²`
    pub fn residual_sq(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        let mut centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        let coeffs: Vec<f64> = self.basis.iter().map(|u| dot(u, &centered)).collect();
        for (u, c) in self.basis.iter().zip(&coeffs) {
            for (r, ui) in centered.iter_mut().zip(u) {
                *r -= c * ui;
            }
        }
        norm_sq(&centered)
    }

    /// Similarity `exp(−residual²)` in `(0, 1]`.
    pub fn score(&self, x: &[f64]) -> f64 {
        libm::exp(-self.residual_sq(x))
    }
}

/// Block `i = 4r + c` holds patch rows `8r..8r+8`, columns `8c..8c+8`,
/// row-major.
pub fn partition_blocks(patch: &PatchVector) -> Vec<Vec<f64>> {
    let values = patch.values();
    (0..BLOCK_COUNT)
        .map(|i| {
            let (br, bc) = (i / GRID, i % GRID);
            let mut block = Vec::with_capacity(BLOCK_DIM);
            for r in 0..BLOCK_SIDE {
                let start = (br * BLOCK_SIDE + r) * PATCH_SIDE + bc * BLOCK_SIDE;
                block.extend_from_slice(&values[start..start + BLOCK_SIDE]);
            }
            block
        })
        .collect()
}

/// Inverse of [`partition_blocks`].
pub fn reassemble_blocks(blocks: &[Vec<f64>]) -> Result<PatchVector> {
    if blocks.len() != BLOCK_COUNT {
        return Err(Error::DimensionMismatch {
            expected: BLOCK_COUNT,
            actual: blocks.len(),
        });
    }
    let mut values = vec![0.0; PATCH_DIM];
    for (i, block) in blocks.iter().enumerate() {
        if block.len() != BLOCK_DIM {
            return Err(Error::DimensionMismatch {
                expected: BLOCK_DIM,
                actual: block.len(),
            });
        }
        let (br, bc) = (i / GRID, i % GRID);
        for r in 0..BLOCK_SIDE {
            let start = (br * BLOCK_SIDE + r) * PATCH_SIDE + bc * BLOCK_SIDE;
            values[start..start + BLOCK_SIDE].copy_from_slice(&block[r * BLOCK_SIDE..(r + 1) * BLOCK_SIDE]);
        }
    }
    PatchVector::new(values)
}

/// Binary per-block visibility flags (`true` = visible) and the fraction of
/// visible blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcclusionMask {
    flags: [bool; BLOCK_COUNT],
    rate: f64,
}

impl OcclusionMask {
    pub fn from_flags(flags: [bool; BLOCK_COUNT]) -> Self {
        let visible = flags.iter().filter(|&&f| f).count();
        Self {
            flags,
            rate: visible as f64 / BLOCK_COUNT as f64,
        }
    }

    pub fn all_visible() -> Self {
        Self::from_flags([true; BLOCK_COUNT])
    }

    pub fn flags(&self) -> &[bool; BLOCK_COUNT] {
        &self.flags
    }

    #[inline]
    pub fn is_visible(&self, block: usize) -> bool {
        self.flags[block]
    }

    /// Occlusion rate `o`: visible blocks over 16.
    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl Default for OcclusionMask {
    fn default() -> Self {
        Self::all_visible()
    }
}

/// The 16 block subspaces of the local model plus the base box size they
/// were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSubspaceSet {
    blocks: Vec<BlockSubspace>,
    pub base_width: f64,
    pub base_height: f64,
}

impl BlockSubspaceSet {
    pub fn new(blocks: Vec<BlockSubspace>, base_width: f64, base_height: f64) -> Result<Self> {
        if blocks.len() != BLOCK_COUNT {
            return Err(Error::DimensionMismatch {
                expected: BLOCK_COUNT,
                actual: blocks.len(),
            });
        }
        if let Some(b) = blocks.iter().find(|b| b.dim() != BLOCK_DIM) {
            return Err(Error::DimensionMismatch {
                expected: BLOCK_DIM,
                actual: b.dim(),
            });
        }
        Ok(Self {
            blocks,
            base_width,
            base_height,
        })
    }

    /// Means taken from `patch`, empty bases.
    pub fn from_patch(patch: &PatchVector, base_width: f64, base_height: f64) -> Self {
        Self {
            blocks: partition_blocks(patch).into_iter().map(Subspace::from_mean).collect(),
            base_width,
            base_height,
        }
    }

    pub fn blocks(&self) -> &[BlockSubspace] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &BlockSubspace {
        &self.blocks[i]
    }

    pub fn set_block(&mut self, i: usize, sub: BlockSubspace) {
        debug_assert_eq!(sub.dim(), BLOCK_DIM);
        self.blocks[i] = sub;
    }
}

/// `Cᵢ = exp(−‖(π − u) − U·Uᵀ·(π − u)‖²)`
pub fn block_score(block: &[f64], sub: &BlockSubspace) -> f64 {
    sub.score(block)
}

/// All 16 block scores of a patch.
pub fn block_scores(patch: &PatchVector, subs: &BlockSubspaceSet) -> [f64; BLOCK_COUNT] {
    let mut scores = [0.0; BLOCK_COUNT];
    for (i, block) in partition_blocks(patch).iter().enumerate() {
        scores[i] = block_score(block, &subs.blocks[i]);
    }
    scores
}

/// Unmasked generative score `G = Σ Cᵢ`.
pub fn generative_score(patch: &PatchVector, subs: &BlockSubspaceSet) -> f64 {
    block_scores(patch, subs).iter().sum()
}

/// A block is flagged occluded when its score is at or below `delta`.
pub fn compute_mask(block_scores: &[f64; BLOCK_COUNT], delta: f64) -> OcclusionMask {
    let mut flags = [false; BLOCK_COUNT];
    for (f, &c) in flags.iter_mut().zip(block_scores) {
        *f = c > delta;
    }
    OcclusionMask::from_flags(flags)
}

/// `Ĝ = Σ Mᵢ·Cᵢ` from precomputed block scores.
pub fn masked_sum(block_scores: &[f64; BLOCK_COUNT], mask: &OcclusionMask) -> f64 {
    block_scores
        .iter()
        .zip(mask.flags.iter())
        .filter(|(_, &m)| m)
        .map(|(c, _)| c)
        .sum()
}

/// `Ĝ = Σ Mᵢ·Cᵢ`; masked blocks are never scored.
pub fn masked_score(patch: &PatchVector, subs: &BlockSubspaceSet, mask: &OcclusionMask) -> f64 {
    partition_blocks(patch)
        .iter()
        .enumerate()
        .filter(|(i, _)| mask.flags[*i])
        .map(|(i, block)| block_score(block, &subs.blocks[i]))
        .sum()
}

/// Whole-patch score `exp(−‖y* − U·Uᵀ·y*‖²)` with `y* = y − u`.
pub fn global_score(patch: &PatchVector, sub: &GlobalSubspace) -> f64 {
    sub.score(patch.values())
}

/// Merges `new_samples` into `sub` by incremental SVD.
///
/// The old model contributes its singular directions scaled by
/// `forgetting`, its count is decayed to `forgetting·n`, and the mean shift
/// between old and new data enters as one extra column weighted by
/// `sqrt(f·n·m / (f·n + m))`. The thin SVD of `[f·U·Σ | B − μ_B | shift]`
/// gives the merged basis, which is truncated to `max_rank` columns.
pub fn ipca_update(
    sub: &Subspace,
    new_samples: &[Vec<f64>],
    forgetting: f64,
    max_rank: usize,
) -> Result<Subspace> {
    if new_samples.is_empty() {
        return Err(Error::Empty("ipca_update needs at least one sample"));
    }
    if !(forgetting > 0.0 && forgetting <= 1.0) {
        return Err(Error::InvalidConfig("forgetting factor must be in (0, 1]"));
    }
    let dim = sub.dim();
    if let Some(s) = new_samples.iter().find(|s| s.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: s.len(),
        });
    }

    let m = new_samples.len() as f64;
    let mut new_mean = vec![0.0; dim];
    for s in new_samples {
        for (acc, v) in new_mean.iter_mut().zip(s) {
            *acc += v;
        }
    }
    new_mean.iter_mut().for_each(|v| *v /= m);

    let old_n = forgetting * sub.effective_count;
    let total = old_n + m;

    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(sub.rank() + new_samples.len() + 1);
    for (u, s) in sub.basis.iter().zip(&sub.singular_values) {
        let w = forgetting * s;
        columns.push(u.iter().map(|x| w * x).collect());
    }
    for s in new_samples {
        columns.push(s.iter().zip(&new_mean).map(|(x, mu)| x - mu).collect());
    }

    let merged_mean = if old_n > 0.0 {
        let shift_weight = libm::sqrt(old_n * m / total);
        columns.push(
            new_mean
                .iter()
                .zip(&sub.mean)
                .map(|(b, a)| shift_weight * (b - a))
                .collect(),
        );
        sub.mean
            .iter()
            .zip(&new_mean)
            .map(|(a, b)| (old_n * a + m * b) / total)
            .collect()
    } else {
        new_mean
    };

    let (mut values, mut vectors) = left_svd(columns);
    let cut = values
        .first()
        .map_or(ABS_TOL, |&top| (top * REL_TOL).max(ABS_TOL));
    let keep = values
        .iter()
        .take(max_rank.min(dim))
        .take_while(|&&s| s > cut)
        .count();
    values.truncate(keep);
    vectors.truncate(keep);

    Ok(Subspace {
        mean: merged_mean,
        basis: vectors,
        singular_values: values,
        effective_count: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_patch(rng: &mut ChaCha8Rng) -> PatchVector {
        PatchVector::new((0..PATCH_DIM).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    fn unit(dim: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    }

    #[test]
    fn partition_constant_patch() {
        let blocks = partition_blocks(&PatchVector::filled(0.3).unwrap());
        assert_eq!(blocks.len(), 16);
        assert!(blocks.iter().all(|b| b.len() == 64 && b.iter().all(|&v| v == 0.3)));
    }

    #[test]
    fn partition_locality() {
        let mut v = vec![0.0; PATCH_DIM];
        v[0] = 1.0;
        let blocks = partition_blocks(&PatchVector::new(v).unwrap());
        assert_eq!(blocks[0][0], 1.0);
        assert_eq!(blocks[0].iter().sum::<f64>(), 1.0);
        assert!(blocks[1..].iter().all(|b| b.iter().all(|&x| x == 0.0)));

        // Pixel (row 9, col 17) lands in block (1, 2) at (1, 1).
        let mut v = vec![0.0; PATCH_DIM];
        v[9 * 32 + 17] = 1.0;
        let blocks = partition_blocks(&PatchVector::new(v).unwrap());
        assert_eq!(blocks[4 + 2][8 + 1], 1.0);
    }

    #[test]
    fn partition_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_patch(&mut rng);
        assert_eq!(reassemble_blocks(&partition_blocks(&p)).unwrap(), p);
    }

    #[test]
    fn block_score_examples() {
        let mean: Vec<f64> = (0..64).map(|i| i as f64 / 64.0).collect();
        let sub = Subspace::from_mean(mean.clone());
        assert_eq!(block_score(&mean, &sub), 1.0);

        let sub = Subspace::from_parts(mean.clone(), vec![unit(64, 3)], vec![1.0], 2.0).unwrap();
        let mut x = mean.clone();
        x[3] += 0.7;
        assert_eq!(block_score(&x, &sub), 1.0);

        let mut x = mean.clone();
        x[0] += 1.0;
        x[1] -= 1.0;
        let sub = Subspace::from_mean(mean);
        assert!((block_score(&x, &sub) - 0.135_335_283_236_612_7).abs() < 1e-15);
    }

    #[test]
    fn generative_score_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_patch(&mut rng);
        let set = BlockSubspaceSet::from_patch(&p, 32.0, 32.0);
        assert_eq!(generative_score(&p, &set), 16.0);

        let q = random_patch(&mut rng);
        let expected: f64 = partition_blocks(&q)
            .iter()
            .enumerate()
            .map(|(i, b)| libm::exp(-set.block(i).residual_sq(b)))
            .sum();
        assert!((generative_score(&q, &set) - expected).abs() < 1e-14);

        // Half the blocks far from their means contribute nothing.
        let blocks: Vec<Vec<f64>> = partition_blocks(&p)
            .into_iter()
            .enumerate()
            .map(|(i, b)| if i < 8 { b } else { b.iter().map(|v| if *v > 0.5 { 0.0 } else { 1.0 }).collect() })
            .collect();
        let far = reassemble_blocks(&blocks).unwrap();
        assert!((generative_score(&far, &set) - 8.0).abs() < 1e-6);
    }

    #[test]
    fn mask_examples() {
        let m = compute_mask(&[1.0; 16], 0.018);
        assert!(m.flags().iter().all(|&f| f));
        assert_eq!(m.rate(), 1.0);

        let m = compute_mask(&[0.018; 16], 0.018);
        assert!(m.flags().iter().all(|&f| !f));
        assert_eq!(m.rate(), 0.0);

        let mut scores = [0.5; 16];
        for s in scores.iter_mut().skip(12) {
            *s = 0.001;
        }
        let m = compute_mask(&scores, 0.018);
        assert_eq!(m.flags().iter().filter(|&&f| !f).count(), 4);
        assert_eq!(m.rate(), 0.75);
        assert!(m.rate() < 0.8);
    }

    #[test]
    fn masked_score_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base = random_patch(&mut rng);
        let set = BlockSubspaceSet::from_patch(&base, 32.0, 32.0);
        let p = random_patch(&mut rng);
        assert_eq!(
            masked_score(&p, &set, &OcclusionMask::all_visible()),
            generative_score(&p, &set)
        );
        assert_eq!(masked_score(&p, &set, &OcclusionMask::from_flags([false; 16])), 0.0);

        let mut flags = [true; 16];
        for i in [1, 5, 9, 13] {
            flags[i] = false;
        }
        assert_eq!(masked_score(&base, &set, &OcclusionMask::from_flags(flags)), 12.0);
        let scores = block_scores(&p, &set);
        assert_eq!(
            masked_sum(&scores, &OcclusionMask::from_flags(flags)),
            masked_score(&p, &set, &OcclusionMask::from_flags(flags))
        );
    }

    #[test]
    fn global_score_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_patch(&mut rng);
        let sub = Subspace::from_mean(p.values().to_vec());
        assert_eq!(global_score(&p, &sub), 1.0);

        let mut shifted = p.values().to_vec();
        let k = shifted.iter().position(|&v| v < 0.5).unwrap();
        shifted[k] += 0.5;
        let q = PatchVector::new(shifted).unwrap();
        let spanned = Subspace::from_parts(p.values().to_vec(), vec![unit(PATCH_DIM, k)], vec![1.0], 1.0).unwrap();
        assert_eq!(global_score(&q, &spanned), 1.0);

    }

    #[test]
    fn global_score_unit_residual() {
        let mean = vec![0.25; PATCH_DIM];
        let mut y = mean.clone();
        y[100] = 0.75;
        y[200] = 0.75;
        y[300] = 0.75;
        y[400] = 0.75;
        let sub = Subspace::from_mean(mean);
        // 4 · 0.5² = 1
        let s = global_score(&PatchVector::new(y).unwrap(), &sub);
        assert!((s - 0.367_879_441_171_442_3).abs() < 1e-15);
    }

    #[test]
    fn ipca_identical_samples_give_empty_basis() {
        let v: Vec<f64> = (0..64).map(|i| (i % 7) as f64 / 7.0).collect();
        let out = ipca_update(&Subspace::empty(64), &vec![v.clone(); 5], 0.95, 16).unwrap();
        assert_eq!(out.rank(), 0);
        for (a, b) in out.mean().iter().zip(&v) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(out.effective_count(), 5.0);
    }

    #[test]
    fn ipca_recovers_single_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut d: Vec<f64> = (0..64).map(|_| rng.random::<f64>() - 0.5).collect();
        let n = norm_sq(&d).sqrt();
        d.iter_mut().for_each(|x| *x /= n);
        let base: Vec<f64> = (0..64).map(|_| rng.random::<f64>()).collect();
        let samples: Vec<Vec<f64>> = [-1.0, -0.3, 0.2, 0.9, 1.4]
            .iter()
            .map(|t| base.iter().zip(&d).map(|(b, di)| b + t * di).collect())
            .collect();
        let out = ipca_update(&Subspace::empty(64), &samples, 1.0, 16).unwrap();
        assert_eq!(out.rank(), 1);
        assert!((dot(&out.basis()[0], &d).abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ipca_rejects_bad_input() {
        let sub = Subspace::empty(4);
        assert!(ipca_update(&sub, &[], 1.0, 4).is_err());
        assert!(ipca_update(&sub, &[vec![0.0; 3]], 1.0, 4).is_err());
        assert!(ipca_update(&sub, &[vec![0.0; 4]], 0.0, 4).is_err());
    }

    #[test]
    fn ipca_truncates_to_max_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let samples: Vec<Vec<f64>> = (0..40).map(|_| (0..64).map(|_| rng.random::<f64>()).collect()).collect();
        let out = ipca_update(&Subspace::empty(64), &samples, 0.95, 16).unwrap();
        assert_eq!(out.rank(), 16);
        out.validate().unwrap();
        let again = ipca_update(&out, &samples[..5], 0.95, 16).unwrap();
        assert_eq!(again.rank(), 16);
        again.validate().unwrap();
        assert!((again.effective_count() - (0.95 * 40.0 + 5.0)).abs() < 1e-12);
    }

    #[test]
    fn adding_a_basis_vector_never_lowers_a_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let samples: Vec<Vec<f64>> = (0..10).map(|_| (0..64).map(|_| rng.random::<f64>()).collect()).collect();
        let sub = ipca_update(&Subspace::empty(64), &samples, 1.0, 3).unwrap();
        let bigger = ipca_update(&Subspace::empty(64), &samples, 1.0, 4).unwrap();
        // The 4-column basis extends the 3-column one.
        for (a, b) in sub.basis().iter().zip(bigger.basis()) {
            assert!((dot(a, b).abs() - 1.0).abs() < 1e-9);
        }
        for _ in 0..50 {
            let x: Vec<f64> = (0..64).map(|_| rng.random::<f64>()).collect();
            assert!(block_score(&x, &bigger) >= block_score(&x, &sub) * (1.0 - 1e-12));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn masked_never_exceeds_unmasked(seed in any::<u64>(), bits in any::<u16>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let set = BlockSubspaceSet::from_patch(&random_patch(&mut rng), 32.0, 32.0);
            let p = random_patch(&mut rng);
            let mut flags = [false; 16];
            for (i, f) in flags.iter_mut().enumerate() {
                *f = bits & (1 << i) != 0;
            }
            let mask = OcclusionMask::from_flags(flags);
            let g = generative_score(&p, &set);
            let gm = masked_score(&p, &set, &mask);
            prop_assert!(gm <= g);
            prop_assert!((0.0..=16.0).contains(&g));
            prop_assert!(block_scores(&p, &set).iter().all(|c| *c > 0.0 && *c <= 1.0));
            prop_assert_eq!(mask.rate(), bits.count_ones() as f64 / 16.0);
        }

        #[test]
        fn occluding_blocks_leaves_others_untouched(seed in any::<u64>(), bits in any::<u16>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<Vec<f64>> = (0..6).map(|_| random_patch(&mut rng).into_vec()).collect();
            let mut blocks = Vec::new();
            for i in 0..16 {
                let per_block: Vec<Vec<f64>> = samples
                    .iter()
                    .map(|s| partition_blocks(&PatchVector::new(s.clone()).unwrap())[i].clone())
                    .collect();
                blocks.push(ipca_update(&Subspace::empty(64), &per_block, 1.0, 16).unwrap());
            }
            let set = BlockSubspaceSet::new(blocks, 32.0, 32.0).unwrap();
            let p = random_patch(&mut rng);
            let before = block_scores(&p, &set);
            let mut parts = partition_blocks(&p);
            for (i, b) in parts.iter_mut().enumerate() {
                if bits & (1 << i) != 0 {
                    b.iter_mut().for_each(|v| *v = rng.random::<f64>());
                }
            }
            let after = block_scores(&reassemble_blocks(&parts).unwrap(), &set);
            for i in 0..16 {
                if bits & (1 << i) == 0 {
                    prop_assert_eq!(before[i].to_bits(), after[i].to_bits());
                }
            }
        }

        #[test]
        fn updates_keep_basis_orthonormal(seed in any::<u64>(), chunks in 1usize..6, f in 0.5..1.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sub = Subspace::from_mean((0..64).map(|_| rng.random::<f64>()).collect());
            for _ in 0..chunks {
                let samples: Vec<Vec<f64>> = (0..5).map(|_| (0..64).map(|_| rng.random::<f64>()).collect()).collect();
                sub = ipca_update(&sub, &samples, f, 16).unwrap();
                prop_assert!(sub.orthonormality_error() < 1e-10);
                prop_assert!(sub.rank() <= 16);
                prop_assert!(sub.validate().is_ok());
            }
        }
    }
}
