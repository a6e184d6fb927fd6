//! Incremental subspace updates against batch PCA computed by nalgebra.

use std::time::Instant;

use collabtrack_core::linalg::left_svd;
use collabtrack_core::subspace::{ipca_update, Subspace};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIM: usize = 64;

struct Batch {
    mean: DVector<f64>,
    singular_values: Vec<f64>,
    basis: DMatrix<f64>,
}

fn batch_pca(samples: &[Vec<f64>], rank: usize) -> Batch {
    let n = samples.len();
    let data = DMatrix::from_fn(DIM, n, |r, c| samples[c][r]);
    let mean = data.column_mean();
    let mut centered = data.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let svd = centered.svd(true, false);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = svd.u.unwrap();
    let keep = &order[..rank];
    Batch {
        mean,
        singular_values: keep.iter().map(|&i| svd.singular_values[i]).collect(),
        basis: DMatrix::from_fn(DIM, rank, |r, c| u[(r, keep[c])]),
    }
}

fn projector_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a * a.transpose() - b * b.transpose()).norm()
}

fn as_matrix(sub: &Subspace) -> DMatrix<f64> {
    DMatrix::from_fn(DIM, sub.rank(), |r, c| sub.basis()[c][r])
}

fn incremental(samples: &[Vec<f64>], chunk: usize, max_rank: usize) -> Subspace {
    let mut sub = Subspace::empty(DIM);
    for part in samples.chunks(chunk) {
        sub = ipca_update(&sub, part, 1.0, max_rank).unwrap();
    }
    sub
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Sum of uniforms is plenty for test data.
    (0..6).map(|_| rng.random_range(-1.0..1.0)).sum()
}

fn check(samples: &[Vec<f64>], sub: &Subspace, rank: usize) {
    let oracle = batch_pca(samples, rank);
    assert_eq!(sub.rank(), rank);
    assert!((sub.effective_count() - samples.len() as f64).abs() < 1e-12);
    for (a, b) in sub.mean().iter().zip(oracle.mean.iter()) {
        assert!((a - b).abs() < 1e-12, "mean {a} vs {b}");
    }
    for (a, b) in sub.singular_values().iter().zip(&oracle.singular_values) {
        assert!((a - b).abs() < 1e-8, "singular value {a} vs {b}");
    }
    let d = projector_distance(&as_matrix(sub), &oracle.basis);
    assert!(d < 1e-6, "projector distance {d}");
}

#[test]
fn chunked_updates_match_batch_pca_on_low_rank_data() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rank = 12;
    let offset: Vec<f64> = (0..DIM).map(|_| gaussian(&mut rng)).collect();
    let dirs: Vec<Vec<f64>> = (0..rank).map(|_| (0..DIM).map(|_| gaussian(&mut rng)).collect()).collect();
    let samples: Vec<Vec<f64>> = (0..40)
        .map(|_| {
            let z: Vec<f64> = (0..rank).map(|k| gaussian(&mut rng) * (rank - k) as f64).collect();
            (0..DIM)
                .map(|r| offset[r] + dirs.iter().zip(&z).map(|(d, zk)| d[r] * zk).sum::<f64>())
                .collect()
        })
        .collect();
    let sub = incremental(&samples, 5, 16);
    check(&samples, &sub, rank);
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn chunked_updates_match_batch_pca_at_full_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let samples: Vec<Vec<f64>> = (0..40).map(|_| (0..DIM).map(|_| gaussian(&mut rng)).collect()).collect();
    let sub = incremental(&samples, 5, DIM);
    // 40 centered samples span 39 dimensions.
    check(&samples, &sub, 39);
}

#[test]
fn jacobi_and_nalgebra_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cols: Vec<Vec<f64>> = (0..20).map(|_| (0..DIM).map(|_| gaussian(&mut rng)).collect()).collect();
    let (sigma, u) = left_svd(cols.clone());
    let m = DMatrix::from_fn(DIM, cols.len(), |r, c| cols[c][r]);
    let mut reference: Vec<f64> = m.singular_values().iter().copied().collect();
    reference.sort_by(|a, b| b.total_cmp(a));
    assert_eq!(sigma.len(), reference.len());
    for (a, b) in sigma.iter().zip(&reference) {
        assert!((a - b).abs() < 1e-10 * b.max(1.0), "{a} vs {b}");
    }
    let ours = DMatrix::from_fn(DIM, u.len(), |r, c| u[c][r]);
    let svd = m.svd(true, false);
    let theirs = svd.u.unwrap();
    assert!(projector_distance(&ours, &theirs) < 1e-8);
}
