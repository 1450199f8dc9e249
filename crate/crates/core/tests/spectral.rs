use fedleak_core::analysis::{covariance, pca_2d, pearson, pearson_moments, power_eigenpairs, PowerOptions};
use fedleak_core::linmodel::FeatureMatrix;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Eigenvalues of a symmetric 3x3 matrix from the trigonometric solution of
/// its characteristic cubic, largest first.
fn cubic_eigenvalues(a: &[f64; 9]) -> [f64; 3] {
    let p1 = a[1] * a[1] + a[2] * a[2] + a[5] * a[5];
    let q = (a[0] + a[4] + a[8]) / 3.0;
    let p2 = (a[0] - q).powi(2) + (a[4] - q).powi(2) + (a[8] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b: Vec<f64> = (0..9).map(|i| (a[i] - if i % 4 == 0 { q } else { 0.0 }) / p).collect();
    let det_b =
        b[0] * (b[4] * b[8] - b[5] * b[7]) - b[1] * (b[3] * b[8] - b[5] * b[6]) + b[2] * (b[3] * b[7] - b[4] * b[6]);
    let phi = (det_b / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [e1, 3.0 * q - e1 - e3, e3]
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> FeatureMatrix {
    // correlated columns so the spectrum is well separated
    let mix: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let z: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        for j in 0..d {
            data.push((0..d).map(|k| mix[j * d + k] * z[k] * (k + 1) as f64).sum());
        }
    }
    FeatureMatrix::new(data, d).unwrap()
}

#[test]
fn explained_variance_matches_cubic_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..10 {
        let x = random_rows(&mut rng, 200, 3);
        let (_, cov) = covariance(&x).unwrap();
        let want = cubic_eigenvalues(&cov.clone().try_into().unwrap());
        let labels = vec![0u8; 200];
        let pca = pca_2d(&x, &labels).unwrap();
        for k in 0..2 {
            assert!(
                (pca.explained_variance[k] - want[k]).abs() <= 1e-8 * want[0],
                "{:?} vs {want:?}",
                pca.explained_variance
            );
        }
    }
}

#[test]
fn eigenpairs_match_dense_solver_on_psd_5x5() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let b = DMatrix::<f64>::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let a = &b * b.transpose();
        let flat: Vec<f64> = a.iter().copied().collect();
        let pairs = power_eigenpairs(&flat, 5, 5, &PowerOptions::default()).unwrap();
        let eig = SymmetricEigen::new(a.clone());
        let mut order: Vec<usize> = (0..5).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        for (pair, &i) in pairs.iter().zip(&order) {
            let want = eig.eigenvalues[i];
            assert!((pair.value - want).abs() <= 1e-6, "{} vs {want}", pair.value);
            // residual rather than direction: near-degenerate pairs may rotate
            let v = nalgebra::DVector::from_vec(pair.vector.clone());
            assert!((&a * &v - &v * pair.value).norm() <= 1e-6);
        }
    }
}

#[test]
fn rank_two_data_reconstructs() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let d = 6;
    let u: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let offset: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..2.0)).collect();
    let n = 150;
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let (a, b) = (rng.random_range(-3.0..3.0), rng.random_range(-1.0..1.0));
        data.extend((0..d).map(|j| offset[j] + a * u[j] + b * v[j]));
    }
    let x = FeatureMatrix::new(data, d).unwrap();
    let pca = pca_2d(&x, &vec![1; n]).unwrap();
    for i in 0..n {
        for (r, o) in pca.reconstruct(i).iter().zip(x.row(i)) {
            assert!((r - o).abs() <= 1e-8);
        }
    }
    let [c0, c1] = &pca.components;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    assert!((dot(c0, c0) - 1.0).abs() <= 1e-10 && (dot(c1, c1) - 1.0).abs() <= 1e-10);
    assert!(dot(c0, c1).abs() <= 1e-10);
    for k in 0..2 {
        let mean = pca.coords.iter().map(|c| c[k]).sum::<f64>() / n as f64;
        assert!(mean.abs() <= 1e-8);
    }
    assert!(pca.explained_variance[0] >= pca.explained_variance[1]);
}

proptest! {
    #[test]
    fn pearson_formulas_agree(pairs in prop::collection::vec((0u8..3, 0u8..2), 3..300)) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        match (pearson(&x, &y), pearson_moments(&x, &y)) {
            (Some(a), Some(b)) => {
                prop_assert!((a - b).abs() <= 1e-12);
                prop_assert!(a.abs() <= 1.0);
            }
            (a, b) => prop_assert_eq!(a.is_none(), b.is_none()),
        }
    }
}
