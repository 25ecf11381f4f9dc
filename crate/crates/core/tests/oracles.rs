//! Linear algebra cross-checked against nalgebra.

use entropic_core::influence::influence_summary;
use entropic_core::linalg::{power_iteration, symmetric_eigenvalues, Matrix};
use entropic_core::CubeMeasure;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn to_nalgebra(m: &Matrix) -> DMatrix<f64> {
    let d = m.dim();
    DMatrix::from_fn(d, d, |i, j| m[(i, j)])
}

fn random_matrix(rng: &mut ChaCha8Rng, dim: usize) -> Matrix {
    let rows: Vec<Vec<f64>> = (0..dim)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    Matrix::from_rows(&rows)
}

fn largest_singular_value(m: &Matrix) -> f64 {
    to_nalgebra(m)
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

#[test]
fn spectral_norm_matches_svd() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for dim in [1, 2, 3, 5, 8, 17, 40, 64] {
        for _ in 0..5 {
            let m = random_matrix(&mut rng, dim);
            let ours = m.spectral_norm();
            let oracle = largest_singular_value(&m);
            assert!(
                (ours - oracle).abs() <= 1e-9 * oracle.max(1.0),
                "dim {dim}: {ours} vs {oracle}"
            );
        }
    }
}

#[test]
fn power_iteration_on_large_matrices() {
    // rank-one spike plus small noise keeps a clear gap between the top two
    // singular values
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for dim in [65, 90, 128] {
        let u: Vec<f64> = (0..dim).map(|_| rng.random_range(0.5..1.5)).collect();
        let noise = random_matrix(&mut rng, dim);
        let m = Matrix::from_fn(dim, |i, j| {
            3.0 * u[i] * u[j] / dim as f64 + 0.01 * noise[(i, j)]
        });
        let ours = m.spectral_norm();
        let oracle = largest_singular_value(&m);
        assert!(
            (ours - oracle).abs() <= 1e-6 * oracle,
            "dim {dim}: {ours} vs {oracle}"
        );
        let top = power_iteration(&m.gram(), 1e-10, 100_000);
        assert!((top.sqrt() - oracle).abs() <= 1e-6 * oracle);
    }
}

#[test]
fn jacobi_matches_symmetric_eigen() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for dim in [1, 2, 4, 9, 20, 64] {
        let a = random_matrix(&mut rng, dim);
        let sym = Matrix::from_fn(dim, |i, j| a[(i, j)] + a[(j, i)]);
        let mut ours = symmetric_eigenvalues(&sym);
        let mut oracle: Vec<f64> = to_nalgebra(&sym)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ours.sort_by(f64::total_cmp);
        oracle.sort_by(f64::total_cmp);
        for (x, y) in ours.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-9, "dim {dim}: {x} vs {y}");
        }
    }
}

/// Ψ is similar to the correlation matrix, so its (complex) spectrum is the
/// real spectrum of Cor.
#[test]
fn psi_spectrum_equals_correlation_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 2..=7 {
        for _ in 0..4 {
            let weights: Vec<f64> = (0..1usize << n)
                .map(|_| {
                    let w: f64 = rng.random();
                    if w < 0.3 {
                        0.0
                    } else {
                        w
                    }
                })
                .collect();
            let Ok(nu) = CubeMeasure::from_weights(n, weights) else {
                continue;
            };
            let s = influence_summary(&nu);
            if s.active.is_empty() {
                continue;
            }
            let psi_eigs = to_nalgebra(&s.psi).complex_eigenvalues();
            let mut psi_re: Vec<f64> = psi_eigs.iter().map(|z| z.re).collect();
            assert!(psi_eigs.iter().all(|z| z.im.abs() < 1e-8));
            let mut cor: Vec<f64> = to_nalgebra(&s.cor)
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .collect();
            psi_re.sort_by(f64::total_cmp);
            cor.sort_by(f64::total_cmp);
            for (x, y) in psi_re.iter().zip(&cor) {
                assert!((x - y).abs() < 1e-8, "n {n}: {x} vs {y}");
            }
        }
    }
}
