//! Seeded test-measure suites for the `verify` checks.

use entropic_core::indep::{enumerate_ik, uniform_ik, Graph};
use entropic_core::measure::{dot_state, spin};
use entropic_core::seed::child_rng;
use entropic_core::{CubeMeasure, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteKind {
    Product,
    Slice,
    Tilted,
    Mixed,
}

#[derive(Debug, Clone)]
pub struct SuiteMeasure {
    pub label: String,
    pub measure: CubeMeasure,
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// `count` measures on at most `n` coordinates.
pub fn measure_suite(
    kind: SuiteKind,
    count: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<SuiteMeasure>> {
    (0..count)
        .map(|i| {
            let kind = match kind {
                SuiteKind::Mixed => {
                    [SuiteKind::Product, SuiteKind::Slice, SuiteKind::Tilted][i % 3]
                }
                k => k,
            };
            let mut rng = child_rng(seed, "measure_suite", i as u64);
            match kind {
                SuiteKind::Product => {
                    let means: Vec<f64> = (0..n).map(|_| rng.random_range(-0.8..0.8)).collect();
                    Ok(SuiteMeasure {
                        label: format!("product[{i}]"),
                        measure: CubeMeasure::product(&means)?,
                    })
                }
                SuiteKind::Slice => {
                    let lo = n.min(5);
                    let size = rng.random_range(lo..=n);
                    let g = Graph::random_bounded_degree(size, 3, 0.5, rng.random());
                    let max_k = (1..=size)
                        .take_while(|&k| !enumerate_ik(&g, k).is_empty())
                        .last()
                        .unwrap_or(1);
                    let k = rng.random_range(1..=max_k);
                    Ok(SuiteMeasure {
                        label: format!("slice[{i}:n={size},m={},k={k}]", g.num_edges()),
                        measure: uniform_ik(&g, k)?.to_cube()?,
                    })
                }
                _ => {
                    // Ising-type measure with random couplings and fields
                    let field: Vec<f64> = (0..n).map(|_| 0.5 * gaussian(&mut rng)).collect();
                    let coupling: Vec<f64> = (0..n * n).map(|_| 0.3 * gaussian(&mut rng)).collect();
                    let weights: Vec<f64> = (0..1usize << n)
                        .map(|x| {
                            let mut e = dot_state(&field, x);
                            for a in 0..n {
                                for b in a + 1..n {
                                    e += coupling[a * n + b] * spin(x, a) * spin(x, b);
                                }
                            }
                            e
                        })
                        .collect();
                    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let weights = weights.into_iter().map(|e| (e - max).exp()).collect();
                    Ok(SuiteMeasure {
                        label: format!("tilted[{i}]"),
                        measure: CubeMeasure::from_weights(n, weights)?,
                    })
                }
            }
        })
        .collect()
}
