use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::measure::{dot_state, CubeMeasure, SliceMeasure};
use crate::seed::child_rng;

pub const DEFAULT_FAMILY_SIZE: usize = 200;

const TILT_SCALES: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];
const TILTS_PER_SCALE: usize = 10;
const MAX_POINT_MASSES: usize = 100;

/// A labelled candidate `μ ≪ ν` for the supremum in the stability checks.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyMember {
    pub label: String,
    pub measure: CubeMeasure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceFamilyMember {
    pub label: String,
    pub measure: SliceMeasure,
}

/// Seeded candidate family absolutely continuous w.r.t. `ν`: Gaussian tilts
/// at five scales, point masses on support atoms (all of them when there
/// are at most 100, otherwise a seeded sample), and f-tilts with random
/// positive `f` filling the remainder up to `size`.
pub fn mu_family(nu: &CubeMeasure, size: usize, seed: u64) -> Vec<FamilyMember> {
    let n = nu.n();
    let support: Vec<usize> = nu.support().collect();
    let mut rng = child_rng(seed, "mu_family", 0);
    let mut out = Vec::with_capacity(size);

    let tilt_budget = (TILT_SCALES.len() * TILTS_PER_SCALE).min(size);
    for j in 0..tilt_budget {
        let scale = TILT_SCALES[j % TILT_SCALES.len()];
        let v: Vec<f64> = (0..n)
            .map(|_| {
                scale * {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z
                }
            })
            .collect();
        let weights = reweight(nu, |x| dot_state(&v, x));
        out.push(FamilyMember {
            label: format!("tilt[scale={scale},#{j}]"),
            measure: CubeMeasure::from_weights(n, weights).expect("tilt keeps support"),
        });
    }

    let point_budget = MAX_POINT_MASSES.min(size - out.len()).min(support.len());
    let atoms: Vec<usize> = if support.len() <= point_budget {
        support.clone()
    } else {
        rand::seq::index::sample(&mut rng, support.len(), point_budget)
            .into_iter()
            .map(|i| support[i])
            .collect()
    };
    for x in atoms {
        out.push(FamilyMember {
            label: format!("point[{x}]"),
            measure: CubeMeasure::point_mass(n, x).expect("state in range"),
        });
    }

    let mut j = 0;
    while out.len() < size {
        let sigma = [0.5, 1.0, 2.0, 4.0][j % 4];
        let log_f: Vec<f64> = (0..nu.num_states())
            .map(|_| {
                sigma * {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z
                }
            })
            .collect();
        let weights = reweight(nu, |x| log_f[x]);
        out.push(FamilyMember {
            label: format!("ftilt[sigma={sigma},#{j}]"),
            measure: CubeMeasure::from_weights(n, weights).expect("positive f keeps support"),
        });
        j += 1;
    }
    out
}

/// `ν(x)·exp(g(x) − max g)` over the support of `ν`.
fn reweight(nu: &CubeMeasure, g: impl Fn(usize) -> f64) -> Vec<f64> {
    let probs = nu.probs();
    let max = nu.support().map(&g).fold(f64::NEG_INFINITY, f64::max);
    probs
        .iter()
        .enumerate()
        .map(|(x, &p)| if p > 0.0 { p * (g(x) - max).exp() } else { 0.0 })
        .collect()
}

/// [`mu_family`] of the pushforward, mapped back to the slice.
pub fn slice_mu_family(
    nu: &SliceMeasure,
    size: usize,
    seed: u64,
) -> Result<Vec<SliceFamilyMember>> {
    let cube = nu.to_cube()?;
    mu_family(&cube, size, seed)
        .into_iter()
        .map(|m| {
            Ok(SliceFamilyMember {
                label: m.label,
                measure: m.measure.to_slice(nu.k())?,
            })
        })
        .collect()
}
