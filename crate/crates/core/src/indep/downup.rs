use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::chain::enumerate_ik;
use super::graph::Graph;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::seed::child_rng;

/// Vertices `u` with `rest ∪ {u}` independent and `u ∉ rest`.
fn valid_additions(g: &Graph, rest: &[usize]) -> Vec<usize> {
    let mut blocked = vec![false; g.n()];
    for &v in rest {
        blocked[v] = true;
        for &w in g.neighbors(v) {
            blocked[w] = true;
        }
    }
    (0..g.n()).filter(|&u| !blocked[u]).collect()
}

fn check_state(g: &Graph, set: &[usize]) -> Result<()> {
    let sorted = set.windows(2).all(|w| w[0] < w[1]);
    if set.is_empty() || !sorted || !g.is_independent(set) {
        return Err(Error::Precondition(format!(
            "{set:?} is not a sorted nonempty independent set"
        )));
    }
    Ok(())
}

/// One down-up move with an explicit generator.
pub fn down_up_move<R: Rng + ?Sized>(g: &Graph, set: &[usize], rng: &mut R) -> Result<Vec<usize>> {
    check_state(g, set)?;
    let drop = rng.random_range(0..set.len());
    let rest: Vec<usize> = set
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != drop)
        .map(|(_, &v)| v)
        .collect();
    // the dropped vertex is always valid, so this is never empty
    let add = *valid_additions(g, &rest)
        .choose(rng)
        .expect("dropped vertex is a valid addition");
    let mut next = rest;
    next.push(add);
    next.sort_unstable();
    Ok(next)
}

/// One seeded down-up move: drop a uniform element, then add a uniform
/// vertex that keeps the set independent.
pub fn down_up_step(g: &Graph, set: &[usize], seed: u64) -> Result<Vec<usize>> {
    down_up_move(g, set, &mut child_rng(seed, "down_up", 0))
}

/// `steps` consecutive moves from `start`.
pub fn down_up_walk(
    g: &Graph,
    start: &[usize],
    steps: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    let mut rng = child_rng(seed, "down_up_walk", 0);
    let mut path = vec![start.to_vec()];
    for _ in 0..steps {
        let next = down_up_move(g, path.last().expect("nonempty"), &mut rng)?;
        path.push(next);
    }
    Ok(path)
}

/// Transition matrix of the down-up walk on `I_k(G)`, rows and columns in
/// [`enumerate_ik`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownUpKernel {
    pub states: Vec<Vec<usize>>,
    pub matrix: Matrix,
}

impl DownUpKernel {
    pub fn build(g: &Graph, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::EmptyK);
        }
        let states = enumerate_ik(g, k);
        if states.is_empty() {
            return Err(Error::EmptySlice { k });
        }
        let mut matrix = Matrix::zeros(states.len());
        let kf = k as f64;
        for (row, set) in states.iter().enumerate() {
            for drop in 0..k {
                let rest: Vec<usize> = set
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != drop)
                    .map(|(_, &v)| v)
                    .collect();
                let adds = valid_additions(g, &rest);
                let w = 1.0 / (kf * adds.len() as f64);
                for u in adds {
                    let mut next = rest.clone();
                    next.push(u);
                    next.sort_unstable();
                    let col = states.binary_search(&next).expect("move stays in I_k");
                    matrix[(row, col)] += w;
                }
            }
        }
        Ok(Self { states, matrix })
    }

    /// Largest `|Σ_j P_ij − 1|`.
    pub fn row_sum_gap(&self) -> f64 {
        self.matrix
            .rows()
            .iter()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|(πP)_j − π_j|` for `π` uniform.
    pub fn stationarity_gap(&self) -> f64 {
        let d = self.states.len();
        let pi = 1.0 / d as f64;
        (0..d)
            .map(|j| ((0..d).map(|i| pi * self.matrix[(i, j)]).sum::<f64>() - pi).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_identity(&self) -> bool {
        self.matrix
            .max_abs_diff(&Matrix::identity(self.states.len()))
            < 1e-15
    }
}
