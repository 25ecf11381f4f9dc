use std::collections::BTreeMap;

use itertools::Itertools;
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use super::graph::Graph;
use crate::error::{Error, Result};
use crate::measure::SliceMeasure;
use crate::seed::child_rng;

/// All independent `k`-sets of `g`, each sorted, in lexicographic order.
pub fn enumerate_ik(g: &Graph, k: usize) -> Vec<Vec<usize>> {
    fn go(
        g: &Graph,
        v: usize,
        k: usize,
        blocked: &mut [u32],
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        let need = k - current.len();
        if g.n() - v < need {
            return;
        }
        if blocked[v] == 0 {
            current.push(v);
            for &w in g.neighbors(v) {
                blocked[w] += 1;
            }
            go(g, v + 1, k, blocked, current, out);
            for &w in g.neighbors(v) {
                blocked[w] -= 1;
            }
            current.pop();
        }
        go(g, v + 1, k, blocked, current, out);
    }
    let mut out = Vec::new();
    if k <= g.n() {
        let mut blocked = vec![0; g.n()];
        go(g, 0, k, &mut blocked, &mut Vec::new(), &mut out);
    }
    out
}

/// Uniform measure `μ_k(G)` on the independent `k`-sets.
pub fn uniform_ik(g: &Graph, k: usize) -> Result<SliceMeasure> {
    let sets = enumerate_ik(g, k);
    if sets.is_empty() {
        return Err(Error::EmptySlice { k });
    }
    SliceMeasure::uniform_over(g.n(), k, &sets)
}

/// Critical density `(Δ−1)^{Δ−1} / ((Δ−2)^Δ + (Δ+1)(Δ−1)^{Δ−1})`.
pub fn alpha_c(max_degree: usize) -> Result<f64> {
    if max_degree < 3 {
        return Err(Error::InvalidDegree(max_degree));
    }
    let d = max_degree as f64;
    // divide through by (Δ−1)^{Δ−1} to stay in range
    let ratio = (d - 2.0) * ((d - 2.0) / (d - 1.0)).powi(max_degree as i32 - 1);
    Ok(1.0 / (ratio + d + 1.0))
}

/// [`alpha_c`] in exact rational arithmetic.
pub fn alpha_c_exact(max_degree: usize) -> Result<BigRational> {
    if max_degree < 3 {
        return Err(Error::InvalidDegree(max_degree));
    }
    let d = max_degree as u32;
    let lead = BigInt::from(d - 1).pow(d - 1);
    let denom = BigInt::from(d - 2).pow(d) + BigInt::from(d + 1) * &lead;
    Ok(BigRational::new(lead, denom))
}

/// State of the localization chain after `t` pins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub t: usize,
    /// `S_t` in pin order.
    pub pinned: Vec<usize>,
    /// Vertices of `G_t` in original labels, sorted.
    pub residual_vertices: Vec<usize>,
    /// `G_t` relabelled along `residual_vertices`.
    pub residual: Graph,
    pub remaining_k: usize,
}

impl ChainState {
    pub fn initial(g: &Graph, k: usize) -> Self {
        Self {
            t: 0,
            pinned: Vec::new(),
            residual_vertices: (0..g.n()).collect(),
            residual: g.clone(),
            remaining_k: k,
        }
    }

    /// Builds the state reached after pinning `pinned` in order.
    pub fn after(g: &Graph, k: usize, pinned: &[usize]) -> Result<Self> {
        if pinned.len() > k || !g.is_independent(pinned) {
            return Err(Error::Precondition(format!(
                "{pinned:?} is not an independent set of at most {k} vertices"
            )));
        }
        let residual_vertices = g.residual_vertices(pinned);
        Ok(Self {
            t: pinned.len(),
            pinned: pinned.to_vec(),
            residual: g.induced(&residual_vertices),
            residual_vertices,
            remaining_k: k - pinned.len(),
        })
    }

    pub fn n_t(&self) -> usize {
        self.residual_vertices.len()
    }

    /// Independent `(k−t)`-sets of `G_t` in original labels.
    pub fn residual_sets(&self) -> Vec<Vec<usize>> {
        enumerate_ik(&self.residual, self.remaining_k)
            .into_iter()
            .map(|s| s.into_iter().map(|i| self.residual_vertices[i]).collect())
            .collect()
    }
}

/// Pins the next element of `ordering`, an ordering of the sampled set `I`
/// whose prefix is the current `S_t`.
pub fn chain_step(g: &Graph, state: &ChainState, ordering: &[usize]) -> Result<ChainState> {
    let k = state.t + state.remaining_k;
    if ordering.len() != k || !g.is_independent(ordering) {
        return Err(Error::Precondition(format!(
            "ordering {ordering:?} is not an independent {k}-set"
        )));
    }
    if ordering[..state.t] != state.pinned[..] {
        return Err(Error::Precondition(format!(
            "ordering {ordering:?} does not extend S_t = {:?}",
            state.pinned
        )));
    }
    if state.t == k {
        return Err(Error::OrderingExhausted(k));
    }
    let u = ordering[state.t];
    let pos = state
        .residual_vertices
        .binary_search(&u)
        .map_err(|_| Error::Precondition(format!("vertex {u} is not in G_t")))?;
    let mut keep: Vec<usize> = (0..state.residual.n()).collect();
    keep.retain(|&i| i != pos && !state.residual.has_edge(pos, i));
    let residual_vertices: Vec<usize> = keep.iter().map(|&i| state.residual_vertices[i]).collect();
    let mut pinned = state.pinned.clone();
    pinned.push(u);
    Ok(ChainState {
        t: state.t + 1,
        pinned,
        residual: state.residual.induced(&keep),
        residual_vertices,
        remaining_k: state.remaining_k - 1,
    })
}

/// Samples `I ∼ μ_k(G)` and a uniform ordering, then runs `steps` chain
/// steps. Returns states `0..=steps`.
pub fn random_trace(g: &Graph, k: usize, steps: usize, seed: u64) -> Result<Vec<ChainState>> {
    let sets = enumerate_ik(g, k);
    let mut rng = child_rng(seed, "chain_trace", 0);
    let mut ordering = sets
        .choose(&mut rng)
        .ok_or(Error::EmptySlice { k })?
        .clone();
    ordering.shuffle(&mut rng);
    let mut trace = vec![ChainState::initial(g, k)];
    for _ in 0..steps.min(k) {
        let next = chain_step(g, trace.last().expect("nonempty"), &ordering)?;
        trace.push(next);
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub ok: bool,
    pub max_gap: f64,
    pub prefixes_checked: usize,
}

/// Compares, for every reachable ordered prefix `S_t`, the exact law of
/// `I ∖ S_t` under `(I, ordering)` with `μ_{k−t}(G_t)`.
pub fn residual_uniformity_check(g: &Graph, k: usize, t: usize) -> Result<UniformityReport> {
    if t > k {
        return Err(Error::Precondition(format!("t = {t} exceeds k = {k}")));
    }
    let sets = enumerate_ik(g, k);
    if sets.is_empty() {
        return Err(Error::EmptySlice { k });
    }
    let mut conditional: BTreeMap<Vec<usize>, BTreeMap<Vec<usize>, usize>> = BTreeMap::new();
    for set in &sets {
        for prefix in set.iter().copied().permutations(t) {
            let rest: Vec<usize> = set
                .iter()
                .copied()
                .filter(|v| !prefix.contains(v))
                .collect();
            *conditional
                .entry(prefix)
                .or_default()
                .entry(rest)
                .or_default() += 1;
        }
    }
    let mut max_gap: f64 = 0.0;
    for (prefix, counts) in &conditional {
        let total: usize = counts.values().sum();
        let state = ChainState::after(g, k, prefix)?;
        let target = state.residual_sets();
        let q = 1.0 / target.len() as f64;
        for rest in &target {
            let p = counts.get(rest).map_or(0.0, |&c| c as f64 / total as f64);
            max_gap = max_gap.max((p - q).abs());
        }
        // mass outside the residual support
        for (rest, &c) in counts {
            if target.binary_search(rest).is_err() {
                max_gap = max_gap.max(c as f64 / total as f64);
            }
        }
    }
    Ok(UniformityReport {
        ok: max_gap <= 1e-10,
        max_gap,
        prefixes_checked: conditional.len(),
    })
}

/// Density parameters of the window `dγ n_t ≤ k − t ≤ (1−δ) α_c(Δ) n_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityParams {
    pub k: usize,
    pub ell: usize,
    pub d: f64,
    pub gamma: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    /// `Δ` used for `α_c`: the maximum degree, raised to 3 if smaller.
    pub delta_used: usize,
    pub alpha_c: f64,
    pub preconditions_hold: bool,
    pub precondition_violations: Vec<String>,
    /// Steps `t ≤ k − ℓ` of the trace where the window failed.
    pub window_violations: Vec<usize>,
    pub size_bound_holds: bool,
    pub steps_checked: usize,
}

impl DensityReport {
    pub fn window_holds(&self) -> bool {
        self.window_violations.is_empty()
    }

    /// The window holds whenever the preconditions do, and `n_t ≥ n − (Δ+1)t`
    /// holds throughout.
    pub fn ok(&self) -> bool {
        self.size_bound_holds && (!self.preconditions_hold || self.window_holds())
    }
}

const DENSITY_SLACK: f64 = 1e-12;

/// Checks the density window at each step `t ≤ k − ℓ` of `trace`.
/// Precondition failures are reported, not raised.
pub fn density_window_check(
    g: &Graph,
    params: &DensityParams,
    trace: &[ChainState],
) -> Result<DensityReport> {
    let DensityParams {
        k,
        ell,
        d,
        gamma,
        delta,
    } = *params;
    let n = g.n() as f64;
    let delta_used = g.max_degree().max(3);
    let ac = alpha_c(delta_used)?;
    let kf = k as f64;
    let mut violations = Vec::new();
    if ell > k {
        violations.push(format!("ell = {ell} exceeds k = {k}"));
    }
    if !(d > 0.0 && d <= 1.0) {
        violations.push(format!("d = {d} outside (0, 1]"));
    }
    if (ell as f64) < d * kf - DENSITY_SLACK {
        violations.push(format!("ell = {ell} < d·k = {}", d * kf));
    }
    if gamma * n > kf + DENSITY_SLACK {
        violations.push(format!("k = {k} < γn = {}", gamma * n));
    }
    let upper = (1.0 - delta) * ac * n;
    if kf > upper + DENSITY_SLACK {
        violations.push(format!("k = {k} > (1−δ)α_c(Δ)n = {upper}"));
    }

    let horizon = k.saturating_sub(ell);
    let max_degree = g.max_degree();
    let mut window_violations = Vec::new();
    let mut size_bound_holds = true;
    let mut steps_checked = 0;
    for state in trace.iter().filter(|s| s.t <= horizon) {
        steps_checked += 1;
        let n_t = state.n_t() as f64;
        let left = (k - state.t) as f64;
        if d * gamma * n_t > left + DENSITY_SLACK || left > (1.0 - delta) * ac * n_t + DENSITY_SLACK
        {
            window_violations.push(state.t);
        }
        if (state.n_t() + (max_degree + 1) * state.t) < g.n() {
            size_bound_holds = false;
        }
    }
    Ok(DensityReport {
        delta_used,
        alpha_c: ac,
        preconditions_hold: violations.is_empty(),
        precondition_violations: violations,
        window_violations,
        size_bound_holds,
        steps_checked,
    })
}
