use std::collections::{BTreeMap, BTreeSet, HashMap};

use itertools::Itertools;
use rand::seq::{IndexedRandom, SliceRandom};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chain::{enumerate_ik, ChainState};
use super::graph::Graph;
use crate::error::{Error, Result};
use crate::localization::{slice_mu_family, DEFAULT_FAMILY_SIZE};
use crate::measure::{kl_divergence, SliceMeasure};
use crate::seed::{child_rng, derive_seed, CompensatedSum};
use crate::sparse::binomial;

/// Nonnegative function on independent sets (sorted vertex lists).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetFunction {
    Constant {
        value: f64,
    },
    /// `exp(⟨w, 1_I⟩)`.
    ExpLinear {
        weights: Vec<f64>,
    },
    /// `1 + 1{vertex ∈ I}`.
    OnePlusIndicator {
        vertex: usize,
    },
    /// `1{I = set}`.
    PointIndicator {
        set: Vec<usize>,
    },
}

impl SetFunction {
    pub fn eval(&self, set: &[usize]) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::ExpLinear { weights } => set.iter().map(|&i| weights[i]).sum::<f64>().exp(),
            Self::OnePlusIndicator { vertex } => {
                if set.contains(vertex) {
                    2.0
                } else {
                    1.0
                }
            }
            Self::PointIndicator { set: target } => {
                if set == &target[..] {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidFunction(msg));
        match self {
            Self::Constant { value } if !(value.is_finite() && *value >= 0.0) => bad(format!(
                "constant {value} is not a finite nonnegative number"
            )),
            Self::ExpLinear { weights } if weights.len() != n => bad(format!(
                "{} weights for a graph on {n} vertices",
                weights.len()
            )),
            Self::ExpLinear { weights } if weights.iter().any(|w| !w.is_finite()) => {
                bad("non-finite weight".into())
            }
            Self::OnePlusIndicator { vertex } if *vertex >= n => {
                bad(format!("vertex {vertex} out of range"))
            }
            _ => Ok(()),
        }
    }
}

/// Config form of a [`SetFunction`]; `exp_linear` draws seeded Gaussian
/// weights at the given scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    Constant { value: f64 },
    ExpLinear { scale: f64 },
    OnePlusIndicator { vertex: usize },
    PointIndicator { set: Vec<usize> },
}

impl FunctionSpec {
    pub fn resolve(&self, n: usize, seed: u64) -> SetFunction {
        match self {
            Self::Constant { value } => SetFunction::Constant { value: *value },
            Self::ExpLinear { scale } => {
                let mut rng = child_rng(seed, "set_function", 0);
                let weights = (0..n)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        scale * z
                    })
                    .collect();
                SetFunction::ExpLinear { weights }
            }
            Self::OnePlusIndicator { vertex } => SetFunction::OnePlusIndicator { vertex: *vertex },
            Self::PointIndicator { set } => {
                let mut set = set.clone();
                set.sort_unstable();
                SetFunction::PointIndicator { set }
            }
        }
    }
}

/// `f` restricted to the residual measure of a chain state.
struct LocalView {
    remaining_k: usize,
    n_t: usize,
    /// Residual sets in local labels.
    local_sets: Vec<Vec<usize>>,
    values: Vec<f64>,
    mean: f64,
    ent: f64,
}

impl LocalView {
    fn new(g: &Graph, k: usize, pinned: &[usize], f: &SetFunction) -> Result<Self> {
        let state = ChainState::after(g, k, pinned)?;
        let local_sets = enumerate_ik(&state.residual, state.remaining_k);
        let values: Vec<f64> = local_sets
            .iter()
            .map(|j| {
                let mut full: Vec<usize> = j.iter().map(|&i| state.residual_vertices[i]).collect();
                full.extend_from_slice(pinned);
                full.sort_unstable();
                f.eval(&full)
            })
            .collect();
        let (ent, mean) = uniform_entropy(&values);
        Ok(Self {
            remaining_k: state.remaining_k,
            n_t: state.n_t(),
            local_sets,
            values,
            mean,
            ent,
        })
    }

    /// Single-vertex laws `(p, q)` of the f-tilt and of the uniform measure.
    fn vertex_laws(&self) -> (Vec<f64>, Vec<f64>) {
        let r = self.remaining_k as f64;
        let total_f: f64 = self.values.iter().sum();
        let count = self.local_sets.len() as f64;
        let mut p = vec![0.0; self.n_t];
        let mut q = vec![0.0; self.n_t];
        for (j, &fx) in self.local_sets.iter().zip(&self.values) {
            for &i in j {
                p[i] += fx / (total_f * r);
                q[i] += 1.0 / (count * r);
            }
        }
        (p, q)
    }

    /// `(k−t)·KL(p‖q)·E f / Ent f`, the constant the f-tilt itself needs.
    fn f_tilt_ratio(&self) -> Result<Option<f64>> {
        if self.ent <= 0.0 || self.remaining_k == 0 {
            return Ok(None);
        }
        let (p, q) = self.vertex_laws();
        Ok(Some(
            self.remaining_k as f64 * kl_divergence(&p, &q)? * self.mean / self.ent,
        ))
    }

    /// Largest `(k−t)·KL(q_μ‖q_ν)/KL(μ‖ν)` over the seeded μ-family.
    fn family_ratio(&self, size: usize, seed: u64) -> Result<f64> {
        if self.remaining_k == 0 || size == 0 {
            return Ok(0.0);
        }
        let nu = SliceMeasure::uniform_over(self.n_t, self.remaining_k, &self.local_sets)?;
        let r = self.remaining_k as f64;
        let q_nu: Vec<f64> = nu.inclusion_probs().iter().map(|p| p / r).collect();
        let mut best: f64 = 0.0;
        for member in slice_mu_family(&nu, size, seed)? {
            let kl = member.measure.kl(&nu)?;
            if kl <= 1e-12 {
                continue;
            }
            let q_mu: Vec<f64> = member
                .measure
                .inclusion_probs()
                .iter()
                .map(|p| p / r)
                .collect();
            best = best.max(r * kl_divergence(&q_mu, &q_nu)? / kl);
        }
        Ok(best)
    }
}

/// `(Ent, E f)` under the uniform law on `values`; `Ent = 0` when `E f = 0`.
fn uniform_entropy(values: &[f64]) -> (f64, f64) {
    let count = values.len() as f64;
    let mean = values.iter().copied().collect::<CompensatedSum>().value() / count;
    if mean <= 0.0 {
        return (0.0, mean);
    }
    let ent = values
        .iter()
        .filter(|&&fx| fx > 0.0)
        .map(|&fx| fx * (fx / mean).ln() / count)
        .collect::<CompensatedSum>()
        .value();
    (ent.max(0.0), mean)
}

/// Reachable unordered `S_t` with their probabilities `#{I ⊇ A} / (|I_k| C(k,t))`.
fn reachable_sets(sets: &[Vec<usize>], t: usize) -> BTreeMap<Vec<usize>, f64> {
    let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for set in sets {
        for a in set.iter().copied().combinations(t) {
            *counts.entry(a).or_default() += 1;
        }
    }
    let k = sets.first().map_or(0, Vec::len);
    let total = sets.len() as f64 * binomial(k, t) as f64;
    counts
        .into_iter()
        .map(|(a, c)| (a, c as f64 / total))
        .collect()
}

fn validate(g: &Graph, k: usize, f: &SetFunction) -> Result<Vec<Vec<usize>>> {
    f.validate(g.n())?;
    let sets = enumerate_ik(g, k);
    if sets.is_empty() {
        return Err(Error::EmptySlice { k });
    }
    Ok(sets)
}

/// Both sides of the one-step entropy decomposition, averaged over `S_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    /// `E[Ent_{ν_{t+1}}[f]]` with the next vertex drawn from `q_t`.
    pub lhs: f64,
    /// `E[Ent_{ν_t}[f] − E_{ν_t}[f]·KL(p_t‖q_t)]`.
    pub rhs: f64,
    pub gap: f64,
    /// Largest gap at a single reachable `S_t`.
    pub max_state_gap: f64,
    pub states: usize,
}

/// Evaluates the one-step decomposition exactly at step `t`. `ν_{t+1}` is
/// built from the chain's residual graph after pinning the next vertex.
pub fn one_step_decomposition_check(
    g: &Graph,
    k: usize,
    t: usize,
    f: &SetFunction,
) -> Result<DecompositionReport> {
    if t >= k {
        return Err(Error::Precondition(format!(
            "need t < k, got t = {t}, k = {k}"
        )));
    }
    let sets = validate(g, k, f)?;
    let values: Vec<f64> = sets.iter().map(|s| f.eval(s)).collect();
    if uniform_entropy(&values).1 <= 0.0 {
        return Err(Error::InvalidFunction("E[f] = 0 on I_k(G)".into()));
    }
    let mut lhs = CompensatedSum::new();
    let mut rhs = CompensatedSum::new();
    let mut max_state_gap: f64 = 0.0;
    let reachable = reachable_sets(&sets, t);
    for (a, weight) in &reachable {
        let view = LocalView::new(g, k, a, f)?;
        if view.mean <= 0.0 {
            // both sides vanish
            continue;
        }
        let (p, q) = view.vertex_laws();
        let state = ChainState::after(g, k, a)?;
        let mut state_lhs = CompensatedSum::new();
        for (local, &qi) in q.iter().enumerate() {
            if qi == 0.0 {
                continue;
            }
            let mut next = a.clone();
            next.push(state.residual_vertices[local]);
            let next_view = LocalView::new(g, k, &next, f)?;
            state_lhs.add(qi * next_view.ent);
        }
        let state_rhs = view.ent - view.mean * kl_divergence(&p, &q)?;
        max_state_gap = max_state_gap.max((state_lhs.value() - state_rhs).abs());
        lhs.add(weight * state_lhs.value());
        rhs.add(weight * state_rhs);
    }
    Ok(DecompositionReport {
        lhs: lhs.value(),
        rhs: rhs.value(),
        gap: (lhs.value() - rhs.value()).abs(),
        max_state_gap,
        states: reachable.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConservationMode {
    Exact,
    Mc,
}

/// Floating-point slack in [`ConservationReport::bound_holds`].
const BOUND_ROUNDING: f64 = 1e-12;

/// Largest `|I_k|·k!/(k−T)!` handled by exact enumeration.
pub const EXACT_ORDERING_CAP: u128 = 1_000_000;
pub const MIN_MC_SAMPLES: usize = 10_000;
const MC_CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConservationConfig {
    pub mode: ConservationMode,
    pub samples: usize,
    pub seed: u64,
    /// μ-family size for the per-step constants.
    pub family_size: usize,
    /// Visited states per step on which the μ-family is evaluated in
    /// Monte Carlo mode.
    pub family_states: usize,
}

impl Default for ConservationConfig {
    fn default() -> Self {
        Self {
            mode: ConservationMode::Exact,
            samples: MIN_MC_SAMPLES,
            seed: 0,
            family_size: DEFAULT_FAMILY_SIZE,
            family_states: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub k: usize,
    pub ell: usize,
    pub steps: usize,
    pub mode: ConservationMode,
    /// `E[Ent_{ν_T}[f]] / Ent_{ν_0}[f]`.
    pub ratio: f64,
    /// Zero in exact mode.
    pub stderr: f64,
    /// Measured `Ĉ_t` for `t < T`.
    pub per_step_c: Vec<f64>,
    /// The part of `Ĉ_t` coming from the f-tilt alone.
    pub f_tilt_c: Vec<f64>,
    /// `Π_t max(1 − Ĉ_t/(k−t), 0)` clipped below at `1e-9`.
    pub product_bound: f64,
    pub initial_entropy: f64,
    /// `E[Ent_{ν_t}[f]]` for `t = 0..=T`.
    pub expected_entropy: Vec<f64>,
    pub expected_entropy_stderr: Vec<f64>,
    /// `|I_k|·k!/(k−T)!`.
    pub orderings: u128,
    pub samples: usize,
}

impl ConservationReport {
    /// `ratio ≥ product_bound − 3·stderr`, up to rounding. A single step
    /// whose `Ĉ` comes from the f-tilt ratio makes this an equality.
    pub fn bound_holds(&self) -> bool {
        self.ratio >= self.product_bound - 3.0 * self.stderr - BOUND_ROUNDING
    }

    /// Per-step CSV: `t,remaining_k,expected_entropy,stderr,c_hat`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,remaining_k,expected_entropy,stderr,c_hat\n");
        for (t, (e, s)) in self
            .expected_entropy
            .iter()
            .zip(&self.expected_entropy_stderr)
            .enumerate()
        {
            let c = self
                .per_step_c
                .get(t)
                .map_or(String::new(), |c| c.to_string());
            out.push_str(&format!("{t},{},{e},{s},{c}\n", self.k - t));
        }
        out
    }
}

/// Runs the entropy-conservation experiment for `T = k − ℓ` chain steps.
pub fn entropy_conservation_experiment(
    g: &Graph,
    k: usize,
    ell: usize,
    f: &SetFunction,
    config: &ConservationConfig,
) -> Result<ConservationReport> {
    if ell == 0 || ell > k {
        return Err(Error::Precondition(format!(
            "need 1 ≤ ℓ ≤ k, got ℓ = {ell}, k = {k}"
        )));
    }
    let sets = validate(g, k, f)?;
    let values: Vec<f64> = sets.iter().map(|s| f.eval(s)).collect();
    let (ent0, mean0) = uniform_entropy(&values);
    if ent0 <= 1e-14 * mean0.abs() {
        return Err(Error::ZeroEntropy);
    }
    let steps = k - ell;
    let orderings = (k - steps + 1..=k)
        .map(|j| j as u128)
        .fold(sets.len() as u128, |acc, j| acc.saturating_mul(j));
    let mode = if config.mode == ConservationMode::Exact && orderings <= EXACT_ORDERING_CAP {
        ConservationMode::Exact
    } else {
        ConservationMode::Mc
    };

    let mut report = ConservationReport {
        k,
        ell,
        steps,
        mode,
        ratio: 1.0,
        stderr: 0.0,
        per_step_c: Vec::with_capacity(steps),
        f_tilt_c: Vec::with_capacity(steps),
        product_bound: 1.0,
        initial_entropy: ent0,
        expected_entropy: vec![ent0],
        expected_entropy_stderr: vec![0.0],
        orderings,
        samples: 0,
    };

    // states per step on which Ĉ_t is measured
    let mut visited: Vec<Vec<Vec<usize>>> = Vec::with_capacity(steps);
    match mode {
        ConservationMode::Exact => {
            for t in 1..=steps {
                let mut acc = CompensatedSum::new();
                for (a, w) in reachable_sets(&sets, t) {
                    acc.add(w * LocalView::new(g, k, &a, f)?.ent);
                }
                report.expected_entropy.push(acc.value());
                report.expected_entropy_stderr.push(0.0);
            }
            for t in 0..steps {
                visited.push(reachable_sets(&sets, t).into_keys().collect());
            }
        }
        ConservationMode::Mc => {
            let samples = config.samples.max(MIN_MC_SAMPLES);
            let chunks = samples.div_ceil(MC_CHUNK);
            let partials: Vec<Result<McChunk>> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let len = MC_CHUNK.min(samples - c * MC_CHUNK);
                    mc_chunk(
                        g,
                        k,
                        steps,
                        f,
                        &sets,
                        len,
                        derive_seed(config.seed, "conservation", c as u64),
                    )
                })
                .collect();
            let mut sum = vec![CompensatedSum::new(); steps + 1];
            let mut sum_sq = vec![CompensatedSum::new(); steps + 1];
            let mut seen: Vec<BTreeSet<Vec<usize>>> = vec![BTreeSet::new(); steps];
            for part in partials {
                let part = part?;
                for t in 0..=steps {
                    sum[t].add(part.sum[t]);
                    sum_sq[t].add(part.sum_sq[t]);
                }
                for (t, s) in part.states.into_iter().enumerate() {
                    seen[t].extend(s);
                }
            }
            let nf = samples as f64;
            report.expected_entropy.clear();
            report.expected_entropy_stderr.clear();
            for t in 0..=steps {
                let mean = sum[t].value() / nf;
                let var = (sum_sq[t].value() / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
                report.expected_entropy.push(mean);
                report.expected_entropy_stderr.push((var / nf).sqrt());
            }
            report.samples = samples;
            visited = seen.into_iter().map(|s| s.into_iter().collect()).collect();
        }
    }
    report.ratio = report.expected_entropy[steps] / ent0;
    report.stderr = report.expected_entropy_stderr[steps] / ent0;

    let mut product = 1.0;
    for (t, states) in visited.iter().enumerate() {
        let family_seed = derive_seed(config.seed, "conservation_family", t as u64);
        let mut f_only: f64 = 0.0;
        let mut c_hat: f64 = 0.0;
        for (idx, a) in states.iter().enumerate() {
            let view = LocalView::new(g, k, a, f)?;
            if let Some(r) = view.f_tilt_ratio()? {
                f_only = f_only.max(r);
            }
            if mode == ConservationMode::Exact || idx < config.family_states {
                c_hat = c_hat.max(view.family_ratio(config.family_size, family_seed)?);
            }
        }
        c_hat = c_hat.max(f_only);
        report.f_tilt_c.push(f_only);
        report.per_step_c.push(c_hat);
        product *= (1.0 - c_hat / (k - t) as f64).max(0.0);
    }
    report.product_bound = product.max(1e-9);
    Ok(report)
}

struct McChunk {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    states: Vec<BTreeSet<Vec<usize>>>,
}

fn mc_chunk(
    g: &Graph,
    k: usize,
    steps: usize,
    f: &SetFunction,
    sets: &[Vec<usize>],
    len: usize,
    seed: u64,
) -> Result<McChunk> {
    let mut rng = child_rng(seed, "conservation_chunk", 0);
    let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut sum = vec![CompensatedSum::new(); steps + 1];
    let mut sum_sq = vec![CompensatedSum::new(); steps + 1];
    let mut states = vec![BTreeSet::new(); steps];
    for _ in 0..len {
        let mut ordering = sets.choose(&mut rng).expect("nonempty").clone();
        ordering.shuffle(&mut rng);
        for t in 0..=steps {
            let mut a = ordering[..t].to_vec();
            a.sort_unstable();
            let ent = match cache.get(&a) {
                Some(&e) => e,
                None => {
                    let e = LocalView::new(g, k, &a, f)?.ent;
                    cache.insert(a.clone(), e);
                    e
                }
            };
            sum[t].add(ent);
            sum_sq[t].add(ent * ent);
            if t < steps {
                states[t].insert(a);
            }
        }
    }
    Ok(McChunk {
        sum: sum.iter().map(CompensatedSum::value).collect(),
        sum_sq: sum_sq.iter().map(CompensatedSum::value).collect(),
        states,
    })
}
