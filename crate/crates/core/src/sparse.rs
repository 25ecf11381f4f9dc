//! Sparse vector families, sign closures, Ky Fan norms, the sparse quadratic
//! conjugate and the sparse Donsker–Varadhan lower bound.

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{log_laplace_raw, CubeMeasure, PinVector, TiltVector};
use crate::seed::child_rng;

/// `Sparse_c`: vectors in `ℝ^n` with at most `m = ⌈c·n⌉` nonzero entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseFamily {
    n: usize,
    c: f64,
    m: usize,
}

impl SparseFamily {
    pub fn new(n: usize, c: f64) -> Result<Self> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::InvalidSparsity(c));
        }
        if n == 0 {
            return Err(Error::Precondition("sparse family needs n >= 1".into()));
        }
        // guard against c·n landing a hair above an integer
        let raw = c * n as f64;
        let m = if (raw - raw.round()).abs() < 1e-12 {
            raw.round() as usize
        } else {
            raw.ceil() as usize
        };
        Ok(Self {
            n,
            c,
            m: m.clamp(1, n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Support cap `⌈c·n⌉`.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn contains(&self, v: &TiltVector) -> bool {
        v.len() == self.n && v.support_size() <= self.m
    }

    /// `Σ_{j ≤ m} C(n, j) 2^j`, the size of `sign(Sparse_c)`.
    pub fn sign_closure_size(&self) -> u128 {
        (0..=self.m)
            .map(|j| binomial(self.n, j) * (1u128 << j))
            .sum()
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// A set of vectors whose sign pattern downward-closure is queried.
#[derive(Debug, Clone)]
pub enum VectorSet<'a> {
    Sparse(SparseFamily),
    List(&'a [TiltVector]),
}

/// `s ∈ sign(V)`: some `v ∈ V` has `s_i ∈ {0, sign(v_i)}` for every `i`.
pub fn sign_closure_member(s: &PinVector, set: &VectorSet<'_>) -> bool {
    match set {
        VectorSet::Sparse(fam) => s.len() == fam.n() && s.support_size() <= fam.m(),
        VectorSet::List(vs) => vs.iter().any(|v| {
            v.len() == s.len()
                && v.sign()
                    .as_slice()
                    .iter()
                    .zip(s.as_slice())
                    .all(|(&sv, &si)| si == 0 || si == sv)
        }),
    }
}

/// Squared Ky Fan `m`-norm: the sum of the `m` largest squared coordinates.
pub fn kyfan_norm_sq(x: &[f64], m: usize) -> Result<f64> {
    if m == 0 || m > x.len() {
        return Err(Error::KyFanOrder { m, n: x.len() });
    }
    let mut sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    sq.sort_by(|a, b| b.total_cmp(a));
    Ok(sq[..m].iter().sum())
}

/// `sup_{v ∈ Sparse_c} ⟨x, v⟩ − (ε/2)‖v‖²`, in closed form
/// `‖x‖²_{2,(m)} / (2ε)`.
pub fn sparse_conjugate(x: &[f64], eps: f64, fam: &SparseFamily) -> Result<f64> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::NonPositiveEpsilon(eps));
    }
    if x.len() != fam.n() {
        return Err(Error::LengthMismatch {
            expected: fam.n(),
            found: x.len(),
        });
    }
    Ok(kyfan_norm_sq(x, fam.m())? / (2.0 * eps))
}

/// Search configuration for [`dv_sparse_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub max_support_exact: usize,
    pub multistarts: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_support_exact: 3,
            multistarts: 64,
            seed: 0,
        }
    }
}

/// Maximum of `⟨m(μ), v⟩ − f(v)` found over `v ∈ Sparse_c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvSparseBound {
    pub bound: f64,
    pub best_v: Vec<f64>,
    pub supports_searched: usize,
}

/// Sparse linear Donsker–Varadhan lower bound on `KL(μ‖ν)`.
///
/// Every support of size `≤ min(m, max_support_exact)` is maximized exactly
/// (the objective is concave on a fixed support). When `m` exceeds that,
/// each multistart draws a seeded random ordering of the coordinates and
/// maximizes over all of its prefixes of length `max_support_exact+1..=m`,
/// so the searched class grows with `c`.
pub fn dv_sparse_bound(
    mu: &CubeMeasure,
    nu: &CubeMeasure,
    fam: &SparseFamily,
    config: &SearchConfig,
) -> Result<DvSparseBound> {
    if mu.n() != nu.n() || fam.n() != nu.n() {
        return Err(Error::LengthMismatch {
            expected: nu.n(),
            found: mu.n(),
        });
    }
    // μ ≪ ν is required for the bound to be meaningful
    mu.kl(nu)?;
    let n = nu.n();
    let target = mu.mean();
    let mut best = DvSparseBound {
        bound: 0.0,
        best_v: vec![0.0; n],
        supports_searched: 1,
    };
    let exact = fam.m().min(config.max_support_exact);
    let consider = |support: &[usize], best: &mut DvSparseBound| {
        let (value, v) = maximize_on_support(nu, &target, support);
        best.supports_searched += 1;
        if value > best.bound {
            best.bound = value;
            best.best_v = v;
        }
    };
    for size in 1..=exact {
        for support in (0..n).combinations(size) {
            consider(&support, &mut best);
        }
    }
    if fam.m() > exact {
        let mut rng = child_rng(config.seed, "dv_sparse_bound", 0);
        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..config.multistarts {
            order.shuffle(&mut rng);
            for size in exact + 1..=fam.m() {
                consider(&order[..size], &mut best);
            }
        }
    }
    Ok(best)
}

/// Coordinate-wise safeguarded Newton ascent of `⟨target, v⟩ − f(v)` over
/// vectors supported on `support`. Returns the best value seen.
fn maximize_on_support(nu: &CubeMeasure, target: &[f64], support: &[usize]) -> (f64, Vec<f64>) {
    const TOL: f64 = 1e-9;
    const MAX_SWEEPS: usize = 100;
    const MAX_STEP: f64 = 4.0;
    let n = nu.n();
    let probs = nu.probs();
    let objective = |v: &[f64]| -> (f64, Vec<f64>) {
        let (f, grad) = log_laplace_raw(n, probs, v);
        let lin: f64 = target.iter().zip(v).map(|(a, b)| a * b).sum();
        (lin - f, grad)
    };
    let mut v = vec![0.0; n];
    let (mut value, mut grad) = objective(&v);
    for _ in 0..MAX_SWEEPS {
        let mut max_slope: f64 = 0.0;
        for &i in support {
            let slope = target[i] - grad[i];
            max_slope = max_slope.max(slope.abs());
            if slope.abs() <= TOL {
                continue;
            }
            let curvature = (1.0 - grad[i] * grad[i]).max(1e-12);
            let mut step = (slope / curvature).clamp(-MAX_STEP, MAX_STEP);
            for _ in 0..60 {
                let mut trial = v.clone();
                trial[i] += step;
                let (tv, tg) = objective(&trial);
                if tv >= value {
                    v = trial;
                    value = tv;
                    grad = tg;
                    break;
                }
                step *= 0.5;
            }
        }
        if max_slope <= TOL {
            break;
        }
    }
    (value, v)
}

/// Iterator over feasible pins in `sign(Sparse_c)`, each emitted once.
pub struct SparsePins<'a> {
    nu: &'a CubeMeasure,
    m: usize,
    size: usize,
    combos: Box<dyn Iterator<Item = Vec<usize>> + 'a>,
    current: Option<Vec<usize>>,
    sign_mask: usize,
}

impl Iterator for SparsePins<'_> {
    type Item = PinVector;

    fn next(&mut self) -> Option<PinVector> {
        loop {
            if let Some(support) = &self.current {
                if self.sign_mask < 1 << support.len() {
                    let mut u = vec![0i8; self.nu.n()];
                    for (b, &i) in support.iter().enumerate() {
                        u[i] = if self.sign_mask >> b & 1 == 1 { 1 } else { -1 };
                    }
                    self.sign_mask += 1;
                    let pin = PinVector::new(u).expect("entries are ±1");
                    if pin_feasible(self.nu, &pin) {
                        return Some(pin);
                    }
                    continue;
                }
            }
            match self.combos.next() {
                Some(support) => {
                    self.current = Some(support);
                    self.sign_mask = 0;
                }
                None => {
                    if self.size >= self.m {
                        return None;
                    }
                    self.size += 1;
                    self.combos = Box::new((0..self.nu.n()).combinations(self.size));
                }
            }
        }
    }
}

pub(crate) fn pin_feasible(nu: &CubeMeasure, u: &PinVector) -> bool {
    let (pinned, plus) = u.masks();
    nu.probs()
        .iter()
        .enumerate()
        .any(|(x, &p)| p > 0.0 && x & pinned == plus)
}

/// Exhaustively enumerates feasible sparse pins of `ν`.
pub fn enumerate_sparse_pins<'a>(
    nu: &'a CubeMeasure,
    fam: &SparseFamily,
    budget: u128,
) -> Result<SparsePins<'a>> {
    if fam.n() != nu.n() {
        return Err(Error::LengthMismatch {
            expected: nu.n(),
            found: fam.n(),
        });
    }
    let required = fam.sign_closure_size();
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    Ok(SparsePins {
        nu,
        m: fam.m(),
        size: 0,
        combos: Box::new(std::iter::once(Vec::new())),
        current: None,
        sign_mask: 0,
    })
}

/// Draws `count` feasible sparse pins: uniform support size in `0..=m`,
/// uniform support, uniform signs, rejecting infeasible draws.
pub fn sample_sparse_pins(
    nu: &CubeMeasure,
    fam: &SparseFamily,
    count: usize,
    seed: u64,
) -> Vec<PinVector> {
    let n = nu.n();
    let mut rng = child_rng(seed, "sample_sparse_pins", 0);
    let mut out = Vec::with_capacity(count);
    let max_attempts = count.saturating_mul(1000).max(1000);
    for _ in 0..max_attempts {
        if out.len() == count {
            break;
        }
        let size = rng.random_range(0..=fam.m());
        let support = rand::seq::index::sample(&mut rng, n, size);
        let mut u = vec![0i8; n];
        for i in support.iter() {
            u[i] = if rng.random::<bool>() { 1 } else { -1 };
        }
        let pin = PinVector::new(u).expect("entries are ±1");
        if pin_feasible(nu, &pin) {
            out.push(pin);
        }
    }
    out
}

/// Random vectors in `Sparse_c`: uniform support size in `1..=m`, Gaussian
/// entries at a random scale in `[0.05, 3]`.
pub fn sample_sparse_vectors(fam: &SparseFamily, count: usize, seed: u64) -> Vec<TiltVector> {
    use rand_distr::{Distribution, StandardNormal};
    let n = fam.n();
    let mut rng = child_rng(seed, "sample_sparse_vectors", 0);
    (0..count)
        .map(|_| {
            let size = rng.random_range(1..=fam.m());
            let scale = 0.05 + 2.95 * rng.random::<f64>();
            let mut v = vec![0.0; n];
            for i in rand::seq::index::sample(&mut rng, n, size).iter() {
                let mut g: f64 = StandardNormal.sample(&mut rng);
                if g == 0.0 {
                    g = 1.0;
                }
                v[i] = scale * g;
            }
            TiltVector::new(v).expect("finite")
        })
        .collect()
}
