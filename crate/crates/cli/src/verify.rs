//! The `verify` checks. Each returns `(ok, results)`.

use entropic_core::indep::{
    connected_graphs, enumerate_ik, one_step_decomposition_check, residual_uniformity_check,
    uniform_ik, FunctionSpec, Graph,
};
use entropic_core::localization::{
    entropic_independence_check, lipschitz_check, measure_restricted_alpha, mu_family,
    quadratic_stability_check, slice_mu_family, AlphaReport,
};
use entropic_core::measure::{log_laplace, CubeMeasure, TiltVector};
use entropic_core::seed::{child_rng, derive_seed};
use entropic_core::sparse::{
    dv_sparse_bound, kyfan_norm_sq, sample_sparse_vectors, sparse_conjugate, SearchConfig,
    SparseFamily,
};
use entropic_core::{Error, Result};
use itertools::Itertools;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::suites::{measure_suite, SuiteKind, SuiteMeasure};

pub const CHECKS: [&str; 8] = [
    "thm1.3",
    "thm1.5",
    "prop4.1",
    "lemma5.3",
    "lemma5.4",
    "lemma6.1",
    "decomposition",
    "dv",
];

/// Shared config for every check; each reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Number of random instances; the per-check default when absent.
    pub count: Option<usize>,
    /// Coordinates for random measures and vectors.
    pub n: usize,
    /// Largest graph size for the graph catalogs.
    pub max_n: usize,
    pub max_degree: usize,
    pub c: f64,
    pub suite: SuiteKind,
    pub family_size: usize,
    pub pin_budget: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            count: None,
            n: 6,
            max_n: 6,
            max_degree: 3,
            c: 0.5,
            suite: SuiteKind::Mixed,
            family_size: 200,
            pin_budget: 1 << 22,
        }
    }
}

pub fn run_check(name: &str, config: &VerifyConfig) -> Result<(bool, Value)> {
    match name {
        "thm1.3" => entropic_independence(config),
        "thm1.5" => quadratic_stability(config),
        "prop4.1" => lipschitz(config),
        "lemma5.3" => kyfan_bounds(config),
        "lemma5.4" => sparse_conjugate_check(config),
        "lemma6.1" => residual_uniformity(config),
        "decomposition" => decomposition(config),
        "dv" => sparse_dv(config),
        other => Err(Error::Precondition(format!(
            "unknown check {other:?}; expected one of {}",
            CHECKS.join(", ")
        ))),
    }
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn exact_alpha(nu: &CubeMeasure, fam: &SparseFamily, config: &VerifyConfig) -> Result<AlphaReport> {
    measure_restricted_alpha(nu, fam, config.pin_budget as u128, None)
}

fn suite(config: &VerifyConfig, default_count: usize) -> Result<Vec<SuiteMeasure>> {
    measure_suite(
        config.suite,
        config.count.unwrap_or(default_count),
        config.n,
        config.seed,
    )
}

fn quadratic_stability(config: &VerifyConfig) -> Result<(bool, Value)> {
    let mut ok = true;
    let mut rows = Vec::new();
    for (i, m) in suite(config, 20)?.iter().enumerate() {
        let fam = SparseFamily::new(m.measure.n(), config.c)?;
        let alpha = exact_alpha(&m.measure, &fam, config)?;
        let family = mu_family(
            &m.measure,
            config.family_size,
            derive_seed(config.seed, "thm1.5_family", i as u64),
        );
        let report = quadratic_stability_check(&m.measure, &fam, alpha.alpha, &family)?;
        ok &= report.ok;
        rows.push(json!({ "measure": m.label, "pins": alpha.pins_tested, "report": report }));
    }
    let max_ratio = rows
        .iter()
        .map(|r| r["report"]["max_ratio"].as_f64().unwrap_or(0.0))
        .fold(0.0, f64::max);
    Ok((
        ok,
        json!({ "ok": ok, "max_ratio": max_ratio, "measures": rows }),
    ))
}

fn lipschitz(config: &VerifyConfig) -> Result<(bool, Value)> {
    let mut ok = true;
    let mut rows = Vec::new();
    for (i, m) in suite(config, 20)?.iter().enumerate() {
        let fam = SparseFamily::new(m.measure.n(), config.c)?;
        let alpha = exact_alpha(&m.measure, &fam, config)?;
        let vs = sample_sparse_vectors(&fam, 100, derive_seed(config.seed, "prop4.1", i as u64));
        let report = lipschitz_check(&m.measure, &fam, alpha.alpha, &vs)?;
        ok &= report.ok;
        rows.push(json!({ "measure": m.label, "report": report }));
    }
    Ok((ok, json!({ "ok": ok, "measures": rows })))
}

/// Exact rational `(m/n)‖x‖² ≤ ‖x‖²_{(m)} ≤ ‖x‖²`, plus agreement of the
/// floating-point Ky Fan norm with the exact one.
fn kyfan_bounds(config: &VerifyConfig) -> Result<(bool, Value)> {
    let count = config.count.unwrap_or(1000);
    let mut ok = true;
    let mut max_rel_err: f64 = 0.0;
    let mut failures = Vec::new();
    for i in 0..count {
        let mut rng = child_rng(config.seed, "lemma5.3", i as u64);
        let n = rng.random_range(1..=64usize);
        let m = rng.random_range(1..=n);
        let x: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_bool(0.1) {
                    0.0
                } else {
                    gaussian(&mut rng) * 10f64.powi(rng.random_range(-3..=3))
                }
            })
            .collect();
        let mut sq: Vec<BigRational> = x
            .iter()
            .map(|&v| {
                let r = BigRational::from_float(v).expect("finite");
                &r * &r
            })
            .collect();
        sq.sort_by(|a, b| b.cmp(a));
        let total = sq.iter().fold(BigRational::zero(), |acc, s| acc + s);
        let top = sq[..m].iter().fold(BigRational::zero(), |acc, s| acc + s);
        let lower = &total * BigRational::new(m.into(), n.into());
        let holds = lower <= top && top <= total;
        let float = kyfan_norm_sq(&x, m)?;
        let exact = top.to_f64().unwrap_or(f64::NAN);
        let rel = if exact == 0.0 {
            float.abs()
        } else {
            ((float - exact) / exact).abs()
        };
        max_rel_err = max_rel_err.max(rel);
        if !holds || rel > 1e-12 {
            ok = false;
            failures.push(json!({ "index": i, "n": n, "m": m }));
        }
    }
    Ok((
        ok,
        json!({ "ok": ok, "cases": count, "max_rel_float_error": max_rel_err, "failures": failures }),
    ))
}

/// Closed form `‖x‖²_{(m)}/(2ε)` against the best support, each support
/// evaluated at its analytic maximizer `v = x_S/ε`.
fn sparse_conjugate_check(config: &VerifyConfig) -> Result<(bool, Value)> {
    let count = config.count.unwrap_or(200);
    let mut max_gap: f64 = 0.0;
    for i in 0..count {
        let mut rng = child_rng(config.seed, "lemma5.4", i as u64);
        let n = rng.random_range(1..=config.n.clamp(1, 12));
        let c = rng.random_range(0.05..=1.0);
        let eps = rng.random_range(0.1..10.0);
        let x: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
        let fam = SparseFamily::new(n, c)?;
        let closed = sparse_conjugate(&x, eps, &fam)?;
        let mut oracle = f64::NEG_INFINITY;
        for size in 1..=fam.m() {
            for support in (0..n).combinations(size) {
                let value: f64 = support
                    .iter()
                    .map(|&j| {
                        let v = x[j] / eps;
                        x[j] * v - 0.5 * eps * v * v
                    })
                    .sum();
                oracle = oracle.max(value);
            }
        }
        max_gap = max_gap.max((closed - oracle).abs());
    }
    let ok = max_gap <= 1e-9;
    Ok((ok, json!({ "ok": ok, "cases": count, "max_gap": max_gap })))
}

/// Every connected graph up to `max_n` vertices, every nonempty `I_k`, every
/// `t ≤ k`.
fn residual_uniformity(config: &VerifyConfig) -> Result<(bool, Value)> {
    let mut ok = true;
    let mut cases = 0;
    let mut max_gap: f64 = 0.0;
    let graphs = connected_graphs(config.max_n, None);
    for g in &graphs {
        for k in 0..=g.n() {
            if enumerate_ik(g, k).is_empty() {
                break;
            }
            for t in 0..=k {
                let r = residual_uniformity_check(g, k, t)?;
                cases += 1;
                ok &= r.ok;
                max_gap = max_gap.max(r.max_gap);
            }
        }
    }
    Ok((
        ok,
        json!({ "ok": ok, "graphs": graphs.len(), "cases": cases, "max_gap": max_gap }),
    ))
}

fn decomposition(config: &VerifyConfig) -> Result<(bool, Value)> {
    let count = config.count.unwrap_or(50);
    let mut ok = true;
    let mut rows = Vec::new();
    let mut max_gap: f64 = 0.0;
    for i in 0..count {
        let mut rng = child_rng(config.seed, "decomposition", i as u64);
        let n = rng.random_range(3..=9usize);
        let g = Graph::random_bounded_degree(n, config.max_degree, 0.5, rng.random());
        let max_k = (1..=n)
            .take_while(|&k| !enumerate_ik(&g, k).is_empty())
            .last()
            .unwrap_or(1);
        let k = rng.random_range(1..=max_k);
        let t = rng.random_range(0..k);
        let spec = match rng.random_range(0..4) {
            0 => FunctionSpec::ExpLinear { scale: 0.5 },
            1 => FunctionSpec::ExpLinear { scale: 1.0 },
            2 => FunctionSpec::ExpLinear { scale: 2.0 },
            _ => FunctionSpec::OnePlusIndicator {
                vertex: rng.random_range(0..n),
            },
        };
        let f = spec.resolve(n, rng.random());
        let r = one_step_decomposition_check(&g, k, t, &f)?;
        let gap = r.gap.max(r.max_state_gap);
        max_gap = max_gap.max(gap);
        ok &= gap <= 1e-10;
        rows.push(json!({
            "graph": g.edges(), "n": n, "k": k, "t": t, "f": spec,
            "lhs": r.lhs, "rhs": r.rhs, "gap": r.gap, "max_state_gap": r.max_state_gap,
        }));
    }
    Ok((
        ok,
        json!({ "ok": ok, "max_gap": max_gap, "instances": rows }),
    ))
}

/// Connected graphs with bounded degree, every `k ≥ 1` with nonempty `I_k`.
fn entropic_independence(config: &VerifyConfig) -> Result<(bool, Value)> {
    let mut ok = true;
    let mut rows = Vec::new();
    let mut worst_slack = f64::INFINITY;
    for (gi, g) in connected_graphs(config.max_n, Some(config.max_degree))
        .iter()
        .enumerate()
    {
        for k in 1..=g.n() {
            let Ok(nu) = uniform_ik(g, k) else { break };
            let cube = nu.to_cube()?;
            let fam = SparseFamily::new(g.n(), config.c)?;
            let alpha = exact_alpha(&cube, &fam, config)?;
            let seed = derive_seed(config.seed, "thm1.3_family", (gi * 64 + k) as u64);
            let family = slice_mu_family(&nu, config.family_size, seed)?;
            let r = entropic_independence_check(&nu, &fam, alpha.alpha, &family)?;
            ok &= r.ok;
            worst_slack = worst_slack.min(r.c_used - r.max_ratio);
            rows.push(json!({
                "graph": g.edges(), "n": g.n(), "k": k, "alpha": r.alpha, "b": r.b,
                "c_used": r.c_used, "max_ratio": r.max_ratio, "chain_ok": r.chain_ok, "ok": r.ok,
            }));
        }
    }
    Ok((
        ok,
        json!({ "ok": ok, "instances": rows.len(), "min_slack": worst_slack, "results": rows }),
    ))
}

/// Sparse Donsker–Varadhan chain `KL ≥ searched bound`, `KL ≥ Φ_c(Δm)` with
/// `ε = 4α`, and `h(v) ≤ (ε/2)‖v‖²` at the search optimum.
fn sparse_dv(config: &VerifyConfig) -> Result<(bool, Value)> {
    let mut ok = true;
    let mut rows = Vec::new();
    let members = config.family_size.min(12);
    for (i, m) in suite(config, 6)?.iter().enumerate() {
        let nu = &m.measure;
        let fam = SparseFamily::new(nu.n(), config.c)?;
        let alpha = exact_alpha(nu, &fam, config)?.alpha;
        let eps = 4.0 * alpha;
        let base = nu.mean();
        let family = mu_family(nu, members, derive_seed(config.seed, "dv_family", i as u64));
        let search = SearchConfig {
            seed: derive_seed(config.seed, "dv_search", i as u64),
            ..SearchConfig::default()
        };
        for member in family {
            let kl = member.measure.kl(nu)?;
            let dv = dv_sparse_bound(&member.measure, nu, &fam, &search)?;
            let diff: Vec<f64> = member
                .measure
                .mean()
                .iter()
                .zip(&base)
                .map(|(a, b)| a - b)
                .collect();
            let conj = if eps > 0.0 {
                sparse_conjugate(&diff, eps, &fam)?
            } else {
                0.0
            };
            let v = TiltVector::new(dv.best_v.clone())?;
            let h = log_laplace(nu, &v)?.h;
            let h_ok = h <= 0.5 * eps * v.norm2().powi(2) + 1e-9;
            let row_ok = dv.bound <= kl + 1e-9 && (eps == 0.0 || conj <= kl + 1e-9) && h_ok;
            ok &= row_ok;
            rows.push(json!({
                "measure": m.label, "mu": member.label, "kl": kl, "dv_bound": dv.bound,
                "conjugate": conj, "h_ok": h_ok, "ok": row_ok,
            }));
        }
    }
    Ok((ok, json!({ "ok": ok, "pairs": rows })))
}
