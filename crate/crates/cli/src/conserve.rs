//! The `conserve` command.

use entropic_core::indep::{
    density_window_check, entropy_conservation_experiment, random_trace, ConservationConfig,
    ConservationMode, ConservationReport, DensityParams, FunctionSpec, Graph,
};
use entropic_core::seed::derive_seed;
use entropic_core::Result;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConserveConfig {
    pub k: usize,
    pub ell: usize,
    pub d: f64,
    pub gamma: f64,
    pub delta: f64,
    pub f: FunctionSpec,
    pub mode: ConservationMode,
    pub samples: usize,
    pub seed: u64,
    pub family_size: usize,
    pub family_states: usize,
    /// Chain traces checked against the density window.
    pub traces: usize,
}

impl Default for ConserveConfig {
    fn default() -> Self {
        let base = ConservationConfig::default();
        Self {
            k: 1,
            ell: 1,
            d: 0.5,
            gamma: 0.0,
            delta: 0.0,
            f: FunctionSpec::ExpLinear { scale: 1.0 },
            mode: base.mode,
            samples: base.samples,
            seed: 0,
            family_size: base.family_size,
            family_states: base.family_states,
            traces: 20,
        }
    }
}

pub struct ConserveOutcome {
    pub ok: bool,
    pub results: Value,
    pub report: ConservationReport,
}

pub fn run_conserve(g: &Graph, config: &ConserveConfig) -> Result<ConserveOutcome> {
    let f = config
        .f
        .resolve(g.n(), derive_seed(config.seed, "conserve_f", 0));
    let report = entropy_conservation_experiment(
        g,
        config.k,
        config.ell,
        &f,
        &ConservationConfig {
            mode: config.mode,
            samples: config.samples,
            seed: config.seed,
            family_size: config.family_size,
            family_states: config.family_states,
        },
    )?;
    let params = DensityParams {
        k: config.k,
        ell: config.ell,
        d: config.d,
        gamma: config.gamma,
        delta: config.delta,
    };
    let steps = config.k - config.ell;
    let mut density = None;
    let mut window_ok = true;
    for i in 0..config.traces.max(1) {
        let trace = random_trace(
            g,
            config.k,
            steps,
            derive_seed(config.seed, "conserve_trace", i as u64),
        )?;
        let r = density_window_check(g, &params, &trace)?;
        window_ok &= r.ok();
        density.get_or_insert(r);
    }
    let density = density.expect("at least one trace");
    let ratio_ok = report.ratio > 0.0 && report.ratio <= 1.0 + 1e-9;
    let ok = ratio_ok && report.bound_holds() && window_ok;
    let results = json!({
        "ok": ok,
        "precondition_violated": !density.preconditions_hold,
        "precondition_violations": density.precondition_violations,
        "density_window_ok": window_ok,
        "alpha_c": density.alpha_c,
        "delta_used": density.delta_used,
        "function": f,
        "conservation": report,
    });
    Ok(ConserveOutcome {
        ok,
        results,
        report,
    })
}
