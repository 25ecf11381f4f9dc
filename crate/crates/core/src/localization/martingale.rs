//! Exact simulation of the pinning jump process `u(t)`, `t ∈ [0, 1]`.
//!
//! Coordinate `i` (still free) jumps to `s_i = sign(v_i)` at rate
//! `λ_i(t, u) = a_i (1 + s_i m_i(π_{t,u}))` with `a_i = |v_i|` and
//! `π_{t,u} = R_u T_{(1−t)v} ν`. Since `λ_i ≤ 2a_i`, jumps are drawn by
//! thinning a homogeneous Poisson clock of rate `2‖v‖₁`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{dot_state, CubeMeasure, PinVector, TiltVector};
use crate::seed::{derive_seed, CompensatedSum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub coordinate: usize,
    pub sign: i8,
}

/// One sampled path of the pinning process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationTrace {
    pub v: TiltVector,
    pub events: Vec<JumpEvent>,
    pub final_pin: PinVector,
    /// `(t, m(μ_t))` at `t = 0` and right after each event.
    pub mean_path: Vec<(f64, Vec<f64>)>,
    /// Poisson proposals drawn, accepted or not.
    pub proposals: usize,
}

impl LocalizationTrace {
    /// `u(t)`: the pin after all events at times `≤ t`.
    pub fn pin_at(&self, t: f64) -> PinVector {
        let mut u = PinVector::zeros(self.v.len());
        for e in self.events.iter().take_while(|e| e.time <= t) {
            u = u.with(e.coordinate, e.sign);
        }
        u
    }

    /// `μ_t = R_{u(t)} T_{(1−t)v} ν`.
    pub fn measure_at(&self, nu: &CubeMeasure, t: f64) -> Result<CubeMeasure> {
        let t = t.clamp(0.0, 1.0);
        nu.tilt(&self.v.scaled(1.0 - t))?.pin(&self.pin_at(t))
    }
}

/// Precomputed data for repeated simulation from one `(ν, v)`.
struct Simulator<'a> {
    nu: &'a CubeMeasure,
    v: &'a TiltVector,
    /// `(state, ν(x), ⟨v, x⟩)` over the support of `ν`
    support: Vec<(usize, f64, f64)>,
    /// coordinates with `v_i ≠ 0` and their cumulative `2a_i`
    movers: Vec<usize>,
    cumulative: Vec<f64>,
    total_rate: f64,
}

impl<'a> Simulator<'a> {
    fn new(nu: &'a CubeMeasure, v: &'a TiltVector) -> Result<Self> {
        if v.len() != nu.n() {
            return Err(Error::LengthMismatch {
                expected: nu.n(),
                found: v.len(),
            });
        }
        let vs = v.as_slice();
        let support = nu
            .support()
            .map(|x| (x, nu.prob(x), dot_state(vs, x)))
            .collect();
        let movers: Vec<usize> = (0..nu.n()).filter(|&i| vs[i] != 0.0).collect();
        let mut acc = 0.0;
        let cumulative = movers
            .iter()
            .map(|&i| {
                acc += 2.0 * vs[i].abs();
                acc
            })
            .collect();
        Ok(Self {
            nu,
            v,
            support,
            movers,
            cumulative,
            total_rate: acc,
        })
    }

    /// `P_{π_{t,u}}[x_i = s]`, which equals `λ_i / (2a_i)`.
    fn acceptance(&self, t: f64, pinned: usize, plus: usize, i: usize, s: i8) -> f64 {
        let scale = 1.0 - t;
        let consistent = || self.support.iter().filter(|(x, _, _)| x & pinned == plus);
        let shift = consistent()
            .map(|&(_, _, d)| scale * d)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        let mut hit = 0.0;
        for &(x, p, d) in consistent() {
            let w = p * (scale * d - shift).exp();
            total += w;
            if (x >> i & 1 == 1) == (s > 0) {
                hit += w;
            }
        }
        let prob = hit / total;
        debug_assert!((0.0..=1.0 + 1e-12).contains(&prob));
        prob.clamp(0.0, 1.0)
    }

    fn run(&self, rng: &mut ChaCha8Rng, record_path: bool) -> LocalizationTrace {
        let n = self.nu.n();
        let vs = self.v.as_slice();
        let mut u = PinVector::zeros(n);
        let (mut pinned, mut plus) = (0usize, 0usize);
        let mut events = Vec::new();
        let mut mean_path = Vec::new();
        if record_path {
            mean_path.push((0.0, self.nu.tilt(self.v).expect("length checked").mean()));
        }
        let mut t = 0.0;
        let mut proposals = 0;
        if self.total_rate > 0.0 {
            loop {
                let gap: f64 = Exp1.sample(rng);
                t += gap / self.total_rate;
                if t > 1.0 {
                    break;
                }
                proposals += 1;
                let r = rng.random::<f64>() * self.total_rate;
                let k = self
                    .cumulative
                    .partition_point(|&c| c <= r)
                    .min(self.movers.len() - 1);
                let i = self.movers[k];
                if pinned >> i & 1 == 1 {
                    continue;
                }
                let s: i8 = if vs[i] > 0.0 { 1 } else { -1 };
                let accept = self.acceptance(t, pinned, plus, i, s);
                if rng.random::<f64>() < accept {
                    pinned |= 1 << i;
                    if s > 0 {
                        plus |= 1 << i;
                    }
                    u = u.with(i, s);
                    events.push(JumpEvent {
                        time: t,
                        coordinate: i,
                        sign: s,
                    });
                    if record_path {
                        let mu_t = self
                            .nu
                            .tilt(&self.v.scaled(1.0 - t))
                            .and_then(|m| m.pin(&u))
                            .expect("accepted jumps have positive probability");
                        mean_path.push((t, mu_t.mean()));
                    }
                }
            }
        }
        LocalizationTrace {
            v: self.v.clone(),
            events,
            final_pin: u,
            mean_path,
            proposals,
        }
    }
}

/// Jump rates `λ_i(t, u) = a_i (1 + s_i m_i(π_{t,u}))` from the definition;
/// zero for pinned coordinates and where `v_i = 0`.
pub fn jump_rates(nu: &CubeMeasure, v: &TiltVector, t: f64, u: &PinVector) -> Result<Vec<f64>> {
    let pi = nu.tilt(&v.scaled(1.0 - t))?.pin(u)?;
    let m = pi.mean();
    Ok(v.as_slice()
        .iter()
        .enumerate()
        .map(|(i, &vi)| {
            if vi == 0.0 || u.get(i) != 0 {
                0.0
            } else {
                vi.abs() * (1.0 + vi.signum() * m[i])
            }
        })
        .collect())
}

/// Samples one trace of the pinning process started from `T_v ν`.
pub fn simulate_martingale(
    nu: &CubeMeasure,
    v: &TiltVector,
    seed: u64,
) -> Result<LocalizationTrace> {
    let sim = Simulator::new(nu, v)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sim.run(&mut rng, true))
}

/// Monte Carlo check of `E[m(R_{u(1)} ν)] = m(T_v ν)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub trials: usize,
    pub mc_mean: Vec<f64>,
    pub target: Vec<f64>,
    pub stderr: Vec<f64>,
    pub z_scores: Vec<f64>,
    pub max_abs_z: f64,
    pub ok: bool,
}

/// z-score threshold for [`martingale_mean_check`].
pub const MARTINGALE_Z_MAX: f64 = 4.0;

const CHUNK: usize = 1024;

/// Averages `m(R_{u(1)} ν)` over `trials` traces and compares it with
/// `m(T_v ν)`. Trial `j` is seeded with `derive_seed(seed, "martingale", j)`.
pub fn martingale_mean_check(
    nu: &CubeMeasure,
    v: &TiltVector,
    trials: usize,
    seed: u64,
) -> Result<MartingaleReport> {
    if trials < 1000 {
        return Err(Error::Precondition(format!(
            "martingale check needs at least 1000 trials, got {trials}"
        )));
    }
    let sim = Simulator::new(nu, v)?;
    let n = nu.n();
    let target = nu.tilt(v)?.mean();

    let chunks: Vec<(Vec<CompensatedSum>, Vec<CompensatedSum>)> = (0..trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut cache: HashMap<PinVector, Vec<f64>> = HashMap::new();
            let mut sum = vec![CompensatedSum::new(); n];
            let mut sum_sq = vec![CompensatedSum::new(); n];
            for j in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "martingale", j as u64));
                let trace = sim.run(&mut rng, false);
                let m = cache.entry(trace.final_pin.clone()).or_insert_with(|| {
                    nu.pin(&trace.final_pin)
                        .expect("reached pins are feasible")
                        .mean()
                });
                for i in 0..n {
                    sum[i].add(m[i]);
                    sum_sq[i].add(m[i] * m[i]);
                }
            }
            (sum, sum_sq)
        })
        .collect();

    let mut sum = vec![CompensatedSum::new(); n];
    let mut sum_sq = vec![CompensatedSum::new(); n];
    for (s, q) in &chunks {
        for i in 0..n {
            sum[i].add(s[i].value());
            sum_sq[i].add(q[i].value());
        }
    }
    let count = trials as f64;
    let mut mc_mean = Vec::with_capacity(n);
    let mut stderr = Vec::with_capacity(n);
    let mut z_scores = Vec::with_capacity(n);
    for i in 0..n {
        let mean = sum[i].value() / count;
        let var = ((sum_sq[i].value() - count * mean * mean) / (count - 1.0)).max(0.0);
        let se = (var / count).sqrt();
        let diff = mean - target[i];
        let z = if se > 0.0 {
            diff / se
        } else if diff.abs() <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        mc_mean.push(mean);
        stderr.push(se);
        z_scores.push(z);
    }
    let max_abs_z = z_scores.iter().map(|z| z.abs()).fold(0.0, f64::max);
    Ok(MartingaleReport {
        trials,
        mc_mean,
        target,
        stderr,
        z_scores,
        max_abs_z,
        ok: max_abs_z <= MARTINGALE_Z_MAX,
    })
}
