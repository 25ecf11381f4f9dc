use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{divergences, kl_divergence, CubeMeasure, SliceMeasure, TiltVector};
use crate::sparse::SparseFamily;

use super::{FamilyMember, SliceFamilyMember};

/// Slack on theorem inequalities.
pub const THEOREM_TOL: f64 = 1e-6;

/// Family members with KL at or below this are skipped as `μ = ν`.
const KL_SKIP: f64 = 1e-12;

/// Result of the Lipschitz bound `‖m(T_v ν) − m(ν)‖ ≤ 4α‖v‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub alpha: f64,
    pub bound: f64,
    pub max_ratio: f64,
    pub worst_v: Option<TiltVector>,
    pub samples: usize,
    pub ok: bool,
}

/// Checks the mean-map Lipschitz bound on every nonzero sample. Samples
/// must lie in `Sparse_c`.
pub fn lipschitz_check(
    nu: &CubeMeasure,
    fam: &SparseFamily,
    alpha: f64,
    samples: &[TiltVector],
) -> Result<LipschitzReport> {
    let base = nu.mean();
    let mut report = LipschitzReport {
        alpha,
        bound: 4.0 * alpha,
        max_ratio: 0.0,
        worst_v: None,
        samples: 0,
        ok: true,
    };
    for v in samples {
        if !fam.contains(v) {
            return Err(Error::Precondition(format!(
                "direction with support {} is not in Sparse_c (m = {})",
                v.support_size(),
                fam.m()
            )));
        }
        let norm = v.norm2();
        if norm == 0.0 {
            continue;
        }
        let moved = nu.tilt(v)?.mean();
        let shift = moved
            .iter()
            .zip(&base)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        report.samples += 1;
        if shift > 4.0 * alpha * norm + 1e-9 {
            report.ok = false;
        }
        let ratio = shift / norm;
        if ratio > report.max_ratio {
            report.max_ratio = ratio;
            report.worst_v = Some(v.clone());
        }
    }
    Ok(report)
}

/// JSON check report shared by the theorem verifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub alpha: f64,
    pub c: f64,
    pub bound: f64,
    pub max_ratio: f64,
    pub witness_mu: Option<String>,
    pub ok: bool,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Largest `‖m(μ) − m(ν)‖² / KL(μ‖ν)` over the family against `8α/c`.
pub fn quadratic_stability_check(
    nu: &CubeMeasure,
    fam: &SparseFamily,
    alpha: f64,
    family: &[FamilyMember],
) -> Result<CheckReport> {
    let base = nu.mean();
    let bound = 8.0 * alpha / fam.c();
    let mut report = CheckReport {
        check: "thm1.5".into(),
        alpha,
        c: fam.c(),
        bound,
        max_ratio: 0.0,
        witness_mu: None,
        ok: true,
        evaluated: 0,
        skipped: 0,
    };
    for member in family {
        let kl = member.measure.kl(nu)?;
        if kl <= KL_SKIP {
            report.skipped += 1;
            continue;
        }
        report.evaluated += 1;
        let dist_sq: f64 = member
            .measure
            .mean()
            .iter()
            .zip(&base)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let ratio = dist_sq / kl;
        if ratio > report.max_ratio {
            report.max_ratio = ratio;
            report.witness_mu = Some(member.label.clone());
        }
    }
    report.ok = report.max_ratio <= bound + THEOREM_TOL;
    Ok(report)
}

/// Entropic-independence verification on a slice measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropicReport {
    pub check: String,
    pub alpha: f64,
    pub c: f64,
    /// Smallest nonzero inclusion probability `P_ν[i ∈ S]`.
    pub b: f64,
    /// `2α / (b c)`.
    pub c_used: f64,
    /// Largest `k · KL(q_μ‖q_ν) / KL(μ‖ν)`.
    pub max_ratio: f64,
    pub witness_mu: Option<String>,
    /// Every step of `KL(q_μ‖q_ν) ≤ χ²(q_μ‖q_ν) ≤ Σ(Δp)²/(bk) = ‖Δm‖²/(4bk)
    /// ≤ 2α KL(μ‖ν)/(bck)` held.
    pub chain_ok: bool,
    pub max_chain_violation: f64,
    pub ok: bool,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Verifies `k·KL(q_μ‖q_ν) ≤ (2α/(bc)) KL(μ‖ν)` and its χ² proof chain over
/// the family. `alpha` must be measured on the pushforward of `ν`.
pub fn entropic_independence_check(
    nu: &SliceMeasure,
    fam: &SparseFamily,
    alpha: f64,
    family: &[SliceFamilyMember],
) -> Result<EntropicReport> {
    let k = nu.k();
    if k == 0 {
        return Err(Error::EmptyK);
    }
    let incl_nu = nu.inclusion_probs();
    let b = incl_nu
        .iter()
        .copied()
        .filter(|&p| p > 0.0)
        .fold(f64::INFINITY, f64::min);
    let kf = k as f64;
    let q_nu: Vec<f64> = incl_nu.iter().map(|p| p / kf).collect();
    let m_nu: Vec<f64> = incl_nu.iter().map(|p| 2.0 * p - 1.0).collect();
    let c_used = 2.0 * alpha / (b * fam.c());
    let mut report = EntropicReport {
        check: "thm1.3".into(),
        alpha,
        c: fam.c(),
        b,
        c_used,
        max_ratio: 0.0,
        witness_mu: None,
        chain_ok: true,
        max_chain_violation: 0.0,
        ok: true,
        evaluated: 0,
        skipped: 0,
    };
    let violation = |gap: f64, report: &mut EntropicReport| {
        if gap > report.max_chain_violation {
            report.max_chain_violation = gap;
        }
    };
    for member in family {
        let kl = member.measure.kl(nu)?;
        if kl <= KL_SKIP {
            report.skipped += 1;
            continue;
        }
        report.evaluated += 1;
        let incl_mu = member.measure.inclusion_probs();
        let q_mu: Vec<f64> = incl_mu.iter().map(|p| p / kf).collect();
        let d = divergences(&q_mu, &q_nu)?;
        let kl_q = kl_divergence(&q_mu, &q_nu)?;
        let marginal_sq: f64 = incl_mu
            .iter()
            .zip(&incl_nu)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let mean_sq: f64 = incl_mu
            .iter()
            .map(|p| 2.0 * p - 1.0)
            .zip(&m_nu)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let marginal_bound = marginal_sq / (b * kf);
        let mean_bound = mean_sq / (4.0 * b * kf);
        let theorem_bound = 2.0 * alpha * kl / (b * fam.c() * kf);

        violation(kl_q - d.chi2, &mut report);
        violation(d.chi2 - marginal_bound, &mut report);
        violation((marginal_bound - mean_bound).abs(), &mut report);
        violation(mean_bound - theorem_bound, &mut report);

        let ratio = kf * kl_q / kl;
        if ratio > report.max_ratio {
            report.max_ratio = ratio;
            report.witness_mu = Some(member.label.clone());
        }
    }
    report.chain_ok = report.max_chain_violation <= THEOREM_TOL;
    report.ok = report.chain_ok && report.max_ratio <= c_used + THEOREM_TOL;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::localization::{measure_restricted_alpha, mu_family, slice_mu_family};
    use crate::sparse::sample_sparse_vectors;

    fn c4_slice() -> SliceMeasure {
        SliceMeasure::uniform_over(4, 2, &[vec![0, 2], vec![1, 3]]).unwrap()
    }

    #[test]
    fn lipschitz_on_product_measure() {
        let nu = CubeMeasure::uniform(4).unwrap();
        let fam = SparseFamily::new(4, 0.5).unwrap();
        let vs = sample_sparse_vectors(&fam, 100, 1);
        let r = lipschitz_check(&nu, &fam, 1.0, &vs).unwrap();
        assert!(r.ok);
        assert!(r.max_ratio <= 1.0 + 1e-12);
    }

    #[test]
    fn lipschitz_small_field_tracks_covariance() {
        let nu = c4_slice().to_cube().unwrap();
        let fam = SparseFamily::new(4, 1.0).unwrap();
        let v = TiltVector::new(vec![1e-4, 0.0, 0.0, 0.0]).unwrap();
        let r = lipschitz_check(&nu, &fam, 4.0, &[v, TiltVector::zeros(4)]).unwrap();
        assert_eq!(r.samples, 1);
        // Cov·e_0 = (1,−1,1,−1), norm 2
        assert!((r.max_ratio - 2.0).abs() < 1e-6);
    }

    #[test]
    fn lipschitz_rejects_dense_directions() {
        let nu = CubeMeasure::uniform(3).unwrap();
        let fam = SparseFamily::new(3, 0.3).unwrap();
        let v = TiltVector::new(vec![1.0, 1.0, 0.0]).unwrap();
        assert!(lipschitz_check(&nu, &fam, 1.0, &[v]).is_err());
    }

    #[test]
    fn quadratic_stability_examples() {
        let n = 5;
        let nu = CubeMeasure::uniform(n).unwrap();
        let fam = SparseFamily::new(n, 1.0).unwrap();
        let point = FamilyMember {
            label: "all-ones".into(),
            measure: CubeMeasure::point_mass(n, (1 << n) - 1).unwrap(),
        };
        let same = FamilyMember {
            label: "self".into(),
            measure: nu.clone(),
        };
        let r = quadratic_stability_check(&nu, &fam, 1.0, &[same, point]).unwrap();
        assert_eq!(r.skipped, 1);
        assert!((r.max_ratio - 1.0 / std::f64::consts::LN_2).abs() < 1e-12);
        assert!(r.ok);

        let c4 = c4_slice().to_cube().unwrap();
        let fam = SparseFamily::new(4, 1.0).unwrap();
        let point = FamilyMember {
            label: "{0,2}".into(),
            measure: CubeMeasure::point_mass(4, 0b0101).unwrap(),
        };
        let r = quadratic_stability_check(&c4, &fam, 4.0, &[point]).unwrap();
        assert!((r.max_ratio - 4.0 / std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(r.bound, 32.0);
        assert!(r.ok);
    }

    #[test]
    fn quadratic_stability_on_seeded_family() {
        let nu = c4_slice().to_cube().unwrap();
        let fam = SparseFamily::new(4, 0.5).unwrap();
        let alpha = measure_restricted_alpha(&nu, &fam, 1 << 20, None)
            .unwrap()
            .alpha;
        let r = quadratic_stability_check(&nu, &fam, alpha, &mu_family(&nu, 200, 4)).unwrap();
        assert!(r.ok, "{r:?}");
    }

    #[test]
    fn entropic_independence_examples() {
        let nu = c4_slice();
        let fam = SparseFamily::new(4, 1.0).unwrap();
        let point = SliceFamilyMember {
            label: "{0,2}".into(),
            measure: SliceMeasure::new(4, 2, vec![(vec![0, 2], 1.0)]).unwrap(),
        };
        let same = SliceFamilyMember {
            label: "self".into(),
            measure: nu.clone(),
        };
        let r = entropic_independence_check(&nu, &fam, 4.0, &[same, point]).unwrap();
        assert_eq!(r.skipped, 1);
        assert_eq!(r.b, 0.5);
        assert_eq!(r.c_used, 16.0);
        assert!((r.max_ratio - 2.0).abs() < 1e-12);
        assert!(r.ok && r.chain_ok);
    }

    #[test]
    fn entropic_independence_full_slice_tilts() {
        // all 2-subsets of [5]
        let sets: Vec<Vec<usize>> = (0..5)
            .flat_map(|i| (i + 1..5).map(move |j| vec![i, j]))
            .collect();
        let nu = SliceMeasure::uniform_over(5, 2, &sets).unwrap();
        let fam = SparseFamily::new(5, 0.4).unwrap();
        let alpha = measure_restricted_alpha(&nu.to_cube().unwrap(), &fam, 1 << 20, None)
            .unwrap()
            .alpha;
        let family = slice_mu_family(&nu, 100, 8).unwrap();
        let r = entropic_independence_check(&nu, &fam, alpha, &family).unwrap();
        assert!(r.ok, "{r:?}");
    }
}
