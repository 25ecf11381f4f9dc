//! Covariance, correlation and influence matrices restricted to active
//! coordinates, and the norm comparisons between them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::measure::CubeMeasure;

/// Coordinates with variance at or below this are treated as deterministic.
pub const ACTIVE_VARIANCE_EPS: f64 = 1e-12;

/// Influence data of a cube measure on its active coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceSummary {
    pub active: Vec<usize>,
    pub var: Vec<f64>,
    pub cov: Matrix,
    pub cor: Matrix,
    /// `Ψ = Cov · diag(Var)^{-1}`.
    pub psi: Matrix,
    /// `Ψ` from conditional probabilities `P[i∈S | j∈S] − P[i∈S | j∉S]`.
    pub psi_conditional: Matrix,
}

impl InfluenceSummary {
    /// Largest entrywise gap between the two computations of `Ψ`.
    pub fn psi_route_gap(&self) -> f64 {
        self.psi.max_abs_diff(&self.psi_conditional)
    }

    /// Largest entrywise gap in `Ψ = D^{1/2} Cor D^{-1/2}`.
    pub fn similarity_gap(&self) -> f64 {
        let d = self.active.len();
        let rebuilt = Matrix::from_fn(d, |i, j| {
            self.var[i].sqrt() * self.cor[(i, j)] / self.var[j].sqrt()
        });
        self.psi.max_abs_diff(&rebuilt)
    }
}

/// Full influence summary of `ν`.
pub fn influence_summary(nu: &CubeMeasure) -> InfluenceSummary {
    let n = nu.n();
    let probs = nu.probs();
    let mean = nu.mean();

    // second moments E[X_i X_j] and joint inclusion P[x_i = x_j = +1]
    let mut second = vec![0.0; n * n];
    let mut joint_plus = vec![0.0; n * n];
    for (x, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for i in 0..n {
            let xi = x >> i & 1;
            for j in i..n {
                let xj = x >> j & 1;
                if xi == xj {
                    second[i * n + j] += p;
                } else {
                    second[i * n + j] -= p;
                }
                if xi == 1 && xj == 1 {
                    joint_plus[i * n + j] += p;
                }
            }
        }
    }
    let sym = |buf: &[f64], i: usize, j: usize| {
        if i <= j {
            buf[i * n + j]
        } else {
            buf[j * n + i]
        }
    };

    let full_var: Vec<f64> = (0..n).map(|i| 1.0 - mean[i] * mean[i]).collect();
    let active: Vec<usize> = (0..n)
        .filter(|&i| full_var[i] > ACTIVE_VARIANCE_EPS)
        .collect();
    let d = active.len();
    let var: Vec<f64> = active.iter().map(|&i| full_var[i]).collect();

    let cov = Matrix::from_fn(d, |a, b| {
        let (i, j) = (active[a], active[b]);
        if a == b {
            var[a]
        } else {
            sym(&second, i, j) - mean[i] * mean[j]
        }
    });
    let cor = Matrix::from_fn(d, |a, b| {
        if a == b {
            1.0
        } else {
            cov[(a, b)] / (var[a] * var[b]).sqrt()
        }
    });
    let psi = Matrix::from_fn(d, |a, b| if a == b { 1.0 } else { cov[(a, b)] / var[b] });
    let plus: Vec<f64> = (0..n).map(|i| sym(&joint_plus, i, i)).collect();
    let psi_conditional = Matrix::from_fn(d, |a, b| {
        let (i, j) = (active[a], active[b]);
        if a == b {
            return 1.0;
        }
        let pij = sym(&joint_plus, i, j);
        let given_in = pij / plus[j];
        let given_out = (plus[i] - pij) / (1.0 - plus[j]);
        given_in - given_out
    });

    InfluenceSummary {
        active,
        var,
        cov,
        cor,
        psi,
        psi_conditional,
    }
}

/// `Ψ(ν)` on active coordinates, without the rest of the summary.
pub fn psi_matrix(nu: &CubeMeasure) -> Matrix {
    let n = nu.n();
    let mean = nu.mean();
    let active: Vec<usize> = (0..n)
        .filter(|&i| 1.0 - mean[i] * mean[i] > ACTIVE_VARIANCE_EPS)
        .collect();
    let d = active.len();
    let mut second = vec![0.0; d * d];
    for (x, &p) in nu.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for a in 0..d {
            let xa = x >> active[a] & 1;
            for b in a + 1..d {
                if xa == x >> active[b] & 1 {
                    second[a * d + b] += p;
                } else {
                    second[a * d + b] -= p;
                }
            }
        }
    }
    Matrix::from_fn(d, |a, b| {
        if a == b {
            return 1.0;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (i, j) = (active[a], active[b]);
        let cov = second[lo * d + hi] - mean[i] * mean[j];
        cov / (1.0 - mean[j] * mean[j])
    })
}

/// `‖Ψ(ν)‖_op`.
pub fn psi_op_norm(nu: &CubeMeasure) -> f64 {
    psi_matrix(nu).spectral_norm()
}

/// Operator norms of a square matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixNorms {
    pub op: f64,
    #[serde(rename = "l1")]
    pub one_to_one: f64,
    #[serde(rename = "linf")]
    pub inf_to_inf: f64,
}

impl MatrixNorms {
    /// `‖A‖_op ≤ sqrt(‖A‖_{1→1} ‖A‖_{∞→∞})` within `1e-9`.
    pub fn interpolation_bound_holds(&self) -> bool {
        self.op <= (self.one_to_one * self.inf_to_inf).sqrt() + 1e-9
    }
}

pub fn matrix_norms(m: &Matrix) -> Result<MatrixNorms> {
    if !m.is_finite() {
        return Err(Error::Precondition("matrix has non-finite entries".into()));
    }
    Ok(MatrixNorms {
        op: m.spectral_norm(),
        one_to_one: m.norm_one_to_one(),
        inf_to_inf: m.norm_inf_to_inf(),
    })
}

/// Outcome of comparing `‖Ψ‖_op` and `‖Cor‖_op` under a variance floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparabilityReport {
    pub ok: bool,
    pub active: Vec<usize>,
    pub psi_op: f64,
    pub cor_op: f64,
    pub sigma: f64,
}

/// Checks `‖Ψ‖ ≤ σ^{-1}‖Cor‖` and `‖Cor‖ ≤ σ^{-1}‖Ψ‖` given
/// `Var(X_i) ≥ σ²` on every active coordinate.
pub fn comparability_check(nu: &CubeMeasure, sigma_sq: f64) -> Result<ComparabilityReport> {
    if !(sigma_sq > 0.0 && sigma_sq <= 1.0) {
        return Err(Error::Precondition(format!(
            "variance floor {sigma_sq} outside (0, 1]"
        )));
    }
    let summary = influence_summary(nu);
    for (&coordinate, &variance) in summary.active.iter().zip(&summary.var) {
        if variance < sigma_sq {
            return Err(Error::VarianceFloorViolated {
                coordinate,
                variance,
                floor: sigma_sq,
            });
        }
    }
    let sigma = sigma_sq.sqrt();
    let psi_op = summary.psi.spectral_norm();
    let cor_op = summary.cor.spectral_norm();
    let ok = psi_op <= cor_op / sigma + 1e-9 && cor_op <= psi_op / sigma + 1e-9;
    Ok(ComparabilityReport {
        ok,
        active: summary.active,
        psi_op,
        cor_op,
        sigma,
    })
}

/// JSON matrix report `{"active", "psi", "norms": {"op", "l1", "linf"}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub active: Vec<usize>,
    pub psi: Matrix,
    pub norms: MatrixNorms,
}

impl MatrixReport {
    pub fn from_summary(summary: &InfluenceSummary) -> Result<Self> {
        Ok(Self {
            active: summary.active.clone(),
            psi: summary.psi.clone(),
            norms: matrix_norms(&summary.psi)?,
        })
    }
}
