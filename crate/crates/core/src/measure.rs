//! Dense probability measures on the cube `{±1}^n` and on k-slices of `[n]`.
//!
//! States of the cube are indexed by bitmasks: bit `i` set means `x_i = +1`.
//! Slice atoms are sorted index lists and push forward to the cube through
//! `S ↦ 2·1_S − 1`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{compensated_sum, xlogx};

/// Largest supported coordinate count.
pub const MAX_COORDS: usize = 24;

/// Measures whose mass is off by more than this are rejected rather than
/// renormalized.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// Spin value of coordinate `i` in state `x`.
#[inline]
pub fn spin(x: usize, i: usize) -> f64 {
    if x >> i & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// `⟨v, x⟩` for a cube state.
#[inline]
pub fn dot_state(v: &[f64], x: usize) -> f64 {
    v.iter()
        .enumerate()
        .map(|(i, &vi)| if x >> i & 1 == 1 { vi } else { -vi })
        .sum()
}

fn check_dimension(n: usize) -> Result<()> {
    if n == 0 || n > MAX_COORDS {
        return Err(Error::DimensionOutOfRange { n, max: MAX_COORDS });
    }
    Ok(())
}

/// External field `v ∈ ℝ^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TiltVector(Vec<f64>);

impl TiltVector {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if let Some(index) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self(v))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    pub fn norm2(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn norm1(&self) -> f64 {
        self.0.iter().map(|x| x.abs()).sum()
    }

    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&x| x != 0.0).count()
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self(self.0.iter().map(|x| x * t).collect())
    }

    /// Entrywise sign pattern `sign(v)`.
    pub fn sign(&self) -> PinVector {
        PinVector(
            self.0
                .iter()
                .map(|&x| {
                    if x > 0.0 {
                        1
                    } else if x < 0.0 {
                        -1
                    } else {
                        0
                    }
                })
                .collect(),
        )
    }
}

impl TryFrom<Vec<f64>> for TiltVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TiltVector> for Vec<f64> {
    fn from(v: TiltVector) -> Self {
        v.0
    }
}

/// Pinning vector `u ∈ {−1, 0, +1}^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct PinVector(Vec<i8>);

impl PinVector {
    pub fn new(u: Vec<i8>) -> Result<Self> {
        if let Some(index) = u.iter().position(|x| !(-1..=1).contains(x)) {
            return Err(Error::InvalidPinEntry {
                index,
                value: u[index],
            });
        }
        Ok(Self(u))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    /// Copy with coordinate `i` set to `s`.
    pub fn with(&self, i: usize, s: i8) -> Self {
        let mut u = self.0.clone();
        u[i] = s;
        Self(u)
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i] != 0).collect()
    }

    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&s| s != 0).count()
    }

    /// Bitmask of pinned coordinates and bitmask of the `+1` values.
    pub(crate) fn masks(&self) -> (usize, usize) {
        let mut pinned = 0usize;
        let mut plus = 0usize;
        for (i, &s) in self.0.iter().enumerate() {
            if s != 0 {
                pinned |= 1 << i;
                if s > 0 {
                    plus |= 1 << i;
                }
            }
        }
        (pinned, plus)
    }
}

impl TryFrom<Vec<i8>> for PinVector {
    type Error = Error;
    fn try_from(u: Vec<i8>) -> Result<Self> {
        Self::new(u)
    }
}

impl From<PinVector> for Vec<i8> {
    fn from(u: PinVector) -> Self {
        u.0
    }
}

/// Probability vector over `{±1}^n`, `n ≤ 24`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeMeasure {
    n: usize,
    probs: Vec<f64>,
}

impl CubeMeasure {
    /// Builds a measure from probabilities that already sum to one up to
    /// [`RENORMALIZE_TOL`]; small drift is renormalized away.
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        check_dimension(n)?;
        let mass = validate_masses(&probs, 1 << n)?;
        if (mass - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::Normalization { mass });
        }
        Ok(Self::normalized_unchecked(n, probs, mass))
    }

    /// Builds a measure from arbitrary nonnegative weights.
    pub fn from_weights(n: usize, weights: Vec<f64>) -> Result<Self> {
        check_dimension(n)?;
        let mass = validate_masses(&weights, 1 << n)?;
        Ok(Self::normalized_unchecked(n, weights, mass))
    }

    fn normalized_unchecked(n: usize, mut probs: Vec<f64>, mass: f64) -> Self {
        if mass != 1.0 {
            for p in probs.iter_mut() {
                *p /= mass;
            }
        }
        Self { n, probs }
    }

    pub fn uniform(n: usize) -> Result<Self> {
        check_dimension(n)?;
        let size = 1usize << n;
        Ok(Self {
            n,
            probs: vec![1.0 / size as f64; size],
        })
    }

    pub fn point_mass(n: usize, state: usize) -> Result<Self> {
        check_dimension(n)?;
        if state >= 1 << n {
            return Err(Error::Precondition(format!(
                "state {state} outside cube of dimension {n}"
            )));
        }
        let mut probs = vec![0.0; 1 << n];
        probs[state] = 1.0;
        Ok(Self { n, probs })
    }

    /// Product measure with the given coordinate means.
    pub fn product(means: &[f64]) -> Result<Self> {
        let n = means.len();
        check_dimension(n)?;
        if let Some(index) = means.iter().position(|m| !m.is_finite() || m.abs() > 1.0) {
            return Err(Error::NonFinite { index });
        }
        let probs = (0..1usize << n)
            .map(|x| {
                means
                    .iter()
                    .enumerate()
                    .map(|(i, &m)| (1.0 + spin(x, i) * m) / 2.0)
                    .product()
            })
            .collect();
        Self::from_weights(n, probs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, state: usize) -> f64 {
        self.probs[state]
    }

    /// States with positive mass, in increasing index order.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.probs.len()).filter(move |&x| self.probs[x] > 0.0)
    }

    /// `m(ν) = E_ν[X]`.
    pub fn mean(&self) -> Vec<f64> {
        mean_of(self.n, &self.probs)
    }

    /// `T_v ν`: density proportional to `e^{⟨v,x⟩}` against `ν`.
    pub fn tilt(&self, v: &TiltVector) -> Result<Self> {
        self.check_len(v.len())?;
        if v.is_zero() {
            return Ok(self.clone());
        }
        let probs = tilt_probs(&self.probs, v.as_slice());
        let mass = probs.iter().sum();
        Ok(Self::normalized_unchecked(self.n, probs, mass))
    }

    /// `ν`-probability of the event `{x_i = u_i for i in support(u)}`.
    pub fn pin_mass(&self, u: &PinVector) -> Result<f64> {
        self.check_len(u.len())?;
        let (pinned, plus) = u.masks();
        Ok(self
            .probs
            .iter()
            .enumerate()
            .filter(|(x, _)| x & pinned == plus)
            .map(|(_, p)| p)
            .sum())
    }

    /// `R_u ν`: conditioning on the pinned coordinates.
    pub fn pin(&self, u: &PinVector) -> Result<Self> {
        self.check_len(u.len())?;
        let (pinned, plus) = u.masks();
        if pinned == 0 {
            return Ok(self.clone());
        }
        let probs: Vec<f64> = self
            .probs
            .iter()
            .enumerate()
            .map(|(x, &p)| if x & pinned == plus { p } else { 0.0 })
            .collect();
        let mass: f64 = probs.iter().sum();
        if mass <= 0.0 {
            return Err(Error::InfeasiblePin);
        }
        Ok(Self::normalized_unchecked(self.n, probs, mass))
    }

    pub fn divergences(&self, reference: &CubeMeasure) -> Result<Divergences> {
        self.check_len(reference.n)?;
        divergences(&self.probs, &reference.probs)
    }

    pub fn kl(&self, reference: &CubeMeasure) -> Result<f64> {
        self.check_len(reference.n)?;
        kl_divergence(&self.probs, &reference.probs)
    }

    /// Density `f / E_π f` against `self`, with entropy bookkeeping.
    pub fn f_tilt_entropy(&self, f: &[f64]) -> Result<FTiltEntropy<CubeMeasure>> {
        let raw = f_tilt_entropy(&self.probs, f)?;
        Ok(FTiltEntropy {
            ent: raw.ent,
            mean_f: raw.mean_f,
            tilted: Self {
                n: self.n,
                probs: raw.tilted,
            },
            kl_identity_gap: raw.kl_identity_gap,
        })
    }

    /// Restriction of a pushforward back to the `k`-slice. Fails if mass
    /// sits on states of the wrong weight.
    pub fn to_slice(&self, k: usize) -> Result<SliceMeasure> {
        let mut atoms = BTreeMap::new();
        for x in self.support() {
            if x.count_ones() as usize != k {
                return Err(Error::Precondition(format!(
                    "state {x:#b} carries mass but has weight {} != {k}",
                    x.count_ones()
                )));
            }
            let set: Vec<usize> = (0..self.n).filter(|&i| x >> i & 1 == 1).collect();
            atoms.insert(set, self.probs[x]);
        }
        SliceMeasure::from_map(self.n, k, atoms)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: len,
            });
        }
        Ok(())
    }
}

fn validate_masses(probs: &[f64], expected: usize) -> Result<f64> {
    if probs.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            found: probs.len(),
        });
    }
    if let Some(index) = probs.iter().position(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidMass {
            index,
            value: probs[index],
        });
    }
    let mass = compensated_sum(probs.iter().copied());
    if mass <= 0.0 {
        return Err(Error::EmptySupport);
    }
    Ok(mass)
}

pub(crate) fn mean_of(n: usize, probs: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; n];
    for (x, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (i, mi) in m.iter_mut().enumerate() {
            if x >> i & 1 == 1 {
                *mi += p;
            } else {
                *mi -= p;
            }
        }
    }
    m
}

/// Unnormalized tilt weights, max-shifted over the support.
pub(crate) fn tilt_probs(probs: &[f64], v: &[f64]) -> Vec<f64> {
    let shift = probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(x, _)| dot_state(v, x))
        .fold(f64::NEG_INFINITY, f64::max);
    probs
        .iter()
        .enumerate()
        .map(|(x, &p)| {
            if p > 0.0 {
                p * (dot_state(v, x) - shift).exp()
            } else {
                0.0
            }
        })
        .collect()
}

/// Probability map over k-subsets of `[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceMeasure {
    n: usize,
    k: usize,
    atoms: BTreeMap<Vec<usize>, f64>,
}

impl SliceMeasure {
    /// Builds a slice measure; atoms must be distinct sorted `k`-subsets.
    pub fn new(n: usize, k: usize, atoms: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (set, p) in atoms {
            if map.insert(set.clone(), p).is_some() {
                return Err(Error::Precondition(format!("duplicate slice atom {set:?}")));
            }
        }
        Self::from_map(n, k, map)
    }

    fn from_map(n: usize, k: usize, mut atoms: BTreeMap<Vec<usize>, f64>) -> Result<Self> {
        if k > n || n > MAX_COORDS {
            return Err(Error::DimensionOutOfRange { n, max: MAX_COORDS });
        }
        for (index, (set, &p)) in atoms.iter().enumerate() {
            let sorted = set.windows(2).all(|w| w[0] < w[1]);
            if set.len() != k || !sorted || set.iter().any(|&i| i >= n) {
                return Err(Error::InvalidSliceAtom {
                    atom: set.clone(),
                    n,
                    k,
                });
            }
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidMass { index, value: p });
            }
        }
        atoms.retain(|_, p| *p > 0.0);
        let mass = compensated_sum(atoms.values().copied());
        if mass <= 0.0 {
            return Err(Error::EmptySupport);
        }
        if (mass - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::Normalization { mass });
        }
        if mass != 1.0 {
            atoms.values_mut().for_each(|p| *p /= mass);
        }
        Ok(Self { n, k, atoms })
    }

    /// Uniform measure over the given sets.
    pub fn uniform_over(n: usize, k: usize, sets: &[Vec<usize>]) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::EmptySupport);
        }
        let p = 1.0 / sets.len() as f64;
        Self::new(n, k, sets.iter().map(|s| (s.clone(), p)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&Vec<usize>, f64)> {
        self.atoms.iter().map(|(s, &p)| (s, p))
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn prob(&self, set: &[usize]) -> f64 {
        self.atoms.get(set).copied().unwrap_or(0.0)
    }

    /// `P_{S∼μ}[i ∈ S]` for every `i`.
    pub fn inclusion_probs(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (set, &p) in &self.atoms {
            for &i in set {
                out[i] += p;
            }
        }
        out
    }

    /// Normalized one-site marginals `q_μ(i) = P[i ∈ S] / k`.
    pub fn slice_marginals(&self) -> Result<Vec<f64>> {
        if self.k == 0 {
            return Err(Error::EmptyK);
        }
        let k = self.k as f64;
        Ok(self.inclusion_probs().into_iter().map(|p| p / k).collect())
    }

    /// Pushforward to `{±1}^n` under `S ↦ 2·1_S − 1`.
    pub fn to_cube(&self) -> Result<CubeMeasure> {
        check_dimension(self.n)?;
        let mut probs = vec![0.0; 1 << self.n];
        for (set, &p) in &self.atoms {
            let x = set.iter().fold(0usize, |acc, &i| acc | 1 << i);
            probs[x] = p;
        }
        Ok(CubeMeasure { n: self.n, probs })
    }

    /// KL and χ² against another measure on the same slice.
    pub fn divergences(&self, reference: &SliceMeasure) -> Result<Divergences> {
        let (mu, nu) = self.aligned(reference)?;
        divergences(&mu, &nu)
    }

    pub fn kl(&self, reference: &SliceMeasure) -> Result<f64> {
        let (mu, nu) = self.aligned(reference)?;
        kl_divergence(&mu, &nu)
    }

    /// f-tilt of this measure; `f` is evaluated on each atom.
    pub fn f_tilt_entropy<F>(&self, f: F) -> Result<FTiltEntropy<SliceMeasure>>
    where
        F: Fn(&[usize]) -> f64,
    {
        let probs: Vec<f64> = self.atoms.values().copied().collect();
        let values: Vec<f64> = self.atoms.keys().map(|s| f(s)).collect();
        let raw = f_tilt_entropy(&probs, &values)?;
        let atoms = self.atoms.keys().cloned().zip(raw.tilted).collect();
        Ok(FTiltEntropy {
            ent: raw.ent,
            mean_f: raw.mean_f,
            tilted: Self {
                n: self.n,
                k: self.k,
                atoms,
            },
            kl_identity_gap: raw.kl_identity_gap,
        })
    }

    fn aligned(&self, other: &SliceMeasure) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.n != other.n || self.k != other.k {
            return Err(Error::Precondition(format!(
                "slice shapes differ: ({}, {}) vs ({}, {})",
                self.n, self.k, other.n, other.k
            )));
        }
        let keys: std::collections::BTreeSet<&Vec<usize>> =
            self.atoms.keys().chain(other.atoms.keys()).collect();
        Ok(keys
            .into_iter()
            .map(|s| (self.prob(s), other.prob(s)))
            .unzip())
    }
}

/// KL and χ² divergences of `μ` from `ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergences {
    pub kl: f64,
    pub chi2: f64,
}

fn check_absolute_continuity(mu: &[f64], nu: &[f64]) -> Result<()> {
    if mu.len() != nu.len() {
        return Err(Error::LengthMismatch {
            expected: nu.len(),
            found: mu.len(),
        });
    }
    if let Some(index) = (0..mu.len()).find(|&i| mu[i] > 0.0 && nu[i] <= 0.0) {
        return Err(Error::AbsoluteContinuityViolation { index });
    }
    Ok(())
}

/// `KL(μ‖ν)` on aligned probability vectors, with `0·log(0/q) = 0`.
pub fn kl_divergence(mu: &[f64], nu: &[f64]) -> Result<f64> {
    check_absolute_continuity(mu, nu)?;
    let kl = compensated_sum(
        mu.iter()
            .zip(nu)
            .filter(|(&p, _)| p > 0.0)
            .map(|(&p, &q)| p * (p / q).ln()),
    );
    Ok(kl.max(0.0))
}

/// KL and χ² on aligned probability vectors.
pub fn divergences(mu: &[f64], nu: &[f64]) -> Result<Divergences> {
    let kl = kl_divergence(mu, nu)?;
    let chi2 = compensated_sum(
        mu.iter()
            .zip(nu)
            .filter(|(_, &q)| q > 0.0)
            .map(|(&p, &q)| (p - q) * (p - q) / q),
    );
    Ok(Divergences { kl, chi2 })
}

/// `Ent_π[f] = E_π[f log(f / E_π f)]`.
pub fn entropy(pi: &[f64], f: &[f64]) -> Result<f64> {
    let mean = checked_mean(pi, f)?;
    Ok(entropy_with_mean(pi, f, mean))
}

fn entropy_with_mean(pi: &[f64], f: &[f64], mean: f64) -> f64 {
    compensated_sum(
        pi.iter()
            .zip(f)
            .filter(|(&p, _)| p > 0.0)
            .map(|(&p, &fx)| p * mean * xlogx(fx / mean)),
    )
    .max(0.0)
}

fn checked_mean(pi: &[f64], f: &[f64]) -> Result<f64> {
    if pi.len() != f.len() {
        return Err(Error::LengthMismatch {
            expected: pi.len(),
            found: f.len(),
        });
    }
    if let Some(i) = (0..f.len()).find(|&i| pi[i] > 0.0 && !(f[i] >= 0.0 && f[i].is_finite())) {
        return Err(Error::InvalidFunction(format!(
            "f({i}) = {} is negative or not finite",
            f[i]
        )));
    }
    let mean = compensated_sum(pi.iter().zip(f).map(|(&p, &fx)| p * fx));
    if mean <= 0.0 {
        return Err(Error::InvalidFunction("E_π[f] = 0".into()));
    }
    Ok(mean)
}

/// Result of tilting a measure by a nonnegative function.
#[derive(Debug, Clone, PartialEq)]
pub struct FTiltEntropy<M> {
    pub ent: f64,
    pub mean_f: f64,
    pub tilted: M,
    /// `|KL(tilted‖π) − Ent_π[f] / E_π f|`.
    pub kl_identity_gap: f64,
}

/// f-tilt on a raw probability vector.
pub fn f_tilt_entropy(pi: &[f64], f: &[f64]) -> Result<FTiltEntropy<Vec<f64>>> {
    let mean_f = checked_mean(pi, f)?;
    let ent = entropy_with_mean(pi, f, mean_f);
    let tilted: Vec<f64> = pi
        .iter()
        .zip(f)
        .map(|(&p, &fx)| if p > 0.0 { p * fx / mean_f } else { 0.0 })
        .collect();
    let kl = kl_divergence(&tilted, pi)?;
    Ok(FTiltEntropy {
        ent,
        mean_f,
        tilted,
        kl_identity_gap: (kl - ent / mean_f).abs(),
    })
}

/// Donsker–Varadhan gap `KL(μ‖ν) − (E_μ φ − log E_ν e^φ)`.
///
/// Nonnegative for every `φ`; zero when `φ` is the log-density plus a
/// constant.
pub fn dv_gap(mu: &CubeMeasure, nu: &CubeMeasure, phi: &[f64]) -> Result<f64> {
    let kl = mu.kl(nu)?;
    if phi.len() != nu.num_states() {
        return Err(Error::LengthMismatch {
            expected: nu.num_states(),
            found: phi.len(),
        });
    }
    // φ only matters on supp(ν); states outside are ignored.
    let on_support = |x: &usize| nu.probs[*x] > 0.0;
    let shift = (0..phi.len())
        .filter(on_support)
        .map(|x| phi[x])
        .fold(f64::NEG_INFINITY, f64::max);
    let log_mgf = shift
        + compensated_sum(
            (0..phi.len())
                .filter(on_support)
                .map(|x| nu.probs[x] * (phi[x] - shift).exp()),
        )
        .ln();
    let mu_phi = compensated_sum(
        (0..phi.len())
            .filter(|&x| mu.probs[x] > 0.0)
            .map(|x| mu.probs[x] * phi[x]),
    );
    Ok(kl - (mu_phi - log_mgf))
}

/// Log-Laplace transform `f(v) = log E_ν e^{⟨v,X⟩}`, its centered version
/// `h(v) = f(v) − ⟨m(ν), v⟩` and gradient `∇f(v) = m(T_v ν)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLaplace {
    pub f: f64,
    pub h: f64,
    pub grad_f: Vec<f64>,
}

pub fn log_laplace(nu: &CubeMeasure, v: &TiltVector) -> Result<LogLaplace> {
    nu.check_len(v.len())?;
    let m = nu.mean();
    if v.is_zero() {
        return Ok(LogLaplace {
            f: 0.0,
            h: 0.0,
            grad_f: m,
        });
    }
    let (f, grad_f) = log_laplace_raw(nu.n, &nu.probs, v.as_slice());
    let h = f - m.iter().zip(v.as_slice()).map(|(a, b)| a * b).sum::<f64>();
    Ok(LogLaplace { f, h, grad_f })
}

/// `(f(v), m(T_v ν))` on raw probabilities.
pub(crate) fn log_laplace_raw(n: usize, probs: &[f64], v: &[f64]) -> (f64, Vec<f64>) {
    let shift = probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(x, _)| dot_state(v, x))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut grad = vec![0.0; n];
    for (x, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let w = p * (dot_state(v, x) - shift).exp();
        z += w;
        for (i, g) in grad.iter_mut().enumerate() {
            if x >> i & 1 == 1 {
                *g += w;
            } else {
                *g -= w;
            }
        }
    }
    grad.iter_mut().for_each(|g| *g /= z);
    (shift + z.ln(), grad)
}

/// Mean of a pushforward slice measure, computed from inclusion
/// probabilities: `m_i = 2·P[i ∈ S] − 1`.
pub fn pushforward_mean(mu: &SliceMeasure) -> Vec<f64> {
    mu.inclusion_probs()
        .into_iter()
        .map(|p| 2.0 * p - 1.0)
        .collect()
}

// ---------------------------------------------------------------------------
// Measure spec files

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    kind: String,
    n: usize,
    #[serde(default)]
    k: Option<usize>,
    atoms: Vec<RawAtom>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAtom {
    state: serde_json::Value,
    p: f64,
}

/// A measure loaded from a JSON spec file.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadedMeasure {
    Cube(CubeMeasure),
    Slice(SliceMeasure),
}

impl LoadedMeasure {
    /// The measure viewed on the cube (slices are pushed forward).
    pub fn to_cube(&self) -> Result<CubeMeasure> {
        match self {
            LoadedMeasure::Cube(c) => Ok(c.clone()),
            LoadedMeasure::Slice(s) => s.to_cube(),
        }
    }
}

/// Parses `{"kind":"cube"|"slice","n":..,"k":..,"atoms":[{"state":..,"p":..}]}`.
///
/// Cube states are bitstrings whose character `j` is coordinate `j`
/// (`'1'` is `+1`); slice states are sorted index lists.
pub fn parse_measure_spec(text: &str) -> Result<LoadedMeasure> {
    let raw: RawSpec = serde_json::from_str(text)
        .map_err(|e| Error::SpecParse(format!("line {} column {}: {e}", e.line(), e.column())))?;
    match raw.kind.as_str() {
        "cube" => {
            check_dimension(raw.n)?;
            let mut probs = vec![0.0; 1 << raw.n];
            for (idx, atom) in raw.atoms.iter().enumerate() {
                let bits = atom.state.as_str().ok_or_else(|| {
                    Error::SpecParse(format!("atom {idx}: cube state must be a bitstring"))
                })?;
                if bits.len() != raw.n {
                    return Err(Error::SpecParse(format!(
                        "atom {idx}: bitstring length {} != n = {}",
                        bits.len(),
                        raw.n
                    )));
                }
                let mut x = 0usize;
                for (j, ch) in bits.chars().enumerate() {
                    match ch {
                        '1' => x |= 1 << j,
                        '0' => {}
                        other => {
                            return Err(Error::SpecParse(format!(
                                "atom {idx}: invalid bit {other:?}"
                            )))
                        }
                    }
                }
                if probs[x] != 0.0 {
                    return Err(Error::SpecParse(format!(
                        "atom {idx}: duplicate state {bits}"
                    )));
                }
                probs[x] = atom.p;
            }
            Ok(LoadedMeasure::Cube(CubeMeasure::new(raw.n, probs)?))
        }
        "slice" => {
            let k = raw
                .k
                .ok_or_else(|| Error::SpecParse("slice spec requires \"k\"".into()))?;
            let atoms = raw
                .atoms
                .iter()
                .enumerate()
                .map(|(idx, atom)| {
                    let set: Vec<usize> =
                        serde_json::from_value(atom.state.clone()).map_err(|e| {
                            Error::SpecParse(format!(
                                "atom {idx}: slice state must be an index list: {e}"
                            ))
                        })?;
                    Ok((set, atom.p))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(LoadedMeasure::Slice(SliceMeasure::new(raw.n, k, atoms)?))
        }
        other => Err(Error::SpecParse(format!("unknown kind {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c4_slice() -> SliceMeasure {
        SliceMeasure::uniform_over(4, 2, &[vec![0, 2], vec![1, 3]]).unwrap()
    }

    #[test]
    fn slice_pushforward_examples() {
        let mu = SliceMeasure::uniform_over(2, 1, &[vec![0], vec![1]]).unwrap();
        let cube = mu.to_cube().unwrap();
        // (+1,−1) is bit 0 set, (−1,+1) is bit 1 set
        assert_eq!(cube.probs(), &[0.0, 0.5, 0.5, 0.0]);

        let point = SliceMeasure::new(2, 2, vec![(vec![0, 1], 1.0)]).unwrap();
        assert_eq!(point.to_cube().unwrap().probs(), &[0.0, 0.0, 0.0, 1.0]);

        assert_eq!(c4_slice().to_cube().unwrap().mean(), vec![0.0; 4]);
        assert_eq!(mu.to_cube().unwrap().mean(), vec![0.0, 0.0]);
    }

    #[test]
    fn tilt_examples() {
        let u = CubeMeasure::uniform(1).unwrap();
        assert_eq!(u.tilt(&TiltVector::zeros(1)).unwrap(), u);
        let t = u.tilt(&TiltVector::new(vec![1.0]).unwrap()).unwrap();
        let e = std::f64::consts::E;
        assert!((t.mean()[0] - (e - 1.0 / e) / (e + 1.0 / e)).abs() < 1e-15);
        assert!((t.mean()[0] - 0.761594).abs() < 1e-6);
    }

    #[test]
    fn tilt_handles_huge_fields() {
        let u = CubeMeasure::uniform(2).unwrap();
        let t = u.tilt(&TiltVector::new(vec![1e3, -50.0]).unwrap()).unwrap();
        let m = t.mean();
        assert!((m[0] - 1.0).abs() < 1e-12);
        assert!((m[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pin_examples() {
        let u = CubeMeasure::uniform(2).unwrap();
        let p = u.pin(&PinVector::new(vec![1, 0]).unwrap()).unwrap();
        assert_eq!(p.mean(), vec![1.0, 0.0]);
        assert_eq!(p.probs(), &[0.0, 0.5, 0.0, 0.5]);

        let c4 = c4_slice().to_cube().unwrap();
        let p = c4.pin(&PinVector::new(vec![1, 0, 0, 0]).unwrap()).unwrap();
        assert_eq!(p.mean(), vec![1.0, -1.0, 1.0, -1.0]);
        assert_eq!(c4.pin(&PinVector::zeros(4)).unwrap(), c4);

        let adjacent = PinVector::new(vec![1, 1, 0, 0]).unwrap();
        assert_eq!(c4.pin(&adjacent), Err(Error::InfeasiblePin));
    }

    #[test]
    fn mean_examples() {
        assert_eq!(CubeMeasure::uniform(3).unwrap().mean(), vec![0.0; 3]);
        assert_eq!(CubeMeasure::point_mass(3, 7).unwrap().mean(), vec![1.0; 3]);
    }

    #[test]
    fn slice_marginal_examples() {
        let all: Vec<Vec<usize>> = vec![vec![0, 1], vec![0, 2], vec![1, 2]];
        let q = SliceMeasure::uniform_over(3, 2, &all)
            .unwrap()
            .slice_marginals()
            .unwrap();
        for qi in q {
            assert!((qi - 1.0 / 3.0).abs() < 1e-15);
        }
        let point = SliceMeasure::new(3, 1, vec![(vec![0], 1.0)]).unwrap();
        assert_eq!(point.slice_marginals().unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(c4_slice().slice_marginals().unwrap(), vec![0.25; 4]);

        let empty = SliceMeasure::new(3, 0, vec![(vec![], 1.0)]).unwrap();
        assert_eq!(empty.slice_marginals(), Err(Error::EmptyK));
    }

    #[test]
    fn divergence_examples() {
        let u = CubeMeasure::uniform(2).unwrap();
        assert_eq!(
            u.divergences(&u).unwrap(),
            Divergences { kl: 0.0, chi2: 0.0 }
        );

        let point = SliceMeasure::new(2, 1, vec![(vec![0], 1.0)]).unwrap();
        let unif = SliceMeasure::uniform_over(2, 1, &[vec![0], vec![1]]).unwrap();
        let d = point.divergences(&unif).unwrap();
        assert!((d.kl - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((d.chi2 - 1.0).abs() < 1e-15);

        assert_eq!(
            unif.divergences(&point),
            Err(Error::AbsoluteContinuityViolation { index: 1 })
        );
    }

    #[test]
    fn f_tilt_examples() {
        let u = CubeMeasure::uniform(1).unwrap();
        let r = u.f_tilt_entropy(&[1.0, 1.0]).unwrap();
        assert_eq!(r.ent, 0.0);
        assert_eq!(r.tilted, u);

        let r = u.f_tilt_entropy(&[0.0, 1.0]).unwrap();
        assert_eq!(r.tilted.probs(), &[0.0, 1.0]);
        assert!((r.ent - 0.5 * std::f64::consts::LN_2).abs() < 1e-15);
        assert!(r.kl_identity_gap <= 1e-10);

        assert!(matches!(
            u.f_tilt_entropy(&[0.0, 0.0]),
            Err(Error::InvalidFunction(_))
        ));
        assert!(matches!(
            u.f_tilt_entropy(&[-1.0, 2.0]),
            Err(Error::InvalidFunction(_))
        ));
    }

    #[test]
    fn dv_gap_examples() {
        let nu = CubeMeasure::from_weights(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mu = CubeMeasure::from_weights(2, vec![4.0, 1.0, 0.0, 5.0]).unwrap();
        let kl = mu.kl(&nu).unwrap();
        assert!((dv_gap(&mu, &nu, &[0.0; 4]).unwrap() - kl).abs() < 1e-15);

        // log-density is −∞ off supp(μ); any very negative value works in the limit,
        // so check on a full-support μ instead.
        let mu = CubeMeasure::from_weights(2, vec![4.0, 1.0, 2.0, 5.0]).unwrap();
        let log_density: Vec<f64> = (0..4).map(|x| (mu.prob(x) / nu.prob(x)).ln()).collect();
        assert!(dv_gap(&mu, &nu, &log_density).unwrap().abs() < 1e-10);
        let shifted: Vec<f64> = log_density.iter().map(|x| x + 7.0).collect();
        assert!(dv_gap(&mu, &nu, &shifted).unwrap().abs() < 1e-10);
    }

    #[test]
    fn log_laplace_examples() {
        let u = CubeMeasure::uniform(1).unwrap();
        let r = log_laplace(&u, &TiltVector::zeros(1)).unwrap();
        assert_eq!((r.f, r.h, r.grad_f), (0.0, 0.0, vec![0.0]));
        for t in [-3.0, -0.2, 0.7, 2.5] {
            let r = log_laplace(&u, &TiltVector::new(vec![t]).unwrap()).unwrap();
            assert!((r.f - f64::cosh(t).ln()).abs() < 1e-14);
            assert!((r.grad_f[0] - t.tanh()).abs() < 1e-14);
        }
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(
            CubeMeasure::uniform(25),
            Err(Error::DimensionOutOfRange { .. })
        ));
        assert!(matches!(
            CubeMeasure::new(1, vec![0.5, 0.6]),
            Err(Error::Normalization { .. })
        ));
        assert!(matches!(
            CubeMeasure::new(1, vec![0.0, 0.0]),
            Err(Error::EmptySupport)
        ));
        let drift = CubeMeasure::new(1, vec![0.5, 0.5 + 1e-10]).unwrap();
        assert!((drift.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(SliceMeasure::new(3, 2, vec![(vec![2, 1], 1.0)]).is_err());
        assert!(PinVector::new(vec![2]).is_err());
        assert!(TiltVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn spec_file_round_trip() {
        let cube = parse_measure_spec(
            r#"{"kind":"cube","n":2,"atoms":[{"state":"10","p":0.5},{"state":"01","p":0.5}]}"#,
        )
        .unwrap();
        let expected = SliceMeasure::uniform_over(2, 1, &[vec![0], vec![1]])
            .unwrap()
            .to_cube()
            .unwrap();
        assert_eq!(cube, LoadedMeasure::Cube(expected));

        let slice = parse_measure_spec(
            r#"{"kind":"slice","n":4,"k":2,"atoms":[{"state":[0,2],"p":0.5},{"state":[1,3],"p":0.5}]}"#,
        )
        .unwrap();
        assert_eq!(slice, LoadedMeasure::Slice(c4_slice()));

        let err = parse_measure_spec("{\"kind\":\"cube\",\n\"n\":}").unwrap_err();
        match err {
            Error::SpecParse(msg) => assert!(msg.contains("line 2"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
