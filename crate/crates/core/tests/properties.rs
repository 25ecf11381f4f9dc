use std::collections::BTreeSet;

use entropic_core::indep::{
    alpha_c, entropy_conservation_experiment, enumerate_ik, one_step_decomposition_check,
    ConservationConfig, DownUpKernel, FunctionSpec, Graph,
};
use entropic_core::influence::{influence_summary, matrix_norms, psi_matrix};
use entropic_core::linalg::Matrix;
use entropic_core::localization::jump_rates;
use entropic_core::measure::{divergences, dv_gap, kl_divergence, pushforward_mean};
use entropic_core::sparse::{
    dv_sparse_bound, enumerate_sparse_pins, kyfan_norm_sq, SearchConfig, SparseFamily,
};
use entropic_core::{CubeMeasure, Error, PinVector, SliceMeasure, TiltVector};
use itertools::Itertools;
use num_rational::BigRational;
use num_traits::Zero;
use proptest::prelude::*;

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Weights on `2^n` states with roughly a fifth of them zeroed.
fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 1 << n)
        .prop_map(|w| {
            w.into_iter()
                .map(|x| if x < 0.2 { 0.0 } else { x })
                .collect::<Vec<_>>()
        })
        .prop_filter("some mass", |w| w.iter().any(|&x| x > 0.0))
}

fn cube_measure(max_n: usize) -> impl Strategy<Value = CubeMeasure> {
    (1..=max_n)
        .prop_flat_map(|n| weights(n).prop_map(move |w| CubeMeasure::from_weights(n, w).unwrap()))
}

fn vector(n: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, n)
}

/// `(μ, ν)` with `μ ≪ ν`.
fn ac_pair(max_n: usize) -> impl Strategy<Value = (CubeMeasure, CubeMeasure)> {
    (1..=max_n).prop_flat_map(|n| {
        (weights(n), prop::collection::vec(0.0f64..1.0, 1 << n)).prop_filter_map(
            "μ needs mass on supp ν",
            move |(nu_w, mu_raw)| {
                let mu_w: Vec<f64> = mu_raw
                    .iter()
                    .zip(&nu_w)
                    .map(|(&m, &q)| if q > 0.0 { m } else { 0.0 })
                    .collect();
                if mu_w.iter().all(|&x| x == 0.0) {
                    return None;
                }
                Some((
                    CubeMeasure::from_weights(n, mu_w).unwrap(),
                    CubeMeasure::from_weights(n, nu_w).unwrap(),
                ))
            },
        )
    })
}

fn slice_measure(n: usize, k: usize) -> impl Strategy<Value = SliceMeasure> {
    let sets: Vec<Vec<usize>> = (0..n).combinations(k).collect();
    let count = sets.len();
    prop::collection::vec(0.0f64..1.0, count)
        .prop_filter("some mass", |w| w.iter().any(|&x| x > 0.0))
        .prop_map(move |w| {
            let total: f64 = w.iter().sum();
            let atoms = sets
                .iter()
                .cloned()
                .zip(w.iter().map(|x| x / total))
                .collect();
            SliceMeasure::new(n, k, atoms).unwrap()
        })
}

fn graph(max_n: usize, max_degree: usize) -> impl Strategy<Value = Graph> {
    (1..=max_n, any::<u64>(), 0.2f64..0.9)
        .prop_map(move |(n, seed, p)| Graph::random_bounded_degree(n, max_degree, p, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn measures_stay_normalized(nu in cube_measure(6), v in vector(6, 3.0), signs in prop::collection::vec(-1i8..=1, 6)) {
        let n = nu.n();
        let v = TiltVector::new(v[..n].to_vec()).unwrap();
        let tilted = nu.tilt(&v).unwrap();
        prop_assert!((tilted.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let u = PinVector::new(signs[..n].to_vec()).unwrap();
        if let Ok(pinned) = nu.pin(&u) {
            prop_assert!((pinned.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(nu.pin_mass(&u).unwrap() > 0.0);
        } else {
            prop_assert_eq!(nu.pin_mass(&u).unwrap(), 0.0);
        }
    }

    #[test]
    fn tilts_compose(nu in cube_measure(6), v in vector(6, 2.0), w in vector(6, 2.0)) {
        let n = nu.n();
        let v = TiltVector::new(v[..n].to_vec()).unwrap();
        let w = TiltVector::new(w[..n].to_vec()).unwrap();
        let sum = TiltVector::new(v.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a + b).collect()).unwrap();
        let twice = nu.tilt(&v).unwrap().tilt(&w).unwrap();
        let once = nu.tilt(&sum).unwrap();
        prop_assert!(max_diff(twice.probs(), once.probs()) < 1e-12);
    }

    #[test]
    fn pins_commute_with_disjoint_tilts(nu in cube_measure(6), v in vector(6, 2.0), split in 0usize..6, signs in prop::collection::vec(prop_oneof![Just(-1i8), Just(1i8)], 6)) {
        let n = nu.n();
        let split = split.min(n);
        // v lives on 0..split, the pin on split..n
        let v: Vec<f64> = (0..n).map(|i| if i < split { v[i] } else { 0.0 }).collect();
        let u: Vec<i8> = (0..n).map(|i| if i < split { 0 } else { signs[i] }).collect();
        let v = TiltVector::new(v).unwrap();
        let u = PinVector::new(u).unwrap();
        if let Ok(pinned) = nu.pin(&u) {
            let a = pinned.tilt(&v).unwrap();
            let b = nu.tilt(&v).unwrap().pin(&u).unwrap();
            prop_assert!(max_diff(a.probs(), b.probs()) < 1e-12);
        }
    }

    #[test]
    fn mean_matches_slice_marginals(mu in slice_measure(6, 3), nu in slice_measure(6, 3)) {
        let dm: f64 = mu.to_cube().unwrap().mean().iter()
            .zip(nu.to_cube().unwrap().mean())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let dp: f64 = mu.inclusion_probs().iter()
            .zip(nu.inclusion_probs())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        prop_assert!((dm - 4.0 * dp).abs() < 1e-10);
        prop_assert!(max_diff(&pushforward_mean(&mu), &mu.to_cube().unwrap().mean()) < 1e-12);
    }

    #[test]
    fn donsker_varadhan_gap(n in 1usize..=5, seed_phi in prop::collection::vec(-4.0f64..4.0, 32)) {
        let mu = CubeMeasure::from_weights(n, (0..1 << n).map(|x| 1.0 + x as f64).collect()).unwrap();
        let nu = CubeMeasure::uniform(n).unwrap();
        let phi: Vec<f64> = seed_phi[..1 << n].to_vec();
        prop_assert!(dv_gap(&mu, &nu, &phi).unwrap() >= -1e-10);
        let log_density: Vec<f64> = mu.probs().iter().zip(nu.probs())
            .map(|(p, q)| (p / q).ln() + seed_phi[0])
            .collect();
        prop_assert!(dv_gap(&mu, &nu, &log_density).unwrap().abs() < 1e-10);
    }

    #[test]
    fn psi_identities(nu in cube_measure(6)) {
        let s = influence_summary(&nu);
        for a in 0..s.active.len() {
            prop_assert!((s.psi[(a, a)] - 1.0).abs() < 1e-12);
        }
        prop_assert!(s.similarity_gap() < 1e-10);
        prop_assert!(s.psi_route_gap() < 1e-10);
        prop_assert!(matrix_norms(&s.psi).unwrap().interpolation_bound_holds());
        prop_assert!(psi_matrix(&nu).max_abs_diff(&s.psi) < 1e-12);
    }

    #[test]
    fn sparse_pins_are_distinct_and_feasible(nu in cube_measure(5), c in 0.05f64..1.0) {
        let n = nu.n();
        let fam = SparseFamily::new(n, c).unwrap();
        let pins: Vec<PinVector> = enumerate_sparse_pins(&nu, &fam, u128::MAX).unwrap().collect();
        let distinct: BTreeSet<Vec<i8>> = pins.iter().map(|p| p.as_slice().to_vec()).collect();
        prop_assert_eq!(distinct.len(), pins.len());
        // brute force over {−1, 0, 1}^n
        let expected = (0..n)
            .map(|_| [-1i8, 0, 1])
            .multi_cartesian_product()
            .filter(|u| u.iter().filter(|&&s| s != 0).count() <= fam.m())
            .filter(|u| nu.pin_mass(&PinVector::new(u.clone()).unwrap()).unwrap() > 0.0)
            .count();
        prop_assert_eq!(pins.len(), expected);
        for p in &pins {
            prop_assert!(nu.pin(p).is_ok());
        }
    }

    #[test]
    fn jump_rates_are_bounded(nu in cube_measure(5), v in vector(5, 3.0), t in 0.0f64..1.0, signs in prop::collection::vec(-1i8..=1, 5)) {
        let n = nu.n();
        let v = TiltVector::new(v[..n].to_vec()).unwrap();
        let u = PinVector::new(signs[..n].to_vec()).unwrap();
        if nu.pin_mass(&u).unwrap() > 0.0 {
            let rates = jump_rates(&nu, &v, t, &u).unwrap();
            for (i, r) in rates.iter().enumerate() {
                let a = v.as_slice()[i].abs();
                prop_assert!(*r >= 0.0 && *r <= 2.0 * a * (1.0 + 1e-12));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn kl_is_below_chi_square((mu, nu) in ac_pair(5)) {
        let d = mu.divergences(&nu).unwrap();
        prop_assert!(d.kl <= d.chi2 + 1e-12 * (1.0 + d.chi2));
        let raw = divergences(mu.probs(), nu.probs()).unwrap();
        prop_assert_eq!(raw.kl, kl_divergence(mu.probs(), nu.probs()).unwrap());
    }

    #[test]
    fn kyfan_bounds_hold_exactly(x in prop::collection::vec(-100.0f64..100.0, 1..=64), m_frac in 0.0f64..1.0) {
        let n = x.len();
        let m = 1 + ((n - 1) as f64 * m_frac) as usize;
        let mut sq: Vec<BigRational> = x.iter().map(|&v| {
            let r = BigRational::from_float(v).unwrap();
            &r * &r
        }).collect();
        sq.sort_by(|a, b| b.cmp(a));
        let total = sq.iter().fold(BigRational::zero(), |a, s| a + s);
        let top = sq[..m].iter().fold(BigRational::zero(), |a, s| a + s);
        prop_assert!(&total * BigRational::new(m.into(), n.into()) <= top);
        prop_assert!(top <= total);
        // floating version is nondecreasing in m
        let values: Vec<f64> = (1..=n).map(|j| kyfan_norm_sq(&x, j).unwrap()).collect();
        prop_assert!(values.windows(2).all(|w| w[0] <= w[1]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dv_bound_grows_with_c((mu, nu) in ac_pair(5).prop_filter("n ≥ 2", |(m, _)| m.n() >= 2), seed in any::<u64>()) {
        let n = nu.n();
        let config = SearchConfig { multistarts: 8, seed, ..SearchConfig::default() };
        let kl = mu.kl(&nu).unwrap();
        let mut last = 0.0;
        for m in 1..=n {
            let fam = SparseFamily::new(n, m as f64 / n as f64).unwrap();
            let b = dv_sparse_bound(&mu, &nu, &fam, &config).unwrap().bound;
            prop_assert!(b >= last - 1e-9, "m = {}: {} < {}", m, b, last);
            prop_assert!(b <= kl + 1e-9);
            last = b;
        }
    }

    #[test]
    fn enumerated_sets_are_exactly_the_independent_ones(g in graph(10, 4), k in 0usize..6) {
        let got = enumerate_ik(&g, k);
        let want: Vec<Vec<usize>> = (0..g.n())
            .combinations(k)
            .filter(|s| s.iter().tuple_combinations().all(|(&a, &b)| !g.has_edge(a, b)))
            .collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn down_up_kernel_fixes_uniform(g in graph(12, 3), k in 1usize..5) {
        if let Ok(kernel) = DownUpKernel::build(&g, k) {
            prop_assert!(kernel.row_sum_gap() < 1e-12);
            prop_assert!(kernel.stationarity_gap() < 1e-12);
        }
    }

    #[test]
    fn one_step_decomposition_is_exact(g in graph(8, 3), k in 1usize..4, t_frac in 0.0f64..1.0, scale in prop_oneof![Just(0.5), Just(1.0), Just(2.0)], seed in any::<u64>()) {
        if enumerate_ik(&g, k).is_empty() {
            return Ok(());
        }
        let t = ((k as f64) * t_frac) as usize;
        let f = FunctionSpec::ExpLinear { scale }.resolve(g.n(), seed);
        let r = one_step_decomposition_check(&g, k, t.min(k - 1), &f).unwrap();
        prop_assert!(r.gap <= 1e-10 && r.max_state_gap <= 1e-10, "{:?}", r);
    }

    #[test]
    fn conservation_ratio_in_unit_interval(g in graph(8, 3), k in 2usize..4, seed in any::<u64>()) {
        if enumerate_ik(&g, k).is_empty() {
            return Ok(());
        }
        let f = FunctionSpec::ExpLinear { scale: 1.0 }.resolve(g.n(), seed);
        let config = ConservationConfig { family_size: 10, ..Default::default() };
        // a single independent set carries no entropy
        let r = match entropy_conservation_experiment(&g, k, 1, &f, &config) {
            Err(Error::ZeroEntropy) => return Ok(()),
            other => other.unwrap(),
        };
        prop_assert!(r.ratio >= 0.0 && r.ratio <= 1.0 + 1e-9);
        prop_assert!(r.product_bound > 0.0 && r.product_bound <= 1.0);
        prop_assert!(r.bound_holds(), "{:?}", r);
    }
}

#[test]
fn critical_density_window_and_monotonicity() {
    let values: Vec<f64> = (3..=50).map(|d| alpha_c(d).unwrap()).collect();
    for (i, a) in values.iter().enumerate() {
        let d = (i + 3) as f64;
        assert!((d + 1.0) * a > 0.5 && (d + 1.0) * a < 1.0);
    }
    assert!(values.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn interpolation_bound_on_random_matrices() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    for _ in 0..500 {
        let dim = rng.random_range(1..=12);
        let rows: Vec<Vec<f64>> = (0..dim)
            .map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        let m = Matrix::from_rows(&rows);
        assert!(matrix_norms(&m).unwrap().interpolation_bound_holds());
    }
}

#[test]
fn point_mass_measure_rejects_other_pins() {
    let nu = CubeMeasure::point_mass(3, 0b101).unwrap();
    let u = PinVector::new(vec![-1, 0, 0]).unwrap();
    assert!(nu.pin(&u).is_err());
    let u = PinVector::new(vec![1, -1, 0]).unwrap();
    assert_eq!(nu.pin(&u).unwrap(), nu);
}
