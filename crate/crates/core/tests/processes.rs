use betaflow::ifs::{
    apply_f, backward_compose, backward_nest, check_conditions, forward_run, left_product_run, AffineState, StochMat2,
    DEFAULT_MAX_STEPS, DEFAULT_TOL,
};
use betaflow::models::{build_case, default_params, CATALOG};
use betaflow::rngdist::StreamKey;
use betaflow::{Error, MuSampler, Params};
use proptest::prelude::*;

fn model(name: &str) -> betaflow::ModelCase {
    build_case(name, &default_params(name).unwrap()).unwrap()
}

// The forward chain started at x uses the maps in the opposite order, so
// for a fixed n and the same draws it must equal Y_n(x) with the draws
// reversed.
#[test]
fn forward_equals_reversed_backward_for_fixed_n() {
    for name in ["m1_t1", "cgz_tent", "m2_dg", "kennedy"] {
        let mu = model(name).mu;
        for n in [1u64, 3, 10] {
            for seed in 0..20 {
                let mut k = StreamKey::new(seed, n);
                let pairs: Vec<(f64, f64)> = (0..n).map(|_| mu.sample(&mut k)).collect();
                for x0 in [0.0, 0.3, 1.0] {
                    let fwd = pairs.iter().fold(x0, |x, &(a, b)| apply_f(a, b, x));
                    let mut state = AffineState::identity();
                    for &(a, b) in pairs.iter().rev() {
                        state = state.compose(a, b).unwrap();
                    }
                    assert!((fwd - state.eval(x0)).abs() < 1e-12, "{name} n={n}");
                }
            }
        }
    }
}

#[test]
fn forward_run_matches_manual_composition() {
    let mu = model("m2_ub").mu;
    let key = StreamKey::experiment(1, "fixed-n");
    let mut k = key.clone();
    let manual = (0..10).fold(0.25, |x, _| {
        let (a, b) = mu.sample(&mut k);
        apply_f(a, b, x)
    });
    let got = forward_run(&mu, 0.25, 10, &mut key.clone()).unwrap();
    assert_eq!(got, manual);
}

#[test]
fn backward_intervals_nest() {
    let mu = model("m2_s24").mu;
    let mut k = StreamKey::experiment(2, "nest");
    let mut state = AffineState::identity();
    for _ in 0..60 {
        let (lo, hi) = state.interval();
        let (a, b) = mu.sample(&mut k);
        state = state.compose(a, b).unwrap();
        let (lo2, hi2) = state.interval();
        assert!(lo <= lo2 && hi2 <= hi);
    }
}

#[test]
fn point_mass_example_converges_to_half() {
    let mu = MuSampler::point(0.7, 0.3).unwrap();
    let (x, state) = backward_nest(&mu, &mut StreamKey::new(0, 0), DEFAULT_TOL, DEFAULT_MAX_STEPS).unwrap();
    assert!((x - 0.5).abs() < 1e-12);
    assert_eq!(state.steps, 31);
}

#[test]
fn non_contracting_pair_is_rejected() {
    let mu = MuSampler::point(1.0, 0.0).unwrap();
    let err = backward_nest(&mu, &mut StreamKey::new(0, 0), DEFAULT_TOL, DEFAULT_MAX_STEPS).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
}

#[test]
fn step_cap_reports_non_convergence() {
    let mu = MuSampler::point(0.9, 0.0).unwrap();
    let err = backward_nest(&mu, &mut StreamKey::new(0, 0), DEFAULT_TOL, 5).unwrap_err();
    assert!(err.is_non_convergence());
}

#[test]
fn matrix_rows_stay_stochastic() {
    for entry in CATALOG {
        let mu = model(entry.name).mu;
        for i in 0..50 {
            let p = left_product_run(&mu, &mut StreamKey::experiment(i, entry.name), DEFAULT_TOL).unwrap();
            assert!(p.is_stochastic(1e-12), "{} {:?}", entry.name, p);
        }
    }
}

#[test]
fn matrix_rows_are_the_backward_endpoints() {
    let mu = model("m1_t4").mu;
    let key = StreamKey::experiment(4, "rows");
    let mut k = key.clone();
    let mut prod = {
        let (a, b) = mu.sample(&mut k);
        StochMat2::factor(a, b)
    };
    for _ in 1..8 {
        let (a, b) = mu.sample(&mut k);
        prod = StochMat2::factor(a, b).mul(&prod);
    }
    // first column of M_8 ... M_1 is (Y_8(1), Y_8(0)) with F_1 outermost
    let state = backward_compose(&mu, 8, &mut key.clone()).unwrap();
    assert!((prod.m[0][0] - state.eval(1.0)).abs() < 1e-12);
    assert!((prod.m[1][0] - state.eval(0.0)).abs() < 1e-12);
}

#[test]
fn model_one_pairs_are_ordered() {
    for name in ["m1_t1", "m1_t2", "m1_t3", "m1_t4", "m1_t5"] {
        let m = model(name);
        assert!(m.mu.flags.m1);
        let mut k = StreamKey::experiment(5, name);
        for _ in 0..20_000 {
            let (a, b) = m.mu.sample(&mut k);
            assert!(a > b, "{name}: ({a}, {b})");
        }
        let report = check_conditions(&m.mu, 20_000, &mut StreamKey::experiment(6, name));
        assert!(report.ok(), "{name}: {:?}", report.violations);
    }
}

#[test]
fn declared_flags_survive_probing() {
    for entry in CATALOG {
        let m = model(entry.name);
        let report = check_conditions(&m.mu, 20_000, &mut StreamKey::experiment(8, entry.name));
        assert!(report.ok(), "{}: {:?}", entry.name, report.violations);
    }
}

#[test]
fn m2_dg_declares_m3_when_w_equals_z() {
    let m = build_case("m2_dg", &Params::from_pairs(&[("w", 2.0), ("y", 1.0), ("z", 2.0)])).unwrap();
    assert!(m.mu.flags.m3);
    let m = build_case("m2_dg", &Params::from_pairs(&[("w", 2.0), ("y", 1.0), ("z", 3.0)])).unwrap();
    assert!(!m.mu.flags.m3);
}

#[test]
fn every_beta_case_carries_the_gamma_link() {
    for entry in CATALOG {
        let m = model(entry.name);
        let (a, _) = m.beta_params().unwrap();
        let g = m.gamma_limit.unwrap();
        assert_eq!(g, betaflow::DistSpec::gamma(a).unwrap());
        if m.mu.flags.satisfies_c1 && m.mu.flags.satisfies_c2 {
            assert_eq!(m.claims, betaflow::models::ALL_CLAIMS.to_vec(), "{}", entry.name);
        }
    }
}

#[test]
fn tent_and_classic_share_the_limit() {
    let tent = build_case("cgz_tent", &Params::from_pairs(&[("z", 1.0)])).unwrap();
    let classic = build_case("cgz_classic", &Params::from_pairs(&[("p", 1.0)])).unwrap();
    assert_eq!(tent.predicted_limit, classic.predicted_limit);
    assert_eq!(tent.beta_params(), Some((2.0, 2.0)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn backward_limit_inside_every_interval(seed in any::<u64>(), n in 1u64..40) {
        let mu = model("m1_t2").mu;
        let key = StreamKey::new(seed, 0);
        let partial = backward_compose(&mu, n, &mut key.clone()).unwrap();
        let (x, _) = backward_nest(&mu, &mut key.clone(), DEFAULT_TOL, DEFAULT_MAX_STEPS).unwrap();
        let (lo, hi) = partial.interval();
        prop_assert!(x >= lo - 1e-12 && x <= hi + 1e-12);
    }

    #[test]
    fn forward_chain_stays_in_unit_interval(seed in any::<u64>(), x0 in 0.0f64..=1.0, n in 0u64..300) {
        let mu = model("m2_b1").mu;
        let x = forward_run(&mu, x0, n, &mut StreamKey::new(seed, 1)).unwrap();
        prop_assert!((0.0..=1.0).contains(&x));
    }

    #[test]
    fn composed_map_is_affine(seed in any::<u64>(), n in 1u64..20, x in 0.0f64..=1.0) {
        let mu = model("cgz_dual").mu;
        let s = backward_compose(&mu, n, &mut StreamKey::new(seed, 2)).unwrap();
        let expect = s.eval(0.0) + x * (s.eval(1.0) - s.eval(0.0));
        prop_assert!((s.eval(x) - expect).abs() < 1e-12);
    }
}
