//! Distributional checks of the limit laws, one fixed seed per test.

use betaflow::identities::{a1prime_case, check_identity};
use betaflow::ifs::{left_product_run, DEFAULT_TOL};
use betaflow::models::{build_case, default_params, CATALOG};
use betaflow::rngdist::{try_replicate, DistSpec, StreamKey};
use betaflow::stats::{
    beta_moments, empirical_cf_compare, gamma_moments, ks_one_sample, ks_two_sample, moment_compare, sorted_copy,
};
use betaflow::verify::{backward_sample, forward_sample, gamma_sample};
use betaflow::{ModelCase, Params};

const ALPHA: f64 = 0.001;
const N: usize = 20_000;

fn case(name: &str, pairs: &[(&str, f64)]) -> ModelCase {
    build_case(name, &Params::from_pairs(pairs)).unwrap()
}

// Backward, forward, gamma side and the gamma-form fixed point, for every
// catalog model at its default parameters.
#[test]
fn quadruple_holds_for_every_catalog_model() {
    let mut failures = Vec::new();
    for entry in CATALOG {
        let model = build_case(entry.name, &default_params(entry.name).unwrap()).unwrap();
        let beta = *model.predicted_limit().unwrap();
        let gamma = model.gamma_limit.unwrap();
        let key = StreamKey::experiment(11, entry.name);

        let back = backward_sample(&model, N, DEFAULT_TOL, &key.fork("backward")).unwrap();
        let fwd = forward_sample(&model, 0.5, 200, N, &key.fork("forward")).unwrap();
        let gam = gamma_sample(&model, 1.0, 200, N, &key.fork("gamma")).unwrap();
        let reports = [
            ks_one_sample(&back, |x| beta.cdf(x), ALPHA)
                .unwrap()
                .labeled("backward"),
            ks_one_sample(&fwd, |x| beta.cdf(x), ALPHA).unwrap().labeled("forward"),
            ks_one_sample(&gam, |x| gamma.cdf(x), ALPHA).unwrap().labeled("gamma"),
            check_identity(&a1prime_case(&model).unwrap(), N, ALPHA, &key.fork("a1prime")).unwrap(),
        ];
        for r in reports.iter().filter(|r| !r.pass) {
            failures.push(format!(
                "{}: {} D={:.4} > {:.4}",
                entry.name, r.test, r.statistic, r.critical
            ));
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn m1_t1_backward_is_uniform_at_p_03() {
    let model = case("m1_t1", &[("p", 0.3)]);
    let xs = backward_sample(&model, N, DEFAULT_TOL, &StreamKey::experiment(3, "t1")).unwrap();
    let r = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0), ALPHA).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn matrix_products_reach_uniform_rank_one() {
    let model = case("m1_t1", &[("p", 0.5)]);
    let rows = try_replicate(&StreamKey::experiment(5, "matrix"), N, |mut k| {
        left_product_run(&model.mu, &mut k, DEFAULT_TOL)
    })
    .unwrap();
    for p in &rows {
        assert!(p.row_gap() <= DEFAULT_TOL);
        assert!(p.max_row_sum_error() <= 1e-12);
    }
    let first: Vec<f64> = rows.iter().map(|p| p.m[0][0]).collect();
    let r = ks_one_sample(&sorted_copy(&first).unwrap(), |x| x.clamp(0.0, 1.0), ALPHA).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn forward_chain_of_m2_dg_is_beta_2_2() {
    let model = case("m2_dg", &[("w", 1.0), ("y", 1.0), ("z", 1.0)]);
    let xs = forward_sample(&model, 0.1, 200, N, &StreamKey::experiment(7, "dg")).unwrap();
    let law = DistSpec::beta(2.0, 2.0).unwrap();
    let r = ks_one_sample(&xs, |x| law.cdf(x), ALPHA).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn gamma_chain_of_m1_t5_is_gamma_2() {
    let model = case("m1_t5", &[("z", 1.0)]);
    assert_eq!(model.beta_params(), Some((2.0, 2.0)));
    let xs = gamma_sample(&model, 1.0, 200, N, &StreamKey::experiment(9, "t5")).unwrap();
    let law = DistSpec::gamma(2.0).unwrap();
    let r = ks_one_sample(&xs, |x| law.cdf(x), ALPHA).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn forward_and_backward_agree_two_sample() {
    let model = case("m2_s24", &[("w", 2.0), ("y", 1.0)]);
    let key = StreamKey::experiment(13, "duality");
    let back = backward_sample(&model, N, DEFAULT_TOL, &key.fork("b")).unwrap();
    let fwd = forward_sample(&model, 0.5, 200, N, &key.fork("f")).unwrap();
    let r = ks_two_sample(&back, &fwd, ALPHA).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn raw_moments_within_five_sigma() {
    let model = case("m1_t3", &[("y", 2.0), ("z", 0.7)]);
    let (a, b) = model.beta_params().unwrap();
    let key = StreamKey::experiment(17, "moments");
    let back = backward_sample(&model, N, DEFAULT_TOL, &key.fork("b")).unwrap();
    let r = moment_compare(&back, &beta_moments(a, b, 4).unwrap(), 5.0).unwrap();
    assert!(r.pass, "{r:?}");

    let gam = gamma_sample(&model, 1.0, 200, N, &key.fork("g")).unwrap();
    let r = moment_compare(&gam, &gamma_moments(a, 4).unwrap(), 5.0).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn gamma_side_characteristic_function() {
    let model = case("m1_t1", &[("p", 0.5)]);
    let gam = gamma_sample(&model, 1.0, 200, N, &StreamKey::experiment(19, "cf")).unwrap();
    let grid: Vec<f64> = (-8..=8).map(|i| i as f64 * 0.25).collect();
    let r = empirical_cf_compare(&gam, 1.0, &grid).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(r.max_abs_gap < 0.05);
}

#[test]
fn small_first_shape_resolved_near_zero() {
    let model = case("m1_t2", &[("z", 0.5), ("p", 0.8)]);
    let (a, b) = model.beta_params().unwrap();
    assert!((a - 0.1).abs() < 1e-12 && (b - 0.4).abs() < 1e-12);
    let law = DistSpec::beta(a, b).unwrap();
    let xs = backward_sample(&model, N, DEFAULT_TOL, &StreamKey::experiment(23, "tail")).unwrap();
    // a visible share of the law sits below 1e-12
    assert!(law.cdf(1e-12) > 0.04);
    let r = ks_one_sample(&xs, |x| law.cdf(x), ALPHA).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn wrong_law_is_rejected() {
    let model = case("m1_t1", &[("p", 0.5)]);
    let xs = backward_sample(&model, N, DEFAULT_TOL, &StreamKey::experiment(29, "neg")).unwrap();
    let wrong = DistSpec::beta(1.2, 1.0).unwrap();
    let r = ks_one_sample(&xs, |x| wrong.cdf(x), ALPHA).unwrap();
    assert!(!r.pass, "{r:?}");
}
