mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use tensile_bayes::data::{MeasurementSet, NoiseSpec, Point};
use tensile_bayes::likelihood::{self, LikelihoodSpec};
use tensile_bayes::{ModelKind, QuadratureSpec};

use common::{closed_form, oracle, random_instance};

#[test]
fn closed_forms_match_quadrature_of_the_defining_integral() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for kind in [ModelKind::Le, ModelKind::LePp, ModelKind::LeLh] {
        for i in 0..300 {
            let inst = random_instance(kind, &mut rng);
            let (c, o) = (closed_form(kind, &inst), oracle(kind, &inst));
            assert!((c - o).abs() <= 1e-8, "{kind} instance {i}: closed {c} oracle {o} x {:?} p {:?} s {} {} a {:?}", inst.x, inst.point, inst.s_stress, inst.s_strain, inst.upper);
        }
    }
}

#[test]
fn nonlinear_hardening_quadrature_matches_oracle() {
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    for i in 0..150 {
        let inst = random_instance(ModelKind::LeNh, &mut rng);
        let (c, o) = (closed_form(ModelKind::LeNh, &inst), oracle(ModelKind::LeNh, &inst));
        assert!((c - o).abs() <= 1e-8, "instance {i}: simpson {c} oracle {o} x {:?} p {:?} s {:e} {:e} a {:?}", inst.x, inst.point, inst.s_stress, inst.s_strain, inst.upper);
    }
}

#[test]
fn nonlinear_hardening_panel_doubling_is_below_tolerance() {
    let mut rng = ChaCha20Rng::seed_from_u64(15);
    let fine = QuadratureSpec { panels: 2 * QuadratureSpec::default().panels, ..Default::default() };
    for i in 0..500 {
        let inst = random_instance(ModelKind::LeNh, &mut rng);
        let set = inst.set();
        let a = likelihood::loglik_double_lenh(&inst.x, &set, QuadratureSpec::default()).unwrap();
        let b = likelihood::loglik_double_lenh(&inst.x, &set, fine).unwrap();
        assert!((a - b).abs() < 1e-8, "instance {i}: {a} vs {b}");
    }
}

#[test]
fn nonlinear_hardening_integrand_vanishes_at_yield_for_soft_exponents() {
    // For n < 1 the Jacobian diverges at yield; a Simpson node there must
    // contribute nothing, so coarse and fine rules agree.
    let x = [78.85320122666818, 0.054760786315055876, 8.322882997796528, 0.2035843252460532];
    let p = Point { strain: 1.5064692054692916e-3, stress: 0.11453623465503975 };
    let set = MeasurementSet::new(vec![p], NoiseSpec::stress_and_strain(1.4157411958596218e-2, 3.554939100991e-4), "").unwrap();
    let coarse = likelihood::loglik_double_lenh(&x, &set, QuadratureSpec { panels: 64, width: 8.0 }).unwrap();
    let fine = likelihood::loglik_double_lenh(&x, &set, QuadratureSpec { panels: 8192, width: 8.0 }).unwrap();
    assert!((coarse - fine).abs() < 1e-6, "{coarse} vs {fine}");
}

#[test]
fn vanishing_strain_noise_recovers_stress_only_likelihood() {
    let p = Point { strain: 7.25e-4, stress: 0.1576 };
    let single = MeasurementSet::new(vec![p], NoiseSpec::stress_only(0.01), "").unwrap();
    let double = MeasurementSet::new(vec![p], NoiseSpec::stress_and_strain(0.01, 1e-9), "").unwrap();
    let ls = likelihood::loglik_single(ModelKind::Le, &[210.0], &single).unwrap();
    let ld = likelihood::loglik_double_le(210.0, &double).unwrap();
    assert!((ls - ld).abs() < 1e-6, "{ls} vs {ld}");
    for x in [[210.0, 0.1], [210.0, 0.3]] {
        let ls = likelihood::loglik_single(ModelKind::LePp, &x, &single).unwrap();
        let ld = likelihood::loglik_double_lepp(&x, &double).unwrap();
        assert!((ls - ld).abs() < 1e-6, "{ls} vs {ld}");
    }
}

#[test]
fn log_likelihood_is_additive_over_measurements() {
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    for kind in ModelKind::ALL {
        for noise in [NoiseSpec::stress_only(0.01), NoiseSpec::stress_and_strain(0.01, 1e-4)] {
            let inst = random_instance(kind, &mut rng);
            let pts: Vec<Point> = (1..=6)
                .map(|i| {
                    let eps = 4e-4 * i as f64;
                    Point { strain: eps, stress: kind.stress(eps, &inst.x).unwrap() + 0.003 * (i as f64 - 3.0) }
                })
                .collect();
            let spec = LikelihoodSpec::new(kind, noise).unwrap();
            let whole = spec.log_likelihood_points(&inst.x, &pts).unwrap();
            let parts = spec.log_likelihood_points(&inst.x, &pts[..2]).unwrap()
                + spec.log_likelihood_points(&inst.x, &pts[2..]).unwrap();
            assert!((whole - parts).abs() <= 1e-12 * whole.abs().max(1.0), "{kind} {noise:?}");
        }
    }
}

#[test]
fn continuous_across_the_yield_boundary() {
    // Path in σ_y0 crossing E·ε for a measurement at ε = 1e-3, E = 210.
    let p = Point { strain: 1e-3, stress: 0.2 };
    let boundary = 210.0 * 1e-3;
    for noise in [NoiseSpec::stress_only(0.01), NoiseSpec::stress_and_strain(0.01, 1e-4)] {
        let set = MeasurementSet::new(vec![p], noise, "").unwrap();
        for kind in [ModelKind::LePp, ModelKind::LeLh, ModelKind::LeNh] {
            let x = |sy: f64| match kind {
                ModelKind::LePp => vec![210.0, sy],
                ModelKind::LeLh => vec![210.0, sy, 20.0],
                _ => vec![210.0, sy, 2.0, 0.57],
            };
            let spec = LikelihoodSpec::new(kind, noise).unwrap().without_hardening_jacobian();
            let below = spec.log_likelihood(&x(boundary - 1e-11), &set).unwrap();
            let above = spec.log_likelihood(&x(boundary + 1e-11), &set).unwrap();
            assert!(below.is_finite() && above.is_finite());
            assert!((below - above).abs() < 1e-6, "{kind} {noise:?}: {below} vs {above}");
        }
    }
}

#[test]
fn nonlinear_hardening_reductions_on_random_instances() {
    let mut rng = ChaCha20Rng::seed_from_u64(14);
    for _ in 0..100 {
        let inst = random_instance(ModelKind::LeLh, &mut rng);
        let (e, sy, h) = (inst.x[0], inst.x[1], inst.x[2].max(0.1));
        for noise in [NoiseSpec::stress_only(inst.s_stress), inst.noise()] {
            let set = MeasurementSet::new(vec![inst.point], noise, "").ok();
            let Some(set) = set else { continue };
            let nh = LikelihoodSpec::new(ModelKind::LeNh, noise).unwrap().without_hardening_jacobian();
            let lh = LikelihoodSpec::new(ModelKind::LeLh, noise).unwrap();
            let pp = LikelihoodSpec::new(ModelKind::LePp, noise).unwrap();
            let a = nh.log_likelihood(&[e, sy, h, 1.0], &set).unwrap();
            let b = lh.log_likelihood(&[e, sy, h], &set).unwrap();
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "n=1: {a} vs {b}");
            let a = nh.log_likelihood(&[e, sy, 0.0, 0.7], &set).unwrap();
            let b = pp.log_likelihood(&[e, sy], &set).unwrap();
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "H=0: {a} vs {b}");
        }
    }
}

proptest! {
    #[test]
    fn finite_for_admissible_parameters(
        e in 1.0..400.0f64,
        sy in 0.01..1.0f64,
        h in 0.0..100.0f64,
        n in 0.1..3.0f64,
        strain in 0.0..0.02f64,
        stress in -0.1..1.0f64,
    ) {
        let p = Point { strain, stress };
        for noise in [NoiseSpec::stress_only(0.01), NoiseSpec::stress_and_strain(0.01, 1e-4)] {
            let set = MeasurementSet::new(vec![p], noise, "").unwrap();
            for (kind, x) in [
                (ModelKind::Le, vec![e]),
                (ModelKind::LePp, vec![e, sy]),
                (ModelKind::LeLh, vec![e, sy, h]),
                (ModelKind::LeNh, vec![e, sy, h, n]),
            ] {
                let v = LikelihoodSpec::new(kind, noise).unwrap().log_likelihood(&x, &set).unwrap();
                prop_assert!(v.is_finite() || v == f64::NEG_INFINITY, "{kind}: {v}");
                prop_assert!(v < 20.0);
            }
        }
    }
}
