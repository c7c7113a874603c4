use std::sync::Arc;

use approx::assert_abs_diff_eq;
use flatquant::hilbert::{compose_kernels, EuclideanKernel, HolomorphicMeasure, SharedKernel};
use flatquant::propagator::{
    convergence_sweep, exact_oscillator_kernel, normal_symbol, propagate_sliced, Engine, NormalSymbol,
    OscillatorKernel, PropagatorSpace, SlicedPropagatorRequest,
};
use flatquant::hilbert::OperatorKernel;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn request(z_t: C64, z_0: C64, time: f64, n: usize, engine: Engine) -> SlicedPropagatorRequest {
    SlicedPropagatorRequest {
        z_t: vec![z_t],
        z_0: vec![z_0],
        time,
        n_slices: n,
        engine,
    }
}

fn oscillator() -> NormalSymbol {
    NormalSymbol::Bilinear(C64::new(1.0, 0.0))
}

// Oracle: (1 − iT/n)ⁿ by the binomial expansion, independent of repeated
// multiplication.
fn binomial_power(time: f64, n: usize) -> C64 {
    let x = C64::new(0.0, -time / n as f64);
    let mut total = C64::new(0.0, 0.0);
    let mut binom = 1.0f64;
    for k in 0..=n {
        total += binom * x.powu(k as u32);
        binom = binom * (n - k) as f64 / (k + 1) as f64;
    }
    total
}

#[test]
fn closed_form_matches_binomial_oracle() {
    let one = C64::new(1.0, 0.0);
    for n in [1, 2, 3, 8, 64] {
        let g = propagate_sliced(&request(one, one, 1.0, n, Engine::GaussianClosedForm), &oscillator(), &PropagatorSpace::default())
            .unwrap();
        let expect = binomial_power(1.0, n).exp();
        assert!((g - expect).norm() < 1e-13 * expect.norm(), "n = {n}");
    }
}

#[test]
fn quadrature_engine_matches_closed_form() {
    let space = PropagatorSpace::default();
    let cases = [
        (C64::new(1.0, 0.0), C64::new(1.0, 0.0), 1.0),
        (C64::new(0.5, -1.2), C64::new(-0.3, 0.8), 0.5),
        (C64::new(1.4, 1.4), C64::new(0.0, -2.0), 1.0),
    ];
    for (zt, z0, time) in cases {
        for n in 1..=4 {
            let q = propagate_sliced(&request(zt, z0, time, n, Engine::Quadrature), &oscillator(), &space).unwrap();
            let c = propagate_sliced(&request(zt, z0, time, n, Engine::GaussianClosedForm), &oscillator(), &space)
                .unwrap();
            assert!((q - c).norm() < 1e-7 * c.norm().max(1.0), "n = {n}, {q} vs {c}");
        }
    }
}

#[test]
fn n64_error_matches_spectral_estimate() {
    let one = C64::new(1.0, 0.0);
    let g = propagate_sliced(&request(one, one, 1.0, 64, Engine::GaussianClosedForm), &oscillator(), &PropagatorSpace::default())
        .unwrap();
    let exact = C64::from_polar(1.0, -1.0).exp();
    let err = (g - exact).norm();
    let predicted = (C64::new(1.0, -1.0 / 64.0).powu(64).exp() - exact).norm();
    assert_abs_diff_eq!(err, predicted, epsilon = 1e-15);
    assert!(err > 0.0 && err < 0.05);
}

#[test]
fn sweep_is_first_order() {
    let n_list: Vec<usize> = (0..=9).map(|k| 1usize << k).collect();
    let rows = convergence_sweep(
        C64::new(1.0, 0.0),
        C64::new(1.0, 0.0),
        1.0,
        &n_list,
        Engine::GaussianClosedForm,
        &PropagatorSpace::default(),
    )
    .unwrap();
    for row in rows.iter().filter(|r| r.n >= 8 && r.n < 512) {
        let r = row.ratio.unwrap();
        assert!((r - 2.0).abs() < 0.1, "n = {}: ratio {r}", row.n);
        assert!((row.order_estimate.unwrap() - 1.0).abs() < 0.1);
    }
    // n·e_n settles
    let scaled: Vec<f64> = rows.iter().map(|r| r.n as f64 * r.abs_error).collect();
    assert!((scaled[9] - scaled[8]).abs() < 0.01 * scaled[9]);
}

#[test]
fn sweep_at_zero_time_has_no_error() {
    let rows = convergence_sweep(
        C64::new(0.7, 0.2),
        C64::new(-0.1, 1.0),
        0.0,
        &[1, 2, 4],
        Engine::GaussianClosedForm,
        &PropagatorSpace::default(),
    )
    .unwrap();
    assert!(rows.iter().all(|r| r.abs_error == 0.0 && r.order_estimate.is_none()));
}

#[test]
fn sweep_rejects_unsorted_list() {
    let one = C64::new(1.0, 0.0);
    assert!(convergence_sweep(one, one, 1.0, &[4, 2], Engine::GaussianClosedForm, &PropagatorSpace::default()).is_err());
}

#[test]
fn quadrature_at_two_slices_half_time() {
    let one = C64::new(1.0, 0.0);
    let space = PropagatorSpace::default();
    let q = propagate_sliced(&request(one, one, 0.5, 2, Engine::Quadrature), &oscillator(), &space).unwrap();
    let c = propagate_sliced(&request(one, one, 0.5, 2, Engine::GaussianClosedForm), &oscillator(), &space).unwrap();
    assert!((q - c).norm() < 1e-7);
}

#[test]
fn quadrature_engine_accepts_ratio_symbols() {
    let kh: SharedKernel = Arc::new(|z: &[C64], w: &[C64]| {
        let s = z[0] * w[0].conj();
        s * s.exp()
    });
    let h = normal_symbol(kh, Arc::new(EuclideanKernel { t: 1.0 }));
    let space = PropagatorSpace::default();
    let z = C64::new(0.6, 0.1);
    let q = propagate_sliced(&request(z, z, 0.8, 3, Engine::Quadrature), &h, &space).unwrap();
    let c = propagate_sliced(&request(z, z, 0.8, 3, Engine::GaussianClosedForm), &oscillator(), &space).unwrap();
    assert!((q - c).norm() < 1e-7);
    assert!(propagate_sliced(&request(z, z, 0.8, 3, Engine::GaussianClosedForm), &h, &space).is_err());
}

#[test]
fn too_few_nodes_is_reported() {
    let space = PropagatorSpace {
        gauss_nodes: 6,
        ..PropagatorSpace::default()
    };
    let z = C64::new(2.0, 0.0);
    assert!(propagate_sliced(&request(z, z, 1.0, 3, Engine::Quadrature), &oscillator(), &space).is_err());
}

#[test]
fn exact_kernel_semigroup_under_composition() {
    let measure = Arc::new(HolomorphicMeasure::euclidean(1, 1.0, 40).unwrap());
    let a: SharedKernel = Arc::new(OscillatorKernel { time: 0.4, t: 1.0 });
    let b: SharedKernel = Arc::new(OscillatorKernel { time: 0.9, t: 1.0 });
    let ab = compose_kernels(a, b, measure);
    for (z, w) in [
        (C64::new(0.3, 0.5), C64::new(-0.2, 0.7)),
        (C64::new(1.0, 0.0), C64::new(1.0, 0.0)),
        (C64::new(-0.8, 0.4), C64::new(0.1, -1.1)),
    ] {
        let got = ab.try_eval(&[z], &[w]).unwrap();
        let expect = exact_oscillator_kernel(&[z], &[w], 1.3, 1.0);
        assert!((got - expect).norm() < 1e-8 * expect.norm(), "{got} vs {expect}");
    }
}

#[test]
fn exact_kernel_two_pi_periodic_on_diagonal() {
    let z = [C64::new(0.9, -0.6)];
    let k = OscillatorKernel {
        time: 2.0 * std::f64::consts::PI,
        t: 1.0,
    };
    let v = k.eval(&z, &z);
    assert_abs_diff_eq!(v.re, z[0].norm_sqr().exp(), epsilon = 1e-13);
    assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-13);
}

proptest! {
    #[test]
    fn exact_kernel_modulus(re in -2.0..2.0f64, im in -2.0..2.0f64, time in -4.0..4.0f64) {
        let z = [C64::new(re, im)];
        let v = exact_oscillator_kernel(&z, &z, time, 1.0);
        let expect = (z[0].norm_sqr() * time.cos()).exp();
        prop_assert!((v.norm() - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn zero_time_returns_reproducing_kernel(re in -2.0..2.0f64, im in -2.0..2.0f64, n in 1usize..40) {
        let z = C64::new(re, im);
        let w = C64::new(im, -re * 0.5);
        let g = propagate_sliced(&request(z, w, 0.0, n, Engine::GaussianClosedForm), &oscillator(), &PropagatorSpace::default()).unwrap();
        prop_assert_eq!(g, EuclideanKernel { t: 1.0 }.eval(&[z], &[w]));
    }
}
