mod common;

use common::*;
use flatquant::heatkernel::LatticeKernel;
use flatquant::lattice::enumerate_shell;
use flatquant::spaceform::{
    apply, compose, is_invariant, make_space_form, sampled_deviation, CellParams, Family, InvarianceMode,
    SpaceFormSpec,
};
use flatquant::FourierFunction;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

#[test]
fn defining_relations_and_volumes() {
    for spec in bieberbach() {
        for (p, expected) in spec.defining_relations() {
            assert!((p.rotation() - DMatrix::identity(3, 3)).amax() < 1e-12);
            for (a, b) in p.translation().iter().zip(&expected) {
                assert!((a - b).abs() < 1e-12, "{}", spec.family);
            }
        }
        let cell = spec.translation_basis.matrix().determinant().abs();
        assert!((spec.volume - cell / spec.holonomy_order as f64).abs() < 1e-12);
        assert_eq!(spec.holonomy_representatives().len(), spec.holonomy_order);
        for g in &spec.holonomy_generators {
            let a = g.rotation();
            assert!((a.transpose() * a - DMatrix::identity(3, 3)).amax() < 1e-12);
        }
    }
}

#[test]
fn holonomy_orders_by_family() {
    let orders: Vec<usize> = bieberbach().iter().map(|s| s.holonomy_order).collect();
    assert_eq!(orders, vec![1, 2, 3, 4, 6, 4]);
}

#[test]
fn rotations_preserve_the_lattice() {
    for spec in bieberbach() {
        let b = spec.translation_basis.matrix().clone();
        let inv = b.clone().try_inverse().unwrap();
        for g in &spec.holonomy_generators {
            let image = &inv * g.rotation() * &b;
            assert!(image.iter().all(|v| (v - v.round()).abs() < 1e-10), "{}", spec.family);
        }
    }
}

#[test]
fn generators_move_every_sample_point() {
    // free action: no element of a small ball of the group fixes a sample
    for spec in bieberbach().into_iter().filter(|s| s.holonomy_order > 1) {
        let reps = spec.holonomy_representatives();
        for r in reps.iter().filter(|r| !r.is_pure_translation()) {
            for s in 0..20 {
                let frac: Vec<f64> = (0..3).map(|d| ((s * 7 + d * 5) % 19) as f64 / 19.0).collect();
                let x = spec.translation_basis.to_cartesian(&frac);
                let y = apply(r, &x).unwrap();
                let inv = spec.translation_basis.matrix().clone().try_inverse().unwrap();
                let diff = inv * (DVector::from_vec(y) - DVector::from_vec(x));
                let integral = diff.iter().all(|v| (v - v.round()).abs() < 1e-9);
                assert!(!integral, "{} fixes a point", spec.family);
            }
        }
    }
}

#[test]
fn bad_cells_are_rejected() {
    assert!(make_space_form(Family::G4, &CellParams::lengths(&[2.0, 3.0, 1.0])).is_err());
    assert!(make_space_form(Family::Torus(2), &CellParams::lengths(&[1.0])).is_err());
    assert!(make_space_form(Family::G2, &CellParams::lengths(&[1.0, -2.0, 1.0])).is_err());
    assert!("g7".parse::<Family>().is_err());
    assert_eq!("Torus3".parse::<Family>().unwrap(), Family::Torus(3));
}

#[test]
fn spec_round_trips_through_json() {
    for spec in bieberbach() {
        let text = serde_json::to_string(&spec).unwrap();
        let back: SpaceFormSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
}

/// Heat kernel of `Q` at base `x₀` as a function of `x`: the covering-torus
/// kernel averaged over the holonomy images of `x₀`.
fn orbit_kernel(spec: &SpaceFormSpec, x0: &[f64], t: f64) -> FourierFunction {
    let recip = spec.reciprocal();
    let reps = spec.holonomy_representatives();
    let mut f = FourierFunction::zero(recip.clone());
    for k in enumerate_shell(&recip, (2.0 * 36.0 / t).sqrt()) {
        let mut c = C64::new(0.0, 0.0);
        for h in &reps {
            let hx0 = apply(h, x0).unwrap();
            c += C64::from_polar((-0.5 * k.norm2 * t).exp(), -k.dot(&hx0));
        }
        f.set(k.index.clone(), c / (spec.volume * reps.len() as f64));
    }
    f.prune(1e-16);
    f
}

#[test]
fn orbit_kernel_is_invariant_under_every_generator() {
    for spec in bieberbach() {
        let x0 = spec.translation_basis.to_cartesian(&[0.21, 0.33, 0.47]);
        let f = orbit_kernel(&spec, &x0, 1.0);
        for g in spec.group_generators() {
            assert!(is_invariant(&f, &g, 1e-10, InvarianceMode::Coefficients).unwrap(), "{}", spec.family);
            assert!(sampled_deviation(&f, &g).unwrap() < 1e-10);
        }
        // agrees with the orbit sum of the lattice kernel
        let k = LatticeKernel::new(&spec, 1.0, 1e-15, 0.0).unwrap();
        let x = spec.translation_basis.to_cartesian(&[0.6, 0.1, 0.9]);
        let direct: f64 = spec
            .holonomy_representatives()
            .iter()
            .map(|h| k.eval_real(&x, &apply(h, &x0).unwrap()))
            .sum::<f64>()
            / spec.holonomy_order as f64;
        assert!((f.eval(&x).re - direct).abs() < 1e-10);
    }
}

#[test]
fn single_image_kernel_is_not_invariant_in_x_alone() {
    let spec = &bieberbach()[1];
    let recip = spec.reciprocal();
    let x0 = [0.3, 0.2, 0.1];
    let mut f = FourierFunction::zero(recip.clone());
    for k in enumerate_shell(&recip, 8.0) {
        f.set(k.index.clone(), C64::from_polar((-0.5 * k.norm2).exp(), -k.dot(&x0)));
    }
    let g = &spec.holonomy_generators[0];
    assert!(!is_invariant(&f, g, 1e-10, InvarianceMode::Coefficients).unwrap());
}

proptest! {
    #[test]
    fn composition_is_associative(i in 0usize..6, j in 0usize..6, k in 0usize..6) {
        let spec = &bieberbach()[5];
        let mut gens = spec.group_generators();
        gens.extend(spec.holonomy_representatives());
        let (a, b, c) = (&gens[i % gens.len()], &gens[j % gens.len()], &gens[k % gens.len()]);
        let left = compose(&compose(a, b).unwrap(), c).unwrap();
        let right = compose(a, &compose(b, c).unwrap()).unwrap();
        let x = [0.3, -0.7, 1.1];
        let (l, r) = (apply(&left, &x).unwrap(), apply(&right, &x).unwrap());
        prop_assert!(l.iter().zip(&r).all(|(p, q)| (p - q).abs() < 1e-12));
    }
}
