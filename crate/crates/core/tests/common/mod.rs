#![allow(dead_code)]

use std::f64::consts::PI;

use flatquant::spaceform::{make_space_form, CellParams, Family, SpaceFormSpec};

pub fn circle() -> SpaceFormSpec {
    make_space_form(Family::Circle, &CellParams::default()).unwrap()
}

pub fn torus(lengths: &[f64]) -> SpaceFormSpec {
    make_space_form(Family::Torus(lengths.len()), &CellParams::lengths(lengths)).unwrap()
}

pub fn torus2() -> SpaceFormSpec {
    torus(&[2.0 * PI, 2.0 * PI])
}

/// One sample of each three-dimensional family.
pub fn bieberbach() -> Vec<SpaceFormSpec> {
    let rect = CellParams::lengths(&[2.0, 2.5, 3.0]);
    let square = CellParams::lengths(&[2.0, 2.0, 3.0]);
    let hex = CellParams::lengths(&[2.0, 2.0, 3.0]);
    [
        (Family::G1, &rect),
        (Family::G2, &rect),
        (Family::G3, &hex),
        (Family::G4, &square),
        (Family::G5, &hex),
        (Family::G6, &rect),
    ]
    .into_iter()
    .map(|(f, p)| make_space_form(f, p).unwrap())
    .collect()
}

use flatquant::heatkernel::LatticeKernel;
use flatquant::quadrature::periodic_trapezoid;
use flatquant::spaceform::apply;

pub const KERNEL_TOL: f64 = 1e-15;

/// `|∫_Q ρ_t^{x₀} − 1|` with the cell trapezoid, `∫_Q = (1/m) ∫_cell`.
pub fn normalization_error(spec: &SpaceFormSpec, t: f64, x0: &[f64], nodes: usize) -> f64 {
    let k = LatticeKernel::new(spec, t, KERNEL_TOL, 0.0).unwrap();
    let rule = periodic_trapezoid(&spec.translation_basis, nodes).unwrap();
    let total = rule.integrate_real(|x| k.eval_real(x, x0)) / spec.holonomy_order as f64;
    (total - 1.0).abs()
}

/// Wrapped Gaussian on the circle of length 2π by direct image summation.
pub fn wrapped_gaussian(theta: f64, theta0: f64, t: f64) -> f64 {
    let images = 8 + (6.0 * t.sqrt()) as i64;
    let mut s = 0.0;
    for m in -images..=images {
        let d = theta - theta0 + 2.0 * PI * m as f64;
        s += (-d * d / (2.0 * t)).exp();
    }
    s / (2.0 * PI * t).sqrt()
}

/// `max |∂_t ρ − ½Δρ| / max ρ` over a grid on a rectangular torus, with
/// fourth-order central differences in `t` and every `xᵢ`.
pub fn heat_residual(spec: &SpaceFormSpec, t: f64, x0: &[f64], samples: usize, h: f64) -> f64 {
    let stencil = [(-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)];
    let second = [(-2.0, -1.0 / 12.0), (-1.0, 16.0 / 12.0), (0.0, -30.0 / 12.0), (1.0, 16.0 / 12.0), (2.0, -1.0 / 12.0)];
    let at = |tt: f64| LatticeKernel::new(spec, tt, KERNEL_TOL, 0.0).unwrap();
    let k0 = at(t);
    let kt: Vec<(f64, LatticeKernel)> = stencil.iter().map(|(o, c)| (*c, at(t + o * h))).collect();
    let n = spec.dim;
    let peak = k0.eval_real(x0, x0);
    let mut worst: f64 = 0.0;
    for flat in 0..samples.pow(n as u32) {
        let mut rem = flat;
        let frac: Vec<f64> = (0..n)
            .map(|_| {
                let j = rem % samples;
                rem /= samples;
                (j as f64 + 0.37) / samples as f64
            })
            .collect();
        let x = spec.translation_basis.to_cartesian(&frac);
        let dt: f64 = kt.iter().map(|(c, k)| c * k.eval_real(&x, x0)).sum::<f64>() / h;
        let mut lap = 0.0;
        for d in 0..n {
            for (o, c) in second {
                let mut y = x.clone();
                y[d] += o * h;
                lap += c * k0.eval_real(&y, x0);
            }
        }
        lap /= h * h;
        worst = worst.max((dt - 0.5 * lap).abs());
    }
    worst / peak
}

/// `max |∫_Q ρ_s^{x₀}(y) ρ_t^{y}(x) dy − ρ_{s+t}^{x₀}(x)|` over a few `x`.
pub fn semigroup_error(spec: &SpaceFormSpec, s: f64, t: f64, x0: &[f64], nodes: usize) -> f64 {
    let ks = LatticeKernel::new(spec, s, KERNEL_TOL, 0.0).unwrap();
    let kt = LatticeKernel::new(spec, t, KERNEL_TOL, 0.0).unwrap();
    let kst = LatticeKernel::new(spec, s + t, KERNEL_TOL, 0.0).unwrap();
    let rule = periodic_trapezoid(&spec.translation_basis, nodes).unwrap();
    let ys: Vec<(Vec<f64>, f64, f64)> = (0..rule.len())
        .map(|i| {
            let y = rule.node(i).to_vec();
            let a = ks.eval_real(&y, x0);
            (y, a, rule.weight(i))
        })
        .collect();
    let m = spec.holonomy_order as f64;
    let mut worst: f64 = 0.0;
    for frac in [0.1, 0.45, 0.8] {
        let x = spec.translation_basis.to_cartesian(&vec![frac; spec.dim]);
        let lhs: f64 = ys.iter().map(|(y, a, w)| a * kt.eval_real(&x, y) * w).sum::<f64>() / m;
        worst = worst.max((lhs - kst.eval_real(&x, x0)).abs());
    }
    worst
}

/// `max |ρ(γx, γx₀) − ρ(x, x₀)|` over every group generator and a sample
/// of point pairs.
pub fn invariance_deviation(spec: &SpaceFormSpec, t: f64) -> f64 {
    let k = LatticeKernel::new(spec, t, KERNEL_TOL, 0.0).unwrap();
    let n = spec.dim;
    let mut worst: f64 = 0.0;
    for g in spec.group_generators() {
        for s in 0..6 {
            let fx: Vec<f64> = (0..n).map(|d| ((s * 7 + d * 3) % 11) as f64 / 11.0 + 0.013).collect();
            let f0: Vec<f64> = (0..n).map(|d| ((s * 5 + d * 2 + 4) % 13) as f64 / 13.0 - 0.021).collect();
            let x = spec.translation_basis.to_cartesian(&fx);
            let x0 = spec.translation_basis.to_cartesian(&f0);
            let gx = apply(&g, &x).unwrap();
            let gx0 = apply(&g, &x0).unwrap();
            worst = worst.max((k.eval_real(&gx, &gx0) - k.eval_real(&x, &x0)).abs());
        }
    }
    worst
}
