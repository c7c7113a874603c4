//! Acceptance suite: one line per criterion, non-zero exit on any failure.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use flatquant::geometry::{bracket_obstruction, compatible_triple, BracketOptions, MetricChart, PhasePoint};
use flatquant::heatkernel::rho_s1;
use flatquant::hilbert::{
    apply_operator, inner_q, inner_q_closed, inner_qc, inner_qc_closed, sb_transform, sb_transform_quadrature,
    standard_from_weighted, weighted_from_standard, BasePoint, CircleIntegralKernel, EuclideanKernel,
    HolomorphicMeasure, OperatorKernel, QuadOptions,
};
use flatquant::propagator::{convergence_sweep, propagate_sliced, Engine, NormalSymbol, PropagatorSpace, SlicedPropagatorRequest};
use flatquant::quadrature::periodic_trapezoid;
use flatquant::spaceform::{apply, SpaceFormSpec};
use flatquant::{FourierFunction, HolomorphicFunction};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_poly(rng: &mut ChaCha8Rng, spec: &SpaceFormSpec, degree: i64, terms: usize) -> FourierFunction {
    let t: Vec<(Vec<i64>, C64)> = (0..terms)
        .map(|_| {
            let idx: Vec<i64> = (0..spec.dim).map(|_| rng.gen_range(-degree..=degree)).collect();
            (idx, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        })
        .collect();
    FourierFunction::from_terms(spec.reciprocal(), t).unwrap()
}

/// Γ-symmetrized version of `f`: average of `f∘γ` over the holonomy cosets.
fn symmetrize(spec: &SpaceFormSpec, f: &FourierFunction) -> FourierFunction {
    let recip = spec.reciprocal();
    let mut out = FourierFunction::zero(recip.clone());
    let reps = spec.holonomy_representatives();
    for (k, c) in f.terms() {
        for h in &reps {
            let at = h.rotation().transpose();
            let image: Vec<f64> = (0..spec.dim)
                .map(|i| (0..spec.dim).map(|j| at[(i, j)] * k.vector[j]).sum())
                .collect();
            let idx = recip.locate(&image, 1e-8).unwrap();
            let prev = out.coeff(&idx);
            out.set(idx, prev + c * C64::from_polar(1.0 / reps.len() as f64, k.dot(h.translation())));
        }
    }
    out.prune(1e-14);
    out
}

fn c1_normalization() -> Outcome {
    let g2 = bieberbach().into_iter().nth(1).unwrap();
    let fixtures = [
        (torus(&[2.0 * PI]), 64),
        (torus(&[2.0 * PI, 3.0]), 40),
        (torus(&[2.0 * PI, 2.0 * PI, 2.0 * PI]), 24),
        (g2, 16),
    ];
    let mut worst: f64 = 0.0;
    for t in [0.2, 1.0, 5.0] {
        for (spec, nodes) in &fixtures {
            let x0 = spec.translation_basis.to_cartesian(&vec![0.3; spec.dim]);
            worst = worst.max(normalization_error(spec, t, &x0, *nodes));
        }
    }
    outcome(worst < 1e-10, format!("max |int rho - 1| = {worst:.3e} (tol 1e-10)"))
}

fn c2_heat_equation() -> Outcome {
    let spec = torus(&[2.0 * PI, 5.0]);
    let worst = [0.2, 0.5, 1.0, 2.0]
        .iter()
        .map(|&t| heat_residual(&spec, t, &[0.4, 1.1], 5, 2e-3))
        .fold(0.0, f64::max);
    outcome(worst < 1e-6, format!("max residual / max rho = {worst:.3e} (tol 1e-6)"))
}

fn c3_semigroup() -> Outcome {
    let a = semigroup_error(&circle(), 0.3, 0.5, &[0.7], 64);
    let b = semigroup_error(&torus2(), 0.4, 0.6, &[0.7, -1.0], 48);
    let worst = a.max(b);
    outcome(worst < 1e-8, format!("S1 {a:.3e}, T2 {b:.3e} (tol 1e-8)"))
}

fn c4_invariance() -> Outcome {
    let worst = bieberbach()
        .iter()
        .flat_map(|s| [0.5, 1.5].map(|t| invariance_deviation(s, t)))
        .fold(0.0, f64::max);
    outcome(worst < 1e-10, format!("max |rho(gx, gx0) - rho(x, x0)| over G1-G6 = {worst:.3e} (tol 1e-10)"))
}

fn c5_wrapped_gaussian() -> Outcome {
    let mut worst: f64 = 0.0;
    for t in [0.3, 0.5, 1.0, 2.0, 3.0] {
        for j in 0..64 {
            let th = -PI + 2.0 * PI * j as f64 / 64.0;
            let oracle = wrapped_gaussian(th, 0.4, t);
            let v = rho_s1(th, 0.4, t, 1e-16).unwrap();
            worst = worst.max((v - oracle).abs() / oracle);
        }
    }
    outcome(worst < 1e-10, format!("max rel err = {worst:.3e} (tol 1e-10)"))
}

fn c6_isometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for spec in [circle(), torus2()] {
        for _ in 0..50 {
            let f = random_poly(&mut rng, &spec, 8, 6);
            let g = random_poly(&mut rng, &spec, 8, 6);
            let t = rng.gen_range(0.3..2.0);
            let base = BasePoint((0..spec.dim).map(|_| rng.gen_range(-PI..PI)).collect());
            let lhs = inner_qc_closed(&sb_transform(&f, t).unwrap(), &sb_transform(&g, t).unwrap(), &base, t).unwrap();
            let rhs = inner_q_closed(&f, &g, &base, t).unwrap();
            let nf = inner_q_closed(&f, &f, &base, t).unwrap().re;
            let ng = inner_q_closed(&g, &g, &base, t).unwrap().re;
            worst = worst.max((lhs - rhs).norm() / (nf * ng).sqrt());
        }
    }
    outcome(worst < 1e-8, format!("100 pairs, max normalized defect = {worst:.3e} (tol 1e-8)"))
}

fn c7_reproducing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let pts: Vec<Vec<C64>> = (0..20)
        .map(|_| vec![C64::new(rng.gen_range(-PI..PI), rng.gen_range(-1.5..1.5))])
        .collect();

    let t = 1.0;
    let eu = EuclideanKernel { t };
    let measure = HolomorphicMeasure::euclidean(1, t, 48).unwrap();
    let mut worst_eu: f64 = 0.0;
    for d in 0..=6 {
        let phi = HolomorphicFunction::monomial(d, C64::new(1.0, 0.0));
        match apply_operator(&eu, &phi, &measure, &pts) {
            Ok(out) => {
                for (z, v) in pts.iter().zip(&out) {
                    let e = phi.eval(z);
                    worst_eu = worst_eu.max((v - e).norm() / e.norm());
                }
            }
            Err(e) => return outcome(false, format!("euclidean: {e}")),
        }
    }

    // span of the Gauss-Hermite layer has to reach past |k|t + 7√t
    let th0 = 0.3;
    let s1 = circle();
    let kernel = CircleIntegralKernel::new(t, th0, 96, 14.0, 1e-15).unwrap();
    let measure = HolomorphicMeasure::space_form(&s1, &BasePoint(vec![th0]), t, 64, 100, 1e-15).unwrap();
    let mut by_degree = [0.0f64; 7];
    for k in -6..=6i64 {
        let phi = HolomorphicFunction::Periodic(FourierFunction::mode(s1.reciprocal(), vec![k], C64::new(1.0, 0.0)));
        match apply_operator(&kernel, &phi, &measure, &pts) {
            Ok(out) => {
                for (z, v) in pts.iter().zip(&out) {
                    let e = phi.eval(z);
                    let d = k.unsigned_abs() as usize;
                    by_degree[d] = by_degree[d].max((v - e).norm() / e.norm());
                }
            }
            Err(e) => return outcome(false, format!("S1 k={k}: {e}")),
        }
    }
    let worst_s1 = by_degree.iter().copied().fold(0.0, f64::max);
    let held = by_degree.iter().take_while(|&&e| e < 1e-7).count() as i64 - 1;
    let per_degree: Vec<String> = by_degree.iter().enumerate().map(|(d, e)| format!("{d}:{e:.1e}")).collect();

    // closed form: the kernel is e^{z w̄/t} bit for bit, and the orthonormal
    // monomial expansion Σ (z w̄)^k / (k! t^k) sums to it
    let mut exact = true;
    let mut series_gap: f64 = 0.0;
    for (z, w) in pts.iter().zip(pts.iter().rev()) {
        let direct = (z[0] * w[0].conj() / t).exp();
        exact &= eu.eval(z, w) == direct;
        let mut sum = C64::new(0.0, 0.0);
        for k in 0..60 {
            let m = HolomorphicFunction::monomial(k, C64::new(1.0, 0.0));
            let norm2 = inner_qc_closed(&m, &m, &BasePoint::origin(1), t).unwrap().re;
            sum += m.eval(z) * m.eval(w).conj() / norm2;
        }
        series_gap = series_gap.max((sum - direct).norm() / direct.norm());
    }
    let pass = worst_eu < 1e-7 && worst_s1 < 1e-7 && exact && series_gap < 1e-13;
    outcome(
        pass,
        format!(
            "euclidean {worst_eu:.3e}, S1 {worst_s1:.3e} (tol 1e-7, holds through |k| <= {held}; by |k| [{}]); \
             closed form exact: {exact}, monomial series {series_gap:.3e}",
            per_degree.join(" ")
        ),
    )
}

fn c8_transform() -> Outcome {
    let s1 = circle();
    let mut exact = true;
    let mut worst_q: f64 = 0.0;
    let opts = QuadOptions::default();
    for t in [0.3, 0.7, 1.5] {
        for m in -6..=6i64 {
            let f = FourierFunction::mode(s1.reciprocal(), vec![m], C64::new(1.0, 0.0));
            let HolomorphicFunction::Periodic(psi) = sb_transform(&f, t).unwrap() else {
                return outcome(false, "transform left the periodic class".into());
            };
            let expect = (-0.5 * (m * m) as f64 * t).exp();
            exact &= psi.coeff(&[m]) == C64::new(expect, 0.0) && psi.len() == 1;
            for z in [C64::new(0.4, -1.2), C64::new(-2.0, 0.5), C64::new(3.0, 1.4)] {
                let closed = (C64::i() * m as f64 * z - 0.5 * (m * m) as f64 * t).exp();
                match sb_transform_quadrature(&f, &s1, t, &[z], &opts) {
                    Ok(q) => worst_q = worst_q.max((q - closed).norm()),
                    Err(e) => return outcome(false, format!("m={m} t={t}: {e}")),
                }
            }
        }
    }
    outcome(
        exact && worst_q < 1e-9,
        format!("coefficientwise exact: {exact}; quadrature max abs err {worst_q:.3e} (tol 1e-9)"),
    )
}

fn c9_propagator() -> Outcome {
    let one = C64::new(1.0, 0.0);
    let space = PropagatorSpace::default();
    let h = NormalSymbol::Bilinear(one);
    let req = |n: usize, time: f64, engine: Engine| SlicedPropagatorRequest {
        z_t: vec![one],
        z_0: vec![one],
        time,
        n_slices: n,
        engine,
    };
    // oracle: exp((1 − i/n)ⁿ) by the binomial expansion
    let oracle = |n: usize| {
        let x = C64::new(0.0, -1.0 / n as f64);
        let mut total = C64::new(0.0, 0.0);
        let mut binom = 1.0f64;
        for k in 0..=n {
            total += binom * x.powu(k as u32);
            binom = binom * (n - k) as f64 / (k + 1) as f64;
        }
        total.exp()
    };
    let mut closed_gap: f64 = 0.0;
    for n in [1, 2, 3, 4, 8, 16, 64, 512] {
        let g = propagate_sliced(&req(n, 1.0, Engine::GaussianClosedForm), &h, &space).unwrap();
        closed_gap = closed_gap.max((g - oracle(n)).norm());
    }
    let mut quad_gap: f64 = 0.0;
    for n in 1..=4 {
        match propagate_sliced(&req(n, 1.0, Engine::Quadrature), &h, &space) {
            Ok(q) => quad_gap = quad_gap.max((q - oracle(n)).norm()),
            Err(e) => return outcome(false, format!("quadrature n={n}: {e}")),
        }
    }
    let n_list: Vec<usize> = (3..=9).map(|k| 1usize << k).collect();
    let rows = convergence_sweep(one, one, 1.0, &n_list, Engine::GaussianClosedForm, &space).unwrap();
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let ratios_ok = ratios.len() == n_list.len() - 1 && ratios.iter().all(|r| (r - 2.0).abs() <= 0.1);
    let t0 = propagate_sliced(&req(7, 0.0, Engine::GaussianClosedForm), &h, &space).unwrap();
    let t0_exact = t0 == EuclideanKernel { t: space.t }.eval(&[one], &[one]);
    let pass = closed_gap < 1e-14 && quad_gap < 1e-7 && ratios_ok && t0_exact;
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.4}")).collect();
    outcome(
        pass,
        format!(
            "closed {closed_gap:.3e} (tol 1e-14), quadrature {quad_gap:.3e} (tol 1e-7), ratios [{}], T=0 exact: {t0_exact}",
            shown.join(", ")
        ),
    )
}

fn c10_geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let spd = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.3]);
    let charts = [
        MetricChart::flat(2),
        MetricChart::flat_sheared(),
        MetricChart::sphere(),
        MetricChart::conformal(2, 0.35),
        MetricChart::constant(spd.clone()),
    ];
    let mut j2: f64 = 0.0;
    let mut compat: f64 = 0.0;
    for chart in &charts {
        for _ in 0..100 {
            let q = if chart.name() == "sphere" {
                vec![rng.gen_range(0.4..2.7), rng.gen_range(-3.0..3.0)]
            } else {
                vec![rng.gen_range(-0.8..0.8), rng.gen_range(-3.0..3.0)]
            };
            let p = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let m = PhasePoint::new(q, p).unwrap();
            let tri = compatible_triple(chart, &m).unwrap();
            let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            j2 = j2.max(tri.j_square_defect());
            compat = compat.max(tri.compatibility_defect(&v, &w));
        }
    }
    let m = PhasePoint::new(vec![0.3, -0.4], vec![0.8, -1.1]).unwrap();
    let mut flat: f64 = 0.0;
    for chart in [MetricChart::flat(2), MetricChart::constant(spd), MetricChart::flat_sheared()] {
        let ob = bracket_obstruction(&chart, &m, &BracketOptions::default()).unwrap();
        flat = flat.max(ob.max_measured());
    }
    let sphere = PhasePoint::new(vec![PI / 4.0, 0.0], vec![1.0, 0.0]).unwrap();
    let ob = bracket_obstruction(&MetricChart::sphere(), &sphere, &BracketOptions { richardson: true }).unwrap();
    let mismatch = ob.relative_mismatch(1.0);
    let fitted = ob.fitted_scale();
    let pass = j2 < 1e-10 && compat < 1e-10 && flat < 1e-8 && mismatch < 1e-3;
    outcome(
        pass,
        format!(
            "J^2 {j2:.3e}, compatibility {compat:.3e} (tol 1e-10); flat obstruction {flat:.3e} (tol 1e-8); \
             sphere vs i R p sigma: rel mismatch {mismatch:.3e} (tol 1e-3), fitted measured/predicted = {:.6}{:+.2e}i",
            fitted.re, fitted.im
        ),
    )
}

fn c11_cross_engine() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = QuadOptions {
        gauss_nodes: 40,
        ..QuadOptions::default()
    };
    let mut failures = Vec::new();
    let mut checked = 0usize;
    let mut record = |what: &str, gap: f64, tol: f64| {
        checked += 1;
        if gap.is_nan() || gap >= tol {
            failures.push(format!("{what}: {gap:.3e} >= {tol:.0e}"));
        }
    };

    // inner products on S1 and T2, plus symmetrized functions on G2
    for spec in [circle(), torus2()] {
        for _ in 0..8 {
            let f = random_poly(&mut rng, &spec, 3, 4);
            let g = random_poly(&mut rng, &spec, 3, 4);
            let base = BasePoint((0..spec.dim).map(|_| rng.gen_range(-PI..PI)).collect());
            let t = rng.gen_range(0.5..1.5);
            match inner_q(&f, &g, &spec, &base, t, &opts) {
                Ok(v) => record("inner_q", v.discrepancy(), 1e-9),
                Err(e) => record(&format!("inner_q ({e})"), f64::NAN, 1e-9),
            }
            let (psi, phi) = (sb_transform(&f, t).unwrap(), sb_transform(&g, t).unwrap());
            match inner_qc(&psi, &phi, &spec, &base, t, &opts) {
                Ok(v) => record("inner_qc", v.discrepancy() / v.closed.norm().max(1.0), 1e-8),
                Err(e) => record(&format!("inner_qc ({e})"), f64::NAN, 1e-8),
            }
            for _ in 0..3 {
                let z: Vec<C64> = (0..spec.dim)
                    .map(|_| C64::new(rng.gen_range(-PI..PI), rng.gen_range(-1.5..1.5)))
                    .collect();
                let closed = psi.eval(&z);
                match sb_transform_quadrature(&f, &spec, t, &z, &opts) {
                    Ok(q) => record("sb_transform", (q - closed).norm() / closed.norm().max(1.0), 1e-9),
                    Err(e) => record(&format!("sb_transform ({e})"), f64::NAN, 1e-9),
                }
            }
        }
    }
    let g2 = bieberbach().into_iter().nth(1).unwrap();
    for _ in 0..4 {
        let f = symmetrize(&g2, &random_poly(&mut rng, &g2, 2, 3));
        let g = symmetrize(&g2, &random_poly(&mut rng, &g2, 2, 3));
        let base = BasePoint(vec![0.2, 0.5, -0.3]);
        let opts3 = QuadOptions {
            cell_nodes: 16,
            ..opts
        };
        match inner_q(&f, &g, &g2, &base, 0.8, &opts3) {
            Ok(v) => record("inner_q on G2", v.discrepancy(), 1e-9),
            Err(e) => record(&format!("inner_q on G2 ({e})"), f64::NAN, 1e-9),
        }
        // the integrand is Γ-invariant, so every coset image of the base point agrees
        for h in g2.holonomy_representatives() {
            let moved = BasePoint(apply(&h, &base.0).unwrap());
            let a = inner_q_closed(&f, &g, &moved, 0.8).unwrap();
            let b = inner_q_closed(&f, &g, &base, 0.8).unwrap();
            record("inner_q base-point orbit", (a - b).norm(), 1e-12);
        }
    }

    // weighted isometry: quadrature norms on both sides
    let s1 = circle();
    let rule = periodic_trapezoid(&s1.translation_basis, 64).unwrap();
    let pts: Vec<Vec<f64>> = (0..rule.len()).map(|i| rule.node(i).to_vec()).collect();
    let fs: Vec<C64> = pts.iter().map(|x| C64::new(1.0 + 0.3 * x[0].cos(), (2.0 * x[0]).sin())).collect();
    let base = BasePoint(vec![0.4]);
    let f = weighted_from_standard(&fs, &pts, &s1, &base, 0.6, 1e-14).unwrap();
    let back = standard_from_weighted(&f, &pts, &s1, &base, 0.6, 1e-14).unwrap();
    let lhs: f64 = fs.iter().map(|v| v.norm_sqr()).sum::<f64>() * rule.weight(0);
    let rhs: f64 = f
        .iter()
        .zip(&pts)
        .map(|(v, x)| v.norm_sqr() * rho_s1(x[0], 0.4, 0.6, 1e-16).unwrap())
        .sum::<f64>()
        * rule.weight(0);
    record("weighted norm", (lhs - rhs).abs(), 1e-9);
    let trip = fs.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    record("weighted round trip", trip, 1e-12);

    // Euclidean monomial norms: m! t^m against Gauss-Hermite
    let t = 0.8;
    let measure = HolomorphicMeasure::euclidean(1, t, 32).unwrap();
    for d in 0..=8 {
        let m = HolomorphicFunction::monomial(d, C64::new(1.0, 0.0));
        let closed = inner_qc_closed(&m, &m, &BasePoint::origin(1), t).unwrap().re;
        match measure.integrate(|z| m.eval(z).norm_sqr().into()) {
            Ok(q) => record("monomial norm", (q.re - closed).abs() / closed, 1e-10),
            Err(e) => record(&format!("monomial norm ({e})"), f64::NAN, 1e-10),
        }
    }

    // propagator engines
    let space = PropagatorSpace::default();
    let h = NormalSymbol::Bilinear(C64::new(1.0, 0.0));
    for (zt, z0, time) in [
        (C64::new(1.0, 0.0), C64::new(1.0, 0.0), 1.0),
        (C64::new(0.5, -1.2), C64::new(-0.3, 0.8), 0.5),
        (C64::new(1.4, 1.4), C64::new(0.0, -2.0), 1.0),
    ] {
        for n in 1..=4 {
            let req = |engine| SlicedPropagatorRequest {
                z_t: vec![zt],
                z_0: vec![z0],
                time,
                n_slices: n,
                engine,
            };
            let c = propagate_sliced(&req(Engine::GaussianClosedForm), &h, &space).unwrap();
            match propagate_sliced(&req(Engine::Quadrature), &h, &space) {
                Ok(q) => record("propagator engines", (q - c).norm() / c.norm().max(1.0), 1e-7),
                Err(e) => record(&format!("propagator engines ({e})"), f64::NAN, 1e-7),
            }
        }
    }

    let pass = failures.is_empty();
    let detail = if pass {
        format!("{checked} dual quantities agree within module tolerances")
    } else {
        format!("{} of {checked} diverge: {}", failures.len(), failures.join("; "))
    };
    outcome(pass, detail)
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("heat-kernel normalization", c1_normalization),
        ("heat-equation residual", c2_heat_equation),
        ("semigroup identity", c3_semigroup),
        ("group invariance", c4_invariance),
        ("S1 kernel vs wrapped Gaussian", c5_wrapped_gaussian),
        ("isometry", c6_isometry),
        ("reproducing property", c7_reproducing),
        ("transform closed form", c8_transform),
        ("propagator convergence", c9_propagator),
        ("geometry", c10_geometry),
        ("cross-engine master check", c11_cross_engine),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} [{}] {name}: {} ({:.1}s)",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
