//! The weighted space `L²(Q, ρ_t^{x₀})`, the holomorphic space
//! `HL²(Q_ℂ, ν_{t/2}^{x₀})`, the transform between them, reproducing kernels
//! and the integral-kernel calculus of operators.
//!
//! Every quantity with a closed coefficient form also has a quadrature
//! realization; [`DualValue`] carries both so callers can cross-check them.
//! Integrals over a quotient with holonomy order `m` are taken over the
//! translation cell and divided by `m`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{require_dim, require_positive, Error, Result};
use crate::fourier::{grid_points, FourierFunction, HolomorphicFunction};
use crate::heatkernel::LatticeKernel;
use crate::lattice::{enumerate_shell, LatticePoint, ReciprocalLattice};
use crate::quadrature::{gauss_hermite, gaussian_mode_error, periodic_trapezoid, QuadratureRule};
use crate::spaceform::SpaceFormSpec;

type C64 = Complex64;

const CHUNK: usize = 1024;

/// Base point `x₀` of the weighted measures.
#[derive(Debug, Clone, PartialEq)]
pub struct BasePoint(pub Vec<f64>);

impl BasePoint {
    pub fn origin(dim: usize) -> Self {
        BasePoint(vec![0.0; dim])
    }

    pub fn as_complex(&self) -> Vec<C64> {
        self.0.iter().map(|&v| C64::new(v, 0.0)).collect()
    }
}

/// Quadrature resolution and tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub cell_nodes: usize,
    pub gauss_nodes: usize,
    /// Absolute truncation tolerance of the lattice-sum kernels.
    pub kernel_tol: f64,
    /// Largest accepted relative error estimate of a quadrature.
    pub sentinel_tol: f64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            cell_nodes: crate::quadrature::DEFAULT_CELL_NODES,
            gauss_nodes: crate::quadrature::DEFAULT_GAUSS_NODES,
            kernel_tol: 1e-14,
            sentinel_tol: 1e-10,
        }
    }
}

/// A value computed by its closed coefficient form and by quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualValue {
    pub closed: C64,
    pub quadrature: C64,
}

impl DualValue {
    pub fn discrepancy(&self) -> f64 {
        (self.closed - self.quadrature).norm()
    }
}

fn same_lattice(spec: &SpaceFormSpec, recip: &ReciprocalLattice) -> Result<()> {
    require_dim(spec.dim, recip.dim())?;
    let own = spec.reciprocal();
    let diff = (own.matrix() - recip.matrix()).amax();
    if diff > 1e-9 * own.matrix().amax() {
        return Err(Error::InvalidParameter {
            name: "function",
            reason: "Fourier function lives on a different lattice than the space form".into(),
        });
    }
    Ok(())
}

fn index_diff(a: &[i64], b: &[i64]) -> Vec<i64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Worst relative aliasing of the `N`-point periodic trapezoid for integrands
/// `e^{iD·x}·κ(x)`, where `κ` has reciprocal coefficients bounded by
/// `e^{−|M|²s/2 + |M|b}` and `D` ranges over `diffs`.
fn trapezoid_alias_estimate(
    recip: &ReciprocalLattice,
    nodes: usize,
    diffs: &[Vec<i64>],
    s: f64,
    b: f64,
) -> f64 {
    let n = recip.dim();
    let mut worst: f64 = 0.0;
    for d in diffs {
        let reach = d.iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0) / nodes.max(1) + 1;
        let side = 2 * reach + 1;
        let count = side.pow(n as u32);
        let mut total = 0.0;
        for flat in 0..count {
            let mut rem = flat;
            let j: Vec<i64> = (0..n)
                .map(|_| {
                    let v = (rem % side) as i64 - reach as i64;
                    rem /= side;
                    v
                })
                .collect();
            if j.iter().all(|&v| v == 0) {
                continue;
            }
            let m: Vec<i64> = j.iter().zip(d).map(|(ji, di)| nodes as i64 * ji - di).collect();
            let p = recip.point(&m);
            total += (-0.5 * p.norm2 * s + p.norm() * b).exp();
        }
        worst = worst.max(total);
    }
    worst
}

fn distinct_diffs(f: &FourierFunction, g: &FourierFunction) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = f
        .indexed()
        .flat_map(|(k, _)| g.indexed().map(move |(l, _)| index_diff(l, k)))
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Closed coefficient form of `⟨f, g⟩_Q = ∫_Q f̄ g ρ_t^{x₀} dx`:
/// `Σ c̄_K d_{K'} e^{i(K'−K)·x₀} e^{−|K'−K|²t/2}`.
pub fn inner_q_closed(f: &FourierFunction, g: &FourierFunction, base: &BasePoint, t: f64) -> Result<C64> {
    require_positive("t", t)?;
    require_dim(f.dim(), g.dim())?;
    require_dim(f.dim(), base.0.len())?;
    let mut s = C64::new(0.0, 0.0);
    for (k, c) in f.terms() {
        for (l, d) in g.terms() {
            let diff: Vec<f64> = l.vector.iter().zip(&k.vector).map(|(a, b)| a - b).collect();
            let d2: f64 = diff.iter().map(|v| v * v).sum();
            let phase: f64 = diff.iter().zip(&base.0).map(|(a, b)| a * b).sum();
            s += c.conj() * d * C64::from_polar((-0.5 * d2 * t).exp(), phase);
        }
    }
    Ok(s)
}

/// `⟨f, g⟩_Q` by its closed form and by periodic-trapezoid quadrature.
pub fn inner_q(
    f: &FourierFunction,
    g: &FourierFunction,
    spec: &SpaceFormSpec,
    base: &BasePoint,
    t: f64,
    opts: &QuadOptions,
) -> Result<DualValue> {
    same_lattice(spec, f.recip())?;
    same_lattice(spec, g.recip())?;
    let closed = inner_q_closed(f, g, base, t)?;
    let recip = spec.reciprocal();
    let alias = trapezoid_alias_estimate(&recip, opts.cell_nodes, &distinct_diffs(f, g), t, 0.0);
    if alias > opts.sentinel_tol {
        return Err(Error::UnderResolved {
            what: "cell trapezoid (inner product on Q)",
            estimate: alias,
            tol: opts.sentinel_tol,
        });
    }
    let rule = periodic_trapezoid(&spec.translation_basis, opts.cell_nodes)?;
    let kernel = LatticeKernel::new(spec, t, opts.kernel_tol, 0.0)?;
    let m = spec.holonomy_order as f64;
    let quadrature = rule.integrate(|x| f.eval(x).conj() * g.eval(x) * kernel.eval_real(x, &base.0)) / m;
    Ok(DualValue { closed, quadrature })
}

/// Closed coefficient form of `⟨ψ, φ⟩_{Q_ℂ} = ∫ ψ̄ φ ν_{t/2}^{x₀} dz`.
///
/// For periodic functions `Σ ā_K b_{K'} e^{i(K'−K)·x₀} e^{−|K−K'|²t/4 + |K+K'|²t/4}`;
/// for polynomials on ℂ (Segal–Bargmann, base at the origin)
/// `Σ ā_m b_m m! t^m`.
pub fn inner_qc_closed(psi: &HolomorphicFunction, phi: &HolomorphicFunction, base: &BasePoint, t: f64) -> Result<C64> {
    require_positive("t", t)?;
    match (psi, phi) {
        (HolomorphicFunction::Periodic(a), HolomorphicFunction::Periodic(b)) => {
            require_dim(a.dim(), b.dim())?;
            require_dim(a.dim(), base.0.len())?;
            let mut s = C64::new(0.0, 0.0);
            for (k, ca) in a.terms() {
                for (l, cb) in b.terms() {
                    let mut minus = 0.0;
                    let mut plus = 0.0;
                    let mut phase = 0.0;
                    for d in 0..k.vector.len() {
                        let (kd, ld) = (k.vector[d], l.vector[d]);
                        minus += (kd - ld) * (kd - ld);
                        plus += (kd + ld) * (kd + ld);
                        phase += (ld - kd) * base.0[d];
                    }
                    if ca.norm() == 0.0 || cb.norm() == 0.0 {
                        continue;
                    }
                    // magnitude in log form: e^{K·L t} overflows where the coefficients underflow
                    let mag = (ca.norm().ln() + cb.norm().ln() + (plus - minus) * t / 4.0).exp();
                    s += C64::from_polar(mag, phase + cb.arg() - ca.arg());
                }
            }
            Ok(s)
        }
        (HolomorphicFunction::Polynomial(a), HolomorphicFunction::Polynomial(b)) => {
            if base.0.iter().any(|&v| v != 0.0) {
                return Err(Error::InvalidParameter {
                    name: "base",
                    reason: "the polynomial closed form assumes the measure centred at the origin".into(),
                });
            }
            let mut s = C64::new(0.0, 0.0);
            let mut norm = 1.0; // m! t^m
            for m in 0..a.len().min(b.len()) {
                if m > 0 {
                    norm *= m as f64 * t;
                }
                s += a[m].conj() * b[m] * norm;
            }
            Ok(s)
        }
        _ => Err(Error::InvalidParameter {
            name: "function",
            reason: "cannot pair a periodic function with a polynomial".into(),
        }),
    }
}

/// Per-coordinate Gauss–Hermite relative error for the growth vector `a`.
fn gaussian_error_for(t: f64, nodes: usize, a: &[f64]) -> f64 {
    a.iter().map(|&ad| gaussian_mode_error(t, nodes, ad.abs())).sum()
}

/// `⟨ψ, φ⟩_{Q_ℂ}` by its closed form and by product quadrature over
/// `Q × ℝⁿ`.
pub fn inner_qc(
    psi: &HolomorphicFunction,
    phi: &HolomorphicFunction,
    spec: &SpaceFormSpec,
    base: &BasePoint,
    t: f64,
    opts: &QuadOptions,
) -> Result<DualValue> {
    let closed = inner_qc_closed(psi, phi, base, t)?;
    let (a, b) = match (psi, phi) {
        (HolomorphicFunction::Periodic(a), HolomorphicFunction::Periodic(b)) => (a, b),
        _ => {
            return Err(Error::InvalidParameter {
                name: "function",
                reason: "space-form quadrature needs periodic functions".into(),
            })
        }
    };
    same_lattice(spec, a.recip())?;
    same_lattice(spec, b.recip())?;
    let recip = spec.reciprocal();
    let alias = trapezoid_alias_estimate(&recip, opts.cell_nodes, &distinct_diffs(a, b), t / 2.0, 0.0);
    let mut gauss = 0.0f64;
    for (k, _) in a.terms() {
        for (l, _) in b.terms() {
            let sum: Vec<f64> = k.vector.iter().zip(&l.vector).map(|(x, y)| x + y).collect();
            gauss = gauss.max(gaussian_error_for(t, opts.gauss_nodes, &sum));
        }
    }
    if alias > opts.sentinel_tol {
        return Err(Error::UnderResolved {
            what: "cell trapezoid (holomorphic inner product)",
            estimate: alias,
            tol: opts.sentinel_tol,
        });
    }
    if gauss > opts.sentinel_tol {
        return Err(Error::UnderResolved {
            what: "Gauss-Hermite order for the support's largest |K+K'|",
            estimate: gauss,
            tol: opts.sentinel_tol,
        });
    }
    let measure = HolomorphicMeasure::space_form(spec, base, t, opts.cell_nodes, opts.gauss_nodes, opts.kernel_tol)?;
    let quadrature = measure.integrate_unchecked(|z| psi.eval(z).conj() * phi.eval(z));
    Ok(DualValue { closed, quadrature })
}

/// `𝒜_t f(z) = ∫_Q ρ_t^z(x) f(x) dx`, which maps `c_K e^{iK·x}` to
/// `c_K e^{−K²t/2} e^{iK·z}`.
pub fn sb_transform(f: &FourierFunction, t: f64) -> Result<HolomorphicFunction> {
    require_positive("t", t)?;
    Ok(HolomorphicFunction::Periodic(
        f.map_coeffs(|k, c| c * (-0.5 * k.norm2 * t).exp()),
    ))
}

/// Quadrature realization of `𝒜_t f(z)` at one point.
pub fn sb_transform_quadrature(
    f: &FourierFunction,
    spec: &SpaceFormSpec,
    t: f64,
    z: &[C64],
    opts: &QuadOptions,
) -> Result<C64> {
    same_lattice(spec, f.recip())?;
    require_dim(spec.dim, z.len())?;
    let imag = z.iter().map(|v| v.im * v.im).sum::<f64>().sqrt();
    let recip = spec.reciprocal();
    let diffs: Vec<Vec<i64>> = f.indexed().map(|(k, _)| k.iter().map(|v| -v).collect()).collect();
    let alias = trapezoid_alias_estimate(&recip, opts.cell_nodes, &diffs, t, imag);
    if alias > opts.sentinel_tol {
        return Err(Error::UnderResolved {
            what: "cell trapezoid (transform)",
            estimate: alias,
            tol: opts.sentinel_tol,
        });
    }
    let rule = periodic_trapezoid(&spec.translation_basis, opts.cell_nodes)?;
    let kernel = LatticeKernel::new(spec, t, opts.kernel_tol, imag)?;
    let m = spec.holonomy_order as f64;
    Ok(rule.integrate(|x| kernel.eval_continued(x, z) * f.eval(x)) / m)
}

/// `f = f_S / √ρ_t^{x₀}` at the given points.
pub fn weighted_from_standard(
    values: &[C64],
    points: &[Vec<f64>],
    spec: &SpaceFormSpec,
    base: &BasePoint,
    t: f64,
    tol: f64,
) -> Result<Vec<C64>> {
    iso_map(values, points, spec, base, t, tol, -0.5)
}

/// Inverse of [`weighted_from_standard`]: `f_S = f·√ρ_t^{x₀}`.
pub fn standard_from_weighted(
    values: &[C64],
    points: &[Vec<f64>],
    spec: &SpaceFormSpec,
    base: &BasePoint,
    t: f64,
    tol: f64,
) -> Result<Vec<C64>> {
    iso_map(values, points, spec, base, t, tol, 0.5)
}

fn iso_map(
    values: &[C64],
    points: &[Vec<f64>],
    spec: &SpaceFormSpec,
    base: &BasePoint,
    t: f64,
    tol: f64,
    power: f64,
) -> Result<Vec<C64>> {
    require_dim(values.len(), points.len())?;
    let kernel = LatticeKernel::new(spec, t, tol, 0.0)?;
    values
        .iter()
        .zip(points)
        .map(|(v, x)| {
            let rho = kernel.eval_real(x, &base.0);
            if rho <= 1e3 * tol || !rho.is_finite() {
                return Err(Error::VanishingWeight { value: rho });
            }
            Ok(v * rho.powf(power))
        })
        .collect()
}

/// Discretized `ν_{t/2}^{x₀} dz` on `Q_ℂ` (or on ℂⁿ for the Segal–Bargmann
/// space): complex nodes with weights that already contain the density.
#[derive(Debug, Clone)]
pub struct HolomorphicMeasure {
    dim: usize,
    points: Vec<C64>,
    weights: Vec<f64>,
    /// Node sits on the outermost Gauss–Hermite layer of some coordinate.
    outer: Vec<bool>,
    sentinel_tol: f64,
}

impl HolomorphicMeasure {
    /// `(πt)^{-n} e^{-|z|²/t}` on ℂⁿ, Gauss–Hermite in all `2n` real
    /// coordinates.
    pub fn euclidean(dim: usize, t: f64, nodes_per_dim: usize) -> Result<Self> {
        require_positive("t", t)?;
        if nodes_per_dim < 2 {
            return Err(Error::InvalidParameter {
                name: "quad.gauss_nodes",
                reason: "need at least two nodes".into(),
            });
        }
        let (u, wu) = gauss_hermite(nodes_per_dim);
        let s = t.sqrt();
        let coords = 2 * dim;
        let total = nodes_per_dim.pow(coords as u32);
        let mut points = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        let mut outer = Vec::with_capacity(total);
        let mut idx = vec![0usize; coords];
        for _ in 0..total {
            let mut w = 1.0;
            let mut edge = false;
            for d in 0..dim {
                let (ix, iy) = (idx[2 * d], idx[2 * d + 1]);
                points.push(C64::new(u[ix] * s, u[iy] * s));
                w *= wu[ix] * wu[iy] / PI;
                edge |= ix == 0 || iy == 0 || ix == nodes_per_dim - 1 || iy == nodes_per_dim - 1;
            }
            weights.push(w);
            outer.push(edge);
            for c in idx.iter_mut() {
                *c += 1;
                if *c < nodes_per_dim {
                    break;
                }
                *c = 0;
            }
        }
        Ok(Self {
            dim,
            points,
            weights,
            outer,
            sentinel_tol: 1e-10,
        })
    }

    /// `ν_{t/2}^{x₀}` on `Q_ℂ`: cell trapezoid weighted by `ρ_{t/2}^{x₀}/m`
    /// times Gauss–Hermite for `(πt)^{-n/2} e^{-|y|²/t}`.
    pub fn space_form(
        spec: &SpaceFormSpec,
        base: &BasePoint,
        t: f64,
        cell_nodes: usize,
        gauss_nodes: usize,
        kernel_tol: f64,
    ) -> Result<Self> {
        require_positive("t", t)?;
        require_dim(spec.dim, base.0.len())?;
        let n = spec.dim;
        let cell: QuadratureRule = periodic_trapezoid(&spec.translation_basis, cell_nodes)?;
        let kernel = LatticeKernel::new(spec, t / 2.0, kernel_tol, 0.0)?;
        let (u, wu) = gauss_hermite(gauss_nodes);
        let s = t.sqrt();
        let m = spec.holonomy_order as f64;
        let ytotal = gauss_nodes.pow(n as u32);
        let mut points = Vec::with_capacity(cell.len() * ytotal * n);
        let mut weights = Vec::with_capacity(cell.len() * ytotal);
        let mut outer = Vec::with_capacity(cell.len() * ytotal);
        for i in 0..cell.len() {
            let x = cell.node(i);
            let wx = cell.weight(i) * kernel.eval_real(x, &base.0) / m;
            let mut idx = vec![0usize; n];
            for _ in 0..ytotal {
                let mut w = wx;
                let mut edge = false;
                for d in 0..n {
                    points.push(C64::new(x[d], u[idx[d]] * s));
                    w *= wu[idx[d]] / PI.sqrt();
                    edge |= idx[d] == 0 || idx[d] == gauss_nodes - 1;
                }
                weights.push(w);
                outer.push(edge);
                for c in idx.iter_mut() {
                    *c += 1;
                    if *c < gauss_nodes {
                        break;
                    }
                    *c = 0;
                }
            }
        }
        Ok(Self {
            dim: n,
            points,
            weights,
            outer,
            sentinel_tol: 1e-10,
        })
    }

    pub fn with_sentinel_tol(mut self, tol: f64) -> Self {
        self.sentinel_tol = tol;
        self
    }

    /// Drops nodes with `|z| > radius` (their Gaussian weight is below the
    /// tail bound the caller chose the radius for).
    pub fn truncate_to_disk(mut self, radius: f64) -> Self {
        let keep: Vec<bool> = (0..self.len())
            .map(|i| self.point(i).iter().map(|z| z.norm_sqr()).sum::<f64>() <= radius * radius)
            .collect();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut outer = Vec::new();
        for (i, k) in keep.iter().enumerate() {
            if *k {
                points.extend_from_slice(self.point(i));
                weights.push(self.weights[i]);
                outer.push(self.outer[i]);
            }
        }
        self.points = points;
        self.weights = weights;
        self.outer = outer;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[C64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Σ wᵢ f(zᵢ)` without the resolution check.
    pub fn integrate_unchecked<F>(&self, f: F) -> C64
    where
        F: Fn(&[C64]) -> C64 + Sync,
    {
        self.integrate_with_tail(f).0
    }

    /// `Σ wᵢ f(zᵢ)`, failing when the outermost Gauss–Hermite layer carries
    /// more than the sentinel fraction of `Σ |wᵢ f(zᵢ)|` (the integrand has
    /// not decayed inside the node span).
    pub fn integrate<F>(&self, f: F) -> Result<C64>
    where
        F: Fn(&[C64]) -> C64 + Sync,
    {
        let (value, tail) = self.integrate_with_tail(f);
        if tail > self.sentinel_tol {
            return Err(Error::UnderResolved {
                what: "holomorphic-measure quadrature (outer-layer mass)",
                estimate: tail,
                tol: self.sentinel_tol,
            });
        }
        Ok(value)
    }

    fn integrate_with_tail<F>(&self, f: F) -> (C64, f64)
    where
        F: Fn(&[C64]) -> C64 + Sync,
    {
        let idx: Vec<usize> = (0..self.len()).collect();
        let partials: Vec<(C64, f64, f64)> = idx
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut s = C64::new(0.0, 0.0);
                let mut mass = 0.0;
                let mut edge = 0.0;
                for &i in chunk {
                    let v = f(self.point(i)) * self.weights[i];
                    s += v;
                    let a = v.norm();
                    mass += a;
                    if self.outer[i] {
                        edge += a;
                    }
                }
                (s, mass, edge)
            })
            .collect();
        let (s, mass, edge) = partials
            .into_iter()
            .fold((C64::new(0.0, 0.0), 0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1, acc.2 + p.2));
        let tail = if mass > 0.0 { edge / mass } else { 0.0 };
        (s, tail)
    }
}

/// Integral kernel `K_A(z, w̄)` of an operator on a holomorphic space.
/// `eval(z, w)` receives `w` itself; the kernel is antiholomorphic in it.
pub trait OperatorKernel: Send + Sync {
    fn eval(&self, z: &[C64], w: &[C64]) -> C64;
}

impl<F> OperatorKernel for F
where
    F: Fn(&[C64], &[C64]) -> C64 + Send + Sync,
{
    fn eval(&self, z: &[C64], w: &[C64]) -> C64 {
        self(z, w)
    }
}

pub type SharedKernel = Arc<dyn OperatorKernel>;

/// The zero operator.
pub fn zero_kernel() -> SharedKernel {
    Arc::new(|_: &[C64], _: &[C64]| C64::new(0.0, 0.0))
}

/// `e^{z·w̄/t}`, the Segal–Bargmann reproducing kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EuclideanKernel {
    pub t: f64,
}

impl OperatorKernel for EuclideanKernel {
    fn eval(&self, z: &[C64], w: &[C64]) -> C64 {
        let s: C64 = z.iter().zip(w).map(|(a, b)| a * b.conj()).sum();
        (s / self.t).exp()
    }
}

/// Circle kernel `K(z, w̄) = ∫ ρ_t^z(x) ρ_t^{w̄}(x) / ρ_t^{θ₀}(x) dx`,
/// evaluated by a periodic trapezoid in `x`.
#[derive(Debug, Clone)]
pub struct CircleIntegralKernel {
    t: f64,
    nodes: Vec<f64>,
    /// trapezoid weight divided by `ρ_t^{θ₀}` at each node
    weights: Vec<f64>,
    /// `m_s = Σⱼ wⱼ e^{isxⱼ}` for `|s| ≤ moments.len() / 2`
    moments: Vec<C64>,
    tol: f64,
}

impl CircleIntegralKernel {
    /// `strip` bounds the `|Im z|`, `|Im w|` for which the node moments are
    /// precomputed; points outside it compute the missing ones on the fly.
    pub fn new(t: f64, theta0: f64, nodes: usize, strip: f64, tol: f64) -> Result<Self> {
        require_positive("t", t)?;
        require_positive("tol", tol)?;
        let spec = crate::spaceform::make_space_form(
            crate::spaceform::Family::Circle,
            &crate::spaceform::CellParams::default(),
        )?;
        let rule = periodic_trapezoid(&spec.translation_basis, nodes)?;
        let mut xs = Vec::with_capacity(nodes);
        let mut ws = Vec::with_capacity(nodes);
        for i in 0..rule.len() {
            let x = rule.node(i)[0];
            // 1/ρ needs relative accuracy where ρ is far below `tol`
            let r = crate::heatkernel::rho_s1(x, theta0, t, 1e-30)?;
            if r <= 0.0 {
                return Err(Error::VanishingWeight { value: r });
            }
            xs.push(x);
            ws.push(rule.weight(i) / r);
        }
        let mut out = Self {
            t,
            nodes: xs,
            weights: ws,
            moments: Vec::new(),
            tol,
        };
        let smax = 2 * out.cutoff(strip.abs());
        out.moments = (-smax..=smax).map(|s| out.moment(s)).collect();
        Ok(out)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Largest `|k|` kept in the continued kernel at `|Im| = y`.
    fn cutoff(&self, y: f64) -> i64 {
        ((y + (2.0 * self.t * (1.0 / self.tol).ln()).sqrt()) / self.t).ceil() as i64 + 1
    }

    fn moment(&self, s: i64) -> C64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| C64::from_polar(w, s as f64 * x))
            .sum()
    }

    /// Coefficients of `ρ_t^ζ(x) = (1/2π) Σ_k e^{ik(x−ζ) − k²t/2}`.
    fn continued_coeffs(&self, zeta: C64, kmax: i64) -> Vec<C64> {
        (-kmax..=kmax)
            .map(|k| {
                let k = k as f64;
                (-C64::i() * k * zeta - 0.5 * k * k * self.t).exp() / (2.0 * PI)
            })
            .collect()
    }
}

impl OperatorKernel for CircleIntegralKernel {
    fn eval(&self, z: &[C64], w: &[C64]) -> C64 {
        let wbar = w[0].conj();
        let (kz, kw) = (self.cutoff(z[0].im.abs()), self.cutoff(w[0].im.abs()));
        let a = self.continued_coeffs(z[0], kz);
        let b = self.continued_coeffs(wbar, kw);
        let smax = kz + kw;
        let half = (self.moments.len() / 2) as i64;
        let fresh: Vec<C64> = if smax > half {
            (-smax..=smax).map(|s| self.moment(s)).collect()
        } else {
            Vec::new()
        };
        let m = |s: i64| {
            if fresh.is_empty() {
                self.moments[(s + half) as usize]
            } else {
                fresh[(s + smax) as usize]
            }
        };
        let mut total = C64::new(0.0, 0.0);
        for (i, ak) in a.iter().enumerate() {
            let mut inner = C64::new(0.0, 0.0);
            for (j, bl) in b.iter().enumerate() {
                inner += bl * m(i as i64 - kz + j as i64 - kw);
            }
            total += ak * inner;
        }
        total
    }
}

/// Options for the basis-sum reproducing kernel of a general space form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisOptions {
    /// Largest `|K|` of the invariant exponentials fed into the basis.
    pub max_radius: f64,
    /// Grid nodes per dimension for the coefficients of `1/√ρ`.
    pub grid_nodes: usize,
    /// `|Im z|` of the probe points used for the convergence test.
    pub strip: f64,
    /// Relative size of the last shell below which the sum is accepted.
    pub converge_tol: f64,
    pub kernel_tol: f64,
    /// Coefficients of each basis function below this fraction of its peak
    /// are dropped. Fine for evaluation in the strip; set to 0 when the
    /// functions' own norms matter, since a dropped `c_K` weighs `e^{|K|²t/2}`.
    pub coefficient_floor: f64,
}

impl Default for BasisOptions {
    fn default() -> Self {
        Self {
            max_radius: 60.0,
            grid_nodes: 256,
            strip: 1.0,
            converge_tol: 1e-10,
            kernel_tol: 1e-15,
            coefficient_floor: 1e-20,
        }
    }
}

/// `K(z, w̄) = Σᵢ uᵢ(z) conj(uᵢ(w))` over the orthonormal functions obtained
/// by sending Γ-symmetrized exponentials through `f_S ↦ f_S/√ρ` and `𝒜_t`,
/// then re-orthonormalizing.
#[derive(Debug, Clone)]
pub struct BasisSumKernel {
    basis: Vec<FourierFunction>,
    shells_used: usize,
    last_increment: f64,
    /// union of the basis supports
    modes: Vec<Vec<f64>>,
    /// `basis.len() × modes.len()`, row-major
    dense: Vec<C64>,
}

impl BasisSumKernel {
    pub fn new(spec: &SpaceFormSpec, base: &BasePoint, t: f64, opts: &BasisOptions) -> Result<Self> {
        require_positive("t", t)?;
        require_dim(spec.dim, base.0.len())?;
        let recip = spec.reciprocal();
        let n = spec.dim;

        // Fourier coefficients of 1/√ρ_t^{x₀}
        let grid = grid_points(&spec.translation_basis, opts.grid_nodes);
        let rho = LatticeKernel::new(spec, t, opts.kernel_tol, 0.0)?;
        let mut samples = Vec::with_capacity(grid.len());
        for x in &grid {
            let r = rho.eval_real(x, &base.0);
            if r <= 0.0 {
                return Err(Error::VanishingWeight { value: r });
            }
            samples.push(C64::new(r.powf(-0.5), 0.0));
        }
        let nyquist = (opts.grid_nodes / 2) as f64 * recip.sigma_min() * 0.999;
        let modes = enumerate_shell(&recip, nyquist);
        let mut inv_sqrt = FourierFunction::from_grid_samples(
            &spec.translation_basis,
            &recip,
            opts.grid_nodes,
            &samples,
            &modes,
        );
        let peak = inv_sqrt.terms().map(|(_, c)| c.norm()).fold(0.0, f64::max);
        inv_sqrt.prune(peak * 1e-17);
        let inv_terms: Vec<(Vec<i64>, C64)> = inv_sqrt.indexed().map(|(k, c)| (k.clone(), *c)).collect();

        let reps = spec.holonomy_representatives();
        let shell = enumerate_shell(&recip, opts.max_radius);
        let stencil: Vec<(Vec<i64>, C64)> = gram_stencil(&recip, t)
            .into_iter()
            .map(|(d, w)| {
                let phase = -d.dot(&base.0);
                (d.index, C64::from_polar(w, phase))
            })
            .collect();

        let coord = |idx: &[i64]| idx.iter().map(|v| v.abs()).max().unwrap_or(0);
        let bound = shell.iter().map(|p| coord(&p.index)).max().unwrap_or(0)
            + inv_terms.iter().map(|(k, _)| coord(k)).max().unwrap_or(0)
            + stencil.iter().map(|(d, _)| coord(d)).max().unwrap_or(0)
            + 1;
        let ibox = IndexBox::new(n, bound)?;

        // group shell points into radius shells
        let mut shells: Vec<Vec<&LatticePoint>> = Vec::new();
        let mut last = -1.0;
        for p in &shell {
            if (p.norm() - last).abs() > 1e-9 {
                shells.push(Vec::new());
                last = p.norm();
            }
            shells.last_mut().expect("pushed").push(p);
        }

        // probes along the cell diagonal at three heights
        let mut probes: Vec<Vec<C64>> = Vec::new();
        for j in 0..5 {
            let shift = spec.translation_basis.to_cartesian(&vec![j as f64 / 5.0; n]);
            for y in [-opts.strip, 0.0, opts.strip] {
                probes.push(
                    base.0
                        .iter()
                        .zip(&shift)
                        .map(|(&x, &d)| C64::new(x + d, y / (n as f64).sqrt()))
                        .collect(),
                );
            }
        }

        let stencil_offsets: Vec<(isize, C64)> = stencil.iter().map(|(d, w)| (ibox.offset(d), *w)).collect();
        let mut g = Scratch::new(ibox.len());
        let mut gg = Scratch::new(ibox.len());
        // orthonormal vectors and their Gram images
        let mut ortho: Vec<(SparseVec, SparseVec)> = Vec::new();
        let mut basis = Vec::new();
        let mut diag = vec![0.0; probes.len()];
        let mut seen = std::collections::HashSet::new();
        let mut increment = f64::INFINITY;
        let mut shells_used = 0;
        for pts in &shells {
            let mut shell_diag = vec![0.0; probes.len()];
            for p in pts {
                if seen.contains(&p.index) {
                    continue;
                }
                // Γ-symmetrized exponential Σ_h e^{iK·a_h} e^{i(A_hᵀK)·x}
                let mut sym = FourierFunction::zero(recip.clone());
                for h in &reps {
                    let at = h.rotation().transpose();
                    let image: Vec<f64> = (0..n)
                        .map(|i| (0..n).map(|j| at[(i, j)] * p.vector[j]).sum())
                        .collect();
                    let idx = recip
                        .locate(&image, 1e-8 * recip.matrix().amax())
                        .expect("holonomy preserves the lattice");
                    seen.insert(idx.clone());
                    let phase = C64::from_polar(1.0, p.dot(h.translation()));
                    let prev = sym.coeff(&idx);
                    sym.set(idx, prev + phase);
                }
                sym.prune(1e-12);
                if sym.is_empty() {
                    continue;
                }
                // divide by √ρ: convolve with the coefficients of 1/√ρ
                for (k, ck) in sym.indexed() {
                    let base_pos = ibox.pos(k);
                    for (r, cr) in &inv_terms {
                        g.add((base_pos as isize + ibox.offset(r)) as usize, ck * cr);
                    }
                }
                // modified Gram–Schmidt in ⟨·,·⟩_Q (equal to ⟨𝒜·,𝒜·⟩_{Q_ℂ}), two passes
                for _ in 0..2 {
                    for (q, gq) in &ortho {
                        let proj: C64 = gq.pos.iter().zip(&gq.val).map(|(&i, v)| v.conj() * g.data[i]).sum();
                        for (&i, v) in q.pos.iter().zip(&q.val) {
                            g.add(i, -proj * v);
                        }
                    }
                }
                for &i in &g.touched {
                    let v = g.data[i];
                    if v == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for (off, w) in &stencil_offsets {
                        gg.add((i as isize + off) as usize, v * w);
                    }
                }
                let norm2: f64 = g.touched_unique().map(|i| (gg.data[i].conj() * g.data[i]).re).sum();
                if norm2 > 1e-24 {
                    let inv = 1.0 / norm2.sqrt();
                    let q = g.to_sparse(inv);
                    let gq = gg.to_sparse(inv);
                    let mut u = FourierFunction::zero(recip.clone());
                    for (&i, v) in q.pos.iter().zip(&q.val) {
                        let idx = ibox.index(i);
                        let decay = (-0.5 * recip.point(&idx).norm2 * t).exp();
                        u.set(idx, v * decay);
                    }
                    let upeak = u.terms().map(|(_, c)| c.norm()).fold(0.0, f64::max);
                    u.prune(upeak * opts.coefficient_floor);
                    for (j, z) in probes.iter().enumerate() {
                        shell_diag[j] += u.eval_complex(z).norm_sqr();
                    }
                    basis.push(u);
                    ortho.push((q, gq));
                }
                g.clear();
                gg.clear();
            }
            shells_used += 1;
            for j in 0..probes.len() {
                diag[j] += shell_diag[j];
            }
            increment = shell_diag
                .iter()
                .zip(&diag)
                .map(|(s, d)| if *d > 0.0 { s / d } else { 0.0 })
                .fold(0.0, f64::max);
            if basis.len() > 1 && increment < opts.converge_tol {
                return Ok(Self::assemble(basis, shells_used, increment));
            }
        }
        Err(Error::NotConverged {
            what: "basis-sum reproducing kernel",
            last: increment,
            target: opts.converge_tol,
        })
    }

    fn assemble(basis: Vec<FourierFunction>, shells_used: usize, last_increment: f64) -> Self {
        let mut slot = std::collections::HashMap::new();
        let mut modes = Vec::new();
        for u in &basis {
            for (k, _) in u.terms() {
                slot.entry(k.index.clone()).or_insert_with(|| {
                    modes.push(k.vector.clone());
                    modes.len() - 1
                });
            }
        }
        let mut dense = vec![C64::new(0.0, 0.0); basis.len() * modes.len()];
        for (i, u) in basis.iter().enumerate() {
            for (k, c) in u.terms() {
                dense[i * modes.len() + slot[&k.index]] = c;
            }
        }
        Self {
            basis,
            shells_used,
            last_increment,
            modes,
            dense,
        }
    }

    /// Values of every basis function at `z`.
    pub fn basis_values(&self, z: &[C64]) -> Vec<C64> {
        let waves: Vec<C64> = self
            .modes
            .iter()
            .map(|k| (C64::i() * k.iter().zip(z).map(|(kv, zv)| zv * *kv).sum::<C64>()).exp())
            .collect();
        self.dense
            .chunks(self.modes.len().max(1))
            .take(self.basis.len())
            .map(|row| row.iter().zip(&waves).map(|(c, e)| c * e).sum())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn shells_used(&self) -> usize {
        self.shells_used
    }

    pub fn last_increment(&self) -> f64 {
        self.last_increment
    }

    pub fn basis(&self) -> &[FourierFunction] {
        &self.basis
    }
}

impl OperatorKernel for BasisSumKernel {
    fn eval(&self, z: &[C64], w: &[C64]) -> C64 {
        let a = self.basis_values(z);
        let b = self.basis_values(w);
        a.iter().zip(&b).map(|(x, y)| x * y.conj()).sum()
    }
}

const MAX_BOX: usize = 1 << 24;

/// Integer box `[−B, B]ⁿ` addressed in mixed radix, first axis fastest.
struct IndexBox {
    n: usize,
    bound: i64,
    side: usize,
}

impl IndexBox {
    fn new(n: usize, bound: i64) -> Result<Self> {
        let side = (2 * bound + 1) as usize;
        let ok = side.checked_pow(n as u32).is_some_and(|l| l <= MAX_BOX);
        if !ok {
            return Err(Error::InvalidParameter {
                name: "basis.max_radius",
                reason: format!("coefficient box of side {side} in dimension {n} is too large"),
            });
        }
        Ok(Self { n, bound, side })
    }

    fn len(&self) -> usize {
        self.side.pow(self.n as u32)
    }

    fn offset(&self, d: &[i64]) -> isize {
        let mut off = 0isize;
        let mut stride = 1isize;
        for &v in d {
            off += v as isize * stride;
            stride *= self.side as isize;
        }
        off
    }

    fn pos(&self, idx: &[i64]) -> usize {
        let mut pos = 0usize;
        let mut stride = 1usize;
        for &v in idx {
            pos += (v + self.bound) as usize * stride;
            stride *= self.side;
        }
        pos
    }

    fn index(&self, mut pos: usize) -> Vec<i64> {
        (0..self.n)
            .map(|_| {
                let v = (pos % self.side) as i64 - self.bound;
                pos /= self.side;
                v
            })
            .collect()
    }
}

struct SparseVec {
    pos: Vec<usize>,
    val: Vec<C64>,
}

/// Dense accumulator that remembers which entries were written.
struct Scratch {
    data: Vec<C64>,
    mark: Vec<bool>,
    touched: Vec<usize>,
}

impl Scratch {
    fn new(len: usize) -> Self {
        Self {
            data: vec![C64::new(0.0, 0.0); len],
            mark: vec![false; len],
            touched: Vec::new(),
        }
    }

    fn add(&mut self, i: usize, v: C64) {
        if !self.mark[i] {
            self.mark[i] = true;
            self.touched.push(i);
        }
        self.data[i] += v;
    }

    fn touched_unique(&self) -> impl Iterator<Item = usize> + '_ {
        self.touched.iter().copied()
    }

    fn to_sparse(&self, scale: f64) -> SparseVec {
        let peak = self.touched.iter().map(|&i| self.data[i].norm()).fold(0.0, f64::max);
        let mut pos = Vec::new();
        let mut val = Vec::new();
        for &i in &self.touched {
            let v = self.data[i];
            if v.norm() > peak * 1e-18 {
                pos.push(i);
                val.push(v * scale);
            }
        }
        SparseVec { pos, val }
    }

    fn clear(&mut self) {
        for &i in &self.touched {
            self.data[i] = C64::new(0.0, 0.0);
            self.mark[i] = false;
        }
        self.touched.clear();
    }
}

/// Offsets `D` with their Gram weights `e^{−|D|²t/2}`, down to
/// double-precision underflow.
fn gram_stencil(recip: &ReciprocalLattice, t: f64) -> Vec<(LatticePoint, f64)> {
    let r = (2.0 * 40.0 / t).sqrt();
    enumerate_shell(recip, r)
        .into_iter()
        .map(|d| {
            let w = (-0.5 * d.norm2 * t).exp();
            (d, w)
        })
        .collect()
}

/// Which reproducing kernel to build.
#[derive(Debug, Clone)]
pub enum KernelSpace {
    EuclideanSb { t: f64 },
    Circle { t: f64, theta0: f64 },
    SpaceForm { spec: SpaceFormSpec, t: f64, base: BasePoint },
}

/// Builds the reproducing kernel of the requested space.
pub fn reproducing_kernel(space: &KernelSpace, opts: &BasisOptions) -> Result<SharedKernel> {
    Ok(match space {
        KernelSpace::EuclideanSb { t } => {
            require_positive("t", *t)?;
            Arc::new(EuclideanKernel { t: *t })
        }
        KernelSpace::Circle { t, theta0 } => Arc::new(CircleIntegralKernel::new(
            *t,
            *theta0,
            opts.grid_nodes,
            opts.strip.max(4.0),
            opts.kernel_tol,
        )?),
        KernelSpace::SpaceForm { spec, t, base } => Arc::new(BasisSumKernel::new(spec, base, *t, opts)?),
    })
}

/// `(Aφ)(z) = ∫ K_A(z, w̄) φ(w) ν_{t/2}(w) dw` at each requested point.
pub fn apply_operator(
    kernel: &dyn OperatorKernel,
    phi: &HolomorphicFunction,
    measure: &HolomorphicMeasure,
    points: &[Vec<C64>],
) -> Result<Vec<C64>> {
    points
        .iter()
        .map(|z| {
            require_dim(measure.dim(), z.len())?;
            measure.integrate(|w| kernel.eval(z, w) * phi.eval(w))
        })
        .collect()
}

/// `K_{AB}(z, w̄) = ∫ K_A(z, v̄) K_B(v, w̄) ν_{t/2}(v) dv`, evaluated lazily.
pub struct ComposedKernel {
    a: SharedKernel,
    b: SharedKernel,
    measure: Arc<HolomorphicMeasure>,
}

impl ComposedKernel {
    /// Value with the outer-layer resolution check.
    pub fn try_eval(&self, z: &[C64], w: &[C64]) -> Result<C64> {
        self.measure.integrate(|v| self.a.eval(z, v) * self.b.eval(v, w))
    }
}

impl OperatorKernel for ComposedKernel {
    fn eval(&self, z: &[C64], w: &[C64]) -> C64 {
        self.measure
            .integrate_unchecked(|v| self.a.eval(z, v) * self.b.eval(v, w))
    }
}

pub fn compose_kernels(a: SharedKernel, b: SharedKernel, measure: Arc<HolomorphicMeasure>) -> ComposedKernel {
    ComposedKernel { a, b, measure }
}
