//! Time-sliced holomorphic propagator.
//!
//! `G_n(z_T, z_0; T) = ∫ Π_{j=1..n} K(z_j, z̄_{j−1}) e^{−iε h(z_j, z̄_{j−1})} Π_{j=1..n−1} dν(z_j)`
//! with `ε = T/n`, `z_n = z_T`. Two engines evaluate it: the Gaussian closed
//! form for bilinear symbols `h = c·z·w̄` on the Segal–Bargmann space, and a
//! transfer-matrix quadrature valid for any symbol.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{require_dim, require_positive, Error, Result};
use crate::hilbert::{EuclideanKernel, HolomorphicMeasure, OperatorKernel, SharedKernel};
use crate::quadrature::gaussian_mode_error;

type C64 = Complex64;

type SymbolFn = Arc<dyn Fn(&[C64], &[C64]) -> C64 + Send + Sync>;

/// `h(z, w̄)`.
#[derive(Clone)]
pub enum NormalSymbol {
    /// `c·Σ zᵢ w̄ᵢ`
    Bilinear(C64),
    /// `K_H(z, w̄)/K(z, w̄)`
    Ratio { hamiltonian: SharedKernel, reproducing: SharedKernel },
    Function(SymbolFn),
}

impl std::fmt::Debug for NormalSymbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NormalSymbol::Bilinear(c) => write!(f, "Bilinear({c})"),
            NormalSymbol::Ratio { .. } => write!(f, "Ratio"),
            NormalSymbol::Function(_) => write!(f, "Function"),
        }
    }
}

impl NormalSymbol {
    pub fn eval(&self, z: &[C64], w: &[C64]) -> Result<C64> {
        match self {
            NormalSymbol::Bilinear(c) => Ok(c * bilinear(z, w)),
            NormalSymbol::Ratio { hamiltonian, reproducing } => {
                let k = reproducing.eval(z, w);
                if k.norm() == 0.0 || !k.is_finite() {
                    return Err(Error::VanishingWeight { value: k.norm() });
                }
                Ok(hamiltonian.eval(z, w) / k)
            }
            NormalSymbol::Function(f) => Ok(f(z, w)),
        }
    }

    pub fn bilinear_coefficient(&self) -> Option<C64> {
        match self {
            NormalSymbol::Bilinear(c) => Some(*c),
            _ => None,
        }
    }
}

/// Normal symbol as the pointwise ratio of two kernels.
pub fn normal_symbol(hamiltonian: SharedKernel, reproducing: SharedKernel) -> NormalSymbol {
    NormalSymbol::Ratio { hamiltonian, reproducing }
}

fn bilinear(z: &[C64], w: &[C64]) -> C64 {
    z.iter().zip(w).map(|(a, b)| a * b.conj()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Quadrature,
    GaussianClosedForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlicedPropagatorRequest {
    pub z_t: Vec<C64>,
    pub z_0: Vec<C64>,
    pub time: f64,
    pub n_slices: usize,
    pub engine: Engine,
}

/// Segal–Bargmann space on ℂⁿ with its quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorSpace {
    pub t: f64,
    pub gauss_nodes: usize,
    pub tol: f64,
}

impl Default for PropagatorSpace {
    fn default() -> Self {
        Self {
            t: 1.0,
            gauss_nodes: 48,
            tol: 1e-12,
        }
    }
}

/// `e^{z·w̄ e^{−iT}/t}`, the exact kernel of `e^{−iTH}` for `H = z∂_z`.
pub fn exact_oscillator_kernel(z: &[C64], w: &[C64], time: f64, t: f64) -> C64 {
    (bilinear(z, w) * C64::from_polar(1.0, -time) / t).exp()
}

/// [`exact_oscillator_kernel`] as an operator kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorKernel {
    pub time: f64,
    pub t: f64,
}

impl OperatorKernel for OscillatorKernel {
    fn eval(&self, z: &[C64], w: &[C64]) -> C64 {
        exact_oscillator_kernel(z, w, self.time, self.t)
    }
}

fn validate(req: &SlicedPropagatorRequest) -> Result<()> {
    if req.n_slices == 0 {
        return Err(Error::InvalidParameter {
            name: "propagator.n_slices",
            reason: "at least one slice is required".into(),
        });
    }
    require_dim(req.z_t.len(), req.z_0.len())?;
    if !req.time.is_finite() {
        return Err(Error::InvalidParameter {
            name: "propagator.time",
            reason: "must be finite".into(),
        });
    }
    Ok(())
}

/// Evaluates `G_n(z_T, z_0; T)` on the Segal–Bargmann space.
pub fn propagate_sliced(req: &SlicedPropagatorRequest, h: &NormalSymbol, space: &PropagatorSpace) -> Result<C64> {
    validate(req)?;
    require_positive("t", space.t)?;
    match req.engine {
        Engine::GaussianClosedForm => {
            let c = h.bilinear_coefficient().ok_or_else(|| {
                Error::EngineMismatch("the closed-form engine needs a bilinear symbol c·z·w̄".into())
            })?;
            Ok(closed_form(req, c, space.t))
        }
        Engine::Quadrature => {
            let eps = req.time / req.n_slices as f64;
            let growth = match h.bilinear_coefficient() {
                Some(c) => (C64::new(1.0, 0.0) - C64::i() * eps * c * space.t).norm().powi(req.n_slices as i32),
                None => 1.0,
            };
            let zmax = req
                .z_t
                .iter()
                .chain(&req.z_0)
                .map(|v| v.norm())
                .fold(0.0, f64::max);
            // slice integrands grow at most like e^{a·y} per real coordinate
            let a = 2.0 * zmax * growth / space.t.sqrt();
            let estimate = 2.0 * gaussian_mode_error(space.t, space.gauss_nodes, a);
            let sentinel = space.tol.sqrt().max(1e-10);
            if req.n_slices > 1 && estimate > sentinel {
                return Err(Error::UnderResolved {
                    what: "Gauss-Hermite order for the slice integrands",
                    estimate,
                    tol: sentinel,
                });
            }
            let dim = req.z_t.len();
            let radius = space.t.sqrt()
                * ((4.0f64).max(2.0 * zmax / space.t.sqrt()) + (2.0 * (1.0 / space.tol).ln()).sqrt());
            let measure = HolomorphicMeasure::euclidean(dim, space.t, space.gauss_nodes)?.truncate_to_disk(radius);
            let kernel = EuclideanKernel { t: space.t };
            propagate_on(req, h, &kernel, &measure)
        }
    }
}

fn closed_form(req: &SlicedPropagatorRequest, c: C64, t: f64) -> C64 {
    // ∫ e^{a z v̄/t} e^{b v w̄/t} dν_{t/2}(v) = e^{ab z w̄/t}: each composition
    // multiplies the exponent factor by the one-slice factor.
    let eps = req.time / req.n_slices as f64;
    let one = C64::new(1.0, 0.0) - C64::i() * eps * c * t;
    let mut factor = one;
    for _ in 1..req.n_slices {
        factor *= one;
    }
    (bilinear(&req.z_t, &req.z_0) * factor / t).exp()
}

/// Sliced propagator over an arbitrary kernel and discretized measure by
/// repeated application of the one-slice transfer matrix.
pub fn propagate_on(
    req: &SlicedPropagatorRequest,
    h: &NormalSymbol,
    kernel: &dyn OperatorKernel,
    measure: &HolomorphicMeasure,
) -> Result<C64> {
    validate(req)?;
    require_dim(measure.dim(), req.z_t.len())?;
    let eps = req.time / req.n_slices as f64;
    let slice = |z: &[C64], w: &[C64]| -> Result<C64> {
        Ok(kernel.eval(z, w) * (-C64::i() * eps * h.eval(z, w)?).exp())
    };
    if req.n_slices == 1 {
        return slice(&req.z_t, &req.z_0);
    }
    let len = measure.len();
    let mut f: Vec<C64> = (0..len)
        .into_par_iter()
        .map(|i| slice(measure.point(i), &req.z_0))
        .collect::<Result<_>>()?;
    if req.n_slices > 2 {
        let matrix: Vec<Vec<C64>> = (0..len)
            .into_par_iter()
            .map(|i| {
                (0..len)
                    .map(|j| slice(measure.point(i), measure.point(j)).map(|v| v * measure.weight(j)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        for _ in 0..req.n_slices - 2 {
            f = matrix
                .par_iter()
                .map(|row| row.iter().zip(&f).map(|(a, b)| a * b).sum::<C64>())
                .collect();
        }
    }
    let mut g = C64::new(0.0, 0.0);
    for (j, fj) in f.iter().enumerate() {
        g += slice(&req.z_t, measure.point(j))? * measure.weight(j) * fj;
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub value: C64,
    pub abs_error: f64,
    /// `e_n / e_{2n}` when the next row doubles `n`.
    pub ratio: Option<f64>,
    /// `log₂(e_n / e_{2n})`
    pub order_estimate: Option<f64>,
}

/// Convergence table of `G_n` against the exact oscillator kernel for the
/// symbol `h = z·w̄`.
pub fn convergence_sweep(
    z_t: C64,
    z_0: C64,
    time: f64,
    n_list: &[usize],
    engine: Engine,
    space: &PropagatorSpace,
) -> Result<Vec<SweepRow>> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter {
            name: "propagator.n_list",
            reason: "must be strictly ascending".into(),
        });
    }
    let exact = exact_oscillator_kernel(&[z_t], &[z_0], time, space.t);
    let h = NormalSymbol::Bilinear(C64::new(1.0, 0.0));
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let req = SlicedPropagatorRequest {
            z_t: vec![z_t],
            z_0: vec![z_0],
            time,
            n_slices: n,
            engine,
        };
        let value = propagate_sliced(&req, &h, space)?;
        rows.push(SweepRow {
            n,
            value,
            abs_error: (value - exact).norm(),
            ratio: None,
            order_estimate: None,
        });
    }
    for i in 0..rows.len().saturating_sub(1) {
        if rows[i + 1].n == 2 * rows[i].n && rows[i + 1].abs_error > 0.0 && rows[i].abs_error > 0.0 {
            let r = rows[i].abs_error / rows[i + 1].abs_error;
            rows[i].ratio = Some(r);
            rows[i].order_estimate = Some(r.log2());
        }
    }
    Ok(rows)
}
