//! Quadrature rules on the translation cell (periodic trapezoid), on the
//! imaginary directions of `Q_ℂ` (Gauss–Hermite scaled to the Gaussian factor
//! of `ν_{t/2}`), and their tensor products.
//!
//! Integration sums over fixed-size chunks of nodes; chunk partial sums are
//! added in chunk order, so a result is bit-identical for any thread count.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{require_positive, Error, Result};
use crate::lattice::{cell_volume, LatticeBasis};

type C64 = Complex64;

const CHUNK: usize = 2048;

/// Default nodes per compact dimension.
pub const DEFAULT_CELL_NODES: usize = 32;
/// Default nodes per Gaussian dimension.
pub const DEFAULT_GAUSS_NODES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    PeriodicTrapezoid,
    GaussianWeighted,
    Product,
}

/// Nodes (row-major, `dim` coordinates each) with weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    kind: RuleKind,
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Per-dimension node counts, used to locate boundary nodes.
    shape: Vec<usize>,
}

impl QuadratureRule {
    pub fn kind(&self) -> RuleKind {
        self.kind
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

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Σ wᵢ f(xᵢ)`.
    pub fn integrate<F>(&self, f: F) -> C64
    where
        F: Fn(&[f64]) -> C64 + Sync,
    {
        let idx: Vec<usize> = (0..self.len()).collect();
        let partials: Vec<C64> = idx
            .par_chunks(CHUNK)
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|&i| f(self.node(i)) * self.weights[i])
                    .sum::<C64>()
            })
            .collect();
        partials.into_iter().sum()
    }

    pub fn integrate_real<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        self.integrate(|x| C64::new(f(x), 0.0)).re
    }
}

/// `Nⁿ` equispaced nodes `B·j/N` of the translation cell, each weighted
/// `|det B|/Nⁿ`. Exact for `e^{iK·x}` whenever every integer coordinate of
/// `K` is smaller than `N` in modulus.
pub fn periodic_trapezoid(cell: &LatticeBasis, nodes_per_dim: usize) -> Result<QuadratureRule> {
    if nodes_per_dim == 0 {
        return Err(Error::InvalidParameter {
            name: "quad.cell_nodes",
            reason: "at least one node is required".into(),
        });
    }
    let n = cell.dim();
    let pts = crate::fourier::grid_points(cell, nodes_per_dim);
    let w = cell_volume(cell)? / pts.len() as f64;
    Ok(QuadratureRule {
        kind: RuleKind::PeriodicTrapezoid,
        dim: n,
        weights: vec![w; pts.len()],
        nodes: pts.into_iter().flatten().collect(),
        shape: vec![nodes_per_dim; n],
    })
}

/// Gauss–Hermite nodes and weights for the weight `e^{-u²}` on ℝ, in
/// ascending node order.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton iteration on the orthonormal Hermite recurrence, with the
    // classical asymptotic initial guesses for the largest roots.
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    x.reverse();
    w.reverse();
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Tensor Gauss–Hermite rule for the normalized Gaussian
/// `(πt)^{-n/2} e^{-|y|²/t}` (the imaginary factor of `ν_{t/2}`). Weights
/// sum to one; exact for polynomials of degree `≤ 2N−1` per coordinate.
pub fn gaussian_weighted(t: f64, dim: usize, nodes_per_dim: usize) -> Result<QuadratureRule> {
    require_positive("t", t)?;
    if nodes_per_dim == 0 {
        return Err(Error::InvalidParameter {
            name: "quad.gauss_nodes",
            reason: "at least one node is required".into(),
        });
    }
    let (u, wu) = gauss_hermite(nodes_per_dim);
    let scale = t.sqrt();
    let norm = 1.0 / PI.sqrt();
    let y: Vec<f64> = u.iter().map(|v| v * scale).collect();
    let wy: Vec<f64> = wu.iter().map(|v| v * norm).collect();
    let base = QuadratureRule {
        kind: RuleKind::GaussianWeighted,
        dim: 1,
        nodes: y,
        weights: wy,
        shape: vec![nodes_per_dim],
    };
    let mut rule = base.clone();
    for _ in 1..dim {
        rule = product_rule(&rule, &base);
    }
    rule.kind = RuleKind::GaussianWeighted;
    Ok(rule)
}

/// Tensor product: nodes `(x, y)`, weights `w_x·w_y`.
pub fn product_rule(q1: &QuadratureRule, q2: &QuadratureRule) -> QuadratureRule {
    let dim = q1.dim + q2.dim;
    let mut nodes = Vec::with_capacity(q1.len() * q2.len() * dim);
    let mut weights = Vec::with_capacity(q1.len() * q2.len());
    for i in 0..q1.len() {
        for j in 0..q2.len() {
            nodes.extend_from_slice(q1.node(i));
            nodes.extend_from_slice(q2.node(j));
            weights.push(q1.weights[i] * q2.weights[j]);
        }
    }
    let mut shape = q1.shape.clone();
    shape.extend_from_slice(&q2.shape);
    QuadratureRule {
        kind: RuleKind::Product,
        dim,
        nodes,
        weights,
        shape,
    }
}

/// Relative error of an `N`-node Gauss–Hermite rule on `∫ e^{a·y}` against
/// the normalized Gaussian of variance `t/2` (exact value `e^{a²t/4}`).
pub fn gaussian_mode_error(t: f64, nodes: usize, a: f64) -> f64 {
    let (u, w) = gauss_hermite(nodes);
    let s = t.sqrt();
    // divide out the exact value inside the sum to avoid overflow
    let approx: f64 = u
        .iter()
        .zip(&w)
        .map(|(ui, wi)| wi / PI.sqrt() * (a * s * ui - a * a * t / 4.0).exp())
        .sum();
    (approx - 1.0).abs()
}
