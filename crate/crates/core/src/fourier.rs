//! Finite Fourier series over a reciprocal lattice and their holomorphic
//! continuations.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{require_dim, Result};
use crate::lattice::{LatticeBasis, LatticePoint, ReciprocalLattice};

pub type C64 = Complex64;

/// `f(x) = Σ c_K e^{iK·x}` with finitely many non-zero coefficients, keyed by
/// the integer coordinates of `K` in the reciprocal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierFunction {
    recip: ReciprocalLattice,
    coeffs: BTreeMap<Vec<i64>, C64>,
}

impl FourierFunction {
    pub fn zero(recip: ReciprocalLattice) -> Self {
        Self {
            recip,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(recip: ReciprocalLattice, value: C64) -> Self {
        let n = recip.dim();
        let mut f = Self::zero(recip);
        f.set(vec![0; n], value);
        f
    }

    /// Single exponential `c·e^{iK·x}` with `K = Bᵣ·index`.
    pub fn mode(recip: ReciprocalLattice, index: Vec<i64>, c: C64) -> Self {
        let mut f = Self::zero(recip);
        f.set(index, c);
        f
    }

    pub fn from_terms<I>(recip: ReciprocalLattice, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<i64>, C64)>,
    {
        let mut f = Self::zero(recip);
        for (m, c) in terms {
            require_dim(f.dim(), m.len())?;
            *f.coeffs.entry(m).or_insert(C64::new(0.0, 0.0)) += c;
        }
        f.prune(0.0);
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.recip.dim()
    }

    pub fn recip(&self) -> &ReciprocalLattice {
        &self.recip
    }

    pub fn set(&mut self, index: Vec<i64>, c: C64) {
        assert_eq!(index.len(), self.dim(), "mode index has wrong dimension");
        if c == C64::new(0.0, 0.0) {
            self.coeffs.remove(&index);
        } else {
            self.coeffs.insert(index, c);
        }
    }

    pub fn coeff(&self, index: &[i64]) -> C64 {
        self.coeffs.get(index).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Drops coefficients with modulus `≤ threshold`.
    pub fn prune(&mut self, threshold: f64) {
        self.coeffs.retain(|_, c| c.norm() > threshold);
    }

    /// Support points with their coefficients, in index order.
    pub fn terms(&self) -> impl Iterator<Item = (LatticePoint, C64)> + '_ {
        self.coeffs.iter().map(|(m, c)| (self.recip.point(m), *c))
    }

    pub fn indexed(&self) -> impl Iterator<Item = (&Vec<i64>, &C64)> {
        self.coeffs.iter()
    }

    /// `max |K|` over the support (0 for the zero function).
    pub fn max_frequency(&self) -> f64 {
        self.terms().map(|(k, _)| k.norm()).fold(0.0, f64::max)
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        self.terms()
            .map(|(k, c)| c * C64::from_polar(1.0, k.dot(x)))
            .sum()
    }

    /// Entire continuation `Σ c_K e^{iK·z}` at a complex point.
    pub fn eval_complex(&self, z: &[C64]) -> C64 {
        self.terms()
            .map(|(k, c)| {
                let phase: C64 = k.vector.iter().zip(z).map(|(kv, zv)| zv * *kv).sum();
                c * (C64::i() * phase).exp()
            })
            .sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c *= s;
        }
        out.prune(0.0);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.coeffs {
            *out.coeffs.entry(m.clone()).or_default() += c;
        }
        out.prune(0.0);
        out
    }

    /// Applies `c_K ↦ c_K·w(K)` coefficientwise.
    pub fn map_coeffs(&self, mut w: impl FnMut(&LatticePoint, C64) -> C64) -> Self {
        let mut out = Self::zero(self.recip.clone());
        for (m, c) in &self.coeffs {
            let p = self.recip.point(m);
            out.set(m.clone(), w(&p, *c));
        }
        out
    }

    /// Coefficients `c_K ≈ N⁻ⁿ Σ_j f(x_j) e^{-iK·x_j}` from samples on the
    /// periodic grid `x_j = B·j/N`, for the listed modes.
    pub fn from_grid_samples(
        basis: &LatticeBasis,
        recip: &ReciprocalLattice,
        nodes_per_dim: usize,
        samples: &[C64],
        modes: &[LatticePoint],
    ) -> Self {
        let grid = grid_points(basis, nodes_per_dim);
        let norm = 1.0 / grid.len() as f64;
        let mut f = Self::zero(recip.clone());
        for k in modes {
            let c: C64 = grid
                .iter()
                .zip(samples)
                .map(|(x, v)| v * C64::from_polar(1.0, -k.dot(x)))
                .sum::<C64>()
                * norm;
            f.set(k.index.clone(), c);
        }
        f
    }
}

/// Equispaced grid `B·j/N`, `j ∈ {0..N-1}ⁿ`, with the first axis varying
/// fastest.
pub fn grid_points(basis: &LatticeBasis, nodes_per_dim: usize) -> Vec<Vec<f64>> {
    let n = basis.dim();
    let total = nodes_per_dim.pow(n as u32);
    let mut out = Vec::with_capacity(total);
    let mut j = vec![0usize; n];
    for _ in 0..total {
        let frac: Vec<f64> = j.iter().map(|&v| v as f64 / nodes_per_dim as f64).collect();
        out.push(basis.to_cartesian(&frac));
        for d in 0..n {
            j[d] += 1;
            if j[d] < nodes_per_dim {
                break;
            }
            j[d] = 0;
        }
    }
    out
}

/// Element of a holomorphic function space: either a lattice-periodic
/// exponential series continued to `Q_ℂ`, or a polynomial `Σ a_m z^m` on ℂ.
#[derive(Debug, Clone, PartialEq)]
pub enum HolomorphicFunction {
    Periodic(FourierFunction),
    Polynomial(Vec<C64>),
}

impl HolomorphicFunction {
    pub fn monomial(degree: usize, c: C64) -> Self {
        let mut a = vec![C64::new(0.0, 0.0); degree + 1];
        a[degree] = c;
        HolomorphicFunction::Polynomial(a)
    }

    pub fn dim(&self) -> usize {
        match self {
            HolomorphicFunction::Periodic(f) => f.dim(),
            HolomorphicFunction::Polynomial(_) => 1,
        }
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        match self {
            HolomorphicFunction::Periodic(f) => f.eval_complex(z),
            HolomorphicFunction::Polynomial(a) => a
                .iter()
                .rev()
                .fold(C64::new(0.0, 0.0), |acc, c| acc * z[0] + c),
        }
    }

    /// Restriction to real points.
    pub fn eval_real(&self, x: &[f64]) -> C64 {
        let z: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.eval(&z)
    }
}
