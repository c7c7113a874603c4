//! Translation lattices, their 2π-dual reciprocal lattices and shell
//! enumeration of reciprocal vectors.
//!
//! A [`LatticeBasis`] stores the lattice generators as the *columns* of an
//! `n × n` matrix `B`. The reciprocal lattice uses `Bᵣ = 2π·B⁻ᵀ`, so that
//! `Bᵣᵀ·B = 2π·I` and `e^{iK·x}` is periodic on the translation lattice for
//! every reciprocal vector `K = Bᵣ·m`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold under which a basis is treated as singular.
const SINGULAR_REL: f64 = 1e-12;

/// Radius ties `|K| = R` within this absolute slack are kept.
pub const SHELL_TIE_TOL: f64 = 1e-12;

/// Basis of a translation lattice in ℝⁿ (generators are the matrix columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeBasis {
    matrix: DMatrix<f64>,
}

impl LatticeBasis {
    /// Builds a basis from its generator vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let n = columns.len();
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "lattice.basis",
                reason: "at least one generator is required".into(),
            });
        }
        for c in columns {
            crate::error::require_dim(n, c.len())?;
        }
        let matrix = DMatrix::from_fn(n, n, |i, j| columns[j][i]);
        Self::from_matrix(matrix)
    }

    /// Builds a basis from a matrix given row by row; the generators are the
    /// columns of that matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "lattice.basis",
                reason: "at least one row is required".into(),
            });
        }
        for r in rows {
            crate::error::require_dim(n, r.len())?;
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidParameter {
                name: "lattice.basis",
                reason: format!("expected a non-empty square matrix, got {}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lattice.basis",
                reason: "entries must be finite".into(),
            });
        }
        let det = matrix.determinant();
        let scale: f64 = matrix
            .column_iter()
            .map(|c| c.norm())
            .product::<f64>()
            .max(f64::MIN_POSITIVE);
        if det.abs() <= SINGULAR_REL * scale {
            return Err(Error::SingularBasis { det });
        }
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
        }
    }

    /// Diagonal basis with the given side lengths.
    pub fn diagonal(lengths: &[f64]) -> Result<Self> {
        Self::from_matrix(DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(lengths)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.matrix.column(j).iter().copied().collect()
    }

    /// Cartesian point `B·s` for fractional coordinates `s`.
    pub fn to_cartesian(&self, frac: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.matrix[(i, j)] * frac[j]).sum())
            .collect()
    }
}

/// Reciprocal lattice `ℒ` generated by the columns of `Bᵣ = 2π·B⁻ᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReciprocalLattice {
    matrix: DMatrix<f64>,
}

impl ReciprocalLattice {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `|det Bᵣ|`, the covolume of the reciprocal lattice.
    pub fn covolume(&self) -> f64 {
        self.matrix.determinant().abs()
    }

    /// Smallest singular value of `Bᵣ`; `|Bᵣ·m| ≥ σ_min·|m|`.
    pub fn sigma_min(&self) -> f64 {
        self.matrix
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Half the sum of generator lengths: every translate `K + Bᵣ·[-½,½)ⁿ`
    /// lies inside the ball of this radius around `K`.
    pub fn cell_circumradius(&self) -> f64 {
        0.5 * self.matrix.column_iter().map(|c| c.norm()).sum::<f64>()
    }

    /// The lattice point with integer coordinates `index`.
    pub fn point(&self, index: &[i64]) -> LatticePoint {
        let n = self.dim();
        let vector: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| self.matrix[(i, j)] * index[j] as f64).sum())
            .collect();
        let norm2 = vector.iter().map(|v| v * v).sum();
        LatticePoint {
            index: index.to_vec(),
            vector,
            norm2,
        }
    }

    /// Integer coordinates of the lattice vector closest to `vector`, if
    /// `vector` lies on the lattice within `tol`.
    pub fn locate(&self, vector: &[f64], tol: f64) -> Option<Vec<i64>> {
        let n = self.dim();
        // m = Bᵣ⁻¹ K = Bᵀ K / 2π
        let inv = self.matrix.clone().try_inverse()?;
        let m: Vec<i64> = (0..n)
            .map(|i| (0..n).map(|j| inv[(i, j)] * vector[j]).sum::<f64>().round() as i64)
            .collect();
        let p = self.point(&m);
        let err: f64 = p
            .vector
            .iter()
            .zip(vector)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        (err <= tol).then_some(m)
    }
}

/// A reciprocal lattice vector `K = Bᵣ·m` together with its integer index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticePoint {
    pub index: Vec<i64>,
    pub vector: Vec<f64>,
    pub norm2: f64,
}

impl LatticePoint {
    pub fn norm(&self) -> f64 {
        self.norm2.sqrt()
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.vector.iter().zip(x).map(|(k, v)| k * v).sum()
    }
}

/// The 2π-dual of `basis`.
pub fn reciprocal(basis: &LatticeBasis) -> Result<ReciprocalLattice> {
    let inv = basis
        .matrix
        .clone()
        .try_inverse()
        .ok_or(Error::SingularBasis {
            det: basis.matrix.determinant(),
        })?;
    Ok(ReciprocalLattice {
        matrix: inv.transpose() * (2.0 * PI),
    })
}

/// `|det B|`, the volume of the translation cell.
pub fn cell_volume(basis: &LatticeBasis) -> Result<f64> {
    let det = basis.matrix.determinant();
    if det == 0.0 {
        return Err(Error::SingularBasis { det });
    }
    Ok(det.abs())
}

/// All reciprocal vectors with `|K| ≤ radius`, sorted by norm and then by
/// index. The origin is always included and the set is closed under `K ↦ -K`.
pub fn enumerate_shell(recip: &ReciprocalLattice, radius: f64) -> Vec<LatticePoint> {
    let n = recip.dim();
    let radius = radius.max(0.0);
    let bound = (radius / recip.sigma_min() * (1.0 + 1e-12) + 1e-9).floor() as i64;
    let limit = (radius + SHELL_TIE_TOL).powi(2);

    let mut out = Vec::new();
    let mut index = vec![-bound; n];
    loop {
        let p = recip.point(&index);
        if p.norm2 <= limit {
            out.push(p);
        }
        // odometer over [-bound, bound]^n
        let mut axis = 0;
        loop {
            if axis == n {
                out.sort_by(|a, b| {
                    a.norm2
                        .total_cmp(&b.norm2)
                        .then_with(|| a.index.cmp(&b.index))
                });
                return out;
            }
            if index[axis] < bound {
                index[axis] += 1;
                break;
            }
            index[axis] = -bound;
            axis += 1;
        }
    }
}

/// Volume of the unit ball in ℝⁿ.
pub fn unit_ball_volume(n: usize) -> f64 {
    // ω_n = π^{n/2} / Γ(n/2 + 1), via the recurrence ω_n = 2π/n · ω_{n-2}
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// Radius whose ball holds roughly `count` reciprocal lattice points.
pub fn radius_for_count(recip: &ReciprocalLattice, count: f64) -> f64 {
    let n = recip.dim() as f64;
    (count * recip.covolume() / unit_ball_volume(recip.dim())).powf(1.0 / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_reciprocal_is_two_pi() {
        let r = reciprocal(&LatticeBasis::identity(3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 2.0 * PI } else { 0.0 };
                assert_abs_diff_eq!(r.matrix()[(i, j)], expect, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn diagonal_reciprocal() {
        let r = reciprocal(&LatticeBasis::diagonal(&[2.0, 5.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(r.matrix()[(0, 0)], PI, epsilon = 1e-15);
        assert_abs_diff_eq!(r.matrix()[(1, 1)], 2.0 * PI / 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.matrix()[(0, 1)], 0.0);
    }

    #[test]
    fn singular_basis_rejected() {
        let err = LatticeBasis::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap_err();
        assert!(matches!(err, Error::SingularBasis { .. }));
    }

    #[test]
    fn zero_radius_is_origin_only() {
        let r = reciprocal(&LatticeBasis::from_rows(&[vec![1.0, 0.3], vec![0.0, 0.7]]).unwrap()).unwrap();
        let s = enumerate_shell(&r, 0.0);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].index, vec![0, 0]);
    }

    #[test]
    fn cell_volumes() {
        assert_abs_diff_eq!(cell_volume(&LatticeBasis::identity(3)).unwrap(), 1.0);
        assert_abs_diff_eq!(cell_volume(&LatticeBasis::diagonal(&[2.0, 3.0]).unwrap()).unwrap(), 6.0);
        let sheared = LatticeBasis::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(cell_volume(&sheared).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ball_volumes() {
        assert_abs_diff_eq!(unit_ball_volume(2), PI, epsilon = 1e-15);
        assert_abs_diff_eq!(unit_ball_volume(3), 4.0 * PI / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn locate_round_trips() {
        let r = reciprocal(&LatticeBasis::from_rows(&[vec![1.0, 0.3], vec![0.0, 0.7]]).unwrap()).unwrap();
        let p = r.point(&[3, -2]);
        assert_eq!(r.locate(&p.vector, 1e-9), Some(vec![3, -2]));
        assert_eq!(r.locate(&[0.1, 0.2], 1e-9), None);
    }
}
