//! Euclidean isometries and compact flat space forms `ℝⁿ/Γ`.
//!
//! Supported groups: the n-torus, the circle of circumference 2π, and the six
//! orientable compact 3-dimensional Bieberbach groups `G1`–`G6`. A group is
//! stored as its pure-translation lattice `Λ` plus a list of screw motions
//! generating the holonomy.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{require_dim, Error, Result};
use crate::fourier::{FourierFunction, C64};
use crate::lattice::{cell_volume, reciprocal, LatticeBasis, ReciprocalLattice};

const ORTHO_TOL: f64 = 1e-12;
const LATTICE_TOL: f64 = 1e-10;

/// `γ = (A, a)` acting by `x ↦ A·x + a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EuclideanIsometry {
    rotation: DMatrix<f64>,
    translation: DVector<f64>,
}

impl EuclideanIsometry {
    pub fn new(rotation: DMatrix<f64>, translation: Vec<f64>) -> Result<Self> {
        let n = rotation.nrows();
        require_dim(n, rotation.ncols())?;
        require_dim(n, translation.len())?;
        let defect = (rotation.transpose() * &rotation - DMatrix::identity(n, n)).amax();
        if defect > ORTHO_TOL {
            return Err(Error::InvalidParameter {
                name: "rotation",
                reason: format!("not orthogonal (‖AᵀA − I‖ = {defect:e})"),
            });
        }
        Ok(Self {
            rotation,
            translation: DVector::from_vec(translation),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            rotation: DMatrix::identity(dim, dim),
            translation: DVector::zeros(dim),
        }
    }

    pub fn translation_by(a: Vec<f64>) -> Self {
        let n = a.len();
        Self {
            rotation: DMatrix::identity(n, n),
            translation: DVector::from_vec(a),
        }
    }

    pub fn dim(&self) -> usize {
        self.rotation.nrows()
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &[f64] {
        self.translation.as_slice()
    }

    pub fn is_pure_translation(&self) -> bool {
        (&self.rotation - DMatrix::identity(self.dim(), self.dim())).amax() <= ORTHO_TOL
    }
}

/// `γ(x) = A·x + a`.
pub fn apply(g: &EuclideanIsometry, x: &[f64]) -> Result<Vec<f64>> {
    require_dim(g.dim(), x.len())?;
    let n = g.dim();
    Ok((0..n)
        .map(|i| (0..n).map(|j| g.rotation[(i, j)] * x[j]).sum::<f64>() + g.translation[i])
        .collect())
}

/// `γ₁∘γ₂ = (A₁A₂, A₁a₂ + a₁)`.
pub fn compose(g1: &EuclideanIsometry, g2: &EuclideanIsometry) -> Result<EuclideanIsometry> {
    require_dim(g1.dim(), g2.dim())?;
    Ok(EuclideanIsometry {
        rotation: &g1.rotation * &g2.rotation,
        translation: &g1.rotation * &g2.translation + &g1.translation,
    })
}

/// `γᵏ` for `k ≥ 0`.
pub fn power(g: &EuclideanIsometry, k: u32) -> EuclideanIsometry {
    (0..k).fold(EuclideanIsometry::identity(g.dim()), |acc, _| {
        compose(&acc, g).expect("same dimension")
    })
}

/// Which flat space form to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Torus(usize),
    Circle,
    G1,
    G2,
    G3,
    G4,
    G5,
    G6,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Torus(n) => write!(f, "torus{n}"),
            Family::Circle => write!(f, "circle"),
            Family::G1 => write!(f, "g1"),
            Family::G2 => write!(f, "g2"),
            Family::G3 => write!(f, "g3"),
            Family::G4 => write!(f, "g4"),
            Family::G5 => write!(f, "g5"),
            Family::G6 => write!(f, "g6"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let fam = match lower.as_str() {
            "circle" | "s1" => Family::Circle,
            "g1" => Family::G1,
            "g2" => Family::G2,
            "g3" => Family::G3,
            "g4" => Family::G4,
            "g5" => Family::G5,
            "g6" | "hantzsche-wendt" => Family::G6,
            other => match other.strip_prefix("torus") {
                Some(n) => Family::Torus(n.parse().map_err(|_| Error::InvalidParameter {
                    name: "spaceform.family",
                    reason: format!("cannot parse torus dimension in `{s}`"),
                })?),
                None => {
                    return Err(Error::InvalidParameter {
                        name: "spaceform.family",
                        reason: format!("unknown family `{s}`"),
                    })
                }
            },
        };
        Ok(fam)
    }
}

/// Cell parameters. `basis` wins when given (torus and `G1` only); otherwise
/// `lengths` are the generator lengths and `gamma` the angle between the
/// first two generators (defaults to a right angle, or 2π/3 for `G3`/`G5`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub basis: Option<LatticeBasis>,
    pub lengths: Vec<f64>,
    pub gamma: Option<f64>,
}

impl CellParams {
    pub fn lengths(lengths: &[f64]) -> Self {
        Self {
            lengths: lengths.to_vec(),
            ..Self::default()
        }
    }

    pub fn basis(basis: LatticeBasis) -> Self {
        Self {
            basis: Some(basis),
            ..Self::default()
        }
    }
}

/// A Bieberbach group with its translation lattice, holonomy generators and
/// the volume of the quotient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceFormSpec {
    pub family: Family,
    pub dim: usize,
    pub translation_basis: LatticeBasis,
    pub holonomy_generators: Vec<EuclideanIsometry>,
    /// Order `k` with `γᵏ ∈ Λ` for each holonomy generator.
    pub generator_orders: Vec<u32>,
    pub holonomy_order: usize,
    pub volume: f64,
}

impl SpaceFormSpec {
    pub fn reciprocal(&self) -> ReciprocalLattice {
        reciprocal(&self.translation_basis).expect("validated basis")
    }

    /// Volume of the translation cell `|det Λ|`.
    pub fn cell_volume(&self) -> f64 {
        self.volume * self.holonomy_order as f64
    }

    pub fn lattice_translations(&self) -> Vec<EuclideanIsometry> {
        (0..self.dim)
            .map(|j| EuclideanIsometry::translation_by(self.translation_basis.column(j)))
            .collect()
    }

    /// Holonomy generators followed by the lattice translations.
    pub fn group_generators(&self) -> Vec<EuclideanIsometry> {
        let mut g = self.holonomy_generators.clone();
        g.extend(self.lattice_translations());
        g
    }

    /// For each holonomy generator, `(γᵏ, expected lattice translation)`.
    pub fn defining_relations(&self) -> Vec<(EuclideanIsometry, Vec<f64>)> {
        self.holonomy_generators
            .iter()
            .zip(&self.generator_orders)
            .map(|(g, &k)| {
                let p = power(g, k);
                let expected = match self.family {
                    Family::G6 => {
                        let idx = self
                            .holonomy_generators
                            .iter()
                            .position(|h| h == g)
                            .expect("generator listed");
                        self.translation_basis.column(idx)
                    }
                    _ => self.translation_basis.column(self.dim - 1),
                };
                (p, expected)
            })
            .collect()
    }

    /// One representative `(A, a)` per coset of `Γ/Λ`, translation parts
    /// reduced into the unit cell. The identity comes first.
    pub fn holonomy_representatives(&self) -> Vec<EuclideanIsometry> {
        let inv = self
            .translation_basis
            .matrix()
            .clone()
            .try_inverse()
            .expect("validated basis");
        let reduce = |g: &EuclideanIsometry| -> EuclideanIsometry {
            let frac = &inv * &g.translation;
            let frac = frac.map(|v| {
                let r = v - v.floor();
                if (1.0 - r).abs() < 1e-9 {
                    0.0
                } else {
                    r
                }
            });
            EuclideanIsometry {
                rotation: g.rotation.clone(),
                translation: self.translation_basis.matrix() * frac,
            }
        };
        let same = |a: &EuclideanIsometry, b: &EuclideanIsometry| {
            (&a.rotation - &b.rotation).amax() < 1e-9
                && (&a.translation - &b.translation).amax() < 1e-9
        };
        let mut reps = vec![EuclideanIsometry::identity(self.dim)];
        let mut frontier = reps.clone();
        while let Some(cur) = frontier.pop() {
            for g in &self.holonomy_generators {
                let next = reduce(&compose(g, &cur).expect("same dimension"));
                if !reps.iter().any(|r| same(r, &next)) {
                    reps.push(next.clone());
                    frontier.push(next);
                }
            }
        }
        reps
    }
}

fn rotation_z(angle: f64) -> DMatrix<f64> {
    let (s, c) = angle.sin_cos();
    DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0])
}

fn require_lengths(params: &CellParams, n: usize) -> Result<Vec<f64>> {
    if params.lengths.len() != n {
        return Err(Error::InvalidParameter {
            name: "lattice.lengths",
            reason: format!("expected {n} lengths, got {}", params.lengths.len()),
        });
    }
    for &l in &params.lengths {
        crate::error::require_positive("lattice.lengths", l)?;
    }
    Ok(params.lengths.clone())
}

/// Basis `t1 = (a,0,0)`, `t2 = b(cos γ, sin γ, 0)`, `t3 = (0,0,c)`.
fn layered_basis(params: &CellParams, default_gamma: f64) -> Result<(LatticeBasis, f64)> {
    if params.basis.is_some() {
        return Err(Error::InvalidParameter {
            name: "lattice.basis",
            reason: "screw-motion families take lengths and an optional angle, not a free basis".into(),
        });
    }
    let l = require_lengths(params, 3)?;
    let gamma = params.gamma.unwrap_or(default_gamma);
    if !(gamma > 0.0 && gamma < PI) {
        return Err(Error::InvalidParameter {
            name: "spaceform.gamma",
            reason: format!("angle must lie in (0, π), got {gamma}"),
        });
    }
    let basis = LatticeBasis::from_columns(&[
        vec![l[0], 0.0, 0.0],
        vec![l[1] * gamma.cos(), l[1] * gamma.sin(), 0.0],
        vec![0.0, 0.0, l[2]],
    ])?;
    Ok((basis, gamma))
}

fn require_square_plane(params: &CellParams, gamma: f64, what: &str) -> Result<()> {
    let l = &params.lengths;
    if (l[0] - l[1]).abs() > 1e-12 * l[0].max(l[1]) || (gamma - PI / 2.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter {
            name: "lattice.lengths",
            reason: format!("{what} requires a square plane lattice (a = b, γ = π/2)"),
        });
    }
    Ok(())
}

fn require_hexagonal_plane(params: &CellParams, gamma: f64, what: &str) -> Result<()> {
    let l = &params.lengths;
    if (l[0] - l[1]).abs() > 1e-12 * l[0].max(l[1]) || (gamma - 2.0 * PI / 3.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter {
            name: "lattice.lengths",
            reason: format!("{what} requires a hexagonal plane lattice (a = b, γ = 2π/3)"),
        });
    }
    Ok(())
}

/// Builds and validates the space form of the given family.
pub fn make_space_form(family: Family, params: &CellParams) -> Result<SpaceFormSpec> {
    let (basis, generators, orders, m): (LatticeBasis, Vec<EuclideanIsometry>, Vec<u32>, usize) =
        match family {
            Family::Torus(n) => {
                if n == 0 {
                    return Err(Error::InvalidParameter {
                        name: "spaceform.family",
                        reason: "torus dimension must be at least 1".into(),
                    });
                }
                let basis = match &params.basis {
                    Some(b) => {
                        require_dim(n, b.dim())?;
                        b.clone()
                    }
                    None => LatticeBasis::diagonal(&require_lengths(params, n)?)?,
                };
                (basis, vec![], vec![], 1)
            }
            Family::Circle => {
                let len = match params.lengths.as_slice() {
                    [] => 2.0 * PI,
                    [l] => {
                        crate::error::require_positive("lattice.lengths", *l)?;
                        *l
                    }
                    other => {
                        return Err(Error::InvalidParameter {
                            name: "lattice.lengths",
                            reason: format!("circle takes one length, got {}", other.len()),
                        })
                    }
                };
                (LatticeBasis::diagonal(&[len])?, vec![], vec![], 1)
            }
            Family::G1 => {
                let basis = match &params.basis {
                    Some(b) => {
                        require_dim(3, b.dim())?;
                        b.clone()
                    }
                    None => layered_basis(params, PI / 2.0)?.0,
                };
                (basis, vec![], vec![], 1)
            }
            Family::G2 => {
                let (basis, _) = layered_basis(params, PI / 2.0)?;
                let c = params.lengths[2];
                let alpha = EuclideanIsometry::new(rotation_z(PI), vec![0.0, 0.0, c / 2.0])?;
                (basis, vec![alpha], vec![2], 2)
            }
            Family::G3 | Family::G5 => {
                let (basis, gamma) = layered_basis(params, 2.0 * PI / 3.0)?;
                let k: u32 = if family == Family::G3 { 3 } else { 6 };
                require_hexagonal_plane(params, gamma, &family.to_string())?;
                let c = params.lengths[2];
                let alpha = EuclideanIsometry::new(
                    rotation_z(2.0 * PI / k as f64),
                    vec![0.0, 0.0, c / k as f64],
                )?;
                (basis, vec![alpha], vec![k], k as usize)
            }
            Family::G4 => {
                let (basis, gamma) = layered_basis(params, PI / 2.0)?;
                require_square_plane(params, gamma, "g4")?;
                let c = params.lengths[2];
                let quarter = DMatrix::from_row_slice(
                    3,
                    3,
                    &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
                );
                let alpha = EuclideanIsometry::new(quarter, vec![0.0, 0.0, c / 4.0])?;
                (basis, vec![alpha], vec![4], 4)
            }
            Family::G6 => {
                let (basis, gamma) = layered_basis(params, PI / 2.0)?;
                if (gamma - PI / 2.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter {
                        name: "spaceform.gamma",
                        reason: "g6 requires an orthorhombic cell".into(),
                    });
                }
                let (a, b, c) = (params.lengths[0], params.lengths[1], params.lengths[2]);
                let diag = |d: [f64; 3]| DMatrix::from_diagonal(&DVector::from_row_slice(&d));
                let gens = vec![
                    EuclideanIsometry::new(diag([1.0, -1.0, -1.0]), vec![a / 2.0, b / 2.0, 0.0])?,
                    EuclideanIsometry::new(diag([-1.0, 1.0, -1.0]), vec![0.0, b / 2.0, c / 2.0])?,
                    EuclideanIsometry::new(diag([-1.0, -1.0, 1.0]), vec![a / 2.0, 0.0, c / 2.0])?,
                ];
                (basis, gens, vec![2, 2, 2], 4)
            }
        };

    let dim = basis.dim();
    let volume = cell_volume(&basis)? / m as f64;
    let spec = SpaceFormSpec {
        family,
        dim,
        translation_basis: basis,
        holonomy_generators: generators,
        generator_orders: orders,
        holonomy_order: m,
        volume,
    };
    validate(&spec)?;
    Ok(spec)
}

/// Checks the structural invariants of a space form: rotations preserve the
/// lattice, defining relations hold, the holonomy has the stated order and
/// no group element near the identity coset has a fixed point.
pub fn validate(spec: &SpaceFormSpec) -> Result<()> {
    let basis = &spec.translation_basis;
    let scale = basis.matrix().amax();
    let as_recip_locator = |v: &[f64]| -> bool {
        // v ∈ Λ  ⇔  B⁻¹v is integral
        let inv = basis.matrix().clone().try_inverse().expect("validated");
        let frac = inv * DVector::from_row_slice(v);
        frac.iter().all(|f| (f - f.round()).abs() <= LATTICE_TOL)
    };
    for g in &spec.holonomy_generators {
        for j in 0..spec.dim {
            let image: Vec<f64> = (g.rotation() * DVector::from_vec(basis.column(j)))
                .iter()
                .copied()
                .collect();
            if !as_recip_locator(&image) {
                return Err(Error::InvalidParameter {
                    name: "holonomy",
                    reason: format!("rotation does not preserve the lattice (generator column {j})"),
                });
            }
        }
    }
    for (p, expected) in spec.defining_relations() {
        let defect = (p.rotation() - DMatrix::identity(spec.dim, spec.dim)).amax().max(
            p.translation()
                .iter()
                .zip(&expected)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
        if defect > ORTHO_TOL * scale.max(1.0) {
            return Err(Error::InvalidParameter {
                name: "holonomy",
                reason: format!("defining relation violated by {defect:e}"),
            });
        }
    }
    let reps = spec.holonomy_representatives();
    if reps.len() != spec.holonomy_order {
        return Err(Error::InvalidParameter {
            name: "holonomy",
            reason: format!(
                "holonomy closure has {} cosets, expected {}",
                reps.len(),
                spec.holonomy_order
            ),
        });
    }
    if let Some(g) = find_fixed_point_element(spec, &reps) {
        return Err(Error::InvalidParameter {
            name: "holonomy",
            reason: format!("group element with rotation {:?} has a fixed point", g.rotation()),
        });
    }
    Ok(())
}

/// Looks for `(A, a + λ)` with `A ≠ I`, `λ` a small lattice vector, whose
/// translation has no component along the fixed space of `A` (such an
/// element has a fixed point).
fn find_fixed_point_element(
    spec: &SpaceFormSpec,
    reps: &[EuclideanIsometry],
) -> Option<EuclideanIsometry> {
    let n = spec.dim;
    for rep in reps.iter().filter(|r| !r.is_pure_translation()) {
        // fixed space of A: null space of (A − I)
        let m = rep.rotation() - DMatrix::identity(n, n);
        let svd = m.svd(false, true);
        let v_t = svd.v_t.expect("requested");
        let fixed: Vec<DVector<f64>> = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, s)| **s < 1e-9)
            .map(|(i, _)| v_t.row(i).transpose().into_owned())
            .collect();
        let mut idx = vec![-2i64; n];
        loop {
            let lam = spec
                .translation_basis
                .to_cartesian(&idx.iter().map(|&v| v as f64).collect::<Vec<_>>());
            let shift = DVector::from_row_slice(rep.translation()) + DVector::from_vec(lam);
            let along: f64 = fixed.iter().map(|u| u.dot(&shift).abs()).fold(0.0, f64::max);
            if along < 1e-9 {
                return Some(rep.clone());
            }
            let mut axis = 0;
            loop {
                if axis == n {
                    break;
                }
                if idx[axis] < 2 {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = -2;
                axis += 1;
            }
            if axis == n {
                break;
            }
        }
    }
    None
}

/// How [`is_invariant`] decides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvarianceMode {
    /// Exact test on Fourier coefficients: `c_{AᵀK} = c_K·e^{iK·a}`.
    Coefficients,
    /// `max |f(γx) − f(x)|` over a fixed sample grid.
    Sampled,
}

/// Whether `f∘γ = f` within `tol`.
pub fn is_invariant(
    f: &FourierFunction,
    g: &EuclideanIsometry,
    tol: f64,
    mode: InvarianceMode,
) -> Result<bool> {
    require_dim(f.dim(), g.dim())?;
    match mode {
        InvarianceMode::Coefficients => invariant_by_coefficients(f, g, tol),
        InvarianceMode::Sampled => Ok(sampled_deviation(f, g)? <= tol),
    }
}

/// `max |f(γx) − f(x)|` over a deterministic grid of `7ⁿ` points of the cell.
pub fn sampled_deviation(f: &FourierFunction, g: &EuclideanIsometry) -> Result<f64> {
    let n = f.dim();
    let basis = direct_basis(f.recip());
    let per = 7usize;
    let mut worst: f64 = 0.0;
    for flat in 0..per.pow(n as u32) {
        let mut rem = flat;
        let frac: Vec<f64> = (0..n)
            .map(|d| {
                let j = rem % per;
                rem /= per;
                // offset keeps samples off the symmetry planes
                (j as f64 + 0.1234 + 0.071 * d as f64) / per as f64
            })
            .collect();
        let x = basis.to_cartesian(&frac);
        let gx = apply(g, &x)?;
        worst = worst.max((f.eval(&gx) - f.eval(&x)).norm());
    }
    Ok(worst)
}

fn invariant_by_coefficients(f: &FourierFunction, g: &EuclideanIsometry, tol: f64) -> Result<bool> {
    let recip = f.recip();
    let scale = recip.matrix().amax().max(1.0);
    let at = g.rotation().transpose();
    let a = g.rotation();
    let check = |k_index: &[i64]| -> Option<bool> {
        let k = recip.point(k_index);
        let kv = DVector::from_row_slice(&k.vector);
        let image: Vec<f64> = (&at * &kv).iter().copied().collect();
        let ck = f.coeff(k_index);
        let phase = C64::from_polar(1.0, k.dot(g.translation()));
        match recip.locate(&image, 1e-9 * scale) {
            Some(l) => Some((f.coeff(&l) - ck * phase).norm() <= tol),
            // Aᵀ maps K off the lattice: invariance needs c_K = 0
            None => Some(ck.norm() <= tol),
        }
    };
    for (m, _) in f.indexed() {
        if check(m) == Some(false) {
            return Ok(false);
        }
        // preimage K = A·L of each support point L
        let l = recip.point(m);
        let pre: Vec<f64> = (a * DVector::from_row_slice(&l.vector)).iter().copied().collect();
        if let Some(k) = recip.locate(&pre, 1e-9 * scale) {
            if check(&k) == Some(false) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Translation basis recovered from a reciprocal lattice (`B = 2π·Bᵣ⁻ᵀ`).
pub fn direct_basis(recip: &ReciprocalLattice) -> LatticeBasis {
    let m = recip
        .matrix()
        .clone()
        .try_inverse()
        .expect("reciprocal lattices are invertible")
        .transpose()
        * (2.0 * PI);
    LatticeBasis::from_matrix(m).expect("invertible")
}
