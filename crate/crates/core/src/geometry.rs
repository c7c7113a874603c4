//! Lifted metric on `T*Q`, the compatible triple `(J, G, ω)`, holomorphic
//! frames and the curvature obstruction to their integrability.
//!
//! Tangent vectors at `(q, p)` are `2n`-vectors `(q̇, ṗ)`; momenta are
//! covector components. `Ω = [[0, I], [−I, 0]]` and `J = Ω⁻¹G`, so on flat
//! space `J(q̇, ṗ) = (−ṗ, q̇)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{require_dim, Error, Result};

type C64 = Complex64;

type MetricFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
/// `l ↦ ∂σ/∂qˡ`
type MetricDerivFn = Arc<dyn Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync>;

pub const DEFAULT_FD_STEP: f64 = 1e-5;
const CONDITION_LIMIT: f64 = 1e12;

/// A Riemannian metric `σ_ij(q)` on a coordinate chart.
#[derive(Clone)]
pub struct MetricChart {
    name: String,
    dim: usize,
    sigma: MetricFn,
    dsigma: Option<MetricDerivFn>,
    h_fd: f64,
}

impl fmt::Debug for MetricChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricChart")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("analytic_derivative", &self.dsigma.is_some())
            .field("h_fd", &self.h_fd)
            .finish()
    }
}

impl MetricChart {
    pub fn new<F>(name: impl Into<String>, dim: usize, sigma: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            dim,
            sigma: Arc::new(sigma),
            dsigma: None,
            h_fd: DEFAULT_FD_STEP,
        }
    }

    pub fn with_derivative<F>(mut self, dsigma: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<DMatrix<f64>> + Send + Sync + 'static,
    {
        self.dsigma = Some(Arc::new(dsigma));
        self
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.h_fd = h;
        self
    }

    /// Euclidean metric `δ_ij`.
    pub fn flat(dim: usize) -> Self {
        Self::new("flat", dim, move |_| DMatrix::identity(dim, dim))
            .with_derivative(move |_| vec![DMatrix::zeros(dim, dim); dim])
    }

    /// Constant symmetric positive-definite metric.
    pub fn constant(sigma: DMatrix<f64>) -> Self {
        let n = sigma.nrows();
        Self::new("constant", n, move |_| sigma.clone()).with_derivative(move |_| vec![DMatrix::zeros(n, n); n])
    }

    /// Pullback of the Euclidean plane metric through
    /// `φ(q) = (q¹ + 0.3 sin q², q² + 0.2 (q¹)²)`: flat in curvilinear
    /// coordinates.
    pub fn flat_sheared() -> Self {
        fn jac(q: &[f64]) -> DMatrix<f64> {
            DMatrix::from_row_slice(2, 2, &[1.0, 0.3 * q[1].cos(), 0.4 * q[0], 1.0])
        }
        // second derivatives ∂_l ∂_i φ^a, indexed [l][(a, i)]
        fn hess(q: &[f64]) -> [DMatrix<f64>; 2] {
            let mut d0 = DMatrix::zeros(2, 2);
            d0[(1, 0)] = 0.4;
            let mut d1 = DMatrix::zeros(2, 2);
            d1[(0, 1)] = -0.3 * q[1].sin();
            [d0, d1]
        }
        Self::new("flat-sheared", 2, |q| {
            let j = jac(q);
            j.transpose() * j
        })
        .with_derivative(|q| {
            let j = jac(q);
            hess(q)
                .iter()
                .map(|h| h.transpose() * &j + j.transpose() * h)
                .collect()
        })
    }

    /// Round sphere `diag(1, sin²θ)` in `(θ, φ)`.
    pub fn sphere() -> Self {
        Self::new("sphere", 2, |q| {
            let s = q[0].sin();
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, s * s])
        })
        .with_derivative(|q| {
            let (s, c) = q[0].sin_cos();
            vec![
                DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 2.0 * s * c]),
                DMatrix::zeros(2, 2),
            ]
        })
    }

    /// `e^{2λ} I` with constant `λ`.
    pub fn conformal(dim: usize, lambda: f64) -> Self {
        let scale = (2.0 * lambda).exp();
        let mut chart = Self::constant(DMatrix::identity(dim, dim) * scale);
        chart.name = "conformal".into();
        chart
    }

    /// Named test metric: `flat`, `flat-sheared`, `sphere`, `conformal`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "flat" => Ok(Self::flat(2)),
            "flat-sheared" => Ok(Self::flat_sheared()),
            "sphere" => Ok(Self::sphere()),
            "conformal" => Ok(Self::conformal(2, 0.35)),
            other => Err(Error::InvalidParameter {
                name: "geometry.metric",
                reason: format!("unknown test metric `{other}`"),
            }),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> f64 {
        self.h_fd
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.dsigma.is_some()
    }

    /// `σ(q)` after symmetry, definiteness and conditioning checks.
    pub fn metric(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        require_dim(self.dim, q.len())?;
        let s = (self.sigma)(q);
        require_dim(self.dim, s.nrows())?;
        let asym = (&s - s.transpose()).amax();
        if asym > 1e-12 * s.amax().max(1.0) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!("metric is not symmetric (defect {asym:e})"),
            });
        }
        let eig = s.clone().symmetric_eigenvalues();
        let lo = eig.min();
        let hi = eig.max();
        if lo <= 0.0 || hi / lo > CONDITION_LIMIT {
            return Err(Error::SingularMetric {
                condition: if lo > 0.0 { hi / lo } else { f64::INFINITY },
            });
        }
        Ok(s)
    }

    fn inverse(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        let s = self.metric(q)?;
        s.try_inverse().ok_or(Error::SingularMetric { condition: f64::INFINITY })
    }

    /// `∂σ/∂qˡ`, analytic when available, else central differences.
    pub fn metric_derivative(&self, q: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        require_dim(self.dim, q.len())?;
        if let Some(d) = &self.dsigma {
            return Ok(d(q));
        }
        let h = self.h_fd;
        (0..self.dim)
            .map(|l| {
                let mut qp = q.to_vec();
                let mut qm = q.to_vec();
                qp[l] += h;
                qm[l] -= h;
                Ok(((self.sigma)(&qp) - (self.sigma)(&qm)) / (2.0 * h))
            })
            .collect()
    }

    /// Step for differentiating quantities that already contain one
    /// derivative of `σ`.
    fn outer_step(&self) -> f64 {
        if self.dsigma.is_some() {
            self.h_fd
        } else {
            20.0 * self.h_fd
        }
    }
}

/// `(q, p)` with `p` covector components.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhasePoint {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        require_dim(q.len(), p.len())?;
        if q.iter().chain(&p).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "phase point",
                reason: "entries must be finite".into(),
            });
        }
        Ok(Self { q, p })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
}

/// `Γᵏ_ij`, stored `[k][i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `N_ij = p_k Γᵏ_ij`
    pub fn contract(&self, p: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| (0..self.n).map(|k| p[k] * self.get(k, i, j)).sum())
    }
}

/// `Γᵏ_ij = ½ σ^{kl} (∂_i σ_jl + ∂_j σ_il − ∂_l σ_ij)`.
pub fn christoffel(chart: &MetricChart, q: &[f64]) -> Result<Christoffel> {
    let n = chart.dim();
    let inv = chart.inverse(q)?;
    let d = chart.metric_derivative(q)?;
    let mut data = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += inv[(k, l)] * (d[i][(j, l)] + d[j][(i, l)] - d[l][(i, j)]);
                }
                data[(k * n + i) * n + j] = 0.5 * s;
            }
        }
    }
    Ok(Christoffel { n, data })
}

/// `Rᵐ_kij`, stored `[m][k][i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Riemann {
    n: usize,
    data: Vec<f64>,
}

impl Riemann {
    pub fn get(&self, m: usize, k: usize, i: usize, j: usize) -> f64 {
        self.data[((m * self.n + k) * self.n + i) * self.n + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `Rᵐ_kij = ∂_i Γᵐ_jk − ∂_j Γᵐ_ik + Γᵐ_il Γˡ_jk − Γᵐ_jl Γˡ_ik`, with the
/// derivatives of `Γ` by central differences.
pub fn riemann(chart: &MetricChart, q: &[f64]) -> Result<Riemann> {
    let n = chart.dim();
    let g = christoffel(chart, q)?;
    let h = chart.outer_step();
    let mut dg = Vec::with_capacity(n);
    for i in 0..n {
        let mut qp = q.to_vec();
        let mut qm = q.to_vec();
        qp[i] += h;
        qm[i] -= h;
        let gp = christoffel(chart, &qp)?;
        let gm = christoffel(chart, &qm)?;
        dg.push(
            gp.data
                .iter()
                .zip(&gm.data)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect::<Vec<f64>>(),
        );
    }
    let d = |i: usize, m: usize, j: usize, k: usize| dg[i][(m * n + j) * n + k];
    let mut data = vec![0.0; n * n * n * n];
    for m in 0..n {
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut r = d(i, m, j, k) - d(j, m, i, k);
                    for l in 0..n {
                        r += g.get(m, i, l) * g.get(l, j, k) - g.get(m, j, l) * g.get(l, i, k);
                    }
                    data[((m * n + k) * n + i) * n + j] = r;
                }
            }
        }
    }
    Ok(Riemann { n, data })
}

fn check_point(chart: &MetricChart, m: &PhasePoint) -> Result<()> {
    require_dim(chart.dim(), m.dim())
}

/// `G = Mᵀ diag(σ, σ⁻¹) M` with `M = [[I, 0], [−N, I]]`, `N_ij = p_k Γᵏ_ij`,
/// i.e. `G(V, W) = σ(q̇, q̇′) + σ⁻¹(Dp, Dp′)` with `Dp = ṗ − N q̇`.
pub fn lifted_metric_matrix(chart: &MetricChart, m: &PhasePoint) -> Result<DMatrix<f64>> {
    check_point(chart, m)?;
    let n = chart.dim();
    let s = chart.metric(&m.q)?;
    let inv = chart.inverse(&m.q)?;
    let nmat = christoffel(chart, &m.q)?.contract(&m.p);
    let mut big_m = DMatrix::identity(2 * n, 2 * n);
    big_m.view_mut((n, 0), (n, n)).copy_from(&(-&nmat));
    let mut d = DMatrix::zeros(2 * n, 2 * n);
    d.view_mut((0, 0), (n, n)).copy_from(&s);
    d.view_mut((n, n), (n, n)).copy_from(&inv);
    let g = big_m.transpose() * d * big_m;
    Ok((&g + g.transpose()) * 0.5)
}

pub fn lifted_metric(chart: &MetricChart, m: &PhasePoint, v: &[f64], w: &[f64]) -> Result<f64> {
    require_dim(2 * chart.dim(), v.len())?;
    require_dim(2 * chart.dim(), w.len())?;
    let g = lifted_metric_matrix(chart, m)?;
    let v = DVector::from_column_slice(v);
    let w = DVector::from_column_slice(w);
    Ok(v.dot(&(g * w)))
}

/// Canonical symplectic matrix `[[0, I], [−I, 0]]`.
pub fn symplectic_matrix(n: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        o[(i, n + i)] = 1.0;
        o[(n + i, i)] = -1.0;
    }
    o
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibleTriple {
    pub g: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    pub j: DMatrix<f64>,
}

impl CompatibleTriple {
    pub fn dim(&self) -> usize {
        self.g.nrows() / 2
    }

    /// `max |J² + I|`
    pub fn j_square_defect(&self) -> f64 {
        let n2 = self.j.nrows();
        (&self.j * &self.j + DMatrix::identity(n2, n2)).amax()
    }

    /// `|G(V, W) − ω(V, JW)|`
    pub fn compatibility_defect(&self, v: &[f64], w: &[f64]) -> f64 {
        let v = DVector::from_column_slice(v);
        let w = DVector::from_column_slice(w);
        let g = v.dot(&(&self.g * &w));
        let o = v.dot(&(&self.omega * (&self.j * &w)));
        (g - o).abs()
    }

    fn complex_j(&self) -> DMatrix<C64> {
        self.j.map(|v| C64::new(v, 0.0))
    }

    /// `Π⁺ = (1 − iJ)/2`
    pub fn projector_plus(&self) -> DMatrix<C64> {
        let n2 = self.j.nrows();
        (DMatrix::<C64>::identity(n2, n2) - self.complex_j() * C64::i()) * C64::new(0.5, 0.0)
    }

    /// `Π⁻ = (1 + iJ)/2`
    pub fn projector_minus(&self) -> DMatrix<C64> {
        let n2 = self.j.nrows();
        (DMatrix::<C64>::identity(n2, n2) + self.complex_j() * C64::i()) * C64::new(0.5, 0.0)
    }
}

pub fn compatible_triple(chart: &MetricChart, m: &PhasePoint) -> Result<CompatibleTriple> {
    let g = lifted_metric_matrix(chart, m)?;
    let omega = symplectic_matrix(chart.dim());
    // Ω⁻¹ = −Ω
    let j = -&omega * &g;
    Ok(CompatibleTriple { g, omega, j })
}

/// `∂/∂zⁱ = ½(∂_{qⁱ} + (p_k Γᵏ_ij − i σ_ij) ∂_{p_j})` as complex `2n`-vectors
/// in the `(q, p)` coordinate frame.
pub fn holomorphic_frame(chart: &MetricChart, m: &PhasePoint) -> Result<Vec<DVector<C64>>> {
    check_point(chart, m)?;
    let n = chart.dim();
    let s = chart.metric(&m.q)?;
    let nmat = christoffel(chart, &m.q)?.contract(&m.p);
    Ok((0..n)
        .map(|i| {
            DVector::from_fn(2 * n, |a, _| {
                if a < n {
                    C64::new(if a == i { 0.5 } else { 0.0 }, 0.0)
                } else {
                    let j = a - n;
                    C64::new(0.5 * nmat[(i, j)], -0.5 * s[(i, j)])
                }
            })
        })
        .collect())
}

/// `żⁱ = q̇ⁱ + i σ^{im}(ṗ_m − p_k Γᵏ_ml q̇ˡ)`, the coordinates of `Π⁺V` in the
/// holomorphic frame.
pub fn z_dot(chart: &MetricChart, m: &PhasePoint, v: &[f64]) -> Result<DVector<C64>> {
    check_point(chart, m)?;
    let n = chart.dim();
    require_dim(2 * n, v.len())?;
    let inv = chart.inverse(&m.q)?;
    let nmat = christoffel(chart, &m.q)?.contract(&m.p);
    let qd = DVector::from_column_slice(&v[..n]);
    let pd = DVector::from_column_slice(&v[n..]);
    let dp = &pd - &nmat * &qd;
    let im = inv * dp;
    Ok(DVector::from_fn(n, |i, _| C64::new(qd[i], im[i])))
}

/// Options for [`bracket_obstruction`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketOptions {
    /// Combine steps `h` and `2h` as `(4B_h − B_{2h})/3`.
    pub richardson: bool,
}

impl Default for BracketOptions {
    fn default() -> Self {
        Self { richardson: false }
    }
}

/// Coefficients `c^l_{ij}` of `[∂/∂zⁱ, ∂/∂zʲ] = c^l_{ij}(∂/∂zˡ − ∂/∂z̄ˡ)`.
/// `measured[l]` and `predicted[l]` are `n×n` over `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketObstruction {
    pub measured: Vec<DMatrix<C64>>,
    /// `i Rᵐ_kij p_m σ^{lk}`
    pub predicted: Vec<DMatrix<C64>>,
    /// Estimated finite-difference error of `measured`.
    pub noise_floor: f64,
    /// Largest `∂_q` component of the measured bracket (zero in exact
    /// arithmetic).
    pub horizontal_residual: f64,
}

impl BracketObstruction {
    pub fn max_measured(&self) -> f64 {
        self.measured.iter().map(|m| cmax(m.iter())).fold(0.0, f64::max)
    }

    pub fn max_predicted(&self) -> f64 {
        self.predicted.iter().map(|m| cmax(m.iter())).fold(0.0, f64::max)
    }

    /// `max |measured − s·predicted| / max |s·predicted|`
    pub fn relative_mismatch(&self, scale: f64) -> f64 {
        let diff = self
            .measured
            .iter()
            .zip(&self.predicted)
            .map(|(a, b)| cmax((a - b * C64::new(scale, 0.0)).iter()))
            .fold(0.0, f64::max);
        diff / (scale.abs() * self.max_predicted())
    }

    /// Least-squares `s` in `measured ≈ s·predicted`.
    pub fn fitted_scale(&self) -> C64 {
        let mut num = C64::new(0.0, 0.0);
        let mut den = 0.0;
        for (a, b) in self.measured.iter().zip(&self.predicted) {
            for (x, y) in a.iter().zip(b.iter()) {
                num += y.conj() * x;
                den += y.norm_sqr();
            }
        }
        num / den
    }
}

fn cmax<'a>(it: impl Iterator<Item = &'a C64>) -> f64 {
    it.map(|c| c.norm()).fold(0.0, f64::max)
}

/// Components of the frame field `∂/∂zʲ` at an arbitrary `(q, p)`.
fn frame_field(chart: &MetricChart, q: &[f64], p: &[f64], j: usize) -> Result<DVector<C64>> {
    let m = PhasePoint {
        q: q.to_vec(),
        p: p.to_vec(),
    };
    Ok(holomorphic_frame(chart, &m)?.swap_remove(j))
}

/// `[X_i, X_j]^a = X_i^b ∂_b X_j^a − X_j^b ∂_b X_i^a` by central differences
/// over the `2n` real coordinates.
fn bracket_at_step(chart: &MetricChart, m: &PhasePoint, h: f64) -> Result<(Vec<Vec<DVector<C64>>>, f64)> {
    let n = chart.dim();
    let frame = holomorphic_frame(chart, m)?;
    // jac[j][b] = ∂_b X_j
    let mut jac: Vec<Vec<DVector<C64>>> = vec![Vec::with_capacity(2 * n); n];
    let mut scale: f64 = 0.0;
    for b in 0..2 * n {
        let (mut qp, mut pp) = (m.q.clone(), m.p.clone());
        let (mut qm, mut pm) = (m.q.clone(), m.p.clone());
        if b < n {
            qp[b] += h;
            qm[b] -= h;
        } else {
            pp[b - n] += h;
            pm[b - n] -= h;
        }
        for (j, col) in jac.iter_mut().enumerate() {
            let fp = frame_field(chart, &qp, &pp, j)?;
            let fm = frame_field(chart, &qm, &pm, j)?;
            scale = scale.max(cmax(fp.iter())).max(cmax(fm.iter()));
            col.push((fp - fm) / C64::new(2.0 * h, 0.0));
        }
    }
    let mut out = vec![vec![DVector::zeros(2 * n); n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut v = DVector::<C64>::zeros(2 * n);
            for b in 0..2 * n {
                v += &jac[j][b] * frame[i][b] - &jac[i][b] * frame[j][b];
            }
            out[i][j] = v;
        }
    }
    // rounding in a central difference: ~ε·|X|/h, amplified by |X| in the bracket
    let rounding = 10.0 * f64::EPSILON * scale * scale / h * (2 * n) as f64;
    Ok((out, rounding))
}

/// Measured Lie brackets of the holomorphic frame against the curvature
/// prediction `i Rᵐ_kij p_m σ^{lk}`.
pub fn bracket_obstruction(chart: &MetricChart, m: &PhasePoint, opts: &BracketOptions) -> Result<BracketObstruction> {
    check_point(chart, m)?;
    let n = chart.dim();
    let h = chart.outer_step();
    let (b1, round1) = bracket_at_step(chart, m, h)?;
    let (b2, round2) = bracket_at_step(chart, m, 2.0 * h)?;
    let inv = chart.inverse(&m.q)?;

    let mut truncation: f64 = 0.0;
    let mut horizontal: f64 = 0.0;
    let mut measured = vec![DMatrix::<C64>::zeros(n, n); n];
    for i in 0..n {
        for j in 0..n {
            let diff = cmax((&b1[i][j] - &b2[i][j]).iter());
            truncation = truncation.max(diff);
            let v = if opts.richardson {
                (&b1[i][j] * C64::new(4.0, 0.0) - &b2[i][j]) / C64::new(3.0, 0.0)
            } else {
                b1[i][j].clone()
            };
            for a in 0..n {
                horizontal = horizontal.max(v[a].norm());
            }
            // B_r = c^l (−i σ_lr)  ⇒  c^l = i σ^{lr} B_r
            for l in 0..n {
                let mut c = C64::new(0.0, 0.0);
                for r in 0..n {
                    c += v[n + r] * inv[(l, r)];
                }
                measured[l][(i, j)] = C64::i() * c;
            }
        }
    }
    let noise_floor = if opts.richardson {
        truncation / 3.0 + round1.max(round2)
    } else {
        truncation + round1.max(round2)
    };

    let r = riemann(chart, &m.q)?;
    let mut predicted = vec![DMatrix::<C64>::zeros(n, n); n];
    for (l, pl) in predicted.iter_mut().enumerate() {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    for mm in 0..n {
                        s += r.get(mm, k, i, j) * m.p[mm] * inv[(l, k)];
                    }
                }
                pl[(i, j)] = C64::new(0.0, s);
            }
        }
    }

    let out = BracketObstruction {
        measured,
        predicted,
        noise_floor,
        horizontal_residual: horizontal,
    };
    let signal = out.max_measured().max(out.max_predicted());
    if noise_floor > (1e-2 * signal).max(1e-6) {
        return Err(Error::FiniteDifferenceBreakdown {
            noise: noise_floor,
            signal,
        });
    }
    Ok(out)
}
