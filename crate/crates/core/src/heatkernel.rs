//! Heat kernels of `∂ₜρ = ½Δρ`: on ℝⁿ in closed form, on compact space
//! forms as reciprocal-lattice sums, on the circle, their analytic
//! continuation in the base point, and the complexified kernel `ν` on
//! `Q_ℂ = Q × ℝⁿ`.
//!
//! Lattice sums are truncated to a Euclidean shell `|K| ≤ R` whose radius
//! comes from an analytic tail bound (see [`truncation_radius`]).

use std::f64::consts::PI;

use num_complex::Complex64;
use twofloat::TwoFloat;

use crate::error::{require_dim, require_positive, Error, Result};
use crate::lattice::{enumerate_shell, radius_for_count, unit_ball_volume, LatticePoint, ReciprocalLattice};
use crate::spaceform::SpaceFormSpec;

type C64 = Complex64;

/// Default hard cap on the number of lattice points in a truncation shell.
pub const DEFAULT_POINT_CAP: f64 = 1e6;

/// Diffusion time, base point and truncation tolerance of a kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatKernelParams {
    pub t: f64,
    pub base: Vec<C64>,
    pub tol: f64,
    pub radius: f64,
}

impl HeatKernelParams {
    pub fn new(spec: &SpaceFormSpec, t: f64, base: Vec<C64>, tol: f64) -> Result<Self> {
        require_positive("t", t)?;
        require_positive("tol", tol)?;
        require_dim(spec.dim, base.len())?;
        let imag = base.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
        let tr = truncation_radius(&spec.reciprocal(), spec.volume, t, tol, imag);
        if tr.capped {
            return Err(Error::RadiusCapExceeded {
                needed: tr.needed,
                cap: tr.radius,
            });
        }
        Ok(Self {
            t,
            base,
            tol,
            radius: tr.radius,
        })
    }
}

/// Result of [`truncation_radius`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub radius: f64,
    /// Radius the tail bound asked for (equals `radius` unless capped).
    pub needed: f64,
    pub capped: bool,
}

/// `(2πt)^{-n/2} e^{-|x-x₀|²/2t}`.
pub fn rho_euclidean(x: &[f64], x0: &[f64], t: f64) -> Result<f64> {
    require_positive("t", t)?;
    require_dim(x.len(), x0.len())?;
    let n = x.len() as f64;
    let d2: f64 = x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((2.0 * PI * t).powf(-n / 2.0) * (-d2 / (2.0 * t)).exp())
}

/// Smallest shell radius `R` whose tail `Σ_{|K|>R} e^{|K|b − K²t/2}` is
/// provably below `tol·V`, for `b = imag_bound`.
///
/// The bound integrates the counting estimate
/// `#{|K| ≤ r} ≤ ω_n (r+δ)ⁿ / det Bᵣ` by parts against the decreasing
/// profile `g(r) = e^{br − tr²/2}` (valid for `r ≥ b/t`), with `δ` the
/// circumradius of a centred reciprocal cell.
pub fn truncation_radius(
    recip: &ReciprocalLattice,
    volume: f64,
    t: f64,
    tol: f64,
    imag_bound: f64,
) -> Truncation {
    let n = recip.dim();
    let density = unit_ball_volume(n) / recip.covolume();
    let delta = recip.cell_circumradius();
    let b = imag_bound.max(0.0);
    let log_target = (tol * volume).ln();

    let log_bound = |r: f64| -> f64 {
        // J_k = e^{tS²/2} ∫_S^∞ s^k e^{−ts²/2} ds, bounded from above
        let s = r - b / t;
        let beta = b / t + delta;
        let mut j = vec![0.0; n.max(1)];
        for k in 0..n {
            j[k] = match k {
                0 => {
                    let gauss = (PI / (2.0 * t)).sqrt();
                    if s > 0.0 {
                        gauss.min(1.0 / (t * s))
                    } else {
                        gauss
                    }
                }
                1 => 1.0 / t,
                _ => s.powi(k as i32 - 1) / t + (k as f64 - 1.0) / t * j[k - 2],
            };
        }
        let mut integral = 0.0;
        let mut binom = 1.0;
        for k in 0..n {
            // C(n−1, k) β^{n−1−k} J_k
            integral += binom * beta.powi((n - 1 - k) as i32) * j[k];
            binom = binom * (n - 1 - k) as f64 / (k + 1) as f64;
        }
        let poly = (r + delta).powi(n as i32) + n as f64 * integral;
        b * r - 0.5 * t * r * r + (density * poly).ln()
    };

    let cap = radius_for_count(recip, DEFAULT_POINT_CAP);
    let lo0 = b / t;
    let accept = |r: f64| log_bound(r) < log_target;
    let needed = if accept(lo0) {
        lo0
    } else {
        let mut lo = lo0;
        let mut hi = lo0.max(1.0);
        while !accept(hi) {
            lo = hi;
            hi *= 2.0;
            if hi > 1e3 * cap.max(1.0) {
                break;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if accept(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-10 * hi.max(1.0) {
                break;
            }
        }
        hi
    };
    if needed > cap {
        Truncation {
            radius: cap,
            needed,
            capped: true,
        }
    } else {
        Truncation {
            radius: needed,
            needed,
            capped: false,
        }
    }
}

/// A truncated reciprocal-lattice heat kernel ready for repeated evaluation:
/// `(1/V) Σ_{|K|≤R} e^{iK·(x−z) − K²t/2}`.
#[derive(Debug, Clone)]
pub struct LatticeKernel {
    points: Vec<LatticePoint>,
    damping: Vec<f64>,
    inv_volume: f64,
    t: f64,
    radius: f64,
    imag_bound: f64,
}

impl LatticeKernel {
    /// Kernel resolved for base points with `|Im z| ≤ imag_bound`.
    pub fn new(spec: &SpaceFormSpec, t: f64, tol: f64, imag_bound: f64) -> Result<Self> {
        Self::with_lattice(&spec.reciprocal(), spec.volume, t, tol, imag_bound)
    }

    pub fn with_lattice(
        recip: &ReciprocalLattice,
        volume: f64,
        t: f64,
        tol: f64,
        imag_bound: f64,
    ) -> Result<Self> {
        require_positive("t", t)?;
        require_positive("tol", tol)?;
        let tr = truncation_radius(recip, volume, t, tol, imag_bound);
        if tr.capped {
            return Err(Error::RadiusCapExceeded {
                needed: tr.needed,
                cap: tr.radius,
            });
        }
        let points = enumerate_shell(recip, tr.radius);
        let damping = points.iter().map(|p| (-0.5 * p.norm2 * t).exp()).collect();
        Ok(Self {
            points,
            damping,
            inv_volume: 1.0 / volume,
            t,
            radius: tr.radius,
            imag_bound,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn imag_bound(&self) -> f64 {
        self.imag_bound
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    /// Value at real arguments. The shell is symmetric under `K ↦ −K`, so
    /// the imaginary parts cancel; only the cosine series is summed.
    pub fn eval_real(&self, x: &[f64], x0: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
        let s: f64 = self
            .points
            .iter()
            .zip(&self.damping)
            .map(|(k, w)| w * k.dot(&d).cos())
            .sum();
        s * self.inv_volume
    }

    /// Value with a complex base point `z` (continuation in `x₀`).
    pub fn eval_continued(&self, x: &[f64], z: &[C64]) -> C64 {
        let s: C64 = self
            .points
            .iter()
            .zip(&self.damping)
            .map(|(k, w)| {
                // iK·(x − z) = iK·(x − Re z) + K·Im z
                let re: f64 = k.vector.iter().zip(z).map(|(kv, zv)| kv * zv.im).sum();
                let im: f64 = k.vector.iter().zip(x).zip(z).map(|((kv, xv), zv)| kv * (xv - zv.re)).sum();
                C64::from_polar(w * re.exp(), im)
            })
            .sum();
        s * self.inv_volume
    }
}

/// `ρ_t^{x₀}(x) = (1/V) Σ_K e^{iK·(x−x₀) − K²t/2}` on a space form, with
/// absolute truncation error below `tol`.
pub fn rho_spaceform(x: &[f64], x0: &[f64], t: f64, spec: &SpaceFormSpec, tol: f64) -> Result<f64> {
    require_dim(spec.dim, x.len())?;
    require_dim(spec.dim, x0.len())?;
    let kernel = LatticeKernel::new(spec, t, tol, 0.0)?;
    let d: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
    let (re, im, mag) = kernel
        .points
        .iter()
        .zip(&kernel.damping)
        .fold((0.0, 0.0, 0.0), |(re, im, mag), (k, w)| {
            let (s, c) = k.dot(&d).sin_cos();
            (re + w * c, im + w * s, mag + w)
        });
    debug_assert!(im.abs() <= 1e-12 * mag.max(1.0), "imaginary residue {im:e}");
    Ok(re * kernel.inv_volume)
}

/// `ρ_t^{θ₀}(θ) = (1/2π) Σ_k e^{ik(θ−θ₀) − k²t/2}` on the circle of length 2π.
pub fn rho_s1(theta: f64, theta0: f64, t: f64, tol: f64) -> Result<f64> {
    require_positive("t", t)?;
    require_positive("tol", tol)?;
    let recip = crate::lattice::reciprocal(&crate::lattice::LatticeBasis::diagonal(&[2.0 * PI])?)?;
    let tr = truncation_radius(&recip, 2.0 * PI, t, tol, 0.0);
    if tr.capped {
        return Err(Error::RadiusCapExceeded {
            needed: tr.needed,
            cap: tr.radius,
        });
    }
    let kmax = (tr.radius + 1e-12).floor() as i64;
    // Near the antipode the value is many orders below the O(1) terms, so
    // the series runs in double-double: q^{k²} by q^{(k-1)²}·q^{2k-1} and
    // cos(kd) by the Chebyshev recurrence in c = cos d.
    let q = TwoFloat::from((-0.5 * t).exp());
    let q2 = q * q;
    let c = TwoFloat::from((theta - theta0).cos());
    let two = TwoFloat::from(2.0);
    let mut s = TwoFloat::from(1.0);
    let mut weight = TwoFloat::from(1.0);
    let mut step = q;
    let (mut prev, mut cur) = (TwoFloat::from(1.0), c);
    for _ in 1..=kmax {
        weight = weight * step;
        step = step * q2;
        s = s + two * weight * cur;
        let next = two * c * cur - prev;
        prev = cur;
        cur = next;
    }
    Ok(f64::from(s) / (2.0 * PI))
}

/// `ρ_t^{z}(x)`: the lattice kernel with its base point continued to a
/// complex point `z`.
pub fn rho_analytic(z: &[C64], x: &[f64], t: f64, spec: &SpaceFormSpec, tol: f64) -> Result<C64> {
    require_dim(spec.dim, z.len())?;
    require_dim(spec.dim, x.len())?;
    let imag = z.iter().map(|v| v.im * v.im).sum::<f64>().sqrt();
    let kernel = LatticeKernel::new(spec, t, tol, imag)?;
    Ok(kernel.eval_continued(x, z))
}

/// Normalized Gaussian `(2πt)^{-n/2} e^{-|y|²/2t}` of the imaginary directions.
pub fn imaginary_gaussian(y: &[f64], t: f64) -> f64 {
    let n = y.len() as f64;
    let y2: f64 = y.iter().map(|v| v * v).sum();
    (2.0 * PI * t).powf(-n / 2.0) * (-y2 / (2.0 * t)).exp()
}

/// Complexified heat kernel on `Q_ℂ = Q × ℝⁿ`:
/// `ν_t^{z₀}(z) = ρ_t^{Re z₀}(Re z) · (2πt)^{-n/2} e^{-|Im(z−z₀)|²/2t}`.
pub fn nu_complexified(z: &[C64], z0: &[C64], t: f64, spec: &SpaceFormSpec, tol: f64) -> Result<f64> {
    require_dim(spec.dim, z.len())?;
    require_dim(spec.dim, z0.len())?;
    let x: Vec<f64> = z.iter().map(|v| v.re).collect();
    let x0: Vec<f64> = z0.iter().map(|v| v.re).collect();
    let y: Vec<f64> = z.iter().zip(z0).map(|(a, b)| a.im - b.im).collect();
    Ok(rho_spaceform(&x, &x0, t, spec, tol)? * imaginary_gaussian(&y, t))
}

/// Heat kernel on `ℂⁿ ≅ ℝ²ⁿ`: `(2πt)^{-n} e^{-|z−z₀|²/2t}`.
pub fn nu_euclidean(z: &[C64], z0: &[C64], t: f64) -> Result<f64> {
    require_positive("t", t)?;
    require_dim(z.len(), z0.len())?;
    let n = z.len() as f64;
    let d2: f64 = z.iter().zip(z0).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok((2.0 * PI * t).powf(-n) * (-d2 / (2.0 * t)).exp())
}
