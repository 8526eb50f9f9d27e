//! Explicit formulas: ball exit times, the planar Cauchy Poisson kernel of a
//! disk, the half-space Poisson kernel `K` with its derivatives, the auxiliary
//! function `w` and the harmonic quadratic perturbation.
//!
//! Transition density of the planar Cauchy process, recorded for reference
//! only: `p_t(x) = t / (2π (t² + |x|²)^{3/2})`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Sym3;

/// Normalisation `C_K = 1/(2π)` of the half-space Poisson kernel.
pub const C_K: f64 = 1.0 / (2.0 * PI);
/// `C_P = π⁻²` for the planar Cauchy Poisson kernel of a disk.
pub const C_P: f64 = 1.0 / (PI * PI);
/// Vertical shift of the auxiliary function `w`, `√(3/2)`.
pub const W_SHIFT: f64 = 1.224_744_871_391_589;

pub type Point3 = [f64; 3];

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Stability index `α ∈ (0, 2]` and dimension `d ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    alpha: f64,
    dim: usize,
}

impl StableParams {
    pub fn new(alpha: f64, dim: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {alpha} not in (0, 2]"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(StableParams { alpha, dim })
    }

    /// The planar Cauchy process.
    pub fn cauchy_2d() -> Self {
        StableParams { alpha: 1.0, dim: 2 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `C_B = Γ(d/2) / (2^α Γ(1 + α/2) Γ(d/2 + α/2))`.
    pub fn c_b(&self) -> f64 {
        let (a, d) = (self.alpha, self.dim as f64);
        gamma(d / 2.0) / (2f64.powf(a) * gamma(1.0 + a / 2.0) * gamma(d / 2.0 + a / 2.0))
    }

    /// Constant `A_{d,−α}` in the singular-integral definition of the
    /// fractional Laplacian. Exit-time formulas absorb it; nothing here uses it.
    pub fn fractional_laplacian_constant(&self) -> Option<f64> {
        if self.alpha >= 2.0 {
            return None;
        }
        let (a, d) = (self.alpha, self.dim as f64);
        Some(2f64.powf(a) * gamma((d + a) / 2.0) / (PI.powf(d / 2.0) * gamma(-a / 2.0).abs()))
    }
}

/// Ball `B(center, radius)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::BadGeometry(format!("ball radius {radius}")));
        }
        Ok(BallSpec { center, radius })
    }

    fn offset(&self, x: &[f64]) -> f64 {
        self.center
            .iter()
            .zip(x)
            .map(|(c, v)| (v - c) * (v - c))
            .sum::<f64>()
            .sqrt()
    }
}

/// Expected exit time from the origin-centred ball of radius `r`:
/// `C_B (r² − |x|²)^{α/2}`.
pub fn ball_phi(p: &StableParams, r: f64, x: &[f64]) -> Result<f64> {
    let n2: f64 = x.iter().map(|v| v * v).sum();
    let n = n2.sqrt();
    if n > r * (1.0 + 1e-14) {
        return Err(Error::OutsideBall {
            distance: n,
            radius: r,
        });
    }
    let gap = (r * r - n2).max(0.0);
    Ok(p.c_b() * gap.powf(p.alpha / 2.0))
}

/// Density of the exit position of the planar Cauchy process started at `x`
/// inside the disk `ball`, at an exterior point `y`.
pub fn disk_poisson_density(ball: &BallSpec, x: [f64; 2], y: [f64; 2]) -> Result<f64> {
    let s = ball.radius;
    let rx = ball.offset(&x);
    let ry = ball.offset(&y);
    if ball.center.len() != 2 || rx >= s || ry <= s {
        return Err(Error::BadGeometry(format!(
            "need |x - z| < s < |y - z|, got {rx}, {s}, {ry}"
        )));
    }
    let dxy2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
    Ok(C_P * (s * s - rx * rx).sqrt() / ((ry * ry - s * s).sqrt() * dxy2))
}

/// Inhomogeneous part `h(x) = C_B (s² − |x − z|²)^{1/2}` of the one-step
/// representation on a disk (α = 1, d = 2).
pub fn disk_h(ball: &BallSpec, x: [f64; 2]) -> Result<f64> {
    let r = ball.offset(&x);
    if ball.center.len() != 2 || r > ball.radius * (1.0 + 1e-14) {
        return Err(Error::OutsideBall {
            distance: r,
            radius: ball.radius,
        });
    }
    Ok(2.0 / PI * (ball.radius * ball.radius - r * r).max(0.0).sqrt())
}

/// Radial CDF of the exit position from the centre of a disk (α = 1, d = 2):
/// `P(|Y − z| ≤ R) = (2/π) arccos(s/R)`.
pub fn disk_exit_radius_cdf(s: f64, r: f64) -> f64 {
    if r <= s {
        0.0
    } else {
        2.0 / PI * (s / r).acos()
    }
}

fn check_origin(x: &Point3) -> Result<f64> {
    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    if r2 == 0.0 {
        return Err(Error::OriginSingular);
    }
    Ok(r2)
}

/// Half-space Poisson kernel `K(x) = C_K x3 / |x|³`.
pub fn kernel_k(x: Point3) -> Result<f64> {
    let r2 = check_origin(&x)?;
    Ok(C_K * x[2] / (r2 * r2.sqrt()))
}

pub fn kernel_k_grad(x: Point3) -> Result<[f64; 3]> {
    let r2 = check_origin(&x)?;
    let r5 = r2 * r2 * r2.sqrt();
    let [x1, x2, x3] = x;
    Ok([
        -3.0 * C_K * x3 * x1 / r5,
        -3.0 * C_K * x3 * x2 / r5,
        C_K * (x1 * x1 + x2 * x2 - 2.0 * x3 * x3) / r5,
    ])
}

/// Second derivatives of `K`; the trace vanishes identically.
pub fn kernel_k_hess(x: Point3) -> Result<Sym3> {
    let r2 = check_origin(&x)?;
    Ok(kernel_hess_unchecked(x, r2))
}

#[inline]
pub(crate) fn kernel_hess_unchecked(x: Point3, r2: f64) -> Sym3 {
    let [x1, x2, x3] = x;
    let r7 = r2 * r2 * r2 * r2.sqrt();
    let c = C_K / r7;
    let (s1, s2, s3) = (x1 * x1, x2 * x2, x3 * x3);
    Sym3::new(
        c * x3 * (12.0 * s1 - 3.0 * s2 - 3.0 * s3),
        c * 15.0 * x3 * x1 * x2,
        c * x1 * (12.0 * s3 - 3.0 * s1 - 3.0 * s2),
        c * x3 * (12.0 * s2 - 3.0 * s1 - 3.0 * s3),
        c * x2 * (12.0 * s3 - 3.0 * s1 - 3.0 * s2),
        c * x3 * (6.0 * s3 - 9.0 * s1 - 9.0 * s2),
    )
}

fn shifted(x: Point3) -> Result<Point3> {
    if x[2] <= -W_SHIFT {
        return Err(Error::BelowPole(x[2]));
    }
    Ok([x[0], x[1], x[2] + W_SHIFT])
}

/// Auxiliary harmonic function `w(x) = K(x1, x2, x3 + √(3/2))`.
pub fn aux_w(x: Point3) -> Result<f64> {
    kernel_k(shifted(x)?)
}

pub fn aux_w_hess(x: Point3) -> Result<Sym3> {
    kernel_k_hess(shifted(x)?)
}

/// Closed-form Hessian determinant of `w`:
/// `C_K³ · 27 x̄3 (x1² + x2² + 2 x̄3²) / |x̄|^{15}` with `x̄3 = x3 + √(3/2)`.
pub fn aux_w_hess_det(x: Point3) -> Result<f64> {
    let [x1, x2, x3] = shifted(x)?;
    let rho2 = x1 * x1 + x2 * x2;
    let r2 = rho2 + x3 * x3;
    Ok(C_K.powi(3) * 27.0 * x3 * (rho2 + 2.0 * x3 * x3) / r2.powf(7.5))
}

/// Harmonic quadratic `−x1²/2 − x2²/2 + x3²`.
pub fn eps_quadratic(x: Point3) -> f64 {
    -0.5 * x[0] * x[0] - 0.5 * x[1] * x[1] + x[2] * x[2]
}

/// Hessian of [`eps_quadratic`].
pub const EPS_QUADRATIC_HESS: Sym3 = Sym3::diag(-1.0, -1.0, 2.0);
