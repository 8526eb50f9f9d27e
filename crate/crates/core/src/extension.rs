//! The harmonic extension `u` of `φ` to `R³ \ (D^c × {0})`.
//!
//! Above the plane `u = ∫_D K(x − y) φ(y) dy`; below it
//! `u(x1, x2, x3) = u(x1, x2, −x3) − 2 x3`; on the slab `D × {0}` it equals
//! `φ`. Derivatives above the plane come from the analytic derivatives of
//! `K` under the integral, never from differencing `u`.

use serde::{Deserialize, Serialize};

use crate::closedform::{
    aux_w_hess, eps_quadratic, kernel_hess_unchecked, Point3, C_K, EPS_QUADRATIC_HESS,
};
use crate::error::{Error, Result};
use crate::geom::{Point2, SupportDomain};
use crate::linalg::{Signature, Sym3};
use crate::phi::PhiEval;
use crate::quad::{integrate_vec, QuadResult, QuadSpec};

/// Zero threshold for eigenvalues, relative to the largest `|λ|`.
pub const SIGNATURE_REL_TOL: f64 = 1e-9;
/// Points closer than this to `∂D` count as on the boundary for slab queries.
pub const SLAB_BOUNDARY_TOL: f64 = 1e-9;

/// A value with an absolute error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Which function's Hessian to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Which {
    U,
    /// `v^ε = u + ε (−x1²/2 − x2²/2 + x3²)`.
    VEps(f64),
    /// `Ψ^b = (1 − b) u + b w`.
    PsiB(f64),
}

impl Which {
    /// Parses `u`, `veps:<ε>` or `psib:<b>`.
    pub fn parse(s: &str) -> Result<Which> {
        let bad = || Error::InvalidParameter(format!("bad function selector {s:?}"));
        match s.split_once(':') {
            None if s == "u" => Ok(Which::U),
            Some(("veps", v)) => Ok(Which::VEps(v.parse().map_err(|_| bad())?)),
            Some(("psib", v)) => {
                let b: f64 = v.parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&b) {
                    return Err(bad());
                }
                Ok(Which::PsiB(b))
            }
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for Which {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Which::U => write!(f, "u"),
            Which::VEps(e) => write!(f, "veps:{e}"),
            Which::PsiB(b) => write!(f, "psib:{b}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HessianSample {
    pub x: Point3,
    pub hess: Sym3,
    /// Absolute error estimate of each entry.
    pub err: Sym3,
    pub det: f64,
    pub det_err: f64,
    pub trace: f64,
    pub trace_err: f64,
    pub signature: Signature,
}

impl HessianSample {
    fn new(x: Point3, hess: Sym3, err: Sym3) -> Self {
        HessianSample {
            x,
            hess,
            err,
            det: hess.det(),
            det_err: hess.det_error(&err),
            trace: hess.trace(),
            trace_err: err.m11 + err.m22 + err.m33,
            signature: hess.signature(SIGNATURE_REL_TOL),
        }
    }
}

/// Evaluation context: a domain, a source for `φ` on it and quadrature settings.
pub struct ExtensionContext<'a> {
    dom: &'a SupportDomain,
    phi: &'a dyn PhiEval,
    quad: QuadSpec,
    anchor_at_projection: bool,
}

impl<'a> ExtensionContext<'a> {
    pub fn new(dom: &'a SupportDomain, phi: &'a dyn PhiEval, quad: QuadSpec) -> Result<Self> {
        quad.validate()?;
        if !phi.matches_domain(dom) {
            return Err(Error::InvalidParameter(
                "the source for phi belongs to a different domain".into(),
            ));
        }
        Ok(ExtensionContext {
            dom,
            phi,
            quad,
            anchor_at_projection: true,
        })
    }

    /// Anchors every quadrature at the origin instead of near the projection
    /// of the evaluation point, giving an independent cell layout.
    pub fn with_origin_anchor(mut self) -> Self {
        self.anchor_at_projection = false;
        self
    }

    pub fn domain(&self) -> &SupportDomain {
        self.dom
    }

    pub fn phi(&self) -> &dyn PhiEval {
        self.phi
    }

    pub fn quad(&self) -> &QuadSpec {
        &self.quad
    }

    /// Interior polar anchor near the projection `p` of an evaluation point.
    fn anchor_for(&self, p: Point2) -> Point2 {
        if !self.anchor_at_projection {
            return [0.0, 0.0];
        }
        let (d, theta) = self.dom.signed_distance_with_normal(p);
        let floor = 1e-3 * self.dom.min_support();
        if d > floor {
            return p;
        }
        let depth = d.abs().clamp(floor, 0.25 * self.dom.min_support());
        let b = self.dom.boundary_point(theta);
        let (s, c) = theta.sin_cos();
        [b[0] - depth * c, b[1] - depth * s]
    }

    fn spec_at(&self, p: Point2) -> QuadSpec {
        QuadSpec {
            singular_center: Some(self.anchor_for(p)),
            ..self.quad
        }
    }

    /// Runs the quadrature for `f · φ` and, for noisy sources, bounds the
    /// propagated noise by `∫ |f| σ`; the two errors are combined in quadrature.
    fn integrate_against_phi<const N: usize>(
        &self,
        p: Point2,
        f: impl Fn(Point2) -> [f64; N] + Sync,
    ) -> Result<([f64; N], [f64; N])> {
        let spec = self.spec_at(p);
        let phi = self.phi;
        let r: QuadResult<N> = integrate_vec(
            self.dom,
            |y| {
                let v = phi.value(y);
                f(y).map(|k| k * v)
            },
            &spec,
        )?;
        if !r.converged {
            let rel = |k: usize| r.error[k] / r.value[k].abs().max(1e-300);
            let k = (0..N)
                .max_by(|&a, &b| rel(a).total_cmp(&rel(b)))
                .unwrap_or(0);
            return Err(Error::NonConverged {
                value: r.value[k],
                error: r.error[k],
                cells: r.cells,
            });
        }
        let mut err = r.error;
        if phi.noisy() {
            let loose = QuadSpec {
                rel_tol: 1e-2,
                abs_tol: 1e-12,
                ..spec
            };
            let noise = integrate_vec(
                self.dom,
                |y| {
                    let s = phi.stderr(y);
                    f(y).map(|k| k.abs() * s)
                },
                &loose,
            )?;
            for k in 0..N {
                err[k] = err[k].hypot(noise.value[k]);
            }
        }
        Ok((r.value, err))
    }

    fn slab_point(&self, x: Point3) -> Result<f64> {
        let d = self.dom.signed_distance([x[0], x[1]]);
        if d < -SLAB_BOUNDARY_TOL {
            return Err(Error::UndefinedOnCut(x));
        }
        Ok(d)
    }

    /// `u(x)`.
    pub fn eval_u(&self, x: Point3) -> Result<Estimate> {
        if x[2] == 0.0 {
            let d = self.slab_point(x)?;
            let p = [x[0], x[1]];
            if d <= SLAB_BOUNDARY_TOL {
                return Ok(Estimate {
                    value: 0.0,
                    error: 0.0,
                });
            }
            return Ok(Estimate {
                value: self.phi.value(p),
                error: self.phi.stderr(p),
            });
        }
        let t = x[2].abs();
        let p = [x[0], x[1]];
        let ([v], [e]) = self.integrate_against_phi(p, |y| {
            let dx = x[0] - y[0];
            let dy = x[1] - y[1];
            let r2 = dx * dx + dy * dy + t * t;
            [C_K * t / (r2 * r2.sqrt())]
        })?;
        let value = if x[2] > 0.0 { v } else { v + 2.0 * t };
        Ok(Estimate { value, error: e })
    }

    /// `∇u(x)` for `x3 ≠ 0`.
    pub fn eval_gradient(&self, x: Point3) -> Result<([f64; 3], [f64; 3])> {
        if x[2] == 0.0 {
            return Err(Error::InvalidParameter(
                "gradient is evaluated off the plane only".into(),
            ));
        }
        let t = x[2].abs();
        let (g, e) = self.integrate_against_phi([x[0], x[1]], |y| {
            let dx = x[0] - y[0];
            let dy = x[1] - y[1];
            let r2 = dx * dx + dy * dy + t * t;
            let r5 = r2 * r2 * r2.sqrt();
            [
                -3.0 * C_K * t * dx / r5,
                -3.0 * C_K * t * dy / r5,
                C_K * (dx * dx + dy * dy - 2.0 * t * t) / r5,
            ]
        })?;
        if x[2] > 0.0 {
            Ok((g, e))
        } else {
            Ok(([g[0], g[1], -g[2] - 2.0], e))
        }
    }

    fn hessian_above(&self, x: Point3) -> Result<(Sym3, Sym3)> {
        let (v, e) = self.integrate_against_phi([x[0], x[1]], |y| {
            let d = [x[0] - y[0], x[1] - y[1], x[2]];
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            kernel_hess_unchecked(d, r2).to_array()
        })?;
        Ok((Sym3::from_array(v), Sym3::from_array(e)))
    }

    /// Second derivatives of `φ` at an interior slab point, with errors.
    fn slab_hessian(&self, p: Point2, depth: f64) -> ([f64; 3], [f64; 3]) {
        if let Some(h) = self.phi.hessian(p) {
            let scale = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            return (h, [1e-14 * scale; 3]);
        }
        let step = self.phi.fd_step().min(depth / 3.0);
        let f = |a: f64, b: f64| self.phi.value([p[0] + a, p[1] + b]);
        let stencil = |h: f64| {
            let c = f(0.0, 0.0);
            [
                (f(h, 0.0) - 2.0 * c + f(-h, 0.0)) / (h * h),
                (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h),
                (f(0.0, h) - 2.0 * c + f(0.0, -h)) / (h * h),
            ]
        };
        let fine = stencil(step);
        let coarse = stencil(0.5 * step);
        let noise = 4.0 * self.phi.stderr(p) / (0.25 * step * step);
        // Richardson: the difference of the two steps bounds the truncation error.
        let est: [f64; 3] = std::array::from_fn(|k| (4.0 * coarse[k] - fine[k]) / 3.0);
        let err: [f64; 3] = std::array::from_fn(|k| (coarse[k] - fine[k]).abs() + noise);
        (est, err)
    }

    fn hessian_u(&self, x: Point3) -> Result<(Sym3, Sym3)> {
        if x[2] > 0.0 {
            return self.hessian_above(x);
        }
        if x[2] < 0.0 {
            let (h, e) = self.hessian_above([x[0], x[1], -x[2]])?;
            let flipped = Sym3 {
                m13: -h.m13,
                m23: -h.m23,
                ..h
            };
            return Ok((flipped, e));
        }
        let d = self.slab_point(x)?;
        if d <= SLAB_BOUNDARY_TOL {
            return Err(Error::OnBoundary(x.to_vec()));
        }
        let (h, e) = self.slab_hessian([x[0], x[1]], d);
        Ok((
            Sym3::new(h[0], h[1], 0.0, h[2], 0.0, -h[0] - h[2]),
            Sym3::new(e[0], e[1], 0.0, e[2], 0.0, e[0] + e[2]),
        ))
    }

    /// Hessian of `u`, `v^ε` or `Ψ^b` at `x` with determinant, trace and signature.
    pub fn eval_hessian(&self, x: Point3, which: Which) -> Result<HessianSample> {
        let (hess, err) = match which {
            Which::U => self.hessian_u(x)?,
            Which::VEps(eps) => {
                let (h, e) = self.hessian_u(x)?;
                (h + eps * EPS_QUADRATIC_HESS, e)
            }
            Which::PsiB(b) => {
                let w = aux_w_hess(x)?;
                if b == 1.0 {
                    let scale = w.to_array().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    (w, w.map(|_| 1e-15 * scale))
                } else {
                    let (h, e) = self.hessian_u(x)?;
                    ((1.0 - b) * h + b * w, (1.0 - b) * e)
                }
            }
        };
        Ok(HessianSample::new(x, hess, err))
    }

    /// Value of `v^ε` at `x`.
    pub fn eval_v_eps(&self, x: Point3, eps: f64) -> Result<Estimate> {
        let u = self.eval_u(x)?;
        Ok(Estimate {
            value: u.value + eps * eps_quadratic(x),
            error: u.error,
        })
    }

    /// `(−Δ)^{1/2} φ` at a point of the plane outside `D̄`:
    /// `−(2π)^{-1} ∫_D φ(y) |y − x|^{-3} dy`.
    pub fn exterior_half_laplacian(&self, x: Point2) -> Result<Estimate> {
        let d = self.dom.signed_distance(x);
        if d.abs() <= SLAB_BOUNDARY_TOL {
            return Err(Error::OnBoundary(x.to_vec()));
        }
        if d > 0.0 {
            return Err(Error::InsideDomain(x.to_vec()));
        }
        let ([v], [e]) = self.integrate_against_phi(x, |y| {
            let r2 = (y[0] - x[0]).powi(2) + (y[1] - x[1]).powi(2);
            [-C_K / (r2 * r2.sqrt())]
        })?;
        Ok(Estimate { value: v, error: e })
    }

    /// Normal derivative `u_3` on the plane: `−1` on `D`, and
    /// `−(−Δ)^{1/2} φ > 0` outside.
    pub fn eval_u3_slab(&self, x: Point2) -> Result<Estimate> {
        let d = self.dom.signed_distance(x);
        if d.abs() <= SLAB_BOUNDARY_TOL {
            return Err(Error::OnBoundary(x.to_vec()));
        }
        if d > 0.0 {
            return Ok(Estimate {
                value: -1.0,
                error: 0.0,
            });
        }
        let e = self.exterior_half_laplacian(x)?;
        Ok(Estimate {
            value: -e.value,
            error: e.error,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phi::BallPhi;
    use std::f64::consts::PI;

    fn with_ctx<T>(f: impl FnOnce(&ExtensionContext) -> T) -> T {
        let dom = SupportDomain::disk(1.0).unwrap();
        let phi = BallPhi::unit_cauchy();
        let ctx = ExtensionContext::new(
            &dom,
            &phi,
            QuadSpec {
                rel_tol: 1e-9,
                ..QuadSpec::default()
            },
        )
        .unwrap();
        f(&ctx)
    }

    #[test]
    fn slab_values() {
        with_ctx(|ctx| {
            assert!((ctx.eval_u([0.0, 0.0, 0.0]).unwrap().value - 2.0 / PI).abs() < 1e-15);
            assert_eq!(ctx.eval_u([1.0, 0.0, 0.0]).unwrap().value, 0.0);
            assert!(matches!(
                ctx.eval_u([1.5, 0.0, 0.0]),
                Err(Error::UndefinedOnCut(_))
            ));
            assert_eq!(ctx.eval_u3_slab([0.5, 0.0]).unwrap().value, -1.0);
            assert!(matches!(
                ctx.eval_u3_slab([1.0, 0.0]),
                Err(Error::OnBoundary(_))
            ));
        });
    }

    #[test]
    fn reflection_of_values() {
        with_ctx(|ctx| {
            let up = ctx.eval_u([0.0, 0.0, 1.0]).unwrap();
            let down = ctx.eval_u([0.0, 0.0, -1.0]).unwrap();
            assert!((down.value - up.value - 2.0).abs() < 1e-14);
            // 2/π − 1/2 in closed form.
            assert!((up.value - (2.0 / PI - 0.5)).abs() < 1e-8, "{up:?}");
        });
    }

    #[test]
    fn origin_hessian() {
        with_ctx(|ctx| {
            let s = ctx.eval_hessian([0.0, 0.0, 0.0], Which::U).unwrap();
            assert!((s.hess.m11 + 2.0 / PI).abs() < 1e-14);
            assert!((s.hess.m33 - 4.0 / PI).abs() < 1e-14);
            assert!((s.det - 16.0 / PI.powi(3)).abs() < 1e-13);
            assert_eq!(s.signature, Signature::ONE_TWO);
        });
    }

    #[test]
    fn exterior_normal_derivative_disk() {
        with_ctx(|ctx| {
            for r in [1.2f64, 2.0, 4.0] {
                let v = ctx.eval_u3_slab([0.0, r]).unwrap();
                let exact = 2.0 / PI * (1.0 / (r * r - 1.0).sqrt() - (1.0 / r).asin());
                assert!(
                    (v.value - exact).abs() < 1e-8 * exact.max(1e-3),
                    "{r}: {v:?} vs {exact}"
                );
            }
        });
    }

    #[test]
    fn selectors() {
        assert_eq!(Which::parse("u").unwrap(), Which::U);
        assert_eq!(Which::parse("veps:0.001").unwrap(), Which::VEps(0.001));
        assert_eq!(Which::parse("psib:0.5").unwrap(), Which::PsiB(0.5));
        assert!(Which::parse("psib:2").is_err());
        assert!(Which::parse("w").is_err());
        assert_eq!(
            Which::parse(&Which::VEps(0.25).to_string()).unwrap(),
            Which::VEps(0.25)
        );
    }

    #[test]
    fn mismatched_source_rejected() {
        let dom = SupportDomain::disk(0.9).unwrap();
        let phi = BallPhi::unit_cauchy();
        assert!(ExtensionContext::new(&dom, &phi, QuadSpec::default()).is_err());
    }
}
