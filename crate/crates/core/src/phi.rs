//! Sources for the exit-time function `φ` on a planar domain.

use crate::closedform::StableParams;
use crate::error::{Error, Result};
use crate::geom::{Point2, SupportDomain};

/// Something that can evaluate `φ` (and possibly its derivatives) on the plane.
///
/// Implementations return 0 outside the domain.
pub trait PhiEval: Sync {
    fn value(&self, y: Point2) -> f64;

    /// One-sigma uncertainty of [`PhiEval::value`]; zero for exact sources.
    fn stderr(&self, _y: Point2) -> f64 {
        0.0
    }

    /// `(φ_11, φ_12, φ_22)` when available in closed form.
    fn hessian(&self, _y: Point2) -> Option<[f64; 3]> {
        None
    }

    /// `(φ_1, φ_2)` when available in closed form.
    fn gradient(&self, _y: Point2) -> Option<[f64; 2]> {
        None
    }

    /// Step for finite-difference derivatives when no closed form exists.
    fn fd_step(&self) -> f64 {
        1e-3
    }

    /// Whether values carry statistical error.
    fn noisy(&self) -> bool {
        false
    }

    /// Whether this source describes `φ` on `dom`.
    fn matches_domain(&self, _dom: &SupportDomain) -> bool {
        true
    }
}

/// `φ` on the origin-centred ball of radius `r`: `C_B (r² − |y|²)^{α/2}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallPhi {
    params: StableParams,
    radius: f64,
    c_b: f64,
}

impl BallPhi {
    pub fn new(params: StableParams, radius: f64) -> Result<Self> {
        if params.dim() != 2 {
            return Err(Error::InvalidParameter(format!(
                "planar source needs d = 2, got {}",
                params.dim()
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::BadGeometry(format!("ball radius {radius}")));
        }
        Ok(BallPhi {
            params,
            radius,
            c_b: params.c_b(),
        })
    }

    /// The planar Cauchy process on the unit disk: `(2/π) √(1 − |y|²)`.
    pub fn unit_cauchy() -> Self {
        BallPhi::new(StableParams::cauchy_2d(), 1.0).expect("valid parameters")
    }

    pub fn params(&self) -> StableParams {
        self.params
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn gap(&self, y: Point2) -> f64 {
        self.radius * self.radius - y[0] * y[0] - y[1] * y[1]
    }
}

impl PhiEval for BallPhi {
    fn matches_domain(&self, dom: &SupportDomain) -> bool {
        dom.disk_radius() == Some(self.radius)
    }

    fn value(&self, y: Point2) -> f64 {
        let g = self.gap(y);
        if g <= 0.0 {
            0.0
        } else {
            self.c_b * g.powf(self.params.alpha() / 2.0)
        }
    }

    fn gradient(&self, y: Point2) -> Option<[f64; 2]> {
        let g = self.gap(y);
        if g <= 0.0 {
            return None;
        }
        let a = self.params.alpha();
        let f = -a * self.c_b * g.powf(a / 2.0 - 1.0);
        Some([f * y[0], f * y[1]])
    }

    fn hessian(&self, y: Point2) -> Option<[f64; 3]> {
        let g = self.gap(y);
        if g <= 0.0 {
            return None;
        }
        // ∂_i∂_j C g^{a} = −2aC g^{a−2} (g δ_ij − 2(a−1) y_i y_j), a = α/2.
        let a = self.params.alpha() / 2.0;
        let f = -2.0 * a * self.c_b * g.powf(a - 2.0);
        let m = -2.0 * (a - 1.0);
        Some([
            f * (g + m * y[0] * y[0]),
            f * m * y[0] * y[1],
            f * (g + m * y[1] * y[1]),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_cauchy_values() {
        let p = BallPhi::unit_cauchy();
        assert!((p.value([0.0, 0.0]) - 2.0 / PI).abs() < 1e-15);
        assert!((p.value([0.6, 0.0]) - 2.0 / PI * 0.8).abs() < 1e-15);
        assert_eq!(p.value([1.2, 0.0]), 0.0);
        let h = p.hessian([0.0, 0.0]).unwrap();
        assert!((h[0] + 2.0 / PI).abs() < 1e-15 && h[1] == 0.0);
    }

    #[test]
    fn derivatives_match_differences() {
        for alpha in [0.5, 1.0, 1.5, 2.0] {
            let p = BallPhi::new(StableParams::new(alpha, 2).unwrap(), 1.3).unwrap();
            let y = [0.4, -0.55];
            let e = 1e-5;
            let d = |a: Point2, b: Point2| (p.value(a) - p.value(b)) / (2.0 * e);
            let g = p.gradient(y).unwrap();
            assert!((g[0] - d([y[0] + e, y[1]], [y[0] - e, y[1]])).abs() < 1e-7);
            assert!((g[1] - d([y[0], y[1] + e], [y[0], y[1] - e])).abs() < 1e-7);
            let h = p.hessian(y).unwrap();
            let gd = |a: Point2, b: Point2, k: usize| {
                (p.gradient(a).unwrap()[k] - p.gradient(b).unwrap()[k]) / (2.0 * e)
            };
            assert!((h[0] - gd([y[0] + e, y[1]], [y[0] - e, y[1]], 0)).abs() < 1e-6);
            assert!((h[1] - gd([y[0], y[1] + e], [y[0], y[1] - e], 0)).abs() < 1e-6);
            assert!((h[2] - gd([y[0], y[1] + e], [y[0], y[1] - e], 1)).abs() < 1e-6);
        }
    }
}
