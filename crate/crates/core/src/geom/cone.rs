use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

use super::{Region, BOUNDARY_TOL};

/// Truncated circular cone `{x : |x'| < x1 tan θ, |x| < 1}` with apex at the origin
/// and axis `e1`, where `x' = (x2, …, xd)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeDomain {
    theta: f64,
    dim: usize,
}

impl ConeDomain {
    pub fn new(theta: f64, dim: usize) -> Result<Self> {
        if !(theta > 0.0 && theta < FRAC_PI_2) {
            return Err(Error::InvalidDomain(format!(
                "cone half-aperture {theta} not in (0, pi/2)"
            )));
        }
        if dim < 2 {
            return Err(Error::InvalidDomain(format!("cone dimension {dim} < 2")));
        }
        Ok(ConeDomain { theta, dim })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Signed distance: positive inside, non-positive outside (not a true
    /// exterior distance, only its sign is meaningful there).
    fn signed_gap(&self, x: &[f64]) -> f64 {
        let axial = x[0];
        let radial = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let (s, c) = self.theta.sin_cos();
        // Distance to the lateral surface for points inside the infinite cone.
        let lateral = axial * s - radial * c;
        let cap = 1.0 - (axial * axial + radial * radial).sqrt();
        lateral.min(cap)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && self.signed_gap(x) > BOUNDARY_TOL
    }
}

impl Region for ConeDomain {
    fn dim(&self) -> usize {
        self.dim
    }

    fn interior_distance(&self, x: &[f64]) -> Option<f64> {
        let d = self.signed_gap(x);
        (d > BOUNDARY_TOL).then_some(d)
    }
}
