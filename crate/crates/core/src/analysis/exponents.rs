use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fmt_full;
use crate::closedform::Point3;
use crate::error::{Error, Result};
use crate::extension::{ExtensionContext, Which};
use crate::geom::Point2;
use crate::linalg::Sym3;

/// Fits whose slope standard error exceeds this are flagged, not judged.
pub const LOW_CONFIDENCE_STDERR: f64 = 0.1;

/// Probe geometry in the local frame at a boundary point `b`: `e1` is the
/// inward normal, `e2` the tangent, `e3` vertical.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Probe {
    /// Points `b ± h e1` of the plane: inside for `φ`, outside for the
    /// exterior half-Laplacian.
    NormalSlab,
    /// `(−h, 0, h/8)`.
    S1,
    /// `(−h, 0, h/2)`.
    S2,
    /// `(h/2, 0, h)`.
    S3,
    /// `(h, 0, h/8)`.
    S4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    /// Inward normal derivative of `φ`.
    PhiN,
    PhiNN,
    /// Second tangential derivative of `φ`.
    PhiTT,
    U11,
    U13,
    U22,
    U23,
    U33,
    ExtHalfLap,
}

impl Probe {
    pub fn parse(s: &str) -> Result<Probe> {
        Ok(match s {
            "normal-slab" => Probe::NormalSlab,
            "S1" | "s1" => Probe::S1,
            "S2" | "s2" => Probe::S2,
            "S3" | "s3" => Probe::S3,
            "S4" | "s4" => Probe::S4,
            _ => return Err(Error::InvalidParameter(format!("unknown probe {s:?}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Probe::NormalSlab => "normal-slab",
            Probe::S1 => "S1",
            Probe::S2 => "S2",
            Probe::S3 => "S3",
            Probe::S4 => "S4",
        }
    }

    /// Local coordinates `(x1, x3)` of the probe point at scale `h`.
    fn local(self, h: f64) -> (f64, f64) {
        match self {
            Probe::NormalSlab => (h, 0.0),
            Probe::S1 => (-h, h / 8.0),
            Probe::S2 => (-h, h / 2.0),
            Probe::S3 => (h / 2.0, h),
            Probe::S4 => (h, h / 8.0),
        }
    }
}

impl Quantity {
    pub fn parse(s: &str) -> Result<Quantity> {
        Ok(match s {
            "phi_n" => Quantity::PhiN,
            "phi_nn" => Quantity::PhiNN,
            "phi_TT" | "phi_tt" => Quantity::PhiTT,
            "u11" => Quantity::U11,
            "u13" => Quantity::U13,
            "u22" => Quantity::U22,
            "u23" => Quantity::U23,
            "u33" => Quantity::U33,
            "ext_half_lap" => Quantity::ExtHalfLap,
            _ => return Err(Error::InvalidParameter(format!("unknown quantity {s:?}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Quantity::PhiN => "phi_n",
            Quantity::PhiNN => "phi_nn",
            Quantity::PhiTT => "phi_TT",
            Quantity::U11 => "u11",
            Quantity::U13 => "u13",
            Quantity::U22 => "u22",
            Quantity::U23 => "u23",
            Quantity::U33 => "u33",
            Quantity::ExtHalfLap => "ext_half_lap",
        }
    }

    fn on_slab(self) -> bool {
        matches!(
            self,
            Quantity::PhiN | Quantity::PhiNN | Quantity::PhiTT | Quantity::ExtHalfLap
        )
    }
}

/// Expected `(slope, sign)` of a quantity on a probe, where known.
fn expectation(probe: Probe, q: Quantity) -> (Option<f64>, Option<f64>) {
    use Probe::*;
    use Quantity::*;
    match (q, probe) {
        (PhiN, _) => (Some(-0.5), Some(1.0)),
        (PhiNN, _) => (Some(-1.5), Some(-1.0)),
        (PhiTT, _) => (Some(-0.5), Some(-1.0)),
        (ExtHalfLap, _) => (Some(-0.5), Some(-1.0)),
        (U13, S1) => (Some(-1.5), Some(1.0)),
        (U13, S3) => (Some(-1.5), Some(-1.0)),
        (U13, S4) => (None, Some(-1.0)),
        (U11, S2) => (Some(-1.5), Some(1.0)),
        (U11, S4) => (Some(-1.5), Some(-1.0)),
        (U33, S2) => (Some(-1.5), Some(-1.0)),
        (U33, S4) => (Some(-1.5), Some(1.0)),
        // On S1–S3 the probe height is proportional to h, so `−x3 h^{-3/2}` is `h^{-1/2}`.
        (U22, _) => (Some(-0.5), Some(-1.0)),
        _ => (None, None),
    }
}

/// Log-log regression of `|quantity|` against the probe scale `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub probe: Probe,
    pub quantity: Quantity,
    /// Outward normal angle of the boundary point anchoring the frame.
    pub theta: f64,
    pub h: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub target_slope: Option<f64>,
    pub expected_sign: Option<f64>,
    /// Whether every value has the expected sign (true when none is expected).
    pub signs_ok: bool,
    pub low_confidence: bool,
}

impl ExponentFit {
    /// `None` when no target exists or the fit is low-confidence.
    pub fn slope_within(&self, tol: f64) -> Option<bool> {
        let t = self.target_slope?;
        (!self.low_confidence).then(|| (self.slope - t).abs() <= tol)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("fit serialises");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,value,error\n");
        for k in 0..self.h.len() {
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt_full(self.h[k]),
                fmt_full(self.values[k]),
                fmt_full(self.errors[k])
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let target = self
            .target_slope
            .map_or("none".to_string(), |t| format!("{t}"));
        format!(
            "{} on {}: slope {:.5e} +- {:.5e} (target {}), signs {}{}",
            self.quantity.name(),
            self.probe.name(),
            self.slope,
            self.slope_stderr,
            target,
            if self.signs_ok { "ok" } else { "WRONG" },
            if self.low_confidence {
                ", low confidence"
            } else {
                ""
            }
        )
    }
}

/// Ordinary least squares `y = a + s x`; returns `(s, stderr(s), a)`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let s = sxy / sxx;
    let a = my - s * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a0, b)| (b - a - s * a0).powi(2))
        .sum();
    let stderr = if x.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    (s, stderr, a)
}

fn check_range(hs: &[f64]) -> Result<()> {
    if hs.len() < 5 || hs.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(Error::InsufficientRange(format!(
            "need at least 5 positive h values, got {}",
            hs.len()
        )));
    }
    let lo = hs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = hs.iter().cloned().fold(0.0, f64::max);
    if hi < 5.0 * lo {
        return Err(Error::InsufficientRange(format!(
            "h values span a factor {:.3} < 5",
            hi / lo
        )));
    }
    Ok(())
}

/// Measures `quantity` on the probe family at each `h` in the frame anchored
/// at the boundary point with outward normal angle `theta`, and fits the
/// log-log slope.
pub fn boundary_exponent_fit(
    ctx: &ExtensionContext,
    probe: Probe,
    quantity: Quantity,
    hs: &[f64],
    theta: f64,
) -> Result<ExponentFit> {
    check_range(hs)?;
    if quantity.on_slab() != (probe == Probe::NormalSlab) {
        return Err(Error::InvalidParameter(format!(
            "{} is not measured on probe {}",
            quantity.name(),
            probe.name()
        )));
    }
    let samples: Vec<(f64, f64)> = hs
        .par_iter()
        .map(|&h| measure(ctx, probe, quantity, h, theta))
        .collect::<Result<_>>()?;
    let (values, errors): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
    if values.iter().any(|v| *v == 0.0 || !v.is_finite()) {
        return Err(Error::InsufficientRange(format!(
            "{} vanishes on probe {}; no power law to fit",
            quantity.name(),
            probe.name()
        )));
    }
    let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.abs().ln()).collect();
    let (slope, slope_stderr, intercept) = fit_slope(&lx, &ly);
    let (target_slope, expected_sign) = expectation(probe, quantity);
    let signs_ok = expected_sign.is_none_or(|s| values.iter().all(|v| v * s > 0.0));
    Ok(ExponentFit {
        probe,
        quantity,
        theta,
        h: hs.to_vec(),
        values,
        errors,
        slope,
        slope_stderr,
        intercept,
        target_slope,
        expected_sign,
        signs_ok,
        low_confidence: !(slope_stderr <= LOW_CONFIDENCE_STDERR),
    })
}

fn measure(
    ctx: &ExtensionContext,
    probe: Probe,
    q: Quantity,
    h: f64,
    theta: f64,
) -> Result<(f64, f64)> {
    let dom = ctx.domain();
    let b = dom.boundary_point(theta);
    let inward = theta + PI;
    let (si, ci) = inward.sin_cos();
    let (x1, x3) = probe.local(h);
    let at = |s: f64| -> Point2 { [b[0] + s * ci, b[1] + s * si] };
    let phi = ctx.phi();
    match q {
        Quantity::PhiN => {
            let y = at(x1);
            if let Some(g) = phi.gradient(y) {
                return Ok((g[0] * ci + g[1] * si, 0.0));
            }
            let e = phi.fd_step().min(h / 4.0);
            let v = (phi.value(at(x1 + e)) - phi.value(at(x1 - e))) / (2.0 * e);
            Ok((v, phi.stderr(y) * 2.0_f64.sqrt() / (2.0 * e)))
        }
        Quantity::PhiNN | Quantity::PhiTT => {
            let y = at(x1);
            let (h2, err) = plane_hessian(ctx, y, h);
            let m = Sym3::new(h2[0], h2[1], 0.0, h2[2], 0.0, 0.0).rotate_12(inward);
            Ok(if q == Quantity::PhiNN {
                (m.m11, err)
            } else {
                (m.m22, err)
            })
        }
        Quantity::ExtHalfLap => {
            let e = ctx.exterior_half_laplacian(at(-h))?;
            Ok((e.value, e.error))
        }
        _ => {
            let y = at(x1);
            let x: Point3 = [y[0], y[1], x3];
            let s = ctx.eval_hessian(x, Which::U)?;
            let m = s.hess.rotate_12(inward);
            let e = s.err.rotate_12(inward).map(f64::abs);
            Ok(match q {
                Quantity::U11 => (m.m11, e.m11),
                Quantity::U13 => (m.m13, e.m13),
                Quantity::U22 => (m.m22, e.m22),
                Quantity::U23 => (m.m23, e.m23),
                _ => (m.m33, e.m33),
            })
        }
    }
}

/// `(φ_11, φ_12, φ_22)` at `y` with a crude error, by closed form or differences.
fn plane_hessian(ctx: &ExtensionContext, y: Point2, h: f64) -> ([f64; 3], f64) {
    let phi = ctx.phi();
    if let Some(m) = phi.hessian(y) {
        return (m, 0.0);
    }
    let e = phi.fd_step().min(h / 3.0);
    let f = |a: f64, b: f64| phi.value([y[0] + a, y[1] + b]);
    let c = f(0.0, 0.0);
    let m = [
        (f(e, 0.0) - 2.0 * c + f(-e, 0.0)) / (e * e),
        (f(e, e) - f(e, -e) - f(-e, e) + f(-e, -e)) / (4.0 * e * e),
        (f(0.0, e) - 2.0 * c + f(0.0, -e)) / (e * e),
    ];
    (m, 4.0 * phi.stderr(y) / (e * e))
}
