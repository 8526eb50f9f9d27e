use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rayon::prelude::*;

use super::{halton, PointRecord, ScanReport, Verdict};
use crate::closedform::{aux_w_hess, Point3};
use crate::error::{Error, Result};
use crate::extension::{ExtensionContext, Which, SIGNATURE_REL_TOL};
use crate::geom::SupportDomain;
use crate::linalg::{Signature, Sym3};

/// Where scan points are placed.
#[derive(Clone, Debug, PartialEq)]
pub enum ScanRegion {
    /// `{|(x1, x2)| < m, 0 < x3 < m}`.
    Cylinder {
        m: f64,
    },
    /// Mirror image of [`ScanRegion::Cylinder`] below the plane.
    LowerCylinder {
        m: f64,
    },
    /// Open slab `D × {0}`, kept a little away from `∂D`.
    SlabInterior,
    /// `{1 − w < |(x1, x2)| < 1 + w, 0 < x3 < w}`: a collar of the unit circle.
    Collar {
        w: f64,
    },
    Points(Vec<Point3>),
}

/// Fraction of the ray to `∂D` covered by slab-interior points.
const SLAB_REACH: f64 = 0.95;

impl ScanRegion {
    /// Parses `cylinder:M=<m>`, `lower-cylinder:M=<m>`, `slab` or `collar:W=<w>`.
    pub fn parse(s: &str) -> Result<ScanRegion> {
        let bad = || Error::InvalidParameter(format!("bad region {s:?}"));
        let positive = |v: &str, key: &str| -> Result<f64> {
            let x: f64 = v
                .strip_prefix(key)
                .and_then(|t| t.strip_prefix('='))
                .ok_or_else(bad)?
                .parse()
                .map_err(|_| bad())?;
            if x > 0.0 && x.is_finite() {
                Ok(x)
            } else {
                Err(bad())
            }
        };
        match s.split_once(':') {
            None if s == "slab" => Ok(ScanRegion::SlabInterior),
            Some(("cylinder", v)) => Ok(ScanRegion::Cylinder {
                m: positive(v, "M")?,
            }),
            Some(("lower-cylinder", v)) => Ok(ScanRegion::LowerCylinder {
                m: positive(v, "M")?,
            }),
            Some(("collar", v)) => {
                let w = positive(v, "W")?;
                if w >= 1.0 {
                    return Err(bad());
                }
                Ok(ScanRegion::Collar { w })
            }
            _ => Err(bad()),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ScanRegion::Cylinder { m } => format!("cylinder:M={m}"),
            ScanRegion::LowerCylinder { m } => format!("lower-cylinder:M={m}"),
            ScanRegion::SlabInterior => "slab".into(),
            ScanRegion::Collar { w } => format!("collar:W={w}"),
            ScanRegion::Points(p) => format!("points:{}", p.len()),
        }
    }
}

/// The first `n` Halton points (bases 2, 3, 5) of the region; an explicit
/// point list is returned unchanged.
pub fn scan_points(region: &ScanRegion, n: usize, dom: &SupportDomain) -> Result<Vec<Point3>> {
    let h = |i: usize| {
        let i = i as u64 + 1;
        (halton(i, 2), halton(i, 3), halton(i, 5))
    };
    let pts = match region {
        ScanRegion::Points(p) => p.clone(),
        ScanRegion::Cylinder { m } | ScanRegion::LowerCylinder { m } => {
            let sign = if matches!(region, ScanRegion::Cylinder { .. }) {
                1.0
            } else {
                -1.0
            };
            (0..n)
                .map(|i| {
                    let (a, b, c) = h(i);
                    let r = m * a.sqrt();
                    let (s, co) = (TAU * b).sin_cos();
                    [r * co, r * s, sign * m * c]
                })
                .collect()
        }
        ScanRegion::SlabInterior => {
            let rays = dom.rays_from([0.0, 0.0])?;
            (0..n)
                .map(|i| {
                    let (a, b, _) = h(i);
                    let psi = TAU * b;
                    let r = SLAB_REACH * rays.exit_distance(psi) * a.sqrt();
                    let (s, co) = psi.sin_cos();
                    [r * co, r * s, 0.0]
                })
                .collect()
        }
        ScanRegion::Collar { w } => (0..n)
            .map(|i| {
                let (a, b, c) = h(i);
                let r = 1.0 - w + 2.0 * w * a;
                let (s, co) = (TAU * b).sin_cos();
                [r * co, r * s, w * c]
            })
            .collect(),
    };
    Ok(pts)
}

fn classify(det: f64, det_err: f64, sig: Signature) -> Verdict {
    if det.abs() <= 10.0 * det_err || det.is_nan() {
        Verdict::Indeterminate
    } else if det > 0.0 && sig == Signature::ONE_TWO {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

const HESSIAN_COLUMNS: [&str; 13] = [
    "x1", "x2", "x3", "u11", "u12", "u13", "u22", "u23", "u33", "det", "trace", "sig_pos",
    "sig_neg",
];

/// Determinant and signature of the Hessian of `which` at every region point.
/// Failed evaluations are recorded as indeterminate with `NaN` entries.
pub fn hessian_scan(
    ctx: &ExtensionContext,
    region: &ScanRegion,
    n: usize,
    which: Which,
) -> Result<ScanReport> {
    let start = std::time::Instant::now();
    let pts = scan_points(region, n, ctx.domain())?;
    let records: Vec<PointRecord> = pts
        .par_iter()
        .map(|&x| match ctx.eval_hessian(x, which) {
            Ok(s) => {
                let mut values = x.to_vec();
                values.extend(s.hess.to_array());
                values.extend([
                    s.det,
                    s.trace,
                    s.signature.pos as f64,
                    s.signature.neg as f64,
                ]);
                PointRecord {
                    values,
                    verdict: classify(s.det, s.det_err, s.signature),
                }
            }
            Err(_) => {
                let mut values = x.to_vec();
                values.resize(HESSIAN_COLUMNS.len(), f64::NAN);
                PointRecord {
                    values,
                    verdict: Verdict::Indeterminate,
                }
            }
        })
        .collect();
    let mut config = BTreeMap::new();
    config.insert("which".into(), which.to_string());
    config.insert("points".into(), pts.len().to_string());
    config.insert("rel_tol".into(), ctx.quad().rel_tol.to_string());
    let mut r = ScanReport::new(
        "hessian-scan",
        config,
        format!("halton:{}", region.describe()),
        HESSIAN_COLUMNS.iter().map(|s| s.to_string()).collect(),
        records,
        "det",
    );
    r.runtime_secs = start.elapsed().as_secs_f64();
    Ok(r)
}

/// Positivity of `det H(Ψ^b)` for every `b` of the grid at every region point;
/// the record keeps the smallest determinant over `b`.
pub fn psi_b_scan(
    ctx: &ExtensionContext,
    b_grid: &[f64],
    region: &ScanRegion,
    n: usize,
) -> Result<ScanReport> {
    if b_grid.is_empty() || b_grid.iter().any(|b| !(0.0..=1.0).contains(b)) {
        return Err(Error::InvalidParameter("b grid must lie in [0, 1]".into()));
    }
    let start = std::time::Instant::now();
    let pts = scan_points(region, n, ctx.domain())?;
    let records: Vec<PointRecord> = pts
        .par_iter()
        .map(|&x| psi_b_point(ctx, b_grid, x))
        .collect();
    let mut config = BTreeMap::new();
    config.insert(
        "b".into(),
        b_grid
            .iter()
            .map(|b| b.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    config.insert("points".into(), pts.len().to_string());
    let mut r = ScanReport::new(
        "psi-b-scan",
        config,
        format!("halton:{}", region.describe()),
        ["x1", "x2", "x3", "min_det", "argmin_b", "det_err"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        records,
        "min_det",
    );
    r.runtime_secs = start.elapsed().as_secs_f64();
    Ok(r)
}

fn psi_b_point(ctx: &ExtensionContext, b_grid: &[f64], x: Point3) -> PointRecord {
    let failed = || PointRecord {
        values: vec![x[0], x[1], x[2], f64::NAN, f64::NAN, f64::NAN],
        verdict: Verdict::Indeterminate,
    };
    let Ok(w) = aux_w_hess(x) else {
        return failed();
    };
    let needs_u = b_grid.iter().any(|&b| b < 1.0);
    let (h, e) = if needs_u {
        match ctx.eval_hessian(x, Which::U) {
            Ok(s) => (s.hess, s.err),
            Err(_) => return failed(),
        }
    } else {
        (Sym3::default(), Sym3::default())
    };
    let w_scale = w.to_array().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = (f64::INFINITY, f64::NAN, f64::NAN);
    let mut verdict = Verdict::Pass;
    for &b in b_grid {
        let m = (1.0 - b) * h + b * w;
        let err = ((1.0 - b) * e).map(|v| v + b * 1e-15 * w_scale);
        let det = m.det();
        let det_err = m.det_error(&err);
        let v = classify(det, det_err, m.signature(SIGNATURE_REL_TOL));
        verdict = match (verdict, v) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Indeterminate, _) | (_, Verdict::Indeterminate) => Verdict::Indeterminate,
            _ => Verdict::Pass,
        };
        if det < worst.0 {
            worst = (det, b, det_err);
        }
    }
    PointRecord {
        values: vec![x[0], x[1], x[2], worst.0, worst.1, worst.2],
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phi::BallPhi;
    use crate::quad::QuadSpec;

    #[test]
    fn region_parsing() {
        assert_eq!(
            ScanRegion::parse("cylinder:M=3").unwrap(),
            ScanRegion::Cylinder { m: 3.0 }
        );
        assert_eq!(ScanRegion::parse("slab").unwrap(), ScanRegion::SlabInterior);
        assert_eq!(
            ScanRegion::parse("collar:W=0.2").unwrap(),
            ScanRegion::Collar { w: 0.2 }
        );
        for bad in [
            "cylinder",
            "cylinder:M=-1",
            "cylinder:R=3",
            "torus:M=1",
            "collar:W=1.5",
        ] {
            assert!(ScanRegion::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn points_stay_in_region() {
        let dom = SupportDomain::ellipse(0.8, 0.5).unwrap();
        for x in scan_points(&ScanRegion::Cylinder { m: 3.0 }, 200, &dom).unwrap() {
            assert!(x[0].hypot(x[1]) < 3.0 && x[2] > 0.0 && x[2] < 3.0);
        }
        for x in scan_points(&ScanRegion::SlabInterior, 200, &dom).unwrap() {
            assert!(x[2] == 0.0 && dom.signed_distance([x[0], x[1]]) > 0.0);
        }
    }

    #[test]
    fn small_disk_scan_passes() {
        let dom = SupportDomain::disk(1.0).unwrap();
        let phi = BallPhi::unit_cauchy();
        let ctx = ExtensionContext::new(&dom, &phi, QuadSpec::default()).unwrap();
        let r = hessian_scan(&ctx, &ScanRegion::Cylinder { m: 2.0 }, 12, Which::U).unwrap();
        assert_eq!(r.points.len(), 12);
        assert!(r.all_pass(), "{}", r.summary());
        assert!(r.witnesses.is_empty());
        let s = hessian_scan(&ctx, &ScanRegion::SlabInterior, 20, Which::U).unwrap();
        assert!(s.all_pass());
        let p = psi_b_scan(&ctx, &[0.0, 0.5, 1.0], &ScanRegion::Collar { w: 0.2 }, 6).unwrap();
        assert!(p.all_pass(), "{}", p.summary());
    }
}
