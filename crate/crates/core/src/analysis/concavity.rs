use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::Rng;
use rayon::prelude::*;

use super::{uniform_in_domain, PointRecord, ScanReport, Verdict};
use crate::closedform::StableParams;
use crate::error::{Error, Result};
use crate::geom::{ConeDomain, Point2, SupportDomain};
use crate::phi::PhiEval;
use crate::rng::{derive_seed, walk_rng};
use crate::wos::{estimate_phi, WalkConfig, WalkEstimate};

/// Aperture sweep for the cone experiment, coarse to fine.
pub const CONE_APERTURES: [f64; 5] = [0.4, 0.2, 0.1, 0.05, 0.025];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConcavityOptions {
    pub n_cases: usize,
    /// Deterministic slack added to every comparison.
    pub tol: f64,
    /// Multiple of the combined standard error also allowed as slack.
    pub sigmas: f64,
    /// Fixed weight (e.g. `0.5` for midpoint concavity); random when `None`.
    pub lambda: Option<f64>,
    /// Test `√φ` instead of `φ`.
    pub sqrt: bool,
    pub seed: u64,
}

impl Default for ConcavityOptions {
    fn default() -> Self {
        ConcavityOptions {
            n_cases: 1000,
            tol: 1e-12,
            sigmas: 3.0,
            lambda: None,
            sqrt: false,
            seed: 0,
        }
    }
}

impl ConcavityOptions {
    fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::InvalidParameter(format!(
                    "lambda = {l} not in [0, 1]"
                )));
            }
        }
        if !(self.tol >= 0.0 && self.sigmas >= 0.0) {
            return Err(Error::InvalidParameter(
                "tolerances must be non-negative".into(),
            ));
        }
        Ok(())
    }

    fn echo(&self) -> BTreeMap<String, String> {
        let mut c = BTreeMap::new();
        c.insert("cases".into(), self.n_cases.to_string());
        c.insert("tol".into(), self.tol.to_string());
        c.insert("sigmas".into(), self.sigmas.to_string());
        c.insert("seed".into(), self.seed.to_string());
        if let Some(l) = self.lambda {
            c.insert("lambda".into(), l.to_string());
        }
        c
    }
}

/// Value and standard error of `φ` or `√φ`.
fn sample(phi: &dyn PhiEval, y: Point2, sqrt: bool) -> (f64, f64) {
    let v = phi.value(y);
    let s = phi.stderr(y);
    if !sqrt {
        return (v, s);
    }
    let r = v.max(0.0).sqrt();
    (r, if r > 0.0 { s / (2.0 * r) } else { s.sqrt() })
}

fn judge(lhs: f64, rhs: f64, sigma: f64, o: &ConcavityOptions) -> Verdict {
    if lhs - rhs >= -(o.tol + o.sigmas * sigma) {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// `φ(λx + (1−λ)y) ≥ λφ(x) + (1−λ)φ(y)` on random triples of the domain.
pub fn concavity_check(
    phi: &dyn PhiEval,
    dom: &SupportDomain,
    o: &ConcavityOptions,
) -> Result<ScanReport> {
    o.validate()?;
    let start = std::time::Instant::now();
    let records: Vec<PointRecord> = (0..o.n_cases as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = walk_rng(o.seed, i);
            let x = uniform_in_domain(dom, &mut rng);
            let y = uniform_in_domain(dom, &mut rng);
            let l = o.lambda.unwrap_or_else(|| rng.random::<f64>());
            let z = [l * x[0] + (1.0 - l) * y[0], l * x[1] + (1.0 - l) * y[1]];
            let (fx, sx) = sample(phi, x, o.sqrt);
            let (fy, sy) = sample(phi, y, o.sqrt);
            let (fz, sz) = sample(phi, z, o.sqrt);
            let rhs = l * fx + (1.0 - l) * fy;
            let sigma = (sz * sz + (l * sx).powi(2) + ((1.0 - l) * sy).powi(2)).sqrt();
            PointRecord {
                values: vec![x[0], x[1], y[0], y[1], l, fz, rhs, fz - rhs, sigma],
                verdict: judge(fz, rhs, sigma, o),
            }
        })
        .collect();
    let mut config = o.echo();
    config.insert(
        "function".into(),
        if o.sqrt { "sqrt_phi" } else { "phi" }.into(),
    );
    let mut r = ScanReport::new(
        "concavity",
        config,
        "uniform random triples".into(),
        columns(&[
            "x1", "x2", "y1", "y2", "lambda", "lhs", "rhs", "slack", "sigma",
        ]),
        records,
        "slack",
    );
    r.runtime_secs = start.elapsed().as_secs_f64();
    Ok(r)
}

/// Both scaling inequalities for `φ`: part a with `x0 ∈ ∂D`,
/// `φ(λx + (1−λ)x0) ≥ λ^α φ(x)`; part b,
/// `φ(λx + (1−λ)y) ≥ (λ^α φ(x) + (1−λ)^α φ(y)) / 2`.
/// Each part gets `n_cases` samples; the `part` column is 0 for a, 1 for b.
pub fn theorem14_check(
    dom: &SupportDomain,
    p: &StableParams,
    phi: &dyn PhiEval,
    o: &ConcavityOptions,
) -> Result<ScanReport> {
    o.validate()?;
    let alpha = p.alpha();
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} not in (0, 2)"
        )));
    }
    if !phi.matches_domain(dom) {
        return Err(Error::InvalidParameter(
            "the source for phi belongs to a different domain".into(),
        ));
    }
    let start = std::time::Instant::now();
    let n = o.n_cases as u64;
    let records: Vec<PointRecord> = (0..2 * n)
        .into_par_iter()
        .map(|i| {
            let part_b = i >= n;
            let mut rng = walk_rng(o.seed, i);
            let x = uniform_in_domain(dom, &mut rng);
            let y = if part_b {
                uniform_in_domain(dom, &mut rng)
            } else {
                dom.boundary_point(TAU * rng.random::<f64>())
            };
            let l = o.lambda.unwrap_or_else(|| rng.random::<f64>());
            let z = [l * x[0] + (1.0 - l) * y[0], l * x[1] + (1.0 - l) * y[1]];
            let (fx, sx) = sample(phi, x, false);
            let (fz, sz) = sample(phi, z, false);
            let (rhs, sigma) = if part_b {
                let (fy, sy) = sample(phi, y, false);
                let (a, b) = (l.powf(alpha), (1.0 - l).powf(alpha));
                (
                    0.5 * (a * fx + b * fy),
                    (sz * sz + (0.5 * a * sx).powi(2) + (0.5 * b * sy).powi(2)).sqrt(),
                )
            } else {
                let a = l.powf(alpha);
                (a * fx, sz.hypot(a * sx))
            };
            PointRecord {
                values: vec![
                    part_b as u8 as f64,
                    x[0],
                    x[1],
                    y[0],
                    y[1],
                    l,
                    fz,
                    rhs,
                    fz - rhs,
                    sigma,
                ],
                verdict: judge(fz, rhs, sigma, o),
            }
        })
        .collect();
    let mut config = o.echo();
    config.insert("alpha".into(), alpha.to_string());
    let mut r = ScanReport::new(
        "scaling-inequalities",
        config,
        "uniform random cases, parts a and b".into(),
        columns(&[
            "part", "x1", "x2", "y1", "y2", "lambda", "lhs", "rhs", "slack", "sigma",
        ]),
        records,
        "slack",
    );
    r.runtime_secs = start.elapsed().as_secs_f64();
    Ok(r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConeHuntOptions {
    pub thetas: Vec<f64>,
    pub dim: usize,
    /// Interior axis points `t_k = k / (n + 1)`, `k = 1..=n`.
    pub axis_points: usize,
    /// Violations must exceed this many combined standard errors.
    pub sigmas: f64,
}

impl Default for ConeHuntOptions {
    fn default() -> Self {
        ConeHuntOptions {
            thetas: CONE_APERTURES.to_vec(),
            dim: 2,
            axis_points: 15,
            sigmas: 5.0,
        }
    }
}

/// Searches for midpoint-concavity violations of `φ` along the axis of
/// narrow truncated cones. Each record is a triple `(t_a, t_b, t_mid)` with
/// `t_a = 0` meaning the apex, where `φ = 0`; a failure is a violation larger
/// than `sigmas` combined standard errors. Finding none proves nothing.
pub fn cone_nonconcavity_hunt(
    p: &StableParams,
    cfg: &WalkConfig,
    o: &ConeHuntOptions,
) -> Result<ScanReport> {
    cfg.validate()?;
    if p.dim() != o.dim {
        return Err(Error::InvalidParameter(format!(
            "process dimension {} differs from cone dimension {}",
            p.dim(),
            o.dim
        )));
    }
    if o.axis_points < 2 || o.thetas.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least 2 axis points and one aperture".into(),
        ));
    }
    let start = std::time::Instant::now();
    let n = o.axis_points;
    let mut records = Vec::new();
    let mut config = BTreeMap::new();
    let mut strongest: Option<(f64, f64)> = None;
    for (ci, &theta) in o.thetas.iter().enumerate() {
        let cone = ConeDomain::new(theta, o.dim)?;
        let t: Vec<f64> = (0..=n).map(|k| k as f64 / (n + 1) as f64).collect();
        let est: Vec<WalkEstimate> = (1..=n)
            .map(|k| {
                let mut x = vec![0.0; o.dim];
                x[0] = t[k];
                let c = WalkConfig {
                    seed: derive_seed(cfg.seed, ((ci as u64) << 32) | k as u64),
                    ..*cfg
                };
                estimate_phi(&cone, p, &x, &c)
            })
            .collect::<Result<_>>()?;
        let phi = |k: usize| {
            if k == 0 {
                (0.0, 0.0)
            } else {
                (est[k - 1].mean, est[k - 1].std_error)
            }
        };
        for a in 0..=n {
            for b in (a + 2..=n).step_by(2) {
                let m = (a + b) / 2;
                let ((fa, sa), (fb, sb), (fm, sm)) = (phi(a), phi(b), phi(m));
                let excess = 0.5 * (fa + fb) - fm;
                let sigma = (sm * sm + 0.25 * (sa * sa + sb * sb)).sqrt();
                let z = excess / sigma;
                let violation = z > o.sigmas;
                if violation && strongest.is_none_or(|(s, _)| z > s) {
                    strongest = Some((z, theta));
                }
                records.push(PointRecord {
                    values: vec![theta, t[a], t[b], t[m], fa, fb, fm, excess, z],
                    verdict: if violation {
                        Verdict::Fail
                    } else {
                        Verdict::Pass
                    },
                });
            }
        }
        // Along the axis from the apex, φ should not decrease before the midpoint.
        let monotone = (1..n.div_ceil(2)).all(|k| {
            let (f0, s0) = phi(k);
            let (f1, s1) = phi(k + 1);
            f1 - f0 >= -o.sigmas * s0.hypot(s1)
        });
        config.insert(format!("axis_monotone@{theta}"), monotone.to_string());
        let truncated: u64 = est.iter().map(|e| e.truncated).sum();
        config.insert(format!("truncated_walks@{theta}"), truncated.to_string());
    }
    config.insert("alpha".into(), p.alpha().to_string());
    config.insert("dim".into(), o.dim.to_string());
    config.insert("walks".into(), cfg.n_walks.to_string());
    config.insert("seed".into(), cfg.seed.to_string());
    config.insert("sigmas".into(), o.sigmas.to_string());
    config.insert(
        "strongest".into(),
        strongest.map_or("none".into(), |(z, th)| format!("z={z} theta={th}")),
    );
    let mut r = ScanReport::new(
        "cone-hunt",
        config,
        format!("axis triples, {n} points per aperture"),
        columns(&[
            "theta", "t_a", "t_b", "t_mid", "phi_a", "phi_b", "phi_mid", "excess", "z",
        ]),
        records,
        "z",
    );
    r.runtime_secs = start.elapsed().as_secs_f64();
    Ok(r)
}
