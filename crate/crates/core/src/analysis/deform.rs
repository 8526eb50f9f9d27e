use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{PointRecord, ScanReport, Verdict};
use crate::error::{Error, Result};
use crate::geom::{domain_gap, SupportDomain};

/// Slack on the curvature bounds of the deformed domains.
pub const CURVATURE_SLACK: f64 = 1e-6;

/// Optional per-`t` experiment, e.g. a Hessian scan on `D(t)`.
pub type PerDomainCheck<'a> = &'a (dyn Fn(f64, &SupportDomain) -> Result<ScanReport> + Sync);

/// Classifies `D(t) = (1 − t) D + t B(0, 1)` along the grid. Curvatures must
/// stay within `[min(κ1, 1), max(κ2, 1)]` of the undeformed domain and
/// consecutive domains may differ by at most `Δt (1 + max h)` in Hausdorff
/// distance.
pub fn deformation_sweep(
    dom: &SupportDomain,
    t_grid: &[f64],
    check: Option<PerDomainCheck>,
) -> Result<ScanReport> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("t grid must be increasing".into()));
    }
    let start = std::time::Instant::now();
    let base = dom.classify()?;
    let lower = base.kappa1.min(1.0) - CURVATURE_SLACK;
    let upper = base.kappa2.max(1.0) + CURVATURE_SLACK;
    let h_max = dom.max_support();
    let domains: Vec<SupportDomain> = t_grid
        .iter()
        .map(|&t| dom.deform(t))
        .collect::<Result<_>>()?;
    let records: Vec<PointRecord> = (0..t_grid.len())
        .into_par_iter()
        .map(|k| -> Result<PointRecord> {
            let t = t_grid[k];
            let c = domains[k].classify()?;
            let (gap, bound) = match domains.get(k + 1) {
                Some(next) => (
                    domain_gap(&domains[k], next),
                    (t_grid[k + 1] - t) * (1.0 + h_max),
                ),
                None => (f64::NAN, f64::NAN),
            };
            let mut verdict = if c.kappa1 >= lower
                && c.kappa2 <= upper
                && (k + 1 == domains.len() || gap <= bound)
            {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
            let mut extra = f64::NAN;
            if let (Some(f), Verdict::Pass) = (check, verdict) {
                let r = f(t, &domains[k])?;
                extra = r.min;
                verdict = if r.failed > 0 {
                    Verdict::Fail
                } else if r.indeterminate > 0 {
                    Verdict::Indeterminate
                } else {
                    Verdict::Pass
                };
            }
            Ok(PointRecord {
                values: vec![
                    t, c.kappa1, c.kappa2, lower, upper, c.r1, c.c1, gap, bound, extra,
                ],
                verdict,
            })
        })
        .collect::<Result<_>>()?;
    let mut config = BTreeMap::new();
    config.insert("kappa1".into(), base.kappa1.to_string());
    config.insert("kappa2".into(), base.kappa2.to_string());
    config.insert("per_t_check".into(), check.is_some().to_string());
    let mut r = ScanReport::new(
        "deform-sweep",
        config,
        format!("t grid, {} values", t_grid.len()),
        [
            "t",
            "kappa_min",
            "kappa_max",
            "lower",
            "upper",
            "r1",
            "c1",
            "gap_next",
            "gap_bound",
            "check_min",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
        records,
        "kappa_min",
    );
    r.runtime_secs = start.elapsed().as_secs_f64();
    Ok(r)
}
