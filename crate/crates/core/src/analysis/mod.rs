//! Verification experiments and their reports.

mod concavity;
mod deform;
mod exponents;
mod hessian;

pub use concavity::{
    concavity_check, cone_nonconcavity_hunt, theorem14_check, ConcavityOptions, ConeHuntOptions,
    CONE_APERTURES,
};
pub use deform::{deformation_sweep, PerDomainCheck, CURVATURE_SLACK};
pub use exponents::{
    boundary_exponent_fit, fit_slope, ExponentFit, Probe, Quantity, LOW_CONFIDENCE_STDERR,
};
pub use hessian::{hessian_scan, psi_b_scan, scan_points, ScanRegion};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point2, SupportDomain};
use crate::rng::WalkRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// Neither outcome can be certified at the available accuracy.
    Indeterminate,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub values: Vec<f64>,
    pub verdict: Verdict,
}

/// Outcome of a batch experiment: one record per point plus a summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub experiment: String,
    /// Settings echoed back so the file is self-describing.
    pub config: BTreeMap<String, String>,
    pub point_set: String,
    /// Names of the entries of every record's `values`.
    pub columns: Vec<String>,
    pub points: Vec<PointRecord>,
    pub passed: usize,
    pub failed: usize,
    pub indeterminate: usize,
    /// Column whose range is summarised by `min` and `max`.
    pub scalar: String,
    pub min: f64,
    pub max: f64,
    pub witnesses: Vec<PointRecord>,
    /// Wall-clock seconds; not written to files so reruns stay byte-identical.
    #[serde(skip)]
    pub runtime_secs: f64,
}

impl ScanReport {
    /// Builds the summary from the records; `scalar` must name a column.
    pub fn new(
        experiment: &str,
        config: BTreeMap<String, String>,
        point_set: String,
        columns: Vec<String>,
        points: Vec<PointRecord>,
        scalar: &str,
    ) -> Self {
        let col = columns.iter().position(|c| c == scalar);
        let count = |v: Verdict| points.iter().filter(|p| p.verdict == v).count();
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        if let Some(c) = col {
            for p in &points {
                let v = p.values[c];
                if v.is_finite() {
                    min = min.min(v);
                    max = max.max(v);
                }
            }
        }
        let witnesses = points
            .iter()
            .filter(|p| p.verdict == Verdict::Fail)
            .cloned()
            .collect();
        ScanReport {
            experiment: experiment.to_string(),
            config,
            point_set,
            columns,
            passed: count(Verdict::Pass),
            failed: count(Verdict::Fail),
            indeterminate: count(Verdict::Indeterminate),
            points,
            scalar: scalar.to_string(),
            min,
            max,
            witnesses,
            runtime_secs: 0.0,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.failed == 0 && self.indeterminate == 0
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.columns.iter().position(|n| n == name)?;
        Some(self.points.iter().map(|p| p.values[c]).collect())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    /// One row per point, `17` significant digits, verdict last.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push_str(",verdict\n");
        for p in &self.points {
            for v in &p.values {
                let _ = write!(out, "{},", fmt_full(*v));
            }
            out.push_str(p.verdict.as_str());
            out.push('\n');
        }
        out
    }

    /// Terminal summary with 6 significant digits.
    pub fn summary(&self) -> String {
        format!(
            "{}: {} points, {} pass, {} fail, {} indeterminate; {} in [{}, {}]",
            self.experiment,
            self.points.len(),
            self.passed,
            self.failed,
            self.indeterminate,
            self.scalar,
            fmt_short(self.min),
            fmt_short(self.max)
        )
    }
}

/// `17` significant digits.
pub fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

/// `6` significant digits.
pub fn fmt_short(v: f64) -> String {
    format!("{v:.5e}")
}

/// Radical inverse of `index` in `base` (Halton sequence component).
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while index > 0 {
        f /= b;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Uniform sample of the domain by rejection from its bounding square.
pub fn uniform_in_domain(dom: &SupportDomain, rng: &mut WalkRng) -> Point2 {
    let r = dom.max_support();
    loop {
        let y = [
            r * (2.0 * rng.random::<f64>() - 1.0),
            r * (2.0 * rng.random::<f64>() - 1.0),
        ];
        if dom.contains(y) {
            return y;
        }
    }
}

/// Parses `lo:hi:geometric:n` or `lo:hi:n` (linear) into a grid.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("bad grid {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let (lo, hi, geometric, n) = match parts.as_slice() {
        [lo, hi, n] => (num(lo)?, num(hi)?, false, n),
        [lo, hi, "geometric", n] => (num(lo)?, num(hi)?, true, n),
        [lo, hi, "linear", n] => (num(lo)?, num(hi)?, false, n),
        _ => return Err(bad()),
    };
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n < 2 || !(lo.is_finite() && hi.is_finite()) || (geometric && !(lo > 0.0 && hi > 0.0)) {
        return Err(bad());
    }
    Ok((0..n)
        .map(|k| {
            let f = k as f64 / (n - 1) as f64;
            if k == n - 1 {
                hi
            } else if geometric {
                lo * (hi / lo).powf(f)
            } else {
                lo + (hi - lo) * f
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_values() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 2), 0.25);
        assert_eq!(halton(3, 2), 0.75);
        assert!((halton(1, 3) - 1.0 / 3.0).abs() < 1e-16);
        assert!((halton(5, 3) - 7.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn grids() {
        let g = parse_grid("0.02:0.2:geometric:6").unwrap();
        assert_eq!(g.len(), 6);
        assert!((g[0] - 0.02).abs() < 1e-15 && g[5] == 0.2);
        assert!((g[1] / g[0] - g[2] / g[1]).abs() < 1e-12);
        let l = parse_grid("0:1:11").unwrap();
        assert!((l[3] - 0.3).abs() < 1e-15 && l[10] == 1.0);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("0:1:geometric:5").is_err());
    }

    #[test]
    fn report_summary_and_csv() {
        let pts = vec![
            PointRecord {
                values: vec![1.0, 2.0],
                verdict: Verdict::Pass,
            },
            PointRecord {
                values: vec![3.0, -1.0],
                verdict: Verdict::Fail,
            },
        ];
        let r = ScanReport::new(
            "demo",
            BTreeMap::new(),
            "two".into(),
            vec!["a".into(), "b".into()],
            pts,
            "b",
        );
        assert_eq!((r.passed, r.failed, r.indeterminate), (1, 1, 0));
        assert_eq!((r.min, r.max), (-1.0, 2.0));
        assert_eq!(r.witnesses.len(), 1);
        let csv = r.to_csv();
        assert!(csv.starts_with("a,b,verdict\n"));
        assert_eq!(csv.lines().count(), 3);
        let back: ScanReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
