//! Plain-text domain files and builtin domain names.
//!
//! ```text
//! support-fourier v1
//! n_modes=<k>
//! a_0 b_0
//! ...            (k lines, cosine/sine coefficients)
//! ```
//!
//! ```text
//! cone v1
//! theta=<radians> dim=<d>
//! ```

use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::{ConeDomain, SupportDomain};

pub const SUPPORT_HEADER: &str = "support-fourier v1";
pub const CONE_HEADER: &str = "cone v1";

#[derive(Clone, Debug)]
pub enum DomainSpec {
    Support(SupportDomain),
    Cone(ConeDomain),
}

impl DomainSpec {
    pub fn to_file_string(&self) -> String {
        match self {
            DomainSpec::Support(d) => d.to_file_string(),
            DomainSpec::Cone(c) => c.to_file_string(),
        }
    }

    pub fn as_support(&self) -> Option<&SupportDomain> {
        match self {
            DomainSpec::Support(d) => Some(d),
            DomainSpec::Cone(_) => None,
        }
    }
}

impl SupportDomain {
    pub fn to_file_string(&self) -> String {
        let mut out = format!("{SUPPORT_HEADER}\nn_modes={}\n", self.n_modes());
        for (a, b) in self.cos_coeffs().iter().zip(self.sin_coeffs()) {
            let _ = writeln!(out, "{a:.16e} {b:.16e}");
        }
        out
    }
}

impl ConeDomain {
    pub fn to_file_string(&self) -> String {
        format!(
            "{CONE_HEADER}\ntheta={:.16e} dim={}\n",
            self.theta(),
            self.dim()
        )
    }
}

/// Parses either domain file format.
pub fn parse_domain_file(text: &str) -> Result<DomainSpec> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty domain file".into()))?;
    match header {
        SUPPORT_HEADER => {
            let modes_line = lines
                .next()
                .ok_or_else(|| Error::Parse("missing n_modes line".into()))?;
            let k: usize = modes_line
                .strip_prefix("n_modes=")
                .ok_or_else(|| Error::Parse(format!("expected n_modes=<k>, got {modes_line:?}")))?
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("n_modes: {e}")))?;
            let mut cos = Vec::with_capacity(k);
            let mut sin = Vec::with_capacity(k);
            for line in lines.by_ref().take(k) {
                let mut it = line.split_whitespace();
                let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
                    return Err(Error::Parse(format!("bad coefficient line {line:?}")));
                };
                cos.push(parse_f64(a)?);
                sin.push(parse_f64(b)?);
            }
            if cos.len() != k {
                return Err(Error::Parse(format!(
                    "expected {k} coefficient lines, found {}",
                    cos.len()
                )));
            }
            if let Some(extra) = lines.next() {
                return Err(Error::Parse(format!("trailing content {extra:?}")));
            }
            Ok(DomainSpec::Support(SupportDomain::from_coefficients(
                cos, sin,
            )?))
        }
        CONE_HEADER => {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("missing cone parameters".into()))?;
            let mut theta = None;
            let mut dim = None;
            for tok in line.split_whitespace() {
                match tok.split_once('=') {
                    Some(("theta", v)) => theta = Some(parse_f64(v)?),
                    Some(("dim", v)) => {
                        dim = Some(v.parse().map_err(|e| Error::Parse(format!("dim: {e}")))?)
                    }
                    _ => return Err(Error::Parse(format!("unknown cone token {tok:?}"))),
                }
            }
            let (Some(theta), Some(dim)) = (theta, dim) else {
                return Err(Error::Parse("cone needs theta= and dim=".into()));
            };
            Ok(DomainSpec::Cone(ConeDomain::new(theta, dim)?))
        }
        other => Err(Error::Parse(format!("unknown domain header {other:?}"))),
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|e| Error::Parse(format!("number {s:?}: {e}")))
}

/// Builtin domains: `disk`, `disk:r`, `ellipse:a,b`, `cone:theta,d`.
pub fn parse_builtin(name: &str) -> Result<DomainSpec> {
    let (kind, args) = name.split_once(':').unwrap_or((name, ""));
    let nums = || -> Result<Vec<f64>> {
        args.split(',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|e| Error::InvalidParameter(format!("builtin {name:?}: {e}")))
            })
            .collect()
    };
    match kind {
        "disk" => {
            let v = nums()?;
            let r = match v.as_slice() {
                [] => 1.0,
                [r] => *r,
                _ => return Err(Error::InvalidParameter(format!("builtin {name:?}"))),
            };
            Ok(DomainSpec::Support(SupportDomain::disk(r)?))
        }
        "ellipse" => match nums()?.as_slice() {
            [a, b] => Ok(DomainSpec::Support(SupportDomain::ellipse(*a, *b)?)),
            _ => Err(Error::InvalidParameter(format!(
                "builtin {name:?}: need ellipse:a,b"
            ))),
        },
        "cone" => match nums()?.as_slice() {
            [theta] => Ok(DomainSpec::Cone(ConeDomain::new(*theta, 2)?)),
            [theta, d] if d.fract() == 0.0 && *d >= 2.0 => {
                Ok(DomainSpec::Cone(ConeDomain::new(*theta, *d as usize)?))
            }
            _ => Err(Error::InvalidParameter(format!(
                "builtin {name:?}: need cone:theta,d"
            ))),
        },
        _ => Err(Error::InvalidParameter(format!(
            "unknown builtin domain {name:?}"
        ))),
    }
}
