//! Gridded exit-time fields.
//!
//! Walk estimates at lattice nodes well inside the domain are divided by the
//! boundary profile `q^{α/2}`, `q(y) = 1 − γ(y)²` with `γ` the gauge of the
//! domain, and the quotient `g` is interpolated bicubically. For an ellipse
//! `g` is constant, and in general it is smooth up to the boundary, so the
//! field inherits the exact `δ^{α/2}` decay at `∂D`. Nodes in the boundary
//! collar and just outside take `g` from per-sector averages over the
//! innermost reliable band.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{estimate_phi, WalkConfig};
use crate::closedform::StableParams;
use crate::error::{Error, Result};
use crate::geom::{Point2, SupportDomain};
use crate::phi::PhiEval;
use crate::rng::derive_seed;

pub const FIELD_HEADER: &str = "phifield v1";
const SECTORS: usize = 64;
const RADIAL_SAMPLES: usize = 4096;
const MIN_NODES: usize = 100;
/// Nodes closer than this many spacings to the boundary are not walked from.
const COLLAR: f64 = 2.0;
/// Outer edge of the band that feeds the sector averages, in spacings.
const BAND: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub spacing: f64,
    pub walks: WalkConfig,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Node {
    i: i64,
    j: i64,
    value: f64,
    stderr: f64,
}

#[derive(Clone, Debug)]
pub struct PhiField {
    dom: SupportDomain,
    params: StableParams,
    cfg: FieldConfig,
    domain_ref: String,
    nodes: Vec<Node>,
    /// Sector coefficient of the boundary profile and its standard error.
    sectors: Vec<(f64, f64)>,
    radial: Vec<f64>,
    i0: i64,
    j0: i64,
    ni: usize,
    nj: usize,
    g: Vec<f64>,
    sg: Vec<f64>,
}

fn catmull_rom(p: [f64; 4], t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    0.5 * (2.0 * p[1]
        + (p[2] - p[0]) * t
        + (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]) * t2
        + (3.0 * p[1] - p[0] - 3.0 * p[2] + p[3]) * t3)
}

fn radial_table(dom: &SupportDomain) -> Result<Vec<f64>> {
    let rays = dom.rays_from([0.0, 0.0])?;
    Ok((0..RADIAL_SAMPLES)
        .map(|k| rays.exit_distance(TAU * k as f64 / RADIAL_SAMPLES as f64))
        .collect())
}

fn profile_base(radial: &[f64], y: Point2) -> f64 {
    let r2 = y[0] * y[0] + y[1] * y[1];
    if r2 == 0.0 {
        return 1.0;
    }
    let m = radial.len();
    let t = y[1].atan2(y[0]).rem_euclid(TAU) / TAU * m as f64;
    let k = t.floor() as usize % m;
    let f = t - t.floor();
    let at = |o: isize| radial[(k as isize + o).rem_euclid(m as isize) as usize];
    let r = catmull_rom([at(-1), at(0), at(1), at(2)], f);
    1.0 - r2 / (r * r)
}

fn sector_of(y: Point2) -> usize {
    let t = y[1].atan2(y[0]).rem_euclid(TAU);
    ((t / TAU * SECTORS as f64) as usize).min(SECTORS - 1)
}

fn sector_theta(k: usize) -> f64 {
    TAU * (k as f64 + 0.5) / SECTORS as f64
}

impl PhiField {
    pub fn domain(&self) -> &SupportDomain {
        &self.dom
    }

    pub fn params(&self) -> StableParams {
        self.params
    }

    pub fn spacing(&self) -> f64 {
        self.cfg.spacing
    }

    pub fn config(&self) -> &FieldConfig {
        &self.cfg
    }

    pub fn domain_ref(&self) -> &str {
        &self.domain_ref
    }

    /// Number of nodes estimated by walks.
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn max_node_stderr(&self) -> f64 {
        self.nodes.iter().map(|n| n.stderr).fold(0.0, f64::max)
    }

    /// Boundary profile `q(y)^{α/2}`; zero outside the domain.
    fn profile(&self, y: Point2) -> f64 {
        let q = profile_base(&self.radial, y);
        if q <= 0.0 || (q < 1e-6 && !self.dom.contains(y)) {
            0.0
        } else {
            q.powf(self.params.alpha() / 2.0)
        }
    }

    fn node(&self, a: &[f64], i: i64, j: i64) -> f64 {
        let ii = (i - self.i0).clamp(0, self.ni as i64 - 1) as usize;
        let jj = (j - self.j0).clamp(0, self.nj as i64 - 1) as usize;
        a[jj * self.ni + ii]
    }

    fn bicubic(&self, y: Point2) -> f64 {
        let h = self.cfg.spacing;
        let (u, v) = (y[0] / h, y[1] / h);
        let (i, j) = (u.floor() as i64, v.floor() as i64);
        let (fu, fv) = (u - i as f64, v - j as f64);
        let rows: [f64; 4] = std::array::from_fn(|b| {
            let jb = j + b as i64 - 1;
            catmull_rom(
                std::array::from_fn(|a| self.node(&self.g, i + a as i64 - 1, jb)),
                fu,
            )
        });
        catmull_rom(rows, fv)
    }

    fn bilinear(&self, a: &[f64], y: Point2) -> f64 {
        let h = self.cfg.spacing;
        let (u, v) = (y[0] / h, y[1] / h);
        let (i, j) = (u.floor() as i64, v.floor() as i64);
        let (fu, fv) = (u - i as f64, v - j as f64);
        (1.0 - fv) * ((1.0 - fu) * self.node(a, i, j) + fu * self.node(a, i + 1, j))
            + fv * ((1.0 - fu) * self.node(a, i, j + 1) + fu * self.node(a, i + 1, j + 1))
    }

    fn assemble(
        dom: SupportDomain,
        params: StableParams,
        cfg: FieldConfig,
        domain_ref: String,
        nodes: Vec<Node>,
    ) -> Result<Self> {
        let h = cfg.spacing;
        let radial = radial_table(&dom)?;
        let alpha = params.alpha();
        let prof = |y: Point2| {
            profile_base(&radial, y)
                .max(f64::MIN_POSITIVE)
                .powf(alpha / 2.0)
        };

        let mut sums = vec![(0.0, 0.0, 0usize); SECTORS];
        for n in &nodes {
            let y = [n.i as f64 * h, n.j as f64 * h];
            if !dom.contains(y) {
                return Err(Error::BadGeometry(format!(
                    "field node {y:?} lies outside the domain"
                )));
            }
            if dom.signed_distance(y) <= BAND * h {
                let p = prof(y);
                let s = &mut sums[sector_of(y)];
                s.0 += n.value / p;
                s.1 += n.stderr / p;
                s.2 += 1;
            }
        }
        if sums.iter().all(|s| s.2 == 0) {
            return Err(Error::GridTooCoarse(
                "no lattice nodes in the boundary band".into(),
            ));
        }
        let sectors: Vec<(f64, f64)> = (0..SECTORS)
            .map(|k| {
                // Borrow from the nearest populated sectors when empty.
                (0..=SECTORS / 2)
                    .find_map(|r| {
                        let mut acc = (0.0, 0.0, 0usize);
                        for k2 in [k + SECTORS - r, k + r] {
                            let s = sums[k2 % SECTORS];
                            acc = (acc.0 + s.0, acc.1 + s.1, acc.2 + s.2);
                            if r == 0 {
                                break;
                            }
                        }
                        (acc.2 > 0).then(|| (acc.0 / acc.2 as f64, acc.1 / acc.2 as f64))
                    })
                    .expect("some sector is populated")
            })
            .collect();

        let reach = (dom.max_support() / h).ceil() as i64 + 3;
        let (i0, j0) = (-reach, -reach);
        let ni = (2 * reach + 1) as usize;
        let nj = ni;
        let mut g = vec![0.0; ni * nj];
        let mut sg = vec![0.0; ni * nj];
        for jj in 0..nj {
            for ii in 0..ni {
                let y = [(ii as i64 + i0) as f64 * h, (jj as i64 + j0) as f64 * h];
                let (c, s) = sectors[sector_of(y)];
                g[jj * ni + ii] = c;
                sg[jj * ni + ii] = s;
            }
        }
        for n in &nodes {
            let y = [n.i as f64 * h, n.j as f64 * h];
            let p = prof(y);
            let idx = (n.j - j0) as usize * ni + (n.i - i0) as usize;
            g[idx] = n.value / p;
            sg[idx] = n.stderr / p;
        }
        Ok(PhiField {
            dom,
            params,
            cfg,
            domain_ref,
            nodes,
            sectors,
            radial,
            i0,
            j0,
            ni,
            nj,
            g,
            sg,
        })
    }

    /// Serialises the field; `17` significant digits throughout.
    pub fn to_file_string(&self) -> String {
        let w = &self.cfg.walks;
        let mut out = format!(
            "{FIELD_HEADER}\ndomain={}\nalpha={:.16e}\nspacing={:.16e}\nwalks={} seed={} ball_fraction={:.16e} max_steps={}\nnodes={}\n",
            self.domain_ref,
            self.params.alpha(),
            self.cfg.spacing,
            w.n_walks,
            w.seed,
            w.ball_fraction,
            w.max_steps,
            self.nodes.len()
        );
        for n in &self.nodes {
            let _ = writeln!(out, "{} {} {:.16e} {:.16e}", n.i, n.j, n.value, n.stderr);
        }
        let _ = writeln!(out, "sectors={SECTORS}");
        for (k, (c, _)) in self.sectors.iter().enumerate() {
            let _ = writeln!(out, "{:.16e} {:.16e}", sector_theta(k), c);
        }
        out
    }

    /// Parses a field written by [`PhiField::to_file_string`] over `dom`,
    /// which must be the domain named by [`field_domain_ref`].
    pub fn from_file_string(text: &str, dom: SupportDomain) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Parse(format!("field file ends before {what}")))
        };
        if next("header")? != FIELD_HEADER {
            return Err(Error::Parse("missing phifield v1 header".into()));
        }
        let domain_ref = value_of(next("domain")?, "domain")?.to_string();
        let alpha: f64 = parse(value_of(next("alpha")?, "alpha")?)?;
        let spacing: f64 = parse(value_of(next("spacing")?, "spacing")?)?;
        let mut walks = WalkConfig::default();
        for tok in next("walk settings")?.split_whitespace() {
            match tok.split_once('=') {
                Some(("walks", v)) => walks.n_walks = parse(v)?,
                Some(("seed", v)) => walks.seed = parse(v)?,
                Some(("ball_fraction", v)) => walks.ball_fraction = parse(v)?,
                Some(("max_steps", v)) => walks.max_steps = parse(v)?,
                _ => return Err(Error::Parse(format!("unknown field setting {tok:?}"))),
            }
        }
        let count: usize = parse(value_of(next("nodes")?, "nodes")?)?;
        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            let line = next("node table")?;
            let f: Vec<&str> = line.split_whitespace().collect();
            let [i, j, v, s] = f.as_slice() else {
                return Err(Error::Parse(format!("bad node line {line:?}")));
            };
            let node = Node {
                i: parse(i)?,
                j: parse(j)?,
                value: parse(v)?,
                stderr: parse(s)?,
            };
            if !(node.value >= 0.0 && node.stderr >= 0.0) {
                return Err(Error::Parse(format!("negative node entry {line:?}")));
            }
            nodes.push(node);
        }
        let n_sectors: usize = parse(value_of(next("sectors")?, "sectors")?)?;
        if n_sectors != SECTORS {
            return Err(Error::Parse(format!(
                "expected {SECTORS} sectors, got {n_sectors}"
            )));
        }
        let mut stored = Vec::with_capacity(SECTORS);
        for _ in 0..SECTORS {
            let line = next("sector table")?;
            let f: Vec<&str> = line.split_whitespace().collect();
            let [_, c] = f.as_slice() else {
                return Err(Error::Parse(format!("bad sector line {line:?}")));
            };
            stored.push(parse::<f64>(c)?);
        }
        if let Some(extra) = lines.next() {
            return Err(Error::Parse(format!("trailing content {extra:?}")));
        }
        let params = StableParams::new(alpha, 2)?;
        let field = PhiField::assemble(
            dom,
            params,
            FieldConfig { spacing, walks },
            domain_ref,
            nodes,
        )?;
        for (k, (c, _)) in field.sectors.iter().enumerate() {
            if (c - stored[k]).abs() > 1e-12 * c.abs().max(1.0) {
                return Err(Error::Parse(format!(
                    "sector {k} coefficient {} disagrees with node table ({c}); wrong domain?",
                    stored[k]
                )));
            }
        }
        Ok(field)
    }
}

/// Domain reference recorded in a field file.
pub fn field_domain_ref(text: &str) -> Result<String> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some(FIELD_HEADER) {
        return Err(Error::Parse("missing phifield v1 header".into()));
    }
    let line = lines
        .next()
        .ok_or_else(|| Error::Parse("missing domain line".into()))?;
    Ok(value_of(line, "domain")?.to_string())
}

fn value_of<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .map(str::trim)
        .ok_or_else(|| Error::Parse(format!("expected {key}=..., got {line:?}")))
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse()
        .map_err(|e| Error::Parse(format!("value {s:?}: {e}")))
}

impl PhiEval for PhiField {
    fn value(&self, y: Point2) -> f64 {
        let p = self.profile(y);
        if p == 0.0 {
            return 0.0;
        }
        (self.bicubic(y) * p).max(0.0)
    }

    fn stderr(&self, y: Point2) -> f64 {
        let p = self.profile(y);
        if p == 0.0 {
            return 0.0;
        }
        self.bilinear(&self.sg, y).max(0.0) * p
    }

    fn fd_step(&self) -> f64 {
        (2.0 * self.cfg.spacing).max(1e-3)
    }

    fn noisy(&self) -> bool {
        true
    }

    fn matches_domain(&self, dom: &SupportDomain) -> bool {
        self.dom == *dom
    }
}

/// Estimates `φ` on the lattice of spacing `cfg.spacing` and assembles the
/// interpolated field. `domain_ref` is recorded in the field file.
pub fn build_field(
    dom: &SupportDomain,
    p: &StableParams,
    cfg: &FieldConfig,
    domain_ref: &str,
) -> Result<PhiField> {
    cfg.walks.validate()?;
    if p.dim() != 2 {
        return Err(Error::InvalidParameter("fields are planar (d = 2)".into()));
    }
    let h = cfg.spacing;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("spacing {h}")));
    }
    if domain_ref.contains('\n') {
        return Err(Error::InvalidParameter(
            "domain reference must be one line".into(),
        ));
    }
    let reach = (dom.max_support() / h).ceil() as i64;
    if reach > 2000 {
        return Err(Error::InvalidParameter(format!(
            "spacing {h} gives too many nodes"
        )));
    }
    let mut sites = Vec::new();
    for j in -reach..=reach {
        for i in -reach..=reach {
            let y = [i as f64 * h, j as f64 * h];
            if dom.signed_distance(y) > COLLAR * h {
                sites.push((i, j));
            }
        }
    }
    if sites.len() < MIN_NODES {
        return Err(Error::GridTooCoarse(format!(
            "{} interior nodes at spacing {h}, need {MIN_NODES}",
            sites.len()
        )));
    }
    let nodes = sites
        .par_iter()
        .map(|&(i, j)| {
            let tag = ((i as u64) << 32) ^ (j as u32 as u64);
            let wc = WalkConfig {
                seed: derive_seed(cfg.walks.seed, tag),
                ..cfg.walks
            };
            let e = estimate_phi(dom, p, &[i as f64 * h, j as f64 * h], &wc)?;
            Ok(Node {
                i,
                j,
                value: e.mean,
                stderr: e.std_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PhiField::assemble(dom.clone(), *p, *cfg, domain_ref.to_string(), nodes)
}
