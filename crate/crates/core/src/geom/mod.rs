//! Smooth convex planar domains described by their support function.
//!
//! A convex domain `D` containing the origin is determined by
//! `h(θ) = sup_{x ∈ D} x·(cos θ, sin θ)`. Storing `h` as a truncated Fourier
//! series makes Minkowski combinations coefficient-wise affine, and gives the
//! radius of curvature in closed form as `h + h''` at the boundary point whose
//! outer normal has angle `θ`.

mod cone;
mod io;

pub use cone::ConeDomain;
pub use io::{parse_builtin, parse_domain_file, DomainSpec};

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

/// Default number of Fourier modes for domains built from samples.
pub const DEFAULT_MODES: usize = 64;
/// Size of the grid on which convexity is certified.
pub const CHECK_GRID: usize = 4096;
/// Radius of the disk added when smoothing polygons.
pub const SMOOTHING_RADIUS: f64 = 1e-3;

const CONVEXITY_REFINE_BELOW: f64 = 0.01;
const BOUNDARY_SAMPLES: usize = 1024;
const GAP_SAMPLES: usize = 2048;
/// Points closer than this to the boundary are reported as not contained.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// A region in which walks can run: it only needs to answer containment and
/// distance-to-boundary queries.
pub trait Region: Sync {
    fn dim(&self) -> usize;

    /// Distance to the boundary for points of the open region, `None` otherwise.
    fn interior_distance(&self, x: &[f64]) -> Option<f64>;

    /// Radius `r` with `δ/2 ≤ r ≤ δ` of a ball inscribed at `x`, `None` outside.
    /// Walks only need some inscribed ball, which can be cheaper to find.
    fn inscribed_radius(&self, x: &[f64]) -> Option<f64> {
        self.interior_distance(x)
    }
}

/// Constants `(C1, R1, κ1, κ2)` of the smooth convex class the domain belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassFParams {
    /// Lipschitz constant of the curvature along the boundary.
    pub c1: f64,
    /// Radius of the largest origin-centred disk inside the domain.
    pub r1: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

/// Smooth, strictly convex, bounded planar domain with the origin inside.
#[derive(Clone, Debug)]
pub struct SupportDomain {
    /// Cosine coefficients `a_j`, `j = 0..n_modes`.
    cos: Vec<f64>,
    /// Sine coefficients `b_j`; `b_0` is always zero.
    sin: Vec<f64>,
    /// Number of leading coefficient pairs that are not negligible.
    active: usize,
    coarse: CoarseTable,
    boundary: Vec<(f64, Point2)>,
}

/// Support values and normals on a uniform grid, used to seed distance queries.
#[derive(Clone, Debug)]
struct CoarseTable {
    theta: Vec<f64>,
    h: Vec<f64>,
    normal: Vec<Point2>,
    /// Upper bound on |h''| (sum of j² times the mode amplitudes).
    curvature_bound: f64,
}

#[inline]
fn unit(theta: f64) -> Point2 {
    let (s, c) = theta.sin_cos();
    [c, s]
}

#[inline]
fn dot(a: Point2, b: Point2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl SupportDomain {
    /// Builds a domain from Fourier coefficients of its support function and
    /// certifies positivity and strict convexity.
    pub fn from_coefficients(cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        if cos.is_empty() || cos.len() != sin.len() {
            return Err(Error::InvalidDomain(format!(
                "need matching non-empty coefficient lists, got {} and {}",
                cos.len(),
                sin.len()
            )));
        }
        if cos.iter().chain(sin.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDomain("non-finite coefficient".into()));
        }
        let mut sin = sin;
        sin[0] = 0.0;
        let scale = cos[0].abs().max(f64::MIN_POSITIVE);
        let active = (0..cos.len())
            .rev()
            .find(|&j| cos[j].abs().max(sin[j].abs()) > 1e-16 * scale)
            .map_or(1, |j| j + 1);
        let mut dom = SupportDomain {
            cos,
            sin,
            active,
            coarse: CoarseTable {
                theta: Vec::new(),
                h: Vec::new(),
                normal: Vec::new(),
                curvature_bound: 0.0,
            },
            boundary: Vec::new(),
        };
        dom.certify()?;
        dom.build_tables();
        Ok(dom)
    }

    /// Origin-centred disk.
    pub fn disk(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidDomain(format!("disk radius {radius}")));
        }
        Self::from_coefficients(vec![radius], vec![0.0])
    }

    /// Origin-centred ellipse with semi-axes `a` (along x1) and `b` (along x2).
    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        Self::ellipse_with_modes(a, b, DEFAULT_MODES)
    }

    pub fn ellipse_with_modes(a: f64, b: f64, n_modes: usize) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidDomain(format!("ellipse semi-axes {a}, {b}")));
        }
        Self::from_support_fn(
            |t| (a * a * t.cos().powi(2) + b * b * t.sin().powi(2)).sqrt(),
            n_modes,
        )
    }

    /// Projects a sampled support function onto the first `n_modes` Fourier modes.
    pub fn from_support_fn(f: impl Fn(f64) -> f64, n_modes: usize) -> Result<Self> {
        let (cos, sin) = fourier_project(f, n_modes)?;
        Self::from_coefficients(cos, sin)
    }

    /// Smooth convex approximation of a convex polygon.
    ///
    /// The polygon's support function is projected with Fejér weights, which
    /// keeps the radius of curvature non-negative, then a disk of radius
    /// [`SMOOTHING_RADIUS`] is added to make it strictly positive.
    pub fn from_polygon(vertices: &[Point2], n_modes: usize) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidDomain(
                "polygon needs at least 3 vertices".into(),
            ));
        }
        let support = |t: f64| {
            let u = unit(t);
            vertices
                .iter()
                .map(|&v| dot(v, u))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let (mut cos, mut sin) = fourier_project(support, n_modes)?;
        for j in 1..n_modes {
            let w = 1.0 - j as f64 / n_modes as f64;
            cos[j] *= w;
            sin[j] *= w;
        }
        cos[0] += SMOOTHING_RADIUS;
        Self::from_coefficients(cos, sin)
    }

    pub fn n_modes(&self) -> usize {
        self.cos.len()
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin_coeffs(&self) -> &[f64] {
        &self.sin
    }

    /// Radius when the domain is an origin-centred disk.
    pub fn disk_radius(&self) -> Option<f64> {
        (self.active == 1).then_some(self.cos[0])
    }

    /// `(h, h', h'')` at angle `theta`.
    pub fn support_derivs(&self, theta: f64) -> (f64, f64, f64) {
        let (s1, c1) = theta.sin_cos();
        let (mut c, mut s) = (1.0, 0.0);
        let (mut h, mut h1, mut h2) = (0.0, 0.0, 0.0);
        for j in 0..self.active {
            let (a, b) = (self.cos[j], self.sin[j]);
            let jf = j as f64;
            let even = a * c + b * s;
            h += even;
            h1 += jf * (b * c - a * s);
            h2 -= jf * jf * even;
            let cn = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = cn;
        }
        (h, h1, h2)
    }

    pub fn support(&self, theta: f64) -> f64 {
        self.support_derivs(theta).0
    }

    /// `h + h''`, the radius of curvature at the boundary point with normal angle `theta`.
    pub fn radius_of_curvature(&self, theta: f64) -> f64 {
        let (h, _, h2) = self.support_derivs(theta);
        h + h2
    }

    pub fn curvature(&self, theta: f64) -> Result<f64> {
        let rho = self.radius_of_curvature(theta);
        if rho <= 0.0 {
            return Err(Error::NonConvex { theta, radius: rho });
        }
        Ok(1.0 / rho)
    }

    /// Boundary point whose outer unit normal is `(cos θ, sin θ)`.
    pub fn boundary_point(&self, theta: f64) -> Point2 {
        let (h, h1, _) = self.support_derivs(theta);
        let (s, c) = theta.sin_cos();
        [h * c - h1 * s, h * s + h1 * c]
    }

    pub fn max_support(&self) -> f64 {
        self.coarse_support_extreme(f64::max)
    }

    pub fn min_support(&self) -> f64 {
        self.coarse_support_extreme(f64::min)
    }

    fn coarse_support_extreme(&self, pick: fn(f64, f64) -> f64) -> f64 {
        if let Some(r) = self.disk_radius() {
            return r;
        }
        (0..CHECK_GRID)
            .map(|k| self.support(TAU * k as f64 / CHECK_GRID as f64))
            .reduce(pick)
            .unwrap_or(self.cos[0])
    }

    /// Signed distance to the boundary (positive inside) together with the
    /// normal angle of the nearest boundary point.
    ///
    /// Both cases reduce to minimising `g(θ) = h(θ) − x·u(θ)`: the minimum is
    /// the distance to the boundary inside, and minus the distance to the set
    /// outside.
    pub fn signed_distance_with_normal(&self, x: Point2) -> (f64, f64) {
        if let Some(r) = self.disk_radius() {
            let n = x[0].hypot(x[1]);
            let theta = if n > 0.0 { x[1].atan2(x[0]) } else { 0.0 };
            return (r - n, theta);
        }
        let table = &self.coarse;
        let m = table.theta.len();
        let mut stack = [0.0f64; 1024];
        let mut heap = Vec::new();
        let g: &mut [f64] = if m <= stack.len() {
            &mut stack[..m]
        } else {
            heap.resize(m, 0.0);
            &mut heap
        };
        for (k, v) in g.iter_mut().enumerate() {
            *v = table.h[k] - dot(x, table.normal[k]);
        }
        let mut best = (f64::INFINITY, 0.0);
        let step = TAU / m as f64;
        // The true minimum lies at most `margin` below the coarse one, so coarse
        // minima above the best coarse value plus that margin cannot hold it.
        let g_min = g.iter().copied().fold(f64::INFINITY, f64::min);
        let margin = self.coarse_margin(x);
        for k in 0..m {
            let prev = g[(k + m - 1) % m];
            let next = g[(k + 1) % m];
            if g[k] <= prev && g[k] <= next && g[k] <= g_min + margin {
                let theta = table.theta[k];
                let (val, th) = self.polish_min(x, theta - step, theta + step);
                if val < best.0 {
                    best = (val, th);
                }
            }
        }
        if !best.0.is_finite() {
            // Flat g on the coarse grid; fall back to the grid minimum.
            let (k, &v) = g
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("non-empty table");
            best = (v, table.theta[k]);
        }
        (best.0, best.1.rem_euclid(TAU))
    }

    /// `max|g''| step² / 8`: how far the minimum of `g` can sit below its
    /// smallest sample on the coarse grid.
    fn coarse_margin(&self, x: Point2) -> f64 {
        let step = TAU / self.coarse.theta.len() as f64;
        (self.coarse.curvature_bound + x[0].hypot(x[1])) * step * step / 8.0
    }

    /// Lower bound on `δ_D(x)` from the coarse table alone, with a fall-back
    /// to the exact distance when the bound is not within a factor 2.
    fn fast_interior_distance(&self, x: Point2) -> Option<f64> {
        if self.disk_radius().is_some() {
            let d = self.signed_distance(x);
            return (d > BOUNDARY_TOL).then_some(d);
        }
        let table = &self.coarse;
        let g_min = table
            .h
            .iter()
            .zip(&table.normal)
            .map(|(h, n)| h - dot(x, *n))
            .fold(f64::INFINITY, f64::min);
        if g_min <= BOUNDARY_TOL {
            return None;
        }
        let bound = g_min - self.coarse_margin(x);
        if bound >= 0.5 * g_min {
            return Some(bound);
        }
        let d = self.signed_distance(x);
        (d > BOUNDARY_TOL).then_some(d)
    }

    pub fn signed_distance(&self, x: Point2) -> f64 {
        self.signed_distance_with_normal(x).0
    }

    /// Safeguarded Newton minimisation of `g` on `[lo, hi]`.
    fn polish_min(&self, x: Point2, mut lo: f64, mut hi: f64) -> (f64, f64) {
        let g_at = |t: f64| {
            let (h, h1, h2) = self.support_derivs(t);
            let (s, c) = t.sin_cos();
            let xu = x[0] * c + x[1] * s;
            let xup = -x[0] * s + x[1] * c;
            (h - xu, h1 - xup, h2 + xu)
        };
        let (_, dlo, _) = g_at(lo);
        let (_, dhi, _) = g_at(hi);
        if dlo > 0.0 || dhi < 0.0 {
            // The bracket does not straddle a stationary point; keep the best end.
            let mid = 0.5 * (lo + hi);
            let cands = [lo, mid, hi];
            return cands
                .iter()
                .map(|&t| (g_at(t).0, t))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("three candidates");
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..60 {
            let (_, d1, d2) = g_at(t);
            if d1 > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let newton = if d2 > 0.0 { t - d1 / d2 } else { f64::NAN };
            // g is stationary here, so an angle error e costs only g'' e² in value.
            if (newton - t).abs() < 1e-11 || hi - lo < 1e-11 {
                if newton >= lo && newton <= hi {
                    t = newton;
                }
                break;
            }
            t = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        (g_at(t).0, t)
    }

    pub fn contains(&self, x: Point2) -> bool {
        self.signed_distance(x) > BOUNDARY_TOL
    }

    /// `δ_D(x)` for interior points.
    pub fn boundary_distance(&self, x: Point2) -> Result<f64> {
        let d = self.signed_distance(x);
        if d > BOUNDARY_TOL {
            Ok(d)
        } else {
            Err(Error::PointOutside(x.to_vec()))
        }
    }

    /// Minkowski combination `(1 − t) D + t B(0,1)`.
    pub fn deform(&self, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidParameter(format!("deformation t = {t}")));
        }
        let mut cos: Vec<f64> = self.cos.iter().map(|a| (1.0 - t) * a).collect();
        let sin: Vec<f64> = self.sin.iter().map(|b| (1.0 - t) * b).collect();
        cos[0] += t;
        Self::from_coefficients(cos, sin)
    }

    /// Inner radius, curvature bounds and a finite-difference curvature
    /// Lipschitz constant over the check grid.
    pub fn classify(&self) -> Result<ClassFParams> {
        let n = CHECK_GRID;
        let mut kappa = Vec::with_capacity(n);
        let mut pts = Vec::with_capacity(n);
        let mut h_min = f64::INFINITY;
        let mut h_max = f64::NEG_INFINITY;
        for k in 0..n {
            let theta = TAU * k as f64 / n as f64;
            kappa.push(self.curvature(theta)?);
            pts.push(self.boundary_point(theta));
            let h = self.support(theta);
            h_min = h_min.min(h);
            h_max = h_max.max(h);
        }
        if h_max > 1.0 + 1e-12 {
            return Err(Error::NotInUnitBall(h_max));
        }
        let mut c1: f64 = 0.0;
        for k in 0..n {
            let j = (k + 1) % n;
            let dp = (pts[j][0] - pts[k][0]).hypot(pts[j][1] - pts[k][1]);
            if dp > 0.0 {
                c1 = c1.max((kappa[j] - kappa[k]).abs() / dp);
            }
        }
        let (kappa1, kappa2) = kappa
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &k| {
                (lo.min(k), hi.max(k))
            });
        Ok(ClassFParams {
            c1: c1.max(1e-12),
            r1: h_min,
            kappa1,
            kappa2,
        })
    }

    /// Ray caster from an interior anchor.
    pub fn rays_from(&self, anchor: Point2) -> Result<RayCaster<'_>> {
        RayCaster::new(self, anchor)
    }

    fn certify(&self) -> Result<()> {
        let n = CHECK_GRID;
        let step = TAU / n as f64;
        for k in 0..n {
            let theta = step * k as f64;
            let (h, _, h2) = self.support_derivs(theta);
            if h <= 0.0 {
                return Err(Error::InvalidDomain(format!(
                    "support value {h} at theta = {theta}: origin not inside"
                )));
            }
            let rho = h + h2;
            if rho <= 0.0 {
                return Err(Error::NonConvex { theta, radius: rho });
            }
            if rho < CONVEXITY_REFINE_BELOW {
                for i in 1..64 {
                    let t = theta + step * (i as f64 / 64.0 - 0.5);
                    let r = self.radius_of_curvature(t);
                    if r <= 0.0 {
                        return Err(Error::NonConvex {
                            theta: t,
                            radius: r,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn build_tables(&mut self) {
        let m = (8 * self.active).max(128);
        let theta: Vec<f64> = (0..m).map(|k| TAU * k as f64 / m as f64).collect();
        let h = theta.iter().map(|&t| self.support(t)).collect();
        let normal = theta.iter().map(|&t| unit(t)).collect();
        let curvature_bound = (0..self.active)
            .map(|j| (j * j) as f64 * self.cos[j].hypot(self.sin[j]))
            .sum::<f64>()
            + self.cos[0];
        self.coarse = CoarseTable {
            theta,
            h,
            normal,
            curvature_bound,
        };
        self.boundary = (0..BOUNDARY_SAMPLES)
            .map(|k| {
                let t = TAU * k as f64 / BOUNDARY_SAMPLES as f64;
                (t, self.boundary_point(t))
            })
            .collect();
    }

    fn boundary_samples(&self) -> &[(f64, Point2)] {
        &self.boundary
    }
}

impl PartialEq for SupportDomain {
    fn eq(&self, other: &Self) -> bool {
        self.cos == other.cos && self.sin == other.sin
    }
}

impl Region for SupportDomain {
    fn dim(&self) -> usize {
        2
    }

    fn interior_distance(&self, x: &[f64]) -> Option<f64> {
        let d = self.signed_distance([x[0], x[1]]);
        (d > BOUNDARY_TOL).then_some(d)
    }

    fn inscribed_radius(&self, x: &[f64]) -> Option<f64> {
        self.fast_interior_distance([x[0], x[1]])
    }
}

/// Symmetric boundary gap `min(sup_{∂D1} dist(·,∂D2), sup_{∂D2} dist(·,∂D1))`.
pub fn domain_gap(a: &SupportDomain, b: &SupportDomain) -> f64 {
    if a == b {
        return 0.0;
    }
    let one_way = |from: &SupportDomain, to: &SupportDomain| {
        (0..GAP_SAMPLES)
            .map(|k| {
                let p = from.boundary_point(TAU * k as f64 / GAP_SAMPLES as f64);
                to.signed_distance(p).abs()
            })
            .fold(0.0, f64::max)
    };
    one_way(a, b).min(one_way(b, a))
}

fn fourier_project(f: impl Fn(f64) -> f64, n_modes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n_modes == 0 || n_modes > CHECK_GRID / 4 {
        return Err(Error::InvalidDomain(format!("n_modes = {n_modes}")));
    }
    let n = CHECK_GRID;
    let samples: Vec<f64> = (0..n).map(|k| f(TAU * k as f64 / n as f64)).collect();
    let mut cos = vec![0.0; n_modes];
    let mut sin = vec![0.0; n_modes];
    for (j, (cj, sj)) in cos.iter_mut().zip(sin.iter_mut()).enumerate() {
        let (mut a, mut b) = (0.0, 0.0);
        for (k, v) in samples.iter().enumerate() {
            // Reduce j*k modulo n so the angle stays exact.
            let t = TAU * ((j * k) % n) as f64 / n as f64;
            let (s, c) = t.sin_cos();
            a += v * c;
            b += v * s;
        }
        let norm = if j == 0 { 1.0 } else { 2.0 } / n as f64;
        *cj = a * norm;
        *sj = b * norm;
    }
    Ok((cos, sin))
}

/// Casts rays from a fixed interior anchor to the boundary.
pub struct RayCaster<'a> {
    dom: &'a SupportDomain,
    anchor: Point2,
    /// Unwrapped polar angles (about the anchor) of the cached boundary samples.
    angles: Vec<f64>,
}

impl<'a> RayCaster<'a> {
    fn new(dom: &'a SupportDomain, anchor: Point2) -> Result<Self> {
        if dom.signed_distance(anchor) <= 0.0 {
            return Err(Error::PointOutside(anchor.to_vec()));
        }
        let mut angles = Vec::new();
        if dom.disk_radius().is_none() {
            let samples = dom.boundary_samples();
            angles.reserve(samples.len() + 1);
            let mut prev = f64::NAN;
            for &(_, p) in samples {
                let mut a = (p[1] - anchor[1]).atan2(p[0] - anchor[0]);
                if prev.is_finite() {
                    while a < prev {
                        a += TAU;
                    }
                }
                angles.push(a);
                prev = a;
            }
            angles.push(angles[0] + TAU);
        }
        Ok(RayCaster {
            dom,
            anchor,
            angles,
        })
    }

    pub fn anchor(&self) -> Point2 {
        self.anchor
    }

    /// Distance from the anchor to the boundary along direction angle `psi`.
    pub fn exit_distance(&self, psi: f64) -> f64 {
        let e = unit(psi);
        let c = self.anchor;
        if let Some(r) = self.dom.disk_radius() {
            let ce = dot(c, e);
            let cc = dot(c, c);
            return -ce + (ce * ce - cc + r * r).max(0.0).sqrt();
        }
        let start = self.angles[0];
        let target = start + (psi - start).rem_euclid(TAU);
        let k = self
            .angles
            .partition_point(|&a| a <= target)
            .clamp(1, self.angles.len() - 1)
            - 1;
        let samples = self.dom.boundary_samples();
        let step = TAU / samples.len() as f64;
        let mut lo = samples[k].0;
        let mut hi = lo + step;
        let cross = |t: f64| {
            let p = self.dom.boundary_point(t);
            e[0] * (p[1] - c[1]) - e[1] * (p[0] - c[0])
        };
        // The cross product increases through zero across the bracket.
        let mut t = 0.5 * (lo + hi);
        for _ in 0..60 {
            let f = cross(t);
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let rho = self.dom.radius_of_curvature(t);
            let u_perp = [-t.sin(), t.cos()];
            let df = rho * (e[0] * u_perp[1] - e[1] * u_perp[0]);
            let newton = if df > 0.0 { t - f / df } else { f64::NAN };
            // The gauge formula below is stationary in t, so 1e-11 is ample.
            if (newton - t).abs() < 1e-11 || hi - lo < 1e-11 {
                if newton >= lo && newton <= hi {
                    t = newton;
                }
                break;
            }
            t = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        // Gauge formula: stationary in θ, so residual angle error enters squared.
        let u = unit(t);
        let eu = dot(e, u);
        if eu > 1e-3 {
            (self.dom.support(t) - dot(c, u)) / eu
        } else {
            let p = self.dom.boundary_point(t);
            dot(e, [p[0] - c[0], p[1] - c[1]])
        }
    }
}

/// Rotation of the plane by `angle`, used to express points in a local boundary frame.
pub fn rotate(p: Point2, angle: f64) -> Point2 {
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

/// Angle of the ray from the origin through the boundary, in `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    theta.rem_euclid(TAU)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ellipse() -> SupportDomain {
        SupportDomain::ellipse(0.8, 0.5).unwrap()
    }

    #[test]
    fn disk_containment_and_distance() {
        let d = SupportDomain::disk(1.0).unwrap();
        assert!(d.contains([0.0, 0.0]));
        assert!(!d.contains([2.0, 0.0]));
        assert!(!d.contains([1.0, 0.0]));
        assert!((d.boundary_distance([0.3, 0.0]).unwrap() - 0.7).abs() < 1e-15);
        assert!((d.boundary_distance([0.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            d.boundary_distance([2.0, 0.0]),
            Err(Error::PointOutside(_))
        ));
    }

    #[test]
    fn ellipse_queries() {
        let e = ellipse();
        assert!(e.contains([0.79, 0.0]));
        assert!(!e.contains([0.81, 0.0]));
        assert!((e.boundary_distance([0.0, 0.0]).unwrap() - 0.5).abs() < 1e-12);
        // Dense brute-force distance from the implicit boundary.
        let x = [0.31, -0.12];
        let brute = (0..200_000)
            .map(|k| {
                let t = TAU * k as f64 / 200_000.0;
                let p = [0.8 * t.cos(), 0.5 * t.sin()];
                (p[0] - x[0]).hypot(p[1] - x[1])
            })
            .fold(f64::INFINITY, f64::min);
        assert!((e.boundary_distance(x).unwrap() - brute).abs() < 1e-9);
        // Outside: distance to the set.
        let y = [1.0, 0.0];
        assert!((e.signed_distance(y) + 0.2).abs() < 1e-12);
    }

    #[test]
    fn curvature_values() {
        let half = SupportDomain::disk(0.5).unwrap();
        assert!((half.curvature(1.3).unwrap() - 2.0).abs() < 1e-14);
        let unit_disk = SupportDomain::disk(1.0).unwrap();
        assert!((unit_disk.curvature(0.2).unwrap() - 1.0).abs() < 1e-14);
        let e = ellipse();
        assert!((e.curvature(0.0).unwrap() - 3.2).abs() < 1e-10);
        // Finite differences of the parameterisation (0.8 cos s, 0.5 sin s) at s = 0.
        let s = 1e-4;
        let p = |s: f64| [0.8 * f64::cos(s), 0.5 * f64::sin(s)];
        let (a, b, c) = (p(-s), p(0.0), p(s));
        let d1 = [(c[0] - a[0]) / (2.0 * s), (c[1] - a[1]) / (2.0 * s)];
        let d2 = [
            (c[0] - 2.0 * b[0] + a[0]) / (s * s),
            (c[1] - 2.0 * b[1] + a[1]) / (s * s),
        ];
        let k_fd = (d1[0] * d2[1] - d1[1] * d2[0]).abs() / d1[0].hypot(d1[1]).powi(3);
        assert!((e.curvature(0.0).unwrap() - k_fd).abs() < 1e-5);
    }

    #[test]
    fn classify_examples() {
        let half = SupportDomain::disk(0.5).unwrap().classify().unwrap();
        assert!((half.r1 - 0.5).abs() < 1e-15);
        assert!((half.kappa1 - 2.0).abs() < 1e-14 && (half.kappa2 - 2.0).abs() < 1e-14);
        assert!(half.c1 < 1e-9);
        let unit_disk = SupportDomain::disk(1.0).unwrap().classify().unwrap();
        assert_eq!(
            (unit_disk.r1, unit_disk.kappa1, unit_disk.kappa2),
            (1.0, 1.0, 1.0)
        );
        let e = ellipse().classify().unwrap();
        assert!((e.kappa1 - 0.78125).abs() < 1e-9);
        assert!((e.kappa2 - 3.2).abs() < 1e-9);
        assert!((e.r1 - 0.5).abs() < 1e-12);
        assert!(matches!(
            SupportDomain::disk(1.5).unwrap().classify(),
            Err(Error::NotInUnitBall(_))
        ));
    }

    #[test]
    fn nonconvex_rejected() {
        // h = 1 + 0.2 cos 3θ has h + h'' = 1 − 1.6 cos 3θ, negative somewhere.
        let err = SupportDomain::from_coefficients(vec![1.0, 0.0, 0.0, 0.2], vec![0.0; 4]);
        assert!(matches!(err, Err(Error::NonConvex { .. })));
    }

    #[test]
    fn deform_examples() {
        let d = SupportDomain::disk(0.5).unwrap().deform(0.5).unwrap();
        assert_eq!(d.disk_radius(), Some(0.75));
        assert!((d.curvature(0.4).unwrap() - 4.0 / 3.0).abs() < 1e-14);
        let e = ellipse();
        let one = e.deform(1.0).unwrap();
        assert_eq!(one.disk_radius(), Some(1.0));
        assert_eq!(e.deform(0.0).unwrap(), e);
        let half = e.deform(0.5).unwrap().classify().unwrap();
        assert!(half.kappa1 >= 0.78125 - 1e-6 && half.kappa2 <= 3.2 + 1e-6);
    }

    #[test]
    fn gap_examples() {
        let a = SupportDomain::disk(1.0).unwrap();
        let b = SupportDomain::disk(0.9).unwrap();
        assert_eq!(domain_gap(&a, &a), 0.0);
        assert!((domain_gap(&a, &b) - 0.1).abs() < 1e-14);
        let g = domain_gap(&ellipse(), &a);
        assert!(g <= 0.5 + 1e-12 && g > 0.0);
    }

    #[test]
    fn polygon_smoothing_is_convex() {
        let square = [[0.5, 0.5], [-0.5, 0.5], [-0.5, -0.5], [0.5, -0.5]];
        let d = SupportDomain::from_polygon(&square, 64).unwrap();
        assert!(d.contains([0.45, 0.45]));
        assert!(!d.contains([0.6, 0.0]));
        for k in 0..CHECK_GRID {
            assert!(
                d.radius_of_curvature(TAU * k as f64 / CHECK_GRID as f64) >= SMOOTHING_RADIUS * 0.5
            );
        }
    }

    #[test]
    fn ray_exit_matches_gauge() {
        let e = ellipse();
        let c = [0.2, 0.1];
        let rays = e.rays_from(c).unwrap();
        for k in 0..37 {
            let psi = -std::f64::consts::PI + k as f64 * 0.17;
            let r = rays.exit_distance(psi);
            let p = [c[0] + r * psi.cos(), c[1] + r * psi.sin()];
            let implicit = (p[0] / 0.8).powi(2) + (p[1] / 0.5).powi(2);
            assert!((implicit - 1.0).abs() < 1e-10, "psi {psi}: {implicit}");
        }
    }

    proptest! {
        #[test]
        fn deformed_support_is_affine(t in 0.0f64..1.0, theta in 0.0f64..TAU) {
            let e = ellipse();
            let d = e.deform(t).unwrap();
            let expect = (1.0 - t) * e.support(theta) + t;
            prop_assert!((d.support(theta) - expect).abs() < 1e-13);
        }

        #[test]
        fn boundary_distance_is_lipschitz(
            x in (-0.7f64..0.7, -0.4f64..0.4),
            y in (-0.7f64..0.7, -0.4f64..0.4),
        ) {
            let e = ellipse();
            let (x, y) = ([x.0, x.1], [y.0, y.1]);
            prop_assume!(e.contains(x) && e.contains(y));
            let dx = e.boundary_distance(x).unwrap();
            let dy = e.boundary_distance(y).unwrap();
            prop_assert!((dx - dy).abs() <= (x[0] - y[0]).hypot(x[1] - y[1]) + 1e-12);
        }

        #[test]
        fn gap_is_lipschitz_in_t(t in 0.0f64..1.0, dt in 0.0f64..0.2) {
            let e = ellipse();
            let s = (t + dt).min(1.0);
            let g = domain_gap(&e.deform(t).unwrap(), &e.deform(s).unwrap());
            prop_assert!(g <= (s - t) * (1.0 + e.max_support()) + 1e-12);
        }
    }
}
