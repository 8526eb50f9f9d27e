//! Walk-on-spheres estimation of expected exit times.
//!
//! From the current point `y` the walk inscribes the ball `B(y, κ δ(y))`, adds
//! that ball's mean exit time and jumps to an exact sample of the exit
//! position. For `α < 2` the exit is a jump, so the walk ends exactly when a
//! jump lands outside the domain. Brownian walks (`α = 2`) use the full
//! inscribed ball and stop inside a thin boundary shell.

mod field;

pub use field::{build_field, field_domain_ref, FieldConfig, PhiField, FIELD_HEADER};

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closedform::{BallSpec, StableParams};
use crate::error::{Error, Result};
use crate::geom::Region;
use crate::rng::{walk_rng, WalkRng};

/// Walks are processed in fixed-size chunks whose partial sums are merged in
/// chunk order, so the result does not depend on the thread count.
const CHUNK: u64 = 1024;
/// Brownian walks stop once `δ` falls below this fraction of its initial value.
const SHELL_FRACTION: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub n_walks: u64,
    /// Step radius as a fraction of the distance to the boundary.
    pub ball_fraction: f64,
    pub max_steps: u32,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            n_walks: 100_000,
            ball_fraction: 0.5,
            max_steps: 10_000,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_walks == 0 {
            return Err(Error::InvalidParameter("n_walks must be >= 1".into()));
        }
        if !(self.ball_fraction > 0.0 && self.ball_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "ball_fraction = {} not in (0, 1)",
                self.ball_fraction
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter("max_steps must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_walks: u64,
    /// Walks stopped by `max_steps`; their partial times are still averaged in.
    pub truncated: u64,
    pub mean_steps: f64,
}

impl WalkEstimate {
    /// Truncated walks under-count their exit time.
    pub fn biased_low(&self) -> bool {
        self.truncated > 0
    }
}

/// Exact exit-position sampler for balls, started from the centre.
#[derive(Clone, Debug)]
pub struct ExitSampler {
    alpha: f64,
    c_b: f64,
    /// `s²/ρ² ~ Beta(α/2, 1 − α/2)` for `α ∈ (0, 2)`, `α ≠ 1`.
    beta: Option<Beta<f64>>,
}

impl ExitSampler {
    pub fn new(p: &StableParams) -> Self {
        let alpha = p.alpha();
        let beta = (alpha < 2.0 && alpha != 1.0)
            .then(|| Beta::new(alpha / 2.0, 1.0 - alpha / 2.0).expect("positive shape parameters"));
        ExitSampler {
            alpha,
            c_b: p.c_b(),
            beta,
        }
    }

    /// Mean exit time from the centre of a ball of radius `s`.
    pub fn mean_exit_time(&self, s: f64) -> f64 {
        self.c_b * s.powf(self.alpha)
    }

    /// Distance from the centre to the exit position for a ball of radius `s`.
    pub fn radius<R: Rng + ?Sized>(&self, s: f64, rng: &mut R) -> f64 {
        if self.alpha == 2.0 {
            return s;
        }
        let w = match &self.beta {
            None => {
                let c = (std::f64::consts::FRAC_PI_2 * rng.random::<f64>()).cos();
                c * c
            }
            Some(beta) => beta.sample(rng),
        };
        if w > 0.0 {
            s / w.sqrt()
        } else {
            f64::MAX
        }
    }

    /// Fills `out` with a uniform direction on the unit sphere.
    pub fn direction<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        if out.len() == 2 {
            let t = std::f64::consts::TAU * rng.random::<f64>();
            let (s, c) = t.sin_cos();
            out[0] = c;
            out[1] = s;
            return;
        }
        loop {
            let mut n2 = 0.0;
            for v in out.iter_mut() {
                *v = StandardNormal.sample(rng);
                n2 += *v * *v;
            }
            if n2 > 1e-300 {
                let inv = 1.0 / n2.sqrt();
                out.iter_mut().for_each(|v| *v *= inv);
                return;
            }
        }
    }
}

/// Samples the exit position from `ball`, started at its centre.
pub fn sample_exit<R: Rng + ?Sized>(ball: &BallSpec, p: &StableParams, rng: &mut R) -> Vec<f64> {
    let sampler = ExitSampler::new(p);
    let mut dir = vec![0.0; ball.center.len()];
    sampler.direction(rng, &mut dir);
    let rho = sampler.radius(ball.radius, rng);
    ball.center
        .iter()
        .zip(&dir)
        .map(|(c, e)| c + rho * e)
        .collect()
}

/// Record of a single walk.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkOutcome {
    pub time: f64,
    pub steps: u32,
    pub truncated: bool,
    pub exit_point: Vec<f64>,
}

/// Runs one walk from `x`, which must lie in the region.
pub fn run_walk<D: Region + ?Sized>(
    dom: &D,
    sampler: &ExitSampler,
    x: &[f64],
    cfg: &WalkConfig,
    rng: &mut WalkRng,
) -> WalkOutcome {
    let mut y = x.to_vec();
    let mut dir = vec![0.0; x.len()];
    let mut time = 0.0;
    let mut steps = 0u32;
    let brownian = sampler.alpha == 2.0;
    let mut shell = 0.0;
    loop {
        let Some(d) = dom.inscribed_radius(&y) else {
            return WalkOutcome {
                time,
                steps,
                truncated: false,
                exit_point: y,
            };
        };
        if brownian {
            if steps == 0 {
                shell = SHELL_FRACTION * d;
            } else if d < shell {
                return WalkOutcome {
                    time,
                    steps,
                    truncated: false,
                    exit_point: y,
                };
            }
        }
        if steps >= cfg.max_steps {
            return WalkOutcome {
                time,
                steps,
                truncated: true,
                exit_point: y,
            };
        }
        let s = if brownian { d } else { cfg.ball_fraction * d };
        time += sampler.mean_exit_time(s);
        let rho = sampler.radius(s, rng);
        sampler.direction(rng, &mut dir);
        for (v, e) in y.iter_mut().zip(&dir) {
            *v += rho * e;
        }
        steps += 1;
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Partial {
    n: u64,
    mean: f64,
    m2: f64,
    steps: u64,
    truncated: u64,
}

impl Partial {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn merge(self, o: Partial) -> Partial {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Partial {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64 / n as f64),
            steps: self.steps + o.steps,
            truncated: self.truncated + o.truncated,
        }
    }
}

/// Monte Carlo estimate of `φ(x) = E^x τ_D`.
pub fn estimate_phi<D: Region + ?Sized>(
    dom: &D,
    p: &StableParams,
    x: &[f64],
    cfg: &WalkConfig,
) -> Result<WalkEstimate> {
    cfg.validate()?;
    if p.dim() != dom.dim() || x.len() != dom.dim() {
        return Err(Error::InvalidParameter(format!(
            "dimension mismatch: process {}, domain {}, point {}",
            p.dim(),
            dom.dim(),
            x.len()
        )));
    }
    if dom.interior_distance(x).is_none() {
        return Err(Error::PointOutside(x.to_vec()));
    }
    let sampler = ExitSampler::new(p);
    let chunks = cfg.n_walks.div_ceil(CHUNK);
    let partials: Vec<Partial> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Partial::default();
            let end = ((c + 1) * CHUNK).min(cfg.n_walks);
            for i in c * CHUNK..end {
                let mut rng = walk_rng(cfg.seed, i);
                let w = run_walk(dom, &sampler, x, cfg, &mut rng);
                acc.push(w.time);
                acc.steps += w.steps as u64;
                acc.truncated += w.truncated as u64;
            }
            acc
        })
        .collect();
    let total = partials
        .into_iter()
        .fold(Partial::default(), Partial::merge);
    let n = total.n as f64;
    let var = if total.n > 1 {
        total.m2 / (n - 1.0)
    } else {
        0.0
    };
    Ok(WalkEstimate {
        mean: total.mean,
        std_error: (var / n).sqrt(),
        n_walks: total.n,
        truncated: total.truncated,
        mean_steps: total.steps as f64 / n,
    })
}
