//! Adaptive cubature over convex planar domains.
//!
//! The domain is parameterised in polar form about an interior anchor,
//! `y = c + ρ(s) R(ψ) (cos ψ, sin ψ)` with `ρ(s) = s (2 − s)`, where `R(ψ)` is
//! the distance from the anchor to the boundary along `ψ`. Since
//! `1 − ρ = (1 − s)²`, integrands behaving like `δ_D^{1/2}` near the boundary
//! are smooth in `s`, and a kernel peak at the anchor is resolved by
//! refinement in `s` alone. Cells are rectangles in `(s, ψ)` integrated by a
//! tensor Gauss–Kronrod 7/15 rule and bisected, largest error first, along the
//! direction whose embedded 7-point rule disagrees most.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::geom::{Point2, RayCaster, SupportDomain};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15 nodes on [−1, 1] with Kronrod and (embedded) Gauss weights.
fn rule() -> ([f64; 15], [f64; 15], [f64; 15]) {
    let mut x = [0.0; 15];
    let mut wk = [0.0; 15];
    let mut wg = [0.0; 15];
    for i in 0..7 {
        x[i] = -XGK[i];
        x[14 - i] = XGK[i];
        wk[i] = WGK[i];
        wk[14 - i] = WGK[i];
        if i % 2 == 1 {
            wg[i] = WG[i / 2];
            wg[14 - i] = WG[i / 2];
        }
    }
    x[7] = 0.0;
    wk[7] = WGK[7];
    wg[7] = WG[3];
    (x, wk, wg)
}

/// Tolerances and budget for [`integrate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_cells: usize,
    /// Anchor for the polar cells, placed at an interior integrable singularity
    /// or a sharp peak of the integrand.
    pub singular_center: Option<Point2>,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec {
            rel_tol: 1e-6,
            abs_tol: 1e-10,
            max_cells: 20_000,
            singular_center: None,
        }
    }
}

impl QuadSpec {
    pub fn with_center(mut self, c: Point2) -> Self {
        self.singular_center = Some(c);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "quadrature tolerances must be positive (rel {}, abs {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if self.max_cells < 64 {
            return Err(Error::InvalidParameter(format!(
                "max_cells = {} < 64",
                self.max_cells
            )));
        }
        Ok(())
    }
}

/// Componentwise result of [`integrate_vec`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult<const N: usize> {
    pub value: [f64; N],
    pub error: [f64; N],
    pub cells: usize,
    pub converged: bool,
}

/// Integrates a scalar function over the domain.
///
/// Returns `(value, error_estimate)`, or [`Error::NonConverged`] with the best
/// value when the cell budget runs out.
pub fn integrate(
    dom: &SupportDomain,
    f: impl Fn(Point2) -> f64 + Sync,
    spec: &QuadSpec,
) -> Result<(f64, f64)> {
    let r = integrate_vec(dom, |y| [f(y)], spec)?;
    if r.converged {
        Ok((r.value[0], r.error[0]))
    } else {
        Err(Error::NonConverged {
            value: r.value[0],
            error: r.error[0],
            cells: r.cells,
        })
    }
}

#[derive(Clone, Copy, Debug)]
struct Cell<const N: usize> {
    s: (f64, f64),
    psi: (f64, f64),
    value: [f64; N],
    error: [f64; N],
    abs: [f64; N],
    /// Error split by direction, summed over components after scaling.
    err_s: f64,
    err_psi: f64,
    err_s_raw: [f64; N],
    err_psi_raw: [f64; N],
}

struct Ranked<const N: usize> {
    score: f64,
    id: usize,
    cell: Cell<N>,
}

impl<const N: usize> PartialEq for Ranked<N> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl<const N: usize> Eq for Ranked<N> {}
impl<const N: usize> PartialOrd for Ranked<N> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<const N: usize> Ord for Ranked<N> {
    fn cmp(&self, o: &Self) -> Ordering {
        // Ties broken by creation order so refinement is deterministic.
        self.score
            .total_cmp(&o.score)
            .then_with(|| o.id.cmp(&self.id))
    }
}

struct Evaluator<'a, F, const N: usize> {
    rays: RayCaster<'a>,
    f: F,
    x: [f64; 15],
    wk: [f64; 15],
    wg: [f64; 15],
}

impl<F, const N: usize> Evaluator<'_, F, N>
where
    F: Fn(Point2) -> [f64; N],
{
    fn cell(&self, s: (f64, f64), psi: (f64, f64), weights: &[f64; N]) -> Cell<N> {
        let hs = 0.5 * (s.1 - s.0);
        let cs = 0.5 * (s.1 + s.0);
        let hp = 0.5 * (psi.1 - psi.0);
        let cp = 0.5 * (psi.1 + psi.0);
        let c = self.rays.anchor();
        let mut kk = [0.0; N];
        let mut gk = [0.0; N];
        let mut kg = [0.0; N];
        let mut abs = [0.0; N];
        for j in 0..15 {
            let p = cp + hp * self.x[j];
            let r = self.rays.exit_distance(p);
            let (sp, cpp) = p.sin_cos();
            let mut row_k = [0.0; N];
            let mut row_g = [0.0; N];
            let mut row_abs = [0.0; N];
            for i in 0..15 {
                let sv = cs + hs * self.x[i];
                let rho = sv * (2.0 - sv);
                let drho = 2.0 * (1.0 - sv);
                let radius = rho * r;
                let jac = r * r * rho * drho;
                if jac == 0.0 {
                    continue;
                }
                let y = [c[0] + radius * cpp, c[1] + radius * sp];
                let v = (self.f)(y);
                for k in 0..N {
                    let fv = v[k] * jac;
                    row_k[k] += self.wk[i] * fv;
                    row_g[k] += self.wg[i] * fv;
                    row_abs[k] += self.wk[i] * fv.abs();
                }
            }
            for k in 0..N {
                kk[k] += self.wk[j] * row_k[k];
                gk[k] += self.wk[j] * row_g[k];
                kg[k] += self.wg[j] * row_k[k];
                abs[k] += self.wk[j] * row_abs[k];
            }
        }
        let area = hs * hp;
        let mut cell = Cell {
            s,
            psi,
            value: [0.0; N],
            error: [0.0; N],
            abs: [0.0; N],
            err_s: 0.0,
            err_psi: 0.0,
            err_s_raw: [0.0; N],
            err_psi_raw: [0.0; N],
        };
        for k in 0..N {
            cell.value[k] = kk[k] * area;
            cell.abs[k] = abs[k] * area;
            let floor = 50.0 * f64::EPSILON * cell.abs[k];
            cell.err_s_raw[k] = ((kk[k] - gk[k]) * area).abs();
            cell.err_psi_raw[k] = ((kk[k] - kg[k]) * area).abs();
            cell.error[k] = (cell.err_s_raw[k] + cell.err_psi_raw[k]).max(floor);
        }
        rescore(&mut cell, weights);
        cell
    }
}

fn rescore<const N: usize>(cell: &mut Cell<N>, weights: &[f64; N]) {
    cell.err_s = 0.0;
    cell.err_psi = 0.0;
    for k in 0..N {
        cell.err_s = cell.err_s.max(cell.err_s_raw[k] / weights[k]);
        cell.err_psi = cell.err_psi.max(cell.err_psi_raw[k] / weights[k]);
    }
}

fn score<const N: usize>(cell: &Cell<N>, weights: &[f64; N]) -> f64 {
    (0..N)
        .map(|k| cell.error[k] / weights[k])
        .fold(0.0, f64::max)
}

/// Integrates an `N`-component function over the domain, sharing cells
/// between components. Non-convergence is reported through
/// [`QuadResult::converged`].
pub fn integrate_vec<const N: usize, F>(
    dom: &SupportDomain,
    f: F,
    spec: &QuadSpec,
) -> Result<QuadResult<N>>
where
    F: Fn(Point2) -> [f64; N] + Sync,
{
    spec.validate()?;
    let anchor = match spec.singular_center {
        Some(c) if dom.signed_distance(c) > 1e-6 * dom.min_support() => c,
        _ => [0.0, 0.0],
    };
    let psi0 = match spec.singular_center {
        // Align a cell edge with the direction of an exterior singular point so
        // that its nearest boundary stretch is not split across cells.
        Some(c) if anchor != c => c[1].atan2(c[0]),
        _ => 0.0,
    };
    let (x, wk, wg) = rule();
    let ev = Evaluator {
        rays: dom.rays_from(anchor)?,
        f,
        x,
        wk,
        wg,
    };

    const S_SPLITS: usize = 2;
    const PSI_SPLITS: usize = 8;
    let unit_weights = [1.0; N];
    let mut cells: Vec<Cell<N>> = Vec::with_capacity(S_SPLITS * PSI_SPLITS);
    for a in 0..S_SPLITS {
        for b in 0..PSI_SPLITS {
            let s = (a as f64 / S_SPLITS as f64, (a + 1) as f64 / S_SPLITS as f64);
            let p = (
                psi0 + TAU * b as f64 / PSI_SPLITS as f64,
                psi0 + TAU * (b + 1) as f64 / PSI_SPLITS as f64,
            );
            cells.push(ev.cell(s, p, &unit_weights));
        }
    }

    let totals = |cells: &mut dyn Iterator<Item = &Cell<N>>| {
        let mut value = [0.0; N];
        let mut error = [0.0; N];
        let mut abs = [0.0; N];
        for c in cells {
            for k in 0..N {
                value[k] += c.value[k];
                error[k] += c.error[k];
                abs[k] += c.abs[k];
            }
        }
        (value, error, abs)
    };
    let weights_for = |value: &[f64; N], abs: &[f64; N]| -> [f64; N] {
        std::array::from_fn(|k| {
            (spec.rel_tol * value[k].abs())
                .max(spec.abs_tol)
                .max(100.0 * f64::EPSILON * abs[k])
        })
    };

    let (mut value, mut error, mut abs) = totals(&mut cells.iter());
    let mut weights = weights_for(&value, &abs);
    let mut next_id = 0usize;
    let mut heap: BinaryHeap<Ranked<N>> = BinaryHeap::new();
    for mut c in cells.drain(..) {
        rescore(&mut c, &weights);
        heap.push(Ranked {
            score: score(&c, &weights),
            id: next_id,
            cell: c,
        });
        next_id += 1;
    }
    let mut rebuild_at = 2 * heap.len();

    let done = |error: &[f64; N], weights: &[f64; N]| (0..N).all(|k| error[k] <= weights[k]);
    while !done(&error, &weights) && heap.len() < spec.max_cells {
        let Some(Ranked { cell, .. }) = heap.pop() else {
            break;
        };
        let (a, b) = if cell.err_s >= cell.err_psi {
            let m = 0.5 * (cell.s.0 + cell.s.1);
            (
                ev.cell((cell.s.0, m), cell.psi, &weights),
                ev.cell((m, cell.s.1), cell.psi, &weights),
            )
        } else {
            let m = 0.5 * (cell.psi.0 + cell.psi.1);
            (
                ev.cell(cell.s, (cell.psi.0, m), &weights),
                ev.cell(cell.s, (m, cell.psi.1), &weights),
            )
        };
        for k in 0..N {
            value[k] += a.value[k] + b.value[k] - cell.value[k];
            error[k] += a.error[k] + b.error[k] - cell.error[k];
            abs[k] += a.abs[k] + b.abs[k] - cell.abs[k];
        }
        for c in [a, b] {
            heap.push(Ranked {
                score: score(&c, &weights),
                id: next_id,
                cell: c,
            });
            next_id += 1;
        }
        if heap.len() >= rebuild_at {
            // Re-rank against current totals and clear accumulated drift.
            let mut all: Vec<Cell<N>> = heap.drain().map(|r| r.cell).collect();
            all.sort_by(|p, q| {
                (p.s.0, p.psi.0)
                    .partial_cmp(&(q.s.0, q.psi.0))
                    .unwrap_or(Ordering::Equal)
            });
            (value, error, abs) = totals(&mut all.iter());
            weights = weights_for(&value, &abs);
            for mut c in all {
                rescore(&mut c, &weights);
                heap.push(Ranked {
                    score: score(&c, &weights),
                    id: next_id,
                    cell: c,
                });
                next_id += 1;
            }
            rebuild_at = 2 * heap.len();
        }
    }
    weights = weights_for(&value, &abs);
    Ok(QuadResult {
        value,
        error,
        cells: heap.len(),
        converged: done(&error, &weights),
    })
}
