use serde::{Deserialize, Serialize};

use super::dnsp::{DnspContext, DnspDecision, DnspOptions};
use super::CheckError;
use crate::lp::min_l1_affine;
use crate::matrix::{norm2, DenseMatrix};
use crate::rng::{seeded, unit_vec};
use crate::support::SupportSet;

/// Mesh size on the half circle when `dim ker(AD) = 2`.
pub const SNSP_MESH_POINTS: usize = 10_000;

/// Mesh minima refined by golden-section search.
const REFINED_MINIMA: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SnspMethod {
    /// `ker(AD)` has no vector with `Dv ≠ 0`; every `c` works.
    Vacuous,
    /// One-dimensional kernel: the single direction is evaluated exactly.
    Exact,
    /// Half-circle mesh with golden-section refinement around its minima.
    Mesh { points: usize, refined: usize },
    /// Random directions only; not a certified bound.
    SampledEstimate { samples: usize },
    /// The D-NSP does not hold (or is undecided), so `c = 0`.
    NotHolding,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnspEstimate {
    #[serde(with = "crate::serde_float")]
    pub c: f64,
    pub method: SnspMethod,
    pub kernel_dim: usize,
    pub decision: DnspDecision,
    /// Direction and support attaining `c`.
    pub argmin_v: Option<Vec<f64>>,
    pub argmin_t: Option<SupportSet>,
    pub note: String,
}

/// The strong D-NSP constant: the infimum over unit `v ∈ ker(AD)` and
/// `|T| = k` of `(‖v_{T^c}‖₁ − min_{u ∈ ker D} ‖v_T + u‖₁) / ‖Dv‖₂`.
pub fn snsp_constant(a: &DenseMatrix, d: &DenseMatrix, k: usize, opts: &DnspOptions) -> Result<SnspEstimate, CheckError> {
    let ctx = DnspContext::new(a, d, opts.tol)?;
    snsp_on_context(&ctx, k, opts, None)
}

/// As [`snsp_constant`]; `known` skips the D-NSP check when the decision is
/// already at hand.
pub fn snsp_on_context(
    ctx: &DnspContext,
    k: usize,
    opts: &DnspOptions,
    known: Option<DnspDecision>,
) -> Result<SnspEstimate, CheckError> {
    let decision = match known {
        Some(d) => d,
        None => ctx.check(k, opts)?.decision,
    };
    let kernel_dim = ctx.ker_ad.dim();
    let mut est = SnspEstimate {
        c: 0.0,
        method: SnspMethod::NotHolding,
        kernel_dim,
        decision,
        argmin_v: None,
        argmin_t: None,
        note: String::new(),
    };
    if decision != DnspDecision::Holds {
        est.note = format!("D-NSP decision is {decision:?}; constant set to 0");
        return Ok(est);
    }
    let eval = Evaluator::new(ctx, k);
    let mut best = Best::default();
    match kernel_dim {
        0 => {}
        1 => {
            best.offer(eval.ratio(&ctx.ker_ad.vectors[0])?);
            est.method = SnspMethod::Exact;
        }
        2 => {
            let f = |theta: f64| eval.ratio(&circle(ctx, theta));
            let step = std::f64::consts::PI / SNSP_MESH_POINTS as f64;
            let mut values = Vec::with_capacity(SNSP_MESH_POINTS);
            for i in 0..SNSP_MESH_POINTS {
                let r = f(i as f64 * step)?;
                values.push(r.as_ref().map_or(f64::INFINITY, |x| x.value));
                best.offer(r);
            }
            let mut minima: Vec<usize> = (0..SNSP_MESH_POINTS)
                .filter(|&i| {
                    let prev = values[(i + SNSP_MESH_POINTS - 1) % SNSP_MESH_POINTS];
                    let next = values[(i + 1) % SNSP_MESH_POINTS];
                    values[i].is_finite() && values[i] <= prev && values[i] <= next
                })
                .collect();
            minima.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            minima.truncate(REFINED_MINIMA);
            for &i in &minima {
                let center = i as f64 * step;
                best.offer(golden_min(&f, center - step, center + step)?);
            }
            est.method = SnspMethod::Mesh {
                points: SNSP_MESH_POINTS,
                refined: minima.len(),
            };
        }
        _ => {
            let mut rng = seeded(opts.seed);
            let samples = opts.sampling_budget.max(1);
            for _ in 0..samples {
                let g = unit_vec(&mut rng, kernel_dim);
                best.offer(eval.ratio(&ctx.ker_ad.combine(&g))?);
            }
            est.method = SnspMethod::SampledEstimate { samples };
            est.note = format!("kernel dimension {kernel_dim}: value is a sampled estimate, not a certified bound");
        }
    }
    match best.point {
        None => {
            est.c = f64::INFINITY;
            est.method = SnspMethod::Vacuous;
            est.note = "no kernel vector of AD synthesizes a nonzero signal".into();
        }
        Some(p) => {
            est.c = p.value.max(0.0);
            est.argmin_v = Some(p.v);
            est.argmin_t = Some(p.t);
        }
    }
    Ok(est)
}

fn circle(ctx: &DnspContext, theta: f64) -> Vec<f64> {
    ctx.ker_ad.combine(&[theta.cos(), theta.sin()])
}

#[derive(Clone, Debug)]
struct Point {
    value: f64,
    v: Vec<f64>,
    t: SupportSet,
}

#[derive(Default)]
struct Best {
    point: Option<Point>,
}

impl Best {
    fn offer(&mut self, p: Option<Point>) {
        if let Some(p) = p {
            if self.point.as_ref().is_none_or(|b| p.value < b.value) {
                self.point = Some(p);
            }
        }
    }
}

struct Evaluator<'a> {
    ctx: &'a DnspContext,
    k: usize,
}

impl<'a> Evaluator<'a> {
    fn new(ctx: &'a DnspContext, k: usize) -> Self {
        Self { ctx, k }
    }

    /// Smallest ratio over all supports at `v`; `None` when `Dv` vanishes.
    ///
    /// `‖v_{T^c}‖₁ − ‖v_T‖₁` bounds each numerator from below, so supports
    /// are visited in that order and the scan stops once the bound passes
    /// the best value found.
    fn ratio(&self, v: &[f64]) -> Result<Option<Point>, CheckError> {
        let dv = norm2(&self.ctx.d.mul_vec(v));
        if dv <= 1e-12 * self.ctx.d_sigma_max * norm2(v) {
            return Ok(None);
        }
        let n = v.len();
        let mut supports: Vec<(f64, SupportSet)> = SupportSet::all_of_size(n, self.k)
            .map(|t| (t.norm1_off(v) - t.norm1_on(v), t))
            .collect();
        supports.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best: Option<Point> = None;
        for (bound, t) in supports {
            if best.as_ref().is_some_and(|b| bound / dv >= b.value) {
                break;
            }
            let inner = min_l1_affine(&t.restrict(v), &self.ctx.ker_d.vectors)?;
            let value = (t.norm1_off(v) - inner.min_value) / dv;
            if best.as_ref().is_none_or(|b| value < b.value) {
                best = Some(Point {
                    value,
                    v: v.to_vec(),
                    t,
                });
            }
        }
        Ok(best)
    }
}

fn golden_min<F>(f: &F, lo: f64, hi: f64) -> Result<Option<Point>, CheckError>
where
    F: Fn(f64) -> Result<Option<Point>, CheckError>,
{
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let val = |p: &Option<Point>| p.as_ref().map_or(f64::INFINITY, |x| x.value);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut best = Best::default();
    for _ in 0..60 {
        if val(&fc) < val(&fd) {
            b = d;
            d = c;
            fd = fc.clone();
            c = b - g * (b - a);
            best.offer(fc);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd.clone();
            d = a + g * (b - a);
            best.offer(fd);
            fd = f(d)?;
        }
    }
    best.offer(fc);
    best.offer(fd);
    Ok(best.point)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityConstants {
    pub c1: f64,
    pub c2: f64,
}

/// `C1 = 2/c` and `C2 = 2√n/(c ν_A ν_D) + 2/ν_A`.
pub fn stability_constants(c: f64, nu_a: f64, nu_d: f64, n: usize) -> Result<StabilityConstants, CheckError> {
    for (name, x) in [("c", c), ("nu_A", nu_a), ("nu_D", nu_d)] {
        if !(x > 0.0) {
            return Err(CheckError::NonPositive(format!("{name} = {x}")));
        }
    }
    if n == 0 {
        return Err(CheckError::NonPositive("n = 0".into()));
    }
    Ok(StabilityConstants {
        c1: 2.0 / c,
        c2: 2.0 * (n as f64).sqrt() / (c * nu_a * nu_d) + 2.0 / nu_a,
    })
}
