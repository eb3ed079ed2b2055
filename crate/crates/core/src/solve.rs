//! Fixed-point computation schemes.
//!
//! * [`picard`] — plain orbit iteration `x_{k+1} = Tx_k`, with period-2
//!   obstruction detection (the obstruction to fixed-point existence for
//!   perimeter-contracting maps).
//! * [`damped`] — per stage `n`, solve the contraction `x ↦ t_n·Tx` and let
//!   `t_n → 1`; requires the domain to contain the null vector.
//! * [`anchored`] — per stage, solve `x ↦ (1−s_n)x₀ + s_n·Tx`; works on any
//!   bounded convex domain, no null vector needed.
//! * [`orbit`] — orbit iteration with a trailing window that watches for
//!   returning (cluster) points.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{perimeter_of, NormSpec, Point, Tolerances};
use crate::mapping::{sample_points, DomainSpec, Kernel, MappingSpec, SamplerConfig};

/// Iterates whose coordinates exceed this are reported as diverged.
const DIVERGENCE_CAP: f64 = 1e12;

/// Relative residual spread over the trailing quarter of a run below which a
/// non-converged run is diagnosed as sitting on a residual floor.
const FLOOR_REL_CHANGE: f64 = 1e-3;

/// A consecutive-triple perimeter that shrinks by less than this factor
/// counts as stalled; together with the 2-cycle displacement test this
/// separates a genuine period-2 orbit from a slowly alternating contraction.
const STALL_MARGIN: f64 = 1e-4;

/// The damping/anchoring weight sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleSpec {
    /// `t = 1 − 1/n` for `n = 2, 3, ...` (`n_max` stages). Starts at `n = 2`
    /// so every emitted weight lies strictly inside `(0, 1)`.
    Harmonic { n_max: u64 },
    /// `t = 1 − ρⁿ` for `n = 1, ..., n_max` with `ρ ∈ (0,1)`.
    Geometric { rho: f64, n_max: u64 },
    /// An explicit nondecreasing list of weights in `(0, 1)`.
    Explicit { values: Vec<f64> },
}

impl ScheduleSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ScheduleSpec::Harmonic { n_max } | ScheduleSpec::Geometric { n_max, .. } if *n_max == 0 => {
                Err(Error::InvalidSpec("schedule requires n_max >= 1".into()))
            }
            ScheduleSpec::Geometric { rho, .. } if !(*rho > 0.0 && *rho < 1.0) => {
                Err(Error::InvalidSpec(format!("geometric schedule ratio {rho} outside (0,1)")))
            }
            ScheduleSpec::Explicit { values } => {
                if values.is_empty() {
                    return Err(Error::InvalidSpec("explicit schedule must not be empty".into()));
                }
                if let Some(t) = values.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
                    return Err(Error::InvalidSpec(format!(
                        "explicit schedule weight {t} outside (0,1)"
                    )));
                }
                if values.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::InvalidSpec("explicit schedule must be nondecreasing".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn len(&self) -> u64 {
        match self {
            ScheduleSpec::Harmonic { n_max } | ScheduleSpec::Geometric { n_max, .. } => *n_max,
            ScheduleSpec::Explicit { values } => values.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        let (harmonic, geometric, explicit) = match self {
            ScheduleSpec::Harmonic { n_max } => (Some(*n_max), None, None),
            ScheduleSpec::Geometric { rho, n_max } => (None, Some((*rho, *n_max)), None),
            ScheduleSpec::Explicit { values } => (None, None, Some(values)),
        };
        let h = harmonic
            .into_iter()
            .flat_map(|n_max| (2..=n_max + 1).map(|n| 1.0 - 1.0 / (n as f64)));
        let g = geometric
            .into_iter()
            .flat_map(|(rho, n_max)| (1..=n_max).map(move |n| 1.0 - rho.powi(n as i32)));
        let e = explicit.into_iter().flatten().copied();
        h.chain(g).chain(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Termination {
    Converged,
    ResidualFloor,
    MaxIter,
    Period2Obstruction,
    Diverged,
}

/// One recorded iterate. For the staged schemes the entry also carries the
/// stage weight and the residual of the *stage* map at the accepted iterate
/// (how well the inner solve did).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iterate: Point,
    /// `‖T(iterate) − iterate‖` against the original mapping.
    pub residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_iterations: Option<u64>,
}

/// Diagnostic bound data for the damped scheme: `r = max ‖Tx‖` over sampled
/// points, inflated because the true supremum over a continuous domain is
/// unavailable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RBound {
    pub r_hat: f64,
    pub inflation: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub candidate: Point,
    /// `‖T(candidate) − candidate‖`.
    pub residual: f64,
    pub outer_iterations: u64,
    pub inner_iterations_total: u64,
    pub termination: Termination,
    pub trace: Vec<TraceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_estimate: Option<RBound>,
}

#[derive(Debug, Clone)]
pub struct PicardOptions {
    /// Expected contraction factor from the classifier; diagnostic only.
    pub alpha_hint: f64,
    pub tol_fix: f64,
    pub max_iter: u64,
}

#[derive(Debug, Clone)]
pub struct DampedOptions {
    pub tol_fix: f64,
    pub inner_tol: f64,
    /// Per-stage inner iteration cap; `None` derives a budget from the stage
    /// contraction factor.
    pub max_inner: Option<u64>,
    /// Stage-1 start; defaults to the null vector.
    pub start: Option<Point>,
}

#[derive(Debug, Clone)]
pub struct AnchoredOptions {
    pub tol_fix: f64,
    pub inner_tol: f64,
    pub max_inner: Option<u64>,
    /// Stage-1 start; defaults to the anchor.
    pub start: Option<Point>,
}

#[derive(Debug, Clone)]
pub struct OrbitOptions {
    pub tol_fix: f64,
    pub max_iter: u64,
    /// How many trailing iterates to watch for returns.
    pub cluster_window: usize,
}

/// `‖Tx − x‖` — zero exactly at fixed points.
pub fn residual(spec: &MappingSpec, x: &Point, norm: &NormSpec, tol: &Tolerances) -> Result<f64> {
    let img = crate::mapping::evaluate(spec, x, norm, tol)?;
    Ok(norm.dist_slice(img.coords(), x.coords()))
}

fn check_iterate(x: &[f64], domain: &DomainSpec, norm: &NormSpec, tol: &Tolerances) -> Result<bool> {
    if x.iter().any(|c| !c.is_finite() || c.abs() > DIVERGENCE_CAP) {
        return Ok(false); // diverged
    }
    if !domain.contains_slice(x, norm, tol) {
        return Err(Error::DomainViolation(format!("iterate {x:?} left the domain")));
    }
    Ok(true)
}

fn stagnant(residuals: &[f64]) -> bool {
    if residuals.len() < 8 {
        return false;
    }
    let window = (residuals.len() / 4).max(4);
    let tail = &residuals[residuals.len() - window..];
    let r_max = tail.iter().fold(0.0_f64, |m, r| m.max(*r));
    let r_min = tail.iter().fold(f64::INFINITY, |m, r| m.min(*r));
    r_max > 0.0 && (r_max - r_min) / r_max < FLOOR_REL_CHANGE
}

/// Picard iteration `x_{k+1} = Tx_k`.
///
/// Stops when the step (equivalently, the residual at the current iterate)
/// drops to `tol_fix`; detects a period-2 obstruction when the displacement
/// `‖x_{k+2} − x_k‖` collapses while the step stays large *and* the
/// consecutive-triple perimeter has stalled; otherwise runs to `max_iter` and
/// diagnoses a residual floor when the trailing residuals are flat.
pub fn picard(
    spec: &MappingSpec,
    domain: &DomainSpec,
    norm: &NormSpec,
    tol: &Tolerances,
    x0: &Point,
    opts: &PicardOptions,
) -> Result<SolveResult> {
    if !(0.0..1.0).contains(&opts.alpha_hint) {
        return Err(Error::InvalidSpec(format!(
            "alpha_hint {} outside [0,1)",
            opts.alpha_hint
        )));
    }
    if !domain.contains(x0, norm, tol) {
        return Err(Error::DomainViolation(format!("start {x0:?} outside the domain")));
    }

    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut residuals: Vec<f64> = Vec::new();
    let mut best: Option<(f64, usize)> = None;

    let kernel = Kernel::compile(spec);
    let mut prev: Option<Vec<f64>> = None; // x_{k-1}
    let mut last_perimeter: Option<f64> = None;
    let mut x = x0.coords().to_vec();
    let mut fx = Vec::with_capacity(x.len());
    kernel.apply(&x, &mut fx, norm, tol)?;

    let finish = |termination: Termination,
                  best: Option<(f64, usize)>,
                  trace: Vec<TraceEntry>|
     -> SolveResult {
        let (residual, best_idx) = best.expect("at least one iterate was recorded");
        let candidate = trace[best_idx].iterate.clone();
        let outer = trace.len() as u64;
        SolveResult {
            candidate,
            residual,
            outer_iterations: outer,
            inner_iterations_total: 0,
            termination,
            trace,
            r_estimate: None,
        }
    };

    loop {
        let res = norm.dist_slice(&fx, &x);
        if !res.is_finite() {
            if best.is_none() {
                return Err(Error::DomainViolation(
                    "mapping produced a non-finite image at the start point".into(),
                ));
            }
            return Ok(finish(Termination::Diverged, best, trace));
        }
        trace.push(TraceEntry {
            iterate: Point(x.clone()),
            residual: res,
            weight: None,
            inner_residual: None,
            inner_iterations: None,
        });
        residuals.push(res);
        if best.is_none_or(|(b, _)| res < b) {
            best = Some((res, trace.len() - 1));
        }
        if res <= opts.tol_fix {
            return Ok(finish(Termination::Converged, best, trace));
        }
        if trace.len() as u64 >= opts.max_iter {
            let term = if stagnant(&residuals) {
                Termination::ResidualFloor
            } else {
                Termination::MaxIter
            };
            return Ok(finish(term, best, trace));
        }

        // advance: x_{k+1} = fx
        let x_next = fx.clone();
        if !check_iterate(&x_next, domain, norm, tol)? {
            return Ok(finish(Termination::Diverged, best, trace));
        }
        kernel.apply(&x_next, &mut fx, norm, tol)?;

        // period-2 test on (x_{k-1}, x_k, x_{k+1}) with x_{k+1} = x_next:
        // displacement collapsed, step still large, perimeter stalled
        if let Some(ref xm1) = prev {
            let p = perimeter_of(xm1, &x, &x_next, norm);
            if let Some(lp) = last_perimeter {
                let cycle = norm.dist_slice(&x_next, xm1) <= opts.tol_fix
                    && norm.dist_slice(&x, xm1) > opts.tol_fix;
                if cycle && p > tol.eps_distinct && p >= lp * (1.0 - STALL_MARGIN) {
                    return Ok(finish(Termination::Period2Obstruction, best, trace));
                }
            }
            last_perimeter = Some(p);
        }
        prev = Some(std::mem::replace(&mut x, x_next));
    }
}

/// The convex modification a staged scheme applies after the mapping: pure
/// damping `v ↦ w·v` or anchoring `v ↦ (1−w)·x₀ + w·v`. Kept as data rather
/// than distinct closure types so both schemes share one compiled hot loop.
enum StageMap<'a> {
    Damped,
    Anchored { anchor: &'a [f64] },
}

impl StageMap<'_> {
    #[inline]
    fn apply(&self, w: f64, v: &mut [f64]) {
        match self {
            StageMap::Damped => v.iter_mut().for_each(|c| *c *= w),
            StageMap::Anchored { anchor } => v
                .iter_mut()
                .zip(*anchor)
                .for_each(|(c, a)| *c = (1.0 - w) * a + w * *c),
        }
    }
}

/// One stage of a staged scheme: iterate `u ↦ stage(w, T(u))` until the step
/// drops to `inner_tol` or the budget runs out, then accept the pre-step
/// iterate. Acceptance reuses the already-computed `T(u)`, so the returned
/// residual against the original mapping and the stage-map residual cost no
/// extra applications. Returns `(applications, residual, stage_residual)`.
#[allow(clippy::too_many_arguments)]
fn stage_solve(
    kernel: &Kernel<'_>,
    norm: &NormSpec,
    tol: &Tolerances,
    stage: &StageMap<'_>,
    weight: f64,
    u: &mut Vec<f64>,
    buf: &mut Vec<f64>,
    tbuf: &mut Vec<f64>,
    inner_tol: f64,
    budget: u64,
) -> Result<(u64, f64, f64)> {
    let mut steps = 0;
    loop {
        kernel.apply(u, tbuf, norm, tol)?;
        buf.clear();
        buf.extend_from_slice(tbuf);
        stage.apply(weight, buf);
        steps += 1;
        let step = norm.dist_slice(buf, u);
        if step <= inner_tol || steps >= budget {
            let res = norm.dist_slice(tbuf, u);
            return Ok((steps, res, step));
        }
        std::mem::swap(u, buf);
    }
}

fn stage_budget(weight: f64, ln_inner_tol: f64, max_inner: Option<u64>) -> u64 {
    if let Some(m) = max_inner {
        return m;
    }
    if weight <= f64::EPSILON {
        return 8;
    }
    // geometric contraction at rate `weight` gives a predictable budget;
    // 1−w bounds −ln w from below, so this only rounds the budget up
    let needed = (-ln_inner_tol / (1.0 - weight)).ceil();
    let base = if needed.is_finite() && needed > 0.0 { needed as u64 } else { 1 };
    (10 * base).clamp(8, 1_000_000)
}

#[allow(clippy::too_many_arguments)]
fn staged_scheme(
    spec: &MappingSpec,
    domain: &DomainSpec,
    norm: &NormSpec,
    tol: &Tolerances,
    schedule: &ScheduleSpec,
    start: Vec<f64>,
    stage: StageMap<'_>,
    tol_fix: f64,
    inner_tol: f64,
    max_inner: Option<u64>,
    r_estimate: Option<RBound>,
) -> Result<SolveResult> {
    schedule.validate()?;
    let kernel = Kernel::compile(spec);
    let dim = start.len();
    let mut u = start;
    let mut buf = Vec::with_capacity(dim);
    let mut tbuf = Vec::with_capacity(dim);

    // the trace is recorded into flat arrays while iterating (a million
    // stages must not pay a per-stage allocation) and materialized below
    let hint = schedule.len().min(1 << 20) as usize;
    let mut coords: Vec<f64> = Vec::with_capacity(hint.saturating_mul(dim));
    let mut res_log: Vec<f64> = Vec::with_capacity(hint);
    let mut weight_log: Vec<f64> = Vec::with_capacity(hint);
    let mut inner_res_log: Vec<f64> = Vec::with_capacity(hint);
    let mut steps_log: Vec<u64> = Vec::with_capacity(hint);
    let mut best: Option<(f64, usize)> = None;
    let mut inner_total = 0u64;
    let mut terminated = None;
    let ln_inner_tol = inner_tol.ln();

    for w in schedule.weights() {
        let budget = stage_budget(w, ln_inner_tol, max_inner);
        let (steps, res, inner_res) = stage_solve(
            &kernel, norm, tol, &stage, w, &mut u, &mut buf, &mut tbuf, inner_tol, budget,
        )?;
        inner_total += steps;
        if !res.is_finite() || !check_iterate(&u, domain, norm, tol)? {
            terminated = Some(Termination::Diverged);
            break;
        }

        coords.extend_from_slice(&u);
        res_log.push(res);
        weight_log.push(w);
        inner_res_log.push(inner_res);
        steps_log.push(steps);
        if best.is_none_or(|(b, _)| res < b) {
            best = Some((res, res_log.len() - 1));
        }
        if res <= tol_fix {
            terminated = Some(Termination::Converged);
            break;
        }
    }

    let termination = terminated.unwrap_or_else(|| {
        if stagnant(&res_log) {
            Termination::ResidualFloor
        } else {
            Termination::MaxIter
        }
    });
    let (residual, best_idx) = match (best, termination) {
        (Some(found), _) => found,
        (None, Termination::Diverged) => {
            return Err(Error::DomainViolation(
                "iterates diverged before the first stage completed".into(),
            ))
        }
        (None, _) => return Err(Error::InvalidSpec("schedule produced no stages".into())),
    };
    let trace: Vec<TraceEntry> = (0..res_log.len())
        .map(|i| TraceEntry {
            iterate: Point(coords[i * dim..(i + 1) * dim].to_vec()),
            residual: res_log[i],
            weight: Some(weight_log[i]),
            inner_residual: Some(inner_res_log[i]),
            inner_iterations: Some(steps_log[i]),
        })
        .collect();
    let candidate = trace[best_idx].iterate.clone();
    Ok(SolveResult {
        candidate,
        residual,
        outer_iterations: trace.len() as u64,
        inner_iterations_total: inner_total,
        termination,
        trace,
        r_estimate,
    })
}

/// The damped scheme: for each schedule weight `t`, solve the perimeter
/// contraction `x ↦ t·Tx` (warm-started from the previous stage) and stop as
/// soon as the residual against `T` itself reaches `tol_fix`. The stage
/// residual obeys `‖Tx_n − x_n‖ ≤ r(1−t_n)` with `r` bounding `‖Tx‖` on the
/// domain; `sampler` feeds the recorded estimate of `r`.
pub fn damped(
    spec: &MappingSpec,
    domain: &DomainSpec,
    norm: &NormSpec,
    tol: &Tolerances,
    schedule: &ScheduleSpec,
    opts: &DampedOptions,
    sampler: Option<&SamplerConfig>,
) -> Result<SolveResult> {
    if !(domain.is_bounded() && domain.is_convex()) {
        return Err(Error::PreconditionViolation(
            "damped scheme requires a bounded convex domain".into(),
        ));
    }
    if !domain.contains_origin(norm, tol) {
        return Err(Error::PreconditionViolation(
            "damped scheme requires the domain to contain the null vector".into(),
        ));
    }
    let dim = domain.dim();
    let start = match &opts.start {
        Some(p) => {
            if !domain.contains(p, norm, tol) {
                return Err(Error::DomainViolation(format!("start {p:?} outside the domain")));
            }
            p.coords().to_vec()
        }
        None => vec![0.0; dim],
    };
    let r_estimate = match sampler {
        Some(cfg) => Some(estimate_r(spec, domain, norm, tol, cfg)?),
        None => None,
    };
    staged_scheme(
        spec,
        domain,
        norm,
        tol,
        schedule,
        start,
        StageMap::Damped,
        opts.tol_fix,
        opts.inner_tol,
        opts.max_inner,
        r_estimate,
    )
}

/// The anchored scheme: for each weight `s`, solve `x ↦ (1−s)x₀ + s·Tx`.
/// Every accepted stage iterate satisfies the rearrangement identity
/// `Tu − u = (1−s)(Tu − x₀) + ρ` where `ρ` is the stage map's residual at
/// `u` (recorded per stage as `inner_residual`).
pub fn anchored(
    spec: &MappingSpec,
    domain: &DomainSpec,
    norm: &NormSpec,
    tol: &Tolerances,
    anchor: &Point,
    schedule: &ScheduleSpec,
    opts: &AnchoredOptions,
) -> Result<SolveResult> {
    if !(domain.is_bounded() && domain.is_convex()) {
        return Err(Error::PreconditionViolation(
            "anchored scheme requires a bounded convex domain".into(),
        ));
    }
    if !domain.contains(anchor, norm, tol) {
        return Err(Error::PreconditionViolation(format!(
            "anchor {anchor:?} lies outside the domain"
        )));
    }
    let start = match &opts.start {
        Some(p) => {
            if !domain.contains(p, norm, tol) {
                return Err(Error::DomainViolation(format!("start {p:?} outside the domain")));
            }
            p.coords().to_vec()
        }
        None => anchor.coords().to_vec(),
    };
    staged_scheme(
        spec,
        domain,
        norm,
        tol,
        schedule,
        start,
        StageMap::Anchored { anchor: anchor.coords() },
        opts.tol_fix,
        opts.inner_tol,
        opts.max_inner,
        None,
    )
}

/// Orbit iteration with cluster-point watching: keep the trailing
/// `cluster_window` iterates, note returns (new iterate within `tol_fix`
/// of a previous one), and accept any iterate whose residual reaches
/// `tol_fix`. Without convergence the best-residual iterate is returned.
pub fn orbit(
    spec: &MappingSpec,
    domain: &DomainSpec,
    norm: &NormSpec,
    tol: &Tolerances,
    x0: &Point,
    opts: &OrbitOptions,
) -> Result<SolveResult> {
    if !domain.contains(x0, norm, tol) {
        return Err(Error::DomainViolation(format!("start {x0:?} outside the domain")));
    }
    let kernel = Kernel::compile(spec);
    let mut window: VecDeque<Vec<f64>> = VecDeque::with_capacity(opts.cluster_window.max(1));
    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut best: Option<(f64, usize)> = None;
    let mut x = x0.coords().to_vec();
    let mut fx = Vec::with_capacity(x.len());

    let mut termination = Termination::MaxIter;
    loop {
        kernel.apply(&x, &mut fx, norm, tol)?;
        let res = norm.dist_slice(&fx, &x);
        if !res.is_finite() {
            if best.is_none() {
                return Err(Error::DomainViolation(
                    "mapping produced a non-finite image at the start point".into(),
                ));
            }
            termination = Termination::Diverged;
            break;
        }
        trace.push(TraceEntry {
            iterate: Point(x.clone()),
            residual: res,
            weight: None,
            inner_residual: None,
            inner_iterations: None,
        });
        if best.is_none_or(|(b, _)| res < b) {
            best = Some((res, trace.len() - 1));
        }
        if res <= opts.tol_fix {
            termination = Termination::Converged;
            break;
        }
        if trace.len() as u64 >= opts.max_iter {
            break;
        }
        // a return into the trailing window marks a candidate cluster point;
        // its residual was just checked above, so a loose return needs no
        // action — but an exact revisit means the orbit is periodic and no
        // later iterate can bring anything new
        let min_return = window
            .iter()
            .map(|w| norm.dist_slice(&x, w))
            .fold(f64::INFINITY, f64::min);
        if min_return <= tol.eps_distinct {
            break;
        }
        if window.len() == opts.cluster_window.max(1) {
            window.pop_front();
        }
        window.push_back(x.clone());

        std::mem::swap(&mut x, &mut fx);
        if !check_iterate(&x, domain, norm, tol)? {
            termination = Termination::Diverged;
            break;
        }
    }
    let (residual, best_idx) = best.expect("at least one iterate recorded");
    let candidate = trace[best_idx].iterate.clone();
    Ok(SolveResult {
        candidate,
        residual,
        outer_iterations: trace.len() as u64,
        inner_iterations_total: 0,
        termination,
        trace,
        r_estimate: None,
    })
}

fn estimate_r(
    spec: &MappingSpec,
    domain: &DomainSpec,
    norm: &NormSpec,
    tol: &Tolerances,
    cfg: &SamplerConfig,
) -> Result<RBound> {
    let pts = sample_points(domain, cfg)?;
    let mut r = 0.0_f64;
    let mut buf = Vec::new();
    for p in &pts {
        spec.apply_into(p.coords(), &mut buf, norm, tol)?;
        r = r.max(norm.of_slice(&buf));
    }
    Ok(RBound { r_hat: 1.1 * r, inflation: 1.1, n_samples: pts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::mapping::{compose_scaled, SampleStrategy};
    use approx::assert_abs_diff_eq;

    fn p(coords: &[f64]) -> Point {
        Point::new(coords.to_vec()).unwrap()
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn schedule_weights() {
        let s = ScheduleSpec::Harmonic { n_max: 3 };
        let w: Vec<f64> = s.weights().collect();
        assert_eq!(w, vec![0.5, 1.0 - 1.0 / 3.0, 0.75]);
        let s = ScheduleSpec::Geometric { rho: 0.5, n_max: 3 };
        let w: Vec<f64> = s.weights().collect();
        assert_eq!(w, vec![0.5, 0.75, 0.875]);
        assert!(ScheduleSpec::Explicit { values: vec![0.5, 1.5] }.validate().is_err());
        assert!(ScheduleSpec::Explicit { values: vec![0.9, 0.5] }.validate().is_err());
        assert!(ScheduleSpec::Geometric { rho: 1.0, n_max: 2 }.validate().is_err());
    }

    #[test]
    fn picard_converges_on_scaled_reflection() {
        let t = tol();
        let nm = NormSpec::L1;
        let k = crate::mapping::tests::unit_box(3);
        let c = 0.9;
        let map = compose_scaled(&crate::mapping::tests::reflection_mapping(), c, &k, &nm, &t)
            .unwrap();
        let result = picard(
            &map,
            &k,
            &nm,
            &t,
            &p(&[0.0, 0.0]),
            &PicardOptions { alpha_hint: c, tol_fix: 1e-10, max_iter: 10_000 },
        )
        .unwrap();
        assert_eq!(result.termination, Termination::Converged);
        let fix = c / (1.0 + c);
        assert_abs_diff_eq!(result.candidate.coords()[0], fix, epsilon = 1e-10);
        assert_abs_diff_eq!(result.candidate.coords()[1], fix, epsilon = 1e-10);
        assert!(result.residual <= 1e-10);
    }

    #[test]
    fn picard_detects_period2_on_reflection() {
        let t = tol();
        let nm = NormSpec::L1;
        let k = crate::mapping::tests::unit_box(3);
        let map = crate::mapping::tests::reflection_mapping();
        let result = picard(
            &map,
            &k,
            &nm,
            &t,
            &p(&[0.0, 0.0]),
            &PicardOptions { alpha_hint: 0.0, tol_fix: 1e-10, max_iter: 10_000 },
        )
        .unwrap();
        assert_eq!(result.termination, Termination::Period2Obstruction);
        // the orbit alternates between the two corners
        assert_eq!(result.trace[0].iterate, p(&[0.0, 0.0]));
        assert_eq!(result.trace[1].iterate, p(&[1.0, 1.0]));
        assert_eq!(result.trace[2].iterate, p(&[0.0, 0.0]));
    }

    #[test]
    fn picard_translation_hits_residual_floor() {
        let t = tol();
        let nm = NormSpec::L1;
        let ray = crate::mapping::DomainSpec::RayUnion {
            base: vec![],
            direction: p(&[1.0]),
            alpha_min: 0.0,
            alpha_max: 16.0,
        };
        let map = MappingSpec::Translation { offset: p(&[1.0]) };
        let result = picard(
            &map,
            &ray,
            &nm,
            &t,
            &p(&[0.0]),
            &PicardOptions { alpha_hint: 0.0, tol_fix: 1e-8, max_iter: 2_000 },
        )
        .unwrap();
        assert_eq!(result.termination, Termination::ResidualFloor);
        assert!(result.trace.iter().all(|e| e.residual == 1.0));
    }

    #[test]
    fn picard_reports_divergence_on_an_expanding_ray_map() {
        let t = tol();
        let nm = NormSpec::L1;
        let ray = crate::mapping::DomainSpec::RayUnion {
            base: vec![],
            direction: p(&[1.0]),
            alpha_min: 0.0,
            alpha_max: 16.0,
        };
        let tripling = MappingSpec::Affine { matrix: vec![vec![3.0]], offset: p(&[0.0]) };
        let result = picard(
            &tripling,
            &ray,
            &nm,
            &t,
            &p(&[1.0]),
            &PicardOptions { alpha_hint: 0.0, tol_fix: 1e-8, max_iter: 1_000 },
        )
        .unwrap();
        assert_eq!(result.termination, Termination::Diverged);
        assert!(result.outer_iterations < 40);
    }

    #[test]
    fn damped_reflection_converges_to_center() {
        let t = tol();
        let nm = NormSpec::L1;
        let k = crate::mapping::tests::unit_box(5);
        let map = crate::mapping::tests::reflection_mapping();
        let result = damped(
            &map,
            &k,
            &nm,
            &t,
            &ScheduleSpec::Harmonic { n_max: 2_000_000 },
            &DampedOptions { tol_fix: 1e-4, inner_tol: 1e-8, max_inner: None, start: None },
            Some(&SamplerConfig { seed: 1, n_points: 25, strategy: SampleStrategy::Grid }),
        )
        .unwrap();
        assert_eq!(result.termination, Termination::Converged);
        assert_abs_diff_eq!(result.candidate.coords()[0], 0.5, epsilon = 1e-4);
        assert_abs_diff_eq!(result.candidate.coords()[1], 0.5, epsilon = 1e-4);
        // stage iterates track the closed form t/(1+t)
        for e in result.trace.iter().step_by(97) {
            let w = e.weight.unwrap();
            let fix = w / (1.0 + w);
            assert_abs_diff_eq!(e.iterate.coords()[0], fix, epsilon = 2.0 * 1e-8);
        }
        let r = result.r_estimate.as_ref().unwrap();
        assert_abs_diff_eq!(r.r_hat, 2.2, epsilon = 1e-12); // 1.1 · max‖Tx‖₁ = 1.1 · 2
    }

    #[test]
    fn damped_identity_converges_immediately() {
        let t = tol();
        let nm = NormSpec::L1;
        let k = crate::mapping::tests::unit_box(3);
        let ident = MappingSpec::Affine {
            matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            offset: p(&[0.0, 0.0]),
        };
        let result = damped(
            &ident,
            &k,
            &nm,
            &t,
            &ScheduleSpec::Harmonic { n_max: 100 },
            &DampedOptions {
                tol_fix: 1e-9,
                inner_tol: 1e-9,
                max_inner: None,
                start: Some(p(&[0.3, 0.7])),
            },
            None,
        )
        .unwrap();
        assert_eq!(result.termination, Termination::Converged);
        assert_eq!(result.outer_iterations, 1);
        assert_eq!(result.residual, 0.0);
        // the stage-1 iterate is a scaled copy of the start
        let u = result.candidate.coords();
        assert_abs_diff_eq!(u[1] / u[0], 0.7 / 0.3, epsilon = 1e-9);
    }

    #[test]
    fn damped_requires_origin() {
        let t = tol();
        let nm = NormSpec::L1;
        let shifted = crate::mapping::DomainSpec::Box {
            lower: p(&[1.0, 1.0]),
            upper: p(&[2.0, 2.0]),
            resolution: vec![2, 2],
        };
        let err = damped(
            &crate::mapping::tests::reflection_mapping(),
            &shifted,
            &nm,
            &t,
            &ScheduleSpec::Harmonic { n_max: 10 },
            &DampedOptions { tol_fix: 1e-6, inner_tol: 1e-8, max_inner: None, start: None },
            None,
        );
        assert!(matches!(err, Err(Error::PreconditionViolation(_))));
    }

    #[test]
    fn anchored_reflection_converges_and_satisfies_identity() {
        let t = tol();
        let nm = NormSpec::L1;
        let k = crate::mapping::tests::unit_box(5);
        let map = crate::mapping::tests::reflection_mapping();
        let anchor = p(&[0.0, 0.0]);
        let result = anchored(
            &map,
            &k,
            &nm,
            &t,
            &anchor,
            &ScheduleSpec::Harmonic { n_max: 2_000_000 },
            &AnchoredOptions { tol_fix: 1e-4, inner_tol: 1e-8, max_inner: None, start: None },
        )
        .unwrap();
        assert_eq!(result.termination, Termination::Converged);
        assert_abs_diff_eq!(result.candidate.coords()[0], 0.5, epsilon = 1e-4);
        // ‖Tu − u‖ = (1−s)‖Tu − x₀‖ up to the recorded stage residual
        for e in result.trace.iter().step_by(53) {
            let s = e.weight.unwrap();
            let tu = crate::mapping::evaluate(&map, &e.iterate, &nm, &t).unwrap();
            let lhs = nm.dist_slice(tu.coords(), e.iterate.coords());
            let rhs = (1.0 - s) * nm.dist_slice(tu.coords(), anchor.coords());
            assert!((lhs - rhs).abs() <= e.inner_residual.unwrap() + 1e-9 * rhs.max(1.0));
        }
    }

    #[test]
    fn anchored_on_fixed_anchor_converges_at_stage_one() {
        let t = tol();
        let nm = NormSpec::L1;
        let k = crate::mapping::tests::unit_box(5);
        let map = crate::mapping::tests::reflection_mapping();
        let center = p(&[0.5, 0.5]);
        let result = anchored(
            &map,
            &k,
            &nm,
            &t,
            &center,
            &ScheduleSpec::Harmonic { n_max: 100 },
            &AnchoredOptions { tol_fix: 1e-12, inner_tol: 1e-13, max_inner: None, start: None },
        )
        .unwrap();
        assert_eq!(result.termination, Termination::Converged);
        assert_eq!(result.outer_iterations, 1);
        assert_eq!(result.candidate, center);
    }

    #[test]
    fn orbit_translation_runs_out() {
        let t = tol();
        let nm = NormSpec::L1;
        let ray = crate::mapping::DomainSpec::RayUnion {
            base: vec![],
            direction: p(&[1.0]),
            alpha_min: 0.0,
            alpha_max: 16.0,
        };
        let map = MappingSpec::Translation { offset: p(&[1.0]) };
        let result = orbit(
            &map,
            &ray,
            &nm,
            &t,
            &p(&[0.0]),
            &OrbitOptions { tol_fix: 1e-8, max_iter: 500, cluster_window: 16 },
        )
        .unwrap();
        assert_eq!(result.termination, Termination::MaxIter);
        assert_eq!(result.residual, 1.0);
    }

    #[test]
    fn orbit_converges_on_near_isometry() {
        let t = tol();
        let nm = NormSpec::L1;
        let k = crate::mapping::tests::unit_box(3);
        let c = 0.999;
        let map = compose_scaled(&crate::mapping::tests::reflection_mapping(), c, &k, &nm, &t)
            .unwrap();
        let result = orbit(
            &map,
            &k,
            &nm,
            &t,
            &p(&[0.0, 0.0]),
            &OrbitOptions { tol_fix: 1e-9, max_iter: 100_000, cluster_window: 8 },
        )
        .unwrap();
        assert_eq!(result.termination, Termination::Converged);
        assert_abs_diff_eq!(result.candidate.coords()[0], c / (1.0 + c), epsilon = 1e-9);
    }

    #[test]
    fn warm_start_matches_cold_start_stage_limits() {
        // warm starting each stage from the previous stage iterate is an
        // efficiency choice; the stage limits must be the ones a cold solve
        // of the composed stage map finds
        let t = tol();
        let nm = NormSpec::L1;
        let k = crate::mapping::tests::unit_box(3);
        let map = crate::mapping::tests::reflection_mapping();
        let warm = damped(
            &map,
            &k,
            &nm,
            &t,
            &ScheduleSpec::Harmonic { n_max: 50 },
            &DampedOptions { tol_fix: 0.0, inner_tol: 1e-12, max_inner: None, start: None },
            None,
        )
        .unwrap();
        assert_eq!(warm.trace.len(), 50);
        for idx in [4usize, 24, 49] {
            let e = &warm.trace[idx];
            let w = e.weight.unwrap();
            let stage_map = compose_scaled(&map, w, &k, &nm, &t).unwrap();
            let cold = picard(
                &stage_map,
                &k,
                &nm,
                &t,
                &Point::zero(2),
                &PicardOptions { alpha_hint: w, tol_fix: 1e-12, max_iter: 100_000 },
            )
            .unwrap();
            assert_eq!(cold.termination, Termination::Converged);
            let gap = nm.dist_slice(cold.candidate.coords(), e.iterate.coords());
            assert!(gap <= 1e-10, "stage t={w}: warm and cold limits differ by {gap}");
        }
    }

    #[test]
    fn orbit_stops_early_on_an_exactly_periodic_orbit() {
        let t = tol();
        let nm = NormSpec::L1;
        let k = crate::mapping::tests::unit_box(3);
        let refl = crate::mapping::tests::reflection_mapping();
        let result = orbit(
            &refl,
            &k,
            &nm,
            &t,
            &p(&[0.0, 0.0]),
            &OrbitOptions { tol_fix: 1e-10, max_iter: 10_000, cluster_window: 8 },
        )
        .unwrap();
        assert_eq!(result.termination, Termination::MaxIter);
        assert_eq!(result.outer_iterations, 3); // the 2-cycle is revisited exactly
        assert_eq!(result.residual, 2.0);
    }

    #[test]
    fn orbit_fixed_start_converges_immediately() {
        // rotation about the origin keeps the origin fixed, so the orbit
        // never leaves it
        let t = tol();
        let nm = NormSpec::L2;
        let k = crate::mapping::DomainSpec::Box {
            lower: p(&[-1.0, -1.0]),
            upper: p(&[1.0, 1.0]),
            resolution: vec![3, 3],
        };
        let (c, s) = (1.0_f64.cos(), 1.0_f64.sin());
        let rotation = MappingSpec::Affine {
            matrix: vec![vec![c, -s], vec![s, c]],
            offset: p(&[0.0, 0.0]),
        };
        let result = orbit(
            &rotation,
            &k,
            &nm,
            &t,
            &p(&[0.0, 0.0]),
            &OrbitOptions { tol_fix: 1e-12, max_iter: 100, cluster_window: 8 },
        )
        .unwrap();
        assert_eq!(result.termination, Termination::Converged);
        assert_eq!(result.outer_iterations, 1);
        assert_eq!(result.candidate, p(&[0.0, 0.0]));
    }

    #[test]
    fn residual_values() {
        let t = tol();
        let nm = NormSpec::L1;
        let refl = crate::mapping::tests::reflection_mapping();
        assert_eq!(residual(&refl, &p(&[0.5, 0.5]), &nm, &t).unwrap(), 0.0);
        let shift = MappingSpec::Translation { offset: p(&[1.0]) };
        assert_eq!(residual(&shift, &p(&[3.0]), &nm, &t).unwrap(), 1.0);
        let ray_map = crate::mapping::tests::ray_example_mapping();
        assert_eq!(residual(&ray_map, &p(&[1.0, 0.0]), &nm, &t).unwrap(), 1.0);
    }

    #[test]
    fn trace_residuals_recompute() {
        let t = tol();
        let nm = NormSpec::L1;
        let k = crate::mapping::tests::unit_box(3);
        let map = compose_scaled(&crate::mapping::tests::reflection_mapping(), 0.5, &k, &nm, &t)
            .unwrap();
        let result = picard(
            &map,
            &k,
            &nm,
            &t,
            &p(&[0.1, 0.9]),
            &PicardOptions { alpha_hint: 0.5, tol_fix: 1e-12, max_iter: 200 },
        )
        .unwrap();
        for e in &result.trace {
            let r = residual(&map, &e.iterate, &nm, &t).unwrap();
            assert_abs_diff_eq!(r, e.residual, epsilon = 1e-9 * r.max(1.0));
        }
    }
}
