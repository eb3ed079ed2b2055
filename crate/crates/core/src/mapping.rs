//! Declarative self-maps, the domains they act on, and deterministic samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{NormSpec, Point, Tolerances};

/// Name of the pseudo-random generator behind every sampler; recorded in
/// reports so runs can be reproduced.
pub const GENERATOR: &str = "chacha8";

/// Hard cap on materialized grid lattices.
const MAX_LATTICE: usize = 1 << 22;

/// A declarative self-map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MappingSpec {
    /// `x ↦ A·x + b`.
    Affine { matrix: Vec<Vec<f64>>, offset: Point },
    /// `x ↦ x + b`.
    Translation { offset: Point },
    /// `x ↦ c·inner(x)` with `c ∈ [0,1]` — the damped stage map.
    Scaled { factor: f64, inner: Box<MappingSpec> },
    /// `x ↦ (1−s)·x₀ + s·inner(x)` with `s ∈ [0,1]` — the anchored stage map.
    Anchored { anchor: Point, weight: f64, inner: Box<MappingSpec> },
    /// Finite lookup table; inputs must be pairwise distinct.
    Tabulated { pairs: Vec<(Point, Point)> },
    /// First region containing the argument wins; regions are checked in
    /// declaration order.
    Piecewise { pieces: Vec<Piece> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub region: DomainSpec,
    pub map: MappingSpec,
}

/// The set a mapping acts on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Finite { points: Vec<Point> },
    /// Axis-aligned box with a per-axis lattice resolution (points per axis,
    /// endpoints included).
    Box { lower: Point, upper: Point, resolution: Vec<usize> },
    /// `base ∪ {α·direction : α ≥ alpha_min}`. Membership is unbounded above;
    /// `alpha_max` only truncates sampling.
    RayUnion { base: Vec<Point>, direction: Point, alpha_min: f64, alpha_max: f64 },
}

impl DomainSpec {
    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Finite { points } => points.first().map_or(0, Point::dim),
            DomainSpec::Box { lower, .. } => lower.dim(),
            DomainSpec::RayUnion { direction, .. } => direction.dim(),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            DomainSpec::Finite { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidSpec("finite domain must contain points".into()));
                }
                if points.iter().any(|p| p.dim() != dim) {
                    return Err(Error::InvalidSpec("finite domain point dimension mismatch".into()));
                }
            }
            DomainSpec::Box { lower, upper, resolution } => {
                if lower.dim() != dim || upper.dim() != dim {
                    return Err(Error::InvalidSpec("box corner dimension mismatch".into()));
                }
                if lower.coords().iter().zip(upper.coords()).any(|(l, u)| l > u) {
                    return Err(Error::InvalidSpec("box requires lower <= upper coordinatewise".into()));
                }
                if resolution.len() != dim {
                    return Err(Error::InvalidSpec("box resolution must list one entry per axis".into()));
                }
                if resolution.iter().any(|r| *r < 2) {
                    return Err(Error::InvalidSpec("box resolution must be >= 2 per axis".into()));
                }
                let size = resolution.iter().try_fold(1usize, |acc, r| acc.checked_mul(*r));
                if size.is_none_or(|s| s > MAX_LATTICE) {
                    return Err(Error::InvalidSpec(format!(
                        "box lattice exceeds the {MAX_LATTICE}-point cap"
                    )));
                }
            }
            DomainSpec::RayUnion { base, direction, alpha_min, alpha_max } => {
                if direction.dim() != dim {
                    return Err(Error::InvalidSpec("ray direction dimension mismatch".into()));
                }
                if direction.coords().iter().all(|c| c.abs() <= 1e-300) {
                    return Err(Error::InvalidSpec("ray direction must be nonzero".into()));
                }
                if base.iter().any(|p| p.dim() != dim) {
                    return Err(Error::InvalidSpec("ray base point dimension mismatch".into()));
                }
                if !alpha_min.is_finite() || !alpha_max.is_finite() || alpha_max <= alpha_min {
                    return Err(Error::InvalidSpec(format!(
                        "ray truncation alpha_max = {alpha_max} must exceed alpha_min = {alpha_min}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Membership test. Finite members are matched exactly (up to `tau_zero`);
    /// continuous domains allow `tau_abs` of slack so solver iterates that
    /// drift by rounding are not rejected.
    pub fn contains(&self, p: &Point, norm: &NormSpec, tol: &Tolerances) -> bool {
        self.contains_slice(p.coords(), norm, tol)
    }

    pub(crate) fn contains_slice(&self, x: &[f64], norm: &NormSpec, tol: &Tolerances) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            DomainSpec::Finite { points } => {
                points.iter().any(|q| norm.dist_slice(x, q.coords()) <= tol.tau_zero)
            }
            DomainSpec::Box { lower, upper, .. } => x
                .iter()
                .zip(lower.coords().iter().zip(upper.coords()))
                .all(|(c, (l, u))| *c >= l - tol.tau_abs && *c <= u + tol.tau_abs),
            DomainSpec::RayUnion { base, direction, alpha_min, .. } => {
                if base.iter().any(|q| norm.dist_slice(x, q.coords()) <= tol.tau_abs) {
                    return true;
                }
                // project onto the ray (Euclidean), clamp below at alpha_min,
                // and accept if the projection residual is within tau_abs
                let dir = direction.coords();
                let dd: f64 = dir.iter().map(|c| c * c).sum();
                let alpha = x.iter().zip(dir).map(|(c, d)| c * d).sum::<f64>() / dd;
                let alpha = alpha.max(*alpha_min);
                let residual = match norm {
                    NormSpec::L1 => {
                        x.iter().zip(dir).map(|(c, d)| (c - alpha * d).abs()).sum()
                    }
                    NormSpec::L2 => x
                        .iter()
                        .zip(dir)
                        .map(|(c, d)| (c - alpha * d) * (c - alpha * d))
                        .sum::<f64>()
                        .sqrt(),
                    NormSpec::Linf => x
                        .iter()
                        .zip(dir)
                        .fold(0.0_f64, |m, (c, d)| m.max((c - alpha * d).abs())),
                    NormSpec::WeightedP { .. } => {
                        let proj: Vec<f64> = dir.iter().map(|d| alpha * d).collect();
                        norm.dist_slice(x, &proj)
                    }
                };
                residual <= tol.tau_abs
            }
        }
    }

    /// Whether the domain is convex (within the representable family).
    pub fn is_convex(&self) -> bool {
        match self {
            DomainSpec::Finite { points } => points.len() <= 1,
            DomainSpec::Box { .. } => true,
            DomainSpec::RayUnion { base, .. } => base.is_empty(),
        }
    }

    /// Whether the domain contains the null vector.
    pub fn contains_origin(&self, norm: &NormSpec, tol: &Tolerances) -> bool {
        self.contains(&Point::zero(self.dim()), norm, tol)
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, DomainSpec::RayUnion { .. })
    }
}

/// Deterministic sampling of a domain. Identical `(seed, strategy, n_points,
/// domain)` always produce the identical point sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub seed: u64,
    pub n_points: usize,
    pub strategy: SampleStrategy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStrategy {
    Grid,
    UniformRandom,
    Hybrid,
}

impl MappingSpec {
    pub fn validate(&self, dim: usize, norm: &NormSpec, tol: &Tolerances) -> Result<()> {
        match self {
            MappingSpec::Affine { matrix, offset } => {
                if matrix.len() != dim || matrix.iter().any(|row| row.len() != dim) {
                    return Err(Error::InvalidSpec(format!("affine matrix must be {dim}x{dim}")));
                }
                if matrix.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidSpec("affine matrix entries must be finite".into()));
                }
                if offset.dim() != dim {
                    return Err(Error::InvalidSpec("affine offset dimension mismatch".into()));
                }
            }
            MappingSpec::Translation { offset } => {
                if offset.dim() != dim {
                    return Err(Error::InvalidSpec("translation offset dimension mismatch".into()));
                }
            }
            MappingSpec::Scaled { factor, inner } => {
                if !(0.0..=1.0).contains(factor) {
                    return Err(Error::InvalidSpec(format!("scaled factor {factor} outside [0,1]")));
                }
                inner.validate(dim, norm, tol)?;
            }
            MappingSpec::Anchored { anchor, weight, inner } => {
                if !(0.0..=1.0).contains(weight) {
                    return Err(Error::InvalidSpec(format!("anchored weight {weight} outside [0,1]")));
                }
                if anchor.dim() != dim {
                    return Err(Error::InvalidSpec("anchor dimension mismatch".into()));
                }
                inner.validate(dim, norm, tol)?;
            }
            MappingSpec::Tabulated { pairs } => {
                if pairs.is_empty() {
                    return Err(Error::InvalidSpec("tabulated mapping must have pairs".into()));
                }
                for (input, output) in pairs {
                    if input.dim() != dim || output.dim() != dim {
                        return Err(Error::InvalidSpec("tabulated pair dimension mismatch".into()));
                    }
                }
                for i in 0..pairs.len() {
                    for j in i + 1..pairs.len() {
                        let gap = norm.dist_slice(pairs[i].0.coords(), pairs[j].0.coords());
                        if gap <= tol.eps_distinct {
                            return Err(Error::InvalidSpec(format!(
                                "tabulated inputs {i} and {j} coincide (gap {gap:e})"
                            )));
                        }
                    }
                }
            }
            MappingSpec::Piecewise { pieces } => {
                if pieces.is_empty() {
                    return Err(Error::InvalidSpec("piecewise mapping must have pieces".into()));
                }
                for piece in pieces {
                    piece.region.validate(dim)?;
                    piece.map.validate(dim, norm, tol)?;
                }
            }
        }
        Ok(())
    }

    /// Apply the map to a raw coordinate slice, writing into `out`.
    /// Allocation-free for the affine family; this is the solver hot path.
    pub(crate) fn apply_into(
        &self,
        x: &[f64],
        out: &mut Vec<f64>,
        norm: &NormSpec,
        tol: &Tolerances,
    ) -> Result<()> {
        match self {
            MappingSpec::Affine { matrix, offset } => {
                out.clear();
                for (row, b) in matrix.iter().zip(offset.coords()) {
                    let acc: f64 = row.iter().zip(x).map(|(a, c)| a * c).sum();
                    out.push(acc + b);
                }
            }
            MappingSpec::Translation { offset } => {
                out.clear();
                out.extend(x.iter().zip(offset.coords()).map(|(c, b)| c + b));
            }
            MappingSpec::Scaled { factor, inner } => {
                inner.apply_into(x, out, norm, tol)?;
                for c in out.iter_mut() {
                    *c *= factor;
                }
            }
            MappingSpec::Anchored { anchor, weight, inner } => {
                inner.apply_into(x, out, norm, tol)?;
                let s = *weight;
                for (c, a) in out.iter_mut().zip(anchor.coords()) {
                    *c = (1.0 - s) * a + s * *c;
                }
            }
            MappingSpec::Tabulated { pairs } => {
                let hit = pairs
                    .iter()
                    .find(|(input, _)| norm.dist_slice(input.coords(), x) <= tol.tau_zero);
                match hit {
                    Some((_, output)) => {
                        out.clear();
                        out.extend_from_slice(output.coords());
                    }
                    None => {
                        return Err(Error::DomainViolation(format!(
                            "tabulated mapping has no entry for {x:?}"
                        )))
                    }
                }
            }
            MappingSpec::Piecewise { pieces } => {
                let piece = pieces.iter().find(|p| p.region.contains_slice(x, norm, tol));
                match piece {
                    Some(p) => p.map.apply_into(x, out, norm, tol)?,
                    None => {
                        return Err(Error::DomainViolation(format!(
                            "no piecewise region matches {x:?}"
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}

/// Flattened evaluator for the mapping shapes that dominate iteration hot
/// loops. The affine matrix is stored row-major in one allocation, so a
/// 2×2 application is a handful of fused multiply-adds instead of a pointer
/// chase through `Vec<Vec<f64>>`. Table and piecewise mappings fall back to
/// the declarative interpreter.
pub(crate) enum Kernel<'a> {
    Affine { dim: usize, matrix: Vec<f64>, offset: &'a [f64] },
    Translation { offset: &'a [f64] },
    Scaled { factor: f64, inner: Box<Kernel<'a>> },
    Anchored { anchor: &'a [f64], weight: f64, inner: Box<Kernel<'a>> },
    Interpreted(&'a MappingSpec),
}

impl<'a> Kernel<'a> {
    pub(crate) fn compile(spec: &'a MappingSpec) -> Kernel<'a> {
        match spec {
            MappingSpec::Affine { matrix, offset } => Kernel::Affine {
                dim: matrix.len(),
                matrix: matrix.iter().flatten().copied().collect(),
                offset: offset.coords(),
            },
            MappingSpec::Translation { offset } => Kernel::Translation { offset: offset.coords() },
            MappingSpec::Scaled { factor, inner } => Kernel::Scaled {
                factor: *factor,
                inner: Box::new(Kernel::compile(inner)),
            },
            MappingSpec::Anchored { anchor, weight, inner } => Kernel::Anchored {
                anchor: anchor.coords(),
                weight: *weight,
                inner: Box::new(Kernel::compile(inner)),
            },
            other => Kernel::Interpreted(other),
        }
    }

    pub(crate) fn apply(
        &self,
        x: &[f64],
        out: &mut Vec<f64>,
        norm: &NormSpec,
        tol: &Tolerances,
    ) -> Result<()> {
        match self {
            Kernel::Affine { dim, matrix, offset } => {
                // same summation order as the interpreter, so both paths are
                // bit-identical
                out.clear();
                for i in 0..*dim {
                    let row = &matrix[i * dim..(i + 1) * dim];
                    let acc: f64 = row.iter().zip(x).map(|(a, c)| a * c).sum();
                    out.push(acc + offset[i]);
                }
                Ok(())
            }
            Kernel::Translation { offset } => {
                out.clear();
                out.extend(x.iter().zip(*offset).map(|(c, b)| c + b));
                Ok(())
            }
            Kernel::Scaled { factor, inner } => {
                inner.apply(x, out, norm, tol)?;
                out.iter_mut().for_each(|c| *c *= factor);
                Ok(())
            }
            Kernel::Anchored { anchor, weight, inner } => {
                inner.apply(x, out, norm, tol)?;
                let s = *weight;
                out.iter_mut()
                    .zip(*anchor)
                    .for_each(|(c, a)| *c = (1.0 - s) * a + s * *c);
                Ok(())
            }
            Kernel::Interpreted(spec) => spec.apply_into(x, out, norm, tol),
        }
    }
}

/// Apply `T` to a point. Pure: repeated evaluation at the same input yields
/// bit-identical output.
pub fn evaluate(spec: &MappingSpec, x: &Point, norm: &NormSpec, tol: &Tolerances) -> Result<Point> {
    let mut out = Vec::with_capacity(x.dim());
    spec.apply_into(x.coords(), &mut out, norm, tol)?;
    if out.iter().any(|c| !c.is_finite()) {
        return Err(Error::DomainViolation(format!("mapping produced non-finite image of {x:?}")));
    }
    Ok(Point(out))
}

/// Build the damped stage map `x ↦ c·Tx`. The domain must be convex and
/// contain the null vector so the result is again a self-map.
pub fn compose_scaled(
    spec: &MappingSpec,
    factor: f64,
    domain: &DomainSpec,
    norm: &NormSpec,
    tol: &Tolerances,
) -> Result<MappingSpec> {
    if !(0.0..=1.0).contains(&factor) {
        return Err(Error::InvalidSpec(format!("scaled factor {factor} outside [0,1]")));
    }
    if !domain.is_convex() {
        return Err(Error::PreconditionViolation(
            "scaled composition requires a convex domain".into(),
        ));
    }
    if !domain.contains_origin(norm, tol) {
        return Err(Error::PreconditionViolation(
            "scaled composition requires the domain to contain the null vector".into(),
        ));
    }
    Ok(MappingSpec::Scaled { factor, inner: Box::new(spec.clone()) })
}

/// Build the anchored stage map `x ↦ (1−s)·x₀ + s·Tx`. Requires a convex
/// domain containing the anchor, but not the null vector.
pub fn compose_anchored(
    spec: &MappingSpec,
    anchor: &Point,
    weight: f64,
    domain: &DomainSpec,
    norm: &NormSpec,
    tol: &Tolerances,
) -> Result<MappingSpec> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::InvalidSpec(format!("anchored weight {weight} outside [0,1]")));
    }
    if !domain.is_convex() {
        return Err(Error::PreconditionViolation(
            "anchored composition requires a convex domain".into(),
        ));
    }
    if !domain.contains(anchor, norm, tol) {
        return Err(Error::PreconditionViolation(format!(
            "anchor {anchor:?} lies outside the domain"
        )));
    }
    Ok(MappingSpec::Anchored {
        anchor: anchor.clone(),
        weight,
        inner: Box::new(spec.clone()),
    })
}

/// Draw `cfg.n_points` points from the domain.
///
/// Grid strategy:
/// * finite domains emit the stored points in declaration order (error if more
///   points are requested than exist);
/// * boxes emit the row-major lattice given by the per-axis resolution,
///   truncated to `n_points` (error if more are requested);
/// * ray unions emit the base points followed by an evenly spaced α-lattice
///   from `alpha_min` to `alpha_max`; the lattice step is derived from
///   `n_points − |base|`.
///
/// Random strategy draws from a `chacha8` stream seeded with `cfg.seed`;
/// hybrid emits the grid first and fills up with random draws.
pub fn sample_points(domain: &DomainSpec, cfg: &SamplerConfig) -> Result<Vec<Point>> {
    if cfg.n_points == 0 {
        return Err(Error::InvalidSpec("sampler requires n_points >= 1".into()));
    }
    match cfg.strategy {
        SampleStrategy::Grid => grid_points(domain, cfg.n_points),
        SampleStrategy::UniformRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            random_points(domain, cfg.n_points, &mut rng)
        }
        SampleStrategy::Hybrid => {
            let k_grid = cfg.n_points.div_ceil(2);
            let mut pts = grid_points(domain, k_grid.min(grid_capacity(domain, k_grid)))?;
            pts.truncate(cfg.n_points);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            if pts.len() < cfg.n_points {
                pts.extend(random_points(domain, cfg.n_points - pts.len(), &mut rng)?);
            }
            Ok(pts)
        }
    }
}

fn grid_capacity(domain: &DomainSpec, requested: usize) -> usize {
    match domain {
        DomainSpec::Finite { points } => points.len().min(requested),
        DomainSpec::Box { resolution, .. } => resolution.iter().product::<usize>().min(requested),
        DomainSpec::RayUnion { .. } => requested,
    }
}

fn grid_points(domain: &DomainSpec, n_points: usize) -> Result<Vec<Point>> {
    match domain {
        DomainSpec::Finite { points } => {
            if n_points > points.len() {
                return Err(Error::InvalidSpec(format!(
                    "grid sampling cannot draw {n_points} points from a {}-point domain",
                    points.len()
                )));
            }
            Ok(points[..n_points].to_vec())
        }
        DomainSpec::Box { lower, upper, resolution } => {
            let size: usize = resolution.iter().product();
            if n_points > size {
                return Err(Error::InvalidSpec(format!(
                    "grid sampling cannot draw {n_points} points from a {size}-point lattice"
                )));
            }
            let dim = lower.dim();
            let mut pts = Vec::with_capacity(n_points);
            let mut idx = vec![0usize; dim];
            'outer: loop {
                let coords: Vec<f64> = (0..dim)
                    .map(|a| {
                        let steps = (resolution[a] - 1) as f64;
                        let l = lower.coords()[a];
                        let u = upper.coords()[a];
                        l + (u - l) * (idx[a] as f64) / steps
                    })
                    .collect();
                pts.push(Point(coords));
                if pts.len() == n_points {
                    break;
                }
                // row-major odometer: last axis fastest
                for a in (0..dim).rev() {
                    idx[a] += 1;
                    if idx[a] < resolution[a] {
                        continue 'outer;
                    }
                    idx[a] = 0;
                }
                break;
            }
            Ok(pts)
        }
        DomainSpec::RayUnion { base, direction, alpha_min, alpha_max } => {
            if n_points <= base.len() {
                return Err(Error::InvalidSpec(format!(
                    "grid sampling of a ray union needs n_points > {} base points",
                    base.len()
                )));
            }
            let n_ray = n_points - base.len();
            let mut pts = base.clone();
            for k in 0..n_ray {
                let alpha = if n_ray == 1 {
                    *alpha_min
                } else {
                    alpha_min + (alpha_max - alpha_min) * (k as f64) / ((n_ray - 1) as f64)
                };
                pts.push(Point(direction.coords().iter().map(|d| alpha * d).collect()));
            }
            Ok(pts)
        }
    }
}

fn random_points(domain: &DomainSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Point>> {
    let mut pts = Vec::with_capacity(n);
    match domain {
        DomainSpec::Finite { points } => {
            if n > points.len() {
                return Err(Error::InvalidSpec(format!(
                    "random sampling without replacement cannot draw {n} of {} points",
                    points.len()
                )));
            }
            let mut order: Vec<usize> = (0..points.len()).collect();
            // Fisher-Yates on the index vector
            for i in (1..order.len()).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            pts.extend(order[..n].iter().map(|&i| points[i].clone()));
        }
        DomainSpec::Box { lower, upper, .. } => {
            for _ in 0..n {
                let coords: Vec<f64> = lower
                    .coords()
                    .iter()
                    .zip(upper.coords())
                    .map(|(l, u)| l + (u - l) * rng.gen::<f64>())
                    .collect();
                pts.push(Point(coords));
            }
        }
        DomainSpec::RayUnion { base, direction, alpha_min, alpha_max } => {
            // base points are semantically privileged: emit them all first
            pts.extend(base.iter().take(n).cloned());
            while pts.len() < n {
                let alpha = alpha_min + (alpha_max - alpha_min) * rng.gen::<f64>();
                pts.push(Point(direction.coords().iter().map(|d| alpha * d).collect()));
            }
        }
    }
    Ok(pts)
}

/// Drop points that coincide (gap at or below `eps_distinct`) with an earlier
/// point, preserving the canonical order.
pub fn dedupe_points(points: &[Point], norm: &NormSpec, tol: &Tolerances) -> Vec<Point> {
    let mut kept: Vec<Point> = Vec::with_capacity(points.len());
    for p in points {
        if kept
            .iter()
            .all(|q| norm.dist_slice(p.coords(), q.coords()) > tol.eps_distinct)
        {
            kept.push(p.clone());
        }
    }
    kept
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn p(coords: &[f64]) -> Point {
        Point::new(coords.to_vec()).unwrap()
    }

    /// The ray-union reference mapping: identity on
    /// `{(0,0)} ∪ {α(1,1): α ≥ 1}`, constant `(1,1)` on `{(1,0),(0,1)}`.
    pub(crate) fn ray_example_mapping() -> MappingSpec {
        MappingSpec::Piecewise {
            pieces: vec![
                Piece {
                    region: DomainSpec::RayUnion {
                        base: vec![p(&[0.0, 0.0])],
                        direction: p(&[1.0, 1.0]),
                        alpha_min: 1.0,
                        alpha_max: 4.0,
                    },
                    map: MappingSpec::Affine {
                        matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                        offset: p(&[0.0, 0.0]),
                    },
                },
                Piece {
                    region: DomainSpec::Finite { points: vec![p(&[1.0, 0.0]), p(&[0.0, 1.0])] },
                    map: MappingSpec::Affine {
                        matrix: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
                        offset: p(&[1.0, 1.0]),
                    },
                },
            ],
        }
    }

    /// The reflection `(x,y) ↦ (1−x, 1−y)` on the unit square.
    pub(crate) fn reflection_mapping() -> MappingSpec {
        MappingSpec::Affine {
            matrix: vec![vec![-1.0, 0.0], vec![0.0, -1.0]],
            offset: p(&[1.0, 1.0]),
        }
    }

    pub(crate) fn unit_box(resolution: usize) -> DomainSpec {
        DomainSpec::Box {
            lower: p(&[0.0, 0.0]),
            upper: p(&[1.0, 1.0]),
            resolution: vec![resolution, resolution],
        }
    }

    #[test]
    fn evaluate_reference_mappings() {
        let t = tol();
        let nm = NormSpec::L1;
        let ray_map = ray_example_mapping();
        let img = evaluate(&ray_map, &p(&[1.0, 0.0]), &nm, &t).unwrap();
        assert_eq!(img, p(&[1.0, 1.0]));
        let img = evaluate(&ray_map, &p(&[2.0, 2.0]), &nm, &t).unwrap();
        assert_eq!(img, p(&[2.0, 2.0]));

        let refl = reflection_mapping();
        let img = evaluate(&refl, &p(&[0.5, 0.5]), &nm, &t).unwrap();
        assert_eq!(img, p(&[0.5, 0.5]));

        let shift = MappingSpec::Translation { offset: p(&[1.0]) };
        let img = evaluate(&shift, &p(&[0.0]), &nm, &t).unwrap();
        assert_eq!(img, p(&[1.0]));
    }

    #[test]
    fn tabulated_miss_is_domain_violation() {
        let t = tol();
        let nm = NormSpec::L1;
        let map = MappingSpec::Tabulated { pairs: vec![(p(&[0.0]), p(&[1.0]))] };
        assert!(matches!(
            evaluate(&map, &p(&[0.5]), &nm, &t),
            Err(Error::DomainViolation(_))
        ));
    }

    #[test]
    fn tabulated_rejects_coincident_inputs() {
        let t = tol();
        let nm = NormSpec::L1;
        let map = MappingSpec::Tabulated {
            pairs: vec![(p(&[0.0]), p(&[1.0])), (p(&[1e-13]), p(&[2.0]))],
        };
        assert!(map.validate(1, &nm, &t).is_err());
    }

    #[test]
    fn piecewise_first_region_wins() {
        let t = tol();
        let nm = NormSpec::L1;
        let map = MappingSpec::Piecewise {
            pieces: vec![
                Piece {
                    region: DomainSpec::Finite { points: vec![p(&[0.0])] },
                    map: MappingSpec::Translation { offset: p(&[1.0]) },
                },
                Piece {
                    region: DomainSpec::Finite { points: vec![p(&[0.0]), p(&[1.0])] },
                    map: MappingSpec::Translation { offset: p(&[2.0]) },
                },
            ],
        };
        assert_eq!(evaluate(&map, &p(&[0.0]), &nm, &t).unwrap(), p(&[1.0]));
        assert_eq!(evaluate(&map, &p(&[1.0]), &nm, &t).unwrap(), p(&[3.0]));
    }

    #[test]
    fn compose_scaled_endpoints() {
        let t = tol();
        let nm = NormSpec::L1;
        let k = unit_box(3);
        let refl = reflection_mapping();
        let zero = compose_scaled(&refl, 0.0, &k, &nm, &t).unwrap();
        assert_eq!(evaluate(&zero, &p(&[0.3, 0.8]), &nm, &t).unwrap(), p(&[0.0, 0.0]));
        let full = compose_scaled(&refl, 1.0, &k, &nm, &t).unwrap();
        let x = p(&[0.3, 0.8]);
        assert_eq!(
            evaluate(&full, &x, &nm, &t).unwrap(),
            evaluate(&refl, &x, &nm, &t).unwrap()
        );
    }

    #[test]
    fn compose_scaled_rejects_bad_domains() {
        let t = tol();
        let nm = NormSpec::L1;
        let refl = reflection_mapping();
        let finite = DomainSpec::Finite { points: vec![p(&[0.0, 0.0]), p(&[1.0, 1.0])] };
        assert!(matches!(
            compose_scaled(&refl, 0.5, &finite, &nm, &t),
            Err(Error::PreconditionViolation(_))
        ));
        let shifted = DomainSpec::Box {
            lower: p(&[1.0, 1.0]),
            upper: p(&[2.0, 2.0]),
            resolution: vec![2, 2],
        };
        assert!(matches!(
            compose_scaled(&refl, 0.5, &shifted, &nm, &t),
            Err(Error::PreconditionViolation(_))
        ));
    }

    #[test]
    fn compose_anchored_endpoints_and_preconditions() {
        let t = tol();
        let nm = NormSpec::L1;
        let k = unit_box(3);
        let refl = reflection_mapping();
        let x0 = p(&[0.25, 0.75]);
        let constant = compose_anchored(&refl, &x0, 0.0, &k, &nm, &t).unwrap();
        assert_eq!(evaluate(&constant, &p(&[0.9, 0.1]), &nm, &t).unwrap(), x0);
        let full = compose_anchored(&refl, &x0, 1.0, &k, &nm, &t).unwrap();
        let x = p(&[0.9, 0.1]);
        assert_eq!(
            evaluate(&full, &x, &nm, &t).unwrap(),
            evaluate(&refl, &x, &nm, &t).unwrap()
        );
        let outside = p(&[2.0, 2.0]);
        assert!(matches!(
            compose_anchored(&refl, &outside, 0.5, &k, &nm, &t),
            Err(Error::PreconditionViolation(_))
        ));
    }

    #[test]
    fn scaled_fixed_point_closed_form() {
        // x = c(1−x) has the unique solution x = c/(1+c)
        let t = tol();
        let nm = NormSpec::L1;
        let k = unit_box(3);
        let c = 0.8;
        let scaled = compose_scaled(&reflection_mapping(), c, &k, &nm, &t).unwrap();
        let fix = c / (1.0 + c);
        let img = evaluate(&scaled, &p(&[fix, fix]), &nm, &t).unwrap();
        assert_abs_diff_eq!(img.coords()[0], fix, epsilon = 1e-15);
        assert_abs_diff_eq!(img.coords()[1], fix, epsilon = 1e-15);
    }

    #[test]
    fn grid_sampling_finite_and_ray() {
        let finite = DomainSpec::Finite {
            points: vec![p(&[0.0, 0.0]), p(&[1.0, 0.0]), p(&[0.0, 1.0])],
        };
        let cfg = SamplerConfig { seed: 7, n_points: 3, strategy: SampleStrategy::Grid };
        let pts = sample_points(&finite, &cfg).unwrap();
        assert_eq!(pts, vec![p(&[0.0, 0.0]), p(&[1.0, 0.0]), p(&[0.0, 1.0])]);

        let cfg = SamplerConfig { seed: 7, n_points: 4, strategy: SampleStrategy::Grid };
        assert!(sample_points(&finite, &cfg).is_err());

        // base set plus the α-lattice {1, 1.5, 2, 2.5, 3}
        let ray = DomainSpec::RayUnion {
            base: vec![p(&[0.0, 0.0]), p(&[1.0, 0.0]), p(&[0.0, 1.0])],
            direction: p(&[1.0, 1.0]),
            alpha_min: 1.0,
            alpha_max: 3.0,
        };
        let cfg = SamplerConfig { seed: 7, n_points: 8, strategy: SampleStrategy::Grid };
        let pts = sample_points(&ray, &cfg).unwrap();
        assert_eq!(pts.len(), 8);
        for (k, alpha) in [1.0, 1.5, 2.0, 2.5, 3.0].iter().enumerate() {
            assert_eq!(pts[3 + k], p(&[*alpha, *alpha]));
        }
    }

    #[test]
    fn box_grid_is_row_major() {
        let k = DomainSpec::Box {
            lower: p(&[0.0, 0.0]),
            upper: p(&[1.0, 1.0]),
            resolution: vec![2, 3],
        };
        let cfg = SamplerConfig { seed: 0, n_points: 6, strategy: SampleStrategy::Grid };
        let pts = sample_points(&k, &cfg).unwrap();
        assert_eq!(pts[0], p(&[0.0, 0.0]));
        assert_eq!(pts[1], p(&[0.0, 0.5]));
        assert_eq!(pts[2], p(&[0.0, 1.0]));
        assert_eq!(pts[3], p(&[1.0, 0.0]));
    }

    #[test]
    fn sampling_is_deterministic() {
        let k = unit_box(5);
        for strategy in [SampleStrategy::Grid, SampleStrategy::UniformRandom, SampleStrategy::Hybrid]
        {
            let cfg = SamplerConfig { seed: 99, n_points: 12, strategy };
            let a = sample_points(&k, &cfg).unwrap();
            let b = sample_points(&k, &cfg).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.len(), 12);
        }
        let c1 = SamplerConfig { seed: 1, n_points: 12, strategy: SampleStrategy::UniformRandom };
        let c2 = SamplerConfig { seed: 2, n_points: 12, strategy: SampleStrategy::UniformRandom };
        assert_ne!(sample_points(&k, &c1).unwrap(), sample_points(&k, &c2).unwrap());
    }

    #[test]
    fn ray_membership_is_unbounded_above() {
        let t = tol();
        let nm = NormSpec::L1;
        let ray = DomainSpec::RayUnion {
            base: vec![],
            direction: p(&[1.0, 1.0]),
            alpha_min: 1.0,
            alpha_max: 4.0,
        };
        assert!(ray.contains(&p(&[100.0, 100.0]), &nm, &t));
        assert!(!ray.contains(&p(&[0.5, 0.5]), &nm, &t));
        assert!(!ray.contains(&p(&[2.0, 2.5]), &nm, &t));
    }
}
