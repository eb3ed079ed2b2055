//! Points, the norm family, and the triple-perimeter functional.
//!
//! The perimeter of a triple `S(x,y,z) = ‖x−y‖ + ‖y−z‖ + ‖z−x‖` is the
//! quantity every audit in this crate compares before and after applying a
//! mapping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numeric tolerances used throughout the crate. Scenario files may override
/// any of them; these defaults leave double-precision headroom for the O(n³)
/// accumulations in the triple audits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Two points with gap at or below this are treated as the same point.
    pub eps_distinct: f64,
    /// A norm value at or below this counts as zero.
    pub tau_zero: f64,
    /// Relative slack applied to the right-hand side of inequality checks.
    pub tau_rel: f64,
    /// Absolute slack for domain membership and triangle-inequality checks.
    pub tau_abs: f64,
    /// Margin below which a strict inequality is indistinguishable from equality.
    pub tau_strict: f64,
    /// Residual at or below which a point counts as fixed.
    pub tol_fix: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps_distinct: 1e-12,
            tau_zero: 1e-12,
            tau_rel: 1e-9,
            tau_abs: 1e-9,
            tau_strict: 1e-12,
            tol_fix: 1e-8,
        }
    }
}

/// A coordinate vector in d-dimensional real space. All coordinates are finite;
/// the dimension is fixed per scenario.
#[derive(Debug, Clone, PartialEq, PartialOrd)]
pub struct Point(pub(crate) Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidSpec("point must have dimension >= 1".into()));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidSpec(format!("non-finite coordinate {c}")));
        }
        Ok(Point(coords))
    }

    pub fn zero(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let coords = Vec::<f64>::deserialize(d)?;
        Point::new(coords).map_err(serde::de::Error::custom)
    }
}

/// The norm placed on the ambient space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormSpec {
    /// Sum of absolute coordinates.
    L1,
    /// Euclidean norm.
    L2,
    /// Maximum absolute coordinate.
    Linf,
    /// `(Σ wᵢ|vᵢ|^p)^{1/p}` with positive weights and exponent `p >= 1`.
    WeightedP { weights: Vec<f64>, p: f64 },
}

impl NormSpec {
    /// Check the spec against the ambient dimension.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if let NormSpec::WeightedP { weights, p } = self {
            if weights.len() != dim {
                return Err(Error::InvalidSpec(format!(
                    "weighted norm has {} weights for dimension {dim}",
                    weights.len()
                )));
            }
            if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
                return Err(Error::InvalidSpec("weighted norm requires finite weights > 0".into()));
            }
            if !p.is_finite() || *p < 1.0 {
                return Err(Error::InvalidSpec(format!("weighted norm exponent p = {p} must be >= 1")));
            }
        }
        Ok(())
    }

    /// Norm of a raw coordinate slice. Assumes `validate` passed for this length.
    pub(crate) fn of_slice(&self, v: &[f64]) -> f64 {
        match self {
            NormSpec::L1 => v.iter().map(|c| c.abs()).sum(),
            NormSpec::L2 => v.iter().map(|c| c * c).sum::<f64>().sqrt(),
            NormSpec::Linf => v.iter().fold(0.0_f64, |m, c| m.max(c.abs())),
            NormSpec::WeightedP { weights, p } => {
                let s: f64 = v.iter().zip(weights).map(|(c, w)| w * c.abs().powf(*p)).sum();
                s.powf(1.0 / p)
            }
        }
    }

    /// Distance between two raw slices of equal length.
    pub(crate) fn dist_slice(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            NormSpec::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            NormSpec::L2 => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            NormSpec::Linf => a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())),
            NormSpec::WeightedP { weights, p } => {
                let s: f64 =
                    a.iter().zip(b).zip(weights).map(|((x, y), w)| w * (x - y).abs().powf(*p)).sum();
                s.powf(1.0 / p)
            }
        }
    }
}

/// Norm of a point.
pub fn norm(v: &Point, spec: &NormSpec) -> Result<f64> {
    spec.validate(v.dim())?;
    Ok(spec.of_slice(v.coords()))
}

/// Distance `‖a − b‖` under the given norm.
pub fn dist(a: &Point, b: &Point, spec: &NormSpec) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidSpec(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    spec.validate(a.dim())?;
    Ok(spec.dist_slice(a.coords(), b.coords()))
}

/// Three pairwise distinct points. Construction canonicalizes the point order
/// (lexicographic) so that certificates do not depend on how the triple was
/// presented, and records the smallest pairwise distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    x: Point,
    y: Point,
    z: Point,
    min_pairwise_gap: f64,
}

impl Triple {
    pub fn new(x: Point, y: Point, z: Point, norm: &NormSpec, tol: &Tolerances) -> Result<Self> {
        if x.dim() != y.dim() || y.dim() != z.dim() {
            return Err(Error::InvalidSpec("triple mixes dimensions".into()));
        }
        norm.validate(x.dim())?;
        let mut pts = [x, y, z];
        pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates are totally ordered"));
        let [x, y, z] = pts;
        let gap = min_gap(&x, &y, &z, norm);
        if gap <= tol.eps_distinct {
            return Err(Error::DegenerateTriple { gap, eps: tol.eps_distinct });
        }
        Ok(Triple { x, y, z, min_pairwise_gap: gap })
    }

    pub fn points(&self) -> [&Point; 3] {
        [&self.x, &self.y, &self.z]
    }

    pub fn min_pairwise_gap(&self) -> f64 {
        self.min_pairwise_gap
    }
}

fn min_gap(x: &Point, y: &Point, z: &Point, norm: &NormSpec) -> f64 {
    let dxy = norm.dist_slice(x.coords(), y.coords());
    let dyz = norm.dist_slice(y.coords(), z.coords());
    let dzx = norm.dist_slice(z.coords(), x.coords());
    dxy.min(dyz).min(dzx)
}

/// Perimeter of three raw coordinate slices. The three distances are summed in
/// ascending order, which makes the value bit-identical under any permutation
/// of the inputs.
pub(crate) fn perimeter_of(a: &[f64], b: &[f64], c: &[f64], norm: &NormSpec) -> f64 {
    let mut d = [norm.dist_slice(a, b), norm.dist_slice(b, c), norm.dist_slice(c, a)];
    d.sort_by(|p, q| p.partial_cmp(q).expect("distances are finite"));
    d[0] + d[1] + d[2]
}

/// The triple-perimeter functional `S(x,y,z) = ‖x−y‖ + ‖y−z‖ + ‖z−x‖`.
pub fn perimeter(t: &Triple, norm: &NormSpec, tol: &Tolerances) -> Result<f64> {
    let [x, y, z] = t.points();
    let gap = min_gap(x, y, z, norm);
    if gap <= tol.eps_distinct {
        return Err(Error::DegenerateTriple { gap, eps: tol.eps_distinct });
    }
    Ok(perimeter_of(x.coords(), y.coords(), z.coords(), norm))
}
