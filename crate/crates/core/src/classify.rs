//! Audits of a mapping against the class hierarchy and the period-2 scan.
//!
//! A mapping is *perimetric nonexpansive* when it never increases the
//! perimeter of any triple of distinct points, *perimeter-contracting* when a
//! uniform factor `α < 1` works for every triple, and *Edelstein-perimetric*
//! when the perimeter inequality is strict on every triple. Those three
//! triple-based classes are audited alongside the classical pair-based ones
//! (contraction, nonexpansive, quasi-nonexpansive).
//!
//! Numeric policy: a non-strict inequality holds with relative slack
//! `tau_rel` on the right-hand side; a ratio within `tau_strict` of 1 is
//! treated as exactly 1, so "strict" requires a real margin.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{perimeter_of, NormSpec, Point, Tolerances, Triple};
use crate::mapping::{
    dedupe_points, evaluate, sample_points, DomainSpec, MappingSpec, SamplerConfig,
};
use crate::solve::{self, PicardOptions, Termination};

/// The audited classes, from strongest to weakest pair-based and the three
/// triple-based ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClassName {
    Contraction,
    Nonexpansive,
    QuasiNonexpansive,
    PerimetricNonexpansive,
    PerimeterContracting,
    EdelsteinPerimetric,
}

pub const ALL_CLASSES: [ClassName; 6] = [
    ClassName::Contraction,
    ClassName::Nonexpansive,
    ClassName::QuasiNonexpansive,
    ClassName::PerimetricNonexpansive,
    ClassName::PerimeterContracting,
    ClassName::EdelsteinPerimetric,
];

/// Both sides of the perimeter inequality for one audited triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleCertificate {
    pub triple: Triple,
    pub input_perimeter: f64,
    pub output_perimeter: f64,
    /// `output_perimeter / input_perimeter`; reported as 0 when the images
    /// collapse below the distinctness threshold.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// A pair that breaks a pairwise inequality.
    Pair { x: Point, y: Point, input_distance: f64, output_distance: f64 },
    /// A point moved further from a fixed point.
    QuasiPair { x: Point, fixed_point: Point, input_distance: f64, output_distance: f64 },
    /// A triple that breaks a perimeter inequality.
    Triple { certificate: TripleCertificate },
    /// An exhaustively audited domain with an empty fixed-point set.
    NoFixedPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails { witness: Witness },
    Unknown,
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }
    pub fn fails(&self) -> bool {
        matches!(self, Verdict::Fails { .. })
    }
}

/// Outcome of a full class audit over a sampled (or exhausted) domain.
///
/// `exhaustive` is true only when the audited point set *is* the whole domain
/// (finite domains fully enumerated). Verdicts from non-exhaustive audits are
/// evidence, not proof: `Fails` witnesses are sound either way, `Holds` from a
/// sample is marked by `exhaustive = false`, and the classes that assert the
/// existence of a uniform bound stay `Unknown` on samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub verdicts: BTreeMap<ClassName, Verdict>,
    /// Supremum of observed output/input perimeter ratios.
    pub alpha_hat: f64,
    /// Smallest observed ratio (diagnostic).
    pub ratio_min: f64,
    pub n_points_audited: usize,
    pub n_pairs_checked: u64,
    pub n_triples_checked: u64,
    pub exhaustive: bool,
}

/// Result of scanning for points of prime period 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Period2Report {
    pub found: bool,
    pub witness: Option<Point>,
    /// `‖T²x − x‖` at the witness (or at the nearest miss when not found).
    pub displacement: Option<f64>,
    /// `‖Tx − x‖` at the same point; must exceed the tolerance for the period
    /// to be prime.
    pub fixed_gap: Option<f64>,
}

/// Audit a single triple: evaluate the mapping at its three points and
/// compare perimeter before and after.
pub fn audit_triple(
    spec: &MappingSpec,
    t: &Triple,
    norm: &NormSpec,
    tol: &Tolerances,
) -> Result<TripleCertificate> {
    let [x, y, z] = t.points();
    let ix = evaluate(spec, x, norm, tol)?;
    let iy = evaluate(spec, y, norm, tol)?;
    let iz = evaluate(spec, z, norm, tol)?;
    let input = perimeter_of(x.coords(), y.coords(), z.coords(), norm);
    let output = perimeter_of(ix.coords(), iy.coords(), iz.coords(), norm);
    let ratio = if output < tol.eps_distinct { 0.0 } else { output / input };
    Ok(TripleCertificate { triple: t.clone(), input_perimeter: input, output_perimeter: output, ratio })
}

/// Empirical lower bound for the contraction factor: the maximal ratio over a
/// set of certificates.
pub fn estimate_alpha(certs: &[TripleCertificate]) -> Result<f64> {
    if certs.is_empty() {
        return Err(Error::InsufficientData("estimate_alpha needs at least one certificate".into()));
    }
    Ok(certs.iter().fold(0.0_f64, |m, c| m.max(c.ratio)))
}

/// Sampled points, their images, and the two full distance matrices. This is
/// the shared substrate for the classifier and the property suites.
pub(crate) struct AuditGrid {
    pub points: Vec<Point>,
    pub images: Vec<Point>,
    d_in: Vec<f64>,
    d_out: Vec<f64>,
    pub n: usize,
}

impl AuditGrid {
    pub fn build(
        spec: &MappingSpec,
        domain: &DomainSpec,
        norm: &NormSpec,
        cfg: &SamplerConfig,
        tol: &Tolerances,
        check_images_in_domain: bool,
    ) -> Result<Self> {
        let raw = sample_points(domain, cfg)?;
        let points = dedupe_points(&raw, norm, tol);
        let n = points.len();
        let mut images = Vec::with_capacity(n);
        for (i, p) in points.iter().enumerate() {
            let img = evaluate(spec, p, norm, tol)?;
            if check_images_in_domain && !domain.contains(&img, norm, tol) {
                return Err(Error::DomainViolation(format!(
                    "image {img:?} of sample {i} ({p:?}) leaves the domain"
                )));
            }
            images.push(img);
        }
        let mut d_in = vec![0.0; n * n];
        let mut d_out = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let din = norm.dist_slice(points[i].coords(), points[j].coords());
                let dout = norm.dist_slice(images[i].coords(), images[j].coords());
                d_in[i * n + j] = din;
                d_in[j * n + i] = din;
                d_out[i * n + j] = dout;
                d_out[j * n + i] = dout;
            }
        }
        Ok(AuditGrid { points, images, d_in, d_out, n })
    }

    #[inline]
    pub fn din(&self, i: usize, j: usize) -> f64 {
        self.d_in[i * self.n + j]
    }

    #[inline]
    pub fn dout(&self, i: usize, j: usize) -> f64 {
        self.d_out[i * self.n + j]
    }

    /// Perimeter pair for a sample triple, summed in ascending order so the
    /// result matches `audit_triple` bit for bit.
    #[inline]
    pub fn perimeters(&self, i: usize, j: usize, k: usize) -> (f64, f64) {
        (
            sorted_sum(self.din(i, j), self.din(j, k), self.din(i, k)),
            sorted_sum(self.dout(i, j), self.dout(j, k), self.dout(i, k)),
        )
    }

    pub fn certificate(
        &self,
        (i, j, k): (usize, usize, usize),
        norm: &NormSpec,
        tol: &Tolerances,
    ) -> Result<TripleCertificate> {
        let t = Triple::new(
            self.points[i].clone(),
            self.points[j].clone(),
            self.points[k].clone(),
            norm,
            tol,
        )?;
        let (input, output) = self.perimeters(i, j, k);
        let ratio = if output < tol.eps_distinct { 0.0 } else { output / input };
        Ok(TripleCertificate { triple: t, input_perimeter: input, output_perimeter: output, ratio })
    }
}

#[inline]
fn sorted_sum(a: f64, b: f64, c: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if c <= hi {
        (lo + c) + hi
    } else {
        (lo + hi) + c
    }
}

/// Outcome of the full triple sweep over an audit grid.
pub(crate) struct TripleScan {
    pub alpha_hat: f64,
    pub ratio_min: f64,
    pub n_triples: u64,
    /// First triple (canonical order) with `out > in·(1+tau_rel)`.
    pub first_expansion: Option<(usize, usize, usize)>,
    /// First triple with `out ≥ in·(1−tau_strict)`, i.e. not strictly below.
    pub first_nonstrict: Option<(usize, usize, usize)>,
}

pub(crate) fn triple_scan(grid: &AuditGrid, tol: &Tolerances) -> TripleScan {
    let n = grid.n;
    let mut alpha_hat = 0.0_f64;
    let mut ratio_min = f64::INFINITY;
    let mut n_triples = 0u64;
    let mut first_expansion = None;
    let mut first_nonstrict = None;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (input, output) = grid.perimeters(i, j, k);
                n_triples += 1;
                let ratio = if output < tol.eps_distinct { 0.0 } else { output / input };
                alpha_hat = alpha_hat.max(ratio);
                ratio_min = ratio_min.min(ratio);
                if first_expansion.is_none() && output > input * (1.0 + tol.tau_rel) {
                    first_expansion = Some((i, j, k));
                }
                if first_nonstrict.is_none() && output >= input * (1.0 - tol.tau_strict) {
                    first_nonstrict = Some((i, j, k));
                }
            }
        }
    }
    if !ratio_min.is_finite() {
        ratio_min = 0.0;
    }
    TripleScan { alpha_hat, ratio_min, n_triples, first_expansion, first_nonstrict }
}

/// Classify a mapping over a sampled domain.
///
/// Sampled points are deduplicated first; the audit needs at least three
/// distinct points, mirroring the `|M| ≥ 3` hypothesis of the class
/// definitions. Images of all sampled points must stay inside the domain.
pub fn classify(
    spec: &MappingSpec,
    domain: &DomainSpec,
    norm: &NormSpec,
    cfg: &SamplerConfig,
    tol: &Tolerances,
) -> Result<ClassificationReport> {
    let grid = AuditGrid::build(spec, domain, norm, cfg, tol, true)?;
    let n = grid.n;
    if n < 3 {
        return Err(Error::InsufficientSpace { needed: 3, have: n });
    }
    let exhaustive = domain_exhausted(domain, n, norm, tol);

    // pair sweep
    let mut n_pairs = 0u64;
    let mut first_expansive_pair = None;
    let mut first_noncontractive_pair = None;
    for i in 0..n {
        for j in i + 1..n {
            n_pairs += 1;
            let din = grid.din(i, j);
            let dout = grid.dout(i, j);
            if first_expansive_pair.is_none() && dout > din * (1.0 + tol.tau_rel) {
                first_expansive_pair = Some((i, j));
            }
            if first_noncontractive_pair.is_none() && dout >= din * (1.0 - tol.tau_strict) {
                first_noncontractive_pair = Some((i, j));
            }
        }
    }

    let scan = triple_scan(&grid, tol);

    let pair_witness = |(i, j): (usize, usize)| Witness::Pair {
        x: grid.points[i].clone(),
        y: grid.points[j].clone(),
        input_distance: grid.din(i, j),
        output_distance: grid.dout(i, j),
    };
    let triple_witness = |idx: (usize, usize, usize)| -> Result<Witness> {
        Ok(Witness::Triple { certificate: grid.certificate(idx, norm, tol)? })
    };

    let mut verdicts = BTreeMap::new();

    verdicts.insert(
        ClassName::Contraction,
        match first_noncontractive_pair {
            Some(ij) => Verdict::Fails { witness: pair_witness(ij) },
            None if exhaustive => Verdict::Holds,
            None => Verdict::Unknown,
        },
    );
    verdicts.insert(
        ClassName::Nonexpansive,
        match first_expansive_pair {
            Some(ij) => Verdict::Fails { witness: pair_witness(ij) },
            None => Verdict::Holds,
        },
    );
    verdicts.insert(
        ClassName::QuasiNonexpansive,
        quasi_verdict(&grid, spec, domain, norm, tol, exhaustive)?,
    );
    verdicts.insert(
        ClassName::PerimetricNonexpansive,
        match scan.first_expansion {
            Some(idx) => Verdict::Fails { witness: triple_witness(idx)? },
            None => Verdict::Holds,
        },
    );
    verdicts.insert(
        ClassName::PerimeterContracting,
        match scan.first_nonstrict {
            Some(idx) => Verdict::Fails { witness: triple_witness(idx)? },
            None if exhaustive => Verdict::Holds,
            None => Verdict::Unknown,
        },
    );
    verdicts.insert(
        ClassName::EdelsteinPerimetric,
        match scan.first_nonstrict {
            Some(idx) => Verdict::Fails { witness: triple_witness(idx)? },
            None => Verdict::Holds,
        },
    );

    // hierarchy consistency: a nonexpansive verdict can never coexist with a
    // perimetric counterexample (the triple inequality is a sum of pair ones)
    debug_assert!(
        !(verdicts[&ClassName::Nonexpansive].holds()
            && verdicts[&ClassName::PerimetricNonexpansive].fails()),
        "inconsistent verdict pair"
    );

    Ok(ClassificationReport {
        verdicts,
        alpha_hat: scan.alpha_hat,
        ratio_min: scan.ratio_min,
        n_points_audited: n,
        n_pairs_checked: n_pairs,
        n_triples_checked: scan.n_triples,
        exhaustive,
    })
}

/// The audit is domain-exhaustive only when the deduplicated sample covers
/// every point of a finite domain; continuous domains can never be exhausted.
fn domain_exhausted(domain: &DomainSpec, n_audited: usize, norm: &NormSpec, tol: &Tolerances) -> bool {
    match domain {
        DomainSpec::Finite { points } => dedupe_points(points, norm, tol).len() == n_audited,
        _ => false,
    }
}

/// Quasi-nonexpansiveness is defined relative to the fixed-point set: find it
/// (exhaustively on finite domains, by residual scan plus a solver fallback on
/// continuous ones), then audit `‖Tx − p‖ ≤ ‖x − p‖` for every sample and
/// every fixed point found. The audit allows `tol_fix` of absolute slack since
/// the fixed points themselves are only resolved to that residual.
fn quasi_verdict(
    grid: &AuditGrid,
    spec: &MappingSpec,
    domain: &DomainSpec,
    norm: &NormSpec,
    tol: &Tolerances,
    exhaustive: bool,
) -> Result<Verdict> {
    let mut fixed: Vec<Point> = Vec::new();
    for (p, img) in grid.points.iter().zip(&grid.images) {
        if norm.dist_slice(p.coords(), img.coords()) <= tol.tol_fix {
            fixed.push(p.clone());
        }
    }
    if fixed.is_empty() {
        if exhaustive {
            // the whole domain was scanned: F(T) is empty, so the class's
            // nonempty-fixed-set requirement fails outright
            return Ok(Verdict::Fails { witness: Witness::NoFixedPoint });
        }
        if let Some(p) = solver_fixed_point(spec, domain, norm, tol) {
            fixed.push(p);
        } else {
            return Ok(Verdict::Unknown);
        }
    }
    for (i, x) in grid.points.iter().enumerate() {
        for p in &fixed {
            let din = norm.dist_slice(x.coords(), p.coords());
            let dout = norm.dist_slice(grid.images[i].coords(), p.coords());
            if dout > din * (1.0 + tol.tau_rel) + tol.tol_fix {
                return Ok(Verdict::Fails {
                    witness: Witness::QuasiPair {
                        x: x.clone(),
                        fixed_point: p.clone(),
                        input_distance: din,
                        output_distance: dout,
                    },
                });
            }
        }
    }
    Ok(Verdict::Holds)
}

/// Hunt for one fixed point with a Picard run from the first sample. The
/// staged schemes are no help here: their residual decays like r/n, far too
/// slow to resolve a fixed point to `tol_fix` inside a classification call.
fn solver_fixed_point(
    spec: &MappingSpec,
    domain: &DomainSpec,
    norm: &NormSpec,
    tol: &Tolerances,
) -> Option<Point> {
    let start = sample_points(
        domain,
        &SamplerConfig {
            seed: 0,
            n_points: 1,
            strategy: crate::mapping::SampleStrategy::UniformRandom,
        },
    )
    .ok()?
    .into_iter()
    .next()?;
    let result = solve::picard(
        spec,
        domain,
        norm,
        tol,
        &start,
        &PicardOptions { alpha_hint: 0.0, tol_fix: tol.tol_fix, max_iter: 20_000 },
    );
    match result {
        Ok(r) if r.termination == Termination::Converged => Some(r.candidate),
        _ => None,
    }
}

/// Scan sampled points for prime-period-2 behaviour: `‖T²x − x‖ ≤ tol_fix`
/// while `‖Tx − x‖ > tol_fix`. Returns the first witness in canonical sample
/// order.
pub fn detect_period2(
    spec: &MappingSpec,
    domain: &DomainSpec,
    norm: &NormSpec,
    cfg: &SamplerConfig,
    tol_fix: f64,
    tol: &Tolerances,
) -> Result<Period2Report> {
    let raw = sample_points(domain, cfg)?;
    let points = dedupe_points(&raw, norm, tol);
    let mut best: Option<(f64, f64, Point)> = None;
    for p in &points {
        let img = evaluate(spec, p, norm, tol)?;
        let img2 = evaluate(spec, &img, norm, tol)?;
        let displacement = norm.dist_slice(img2.coords(), p.coords());
        let fixed_gap = norm.dist_slice(img.coords(), p.coords());
        if fixed_gap > tol_fix {
            if displacement <= tol_fix {
                return Ok(Period2Report {
                    found: true,
                    witness: Some(p.clone()),
                    displacement: Some(displacement),
                    fixed_gap: Some(fixed_gap),
                });
            }
            if best.as_ref().is_none_or(|(d, _, _)| displacement < *d) {
                best = Some((displacement, fixed_gap, p.clone()));
            }
        }
    }
    Ok(match best {
        Some((displacement, fixed_gap, witness)) => Period2Report {
            found: false,
            witness: Some(witness),
            displacement: Some(displacement),
            fixed_gap: Some(fixed_gap),
        },
        None => Period2Report { found: false, witness: None, displacement: None, fixed_gap: None },
    })
}
