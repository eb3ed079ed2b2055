//! Executable property suites over classified scenarios: the continuity
//! bound, closedness of the discrete fixed set, the class hierarchy, and the
//! perimeter scaling law.

use serde::{Deserialize, Serialize};

use crate::classify::{triple_scan, AuditGrid, ClassName, ClassificationReport};
use crate::error::{Error, Result};
use crate::geometry::{NormSpec, Point, Tolerances};
use crate::mapping::{compose_scaled, DomainSpec, MappingSpec, SamplerConfig};

/// Cap on stored counterexamples; the counts are always exact.
const MAX_VIOLATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite_name: String,
    pub n_cases: u64,
    pub n_violations: u64,
    /// Minimum over cases of `bound − observed`; negative iff a violation
    /// exists, `null` when no case was checked.
    pub worst_margin: Option<f64>,
    pub violations: Vec<Violation>,
}

/// A minimal self-certifying counterexample: re-running the named check on
/// the stored points reproduces the violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub case_id: String,
    pub observed: f64,
    pub bound: f64,
    pub margin: f64,
    pub points: Vec<Point>,
    pub sample_indices: Vec<usize>,
}

struct SuiteBuilder {
    name: String,
    n_cases: u64,
    n_violations: u64,
    worst_margin: Option<f64>,
    violations: Vec<Violation>,
}

impl SuiteBuilder {
    fn new(name: &str) -> Self {
        SuiteBuilder {
            name: name.into(),
            n_cases: 0,
            n_violations: 0,
            worst_margin: None,
            violations: Vec::new(),
        }
    }

    fn case(&mut self, observed: f64, bound: f64, mk: impl FnOnce() -> (String, Vec<Point>, Vec<usize>)) {
        self.n_cases += 1;
        let margin = bound - observed;
        if self.worst_margin.is_none_or(|w| margin < w) {
            self.worst_margin = Some(margin);
        }
        if margin < 0.0 {
            self.n_violations += 1;
            if self.violations.len() < MAX_VIOLATIONS {
                let (case_id, points, sample_indices) = mk();
                self.violations.push(Violation {
                    case_id,
                    observed,
                    bound,
                    margin,
                    points,
                    sample_indices,
                });
            }
        }
    }

    fn finish(self) -> SuiteReport {
        SuiteReport {
            suite_name: self.name,
            n_cases: self.n_cases,
            n_violations: self.n_violations,
            worst_margin: self.worst_margin,
            violations: self.violations,
        }
    }
}

fn require_perimetric(grid: &AuditGrid, tol: &Tolerances, suite: &str) -> Result<()> {
    let scan = triple_scan(grid, tol);
    if scan.first_expansion.is_some() {
        return Err(Error::PreconditionViolation(format!(
            "{suite} requires a perimetric nonexpansive mapping on the sample"
        )));
    }
    Ok(())
}

/// Continuity bound: for each ordered sampled pair `(x, x*)` and the nearest
/// third sample `y` to `x*`, check `‖Tx − Tx*‖ ≤ 2(‖x − x*‖ + ‖x* − y‖)`.
/// For a perimetric nonexpansive mapping this is implied by the triple
/// inequality, so the suite must pass whenever the triple audit does.
pub fn continuity(
    spec: &MappingSpec,
    domain: &DomainSpec,
    norm: &NormSpec,
    cfg: &SamplerConfig,
    tol: &Tolerances,
) -> Result<SuiteReport> {
    let grid = AuditGrid::build(spec, domain, norm, cfg, tol, false)?;
    let n = grid.n;
    if n < 3 {
        return Err(Error::InsufficientSpace { needed: 3, have: n });
    }
    require_perimetric(&grid, tol, "continuity suite")?;

    // two nearest other samples per index, so the auxiliary point can dodge x
    let mut nearest: Vec<(usize, usize)> = Vec::with_capacity(n);
    for j in 0..n {
        let mut first = usize::MAX;
        let mut second = usize::MAX;
        for k in 0..n {
            if k == j {
                continue;
            }
            if first == usize::MAX || grid.din(j, k) < grid.din(j, first) {
                second = first;
                first = k;
            } else if second == usize::MAX || grid.din(j, k) < grid.din(j, second) {
                second = k;
            }
        }
        nearest.push((first, second));
    }

    let mut b = SuiteBuilder::new("continuity");
    for i in 0..n {
        for (j, &(n1, n2)) in nearest.iter().enumerate() {
            if i == j {
                continue;
            }
            let y = if n1 != i { n1 } else { n2 };
            let observed = grid.dout(i, j);
            let bound = 2.0 * (grid.din(i, j) + grid.din(j, y)) + tol.tau_abs;
            b.case(observed, bound, || {
                (
                    format!("pair ({i},{j}) aux {y}"),
                    vec![grid.points[i].clone(), grid.points[j].clone(), grid.points[y].clone()],
                    vec![i, j, y],
                )
            });
        }
    }
    Ok(b.finish())
}

/// Discrete closedness surrogate for the fixed-point set: residual is
/// 2-Lipschitz around fixed points of a perimetric nonexpansive mapping, so
/// every sample within one grid step `h` of the discrete fixed set must have
/// residual at most `tol_fix + 2h`.
pub fn fixed_set_closed(
    spec: &MappingSpec,
    domain: &DomainSpec,
    norm: &NormSpec,
    cfg: &SamplerConfig,
    tol: &Tolerances,
    tol_fix: f64,
) -> Result<SuiteReport> {
    let grid = AuditGrid::build(spec, domain, norm, cfg, tol, false)?;
    let n = grid.n;
    let residuals: Vec<f64> = (0..n)
        .map(|i| norm.dist_slice(grid.images[i].coords(), grid.points[i].coords()))
        .collect();
    let fixed: Vec<usize> = (0..n).filter(|&i| residuals[i] <= tol_fix).collect();
    let h = grid_step(domain, &grid, norm);

    let mut b = SuiteBuilder::new("closed-set");
    for (i, residual) in residuals.iter().enumerate() {
        let dist_to_fixed = fixed
            .iter()
            .map(|&f| grid.din(i, f))
            .fold(f64::INFINITY, f64::min);
        if dist_to_fixed <= h {
            let bound = tol_fix + 2.0 * h + tol.tau_abs;
            b.case(*residual, bound, || {
                (format!("near-fixed sample {i}"), vec![grid.points[i].clone()], vec![i])
            });
        }
    }
    Ok(b.finish())
}

/// Characteristic neighbour spacing of the sampled domain.
fn grid_step(domain: &DomainSpec, grid: &AuditGrid, norm: &NormSpec) -> f64 {
    match domain {
        DomainSpec::Box { lower, upper, resolution } => lower
            .coords()
            .iter()
            .zip(upper.coords())
            .zip(resolution)
            .map(|((l, u), r)| (u - l) / (*r as f64 - 1.0))
            .fold(0.0_f64, f64::max),
        DomainSpec::RayUnion { direction, .. } => {
            // step between consecutive sampled ray points
            let dir_norm = norm.of_slice(direction.coords());
            let mut step = f64::INFINITY;
            for w in grid.points.windows(2) {
                let d = norm.dist_slice(w[0].coords(), w[1].coords());
                if d > 0.0 {
                    step = step.min(d);
                }
            }
            if step.is_finite() {
                step
            } else {
                dir_norm
            }
        }
        DomainSpec::Finite { .. } => {
            // largest nearest-neighbour gap among the samples
            let n = grid.n;
            (0..n)
                .map(|i| {
                    (0..n)
                        .filter(|&j| j != i)
                        .map(|j| grid.din(i, j))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0_f64, f64::max)
        }
    }
}

/// One classified scenario feeding the hierarchy suite.
pub struct ClassifiedScenario<'a> {
    pub name: String,
    pub report: &'a ClassificationReport,
}

/// Class-hierarchy consistency across a corpus: (a) no scenario may combine
/// an exhaustive nonexpansive verdict with a perimetric counterexample, and
/// (b) when `require_witness` is set, the corpus must contain a designated
/// witness that the inclusion is strict (perimetric holds, nonexpansive
/// fails).
pub fn hierarchy(scenarios: &[ClassifiedScenario<'_>], require_witness: bool) -> Result<SuiteReport> {
    let mut b = SuiteBuilder::new("hierarchy");
    let mut witness_found = false;
    for s in scenarios {
        let nonexp = &s.report.verdicts[&ClassName::Nonexpansive];
        let peri = &s.report.verdicts[&ClassName::PerimetricNonexpansive];
        let violation = s.report.exhaustive && nonexp.holds() && peri.fails();
        if peri.holds() && nonexp.fails() {
            witness_found = true;
        }
        // sentinel margins: +1 consistent, −1 inconsistent
        let observed = if violation { 1.0 } else { -1.0 };
        b.case(observed, 0.0, || (format!("scenario {}", s.name), vec![], vec![]));
    }
    if require_witness && !witness_found {
        return Err(Error::SuiteConfig(
            "corpus lacks a strictness witness (perimetric holds, nonexpansive fails)".into(),
        ));
    }
    Ok(b.finish())
}

/// Scaling law: damping a perimetric nonexpansive mapping by `c` bounds every
/// audited triple ratio by `c`, hence the empirical contraction factor too.
pub fn scaling_law(
    spec: &MappingSpec,
    domain: &DomainSpec,
    norm: &NormSpec,
    cfg: &SamplerConfig,
    tol: &Tolerances,
    c_values: &[f64],
) -> Result<SuiteReport> {
    let base = AuditGrid::build(spec, domain, norm, cfg, tol, false)?;
    if base.n < 3 {
        return Err(Error::InsufficientSpace { needed: 3, have: base.n });
    }
    require_perimetric(&base, tol, "scaling suite")?;

    let mut b = SuiteBuilder::new("scaling");
    for &c in c_values {
        let scaled = compose_scaled(spec, c, domain, norm, tol)?;
        let grid = AuditGrid::build(&scaled, domain, norm, cfg, tol, false)?;
        let n = grid.n;
        let mut alpha_hat = 0.0_f64;
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let (input, output) = grid.perimeters(i, j, k);
                    let ratio = if output < tol.eps_distinct { 0.0 } else { output / input };
                    alpha_hat = alpha_hat.max(ratio);
                    b.case(ratio, c * (1.0 + tol.tau_rel), || {
                        (
                            format!("c={c} triple ({i},{j},{k})"),
                            vec![
                                grid.points[i].clone(),
                                grid.points[j].clone(),
                                grid.points[k].clone(),
                            ],
                            vec![i, j, k],
                        )
                    });
                }
            }
        }
        b.case(alpha_hat, c + tol.tau_rel, || (format!("c={c} alpha_hat"), vec![], vec![]));
    }
    Ok(b.finish())
}
