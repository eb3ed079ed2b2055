//! Scenario files: a self-contained JSON description of a normed space, a
//! domain, a mapping, and how to sample it. The bundled corpus reproduces the
//! three reference examples used across the test suite.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{NormSpec, Point, Tolerances};
use crate::mapping::{
    evaluate, sample_points, DomainSpec, MappingSpec, SampleStrategy, SamplerConfig,
};
use crate::solve::ScheduleSpec;

pub const SCHEMA_VERSION: &str = "1";

/// Partial tolerance overrides; unset fields fall back to the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub eps_distinct: Option<f64>,
    pub tau_zero: Option<f64>,
    pub tau_rel: Option<f64>,
    pub tau_abs: Option<f64>,
    pub tau_strict: Option<f64>,
    pub tol_fix: Option<f64>,
}

impl ToleranceOverrides {
    pub fn resolve(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            eps_distinct: self.eps_distinct.unwrap_or(d.eps_distinct),
            tau_zero: self.tau_zero.unwrap_or(d.tau_zero),
            tau_rel: self.tau_rel.unwrap_or(d.tau_rel),
            tau_abs: self.tau_abs.unwrap_or(d.tau_abs),
            tau_strict: self.tau_strict.unwrap_or(d.tau_strict),
            tol_fix: self.tol_fix.unwrap_or(d.tol_fix),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_schema_version")]
    pub schema_version: String,
    pub name: String,
    pub dimension: usize,
    pub norm: NormSpec,
    pub domain: DomainSpec,
    pub mapping: MappingSpec,
    #[serde(default)]
    pub sampler: Option<SamplerConfig>,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
    /// Optional default schedule for the staged solvers.
    #[serde(default)]
    pub schedule: Option<ScheduleSpec>,
    /// Optional iteration start; defaults to the first sampled point.
    #[serde(default)]
    pub start: Option<Point>,
    /// Optional anchor for the anchored scheme; defaults to the start.
    #[serde(default)]
    pub anchor: Option<Point>,
    #[serde(default)]
    pub tags: Vec<String>,
}

fn default_schema_version() -> String {
    SCHEMA_VERSION.to_string()
}

impl Scenario {
    pub fn tolerances(&self) -> Tolerances {
        self.tolerances.resolve()
    }

    /// The configured sampler, or a grid sampler sized to the domain.
    pub fn sampler_or_default(&self) -> SamplerConfig {
        match &self.sampler {
            Some(cfg) => cfg.clone(),
            None => SamplerConfig {
                seed: 42,
                n_points: match &self.domain {
                    DomainSpec::Finite { points } => points.len(),
                    DomainSpec::Box { resolution, .. } => resolution.iter().product(),
                    DomainSpec::RayUnion { base, .. } => base.len() + 8,
                },
                strategy: SampleStrategy::Grid,
            },
        }
    }

    /// The iteration start: configured, or the first sampled point.
    pub fn start_or_default(&self) -> Result<Point> {
        if let Some(s) = &self.start {
            return Ok(s.clone());
        }
        let cfg = SamplerConfig { n_points: 1, ..self.sampler_or_default() };
        let pts = sample_points(&self.domain, &cfg)?;
        pts.into_iter()
            .next()
            .ok_or_else(|| Error::InvalidSpec("domain yielded no start point".into()))
    }

    pub fn anchor_or_default(&self) -> Result<Point> {
        match &self.anchor {
            Some(a) => Ok(a.clone()),
            None => self.start_or_default(),
        }
    }

    /// Structural and semantic validation; errors carry JSON-pointer-style
    /// field paths.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::schema(
                "/schema_version",
                format!("unsupported schema version {:?}", self.schema_version),
            ));
        }
        if self.name.is_empty() {
            return Err(Error::schema("/name", "scenario name must not be empty"));
        }
        if self.dimension == 0 {
            return Err(Error::schema("/dimension", "dimension must be >= 1"));
        }
        let tol = self.tolerances();
        for (path, value) in [
            ("/tolerances/eps_distinct", tol.eps_distinct),
            ("/tolerances/tau_zero", tol.tau_zero),
            ("/tolerances/tau_rel", tol.tau_rel),
            ("/tolerances/tau_abs", tol.tau_abs),
            ("/tolerances/tau_strict", tol.tau_strict),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::schema(path, format!("tolerance must be positive, got {value}")));
            }
        }
        if !(tol.tol_fix >= 0.0 && tol.tol_fix.is_finite()) {
            return Err(Error::schema("/tolerances/tol_fix", "tol_fix must be >= 0"));
        }
        self.norm
            .validate(self.dimension)
            .map_err(|e| Error::schema("/norm", e.to_string()))?;
        self.domain
            .validate(self.dimension)
            .map_err(|e| Error::schema("/domain", e.to_string()))?;
        self.mapping
            .validate(self.dimension, &self.norm, &tol)
            .map_err(|e| Error::schema("/mapping", e.to_string()))?;
        if let Some(cfg) = &self.sampler {
            if cfg.n_points == 0 {
                return Err(Error::schema("/sampler/n_points", "must be >= 1"));
            }
        }
        if let Some(schedule) = &self.schedule {
            schedule
                .validate()
                .map_err(|e| Error::schema("/schedule", e.to_string()))?;
        }
        if let Some(start) = &self.start {
            if start.dim() != self.dimension {
                return Err(Error::schema("/start", "start dimension mismatch"));
            }
            if !self.domain.contains(start, &self.norm, &tol) {
                return Err(Error::schema("/start", "start lies outside the domain"));
            }
        }
        if let Some(anchor) = &self.anchor {
            if anchor.dim() != self.dimension {
                return Err(Error::schema("/anchor", "anchor dimension mismatch"));
            }
            if !self.domain.contains(anchor, &self.norm, &tol) {
                return Err(Error::schema("/anchor", "anchor lies outside the domain"));
            }
        }
        // the mapping must be total on the sampled domain (piecewise regions
        // cover it, tabulated entries exist)
        let sample = sample_points(&self.domain, &self.sampler_or_default())
            .map_err(|e| Error::schema("/sampler", e.to_string()))?;
        for p in &sample {
            evaluate(&self.mapping, p, &self.norm, &tol).map_err(|e| {
                Error::schema("/mapping", format!("not total on the sampled domain: {e}"))
            })?;
        }
        Ok(())
    }
}

/// Parse and validate a scenario from JSON text.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = pointer_of(&e);
        if pointer.is_empty() {
            Error::Parse(e.inner().to_string())
        } else {
            Error::Schema { path: pointer, message: e.inner().to_string() }
        }
    })?;
    scenario.validate()?;
    Ok(scenario)
}

/// Load a scenario file (UTF-8 JSON).
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

/// Canonical JSON for a scenario (used for round-trip checks and `corpus`).
pub fn scenario_json(scenario: &Scenario) -> Result<String> {
    crate::report::to_canonical_json(scenario)
}

fn pointer_of<E>(err: &serde_path_to_error::Error<E>) -> String {
    let mut out = String::new();
    for segment in err.path().iter() {
        match segment {
            serde_path_to_error::Segment::Seq { index } => {
                out.push('/');
                out.push_str(&index.to_string());
            }
            serde_path_to_error::Segment::Map { key } => {
                out.push('/');
                out.push_str(key);
            }
            serde_path_to_error::Segment::Enum { variant } => {
                out.push('/');
                out.push_str(variant);
            }
            serde_path_to_error::Segment::Unknown => {}
        }
    }
    out
}

/// The bundled scenario corpus.
pub mod corpus {
    use super::*;

    const RAY_UNION_EXAMPLE: &str = include_str!("../corpus/example_2_2.json");
    const TRANSLATION_EXAMPLE: &str = include_str!("../corpus/example_2_3.json");
    const REFLECTION_EXAMPLE: &str = include_str!("../corpus/example_2_4.json");

    /// Names and raw JSON of the bundled scenarios.
    pub fn bundled() -> &'static [(&'static str, &'static str)] {
        &[
            ("example_2_2", RAY_UNION_EXAMPLE),
            ("example_2_3", TRANSLATION_EXAMPLE),
            ("example_2_4", REFLECTION_EXAMPLE),
        ]
    }

    pub fn load(name: &str) -> Result<Scenario> {
        let raw = bundled()
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| *text)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown corpus scenario {name:?}")))?;
        parse_scenario(raw)
    }

    /// Materialize the corpus into a directory; returns name → path.
    pub fn write_to(dir: impl AsRef<Path>) -> Result<BTreeMap<String, std::path::PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Parse(format!("{}: {e}", dir.display())))?;
        let mut written = BTreeMap::new();
        for (name, text) in bundled() {
            let path = dir.join(format!("{name}.json"));
            std::fs::write(&path, text)
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            written.insert((*name).to_string(), path);
        }
        Ok(written)
    }
}
