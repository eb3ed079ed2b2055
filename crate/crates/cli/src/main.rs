//! `perimap` — classify self-maps of normed spaces against the
//! triangle-perimeter hierarchy and compute fixed points.
//!
//! Exit codes: 0 when every requested check passed (or the solve converged),
//! 1 when a violation, obstruction, or non-convergence was found and reported,
//! 2 on usage, parse, or precondition errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use perimap_core::classify::{classify, detect_period2};
use perimap_core::mapping::{DomainSpec, SampleStrategy, SamplerConfig};
use perimap_core::report::{
    emit_report, parse_report, Invocation, ReportFormat, RunReport, SolveRecord,
};
use perimap_core::scenario::{corpus, load_scenario, Scenario};
use perimap_core::solve::{
    self, AnchoredOptions, DampedOptions, OrbitOptions, PicardOptions, ScheduleSpec, Termination,
};
use perimap_core::suites;

#[derive(Parser)]
#[command(name = "perimap", version, about = "Perimetric mapping classification and fixed-point solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Picard,
    Damped,
    Anchored,
    Orbit,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteKind {
    Continuity,
    ClosedSet,
    Hierarchy,
    Scaling,
}

#[derive(Subcommand)]
enum Command {
    /// Audit a scenario against the class hierarchy.
    Classify {
        scenario: PathBuf,
        /// Force grid sampling over the full lattice / point set.
        #[arg(long)]
        exhaustive: bool,
        /// Override the sampler seed (beats PERIMAP_SEED and the scenario).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Run a fixed-point scheme on a scenario.
    Solve {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        /// Residual tolerance; defaults to the scenario's tol_fix.
        #[arg(long)]
        tol: Option<f64>,
        /// Inner solve tolerance for the staged schemes.
        #[arg(long, default_value_t = 1e-8)]
        inner_tol: f64,
        /// Weight schedule: `harmonic` or `geometric:RHO`.
        #[arg(long)]
        schedule: Option<String>,
        /// Stage cap for the staged schemes.
        #[arg(long)]
        n_max: Option<u64>,
        /// Iteration cap for picard/orbit.
        #[arg(long, default_value_t = 10_000)]
        max_iter: u64,
        /// Per-stage inner iteration cap (default derives from the stage weight).
        #[arg(long)]
        max_inner: Option<u64>,
        /// Trailing-window size for orbit cluster detection.
        #[arg(long, default_value_t = 32)]
        cluster_window: usize,
        /// Include the full iterate trace in the report.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Scan sampled points for prime-period-2 behaviour.
    DetectPeriod2 {
        scenario: PathBuf,
        /// Residual tolerance; defaults to the scenario's tol_fix.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Run a property suite over one scenario (or several, for `hierarchy`).
    Verify {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[arg(long, value_enum)]
        suite: SuiteKind,
        /// Scaling factors for the scaling suite, comma separated.
        #[arg(long, default_value = "0.0,0.5,0.9,0.99")]
        c_values: String,
        /// Require the hierarchy corpus to contain a strictness witness.
        #[arg(long)]
        require_witness: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Write the bundled example scenarios to a directory.
    Corpus {
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-emit a previously written run report.
    Report {
        run: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("perimap: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Classify { scenario, exhaustive, seed, out, format } => {
            cmd_classify(&scenario, exhaustive, seed, out.as_deref(), format)
        }
        Command::Solve {
            scenario,
            method,
            tol,
            inner_tol,
            schedule,
            n_max,
            max_iter,
            max_inner,
            cluster_window,
            trace,
            seed,
            out,
            format,
        } => cmd_solve(
            &scenario,
            method,
            tol,
            inner_tol,
            schedule.as_deref(),
            n_max,
            max_iter,
            max_inner,
            cluster_window,
            trace,
            seed,
            out.as_deref(),
            format,
        ),
        Command::DetectPeriod2 { scenario, tol, seed, out, format } => {
            cmd_detect_period2(&scenario, tol, seed, out.as_deref(), format)
        }
        Command::Verify { scenarios, suite, c_values, require_witness, seed, out, format } => {
            cmd_verify(&scenarios, suite, &c_values, require_witness, seed, out.as_deref(), format)
        }
        Command::Corpus { out } => cmd_corpus(&out),
        Command::Report { run, format, out } => cmd_report(&run, format, out.as_deref()),
    }
}

/// Seed precedence: --seed, then PERIMAP_SEED, then the scenario sampler.
fn effective_sampler(scenario: &Scenario, seed_flag: Option<u64>) -> Result<SamplerConfig> {
    let mut cfg = scenario.sampler_or_default();
    if let Ok(env_seed) = std::env::var("PERIMAP_SEED") {
        cfg.seed = env_seed
            .parse::<u64>()
            .map_err(|_| anyhow!("PERIMAP_SEED must be an unsigned integer, got {env_seed:?}"))?;
    }
    if let Some(seed) = seed_flag {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn exhaustive_sampler(scenario: &Scenario, cfg: &SamplerConfig) -> SamplerConfig {
    let n_points = match &scenario.domain {
        DomainSpec::Finite { points } => points.len(),
        DomainSpec::Box { resolution, .. } => resolution.iter().product(),
        // for a ray union the configured lattice *is* the truncation
        DomainSpec::RayUnion { .. } => cfg.n_points,
    };
    SamplerConfig { n_points, strategy: SampleStrategy::Grid, ..*cfg }
}

fn load(path: &Path) -> Result<Scenario> {
    load_scenario(path).with_context(|| format!("loading scenario {}", path.display()))
}

fn write_output(report: &RunReport, format: Format, out: Option<&Path>) -> Result<()> {
    let fmt = match format {
        Format::Json => ReportFormat::Json,
        Format::Csv => ReportFormat::CsvSummary,
    };
    let body = emit_report(report, fmt)?;
    print!("{body}");
    if let Some(path) = out {
        std::fs::write(path, &body).with_context(|| format!("writing {}", path.display()))?;
    }
    for (phase, ms) in &report.wall_time_ms {
        eprintln!("perimap: {phase} took {ms:.1} ms");
    }
    Ok(())
}

fn cmd_classify(
    path: &Path,
    exhaustive: bool,
    seed: Option<u64>,
    out: Option<&Path>,
    format: Format,
) -> Result<u8> {
    let scenario = load(path)?;
    let tol = scenario.tolerances();
    let mut cfg = effective_sampler(&scenario, seed)?;
    if exhaustive {
        cfg = exhaustive_sampler(&scenario, &cfg);
    }
    let started = Instant::now();
    let classification = classify(&scenario.mapping, &scenario.domain, &scenario.norm, &cfg, &tol)?;
    let elapsed = started.elapsed().as_secs_f64() * 1e3;

    let mut report = RunReport::new(
        &scenario.name,
        cfg.seed,
        Invocation {
            command: "classify".into(),
            exhaustive: Some(exhaustive),
            ..Default::default()
        },
    );
    report.classification = Some(classification);
    report.wall_time_ms.insert("classify".into(), elapsed);
    write_output(&report, format, out)?;
    Ok(0)
}

fn parse_schedule(text: &str, n_max: u64) -> Result<ScheduleSpec> {
    let spec = match text {
        "harmonic" => ScheduleSpec::Harmonic { n_max },
        other => match other.strip_prefix("geometric:") {
            Some(rho) => {
                let rho: f64 = rho
                    .parse()
                    .map_err(|_| anyhow!("invalid geometric ratio in --schedule {other:?}"))?;
                ScheduleSpec::Geometric { rho, n_max }
            }
            None => bail!("--schedule must be `harmonic` or `geometric:RHO`, got {text:?}"),
        },
    };
    spec.validate()?;
    Ok(spec)
}

/// Default stage budget for the harmonic schedule: enough stages for the
/// requested tolerance (stage residual decays like r/n), clamped to keep
/// accidental tiny tolerances from running forever.
fn default_n_max(r_hat: f64, tol_fix: f64) -> u64 {
    if tol_fix <= 0.0 {
        return 10_000;
    }
    let needed = (4.0 * r_hat.max(1.0) / tol_fix).ceil();
    (needed as u64).clamp(10_000, 20_000_000)
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    path: &Path,
    method: Method,
    tol_flag: Option<f64>,
    inner_tol: f64,
    schedule_flag: Option<&str>,
    n_max: Option<u64>,
    max_iter: u64,
    max_inner: Option<u64>,
    cluster_window: usize,
    trace: bool,
    seed: Option<u64>,
    out: Option<&Path>,
    format: Format,
) -> Result<u8> {
    let scenario = load(path)?;
    let tol = scenario.tolerances();
    let cfg = effective_sampler(&scenario, seed)?;
    let tol_fix = tol_flag.unwrap_or(tol.tol_fix);

    let started = Instant::now();
    let (method_name, schedule_used, result) = match method {
        Method::Picard => {
            let start = scenario.start_or_default()?;
            let result = solve::picard(
                &scenario.mapping,
                &scenario.domain,
                &scenario.norm,
                &tol,
                &start,
                &PicardOptions { alpha_hint: 0.0, tol_fix, max_iter },
            )?;
            ("picard", None, result)
        }
        Method::Orbit => {
            let start = scenario.start_or_default()?;
            let result = solve::orbit(
                &scenario.mapping,
                &scenario.domain,
                &scenario.norm,
                &tol,
                &start,
                &OrbitOptions { tol_fix, max_iter, cluster_window },
            )?;
            ("orbit", None, result)
        }
        Method::Damped => {
            let r_hat = estimate_r_plain(&scenario, &cfg)?;
            let schedule = resolve_schedule(&scenario, schedule_flag, n_max, r_hat, tol_fix)?;
            let result = solve::damped(
                &scenario.mapping,
                &scenario.domain,
                &scenario.norm,
                &tol,
                &schedule,
                &DampedOptions { tol_fix, inner_tol, max_inner, start: scenario.start.clone() },
                Some(&cfg),
            )?;
            ("damped", Some(schedule), result)
        }
        Method::Anchored => {
            let r_hat = estimate_r_plain(&scenario, &cfg)?;
            let schedule = resolve_schedule(&scenario, schedule_flag, n_max, r_hat, tol_fix)?;
            let anchor = scenario.anchor_or_default()?;
            let result = solve::anchored(
                &scenario.mapping,
                &scenario.domain,
                &scenario.norm,
                &tol,
                &anchor,
                &schedule,
                &AnchoredOptions { tol_fix, inner_tol, max_inner, start: scenario.start.clone() },
            )?;
            ("anchored", Some(schedule), result)
        }
    };
    let elapsed = started.elapsed().as_secs_f64() * 1e3;

    let mut record = SolveRecord { method: method_name.into(), result };
    if !trace {
        record.result.trace.clear();
    }
    let converged = record.result.termination == Termination::Converged;

    let mut report = RunReport::new(
        &scenario.name,
        cfg.seed,
        Invocation {
            command: "solve".into(),
            method: Some(method_name.into()),
            tol_fix: Some(tol_fix),
            inner_tol: Some(inner_tol),
            schedule: schedule_used,
            ..Default::default()
        },
    );
    report.solves.push(record);
    report.wall_time_ms.insert("solve".into(), elapsed);
    write_output(&report, format, out)?;
    Ok(if converged { 0 } else { 1 })
}

fn resolve_schedule(
    scenario: &Scenario,
    flag: Option<&str>,
    n_max: Option<u64>,
    r_hat: f64,
    tol_fix: f64,
) -> Result<ScheduleSpec> {
    let default_stages = n_max.unwrap_or_else(|| default_n_max(r_hat, tol_fix));
    if let Some(text) = flag {
        return parse_schedule(text, default_stages);
    }
    if let Some(mut schedule) = scenario.schedule.clone() {
        if let Some(n) = n_max {
            match &mut schedule {
                ScheduleSpec::Harmonic { n_max } | ScheduleSpec::Geometric { n_max, .. } => {
                    *n_max = n
                }
                ScheduleSpec::Explicit { .. } => {}
            }
        }
        schedule.validate()?;
        return Ok(schedule);
    }
    Ok(ScheduleSpec::Harmonic { n_max: default_stages })
}

/// Uninflated `max ‖Tx‖` over the sampler's points, used to size the default
/// harmonic schedule.
fn estimate_r_plain(scenario: &Scenario, cfg: &SamplerConfig) -> Result<f64> {
    let tol = scenario.tolerances();
    let pts = perimap_core::mapping::sample_points(&scenario.domain, cfg)?;
    let mut r = 0.0_f64;
    for p in &pts {
        let img = perimap_core::mapping::evaluate(&scenario.mapping, p, &scenario.norm, &tol)?;
        r = r.max(perimap_core::geometry::norm(&img, &scenario.norm)?);
    }
    Ok(r)
}

fn cmd_detect_period2(
    path: &Path,
    tol_flag: Option<f64>,
    seed: Option<u64>,
    out: Option<&Path>,
    format: Format,
) -> Result<u8> {
    let scenario = load(path)?;
    let tol = scenario.tolerances();
    let cfg = effective_sampler(&scenario, seed)?;
    let tol_fix = tol_flag.unwrap_or(tol.tol_fix);
    let started = Instant::now();
    let period2 = detect_period2(
        &scenario.mapping,
        &scenario.domain,
        &scenario.norm,
        &cfg,
        tol_fix,
        &tol,
    )?;
    let elapsed = started.elapsed().as_secs_f64() * 1e3;

    let found = period2.found;
    let mut report = RunReport::new(
        &scenario.name,
        cfg.seed,
        Invocation { command: "detect-period2".into(), tol_fix: Some(tol_fix), ..Default::default() },
    );
    report.period2 = Some(period2);
    report.wall_time_ms.insert("detect-period2".into(), elapsed);
    write_output(&report, format, out)?;
    Ok(if found { 1 } else { 0 })
}

fn cmd_verify(
    paths: &[PathBuf],
    suite: SuiteKind,
    c_values: &str,
    require_witness: bool,
    seed: Option<u64>,
    out: Option<&Path>,
    format: Format,
) -> Result<u8> {
    if paths.len() > 1 && suite != SuiteKind::Hierarchy {
        bail!("only the hierarchy suite accepts multiple scenarios");
    }
    let scenarios: Vec<Scenario> = paths.iter().map(|p| load(p)).collect::<Result<_>>()?;
    let started = Instant::now();

    let (reports, run_scenario, cfg_seed) = match suite {
        SuiteKind::Hierarchy => {
            let mut classified = Vec::new();
            let mut seed_used = 0;
            for s in &scenarios {
                let tol = s.tolerances();
                let cfg = effective_sampler(s, seed)?;
                seed_used = cfg.seed;
                let report = classify(&s.mapping, &s.domain, &s.norm, &cfg, &tol)?;
                classified.push((s.name.clone(), report));
            }
            let entries: Vec<suites::ClassifiedScenario<'_>> = classified
                .iter()
                .map(|(name, report)| suites::ClassifiedScenario { name: name.clone(), report })
                .collect();
            let suite_report = suites::hierarchy(&entries, require_witness)?;
            let names: Vec<&str> = scenarios.iter().map(|s| s.name.as_str()).collect();
            (vec![suite_report], names.join("+"), seed_used)
        }
        SuiteKind::Continuity | SuiteKind::ClosedSet | SuiteKind::Scaling => {
            let s = &scenarios[0];
            let tol = s.tolerances();
            let cfg = effective_sampler(s, seed)?;
            let report = match suite {
                SuiteKind::Continuity => {
                    suites::continuity(&s.mapping, &s.domain, &s.norm, &cfg, &tol)?
                }
                SuiteKind::ClosedSet => suites::fixed_set_closed(
                    &s.mapping,
                    &s.domain,
                    &s.norm,
                    &cfg,
                    &tol,
                    tol.tol_fix,
                )?,
                SuiteKind::Scaling => {
                    let cs: Vec<f64> = c_values
                        .split(',')
                        .map(|c| c.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| anyhow!("invalid --c-values list {c_values:?}"))?;
                    suites::scaling_law(&s.mapping, &s.domain, &s.norm, &cfg, &tol, &cs)?
                }
                SuiteKind::Hierarchy => unreachable!(),
            };
            (vec![report], s.name.clone(), cfg.seed)
        }
    };
    let suite_name = reports[0].suite_name.clone();
    let elapsed = started.elapsed().as_secs_f64() * 1e3;

    let clean = reports.iter().all(|r| r.n_violations == 0);
    let mut report = RunReport::new(
        &run_scenario,
        cfg_seed,
        Invocation { command: "verify".into(), suite: Some(suite_name), ..Default::default() },
    );
    report.suites = reports;
    report.wall_time_ms.insert("verify".into(), elapsed);
    write_output(&report, format, out)?;
    Ok(if clean { 0 } else { 1 })
}

fn cmd_corpus(out: &Path) -> Result<u8> {
    let written = corpus::write_to(out)?;
    for path in written.values() {
        println!("{}", path.display());
    }
    Ok(0)
}

fn cmd_report(run: &Path, format: Format, out: Option<&Path>) -> Result<u8> {
    let text = std::fs::read_to_string(run).with_context(|| format!("reading {}", run.display()))?;
    let report = parse_report(&text)?;
    write_output(&report, format, out)?;
    Ok(0)
}
