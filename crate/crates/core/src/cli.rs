//! Experiment commands behind the `cvtele` binary. Each command validates the
//! configuration, runs, and renders a CSV or JSON document.

use std::fmt::Write as _;

use ndarray::Array1;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bases::{check_family, BasisCheck, BasisFamily};
use crate::config::{ConfigError, OutputFormat, RunConfig, SweepEngine, SweepParameter};
use crate::error::Error;
use crate::gaussian::heisenberg::{entangled_correlations, entangled_output, single_fidelity};
use crate::gaussian::network::ghz_state;
use crate::gaussian::{GaussianState, LinearForm, ReceiverAssignment};
use crate::measurement::{demonstrate_triple_basis_failure, FamilyDefects};
use crate::metrics::{mean_and_std_error, SweepSummary};
use crate::protocols::{gaussian_packet_state, gaussian_pair, EntangledTeleporter, Protocol, SingleTeleporter, TeleportRecord};
use crate::resources::{make_ghz_wavefunction, make_input_state, AmplitudeProfile, InputSpec, ResourceQuality};
use crate::wavefunction::{Particle, WaveFunction};

/// Largest deviation accepted by the basis check.
pub const BASIS_TOLERANCE: f64 = 1e-9;
/// Lowest fidelity accepted from ideal resources.
pub const IDEAL_FIDELITY_FLOOR: f64 = 1.0 - 1e-8;
/// Isometry defect the collective basis must exceed in the failure demonstration.
pub const TRIPLE_DEFECT_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    BasesCheck,
    TeleportSingle,
    TeleportEntangled,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    ThresholdFailed = 1,
    ValidationError = 2,
}

/// Rendered document, its exit status and any failures to report.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub document: String,
    pub exit: Exit,
    pub failures: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] Error),
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Report, CliError> {
    cfg.validate()?;
    match command {
        Command::BasesCheck => bases_check(cfg),
        Command::TeleportSingle => teleport_single(cfg),
        Command::TeleportEntangled if cfg.basis == BasisFamily::Triple => triple_failure(cfg),
        Command::TeleportEntangled => teleport_entangled(cfg),
        Command::Sweep => sweep(cfg),
    }
}

fn document(cfg: &RunConfig, records: Value, summary: Value) -> String {
    let doc = json!({ "config": cfg.as_map(), "records": records, "summary": summary });
    serde_json::to_string_pretty(&doc).expect("plain data") + "\n"
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>, summary: &[(&str, String)]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    if !summary.is_empty() {
        let parts: Vec<String> = summary.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(out, "# summary,{}", parts.join(","));
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data")
}

pub const BASES_HEADER: &str = "family,gram_deviation,completeness_deviation,probability_deviation,labels_checked";

fn bases_check(cfg: &RunConfig) -> Result<Report, CliError> {
    let grid = cfg.grid()?;
    let checks: Vec<BasisCheck> = [BasisFamily::Bell, BasisFamily::Triple, BasisFamily::Pi123]
        .into_iter()
        .map(|f| check_family(f, &grid, cfg.gram_labels, cfg.seed_base, cfg.execution))
        .collect::<crate::Result<_>>()?;
    let failures: Vec<String> = checks
        .iter()
        .filter(|c| !(c.max_deviation() < BASIS_TOLERANCE))
        .map(|c| format!("{}: max deviation {:e}", c.family.name(), c.max_deviation()))
        .collect();
    let max = checks.iter().map(BasisCheck::max_deviation).fold(0.0, f64::max);
    let passed = failures.is_empty();
    let document = match cfg.format {
        OutputFormat::Json => document(
            cfg,
            to_value(&checks),
            json!({ "max_deviation": max, "tolerance": BASIS_TOLERANCE, "passed": passed, "failures": failures }),
        ),
        OutputFormat::Csv => csv(
            BASES_HEADER,
            checks.iter().map(|c| {
                format!(
                    "{},{},{},{},{}",
                    c.family.name(),
                    c.gram_deviation,
                    c.completeness_deviation,
                    c.probability_deviation,
                    c.labels_checked
                )
            }),
            &[("max_deviation", max.to_string()), ("passed", passed.to_string())],
        ),
    };
    Ok(Report { document, exit: if passed { Exit::Success } else { Exit::ThresholdFailed }, failures })
}

pub const RECORD_HEADER: &str =
    "protocol,seed,resource,r,p,P,Q,density,fidelity,var_relative_position,var_total_momentum";

fn record_row(r: &TeleportRecord) -> String {
    let (mode, sq) = match r.resource_quality {
        ResourceQuality::Ideal => ("ideal", String::new()),
        ResourceQuality::Finite { r } => ("finite", r.to_string()),
    };
    let protocol = match r.protocol {
        Protocol::Single => "single",
        Protocol::Entangled => "entangled",
    };
    let [p, pp, qq] = r.classical_message;
    format!(
        "{protocol},{},{mode},{sq},{p},{pp},{qq},{},{},{},{}",
        r.seed,
        r.outcome.density,
        r.fidelity,
        opt(r.variances.map(|v| v.relative_position)),
        opt(r.variances.map(|v| v.total_momentum)),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSummary {
    pub runs: usize,
    pub mean_fidelity: f64,
    pub std_error: f64,
    pub min_fidelity: f64,
    /// Required minimum fidelity, when the resource makes one.
    pub fidelity_floor: Option<f64>,
    pub passed: bool,
}

fn summarize(records: &[TeleportRecord], ideal: bool, requested: Option<f64>) -> RunSummary {
    let f: Vec<f64> = records.iter().map(|r| r.fidelity).collect();
    let (mean_fidelity, std_error) = mean_and_std_error(&f);
    let min_fidelity = f.iter().copied().fold(f64::INFINITY, f64::min);
    let fidelity_floor = match (ideal.then_some(IDEAL_FIDELITY_FLOOR), requested) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    };
    let passed = fidelity_floor.is_none_or(|floor| min_fidelity >= floor);
    RunSummary { runs: f.len(), mean_fidelity, std_error, min_fidelity, fidelity_floor, passed }
}

fn records_report(cfg: &RunConfig, records: &[TeleportRecord]) -> Report {
    let summary = summarize(records, cfg.resource_ideal, cfg.min_fidelity);
    let document = match cfg.format {
        OutputFormat::Json => document(cfg, to_value(&records), to_value(&summary)),
        OutputFormat::Csv => csv(
            RECORD_HEADER,
            records.iter().map(record_row),
            &[
                ("runs", summary.runs.to_string()),
                ("mean_fidelity", summary.mean_fidelity.to_string()),
                ("std_error", summary.std_error.to_string()),
                ("min_fidelity", summary.min_fidelity.to_string()),
            ],
        ),
    };
    let failures = records
        .iter()
        .filter(|r| summary.fidelity_floor.is_some_and(|floor| r.fidelity < floor))
        .map(|r| format!("seed {}: fidelity {}", r.seed, r.fidelity))
        .collect::<Vec<_>>();
    Report { document, exit: if summary.passed { Exit::Success } else { Exit::ThresholdFailed }, failures }
}

/// One-particle input with the configured profile.
pub fn single_input(cfg: &RunConfig, grid: &crate::grid::Grid) -> crate::Result<WaveFunction> {
    let spec = InputSpec { q: 0.0, ..cfg.input_spec() };
    spec.validate(grid)?;
    let amps = Array1::from_vec(spec.profile_amplitudes(grid)).into_dyn();
    WaveFunction::from_amplitudes(*grid, &[Particle(1)], amps)
}

fn single_teleporter(cfg: &RunConfig, grid: &crate::grid::Grid, quality: ResourceQuality) -> crate::Result<SingleTeleporter> {
    let input = single_input(cfg, grid)?;
    Ok(SingleTeleporter::new(&input, quality)?.with_spec(InputSpec { q: 0.0, ..cfg.input_spec() }).with_sampling(cfg.sampling))
}

fn entangled_teleporter(cfg: &RunConfig, grid: &crate::grid::Grid, quality: ResourceQuality) -> crate::Result<EntangledTeleporter> {
    Ok(EntangledTeleporter::new(&cfg.input_spec(), quality, grid, cfg.assignment)?.with_sampling(cfg.sampling))
}

fn teleport_single(cfg: &RunConfig) -> Result<Report, CliError> {
    let grid = cfg.grid()?;
    let t = single_teleporter(cfg, &grid, cfg.quality())?;
    let records = t.run_batch(&cfg.seeds(), cfg.execution)?;
    Ok(records_report(cfg, &records))
}

fn teleport_entangled(cfg: &RunConfig) -> Result<Report, CliError> {
    let grid = cfg.grid()?;
    let t = entangled_teleporter(cfg, &grid, cfg.quality())?;
    let records = t.run_batch(&cfg.seeds(), cfg.execution)?;
    Ok(records_report(cfg, &records))
}

pub const DEFECT_HEADER: &str = "family,label,p,P,Q,R,min_norm,max_norm,isometry_defect,gram_defect";

fn defect_rows(d: &FamilyDefects) -> impl Iterator<Item = String> + '_ {
    d.rows.iter().map(move |r| {
        let label: Vec<String> = r.label.indices.iter().map(|i| i.to_string()).collect();
        let lo = r.norms.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = r.norms.iter().copied().fold(0.0, f64::max);
        format!(
            "{},{},{},{},{},{},{lo},{hi},{},{}",
            d.family.name(),
            label.join(" "),
            opt(r.values.p),
            r.values.momentum,
            r.values.offset,
            opt(r.values.second_offset),
            r.isometry_defect,
            r.gram_defect
        )
    })
}

fn triple_failure(cfg: &RunConfig) -> Result<Report, CliError> {
    let grid = cfg.grid()?;
    let spec = cfg.input_spec();
    let input = make_input_state(&spec, &grid)?;
    let resource = make_ghz_wavefunction(cfg.quality(), &grid)?;
    let tests: Vec<WaveFunction> = (0..cfg.test_states as u64)
        .map(|i| {
            let s = InputSpec { profile: AmplitudeProfile::RandomSmooth { seed: cfg.profile_seed.wrapping_add(i) }, q: spec.q };
            make_input_state(&s, &grid)
        })
        .collect::<crate::Result<_>>()?;
    let report =
        demonstrate_triple_basis_failure(&input, &resource, spec.lattice_q(&grid), &tests, cfg.seed_count, cfg.seed_base, cfg.execution)?;
    let (t, p) = (report.triple.max_isometry_defect, report.pi123.max_isometry_defect);
    let mut failures = Vec::new();
    if cfg.resource_ideal {
        if !(t > TRIPLE_DEFECT_FLOOR) {
            failures.push(format!("triple basis isometry defect {t} is not above {TRIPLE_DEFECT_FLOOR}"));
        }
        if !(p < BASIS_TOLERANCE) {
            failures.push(format!("pi123 basis isometry defect {p} is not below {BASIS_TOLERANCE}"));
        }
    }
    let document = match cfg.format {
        OutputFormat::Json => {
            let rows: Vec<Value> = [&report.triple, &report.pi123]
                .into_iter()
                .flat_map(|d| d.rows.iter().map(move |r| json!({ "family": d.family, "row": r })))
                .collect();
            document(
                cfg,
                Value::Array(rows),
                json!({
                    "triple_max_isometry_defect": t,
                    "triple_max_gram_defect": report.triple.max_gram_defect,
                    "pi123_max_isometry_defect": p,
                    "pi123_max_gram_defect": report.pi123.max_gram_defect,
                    "passed": failures.is_empty(),
                }),
            )
        }
        OutputFormat::Csv => csv(
            DEFECT_HEADER,
            defect_rows(&report.triple).chain(defect_rows(&report.pi123)),
            &[("triple_max_isometry_defect", t.to_string()), ("pi123_max_isometry_defect", p.to_string())],
        ),
    };
    Ok(Report { document, exit: if failures.is_empty() { Exit::Success } else { Exit::ThresholdFailed }, failures })
}

/// One point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub mean_fidelity: f64,
    pub std_error: f64,
    pub var_relative_position: Option<f64>,
    pub var_total_momentum: Option<f64>,
    pub runs: usize,
}

pub const SWEEP_HEADER: &str = "value,mean_fidelity,std_error,var_relative_position,var_total_momentum,runs";

fn lattice_row(cfg: &RunConfig, value: f64) -> crate::Result<SweepRow> {
    let mut local = cfg.clone();
    let quality = match cfg.sweep_parameter {
        SweepParameter::R => ResourceQuality::Finite { r: value },
        SweepParameter::NPoints => {
            local.n_points = value as usize;
            cfg.quality()
        }
    };
    let grid = local.grid()?;
    let records = match cfg.sweep_protocol {
        Protocol::Single => single_teleporter(&local, &grid, quality)?.run_batch(&cfg.seeds(), cfg.execution)?,
        Protocol::Entangled => entangled_teleporter(&local, &grid, quality)?.run_batch(&cfg.seeds(), cfg.execution)?,
    };
    let f: Vec<f64> = records.iter().map(|r| r.fidelity).collect();
    let (mean_fidelity, std_error) = mean_and_std_error(&f);
    let mean_of = |get: fn(&TeleportRecord) -> Option<f64>| -> Option<f64> {
        let v: Option<Vec<f64>> = records.iter().map(get).collect();
        v.map(|v| v.iter().sum::<f64>() / v.len() as f64)
    };
    Ok(SweepRow {
        value,
        mean_fidelity,
        std_error,
        var_relative_position: mean_of(|r| r.variances.map(|v| v.relative_position)),
        var_total_momentum: mean_of(|r| r.variances.map(|v| v.total_momentum)),
        runs: records.len(),
    })
}

fn gaussian_row(cfg: &RunConfig, r: f64) -> crate::Result<SweepRow> {
    let (fidelity, rel, tot) = match cfg.sweep_protocol {
        Protocol::Single => (single_fidelity(&gaussian_packet_state(cfg.width)?, r)?, None, None),
        Protocol::Entangled => {
            let q = cfg.q;
            let input = gaussian_pair(cfg.width, cfg.input_squeezing, q)?;
            let out = entangled_output(&input, &ghz_state(r), q, cfg.assignment)?;
            let target = match cfg.assignment {
                ReceiverAssignment::Standard => input.clone(),
                ReceiverAssignment::Swapped => swap_modes(&input)?,
            };
            let corr = entangled_correlations(&input, r, q, cfg.assignment)?;
            let total = out.variance(&(LinearForm::p(2, 0) + LinearForm::p(2, 1)))?;
            (out.fidelity_with_pure(&target)?, Some(corr.relative_position_variance), Some(total))
        }
    };
    Ok(SweepRow { value: r, mean_fidelity: fidelity, std_error: 0.0, var_relative_position: rel, var_total_momentum: tot, runs: 1 })
}

fn swap_modes(s: &GaussianState) -> crate::Result<GaussianState> {
    let m = nalgebra::DMatrix::from_row_slice(
        4,
        4,
        &[0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0],
    );
    s.transformed(&m)
}

fn sweep(cfg: &RunConfig) -> Result<Report, CliError> {
    if cfg.sweep_engine == SweepEngine::Gaussian && cfg.sweep_parameter == SweepParameter::NPoints {
        return Err(ConfigError::Invalid("the gaussian sweep engine has no grid; sweep r instead".into()).into());
    }
    let rows: Vec<SweepRow> = cfg
        .sweep_values
        .iter()
        .map(|&v| match cfg.sweep_engine {
            SweepEngine::Lattice => lattice_row(cfg, v),
            SweepEngine::Gaussian => gaussian_row(cfg, v),
        })
        .collect::<crate::Result<_>>()?;
    let parameter = match cfg.sweep_parameter {
        SweepParameter::R => "r",
        SweepParameter::NPoints => "n_points",
    };
    let samples: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.mean_fidelity]).collect();
    let mut summary = SweepSummary::from_samples(parameter, &cfg.sweep_values, &samples)?;
    summary.std_errors = rows.iter().map(|r| r.std_error).collect();
    summary.n_samples = rows.first().map_or(0, |r| r.runs);
    let last_change = match rows.as_slice() {
        [.., a, b] => Some((b.mean_fidelity - a.mean_fidelity).abs()),
        _ => None,
    };
    let increasing = summary.strictly_increasing();
    let document = match cfg.format {
        OutputFormat::Json => document(
            cfg,
            to_value(&rows),
            json!({ "curve": summary, "strictly_increasing": increasing, "last_change": last_change }),
        ),
        OutputFormat::Csv => csv(
            SWEEP_HEADER,
            rows.iter().map(|r| {
                format!(
                    "{},{},{},{},{},{}",
                    r.value,
                    r.mean_fidelity,
                    r.std_error,
                    opt(r.var_relative_position),
                    opt(r.var_total_momentum),
                    r.runs
                )
            }),
            &[("strictly_increasing", increasing.to_string()), ("last_change", opt(last_change))],
        ),
    };
    Ok(Report { document, exit: Exit::Success, failures: Vec::new() })
}
