use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use vehval_core::dynamics::{CandidateModel, ModelId};
use vehval_core::estimation::{
    covariance_from_errors, exact_model_check, run_observer, write_estimate_csv, EstimationError,
    ExactModelCheck, NoiseConfig,
};
use vehval_core::plant::{
    derive_seed, generate_maneuver, read_trajectory, sample_sensors, write_trajectory, PlantError,
    Trajectory, TrajectoryMeta,
};
use vehval_core::validity::{
    compare_trajectory, read_domain_csv, split_by_domain, write_domain_csv, write_pct_csv,
    write_per_trajectory_csv, DomainErrorReport, DomainRecord, TrajectoryErrors, DOMAIN_HEADER,
    PER_TRAJECTORY_HEADER,
};

use crate::config::ExperimentConfig;
use crate::manifest::{bundle_dirs, remove_manifest, write_manifest, TRAJECTORY_DIR};
use crate::{io_error, CliError};

pub const VALIDITY_DIR: &str = "validity";
pub const OBSERVER_DIR: &str = "observer";
pub const REPORT_DIR: &str = "report";
pub const DOMAIN_FILE: &str = "domain.csv";
pub const PER_TRAJECTORY_FILE: &str = "per_trajectory.csv";
pub const PCT_FILE: &str = "pct_increase.csv";
pub const STATUS_FILE: &str = "status.csv";
pub const ESTIMATE_DIR: &str = "estimates";
pub const CONSOLIDATED_FILE: &str = "domain_long.csv";
pub const LONG_PER_TRAJECTORY_FILE: &str = "per_trajectory_long.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

/// Frames of the exact-model self-check.
pub const SELF_CHECK_FRAMES: usize = 1500;

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

/// Outcome of one maneuver of the suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedTrajectory {
    pub name: String,
    pub target_ay_max: f64,
    /// `None` when every attempt left the envelope.
    pub realized_ay_max: Option<f64>,
    pub reached: bool,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub trajectories: Vec<SimulatedTrajectory>,
}

impl SimulateSummary {
    pub fn written(&self) -> usize {
        self.trajectories
            .iter()
            .filter(|t| t.realized_ay_max.is_some())
            .count()
    }
}

pub fn trajectory_name(index: usize) -> String {
    format!("traj_{index:03}")
}

/// Generates the maneuver suite and writes one bundle per maneuver.
pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<SimulateSummary, CliError> {
    let params = cfg.plant_params().map_err(CliError::Usage)?;
    let specs = cfg.suite_specs();
    if specs.is_empty() {
        return Err(CliError::Usage("the maneuver suite is empty".into()));
    }
    prepare_dir(out)?;
    remove_manifest(out)?;
    let traj_root = out.join(TRAJECTORY_DIR);
    if traj_root.is_dir() {
        for old in bundle_dirs(out)? {
            fs::remove_dir_all(&old).map_err(|e| io_error(&old, e))?;
        }
    }
    prepare_dir(&traj_root)?;

    let results = pool(cfg.jobs)?.install(|| {
        specs
            .par_iter()
            .enumerate()
            .map(|(i, spec)| -> Result<SimulatedTrajectory, CliError> {
                let name = trajectory_name(i);
                let run = match generate_maneuver(spec, &params, &cfg.controller) {
                    Ok(run) => run,
                    Err(e @ PlantError::Envelope { .. }) => {
                        return Ok(SimulatedTrajectory {
                            name,
                            target_ay_max: spec.target_ay_max,
                            realized_ay_max: None,
                            reached: false,
                            detail: Some(e.to_string()),
                        })
                    }
                    Err(e) => return Err(CliError::Numerical(format!("{name}: {e}"))),
                };
                let noise_seed = derive_seed(spec.seed, 1);
                let sensors = sample_sensors(&run.log, &cfg.noise, noise_seed)
                    .map_err(|e| CliError::Usage(e.to_string()))?;
                let mut traj = Trajectory {
                    truth: run.log.truth,
                    sensors,
                    meta: TrajectoryMeta {
                        name: name.clone(),
                        source: "plant".into(),
                        maneuver: Some(spec.kind.name().into()),
                        target_ay_max: Some(spec.target_ay_max),
                        initial_speed: Some(spec.initial_speed),
                        duration: Some(spec.duration),
                        maneuver_seed: Some(spec.seed),
                        noise_seed: Some(noise_seed),
                        realized_ay_max: 0.0,
                        target_reached: run.reached,
                        note: None,
                    },
                };
                traj.meta.realized_ay_max = traj.ay_max();
                let detail = (!run.reached).then(|| {
                    format!(
                        "target {:.3} m/s^2 not reached; closest run peaked at {:.3} m/s^2",
                        spec.target_ay_max, traj.meta.realized_ay_max
                    )
                });
                traj.meta.note = detail.clone();
                write_trajectory(&traj_root.join(&name), &traj)?;
                Ok(SimulatedTrajectory {
                    name,
                    target_ay_max: spec.target_ay_max,
                    realized_ay_max: Some(traj.meta.realized_ay_max),
                    reached: run.reached,
                    detail,
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let summary = SimulateSummary {
        trajectories: results,
    };
    if summary.written() == 0 {
        return Err(CliError::Numerical(
            "no maneuver of the suite could be simulated".into(),
        ));
    }
    write_manifest(out, cfg)?;
    Ok(summary)
}

/// Reads every bundle of `data`.
pub fn load_bundles(data: &Path, jobs: usize) -> Result<Vec<Trajectory>, CliError> {
    let dirs = bundle_dirs(data)?;
    if dirs.is_empty() {
        return Err(CliError::Data(format!(
            "no trajectory bundles in {}",
            data.join(TRAJECTORY_DIR).display()
        )));
    }
    pool(jobs)?.install(|| {
        dirs.par_iter()
            .map(|d| {
                let mut t = read_trajectory(d)?;
                if t.meta.name.is_empty() {
                    t.meta.name = d
                        .file_name()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default();
                }
                Ok(t)
            })
            .collect()
    })
}

fn write_domain_outputs(dir: &Path, report: &DomainErrorReport) -> Result<(), CliError> {
    prepare_dir(dir)?;
    write_domain_csv(&dir.join(DOMAIN_FILE), &DomainRecord::from_report(report))?;
    write_per_trajectory_csv(&dir.join(PER_TRAJECTORY_FILE), &report.per_trajectory)?;
    write_pct_csv(&dir.join(PCT_FILE), report)?;
    Ok(())
}

fn models(cfg: &ExperimentConfig) -> Result<Vec<CandidateModel>, CliError> {
    cfg.candidate_models().map_err(CliError::Usage)
}

/// One-step comparison of every selected model on every bundle.
pub fn compare(
    cfg: &ExperimentConfig,
    out: &Path,
    data: &Path,
) -> Result<DomainErrorReport, CliError> {
    let models = models(cfg)?;
    let trajs = load_bundles(data, cfg.jobs)?;
    prepare_dir(out)?;
    remove_manifest(out)?;
    let tasks: Vec<(&Trajectory, &CandidateModel)> = trajs
        .iter()
        .flat_map(|t| models.iter().map(move |m| (t, m)))
        .collect();
    let results = pool(cfg.jobs)?.install(|| {
        tasks
            .par_iter()
            .map(|(t, m)| {
                let errors = compare_trajectory(t, m).map_err(|e| {
                    CliError::from(e).context(&format!("{} / {}", t.meta.name, m.id))
                })?;
                Ok(TrajectoryErrors {
                    trajectory: t.meta.name.clone(),
                    ay_max: t.ay_max(),
                    model: m.id,
                    errors,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let report = split_by_domain(&results, cfg.threshold)?;
    write_domain_outputs(&out.join(VALIDITY_DIR), &report)?;
    write_manifest(out, cfg)?;
    Ok(report)
}

impl CliError {
    fn context(self, what: &str) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{what}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{what}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{what}: {m}")),
        }
    }
}

/// Result of one observer on one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverStatus {
    pub trajectory: String,
    pub model: ModelId,
    pub noise: Option<NoiseConfig>,
    /// `None` on success.
    pub failure: Option<String>,
    pub mae: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserveSummary {
    pub report: DomainErrorReport,
    pub status: Vec<ObserverStatus>,
    pub self_check: Option<ExactModelCheck>,
}

impl ObserveSummary {
    pub fn failed(&self) -> impl Iterator<Item = &ObserverStatus> {
        self.status.iter().filter(|s| s.failure.is_some())
    }
}

pub fn estimate_file_name(trajectory: &str, model: ModelId) -> String {
    format!("{trajectory}_{}.csv", model.cli_name())
}

/// EKF observers with per-trajectory noise selection on every bundle.
pub fn observe(
    cfg: &ExperimentConfig,
    out: &Path,
    data: &Path,
    with_self_check: bool,
) -> Result<ObserveSummary, CliError> {
    let models = models(cfg)?;
    let trajs = load_bundles(data, cfg.jobs)?;
    prepare_dir(out)?;
    remove_manifest(out)?;
    let obs_dir = out.join(OBSERVER_DIR);
    let est_dir = obs_dir.join(ESTIMATE_DIR);
    if est_dir.is_dir() {
        fs::remove_dir_all(&est_dir).map_err(|e| io_error(&est_dir, e))?;
    }
    prepare_dir(&est_dir)?;

    let tasks: Vec<(&Trajectory, &CandidateModel)> = trajs
        .iter()
        .flat_map(|t| models.iter().map(move |m| (t, m)))
        .collect();
    let runs = pool(cfg.jobs)?.install(|| {
        tasks
            .par_iter()
            .map(|(t, m)| {
                let mut status = ObserverStatus {
                    trajectory: t.meta.name.clone(),
                    model: m.id,
                    noise: None,
                    failure: None,
                    mae: None,
                };
                let outcome = covariance_from_errors(t, m).and_then(|noise| {
                    status.noise = Some(noise);
                    run_observer(t, m, &noise)
                });
                match outcome {
                    Ok(run) => {
                        let path = est_dir.join(estimate_file_name(&t.meta.name, m.id));
                        write_estimate_csv(&path, &run.estimates)
                            .map_err(|e| CliError::Data(e.to_string()))?;
                        status.mae = Some(run.mae());
                        let errors = TrajectoryErrors {
                            trajectory: t.meta.name.clone(),
                            ay_max: t.ay_max(),
                            model: m.id,
                            errors: run.errors(),
                        };
                        Ok((status, Some(errors)))
                    }
                    Err(EstimationError::Io(msg)) => Err(CliError::Data(msg)),
                    Err(e) => {
                        status.failure = Some(e.to_string());
                        Ok((status, None))
                    }
                }
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let (status, errors): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let errors: Vec<TrajectoryErrors> = errors.into_iter().flatten().collect();
    let report = split_by_domain(&errors, cfg.threshold)?;
    write_domain_outputs(&obs_dir, &report)?;
    write_status_csv(&obs_dir.join(STATUS_FILE), &status)?;
    let self_check = if with_self_check {
        Some(self_check()?)
    } else {
        None
    };
    write_manifest(out, cfg)?;
    Ok(ObserveSummary {
        report,
        status,
        self_check,
    })
}

fn write_status_csv(path: &Path, status: &[ObserverStatus]) -> Result<(), CliError> {
    let err = |e: csv::Error| io_error(path, e);
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record([
        "trajectory",
        "model",
        "status",
        "q_Vx",
        "q_Vy",
        "q_yaw_rate",
        "r_ax",
        "r_ay",
        "r_yaw_rate",
        "detail",
    ])
    .map_err(err)?;
    for s in status {
        let mut row = vec![
            s.trajectory.clone(),
            s.model.name().to_string(),
            if s.failure.is_some() { "failed" } else { "ok" }.to_string(),
        ];
        match &s.noise {
            Some(n) => row.extend(n.q.iter().chain(&n.r).map(|v| v.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), 6)),
        }
        row.push(s.failure.clone().unwrap_or_default());
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// Observer on data generated by the bicycle-Pacejka model itself.
pub fn self_check() -> Result<ExactModelCheck, CliError> {
    exact_model_check(ModelId::DbmPacejka, SELF_CHECK_FRAMES, 1)
        .map_err(|e| CliError::Numerical(format!("self-check: {e}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub consolidated: PathBuf,
    /// Domain rows by source.
    pub rows: Vec<(String, DomainRecord)>,
    pub warnings: Vec<String>,
    /// Text printed to standard output.
    pub text: String,
}

const SOURCES: [(&str, &str); 2] = [("validity", VALIDITY_DIR), ("observer", OBSERVER_DIR)];

/// Merges the validity and observer reports into long-format tables.
pub fn report(cfg: &ExperimentConfig, out: &Path) -> Result<ReportSummary, CliError> {
    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    let mut long_rows: Vec<Vec<String>> = Vec::new();
    for (source, dir) in SOURCES {
        let domain = out.join(dir).join(DOMAIN_FILE);
        if !domain.is_file() {
            warnings.push(format!(
                "{} missing; {source} rows omitted",
                domain.display()
            ));
            continue;
        }
        rows.extend(
            read_domain_csv(&domain)?
                .into_iter()
                .map(|r| (source.to_string(), r)),
        );
        let per = out.join(dir).join(PER_TRAJECTORY_FILE);
        if !per.is_file() {
            warnings.push(format!("{} missing", per.display()));
            continue;
        }
        let mut r = csv::Reader::from_path(&per).map_err(|e| io_error(&per, e))?;
        let header = r.headers().map_err(|e| io_error(&per, e))?.clone();
        if header.iter().ne(PER_TRAJECTORY_HEADER) {
            return Err(io_error(&per, "unexpected header"));
        }
        for rec in r.records() {
            let rec = rec.map_err(|e| io_error(&per, e))?;
            long_rows.push(
                std::iter::once(source.to_string())
                    .chain(rec.iter().map(String::from))
                    .collect(),
            );
        }
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!(
            "nothing to report in {}: run compare or observe first",
            out.display()
        )));
    }
    prepare_dir(out)?;
    remove_manifest(out)?;
    let dir = out.join(REPORT_DIR);
    prepare_dir(&dir)?;

    let consolidated = dir.join(CONSOLIDATED_FILE);
    {
        let err = |e: csv::Error| io_error(&consolidated, e);
        let mut w = csv::Writer::from_path(&consolidated).map_err(err)?;
        w.write_record(std::iter::once("source").chain(DOMAIN_HEADER))
            .map_err(err)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (source, r) in &rows {
            w.write_record([
                source.clone(),
                r.model.clone(),
                r.variable.clone(),
                r.domain.clone(),
                opt(r.mae),
                opt(r.std),
                r.n.to_string(),
                opt(r.pct_increase),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| io_error(&consolidated, e))?;
    }
    let long = dir.join(LONG_PER_TRAJECTORY_FILE);
    {
        let err = |e: csv::Error| io_error(&long, e);
        let mut w = csv::Writer::from_path(&long).map_err(err)?;
        w.write_record(std::iter::once("source").chain(PER_TRAJECTORY_HEADER))
            .map_err(err)?;
        for r in &long_rows {
            w.write_record(r).map_err(err)?;
        }
        w.flush().map_err(|e| io_error(&long, e))?;
    }

    let mut text =
        String::from("percentage increase of the MAE from below to above the threshold\n");
    for (source, r) in rows.iter().filter(|(_, r)| r.domain == "above") {
        let pct = match r.pct_increase {
            Some(p) => format!("{p:+.1}%"),
            None => "n/a".into(),
        };
        text.push_str(&format!(
            "{source:9} {:12} {:9} {pct}\n",
            r.model, r.variable
        ));
    }
    if !warnings.is_empty() {
        text.push_str("warnings:\n");
        for w in &warnings {
            text.push_str(&format!("  {w}\n"));
        }
    }
    let summary = dir.join(SUMMARY_FILE);
    fs::write(&summary, &text).map_err(|e| io_error(&summary, e))?;
    write_manifest(out, cfg)?;
    Ok(ReportSummary {
        consolidated,
        rows,
        warnings,
        text,
    })
}
