use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{StepError, ValidityError};
use crate::dynamics::ModelId;

pub const DOMAIN_HEADER: [&str; 7] = [
    "model",
    "variable",
    "domain",
    "mae",
    "std",
    "n",
    "pct_increase",
];

pub const PER_TRAJECTORY_HEADER: [&str; 5] = ["trajectory", "ay_max", "model", "variable", "mae"];

/// Below this below-domain MAE a percentage increase is undefined.
const PCT_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variable {
    Vx,
    Vy,
    YawRate,
}

impl Variable {
    pub const ALL: [Variable; 3] = [Variable::Vx, Variable::Vy, Variable::YawRate];

    pub fn name(self) -> &'static str {
        match self {
            Variable::Vx => "Vx",
            Variable::Vy => "Vy",
            Variable::YawRate => "yaw_rate",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    Below,
    Above,
}

impl Domain {
    pub const ALL: [Domain; 2] = [Domain::Below, Domain::Above];

    pub fn name(self) -> &'static str {
        match self {
            Domain::Below => "below",
            Domain::Above => "above",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Absolute errors of one model on one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryErrors {
    pub trajectory: String,
    /// Peak reference |a_y| of the trajectory.
    pub ay_max: f64,
    pub model: ModelId,
    pub errors: Vec<StepError>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainRow {
    pub model: ModelId,
    pub variable: Variable,
    pub domain: Domain,
    /// `None` for an empty domain.
    pub mae: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub trajectory: String,
    pub ay_max: f64,
    pub model: ModelId,
    pub variable: Variable,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainErrorReport {
    pub threshold: f64,
    /// Ordered by model, variable, then below before above.
    pub rows: Vec<DomainRow>,
    /// Sorted by `ay_max`.
    pub per_trajectory: Vec<TrajectoryRow>,
}

impl DomainErrorReport {
    pub fn row(&self, model: ModelId, variable: Variable, domain: Domain) -> Option<&DomainRow> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.variable == variable && r.domain == domain)
    }

    pub fn mae(&self, model: ModelId, variable: Variable, domain: Domain) -> Option<f64> {
        self.row(model, variable, domain).and_then(|r| r.mae)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PctRow {
    pub model: ModelId,
    pub variable: Variable,
    /// `None` when either domain is empty or the below MAE vanishes.
    pub pct: Option<f64>,
}

/// Groups whole trajectories by `ay_max > threshold` and pools their
/// absolute errors per model, variable and domain.
pub fn split_by_domain(
    results: &[TrajectoryErrors],
    threshold: f64,
) -> Result<DomainErrorReport, ValidityError> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(ValidityError::Threshold(threshold));
    }
    let mut models: Vec<ModelId> = results.iter().map(|r| r.model).collect();
    models.sort();
    models.dedup();

    let mut rows = Vec::new();
    for &model in &models {
        for variable in Variable::ALL {
            for domain in Domain::ALL {
                let samples: Vec<f64> = results
                    .iter()
                    .filter(|r| r.model == model && domain_of(r.ay_max, threshold) == domain)
                    .flat_map(|r| r.errors.iter().map(move |e| e.get(variable)))
                    .collect();
                let (mae, std) = mean_std(&samples);
                rows.push(DomainRow {
                    model,
                    variable,
                    domain,
                    mae,
                    std,
                    n: samples.len(),
                });
            }
        }
    }

    let mut per_trajectory = Vec::new();
    for r in results {
        let m = super::mae(&r.errors);
        for variable in Variable::ALL {
            per_trajectory.push(TrajectoryRow {
                trajectory: r.trajectory.clone(),
                ay_max: r.ay_max,
                model: r.model,
                variable,
                mae: m[variable.index()],
            });
        }
    }
    per_trajectory.sort_by(|a, b| {
        a.ay_max
            .total_cmp(&b.ay_max)
            .then_with(|| a.trajectory.cmp(&b.trajectory))
            .then_with(|| a.model.cmp(&b.model))
            .then_with(|| a.variable.cmp(&b.variable))
    });

    Ok(DomainErrorReport {
        threshold,
        rows,
        per_trajectory,
    })
}

fn domain_of(ay_max: f64, threshold: f64) -> Domain {
    if ay_max > threshold {
        Domain::Above
    } else {
        Domain::Below
    }
}

fn mean_std(samples: &[f64]) -> (Option<f64>, Option<f64>) {
    if samples.is_empty() {
        return (None, None);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std = if samples.len() > 1 {
        (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(std))
}

/// `100 (MAE_above - MAE_below) / MAE_below` per model and variable.
pub fn percent_increase(report: &DomainErrorReport) -> Vec<PctRow> {
    let mut out = Vec::new();
    let mut seen = Vec::new();
    for r in &report.rows {
        if seen.contains(&(r.model, r.variable)) {
            continue;
        }
        seen.push((r.model, r.variable));
        let below = report.mae(r.model, r.variable, Domain::Below);
        let above = report.mae(r.model, r.variable, Domain::Above);
        let pct = match (below, above) {
            (Some(b), Some(a)) if b >= PCT_GUARD => Some(100.0 * (a - b) / b),
            _ => None,
        };
        out.push(PctRow {
            model: r.model,
            variable: r.variable,
            pct,
        });
    }
    out
}

/// One line of a domain report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainRecord {
    pub model: String,
    pub variable: String,
    pub domain: String,
    pub mae: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
    pub pct_increase: Option<f64>,
}

impl DomainRecord {
    pub fn from_report(report: &DomainErrorReport) -> Vec<Self> {
        let pct = percent_increase(report);
        report
            .rows
            .iter()
            .map(|r| DomainRecord {
                model: r.model.name().into(),
                variable: r.variable.name().into(),
                domain: r.domain.name().into(),
                mae: r.mae,
                std: r.std,
                n: r.n,
                pct_increase: if r.domain == Domain::Above {
                    pct.iter()
                        .find(|p| p.model == r.model && p.variable == r.variable)
                        .and_then(|p| p.pct)
                } else {
                    None
                },
            })
            .collect()
    }
}

fn io_error(path: &Path, e: impl fmt::Display) -> ValidityError {
    ValidityError::Report(format!("{}: {e}", path.display()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Writes the domain report; the percentage increase appears on the
/// above-domain row of each model and variable.
pub fn write_domain_csv(path: &Path, records: &[DomainRecord]) -> Result<(), ValidityError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(DOMAIN_HEADER)
        .map_err(|e| io_error(path, e))?;
    for r in records {
        w.write_record([
            r.model.clone(),
            r.variable.clone(),
            r.domain.clone(),
            opt(r.mae),
            opt(r.std),
            r.n.to_string(),
            opt(r.pct_increase),
        ])
        .map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn read_domain_csv(path: &Path) -> Result<Vec<DomainRecord>, ValidityError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let header = r.headers().map_err(|e| io_error(path, e))?;
    for col in DOMAIN_HEADER {
        if !header.iter().any(|h| h == col) {
            return Err(io_error(path, format!("missing column '{col}'")));
        }
    }
    r.deserialize()
        .map(|rec| rec.map_err(|e| io_error(path, e)))
        .collect()
}

pub fn write_per_trajectory_csv(path: &Path, rows: &[TrajectoryRow]) -> Result<(), ValidityError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(PER_TRAJECTORY_HEADER)
        .map_err(|e| io_error(path, e))?;
    for r in rows {
        w.write_record([
            r.trajectory.clone(),
            format!("{}", r.ay_max),
            r.model.name().to_string(),
            r.variable.name().to_string(),
            format!("{}", r.mae),
        ])
        .map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// Percentage-increase table `model,variable,mae_below,mae_above,pct_increase`.
pub fn write_pct_csv(path: &Path, report: &DomainErrorReport) -> Result<(), ValidityError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record([
        "model",
        "variable",
        "mae_below",
        "mae_above",
        "pct_increase",
    ])
    .map_err(|e| io_error(path, e))?;
    for p in percent_increase(report) {
        w.write_record([
            p.model.name().to_string(),
            p.variable.name().to_string(),
            opt(report.mae(p.model, p.variable, Domain::Below)),
            opt(report.mae(p.model, p.variable, Domain::Above)),
            opt(p.pct),
        ])
        .map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}
