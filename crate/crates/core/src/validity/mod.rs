//! One-step model validity analysis: every comparison step restarts the
//! candidate model from the reference state, so errors never accumulate.

mod report;
mod synthetic;

pub use report::{
    percent_increase, read_domain_csv, split_by_domain, write_domain_csv, write_pct_csv,
    write_per_trajectory_csv, Domain, DomainErrorReport, DomainRecord, DomainRow, PctRow,
    TrajectoryErrors, TrajectoryRow, Variable, DOMAIN_HEADER, PER_TRAJECTORY_HEADER,
};
pub use synthetic::synthesize_model_trajectory;

use thiserror::Error;

use crate::dynamics::{CandidateModel, DynamicsError, ModelState, Seed};
use crate::plant::{Trajectory, TrajectoryError};

/// Candidate-model step [s], matching the sensor period.
pub const MODEL_DT: f64 = 0.02;

/// Allowed deviation of a sensor period from [`MODEL_DT`] [s].
const PERIOD_TOL: f64 = 1e-6;

/// Default domain threshold: half of standard gravity [m/s^2].
pub const DEFAULT_THRESHOLD: f64 = 0.5 * 9.81;

#[derive(Debug, Error)]
pub enum ValidityError {
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("trajectory '{0}' needs at least two sensor frames")]
    TooShort(String),
    #[error("sensor period {found} s at frame {index} differs from the model step {MODEL_DT} s")]
    Period { index: usize, found: f64 },
    #[error("step {index}: {source}")]
    Dynamics {
        index: usize,
        #[source]
        source: DynamicsError,
    },
    #[error("domain threshold must be positive, got {0}")]
    Threshold(f64),
    #[error("{0}")]
    Report(String),
}

/// Signed one-step residual `prediction - truth` for `(V_x, V_y, psi_dot)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResidual {
    /// Time of the predicted frame [s].
    pub t: f64,
    pub residual: [f64; 3],
    /// Reference lateral acceleration at the predicted frame.
    pub ay_truth: f64,
}

/// Absolute one-step error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepError {
    pub t: f64,
    pub e_vx: f64,
    pub e_vy: f64,
    pub e_yaw_rate: f64,
    pub ay_truth: f64,
}

impl StepError {
    pub fn get(&self, v: Variable) -> f64 {
        match v {
            Variable::Vx => self.e_vx,
            Variable::Vy => self.e_vy,
            Variable::YawRate => self.e_yaw_rate,
        }
    }
}

impl From<StepResidual> for StepError {
    fn from(r: StepResidual) -> Self {
        Self {
            t: r.t,
            e_vx: r.residual[0].abs(),
            e_vy: r.residual[1].abs(),
            e_yaw_rate: r.residual[2].abs(),
            ay_truth: r.ay_truth,
        }
    }
}

/// Checks timing and returns the truth index of every sensor frame.
pub fn comparison_grid(traj: &Trajectory) -> Result<Vec<usize>, ValidityError> {
    traj.validate()?;
    if traj.sensors.len() < 2 {
        return Err(ValidityError::TooShort(traj.meta.name.clone()));
    }
    for (k, w) in traj.sensors.windows(2).enumerate() {
        let dt = w[1].t - w[0].t;
        if (dt - MODEL_DT).abs() > PERIOD_TOL {
            return Err(ValidityError::Period {
                index: k + 1,
                found: dt,
            });
        }
    }
    Ok(traj.sensor_truth_index()?)
}

/// Reference seed at sensor frame `k`, with `truth_index` its truth frame.
pub fn seed_at(traj: &Trajectory, k: usize, truth_index: usize) -> Seed {
    let f = &traj.truth[truth_index];
    Seed {
        x: f.x,
        y: f.y,
        psi: f.psi,
        vx: f.vx,
        vy: f.vy,
        yaw_rate: f.yaw_rate,
        accel: crate::dynamics::Accel { ax: f.ax, ay: f.ay },
        wheel_speeds: traj.sensors[k].wheel_speeds,
    }
}

/// Model state placed on the reference at sensor frame `k`.
pub fn seed_state(
    traj: &Trajectory,
    model: &CandidateModel,
    k: usize,
    grid: &[usize],
) -> ModelState {
    model.seed(&seed_at(traj, k, grid[k]))
}

/// Prediction of one step from the reference at sensor frame `k`, driven by
/// the sensor inputs at `k + 1`.
pub fn one_step(
    traj: &Trajectory,
    model: &CandidateModel,
    k: usize,
    grid: &[usize],
) -> Result<StepResidual, ValidityError> {
    let state = seed_state(traj, model, k, grid);
    let input = traj.sensors[k + 1].input();
    let next = model
        .step(&state, &input, MODEL_DT)
        .map_err(|source| ValidityError::Dynamics { index: k, source })?;
    let truth = &traj.truth[grid[k + 1]];
    let z = next.reduced();
    Ok(StepResidual {
        t: truth.t,
        residual: [z[0] - truth.vx, z[1] - truth.vy, z[2] - truth.yaw_rate],
        ay_truth: truth.ay,
    })
}

/// Signed residuals over the whole comparison grid (N sensor frames give
/// N - 1 residuals).
pub fn compare_trajectory_signed(
    traj: &Trajectory,
    model: &CandidateModel,
) -> Result<Vec<StepResidual>, ValidityError> {
    let grid = comparison_grid(traj)?;
    (0..grid.len() - 1)
        .map(|k| one_step(traj, model, k, &grid))
        .collect()
}

pub fn compare_trajectory(
    traj: &Trajectory,
    model: &CandidateModel,
) -> Result<Vec<StepError>, ValidityError> {
    Ok(compare_trajectory_signed(traj, model)?
        .into_iter()
        .map(StepError::from)
        .collect())
}

/// Mean absolute error per variable.
pub fn mae(errors: &[StepError]) -> [f64; 3] {
    let n = errors.len().max(1) as f64;
    let mut sum = [0.0; 3];
    for e in errors {
        sum[0] += e.e_vx;
        sum[1] += e.e_vy;
        sum[2] += e.e_yaw_rate;
    }
    sum.map(|s| s / n)
}
