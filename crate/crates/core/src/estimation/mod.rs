//! EKF observers for `(V_x, V_y, psi_dot)` built on the candidate models.
//!
//! Pose, load-transfer memory and four-wheel spin states ride along in a
//! carrier model state; only the three velocities are estimated.

mod filter;
mod jacobian;
mod scenario;

pub use filter::{predict, update, Correction, FilterModel, Gaussian};
pub use jacobian::{fd_step, jacobian_fd, jacobian_fd_step};
pub use scenario::{
    exact_model_check, excitation, ExactModelCheck, COVARIANCE_TOL, NIS_RANGE, SETTLE_ERROR,
    SETTLE_TIME, TRACKING_MAE,
};

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::dynamics::{CandidateModel, ControlInput, DynamicsError, ModelId, ModelState};
use crate::plant::{SensorFrame, Trajectory};
use crate::validity::{
    compare_trajectory_signed, comparison_grid, seed_at, StepError, ValidityError, MODEL_DT,
};

/// Initial covariance diagonal.
pub const P0: f64 = 1e-2;

/// Lower bound on every noise variance.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Shortest trajectory accepted for covariance selection [sensor frames].
pub const MIN_COVARIANCE_STEPS: usize = 100;

pub const ESTIMATE_HEADER: [&str; 7] = [
    "t",
    "Vx_hat",
    "Vy_hat",
    "yaw_rate_hat",
    "Vx_err",
    "Vy_err",
    "yaw_rate_err",
];

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("jacobian: {0}")]
    Jacobian(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("innovation covariance is singular (condition {condition:e})")]
    SingularInnovation { condition: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Validity(#[from] ValidityError),
    #[error("invalid noise configuration: {0}")]
    Noise(String),
    #[error("filter fault at step {step}: {source}")]
    Fault {
        step: usize,
        #[source]
        source: Box<EstimationError>,
    },
    #[error("{0}")]
    Io(String),
}

impl EstimationError {
    fn at(self, step: usize) -> Self {
        EstimationError::Fault {
            step,
            source: Box::new(self),
        }
    }
}

/// Diagonal process and measurement variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// `(V_x, V_y, psi_dot)`
    pub q: [f64; 3],
    /// `(a_x, a_y, psi_dot)`
    pub r: [f64; 3],
}

impl NoiseConfig {
    pub fn uniform(q: f64, r: f64) -> Self {
        Self {
            q: [q; 3],
            r: [r; 3],
        }
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        if self
            .q
            .iter()
            .chain(&self.r)
            .all(|v| *v > 0.0 && v.is_finite())
        {
            Ok(())
        } else {
            Err(EstimationError::Noise(format!("{self:?}")))
        }
    }

    pub fn q_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(self.q))
    }

    pub fn r_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(self.r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Measurement {
    pub ax: f64,
    pub ay: f64,
    pub yaw_rate: f64,
}

impl Measurement {
    pub fn vector(&self) -> Vector3<f64> {
        Vector3::new(self.ax, self.ay, self.yaw_rate)
    }
}

impl From<&SensorFrame> for Measurement {
    fn from(s: &SensorFrame) -> Self {
        Self {
            ax: s.ax,
            ay: s.ay,
            yaw_rate: s.yaw_rate,
        }
    }
}

/// Filter estimate plus the model state it lives in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfState {
    pub z: Vector3<f64>,
    pub p: Matrix3<f64>,
    pub carrier: ModelState,
}

impl EkfState {
    pub fn new(carrier: ModelState, p: Matrix3<f64>) -> Self {
        Self {
            z: Vector3::from(carrier.reduced()),
            p,
            carrier,
        }
    }

    fn gaussian(&self) -> Gaussian<3> {
        Gaussian::new(self.z, self.p)
    }
}

/// A candidate model frozen at one input and carrier state.
pub struct VehicleSystem<'a> {
    pub model: &'a CandidateModel,
    pub carrier: ModelState,
    pub input: ControlInput,
    pub dt: f64,
}

impl VehicleSystem<'_> {
    fn place(&self, z: &Vector3<f64>) -> ModelState {
        self.carrier.with_reduced([z[0], z[1], z[2]])
    }

    /// Full model state after one step from `z`.
    pub fn step_full(&self, z: &Vector3<f64>) -> Result<ModelState, EstimationError> {
        Ok(self.model.step(&self.place(z), &self.input, self.dt)?)
    }
}

impl FilterModel<3, 3> for VehicleSystem<'_> {
    fn transition(&self, z: &Vector3<f64>) -> Result<Vector3<f64>, EstimationError> {
        Ok(Vector3::from(self.step_full(z)?.reduced()))
    }

    fn observe(&self, z: &Vector3<f64>) -> Result<Vector3<f64>, EstimationError> {
        Ok(Vector3::from(
            self.model.measure(&self.place(z), &self.input)?,
        ))
    }
}

pub fn ekf_predict(
    state: &EkfState,
    input: &ControlInput,
    dt: f64,
    model: &CandidateModel,
    q: &Matrix3<f64>,
) -> Result<EkfState, EstimationError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(EstimationError::Dynamics(DynamicsError::InvalidStep(dt)));
    }
    let system = VehicleSystem {
        model,
        carrier: state.carrier,
        input: *input,
        dt,
    };
    let out = predict(&state.gaussian(), &system, q)?;
    let carrier = system.step_full(&state.z)?;
    Ok(EkfState {
        z: out.mean,
        p: out.cov,
        carrier,
    })
}

/// Measurement update; also returns the NIS.
pub fn ekf_update(
    state: &EkfState,
    m: &Measurement,
    input: &ControlInput,
    model: &CandidateModel,
    r: &Matrix3<f64>,
) -> Result<(EkfState, f64), EstimationError> {
    let system = VehicleSystem {
        model,
        carrier: state.carrier,
        input: *input,
        dt: MODEL_DT,
    };
    let c = update(&state.gaussian(), &system, &m.vector(), r)?;
    let z = c.posterior.mean;
    Ok((
        EkfState {
            z,
            p: c.posterior.cov,
            carrier: state.carrier.with_reduced([z[0], z[1], z[2]]),
        },
        c.nis,
    ))
}

fn variance(samples: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = samples.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = samples.clone().sum::<f64>() / n as f64;
    samples.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Per-trajectory noise selection: `Q` from the variance of the model's
/// signed one-step errors, `R` from the variance of sensor minus reference.
pub fn covariance_from_errors(
    traj: &Trajectory,
    model: &CandidateModel,
) -> Result<NoiseConfig, EstimationError> {
    let grid = comparison_grid(traj)?;
    if grid.len() < MIN_COVARIANCE_STEPS {
        return Err(ValidityError::TooShort(traj.meta.name.clone()).into());
    }
    let residuals = compare_trajectory_signed(traj, model)?;
    let q = [0, 1, 2]
        .map(|i| variance(residuals.iter().map(move |r| r.residual[i])).max(VARIANCE_FLOOR));
    let diff = |f: fn(&SensorFrame, &crate::plant::GroundTruthFrame) -> f64| {
        let d = traj
            .sensors
            .iter()
            .zip(&grid)
            .map(move |(s, &i)| f(s, &traj.truth[i]));
        variance(d).max(VARIANCE_FLOOR)
    };
    let r = [
        diff(|s, t| s.ax - t.ax),
        diff(|s, t| s.ay - t.ay),
        diff(|s, t| s.yaw_rate - t.yaw_rate),
    ];
    Ok(NoiseConfig { q, r })
}

/// One observer output sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub t: f64,
    pub z_hat: [f64; 3],
    /// Signed `estimate - reference`.
    pub error: [f64; 3],
    pub ay_truth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverRun {
    pub model: ModelId,
    /// One entry per sensor frame; the first is the seed.
    pub estimates: Vec<Estimate>,
    /// NIS of every update.
    pub nis: Vec<f64>,
    /// Worst covariance asymmetry seen.
    pub max_asymmetry: f64,
    /// Smallest covariance eigenvalue seen.
    pub min_eigenvalue: f64,
}

impl ObserverRun {
    /// Absolute errors of the filtered frames (the seed frame excluded).
    pub fn errors(&self) -> Vec<StepError> {
        self.estimates[1..]
            .iter()
            .map(|e| StepError {
                t: e.t,
                e_vx: e.error[0].abs(),
                e_vy: e.error[1].abs(),
                e_yaw_rate: e.error[2].abs(),
                ay_truth: e.ay_truth,
            })
            .collect()
    }

    pub fn mae(&self) -> [f64; 3] {
        crate::validity::mae(&self.errors())
    }

    pub fn mean_nis(&self) -> f64 {
        self.nis.iter().sum::<f64>() / self.nis.len().max(1) as f64
    }
}

/// Runs the observer seeded from the reference at the first sensor frame.
pub fn run_observer(
    traj: &Trajectory,
    model: &CandidateModel,
    noise: &NoiseConfig,
) -> Result<ObserverRun, EstimationError> {
    run_observer_with_offset(traj, model, noise, [0.0; 3])
}

/// As [`run_observer`] with `offset` added to the initial estimate.
pub fn run_observer_with_offset(
    traj: &Trajectory,
    model: &CandidateModel,
    noise: &NoiseConfig,
    offset: [f64; 3],
) -> Result<ObserverRun, EstimationError> {
    noise.validate()?;
    let grid = comparison_grid(traj)?;
    let (q, r) = (noise.q_matrix(), noise.r_matrix());
    let seeded = model.seed(&seed_at(traj, 0, grid[0]));
    let z0 = seeded.reduced();
    let carrier = seeded.with_reduced([z0[0] + offset[0], z0[1] + offset[1], z0[2] + offset[2]]);
    let mut state = EkfState::new(carrier, Matrix3::identity() * P0);

    let estimate = |s: &EkfState, k: usize| {
        let f = &traj.truth[grid[k]];
        Estimate {
            t: traj.sensors[k].t,
            z_hat: [s.z[0], s.z[1], s.z[2]],
            error: [s.z[0] - f.vx, s.z[1] - f.vy, s.z[2] - f.yaw_rate],
            ay_truth: f.ay,
        }
    };
    let mut run = ObserverRun {
        model: model.id,
        estimates: vec![estimate(&state, 0)],
        nis: Vec::with_capacity(grid.len()),
        max_asymmetry: 0.0,
        min_eigenvalue: f64::INFINITY,
    };
    let check = |s: &EkfState, run: &mut ObserverRun| {
        let g = s.gaussian();
        run.max_asymmetry = run.max_asymmetry.max(g.asymmetry());
        run.min_eigenvalue = run.min_eigenvalue.min(g.min_eigenvalue());
    };
    for k in 1..grid.len() {
        let sensor = &traj.sensors[k];
        let input = sensor.input();
        let predicted = ekf_predict(&state, &input, MODEL_DT, model, &q).map_err(|e| e.at(k))?;
        check(&predicted, &mut run);
        let (next, nis) =
            ekf_update(&predicted, &sensor.into(), &input, model, &r).map_err(|e| e.at(k))?;
        check(&next, &mut run);
        run.nis.push(nis);
        state = next;
        run.estimates.push(estimate(&state, k));
    }
    Ok(run)
}

pub fn write_estimate_csv(path: &Path, estimates: &[Estimate]) -> Result<(), EstimationError> {
    let err = |e: csv::Error| EstimationError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(ESTIMATE_HEADER).map_err(err)?;
    for e in estimates {
        let row = [
            e.t, e.z_hat[0], e.z_hat[1], e.z_hat[2], e.error[0], e.error[1], e.error[2],
        ];
        w.write_record(row.map(|v| v.to_string())).map_err(err)?;
    }
    w.flush()
        .map_err(|e| EstimationError::Io(format!("{}: {e}", path.display())))
}
