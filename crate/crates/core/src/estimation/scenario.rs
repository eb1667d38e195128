use super::{
    run_observer, run_observer_with_offset, EstimationError, NoiseConfig, ObserverRun,
    VARIANCE_FLOOR,
};
use crate::dynamics::{CandidateModel, ControlInput, ModelId, PacejkaTire, Seed, VehicleParams};
use crate::plant::{SensorNoise, Trajectory};
use crate::validity::{synthesize_model_trajectory, MODEL_DT};

/// Observer running on data generated by its own model.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactModelCheck {
    pub model: ModelId,
    /// Noiseless sensors, small Q and R.
    pub tracking: ObserverRun,
    /// Same data with a +1 m/s error on the initial V_x.
    pub offset: ObserverRun,
    /// Measurement noise with matching R.
    pub noisy: ObserverRun,
}

/// Limits checked by [`ExactModelCheck::failures`].
pub const TRACKING_MAE: f64 = 1e-3;
pub const SETTLE_TIME: f64 = 5.0;
pub const SETTLE_ERROR: f64 = 0.01;
pub const NIS_RANGE: (f64, f64) = (2.0, 4.0);
pub const COVARIANCE_TOL: f64 = 1e-9;

impl ExactModelCheck {
    /// Largest |V_x error| from [`SETTLE_TIME`] on in the offset run.
    pub fn settled_error(&self) -> f64 {
        self.offset
            .estimates
            .iter()
            .filter(|e| e.t >= SETTLE_TIME)
            .fold(0.0, |m, e| m.max(e.error[0].abs()))
    }

    pub fn max_asymmetry(&self) -> f64 {
        [&self.tracking, &self.offset, &self.noisy]
            .iter()
            .fold(0.0, |m, r| m.max(r.max_asymmetry))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        [&self.tracking, &self.offset, &self.noisy]
            .iter()
            .fold(f64::INFINITY, |m, r| m.min(r.min_eigenvalue))
    }

    /// Human-readable list of violated limits; empty on success.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mae = self.tracking.mae();
        if mae.iter().any(|&e| !(e < TRACKING_MAE)) {
            out.push(format!("tracking MAE {mae:?} not below {TRACKING_MAE}"));
        }
        let settled = self.settled_error();
        if !(settled < SETTLE_ERROR) {
            out.push(format!(
                "V_x offset error {settled} after {SETTLE_TIME} s not below {SETTLE_ERROR}"
            ));
        }
        let nis = self.noisy.mean_nis();
        if !(NIS_RANGE.0..=NIS_RANGE.1).contains(&nis) {
            out.push(format!("mean NIS {nis} outside {NIS_RANGE:?}"));
        }
        if !(self.max_asymmetry() <= COVARIANCE_TOL && self.min_eigenvalue() >= -COVARIANCE_TOL) {
            out.push(format!(
                "covariance lost symmetry or definiteness (asymmetry {}, min eigenvalue {})",
                self.max_asymmetry(),
                self.min_eigenvalue()
            ));
        }
        out
    }
}

/// Slalom-like excitation with varying wheel slip, `n` sensor frames long.
pub fn excitation(vehicle: &VehicleParams, speed: f64, n: usize) -> Vec<ControlInput> {
    let omega = speed / vehicle.wheel_radius;
    (0..n)
        .map(|k| {
            let t = k as f64 * MODEL_DT;
            ControlInput::new(
                0.05 * (0.8 * t).sin(),
                [omega + 0.4 + 0.3 * (0.5 * t).sin(); 4],
            )
        })
        .collect()
}

fn generate(
    model: &CandidateModel,
    n: usize,
    noise: &SensorNoise,
    seed: u64,
) -> Result<Trajectory, EstimationError> {
    let speed = 15.0;
    let inputs = excitation(&model.vehicle, speed, n);
    let start = Seed {
        vx: speed,
        wheel_speeds: inputs[0].wheel_speeds,
        ..Default::default()
    };
    Ok(synthesize_model_trajectory(
        model, &start, &inputs, noise, seed,
    )?)
}

/// Runs the exact-model scenario for `id` with standard parameters over
/// `n` sensor frames.
pub fn exact_model_check(
    id: ModelId,
    n: usize,
    seed: u64,
) -> Result<ExactModelCheck, EstimationError> {
    let model = CandidateModel::standard(
        id,
        VehicleParams::audi_a6(),
        &PacejkaTire::passenger_car(1.2),
        1.2,
    )?;
    let clean = generate(&model, n, &SensorNoise::none(), seed)?;
    let small = NoiseConfig::uniform(VARIANCE_FLOOR, VARIANCE_FLOOR);
    let tracking = run_observer(&clean, &model, &small)?;
    let offset = run_observer_with_offset(&clean, &model, &small, [1.0, 0.0, 0.0])?;

    let noise = SensorNoise {
        wheel: 0.0,
        steer: 0.0,
        ..SensorNoise::default()
    };
    let noisy_traj = generate(&model, n, &noise, seed)?;
    let matched = NoiseConfig {
        q: [VARIANCE_FLOOR; 3],
        r: [noise.ax.powi(2), noise.ay.powi(2), noise.yaw_rate.powi(2)],
    };
    let noisy = run_observer(&noisy_traj, &model, &matched)?;
    Ok(ExactModelCheck {
        model: id,
        tracking,
        offset,
        noisy,
    })
}
