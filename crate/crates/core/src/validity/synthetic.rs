use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ValidityError, MODEL_DT};
use crate::dynamics::{CandidateModel, ControlInput, ModelState, Seed};
use crate::plant::{GroundTruthFrame, SensorFrame, SensorNoise, Trajectory, TrajectoryMeta};

fn frame(t: f64, s: &ModelState) -> GroundTruthFrame {
    let z = s.reduced();
    let (x, y, psi) = s.pose();
    let a = s.accel();
    GroundTruthFrame {
        t,
        x,
        y,
        psi,
        vx: z[0],
        vy: z[1],
        yaw_rate: z[2],
        ax: a.ax,
        ay: a.ay,
        roll: 0.0,
        pitch: 0.0,
        beta: z[1].atan2(z[0]),
    }
}

fn midpoint(t: f64, a: &GroundTruthFrame, b: &GroundTruthFrame) -> GroundTruthFrame {
    let m = |p: f64, q: f64| 0.5 * (p + q);
    GroundTruthFrame {
        t,
        x: m(a.x, b.x),
        y: m(a.y, b.y),
        psi: m(a.psi, b.psi),
        vx: m(a.vx, b.vx),
        vy: m(a.vy, b.vy),
        yaw_rate: m(a.yaw_rate, b.yaw_rate),
        ax: m(a.ax, b.ax),
        ay: m(a.ay, b.ay),
        roll: 0.0,
        pitch: 0.0,
        beta: m(a.beta, b.beta),
    }
}

/// Trajectory generated by a candidate model itself, on the sensor grid:
/// `Z_{k+1} = f(Z_k, U_{k+1})` from `seed`, with `inputs[k]` as `U_k`. Truth
/// frames at the sensor instants are the model states (accelerations are
/// the model's load-transfer memory); intermediate 100 Hz frames are
/// interpolated. Sensor accelerations come from the model's measurement
/// function, optionally with noise.
pub fn synthesize_model_trajectory(
    model: &CandidateModel,
    seed: &Seed,
    inputs: &[ControlInput],
    noise: &SensorNoise,
    noise_seed: u64,
) -> Result<Trajectory, ValidityError> {
    noise
        .validate()
        .map_err(|e| ValidityError::Report(e.to_string()))?;
    if inputs.len() < 2 {
        return Err(ValidityError::TooShort(model.id.name().into()));
    }
    let n = inputs.len();
    let mut states = Vec::with_capacity(n + 1);
    states.push(model.seed(seed));
    for k in 0..n {
        let u = inputs[(k + 1).min(n - 1)];
        let next = model
            .step(&states[k], &u, MODEL_DT)
            .map_err(|source| ValidityError::Dynamics { index: k, source })?;
        states.push(next);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let normal = |s: f64| Normal::new(0.0, s).expect("validated sigma");
    let (n_ax, n_ay, n_r, n_w, n_d) = (
        normal(noise.ax),
        normal(noise.ay),
        normal(noise.yaw_rate),
        normal(noise.wheel),
        normal(noise.steer),
    );

    let mut truth = Vec::with_capacity(2 * n);
    let mut sensors = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * MODEL_DT;
        let here = frame(t, &states[k]);
        let next = frame(t + MODEL_DT, &states[k + 1]);
        truth.push(here);
        truth.push(midpoint(t + 0.5 * MODEL_DT, &here, &next));

        let u = inputs[k];
        let g = model
            .measure(&states[k], &u)
            .map_err(|source| ValidityError::Dynamics { index: k, source })?;
        let mut wheel_speeds = u.wheel_speeds;
        let ax = g[0] + n_ax.sample(&mut rng);
        let ay = g[1] + n_ay.sample(&mut rng);
        let yaw_rate = g[2] + n_r.sample(&mut rng);
        for w in &mut wheel_speeds {
            *w += n_w.sample(&mut rng);
        }
        let steer = u.steer + n_d.sample(&mut rng);
        sensors.push(SensorFrame {
            t,
            ax,
            ay,
            yaw_rate,
            wheel_speeds,
            steer,
        });
    }

    let mut traj = Trajectory {
        truth,
        sensors,
        meta: TrajectoryMeta {
            name: format!("model_{}", model.id.cli_name()),
            source: format!("model:{}", model.id.name()),
            noise_seed: Some(noise_seed),
            ..Default::default()
        },
    };
    traj.meta.realized_ay_max = traj.ay_max();
    Ok(traj)
}
