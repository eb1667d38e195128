use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{PlantError, PlantLog, SensorFrame};

/// Standard deviations of the zero-mean Gaussian sensor noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorNoise {
    /// [m/s^2]
    pub ax: f64,
    /// [m/s^2]
    pub ay: f64,
    /// [rad/s]
    pub yaw_rate: f64,
    /// [rad/s]
    pub wheel: f64,
    /// [rad]
    pub steer: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self {
            ax: 0.05,
            ay: 0.05,
            yaw_rate: 0.002,
            wheel: 0.05,
            steer: 0.001,
        }
    }
}

impl SensorNoise {
    pub fn none() -> Self {
        Self {
            ax: 0.0,
            ay: 0.0,
            yaw_rate: 0.0,
            wheel: 0.0,
            steer: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        let all = [self.ax, self.ay, self.yaw_rate, self.wheel, self.steer];
        if all.iter().all(|s| s.is_finite() && *s >= 0.0) {
            Ok(())
        } else {
            Err(PlantError::InvalidSpec(
                "noise standard deviations must be finite and non-negative".into(),
            ))
        }
    }
}

/// Decimates a 100 Hz plant log to 50 Hz sensor frames (every even frame)
/// and adds noise drawn from a generator seeded with `seed`.
pub fn sample_sensors(
    log: &PlantLog,
    noise: &SensorNoise,
    seed: u64,
) -> Result<Vec<SensorFrame>, PlantError> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = |sigma: f64| Normal::new(0.0, sigma).expect("validated sigma");
    let (n_ax, n_ay, n_r, n_w, n_d) = (
        normal(noise.ax),
        normal(noise.ay),
        normal(noise.yaw_rate),
        normal(noise.wheel),
        normal(noise.steer),
    );
    let count = log.truth.len() / 2;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let i = 2 * k;
        let f = &log.truth[i];
        let ax = f.ax + n_ax.sample(&mut rng);
        let ay = f.ay + n_ay.sample(&mut rng);
        let yaw_rate = f.yaw_rate + n_r.sample(&mut rng);
        let mut wheel_speeds = log.wheel_speeds[i];
        for w in &mut wheel_speeds {
            *w += n_w.sample(&mut rng);
        }
        let steer = log.steer[i] + n_d.sample(&mut rng);
        out.push(SensorFrame {
            t: f.t,
            ax,
            ay,
            yaw_rate,
            wheel_speeds,
            steer,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::GroundTruthFrame;

    fn log(n: usize) -> PlantLog {
        PlantLog {
            truth: (0..n)
                .map(|k| GroundTruthFrame {
                    t: k as f64 * 0.01,
                    vx: 10.0,
                    ay: 0.3 * (k as f64 * 0.1).sin(),
                    yaw_rate: 0.01,
                    ..Default::default()
                })
                .collect(),
            wheel_speeds: vec![[31.0, 31.1, 31.2, 31.3]; n],
            steer: (0..n).map(|k| 0.001 * k as f64).collect(),
        }
    }

    #[test]
    fn noiseless_is_decimated_truth() {
        let l = log(101);
        let s = sample_sensors(&l, &SensorNoise::none(), 3).unwrap();
        assert_eq!(s.len(), 50);
        for (k, f) in s.iter().enumerate() {
            let tr = &l.truth[2 * k];
            assert_eq!(f.t, tr.t);
            assert_eq!((f.ax, f.ay, f.yaw_rate), (tr.ax, tr.ay, tr.yaw_rate));
            assert_eq!(f.wheel_speeds, l.wheel_speeds[2 * k]);
            assert_eq!(f.steer, l.steer[2 * k]);
        }
        assert_eq!(
            sample_sensors(&log(100), &SensorNoise::none(), 3)
                .unwrap()
                .len(),
            50
        );
    }

    #[test]
    fn noise_has_configured_spread() {
        let l = log(200_000);
        let noise = SensorNoise {
            ay: 0.1,
            ..SensorNoise::none()
        };
        let s = sample_sensors(&l, &noise, 11).unwrap();
        assert_eq!(s.len(), 100_000);
        let e: Vec<f64> = s
            .iter()
            .enumerate()
            .map(|(k, f)| f.ay - l.truth[2 * k].ay)
            .collect();
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (e.len() - 1) as f64;
        let std = var.sqrt();
        assert!((0.098..=0.102).contains(&std), "{std}");
        assert!(mean.abs() < 0.002);
    }

    #[test]
    fn deterministic_per_seed() {
        let l = log(400);
        let a = sample_sensors(&l, &SensorNoise::default(), 5).unwrap();
        let b = sample_sensors(&l, &SensorNoise::default(), 5).unwrap();
        let c = sample_sensors(&l, &SensorNoise::default(), 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_negative_sigma() {
        let noise = SensorNoise {
            wheel: -1.0,
            ..SensorNoise::default()
        };
        assert!(sample_sensors(&log(4), &noise, 0).is_err());
    }
}
