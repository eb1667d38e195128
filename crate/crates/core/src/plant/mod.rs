//! Synthetic ground truth: a four-wheel plant with roll, pitch, heave,
//! suspension, wheel spin and aerodynamics, closed-loop maneuvers and a
//! sensor emulation.

mod integrate;
mod maneuver;
mod sensors;
mod trajectory;

pub use integrate::{plant_derivative, plant_step, PlantEval};
pub use maneuver::{
    default_suite, derive_seed, generate_maneuver, replay_controls, ControlSample, ManeuverKind,
    ManeuverRun, ManeuverSpec, PlantLog, SpeedController, LOG_DT, MAX_TARGET_AY,
};
pub use sensors::{sample_sensors, SensorNoise};
pub use trajectory::{
    read_sensor_csv, read_trajectory, read_truth_csv, write_sensor_csv, write_trajectory,
    write_truth_csv, GroundTruthFrame, SensorFrame, Trajectory, TrajectoryError, TrajectoryMeta,
    SENSOR_HEADER, TRUTH_HEADER,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DynamicsError, PacejkaTire, VehicleParams};

/// Roll and pitch bound beyond which a simulation is aborted [rad].
pub const ANGLE_ENVELOPE: f64 = 0.3;

/// Largest admissible road slope or bank [rad].
pub const MAX_GRADE: f64 = 0.15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("simulation left the envelope at t = {t:.3} s: {reason}; state {state}")]
    Envelope {
        t: f64,
        reason: String,
        state: String,
    },
    #[error("invalid maneuver: {0}")]
    InvalidSpec(String),
    #[error("invalid road profile: {0}")]
    InvalidRoad(String),
    #[error("non-positive plant step {0}")]
    InvalidStep(f64),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Linear spring-damper acting at each corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuspensionParams {
    /// Spring rate [N/m].
    pub stiffness: f64,
    /// Damping rate [N s/m].
    pub damping: f64,
}

impl Default for SuspensionParams {
    fn default() -> Self {
        Self {
            stiffness: 30000.0,
            damping: 3500.0,
        }
    }
}

/// Road conditions from arc length `start` onwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadSegment {
    /// Arc length where the segment begins [m].
    #[serde(default)]
    pub start: f64,
    #[serde(default)]
    pub slope: f64,
    #[serde(default)]
    pub bank: f64,
    pub mu: f64,
    #[serde(default)]
    pub wind: f64,
}

/// Piecewise-constant road over arc length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadProfile {
    pub segments: Vec<RoadSegment>,
}

impl RoadProfile {
    pub fn flat(mu: f64) -> Self {
        Self {
            segments: vec![RoadSegment {
                start: 0.0,
                slope: 0.0,
                bank: 0.0,
                mu,
                wind: 0.0,
            }],
        }
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        if self.segments.is_empty() {
            return Err(PlantError::InvalidRoad("no segments".into()));
        }
        let mut last = f64::NEG_INFINITY;
        for s in &self.segments {
            if !(s.start > last) {
                return Err(PlantError::InvalidRoad(
                    "segment starts must be strictly increasing".into(),
                ));
            }
            last = s.start;
            if !(s.slope.abs() <= MAX_GRADE && s.bank.abs() <= MAX_GRADE) {
                return Err(PlantError::InvalidRoad(format!(
                    "slope and bank must lie within +/-{MAX_GRADE} rad"
                )));
            }
            if !(s.mu > 0.0 && s.mu <= 1.5) {
                return Err(PlantError::InvalidRoad(format!(
                    "mu must lie in (0, 1.5], got {}",
                    s.mu
                )));
            }
            if !s.wind.is_finite() {
                return Err(PlantError::InvalidRoad("wind must be finite".into()));
            }
        }
        Ok(())
    }

    /// Segment in force at arc length `s`; the first segment also covers
    /// anything before its start.
    pub fn at(&self, s: f64) -> &RoadSegment {
        let idx = self.segments.partition_point(|seg| seg.start <= s);
        &self.segments[idx.saturating_sub(1)]
    }
}

/// Everything the plant needs besides state and controls.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantParams {
    pub vehicle: VehicleParams,
    pub suspension: SuspensionParams,
    /// Tire law on unit friction; the road friction scales its peaks.
    pub tire: PacejkaTire,
    pub road: RoadProfile,
    /// Integration step [s].
    pub dt: f64,
}

impl PlantParams {
    pub fn new(vehicle: VehicleParams, road: RoadProfile) -> Self {
        Self {
            vehicle,
            suspension: SuspensionParams::default(),
            tire: PacejkaTire::passenger_car(1.0),
            road,
            dt: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        self.vehicle.validate()?;
        crate::dynamics::TireParams::Pacejka(self.tire).validate()?;
        self.road.validate()?;
        if !(self.suspension.stiffness > 0.0 && self.suspension.damping >= 0.0) {
            return Err(PlantError::InvalidSpec(
                "suspension stiffness must be positive and damping non-negative".into(),
            ));
        }
        if !(self.dt > 0.0) {
            return Err(PlantError::InvalidStep(self.dt));
        }
        Ok(())
    }
}

/// Full plant state. Heave is the vertical displacement of the sprung mass
/// from static equilibrium and `vz` its rate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub yaw_rate: f64,
    pub roll: f64,
    pub roll_rate: f64,
    pub pitch: f64,
    pub pitch_rate: f64,
    pub heave: f64,
    /// fl, fr, rl, rr [rad/s].
    pub omega: [f64; 4],
    /// Travelled arc length [m].
    pub distance: f64,
}

pub(crate) const PLANT_DIM: usize = 17;

impl PlantState {
    /// Straight-line rolling at `speed` with the suspension at rest.
    pub fn rolling(speed: f64, params: &VehicleParams) -> Self {
        Self {
            vx: speed,
            omega: [speed / params.wheel_radius; 4],
            ..Default::default()
        }
    }

    /// Deflection of each corner (positive up).
    pub fn deflections(&self, params: &VehicleParams) -> [f64; 4] {
        let xs = params.wheel_x();
        let ys = params.wheel_y();
        let (sr, sp) = (self.roll.sin(), self.pitch.sin());
        std::array::from_fn(|i| self.heave + ys[i] * sr - xs[i] * sp)
    }

    pub(crate) fn to_array(self) -> [f64; PLANT_DIM] {
        let w = self.omega;
        [
            self.x,
            self.y,
            self.psi,
            self.vx,
            self.vy,
            self.vz,
            self.yaw_rate,
            self.roll,
            self.roll_rate,
            self.pitch,
            self.pitch_rate,
            self.heave,
            w[0],
            w[1],
            w[2],
            w[3],
            self.distance,
        ]
    }

    pub(crate) fn from_array(a: &[f64; PLANT_DIM]) -> Self {
        Self {
            x: a[0],
            y: a[1],
            psi: a[2],
            vx: a[3],
            vy: a[4],
            vz: a[5],
            yaw_rate: a[6],
            roll: a[7],
            roll_rate: a[8],
            pitch: a[9],
            pitch_rate: a[10],
            heave: a[11],
            omega: [a[12], a[13], a[14], a[15]],
            distance: a[16],
        }
    }

    pub fn mirrored(&self) -> Self {
        let w = self.omega;
        Self {
            y: -self.y,
            psi: -self.psi,
            vy: -self.vy,
            yaw_rate: -self.yaw_rate,
            roll: -self.roll,
            roll_rate: -self.roll_rate,
            omega: [w[1], w[0], w[3], w[2]],
            ..*self
        }
    }

    /// Translational and wheel-spin kinetic energy [J].
    pub fn kinetic_energy(&self, params: &VehicleParams) -> f64 {
        let spin: f64 = self.omega.iter().map(|w| w * w).sum();
        0.5 * params.total_mass * (self.vx * self.vx + self.vy * self.vy)
            + 0.5 * params.sprung_mass * self.vz * self.vz
            + 0.5 * params.wheel_inertia * spin
            + 0.5 * params.inertia_yaw * self.yaw_rate * self.yaw_rate
            + 0.5 * params.inertia_roll * self.roll_rate * self.roll_rate
            + 0.5 * params.inertia_pitch * self.pitch_rate * self.pitch_rate
    }

    /// Body side-slip angle [rad].
    pub fn beta(&self) -> f64 {
        self.vy.atan2(self.vx)
    }
}

/// Drive/brake torques and steering applied to the plant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantInput {
    /// fl, fr, rl, rr [N m].
    pub torques: [f64; 4],
    pub steer: f64,
}

impl PlantInput {
    pub fn mirrored(&self) -> Self {
        let t = self.torques;
        Self {
            torques: [t[1], t[0], t[3], t[2]],
            steer: -self.steer,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn road_lookup() {
        let road = RoadProfile {
            segments: vec![
                RoadSegment {
                    start: 0.0,
                    slope: 0.0,
                    bank: 0.0,
                    mu: 1.0,
                    wind: 0.0,
                },
                RoadSegment {
                    start: 100.0,
                    slope: 0.05,
                    bank: 0.0,
                    mu: 0.8,
                    wind: 2.0,
                },
            ],
        };
        road.validate().unwrap();
        assert_eq!(road.at(-5.0).mu, 1.0);
        assert_eq!(road.at(99.9).mu, 1.0);
        assert_eq!(road.at(100.0).mu, 0.8);
        assert_eq!(road.at(1e6).slope, 0.05);
    }

    #[test]
    fn road_validation() {
        let mut road = RoadProfile::flat(1.0);
        road.segments[0].bank = 0.2;
        assert!(road.validate().is_err());
        assert!(RoadProfile::flat(1.6).validate().is_err());
        assert!(RoadProfile { segments: vec![] }.validate().is_err());
    }

    #[test]
    fn state_array_round_trip() {
        let s = PlantState {
            x: 1.0,
            y: 2.0,
            psi: 3.0,
            vx: 4.0,
            vy: 5.0,
            vz: 6.0,
            yaw_rate: 7.0,
            roll: 8.0,
            roll_rate: 9.0,
            pitch: 10.0,
            pitch_rate: 11.0,
            heave: 12.0,
            omega: [13.0, 14.0, 15.0, 16.0],
            distance: 17.0,
        };
        assert_eq!(PlantState::from_array(&s.to_array()), s);
        assert_eq!(s.mirrored().mirrored(), s);
    }

    #[test]
    fn deflection_signs() {
        let p = VehicleParams::audi_a6();
        let s = PlantState {
            roll: 0.02,
            pitch: 0.01,
            ..Default::default()
        };
        let z = s.deflections(&p);
        // Left side up under positive roll, front down under positive pitch.
        assert!(z[0] > z[1] && z[2] > z[3]);
        assert!(z[0] < z[2] && z[1] < z[3]);
    }
}
