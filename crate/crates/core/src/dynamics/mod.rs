//! Tire force laws and the discrete-time propagation of the candidate
//! vehicle models (dynamic bicycle and planar four-wheel).
//!
//! Frame conventions used throughout the crate:
//! - vehicle frame: x forward, y to the left, z up;
//! - yaw `psi` positive counter-clockwise seen from above;
//! - roll `theta` positive when the left side rises;
//! - pitch `phi` positive nose down (right-handed about the left-pointing y axis).
//!
//! Wheels are always indexed front-left, front-right, rear-left, rear-right.

mod bicycle;
mod four_wheel;
mod kinematics;
mod model;
mod tire;

pub use bicycle::{bicycle_forces, step_bicycle, AxleForces};
pub use four_wheel::{four_wheel_forces, step_four_wheel, WheelForces};
pub use kinematics::{
    contact_velocity, slip_angle, slip_angles, slip_ratio, tire_frame_speed, tire_to_body,
    vertical_forces, VerticalLoads, V_EPS,
};
pub use model::{CandidateModel, ModelId, ModelState, Seed};
pub use tire::{
    tire_force_dugoff, tire_force_linear, tire_force_pacejka, AxleTires, DugoffTire, LinearTire,
    MagicFormula, PacejkaTire, Peak, TireParams,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of each wheel in per-wheel arrays.
pub const FL: usize = 0;
pub const FR: usize = 1;
pub const RL: usize = 2;
pub const RR: usize = 3;

/// Physical steering stop used to validate control inputs.
pub const MAX_STEER: f64 = 0.6;

/// Simulation envelope guard on longitudinal speed.
pub const MAX_SPEED: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid vehicle parameters: {0}")]
    InvalidVehicle(String),
    #[error("invalid tire parameters: {0}")]
    InvalidTire(String),
    #[error(
        "negative vertical load {load} N passed to a tire model (upstream load transfer fault)"
    )]
    NegativeLoad { load: f64 },
    #[error("integration fault: {reason}; offending state {state}")]
    IntegrationFault { reason: String, state: String },
    #[error("non-positive time step {0}")]
    InvalidStep(f64),
}

/// Geometric, inertial and aerodynamic constants of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Total mass [kg].
    pub total_mass: f64,
    /// Suspended (sprung) mass [kg].
    pub sprung_mass: f64,
    /// Roll inertia [kg m^2].
    pub inertia_roll: f64,
    /// Pitch inertia [kg m^2].
    pub inertia_pitch: f64,
    /// Yaw inertia [kg m^2].
    pub inertia_yaw: f64,
    /// CoG to front axle [m].
    pub dist_front: f64,
    /// CoG to rear axle [m].
    pub dist_rear: f64,
    /// CoG to left wheels [m].
    pub half_track_left: f64,
    /// CoG to right wheels [m].
    pub half_track_right: f64,
    /// CoG height [m].
    pub cog_height: f64,
    /// Height of the aerodynamic force [m].
    pub aero_height: f64,
    /// Effective rolling radius [m].
    pub wheel_radius: f64,
    /// Wheel spin inertia [kg m^2].
    pub wheel_inertia: f64,
    /// Air density [kg/m^3].
    pub air_density: f64,
    /// Aerodynamic drag coefficient [-].
    pub drag_coeff: f64,
    /// Frontal area [m^2].
    pub frontal_area: f64,
    /// Gravitational acceleration [m/s^2].
    #[serde(default = "default_gravity")]
    pub gravity: f64,
}

fn default_gravity() -> f64 {
    9.81
}

impl VehicleParams {
    /// Audi A6 Avant C7 test vehicle. Mass, axle distances, track width and
    /// yaw inertia are the measured values; the remaining entries are typical
    /// figures for a car of that class.
    pub fn audi_a6() -> Self {
        Self {
            total_mass: 1578.0,
            sprung_mass: 1400.0,
            inertia_roll: 600.0,
            inertia_pitch: 2800.0,
            inertia_yaw: 2924.0,
            dist_front: 1.134,
            dist_rear: 1.578,
            half_track_left: 1.513 / 2.0,
            half_track_right: 1.513 / 2.0,
            cog_height: 0.55,
            aero_height: 0.65,
            wheel_radius: 0.32,
            wheel_inertia: 1.2,
            air_density: 1.225,
            drag_coeff: 0.29,
            frontal_area: 2.33,
            gravity: 9.81,
        }
    }

    /// Looks up a named preset.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "audi-a6" | "audi_a6" | "default" => Some(Self::audi_a6()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = [
            ("total_mass", self.total_mass),
            ("sprung_mass", self.sprung_mass),
            ("inertia_roll", self.inertia_roll),
            ("inertia_pitch", self.inertia_pitch),
            ("inertia_yaw", self.inertia_yaw),
            ("dist_front", self.dist_front),
            ("dist_rear", self.dist_rear),
            ("half_track_left", self.half_track_left),
            ("half_track_right", self.half_track_right),
            ("cog_height", self.cog_height),
            ("aero_height", self.aero_height),
            ("wheel_radius", self.wheel_radius),
            ("wheel_inertia", self.wheel_inertia),
            ("gravity", self.gravity),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(DynamicsError::InvalidVehicle(format!(
                    "{name} must be strictly positive, got {value}"
                )));
            }
        }
        for (name, value) in [
            ("air_density", self.air_density),
            ("drag_coeff", self.drag_coeff),
            ("frontal_area", self.frontal_area),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(DynamicsError::InvalidVehicle(format!(
                    "{name} must be non-negative, got {value}"
                )));
            }
        }
        if self.sprung_mass > self.total_mass {
            return Err(DynamicsError::InvalidVehicle(
                "sprung_mass exceeds total_mass".into(),
            ));
        }
        Ok(())
    }

    pub fn wheelbase(&self) -> f64 {
        self.dist_front + self.dist_rear
    }

    pub fn track(&self) -> f64 {
        self.half_track_left + self.half_track_right
    }

    /// Static (front, rear) axle loads [N].
    pub fn static_axle_loads(&self) -> (f64, f64) {
        let w = self.total_mass * self.gravity / self.wheelbase();
        (w * self.dist_rear, w * self.dist_front)
    }

    /// Longitudinal position of each wheel relative to the CoG.
    pub fn wheel_x(&self) -> [f64; 4] {
        [
            self.dist_front,
            self.dist_front,
            -self.dist_rear,
            -self.dist_rear,
        ]
    }

    /// Lateral position of each wheel relative to the CoG (left positive).
    pub fn wheel_y(&self) -> [f64; 4] {
        [
            self.half_track_left,
            -self.half_track_right,
            self.half_track_left,
            -self.half_track_right,
        ]
    }

    /// Drag magnitude for a given airspeed, signed along the airspeed.
    pub fn aero_force(&self, airspeed: f64) -> f64 {
        0.5 * self.air_density * self.drag_coeff * self.frontal_area * airspeed * airspeed.abs()
    }
}

/// Accelerations `a_x = dV_x/dt - psi_dot V_y`, `a_y = dV_y/dt + psi_dot V_x`.
///
/// Candidate models carry the accelerations of their last transition and use
/// them for load transfer on the next one.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Accel {
    pub ax: f64,
    pub ay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BicycleState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub psi: f64,
    pub yaw_rate: f64,
    /// Accelerations of the previous transition (load-transfer memory).
    pub accel: Accel,
}

impl BicycleState {
    /// Left/right mirror image.
    pub fn mirrored(&self) -> Self {
        Self {
            x: self.x,
            y: -self.y,
            vx: self.vx,
            vy: -self.vy,
            psi: -self.psi,
            yaw_rate: -self.yaw_rate,
            accel: Accel {
                ax: self.accel.ax,
                ay: -self.accel.ay,
            },
        }
    }

    fn as_array(&self) -> [f64; 8] {
        [
            self.x,
            self.y,
            self.vx,
            self.vy,
            self.psi,
            self.yaw_rate,
            self.accel.ax,
            self.accel.ay,
        ]
    }

    pub(crate) fn check(&self) -> Result<(), DynamicsError> {
        check_finite(&self.as_array(), self.vx, || format!("{self:?}"))
    }
}

/// Planar four-wheel state. Roll and pitch entries are carried for
/// completeness; the candidate model holds them at zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FourWheelState {
    pub x: f64,
    pub vx: f64,
    pub y: f64,
    pub vy: f64,
    pub psi: f64,
    pub yaw_rate: f64,
    pub roll: f64,
    pub roll_rate: f64,
    pub pitch: f64,
    pub pitch_rate: f64,
    /// Wheel angular speeds fl, fr, rl, rr [rad/s].
    pub omega: [f64; 4],
    pub accel: Accel,
}

impl FourWheelState {
    pub fn mirrored(&self) -> Self {
        Self {
            x: self.x,
            vx: self.vx,
            y: -self.y,
            vy: -self.vy,
            psi: -self.psi,
            yaw_rate: -self.yaw_rate,
            roll: -self.roll,
            roll_rate: -self.roll_rate,
            pitch: self.pitch,
            pitch_rate: self.pitch_rate,
            omega: [
                self.omega[FR],
                self.omega[FL],
                self.omega[RR],
                self.omega[RL],
            ],
            accel: Accel {
                ax: self.accel.ax,
                ay: -self.accel.ay,
            },
        }
    }

    pub(crate) fn check(&self) -> Result<(), DynamicsError> {
        let mut values = vec![
            self.x,
            self.vx,
            self.y,
            self.vy,
            self.psi,
            self.yaw_rate,
            self.roll,
            self.roll_rate,
            self.pitch,
            self.pitch_rate,
            self.accel.ax,
            self.accel.ay,
        ];
        values.extend_from_slice(&self.omega);
        check_finite(&values, self.vx, || format!("{self:?}"))
    }
}

fn check_finite(
    values: &[f64],
    vx: f64,
    describe: impl Fn() -> String,
) -> Result<(), DynamicsError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(DynamicsError::IntegrationFault {
            reason: "non-finite state".into(),
            state: describe(),
        });
    }
    if vx.abs() > MAX_SPEED {
        return Err(DynamicsError::IntegrationFault {
            reason: format!("longitudinal speed {vx} outside +/-{MAX_SPEED} m/s"),
            state: describe(),
        });
    }
    Ok(())
}

/// Steering angle and measured wheel speeds driving the candidate models.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub steer: f64,
    /// fl, fr, rl, rr [rad/s].
    pub wheel_speeds: [f64; 4],
}

impl ControlInput {
    pub fn new(steer: f64, wheel_speeds: [f64; 4]) -> Self {
        Self {
            steer,
            wheel_speeds,
        }
    }

    /// All four wheels rolling at `omega`.
    pub fn uniform(steer: f64, omega: f64) -> Self {
        Self::new(steer, [omega; 4])
    }

    pub fn mirrored(&self) -> Self {
        let w = self.wheel_speeds;
        Self::new(-self.steer, [w[FR], w[FL], w[RR], w[RL]])
    }

    pub fn front_speed(&self) -> f64 {
        0.5 * (self.wheel_speeds[FL] + self.wheel_speeds[FR])
    }

    pub fn rear_speed(&self) -> f64 {
        0.5 * (self.wheel_speeds[RL] + self.wheel_speeds[RR])
    }

    pub fn within_stop(&self, stop: f64) -> bool {
        self.steer.abs() <= stop
    }
}

/// Forces of one tire in both frames.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TireForce {
    pub fxp: f64,
    pub fyp: f64,
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_is_valid() {
        let p = VehicleParams::audi_a6();
        p.validate().unwrap();
        assert_eq!(VehicleParams::preset("audi-a6"), Some(p));
        assert!(VehicleParams::preset("nope").is_none());
    }

    #[test]
    fn rejects_non_positive_mass() {
        let mut p = VehicleParams::audi_a6();
        p.total_mass = 0.0;
        assert!(matches!(
            p.validate(),
            Err(DynamicsError::InvalidVehicle(_))
        ));
    }

    #[test]
    fn static_loads_sum_to_weight() {
        let p = VehicleParams::audi_a6();
        let (f, r) = p.static_axle_loads();
        assert!((f + r - p.total_mass * p.gravity).abs() < 1e-9);
        assert!((f - 9007.272876106195).abs() < 1e-6);
    }

    #[test]
    fn mirror_is_an_involution() {
        let s = FourWheelState {
            vx: 20.0,
            vy: 0.3,
            yaw_rate: 0.2,
            omega: [60.0, 61.0, 62.0, 63.0],
            ..Default::default()
        };
        assert_eq!(s.mirrored().mirrored(), s);
        let u = ControlInput::new(0.1, [1.0, 2.0, 3.0, 4.0]);
        assert_eq!(u.mirrored().mirrored(), u);
    }
}
