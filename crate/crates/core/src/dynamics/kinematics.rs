//! Wheel slips, load transfer and the tire-to-body force rotation.

use super::{VehicleParams, FL, FR, RL, RR};

/// Speed below which slip quantities are blended towards zero [m/s].
pub const V_EPS: f64 = 0.5;

/// Longitudinal slip ratio of a wheel spinning at `omega` over ground speed
/// `v_xp` (tire frame). Positive when driving, negative when braking,
/// clamped to `[-1, 1]`.
pub fn slip_ratio(omega: f64, v_xp: f64, r_eff: f64) -> f64 {
    let rim = r_eff * omega;
    if rim.abs() < V_EPS && v_xp.abs() < V_EPS {
        return 0.0;
    }
    let tau = if rim >= v_xp {
        (rim - v_xp) / rim.abs().max(V_EPS)
    } else {
        (rim - v_xp) / v_xp.abs().max(V_EPS)
    };
    tau.clamp(-1.0, 1.0)
}

/// Slip angle of a wheel steered by `steer` whose contact point moves with
/// `(vx_w, vy_w)` in the vehicle frame. Blends linearly to zero below
/// [`V_EPS`].
pub fn slip_angle(steer: f64, vx_w: f64, vy_w: f64) -> f64 {
    let speed = vx_w.abs();
    let alpha = steer - (vy_w / speed.max(V_EPS)).atan();
    if speed < V_EPS {
        alpha * speed / V_EPS
    } else {
        alpha
    }
}

/// Vehicle-frame velocity of a contact point at `(x_w, y_w)` from the CoG.
pub fn contact_velocity(vx: f64, vy: f64, yaw_rate: f64, x_w: f64, y_w: f64) -> (f64, f64) {
    (vx - yaw_rate * y_w, vy + yaw_rate * x_w)
}

/// Contact-point speed along the wheel heading.
pub fn tire_frame_speed(vx_w: f64, vy_w: f64, steer: f64) -> f64 {
    vx_w * steer.cos() + vy_w * steer.sin()
}

/// Slip angles fl, fr, rl, rr. With `per_wheel == false` the track terms are
/// dropped and left/right entries coincide (lumped axle).
pub fn slip_angles(
    vx: f64,
    vy: f64,
    yaw_rate: f64,
    steer: f64,
    params: &VehicleParams,
    per_wheel: bool,
) -> [f64; 4] {
    let xs = params.wheel_x();
    let ys = if per_wheel {
        params.wheel_y()
    } else {
        [0.0; 4]
    };
    let steers = [steer, steer, 0.0, 0.0];
    let mut out = [0.0; 4];
    for i in 0..4 {
        let (vx_w, vy_w) = contact_velocity(vx, vy, yaw_rate, xs[i], ys[i]);
        out[i] = slip_angle(steers[i], vx_w, vy_w);
    }
    out
}

/// Rotates tire-frame forces into the vehicle frame for a wheel steered by
/// `steer` on a body with roll `roll` and pitch `pitch`.
pub fn tire_to_body(fxp: f64, fyp: f64, fz: f64, steer: f64, roll: f64, pitch: f64) -> (f64, f64) {
    let (sd, cd) = steer.sin_cos();
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let along = fxp * cd - fyp * sd;
    let across = fyp * cd + fxp * sd;
    let fx = along * cp - fz * sp;
    let fy = along * sr * sp + across * cr + fz * sr * cp;
    (fx, fy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerticalLoads {
    /// fl, fr, rl, rr [N], floored at zero.
    pub fz: [f64; 4],
    /// Set when any wheel would carry a negative load.
    pub wheel_lift: bool,
}

impl VerticalLoads {
    pub fn front_axle(&self) -> f64 {
        self.fz[FL] + self.fz[FR]
    }

    pub fn rear_axle(&self) -> f64 {
        self.fz[RL] + self.fz[RR]
    }

    pub fn total(&self) -> f64 {
        self.fz.iter().sum()
    }
}

/// Quasi-static load transfer. Positive `ay` (to the left) loads the right
/// wheels; positive `ax` loads the rear axle. A vehicle with zero track has
/// no lateral transfer lever and splits each axle evenly.
pub fn vertical_forces(ax: f64, ay: f64, params: &VehicleParams) -> VerticalLoads {
    let m = params.total_mass;
    let g = params.gravity;
    let l = params.wheelbase();
    let h = params.cog_height;
    let front = m * (params.dist_rear / l * g - h / l * ax);
    let rear = m * (params.dist_front / l * g + h / l * ax);
    let track = params.track();
    let lateral = if track > 0.0 {
        h / (track * g) * ay
    } else {
        0.0
    };
    let raw = [
        front * (0.5 - lateral),
        front * (0.5 + lateral),
        rear * (0.5 - lateral),
        rear * (0.5 + lateral),
    ];
    let wheel_lift = raw.iter().any(|&f| f < 0.0);
    VerticalLoads {
        fz: raw.map(|f| f.max(0.0)),
        wheel_lift,
    }
}
