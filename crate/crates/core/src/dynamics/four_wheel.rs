use super::kinematics::{
    contact_velocity, slip_angle, slip_ratio, tire_frame_speed, tire_to_body, vertical_forces,
    VerticalLoads,
};
use super::{
    Accel, AxleTires, ControlInput, DynamicsError, FourWheelState, TireForce, VehicleParams,
};

/// Per-wheel forces of the planar four-wheel model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelForces {
    /// fl, fr, rl, rr.
    pub wheels: [TireForce; 4],
    pub loads: VerticalLoads,
    /// Aerodynamic drag [N], positive against forward motion.
    pub aero: f64,
}

impl WheelForces {
    /// Vehicle-frame tire force sum `(F_x, F_y)`, drag excluded.
    pub fn tire_total(&self) -> (f64, f64) {
        self.wheels
            .iter()
            .fold((0.0, 0.0), |(x, y), w| (x + w.fx, y + w.fy))
    }

    /// Yaw moment of the four tire forces about the CoG.
    pub fn yaw_moment(&self, params: &VehicleParams) -> f64 {
        let w = &self.wheels;
        (w[0].fy + w[1].fy) * params.dist_front - (w[2].fy + w[3].fy) * params.dist_rear
            + (w[1].fx + w[3].fx) * params.half_track_right
            - (w[0].fx + w[2].fx) * params.half_track_left
    }
}

/// Tire forces at `state` under `input`; roll, pitch, slope and bank are
/// taken as zero. Wheel speeds come from the input.
pub fn four_wheel_forces(
    state: &FourWheelState,
    input: &ControlInput,
    tires: &AxleTires,
    params: &VehicleParams,
) -> Result<WheelForces, DynamicsError> {
    let loads = vertical_forces(state.accel.ax, state.accel.ay, params);
    let xs = params.wheel_x();
    let ys = params.wheel_y();
    let mut wheels = [TireForce::default(); 4];
    for i in 0..4 {
        let front = i < 2;
        let steer = if front { input.steer } else { 0.0 };
        let tire = if front { &tires.front } else { &tires.rear };
        let (vx_w, vy_w) = contact_velocity(state.vx, state.vy, state.yaw_rate, xs[i], ys[i]);
        let alpha = slip_angle(steer, vx_w, vy_w);
        let tau = slip_ratio(
            input.wheel_speeds[i],
            tire_frame_speed(vx_w, vy_w, steer),
            params.wheel_radius,
        );
        let fz = loads.fz[i];
        let (fxp, fyp) = tire.forces(tau, alpha, fz)?;
        let (fx, fy) = tire_to_body(fxp, fyp, fz, steer, 0.0, 0.0);
        wheels[i] = TireForce {
            fxp,
            fyp,
            fx,
            fy,
            fz,
        };
    }
    Ok(WheelForces {
        wheels,
        loads,
        aero: params.aero_force(state.vx),
    })
}

/// One explicit Euler step of the planar four-wheel candidate model.
pub fn step_four_wheel(
    state: &FourWheelState,
    input: &ControlInput,
    dt: f64,
    tires: &AxleTires,
    params: &VehicleParams,
) -> Result<FourWheelState, DynamicsError> {
    if !(dt > 0.0) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    let forces = four_wheel_forces(state, input, tires, params)?;
    let m = params.total_mass;
    let (fx, fy) = forces.tire_total();
    let ax = (fx - forces.aero) / m;
    let ay = fy / m;
    let yaw_acc = forces.yaw_moment(params) / params.inertia_yaw;
    let (s, c) = state.psi.sin_cos();
    let next = FourWheelState {
        x: state.x + dt * (state.vx * c - state.vy * s),
        vx: state.vx + dt * (state.yaw_rate * state.vy + ax),
        y: state.y + dt * (state.vx * s + state.vy * c),
        vy: state.vy + dt * (-state.yaw_rate * state.vx + ay),
        psi: state.psi + dt * state.yaw_rate,
        yaw_rate: state.yaw_rate + dt * yaw_acc,
        roll: 0.0,
        roll_rate: 0.0,
        pitch: 0.0,
        pitch_rate: 0.0,
        omega: input.wheel_speeds,
        accel: Accel { ax, ay },
    };
    next.check()?;
    Ok(next)
}
