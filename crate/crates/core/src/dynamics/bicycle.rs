use super::kinematics::{
    contact_velocity, slip_angle, slip_ratio, tire_frame_speed, tire_to_body, vertical_forces,
    VerticalLoads,
};
use super::{
    Accel, AxleTires, BicycleState, ControlInput, DynamicsError, TireForce, VehicleParams,
};

/// Lumped axle forces of the dynamic bicycle model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxleForces {
    pub front: TireForce,
    pub rear: TireForce,
    pub loads: VerticalLoads,
}

impl AxleForces {
    /// Vehicle-frame force sum `(F_x, F_y)`.
    pub fn total(&self) -> (f64, f64) {
        (self.front.fx + self.rear.fx, self.front.fy + self.rear.fy)
    }
}

fn axle_force(
    tire: &super::TireParams,
    omega: f64,
    steer: f64,
    vx_w: f64,
    vy_w: f64,
    fz: f64,
    r_eff: f64,
) -> Result<TireForce, DynamicsError> {
    let alpha = slip_angle(steer, vx_w, vy_w);
    let tau = slip_ratio(omega, tire_frame_speed(vx_w, vy_w, steer), r_eff);
    let (fxp, fyp) = tire.forces(tau, alpha, fz)?;
    let (fx, fy) = tire_to_body(fxp, fyp, fz, steer, 0.0, 0.0);
    Ok(TireForce {
        fxp,
        fyp,
        fx,
        fy,
        fz,
    })
}

/// Axle forces at `state` under `input`. Wheel speeds of an axle are
/// averaged for the lumped wheel; loads use the state's acceleration memory.
pub fn bicycle_forces(
    state: &BicycleState,
    input: &ControlInput,
    tires: &AxleTires,
    params: &VehicleParams,
) -> Result<AxleForces, DynamicsError> {
    let loads = vertical_forces(state.accel.ax, state.accel.ay, params);
    let r_eff = params.wheel_radius;
    let (vxf, vyf) = contact_velocity(state.vx, state.vy, state.yaw_rate, params.dist_front, 0.0);
    let (vxr, vyr) = contact_velocity(state.vx, state.vy, state.yaw_rate, -params.dist_rear, 0.0);
    let front = axle_force(
        &tires.front,
        input.front_speed(),
        input.steer,
        vxf,
        vyf,
        loads.front_axle(),
        r_eff,
    )?;
    let rear = axle_force(
        &tires.rear,
        input.rear_speed(),
        0.0,
        vxr,
        vyr,
        loads.rear_axle(),
        r_eff,
    )?;
    Ok(AxleForces { front, rear, loads })
}

/// One explicit Euler step of the dynamic bicycle model.
pub fn step_bicycle(
    state: &BicycleState,
    input: &ControlInput,
    dt: f64,
    tires: &AxleTires,
    params: &VehicleParams,
) -> Result<BicycleState, DynamicsError> {
    if !(dt > 0.0) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    let forces = bicycle_forces(state, input, tires, params)?;
    let m = params.total_mass;
    let (fx, fy) = forces.total();
    let ax = fx / m;
    let ay = fy / m;
    let yaw_acc = (forces.front.fy * params.dist_front - forces.rear.fy * params.dist_rear)
        / params.inertia_yaw;
    let (s, c) = state.psi.sin_cos();
    let next = BicycleState {
        x: state.x + dt * (state.vx * c - state.vy * s),
        y: state.y + dt * (state.vx * s + state.vy * c),
        vx: state.vx + dt * (state.yaw_rate * state.vy + ax),
        vy: state.vy + dt * (-state.yaw_rate * state.vx + ay),
        psi: state.psi + dt * state.yaw_rate,
        yaw_rate: state.yaw_rate + dt * yaw_acc,
        accel: Accel { ax, ay },
    };
    next.check()?;
    Ok(next)
}
