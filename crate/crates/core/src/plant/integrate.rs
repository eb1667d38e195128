use super::{PlantError, PlantInput, PlantParams, PlantState, ANGLE_ENVELOPE, PLANT_DIM};
use crate::dynamics::{
    contact_velocity, slip_angle, slip_ratio, tire_frame_speed, tire_to_body, TireForce, FL, FR,
    RL, RR,
};

/// Plant derivative together with the quantities logged alongside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantEval {
    pub deriv: PlantState,
    /// `dV_x/dt - psi_dot V_y`.
    pub ax: f64,
    /// `dV_y/dt + psi_dot V_x`.
    pub ay: f64,
    pub tires: [TireForce; 4],
    /// Set when a corner would need negative tire load.
    pub wheel_lift: bool,
}

/// Right-hand side of the plant equations.
pub fn plant_derivative(state: &PlantState, input: &PlantInput, params: &PlantParams) -> PlantEval {
    let v = &params.vehicle;
    let road = params.road.at(state.distance);
    let tire = params.tire.scaled(road.mu);
    let m = v.total_mass;
    let ms = v.sprung_mass;
    let g = v.gravity;
    let xs = v.wheel_x();
    let ys = v.wheel_y();
    let cr = state.roll.cos();
    let (sp, cp) = state.pitch.sin_cos();
    let grade = road.slope.cos() * road.bank.cos();

    let l = v.wheelbase();
    let track = v.track();
    let long_share = [
        v.dist_rear / l,
        v.dist_rear / l,
        v.dist_front / l,
        v.dist_front / l,
    ];
    let lat_share = [
        v.half_track_right / track,
        v.half_track_left / track,
        v.half_track_right / track,
        v.half_track_left / track,
    ];

    let z = state.deflections(v);
    let mut spring = [0.0; 4];
    let mut tires = [TireForce::default(); 4];
    let mut wheel_lift = false;
    let mut omega_dot = [0.0; 4];
    for i in 0..4 {
        let z_dot = state.vz + ys[i] * cr * state.roll_rate - xs[i] * cp * state.pitch_rate;
        spring[i] = -params.suspension.stiffness * z[i] - params.suspension.damping * z_dot;
        let raw = m * g * long_share[i] * lat_share[i] * grade + spring[i];
        wheel_lift |= raw < 0.0;
        let fz = raw.max(0.0);

        let steer = if i < 2 { input.steer } else { 0.0 };
        let (vx_w, vy_w) = contact_velocity(state.vx, state.vy, state.yaw_rate, xs[i], ys[i]);
        let alpha = slip_angle(steer, vx_w, vy_w);
        let tau = slip_ratio(
            state.omega[i],
            tire_frame_speed(vx_w, vy_w, steer),
            v.wheel_radius,
        );
        let fxp = tire.longitudinal.eval(tau, fz);
        let fyp = tire.lateral.eval(alpha, fz);
        let (fx, fy) = tire_to_body(fxp, fyp, fz, steer, state.roll, state.pitch);
        tires[i] = TireForce {
            fxp,
            fyp,
            fx,
            fy,
            fz,
        };
        omega_dot[i] = (input.torques[i] - v.wheel_radius * fxp) / v.wheel_inertia;
    }

    let fx: f64 = tires.iter().map(|t| t.fx).sum();
    let fy: f64 = tires.iter().map(|t| t.fy).sum();
    let aero = v.aero_force(state.vx + road.wind);
    let pitch_rel = state.pitch - road.slope;
    let roll_rel = state.roll - road.bank;

    let ax = (fx + m * g * pitch_rel.sin() - aero * cp) / m;
    let ay = (fy - m * g * roll_rel.sin() * pitch_rel.cos()) / m;
    // The sprung mass rests on its share of the static load plus the
    // suspension forces.
    let sprung_support = ms * g * grade + spring.iter().sum::<f64>();
    let vz_dot = state.pitch_rate * state.vx
        + (sprung_support - ms * g * roll_rel.cos() * pitch_rel.cos() + aero * sp) / ms;

    let roll_acc = (-(spring[FR] + spring[RR]) * v.half_track_right
        + (spring[FL] + spring[RL]) * v.half_track_left
        + fy * v.cog_height)
        / v.inertia_roll;
    let pitch_acc = (-(spring[FL] + spring[FR]) * v.dist_front
        + (spring[RL] + spring[RR]) * v.dist_rear
        - fx * v.cog_height
        - (v.aero_height - v.cog_height) * aero)
        / v.inertia_pitch;
    let yaw_acc = ((tires[FL].fy + tires[FR].fy) * v.dist_front
        - (tires[RL].fy + tires[RR].fy) * v.dist_rear
        + (tires[FR].fx + tires[RR].fx) * v.half_track_right
        - (tires[FL].fx + tires[RL].fx) * v.half_track_left)
        / v.inertia_yaw;

    let (s, c) = state.psi.sin_cos();
    let deriv = PlantState {
        x: state.vx * c - state.vy * s,
        y: state.vx * s + state.vy * c,
        psi: state.yaw_rate,
        vx: state.yaw_rate * state.vy + ax,
        vy: -state.yaw_rate * state.vx + ay,
        vz: vz_dot,
        yaw_rate: yaw_acc,
        roll: state.roll_rate,
        roll_rate: roll_acc,
        pitch: state.pitch_rate,
        pitch_rate: pitch_acc,
        heave: state.vz,
        omega: omega_dot,
        distance: state.vx.hypot(state.vy),
    };
    PlantEval {
        deriv,
        ax,
        ay,
        tires,
        wheel_lift,
    }
}

fn axpy(a: &[f64; PLANT_DIM], h: f64, b: &[f64; PLANT_DIM]) -> [f64; PLANT_DIM] {
    std::array::from_fn(|i| a[i] + h * b[i])
}

/// One classical RK4 step of length `params.dt` with inputs held constant.
pub fn plant_step(
    state: &PlantState,
    input: &PlantInput,
    params: &PlantParams,
    t: f64,
) -> Result<PlantState, PlantError> {
    let h = params.dt;
    if !(h > 0.0) {
        return Err(PlantError::InvalidStep(h));
    }
    let f = |s: &[f64; PLANT_DIM]| {
        plant_derivative(&PlantState::from_array(s), input, params)
            .deriv
            .to_array()
    };
    let y0 = state.to_array();
    let k1 = f(&y0);
    let k2 = f(&axpy(&y0, 0.5 * h, &k1));
    let k3 = f(&axpy(&y0, 0.5 * h, &k2));
    let k4 = f(&axpy(&y0, h, &k3));
    let next: [f64; PLANT_DIM] =
        std::array::from_fn(|i| y0[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    let next = PlantState::from_array(&next);
    check_envelope(&next, t + h)?;
    Ok(next)
}

fn check_envelope(s: &PlantState, t: f64) -> Result<(), PlantError> {
    let reason = if s.to_array().iter().any(|v| !v.is_finite()) {
        Some("non-finite state".to_string())
    } else if s.roll.abs() > ANGLE_ENVELOPE {
        Some(format!("roll {:.4} rad beyond +/-{ANGLE_ENVELOPE}", s.roll))
    } else if s.pitch.abs() > ANGLE_ENVELOPE {
        Some(format!(
            "pitch {:.4} rad beyond +/-{ANGLE_ENVELOPE}",
            s.pitch
        ))
    } else if s.vx.abs() > crate::dynamics::MAX_SPEED {
        Some(format!("speed {:.3} m/s outside the envelope", s.vx))
    } else {
        None
    };
    match reason {
        Some(reason) => Err(PlantError::Envelope {
            t,
            reason,
            state: format!("{s:?}"),
        }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::VehicleParams;
    use crate::plant::RoadProfile;

    fn params() -> PlantParams {
        PlantParams::new(VehicleParams::audi_a6(), RoadProfile::flat(1.2))
    }

    #[test]
    fn rest_is_an_equilibrium() {
        let p = params();
        let s = PlantState::default();
        let e = plant_derivative(&s, &PlantInput::default(), &p);
        assert_eq!(e.deriv.to_array(), [0.0; PLANT_DIM]);
        let mut state = s;
        for k in 0..1000 {
            state = plant_step(&state, &PlantInput::default(), &p, k as f64 * p.dt).unwrap();
        }
        assert_eq!(state, s);
    }

    #[test]
    fn static_loads_carry_the_weight() {
        let p = params();
        let e = plant_derivative(&PlantState::default(), &PlantInput::default(), &p);
        let total: f64 = e.tires.iter().map(|t| t.fz).sum();
        let w = p.vehicle.total_mass * p.vehicle.gravity;
        assert!((total - w).abs() < 1e-9 * w);
        assert!(!e.wheel_lift);
    }

    #[test]
    fn straight_run_stays_straight() {
        let p = params();
        let mut s = PlantState::rolling(20.0, &p.vehicle);
        let drive = PlantInput {
            torques: [p.vehicle.aero_force(20.0) * p.vehicle.wheel_radius / 4.0; 4],
            steer: 0.0,
        };
        for k in 0..2000 {
            let e = plant_derivative(&s, &drive, &p);
            assert_eq!(e.ay, 0.0);
            s = plant_step(&s, &drive, &p, k as f64 * p.dt).unwrap();
            assert_eq!((s.yaw_rate, s.vy, s.y), (0.0, 0.0, 0.0));
        }
        assert!((s.vx - 20.0).abs() < 0.05);
    }

    #[test]
    fn coasting_loses_energy() {
        let p = params();
        let mut s = PlantState::rolling(25.0, &p.vehicle);
        let mut energy = s.kinetic_energy(&p.vehicle);
        for k in 0..3000 {
            s = plant_step(&s, &PlantInput::default(), &p, k as f64 * p.dt).unwrap();
            let e = s.kinetic_energy(&p.vehicle);
            assert!(e <= energy * (1.0 + 1e-12), "step {k}: {e} > {energy}");
            energy = e;
        }
        assert!(s.vx < 25.0);
    }

    #[test]
    fn uphill_decelerates() {
        let mut p = params();
        p.road.segments[0].slope = 0.1;
        let s = PlantState::rolling(20.0, &p.vehicle);
        let e = plant_derivative(&s, &PlantInput::default(), &p);
        assert!(e.deriv.vx < -0.9);
    }

    #[test]
    fn left_turn_rolls_left_side_up() {
        let p = params();
        let mut s = PlantState::rolling(15.0, &p.vehicle);
        let input = PlantInput {
            torques: [0.0; 4],
            steer: 0.03,
        };
        for k in 0..2000 {
            s = plant_step(&s, &input, &p, k as f64 * p.dt).unwrap();
        }
        assert!(s.yaw_rate > 0.0);
        assert!(s.roll > 0.0);
        let e = plant_derivative(&s, &input, &p);
        assert!(e.tires[FR].fz > e.tires[FL].fz);
    }

    #[test]
    fn envelope_violation_aborts() {
        let p = params();
        let s = PlantState {
            roll: 0.31,
            vx: 10.0,
            ..Default::default()
        };
        assert!(matches!(
            plant_step(&s, &PlantInput::default(), &p, 0.0),
            Err(PlantError::Envelope { .. })
        ));
    }
}
