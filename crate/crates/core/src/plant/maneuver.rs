use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    plant_derivative, plant_step, GroundTruthFrame, PlantError, PlantInput, PlantParams, PlantState,
};
use crate::dynamics::MAX_STEER;

/// Logging period of the plant [s].
pub const LOG_DT: f64 = 0.01;

/// Largest admissible lateral acceleration target [m/s^2].
pub const MAX_TARGET_AY: f64 = 10.5;

const MAX_ITERATIONS: usize = 8;
/// Relative tolerance for accepting a realized peak.
const ACCEPT_TOL: f64 = 0.1;
/// Relative distance at which scaling stops early.
const GOOD_ENOUGH: f64 = 0.03;
/// Amplitude factor applied after an aborted run.
const ABORT_BACKOFF: f64 = 0.7;
/// Lead time before any maneuver starts [s].
const LEAD_IN: f64 = 2.0;
/// Lowest speed a braking maneuver slows to [m/s].
const MIN_SPEED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManeuverKind {
    StepSteer,
    SineSweep,
    Slalom,
    DoubleLaneChange,
    StraightBrake,
}

impl ManeuverKind {
    pub const LATERAL: [ManeuverKind; 4] = [
        ManeuverKind::StepSteer,
        ManeuverKind::SineSweep,
        ManeuverKind::Slalom,
        ManeuverKind::DoubleLaneChange,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ManeuverKind::StepSteer => "step_steer",
            ManeuverKind::SineSweep => "sine_sweep",
            ManeuverKind::Slalom => "slalom",
            ManeuverKind::DoubleLaneChange => "double_lane_change",
            ManeuverKind::StraightBrake => "straight_brake",
        }
    }
}

impl fmt::Display for ManeuverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ManeuverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ManeuverKind::LATERAL
            .into_iter()
            .chain([ManeuverKind::StraightBrake])
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown maneuver '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManeuverSpec {
    pub kind: ManeuverKind,
    /// Requested peak |a_y| [m/s^2].
    pub target_ay_max: f64,
    /// [m/s]
    pub initial_speed: f64,
    /// [s]
    pub duration: f64,
    pub seed: u64,
}

impl ManeuverSpec {
    pub fn validate(&self) -> Result<(), PlantError> {
        if !(self.target_ay_max > 0.0 && self.target_ay_max <= MAX_TARGET_AY) {
            return Err(PlantError::InvalidSpec(format!(
                "target_ay_max must lie in (0, {MAX_TARGET_AY}], got {}",
                self.target_ay_max
            )));
        }
        if !(self.duration > LEAD_IN && self.duration.is_finite()) {
            return Err(PlantError::InvalidSpec(format!(
                "duration must exceed {LEAD_IN} s, got {}",
                self.duration
            )));
        }
        if !(self.initial_speed >= MIN_SPEED && self.initial_speed <= 60.0) {
            return Err(PlantError::InvalidSpec(format!(
                "initial_speed must lie in [{MIN_SPEED}, 60] m/s, got {}",
                self.initial_speed
            )));
        }
        Ok(())
    }

    pub fn frames(&self) -> usize {
        (self.duration / LOG_DT).round() as usize + 1
    }
}

/// Standard suite: `count` trajectories with log-spaced targets between
/// `lo` and `hi`, cycling through the lateral maneuvers and a spread of
/// speeds.
pub fn default_suite(
    seed: u64,
    count: usize,
    lo: f64,
    hi: f64,
    duration: f64,
) -> Vec<ManeuverSpec> {
    const SPEEDS: [f64; 7] = [14.0, 17.0, 20.0, 13.0, 16.0, 19.0, 22.0];
    (0..count)
        .map(|i| {
            let frac = if count > 1 {
                i as f64 / (count - 1) as f64
            } else {
                0.0
            };
            ManeuverSpec {
                kind: ManeuverKind::LATERAL[i % 4],
                target_ay_max: lo * (hi / lo).powf(frac),
                initial_speed: SPEEDS[i % SPEEDS.len()],
                duration,
                seed: derive_seed(seed, i as u64),
            }
        })
        .collect()
}

/// Independent per-item seed derived from a global seed (splitmix64).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Proportional speed tracking with drag feed-forward. Drive torque is split
/// equally over the four wheels, braking `brake_front` : `1 - brake_front`
/// between the axles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedController {
    /// [1/s]
    pub gain: f64,
    pub brake_front: f64,
}

impl Default for SpeedController {
    fn default() -> Self {
        Self {
            gain: 2.0,
            brake_front: 0.6,
        }
    }
}

impl SpeedController {
    fn torques(
        &self,
        v_ref: f64,
        a_ref: f64,
        state: &PlantState,
        params: &PlantParams,
    ) -> [f64; 4] {
        let v = &params.vehicle;
        let wind = params.road.at(state.distance).wind;
        let force =
            v.total_mass * (self.gain * (v_ref - state.vx) + a_ref) + v.aero_force(state.vx + wind);
        let r = v.wheel_radius;
        if force >= 0.0 {
            [force * r / 4.0; 4]
        } else {
            let front = force * r * self.brake_front / 2.0;
            let rear = force * r * (1.0 - self.brake_front) / 2.0;
            [front, front, rear, rear]
        }
    }
}

/// Controls held over one logging period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSample {
    pub t: f64,
    pub torques: [f64; 4],
    pub steer: f64,
}

impl ControlSample {
    fn input(&self) -> PlantInput {
        PlantInput {
            torques: self.torques,
            steer: self.steer,
        }
    }
}

/// 100 Hz plant record: reference frames plus the wheel and steering
/// signals the vehicle sensors observe.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlantLog {
    pub truth: Vec<GroundTruthFrame>,
    pub wheel_speeds: Vec<[f64; 4]>,
    pub steer: Vec<f64>,
}

impl PlantLog {
    pub fn ay_max(&self) -> f64 {
        self.truth.iter().fold(0.0, |m, f| m.max(f.ay.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManeuverRun {
    pub spec: ManeuverSpec,
    pub controls: Vec<ControlSample>,
    pub log: PlantLog,
    /// Steering amplitude of the retained run [rad].
    pub amplitude: f64,
    pub iterations: usize,
    pub realized_ay_max: f64,
    /// Realized peak within the accepted band around the target.
    pub reached: bool,
}

/// Seeded variations of a maneuver's timing and direction.
#[derive(Debug, Clone, Copy)]
struct Jitter {
    freq: f64,
    delay: f64,
    sign: f64,
}

impl Jitter {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            freq: rng.random_range(0.9..1.1),
            delay: rng.random_range(0.0..0.5),
            sign: if rng.random_bool(0.5) { 1.0 } else { -1.0 },
        }
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Normalized steering shape in `[-1, 1]`.
fn steer_shape(kind: ManeuverKind, t: f64, duration: f64, j: &Jitter) -> f64 {
    let t0 = LEAD_IN + j.delay;
    let tau = t - t0;
    if tau < 0.0 {
        return 0.0;
    }
    let active = duration - t0 - 1.0;
    let fade = smoothstep(tau) * smoothstep(active - tau);
    let value = match kind {
        ManeuverKind::StepSteer => {
            let hold = (active / 2.0).min(8.0);
            smoothstep(tau / 0.5) * (1.0 - smoothstep((tau - hold) / 0.5))
        }
        ManeuverKind::SineSweep => {
            let (f0, f1) = (0.2 * j.freq, 1.0 * j.freq);
            let phase = 2.0 * PI * (f0 * tau + (f1 - f0) * tau * tau / (2.0 * active));
            fade * phase.sin()
        }
        ManeuverKind::Slalom => fade * (2.0 * PI * 0.4 * j.freq * tau).sin(),
        ManeuverKind::DoubleLaneChange => {
            let period = 2.5 / j.freq;
            let cycle = 2.0 * period + 4.0;
            let c = tau % cycle;
            if c < period {
                (2.0 * PI * c / period).sin()
            } else if (period + 1.0..2.0 * period + 1.0).contains(&c) {
                -(2.0 * PI * (c - period - 1.0) / period).sin()
            } else {
                0.0
            }
        }
        ManeuverKind::StraightBrake => 0.0,
    };
    j.sign * value
}

/// Speed reference and its derivative.
fn speed_reference(spec: &ManeuverSpec, t: f64, j: &Jitter) -> (f64, f64) {
    let v0 = spec.initial_speed;
    if spec.kind != ManeuverKind::StraightBrake {
        return (v0, 0.0);
    }
    let decel = 3.0 * j.freq;
    let accel = 1.5 * j.freq;
    let v_low = MIN_SPEED.max(0.5 * v0);
    let t_down = (v0 - v_low) / decel;
    let t_up = (v0 - v_low) / accel;
    let cycle = t_down + 1.0 + t_up + 2.0;
    let tau = t - LEAD_IN - j.delay;
    if tau < 0.0 {
        return (v0, 0.0);
    }
    let c = tau % cycle;
    if c < t_down {
        (v0 - decel * c, -decel)
    } else if c < t_down + 1.0 {
        (v_low, 0.0)
    } else if c < t_down + 1.0 + t_up {
        (v_low + accel * (c - t_down - 1.0), accel)
    } else {
        (v0, 0.0)
    }
}

fn substeps(params: &PlantParams) -> Result<usize, PlantError> {
    let n = (LOG_DT / params.dt).round();
    if !(n >= 1.0) || ((n * params.dt) - LOG_DT).abs() > 1e-12 {
        return Err(PlantError::InvalidSpec(format!(
            "plant step {} must divide the {LOG_DT} s logging period",
            params.dt
        )));
    }
    Ok(n as usize)
}

fn log_frame(log: &mut PlantLog, t: f64, s: &PlantState, input: &PlantInput, params: &PlantParams) {
    let e = plant_derivative(s, input, params);
    log.truth.push(GroundTruthFrame {
        t,
        x: s.x,
        y: s.y,
        psi: s.psi,
        vx: s.vx,
        vy: s.vy,
        yaw_rate: s.yaw_rate,
        ax: e.ax,
        ay: e.ay,
        roll: s.roll,
        pitch: s.pitch,
        beta: s.beta(),
    });
    log.wheel_speeds.push(s.omega);
    log.steer.push(input.steer);
}

/// Runs the plant for `frames` logging periods, asking `control` for the
/// input held over each one.
fn run_plant(
    initial: PlantState,
    params: &PlantParams,
    frames: usize,
    mut control: impl FnMut(usize, f64, &PlantState) -> Result<ControlSample, PlantError>,
) -> Result<(Vec<ControlSample>, PlantLog), PlantError> {
    params.validate()?;
    let n_sub = substeps(params)?;
    let mut state = initial;
    let mut controls = Vec::with_capacity(frames);
    let mut log = PlantLog::default();
    for k in 0..frames {
        let t = k as f64 * LOG_DT;
        let c = control(k, t, &state)?;
        let input = c.input();
        log_frame(&mut log, t, &state, &input, params);
        controls.push(c);
        if k + 1 < frames {
            for i in 0..n_sub {
                state = plant_step(&state, &input, params, t + i as f64 * params.dt)?;
            }
        }
    }
    Ok((controls, log))
}

/// Replays a recorded control series open loop from `initial`.
pub fn replay_controls(
    initial: PlantState,
    controls: &[ControlSample],
    params: &PlantParams,
) -> Result<PlantLog, PlantError> {
    run_plant(initial, params, controls.len(), |k, t, _| {
        Ok(ControlSample { t, ..controls[k] })
    })
    .map(|(_, log)| log)
}

fn simulate_once(
    spec: &ManeuverSpec,
    params: &PlantParams,
    controller: &SpeedController,
    amplitude: f64,
    j: &Jitter,
) -> Result<(Vec<ControlSample>, PlantLog), PlantError> {
    let initial = PlantState::rolling(spec.initial_speed, &params.vehicle);
    run_plant(initial, params, spec.frames(), |_, t, s| {
        let (v_ref, a_ref) = speed_reference(spec, t, j);
        Ok(ControlSample {
            t,
            torques: controller.torques(v_ref, a_ref, s, params),
            steer: amplitude * steer_shape(spec.kind, t, spec.duration, j),
        })
    })
}

/// Simulates `spec` closed loop, rescaling the steering amplitude until the
/// realized peak |a_y| is close to the target. A target beyond reach yields
/// the closest run with `reached == false`.
pub fn generate_maneuver(
    spec: &ManeuverSpec,
    params: &PlantParams,
    controller: &SpeedController,
) -> Result<ManeuverRun, PlantError> {
    spec.validate()?;
    let jitter = Jitter::new(spec.seed);
    let target = spec.target_ay_max;
    let lateral = spec.kind != ManeuverKind::StraightBrake;
    let wheelbase = params.vehicle.wheelbase();
    let mut amplitude = if lateral {
        (target * wheelbase / (spec.initial_speed * spec.initial_speed)).min(MAX_STEER)
    } else {
        0.0
    };
    let mut best: Option<(f64, ManeuverRun)> = None;
    let mut last_abort = None;
    for iteration in 1..=MAX_ITERATIONS {
        match simulate_once(spec, params, controller, amplitude, &jitter) {
            Ok((controls, log)) => {
                let realized = log.ay_max();
                let miss = (realized - target).abs() / target;
                if best.as_ref().is_none_or(|(m, _)| miss < *m) {
                    best = Some((
                        miss,
                        ManeuverRun {
                            spec: *spec,
                            controls,
                            log,
                            amplitude,
                            iterations: iteration,
                            realized_ay_max: realized,
                            reached: miss <= ACCEPT_TOL,
                        },
                    ));
                }
                if miss <= GOOD_ENOUGH || !lateral {
                    break;
                }
                let ratio = if realized > 0.0 {
                    (target / realized).clamp(0.5, 2.0)
                } else {
                    2.0
                };
                let next = (amplitude * ratio).min(MAX_STEER);
                if next == amplitude {
                    break;
                }
                amplitude = next;
            }
            Err(e @ PlantError::Envelope { .. }) => {
                last_abort = Some(e);
                amplitude *= ABORT_BACKOFF;
            }
            Err(e) => return Err(e),
        }
    }
    match best {
        Some((_, mut run)) => {
            run.iterations = run.iterations.max(1);
            Ok(run)
        }
        None => Err(last_abort.expect("every iteration aborted")),
    }
}
