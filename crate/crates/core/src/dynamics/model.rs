use std::fmt;
use std::str::FromStr;

use super::{
    bicycle_forces, four_wheel_forces, step_bicycle, step_four_wheel, Accel, AxleTires,
    BicycleState, ControlInput, DynamicsError, FourWheelState, PacejkaTire, TireParams,
    VehicleParams,
};

/// The four candidate vehicle/tire combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelId {
    DbmLinear,
    DbmDugoff,
    DbmPacejka,
    FwmPacejka,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [
        ModelId::DbmLinear,
        ModelId::DbmDugoff,
        ModelId::DbmPacejka,
        ModelId::FwmPacejka,
    ];

    /// Name used in reports.
    pub fn name(self) -> &'static str {
        match self {
            ModelId::DbmLinear => "DBM_Linear",
            ModelId::DbmDugoff => "DBM_Dugoff",
            ModelId::DbmPacejka => "DBM_Pacejka",
            ModelId::FwmPacejka => "FWM_Pacejka",
        }
    }

    /// Name used on the command line.
    pub fn cli_name(self) -> &'static str {
        match self {
            ModelId::DbmLinear => "dbm-linear",
            ModelId::DbmDugoff => "dbm-dugoff",
            ModelId::DbmPacejka => "dbm-pacejka",
            ModelId::FwmPacejka => "fwm-pacejka",
        }
    }

    pub fn is_bicycle(self) -> bool {
        self != ModelId::FwmPacejka
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        ModelId::ALL
            .into_iter()
            .find(|m| m.cli_name() == key)
            .ok_or_else(|| {
                format!(
                    "unknown model '{s}' (expected one of dbm-linear, dbm-dugoff, dbm-pacejka, fwm-pacejka)"
                )
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelState {
    Bicycle(BicycleState),
    FourWheel(FourWheelState),
}

impl ModelState {
    /// The compared/estimated substate `(V_x, V_y, psi_dot)`.
    pub fn reduced(&self) -> [f64; 3] {
        match self {
            ModelState::Bicycle(s) => [s.vx, s.vy, s.yaw_rate],
            ModelState::FourWheel(s) => [s.vx, s.vy, s.yaw_rate],
        }
    }

    /// Copy with the substate replaced; pose, memory and wheel speeds kept.
    pub fn with_reduced(&self, z: [f64; 3]) -> Self {
        match *self {
            ModelState::Bicycle(s) => ModelState::Bicycle(BicycleState {
                vx: z[0],
                vy: z[1],
                yaw_rate: z[2],
                ..s
            }),
            ModelState::FourWheel(s) => ModelState::FourWheel(FourWheelState {
                vx: z[0],
                vy: z[1],
                yaw_rate: z[2],
                ..s
            }),
        }
    }

    pub fn accel(&self) -> Accel {
        match self {
            ModelState::Bicycle(s) => s.accel,
            ModelState::FourWheel(s) => s.accel,
        }
    }

    /// Inertial pose `(X, Y, psi)`.
    pub fn pose(&self) -> (f64, f64, f64) {
        match self {
            ModelState::Bicycle(s) => (s.x, s.y, s.psi),
            ModelState::FourWheel(s) => (s.x, s.y, s.psi),
        }
    }
}

/// Data needed to place a candidate model on a reference state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Seed {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
    /// Load-transfer memory.
    pub accel: Accel,
    /// Wheel speeds for the four-wheel auxiliary states.
    pub wheel_speeds: [f64; 4],
}

/// A candidate model with its vehicle and tire parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateModel {
    pub id: ModelId,
    pub vehicle: VehicleParams,
    pub tires: AxleTires,
}

impl CandidateModel {
    pub fn new(
        id: ModelId,
        vehicle: VehicleParams,
        tires: AxleTires,
    ) -> Result<Self, DynamicsError> {
        vehicle.validate()?;
        tires.validate()?;
        if id == ModelId::FwmPacejka
            && !(matches!(tires.front, TireParams::Pacejka(_))
                && matches!(tires.rear, TireParams::Pacejka(_)))
        {
            return Err(DynamicsError::InvalidTire(
                "the four-wheel model requires Pacejka tires".into(),
            ));
        }
        Ok(Self { id, vehicle, tires })
    }

    /// Standard tires for `id`: Pacejka models use `pacejka` directly, the
    /// linear and Dugoff models get cornering and slip stiffnesses matched
    /// to it at the static axle loads.
    pub fn standard(
        id: ModelId,
        vehicle: VehicleParams,
        pacejka: &PacejkaTire,
        mu: f64,
    ) -> Result<Self, DynamicsError> {
        let tires = match id {
            ModelId::DbmLinear => AxleTires::matched_linear(&vehicle, pacejka),
            ModelId::DbmDugoff => AxleTires::matched_dugoff(&vehicle, pacejka, mu),
            ModelId::DbmPacejka | ModelId::FwmPacejka => {
                AxleTires::same(TireParams::Pacejka(*pacejka))
            }
        };
        Self::new(id, vehicle, tires)
    }

    /// Model state equal to `seed` on the shared entries; four-wheel roll and
    /// pitch states start at zero.
    pub fn seed(&self, seed: &Seed) -> ModelState {
        if self.id.is_bicycle() {
            ModelState::Bicycle(BicycleState {
                x: seed.x,
                y: seed.y,
                vx: seed.vx,
                vy: seed.vy,
                psi: seed.psi,
                yaw_rate: seed.yaw_rate,
                accel: seed.accel,
            })
        } else {
            ModelState::FourWheel(FourWheelState {
                x: seed.x,
                vx: seed.vx,
                y: seed.y,
                vy: seed.vy,
                psi: seed.psi,
                yaw_rate: seed.yaw_rate,
                omega: seed.wheel_speeds,
                accel: seed.accel,
                ..Default::default()
            })
        }
    }

    pub fn step(
        &self,
        state: &ModelState,
        input: &ControlInput,
        dt: f64,
    ) -> Result<ModelState, DynamicsError> {
        match state {
            ModelState::Bicycle(s) => {
                step_bicycle(s, input, dt, &self.tires, &self.vehicle).map(ModelState::Bicycle)
            }
            ModelState::FourWheel(s) => {
                step_four_wheel(s, input, dt, &self.tires, &self.vehicle).map(ModelState::FourWheel)
            }
        }
    }

    /// Predicted sensor readings `(a_x, a_y, psi_dot)` from the tire forces
    /// at `state`; drag is not part of the measurement model.
    pub fn measure(
        &self,
        state: &ModelState,
        input: &ControlInput,
    ) -> Result<[f64; 3], DynamicsError> {
        let m = self.vehicle.total_mass;
        let (fx, fy, r) = match state {
            ModelState::Bicycle(s) => {
                let (fx, fy) = bicycle_forces(s, input, &self.tires, &self.vehicle)?.total();
                (fx, fy, s.yaw_rate)
            }
            ModelState::FourWheel(s) => {
                let (fx, fy) =
                    four_wheel_forces(s, input, &self.tires, &self.vehicle)?.tire_total();
                (fx, fy, s.yaw_rate)
            }
        };
        Ok([fx / m, fy / m, r])
    }
}
