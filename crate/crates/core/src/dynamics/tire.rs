//! Linear, Dugoff and Magic Formula tire laws.

use serde::{Deserialize, Serialize};

use super::{DynamicsError, VehicleParams};

/// Keeps `1 - tau` away from zero inside the Dugoff law.
const DUGOFF_SLIP_BACKOFF: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearTire {
    /// Longitudinal stiffness [N per unit slip].
    pub c_tau: f64,
    /// Cornering stiffness [N/rad].
    pub c_alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DugoffTire {
    pub c_tau: f64,
    pub c_alpha: f64,
    /// Friction coefficient.
    pub mu: f64,
}

/// Peak factor of a Magic Formula channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Peak {
    /// Fixed peak force [N].
    Newtons(f64),
    /// Peak proportional to the vertical load: `D = k * F_z`.
    PerLoad(f64),
}

impl Peak {
    pub fn at_load(&self, fz: f64) -> f64 {
        match *self {
            Peak::Newtons(d) => d,
            Peak::PerLoad(k) => k * fz,
        }
    }

    fn raw(&self) -> f64 {
        match *self {
            Peak::Newtons(v) | Peak::PerLoad(v) => v,
        }
    }
}

/// One channel of the Magic Formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagicFormula {
    pub b: f64,
    pub c: f64,
    pub d: Peak,
    pub e: f64,
    #[serde(default)]
    pub sh: f64,
    #[serde(default)]
    pub sv: f64,
}

impl MagicFormula {
    pub fn eval(&self, x: f64, fz: f64) -> f64 {
        let bx = self.b * (x + self.sh);
        let y = self.d.at_load(fz) * (self.c * (bx - self.e * (bx - bx.atan())).atan()).sin();
        y + self.sv
    }

    /// Slope at the origin, `B C D`.
    pub fn stiffness(&self, fz: f64) -> f64 {
        self.b * self.c * self.d.at_load(fz)
    }

    fn validate(&self, channel: &str) -> Result<(), DynamicsError> {
        let bad = |what: &str| {
            Err(DynamicsError::InvalidTire(format!(
                "pacejka {channel}: {what}"
            )))
        };
        if !(self.b.is_finite() && self.b > 0.0) {
            return bad("B must be positive");
        }
        if !(self.c > 0.0 && self.c <= 3.0) {
            return bad("C must lie in (0, 3]");
        }
        if !(self.d.raw().is_finite() && self.d.raw() > 0.0) {
            return bad("D must be positive");
        }
        if !(self.e.is_finite() && self.sh.is_finite() && self.sv.is_finite()) {
            return bad("E, S_h and S_v must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacejkaTire {
    pub longitudinal: MagicFormula,
    pub lateral: MagicFormula,
}

impl PacejkaTire {
    /// Generic passenger-car coefficients with load-scaled peaks
    /// (`D = mu F_z` in both channels).
    pub fn passenger_car(mu: f64) -> Self {
        Self {
            longitudinal: MagicFormula {
                b: 12.0,
                c: 1.65,
                d: Peak::PerLoad(mu),
                e: 0.9,
                sh: 0.0,
                sv: 0.0,
            },
            lateral: MagicFormula {
                b: 10.0,
                c: 1.9,
                d: Peak::PerLoad(mu),
                e: 0.97,
                sh: 0.0,
                sv: 0.0,
            },
        }
    }

    /// Copy with both peak factors multiplied by `factor` (road friction).
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |mf: MagicFormula| MagicFormula {
            d: match mf.d {
                Peak::Newtons(d) => Peak::Newtons(d * factor),
                Peak::PerLoad(k) => Peak::PerLoad(k * factor),
            },
            ..mf
        };
        Self {
            longitudinal: scale(self.longitudinal),
            lateral: scale(self.lateral),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TireParams {
    Linear(LinearTire),
    Dugoff(DugoffTire),
    Pacejka(PacejkaTire),
}

impl TireParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let stiff = |c_tau: f64, c_alpha: f64| {
            if c_tau.is_finite() && c_tau > 0.0 && c_alpha.is_finite() && c_alpha > 0.0 {
                Ok(())
            } else {
                Err(DynamicsError::InvalidTire(
                    "stiffnesses must be positive".into(),
                ))
            }
        };
        match self {
            TireParams::Linear(t) => stiff(t.c_tau, t.c_alpha),
            TireParams::Dugoff(t) => {
                stiff(t.c_tau, t.c_alpha)?;
                if t.mu > 0.0 && t.mu <= 1.5 {
                    Ok(())
                } else {
                    Err(DynamicsError::InvalidTire(format!(
                        "dugoff mu must lie in (0, 1.5], got {}",
                        t.mu
                    )))
                }
            }
            TireParams::Pacejka(t) => {
                t.longitudinal.validate("longitudinal")?;
                t.lateral.validate("lateral")
            }
        }
    }

    /// Tire-frame forces `(F_xp, F_yp)` for slip ratio `tau`, slip angle
    /// `alpha` and vertical load `fz`.
    pub fn forces(&self, tau: f64, alpha: f64, fz: f64) -> Result<(f64, f64), DynamicsError> {
        match self {
            TireParams::Linear(t) => Ok(tire_force_linear(tau, alpha, t)),
            TireParams::Dugoff(t) => tire_force_dugoff(tau, alpha, fz, t),
            TireParams::Pacejka(t) => Ok((
                tire_force_pacejka(tau, &t.longitudinal, fz),
                tire_force_pacejka(alpha, &t.lateral, fz),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TireParams::Linear(_) => "linear",
            TireParams::Dugoff(_) => "dugoff",
            TireParams::Pacejka(_) => "pacejka",
        }
    }
}

pub fn tire_force_linear(tau: f64, alpha: f64, tire: &LinearTire) -> (f64, f64) {
    (tire.c_tau * tau, tire.c_alpha * alpha)
}

/// Dugoff combined-slip law. The `(1 - tau)` factor appears in both force
/// denominators and in the friction ratio, which bounds the resultant by
/// `mu F_z`.
pub fn tire_force_dugoff(
    tau: f64,
    alpha: f64,
    fz: f64,
    tire: &DugoffTire,
) -> Result<(f64, f64), DynamicsError> {
    if fz < 0.0 || fz.is_nan() {
        return Err(DynamicsError::NegativeLoad { load: fz });
    }
    let tau = tau.clamp(-1.0 + DUGOFF_SLIP_BACKOFF, 1.0 - DUGOFF_SLIP_BACKOFF);
    let long = tire.c_tau * tau;
    let lat = tire.c_alpha * alpha.tan();
    let demand = long.hypot(lat);
    if demand == 0.0 {
        return Ok((0.0, 0.0));
    }
    let lambda = tire.mu * fz * (1.0 - tau) / (2.0 * demand);
    let f = if lambda < 1.0 {
        (2.0 - lambda) * lambda
    } else {
        1.0
    };
    let scale = f / (1.0 - tau);
    Ok((long * scale, lat * scale))
}

/// Magic Formula output `Y(x)` at vertical load `fz`; `fz` only matters for
/// load-scaled peaks.
pub fn tire_force_pacejka(x: f64, mf: &MagicFormula, fz: f64) -> f64 {
    mf.eval(x, fz)
}

/// Tire laws of the lumped front and rear axles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxleTires {
    pub front: TireParams,
    pub rear: TireParams,
}

impl AxleTires {
    pub fn same(tire: TireParams) -> Self {
        Self {
            front: tire,
            rear: tire,
        }
    }

    /// Linear axles whose stiffnesses match the Magic Formula slopes at the
    /// static axle loads.
    pub fn matched_linear(vehicle: &VehicleParams, pacejka: &PacejkaTire) -> Self {
        let (front, rear) = vehicle.static_axle_loads();
        let at = |fz: f64| {
            TireParams::Linear(LinearTire {
                c_tau: pacejka.longitudinal.stiffness(fz),
                c_alpha: pacejka.lateral.stiffness(fz),
            })
        };
        Self {
            front: at(front),
            rear: at(rear),
        }
    }

    /// Dugoff axles with stiffnesses matched like [`AxleTires::matched_linear`].
    pub fn matched_dugoff(vehicle: &VehicleParams, pacejka: &PacejkaTire, mu: f64) -> Self {
        let (front, rear) = vehicle.static_axle_loads();
        let at = |fz: f64| {
            TireParams::Dugoff(DugoffTire {
                c_tau: pacejka.longitudinal.stiffness(fz),
                c_alpha: pacejka.lateral.stiffness(fz),
                mu,
            })
        };
        Self {
            front: at(front),
            rear: at(rear),
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        self.front.validate()?;
        self.rear.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig4() -> MagicFormula {
        MagicFormula {
            b: 10.0,
            c: 2.2,
            d: Peak::Newtons(2500.0),
            e: 1.0,
            sh: 0.0,
            sv: 0.0,
        }
    }

    #[test]
    fn linear_values() {
        let t = LinearTire {
            c_tau: 1e5,
            c_alpha: 80000.0,
        };
        assert_eq!(tire_force_linear(0.0, 0.0, &t), (0.0, 0.0));
        assert!((tire_force_linear(0.0, 0.01, &t).1 - 800.0).abs() < 1e-9);
        assert_eq!(
            tire_force_linear(0.0, -0.01, &t).1,
            -tire_force_linear(0.0, 0.01, &t).1
        );
    }

    #[test]
    fn dugoff_reference_point() {
        let t = DugoffTire {
            c_tau: 1e5,
            c_alpha: 50000.0,
            mu: 1.0,
        };
        let (fx, fy) = tire_force_dugoff(0.0, 0.1, 3000.0, &t).unwrap();
        assert_eq!(fx, 0.0);
        // Independent evaluation: lambda = 0.298999..., f = 0.508598...
        assert!((fy - 2551.501000953334).abs() < 1e-6, "{fy}");
        assert_eq!(tire_force_dugoff(0.0, 0.0, 3000.0, &t).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn dugoff_reduces_to_linear_when_unsaturated() {
        let t = DugoffTire {
            c_tau: 1e5,
            c_alpha: 50000.0,
            mu: 1.0,
        };
        // lambda = 3000 / (2 * 50000 * tan(0.005)) >> 1
        let alpha: f64 = 0.005;
        let (_, fy) = tire_force_dugoff(0.0, alpha, 3000.0, &t).unwrap();
        assert!((fy - 50000.0 * alpha.tan()).abs() < 1e-9);
    }

    #[test]
    fn dugoff_rejects_negative_load() {
        let t = DugoffTire {
            c_tau: 1e5,
            c_alpha: 5e4,
            mu: 1.0,
        };
        assert!(matches!(
            tire_force_dugoff(0.1, 0.1, -1.0, &t),
            Err(DynamicsError::NegativeLoad { .. })
        ));
    }

    #[test]
    fn dugoff_handles_full_slip() {
        let t = DugoffTire {
            c_tau: 1e5,
            c_alpha: 5e4,
            mu: 1.0,
        };
        for tau in [-1.0, 1.0] {
            let (fx, fy) = tire_force_dugoff(tau, 0.2, 4000.0, &t).unwrap();
            assert!(fx.is_finite() && fy.is_finite());
            assert!(fx.hypot(fy) <= 4000.0 * 1.000001);
        }
    }

    #[test]
    fn magic_formula_zero_and_peak() {
        let mf = fig4();
        assert_eq!(tire_force_pacejka(0.0, &mf, 3000.0), 0.0);
        // With E = 1 the peak sits where C atan(atan(Bx)) = pi/2.
        let xm = ((std::f64::consts::FRAC_PI_2 / 2.2).tan().tan()) / 10.0;
        assert!((tire_force_pacejka(xm, &mf, 3000.0) - 2500.0).abs() < 1e-9);
    }

    #[test]
    fn magic_formula_shifts() {
        let mut mf = fig4();
        mf.sv = 50.0;
        mf.sh = 0.01;
        assert!((mf.eval(-0.01, 0.0) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let mut mf = fig4();
        mf.c = 3.5;
        let t = TireParams::Pacejka(PacejkaTire {
            longitudinal: fig4(),
            lateral: mf,
        });
        assert!(t.validate().is_err());
        let d = TireParams::Dugoff(DugoffTire {
            c_tau: 1.0,
            c_alpha: 1.0,
            mu: 1.6,
        });
        assert!(d.validate().is_err());
        assert!(TireParams::Pacejka(PacejkaTire::passenger_car(1.0))
            .validate()
            .is_ok());
    }

    #[test]
    fn matched_axles_share_slope() {
        let v = VehicleParams::audi_a6();
        let p = PacejkaTire::passenger_car(1.0);
        let lin = AxleTires::matched_linear(&v, &p);
        let (front_load, _) = v.static_axle_loads();
        match lin.front {
            TireParams::Linear(t) => {
                assert!((t.c_alpha - 10.0 * 1.9 * front_load).abs() < 1e-6)
            }
            _ => unreachable!(),
        }
    }

    proptest! {
        #[test]
        fn dugoff_stays_inside_friction_circle(
            tau in -0.9f64..0.9,
            alpha in -0.5f64..0.5,
            fz in 1e-3f64..10000.0,
            c_tau in 1e3f64..3e5,
            c_alpha in 1e3f64..3e5,
            mu in 0.1f64..1.5,
        ) {
            let t = DugoffTire { c_tau, c_alpha, mu };
            let (fx, fy) = tire_force_dugoff(tau, alpha, fz, &t).unwrap();
            prop_assert!(fx.hypot(fy) <= 1.05 * mu * fz);
        }

        #[test]
        fn magic_formula_is_odd_and_bounded(x in -2.0f64..2.0, fz in 0.0f64..8000.0) {
            let p = PacejkaTire::passenger_car(1.0);
            for mf in [p.lateral, p.longitudinal, fig4()] {
                let y = mf.eval(x, fz);
                prop_assert_eq!(mf.eval(-x, fz), -y);
                prop_assert!(y.abs() <= mf.d.at_load(fz) + 1e-9);
            }
        }
    }
}
