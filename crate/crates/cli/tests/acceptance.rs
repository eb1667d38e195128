//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero when any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{Matrix2, Matrix2x3, Matrix3, SMatrix, SVector, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use vehval_cli::commands;
use vehval_cli::config::ExperimentConfig;
use vehval_core::dynamics::{
    step_bicycle, step_four_wheel, tire_force_dugoff, tire_force_linear, tire_force_pacejka,
    vertical_forces, Accel, AxleTires, BicycleState, CandidateModel, ControlInput, DugoffTire,
    FourWheelState, LinearTire, MagicFormula, ModelId, PacejkaTire, Peak, Seed, TireParams,
    VehicleParams,
};
use vehval_core::estimation::{
    exact_model_check, jacobian_fd, jacobian_fd_step, predict, update, EkfState, EstimationError,
    FilterModel, Gaussian, VehicleSystem,
};
use vehval_core::plant::SensorNoise;
use vehval_core::validity::{
    compare_trajectory, mae, synthesize_model_trajectory, Domain, DomainErrorReport, Variable,
    MODEL_DT,
};

struct Outcome {
    failures: Vec<String>,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Self {
            failures: Vec::new(),
            detail: String::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }
}

fn run(id: usize, name: &str, budget: Duration, f: impl FnOnce(&mut Outcome)) -> bool {
    let start = Instant::now();
    let mut o = Outcome::new();
    f(&mut o);
    let elapsed = start.elapsed();
    o.check(elapsed <= budget, || {
        format!(
            "runtime {:.1} s over the {} s budget",
            elapsed.as_secs_f64(),
            budget.as_secs()
        )
    });
    let pass = o.failures.is_empty();
    println!(
        "criterion {id} {name}: {} ({:.2} s) {}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        o.detail
    );
    for f in &o.failures {
        println!("    {f}");
    }
    pass
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn tire_suite(o: &mut Outcome) {
    let linear = LinearTire {
        c_tau: 90000.0,
        c_alpha: 80000.0,
    };
    let dugoff = DugoffTire {
        c_tau: 90000.0,
        c_alpha: 50000.0,
        mu: 1.0,
    };
    let car = PacejkaTire::passenger_car(1.2);
    let fz = 4000.0;

    o.check(tire_force_linear(0.0, 0.0, &linear) == (0.0, 0.0), || {
        "linear force at zero slip".into()
    });
    o.check(
        tire_force_dugoff(0.0, 0.0, fz, &dugoff).unwrap() == (0.0, 0.0),
        || "Dugoff force at zero slip".into(),
    );
    for mf in [car.longitudinal, car.lateral] {
        o.check(tire_force_pacejka(0.0, &mf, fz) == 0.0, || {
            "Magic Formula at zero slip".into()
        });
    }
    o.check(
        (tire_force_linear(
            0.0,
            0.01,
            &LinearTire {
                c_tau: 1.0,
                c_alpha: 80000.0,
            },
        )
        .1 - 800.0)
            .abs()
            < 1e-9,
        || "linear law C_alpha alpha".into(),
    );

    // Odd symmetry.
    for i in -50..=50 {
        let a = i as f64 * 0.01;
        let t = i as f64 * 0.017;
        let (lx, ly) = tire_force_linear(t, a, &linear);
        let (mx, my) = tire_force_linear(-t, -a, &linear);
        o.check(lx == -mx && ly == -my, || {
            format!("linear not odd at {t}, {a}")
        });
        let (_, dy) = tire_force_dugoff(0.3, a, fz, &dugoff).unwrap();
        let (_, ey) = tire_force_dugoff(0.3, -a, fz, &dugoff).unwrap();
        o.check((dy + ey).abs() <= 1e-9 * dy.abs().max(1.0), || {
            format!("Dugoff lateral not odd at {a}")
        });
        for mf in [car.longitudinal, car.lateral] {
            let p = tire_force_pacejka(a, &mf, fz);
            let q = tire_force_pacejka(-a, &mf, fz);
            o.check((p + q).abs() <= 1e-9 * p.abs().max(1.0), || {
                format!("Magic Formula not odd at {a}")
            });
        }
    }

    // Dugoff saturation grid.
    let mut worst = 0.0f64;
    for &(c_tau, c_alpha) in &[(90000.0, 50000.0), (150000.0, 120000.0), (20000.0, 15000.0)] {
        for &mu in &[0.3, 0.8, 1.0, 1.5] {
            let tire = DugoffTire { c_tau, c_alpha, mu };
            for it in 0..=36 {
                let tau = -0.9 + it as f64 * 0.05;
                for ia in 0..=40 {
                    let alpha = -0.5 + ia as f64 * 0.025;
                    for iz in 1..=20 {
                        let fz = iz as f64 * 500.0;
                        let (x, y) = tire_force_dugoff(tau, alpha, fz, &tire).unwrap();
                        worst = worst.max(x.hypot(y) / (mu * fz));
                    }
                }
            }
        }
    }
    o.check(worst <= 1.05, || {
        format!("Dugoff |F| / mu F_z reaches {worst}")
    });

    // Peak of the reference Magic Formula curve.
    let fig = MagicFormula {
        b: 10.0,
        c: 2.2,
        d: Peak::Newtons(2500.0),
        e: 1.0,
        sh: 0.0,
        sv: 0.0,
    };
    let y = |x: f64| tire_force_pacejka(x, &fig, 0.0);
    let (mut lo, mut hi) = (0.0, 0.5);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-12 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if y(a) < y(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let xm = 0.5 * (lo + hi);
    let peak = y(xm);
    o.check((peak - 2500.0).abs() <= 1e-6, || {
        format!("peak {peak} at x_m = {xm}")
    });
    let bounded = (0..=4000).all(|i| y(-2.0 + i as f64 * 1e-3).abs() <= 2500.0 + 1e-9);
    o.check(bounded, || "Magic Formula exceeds D".into());

    // Small-slip agreement of the three laws with matched stiffness.
    let mut spread = 0.0f64;
    for &fz in &[2000.0, 3500.0, 5000.0, 6500.0] {
        let c_alpha = car.lateral.stiffness(fz);
        let lin = LinearTire {
            c_tau: car.longitudinal.stiffness(fz),
            c_alpha,
        };
        let dug = DugoffTire {
            c_tau: lin.c_tau,
            c_alpha,
            mu: 1.2,
        };
        for i in 1..=20 {
            let alpha = i as f64 * 0.0005;
            let fl = tire_force_linear(0.0, alpha, &lin).1;
            let fd = tire_force_dugoff(0.0, alpha, fz, &dug).unwrap().1;
            let fp = tire_force_pacejka(alpha, &car.lateral, fz);
            spread = spread.max(rel(fl, fp)).max(rel(fd, fp)).max(rel(fl, fd));
        }
    }
    o.check(spread <= 0.05, || format!("small-slip spread {spread}"));
    o.detail = format!(
        "Dugoff max |F|/(mu F_z) {worst:.4}, peak error {:.1e}, small-slip spread {:.2}%",
        (peak - 2500.0).abs(),
        spread * 100.0
    );
}

fn load_transfer(o: &mut Outcome) {
    let v = VehicleParams::audi_a6();
    let weight = v.total_mass * v.gravity;
    let mut worst = 0.0f64;
    for i in 0..100 {
        let ax = -10.0 + 20.0 * i as f64 / 99.0;
        for j in 0..100 {
            let ay = -10.0 + 20.0 * j as f64 / 99.0;
            let loads = vertical_forces(ax, ay, &v);
            o.check(!loads.wheel_lift, || format!("wheel lift at ({ax}, {ay})"));
            worst = worst.max((loads.total() - weight).abs() / weight);
        }
    }
    o.check(worst <= 1e-9, || format!("relative sum error {worst}"));
    o.detail = format!("worst relative error {worst:.1e}");
}

fn lumping(o: &mut Outcome) {
    let mut v = VehicleParams::audi_a6();
    v.half_track_left = 0.0;
    v.half_track_right = 0.0;
    v.drag_coeff = 0.0;
    let tires = AxleTires::same(TireParams::Pacejka(PacejkaTire::passenger_car(1.2)));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let vx = rng.random_range(5.0..35.0);
        let b = BicycleState {
            x: rng.random_range(-100.0..100.0),
            y: rng.random_range(-100.0..100.0),
            vx,
            vy: rng.random_range(-1.5..1.5),
            psi: rng.random_range(-3.0..3.0),
            yaw_rate: rng.random_range(-0.5..0.5),
            accel: Accel {
                ax: rng.random_range(-4.0..4.0),
                ay: rng.random_range(-7.0..7.0),
            },
        };
        let base = vx / v.wheel_radius;
        let front = base * (1.0 + rng.random_range(-0.05..0.05));
        let rear = base * (1.0 + rng.random_range(-0.05..0.05));
        let u = ControlInput::new(rng.random_range(-0.1..0.1), [front, front, rear, rear]);
        let w = FourWheelState {
            x: b.x,
            vx: b.vx,
            y: b.y,
            vy: b.vy,
            psi: b.psi,
            yaw_rate: b.yaw_rate,
            omega: u.wheel_speeds,
            accel: b.accel,
            ..Default::default()
        };
        let nb = step_bicycle(&b, &u, MODEL_DT, &tires, &v).unwrap();
        let nw = step_four_wheel(&w, &u, MODEL_DT, &tires, &v).unwrap();
        for (p, q) in [
            (nb.x, nw.x),
            (nb.y, nw.y),
            (nb.vx, nw.vx),
            (nb.vy, nw.vy),
            (nb.psi, nw.psi),
            (nb.yaw_rate, nw.yaw_rate),
            (nb.accel.ax, nw.accel.ax),
            (nb.accel.ay, nw.accel.ay),
        ] {
            let e = (p - q).abs() / p.abs().max(q.abs()).max(1.0);
            worst = worst.max(e);
        }
    }
    o.check(worst <= 1e-9, || format!("relative difference {worst}"));
    o.detail = format!("worst relative difference {worst:.1e}");
}

fn self_consistency(o: &mut Outcome) {
    let v = VehicleParams::audi_a6();
    let omega = 18.0 / v.wheel_radius;
    let inputs: Vec<ControlInput> = (0..1500)
        .map(|k| {
            let t = k as f64 * MODEL_DT;
            ControlInput::new(
                0.06 * (0.6 * t).sin() + 0.02 * (1.7 * t).sin(),
                [omega * (1.0 + 0.02 * (0.3 * t).sin()); 4],
            )
        })
        .collect();
    let seed = Seed {
        vx: 18.0,
        wheel_speeds: inputs[0].wheel_speeds,
        ..Default::default()
    };
    let mut worst = 0.0f64;
    for id in ModelId::ALL {
        let model = CandidateModel::standard(id, v, &PacejkaTire::passenger_car(1.2), 1.2).unwrap();
        let traj =
            synthesize_model_trajectory(&model, &seed, &inputs, &SensorNoise::none(), 0).unwrap();
        let m = mae(&compare_trajectory(&traj, &model).unwrap());
        for x in m {
            worst = worst.max(x);
        }
        o.check(m.iter().all(|&x| x < 1e-6), || format!("{id}: MAE {m:?}"));
    }
    o.detail = format!("worst MAE {worst:.1e}");
}

fn vy_mae(report: &DomainErrorReport, id: ModelId, d: Domain) -> f64 {
    report.mae(id, Variable::Vy, d).unwrap_or(f64::NAN)
}

fn increase(report: &DomainErrorReport, id: ModelId) -> f64 {
    let below = vy_mae(report, id, Domain::Below);
    (vy_mae(report, id, Domain::Above) - below) / below
}

fn validity_structure(o: &mut Outcome, report: &DomainErrorReport) {
    for id in ModelId::ALL {
        let (b, a) = (
            vy_mae(report, id, Domain::Below),
            vy_mae(report, id, Domain::Above),
        );
        o.check(a > b, || format!("{id}: V_y above {a} not above below {b}"));
    }
    let lin = vy_mae(report, ModelId::DbmLinear, Domain::Above);
    let dug = vy_mae(report, ModelId::DbmDugoff, Domain::Above);
    let pac = vy_mae(report, ModelId::DbmPacejka, Domain::Above);
    o.check(lin >= dug && dug >= pac, || {
        format!("above-domain V_y order linear {lin}, Dugoff {dug}, Pacejka {pac}")
    });
    let (il, ip) = (
        increase(report, ModelId::DbmLinear),
        increase(report, ModelId::DbmPacejka),
    );
    o.check(il > ip, || format!("increase linear {il} vs Pacejka {ip}"));
    o.detail = format!(
        "V_y above: linear {lin:.4}, Dugoff {dug:.4}, Pacejka {pac:.4}; increase linear {:.0}%, Pacejka {:.0}%",
        il * 100.0,
        ip * 100.0
    );
}

fn observer_structure(o: &mut Outcome, report: &DomainErrorReport) {
    let il = increase(report, ModelId::DbmLinear);
    let pacejka = [ModelId::DbmPacejka, ModelId::FwmPacejka];
    for id in pacejka {
        let ip = increase(report, id);
        o.check(il > ip, || format!("increase linear {il} vs {id} {ip}"));
    }
    let best = ModelId::ALL
        .into_iter()
        .min_by(|a, b| {
            vy_mae(report, *a, Domain::Above).total_cmp(&vy_mae(report, *b, Domain::Above))
        })
        .unwrap();
    o.check(pacejka.contains(&best), || {
        format!("lowest above-domain V_y MAE is {best}")
    });
    o.detail = format!(
        "V_y increase: linear {:.0}%, dbm-pacejka {:.0}%, fwm-pacejka {:.0}%",
        il * 100.0,
        increase(report, ModelId::DbmPacejka) * 100.0,
        increase(report, ModelId::FwmPacejka) * 100.0
    );
}

struct Linear<const N: usize, const M: usize> {
    a: SMatrix<f64, N, N>,
    h: SMatrix<f64, M, N>,
}

impl<const N: usize, const M: usize> FilterModel<N, M> for Linear<N, M> {
    fn transition(&self, z: &SVector<f64, N>) -> Result<SVector<f64, N>, EstimationError> {
        Ok(self.a * z)
    }
    fn observe(&self, z: &SVector<f64, N>) -> Result<SVector<f64, M>, EstimationError> {
        Ok(self.h * z)
    }
    fn transition_jacobian(
        &self,
        _: &SVector<f64, N>,
    ) -> Result<SMatrix<f64, N, N>, EstimationError> {
        Ok(self.a)
    }
    fn observation_jacobian(
        &self,
        _: &SVector<f64, N>,
    ) -> Result<SMatrix<f64, M, N>, EstimationError> {
        Ok(self.h)
    }
}

/// Largest deviation of the filter from a textbook Kalman filter.
fn kalman_deviation() -> f64 {
    let sys = Linear::<3, 2> {
        a: Matrix3::new(1.0, 0.02, 0.0, -0.1, 0.97, 0.02, 0.0, 0.05, 0.9),
        h: Matrix2x3::new(1.0, 0.0, 0.0, 0.0, 0.5, 1.0),
    };
    let q = Matrix3::from_diagonal(&Vector3::new(1e-3, 2e-3, 5e-4));
    let r = Matrix2::from_diagonal(&Vector2::new(0.09, 0.04));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut truth = Vector3::new(1.0, -2.0, 0.5);
    let p0 = Matrix3::identity() * 0.5;
    let (mut x, mut p) = (Vector3::zeros(), p0);
    let mut est = Gaussian::new(Vector3::zeros(), p0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        truth = sys.a * truth;
        let y = sys.h * truth + Vector2::from_fn(|_, _| noise.sample(&mut rng));
        x = sys.a * x;
        p = sys.a * p * sys.a.transpose() + q;
        let s = sys.h * p * sys.h.transpose() + r;
        let k = p * sys.h.transpose() * s.try_inverse().unwrap();
        x += k * (y - sys.h * x);
        p = (Matrix3::identity() - k * sys.h) * p;
        est = update(&predict(&est, &sys, &q).unwrap(), &sys, &y, &r)
            .unwrap()
            .posterior;
        worst = worst
            .max((est.mean - x).abs().max() / x.abs().max().max(1.0))
            .max((est.cov - p).abs().max() / p.abs().max().max(1.0));
    }
    worst
}

fn ekf(o: &mut Outcome) {
    let dev = kalman_deviation();
    o.check(dev <= 1e-12, || format!("linear filter deviation {dev}"));
    let mut nis = Vec::new();
    for id in ModelId::ALL {
        match exact_model_check(id, 1500, 5) {
            Ok(c) => {
                for f in c.failures() {
                    o.failures.push(format!("{id}: {f}"));
                }
                nis.push(format!("{}={:.2}", id.cli_name(), c.noisy.mean_nis()));
            }
            Err(e) => o.failures.push(format!("{id}: {e}")),
        }
    }
    o.detail = format!("linear deviation {dev:.1e}; mean NIS {}", nis.join(" "));
}

fn jacobians(o: &mut Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst_linear = 0.0f64;
    for _ in 0..1000 {
        let a = Matrix3::from_fn(|_, _| rng.random_range(-3.0..3.0));
        let z = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
        let j = jacobian_fd(|z: &Vector3<f64>| Ok(a * z), &z).unwrap();
        worst_linear = worst_linear.max((j - a).abs().max());
    }
    o.check(worst_linear <= 1e-8, || {
        format!("linear recovery error {worst_linear}")
    });

    let v = VehicleParams::audi_a6();
    let model = CandidateModel::standard(
        ModelId::DbmPacejka,
        v,
        &PacejkaTire::passenger_car(1.2),
        1.2,
    )
    .unwrap();
    let mut worst_shrink = f64::INFINITY;
    for _ in 0..100 {
        let vx = rng.random_range(8.0..30.0);
        let carrier = model.seed(&Seed {
            vx,
            vy: rng.random_range(-1.0..1.0),
            yaw_rate: rng.random_range(-0.4..0.4),
            accel: Accel {
                ax: rng.random_range(-2.0..2.0),
                ay: rng.random_range(-5.0..5.0),
            },
            ..Default::default()
        });
        let omega = [0; 4].map(|_| vx / v.wheel_radius * (1.0 + rng.random_range(-0.03..0.03)));
        let input = ControlInput::new(rng.random_range(-0.06..0.06), omega);
        let state = EkfState::new(carrier, Matrix3::identity());
        let sys = VehicleSystem {
            model: &model,
            carrier: state.carrier,
            input,
            dt: MODEL_DT,
        };
        let z = state.z;
        let at = |s: f64| {
            let h = z.map(|x| s * 1e-3 * x.abs().max(1.0));
            jacobian_fd_step(|z| sys.transition(z), &z, &h).unwrap()
        };
        let (f1, f2, f4) = (at(1.0), at(0.5), at(0.25));
        worst_shrink = worst_shrink.min((f1 - f2).norm() / (f2 - f4).norm());
    }
    o.check(worst_shrink >= 2.0, || {
        format!("Richardson shrink {worst_shrink}")
    });
    o.detail = format!("linear error {worst_linear:.1e}, worst shrink {worst_shrink:.2}");
}

/// Report tables compared between two runs.
const REPORT_FILES: [&str; 7] = [
    "validity/domain.csv",
    "validity/per_trajectory.csv",
    "validity/pct_increase.csv",
    "observer/domain.csv",
    "observer/per_trajectory.csv",
    "report/domain_long.csv",
    "report/per_trajectory_long.csv",
];

struct Pipeline {
    validity: DomainErrorReport,
    observer: DomainErrorReport,
    simulate_compare: Duration,
    observe: Duration,
}

fn pipeline(cfg: &ExperimentConfig, out: &Path) -> Result<Pipeline, String> {
    let start = Instant::now();
    commands::simulate(cfg, out).map_err(|e| e.to_string())?;
    let validity = commands::compare(cfg, out, out).map_err(|e| e.to_string())?;
    let simulate_compare = start.elapsed();
    let start = Instant::now();
    let observed = commands::observe(cfg, out, out, false).map_err(|e| e.to_string())?;
    let observe = start.elapsed();
    commands::report(cfg, out).map_err(|e| e.to_string())?;
    Ok(Pipeline {
        validity,
        observer: observed.report,
        simulate_compare,
        observe,
    })
}

fn main() {
    let mut results = vec![
        run(1, "tire laws", Duration::from_secs(1), tire_suite),
        run(2, "load transfer", Duration::from_secs(1), load_transfer),
        run(3, "lumping", Duration::from_secs(5), lumping),
        run(
            4,
            "self-consistency",
            Duration::from_secs(10),
            self_consistency,
        ),
    ];

    let cfg = ExperimentConfig::default();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let first = pipeline(&cfg, dirs[0].path());
    let budget = Duration::from_secs(300);
    match &first {
        Ok(p) => {
            results.push(run(5, "validity structure", budget, |o| {
                validity_structure(o, &p.validity);
                o.check(p.simulate_compare <= budget, || {
                    format!("simulate + compare took {:?}", p.simulate_compare)
                });
            }));
        }
        Err(e) => results.push(run(5, "validity structure", budget, |o| {
            o.failures.push(e.clone())
        })),
    }
    results.push(run(6, "EKF", Duration::from_secs(30), ekf));
    match &first {
        Ok(p) => {
            results.push(run(7, "observer structure", budget, |o| {
                observer_structure(o, &p.observer);
                o.check(p.observe <= budget, || {
                    format!("observe took {:?}", p.observe)
                });
            }));
        }
        Err(e) => results.push(run(7, "observer structure", budget, |o| {
            o.failures.push(e.clone())
        })),
    }
    results.push(run(8, "Jacobians", Duration::from_secs(5), jacobians));
    results.push(run(9, "determinism", Duration::from_secs(600), |o| {
        let p = match &first {
            Ok(p) => p,
            Err(e) => {
                o.failures.push(format!("first run: {e}"));
                return;
            }
        };
        let q = match pipeline(&cfg, dirs[1].path()) {
            Ok(q) => q,
            Err(e) => {
                o.failures.push(format!("second run: {e}"));
                return;
            }
        };
        let total = p.simulate_compare + p.observe + q.simulate_compare + q.observe;
        o.check(total <= Duration::from_secs(600), || {
            format!("two runs took {:.1} s", total.as_secs_f64())
        });
        for f in REPORT_FILES {
            let a = std::fs::read(dirs[0].path().join(f));
            let b = std::fs::read(dirs[1].path().join(f));
            match (a, b) {
                (Ok(a), Ok(b)) => o.check(a == b, || format!("{f} differs")),
                _ => o.failures.push(format!("{f} missing")),
            }
        }
        o.detail = format!("{} report files compared", REPORT_FILES.len());
    }));

    let passed = results.iter().filter(|&&p| p).count();
    println!("{passed}/{} acceptance criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
