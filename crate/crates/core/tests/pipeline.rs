use vehval_core::dynamics::{CandidateModel, ModelId, PacejkaTire, VehicleParams};
use vehval_core::estimation::{covariance_from_errors, run_observer};
use vehval_core::plant::{
    generate_maneuver, read_trajectory, sample_sensors, write_trajectory, ManeuverKind,
    ManeuverSpec, PlantParams, RoadProfile, SensorNoise, SpeedController, Trajectory,
    TrajectoryMeta,
};
use vehval_core::validity::{compare_trajectory, mae};

fn plant_trajectory(kind: ManeuverKind, target: f64) -> Trajectory {
    let params = PlantParams::new(VehicleParams::audi_a6(), RoadProfile::flat(1.2));
    let spec = ManeuverSpec {
        kind,
        target_ay_max: target,
        initial_speed: 17.0,
        duration: 12.0,
        seed: 5,
    };
    let run = generate_maneuver(&spec, &params, &SpeedController::default()).unwrap();
    assert!(
        run.reached,
        "peak {} for target {target}",
        run.realized_ay_max
    );
    let sensors = sample_sensors(&run.log, &SensorNoise::default(), 6).unwrap();
    Trajectory {
        truth: run.log.truth,
        sensors,
        meta: TrajectoryMeta {
            name: format!("{}_{target}", kind.name()),
            source: "plant".into(),
            ..Default::default()
        },
    }
}

fn models() -> Vec<CandidateModel> {
    ModelId::ALL
        .into_iter()
        .map(|id| {
            CandidateModel::standard(
                id,
                VehicleParams::audi_a6(),
                &PacejkaTire::passenger_car(1.2),
                1.2,
            )
            .unwrap()
        })
        .collect()
}

#[test]
fn bundle_round_trip_preserves_comparison() {
    let traj = plant_trajectory(ManeuverKind::Slalom, 3.0);
    let dir = tempfile::tempdir().unwrap();
    write_trajectory(dir.path(), &traj).unwrap();
    let back = read_trajectory(dir.path()).unwrap();
    assert_eq!(back.truth.len(), traj.truth.len());
    assert_eq!(back.sensors.len(), traj.sensors.len());
    for m in models() {
        let a = mae(&compare_trajectory(&traj, &m).unwrap());
        let b = mae(&compare_trajectory(&back, &m).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!(
                (x - y).abs() <= 1e-12 * x.max(1e-12),
                "{}: {x} vs {y}",
                m.id
            );
        }
    }
}

#[test]
fn mild_maneuver_is_within_every_model() {
    let traj = plant_trajectory(ManeuverKind::SineSweep, 2.5);
    for m in models() {
        let e = mae(&compare_trajectory(&traj, &m).unwrap());
        // Centimetre-per-second velocity error per 20 ms step at most.
        assert!(e[0] < 0.02 && e[1] < 0.02 && e[2] < 0.01, "{}: {e:?}", m.id);
    }
}

#[test]
fn observers_track_plant_data() {
    let traj = plant_trajectory(ManeuverKind::DoubleLaneChange, 4.0);
    for m in models() {
        let noise = covariance_from_errors(&traj, &m).unwrap();
        let run = run_observer(&traj, &m, &noise).unwrap();
        let e = run.mae();
        assert!(e[1] < 0.1 && e[2] < 0.02, "{}: {e:?}", m.id);
        assert!(run.min_eigenvalue > 0.0);
        assert_eq!(run.estimates.len(), traj.sensors.len());
    }
}
