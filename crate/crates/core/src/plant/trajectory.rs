use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TRUTH_HEADER: [&str; 12] = [
    "t", "X", "Y", "psi", "Vx", "Vy", "yaw_rate", "ax", "ay", "roll", "pitch", "beta",
];

pub const SENSOR_HEADER: [&str; 9] = [
    "t",
    "ax_meas",
    "ay_meas",
    "yaw_rate_meas",
    "w_fl",
    "w_fr",
    "w_rl",
    "w_rr",
    "delta",
];

const TRUTH_FILE: &str = "truth.csv";
const SENSOR_FILE: &str = "sensors.csv";
const META_FILE: &str = "meta";

/// Tolerance when matching sensor and truth timestamps [s].
const TIME_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: missing column '{column}'")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}, line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: invalid meta: {message}")]
    Meta { path: PathBuf, message: String },
    #[error("misaligned trajectory: {0}")]
    Alignment(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> TrajectoryError + '_ {
    move |source| TrajectoryError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reference state sample (100 Hz).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroundTruthFrame {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub vx: f64,
    pub vy: f64,
    pub yaw_rate: f64,
    pub ax: f64,
    pub ay: f64,
    pub roll: f64,
    pub pitch: f64,
    pub beta: f64,
}

impl GroundTruthFrame {
    fn to_row(self) -> [f64; 12] {
        [
            self.t,
            self.x,
            self.y,
            self.psi,
            self.vx,
            self.vy,
            self.yaw_rate,
            self.ax,
            self.ay,
            self.roll,
            self.pitch,
            self.beta,
        ]
    }

    fn from_row(r: &[f64]) -> Self {
        Self {
            t: r[0],
            x: r[1],
            y: r[2],
            psi: r[3],
            vx: r[4],
            vy: r[5],
            yaw_rate: r[6],
            ax: r[7],
            ay: r[8],
            roll: r[9],
            pitch: r[10],
            beta: r[11],
        }
    }
}

/// Vehicle sensor sample (50 Hz).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SensorFrame {
    pub t: f64,
    pub ax: f64,
    pub ay: f64,
    pub yaw_rate: f64,
    /// fl, fr, rl, rr [rad/s].
    pub wheel_speeds: [f64; 4],
    pub steer: f64,
}

impl SensorFrame {
    fn to_row(self) -> [f64; 9] {
        let w = self.wheel_speeds;
        [
            self.t,
            self.ax,
            self.ay,
            self.yaw_rate,
            w[0],
            w[1],
            w[2],
            w[3],
            self.steer,
        ]
    }

    fn from_row(r: &[f64]) -> Self {
        Self {
            t: r[0],
            ax: r[1],
            ay: r[2],
            yaw_rate: r[3],
            wheel_speeds: [r[4], r[5], r[6], r[7]],
            steer: r[8],
        }
    }

    pub fn input(&self) -> crate::dynamics::ControlInput {
        crate::dynamics::ControlInput::new(self.steer, self.wheel_speeds)
    }
}

/// Provenance of a trajectory bundle.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub name: String,
    /// `plant`, `model:<name>` or `external`.
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maneuver: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_ay_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maneuver_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_seed: Option<u64>,
    #[serde(default)]
    pub realized_ay_max: f64,
    #[serde(default)]
    pub target_reached: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub truth: Vec<GroundTruthFrame>,
    pub sensors: Vec<SensorFrame>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    /// Largest absolute reference lateral acceleration.
    pub fn ay_max(&self) -> f64 {
        self.truth.iter().fold(0.0, |m, f| m.max(f.ay.abs()))
    }

    /// Index of the truth frame at each sensor timestamp.
    pub fn sensor_truth_index(&self) -> Result<Vec<usize>, TrajectoryError> {
        let mut out = Vec::with_capacity(self.sensors.len());
        let mut j = 0;
        for (k, s) in self.sensors.iter().enumerate() {
            while j < self.truth.len() && self.truth[j].t < s.t - TIME_TOL {
                j += 1;
            }
            if j == self.truth.len() || (self.truth[j].t - s.t).abs() > TIME_TOL {
                return Err(TrajectoryError::Alignment(format!(
                    "sensor frame {k} at t = {} has no matching truth frame",
                    s.t
                )));
            }
            out.push(j);
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        fn increasing(mut ts: impl Iterator<Item = f64>) -> bool {
            let mut last = f64::NEG_INFINITY;
            ts.all(|t| {
                let ok = t.is_finite() && t > last;
                last = t;
                ok
            })
        }
        if !increasing(self.truth.iter().map(|f| f.t)) {
            return Err(TrajectoryError::Alignment(
                "truth timestamps must be finite and strictly increasing".into(),
            ));
        }
        if !increasing(self.sensors.iter().map(|f| f.t)) {
            return Err(TrajectoryError::Alignment(
                "sensor timestamps must be finite and strictly increasing".into(),
            ));
        }
        self.sensor_truth_index().map(|_| ())
    }
}

fn fmt_row(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| format!("{v}")).collect()
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), TrajectoryError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(io::BufWriter::new(file));
    let csv_err = |e: csv::Error| TrajectoryError::Io {
        path: path.to_path_buf(),
        source: io::Error::other(e.to_string()),
    };
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads `path` and returns rows ordered like `header`, whatever the column
/// order in the file.
fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>, TrajectoryError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(io::BufReader::new(file));
    let parse_err = |line: u64, message: String| TrajectoryError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let names = r
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let mut cols = Vec::with_capacity(header.len());
    for &col in header {
        match names.iter().position(|n| n == col) {
            Some(i) => cols.push(i),
            None => {
                return Err(TrajectoryError::MissingColumn {
                    path: path.to_path_buf(),
                    column: col.to_string(),
                })
            }
        }
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut row = Vec::with_capacity(cols.len());
        for (&i, &col) in cols.iter().zip(header) {
            let raw = rec.get(i).unwrap_or("");
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_err(line, format!("column '{col}': cannot parse '{raw}'")))?;
            row.push(v);
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_truth_csv(path: &Path, frames: &[GroundTruthFrame]) -> Result<(), TrajectoryError> {
    let rows: Vec<_> = frames.iter().map(|f| fmt_row(&f.to_row())).collect();
    write_csv(path, &TRUTH_HEADER, &rows)
}

pub fn read_truth_csv(path: &Path) -> Result<Vec<GroundTruthFrame>, TrajectoryError> {
    Ok(read_csv(path, &TRUTH_HEADER)?
        .iter()
        .map(|r| GroundTruthFrame::from_row(r))
        .collect())
}

pub fn write_sensor_csv(path: &Path, frames: &[SensorFrame]) -> Result<(), TrajectoryError> {
    let rows: Vec<_> = frames.iter().map(|f| fmt_row(&f.to_row())).collect();
    write_csv(path, &SENSOR_HEADER, &rows)
}

pub fn read_sensor_csv(path: &Path) -> Result<Vec<SensorFrame>, TrajectoryError> {
    Ok(read_csv(path, &SENSOR_HEADER)?
        .iter()
        .map(|r| SensorFrame::from_row(r))
        .collect())
}

/// Writes the bundle directory (created if needed) and returns the files
/// written.
pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<Vec<PathBuf>, TrajectoryError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let truth = dir.join(TRUTH_FILE);
    let sensors = dir.join(SENSOR_FILE);
    let meta = dir.join(META_FILE);
    write_truth_csv(&truth, &traj.truth)?;
    write_sensor_csv(&sensors, &traj.sensors)?;
    let text = toml::to_string(&traj.meta).map_err(|e| TrajectoryError::Meta {
        path: meta.clone(),
        message: e.to_string(),
    })?;
    fs::write(&meta, text).map_err(io_err(&meta))?;
    Ok(vec![truth, sensors, meta])
}

/// Reads a bundle directory. A bundle without `meta` is treated as an
/// externally supplied log named after its directory.
pub fn read_trajectory(dir: &Path) -> Result<Trajectory, TrajectoryError> {
    let truth = read_truth_csv(&dir.join(TRUTH_FILE))?;
    let sensors = read_sensor_csv(&dir.join(SENSOR_FILE))?;
    let meta_path = dir.join(META_FILE);
    let meta = if meta_path.exists() {
        let text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
        toml::from_str(&text).map_err(|e| TrajectoryError::Meta {
            path: meta_path.clone(),
            message: e.to_string(),
        })?
    } else {
        TrajectoryMeta {
            name: dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            source: "external".into(),
            ..Default::default()
        }
    };
    let mut traj = Trajectory {
        truth,
        sensors,
        meta,
    };
    traj.validate()?;
    if traj.meta.source == "external" {
        traj.meta.realized_ay_max = traj.ay_max();
    }
    Ok(traj)
}
