//! File formats: scenes, dense matches, run configurations, results and
//! traces.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::losses::{LossConfig, Mode};
use crate::metrics::MetricSummary;
use crate::optimizer::{OptimizerConfig, Trace};
use crate::problem::{Correspondence, Frame, Params, SceneProblem};
use crate::uncertainty::BcVariant;

pub const TRACE_HEADER: [&str; 15] = [
    "iteration", "total", "reproj", "bha", "rra5", "rra10", "rra15", "rta5", "rta10", "rta15",
    "maa5", "maa10", "maa15", "fov_err", "ms",
];

pub const DEFAULT_STRIDE: u32 = 16;
pub const DEFAULT_CONF_FLOOR: f64 = 0.01;

/// 3×4 row-major world-to-camera matrix.
pub type PoseMatrix = [[f64; 4]; 3];

pub fn pose_to_matrix(pose: &Pose) -> PoseMatrix {
    let r = pose.matrix();
    let t = pose.translation;
    std::array::from_fn(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)], t[i]])
}

pub fn pose_from_matrix(m: &PoseMatrix) -> Result<Pose> {
    let r = Matrix3::from_fn(|i, j| m[i][j]);
    let orth = (r.transpose() * r - Matrix3::identity()).abs().max();
    if orth > 1e-6 || r.determinant() < 0.0 {
        return Err(Error::Invalid(
            "pose rotation block is not a proper rotation".into(),
        ));
    }
    Ok(Pose::from_matrix(&r, Vector3::new(m[0][3], m[1][3], m[2][3])))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub id: usize,
    pub width: f64,
    pub height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_pose: Option<PoseMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_fov: Option<f64>,
}

/// One match; also the record shape of dense-match files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchRecord {
    pub i: usize,
    pub j: usize,
    pub px: f64,
    pub py: f64,
    pub qx: f64,
    pub qy: f64,
    pub conf: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneMeta {
    pub generator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub units: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub frames: Vec<FrameRecord>,
    pub correspondences: Vec<MatchRecord>,
    pub meta: SceneMeta,
}

impl SceneFile {
    pub fn from_problem(problem: &SceneProblem, meta: SceneMeta) -> SceneFile {
        SceneFile {
            frames: problem
                .frames
                .iter()
                .map(|f| FrameRecord {
                    id: f.id,
                    width: f.width,
                    height: f.height,
                    gt_pose: f.gt_pose.as_ref().map(pose_to_matrix),
                    gt_fov: f.gt_fov,
                })
                .collect(),
            correspondences: problem
                .correspondences
                .iter()
                .map(|c| MatchRecord {
                    i: c.frame_i,
                    j: c.frame_j,
                    px: c.p.x,
                    py: c.p.y,
                    qx: c.q.x,
                    qy: c.q.y,
                    conf: c.confidence,
                })
                .collect(),
            meta,
        }
    }

    pub fn to_problem(&self) -> Result<SceneProblem> {
        let frames = self
            .frames
            .iter()
            .map(|f| {
                Ok(Frame {
                    id: f.id,
                    width: f.width,
                    height: f.height,
                    gt_pose: f.gt_pose.as_ref().map(pose_from_matrix).transpose()?,
                    gt_fov: f.gt_fov,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let corrs = self
            .correspondences
            .iter()
            .map(|m| {
                if !(0.0..=1.0).contains(&m.conf) {
                    return Err(Error::Invalid(format!("confidence {} outside [0, 1]", m.conf)));
                }
                Ok(Correspondence {
                    frame_i: m.i,
                    frame_j: m.j,
                    p: Vector2::new(m.px, m.py),
                    q: Vector2::new(m.qx, m.qy),
                    confidence: m.conf,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SceneProblem::new(frames, corrs)
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Parses a JSON file, reporting the location of any schema violation.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let mut de = serde_json::Deserializer::from_reader(BufReader::new(open(path)?));
    serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        message: format!("at `{}`: {}", e.path(), e.inner()),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_scene(path: &Path) -> Result<SceneProblem> {
    read_json::<SceneFile>(path)?
        .to_problem()
        .map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

/// Reads a JSON-lines dense-match file.
pub fn read_dense_matches(path: &Path) -> Result<Vec<MatchRecord>> {
    let reader = BufReader::new(open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut de = serde_json::Deserializer::from_str(&line);
        let rec: MatchRecord = serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            message: format!("line {}, at `{}`: {}", n + 1, e.path(), e.inner()),
        })?;
        if !(0.0..=1.0).contains(&rec.conf) {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                message: format!("line {}, at `conf`: {} outside [0, 1]", n + 1, rec.conf),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

fn on_grid(v: f64, stride: u32) -> bool {
    v >= 0.0 && (v / stride as f64).fract() == 0.0
}

/// Keeps matches whose source pixel lies on the `stride` grid and whose
/// confidence exceeds `conf_floor`.
pub fn sample_correspondences(
    records: &[MatchRecord],
    stride: u32,
    conf_floor: f64,
) -> Result<Vec<MatchRecord>> {
    if stride == 0 {
        return Err(Error::Invalid("stride must be at least 1".into()));
    }
    let kept: Vec<MatchRecord> = records
        .iter()
        .filter(|r| on_grid(r.px, stride) && on_grid(r.py, stride) && r.conf > conf_floor)
        .copied()
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyAfterSampling);
    }
    Ok(kept)
}

/// Indices of `n` frames chosen from a pool of ten.
pub fn select_eval_frames(n: usize) -> Result<Vec<usize>> {
    const TABLE: [&[usize]; 9] = [
        &[0, 9],
        &[0, 4, 9],
        &[0, 3, 6, 9],
        &[0, 2, 4, 6, 9],
        &[0, 2, 4, 5, 7, 9],
        &[0, 1, 3, 5, 6, 7, 9],
        &[0, 1, 2, 4, 5, 6, 8, 9],
        &[0, 1, 2, 3, 4, 5, 6, 7, 9],
        &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9],
    ];
    if !(2..=10).contains(&n) {
        return Err(Error::OutOfRange {
            what: "frame count",
            value: n as f64,
            range: "[2, 10]",
        });
    }
    Ok(TABLE[n - 2].to_vec())
}

/// Everything needed to run the optimizer on a scene file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub lambda: f64,
    pub eta: f64,
    pub symmetric: bool,
    pub use_confidence: bool,
    pub bc_variant: BcVariant,
    pub anisotropic: bool,
    pub per_frame_fov: bool,
    pub optimizer: OptimizerConfig,
    pub seeds: Vec<u64>,
    pub scene: PathBuf,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let loss = LossConfig::default();
        RunConfig {
            mode: loss.mode,
            lambda: loss.lambda,
            eta: loss.eta,
            symmetric: loss.symmetric,
            use_confidence: loss.use_confidence,
            bc_variant: loss.bc_variant,
            anisotropic: false,
            per_frame_fov: false,
            optimizer: OptimizerConfig::default(),
            seeds: vec![0],
            scene: PathBuf::from("scene.json"),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn loss(&self) -> LossConfig {
        LossConfig {
            mode: self.mode,
            lambda: self.lambda,
            eta: self.eta,
            symmetric: self.symmetric,
            use_confidence: self.use_confidence,
            bc_variant: self.bc_variant,
            ..LossConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.loss().validate()?;
        self.optimizer.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Invalid("seeds must not be empty".into()));
        }
        Ok(())
    }
}

/// Final state of one optimization run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunResult {
    pub mode: Mode,
    pub lambda: f64,
    pub eta: f64,
    pub seed: u64,
    pub iterations: usize,
    pub anisotropic: bool,
    /// Estimated field of view per frame, degrees.
    pub fov: Vec<f64>,
    pub poses: Vec<PoseMatrix>,
    pub total: f64,
    pub reproj: f64,
    pub bha: f64,
    pub skipped: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricSummary>,
}

impl RunResult {
    pub fn estimated_poses(&self) -> Result<Vec<Pose>> {
        self.poses.iter().map(pose_from_matrix).collect()
    }

    pub fn frame_fovs(params: &Params) -> Vec<f64> {
        (0..params.poses.len()).map(|k| params.fov(k)).collect()
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Writes the trace as CSV with the [`TRACE_HEADER`] columns. Missing
/// metrics and timings are left empty.
pub fn export_trace<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::io("trace", std::io::Error::other(e));
    w.write_record(TRACE_HEADER).map_err(wrap)?;
    for s in &trace.snapshots {
        let mut row = vec![s.iteration.to_string(), num(s.total), num(s.reproj), num(s.bha)];
        match &s.metrics {
            Some(m) => {
                row.extend(m.rra.iter().chain(&m.rta).chain(&m.maa).map(|v| num(*v)));
                row.push(num(m.fov_error));
            }
            None => row.extend(std::iter::repeat_n(String::new(), 10)),
        }
        row.push(s.ms.map(num).unwrap_or_default());
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("trace", e))
}

pub fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    export_trace(trace, BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// A trace CSV read back as named numeric columns; empty cells become NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TraceTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn read_trace(path: &Path) -> Result<TraceTable> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let schema = |message: String| Error::Schema {
        path: path.to_path_buf(),
        message,
    };
    let columns: Vec<String> = r
        .headers()
        .map_err(|e| schema(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| schema(e.to_string()))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(k, cell)| {
                if cell.is_empty() {
                    Ok(f64::NAN)
                } else {
                    cell.parse::<f64>().map_err(|_| {
                        schema(format!("row {}, column `{}`: not a number: {cell:?}", n + 1, columns[k]))
                    })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(TraceTable { columns, rows })
}

/// Renders the named columns of a trace against iteration as an SVG line
/// chart. Columns with no finite value are skipped.
pub fn plot_trace_svg(table: &TraceTable, columns: &[&str], path: &Path) -> Result<()> {
    use plotters::prelude::*;

    let x = table
        .column("iteration")
        .ok_or_else(|| Error::Invalid("trace has no iteration column".into()))?;
    let mut series = Vec::new();
    for name in columns {
        let y = table
            .column(name)
            .ok_or_else(|| Error::Invalid(format!("trace has no column `{name}`")))?;
        let pts: Vec<(f64, f64)> = x
            .iter()
            .zip(&y)
            .filter(|(_, v)| v.is_finite())
            .map(|(a, b)| (*a, *b))
            .collect();
        if !pts.is_empty() {
            series.push((name.to_string(), pts));
        }
    }
    let all = || series.iter().flat_map(|(_, p)| p.iter());
    let (x0, x1) = all().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y0, y1) = all().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let (x0, x1) = if x0.is_finite() { (x0, x1.max(x0 + 1.0)) } else { (0.0, 1.0) };
    let (y0, y1) = if y0.is_finite() { (y0, if y1 > y0 { y1 } else { y0 + 1.0 }) } else { (0.0, 1.0) };

    let draw_err = |e: String| Error::io(path, std::io::Error::other(e));
    let root = SVGBackend::new(path, (800, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| draw_err(e.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(|e| draw_err(e.to_string()))?;
    for (k, (_, pts)) in series.iter().enumerate() {
        let color = Palette99::pick(k);
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(|e| draw_err(e.to_string()))?;
    }
    root.present().map_err(|e| draw_err(e.to_string()))
}
