//! Command implementations behind the `vjmstiff` binary.
//!
//! Every command returns its artifacts as strings so they can be compared
//! byte for byte; [`atomic_write`] persists them. CSV floats are written with
//! 17 significant digits, JSON floats in shortest round-trip form.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DVector, Matrix6};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{detect_buckling, displacement_sweep, orthoglide_chain, BucklingReport, OrthoglideGeometry, Posture, SweepCurve, DEFAULT_DROP_FACTOR};
use crate::chain::{parse_chain, ChainModel};
use crate::equilibrium::{solve_equilibrium, EquilibriumState, SolverSettings};
use crate::error::{Error, Result};
use crate::se3::Twist6;
use crate::stiffness::{stiffness_loaded, StiffnessResult};

/// Fine sweep step, mm.
pub const FINE_STEP_MM: f64 = 0.001;
pub const DEFAULT_STEP_MM: f64 = 0.01;
pub const DEFAULT_DMAX_MM: f64 = 4.0;

/// Process exit status for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NoEquilibrium { .. } | Error::Unreachable { .. } => 2,
        Error::KinematicSingularity { .. } | Error::SingularConfiguration(_) => 3,
        _ => 1,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChainSource {
    File(PathBuf),
    /// Built-in Orthoglide leg with the default assumed geometry.
    Orthoglide(Posture),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::invalid(format!("unknown format `{other}` (expected csv or json)"))),
        }
    }
}

/// Options shared by all commands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: ChainSource,
    /// Passive joint values; zeros (or the posture's) when absent.
    pub q: Option<Vec<f64>>,
    pub settings: SolverSettings,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    pub fn new(source: ChainSource) -> Self {
        Self {
            source,
            q: None,
            settings: SolverSettings::default(),
            out: None,
            format: Format::Json,
        }
    }
}

pub struct LoadedChain {
    pub chain: ChainModel,
    pub q0: DVector<f64>,
    /// Present for built-in models whose geometry is partly assumed.
    pub geometry: Option<OrthoglideGeometry>,
}

pub fn load_chain(source: &ChainSource, q: Option<&[f64]>) -> Result<LoadedChain> {
    let (chain, q0, geometry) = match source {
        ChainSource::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            let chain = parse_chain(&text)?;
            let q0 = DVector::zeros(chain.n());
            (chain, q0, None)
        }
        ChainSource::Orthoglide(p) => {
            let g = OrthoglideGeometry::default();
            let (chain, q0) = orthoglide_chain(*p, &g)?;
            (chain, q0, Some(g))
        }
    };
    let q0 = match q {
        Some(values) => {
            if values.len() != chain.n() {
                return Err(Error::DimensionMismatch {
                    what: "q",
                    expected: chain.n(),
                    got: values.len(),
                });
            }
            DVector::from_column_slice(values)
        }
        None => q0,
    };
    Ok(LoadedChain { chain, q0, geometry })
}

/// Parses `a,b,c` into floats.
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("cannot parse `{}` as a number", s.trim())))
        })
        .collect()
}

pub fn parse_twist(text: &str) -> Result<Twist6> {
    let v = parse_list(text)?;
    if v.len() != 6 {
        return Err(Error::invalid(format!("expected 6 comma-separated values, got {}", v.len())));
    }
    Ok(Twist6::from_column_slice(&v))
}

/// Writes through a temporary file in the target directory and renames it,
/// so no partial file is left on failure.
pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let io = |e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source: e,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn f17(v: f64) -> String {
    format!("{v:.16e}")
}

fn rows(k: &Matrix6<f64>) -> Vec<Vec<f64>> {
    (0..6).map(|i| (0..6).map(|j| k[(i, j)]).collect()).collect()
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub k_theta_eigenvalues: Vec<f64>,
    pub q0: Vec<f64>,
    /// End-effector position at `q0` without load, m.
    pub position: [f64; 3],
    /// Row-major end-effector rotation at `q0` without load.
    pub rotation: [[f64; 3]; 3],
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let eigs: Vec<String> = self.k_theta_eigenvalues.iter().map(|v| format!("{v}")).collect();
        writeln!(f, "chain {}", self.name)?;
        writeln!(f, "n={} m={} K_θ eigs=[{}]", self.n, self.m, eigs.join(", "))?;
        write!(
            f,
            "unloaded position at q0: ({}, {}, {})",
            self.position[0], self.position[1], self.position[2]
        )
    }
}

pub fn cmd_validate(source: &ChainSource, q: Option<&[f64]>) -> Result<Diagnostics> {
    let loaded = load_chain(source, q)?;
    let c = &loaded.chain;
    let state = EquilibriumState::unloaded(c, &loaded.q0)?;
    let r = state.pose.orientation;
    Ok(Diagnostics {
        name: c.name().to_string(),
        n: c.n(),
        m: c.m(),
        k_theta_eigenvalues: c.k_theta_spectrum(),
        q0: loaded.q0.iter().copied().collect(),
        position: state.pose.position.into(),
        rotation: [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
        ],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub chain: String,
    pub seed: u64,
    pub offset: [f64; 6],
    pub q: Vec<f64>,
    pub theta: Vec<f64>,
    pub f: [f64; 6],
    pub iterations: usize,
    pub restarts: usize,
    pub residual_pose: f64,
    pub residual_static: f64,
    /// Row-major 6×6 stiffness.
    pub k: Vec<Vec<f64>>,
    pub eigenvalues: [f64; 6],
    pub asymmetry: f64,
    pub critical: bool,
    pub stability_eigenvalue: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assumed_geometry: Option<OrthoglideGeometry>,
}

fn solve_offset(loaded: &LoadedChain, offset: &Twist6, settings: &SolverSettings) -> Result<(EquilibriumState, StiffnessResult)> {
    let c = &loaded.chain;
    let start = EquilibriumState::unloaded(c, &loaded.q0)?;
    let state = if offset.iter().all(|v| *v == 0.0) {
        start
    } else {
        let target = start.pose.offset(offset);
        solve_equilibrium(c, &target, (&start.q, &start.theta), settings)?
    };
    let k = stiffness_loaded(c, &state)?;
    Ok((state, k))
}

/// Equilibrium and stiffness at the unloaded pose moved by `offset`.
pub fn cmd_equilibrium(cfg: &RunConfig, offset: &Twist6) -> Result<EquilibriumReport> {
    if cfg.format != Format::Json {
        return Err(Error::invalid("equilibrium output is JSON only"));
    }
    let loaded = load_chain(&cfg.source, cfg.q.as_deref())?;
    let (state, k) = solve_offset(&loaded, offset, &cfg.settings)?;
    Ok(EquilibriumReport {
        chain: loaded.chain.name().to_string(),
        seed: cfg.settings.rng_seed,
        offset: (*offset).into(),
        q: state.q.iter().copied().collect(),
        theta: state.theta.iter().copied().collect(),
        f: state.f.into(),
        iterations: state.iterations,
        restarts: state.restarts,
        residual_pose: state.residual_pose,
        residual_static: state.residual_static,
        k: rows(&k.k),
        eigenvalues: k.spectrum,
        asymmetry: k.asymmetry,
        critical: k.critical(),
        stability_eigenvalue: k.stability_eigenvalue,
        assumed_geometry: loaded.geometry,
    })
}

impl EquilibriumReport {
    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepDocument {
    pub chain: String,
    pub seed: u64,
    pub direction: [f64; 6],
    pub step_m: f64,
    pub samples: usize,
    #[serde(flatten)]
    pub report: BucklingReport,
    /// Set when the sweep stopped before the requested range.
    pub failure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assumed_geometry: Option<OrthoglideGeometry>,
}

pub struct SweepOutput {
    pub curve: SweepCurve,
    pub document: SweepDocument,
    pub csv: String,
    pub json: String,
}

pub const SWEEP_HEADER: &str = "delta_m,force_n,tangent_n_per_m,iterations,restarts,critical_flag";

pub fn sweep_csv(curve: &SweepCurve) -> String {
    let mut out = String::with_capacity(64 * (curve.samples.len() + 1));
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for s in &curve.samples {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            f17(s.delta),
            f17(s.force),
            f17(s.tangent),
            s.iterations,
            s.restarts,
            u8::from(s.critical)
        ));
    }
    out
}

/// Displacement sweep along `direction` (normalized here) up to `dmax_mm`.
pub fn cmd_sweep(cfg: &RunConfig, direction: &Twist6, dmax_mm: f64, step_mm: f64) -> Result<SweepOutput> {
    let norm = direction.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::invalid("sweep direction must be non-zero"));
    }
    let d = direction / norm;
    let loaded = load_chain(&cfg.source, cfg.q.as_deref())?;
    let start = EquilibriumState::unloaded(&loaded.chain, &loaded.q0)?;
    let curve = displacement_sweep(&loaded.chain, &start, &d, dmax_mm * 1e-3, step_mm * 1e-3, &cfg.settings)?;
    let report = detect_buckling(&curve, DEFAULT_DROP_FACTOR);
    let document = SweepDocument {
        chain: loaded.chain.name().to_string(),
        seed: cfg.settings.rng_seed,
        direction: d.into(),
        step_m: curve.step,
        samples: curve.samples.len(),
        report,
        failure: curve.failure.as_ref().map(|f| format!("at {} m: {}", f.delta, f.message)),
        assumed_geometry: loaded.geometry,
    };
    let csv = sweep_csv(&curve);
    let json = to_json(&document)?;
    Ok(SweepOutput { curve, document, csv, json })
}

/// One coordinate of a map grid.
#[derive(Debug, Clone, PartialEq)]
pub enum GridAxis {
    /// Passive joint, zero-based.
    Joint(usize),
    /// Component of the Cartesian offset, 0..6 for x, y, z, rx, ry, rz.
    Offset(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRange {
    pub axis: GridAxis,
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl std::str::FromStr for GridRange {
    type Err = Error;

    /// `AXIS:START:END:COUNT` with `AXIS` one of `q1…qn`, `x`, `y`, `z`,
    /// `rx`, `ry`, `rz`. Offsets are in m and rad.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [axis, start, end, count] = parts[..] else {
            return Err(Error::invalid(format!("grid `{s}` is not AXIS:START:END:COUNT")));
        };
        let axis = match axis.to_ascii_lowercase().as_str() {
            "x" => GridAxis::Offset(0),
            "y" => GridAxis::Offset(1),
            "z" => GridAxis::Offset(2),
            "rx" => GridAxis::Offset(3),
            "ry" => GridAxis::Offset(4),
            "rz" => GridAxis::Offset(5),
            a => match a.strip_prefix('q').and_then(|i| i.parse::<usize>().ok()) {
                Some(i) if i >= 1 => GridAxis::Joint(i - 1),
                _ => return Err(Error::invalid(format!("unknown grid axis `{axis}`"))),
            },
        };
        let num = |t: &str| t.parse::<f64>().map_err(|_| Error::invalid(format!("cannot parse `{t}` in grid `{s}`")));
        let count = count
            .parse::<usize>()
            .ok()
            .filter(|c| *c >= 1)
            .ok_or_else(|| Error::invalid(format!("grid count in `{s}` must be a positive integer")))?;
        Ok(GridRange {
            axis,
            start: num(start)?,
            end: num(end)?,
            count,
        })
    }
}

impl GridRange {
    fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        (0..self.count)
            .map(|i| self.start + (self.end - self.start) * i as f64 / (self.count - 1) as f64)
            .collect()
    }
}

/// One evaluation point of a map.
#[derive(Debug, Clone, PartialEq)]
pub struct MapPoint {
    pub label: String,
    pub q: Vec<f64>,
    pub offset: [f64; 6],
}

/// Cartesian product of `ranges`; the first range varies slowest.
pub fn grid_points(q0: &[f64], ranges: &[GridRange]) -> Result<Vec<MapPoint>> {
    for r in ranges {
        if let GridAxis::Joint(i) = r.axis {
            if i >= q0.len() {
                return Err(Error::invalid(format!("grid joint q{} out of range (n = {})", i + 1, q0.len())));
            }
        }
    }
    let mut points = vec![MapPoint {
        label: String::new(),
        q: q0.to_vec(),
        offset: [0.0; 6],
    }];
    for r in ranges {
        let mut next = Vec::with_capacity(points.len() * r.count);
        for p in &points {
            for v in r.values() {
                let mut p = p.clone();
                match r.axis {
                    GridAxis::Joint(i) => p.q[i] = v,
                    GridAxis::Offset(i) => p.offset[i] = v,
                }
                next.push(p);
            }
        }
        points = next;
    }
    for (i, p) in points.iter_mut().enumerate() {
        p.label = i.to_string();
    }
    Ok(points)
}

/// The four named postures of the built-in leg.
pub fn posture_points(postures: &[Posture]) -> Vec<MapPoint> {
    postures
        .iter()
        .map(|p| MapPoint {
            label: p.to_string(),
            q: p.joints().to_vec(),
            offset: [0.0; 6],
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct MapRow {
    pub label: String,
    pub q: Vec<f64>,
    pub offset: [f64; 6],
    /// Ascending eigenvalues of K; NaN when the point failed.
    pub eigenvalues: [f64; 6],
    /// `dᵀ·K·d` along the map direction.
    pub k_dir: f64,
    pub critical: bool,
    pub error: Option<String>,
}

/// Stiffness spectrum at every point; points are independent and evaluated
/// in parallel, each with seed `settings.rng_seed + index`.
pub fn cmd_map(cfg: &RunConfig, points: &[MapPoint], direction: &Twist6) -> Result<(Vec<MapRow>, String)> {
    let norm = direction.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::invalid("map direction must be non-zero"));
    }
    let d = direction / norm;
    let base = load_chain(&cfg.source, cfg.q.as_deref())?;
    let n = base.chain.n();
    if let Some(p) = points.iter().find(|p| p.q.len() != n) {
        return Err(Error::DimensionMismatch {
            what: "map point q",
            expected: n,
            got: p.q.len(),
        });
    }
    let rows: Vec<MapRow> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let settings = SolverSettings {
                rng_seed: cfg.settings.rng_seed.wrapping_add(i as u64),
                ..cfg.settings.clone()
            };
            let loaded = LoadedChain {
                chain: base.chain.clone(),
                q0: DVector::from_column_slice(&p.q),
                geometry: None,
            };
            let result = solve_offset(&loaded, &Twist6::from(p.offset), &settings);
            match result {
                Ok((_, k)) => MapRow {
                    label: p.label.clone(),
                    q: p.q.clone(),
                    offset: p.offset,
                    eigenvalues: k.spectrum,
                    k_dir: k.directional(&d),
                    critical: k.critical(),
                    error: None,
                },
                Err(e) => MapRow {
                    label: p.label.clone(),
                    q: p.q.clone(),
                    offset: p.offset,
                    eigenvalues: [f64::NAN; 6],
                    k_dir: f64::NAN,
                    critical: true,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let text = match cfg.format {
        Format::Csv => map_csv(&rows, n),
        Format::Json => to_json(&rows)?,
    };
    Ok((rows, text))
}

fn map_csv(rows: &[MapRow], n: usize) -> String {
    let mut header: Vec<String> = vec!["label".into()];
    header.extend((1..=n).map(|i| format!("q{i}")));
    header.extend(["x", "y", "z", "rx", "ry", "rz"].map(|s| format!("offset_{s}")));
    header.extend((1..=6).map(|i| format!("eig{i}")));
    header.extend(["k_dir".to_string(), "critical_flag".to_string(), "error".to_string()]);
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let mut cells = vec![r.label.clone()];
        cells.extend(r.q.iter().map(|v| f17(*v)));
        cells.extend(r.offset.iter().map(|v| f17(*v)));
        cells.extend(r.eigenvalues.iter().map(|v| f17(*v)));
        cells.push(f17(r.k_dir));
        cells.push(u8::from(r.critical).to_string());
        // quoted so commas in messages keep the column count
        cells.push(r.error.as_ref().map_or(String::new(), |e| format!("\"{}\"", e.replace('"', "'"))));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
