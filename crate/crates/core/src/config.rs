//! Run configuration: a JSON document with strict key checking.
//!
//! Fields left out take their defaults. Several entries accept the string
//! `"auto"` in place of a number.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::frame::FieldSystem;
use crate::grid::{ScalarField, TorusGrid};
use crate::lagrangian::{Coercivity, Drift, LagrangianSpec, Potential, TabulatedLagrangian};

/// A number or `"auto"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Auto<T> {
    Value(T),
    Word(AutoWord),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoWord {
    Auto,
}

impl<T: Copy> Auto<T> {
    pub const AUTO: Auto<T> = Auto::Word(AutoWord::Auto);

    pub fn value(&self) -> Option<T> {
        match self {
            Auto::Value(v) => Some(*v),
            Auto::Word(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrameConfig {
    Name(String),
    Table {
        file: PathBuf,
        #[serde(default = "default_m")]
        m: usize,
    },
}

fn default_m() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DriftConfig {
    Named(String),
    Constant(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero,
    Sin2,
    TwoBump,
    Constant(f64),
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LagrangianConfig {
    Mane {
        #[serde(default = "zero_drift")]
        drift: DriftConfig,
        #[serde(default = "zero_potential")]
        potential: PotentialConfig,
    },
    Custom {
        table: PathBuf,
        sigma: f64,
        k1: f64,
        k2: f64,
    },
}

fn zero_drift() -> DriftConfig {
    DriftConfig::Named("zero".into())
}

fn zero_potential() -> PotentialConfig {
    PotentialConfig::Zero
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub d: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 32, d: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlsConfig {
    pub n_u: usize,
    /// `"auto"`: `2 sqrt(kappa0)`, at least 1.
    pub radius: Auto<f64>,
    pub courant: f64,
}

impl Default for ControlsConfig {
    fn default() -> Self {
        Self {
            n_u: 13,
            radius: Auto::AUTO,
            courant: crate::lax_oleinik::DEFAULT_COURANT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    /// Horizon of the long-time estimator.
    pub t_max: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { dt: 0.02, t_max: 20.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticalConfig {
    pub k_modes: usize,
    pub iters: usize,
    pub restarts: usize,
    /// Ergodic stopping tolerance (sup-norm update per unit time).
    pub tol: f64,
    pub max_iters: usize,
    /// Certificate slack.
    pub slack: f64,
    /// Critical value used by `aubry` and `mather`; computed when absent.
    pub c: Option<f64>,
}

impl Default for CriticalConfig {
    fn default() -> Self {
        Self {
            k_modes: 3,
            iters: 200,
            restarts: 4,
            tol: 1e-4,
            max_iters: 50_000,
            slack: 0.05,
            c: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierConfig {
    pub base_steps: usize,
    pub t_min: f64,
    pub t_max: f64,
    /// `"auto"`: every node up to 1024, else a strided subsample.
    pub sources: Auto<usize>,
    pub stabilization_tol: f64,
    pub relax_tol: f64,
    /// Time of the fixed-point check on a barrier row.
    pub t_check: f64,
    /// Shift of `c` in the wrong-c negative control.
    pub wrong_c_shift: f64,
    pub triangle_samples: usize,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self {
            base_steps: 4,
            t_min: 2.56,
            t_max: 20.48,
            sources: Auto::AUTO,
            stabilization_tol: 1e-3,
            relax_tol: 1e-5,
            t_check: 1.0,
            wrong_c_shift: 0.2,
            triangle_samples: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpConfig {
    /// `"auto"`: `n / 2`.
    pub n_lp: Auto<usize>,
    pub n_u_lp: usize,
    /// `"auto"`: same as `critical.k_modes`.
    pub k_modes: Auto<usize>,
    pub tol: f64,
}

impl Default for LpConfig {
    fn default() -> Self {
        Self {
            n_lp: Auto::AUTO,
            n_u_lp: 5,
            k_modes: Auto::AUTO,
            tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdsConfig {
    /// `"auto"`: `3 eps_num`.
    pub aubry_eps: Auto<f64>,
    pub w_min: f64,
}

impl Default for ThresholdsConfig {
    fn default() -> Self {
        Self {
            aubry_eps: Auto::AUTO,
            w_min: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasuresConfig {
    /// Start of the occupation trajectories.
    pub x0: Vec<f64>,
    /// Horizons of the occupation measures.
    pub horizons: Vec<f64>,
    /// Cell offset applied to the Mather set before the inclusion check;
    /// only for negative controls.
    pub inject_shift: Option<Vec<i64>>,
}

impl Default for MeasuresConfig {
    fn default() -> Self {
        Self {
            x0: vec![0.25, 0.3],
            horizons: vec![10.0, 40.0],
            inject_shift: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_frame")]
    pub frame: FrameConfig,
    pub lagrangian: LagrangianConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub controls: ControlsConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub critical: CriticalConfig,
    #[serde(default)]
    pub barrier: BarrierConfig,
    #[serde(default)]
    pub lp: LpConfig,
    #[serde(default)]
    pub thresholds: ThresholdsConfig,
    #[serde(default)]
    pub measures: MeasuresConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_frame() -> FrameConfig {
    FrameConfig::Name("grushin-periodic".into())
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Everything a command needs, built from a validated config.
pub struct Problem {
    pub grid: TorusGrid,
    pub sys: FieldSystem,
    pub spec: LagrangianSpec,
    pub radius: f64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path`; relative table paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let FrameConfig::Table { file, .. } = &mut cfg.frame {
            resolve(file);
        }
        match &mut cfg.lagrangian {
            LagrangianConfig::Mane {
                potential: PotentialConfig::File(p),
                ..
            } => resolve(p),
            LagrangianConfig::Custom { table, .. } => resolve(table),
            _ => {}
        }
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON serialization. The output directory
    /// is left out since it does not affect any result.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn lp_nodes(&self) -> usize {
        self.lp.n_lp.value().unwrap_or(self.grid.n / 2)
    }

    pub fn lp_modes(&self) -> usize {
        self.lp.k_modes.value().unwrap_or(self.critical.k_modes)
    }

    /// Checks every tolerance and the CFL condition, then builds the grid,
    /// frame and Lagrangian.
    pub fn build(&self) -> Result<Problem> {
        let positive = [
            ("time.dt", self.time.dt),
            ("time.t_max", self.time.t_max),
            ("critical.tol", self.critical.tol),
            ("critical.slack", self.critical.slack),
            ("barrier.t_min", self.barrier.t_min),
            ("barrier.t_max", self.barrier.t_max),
            ("barrier.stabilization_tol", self.barrier.stabilization_tol),
            ("barrier.relax_tol", self.barrier.relax_tol),
            ("barrier.t_check", self.barrier.t_check),
            ("lp.tol", self.lp.tol),
            ("thresholds.w_min", self.thresholds.w_min),
            ("controls.courant", self.controls.courant),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(e) = self.thresholds.aubry_eps.value() {
            if !(e > 0.0) {
                return Err(Error::Config(format!("thresholds.aubry_eps must be positive, got {e}")));
            }
        }
        if let Some(r) = self.controls.radius.value() {
            if !(r > 0.0) {
                return Err(Error::Config(format!("controls.radius must be positive, got {r}")));
            }
        }
        if self.measures.horizons.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::Config("measures.horizons must be positive".into()));
        }
        if self.lp.n_u_lp.is_multiple_of(2) || self.controls.n_u.is_multiple_of(2) {
            return Err(Error::Config("control lattices need an odd number of nodes per axis".into()));
        }
        let grid = TorusGrid::new(self.grid.d, self.grid.n).map_err(|e| Error::Config(e.to_string()))?;
        if self.lp_nodes() < 4 {
            return Err(Error::Config(format!("lp.n_lp = {} is below 4", self.lp_nodes())));
        }
        if self.measures.x0.len() != grid.dim() {
            return Err(Error::Config(format!("measures.x0 needs {} coordinates", grid.dim())));
        }
        let sys = match &self.frame {
            FrameConfig::Name(name) => FieldSystem::by_name(name, grid.dim())?,
            FrameConfig::Table { file, m } => {
                let text = read(file)?;
                FieldSystem::from_table_text(&file.display().to_string(), grid.dim(), *m, &text)?
            }
        };
        let m = sys.control_dim();
        let spec = match &self.lagrangian {
            LagrangianConfig::Mane { drift, potential } => {
                let drift = match drift {
                    DriftConfig::Named(s) if s == "zero" => Drift::Zero,
                    DriftConfig::Named(s) => return Err(Error::Config(format!("unknown drift `{s}`"))),
                    DriftConfig::Constant(v) => Drift::Constant(v.clone()),
                };
                let potential = match potential {
                    PotentialConfig::Zero => Potential::Zero,
                    PotentialConfig::Sin2 => Potential::Sin2,
                    PotentialConfig::TwoBump => Potential::TwoBump,
                    PotentialConfig::Constant(g) => Potential::Constant(*g),
                    PotentialConfig::File(p) => Potential::Tabulated(ScalarField::from_text(&read(p)?)?),
                };
                LagrangianSpec::mane(grid, m, drift, potential)?
            }
            LagrangianConfig::Custom { table, sigma, k1, k2 } => {
                let t = TabulatedLagrangian::from_text(&read(table)?)?;
                LagrangianSpec::custom(
                    t,
                    Coercivity {
                        sigma: *sigma,
                        k1: *k1,
                        k2: *k2,
                    },
                )?
            }
        };
        let radius = match self.controls.radius.value() {
            Some(r) => r,
            None => spec.control_radius_bound(1.0)?,
        };
        crate::lax_oleinik::check_cfl(grid, self.time.dt, radius, sys.max_operator_norm(), self.controls.courant)?;
        Ok(Problem { grid, sys, spec, radius })
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
