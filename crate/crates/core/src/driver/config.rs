//! Run configuration: TOML schema, validation and construction of the
//! problem it describes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::DriverError;
use crate::loads::{LoadSet, LoadSpec};
use crate::materials::models::parameter_names;
use crate::materials::{material_from_name, MaterialModel};
use crate::mesh::{build_structured_mesh, tag_boundary, BoundaryPartition, Mesh, Rect, Side, SideRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    #[serde(default = "default_cells")]
    pub nx: usize,
    #[serde(default = "default_cells")]
    pub ny: usize,
    /// `[x0, y0, x1, y1]`.
    #[serde(default = "unit_rect")]
    pub rect: [f64; 4],
    /// Plain-text mesh file; overrides `nx`, `ny` and `rect`.
    #[serde(default)]
    pub file: Option<PathBuf>,
}

fn default_cells() -> usize {
    8
}

fn unit_rect() -> [f64; 4] {
    [0.0, 0.0, 1.0, 1.0]
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self {
            nx: default_cells(),
            ny: default_cells(),
            rect: unit_rect(),
            file: None,
        }
    }
}

/// Sides carrying Dirichlet data, per field. The remaining sides are
/// Neumann.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    #[serde(default = "all_sides")]
    pub u_dirichlet: Vec<Side>,
    #[serde(default = "all_sides")]
    pub phi_dirichlet: Vec<Side>,
    #[serde(default)]
    pub p_dirichlet: Vec<Side>,
}

fn all_sides() -> Vec<Side> {
    vec![Side::Left, Side::Right, Side::Bottom, Side::Top]
}

impl Default for BoundarySpec {
    fn default() -> Self {
        Self {
            u_dirichlet: all_sides(),
            phi_dirichlet: all_sides(),
            p_dirichlet: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    pub name: String,
    /// Model parameters overriding the built-in defaults.
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

/// Initial polarization.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    #[default]
    Zero,
    Constant {
        value: [f64; 2],
    },
    /// `value · sin(π x̂) sin(π ŷ)` in coordinates scaled to the unit square.
    Mode {
        value: [f64; 2],
    },
    /// Independent uniform samples in `[-amplitude, amplitude]`.
    Random {
        amplitude: f64,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_final: f64,
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    #[serde(default = "default_threshold")]
    pub blowup_norm_threshold: f64,
}

fn default_threshold() -> f64 {
    1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSpec {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_iters() -> usize {
    50
}

impl Default for PicardSpec {
    fn default() -> Self {
        Self {
            enabled: false,
            tol: default_tol(),
            max_iters: default_iters(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Record every `cadence`-th accepted step.
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    /// Write VTK snapshots at the output cadence.
    #[serde(default = "yes")]
    pub snapshots: bool,
}

fn default_cadence() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            cadence: default_cadence(),
            checkpoint: None,
            snapshots: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    /// Pointwise coercivity check before each elliptic solve.
    #[serde(default = "yes")]
    pub preflight: bool,
    /// Permit empty Dirichlet parts for `u` or `φ`.
    #[serde(default)]
    pub assume_invertible: bool,
}

impl Default for CheckSpec {
    fn default() -> Self {
        Self {
            preflight: true,
            assume_invertible: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mesh: MeshSpec,
    #[serde(default)]
    pub boundary: BoundarySpec,
    pub material: MaterialSpec,
    #[serde(default)]
    pub loads: LoadSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    pub time: TimeSpec,
    #[serde(default)]
    pub picard: PicardSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub checks: CheckSpec,
}

fn positive(key: &str, v: f64) -> Result<(), DriverError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(DriverError::Config(format!("{key} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, DriverError> {
        let cfg: Self = toml::from_str(text).map_err(|e| DriverError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        let t = &self.time;
        positive("time.t_final", t.t_final)?;
        positive("time.dt_min", t.dt_min)?;
        positive("time.dt0", t.dt0)?;
        positive("time.dt_max", t.dt_max)?;
        positive("time.blowup_norm_threshold", t.blowup_norm_threshold)?;
        if t.dt_min > t.dt0 {
            return Err(DriverError::Config(format!(
                "time.dt_min ({}) must not exceed time.dt0 ({})",
                t.dt_min, t.dt0
            )));
        }
        if t.dt0 > t.dt_max {
            return Err(DriverError::Config(format!(
                "time.dt0 ({}) must not exceed time.dt_max ({})",
                t.dt0, t.dt_max
            )));
        }
        positive("picard.tol", self.picard.tol)?;
        if self.picard.max_iters == 0 {
            return Err(DriverError::Config("picard.max_iters must be at least 1".into()));
        }
        if self.output.cadence == 0 {
            return Err(DriverError::Config("output.cadence must be at least 1".into()));
        }
        if self.mesh.file.is_none() {
            if self.mesh.nx == 0 || self.mesh.ny == 0 {
                return Err(DriverError::Config("mesh.nx and mesh.ny must be at least 1".into()));
            }
            let [x0, y0, x1, y1] = self.mesh.rect;
            if !(x1 > x0 && y1 > y0) {
                return Err(DriverError::Config("mesh.rect must satisfy x1 > x0 and y1 > y0".into()));
            }
        }
        let names = parameter_names(&self.material.name)
            .ok_or_else(|| DriverError::Config(format!("unknown material `{}`", self.material.name)))?;
        for (k, v) in &self.material.params {
            if !names.contains(&k.as_str()) {
                return Err(DriverError::Config(format!(
                    "material.{k} is not a parameter of `{}` (expected one of {})",
                    self.material.name,
                    names.join(", ")
                )));
            }
            if !v.is_finite() {
                return Err(DriverError::Config(format!("material.{k} must be finite")));
            }
        }
        if let InitialSpec::Random { amplitude, .. } = self.initial {
            if !(amplitude.is_finite() && amplitude >= 0.0) {
                return Err(DriverError::Config("initial.amplitude must be non-negative".into()));
            }
        }
        self.loads.build().map_err(|e| DriverError::Config(format!("loads: {e}")))?;
        Ok(())
    }

    /// Hash of every setting that affects the computed trajectory. Final
    /// time and output settings are excluded, so a run may be continued
    /// with a later `t_final`.
    pub fn physics_hash(&self) -> String {
        let key = serde_json::json!({
            "mesh": self.mesh,
            "boundary": self.boundary,
            "material": self.material,
            "loads": self.loads,
            "initial": self.initial,
            "dt": [self.time.dt0, self.time.dt_min, self.time.dt_max, self.time.blowup_norm_threshold],
            "picard": self.picard,
            "checks": self.checks,
        });
        let digest = Sha256::digest(key.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn build_mesh(&self) -> Result<Mesh, DriverError> {
        match &self.mesh.file {
            Some(path) => Ok(Mesh::read(path)?),
            None => {
                let [x0, y0, x1, y1] = self.mesh.rect;
                Ok(build_structured_mesh(self.mesh.nx, self.mesh.ny, Rect::new(x0, y0, x1, y1))?)
            }
        }
    }

    pub fn build(&self) -> Result<Problem, DriverError> {
        self.validate()?;
        let mesh = self.build_mesh()?;
        let rect = bounding_rect(&mesh);
        let rule = |sides: &[Side]| SideRule {
            rect,
            dirichlet: sides.to_vec(),
        };
        let partition = tag_boundary(
            &mesh,
            &rule(&self.boundary.u_dirichlet),
            &rule(&self.boundary.phi_dirichlet),
            &rule(&self.boundary.p_dirichlet),
        )?;
        let model = material_from_name(&self.material.name, &self.material.params)?;
        let loads = self.loads.build().map_err(|e| DriverError::Config(format!("loads: {e}")))?;
        let p0 = initial_field(&self.initial, &mesh, &rect);
        Ok(Problem {
            mesh,
            partition,
            model,
            loads,
            p0,
        })
    }
}

fn bounding_rect(mesh: &Mesh) -> Rect {
    let mut r = Rect::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in &mesh.vertices {
        r.x0 = r.x0.min(v[0]);
        r.y0 = r.y0.min(v[1]);
        r.x1 = r.x1.max(v[0]);
        r.y1 = r.y1.max(v[1]);
    }
    r
}

pub fn initial_field(spec: &InitialSpec, mesh: &Mesh, rect: &Rect) -> Vec<[f64; 2]> {
    let n = mesh.num_vertices();
    match spec {
        InitialSpec::Zero => vec![[0.0; 2]; n],
        InitialSpec::Constant { value } => vec![*value; n],
        InitialSpec::Mode { value } => mesh
            .vertices
            .iter()
            .map(|x| {
                let s = (std::f64::consts::PI * (x[0] - rect.x0) / rect.width()).sin()
                    * (std::f64::consts::PI * (x[1] - rect.y0) / rect.height()).sin();
                [value[0] * s, value[1] * s]
            })
            .collect(),
        InitialSpec::Random { amplitude, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..n)
                .map(|_| [rng.gen_range(-1.0..=1.0) * amplitude, rng.gen_range(-1.0..=1.0) * amplitude])
                .collect()
        }
    }
}

/// Everything needed to evolve the coupled system.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: Mesh,
    pub partition: BoundaryPartition,
    pub model: Arc<dyn MaterialModel>,
    pub loads: LoadSet,
    pub p0: Vec<[f64; 2]>,
}

/// Applies `key=value` overrides with dotted keys, e.g. `material.kappa=2.0`.
/// Values are parsed as TOML scalars or arrays, falling back to strings.
pub fn apply_overrides(doc: &mut toml::Value, overrides: &[String]) -> Result<(), DriverError> {
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| DriverError::Config(format!("override `{o}` is not key=value")))?;
        let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut node = &mut *doc;
        let parts: Vec<&str> = key.trim().split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| DriverError::Config(format!("override `{key}`: `{part}` is not inside a table")))?;
            if i + 1 == parts.len() {
                table.insert(part.to_string(), value.clone());
                break;
            }
            node = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
    }
    Ok(())
}

/// Parses TOML text with overrides applied, then validates.
pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<RunConfig, DriverError> {
    let mut doc: toml::Value = toml::from_str(text).map_err(|e| DriverError::Config(e.to_string()))?;
    apply_overrides(&mut doc, overrides)?;
    let cfg: RunConfig = doc.try_into().map_err(|e: toml::de::Error| DriverError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and validates a configuration file. A relative `mesh.file` is
/// resolved against the directory of the configuration file.
pub fn parse_config(path: &Path, overrides: &[String]) -> Result<RunConfig, DriverError> {
    let text = std::fs::read_to_string(path).map_err(|e| DriverError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut cfg = parse_config_str(&text, overrides).map_err(|e| match e {
        DriverError::Config(msg) => DriverError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    if let (Some(file), Some(dir)) = (&cfg.mesh.file, path.parent()) {
        if file.is_relative() {
            cfg.mesh.file = Some(dir.join(file));
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [mesh]
        nx = 8
        ny = 8
        [material]
        name = "lame_laplace"
        [time]
        t_final = 0.1
        dt0 = 0.01
        dt_min = 1e-6
        dt_max = 0.05
    "#;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config_str(MINIMAL, &[]).unwrap();
        assert_eq!(cfg.mesh.nx, 8);
        assert_eq!(cfg.mesh.rect, [0.0, 0.0, 1.0, 1.0]);
        assert_eq!(cfg.boundary, BoundarySpec::default());
        assert!(!cfg.picard.enabled);
        assert_eq!(cfg.output.cadence, 1);
        assert_eq!(cfg.initial, InitialSpec::Zero);
        assert_eq!(cfg.time.blowup_norm_threshold, 1e6);
    }

    #[test]
    fn dt_min_above_dt0_names_both_keys() {
        let err = parse_config_str(MINIMAL, &["time.dt_min=0.02".into()]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("time.dt_min") && msg.contains("time.dt0"), "{msg}");
    }

    #[test]
    fn override_material_parameter() {
        let cfg = parse_config_str(MINIMAL, &["material.name=\"poly_piezo\"".into(), "material.kappa=2.0".into()]).unwrap();
        assert_eq!(cfg.material.name, "poly_piezo");
        assert_eq!(cfg.material.params["kappa"], 2.0);
        let model = cfg.build().unwrap().model;
        assert_eq!(model.separation(&crate::materials::tensor::Vec2::zeros()), 2.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse_config_str(MINIMAL, &["time.dtt=1".into()]).is_err());
        assert!(parse_config_str(MINIMAL, &["material.kappa=1".into()]).is_err());
        assert!(parse_config_str(MINIMAL, &["extra.x=1".into()]).is_err());
    }

    #[test]
    fn hash_ignores_final_time_and_output() {
        let a = parse_config_str(MINIMAL, &[]).unwrap();
        let b = parse_config_str(MINIMAL, &["time.t_final=0.5".into(), "output.cadence=3".into()]).unwrap();
        let c = parse_config_str(MINIMAL, &["time.dt0=0.02".into()]).unwrap();
        assert_eq!(a.physics_hash(), b.physics_hash());
        assert_ne!(a.physics_hash(), c.physics_hash());
    }

    #[test]
    fn build_tags_boundary() {
        let cfg = parse_config_str(MINIMAL, &["boundary.p_dirichlet=[\"left\"]".into()]).unwrap();
        let pb = cfg.build().unwrap();
        assert_eq!(pb.partition.count(crate::mesh::Field::Polarization, crate::mesh::BcKind::Dirichlet), 8);
        assert_eq!(pb.p0.len(), 81);
    }
}
