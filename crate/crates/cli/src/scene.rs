//! Scene files: media, planar interfaces, sources and tracing limits.
//!
//! ```json
//! {
//!   "spinray_scene": 1,
//!   "media": [
//!     { "name": "air",   "region": { "half_space": { "normal": [0, 0, -1], "offset": 0 } },
//!       "field": { "constant": { "n": 1.0 } } },
//!     { "name": "glass", "region": { "half_space": { "normal": [0, 0, 1], "offset": 0 } },
//!       "field": { "constant": { "n": 1.5 } } }
//!   ],
//!   "interfaces": [ { "normal": [0, 0, 1], "anchor": [0, 0, 0], "from": 0, "to": 1 } ],
//!   "sources": [ { "origin": [-1, 0, -1.732], "direction": [0.5, 0, 0.866], "p": 1, "s": 1 } ],
//!   "limits": { "max_length": 6, "max_events": 4, "step": 0.01 }
//! }
//! ```
//!
//! A half-space is `⟨normal, x⟩ ≥ offset`. Interface normals point from
//! medium `from` into medium `to`. Grid fields are read from a file relative
//! to the scene, or given inline in the grid text format.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinoptics::{GridField, IndexField, Model, Vec3};

use crate::error::{CliError, CliResult};

pub const SCENE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub spinray_scene: u32,
    #[serde(default)]
    pub media: Vec<MediumSpec>,
    #[serde(default)]
    pub interfaces: Vec<InterfaceSpec>,
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default = "default_model")]
    pub model: Model,
}

fn default_model() -> Model {
    Model::FullSpin
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub region: RegionSpec,
    pub field: FieldSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionSpec {
    HalfSpace { normal: [f64; 3], offset: f64 },
    Box { min: [f64; 3], max: [f64; 3] },
    Everywhere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant { n: f64 },
    Linear { n0: f64, gradient: [f64; 3] },
    Gaussian { n0: f64, amplitude: f64, center: [f64; 3], width: f64 },
    Grid(GridSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// Path, relative to the scene file.
    File(String),
    Inline(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceSpec {
    pub normal: [f64; 3],
    pub anchor: [f64; 3],
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub origin: [f64; 3],
    pub direction: [f64; 3],
    pub p: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Limits {
    /// Total path length over all segments.
    pub max_length: f64,
    /// Interface events before the trace is cut.
    pub max_events: usize,
    pub step: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self { max_length: 10.0, max_events: 16, step: 1e-2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    HalfSpace { normal: Vec3, offset: f64 },
    Box { min: Vec3, max: Vec3 },
    Everywhere,
}

impl Region {
    pub fn contains(&self, x: &Vec3) -> bool {
        match self {
            Region::HalfSpace { normal, offset } => normal.dot(x) >= *offset,
            Region::Box { min, max } => (0..3).all(|a| x[a] >= min[a] && x[a] <= max[a]),
            Region::Everywhere => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Medium {
    pub name: String,
    pub region: Region,
    pub field: IndexField,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneInterface {
    /// Unit normal, from `from` towards `to`.
    pub normal: Vec3,
    pub anchor: Vec3,
    pub from: usize,
    pub to: usize,
}

impl SceneInterface {
    pub fn signed_distance(&self, x: &Vec3) -> f64 {
        self.normal.dot(&(x - self.anchor))
    }
}

/// A validated scene with its fields built.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub spec: SceneSpec,
    pub media: Vec<Medium>,
    pub interfaces: Vec<SceneInterface>,
}

impl Scene {
    pub fn is_empty(&self) -> bool {
        self.sources().is_empty() && self.interfaces.is_empty()
    }

    pub fn sources(&self) -> &[SourceSpec] {
        &self.spec.sources
    }

    pub fn limits(&self) -> &Limits {
        &self.spec.limits
    }

    pub fn model(&self) -> Model {
        self.spec.model
    }

    /// Indices of every medium whose region contains `x`.
    pub fn media_at(&self, x: &Vec3) -> Vec<usize> {
        (0..self.media.len()).filter(|&i| self.media[i].region.contains(x)).collect()
    }
}

fn vec3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn finite(name: &str, values: &[f64]) -> CliResult<()> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(CliError::input(format!("{name}: non-finite value {v}"))),
        None => Ok(()),
    }
}

/// Parse and validate a scene. `base` resolves relative grid paths.
pub fn parse_scene(text: &str, base: Option<&Path>) -> CliResult<Scene> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let spec: SceneSpec = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::input(format!("scene parse error at `{path}`: {}", e.into_inner()))
    })?;
    build_scene(spec, base)
}

pub fn load_scene(path: &Path) -> CliResult<Scene> {
    let text =
        std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
    parse_scene(&text, path.parent())
}

/// Serialize a scene back to JSON.
pub fn emit_scene(scene: &Scene) -> String {
    serde_json::to_string_pretty(&scene.spec).expect("scene specs always serialize")
}

fn build_field(spec: &FieldSpec, base: Option<&Path>) -> CliResult<IndexField> {
    let field = match spec {
        FieldSpec::Constant { n } => IndexField::constant(*n),
        FieldSpec::Linear { n0, gradient } => {
            finite("linear field", &[*n0])?;
            finite("linear field gradient", gradient)?;
            IndexField::linear(*n0, vec3(gradient))
        }
        FieldSpec::Gaussian { n0, amplitude, center, width } => {
            finite("gaussian field", &[*n0, *amplitude, *width])?;
            finite("gaussian center", center)?;
            IndexField::gaussian(*n0, *amplitude, vec3(center), *width)
        }
        FieldSpec::Grid(GridSpec::Inline(text)) => GridField::parse(text).map(IndexField::GridSampled),
        FieldSpec::Grid(GridSpec::File(file)) => {
            let path = base.map_or_else(|| PathBuf::from(file), |b| b.join(file));
            let text = std::fs::read_to_string(&path)
                .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
            GridField::parse(&text).map(IndexField::GridSampled)
        }
    };
    field.map_err(|e| CliError::input(e.to_string()))
}

fn build_region(spec: &RegionSpec) -> CliResult<Region> {
    match spec {
        RegionSpec::HalfSpace { normal, offset } => {
            finite("half_space", normal)?;
            finite("half_space offset", &[*offset])?;
            let normal = vec3(normal);
            if normal.norm() < 1e-12 {
                return Err(CliError::input("half_space normal must be nonzero"));
            }
            Ok(Region::HalfSpace { normal, offset: *offset })
        }
        RegionSpec::Box { min, max } => {
            finite("box min", min)?;
            finite("box max", max)?;
            if (0..3).any(|a| min[a] > max[a]) {
                return Err(CliError::input("box min must not exceed max"));
            }
            Ok(Region::Box { min: vec3(min), max: vec3(max) })
        }
        RegionSpec::Everywhere => Ok(Region::Everywhere),
    }
}

fn build_scene(spec: SceneSpec, base: Option<&Path>) -> CliResult<Scene> {
    if spec.spinray_scene != SCENE_VERSION {
        return Err(CliError::input(format!(
            "unsupported scene version {} (expected {SCENE_VERSION})",
            spec.spinray_scene
        )));
    }
    let limits = &spec.limits;
    if !(limits.step.is_finite() && limits.step > 0.0) {
        return Err(CliError::input(format!("limits.step must be positive, got {}", limits.step)));
    }
    if !(limits.max_length.is_finite() && limits.max_length >= 0.0) {
        return Err(CliError::input(format!("limits.max_length must be non-negative, got {}", limits.max_length)));
    }

    let media = spec
        .media
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let prefix = |e: CliError| CliError::input(format!("media[{i}]: {e}"));
            Ok(Medium {
                name: m.name.clone().unwrap_or_else(|| format!("medium {i}")),
                region: build_region(&m.region).map_err(prefix)?,
                field: build_field(&m.field, base).map_err(prefix)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut scene = Scene { spec, media, interfaces: Vec::new() };
    for (i, iface) in scene.spec.interfaces.iter().enumerate() {
        finite(&format!("interfaces[{i}].normal"), &iface.normal)?;
        finite(&format!("interfaces[{i}].anchor"), &iface.anchor)?;
        let count = scene.media.len();
        if iface.from >= count || iface.to >= count || iface.from == iface.to {
            return Err(CliError::input(format!(
                "interfaces[{i}]: from/to must name two distinct media among {count}"
            )));
        }
        let normal = vec3(&iface.normal);
        if normal.norm() < 1e-12 {
            return Err(CliError::input(format!("interfaces[{i}]: normal must be nonzero")));
        }
        let normal = normal.normalize();
        let anchor = vec3(&iface.anchor);
        let probe = 1e-6 * (1.0 + anchor.norm());
        let (m1, m2) = (&scene.media[iface.from], &scene.media[iface.to]);
        if !m1.region.contains(&(anchor - normal * probe)) || !m2.region.contains(&(anchor + normal * probe)) {
            return Err(CliError::input(format!(
                "interfaces[{i}]: normal must point from `{}` into `{}` at the anchor",
                m1.name, m2.name
            )));
        }
        scene.interfaces.push(SceneInterface { normal, anchor, from: iface.from, to: iface.to });
    }

    for (i, src) in scene.spec.sources.iter().enumerate() {
        finite(&format!("sources[{i}]"), &[src.p, src.s])?;
        finite(&format!("sources[{i}].origin"), &src.origin)?;
        finite(&format!("sources[{i}].direction"), &src.direction)?;
        if src.p <= 0.0 {
            return Err(CliError::input(format!("sources[{i}]: color p must be positive, got {}", src.p)));
        }
        if vec3(&src.direction).norm() < 1e-12 {
            return Err(CliError::input(format!("sources[{i}]: direction must be nonzero")));
        }
        let inside = scene.media_at(&vec3(&src.origin));
        if inside.len() != 1 {
            return Err(CliError::input(format!(
                "sources[{i}]: origin must lie inside exactly one medium region (found {})",
                inside.len()
            )));
        }
    }
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_HALVES: &str = r#"{
        "spinray_scene": 1,
        "media": [
            { "region": { "half_space": { "normal": [0, 0, -1], "offset": 0 } }, "field": { "constant": { "n": 1.0 } } },
            { "region": { "half_space": { "normal": [0, 0, 1], "offset": 0 } }, "field": { "constant": { "n": 1.5 } } }
        ],
        "interfaces": [ { "normal": [0, 0, 1], "anchor": [0, 0, 0], "from": 0, "to": 1 } ],
        "sources": [ { "origin": [0, 0, -1], "direction": [0.5, 0, 0.8], "p": 1, "s": 1 } ]
    }"#;

    #[test]
    fn minimal_two_half_spaces() {
        let scene = parse_scene(TWO_HALVES, None).unwrap();
        assert_eq!(scene.interfaces.len(), 1);
        assert_eq!(scene.media[1].name, "medium 1");
        assert_eq!(scene.limits(), &Limits::default());
        assert_eq!(scene.model(), Model::FullSpin);
    }

    #[test]
    fn source_outside_every_region() {
        let text = TWO_HALVES.replace(r#""origin": [0, 0, -1]"#, r#""origin": [0, 0, 0]"#);
        let err = parse_scene(&text, None).unwrap_err().to_string();
        assert!(err.contains("exactly one medium") && err.contains("found 2"), "{err}");
        let text = TWO_HALVES
            .replace(r#""interfaces": [ { "normal": [0, 0, 1], "anchor": [0, 0, 0], "from": 0, "to": 1 } ],"#, "")
            .replace(
                r#""region": { "half_space": { "normal": [0, 0, -1], "offset": 0 } }"#,
                r#""region": { "box": { "min": [5, 5, -5], "max": [6, 6, 0] } }"#,
            );
        let err = parse_scene(&text, None).unwrap_err().to_string();
        assert!(err.contains("exactly one medium"), "{err}");
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let text = TWO_HALVES.replace(r#""p": 1"#, r#""p": 1, "colour": 2"#);
        let err = parse_scene(&text, None).unwrap_err().to_string();
        assert!(err.contains("sources[0]") && err.contains("colour"), "{err}");
        let err = parse_scene(r#"{"spinray_scene": 2}"#, None).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");
    }

    #[test]
    fn flipped_normal_is_rejected() {
        let text = TWO_HALVES.replace(r#""normal": [0, 0, 1], "anchor""#, r#""normal": [0, 0, -1], "anchor""#);
        let err = parse_scene(&text, None).unwrap_err().to_string();
        assert!(err.contains("point from"), "{err}");
    }

    #[test]
    fn gaussian_scene_round_trips() {
        let text = TWO_HALVES.replace(
            r#""field": { "constant": { "n": 1.0 } }"#,
            r#""field": { "gaussian": { "n0": 1.0, "amplitude": 0.1, "center": [0, 0, -2], "width": 0.5 } }"#,
        );
        let scene = parse_scene(&text, None).unwrap();
        let again = parse_scene(&emit_scene(&scene), None).unwrap();
        assert_eq!(again, scene);
        assert_eq!(emit_scene(&again), emit_scene(&scene));
    }

    #[test]
    fn inline_grid_field() {
        let grid = GridField::sample([4, 4, 4], Vec3::repeat(-2.0), Vec3::repeat(1.5), |x| 1.0 + 0.01 * x.z).unwrap();
        let spec = FieldSpec::Grid(GridSpec::Inline(grid.to_text()));
        let field = build_field(&spec, None).unwrap();
        assert!(matches!(field, IndexField::GridSampled(_)));
        assert!(build_field(&FieldSpec::Grid(GridSpec::File("missing.grid".into())), None).is_err());
    }
}
