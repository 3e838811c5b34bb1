//! Parameter sweeps over a single planar-interface geometry.
//!
//! The template interface is the plane `z = 0` with normal `ẑ`; the incoming
//! ray travels in the `xz` plane at angle `θ1` from the normal and passes
//! through `offset` (default: the origin).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spinoptics::scattering::{conservation_check, incidence_angle, outgoing_angle, scatter, Interface};
use spinoptics::{OrbitInvariants, Ray, Vec3};

use crate::error::{CliError, CliResult};

pub const SWEEP_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 12] = [
    "param",
    "theta1_deg",
    "theta2_deg",
    "s1",
    "s2",
    "mode",
    "shift_x",
    "shift_y",
    "shift_z",
    "res_L",
    "res_P",
    "error",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Incidence angle in degrees.
    Angle,
    /// `n2 / n1`.
    IndexRatio,
    Spin,
    Color,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTemplate {
    pub theta1_deg: f64,
    pub n1: f64,
    pub n2: f64,
    pub p: f64,
    pub s: f64,
    #[serde(default)]
    pub offset: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub spinray_sweep: u32,
    pub parameter: SweepParameter,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub template: SweepTemplate,
}

impl SweepSpec {
    pub fn validate(&self) -> CliResult<()> {
        if self.spinray_sweep != SWEEP_VERSION {
            return Err(CliError::input(format!(
                "unsupported sweep version {} (expected {SWEEP_VERSION})",
                self.spinray_sweep
            )));
        }
        if self.count < 2 {
            return Err(CliError::input(format!("count must be at least 2, got {}", self.count)));
        }
        let t = &self.template;
        let all = [self.start, self.stop, t.theta1_deg, t.n1, t.n2, t.p, t.s, t.offset[0], t.offset[1], t.offset[2]];
        if let Some(v) = all.iter().find(|v| !v.is_finite()) {
            return Err(CliError::input(format!("non-finite value {v} in sweep spec")));
        }
        let admissible = |v: f64| match self.parameter {
            SweepParameter::Angle => (0.0..90.0).contains(&v),
            SweepParameter::IndexRatio => v != 0.0,
            SweepParameter::Spin => true,
            SweepParameter::Color => v > 0.0,
        };
        if !admissible(self.start) || !admissible(self.stop) {
            return Err(CliError::input(format!(
                "range endpoints {}..{} outside the admissible domain of {:?}",
                self.start, self.stop, self.parameter
            )));
        }
        Ok(())
    }

    /// Exactly `count` samples including both endpoints.
    pub fn values(&self) -> Vec<f64> {
        let span = self.stop - self.start;
        let last = (self.count - 1) as f64;
        (0..self.count).map(|i| self.start + span * i as f64 / last).collect()
    }
}

pub fn parse_sweep(text: &str) -> CliResult<SweepSpec> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let spec: SweepSpec = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::input(format!("sweep parse error at `{path}`: {}", e.into_inner()))
    })?;
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub theta1_deg: f64,
    pub theta2_deg: f64,
    pub s1: f64,
    pub s2: f64,
    pub mode: String,
    pub shift_x: f64,
    pub shift_y: f64,
    pub shift_z: f64,
    #[serde(rename = "res_L")]
    pub res_l: f64,
    #[serde(rename = "res_P")]
    pub res_p: f64,
    pub error: String,
}

impl SweepRow {
    pub fn shift(&self) -> Vec3 {
        Vec3::new(self.shift_x, self.shift_y, self.shift_z)
    }

    fn failed(param: f64, theta1_deg: f64, s1: f64, error: String) -> Self {
        let nan = f64::NAN;
        SweepRow {
            param,
            theta1_deg,
            theta2_deg: nan,
            s1,
            s2: nan,
            mode: String::new(),
            shift_x: nan,
            shift_y: nan,
            shift_z: nan,
            res_l: nan,
            res_p: nan,
            error,
        }
    }
}

fn evaluate(template: &SweepTemplate, param: f64) -> SweepRow {
    let theta = template.theta1_deg.to_radians();
    let result = (|| {
        let iface = Interface::new(Vec3::z(), Vec3::zeros(), template.n1, template.n2)?;
        let offset = Vec3::from(template.offset);
        let ray = Ray::from_point_direction(offset, Vec3::new(theta.sin(), 0.0, theta.cos()))?;
        let inv = OrbitInvariants::new(template.p, template.s)?;
        let out = scatter(&ray, template.s, &iface, &inv)?;
        let report = conservation_check(&ray, template.s, &out, &iface, &inv);
        Ok::<_, spinoptics::Error>(SweepRow {
            param,
            theta1_deg: incidence_angle(&ray, &iface).to_degrees(),
            theta2_deg: outgoing_angle(&ray, &out, &iface).to_degrees(),
            s1: template.s,
            s2: out.s2,
            mode: out.mode.as_str().to_string(),
            shift_x: out.shift.x,
            shift_y: out.shift.y,
            shift_z: out.shift.z,
            res_l: report.angular,
            res_p: report.linear,
            error: String::new(),
        })
    })();
    result.unwrap_or_else(|e| SweepRow::failed(param, template.theta1_deg, template.s, e.to_string()))
}

/// One row per sample; both helicities unless spin itself is swept.
pub fn run_sweep(spec: &SweepSpec) -> CliResult<Vec<SweepRow>> {
    spec.validate()?;
    let helicities: Vec<f64> = match spec.parameter {
        SweepParameter::Spin => vec![spec.template.s],
        _ => vec![spec.template.s.abs(), -spec.template.s.abs()],
    };
    let jobs: Vec<(f64, SweepTemplate)> = spec
        .values()
        .into_iter()
        .flat_map(|value| {
            helicities.iter().map(move |&s| {
                let mut t = spec.template.clone();
                t.s = s;
                match spec.parameter {
                    SweepParameter::Angle => t.theta1_deg = value,
                    SweepParameter::IndexRatio => t.n2 = value * t.n1,
                    SweepParameter::Spin => t.s = value,
                    SweepParameter::Color => t.p = value,
                }
                (value, t)
            })
        })
        .collect();
    Ok(jobs.par_iter().map(|(value, t)| evaluate(t, *value)).collect())
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> CliResult<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let fail = |e: csv::Error| CliError::input(format!("writing CSV: {e}"));
    writer.write_record(CSV_HEADER).map_err(fail)?;
    for row in rows {
        writer.serialize(row).map_err(fail)?;
    }
    writer.flush().map_err(|e| CliError::input(format!("writing CSV: {e}")))?;
    Ok(())
}

pub fn read_csv(text: &str) -> CliResult<Vec<SweepRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(|e| CliError::input(format!("reading CSV: {e}"))))
        .collect()
}
