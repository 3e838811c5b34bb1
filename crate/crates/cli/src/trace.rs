use serde::Serialize;
use spinoptics::propagation::{integrate, IntegrationSettings, Sample, Termination};
use spinoptics::scattering::{conservation_check, incidence_angle, outgoing_angle, scatter, Interface, ScatterMode};
use spinoptics::{OrbitInvariants, PhotonState, Ray, Vec3};

use crate::error::{CliError, CliResult};
use crate::scene::{Scene, SourceSpec};

/// Distance the outgoing ray is moved past the plane before tracing resumes.
const RESTART_NUDGE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub medium: usize,
    pub s: f64,
    pub length: f64,
    pub termination: Termination,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterEvent {
    pub interface: usize,
    pub from_medium: usize,
    pub to_medium: usize,
    pub mode: ScatterMode,
    pub n1: f64,
    pub n2: f64,
    pub s_before: f64,
    pub s_after: f64,
    pub theta1_deg: f64,
    pub theta2_deg: f64,
    pub hit: Vec3,
    /// Where the outgoing ray leaves the plane; differs from `hit` by the shift.
    pub exit: Vec3,
    pub shift: Vec3,
    pub res_l: f64,
    pub res_p: f64,
    /// Incoming ray and oriented interface, kept for re-verification.
    #[serde(skip)]
    pub incoming: Ray,
    #[serde(skip)]
    pub oriented: Interface,
    #[serde(skip)]
    pub color: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum TraceEvent {
    Segment(Segment),
    Scatter(ScatterEvent),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStop {
    Boundary,
    MaxLength,
    MaxEvents,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceReport {
    pub source: usize,
    pub events: Vec<TraceEvent>,
    pub stop: TraceStop,
}

impl TraceReport {
    pub fn scatter_events(&self) -> impl Iterator<Item = &ScatterEvent> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Scatter(s) => Some(s),
            TraceEvent::Segment(_) => None,
        })
    }

    pub fn segments(&self) -> impl Iterator<Item = &Segment> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Segment(s) => Some(s),
            TraceEvent::Scatter(_) => None,
        })
    }
}

fn vec3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Stop predicate for one medium: leaving its region, or reaching any plane
/// bounding it from the side the segment started on.
fn stop_for<'a>(scene: &'a Scene, medium: usize, start: &Vec3) -> impl Fn(&Vec3) -> Option<Termination> + 'a {
    let sides: Vec<(usize, f64)> = scene
        .interfaces
        .iter()
        .enumerate()
        .filter(|(_, i)| i.from == medium || i.to == medium)
        .map(|(k, i)| (k, i.signed_distance(start).signum()))
        .collect();
    move |x: &Vec3| {
        for &(k, side) in &sides {
            if scene.interfaces[k].signed_distance(x) * side <= 0.0 {
                return Some(Termination::Interface(k));
            }
        }
        (!scene.media[medium].region.contains(x)).then_some(Termination::Boundary)
    }
}

/// Trace one source through the scene.
pub fn run_trace(scene: &Scene, source: usize) -> CliResult<TraceReport> {
    let src: &SourceSpec = scene
        .sources()
        .get(source)
        .ok_or_else(|| CliError::input(format!("source {source} out of range ({} sources)", scene.sources().len())))?;
    let limits = scene.limits();
    let origin = vec3(&src.origin);
    let mut medium = scene.media_at(&origin)[0];
    let mut state = PhotonState::new(origin, vec3(&src.direction)).map_err(|e| CliError::input(e.to_string()))?;
    let mut s = src.s;
    let mut travelled = 0.0;
    let mut events = Vec::new();
    let mut scatters = 0usize;

    loop {
        let event_index = events.len();
        let numerical = |e| CliError::numerical(format!("source {source}, event {event_index}"), e);
        let inv = OrbitInvariants::new(src.p, s).map_err(numerical)?;
        let settings = IntegrationSettings { step: limits.step, max_len: (limits.max_length - travelled).max(0.0) };
        let stop = stop_for(scene, medium, &state.x);
        let field = &scene.media[medium].field;
        let traj = integrate(&state, &inv, field, scene.model(), &settings, &stop).map_err(numerical)?;
        let end = *traj.last();
        travelled += end.t;
        let termination = traj.termination;
        events.push(TraceEvent::Segment(Segment { medium, s, length: end.t, termination, samples: traj.samples }));

        let k = match termination {
            Termination::Boundary => return Ok(TraceReport { source, events, stop: TraceStop::Boundary }),
            Termination::MaxLength => return Ok(TraceReport { source, events, stop: TraceStop::MaxLength }),
            Termination::Interface(k) => k,
        };
        if scatters == limits.max_events {
            return Ok(TraceReport { source, events, stop: TraceStop::MaxEvents });
        }

        let event_index = events.len();
        let numerical = |e| CliError::numerical(format!("source {source}, event {event_index}"), e);
        let plane = scene.interfaces[k];
        let forward = plane.from == medium;
        let other = if forward { plane.to } else { plane.from };
        let hit = end.state.x;
        let n1 = field.index(&hit).map_err(numerical)?;
        let n2 = scene.media[other].field.index(&hit).map_err(numerical)?;
        let normal = if forward { plane.normal } else { -plane.normal };
        let oriented = Interface::new(normal, plane.anchor, n1, n2).map_err(numerical)?;
        let incoming = Ray::from_point_direction(hit, end.state.u).map_err(numerical)?;
        let out = scatter(&incoming, s, &oriented, &inv).map_err(numerical)?;
        let report = conservation_check(&incoming, s, &out, &oriented, &inv);

        let u2 = out.ray2.u();
        let along = normal.dot(&u2);
        if along.abs() < 1e-12 {
            return Err(numerical(spinoptics::Error::NotIncoming { normal_component: along }));
        }
        let q2 = out.ray2.q();
        let exit = q2 + u2 * (normal.dot(&(plane.anchor - q2)) / along);
        scatters += 1;
        events.push(TraceEvent::Scatter(ScatterEvent {
            interface: k,
            from_medium: medium,
            to_medium: if out.mode.is_reflection() { medium } else { other },
            mode: out.mode,
            n1,
            n2,
            s_before: s,
            s_after: out.s2,
            theta1_deg: incidence_angle(&incoming, &oriented).to_degrees(),
            theta2_deg: outgoing_angle(&incoming, &out, &oriented).to_degrees(),
            hit,
            exit,
            shift: out.shift,
            res_l: report.angular,
            res_p: report.linear,
            incoming,
            oriented,
            color: src.p,
        }));

        if out.mode == ScatterMode::Refraction {
            medium = other;
        }
        s = out.s2;
        state = PhotonState { x: exit + u2 * RESTART_NUDGE, u: u2 };
        if travelled >= limits.max_length {
            return Ok(TraceReport { source, events, stop: TraceStop::MaxLength });
        }
    }
}

/// Trace every source; results are ordered by source index.
pub fn run_all(scene: &Scene) -> CliResult<Vec<TraceReport>> {
    use rayon::prelude::*;
    (0..scene.sources().len()).into_par_iter().map(|i| run_trace(scene, i)).collect()
}
