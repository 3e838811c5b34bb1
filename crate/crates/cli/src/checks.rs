//! Invariant checks over the built-in suite or a user scene.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use spinoptics::fermat::curvature;
use spinoptics::orbits::{momentum_map, wave_plane_bracket};
use spinoptics::propagation::{
    direction, direction_spinless, integrate, kernel_residual, IntegrationSettings, Unbounded,
};
use spinoptics::scattering::{
    conservation_check, h_action, inverse_scatter, scatter, scatter_coefficients, scatter_mode,
    scatter_with_coefficients, symplecto_check_with, Interface,
};
use spinoptics::{IndexField, Model, OrbitInvariants, PhotonState, Ray, Vec3};

use crate::scene::{parse_scene, Scene};
use crate::trace::{run_trace, ScatterEvent};

/// Scenes shipped with the tool and exercised by the built-in suite.
pub const SHIPPED_SCENES: [(&str, &str); 5] = [
    ("vacuum", include_str!("../scenes/vacuum.json")),
    ("refraction", include_str!("../scenes/refraction.json")),
    ("total_reflection", include_str!("../scenes/total_reflection.json")),
    ("left_handed", include_str!("../scenes/left_handed.json")),
    ("graded_slab", include_str!("../scenes/graded_slab.json")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Below,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub suite: String,
    pub seed: u64,
    pub executed: usize,
    pub failed: usize,
    pub passed: bool,
    pub warnings: Vec<String>,
    pub checks: Vec<CheckResult>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CheckOptions {
    pub seed: u64,
    /// Drop the spin term `ρ` from the scattering map (negative control).
    pub corrupt_rho: bool,
}

struct Collector {
    checks: Vec<CheckResult>,
}

impl Collector {
    fn record(&mut self, name: impl Into<String>, value: spinoptics::Result<f64>, bound: Bound, tolerance: f64) {
        let name = name.into();
        let result = match value {
            Ok(value) => {
                let passed = match bound {
                    Bound::Below => value < tolerance,
                    Bound::AtLeast => value >= tolerance,
                };
                CheckResult { name, value, bound, tolerance, passed, detail: None }
            }
            Err(e) => {
                CheckResult { name, value: f64::NAN, bound, tolerance, passed: false, detail: Some(e.to_string()) }
            }
        };
        self.checks.push(result);
    }

    fn finish(self, suite: String, seed: u64, mut warnings: Vec<String>) -> CheckReport {
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        if self.checks.is_empty() {
            warnings.push("no checks executed".into());
        }
        CheckReport {
            suite,
            seed,
            executed: self.checks.len(),
            failed,
            passed: failed == 0,
            warnings,
            checks: self.checks,
        }
    }
}

fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
    Vec3::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale), rng.random_range(-scale..scale))
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = random_vec(rng, 1.0);
        if v.norm() > 0.2 {
            return v.normalize();
        }
    }
}

fn random_field(rng: &mut ChaCha8Rng, gaussian: bool) -> IndexField {
    if gaussian {
        let amplitude = rng.random_range(0.1..0.6);
        let width = rng.random_range(0.5..1.5);
        IndexField::gaussian(1.2, amplitude, random_vec(rng, 0.5), width).expect("valid bump")
    } else {
        IndexField::linear(1.5, random_vec(rng, 0.3)).expect("valid gradient")
    }
}

fn direction_gap(a: &spinoptics::KernelDirection, b: &spinoptics::KernelDirection) -> f64 {
    (a.dx - b.dx).norm() + (a.du - b.du).norm()
}

/// Largest normalized kernel residual and model gaps over random states.
fn propagation_checks(c: &mut Collector, rng: &mut ChaCha8Rng) {
    let mut residual = Ok(0.0f64);
    let mut tower = Ok(0.0f64);
    let mut limit = Ok(0.0f64);
    let mut trace_identity = Ok(0.0f64);
    for i in 0..200 {
        let field = random_field(rng, i % 2 == 1);
        let x = random_vec(rng, 1.0);
        let state = PhotonState::new(x, random_unit(rng)).expect("unit direction");
        let p = rng.random_range(0.5..5.0);
        let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let inv = OrbitInvariants::new(p, s).expect("positive color");
        let step = (|| {
            let n = field.index(&x)?;
            let full = direction(&state, &inv, &field, Model::FullSpin)?;
            let general = direction(&state, &inv, &field, Model::GeneralMetric)?;
            let r = kernel_residual(&state, &full, &inv, &field)? / (p * n);
            let spinless = direction_spinless(&state, &field)?;
            let zero = inv.with_spin(0.0);
            let lim = [Model::FullSpin, Model::LinearizedOmn, Model::GeneralMetric]
                .iter()
                .map(|&m| direction(&state, &zero, &field, m).map(|d| direction_gap(&d, &spinless)))
                .collect::<spinoptics::Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            let curv = curvature(&field, &x)?;
            let unit = state.u / n;
            let rom = curv.r_omega(&unit);
            let omega = curv.omega(&unit);
            let lhs = -0.25 * (rom * omega).trace();
            let ein = curv.einstein(&unit, &unit);
            let ti = (lhs - ein).abs() / (1.0 + ein.abs());
            Ok((r, direction_gap(&full, &general), lim, ti))
        })();
        let fold = |acc: &mut spinoptics::Result<f64>, v: spinoptics::Result<f64>| {
            if let Ok(a) = acc {
                match v {
                    Ok(v) => *a = a.max(v),
                    Err(e) => *acc = Err(e),
                }
            }
        };
        match step {
            Ok((r, t, l, ti)) => {
                fold(&mut residual, Ok(r));
                fold(&mut tower, Ok(t));
                fold(&mut limit, Ok(l));
                fold(&mut trace_identity, Ok(ti));
            }
            Err(e) => {
                fold(&mut residual, Err(e));
            }
        }
    }
    c.record("kernel_annihilation", residual, Bound::Below, 1e-10);
    c.record("general_metric_matches_full_spin", tower, Bound::Below, 1e-8);
    c.record("spinless_limit", limit, Bound::Below, 1e-12);
    c.record("curvature_trace_identity", trace_identity, Bound::Below, 1e-9);

    let state = PhotonState::new(Vec3::zeros(), Vec3::new(1.0, 0.0, 0.5)).expect("unit direction");
    let inv = OrbitInvariants::new(1.0, 1.0).expect("positive color");
    let slope = (|| {
        let gaps = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&eps| {
                let field = IndexField::linear(1.0, Vec3::new(0.0, 0.0, eps))?;
                let full = direction(&state, &inv, &field, Model::FullSpin)?;
                let lin = direction(&state, &inv, &field, Model::LinearizedOmn)?;
                Ok(direction_gap(&full, &lin))
            })
            .collect::<spinoptics::Result<Vec<_>>>()?;
        Ok(gaps.windows(2).map(|w| (w[0] / w[1]).log10()).fold(f64::INFINITY, f64::min))
    })();
    c.record("linearized_second_order", slope, Bound::AtLeast, 1.9);

    let straight = (|| {
        let field = IndexField::constant(1.4)?;
        let start = PhotonState::new(Vec3::new(0.2, -0.1, 0.3), Vec3::new(1.0, -2.0, 0.5))?;
        let settings = IntegrationSettings { step: 0.05, max_len: 2.0 };
        let mut worst = 0.0f64;
        for s in [-1.0, 0.0, 1.0] {
            let traj =
                integrate(&start, &OrbitInvariants::new(1.0, s)?, &field, Model::FullSpin, &settings, &Unbounded)?;
            for sample in &traj.samples {
                let exact = start.x + start.u * sample.t;
                worst = worst.max((sample.state.x - exact).norm() / sample.t.max(1.0));
            }
        }
        Ok(worst)
    })();
    c.record("homogeneous_rays_straight", straight, Bound::Below, 1e-12);

    let order = (|| {
        let field = IndexField::linear(1.0, Vec3::new(0.0, 0.0, 1.0))?;
        let start = PhotonState::new(Vec3::zeros(), Vec3::x())?;
        let inv = OrbitInvariants::new(1.0, 0.0)?;
        let exact = Vec3::new(1f64.asinh(), 0.0, 2f64.sqrt() - 1.0);
        let errs = [0.05, 0.025, 0.0125]
            .iter()
            .map(|&h| {
                let settings = IntegrationSettings { step: h, max_len: 1.0 };
                let traj = integrate(&start, &inv, &field, Model::SpinlessFermat, &settings, &Unbounded)?;
                Ok((traj.last().state.x - exact).norm())
            })
            .collect::<spinoptics::Result<Vec<_>>>()?;
        Ok(errs.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min))
    })();
    c.record("rk4_order", order, Bound::AtLeast, 3.9);
}

fn orbit_checks(c: &mut Collector, rng: &mut ChaCha8Rng) {
    let mut bracket = Ok(0.0f64);
    let mut casimir = 0.0f64;
    for _ in 0..100 {
        let u = random_unit(rng);
        let v1 = u.cross(&random_unit(rng)).normalize();
        let v2 = u.cross(&v1);
        let p = rng.random_range(0.1..10.0);
        let s = [-1.0, 0.0, 1.0][rng.random_range(0..3)];
        let inv = OrbitInvariants::new(p, s).expect("positive color");
        let ray = Ray::from_point_direction(random_vec(rng, 2.0), u).expect("unit direction");
        if let Ok(acc) = &mut bracket {
            match wave_plane_bracket(&ray, &v1, &v2, &inv) {
                Ok(b) => *acc = acc.max((b - s / (p * p)).abs()),
                Err(e) => bracket = Err(e),
            }
        }
        if let Ok(m) = momentum_map(&random_vec(rng, 2.0), &u, &inv) {
            let c1 = (m.pvec.norm_squared() - p * p).abs() / (p * p);
            let c2 = (m.ell.dot(&m.pvec) - s * p).abs() / (1.0 + (s * p).abs());
            casimir = casimir.max(c1).max(c2);
        }
    }
    c.record("wave_plane_bracket", bracket, Bound::Below, 1e-8);
    c.record("momentum_map_casimirs", Ok(casimir), Bound::Below, 1e-12);
}

/// Scatter map used by the symplecticity checks, optionally with `ρ = 0`.
fn mapped(
    ray: &Ray,
    s: f64,
    iface: &Interface,
    inv: &OrbitInvariants,
    corrupt: bool,
) -> spinoptics::Result<spinoptics::ScatterOutcome> {
    let mode = scatter(ray, s, iface, inv)?.mode;
    if !corrupt {
        return scatter_mode(ray, s, iface, inv, mode);
    }
    let mut coeffs = scatter_coefficients(ray, s, iface, inv, mode)?;
    coeffs.rho = 0.0;
    scatter_with_coefficients(ray, s, iface, inv, mode, &coeffs)
}

fn symplecto(
    ray: &Ray,
    s: f64,
    iface: &Interface,
    inv: &OrbitInvariants,
    seed: u64,
    corrupt: bool,
) -> spinoptics::Result<f64> {
    let base_mode = scatter(ray, s, iface, inv)?.mode;
    symplecto_check_with(ray, s, iface, inv, 8, seed, |r| {
        let out = mapped(r, s, iface, inv, corrupt)?;
        if out.mode != base_mode {
            return scatter_mode(r, s, iface, inv, base_mode);
        }
        Ok(out)
    })
}

fn equivariance(
    ray: &Ray,
    s: f64,
    iface: &Interface,
    inv: &OrbitInvariants,
    rng: &mut ChaCha8Rng,
) -> spinoptics::Result<f64> {
    let n = iface.normal();
    let c = random_vec(rng, 2.0);
    let c = c - n * n.dot(&c);
    let angle = rng.random_range(-PI..PI);
    let a = scatter(&h_action(angle, &c, ray, iface)?, s, iface, inv)?.ray2;
    let b = h_action(angle, &c, &scatter(ray, s, iface, inv)?.ray2, iface)?;
    Ok((a.q() - b.q()).norm() / (1.0 + b.q().norm()) + (a.u() - b.u()).norm())
}

fn reversibility(ray: &Ray, s: f64, iface: &Interface, inv: &OrbitInvariants) -> spinoptics::Result<f64> {
    let out = scatter(ray, s, iface, inv)?;
    let (back, s1) = inverse_scatter(&out, iface, inv)?;
    let spin_gap = if s1 == s { 0.0 } else { f64::INFINITY };
    Ok((back.q() - ray.q()).norm() / (1.0 + ray.q().norm()) + (back.u() - ray.u()).norm() + spin_gap)
}

fn conservation(ray: &Ray, s: f64, iface: &Interface, inv: &OrbitInvariants) -> spinoptics::Result<f64> {
    let out = scatter(ray, s, iface, inv)?;
    let r = conservation_check(ray, s, &out, iface, inv);
    Ok(r.angular.max(r.linear) / r.scale)
}

fn scattering_checks(c: &mut Collector, rng: &mut ChaCha8Rng, opts: &CheckOptions) {
    let inv = OrbitInvariants::new(1.0, 1.0).expect("positive color");
    let mut symp = Ok(0.0f64);
    let mut cons = Ok(0.0f64);
    let mut rev = Ok(0.0f64);
    let mut seed = opts.seed;
    for ratio in [0.5, 1.5, 2.0, -1.0] {
        let iface = Interface::new(Vec3::z(), Vec3::new(0.3, -0.2, 0.0), 1.0, ratio).expect("valid interface");
        for deg in (5..=85).step_by(10) {
            let theta = f64::from(deg).to_radians();
            if ratio > 0.0 && ratio < 1.0 && (theta.sin() - ratio).abs() < 1e-3 {
                continue;
            }
            for s in [1.0, -1.0] {
                let ray =
                    Ray::from_point_direction(Vec3::new(0.4, 0.1, -0.5), Vec3::new(theta.sin(), 0.0, theta.cos()))
                        .expect("unit direction");
                seed = seed.wrapping_add(1);
                let merge = |acc: &mut spinoptics::Result<f64>, v: spinoptics::Result<f64>| {
                    if let Ok(a) = acc {
                        match v {
                            Ok(v) => *a = a.max(v),
                            Err(e) => *acc = Err(e),
                        }
                    }
                };
                merge(&mut symp, symplecto(&ray, s, &iface, &inv, seed, opts.corrupt_rho));
                merge(&mut cons, conservation(&ray, s, &iface, &inv));
                merge(&mut rev, reversibility(&ray, s, &iface, &inv));
            }
        }
    }
    c.record("scattering_symplectic", symp, Bound::Below, 1e-5);
    c.record("scattering_conservation", cons, Bound::Below, 1e-10);
    c.record("scattering_reversibility", rev, Bound::Below, 1e-10);

    let mut equi = Ok(0.0f64);
    for _ in 0..100 {
        let n1 = rng.random_range(0.8..2.0);
        let n2 = if rng.random_bool(0.25) { -rng.random_range(0.8..2.0) } else { rng.random_range(0.8..2.0) };
        let normal = random_unit(rng);
        let iface = Interface::new(normal, random_vec(rng, 1.0), n1, n2).expect("valid interface");
        let mut u = random_unit(rng);
        if u.dot(&normal) < 0.0 {
            u = -u;
        }
        if u.dot(&normal) < 0.05 {
            continue;
        }
        let ray = Ray::from_point_direction(random_vec(rng, 2.0), u).expect("unit direction");
        if let Ok(acc) = &mut equi {
            match equivariance(&ray, 1.0, &iface, &inv, rng) {
                Ok(v) => *acc = acc.max(v),
                Err(e) => equi = Err(e),
            }
        }
    }
    c.record("scattering_equivariance", equi, Bound::Below, 1e-9);
}

fn event_checks(
    c: &mut Collector,
    label: &str,
    event: &ScatterEvent,
    s: f64,
    opts: &CheckOptions,
    rng: &mut ChaCha8Rng,
) {
    let ray = &event.incoming;
    let iface = &event.oriented;
    let inv = OrbitInvariants::new(event.color, s);
    let with_inv = |f: &dyn Fn(&OrbitInvariants) -> spinoptics::Result<f64>| inv.clone().and_then(|i| f(&i));
    c.record(format!("{label}: conservation"), with_inv(&|i| conservation(ray, s, iface, i)), Bound::Below, 1e-10);
    c.record(
        format!("{label}: symplectic"),
        with_inv(&|i| symplecto(ray, s, iface, i, opts.seed, opts.corrupt_rho)),
        Bound::Below,
        1e-5,
    );
    c.record(format!("{label}: reversibility"), with_inv(&|i| reversibility(ray, s, iface, i)), Bound::Below, 1e-10);
    let equi = inv.and_then(|i| equivariance(ray, s, iface, &i, rng));
    c.record(format!("{label}: equivariance"), equi, Bound::Below, 1e-9);
}

fn scene_checks(c: &mut Collector, name: &str, scene: &Scene, opts: &CheckOptions, rng: &mut ChaCha8Rng) {
    for (i, src) in scene.sources().iter().enumerate() {
        let report = match run_trace(scene, i) {
            Ok(r) => r,
            Err(e) => {
                c.checks.push(CheckResult {
                    name: format!("{name}/source {i}: trace"),
                    value: f64::NAN,
                    bound: Bound::Below,
                    tolerance: 0.0,
                    passed: false,
                    detail: Some(e.to_string()),
                });
                continue;
            }
        };
        let model = scene.model();
        if model != Model::LinearizedOmn {
            let mut worst = Ok(0.0f64);
            for seg in report.segments() {
                let field = &scene.media[seg.medium].field;
                let stride = (seg.samples.len() / 16).max(1);
                for sample in seg.samples.iter().step_by(stride) {
                    let r = (|| {
                        let s = if model == Model::SpinlessFermat { 0.0 } else { seg.s };
                        let inv = OrbitInvariants::new(src.p, s)?;
                        let dir = direction(&sample.state, &inv, field, model)?;
                        let n = field.index(&sample.state.x)?;
                        Ok(kernel_residual(&sample.state, &dir, &inv, field)? / (src.p * n.abs()))
                    })();
                    if let Ok(acc) = &mut worst {
                        match r {
                            Ok(v) => *acc = acc.max(v),
                            Err(e) => worst = Err(e),
                        }
                    }
                }
            }
            c.record(format!("{name}/source {i}: kernel residual"), worst, Bound::Below, 1e-10);
        }
        for (k, event) in report.scatter_events().enumerate() {
            let label = format!("{name}/source {i}/event {k}");
            event_checks(c, &label, event, event.s_before, opts, rng);
        }
    }
}

/// The built-in suite: randomized invariant checks plus the shipped scenes.
pub fn run_builtin(opts: &CheckOptions) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut c = Collector { checks: Vec::new() };
    let mut warnings = Vec::new();
    propagation_checks(&mut c, &mut rng);
    orbit_checks(&mut c, &mut rng);
    scattering_checks(&mut c, &mut rng, opts);
    for (name, text) in SHIPPED_SCENES {
        match parse_scene(text, None) {
            Ok(scene) => scene_checks(&mut c, name, &scene, opts, &mut rng),
            Err(e) => warnings.push(format!("shipped scene {name} failed to load: {e}")),
        }
    }
    c.finish("builtin".into(), opts.seed, warnings)
}

/// Checks derived from one scene: kernel residuals along every segment and
/// the scattering invariants at every interface event.
pub fn run_scene_checks(name: &str, scene: &Scene, opts: &CheckOptions) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut c = Collector { checks: Vec::new() };
    scene_checks(&mut c, name, scene, opts, &mut rng);
    c.finish(name.to_string(), opts.seed, Vec::new())
}
