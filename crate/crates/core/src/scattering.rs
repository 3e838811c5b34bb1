//! Scattering of spinning rays at a planar interface.
//!
//! The interface `⟨n, x − anchor⟩ = 0` separates medium 1 (index `n1`, the
//! side `n` points away from) from medium 2 (index `n2`). Incoming rays on
//! the orbit of color `p n1` are mapped to outgoing rays by the unique map
//! commuting with the rigid motions of the plane and preserving the twisted
//! symplectic forms:
//!
//! ```text
//! q2 = q1 + μ p1 + ν n + ρ n × p1,   p2 = p1 + λ n
//! ```
//!
//! with `q` measured from the anchor and `p_i` the linear momenta. A
//! negative `n2` models a left-handed medium, where the outgoing momentum and
//! direction are antiparallel.

use nalgebra::{Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::orbits::{twisted_form, unit_direction, OrbitInvariants, OrbitTangent, Ray};

/// Below `‖n × p1‖² < NORMAL_INCIDENCE · C1` the incidence is treated as normal.
const NORMAL_INCIDENCE: f64 = 1e-12;

/// A planar interface between two homogeneous media.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interface {
    normal: Vec3,
    anchor: Vec3,
    n1: f64,
    n2: f64,
}

impl Interface {
    /// `normal` points from medium 1 into medium 2 and is normalized here.
    pub fn new(normal: Vec3, anchor: Vec3, n1: f64, n2: f64) -> Result<Self> {
        let normal = unit_direction(&normal).map_err(|_| Error::InvalidInterface("normal must be nonzero".into()))?;
        for (name, n) in [("n1", n1), ("n2", n2)] {
            if !(n.is_finite() && n != 0.0) {
                return Err(Error::InvalidInterface(format!("{name} must be finite and nonzero, got {n}")));
            }
        }
        if !anchor.iter().all(|a| a.is_finite()) {
            return Err(Error::InvalidInterface("anchor must be finite".into()));
        }
        Ok(Self { normal, anchor, n1, n2 })
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn anchor(&self) -> Vec3 {
        self.anchor
    }

    pub fn n1(&self) -> f64 {
        self.n1
    }

    pub fn n2(&self) -> f64 {
        self.n2
    }

    /// Positive on the medium 2 side.
    pub fn signed_distance(&self, x: &Vec3) -> f64 {
        self.normal.dot(&(x - self.anchor))
    }

    /// The same plane seen from medium 2.
    pub fn reversed(&self) -> Self {
        Self { normal: -self.normal, anchor: self.anchor, n1: self.n2, n2: self.n1 }
    }

    fn index_out(&self, mode: ScatterMode) -> f64 {
        match mode {
            ScatterMode::Refraction => self.n2,
            ScatterMode::Reflection | ScatterMode::TotalReflection => self.n1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScatterMode {
    Refraction,
    Reflection,
    /// Reflection forced by a negative refraction discriminant.
    TotalReflection,
}

impl ScatterMode {
    pub fn is_reflection(self) -> bool {
        !matches!(self, ScatterMode::Refraction)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScatterMode::Refraction => "refraction",
            ScatterMode::Reflection => "reflection",
            ScatterMode::TotalReflection => "total_reflection",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScatterCoefficients {
    /// `⟨n, p1⟩`.
    pub alpha: f64,
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
    pub rho: f64,
    /// `⟨n, q1⟩`.
    pub z: f64,
    pub c1: f64,
    pub c2: f64,
    pub c1p: f64,
    pub c2p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScatterOutcome {
    pub ray2: Ray,
    pub s2: f64,
    /// Outgoing linear momentum `p2 = p1 + λ n`.
    pub pvec2: Vec3,
    /// Signed color `p n_out` of the outgoing orbit.
    pub color2: f64,
    pub mode: ScatterMode,
    /// Transverse displacement `ρ n × p1` of the foot point.
    pub shift: Vec3,
    pub coefficients: ScatterCoefficients,
}

/// `C_i = (p n_i)²` and `C′_i = p n_i s_i`.
pub fn casimirs(p: f64, n_i: f64, s_i: f64) -> (f64, f64) {
    let pi = p * n_i;
    (pi * pi, pi * s_i)
}

/// One side of the coefficient computation. The inverse map reuses it with
/// the media exchanged.
struct Sides {
    c_in: f64,
    cp_in: f64,
    c_out: f64,
    cp_out: f64,
    /// Sign of the outgoing index; picks the root entering the far side.
    root_sign: f64,
}

fn coefficients(n: &Vec3, q: &Vec3, p_in: &Vec3, sides: &Sides, reflect: bool) -> Result<ScatterCoefficients> {
    let alpha = n.dot(p_in);
    let z = n.dot(q);
    let lambda = if reflect {
        -2.0 * alpha
    } else {
        let discriminant = alpha * alpha + sides.c_out - sides.c_in;
        if discriminant < 0.0 {
            return Err(Error::TotalReflectionRequired { discriminant });
        }
        -alpha + sides.root_sign * discriminant.sqrt()
    };
    let ratio = sides.c_in / sides.c_out;
    let mu = (ratio - 1.0) * z / alpha;
    let nu = ratio * lambda * z / alpha;
    let transverse = n.cross(p_in).norm_squared();
    let rho = if transverse < NORMAL_INCIDENCE * sides.c_in {
        0.0
    } else {
        let (k_in, k_out) = (sides.cp_in / sides.c_in, sides.cp_out / sides.c_out);
        ((k_out - k_in) * alpha + lambda * k_out) / transverse
    };
    Ok(ScatterCoefficients {
        alpha,
        lambda,
        mu,
        nu,
        rho,
        z,
        c1: sides.c_in,
        c2: sides.c_out,
        c1p: sides.cp_in,
        c2p: sides.cp_out,
    })
}

fn spin_out(s1: f64, mode: ScatterMode) -> f64 {
    if mode.is_reflection() {
        -s1
    } else {
        s1
    }
}

fn incoming(ray1: &Ray, iface: &Interface) -> Result<Ray> {
    let normal_component = iface.normal.dot(&ray1.u());
    if normal_component <= 1e-12 {
        return Err(Error::NotIncoming { normal_component });
    }
    Ok(ray1.relative_to(&iface.anchor))
}

/// Coefficients of the scattering map for a requested mode.
///
/// `inv` supplies the color; `s1` is the incoming spin. Requesting
/// [`ScatterMode::Refraction`] past the critical angle fails with
/// [`Error::TotalReflectionRequired`].
pub fn scatter_coefficients(
    ray1: &Ray,
    s1: f64,
    iface: &Interface,
    inv: &OrbitInvariants,
    mode: ScatterMode,
) -> Result<ScatterCoefficients> {
    let local = incoming(ray1, iface)?;
    let p = inv.color();
    let (c1, c1p) = casimirs(p, iface.n1, s1);
    let (c2, c2p) = casimirs(p, iface.index_out(mode), spin_out(s1, mode));
    let sides = Sides { c_in: c1, cp_in: c1p, c_out: c2, cp_out: c2p, root_sign: iface.n2.signum() };
    let p1 = local.u() * (p * iface.n1);
    coefficients(&iface.normal, &local.q(), &p1, &sides, mode.is_reflection())
}

/// Apply a (possibly modified) coefficient set.
pub fn scatter_with_coefficients(
    ray1: &Ray,
    s1: f64,
    iface: &Interface,
    inv: &OrbitInvariants,
    mode: ScatterMode,
    coeffs: &ScatterCoefficients,
) -> Result<ScatterOutcome> {
    let local = incoming(ray1, iface)?;
    let n = iface.normal;
    let color2 = inv.color() * iface.index_out(mode);
    let p1 = local.u() * (inv.color() * iface.n1);
    let shift = n.cross(&p1) * coeffs.rho;
    let q2 = local.q() + p1 * coeffs.mu + n * coeffs.nu + shift;
    let p2 = p1 + n * coeffs.lambda;
    let ray2 = Ray::new(q2, p2 / color2)?.from_relative(&iface.anchor);
    Ok(ScatterOutcome { ray2, s2: spin_out(s1, mode), pvec2: p2, color2, mode, shift, coefficients: *coeffs })
}

/// Scatter in a requested mode.
///
/// [`ScatterMode::TotalReflection`] is accepted and behaves as reflection.
pub fn scatter_mode(
    ray1: &Ray,
    s1: f64,
    iface: &Interface,
    inv: &OrbitInvariants,
    mode: ScatterMode,
) -> Result<ScatterOutcome> {
    let coeffs = scatter_coefficients(ray1, s1, iface, inv, mode)?;
    scatter_with_coefficients(ray1, s1, iface, inv, mode, &coeffs)
}

/// Refract when possible, otherwise totally reflect.
pub fn scatter(ray1: &Ray, s1: f64, iface: &Interface, inv: &OrbitInvariants) -> Result<ScatterOutcome> {
    match scatter_mode(ray1, s1, iface, inv, ScatterMode::Refraction) {
        Err(Error::TotalReflectionRequired { .. }) => scatter_mode(ray1, s1, iface, inv, ScatterMode::TotalReflection),
        other => other,
    }
}

/// The transverse (spin Hall) shift of the default scattering outcome.
///
/// Equals `(n × p1 / ‖n × p1‖) (s2 cos θ2 − s1 cos θ1) / (p |n1| sin θ1)`; zero at
/// normal incidence and for every reflection.
pub fn transverse_shift(ray1: &Ray, s1: f64, iface: &Interface, inv: &OrbitInvariants) -> Result<Vec3> {
    Ok(scatter(ray1, s1, iface, inv)?.shift)
}

/// Outgoing angle from the normal (Snell–Descartes).
///
/// Refraction returns `asin(n1 sin θ1 / n2)`, negative for a left-handed
/// medium; reflection returns `π − θ1`.
pub fn snell_angles(theta1: f64, n1: f64, n2: f64, mode: ScatterMode) -> Result<f64> {
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta1) {
        return Err(Error::InvalidInterface(format!("incidence angle {theta1} outside [0, π/2)")));
    }
    if mode.is_reflection() {
        return Ok(std::f64::consts::PI - theta1);
    }
    let sine = n1 * theta1.sin() / n2;
    if sine.abs() > 1.0 {
        return Err(Error::TotalReflectionRequired { discriminant: 1.0 - sine * sine });
    }
    Ok(sine.asin())
}

/// Angle of incidence `θ1 = acos⟨n, u1⟩`.
pub fn incidence_angle(ray1: &Ray, iface: &Interface) -> f64 {
    iface.normal.dot(&ray1.u()).clamp(-1.0, 1.0).acos()
}

/// Signed outgoing angle measured from `n` towards the tangential direction of `u1`.
pub fn outgoing_angle(ray1: &Ray, outcome: &ScatterOutcome, iface: &Interface) -> f64 {
    let n = iface.normal;
    let u1 = ray1.u();
    let tangential = u1 - n * n.dot(&u1);
    let u2 = outcome.ray2.u();
    let along = if tangential.norm() < 1e-15 { 0.0 } else { u2.dot(&tangential.normalize()) };
    along.atan2(u2.dot(&n))
}

/// Residuals of the conserved components of the momentum map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationReport {
    /// `|⟨n, ℓ1⟩ − ⟨n, ℓ2⟩|`, angular momentum about the anchor.
    pub angular: f64,
    /// `‖n × p1 − n × p2‖`.
    pub linear: f64,
    /// Natural magnitude of the compared quantities.
    pub scale: f64,
}

impl ConservationReport {
    pub fn within(&self, rel: f64) -> bool {
        self.angular <= rel * self.scale && self.linear <= rel * self.scale
    }
}

pub fn conservation_check(
    ray1: &Ray,
    s1: f64,
    outcome: &ScatterOutcome,
    iface: &Interface,
    inv: &OrbitInvariants,
) -> ConservationReport {
    let n = iface.normal;
    let r1 = ray1.relative_to(&iface.anchor);
    let r2 = outcome.ray2.relative_to(&iface.anchor);
    let p1 = r1.u() * (inv.color() * iface.n1);
    let p2 = outcome.pvec2;
    let l1 = r1.q().cross(&p1) + r1.u() * s1;
    let l2 = r2.q().cross(&p2) + r2.u() * outcome.s2;
    let scale = (1.0 + r1.q().norm().max(r2.q().norm())) * p1.norm().max(p2.norm()) + s1.abs();
    ConservationReport { angular: (n.dot(&l1) - n.dot(&l2)).abs(), linear: (n.cross(&p1) - n.cross(&p2)).norm(), scale }
}

/// Largest `|ω1(a, b) − ω2(Sa, Sb)|` over random tangent pairs, with the
/// differential of the default scattering map taken by central differences.
pub fn symplecto_check(
    ray1: &Ray,
    s1: f64,
    iface: &Interface,
    inv: &OrbitInvariants,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let mode = scatter(ray1, s1, iface, inv)?.mode;
    symplecto_check_with(ray1, s1, iface, inv, samples, seed, |r| scatter_mode(r, s1, iface, inv, mode))
}

/// [`symplecto_check`] for an arbitrary map, e.g. one with altered coefficients.
pub fn symplecto_check_with(
    ray1: &Ray,
    s1: f64,
    iface: &Interface,
    inv: &OrbitInvariants,
    samples: usize,
    seed: u64,
    map: impl Fn(&Ray) -> Result<ScatterOutcome>,
) -> Result<f64> {
    let base = map(ray1)?;
    let color1 = inv.color() * iface.n1;
    let scale = 1.0 + ray1.q().norm();
    let eps = 1e-6 * scale;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random_vec =
        || Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));

    let push = |t: &OrbitTangent| -> Result<OrbitTangent> {
        let moved = |sign: f64| -> Result<Ray> {
            let r = Ray::from_point_direction(ray1.q() + t.dq * (sign * eps), ray1.u() + t.du * (sign * eps))?;
            Ok(map(&r)?.ray2)
        };
        let (plus, minus) = (moved(1.0)?, moved(-1.0)?);
        let dq = (plus.q() - minus.q()) / (2.0 * eps);
        let du = (plus.u() - minus.u()) / (2.0 * eps);
        Ok(OrbitTangent::project(&base.ray2, dq, du))
    };

    let mut worst = 0.0f64;
    for _ in 0..samples {
        let a = OrbitTangent::project(ray1, random_vec(), random_vec());
        let b = OrbitTangent::project(ray1, random_vec(), random_vec());
        let before = twisted_form(color1, s1, &ray1.u(), &a, &b);
        let after = twisted_form(base.color2, base.s2, &base.ray2.u(), &push(&a)?, &push(&b)?);
        worst = worst.max((before - after).abs());
    }
    Ok(worst)
}

/// Action of the rigid motions of the interface plane on rays: rotation by
/// `angle` about the normal through the anchor, then translation by `c ∥ plane`.
pub fn h_action(angle: f64, c: &Vec3, ray: &Ray, iface: &Interface) -> Result<Ray> {
    let off = iface.normal.dot(c);
    if off.abs() > 1e-12 * (1.0 + c.norm()) {
        return Err(Error::TranslationOffPlane(off));
    }
    let c = c - iface.normal * off;
    let rot = Rotation3::from_axis_angle(&Unit::new_unchecked(iface.normal), angle);
    let local = ray.relative_to(&iface.anchor);
    let au = rot * local.u();
    let q = rot * local.q() + c - au * au.dot(&c);
    Ok(Ray::from_point_direction(q, au)?.from_relative(&iface.anchor))
}

/// Invert a scattering outcome, returning the incoming ray and spin.
///
/// The coefficients are recomputed from the outgoing data with the two media
/// exchanged; they satisfy `λ′ = −λ`, `μ′ = −μ`, `ν′ = λμ − ν`, `ρ′ = −ρ`.
pub fn inverse_scatter(outcome: &ScatterOutcome, iface: &Interface, inv: &OrbitInvariants) -> Result<(Ray, f64)> {
    Ok(inverse_with_coefficients(outcome, iface, inv)?.0)
}

/// [`inverse_scatter`] together with the inverse coefficient set.
pub fn inverse_with_coefficients(
    outcome: &ScatterOutcome,
    iface: &Interface,
    inv: &OrbitInvariants,
) -> Result<((Ray, f64), ScatterCoefficients)> {
    let mode = outcome.mode;
    let n = iface.normal;
    let local = outcome.ray2.relative_to(&iface.anchor);
    let p2 = outcome.pvec2;
    if n.dot(&p2).abs() <= 1e-12 * p2.norm() {
        return Err(Error::NotIncoming { normal_component: n.dot(&outcome.ray2.u()) });
    }
    let s1 = spin_out(outcome.s2, mode);
    let color2 = outcome.color2;
    let color1 = inv.color() * iface.n1;
    let sides = Sides {
        c_in: color2 * color2,
        cp_in: color2 * outcome.s2,
        c_out: color1 * color1,
        cp_out: color1 * s1,
        root_sign: iface.n1.signum(),
    };
    let coeffs = coefficients(&n, &local.q(), &p2, &sides, mode.is_reflection())?;
    let q1 = local.q() + p2 * coeffs.mu + n * coeffs.nu + n.cross(&p2) * coeffs.rho;
    let p1 = p2 + n * coeffs.lambda;
    let ray1 = Ray::new(q1, p1 / color1)?.from_relative(&iface.anchor);
    Ok(((ray1, s1), coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    fn flat(n1: f64, n2: f64) -> Interface {
        Interface::new(v(0.0, 0.0, 1.0), Vec3::zeros(), n1, n2).unwrap()
    }

    fn at_angle(theta: f64, q: Vec3) -> Ray {
        let u = v(theta.sin(), 0.0, theta.cos());
        Ray::from_point_direction(q, u).unwrap()
    }

    fn unit_color() -> OrbitInvariants {
        OrbitInvariants::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn casimir_examples() {
        assert_eq!(casimirs(1.0, 1.0, 1.0), (1.0, 1.0));
        assert_eq!(casimirs(1.0, 1.5, 1.0), (2.25, 1.5));
        assert_eq!(casimirs(1.0, -1.0, 1.0), (1.0, -1.0));
    }

    #[test]
    fn interface_validation() {
        assert!(Interface::new(Vec3::zeros(), Vec3::zeros(), 1.0, 1.5).is_err());
        assert!(Interface::new(v(0.0, 0.0, 1.0), Vec3::zeros(), 0.0, 1.5).is_err());
        assert!(Interface::new(v(0.0, 0.0, 1.0), Vec3::zeros(), 1.0, f64::NAN).is_err());
        let n = Interface::new(v(0.0, 3.0, 4.0), Vec3::zeros(), 1.0, -1.0).unwrap().normal();
        assert!((n.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn refraction_coefficients_at_thirty_degrees() {
        let iface = flat(1.0, 1.5);
        let ray = at_angle(PI / 6.0, Vec3::zeros());
        let c = scatter_coefficients(&ray, 1.0, &iface, &unit_color(), ScatterMode::Refraction).unwrap();
        // Positive root of λ² + 2αλ + 1 − 2.25 = 0 with α = √3/2.
        let lambda = 2f64.sqrt() - 3f64.sqrt() / 2.0;
        assert_relative_eq!(c.alpha, 3f64.sqrt() / 2.0, epsilon = 1e-15);
        assert_relative_eq!(c.lambda, lambda, epsilon = 1e-14);
        assert!((c.lambda - 0.5481873).abs() < 1e-6);
        assert_eq!((c.mu, c.nu), (0.0, 0.0));
        assert!((c.lambda * c.lambda + 2.0 * c.alpha * c.lambda + c.c1 - c.c2).abs() < 1e-14);

        let r = scatter_coefficients(&ray, 1.0, &iface, &unit_color(), ScatterMode::Reflection).unwrap();
        assert_eq!(r.lambda, -2.0 * r.alpha);
        assert_eq!(r.rho, 0.0);
    }

    #[test]
    fn shift_oracle() {
        // Independent evaluation: ‖shift‖ = (cos θ2 − cos θ1) / sin θ1 from angular-momentum conservation.
        let theta1 = PI / 6.0;
        let theta2 = (theta1.sin() / 1.5).asin();
        let expected = (theta2.cos() - theta1.cos()) / theta1.sin();
        let iface = flat(1.0, 1.5);
        let ray = at_angle(theta1, Vec3::zeros());
        let out = scatter(&ray, 1.0, &iface, &unit_color()).unwrap();
        assert_eq!(out.mode, ScatterMode::Refraction);
        assert_relative_eq!(out.shift.norm(), expected, epsilon = 1e-14);
        assert!((out.shift.norm() - 0.1535680).abs() < 1e-6);
        // direction: n × p1 = ẑ × x̂ sin θ1 = ŷ sin θ1
        assert!(out.shift.y > 0.0 && out.shift.x.abs() < 1e-16 && out.shift.z.abs() < 1e-16);
        assert_relative_eq!(outgoing_angle(&ray, &out, &iface), 0.3398369, epsilon = 1e-7);
        assert_relative_eq!(snell_angles(theta1, 1.0, 1.5, ScatterMode::Refraction).unwrap(), theta2, epsilon = 1e-15);
    }

    #[test]
    fn identity_without_interface() {
        let iface = Interface::new(v(0.2, -0.1, 1.0), v(0.3, 0.1, -0.2), 1.3, 1.3).unwrap();
        let ray = Ray::from_point_direction(v(1.0, 2.0, 0.5), v(0.3, 0.2, 1.0)).unwrap();
        let out = scatter(&ray, 1.0, &iface, &unit_color()).unwrap();
        let c = out.coefficients;
        assert!(c.lambda.abs() < 1e-15 && c.mu.abs() < 1e-15 && c.nu.abs() < 1e-15 && c.rho.abs() < 1e-15);
        assert!((out.ray2.q() - ray.q()).norm() < 1e-14);
        assert!((out.ray2.u() - ray.u()).norm() < 1e-15);
        assert_eq!(out.s2, 1.0);
        let dev = symplecto_check(&ray, 1.0, &iface, &unit_color(), 20, 7).unwrap();
        // Central differences at step 1e-6 leave a rounding floor near 1e-10.
        assert!(dev < 1e-9, "{dev}");
    }

    #[test]
    fn mirror_law_and_spin_flip() {
        let iface = flat(1.0, 1.5);
        let ray = at_angle(0.7, v(0.3, 0.4, -0.2));
        let out = scatter_mode(&ray, 1.0, &iface, &unit_color(), ScatterMode::Reflection).unwrap();
        let p1 = ray.u();
        let n = iface.normal();
        assert!((out.pvec2 - (p1 - n * 2.0 * n.dot(&p1))).norm() < 1e-15);
        assert_eq!(out.s2, -1.0);
        assert!(out.shift.norm() < 1e-12);
        assert_relative_eq!(outgoing_angle(&ray, &out, &iface), PI - 0.7, epsilon = 1e-12);
        assert_eq!(snell_angles(0.7, 1.0, 1.5, ScatterMode::Reflection).unwrap(), PI - 0.7);
    }

    #[test]
    fn normal_incidence() {
        let iface = flat(1.0, 1.5);
        let ray = at_angle(0.0, v(0.4, -0.3, 0.0));
        for s in [1.0, -1.0] {
            let out = scatter(&ray, s, &iface, &unit_color()).unwrap();
            assert_eq!(out.coefficients.rho, 0.0);
            assert_eq!(out.shift, Vec3::zeros());
            assert_eq!(out.s2, s);
            let report = conservation_check(&ray, s, &out, &iface, &unit_color());
            assert_eq!(report.linear, 0.0);
        }
        assert_eq!(snell_angles(0.0, 1.0, 1.5, ScatterMode::Refraction).unwrap(), 0.0);
    }

    #[test]
    fn total_reflection_switch() {
        let iface = flat(1.5, 1.0);
        let critical = (1.0f64 / 1.5).asin();
        let inv = unit_color();
        let below = at_angle(critical - 1e-9, v(0.1, 0.2, 0.0));
        let above = at_angle(critical + 1e-9, v(0.1, 0.2, 0.0));
        let a = scatter(&below, 1.0, &iface, &inv).unwrap();
        let b = scatter(&above, 1.0, &iface, &inv).unwrap();
        assert_eq!(a.mode, ScatterMode::Refraction);
        assert_eq!(b.mode, ScatterMode::TotalReflection);
        assert_eq!(b.s2, -1.0);
        for (ray, out) in [(below, a), (above, b)] {
            assert!(out.ray2.q().iter().chain(out.ray2.u().iter()).all(|c| c.is_finite()));
            assert!(conservation_check(&ray, 1.0, &out, &iface, &inv).within(1e-8));
        }
        assert!(matches!(
            scatter_mode(&above, 1.0, &iface, &inv, ScatterMode::Refraction),
            Err(Error::TotalReflectionRequired { .. })
        ));
        assert!(matches!(
            snell_angles(critical + 1e-6, 1.5, 1.0, ScatterMode::Refraction),
            Err(Error::TotalReflectionRequired { .. })
        ));
        assert!(snell_angles(PI / 2.0, 1.0, 1.0, ScatterMode::Refraction).is_err());
    }

    #[test]
    fn outgoing_rays_must_be_rejected() {
        let iface = flat(1.0, 1.5);
        let ray = Ray::from_point_direction(Vec3::zeros(), v(0.5, 0.0, -1.0)).unwrap();
        assert!(matches!(scatter(&ray, 1.0, &iface, &unit_color()), Err(Error::NotIncoming { .. })));
        let grazing = Ray::from_point_direction(Vec3::zeros(), v(1.0, 0.0, 0.0)).unwrap();
        assert!(scatter(&grazing, 1.0, &iface, &unit_color()).is_err());
    }

    #[test]
    fn left_handed_media() {
        let ray = at_angle(0.6, v(0.2, -0.1, 0.0));
        let inv = unit_color();
        let mirror = scatter(&ray, 1.0, &flat(1.0, -1.0), &inv).unwrap();
        assert_eq!(mirror.mode, ScatterMode::Refraction);
        assert!(mirror.shift.norm() < 1e-12);
        let ray2_dir = mirror.ray2.u();
        assert!(ray2_dir.dot(&mirror.pvec2) < 0.0);
        assert!(ray2_dir.z > 0.0, "enters medium 2");

        let iface = flat(1.0, -1.1);
        let out = scatter(&ray, 1.0, &iface, &inv).unwrap();
        assert!(out.shift.norm() > 1e-3);
        assert!(out.ray2.u().dot(&out.pvec2) < 0.0);
        let theta2 = snell_angles(0.6, 1.0, -1.1, ScatterMode::Refraction).unwrap();
        assert!(theta2 < 0.0);
        assert_relative_eq!(outgoing_angle(&ray, &out, &iface), theta2, epsilon = 1e-12);
        assert!(conservation_check(&ray, 1.0, &out, &iface, &inv).within(1e-10));
    }

    #[test]
    fn conservation_detects_perturbation() {
        let iface = flat(1.0, 1.5);
        let ray = at_angle(PI / 6.0, v(0.0, 0.3, 0.0));
        let inv = unit_color();
        let mut out = scatter(&ray, 1.0, &iface, &inv).unwrap();
        assert!(conservation_check(&ray, 1.0, &out, &iface, &inv).within(1e-10));
        let p1 = ray.u();
        let nxp = iface.normal().cross(&p1);
        out.ray2 = Ray::new(out.ray2.q() + nxp * 1e-3, out.ray2.u()).unwrap();
        assert!(conservation_check(&ray, 1.0, &out, &iface, &inv).angular > 1e-5);
    }

    #[test]
    fn symplectic_grid() {
        let inv = unit_color();
        for ratio in [0.5, 1.5, 2.0, -1.0] {
            let iface = Interface::new(v(0.0, 0.0, 1.0), v(0.5, -0.5, 0.0), 1.0, ratio).unwrap();
            for deg in (5..=85).step_by(10) {
                let theta = (deg as f64).to_radians();
                if ratio > 0.0 && ratio < 1.0 && (theta.sin() - ratio).abs() < 1e-3 {
                    continue;
                }
                for s in [1.0, -1.0] {
                    let ray = at_angle(theta, v(0.3, 0.2, 0.1));
                    let dev = symplecto_check(&ray, s, &iface, &inv, 8, deg as u64).unwrap();
                    assert!(dev < 1e-5, "ratio {ratio} θ {deg}° s {s}: {dev}");
                }
            }
        }
    }

    #[test]
    fn dropping_spin_term_breaks_symplecticity() {
        let iface = flat(1.0, 1.5);
        let inv = unit_color();
        let ray = at_angle(PI / 6.0, v(0.1, 0.2, 0.0));
        let dev = symplecto_check_with(&ray, 1.0, &iface, &inv, 16, 3, |r| {
            let mut c = scatter_coefficients(r, 1.0, &iface, &inv, ScatterMode::Refraction)?;
            c.rho = 0.0;
            scatter_with_coefficients(r, 1.0, &iface, &inv, ScatterMode::Refraction, &c)
        })
        .unwrap();
        assert!(dev > 1e-3, "{dev}");
    }

    #[test]
    fn h_action_examples() {
        let iface = Interface::new(v(0.0, 1.0, 1.0), v(1.0, 0.0, 0.0), 1.0, 1.5).unwrap();
        let ray = Ray::from_point_direction(v(0.3, 0.5, -0.2), v(0.1, 0.7, 0.4)).unwrap();
        let same = h_action(0.0, &Vec3::zeros(), &ray, &iface).unwrap();
        assert!((same.q() - ray.q()).norm() < 1e-15 && (same.u() - ray.u()).norm() < 1e-15);
        let turn = h_action(2.0 * PI, &Vec3::zeros(), &ray, &iface).unwrap();
        assert!((turn.q() - ray.q()).norm() < 1e-12 && (turn.u() - ray.u()).norm() < 1e-12);
        assert!(matches!(h_action(0.1, &v(0.0, 1.0, 0.0), &ray, &iface), Err(Error::TranslationOffPlane(_))));
    }

    #[test]
    fn reflection_is_an_involution() {
        let iface = flat(1.0, 1.5);
        let inv = unit_color();
        let ray = at_angle(0.4, v(0.2, 0.1, 0.0));
        let out = scatter_mode(&ray, 1.0, &iface, &inv, ScatterMode::Reflection).unwrap();
        // The reflected ray is incoming for the reversed normal.
        let mirror = Interface::new(-iface.normal(), iface.anchor(), 1.0, 1.5).unwrap();
        let back = scatter_mode(&out.ray2, out.s2, &mirror, &inv, ScatterMode::Reflection).unwrap();
        assert_eq!(back.s2, 1.0);
        // Reflecting twice maps (q, u) ↦ (q, u) up to the mirror; compare with a direct mirror.
        let twice_u = back.ray2.u();
        assert!((twice_u - ray.u()).norm() < 1e-14);
        assert!((back.ray2.q() - ray.q()).norm() < 1e-14);
    }

    #[test]
    fn physical_reversibility() {
        let inv = unit_color();
        let forward = flat(1.0, 1.5);
        let ray = at_angle(0.5, v(0.3, -0.2, 0.0));
        let out = scatter(&ray, 1.0, &forward, &inv).unwrap();
        let reversed_ray = Ray::from_point_direction(out.ray2.q(), -out.ray2.u()).unwrap();
        let back = scatter(&reversed_ray, out.s2, &forward.reversed(), &inv).unwrap();
        assert_eq!(back.mode, ScatterMode::Refraction);
        assert!((back.ray2.u() + ray.u()).norm() < 1e-12);
        assert!((back.ray2.q() - ray.q()).norm() < 1e-12);
        assert_eq!(back.s2, 1.0);
    }

    fn unit() -> impl Strategy<Value = Vec3> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("nonzero", |(x, y, z)| x * x + y * y + z * z > 0.05)
            .prop_map(|(x, y, z)| v(x, y, z).normalize())
    }

    fn point() -> impl Strategy<Value = Vec3> {
        (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y, z)| v(x, y, z))
    }

    fn index() -> impl Strategy<Value = f64> {
        prop_oneof![0.5..3.0f64, -3.0..-0.5f64]
    }

    /// Random admissible configuration: interface, incoming ray, spin, invariants.
    fn setup() -> impl Strategy<Value = (Interface, Ray, f64, OrbitInvariants)> {
        (unit(), point(), 0.5..3.0f64, index(), unit(), point(), 0.1..10.0f64, prop::sample::select(vec![-1.0, 1.0]))
            .prop_filter_map("incoming", |(n, anchor, n1, n2, u, x, p, s)| {
                let iface = Interface::new(n, anchor, n1, n2).ok()?;
                let u = if u.dot(&n) < 0.0 { -u } else { u };
                (u.dot(&n) > 0.05).then_some(())?;
                let ray = Ray::from_point_direction(x, u).ok()?;
                Some((iface, ray, s, OrbitInvariants::new(p, s).unwrap()))
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn outcome_invariants((iface, ray, s, inv) in setup()) {
            let out = scatter(&ray, s, &iface, &inv).unwrap();
            let c = out.coefficients;
            if !out.mode.is_reflection() {
                prop_assert!((c.lambda * c.lambda + 2.0 * c.alpha * c.lambda + c.c1 - c.c2).abs() <= 1e-12 * c.c1.max(c.c2));
            }
            let c_out = out.color2 * out.color2;
            prop_assert!((out.pvec2.norm_squared() - c_out).abs() <= 1e-10 * c_out);
            let local = out.ray2.relative_to(&iface.anchor());
            prop_assert!(local.q().dot(&out.pvec2).abs() <= 1e-10 * (1.0 + local.q().norm()) * out.pvec2.norm());
            prop_assert!(out.shift.dot(&iface.normal()).abs() <= 1e-10 * (1.0 + out.shift.norm()));
            let p1 = ray.u() * inv.color() * iface.n1();
            prop_assert!(out.shift.dot(&p1).abs() <= 1e-10 * (1.0 + out.shift.norm()) * p1.norm());
            prop_assert!(conservation_check(&ray, s, &out, &iface, &inv).within(1e-10));
            // the outgoing ray leaves the interface on the correct side
            let side = iface.normal().dot(&out.ray2.u());
            let correct_side = if out.mode.is_reflection() { side < 0.0 } else { side >= 0.0 };
            prop_assert!(correct_side);
        }

        #[test]
        fn reversibility((iface, ray, s, inv) in setup()) {
            let out = scatter(&ray, s, &iface, &inv).unwrap();
            prop_assume!(iface.normal().dot(&out.pvec2).abs() > 1e-6 * out.pvec2.norm());
            let ((back, s1), inverse) = inverse_with_coefficients(&out, &iface, &inv).unwrap();
            let c = out.coefficients;
            let scale = 1.0 + ray.relative_to(&iface.anchor()).q().norm();
            prop_assert!((back.q() - ray.q()).norm() <= 1e-10 * scale * (1.0 + iface.anchor().norm()));
            prop_assert!((back.u() - ray.u()).norm() <= 1e-10);
            prop_assert_eq!(s1, s);
            let tol = 1e-8 * (1.0 + c.lambda.abs() + c.mu.abs() + c.nu.abs() + c.rho.abs()) * scale;
            prop_assert!((inverse.lambda + c.lambda).abs() <= tol);
            prop_assert!((inverse.mu + c.mu).abs() <= tol);
            prop_assert!((inverse.nu - (c.lambda * c.mu - c.nu)).abs() <= tol * (1.0 + c.lambda.abs()));
            prop_assert!((inverse.rho + c.rho).abs() <= tol);
        }

        #[test]
        fn shift_parity((iface, ray, _s, inv) in setup()) {
            let plus = transverse_shift(&ray, 1.0, &iface, &inv).unwrap();
            let minus = transverse_shift(&ray, -1.0, &iface, &inv).unwrap();
            prop_assert_eq!(plus, -minus);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn equivariance((iface, ray, s, inv) in setup(), angle in -PI..PI, c in point()) {
            let c = c - iface.normal() * iface.normal().dot(&c);
            let moved = h_action(angle, &c, &ray, &iface).unwrap();
            let a = scatter(&moved, s, &iface, &inv).unwrap();
            let b = h_action(angle, &c, &scatter(&ray, s, &iface, &inv).unwrap().ray2, &iface).unwrap();
            let scale = 1.0 + b.q().norm();
            prop_assert!((a.ray2.q() - b.q()).norm() <= 1e-9 * scale);
            prop_assert!((a.ray2.u() - b.u()).norm() <= 1e-9);
        }
    }
}
