//! The manifold of colored, spinning light rays.
//!
//! A ray is an oriented straight line `(q, u)` with `‖u‖ = 1` and `⟨u, q⟩ = 0`,
//! i.e. a point of `TS²`. The pair `(p, s)` labels the SE(3) coadjoint orbit:
//! `p > 0` is the color and `s` the spin. The orbit carries the twisted
//! symplectic form
//!
//! ```text
//! ω(δξ, δ′ξ) = p[⟨δu, δ′q⟩ − ⟨δ′u, δq⟩] − s⟨u, δu × δ′u⟩
//! ```
//!
//! whose spin term makes the coordinates of the wave plane `u⊥` noncommuting.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vec3;

const DIRECTION_FLOOR: f64 = 1e-9;
const CONSTRAINT_TOL: f64 = 1e-12;

/// Casimir data of an orbit: color `p`, spin `s` and the action scale `ħ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitInvariants {
    p: f64,
    s: f64,
    hbar: f64,
}

impl OrbitInvariants {
    /// Orbit with color `p` and spin `s` in units where `ħ = 1`.
    pub fn new(p: f64, s: f64) -> Result<Self> {
        Self::with_hbar(p, s, 1.0)
    }

    pub fn with_hbar(p: f64, s: f64, hbar: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidInvariants(format!("color must be positive, got {p}")));
        }
        if !s.is_finite() {
            return Err(Error::InvalidInvariants(format!("spin must be finite, got {s}")));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidInvariants(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self { p, s, hbar })
    }

    /// Circularly polarized photon: `s = χħ` with helicity `χ = ±1`.
    pub fn photon(p: f64, helicity: i8, hbar: f64) -> Result<Self> {
        if helicity != 1 && helicity != -1 {
            return Err(Error::InvalidInvariants(format!("photon helicity must be ±1, got {helicity}")));
        }
        Self::with_hbar(p, f64::from(helicity) * hbar, hbar)
    }

    pub fn color(&self) -> f64 {
        self.p
    }

    pub fn spin(&self) -> f64 {
        self.s
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Sign of the spin; zero only for the spinless model.
    pub fn helicity(&self) -> i8 {
        if self.s > 0.0 {
            1
        } else if self.s < 0.0 {
            -1
        } else {
            0
        }
    }

    /// `C = p²`.
    pub fn casimir(&self) -> f64 {
        self.p * self.p
    }

    /// `C′ = s p`.
    pub fn casimir_prime(&self) -> f64 {
        self.s * self.p
    }

    /// Euclidean wave number `k = p / ħ`.
    pub fn wave_number(&self) -> f64 {
        self.p / self.hbar
    }

    /// Same color, different spin.
    pub fn with_spin(&self, s: f64) -> Self {
        Self { s, ..*self }
    }

    /// Same spin, different color.
    pub fn with_color(&self, p: f64) -> Result<Self> {
        Self::with_hbar(p, self.s, self.hbar)
    }
}

/// An oriented, non-parametrized straight line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    q: Vec3,
    u: Vec3,
}

pub(crate) fn unit_direction(u: &Vec3) -> Result<Vec3> {
    let norm = u.norm();
    if !(norm.is_finite() && norm >= DIRECTION_FLOOR) {
        return Err(Error::DegenerateDirection { norm });
    }
    Ok(u / norm)
}

impl Ray {
    /// Ray from its foot point `q` (relative to the origin) and direction `u`.
    ///
    /// `u` is renormalized; `q` must already be orthogonal to `u` up to
    /// `1e-9 (1 + ‖q‖)` and is then re-projected.
    pub fn new(q: Vec3, u: Vec3) -> Result<Self> {
        let u = unit_direction(&u)?;
        let drift = u.dot(&q);
        if drift.abs() > 1e-9 * (1.0 + q.norm()) {
            return Err(Error::InvalidTangent(format!("⟨u,q⟩ = {drift:e} for a ray foot point")));
        }
        Ok(Self { q: q - u * drift, u })
    }

    /// Ray through the point `x` with direction `u`: `q = x − u⟨u, x⟩`.
    pub fn from_point_direction(x: Vec3, u: Vec3) -> Result<Self> {
        let u = unit_direction(&u)?;
        Ok(Self { q: x - u * u.dot(&x), u })
    }

    pub fn q(&self) -> Vec3 {
        self.q
    }

    pub fn u(&self) -> Vec3 {
        self.u
    }

    /// Point of the line at signed distance `t` from the foot point.
    pub fn point_at(&self, t: f64) -> Vec3 {
        self.q + self.u * t
    }

    /// The same line described with respect to a different origin.
    pub fn relative_to(&self, origin: &Vec3) -> Ray {
        let x = self.q - origin;
        Ray { q: x - self.u * self.u.dot(&x), u: self.u }
    }

    /// Inverse of [`Ray::relative_to`].
    pub fn from_relative(&self, origin: &Vec3) -> Ray {
        let x = self.q + origin;
        Ray { q: x - self.u * self.u.dot(&x), u: self.u }
    }
}

/// Tangent displacement `(δq, δu)` at a ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitTangent {
    pub dq: Vec3,
    pub du: Vec3,
}

impl OrbitTangent {
    /// Validated tangent: `⟨u, δu⟩ = 0` and `⟨δq, u⟩ + ⟨q, δu⟩ = 0`.
    pub fn new(ray: &Ray, dq: Vec3, du: Vec3) -> Result<Self> {
        let radial = ray.u.dot(&du);
        if radial.abs() > CONSTRAINT_TOL * (1.0 + du.norm()) {
            return Err(Error::InvalidTangent(format!("⟨u,δu⟩ = {radial:e}")));
        }
        let mixed = dq.dot(&ray.u) + ray.q.dot(&du);
        let scale = (1.0 + ray.q.norm()) * (1.0 + dq.norm() + du.norm());
        if mixed.abs() > CONSTRAINT_TOL * scale {
            return Err(Error::InvalidTangent(format!("⟨δq,u⟩ + ⟨q,δu⟩ = {mixed:e}")));
        }
        Ok(Self { dq, du })
    }

    /// Project arbitrary ambient displacements onto the tangent space at `ray`.
    pub fn project(ray: &Ray, dq: Vec3, du: Vec3) -> Self {
        let u = ray.u;
        let du = du - u * u.dot(&du);
        let dq = dq - u * (u.dot(&dq) + ray.q.dot(&du));
        Self { dq, du }
    }
}

/// Value of the SE(3) momentum map: angular momentum `ℓ` and linear momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumValue {
    pub ell: Vec3,
    pub pvec: Vec3,
}

/// `ℓ = x × (p u) + s u`, `p = p u`.
pub fn momentum_map(x: &Vec3, u: &Vec3, inv: &OrbitInvariants) -> Result<MomentumValue> {
    let u = unit_direction(u)?;
    let pvec = u * inv.p;
    Ok(MomentumValue { ell: x.cross(&pvec) + u * inv.s, pvec })
}

/// Twisted form with an explicit (possibly negative) color and spin.
///
/// Used for the "out" orbits of a left-handed medium whose momentum and
/// direction are antiparallel.
pub fn twisted_form(color: f64, spin: f64, u: &Vec3, a: &OrbitTangent, b: &OrbitTangent) -> f64 {
    color * (a.du.dot(&b.dq) - b.du.dot(&a.dq)) - spin * u.dot(&a.du.cross(&b.du))
}

/// The orbit symplectic form evaluated on two tangents at `ray`.
pub fn symplectic_form(ray: &Ray, a: &OrbitTangent, b: &OrbitTangent, inv: &OrbitInvariants) -> f64 {
    twisted_form(inv.p, inv.s, &ray.u, a, b)
}

/// Spinless potential `θ(δξ) = −p⟨q, δu⟩`, with `dθ = ω` when `s = 0`.
pub fn spinless_potential(ray: &Ray, a: &OrbitTangent, inv: &OrbitInvariants) -> Result<f64> {
    if inv.s != 0.0 {
        return Err(Error::SpinfulPotential(inv.s));
    }
    Ok(-inv.p * ray.q.dot(&a.du))
}

/// Poisson bracket `{q₁, q₂}` of the wave-plane coordinates `qᵢ = ⟨vᵢ, q⟩`.
///
/// Builds the 4×4 matrix of `ω` on an explicit tangent basis, inverts it and
/// evaluates `{f, g} = −ω⁻¹(df, dg)`. The result is `s/p²` for any
/// orthonormal frame with `v₁ × v₂ = u`.
pub fn wave_plane_bracket(ray: &Ray, v1: &Vec3, v2: &Vec3, inv: &OrbitInvariants) -> Result<f64> {
    let u = ray.u;
    let orthonormal = (v1.norm() - 1.0).abs() < 1e-9
        && (v2.norm() - 1.0).abs() < 1e-9
        && v1.dot(v2).abs() < 1e-9
        && (v1.cross(v2) - u).norm() < 1e-9;
    if !orthonormal {
        return Err(Error::NonOrthonormalFrame);
    }

    let q = ray.q;
    let basis = [
        OrbitTangent { dq: *v1, du: Vec3::zeros() },
        OrbitTangent { dq: *v2, du: Vec3::zeros() },
        OrbitTangent { dq: -u * q.dot(v1), du: *v1 },
        OrbitTangent { dq: -u * q.dot(v2), du: *v2 },
    ];
    let omega = Matrix4::from_fn(|i, j| symplectic_form(ray, &basis[i], &basis[j], inv));
    let inverse = omega.try_inverse().ok_or(Error::NonOrthonormalFrame)?;

    let dq1 = nalgebra::Vector4::from_fn(|i, _| v1.dot(&basis[i].dq));
    let dq2 = nalgebra::Vector4::from_fn(|i, _| v2.dot(&basis[i].dq));
    Ok(-(dq1.transpose() * inverse * dq2)[(0, 0)])
}
