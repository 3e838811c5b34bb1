use super::{KernelDirection, MetricState, Model, PhotonState};
use crate::error::{Error, Result};
use crate::fermat::{CurvatureData, IndexField, IndexJet, VelocityData};
use crate::linalg::{inverse_one_plus_cross, orthogonal_unit, Vec3};
use crate::orbits::OrbitInvariants;

const DEGENERATE_DX: f64 = 1e-12;

fn gauge(dx: Vec3, du: Vec3, model: Model) -> Result<KernelDirection> {
    let norm = dx.norm();
    if !(norm.is_finite() && norm >= DEGENERATE_DX) {
        return Err(Error::DegenerateKernel { arc: 0.0 });
    }
    Ok(KernelDirection { dx: dx / norm, du: du / norm, model })
}

/// Spin-dependent momentum `p̂ = n(p u + s g × u)`.
pub fn momentum_hat(state: &PhotonState, inv: &OrbitInvariants, field: &IndexField) -> Result<Vec3> {
    let jet = field.jet(&state.x)?;
    Ok(momentum_hat_from(&jet, &VelocityData::from_jet(&jet), state, inv))
}

fn momentum_hat_from(jet: &IndexJet, vel: &VelocityData, state: &PhotonState, inv: &OrbitInvariants) -> Vec3 {
    (state.u * inv.color() + vel.g.cross(&state.u) * inv.spin()) * jet.n
}

/// Derivative of `p̂(x, u)` along `(δx, δu)`.
pub fn momentum_hat_differential(
    state: &PhotonState,
    inv: &OrbitInvariants,
    field: &IndexField,
    dx: &Vec3,
    du: &Vec3,
) -> Result<Vec3> {
    let jet = field.jet(&state.x)?;
    Ok(differential_from(&jet, &VelocityData::from_jet(&jet), state, inv, dx, du))
}

fn differential_from(
    jet: &IndexJet,
    vel: &VelocityData,
    state: &PhotonState,
    inv: &OrbitInvariants,
    dx: &Vec3,
    du: &Vec3,
) -> Vec3 {
    let (p, s, u) = (inv.color(), inv.spin(), state.u);
    let inner = u * p + vel.g.cross(&u) * s;
    let varied = du * p + (vel.dg * dx).cross(&u) * s + vel.g.cross(du) * s;
    inner * jet.grad.dot(dx) + varied * jet.n
}

/// The presymplectic 2-form `σ` of Fermat spinoptics on `ST ℝ³`.
pub fn presymplectic_form(
    state: &PhotonState,
    inv: &OrbitInvariants,
    field: &IndexField,
    a: (&Vec3, &Vec3),
    b: (&Vec3, &Vec3),
) -> Result<f64> {
    let jet = field.jet(&state.x)?;
    let vel = VelocityData::from_jet(&jet);
    let dpa = differential_from(&jet, &vel, state, inv, a.0, a.1);
    let dpb = differential_from(&jet, &vel, state, inv, b.0, b.1);
    Ok(dpa.dot(b.0) - dpb.dot(a.0) - inv.spin() * state.u.dot(&a.1.cross(b.1)))
}

/// Fermat's equations: `δ(n u) = α ∇n`, `δx = α u`.
pub fn direction_spinless(state: &PhotonState, field: &IndexField) -> Result<KernelDirection> {
    let jet = field.jet(&state.x)?;
    Ok(spinless_from(&jet, state))
}

fn spinless_from(jet: &IndexJet, state: &PhotonState) -> KernelDirection {
    let u = state.u;
    let du = (jet.grad - u * u.dot(&jet.grad)) / jet.n;
    KernelDirection { dx: u, du, model: Model::SpinlessFermat }
}

/// Exact kernel of `σ`:
///
/// ```text
/// δx ∝ a u + (v s²/p²) (∇g) u,    a = 1 + (s²/p²)‖g‖² − (v s²/p²) div g
/// s δu = (p/v) u × (1 − (s/p) j(g)) δx
/// ```
///
/// `δu` is evaluated from the expanded form `(s/p) u × (∇g u) − n u × (g × δx)`,
/// which needs no division by `s`.
pub fn direction_full_spin(state: &PhotonState, inv: &OrbitInvariants, field: &IndexField) -> Result<KernelDirection> {
    let jet = field.jet(&state.x)?;
    if inv.spin() == 0.0 {
        let mut dir = spinless_from(&jet, state);
        dir.model = Model::FullSpin;
        return Ok(dir);
    }
    let vel = VelocityData::from_jet(&jet);
    let (p, s, u) = (inv.color(), inv.spin(), state.u);
    let ratio2 = s * s / (p * p);
    let a = 1.0 + ratio2 * vel.g.norm_squared() - vel.v * ratio2 * vel.div_g();
    let hess_u = vel.dg * u;
    let dx = u * a + hess_u * (vel.v * ratio2);
    let du = u.cross(&hess_u) * (s / p) - u.cross(&vel.g.cross(&dx)) * jet.n;
    gauge(dx, du, Model::FullSpin)
}

/// Linearized equations in the natural variables:
///
/// ```text
/// δp̂ = −(1/v) ⟨p̂, δx⟩ g,    δx = p̂ − (s/p) g × p̂
/// ```
///
/// `δu` is recovered through the exact chart `p̂(x, u)` and projected onto `u⊥`.
pub fn direction_linearized(state: &PhotonState, inv: &OrbitInvariants, field: &IndexField) -> Result<KernelDirection> {
    let jet = field.jet(&state.x)?;
    let vel = VelocityData::from_jet(&jet);
    let (p, s, u) = (inv.color(), inv.spin(), state.u);
    let phat = momentum_hat_from(&jet, &vel, state, inv);
    let dx = phat - vel.g.cross(&phat) * (s / p);
    let dphat = -vel.g * (jet.n * phat.dot(&dx));

    // (δp̂) = (∇n·δx)(p u + s g×u) + n p (1 + (s/p) j(g)) δu + n s (∇g δx) × u
    let rhs = (dphat - (u * p + vel.g.cross(&u) * s) * jet.grad.dot(&dx) - (vel.dg * dx).cross(&u) * (jet.n * s))
        / (jet.n * p);
    let du = inverse_one_plus_cross(&(vel.g * (s / p))) * rhs;
    let du = du - u * u.dot(&du);
    gauge(dx, du, Model::LinearizedOmn)
}

/// General spinoptics system on `(M, g)`:
///
/// ```text
/// p δ∇U = −½ s R(Ω) δX,    δX ∝ U + s² Ω R(Ω) U / (2[p² + s² Ein(U,U)])
/// ```
///
/// converted to Euclidean `(δx, δu)` through `u = nU` and
/// `δUᵏ = δ∇Uᵏ − Γᵏᵢⱼ δXⁱ Uʲ`.
pub fn direction_general_metric(
    mstate: &MetricState,
    inv: &OrbitInvariants,
    field: &IndexField,
) -> Result<KernelDirection> {
    let jet = field.jet(&mstate.x)?;
    let curv = CurvatureData::from_jet(&jet);
    let (p, s, unit) = (inv.color(), inv.spin(), mstate.unit);

    let denom = p * p + s * s * curv.einstein(&unit, &unit);
    if denom.abs() <= 1e-9 * p * p {
        return Err(Error::SpinCurvatureSingularity { arc: 0.0 });
    }
    let omega = curv.omega(&unit);
    let rom = curv.r_omega(&unit);
    // Scaled by the denominator so the orientation stays continuous through
    // p² + s² Ein < 0, matching the full-spin field.
    let dxm = unit * denom + omega * rom * unit * (s * s / 2.0);
    let cov_du = rom * dxm * (-s / (2.0 * p));
    let d_unit = cov_du - curv.gamma.contract(&dxm, &unit);
    let du = unit * jet.grad.dot(&dxm) + d_unit * jet.n;
    gauge(dxm, du, Model::GeneralMetric)
}

/// Dispatch on the model tag.
pub fn direction(
    state: &PhotonState,
    inv: &OrbitInvariants,
    field: &IndexField,
    model: Model,
) -> Result<KernelDirection> {
    match model {
        Model::SpinlessFermat => direction_spinless(state, field),
        Model::FullSpin => direction_full_spin(state, inv, field),
        Model::LinearizedOmn => direction_linearized(state, inv, field),
        Model::GeneralMetric => direction_general_metric(&MetricState::from_photon(state, field)?, inv, field),
    }
}

/// `max |σ(dir, e)|` over a basis `e` of `T(ST ℝ³)` at `state`.
///
/// The basis is the three unit position displacements and two unit direction
/// displacements spanning `u⊥`. The residual vanishes exactly on the kernel;
/// its natural scale is `p n`.
pub fn kernel_residual(
    state: &PhotonState,
    dir: &KernelDirection,
    inv: &OrbitInvariants,
    field: &IndexField,
) -> Result<f64> {
    let w1 = orthogonal_unit(&state.u);
    let w2 = state.u.cross(&w1);
    let zero = Vec3::zeros();
    let basis = [(Vec3::x(), zero), (Vec3::y(), zero), (Vec3::z(), zero), (zero, w1), (zero, w2)];
    let mut worst = 0.0f64;
    for (ex, eu) in &basis {
        let value = presymplectic_form(state, inv, field, (&dir.dx, &dir.du), (ex, eu))?;
        worst = worst.max(value.abs());
    }
    Ok(worst)
}
