//! Refractive-index fields and the curvature of the Fermat metric `g = n²⟨·,·⟩`.
//!
//! Everything the spinoptics equations consume is derived from the 2-jet
//! `(n, ∇n, ∇²n)` of the index at a point: the velocity `v = 1/n` with its
//! gradient `g = ∇v` and Hessian `∇g`, the Christoffel symbols, the Ricci
//! tensor, the scalar curvature and the operator `R(Ω)`.

mod grid;

pub use grid::GridField;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{cross_operator, to_array, Mat3, Vec3};

const INDEX_FLOOR: f64 = 1e-9;

/// Value, gradient and Hessian of the index at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexJet {
    pub n: f64,
    pub grad: Vec3,
    pub hess: Mat3,
}

/// A refractive-index field `n(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum IndexField {
    Constant {
        n0: f64,
    },
    /// `n(x) = n0 + ⟨gradient, x⟩`.
    LinearGradient {
        n0: f64,
        gradient: Vec3,
    },
    /// `n(x) = n0 + amplitude · exp(−‖x − center‖² / (2 width²))`.
    GaussianBump {
        n0: f64,
        amplitude: f64,
        center: Vec3,
        width: f64,
    },
    GridSampled(GridField),
}

impl IndexField {
    /// Homogeneous medium. Negative values describe left-handed media and are
    /// only meaningful as interface-side constants.
    pub fn constant(n0: f64) -> Result<Self> {
        if !n0.is_finite() || n0.abs() < INDEX_FLOOR {
            return Err(Error::InvalidField(format!("constant index must be finite and nonzero, got {n0}")));
        }
        Ok(IndexField::Constant { n0 })
    }

    pub fn linear(n0: f64, gradient: Vec3) -> Result<Self> {
        if !n0.is_finite() || !gradient.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidField("linear gradient parameters must be finite".into()));
        }
        Ok(IndexField::LinearGradient { n0, gradient })
    }

    pub fn gaussian(n0: f64, amplitude: f64, center: Vec3, width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidField(format!("bump width must be positive, got {width}")));
        }
        if !n0.is_finite() || !amplitude.is_finite() || !center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidField("gaussian bump parameters must be finite".into()));
        }
        Ok(IndexField::GaussianBump { n0, amplitude, center, width })
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, IndexField::Constant { .. })
    }

    /// Index, gradient and Hessian at `x`.
    pub fn jet(&self, x: &Vec3) -> Result<IndexJet> {
        let jet = match self {
            IndexField::Constant { n0 } => {
                return Ok(IndexJet { n: *n0, grad: Vec3::zeros(), hess: Mat3::zeros() });
            }
            IndexField::LinearGradient { n0, gradient } => {
                IndexJet { n: n0 + gradient.dot(x), grad: *gradient, hess: Mat3::zeros() }
            }
            IndexField::GaussianBump { n0, amplitude, center, width } => {
                let r = x - center;
                let w2 = width * width;
                let bump = amplitude * (-r.norm_squared() / (2.0 * w2)).exp();
                IndexJet {
                    n: n0 + bump,
                    grad: -r * (bump / w2),
                    hess: (r * r.transpose() / (w2 * w2) - Mat3::identity() / w2) * bump,
                }
            }
            IndexField::GridSampled(grid) => grid.jet(x)?,
        };
        if !(jet.n.is_finite() && jet.n >= INDEX_FLOOR) {
            return Err(Error::VanishingIndex { index: jet.n, at: to_array(x) });
        }
        Ok(jet)
    }

    pub fn index(&self, x: &Vec3) -> Result<f64> {
        self.jet(x).map(|j| j.n)
    }
}

/// The velocity `v = 1/n`, its gradient `g` and the symmetric Hessian `∇g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VelocityData {
    pub v: f64,
    pub g: Vec3,
    pub dg: Mat3,
}

impl VelocityData {
    pub fn from_jet(jet: &IndexJet) -> Self {
        let n = jet.n;
        let n2 = n * n;
        VelocityData {
            v: 1.0 / n,
            g: -jet.grad / n2,
            dg: -jet.hess / n2 + jet.grad * jet.grad.transpose() * (2.0 / (n2 * n)),
        }
    }

    /// `div g = Tr(∇g) = Δv`.
    pub fn div_g(&self) -> f64 {
        self.dg.trace()
    }
}

pub fn velocity_data(field: &IndexField, x: &Vec3) -> Result<VelocityData> {
    Ok(VelocityData::from_jet(&field.jet(x)?))
}

/// Christoffel symbols `Γᵏᵢⱼ`, stored as `[k][i][j]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Christoffel(pub [[[f64; 3]; 3]; 3]);

impl Christoffel {
    pub fn from_jet(jet: &IndexJet) -> Self {
        let dn = jet.grad;
        let inv_n = 1.0 / jet.n;
        let mut gamma = [[[0.0; 3]; 3]; 3];
        for (k, gk) in gamma.iter_mut().enumerate() {
            for (i, gki) in gk.iter_mut().enumerate() {
                for (j, gkij) in gki.iter_mut().enumerate() {
                    let mut value = 0.0;
                    if j == k {
                        value += dn[i];
                    }
                    if i == k {
                        value += dn[j];
                    }
                    if i == j {
                        value -= dn[k];
                    }
                    *gkij = value * inv_n;
                }
            }
        }
        Christoffel(gamma)
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.0[k][i][j]
    }

    /// `Γᵏᵢⱼ aⁱ bʲ`.
    pub fn contract(&self, a: &Vec3, b: &Vec3) -> Vec3 {
        Vec3::from_fn(|k, _| {
            let mut sum = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    sum += self.0[k][i][j] * a[i] * b[j];
                }
            }
            sum
        })
    }
}

/// Metric, connection and curvature of the Fermat metric at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureData {
    pub metric: Mat3,
    pub gamma: Christoffel,
    /// Covariant Ricci tensor `R_ij`.
    pub ricci: Mat3,
    pub scalar: f64,
    /// Flat Laplacian `Δn`.
    pub laplacian: f64,
}

impl CurvatureData {
    pub fn from_jet(jet: &IndexJet) -> Self {
        let n = jet.n;
        let dn = jet.grad;
        let laplacian = jet.hess.trace();
        let ricci = dn * dn.transpose() * (2.0 / (n * n)) - jet.hess / n - Mat3::identity() * (laplacian / n);
        let scalar = 2.0 * dn.norm_squared() / n.powi(4) - 4.0 * laplacian / n.powi(3);
        CurvatureData {
            metric: Mat3::identity() * (n * n),
            gamma: Christoffel::from_jet(jet),
            ricci,
            scalar,
            laplacian,
        }
    }

    /// Mixed Ricci tensor `Rⁱⱼ = gⁱᵏ R_kj` as an operator on `T_x M`.
    pub fn ricci_operator(&self) -> Mat3 {
        self.ricci / self.metric[(0, 0)]
    }

    /// `R(Ω) = −2(Ric Ω + Ω Ric) + R Ω` for `Ω = j(U)`.
    pub fn r_omega(&self, unit: &Vec3) -> Mat3 {
        let omega = self.omega(unit);
        let ric = self.ricci_operator();
        (ric * omega + omega * ric) * -2.0 + omega * self.scalar
    }

    /// The g-cross-product operator `j(U)`; equals the Euclidean `u × ·` for `u = nU`.
    pub fn omega(&self, unit: &Vec3) -> Mat3 {
        cross_operator(&(unit * self.metric[(0, 0)].sqrt()))
    }

    /// `Ein(U, U) = Ric(U, U) − ½ R g(U, U)`.
    pub fn einstein(&self, a: &Vec3, b: &Vec3) -> f64 {
        (a.transpose() * (self.ricci - self.metric * (0.5 * self.scalar)) * b)[(0, 0)]
    }
}

pub fn curvature(field: &IndexField, x: &Vec3) -> Result<CurvatureData> {
    Ok(CurvatureData::from_jet(&field.jet(x)?))
}

pub fn christoffel(field: &IndexField, x: &Vec3) -> Result<Christoffel> {
    Ok(Christoffel::from_jet(&field.jet(x)?))
}

/// Ricci tensor and scalar curvature.
pub fn ricci_scalar(field: &IndexField, x: &Vec3) -> Result<(Mat3, f64)> {
    let c = curvature(field, x)?;
    Ok((c.ricci, c.scalar))
}

/// The g-skew operator `R(Ω)` at `x` for the g-unit direction `U`.
pub fn r_omega(field: &IndexField, x: &Vec3, unit: &Vec3) -> Result<Mat3> {
    Ok(curvature(field, x)?.r_omega(unit))
}

/// `Ein(U, U)` for a g-unit `U`.
pub fn einstein_uu(field: &IndexField, x: &Vec3, unit: &Vec3) -> Result<f64> {
    let c = curvature(field, x)?;
    let norm = (unit.transpose() * c.metric * unit)[(0, 0)];
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NotMetricUnit(norm));
    }
    Ok(c.einstein(unit, unit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    fn lin_z() -> IndexField {
        IndexField::linear(1.0, v(0.0, 0.0, 1.0)).unwrap()
    }

    fn bump() -> IndexField {
        IndexField::gaussian(1.3, 0.4, v(0.1, 0.2, -0.1), 0.7).unwrap()
    }

    #[test]
    fn constructors_validate() {
        assert!(IndexField::constant(0.0).is_err());
        assert!(IndexField::constant(-1.5).is_ok());
        assert!(IndexField::gaussian(1.0, 0.1, Vec3::zeros(), 0.0).is_err());
        assert!(IndexField::linear(f64::INFINITY, Vec3::zeros()).is_err());
        let f = IndexField::linear(1.0, v(0.0, 0.0, 1.0)).unwrap();
        assert!(matches!(f.jet(&v(0.0, 0.0, -2.0)), Err(Error::VanishingIndex { .. })));
    }

    #[test]
    fn velocity_examples() {
        let c = velocity_data(&IndexField::constant(2.0).unwrap(), &v(3.0, -1.0, 7.0)).unwrap();
        assert_eq!(c.v, 0.5);
        assert_eq!(c.g, Vec3::zeros());
        assert_eq!(c.dg, Mat3::zeros());

        let f = lin_z();
        let d = velocity_data(&f, &Vec3::zeros()).unwrap();
        assert_eq!(d.v, 1.0);
        // central differences of 1/n
        let h = 1e-5;
        let fd = Vec3::from_fn(|i, _| {
            let mut e = Vec3::zeros();
            e[i] = h;
            (1.0 / f.index(&e).unwrap() - 1.0 / f.index(&-e).unwrap()) / (2.0 * h)
        });
        assert!((d.g - fd).norm() < 1e-8);
        assert!((d.g - v(0.0, 0.0, -1.0)).norm() < 1e-15);

        let b = IndexField::gaussian(1.0, 0.5, v(1.0, 2.0, 3.0), 0.3).unwrap();
        assert_eq!(velocity_data(&b, &v(1.0, 2.0, 3.0)).unwrap().g.norm(), 0.0);
    }

    #[test]
    fn christoffel_examples() {
        let flat = christoffel(&IndexField::constant(1.7).unwrap(), &v(1.0, 1.0, 1.0)).unwrap();
        assert!(flat.0.iter().flatten().flatten().all(|&g| g == 0.0));

        let g = christoffel(&lin_z(), &Vec3::zeros()).unwrap();
        assert_eq!(g.get(2, 0, 0), -1.0);
        assert_eq!(g.get(0, 0, 2), 1.0);
        assert_eq!(g.get(2, 2, 2), 1.0);
    }

    #[test]
    fn ricci_examples() {
        let (ric, r) = ricci_scalar(&IndexField::constant(1.2).unwrap(), &Vec3::zeros()).unwrap();
        assert_eq!(ric, Mat3::zeros());
        assert_eq!(r, 0.0);

        let (ric, r) = ricci_scalar(&lin_z(), &Vec3::zeros()).unwrap();
        let mut expected = Mat3::zeros();
        expected[(2, 2)] = 2.0;
        assert!((ric - expected).norm() < 1e-15);
        assert!((r - 2.0).abs() < 1e-15);
    }

    #[test]
    fn einstein_examples() {
        let flat = IndexField::constant(2.0).unwrap();
        assert_eq!(einstein_uu(&flat, &Vec3::zeros(), &v(0.5, 0.0, 0.0)).unwrap(), 0.0);
        assert!(matches!(einstein_uu(&flat, &Vec3::zeros(), &v(1.0, 0.0, 0.0)), Err(Error::NotMetricUnit(_))));
        let e = einstein_uu(&lin_z(), &Vec3::zeros(), &v(0.0, 0.0, 1.0)).unwrap();
        assert!((e - 1.0).abs() < 1e-15);
    }

    #[test]
    fn flat_r_omega_vanishes() {
        let m = r_omega(&IndexField::constant(1.5).unwrap(), &Vec3::zeros(), &v(0.0, 0.4, 0.0)).unwrap();
        assert_eq!(m, Mat3::zeros());
    }

    fn point() -> impl Strategy<Value = Vec3> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| v(x, y, z))
    }

    fn g_unit_at(field: &IndexField, x: &Vec3, dir: &Vec3) -> Vec3 {
        dir.normalize() / field.index(x).unwrap()
    }

    proptest! {
        #[test]
        fn symmetry_and_trace_identity(x in point(), d in point(), use_bump in any::<bool>()) {
            prop_assume!(d.norm() > 0.1);
            let field = if use_bump { bump() } else { IndexField::linear(1.5, v(0.1, -0.3, 0.2)).unwrap() };
            let c = curvature(&field, &x).unwrap();
            for k in 0..3 { for i in 0..3 { for j in 0..3 {
                prop_assert_eq!(c.gamma.get(k, i, j), c.gamma.get(k, j, i));
            }}}
            prop_assert!((c.ricci - c.ricci.transpose()).norm() <= 1e-12 * (1.0 + c.ricci.norm()));
            // R = R_ij g^ij
            let traced = (c.ricci * c.metric.try_inverse().unwrap()).trace();
            prop_assert!((traced - c.scalar).abs() <= 1e-12 * (1.0 + c.scalar.abs()));

            let unit = g_unit_at(&field, &x, &d);
            let rom = c.r_omega(&unit);
            // g-skew: g(a, R b) = −g(b, R a)
            let (a, b) = (v(0.3, -0.2, 0.9), v(-1.0, 0.5, 0.1));
            let gab = (a.transpose() * c.metric * rom * b)[(0, 0)];
            let gba = (b.transpose() * c.metric * rom * a)[(0, 0)];
            prop_assert!((gab + gba).abs() <= 1e-12 * (1.0 + gab.abs()));
            let lhs = -(rom * c.omega(&unit)).trace() / 4.0;
            let ein = einstein_uu(&field, &x, &unit).unwrap();
            prop_assert!((lhs - ein).abs() <= 1e-9 * (1.0 + ein.abs()));
        }

        #[test]
        fn analytic_derivatives_match_differences(x in point(), use_bump in any::<bool>()) {
            let field = if use_bump { bump() } else { IndexField::linear(1.5, v(0.1, -0.3, 0.2)).unwrap() };
            let jet = field.jet(&x).unwrap();
            let h = 1e-5;
            for i in 0..3 {
                let mut e = Vec3::zeros();
                e[i] = h;
                let fd = (field.index(&(x + e)).unwrap() - field.index(&(x - e)).unwrap()) / (2.0 * h);
                prop_assert!((fd - jet.grad[i]).abs() <= 1e-6 * (1.0 + jet.grad.norm()));
                let fd_row = (field.jet(&(x + e)).unwrap().grad - field.jet(&(x - e)).unwrap().grad) / (2.0 * h);
                for j in 0..3 {
                    prop_assert!((fd_row[j] - jet.hess[(i, j)]).abs() <= 1e-6 * (1.0 + jet.hess.norm()));
                }
            }
            prop_assert!((jet.hess - jet.hess.transpose()).norm() <= 1e-10 * (1.0 + jet.hess.norm()));
            let vd = VelocityData::from_jet(&jet);
            prop_assert_eq!(vd.v, 1.0 / jet.n);
            prop_assert!((vd.dg - vd.dg.transpose()).norm() <= 1e-10 * (1.0 + vd.dg.norm()));
        }
    }
}
