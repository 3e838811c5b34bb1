use std::fmt::Write as _;

use super::IndexJet;
use crate::error::{Error, Result};
use crate::linalg::{to_array, Mat3, Vec3};

/// Index sampled on an axis-aligned grid.
///
/// `n` is trilinearly interpolated. Gradients and Hessians are second-order
/// central differences at the nodes, trilinearly interpolated in turn, so
/// only cells whose eight corners are interior nodes can be queried. The
/// interpolant is C⁰ across cells; spin-dependent runs on grids inherit that
/// accuracy limit.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    dims: [usize; 3],
    origin: Vec3,
    spacing: Vec3,
    values: Vec<f64>,
    grads: Vec<Vec3>,
    hessians: Vec<Mat3>,
}

impl GridField {
    /// `values` are in x-fastest order.
    pub fn new(dims: [usize; 3], origin: Vec3, spacing: Vec3, values: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&d| d < 4) {
            return Err(Error::InvalidField(format!("grid needs at least 4 nodes per axis, got {dims:?}")));
        }
        if !spacing.iter().all(|&h| h.is_finite() && h > 0.0) || !origin.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidField("grid spacing must be positive and origin finite".into()));
        }
        let count = dims[0] * dims[1] * dims[2];
        if values.len() != count {
            return Err(Error::InvalidField(format!("expected {count} grid values, got {}", values.len())));
        }
        if let Some(bad) = values.iter().find(|n| !(n.is_finite() && **n >= 1e-9)) {
            return Err(Error::InvalidField(format!("grid index values must be positive, found {bad}")));
        }
        let mut grid = GridField {
            dims,
            origin,
            spacing,
            values,
            grads: vec![Vec3::zeros(); count],
            hessians: vec![Mat3::zeros(); count],
        };
        grid.differentiate();
        Ok(grid)
    }

    /// Sample an arbitrary function at the grid nodes.
    pub fn sample(dims: [usize; 3], origin: Vec3, spacing: Vec3, f: impl Fn(&Vec3) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    values.push(f(&node_position(&origin, &spacing, [i, j, k])));
                }
            }
        }
        Self::new(dims, origin, spacing, values)
    }

    /// Parse `grid nx ny nz x0 y0 z0 dx dy dz` followed by the node values.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        match tokens.next() {
            Some("grid") => {}
            other => return Err(Error::GridFormat(format!("expected header keyword `grid`, found {other:?}"))),
        }
        let mut header = [0.0f64; 9];
        for (slot, name) in header.iter_mut().zip(["nx", "ny", "nz", "x0", "y0", "z0", "dx", "dy", "dz"]) {
            let tok = tokens.next().ok_or_else(|| Error::GridFormat(format!("missing header field {name}")))?;
            *slot = tok.parse().map_err(|_| Error::GridFormat(format!("header field {name}: cannot parse {tok:?}")))?;
        }
        let mut dims = [0usize; 3];
        for (d, &h) in dims.iter_mut().zip(&header[..3]) {
            if h.fract() != 0.0 || h < 0.0 {
                return Err(Error::GridFormat(format!("grid dimension {h} is not a non-negative integer")));
            }
            *d = h as usize;
        }
        let values = tokens
            .enumerate()
            .map(|(i, tok)| {
                tok.parse::<f64>().map_err(|_| Error::GridFormat(format!("value #{i}: cannot parse {tok:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let origin = Vec3::new(header[3], header[4], header[5]);
        let spacing = Vec3::new(header[6], header[7], header[8]);
        Self::new(dims, origin, spacing, values).map_err(|e| match e {
            Error::InvalidField(msg) => Error::GridFormat(msg),
            other => other,
        })
    }

    /// Text form accepted by [`GridField::parse`]; one x-row per line.
    pub fn to_text(&self) -> String {
        let [nx, ny, nz] = self.dims;
        let (o, h) = (self.origin, self.spacing);
        let mut out = format!("grid {nx} {ny} {nz} {} {} {} {} {} {}\n", o.x, o.y, o.z, h.x, h.y, h.z);
        for row in self.values.chunks(nx) {
            let line: Vec<String> = row.iter().map(|n| format!("{n:?}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn spacing(&self) -> Vec3 {
        self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Lower and upper corners of the queryable region.
    pub fn domain(&self) -> (Vec3, Vec3) {
        let lo = self.origin + self.spacing;
        let hi = Vec3::from_fn(|a, _| self.origin[a] + self.spacing[a] * (self.dims[a] - 2) as f64);
        (lo, hi)
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        let (lo, hi) = self.domain();
        (0..3).all(|a| x[a] >= lo[a] && x[a] <= hi[a])
    }

    fn flat(&self, [i, j, k]: [usize; 3]) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    fn differentiate(&mut self) {
        let [nx, ny, nz] = self.dims;
        let h = self.spacing;
        for k in 1..nz - 1 {
            for j in 1..ny - 1 {
                for i in 1..nx - 1 {
                    let at = |di: isize, dj: isize, dk: isize| {
                        let idx = [(i as isize + di) as usize, (j as isize + dj) as usize, (k as isize + dk) as usize];
                        self.values[self.flat(idx)]
                    };
                    let step = |axis: usize, s: isize| -> (isize, isize, isize) {
                        match axis {
                            0 => (s, 0, 0),
                            1 => (0, s, 0),
                            _ => (0, 0, s),
                        }
                    };
                    let centre = at(0, 0, 0);
                    let mut grad = Vec3::zeros();
                    let mut hess = Mat3::zeros();
                    for a in 0..3 {
                        let (pi, pj, pk) = step(a, 1);
                        let (mi, mj, mk) = step(a, -1);
                        let plus = at(pi, pj, pk);
                        let minus = at(mi, mj, mk);
                        grad[a] = (plus - minus) / (2.0 * h[a]);
                        hess[(a, a)] = (plus - 2.0 * centre + minus) / (h[a] * h[a]);
                        for b in a + 1..3 {
                            let (ai, aj, ak) = step(a, 1);
                            let (bi, bj, bk) = step(b, 1);
                            let pp = at(ai + bi, aj + bj, ak + bk);
                            let pm = at(ai - bi, aj - bj, ak - bk);
                            let mp = at(-ai + bi, -aj + bj, -ak + bk);
                            let mm = at(-ai - bi, -aj - bj, -ak - bk);
                            let mixed = (pp - pm - mp + mm) / (4.0 * h[a] * h[b]);
                            hess[(a, b)] = mixed;
                            hess[(b, a)] = mixed;
                        }
                    }
                    let idx = self.flat([i, j, k]);
                    self.grads[idx] = grad;
                    self.hessians[idx] = hess;
                }
            }
        }
    }

    pub(super) fn jet(&self, x: &Vec3) -> Result<IndexJet> {
        if !self.contains(x) {
            return Err(Error::OutOfDomain(to_array(x)));
        }
        let mut cell = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let s = (x[a] - self.origin[a]) / self.spacing[a];
            let i = (s.floor() as usize).clamp(1, self.dims[a] - 3);
            cell[a] = i;
            frac[a] = s - i as f64;
        }
        let mut jet = IndexJet { n: 0.0, grad: Vec3::zeros(), hess: Mat3::zeros() };
        for corner in 0..8usize {
            let offs = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
            let weight: f64 = (0..3).map(|a| if offs[a] == 1 { frac[a] } else { 1.0 - frac[a] }).product();
            let idx = self.flat([cell[0] + offs[0], cell[1] + offs[1], cell[2] + offs[2]]);
            jet.n += weight * self.values[idx];
            jet.grad += self.grads[idx] * weight;
            jet.hess += self.hessians[idx] * weight;
        }
        Ok(jet)
    }
}

fn node_position(origin: &Vec3, spacing: &Vec3, [i, j, k]: [usize; 3]) -> Vec3 {
    origin + Vec3::new(spacing.x * i as f64, spacing.y * j as f64, spacing.z * k as f64)
}
