//! Small-dimensional linear algebra on `GL_d(R)` and on projective space.
//!
//! Norms come from singular values: `‖g‖ = σ_max` and `‖g⁻¹‖ = 1/σ_min`, so
//! no inverse is ever formed. Directions are stored as unit vectors whose
//! first nonzero coordinate is positive.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 8;

/// Group elements whose smallest singular value falls below this are rejected.
pub const SINGULARITY_FLOOR: f64 = 1e-10;

/// An invertible `d × d` real matrix with cached norms.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    entries: DMatrix<f64>,
    op_norm: f64,
    inv_norm: f64,
}

impl GroupElement {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let d = entries.nrows();
        if d != entries.ncols() {
            return Err(Error::DimensionMismatch { expected: d, found: entries.ncols() });
        }
        check_dim(d)?;
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
        }
        let (smax, smin) = extreme_singular_values(&entries);
        if !(smin >= SINGULARITY_FLOOR) {
            return Err(Error::Singular { sigma_min: smin });
        }
        Ok(GroupElement { entries, op_norm: smax, inv_norm: 1.0 / smin })
    }

    /// Row-major constructor.
    pub fn from_row_slice(d: usize, data: &[f64]) -> Result<Self> {
        if data.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, found: data.len() });
        }
        Self::new(DMatrix::from_row_slice(d, d, data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        let mut data = Vec::with_capacity(d * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_slice(d, &data)
    }

    pub fn identity(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(GroupElement { entries: DMatrix::identity(d, d), op_norm: 1.0, inv_norm: 1.0 })
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Planar rotation by `angle` radians.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        GroupElement {
            entries: DMatrix::from_row_slice(2, 2, &[c, -s, s, c]),
            op_norm: 1.0,
            inv_norm: 1.0,
        }
    }

    /// Trusted constructor for callers that know the extreme singular values.
    pub(crate) fn from_parts(entries: DMatrix<f64>, op_norm: f64, inv_norm: f64) -> Self {
        GroupElement { entries, op_norm, inv_norm }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `‖g‖`.
    pub fn op_norm(&self) -> f64 {
        self.op_norm
    }

    /// `‖g⁻¹‖`.
    pub fn inv_norm(&self) -> f64 {
        self.inv_norm
    }

    /// `N(g) = max(‖g‖, ‖g⁻¹‖)`.
    pub fn n_value(&self) -> f64 {
        self.op_norm.max(self.inv_norm)
    }

    /// The product `self · rhs`.
    pub fn compose(&self, rhs: &GroupElement) -> Result<GroupElement> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: rhs.dim() });
        }
        GroupElement::new(&self.entries * &rhs.entries)
    }

    /// `c · g`; norms rescale exactly.
    pub fn scaled(&self, c: f64) -> Result<GroupElement> {
        let a = c.abs();
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidParameter(format!("scale factor {c}")));
        }
        let inv_norm = self.inv_norm / a;
        if 1.0 / inv_norm < SINGULARITY_FLOOR {
            return Err(Error::Singular { sigma_min: 1.0 / inv_norm });
        }
        Ok(GroupElement { entries: &self.entries * c, op_norm: self.op_norm * a, inv_norm })
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DIM {
        Err(Error::UnsupportedDimension(d))
    } else {
        Ok(())
    }
}

/// `(σ_max, σ_min)` of a square matrix.
pub fn extreme_singular_values(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 1 {
        let a = m[(0, 0)].abs();
        return (a, a);
    }
    let sv = m.singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    (smax, smin)
}

/// Operator norm (largest singular value) of an arbitrary square matrix.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    extreme_singular_values(m).0
}

/// `N(g)`.
pub fn n_of(g: &GroupElement) -> f64 {
    g.n_value()
}

/// A direction in `P(R^d)`, stored as its canonical unit representative.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjPoint {
    rep: DVector<f64>,
}

impl ProjPoint {
    pub fn new(v: DVector<f64>) -> Result<Self> {
        check_dim(v.len())?;
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroVector);
        }
        let mut rep = v / norm;
        canonicalize(rep.as_mut_slice());
        Ok(ProjPoint { rep })
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(v))
    }

    /// The direction of the `i`-th basis vector.
    pub fn basis(d: usize, i: usize) -> Result<Self> {
        check_dim(d)?;
        if i >= d {
            return Err(Error::InvalidParameter(format!("basis index {i} >= {d}")));
        }
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        Ok(ProjPoint { rep: v })
    }

    /// Direction `(cos θ, sin θ)` of the projective line at angle `θ`.
    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let mut rep = DVector::from_column_slice(&[c, s]);
        canonicalize(rep.as_mut_slice());
        ProjPoint { rep }
    }

    /// Angle in `[0, π)` of a planar direction.
    pub fn angle(&self) -> f64 {
        debug_assert_eq!(self.dim(), 2);
        line_angle(self.rep[0], self.rep[1])
    }

    pub(crate) fn from_unit_unchecked(mut rep: DVector<f64>) -> Self {
        canonicalize(rep.as_mut_slice());
        ProjPoint { rep }
    }

    pub fn rep(&self) -> &DVector<f64> {
        &self.rep
    }

    pub fn as_slice(&self) -> &[f64] {
        self.rep.as_slice()
    }

    pub fn dim(&self) -> usize {
        self.rep.len()
    }

    /// Unit representative of `other` lying in the same half-space as
    /// `self` (`⟨u, v⟩ ≥ 0`).
    pub fn same_sense_rep(&self, other: &ProjPoint) -> DVector<f64> {
        if self.rep.dot(&other.rep) < 0.0 {
            -other.rep.clone()
        } else {
            other.rep.clone()
        }
    }
}

/// Angle in `[0, π)` of the line through `(x, y)`.
pub fn line_angle(x: f64, y: f64) -> f64 {
    let a = y.atan2(x).rem_euclid(std::f64::consts::PI);
    if a >= std::f64::consts::PI { 0.0 } else { a }
}

pub(crate) fn canonicalize(v: &mut [f64]) {
    if let Some(first) = v.iter().copied().find(|x| *x != 0.0) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// `‖u ∧ v‖ / (‖u‖‖v‖)` for arbitrary nonzero vectors.
///
/// The wedge norm is summed from the `2 × 2` minors rather than from
/// `‖u‖²‖v‖² − ⟨u,v⟩²`, which cancels catastrophically for nearby
/// directions.
pub fn wedge_sine(u: &[f64], v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..u.len() {
        for j in (i + 1)..u.len() {
            let m = u[i] * v[j] - u[j] * v[i];
            acc += m * m;
        }
    }
    let nu: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (acc.sqrt() / (nu * nv)).clamp(0.0, 1.0)
}

/// Angular distance `d(ū, v̄)`: the sine of the angle between the lines.
pub fn angular_dist(u: &ProjPoint, v: &ProjPoint) -> f64 {
    wedge_sine(u.as_slice(), v.as_slice())
}

/// `g · v̄`.
pub fn act(g: &GroupElement, v: &ProjPoint) -> ProjPoint {
    let w = g.entries() * v.rep();
    let n = w.norm();
    ProjPoint::from_unit_unchecked(w / n)
}

/// Cocycle `ρ(g, v̄) = log(‖g v‖ / ‖v‖)`.
pub fn cocycle_rho(g: &GroupElement, v: &ProjPoint) -> f64 {
    (g.entries() * v.rep()).norm().ln()
}

/// Outcome of the four pointwise inequalities behind the Hölder estimates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzReport {
    /// `d(ū,v̄) ≤ ‖u−v‖ ≤ √2 d(ū,v̄)` for same-sense unit representatives.
    pub chord: bool,
    /// `|ρ(g,ū) − ρ(g,v̄)| ≤ √2 N(g)² d(ū,v̄)`.
    pub cocycle: bool,
    /// `d(g·ū, g·v̄) ≤ 2√2 N(g)² d(ū,v̄)`.
    pub action: bool,
    /// `d(g·ū, g′·ū) ≤ 2 N(g) ‖g − g′‖`.
    pub action_in_g: bool,
}

impl LipschitzReport {
    pub fn all_hold(&self) -> bool {
        self.chord && self.cocycle && self.action && self.action_in_g
    }
}

pub const LIPSCHITZ_TOL: f64 = 1e-9;

#[inline]
fn le_tol(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + LIPSCHITZ_TOL * (1.0 + rhs.abs())
}

pub fn check_pointwise_lipschitz(
    g: &GroupElement,
    g2: &GroupElement,
    u: &ProjPoint,
    v: &ProjPoint,
) -> LipschitzReport {
    let d_uv = angular_dist(u, v);
    let v_same = u.same_sense_rep(v);
    let chord = (u.rep() - &v_same).norm();
    let sqrt2 = std::f64::consts::SQRT_2;
    let n = g.n_value();

    let chord_ok = le_tol(d_uv, chord) && le_tol(chord, sqrt2 * d_uv);
    let drho = (cocycle_rho(g, u) - cocycle_rho(g, v)).abs();
    let cocycle_ok = le_tol(drho, sqrt2 * n * n * d_uv);
    let d_act = angular_dist(&act(g, u), &act(g, v));
    let action_ok = le_tol(d_act, 2.0 * sqrt2 * n * n * d_uv);
    let diff = operator_norm(&(g.entries() - g2.entries()));
    let d_act_g = angular_dist(&act(g, u), &act(g2, u));
    let action_g_ok = le_tol(d_act_g, 2.0 * n * diff);

    LipschitzReport { chord: chord_ok, cocycle: cocycle_ok, action: action_ok, action_in_g: action_g_ok }
}
