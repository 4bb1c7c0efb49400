//! Discretized reduced transfer operator on `P(R²)` (or the scalar
//! characteristic function when `d = 1`).
//!
//! Nodes are `θ_j = jπ/m`. A point `g·θ_j` is spread over its two
//! neighbouring nodes by periodic linear interpolation, so at `t = 0` every
//! row is a probability vector.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{act, cocycle_rho, line_angle, ProjPoint};
use crate::law::{LawSpec, MatrixLaw, ScalarLaw};

/// Largest grid handled by the dense eigensolver.
pub const MAX_DENSE: usize = 1024;

/// Cell index `j` and offset `frac ∈ [0, 1)` of an angle on the grid of
/// `m` nodes over `[0, π)`.
pub fn locate(angle: f64, m: usize) -> (usize, f64) {
    let h = std::f64::consts::PI / m as f64;
    let x = angle.rem_euclid(std::f64::consts::PI) / h;
    let j = x.floor();
    let frac = (x - j).clamp(0.0, 1.0);
    ((j as usize) % m, frac)
}

/// `m` equispaced nodes on `[0, π)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircleGrid {
    pub m: usize,
}

impl CircleGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 || m > MAX_DENSE {
            return Err(Error::InvalidParameter(format!("grid size must be in 1..={MAX_DENSE}")));
        }
        Ok(CircleGrid { m })
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * std::f64::consts::PI / self.m as f64
    }

    /// Interpolation weights `(j, w_j), (j+1, w_{j+1})` of an angle.
    pub fn weights(&self, angle: f64) -> [(usize, f64); 2] {
        let (j, frac) = locate(angle, self.m);
        [(j, 1.0 - frac), ((j + 1) % self.m, frac)]
    }
}

/// `Q̂_t[j, k] = Σ_g p_g e^{itρ(g, θ_j)} w_k(g·θ_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedOperator {
    pub m: usize,
    pub t: f64,
    pub matrix: DMatrix<Complex<f64>>,
}

/// Build the reduced operator of a finite-support planar law, or the `1×1`
/// characteristic-function operator of a one-dimensional law.
pub fn assemble(law: &MatrixLaw, m: usize, t: f64) -> Result<ReducedOperator> {
    match law.dim() {
        1 => {
            let phi = characteristic_1d(law, t)?;
            Ok(ReducedOperator { m: 1, t, matrix: DMatrix::from_element(1, 1, phi) })
        }
        2 => {
            let atoms = law
                .atoms()
                .ok_or_else(|| Error::Unsupported("grid operator needs a finite-support law".into()))?;
            let grid = CircleGrid::new(m)?;
            let mut q = DMatrix::from_element(m, m, Complex::new(0.0, 0.0));
            for j in 0..m {
                let v = ProjPoint::from_angle(grid.node(j));
                for (g, p) in &atoms {
                    let w = act(g, &v);
                    let phase = Complex::from_polar(*p, t * cocycle_rho(g, &v));
                    let a = line_angle(w.as_slice()[0], w.as_slice()[1]);
                    for (k, wk) in grid.weights(a) {
                        q[(j, k)] += phase * wk;
                    }
                }
            }
            Ok(ReducedOperator { m, t, matrix: q })
        }
        d => Err(Error::Unsupported(format!("grid operators exist for d <= 2, got d = {d}"))),
    }
}

/// `E e^{itρ}` for a one-dimensional law, in closed form.
pub fn characteristic_1d(law: &MatrixLaw, t: f64) -> Result<Complex<f64>> {
    let shift = law.shift();
    let cf = |s: &ScalarLaw| -> Complex<f64> {
        match s {
            ScalarLaw::Fixed { value } => Complex::from_polar(1.0, t * value),
            ScalarLaw::Discrete { values, probs } => {
                values.iter().zip(probs).map(|(v, p)| Complex::from_polar(*p, t * v)).sum()
            }
            ScalarLaw::Normal { mean, sd } => Complex::from_polar((-0.5 * t * t * sd * sd).exp(), t * mean),
            ScalarLaw::Uniform { lo, hi } => {
                let half = 0.5 * (hi - lo) * t;
                let sinc = if half == 0.0 { 1.0 } else { half.sin() / half };
                Complex::from_polar(sinc, 0.5 * t * (lo + hi))
            }
        }
    };
    let base = match law.spec() {
        LawSpec::Gl1Scalar { log_abs, .. } => cf(log_abs),
        LawSpec::RotationDiagonal { log_singular_values, .. } => cf(&log_singular_values[0]),
        LawSpec::FiniteSupport { .. } => law
            .atoms()
            .expect("finite law")
            .iter()
            .map(|(g, p)| Complex::from_polar(*p, t * (g.entries()[(0, 0)].abs().ln() + shift)))
            .sum(),
    };
    Ok(base * Complex::from_polar(1.0, -t * shift))
}

impl ReducedOperator {
    /// Largest deviation of a row sum from 1.
    pub fn row_sum_defect(&self) -> f64 {
        (0..self.m)
            .map(|j| (self.matrix.row(j).iter().sum::<Complex<f64>>() - Complex::new(1.0, 0.0)).norm())
            .fold(0.0, f64::max)
    }

    /// Sup norm (max absolute row sum).
    pub fn inf_norm(m: &DMatrix<Complex<f64>>) -> f64 {
        (0..m.nrows()).map(|j| m.row(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// All eigenvalues, by decreasing modulus.
    pub fn eigenvalues(&self) -> Result<Vec<Complex<f64>>> {
        let mut ev: Vec<Complex<f64>> = if self.t == 0.0 && self.matrix.iter().all(|z| z.im == 0.0) {
            let real = self.matrix.map(|z| z.re);
            let schur = real
                .try_schur(1e-15, 100_000)
                .ok_or(Error::Eigensolver(self.m))?;
            schur.complex_eigenvalues().iter().copied().collect()
        } else {
            let schur = self
                .matrix
                .clone()
                .try_schur(1e-15, 100_000)
                .ok_or(Error::Eigensolver(self.m))?;
            let (_, tri) = schur.unpack();
            tri.diagonal().iter().copied().collect()
        };
        ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)).then(b.im.total_cmp(&a.im)));
        Ok(ev)
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        let eigenvalues = self.eigenvalues()?;
        let second = eigenvalues.get(1).map_or(0.0, |z| z.norm());
        Ok(Spectrum {
            m: self.m,
            t: self.t,
            gap: 1.0 - second,
            eigenvalues: eigenvalues.iter().map(|z| (z.re, z.im)).collect(),
        })
    }

    /// `max_{n ≤ n_max} ‖Q̂_t^n‖_∞` and the spectral radius.
    pub fn power_bound(&self, n_max: usize) -> Result<PowerBound> {
        let mut p = self.matrix.clone();
        let mut max_norm = Self::inf_norm(&p);
        for _ in 1..n_max {
            p = &p * &self.matrix;
            max_norm = max_norm.max(Self::inf_norm(&p));
        }
        let radius = self.eigenvalues()?.first().map_or(0.0, |z| z.norm());
        Ok(PowerBound { t: self.t, n_max, max_norm, spectral_radius: radius })
    }

    /// Normalized left eigenvector for eigenvalue 1 of the `t = 0` operator.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        if self.t != 0.0 {
            return Err(Error::InvalidParameter("stationary vector needs t = 0".into()));
        }
        let m = self.m;
        let q = self.matrix.map(|z| z.re);
        let mut a = q.transpose() - DMatrix::identity(m, m);
        for k in 0..m {
            a[(m - 1, k)] = 1.0;
        }
        let mut b = DVector::zeros(m);
        b[m - 1] = 1.0;
        let x = a.lu().solve(&b).ok_or(Error::Eigensolver(m))?;
        let clipped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        Ok(clipped.into_iter().map(|v| v / total).collect())
    }
}

/// Spectrum report `{m, t, eigenvalues: [(re, im)], gap}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub m: usize,
    pub t: f64,
    pub eigenvalues: Vec<(f64, f64)>,
    pub gap: f64,
}

impl Spectrum {
    pub fn leading(&self) -> Complex<f64> {
        self.eigenvalues.first().map_or(Complex::new(0.0, 0.0), |&(re, im)| Complex::new(re, im))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerBound {
    pub t: f64,
    pub n_max: usize,
    pub max_norm: f64,
    pub spectral_radius: f64,
}

/// Total-variation distance between two probability vectors.
pub fn tv_distance(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::preset;
    use approx::assert_relative_eq;

    fn fin2() -> MatrixLaw {
        MatrixLaw::new(preset("FIN2").unwrap()).unwrap()
    }

    fn single(m: Vec<Vec<f64>>) -> MatrixLaw {
        MatrixLaw::new(LawSpec::single(m, 1.0)).unwrap()
    }

    #[test]
    fn locate_wraps() {
        assert_eq!(locate(0.0, 4), (0, 0.0));
        let (j, f) = locate(std::f64::consts::PI * 0.375, 4);
        assert_eq!(j, 1);
        assert_relative_eq!(f, 0.5, epsilon = 1e-12);
        assert_eq!(locate(std::f64::consts::PI, 4).0, 0);
    }

    #[test]
    fn identity_law_gives_identity_matrix() {
        let op = assemble(&single(vec![vec![1.0, 0.0], vec![0.0, 1.0]]), 16, 0.0).unwrap();
        for j in 0..16 {
            for k in 0..16 {
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((op.matrix[(j, k)].re - want).abs() < 1e-12);
            }
        }
        let spec = op.spectrum().unwrap();
        assert!(spec.eigenvalues.iter().all(|(re, im)| (re - 1.0).abs() < 1e-12 && im.abs() < 1e-12));
    }

    #[test]
    fn node_rotation_is_a_cyclic_shift() {
        let m = 32;
        let (s, c) = (std::f64::consts::PI / m as f64).sin_cos();
        let op = assemble(&single(vec![vec![c, -s], vec![s, c]]), m, 0.0).unwrap();
        for j in 0..m {
            assert!((op.matrix[(j, (j + 1) % m)].re - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fin2_operator_is_stochastic_with_gap() {
        let op = assemble(&fin2(), 128, 0.0).unwrap();
        assert!(op.row_sum_defect() < 1e-14);
        assert!(op.matrix.iter().all(|z| z.re >= 0.0 && z.im == 0.0));
        let spec = op.spectrum().unwrap();
        assert_relative_eq!(spec.leading().re, 1.0, epsilon = 1e-10);
        assert!(spec.gap > 0.01, "{}", spec.gap);
        let pi = op.stationary().unwrap();
        assert_relative_eq!(pi.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let q = op.matrix.map(|z| z.re);
        let moved = q.transpose() * DVector::from_column_slice(&pi);
        assert!(moved.iter().zip(&pi).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn perturbed_operator_is_dominated() {
        let law = fin2();
        let q0 = assemble(&law, 64, 0.0).unwrap();
        let qt = assemble(&law, 64, 0.3).unwrap();
        for (a, b) in qt.matrix.iter().zip(q0.matrix.iter()) {
            assert!(a.norm() <= b.re + 1e-15);
        }
        let pb = qt.power_bound(50).unwrap();
        assert!(pb.spectral_radius < 1.0);
        assert!(pb.max_norm <= 1.0 + 1e-12);
        assert_relative_eq!(q0.power_bound(1).unwrap().spectral_radius, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn one_dimensional_operator_is_characteristic_function() {
        let srw = MatrixLaw::new(preset("SRW1").unwrap()).unwrap();
        let op = assemble(&srw, 99, 0.7).unwrap();
        assert_eq!(op.m, 1);
        assert_relative_eq!(op.matrix[(0, 0)].re, 0.7f64.cos(), epsilon = 1e-15);
        let logn = MatrixLaw::new(preset("LOGN1").unwrap()).unwrap();
        let z = characteristic_1d(&logn, 0.5).unwrap();
        assert_relative_eq!(z.norm(), (-0.125f64).exp(), epsilon = 1e-15);
        assert!(z.norm() < 1.0);
    }

    #[test]
    fn irrational_rotation_has_no_gap() {
        let (s, c) = 1f64.sin_cos();
        let op = assemble(&single(vec![vec![c, -s], vec![s, c]]), 128, 0.0).unwrap();
        let ev = op.eigenvalues().unwrap();
        assert!(ev.iter().filter(|z| z.norm() > 0.99).count() >= 3);
    }

    #[test]
    fn tv_basics() {
        assert_eq!(tv_distance(&[0.5, 0.5], &[0.5, 0.5]), 0.0);
        assert_eq!(tv_distance(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
    }
}
