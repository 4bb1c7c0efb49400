//! Laws of the i.i.d. matrix factors, their sampling, moment checks and
//! Lyapunov recentering.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{canonicalize, GroupElement, MAX_DIM, SINGULARITY_FLOOR};
use crate::rng::SeedKey;
use crate::stats;

/// Near-singular draws tolerated before sampling fails.
pub const REJECTION_BUDGET: usize = 64;

/// Largest moment exponent used when deriving Hölder exponents.
pub const DELTA0_CAP: f64 = 8.0 / 3.0;

/// A real-valued law used for angles and log-singular values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScalarLaw {
    Fixed { value: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl ScalarLaw {
    pub fn fixed(value: f64) -> Self {
        ScalarLaw::Fixed { value }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidLaw(m.to_string()));
        match self {
            ScalarLaw::Fixed { value } if !value.is_finite() => bad("fixed value must be finite"),
            ScalarLaw::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return bad("discrete law needs matching non-empty values and probs");
                }
                if values.iter().any(|v| !v.is_finite()) || probs.iter().any(|p| !(*p >= 0.0)) {
                    return bad("discrete law has invalid entries");
                }
                check_prob_sum(probs.iter().copied())
            }
            ScalarLaw::Normal { mean, sd } if !mean.is_finite() || !(*sd >= 0.0) || !sd.is_finite() => {
                bad("normal law needs finite mean and sd >= 0")
            }
            ScalarLaw::Uniform { lo, hi } if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() => {
                bad("uniform law needs finite lo <= hi")
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ScalarLaw::Fixed { value } => *value,
            ScalarLaw::Discrete { values, probs } => values[pick(probs, rng.random::<f64>())],
            ScalarLaw::Normal { mean, sd } => mean + sd * rng.sample::<f64, _>(StandardNormal),
            ScalarLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ScalarLaw::Fixed { value } => *value,
            ScalarLaw::Discrete { values, probs } => values.iter().zip(probs).map(|(v, p)| v * p).sum(),
            ScalarLaw::Normal { mean, .. } => *mean,
            ScalarLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    /// `(inf, sup)` of the support.
    pub fn support_bounds(&self) -> (f64, f64) {
        match self {
            ScalarLaw::Fixed { value } => (*value, *value),
            ScalarLaw::Discrete { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(_, p)| **p > 0.0)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (v, _)| (lo.min(*v), hi.max(*v))),
            ScalarLaw::Normal { mean, sd } if *sd == 0.0 => (*mean, *mean),
            ScalarLaw::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            ScalarLaw::Uniform { lo, hi } => (*lo, *hi),
        }
    }

    fn is_degenerate(&self) -> bool {
        let (lo, hi) = self.support_bounds();
        lo == hi
    }
}

fn check_prob_sum<I: IntoIterator<Item = f64>>(probs: I) -> Result<()> {
    let s = stats::compensated_sum(probs);
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidLaw(format!("probabilities sum to {s}, not 1")));
    }
    Ok(())
}

/// Index of the cell of `u ∈ [0,1)` in the cumulative distribution of `probs`.
#[inline]
fn pick(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave the cumulative sum just below 1.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    /// Row-major rows.
    pub matrix: Vec<Vec<f64>>,
    pub prob: f64,
}

/// Declarative description of a law, as read from configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LawSpec {
    FiniteSupport {
        dimension: usize,
        delta0: f64,
        atoms: Vec<Atom>,
        #[serde(default)]
        recenter_shift: f64,
    },
    /// `g = R · diag(e^{s_1}, …, e^{s_d})` with `R` a product of Givens
    /// rotations in consecutive coordinate planes, each angle drawn from
    /// `angle`, and `s_i` drawn independently from `log_singular_values[i]`.
    RotationDiagonal {
        dimension: usize,
        delta0: f64,
        angle: ScalarLaw,
        log_singular_values: Vec<ScalarLaw>,
        #[serde(default)]
        recenter_shift: f64,
    },
    /// Positive scalars `g = e^{s}` acting on `R`.
    Gl1Scalar {
        delta0: f64,
        log_abs: ScalarLaw,
        #[serde(default)]
        recenter_shift: f64,
    },
}

impl LawSpec {
    pub fn dimension(&self) -> usize {
        match self {
            LawSpec::FiniteSupport { dimension, .. } | LawSpec::RotationDiagonal { dimension, .. } => *dimension,
            LawSpec::Gl1Scalar { .. } => 1,
        }
    }

    pub fn delta0(&self) -> f64 {
        match self {
            LawSpec::FiniteSupport { delta0, .. }
            | LawSpec::RotationDiagonal { delta0, .. }
            | LawSpec::Gl1Scalar { delta0, .. } => *delta0,
        }
    }

    pub fn recenter_shift(&self) -> f64 {
        match self {
            LawSpec::FiniteSupport { recenter_shift, .. }
            | LawSpec::RotationDiagonal { recenter_shift, .. }
            | LawSpec::Gl1Scalar { recenter_shift, .. } => *recenter_shift,
        }
    }

    fn shift_mut(&mut self) -> &mut f64 {
        match self {
            LawSpec::FiniteSupport { recenter_shift, .. }
            | LawSpec::RotationDiagonal { recenter_shift, .. }
            | LawSpec::Gl1Scalar { recenter_shift, .. } => recenter_shift,
        }
    }

    pub fn set_delta0(&mut self, value: f64) {
        match self {
            LawSpec::FiniteSupport { delta0, .. }
            | LawSpec::RotationDiagonal { delta0, .. }
            | LawSpec::Gl1Scalar { delta0, .. } => *delta0 = value,
        }
    }

    /// Point mass at one matrix.
    pub fn single(matrix: Vec<Vec<f64>>, delta0: f64) -> Self {
        LawSpec::FiniteSupport { dimension: matrix.len(), delta0, atoms: vec![Atom { matrix, prob: 1.0 }], recenter_shift: 0.0 }
    }

    /// Equiprobable finite law.
    pub fn uniform_atoms(matrices: Vec<Vec<Vec<f64>>>, delta0: f64) -> Self {
        let p = 1.0 / matrices.len() as f64;
        LawSpec::FiniteSupport {
            dimension: matrices.first().map_or(0, Vec::len),
            delta0,
            atoms: matrices.into_iter().map(|matrix| Atom { matrix, prob: p }).collect(),
            recenter_shift: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
struct FiniteAtom {
    g: GroupElement,
    /// Row-major entries, already scaled by the recenter factor.
    flat: Vec<f64>,
}

#[derive(Clone, Debug)]
enum Kernel {
    Finite { atoms: Vec<FiniteAtom>, probs: Vec<f64> },
    /// `conformal` holds the common log-scale when every factor is a
    /// similarity, so `ρ` is known without rounding.
    RotDiag { angle: ScalarLaw, logs: Vec<ScalarLaw>, conformal: Option<f64> },
    Gl1 { log_abs: ScalarLaw },
}

/// A validated law `μ` together with its recenter shift `λ̂`
/// (draws are `e^{−λ̂} g`).
#[derive(Clone, Debug)]
pub struct MatrixLaw {
    spec: LawSpec,
    kernel: Kernel,
}

impl MatrixLaw {
    pub fn new(spec: LawSpec) -> Result<Self> {
        let d = spec.dimension();
        if d == 0 || d > MAX_DIM {
            return Err(Error::UnsupportedDimension(d));
        }
        let delta0 = spec.delta0();
        if !(delta0 > 0.0) || !delta0.is_finite() {
            return Err(Error::InvalidLaw(format!("delta0 must be positive, got {delta0}")));
        }
        let shift = spec.recenter_shift();
        if !shift.is_finite() {
            return Err(Error::InvalidLaw("recenter_shift must be finite".into()));
        }
        let kernel = match &spec {
            LawSpec::FiniteSupport { atoms, .. } => {
                if atoms.is_empty() {
                    return Err(Error::InvalidLaw("finite-support law has no atoms".into()));
                }
                if atoms.iter().any(|a| !(a.prob >= 0.0)) {
                    return Err(Error::InvalidLaw("negative probability".into()));
                }
                check_prob_sum(atoms.iter().map(|a| a.prob))?;
                let scale = (-shift).exp();
                let mut out = Vec::with_capacity(atoms.len());
                for a in atoms {
                    if a.matrix.len() != d {
                        return Err(Error::DimensionMismatch { expected: d, found: a.matrix.len() });
                    }
                    let g = GroupElement::from_rows(&a.matrix)?.scaled(scale)?;
                    let flat = row_major(g.entries());
                    out.push(FiniteAtom { g, flat });
                }
                Kernel::Finite { atoms: out, probs: atoms.iter().map(|a| a.prob).collect() }
            }
            LawSpec::RotationDiagonal { angle, log_singular_values, .. } => {
                angle.validate()?;
                if log_singular_values.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, found: log_singular_values.len() });
                }
                for l in log_singular_values {
                    l.validate()?;
                }
                let conformal = match log_singular_values.first() {
                    Some(ScalarLaw::Fixed { value })
                        if log_singular_values.iter().all(|l| *l == ScalarLaw::Fixed { value: *value }) =>
                    {
                        Some(*value)
                    }
                    _ => None,
                };
                Kernel::RotDiag { angle: angle.clone(), logs: log_singular_values.clone(), conformal }
            }
            LawSpec::Gl1Scalar { log_abs, .. } => {
                log_abs.validate()?;
                Kernel::Gl1 { log_abs: log_abs.clone() }
            }
        };
        Ok(MatrixLaw { spec, kernel })
    }

    pub fn spec(&self) -> &LawSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dimension()
    }

    pub fn delta0(&self) -> f64 {
        self.spec.delta0()
    }

    pub fn shift(&self) -> f64 {
        self.spec.recenter_shift()
    }

    /// Same law scaled by `e^{−λ}`; cocycle values drop by exactly `λ`.
    pub fn recenter(&self, lambda: f64) -> Result<MatrixLaw> {
        let mut spec = self.spec.clone();
        *spec.shift_mut() += lambda;
        MatrixLaw::new(spec)
    }

    /// Support atoms with probabilities, when the law is finitely supported.
    pub fn atoms(&self) -> Option<Vec<(&GroupElement, f64)>> {
        match &self.kernel {
            Kernel::Finite { atoms, probs } => Some(atoms.iter().map(|a| &a.g).zip(probs.iter().copied()).collect()),
            _ => None,
        }
    }

    /// Lyapunov exponent in closed form, when every factor is a similarity.
    pub fn exact_lyapunov(&self) -> Option<f64> {
        match &self.kernel {
            Kernel::Gl1 { log_abs } => Some(log_abs.mean() - self.shift()),
            Kernel::RotDiag { conformal: Some(c), .. } => Some(c - self.shift()),
            Kernel::RotDiag { angle: ScalarLaw::Uniform { lo, hi }, logs, conformal: None } if logs.len() == 2 => {
                // A full-period uniform rotation makes each argument direction
                // uniform, and the mean of ½ log(A cos² + B sin²) is known.
                let periods = (hi - lo) / std::f64::consts::PI;
                let (ScalarLaw::Fixed { value: a }, ScalarLaw::Fixed { value: b }) = (&logs[0], &logs[1]) else {
                    return None;
                };
                let whole = periods >= 1.0 - 1e-12 && (periods - periods.round()).abs() < 1e-12;
                whole.then(|| ((a.exp() + b.exp()) / 2.0).ln() - self.shift())
            }
            _ => None,
        }
    }

    /// Upper bound `M` on `|ρ|`, when finite.
    pub fn rho_bound(&self) -> Option<f64> {
        let shift = self.shift();
        let m = match &self.kernel {
            Kernel::Finite { atoms, .. } => atoms
                .iter()
                .map(|a| a.g.op_norm().ln().abs().max(a.g.inv_norm().ln().abs()))
                .fold(0.0, f64::max),
            Kernel::RotDiag { logs, .. } => logs
                .iter()
                .map(|l| {
                    let (lo, hi) = l.support_bounds();
                    (lo - shift).abs().max((hi - shift).abs())
                })
                .fold(0.0, f64::max),
            Kernel::Gl1 { log_abs } => {
                let (lo, hi) = log_abs.support_bounds();
                (lo - shift).abs().max((hi - shift).abs())
            }
        };
        m.is_finite().then_some(m)
    }

    /// One draw from the (recentered) law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GroupElement> {
        let d = self.dim();
        let shift = self.shift();
        match &self.kernel {
            Kernel::Finite { atoms, probs } => Ok(atoms[pick(probs, rng.random::<f64>())].g.clone()),
            Kernel::Gl1 { log_abs } => {
                let s = self.draw_logs_1(log_abs, rng)? - shift;
                let a = s.exp();
                Ok(GroupElement::from_parts(DMatrix::from_element(1, 1, a), a, 1.0 / a))
            }
            Kernel::RotDiag { angle, logs, .. } => {
                let mut buf = [0.0; 2 * MAX_DIM];
                let (angles, svals) = buf.split_at_mut(MAX_DIM);
                self.draw_rotdiag(angle, logs, rng, &mut angles[..d.saturating_sub(1)], &mut svals[..d])?;
                let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    d,
                    svals[..d].iter().map(|s| (s - shift).exp()),
                ));
                for c in 0..d {
                    let mut col: Vec<f64> = m.column(c).iter().copied().collect();
                    apply_givens(&angles[..d.saturating_sub(1)], &mut col);
                    m.column_mut(c).copy_from_slice(&col);
                }
                let smax = svals[..d].iter().copied().fold(f64::NEG_INFINITY, f64::max) - shift;
                let smin = svals[..d].iter().copied().fold(f64::INFINITY, f64::min) - shift;
                Ok(GroupElement::from_parts(m, smax.exp(), (-smin).exp()))
            }
        }
    }

    /// Draw `g`, replace the unit vector `dir` by the canonical unit
    /// representative of `g · dir`, and return `ρ(g, dir)`.
    ///
    /// Consumes exactly the randomness of [`MatrixLaw::sample`].
    #[inline]
    pub fn propagate<R: Rng + ?Sized>(&self, rng: &mut R, dir: &mut [f64]) -> Result<f64> {
        let d = self.dim();
        let shift = self.shift();
        match &self.kernel {
            Kernel::Gl1 { log_abs } => {
                let s = self.draw_logs_1(log_abs, rng)?;
                dir[0] = 1.0;
                Ok(s - shift)
            }
            Kernel::Finite { atoms, probs } => {
                let a = &atoms[pick(probs, rng.random::<f64>())];
                let mut w = [0.0; MAX_DIM];
                for i in 0..d {
                    let row = &a.flat[i * d..(i + 1) * d];
                    w[i] = row.iter().zip(dir.iter()).map(|(x, y)| x * y).sum();
                }
                Ok(normalize_into(&w[..d], dir))
            }
            Kernel::RotDiag { angle, logs, conformal } => {
                let mut buf = [0.0; 2 * MAX_DIM];
                let (angles, svals) = buf.split_at_mut(MAX_DIM);
                self.draw_rotdiag(angle, logs, rng, &mut angles[..d.saturating_sub(1)], &mut svals[..d])?;
                let mut w = [0.0; MAX_DIM];
                for i in 0..d {
                    w[i] = svals[i].exp() * dir[i];
                }
                apply_givens(&angles[..d.saturating_sub(1)], &mut w[..d]);
                let log_norm = normalize_into(&w[..d], dir);
                Ok(conformal.unwrap_or(log_norm) - shift)
            }
        }
    }

    fn draw_logs_1<R: Rng + ?Sized>(&self, law: &ScalarLaw, rng: &mut R) -> Result<f64> {
        let floor = SINGULARITY_FLOOR.ln() + self.shift();
        for _ in 0..REJECTION_BUDGET {
            let s = law.sample(rng);
            if s >= floor && (s - self.shift()).exp().is_finite() {
                return Ok(s);
            }
        }
        Err(Error::SamplingBudget { attempts: REJECTION_BUDGET })
    }

    fn draw_rotdiag<R: Rng + ?Sized>(
        &self,
        angle: &ScalarLaw,
        logs: &[ScalarLaw],
        rng: &mut R,
        angles: &mut [f64],
        svals: &mut [f64],
    ) -> Result<()> {
        let floor = SINGULARITY_FLOOR.ln() + self.shift();
        for _ in 0..REJECTION_BUDGET {
            for a in angles.iter_mut() {
                *a = angle.sample(rng);
            }
            for (s, l) in svals.iter_mut().zip(logs) {
                *s = l.sample(rng);
            }
            if svals.iter().all(|s| *s >= floor && (s - self.shift()).exp().is_finite()) {
                return Ok(());
            }
        }
        Err(Error::SamplingBudget { attempts: REJECTION_BUDGET })
    }

    /// Monte Carlo estimate of `E N(g)^{δ₀}`.
    pub fn moment_check(&self, n_samples: u64, seed: SeedKey) -> Result<MomentEstimate> {
        self.moment_check_with_exponent(self.delta0(), n_samples, seed)
    }

    pub fn moment_check_with_exponent(&self, exponent: f64, n_samples: u64, seed: SeedKey) -> Result<MomentEstimate> {
        if n_samples < 1000 {
            return Err(Error::InvalidParameter("moment_check needs at least 1000 samples".into()));
        }
        let exact = self.atoms().map(|atoms| atoms.iter().map(|(g, p)| p * g.n_value().powf(exponent)).sum());
        let mut rng = seed.derive("moment").stream(0);
        let mut xs = Vec::with_capacity(n_samples as usize);
        for _ in 0..n_samples {
            xs.push(self.sample(&mut rng)?.n_value().powf(exponent));
        }
        let (mean, se) = stats::mean_se(&xs);
        let z = stats::z_quantile(0.95);
        let total = stats::compensated_sum(xs.iter().copied());
        let max = xs.iter().copied().fold(0.0, f64::max);
        Ok(MomentEstimate {
            exponent,
            mean,
            se,
            ci_lo: mean - z * se,
            ci_hi: mean + z * se,
            exact,
            heavy_tail_flag: max > 0.1 * total,
        })
    }

    /// Heuristic strong-irreducibility and contraction advisories.
    pub fn advisories(&self) -> Advisory {
        match &self.kernel {
            Kernel::Gl1 { .. } => Advisory {
                irreducible: Some(true),
                contracting: Some(true),
                note: "dimension 1: projective space is a point".into(),
            },
            Kernel::RotDiag { angle, logs, .. } => {
                let d = self.dim();
                let distinct = logs.windows(2).any(|w| !(w[0].is_degenerate() && w[1].is_degenerate() && w[0].mean() == w[1].mean()))
                    || d == 1;
                Advisory {
                    irreducible: Some(d == 1 || !angle.is_degenerate()),
                    contracting: Some(distinct),
                    note: "rotation-diagonal law: advisories from angle spread and log-singular-value spread".into(),
                }
            }
            Kernel::Finite { atoms, .. } => {
                let gs: Vec<&GroupElement> = atoms.iter().map(|a| &a.g).collect();
                let contracting = gs.iter().any(|g| g.op_norm() * g.inv_norm() > 1.0 + 1e-9);
                let invariant = common_invariant_line(&gs);
                Advisory {
                    irreducible: Some(!invariant),
                    contracting: Some(contracting),
                    note: "finite-support law: common invariant lines and singular-value gaps checked".into(),
                }
            }
        }
    }
}

/// Heuristic results for the irreducibility and contraction hypotheses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Advisory {
    pub irreducible: Option<bool>,
    pub contracting: Option<bool>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub exponent: f64,
    pub mean: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub exact: Option<f64>,
    pub heavy_tail_flag: bool,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Rotate `v` by the Givens rotations in planes `(k, k+1)` with the given
/// angles, rightmost first.
#[inline]
fn apply_givens(angles: &[f64], v: &mut [f64]) {
    for (k, a) in angles.iter().enumerate().rev() {
        let (s, c) = a.sin_cos();
        let (x, y) = (v[k], v[k + 1]);
        v[k] = c * x - s * y;
        v[k + 1] = s * x + c * y;
    }
}

#[inline]
fn normalize_into(w: &[f64], dir: &mut [f64]) -> f64 {
    let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    for (o, x) in dir.iter_mut().zip(w) {
        *o = x / n;
    }
    canonicalize(dir);
    n.ln()
}

fn common_invariant_line(gs: &[&GroupElement]) -> bool {
    let Some(first) = gs.first() else { return false };
    let d = first.dim();
    if d == 1 {
        return true;
    }
    let candidates = real_eigenvectors(first.entries());
    candidates.iter().any(|v| {
        gs.iter().all(|g| {
            let w = g.entries() * v;
            crate::geometry::wedge_sine(w.as_slice(), v.as_slice()) < 1e-8
        })
    })
}

fn real_eigenvectors(m: &DMatrix<f64>) -> Vec<nalgebra::DVector<f64>> {
    let d = m.nrows();
    let eig = m.complex_eigenvalues();
    let mut out = Vec::new();
    for l in eig.iter().filter(|l| l.im.abs() < 1e-10) {
        let shifted = m - DMatrix::identity(d, d) * l.re;
        let svd = shifted.svd(false, true);
        if let Some(vt) = svd.v_t {
            let (k, _) = svd
                .singular_values
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, s)| if *s < acc.1 { (i, *s) } else { acc });
            out.push(vt.row(k).transpose());
        }
    }
    out
}

/// Names of the built-in laws.
pub const PRESET_NAMES: [&str; 4] = ["SRW1", "LOGN1", "DIAGROT2", "FIN2"];

/// Built-in reproducible example laws.
pub fn preset(name: &str) -> Option<LawSpec> {
    let spec = match name.to_ascii_uppercase().as_str() {
        "SRW1" => LawSpec::Gl1Scalar {
            delta0: 2.0,
            log_abs: ScalarLaw::Discrete { values: vec![1.0, -1.0], probs: vec![0.5, 0.5] },
            recenter_shift: 0.0,
        },
        "LOGN1" => LawSpec::Gl1Scalar { delta0: 8.0 / 3.0, log_abs: ScalarLaw::Normal { mean: 0.0, sd: 1.0 }, recenter_shift: 0.0 },
        "DIAGROT2" => LawSpec::RotationDiagonal {
            dimension: 2,
            delta0: 2.0,
            angle: ScalarLaw::Uniform { lo: 0.0, hi: std::f64::consts::TAU },
            log_singular_values: vec![ScalarLaw::fixed(0.5), ScalarLaw::fixed(-0.5)],
            recenter_shift: 0.0,
        },
        "FIN2" => {
            let (s, c) = 1.0f64.sin_cos();
            LawSpec::uniform_atoms(vec![vec![vec![1.5, 0.0], vec![0.0, 1.0 / 1.5]], vec![vec![c, -s], vec![s, c]]], 2.0)
        }
        _ => return None,
    };
    Some(spec)
}

/// One-line description of each preset.
pub fn preset_summary(name: &str) -> &'static str {
    match name {
        "SRW1" => "d=1, log|g| = +1 or -1 with probability 1/2 (simple random walk)",
        "LOGN1" => "d=1, log|g| standard normal",
        "DIAGROT2" => "d=2, R(phi) diag(e^0.5, e^-0.5), phi uniform on [0, 2pi)",
        "FIN2" => "d=2, diag(3/2, 2/3) or rotation by 1 rad, probability 1/2 each",
        _ => "",
    }
}

/// Planar rotations `R(φ)` with `φ` drawn from `angle`.
pub fn rotation_law(angle: ScalarLaw) -> LawSpec {
    LawSpec::RotationDiagonal {
        dimension: 2,
        delta0: 2.0,
        angle,
        log_singular_values: vec![ScalarLaw::fixed(0.0), ScalarLaw::fixed(0.0)],
        recenter_shift: 0.0,
    }
}
