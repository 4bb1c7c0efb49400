//! Weighted Hölder seminorms on functions of `x = (g, ū)`, the truncated
//! weights `Ñ` and `Ñ_l`, and pointwise verification of the inequalities
//! relating them to the perturbed transfer operator.
//!
//! True suprema are out of reach; every seminorm here is a supremum over a
//! finite, counter-indexed sample plan and hence a lower bound that can only
//! grow with the budget. Inequalities are checked pair by pair.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ergodic::EmpiricalMeasure;
use crate::error::{Error, Result};
use crate::geometry::{act, angular_dist, cocycle_rho, operator_norm, GroupElement, ProjPoint};
use crate::law::{MatrixLaw, DELTA0_CAP};
use crate::parallel;
use crate::rng::{SeedKey, StreamRng};
use crate::stats::{self, Estimate};

/// Slack added to the right-hand side of sampled inequalities.
pub const CHECK_MARGIN: f64 = 1e-9;

/// The exponent ladder `ε = δ₀/8, θ = 3ε, α = 5ε, β = 7ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderParams {
    pub delta0: f64,
    pub eps: f64,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Ladder for a declared moment exponent, capped at `8/3`.
pub fn derive_params(delta0: f64) -> Result<HolderParams> {
    derive_params_with_contraction(delta0, None)
}

/// Same, additionally capping `δ₀` at `8 ε₀` for a known contraction
/// exponent `ε₀`.
pub fn derive_params_with_contraction(delta0: f64, eps0: Option<f64>) -> Result<HolderParams> {
    if !(delta0 > 0.0) || !delta0.is_finite() {
        return Err(Error::InvalidParameter(format!("delta0 must be positive, got {delta0}")));
    }
    let mut d = delta0.min(DELTA0_CAP);
    if let Some(e0) = eps0 {
        if !(e0 > 0.0) {
            return Err(Error::InvalidParameter(format!("contraction exponent must be positive, got {e0}")));
        }
        d = d.min(8.0 * e0);
    }
    let eps = d / 8.0;
    Ok(HolderParams { delta0: d, eps, theta: 3.0 * eps, alpha: 5.0 * eps, beta: 7.0 * eps })
}

type Evaluator = dyn Fn(&GroupElement, &ProjPoint) -> Complex<f64> + Send + Sync;

/// A named complex function on `X = G × P(R^d)`.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    /// Free-form smoothness class, for reports.
    pub class: String,
    f: Arc<Evaluator>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction").field("name", &self.name).field("class", &self.class).finish()
    }
}

impl TestFunction {
    pub fn new<F>(name: &str, class: &str, f: F) -> Self
    where
        F: Fn(&GroupElement, &ProjPoint) -> Complex<f64> + Send + Sync + 'static,
    {
        TestFunction { name: name.into(), class: class.into(), f: Arc::new(f) }
    }

    pub fn eval(&self, g: &GroupElement, u: &ProjPoint) -> Complex<f64> {
        (self.f)(g, u)
    }

    /// The constant function `e ≡ 1`.
    pub fn constant() -> Self {
        Self::new("e", "constant", |_, _| Complex::new(1.0, 0.0))
    }

    /// `Ñ(g, ū) = (‖g‖ + ‖g⁻¹‖)^θ`.
    pub fn weight(params: &HolderParams) -> Self {
        let theta = params.theta;
        Self::new("weight", "weight", move |g, _| Complex::new(weight(g, theta), 0.0))
    }

    /// `Ñ_l = φ_l(Ñ) Ñ`.
    pub fn truncated_weight(l: u32, params: &HolderParams) -> Self {
        let theta = params.theta;
        Self::new(&format!("weight_trunc{l}"), "truncated weight", move |g, _| {
            Complex::new(truncated_weight(weight(g, theta), l), 0.0)
        })
    }

    /// `ū ↦ ⟨u, e₁⟩² − ⟨u, e₂⟩²` (`cos 2θ` in the plane), independent of `g`.
    pub fn projective_oscillation() -> Self {
        Self::new("cos2theta", "smooth projective", |_, u| {
            let v = u.as_slice();
            let y = if v.len() > 1 { v[1] } else { 0.0 };
            Complex::new(v[0] * v[0] - y * y, 0.0)
        })
    }

    /// `e^{itρ} h`.
    pub fn twisted(&self, t: f64) -> Self {
        let inner = self.f.clone();
        TestFunction {
            name: format!("exp(i{t}rho)*{}", self.name),
            class: self.class.clone(),
            f: Arc::new(move |g, u| Complex::from_polar(1.0, t * cocycle_rho(g, u)) * inner(g, u)),
        }
    }
}

/// `(‖g‖ + ‖g⁻¹‖)^θ`.
pub fn weight(g: &GroupElement, theta: f64) -> f64 {
    (g.op_norm() + g.inv_norm()).powf(theta)
}

/// Ramp `φ_l`: 0 below `l−1`, 1 above `l`, linear between.
pub fn cutoff(x: f64, l: u32) -> f64 {
    (x - (f64::from(l) - 1.0)).clamp(0.0, 1.0)
}

/// `φ_l(x) x`.
pub fn truncated_weight(x: f64, l: u32) -> f64 {
    cutoff(x, l) * x
}

/// Counter-indexed sample plan: item `k` of each family depends only on
/// `(seed, family, k)`, so a larger budget is a superset of a smaller one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub dim: usize,
    /// Log-singular values are drawn uniformly from `[−L, L]`.
    pub log_n_max: f64,
    pub n_points: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub seed: SeedKey,
}

/// Materialized sample plan.
#[derive(Clone, Debug)]
pub struct SampleSet {
    pub points: Vec<(GroupElement, ProjPoint)>,
    pub alpha: Vec<(GroupElement, ProjPoint, ProjPoint)>,
    pub beta: Vec<(GroupElement, GroupElement, ProjPoint)>,
}

fn random_orthogonal(d: usize, rng: &mut StreamRng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    a.qr().q()
}

fn random_unit(d: usize, rng: &mut StreamRng) -> Result<ProjPoint> {
    let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    ProjPoint::from_slice(&v)
}

impl SamplePlan {
    pub fn new(dim: usize, log_n_max: f64, n_points: usize, n_alpha: usize, n_beta: usize, seed: SeedKey) -> Self {
        SamplePlan { dim, log_n_max, n_points, n_alpha, n_beta, seed }
    }

    fn group_element(&self, rng: &mut StreamRng) -> Result<GroupElement> {
        let d = self.dim;
        let l = self.log_n_max;
        let s: Vec<f64> = (0..d).map(|_| l * (2.0 * rng.random::<f64>() - 1.0)).collect();
        if d == 1 {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            return GroupElement::from_row_slice(1, &[sign * s[0].exp()]);
        }
        let u = random_orthogonal(d, rng);
        let v = random_orthogonal(d, rng);
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(d, s.iter().map(|x| x.exp())));
        GroupElement::new(u * diag * v.transpose())
    }

    pub fn point(&self, k: usize) -> Result<(GroupElement, ProjPoint)> {
        if k == 0 {
            return Ok((GroupElement::identity(self.dim)?, ProjPoint::basis(self.dim, 0)?));
        }
        let mut rng = self.seed.derive("point").stream(k as u64);
        Ok((self.group_element(&mut rng)?, random_unit(self.dim, &mut rng)?))
    }

    /// `(g, ū, v̄)` with `d(ū, v̄)` log-uniform in `[10⁻⁶, 1]`.
    pub fn alpha_pair(&self, k: usize) -> Result<(GroupElement, ProjPoint, ProjPoint)> {
        let mut rng = self.seed.derive("alpha").stream(k as u64);
        let g = if k == 0 { GroupElement::identity(self.dim)? } else { self.group_element(&mut rng)? };
        let u = random_unit(self.dim, &mut rng)?;
        let w = random_unit(self.dim, &mut rng)?;
        let dot: f64 = u.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum();
        let perp: Vec<f64> = w.as_slice().iter().zip(u.as_slice()).map(|(a, b)| a - dot * b).collect();
        let perp = ProjPoint::from_slice(&perp)?;
        let angle = 10f64.powf(-6.0 * rng.random::<f64>()) * std::f64::consts::FRAC_PI_2;
        let (s, c) = angle.sin_cos();
        let v: Vec<f64> = u.as_slice().iter().zip(perp.as_slice()).map(|(a, b)| c * a + s * b).collect();
        Ok((g, u, ProjPoint::from_slice(&v)?))
    }

    /// `(g, g′, ū)`: half the pairs are independent draws, half are
    /// perturbations `g′ = g (I + δE)` with `‖E‖ = 1` and `δ` log-uniform in
    /// `[10⁻⁶, 10⁻¹]`.
    pub fn beta_pair(&self, k: usize) -> Result<(GroupElement, GroupElement, ProjPoint)> {
        let mut rng = self.seed.derive("beta").stream(k as u64);
        let d = self.dim;
        let g = self.group_element(&mut rng)?;
        let u = random_unit(d, &mut rng)?;
        let g2 = if k % 2 == 0 {
            self.group_element(&mut rng)?
        } else {
            let e = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let e = &e / operator_norm(&e);
            let delta = 10f64.powf(-1.0 - 5.0 * rng.random::<f64>());
            GroupElement::new(g.entries() * (DMatrix::identity(d, d) + e * delta))?
        };
        Ok((g, g2, u))
    }

    pub fn materialize(&self) -> Result<SampleSet> {
        let points = parallel::try_map_replicas(self.n_points as u64, |k| self.point(k as usize))?;
        let alpha = if self.dim > 1 {
            parallel::try_map_replicas(self.n_alpha as u64, |k| self.alpha_pair(k as usize))?
        } else {
            Vec::new()
        };
        let beta = parallel::try_map_replicas(self.n_beta as u64, |k| self.beta_pair(k as usize))?;
        Ok(SampleSet { points, alpha, beta })
    }
}

/// Where a sampled supremum was attained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub family: String,
    pub index: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeminormReport {
    pub function: String,
    pub est_abs_theta: f64,
    pub est_k_eps_alpha: f64,
    pub est_k_eps_beta_prime: f64,
    pub est_norm_b: f64,
    pub budgets: (usize, usize, usize),
    pub witnesses: Vec<Witness>,
}

/// Function values on every point a sample set touches.
#[derive(Clone, Debug)]
pub struct SampledValues {
    pub points: Vec<Complex<f64>>,
    pub alpha: Vec<(Complex<f64>, Complex<f64>)>,
    pub beta: Vec<(Complex<f64>, Complex<f64>)>,
}

impl SampledValues {
    pub fn of(set: &SampleSet, h: &TestFunction) -> Self {
        SampledValues {
            points: set.points.iter().map(|(g, u)| h.eval(g, u)).collect(),
            alpha: set.alpha.iter().map(|(g, u, v)| (h.eval(g, u), h.eval(g, v))).collect(),
            beta: set.beta.iter().map(|(g, g2, u)| (h.eval(g, u), h.eval(g2, u))).collect(),
        }
    }
}

fn argmax(it: impl Iterator<Item = f64>) -> (usize, f64) {
    it.enumerate().fold((0, 0.0), |best, (i, x)| if x > best.1 { (i, x) } else { best })
}

/// Per-sample ratios behind the three seminorms.
pub struct Ratios {
    pub theta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

pub fn ratios(set: &SampleSet, vals: &SampledValues, params: &HolderParams) -> Ratios {
    let mut theta: Vec<f64> =
        set.points.iter().zip(&vals.points).map(|((g, _), h)| h.norm() / g.n_value().powf(params.theta)).collect();
    // Every point touched by a pair also enters the sup for |h|_θ.
    for ((g, _, _), (a, b)) in set.alpha.iter().zip(&vals.alpha) {
        let n = g.n_value().powf(params.theta);
        theta.push(a.norm() / n);
        theta.push(b.norm() / n);
    }
    for ((g, g2, _), (a, b)) in set.beta.iter().zip(&vals.beta) {
        theta.push(a.norm() / g.n_value().powf(params.theta));
        theta.push(b.norm() / g2.n_value().powf(params.theta));
    }
    let alpha = set
        .alpha
        .iter()
        .zip(&vals.alpha)
        .map(|((g, u, v), (a, b))| (a - b).norm() / (angular_dist(u, v).powf(params.eps) * g.n_value().powf(params.alpha)))
        .collect();
    let beta = set
        .beta
        .iter()
        .zip(&vals.beta)
        .map(|((g, g2, _), (a, b))| {
            let dist = operator_norm(&(g.entries() - g2.entries()));
            (a - b).norm() / (dist.powf(params.eps) * (g.n_value() * g2.n_value()).powf(params.beta))
        })
        .collect();
    Ratios { theta, alpha, beta }
}

pub fn seminorms_from_values(name: &str, set: &SampleSet, vals: &SampledValues, params: &HolderParams) -> SeminormReport {
    let r = ratios(set, vals, params);
    let (it, t) = argmax(r.theta.iter().copied());
    let (ia, a) = argmax(r.alpha.iter().copied());
    let (ib, b) = argmax(r.beta.iter().copied());
    SeminormReport {
        function: name.into(),
        est_abs_theta: t,
        est_k_eps_alpha: a,
        est_k_eps_beta_prime: b,
        est_norm_b: t + a + b,
        budgets: (set.points.len(), set.alpha.len(), set.beta.len()),
        witnesses: vec![
            Witness { family: "theta".into(), index: it, ratio: t },
            Witness { family: "alpha".into(), index: ia, ratio: a },
            Witness { family: "beta".into(), index: ib, ratio: b },
        ],
    }
}

/// Sampled `|h|_θ`, `k_{ε,α}(h)`, `k′_{ε,β}(h)` and their sum.
pub fn seminorms(h: &TestFunction, params: &HolderParams, set: &SampleSet) -> SeminormReport {
    seminorms_from_values(&h.name, set, &SampledValues::of(set, h), params)
}

/// CSV of the witnessing sample items: `family,index,ratio,g entries…,u…`.
pub fn witnesses_csv(report: &SeminormReport, set: &SampleSet) -> String {
    let mut out = String::from("family,index,ratio,g,direction\n");
    for w in &report.witnesses {
        let (g, u) = match w.family.as_str() {
            "alpha" if !set.alpha.is_empty() => (&set.alpha[w.index].0, &set.alpha[w.index].1),
            "beta" if !set.beta.is_empty() => (&set.beta[w.index].0, &set.beta[w.index].2),
            _ if w.index < set.points.len() => (&set.points[w.index].0, &set.points[w.index].1),
            _ => continue,
        };
        let gs: Vec<String> = g.entries().transpose().iter().map(|x| format!("{x:e}")).collect();
        let us: Vec<String> = u.as_slice().iter().map(|x| format!("{x:e}")).collect();
        out.push_str(&format!("{},{},{:e},{},{}\n", w.family, w.index, w.ratio, gs.join(" "), us.join(" ")));
    }
    out
}

/// Pointwise check of the twisted-function bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwistedBoundReport {
    pub function: String,
    pub t: f64,
    pub n_alpha: usize,
    pub n_beta: usize,
    /// Every α-pair ratio of `e^{itρ}h` is at most `2|t|^ε |h|_θ + k_{ε,α}(h)`.
    pub alpha_ok: bool,
    /// Every β-pair ratio is at most `2|t|^ε |h|_θ + k′_{ε,β}(h)`.
    pub beta_ok: bool,
    /// Sampled `‖e^{itρ}h‖_B ≤ ‖h‖_B + 4|t|^ε |h|_θ`.
    pub norm_ok: bool,
    /// Largest `lhs − rhs` over all pairs (negative when everything holds).
    pub worst_slack: f64,
}

impl TwistedBoundReport {
    pub fn all_hold(&self) -> bool {
        self.alpha_ok && self.beta_ok && self.norm_ok
    }
}

pub fn check_twisted_bounds(h: &TestFunction, t: f64, params: &HolderParams, set: &SampleSet) -> TwistedBoundReport {
    let base = seminorms(h, params, set);
    let tw = h.twisted(t);
    let tv = SampledValues::of(set, &tw);
    let r = ratios(set, &tv, params);
    let lift = 2.0 * t.abs().powf(params.eps) * base.est_abs_theta;
    let rhs_a = lift + base.est_k_eps_alpha;
    let rhs_b = lift + base.est_k_eps_beta_prime;
    let worst_a = r.alpha.iter().map(|x| x - rhs_a).fold(f64::NEG_INFINITY, f64::max);
    let worst_b = r.beta.iter().map(|x| x - rhs_b).fold(f64::NEG_INFINITY, f64::max);
    let twisted = seminorms_from_values(&tw.name, set, &tv, params);
    let norm_rhs = base.est_norm_b + 4.0 * t.abs().powf(params.eps) * base.est_abs_theta;
    TwistedBoundReport {
        function: h.name.clone(),
        t,
        n_alpha: set.alpha.len(),
        n_beta: set.beta.len(),
        alpha_ok: worst_a <= CHECK_MARGIN,
        beta_ok: worst_b <= CHECK_MARGIN,
        norm_ok: twisted.est_norm_b <= norm_rhs + CHECK_MARGIN,
        worst_slack: worst_a.max(worst_b),
    }
}

/// `sup |ρ(x)|^{1+γ} / Ñ(x)` over the sample points.
pub fn rho_moment_constant(set: &SampleSet, params: &HolderParams, gamma: f64) -> f64 {
    set.points
        .iter()
        .map(|(g, u)| cocycle_rho(g, u).abs().powf(1.0 + gamma) / weight(g, params.theta))
        .fold(0.0, f64::max)
}

/// Decay of `ν̃(Ñ_l)` in `l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedDecay {
    pub l_grid: Vec<u32>,
    pub values: Vec<Estimate>,
    /// Log-log slope over the uncensored values.
    pub slope: Option<f64>,
    /// Grid points whose estimate is exactly zero.
    pub censored: Vec<u32>,
}

impl TruncatedDecay {
    /// Slope at most `max_slope`; values that vanish exactly on part of the
    /// grid witness faster than polynomial decay and pass.
    pub fn passes(&self, max_slope: f64) -> bool {
        if !self.censored.is_empty() {
            return true;
        }
        self.slope.is_some_and(|s| s <= max_slope)
    }
}

/// `ν̃̂(Ñ_l)` for each `l`, from the points of `ν̂` and fresh `g ~ μ`; the same
/// draws are reused for every `l`.
pub fn check_truncated_decay(
    law: &MatrixLaw,
    measure: &EmpiricalMeasure,
    params: &HolderParams,
    l_grid: &[u32],
    seed: SeedKey,
) -> Result<TruncatedDecay> {
    let theta = params.theta;
    let mut values = Vec::with_capacity(l_grid.len());
    for &l in l_grid {
        let e = crate::ergodic::lifted_expect(law, measure, |g, _| truncated_weight(weight(g, theta), l), seed)?;
        values.push(e);
    }
    let censored: Vec<u32> = l_grid.iter().zip(&values).filter(|(_, e)| e.value <= 0.0).map(|(l, _)| *l).collect();
    let (x, y): (Vec<f64>, Vec<f64>) = l_grid
        .iter()
        .zip(&values)
        .filter(|(_, e)| e.value > 0.0)
        .map(|(l, e)| (f64::from(*l).ln(), e.value.ln()))
        .unzip();
    let slope = stats::linear_fit(&x, &y).map(|f| f.slope);
    Ok(TruncatedDecay { l_grid: l_grid.to_vec(), values, slope, censored })
}

/// `P̂_t^n h(g, ū) = Ê e^{itS_n} h(X_n)` for every `n` in a grid, from `x₀ =
/// (g, ū)`. Replica `r` uses the same stream for every start, so values at
/// nearby starts share their noise.
pub fn transfer_power_values(
    law: &MatrixLaw,
    h: &TestFunction,
    t: f64,
    g: &GroupElement,
    u: &ProjPoint,
    n_grid: &[u64],
    n_mc: u64,
    seed: SeedKey,
) -> Result<Vec<Complex<f64>>> {
    let n_max = n_grid.iter().copied().max().unwrap_or(0);
    let start = act(g, u);
    let sums = parallel::fold_replicas(
        n_mc,
        || Ok(vec![Complex::new(0.0, 0.0); n_grid.len()]),
        |acc: &mut Result<Vec<Complex<f64>>>, r| {
            let Ok(sums) = acc else { return };
            let mut rng = seed.stream(r);
            let mut dir = start.clone();
            let mut s = 0.0;
            for step in 1..=n_max {
                let gn = match law.sample(&mut rng) {
                    Ok(gn) => gn,
                    Err(e) => {
                        *acc = Err(e);
                        return;
                    }
                };
                s += cocycle_rho(&gn, &dir);
                if let Some(i) = n_grid.iter().position(|&n| n == step) {
                    sums[i] += Complex::from_polar(1.0, t * s) * h.eval(&gn, &dir);
                }
                dir = act(&gn, &dir);
            }
        },
        |total, part| match (total.as_mut(), part) {
            (Ok(a), Ok(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
            (Ok(_), Err(e)) => *total = Err(e),
            _ => {}
        },
    )?;
    Ok(sums.into_iter().map(|z| z / n_mc as f64).collect())
}

/// One row of the norm-control check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerBoundRow {
    pub n: u64,
    pub norm: SeminormReport,
    pub bound: f64,
    pub holds: bool,
    /// `(‖P̂^n h‖_B − c|h|_θ)/‖h‖_B`, the Doeblin–Fortet ratio.
    pub df_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerBoundReport {
    pub function: String,
    pub t: f64,
    pub r_eps: f64,
    /// Calibrated at `n = 1` with safety factor 2, then frozen.
    pub c_eps: f64,
    /// `sup_n |P̂^n h|_θ / |h|_θ`.
    pub c_floor: f64,
    pub rows: Vec<PowerBoundRow>,
    /// First `n` with Doeblin–Fortet ratio below 1.
    pub k0: Option<u64>,
    /// `k̂_{ε,α}(P̂^n h)` nonincreasing along the grid.
    pub k_decreasing: bool,
    pub inconclusive: bool,
}

impl PowerBoundReport {
    pub fn all_hold(&self) -> bool {
        !self.inconclusive && self.rows.iter().all(|r| r.holds)
    }
}

/// Sampled `‖P̂_t^n h‖_B` against `c_ε(1+|t|^ε)|h|_θ + c_ε k_{ε,α}(h) r^n`.
#[allow(clippy::too_many_arguments)]
pub fn check_power_bounds(
    law: &MatrixLaw,
    h: &TestFunction,
    t: f64,
    n_grid: &[u64],
    params: &HolderParams,
    r_eps: f64,
    set: &SampleSet,
    n_mc: u64,
    seed: SeedKey,
) -> Result<PowerBoundReport> {
    if n_grid.first() != Some(&1) {
        return Err(Error::InvalidParameter("the n-grid must start at 1 for calibration".into()));
    }
    let base = seminorms(h, params, set);
    let r = r_eps.max(0.0).min(0.99f64.max(r_eps));
    let eval = |g: &GroupElement, u: &ProjPoint| transfer_power_values(law, h, t, g, u, n_grid, n_mc, seed);
    let pts = set.points.iter().map(|(g, u)| eval(g, u)).collect::<Result<Vec<_>>>()?;
    let alpha = set.alpha.iter().map(|(g, u, v)| Ok((eval(g, u)?, eval(g, v)?))).collect::<Result<Vec<_>>>()?;
    let beta = set.beta.iter().map(|(g, g2, u)| Ok((eval(g, u)?, eval(g2, u)?))).collect::<Result<Vec<_>>>()?;
    let reports: Vec<SeminormReport> = (0..n_grid.len())
        .map(|i| {
            let vals = SampledValues {
                points: pts.iter().map(|v| v[i]).collect(),
                alpha: alpha.iter().map(|(a, b)| (a[i], b[i])).collect(),
                beta: beta.iter().map(|(a, b)| (a[i], b[i])).collect(),
            };
            seminorms_from_values(&format!("P^{} {}", n_grid[i], h.name), set, &vals, params)
        })
        .collect();
    let te = t.abs().powf(params.eps);
    let shape = |n: u64| (1.0 + te) * base.est_abs_theta + base.est_k_eps_alpha * r.powf(n as f64);
    let c_eps = 2.0 * reports[0].est_norm_b / shape(1).max(f64::MIN_POSITIVE);
    let c_floor = reports.iter().map(|p| p.est_abs_theta).fold(0.0, f64::max) / base.est_abs_theta.max(f64::MIN_POSITIVE);
    let rows: Vec<PowerBoundRow> = n_grid
        .iter()
        .zip(reports)
        .map(|(&n, rep)| {
            let bound = c_eps * shape(n);
            let df_ratio = (rep.est_norm_b - c_floor * base.est_abs_theta) / base.est_norm_b.max(f64::MIN_POSITIVE);
            PowerBoundRow { n, holds: rep.est_norm_b <= bound + CHECK_MARGIN, bound, norm: rep, df_ratio }
        })
        .collect();
    let k0 = rows.iter().find(|r| r.df_ratio < 1.0).map(|r| r.n);
    let k_decreasing = rows.windows(2).all(|w| w[1].norm.est_k_eps_alpha <= w[0].norm.est_k_eps_alpha + 1e-12);
    let inconclusive = rows.iter().any(|r| !r.norm.est_norm_b.is_finite());
    Ok(PowerBoundReport { function: h.name.clone(), t, r_eps, c_eps, c_floor, rows, k0, k_decreasing, inconclusive })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::preset;
    use approx::assert_relative_eq;

    fn plan(d: usize, n: usize) -> SamplePlan {
        SamplePlan::new(d, 8f64.ln(), n, n, n, SeedKey::new(21))
    }

    #[test]
    fn ladder_examples() {
        let p = derive_params(1.0).unwrap();
        assert_eq!((p.eps, p.theta, p.alpha, p.beta), (0.125, 0.375, 0.625, 0.875));
        let c = derive_params(4.0).unwrap();
        assert_eq!(c.delta0, 8.0 / 3.0);
        assert_relative_eq!(c.eps, 1.0 / 3.0, epsilon = 1e-15);
        assert!(derive_params(0.0).is_err());
        let e = derive_params_with_contraction(2.0, Some(0.1)).unwrap();
        assert_relative_eq!(e.delta0, 0.8, epsilon = 1e-15);
    }

    #[test]
    fn weight_examples() {
        let p = derive_params(2.0).unwrap();
        let id = GroupElement::identity(2).unwrap();
        assert_relative_eq!(weight(&id, p.theta), 2f64.powf(p.theta));
        let g = GroupElement::diagonal(&[2.0, 0.5]).unwrap();
        assert_relative_eq!(weight(&g, p.theta), 4f64.powf(p.theta), epsilon = 1e-14);
        assert_eq!(truncated_weight(2.5, 1), 2.5);
        assert_eq!(truncated_weight(3.0, 4), 0.0);
        assert_eq!(truncated_weight(3.5, 4), 0.5 * 3.5);
    }

    #[test]
    fn constant_function_seminorms() {
        let p = derive_params(2.0).unwrap();
        let set = plan(2, 500).materialize().unwrap();
        let r = seminorms(&TestFunction::constant(), &p, &set);
        assert_eq!((r.est_abs_theta, r.est_k_eps_alpha, r.est_k_eps_beta_prime), (1.0, 0.0, 0.0));
    }

    #[test]
    fn weight_norms_respect_constants() {
        for delta0 in [0.5, 1.0, 2.0, 8.0 / 3.0] {
            let p = derive_params(delta0).unwrap();
            let set = plan(2, 2000).materialize().unwrap();
            let n = seminorms(&TestFunction::weight(&p), &p, &set);
            assert!(n.est_norm_b <= 2f64.powf(p.theta + 2.0), "{n:?}");
            for l in [1, 2, 4, 8] {
                let nl = seminorms(&TestFunction::truncated_weight(l, &p), &p, &set);
                assert!(nl.est_norm_b <= 2f64.powf(2.0 * p.theta + 3.0), "{nl:?}");
            }
        }
    }

    #[test]
    fn seminorms_grow_with_budget() {
        let p = derive_params(2.0).unwrap();
        let h = TestFunction::projective_oscillation();
        let small = seminorms(&h, &p, &plan(2, 100).materialize().unwrap());
        let large = seminorms(&h, &p, &plan(2, 400).materialize().unwrap());
        assert!(large.est_abs_theta >= small.est_abs_theta);
        assert!(large.est_k_eps_alpha >= small.est_k_eps_alpha);
        assert!(large.est_k_eps_beta_prime >= small.est_k_eps_beta_prime);
    }

    #[test]
    fn twisted_bounds_hold_for_builtins() {
        let p = derive_params(2.0).unwrap();
        let set = plan(2, 2000).materialize().unwrap();
        for h in [TestFunction::constant(), TestFunction::weight(&p), TestFunction::truncated_weight(4, &p)] {
            for t in [0.0, 0.1, 0.5, 1.0] {
                let r = check_twisted_bounds(&h, t, &p, &set);
                assert!(r.all_hold(), "{r:?}");
            }
        }
    }

    #[test]
    fn rho_is_dominated_by_weight() {
        let p = derive_params(2.0).unwrap();
        let c = rho_moment_constant(&plan(2, 2000).materialize().unwrap(), &p, 1.0);
        let fresh = SamplePlan::new(2, 8f64.ln(), 2000, 0, 0, SeedKey::new(99)).materialize().unwrap();
        assert!(c > 0.0 && rho_moment_constant(&fresh, &p, 1.0) <= 2.0 * c);
    }

    #[test]
    fn transfer_power_fixes_constants() {
        let law = MatrixLaw::new(preset("FIN2").unwrap()).unwrap();
        let g = GroupElement::identity(2).unwrap();
        let u = ProjPoint::from_angle(0.3);
        let v = transfer_power_values(&law, &TestFunction::constant(), 0.0, &g, &u, &[1, 3, 5], 50, SeedKey::new(1)).unwrap();
        assert!(v.iter().all(|z| (z.re - 1.0).abs() < 1e-12 && z.im == 0.0));
    }

    #[test]
    fn projective_oscillation_smooths_under_fin2() {
        let law = MatrixLaw::new(preset("FIN2").unwrap()).unwrap();
        let p = derive_params(2.0).unwrap();
        let set = SamplePlan::new(2, 2f64.ln(), 20, 40, 20, SeedKey::new(5)).materialize().unwrap();
        let rep = check_power_bounds(&law, &TestFunction::projective_oscillation(), 0.0, &[1, 4, 16], &p, 0.9, &set, 400, SeedKey::new(6))
            .unwrap();
        assert!(rep.all_hold(), "{rep:?}");
        assert!(rep.rows[2].norm.est_k_eps_alpha < rep.rows[0].norm.est_k_eps_alpha);
        let e = check_power_bounds(&law, &TestFunction::constant(), 0.0, &[1, 2], &p, 0.9, &set, 10, SeedKey::new(6)).unwrap();
        assert!(e.rows.iter().all(|r| (r.norm.est_norm_b - 1.0).abs() < 1e-12));
    }
}
