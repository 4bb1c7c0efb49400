//! Lyapunov exponent, stationary measure `ν` and its lift `ν̃`, contraction
//! rate, equidistribution and the asymptotic variance `σ²`.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainStart, Walker};
use crate::error::{Error, Result};
use crate::geometry::{act, angular_dist, GroupElement, ProjPoint, MAX_DIM};
use crate::law::MatrixLaw;
use crate::parallel;
use crate::rng::SeedKey;
use crate::stats::{self, Estimate};

/// Minimum burn-in length.
pub const DEFAULT_BURN_IN: u64 = 1000;

/// `max(10³, 10 × e-folding time)` for a per-step contraction rate `r`.
pub fn default_burn_in(r_hat: Option<f64>) -> u64 {
    match r_hat {
        Some(r) if r > 0.0 && r < 1.0 => DEFAULT_BURN_IN.max((10.0 / -r.ln()).ceil() as u64),
        _ => DEFAULT_BURN_IN,
    }
}

/// `λ̂ = mean of (S_{b+n} − S_b)/n` over replicas; se across replicas.
pub fn lyapunov_estimate(
    law: &MatrixLaw,
    start: &ChainStart,
    burn_in: u64,
    n_steps: u64,
    n_paths: u64,
    seed: SeedKey,
) -> Result<Estimate> {
    if n_steps == 0 || n_paths < 2 {
        return Err(Error::InvalidParameter("lyapunov_estimate needs n_steps > 0 and n_paths >= 2".into()));
    }
    let arg = start.argument();
    let per_path = parallel::try_map_replicas(n_paths, |r| {
        let mut rng = seed.stream(r);
        let mut w = Walker::from_argument(law, arg.as_slice());
        for _ in 0..burn_in {
            w.step(&mut rng)?;
        }
        let s0 = w.s;
        for _ in 0..n_steps {
            w.step(&mut rng)?;
        }
        Ok::<_, Error>((w.s - s0) / n_steps as f64)
    })?;
    Ok(Estimate::from_batches(&per_path))
}

/// Occupation measure of the direction process, stored as equal-weight
/// points grouped by replica.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    coords: Vec<f64>,
    per_group: usize,
    pub burn_in: u64,
}

impl EmpiricalMeasure {
    pub fn from_points(dim: usize, coords: Vec<f64>, per_group: usize, burn_in: u64) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 || per_group == 0 || (coords.len() / dim) % per_group != 0 {
            return Err(Error::InvalidParameter("inconsistent empirical measure layout".into()));
        }
        Ok(EmpiricalMeasure { dim, coords, per_group, burn_in })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn n_groups(&self) -> usize {
        self.len() / self.per_group
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.len() as f64
    }

    /// Sum of the (uniform) weights.
    pub fn total_weight(&self) -> f64 {
        stats::compensated_sum(std::iter::repeat_n(self.weight(), self.len()))
    }

    fn group(&self, k: usize) -> impl Iterator<Item = &[f64]> {
        (k * self.per_group..(k + 1) * self.per_group).map(move |i| self.point(i))
    }

    /// `ν̂(φ)` with a between-replica standard error.
    pub fn expect<F: Fn(&[f64]) -> f64>(&self, f: F) -> Estimate {
        let means: Vec<f64> =
            (0..self.n_groups()).map(|k| self.group(k).map(&f).sum::<f64>() / self.per_group as f64).collect();
        Estimate::from_batches(&means)
    }

    /// Angles in `[0, π)` of a planar measure.
    pub fn angles(&self) -> Vec<f64> {
        assert_eq!(self.dim, 2, "angles need a planar measure");
        (0..self.len()).map(|i| {
            let p = self.point(i);
            crate::geometry::line_angle(p[0], p[1])
        }).collect()
    }

    /// KS distance of the angle law from the uniform law on `[0, π)`.
    pub fn ks_uniform_angle(&self) -> f64 {
        stats::ks_statistic(&self.angles(), |t| (t / std::f64::consts::PI).clamp(0.0, 1.0))
    }

    /// Mass of linear-interpolation hats centred at `θ_j = jπ/m`.
    pub fn hat_projection(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        let w = self.weight();
        for a in self.angles() {
            let (j, frac) = crate::spectral::locate(a, m);
            out[j] += w * (1.0 - frac);
            out[(j + 1) % m] += w * frac;
        }
        out
    }
}

/// Occupation measure of `direction_n` after `burn_in` steps, pooled over
/// `n_replicas` chains started at `start`.
pub fn stationary_measure(
    law: &MatrixLaw,
    start: &ChainStart,
    burn_in: u64,
    n_samples: u64,
    n_replicas: u64,
    seed: SeedKey,
) -> Result<EmpiricalMeasure> {
    if n_replicas < 2 || n_samples < n_replicas {
        return Err(Error::InvalidParameter("stationary_measure needs >= 2 replicas and n_samples >= n_replicas".into()));
    }
    let d = law.dim();
    let per = (n_samples / n_replicas) as usize;
    let arg = start.argument();
    let blocks = parallel::try_map_replicas(n_replicas, |r| {
        let mut rng = seed.stream(r);
        let mut w = Walker::from_argument(law, arg.as_slice());
        for _ in 0..burn_in {
            w.step(&mut rng)?;
        }
        let mut pts = Vec::with_capacity(per * d);
        for _ in 0..per {
            w.step(&mut rng)?;
            pts.extend_from_slice(w.direction());
        }
        Ok::<_, Error>(pts)
    })?;
    EmpiricalMeasure::from_points(d, blocks.concat(), per, burn_in)
}

/// Test-function battery for invariance residuals: the quadratic monomials
/// `v_i v_j`, which are well defined on projective space.
pub fn quadratic_battery(d: usize) -> Vec<(String, Box<dyn Fn(&[f64]) -> f64 + Send + Sync>)> {
    let mut out: Vec<(String, Box<dyn Fn(&[f64]) -> f64 + Send + Sync>)> = Vec::new();
    for i in 0..d {
        for j in i..d {
            out.push((format!("v{i}v{j}"), Box::new(move |v: &[f64]| v[i] * v[j])));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceResidual {
    pub name: String,
    pub residual: f64,
    pub se: f64,
}

impl InvarianceResidual {
    pub fn passes(&self) -> bool {
        self.residual.abs() <= 3.0 * self.se || self.residual.abs() < 1e-12
    }
}

/// `Ê φ(g·v̄) − Ê φ(v̄)` with fresh `g ~ μ` independent of `v̄ ~ ν̂`, for the
/// quadratic battery.
pub fn invariance_residuals(law: &MatrixLaw, measure: &EmpiricalMeasure, seed: SeedKey) -> Result<Vec<InvarianceResidual>> {
    let d = measure.dim();
    let battery = quadratic_battery(d);
    let per_group = parallel::try_map_replicas(measure.n_groups() as u64, |k| {
        let mut rng = seed.stream(k);
        let mut sums = vec![0.0; battery.len()];
        for p in measure.group(k as usize) {
            let mut v = [0.0; MAX_DIM];
            v[..d].copy_from_slice(p);
            law.propagate(&mut rng, &mut v[..d])?;
            for (s, (_, f)) in sums.iter_mut().zip(&battery) {
                *s += f(&v[..d]) - f(p);
            }
        }
        Ok::<_, Error>(sums.into_iter().map(|s| s / measure.per_group as f64).collect::<Vec<_>>())
    })?;
    Ok(battery
        .iter()
        .enumerate()
        .map(|(i, (name, _))| {
            let col: Vec<f64> = per_group.iter().map(|g| g[i]).collect();
            let e = Estimate::from_batches(&col);
            InvarianceResidual { name: name.clone(), residual: e.value, se: e.se }
        })
        .collect())
}

/// `ν̃̂(h)` for `h(g, v̄)` with `g ~ μ` drawn afresh for every point of `ν̂`.
pub fn lifted_expect<H>(law: &MatrixLaw, measure: &EmpiricalMeasure, h: H, seed: SeedKey) -> Result<Estimate>
where
    H: Fn(&GroupElement, &ProjPoint) -> f64 + Sync,
{
    let means = parallel::try_map_replicas(measure.n_groups() as u64, |k| {
        let mut rng = seed.stream(k);
        let mut acc = 0.0;
        for p in measure.group(k as usize) {
            let g = law.sample(&mut rng)?;
            let v = ProjPoint::from_unit_unchecked(nalgebra::DVector::from_column_slice(p));
            acc += h(&g, &v);
        }
        Ok::<_, Error>(acc / measure.per_group as f64)
    })?;
    Ok(Estimate::from_batches(&means))
}

/// `ν̃̂(Ph) − ν̃̂(h)`, with `Ph(g, v̄)` estimated by one fresh draw
/// `h(g₁, g·v̄)`.
pub fn lifted_invariance<H>(law: &MatrixLaw, measure: &EmpiricalMeasure, h: H, seed: SeedKey) -> Result<Estimate>
where
    H: Fn(&GroupElement, &ProjPoint) -> f64 + Sync,
{
    let means = parallel::try_map_replicas(measure.n_groups() as u64, |k| {
        let mut rng = seed.stream(k);
        let mut acc = 0.0;
        for p in measure.group(k as usize) {
            let g = law.sample(&mut rng)?;
            let g1 = law.sample(&mut rng)?;
            let v = ProjPoint::from_unit_unchecked(nalgebra::DVector::from_column_slice(p));
            acc += h(&g1, &act(&g, &v)) - h(&g, &v);
        }
        Ok::<_, Error>(acc / measure.per_group as f64)
    })?;
    Ok(Estimate::from_batches(&means))
}

/// Per-`n` discrepancy `max_ū |Ê φ(G_n·ū) − ref|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub n: u64,
    pub value: f64,
    /// Standard error of the Monte Carlo mean at the maximizing start.
    pub se: f64,
}

/// Sup-discrepancy of `E φ(G_n·ū)` from `reference` over a grid of starts.
pub fn equidistribution_check<F>(
    law: &MatrixLaw,
    phi: F,
    reference: Complex<f64>,
    n_grid: &[u64],
    starts: &[ProjPoint],
    n_paths: u64,
    seed: SeedKey,
) -> Result<Vec<Discrepancy>>
where
    F: Fn(&[f64]) -> Complex<f64> + Sync,
{
    let n_max = n_grid.iter().copied().max().unwrap_or(0);
    let mut out: Vec<Discrepancy> = n_grid.iter().map(|&n| Discrepancy { n, value: 0.0, se: 0.0 }).collect();
    for (s, u) in starts.iter().enumerate() {
        let key = seed.child(s as u64);
        let samples = parallel::try_map_replicas(n_paths, |r| {
            let mut rng = key.stream(r);
            let mut w = Walker::from_argument(law, u.as_slice());
            let mut vals = Vec::with_capacity(n_grid.len());
            for step in 1..=n_max {
                w.step(&mut rng)?;
                if n_grid.contains(&step) {
                    vals.push((step, phi(w.direction())));
                }
            }
            Ok::<_, Error>(vals)
        })?;
        for (i, &n) in n_grid.iter().enumerate() {
            let vals: Vec<Complex<f64>> = samples
                .iter()
                .map(|v| v.iter().find(|(k, _)| *k == n).map_or(phi(u.as_slice()), |(_, x)| *x))
                .collect();
            let re: Vec<f64> = vals.iter().map(|z| z.re).collect();
            let im: Vec<f64> = vals.iter().map(|z| z.im).collect();
            let (mre, sre) = stats::mean_se(&re);
            let (mim, sim) = stats::mean_se(&im);
            let dev = (Complex::new(mre, mim) - reference).norm();
            if dev >= out[i].value {
                out[i] = Discrepancy { n, value: dev, se: sre.hypot(sim) };
            }
        }
    }
    Ok(out)
}

/// Contraction-rate report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub eps: f64,
    /// `(max over pairs of E[(d_n/d_0)^ε])^{1/n}` for `n = 1..=n_max`.
    pub per_n: Vec<f64>,
    /// `max over pairs of (E_{n_max}/E_{n_max−w})^{1/w}`.
    pub r_hat: f64,
    /// Same extrapolation on the two halves of the last window.
    pub last_windows: (f64, f64),
    pub window: u64,
    pub n_pairs: usize,
}

impl ContractionReport {
    pub fn window_stable(&self, tol: f64) -> bool {
        (self.last_windows.0 - self.last_windows.1).abs() < tol
    }
}

/// The deterministic grid of 32 pairs at angular separations `10⁻³, 10⁻¹, 1`.
pub fn pair_grid(d: usize) -> Result<Vec<(ProjPoint, ProjPoint)>> {
    if d < 2 {
        return Err(Error::Unsupported("projective pairs need d >= 2".into()));
    }
    let seps: [f64; 3] = [1e-3, 1e-1, 1.0];
    let mut rng = SeedKey::new(0x5eed).derive("pair-grid").stream(d as u64);
    let mut out = Vec::with_capacity(32);
    for k in 0..32 {
        let sep = seps[k % 3];
        let (u, w) = if d == 2 {
            let a = 0.1234 + k as f64 * std::f64::consts::PI / 32.0;
            (ProjPoint::from_angle(a), ProjPoint::from_angle(a + std::f64::consts::FRAC_PI_2))
        } else {
            use rand::Rng;
            let raw: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
            let u = ProjPoint::from_slice(&raw)?;
            let other: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
            let dot: f64 = other.iter().zip(u.as_slice()).map(|(a, b)| a * b).sum();
            let perp: Vec<f64> = other.iter().zip(u.as_slice()).map(|(a, b)| a - dot * b).collect();
            (u, ProjPoint::from_slice(&perp)?)
        };
        let (s, c) = sep.sin_cos();
        let v: Vec<f64> = u.as_slice().iter().zip(w.as_slice()).map(|(a, b)| c * a + s * b).collect();
        out.push((u, ProjPoint::from_slice(&v)?));
    }
    Ok(out)
}

/// Contraction of the angular distance under common matrix draws.
pub fn contraction_rate(law: &MatrixLaw, eps: f64, n_max: u64, n_samples: u64, seed: SeedKey) -> Result<ContractionReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("contraction exponent must be positive".into()));
    }
    if n_max < 2 || n_samples < 2 {
        return Err(Error::InvalidParameter("contraction_rate needs n_max >= 2 and n_samples >= 2".into()));
    }
    let pairs: Vec<(ProjPoint, ProjPoint)> =
        pair_grid(law.dim())?.into_iter().filter(|(u, v)| angular_dist(u, v) > 0.0).collect();
    let n = n_max as usize;
    // mean_ratio[p][k] = E[(d_{k+1}/d_0)^ε] for pair p
    let mut mean_ratio = Vec::with_capacity(pairs.len());
    for (pi, (u, v)) in pairs.iter().enumerate() {
        let d0 = angular_dist(u, v);
        let key = seed.child(pi as u64);
        let sums = parallel::fold_replicas(
            n_samples,
            || Ok(vec![0.0; n]),
            |acc: &mut Result<Vec<f64>>, r| {
                let Ok(sums) = acc else { return };
                let mut rng = key.stream(r);
                let mut a = u.clone();
                let mut b = v.clone();
                for s in sums.iter_mut() {
                    match law.sample(&mut rng) {
                        Ok(g) => {
                            a = act(&g, &a);
                            b = act(&g, &b);
                            *s += (angular_dist(&a, &b) / d0).powf(eps);
                        }
                        Err(e) => {
                            *acc = Err(e);
                            return;
                        }
                    }
                }
            },
            |total, part| match (total.as_mut(), part) {
                (Ok(t), Ok(p)) => t.iter_mut().zip(p).for_each(|(x, y)| *x += y),
                (Ok(_), Err(e)) => *total = Err(e),
                _ => {}
            },
        )?;
        mean_ratio.push(sums.into_iter().map(|s| s / n_samples as f64).collect::<Vec<_>>());
    }
    let per_n: Vec<f64> = (0..n)
        .map(|k| mean_ratio.iter().map(|m| m[k]).fold(0.0, f64::max).powf(1.0 / (k + 1) as f64))
        .collect();
    let w = (n / 2).max(1);
    let half = (w / 2).max(1);
    let extrap = |hi: usize, lo: usize| {
        mean_ratio
            .iter()
            .map(|m| {
                let top = m[hi - 1];
                let bottom = if lo == 0 { 1.0 } else { m[lo - 1] };
                (top / bottom).powf(1.0 / (hi - lo) as f64)
            })
            .filter(|x| x.is_finite())
            .fold(0.0, f64::max)
    };
    let r_hat = extrap(n, n - w);
    let last_windows = (extrap(n, n - half), extrap(n - half, n - 2 * half));
    Ok(ContractionReport { eps, per_n, r_hat, last_windows, window: w as u64, n_pairs: pairs.len() })
}

/// `σ̂²` from the slope of `Var(S_n)` against `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub sigma2: Estimate,
    pub n_grid: Vec<u64>,
    pub variances: Vec<f64>,
}

/// Number of replica batches used for standard errors of regression-type
/// estimators.
pub const N_BATCHES: usize = 16;

pub fn sigma2_growth(
    law: &MatrixLaw,
    start: &ChainStart,
    n_grid: &[u64],
    n_paths: u64,
    seed: SeedKey,
) -> Result<GrowthReport> {
    if n_grid.len() < 2 || n_paths < (N_BATCHES * 2) as u64 {
        return Err(Error::InvalidParameter("sigma2_growth needs >= 2 grid points and >= 32 paths".into()));
    }
    let n_max = *n_grid.iter().max().expect("non-empty grid");
    let arg = start.argument();
    let rows = parallel::try_map_replicas(n_paths, |r| {
        let mut rng = seed.stream(r);
        let mut w = Walker::from_argument(law, arg.as_slice());
        let mut out = Vec::with_capacity(n_grid.len());
        for step in 1..=n_max {
            w.step(&mut rng)?;
            if n_grid.contains(&step) {
                out.push(w.s);
            }
        }
        Ok::<_, Error>(out)
    })?;
    let mut sorted: Vec<u64> = n_grid.to_vec();
    sorted.sort_unstable();
    let x: Vec<f64> = sorted.iter().map(|&n| n as f64).collect();
    let slope_of = |rows: &[Vec<f64>]| -> (f64, Vec<f64>) {
        let vars: Vec<f64> = (0..sorted.len()).map(|i| stats::variance(&rows.iter().map(|r| r[i]).collect::<Vec<_>>())).collect();
        (stats::linear_fit(&x, &vars).map_or(f64::NAN, |f| f.slope), vars)
    };
    let (value, variances) = slope_of(&rows);
    let per = rows.len() / N_BATCHES;
    let batch: Vec<f64> = (0..N_BATCHES).map(|b| slope_of(&rows[b * per..(b + 1) * per]).0).collect();
    let (_, se) = stats::mean_se(&batch);
    Ok(GrowthReport { sigma2: Estimate::new(value.max(0.0), se), n_grid: sorted, variances })
}

/// `σ̂²` from the lag-covariance series of stationary increments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub sigma2: Estimate,
    /// First lag whose 95% interval contains 0.
    pub first_null_lag: usize,
    /// Lags summed (twice the first null lag).
    pub truncation_lag: usize,
    pub autocov: Vec<f64>,
}

/// Starts each replica at a point of `ν̂`, records `path_len` increments and
/// sums `γ₀ + 2 Σ_{k≥1} γ_k` up to the truncation rule.
pub fn sigma2_covariance(
    law: &MatrixLaw,
    measure: &EmpiricalMeasure,
    path_len: usize,
    max_lag: usize,
    n_paths: u64,
    seed: SeedKey,
) -> Result<CovarianceReport> {
    if path_len <= 2 * max_lag || n_paths < 2 || measure.is_empty() {
        return Err(Error::InvalidParameter("sigma2_covariance needs path_len > 2 max_lag and >= 2 paths".into()));
    }
    let len = measure.len();
    let paths = parallel::try_map_replicas(n_paths, |r| {
        let mut rng = seed.stream(r);
        let p = measure.point((crate::rng::mix64(r) % len as u64) as usize);
        let mut w = Walker::from_argument(law, p);
        let mut incs = Vec::with_capacity(path_len);
        for _ in 0..path_len {
            incs.push(w.step(&mut rng)?);
        }
        Ok::<_, Error>(incs)
    })?;
    let mean = stats::compensated_sum(paths.iter().flatten().copied()) / (path_len as f64 * n_paths as f64);
    // Per-replica autocovariances around the pooled mean.
    let per_path: Vec<Vec<f64>> = paths
        .iter()
        .map(|x| {
            (0..=max_lag)
                .map(|k| {
                    let m = path_len - k;
                    (0..m).map(|j| (x[j] - mean) * (x[j + k] - mean)).sum::<f64>() / m as f64
                })
                .collect()
        })
        .collect();
    let lag_est: Vec<Estimate> =
        (0..=max_lag).map(|k| Estimate::from_batches(&per_path.iter().map(|v| v[k]).collect::<Vec<_>>())).collect();
    let z = stats::z_quantile(0.95);
    let first_null = (1..=max_lag).find(|&k| lag_est[k].value.abs() <= z * lag_est[k].se).unwrap_or(max_lag);
    let trunc = (2 * first_null).min(max_lag);
    let series = |v: &[f64]| v[0] + 2.0 * v[1..=trunc].iter().sum::<f64>();
    let per_rep: Vec<f64> = per_path.iter().map(|v| series(v)).collect();
    let (_, se) = stats::mean_se(&per_rep);
    let autocov: Vec<f64> = lag_est.iter().map(|e| e.value).collect();
    let value = series(&autocov);
    Ok(CovarianceReport { sigma2: Estimate::new(value, se), first_null_lag: first_null, truncation_lag: trunc, autocov })
}

/// Lyapunov exponent, variance and contraction summary of one law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralScalars {
    pub lyapunov: Estimate,
    pub sigma2: Estimate,
    pub contraction: Option<ContractionReport>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::{preset, rotation_law, LawSpec, ScalarLaw};
    use approx::assert_relative_eq;

    fn law(name: &str) -> MatrixLaw {
        MatrixLaw::new(preset(name).unwrap()).unwrap()
    }

    fn diag_law() -> MatrixLaw {
        MatrixLaw::new(LawSpec::single(vec![vec![2.0, 0.0], vec![0.0, 0.5]], 2.0)).unwrap()
    }

    fn rot_law() -> MatrixLaw {
        MatrixLaw::new(rotation_law(ScalarLaw::Uniform { lo: 0.0, hi: std::f64::consts::TAU })).unwrap()
    }

    #[test]
    fn lyapunov_examples() {
        let seed = SeedKey::new(11);
        let drift = MatrixLaw::new(LawSpec::Gl1Scalar {
            delta0: 1.0,
            log_abs: ScalarLaw::Normal { mean: 0.3, sd: 1.0 },
            recenter_shift: 0.0,
        })
        .unwrap();
        let start1 = ChainStart::canonical(1).unwrap();
        let est = lyapunov_estimate(&drift, &start1, 0, 1000, 200, seed).unwrap();
        assert!(est.within(0.3, 4.0), "{est:?}");
        let rot = lyapunov_estimate(&rot_law(), &ChainStart::canonical(2).unwrap(), 0, 1000, 10, seed).unwrap();
        assert_eq!(rot.value, 0.0);
        let start = ChainStart::at(ProjPoint::from_angle(1.0)).unwrap();
        let diag = lyapunov_estimate(&diag_law(), &start, 0, 1000, 4, seed).unwrap();
        assert_relative_eq!(diag.value, 2f64.ln(), epsilon = 2e-3);
    }

    #[test]
    fn recentered_lyapunov_is_zero() {
        let l = law("DIAGROT2");
        let start = ChainStart::canonical(2).unwrap();
        let est = lyapunov_estimate(&l, &start, 10, 1000, 400, SeedKey::new(1)).unwrap();
        let lambda = (0.5f64).cosh().ln();
        assert!(est.within(lambda, 4.0), "{est:?} vs {lambda}");
        let re = l.recenter(est.value).unwrap();
        let again = lyapunov_estimate(&re, &start, 10, 1000, 400, SeedKey::new(1)).unwrap();
        assert!(again.value.abs() < 1e-12);
        let other = lyapunov_estimate(&re, &start, 10, 1000, 400, SeedKey::new(2)).unwrap();
        assert!(other.within(0.0, 3.5), "{other:?}");
    }

    #[test]
    fn rotation_invariant_law_has_uniform_measure() {
        let m = stationary_measure(&rot_law(), &ChainStart::canonical(2).unwrap(), 10, 100_000, 100, SeedKey::new(3)).unwrap();
        assert_eq!(m.len(), 100_000);
        assert!(m.ks_uniform_angle() <= 0.02);
        assert!((m.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_diagonal_concentrates_at_e1() {
        let start = ChainStart::at(ProjPoint::from_angle(1.0)).unwrap();
        let m = stationary_measure(&diag_law(), &start, 100, 1000, 10, SeedKey::new(4)).unwrap();
        let mass = m.expect(|v| v[0] * v[0]);
        assert_relative_eq!(mass.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fin2_invariance_residuals_are_small() {
        let l = law("FIN2");
        let m = stationary_measure(&l, &ChainStart::canonical(2).unwrap(), 1000, 200_000, 200, SeedKey::new(5)).unwrap();
        for r in invariance_residuals(&l, &m, SeedKey::new(6)).unwrap() {
            assert!(r.passes(), "{r:?}");
        }
    }

    #[test]
    fn lifted_expect_of_constant_is_one() {
        let l = law("FIN2");
        let m = stationary_measure(&l, &ChainStart::canonical(2).unwrap(), 100, 1000, 10, SeedKey::new(7)).unwrap();
        let e = lifted_expect(&l, &m, |_, _| 1.0, SeedKey::new(8)).unwrap();
        assert_eq!(e.value, 1.0);
    }

    #[test]
    fn equidistribution_for_rotation_pair_law() {
        let l = MatrixLaw::new(LawSpec::uniform_atoms(
            vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]], {
                let (s, c) = 1f64.sin_cos();
                vec![vec![c, -s], vec![s, c]]
            }],
            1.0,
        ))
        .unwrap();
        let mode = |v: &[f64]| {
            let a = crate::geometry::line_angle(v[0], v[1]);
            Complex::new((2.0 * a).cos(), (2.0 * a).sin())
        };
        let starts = vec![ProjPoint::basis(2, 0).unwrap(), ProjPoint::from_angle(0.7)];
        let grid = [1, 5, 10, 20];
        let out = equidistribution_check(&l, mode, Complex::new(0.0, 0.0), &grid, &starts, 20_000, SeedKey::new(9)).unwrap();
        for d in &out {
            let oracle = 1f64.cos().abs().powi(d.n as i32);
            assert!((d.value - oracle).abs() <= 4.0 * d.se + 1e-3, "{d:?} vs {oracle}");
        }
        let one = equidistribution_check(&l, |_| Complex::new(1.0, 0.0), Complex::new(1.0, 0.0), &grid, &starts, 10, SeedKey::new(9)).unwrap();
        assert!(one.iter().all(|d| d.value == 0.0));
    }

    #[test]
    fn contraction_examples() {
        let eps = 0.25;
        let diag = contraction_rate(&diag_law(), eps, 30, 2, SeedKey::new(10)).unwrap();
        let target = 0.25f64.powf(eps);
        assert!((diag.r_hat - target).abs() <= 0.1 * target, "{diag:?}");
        let rot = contraction_rate(&rot_law(), eps, 20, 50, SeedKey::new(10)).unwrap();
        assert!((rot.r_hat - 1.0).abs() <= 0.01);
        assert_eq!(pair_grid(2).unwrap().len(), 32);
        assert!(contraction_rate(&law("SRW1"), eps, 10, 10, SeedKey::new(1)).is_err());
    }

    #[test]
    fn fin2_contracts() {
        let r = contraction_rate(&law("FIN2"), 0.25, 24, 400, SeedKey::new(12)).unwrap();
        assert!(r.r_hat < 1.0, "{r:?}");
    }

    #[test]
    fn srw_sigma2_by_growth() {
        let grid: Vec<u64> = (6..=12).map(|k| 1u64 << k).collect();
        let rep = sigma2_growth(&law("SRW1"), &ChainStart::canonical(1).unwrap(), &grid, 4000, SeedKey::new(13)).unwrap();
        assert!((rep.sigma2.value - 1.0).abs() < 0.05, "{:?}", rep.sigma2);
    }

    #[test]
    fn sigma2_methods_agree_on_diagrot2() {
        let l = law("DIAGROT2").recenter(0.5f64.cosh().ln()).unwrap();
        let start = ChainStart::canonical(2).unwrap();
        let grid: Vec<u64> = (6..=10).map(|k| 1u64 << k).collect();
        let g = sigma2_growth(&l, &start, &grid, 3200, SeedKey::new(14)).unwrap();
        let m = stationary_measure(&l, &start, 100, 10_000, 100, SeedKey::new(15)).unwrap();
        let c = sigma2_covariance(&l, &m, 400, 20, 2000, SeedKey::new(16)).unwrap();
        assert!(g.sigma2.agrees_with(&c.sigma2, 3.0), "{:?} {:?}", g.sigma2, c.sigma2);
        assert!((c.sigma2.value - 0.1130932).abs() < 4.0 * c.sigma2.se, "{:?}", c.sigma2);
    }

    #[test]
    fn burn_in_rule() {
        assert_eq!(default_burn_in(None), 1000);
        assert_eq!(default_burn_in(Some(0.5)), 1000);
        assert_eq!(default_burn_in(Some(0.999)), 9995);
    }
}
