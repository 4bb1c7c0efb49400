//! The walk `y + S_n` killed at `τ_y = min{n ≥ 1 : y + S_n ≤ 0}`: survival,
//! the harmonic function `V`, the conditioned endpoint law and the support
//! domain `D′_γ`.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainStart, Walker};
use crate::error::{Error, Result};
use crate::law::{MatrixLaw, ScalarLaw};
use crate::parallel;
use crate::rng::SeedKey;
use crate::stats::{self, Estimate, LinearFit};

/// Survivors required by [`asymptotics_check`].
pub const MIN_SURVIVORS: u64 = 1000;

/// Outcome of one killed path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitSample {
    /// `τ_y`, or `None` when the path survived `n_max` steps.
    pub tau: Option<u64>,
    /// `y + S_{τ_y ∧ n_max}`.
    pub endpoint: f64,
}

/// Run one path until exit or `n_max`.
pub fn exit_time_sample<R: Rng + ?Sized>(
    law: &MatrixLaw,
    start: &ChainStart,
    y: f64,
    n_max: u64,
    rng: &mut R,
) -> Result<ExitSample> {
    let mut w = Walker::new(law, start);
    for n in 1..=n_max {
        w.step(rng)?;
        if y + w.s <= 0.0 {
            return Ok(ExitSample { tau: Some(n), endpoint: y + w.s });
        }
    }
    Ok(ExitSample { tau: None, endpoint: y + w.s })
}

/// Survival at one grid time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRow {
    pub n: u64,
    pub survivors: u64,
    pub paths: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// `Ṽ_n = Ê(y + S_n; τ_y > n)`.
    pub killed_mean: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitStats {
    pub y: f64,
    pub n_paths: u64,
    pub seed: SeedKey,
    pub rows: Vec<SurvivalRow>,
    /// Grid time at which endpoints were kept.
    pub endpoint_n: Option<u64>,
    /// `y + S_n` for surviving paths at `endpoint_n`, in replica order.
    pub endpoints: Vec<f64>,
}

impl ExitStats {
    pub fn row(&self, n: u64) -> Option<&SurvivalRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    /// Log-log fit of `p̂` against `n` over `[lo, hi]`, ignoring zero rows.
    pub fn slope(&self, lo: u64, hi: u64) -> Option<LinearFit> {
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .rows
            .iter()
            .filter(|r| r.n >= lo && r.n <= hi && r.survivors > 0)
            .map(|r| ((r.n as f64).ln(), r.p_hat.ln()))
            .unzip();
        stats::linear_fit(&x, &y)
    }

    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].survivors <= w[0].survivors)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,survivors,paths,p_hat,ci_lo,ci_hi,killed_mean,killed_mean_se")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{:e},{:e},{:e},{:e},{:e}",
                r.n, r.survivors, r.paths, r.p_hat, r.ci_lo, r.ci_hi, r.killed_mean.value, r.killed_mean.se
            )?;
        }
        Ok(())
    }

    pub fn write_endpoints_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,endpoint")?;
        let n = self.endpoint_n.unwrap_or(0);
        for e in &self.endpoints {
            writeln!(out, "{n},{e:e}")?;
        }
        Ok(())
    }
}

/// Geometric grid `lo, lo·q, …` up to `hi` (both included, deduplicated).
pub fn geometric_grid(lo: u64, hi: u64, per_decade: u32) -> Vec<u64> {
    let lo = lo.max(1);
    let mut out = Vec::new();
    let step = 10f64.powf(1.0 / f64::from(per_decade.max(1)));
    let mut x = lo as f64;
    while x.round() as u64 <= hi {
        let n = x.round() as u64;
        if out.last() != Some(&n) {
            out.push(n);
        }
        x *= step;
    }
    if out.last() != Some(&hi) && hi >= lo {
        out.push(hi);
    }
    out
}

struct ExitAcc {
    survivors: Vec<u64>,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    endpoints: Vec<f64>,
    err: Option<Error>,
}

/// Monte Carlo survival on `n_grid`; path `r` uses stream `r` of `seed`, so
/// runs differing only in `y` are coupled. Endpoints are kept at `endpoint_n`.
pub fn survival_with_endpoints(
    law: &MatrixLaw,
    start: &ChainStart,
    y: f64,
    n_grid: &[u64],
    n_paths: u64,
    seed: SeedKey,
    endpoint_n: Option<u64>,
) -> Result<ExitStats> {
    if n_paths == 0 || n_grid.is_empty() {
        return Err(Error::InvalidParameter("survival needs paths and a nonempty grid".into()));
    }
    if n_grid.windows(2).any(|w| w[1] <= w[0]) || n_grid[0] == 0 {
        return Err(Error::InvalidParameter("the n-grid must be positive and increasing".into()));
    }
    let k = n_grid.len();
    let n_max = n_grid[k - 1];
    let arg = start.argument();
    let acc = parallel::fold_replicas(
        n_paths,
        || ExitAcc { survivors: vec![0; k], sum: vec![0.0; k], sumsq: vec![0.0; k], endpoints: Vec::new(), err: None },
        |acc, r| {
            if acc.err.is_some() {
                return;
            }
            let mut rng = seed.stream(r);
            let mut w = Walker::from_argument(law, arg.as_slice());
            let mut next = 0;
            for n in 1..=n_max {
                if let Err(e) = w.step(&mut rng) {
                    acc.err = Some(e);
                    return;
                }
                let level = y + w.s;
                if level <= 0.0 {
                    return;
                }
                if n == n_grid[next] {
                    acc.survivors[next] += 1;
                    acc.sum[next] += level;
                    acc.sumsq[next] += level * level;
                    if endpoint_n == Some(n) {
                        acc.endpoints.push(level);
                    }
                    next += 1;
                }
            }
        },
        |total, part| {
            if total.err.is_none() {
                total.err = part.err;
            }
            for i in 0..k {
                total.survivors[i] += part.survivors[i];
                total.sum[i] += part.sum[i];
                total.sumsq[i] += part.sumsq[i];
            }
            total.endpoints.extend(part.endpoints);
        },
    );
    if let Some(e) = acc.err {
        return Err(e);
    }
    let z = stats::z_quantile(0.95);
    let np = n_paths as f64;
    let rows = (0..k)
        .map(|i| {
            let s = acc.survivors[i];
            let (ci_lo, ci_hi) = stats::wilson_interval(s, n_paths, z);
            let mean = acc.sum[i] / np;
            let var = if n_paths > 1 { ((acc.sumsq[i] / np - mean * mean) * np / (np - 1.0)).max(0.0) } else { 0.0 };
            SurvivalRow {
                n: n_grid[i],
                survivors: s,
                paths: n_paths,
                p_hat: s as f64 / np,
                ci_lo,
                ci_hi,
                killed_mean: Estimate::new(mean, (var / np).sqrt()),
            }
        })
        .collect();
    Ok(ExitStats { y, n_paths, seed, rows, endpoint_n, endpoints: acc.endpoints })
}

/// [`survival_with_endpoints`] keeping endpoints at the last grid time.
pub fn survival_prob(
    law: &MatrixLaw,
    start: &ChainStart,
    y: f64,
    n_grid: &[u64],
    n_paths: u64,
    seed: SeedKey,
) -> Result<ExitStats> {
    survival_with_endpoints(law, start, y, n_grid, n_paths, seed, n_grid.last().copied())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicEstimate {
    pub y: f64,
    /// `(n, Ṽ_n)` along the grid.
    pub sequence: Vec<(u64, Estimate)>,
    /// `V̂`, taken as `Ṽ_{2n}` at the first window passing the plateau test.
    pub value: Option<Estimate>,
    /// `(n, 2n)` of that window.
    pub window: Option<(u64, u64)>,
}

impl HarmonicEstimate {
    pub fn inconclusive(&self) -> bool {
        self.value.is_none()
    }
}

/// Plateau rule `|Ṽ_{2n} − Ṽ_n| ≤ 2 se(Ṽ_{2n})` over the doubling pairs of
/// a grid. A sequence that is identically zero is its own plateau.
pub fn plateau(y: f64, sequence: Vec<(u64, Estimate)>) -> HarmonicEstimate {
    let mut value = None;
    let mut window = None;
    for (i, (n, a)) in sequence.iter().enumerate() {
        let Some((m, b)) = sequence[i + 1..].iter().find(|(m, _)| *m == 2 * n) else { continue };
        let flat = (b.value - a.value).abs() <= 2.0 * b.se || (a.value == 0.0 && b.value == 0.0);
        if flat {
            value = Some(*b);
            window = Some((*n, *m));
            break;
        }
    }
    HarmonicEstimate { y, sequence, value, window }
}

/// `Ṽ_n(x, y)` along a doubling grid and its plateau (see [`harmonic_from_stats`]).
pub fn harmonic_estimate(
    law: &MatrixLaw,
    start: &ChainStart,
    y: f64,
    n_grid: &[u64],
    n_paths: u64,
    seed: SeedKey,
) -> Result<HarmonicEstimate> {
    let stats = survival_with_endpoints(law, start, y, n_grid, n_paths, seed, None)?;
    Ok(harmonic_from_stats(&stats))
}

/// Plateau over the grid times `n ≥ √n_max`, skipping the start-up phase in
/// which few paths can have exited.
pub fn harmonic_from_stats(stats: &ExitStats) -> HarmonicEstimate {
    let n_max = stats.rows.last().map_or(0, |r| r.n);
    let from = (n_max as f64).sqrt().floor() as u64;
    let mut h = plateau(stats.y, stats.rows.iter().filter(|r| r.n >= from).map(|r| (r.n, r.killed_mean)).collect());
    h.sequence = stats.rows.iter().map(|r| (r.n, r.killed_mean)).collect();
    h
}

/// Doubling grid `n0, 2n0, 4n0, …, ≤ n_max`.
pub fn doubling_grid(n0: u64, n_max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut n = n0.max(1);
    while n <= n_max {
        out.push(n);
        n *= 2;
    }
    out
}

/// Smallest `c` with `(1−δ)y⁺ − c ≤ V̂(y) ≤ (1+δ)y⁺ + c` on the fit points,
/// doubled.
pub fn fit_sandwich_constant(points: &[(f64, f64)], delta: f64) -> f64 {
    2.0 * points
        .iter()
        .map(|&(y, v)| {
            let yp = y.max(0.0);
            (v - (1.0 + delta) * yp).max((1.0 - delta) * yp - v).max(0.0)
        })
        .fold(0.0, f64::max)
}

pub fn sandwich_holds(y: f64, v: f64, delta: f64, c: f64) -> bool {
    let yp = y.max(0.0);
    (1.0 - delta) * yp - c <= v && v <= (1.0 + delta) * yp + c
}

/// Large-`n` survival and conditioned-endpoint diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub n: u64,
    pub y: f64,
    pub p_hat: f64,
    pub survivors: u64,
    /// `p̂ √(2πn) σ̂ / (2 V̂)`.
    pub ratio: f64,
    pub ratio_se: f64,
    /// KS distance of `(y + S_n)/(σ̂ √n) | τ_y > n` to `1 − e^{−t²/2}`.
    pub ks: f64,
}

pub fn asymptotics_from_stats(stats: &ExitStats, sigma: f64, v_hat: Estimate) -> Result<AsymptoticsReport> {
    let n = stats.endpoint_n.ok_or_else(|| Error::InvalidParameter("no endpoints were kept".into()))?;
    let row = stats.row(n).ok_or_else(|| Error::InvalidParameter(format!("no survival row at n = {n}")))?;
    if row.survivors < MIN_SURVIVORS {
        return Err(Error::InsufficientSurvivors { found: row.survivors, needed: MIN_SURVIVORS });
    }
    if !(sigma > 0.0) || !(v_hat.value > 0.0) {
        return Err(Error::InvalidParameter("the asymptotic needs positive sigma and V".into()));
    }
    let nf = n as f64;
    let scale = (2.0 * std::f64::consts::PI * nf).sqrt() * sigma / 2.0;
    let ratio = row.p_hat * scale / v_hat.value;
    let p_rel = ((1.0 - row.p_hat) / (row.p_hat * row.paths as f64)).sqrt();
    let ratio_se = ratio * p_rel.hypot(v_hat.se / v_hat.value);
    let norm = sigma * nf.sqrt();
    let scaled: Vec<f64> = stats.endpoints.iter().map(|e| e / norm).collect();
    let ks = stats::ks_statistic(&scaled, stats::rayleigh_cdf);
    Ok(AsymptoticsReport { n, y: stats.y, p_hat: row.p_hat, survivors: row.survivors, ratio, ratio_se, ks })
}

/// Survival on a grid ending at `n`, then [`asymptotics_from_stats`].
#[allow(clippy::too_many_arguments)]
pub fn asymptotics_check(
    law: &MatrixLaw,
    start: &ChainStart,
    y: f64,
    n: u64,
    sigma: f64,
    v_hat: Estimate,
    n_paths: u64,
    seed: SeedKey,
) -> Result<AsymptoticsReport> {
    let stats = survival_prob(law, start, y, &[n], n_paths, seed)?;
    asymptotics_from_stats(&stats, sigma, v_hat)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Membership {
    Member,
    NoEvidence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportProbe {
    pub y: f64,
    pub gamma: f64,
    pub verdict: Membership,
    /// Smallest `n₀` at which the event `{y + S_{n₀} > γ, τ_y > n₀}` was seen.
    pub n0: Option<u64>,
    /// Paths witnessing the event at some `n₀ ≤ budget`.
    pub hits: u64,
    pub n_paths: u64,
}

/// Looks for `n₀ ≤ n0_budget` with `{y + S_{n₀} > γ, τ_y > n₀}` observed.
pub fn support_probe(
    law: &MatrixLaw,
    start: &ChainStart,
    y: f64,
    gamma: f64,
    n0_budget: u64,
    n_paths: u64,
    seed: SeedKey,
) -> Result<SupportProbe> {
    let arg = start.argument();
    let (hits, first, err) = parallel::fold_replicas(
        n_paths,
        || (0u64, None::<u64>, None::<Error>),
        |acc, r| {
            if acc.2.is_some() {
                return;
            }
            let mut rng = seed.stream(r);
            let mut w = Walker::from_argument(law, arg.as_slice());
            for n in 1..=n0_budget {
                if let Err(e) = w.step(&mut rng) {
                    acc.2 = Some(e);
                    return;
                }
                let level = y + w.s;
                if level <= 0.0 {
                    return;
                }
                if level > gamma {
                    acc.0 += 1;
                    acc.1 = Some(acc.1.map_or(n, |m| m.min(n)));
                    return;
                }
            }
        },
        |t, p| {
            t.0 += p.0;
            t.1 = match (t.1, p.1) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            if t.2.is_none() {
                t.2 = p.2;
            }
        },
    );
    if let Some(e) = err {
        return Err(e);
    }
    let verdict = if hits > 0 { Membership::Member } else { Membership::NoEvidence };
    Ok(SupportProbe { y, gamma, verdict, n0: first, hits, n_paths })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpDecayReport {
    pub stats: ExitStats,
    /// Slope of `log p̂` against `n` over the nonzero rows.
    pub rate: Option<f64>,
    pub r2: Option<f64>,
    /// First grid time from which every row is zero.
    pub zero_from: Option<u64>,
}

impl ExpDecayReport {
    /// Strictly negative linear decay, or survival vanishing on the grid.
    pub fn consistent(&self) -> bool {
        if self.zero_from.is_some() && self.rate.is_none() {
            return true;
        }
        matches!((self.rate, self.r2), (Some(r), Some(q)) if r < 0.0 && q > 0.9) || self.zero_from.is_some()
    }
}

pub fn exp_decay_check(
    law: &MatrixLaw,
    start: &ChainStart,
    y: f64,
    n_grid: &[u64],
    n_paths: u64,
    seed: SeedKey,
) -> Result<ExpDecayReport> {
    let stats = survival_with_endpoints(law, start, y, n_grid, n_paths, seed, None)?;
    let zero_from = stats
        .rows
        .iter()
        .position(|r| r.survivors == 0)
        .filter(|&i| stats.rows[i..].iter().all(|r| r.survivors == 0))
        .map(|i| stats.rows[i].n);
    let (x, l): (Vec<f64>, Vec<f64>) =
        stats.rows.iter().filter(|r| r.survivors > 0).map(|r| (r.n as f64, r.p_hat.ln())).unzip();
    let fit = stats::linear_fit(&x, &l);
    Ok(ExpDecayReport { rate: fit.map(|f| f.slope), r2: fit.map(|f| f.r2), zero_from, stats })
}

/// Exact `P(τ_y > n)` for `n = 1..=n_max` when increments are i.i.d. with a
/// finite law, by dynamic programming over atom counts.
pub fn exact_survival_discrete(values: &[f64], probs: &[f64], y: f64, n_max: u64) -> Result<Vec<f64>> {
    if values.len() != probs.len() || values.is_empty() {
        return Err(Error::InvalidParameter("values and probabilities must match".into()));
    }
    let mut states: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    states.insert(vec![0; values.len()], 1.0);
    let mut out = Vec::with_capacity(n_max as usize);
    for _ in 0..n_max {
        let mut next: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (counts, p) in &states {
            for (i, q) in probs.iter().enumerate() {
                let mut c = counts.clone();
                c[i] += 1;
                let level = y + c.iter().zip(values).map(|(k, v)| f64::from(*k) * v).sum::<f64>();
                if level > 0.0 {
                    *next.entry(c).or_insert(0.0) += p * q;
                }
            }
        }
        out.push(stats::compensated_sum(next.values().copied()));
        states = next;
    }
    Ok(out)
}

/// [`exact_survival_discrete`] for a one-dimensional law with a discrete or
/// fixed `log|g|`.
pub fn exact_survival_gl1(law: &MatrixLaw, y: f64, n_max: u64) -> Result<Vec<f64>> {
    let shift = law.shift();
    match law.spec() {
        crate::law::LawSpec::Gl1Scalar { log_abs: ScalarLaw::Discrete { values, probs }, .. } => {
            let v: Vec<f64> = values.iter().map(|x| x - shift).collect();
            exact_survival_discrete(&v, probs, y, n_max)
        }
        crate::law::LawSpec::Gl1Scalar { log_abs: ScalarLaw::Fixed { value }, .. } => {
            exact_survival_discrete(&[value - shift], &[1.0], y, n_max)
        }
        _ => Err(Error::Unsupported("exact survival needs a one-dimensional finite law".into())),
    }
}
