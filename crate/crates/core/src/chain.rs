//! The projective Markov chain `X_n = (g_n, G_{n−1} g · ū)` and the walk
//! `S_n = ρ(X_1) + ⋯ + ρ(X_n)`.
//!
//! Only the current direction is stored; matrix products are never formed.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{act, cocycle_rho, GroupElement, ProjPoint, MAX_DIM};
use crate::law::MatrixLaw;
use crate::parallel;
use crate::rng::SeedKey;

/// State of the chain after `step` transitions.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    /// `g_n` (the initial `g` at step 0).
    pub last_g: GroupElement,
    /// `G_{n−1} g · ū` (the initial `ū` at step 0).
    pub direction: ProjPoint,
    pub s_value: f64,
    pub step: u64,
}

impl ChainState {
    /// State holding `x₀ = (g, ū)`.
    pub fn init(g: GroupElement, u: ProjPoint) -> Self {
        ChainState { last_g: g, direction: u, s_value: 0.0, step: 0 }
    }

    /// `g_n · direction`, the argument fed to the next factor.
    pub fn argument(&self) -> ProjPoint {
        act(&self.last_g, &self.direction)
    }

    /// One transition; returns the emitted increment `ρ(X_{n+1})`.
    pub fn step<R: Rng + ?Sized>(&mut self, law: &MatrixLaw, rng: &mut R) -> Result<f64> {
        let arg = self.argument();
        let g = law.sample(rng)?;
        let rho = cocycle_rho(&g, &arg);
        self.last_g = g;
        self.direction = arg;
        self.s_value += rho;
        self.step += 1;
        Ok(rho)
    }
}

/// Allocation-free walker over the chain: keeps only the unit vector
/// `G_n g · ū` and `S_n`.
#[derive(Clone, Debug)]
pub struct Walker<'a> {
    law: &'a MatrixLaw,
    dir: [f64; MAX_DIM],
    pub s: f64,
    pub step: u64,
}

impl<'a> Walker<'a> {
    pub fn new(law: &'a MatrixLaw, start: &ChainStart) -> Self {
        let arg = start.argument();
        Self::from_argument(law, arg.as_slice())
    }

    /// Walker whose next factor acts on `arg` (a unit vector).
    pub fn from_argument(law: &'a MatrixLaw, arg: &[f64]) -> Self {
        let mut dir = [0.0; MAX_DIM];
        dir[..arg.len()].copy_from_slice(arg);
        Walker { law, dir, s: 0.0, step: 0 }
    }

    #[inline]
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64> {
        let d = self.law.dim();
        let rho = self.law.propagate(rng, &mut self.dir[..d])?;
        self.s += rho;
        self.step += 1;
        Ok(rho)
    }

    /// Current direction `G_n g · ū`.
    pub fn direction(&self) -> &[f64] {
        &self.dir[..self.law.dim()]
    }
}

/// Starting point `x₀ = (g, ū)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainStart {
    pub g: GroupElement,
    pub u: ProjPoint,
}

impl ChainStart {
    pub fn new(g: GroupElement, u: ProjPoint) -> Self {
        ChainStart { g, u }
    }

    /// `(Id, e₁)`.
    pub fn canonical(d: usize) -> Result<Self> {
        Ok(ChainStart { g: GroupElement::identity(d)?, u: ProjPoint::basis(d, 0)? })
    }

    /// `(Id, ū)` for a given direction.
    pub fn at(u: ProjPoint) -> Result<Self> {
        Ok(ChainStart { g: GroupElement::identity(u.dim())?, u })
    }

    pub fn argument(&self) -> ProjPoint {
        act(&self.g, &self.u)
    }
}

/// One recorded transition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub step: u64,
    pub rho: f64,
    pub s: f64,
    pub direction: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkPath {
    pub master_seed: u64,
    pub replica: u64,
    pub records: Vec<PathRecord>,
}

/// Per-step aggregates over replicas.
#[derive(Clone, Debug, PartialEq)]
pub struct PathRun {
    pub n_paths: u64,
    /// `mean[n-1]` is the mean of `S_n`.
    pub mean: Vec<f64>,
    /// Unbiased variance of `S_n` across replicas.
    pub variance: Vec<f64>,
    pub paths: Vec<WalkPath>,
}

/// Running mean and sum of squared deviations, merged with Chan's rule.
#[derive(Clone, Debug, Default)]
struct Moments {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Moments { n: 0.0, mean: vec![0.0; len], m2: vec![0.0; len] }
    }

    fn push(&mut self, xs: &[f64]) {
        self.n += 1.0;
        for ((m, q), x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(xs) {
            let delta = x - *m;
            *m += delta / self.n;
            *q += delta * (x - *m);
        }
    }

    fn merge(&mut self, other: Moments) {
        if other.n == 0.0 {
            return;
        }
        if self.n == 0.0 {
            *self = other;
            return;
        }
        let n = self.n + other.n;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * other.n / n;
            self.m2[i] += other.m2[i] + delta * delta * self.n * other.n / n;
        }
        self.n = n;
    }
}

/// Simulate `n_paths` replicas of `n_steps` transitions from `start`.
///
/// Replica `k` draws from `seed.stream(k)`.
pub fn run_paths(
    law: &MatrixLaw,
    start: &ChainStart,
    n_steps: u64,
    n_paths: u64,
    seed: SeedKey,
    keep_paths: bool,
) -> Result<PathRun> {
    let len = n_steps as usize;
    let arg = start.argument();
    let acc = parallel::fold_replicas(
        n_paths,
        || (Moments::new(len), Vec::new(), None),
        |(mom, paths, err): &mut (Moments, Vec<WalkPath>, Option<crate::Error>), r| {
            if err.is_some() {
                return;
            }
            let mut rng = seed.stream(r);
            let mut w = Walker::from_argument(law, arg.as_slice());
            let mut s_values = Vec::with_capacity(len);
            let mut records = Vec::new();
            for _ in 0..n_steps {
                match w.step(&mut rng) {
                    Ok(rho) => {
                        s_values.push(w.s);
                        if keep_paths {
                            records.push(PathRecord { step: w.step, rho, s: w.s, direction: w.direction().to_vec() });
                        }
                    }
                    Err(e) => {
                        *err = Some(e);
                        return;
                    }
                }
            }
            mom.push(&s_values);
            if keep_paths {
                paths.push(WalkPath { master_seed: seed.value(), replica: r, records });
            }
        },
        |total, (mom, mut paths, err)| {
            if total.2.is_none() {
                total.2 = err;
            }
            total.0.merge(mom);
            total.1.append(&mut paths);
        },
    );
    let (mom, paths, err) = acc;
    if let Some(e) = err {
        return Err(e);
    }
    let variance = if mom.n > 1.0 { mom.m2.iter().map(|q| q / (mom.n - 1.0)).collect() } else { vec![f64::NAN; len] };
    Ok(PathRun { n_paths, mean: mom.mean, variance, paths })
}

/// Path dump with columns `replica, step, rho, s, dir_0, …`.
pub fn write_paths_csv<W: Write>(out: W, paths: &[WalkPath]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(out);
    let d = paths.iter().flat_map(|p| p.records.first()).map(|r| r.direction.len()).next().unwrap_or(0);
    write!(out, "replica,step,rho,s")?;
    for i in 0..d {
        write!(out, ",dir_{i}")?;
    }
    writeln!(out)?;
    for p in paths {
        for r in &p.records {
            write!(out, "{},{},{:e},{:e}", p.replica, r.step, r.rho, r.s)?;
            for x in &r.direction {
                write!(out, ",{x:e}")?;
            }
            writeln!(out)?;
        }
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::{preset, LawSpec};
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn law(name: &str) -> MatrixLaw {
        MatrixLaw::new(preset(name).unwrap()).unwrap()
    }

    fn single(m: Vec<Vec<f64>>) -> MatrixLaw {
        MatrixLaw::new(LawSpec::single(m, 1.0)).unwrap()
    }

    #[test]
    fn init_keeps_g_and_u_apart() {
        let g = GroupElement::diagonal(&[2.0, 0.5]).unwrap();
        let e2 = ProjPoint::basis(2, 1).unwrap();
        let s = ChainState::init(g.clone(), e2.clone());
        assert_eq!(s.last_g, g);
        assert_eq!(s.direction, e2);
        assert_eq!(s.argument(), e2);
        assert_eq!(ChainState::init(g, e2.clone()), s);
    }

    #[test]
    fn identity_law_keeps_state() {
        let l = single(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let u = ProjPoint::from_angle(0.4);
        let mut s = ChainState::init(GroupElement::identity(2).unwrap(), u.clone());
        let mut rng = SeedKey::new(1).stream(0);
        for _ in 0..10 {
            assert_eq!(s.step(&l, &mut rng).unwrap(), 0.0);
        }
        assert_eq!(s.s_value, 0.0);
        assert_relative_eq!(s.direction.rep(), u.rep(), epsilon = 1e-15);
    }

    #[test]
    fn fixed_diagonal_grows_like_log2() {
        let l = single(vec![vec![2.0, 0.0], vec![0.0, 0.5]]);
        let start = ChainStart::canonical(2).unwrap();
        let mut w = Walker::new(&l, &start);
        let mut rng = SeedKey::new(2).stream(0);
        for _ in 0..100 {
            w.step(&mut rng).unwrap();
        }
        assert_relative_eq!(w.s, 100.0 * 2f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn gl1_walk_sums_logs() {
        let l = law("SRW1");
        let mut s = ChainState::init(GroupElement::identity(1).unwrap(), ProjPoint::basis(1, 0).unwrap());
        let mut rng = SeedKey::new(3).stream(0);
        let mut total = 0.0;
        for _ in 0..200 {
            let rho = s.step(&l, &mut rng).unwrap();
            assert!(rho == 1.0 || rho == -1.0);
            total += rho;
        }
        assert_eq!(s.s_value, total);
    }

    #[test]
    fn walker_matches_explicit_products() {
        let l = law("FIN2").recenter(0.1).unwrap();
        let g0 = GroupElement::from_row_slice(2, &[1.0, 0.3, -0.2, 0.9]).unwrap();
        let u = ProjPoint::from_angle(0.8);
        let start = ChainStart::new(g0.clone(), u.clone());
        let mut rng = SeedKey::new(4).stream(0);
        let mut state = ChainState::init(g0.clone(), u.clone());
        let mut rng2 = SeedKey::new(4).stream(0);
        let mut w = Walker::new(&l, &start);
        let mut product = g0.entries().clone();
        let v = u.rep().clone();
        let base = (&product * &v).norm();
        for _ in 0..30 {
            let rho_state = state.step(&l, &mut rng).unwrap();
            let rho_walk = w.step(&mut rng2).unwrap();
            assert_relative_eq!(rho_state, rho_walk, epsilon = 1e-12);
            product = state.last_g.entries() * product;
            let explicit = ((&product * &v).norm() / base).ln();
            assert!((w.s - explicit).abs() < 1e-6);
        }
        let dir = DVector::from_column_slice(w.direction());
        assert_relative_eq!(state.argument().rep(), &dir, epsilon = 1e-10);
    }

    #[test]
    fn run_paths_is_deterministic_and_centered() {
        let l = law("SRW1");
        let start = ChainStart::canonical(1).unwrap();
        let a = run_paths(&l, &start, 1000, 4000, SeedKey::new(5), false).unwrap();
        let b = run_paths(&l, &start, 1000, 4000, SeedKey::new(5), false).unwrap();
        assert_eq!(a, b);
        let n = 1000.0;
        assert!(a.mean[999].abs() <= 3.0 * (n / 4000.0f64).sqrt());
        assert!((a.variance[999] / n - 1.0).abs() < 0.1);
        let empty = run_paths(&l, &start, 0, 1, SeedKey::new(5), true).unwrap();
        assert!(empty.mean.is_empty());
        assert!(empty.paths[0].records.is_empty());
    }

    #[test]
    fn path_csv_has_direction_columns() {
        let l = law("DIAGROT2");
        let run = run_paths(&l, &ChainStart::canonical(2).unwrap(), 3, 2, SeedKey::new(6), true).unwrap();
        let mut buf = Vec::new();
        write_paths_csv(&mut buf, &run.paths).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("replica,step,rho,s,dir_0,dir_1"));
        assert_eq!(lines.count(), 6);
    }

    #[test]
    fn s_value_tracks_increments_over_long_runs() {
        let l = law("LOGN1");
        let mut w = Walker::new(&l, &ChainStart::canonical(1).unwrap());
        let mut rng = SeedKey::new(7).stream(0);
        let mut incs = Vec::new();
        for _ in 0..10_000 {
            incs.push(w.step(&mut rng).unwrap());
        }
        let total = crate::stats::compensated_sum(incs);
        assert!((w.s - total).abs() <= 1e-9);
    }
}
