//! Stage pipeline: law → recenter → ergodic → banach / spectral / conditioned.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, Stage, SCHEMA_VERSION};
use super::metrics::{evaluate, flag, Check, Record, Rule};
use crate::banach::{self, SamplePlan, TestFunction};
use crate::chain::ChainStart;
use crate::conditioned::{self, Membership};
use crate::ergodic;
use crate::error::{Error, Result};
use crate::geometry::cocycle_rho;
use crate::law::{LawSpec, MatrixLaw};
use crate::rng::SeedKey;
use crate::spectral;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub name: String,
    pub status: StageStatus,
    pub detail: String,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub code_version: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub stages: Vec<StageOutcome>,
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<Check>,
    pub all_passed: bool,
    /// Hash over every artifact's path and checksum; timing is excluded.
    pub output_digest: String,
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub preset: String,
    pub master_seed: u64,
    pub records: Vec<Record>,
    pub checks: Vec<Check>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    label: String,
    out: PathBuf,
    master: SeedKey,
    records: Vec<Record>,
    checks: Vec<Check>,
    artifacts: Vec<String>,
}

impl Ctx<'_> {
    fn record(&mut self, name: &str, value: f64, se: f64, budget: u64, seed: SeedKey) {
        self.records.push(Record {
            estimator: name.into(),
            preset: self.label.clone(),
            value,
            se,
            budget,
            seed: seed.value(),
        });
    }

    fn check(&mut self, stage: &str, name: &str, rule: Rule) {
        self.checks.push(Check { name: name.into(), stage: stage.into(), rule, passed: false });
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.out.join(name), bytes).map_err(|e| io_err(name, e))?;
        self.artifacts.push(name.into());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        self.write(name, text.as_bytes())
    }

    fn seed(&self, stage: &str) -> SeedKey {
        self.master.derive(stage)
    }
}

fn io_err(name: &str, e: std::io::Error) -> Error {
    Error::InvalidParameter(format!("cannot write {name}: {e}"))
}

fn fmt_name(prefix: &str, x: f64) -> String {
    format!("{prefix}{x}")
}

/// Executes the configured stages into `out` and writes the manifest.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| io_err(&out.display().to_string(), e))?;
    let mut ctx = Ctx {
        cfg,
        label: cfg.label(),
        out: out.to_path_buf(),
        master: SeedKey::new(cfg.master_seed),
        records: Vec::new(),
        checks: Vec::new(),
        artifacts: Vec::new(),
    };
    let config_text = cfg.to_toml();
    ctx.write("config.toml", config_text.as_bytes())?;
    let mut stages = Vec::new();

    let t0 = Instant::now();
    let law = law_stage(&mut ctx);
    stages.push(outcome("law", &law, t0));
    let law = law.ok();

    let t0 = Instant::now();
    let centered = match &law {
        Some(l) => {
            let r = recenter_stage(&mut ctx, l);
            stages.push(outcome("recenter", &r, t0));
            r.ok()
        }
        None => {
            stages.push(skipped("recenter", "law stage failed"));
            None
        }
    };

    let mut selected = cfg.stages.clone();
    selected.sort();
    selected.dedup();
    for stage in selected {
        let name = stage.name();
        let Some(law) = &centered else {
            stages.push(skipped(name, "law or recenter stage failed"));
            continue;
        };
        let t0 = Instant::now();
        let r = match stage {
            Stage::Ergodic => ergodic_stage(&mut ctx, law),
            Stage::Banach => banach_stage(&mut ctx, law),
            Stage::Spectral => spectral_stage(&mut ctx, law),
            Stage::Conditioned => conditioned_stage(&mut ctx, law),
        };
        stages.push(outcome(name, &r, t0));
    }
    for s in &stages {
        if s.status == StageStatus::Failed {
            let rec = format!("{}.completed", s.name);
            ctx.record(&rec, 0.0, 0.0, 0, ctx.master);
            ctx.check(&s.name, &rec, Rule::Flag { record: rec.clone() });
        }
    }
    for c in &mut ctx.checks {
        c.passed = evaluate(&c.rule, &ctx.records);
    }
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        preset: ctx.label.clone(),
        master_seed: cfg.master_seed,
        records: ctx.records.clone(),
        checks: ctx.checks.clone(),
    };
    ctx.write_json(SUMMARY_FILE, &summary)?;
    let artifacts = ctx
        .artifacts
        .iter()
        .map(|p| {
            let bytes = fs::read(out.join(p)).map_err(|e| io_err(p, e))?;
            Ok(Artifact { path: p.clone(), sha256: sha256_hex(&bytes) })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        code_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: sha256_hex(config_text.as_bytes()),
        master_seed: cfg.master_seed,
        stages,
        output_digest: digest(&artifacts),
        all_passed: ctx.checks.iter().all(|c| c.passed),
        checks: ctx.checks,
        artifacts,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    fs::write(out.join(MANIFEST_FILE), text).map_err(|e| io_err(MANIFEST_FILE, e))?;
    Ok(manifest)
}

pub fn digest(artifacts: &[Artifact]) -> String {
    let mut h = Sha256::new();
    for a in artifacts {
        h.update(a.path.as_bytes());
        h.update([0]);
        h.update(a.sha256.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

fn outcome<T>(name: &str, r: &Result<T>, t0: Instant) -> StageOutcome {
    let (status, detail) = match r {
        Ok(_) => (StageStatus::Ok, String::new()),
        Err(e) => (StageStatus::Failed, e.to_string()),
    };
    StageOutcome { name: name.into(), status, detail, wall_seconds: t0.elapsed().as_secs_f64() }
}

fn skipped(name: &str, why: &str) -> StageOutcome {
    StageOutcome { name: name.into(), status: StageStatus::Skipped, detail: why.into(), wall_seconds: 0.0 }
}

const MOMENT_SAMPLES: u64 = 20_000;

fn law_stage(ctx: &mut Ctx) -> Result<MatrixLaw> {
    let spec = ctx.cfg.law_spec()?;
    let law = MatrixLaw::new(spec)?;
    let seed = ctx.seed("law");
    let moment = law.moment_check(MOMENT_SAMPLES, seed)?;
    ctx.record("law.moment", moment.mean, moment.se, MOMENT_SAMPLES, seed);
    ctx.record("law.moment_finite", flag(moment.mean.is_finite()), 0.0, MOMENT_SAMPLES, seed);
    ctx.check("law", "law.moment_finite", Rule::Flag { record: "law.moment_finite".into() });
    let advisory = law.advisories();
    ctx.write_json(
        "law.json",
        &json!({ "spec": law.spec(), "moment": moment, "advisory": advisory, "exact_lyapunov": law.exact_lyapunov() }),
    )?;
    Ok(law)
}

fn recenter_stage(ctx: &mut Ctx, law: &MatrixLaw) -> Result<MatrixLaw> {
    let rc = ctx.cfg.recenter.clone();
    let seed = ctx.seed("recenter");
    if !rc.enabled {
        return Ok(law.clone());
    }
    let d = law.dim();
    let estimate = match law.exact_lyapunov() {
        Some(l) => crate::stats::Estimate::new(l, 0.0),
        None => ergodic::lyapunov_estimate(law, &ChainStart::canonical(d)?, rc.burn_in, rc.n_steps, rc.n_paths, seed)?,
    };
    ctx.record("recenter.lyapunov", estimate.value, estimate.se, rc.n_steps * rc.n_paths, seed);
    let centered = law.recenter(estimate.value)?;
    ctx.write_json("recenter.json", &json!({ "lyapunov": estimate, "shift": centered.shift() }))?;
    Ok(centered)
}

fn burn_in(ctx: &Ctx, law: &MatrixLaw) -> Result<u64> {
    let e = &ctx.cfg.ergodic;
    if let Some(b) = e.burn_in {
        return Ok(b);
    }
    if law.dim() < 2 {
        return Ok(ergodic::default_burn_in(None));
    }
    let eps = banach::derive_params(law.delta0())?.eps;
    let c = ergodic::contraction_rate(law, eps, e.contraction_n_max, e.contraction_samples, ctx.master.derive("burn-in"))?;
    // The rate is for d^ε; the distance itself contracts at r^{1/ε} per step.
    Ok(ergodic::default_burn_in(Some(c.r_hat.powf(1.0 / eps))))
}

fn measure_for(ctx: &Ctx, law: &MatrixLaw, seed: SeedKey) -> Result<ergodic::EmpiricalMeasure> {
    let e = &ctx.cfg.ergodic;
    ergodic::stationary_measure(law, &ChainStart::canonical(law.dim())?, burn_in(ctx, law)?, e.n_samples, e.n_replicas, seed)
}

fn ergodic_stage(ctx: &mut Ctx, law: &MatrixLaw) -> Result<()> {
    let e = ctx.cfg.ergodic.clone();
    let seed = ctx.seed("ergodic");
    let d = law.dim();
    let start = ChainStart::canonical(d)?;
    let measure = measure_for(ctx, law, seed.derive("measure"))?;
    let budget = measure.len() as u64;

    let nu_rho = ergodic::lifted_expect(law, &measure, cocycle_rho, seed.derive("centering"))?;
    let lam_se = ctx.records.iter().find(|r| r.estimator == "recenter.lyapunov").map_or(0.0, |r| r.se);
    ctx.record("ergodic.centering", nu_rho.value, nu_rho.se.hypot(lam_se), budget, seed);
    ctx.check("ergodic", "ergodic.centering", Rule::WithinSe { record: "ergodic.centering".into(), target: 0.0, k: 3.0 });

    let growth = ergodic::sigma2_growth(law, &start, &e.growth_grid, e.growth_paths, seed.derive("growth"))?;
    ctx.record("ergodic.sigma2_growth", growth.sigma2.value, growth.sigma2.se, e.growth_paths, seed);
    let cov = ergodic::sigma2_covariance(law, &measure, e.cov_path_len, e.cov_max_lag, e.cov_paths, seed.derive("cov"))?;
    ctx.record("ergodic.sigma2_cov", cov.sigma2.value, cov.sigma2.se, e.cov_paths, seed);
    ctx.check("ergodic", "ergodic.sigma2_positive", Rule::Positive { record: "ergodic.sigma2_growth".into() });
    ctx.check(
        "ergodic",
        "ergodic.sigma2_agree",
        Rule::Agree { a: "ergodic.sigma2_growth".into(), b: "ergodic.sigma2_cov".into(), k: 3.0 },
    );

    let mut growth_csv = String::from("n,variance\n");
    for (n, v) in growth.n_grid.iter().zip(&growth.variances) {
        growth_csv.push_str(&format!("{n},{v:e}\n"));
    }
    ctx.write("sigma2_growth.csv", growth_csv.as_bytes())?;
    let mut cov_csv = String::from("lag,autocov\n");
    for (k, v) in cov.autocov.iter().enumerate() {
        cov_csv.push_str(&format!("{k},{v:e}\n"));
    }
    ctx.write("sigma2_cov.csv", cov_csv.as_bytes())?;

    let mut contraction = None;
    if d >= 2 {
        let res = ergodic::invariance_residuals(law, &measure, seed.derive("invariance"))?;
        for r in &res {
            let name = format!("ergodic.invariance.{}", r.name);
            ctx.record(&name, r.residual, r.se, budget, seed);
            ctx.check("ergodic", &name, Rule::WithinSe { record: name.clone(), target: 0.0, k: 3.0 });
        }
        let params = banach::derive_params(law.delta0())?;
        let c = ergodic::contraction_rate(law, params.eps, e.contraction_n_max, e.contraction_samples, seed.derive("contraction"))?;
        ctx.record("ergodic.contraction_rate", c.r_hat, 0.0, e.contraction_samples, seed);
        ctx.check("ergodic", "ergodic.contraction", Rule::AtMost { record: "ergodic.contraction_rate".into(), bound: 1.0 - 1e-9 });
        let mut csv = String::from("angle\n");
        for a in measure.angles() {
            csv.push_str(&format!("{a:e}\n"));
        }
        ctx.write("stationary_angles.csv", csv.as_bytes())?;
        contraction = Some(c);
    }
    ctx.write_json("ergodic.json", &json!({ "growth": growth, "covariance": cov, "centering": nu_rho, "contraction": contraction }))
}

fn banach_stage(ctx: &mut Ctx, law: &MatrixLaw) -> Result<()> {
    let b = ctx.cfg.banach.clone();
    let seed = ctx.seed("banach");
    let d = law.dim();
    let p = banach::derive_params(law.delta0())?;
    ctx.record("banach.eps", p.eps, 0.0, 0, seed);
    ctx.record("banach.theta", p.theta, 0.0, 0, seed);
    let set = SamplePlan::new(d, b.log_n_max, b.n_points, b.n_pairs, b.n_pairs, seed.derive("plan")).materialize()?;
    let budget = (set.points.len() + set.alpha.len() + set.beta.len()) as u64;

    let e = banach::seminorms(&TestFunction::constant(), &p, &set);
    ctx.record("banach.e.abs_theta", e.est_abs_theta, 0.0, budget, seed);
    ctx.record("banach.e.k_alpha", e.est_k_eps_alpha, 0.0, budget, seed);
    ctx.record("banach.e.k_beta", e.est_k_eps_beta_prime, 0.0, budget, seed);
    ctx.check("banach", "banach.e.abs_theta", Rule::Between { record: "banach.e.abs_theta".into(), lo: 1.0, hi: 1.0 });
    ctx.check("banach", "banach.e.k_alpha", Rule::Between { record: "banach.e.k_alpha".into(), lo: 0.0, hi: 0.0 });
    ctx.check("banach", "banach.e.k_beta", Rule::Between { record: "banach.e.k_beta".into(), lo: 0.0, hi: 0.0 });

    let nt = banach::seminorms(&TestFunction::weight(&p), &p, &set);
    ctx.record("banach.weight.norm", nt.est_norm_b, 0.0, budget, seed);
    ctx.check("banach", "banach.weight.norm", Rule::AtMost { record: "banach.weight.norm".into(), bound: 2f64.powf(p.theta + 2.0) });
    let mut reports = vec![e, nt];
    let mut worst = 0.0f64;
    for &l in &b.truncation_levels {
        let r = banach::seminorms(&TestFunction::truncated_weight(l, &p), &p, &set);
        worst = worst.max(r.est_norm_b);
        reports.push(r);
    }
    ctx.record("banach.truncated_weight.norm_max", worst, 0.0, budget, seed);
    ctx.check(
        "banach",
        "banach.truncated_weight.norm",
        Rule::AtMost { record: "banach.truncated_weight.norm_max".into(), bound: 2f64.powf(2.0 * p.theta + 3.0) },
    );
    let mut witnesses = String::new();
    for r in &reports {
        let csv = banach::witnesses_csv(r, &set);
        for line in csv.lines().skip(usize::from(!witnesses.is_empty())) {
            witnesses.push_str(line);
            witnesses.push('\n');
        }
    }
    ctx.write("seminorm_witnesses.csv", witnesses.as_bytes())?;

    let mut twisted = Vec::new();
    for h in [TestFunction::constant(), TestFunction::weight(&p), TestFunction::truncated_weight(4, &p)] {
        for &t in &b.t_grid {
            let r = banach::check_twisted_bounds(&h, t, &p, &set);
            let name = format!("banach.twist.{}.t{}", h.name, t);
            ctx.record(&name, flag(r.all_hold()), r.worst_slack, budget, seed);
            ctx.check("banach", &name, Rule::Flag { record: name.clone() });
            twisted.push(r);
        }
    }

    let measure = measure_for(ctx, law, seed.derive("measure"))?;
    let decay = banach::check_truncated_decay(law, &measure, &p, &b.truncation_levels, seed.derive("decay"))?;
    let mut csv = String::from("l,value,se\n");
    for (l, v) in decay.l_grid.iter().zip(&decay.values) {
        csv.push_str(&format!("{l},{:e},{:e}\n", v.value, v.se));
    }
    ctx.write("truncated_weight_decay.csv", csv.as_bytes())?;
    ctx.record("banach.decay.slope", decay.slope.unwrap_or(f64::NAN), 0.0, measure.len() as u64, seed);
    ctx.record("banach.decay.pass", flag(decay.passes(b.decay_slope_max)), 0.0, measure.len() as u64, seed);
    ctx.check("banach", "banach.decay", Rule::Flag { record: "banach.decay.pass".into() });

    let pset = SamplePlan::new(d, b.log_n_max.min(1.0), b.power_points, b.power_points, b.power_points, seed.derive("power-plan"))
        .materialize()?;
    let mut power = Vec::new();
    let mut funcs = vec![(TestFunction::constant(), 0.5), (TestFunction::weight(&p), 0.5)];
    if d >= 2 {
        funcs.push((TestFunction::projective_oscillation(), 0.0));
    }
    let r_eps = 0.9;
    for (h, t) in funcs {
        let r = banach::check_power_bounds(law, &h, t, &b.power_grid, &p, r_eps, &pset, b.power_paths, seed.derive("power"))?;
        let name = format!("banach.power.{}", h.name);
        ctx.record(&name, flag(r.all_hold()), r.c_eps, b.power_paths, seed);
        ctx.check("banach", &name, Rule::Flag { record: name.clone() });
        power.push(r);
    }
    ctx.write_json("banach.json", &json!({ "params": p, "seminorms": reports, "twisted": twisted, "decay": decay, "power": power }))
}

fn spectral_supported(law: &MatrixLaw) -> bool {
    law.dim() == 1 || (law.dim() == 2 && matches!(law.spec(), LawSpec::FiniteSupport { .. }))
}

fn spectral_stage(ctx: &mut Ctx, law: &MatrixLaw) -> Result<()> {
    if !spectral_supported(law) {
        return ctx.write_json("spectral.json", &json!({ "supported": false }));
    }
    let s = ctx.cfg.spectral.clone();
    let seed = ctx.seed("spectral");
    let m = if law.dim() == 1 { 1 } else { s.m };
    let q0 = spectral::assemble(law, m, 0.0)?;
    ctx.record("spectral.row_sum_defect", q0.row_sum_defect(), 0.0, m as u64, seed);
    ctx.check("spectral", "spectral.stochastic", Rule::AtMost { record: "spectral.row_sum_defect".into(), bound: 1e-14 });
    let spec0 = q0.spectrum()?;
    let lead = spec0.leading();
    ctx.record("spectral.leading_defect", (lead - 1.0).norm(), 0.0, m as u64, seed);
    ctx.check("spectral", "spectral.leading", Rule::AtMost { record: "spectral.leading_defect".into(), bound: 1e-10 });
    let mut spectra = vec![spec0.clone()];
    if law.dim() == 2 {
        let fine = spectral::assemble(law, 2 * m, 0.0)?.spectrum()?;
        ctx.record("spectral.gap", spec0.gap, 0.0, m as u64, seed);
        ctx.record("spectral.gap_refined", fine.gap, 0.0, 2 * m as u64, seed);
        ctx.record("spectral.gap_shift", (fine.gap - spec0.gap).abs(), 0.0, 2 * m as u64, seed);
        ctx.check("spectral", "spectral.gap", Rule::AtLeast { record: "spectral.gap".into(), bound: 0.01 });
        ctx.check("spectral", "spectral.gap_stable", Rule::AtMost { record: "spectral.gap_shift".into(), bound: 0.02 });
        spectra.push(fine);

        let measure = ergodic::stationary_measure(
            law,
            &ChainStart::canonical(2)?,
            burn_in(ctx, law)?,
            s.tv_samples,
            s.tv_replicas,
            seed.derive("measure"),
        )?;
        let grid = q0.stationary()?;
        let mc = measure.hat_projection(m);
        let tv = spectral::tv_distance(&grid, &mc);
        ctx.record("spectral.tv", tv, 0.0, measure.len() as u64, seed);
        ctx.check("spectral", "spectral.tv", Rule::AtMost { record: "spectral.tv".into(), bound: 0.05 });
        let mut csv = String::from("node,grid,monte_carlo\n");
        for (j, (a, b)) in grid.iter().zip(&mc).enumerate() {
            csv.push_str(&format!("{j},{a:e},{b:e}\n"));
        }
        ctx.write("stationary_grid.csv", csv.as_bytes())?;
    }
    let mut bounds = Vec::new();
    for &t in &s.t_grid {
        let q = spectral::assemble(law, m, t)?;
        let pb = q.power_bound(s.power_n_max)?;
        let name = fmt_name("spectral.radius.t", t);
        ctx.record(&name, pb.spectral_radius, 0.0, m as u64, seed);
        ctx.check("spectral", &name, Rule::AtMost { record: name.clone(), bound: 1.0 - 1e-12 });
        spectra.push(q.spectrum()?);
        bounds.push(pb);
    }
    let mut csv = String::from("m,t,index,re,im\n");
    for sp in &spectra {
        for (i, (re, im)) in sp.eigenvalues.iter().enumerate() {
            csv.push_str(&format!("{},{},{i},{re:e},{im:e}\n", sp.m, sp.t));
        }
    }
    ctx.write("eigenvalues.csv", csv.as_bytes())?;
    let gaps: Vec<_> = spectra.iter().map(|s| json!({ "m": s.m, "t": s.t, "gap": s.gap })).collect();
    ctx.write_json("spectral.json", &json!({ "supported": true, "spectra": gaps, "power_bounds": bounds }))
}

fn conditioned_stage(ctx: &mut Ctx, law: &MatrixLaw) -> Result<()> {
    let c = ctx.cfg.conditioned.clone();
    let e = ctx.cfg.ergodic.clone();
    let seed = ctx.seed("conditioned");
    let start = ChainStart::canonical(law.dim())?;
    let grid = conditioned::doubling_grid(1, c.n_max);
    let n_top = *grid.last().expect("n_max >= 2");

    let growth = ergodic::sigma2_growth(law, &start, &e.growth_grid, e.growth_paths, seed.derive("sigma"))?;
    let sigma = growth.sigma2.value.max(0.0).sqrt();
    ctx.record("conditioned.sigma2", growth.sigma2.value, growth.sigma2.se, e.growth_paths, seed);

    let mut harmonic = Vec::new();
    let mut monotone_y = true;
    let mut prev: Option<conditioned::ExitStats> = None;
    let mut ys = c.y_grid.clone();
    ys.sort_by(f64::total_cmp);
    for &y in &ys {
        let st = conditioned::survival_with_endpoints(law, &start, y, &grid, c.n_paths, seed.derive("survival"), None)?;
        let mut csv = Vec::new();
        st.write_csv(&mut csv).map_err(|e| io_err("survival", e))?;
        ctx.write(&format!("survival_y{y}.csv"), &csv)?;
        let name = fmt_name("conditioned.monotone_n.y", y);
        ctx.record(&name, flag(st.is_monotone()), 0.0, c.n_paths, seed);
        ctx.check("conditioned", &name, Rule::Flag { record: name.clone() });
        if let Some(p) = &prev {
            monotone_y &= p.rows.iter().zip(&st.rows).all(|(a, b)| a.survivors <= b.survivors);
        }
        let h = conditioned::harmonic_from_stats(&st);
        let v = h.value.unwrap_or(crate::stats::Estimate::new(f64::NAN, f64::NAN));
        let name = fmt_name("conditioned.harmonic.y", y);
        ctx.record(&name, v.value, v.se, c.n_paths, seed);
        ctx.check("conditioned", &format!("{name}.plateau"), Rule::AtLeast { record: name.clone(), bound: 0.0 });
        harmonic.push(h);
        prev = Some(st);
    }
    ctx.record("conditioned.monotone_y", flag(monotone_y), 0.0, c.n_paths, seed);
    ctx.check("conditioned", "conditioned.monotone_y", Rule::Flag { record: "conditioned.monotone_y".into() });

    let fit: Vec<(f64, f64)> = harmonic.iter().filter_map(|h| h.value.map(|v| (h.y, v.value))).collect();
    let c_hat = conditioned::fit_sandwich_constant(&fit, 0.5);
    ctx.record("conditioned.sandwich_constant", c_hat, 0.0, c.n_paths, seed);

    let ay = c.asymptotic_y * sigma;
    ctx.record("conditioned.asymptotic_offset", ay, 0.0, c.asymptotic_paths, seed);
    let st = conditioned::survival_prob(law, &start, ay, &grid, c.asymptotic_paths, seed.derive("asymptotic"))?;
    let h = conditioned::harmonic_from_stats(&st);
    let slope = st.slope((n_top / 16).max(2), n_top).map_or(f64::NAN, |f| f.slope);
    ctx.record("conditioned.survival_slope", slope, 0.0, c.asymptotic_paths, seed);
    ctx.check("conditioned", "conditioned.survival_slope", Rule::Between { record: "conditioned.survival_slope".into(), lo: -0.55, hi: -0.45 });
    let v = h.value.unwrap_or(crate::stats::Estimate::new(f64::NAN, f64::NAN));
    ctx.record("conditioned.harmonic_asymptotic", v.value, v.se, c.asymptotic_paths, seed);
    let inside = h.value.is_some_and(|v| conditioned::sandwich_holds(ay, v.value, 0.5, c_hat));
    ctx.record("conditioned.sandwich", flag(inside), 0.0, c.asymptotic_paths, seed);
    ctx.check("conditioned", "conditioned.sandwich", Rule::Flag { record: "conditioned.sandwich".into() });
    let survivors = st.row(n_top).map_or(0, |r| r.survivors);
    ctx.record("conditioned.survivors", survivors as f64, 0.0, c.asymptotic_paths, seed);
    ctx.check(
        "conditioned",
        "conditioned.survivors",
        Rule::AtLeast { record: "conditioned.survivors".into(), bound: conditioned::MIN_SURVIVORS as f64 },
    );
    let asym = h.value.map(|v| conditioned::asymptotics_from_stats(&st, sigma, v));
    let (ratio, ratio_se, ks) = match &asym {
        Some(Ok(a)) => (a.ratio, a.ratio_se, a.ks),
        _ => (f64::NAN, f64::NAN, f64::NAN),
    };
    ctx.record("conditioned.ratio", ratio, ratio_se, c.asymptotic_paths, seed);
    ctx.check("conditioned", "conditioned.ratio", Rule::Between { record: "conditioned.ratio".into(), lo: 0.9, hi: 1.1 });
    ctx.record("conditioned.ks", ks, 0.0, survivors, seed);
    ctx.check("conditioned", "conditioned.ks", Rule::AtMost { record: "conditioned.ks".into(), bound: 0.05 });
    let mut csv = Vec::new();
    st.write_csv(&mut csv).map_err(|e| io_err("survival", e))?;
    ctx.write("survival_asymptotic.csv", &csv)?;
    let mut csv = Vec::new();
    st.write_endpoints_csv(&mut csv).map_err(|e| io_err("endpoints", e))?;
    ctx.write("endpoints.csv", &csv)?;

    let mut probes = Vec::new();
    let mut agree = true;
    let mut monotone_gamma = true;
    let mut gammas = c.gamma_grid.clone();
    gammas.sort_by(f64::total_cmp);
    for h in &harmonic {
        let positive = h.value.is_some_and(|v| v.value > 0.0);
        let mut last_member = true;
        for &g in &gammas {
            let p = conditioned::support_probe(law, &start, h.y, g, c.probe_budget, c.probe_paths, seed.derive("probe"))?;
            let member = p.verdict == Membership::Member;
            agree &= member == positive;
            monotone_gamma &= last_member || !member;
            last_member = member;
            probes.push(p);
        }
    }
    ctx.record("conditioned.support_agree", flag(agree), 0.0, c.probe_paths, seed);
    ctx.check("conditioned", "conditioned.support_agree", Rule::Flag { record: "conditioned.support_agree".into() });
    ctx.record("conditioned.support_monotone", flag(monotone_gamma), 0.0, c.probe_paths, seed);
    ctx.check("conditioned", "conditioned.support_monotone", Rule::Flag { record: "conditioned.support_monotone".into() });

    let mut decay = None;
    if let Some(m) = law.rho_bound() {
        let y = -m - 0.5;
        let r = conditioned::exp_decay_check(law, &start, y, &[1, 2, 4], c.probe_paths, seed.derive("outside"))?;
        let p1 = r.stats.rows[0].p_hat;
        ctx.record("conditioned.outside_survival", p1, 0.0, c.probe_paths, seed);
        ctx.check("conditioned", "conditioned.outside_survival", Rule::AtMost { record: "conditioned.outside_survival".into(), bound: 0.0 });
        let hv = conditioned::harmonic_from_stats(&r.stats).value.map_or(f64::NAN, |v| v.value);
        ctx.record("conditioned.outside_harmonic", hv, 0.0, c.probe_paths, seed);
        ctx.check("conditioned", "conditioned.outside_harmonic", Rule::Between { record: "conditioned.outside_harmonic".into(), lo: 0.0, hi: 0.0 });
        decay = Some(r);
    }
    let asym = asym.and_then(|r| r.ok());
    ctx.write_json(
        "conditioned.json",
        &json!({ "harmonic": harmonic, "asymptotic": asym, "probes": probes, "outside": decay.map(|d| json!({ "rate": d.rate, "zero_from": d.zero_from })) }),
    )
}
