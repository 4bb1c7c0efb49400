//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use cocycle_lab::banach::{self, SamplePlan, TestFunction};
use cocycle_lab::chain::ChainStart;
use cocycle_lab::conditioned::{self, Membership};
use cocycle_lab::ergodic;
use cocycle_lab::geometry::{act, angular_dist, check_pointwise_lipschitz, cocycle_rho, GroupElement, ProjPoint};
use cocycle_lab::law::{preset, rotation_law, LawSpec, MatrixLaw, ScalarLaw, PRESET_NAMES};
use cocycle_lab::orchestrator::{self, ExperimentConfig, Stage};
use cocycle_lab::spectral;
use cocycle_lab::stats::{self, Estimate};
use cocycle_lab::SeedKey;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn law(name: &str) -> MatrixLaw {
    MatrixLaw::new(preset(name).unwrap()).unwrap()
}

/// The preset, recentered by its exact exponent or a long-run estimate.
fn centered(name: &str) -> (MatrixLaw, Estimate) {
    let l = law(name);
    let lam = match l.exact_lyapunov() {
        Some(x) => Estimate::new(x, 0.0),
        None => ergodic::lyapunov_estimate(&l, &ChainStart::canonical(l.dim()).unwrap(), 500, 50_000, 256, SeedKey::new(900))
            .unwrap(),
    };
    (l.recenter(lam.value).unwrap(), lam)
}

fn random_unit<R: Rng>(d: usize, rng: &mut R) -> ProjPoint {
    let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    ProjPoint::from_slice(&v).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn geometry_suite() -> Outcome {
    const DRAWS: u64 = 100_000;
    const TOL: f64 = 1e-9;
    let mut worst = 0.0f64;
    for name in PRESET_NAMES {
        let l = law(name);
        let d = l.dim();
        let mut rng = SeedKey::new(1).derive(name).stream(0);
        for i in 0..DRAWS {
            let g1 = l.sample(&mut rng).unwrap();
            let g2 = l.sample(&mut rng).unwrap();
            let (u, v, w) = (random_unit(d, &mut rng), random_unit(d, &mut rng), random_unit(d, &mut rng));
            let g12 = g1.compose(&g2).unwrap();
            let lhs = cocycle_rho(&g12, &u);
            let rhs = cocycle_rho(&g1, &act(&g2, &u)) + cocycle_rho(&g2, &u);
            worst = worst.max((lhs - rhs).abs());
            ensure(close(lhs, rhs, TOL), format!("{name} draw {i}: cocycle identity {lhs} vs {rhs}"))?;

            let c = (if rng.random::<bool>() { 1.0 } else { -1.0 }) * 10f64.powf(2.0 * rng.random::<f64>() - 1.0);
            let cg = g1.scaled(c).unwrap();
            ensure(angular_dist(&act(&cg, &u), &act(&g1, &u)) <= TOL, format!("{name} draw {i}: action not scale invariant"))?;
            let (a, b) = (cocycle_rho(&cg, &u), c.abs().ln() + cocycle_rho(&g1, &u));
            ensure(close(a, b, TOL), format!("{name} draw {i}: scalar equivariance {a} vs {b}"))?;

            let (duv, dvu, dvw, duw) = (angular_dist(&u, &v), angular_dist(&v, &u), angular_dist(&v, &w), angular_dist(&u, &w));
            ensure(angular_dist(&u, &u) <= TOL, format!("{name} draw {i}: d(u,u) > 0"))?;
            ensure(duv >= 0.0 && (duv - dvu).abs() <= TOL, format!("{name} draw {i}: symmetry"))?;
            ensure(duw <= duv + dvw + TOL, format!("{name} draw {i}: triangle inequality"))?;

            let rep = check_pointwise_lipschitz(&g1, &g2, &u, &v);
            ensure(rep.all_hold(), format!("{name} draw {i}: Lipschitz bounds {rep:?}"))?;
        }
    }
    Ok(format!("4 presets x {DRAWS} draws, worst cocycle defect {worst:.1e}"))
}

fn ladder_suite() -> Outcome {
    for k in 1..=400 {
        let delta0 = k as f64 * 0.01;
        let p = banach::derive_params(delta0).map_err(|e| e.to_string())?;
        let expected = delta0.min(8.0 / 3.0);
        ensure(p.delta0 == expected, format!("delta0 {delta0}: capped to {} not {expected}", p.delta0))?;
        ensure(p.eps == expected / 8.0, format!("delta0 {delta0}: eps"))?;
        let ulp = |a: f64, b: f64| (a - b).abs() <= 4.0 * f64::EPSILON * b.abs();
        ensure(ulp(p.theta, 3.0 * p.eps), format!("delta0 {delta0}: theta = 3 eps"))?;
        ensure(ulp(p.alpha, p.theta + 2.0 * p.eps), format!("delta0 {delta0}: alpha = theta + 2 eps"))?;
        ensure(ulp(p.beta, p.eps + 2.0 * p.theta), format!("delta0 {delta0}: beta = eps + 2 theta"))?;
        ensure(ulp(p.beta, 7.0 * p.eps), format!("delta0 {delta0}: beta = 7 eps"))?;
        for e0 in [0.01, 0.1, 0.5] {
            let q = banach::derive_params_with_contraction(delta0, Some(e0)).map_err(|e| e.to_string())?;
            ensure(q.delta0 == expected.min(8.0 * e0), format!("delta0 {delta0}, eps0 {e0}: contraction cap"))?;
        }
    }
    ensure(banach::derive_params(0.0).is_err() && banach::derive_params(-1.0).is_err(), "nonpositive delta0 accepted".into())?;
    Ok("400 exponents, identities within 4 ulp, caps 8/3 and 8 eps0 applied".into())
}

/// `P(τ_y > n)` for the simple walk: paths staying above `−y` end in `(−y, y]`.
fn srw_survival(y: i64, n: u64) -> f64 {
    let lgamma = |x: f64| statrs::function::gamma::ln_gamma(x);
    let nf = n as f64;
    (0..=n)
        .filter(|k| {
            let s = 2 * *k as i64 - n as i64;
            -y < s && s <= y
        })
        .map(|k| (lgamma(nf + 1.0) - lgamma(k as f64 + 1.0) - lgamma(nf - k as f64 + 1.0) - nf * 2f64.ln()).exp())
        .sum()
}

fn gl1_oracle() -> Outcome {
    let l = law("SRW1");
    let start = ChainStart::canonical(1).unwrap();
    let mut alive = 0;
    for steps in [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]] {
        let (a, b) = (steps[0], steps[0] + steps[1]);
        alive += u32::from(a > 0.0 && b > 0.0);
    }
    let exact = f64::from(alive) / 4.0;
    ensure(exact == 0.25, format!("enumeration gives {exact}"))?;

    let grid: Vec<u64> = [1u64, 2].into_iter().chain(conditioned::geometric_grid(100, 10_000, 8)).collect();
    let s0 = conditioned::survival_with_endpoints(&l, &start, 0.0, &grid, 1_000_000, SeedKey::new(31), None).unwrap();
    let r2 = s0.row(2).unwrap();
    ensure(r2.ci_lo <= 0.25 && 0.25 <= r2.ci_hi, format!("MC P(tau>2) = {} CI [{}, {}]", r2.p_hat, r2.ci_lo, r2.ci_hi))?;
    let slope = s0.slope(100, 10_000).unwrap().slope;
    ensure((slope + 0.5).abs() <= 0.05, format!("survival slope {slope}"))?;

    let sigma2 = ergodic::sigma2_growth(&l, &start, &[256, 512, 1024, 2048], 8000, SeedKey::new(32)).unwrap().sigma2;
    ensure((sigma2.value - 1.0).abs() <= 0.05, format!("sigma2 {sigma2:?}"))?;

    let hgrid: Vec<u64> = [1u64, 2, 4, 8, 16, 32, 64, 128, 256].into_iter().chain([625, 1250, 2500, 5000, 10_000]).collect();
    let mut detail = Vec::new();
    let mut ratio = f64::NAN;
    for y in [1.0, 5.0, 10.0] {
        let paths = if y == 10.0 { 400_000 } else { 100_000 };
        let st = conditioned::survival_prob(&l, &start, y, &hgrid, paths, SeedKey::new(33)).unwrap();
        let h = conditioned::harmonic_from_stats(&st);
        let v = h.value.ok_or(format!("no plateau at y = {y}"))?;
        ensure(v.within(y, 3.0), format!("V({y}) = {v:?}"))?;
        detail.push(format!("V({y})={:.3}", v.value));
        if y == 10.0 {
            let a = conditioned::asymptotics_from_stats(&st, sigma2.value.sqrt(), v).map_err(|e| e.to_string())?;
            let oracle = srw_survival(10, 10_000);
            let row = st.row(10_000).unwrap();
            ensure(row.ci_lo <= oracle && oracle <= row.ci_hi, format!("P(tau>1e4) {} vs exact {oracle}", row.p_hat))?;
            ratio = a.ratio;
            ensure((0.9..=1.1).contains(&ratio), format!("asymptotic ratio {ratio}"))?;
        }
    }
    Ok(format!(
        "P(tau>2)={:.4}, slope {slope:.3}, sigma2 {:.3}, {}, ratio {ratio:.3}",
        r2.p_hat,
        sigma2.value,
        detail.join(" ")
    ))
}

fn rayleigh_law() -> Outcome {
    let mut out = Vec::new();
    for (name, n, y, paths) in [("SRW1", 4000u64, 2.0, 600_000u64), ("DIAGROT2", 2000, 0.5, 300_000)] {
        let (l, _) = centered(name);
        let start = ChainStart::canonical(l.dim()).unwrap();
        let s2 = ergodic::sigma2_growth(&l, &start, &[128, 256, 512, 1024], 8000, SeedKey::new(41)).unwrap().sigma2;
        let st = conditioned::survival_prob(&l, &start, y, &[n], paths, SeedKey::new(42)).unwrap();
        let survivors = st.endpoints.len();
        ensure(survivors >= 10_000, format!("{name}: only {survivors} survivors"))?;
        let norm = (s2.value * n as f64).sqrt();
        let scaled: Vec<f64> = st.endpoints.iter().map(|e| e / norm).collect();
        let ks = stats::ks_statistic(&scaled, stats::rayleigh_cdf);
        ensure(ks <= 0.05, format!("{name}: KS {ks}"))?;
        out.push(format!("{name} KS {ks:.4} ({survivors} survivors)"));
    }
    Ok(out.join(", "))
}

fn contraction() -> Outcome {
    let eps = banach::derive_params(2.0).unwrap().eps;
    let diag = MatrixLaw::new(LawSpec::single(vec![vec![2.0, 0.0], vec![0.0, 0.5]], 2.0)).unwrap();
    let r = ergodic::contraction_rate(&diag, eps, 30, 2, SeedKey::new(51)).unwrap().r_hat;
    let target = 0.25f64.powf(eps);
    ensure((r - target).abs() <= 0.1 * target, format!("diag r = {r}, target {target}"))?;
    let rot = MatrixLaw::new(rotation_law(ScalarLaw::Uniform { lo: 0.0, hi: TAU })).unwrap();
    let rr = ergodic::contraction_rate(&rot, eps, 20, 50, SeedKey::new(52)).unwrap().r_hat;
    ensure((rr - 1.0).abs() <= 0.01, format!("rotation r = {rr}"))?;
    let rf = ergodic::contraction_rate(&law("FIN2"), eps, 24, 400, SeedKey::new(53)).unwrap().r_hat;
    ensure(rf < 1.0, format!("FIN2 r = {rf}"))?;
    Ok(format!("diag {r:.4} (target {target:.4}), rotation {rr:.4}, FIN2 {rf:.4}"))
}

fn spectral_suite() -> Outcome {
    let (l, _) = centered("FIN2");
    let q = spectral::assemble(&l, 256, 0.0).unwrap();
    let defect = q.row_sum_defect();
    ensure(defect <= 1e-14, format!("row sums off by {defect:e}"))?;
    let s256 = q.spectrum().unwrap();
    let lead = s256.leading();
    ensure((lead - 1.0).norm() <= 1e-10, format!("leading eigenvalue {lead}"))?;
    let s512 = spectral::assemble(&l, 512, 0.0).unwrap().spectrum().unwrap();
    ensure(s256.gap > 0.01, format!("gap {}", s256.gap))?;
    ensure((s512.gap - s256.gap).abs() < 0.02, format!("gap {} -> {}", s256.gap, s512.gap))?;
    let mut radii = Vec::new();
    for t in [0.1, 0.3] {
        let r = spectral::assemble(&l, 256, t).unwrap().power_bound(16).unwrap().spectral_radius;
        ensure(r < 1.0, format!("spectral radius {r} at t = {t}"))?;
        radii.push(r);
    }
    let m = ergodic::stationary_measure(&l, &ChainStart::canonical(2).unwrap(), 200, 1 << 20, 1024, SeedKey::new(61)).unwrap();
    let tv = spectral::tv_distance(&q.stationary().unwrap(), &m.hat_projection(256));
    ensure(tv <= 0.05, format!("TV {tv}"))?;
    Ok(format!(
        "defect {defect:.1e}, gap {:.4} -> {:.4}, radii {:.4} {:.4}, TV {tv:.4}",
        s256.gap, s512.gap, radii[0], radii[1]
    ))
}

/// `E[φ_l(2 cosh ξ) 2 cosh ξ]` for standard normal `ξ`, by Simpson's rule.
fn lognormal_truncated_weight(l: u32) -> f64 {
    let (a, b, n) = (-12.0, 12.0, 24_000);
    let h = (b - a) / n as f64;
    let f = |s: f64| {
        let x = 2.0 * s.cosh();
        let ramp = (x - (f64::from(l) - 1.0)).clamp(0.0, 1.0);
        ramp * x * (-0.5 * s * s).exp() / (2.0 * PI).sqrt()
    };
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

fn banach_suite() -> Outcome {
    let mut worst_nt = 0.0f64;
    for name in PRESET_NAMES {
        let l = law(name);
        let p = banach::derive_params(l.delta0()).unwrap();
        let set = SamplePlan::new(l.dim(), 3.0, 10_000, 10_000, 10_000, SeedKey::new(71).derive(name)).materialize().unwrap();
        let e = banach::seminorms(&TestFunction::constant(), &p, &set);
        ensure(
            (e.est_abs_theta, e.est_k_eps_alpha, e.est_k_eps_beta_prime) == (1.0, 0.0, 0.0),
            format!("{name}: seminorms of e {e:?}"),
        )?;
        let nt = banach::seminorms(&TestFunction::weight(&p), &p, &set);
        let bound = 2f64.powf(p.theta + 2.0);
        ensure(nt.est_norm_b <= bound, format!("{name}: |weight|_B {} > {bound}", nt.est_norm_b))?;
        worst_nt = worst_nt.max(nt.est_norm_b / bound);
        for lv in [1, 2, 4, 8, 16] {
            let r = banach::seminorms(&TestFunction::truncated_weight(lv, &p), &p, &set);
            let bound = 2f64.powf(2.0 * p.theta + 3.0);
            ensure(r.est_norm_b <= bound, format!("{name}: |weight_trunc{lv}|_B {} > {bound}", r.est_norm_b))?;
        }
        for h in [TestFunction::constant(), TestFunction::weight(&p), TestFunction::truncated_weight(4, &p)] {
            for t in [0.1, 0.5, 1.0] {
                let r = banach::check_twisted_bounds(&h, t, &p, &set);
                ensure(r.all_hold(), format!("{name}: twisted bound fails for {} at t = {t}: {r:?}", h.name))?;
            }
        }
    }
    let l = law("LOGN1");
    let p = banach::derive_params(l.delta0()).unwrap();
    let m = ergodic::stationary_measure(&l, &ChainStart::canonical(1).unwrap(), 0, 400_000, 64, SeedKey::new(72)).unwrap();
    let levels = [2, 4, 8, 16];
    let decay = banach::check_truncated_decay(&l, &m, &p, &levels, SeedKey::new(73)).unwrap();
    for (lv, est) in levels.iter().zip(&decay.values) {
        let exact = lognormal_truncated_weight(*lv);
        ensure(est.within(exact, 4.0), format!("nu(weight_trunc{lv}) = {est:?}, quadrature {exact}"))?;
    }
    let slope = decay.slope.ok_or("no decay slope")?;
    ensure(slope <= -1.3, format!("decay slope {slope}"))?;
    Ok(format!("4 presets x 10^4 pairs, max |weight|_B / bound {worst_nt:.3}, LOGN1 decay slope {slope:.3}"))
}

fn centering_suite() -> Outcome {
    let mut out = Vec::new();
    for name in PRESET_NAMES {
        let (l, lam) = centered(name);
        let d = l.dim();
        let start = ChainStart::canonical(d).unwrap();
        let m = ergodic::stationary_measure(&l, &start, 500, 65_536, 256, SeedKey::new(81)).unwrap();
        let nu = ergodic::lifted_expect(&l, &m, cocycle_rho, SeedKey::new(82)).unwrap();
        let se = nu.se.hypot(lam.se);
        ensure(nu.value.abs() <= 3.0 * se, format!("{name}: nu(rho) = {} se {se}", nu.value))?;
        let g = ergodic::sigma2_growth(&l, &start, &[64, 128, 256, 512], 8000, SeedKey::new(83)).unwrap().sigma2;
        let c = ergodic::sigma2_covariance(&l, &m, 600, 60, 1000, SeedKey::new(84)).unwrap().sigma2;
        ensure(g.value > 0.0 && c.value > 0.0, format!("{name}: sigma2 {g:?} {c:?}"))?;
        ensure(g.agrees_with(&c, 3.0), format!("{name}: sigma2 growth {g:?} vs covariance {c:?}"))?;
        out.push(format!("{name} sigma2 {:.4}/{:.4}", g.value, c.value));
    }
    Ok(out.join(", "))
}

fn starts(d: usize) -> Vec<ChainStart> {
    if d == 1 {
        [1.0, 1f64.exp(), (-1f64).exp()]
            .iter()
            .map(|a| ChainStart::new(GroupElement::from_row_slice(1, &[*a]).unwrap(), ProjPoint::basis(1, 0).unwrap()))
            .collect()
    } else {
        vec![
            ChainStart::canonical(2).unwrap(),
            ChainStart::at(ProjPoint::from_angle(1.0)).unwrap(),
            ChainStart::new(GroupElement::diagonal(&[2.0, 0.5]).unwrap(), ProjPoint::from_angle(0.4)),
        ]
    }
}

fn support_suite() -> Outcome {
    let mut cells = 0;
    for name in PRESET_NAMES {
        let (l, _) = centered(name);
        let gammas = [0.5, 1.0, 2.0];
        for (ix, x) in starts(l.dim()).iter().enumerate() {
            for y in [-1.0, 0.5, 2.0] {
                let h = conditioned::harmonic_estimate(&l, x, y, &conditioned::doubling_grid(1, 256), 4000, SeedKey::new(91))
                    .map_err(|e| e.to_string())?;
                let v = h.value.ok_or(format!("{name} x{ix} y={y}: no plateau"))?;
                let mut prev = true;
                for g in gammas {
                    let p = conditioned::support_probe(&l, x, y, g, 200, 2000, SeedKey::new(92)).map_err(|e| e.to_string())?;
                    let member = p.verdict == Membership::Member;
                    ensure(member == (v.value > 0.0), format!("{name} x{ix} y={y} gamma={g}: probe {member}, V = {v:?}"))?;
                    ensure(prev || !member, format!("{name} x{ix} y={y}: membership not monotone in gamma"))?;
                    prev = member;
                }
                cells += 1;
            }
        }
        if let Some(m) = l.rho_bound() {
            let x = ChainStart::canonical(l.dim()).unwrap();
            let y = -m - 0.1;
            let r = conditioned::exp_decay_check(&l, &x, y, &[1, 2, 4, 8], 5000, SeedKey::new(93)).unwrap();
            ensure(r.stats.rows.iter().all(|r| r.survivors == 0), format!("{name}: survival below -M is {:?}", r.stats.rows))?;
            ensure(r.zero_from == Some(1) && r.consistent(), format!("{name}: decay report {:?}", r.zero_from))?;
            let h = conditioned::harmonic_from_stats(&r.stats);
            ensure(h.value.is_some_and(|v| v.value == 0.0), format!("{name}: V below -M is {:?}", h.value))?;
        }
    }
    Ok(format!("{cells} (x, y) cells agree, monotone in gamma, zero survival below -M"))
}

fn determinism() -> Outcome {
    let mut cfg = ExperimentConfig::from_toml("schema_version = 1\npreset = \"FIN2\"\nmaster_seed = 5\n").unwrap();
    cfg.stages = vec![Stage::Ergodic, Stage::Banach, Stage::Spectral, Stage::Conditioned];
    cfg.ergodic.n_samples = 4096;
    cfg.ergodic.growth_paths = 1000;
    cfg.banach.n_points = 200;
    cfg.banach.n_pairs = 200;
    cfg.spectral.m = 64;
    cfg.spectral.tv_samples = 16_384;
    cfg.conditioned.n_paths = 4000;
    cfg.conditioned.asymptotic_paths = 8000;
    cfg.conditioned.n_max = 256;
    let root = tempfile::tempdir().unwrap();
    let mut digests = Vec::new();
    for threads in [1, 8] {
        let dir = root.path().join(format!("t{threads}"));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let m = pool.install(|| orchestrator::run(&cfg, &dir)).map_err(|e| e.to_string())?;
        digests.push((dir, m));
    }
    let (d1, m1) = &digests[0];
    let (d8, m8) = &digests[1];
    ensure(m1.output_digest == m8.output_digest, "output digests differ".into())?;
    for a in &m1.artifacts {
        let (x, y) = (fs::read(d1.join(&a.path)).unwrap(), fs::read(d8.join(&a.path)).unwrap());
        ensure(x == y, format!("{} differs between 1 and 8 threads", a.path))?;
    }
    Ok(format!("{} artifacts byte-identical, digest {}", m1.artifacts.len(), &m1.output_digest[..16]))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("geometry", geometry_suite),
        ("exponent ladder", ladder_suite),
        ("gl1 oracle", gl1_oracle),
        ("rayleigh endpoint law", rayleigh_law),
        ("contraction", contraction),
        ("spectral grid", spectral_suite),
        ("weighted norms", banach_suite),
        ("centering and variance", centering_suite),
        ("support and decay", support_suite),
        ("determinism", determinism),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t0.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("PASS {:>2} {name} ({secs:.1}s): {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {d}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
