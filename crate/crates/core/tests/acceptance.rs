//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N: PASS|FAIL ...` line to stdout (uncaptured) before asserting.

use std::io::Write;
use std::time::{Duration, Instant};

use decoh_core::eta::{
    d_max_analytic, d_max_monte_carlo, estimate_eta, eta_limit, eta_max, lower_bound_g, upper_bound_f,
    DmaxQuery, EtaStatistic,
};
use decoh_core::experiments::{population_grid, run, two_level_instance, ExperimentConfig, ExperimentKind, OVERLAP_GRID};
use decoh_core::interaction::{
    empirical_overlap_variance, fourth_moment, min_abs_gap, min_pairwise_gap, recommended_samples,
    time_averaged_overlap, LatticeEnvironment,
};
use decoh_core::quantum::{
    classicality_gap, entropy_ratio_check, eta_from_linear_entropy, eta_of_state, eta_tilde_squared,
    operator_norm, purity_in_random_basis, reduced_density, split_diagonal, DensityMatrix,
    EnvironmentFamily, SubspaceEvent, SystemAmplitudes, PREFACTOR_BAND,
};
use decoh_core::rng::{derive_seed, run_trials, substream};
use decoh_core::sphere::{
    brownian_evolve, cap_area_ratio, cap_contains, inner_product, mixing_time_estimate,
    sample_haar_unitary, sample_uniform, BrownianConfig, CapSpec, UnitVector,
};
use decoh_core::stats::{beta_1_b_cdf, ks_test, wilson_interval, MeanEstimate, Z_99};
use rand::Rng;

fn report(criterion: u32, pass: bool, detail: &str) {
    let line = format!(
        "criterion {criterion}: {} {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn finish(criterion: u32, failures: &[String], start: Instant, limit: Option<Duration>, summary: &str) {
    let elapsed = start.elapsed();
    let slow = limit.is_some_and(|l| elapsed > l);
    let mut detail = format!("{summary} ({:.1}s)", elapsed.as_secs_f64());
    if slow {
        detail.push_str(&format!(" exceeded {}s", limit.unwrap().as_secs()));
    }
    if !failures.is_empty() {
        detail.push_str(&format!("; failing: {}", failures.join("; ")));
    }
    let pass = failures.is_empty() && !slow;
    report(criterion, pass, &detail);
    assert!(pass, "criterion {criterion}: {detail}");
}

#[test]
fn criterion_01_pair_overlap_variance() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut parts = Vec::new();
    for &n in &[2usize, 10, 100] {
        let xs = run_trials(derive_seed(101, n as u64), 200_000, |rng| {
            let u = sample_uniform(n, rng).unwrap();
            let v = sample_uniform(n, rng).unwrap();
            inner_product(&u, &v).unwrap().norm_sqr()
        });
        let m = MeanEstimate::from_samples(&xs);
        let z = (m.mean - 1.0 / n as f64) / m.std_error;
        parts.push(format!("n={n} z={z:.2}"));
        if z.abs() > 4.0 {
            failures.push(format!("n={n} mean={} z={z:.2}", m.mean));
        }
    }
    finish(1, &failures, start, Some(Duration::from_secs(30)), &parts.join(", "));
}

#[test]
fn criterion_02_haar_unitary_overlap() {
    let start = Instant::now();
    let n = 6;
    let e0 = sample_uniform(n, &mut substream(102, u64::MAX)).unwrap();
    let xs = run_trials(102, 100_000, |rng| {
        let u = sample_haar_unitary(n, rng).unwrap();
        inner_product(&e0, &u.apply(&e0).unwrap()).unwrap().norm_sqr()
    });
    let m = MeanEstimate::from_samples(&xs);
    let z = (m.mean - 1.0 / 6.0) / m.std_error;
    let failures = if z.abs() > 4.0 { vec![format!("mean={} z={z:.2}", m.mean)] } else { vec![] };
    finish(2, &failures, start, Some(Duration::from_secs(60)), &format!("mean={:.5} z={z:.2}", m.mean));
}

#[test]
fn criterion_03_cap_law() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut parts = Vec::new();
    for &(n, eps) in &[(3usize, 0.2), (5, 0.3), (12, 0.5)] {
        let seed = derive_seed(103, n as u64);
        let center = sample_uniform(n, &mut substream(seed, u64::MAX)).unwrap();
        let cap = CapSpec::new(center, eps).unwrap();
        let xs = run_trials(seed, 1_000_000, |rng| {
            let x = sample_uniform(n, rng).unwrap();
            f64::from(u8::from(cap_contains(&cap, &x).unwrap()))
        });
        let m = MeanEstimate::from_samples(&xs);
        let alpha = cap_area_ratio(n, eps).unwrap();
        let z = (m.mean - alpha) / m.std_error;
        parts.push(format!("(n={n}, eps={eps}) z={z:.2}"));
        if z.abs() > 4.0 {
            failures.push(format!("n={n} freq={} alpha={alpha}", m.mean));
        }
    }
    finish(3, &failures, start, Some(Duration::from_secs(60)), &parts.join(", "));
}

#[test]
fn criterion_04_beta_marginal() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut parts = Vec::new();
    for &n in &[2usize, 5, 10, 50] {
        let xs = run_trials(derive_seed(104, n as u64), 50_000, |rng| {
            let u = sample_uniform(n, rng).unwrap();
            let v = sample_uniform(n, rng).unwrap();
            inner_product(&u, &v).unwrap().norm_sqr()
        });
        let ks = ks_test(&xs, |x| beta_1_b_cdf(x, (n - 1) as f64));
        parts.push(format!("n={n} p={:.3}", ks.p_value));
        if !ks.passes(0.01) {
            failures.push(format!("n={n} D={} p={}", ks.statistic, ks.p_value));
        }
    }
    finish(4, &failures, start, None, &parts.join(", "));
}

#[test]
fn criterion_05_bound_sandwich() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut points = 0;
    for &n in &[4usize, 8, 16] {
        for &d in &[2usize, 5, 10, 20] {
            for &eps in &[0.2, 0.4, 0.6, 0.8] {
                let seed = derive_seed(105, ((n as u64) << 32) ^ ((d as u64) << 16) ^ (eps * 10.0) as u64);
                let est = estimate_eta(n, d, EtaStatistic::CdfAt(eps), 5000, seed).unwrap();
                let (lo, hi) = wilson_interval(est.successes.unwrap(), est.trials, Z_99);
                let g = lower_bound_g(n, d, eps).unwrap();
                let f = upper_bound_f(n, d, eps).unwrap();
                points += 1;
                if hi < g || lo > f {
                    failures.push(format!(
                        "(n={n}, d={d}, eps={eps}) CI=[{lo:.4}, {hi:.4}] bounds=[{g:.4}, {f:.4}]"
                    ));
                }
            }
        }
    }
    finish(5, &failures, start, Some(Duration::from_secs(600)), &format!("{points} grid points"));
}

#[test]
fn criterion_06_eta_limit() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for &n in &[10usize, 50] {
        for &d in &[2usize, 5, 10, 50, 100, 500] {
            let seed = derive_seed(106, ((n as u64) << 32) ^ d as u64);
            let est = estimate_eta(n, d, EtaStatistic::Mean, 1000, seed).unwrap();
            let limit = eta_limit(n, d);
            let dev = (est.estimate - limit).abs();
            worst = worst.max(dev);
            if dev >= 0.05 {
                failures.push(format!(
                    "(n={n}, d={d}) mean={:.4} limit={limit:.4} dev={dev:.4}",
                    est.estimate
                ));
            }
        }
    }
    finish(6, &failures, start, Some(Duration::from_secs(900)), &format!("worst deviation {worst:.4}"));
}

#[test]
fn criterion_07_dmax_consistency() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut parts = Vec::new();
    for n in 2usize..=12 {
        let q = DmaxQuery::new(n, 0.4, 0.9).unwrap();
        let mc = d_max_monte_carlo(&q, 2000, derive_seed(107, n as u64)).unwrap();
        let an = d_max_analytic(&q).unwrap();
        parts.push(format!("n={n}:{}/{}", mc.d_max, an.d_max));
        let mut problems = Vec::new();
        if mc.d_max.abs_diff(an.d_max) > 2 {
            problems.push("mc vs analytic differ by more than 2".to_string());
        }
        if !an.in_bracket(an.d_max) {
            problems.push("analytic outside bracket".to_string());
        }
        if !an.in_bracket(mc.d_max) {
            problems.push("mc outside bracket".to_string());
        }
        if !problems.is_empty() {
            failures.push(format!(
                "n={n} mc={} analytic={} bracket=[{}, {}]: {}",
                mc.d_max,
                an.d_max,
                an.bracket_lower,
                an.bracket_upper,
                problems.join(", ")
            ));
        }
    }
    finish(7, &failures, start, Some(Duration::from_secs(600)), &format!("mc/analytic {}", parts.join(" ")));
}

struct Instance {
    rho: DensityMatrix,
    eta: f64,
    event: SubspaceEvent,
}

/// Random `(c, env, F)` with `d ∈ [2, 16]`, `n ∈ [2, 64]`, `dim F ∈ [1, d]`.
fn random_instance(seed: u64, index: u64) -> Instance {
    let mut rng = substream(seed, index);
    let d = rng.random_range(2..=16);
    let n = rng.random_range(2..=64);
    let k = rng.random_range(1..=d);
    let c = SystemAmplitudes::uniform_random(d, &mut rng).unwrap();
    let env = EnvironmentFamily::uniform_random(d, n, &mut rng).unwrap();
    let event = SubspaceEvent::random(d, k, &mut rng).unwrap();
    Instance {
        rho: reduced_density(&c, &env).unwrap(),
        eta: eta_of_state(&c, &env).unwrap(),
        event,
    }
}

const INSTANCE_SEED: u64 = 108;

#[test]
fn criterion_08_classicality_bound() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let inst = random_instance(INSTANCE_SEED, i);
        let gap = classicality_gap(&inst.rho, &inst.event).unwrap();
        let bound = inst.event.dim() as f64 * inst.eta;
        worst = worst.max(gap / bound);
        if gap > bound {
            failures.push(format!("instance {i}: gap {gap} > {bound}"));
        }
    }
    finish(8, &failures, start, None, &format!("1000 instances, max gap/bound {worst:.4}"));
}

#[test]
fn criterion_09_operator_norm_bound() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let inst = random_instance(INSTANCE_SEED, i);
        let (_, off) = split_diagonal(&inst.rho);
        let norm = operator_norm(&off).unwrap();
        worst = worst.max(norm / inst.eta);
        if norm > inst.eta {
            failures.push(format!("instance {i}: norm {norm} > eta {}", inst.eta));
        }
    }
    finish(9, &failures, start, None, &format!("1000 instances, max norm/eta {worst:.4}"));
}

#[test]
fn criterion_10_linear_entropy_equality() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let mut rng = substream(110, i);
        let d = rng.random_range(2..=12);
        let n = rng.random_range(2..=32);
        let env = EnvironmentFamily::uniform_random(d, n, &mut rng).unwrap();
        let a = eta_from_linear_entropy(&env).unwrap();
        let b = eta_max(env.states()).unwrap();
        worst = worst.max((a - b).abs());
        if (a - b).abs() > 1e-9 {
            failures.push(format!("instance {i}: {a} vs {b}"));
        }
    }
    finish(10, &failures, start, None, &format!("200 instances, max difference {worst:.2e}"));
}

#[test]
fn criterion_11_eta_tilde_identity() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let mut rng = substream(111, i);
        let d = rng.random_range(2..=12);
        let n = rng.random_range(2..=32);
        let c = SystemAmplitudes::uniform_random(d, &mut rng).unwrap();
        let env = EnvironmentFamily::uniform_random(d, n, &mut rng).unwrap();
        let formula = eta_tilde_squared(&c, &env).unwrap().value;
        let p = c.probabilities();
        let (mut num, mut den) = (0.0, 0.0);
        for a in 0..d {
            for b in 0..d {
                if a != b {
                    let w = p[a] * p[b];
                    num += w * env.overlap(a, b).norm_sqr();
                    den += w;
                }
            }
        }
        let direct = num / den;
        worst = worst.max((formula - direct).abs());
        if (formula - direct).abs() > 1e-12 {
            failures.push(format!("instance {i}: {formula} vs {direct}"));
        }
    }
    let mixed = DensityMatrix::maximally_mixed(8).unwrap();
    let rep = purity_in_random_basis(&mixed, 50, 1111).unwrap();
    let worst_mixed = rep.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if worst_mixed > 1e-12 {
        failures.push(format!("maximally mixed: |eta_tilde^2| up to {worst_mixed:e}"));
    }
    finish(
        11,
        &failures,
        start,
        None,
        &format!("max identity gap {worst:.2e}, max mixed-state value {worst_mixed:.2e}"),
    );
}

#[test]
fn criterion_12_purity_in_random_basis() {
    let start = Instant::now();
    let rho = DensityMatrix::random_full_rank(32, &mut substream(112, u64::MAX)).unwrap();
    let rep = purity_in_random_basis(&rho, 200, 112).unwrap();
    let dev = (rep.mean - rep.predicted).abs();
    let failures = if dev < 0.05 { vec![] } else { vec![format!("deviation {dev}")] };
    finish(
        12,
        &failures,
        start,
        None,
        &format!("mean {:.4} vs predicted {:.4} (purity {:.4})", rep.mean, rep.predicted, rep.purity),
    );
}

#[test]
fn criterion_13_two_level_prefactor() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &f in &OVERLAP_GRID {
        for p1 in population_grid() {
            let (c, env) = two_level_instance(p1, f).unwrap();
            let rep = entropy_ratio_check(&c, &env).unwrap();
            let k = rep.prefactor.unwrap();
            lo = lo.min(k);
            hi = hi.max(k);
            if !(PREFACTOR_BAND.0..=PREFACTOR_BAND.1).contains(&k) {
                failures.push(format!("(p1={p1}, f={f}) prefactor {k}"));
            }
            if !rep.linear_inequality_holds {
                failures.push(format!("(p1={p1}, f={f}) linear slack {}", rep.linear_slack));
            }
        }
    }
    finish(13, &failures, start, None, &format!("prefactor range [{lo:.4}, {hi:.4}]"));
}

#[test]
fn criterion_14_interaction_variance() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut parts = Vec::new();
    for k in 0..5 {
        let mut rng = substream(114, k);
        let env = LatticeEnvironment::random(2, 4, 4, &mut rng).unwrap();
        let target = fourth_moment(&env);
        let gap = min_pairwise_gap(&env, 0, 1).unwrap().expect("distinct energies");
        let big_t = 500.0 / gap;
        let samples = recommended_samples(&env, 0, 1, big_t).unwrap();
        let v = empirical_overlap_variance(&env, 0, 1, big_t, samples).unwrap();
        let rel = (v - target).abs() / target;
        if rel > 0.2 {
            failures.push(format!("instance {k}: variance {v} vs {target}"));
        }
        let threshold = std::f64::consts::PI / min_abs_gap(&env, 0, 1).unwrap().expect("nonzero gap");
        let mut worst_avg: f64 = 0.0;
        for t in [1.5 * threshold, 10.0 * threshold, big_t] {
            let a = time_averaged_overlap(&env, 0, 1, t).unwrap().norm();
            worst_avg = worst_avg.max(a);
            if a >= 0.02 {
                failures.push(format!("instance {k}: |average| {a} at T={t}"));
            }
        }
        parts.push(format!("rel {rel:.3} avg {worst_avg:.4}"));
    }
    finish(14, &failures, start, None, &parts.join(", "));
}

#[test]
fn criterion_15_brownian_mixing() {
    let start = Instant::now();
    let n = 8;
    let time = 10.0 * mixing_time_estimate(n).unwrap();
    let e0 = UnitVector::basis(n, 0).unwrap();
    let cfg = BrownianConfig::with_default_step(e0.clone(), 1.0).unwrap();
    let xs = run_trials(115, 50_000, |rng| {
        let end = brownian_evolve(&cfg, time, rng).unwrap();
        inner_product(&e0, &end).unwrap().norm_sqr()
    });
    let ks = ks_test(&xs, |x| beta_1_b_cdf(x, 7.0));
    let failures = if ks.passes(0.01) { vec![] } else { vec![format!("D={} p={}", ks.statistic, ks.p_value)] };
    finish(15, &failures, start, None, &format!("t={time:.4} D={:.5} p={:.3}", ks.statistic, ks.p_value));
}

#[test]
fn criterion_16_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut failures = Vec::new();
    let configs: [(ExperimentKind, &[(&str, &str)]); 4] = [
        (ExperimentKind::EtaMean, &[("n", "10"), ("d-range", "2:100:log:5"), ("trials", "200"), ("seed", "42")]),
        (ExperimentKind::CapCheck, &[("n", "5"), ("epsilon", "0.3"), ("trials", "20000"), ("seed", "1")]),
        (ExperimentKind::Dmax, &[("n-range", "2:4"), ("epsilon", "0.4"), ("s", "0.9"), ("trials", "300"), ("seed", "7")]),
        (ExperimentKind::BrownianMixing, &[("n", "4"), ("trials", "500"), ("seed", "3")]),
    ];
    for (kind, params) in configs {
        let mut bytes = Vec::new();
        for rep in 0..2 {
            let mut map: std::collections::BTreeMap<String, String> =
                params.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
            let path = dir.path().join(format!("{kind}-{rep}.csv"));
            map.insert("output".into(), path.display().to_string());
            let cfg = ExperimentConfig::from_map(kind, map).unwrap();
            run(&cfg).unwrap();
            bytes.push(std::fs::read(&path).unwrap());
        }
        if bytes[0] != bytes[1] {
            failures.push(format!("{kind} output differs between runs"));
        }
    }
    finish(16, &failures, start, None, "4 experiments re-run with identical seeds");
}
