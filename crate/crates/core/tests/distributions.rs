use decoh_core::eta::{eta_limit, sample_eta, sample_eta_subsampled};
use decoh_core::rng::{run_trials, substream};
use decoh_core::sphere::{
    brownian_evolve, cap_area_ratio, cap_contains, inner_product, sample_haar_unitary, sample_uniform,
    BrownianConfig, CapSpec, UnitVector,
};
use decoh_core::stats::{beta_1_b_cdf, ks_test, ks_two_sample, MeanEstimate};
use decoh_core::Complex64;

#[test]
fn overlap_mean_vanishes() {
    for n in [2usize, 7, 30] {
        let trials = 100_000;
        let zs = run_trials(200 + n as u64, trials, |rng| {
            let u = sample_uniform(n, rng).unwrap();
            let v = sample_uniform(n, rng).unwrap();
            inner_product(&u, &v).unwrap()
        });
        let mean: Complex64 = zs.iter().sum::<Complex64>() / trials as f64;
        assert!(mean.norm() < 4.0 / (trials as f64).sqrt(), "n={n}: {mean}");
    }
}

#[test]
fn haar_column_entry_is_beta() {
    let n = 5;
    let xs = run_trials(210, 30_000, |rng| sample_haar_unitary(n, rng).unwrap().matrix()[(0, 0)].norm_sqr());
    let ks = ks_test(&xs, |x| beta_1_b_cdf(x, (n - 1) as f64));
    assert!(ks.passes(0.01), "{ks:?}");
}

#[test]
fn rotated_samples_stay_uniform() {
    let n = 4;
    let eps = 0.5;
    let mut rng = substream(211, u64::MAX);
    let u = sample_haar_unitary(n, &mut rng).unwrap();
    let cap = CapSpec::new(UnitVector::basis(n, 0).unwrap(), eps).unwrap();
    let hits = run_trials(211, 200_000, |rng| {
        let x = u.apply(&sample_uniform(n, rng).unwrap()).unwrap();
        f64::from(u8::from(cap_contains(&cap, &x).unwrap()))
    });
    let m = MeanEstimate::from_samples(&hits);
    assert!(m.within(cap_area_ratio(n, eps).unwrap(), 4.0), "{m:?}");
}

#[test]
fn diffusion_rate_rescales_time() {
    let n = 4;
    let start = UnitVector::basis(n, 0).unwrap();
    let t = 0.05;
    let fast = BrownianConfig::with_default_step(start.clone(), 2.0).unwrap();
    let slow = BrownianConfig::with_default_step(start.clone(), 1.0).unwrap();
    let overlap = |cfg: &BrownianConfig, time: f64, seed: u64| {
        run_trials(seed, 20_000, |rng| {
            let end = brownian_evolve(cfg, time, rng).unwrap();
            inner_product(&start, &end).unwrap().norm_sqr()
        })
    };
    let a = overlap(&fast, t, 212);
    let b = overlap(&slow, 2.0 * t, 213);
    let ks = ks_two_sample(&a, &b);
    assert!(ks.passes(0.01), "{ks:?}");
    // And the law at this time is far from equilibrium, so the check has teeth.
    let c = overlap(&slow, t, 214);
    assert!(!ks_two_sample(&a, &c).passes(0.01));
}

#[test]
fn eta_concentrates() {
    let (n, d) = (50, 100);
    let xs = run_trials(215, 1000, |rng| sample_eta(n, d, rng).unwrap().value);
    let m = MeanEstimate::from_samples(&xs);
    assert!(m.std_dev < 0.05, "{m:?}");
    let limit = eta_limit(n, d);
    let close = xs.iter().filter(|&&x| (x - limit).abs() <= 0.1).count();
    assert!(close as f64 >= 0.95 * xs.len() as f64, "{close}/1000");
}

#[test]
fn subsampled_eta_tracks_limit_at_large_d() {
    // d = 10⁴ points, 10⁶ of the ~5·10⁷ pairs scanned: a lower bound on η.
    let (n, d) = (20, 10_000);
    let xs = run_trials(216, 40, |rng| sample_eta_subsampled(n, d, 1_000_000, rng).unwrap().value);
    let limit = eta_limit(n, d);
    let close = xs.iter().filter(|&&x| (x - limit).abs() <= 0.1).count();
    assert!(close as f64 >= 0.95 * xs.len() as f64, "{close}/{} near {limit}", xs.len());
}
