//! The max-overlap statistic `η_{n,d} = max_{i≠j} |⟨E_i|E_j⟩|` of `d`
//! independent uniform points of `𝕊^n`.
//!
//! With `α = (1 − ε²)^{n−1}` the normalized cap area, the distribution
//! function of `η_{n,d}` is sandwiched as
//!
//! ```text
//! g_{n,d}(ε) = ∏_{k=1}^{d−1} (1 − kα)  ≤  P(η_{n,d} ≤ ε)  ≤  (1 − α)^{d(d−1)/2} = f_{n,d}(ε)
//! ```
//!
//! and `η_{n,d} → √(1 − d^{−2/n})` in probability as `n` or `d` grows.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{run_trials, substream, SimRng};
use crate::sphere::{cap_ratio_unchecked, fill_uniform, overlap_sqr, UnitVector};
use crate::stats::{wilson_interval, MeanEstimate, Z_99};

/// Scanning stops once a pair overlap reaches this value.
pub const EARLY_EXIT: f64 = 1.0 - 1e-9;

/// Above this many vectors, callers should expect `Θ(d²n)` cost to dominate;
/// experiments switch to the early-exit scan and may report the subsampled
/// lower bound instead.
pub const LARGE_D: usize = 2000;

const BLOCK: usize = 64;

/// Max pairwise overlap of `d = flat.len() / n` vectors stored contiguously.
/// Returns 0 when `d < 2`.
pub(crate) fn eta_max_flat(flat: &[Complex64], n: usize) -> f64 {
    let d = flat.len() / n;
    let stop = EARLY_EXIT * EARLY_EXIT;
    let mut best: f64 = 0.0;
    // Blocked over rows so a tile of vectors stays cache resident.
    for jb in (0..d).step_by(BLOCK) {
        let jend = (jb + BLOCK).min(d);
        for i in 0..jend {
            let u = &flat[i * n..(i + 1) * n];
            for j in jb.max(i + 1)..jend {
                let s = overlap_sqr(u, &flat[j * n..(j + 1) * n]);
                if s > best {
                    best = s;
                    if best >= stop {
                        return best.sqrt().min(1.0);
                    }
                }
            }
        }
    }
    best.sqrt().min(1.0)
}

fn flatten(vectors: &[UnitVector]) -> Result<(Vec<Complex64>, usize)> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::InvalidDimension("need at least one vector".into()))?;
    let n = first.dim();
    let mut flat = Vec::with_capacity(n * vectors.len());
    for v in vectors {
        if v.dim() != n {
            return Err(Error::DimensionMismatch(n, v.dim()));
        }
        flat.extend_from_slice(v.as_slice());
    }
    Ok((flat, n))
}

/// `max_{i≠j} |⟨v_i|v_j⟩|`; 0 for a single vector.
pub fn eta_max(vectors: &[UnitVector]) -> Result<f64> {
    let (flat, n) = flatten(vectors)?;
    Ok(eta_max_flat(&flat, n))
}

/// Lower bound on `eta_max` from `pairs` uniformly drawn index pairs `i ≠ j`.
///
/// This is a labelled approximation for very large `d`; it never exceeds the
/// exact value.
pub fn eta_max_subsampled<R: Rng + ?Sized>(
    vectors: &[UnitVector],
    pairs: usize,
    rng: &mut R,
) -> Result<f64> {
    let (flat, n) = flatten(vectors)?;
    let d = vectors.len();
    Ok(subsampled_flat(&flat, n, d, pairs, rng))
}

fn subsampled_flat<R: Rng + ?Sized>(
    flat: &[Complex64],
    n: usize,
    d: usize,
    pairs: usize,
    rng: &mut R,
) -> f64 {
    if d < 2 {
        return 0.0;
    }
    let mut best: f64 = 0.0;
    for _ in 0..pairs {
        let i = rng.random_range(0..d);
        let mut j = rng.random_range(0..d - 1);
        if j >= i {
            j += 1;
        }
        let s = overlap_sqr(&flat[i * n..(i + 1) * n], &flat[j * n..(j + 1) * n]);
        best = best.max(s);
    }
    best.sqrt().min(1.0)
}

/// One realization of `η_{n,d}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaSample {
    pub n: usize,
    pub d: usize,
    pub value: f64,
}

fn check_nd(n: usize, d: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidDimension("n must be >= 1".into()));
    }
    if d == 0 {
        return Err(Error::InvalidDimension("d must be >= 1".into()));
    }
    Ok(())
}

fn check_eps(epsilon: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::domain(format!("epsilon {epsilon} outside [0, 1]")));
    }
    Ok(())
}

fn draw_flat<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Vec<Complex64> {
    let mut flat = vec![Complex64::new(0.0, 0.0); n * d];
    for chunk in flat.chunks_exact_mut(n) {
        fill_uniform(chunk, rng);
    }
    flat
}

/// Draw `d` uniform points of `𝕊^n` and return their max overlap.
pub fn sample_eta<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<EtaSample> {
    check_nd(n, d)?;
    let flat = draw_flat(n, d, rng);
    Ok(EtaSample {
        n,
        d,
        value: eta_max_flat(&flat, n),
    })
}

/// Like [`sample_eta`] but scanning only `pairs` random pairs (lower bound).
pub fn sample_eta_subsampled<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    pairs: usize,
    rng: &mut R,
) -> Result<EtaSample> {
    check_nd(n, d)?;
    let flat = draw_flat(n, d, rng);
    Ok(EtaSample {
        n,
        d,
        value: subsampled_flat(&flat, n, d, pairs, rng),
    })
}

/// `f_{n,d}(ε) = (1 − (1 − ε²)^{n−1})^{d(d−1)/2}`, an upper bound on
/// `P(η_{n,d} ≤ ε)`, evaluated in log space.
pub fn upper_bound_f(n: usize, d: usize, epsilon: f64) -> Result<f64> {
    check_nd(n, d)?;
    check_eps(epsilon)?;
    Ok(f_unchecked(n, d, epsilon))
}

fn f_unchecked(n: usize, d: usize, epsilon: f64) -> f64 {
    if d == 1 {
        return 1.0;
    }
    let alpha = cap_ratio_unchecked(n, epsilon);
    if alpha >= 1.0 {
        return 0.0;
    }
    let pairs = d as f64 * (d - 1) as f64 / 2.0;
    (pairs * (-alpha).ln_1p()).exp()
}

/// `g_{n,d}(ε) = ∏_{k=1}^{d−1} (1 − k(1 − ε²)^{n−1})`, a lower bound on
/// `P(η_{n,d} ≤ ε)`; 0 once a factor is non-positive.
pub fn lower_bound_g(n: usize, d: usize, epsilon: f64) -> Result<f64> {
    check_nd(n, d)?;
    check_eps(epsilon)?;
    if d == 1 {
        return Ok(1.0);
    }
    let alpha = cap_ratio_unchecked(n, epsilon);
    if (d - 1) as f64 * alpha >= 1.0 {
        return Ok(0.0);
    }
    let log: f64 = (1..d).map(|k| (-(k as f64) * alpha).ln_1p()).sum();
    Ok(log.exp())
}

/// Limit in probability of `η_{n,d}`: `√(1 − d^{−2/n})`.
pub fn eta_limit(n: usize, d: usize) -> f64 {
    if d <= 1 || n == 0 {
        return 0.0;
    }
    (-(-2.0 * (d as f64).ln() / n as f64).exp_m1()).sqrt()
}

/// The `ε` at which `f_{n,d}(ε) = 1/2`:
/// `√(1 − (1 − 2^{−2/(d(d−1))})^{1/(n−1)})`.
pub fn critical_epsilon_exact(n: usize, d: usize) -> Result<f64> {
    if n < 2 || d < 2 {
        return Err(Error::domain(format!("critical epsilon needs n, d >= 2 (n={n}, d={d})")));
    }
    let pairs = d as f64 * (d - 1) as f64 / 2.0;
    let a = -(-std::f64::consts::LN_2 / pairs).exp_m1();
    Ok((-(a.ln() / (n - 1) as f64).exp_m1()).sqrt())
}

/// Computable controls on `|f_{n,d}(ε) − g_{n,d}(ε)|`, split at
/// `d_c = (1 − ε²)^{−3(n−1)/5}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapControl {
    pub d_c: f64,
    /// Bound for `d ≥ d_c`: `exp(−((d*−1)/d*)² / (2β))`, `d* = max(2, ⌈d_c⌉)`,
    /// `β = (1 − ε²)^{(n−1)/5}`.
    pub dense: f64,
    /// Bound for `d ≤ d_c`: `β / (6(1 − β²))`.
    pub sparse: f64,
    /// `max(dense, sparse)`, valid for every `d`.
    pub xi: f64,
}

pub fn bound_gap_control(n: usize, epsilon: f64) -> Result<GapControl> {
    check_nd(n, 1)?;
    check_eps(epsilon)?;
    let alpha = cap_ratio_unchecked(n, epsilon);
    let beta = alpha.powf(0.2);
    let d_c = alpha.powf(-0.6);
    let d_star = d_c.ceil().max(2.0);
    let shrink = ((d_star - 1.0) / d_star).powi(2);
    let dense = if beta > 0.0 {
        (-shrink / (2.0 * beta)).exp()
    } else {
        0.0
    };
    let sparse = if beta < 1.0 {
        beta / (6.0 * (1.0 - beta * beta))
    } else {
        f64::INFINITY
    };
    Ok(GapControl {
        d_c,
        dense,
        sparse,
        xi: dense.max(sparse),
    })
}

/// The branch-specific bound on `|f − g|` that applies at this `d`:
/// `f` itself when `d ≥ d_c`, the sparse control otherwise.
pub fn gap_bound_at(n: usize, d: usize, epsilon: f64) -> Result<f64> {
    let ctl = bound_gap_control(n, epsilon)?;
    if d as f64 >= ctl.d_c {
        upper_bound_f(n, d, epsilon)
    } else {
        Ok(ctl.sparse)
    }
}

/// Parameters of `d_max^{ε,s}(n) = min{d : P(η_{n,d} ≥ ε) ≥ s}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmaxQuery {
    n: usize,
    epsilon: f64,
    s: f64,
}

impl DmaxQuery {
    pub fn new(n: usize, epsilon: f64, s: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension("n must be >= 1".into()));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::domain(format!("epsilon {epsilon} outside (0, 1)")));
        }
        if !(0.0..1.0).contains(&s) {
            return Err(Error::domain(format!("s {s} outside [0, 1)")));
        }
        Ok(DmaxQuery { n, epsilon, s })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn s(&self) -> f64 {
        self.s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmaxAnalytic {
    /// `min{d : 1 − f_{n,d}(ε) ≥ s}`.
    pub d_max: u64,
    /// `√(−2 ln(1−s)) · (1 − ε²)^{−(n−1)/2}`.
    pub asymptotic: f64,
    /// Gap control `ξ` used in the lower bracket.
    pub xi: f64,
    /// `⌊√(−2 ln(1−s+ξ)) · √((1−ε²)^{−(n−1)} − 1)⌋`, 0 when `1−s+ξ ≥ 1`.
    pub bracket_lower: u64,
    /// `⌈√(−2 ln(1−s)) · (1−ε²)^{−(n−1)/2}⌉`.
    pub bracket_upper: u64,
}

impl DmaxAnalytic {
    pub fn in_bracket(&self, d: u64) -> bool {
        self.bracket_lower <= d && d <= self.bracket_upper
    }
}

const D_SEARCH_CAP: u64 = 1 << 62;

/// Smallest `d ≥ 1` with `pred(d)`, for a predicate monotone in `d`:
/// exponential bracketing then bisection.
fn first_true(mut pred: impl FnMut(u64) -> bool) -> Result<u64> {
    if pred(1) {
        return Ok(1);
    }
    let (mut lo, mut hi) = (1u64, 2u64);
    while !pred(hi) {
        if hi >= D_SEARCH_CAP {
            return Err(Error::domain("d_max search exceeded 2^62"));
        }
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `d_max` from the upper bound `f` (exact integer search) together with the
/// asymptotic formula and the bracket around it.
pub fn d_max_analytic(q: &DmaxQuery) -> Result<DmaxAnalytic> {
    let (n, eps, s) = (q.n, q.epsilon, q.s);
    let target = 1.0 - s;
    let d_max = first_true(|d| {
        if d > u32::MAX as u64 {
            // f in f64 is exactly 0 long before this.
            return true;
        }
        f_unchecked(n, d as usize, eps) <= target
    })?;
    let log_ratio = (n - 1) as f64 * (-eps * eps).ln_1p();
    let root = (-2.0 * target.ln()).sqrt();
    let asymptotic = root * (-0.5 * log_ratio).exp();
    let xi = bound_gap_control(n, eps)?.xi;
    let arg = target + xi;
    let bracket_lower = if arg >= 1.0 {
        0
    } else {
        ((-2.0 * arg.ln()).sqrt() * (-log_ratio).exp_m1().sqrt()).floor() as u64
    };
    Ok(DmaxAnalytic {
        d_max,
        asymptotic,
        xi,
        bracket_lower,
        bracket_upper: asymptotic.ceil() as u64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DmaxMonteCarlo {
    pub d_max: u64,
    /// Estimated `P(η_{n,d} ≥ ε)` at `d_max`.
    pub probability: f64,
    pub std_error: f64,
    /// Estimate and standard error at `d_max − 1` (0 when `d_max = 1`).
    pub probability_below: f64,
    pub std_error_below: f64,
    /// True when `s` lies within 2 standard errors of either boundary estimate.
    pub inconclusive: bool,
    pub trials: usize,
    pub seed: u64,
}

/// Coupled per-trial sequence of points: the configuration for `d` is the
/// first `d` points, so each trial's `η_{n,d}` is nondecreasing in `d` and the
/// estimated `P(η_{n,d} ≥ ε)` is monotone. Only the first index at which a new
/// point lands in an earlier point's cap needs to be stored.
struct CoupledTrial {
    rng: SimRng,
    points: Vec<Complex64>,
    count: u64,
    hit: Option<u64>,
}

impl CoupledTrial {
    fn advance(&mut self, n: usize, eps2: f64, limit: u64) {
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        while self.hit.is_none() && self.count < limit {
            fill_uniform(&mut buf, &mut self.rng);
            let close = self
                .points
                .chunks_exact(n)
                .any(|p| overlap_sqr(p, &buf) >= eps2);
            self.count += 1;
            if close {
                self.hit = Some(self.count);
                self.points = Vec::new();
            } else {
                self.points.extend_from_slice(&buf);
            }
        }
    }
}

fn proportion_se(p: f64, trials: usize) -> f64 {
    if trials < 2 {
        return 0.0;
    }
    (p * (1.0 - p) / (trials - 1) as f64).max(0.0).sqrt()
}

/// Monte Carlo `d_max`: exponential bracketing then bisection over `d` on the
/// estimated `P(η_{n,d} ≥ ε)`, with `trials` coupled trials seeded from `seed`.
pub fn d_max_monte_carlo(q: &DmaxQuery, trials: usize, seed: u64) -> Result<DmaxMonteCarlo> {
    if trials < 100 {
        return Err(Error::domain(format!("d_max_monte_carlo needs trials >= 100, got {trials}")));
    }
    let n = q.n;
    let eps2 = q.epsilon * q.epsilon;
    let mut states: Vec<CoupledTrial> = (0..trials as u64)
        .map(|i| CoupledTrial {
            rng: substream(seed, i),
            points: Vec::new(),
            count: 0,
            hit: None,
        })
        .collect();
    let total = trials as f64;
    let estimate = |states: &[CoupledTrial], d: u64| -> f64 {
        states.iter().filter(|t| t.hit.is_some_and(|h| h <= d)).count() as f64 / total
    };
    let advance_to = |states: &mut Vec<CoupledTrial>, limit: u64| {
        states
            .par_iter_mut()
            .for_each(|t| t.advance(n, eps2, limit));
    };

    let s = q.s;
    let mut hi = 1u64;
    loop {
        advance_to(&mut states, hi);
        if estimate(&states, hi) >= s {
            break;
        }
        if hi >= 1 << 24 {
            return Err(Error::domain(format!(
                "d_max_monte_carlo: no d <= {hi} reaches s = {s}"
            )));
        }
        hi *= 2;
    }
    let lo = hi / 2;
    let d_max = if hi == 1 {
        1
    } else {
        // Every trial is resolved up to `hi`, so the bisection is exact on the
        // empirical curve.
        let (mut a, mut b) = (lo, hi);
        while b - a > 1 {
            let mid = a + (b - a) / 2;
            if estimate(&states, mid) >= s {
                b = mid;
            } else {
                a = mid;
            }
        }
        b
    };

    let probability = estimate(&states, d_max);
    let std_error = proportion_se(probability, trials);
    let (probability_below, std_error_below) = if d_max > 1 {
        let p = estimate(&states, d_max - 1);
        (p, proportion_se(p, trials))
    } else {
        (0.0, 0.0)
    };
    let near = |p: f64, se: f64| (p - s).abs() <= 2.0 * se;
    let inconclusive = near(probability, std_error)
        || (d_max > 1 && near(probability_below, std_error_below));
    Ok(DmaxMonteCarlo {
        d_max,
        probability,
        std_error,
        probability_below,
        std_error_below,
        inconclusive,
        trials,
        seed,
    })
}

/// Fraction of the other `d − 1` points lying in the cap of parameter `ε`
/// around the first one. Tends to `(1 − ε²)^{n−1}` as `d → ∞`.
pub fn interference_fraction<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<f64> {
    check_nd(n, d)?;
    check_eps(epsilon)?;
    if d < 2 {
        return Err(Error::InvalidDimension("interference_fraction needs d >= 2".into()));
    }
    let mut first = vec![Complex64::new(0.0, 0.0); n];
    fill_uniform(&mut first, rng);
    let eps2 = epsilon * epsilon;
    let mut other = vec![Complex64::new(0.0, 0.0); n];
    let mut hits = 0usize;
    for _ in 1..d {
        fill_uniform(&mut other, rng);
        if overlap_sqr(&first, &other) >= eps2 {
            hits += 1;
        }
    }
    Ok(hits as f64 / (d - 1) as f64)
}

/// Which statistic of `η_{n,d}` an [`EtaEstimate`] targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaStatistic {
    Mean,
    /// `P(η ≥ ε)`.
    ExceedProb(f64),
    /// `P(η ≤ ε)`.
    CdfAt(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaEstimate {
    pub n: usize,
    pub d: usize,
    pub statistic: EtaStatistic,
    pub estimate: f64,
    /// Sample standard deviation over `√trials`.
    pub std_error: f64,
    pub trials: usize,
    pub seed: u64,
    /// Number of indicator successes, for the probability statistics.
    pub successes: Option<usize>,
}

impl EtaEstimate {
    /// 99% interval: Wilson score for probabilities, normal for the mean.
    pub fn confidence_interval_99(&self) -> (f64, f64) {
        match self.successes {
            Some(k) => wilson_interval(k, self.trials, Z_99),
            None => (
                self.estimate - Z_99 * self.std_error,
                self.estimate + Z_99 * self.std_error,
            ),
        }
    }
}

/// Monte Carlo estimate of a statistic of `η_{n,d}`; trial `i` uses
/// `substream(seed, i)`.
pub fn estimate_eta(
    n: usize,
    d: usize,
    statistic: EtaStatistic,
    trials: usize,
    seed: u64,
) -> Result<EtaEstimate> {
    check_nd(n, d)?;
    if trials == 0 {
        return Err(Error::domain("trials must be >= 1"));
    }
    if let EtaStatistic::ExceedProb(e) | EtaStatistic::CdfAt(e) = statistic {
        check_eps(e)?;
    }
    let values = run_trials(seed, trials, |rng| {
        sample_eta(n, d, rng).map(|s| s.value).unwrap_or(f64::NAN)
    });
    let xs: Vec<f64> = match statistic {
        EtaStatistic::Mean => values,
        EtaStatistic::ExceedProb(e) => values.iter().map(|&v| f64::from(u8::from(v >= e))).collect(),
        EtaStatistic::CdfAt(e) => values.iter().map(|&v| f64::from(u8::from(v <= e))).collect(),
    };
    let m = MeanEstimate::from_samples(&xs);
    let successes = match statistic {
        EtaStatistic::Mean => None,
        _ => Some(xs.iter().filter(|&&x| x > 0.5).count()),
    };
    Ok(EtaEstimate {
        n,
        d,
        statistic,
        estimate: m.mean,
        std_error: m.std_error,
        trials,
        seed,
        successes,
    })
}
