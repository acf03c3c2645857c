//! Environment particles that feel which history the system follows.
//!
//! Each of `N` particles sits at one of `p` discrete positions, so the
//! environment has `p^N` configurations `x`. Starting from `Σ_x f(x)|x⟩`, the
//! branch attached to history `i` evolves as `Σ_x f(x) e^{i H(i,x) t}|x⟩`
//! (`ħ = 1`), so with `Δ(i,j,x) = H(j,x) − H(i,x)`:
//!
//! `⟨E_i(t)|E_j(t)⟩ = Σ_x |f(x)|² e^{i Δ(i,j,x) t}`.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::quantum::{EnvironmentFamily, SystemAmplitudes, AMPLITUDE_ZERO};
use crate::sphere::UnitVector;

/// Largest configuration count accepted (`p^N ≤ 2^20`).
pub const MAX_CONFIGURATIONS: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeEnvironment {
    num_particles: usize,
    positions: usize,
    amplitudes: Vec<Complex64>,
    weights: Vec<f64>,
    /// `energies[i][x] = H(i, x)`.
    energies: Vec<Vec<f64>>,
}

fn configuration_count(num_particles: usize, positions: usize) -> Result<usize> {
    if num_particles == 0 || positions == 0 {
        return Err(Error::InvalidDimension("need N >= 1 and p >= 1".into()));
    }
    let mut total: usize = 1;
    for _ in 0..num_particles {
        total = total
            .checked_mul(positions)
            .filter(|&t| t <= MAX_CONFIGURATIONS)
            .ok_or_else(|| {
                Error::InvalidDimension(format!(
                    "p^N = {positions}^{num_particles} exceeds {MAX_CONFIGURATIONS}"
                ))
            })?;
    }
    Ok(total)
}

impl LatticeEnvironment {
    /// `amplitudes` and each row of `energies` are indexed by configuration,
    /// configuration `x = (x_1, …, x_N)` having index `Σ_k x_k p^{k−1}`.
    pub fn new(
        num_particles: usize,
        positions: usize,
        amplitudes: Vec<Complex64>,
        energies: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let k = configuration_count(num_particles, positions)?;
        if amplitudes.len() != k {
            return Err(Error::DimensionMismatch(k, amplitudes.len()));
        }
        if energies.is_empty() {
            return Err(Error::InvalidDimension("need at least one history".into()));
        }
        if let Some(row) = energies.iter().find(|r| r.len() != k) {
            return Err(Error::DimensionMismatch(k, row.len()));
        }
        if energies.iter().flatten().any(|e| !e.is_finite()) {
            return Err(Error::domain("energies must be finite"));
        }
        let weights: Vec<f64> = amplitudes.iter().map(|z| z.norm_sqr()).collect();
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(total));
        }
        Ok(LatticeEnvironment {
            num_particles,
            positions,
            amplitudes,
            weights,
            energies,
        })
    }

    /// Constant `f = p^{−N/2}`, energies i.i.d. uniform on `[0, 1]`.
    pub fn random<R: Rng + ?Sized>(
        histories: usize,
        num_particles: usize,
        positions: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let k = configuration_count(num_particles, positions)?;
        let f = Complex64::new((k as f64).recip().sqrt(), 0.0);
        let energies = (0..histories)
            .map(|_| (0..k).map(|_| rng.random::<f64>()).collect())
            .collect();
        Self::new(num_particles, positions, vec![f; k], energies)
    }

    pub fn num_particles(&self) -> usize {
        self.num_particles
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn num_configurations(&self) -> usize {
        self.weights.len()
    }

    pub fn num_histories(&self) -> usize {
        self.energies.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// `|f(x)|²`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn energies(&self, i: usize) -> &[f64] {
        &self.energies[i]
    }

    /// Positions `(x_1, …, x_N)` of configuration `index`.
    pub fn configuration(&self, mut index: usize) -> Vec<usize> {
        (0..self.num_particles)
            .map(|_| {
                let x = index % self.positions;
                index /= self.positions;
                x
            })
            .collect()
    }

    /// Copy with `H(i, ·)` shifted by a constant.
    pub fn with_energy_shift(&self, i: usize, shift: f64) -> Result<Self> {
        self.check_index(i)?;
        let mut out = self.clone();
        out.energies[i].iter_mut().for_each(|e| *e += shift);
        Ok(out)
    }

    /// Copy with `H(j, ·) = H(i, ·)`.
    pub fn with_copied_history(&self, from: usize, to: usize) -> Result<Self> {
        self.check_index(from)?;
        self.check_index(to)?;
        let mut out = self.clone();
        out.energies[to] = self.energies[from].clone();
        Ok(out)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.num_histories() {
            return Err(Error::domain(format!(
                "history index {i} out of range for {} histories",
                self.num_histories()
            )));
        }
        Ok(())
    }

    /// `Δ(i, j, x) = H(j, x) − H(i, x)` for every configuration.
    pub fn gaps(&self, i: usize, j: usize) -> Result<Vec<f64>> {
        self.check_index(i)?;
        self.check_index(j)?;
        Ok(self.energies[j]
            .iter()
            .zip(&self.energies[i])
            .map(|(b, a)| b - a)
            .collect())
    }

    /// Branch state `|E_i(t)⟩` as a vector over configurations.
    pub fn branch_state(&self, i: usize, t: f64) -> Result<UnitVector> {
        self.check_index(i)?;
        let v = self
            .amplitudes
            .iter()
            .zip(&self.energies[i])
            .map(|(f, h)| f * Complex64::from_polar(1.0, h * t))
            .collect();
        UnitVector::normalized(v)
    }

    /// All branch states at time `t`.
    pub fn environment_at(&self, t: f64) -> Result<EnvironmentFamily> {
        let states = (0..self.num_histories())
            .map(|i| self.branch_state(i, t))
            .collect::<Result<Vec<_>>>()?;
        EnvironmentFamily::new(states)
    }
}

/// Weighted phase sum `Σ w e^{iΔt}` without domain checks.
fn phase_sum(weights: &[f64], gaps: &[f64], t: f64) -> Complex64 {
    weights
        .iter()
        .zip(gaps)
        .map(|(&w, &g)| Complex64::from_polar(w, g * t))
        .sum()
}

/// `⟨E_i(t)|E_j(t)⟩`.
pub fn overlap_at_time(env: &LatticeEnvironment, i: usize, j: usize, t: f64) -> Result<Complex64> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("time must be finite and >= 0, got {t}")));
    }
    let gaps = env.gaps(i, j)?;
    Ok(phase_sum(env.weights(), &gaps, t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapTrajectory {
    pub pair: (usize, usize),
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
}

pub fn overlap_trajectory(
    env: &LatticeEnvironment,
    i: usize,
    j: usize,
    times: &[f64],
) -> Result<OverlapTrajectory> {
    let values = times
        .iter()
        .map(|&t| overlap_at_time(env, i, j, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(OverlapTrajectory {
        pair: (i, j),
        times: times.to_vec(),
        values,
    })
}

/// `sin(u)/u`, equal to 1 at 0.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

/// `(1/2T) ∫_{−T}^{T} ⟨E_i|E_j⟩ dt = Σ_x |f|² sinc(Δ T)`.
pub fn time_averaged_overlap(
    env: &LatticeEnvironment,
    i: usize,
    j: usize,
    big_t: f64,
) -> Result<Complex64> {
    if !(big_t > 0.0) || !big_t.is_finite() {
        return Err(Error::domain(format!("T must be finite and > 0, got {big_t}")));
    }
    let gaps = env.gaps(i, j)?;
    let avg: f64 = env
        .weights()
        .iter()
        .zip(&gaps)
        .map(|(w, g)| w * sinc(g * big_t))
        .sum();
    Ok(Complex64::new(avg, 0.0))
}

/// Grid size resolving the fastest oscillation of `|⟨E_i|E_j⟩|²` on `[−T, T]`:
/// `20 · T · max|Δ_x − Δ_x'|` (the largest frequency present), at least 100.
pub fn recommended_samples(env: &LatticeEnvironment, i: usize, j: usize, big_t: f64) -> Result<usize> {
    let gaps = env.gaps(i, j)?;
    let spread = spread(&gaps);
    Ok(((20.0 * big_t * spread).ceil() as usize).max(100))
}

fn spread(gaps: &[f64]) -> f64 {
    let lo = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// Trapezoidal average of `|⟨E_i(t)|E_j(t)⟩|²` over `samples` equally spaced
/// points of `[−T, T]`.
///
/// The result is the same quadrature either way it is computed; the cheaper of
/// the pairwise closed form and the direct time-domain sum is used.
pub fn empirical_overlap_variance(
    env: &LatticeEnvironment,
    i: usize,
    j: usize,
    big_t: f64,
    samples: usize,
) -> Result<f64> {
    if !(big_t > 0.0) || !big_t.is_finite() {
        return Err(Error::domain(format!("T must be finite and > 0, got {big_t}")));
    }
    if samples < 100 {
        return Err(Error::domain(format!("samples must be >= 100, got {samples}")));
    }
    let gaps = env.gaps(i, j)?;
    let (w, g) = merge_equal_gaps(env.weights(), &gaps);
    let k = w.len() as f64;
    if k * (k - 1.0) / 2.0 <= samples as f64 * k {
        Ok(variance_pairwise(&w, &g, big_t, samples))
    } else {
        Ok(variance_time_domain(&w, &g, big_t, samples))
    }
}

/// Sort by gap and add the weights of exactly equal gaps.
fn merge_equal_gaps(weights: &[f64], gaps: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..gaps.len()).collect();
    idx.sort_by(|&a, &b| gaps[a].total_cmp(&gaps[b]));
    let mut w: Vec<f64> = Vec::with_capacity(idx.len());
    let mut g: Vec<f64> = Vec::with_capacity(idx.len());
    for k in idx {
        if g.last() == Some(&gaps[k]) {
            *w.last_mut().expect("nonempty") += weights[k];
        } else {
            w.push(weights[k]);
            g.push(gaps[k]);
        }
    }
    (w, g)
}

/// Trapezoid weights for `M` points: `1/(M−1)` inside, half at the ends.
fn trapezoid_end_weight(samples: usize) -> (f64, f64) {
    let inner = 1.0 / (samples - 1) as f64;
    (inner, 0.5 * inner)
}

/// `|Σ w e^{iΔt}|² = Σ_{x,x'} w w' cos((Δ_x − Δ_x')t)`; on the symmetric grid
/// `Σ_k cos(δ t_k) = sin(Mθ/2)/sin(θ/2)` with `θ = δ h`.
pub(crate) fn variance_pairwise(weights: &[f64], gaps: &[f64], big_t: f64, samples: usize) -> f64 {
    let m = samples as f64;
    let h = 2.0 * big_t / (m - 1.0);
    let (inner, _) = trapezoid_end_weight(samples);
    let pair_mean = |delta: f64| -> f64 {
        let half = 0.5 * delta * h;
        let s = half.sin();
        let dirichlet = if s.abs() < 1e-12 {
            // θ/2 = mπ: every cos(δ t_k) equals (−1)^{m(M−1)}.
            let parity = ((half / std::f64::consts::PI).round() as i64 * (samples as i64 - 1)) % 2;
            if parity == 0 { m } else { -m }
        } else {
            (m * half).sin() / s
        };
        (dirichlet - (delta * big_t).cos()) * inner
    };
    let diag: f64 = weights.iter().map(|w| w * w).sum();
    let mut cross = 0.0;
    for a in 0..weights.len() {
        let mut row = 0.0;
        for b in (a + 1)..weights.len() {
            row += weights[b] * pair_mean(gaps[b] - gaps[a]);
        }
        cross += weights[a] * row;
    }
    diag + 2.0 * cross
}

/// Direct evaluation on the grid, phases advanced by a per-configuration
/// rotation and re-anchored every few hundred steps.
pub(crate) fn variance_time_domain(weights: &[f64], gaps: &[f64], big_t: f64, samples: usize) -> f64 {
    const REANCHOR: usize = 256;
    let h = 2.0 * big_t / (samples - 1) as f64;
    let (inner, end) = trapezoid_end_weight(samples);
    let step: Vec<Complex64> = gaps.iter().map(|g| Complex64::from_polar(1.0, g * h)).collect();
    let mut phase: Vec<Complex64> = Vec::new();
    let mut total = 0.0;
    for k in 0..samples {
        if k % REANCHOR == 0 {
            let t = -big_t + k as f64 * h;
            phase = gaps.iter().map(|g| Complex64::from_polar(1.0, g * t)).collect();
        }
        let z: Complex64 = weights.iter().zip(&phase).map(|(w, p)| p * w).sum();
        let wk = if k == 0 || k + 1 == samples { end } else { inner };
        total += wk * z.norm_sqr();
        phase.iter_mut().zip(&step).for_each(|(p, s)| *p *= s);
    }
    total
}

/// `Σ_x |f(x)|⁴`, the long-time limit of the overlap variance when all gaps
/// are distinct.
pub fn fourth_moment(env: &LatticeEnvironment) -> f64 {
    env.weights().iter().map(|w| w * w).sum()
}

/// Smallest positive `|Δ_x − Δ_x'|` over configurations, `None` if all equal.
pub fn min_pairwise_gap(env: &LatticeEnvironment, i: usize, j: usize) -> Result<Option<f64>> {
    let mut g = env.gaps(i, j)?;
    g.sort_by(f64::total_cmp);
    Ok(g.windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&d| d > 0.0)
        .min_by(f64::total_cmp))
}

/// Smallest nonzero `|Δ(i, j, x)|`, `None` if every gap vanishes.
pub fn min_abs_gap(env: &LatticeEnvironment, i: usize, j: usize) -> Result<Option<f64>> {
    Ok(env
        .gaps(i, j)?
        .into_iter()
        .map(f64::abs)
        .filter(|&d| d > 0.0)
        .min_by(f64::total_cmp))
}

/// `η(t)` over histories with nonzero amplitude, for each time in `times`.
pub fn eta_trajectory(
    env: &LatticeEnvironment,
    amplitudes: &SystemAmplitudes,
    times: &[f64],
) -> Result<Vec<f64>> {
    if times.is_empty() {
        return Err(Error::domain("time grid is empty"));
    }
    if amplitudes.len() != env.num_histories() {
        return Err(Error::DimensionMismatch(env.num_histories(), amplitudes.len()));
    }
    let active: Vec<usize> = (0..amplitudes.len())
        .filter(|&i| amplitudes.as_slice()[i].norm() > AMPLITUDE_ZERO)
        .collect();
    let mut pairs = Vec::new();
    for (a, &i) in active.iter().enumerate() {
        for &j in &active[a + 1..] {
            pairs.push(env.gaps(i, j)?);
        }
    }
    times
        .iter()
        .map(|&t| {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::domain(format!("time must be finite and >= 0, got {t}")));
            }
            Ok(pairs
                .iter()
                .map(|g| phase_sum(env.weights(), g, t).norm())
                .fold(0.0, f64::max)
                .min(1.0))
        })
        .collect()
}
