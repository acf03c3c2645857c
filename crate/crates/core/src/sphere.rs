//! Sampling and geometry on the complex unit sphere `𝕊^n = {ψ ∈ ℂ^n : ‖ψ‖ = 1}`.
//!
//! `𝕊^n` is a real manifold of dimension `2n − 1` embedded in `ℝ^{2n}`. All
//! overlaps use the complex scalar product `⟨u|v⟩ = Σ conj(u_k) v_k`, under
//! which `|⟨u|v⟩|²` of two independent uniform points follows `Beta(1, n − 1)`
//! with mean `1/n`. (With the real scalar product of `ℝ^{2n}` the variance
//! would be `1/(2n)` instead; that variant is not exposed.)

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Normalization tolerance on `Σ|z_k|²`.
pub const NORM_TOL: f64 = 1e-12;

/// A normalized vector of `ℂ^n`, `n ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Vec<Complex64>);

impl UnitVector {
    /// Wrap entries that are already normalized.
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidDimension("unit vector needs n >= 1".into()));
        }
        let norm2 = norm_sqr(&entries);
        if (norm2 - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm2));
        }
        Ok(UnitVector(entries))
    }

    /// Normalize arbitrary nonzero entries.
    pub fn normalized(mut entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidDimension("unit vector needs n >= 1".into()));
        }
        let norm = norm_sqr(&entries).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotNormalized(norm * norm));
        }
        for z in &mut entries {
            *z /= norm;
        }
        Ok(UnitVector(entries))
    }

    /// Standard basis vector `e_k` (zero-based) of `ℂ^n`.
    pub fn basis(n: usize, k: usize) -> Result<Self> {
        if n == 0 || k >= n {
            return Err(Error::InvalidDimension(format!("basis e_{k} of C^{n}")));
        }
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        v[k] = Complex64::new(1.0, 0.0);
        Ok(UnitVector(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.0)
    }
}

fn norm_sqr(z: &[Complex64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum()
}

/// `Σ conj(u_k) v_k` on raw slices of equal length.
#[inline]
pub(crate) fn dot(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        re += a.re * b.re + a.im * b.im;
        im += a.re * b.im - a.im * b.re;
    }
    Complex64::new(re, im)
}

/// `|Σ conj(u_k) v_k|²`.
#[inline]
pub(crate) fn overlap_sqr(u: &[Complex64], v: &[Complex64]) -> f64 {
    dot(u, v).norm_sqr()
}

/// Uniform point of `𝕊^n`: `2n` standard normals paired into `n` complex
/// entries, then normalized.
pub fn sample_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<UnitVector> {
    if n == 0 {
        return Err(Error::InvalidDimension("sample_uniform needs n >= 1".into()));
    }
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    fill_uniform(&mut v, rng);
    Ok(UnitVector(v))
}

/// Overwrite `buf` with a uniform point of `𝕊^{buf.len()}`.
pub(crate) fn fill_uniform<R: Rng + ?Sized>(buf: &mut [Complex64], rng: &mut R) {
    loop {
        let mut norm2 = 0.0;
        for z in buf.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z = Complex64::new(re, im);
            norm2 += re * re + im * im;
        }
        if norm2 > 0.0 {
            let inv = 1.0 / norm2.sqrt();
            for z in buf.iter_mut() {
                *z *= inv;
            }
            return;
        }
    }
}

/// `⟨u|v⟩ = Σ conj(u_k) v_k`.
pub fn inner_product(u: &UnitVector, v: &UnitVector) -> Result<Complex64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch(u.dim(), v.dim()));
    }
    Ok(dot(&u.0, &v.0))
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::domain(format!("epsilon {epsilon} outside [0, 1]")));
    }
    Ok(())
}

/// `(1 − ε²)^{n−1}` evaluated in log space.
pub(crate) fn cap_ratio_unchecked(n: usize, epsilon: f64) -> f64 {
    if n <= 1 {
        return 1.0;
    }
    ((n - 1) as f64 * (-epsilon * epsilon).ln_1p()).exp()
}

/// Normalized area of any cap `{u : |⟨u|x⟩| ≥ ε}`: `(1 − ε²)^{n−1}`.
///
/// This is also the probability that a uniform point falls in a fixed cap.
pub fn cap_area_ratio(n: usize, epsilon: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidDimension("cap_area_ratio needs n >= 1".into()));
    }
    check_epsilon(epsilon)?;
    Ok(cap_ratio_unchecked(n, epsilon))
}

/// A spherical cap `C^ε(center) = {u : |⟨u|center⟩| ≥ ε}`, `0 ≤ ε < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CapSpec {
    center: UnitVector,
    epsilon: f64,
}

impl CapSpec {
    pub fn new(center: UnitVector, epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::domain(format!("cap epsilon {epsilon} outside [0, 1)")));
        }
        Ok(CapSpec { center, epsilon })
    }

    pub fn center(&self) -> &UnitVector {
        &self.center
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

pub fn cap_contains(cap: &CapSpec, point: &UnitVector) -> Result<bool> {
    Ok(inner_product(point, &cap.center)?.norm() >= cap.epsilon)
}

/// Expected normalized area covered by `d` independent uniform caps,
/// `u_d = 1 − (1 − α)^d` with `α = (1 − ε²)^{n−1}`.
///
/// Follows from `u_d = (1 − α) u_{d−1} + α`, `u_0 = 0`: a new cap adds on
/// average the fraction `1 − u_{d−1}` of its own area.
pub fn cap_union_expected_fraction(n: usize, epsilon: f64, d: usize) -> Result<f64> {
    let alpha = cap_area_ratio(n, epsilon)?;
    if d == 0 {
        return Ok(0.0);
    }
    if alpha >= 1.0 {
        return Ok(1.0);
    }
    Ok(-(d as f64 * (-alpha).ln_1p()).exp_m1())
}

/// An `n × n` unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix(DMatrix<Complex64>);

/// Max-entry tolerance on `U†U − I`.
pub const UNITARY_TOL: f64 = 1e-10;

impl UnitaryMatrix {
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare(m.nrows(), m.ncols()));
        }
        let dev = unitarity_defect(&m);
        if dev > UNITARY_TOL {
            return Err(Error::NotOrthonormal(dev));
        }
        Ok(UnitaryMatrix(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    /// Column `k`, i.e. `U e_k`.
    pub fn column(&self, k: usize) -> UnitVector {
        UnitVector(self.0.column(k).iter().copied().collect())
    }

    pub fn apply(&self, v: &UnitVector) -> Result<UnitVector> {
        if v.dim() != self.dim() {
            return Err(Error::DimensionMismatch(self.dim(), v.dim()));
        }
        let n = self.dim();
        let out = (0..n)
            .map(|i| (0..n).map(|k| self.0[(i, k)] * v.0[k]).sum())
            .collect();
        Ok(UnitVector(out))
    }
}

/// `max_{ij} |(U†U − I)_{ij}|`.
pub fn unitarity_defect(m: &DMatrix<Complex64>) -> f64 {
    let g = m.adjoint() * m;
    let mut dev: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    dev
}

/// Haar-distributed unitary: complex Ginibre matrix, QR, then each column of
/// `Q` multiplied by the phase of the matching diagonal entry of `R` so that
/// the factorization is unique and the law exactly Haar.
pub fn sample_haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<UnitaryMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension("sample_haar_unitary needs n >= 1".into()));
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let g = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..n {
        let rkk = r[(k, k)];
        let norm = rkk.norm();
        let phase = if norm > 0.0 {
            rkk / norm
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, k)] *= phase;
        }
    }
    Ok(UnitaryMatrix(q))
}

/// Characteristic time to equilibrium of unit-rate Brownian motion on `𝕊^n`,
/// asymptotically `ln(2n) / (4n)`.
pub fn mixing_time_estimate(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain(format!("mixing_time_estimate needs n >= 2, got {n}")));
    }
    let n = n as f64;
    Ok((2.0 * n).ln() / (4.0 * n))
}

/// Isotropic diffusion on `𝕊^n` with generator `g·Δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianConfig {
    diffusion_rate: f64,
    step_dt: f64,
    start: UnitVector,
}

impl BrownianConfig {
    /// Per-step displacement scale `√(2·g·dt·(2n − 1))` must stay below 0.5.
    pub fn new(start: UnitVector, diffusion_rate: f64, step_dt: f64) -> Result<Self> {
        if !(diffusion_rate > 0.0) || !diffusion_rate.is_finite() {
            return Err(Error::domain(format!("diffusion rate {diffusion_rate} must be > 0")));
        }
        if !(step_dt > 0.0) || !step_dt.is_finite() {
            return Err(Error::domain(format!("step dt {step_dt} must be > 0")));
        }
        let n = start.dim();
        let scale = (2.0 * diffusion_rate * step_dt * (2 * n - 1) as f64).sqrt();
        if scale >= 0.5 {
            return Err(Error::UnstableStep(scale));
        }
        Ok(BrownianConfig {
            diffusion_rate,
            step_dt,
            start,
        })
    }

    /// Step `min(1e-3, T(𝕊^n)/100)` (just `1e-3` when `n = 1`).
    pub fn with_default_step(start: UnitVector, diffusion_rate: f64) -> Result<Self> {
        let dt = default_step(start.dim());
        Self::new(start, diffusion_rate, dt)
    }

    pub fn dimension(&self) -> usize {
        self.start.dim()
    }

    pub fn diffusion_rate(&self) -> f64 {
        self.diffusion_rate
    }

    pub fn step_dt(&self) -> f64 {
        self.step_dt
    }

    pub fn start(&self) -> &UnitVector {
        &self.start
    }
}

pub fn default_step(n: usize) -> f64 {
    match mixing_time_estimate(n) {
        Ok(t) => (t / 100.0).min(1e-3),
        Err(_) => 1e-3,
    }
}

/// Simulate the diffusion for `total_time` and return the endpoint.
///
/// Each step draws a Gaussian in `ℝ^{2n}` with variance `2·g·h` per real
/// coordinate, removes its component along the current point (real scalar
/// product), adds it and renormalizes. The step kernel commutes with every
/// rotation of `ℝ^{2n}`, so the uniform law is invariant for any step size.
/// The last step is shortened so the run ends exactly at `total_time`.
pub fn brownian_evolve<R: Rng + ?Sized>(
    cfg: &BrownianConfig,
    total_time: f64,
    rng: &mut R,
) -> Result<UnitVector> {
    if !(total_time >= 0.0) || !total_time.is_finite() {
        return Err(Error::domain(format!("total_time {total_time} must be >= 0")));
    }
    let mut x = cfg.start.0.clone();
    if total_time == 0.0 {
        return Ok(UnitVector(x));
    }
    let steps = (total_time / cfg.step_dt).ceil().max(1.0) as u64;
    let h = total_time / steps as f64;
    let sigma = (2.0 * cfg.diffusion_rate * h).sqrt();
    let mut xi = vec![Complex64::new(0.0, 0.0); x.len()];
    for _ in 0..steps {
        let mut radial = 0.0;
        for (z, p) in xi.iter_mut().zip(&x) {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z = Complex64::new(re * sigma, im * sigma);
            radial += z.re * p.re + z.im * p.im;
        }
        let mut norm2 = 0.0;
        for (p, z) in x.iter_mut().zip(&xi) {
            *p += *z - *p * radial;
            norm2 += p.norm_sqr();
        }
        let inv = 1.0 / norm2.sqrt();
        for p in x.iter_mut() {
            *p *= inv;
        }
    }
    Ok(UnitVector(x))
}
