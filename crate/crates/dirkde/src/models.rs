//! Target densities — von Mises–Fisher, normal, and their mixtures — along
//! with seeded samplers and the density derivatives entering the bias
//! expansions.
//!
//! Derivatives are taken under the radial extension `f(x) ≡ f(x/‖x‖)`, so
//! the gradient-plus-curvature functional of the directional bias term has
//! the closed vMF form
//! `Ψ(f_vM, x) = κ C_q(κ) e^{κ xᵀμ} (−xᵀμ + κ q^{−1}(1 − (xᵀμ)²))`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::sphere::{
    complete_basis, integrate_line, integrate_sphere, integrate_sphere_line, LineGrid, SphereGrid,
    UnitVector,
};
use crate::special::log_cq_raw;

/// A von Mises–Fisher component `vM(μ, κ)` on `Ω_q`.
#[derive(Debug, Clone)]
pub struct VmfComponent {
    mu: UnitVector,
    kappa: f64,
    /// Cached `ln C_q(κ)`.
    log_norm: f64,
}

impl VmfComponent {
    pub fn new(mu: UnitVector, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::Domain(format!(
                "vMF concentration must be finite and >= 0, got {kappa}"
            )));
        }
        let log_norm = log_cq_raw(mu.q(), kappa);
        Ok(Self {
            mu,
            kappa,
            log_norm,
        })
    }

    pub fn mu(&self) -> &UnitVector {
        &self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn q(&self) -> u32 {
        self.mu.q()
    }

    /// `ln C_q(κ)` for this component.
    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// `C_q(κ) e^{κ xᵀμ}`.
    pub fn density(&self, x: &UnitVector) -> Result<f64> {
        self.mu.check_same_sphere(x)?;
        Ok(self.density_raw(x))
    }

    #[inline]
    pub(crate) fn density_raw(&self, x: &UnitVector) -> f64 {
        (self.log_norm + self.kappa * x.dot(&self.mu)).exp()
    }
}

/// A normal component `N(m, σ²)` on the line.
#[derive(Debug, Clone, Copy)]
pub struct NormalComponent {
    pub mean: f64,
    pub sigma: f64,
}

impl NormalComponent {
    pub fn new(mean: f64, sigma: f64) -> Result<Self> {
        if !mean.is_finite() || !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!(
                "normal component needs finite mean and sigma > 0, got ({mean}, {sigma})"
            )));
        }
        Ok(Self { mean, sigma })
    }

    /// `φ_σ(z − m)`.
    #[inline]
    pub fn density(&self, z: f64) -> f64 {
        gaussian_density(z - self.mean, self.sigma)
    }

    /// Second derivative `φ_σ''(z − m) = φ_σ(z − m)((z−m)²/σ⁴ − 1/σ²)`.
    #[inline]
    pub fn density_second_derivative(&self, z: f64) -> f64 {
        let u = z - self.mean;
        let s2 = self.sigma * self.sigma;
        self.density(z) * (u * u / (s2 * s2) - 1.0 / s2)
    }
}

/// `φ_σ(u)`, the N(0, σ²) density.
#[inline]
pub fn gaussian_density(u: f64, sigma: f64) -> f64 {
    (-0.5 * (u / sigma) * (u / sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

fn validate_weights(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::Domain("a mixture needs at least one component".into()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Domain("mixture weights must be finite and >= 0".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "mixture weights sum to {total}, not 1"
        )));
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

/// An r-component mixture of von Mises–Fisher densities on a common `Ω_q`.
#[derive(Debug, Clone)]
pub struct DirMixture {
    weights: Vec<f64>,
    components: Vec<VmfComponent>,
}

impl DirMixture {
    pub fn new(weights: Vec<f64>, components: Vec<VmfComponent>) -> Result<Self> {
        let weights = validate_weights(&weights)?;
        if weights.len() != components.len() {
            return Err(Error::Domain(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        let q = components[0].q();
        if components.iter().any(|c| c.q() != q) {
            return Err(Error::DimensionMismatch {
                expected: q as usize + 1,
                got: components.iter().map(|c| c.q()).max().unwrap() as usize + 1,
            });
        }
        Ok(Self {
            weights,
            components,
        })
    }

    pub fn q(&self) -> u32 {
        self.components[0].q()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[VmfComponent] {
        &self.components
    }

    /// Mixture density at `x`.
    pub fn density(&self, x: &UnitVector) -> Result<f64> {
        self.components[0].mu().check_same_sphere(x)?;
        Ok(self
            .weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w * c.density_raw(x))
            .sum())
    }

    /// Draws n i.i.d. points; deterministic for a given seed.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<UnitVector> {
        let mut rng = rng_from_seed(seed);
        self.sample_with_rng(n, &mut rng)
    }

    pub(crate) fn sample_with_rng(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<UnitVector> {
        (0..n)
            .map(|_| {
                let j = pick_component(&self.weights, rng);
                sample_vmf(&self.components[j], rng)
            })
            .collect()
    }

}

/// An r-component mixture of normal densities on the line.
#[derive(Debug, Clone)]
pub struct LinMixture {
    weights: Vec<f64>,
    components: Vec<NormalComponent>,
}

impl LinMixture {
    pub fn new(weights: Vec<f64>, components: Vec<NormalComponent>) -> Result<Self> {
        let weights = validate_weights(&weights)?;
        if weights.len() != components.len() {
            return Err(Error::Domain(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        Ok(Self {
            weights,
            components,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[NormalComponent] {
        &self.components
    }

    pub fn density(&self, z: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w * c.density(z))
            .sum()
    }

    /// Second derivative of the mixture density.
    pub fn density_second_derivative(&self, z: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w * c.density_second_derivative(z))
            .sum()
    }

    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        self.sample_with_rng(n, &mut rng)
    }

    pub(crate) fn sample_with_rng(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let j = pick_component(&self.weights, rng);
                let c = &self.components[j];
                let g: f64 = rng.sample(StandardNormal);
                c.mean + c.sigma * g
            })
            .collect()
    }
}

/// An r-component mixture of independent vMF × normal products on
/// `Ω_q × ℝ`; directional component j pairs with linear component j.
#[derive(Debug, Clone)]
pub struct DirLinMixture {
    weights: Vec<f64>,
    dir: Vec<VmfComponent>,
    lin: Vec<NormalComponent>,
}

impl DirLinMixture {
    pub fn new(
        weights: Vec<f64>,
        dir: Vec<VmfComponent>,
        lin: Vec<NormalComponent>,
    ) -> Result<Self> {
        let weights = validate_weights(&weights)?;
        if weights.len() != dir.len() || dir.len() != lin.len() {
            return Err(Error::Domain(format!(
                "{} weights, {} directional and {} linear components",
                weights.len(),
                dir.len(),
                lin.len()
            )));
        }
        let q = dir[0].q();
        if dir.iter().any(|c| c.q() != q) {
            return Err(Error::DimensionMismatch {
                expected: q as usize + 1,
                got: dir.iter().map(|c| c.q()).max().unwrap() as usize + 1,
            });
        }
        Ok(Self { weights, dir, lin })
    }

    pub fn q(&self) -> u32 {
        self.dir[0].q()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dir_components(&self) -> &[VmfComponent] {
        &self.dir
    }

    pub fn lin_components(&self) -> &[NormalComponent] {
        &self.lin
    }

    /// The directional marginal (same weights, vMF components).
    pub fn dir_marginal(&self) -> DirMixture {
        DirMixture {
            weights: self.weights.clone(),
            components: self.dir.clone(),
        }
    }

    pub fn density(&self, x: &UnitVector, z: f64) -> Result<f64> {
        self.dir[0].mu().check_same_sphere(x)?;
        Ok(self
            .weights
            .iter()
            .zip(self.dir.iter().zip(&self.lin))
            .map(|(w, (d, l))| w * d.density_raw(x) * l.density(z))
            .sum())
    }

    pub fn sample(&self, n: usize, seed: u64) -> Vec<(UnitVector, f64)> {
        let mut rng = rng_from_seed(seed);
        self.sample_with_rng(n, &mut rng)
    }

    pub(crate) fn sample_with_rng(
        &self,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Vec<(UnitVector, f64)> {
        (0..n)
            .map(|_| {
                let j = pick_component(&self.weights, rng);
                let x = sample_vmf(&self.dir[j], rng);
                let g: f64 = rng.sample(StandardNormal);
                (x, self.lin[j].mean + self.lin[j].sigma * g)
            })
            .collect()
    }

    #[cfg(test)]
    pub(crate) fn sample_components(&self, n: usize, seed: u64) -> Vec<usize> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| {
                let j = pick_component(&self.weights, &mut rng);
                sample_vmf(&self.dir[j], &mut rng);
                let _: f64 = rng.sample(StandardNormal);
                j
            })
            .collect()
    }
}

/// Deterministic generator for a seed; replicate-derived generators use
/// [`rng_for_replicate`].
pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for replicate `rep` of a seeded experiment: the 256-bit key
/// carries (seed, rep) directly, so replicates are independent streams.
pub(crate) fn rng_for_replicate(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&rep.to_le_bytes());
    key[16] = 0x9e;
    ChaCha8Rng::from_seed(key)
}

fn pick_component(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (j, w) in weights.iter().enumerate() {
        cum += w;
        if u < cum {
            return j;
        }
    }
    weights.len() - 1
}

/// Uniform draw on `Ω_q` via a normalized Gaussian vector.
fn sample_uniform_sphere(q: u32, rng: &mut ChaCha8Rng) -> UnitVector {
    loop {
        let coords: Vec<f64> = (0..=q).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        if let Ok(u) = UnitVector::new(coords) {
            return u;
        }
    }
}

/// One vMF draw by the tangent-normal decomposition: t from the density
/// `∝ e^{κt}(1−t²)^{q/2−1}` by rejection, ξ uniform on `Ω_{q−1}`, composed
/// as `x = tμ + √(1−t²) B_μ ξ`.
///
/// For q ≥ 2 the proposal is the truncated exponential `∝ e^{κt}` with
/// acceptance `(1−t²)^{q/2−1} ≤ 1` (acceptance 1 at q = 2, ≈ 0.4 at q = 3,
/// κ = 10). For q = 1 the angle `θ = arccos t` is drawn against a Gaussian
/// envelope from `cos θ ≤ 1 − 2θ²/π²` (acceptance ≈ 2/π uniformly in κ),
/// or a uniform proposal when κ < 1/2.
pub(crate) fn sample_vmf(c: &VmfComponent, rng: &mut ChaCha8Rng) -> UnitVector {
    let q = c.q();
    let kappa = c.kappa;
    if kappa < 1e-8 {
        return sample_uniform_sphere(q, rng);
    }
    let t = if q == 1 {
        sample_cos_angle_q1(kappa, rng)
    } else {
        sample_polar_cosine(q, kappa, rng)
    };
    let basis = complete_basis(&c.mu);
    let xi: Vec<f64> = if q == 1 {
        vec![if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 }]
    } else {
        loop {
            let raw: Vec<f64> = (0..q).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm: f64 = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break raw.into_iter().map(|v| v / norm).collect();
            }
        }
    };
    let tangent = basis.from_tangent(&xi);
    let s = (1.0 - t * t).max(0.0).sqrt();
    let coords: Vec<f64> = c
        .mu
        .coords()
        .iter()
        .zip(&tangent)
        .map(|(&m, &b)| t * m + s * b)
        .collect();
    UnitVector::new(coords).expect("vMF draw is on the sphere")
}

fn sample_cos_angle_q1(kappa: f64, rng: &mut ChaCha8Rng) -> f64 {
    let pi = std::f64::consts::PI;
    if kappa < 0.5 {
        // uniform proposal on [0, π], acceptance >= e^{-2κ} >= e^{-1}
        loop {
            let theta = pi * rng.random::<f64>();
            if rng.random::<f64>() < (kappa * (theta.cos() - 1.0)).exp() {
                return theta.cos();
            }
        }
    }
    // half-normal proposal matching the envelope e^{κ(1 − 2θ²/π²)}
    let sigma = pi / (2.0 * kappa.sqrt());
    loop {
        let theta = (rng.sample::<f64, _>(StandardNormal) * sigma).abs();
        if theta > pi {
            continue;
        }
        let log_accept = kappa * (theta.cos() - 1.0) + 2.0 * kappa * theta * theta / (pi * pi);
        if rng.random::<f64>().ln() < log_accept {
            return theta.cos();
        }
    }
}

fn sample_polar_cosine(q: u32, kappa: f64, rng: &mut ChaCha8Rng) -> f64 {
    let expo = q as f64 / 2.0 - 1.0;
    loop {
        // inverse CDF of the truncated exponential ∝ e^{κt} on [-1, 1]
        let u: f64 = rng.random();
        let t = 1.0 + (u + (1.0 - u) * (-2.0 * kappa).exp()).ln() / kappa;
        let accept = (1.0 - t * t).max(0.0).powf(expo);
        if rng.random::<f64>() < accept {
            return t.clamp(-1.0, 1.0);
        }
    }
}

/// Directional bias functional
/// `Ψ(f, x) = Σ_j p_j κ_j C_q(κ_j) e^{κ_j xᵀμ_j}(−xᵀμ_j + κ_j q^{−1}(1 − (xᵀμ_j)²))`
/// for a vMF mixture under the radial extension.
pub fn psi_dir(m: &DirMixture, x: &UnitVector) -> f64 {
    let qf = m.q() as f64;
    m.weights
        .iter()
        .zip(&m.components)
        .map(|(w, c)| {
            let t = x.dot(&c.mu);
            w * c.kappa
                * (c.log_norm + c.kappa * t).exp()
                * (-t + c.kappa * (1.0 - t * t) / qf)
        })
        .sum()
}

/// Directional bias functional of the joint density,
/// `Ψ_x(f, x, z) = Σ_j p_j φ_{σ_j}(z − m_j) · [vMF component-j Ψ term]`
/// (the directional operator passes through the independent linear factor).
pub fn psi_x_dirlin(m: &DirLinMixture, x: &UnitVector, z: f64) -> f64 {
    let qf = m.q() as f64;
    m.weights
        .iter()
        .zip(m.dir.iter().zip(&m.lin))
        .map(|(w, (d, l))| {
            let t = x.dot(&d.mu);
            w * l.density(z)
                * d.kappa
                * (d.log_norm + d.kappa * t).exp()
                * (-t + d.kappa * (1.0 - t * t) / qf)
        })
        .sum()
}

/// Second partial derivative in the linear coordinate,
/// `ℋ_z f(x, z) = Σ_j p_j f_vM(x; μ_j, κ_j) φ_{σ_j}''(z − m_j)`.
pub fn hz_dirlin(m: &DirLinMixture, x: &UnitVector, z: f64) -> f64 {
    m.weights
        .iter()
        .zip(m.dir.iter().zip(&m.lin))
        .map(|(w, (d, l))| w * d.density_raw(x) * l.density_second_derivative(z))
        .sum()
}

/// `R(Ψ(f, ·)) = ∫_{Ω_q} Ψ(f, x)² ω_q(dx)`, the directional curvature
/// functional of the AMISE bias term.
#[derive(Debug, Clone, Copy)]
pub struct DirCurvature {
    pub r_psi: f64,
}

pub fn curvature_dir(m: &DirMixture, grid: &SphereGrid) -> Result<DirCurvature> {
    let r_psi = integrate_sphere(|x| psi_dir(m, x).powi(2), grid)?;
    Ok(DirCurvature { r_psi })
}

/// Joint curvature functionals `I[Ψ_x²]`, `I[ℋ_z²]` and `I[Ψ_x ℋ_z]` over
/// `Ω_q × ℝ`.
#[derive(Debug, Clone, Copy)]
pub struct DirLinCurvature {
    pub i_psi_sq: f64,
    pub i_hz_sq: f64,
    pub i_cross: f64,
}

pub fn curvature_dirlin(
    m: &DirLinMixture,
    sgrid: &SphereGrid,
    lgrid: &LineGrid,
) -> Result<DirLinCurvature> {
    let i_psi_sq = integrate_sphere_line(|x, z| psi_x_dirlin(m, x, z).powi(2), sgrid, lgrid)?;
    let i_hz_sq = integrate_sphere_line(|x, z| hz_dirlin(m, x, z).powi(2), sgrid, lgrid)?;
    let i_cross =
        integrate_sphere_line(|x, z| psi_x_dirlin(m, x, z) * hz_dirlin(m, x, z), sgrid, lgrid)?;
    Ok(DirLinCurvature {
        i_psi_sq,
        i_hz_sq,
        i_cross,
    })
}

/// `R(f'') = ∫ f''(z)² dz` for a normal mixture (linear AMISE curvature).
pub fn curvature_lin(m: &LinMixture, lgrid: &LineGrid) -> Result<f64> {
    integrate_line(|z| m.density_second_derivative(z).powi(2), lgrid)
}

/// Integration window for a set of normal components widened by a
/// bandwidth g: `[min_j m_j − 8 max_j σ_j − 8g, max_j m_j + 8 max_j σ_j + 8g]`
/// as `(center, half-width)`. Gaussian tails are below 1e-14 beyond 8
/// standard deviations; the bandwidth widens the support of smoothed
/// quantities.
pub fn line_window(components: &[NormalComponent], g: f64) -> (f64, f64) {
    let min_m = components.iter().map(|c| c.mean).fold(f64::INFINITY, f64::min);
    let max_m = components.iter().map(|c| c.mean).fold(f64::NEG_INFINITY, f64::max);
    let max_s = components.iter().map(|c| c.sigma).fold(0.0, f64::max);
    let lo = min_m - 8.0 * max_s - 8.0 * g;
    let hi = max_m + 8.0 * max_s + 8.0 * g;
    (0.5 * (lo + hi), 0.5 * (hi - lo))
}

/// Reference mixtures used across the test-suites and shipped as example
/// model files by the CLI.
pub mod reference {
    use super::*;

    fn axis(q: u32, last: bool, sign: f64) -> UnitVector {
        let mut c = vec![0.0; q as usize + 1];
        if last {
            c[q as usize] = sign;
        } else {
            c[0] = sign;
        }
        UnitVector::new(c).unwrap()
    }

    /// Three-component vMF mixture on `Ω_q`:
    /// `2/5 vM((1,0_q), 2) + 2/5 vM((0_q,1), 10) + 1/5 vM((−1,0_q), 2)`.
    pub fn vm_mixture(q: u32) -> DirMixture {
        DirMixture::new(
            vec![0.4, 0.4, 0.2],
            vec![
                VmfComponent::new(axis(q, false, 1.0), 2.0).unwrap(),
                VmfComponent::new(axis(q, true, 1.0), 10.0).unwrap(),
                VmfComponent::new(axis(q, false, -1.0), 2.0).unwrap(),
            ],
        )
        .unwrap()
    }

    /// Three-component vMF × normal mixture on `Ω_q × ℝ`:
    /// `2/5 vM((1,0_q),2)×N(0,1/4) + 2/5 vM((0_q,1),10)×N(1,1)
    ///  + 1/5 vM((−1,0_q),2)×N(2,1)`.
    pub fn vm_normal_mixture(q: u32) -> DirLinMixture {
        DirLinMixture::new(
            vec![0.4, 0.4, 0.2],
            vec![
                VmfComponent::new(axis(q, false, 1.0), 2.0).unwrap(),
                VmfComponent::new(axis(q, true, 1.0), 10.0).unwrap(),
                VmfComponent::new(axis(q, false, -1.0), 2.0).unwrap(),
            ],
            vec![
                NormalComponent::new(0.0, 0.5).unwrap(),
                NormalComponent::new(1.0, 1.0).unwrap(),
                NormalComponent::new(2.0, 1.0).unwrap(),
            ],
        )
        .unwrap()
    }

    /// Three-component normal mixture `2/5 N(0,1/4) + 2/5 N(1,1) + 1/5 N(2,1)`.
    pub fn normal_mixture() -> LinMixture {
        LinMixture::new(
            vec![0.4, 0.4, 0.2],
            vec![
                NormalComponent::new(0.0, 0.5).unwrap(),
                NormalComponent::new(1.0, 1.0).unwrap(),
                NormalComponent::new(2.0, 1.0).unwrap(),
            ],
        )
        .unwrap()
    }
}
