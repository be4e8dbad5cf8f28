//! Error functionals of the estimators: exact MISE for vMF / vMF-normal
//! mixture targets, asymptotic MISE and its optimal bandwidths, closed-form
//! smooth-bootstrap MISE, pointwise bias/variance decompositions, a seeded
//! Monte Carlo ISE oracle, an empirical normality check, and the scalar /
//! two-dimensional minimizers used on the risk curves.
//!
//! All formulas here assume the von Mises directional kernel (and the
//! Gaussian linear kernel where a linear part is present); they are the
//! cases with closed-form convolutions.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kde::{
    eval_dirlin, eval_grid_dir, eval_grid_dirlin, Bandwidths, DirLinSample, DirSample,
};
use crate::kernels::{c_hq, DirectionalKernel, KernelConstants, LinearKernel};
use crate::models::{
    gaussian_density, hz_dirlin, psi_dir, psi_x_dirlin, rng_for_replicate, sample_vmf,
    DirLinCurvature, DirLinMixture, DirMixture, LinMixture, NormalComponent, VmfComponent,
};
use crate::special::{dq_factor, log_cq_raw};
use crate::sphere::{
    integrate_sphere, integrate_sphere_line, KahanSum, LineGrid, SphereGrid, UnitVector,
};

/// The pairwise vMF cross-product integrals entering the exact-MISE
/// quadratic form, at kernel convolution orders 0, 1 and 2:
///
/// * `psi0[i][j] = C_q(κ_i)C_q(κ_j) / C_q(‖κ_iμ_i + κ_jμ_j‖)` (closed form),
/// * `psi1[i][j] = C_q(1/h²) C_q(κ_i)C_q(κ_j)
///    ∫ e^{κ_j xᵀμ_j} / C_q(‖x/h² + κ_iμ_i‖) ω_q(dx)`,
/// * `psi2[i][j] = C_q(1/h²)² C_q(κ_i)C_q(κ_j)
///    ∫ [C_q(‖x/h² + κ_iμ_i‖) C_q(‖x/h² + κ_jμ_j‖)]^{-1} ω_q(dx)`,
///
/// with every `C_q` factor combined in log space before exponentiation, so
/// small bandwidths cannot overflow.
#[derive(Debug, Clone)]
pub struct PsiMatrices {
    pub psi0: Vec<Vec<f64>>,
    pub psi1: Vec<Vec<f64>>,
    pub psi2: Vec<Vec<f64>>,
    pub h: f64,
}

/// Pairwise Gaussian convolution matrices of the linear part:
/// `omega_a[i][j] = φ_{σ_a}(m_i − m_j)`, `σ_a = (a g² + σ_i² + σ_j²)^{1/2}`.
#[derive(Debug, Clone)]
pub struct OmegaMatrices {
    pub omega0: Vec<Vec<f64>>,
    pub omega1: Vec<Vec<f64>>,
    pub omega2: Vec<Vec<f64>>,
    pub g: f64,
}

/// Computes the Ψ matrices for vMF components at bandwidth h by sphere
/// quadrature (Ψ₀ by its closed form).
pub fn psi_matrices(
    components: &[VmfComponent],
    h: f64,
    grid: &SphereGrid,
) -> Result<PsiMatrices> {
    if components.is_empty() {
        return Err(Error::Domain("psi_matrices needs components".into()));
    }
    let q = components[0].q();
    if grid.q() != q {
        return Err(Error::DimensionMismatch {
            expected: q as usize + 1,
            got: grid.q() as usize + 1,
        });
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Domain(format!("psi_matrices requires h > 0, got {h}")));
    }
    let z = 1.0 / (h * h);
    if !z.is_finite() {
        return Err(Error::Domain(format!(
            "1/h^2 is not representable for h = {h}"
        )));
    }
    let r = components.len();
    let nnodes = grid.len();
    let lcz = log_cq_raw(q, z);

    // Per (component, node): xᵀμ_i and ln C_q(‖x/h² + κ_iμ_i‖).
    let mut dots = vec![0.0; r * nnodes];
    let mut lc_shift = vec![0.0; r * nnodes];
    for (i, comp) in components.iter().enumerate() {
        let kappa = comp.kappa();
        for (a, x) in grid.nodes().iter().enumerate() {
            let t = x.dot(comp.mu());
            let norm = (z * z + 2.0 * z * kappa * t + kappa * kappa).max(0.0).sqrt();
            dots[i * nnodes + a] = t;
            lc_shift[i * nnodes + a] = log_cq_raw(q, norm);
        }
    }

    let mut psi0 = vec![vec![0.0; r]; r];
    let mut psi1 = vec![vec![0.0; r]; r];
    let mut psi2 = vec![vec![0.0; r]; r];
    for i in 0..r {
        let ci = &components[i];
        for j in 0..r {
            let cj = &components[j];
            let lpref = ci.log_norm() + cj.log_norm();

            // Ψ₀: closed form via ‖κ_iμ_i + κ_jμ_j‖ (κ_iμ_i + κ_jμ_j = 0
            // falls into the C_q(0) = 1/ω_q branch automatically).
            let mut s2 = 0.0;
            for (mi, mj) in ci.mu().coords().iter().zip(cj.mu().coords()) {
                let v = ci.kappa() * mi + cj.kappa() * mj;
                s2 += v * v;
            }
            psi0[i][j] = (lpref - log_cq_raw(q, s2.sqrt())).exp();

            let mut acc1 = KahanSum::new();
            let mut acc2 = KahanSum::new();
            for (a, &w) in grid.weights().iter().enumerate() {
                let lci = lc_shift[i * nnodes + a];
                let lcj = lc_shift[j * nnodes + a];
                let tj = dots[j * nnodes + a];
                acc1.add(w * (lpref + lcz + cj.kappa() * tj - lci).exp());
                acc2.add(w * (lpref + 2.0 * lcz - lci - lcj).exp());
            }
            psi1[i][j] = acc1.value();
            psi2[i][j] = acc2.value();
        }
    }
    Ok(PsiMatrices {
        psi0,
        psi1,
        psi2,
        h,
    })
}

/// Maximum absolute entry change of the Ψ matrices between two grids;
/// a refinement check for quadrature resolution.
pub fn psi_matrices_refinement_delta(
    components: &[VmfComponent],
    h: f64,
    coarse: &SphereGrid,
    fine: &SphereGrid,
) -> Result<f64> {
    let a = psi_matrices(components, h, coarse)?;
    let b = psi_matrices(components, h, fine)?;
    let mut delta = 0.0_f64;
    for (ma, mb) in [(&a.psi0, &b.psi0), (&a.psi1, &b.psi1), (&a.psi2, &b.psi2)] {
        for (ra, rb) in ma.iter().zip(mb) {
            for (va, vb) in ra.iter().zip(rb) {
                delta = delta.max((va - vb).abs());
            }
        }
    }
    Ok(delta)
}

/// Computes the Ω matrices for normal components at bandwidth g.
pub fn omega_matrices(components: &[NormalComponent], g: f64) -> Result<OmegaMatrices> {
    if components.is_empty() {
        return Err(Error::Domain("omega_matrices needs components".into()));
    }
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::Domain(format!(
            "omega_matrices requires g > 0, got {g}"
        )));
    }
    let r = components.len();
    let build = |a: f64| -> Vec<Vec<f64>> {
        (0..r)
            .map(|i| {
                (0..r)
                    .map(|j| {
                        let ci = &components[i];
                        let cj = &components[j];
                        let sigma =
                            (a * g * g + ci.sigma * ci.sigma + cj.sigma * cj.sigma).sqrt();
                        gaussian_density(ci.mean - cj.mean, sigma)
                    })
                    .collect()
            })
            .collect()
    };
    Ok(OmegaMatrices {
        omega0: build(0.0),
        omega1: build(1.0),
        omega2: build(2.0),
        g,
    })
}

/// `pᵀ[(1 − n⁻¹) M₂ − 2 M₁ + M₀] p`.
fn quadratic_form(
    p: &[f64],
    m2: &[Vec<f64>],
    m1: &[Vec<f64>],
    m0: &[Vec<f64>],
    n: usize,
) -> f64 {
    let nf = n as f64;
    let mut acc = KahanSum::new();
    for (i, &pi) in p.iter().enumerate() {
        for (j, &pj) in p.iter().enumerate() {
            let entry = (1.0 - 1.0 / nf) * m2[i][j] - 2.0 * m1[i][j] + m0[i][j];
            acc.add(pi * pj * entry);
        }
    }
    acc.value()
}

fn check_n(n: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::Domain("sample size must be >= 1".into()));
    }
    Ok(())
}

/// Exact MISE of the Gaussian-kernel linear estimator for a normal mixture:
/// `(2π^{1/2} g n)⁻¹ + pᵀ[(1 − n⁻¹)Ω₂ − 2Ω₁ + Ω₀]p`.
pub fn exact_mise_linear(m: &LinMixture, g: f64, n: usize) -> Result<f64> {
    check_n(n)?;
    let om = omega_matrices(m.components(), g)?;
    Ok(1.0 / (2.0 * std::f64::consts::PI.sqrt() * g * n as f64)
        + quadratic_form(m.weights(), &om.omega2, &om.omega1, &om.omega0, n))
}

/// Exact MISE of the von Mises-kernel directional estimator for a vMF
/// mixture: `D_q(h)/n + pᵀ[(1 − n⁻¹)Ψ₂ − 2Ψ₁ + Ψ₀]p` with
/// `D_q(h) = C_q(1/h²)² / C_q(2/h²) = c_{h,q}² / c_{h/√2,q}`.
///
/// `D_q(h)/n` is the second-moment (variance) term: it equals
/// `c_{h,q} d_q (1 + o(1))/n` as h → 0 and is what the Monte Carlo ISE
/// oracle reproduces.
pub fn exact_mise_dir(m: &DirMixture, h: f64, n: usize, grid: &SphereGrid) -> Result<f64> {
    let psi = psi_matrices(m.components(), h, grid)?;
    exact_mise_dir_with(m, &psi, n)
}

/// Same as [`exact_mise_dir`] with precomputed Ψ matrices (their h is
/// reused), for sweeps over n.
pub fn exact_mise_dir_with(m: &DirMixture, psi: &PsiMatrices, n: usize) -> Result<f64> {
    check_n(n)?;
    let d = dq_factor(m.q(), psi.h)?;
    Ok(d / n as f64 + quadratic_form(m.weights(), &psi.psi2, &psi.psi1, &psi.psi0, n))
}

/// Exact MISE of the von Mises-normal product-kernel estimator for a
/// vMF × normal mixture:
/// `D_q(h)/(2π^{1/2} g n) + pᵀ[(1 − n⁻¹)Ψ₂∘Ω₂ − 2Ψ₁∘Ω₁ + Ψ₀∘Ω₀]p`
/// (∘ is the entrywise product; the leading term combines the directional
/// second-moment factor `D_q(h)` with the Gaussian-kernel `R(K)/g`).
pub fn exact_mise_dirlin(
    m: &DirLinMixture,
    h: f64,
    g: f64,
    n: usize,
    grid: &SphereGrid,
) -> Result<f64> {
    let psi = psi_matrices(m.dir_components(), h, grid)?;
    exact_mise_dirlin_with(m, &psi, g, n)
}

/// Same as [`exact_mise_dirlin`] with precomputed Ψ matrices.
pub fn exact_mise_dirlin_with(
    m: &DirLinMixture,
    psi: &PsiMatrices,
    g: f64,
    n: usize,
) -> Result<f64> {
    check_n(n)?;
    let om = omega_matrices(m.lin_components(), g)?;
    let r = m.weights().len();
    let had = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..r)
            .map(|i| (0..r).map(|j| a[i][j] * b[i][j]).collect())
            .collect()
    };
    let m2 = had(&psi.psi2, &om.omega2);
    let m1 = had(&psi.psi1, &om.omega1);
    let m0 = had(&psi.psi0, &om.omega0);
    let d = dq_factor(m.q(), psi.h)?;
    Ok(d / (2.0 * std::f64::consts::PI.sqrt() * g * n as f64)
        + quadratic_form(m.weights(), &m2, &m1, &m0, n))
}

/// AMISE of the directional estimator,
/// `b_q² R(Ψ) h⁴ + d_q / (λ_q h^q n)` (the normalizing constant enters
/// through its h → 0 equivalent `c_{h,q} ~ (λ_q h^q)⁻¹`, which is what the
/// closed-form optimal bandwidth differentiates).
pub fn amise_dir_value(r_psi: f64, h: f64, n: usize, kc: &KernelConstants) -> f64 {
    kc.b_q * kc.b_q * r_psi * h.powi(4)
        + kc.d_q / (kc.lambda_q * h.powi(kc.q as i32) * n as f64)
}

/// AMISE of the directional estimator, computing `R(Ψ)` by quadrature.
pub fn amise_dir(
    m: &DirMixture,
    h: f64,
    n: usize,
    kc: &KernelConstants,
    grid: &SphereGrid,
) -> Result<f64> {
    check_n(n)?;
    let r_psi = crate::models::curvature_dir(m, grid)?.r_psi;
    Ok(amise_dir_value(r_psi, h, n, kc))
}

/// AMISE of the directional-linear estimator from precomputed curvature
/// functionals:
/// `b_q² I[Ψ_x²] h⁴ + ¼μ₂(K)² I[ℋ_z²] g⁴ + b_q μ₂(K) I[Ψ_x ℋ_z] h²g²
///  + d_q R(K) / (λ_q h^q g n)`.
pub fn amise_dirlin_value(
    curv: &DirLinCurvature,
    h: f64,
    g: f64,
    n: usize,
    kc: &KernelConstants,
) -> f64 {
    kc.b_q * kc.b_q * curv.i_psi_sq * h.powi(4)
        + 0.25 * kc.mu2_k * kc.mu2_k * curv.i_hz_sq * g.powi(4)
        + kc.b_q * kc.mu2_k * curv.i_cross * h * h * g * g
        + kc.d_q * kc.r_k / (kc.lambda_q * h.powi(kc.q as i32) * g * n as f64)
}

/// AMISE of the directional-linear estimator, computing the curvature
/// functionals by quadrature.
pub fn amise_dirlin(
    m: &DirLinMixture,
    h: f64,
    g: f64,
    n: usize,
    kc: &KernelConstants,
    sgrid: &SphereGrid,
    lgrid: &LineGrid,
) -> Result<f64> {
    check_n(n)?;
    let curv = crate::models::curvature_dirlin(m, sgrid, lgrid)?;
    Ok(amise_dirlin_value(&curv, h, g, n, kc))
}

/// AMISE of the Gaussian linear estimator,
/// `¼ μ₂(K)² R(f'') g⁴ + R(K) / (n g)`.
pub fn amise_linear_value(r_fpp: f64, g: f64, n: usize, kc: &KernelConstants) -> f64 {
    0.25 * kc.mu2_k * kc.mu2_k * r_fpp * g.powi(4) + kc.r_k / (n as f64 * g)
}

/// Closed-form AMISE-optimal directional bandwidth,
/// `h = [q d_q / (4 b_q² λ_q R(Ψ) n)]^{1/(4+q)}`.
pub fn h_amise_dir_value(r_psi: f64, n: usize, kc: &KernelConstants) -> Result<f64> {
    if !(r_psi > 1e-12) {
        return Err(Error::Degenerate(format!(
            "R(Psi) = {r_psi}: no finite AMISE bandwidth (uniform-like target)"
        )));
    }
    let qf = kc.q as f64;
    Ok((qf * kc.d_q / (4.0 * kc.b_q * kc.b_q * kc.lambda_q * r_psi * n as f64))
        .powf(1.0 / (4.0 + qf)))
}

/// Closed-form AMISE-optimal directional bandwidth for a vMF mixture.
pub fn h_amise_dir(
    m: &DirMixture,
    n: usize,
    kc: &KernelConstants,
    grid: &SphereGrid,
) -> Result<f64> {
    check_n(n)?;
    let r_psi = crate::models::curvature_dir(m, grid)?.r_psi;
    h_amise_dir_value(r_psi, n, kc)
}

/// Closed-form AMISE-optimal linear bandwidth,
/// `g = [R(K) / (μ₂(K)² R(f'') n)]^{1/5}`.
pub fn g_amise_linear(r_fpp: f64, n: usize, kc: &KernelConstants) -> Result<f64> {
    if !(r_fpp > 1e-12) {
        return Err(Error::Degenerate(format!(
            "R(f'') = {r_fpp}: no finite AMISE bandwidth"
        )));
    }
    Ok((kc.r_k / (kc.mu2_k * kc.mu2_k * r_fpp * n as f64)).powf(0.2))
}

/// AMISE-optimal directional-linear bandwidth pair from precomputed
/// curvature functionals.
///
/// For q = 1 the pair has a closed form under the proportional
/// parametrization `g = βh`: stationarity of the AMISE surface forces the
/// two quartic terms to balance, giving
/// `β = (b_q² I[Ψ_x²] / (¼ μ₂(K)² I[ℋ_z²]))^{1/4}` and then
/// `h = [(q+1) d_q R(K) / (4 β λ_q (c₁ + c₂β⁴ + c₃β²) n)]^{1/(5+q)}`.
/// For q > 1 the surface is minimized numerically (Nelder–Mead in log
/// coordinates) starting from the β-parametrized point.
pub fn hg_amise_dirlin_value(
    curv: &DirLinCurvature,
    n: usize,
    kc: &KernelConstants,
) -> Result<(f64, f64)> {
    if !(curv.i_psi_sq > 1e-12) || !(curv.i_hz_sq > 1e-12) {
        return Err(Error::Degenerate(format!(
            "curvature functionals ({}, {}) admit no finite AMISE bandwidths",
            curv.i_psi_sq, curv.i_hz_sq
        )));
    }
    let qf = kc.q as f64;
    let c1 = kc.b_q * kc.b_q * curv.i_psi_sq;
    let c2 = 0.25 * kc.mu2_k * kc.mu2_k * curv.i_hz_sq;
    let c3 = kc.b_q * kc.mu2_k * curv.i_cross;
    let beta = (c1 / c2).powf(0.25);
    let quartic = c1 + c2 * beta.powi(4) + c3 * beta * beta;
    let c4 = kc.d_q * kc.r_k / (kc.lambda_q * n as f64 * beta);
    let h = ((qf + 1.0) * c4 / (4.0 * quartic)).powf(1.0 / (5.0 + qf));
    let start = (h, beta * h);
    if kc.q == 1 {
        return Ok(start);
    }
    // q > 1: no closed β; minimize the AMISE surface numerically.
    let kc2 = *kc;
    let curv2 = *curv;
    let res = minimize_2d(
        |u, v| amise_dirlin_value(&curv2, u.exp(), v.exp(), n, &kc2),
        (start.0.ln(), start.1.ln()),
        1e-10,
    );
    if !res.converged {
        return Err(Error::NoConvergence {
            iterations: res.iterations,
            context: "AMISE bandwidth surface minimization".into(),
        });
    }
    Ok((res.x.0.exp(), res.x.1.exp()))
}

/// AMISE-optimal directional-linear bandwidth pair for a vMF × normal
/// mixture.
pub fn hg_amise_dirlin(
    m: &DirLinMixture,
    n: usize,
    kc: &KernelConstants,
    sgrid: &SphereGrid,
    lgrid: &LineGrid,
) -> Result<(f64, f64)> {
    check_n(n)?;
    let curv = crate::models::curvature_dirlin(m, sgrid, lgrid)?;
    hg_amise_dirlin_value(&curv, n, kc)
}

/// Closed-form smooth-bootstrap MISE for directional data: the exact MISE
/// of the equal-weight vMF mixture with means `X_i` and concentrations
/// `1/h_P²` (the pilot estimate), evaluated at bandwidth h.
pub fn bootstrap_mise_dir(
    sample: &DirSample,
    h: f64,
    h_pilot: f64,
    grid: &SphereGrid,
) -> Result<f64> {
    if !(h_pilot > 0.0) || !h_pilot.is_finite() {
        return Err(Error::Domain(format!(
            "pilot bandwidth must be > 0, got {h_pilot}"
        )));
    }
    let n = sample.len();
    let kappa = 1.0 / (h_pilot * h_pilot);
    let components: Vec<VmfComponent> = sample
        .points()
        .iter()
        .map(|x| VmfComponent::new(x.clone(), kappa))
        .collect::<Result<_>>()?;
    let empirical = DirMixture::new(vec![1.0 / n as f64; n], components)?;
    exact_mise_dir(&empirical, h, n, grid)
}

/// Closed-form smooth-bootstrap MISE for directional-linear data, with
/// pilot mixture `κ_i = 1/h_P²`, `μ_i = X_i`, `m_i = Z_i`, `σ_i = g_P`.
pub fn bootstrap_mise_dirlin(
    sample: &DirLinSample,
    h: f64,
    g: f64,
    h_pilot: f64,
    g_pilot: f64,
    grid: &SphereGrid,
) -> Result<f64> {
    if !(h_pilot > 0.0) || !(g_pilot > 0.0) || !h_pilot.is_finite() || !g_pilot.is_finite() {
        return Err(Error::Domain(format!(
            "pilot bandwidths must be > 0, got ({h_pilot}, {g_pilot})"
        )));
    }
    let n = sample.len();
    let kappa = 1.0 / (h_pilot * h_pilot);
    let dir: Vec<VmfComponent> = sample
        .points()
        .iter()
        .map(|(x, _)| VmfComponent::new(x.clone(), kappa))
        .collect::<Result<_>>()?;
    let lin: Vec<NormalComponent> = sample
        .points()
        .iter()
        .map(|(_, z)| NormalComponent::new(*z, g_pilot))
        .collect::<Result<_>>()?;
    let empirical = DirLinMixture::new(vec![1.0 / n as f64; n], dir, lin)?;
    exact_mise_dirlin(&empirical, h, g, n, grid)
}

/// Pointwise error decomposition: exact bias/variance by quadrature against
/// their leading asymptotic terms.
#[derive(Debug, Clone, Copy)]
pub struct BiasVar {
    /// `E f̂ − f` by quadrature of the kernel expectation.
    pub exact_bias: f64,
    /// `b_q Ψ(f,x) h²` (+ `½ μ₂(K) ℋ_z f g²` for the joint estimator).
    pub abias: f64,
    /// Exact variance of the estimator by quadrature.
    pub exact_var: f64,
    /// `c_{h,q} d_q f / n` (× `R(K)/g` for the joint estimator).
    pub avar: f64,
}

/// Pointwise bias/variance of the directional estimator at x. The grid must
/// resolve the kernel scale h.
pub fn pointwise_bias_var_dir(
    m: &DirMixture,
    x: &UnitVector,
    h: f64,
    n: usize,
    l: &DirectionalKernel,
    kc: &KernelConstants,
    grid: &SphereGrid,
) -> Result<BiasVar> {
    check_n(n)?;
    let f = m.density(x)?;
    let c = c_hq(l, m.q(), h)?;
    let h2 = h * h;
    let mean = c * integrate_sphere(
        |y| l.profile((1.0 - x.dot(y)) / h2) * m.density(y).unwrap(),
        grid,
    )?;
    let second = c * c
        * integrate_sphere(
            |y| l.profile((1.0 - x.dot(y)) / h2).powi(2) * m.density(y).unwrap(),
            grid,
        )?;
    Ok(BiasVar {
        exact_bias: mean - f,
        abias: kc.b_q * psi_dir(m, x) * h2,
        exact_var: (second - mean * mean) / n as f64,
        avar: c * kc.d_q * f / n as f64,
    })
}

/// Pointwise bias/variance of the directional-linear estimator at (x, z).
pub fn pointwise_bias_var_dirlin(
    m: &DirLinMixture,
    x: &UnitVector,
    z: f64,
    h: f64,
    g: f64,
    n: usize,
    l: &DirectionalKernel,
    k: &LinearKernel,
    kc: &KernelConstants,
    sgrid: &SphereGrid,
    lgrid: &LineGrid,
) -> Result<BiasVar> {
    check_n(n)?;
    let f = m.density(x, z)?;
    let c = c_hq(l, m.q(), h)?;
    let h2 = h * h;
    let mean = (c / g)
        * integrate_sphere_line(
            |y, t| {
                l.profile((1.0 - x.dot(y)) / h2)
                    * k.eval((z - t) / g)
                    * m.density(y, t).unwrap()
            },
            sgrid,
            lgrid,
        )?;
    let second = (c / g).powi(2)
        * integrate_sphere_line(
            |y, t| {
                l.profile((1.0 - x.dot(y)) / h2).powi(2)
                    * k.eval((z - t) / g).powi(2)
                    * m.density(y, t).unwrap()
            },
            sgrid,
            lgrid,
        )?;
    Ok(BiasVar {
        exact_bias: mean - f,
        abias: kc.b_q * psi_x_dirlin(m, x, z) * h2 + 0.5 * kc.mu2_k * hz_dirlin(m, x, z) * g * g,
        exact_var: (second - mean * mean) / n as f64,
        avar: c * kc.r_k * kc.d_q * f / (n as f64 * g),
    })
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let mut acc = KahanSum::new();
    for &v in values {
        acc.add(v);
    }
    let mean = acc.value() / r;
    let mut var = KahanSum::new();
    for &v in values {
        var.add((v - mean) * (v - mean));
    }
    let se = (var.value() / (r - 1.0) / r).sqrt();
    (mean, se)
}

fn check_replicates(replicates: usize) -> Result<()> {
    if replicates < 2 {
        return Err(Error::Domain(format!(
            "at least 2 replicates required, got {replicates}"
        )));
    }
    Ok(())
}

/// Monte Carlo ISE oracle for the directional estimator (von Mises
/// kernel): draws `replicates` seeded samples of size n, computes
/// `ISE = ∫ (f̂_h − f)²` by quadrature for each, and returns the mean and
/// its standard error. Replicate r uses a generator derived from
/// (seed, r); the result is bit-deterministic for fixed inputs.
pub fn mc_ise_dir(
    m: &DirMixture,
    h: f64,
    n: usize,
    replicates: usize,
    seed: u64,
    grid: &SphereGrid,
) -> Result<(f64, f64)> {
    check_n(n)?;
    check_replicates(replicates)?;
    let vm = DirectionalKernel::von_mises();
    let f_vals: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|x| m.density(x))
        .collect::<Result<_>>()?;
    let mut ises = Vec::with_capacity(replicates);
    for rep in 0..replicates {
        let mut rng = rng_for_replicate(seed, rep as u64);
        let sample = DirSample::new(m.sample_with_rng(n, &mut rng))?;
        let est = eval_grid_dir(&sample, h, &vm, grid)?;
        let mut acc = KahanSum::new();
        for ((e, f), w) in est.iter().zip(&f_vals).zip(grid.weights()) {
            acc.add(w * (e - f) * (e - f));
        }
        ises.push(acc.value());
    }
    Ok(mean_and_se(&ises))
}

/// Monte Carlo ISE oracle for the directional-linear estimator
/// (von Mises × Gaussian kernel).
pub fn mc_ise_dirlin(
    m: &DirLinMixture,
    h: f64,
    g: f64,
    n: usize,
    replicates: usize,
    seed: u64,
    sgrid: &SphereGrid,
    lgrid: &LineGrid,
) -> Result<(f64, f64)> {
    check_n(n)?;
    check_replicates(replicates)?;
    let vm = DirectionalKernel::von_mises();
    let gauss = LinearKernel::gaussian();
    let bw = Bandwidths::dirlin(h, g)?;
    let mut f_vals = Vec::with_capacity(sgrid.len() * lgrid.len());
    for x in sgrid.nodes() {
        for &z in lgrid.nodes() {
            f_vals.push(m.density(x, z)?);
        }
    }
    let mut weights = Vec::with_capacity(sgrid.len() * lgrid.len());
    for &ws in sgrid.weights() {
        for &wl in lgrid.weights() {
            weights.push(ws * wl);
        }
    }
    let mut ises = Vec::with_capacity(replicates);
    for rep in 0..replicates {
        let mut rng = rng_for_replicate(seed, rep as u64);
        let sample = DirLinSample::new(m.sample_with_rng(n, &mut rng))?;
        let est = eval_grid_dirlin(&sample, &bw, &vm, &gauss, sgrid, lgrid)?;
        let mut acc = KahanSum::new();
        for ((e, f), w) in est.iter().zip(&f_vals).zip(&weights) {
            acc.add(w * (e - f) * (e - f));
        }
        ises.push(acc.value());
    }
    Ok(mean_and_se(&ises))
}

/// Monte Carlo ISE oracle for the Gaussian linear estimator.
pub fn mc_ise_lin(
    m: &LinMixture,
    g: f64,
    n: usize,
    replicates: usize,
    seed: u64,
    lgrid: &LineGrid,
) -> Result<(f64, f64)> {
    check_n(n)?;
    check_replicates(replicates)?;
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::Domain(format!("bandwidth must be > 0, got {g}")));
    }
    let f_vals: Vec<f64> = lgrid.nodes().iter().map(|&z| m.density(z)).collect();
    let mut ises = Vec::with_capacity(replicates);
    for rep in 0..replicates {
        let mut rng = rng_for_replicate(seed, rep as u64);
        let zs = m.sample_with_rng(n, &mut rng);
        let mut acc = KahanSum::new();
        for ((&z0, f), &w) in lgrid.nodes().iter().zip(&f_vals).zip(lgrid.weights()) {
            let mut est = KahanSum::new();
            for &zi in &zs {
                est.add(gaussian_density(z0 - zi, g));
            }
            let e = est.value() / n as f64;
            acc.add(w * (e - f) * (e - f));
        }
        ises.push(acc.value());
    }
    Ok(mean_and_se(&ises))
}

/// Monte Carlo smooth-bootstrap MISE for directional data: resamples from
/// the pilot estimate and averages `∫ (f̂*_h − f̂_{h_P})²` over replicates.
/// Oracle counterpart of [`bootstrap_mise_dir`].
pub fn bootstrap_mise_dir_mc(
    sample: &DirSample,
    h: f64,
    h_pilot: f64,
    replicates: usize,
    seed: u64,
    grid: &SphereGrid,
) -> Result<(f64, f64)> {
    check_replicates(replicates)?;
    let vm = DirectionalKernel::von_mises();
    let pilot_vals = eval_grid_dir(sample, h_pilot, &vm, grid)?;
    let n = sample.len();
    let kappa = 1.0 / (h_pilot * h_pilot);
    let pilot_comps: Vec<VmfComponent> = sample
        .points()
        .iter()
        .map(|x| VmfComponent::new(x.clone(), kappa))
        .collect::<Result<_>>()?;
    let mut ises = Vec::with_capacity(replicates);
    for rep in 0..replicates {
        let mut rng = rng_for_replicate(seed, rep as u64);
        let resample: Vec<UnitVector> = (0..n)
            .map(|_| {
                let idx = pick_index(n, &mut rng);
                sample_vmf(&pilot_comps[idx], &mut rng)
            })
            .collect();
        let est = eval_grid_dir(&DirSample::new(resample)?, h, &vm, grid)?;
        let mut acc = KahanSum::new();
        for ((e, p), w) in est.iter().zip(&pilot_vals).zip(grid.weights()) {
            acc.add(w * (e - p) * (e - p));
        }
        ises.push(acc.value());
    }
    Ok(mean_and_se(&ises))
}

/// Monte Carlo smooth-bootstrap MISE for directional-linear data; oracle
/// counterpart of [`bootstrap_mise_dirlin`].
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_mise_dirlin_mc(
    sample: &DirLinSample,
    h: f64,
    g: f64,
    h_pilot: f64,
    g_pilot: f64,
    replicates: usize,
    seed: u64,
    sgrid: &SphereGrid,
    lgrid: &LineGrid,
) -> Result<(f64, f64)> {
    check_replicates(replicates)?;
    let vm = DirectionalKernel::von_mises();
    let gauss = LinearKernel::gaussian();
    let pilot_bw = Bandwidths::dirlin(h_pilot, g_pilot)?;
    let bw = Bandwidths::dirlin(h, g)?;
    let pilot_vals = eval_grid_dirlin(sample, &pilot_bw, &vm, &gauss, sgrid, lgrid)?;
    let n = sample.len();
    let kappa = 1.0 / (h_pilot * h_pilot);
    let pilot_comps: Vec<(VmfComponent, f64)> = sample
        .points()
        .iter()
        .map(|(x, z)| Ok((VmfComponent::new(x.clone(), kappa)?, *z)))
        .collect::<Result<_>>()?;
    let mut weights = Vec::with_capacity(sgrid.len() * lgrid.len());
    for &ws in sgrid.weights() {
        for &wl in lgrid.weights() {
            weights.push(ws * wl);
        }
    }
    let mut ises = Vec::with_capacity(replicates);
    for rep in 0..replicates {
        let mut rng = rng_for_replicate(seed, rep as u64);
        let resample: Vec<(UnitVector, f64)> = (0..n)
            .map(|_| {
                let idx = pick_index(n, &mut rng);
                let (comp, zi) = &pilot_comps[idx];
                let x = sample_vmf(comp, &mut rng);
                let e: f64 = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
                (x, zi + g_pilot * e)
            })
            .collect();
        let est = eval_grid_dirlin(&DirLinSample::new(resample)?, &bw, &vm, &gauss, sgrid, lgrid)?;
        let mut acc = KahanSum::new();
        for ((e, p), w) in est.iter().zip(&pilot_vals).zip(&weights) {
            acc.add(w * (e - p) * (e - p));
        }
        ises.push(acc.value());
    }
    Ok(mean_and_se(&ises))
}

fn pick_index(n: usize, rng: &mut ChaCha8Rng) -> usize {
    (rand::Rng::random::<f64>(rng) * n as f64).min(n as f64 - 1.0) as usize
}

/// Result of the empirical asymptotic-normality check.
#[derive(Debug, Clone, Copy)]
pub struct NormalityReport {
    pub ks_statistic: f64,
    pub p_value: f64,
    /// Mean of the standardized replicates (0 under the limit law).
    pub standardized_mean: f64,
}

/// Empirical check of asymptotic normality of the directional-linear
/// estimator at a point: over seeded replicates, the estimator is centered
/// at `f + ABias` and scaled by its asymptotic standard deviation
/// `√(c_{h,q} R(K) d_q f / (n g))`, then compared to the standard normal by
/// a Kolmogorov–Smirnov test.
#[allow(clippy::too_many_arguments)]
pub fn normality_check(
    m: &DirLinMixture,
    x: &UnitVector,
    z: f64,
    h: f64,
    g: f64,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<NormalityReport> {
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "normality check needs n >= 2, got {n}"
        )));
    }
    check_replicates(replicates)?;
    let vm = DirectionalKernel::von_mises();
    let gauss = LinearKernel::gaussian();
    let kc = crate::kernels::kernel_constants(&vm, &gauss, m.q())?;
    let bw = Bandwidths::dirlin(h, g)?;
    let f = m.density(x, z)?;
    let abias =
        kc.b_q * psi_x_dirlin(m, x, z) * h * h + 0.5 * kc.mu2_k * hz_dirlin(m, x, z) * g * g;
    let avar = c_hq(&vm, m.q(), h)? * kc.r_k * kc.d_q * f / (n as f64 * g);
    let sd = avar.sqrt();
    let mut standardized = Vec::with_capacity(replicates);
    for rep in 0..replicates {
        let mut rng = rng_for_replicate(seed, rep as u64);
        let sample = DirLinSample::new(m.sample_with_rng(n, &mut rng))?;
        let est = eval_dirlin(&sample, &bw, &vm, &gauss, x, z)?;
        standardized.push((est - f - abias) / sd);
    }
    let (mean, _) = mean_and_se(&standardized);
    let ks = ks_statistic_vs_normal(&mut standardized);
    let p = ks_p_value(ks, replicates);
    Ok(NormalityReport {
        ks_statistic: ks,
        p_value: p,
        standardized_mean: mean,
    })
}

fn ks_statistic_vs_normal(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len() as f64;
    let mut d = 0.0_f64;
    for (i, &v) in values.iter().enumerate() {
        let cdf = standard_normal_cdf(v);
        d = d.max((cdf - i as f64 / n).abs());
        d = d.max(((i as f64 + 1.0) / n - cdf).abs());
    }
    d
}

/// Asymptotic Kolmogorov distribution with the Stephens small-sample
/// correction.
fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-2.0 * kf * kf * lambda * lambda).exp();
        p += if k % 2 == 1 { term } else { -term };
    }
    p.clamp(0.0, 1.0)
}

/// Φ(x) via a complementary-error-function approximation (fractional error
/// below 1.2e-7, ample for KS distances).
pub(crate) fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc_approx(-x / std::f64::consts::SQRT_2)
}

fn erfc_approx(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Result of a scalar minimization.
#[derive(Debug, Clone, Copy)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Golden-section search on [lo, hi]; assumes f is unimodal there. Stops
/// when the bracket is shorter than tol; reports the best iterate either
/// way.
pub fn minimize_scalar<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Minimum {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iterations = 0;
    while (b - a).abs() > tol && iterations < 400 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        iterations += 1;
    }
    let x = 0.5 * (a + b);
    Minimum {
        x,
        value: f(x),
        iterations,
        converged: (b - a).abs() <= tol,
    }
}

/// Result of a two-dimensional minimization.
#[derive(Debug, Clone, Copy)]
pub struct Minimum2 {
    pub x: (f64, f64),
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder–Mead on ℝ² with an iteration cap of 500; converges when the
/// simplex collapses below tol in both coordinates and values.
pub fn minimize_2d<F: Fn(f64, f64) -> f64>(f: F, start: (f64, f64), tol: f64) -> Minimum2 {
    let step = |s: f64| if s.abs() > 1e-8 { 0.05 * s.abs() } else { 0.01 };
    let mut simplex = vec![
        start,
        (start.0 + step(start.0), start.1),
        (start.0, start.1 + step(start.1)),
    ];
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p.0, p.1)).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < 500 {
        // order the simplex
        let mut idx = [0, 1, 2];
        idx.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
        simplex = idx.iter().map(|&i| simplex[i]).collect();
        values = idx.iter().map(|&i| values[i]).collect();

        let spread_x = (simplex[0].0 - simplex[2].0)
            .abs()
            .max((simplex[0].1 - simplex[2].1).abs())
            .max((simplex[1].0 - simplex[2].0).abs())
            .max((simplex[1].1 - simplex[2].1).abs());
        let spread_f = (values[2] - values[0]).abs();
        if spread_x < tol && spread_f < tol * (1.0 + values[0].abs()) {
            converged = true;
            break;
        }

        let centroid = (
            0.5 * (simplex[0].0 + simplex[1].0),
            0.5 * (simplex[0].1 + simplex[1].1),
        );
        let reflect = (
            centroid.0 + (centroid.0 - simplex[2].0),
            centroid.1 + (centroid.1 - simplex[2].1),
        );
        let fr = f(reflect.0, reflect.1);
        if fr < values[0] {
            let expand = (
                centroid.0 + 2.0 * (centroid.0 - simplex[2].0),
                centroid.1 + 2.0 * (centroid.1 - simplex[2].1),
            );
            let fe = f(expand.0, expand.1);
            if fe < fr {
                simplex[2] = expand;
                values[2] = fe;
            } else {
                simplex[2] = reflect;
                values[2] = fr;
            }
        } else if fr < values[1] {
            simplex[2] = reflect;
            values[2] = fr;
        } else {
            let contract = (
                centroid.0 + 0.5 * (simplex[2].0 - centroid.0),
                centroid.1 + 0.5 * (simplex[2].1 - centroid.1),
            );
            let fc = f(contract.0, contract.1);
            if fc < values[2] {
                simplex[2] = contract;
                values[2] = fc;
            } else {
                // shrink toward the best vertex
                for i in 1..3 {
                    simplex[i] = (
                        simplex[0].0 + 0.5 * (simplex[i].0 - simplex[0].0),
                        simplex[0].1 + 0.5 * (simplex[i].1 - simplex[0].1),
                    );
                    values[i] = f(simplex[i].0, simplex[i].1);
                }
            }
        }
        iterations += 1;
    }
    Minimum2 {
        x: simplex[0],
        value: values[0],
        iterations,
        converged,
    }
}
