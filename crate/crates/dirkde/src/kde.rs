//! The kernel density estimators.
//!
//! Directional: `f̂_h(x) = (c_{h,q}(L)/n) Σ_i L((1 − xᵀX_i)/h²)`.
//! Directional-linear, with a product kernel:
//! `f̂_{h,g}(x,z) = (c_{h,q}(L)/(n g)) Σ_i L((1 − xᵀX_i)/h²) K((z − Z_i)/g)`.
//!
//! With the von Mises kernel the directional estimator is exactly the
//! n-component vMF mixture with means `X_i` and concentration `1/h²`.
//! Sums are Kahan-compensated in sample order; grid evaluation reuses the
//! same per-term operations, so batched and pointwise values are identical.

use crate::error::{Error, Result};
use crate::kernels::{log_c_hq, DirectionalKernel, LinearKernel};
use crate::sphere::{KahanSum, LineGrid, SphereGrid, UnitVector};

/// A directional sample: n ≥ 1 points on a common `Ω_q`.
#[derive(Debug, Clone)]
pub struct DirSample {
    points: Vec<UnitVector>,
}

impl DirSample {
    pub fn new(points: Vec<UnitVector>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("a sample needs at least one point".into()));
        }
        let q = points[0].q();
        if points.iter().any(|p| p.q() != q) {
            return Err(Error::DimensionMismatch {
                expected: q as usize + 1,
                got: points.iter().map(|p| p.q()).max().unwrap() as usize + 1,
            });
        }
        Ok(Self { points })
    }

    pub fn q(&self) -> u32 {
        self.points[0].q()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[UnitVector] {
        &self.points
    }
}

/// A directional-linear sample: n ≥ 1 pairs on a common `Ω_q × ℝ`.
#[derive(Debug, Clone)]
pub struct DirLinSample {
    points: Vec<(UnitVector, f64)>,
}

impl DirLinSample {
    pub fn new(points: Vec<(UnitVector, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("a sample needs at least one point".into()));
        }
        let q = points[0].0.q();
        if points.iter().any(|(p, z)| p.q() != q || !z.is_finite()) {
            return Err(Error::Domain(
                "sample points must share one sphere and have finite linear parts".into(),
            ));
        }
        Ok(Self { points })
    }

    pub fn q(&self) -> u32 {
        self.points[0].0.q()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(UnitVector, f64)] {
        &self.points
    }

    /// Directional coordinates only.
    pub fn dir_sample(&self) -> DirSample {
        DirSample {
            points: self.points.iter().map(|(x, _)| x.clone()).collect(),
        }
    }
}

/// Bandwidth pair; `g` is absent for purely directional use.
#[derive(Debug, Clone, Copy)]
pub struct Bandwidths {
    pub h: f64,
    pub g: Option<f64>,
}

impl Bandwidths {
    pub fn dir(h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Domain(format!("bandwidth h must be > 0, got {h}")));
        }
        Ok(Self { h, g: None })
    }

    pub fn dirlin(h: f64, g: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() || !(g > 0.0) || !g.is_finite() {
            return Err(Error::Domain(format!(
                "bandwidths must be > 0, got h = {h}, g = {g}"
            )));
        }
        Ok(Self { h, g: Some(g) })
    }

    fn g_required(&self) -> Result<f64> {
        self.g.ok_or_else(|| {
            Error::Domain("directional-linear evaluation needs a linear bandwidth g".into())
        })
    }
}

/// Directional estimator at a point.
pub fn eval_dir(
    sample: &DirSample,
    h: f64,
    l: &DirectionalKernel,
    x: &UnitVector,
) -> Result<f64> {
    if x.q() != sample.q() {
        return Err(Error::DimensionMismatch {
            expected: sample.q() as usize + 1,
            got: x.q() as usize + 1,
        });
    }
    let scale = (log_c_hq(l, sample.q(), h)? - (sample.len() as f64).ln()).exp();
    if !scale.is_finite() {
        return Err(Error::Overflow(format!(
            "normalizing constant not representable at h = {h}"
        )));
    }
    let h2 = h * h;
    let mut acc = KahanSum::new();
    for xi in sample.points() {
        acc.add(l.profile((1.0 - x.dot(xi)) / h2));
    }
    Ok(scale * acc.value())
}

/// Directional-linear estimator at a point.
pub fn eval_dirlin(
    sample: &DirLinSample,
    bw: &Bandwidths,
    l: &DirectionalKernel,
    k: &LinearKernel,
    x: &UnitVector,
    z: f64,
) -> Result<f64> {
    if x.q() != sample.q() {
        return Err(Error::DimensionMismatch {
            expected: sample.q() as usize + 1,
            got: x.q() as usize + 1,
        });
    }
    let g = bw.g_required()?;
    let scale =
        (log_c_hq(l, sample.q(), bw.h)? - (sample.len() as f64).ln() - g.ln()).exp();
    if !scale.is_finite() {
        return Err(Error::Overflow(format!(
            "normalizing constant not representable at h = {}",
            bw.h
        )));
    }
    let h2 = bw.h * bw.h;
    let mut acc = KahanSum::new();
    for (xi, zi) in sample.points() {
        acc.add(l.profile((1.0 - x.dot(xi)) / h2) * k.eval((z - zi) / g));
    }
    Ok(scale * acc.value())
}

/// Directional estimator on every node of a sphere grid. Values are
/// identical to pointwise [`eval_dir`] calls.
pub fn eval_grid_dir(
    sample: &DirSample,
    h: f64,
    l: &DirectionalKernel,
    grid: &SphereGrid,
) -> Result<Vec<f64>> {
    if grid.q() != sample.q() {
        return Err(Error::DimensionMismatch {
            expected: sample.q() as usize + 1,
            got: grid.q() as usize + 1,
        });
    }
    let scale = (log_c_hq(l, sample.q(), h)? - (sample.len() as f64).ln()).exp();
    if !scale.is_finite() {
        return Err(Error::Overflow(format!(
            "normalizing constant not representable at h = {h}"
        )));
    }
    let h2 = h * h;
    Ok(grid
        .nodes()
        .iter()
        .map(|x| {
            let mut acc = KahanSum::new();
            for xi in sample.points() {
                acc.add(l.profile((1.0 - x.dot(xi)) / h2));
            }
            scale * acc.value()
        })
        .collect())
}

/// Directional-linear estimator on the tensor grid, sphere-major
/// (`index = sphere_index * line_len + line_index`). The directional and
/// linear kernel rows are precomputed per grid axis, then combined with the
/// same per-term product and compensated sum as [`eval_dirlin`], so values
/// are bit-identical to pointwise calls.
pub fn eval_grid_dirlin(
    sample: &DirLinSample,
    bw: &Bandwidths,
    l: &DirectionalKernel,
    k: &LinearKernel,
    sgrid: &SphereGrid,
    lgrid: &LineGrid,
) -> Result<Vec<f64>> {
    if sgrid.q() != sample.q() {
        return Err(Error::DimensionMismatch {
            expected: sample.q() as usize + 1,
            got: sgrid.q() as usize + 1,
        });
    }
    let g = bw.g_required()?;
    let scale =
        (log_c_hq(l, sample.q(), bw.h)? - (sample.len() as f64).ln() - g.ln()).exp();
    if !scale.is_finite() {
        return Err(Error::Overflow(format!(
            "normalizing constant not representable at h = {}",
            bw.h
        )));
    }
    let h2 = bw.h * bw.h;
    let n = sample.len();

    let mut l_rows = vec![0.0; sgrid.len() * n];
    for (a, x) in sgrid.nodes().iter().enumerate() {
        for (i, (xi, _)) in sample.points().iter().enumerate() {
            l_rows[a * n + i] = l.profile((1.0 - x.dot(xi)) / h2);
        }
    }
    let mut k_rows = vec![0.0; lgrid.len() * n];
    for (b, &z) in lgrid.nodes().iter().enumerate() {
        for (i, (_, zi)) in sample.points().iter().enumerate() {
            k_rows[b * n + i] = k.eval((z - zi) / g);
        }
    }

    let mut out = Vec::with_capacity(sgrid.len() * lgrid.len());
    for a in 0..sgrid.len() {
        let lr = &l_rows[a * n..(a + 1) * n];
        for b in 0..lgrid.len() {
            let kr = &k_rows[b * n..(b + 1) * n];
            let mut acc = KahanSum::new();
            for i in 0..n {
                acc.add(lr[i] * kr[i]);
            }
            out.push(scale * acc.value());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{reference, DirMixture, VmfComponent};
    use crate::sphere::{
        build_line_grid_centered, build_sphere_grid, integrate_line, integrate_sphere_line,
        surface_area,
    };
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn north(q: u32) -> UnitVector {
        let mut c = vec![0.0; q as usize + 1];
        c[q as usize] = 1.0;
        UnitVector::new(c).unwrap()
    }

    #[test]
    fn single_point_is_vmf_bump() {
        // n = 1 with the von Mises kernel is exactly vM(X₁, 1/h²).
        let h = 0.6_f64;
        let x1 = UnitVector::new(vec![0.6, -0.8]).unwrap();
        let sample = DirSample::new(vec![x1.clone()]).unwrap();
        let vm = DirectionalKernel::von_mises();
        let comp = VmfComponent::new(x1, 1.0 / (h * h)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..30 {
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let x = UnitVector::new(vec![theta.cos(), theta.sin()]).unwrap();
            let est = eval_dir(&sample, h, &vm, &x).unwrap();
            let want = comp.density(&x).unwrap();
            assert!((est - want).abs() <= 1e-12 * want.abs(), "{est} vs {want}");
        }
    }

    #[test]
    fn estimator_normalizes() {
        let m = reference::vm_mixture(1);
        let sample = DirSample::new(m.sample(200, 3)).unwrap();
        let vm = DirectionalKernel::von_mises();
        let grid = build_sphere_grid(1, 256).unwrap();
        let vals = eval_grid_dir(&sample, 0.3, &vm, &grid).unwrap();
        let mass: f64 = vals
            .iter()
            .zip(grid.weights())
            .map(|(v, w)| v * w)
            .sum();
        assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
    }

    #[test]
    fn huge_bandwidth_flattens_to_uniform() {
        let m = reference::vm_mixture(2);
        let sample = DirSample::new(m.sample(50, 5)).unwrap();
        let vm = DirectionalKernel::von_mises();
        let omega = surface_area(2).unwrap();
        let grid = build_sphere_grid(2, 16).unwrap();
        for x in grid.nodes().iter().step_by(7) {
            let est = eval_dir(&sample, 100.0, &vm, x).unwrap();
            assert!((est - 1.0 / omega).abs() < 1e-4, "{est}");
        }
    }

    #[test]
    fn dirlin_single_point_product_bump() {
        let h = 0.5_f64;
        let g = 0.7_f64;
        let x1 = UnitVector::new(vec![0.0, 1.0]).unwrap();
        let z1 = 0.4;
        let sample = DirLinSample::new(vec![(x1.clone(), z1)]).unwrap();
        let bw = Bandwidths::dirlin(h, g).unwrap();
        let vm = DirectionalKernel::von_mises();
        let gauss = LinearKernel::gaussian();
        let comp = VmfComponent::new(x1, 1.0 / (h * h)).unwrap();
        let x = UnitVector::new(vec![0.8, 0.6]).unwrap();
        let z = -0.3;
        let est = eval_dirlin(&sample, &bw, &vm, &gauss, &x, z).unwrap();
        let want =
            comp.density(&x).unwrap() * crate::models::gaussian_density(z - z1, g);
        assert!((est - want).abs() <= 1e-12 * want.abs());
    }

    #[test]
    fn dirlin_normalizes_and_marginalizes() {
        let m = reference::vm_normal_mixture(1);
        let pts = m.sample(150, 11);
        let sample = DirLinSample::new(pts).unwrap();
        let bw = Bandwidths::dirlin(0.4, 0.4).unwrap();
        let vm = DirectionalKernel::von_mises();
        let gauss = LinearKernel::gaussian();
        let sgrid = build_sphere_grid(1, 128).unwrap();
        let (center, trunc) = crate::models::line_window(m.lin_components(), 0.4);
        let lgrid = build_line_grid_centered(center, trunc, 128).unwrap();

        let mass = integrate_sphere_line(
            |x, z| eval_dirlin(&sample, &bw, &vm, &gauss, x, z).unwrap(),
            &sgrid,
            &lgrid,
        )
        .unwrap();
        assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");

        // Marginalizing z recovers the directional estimator.
        let dsample = sample.dir_sample();
        for x in sgrid.nodes().iter().step_by(17) {
            let marginal = integrate_line(
                |z| eval_dirlin(&sample, &bw, &vm, &gauss, x, z).unwrap(),
                &lgrid,
            )
            .unwrap();
            let want = eval_dir(&dsample, 0.4, &vm, x).unwrap();
            assert!((marginal - want).abs() < 1e-6, "{marginal} vs {want}");
        }
    }

    #[test]
    fn grid_eval_matches_pointwise_exactly() {
        let m = reference::vm_normal_mixture(1);
        let sample = DirLinSample::new(m.sample(80, 19)).unwrap();
        let bw = Bandwidths::dirlin(0.35, 0.45).unwrap();
        let vm = DirectionalKernel::von_mises();
        let gauss = LinearKernel::gaussian();
        let sgrid = build_sphere_grid(1, 32).unwrap();
        let (center, trunc) = crate::models::line_window(m.lin_components(), 0.45);
        let lgrid = build_line_grid_centered(center, trunc, 16).unwrap();
        let vals = eval_grid_dirlin(&sample, &bw, &vm, &gauss, &sgrid, &lgrid).unwrap();
        assert_eq!(vals.len(), sgrid.len() * lgrid.len());
        assert!(vals.iter().all(|v| *v >= 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let a = rng.random_range(0..sgrid.len());
            let b = rng.random_range(0..lgrid.len());
            let pointwise = eval_dirlin(
                &sample,
                &bw,
                &vm,
                &gauss,
                &sgrid.nodes()[a],
                lgrid.nodes()[b],
            )
            .unwrap();
            assert_eq!(vals[a * lgrid.len() + b], pointwise);
        }

        let dsample = sample.dir_sample();
        let dvals = eval_grid_dir(&dsample, 0.35, &vm, &sgrid).unwrap();
        for _ in 0..50 {
            let a = rng.random_range(0..sgrid.len());
            let pointwise = eval_dir(&dsample, 0.35, &vm, &sgrid.nodes()[a]).unwrap();
            assert_eq!(dvals[a], pointwise);
        }
    }

    #[test]
    fn rotation_equivariance() {
        // Rotating sample and evaluation point together leaves the estimate
        // unchanged (up to rounding in the rotated dot products).
        let m = reference::vm_mixture(2);
        let pts = m.sample(60, 23);
        let angle: f64 = 1.1;
        let (s, c) = angle.sin_cos();
        let rotate = |v: &[f64]| vec![c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]];
        let rotated: Vec<UnitVector> = pts
            .iter()
            .map(|p| UnitVector::new(rotate(p.coords())).unwrap())
            .collect();
        let sample = DirSample::new(pts).unwrap();
        let rsample = DirSample::new(rotated).unwrap();
        let vm = DirectionalKernel::von_mises();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let raw: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            if let Ok(x) = UnitVector::new(raw) {
                let xr = UnitVector::new(rotate(x.coords())).unwrap();
                let a = eval_dir(&sample, 0.4, &vm, &x).unwrap();
                let b = eval_dir(&rsample, 0.4, &vm, &xr).unwrap();
                assert!((a - b).abs() <= 1e-12 * a.max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn pointwise_consistency_in_n() {
        // MAE at fixed points decreases over n ∈ {100, 1000, 10000} with
        // h_n = n^{-1/5}, averaged over 50 seeds.
        let target = DirMixture::new(
            vec![1.0],
            vec![VmfComponent::new(north(1), 2.0).unwrap()],
        )
        .unwrap();
        let vm = DirectionalKernel::von_mises();
        let eval_points: Vec<UnitVector> = (0..8)
            .map(|i| {
                let th = std::f64::consts::TAU * i as f64 / 8.0;
                UnitVector::new(vec![th.cos(), th.sin()]).unwrap()
            })
            .collect();
        let mut maes = Vec::new();
        for (ni, &n) in [100usize, 1000, 10000].iter().enumerate() {
            let h = (n as f64).powf(-0.2);
            let mut mae = 0.0;
            for seed in 0..50u64 {
                let sample =
                    DirSample::new(target.sample(n, 1000 * (ni as u64 + 1) + seed)).unwrap();
                for x in &eval_points {
                    let est = eval_dir(&sample, h, &vm, x).unwrap();
                    mae += (est - target.density(x).unwrap()).abs();
                }
            }
            maes.push(mae / (50.0 * 8.0));
        }
        assert!(
            maes[0] > maes[1] && maes[1] > maes[2],
            "MAE not decreasing: {maes:?}"
        );
    }

    #[test]
    fn sample_validation() {
        assert!(DirSample::new(vec![]).is_err());
        let a = UnitVector::new(vec![1.0, 0.0]).unwrap();
        let b = UnitVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(DirSample::new(vec![a.clone(), b]).is_err());
        assert!(DirLinSample::new(vec![(a.clone(), f64::NAN)]).is_err());
        assert!(Bandwidths::dir(0.0).is_err());
        assert!(Bandwidths::dirlin(0.5, -1.0).is_err());
        let s = DirSample::new(vec![a]).unwrap();
        let x3 = UnitVector::new(vec![0.0, 0.0, 1.0]).unwrap();
        assert!(eval_dir(&s, 0.5, &DirectionalKernel::von_mises(), &x3).is_err());
    }
}
