//! Geometry of the unit q-sphere `Ω_q ⊂ ℝ^{q+1}` and numerical integration
//! over `Ω_q` and `Ω_q × ℝ`.
//!
//! Grids are built from the tangent-normal change of variables
//! `x = t·y + √(1−t²)·B_y ξ`: the polar coordinate `t = cos φ` carries the
//! weight `(1−t²)^{q/2−1} dt = sin^{q−1}φ dφ`, which composes with a
//! recursively built `Ω_{q−1}` grid. Supported dimensions are q ∈ {1, 2, 3}.

use crate::error::{Error, Result};
use crate::special::log_gamma_raw;

/// Compensated (Kahan) accumulator. Integration and estimator sums add many
/// terms of widely varying magnitude; summation is always in index order so
/// results are bit-deterministic.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Surface area `ω_q = 2 π^{(q+1)/2} / Γ((q+1)/2)` of `Ω_q`.
pub fn surface_area(q: u32) -> Result<f64> {
    if q < 1 {
        return Err(Error::Domain(format!(
            "surface_area requires q >= 1, got {q}"
        )));
    }
    Ok(surface_area_raw(q))
}

pub(crate) fn surface_area_raw(q: u32) -> f64 {
    let half = (q as f64 + 1.0) / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / log_gamma_raw(half).exp()
}

/// A point on `Ω_q`, renormalized to unit Euclidean norm on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector {
    coords: Vec<f64>,
}

impl UnitVector {
    /// Builds a unit vector from ambient coordinates (length q+1 ≥ 2),
    /// renormalizing. Errors on non-finite entries or a near-zero norm.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::Domain(format!(
                "a point on Omega_q needs at least 2 coordinates, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite coordinate".into()));
        }
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::Domain(format!(
                "cannot normalize a vector of norm {norm}"
            )));
        }
        let coords = coords.into_iter().map(|c| c / norm).collect();
        Ok(Self { coords })
    }

    /// Sphere dimension q (ambient dimension minus one).
    pub fn q(&self) -> u32 {
        (self.coords.len() - 1) as u32
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn dot(&self, other: &UnitVector) -> f64 {
        debug_assert_eq!(self.coords.len(), other.coords.len());
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub(crate) fn check_same_sphere(&self, other: &UnitVector) -> Result<()> {
        if self.coords.len() != other.coords.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coords.len(),
                got: other.coords.len(),
            });
        }
        Ok(())
    }
}

/// Orthonormal completion `B_y` of a base point `y ∈ Ω_q`: q columns in
/// `ℝ^{q+1}` spanning the tangent space at `y`, with `B_yᵀB_y = I_q` and
/// `B_yB_yᵀ = I − yyᵀ`.
#[derive(Debug, Clone)]
pub struct TangentBasis {
    base: UnitVector,
    /// `columns[j]` is the j-th basis vector (length q+1).
    columns: Vec<Vec<f64>>,
}

impl TangentBasis {
    pub fn base(&self) -> &UnitVector {
        &self.base
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// `B_y ξ` for tangent coordinates ξ of length q.
    pub fn from_tangent(&self, xi: &[f64]) -> Vec<f64> {
        let dim = self.base.coords.len();
        let mut out = vec![0.0; dim];
        for (col, &c) in self.columns.iter().zip(xi) {
            for (o, v) in out.iter_mut().zip(col) {
                *o += c * v;
            }
        }
        out
    }

    /// `B_yᵀ x` for an ambient vector x of length q+1.
    pub fn to_tangent(&self, x: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|col| col.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Deterministic orthonormal completion of `y` via the Householder
/// reflection mapping `e₁ ↦ y`; columns are the images of `e₂..e_{q+1}`.
pub fn complete_basis(y: &UnitVector) -> TangentBasis {
    let dim = y.coords.len();
    let mut v: Vec<f64> = y.coords.clone();
    v[0] -= 1.0;
    let vnorm2: f64 = v.iter().map(|c| c * c).sum();
    let mut columns = Vec::with_capacity(dim - 1);
    for k in 1..dim {
        let mut col = vec![0.0; dim];
        col[k] = 1.0;
        if vnorm2 > 1e-30 {
            let scale = 2.0 * v[k] / vnorm2;
            for (c, vi) in col.iter_mut().zip(&v) {
                *c -= scale * vi;
            }
        }
        columns.push(col);
    }
    TangentBasis {
        base: y.clone(),
        columns,
    }
}

/// Tangent-normal coordinates of `x` relative to `y`:
/// `x = t·y + √(1−t²)·B_y ξ` with `t = xᵀy` and ξ a unit vector in tangent
/// coordinates.
#[derive(Debug, Clone)]
pub struct TangentCoords {
    pub t: f64,
    /// Unit tangent direction, length q. Arbitrary (but fixed) when
    /// `degenerate` is set.
    pub xi: Vec<f64>,
    /// True at the poles `|t| = 1`, where the tangent direction is
    /// undefined; integrands multiply ξ by `√(1−t²) = 0` there.
    pub degenerate: bool,
}

pub fn tangent_normal(x: &UnitVector, y: &UnitVector) -> Result<TangentCoords> {
    x.check_same_sphere(y)?;
    let t = x.dot(y).clamp(-1.0, 1.0);
    let q = y.q() as usize;
    if 1.0 - t.abs() < 1e-12 {
        let mut xi = vec![0.0; q];
        xi[0] = 1.0;
        return Ok(TangentCoords {
            t,
            xi,
            degenerate: true,
        });
    }
    let basis = complete_basis(y);
    let mut xi = basis.to_tangent(x.coords());
    let norm: f64 = xi.iter().map(|c| c * c).sum::<f64>().sqrt();
    for c in &mut xi {
        *c /= norm;
    }
    Ok(TangentCoords {
        t,
        xi,
        degenerate: false,
    })
}

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence. Nodes ascend.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to [a, b].
pub(crate) fn gauss_legendre_on(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|&t| mid + half * t).collect(),
        w.iter().map(|&wi| wi * half).collect(),
    )
}

/// Quadrature nodes and weights for `∫_{Ω_q} · ω_q(dx)`.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    q: u32,
    nodes: Vec<UnitVector>,
    weights: Vec<f64>,
}

impl SphereGrid {
    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn nodes(&self) -> &[UnitVector] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Builds a quadrature grid on `Ω_q`, q ∈ {1, 2, 3}.
///
/// q = 1 uses the periodic trapezoid rule in angle with `resolution` nodes
/// (spectrally accurate for smooth integrands). q ≥ 2 uses Gauss–Legendre
/// with `resolution` nodes in the polar angle φ (the weight `sin^{q−1}φ`
/// is absorbed into the node weights) tensorized with an `Ω_{q−1}` grid at
/// the same resolution.
pub fn build_sphere_grid(q: u32, resolution: usize) -> Result<SphereGrid> {
    if !(1..=3).contains(&q) {
        return Err(Error::Unsupported(format!(
            "sphere grids support q in {{1,2,3}}, got {q}"
        )));
    }
    if resolution < 8 {
        return Err(Error::Unsupported(format!(
            "resolution must be >= 8, got {resolution}"
        )));
    }
    Ok(build_sphere_grid_unchecked(q, resolution))
}

fn build_sphere_grid_unchecked(q: u32, resolution: usize) -> SphereGrid {
    if q == 1 {
        let n = resolution;
        let w = 2.0 * std::f64::consts::PI / n as f64;
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            nodes.push(UnitVector {
                coords: vec![theta.cos(), theta.sin()],
            });
        }
        return SphereGrid {
            q,
            weights: vec![w; n],
            nodes,
        };
    }
    let sub = build_sphere_grid_unchecked(q - 1, resolution);
    let (phis, wphis) = gauss_legendre_on(0.0, std::f64::consts::PI, resolution);
    let mut nodes = Vec::with_capacity(resolution * sub.len());
    let mut weights = Vec::with_capacity(resolution * sub.len());
    for (&phi, &wphi) in phis.iter().zip(&wphis) {
        let (sin_phi, cos_phi) = phi.sin_cos();
        let polar_weight = wphi * sin_phi.powi(q as i32 - 1);
        for (xi, &wxi) in sub.nodes.iter().zip(&sub.weights) {
            let mut coords = Vec::with_capacity(q as usize + 1);
            coords.push(cos_phi);
            coords.extend(xi.coords.iter().map(|c| sin_phi * c));
            nodes.push(UnitVector { coords });
            weights.push(polar_weight * wxi);
        }
    }
    SphereGrid { q, nodes, weights }
}

/// `Σ_i w_i f(x_i)` over a sphere grid, in node order with compensated
/// summation. Errors if the integrand is non-finite at any node.
pub fn integrate_sphere<F: Fn(&UnitVector) -> f64>(f: F, grid: &SphereGrid) -> Result<f64> {
    let mut acc = KahanSum::new();
    for (node, &w) in grid.nodes.iter().zip(&grid.weights) {
        let v = f(node);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!(
                "integrand value {v} at node {:?}",
                node.coords
            )));
        }
        acc.add(w * v);
    }
    Ok(acc.value())
}

/// Quadrature nodes and weights for a truncated line integral
/// `∫_{c−T}^{c+T} · dz`.
#[derive(Debug, Clone)]
pub struct LineGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    truncation: f64,
    center: f64,
}

impl LineGrid {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Half-width of the integration window.
    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss–Legendre grid on `[-truncation, truncation]`.
pub fn build_line_grid(truncation: f64, resolution: usize) -> Result<LineGrid> {
    build_line_grid_centered(0.0, truncation, resolution)
}

/// Gauss–Legendre grid on `[center − truncation, center + truncation]`.
pub fn build_line_grid_centered(
    center: f64,
    truncation: f64,
    resolution: usize,
) -> Result<LineGrid> {
    if !(truncation > 0.0) || !truncation.is_finite() || !center.is_finite() {
        return Err(Error::Domain(format!(
            "line grid needs a finite window, got center {center}, truncation {truncation}"
        )));
    }
    if resolution < 16 {
        return Err(Error::Unsupported(format!(
            "line resolution must be >= 16, got {resolution}"
        )));
    }
    let (nodes, weights) = gauss_legendre_on(center - truncation, center + truncation, resolution);
    Ok(LineGrid {
        nodes,
        weights,
        truncation,
        center,
    })
}

/// `Σ_i w_i f(z_i)` over a line grid.
pub fn integrate_line<F: Fn(f64) -> f64>(f: F, grid: &LineGrid) -> Result<f64> {
    let mut acc = KahanSum::new();
    for (&z, &w) in grid.nodes.iter().zip(&grid.weights) {
        let v = f(z);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("integrand value {v} at z = {z}")));
        }
        acc.add(w * v);
    }
    Ok(acc.value())
}

/// Tensor-product quadrature over `Ω_q × [window]`, sphere-major order.
pub fn integrate_sphere_line<F: Fn(&UnitVector, f64) -> f64>(
    f: F,
    sgrid: &SphereGrid,
    lgrid: &LineGrid,
) -> Result<f64> {
    let mut acc = KahanSum::new();
    for (node, &ws) in sgrid.nodes.iter().zip(&sgrid.weights) {
        for (&z, &wl) in lgrid.nodes.iter().zip(&lgrid.weights) {
            let v = f(node, z);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "integrand value {v} at ({:?}, {z})",
                    node.coords
                )));
            }
            acc.add(ws * wl * v);
        }
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::log_cq_raw;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut ChaCha8Rng, q: u32) -> UnitVector {
        loop {
            let coords: Vec<f64> = (0..=q).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            if let Ok(u) = UnitVector::new(coords) {
                return u;
            }
        }
    }

    #[test]
    fn surface_areas() {
        let pi = std::f64::consts::PI;
        assert!((surface_area(1).unwrap() - 2.0 * pi).abs() < 1e-12);
        assert!((surface_area(2).unwrap() - 4.0 * pi).abs() < 1e-12);
        assert!((surface_area(3).unwrap() - 2.0 * pi * pi).abs() < 1e-12);
        assert!(surface_area(0).is_err());
    }

    #[test]
    fn unit_vector_renormalizes() {
        let u = UnitVector::new(vec![3.0, 4.0]).unwrap();
        let norm: f64 = u.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(UnitVector::new(vec![0.0, 0.0]).is_err());
        assert!(UnitVector::new(vec![1.0]).is_err());
        assert!(UnitVector::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn basis_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for q in 1..=3u32 {
            for _ in 0..20 {
                let y = random_unit(&mut rng, q);
                let b = complete_basis(&y);
                let dim = q as usize + 1;
                for (i, ci) in b.columns().iter().enumerate() {
                    for (j, cj) in b.columns().iter().enumerate() {
                        let dot: f64 = ci.iter().zip(cj).map(|(a, b)| a * b).sum();
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!((dot - want).abs() < 1e-12);
                    }
                    let dy: f64 = ci.iter().zip(y.coords()).map(|(a, b)| a * b).sum();
                    assert!(dy.abs() < 1e-12);
                }
                // B Bᵀ + y yᵀ = I
                for r in 0..dim {
                    for c in 0..dim {
                        let bbt: f64 = b.columns().iter().map(|col| col[r] * col[c]).sum();
                        let val = bbt + y.coords()[r] * y.coords()[c];
                        let want = if r == c { 1.0 } else { 0.0 };
                        assert!((val - want).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn basis_axis_case() {
        let e1 = UnitVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        let b = complete_basis(&e1);
        assert_eq!(b.columns().len(), 2);
        for col in b.columns() {
            assert!(col[0].abs() < 1e-15);
        }
        let m = UnitVector::new(vec![-1.0, 0.0, 0.0]).unwrap();
        let bm = complete_basis(&m);
        for col in bm.columns() {
            let dy: f64 = col.iter().zip(m.coords()).map(|(a, b)| a * b).sum();
            assert!(dy.abs() < 1e-12);
        }
    }

    #[test]
    fn tangent_normal_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for q in 1..=3u32 {
            for _ in 0..50 {
                let x = random_unit(&mut rng, q);
                let y = random_unit(&mut rng, q);
                let tc = tangent_normal(&x, &y).unwrap();
                if tc.degenerate {
                    continue;
                }
                let xin: f64 = tc.xi.iter().map(|c| c * c).sum::<f64>().sqrt();
                assert!((xin - 1.0).abs() < 1e-10);
                let b = complete_basis(&y);
                let amb = b.from_tangent(&tc.xi);
                let s = (1.0 - tc.t * tc.t).sqrt();
                for ((&xc, &yc), &ac) in x.coords().iter().zip(y.coords()).zip(&amb) {
                    assert!((xc - (tc.t * yc + s * ac)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn tangent_normal_poles() {
        let y = UnitVector::new(vec![0.0, 1.0, 0.0]).unwrap();
        let same = tangent_normal(&y, &y).unwrap();
        assert!((same.t - 1.0).abs() < 1e-15);
        assert!(same.degenerate);
        let x = UnitVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        let perp = tangent_normal(&x, &y).unwrap();
        assert!(perp.t.abs() < 1e-15);
        assert!(!perp.degenerate);
        let z2 = UnitVector::new(vec![1.0, 0.0]).unwrap();
        assert!(tangent_normal(&x, &z2).is_err());
    }

    #[test]
    fn gauss_legendre_basics() {
        let (x, w) = gauss_legendre(16);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let m2: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi * xi).sum();
        assert!((m2 - 2.0 / 3.0).abs() < 1e-14);
        let m6: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(6)).sum();
        assert!((m6 - 2.0 / 7.0).abs() < 1e-13);
    }

    #[test]
    fn grid_mass_matches_surface_area() {
        for q in 1..=3u32 {
            let res = if q == 3 { 32 } else { 64 };
            let grid = build_sphere_grid(q, res).unwrap();
            let mass: f64 = integrate_sphere(|_| 1.0, &grid).unwrap();
            assert!(
                (mass - surface_area(q).unwrap()).abs() < 1e-8,
                "q={q}: {mass}"
            );
            assert!(grid.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn moment_suite() {
        // First moments vanish; second moments are ω_q/(q+1) δ_ij.
        for q in 1..=3u32 {
            let res = if q == 3 { 32 } else { 64 };
            let grid = build_sphere_grid(q, res).unwrap();
            let omega = surface_area(q).unwrap();
            let dim = q as usize + 1;
            for i in 0..dim {
                let fi = integrate_sphere(|x| x.coords()[i], &grid).unwrap();
                assert!(fi.abs() < 1e-10, "q={q} i={i}: {fi}");
                for j in 0..dim {
                    let fij = integrate_sphere(|x| x.coords()[i] * x.coords()[j], &grid).unwrap();
                    let want = if i == j { omega / (q as f64 + 1.0) } else { 0.0 };
                    if i == j {
                        assert!(
                            ((fij - want) / want).abs() < 1e-7,
                            "q={q} ({i},{j}): {fij} vs {want}"
                        );
                    } else {
                        assert!(fij.abs() < 1e-10, "q={q} ({i},{j}): {fij}");
                    }
                }
            }
        }
    }

    #[test]
    fn vmf_normalizes_on_grids() {
        for (q, res, kappa) in [(1u32, 128usize, 2.0), (2, 64, 10.0)] {
            let grid = build_sphere_grid(q, res).unwrap();
            let mu = {
                let mut c = vec![0.0; q as usize + 1];
                c[q as usize] = 1.0;
                UnitVector::new(c).unwrap()
            };
            let lc = log_cq_raw(q, kappa);
            let total = integrate_sphere(|x| (lc + kappa * x.dot(&mu)).exp(), &grid).unwrap();
            assert!((total - 1.0).abs() < 1e-6, "q={q}: {total}");
        }
    }

    #[test]
    fn off_diagonal_product_vanishes() {
        let grid = build_sphere_grid(2, 64).unwrap();
        let v = integrate_sphere(|x| x.coords()[1] * x.coords()[2], &grid).unwrap();
        assert!(v.abs() < 1e-10);
    }

    #[test]
    fn resolution_doubling_reduces_error() {
        let mu = UnitVector::new(vec![0.0, 0.0, 1.0]).unwrap();
        let lc = log_cq_raw(2, 10.0);
        let err_at = |res: usize| {
            let grid = build_sphere_grid(2, res).unwrap();
            (integrate_sphere(|x| (lc + 10.0 * x.dot(&mu)).exp(), &grid).unwrap() - 1.0).abs()
        };
        let mut prev = err_at(8);
        for res in [16, 32] {
            let e = err_at(res);
            assert!(e < prev / 10.0 || e < 1e-13, "res={res}: {e} (prev {prev})");
            prev = e;
        }
    }

    #[test]
    fn change_of_variables_identity() {
        // ∫_{Ω_q} f = ∫_{-1}^{1} ∫_{Ω_{q-1}} f(t y + √(1−t²) B_y ξ)
        //             (1−t²)^{q/2−1} ω_{q-1}(dξ) dt for any fixed y.
        let f = |x: &UnitVector| (x.coords()[0] + 0.5 * x.coords()[1]).exp();
        for q in [2u32, 3] {
            let res = if q == 3 { 24 } else { 64 };
            let grid = build_sphere_grid(q, res).unwrap();
            let lhs = integrate_sphere(f, &grid).unwrap();

            let mut yc = vec![0.0; q as usize + 1];
            yc[0] = 0.6;
            yc[q as usize] = -0.8;
            let y = UnitVector::new(yc).unwrap();
            let basis = complete_basis(&y);
            let sub = build_sphere_grid(q - 1, res).unwrap();
            // t = cos φ keeps the (1−t²)^{q/2−1} weight smooth for odd q
            let (phis, wphis) = gauss_legendre_on(0.0, std::f64::consts::PI, res);
            let mut acc = KahanSum::new();
            for (&phi, &wphi) in phis.iter().zip(&wphis) {
                let (s, t) = phi.sin_cos();
                let wt = wphi * s;
                let jac = (1.0 - t * t).powf(q as f64 / 2.0 - 1.0);
                for (xi, &wxi) in sub.nodes().iter().zip(sub.weights()) {
                    let amb = basis.from_tangent(xi.coords());
                    let coords: Vec<f64> = y
                        .coords()
                        .iter()
                        .zip(&amb)
                        .map(|(&yc, &ac)| t * yc + s * ac)
                        .collect();
                    let x = UnitVector::new(coords).unwrap();
                    acc.add(wt * jac * wxi * f(&x));
                }
            }
            let rhs = acc.value();
            assert!(((lhs - rhs) / lhs).abs() < 1e-7, "q={q}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn line_grid_normal_density() {
        let grid = build_line_grid(8.0, 128).unwrap();
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mass = integrate_line(phi, &grid).unwrap();
        assert!((mass - 1.0).abs() < 1e-8);
        let odd = integrate_line(|z| z * phi(z), &grid).unwrap();
        assert!(odd.abs() < 1e-10);
        let second = integrate_line(|z| z * z * phi(z), &grid).unwrap();
        assert!((second - 1.0).abs() < 1e-8);
    }

    #[test]
    fn line_grid_validation() {
        assert!(build_line_grid(0.0, 64).is_err());
        assert!(build_line_grid(1.0, 8).is_err());
        assert!(build_line_grid_centered(f64::NAN, 1.0, 64).is_err());
    }

    #[test]
    fn sphere_line_product_factorizes() {
        let sgrid = build_sphere_grid(1, 64).unwrap();
        let lgrid = build_line_grid(6.0, 64).unwrap();
        let fs = |x: &UnitVector| 1.0 + 0.3 * x.coords()[0];
        let fl = |z: f64| (-0.5 * z * z).exp();
        let joint = integrate_sphere_line(|x, z| fs(x) * fl(z), &sgrid, &lgrid).unwrap();
        let ms = integrate_sphere(fs, &sgrid).unwrap();
        let ml = integrate_line(fl, &lgrid).unwrap();
        assert!((joint - ms * ml).abs() < 1e-8 * (ms * ml).abs());
    }

    #[test]
    fn integrators_reject_non_finite() {
        let grid = build_sphere_grid(1, 16).unwrap();
        assert!(integrate_sphere(|x| 1.0 / (x.coords()[0] - x.coords()[0]), &grid).is_err());
        let lg = build_line_grid(1.0, 16).unwrap();
        assert!(integrate_line(|_| f64::INFINITY, &lg).is_err());
    }

    #[test]
    fn unsupported_dimensions_rejected() {
        assert!(build_sphere_grid(0, 64).is_err());
        assert!(build_sphere_grid(4, 64).is_err());
        assert!(build_sphere_grid(2, 4).is_err());
    }
}
