//! Band-limited fields in a real orthonormal harmonic basis, and `A_s`.
//!
//! Storage is dense per degree. For `N = 1` degree `ℓ ≥ 1` holds
//! `[cos ℓθ, sin ℓθ]/√π`; for `N = 2` degree `ℓ` holds `m = -ℓ..=ℓ` at index
//! `m + ℓ`, with `m < 0` the `sin(|m|φ)` harmonics and `m > 0` the `cos(mφ)`
//! ones.

use std::collections::BTreeSet;
use std::f64::consts::{PI, SQRT_2};
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constants::{alpha_table, ProblemParams};
use crate::error::{Error, Result};
use crate::sphere::{GridRule, QuadratureGrid, SpherePoint};

/// Number of basis functions of degree `l` on `S^dim`.
pub fn degree_size(dim: usize, l: usize) -> usize {
    match (dim, l) {
        (_, 0) => 1,
        (1, _) => 2,
        _ => 2 * l + 1,
    }
}

fn degree_offset(dim: usize, l: usize) -> usize {
    match (dim, l) {
        (_, 0) => 0,
        (1, _) => 2 * l - 1,
        _ => l * l,
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

/// Real coefficients of a function on `S^N` up to degree `lmax`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereField {
    dim: usize,
    lmax: usize,
    coeffs: Vec<f64>,
}

impl SphereField {
    pub fn zeros(dim: usize, lmax: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            lmax,
            coeffs: vec![0.0; degree_offset(dim, lmax + 1)],
        })
    }

    pub fn from_coeffs(dim: usize, lmax: usize, coeffs: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        let want = degree_offset(dim, lmax + 1);
        if coeffs.len() != want {
            return Err(Error::Domain(format!(
                "expected {want} coefficients for lmax={lmax}, got {}",
                coeffs.len()
            )));
        }
        Ok(Self { dim, lmax, coeffs })
    }

    /// The constant function `value`.
    pub fn constant(dim: usize, lmax: usize, value: f64) -> Result<Self> {
        let mut f = Self::zeros(dim, lmax)?;
        f.coeffs[0] = value * crate::constants::sphere_area(dim).sqrt();
        Ok(f)
    }

    /// Gaussian coefficients on the selected degrees (others zero).
    pub fn random<R: Rng + ?Sized>(dim: usize, lmax: usize, degrees: &DegreeProjector, rng: &mut R) -> Result<Self> {
        let mut f = Self::zeros(dim, lmax)?;
        for l in 0..=lmax {
            if degrees.contains(l) {
                for c in f.degree_mut(l) {
                    *c = rng.sample(rand_distr::StandardNormal);
                }
            }
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn degree(&self, l: usize) -> &[f64] {
        let o = degree_offset(self.dim, l);
        &self.coeffs[o..o + degree_size(self.dim, l)]
    }

    pub fn degree_mut(&mut self, l: usize) -> &mut [f64] {
        let o = degree_offset(self.dim, l);
        let n = degree_size(self.dim, l);
        &mut self.coeffs[o..o + n]
    }

    /// Mean value over the sphere.
    pub fn mean(&self) -> f64 {
        self.coeffs[0] / crate::constants::sphere_area(self.dim).sqrt()
    }

    /// Zero-padded or truncated copy at a new degree bound.
    pub fn with_lmax(&self, lmax: usize) -> Self {
        let mut out = Self::zeros(self.dim, lmax).expect("dimension already checked");
        let n = out.coeffs.len().min(self.coeffs.len());
        out.coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        out
    }

    fn aligned(&self, other: &Self) -> (Self, Self) {
        assert_eq!(self.dim, other.dim, "fields on different spheres");
        let l = self.lmax.max(other.lmax);
        (self.with_lmax(l), other.with_lmax(l))
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            dim: self.dim,
            lmax: self.lmax,
            coeffs: self.coeffs.iter().map(|c| a * c).collect(),
        }
    }

    /// `self + a·other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        let (mut x, y) = self.aligned(other);
        x.coeffs.iter_mut().zip(&y.coeffs).for_each(|(x, y)| *x += a * y);
        x
    }

    /// Multiplies every degree-`ℓ` block by `factor(ℓ)`.
    pub fn map_degrees<F: Fn(usize) -> f64>(&self, factor: F) -> Self {
        let mut out = self.clone();
        for l in 0..=self.lmax {
            let f = factor(l);
            out.degree_mut(l).iter_mut().for_each(|c| *c *= f);
        }
        out
    }

    /// `L²(S^N)` inner product.
    pub fn l2_dot(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "fields on different spheres");
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// `Σ_j c_{ℓj}²` for each degree.
    pub fn degree_energies(&self) -> Vec<f64> {
        (0..=self.lmax)
            .map(|l| self.degree(l).iter().map(|c| c * c).sum())
            .collect()
    }

    /// Point evaluation.
    pub fn eval(&self, point: &SpherePoint) -> f64 {
        let basis = basis_values(self.dim, self.lmax, point);
        basis.iter().zip(&self.coeffs).map(|(b, c)| b * c).sum()
    }

    /// Coordinates `b_i` of the degree-1 part `Σ b_i ω_i`, in `ω` order.
    pub fn degree_one_coordinates(&self) -> Vec<f64> {
        if self.lmax == 0 {
            return vec![0.0; self.dim + 1];
        }
        let k = ((self.dim as f64 + 1.0) / crate::constants::sphere_area(self.dim)).sqrt();
        let d = self.degree(1);
        match self.dim {
            1 => vec![k * d[0], k * d[1]],
            _ => vec![k * d[2], k * d[0], k * d[1]],
        }
    }
}

impl Add for &SphereField {
    type Output = SphereField;
    fn add(self, rhs: &SphereField) -> SphereField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &SphereField {
    type Output = SphereField;
    fn sub(self, rhs: &SphereField) -> SphereField {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<&SphereField> for f64 {
    type Output = SphereField;
    fn mul(self, rhs: &SphereField) -> SphereField {
        rhs.scale(self)
    }
}

impl Neg for &SphereField {
    type Output = SphereField;
    fn neg(self) -> SphereField {
        self.scale(-1.0)
    }
}

/// Set of degrees kept by a projection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeProjector {
    degrees: BTreeSet<usize>,
}

impl DegreeProjector {
    pub fn new<I: IntoIterator<Item = usize>>(degrees: I) -> Self {
        Self {
            degrees: degrees.into_iter().collect(),
        }
    }

    /// Degrees `lo..=hi`.
    pub fn range(lo: usize, hi: usize) -> Self {
        Self::new(lo..=hi)
    }

    /// `T_{0,1}`: degrees `{0, 1}`.
    pub fn tangent() -> Self {
        Self::new([0, 1])
    }

    /// `E_0`: degree 2.
    pub fn e_zero() -> Self {
        Self::new([2])
    }

    /// `E_+`: degrees `3..=lmax`.
    pub fn e_plus(lmax: usize) -> Self {
        Self::range(3, lmax)
    }

    pub fn complement(&self, lmax: usize) -> Self {
        Self::new((0..=lmax).filter(|l| !self.degrees.contains(l)))
    }

    pub fn contains(&self, l: usize) -> bool {
        self.degrees.contains(&l)
    }

    pub fn degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.degrees.iter().copied()
    }
}

/// Zeroes every degree outside the projector.
pub fn project(field: &SphereField, projector: &DegreeProjector) -> SphereField {
    field.map_degrees(|l| if projector.contains(l) { 1.0 } else { 0.0 })
}

/// `A_s`: degree `ℓ` scaled by `α(ℓ)`.
pub fn apply_as(field: &SphereField, params: &ProblemParams) -> SphereField {
    let a = alpha_table(field.lmax(), params);
    field.map_degrees(|l| a[l])
}

/// `A_s^{-1}`.
pub fn apply_as_inv(field: &SphereField, params: &ProblemParams) -> SphereField {
    let a = alpha_table(field.lmax(), params);
    field.map_degrees(|l| 1.0 / a[l])
}

fn tri(l: usize) -> usize {
    l * (l + 1) / 2
}

/// Fully normalized `λ_ℓ^m(x)`, `0 ≤ m ≤ ℓ ≤ lmax`, at index `ℓ(ℓ+1)/2 + m`,
/// so that `λ_ℓ^0` and `√2 λ_ℓ^m cos/sin(mφ)` are orthonormal on `S²`.
pub fn normalized_legendre(lmax: usize, x: f64) -> Vec<f64> {
    let st = (1.0 - x * x).max(0.0).sqrt();
    let mut out = vec![0.0; tri(lmax + 1)];
    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            let mf = m as f64;
            pmm *= st * ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt();
        }
        out[tri(m) + m] = pmm;
        if m < lmax {
            out[tri(m + 1) + m] = (2.0 * m as f64 + 3.0).sqrt() * x * pmm;
        }
        let mf = m as f64;
        for l in m + 2..=lmax {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            out[tri(l) + m] = a * (x * out[tri(l - 1) + m] - b * out[tri(l - 2) + m]);
        }
    }
    out
}

/// All basis functions at one point, in coefficient order.
pub fn basis_values(dim: usize, lmax: usize, point: &SpherePoint) -> Vec<f64> {
    let c = point.coords();
    let mut out = Vec::with_capacity(degree_offset(dim, lmax + 1));
    if dim == 1 {
        let theta = c[1].atan2(c[0]);
        out.push(1.0 / (2.0 * PI).sqrt());
        let k = 1.0 / PI.sqrt();
        for l in 1..=lmax {
            let (s, co) = (l as f64 * theta).sin_cos();
            out.push(k * co);
            out.push(k * s);
        }
        return out;
    }
    let phi = c[1].atan2(c[0]);
    let leg = normalized_legendre(lmax, c[2].clamp(-1.0, 1.0));
    for l in 0..=lmax {
        for m in -(l as i64)..=(l as i64) {
            let am = m.unsigned_abs() as usize;
            let p = leg[tri(l) + am];
            out.push(match m.cmp(&0) {
                std::cmp::Ordering::Less => SQRT_2 * p * (am as f64 * phi).sin(),
                std::cmp::Ordering::Equal => p,
                std::cmp::Ordering::Greater => SQRT_2 * p * (am as f64 * phi).cos(),
            });
        }
    }
    out
}

/// Precomputed tables for transforms between one grid and degree bound.
#[derive(Debug, Clone)]
pub struct SpectralPlan {
    dim: usize,
    lmax: usize,
    npts: usize,
    kind: PlanKind,
}

#[derive(Debug, Clone)]
enum PlanKind {
    Circle {
        weight: f64,
        // nodes × (lmax+1), already scaled by the basis normalization
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
    Sphere {
        rings: usize,
        azimuth: usize,
        ring_weights: Vec<f64>,
        dphi: f64,
        // rings × tri(lmax+1)
        legendre: Vec<f64>,
        // azimuth × (lmax+1)
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
}

impl SpectralPlan {
    /// Requires `grid.degree_bound() ≥ lmax` so analysis is exact.
    pub fn new(grid: &QuadratureGrid, lmax: usize) -> Result<Self> {
        if grid.degree_bound() < lmax {
            return Err(Error::Resolution(format!(
                "grid degree bound {} is below lmax {lmax}",
                grid.degree_bound()
            )));
        }
        let l1 = lmax + 1;
        let kind = match grid.rule() {
            GridRule::Circle { nodes } => {
                let mut cos = vec![0.0; nodes * l1];
                let mut sin = vec![0.0; nodes * l1];
                let k = 1.0 / PI.sqrt();
                for (j, p) in grid.nodes().iter().enumerate() {
                    let theta = p.coords()[1].atan2(p.coords()[0]);
                    cos[j * l1] = 1.0 / (2.0 * PI).sqrt();
                    for l in 1..=lmax {
                        let (s, c) = (l as f64 * theta).sin_cos();
                        cos[j * l1 + l] = k * c;
                        sin[j * l1 + l] = k * s;
                    }
                }
                PlanKind::Circle {
                    weight: 2.0 * PI / *nodes as f64,
                    cos,
                    sin,
                }
            }
            GridRule::GaussAzimuth {
                cos_theta,
                ring_weights,
                azimuth,
            } => {
                let t = tri(l1);
                let mut legendre = vec![0.0; cos_theta.len() * t];
                for (i, x) in cos_theta.iter().enumerate() {
                    legendre[i * t..(i + 1) * t].copy_from_slice(&normalized_legendre(lmax, *x));
                }
                let dphi = 2.0 * PI / *azimuth as f64;
                let mut cos = vec![0.0; azimuth * l1];
                let mut sin = vec![0.0; azimuth * l1];
                for j in 0..*azimuth {
                    for m in 0..=lmax {
                        let (s, c) = (m as f64 * dphi * j as f64).sin_cos();
                        cos[j * l1 + m] = c;
                        sin[j * l1 + m] = s;
                    }
                }
                PlanKind::Sphere {
                    rings: cos_theta.len(),
                    azimuth: *azimuth,
                    ring_weights: ring_weights.clone(),
                    dphi,
                    legendre,
                    cos,
                    sin,
                }
            }
        };
        Ok(Self {
            dim: grid.dim(),
            lmax,
            npts: grid.len(),
            kind,
        })
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Quadrature inner products against the basis, up to `self.lmax`.
    pub fn analyze(&self, values: &[f64]) -> SphereField {
        assert_eq!(values.len(), self.npts, "value count does not match the grid");
        let l1 = self.lmax + 1;
        let mut out = SphereField::zeros(self.dim, self.lmax).expect("checked dimension");
        match &self.kind {
            PlanKind::Circle { weight, cos, sin } => {
                let c = out.coeffs_mut();
                for (j, v) in values.iter().enumerate() {
                    let wv = weight * v;
                    c[0] += wv * cos[j * l1];
                    for l in 1..=self.lmax {
                        c[2 * l - 1] += wv * cos[j * l1 + l];
                        c[2 * l] += wv * sin[j * l1 + l];
                    }
                }
            }
            PlanKind::Sphere {
                rings,
                azimuth,
                ring_weights,
                dphi,
                legendre,
                cos,
                sin,
            } => {
                let t = tri(l1);
                let mut fc = vec![0.0; l1];
                let mut fs = vec![0.0; l1];
                let c = out.coeffs_mut();
                for i in 0..*rings {
                    fc.iter_mut().for_each(|v| *v = 0.0);
                    fs.iter_mut().for_each(|v| *v = 0.0);
                    let row = &values[i * azimuth..(i + 1) * azimuth];
                    for (j, v) in row.iter().enumerate() {
                        let cj = &cos[j * l1..(j + 1) * l1];
                        let sj = &sin[j * l1..(j + 1) * l1];
                        for m in 0..l1 {
                            fc[m] += v * cj[m];
                            fs[m] += v * sj[m];
                        }
                    }
                    let w = ring_weights[i] * dphi;
                    let leg = &legendre[i * t..(i + 1) * t];
                    for l in 0..=self.lmax {
                        let base = l * l + l;
                        let lt = tri(l);
                        c[base] += w * leg[lt] * fc[0];
                        for m in 1..=l {
                            let p = w * SQRT_2 * leg[lt + m];
                            c[base + m] += p * fc[m];
                            c[base - m] += p * fs[m];
                        }
                    }
                }
            }
        }
        out
    }

    /// Grid values of `field` (degrees above `self.lmax` are ignored).
    pub fn synthesize(&self, field: &SphereField) -> Vec<f64> {
        assert_eq!(field.dim(), self.dim, "field on a different sphere");
        let lmax = self.lmax.min(field.lmax());
        let l1 = self.lmax + 1;
        let c = field.coeffs();
        let mut out = vec![0.0; self.npts];
        match &self.kind {
            PlanKind::Circle { cos, sin, .. } => {
                for (j, o) in out.iter_mut().enumerate() {
                    let mut acc = c[0] * cos[j * l1];
                    for l in 1..=lmax {
                        acc += c[2 * l - 1] * cos[j * l1 + l] + c[2 * l] * sin[j * l1 + l];
                    }
                    *o = acc;
                }
            }
            PlanKind::Sphere {
                rings,
                azimuth,
                legendre,
                cos,
                sin,
                ..
            } => {
                let t = tri(l1);
                let mut gc = vec![0.0; l1];
                let mut gs = vec![0.0; l1];
                for i in 0..*rings {
                    gc.iter_mut().for_each(|v| *v = 0.0);
                    gs.iter_mut().for_each(|v| *v = 0.0);
                    let leg = &legendre[i * t..(i + 1) * t];
                    for l in 0..=lmax {
                        let base = l * l + l;
                        let lt = tri(l);
                        gc[0] += leg[lt] * c[base];
                        for m in 1..=l {
                            let p = SQRT_2 * leg[lt + m];
                            gc[m] += p * c[base + m];
                            gs[m] += p * c[base - m];
                        }
                    }
                    let row = &mut out[i * azimuth..(i + 1) * azimuth];
                    for (j, o) in row.iter_mut().enumerate() {
                        let cj = &cos[j * l1..(j + 1) * l1];
                        let sj = &sin[j * l1..(j + 1) * l1];
                        let mut acc = gc[0];
                        for m in 1..=lmax {
                            acc += gc[m] * cj[m] + gs[m] * sj[m];
                        }
                        *o = acc;
                    }
                }
            }
        }
        out
    }
}

/// One-shot analysis; builds a plan per call.
pub fn analyze(values: &[f64], grid: &QuadratureGrid, lmax: usize) -> Result<SphereField> {
    Ok(SpectralPlan::new(grid, lmax)?.analyze(values))
}

/// One-shot synthesis; builds a plan per call.
pub fn synthesize(field: &SphereField, grid: &QuadratureGrid) -> Result<Vec<f64>> {
    if field.dim() != grid.dim() {
        return Err(Error::Domain("field and grid live on different spheres".into()));
    }
    let lmax = field.lmax().min(grid.degree_bound());
    Ok(SpectralPlan::new(grid, lmax)?.synthesize(field))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::build_quadrature;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn degree_counts() {
        let f1 = SphereField::zeros(1, 5).unwrap();
        assert_eq!(f1.coeffs().len(), 11);
        assert_eq!(f1.degree(3).len(), 2);
        let f2 = SphereField::zeros(2, 5).unwrap();
        assert_eq!(f2.coeffs().len(), 36);
        assert_eq!(f2.degree(4).len(), 9);
        assert!(SphereField::zeros(3, 2).is_err());
    }

    fn orthonormality(dim: usize, lmax: usize) {
        let grid = build_quadrature(dim, lmax).unwrap();
        let n = degree_offset(dim, lmax + 1);
        let basis: Vec<Vec<f64>> = grid.nodes().iter().map(|p| basis_values(dim, lmax, p)).collect();
        for a in 0..n {
            for b in a..n {
                let g: f64 = basis.iter().zip(grid.weights()).map(|(v, w)| w * v[a] * v[b]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-10, "dim={dim} a={a} b={b} g={g}");
            }
        }
    }

    #[test]
    fn basis_orthonormal() {
        orthonormality(1, 12);
        orthonormality(2, 10);
    }

    #[test]
    fn constant_analysis() {
        for dim in [1, 2] {
            let grid = build_quadrature(dim, 8).unwrap();
            let f = analyze(&vec![2.5; grid.len()], &grid, 8).unwrap();
            let area = crate::constants::sphere_area(dim);
            assert!((f.coeffs()[0] - 2.5 * area.sqrt()).abs() < 1e-12);
            assert!(f.coeffs()[1..].iter().all(|c| c.abs() < 1e-12));
            let mut unit = SphereField::zeros(dim, 8).unwrap();
            unit.coeffs_mut()[0] = 1.0;
            let vals = synthesize(&unit, &grid).unwrap();
            assert!(vals.iter().all(|v| (v - area.powf(-0.5)).abs() < 1e-14));
        }
    }

    #[test]
    fn product_of_coordinates_is_degree_two() {
        let grid = build_quadrature(2, 8).unwrap();
        let vals: Vec<f64> = grid.nodes().iter().map(|p| p.coords()[0] * p.coords()[1]).collect();
        let f = analyze(&vals, &grid, 8).unwrap();
        let e = f.degree_energies();
        let total: f64 = e.iter().sum();
        assert!((e[2] / total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn round_trip_and_parseval() {
        for dim in [1, 2] {
            let lmax = 14;
            let grid = build_quadrature(dim, 2 * lmax).unwrap();
            let plan = SpectralPlan::new(&grid, lmax).unwrap();
            let f = SphereField::random(dim, lmax, &DegreeProjector::range(0, lmax), &mut rng(3)).unwrap();
            let vals = plan.synthesize(&f);
            let back = plan.analyze(&vals);
            for (a, b) in back.coeffs().iter().zip(f.coeffs()) {
                assert!((a - b).abs() < 1e-10);
            }
            let quad: f64 = grid.integrate(&vals.iter().map(|v| v * v).collect::<Vec<_>>());
            assert!((quad / f.l2_norm_sq() - 1.0).abs() < 1e-8);
            // pointwise evaluation agrees with synthesis
            for (k, p) in grid.nodes().iter().enumerate().step_by(97) {
                assert!((f.eval(p) - vals[k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let grid = build_quadrature(2, 6).unwrap();
        assert!(matches!(SpectralPlan::new(&grid, 7), Err(Error::Resolution(_))));
    }

    #[test]
    fn as_examples() {
        let p = ProblemParams::new(2, 0.5).unwrap();
        let c = SphereField::constant(2, 4, 1.0).unwrap();
        let ac = apply_as(&c, &p);
        assert!((ac.coeffs()[0] / c.coeffs()[0] - 0.5).abs() < 1e-14);
        let p31 = ProblemParams::new(3, 1.0).unwrap();
        let a2 = crate::constants::alpha(2, &p31);
        assert!((a2 - 8.75).abs() < 1e-13);
        let f = SphereField::random(2, 6, &DegreeProjector::range(0, 6), &mut rng(5)).unwrap();
        let back = apply_as_inv(&apply_as(&f, &p), &p);
        for (a, b) in back.coeffs().iter().zip(f.coeffs()) {
            assert!((a - b).abs() <= 1e-13 * b.abs().max(1.0));
        }
    }

    #[test]
    fn as_symmetric_and_bounded() {
        let p = ProblemParams::new(2, 0.3).unwrap();
        let all = DegreeProjector::range(0, 10);
        let table = alpha_table(10, &p);
        for seed in 0..20 {
            let f = SphereField::random(2, 10, &all, &mut rng(seed)).unwrap();
            let g = SphereField::random(2, 10, &all, &mut rng(seed + 100)).unwrap();
            let lhs = apply_as(&f, &p).l2_dot(&g);
            let rhs = f.l2_dot(&apply_as(&g, &p));
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
            let rq = apply_as(&f, &p).l2_dot(&f) / f.l2_norm_sq();
            assert!(rq >= table[0] && rq <= table[10]);
        }
    }

    #[test]
    fn projectors() {
        let lmax = 8;
        let f = SphereField::random(2, lmax, &DegreeProjector::range(0, lmax), &mut rng(9)).unwrap();
        let t = DegreeProjector::tangent();
        let tc = t.complement(lmax);
        let a = project(&f, &t);
        let b = project(&f, &tc);
        assert!(project(&a, &tc).l2_norm_sq() == 0.0);
        let sum = &a + &b;
        assert_eq!(sum, f);
        assert!((f.l2_norm_sq() - a.l2_norm_sq() - b.l2_norm_sq()).abs() < 1e-12);
        assert_eq!(project(&a, &t), a);
        let e0 = project(&f, &DegreeProjector::e_zero());
        let ep = project(&f, &DegreeProjector::e_plus(lmax));
        let whole = &(&a + &e0) + &ep;
        assert_eq!(whole, f);
    }

    #[test]
    fn degree_one_coordinates_recover_linear_functions() {
        for dim in [1usize, 2] {
            let grid = build_quadrature(dim, 6).unwrap();
            let b: Vec<f64> = (0..=dim).map(|i| 0.3 * i as f64 - 0.2).collect();
            let vals: Vec<f64> = grid
                .nodes()
                .iter()
                .map(|p| p.coords().iter().zip(&b).map(|(c, b)| c * b).sum())
                .collect();
            let f = analyze(&vals, &grid, 4).unwrap();
            for (got, want) in f.degree_one_coordinates().iter().zip(&b) {
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn linearity(a in -3.0f64..3.0, seed in 0u64..1000) {
            let grid = build_quadrature(2, 6).unwrap();
            let plan = SpectralPlan::new(&grid, 6).unwrap();
            let all = DegreeProjector::range(0, 6);
            let f = SphereField::random(2, 6, &all, &mut rng(seed)).unwrap();
            let g = SphereField::random(2, 6, &all, &mut rng(seed + 1)).unwrap();
            let lhs = plan.synthesize(&f.axpy(a, &g));
            let fv = plan.synthesize(&f);
            let gv = plan.synthesize(&g);
            for k in 0..lhs.len() {
                prop_assert!((lhs[k] - fv[k] - a * gv[k]).abs() < 1e-11);
            }
        }
    }
}
