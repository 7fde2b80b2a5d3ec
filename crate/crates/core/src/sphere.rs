//! Stereographic projection, conformal weights and quadrature on `S^N`.
//!
//! The projection pole is `(0, …, 0, 1)`; the origin of `R^N` maps to the
//! south pole. For `N = 2` a point is `(sinθ cosφ, sinθ sinφ, cosθ)`, for
//! `N = 1` it is `(cosθ, sinθ)`.

use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use crate::constants::{sphere_area, ProblemParams};
use crate::error::{Error, Result};

/// A unit vector in `R^{N+1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpherePoint {
    coords: Vec<f64>,
}

impl SpherePoint {
    /// Checks `|coords| = 1` to 1e-12.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::Domain("a sphere point needs at least 2 coordinates".into()));
        }
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("sphere point has norm {norm}")));
        }
        Ok(Self { coords })
    }

    /// Rescales a nonzero vector onto the sphere.
    pub fn normalized(mut coords: Vec<f64>) -> Result<Self> {
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if coords.len() < 2 || !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Domain("cannot normalize vector onto the sphere".into()));
        }
        coords.iter_mut().for_each(|c| *c /= norm);
        Ok(Self { coords })
    }

    pub fn circle(theta: f64) -> Self {
        Self {
            coords: vec![theta.cos(), theta.sin()],
        }
    }

    pub fn polar(theta: f64, phi: f64) -> Self {
        let st = theta.sin();
        Self {
            coords: vec![st * phi.cos(), st * phi.sin(), theta.cos()],
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// The `N` of `S^N`.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn last(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    pub fn dot(&self, other: &SpherePoint) -> f64 {
        self.coords.iter().zip(&other.coords).map(|(a, b)| a * b).sum()
    }

    /// Great-circle distance.
    pub fn geodesic(&self, other: &SpherePoint) -> f64 {
        // atan2 form stays accurate for nearby points
        let dot = self.dot(other);
        let cross = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b * dot).powi(2))
            .sum::<f64>()
            .sqrt();
        cross.atan2(dot)
    }
}

/// `S(x) = (2x/(1+|x|²), (|x|²-1)/(1+|x|²))`.
pub fn stereo(x: &[f64]) -> SpherePoint {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let d = 1.0 + r2;
    let mut coords: Vec<f64> = x.iter().map(|v| 2.0 * v / d).collect();
    coords.push((r2 - 1.0) / d);
    SpherePoint { coords }
}

/// Inverse of [`stereo`]; the pole has no preimage.
pub fn inverse_stereo(w: &SpherePoint) -> Result<Vec<f64>> {
    let last = w.last();
    let denom = 1.0 - last;
    if denom <= 0.0 {
        return Err(Error::Domain("the projection pole has no preimage".into()));
    }
    let n = w.dim();
    Ok(w.coords[..n].iter().map(|c| c / denom).collect())
}

/// `(2/(1+|x|²))^{(N-2s)/2}`, i.e. the Jacobian of `S` to the power `1/2*`.
pub fn conformal_factor(x: &[f64], params: &ProblemParams) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (2.0 / (1.0 + r2)).powf(params.weight_exponent())
}

/// Sphere values `V(ω) = u(x)/conformal_factor(x)` with `x = S^{-1}(ω)`.
pub fn pull_to_sphere<F>(u: F, grid: &QuadratureGrid, params: &ProblemParams) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    grid.nodes
        .iter()
        .map(|w| {
            let x = inverse_stereo(w).expect("quadrature nodes avoid the pole");
            u(&x) / conformal_factor(&x, params)
        })
        .collect()
}

/// The 1-D rules a grid is built from.
#[derive(Debug, Clone, PartialEq)]
pub enum GridRule {
    /// `nodes` equispaced angles `2π(j + 1/2)/nodes`.
    Circle { nodes: usize },
    /// Gauss–Legendre in `cosθ` (ascending) times `azimuth` equispaced `φ`.
    GaussAzimuth {
        cos_theta: Vec<f64>,
        ring_weights: Vec<f64>,
        azimuth: usize,
    },
}

impl fmt::Display for GridRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridRule::Circle { nodes } => write!(f, "circle-midpoint[{nodes}]"),
            GridRule::GaussAzimuth { cos_theta, azimuth, .. } => {
                write!(f, "gauss-legendre[{}]x azimuth[{azimuth}]", cos_theta.len())
            }
        }
    }
}

/// Nodes and positive weights on `S^N`; node order is ring-major for `N = 2`.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    n: usize,
    degree_bound: usize,
    nodes: Vec<SpherePoint>,
    weights: Vec<f64>,
    rule: GridRule,
}

/// Grid integrating products of two harmonics of degree `≤ degree_bound`.
pub fn build_quadrature(n: usize, degree_bound: usize) -> Result<QuadratureGrid> {
    if degree_bound < 4 {
        return Err(Error::Domain(format!(
            "degree bound must be at least 4, got {degree_bound}"
        )));
    }
    match n {
        1 => Ok(QuadratureGrid::circle(2 * degree_bound + 1)),
        2 => QuadratureGrid::gauss_product(degree_bound + 1, 2 * degree_bound + 1),
        _ => Err(Error::UnsupportedDimension(n)),
    }
}

impl QuadratureGrid {
    /// Midpoint rule on the circle; odd `nodes` never hits the pole.
    pub fn circle(nodes: usize) -> Self {
        let nodes = nodes.max(1) | 1;
        let w = 2.0 * PI / nodes as f64;
        let points = (0..nodes).map(|j| SpherePoint::circle(w * (j as f64 + 0.5))).collect();
        Self {
            n: 1,
            degree_bound: (nodes - 1) / 2,
            nodes: points,
            weights: vec![w; nodes],
            rule: GridRule::Circle { nodes },
        }
    }

    /// Product rule on `S^2` with arbitrary node counts.
    pub fn gauss_product(polar: usize, azimuth: usize) -> Result<Self> {
        if polar == 0 || azimuth == 0 {
            return Err(Error::Domain("empty quadrature rule".into()));
        }
        let (x, wx) = gauss_legendre(polar);
        let dphi = 2.0 * PI / azimuth as f64;
        let mut nodes = Vec::with_capacity(polar * azimuth);
        let mut weights = Vec::with_capacity(polar * azimuth);
        for (ct, w) in x.iter().zip(&wx) {
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            for j in 0..azimuth {
                let phi = dphi * j as f64;
                nodes.push(SpherePoint {
                    coords: vec![st * phi.cos(), st * phi.sin(), *ct],
                });
                weights.push(w * dphi);
            }
        }
        Ok(Self {
            n: 2,
            degree_bound: (polar - 1).min((azimuth - 1) / 2),
            nodes,
            weights,
            rule: GridRule::GaussAzimuth {
                cos_theta: x,
                ring_weights: wx,
                azimuth,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    pub fn nodes(&self) -> &[SpherePoint] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rule(&self) -> &GridRule {
        &self.rule
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Integrates `f(ω)` over the sphere.
    pub fn integrate_fn<F: Fn(&SpherePoint) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }

    /// Expected total weight `|S^N|`.
    pub fn area(&self) -> f64 {
        sphere_area(self.n)
    }
}

/// Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 * z.abs().max(1e-3) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = 0.0;
    for j in 1..=n {
        let jf = j as f64;
        let p2 = p1;
        p1 = p0;
        p0 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p2) / jf;
    }
    let d = n as f64 * (z * p0 - p1) / (z * z - 1.0);
    (p0, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(n: usize, s: f64) -> ProblemParams {
        ProblemParams::new(n, s).unwrap()
    }

    #[test]
    fn stereo_examples() {
        let south = stereo(&[0.0, 0.0]);
        assert_eq!(south.coords(), &[0.0, 0.0, -1.0]);
        let eq = stereo(&[0.6, 0.8]);
        assert!(eq.last().abs() < 1e-15);
        let back = inverse_stereo(&SpherePoint::new(vec![1.0, 0.0, 0.0]).unwrap()).unwrap();
        assert!(((back[0] * back[0] + back[1] * back[1]).sqrt() - 1.0).abs() < 1e-15);
        assert_eq!(inverse_stereo(&south).unwrap(), vec![0.0, 0.0]);
        assert!(inverse_stereo(&SpherePoint::new(vec![0.0, 0.0, 1.0]).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn stereo_round_trip(x in prop::collection::vec(-50.0f64..50.0, 1..=3)) {
            let w = stereo(&x);
            let norm: f64 = w.coords().iter().map(|c| c * c).sum();
            prop_assert!((norm - 1.0).abs() < 1e-12);
            let back = inverse_stereo(&w).unwrap();
            for (a, b) in back.iter().zip(&x) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()).powi(2));
            }
            let again = stereo(&back);
            for (a, b) in again.coords().iter().zip(w.coords()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conformal_factor_examples() {
        let p31 = params(3, 1.0);
        assert!((conformal_factor(&[0.0; 3], &p31) - 2f64.sqrt()).abs() < 1e-15);
        assert!((conformal_factor(&[1.0, 0.0, 0.0], &p31) - 1.0).abs() < 1e-15);
        assert!(conformal_factor(&[1e12, 0.0, 0.0], &p31) < 1e-11);
    }

    #[test]
    fn total_weights() {
        for d in [4, 7, 16, 33] {
            let g1 = build_quadrature(1, d).unwrap();
            assert!((g1.total_weight() - 2.0 * PI).abs() < 1e-12);
            let g2 = build_quadrature(2, d).unwrap();
            assert!((g2.total_weight() - 4.0 * PI).abs() < 1e-12);
            assert!(g2.weights().iter().all(|w| *w > 0.0));
            assert!(g2.nodes().iter().all(|p| p.last() < 1.0));
            assert!(g1.nodes().iter().all(|p| p.last() < 1.0));
        }
        assert!(matches!(build_quadrature(3, 8), Err(Error::UnsupportedDimension(3))));
        assert!(build_quadrature(2, 3).is_err());
    }

    #[test]
    fn sphere_moment() {
        let g = build_quadrature(2, 4).unwrap();
        let m = g.integrate_fn(|p| {
            let c = p.coords();
            (c[0] * c[1] * c[2]).powi(2)
        });
        assert!((m - 4.0 * PI / 105.0).abs() < 1e-10);
    }

    #[test]
    fn sphere_moment_monte_carlo() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let samples = 400_000;
        let mut acc = 0.0;
        for _ in 0..samples {
            let v: Vec<f64> = (0..3).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
            let p = SpherePoint::normalized(v).unwrap();
            let c = p.coords();
            acc += (c[0] * c[1] * c[2]).powi(2);
        }
        let mc = 4.0 * PI * acc / samples as f64;
        assert!((mc - 4.0 * PI / 105.0).abs() < 0.03 * 4.0 * PI / 105.0);
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (x, w) = gauss_legendre(9);
        for k in 0..=17 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "k={k}");
        }
        let (x, w) = gauss_legendre(2000);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn circle_exactness() {
        let g = build_quadrature(1, 6).unwrap();
        for k in 1..=12 {
            let c = g.integrate_fn(|p| (k as f64 * p.coords()[1].atan2(p.coords()[0])).cos());
            assert!(c.abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn pull_examples() {
        let prm = params(2, 0.5);
        let g = build_quadrature(2, 8).unwrap();
        assert!(pull_to_sphere(|_| 0.0, &g, &prm).iter().all(|v| *v == 0.0));
        let a = pull_to_sphere(|x| x[0].cos(), &g, &prm);
        let b = pull_to_sphere(|x| 3.0 * x[0].cos(), &g, &prm);
        assert!(a.iter().zip(&b).all(|(a, b)| (3.0 * a - b).abs() < 1e-14));
    }

    #[test]
    fn change_of_variables() {
        // ∫_{R^2} |u|^{2*} dx via polar quadrature vs sphere quadrature of the pullback
        let prm = params(2, 0.5);
        let q = prm.two_star();
        let u = |x: &[f64]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            (1.0 - r2).max(0.0).powi(4) * (1.0 + 0.3 * x[0])
        };
        let g = build_quadrature(2, 200).unwrap();
        let vals = pull_to_sphere(u, &g, &prm);
        let sphere: f64 = g.integrate(&vals.iter().map(|v| v.abs().powf(q)).collect::<Vec<_>>());
        let (xr, wr) = gauss_legendre(200);
        let nphi = 64;
        let mut flat = 0.0;
        for (t, wt) in xr.iter().zip(&wr) {
            let r = 0.5 * (t + 1.0);
            for j in 0..nphi {
                let phi = 2.0 * PI * j as f64 / nphi as f64;
                let val = u(&[r * phi.cos(), r * phi.sin()]);
                flat += 0.5 * wt * r * (2.0 * PI / nphi as f64) * val.abs().powf(q);
            }
        }
        assert!(((sphere - flat) / flat).abs() < 1e-6, "sphere={sphere} flat={flat}");
    }

    #[test]
    fn geodesic_distance() {
        let a = SpherePoint::polar(0.0, 0.0);
        let b = SpherePoint::polar(1e-7, 0.3);
        assert!((a.geodesic(&b) - 1e-7).abs() < 1e-20);
        let c = SpherePoint::polar(2.0, 1.0);
        assert!((a.geodesic(&c) - 2.0).abs() < 1e-14);
    }
}
