//! Norms, energies, residuals and the coercivity form, all on the sphere.
//!
//! Under the pullback `v = (V∘S)·(2/(1+|x|²))^{(N-2s)/2}` every integral
//! used here is conformally invariant, so `‖v‖²_{Ḣs} = ⟨V, A_s V⟩`,
//! `∫|v|^{2*} = ∫_{S^N}|V|^{2*}`, and the residual `(-Δ)^s v - v^p` pulls
//! back to `A_s V - V^p` with the dual weight.

use serde::Serialize;

use crate::constants::{alpha_table, sobolev_constant, ProblemParams};
use crate::discretization::Discretization;
use crate::error::Result;
use crate::harmonics::{apply_as, SphereField};
use crate::sphere::{gauss_legendre, QuadratureGrid};

/// Grid values at or below this make the dissipation integral unavailable.
pub const POSITIVITY_FLOOR: f64 = 1e-10;

/// `|x|^{p-1} x`.
pub fn signed_pow(x: f64, p: f64) -> f64 {
    x.abs().powf(p).copysign(x)
}

/// The constant `W₀ = α(0)^{1/(p-1)}` solving `α(0) W = W^p`.
pub fn stationary_value(params: &ProblemParams) -> f64 {
    (crate::constants::log_alpha(0, params) / (params.p() - 1.0)).exp()
}

/// `⟨a, A_s b⟩`.
pub fn hs_inner(a: &SphereField, b: &SphereField, params: &ProblemParams) -> f64 {
    weighted_inner(a, b, params, false)
}

pub fn hs_norm_sq(v: &SphereField, params: &ProblemParams) -> f64 {
    hs_inner(v, v, params)
}

pub fn hs_norm(v: &SphereField, params: &ProblemParams) -> f64 {
    hs_norm_sq(v, params).sqrt()
}

/// `⟨a, A_s^{-1} b⟩`.
pub fn hneg_inner(a: &SphereField, b: &SphereField, params: &ProblemParams) -> f64 {
    weighted_inner(a, b, params, true)
}

pub fn hneg_norm(f: &SphereField, params: &ProblemParams) -> f64 {
    hneg_inner(f, f, params).sqrt()
}

fn weighted_inner(a: &SphereField, b: &SphereField, params: &ProblemParams, inverse: bool) -> f64 {
    assert_eq!(a.dim(), b.dim(), "fields on different spheres");
    let lmax = a.lmax().min(b.lmax());
    let table = alpha_table(lmax, params);
    (0..=lmax)
        .map(|l| {
            let w = if inverse { 1.0 / table[l] } else { table[l] };
            w * a.degree(l).iter().zip(b.degree(l)).map(|(x, y)| x * y).sum::<f64>()
        })
        .sum()
}

/// `Σ w |v|^q` over grid values.
pub fn lp_integral(values: &[f64], q: f64, grid: &QuadratureGrid) -> f64 {
    grid.weights()
        .iter()
        .zip(values)
        .map(|(w, v)| w * v.abs().powf(q))
        .sum()
}

pub fn lp_norm_values(values: &[f64], q: f64, grid: &QuadratureGrid) -> f64 {
    lp_integral(values, q, grid).powf(1.0 / q)
}

/// `L^q(S^N)` norm of the synthesized field on the discretization grid.
pub fn lp_norm(v: &SphereField, q: f64, disc: &Discretization) -> f64 {
    lp_norm_values(&disc.synthesize(v), q, disc.grid())
}

/// `J(V) = ½‖V‖²_{Ḣs} - (1/2*) ∫|V|^{2*}`.
pub fn j_functional(v: &SphereField, disc: &Discretization) -> f64 {
    let params = disc.params();
    let q = params.two_star();
    0.5 * hs_norm_sq(v, params) - lp_integral(&disc.synthesize(v), q, disc.grid()) / q
}

/// `J` on the bubble manifold: `S^{N/2s} (1/2 - 1/2*)`.
pub fn j_bubble(params: &ProblemParams) -> f64 {
    let energy = sobolev_constant(params).powf(params.n() as f64 / (2.0 * params.s()));
    energy * (0.5 - 1.0 / params.two_star())
}

/// `J(V) - J(W₀)`, evaluated around `W₀` so small gaps keep their digits.
pub fn j_gap(v: &SphereField, disc: &Discretization) -> f64 {
    let params = disc.params();
    let q = params.two_star();
    let w0 = stationary_value(params);
    let base = disc.constant_field(w0).with_lmax(v.lmax());
    let h = v - &base;
    let quadratic = hs_inner(&base, &h, params) + 0.5 * hs_norm_sq(&h, params);
    let w0q = w0.powf(q);
    let hv = disc.synthesize(&h);
    let nonlinear: f64 = disc
        .grid()
        .weights()
        .iter()
        .zip(&hv)
        .map(|(w, h)| {
            let r = h / w0;
            let d = if r > -1.0 {
                w0q * (q * r.ln_1p()).exp_m1()
            } else {
                (w0 + h).abs().powf(q) - w0q
            };
            w * d
        })
        .sum();
    quadratic - nonlinear / q
}

/// The pieces of `(-Δ)^s u - u^p` used throughout.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    /// `A_s V - P_L(|V|^{p-1}V)`.
    pub residual_field: SphereField,
    /// `‖·‖_{Ḣ^{-s}}` of `residual_field`.
    pub hneg_norm: f64,
    /// `L^{(2*)'}` norm of the pointwise residual on the grid.
    pub delta_norm: f64,
    /// `(1/p) ∫ G²/V^{p-1}`, absent when `V` reaches the positivity floor.
    pub dissipation: Option<f64>,
    /// `∫|V|^{2*}`.
    pub mass: f64,
    pub min_value: f64,
}

pub fn residual(v: &SphereField, disc: &Discretization) -> ResidualReport {
    let params = disc.params();
    let p = params.p();
    let grid = disc.grid();
    let v = v.with_lmax(disc.lmax());
    let vals = disc.synthesize(&v);
    let pow_vals: Vec<f64> = vals.iter().map(|x| signed_pow(*x, p)).collect();
    let av = apply_as(&v, params);
    let av_vals = disc.synthesize(&av);
    let g: Vec<f64> = av_vals.iter().zip(&pow_vals).map(|(a, b)| a - b).collect();
    let residual_field = &av - &disc.analyze(&pow_vals);
    let min_value = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let dissipation = (min_value > POSITIVITY_FLOOR).then(|| {
        let s: f64 = grid
            .weights()
            .iter()
            .zip(g.iter().zip(&vals))
            .map(|(w, (g, v))| w * g * g / v.powf(p - 1.0))
            .sum();
        s / p
    });
    ResidualReport {
        hneg_norm: hneg_norm(&residual_field, params),
        residual_field,
        delta_norm: lp_norm_values(&g, params.two_star_dual(), grid),
        dissipation,
        mass: lp_integral(&vals, params.two_star(), grid),
        min_value,
    }
}

/// `[v, w] = Σ_ℓ (α(ℓ) - α(1)) ⟨v_ℓ, w_ℓ⟩`.
pub fn coercivity_form(v: &SphereField, w: &SphereField, params: &ProblemParams) -> f64 {
    let lmax = v.lmax().min(w.lmax());
    let table = alpha_table(lmax.max(1), params);
    (0..=lmax)
        .map(|l| (table[l] - table[1]) * v.degree(l).iter().zip(w.degree(l)).map(|(a, b)| a * b).sum::<f64>())
        .sum()
}

/// `p ∫ U^{p-1} v²` by quadrature: `p W₀^{p-1} ∫_{S^N} V²`.
pub fn potential_term(v: &SphereField, disc: &Discretization) -> f64 {
    let params = disc.params();
    let p = params.p();
    let w0 = stationary_value(params);
    let vals = disc.synthesize(v);
    p * w0.powf(p - 1.0) * disc.integrate(&vals.iter().map(|x| x * x).collect::<Vec<_>>())
}

/// Sup norm, `L^{2*}` norm and `sup / ‖·‖^{2/(N+2-2s)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterpReport {
    pub sup_norm: f64,
    pub lp_norm: f64,
    pub ratio: f64,
}

impl InterpReport {
    /// The zero function reports ratio 0.
    pub fn new(sup_norm: f64, lp_norm: f64, params: &ProblemParams) -> Self {
        let exponent = 2.0 / (params.n() as f64 + 2.0 - 2.0 * params.s());
        let ratio = if sup_norm == 0.0 {
            0.0
        } else {
            sup_norm / lp_norm.powf(exponent)
        };
        Self {
            sup_norm,
            lp_norm,
            ratio,
        }
    }
}

pub fn interp_check(v: &SphereField, disc: &Discretization) -> InterpReport {
    interp_check_values(&disc.synthesize(v), disc.grid(), disc.params())
}

pub fn interp_check_values(values: &[f64], grid: &QuadratureGrid, params: &ProblemParams) -> InterpReport {
    let sup_norm = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    InterpReport::new(sup_norm, lp_norm_values(values, params.two_star(), grid), params)
}

/// One member of the cap family `(δ - 2M·dist(·, ω₀))₊`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapRow {
    pub delta: f64,
    pub report: InterpReport,
    /// Same ratio from the flat small-cap closed form.
    pub flat_ratio: f64,
}

/// Cap bumps on `S^N` (`N ≥ 1`). The bumps are radial about their centre,
/// so the `L^{2*}` integral reduces to `|S^{N-1}| ∫ f(r)^{2*} sin^{N-1} r dr`
/// over the support, done with `radial_nodes` Gauss–Legendre points.
pub fn cap_family(params: &ProblemParams, deltas: &[f64], lipschitz: f64, radial_nodes: usize) -> Result<Vec<CapRow>> {
    if !(lipschitz > 0.0) || deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(crate::error::Error::InvalidParams(
            "cap family needs positive deltas and Lipschitz bound".into(),
        ));
    }
    let n = params.n();
    let q = params.two_star();
    let exponent = 2.0 / (n as f64 + 2.0 - 2.0 * params.s());
    let shell = if n == 1 {
        2.0
    } else {
        crate::constants::sphere_area(n - 1)
    };
    let (x, w) = gauss_legendre(radial_nodes.max(2));
    Ok(deltas
        .iter()
        .map(|&delta| {
            let r_max = (delta / (2.0 * lipschitz)).min(std::f64::consts::PI);
            let integral: f64 = x
                .iter()
                .zip(&w)
                .map(|(x, w)| {
                    let r = 0.5 * r_max * (x + 1.0);
                    let f = (delta - 2.0 * lipschitz * r).max(0.0);
                    0.5 * r_max * w * f.powf(q) * r.sin().powi(n as i32 - 1)
                })
                .sum();
            let report = InterpReport::new(delta, (shell * integral).powf(1.0 / q), params);
            // |S^{N-1}| ∫_0^{δ/2M} (δ - 2M r)^q r^{N-1} dr
            let flat = shell * delta.powf(q + n as f64) * beta_int(n, q) / (2.0 * lipschitz).powi(n as i32);
            CapRow {
                delta,
                report,
                flat_ratio: delta / flat.powf(exponent / q),
            }
        })
        .collect())
}

/// `∫_0^1 (1-u)^q u^{N-1} du = Γ(q+1)Γ(N)/Γ(q+N+1)`.
fn beta_int(n: usize, q: f64) -> f64 {
    (0..n).map(|k| if k == 0 { 1.0 } else { k as f64 }).product::<f64>()
        / (1..=n).map(|k| q + k as f64).product::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{alpha, constant_table};
    use crate::harmonics::{apply_as_inv, DegreeProjector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn disc(n: usize, s: f64, lmax: usize) -> Discretization {
        Discretization::new(ProblemParams::new(n, s).unwrap(), lmax).unwrap()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn norm_examples() {
        let d = disc(2, 0.5, 6);
        let p = *d.params();
        let z = d.zero_field();
        assert_eq!(hs_norm_sq(&z, &p), 0.0);
        assert_eq!(hneg_norm(&z, &p), 0.0);
        for l in 0..=6 {
            let mut f = d.zero_field();
            f.degree_mut(l)[0] = 1.0;
            assert!((hs_norm_sq(&f, &p) - alpha(l, &p)).abs() < 1e-13);
            assert!((hneg_norm(&f, &p) - alpha(l, &p).powf(-0.5)).abs() < 1e-13);
        }
        let g = SphereField::random(2, 6, &DegreeProjector::range(0, 6), &mut rng(1)).unwrap();
        let ag = apply_as(&g, &p);
        assert!((hneg_norm(&ag, &p).powi(2) - hs_norm_sq(&g, &p)).abs() < 1e-10);
        let c = d.constant_field(1.5);
        assert!((lp_norm(&c, 2.0, &d) - 1.5 * (4.0 * PI).sqrt()).abs() < 1e-12);
        let l1 = lp_norm(&g, 1.0, &d);
        assert!(l1 <= lp_norm(&g, 2.0, &d) * (4.0 * PI).sqrt());
    }

    #[test]
    fn bubble_energy_matches_flat_quadrature() {
        // brute force on R²: ∫ U^{2*} = ∫ 2π r (1+r²)^{-2} dr = π for N=2, s=1/2
        let params = ProblemParams::new(2, 0.5).unwrap();
        let c = crate::constants::bubble_amplitude(&params);
        let (x, w) = crate::sphere::gauss_legendre(400);
        // r = tan(t), t ∈ (0, π/2)
        let flat: f64 = x
            .iter()
            .zip(&w)
            .map(|(x, w)| {
                let t = PI / 4.0 * (x + 1.0);
                let r = t.tan();
                let u = c / (1.0 + r * r).sqrt();
                PI / 4.0 * w * 2.0 * PI * r * u.powi(4) / t.cos().powi(2)
            })
            .sum();
        let d = disc(2, 0.5, 4);
        let u = d.constant_field(stationary_value(&params));
        let s = crate::constants::sobolev_constant(&params);
        assert!((flat / s.powi(2) - 1.0).abs() < 1e-10);
        assert!((hs_norm_sq(&u, &params) / flat - 1.0).abs() < 1e-12);
        let lp = lp_norm(&u, params.two_star(), &d);
        assert!((lp / s.powf(2.0 / (2.0 * 0.5 * params.two_star())) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn j_examples() {
        for (n, s) in [(2, 0.5), (2, 0.25), (1, 0.3)] {
            let d = disc(n, s, 6);
            let p = *d.params();
            assert_eq!(j_functional(&d.zero_field(), &d), 0.0);
            let u = d.constant_field(stationary_value(&p));
            assert!((j_functional(&u, &d) / j_bubble(&p) - 1.0).abs() < 1e-12);
            assert!(j_gap(&u, &d).abs() < 1e-15);
            let f = SphereField::random(n, 6, &DegreeProjector::range(0, 6), &mut rng(4)).unwrap();
            let t = 0.7;
            let q = p.two_star();
            let hs = hs_norm_sq(&f, &p);
            let lpq = lp_integral(&d.synthesize(&f), q, d.grid());
            let direct = j_functional(&f.scale(t), &d);
            assert!((direct - (t * t * hs / 2.0 - t.powf(q) * lpq / q)).abs() < 1e-12 * hs);
            // gap agrees with the plain difference where no cancellation bites
            let v = u.axpy(0.05, &f);
            let plain = j_functional(&v, &d) - j_functional(&u, &d);
            assert!((j_gap(&v, &d) - plain).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_vanishes_on_stationary() {
        for s in [0.25, 0.5, 0.75] {
            let d = disc(2, s, 8);
            let u = d.constant_field(stationary_value(d.params()));
            let r = residual(&u, &d);
            assert!(r.hneg_norm <= 1e-12 * hs_norm(&u, d.params()));
            assert!(r.dissipation.unwrap() < 1e-24);
        }
    }

    #[test]
    fn residual_homogeneity() {
        let d = disc(2, 0.5, 8);
        let p = *d.params();
        let u = d.constant_field(stationary_value(&p));
        let r = residual(&u.scale(2.0), &d);
        let up = d.analyze(&d.synthesize(&u).iter().map(|x| x.powf(p.p())).collect::<Vec<_>>());
        let want = (2f64.powf(p.p()) - 2.0) * hneg_norm(&up, &p);
        assert!((r.hneg_norm / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duality_and_dissipation_bounds() {
        for (n, s) in [(2, 0.5), (2, 0.3), (1, 0.2)] {
            let d = disc(n, s, 6);
            let p = *d.params();
            let sob = crate::constants::sobolev_constant(&p);
            let u = d.constant_field(stationary_value(&p));
            let mut r = rng(7);
            for _ in 0..100 {
                let f = SphereField::random(n, 6, &DegreeProjector::range(0, 6), &mut r).unwrap();
                let v = u.axpy(0.02, &f);
                let rep = residual(&v, &d);
                assert!(rep.hneg_norm <= sob.powf(-0.5) * rep.delta_norm + 1e-8);
                let bound = rep.delta_norm.powi(2) * rep.mass.powf(-2.0 * p.s() / n as f64) / p.p();
                assert!(rep.dissipation.unwrap() >= bound - 1e-8);
                assert!(rep.hneg_norm > 1e-6);
            }
        }
    }

    #[test]
    fn coercivity_examples() {
        let d = disc(2, 0.5, 10);
        let p = *d.params();
        let t = constant_table(&p);
        let mut r = rng(2);
        let deg1 = SphereField::random(2, 10, &DegreeProjector::new([1]), &mut r).unwrap();
        assert!(coercivity_form(&deg1, &deg1, &p).abs() < 1e-15);
        for (deg, want) in [(2, t.gamma), (3, t.gamma_plus)] {
            let f = SphereField::random(2, 10, &DegreeProjector::new([deg]), &mut r).unwrap();
            let f = f.scale(1.0 / hs_norm(&f, &p));
            assert!((coercivity_form(&f, &f, &p) - want).abs() < 1e-12);
        }
        for _ in 0..50 {
            let f = SphereField::random(2, 10, &DegreeProjector::range(2, 10), &mut r).unwrap();
            assert!(coercivity_form(&f, &f, &p) >= t.gamma * hs_norm_sq(&f, &p) - 1e-10);
            // same form from ‖v‖² - p∫U^{p-1}v²
            let quad = hs_norm_sq(&f, &p) - potential_term(&f, &d);
            assert!((quad - coercivity_form(&f, &f, &p)).abs() < 1e-9 * hs_norm_sq(&f, &p));
        }
    }

    #[test]
    fn sobolev_inequality_on_random_fields() {
        for (n, s) in [(2, 0.5), (2, 0.7), (1, 0.25)] {
            let d = disc(n, s, 6);
            let p = *d.params();
            let sob = crate::constants::sobolev_constant(&p);
            let mut r = rng(21);
            for _ in 0..200 {
                let f = SphereField::random(n, 6, &DegreeProjector::range(0, 6), &mut r).unwrap();
                let lp = lp_norm(&f, p.two_star(), &d);
                assert!(hs_norm_sq(&f, &p) >= sob * lp * lp - 1e-6);
            }
            let u = d.constant_field(stationary_value(&p));
            let lp = lp_norm(&u, p.two_star(), &d);
            assert!((hs_norm_sq(&u, &p) / (sob * lp * lp) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hneg_of_as_inverse() {
        let p = ProblemParams::new(2, 0.4).unwrap();
        let f = SphereField::random(2, 5, &DegreeProjector::range(0, 5), &mut rng(8)).unwrap();
        let g = apply_as_inv(&f, &p);
        assert!((hs_norm_sq(&g, &p) - hneg_norm(&f, &p).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn interp_zero_and_scaling() {
        let d = disc(2, 0.5, 6);
        assert_eq!(interp_check(&d.zero_field(), &d).ratio, 0.0);
        let f = SphereField::random(2, 6, &DegreeProjector::range(0, 6), &mut rng(3)).unwrap();
        let r1 = interp_check(&f, &d).ratio;
        let r2 = interp_check(&f.scale(0.5), &d).ratio;
        let e = 1.0 - 2.0 / 3.0;
        assert!((r2 / r1 - 0.5f64.powf(e)).abs() < 1e-12);
    }

    #[test]
    fn cap_family_is_bounded() {
        let p = ProblemParams::new(2, 0.5).unwrap();
        let rows = cap_family(&p, &[0.1, 0.05, 0.01], 1.0, 200).unwrap();
        let flat = rows[0].flat_ratio;
        for r in &rows {
            // on S² the flat ratio does not depend on δ
            assert!((r.flat_ratio / flat - 1.0).abs() < 1e-12);
            assert!((r.report.ratio / flat - 1.0).abs() < 1e-3, "{r:?}");
        }
        // against a brute-force product grid around the pole
        let grid = QuadratureGrid::gauss_product(3000, 1).unwrap();
        let pole = crate::sphere::SpherePoint::polar(0.0, 0.0);
        let values: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|w| (0.1 - 2.0 * w.geodesic(&pole)).max(0.0))
            .collect();
        let brute = lp_norm_values(&values, p.two_star(), &grid);
        assert!((brute / rows[0].report.lp_norm - 1.0).abs() < 1e-3);
    }

    #[test]
    fn cap_family_beta_integral() {
        // q = 2, N = 2: ∫(1-u)² u du = 1/12
        assert!((beta_int(2, 2.0) - 1.0 / 12.0).abs() < 1e-15);
        assert!((beta_int(1, 3.0) - 0.25).abs() < 1e-15);
        assert!((beta_int(3, 1.0) - 2.0 / 24.0).abs() < 1e-15);
    }
}
