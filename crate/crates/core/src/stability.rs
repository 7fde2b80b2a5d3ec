//! The stability quotient `‖(-Δ)^s u - u^p‖_{Ḣ^{-s}} / dist(u, 𝓜)` and the
//! third-order expansion along degree-2 directions.

use serde::Serialize;

use crate::constants::{alpha_table, constant_table, mu};
use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::functional::{hs_norm, residual, stationary_value};
use crate::harmonics::SphereField;
use crate::manifold::{bubble_field, dist_to_manifold, BubbleParams, Decomposition};

/// Distances below this make the quotient meaningless.
pub const MIN_DIST: f64 = 1e-9;

/// `U + ε ρ` must keep at least this fraction of `min U` on the grid.
pub const POSITIVITY_MARGIN: f64 = 0.1;

pub const DEFAULT_EPS_LADDER: [f64; 3] = [0.05, 0.025, 0.0125];

#[derive(Debug, Clone, Serialize)]
pub struct QuotientReport {
    pub epsilon: Option<f64>,
    /// Unsquared: `hneg_norm / dist`.
    pub quotient: f64,
    pub hneg_norm: f64,
    pub beta: f64,
    pub dist: f64,
    /// `‖ρ‖_{Ḣs}` of the orthogonal part.
    pub rho_norm: f64,
    /// `α(ℓ)·Σ|ρ_ℓ|²` per degree.
    pub degree_energies: Vec<f64>,
    pub v_total_norm: f64,
    pub bubble: BubbleParams,
}

impl QuotientReport {
    pub fn quotient_sq(&self) -> f64 {
        self.quotient * self.quotient
    }
}

pub fn stability_quotient(v: &SphereField, disc: &Discretization) -> Result<QuotientReport> {
    let dec = dist_to_manifold(v, disc)?;
    quotient_from(v, &dec, disc, None)
}

fn quotient_from(
    v: &SphereField,
    dec: &Decomposition,
    disc: &Discretization,
    epsilon: Option<f64>,
) -> Result<QuotientReport> {
    if dec.dist < MIN_DIST {
        return Err(Error::DegenerateQuotient(dec.dist));
    }
    let params = disc.params();
    let hneg = residual(v, disc).hneg_norm;
    let alpha = alpha_table(disc.lmax(), params);
    let degree_energies = dec
        .orthogonal
        .degree_energies()
        .iter()
        .zip(&alpha)
        .map(|(e, a)| e * a)
        .collect();
    Ok(QuotientReport {
        epsilon,
        quotient: hneg / dec.dist,
        hneg_norm: hneg,
        beta: dec.beta,
        dist: dec.dist,
        rho_norm: hs_norm(&dec.orthogonal, params),
        degree_energies,
        v_total_norm: hs_norm(&dec.v_total, params),
        bubble: dec.bubble.clone(),
    })
}

fn standard_bubble(disc: &Discretization) -> Result<SphereField> {
    bubble_field(&BubbleParams::standard(disc.dim()), disc)
}

fn check_positive(u: &SphereField, rho: &SphereField, eps: f64, disc: &Discretization) -> Result<SphereField> {
    let v = u.axpy(eps, rho);
    let min_u = disc.synthesize(u).into_iter().fold(f64::INFINITY, f64::min);
    let min_v = disc.synthesize(&v).into_iter().fold(f64::INFINITY, f64::min);
    if min_v < POSITIVITY_MARGIN * min_u {
        return Err(Error::ShrinkEpsilon { epsilon: eps });
    }
    Ok(v)
}

/// Quotients of `U[0,1] + ε ρ` for each `ε`.
pub fn quotient_sequence(rho: &SphereField, eps: &[f64], disc: &Discretization) -> Result<Vec<QuotientReport>> {
    let u = standard_bubble(disc)?;
    let rho = rho.with_lmax(disc.lmax());
    eps.iter()
        .map(|&e| {
            let v = check_positive(&u, &rho, e, disc)?;
            let dec = dist_to_manifold(&v, disc)?;
            quotient_from(&v, &dec, disc, Some(e))
        })
        .collect()
}

/// Quotients of `(1 + ε) U[0,1]`.
pub fn beta_sequence(eps: &[f64], disc: &Discretization) -> Result<Vec<QuotientReport>> {
    let u = standard_bubble(disc)?;
    quotient_sequence(&u, eps, disc)
}

/// Value at 0 of the interpolating polynomial through `(xs, ys)`.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "mismatched extrapolation data");
    (0..xs.len())
        .map(|i| {
            let w: f64 = (0..xs.len())
                .filter(|&j| j != i)
                .map(|j| xs[j] / (xs[j] - xs[i]))
                .product();
            w * ys[i]
        })
        .sum()
}

/// `ω₁ω₂ + ω₂ω₃ + ω₃ω₁` on `S²`, a pure degree-2 field.
pub fn symmetric_test_field(disc: &Discretization) -> Result<SphereField> {
    if disc.dim() != 2 {
        return Err(Error::UnsupportedDimension(disc.dim()));
    }
    if disc.lmax() < 2 {
        return Err(Error::Resolution("the test field needs lmax >= 2".into()));
    }
    let values: Vec<f64> = disc
        .grid()
        .nodes()
        .iter()
        .map(|w| {
            let c = w.coords();
            c[0] * c[1] + c[1] * c[2] + c[2] * c[0]
        })
        .collect();
    Ok(disc.analyze(&values))
}

/// `W₀^{p-2} ∫_{S^N} ρ³`, the sphere form of `∫ U^{p-2} ρ³`.
pub fn cubic_moment(rho: &SphereField, disc: &Discretization) -> f64 {
    let p = disc.params().p();
    let vals = disc.synthesize(rho);
    stationary_value(disc.params()).powf(p - 2.0) * disc.integrate(&vals.iter().map(|v| v * v * v).collect::<Vec<_>>())
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpansionSample {
    pub epsilon: f64,
    pub quotient_sq: f64,
    pub dist: f64,
}

/// With `ρ` of unit norm, `dist = ε` and
/// `‖res‖²_{Ḣ^{-s}} = γ² ε² + c₃ ε³ + O(ε⁴)`, i.e. `quotient² = γ² + c₃ ε + …`.
#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    /// `quotient²` extrapolated to `ε = 0`; expected `γ²`.
    pub quadratic_term: f64,
    /// Fitted `c₃`.
    pub cubic_coefficient: f64,
    /// `p(p-1)(μ(2)^{-1} - 1)·moment_integral`.
    pub predicted_cubic: f64,
    /// `W₀^{p-2} ∫ ρ³` for the normalized `ρ`.
    pub moment_integral: f64,
    pub gamma_sq: f64,
    pub samples: Vec<ExpansionSample>,
}

impl ExpansionReport {
    pub fn relative_error(&self) -> f64 {
        ((self.cubic_coefficient - self.predicted_cubic) / self.predicted_cubic).abs()
    }
}

/// `rho` is normalized to unit Ḣs norm first. The `c₃` estimate is the
/// polynomial extrapolation to `ε = 0` of `(quotient² - γ²)/ε` over the ladder.
pub fn expansion_experiment(rho: &SphereField, eps: &[f64], disc: &Discretization) -> Result<ExpansionReport> {
    let params = disc.params();
    if eps.len() < 2 {
        return Err(Error::InvalidParams("expansion needs at least two epsilons".into()));
    }
    let norm = hs_norm(rho, params);
    if norm == 0.0 {
        return Err(Error::InvalidParams("expansion direction is zero".into()));
    }
    let rho = rho.scale(1.0 / norm);
    let gamma = constant_table(params).gamma;
    let reports = quotient_sequence(&rho, eps, disc)?;
    let samples: Vec<ExpansionSample> = reports
        .iter()
        .map(|r| ExpansionSample {
            epsilon: r.epsilon.unwrap_or(0.0),
            quotient_sq: r.quotient_sq(),
            dist: r.dist,
        })
        .collect();
    let xs: Vec<f64> = samples.iter().map(|s| s.dist).collect();
    let q2: Vec<f64> = samples.iter().map(|s| s.quotient_sq).collect();
    let slopes: Vec<f64> = xs.iter().zip(&q2).map(|(x, q)| (q - gamma * gamma) / x).collect();
    let p = params.p();
    let moment = cubic_moment(&rho.with_lmax(disc.lmax()), disc);
    Ok(ExpansionReport {
        quadratic_term: extrapolate_to_zero(&xs, &q2),
        cubic_coefficient: extrapolate_to_zero(&xs, &slopes),
        predicted_cubic: p * (p - 1.0) * (1.0 / mu(2, params) - 1.0) * moment,
        moment_integral: moment,
        gamma_sq: gamma * gamma,
        samples,
    })
}
