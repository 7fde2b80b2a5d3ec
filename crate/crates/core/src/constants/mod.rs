//! Closed-form constants, Funk–Hecke eigenvalues and the κ-chain.

mod gamma;

pub(crate) use gamma::ln_gamma_pos;
pub use gamma::log_gamma;

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension `N`, order `s` and the exponents derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ProblemParams {
    n: usize,
    s: f64,
    p: f64,
    m: f64,
    two_star: f64,
    two_star_dual: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    n: usize,
    s: f64,
}

impl TryFrom<RawParams> for ProblemParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        ProblemParams::new(raw.n, raw.s)
    }
}

impl From<ProblemParams> for RawParams {
    fn from(p: ProblemParams) -> Self {
        RawParams { n: p.n, s: p.s }
    }
}

impl ProblemParams {
    pub fn new(n: usize, s: f64) -> Result<Self> {
        if n == 0 || !s.is_finite() || s <= 0.0 || 2.0 * s >= n as f64 {
            return Err(Error::InvalidParams(format!("require 0 < 2s < N (got N={n}, s={s})")));
        }
        let nf = n as f64;
        let p = (nf + 2.0 * s) / (nf - 2.0 * s);
        Ok(Self {
            n,
            s,
            p,
            m: (nf - 2.0 * s) / (nf + 2.0 * s),
            two_star: 2.0 * nf / (nf - 2.0 * s),
            two_star_dual: 2.0 * nf / (nf + 2.0 * s),
        })
    }

    /// Parameters admissible for the fast-diffusion flow (`s < 1` as well).
    pub fn for_flow(n: usize, s: f64) -> Result<Self> {
        let params = Self::new(n, s)?;
        params.require_flow()?;
        Ok(params)
    }

    pub fn require_flow(&self) -> Result<()> {
        if self.s >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "the flow requires s < 1 (got s={})",
                self.s
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn two_star(&self) -> f64 {
        self.two_star
    }

    pub fn two_star_dual(&self) -> f64 {
        self.two_star_dual
    }

    /// `(N - 2s)/2`, the homogeneity of a bubble and of the conformal weight.
    pub fn weight_exponent(&self) -> f64 {
        (self.n as f64 - 2.0 * self.s) / 2.0
    }

    fn half_n(&self) -> f64 {
        self.n as f64 / 2.0
    }
}

/// Every closed-form constant attached to `(N, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantTable {
    pub sobolev: f64,
    pub bubble_amp: f64,
    pub gamma: f64,
    pub gamma_plus: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub kappa_fde: f64,
}

/// `|S^N|`, the surface measure of the unit sphere in `R^{N+1}`.
pub fn sphere_area(n: usize) -> f64 {
    let a = (n as f64 + 1.0) / 2.0;
    2.0 * (a * PI.ln() - ln_gamma_pos(a)).exp()
}

/// Sharp constant `S_{N,s}` of `‖u‖²_{Ḣ^s} ≥ S ‖u‖²_{L^{2*}}`.
pub fn sobolev_constant(params: &ProblemParams) -> f64 {
    let (n, s) = (params.n as f64, params.s);
    let log = 2.0 * s * LN_2 + s * PI.ln() + ln_gamma_pos((n + 2.0 * s) / 2.0) - ln_gamma_pos((n - 2.0 * s) / 2.0)
        + (2.0 * s / n) * (ln_gamma_pos(n / 2.0) - ln_gamma_pos(n));
    log.exp()
}

/// Amplitude `c_{N,s}` making `c (λ/(1+λ²|x-z|²))^{(N-2s)/2}` solve
/// `(-Δ)^s U = U^p`:
/// `c = 2^{(N-2s)/2} (Γ((N+2s)/2)/Γ((N-2s)/2))^{(N-2s)/(4s)}`.
pub fn bubble_amplitude(params: &ProblemParams) -> f64 {
    let a = params.weight_exponent();
    (a * LN_2 + log_alpha0(params) / (params.p - 1.0)).exp()
}

fn log_alpha0(params: &ProblemParams) -> f64 {
    ln_gamma_pos(params.half_n() + params.s) - ln_gamma_pos(params.half_n() - params.s)
}

/// `α(k+1)/α(k) = (k + N/2 + s)/(k + N/2 - s)`.
fn alpha_step(k: usize, params: &ProblemParams) -> f64 {
    let base = k as f64 + params.half_n();
    (base + params.s) / (base - params.s)
}

/// Eigenvalue `α(k) = Γ(k+N/2+s)/Γ(k+N/2-s)` of `A_s` on degree-`k` harmonics.
///
/// `α(0)` comes from log-gamma; higher degrees use the exact rational step
/// `α(k+1)/α(k)` so that ratios such as `α(1)/α(2)` are exact to rounding.
pub fn alpha(k: usize, params: &ProblemParams) -> f64 {
    let mut value = log_alpha0(params).exp();
    for j in 0..k {
        value *= alpha_step(j, params);
    }
    value
}

/// All of `α(0..=lmax)` in one pass.
pub fn alpha_table(lmax: usize, params: &ProblemParams) -> Vec<f64> {
    let mut out = Vec::with_capacity(lmax + 1);
    let mut value = log_alpha0(params).exp();
    for k in 0..=lmax {
        out.push(value);
        value *= alpha_step(k, params);
    }
    out
}

/// `ln α(k)`, for degrees where `α(k)` itself could overflow.
pub fn log_alpha(k: usize, params: &ProblemParams) -> f64 {
    let base = k as f64 + params.half_n();
    ln_gamma_pos(base + params.s) - ln_gamma_pos(base - params.s)
}

/// `μ(k) = α(k)/α(1)`, the eigenvalues of the linearized operator.
pub fn mu(k: usize, params: &ProblemParams) -> f64 {
    match k {
        0 => 1.0 / alpha_step(0, params),
        _ => (1..k).map(|j| alpha_step(j, params)).product(),
    }
}

pub fn constant_table(params: &ProblemParams) -> ConstantTable {
    let gamma = 1.0 - alpha(1, params) / alpha(2, params);
    let gamma_plus = 1.0 - alpha(1, params) / alpha(3, params);
    let kappa1 = 1.0 / (gamma * gamma);
    let kappa2 = 1.0 / (2.0 * kappa1 * params.p);
    let kappa3 = 2.0 * kappa2 / (params.n as f64 + 2.0 - 2.0 * params.s);
    let kappa_fde = gamma * gamma / ((params.n as f64 + 2.0 - 2.0 * params.s) * (params.p - 1.0));
    ConstantTable {
        sobolev: sobolev_constant(params),
        bubble_amp: bubble_amplitude(params),
        gamma,
        gamma_plus,
        kappa1,
        kappa2,
        kappa3,
        kappa_fde,
    }
}

/// One named identity among the constants and whether it holds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_error: f64,
    pub pass: bool,
}

/// Cross-identities between the table and the spectral data, at `tol`.
pub fn identity_checks(params: &ProblemParams, tol: f64) -> Vec<IdentityCheck> {
    let t = constant_table(params);
    let (n, s, p) = (params.n as f64, params.s, params.p);
    let mk = |name, lhs: f64, rhs: f64| {
        let rel_error = ((lhs - rhs) / rhs).abs();
        IdentityCheck {
            name,
            lhs,
            rhs,
            rel_error,
            pass: rel_error <= tol,
        }
    };
    vec![
        mk("mu0_is_inverse_p", mu(0, params), 1.0 / p),
        mk("gamma_closed_form", t.gamma, 4.0 * s / (n + 2.0 * s + 2.0)),
        mk(
            "gamma_plus_above_gamma",
            f64::from(u8::from(t.gamma_plus > t.gamma)),
            1.0,
        ),
        mk("kappa1_inverse_square", t.kappa1 * t.gamma * t.gamma, 1.0),
        mk("kappa3_translation", p / (p - 1.0) * t.kappa3, t.kappa_fde),
        mk("mu2_rate", mu(2, params) - 1.0, 4.0 * s / (n - 2.0 * s + 2.0)),
        mk("mu2_rate_from_gamma", mu(2, params) - 1.0, t.gamma / (1.0 - t.gamma)),
    ]
}
