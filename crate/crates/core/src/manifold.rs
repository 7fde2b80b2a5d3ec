//! Bubbles `U[z, λ]`, their tangent fields, the distance to the bubble
//! manifold and the `β U + v + ρ` decomposition.
//!
//! On the sphere the pulled-back bubble has the closed form
//! `V(ω) = c (λ/D)^a`, `a = (N-2s)/2`, with
//! `D = (1-t) + λ²((1+t) - 2 ω'·z + |z|²(1-t))`, `t = ω_{N+1}`,
//! which stays smooth through the projection pole.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constants::{bubble_amplitude, ProblemParams};
use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::functional::{hs_inner, hs_norm, hs_norm_sq};
use crate::harmonics::SphereField;
use crate::optimize::{minimize, NelderMeadOptions};
use crate::sphere::SpherePoint;

/// Largest tail fraction a pulled-back bubble may lose to truncation.
pub const MAX_TAIL_FRACTION: f64 = 1e-4;

/// `dist ≥ (1 - FAR_MARGIN)·‖U‖` marks a field as far from the manifold.
pub const FAR_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    pub z: Vec<f64>,
    pub lambda: f64,
}

impl BubbleParams {
    pub fn new(z: Vec<f64>, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) || z.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "bubble needs finite z and lambda > 0 (got z={z:?}, lambda={lambda})"
            )));
        }
        Ok(Self { z, lambda })
    }

    /// `(0, 1)` in `R^n`.
    pub fn standard(n: usize) -> Self {
        Self {
            z: vec![0.0; n],
            lambda: 1.0,
        }
    }

    /// `(z, ln λ)`, the optimizer's coordinates.
    pub fn to_theta(&self) -> Vec<f64> {
        let mut t = self.z.clone();
        t.push(self.lambda.ln());
        t
    }

    pub fn from_theta(theta: &[f64]) -> Self {
        let n = theta.len() - 1;
        Self {
            z: theta[..n].to_vec(),
            lambda: theta[n].exp(),
        }
    }
}

/// `c (λ/(1+λ²|x-z|²))^{(N-2s)/2}`.
pub fn bubble_eval(b: &BubbleParams, x: &[f64], params: &ProblemParams) -> f64 {
    let r2: f64 = x.iter().zip(&b.z).map(|(x, z)| (x - z).powi(2)).sum();
    bubble_amplitude(params) * (b.lambda / (1.0 + b.lambda * b.lambda * r2)).powf(params.weight_exponent())
}

fn sphere_denominator(b: &BubbleParams, w: &SpherePoint) -> f64 {
    let n = w.dim();
    let t = w.last();
    let zw: f64 = w.coords()[..n].iter().zip(&b.z).map(|(w, z)| w * z).sum();
    let z2: f64 = b.z.iter().map(|z| z * z).sum();
    (1.0 - t) + b.lambda * b.lambda * ((1.0 + t) - 2.0 * zw + z2 * (1.0 - t))
}

/// Pulled-back bubble at a sphere point.
pub fn bubble_sphere_value(b: &BubbleParams, w: &SpherePoint, params: &ProblemParams) -> f64 {
    bubble_amplitude(params) * (b.lambda / sphere_denominator(b, w)).powf(params.weight_exponent())
}

/// Value, `λ∂_λ` and `∂_{z_i}` of the pulled-back bubble at `w`.
fn sphere_value_and_derivatives(b: &BubbleParams, w: &SpherePoint, c: f64, a: f64) -> (f64, f64, Vec<f64>) {
    let n = w.dim();
    let t = w.last();
    let d = sphere_denominator(b, w);
    let v = c * (b.lambda / d).powf(a);
    let l2 = b.lambda * b.lambda;
    // λ ∂_λ ln D = 2λ²(...)/D = 2 (D - (1-t))/D
    let log_lambda = a - a * 2.0 * (d - (1.0 - t)) / d;
    let dz = (0..n)
        .map(|i| -a * l2 * (-2.0 * w.coords()[i] + 2.0 * b.z[i] * (1.0 - t)) / d * v)
        .collect();
    (v, log_lambda * v, dz)
}

fn checked(values: &[f64], field: SphereField, disc: &Discretization, what: &str) -> Result<SphereField> {
    let tail = disc.tail_fraction(values, &field);
    if tail > MAX_TAIL_FRACTION {
        return Err(Error::Resolution(format!(
            "{what}: tail energy fraction {tail:.3e} above {MAX_TAIL_FRACTION:e} at lmax {}",
            disc.lmax()
        )));
    }
    Ok(field)
}

fn check_dims(b: &BubbleParams, disc: &Discretization) -> Result<()> {
    if b.z.len() != disc.dim() {
        return Err(Error::InvalidParams(format!(
            "bubble centre has {} coordinates on S^{}",
            b.z.len(),
            disc.dim()
        )));
    }
    Ok(())
}

fn bubble_field_unchecked(b: &BubbleParams, disc: &Discretization) -> (Vec<f64>, SphereField) {
    let params = disc.params();
    let values: Vec<f64> = disc
        .grid()
        .nodes()
        .iter()
        .map(|w| bubble_sphere_value(b, w, params))
        .collect();
    let field = disc.analyze(&values);
    (values, field)
}

/// The pulled-back bubble analyzed to `lmax`.
pub fn bubble_field(b: &BubbleParams, disc: &Discretization) -> Result<SphereField> {
    check_dims(b, disc)?;
    let (values, field) = bubble_field_unchecked(b, disc);
    checked(&values, field, disc, "bubble")
}

/// `[U, λ∂_λU, ∂_{z_1}U, …]`, all in sphere form.
fn log_tangents(b: &BubbleParams, disc: &Discretization) -> Result<Vec<SphereField>> {
    check_dims(b, disc)?;
    let params = disc.params();
    let c = bubble_amplitude(params);
    let a = params.weight_exponent();
    let n = disc.dim();
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(disc.grid().len()); n + 2];
    for w in disc.grid().nodes() {
        let (v, dl, dz) = sphere_value_and_derivatives(b, w, c, a);
        cols[0].push(v);
        cols[1].push(dl);
        for i in 0..n {
            cols[2 + i].push(dz[i]);
        }
    }
    let mut out = Vec::with_capacity(n + 2);
    for (k, values) in cols.iter().enumerate() {
        let field = disc.analyze(values);
        out.push(if k == 0 {
            checked(values, field, disc, "bubble")?
        } else {
            field
        });
    }
    Ok(out)
}

/// `[U, ∂_λU, ∂_{z_1}U, …, ∂_{z_N}U]` (N + 2 fields).
pub fn tangent_fields(b: &BubbleParams, disc: &Discretization) -> Result<Vec<SphereField>> {
    let mut t = log_tangents(b, disc)?;
    t[1] = t[1].scale(1.0 / b.lambda);
    Ok(t)
}

/// Sphere form of `ũ(x) = λ^{-a} u(z + x/λ)`; maps `U[z, λ]` to `U[0, 1]`.
/// The result is re-analyzed to `disc.lmax()`.
pub fn transform_field(v: &SphereField, b: &BubbleParams, disc: &Discretization) -> Result<SphereField> {
    check_dims(b, disc)?;
    let a = disc.params().weight_exponent();
    let n = disc.dim();
    let lam = b.lambda;
    let z2: f64 = b.z.iter().map(|z| z * z).sum();
    let mut values = Vec::with_capacity(disc.grid().len());
    for w in disc.grid().nodes() {
        let t = w.last();
        let zw: f64 = w.coords()[..n].iter().zip(&b.z).map(|(w, z)| w * z).sum();
        let e = lam * lam * (1.0 - t) * (1.0 + z2) + 2.0 * lam * zw + (1.0 + t);
        let mut coords: Vec<f64> = (0..n)
            .map(|i| 2.0 * lam * (lam * (1.0 - t) * b.z[i] + w.coords()[i]) / e)
            .collect();
        coords.push(1.0 - 2.0 * lam * lam * (1.0 - t) / e);
        let image = SpherePoint::normalized(coords)?;
        values.push(v.eval(&image) * (2.0 * lam / e).powf(a));
    }
    Ok(disc.analyze(&values))
}

/// Inverse of [`transform_field`]: `u(y) = λ^a ũ(λ(y - z))`.
pub fn inverse_transform_field(v: &SphereField, b: &BubbleParams, disc: &Discretization) -> Result<SphereField> {
    let inv = BubbleParams::new(b.z.iter().map(|z| -b.lambda * z).collect(), 1.0 / b.lambda)?;
    transform_field(v, &inv, disc)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub bubble: BubbleParams,
    /// Coefficient of `U[z, λ]` in `u = β U + v + ρ`.
    pub beta: f64,
    /// `v`, in the span of `∂_λU` and `∂_{z_i}U`.
    pub tangential: SphereField,
    /// `ρ`, Ḣs-orthogonal to every tangent field.
    pub orthogonal: SphereField,
    /// `‖u - U[z, λ]‖_{Ḣs}`.
    pub dist: f64,
    /// Largest `|⟨u - U, T⟩|` over unit derivative fields `T`.
    pub ortho_residual: f64,
    /// `(β - 1) U + v`, so that `u - U = v_total + ρ`.
    pub v_total: SphereField,
    /// Set when `dist ≥ (1 - FAR_MARGIN)·‖U‖`.
    pub far_from_manifold: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldOptions {
    pub optimizer: NelderMeadOptions,
    /// Gauss–Newton steps applied after the simplex search.
    pub polish_steps: usize,
}

impl Default for ManifoldOptions {
    fn default() -> Self {
        Self {
            optimizer: NelderMeadOptions {
                initial_step: 0.02,
                ..Default::default()
            },
            polish_steps: 6,
        }
    }
}

/// Starting point read off the degree-one part of `v`: near `W̄`,
/// `v ≈ W̄ + aW̄ (z·ω' - ln λ · ω_{N+1})`.
pub fn initial_guess(v: &SphereField, params: &ProblemParams) -> BubbleParams {
    let n = v.dim();
    let b = v.degree_one_coordinates();
    let scale = params.weight_exponent() * v.mean();
    if scale.abs() < 1e-300 {
        return BubbleParams::standard(n);
    }
    let z = b[..n].iter().map(|bi| bi / scale).collect();
    BubbleParams {
        z,
        lambda: (-b[n] / scale).exp(),
    }
}

pub fn dist_to_manifold(v: &SphereField, disc: &Discretization) -> Result<Decomposition> {
    dist_to_manifold_with(v, disc, &ManifoldOptions::default())
}

/// Minimizes `‖v - U[z, λ]‖_{Ḣs}` over `(z, ln λ)` and decomposes `v` there.
pub fn dist_to_manifold_with(v: &SphereField, disc: &Discretization, opts: &ManifoldOptions) -> Result<Decomposition> {
    let params = *disc.params();
    let v = v.with_lmax(disc.lmax());
    let start = initial_guess(&v, &params);
    let objective = |theta: &[f64]| {
        let b = BubbleParams::from_theta(theta);
        let (_, field) = bubble_field_unchecked(&b, disc);
        hs_norm_sq(&(&v - &field), &params)
    };
    let found = minimize(objective, &start.to_theta(), &opts.optimizer)?;
    let mut theta = found.point;
    let mut value = found.value;
    let mut evaluations = found.evaluations;
    for _ in 0..opts.polish_steps {
        let b = BubbleParams::from_theta(&theta);
        let Ok(t) = log_tangents(&b, disc) else { break };
        let diff = &v - &t[0];
        // columns: ∂_{z_i}, then λ∂_λ, matching theta's layout
        let n = disc.dim();
        let cols: Vec<&SphereField> = (0..n).map(|i| &t[2 + i]).chain(std::iter::once(&t[1])).collect();
        let step = gram_solve(&cols, &diff, &params);
        let Some(step) = step else { break };
        let trial: Vec<f64> = theta.iter().zip(&step).map(|(a, b)| a + b).collect();
        let trial_value = objective(&trial);
        evaluations += 1;
        if trial_value.is_finite() && trial_value <= value {
            let size = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
            theta = trial;
            value = trial_value;
            if size < 1e-15 {
                break;
            }
        } else {
            break;
        }
    }
    let mut d = decompose_at(&v, &BubbleParams::from_theta(&theta), disc)?;
    d.evaluations = evaluations;
    Ok(d)
}

/// Coefficients of the Ḣs projection of `target` onto `cols`, or `None`
/// when the Gram matrix is singular.
fn gram_solve(cols: &[&SphereField], target: &SphereField, params: &ProblemParams) -> Option<Vec<f64>> {
    let k = cols.len();
    let g = DMatrix::from_fn(k, k, |i, j| hs_inner(cols[i], cols[j], params));
    let r = DVector::from_fn(k, |i, _| hs_inner(cols[i], target, params));
    let sol = match g.clone().cholesky() {
        Some(ch) => ch.solve(&r),
        None => g.lu().solve(&r)?,
    };
    Some(sol.iter().copied().collect())
}

/// The decomposition of `v` relative to a given bubble, without optimizing.
pub fn decompose_at(v: &SphereField, b: &BubbleParams, disc: &Discretization) -> Result<Decomposition> {
    let params = *disc.params();
    let v = v.with_lmax(disc.lmax());
    let t = tangent_fields(b, disc)?;
    let u = &t[0];
    let cols: Vec<&SphereField> = t.iter().collect();
    let coef =
        gram_solve(&cols, &v, &params).ok_or_else(|| Error::Resolution("singular tangent Gram matrix".into()))?;
    let beta = coef[0];
    let mut tangential = disc.zero_field();
    for (c, f) in coef.iter().zip(&t).skip(1) {
        tangential = tangential.axpy(*c, f);
    }
    let orthogonal = &(&v - &u.scale(beta)) - &tangential;
    let diff = &v - u;
    let dist = hs_norm(&diff, &params);
    let ortho_residual = t[1..]
        .iter()
        .map(|f| (hs_inner(&diff, f, &params) / hs_norm(f, &params)).abs())
        .fold(0.0f64, f64::max);
    let u_norm = hs_norm(u, &params);
    Ok(Decomposition {
        bubble: b.clone(),
        beta,
        v_total: tangential.axpy(beta - 1.0, u),
        tangential,
        orthogonal,
        dist,
        ortho_residual,
        far_from_manifold: dist >= (1.0 - FAR_MARGIN) * u_norm,
        evaluations: 0,
    })
}
