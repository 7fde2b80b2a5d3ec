//! The rescaled fast-diffusion flow `∂_τ w^p + (-Δ)^s w = w^p` on `S^N`,
//! integrated in the form `∂_τ W = (W^p - A_s W)/(p W^{p-1})`.

mod rate;
mod trace;

pub use rate::{extinction_profile, inverse_time_map, rate_fit, time_map, w_transform, Metric, RateFit, Window};
pub use trace::{SimTrace, TRACE_SCHEMA};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constants::{alpha, ProblemParams};
use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::functional::{hs_norm, j_functional, j_gap, residual, signed_pow, stationary_value, POSITIVITY_FLOOR};
use crate::harmonics::{apply_as, DegreeProjector, SphereField};
use crate::manifold::dist_to_manifold;

/// Adaptive steps below this abort the run.
pub const MIN_DT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DtPolicy {
    Fixed {
        dt: f64,
    },
    /// `dt = safety·p·(min W)^{p-1}/α(lmax)`.
    Adaptive {
        safety: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnstableModeControl {
    None,
    /// Re-impose the degree-0 coefficient of `W₀` after every step.
    /// A numerical device that removes the unstable scaling mode; not part of the flow.
    ProjectOut,
}

/// `W(0) = W₀ + ε Σ_ℓ r_ℓ` with each `r_ℓ` a seeded random degree-ℓ field
/// of unit Ḣs norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub degrees: Vec<usize>,
    pub epsilon: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub params: ProblemParams,
    pub lmax: usize,
    pub grid_degree: usize,
    pub dt: DtPolicy,
    pub tau_end: f64,
    pub init: InitSpec,
    pub unstable_mode: UnstableModeControl,
    pub sample_interval: f64,
    /// Also run the manifold projection at each sample (slow).
    pub track_distance: bool,
}

impl SimConfig {
    /// Defaults: grid degree `4·lmax`, adaptive safety 0.5, projectOut,
    /// samples every 0.1.
    pub fn new(params: ProblemParams, lmax: usize, tau_end: f64, init: InitSpec) -> Self {
        Self {
            params,
            lmax,
            grid_degree: (4 * lmax).max(4),
            dt: DtPolicy::Adaptive { safety: 0.5 },
            tau_end,
            init,
            unstable_mode: UnstableModeControl::ProjectOut,
            sample_interval: 0.1,
            track_distance: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.require_flow()?;
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.lmax < 1 {
            return bad("lmax must be at least 1".into());
        }
        if !(self.tau_end >= 0.0 && self.tau_end.is_finite()) {
            return bad(format!("tau_end must be finite and >= 0 (got {})", self.tau_end));
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return bad(format!(
                "sample interval must be positive (got {})",
                self.sample_interval
            ));
        }
        match self.dt {
            DtPolicy::Fixed { dt } if !(dt > 0.0 && dt.is_finite()) => return bad(format!("bad fixed dt {dt}")),
            DtPolicy::Adaptive { safety } if !(safety > 0.0 && safety.is_finite()) => {
                return bad(format!("bad dt safety {safety}"))
            }
            _ => {}
        }
        if !self.init.epsilon.is_finite() {
            return bad("epsilon must be finite".into());
        }
        if let Some(l) = self.init.degrees.iter().find(|l| **l > self.lmax) {
            return bad(format!("perturbation degree {l} exceeds lmax {}", self.lmax));
        }
        Ok(())
    }
}

/// The constant equilibrium `W₀ = α(0)^{1/(p-1)}`.
pub fn stationary_field(params: &ProblemParams, lmax: usize) -> Result<SphereField> {
    SphereField::constant(params.n(), lmax, stationary_value(params))
}

pub fn initial_field(config: &SimConfig) -> Result<SphereField> {
    let params = &config.params;
    let mut w = stationary_field(params, config.lmax)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.init.seed);
    for &l in &config.init.degrees {
        let r = SphereField::random(params.n(), config.lmax, &DegreeProjector::new([l]), &mut rng)?;
        let norm = hs_norm(&r, params);
        w = w.axpy(config.init.epsilon / norm, &r);
    }
    Ok(w)
}

/// `∂_τ W` and the minimum grid value of `W`.
pub fn flow_rhs(w: &SphereField, disc: &Discretization) -> Result<(SphereField, f64)> {
    let params = disc.params();
    let p = params.p();
    let vals = disc.synthesize(w);
    let aw = disc.synthesize(&apply_as(w, params));
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > POSITIVITY_FLOOR) {
        return Err(Error::Positivity { tau: f64::NAN, min });
    }
    let rhs: Vec<f64> = vals
        .iter()
        .zip(&aw)
        .map(|(v, a)| (signed_pow(*v, p) - a) / (p * v.powf(p - 1.0)))
        .collect();
    Ok((disc.analyze(&rhs), min))
}

fn project_out(w: &mut SphereField, w0: f64) {
    let c = w0 * crate::constants::sphere_area(w.dim()).sqrt();
    w.degree_mut(0)[0] = c;
}

/// One classic RK4 step.
fn rk4_step(w: &SphereField, dt: f64, disc: &Discretization) -> Result<SphereField> {
    let (k1, _) = flow_rhs(w, disc)?;
    let (k2, _) = flow_rhs(&w.axpy(0.5 * dt, &k1), disc)?;
    let (k3, _) = flow_rhs(&w.axpy(0.5 * dt, &k2), disc)?;
    let (k4, _) = flow_rhs(&w.axpy(dt, &k3), disc)?;
    let incr = &(&k1 + &k4) + &(2.0 * &(&k2 + &k3));
    Ok(w.axpy(dt / 6.0, &incr))
}

pub fn simulate(config: &SimConfig) -> Result<SimTrace> {
    config.validate()?;
    let disc = Discretization::with_grid_degree(config.params, config.lmax, config.grid_degree)?;
    let w = initial_field(config)?;
    simulate_from(config, &disc, w)
}

/// Runs the flow from a given initial field.
pub fn simulate_from(config: &SimConfig, disc: &Discretization, mut w: SphereField) -> Result<SimTrace> {
    let params = *disc.params();
    let p = params.p();
    let w0 = stationary_value(&params);
    let w0_field = stationary_field(&params, disc.lmax())?;
    let alpha_top = alpha(disc.lmax(), &params);
    let mut trace = SimTrace::empty(config.clone());
    let mut tau = 0.0;
    let mut k = 0usize;
    loop {
        record(&mut trace, tau, &w, &w0_field, disc, config.track_distance)?;
        if tau >= config.tau_end - 1e-12 {
            break;
        }
        k += 1;
        let target = (k as f64 * config.sample_interval).min(config.tau_end);
        while tau < target - 1e-12 {
            let min = disc.synthesize(&w).into_iter().fold(f64::INFINITY, f64::min);
            if !(min > POSITIVITY_FLOOR) {
                return Err(Error::Positivity { tau, min });
            }
            let dt_policy = match config.dt {
                DtPolicy::Fixed { dt } => dt,
                DtPolicy::Adaptive { safety } => {
                    let dt = safety * p * min.powf(p - 1.0) / alpha_top;
                    if dt < MIN_DT {
                        return Err(Error::Stiffness { tau, dt });
                    }
                    dt
                }
            };
            let dt = dt_policy.min(target - tau);
            w = rk4_step(&w, dt, disc).map_err(|e| match e {
                Error::Positivity { min, .. } => Error::Positivity { tau, min },
                e => e,
            })?;
            if config.unstable_mode == UnstableModeControl::ProjectOut {
                project_out(&mut w, w0);
            }
            tau = if target - (tau + dt) < 1e-12 { target } else { tau + dt };
        }
    }
    Ok(trace)
}

fn record(
    trace: &mut SimTrace,
    tau: f64,
    w: &SphereField,
    w0: &SphereField,
    disc: &Discretization,
    track_distance: bool,
) -> Result<()> {
    let params = disc.params();
    let rep = residual(w, disc);
    let dev = w - w0;
    let dissipation = rep.dissipation.ok_or(Error::Positivity {
        tau,
        min: rep.min_value,
    })?;
    trace.tau.push(tau);
    trace.j.push(j_functional(w, disc));
    trace.j_gap.push(j_gap(w, disc));
    trace.r.push(dissipation);
    trace.delta.push(rep.delta_norm);
    trace.hneg.push(rep.hneg_norm);
    trace.mass.push(rep.mass);
    trace.hs_error.push(hs_norm(&dev, params));
    trace.degree_energies.push(dev.degree_energies());
    trace.dist.push(if track_distance {
        Some(dist_to_manifold(w, disc)?.dist)
    } else {
        None
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::mu;
    use crate::functional::j_bubble;

    fn params() -> ProblemParams {
        ProblemParams::new(2, 0.5).unwrap()
    }

    fn cfg(degrees: Vec<usize>, eps: f64, tau_end: f64, lmax: usize) -> SimConfig {
        SimConfig::new(
            params(),
            lmax,
            tau_end,
            InitSpec {
                degrees,
                epsilon: eps,
                seed: 3,
            },
        )
    }

    #[test]
    fn stationary_examples() {
        let p = params();
        let w = stationary_field(&p, 8).unwrap();
        assert!((w.mean() - 0.5f64.sqrt()).abs() < 1e-15);
        let d = Discretization::new(p, 8).unwrap();
        assert!(residual(&w, &d).hneg_norm <= 1e-10);
        let b = crate::manifold::bubble_field(&crate::manifold::BubbleParams::standard(2), &d).unwrap();
        assert!(hs_norm(&(&b - &w), &p) < 1e-8);
        let (rhs, min) = flow_rhs(&w, &d).unwrap();
        assert!(rhs.l2_norm_sq().sqrt() < 1e-10);
        assert!((min - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn linearization_rates() {
        let p = params();
        let d = Discretization::new(p, 8).unwrap();
        let w0 = stationary_field(&p, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for l in 0..=4 {
            let h = SphereField::random(2, 8, &DegreeProjector::new([l]), &mut rng).unwrap();
            let h = h.scale(1.0 / h.l2_norm_sq().sqrt());
            let eta = 1e-6;
            let (plus, _) = flow_rhs(&w0.axpy(eta, &h), &d).unwrap();
            let (minus, _) = flow_rhs(&w0.axpy(-eta, &h), &d).unwrap();
            let deriv = (&plus - &minus).scale(0.5 / eta);
            let want = h.scale(-(mu(l, &p) - 1.0));
            assert!((&deriv - &want).l2_norm_sq().sqrt() < 1e-7, "l={l}");
        }
        // degree 0 grows at 1 - 1/p
        assert!((1.0 - mu(0, &p) - (1.0 - 1.0 / p.p())).abs() < 1e-15);
    }

    #[test]
    fn zero_perturbation_stays_put() {
        let t = simulate(&cfg(vec![2], 0.0, 1.0, 6)).unwrap();
        assert_eq!(t.tau.len(), 11);
        let jb = j_bubble(&params());
        for (j, e) in t.j.iter().zip(&t.hs_error) {
            assert!((j - jb).abs() < 1e-12);
            assert!(*e < 1e-13);
        }
    }

    #[test]
    fn degree_two_decay_and_dissipation() {
        let t = simulate(&cfg(vec![2], 1e-3, 4.0, 8)).unwrap();
        let n = t.tau.len();
        assert_eq!(n, 41);
        assert!((t.tau[n - 1] - 4.0).abs() < 1e-12);
        let rate = -(t.hs_error[n - 1] / t.hs_error[10]).ln() / (t.tau[n - 1] - t.tau[10]);
        assert!((rate / (2.0 / 3.0) - 1.0).abs() < 0.02, "rate={rate}");
        for i in 1..n {
            assert!(t.j[i] <= t.j[i - 1] + 1e-9);
            let dj = t.j_gap[i] - t.j_gap[i - 1];
            let h = t.tau[i] - t.tau[i - 1];
            let integral = 0.5 * h * (t.r[i] + t.r[i - 1]);
            assert!((dj + integral).abs() <= 1e-6 * t.j[i].abs() * h);
        }
    }

    #[test]
    fn unstable_mode_grows_without_projection() {
        let mut c = cfg(vec![0], 1e-6, 2.0, 4);
        c.unstable_mode = UnstableModeControl::None;
        let t = simulate(&c).unwrap();
        let e0: Vec<f64> = t.degree_energies.iter().map(|e| e[0]).collect();
        let rate = (e0[20] / e0[5]).ln() / (t.tau[20] - t.tau[5]);
        let want = 2.0 * (1.0 - 1.0 / 3.0);
        assert!((rate / want - 1.0).abs() < 0.02, "rate={rate}");
        c.unstable_mode = UnstableModeControl::ProjectOut;
        let t = simulate(&c).unwrap();
        assert!(t.degree_energies.iter().skip(1).all(|e| e[0] < 1e-28));
    }

    #[test]
    fn fixed_dt_and_validation() {
        let mut c = cfg(vec![2], 1e-3, 0.5, 6);
        c.dt = DtPolicy::Fixed { dt: 0.01 };
        let a = simulate(&c).unwrap();
        c.dt = DtPolicy::Adaptive { safety: 0.5 };
        let b = simulate(&c).unwrap();
        let n = a.hs_error.len() - 1;
        assert!((a.hs_error[n] / b.hs_error[n] - 1.0).abs() < 1e-6);
        c.init.degrees = vec![9];
        assert!(matches!(simulate(&c), Err(Error::InvalidParams(_))));
        let bad = SimConfig::new(ProblemParams::new(3, 1.2).unwrap(), 6, 1.0, c.init.clone());
        assert!(simulate(&bad).is_err());
    }

    #[test]
    fn positivity_violation_aborts() {
        let c = cfg(vec![2], 3.0, 1.0, 6);
        assert!(matches!(simulate(&c), Err(Error::Positivity { .. })));
    }

    #[test]
    fn tiny_adaptive_step_is_stiffness() {
        let mut c = cfg(vec![5], 1e-2, 1.0, 6);
        c.dt = DtPolicy::Adaptive { safety: 1e-12 };
        assert!(matches!(simulate(&c), Err(Error::Stiffness { .. })));
    }

    #[test]
    fn trace_csv_round_trip() {
        let t = simulate(&cfg(vec![2, 3], 1e-3, 0.3, 4)).unwrap();
        let text = t.to_csv_string();
        assert!(text.starts_with("#schema=trace/v1\n#config={"));
        let back = SimTrace::from_csv(text.as_bytes()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn config_serde_rejects_unknown_keys() {
        let c = cfg(vec![2], 1e-3, 1.0, 6);
        let text = serde_json::to_string(&c).unwrap();
        let back: SimConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(serde_json::from_value::<SimConfig>(v).is_err());
    }
}
