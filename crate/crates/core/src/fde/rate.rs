use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::SimTrace;
use crate::constants::{constant_table, mu, ProblemParams};
use crate::error::{Error, Result};
use crate::manifold::{bubble_eval, BubbleParams};

/// Fits tolerate this fraction below the guaranteed rate.
pub const RATE_SLACK: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Metric {
    HsError,
    Dist,
    JGap,
    /// L² energy of one degree of `W - W₀`.
    DegreeEnergy(usize),
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::HsError => write!(f, "hsError"),
            Metric::Dist => write!(f, "dist"),
            Metric::JGap => write!(f, "Jgap"),
            Metric::DegreeEnergy(l) => write!(f, "E{l}"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hsError" | "hs-error" | "hs_error" => Ok(Metric::HsError),
            "dist" => Ok(Metric::Dist),
            "Jgap" | "jgap" | "j-gap" | "j_gap" => Ok(Metric::JGap),
            _ => s
                .strip_prefix('E')
                .and_then(|d| d.parse().ok())
                .map(Metric::DegreeEnergy)
                .ok_or_else(|| Error::Config(format!("unknown metric {s:?} (hsError, dist, Jgap, E<l>)"))),
        }
    }
}

/// A closed `τ` interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl FromStr for Window {
    type Err = Error;
    /// `"a,b"` or `"a:b"`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split([',', ':']).map(str::trim).collect();
        let parse = |x: &str| x.parse::<f64>().map_err(|_| Error::Config(format!("bad window {s:?}")));
        match parts.as_slice() {
            [a, b] => {
                let w = Window {
                    start: parse(a)?,
                    end: parse(b)?,
                };
                if !(w.start < w.end) {
                    return Err(Error::Config(format!("empty window {s:?}")));
                }
                Ok(w)
            }
            _ => Err(Error::Config(format!("window must look like a,b (got {s:?})"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparisons {
    pub mu2_minus_1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub kappa_fde: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub metric: Metric,
    /// Decay exponent in `τ`: `metric ≈ C e^{-κ τ}`.
    pub kappa_hat: f64,
    pub window: Window,
    pub samples: usize,
    pub rms_residual: f64,
    pub comparisons: Comparisons,
    /// Rate the theory guarantees for this metric, if any.
    pub guaranteed: Option<f64>,
    /// `kappa_hat ≥ (1 - RATE_SLACK)·guaranteed`.
    pub consistent: Option<bool>,
    /// `kappa_hat` as a power of `T̄ - t`.
    pub time_power: f64,
}

fn metric_values(trace: &SimTrace, metric: Metric) -> Result<Vec<f64>> {
    match metric {
        Metric::HsError => Ok(trace.hs_error.clone()),
        Metric::JGap => Ok(trace.j_gap.clone()),
        Metric::Dist => Ok(trace.dist.iter().map(|d| d.unwrap_or(f64::NAN)).collect()),
        Metric::DegreeEnergy(l) => trace
            .degree_energies
            .iter()
            .map(|e| {
                e.get(l)
                    .copied()
                    .ok_or_else(|| Error::Config(format!("trace has no degree {l}")))
            })
            .collect(),
    }
}

/// Default window: drop the first 20% and the last 10% of samples.
pub fn default_window(tau: &[f64]) -> Option<Window> {
    let n = tau.len();
    let lo = (0.2 * n as f64).floor() as usize;
    let hi = n - (0.1 * n as f64).floor() as usize;
    (hi > lo + 1).then(|| Window {
        start: tau[lo],
        end: tau[hi - 1],
    })
}

/// Least-squares slope of `ln metric` against `τ` inside the window.
pub fn rate_fit(trace: &SimTrace, metric: Metric, window: Option<Window>, params: &ProblemParams) -> Result<RateFit> {
    let values = metric_values(trace, metric)?;
    let window = match window {
        Some(w) => w,
        None => default_window(&trace.tau).ok_or_else(|| Error::DegenerateFit("trace too short".into()))?,
    };
    let eps = 1e-9 * (window.end - window.start).abs().max(1.0);
    let pts: Vec<(f64, f64)> = trace
        .tau
        .iter()
        .zip(&values)
        .filter(|(t, _)| **t >= window.start - eps && **t <= window.end + eps)
        .map(|(t, v)| (*t, *v))
        .collect();
    if pts.len() < 2 {
        return Err(Error::DegenerateFit(format!("{} samples in window", pts.len())));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::DegenerateFit(format!(
            "{metric} = {v} at tau {t} is not positive"
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1.ln() - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("window spans a single time".into()));
    }
    let slope = sxy / sxx;
    let rms = (pts
        .iter()
        .map(|p| (p.1.ln() - my - slope * (p.0 - mt)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let table = constant_table(params);
    let comparisons = Comparisons {
        mu2_minus_1: mu(2, params) - 1.0,
        kappa2: table.kappa2,
        kappa3: table.kappa3,
        kappa_fde: table.kappa_fde,
    };
    let guaranteed = match metric {
        Metric::JGap => Some(2.0 * table.kappa2),
        Metric::HsError | Metric::Dist => Some(table.kappa3),
        Metric::DegreeEnergy(_) => None,
    };
    let kappa_hat = -slope;
    let p = params.p();
    Ok(RateFit {
        metric,
        kappa_hat,
        window,
        samples: pts.len(),
        rms_residual: rms,
        comparisons,
        guaranteed,
        consistent: guaranteed.map(|g| kappa_hat >= (1.0 - RATE_SLACK) * g),
        time_power: kappa_hat * p / (p - 1.0),
    })
}

/// `t = T̄ (1 - e^{-(p-1)τ/p})`.
pub fn time_map(tau: f64, tbar: f64, params: &ProblemParams) -> Result<f64> {
    if !(tau >= 0.0) || !(tbar > 0.0) {
        return Err(Error::Domain(format!(
            "time map needs tau >= 0 and Tbar > 0 (got {tau}, {tbar})"
        )));
    }
    let p = params.p();
    Ok(-tbar * (-(p - 1.0) * tau / p).exp_m1())
}

pub fn inverse_time_map(t: f64, tbar: f64, params: &ProblemParams) -> Result<f64> {
    if !(tbar > 0.0) || !(0.0..tbar).contains(&t) {
        return Err(Error::Domain(format!(
            "inverse time map needs 0 <= t < Tbar (got {t}, {tbar})"
        )));
    }
    let p = params.p();
    Ok(-p / (p - 1.0) * (-t / tbar).ln_1p())
}

/// `((p-1)/p)^{p/(p-1)} (T̄ - t)^{p/(p-1)} U[z,λ](x)^p`.
pub fn extinction_profile(tbar: f64, b: &BubbleParams, t: f64, x: &[f64], params: &ProblemParams) -> Result<f64> {
    if !(t < tbar) || !(t >= 0.0) {
        return Err(Error::Domain(format!(
            "profile needs 0 <= t < Tbar (got t={t}, Tbar={tbar})"
        )));
    }
    let p = params.p();
    let e = p / (p - 1.0);
    Ok(((p - 1.0) / p * (tbar - t)).powf(e) * bubble_eval(b, x, params).powf(p))
}

/// `w = (u / U_{T̄,0,1})^{1/p} U[0,1]` at `(t, x)`.
pub fn w_transform(u: f64, tbar: f64, t: f64, x: &[f64], params: &ProblemParams) -> Result<f64> {
    let standard = BubbleParams::standard(x.len());
    let reference = extinction_profile(tbar, &standard, t, x, params)?;
    Ok((u / reference).powf(1.0 / params.p()) * bubble_eval(&standard, x, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(rate: f64) -> SimTrace {
        let tau: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
        let vals: Vec<f64> = tau.iter().map(|t| (-rate * t).exp()).collect();
        SimTrace {
            config: None,
            j: vec![0.0; tau.len()],
            j_gap: vals.iter().map(|v| v * v).collect(),
            r: vec![0.0; tau.len()],
            delta: vec![0.0; tau.len()],
            hneg: vec![0.0; tau.len()],
            mass: vec![0.0; tau.len()],
            dist: vals.iter().map(|v| Some(*v)).collect(),
            hs_error: vals.clone(),
            degree_energies: vals.iter().map(|v| vec![0.0, 0.0, v * v]).collect(),
            tau,
        }
    }

    fn params() -> ProblemParams {
        ProblemParams::new(2, 0.5).unwrap()
    }

    #[test]
    fn exact_exponential() {
        let t = synthetic(0.5);
        let f = rate_fit(&t, Metric::HsError, None, &params()).unwrap();
        assert!((f.kappa_hat - 0.5).abs() < 1e-10);
        assert!(f.rms_residual < 1e-10);
        assert!((f.window.start - 2.0).abs() < 1e-12 && (f.window.end - 9.0).abs() < 1e-9);
        let g = rate_fit(&t, Metric::JGap, Some("1,3".parse().unwrap()), &params()).unwrap();
        assert!((g.kappa_hat - 1.0).abs() < 1e-10);
        assert_eq!(g.samples, 21);
        let e = rate_fit(&t, Metric::DegreeEnergy(2), None, &params()).unwrap();
        assert!((e.kappa_hat - 1.0).abs() < 1e-10 && e.consistent.is_none());
    }

    #[test]
    fn consistency_flags() {
        let p = params();
        let table = constant_table(&p);
        let slow = synthetic(0.5 * table.kappa3);
        assert_eq!(rate_fit(&slow, Metric::Dist, None, &p).unwrap().consistent, Some(false));
        let fast = synthetic(2.0 / 3.0);
        let f = rate_fit(&fast, Metric::HsError, None, &p).unwrap();
        assert_eq!(f.consistent, Some(true));
        assert!((f.comparisons.mu2_minus_1 - 2.0 / 3.0).abs() < 1e-14);
        assert!((f.time_power - 2.0 / 3.0 * 1.5).abs() < 1e-10);
    }

    #[test]
    fn degenerate_fits() {
        let p = params();
        let mut t = synthetic(0.5);
        t.hs_error[50] = 0.0;
        assert!(matches!(
            rate_fit(&t, Metric::HsError, None, &p),
            Err(Error::DegenerateFit(_))
        ));
        t.dist[50] = None;
        assert!(matches!(
            rate_fit(&t, Metric::Dist, None, &p),
            Err(Error::DegenerateFit(_))
        ));
        let w = Window { start: 20.0, end: 30.0 };
        assert!(matches!(
            rate_fit(&t, Metric::JGap, Some(w), &p),
            Err(Error::DegenerateFit(_))
        ));
        assert!(rate_fit(&t, Metric::DegreeEnergy(7), None, &p).is_err());
    }

    #[test]
    fn metric_and_window_parsing() {
        for m in [Metric::HsError, Metric::Dist, Metric::JGap, Metric::DegreeEnergy(3)] {
            assert_eq!(m.to_string().parse::<Metric>().unwrap(), m);
        }
        assert!("bogus".parse::<Metric>().is_err());
        assert!("3,1".parse::<Window>().is_err());
        assert_eq!("1:2".parse::<Window>().unwrap(), Window { start: 1.0, end: 2.0 });
    }

    #[test]
    fn time_map_examples() {
        let p = params();
        assert_eq!(time_map(0.0, 2.0, &p).unwrap(), 0.0);
        assert!((time_map(200.0, 2.0, &p).unwrap() - 2.0).abs() < 1e-12);
        let mut last = 0.0;
        for k in 1..50 {
            let tau = k as f64 * 0.37;
            let t = time_map(tau, 2.0, &p).unwrap();
            assert!(t > last && t < 2.0);
            last = t;
            assert!((inverse_time_map(t, 2.0, &p).unwrap() - tau).abs() < 1e-9 * tau.max(1.0));
        }
        assert!(inverse_time_map(2.0, 2.0, &p).is_err());
        assert!(time_map(-1.0, 2.0, &p).is_err());
        // e^{-κτ} = ((T̄ - t)/T̄)^{κ p/(p-1)}
        let table = constant_table(&p);
        let tau = 3.0;
        let t = time_map(tau, 1.0, &p).unwrap();
        let lhs = (-table.kappa3 * tau).exp();
        let rhs = (1.0 - t).powf(table.kappa3 * p.p() / (p.p() - 1.0));
        assert!((lhs / rhs - 1.0).abs() < 1e-12);
        assert!((table.kappa3 * p.p() / (p.p() - 1.0) - table.kappa_fde).abs() < 1e-15);
    }

    #[test]
    fn profile_examples() {
        let p = ProblemParams::new(2, 0.3).unwrap();
        let b = BubbleParams::new(vec![0.2, -0.4], 1.7).unwrap();
        let x = [0.5, 0.1];
        let tbar = 2.0;
        assert!(extinction_profile(tbar, &b, tbar, &x, &p).is_err());
        assert!(extinction_profile(tbar, &b, tbar - 1e-12, &x, &p).unwrap() < 1e-10);
        let e = p.p() / (p.p() - 1.0);
        let a = extinction_profile(tbar, &b, 0.3, &x, &p).unwrap();
        let c = extinction_profile(tbar, &b, 1.1, &x, &p).unwrap();
        assert!((a / c - ((tbar - 0.3) / (tbar - 1.1)).powf(e)).abs() < 1e-12);
        for t in [0.0, 0.5, 1.9] {
            for x in [[0.0, 0.0], [1.5, -2.0], [0.2, -0.4]] {
                let u = extinction_profile(tbar, &b, t, &x, &p).unwrap();
                let w = w_transform(u, tbar, t, &x, &p).unwrap();
                assert!((w / bubble_eval(&b, &x, &p) - 1.0).abs() < 1e-12);
            }
        }
    }
}
