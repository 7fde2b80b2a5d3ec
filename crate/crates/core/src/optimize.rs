//! Derivative-free minimization (Nelder–Mead) for the low-dimensional
//! bubble-parameter search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evaluations: usize,
    /// Stop once every vertex is within this of the best one (sup norm).
    pub x_tol: f64,
    /// ... and the objective spread is below this.
    pub f_tol: f64,
    pub initial_step: f64,
    pub seed: u64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evaluations: 2000,
            x_tol: 1e-10,
            f_tol: 1e-15,
            initial_step: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Standard coefficients: reflection 1, expansion 2, contraction 1/2, shrink 1/2.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    max_evaluations: usize,
    x_tol: f64,
    f_tol: f64,
) -> Minimum {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0, &mut evals)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    let mut converged = false;
    while evals < max_evaluations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = &simplex[0];
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&best.0).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        let f_spread = simplex[n].1 - best.1;
        if x_spread <= x_tol && f_spread <= f_tol.max(f64::EPSILON * best.1.abs()) {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        // outside contraction if the reflection helped at all, else inside
        let xc = along(if fr < simplex[n].1 { 0.5 } else { -0.5 });
        let fc = eval(&xc, &mut evals);
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = vertex.0.iter().zip(&x_best).map(|(v, b)| b + 0.5 * (v - b)).collect();
            let v = eval(&x, &mut evals);
            *vertex = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (point, value) = simplex.swap_remove(0);
    Minimum {
        point,
        value,
        evaluations: evals,
        converged,
    }
}

/// Nelder–Mead with one seeded random restart around the best point.
/// Fails with [`Error::Optimization`] when neither run converges.
pub fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Result<Minimum> {
    let first = nelder_mead(
        &mut f,
        x0,
        opts.initial_step,
        opts.max_evaluations,
        opts.x_tol,
        opts.f_tol,
    );
    if first.converged {
        return Ok(first);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start: Vec<f64> = first
        .point
        .iter()
        .map(|x| x + opts.initial_step * rng.random_range(-1.0..1.0))
        .collect();
    let mut second = nelder_mead(
        &mut f,
        &start,
        opts.initial_step,
        opts.max_evaluations,
        opts.x_tol,
        opts.f_tol,
    );
    second.evaluations += first.evaluations;
    if second.converged {
        return Ok(second);
    }
    let best = if second.value < first.value { second } else { first };
    Err(Error::Optimization {
        evaluations: best.evaluations,
        best_value: best.value,
        best_point: best.point,
    })
}
