//! A degree bound, a quadrature grid fine enough for nonlinear terms, and
//! the transform tables between them.

use crate::constants::ProblemParams;
use crate::error::{Error, Result};
use crate::harmonics::{SpectralPlan, SphereField};
use crate::sphere::{build_quadrature, QuadratureGrid};

/// Fields are kept to `lmax`; pointwise nonlinearities are evaluated on a
/// grid of degree bound `grid_degree` (default `4·lmax`).
#[derive(Debug, Clone)]
pub struct Discretization {
    params: ProblemParams,
    lmax: usize,
    grid: QuadratureGrid,
    plan: SpectralPlan,
}

impl Discretization {
    pub fn new(params: ProblemParams, lmax: usize) -> Result<Self> {
        Self::with_grid_degree(params, lmax, (4 * lmax).max(4))
    }

    pub fn with_grid_degree(params: ProblemParams, lmax: usize, grid_degree: usize) -> Result<Self> {
        let n = params.n();
        if n != 1 && n != 2 {
            return Err(Error::UnsupportedDimension(n));
        }
        if grid_degree < lmax {
            return Err(Error::Resolution(format!(
                "grid degree {grid_degree} is below lmax {lmax}"
            )));
        }
        let grid = build_quadrature(n, grid_degree.max(4))?;
        let plan = SpectralPlan::new(&grid, lmax)?;
        Ok(Self {
            params,
            lmax,
            grid,
            plan,
        })
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.n()
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn plan(&self) -> &SpectralPlan {
        &self.plan
    }

    pub fn synthesize(&self, field: &SphereField) -> Vec<f64> {
        self.plan.synthesize(field)
    }

    pub fn analyze(&self, values: &[f64]) -> SphereField {
        self.plan.analyze(values)
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.grid.integrate(values)
    }

    pub fn zero_field(&self) -> SphereField {
        SphereField::zeros(self.dim(), self.lmax).expect("dimension checked at construction")
    }

    pub fn constant_field(&self, value: f64) -> SphereField {
        SphereField::constant(self.dim(), self.lmax, value).expect("dimension checked at construction")
    }

    /// Relative L² energy of `values` not captured by its analysis to `lmax`.
    pub fn tail_fraction(&self, values: &[f64], field: &SphereField) -> f64 {
        let total = self.integrate(&values.iter().map(|v| v * v).collect::<Vec<_>>());
        if total <= 0.0 {
            return 0.0;
        }
        ((total - field.l2_norm_sq()) / total).max(0.0)
    }
}
