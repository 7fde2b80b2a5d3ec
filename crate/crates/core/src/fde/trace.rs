use serde_json::Value;

use super::SimConfig;
use crate::error::{Error, Result};
use crate::table::Table;

pub const TRACE_SCHEMA: &str = "trace/v1";

const FIXED_COLUMNS: [&str; 9] = ["tau", "J", "R", "delta", "dist", "hsError", "Jgap", "hneg", "mass"];

/// Samples of a flow run. `degree_energies[k][ℓ]` is the L² energy of
/// degree `ℓ` in `W - W₀` at `tau[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub config: Option<SimConfig>,
    pub tau: Vec<f64>,
    pub j: Vec<f64>,
    pub j_gap: Vec<f64>,
    pub r: Vec<f64>,
    pub delta: Vec<f64>,
    pub hneg: Vec<f64>,
    pub mass: Vec<f64>,
    pub dist: Vec<Option<f64>>,
    pub hs_error: Vec<f64>,
    pub degree_energies: Vec<Vec<f64>>,
}

impl SimTrace {
    pub(crate) fn empty(config: SimConfig) -> Self {
        Self {
            config: Some(config),
            tau: Vec::new(),
            j: Vec::new(),
            j_gap: Vec::new(),
            r: Vec::new(),
            delta: Vec::new(),
            hneg: Vec::new(),
            mass: Vec::new(),
            dist: Vec::new(),
            hs_error: Vec::new(),
            degree_energies: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// Columns `tau, J, R, delta, dist, hsError, Jgap, hneg, mass, E0..E{L}`.
    pub fn to_table(&self) -> Table {
        let lmax = self.degree_energies.first().map_or(0, |e| e.len().saturating_sub(1));
        let mut columns: Vec<String> = FIXED_COLUMNS.iter().map(|c| c.to_string()).collect();
        columns.extend((0..=lmax).map(|l| format!("E{l}")));
        let config = self
            .config
            .as_ref()
            .map_or(Value::Null, |c| serde_json::to_value(c).expect("config serializes"));
        let mut t = Table::new(TRACE_SCHEMA, config, columns);
        for k in 0..self.len() {
            let mut row = vec![
                self.tau[k],
                self.j[k],
                self.r[k],
                self.delta[k],
                self.dist[k].unwrap_or(f64::NAN),
                self.hs_error[k],
                self.j_gap[k],
                self.hneg[k],
                self.mass[k],
            ];
            row.extend(&self.degree_energies[k]);
            t.push(row);
        }
        t
    }

    pub fn from_table(t: &Table) -> Result<Self> {
        if !t.schema.is_empty() && t.schema != TRACE_SCHEMA {
            return Err(Error::Config(format!(
                "expected schema {TRACE_SCHEMA}, found {}",
                t.schema
            )));
        }
        let col = |name: &str| {
            t.column(name)
                .ok_or_else(|| Error::Config(format!("trace is missing column {name}")))
        };
        let tau = col("tau")?;
        let n = tau.len();
        // only tau and one metric are strictly needed to fit rates
        let opt = |name: &str| t.column(name).unwrap_or_else(|| vec![f64::NAN; n]);
        let mut energy_cols = Vec::new();
        while let Some(c) = t.column(&format!("E{}", energy_cols.len())) {
            energy_cols.push(c);
        }
        let config = match &t.config {
            Value::Null => None,
            v => serde_json::from_value(v.clone()).ok(),
        };
        Ok(Self {
            config,
            j: opt("J"),
            j_gap: opt("Jgap"),
            r: opt("R"),
            delta: opt("delta"),
            hneg: opt("hneg"),
            mass: opt("mass"),
            dist: opt("dist").into_iter().map(|d| (!d.is_nan()).then_some(d)).collect(),
            hs_error: opt("hsError"),
            degree_energies: (0..n).map(|k| energy_cols.iter().map(|c| c[k]).collect()).collect(),
            tau,
        })
    }

    pub fn to_csv_string(&self) -> String {
        self.to_table().to_csv_string()
    }

    pub fn from_csv<R: std::io::BufRead>(input: R) -> Result<Self> {
        Self::from_table(&Table::read_csv(input)?)
    }
}
