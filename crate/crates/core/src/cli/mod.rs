//! Command-line front end. Every subcommand produces one [`Table`].
//!
//! Exit codes: 0 success, 2 bad arguments or configuration, 3 numerical
//! failure, 4 i/o failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::constants::{alpha, constant_table, identity_checks, mu, ProblemParams};
use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::fde::{self, DtPolicy, InitSpec, Metric, SimConfig, SimTrace, UnstableModeControl, Window};
use crate::functional::{cap_family, coercivity_form, hs_norm, hs_norm_sq, lp_norm, potential_term, residual};
use crate::harmonics::{degree_size, DegreeProjector, SphereField};
use crate::manifold::{bubble_field, BubbleParams};
use crate::stability::{
    expansion_experiment, extrapolate_to_zero, quotient_sequence, symmetric_test_field, DEFAULT_EPS_LADDER,
};
use crate::table::{Format, Table};

#[derive(Debug, Parser)]
#[command(
    name = "fracsob",
    version,
    about = "Fractional Sobolev stability and fast-diffusion numerics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Closed-form constants and their identity checks.
    Constants,
    /// alpha(l), mu(l) and multiplicities up to --lmax.
    Spectrum,
    /// Euler-Lagrange residual and Sobolev quotient of sample bubbles.
    BubbleCheck,
    /// Coercivity form on pure and random fields orthogonal to the tangent space.
    Coercivity,
    /// Stability quotient along U + eps*rho, with rho random on --degrees.
    Quotient,
    /// Third-order expansion of the quotient for the symmetric test field (N=2).
    Expansion,
    /// Run the rescaled flow and write its trace.
    Simulate,
    /// Fit a decay rate to a trace written by `simulate`.
    Rate {
        /// Trace CSV.
        trace: PathBuf,
    },
    /// Sup-to-L^{2*} ratio along the cap family (deltas from --eps).
    Interp,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Constants => "constants",
            Command::Spectrum => "spectrum",
            Command::BubbleCheck => "bubble-check",
            Command::Coercivity => "coercivity",
            Command::Quotient => "quotient",
            Command::Expansion => "expansion",
            Command::Simulate => "simulate",
            Command::Rate { .. } => "rate",
            Command::Interp => "interp",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long = "s", global = true)]
    pub s: Option<f64>,
    #[arg(long, global = true)]
    pub lmax: Option<usize>,
    #[arg(long, global = true)]
    pub grid_degree: Option<usize>,
    /// Comma-separated list.
    #[arg(long, global = true, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub tau_end: Option<f64>,
    #[arg(long, global = true)]
    pub dt_safety: Option<f64>,
    /// Fixed step; overrides --dt-safety.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// hsError, dist, Jgap or E<l>.
    #[arg(long, global = true)]
    pub metric: Option<String>,
    /// a,b
    #[arg(long, global = true)]
    pub window: Option<String>,
    /// JSON file with any of the flag values (snake_case keys).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// csv or json.
    #[arg(long, global = true, value_parser = parse_format)]
    pub format: Option<Format>,
    /// Comma-separated perturbation degrees.
    #[arg(long, global = true, value_delimiter = ',')]
    pub degrees: Option<Vec<usize>>,
    /// Sample count (coercivity) or radial nodes (interp).
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// none or project-out.
    #[arg(long, global = true, value_parser = parse_unstable_mode)]
    pub unstable_mode: Option<UnstableModeControl>,
    #[arg(long, global = true)]
    pub sample_interval: Option<f64>,
    #[arg(long, global = true)]
    pub track_distance: bool,
    /// Lipschitz bound of the cap family.
    #[arg(long, global = true)]
    pub lipschitz: Option<f64>,
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    match s {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        _ => Err(format!("unknown format {s:?} (csv, json)")),
    }
}

fn parse_unstable_mode(s: &str) -> std::result::Result<UnstableModeControl, String> {
    match s {
        "none" => Ok(UnstableModeControl::None),
        "project-out" | "project_out" | "projectOut" => Ok(UnstableModeControl::ProjectOut),
        _ => Err(format!("unknown unstable mode {s:?} (none, project-out)")),
    }
}

/// Settings from `--config`; command-line flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dim: Option<usize>,
    pub s: Option<f64>,
    pub lmax: Option<usize>,
    pub grid_degree: Option<usize>,
    pub eps: Option<Vec<f64>>,
    pub tau_end: Option<f64>,
    pub dt_safety: Option<f64>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
    pub metric: Option<String>,
    pub window: Option<String>,
    pub degrees: Option<Vec<usize>>,
    pub samples: Option<usize>,
    pub unstable_mode: Option<UnstableModeControl>,
    pub sample_interval: Option<f64>,
    pub track_distance: Option<bool>,
    pub lipschitz: Option<f64>,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// `flags` over `self`.
    pub fn overlay(self, flags: &Flags) -> Self {
        Self {
            dim: flags.dim.or(self.dim),
            s: flags.s.or(self.s),
            lmax: flags.lmax.or(self.lmax),
            grid_degree: flags.grid_degree.or(self.grid_degree),
            eps: flags.eps.clone().or(self.eps),
            tau_end: flags.tau_end.or(self.tau_end),
            dt_safety: flags.dt_safety.or(self.dt_safety),
            dt: flags.dt.or(self.dt),
            seed: flags.seed.or(self.seed),
            metric: flags.metric.clone().or(self.metric),
            window: flags.window.clone().or(self.window),
            degrees: flags.degrees.clone().or(self.degrees),
            samples: flags.samples.or(self.samples),
            unstable_mode: flags.unstable_mode.or(self.unstable_mode),
            sample_interval: flags.sample_interval.or(self.sample_interval),
            track_distance: if flags.track_distance {
                Some(true)
            } else {
                self.track_distance
            },
            lipschitz: flags.lipschitz.or(self.lipschitz),
            format: flags.format.or(self.format),
            output: flags.output.clone().or(self.output),
        }
    }

    fn params(&self) -> Result<ProblemParams> {
        ProblemParams::new(self.dim.unwrap_or(2), self.s.unwrap_or(0.5))
    }

    fn disc(&self, params: ProblemParams, default_lmax: usize) -> Result<Discretization> {
        let lmax = self.lmax.unwrap_or(default_lmax);
        match self.grid_degree {
            Some(g) => Discretization::with_grid_degree(params, lmax, g),
            None => Discretization::new(params, lmax),
        }
    }

    fn eps_or(&self, default: &[f64]) -> Vec<f64> {
        self.eps.clone().unwrap_or_else(|| default.to_vec())
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.unwrap_or(0))
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => 4,
        e if e.is_numerical() => 3,
        _ => 2,
    }
}

/// Parses `args` (program name first), runs the subcommand and writes its
/// table. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let base = match &cli.flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let cfg = base.overlay(&cli.flags);
    let table = build_table(&cli.command, &cfg)?;
    let format = cfg.format.unwrap_or(Format::Csv);
    match &cfg.output {
        Some(path) => {
            let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(f);
            table.write(format, &mut w)?;
            w.flush().map_err(|e| Error::Io(e.to_string()))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            table.write(format, &mut lock)?;
            lock.flush().map_err(|e| Error::Io(e.to_string()))
        }
    }
}

/// Runs one subcommand with resolved settings.
pub fn build_table(command: &Command, cfg: &RunConfig) -> Result<Table> {
    match command {
        Command::Constants => constants_table(cfg),
        Command::Spectrum => spectrum_table(cfg),
        Command::BubbleCheck => bubble_check_table(cfg),
        Command::Coercivity => coercivity_table(cfg),
        Command::Quotient => quotient_table(cfg),
        Command::Expansion => expansion_table(cfg),
        Command::Simulate => simulate_table(cfg),
        Command::Rate { trace } => rate_table(trace, cfg),
        Command::Interp => interp_table(cfg),
    }
}

fn schema(command: &Command) -> String {
    format!("{}/v1", command.name())
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|c| c.to_string()).collect()
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn param_echo(params: &ProblemParams) -> Value {
    json!({"dim": params.n(), "s": params.s()})
}

fn with_echo(mut base: Value, extra: Value) -> Value {
    if let (Some(b), Some(e)) = (base.as_object_mut(), extra.as_object()) {
        b.extend(e.clone());
    }
    base
}

fn constants_table(cfg: &RunConfig) -> Result<Table> {
    let params = cfg.params()?;
    let t = constant_table(&params);
    let checks = identity_checks(&params, 1e-12);
    let mut columns = cols(&[
        "sobolev",
        "bubble_amp",
        "gamma",
        "gamma_plus",
        "kappa1",
        "kappa2",
        "kappa3",
        "kappa_fde",
    ]);
    columns.extend((0..=6).map(|l| format!("mu{l}")));
    columns.extend(checks.iter().map(|c| format!("check_{}", c.name)));
    let mut table = Table::new(&schema(&Command::Constants), param_echo(&params), columns);
    let mut row = vec![
        t.sobolev,
        t.bubble_amp,
        t.gamma,
        t.gamma_plus,
        t.kappa1,
        t.kappa2,
        t.kappa3,
        t.kappa_fde,
    ];
    row.extend((0..=6).map(|l| mu(l, &params)));
    row.extend(checks.iter().map(|c| flag(c.pass)));
    table.push(row);
    Ok(table)
}

fn spectrum_table(cfg: &RunConfig) -> Result<Table> {
    let params = cfg.params()?;
    let lmax = cfg.lmax.unwrap_or(10);
    let echo = with_echo(param_echo(&params), json!({"lmax": lmax}));
    let mut columns = cols(&["degree", "alpha", "mu", "mu_minus_1", "gap"]);
    let show_mult = params.n() <= 2;
    if show_mult {
        columns.push("multiplicity".into());
    }
    let mut table = Table::new(&schema(&Command::Spectrum), echo, columns);
    let a1 = alpha(1, &params);
    for l in 0..=lmax {
        let a = alpha(l, &params);
        let mut row = vec![l as f64, a, mu(l, &params), mu(l, &params) - 1.0, 1.0 - a1 / a];
        if show_mult {
            row.push(degree_size(params.n(), l) as f64);
        }
        table.push(row);
    }
    Ok(table)
}

fn bubble_check_table(cfg: &RunConfig) -> Result<Table> {
    let params = cfg.params()?;
    let disc = cfg.disc(params, 32)?;
    let n = params.n();
    let echo = with_echo(
        param_echo(&params),
        json!({"lmax": disc.lmax(), "grid_degree": disc.grid().degree_bound()}),
    );
    let mut table = Table::new(
        &schema(&Command::BubbleCheck),
        echo,
        cols(&[
            "z1",
            "lambda",
            "hneg",
            "hs_norm",
            "ratio",
            "sobolev_quotient",
            "sobolev",
            "rel_error",
        ]),
    );
    let sobolev = constant_table(&params).sobolev;
    let mut shifted = vec![0.0; n];
    shifted[0] = 0.3;
    for b in [BubbleParams::standard(n), BubbleParams::new(shifted, 1.5)?] {
        let u = bubble_field(&b, &disc)?;
        let res = residual(&u, &disc);
        let hs = hs_norm(&u, &params);
        let lp = lp_norm(&u, params.two_star(), &disc);
        let q = hs * hs / (lp * lp);
        table.push(vec![
            b.z[0],
            b.lambda,
            res.hneg_norm,
            hs,
            res.hneg_norm / hs,
            q,
            sobolev,
            (q - sobolev).abs() / sobolev,
        ]);
    }
    Ok(table)
}

fn coercivity_table(cfg: &RunConfig) -> Result<Table> {
    let params = cfg.params()?;
    let disc = cfg.disc(params, 16)?;
    let lmax = disc.lmax();
    if lmax < 3 {
        return Err(Error::InvalidParams("coercivity needs lmax >= 3".into()));
    }
    let samples = cfg.samples.unwrap_or(200);
    let seed = cfg.seed.unwrap_or(0);
    let t = constant_table(&params);
    let echo = with_echo(
        param_echo(&params),
        json!({"lmax": lmax, "samples": samples, "seed": seed}),
    );
    let mut table = Table::new(
        &schema(&Command::Coercivity),
        echo,
        cols(&[
            "sample",
            "lo_degree",
            "hi_degree",
            "hs_norm_sq",
            "form",
            "ratio",
            "bound",
            "quadrature_gap",
            "pass",
        ]),
    );
    let mut rng = cfg.rng();
    let n = params.n();
    let mut cases = vec![(2, 2, t.gamma), (3, 3, t.gamma_plus)];
    cases.extend(std::iter::repeat_n((2, lmax, t.gamma), samples));
    for (k, (lo, hi, bound)) in cases.into_iter().enumerate() {
        let f = SphereField::random(n, lmax, &DegreeProjector::range(lo, hi), &mut rng)?;
        let norm_sq = hs_norm_sq(&f, &params);
        let form = coercivity_form(&f, &f, &params);
        let ratio = form / norm_sq;
        let quad = norm_sq - potential_term(&f, &disc);
        table.push(vec![
            k as f64,
            lo as f64,
            hi as f64,
            norm_sq,
            form,
            ratio,
            bound,
            (quad - form).abs() / norm_sq,
            flag(ratio >= bound - 1e-10),
        ]);
    }
    Ok(table)
}

fn quotient_table(cfg: &RunConfig) -> Result<Table> {
    let params = cfg.params()?;
    let disc = cfg.disc(params, 8)?;
    let eps = cfg.eps_or(&[0.04, 0.02, 0.01]);
    let degrees = cfg.degrees.clone().unwrap_or_else(|| vec![2]);
    let seed = cfg.seed.unwrap_or(0);
    if let Some(l) = degrees.iter().find(|l| **l > disc.lmax()) {
        return Err(Error::InvalidParams(format!("degree {l} exceeds lmax {}", disc.lmax())));
    }
    let n = params.n();
    let rho = SphereField::random(
        n,
        disc.lmax(),
        &DegreeProjector::new(degrees.iter().copied()),
        &mut cfg.rng(),
    )?;
    let rho = rho.scale(1.0 / hs_norm(&rho, &params));
    let reports = quotient_sequence(&rho, &eps, &disc)?;
    let echo = with_echo(
        param_echo(&params),
        json!({"lmax": disc.lmax(), "eps": eps, "degrees": degrees, "seed": seed}),
    );
    let mut columns = cols(&[
        "epsilon",
        "quotient",
        "quotient_sq",
        "hneg",
        "dist",
        "beta",
        "rho_norm",
        "v_total_norm",
        "lambda",
    ]);
    columns.extend((1..=n).map(|i| format!("z{i}")));
    columns.push("extrapolated".into());
    let mut table = Table::new(&schema(&Command::Quotient), echo, columns);
    for r in &reports {
        let mut row = vec![
            r.epsilon.unwrap_or(f64::NAN),
            r.quotient,
            r.quotient_sq(),
            r.hneg_norm,
            r.dist,
            r.beta,
            r.rho_norm,
            r.v_total_norm,
            r.bubble.lambda,
        ];
        row.extend(&r.bubble.z);
        row.push(0.0);
        table.push(row);
    }
    if reports.len() >= 2 {
        let q: Vec<f64> = reports.iter().map(|r| r.quotient).collect();
        let limit = extrapolate_to_zero(&eps, &q);
        let mut row = vec![0.0, limit, limit * limit];
        row.extend(std::iter::repeat_n(f64::NAN, 6 + n));
        row.push(1.0);
        table.push(row);
    }
    Ok(table)
}

fn expansion_table(cfg: &RunConfig) -> Result<Table> {
    let params = cfg.params()?;
    let disc = cfg.disc(params, 8)?;
    let eps = cfg.eps_or(&DEFAULT_EPS_LADDER);
    let rho = symmetric_test_field(&disc)?;
    let rep = expansion_experiment(&rho, &eps, &disc)?;
    let echo = with_echo(param_echo(&params), json!({"lmax": disc.lmax(), "eps": eps}));
    let mut table = Table::new(
        &schema(&Command::Expansion),
        echo,
        cols(&[
            "epsilon",
            "dist",
            "quotient_sq",
            "gamma_sq",
            "cubic_coefficient",
            "predicted_cubic",
            "moment_integral",
            "relative_error",
        ]),
    );
    let nan = f64::NAN;
    for s in &rep.samples {
        table.push(vec![s.epsilon, s.dist, s.quotient_sq, rep.gamma_sq, nan, nan, nan, nan]);
    }
    table.push(vec![
        0.0,
        0.0,
        rep.quadratic_term,
        rep.gamma_sq,
        rep.cubic_coefficient,
        rep.predicted_cubic,
        rep.moment_integral,
        rep.relative_error(),
    ]);
    Ok(table)
}

/// The flow configuration implied by `cfg`.
pub fn sim_config(cfg: &RunConfig) -> Result<SimConfig> {
    let params = ProblemParams::for_flow(cfg.dim.unwrap_or(2), cfg.s.unwrap_or(0.5))?;
    let eps = match cfg.eps.as_deref() {
        None => 1e-3,
        Some([e]) => *e,
        Some(list) => {
            return Err(Error::Config(format!(
                "simulate takes a single --eps value (got {})",
                list.len()
            )))
        }
    };
    let init = InitSpec {
        degrees: cfg.degrees.clone().unwrap_or_else(|| vec![2]),
        epsilon: eps,
        seed: cfg.seed.unwrap_or(0),
    };
    let lmax = cfg.lmax.unwrap_or(24);
    let mut sc = SimConfig::new(params, lmax, cfg.tau_end.unwrap_or(10.0), init);
    if let Some(g) = cfg.grid_degree {
        sc.grid_degree = g;
    }
    sc.dt = match (cfg.dt, cfg.dt_safety) {
        (Some(dt), _) => DtPolicy::Fixed { dt },
        (None, Some(safety)) => DtPolicy::Adaptive { safety },
        (None, None) => sc.dt,
    };
    if let Some(m) = cfg.unstable_mode {
        sc.unstable_mode = m;
    }
    if let Some(i) = cfg.sample_interval {
        sc.sample_interval = i;
    }
    sc.track_distance = cfg.track_distance.unwrap_or(false);
    sc.validate()?;
    Ok(sc)
}

fn simulate_table(cfg: &RunConfig) -> Result<Table> {
    let sc = sim_config(cfg)?;
    let mut table = fde::simulate(&sc)?.to_table();
    table.schema = schema(&Command::Simulate);
    Ok(table)
}

fn rate_table(path: &Path, cfg: &RunConfig) -> Result<Table> {
    let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut t = Table::read_csv(BufReader::new(f))?;
    if t.schema == schema(&Command::Simulate) {
        t.schema = fde::TRACE_SCHEMA.to_string();
    }
    let trace = SimTrace::from_table(&t)?;
    let params = match (&trace.config, cfg.dim.is_some() || cfg.s.is_some()) {
        (Some(c), false) => c.params,
        _ => cfg.params()?,
    };
    let metric: Metric = cfg.metric.as_deref().unwrap_or("hsError").parse()?;
    let window: Option<Window> = cfg.window.as_deref().map(str::parse).transpose()?;
    let fit = fde::rate_fit(&trace, metric, window, &params)?;
    let echo = with_echo(
        param_echo(&params),
        json!({"trace": path.display().to_string(), "metric": metric.to_string(), "window": cfg.window}),
    );
    let mut table = Table::new(
        &schema(&Command::Rate {
            trace: path.to_path_buf(),
        }),
        echo,
        cols(&[
            "kappa_hat",
            "window_start",
            "window_end",
            "samples",
            "rms_residual",
            "mu2_minus_1",
            "kappa2",
            "kappa3",
            "kappa_fde",
            "guaranteed",
            "consistent",
            "time_power",
        ]),
    );
    let c = fit.comparisons;
    table.push(vec![
        fit.kappa_hat,
        fit.window.start,
        fit.window.end,
        fit.samples as f64,
        fit.rms_residual,
        c.mu2_minus_1,
        c.kappa2,
        c.kappa3,
        c.kappa_fde,
        fit.guaranteed.unwrap_or(f64::NAN),
        fit.consistent.map_or(f64::NAN, flag),
        fit.time_power,
    ]);
    Ok(table)
}

fn interp_table(cfg: &RunConfig) -> Result<Table> {
    let params = cfg.params()?;
    let deltas = cfg.eps_or(&[0.4, 0.2, 0.1, 0.05, 0.025]);
    let lipschitz = cfg.lipschitz.unwrap_or(1.0);
    let nodes = cfg.samples.unwrap_or(400);
    let rows = cap_family(&params, &deltas, lipschitz, nodes)?;
    let echo = with_echo(
        param_echo(&params),
        json!({"deltas": deltas, "lipschitz": lipschitz, "radial_nodes": nodes}),
    );
    let mut table = Table::new(
        &schema(&Command::Interp),
        echo,
        cols(&["delta", "sup_norm", "lp_norm", "ratio", "flat_ratio", "drift"]),
    );
    for r in rows {
        table.push(vec![
            r.delta,
            r.report.sup_norm,
            r.report.lp_norm,
            r.report.ratio,
            r.flat_ratio,
            r.report.ratio / r.flat_ratio - 1.0,
        ]);
    }
    Ok(table)
}
