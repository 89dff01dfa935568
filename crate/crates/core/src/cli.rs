//! Command-line front end: `run`, `periodic`, `sweep` and `check`.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::config::{ConfigError, Problem, RunConfig};
use crate::diagnostics::{self, band_check, mass_energy};
use crate::error::Error;
use crate::output::{self, Certificate, SweepRow};
use crate::period_map::{encode, fixed_point, PeriodMap};
use crate::scheme::{init_layer, Layer, Scheme};

pub mod exit {
    pub const OK: i32 = 0;
    pub const INVALID: i32 = 2;
    pub const INSTABILITY: i32 = 3;
    pub const IO: i32 = 4;
    pub const NOT_CONVERGED: i32 = 5;
    pub const CONFIG_SYNTAX: i32 = 6;
    pub const CONTRADICTORY: i32 = 7;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numeric(#[from] Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(ConfigError::Parse(_)) => exit::CONFIG_SYNTAX,
            Self::Config(ConfigError::Invalid(_)) => exit::INVALID,
            Self::Config(ConfigError::Contradictory(_)) => exit::CONTRADICTORY,
            Self::Config(ConfigError::Io(_)) | Self::Io(_) => exit::IO,
            Self::Numeric(Error::Config(_) | Error::Domain(_)) => exit::INVALID,
            Self::Numeric(_) => exit::INSTABILITY,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "periodic-euler", version, about = "Time-periodic isentropic gas flow in a closed tube")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve the initial data over one forcing period.
    Run(Common),
    /// Search for a time-periodic solution by iterating the period map.
    Periodic(Common),
    /// Evaluate the period map once per value of a parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Comma-separated values, at least two.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Validate a configuration and print the derived parameters.
    Check(Common),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    #[value(name = "n_x")]
    NX,
    Amplitude,
    Gamma,
}

/// Config file plus overrides mirroring its keys.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML configuration; defaults are used for anything missing.
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long = "M")]
    pub big_m: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub n_x: Option<usize>,
    #[arg(long)]
    pub forcing: Option<String>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub initial: Option<String>,
    #[arg(long)]
    pub rho_bar: Option<f64>,
    #[arg(long)]
    pub bump_a: Option<f64>,
    #[arg(long)]
    pub initial_path: Option<PathBuf>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub no_cutoff: bool,
    #[arg(long = "freeze-L", alias = "freeze-l")]
    pub freeze_l: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub snapshot_stride: Option<usize>,
}

impl Common {
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_path(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($src:expr, $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(self.gamma, c.gas.gamma);
        set!(self.big_m, c.gas.big_m);
        set!(self.eps, c.gas.eps);
        set!(self.n_x, c.grid.n_x);
        set!(self.forcing, c.forcing.name);
        set!(self.amplitude, c.forcing.amplitude);
        set!(self.initial, c.initial.name);
        set!(self.rho_bar, c.initial.rho_bar);
        set!(self.bump_a, c.initial.a);
        set!(self.omega, c.solver.omega);
        set!(self.tol, c.solver.tol);
        set!(self.max_iter, c.solver.max_iter);
        set!(self.out, c.output.directory);
        set!(self.snapshot_stride, c.output.snapshot_stride);
        if self.initial_path.is_some() {
            c.initial.path = self.initial_path.clone();
        }
        if self.delta.is_some() {
            c.solver.delta = self.delta;
        }
        c.flags.no_cutoff |= self.no_cutoff;
        c.flags.freeze_l |= self.freeze_l;
        Ok(c)
    }
}

pub fn dispatch(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Run(c) => c.load().and_then(|cfg| cmd_run(&cfg)),
        Command::Periodic(c) => c.load().and_then(|cfg| cmd_periodic(&cfg)),
        Command::Sweep { common, axis, values } => common.load().and_then(|cfg| cmd_sweep(&cfg, axis, &values)),
        Command::Check(c) => c.load().and_then(|cfg| cmd_check(&cfg)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn start_layer(cfg: &RunConfig, p: &Problem) -> Result<Layer<f64>, CliError> {
    Ok(init_layer(p.initial_fn(&cfg.initial), &p.grid, &p.gp)?)
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

pub fn cmd_check(cfg: &RunConfig) -> Result<i32, CliError> {
    let p = cfg.build()?;
    let g = &p.grid;
    println!("config ok");
    println!("grid: n_x = {}, n_t = {}, dx = {}, dt = {}, levels = {}", g.n_x, g.n_t, g.dx, g.dt, g.levels());
    println!(
        "gas: gamma = {}, K = {}, alpha = {}, rho_bar = {}, E0 = {}",
        p.gp.gamma, p.gp.k, p.gp.alpha_zeta, p.gp.rho_bar, p.gp.energy0
    );
    println!("vacuum floor: dx^{} = {:e}", p.opts.delta, g.dx.powf(p.opts.delta));
    for w in &p.warnings {
        println!("warning: {w}");
    }
    Ok(exit::OK)
}

pub fn cmd_run(cfg: &RunConfig) -> Result<i32, CliError> {
    let p = cfg.build()?;
    let dir = output_dir(cfg)?;
    let scheme = Scheme::with_options(&p.gp, &p.forcing, p.opts);
    let mut layer = start_layer(cfg, &p)?;
    let stride = cfg.output.snapshot_stride;
    let last = p.grid.levels();

    let mut layers = output::create(&dir.join("layers.csv"))?;
    writeln!(layers, "{}", output::LAYERS_HEADER)?;
    output::write_layer_rows(&mut layers, &layer, &p.gp)?;
    let mut records = vec![diagnostics::record(&layer, 0.0, 0, scheme.cfl_number(&layer), scheme.band_l(&layer), &p.gp)?];
    let (mass0, energy0) = mass_energy(&layer, &p.gp);
    let mut cut_total = 0;
    let mut failure = None;
    for n in 1..=last {
        match scheme.step(&layer) {
            Ok(out) => {
                layer = out.layer;
                cut_total += out.cut_nodes;
                records.push(diagnostics::record(
                    &layer,
                    out.l_increment,
                    out.cut_nodes,
                    out.cfl,
                    scheme.band_l(&layer),
                    &p.gp,
                )?);
                if n % stride == 0 || n == last {
                    output::write_layer_rows(&mut layers, &layer, &p.gp)?;
                }
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    layers.flush()?;
    let mut diag = output::create(&dir.join("diagnostics.jsonl"))?;
    output::write_jsonl(&mut diag, &records)?;
    diag.flush()?;

    let (mass1, energy1) = mass_energy(&layer, &p.gp);
    let min_margin = records.iter().map(|r| r.band_margin_min).fold(f64::INFINITY, f64::min);
    let mut summary = output::create(&dir.join("summary.csv"))?;
    writeln!(summary, "{}", output::SUMMARY_HEADER)?;
    writeln!(
        summary,
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        p.grid.n_x,
        p.grid.n_t,
        output::num(p.grid.dx),
        output::num(p.grid.dt),
        output::num(mass0),
        output::num(mass1),
        output::num((mass1 - mass0) / mass0),
        output::num(energy0),
        output::num(energy1),
        output::num(layer.l_val),
        output::num(min_margin),
        cut_total,
        p.warnings.len()
    )?;
    summary.flush()?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    println!("run complete: {} levels, relative mass drift {:e}", last, (mass1 - mass0) / mass0);
    Ok(exit::OK)
}

pub fn cmd_periodic(cfg: &RunConfig) -> Result<i32, CliError> {
    let p = cfg.build()?;
    let dir = output_dir(cfg)?;
    let layer0 = start_layer(cfg, &p)?;
    let map = PeriodMap::new(&p.gp, &p.forcing, p.opts, p.grid);
    let report = fixed_point(&map, encode(&layer0, &p.gp)?, p.picard)?;

    let mut trace = output::create(&dir.join("fixed_point_trace.csv"))?;
    output::write_trace(&mut trace, &report.trace)?;
    trace.flush()?;
    let mut layers = output::create(&dir.join("periodic_layers.csv"))?;
    writeln!(layers, "{}", output::LAYERS_HEADER)?;
    output::write_layer_rows(&mut layers, &report.start, &p.gp)?;
    output::write_layer_rows(&mut layers, &report.end, &p.gp)?;
    layers.flush()?;

    let periodicity_sup = report
        .start
        .values
        .iter()
        .zip(&report.end.values)
        .map(|(a, b)| (a.rho - b.rho).abs().max((a.m - b.m).abs()))
        .fold(0.0, f64::max);
    let (mass, _) = mass_energy(&report.start, &p.gp);
    let cert = Certificate {
        schema_version: output::SCHEMA_VERSION,
        converged: report.converged,
        diverged: report.diverged,
        iterations: report.iterations,
        residual: report.residual_history.last().copied().unwrap_or(f64::NAN),
        tol: p.picard.tol,
        omega: p.picard.omega,
        contraction_factor: report.contraction_factor,
        band_margin_min_start: band_check(&report.start, 0.0, &p.gp).min_margin,
        band_margin_min_end: band_check(&report.end, map.scheme.band_l(&report.end), &p.gp).min_margin,
        band_ok: report.band_ok,
        mass,
        rho_bar: p.gp.rho_bar,
        mass_ok: report.mass_ok,
        periodicity_sup,
        warnings: p.warnings.clone(),
    };
    let mut f = output::create(&dir.join("certificate.json"))?;
    serde_json::to_writer_pretty(&mut f, &cert).map_err(std::io::Error::from)?;
    writeln!(f)?;
    f.flush()?;
    if report.converged {
        println!("converged after {} iteration(s), residual {:e}", report.iterations, cert.residual);
        Ok(exit::OK)
    } else {
        println!("not converged after {} iteration(s), residual {:e}", report.iterations, cert.residual);
        Ok(exit::NOT_CONVERGED)
    }
}

fn sweep_one(cfg: &RunConfig, axis: SweepAxis, value: f64) -> Result<SweepRow, CliError> {
    let mut cfg = cfg.clone();
    match axis {
        SweepAxis::NX => {
            if value.fract() != 0.0 || value < 2.0 {
                return Err(ConfigError::Invalid(format!("n_x sweep value {value} is not an integer ≥ 2")).into());
            }
            cfg.grid.n_x = value as usize;
        }
        SweepAxis::Amplitude => cfg.forcing.amplitude = value,
        SweepAxis::Gamma => cfg.gas.gamma = value,
    }
    let clock = Instant::now();
    let p = cfg.build()?;
    let layer0 = start_layer(&cfg, &p)?;
    let map = PeriodMap::new(&p.gp, &p.forcing, p.opts, p.grid);
    let p0 = encode(&layer0, &p.gp)?;
    let ev = map.evaluate(&p0)?;
    let (m0, _) = mass_energy(&ev.start, &p.gp);
    let (m1, _) = mass_energy(&ev.end, &p.gp);
    Ok(SweepRow {
        value,
        residual: ev.image.sup_distance(&p0),
        mass_drift: (m1 - m0).abs() / m0,
        min_band_margin: ev.trace.records.iter().map(|r| r.band_margin_min).fold(f64::INFINITY, f64::min),
        runtime_s: clock.elapsed().as_secs_f64(),
    })
}

pub fn cmd_sweep(cfg: &RunConfig, axis: SweepAxis, values: &[f64]) -> Result<i32, CliError> {
    if values.len() < 2 {
        return Err(ConfigError::Invalid(format!("sweep needs at least two values, got {}", values.len())).into());
    }
    cfg.build()?;
    let dir = output_dir(cfg)?;
    let results: Vec<_> = values.par_iter().map(|&v| sweep_one(cfg, axis, v)).collect();
    let mut rows = Vec::with_capacity(values.len());
    let mut first_err = None;
    for (v, r) in values.iter().zip(results) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                eprintln!("sweep value {v}: {e}");
                rows.push(SweepRow {
                    value: *v,
                    residual: f64::NAN,
                    mass_drift: f64::NAN,
                    min_band_margin: f64::NAN,
                    runtime_s: f64::NAN,
                });
                first_err.get_or_insert(e);
            }
        }
    }
    let mut f = output::create(&dir.join("sweep.csv"))?;
    output::write_sweep(&mut f, &rows)?;
    f.flush()?;
    match first_err {
        Some(e) => Err(e),
        None => Ok(exit::OK),
    }
}
