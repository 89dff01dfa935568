//! Run configuration: TOML sections with defaults, validation, and assembly
//! of the numerical problem.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::gas::{ConservedState, GasParams, DEFAULT_EPS};
use crate::grid::{BuiltinForcing, Forcing, Grid};
use crate::period_map::PicardSettings;
use crate::scheme::SchemeOptions;

/// Threshold on `M^{1+1/θ}‖F‖∞` above which a smallness warning is issued.
pub const FORCING_SMALLNESS_LIMIT: f64 = 0.1;
pub const OUTPUT_ENV: &str = "PERIODIC_EULER_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GasSection {
    pub gamma: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub eps: f64,
}

impl Default for GasSection {
    fn default() -> Self {
        Self { gamma: 1.4, big_m: 10.0, eps: DEFAULT_EPS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n_x: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n_x: 25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForcingSection {
    pub name: String,
    pub amplitude: f64,
}

impl Default for ForcingSection {
    fn default() -> Self {
        Self { name: "zero".into(), amplitude: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    /// `constant`, `bump` or `file`.
    pub name: String,
    pub rho_bar: f64,
    /// Relative bump amplitude, `|a| < 1`.
    pub a: f64,
    /// CSV with columns `rho,m`, one row per grid node.
    pub path: Option<PathBuf>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self { name: "constant".into(), rho_bar: 1.0, a: 0.1, path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub omega: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Vacuum-floor exponent; defaults to the midpoint of `(1, 1/(2θ))`.
    pub delta: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { omega: 0.5, tol: 1e-8, max_iter: 500, delta: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlagsSection {
    pub no_cutoff: bool,
    #[serde(rename = "freeze_L", alias = "freeze_l")]
    pub freeze_l: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Write every `snapshot_stride`-th level to the layers file.
    pub snapshot_stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), snapshot_stride: 1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gas: GasSection,
    pub grid: GridSection,
    pub forcing: ForcingSection,
    pub initial: InitialSection,
    pub solver: SolverSection,
    pub flags: FlagsSection,
    pub output: OutputSection,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Parse(String),
    #[error("invalid value: {0}")]
    Invalid(String),
    #[error("contradictory settings: {0}")]
    Contradictory(String),
    #[error("i/o: {0}")]
    Io(String),
}

/// Everything a command needs, built from a validated config.
#[derive(Debug)]
pub struct Problem {
    pub gp: GasParams<f64>,
    pub grid: Grid<f64>,
    pub forcing: BuiltinForcing<f64>,
    pub opts: SchemeOptions<f64>,
    pub picard: PicardSettings<f64>,
    /// Initial data sampled at `x_j`, `j = 0..=2N_x`.
    pub samples: Vec<ConservedState<f64>>,
    pub warnings: Vec<String>,
}

impl Problem {
    /// Initial data as a function of `x`: exact for builtins, piecewise linear
    /// through the samples for file data.
    pub fn initial_fn(&self, cfg: &InitialSection) -> impl Fn(f64) -> ConservedState<f64> + '_ {
        let kind = cfg.name.clone();
        let (rho_bar, a) = (cfg.rho_bar, cfg.a);
        let dx = self.grid.dx;
        move |x: f64| match kind.as_str() {
            "constant" => ConservedState { rho: rho_bar, m: 0.0 },
            "bump" => ConservedState { rho: bump(rho_bar, a, x), m: 0.0 },
            _ => {
                let s = &self.samples;
                let pos = (x / dx).clamp(0.0, (s.len() - 1) as f64);
                let k = (pos.floor() as usize).min(s.len() - 2);
                let f = pos - k as f64;
                ConservedState {
                    rho: s[k].rho * (1.0 - f) + s[k + 1].rho * f,
                    m: s[k].m * (1.0 - f) + s[k + 1].m * f,
                }
            }
        }
    }
}

fn bump(rho_bar: f64, a: f64, x: f64) -> f64 {
    rho_bar * (1.0 + a * (2.0 * std::f64::consts::PI * x).sin())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("reading {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Directory for outputs, rooted at `$PERIODIC_EULER_OUT` when set and the
    /// configured directory is relative.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ENV) {
            Some(root) if self.output.directory.is_relative() => PathBuf::from(root).join(&self.output.directory),
            _ => self.output.directory.clone(),
        }
    }

    /// Range checks and cross-validation, then assembly of the problem.
    pub fn build(&self) -> Result<Problem, ConfigError> {
        let inv = |s: String| Err(ConfigError::Invalid(s));
        let g = &self.gas;
        if !(g.gamma > 1.0 && g.gamma <= 5.0 / 3.0) {
            return inv(format!("gas.gamma = {} outside (1, 5/3]", g.gamma));
        }
        if !(g.big_m > 0.0 && g.big_m.is_finite()) {
            return inv(format!("gas.M = {} must be positive and finite", g.big_m));
        }
        if !(g.eps > 0.0 && g.eps.is_finite()) {
            return inv(format!("gas.eps = {} must be positive", g.eps));
        }
        if !(self.forcing.amplitude >= 0.0 && self.forcing.amplitude.is_finite()) {
            return inv(format!("forcing.amplitude = {} must be finite and nonnegative", self.forcing.amplitude));
        }
        let s = &self.solver;
        if !(s.omega > 0.0 && s.omega <= 1.0) {
            return inv(format!("solver.omega = {} outside (0, 1]", s.omega));
        }
        if !(s.tol > 0.0) {
            return inv(format!("solver.tol = {} must be positive", s.tol));
        }
        if s.max_iter == 0 {
            return inv("solver.max_iter must be at least 1".into());
        }
        if self.output.snapshot_stride == 0 {
            return inv("output.snapshot_stride must be at least 1".into());
        }
        if self.flags.no_cutoff && self.flags.freeze_l {
            return Err(ConfigError::Contradictory(
                "flags.freeze_L only affects the cutoff band and cannot be combined with flags.no_cutoff".into(),
            ));
        }
        let forcing = BuiltinForcing::from_name(&self.forcing.name, self.forcing.amplitude)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.grid.n_x < 2 {
            return inv(format!("grid.n_x = {} must be at least 2", self.grid.n_x));
        }

        let nodes = 2 * self.grid.n_x + 1;
        let samples = self.initial_samples(nodes)?;
        let gp = GasParams::from_samples(g.gamma, g.eps, g.big_m, &samples)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let grid = Grid::build(self.grid.n_x, &gp).map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let mut opts = SchemeOptions::new(&gp);
        opts.cutoff = !self.flags.no_cutoff;
        opts.freeze_l = self.flags.freeze_l;
        if let Some(d) = s.delta {
            let upper = 1.0 / (2.0 * gp.theta);
            if !(d > 1.0 && d < upper) {
                return inv(format!("solver.delta = {d} outside (1, {upper})"));
            }
            opts.delta = d;
        }

        let mut warnings = Vec::new();
        let smallness = gp.forcing_smallness(forcing.amplitude());
        if smallness > FORCING_SMALLNESS_LIMIT {
            warnings.push(format!(
                "forcing smallness M^(1+1/theta)*|F| = {smallness:.4e} exceeds {FORCING_SMALLNESS_LIMIT}; \
                 the band is not guaranteed invariant"
            ));
        }
        let band = self.initial_band_violations(&gp, &samples);
        if band > 0 {
            warnings.push(format!("initial data leave the band |z|,|w| <= M + I at {band} sample(s); increase M"));
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(Problem {
            gp,
            grid,
            forcing,
            opts,
            picard: PicardSettings { omega: s.omega, tol: s.tol, max_iter: s.max_iter },
            samples,
            warnings,
        })
    }

    fn initial_samples(&self, nodes: usize) -> Result<Vec<ConservedState<f64>>, ConfigError> {
        let ini = &self.initial;
        let check_rho_bar = || {
            if ini.rho_bar > 0.0 && ini.rho_bar.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("initial.rho_bar = {} must be positive", ini.rho_bar)))
            }
        };
        let xs = (0..nodes).map(|j| j as f64 / (nodes - 1) as f64);
        match ini.name.as_str() {
            "constant" => {
                check_rho_bar()?;
                Ok(xs.map(|_| ConservedState { rho: ini.rho_bar, m: 0.0 }).collect())
            }
            "bump" => {
                check_rho_bar()?;
                if !(ini.a.abs() < 1.0) {
                    return Err(ConfigError::Invalid(format!("initial.a = {} must satisfy |a| < 1", ini.a)));
                }
                Ok(xs.map(|x| ConservedState { rho: bump(ini.rho_bar, ini.a, x), m: 0.0 }).collect())
            }
            "file" => {
                let path = ini
                    .path
                    .as_ref()
                    .ok_or_else(|| ConfigError::Invalid("initial.name = \"file\" needs initial.path".into()))?;
                let samples = read_initial_csv(path)?;
                if samples.len() != nodes {
                    return Err(ConfigError::Invalid(format!(
                        "initial data file {} has {} rows but the grid has {nodes} nodes (2*n_x + 1)",
                        path.display(),
                        samples.len()
                    )));
                }
                Ok(samples)
            }
            other => Err(ConfigError::Invalid(format!(
                "initial.name = '{other}' (expected constant, bump or file)"
            ))),
        }
    }

    fn initial_band_violations(&self, gp: &GasParams<f64>, samples: &[ConservedState<f64>]) -> usize {
        let h = 1.0 / (samples.len() - 1) as f64;
        let mut i = 0.0;
        let mut count = 0;
        for (k, u) in samples.iter().enumerate() {
            if k > 0 {
                i += 0.5 * h * (gp.zeta(&samples[k - 1]) + gp.zeta(u));
            }
            let p = gp.to_invariants(u);
            if p.z < -gp.big_m + i || p.w > gp.big_m + i {
                count += 1;
            }
        }
        count
    }
}

/// Reads `rho,m` rows (header optional).
pub fn read_initial_csv(path: &Path) -> Result<Vec<ConservedState<f64>>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io(format!("reading {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if line_no == 0 && fields.first().is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let bad = || ConfigError::Invalid(format!("{}:{}: expected 'rho,m'", path.display(), line_no + 1));
        if fields.len() != 2 {
            return Err(bad());
        }
        let rho: f64 = fields[0].parse().map_err(|_| bad())?;
        let m: f64 = fields[1].parse().map_err(|_| bad())?;
        let u = ConservedState::new(rho, m)
            .map_err(|e| ConfigError::Invalid(format!("{}:{}: {e}", path.display(), line_no + 1)))?;
        out.push(u);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_toml_str("[gas]\ngamma = 1.4\n[grid]\nn_x = 25\n[forcing]\nname = \"zero\"\n").unwrap();
        assert_eq!(c.gas.big_m, 10.0);
        assert_eq!(c.solver, SolverSection::default());
        let p = c.build().unwrap();
        assert_eq!(p.grid.n_x, 25);
        assert_eq!(p.grid.n_t, 21 * 25);
        assert!((p.gp.rho_bar - 1.0).abs() < 1e-15);
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn guards() {
        let c = RunConfig::from_toml_str("[gas]\ngamma = 1.8\n").unwrap();
        assert!(matches!(c.build(), Err(ConfigError::Invalid(m)) if m.contains("gamma")));
        assert!(matches!(RunConfig::from_toml_str("[gas]\ngama = 1.4\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(RunConfig::from_toml_str("[extra]\n"), Err(ConfigError::Parse(_))));
        let c = RunConfig::from_toml_str("[flags]\nno_cutoff = true\nfreeze_L = true\n").unwrap();
        assert!(matches!(c.build(), Err(ConfigError::Contradictory(_))));
        let c = RunConfig::from_toml_str("[initial]\nname = \"bump\"\na = 1.0\n").unwrap();
        assert!(matches!(c.build(), Err(ConfigError::Invalid(_))));
        let c = RunConfig::from_toml_str("[forcing]\nname = \"wind\"\n").unwrap();
        assert!(matches!(c.build(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn smallness_warning() {
        let c = RunConfig::from_toml_str("[forcing]\nname = \"sin_t\"\namplitude = 0.01\n").unwrap();
        let p = c.build().unwrap();
        assert_eq!(p.warnings.len(), 1);
        assert!(p.warnings[0].contains("smallness"));
    }

    #[test]
    fn file_initial_data_length_mismatch_names_both() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u0.csv");
        std::fs::write(&path, "rho,m\n1.0,0.0\n1.0,0.0\n1.0,0.0\n").unwrap();
        let mut c = RunConfig::default();
        c.grid.n_x = 2;
        c.initial.name = "file".into();
        c.initial.path = Some(path.clone());
        let err = c.build().unwrap_err().to_string();
        assert!(err.contains(" 3 rows") && err.contains("5 nodes"), "{err}");
        std::fs::write(&path, "1.0,0.0\n1.0,0.1\n1.0,0.0\n1.0,-0.1\n1.0,0.0\n").unwrap();
        let p = c.build().unwrap();
        let f = p.initial_fn(&c.initial);
        assert!((f(0.125).m - 0.05).abs() < 1e-15);
        c.initial.path = Some(dir.path().join("missing.csv"));
        assert!(matches!(c.build(), Err(ConfigError::Io(_))));
    }
}
