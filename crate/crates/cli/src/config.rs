//! Scenario configuration files (TOML) and `--set` overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wavelab::diagnostics::{gain_exponents, MonitorConfig};
use wavelab::dn::{DnConfig, MapMode};
use wavelab::waterwaves::{PhysicalParams, RhsForm, SurfaceState, WaveModel};
use wavelab::{Field, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    FlatDnValidation,
    Dispersion,
    Conservation,
    ParalinResidual,
    SymbolCalculus,
    SymmetrizerRun,
    BlowupWatch,
    Contraction,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::FlatDnValidation,
        Scenario::Dispersion,
        Scenario::Conservation,
        Scenario::ParalinResidual,
        Scenario::SymbolCalculus,
        Scenario::SymmetrizerRun,
        Scenario::BlowupWatch,
        Scenario::Contraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::FlatDnValidation => "flat_dn_validation",
            Scenario::Dispersion => "dispersion",
            Scenario::Conservation => "conservation",
            Scenario::ParalinResidual => "paralin_residual",
            Scenario::SymbolCalculus => "symbol_calculus",
            Scenario::SymmetrizerRun => "symmetrizer_run",
            Scenario::BlowupWatch => "blowup_watch",
            Scenario::Contraction => "contraction",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Scenario::FlatDnValidation => "strip DN operator at a flat surface against k tanh(hk)",
            Scenario::Dispersion => "small-amplitude run, frequency of the first mode against the linear relation",
            Scenario::Conservation => "Hamiltonian, mass and rms along a run",
            Scenario::ParalinResidual => "paralinearization residual of G(eta)psi under dyadic smoothing of eta",
            Scenario::SymbolCalculus => "order fits of the composition law and the symmetrizer relations",
            Scenario::SymmetrizerRun => "paralinearized and symmetrized residuals and the weighted energy along a run",
            Scenario::BlowupWatch => "blow-up monitors, Sobolev/Strichartz tracks and the growth audit",
            Scenario::Contraction => "difference of two nearby solutions",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    #[default]
    Linear,
    Smoothing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FormKind {
    #[default]
    Zakharov,
    Velocity,
    Variational,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub n: usize,
    /// Strip levels; defaults to `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default)]
    pub flat_correction: bool,
    #[serde(default)]
    pub map: MapKind,
}

fn default_dim() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    #[serde(default = "one")]
    pub g: f64,
    #[serde(default = "one")]
    pub h: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        PhysicsSection { g: 1.0, h: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "one")]
    pub t_end: f64,
    #[serde(default = "yes")]
    pub dealias: bool,
    #[serde(default)]
    pub form: FormKind,
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Full-state snapshot every this many recorded samples; 0 disables.
    #[serde(default)]
    pub snapshots: usize,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_stride() -> usize {
    1
}

impl Default for NumericsSection {
    fn default() -> Self {
        NumericsSection { dt: 1e-3, t_end: 1.0, dealias: true, form: FormKind::Zakharov, stride: 1, snapshots: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MonitorSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_star: Option<f64>,
}

/// One Fourier mode: `η += eta·cos(k·x + phase)`, `ψ += psi·cos(k·x + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub k: Vec<i64>,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub psi: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub modes: Vec<Mode>,
    /// Node files in the format written by `write_field`; added to the modes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    pub delta: f64,
    pub k: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSection,
    #[serde(default)]
    pub physics: PhysicsSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub monitor: MonitorSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSection>,
}

/// A configuration problem with the dotted key it concerns.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() { write!(f, "{}", self.message) } else { write!(f, "{}: {}", self.path, self.message) }
    }
}

impl std::error::Error for ConfigError {}

fn err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { path: path.into(), message: message.into() }
}

/// Parses `key=value` into a dotted path and a TOML value. Values that are
/// not valid TOML literals are taken as strings.
pub fn parse_assignment(s: &str) -> Result<(Vec<String>, toml::Value), ConfigError> {
    let (key, raw) = s.split_once('=').ok_or_else(|| err("", format!("expected key=value, got {s:?}")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(err(key, "empty key segment"));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key.split('.').map(String::from).collect(), value))
}

fn apply_assignment(root: &mut toml::Table, path: &[String], value: toml::Value) -> Result<(), ConfigError> {
    let mut table = root;
    for (i, seg) in path[..path.len() - 1].iter().enumerate() {
        let entry = table.entry(seg.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| err(&path[..=i].join("."), "is not a table"))?;
    }
    table.insert(path[path.len() - 1].clone(), value);
    Ok(())
}

impl ScenarioConfig {
    /// Parses TOML text, applies `overrides` in order, then validates.
    pub fn parse_with(text: &str, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| err("", e.message().to_string()))?;
        for o in overrides {
            let (path, value) = parse_assignment(o)?;
            apply_assignment(&mut table, &path, value)?;
        }
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
            let path = e.path().to_string();
            err(if path == "." { "" } else { &path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
        ScenarioConfig::parse_with(text, &[])
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| err("", format!("{}: {e}", path.display())))?;
        let mut cfg = ScenarioConfig::parse_with(&text, overrides)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for f in [&mut cfg.initial.eta_file, &mut cfg.initial.psi_file].into_iter().flatten() {
            if f.is_relative() {
                *f = base.join(&*f);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if g.dim != 1 && g.dim != 2 {
            return Err(err("grid.dim", format!("must be 1 or 2, got {}", g.dim)));
        }
        if g.n < 4 || !g.n.is_power_of_two() {
            return Err(err("grid.n", format!("must be a power of two >= 4, got {}", g.n)));
        }
        let m = g.m.unwrap_or(g.n);
        if m < 8 {
            return Err(err("grid.m", format!("strip resolution must be at least 8, got {m}")));
        }
        let p = &self.physics;
        if !(p.h > 0.0) || !p.h.is_finite() {
            return Err(err("physics.h", format!("must be positive, got {}", p.h)));
        }
        if !(p.g >= 0.0) || !p.g.is_finite() {
            return Err(err("physics.g", format!("must be nonnegative, got {}", p.g)));
        }
        let nu = &self.numerics;
        if !(nu.dt > 0.0) {
            return Err(err("numerics.dt", format!("must be positive, got {}", nu.dt)));
        }
        if !(nu.t_end >= 0.0) || !nu.t_end.is_finite() {
            return Err(err("numerics.t_end", format!("must be nonnegative, got {}", nu.t_end)));
        }
        if nu.stride == 0 {
            return Err(err("numerics.stride", "must be at least 1"));
        }
        let mc = self.monitor_config();
        mc.validate(g.dim).map_err(|e| err("monitor", e.to_string()))?;
        let half = (g.n / 2) as i64;
        for (i, m) in self.initial.modes.iter().enumerate() {
            check_k(&format!("initial.modes[{i}].k"), &m.k, g.dim, half)?;
            for (name, v) in [("eta", m.eta), ("psi", m.psi), ("phase", m.phase)] {
                if !v.is_finite() {
                    return Err(err(&format!("initial.modes[{i}].{name}"), "must be finite"));
                }
            }
        }
        match (&self.perturbation, self.scenario) {
            (None, Scenario::Contraction) => return Err(err("perturbation", "required by the contraction scenario")),
            (Some(pt), _) => {
                check_k("perturbation.k", &pt.k, g.dim, half)?;
                if !pt.delta.is_finite() {
                    return Err(err("perturbation.delta", "must be finite"));
                }
            }
            _ => {}
        }
        if self.scenario == Scenario::Contraction {
            let (mu, _) = gain_exponents(g.dim);
            if !(mc.r < mc.s - g.dim as f64 / 2.0 + mu) {
                return Err(err("monitor.r", format!("must satisfy r < s - d/2 + {mu}")));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.grid.dim, self.grid.n).expect("validated grid")
    }

    pub fn params(&self) -> PhysicalParams {
        PhysicalParams { g: self.physics.g, h: self.physics.h }
    }

    pub fn dn_config(&self) -> DnConfig {
        let mode = match self.grid.map {
            MapKind::Linear => MapMode::Linear,
            MapKind::Smoothing => MapMode::Smoothing,
        };
        DnConfig {
            h: self.physics.h,
            m: self.grid.m.unwrap_or(self.grid.n),
            mode,
            flat_correction: self.grid.flat_correction,
            ..DnConfig::default()
        }
    }

    pub fn model(&self) -> wavelab::Result<WaveModel> {
        let form = match self.numerics.form {
            FormKind::Zakharov => RhsForm::Zakharov,
            FormKind::Velocity => RhsForm::Velocity,
            FormKind::Variational => RhsForm::Variational,
        };
        Ok(WaveModel::new(self.params(), self.dn_config())?.with_form(form).with_dealias(self.numerics.dealias))
    }

    pub fn monitor_config(&self) -> MonitorConfig {
        let mut mc = MonitorConfig::for_dim(self.grid.dim);
        let m = &self.monitor;
        mc.s = m.s.unwrap_or(mc.s);
        mc.r = m.r.unwrap_or(mc.r);
        mc.eps = m.eps.unwrap_or(mc.eps);
        mc.eps_star = m.eps_star.unwrap_or(mc.eps_star);
        mc.stride = self.numerics.stride;
        mc
    }

    pub fn initial_state(&self) -> anyhow::Result<SurfaceState> {
        let grid = self.grid();
        let modes = &self.initial.modes;
        let build = |amp: fn(&Mode) -> f64| {
            Field::from_fn(grid, |x| {
                modes
                    .iter()
                    .map(|m| {
                        let k1 = m.k.get(1).copied().unwrap_or(0) as f64;
                        amp(m) * (m.k[0] as f64 * x[0] + k1 * x[1] + m.phase).cos()
                    })
                    .sum()
            })
        };
        let mut eta = build(|m| m.eta);
        let mut psi = build(|m| m.psi);
        for (file, target) in [(&self.initial.eta_file, &mut eta), (&self.initial.psi_file, &mut psi)] {
            if let Some(path) = file {
                let f = std::fs::File::open(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
                let u = wavelab::spectral::read_field(std::io::BufReader::new(f))?;
                grid.check_same(&u.grid())?;
                *target = &*target + &u.real_part();
            }
        }
        Ok(SurfaceState::new(eta, psi)?)
    }
}

fn check_k(path: &str, k: &[i64], dim: usize, half: i64) -> Result<(), ConfigError> {
    if k.len() != dim {
        return Err(err(path, format!("needs {dim} components, got {}", k.len())));
    }
    if k.iter().any(|c| c.abs() >= half) {
        return Err(err(path, format!("components must satisfy |k| < {half}")));
    }
    Ok(())
}
