//! Scenario files: flat `section.key = value` lines, `#` comments.
//!
//! Keys before the first `scenario = <name>` line are shared defaults; each
//! `scenario` line starts a new scenario that inherits them.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use qbm_core::coefficients::{GasParameters, TMatrixModel, Table};
use qbm_core::hilbert::{BasisConfig, C64};
use qbm_core::integrator::{Hermitize, IntegratorConfig, StepMode};
use qbm_core::master_equation::{GeneratorForm, HamiltonianSpec};

pub const DEFAULT_DIM: usize = 30;
pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_T_END: f64 = 10.0;
pub const DEFAULT_RECORD_EVERY: usize = 10;

const KEYS: &[&str] = &[
    "gas.m",
    "gas.beta",
    "gas.n",
    "particle.mass",
    "tmatrix.model",
    "tmatrix.t0",
    "tmatrix.sigma",
    "tmatrix.file",
    "tmatrix.forward_amplitude",
    "hamiltonian.kind",
    "hamiltonian.omega",
    "generator.form",
    "basis.dim",
    "basis.omega_ref",
    "basis.hbar",
    "initial.state",
    "initial.n",
    "initial.alpha_re",
    "initial.alpha_im",
    "initial.beta_eff",
    "initial.r",
    "integrator.dt",
    "integrator.t_end",
    "integrator.mode",
    "integrator.rel_tol",
    "integrator.abs_tol",
    "integrator.record_every",
    "integrator.hermitize",
    "output.csv",
    "output.json",
    "output.report",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based; 0 for whole-file problems.
    pub line: usize,
    pub key: String,
    pub reason: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.key.is_empty()) {
            (0, _) => write!(f, "{}", self.reason),
            (line, true) => write!(f, "line {line}: {}", self.reason),
            (line, false) => write!(f, "line {line}: {}: {}", self.key, self.reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Fock(usize),
    Coherent(C64),
    Thermal(f64),
    Squeezed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub report: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub gas: GasParameters,
    pub mass: f64,
    pub tmatrix: TMatrixModel,
    pub forward_amplitude: f64,
    pub hamiltonian: HamiltonianSpec,
    pub form: GeneratorForm,
    pub basis: BasisConfig,
    pub initial: InitialState,
    pub integrator: IntegratorConfig,
    pub outputs: Outputs,
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

struct Block {
    name: String,
    line: usize,
    entries: BTreeMap<String, Entry>,
}

/// Parse every scenario in `text`. Relative `tmatrix.file` paths resolve
/// against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<Vec<Scenario>, ConfigErrors> {
    let mut errors = Vec::new();
    let mut defaults: BTreeMap<String, Entry> = BTreeMap::new();
    let mut blocks: Vec<Block> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            errors.push(ConfigError {
                line,
                key: String::new(),
                reason: "expected `key = value`".into(),
            });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if key == "scenario" {
            if let Err(reason) = check_name(value) {
                errors.push(ConfigError {
                    line,
                    key: key.into(),
                    reason,
                });
            } else if let Some(prev) = blocks.iter().find(|b| b.name == value) {
                errors.push(ConfigError {
                    line,
                    key: key.into(),
                    reason: format!("duplicate scenario name (first defined on line {})", prev.line),
                });
            }
            blocks.push(Block {
                name: value.into(),
                line,
                entries: defaults.clone(),
            });
            continue;
        }
        if !KEYS.contains(&key) {
            errors.push(ConfigError {
                line,
                key: key.into(),
                reason: "unknown key".into(),
            });
            continue;
        }
        if value.is_empty() {
            errors.push(ConfigError {
                line,
                key: key.into(),
                reason: "missing value".into(),
            });
            continue;
        }
        let in_scope_since = blocks.last().map_or(0, |b| b.line);
        let target = match blocks.last_mut() {
            Some(block) => &mut block.entries,
            None => &mut defaults,
        };
        if let Some(prev) = target.get(key) {
            if prev.line > in_scope_since {
                errors.push(ConfigError {
                    line,
                    key: key.into(),
                    reason: format!("already set on line {}", prev.line),
                });
                continue;
            }
        }
        target.insert(
            key.into(),
            Entry {
                value: value.into(),
                line,
            },
        );
    }

    if blocks.is_empty() && errors.is_empty() {
        errors.push(ConfigError {
            line: 0,
            key: String::new(),
            reason: "no scenario defined".into(),
        });
    }
    let mut scenarios = Vec::new();
    for block in &blocks {
        let mut reader = Reader {
            block,
            errors: Vec::new(),
        };
        let scenario = reader.scenario(base_dir);
        errors.append(&mut reader.errors);
        if let Some(s) = scenario {
            scenarios.push(s);
        }
    }
    if errors.is_empty() {
        Ok(scenarios)
    } else {
        errors.sort_by_key(|e| e.line);
        Err(ConfigErrors(errors))
    }
}

fn check_name(name: &str) -> Result<(), String> {
    if name.is_empty() {
        return Err("scenario name must not be empty".into());
    }
    if !name
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        || name.starts_with('.')
    {
        return Err(format!(
            "scenario name `{name}` is not usable as a file stem (use letters, digits, `_`, `-`, `.`)"
        ));
    }
    Ok(())
}

struct Reader<'a> {
    block: &'a Block,
    errors: Vec<ConfigError>,
}

impl Reader<'_> {
    fn fail(&mut self, key: &str, line: usize, reason: impl Into<String>) {
        self.errors.push(ConfigError {
            line,
            key: key.into(),
            reason: reason.into(),
        });
    }

    fn raw(&mut self, key: &str, required: bool) -> Option<(String, usize)> {
        match self.block.entries.get(key) {
            Some(e) => Some((e.value.clone(), e.line)),
            None => {
                if required {
                    let line = self.block.line;
                    let name = self.block.name.clone();
                    self.fail(key, line, format!("required by scenario `{name}` but not set"));
                }
                None
            }
        }
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, required: bool) -> Option<T> {
        let (value, line) = self.raw(key, required)?;
        match value.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.fail(key, line, format!("cannot parse `{value}`"));
                None
            }
        }
    }

    fn real(&mut self, key: &str, default: Option<f64>, check: fn(f64) -> bool, rule: &str) -> Option<f64> {
        let v = match self.parsed::<f64>(key, default.is_none()) {
            Some(v) => v,
            None if self.block.entries.contains_key(key) => return None,
            None => return default,
        };
        if !v.is_finite() || !check(v) {
            let line = self.block.entries[key].line;
            self.fail(key, line, format!("{v} is out of range: {rule}"));
            return None;
        }
        Some(v)
    }

    fn positive(&mut self, key: &str, default: Option<f64>) -> Option<f64> {
        self.real(key, default, |v| v > 0.0, "must be > 0")
    }

    fn choice(&mut self, key: &str, default: Option<&str>, allowed: &[&str]) -> Option<String> {
        let (value, line) = match self.raw(key, default.is_none()) {
            Some(v) => v,
            None => return default.map(str::to_string),
        };
        if allowed.contains(&value.as_str()) {
            Some(value)
        } else {
            self.fail(key, line, format!("`{value}` is not one of {}", allowed.join(", ")));
            None
        }
    }

    fn count(&mut self, key: &str, default: usize, min: usize) -> Option<usize> {
        match self.parsed::<usize>(key, false) {
            Some(v) if v >= min => Some(v),
            Some(v) => {
                let line = self.block.entries[key].line;
                self.fail(key, line, format!("{v} is out of range: must be at least {min}"));
                None
            }
            None if self.block.entries.contains_key(key) => None,
            None => Some(default),
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.block.entries.get(key).map_or(self.block.line, |e| e.line)
    }

    fn scenario(&mut self, base_dir: &Path) -> Option<Scenario> {
        let m = self.positive("gas.m", None);
        let beta = self.positive("gas.beta", None);
        let n = self.positive("gas.n", None);
        let mass = self.positive("particle.mass", None);
        let tmatrix = self.tmatrix(base_dir);
        let forward_amplitude = self.real("tmatrix.forward_amplitude", Some(0.0), |_| true, "");

        let kind = self.choice("hamiltonian.kind", Some("harmonic"), &["harmonic", "free"]);
        let omega = self.positive("hamiltonian.omega", Some(1.0));
        let hamiltonian = match (kind.as_deref(), omega) {
            (Some("free"), _) => Some(HamiltonianSpec::free()),
            (Some(_), Some(w)) => Some(HamiltonianSpec::harmonic(w)),
            _ => None,
        };
        let form = self
            .choice("generator.form", Some("qbm4"), &["qbm4", "qbm5", "caldeira_leggett"])
            .map(|f| match f.as_str() {
                "qbm4" => GeneratorForm::Qbm4,
                "qbm5" => GeneratorForm::Qbm5,
                _ => GeneratorForm::CaldeiraLeggett,
            });

        let dim = self.count("basis.dim", DEFAULT_DIM, 2);
        let default_ref = hamiltonian
            .as_ref()
            .map(|h| if h.omega() > 0.0 { h.omega() } else { 1.0 });
        let omega_ref = self.positive("basis.omega_ref", default_ref.or(Some(1.0)));
        let hbar = self.positive("basis.hbar", Some(1.0));

        let initial = self.initial(dim.unwrap_or(DEFAULT_DIM));
        let integrator = self.integrator();
        let outputs = self.outputs();

        let (gas, basis) = match (m, beta, n, mass, dim, omega_ref, hbar) {
            (Some(m), Some(beta), Some(n), Some(mass), Some(dim), Some(w), Some(hbar)) => {
                let gas = GasParameters::new(m, beta, n);
                let basis = BasisConfig::with_hbar(dim, mass, w, hbar);
                match (gas, basis) {
                    (Ok(g), Ok(b)) => (g, b),
                    (g, b) => {
                        for e in [g.err(), b.err()].into_iter().flatten() {
                            let line = self.block.line;
                            self.fail("", line, e.to_string());
                        }
                        return None;
                    }
                }
            }
            _ => return None,
        };
        Some(Scenario {
            name: self.block.name.clone(),
            gas,
            mass: mass?,
            tmatrix: tmatrix?,
            forward_amplitude: forward_amplitude?,
            hamiltonian: hamiltonian?,
            form: form?,
            basis,
            initial: initial?,
            integrator: integrator?,
            outputs: outputs?,
        })
    }

    fn tmatrix(&mut self, base_dir: &Path) -> Option<TMatrixModel> {
        let model = self.choice("tmatrix.model", None, &["constant", "gaussian", "tabulated"])?;
        let non_negative = |v: f64| v >= 0.0;
        match model.as_str() {
            "constant" => {
                let t0 = self.real("tmatrix.t0", None, non_negative, "must be >= 0")?;
                Some(TMatrixModel::Constant { t0 })
            }
            "gaussian" => {
                let t0 = self.real("tmatrix.t0", None, non_negative, "must be >= 0");
                let sigma = self.real("tmatrix.sigma", None, non_negative, "must be >= 0");
                Some(TMatrixModel::GaussianKernel { t0: t0?, sigma: sigma? })
            }
            _ => {
                let (file, line) = self.raw("tmatrix.file", true)?;
                let path = base_dir.join(&file);
                match Table::from_file(&path) {
                    Ok(table) => Some(TMatrixModel::Tabulated(table)),
                    Err(e) => {
                        self.fail("tmatrix.file", line, format!("{}: {e}", path.display()));
                        None
                    }
                }
            }
        }
    }

    fn initial(&mut self, dim: usize) -> Option<InitialState> {
        let state = self.choice(
            "initial.state",
            Some("coherent"),
            &["fock", "coherent", "thermal", "squeezed"],
        )?;
        match state.as_str() {
            "fock" => {
                let n = self.count("initial.n", 0, 0)?;
                if n >= dim {
                    let line = self.line_of("initial.n");
                    self.fail(
                        "initial.n",
                        line,
                        format!("level {n} does not fit in basis.dim = {dim}"),
                    );
                    return None;
                }
                Some(InitialState::Fock(n))
            }
            "coherent" => {
                let re = self.real("initial.alpha_re", Some(1.0), |_| true, "");
                let im = self.real("initial.alpha_im", Some(0.0), |_| true, "");
                Some(InitialState::Coherent(C64::new(re?, im?)))
            }
            "thermal" => self.positive("initial.beta_eff", Some(1.0)).map(InitialState::Thermal),
            _ => self
                .real("initial.r", Some(0.5), |_| true, "")
                .map(InitialState::Squeezed),
        }
    }

    fn integrator(&mut self) -> Option<IntegratorConfig> {
        let dt = self.positive("integrator.dt", Some(DEFAULT_DT));
        let t_end = self.positive("integrator.t_end", Some(DEFAULT_T_END));
        let mode = self.choice("integrator.mode", Some("fixed"), &["fixed", "adaptive"]);
        let tol = |v: f64| v > 1e-14 && v < 1e-2;
        let rel_tol = self.real("integrator.rel_tol", Some(1e-6), tol, "must lie in (1e-14, 1e-2)");
        let abs_tol = self.real("integrator.abs_tol", Some(1e-9), tol, "must lie in (1e-14, 1e-2)");
        let record_every = self.count("integrator.record_every", DEFAULT_RECORD_EVERY, 1);
        let hermitize = self.choice("integrator.hermitize", Some("off"), &["off", "on"]);
        let mode = match mode?.as_str() {
            "fixed" => StepMode::Fixed,
            _ => StepMode::Adaptive {
                rel_tol: rel_tol?,
                abs_tol: abs_tol?,
            },
        };
        let hermitize = if hermitize? == "on" {
            Hermitize::SymmetrizeEachStep
        } else {
            Hermitize::Off
        };
        let config = IntegratorConfig {
            dt: dt?,
            t_end: t_end?,
            mode,
            record_every: record_every?,
            hermitize,
        };
        if let Err(e) = config.validate() {
            let line = self.line_of("integrator.dt");
            self.fail("integrator.dt", line, e.to_string());
            return None;
        }
        Some(config)
    }

    fn outputs(&mut self) -> Option<Outputs> {
        let name = self.block.name.clone();
        let csv = self.raw("output.csv", false).map_or(format!("{name}.csv"), |(v, _)| v);
        let json = self
            .raw("output.json", false)
            .map_or(format!("{name}.json"), |(v, _)| v);
        let report = self.choice("output.report", Some("true"), &["true", "false"])? == "true";
        Some(Outputs {
            csv: csv.into(),
            json: json.into(),
            report,
        })
    }
}
