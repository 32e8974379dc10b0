//! Run configuration: TOML files (or JSON manifests) validated into a [`RunConfig`].
//!
//! Every field has a default chosen by `problem.kind` and `problem.preset`;
//! explicit keys override it. Parsing reports every violation it finds, each
//! tagged with its dotted field path.

use std::fmt;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use strom_core::mc::{Marginal, ParameterDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    OneD,
    TwoD,
}

impl ProblemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::OneD => "1d",
            ProblemKind::TwoD => "2d",
        }
    }

    pub fn n_params(self) -> usize {
        match self {
            ProblemKind::OneD => 2,
            ProblemKind::TwoD => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Paper,
    Desk,
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Paper => "paper",
            Preset::Desk => "desk",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Fom,
    SpaceRom,
    SpaceRomRrf,
    StRom,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Fom, Method::SpaceRom, Method::SpaceRomRrf, Method::StRom];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Fom => "fom",
            Method::SpaceRom => "space-rom",
            Method::SpaceRomRrf => "space-rom-rrf",
            Method::StRom => "st-rom",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub fn is_rom(self) -> bool {
        self != Method::Fom
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Field on which moments are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorField {
    FinalTime,
    SpaceTime,
}

impl ErrorField {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorField::FinalTime => "final-time",
            ErrorField::SpaceTime => "space-time",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Propagation {
    Mc {
        n_samples: Vec<usize>,
        seed: u64,
        repetitions: usize,
    },
    Sg {
        degrees: Vec<usize>,
        /// `None` means `p + 1` per axis.
        nodes_per_axis: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceConfig {
    pub path: Option<PathBuf>,
    pub n_samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub preset: Preset,
    pub nodes: Vec<usize>,
    pub dt: f64,
    pub t_final: f64,
    pub source_amplitude: f64,
    pub distribution: ParameterDistribution,
    pub n_train: usize,
    pub train_seed: u64,
    pub e_tol: f64,
    pub rrf_k_hat: usize,
    pub rrf_seed: u64,
    pub method: Method,
    pub propagation: Propagation,
    pub reference: ReferenceConfig,
    pub output_dir: PathBuf,
    pub error_field: ErrorField,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Syntax(String),
    #[error("{} invalid config field(s): {}", .0.len(), .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

impl RunConfig {
    pub fn defaults(problem: ProblemKind, preset: Preset) -> Self {
        let (nodes, dt, t_final, distribution) = match (problem, preset) {
            (ProblemKind::OneD, Preset::Paper) => (vec![255], 0.001, 1.0, ParameterDistribution::advection_diffusion_1d()),
            (ProblemKind::OneD, Preset::Desk) => (vec![63], 0.01, 1.0, ParameterDistribution::advection_diffusion_1d()),
            (ProblemKind::TwoD, Preset::Paper) => (vec![63, 63], 0.005, 2.5, ParameterDistribution::advection_diffusion_2d()),
            (ProblemKind::TwoD, Preset::Desk) => (vec![15, 15], 0.025, 2.5, ParameterDistribution::advection_diffusion_2d()),
        };
        let n_samples = match preset {
            Preset::Paper => vec![10, 100, 1000, 10000],
            Preset::Desk => vec![10, 100, 1000],
        };
        RunConfig {
            problem,
            preset,
            nodes,
            dt,
            t_final,
            source_amplitude: 1.0,
            distribution,
            n_train: 20,
            train_seed: 1,
            e_tol: 0.999999,
            rrf_k_hat: 20,
            rrf_seed: 7,
            method: Method::StRom,
            propagation: Propagation::Mc {
                n_samples,
                seed: 0,
                repetitions: 5,
            },
            reference: ReferenceConfig {
                path: None,
                n_samples: 100_000,
                seed: 20_240,
            },
            output_dir: PathBuf::from("results"),
            error_field: ErrorField::FinalTime,
        }
    }

    pub fn n_t(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn n_s(&self) -> usize {
        self.nodes.iter().product()
    }

    /// Fully explicit configuration tree; parsing it yields `self` again.
    pub fn to_value(&self) -> Value {
        let distribution: Vec<Value> = self
            .distribution
            .marginals
            .iter()
            .map(|m| match *m {
                Marginal::Normal { mean, std } => json!({"kind": "normal", "mean": mean, "std": std}),
                Marginal::Uniform { lo, hi } => json!({"kind": "uniform", "lo": lo, "hi": hi}),
            })
            .collect();
        let propagation = match &self.propagation {
            Propagation::Mc {
                n_samples,
                seed,
                repetitions,
            } => json!({"kind": "mc", "n_samples": n_samples, "seed": seed, "repetitions": repetitions}),
            Propagation::Sg {
                degrees,
                nodes_per_axis,
            } => {
                let mut m = json!({"kind": "sg", "degrees": degrees});
                if let Some(n) = nodes_per_axis {
                    m["nodes_per_axis"] = json!(n);
                }
                m
            }
        };
        let mut reference = json!({"n_samples": self.reference.n_samples, "seed": self.reference.seed});
        if let Some(p) = &self.reference.path {
            reference["path"] = json!(p.to_string_lossy());
        }
        json!({
            "problem": {
                "kind": self.problem.as_str(),
                "preset": self.preset.as_str(),
                "nodes": self.nodes,
                "dt": self.dt,
                "t_final": self.t_final,
                "source_amplitude": self.source_amplitude,
            },
            "distribution": distribution,
            "training": {
                "n_train": self.n_train,
                "seed": self.train_seed,
                "e_tol": self.e_tol,
                "rrf_k_hat": self.rrf_k_hat,
                "rrf_seed": self.rrf_seed,
            },
            "method": {"name": self.method.as_str()},
            "propagation": propagation,
            "reference": reference,
            "output": {
                "dir": self.output_dir.to_string_lossy(),
                "error_field": self.error_field.as_str(),
            },
        })
    }
}

/// Reads a TOML config, or the `config` object of a JSON manifest.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    parse_config_with(path, None)
}

/// As [`parse_config`], optionally forcing the preset before defaults are filled.
pub fn parse_config_with(path: &Path, force_preset: Option<Preset>) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    let tree = if is_json {
        let v: Value = serde_json::from_str(&text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        match v.get("config") {
            Some(c) => c.clone(),
            None => v,
        }
    } else {
        parse_toml_str(&text)?
    };
    from_value(&tree, force_preset)
}

pub fn parse_toml_str(text: &str) -> Result<Value, ConfigError> {
    let t: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    serde_json::to_value(t).map_err(|e| ConfigError::Syntax(e.to_string()))
}

/// Collects violations while reading a value tree.
struct Reader {
    violations: Vec<Violation>,
}

impl Reader {
    fn fail(&mut self, path: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn table<'a>(&mut self, root: &'a Map<String, Value>, key: &str, allowed: &[&str]) -> Option<&'a Map<String, Value>> {
        match root.get(key) {
            None => None,
            Some(Value::Object(m)) => {
                for k in m.keys() {
                    if !allowed.contains(&k.as_str()) {
                        self.fail(&format!("{key}.{k}"), "unknown key");
                    }
                }
                Some(m)
            }
            Some(_) => {
                self.fail(key, "expected a table");
                None
            }
        }
    }

    fn f64(&mut self, t: Option<&Map<String, Value>>, section: &str, key: &str, default: f64) -> f64 {
        let path = format!("{section}.{key}");
        match t.and_then(|t| t.get(key)) {
            None => default,
            Some(v) => match v.as_f64() {
                Some(x) if x.is_finite() => x,
                _ => {
                    self.fail(&path, "expected a finite number");
                    default
                }
            },
        }
    }

    fn uint(&mut self, t: Option<&Map<String, Value>>, section: &str, key: &str, default: u64) -> u64 {
        let path = format!("{section}.{key}");
        match t.and_then(|t| t.get(key)) {
            None => default,
            Some(v) => match v.as_u64() {
                Some(x) if x <= i64::MAX as u64 => x,
                _ => {
                    self.fail(&path, "expected a nonnegative integer");
                    default
                }
            },
        }
    }

    fn str<'a>(&mut self, t: Option<&'a Map<String, Value>>, section: &str, key: &str) -> Option<&'a str> {
        match t.and_then(|t| t.get(key)) {
            None => None,
            Some(Value::String(s)) => Some(s),
            Some(_) => {
                self.fail(&format!("{section}.{key}"), "expected a string");
                None
            }
        }
    }

    fn uint_list(&mut self, t: Option<&Map<String, Value>>, section: &str, key: &str, default: Vec<usize>) -> Vec<usize> {
        let path = format!("{section}.{key}");
        match t.and_then(|t| t.get(key)) {
            None => default,
            Some(Value::Array(items)) => {
                let parsed: Option<Vec<usize>> = items.iter().map(|v| v.as_u64().map(|x| x as usize)).collect();
                match parsed {
                    Some(v) if !v.is_empty() => v,
                    Some(_) => {
                        self.fail(&path, "must not be empty");
                        default
                    }
                    None => {
                        self.fail(&path, "expected a list of nonnegative integers");
                        default
                    }
                }
            }
            Some(_) => {
                self.fail(&path, "expected a list of nonnegative integers");
                default
            }
        }
    }
}

const TOP_KEYS: [&str; 7] = ["problem", "distribution", "training", "method", "propagation", "reference", "output"];

pub fn from_value(tree: &Value, force_preset: Option<Preset>) -> Result<RunConfig, ConfigError> {
    let root = tree
        .as_object()
        .ok_or_else(|| ConfigError::Syntax("top level must be a table".into()))?;
    let mut r = Reader { violations: Vec::new() };
    for k in root.keys() {
        if !TOP_KEYS.contains(&k.as_str()) {
            r.fail(k, "unknown key");
        }
    }

    let problem = r.table(root, "problem", &["kind", "preset", "nodes", "dt", "t_final", "source_amplitude"]);
    let kind = match r.str(problem, "problem", "kind") {
        None | Some("1d") => ProblemKind::OneD,
        Some("2d") => ProblemKind::TwoD,
        Some(other) => {
            r.fail("problem.kind", format!("expected \"1d\" or \"2d\", got {other:?}"));
            ProblemKind::OneD
        }
    };
    let preset = match r.str(problem, "problem", "preset") {
        None | Some("paper") => Preset::Paper,
        Some("desk") => Preset::Desk,
        Some(other) => {
            r.fail("problem.preset", format!("expected \"paper\" or \"desk\", got {other:?}"));
            Preset::Paper
        }
    };
    let preset = force_preset.unwrap_or(preset);
    let d = RunConfig::defaults(kind, preset);

    let nodes = r.uint_list(problem, "problem", "nodes", d.nodes.clone());
    let dim = kind.n_params() - 1;
    let min_nodes = if kind == ProblemKind::OneD { 2 } else { 3 };
    if nodes.len() != dim {
        r.fail("problem.nodes", format!("expected {dim} entries for a {} problem", kind.as_str()));
    } else if nodes.iter().any(|&n| n < min_nodes) {
        r.fail("problem.nodes", format!("each axis needs at least {min_nodes} nodes"));
    }
    let dt = r.f64(problem, "problem", "dt", d.dt);
    let t_final = r.f64(problem, "problem", "t_final", d.t_final);
    if dt <= 0.0 {
        r.fail("problem.dt", "must be positive");
    }
    if t_final <= 0.0 {
        r.fail("problem.t_final", "must be positive");
    }
    if dt > 0.0 && t_final > 0.0 {
        let steps = t_final / dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) || steps.round() < 1.0 {
            r.fail("problem.t_final", "must be a positive integer multiple of problem.dt");
        }
    }
    let source_amplitude = r.f64(problem, "problem", "source_amplitude", d.source_amplitude);

    let distribution = match root.get("distribution") {
        None => d.distribution.clone(),
        Some(Value::Array(items)) => {
            let mut marginals = Vec::new();
            for (i, item) in items.iter().enumerate() {
                let path = format!("distribution[{i}]");
                let Some(t) = item.as_object() else {
                    r.fail(&path, "expected a table");
                    continue;
                };
                let kind = t.get("kind").and_then(Value::as_str);
                let allowed: &[&str] = match kind {
                    Some("normal") => &["kind", "mean", "std"],
                    Some("uniform") => &["kind", "lo", "hi"],
                    _ => {
                        r.fail(&format!("{path}.kind"), "expected \"normal\" or \"uniform\"");
                        continue;
                    }
                };
                for k in t.keys() {
                    if !allowed.contains(&k.as_str()) {
                        r.fail(&format!("{path}.{k}"), "unknown key");
                    }
                }
                let need = |r: &mut Reader, key: &str| match t.get(key).and_then(Value::as_f64) {
                    Some(x) if x.is_finite() => x,
                    _ => {
                        r.fail(&format!("{path}.{key}"), "expected a finite number");
                        f64::NAN
                    }
                };
                let m = if kind == Some("normal") {
                    Marginal::Normal {
                        mean: need(&mut r, "mean"),
                        std: need(&mut r, "std"),
                    }
                } else {
                    Marginal::Uniform {
                        lo: need(&mut r, "lo"),
                        hi: need(&mut r, "hi"),
                    }
                };
                let finite = match m {
                    Marginal::Normal { mean, std } => mean.is_finite() && std.is_finite(),
                    Marginal::Uniform { lo, hi } => lo.is_finite() && hi.is_finite(),
                };
                if finite {
                    if let Err(e) = m.validate() {
                        r.fail(&path, e.to_string());
                    }
                }
                marginals.push(m);
            }
            if items.len() != kind.n_params() {
                r.fail(
                    "distribution",
                    format!("expected {} marginals for a {} problem", kind.n_params(), kind.as_str()),
                );
            }
            ParameterDistribution { marginals }
        }
        Some(_) => {
            r.fail("distribution", "expected an array of tables");
            d.distribution.clone()
        }
    };

    let training = r.table(root, "training", &["n_train", "seed", "e_tol", "rrf_k_hat", "rrf_seed"]);
    let n_train = r.uint(training, "training", "n_train", d.n_train as u64) as usize;
    if n_train == 0 {
        r.fail("training.n_train", "must be at least 1");
    }
    let train_seed = r.uint(training, "training", "seed", d.train_seed);
    let e_tol = r.f64(training, "training", "e_tol", d.e_tol);
    if !(e_tol > 0.0 && e_tol <= 1.0) {
        r.fail("training.e_tol", format!("must lie in (0, 1], got {e_tol}"));
    }
    let rrf_k_hat = r.uint(training, "training", "rrf_k_hat", d.rrf_k_hat as u64) as usize;
    if rrf_k_hat == 0 {
        r.fail("training.rrf_k_hat", "must be at least 1");
    }
    let rrf_seed = r.uint(training, "training", "rrf_seed", d.rrf_seed);

    let method_t = r.table(root, "method", &["name"]);
    let method = match r.str(method_t, "method", "name") {
        None => d.method,
        Some(s) => Method::parse(s).unwrap_or_else(|| {
            r.fail("method.name", format!("expected one of fom, space-rom, space-rom-rrf, st-rom; got {s:?}"));
            d.method
        }),
    };

    let prop = r.table(
        root,
        "propagation",
        &["kind", "n_samples", "seed", "repetitions", "degrees", "nodes_per_axis"],
    );
    let propagation = match r.str(prop, "propagation", "kind") {
        None | Some("mc") => {
            let (dn, ds, dr) = match &d.propagation {
                Propagation::Mc {
                    n_samples,
                    seed,
                    repetitions,
                } => (n_samples.clone(), *seed, *repetitions),
                Propagation::Sg { .. } => unreachable!("defaults use mc"),
            };
            for key in ["degrees", "nodes_per_axis"] {
                if prop.is_some_and(|t| t.contains_key(key)) {
                    r.fail(&format!("propagation.{key}"), "only valid when propagation.kind = \"sg\"");
                }
            }
            let repetitions = r.uint(prop, "propagation", "repetitions", dr as u64) as usize;
            if repetitions == 0 {
                r.fail("propagation.repetitions", "must be at least 1");
            }
            Propagation::Mc {
                n_samples: r.uint_list(prop, "propagation", "n_samples", dn),
                seed: r.uint(prop, "propagation", "seed", ds),
                repetitions,
            }
        }
        Some("sg") => {
            for key in ["n_samples", "seed", "repetitions"] {
                if prop.is_some_and(|t| t.contains_key(key)) {
                    r.fail(&format!("propagation.{key}"), "only valid when propagation.kind = \"mc\"");
                }
            }
            let nodes_per_axis = prop.and_then(|t| t.get("nodes_per_axis")).map(|_| {
                let n = r.uint(prop, "propagation", "nodes_per_axis", 1) as usize;
                if n == 0 {
                    r.fail("propagation.nodes_per_axis", "must be at least 1");
                }
                n
            });
            Propagation::Sg {
                degrees: r.uint_list(prop, "propagation", "degrees", vec![0, 1, 2, 3]),
                nodes_per_axis,
            }
        }
        Some(other) => {
            r.fail("propagation.kind", format!("expected \"mc\" or \"sg\", got {other:?}"));
            d.propagation.clone()
        }
    };

    let reference_t = r.table(root, "reference", &["path", "n_samples", "seed"]);
    let reference = ReferenceConfig {
        path: r.str(reference_t, "reference", "path").map(PathBuf::from),
        n_samples: r.uint(reference_t, "reference", "n_samples", d.reference.n_samples as u64) as usize,
        seed: r.uint(reference_t, "reference", "seed", d.reference.seed),
    };
    if reference.n_samples < 2 {
        r.fail("reference.n_samples", "must be at least 2");
    }

    let output = r.table(root, "output", &["dir", "error_field"]);
    let output_dir = r
        .str(output, "output", "dir")
        .map(PathBuf::from)
        .unwrap_or(d.output_dir.clone());
    let error_field = match r.str(output, "output", "error_field") {
        None | Some("final-time") => ErrorField::FinalTime,
        Some("space-time") => ErrorField::SpaceTime,
        Some(other) => {
            r.fail("output.error_field", format!("expected \"final-time\" or \"space-time\", got {other:?}"));
            ErrorField::FinalTime
        }
    };

    if !r.violations.is_empty() {
        return Err(ConfigError::Invalid(r.violations));
    }
    Ok(RunConfig {
        problem: kind,
        preset,
        nodes,
        dt,
        t_final,
        source_amplitude,
        distribution,
        n_train,
        train_seed,
        e_tol,
        rrf_k_hat,
        rrf_seed,
        method,
        propagation,
        reference,
        output_dir,
        error_field,
    })
}
