//! Run configuration: a line-oriented `key = value` format with `[section]`
//! headers, `#` comments, and hard validation — unknown keys, keys that do
//! not apply to the command, duplicates and type mismatches are all errors
//! carrying the offending line number.
//!
//! `serialize` renders the canonical form with every default applied, which
//! is what the JSON summary echoes; `parse(serialize(c))` reproduces `c`.

use empmin::payoffs::OptionFlavor;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Validation(String),
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError::Line {
            line,
            message: message.into(),
        }
    }
}

pub type ConfigResult<T> = Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    RateStudy,
    W1Study,
    Price,
    Lemma1,
    Check,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::RateStudy => "rate-study",
            Command::W1Study => "w1-study",
            Command::Price => "price",
            Command::Lemma1 => "lemma1",
            Command::Check => "check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawKind {
    StandardGaussian,
    UniformCube,
    Discrete,
}

impl LawKind {
    fn as_str(&self) -> &'static str {
        match self {
            LawKind::StandardGaussian => "standard-gaussian",
            LawKind::UniformCube => "uniform-cube",
            LawKind::Discrete => "discrete",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemConfig {
    Is {
        flavor: String, // "call" | "put"
        s0: Vec<f64>,
        strike: f64,
        rate: f64,
        maturity: f64,
        /// Row-major d x d.
        sigma: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    Nn {
        layers: Vec<usize>,
        ridge: f64,
        dataset_size: usize,
        dataset_seed: u64,
    },
    SyntheticQuadratic {
        q: usize,
        law: LawKind,
        atoms: Vec<Vec<f64>>,
        law_weights: Vec<f64>,
    },
}

impl ProblemConfig {
    pub fn flavor_enum(&self) -> Option<OptionFlavor> {
        match self {
            ProblemConfig::Is { flavor, .. } => Some(if flavor == "call" {
                OptionFlavor::Call
            } else {
                OptionFlavor::Put
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyConfig {
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub master_seed: u64,
    /// Dimension of the W1 study.
    pub q: usize,
    pub assignment_cap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerConfig {
    pub method: String, // "newton" | "gradient-descent"
    pub max_iters: usize,
    pub grad_tol: f64,
    pub multistart: usize,
    pub start_box_radius: f64,
    pub start_seed: u64,
}

impl OptimizerConfig {
    pub fn to_options(&self) -> empmin::optim::MinimizeOptions {
        empmin::optim::MinimizeOptions {
            method: if self.method == "newton" {
                empmin::optim::Method::Newton
            } else {
                empmin::optim::Method::GradientDescent
            },
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            multistart: self.multistart,
            start_box_radius: self.start_box_radius,
            start_seed: self.start_seed,
            record_trace: false,
            ..Default::default()
        }
    }
}

/// One requested translation of the price command.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Translation {
    Fixed(f64),
    /// Resolved to the optimizer's X_n* on the training sample.
    Optimal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceConfig {
    pub sample_size: usize,
    pub train_size: usize,
    pub translations: Vec<Translation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Config {
    pub n: usize,
    pub seeds: usize,
    pub theta_grid: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub csv: Option<String>,
    pub json: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub problem: Option<ProblemConfig>,
    pub study: StudyConfig,
    pub optimizer: OptimizerConfig,
    pub price: Option<PriceConfig>,
    pub lemma1: Option<Lemma1Config>,
    pub output: OutputConfig,
}

struct Raw {
    /// (section, key) -> (line, value); section "" is the preamble.
    items: BTreeMap<(String, String), (usize, String)>,
}

impl Raw {
    fn take(&mut self, section: &str, key: &str) -> Option<(usize, String)> {
        self.items.remove(&(section.to_string(), key.to_string()))
    }
}

const SECTIONS: &[&str] = &[
    "",
    "problem",
    "study",
    "optimizer",
    "price",
    "lemma1",
    "output",
];

fn scan(text: &str) -> ConfigResult<Raw> {
    let mut items = BTreeMap::new();
    let mut section = String::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(line_no, "unterminated section header"))?
                .trim()
                .to_string();
            if !SECTIONS.contains(&name.as_str()) {
                return Err(ConfigError::at(
                    line_no,
                    format!("unknown section [{name}]"),
                ));
            }
            section = name;
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::at(
                line_no,
                format!("expected 'key = value', got '{line}'"),
            ));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(ConfigError::at(line_no, "empty key"));
        }
        if let Some((prev, _)) = items.insert((section.clone(), key.clone()), (line_no, value)) {
            return Err(ConfigError::at(
                line_no,
                format!("duplicate key '{key}' (first set on line {prev})"),
            ));
        }
    }
    Ok(Raw { items })
}

fn parse_usize(key: &str, line: usize, v: &str) -> ConfigResult<usize> {
    v.parse::<usize>().map_err(|_| {
        ConfigError::at(
            line,
            format!("key '{key}': expected a nonnegative integer, got '{v}'"),
        )
    })
}

fn parse_u64(key: &str, line: usize, v: &str) -> ConfigResult<u64> {
    v.parse::<u64>().map_err(|_| {
        ConfigError::at(
            line,
            format!("key '{key}': expected a 64-bit unsigned integer, got '{v}'"),
        )
    })
}

fn parse_f64(key: &str, line: usize, v: &str) -> ConfigResult<f64> {
    v.parse::<f64>()
        .map_err(|_| ConfigError::at(line, format!("key '{key}': expected a number, got '{v}'")))
}

fn parse_f64_list(key: &str, line: usize, v: &str) -> ConfigResult<Vec<f64>> {
    v.split(',')
        .map(|t| parse_f64(key, line, t.trim()))
        .collect()
}

fn parse_usize_list(key: &str, line: usize, v: &str) -> ConfigResult<Vec<usize>> {
    v.split(',')
        .map(|t| parse_usize(key, line, t.trim()))
        .collect()
}

/// Vectors separated by ';', coordinates by ','.
fn parse_vectors(key: &str, line: usize, v: &str) -> ConfigResult<Vec<Vec<f64>>> {
    v.split(';')
        .map(|row| parse_f64_list(key, line, row.trim()))
        .collect()
}

/// `a..b` expands to the doubling grid a, 2a, 4a, ..., b; a comma list is
/// taken verbatim.
fn parse_n_grid(key: &str, line: usize, v: &str) -> ConfigResult<Vec<usize>> {
    if let Some((a, b)) = v.split_once("..") {
        let a = parse_usize(key, line, a.trim())?;
        let b = parse_usize(key, line, b.trim())?;
        if a == 0 || b < a {
            return Err(ConfigError::at(
                line,
                format!("key '{key}': bad range {a}..{b}"),
            ));
        }
        let mut grid = Vec::new();
        let mut n = a;
        while n < b {
            grid.push(n);
            n *= 2;
        }
        if n != b {
            return Err(ConfigError::at(
                line,
                format!("key '{key}': range end {b} is not {a} times a power of two"),
            ));
        }
        grid.push(b);
        Ok(grid)
    } else {
        parse_usize_list(key, line, v)
    }
}

fn require(raw: &mut Raw, section: &str, key: &str) -> ConfigResult<(usize, String)> {
    raw.take(section, key).ok_or_else(|| {
        ConfigError::Validation(format!("missing required key '{key}' in [{section}]"))
    })
}

/// Parses and fully validates a configuration.
pub fn parse(text: &str) -> ConfigResult<RunConfig> {
    let mut raw = scan(text)?;

    let (cmd_line, cmd) = require(&mut raw, "", "command")?;
    let command = match cmd.as_str() {
        "rate-study" => Command::RateStudy,
        "w1-study" => Command::W1Study,
        "price" => Command::Price,
        "lemma1" => Command::Lemma1,
        "check" => Command::Check,
        other => return Err(ConfigError::at(
            cmd_line,
            format!(
                "unknown command '{other}' (expected rate-study, w1-study, price, lemma1 or check)"
            ),
        )),
    };

    let needs_problem = matches!(
        command,
        Command::RateStudy | Command::Price | Command::Lemma1
    );
    let problem = if needs_problem {
        Some(parse_problem(&mut raw)?)
    } else {
        None
    };

    let study = parse_study(&mut raw, command)?;
    let optimizer = parse_optimizer(&mut raw, problem.as_ref())?;

    let price = if command == Command::Price {
        Some(parse_price(&mut raw)?)
    } else {
        None
    };
    let lemma1 = if command == Command::Lemma1 {
        let (line, v) = require(&mut raw, "lemma1", "n")?;
        let n = parse_usize("n", line, &v)?;
        let seeds = match raw.take("lemma1", "seeds") {
            Some((line, v)) => parse_usize("seeds", line, &v)?,
            None => 100,
        };
        let (gline, gv) = require(&mut raw, "lemma1", "theta_grid")?;
        let theta_grid = parse_vectors("theta_grid", gline, &gv)?;
        if n == 0 || seeds == 0 {
            return Err(ConfigError::Validation(
                "lemma1 n and seeds must be >= 1".into(),
            ));
        }
        Some(Lemma1Config {
            n,
            seeds,
            theta_grid,
        })
    } else {
        None
    };

    let wants_csv = matches!(
        command,
        Command::RateStudy | Command::W1Study | Command::Price
    );
    let csv = match raw.take("output", "csv") {
        Some((line, v)) => {
            if !wants_csv {
                return Err(ConfigError::at(
                    line,
                    format!("key 'csv' does not apply to command '{}'", command.as_str()),
                ));
            }
            Some(v)
        }
        None => wants_csv.then(|| format!("{}.csv", command.as_str())),
    };
    let json = match raw.take("output", "json") {
        Some((_, v)) => v,
        None => format!("{}.json", command.as_str()),
    };

    if let Some(((section, key), (line, _))) = raw.items.iter().next() {
        let place = if section.is_empty() {
            "the preamble".to_string()
        } else {
            format!("[{section}]")
        };
        return Err(ConfigError::at(
            *line,
            format!(
                "unknown or inapplicable key '{key}' in {place} for command '{}'",
                command.as_str()
            ),
        ));
    }

    let config = RunConfig {
        command,
        problem,
        study,
        optimizer,
        price,
        lemma1,
        output: OutputConfig { csv, json },
    };
    validate(&config)?;
    Ok(config)
}

fn parse_problem(raw: &mut Raw) -> ConfigResult<ProblemConfig> {
    let (kline, kind) = require(raw, "problem", "kind")?;
    match kind.as_str() {
        "is" => {
            let (fline, flavor) = require(raw, "problem", "flavor")?;
            if flavor != "call" && flavor != "put" {
                return Err(ConfigError::at(
                    fline,
                    format!("flavor must be call or put, got '{flavor}'"),
                ));
            }
            let (line, v) = require(raw, "problem", "s0")?;
            let s0 = parse_f64_list("s0", line, &v)?;
            let (line, v) = require(raw, "problem", "strike")?;
            let strike = parse_f64("strike", line, &v)?;
            let (line, v) = require(raw, "problem", "rate")?;
            let rate = parse_f64("rate", line, &v)?;
            let (line, v) = require(raw, "problem", "maturity")?;
            let maturity = parse_f64("maturity", line, &v)?;
            let (line, v) = require(raw, "problem", "sigma")?;
            let sigma = parse_vectors("sigma", line, &v)?;
            let weights = match raw.take("problem", "weights") {
                Some((line, v)) => parse_f64_list("weights", line, &v)?,
                None => vec![1.0 / s0.len() as f64; s0.len()],
            };
            Ok(ProblemConfig::Is {
                flavor,
                s0,
                strike,
                rate,
                maturity,
                sigma,
                weights,
            })
        }
        "nn" => {
            let (line, v) = require(raw, "problem", "layers")?;
            let layers = parse_usize_list("layers", line, &v)?;
            let (line, v) = require(raw, "problem", "ridge")?;
            let ridge = parse_f64("ridge", line, &v)?;
            let dataset_size = match raw.take("problem", "dataset_size") {
                Some((line, v)) => parse_usize("dataset_size", line, &v)?,
                None => 40,
            };
            let dataset_seed = match raw.take("problem", "dataset_seed") {
                Some((line, v)) => parse_u64("dataset_seed", line, &v)?,
                None => 7,
            };
            Ok(ProblemConfig::Nn {
                layers,
                ridge,
                dataset_size,
                dataset_seed,
            })
        }
        "synthetic-quadratic" => {
            let law = match raw.take("problem", "law") {
                Some((line, v)) => match v.as_str() {
                    "standard-gaussian" => LawKind::StandardGaussian,
                    "uniform-cube" => LawKind::UniformCube,
                    "discrete" => LawKind::Discrete,
                    other => {
                        return Err(ConfigError::at(
                            line,
                            format!("unknown law '{other}' (expected standard-gaussian, uniform-cube or discrete)"),
                        ))
                    }
                },
                None => LawKind::StandardGaussian,
            };
            let atoms = match raw.take("problem", "atoms") {
                Some((line, v)) => parse_vectors("atoms", line, &v)?,
                None => Vec::new(),
            };
            let law_weights = match raw.take("problem", "weights") {
                Some((line, v)) => parse_f64_list("weights", line, &v)?,
                None => Vec::new(),
            };
            let q = match raw.take("problem", "q") {
                Some((line, v)) => parse_usize("q", line, &v)?,
                None if law == LawKind::Discrete && !atoms.is_empty() => atoms[0].len(),
                None => {
                    return Err(ConfigError::Validation(
                        "missing required key 'q' in [problem]".into(),
                    ))
                }
            };
            Ok(ProblemConfig::SyntheticQuadratic {
                q,
                law,
                atoms,
                law_weights,
            })
        }
        other => Err(ConfigError::at(
            kline,
            format!("unknown problem kind '{other}' (expected is, nn or synthetic-quadratic)"),
        )),
    }
}

fn parse_study(raw: &mut Raw, command: Command) -> ConfigResult<StudyConfig> {
    let needs_grid = matches!(command, Command::RateStudy | Command::W1Study);
    let n_grid = match raw.take("study", "n_grid") {
        Some((line, v)) => parse_n_grid("n_grid", line, &v)?,
        None if needs_grid => {
            return Err(ConfigError::Validation(
                "missing required key 'n_grid' in [study]".into(),
            ))
        }
        None => Vec::new(),
    };
    let replications = match raw.take("study", "replications") {
        Some((line, v)) => {
            let r = parse_usize("replications", line, &v)?;
            if r == 0 {
                return Err(ConfigError::at(line, "key 'replications': must be >= 1"));
            }
            r
        }
        None => 50,
    };
    let master_seed = match raw.take("study", "master_seed") {
        Some((line, v)) => parse_u64("master_seed", line, &v)?,
        None => 0,
    };
    let q = match raw.take("study", "q") {
        Some((line, v)) => {
            if command != Command::W1Study {
                return Err(ConfigError::at(
                    line,
                    "key 'q' in [study] applies to the w1-study command only",
                ));
            }
            parse_usize("q", line, &v)?
        }
        None => {
            if command == Command::W1Study {
                return Err(ConfigError::Validation(
                    "missing required key 'q' in [study]".into(),
                ));
            }
            1
        }
    };
    let assignment_cap = match raw.take("study", "assignment_cap") {
        Some((line, v)) => {
            if command != Command::W1Study {
                return Err(ConfigError::at(
                    line,
                    "key 'assignment_cap' applies to the w1-study command only",
                ));
            }
            parse_usize("assignment_cap", line, &v)?
        }
        None => 8192,
    };
    Ok(StudyConfig {
        n_grid,
        replications,
        master_seed,
        q,
        assignment_cap,
    })
}

fn parse_optimizer(
    raw: &mut Raw,
    problem: Option<&ProblemConfig>,
) -> ConfigResult<OptimizerConfig> {
    let is_nn = matches!(problem, Some(ProblemConfig::Nn { .. }));
    let method = match raw.take("optimizer", "method") {
        Some((line, v)) => {
            if v != "newton" && v != "gradient-descent" {
                return Err(ConfigError::at(
                    line,
                    format!("method must be newton or gradient-descent, got '{v}'"),
                ));
            }
            v
        }
        // The NN family has no analytic Hessian; everything else defaults
        // to Newton.
        None if is_nn => "gradient-descent".to_string(),
        None => "newton".to_string(),
    };
    let max_iters = match raw.take("optimizer", "max_iters") {
        Some((line, v)) => parse_usize("max_iters", line, &v)?,
        None if is_nn => 20_000,
        None => 500,
    };
    let grad_tol = match raw.take("optimizer", "grad_tol") {
        Some((line, v)) => parse_f64("grad_tol", line, &v)?,
        None => 1e-8,
    };
    let multistart = match raw.take("optimizer", "multistart") {
        Some((line, v)) => parse_usize("multistart", line, &v)?,
        None if is_nn => 4,
        None => 1,
    };
    let start_box_radius = match raw.take("optimizer", "start_box_radius") {
        Some((line, v)) => parse_f64("start_box_radius", line, &v)?,
        None => 1.0,
    };
    let start_seed = match raw.take("optimizer", "start_seed") {
        Some((line, v)) => parse_u64("start_seed", line, &v)?,
        None => 0,
    };
    Ok(OptimizerConfig {
        method,
        max_iters,
        grad_tol,
        multistart,
        start_box_radius,
        start_seed,
    })
}

fn parse_price(raw: &mut Raw) -> ConfigResult<PriceConfig> {
    let sample_size = match raw.take("price", "sample_size") {
        Some((line, v)) => parse_usize("sample_size", line, &v)?,
        None => 1_000_000,
    };
    let train_size = match raw.take("price", "train_size") {
        Some((line, v)) => parse_usize("train_size", line, &v)?,
        None => 100_000,
    };
    let translations = match raw.take("price", "translations") {
        Some((line, v)) => v
            .split(',')
            .map(|t| {
                let t = t.trim();
                if t == "optimal" {
                    Ok(Translation::Optimal)
                } else {
                    parse_f64("translations", line, t).map(Translation::Fixed)
                }
            })
            .collect::<ConfigResult<Vec<_>>>()?,
        None => vec![Translation::Fixed(0.0), Translation::Optimal],
    };
    if sample_size == 0 || train_size == 0 || translations.is_empty() {
        return Err(ConfigError::Validation(
            "price needs positive sample_size, train_size and at least one translation".into(),
        ));
    }
    Ok(PriceConfig {
        sample_size,
        train_size,
        translations,
    })
}

fn validate(config: &RunConfig) -> ConfigResult<()> {
    let fail = |msg: String| Err(ConfigError::Validation(msg));
    match config.command {
        Command::RateStudy | Command::W1Study => {
            let grid = &config.study.n_grid;
            if grid.len() < 4 {
                return fail(format!("n_grid needs at least 4 sizes, got {}", grid.len()));
            }
            if grid[0] == 0 || grid.windows(2).any(|w| w[1] <= w[0]) {
                return fail("n_grid must be positive and strictly increasing".into());
            }
        }
        _ => {}
    }
    if config.command == Command::W1Study && !(1..=3).contains(&config.study.q) {
        return fail(format!(
            "w1-study q must be 1, 2 or 3, got {}",
            config.study.q
        ));
    }
    if let Some(problem) = &config.problem {
        match problem {
            ProblemConfig::Is {
                s0,
                sigma,
                weights,
                strike,
                maturity,
                ..
            } => {
                let d = s0.len();
                if d == 0 {
                    return fail("s0 must name at least one asset".into());
                }
                if weights.len() != d {
                    return fail(format!(
                        "weights has {} entries for {d} assets",
                        weights.len()
                    ));
                }
                if sigma.len() != d || sigma.iter().any(|r| r.len() != d) {
                    return fail(format!("sigma must be a {d}x{d} matrix"));
                }
                if *strike < 0.0 || *maturity < 0.0 {
                    return fail("strike and maturity must be nonnegative".into());
                }
            }
            ProblemConfig::Nn {
                layers,
                ridge,
                dataset_size,
                ..
            } => {
                if layers.len() < 2 || layers.iter().any(|&s| s == 0) {
                    return fail("layers needs >= 2 positive sizes".into());
                }
                if !(*ridge > 0.0) {
                    return fail("ridge must be > 0".into());
                }
                if *dataset_size == 0 {
                    return fail("dataset_size must be >= 1".into());
                }
            }
            ProblemConfig::SyntheticQuadratic {
                q,
                law,
                atoms,
                law_weights,
            } => {
                if *q == 0 {
                    return fail("q must be >= 1".into());
                }
                match law {
                    LawKind::Discrete => {
                        if atoms.is_empty() || atoms.len() != law_weights.len() {
                            return fail("discrete law needs matching atoms and weights".into());
                        }
                        if atoms.iter().any(|a| a.len() != *q) {
                            return fail(format!("every atom must have dimension q = {q}"));
                        }
                    }
                    _ => {
                        if !atoms.is_empty() || !law_weights.is_empty() {
                            return fail("atoms/weights apply to the discrete law only".into());
                        }
                    }
                }
            }
        }
    }
    if let Some(lemma1) = &config.lemma1 {
        let d = match config.problem.as_ref() {
            Some(ProblemConfig::SyntheticQuadratic { q, .. }) => *q,
            Some(ProblemConfig::Is { s0, .. }) => s0.len(),
            Some(ProblemConfig::Nn { layers, .. }) => layers.windows(2).map(|w| w[0] * w[1]).sum(),
            None => return fail("lemma1 needs a [problem] section".into()),
        };
        if lemma1.theta_grid.iter().any(|p| p.len() != d) {
            return fail(format!("theta_grid points must have dimension {d}"));
        }
    }
    Ok(())
}

fn fmt_f64(v: f64) -> String {
    // Shortest round-trip form; integral values keep a trailing `.0` ...
    // actually Rust prints `1` for 1.0, which reparses fine as f64.
    format!("{v}")
}

fn fmt_list(vs: &[f64]) -> String {
    vs.iter()
        .map(|v| fmt_f64(*v))
        .collect::<Vec<_>>()
        .join(", ")
}

fn fmt_vectors(vs: &[Vec<f64>]) -> String {
    vs.iter()
        .map(|r| fmt_list(r))
        .collect::<Vec<_>>()
        .join(" ; ")
}

fn fmt_usize_list(vs: &[usize]) -> String {
    vs.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Canonical text form with every effective value spelled out.
pub fn serialize(config: &RunConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "command = {}", config.command.as_str());

    if let Some(problem) = &config.problem {
        let _ = writeln!(out, "\n[problem]");
        match problem {
            ProblemConfig::Is {
                flavor,
                s0,
                strike,
                rate,
                maturity,
                sigma,
                weights,
            } => {
                let _ = writeln!(out, "kind = is");
                let _ = writeln!(out, "flavor = {flavor}");
                let _ = writeln!(out, "s0 = {}", fmt_list(s0));
                let _ = writeln!(out, "strike = {}", fmt_f64(*strike));
                let _ = writeln!(out, "rate = {}", fmt_f64(*rate));
                let _ = writeln!(out, "maturity = {}", fmt_f64(*maturity));
                let _ = writeln!(out, "sigma = {}", fmt_vectors(sigma));
                let _ = writeln!(out, "weights = {}", fmt_list(weights));
            }
            ProblemConfig::Nn {
                layers,
                ridge,
                dataset_size,
                dataset_seed,
            } => {
                let _ = writeln!(out, "kind = nn");
                let _ = writeln!(
                    out,
                    "layers = {}",
                    layers
                        .iter()
                        .map(|v| v.to_string())
                        .collect::<Vec<_>>()
                        .join(", ")
                );
                let _ = writeln!(out, "ridge = {}", fmt_f64(*ridge));
                let _ = writeln!(out, "dataset_size = {dataset_size}");
                let _ = writeln!(out, "dataset_seed = {dataset_seed}");
            }
            ProblemConfig::SyntheticQuadratic {
                q,
                law,
                atoms,
                law_weights,
            } => {
                let _ = writeln!(out, "kind = synthetic-quadratic");
                let _ = writeln!(out, "q = {q}");
                let _ = writeln!(out, "law = {}", law.as_str());
                if !atoms.is_empty() {
                    let _ = writeln!(out, "atoms = {}", fmt_vectors(atoms));
                    let _ = writeln!(out, "weights = {}", fmt_list(law_weights));
                }
            }
        }
    }

    let _ = writeln!(out, "\n[study]");
    if !config.study.n_grid.is_empty() {
        let _ = writeln!(out, "n_grid = {}", fmt_usize_list(&config.study.n_grid));
    }
    let _ = writeln!(out, "replications = {}", config.study.replications);
    let _ = writeln!(out, "master_seed = {}", config.study.master_seed);
    if config.command == Command::W1Study {
        let _ = writeln!(out, "q = {}", config.study.q);
        let _ = writeln!(out, "assignment_cap = {}", config.study.assignment_cap);
    }

    let _ = writeln!(out, "\n[optimizer]");
    let _ = writeln!(out, "method = {}", config.optimizer.method);
    let _ = writeln!(out, "max_iters = {}", config.optimizer.max_iters);
    let _ = writeln!(out, "grad_tol = {}", fmt_f64(config.optimizer.grad_tol));
    let _ = writeln!(out, "multistart = {}", config.optimizer.multistart);
    let _ = writeln!(
        out,
        "start_box_radius = {}",
        fmt_f64(config.optimizer.start_box_radius)
    );
    let _ = writeln!(out, "start_seed = {}", config.optimizer.start_seed);

    if let Some(price) = &config.price {
        let _ = writeln!(out, "\n[price]");
        let _ = writeln!(out, "sample_size = {}", price.sample_size);
        let _ = writeln!(out, "train_size = {}", price.train_size);
        let rendered: Vec<String> = price
            .translations
            .iter()
            .map(|t| match t {
                Translation::Fixed(v) => fmt_f64(*v),
                Translation::Optimal => "optimal".to_string(),
            })
            .collect();
        let _ = writeln!(out, "translations = {}", rendered.join(", "));
    }

    if let Some(lemma1) = &config.lemma1 {
        let _ = writeln!(out, "\n[lemma1]");
        let _ = writeln!(out, "n = {}", lemma1.n);
        let _ = writeln!(out, "seeds = {}", lemma1.seeds);
        let _ = writeln!(out, "theta_grid = {}", fmt_vectors(&lemma1.theta_grid));
    }

    let _ = writeln!(out, "\n[output]");
    if let Some(csv) = &config.output.csv {
        let _ = writeln!(out, "csv = {csv}");
    }
    let _ = writeln!(out, "json = {}", config.output.json);
    out
}
