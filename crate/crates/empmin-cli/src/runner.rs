//! Command execution: builds problems from the parsed config, runs the
//! studies, and renders the CSV/JSON artifacts as strings. All file I/O
//! stays in main so artifacts are written once, after aggregation.

use crate::config::{Command, Lemma1Config, PriceConfig, ProblemConfig, RunConfig, Translation};
use empmin::error::Error as LibError;
use empmin::experiments::{
    lemma1_check, run_rate_study, w1_rate_study, Problem, RateStudyConfig, RateStudyResult,
    SlopeFit, W1StudyConfig, W1StudyResult,
};
use empmin::measures::{sample_iid, DistributionSpec, EmpiricalMeasure};
use empmin::objectives::{
    estimator_variance, make_is_family, mlp_forward, translated_estimator, EmpiricalObjective,
    MlpSpec,
};
use empmin::optim::minimize;
use empmin::payoffs::{bs_price_1d, quadrature_price_1d, BasketOptionSpec};
use empmin::rng::{derive_seed, GaussianSource};
use serde::Serialize;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything a command produces; main serializes it to disk.
pub struct RunOutput {
    pub csv: Option<String>,
    pub json: String,
    /// Study-level validity (censoring); false maps to exit code 2.
    pub valid: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Lib(#[from] LibError),
    #[error("{0}")]
    Other(String),
}

type RunResult<T> = Result<T, RunError>;

fn other(msg: impl Into<String>) -> RunError {
    RunError::Other(msg.into())
}

/// Deterministic synthetic regression dataset for the NN problem: teacher
/// weights ~ N(0,1), inputs uniform in [-1,1]^{d0}, targets from the
/// teacher network; all streams derived from the dataset seed.
pub fn generate_nn_dataset(spec: &MlpSpec, size: usize, seed: u64) -> EmpiricalMeasure {
    let mut teacher_src = GaussianSource::new(derive_seed(seed, 1, 0));
    let teacher: Vec<f64> = (0..spec.weight_dim())
        .map(|_| teacher_src.next_normal())
        .collect();
    let inputs = sample_iid(
        &DistributionSpec::uniform_cube(spec.input_dim()).expect("d0 >= 1"),
        size,
        derive_seed(seed, 2, 0),
    )
    .expect("size >= 1");
    let mut rows = Vec::with_capacity(size);
    for u01 in inputs.points() {
        let u: Vec<f64> = u01.iter().map(|v| 2.0 * v - 1.0).collect();
        let y = mlp_forward(spec, &teacher, &u).expect("teacher shapes agree");
        let mut row = u;
        row.extend_from_slice(&y);
        rows.push(row);
    }
    EmpiricalMeasure::from_points(&rows).expect("nonempty dataset")
}

fn build_basket(problem: &ProblemConfig) -> RunResult<BasketOptionSpec> {
    let ProblemConfig::Is {
        s0,
        strike,
        rate,
        maturity,
        sigma,
        weights,
        ..
    } = problem
    else {
        return Err(other("this command needs an importance-sampling problem"));
    };
    let d = s0.len();
    let mut flat = Vec::with_capacity(d * d);
    for row in sigma {
        flat.extend_from_slice(row);
    }
    Ok(BasketOptionSpec::new(
        *rate,
        *maturity,
        *strike,
        flat,
        s0.clone(),
        weights.clone(),
        problem.flavor_enum().expect("is problem"),
    )?)
}

pub fn build_problem(problem: &ProblemConfig) -> RunResult<Problem> {
    match problem {
        ProblemConfig::Is { .. } => Ok(Problem::Is(build_basket(problem)?)),
        ProblemConfig::Nn {
            layers,
            ridge,
            dataset_size,
            dataset_seed,
        } => {
            let spec = MlpSpec::new(layers.clone(), *ridge)?;
            let dataset = generate_nn_dataset(&spec, *dataset_size, *dataset_seed);
            Ok(Problem::Nn { spec, dataset })
        }
        ProblemConfig::SyntheticQuadratic {
            q,
            law,
            atoms,
            law_weights,
        } => {
            let law = match law {
                crate::config::LawKind::StandardGaussian => {
                    DistributionSpec::standard_gaussian(*q)?
                }
                crate::config::LawKind::UniformCube => DistributionSpec::uniform_cube(*q)?,
                crate::config::LawKind::Discrete => {
                    DistributionSpec::discrete(atoms.clone(), law_weights.clone())?
                }
            };
            Ok(Problem::SyntheticQuadratic { law })
        }
    }
}

/// 17 significant digits: round-trippable and byte-stable.
fn real(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Serialize)]
struct SlopeJson {
    slope: f64,
    intercept: f64,
    r_squared: f64,
}

impl From<&SlopeFit> for SlopeJson {
    fn from(f: &SlopeFit) -> Self {
        SlopeJson {
            slope: f.slope,
            intercept: f.intercept,
            r_squared: f.r_squared,
        }
    }
}

#[derive(Serialize)]
struct SummaryEnvelope<S: Serialize> {
    tool_version: &'static str,
    command: &'static str,
    master_seed: u64,
    master_seed_source: &'static str,
    config_echo: String,
    #[serde(flatten)]
    body: S,
}

fn summary_json<S: Serialize>(
    config: &RunConfig,
    seed_from_env: bool,
    body: S,
) -> RunResult<String> {
    let envelope = SummaryEnvelope {
        tool_version: TOOL_VERSION,
        command: config.command.as_str(),
        master_seed: config.study.master_seed,
        master_seed_source: if seed_from_env { "env" } else { "config" },
        config_echo: crate::config::serialize(config),
        body,
    };
    let mut text = serde_json::to_string_pretty(&envelope)
        .map_err(|e| other(format!("json serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

pub fn execute(config: &RunConfig, seed_from_env: bool) -> RunResult<RunOutput> {
    match config.command {
        Command::RateStudy => run_rate(config, seed_from_env),
        Command::W1Study => run_w1(config, seed_from_env),
        Command::Price => run_price(config, seed_from_env),
        Command::Lemma1 => run_lemma1(config, seed_from_env),
        Command::Check => run_check(config, seed_from_env),
    }
}

#[derive(Serialize)]
struct RatePointJson {
    n: usize,
    mean_value_err: f64,
    se_value_err: f64,
    mean_x_err_sq: f64,
    se_x_err_sq: f64,
    used: usize,
    censored: usize,
    ratio_to_rate: f64,
}

#[derive(Serialize)]
struct ReferenceJson {
    x_star: Vec<f64>,
    v_star: f64,
    method: &'static str,
    quadrature_nodes: usize,
}

#[derive(Serialize)]
struct RateBody {
    invalid: bool,
    value_slope: SlopeJson,
    x_err_slope: SlopeJson,
    per_n: Vec<RatePointJson>,
    censored_total: usize,
    max_minimizer_norm: f64,
    reference: ReferenceJson,
}

fn rate_csv(result: &RateStudyResult) -> String {
    let mut csv = String::from("n,replication,value_err,x_err_sq,converged\n");
    for row in &result.rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.n,
            row.replication,
            real(row.value_err),
            real(row.x_err_sq),
            row.converged
        ));
    }
    csv
}

fn run_rate(config: &RunConfig, seed_from_env: bool) -> RunResult<RunOutput> {
    let problem = build_problem(config.problem.as_ref().expect("validated"))?;
    let mut study = RateStudyConfig::new(
        problem,
        config.study.n_grid.clone(),
        config.study.replications,
        config.study.master_seed,
    );
    study.optimizer = config.optimizer.to_options();
    let result = run_rate_study(&study)?;

    let body = RateBody {
        invalid: result.invalid,
        value_slope: SlopeJson::from(&result.value_slope),
        x_err_slope: SlopeJson::from(&result.x_slope),
        per_n: result
            .per_n
            .iter()
            .map(|p| RatePointJson {
                n: p.n,
                mean_value_err: p.mean_value_err,
                se_value_err: p.se_value_err,
                mean_x_err_sq: p.mean_x_err_sq,
                se_x_err_sq: p.se_x_err_sq,
                used: p.used,
                censored: p.censored,
                ratio_to_rate: p.ratio_to_rate,
            })
            .collect(),
        censored_total: result.per_n.iter().map(|p| p.censored).sum(),
        max_minimizer_norm: result.max_minimizer_norm,
        reference: ReferenceJson {
            x_star: result.reference.x_star.clone(),
            v_star: result.reference.v_star,
            method: result.reference.method.as_str(),
            quadrature_nodes: result.reference.quadrature_nodes,
        },
    };
    Ok(RunOutput {
        csv: Some(rate_csv(&result)),
        json: summary_json(config, seed_from_env, body)?,
        valid: !result.invalid,
    })
}

#[derive(Serialize)]
struct W1PointJson {
    n: usize,
    mean_w1: f64,
    se_w1: f64,
}

#[derive(Serialize)]
struct W1Body {
    q: usize,
    slope: SlopeJson,
    per_n: Vec<W1PointJson>,
}

fn w1_csv(result: &W1StudyResult) -> String {
    let mut csv = String::from("n,replication,w1\n");
    for row in &result.rows {
        csv.push_str(&format!("{},{},{}\n", row.n, row.replication, real(row.w1)));
    }
    csv
}

fn run_w1(config: &RunConfig, seed_from_env: bool) -> RunResult<RunOutput> {
    let mut study = W1StudyConfig::new(
        config.study.q,
        config.study.n_grid.clone(),
        config.study.replications,
        config.study.master_seed,
    );
    study.assignment_cap = config.study.assignment_cap;
    let result = w1_rate_study(&study)?;
    let body = W1Body {
        q: config.study.q,
        slope: SlopeJson::from(&result.slope),
        per_n: result
            .per_n
            .iter()
            .map(|p| W1PointJson {
                n: p.n,
                mean_w1: p.mean_w1,
                se_w1: p.se_w1,
            })
            .collect(),
    };
    Ok(RunOutput {
        csv: Some(w1_csv(&result)),
        json: summary_json(config, seed_from_env, body)?,
        valid: true,
    })
}

#[derive(Serialize)]
struct PriceRowJson {
    x: f64,
    estimate: f64,
    std_error: f64,
    variance_ratio: f64,
}

#[derive(Serialize)]
struct PriceBody {
    closed_form_price: f64,
    quadrature_price: f64,
    optimal_translation: Option<f64>,
    sample_size: usize,
    rows: Vec<PriceRowJson>,
}

fn run_price(config: &RunConfig, seed_from_env: bool) -> RunResult<RunOutput> {
    let spec = build_basket(config.problem.as_ref().expect("validated"))?;
    if spec.dim() != 1 {
        return Err(other("the price command supports single-asset specs"));
    }
    let price_cfg: &PriceConfig = config.price.as_ref().expect("validated");
    let master = config.study.master_seed;

    // Training sample fits X_n*, only when a translation asks for it.
    let needs_optimal = price_cfg
        .translations
        .iter()
        .any(|t| matches!(t, Translation::Optimal));
    let optimal = if needs_optimal {
        let train = sample_iid(
            &DistributionSpec::standard_gaussian(1)?,
            price_cfg.train_size,
            derive_seed(master, price_cfg.train_size as u64, 0),
        )?;
        let obj = EmpiricalObjective::new(make_is_family(&spec), train)?;
        let res = minimize(&obj, &[0.0], &config.optimizer.to_options())?;
        if !res.converged {
            return Err(other(format!(
                "training optimization did not converge (grad norm {})",
                res.grad_norm
            )));
        }
        Some(res.x_star[0])
    } else {
        None
    };

    // Independent evaluation sample shared by all rows.
    let eval = sample_iid(
        &DistributionSpec::standard_gaussian(1)?,
        price_cfg.sample_size,
        derive_seed(master, price_cfg.sample_size as u64, 1),
    )?;
    let n = price_cfg.sample_size as f64;
    let var_zero = estimator_variance(&spec, &[0.0], &eval)?;

    let mut csv = String::from("x,estimate,std_error,variance_ratio\n");
    let mut rows = Vec::new();
    for t in &price_cfg.translations {
        let x = match t {
            Translation::Fixed(v) => *v,
            Translation::Optimal => optimal.expect("computed above"),
        };
        let estimate = translated_estimator(&spec, &[x], &eval)?;
        let var = estimator_variance(&spec, &[x], &eval)?;
        let std_error = (var / n).sqrt();
        let variance_ratio = if var_zero > 0.0 {
            var / var_zero
        } else {
            f64::NAN
        };
        csv.push_str(&format!(
            "{},{},{},{}\n",
            real(x),
            real(estimate),
            real(std_error),
            real(variance_ratio)
        ));
        rows.push(PriceRowJson {
            x,
            estimate,
            std_error,
            variance_ratio,
        });
    }

    let body = PriceBody {
        closed_form_price: bs_price_1d(&spec)?,
        quadrature_price: quadrature_price_1d(&spec, 20)?,
        optimal_translation: optimal,
        sample_size: price_cfg.sample_size,
        rows,
    };
    Ok(RunOutput {
        csv: Some(csv),
        json: summary_json(config, seed_from_env, body)?,
        valid: true,
    })
}

#[derive(Serialize)]
struct Lemma1RowJson {
    seed_index: usize,
    lhs: f64,
    rhs: f64,
    holds: bool,
}

#[derive(Serialize)]
struct Lemma1Body {
    n: usize,
    seeds: usize,
    all_hold: bool,
    rows: Vec<Lemma1RowJson>,
}

fn run_lemma1(config: &RunConfig, seed_from_env: bool) -> RunResult<RunOutput> {
    let problem = build_problem(config.problem.as_ref().expect("validated"))?;
    let lemma_cfg: &Lemma1Config = config.lemma1.as_ref().expect("validated");
    let mut rows = Vec::with_capacity(lemma_cfg.seeds);
    let mut all_hold = true;
    for idx in 0..lemma_cfg.seeds {
        let seed = derive_seed(config.study.master_seed, lemma_cfg.n as u64, idx as u64);
        let report = lemma1_check(&problem, lemma_cfg.n, seed, &lemma_cfg.theta_grid)?;
        all_hold &= report.holds;
        rows.push(Lemma1RowJson {
            seed_index: idx,
            lhs: report.lhs,
            rhs: report.rhs,
            holds: report.holds,
        });
    }
    let body = Lemma1Body {
        n: lemma_cfg.n,
        seeds: lemma_cfg.seeds,
        all_hold,
        rows,
    };
    Ok(RunOutput {
        csv: None,
        json: summary_json(config, seed_from_env, body)?,
        valid: all_hold,
    })
}

#[derive(Serialize)]
struct CheckRowJson {
    name: &'static str,
    passed: bool,
    detail: String,
}

#[derive(Serialize)]
struct CheckBody {
    all_passed: bool,
    checks: Vec<CheckRowJson>,
}

fn run_check(config: &RunConfig, seed_from_env: bool) -> RunResult<RunOutput> {
    let results = crate::checks::run_all(config.study.master_seed);
    let all_passed = results.iter().all(|c| c.passed);
    let body = CheckBody {
        all_passed,
        checks: results
            .into_iter()
            .map(|c| CheckRowJson {
                name: c.name,
                passed: c.passed,
                detail: c.detail,
            })
            .collect(),
    };
    Ok(RunOutput {
        csv: None,
        json: summary_json(config, seed_from_env, body)?,
        valid: all_passed,
    })
}
