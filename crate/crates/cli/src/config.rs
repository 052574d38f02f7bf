//! JSON experiment configs: schema-checked before any compute, unknown
//! keys rejected, errors carry a JSON-pointer location.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde_json::{Map, Value};

use hk_core::{Coef, GridSpec, HorizonParams, MarketParams, McConfig, Model};

/// Errors raised before any computation starts. Both map to exit code 2.
#[derive(Debug)]
pub enum ConfigError {
    /// The file is not well-formed JSON.
    Parse(String),
    /// The document violates the schema or a model constraint.
    Schema { pointer: String, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse(m) => write!(f, "config parse error: {m}"),
            ConfigError::Schema { pointer, message } => {
                write!(f, "config schema error at {pointer}: {message}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

fn schema(pointer: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Schema {
        pointer: pointer.into(),
        message: message.into(),
    }
}

/// Grid-search block.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub theta_grid: Option<Vec<f64>>,
    pub refine: bool,
    pub refine_tol: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            theta_grid: None,
            refine: false,
            refine_tol: 1e-3,
        }
    }
}

/// Fully validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment_id: Option<String>,
    pub model: Model,
    pub grid: GridSpec,
    pub mc: McConfig,
    pub search: SearchConfig,
    pub suites: Option<Vec<String>>,
    pub strategies: Option<Vec<f64>>,
    pub dump_paths: usize,
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let root: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let root = as_object(&root, "")?;
    reject_unknown(
        root,
        "",
        &[
            "experiment_id",
            "market",
            "horizon",
            "grid",
            "mc",
            "search",
            "suites",
            "strategies",
            "simulate",
        ],
    )?;

    let experiment_id = match root.get("experiment_id") {
        None => None,
        Some(v) => Some(
            v.as_str()
                .ok_or_else(|| schema("/experiment_id", "expected a string"))?
                .to_string(),
        ),
    };

    let market = parse_market(require(root, "", "market")?)?;
    let horizon = parse_horizon(require(root, "", "horizon")?)?;
    let grid = parse_grid(require(root, "", "grid")?)?;
    let mc = parse_mc(root.get("mc"))?;
    let search = parse_search(root.get("search"))?;
    let suites = parse_suites(root.get("suites"))?;
    let strategies = match root.get("strategies") {
        None => None,
        Some(v) => Some(number_list(v, "/strategies")?),
    };
    let dump_paths = parse_simulate(root.get("simulate"))?;

    let model = Model::new(market, horizon).map_err(|e| match &e {
        hk_core::Error::InvalidParams { constraint, index } => schema(
            if constraint.contains("psi_m")
                || constraint.contains("hazard")
                || constraint.contains("phi_m")
                || constraint.contains("g0")
            {
                "/horizon".to_string()
            } else {
                "/market".to_string()
            },
            format!("{constraint} violated (segment {index})"),
        ),
        _ => schema("/", e.to_string()),
    })?;

    Ok(ExperimentConfig {
        experiment_id,
        model,
        grid,
        mc,
        search,
        suites,
        strategies,
        dump_paths,
    })
}

fn as_object<'a>(v: &'a Value, pointer: &str) -> Result<&'a Map<String, Value>, ConfigError> {
    v.as_object().ok_or_else(|| {
        schema(
            if pointer.is_empty() { "/" } else { pointer },
            "expected an object",
        )
    })
}

fn reject_unknown(
    obj: &Map<String, Value>,
    pointer: &str,
    allowed: &[&str],
) -> Result<(), ConfigError> {
    let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
    for key in obj.keys() {
        if !allowed.contains(key.as_str()) {
            return Err(schema(
                format!("{pointer}/{key}"),
                format!(
                    "unknown field (allowed: {})",
                    allowed.iter().cloned().collect::<Vec<_>>().join(", ")
                ),
            ));
        }
    }
    Ok(())
}

fn require<'a>(
    obj: &'a Map<String, Value>,
    pointer: &str,
    key: &str,
) -> Result<&'a Value, ConfigError> {
    obj.get(key)
        .ok_or_else(|| schema(format!("{pointer}/{key}"), "missing required field"))
}

fn finite_number(v: &Value, pointer: &str) -> Result<f64, ConfigError> {
    let x = v
        .as_f64()
        .ok_or_else(|| schema(pointer, "expected a number"))?;
    if !x.is_finite() {
        return Err(schema(pointer, "number must be finite"));
    }
    Ok(x)
}

fn number_list(v: &Value, pointer: &str) -> Result<Vec<f64>, ConfigError> {
    let arr = v
        .as_array()
        .ok_or_else(|| schema(pointer, "expected an array of numbers"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| finite_number(x, &format!("{pointer}/{i}")))
        .collect()
}

/// A coefficient is a plain number or `{"times": [...], "values": [...]}`.
fn parse_coef(v: &Value, pointer: &str) -> Result<Coef, ConfigError> {
    if v.is_number() {
        return Ok(Coef::Const(finite_number(v, pointer)?));
    }
    let obj = as_object(v, pointer)?;
    reject_unknown(obj, pointer, &["times", "values"])?;
    let times = number_list(require(obj, pointer, "times")?, &format!("{pointer}/times"))?;
    let values = number_list(
        require(obj, pointer, "values")?,
        &format!("{pointer}/values"),
    )?;
    if values.len() != times.len() + 1 {
        return Err(schema(
            format!("{pointer}/values"),
            "need exactly one more value than breakpoints",
        ));
    }
    Ok(Coef::Piecewise { times, values })
}

fn parse_market(v: &Value) -> Result<MarketParams, ConfigError> {
    let obj = as_object(v, "/market")?;
    reject_unknown(obj, "/market", &["mu", "sigma", "zeta", "lambda", "delta"])?;
    Ok(MarketParams {
        mu: parse_coef(require(obj, "/market", "mu")?, "/market/mu")?,
        sigma: parse_coef(require(obj, "/market", "sigma")?, "/market/sigma")?,
        zeta: parse_coef(require(obj, "/market", "zeta")?, "/market/zeta")?,
        lambda: parse_coef(require(obj, "/market", "lambda")?, "/market/lambda")?,
        delta: match obj.get("delta") {
            None => 0.01,
            Some(v) => finite_number(v, "/market/delta")?,
        },
    })
}

fn parse_horizon(v: &Value) -> Result<HorizonParams, ConfigError> {
    let obj = as_object(v, "/horizon")?;
    reject_unknown(obj, "/horizon", &["phi_m", "psi_m", "hazard", "g0"])?;
    Ok(HorizonParams {
        phi_m: parse_coef(require(obj, "/horizon", "phi_m")?, "/horizon/phi_m")?,
        psi_m: parse_coef(require(obj, "/horizon", "psi_m")?, "/horizon/psi_m")?,
        hazard: parse_coef(require(obj, "/horizon", "hazard")?, "/horizon/hazard")?,
        g0: match obj.get("g0") {
            None => 1.0,
            Some(v) => finite_number(v, "/horizon/g0")?,
        },
    })
}

fn parse_grid(v: &Value) -> Result<GridSpec, ConfigError> {
    let obj = as_object(v, "/grid")?;
    reject_unknown(obj, "/grid", &["t_horizon", "n_steps"])?;
    let t = finite_number(require(obj, "/grid", "t_horizon")?, "/grid/t_horizon")?;
    let n = require(obj, "/grid", "n_steps")?
        .as_u64()
        .ok_or_else(|| schema("/grid/n_steps", "expected a positive integer"))?;
    GridSpec::new(t, n as usize).map_err(|e| schema("/grid", e.to_string()))
}

fn parse_mc(v: Option<&Value>) -> Result<McConfig, ConfigError> {
    let mut mc = McConfig::default();
    let Some(v) = v else { return Ok(mc) };
    let obj = as_object(v, "/mc")?;
    reject_unknown(obj, "/mc", &["n_paths", "seed", "antithetic", "ci_level"])?;
    if let Some(n) = obj.get("n_paths") {
        mc.n_paths = n
            .as_u64()
            .ok_or_else(|| schema("/mc/n_paths", "expected a positive integer"))?
            as usize;
        if mc.n_paths < 2 {
            return Err(schema("/mc/n_paths", "need at least 2 paths"));
        }
    }
    if let Some(s) = obj.get("seed") {
        mc.seed = s
            .as_u64()
            .ok_or_else(|| schema("/mc/seed", "expected a nonnegative integer"))?;
    }
    if let Some(a) = obj.get("antithetic") {
        mc.antithetic = a
            .as_bool()
            .ok_or_else(|| schema("/mc/antithetic", "expected a boolean"))?;
    }
    if let Some(c) = obj.get("ci_level") {
        mc.ci_level = finite_number(c, "/mc/ci_level")?;
        if !(mc.ci_level > 0.0 && mc.ci_level < 1.0) {
            return Err(schema("/mc/ci_level", "must lie in (0, 1)"));
        }
    }
    Ok(mc)
}

fn parse_search(v: Option<&Value>) -> Result<SearchConfig, ConfigError> {
    let mut cfg = SearchConfig::default();
    let Some(v) = v else { return Ok(cfg) };
    let obj = as_object(v, "/search")?;
    reject_unknown(obj, "/search", &["theta_grid", "refine", "refine_tol"])?;
    if let Some(g) = obj.get("theta_grid") {
        cfg.theta_grid = Some(number_list(g, "/search/theta_grid")?);
    }
    if let Some(r) = obj.get("refine") {
        cfg.refine = r
            .as_bool()
            .ok_or_else(|| schema("/search/refine", "expected a boolean"))?;
    }
    if let Some(t) = obj.get("refine_tol") {
        cfg.refine_tol = finite_number(t, "/search/refine_tol")?;
        if !(cfg.refine_tol > 0.0) {
            return Err(schema("/search/refine_tol", "must be positive"));
        }
    }
    Ok(cfg)
}

const KNOWN_SUITES: [&str; 5] = ["duality", "pseudo-stopping", "numeraire", "entropy", "sbar"];

fn parse_suites(v: Option<&Value>) -> Result<Option<Vec<String>>, ConfigError> {
    let Some(v) = v else { return Ok(None) };
    let arr = v
        .as_array()
        .ok_or_else(|| schema("/suites", "expected an array of suite names"))?;
    let mut out = Vec::new();
    for (i, s) in arr.iter().enumerate() {
        let name = s
            .as_str()
            .ok_or_else(|| schema(format!("/suites/{i}"), "expected a string"))?;
        if !KNOWN_SUITES.contains(&name) {
            return Err(schema(
                format!("/suites/{i}"),
                format!("unknown suite (known: {})", KNOWN_SUITES.join(", ")),
            ));
        }
        out.push(name.to_string());
    }
    Ok(Some(out))
}

fn parse_simulate(v: Option<&Value>) -> Result<usize, ConfigError> {
    let Some(v) = v else { return Ok(10) };
    let obj = as_object(v, "/simulate")?;
    reject_unknown(obj, "/simulate", &["dump_paths"])?;
    match obj.get("dump_paths") {
        None => Ok(10),
        Some(n) => Ok(n
            .as_u64()
            .ok_or_else(|| schema("/simulate/dump_paths", "expected a nonnegative integer"))?
            as usize),
    }
}
