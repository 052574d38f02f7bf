//! `hk` — config-driven front end for the random-horizon portfolio
//! laboratory: closed-form solves, path simulation, grid-search
//! verification and the property suites, all emitting plot-ready CSV.
//!
//! Exit codes: 0 success, 1 verification failure, 2 config error,
//! 3 numerical failure. Set HK_LOG=1 for progress logging on stderr
//! (verbosity only, never affects results).

mod config;
mod csv;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hk_core::{
    deflator_path, duality_check, entropy_condition_check, gen_path, grid_search_log_utility,
    numeraire_check, optimal_strategy, pseudo_stopping_check, sbar_equivalence_check, wealth_path,
    SearchSpec, StrategySpec, VerifyReport,
};

use config::{parse_config, ConfigError, ExperimentConfig};
use csv::{fmt_f64, CsvFile};

const AFTER_HELP: &str = "\
Config file (JSON). Required blocks: market {mu, sigma, zeta, lambda,
delta=0.01}, horizon {phi_m, psi_m, hazard, g0=1.0}, grid {t_horizon,
n_steps}. Optional: mc {n_paths=100000, seed=42, antithetic=false,
ci_level=0.99}, search {theta_grid, refine=false, refine_tol=1e-3},
suites [duality|pseudo-stopping|numeraire|entropy|sbar], strategies,
simulate {dump_paths=10}, experiment_id. Coefficients accept a number
or {times, values} for piecewise-constant profiles.";

#[derive(Parser)]
#[command(name = "hk", version, about = "Log-optimal portfolio laboratory under a random horizon", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Override the Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of Monte Carlo paths.
    #[arg(long)]
    paths: Option<usize>,
    /// Directory for CSV artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads (affects speed only, never results).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the first-order condition and print the optimal fraction.
    Solve(Common),
    /// Simulate paths at the optimal fraction and dump them as CSV.
    Simulate(Common),
    /// Grid-search the expected stopped log-wealth over strategies.
    GridSearch(Common),
    /// Run verification suites (default: every suite the config supports).
    Verify(Common),
    /// Run only the entropy certificate suite.
    EntropyCheck(Common),
    /// Run only the numeraire/benchmark suite.
    NumeraireCheck(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Solve(c)
            | Command::Simulate(c)
            | Command::GridSearch(c)
            | Command::Verify(c)
            | Command::EntropyCheck(c)
            | Command::NumeraireCheck(c) => c,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Simulate(_) => "simulate",
            Command::GridSearch(_) => "grid-search",
            Command::Verify(_) => "verify",
            Command::EntropyCheck(_) => "entropy-check",
            Command::NumeraireCheck(_) => "numeraire-check",
        }
    }
}

fn vlog(msg: &str) {
    if std::env::var("HK_LOG")
        .map(|v| !v.is_empty())
        .unwrap_or(false)
    {
        eprintln!("hk: {msg}");
    }
}

enum Failure {
    Config(ConfigError),
    Numerical(hk_core::Error),
    Io(std::io::Error),
}

impl Failure {
    fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Config(_) => ExitCode::from(2),
            Failure::Numerical(_) | Failure::Io(_) => ExitCode::from(3),
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "{e}"),
            Failure::Numerical(e) => write!(f, "{e}"),
            Failure::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<hk_core::Error> for Failure {
    fn from(e: hk_core::Error) -> Self {
        Failure::Numerical(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = cli.command.common();

    let run = || -> Result<ExitCode, Failure> {
        let mut cfg = parse_config(&common.config)?;
        if let Some(seed) = common.seed {
            cfg.mc.seed = seed;
        }
        if let Some(paths) = common.paths {
            cfg.mc.n_paths = paths;
        }
        std::fs::create_dir_all(&common.out)?;
        dispatch(&cli.command, &cfg, common)
    };

    let result = match common.threads {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build();
            match pool {
                Ok(pool) => pool.install(run),
                Err(e) => {
                    eprintln!("failed to build thread pool: {e}");
                    return ExitCode::from(3);
                }
            }
        }
        None => run(),
    };

    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: &Command, cfg: &ExperimentConfig, common: &Common) -> Result<ExitCode, Failure> {
    match cmd {
        Command::Solve(_) => run_solve(cfg, common),
        Command::Simulate(_) => run_simulate(cfg, common),
        Command::GridSearch(_) => run_grid_search(cfg, common),
        Command::Verify(_) => run_suites(cfg, common, None, cmd.name()),
        Command::EntropyCheck(_) => {
            run_suites(cfg, common, Some(vec!["entropy".into()]), cmd.name())
        }
        Command::NumeraireCheck(_) => {
            run_suites(cfg, common, Some(vec!["numeraire".into()]), cmd.name())
        }
    }
}

fn run_solve(cfg: &ExperimentConfig, common: &Common) -> Result<ExitCode, Failure> {
    let profile = cfg.model.solve_profile(cfg.grid.t_horizon);
    let mut file = CsvFile::new("t_start,theta_tilde,phi_root,kkt_residual,admissible,branch");
    for (t, rep) in &profile {
        println!(
            "t >= {t}: theta_tilde = {:.12}  (root {:.12}, kkt residual {:.3e}, admissible {}, branch {})",
            rep.theta_tilde, rep.phi_root, rep.kkt_residual, rep.admissible, rep.branch
        );
        file.row(&[
            fmt_f64(*t),
            fmt_f64(rep.theta_tilde),
            fmt_f64(rep.phi_root),
            fmt_f64(rep.kkt_residual),
            rep.admissible.to_string(),
            rep.branch.to_string(),
        ]);
    }
    file.write(&common.out.join("solve.csv"))?;
    vlog("wrote solve.csv");
    Ok(ExitCode::SUCCESS)
}

fn run_simulate(cfg: &ExperimentConfig, common: &Common) -> Result<ExitCode, Failure> {
    let theta = optimal_strategy(&cfg.model, cfg.grid.t_horizon)?;
    let strategy = StrategySpec { theta };
    let mut file = CsvFile::new("path_index,t,S,G,logV,logZ,logZm,is_jump");
    let mut violations = 0usize;
    for idx in 0..cfg.dump_paths {
        let b = gen_path(
            &cfg.model,
            &cfg.grid,
            cfg.mc.seed,
            idx as u64,
            cfg.mc.antithetic,
        )?;
        let lv = wealth_path(&b, &strategy)?;
        let dp = deflator_path(&b, &strategy)?;
        violations += b.azema_violations;
        for i in 0..b.t.len() {
            file.row(&[
                idx.to_string(),
                fmt_f64(b.t[i]),
                fmt_f64(b.s[i]),
                fmt_f64(b.g[i]),
                fmt_f64(lv[i]),
                fmt_f64(dp.log_z[i]),
                fmt_f64(b.log_zm[i]),
                (b.is_jump[i] as u8).to_string(),
            ]);
        }
    }
    file.write(&common.out.join("paths.csv"))?;
    println!(
        "simulated {} paths ({} azema violations) -> paths.csv",
        cfg.dump_paths, violations
    );
    Ok(ExitCode::SUCCESS)
}

fn run_grid_search(cfg: &ExperimentConfig, common: &Common) -> Result<ExitCode, Failure> {
    let thetas = match &cfg.search.theta_grid {
        Some(grid) => grid.clone(),
        None => hk_core::default_theta_grid(&cfg.model, cfg.grid.t_horizon),
    };
    let spec = SearchSpec {
        thetas,
        n_paths: cfg.mc.n_paths,
        seed: cfg.mc.seed,
        antithetic: cfg.mc.antithetic,
        refine: cfg.search.refine,
        refine_tol: cfg.search.refine_tol,
    };
    vlog(&format!(
        "grid search over {} strategies, {} paths",
        spec.thetas.len(),
        spec.n_paths
    ));
    let result = grid_search_log_utility(&cfg.model, &cfg.grid, &spec)?;
    let mut file = CsvFile::new("theta,mean,stderr");
    for p in &result.curve {
        file.row(&[
            fmt_f64(p.theta),
            fmt_f64(p.estimate.mean),
            fmt_f64(p.estimate.stderr),
        ]);
    }
    file.write(&common.out.join("curve.csv"))?;
    let closed = cfg.model.solve_at(0.0).theta_tilde;
    println!(
        "argmax theta = {:.6} (closed form {closed:.6}); curve.csv has {} rows",
        result.theta_star,
        result.curve.len()
    );
    if let Some(refined) = result.refined {
        println!("golden-section refinement: {refined:.6}");
    }
    Ok(ExitCode::SUCCESS)
}

fn run_suites(
    cfg: &ExperimentConfig,
    common: &Common,
    only: Option<Vec<String>>,
    command_name: &str,
) -> Result<ExitCode, Failure> {
    let selected: Vec<String> = match only.or_else(|| cfg.suites.clone()) {
        Some(list) => list,
        None => {
            let mut all = vec![
                "duality".to_string(),
                "entropy".to_string(),
                "numeraire".to_string(),
            ];
            if cfg.model.is_time_constant() {
                all.push("sbar".to_string());
            }
            if cfg.model.is_cox(cfg.grid.t_horizon) {
                all.push("pseudo-stopping".to_string());
            }
            all
        }
    };

    let mut reports: Vec<VerifyReport> = Vec::new();
    for suite in &selected {
        vlog(&format!("running suite {suite}"));
        let report = match suite.as_str() {
            "duality" => duality_check(&cfg.model, &cfg.grid, &cfg.mc)?,
            "pseudo-stopping" => pseudo_stopping_check(&cfg.model, &cfg.grid, &cfg.mc)?,
            "numeraire" => numeraire_check(&cfg.model, &cfg.grid, &cfg.mc, cfg.strategies.clone())?,
            "entropy" => entropy_condition_check(&cfg.model, &cfg.grid, &cfg.mc)?,
            "sbar" => sbar_equivalence_check(&cfg.model, &cfg.grid, &cfg.mc)?,
            other => {
                return Err(Failure::Config(ConfigError::Schema {
                    pointer: "/suites".into(),
                    message: format!("unknown suite {other}"),
                }))
            }
        };
        reports.push(report);
    }

    let experiment_id = cfg
        .experiment_id
        .clone()
        .unwrap_or_else(|| command_name.to_string());

    let mut report_csv = CsvFile::new("suite,check,status,statistic,tolerance,seed");
    let mut results_csv = CsvFile::new("experiment_id,quantity,mean,stderr,n_paths,seed");
    let mut all_pass = true;
    for report in &reports {
        println!("suite {} (seed {}):", report.suite, report.seed);
        for check in &report.checks {
            let status = if check.pass { "PASS" } else { "FAIL" };
            all_pass &= check.pass;
            println!(
                "  [{status}] {:<45} statistic {:>12.5e}  tolerance {:>12.5e}{}",
                check.name,
                check.statistic,
                check.tolerance,
                if check.note.is_empty() {
                    String::new()
                } else {
                    format!("  ({})", check.note)
                }
            );
            report_csv.row(&[
                report.suite.clone(),
                check.name.clone(),
                status.to_string(),
                fmt_f64(check.statistic),
                fmt_f64(check.tolerance),
                report.seed.to_string(),
            ]);
        }
        for q in &report.estimates {
            results_csv.row(&[
                experiment_id.clone(),
                q.quantity.clone(),
                fmt_f64(q.estimate.mean),
                fmt_f64(q.estimate.stderr),
                q.estimate.n_paths.to_string(),
                report.seed.to_string(),
            ]);
        }
    }
    report_csv.write(&common.out.join("report.csv"))?;
    results_csv.write(&common.out.join("results.csv"))?;

    if all_pass {
        println!("all {} suite(s) passed", reports.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("verification FAILED");
        Ok(ExitCode::from(1))
    }
}
