//! Named verification suites. Each suite couples a structural identity
//! (checked pathwise at machine precision) with its Monte Carlo
//! counterpart (checked at 3 standard errors / one-sided z-tests), and
//! reports every declared check — no silent skips.

use crate::error::{Error, Result};
use crate::evaluate::{
    mc_run_multi, supermartingale_test, uniform_checkpoint_times, weighted_expect_stopped,
    weighted_expect_stopped_at, McConfig, McEstimate,
};
use crate::model::{kkt_residual, Coef, HorizonParams, Model};
use crate::optimize::{
    clip_admissible, default_theta_grid, grid_search_log_utility, optimal_strategy,
    solve_pointwise, SearchSpec,
};
use crate::simulate::{
    cox_sample_tau, deflator_path, gen_path, market_deflator_log_path, value_stopped, wealth_path,
    GridSpec, StrategySpec,
};

/// Default significance level of the supermartingale tests.
pub const DEFAULT_ALPHA: f64 = 0.01;
/// Default number of checkpoints per supermartingale test.
pub const DEFAULT_CHECKPOINTS: usize = 8;
/// Structural identities must hold to this absolute precision.
pub const STRUCTURAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    /// The quantity the check thresholded (max deviation, worst z, ...).
    pub statistic: f64,
    pub tolerance: f64,
    pub note: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, pass: bool, statistic: f64, tolerance: f64) -> Self {
        CheckResult {
            name: name.into(),
            pass,
            statistic,
            tolerance,
            note: String::new(),
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

#[derive(Debug, Clone)]
pub struct QuantityEstimate {
    pub quantity: String,
    pub estimate: McEstimate,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub suite: String,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub estimates: Vec<QuantityEstimate>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn shift_strategy(model: &Model, base: &Coef, t_max: f64, delta: f64) -> Coef {
    let shifted = |d: f64| -> Coef {
        match base {
            Coef::Const(v) => Coef::Const(v + d),
            Coef::Piecewise { times, values } => Coef::Piecewise {
                times: times.clone(),
                values: values.iter().map(|v| v + d).collect(),
            },
        }
    };
    let admissible = |c: &Coef| -> bool {
        let mut starts = vec![0.0];
        starts.extend(model.breakpoints(t_max));
        starts
            .iter()
            .all(|&t| 1.0 + c.value_at(t) * model.cell_at(t).zeta > 1e-6)
    };
    let up = shifted(delta);
    if admissible(&up) {
        up
    } else {
        shifted(-delta)
    }
}

/// Duality of the optimal wealth and the optimal deflator.
///
/// Checks: (i) the pathwise product identity deflator × wealth ≡ 1 at
/// every node, (ii) the weighted primal and dual values agree, (iii) the
/// dual value recomputed through the base-market deflator divided by the
/// survival exponential matches, (iv) perturbing the deflator's fraction
/// destroys the product identity.
pub fn duality_check(model: &Model, grid: &GridSpec, mc: &McConfig) -> Result<VerifyReport> {
    let theta = optimal_strategy(model, grid.t_horizon)?;
    let strategy = StrategySpec {
        theta: theta.clone(),
    };
    let perturbed = StrategySpec {
        theta: shift_strategy(model, &theta, grid.t_horizon, 0.1),
    };

    let n_pathwise = mc.n_paths.min(1000).max(2);
    let mut max_product_dev = 0.0_f64;
    let mut max_route_dev = 0.0_f64;
    let mut min_perturbed_dev = f64::INFINITY;
    for idx in 0..n_pathwise {
        let b = gen_path(model, grid, mc.seed, idx as u64, false)?;
        let lv = wealth_path(&b, &strategy)?;
        let dp = deflator_path(&b, &strategy)?;
        let zf = market_deflator_log_path(&b, &strategy)?;
        let mut dev_p = 0.0_f64;
        for i in 0..b.t.len() {
            dev_p = dev_p.max(((dp.log_z[i] + lv[i]).exp() - 1.0).abs());
            max_route_dev = max_route_dev.max((zf[i] - b.log_zm[i] - dp.log_z[i]).abs());
        }
        max_product_dev = max_product_dev.max(dev_p);

        let dpp = deflator_path(&b, &perturbed)?;
        let mut dev_q = 0.0_f64;
        for i in 0..b.t.len() {
            dev_q = dev_q.max(((dpp.log_z[i] + lv[i]).exp() - 1.0).abs());
        }
        min_perturbed_dev = min_perturbed_dev.min(dev_q);
    }

    let est = mc_run_multi(model, grid, mc, 3, |b, out| {
        let lv = wealth_path(b, &strategy)?;
        let dp = deflator_path(b, &strategy)?;
        let zf = market_deflator_log_path(b, &strategy)?;
        out[0] = weighted_expect_stopped(&lv, b)?;
        let neg_log_z: Vec<f64> = dp.log_z.iter().map(|x| -x).collect();
        out[1] = weighted_expect_stopped(&neg_log_z, b)?;
        let route: Vec<f64> = zf
            .iter()
            .zip(b.log_zm.iter())
            .map(|(a, m)| -(a - m))
            .collect();
        out[2] = weighted_expect_stopped(&route, b)?;
        Ok(())
    })?;

    let d12 = (est[0].mean - est[1].mean).abs();
    let s12 = 3.0 * est[0].combined_stderr(&est[1]);
    let d23 = (est[2].mean - est[1].mean).abs();
    let s23 = 3.0 * est[2].combined_stderr(&est[1]);

    let checks = vec![
        CheckResult::new(
            "pathwise_product_identity",
            max_product_dev <= STRUCTURAL_TOL,
            max_product_dev,
            STRUCTURAL_TOL,
        )
        .with_note(format!("{n_pathwise} paths, all nodes")),
        CheckResult::new("primal_dual_mc_agreement", d12 <= s12, d12, s12).with_note(format!(
            "primal {:.6e} dual {:.6e}",
            est[0].mean, est[1].mean
        )),
        CheckResult::new("dual_value_via_market_deflator", d23 <= s23, d23, s23)
            .with_note(format!("pathwise route deviation {max_route_dev:.3e}")),
        CheckResult::new(
            "perturbed_deflator_detected",
            min_perturbed_dev > 1e-6,
            min_perturbed_dev,
            1e-6,
        )
        .with_note("every path must break the product identity".to_string()),
    ];

    Ok(VerifyReport {
        suite: "duality".into(),
        seed: mc.seed,
        checks,
        estimates: vec![
            QuantityEstimate {
                quantity: "primal_log_wealth".into(),
                estimate: est[0],
            },
            QuantityEstimate {
                quantity: "dual_neg_log_deflator".into(),
                estimate: est[1],
            },
            QuantityEstimate {
                quantity: "dual_via_market_deflator".into(),
                estimate: est[2],
            },
        ],
    })
}

/// Constant-survival-martingale regime: the optimizer ignores the hazard
/// entirely, the survival exponential is identically one, and the
/// weighted estimator agrees with direct horizon sampling.
pub fn pseudo_stopping_check(
    model: &Model,
    grid: &GridSpec,
    mc: &McConfig,
) -> Result<VerifyReport> {
    if !model.is_cox(grid.t_horizon) {
        return Err(Error::UnsupportedRegime(
            "pseudo-stopping suite needs phi_m = 0 and psi_m = 1".into(),
        ));
    }

    let horizon_free = Model::new(model.market.clone(), HorizonParams::neutral())?;
    let with_horizon = model.solve_profile(grid.t_horizon);
    let free = horizon_free.solve_profile(grid.t_horizon);
    let mut max_diff = 0.0_f64;
    let mut bit_equal = with_horizon.len() == free.len();
    for ((_, a), (_, b)) in with_horizon.iter().zip(free.iter()) {
        bit_equal &= a.theta_tilde.to_bits() == b.theta_tilde.to_bits();
        max_diff = max_diff.max((a.theta_tilde - b.theta_tilde).abs());
    }

    let theta = optimal_strategy(model, grid.t_horizon)?;
    let strategy = StrategySpec { theta };
    let est = mc_run_multi(model, grid, mc, 2, |b, out| {
        let lv = wealth_path(b, &strategy)?;
        out[0] = weighted_expect_stopped(&lv, b)?;
        let tau = cox_sample_tau(b, b.cox_u)?;
        out[1] = value_stopped(&lv, b, tau);
        Ok(())
    })?;
    let diff = (est[0].mean - est[1].mean).abs();
    let tol = 3.0 * est[0].combined_stderr(&est[1]);

    let n_pathwise = mc.n_paths.min(1000).max(2);
    let mut max_zm_dev = 0.0_f64;
    for idx in 0..n_pathwise {
        let b = gen_path(model, grid, mc.seed, idx as u64, false)?;
        for z in &b.log_zm {
            max_zm_dev = max_zm_dev.max(z.exp_m1().abs());
        }
    }

    let checks = vec![
        CheckResult::new("optimizer_hazard_invariant", bit_equal, max_diff, 0.0)
            .with_note("bitwise comparison against the horizon-free solve"),
        CheckResult::new("weighted_direct_agreement", diff <= tol, diff, tol).with_note(format!(
            "weighted {:.6e} direct {:.6e}",
            est[0].mean, est[1].mean
        )),
        CheckResult::new(
            "survival_exponential_is_one",
            max_zm_dev <= 1e-15,
            max_zm_dev,
            1e-15,
        ),
    ];

    Ok(VerifyReport {
        suite: "pseudo-stopping".into(),
        seed: mc.seed,
        checks,
        estimates: vec![
            QuantityEstimate {
                quantity: "weighted_stopped_log_wealth".into(),
                estimate: est[0],
            },
            QuantityEstimate {
                quantity: "direct_stopped_log_wealth".into(),
                estimate: est[1],
            },
        ],
    })
}

struct RatioLayout {
    n_strategies: usize,
    k: usize,
}

impl RatioLayout {
    // slot order: denom (0 = optimal, 1 = perturbed), side (0 = base
    // market, 1 = stopped/weighted), strategy, increment
    fn slot(&self, denom: usize, side: usize, strat: usize, inc: usize) -> usize {
        ((denom * 2 + side) * self.n_strategies + strat) * self.k + inc
    }

    fn len(&self) -> usize {
        2 * 2 * self.n_strategies * self.k
    }
}

/// Benchmark property of the optimal wealth: deflated wealth ratios are
/// supermartingales on the base market (against the survival
/// exponential) and on the stopped market (through the weighted
/// estimator), for every admissible test strategy — and the property
/// breaks when the benchmark fraction is perturbed.
pub fn numeraire_check(
    model: &Model,
    grid: &GridSpec,
    mc: &McConfig,
    strategies: Option<Vec<f64>>,
) -> Result<VerifyReport> {
    let t_end = grid.t_horizon;
    let theta0 = model.solve_at(0.0).theta_tilde;
    let strategies = strategies.unwrap_or_else(|| {
        vec![
            0.0,
            theta0 / 2.0,
            theta0,
            clip_admissible(model, theta0 + 0.5, t_end, 1e-3),
        ]
    });
    if strategies.len() < 3 {
        return Err(Error::invalid("need at least 3 test strategies", 0));
    }
    if grid.n_steps < DEFAULT_CHECKPOINTS {
        return Err(Error::invalid(
            "grid must have at least as many steps as checkpoints",
            0,
        ));
    }
    let candidate = clip_admissible(model, theta0 + 0.5, t_end, 1e-3);

    let opt = StrategySpec {
        theta: optimal_strategy(model, t_end)?,
    };
    let cand = StrategySpec::constant(candidate);
    let layout = RatioLayout {
        n_strategies: strategies.len(),
        k: DEFAULT_CHECKPOINTS,
    };
    let cps = uniform_checkpoint_times(grid, layout.k);

    let strategies_for_eval = strategies.clone();
    let est = mc_run_multi(model, grid, mc, layout.len(), |b, out| {
        let nodes: Vec<usize> = cps
            .iter()
            .map(|&t| b.node_at(t))
            .collect::<Result<Vec<_>>>()?;
        let lv_opt = wealth_path(b, &opt)?;
        let lv_cand = wealth_path(b, &cand)?;
        let mut ratio = vec![0.0_f64; b.t.len()];
        for (si, &s) in strategies_for_eval.iter().enumerate() {
            let lv_s = wealth_path(b, &StrategySpec::constant(s))?;
            for (di, lv_den) in [&lv_opt, &lv_cand].into_iter().enumerate() {
                for i in 0..b.t.len() {
                    ratio[i] = (lv_s[i] - lv_den[i]).exp();
                }
                // base-market side: survival exponential times the ratio
                let mut prev = 1.0_f64;
                for (j, &n) in nodes.iter().enumerate() {
                    let x = (b.log_zm[n] + lv_s[n] - lv_den[n]).exp();
                    out[layout.slot(di, 0, si, j)] = x - prev;
                    prev = x;
                }
                // stopped side: weighted value of the plain ratio
                let mut prev = b.g[0];
                for (j, &n) in nodes.iter().enumerate() {
                    let x = weighted_expect_stopped_at(&ratio, b, n);
                    out[layout.slot(di, 1, si, j)] = x - prev;
                    prev = x;
                }
            }
        }
        Ok(())
    })?;

    let mut checks = Vec::new();
    let mut f_pass = vec![false; strategies.len()];
    let mut g_pass = vec![false; strategies.len()];
    let mut cand_f_fail = false;
    let mut cand_g_fail = false;
    for (si, &s) in strategies.iter().enumerate() {
        for side in 0..2 {
            let incs: Vec<McEstimate> = (0..layout.k)
                .map(|j| est[layout.slot(0, side, si, j)])
                .collect();
            let rep = supermartingale_test(&incs, DEFAULT_ALPHA)?;
            let name = if side == 0 {
                format!("base_side_supermartingale(theta={s:.4})")
            } else {
                format!("stopped_side_supermartingale(theta={s:.4})")
            };
            if side == 0 {
                f_pass[si] = rep.pass;
            } else {
                g_pass[si] = rep.pass;
            }
            checks.push(
                CheckResult::new(name, rep.pass, rep.worst_z, rep.z_crit)
                    .with_note(format!("{} checkpoints, alpha {}", layout.k, DEFAULT_ALPHA)),
            );

            let incs_cand: Vec<McEstimate> = (0..layout.k)
                .map(|j| est[layout.slot(1, side, si, j)])
                .collect();
            let rep_cand = supermartingale_test(&incs_cand, DEFAULT_ALPHA)?;
            if !rep_cand.pass {
                if side == 0 {
                    cand_f_fail = true;
                } else {
                    cand_g_fail = true;
                }
            }
        }
    }

    let verdicts_agree = f_pass.iter().zip(g_pass.iter()).all(|(a, b)| a == b);
    checks.push(
        CheckResult::new(
            "base_and_stopped_verdicts_agree",
            verdicts_agree,
            if verdicts_agree { 0.0 } else { 1.0 },
            0.0,
        )
        .with_note("both sides must accept or reject together"),
    );
    checks.push(
        CheckResult::new(
            "perturbed_candidate_rejected_base_side",
            cand_f_fail,
            if cand_f_fail { 1.0 } else { 0.0 },
            1.0,
        )
        .with_note(format!("candidate fraction {candidate:.4}")),
    );
    checks.push(
        CheckResult::new(
            "perturbed_candidate_rejected_stopped_side",
            cand_g_fail,
            if cand_g_fail { 1.0 } else { 0.0 },
            1.0,
        )
        .with_note(format!("candidate fraction {candidate:.4}")),
    );

    Ok(VerifyReport {
        suite: "numeraire".into(),
        seed: mc.seed,
        checks,
        estimates: Vec::new(),
    })
}

/// Existence certificate for the stopped-market optimizer: the expected
/// survival-weighted entropy-Hellinger accumulation is finite and its
/// closed form matches the pathwise Monte Carlo accumulation.
pub fn entropy_condition_check(
    model: &Model,
    grid: &GridSpec,
    mc: &McConfig,
) -> Result<VerifyReport> {
    let analytic = model.entropy_certificate(grid.t_horizon)?;

    let est = mc_run_multi(model, grid, mc, 1, |b, out| {
        let mut acc = 0.0_f64;
        for i in 0..b.n_cells() {
            let c = &b.cells[i];
            let dt = b.t[i + 1] - b.t[i];
            let g_left = b.g[i];
            let g_right = b.pre_jump_g(i + 1);
            acc += 0.25 * c.phi_m * c.phi_m * (g_left + g_right) * dt;
            if b.is_jump[i + 1] {
                acc += g_right * (c.psi_m * c.psi_m.ln() - c.psi_m + 1.0);
            }
        }
        out[0] = acc;
        Ok(())
    })?;
    let mc_est = est[0];
    let diff = (analytic - mc_est.mean).abs();
    let tol = 3.0 * mc_est.stderr;

    // The same accumulation on the neutral horizon must vanish exactly.
    let neutral = Model::new(
        model.market.clone(),
        HorizonParams {
            phi_m: Coef::Const(0.0),
            psi_m: Coef::Const(1.0),
            hazard: model.horizon.hazard.clone(),
            g0: model.horizon.g0,
        },
    )?;
    let neutral_mc = McConfig {
        n_paths: mc.n_paths.clamp(2, 256),
        ..*mc
    };
    let neutral_est = mc_run_multi(&neutral, grid, &neutral_mc, 1, |b, out| {
        let mut acc = 0.0_f64;
        for i in 0..b.n_cells() {
            let c = &b.cells[i];
            let dt = b.t[i + 1] - b.t[i];
            acc += 0.25 * c.phi_m * c.phi_m * (b.g[i] + b.pre_jump_g(i + 1)) * dt;
            if b.is_jump[i + 1] {
                acc += b.pre_jump_g(i + 1) * (c.psi_m * c.psi_m.ln() - c.psi_m + 1.0);
            }
        }
        out[0] = acc;
        Ok(())
    })?[0];
    let neutral_exact = neutral_est.mean == 0.0 && neutral_est.stderr == 0.0;

    let checks = vec![
        CheckResult::new("analytic_matches_pathwise_mc", diff <= tol, diff, tol)
            .with_note(format!("analytic {:.9e} mc {:.9e}", analytic, mc_est.mean)),
        CheckResult::new(
            "neutral_horizon_exactly_zero",
            neutral_exact,
            neutral_est.mean.abs().max(neutral_est.stderr),
            0.0,
        ),
        CheckResult::new(
            "certificate_finite",
            analytic.is_finite() && analytic >= 0.0,
            analytic,
            f64::INFINITY,
        ),
    ];

    Ok(VerifyReport {
        suite: "entropy".into(),
        seed: mc.seed,
        checks,
        estimates: vec![
            QuantityEstimate {
                quantity: "entropy_certificate_analytic".into(),
                estimate: McEstimate {
                    mean: analytic,
                    stderr: 0.0,
                    n_paths: 0,
                    ci_level: mc.ci_level,
                },
            },
            QuantityEstimate {
                quantity: "entropy_certificate_mc".into(),
                estimate: mc_est,
            },
        ],
    })
}

/// Companion-market equivalence: the optimizer of the rescaled market is
/// θ̃/ψₘ, both through the root solver and through an independent
/// fixed-horizon grid search.
pub fn sbar_equivalence_check(
    model: &Model,
    grid: &GridSpec,
    mc: &McConfig,
) -> Result<VerifyReport> {
    let base = model.cell_at(0.0);
    let theta0 = model.solve_at(0.0).theta_tilde;
    let target = theta0 / base.psi_m;

    let transformed = model.transformed()?;
    let t_cell = transformed.cell_at(0.0);

    let solver = solve_pointwise(&t_cell)?;
    let d_solver = (solver - target).abs();
    let kkt = kkt_residual(target, &t_cell)?.abs();

    // Fixed horizon, no stopping: hazard-free copy of the transformed
    // model (its optimizer is hazard-invariant anyway).
    let search_model = Model::new(
        transformed.market.clone(),
        HorizonParams::constant(t_cell.phi_m, 1.0, 0.0, 1.0),
    )?;
    let spec = SearchSpec::new(
        default_theta_grid(&search_model, grid.t_horizon),
        mc.n_paths,
        mc.seed,
    );
    let search = grid_search_log_utility(&search_model, grid, &spec)?;
    let cell_width = 0.1;
    let d_peak = (search.theta_star - target).abs();

    let peak_estimate = search
        .curve
        .iter()
        .max_by(|a, b| a.estimate.mean.partial_cmp(&b.estimate.mean).unwrap())
        .map(|p| p.estimate)
        .unwrap();

    let checks = vec![
        CheckResult::new(
            "solver_recovers_scaled_optimum",
            d_solver <= STRUCTURAL_TOL,
            d_solver,
            STRUCTURAL_TOL,
        )
        .with_note(format!("target {target:.12}")),
        CheckResult::new(
            "kkt_zero_at_scaled_optimum",
            kkt <= STRUCTURAL_TOL,
            kkt,
            STRUCTURAL_TOL,
        ),
        CheckResult::new(
            "grid_search_peak_within_cell",
            d_peak <= cell_width + 1e-12,
            d_peak,
            cell_width,
        )
        .with_note(format!("argmax {:.4}", search.theta_star)),
    ];

    Ok(VerifyReport {
        suite: "sbar".into(),
        seed: mc.seed,
        checks,
        estimates: vec![QuantityEstimate {
            quantity: "sbar_peak_log_wealth".into(),
            estimate: peak_estimate,
        }],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MarketParams;

    fn reference_model(phi_m: f64, psi_m: f64, hazard: f64) -> Model {
        Model::new(
            MarketParams::constant(0.05, 0.2, 0.1, 1.0, 0.01),
            HorizonParams::constant(phi_m, psi_m, hazard, 1.0),
        )
        .unwrap()
    }

    fn small_mc(n: usize) -> McConfig {
        McConfig::default().with_paths(n).with_seed(7)
    }

    #[test]
    fn duality_suite_passes_on_tilted_config() {
        let model = reference_model(0.1, 1.5, 0.5);
        let grid = GridSpec::new(1.0, 64).unwrap();
        let report = duality_check(&model, &grid, &small_mc(2000)).unwrap();
        assert_eq!(report.checks.len(), 4);
        for c in &report.checks {
            assert!(
                c.pass,
                "{}: statistic {} tol {}",
                c.name, c.statistic, c.tolerance
            );
        }
    }

    #[test]
    fn duality_values_vanish_on_zero_drift() {
        let model = Model::new(
            MarketParams::constant(0.0, 0.2, 0.1, 1.0, 0.01),
            HorizonParams::constant(0.0, 1.0, 0.5, 1.0),
        )
        .unwrap();
        let grid = GridSpec::new(1.0, 32).unwrap();
        let report = duality_check(&model, &grid, &small_mc(500)).unwrap();
        for q in &report.estimates {
            assert!(
                q.estimate.mean.abs() < 1e-12,
                "{} = {}",
                q.quantity,
                q.estimate.mean
            );
        }
    }

    #[test]
    fn pseudo_stopping_suite_passes_and_guards_regime() {
        let model = reference_model(0.0, 1.0, 0.5);
        let grid = GridSpec::new(1.0, 64).unwrap();
        let report = pseudo_stopping_check(&model, &grid, &small_mc(4000)).unwrap();
        for c in &report.checks {
            assert!(c.pass, "{}: {} vs {}", c.name, c.statistic, c.tolerance);
        }
        let tilted = reference_model(0.1, 1.0, 0.5);
        assert!(matches!(
            pseudo_stopping_check(&tilted, &grid, &small_mc(100)),
            Err(Error::UnsupportedRegime(_))
        ));
    }

    #[test]
    fn entropy_suite_matches_closed_form() {
        let model = reference_model(0.1, 1.5, 0.5);
        let grid = GridSpec::new(1.0, 64).unwrap();
        let report = entropy_condition_check(&model, &grid, &small_mc(4000)).unwrap();
        for c in &report.checks {
            assert!(c.pass, "{}: {} vs {}", c.name, c.statistic, c.tolerance);
        }
    }

    #[test]
    fn sbar_suite_recovers_scaled_optimum() {
        let model = reference_model(0.0, 2.0, 0.5);
        let grid = GridSpec::new(1.0, 32).unwrap();
        let report = sbar_equivalence_check(&model, &grid, &small_mc(20_000)).unwrap();
        for c in &report.checks {
            assert!(c.pass, "{}: {} vs {}", c.name, c.statistic, c.tolerance);
        }
    }

    #[test]
    fn numeraire_suite_accepts_optimum_and_rejects_perturbation() {
        let model = reference_model(0.1, 1.5, 0.5);
        let grid = GridSpec::new(1.0, 64).unwrap();
        let report = numeraire_check(&model, &grid, &small_mc(20_000), None).unwrap();
        for c in &report.checks {
            assert!(
                c.pass,
                "{}: statistic {} tol {}",
                c.name, c.statistic, c.tolerance
            );
        }
    }
}
