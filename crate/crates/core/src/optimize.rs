//! Independent optimizers that recover the log-optimal fraction without
//! using the closed form: a common-random-number grid search over the
//! weighted expected log-wealth, a golden-section refinement, and a
//! safeguarded root solver on the first-order condition.

use crate::error::{Error, Result};
use crate::evaluate::{mc_run, mc_run_multi, weighted_expect_stopped, McConfig, McEstimate};
use crate::model::{kkt_residual, Branch, Coef, Model, ModelCell, ZETA_BRANCH_TOL};
use crate::simulate::{wealth_path, GridSpec, StrategySpec};

/// Stay this far inside the admissibility pole 1 + θζ = 0.
const POLE_MARGIN: f64 = 1e-6;

/// Grid-search settings. Every grid point must be admissible for the
/// market the search runs on.
#[derive(Debug, Clone)]
pub struct SearchSpec {
    pub thetas: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub antithetic: bool,
    pub refine: bool,
    pub refine_tol: f64,
}

impl SearchSpec {
    pub fn new(thetas: Vec<f64>, n_paths: usize, seed: u64) -> Self {
        SearchSpec {
            thetas,
            n_paths,
            seed,
            antithetic: false,
            refine: false,
            refine_tol: 1e-3,
        }
    }
}

/// One evaluated strategy on the value curve.
#[derive(Debug, Clone)]
pub struct ValuePoint {
    pub theta: f64,
    pub estimate: McEstimate,
}

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub theta_star: f64,
    pub curve: Vec<ValuePoint>,
    pub refined: Option<f64>,
}

/// Smallest value of 1 + θζ across all parameter segments.
fn worst_gross(model: &Model, theta: f64, t_max: f64) -> f64 {
    let mut worst = f64::INFINITY;
    let mut starts = vec![0.0];
    starts.extend(model.breakpoints(t_max));
    for t in starts {
        worst = worst.min(1.0 + theta * model.cell_at(t).zeta);
    }
    worst
}

/// Pulls θ inside the admissible region if a jump would wipe wealth out.
pub fn clip_admissible(model: &Model, theta: f64, t_max: f64, margin: f64) -> f64 {
    if worst_gross(model, theta, t_max) > margin {
        return theta;
    }
    let mut starts = vec![0.0];
    starts.extend(model.breakpoints(t_max));
    let mut clipped = theta;
    for t in starts {
        let zeta = model.cell_at(t).zeta;
        if zeta.abs() < ZETA_BRANCH_TOL {
            continue;
        }
        let bound = (margin - 1.0) / zeta;
        if zeta > 0.0 {
            clipped = clipped.max(bound);
        } else {
            clipped = clipped.min(bound);
        }
    }
    clipped
}

/// Default verification grid: 41 points spanning θ̃ ± 2, dropped where a
/// jump would make wealth nonpositive.
pub fn default_theta_grid(model: &Model, t_max: f64) -> Vec<f64> {
    let center = model.solve_at(0.0).theta_tilde;
    (0..41)
        .map(|i| center - 2.0 + 0.1 * i as f64)
        .filter(|&th| worst_gross(model, th, t_max) > POLE_MARGIN)
        .collect()
}

/// Estimates E[log-wealth at the stopped horizon] for every grid
/// strategy on a shared set of scenario bundles (common random numbers),
/// and returns the argmax together with the full value curve.
pub fn grid_search_log_utility(
    model: &Model,
    grid: &GridSpec,
    spec: &SearchSpec,
) -> Result<GridSearchResult> {
    if spec.thetas.is_empty() {
        return Err(Error::invalid("theta grid must not be empty", 0));
    }
    for &th in &spec.thetas {
        if worst_gross(model, th, grid.t_horizon) <= 0.0 {
            return Err(Error::NonAdmissible(format!(
                "grid point theta = {th} violates 1 + theta*zeta > 0"
            )));
        }
    }

    let mc = McConfig {
        n_paths: spec.n_paths,
        seed: spec.seed,
        antithetic: spec.antithetic,
        ..McConfig::default()
    };
    let thetas = spec.thetas.clone();
    let estimates = mc_run_multi(model, grid, &mc, thetas.len(), |b, out| {
        // One pass per path: evolve all log-wealths cell by cell and
        // accumulate the weighted stopped value with left-node masses.
        let n_th = thetas.len();
        let mut ln_v = vec![0.0_f64; n_th];
        let mut acc = vec![0.0_f64; n_th];
        for i in 0..b.n_cells() {
            let c = &b.cells[i];
            let dt = b.t[i + 1] - b.t[i];
            let jump = b.is_jump[i + 1];
            for j in 0..n_th {
                acc[j] += ln_v[j] * b.ddof[i];
                let th = thetas[j];
                ln_v[j] += th * c.sigma * b.dw[i]
                    + (th * (c.mu - c.lambda * c.zeta) - 0.5 * th * th * c.sigma * c.sigma) * dt
                    + if jump { (th * c.zeta).ln_1p() } else { 0.0 };
            }
        }
        let g_t = *b.g.last().unwrap();
        for j in 0..n_th {
            out[j] = acc[j] + g_t * ln_v[j];
        }
        Ok(())
    })?;

    let curve: Vec<ValuePoint> = spec
        .thetas
        .iter()
        .zip(estimates)
        .map(|(&theta, estimate)| ValuePoint { theta, estimate })
        .collect();
    let best = curve
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.estimate.mean.partial_cmp(&b.1.estimate.mean).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let theta_star = curve[best].theta;

    let refined = if spec.refine {
        let lo = if best > 0 {
            curve[best - 1].theta
        } else {
            theta_star
        };
        let hi = if best + 1 < curve.len() {
            curve[best + 1].theta
        } else {
            theta_star
        };
        Some(golden_section_refine(
            model,
            grid,
            spec,
            (lo, theta_star, hi),
        )?)
    } else {
        None
    };

    Ok(GridSearchResult {
        theta_star,
        curve,
        refined,
    })
}

/// Golden-section maximization of `f` on a bracketing triple
/// `a < m < b` with `f(m)` at least the endpoint values.
pub fn golden_section_max<F>(
    f: F,
    triple: (f64, f64, f64),
    tol: f64,
    max_iter: usize,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive", 0));
    }
    let (a, m, b) = triple;
    if !(a < m && m < b) {
        return Err(Error::BracketError(format!(
            "triple ({a}, {m}, {b}) is not ordered"
        )));
    }
    let (fa, fm, fb) = (f(a), f(m), f(b));
    if fm < fa || fm < fb {
        return Err(Error::BracketError(format!(
            "midpoint value {fm} below endpoints ({fa}, {fb}); objective not unimodal here"
        )));
    }
    let inv_phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a, b);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut iter = 0;
    while hi - lo > tol && iter < max_iter {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
        iter += 1;
    }
    Ok(0.5 * (lo + hi))
}

/// Refines a grid-search winner by golden section. The objective reuses
/// the fixed (seed, n_paths) scenario set, so it is a deterministic
/// function of θ during the whole search.
pub fn golden_section_refine(
    model: &Model,
    grid: &GridSpec,
    spec: &SearchSpec,
    bracket: (f64, f64, f64),
) -> Result<f64> {
    let mc = McConfig {
        n_paths: spec.n_paths,
        seed: spec.seed,
        antithetic: spec.antithetic,
        ..McConfig::default()
    };
    let objective = |theta: f64| -> f64 {
        mc_run(model, grid, &mc, |b| {
            let lv = wealth_path(b, &StrategySpec::constant(theta))?;
            weighted_expect_stopped(&lv, b)
        })
        .map(|e| e.mean)
        .unwrap_or(f64::NEG_INFINITY)
    };
    golden_section_max(objective, bracket, spec.refine_tol, 80)
}

/// Root of the first-order condition by safeguarded Newton iteration
/// inside a sign-change bracket. Independent of the closed form except
/// for sharing the residual definition.
pub fn solve_pointwise(c: &ModelCell) -> Result<f64> {
    if c.zeta.abs() < ZETA_BRANCH_TOL || c.lambda * c.psi_m == 0.0 {
        return Ok((c.mu + c.sigma * c.phi_m) / (c.sigma * c.sigma));
    }
    let r = |th: f64| kkt_residual(th, c).expect("bracket stays admissible");
    // Residual is strictly decreasing with a pole at θ = −1/ζ; pick the
    // near-pole endpoint on the admissible side (positive residual) and
    // expand the other endpoint until the sign flips.
    let pole_side = (POLE_MARGIN - 1.0) / c.zeta;
    let guess = (c.mu + c.sigma * c.phi_m) / (c.sigma * c.sigma);
    let (mut lo, mut hi);
    if c.zeta > 0.0 {
        lo = pole_side;
        hi = guess.max(lo + 1.0);
        let mut step = 1.0;
        let mut tries = 0;
        while r(hi) > 0.0 {
            step *= 2.0;
            hi += step;
            tries += 1;
            if tries > 200 {
                return Err(Error::NumericalFailure(
                    "no sign change above the pole".into(),
                ));
            }
        }
    } else {
        hi = pole_side;
        lo = guess.min(hi - 1.0);
        let mut step = 1.0;
        let mut tries = 0;
        while r(lo) < 0.0 {
            step *= 2.0;
            lo -= step;
            tries += 1;
            if tries > 200 {
                return Err(Error::NumericalFailure(
                    "no sign change below the pole".into(),
                ));
            }
        }
    }
    if r(lo) == 0.0 {
        return Ok(lo);
    }
    if r(hi) == 0.0 {
        return Ok(hi);
    }
    if !(r(lo) > 0.0 && r(hi) < 0.0) {
        return Err(Error::NumericalFailure(format!(
            "bracket [{lo}, {hi}] does not straddle the root"
        )));
    }

    let mut theta = 0.5 * (lo + hi);
    for _ in 0..200 {
        let res = r(theta);
        if res > 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        let gross = 1.0 + theta * c.zeta;
        let slope = -c.sigma * c.sigma - c.psi_m * c.lambda * c.zeta * c.zeta / (gross * gross);
        let newton = theta - res / slope;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - theta).abs() <= 1e-15 * theta.abs().max(1.0) {
            return Ok(next);
        }
        theta = next;
    }
    Ok(theta)
}

/// The optimal fraction as a time profile usable by the path layer.
pub fn optimal_strategy(model: &Model, t_max: f64) -> Result<Coef> {
    let profile = model.solve_profile(t_max);
    for (t, rep) in &profile {
        if !rep.admissible && rep.branch == Branch::Quadratic {
            return Err(Error::NonAdmissible(format!(
                "optimal fraction inadmissible on segment starting at {t}"
            )));
        }
    }
    if profile.len() == 1 {
        Ok(Coef::Const(profile[0].1.theta_tilde))
    } else {
        Ok(Coef::Piecewise {
            times: profile[1..].iter().map(|(t, _)| *t).collect(),
            values: profile.iter().map(|(_, r)| r.theta_tilde).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{solve_cell, HorizonParams, MarketParams};
    use proptest::prelude::*;

    fn cell(mu: f64, sigma: f64, zeta: f64, lambda: f64, phi_m: f64, psi_m: f64) -> ModelCell {
        ModelCell {
            mu,
            sigma,
            zeta,
            lambda,
            delta: 0.01,
            phi_m,
            psi_m,
            hazard: 0.0,
        }
    }

    #[test]
    fn golden_section_finds_quadratic_peak() {
        let f = |x: f64| -(x - 1.0) * (x - 1.0);
        let x = golden_section_max(f, (-1.0, 0.5, 3.0), 1e-8, 200).unwrap();
        assert!((x - 1.0).abs() < 1e-6);
    }

    #[test]
    fn golden_section_rejects_bad_input() {
        let f = |x: f64| -x * x;
        assert!(matches!(
            golden_section_max(f, (-1.0, 0.0, 1.0), 0.0, 10),
            Err(Error::InvalidParams { .. })
        ));
        // monotone segment: midpoint below an endpoint
        assert!(matches!(
            golden_section_max(f, (1.0, 2.0, 3.0), 1e-6, 10),
            Err(Error::BracketError(_))
        ));
    }

    #[test]
    fn solver_reproduces_reference_solutions() {
        let c = cell(0.05, 0.2, 0.1, 1.0, 0.0, 1.0);
        let th = solve_pointwise(&c).unwrap();
        assert!((th - 1.01884113295915588).abs() < 1e-10);

        // the zero-jump branch shares the closed formula bit for bit
        let c0 = cell(0.05, 0.2, 0.0, 1.0, 0.1, 1.0);
        let th0 = solve_pointwise(&c0).unwrap();
        assert_eq!(th0.to_bits(), solve_cell(&c0).theta_tilde.to_bits());
        assert!((th0 - 1.75).abs() < 1e-15);

        let c2 = crate::model::transformed_cell(&cell(0.05, 0.2, 0.1, 1.0, 0.0, 2.0));
        let th2 = solve_pointwise(&c2).unwrap();
        assert!((th2 - 1.3450420923906471).abs() < 1e-10);
    }

    #[test]
    fn negative_jump_sizes_are_solved_too() {
        let c = cell(0.08, 0.3, -0.25, 1.5, -0.2, 0.7);
        let th = solve_pointwise(&c).unwrap();
        let closed = solve_cell(&c).theta_tilde;
        assert!((th - closed).abs() < 1e-10, "solver {th} closed {closed}");
    }

    #[test]
    fn default_grid_is_centered_and_admissible() {
        let model = Model::new(
            MarketParams::constant(0.05, 0.2, 0.1, 1.0, 0.01),
            HorizonParams::constant(0.0, 1.0, 0.5, 1.0),
        )
        .unwrap();
        let grid = default_theta_grid(&model, 1.0);
        assert_eq!(grid.len(), 41);
        let center = model.solve_at(0.0).theta_tilde;
        assert!((grid[20] - center).abs() < 1e-12);
    }

    #[test]
    fn clip_pulls_inside_the_pole() {
        let model = Model::new(
            MarketParams::constant(0.05, 0.2, -0.4, 1.0, 0.01),
            HorizonParams::neutral(),
        )
        .unwrap();
        let clipped = clip_admissible(&model, 5.0, 1.0, 1e-3);
        assert!(1.0 + clipped * -0.4 >= 1e-3 - 1e-15);
        assert_eq!(clip_admissible(&model, 1.0, 1.0, 1e-3), 1.0);
    }

    #[test]
    fn zero_drift_grid_search_peaks_at_zero() {
        let model = Model::new(
            MarketParams::constant(0.0, 0.2, 0.1, 1.0, 0.01),
            HorizonParams::constant(0.0, 1.0, 0.5, 1.0),
        )
        .unwrap();
        let grid = GridSpec::new(1.0, 32).unwrap();
        let spec = SearchSpec::new(default_theta_grid(&model, 1.0), 4000, 99);
        let res = grid_search_log_utility(&model, &grid, &spec).unwrap();
        assert!(
            res.theta_star.abs() <= 0.1 + 1e-12,
            "argmax {}",
            res.theta_star
        );
    }

    #[test]
    fn refinement_moves_the_winner_toward_the_optimum() {
        let model = Model::new(
            MarketParams::constant(0.05, 0.2, 0.1, 1.0, 0.01),
            HorizonParams::constant(0.0, 1.0, 0.5, 1.0),
        )
        .unwrap();
        let grid = GridSpec::new(1.0, 64).unwrap();
        let mut spec = SearchSpec::new(default_theta_grid(&model, 1.0), 100_000, 11);
        spec.refine = true;
        spec.refine_tol = 5e-3;
        let res = grid_search_log_utility(&model, &grid, &spec).unwrap();
        let theta_tilde = model.solve_at(0.0).theta_tilde;
        let refined = res.refined.unwrap();
        assert!(
            (refined - theta_tilde).abs() <= 0.05,
            "refined {refined} vs {theta_tilde}"
        );
    }

    #[test]
    fn inadmissible_grid_points_are_rejected() {
        let model = Model::new(
            MarketParams::constant(0.05, 0.2, 0.5, 1.0, 0.01),
            HorizonParams::neutral(),
        )
        .unwrap();
        let grid = GridSpec::new(1.0, 8).unwrap();
        let spec = SearchSpec::new(vec![0.0, -2.5], 100, 1);
        assert!(matches!(
            grid_search_log_utility(&model, &grid, &spec),
            Err(Error::NonAdmissible(_))
        ));
    }

    proptest! {
        // Closed form vs independent solver across a broad sweep.
        #[test]
        fn solver_agrees_with_closed_form(
            mu in -0.3..0.3f64,
            sigma in 0.05..0.7f64,
            zeta in prop_oneof![0.005..0.9f64, -0.9..-0.005f64],
            lambda in 0.05..3.0f64,
            phi_m in -1.0..1.0f64,
            psi_m in 0.05..3.0f64,
        ) {
            let c = cell(mu, sigma, zeta, lambda, phi_m, psi_m);
            let th = solve_pointwise(&c).unwrap();
            let closed = solve_cell(&c).theta_tilde;
            prop_assert!((th - closed).abs() <= 1e-10 * closed.abs().max(1.0),
                "solver {} closed {}", th, closed);
        }
    }
}
