//! Exact path generation for the market, the survival process and the
//! derived exponentials.
//!
//! Everything evolves by exact log-increments on a grid that contains
//! every Poisson jump time and every coefficient breakpoint as a node,
//! so stochastic exponentials carry no discretization bias and the
//! duality identities hold at machine precision pathwise.
//!
//! Reproducibility: each path owns a counter-based stream
//! (seed, path_index) of a ChaCha generator, so output is a pure
//! function of `(model, grid, seed, path_index)` regardless of
//! execution order or thread count.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{Coef, Model, ModelCell};

/// Uniform time grid; Poisson jump times and coefficient breakpoints are
/// spliced in as extra nodes per path.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub t_horizon: f64,
    pub n_steps: usize,
}

impl GridSpec {
    pub fn new(t_horizon: f64, n_steps: usize) -> Result<Self> {
        if !(t_horizon > 0.0) || !t_horizon.is_finite() {
            return Err(Error::invalid("t_horizon > 0", 0));
        }
        if n_steps < 1 {
            return Err(Error::invalid("n_steps >= 1", 0));
        }
        Ok(GridSpec { t_horizon, n_steps })
    }

    /// Node value of the uniform grid, computed the same way everywhere
    /// so lookups can rely on exact float equality.
    pub fn uniform_node(&self, i: usize) -> f64 {
        if i >= self.n_steps {
            self.t_horizon
        } else {
            self.t_horizon * i as f64 / self.n_steps as f64
        }
    }
}

/// A portfolio fraction, constant or piecewise-constant in time.
#[derive(Debug, Clone)]
pub struct StrategySpec {
    pub theta: Coef,
}

impl StrategySpec {
    pub fn constant(theta: f64) -> Self {
        StrategySpec {
            theta: theta.into(),
        }
    }
}

/// Marker for the sampled horizon relative to the simulation window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoxTau {
    At(f64),
    BeyondHorizon,
}

/// One simulated scenario of the driving noise and every process that
/// is a deterministic functional of it.
#[derive(Debug, Clone)]
pub struct PathBundle {
    /// Grid nodes, `t[0] = 0`, `t[n] = T`.
    pub t: Vec<f64>,
    /// Brownian increments per cell.
    pub dw: Vec<f64>,
    /// Per node: does a Poisson jump land exactly here.
    pub is_jump: Vec<bool>,
    pub jump_times: Vec<f64>,
    /// Asset path with S(0) = 1.
    pub s: Vec<f64>,
    /// Survival process G, starts at g0.
    pub g: Vec<f64>,
    /// ln of the survival-martingale exponential (the deflator tilt).
    pub log_zm: Vec<f64>,
    /// Per cell: increment of the hazard compensator, chosen as
    /// G(tᵢ)·(1 − e^{−λᴳ Δt}) so that G + ΣΔD is a discrete martingale
    /// exactly, not just in the Δt → 0 limit.
    pub ddof: Vec<f64>,
    /// Per node: cumulative drift correction ∫φₘ du removed from W by
    /// the horizon transform.
    pub tdrift_w: Vec<f64>,
    /// Per node: cumulative jump correction Σ (ψₘ−1)/ψₘ removed from
    /// the compensated Poisson process by the horizon transform.
    pub tdrift_n: Vec<f64>,
    /// Coefficients resolved on each cell.
    pub cells: Vec<ModelCell>,
    /// Number of nodes where G exceeded 1 (diagnostic only; the model
    /// equations do not enforce the conditional-probability bound).
    pub azema_violations: usize,
    /// Uniform variate reserved for horizon sampling in the Cox regime.
    pub cox_u: f64,
    pub path_index: u64,
}

impl PathBundle {
    pub fn n_cells(&self) -> usize {
        self.dw.len()
    }

    pub fn terminal_time(&self) -> f64 {
        *self.t.last().unwrap()
    }

    /// Left limit of G at a node: undoes the jump multiplier when the
    /// node is a Poisson time.
    pub fn pre_jump_g(&self, node: usize) -> f64 {
        if node > 0 && self.is_jump[node] {
            self.g[node] / self.cells[node - 1].psi_m
        } else {
            self.g[node]
        }
    }

    /// Index of the grid node with exactly this time value. Times must
    /// come from [`GridSpec::uniform_node`] or recorded jump times.
    pub fn node_at(&self, time: f64) -> Result<usize> {
        match self.t.binary_search_by(|x| x.partial_cmp(&time).unwrap()) {
            Ok(i) => Ok(i),
            Err(_) => Err(Error::NumericalFailure(format!(
                "time {time} is not a grid node"
            ))),
        }
    }
}

struct PathRng {
    rng: ChaCha12Rng,
    negate: bool,
}

impl PathRng {
    fn new(seed: u64, path_index: u64, antithetic: bool) -> Self {
        let (stream, negate) = if antithetic {
            (path_index / 2, path_index % 2 == 1)
        } else {
            (path_index, false)
        };
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        PathRng { rng, negate }
    }

    fn normal(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        if self.negate {
            -z
        } else {
            z
        }
    }

    fn exp1(&mut self) -> f64 {
        self.rng.sample(Exp1)
    }

    fn uniform(&mut self) -> f64 {
        self.rng.random()
    }
}

/// Jump times on (0, T] by inverting the cumulative intensity, exact for
/// piecewise-constant λ.
fn draw_jump_times(rng: &mut PathRng, model: &Model, t_horizon: f64) -> Vec<f64> {
    let mut edges = vec![0.0];
    edges.extend(model.breakpoints(t_horizon));
    edges.push(t_horizon);

    let mut times = Vec::new();
    let mut budget = rng.exp1();
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let rate = model.market.lambda.value_at(a);
        if rate <= 0.0 {
            continue;
        }
        let mut t = a;
        loop {
            let step = budget / rate;
            if t + step < b {
                t += step;
                times.push(t);
                budget = rng.exp1();
            } else {
                budget -= rate * (b - t);
                break;
            }
        }
    }
    times
}

/// Generates one scenario. Identical `(seed, path_index)` always yields a
/// bit-identical bundle; with `antithetic` the odd path of each
/// consecutive pair reuses the even path's stream with negated Brownian
/// increments (jump times and the horizon variate are shared).
pub fn gen_path(
    model: &Model,
    grid: &GridSpec,
    seed: u64,
    path_index: u64,
    antithetic: bool,
) -> Result<PathBundle> {
    let mut rng = PathRng::new(seed, path_index, antithetic);
    let t_end = grid.t_horizon;

    let jump_times = draw_jump_times(&mut rng, model, t_end);

    let mut nodes: Vec<f64> = (0..=grid.n_steps).map(|i| grid.uniform_node(i)).collect();
    nodes.extend(jump_times.iter().copied().filter(|&t| t > 0.0 && t < t_end));
    nodes.extend(model.breakpoints(t_end));
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nodes.dedup();

    let n_nodes = nodes.len();
    let n_cells = n_nodes - 1;
    let mut is_jump = vec![false; n_nodes];
    for &jt in &jump_times {
        if let Ok(i) = nodes.binary_search_by(|x| x.partial_cmp(&jt).unwrap()) {
            is_jump[i] = true;
        }
    }

    let mut dw = Vec::with_capacity(n_cells);
    let mut cells = Vec::with_capacity(n_cells);
    let mut s = Vec::with_capacity(n_nodes);
    let mut g = Vec::with_capacity(n_nodes);
    let mut log_zm = Vec::with_capacity(n_nodes);
    let mut ddof = Vec::with_capacity(n_cells);
    let mut tdrift_w = Vec::with_capacity(n_nodes);
    let mut tdrift_n = Vec::with_capacity(n_nodes);

    let g0 = model.horizon.g0;
    let mut ln_s = 0.0_f64;
    let mut ln_g_over_g0 = 0.0_f64;
    let mut zm = 0.0_f64;
    let mut azema_violations = 0usize;

    s.push(1.0);
    g.push(g0);
    log_zm.push(0.0);
    tdrift_w.push(0.0);
    tdrift_n.push(0.0);

    for i in 0..n_cells {
        let dt = nodes[i + 1] - nodes[i];
        let cell = model.cell_at(nodes[i]);
        let z = rng.normal();
        let dwi = dt.sqrt() * z;
        let jump = is_jump[i + 1];

        // Hazard compensator over the cell, exact against the mean decay
        // of G: E[G(t+dt) | G(t)] = G(t) e^{-hazard dt}.
        ddof.push(g[i] * (-(-cell.hazard * dt).exp_m1()));

        let zm_inc = cell.phi_m * dwi
            - (0.5 * cell.phi_m * cell.phi_m + cell.lambda * (cell.psi_m - 1.0)) * dt
            + if jump { cell.psi_m.ln() } else { 0.0 };
        zm += zm_inc;
        ln_g_over_g0 += zm_inc - cell.hazard * dt;
        ln_s += cell.sigma * dwi
            + (cell.mu - cell.lambda * cell.zeta - 0.5 * cell.sigma * cell.sigma) * dt
            + if jump { cell.zeta.ln_1p() } else { 0.0 };

        dw.push(dwi);
        cells.push(cell);
        s.push(ln_s.exp());
        let gi = g0 * ln_g_over_g0.exp();
        if gi > 1.0 + 1e-12 {
            azema_violations += 1;
        }
        g.push(gi);
        log_zm.push(zm);
        tdrift_w.push(tdrift_w[i] + cell.phi_m * dt);
        tdrift_n.push(
            tdrift_n[i]
                + if jump {
                    (cell.psi_m - 1.0) / cell.psi_m
                } else {
                    0.0
                },
        );
    }

    let cox_u = rng.uniform();

    if !(ln_s.is_finite() && ln_g_over_g0.is_finite() && zm.is_finite()) {
        return Err(Error::NumericalFailure(format!(
            "non-finite path state at path {path_index}"
        )));
    }

    Ok(PathBundle {
        t: nodes,
        dw,
        is_jump,
        jump_times,
        s,
        g,
        log_zm,
        ddof,
        tdrift_w,
        tdrift_n,
        cells,
        azema_violations,
        cox_u,
        path_index,
    })
}

fn resolve_theta(b: &PathBundle, theta: &Coef) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(b.n_cells());
    for (i, cell) in b.cells.iter().enumerate() {
        let th = theta.value_at(b.t[i]);
        if !(1.0 + th * cell.zeta > 0.0) {
            return Err(Error::NonAdmissible(format!(
                "1 + theta*zeta = {} at t = {}",
                1.0 + th * cell.zeta,
                b.t[i]
            )));
        }
        out.push(th);
    }
    Ok(out)
}

/// Log-wealth of the self-financing portfolio holding the fraction θ:
/// per cell θσΔW + (θ(μ−λζ) − ½θ²σ²)Δt, plus ln(1+θζ) at each jump.
/// Exact for piecewise-constant θ.
pub fn wealth_path(b: &PathBundle, strategy: &StrategySpec) -> Result<Vec<f64>> {
    let theta = resolve_theta(b, &strategy.theta)?;
    let mut out = Vec::with_capacity(b.t.len());
    let mut ln_v = 0.0_f64;
    out.push(0.0);
    for i in 0..b.n_cells() {
        let c = &b.cells[i];
        let th = theta[i];
        let dt = b.t[i + 1] - b.t[i];
        ln_v += th * c.sigma * b.dw[i]
            + (th * (c.mu - c.lambda * c.zeta) - 0.5 * th * th * c.sigma * c.sigma) * dt
            + if b.is_jump[i + 1] {
                (th * c.zeta).ln_1p()
            } else {
                0.0
            };
        out.push(ln_v);
    }
    Ok(out)
}

/// The optimal deflator path and its driving local martingale.
#[derive(Debug, Clone)]
pub struct DeflatorPath {
    /// ln of the deflator exponential.
    pub log_z: Vec<f64>,
    /// The driver K itself (per node), for Hellinger decompositions.
    pub driver: Vec<f64>,
}

/// Deflator built from the transformed Brownian and Poisson drivers with
/// loadings (−σθ, −ψₘζθ/(1+θζ)), evaluated through its pre-horizon
/// representative: the Brownian driver contributes ΔW − φₘΔt and the
/// Poisson driver a (ψₘ−1)/ψₘ correction per jump, which is where the
/// horizon loadings enter the deflator.
pub fn deflator_path(b: &PathBundle, strategy: &StrategySpec) -> Result<DeflatorPath> {
    let theta = resolve_theta(b, &strategy.theta)?;
    let mut log_z = Vec::with_capacity(b.t.len());
    let mut driver = Vec::with_capacity(b.t.len());
    let mut ln_z = 0.0_f64;
    let mut k = 0.0_f64;
    log_z.push(0.0);
    driver.push(0.0);
    for i in 0..b.n_cells() {
        let c = &b.cells[i];
        let th = theta[i];
        let dt = b.t[i + 1] - b.t[i];
        let gross = 1.0 + th * c.zeta;
        let jump_load = c.psi_m * c.zeta * th / gross;
        let drift = c.sigma * th * c.phi_m + c.lambda * jump_load;
        k += -c.sigma * th * b.dw[i] + drift * dt;
        ln_z += -c.sigma * th * b.dw[i] + (drift - 0.5 * c.sigma * c.sigma * th * th) * dt;
        if b.is_jump[i + 1] {
            // jump of the driver: 1 + ΔK = 1/(1 + θζ)
            k += -c.zeta * th / gross;
            ln_z -= gross.ln();
        }
        if !ln_z.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "deflator log left the finite domain at t = {}",
                b.t[i + 1]
            )));
        }
        log_z.push(ln_z);
        driver.push(k);
    }
    Ok(DeflatorPath { log_z, driver })
}

/// ln of the base-market deflator whose ratio with the survival
/// exponential gives the stopped-model deflator: Brownian loading
/// φₘ − σθ, jump factor ψₘ/(1+θζ).
pub fn market_deflator_log_path(b: &PathBundle, strategy: &StrategySpec) -> Result<Vec<f64>> {
    let theta = resolve_theta(b, &strategy.theta)?;
    let mut out = Vec::with_capacity(b.t.len());
    let mut ln_z = 0.0_f64;
    out.push(0.0);
    for i in 0..b.n_cells() {
        let c = &b.cells[i];
        let th = theta[i];
        let dt = b.t[i + 1] - b.t[i];
        let gross = 1.0 + th * c.zeta;
        let load = c.phi_m - c.sigma * th;
        // compensated jump size of the driver
        let kappa = (c.psi_m - 1.0 - th * c.zeta) / gross;
        ln_z += load * b.dw[i] - (0.5 * load * load + c.lambda * kappa) * dt
            + if b.is_jump[i + 1] { kappa.ln_1p() } else { 0.0 };
        out.push(ln_z);
    }
    Ok(out)
}

/// Z of the survival martingale exponential, per node.
pub fn zm_path(b: &PathBundle) -> Vec<f64> {
    b.log_zm.iter().map(|&x| x.exp()).collect()
}

/// Inverse-hazard sample of the horizon from one uniform variate. Only
/// valid when the survival martingale is constant (φₘ ≡ 0, ψₘ ≡ 1), i.e.
/// G = G₀ e^{−Λ}; every other regime has no constructive sampler here.
pub fn cox_sample_tau(b: &PathBundle, u: f64) -> Result<CoxTau> {
    if b.cells.iter().any(|c| c.phi_m != 0.0 || c.psi_m != 1.0) {
        return Err(Error::UnsupportedRegime(
            "horizon sampling needs phi_m = 0 and psi_m = 1".into(),
        ));
    }
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::DomainError(format!(
            "uniform variate {u} outside (0,1)"
        )));
    }
    let g0 = b.g[0];
    let threshold = (g0 / u).ln();
    if threshold <= 0.0 {
        return Ok(CoxTau::At(0.0));
    }
    let mut cum = 0.0_f64;
    for i in 0..b.n_cells() {
        let h = b.cells[i].hazard;
        let dt = b.t[i + 1] - b.t[i];
        if cum + h * dt >= threshold {
            return Ok(CoxTau::At(b.t[i] + (threshold - cum) / h));
        }
        cum += h * dt;
    }
    Ok(CoxTau::BeyondHorizon)
}

/// Value of a per-node functional at the stopped time, with the
/// left-node convention for a horizon falling strictly inside a cell
/// (matching the mass convention of the weighted estimator).
pub fn value_stopped(values: &[f64], b: &PathBundle, tau: CoxTau) -> f64 {
    match tau {
        CoxTau::BeyondHorizon => *values.last().unwrap(),
        CoxTau::At(t) => {
            if t <= b.t[0] {
                values[0]
            } else {
                let idx = b.t.partition_point(|&x| x < t) - 1;
                values[idx.min(values.len() - 1)]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HorizonParams, MarketParams};

    fn model(
        mu: f64,
        sigma: f64,
        zeta: f64,
        lambda: f64,
        phi_m: f64,
        psi_m: f64,
        hazard: f64,
        g0: f64,
    ) -> Model {
        Model::new(
            MarketParams::constant(mu, sigma, zeta, lambda, 0.01),
            HorizonParams::constant(phi_m, psi_m, hazard, g0),
        )
        .unwrap()
    }

    #[test]
    fn pure_diffusion_matches_closed_form() {
        let m = model(0.05, 0.2, 0.1, 0.0, 0.0, 1.0, 0.0, 1.0);
        let grid = GridSpec::new(1.0, 64).unwrap();
        for idx in 0..16 {
            let b = gen_path(&m, &grid, 7, idx, false).unwrap();
            assert!(b.jump_times.is_empty());
            let w_t: f64 = b.dw.iter().sum();
            let expected = 0.2 * w_t + (0.05 - 0.5 * 0.04) * 1.0;
            assert!(
                (b.s.last().unwrap().ln() - expected).abs() < 1e-12,
                "path {idx}"
            );
        }
    }

    #[test]
    fn same_seed_and_index_reproduces_bundle() {
        let m = model(0.05, 0.2, 0.1, 1.0, 0.1, 1.5, 0.5, 1.0);
        let grid = GridSpec::new(1.0, 32).unwrap();
        let a = gen_path(&m, &grid, 11, 3, false).unwrap();
        let b = gen_path(&m, &grid, 11, 3, false).unwrap();
        assert_eq!(a.t, b.t);
        assert_eq!(a.dw, b.dw);
        assert_eq!(a.s, b.s);
        assert_eq!(a.g, b.g);
        assert_eq!(a.cox_u, b.cox_u);
    }

    #[test]
    fn antithetic_pair_shares_jumps_and_negates_noise() {
        let m = model(0.05, 0.2, 0.1, 1.0, 0.0, 1.0, 0.5, 1.0);
        let grid = GridSpec::new(1.0, 32).unwrap();
        let even = gen_path(&m, &grid, 11, 6, true).unwrap();
        let odd = gen_path(&m, &grid, 11, 7, true).unwrap();
        assert_eq!(even.jump_times, odd.jump_times);
        assert_eq!(even.cox_u, odd.cox_u);
        for (a, b) in even.dw.iter().zip(odd.dw.iter()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn jump_bookkeeping_is_exact() {
        let m = model(0.05, 0.5, 0.3, 2.0, 0.0, 1.5, 0.5, 1.0);
        let grid = GridSpec::new(1.0, 16).unwrap();
        let mut saw_jump = false;
        for idx in 0..32 {
            let b = gen_path(&m, &grid, 5, idx, false).unwrap();
            let n_jump_nodes = b.is_jump.iter().filter(|&&j| j).count();
            assert_eq!(n_jump_nodes, b.jump_times.len());
            for i in 0..b.n_cells() {
                if b.is_jump[i + 1] {
                    saw_jump = true;
                    let c = &b.cells[i];
                    let dt = b.t[i + 1] - b.t[i];
                    let cont = (c.sigma * b.dw[i]
                        + (c.mu - c.lambda * c.zeta - 0.5 * c.sigma * c.sigma) * dt)
                        .exp();
                    let ratio = b.s[i + 1] / (b.s[i] * cont);
                    assert!((ratio - 1.3).abs() < 1e-12, "jump ratio {ratio}");
                    let g_ratio = b.g[i + 1] / b.pre_jump_g(i + 1);
                    assert!((g_ratio - 1.5).abs() < 1e-12);
                }
            }
        }
        assert!(saw_jump);
    }

    #[test]
    fn wealth_identities() {
        let m = model(0.05, 0.2, 0.1, 1.0, 0.1, 1.5, 0.5, 1.0);
        let grid = GridSpec::new(1.0, 64).unwrap();
        let b = gen_path(&m, &grid, 19, 0, false).unwrap();

        let flat = wealth_path(&b, &StrategySpec::constant(0.0)).unwrap();
        assert!(flat.iter().all(|&x| x == 0.0));

        let all_in = wealth_path(&b, &StrategySpec::constant(1.0)).unwrap();
        for (lv, s) in all_in.iter().zip(b.s.iter()) {
            assert!((lv - s.ln()).abs() < 1e-12);
        }

        assert!(wealth_path(&b, &StrategySpec::constant(-10.0)).is_err());
    }

    #[test]
    fn asset_mean_matches_exponential_moment() {
        // E[S_T/S_0] = e^{mu T}: the martingale part of the exponential
        // is fully compensated.
        let m = model(0.05, 0.2, 0.1, 1.0, 0.0, 1.0, 0.0, 1.0);
        let grid = GridSpec::new(1.0, 32).unwrap();
        let n = 20_000;
        let (mut sum, mut sumsq) = (0.0_f64, 0.0_f64);
        for idx in 0..n {
            let s_t = *gen_path(&m, &grid, 77, idx, false)
                .unwrap()
                .s
                .last()
                .unwrap();
            sum += s_t;
            sumsq += s_t * s_t;
        }
        let mean = sum / n as f64;
        let se = ((sumsq / n as f64 - mean * mean) / (n as f64 - 1.0)).sqrt();
        let expect = 0.05_f64.exp();
        assert!(
            (mean - expect).abs() < 3.0 * se,
            "mean {mean} vs {expect} (se {se})"
        );
    }

    #[test]
    fn wealth_doubles_when_theta_zeta_is_one() {
        let m = model(0.05, 0.5, 0.1, 3.0, 0.0, 1.0, 0.0, 1.0);
        let grid = GridSpec::new(1.0, 16).unwrap();
        let b = gen_path(&m, &grid, 13, 2, false).unwrap();
        assert!(!b.jump_times.is_empty());
        let lv = wealth_path(&b, &StrategySpec::constant(10.0)).unwrap();
        for i in 0..b.n_cells() {
            if b.is_jump[i + 1] {
                let c = &b.cells[i];
                let dt = b.t[i + 1] - b.t[i];
                let cont = 10.0 * c.sigma * b.dw[i]
                    + (10.0 * (c.mu - c.lambda * c.zeta) - 50.0 * c.sigma * c.sigma) * dt;
                let jump_factor = (lv[i + 1] - lv[i] - cont).exp();
                assert!((jump_factor - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deflator_satisfies_duality_and_hellinger_decomposition() {
        let m = model(0.05, 0.2, 0.1, 1.0, 0.1, 1.5, 0.5, 1.0);
        let grid = GridSpec::new(1.0, 64).unwrap();
        let theta = crate::model::solve_cell(&m.cell_at(0.0)).theta_tilde;
        let strategy = StrategySpec::constant(theta);
        for idx in 0..8 {
            let b = gen_path(&m, &grid, 29, idx, false).unwrap();
            let lv = wealth_path(&b, &strategy).unwrap();
            let dp = deflator_path(&b, &strategy).unwrap();
            // product identity: deflator times optimal wealth is 1
            for i in 0..b.t.len() {
                assert!((dp.log_z[i] + lv[i]).abs() < 1e-12);
            }
            // -ln Z = -K + H0(K) with the pathwise Hellinger functional
            let c = m.cell_at(0.0);
            let qv: f64 =
                b.t.windows(2)
                    .map(|w| c.sigma * c.sigma * theta * theta * (w[1] - w[0]))
                    .sum();
            let jump = -c.zeta * theta / (1.0 + theta * c.zeta);
            let jumps = vec![jump; b.jump_times.len()];
            let h0 = crate::model::hellinger0_pathwise(qv, &jumps).unwrap();
            let last = b.t.len() - 1;
            assert!(
                (-dp.log_z[last] - (-dp.driver[last] + h0)).abs() < 1e-12,
                "hellinger decomposition"
            );
        }
    }

    #[test]
    fn transform_drift_fields_rebuild_the_deflator_driver() {
        // K = -sigma*theta*(W - tdrift_w) - jump_load*(N - lambda*t - tdrift_n)
        let m = model(0.05, 0.2, 0.1, 1.0, 0.1, 1.5, 0.5, 1.0);
        let grid = GridSpec::new(1.0, 32).unwrap();
        let c = m.cell_at(0.0);
        let theta = crate::model::solve_cell(&c).theta_tilde;
        let jump_load = c.psi_m * c.zeta * theta / (1.0 + theta * c.zeta);
        let b = gen_path(&m, &grid, 37, 5, false).unwrap();
        let dp = deflator_path(&b, &StrategySpec::constant(theta)).unwrap();
        let mut w = 0.0_f64;
        let mut n_count = 0.0_f64;
        for i in 0..b.n_cells() {
            w += b.dw[i];
            if b.is_jump[i + 1] {
                n_count += 1.0;
            }
            let rebuilt = -c.sigma * theta * (w - b.tdrift_w[i + 1])
                - jump_load * (n_count - c.lambda * b.t[i + 1] - b.tdrift_n[i + 1]);
            assert!(
                (dp.driver[i + 1] - rebuilt).abs() < 1e-12,
                "node {}: driver {} rebuilt {}",
                i + 1,
                dp.driver[i + 1],
                rebuilt
            );
        }
    }

    #[test]
    fn deflator_is_flat_in_zero_drift_neutral_market() {
        let m = model(0.0, 0.2, 0.1, 1.0, 0.0, 1.0, 0.5, 1.0);
        let grid = GridSpec::new(1.0, 32).unwrap();
        let b = gen_path(&m, &grid, 41, 0, false).unwrap();
        let dp = deflator_path(&b, &StrategySpec::constant(0.0)).unwrap();
        assert!(dp.log_z.iter().all(|&z| z == 0.0));
    }

    #[test]
    fn azema_diagnostic_is_zero_in_cox_and_fires_on_upward_jumps() {
        let grid = GridSpec::new(1.0, 32).unwrap();
        let cox = model(0.05, 0.2, 0.1, 1.0, 0.0, 1.0, 0.5, 1.0);
        for idx in 0..64 {
            assert_eq!(
                gen_path(&cox, &grid, 51, idx, false)
                    .unwrap()
                    .azema_violations,
                0
            );
        }
        let tilted = model(0.05, 0.2, 0.1, 1.0, 0.1, 1.5, 0.5, 1.0);
        let total: usize = (0..64)
            .map(|idx| {
                gen_path(&tilted, &grid, 51, idx, false)
                    .unwrap()
                    .azema_violations
            })
            .sum();
        assert!(
            total > 0,
            "upward survival jumps from 1.0 must trip the diagnostic"
        );
    }

    #[test]
    fn zm_is_one_in_pseudo_stopping_case() {
        let m = model(0.05, 0.2, 0.1, 1.0, 0.0, 1.0, 0.7, 1.0);
        let grid = GridSpec::new(1.0, 32).unwrap();
        let b = gen_path(&m, &grid, 3, 1, false).unwrap();
        assert!(zm_path(&b).iter().all(|&z| z == 1.0));
    }

    #[test]
    fn cox_sampler_edges() {
        let no_hazard = model(0.05, 0.2, 0.1, 1.0, 0.0, 1.0, 0.0, 1.0);
        let grid = GridSpec::new(1.0, 16).unwrap();
        let b = gen_path(&no_hazard, &grid, 2, 0, false).unwrap();
        assert_eq!(cox_sample_tau(&b, 0.3).unwrap(), CoxTau::BeyondHorizon);
        // u -> 1 forces an immediate horizon.
        let hz = model(0.05, 0.2, 0.1, 1.0, 0.0, 1.0, 0.5, 1.0);
        let b = gen_path(&hz, &grid, 2, 0, false).unwrap();
        match cox_sample_tau(&b, 0.999_999_9).unwrap() {
            CoxTau::At(t) => assert!(t < 1e-5),
            other => panic!("expected near-zero horizon, got {other:?}"),
        }
        // outside the Cox regime the sampler refuses.
        let tilted = model(0.05, 0.2, 0.1, 1.0, 0.1, 1.0, 0.5, 1.0);
        let b = gen_path(&tilted, &grid, 2, 0, false).unwrap();
        assert!(matches!(
            cox_sample_tau(&b, 0.5),
            Err(Error::UnsupportedRegime(_))
        ));
    }

    #[test]
    fn cox_sampler_inverts_piecewise_hazard() {
        let market = MarketParams::constant(0.05, 0.2, 0.1, 1.0, 0.01);
        let horizon = HorizonParams {
            phi_m: 0.0.into(),
            psi_m: 1.0.into(),
            hazard: Coef::Piecewise {
                times: vec![0.5],
                values: vec![0.0, 2.0],
            },
            g0: 1.0,
        };
        let m = Model::new(market, horizon).unwrap();
        let grid = GridSpec::new(1.0, 16).unwrap();
        let n = 20_000;
        let mut survived = 0usize;
        for idx in 0..n {
            let b = gen_path(&m, &grid, 59, idx as u64, false).unwrap();
            match cox_sample_tau(&b, b.cox_u).unwrap() {
                CoxTau::BeyondHorizon => survived += 1,
                // no hazard mass before the step at 0.5
                CoxTau::At(t) => assert!(t >= 0.5, "horizon {t} before hazard starts"),
            }
        }
        let p = survived as f64 / n as f64;
        let expect = (-1.0_f64).exp();
        let se = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((p - expect).abs() < 3.0 * se, "survival {p} vs {expect}");
    }

    #[test]
    fn cox_survival_matches_exponential_law() {
        let m = model(0.05, 0.2, 0.1, 1.0, 0.0, 1.0, 0.8, 1.0);
        let grid = GridSpec::new(1.0, 16).unwrap();
        let n = 20_000;
        let mut survived = 0usize;
        for idx in 0..n {
            let b = gen_path(&m, &grid, 23, idx as u64, false).unwrap();
            if cox_sample_tau(&b, b.cox_u).unwrap() == CoxTau::BeyondHorizon {
                survived += 1;
            }
        }
        let p = survived as f64 / n as f64;
        let expect = (-0.8_f64).exp();
        let se = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!(
            (p - expect).abs() < 3.0 * se,
            "survival {p} vs {expect} (se {se})"
        );
    }

    #[test]
    fn piecewise_coefficients_enter_at_breakpoints() {
        let market = MarketParams {
            mu: Coef::Piecewise {
                times: vec![0.5],
                values: vec![0.05, -0.02],
            },
            sigma: 0.2.into(),
            zeta: 0.1.into(),
            lambda: 0.0.into(),
            delta: 0.01,
        };
        let m = Model::new(market, HorizonParams::neutral()).unwrap();
        let grid = GridSpec::new(1.0, 3).unwrap();
        let b = gen_path(&m, &grid, 1, 0, false).unwrap();
        // breakpoint 0.5 must be a node even though the uniform grid skips it
        assert!(b
            .t
            .binary_search_by(|x| x.partial_cmp(&0.5).unwrap())
            .is_ok());
        let w1: f64 =
            b.dw.iter()
                .zip(b.t.windows(2))
                .filter(|(_, w)| w[0] < 0.5)
                .map(|(dw, _)| dw)
                .sum();
        let w2: f64 = b.dw.iter().sum::<f64>() - w1;
        let expected = 0.2 * (w1 + w2) + (0.05 - 0.02) * 0.5 - 0.5 * 0.04;
        assert!((b.s.last().unwrap().ln() - expected).abs() < 1e-12);
    }
}
