//! Closed forms for the log-optimal fraction in a one-dimensional
//! jump-diffusion market observed up to a random horizon.
//!
//! Market: dS/S₋ = σ dW + ζ dNᶜᵒᵐᵖ + μ dt with Nᶜᵒᵐᵖ the compensated
//! Poisson process of intensity λ. The horizon enters through the
//! survival process G with martingale loadings (φₘ on W, ψₘ across
//! jumps) and hazard density λᴳ.
//!
//! Everything in this module is a pure function of the coefficients;
//! randomness lives in [`crate::simulate`].

use crate::error::{Error, Result};

/// Below this |ζ| the first-order condition degenerates to its diffusion
/// limit; the quadratic form would divide by ζ and lose all precision.
pub const ZETA_BRANCH_TOL: f64 = 1e-10;

/// A coefficient that is constant or piecewise-constant in time.
///
/// Piecewise coefficients are right-continuous step functions: `values[0]`
/// applies on `[0, times[0])`, `values[i+1]` on `[times[i], times[i+1])`.
#[derive(Debug, Clone, PartialEq)]
pub enum Coef {
    Const(f64),
    Piecewise { times: Vec<f64>, values: Vec<f64> },
}

impl Coef {
    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            Coef::Const(v) => *v,
            Coef::Piecewise { times, values } => {
                let idx = times.partition_point(|&bp| bp <= t);
                values[idx]
            }
        }
    }

    /// Interior breakpoints, empty for constants.
    pub fn breakpoints(&self) -> &[f64] {
        match self {
            Coef::Const(_) => &[],
            Coef::Piecewise { times, .. } => times,
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Coef::Const(_))
    }

    fn check_shape(&self, name: &str) -> Result<()> {
        match self {
            Coef::Const(v) => {
                if !v.is_finite() {
                    return Err(Error::invalid(format!("{name} must be finite"), 0));
                }
            }
            Coef::Piecewise { times, values } => {
                if values.len() != times.len() + 1 {
                    return Err(Error::invalid(
                        format!("{name}: need one more value than breakpoints"),
                        0,
                    ));
                }
                for (i, w) in times.windows(2).enumerate() {
                    if !(w[0] < w[1]) {
                        return Err(Error::invalid(
                            format!("{name}: breakpoints must be strictly increasing"),
                            i + 1,
                        ));
                    }
                }
                if let Some(&t0) = times.first() {
                    if !(t0 > 0.0) {
                        return Err(Error::invalid(
                            format!("{name}: breakpoints must be positive"),
                            0,
                        ));
                    }
                }
                for (i, v) in values.iter().enumerate() {
                    if !v.is_finite() {
                        return Err(Error::invalid(format!("{name} must be finite"), i));
                    }
                }
            }
        }
        Ok(())
    }
}

impl From<f64> for Coef {
    fn from(v: f64) -> Self {
        Coef::Const(v)
    }
}

/// Coefficients of the traded asset.
#[derive(Debug, Clone)]
pub struct MarketParams {
    /// Drift rate μ (1/time).
    pub mu: Coef,
    /// Diffusion volatility σ (1/√time), strictly positive.
    pub sigma: Coef,
    /// Relative jump size ζ, must stay above −1.
    pub zeta: Coef,
    /// Poisson jump intensity λ (1/time), nonnegative.
    pub lambda: Coef,
    /// Ellipticity floor δ: σ + |ζ| ≥ δ > 0 pointwise.
    pub delta: f64,
}

impl MarketParams {
    pub fn constant(mu: f64, sigma: f64, zeta: f64, lambda: f64, delta: f64) -> Self {
        MarketParams {
            mu: mu.into(),
            sigma: sigma.into(),
            zeta: zeta.into(),
            lambda: lambda.into(),
            delta,
        }
    }
}

/// Coefficients of the random horizon: loadings of the survival
/// martingale and the hazard density.
#[derive(Debug, Clone)]
pub struct HorizonParams {
    /// Brownian loading φₘ of the survival martingale (1/√time).
    pub phi_m: Coef,
    /// Jump multiplier ψₘ of the survival process across Poisson times; > 0.
    pub psi_m: Coef,
    /// Hazard rate λᴳ (1/time), nonnegative.
    pub hazard: Coef,
    /// Initial survival probability G₀ ∈ (0, 1].
    pub g0: f64,
}

impl HorizonParams {
    pub fn constant(phi_m: f64, psi_m: f64, hazard: f64, g0: f64) -> Self {
        HorizonParams {
            phi_m: phi_m.into(),
            psi_m: psi_m.into(),
            hazard: hazard.into(),
            g0,
        }
    }

    /// Horizon with constant survival martingale and no hazard: the
    /// stopped problem collapses to the fixed-horizon one.
    pub fn neutral() -> Self {
        HorizonParams::constant(0.0, 1.0, 0.0, 1.0)
    }
}

/// All coefficients frozen on one time cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelCell {
    pub mu: f64,
    pub sigma: f64,
    pub zeta: f64,
    pub lambda: f64,
    pub delta: f64,
    pub phi_m: f64,
    pub psi_m: f64,
    pub hazard: f64,
}

/// Which formula produced the optimal fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Quadratic,
    DiffusionLimit,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Branch::Quadratic => write!(f, "quadratic"),
            Branch::DiffusionLimit => write!(f, "diffusion-limit"),
        }
    }
}

/// Result of the pointwise first-order condition.
#[derive(Debug, Clone, Copy)]
pub struct SolveReport {
    /// Optimal fraction of wealth in the risky asset.
    pub theta_tilde: f64,
    /// Positive root 1 + θ̃ζ of the associated quadratic.
    pub phi_root: f64,
    /// Residual of the first-order condition at θ̃.
    pub kkt_residual: f64,
    /// Whether 1 + θ̃ζ > 0 holds.
    pub admissible: bool,
    pub branch: Branch,
}

/// Checks the market constraints pointwise on every segment: σ > 0,
/// ζ > −1, σ + |ζ| ≥ δ > 0, λ ≥ 0.
pub fn validate_market(p: &MarketParams) -> Result<()> {
    p.mu.check_shape("mu")?;
    p.sigma.check_shape("sigma")?;
    p.zeta.check_shape("zeta")?;
    p.lambda.check_shape("lambda")?;
    if !(p.delta > 0.0) || !p.delta.is_finite() {
        return Err(Error::invalid("delta > 0", 0));
    }
    let bps = merged_breakpoints(&[&p.mu, &p.sigma, &p.zeta, &p.lambda]);
    for (i, t) in segment_starts(&bps).enumerate() {
        let sigma = p.sigma.value_at(t);
        let zeta = p.zeta.value_at(t);
        let lambda = p.lambda.value_at(t);
        if !(sigma > 0.0) {
            return Err(Error::invalid("sigma > 0", i));
        }
        if !(zeta > -1.0) {
            return Err(Error::invalid("zeta > -1", i));
        }
        if !(sigma + zeta.abs() >= p.delta) {
            return Err(Error::invalid("sigma + |zeta| >= delta", i));
        }
        if !(lambda >= 0.0) {
            return Err(Error::invalid("lambda >= 0", i));
        }
    }
    Ok(())
}

/// Checks the horizon constraints pointwise: ψₘ > 0 (survival stays
/// positive across jumps), λᴳ ≥ 0, G₀ ∈ (0, 1].
pub fn validate_horizon(h: &HorizonParams) -> Result<()> {
    h.phi_m.check_shape("phi_m")?;
    h.psi_m.check_shape("psi_m")?;
    h.hazard.check_shape("hazard")?;
    if !(h.g0 > 0.0 && h.g0 <= 1.0) {
        return Err(Error::invalid("g0 in (0, 1]", 0));
    }
    let bps = merged_breakpoints(&[&h.phi_m, &h.psi_m, &h.hazard]);
    for (i, t) in segment_starts(&bps).enumerate() {
        if !(h.psi_m.value_at(t) > 0.0) {
            return Err(Error::invalid("psi_m > 0", i));
        }
        if !(h.hazard.value_at(t) >= 0.0) {
            return Err(Error::invalid("hazard >= 0", i));
        }
    }
    Ok(())
}

fn merged_breakpoints(coefs: &[&Coef]) -> Vec<f64> {
    let mut bps: Vec<f64> = coefs
        .iter()
        .flat_map(|c| c.breakpoints().to_vec())
        .collect();
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bps.dedup();
    bps
}

fn segment_starts(bps: &[f64]) -> impl Iterator<Item = f64> + '_ {
    std::iter::once(0.0).chain(bps.iter().copied())
}

/// A validated market/horizon pair.
#[derive(Debug, Clone)]
pub struct Model {
    pub market: MarketParams,
    pub horizon: HorizonParams,
}

impl Model {
    pub fn new(market: MarketParams, horizon: HorizonParams) -> Result<Self> {
        validate_market(&market)?;
        validate_horizon(&horizon)?;
        Ok(Model { market, horizon })
    }

    pub fn cell_at(&self, t: f64) -> ModelCell {
        ModelCell {
            mu: self.market.mu.value_at(t),
            sigma: self.market.sigma.value_at(t),
            zeta: self.market.zeta.value_at(t),
            lambda: self.market.lambda.value_at(t),
            delta: self.market.delta,
            phi_m: self.horizon.phi_m.value_at(t),
            psi_m: self.horizon.psi_m.value_at(t),
            hazard: self.horizon.hazard.value_at(t),
        }
    }

    /// Union of all coefficient breakpoints in (0, t_max).
    pub fn breakpoints(&self, t_max: f64) -> Vec<f64> {
        let mut bps = merged_breakpoints(&[
            &self.market.mu,
            &self.market.sigma,
            &self.market.zeta,
            &self.market.lambda,
            &self.horizon.phi_m,
            &self.horizon.psi_m,
            &self.horizon.hazard,
        ]);
        bps.retain(|&t| t > 0.0 && t < t_max);
        bps
    }

    pub fn is_time_constant(&self) -> bool {
        self.market.mu.is_const()
            && self.market.sigma.is_const()
            && self.market.zeta.is_const()
            && self.market.lambda.is_const()
            && self.horizon.phi_m.is_const()
            && self.horizon.psi_m.is_const()
            && self.horizon.hazard.is_const()
    }

    /// True when the horizon martingale is constant (φₘ ≡ 0, ψₘ ≡ 1):
    /// the random time can be built by the inverse-hazard construction.
    pub fn is_cox(&self, t_max: f64) -> bool {
        let mut starts = vec![0.0];
        starts.extend(self.breakpoints(t_max));
        starts.iter().all(|&t| {
            let c = self.cell_at(t);
            c.phi_m == 0.0 && c.psi_m == 1.0
        })
    }

    pub fn solve_at(&self, t: f64) -> SolveReport {
        solve_cell(&self.cell_at(t))
    }

    /// First-order condition solved on every parameter segment.
    pub fn solve_profile(&self, t_max: f64) -> Vec<(f64, SolveReport)> {
        let mut starts = vec![0.0];
        starts.extend(self.breakpoints(t_max));
        starts.into_iter().map(|t| (t, self.solve_at(t))).collect()
    }

    /// The companion market in which the optimal fraction scales by 1/ψₘ.
    pub fn transformed(&self) -> Result<Model> {
        if !self.is_time_constant() {
            return Err(Error::UnsupportedRegime(
                "model transform requires time-constant coefficients".into(),
            ));
        }
        let c = transformed_cell(&self.cell_at(0.0));
        Model::new(
            MarketParams::constant(c.mu, c.sigma, c.zeta, c.lambda, c.delta),
            HorizonParams::constant(c.phi_m, c.psi_m, c.hazard, self.horizon.g0),
        )
    }

    pub fn entropy_rate_at(&self, t: f64) -> Result<f64> {
        entropy_hellinger_rate(&self.cell_at(t))
    }

    /// Closed form of E[∫₀ᵀ G dH] for the entropy-Hellinger rate H' of the
    /// survival martingale: per segment the mean survival decays
    /// exponentially, so the integral is rate · G₀ e^{−Λ(a)} (1−e^{−ℓ(b−a)})/ℓ.
    pub fn entropy_certificate(&self, t_horizon: f64) -> Result<f64> {
        let mut edges = vec![0.0];
        edges.extend(self.breakpoints(t_horizon));
        edges.push(t_horizon);
        let mut total = 0.0_f64;
        let mut cum_hazard = 0.0_f64;
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            let cell = self.cell_at(a);
            let rate = entropy_hellinger_rate(&cell)?;
            let len = b - a;
            let weight = if cell.hazard > 0.0 {
                (-(-cell.hazard * len).exp_m1()) / cell.hazard
            } else {
                len
            };
            total += rate * self.horizon.g0 * (-cum_hazard).exp() * weight;
            cum_hazard += cell.hazard * len;
        }
        Ok(total)
    }
}

/// Optimal fraction from the pointwise first-order condition
///
///   0 = μ − λζ + σφₘ − σ²θ + ψₘλζ / (1 + θζ).
///
/// For ζ away from zero this is a quadratic in θ with exactly one root on
/// the admissible side of the pole; the root is extracted with the
/// q = −(B + sign(B)√disc)/2 convention so neither branch cancels.
pub fn solve_cell(c: &ModelCell) -> SolveReport {
    let ModelCell {
        mu,
        sigma,
        zeta,
        lambda,
        phi_m,
        psi_m,
        ..
    } = *c;
    let drift = mu - lambda * zeta + sigma * phi_m;

    if zeta.abs() < ZETA_BRANCH_TOL || lambda * psi_m == 0.0 {
        // Diffusion limit. With λ = 0 no jump ever occurs, so the
        // admissibility constraint is vacuous and the Merton-type ratio
        // applies for any ζ.
        let theta = (mu + sigma * phi_m) / (sigma * sigma);
        let phi_root = 1.0 + theta * zeta;
        let kkt = kkt_residual(theta, c).unwrap_or(f64::NAN);
        return SolveReport {
            theta_tilde: theta,
            phi_root,
            kkt_residual: kkt,
            admissible: phi_root > 0.0,
            branch: Branch::DiffusionLimit,
        };
    }

    // σ²ζ θ² + (σ² − drift·ζ) θ − (drift + ψₘλζ) = 0
    let a_q = sigma * sigma * zeta;
    let b_q = sigma * sigma - drift * zeta;
    let c_q = -(drift + psi_m * lambda * zeta);
    let disc = b_q * b_q - 4.0 * a_q * c_q;
    // disc = (σ² + drift·ζ)² + 4σ²λψₘζ² ≥ 0 always.
    let sqrt_disc = disc.max(0.0).sqrt();
    let q = -0.5 * (b_q + b_q.signum() * sqrt_disc);
    let (r1, r2) = (q / a_q, c_q / q);
    // Exactly one root satisfies 1 + θζ > 0; keep the larger margin.
    let theta = if 1.0 + r1 * zeta > 1.0 + r2 * zeta {
        r1
    } else {
        r2
    };
    let phi_root = 1.0 + theta * zeta;
    let kkt = kkt_residual(theta, c).unwrap_or(f64::NAN);
    SolveReport {
        theta_tilde: theta,
        phi_root,
        kkt_residual: kkt,
        admissible: phi_root > 0.0,
        branch: Branch::Quadratic,
    }
}

/// Positive root 1 + θ̃ζ of the first-order quadratic, in the change of
/// variable that makes positivity manifest:
///
///   φ̃ = (Γζ + |ζ| √(Γ² + 4σ²λψₘ)) / (2σ²),   Γ = μ − λζ + σφₘ + σ²/ζ.
///
/// When Γζ < 0 the conjugate form 2λψₘζ² / (|ζ|√(…) − Γζ) avoids the
/// subtraction of nearly equal magnitudes.
pub fn quadratic_root(c: &ModelCell) -> Result<f64> {
    if c.zeta.abs() < ZETA_BRANCH_TOL {
        return Err(Error::invalid(
            "zeta != 0 (use the diffusion-limit branch)",
            0,
        ));
    }
    let ModelCell {
        mu,
        sigma,
        zeta,
        lambda,
        phi_m,
        psi_m,
        ..
    } = *c;
    let s2 = sigma * sigma;
    let gamma = mu - lambda * zeta + sigma * phi_m + s2 / zeta;
    let root_term = (gamma * gamma + 4.0 * s2 * lambda * psi_m).sqrt();
    let gz = gamma * zeta;
    let phi = if gz >= 0.0 {
        (gz + zeta.abs() * root_term) / (2.0 * s2)
    } else {
        2.0 * lambda * psi_m * zeta * zeta / (zeta.abs() * root_term - gz)
    };
    if !(phi > 0.0) {
        return Err(Error::NumericalFailure(format!(
            "quadratic root must be positive, got {phi}"
        )));
    }
    Ok(phi)
}

/// Residual of the first-order condition at a candidate fraction θ:
///
///   r(θ) = μ − λζ + σφₘ − σ²θ + ψₘλζ / (1 + θζ).
///
/// r vanishes at the optimum and its sign is the ascent direction of the
/// expected log-growth; r is strictly decreasing on the admissible range.
pub fn kkt_residual(theta: f64, c: &ModelCell) -> Result<f64> {
    let gross = 1.0 + theta * c.zeta;
    if !(gross > 0.0) {
        return Err(Error::NonAdmissible(format!(
            "1 + theta*zeta = {gross} must be positive"
        )));
    }
    Ok(
        c.mu - c.lambda * c.zeta + c.sigma * c.phi_m - c.sigma * c.sigma * theta
            + c.psi_m * c.lambda * c.zeta / gross,
    )
}

/// Coefficients of the companion market S̄ whose optimal fraction is
/// θ̃/ψₘ: volatility √ψₘ σ, jump size ψₘ ζ, drift absorbing the jump
/// compensation, and the horizon's jump tilt folded away (ψ̄ₘ = 1).
/// The Brownian loading stays φₘ: the covariation rate of ln S̄ with the
/// survival martingale is σ̄ φₘ = σ √ψₘ φₘ, which is what the
/// first-order condition of the companion problem carries.
pub fn transformed_cell(c: &ModelCell) -> ModelCell {
    let sqrt_psi = c.psi_m.sqrt();
    ModelCell {
        mu: c.lambda * c.zeta * (c.psi_m - 1.0) + c.mu + c.sigma * c.phi_m * (1.0 - sqrt_psi),
        sigma: c.sigma * sqrt_psi,
        zeta: c.psi_m * c.zeta,
        lambda: c.lambda,
        delta: c.delta * c.psi_m.min(1.0),
        phi_m: c.phi_m,
        psi_m: 1.0,
        hazard: c.hazard,
    }
}

/// Time-rate of the entropy-Hellinger process of the survival
/// martingale: ½φₘ² + λ(ψₘ ln ψₘ − ψₘ + 1). Nonnegative, zero exactly
/// in the pseudo-stopping case (φₘ, ψₘ) = (0, 1).
pub fn entropy_hellinger_rate(c: &ModelCell) -> Result<f64> {
    if !(c.psi_m > 0.0) {
        return Err(Error::invalid("psi_m > 0", 0));
    }
    Ok(0.5 * c.phi_m * c.phi_m + c.lambda * (c.psi_m * c.psi_m.ln() - c.psi_m + 1.0))
}

/// Pathwise Hellinger functional of order zero: ½⟨Nᶜ⟩ + Σ(ΔN − ln(1+ΔN)).
pub fn hellinger0_pathwise(continuous_qv: f64, jumps: &[f64]) -> Result<f64> {
    if !(continuous_qv >= 0.0) || !continuous_qv.is_finite() {
        return Err(Error::DomainError(format!(
            "continuous quadratic variation must be finite and >= 0, got {continuous_qv}"
        )));
    }
    let mut total = 0.5 * continuous_qv;
    for &j in jumps {
        if !(j > -1.0) {
            return Err(Error::NonAdmissible(format!(
                "jump {j} <= -1 leaves the positive domain"
            )));
        }
        total += j - j.ln_1p();
    }
    Ok(total)
}
