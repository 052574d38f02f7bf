//! Monte Carlo engine: horizon-weighted evaluation of stopped
//! functionals, deterministic parallel reduction and the supermartingale
//! z-test.
//!
//! Determinism contract: paths are processed in fixed-size chunks and
//! chunk results are merged in chunk order, so the reported digits do
//! not depend on the number of worker threads or the scheduling of
//! chunks.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::simulate::{gen_path, GridSpec, PathBundle};

/// Paths per work item; must stay even so antithetic pairs never
/// straddle a chunk boundary.
const CHUNK: usize = 1024;

/// Monte Carlo settings shared by every estimator.
#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub antithetic: bool,
    pub ci_level: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_paths: 100_000,
            seed: 42,
            antithetic: false,
            ci_level: 0.99,
        }
    }
}

impl McConfig {
    pub fn with_paths(mut self, n: usize) -> Self {
        self.n_paths = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub ci_level: f64,
}

impl McEstimate {
    /// Combined standard error of a difference of two estimates.
    pub fn combined_stderr(&self, other: &McEstimate) -> f64 {
        (self.stderr * self.stderr + other.stderr * other.stderr).sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn new() -> Self {
        Welford {
            n: 0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n1 = self.n as f64;
        let n2 = other.n as f64;
        let d = other.mean - self.mean;
        let n = n1 + n2;
        self.mean += d * n2 / n;
        self.m2 += other.m2 + d * d * n1 * n2 / n;
        self.n += other.n;
    }

    fn estimate(&self, ci_level: f64) -> McEstimate {
        let n = self.n as f64;
        let stderr = if self.n > 1 {
            (self.m2 / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        McEstimate {
            mean: self.mean,
            stderr,
            n_paths: self.n as usize,
            ci_level,
        }
    }
}

/// Runs `eval` over `mc.n_paths` scenario bundles and returns one
/// estimate per output slot. With antithetic pairing the two paths of a
/// pair are averaged into a single sample.
pub fn mc_run_multi<F>(
    model: &Model,
    grid: &GridSpec,
    mc: &McConfig,
    n_out: usize,
    eval: F,
) -> Result<Vec<McEstimate>>
where
    F: Fn(&PathBundle, &mut [f64]) -> Result<()> + Sync,
{
    if mc.n_paths < 2 {
        return Err(Error::invalid("n_paths >= 2", 0));
    }
    if mc.antithetic && mc.n_paths % 2 != 0 {
        return Err(Error::invalid(
            "n_paths must be even with antithetic pairing",
            0,
        ));
    }

    let chunk_starts: Vec<usize> = (0..mc.n_paths).step_by(CHUNK).collect();
    let chunk_stats: Vec<Result<Vec<Welford>>> = chunk_starts
        .par_iter()
        .map(|&start| {
            let end = (start + CHUNK).min(mc.n_paths);
            let mut acc = vec![Welford::new(); n_out];
            let mut out = vec![0.0; n_out];
            let mut pair = vec![0.0; n_out];
            let mut idx = start;
            while idx < end {
                let run_one = |i: usize, out: &mut [f64]| -> Result<()> {
                    let b = gen_path(model, grid, mc.seed, i as u64, mc.antithetic)
                        .map_err(|e| wrap_path(i, e))?;
                    eval(&b, out).map_err(|e| wrap_path(i, e))?;
                    for (s, v) in out.iter().enumerate() {
                        if !v.is_finite() {
                            return Err(wrap_path(
                                i,
                                Error::DomainError(format!("estimator output {s} is {v}")),
                            ));
                        }
                    }
                    Ok(())
                };
                if mc.antithetic {
                    run_one(idx, &mut out)?;
                    run_one(idx + 1, &mut pair)?;
                    for (a, w) in acc.iter_mut().enumerate() {
                        w.push(0.5 * (out[a] + pair[a]));
                    }
                    idx += 2;
                } else {
                    run_one(idx, &mut out)?;
                    for (a, w) in acc.iter_mut().enumerate() {
                        w.push(out[a]);
                    }
                    idx += 1;
                }
            }
            Ok(acc)
        })
        .collect();

    let mut totals = vec![Welford::new(); n_out];
    for stats in chunk_stats {
        let stats = stats?;
        for (t, s) in totals.iter_mut().zip(stats.iter()) {
            t.merge(s);
        }
    }
    Ok(totals.iter().map(|w| w.estimate(mc.ci_level)).collect())
}

fn wrap_path(path_index: usize, source: Error) -> Error {
    Error::PathError {
        path_index: path_index as u64,
        source: Box::new(source),
    }
}

/// Single-quantity wrapper around [`mc_run_multi`].
pub fn mc_run<F>(model: &Model, grid: &GridSpec, mc: &McConfig, eval: F) -> Result<McEstimate>
where
    F: Fn(&PathBundle) -> Result<f64> + Sync,
{
    let out = mc_run_multi(model, grid, mc, 1, |b, slot| {
        slot[0] = eval(b)?;
        Ok(())
    })?;
    Ok(out[0])
}

/// Horizon-weighted per-path evaluation of a stopped functional:
///
///   G(T)·f(T) + Σ_cells f(tᵢ)·ΔD(tᵢ),
///
/// an unbiased sample of E[f at the stopped time restricted to a
/// positive horizon] computed from the observable path alone. The atom
/// a horizon places at time zero carries mass 1 − G₀ and weight f(0),
/// which vanishes for wealth functionals; it is deliberately not added
/// here so that f ≡ 1 recovers the survival-martingale mean G₀.
pub fn weighted_expect_stopped(f_nodes: &[f64], b: &PathBundle) -> Result<f64> {
    if f_nodes.len() != b.t.len() {
        return Err(Error::DomainError(format!(
            "functional has {} values for {} nodes",
            f_nodes.len(),
            b.t.len()
        )));
    }
    let mut total = 0.0;
    for i in 0..b.n_cells() {
        let f = f_nodes[i];
        if !f.is_finite() {
            return Err(Error::DomainError(format!(
                "non-finite functional at node {i}"
            )));
        }
        total += f * b.ddof[i];
    }
    let f_t = *f_nodes.last().unwrap();
    if !f_t.is_finite() {
        return Err(Error::DomainError("non-finite terminal functional".into()));
    }
    Ok(total + b.g.last().unwrap() * f_t)
}

/// Same weighting truncated at a node index: the weighted value of the
/// functional stopped at `horizon ∧ t[node]`.
pub fn weighted_expect_stopped_at(f_nodes: &[f64], b: &PathBundle, node: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..node {
        total += f_nodes[i] * b.ddof[i];
    }
    total + b.g[node] * f_nodes[node]
}

/// Checkpoint times that are exact uniform grid nodes, so every path
/// (whatever jump nodes it acquired) contains them bit-for-bit.
pub fn uniform_checkpoint_times(grid: &GridSpec, k: usize) -> Vec<f64> {
    (1..=k)
        .map(|j| grid.uniform_node(j * grid.n_steps / k))
        .collect()
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

/// One checkpoint-to-checkpoint increment of a tested process.
#[derive(Debug, Clone, Copy)]
pub struct IncrementStat {
    pub mean: f64,
    pub stderr: f64,
    pub z: f64,
    pub pass: bool,
}

/// Outcome of the one-sided supermartingale test.
#[derive(Debug, Clone)]
pub struct SupermartingaleReport {
    pub alpha: f64,
    pub z_crit: f64,
    pub increments: Vec<IncrementStat>,
    pub worst_z: f64,
    pub pass: bool,
}

/// Pathwise-exact martingales produce increments that are pure roundoff
/// (≈1e-16 with stderr of the same scale); means below this floor are
/// never treated as drift.
const DRIFT_NOISE_FLOOR: f64 = 1e-12;

/// Tests H₀: E[increment] ≤ 0 for each consecutive checkpoint increment
/// at level `alpha` with a Bonferroni correction across increments. An
/// increment fails when its mean exceeds the machine-noise floor by more
/// than z · stderr.
pub fn supermartingale_test(
    increments: &[McEstimate],
    alpha: f64,
) -> Result<SupermartingaleReport> {
    if increments.is_empty() {
        return Err(Error::invalid("need at least one increment", 0));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha in (0,1)", 0));
    }
    let m = increments.len() as f64;
    let z_crit = normal_quantile(1.0 - alpha / m);
    let stats: Vec<IncrementStat> = increments
        .iter()
        .map(|e| {
            let excess = e.mean - DRIFT_NOISE_FLOOR;
            let z = if e.stderr > 0.0 {
                excess / e.stderr
            } else if excess > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            IncrementStat {
                mean: e.mean,
                stderr: e.stderr,
                z,
                pass: z <= z_crit,
            }
        })
        .collect();
    let worst_z = stats.iter().map(|s| s.z).fold(f64::NEG_INFINITY, f64::max);
    let pass = stats.iter().all(|s| s.pass);
    Ok(SupermartingaleReport {
        alpha,
        z_crit,
        increments: stats,
        worst_z,
        pass,
    })
}
