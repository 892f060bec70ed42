//! Optimal training length.
//!
//! [`optimize_det`] bisects the stationarity condition of the deterministic
//! net rate, `(1 - tau/T) R'(tau) - R(tau)/T = 0`, on `[0, T]` and then clamps
//! the root to the feasible range `[K, T]`. [`optimize_mc`] is an exhaustive
//! search of the simulated net rate over a grid with common random numbers.
//! [`convergence_report`] compares the two on replicated, larger networks.

use crate::det_equiv::{evaluate, RateEvaluation, SolverOptions};
use crate::error::{Error, Result};
use crate::monte_carlo::{estimate_net_rate_grid, rate_samples, summarize};
use crate::system_model::Scenario;

pub const DEFAULT_TAU_TOLERANCE: f64 = 1e-3;

/// Required stationarity of the returned root, relative to `R(tau)/T`.
pub const STATIONARITY_TOLERANCE: f64 = 1e-8;

/// Points of the coarse grid on which the net-rate derivative must decrease.
const PRECHECK_POINTS: usize = 32;

const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clamp {
    None,
    /// The unconstrained optimum needs fewer than `K` pilots.
    AtUsers,
    /// The net rate still increases at `T`.
    AtCoherence,
}

impl Clamp {
    pub fn as_str(&self) -> &'static str {
        match self {
            Clamp::None => "none",
            Clamp::AtUsers => "at_K",
            Clamp::AtCoherence => "at_T",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOptimum {
    /// Optimal training length after clamping to `[K, T]`.
    pub tau_star: f64,
    /// Root of the stationarity condition before clamping, if bracketed.
    pub unclamped_root: Option<f64>,
    /// Net rate at `tau_star`, nats per channel use per receive antenna.
    pub net_rate: f64,
    /// Standard error of `net_rate` for simulated optima.
    pub net_rate_std_err: Option<f64>,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub clamped: Clamp,
    /// Better of the two integer neighbours of `tau_star` within `[K, T]`.
    pub tau_star_int: Option<u64>,
}

fn check_horizon(scenario: &Scenario) -> Result<(f64, f64)> {
    let users = scenario.config.users as f64;
    let coherence = scenario.config.coherence;
    if !(coherence > users) {
        return Err(Error::validation(
            "coherence",
            format!("optimization needs T > K, got T = {coherence}, K = {users}"),
        ));
    }
    Ok((users, coherence))
}

/// Maximizes the deterministic net rate by bisection on its derivative.
pub fn optimize_det(
    scenario: &Scenario,
    tol_tau: f64,
    opts: &SolverOptions,
) -> Result<TrainingOptimum> {
    let (users, coherence) = check_horizon(scenario)?;
    if !(tol_tau > 0.0) {
        return Err(Error::validation("tol_tau", "must be positive"));
    }
    let eval = |tau: f64| evaluate(scenario, tau, opts);
    let slope = |e: &RateEvaluation| e.net_derivative(coherence);

    // Bisection is only valid if the derivative decreases.
    let coarse = (0..=PRECHECK_POINTS)
        .map(|m| eval(coherence * m as f64 / PRECHECK_POINTS as f64))
        .collect::<Result<Vec<_>>>()?;
    let slopes: Vec<f64> = coarse.iter().map(slope).collect();
    let scale = slopes.iter().fold(0.0f64, |a, s| a.max(s.abs()));
    for (m, w) in slopes.windows(2).enumerate() {
        if w[1] > w[0] + 1e-12 * scale {
            return Err(Error::ConcavityViolation {
                tau: coarse[m + 1].tau,
                detail: format!("derivative rises from {:e} to {:e}", w[0], w[1]),
            });
        }
    }

    let first = &coarse[0];
    let last = &coarse[PRECHECK_POINTS];
    if slopes[0] <= 0.0 {
        return clamped(
            scenario,
            users,
            Clamp::AtUsers,
            None,
            (users, users),
            0,
            opts,
        );
    }
    if slopes[PRECHECK_POINTS] >= 0.0 {
        let bracket = (coherence, coherence);
        return clamped(
            scenario,
            coherence,
            Clamp::AtCoherence,
            None,
            bracket,
            0,
            opts,
        );
    }

    let mut lo = first.clone();
    let mut hi = last.clone();
    let mut iterations = 0;
    let tolerance_at = |e: &RateEvaluation| STATIONARITY_TOLERANCE * e.rate / coherence;
    loop {
        iterations += 1;
        let mid = eval(0.5 * (lo.tau + hi.tau))?;
        let g = slope(&mid);
        if g > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        let width = hi.tau - lo.tau;
        let stationary =
            slope(&lo).abs() <= tolerance_at(&lo) && slope(&hi).abs() <= tolerance_at(&hi);
        if (width <= tol_tau && stationary)
            || width <= 4.0 * f64::EPSILON * coherence
            || iterations >= MAX_BISECTIONS
        {
            break;
        }
    }
    let bracket = (lo.tau, hi.tau);
    let best = if net(&lo, coherence) >= net(&hi, coherence) {
        lo
    } else {
        hi
    };
    let root = best.tau;
    if root < users {
        return clamped(
            scenario,
            users,
            Clamp::AtUsers,
            Some(root),
            bracket,
            iterations,
            opts,
        );
    }
    Ok(TrainingOptimum {
        tau_star: root,
        unclamped_root: Some(root),
        net_rate: net(&best, coherence),
        net_rate_std_err: None,
        bracket,
        iterations,
        clamped: Clamp::None,
        tau_star_int: best_integer(scenario, root, opts)?,
    })
}

fn net(e: &RateEvaluation, coherence: f64) -> f64 {
    e.net_rate(coherence)
}

fn clamped(
    scenario: &Scenario,
    tau: f64,
    clamp: Clamp,
    root: Option<f64>,
    bracket: (f64, f64),
    iterations: usize,
    opts: &SolverOptions,
) -> Result<TrainingOptimum> {
    let coherence = scenario.config.coherence;
    let e = evaluate(scenario, tau, opts)?;
    Ok(TrainingOptimum {
        tau_star: tau,
        unclamped_root: root,
        net_rate: net(&e, coherence),
        net_rate_std_err: None,
        bracket,
        iterations,
        clamped: clamp,
        tau_star_int: best_integer(scenario, tau, opts)?,
    })
}

fn best_integer(scenario: &Scenario, tau: f64, opts: &SolverOptions) -> Result<Option<u64>> {
    let users = scenario.config.users as f64;
    let coherence = scenario.config.coherence;
    let mut best: Option<(u64, f64)> = None;
    for cand in [tau.floor(), tau.ceil()] {
        if cand < users || cand > coherence {
            continue;
        }
        let r = evaluate(scenario, cand, opts)?.net_rate(coherence);
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((cand as u64, r));
        }
    }
    Ok(best.map(|(t, _)| t))
}

/// Evenly spaced training lengths from `lo` to at most `hi`.
pub fn tau_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || hi < lo {
        return Vec::new();
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|m| lo + m as f64 * step).collect()
}

fn check_grid(scenario: &Scenario, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("training grid is empty".into()));
    }
    let users = scenario.config.users as f64;
    let coherence = scenario.config.coherence;
    if let Some(bad) = grid.iter().find(|&&t| !(t >= users && t <= coherence)) {
        return Err(Error::Domain(format!(
            "grid point {bad} outside [{users}, {coherence}]"
        )));
    }
    Ok(())
}

/// Index of the largest value, the smallest `tau` winning ties.
fn argmax(grid: &[f64], values: &[f64]) -> usize {
    let mut best = 0;
    for m in 1..grid.len() {
        if values[m] > values[best] || (values[m] == values[best] && grid[m] < grid[best]) {
            best = m;
        }
    }
    best
}

/// Nearest grid points on either side of `tau`, or `tau` itself at an edge.
fn neighbours(grid: &[f64], tau: f64) -> (f64, f64) {
    let below = grid.iter().copied().filter(|&t| t < tau).reduce(f64::max);
    let above = grid.iter().copied().filter(|&t| t > tau).reduce(f64::min);
    (below.unwrap_or(tau), above.unwrap_or(tau))
}

/// Exhaustive search of the simulated net rate over `grid`.
pub fn optimize_mc(
    scenario: &Scenario,
    grid: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<TrainingOptimum> {
    check_grid(scenario, grid)?;
    let estimates = estimate_net_rate_grid(scenario, grid, n_samples, seed)?;
    let means: Vec<f64> = estimates.iter().map(|e| e.mean).collect();
    let best = argmax(grid, &means);
    let tau = grid[best];
    Ok(TrainingOptimum {
        tau_star: tau,
        unclamped_root: None,
        net_rate: estimates[best].mean,
        net_rate_std_err: Some(estimates[best].std_err),
        bracket: neighbours(grid, tau),
        iterations: grid.len(),
        clamped: Clamp::None,
        tau_star_int: (tau.fract() == 0.0).then_some(tau as u64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSettings {
    pub n_samples: usize,
    pub seed: u64,
    pub grid_step: f64,
    /// Batches used to estimate the spread of the simulated optimum.
    pub batches: usize,
    pub tol_tau: f64,
}

impl Default for ConvergenceSettings {
    fn default() -> Self {
        ConvergenceSettings {
            n_samples: crate::monte_carlo::DEFAULT_SAMPLES,
            seed: 0,
            grid_step: 1.0,
            batches: 10,
            tol_tau: DEFAULT_TAU_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub scale: usize,
    pub tau_det: f64,
    pub tau_mc: f64,
    pub net_rate_det: f64,
    pub net_rate_mc: f64,
    /// `|tau* - taubar*|`.
    pub tau_gap: f64,
    /// Batch-means standard error of `tau*`, with grid rounding folded in.
    pub tau_gap_std_err: f64,
    /// `|R_net(tau*) - Rbar_net(taubar*)|`, nats.
    pub rate_gap: f64,
    pub rate_gap_std_err: f64,
}

impl ConvergenceRow {
    pub fn relative_rate_gap(&self) -> f64 {
        self.rate_gap / self.net_rate_det
    }
}

/// Optimizer gaps on networks replicated `s` times (cells, users and
/// subcarriers scaled together, SNR and bits per symbol held fixed).
pub fn convergence_report(
    base: &Scenario,
    scales: &[usize],
    settings: &ConvergenceSettings,
) -> Result<Vec<ConvergenceRow>> {
    let opts = SolverOptions::default();
    scales
        .iter()
        .map(|&s| {
            let scenario = base.scaled(s)?;
            let det = optimize_det(&scenario, settings.tol_tau, &opts)?;
            let users = scenario.config.users as f64;
            let coherence = scenario.config.coherence;
            let grid = tau_grid(users, coherence, settings.grid_step);
            check_grid(&scenario, &grid)?;

            let samples = rate_samples(&scenario, &grid, settings.n_samples, settings.seed)?;
            let estimates = samples
                .iter()
                .zip(&grid)
                .map(|(v, t)| {
                    summarize(v, settings.seed).map(|e| {
                        let f = 1.0 - t / coherence;
                        (e.mean * f, e.std_err * f)
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let means: Vec<f64> = estimates.iter().map(|e| e.0).collect();
            let best = argmax(&grid, &means);

            let batches = settings.batches.max(2);
            let per_batch = settings.n_samples / batches;
            let batch_taus: Vec<f64> = (0..batches)
                .map(|b| {
                    let range = b * per_batch..(b + 1) * per_batch;
                    let batch_means: Vec<f64> = samples
                        .iter()
                        .zip(&grid)
                        .map(|(v, t)| {
                            let ok: Vec<f64> = v[range.clone()]
                                .iter()
                                .copied()
                                .filter(|x| x.is_finite())
                                .collect();
                            (1.0 - t / coherence) * ok.iter().sum::<f64>() / ok.len().max(1) as f64
                        })
                        .collect();
                    grid[argmax(&grid, &batch_means)]
                })
                .collect();
            let mean_tau = batch_taus.iter().sum::<f64>() / batches as f64;
            let var_tau = batch_taus
                .iter()
                .map(|t| (t - mean_tau).powi(2))
                .sum::<f64>()
                / (batches - 1) as f64;
            let tau_se = (var_tau / batches as f64 + settings.grid_step.powi(2) / 12.0).sqrt();

            let tau_mc = grid[best];
            Ok(ConvergenceRow {
                scale: s,
                tau_det: det.tau_star,
                tau_mc,
                net_rate_det: det.net_rate,
                net_rate_mc: estimates[best].0,
                tau_gap: (tau_mc - det.tau_star).abs(),
                tau_gap_std_err: tau_se,
                rate_gap: (estimates[best].0 - det.net_rate).abs(),
                rate_gap_std_err: estimates[best].1,
            })
        })
        .collect()
}
