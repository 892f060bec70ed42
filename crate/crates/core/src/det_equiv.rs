//! Deterministic equivalent of the ergodic rate.
//!
//! The diagonal matrix `T_P` solves, at the real point `z = -L/(K P)`,
//!
//! ```text
//! t_i     = [ (1/K) sum_j vbar_ij / (1 + delta_j) + L/(K P) ]^-1
//! delta_j = (1/K) sum_i vbar_ij t_i
//! ```
//!
//! and the rate functional, its `tau`-derivative and (for doubly regular
//! profiles) its closed form and curvature are built from `(t, delta)`.

use crate::error::{Error, Result};
use crate::system_model::{
    effective_derivatives, ProfileKind, QuantizationNoise, Scenario, SystemConfig, VarianceProfile,
};

/// Relative tolerance for row/column mean equality in [`check_regularity`].
pub const REGULARITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Sup-norm of the relative update at which iteration stops.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-12,
            max_iter: 10_000,
        }
    }
}

/// Converged fixed point at `z = -L/(K P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetEquivSolution {
    /// Diagonal of `T_P`, length `N`.
    pub t: Vec<f64>,
    /// `delta_j = (1/K) tr(D_j T_P)`, length `K`.
    pub delta: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub tolerance: f64,
    /// `K P / L`.
    pub load: f64,
}

impl DetEquivSolution {
    /// The interval every `t_i` must lie in for a profile with the given max entry.
    pub fn bounds(&self, max_entry: f64) -> (f64, f64) {
        (1.0 / (1.0 / self.load + max_entry), self.load)
    }

    fn check(&self, eff: &VarianceProfile) -> Result<()> {
        if self.residual > self.tolerance {
            return Err(Error::Unconverged {
                residual: self.residual,
                tolerance: self.tolerance,
            });
        }
        if eff.rows() != self.t.len() || eff.cols() != self.delta.len() {
            return Err(Error::Shape {
                expected: (self.t.len(), self.delta.len()),
                got: eff.shape(),
            });
        }
        Ok(())
    }
}

fn update_delta(eff: &VarianceProfile, t: &[f64], delta: &mut [f64]) {
    let k = eff.cols() as f64;
    delta.iter_mut().for_each(|d| *d = 0.0);
    for (i, ti) in t.iter().enumerate() {
        for (d, v) in delta.iter_mut().zip(eff.row(i)) {
            *d += v * ti;
        }
    }
    delta.iter_mut().for_each(|d| *d /= k);
}

/// Picard iteration on the fixed-point equation, started from `t = K P / L`.
///
/// The update map is monotone, so from the upper bound the iterates decrease
/// towards the solution. Damping by one half switches on if the residual
/// grows on two consecutive steps.
pub fn solve_fixed_point(
    eff: &VarianceProfile,
    users: usize,
    power: f64,
    subcarriers: usize,
    opts: &SolverOptions,
) -> Result<DetEquivSolution> {
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::Domain(format!(
            "deterministic equivalent needs P > 0, got {power}"
        )));
    }
    if users != eff.cols() {
        return Err(Error::Shape {
            expected: (eff.rows(), users),
            got: eff.shape(),
        });
    }
    if subcarriers == 0 {
        return Err(Error::validation("subcarriers", "must be at least 1"));
    }
    let k = users as f64;
    let load = k * power / subcarriers as f64;
    let inv_load = 1.0 / load;
    let n = eff.rows();

    let mut t = vec![load; n];
    let mut next = vec![0.0; n];
    let mut delta = vec![0.0; users];
    let mut weights = vec![0.0; users];
    let mut residual = f64::INFINITY;
    let mut rising = 0;
    let mut damped = false;

    for iter in 1..=opts.max_iter {
        update_delta(eff, &t, &mut delta);
        for (w, d) in weights.iter_mut().zip(&delta) {
            *w = 1.0 / (1.0 + d);
        }
        let mut res = 0.0f64;
        for i in 0..n {
            let s: f64 = eff.row(i).iter().zip(&weights).map(|(v, w)| v * w).sum();
            let ti = 1.0 / (s / k + inv_load);
            res = res.max((ti - t[i]).abs() / ti);
            next[i] = ti;
        }
        if res > residual {
            rising += 1;
            if rising >= 2 {
                damped = true;
            }
        } else {
            rising = 0;
        }
        residual = res;
        if damped {
            for (a, b) in t.iter_mut().zip(&next) {
                *a = 0.5 * (*a + b);
            }
        } else {
            std::mem::swap(&mut t, &mut next);
        }
        if residual <= opts.tolerance {
            update_delta(eff, &t, &mut delta);
            let sol = DetEquivSolution {
                t,
                delta,
                residual,
                iterations: iter,
                tolerance: opts.tolerance,
                load,
            };
            let (lo, hi) = sol.bounds(eff.max());
            let slack = 1e-12;
            if sol
                .t
                .iter()
                .any(|&ti| ti < lo * (1.0 - slack) || ti > hi * (1.0 + slack))
            {
                return Err(Error::Domain(
                    "fixed point left the admissible interval".into(),
                ));
            }
            return Ok(sol);
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// Deterministic-equivalent rate in nats per channel use per receive antenna.
pub fn rate_det(eff: &VarianceProfile, sol: &DetEquivSolution) -> Result<f64> {
    sol.check(eff)?;
    let n = sol.t.len() as f64;
    let user_terms: f64 = sol.delta.iter().map(|d| d.ln_1p() - d / (1.0 + d)).sum();
    let log_det: f64 = sol.t.iter().map(|t| (t / sol.load).ln()).sum();
    Ok(((user_terms - log_det) / n).max(0.0))
}

/// `dR/dtau = (1/N) sum_j [(1/K) tr(D'_j T_P)] / [1 + (1/K) tr(D_j T_P)]`.
pub fn rate_det_derivative(
    eff: &VarianceProfile,
    eff_derivative: &VarianceProfile,
    sol: &DetEquivSolution,
) -> Result<f64> {
    sol.check(eff)?;
    if eff_derivative.shape() != eff.shape() {
        return Err(Error::Shape {
            expected: eff.shape(),
            got: eff_derivative.shape(),
        });
    }
    let mut traces = vec![0.0; eff.cols()];
    update_delta(eff_derivative, &sol.t, &mut traces);
    let sum: f64 = traces
        .iter()
        .zip(&sol.delta)
        .map(|(tr, d)| tr / (1.0 + d))
        .sum();
    Ok(sum / sol.t.len() as f64)
}

/// Rate, derivative and fixed point at one training length.
#[derive(Debug, Clone, PartialEq)]
pub struct RateEvaluation {
    pub tau: f64,
    pub rate: f64,
    pub derivative: f64,
    pub solution: DetEquivSolution,
}

impl RateEvaluation {
    /// `(1 - tau/T) R(tau)`.
    pub fn net_rate(&self, coherence: f64) -> f64 {
        (1.0 - self.tau / coherence) * self.rate
    }

    /// `(1 - tau/T) R'(tau) - R(tau)/T`.
    pub fn net_derivative(&self, coherence: f64) -> f64 {
        (1.0 - self.tau / coherence) * self.derivative - self.rate / coherence
    }
}

/// Evaluates the deterministic equivalent of a scenario at `tau`.
pub fn evaluate(scenario: &Scenario, tau: f64, opts: &SolverOptions) -> Result<RateEvaluation> {
    let cfg = &scenario.config;
    let d = effective_derivatives(cfg, &scenario.raw, &scenario.noise, tau)?;
    let (rows, cols) = scenario.raw.shape();
    let eff = VarianceProfile::new(ProfileKind::Effective, rows, cols, d.effective)?;
    let first = d.first.into_iter().map(|x| x.max(0.0)).collect();
    let eff_d = VarianceProfile::new(ProfileKind::EffectiveDerivative, rows, cols, first)?;
    if cfg.power == 0.0 {
        // No signal: the channel term vanishes identically.
        return Ok(RateEvaluation {
            tau,
            rate: 0.0,
            derivative: 0.0,
            solution: DetEquivSolution {
                t: vec![f64::INFINITY; rows],
                delta: vec![0.0; cols],
                residual: 0.0,
                iterations: 0,
                tolerance: opts.tolerance,
                load: f64::INFINITY,
            },
        });
    }
    let solution = solve_fixed_point(&eff, cfg.users, cfg.power, cfg.subcarriers, opts)?;
    Ok(RateEvaluation {
        tau,
        rate: rate_det(&eff, &solution)?,
        derivative: rate_det_derivative(&eff, &eff_d, &solution)?,
        solution,
    })
}

/// Second central difference of the deterministic rate,
/// `[R(tau+h) - 2 R(tau) + R(tau-h)] / h^2`.
///
/// A numerical concavity diagnostic for profiles without a closed form.
pub fn numerical_curvature(
    scenario: &Scenario,
    tau: f64,
    h: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let r = |x: f64| evaluate(scenario, x, opts).map(|e| e.rate);
    Ok((r(tau + h)? - 2.0 * r(tau)? + r(tau - h)?) / (h * h))
}

/// Whether a square profile has all row and column means equal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityCheck {
    pub is_doubly_regular: bool,
    /// Common mean when regular.
    pub mean: Option<f64>,
}

pub fn check_regularity(eff: &VarianceProfile) -> RegularityCheck {
    let irregular = RegularityCheck {
        is_doubly_regular: false,
        mean: None,
    };
    let (n, k) = eff.shape();
    if n != k {
        return irregular;
    }
    let data = eff.as_slice();
    let mean = data.iter().sum::<f64>() / (n * k) as f64;
    let close = |m: f64| (m - mean).abs() <= REGULARITY_TOLERANCE * mean.abs();
    let rows_ok = eff.row_sums().iter().all(|s| close(s / k as f64));
    let cols_ok = (0..k).all(|j| close((0..n).map(|i| eff.get(i, j)).sum::<f64>() / n as f64));
    if rows_ok && cols_ok {
        RegularityCheck {
            is_doubly_regular: true,
            mean: Some(mean),
        }
    } else {
        irregular
    }
}

/// Scalar fixed point `t = 1 / (L/(K P) + m / (1 + m t))` for a doubly
/// regular profile with common mean `m`.
///
/// The positive root is `(sqrt(1 + 4 (K P/L) m) - 1) / (2 m)`, evaluated here
/// in the cancellation-free form `2 (K P/L) / (sqrt(1 + 4 (K P/L) m) + 1)`.
pub fn doubly_regular_solution(
    mean: f64,
    users: usize,
    power: f64,
    subcarriers: usize,
) -> Result<f64> {
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::Domain(format!(
            "doubly regular mean must be positive, got {mean}"
        )));
    }
    if !(power.is_finite() && power > 0.0) || users == 0 || subcarriers == 0 {
        return Err(Error::Domain(
            "doubly regular solution needs K, P, L > 0".into(),
        ));
    }
    let load = users as f64 * power / subcarriers as f64;
    Ok(2.0 * load / ((1.0 + 4.0 * load * mean).sqrt() + 1.0))
}

/// Closed-form quantities along a doubly regular path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublyRegularRates {
    pub t: f64,
    pub mean: f64,
    pub mean_d1: f64,
    pub mean_d2: f64,
    pub rate: f64,
    pub derivative: f64,
    pub curvature: f64,
}

/// Rate, derivative and curvature of the deterministic equivalent from the
/// scalar closed form. Refuses profiles that are not doubly regular.
pub fn doubly_regular_rates(
    cfg: &SystemConfig,
    v: &VarianceProfile,
    noise: &QuantizationNoise,
    tau: f64,
) -> Result<DoublyRegularRates> {
    if !(tau > 0.0) || !(cfg.power > 0.0) {
        return Err(Error::Domain("curvature needs P > 0 and tau > 0".into()));
    }
    let d = effective_derivatives(cfg, v, noise, tau)?;
    let (rows, cols) = v.shape();
    let eff = VarianceProfile::new(ProfileKind::Effective, rows, cols, d.effective)?;
    let mean = check_regularity(&eff).mean.ok_or(Error::NotDoublyRegular)?;
    let count = (rows * cols) as f64;
    let mean_d1 = d.first.iter().sum::<f64>() / count;
    let mean_d2 = d.second.iter().sum::<f64>() / count;

    let t = doubly_regular_solution(mean, cfg.users, cfg.power, cfg.subcarriers)?;
    let load = cfg.load();
    // Implicit differentiation of m t^2 + t - K P / L = 0.
    let t_d1 = -t * t / (2.0 * mean * t + 1.0) * mean_d1;
    let x = t * mean;
    let rate = x.ln_1p() - (t / load).ln() - x / (1.0 + x);
    let derivative = t * mean_d1 / (1.0 + x);
    let curvature =
        (t_d1 * mean_d1 + t * mean_d2 * (1.0 + x) - (t * mean_d1).powi(2)) / (1.0 + x).powi(2);
    Ok(DoublyRegularRates {
        t,
        mean,
        mean_d1,
        mean_d2,
        rate,
        derivative,
        curvature,
    })
}

/// Second derivative of the deterministic rate on a doubly regular path.
pub fn doubly_regular_curvature(
    cfg: &SystemConfig,
    v: &VarianceProfile,
    noise: &QuantizationNoise,
    tau: f64,
) -> Result<f64> {
    doubly_regular_rates(cfg, v, noise, tau).map(|r| r.curvature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system_model::{PathLossMatrix, UNLIMITED_BACKHAUL};
    use approx::assert_relative_eq;

    fn constant(n: usize, k: usize, v: f64) -> VarianceProfile {
        VarianceProfile::constant(ProfileKind::Effective, n, k, v).unwrap()
    }

    fn tight() -> SolverOptions {
        SolverOptions {
            tolerance: 1e-14,
            max_iter: 100_000,
        }
    }

    #[test]
    fn zero_profile_gives_load() {
        let eff = constant(4, 2, 0.0);
        let sol = solve_fixed_point(&eff, 2, 3.0, 1, &SolverOptions::default()).unwrap();
        assert!(sol.t.iter().all(|&t| t == 6.0));
        assert_eq!(rate_det(&eff, &sol).unwrap(), 0.0);
    }

    #[test]
    fn scalar_quadratic_root() {
        // t^2 + t - 1 = 0
        let eff = constant(1, 1, 1.0);
        let sol = solve_fixed_point(&eff, 1, 1.0, 1, &tight()).unwrap();
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        assert_relative_eq!(sol.t[0], golden, max_relative = 1e-12);
        let r = rate_det(&eff, &sol).unwrap();
        let expected = (1.0 + golden).ln() - golden.ln() - golden / (1.0 + golden);
        assert_relative_eq!(r, expected, max_relative = 1e-12);
        assert_relative_eq!(r, 0.5804576389, epsilon = 1e-9);
    }

    #[test]
    fn constant_profile_matches_closed_form() {
        for (n, load) in [(1usize, 8.0), (3, 8.0), (5, 0.3), (4, 250.0)] {
            let eff = constant(n, n, 1.0);
            let power = load / n as f64;
            let sol = solve_fixed_point(&eff, n, power, 1, &tight()).unwrap();
            let t = doubly_regular_solution(1.0, n, power, 1).unwrap();
            for ti in &sol.t {
                assert_relative_eq!(*ti, t, max_relative = 1e-10);
            }
        }
        // load 8, mean 1: root of t^2 + t - 8 = 0
        let t = doubly_regular_solution(1.0, 2, 4.0, 1).unwrap();
        assert_relative_eq!(t, (33f64.sqrt() - 1.0) / 2.0, max_relative = 1e-14);
        // load 2 makes t = 1 exactly, with rate log 4 - 1/2
        let eff = constant(2, 2, 1.0);
        let sol = solve_fixed_point(&eff, 2, 1.0, 1, &tight()).unwrap();
        assert_relative_eq!(sol.t[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(
            rate_det(&eff, &sol).unwrap(),
            4f64.ln() - 0.5,
            max_relative = 1e-12
        );
    }

    #[test]
    fn closed_form_small_mean_limit() {
        // sqrt(1 + x) ~ 1 + x/2 gives t -> K P / L
        let t = doubly_regular_solution(1e-12, 3, 2.0, 1).unwrap();
        assert_relative_eq!(t, 6.0, max_relative = 1e-9);
        assert!(doubly_regular_solution(0.0, 3, 2.0, 1).is_err());
        assert!(doubly_regular_solution(-1.0, 3, 2.0, 1).is_err());
    }

    #[test]
    fn solver_errors() {
        let eff = constant(2, 2, 1.0);
        assert!(matches!(
            solve_fixed_point(&eff, 2, 0.0, 1, &SolverOptions::default()),
            Err(Error::Domain(_))
        ));
        let opts = SolverOptions {
            tolerance: 1e-15,
            max_iter: 2,
        };
        assert!(matches!(
            solve_fixed_point(&eff, 2, 100.0, 1, &opts),
            Err(Error::NoConvergence { iterations: 2, .. })
        ));
        assert!(solve_fixed_point(&eff, 3, 1.0, 1, &SolverOptions::default()).is_err());
    }

    #[test]
    fn rate_refuses_unconverged_or_mismatched() {
        let eff = constant(2, 2, 1.0);
        let mut sol = solve_fixed_point(&eff, 2, 1.0, 1, &SolverOptions::default()).unwrap();
        assert!(rate_det(&constant(3, 2, 1.0), &sol).is_err());
        sol.residual = 1.0;
        assert!(matches!(
            rate_det(&eff, &sol),
            Err(Error::Unconverged { .. })
        ));
    }

    #[test]
    fn derivative_zero_when_profile_stationary() {
        let eff = constant(3, 2, 0.7);
        let sol = solve_fixed_point(&eff, 2, 1.0, 1, &SolverOptions::default()).unwrap();
        let zero = VarianceProfile::constant(ProfileKind::EffectiveDerivative, 3, 2, 0.0).unwrap();
        assert_eq!(rate_det_derivative(&eff, &zero, &sol).unwrap(), 0.0);
        let wrong = VarianceProfile::constant(ProfileKind::EffectiveDerivative, 2, 2, 0.0).unwrap();
        assert!(rate_det_derivative(&eff, &wrong, &sol).is_err());
    }

    #[test]
    fn scalar_derivative_closed_form() {
        let cfg = SystemConfig {
            base_stations: 1,
            antennas: 1,
            users: 1,
            subcarriers: 1,
            coherence: 100.0,
            power: 1.0,
            backhaul: UNLIMITED_BACKHAUL,
        };
        let s = Scenario::new(cfg, PathLossMatrix::from_rows(&[vec![1.0]]).unwrap()).unwrap();
        let e = evaluate(&s, 10.0, &tight()).unwrap();
        // vbar = 10/12, vbar' = 1/72; scalar fixed point vbar t^2 + t - 1 = 0
        let vbar: f64 = 10.0 / 12.0;
        let t = (-1.0 + (1.0 + 4.0 * vbar).sqrt()) / (2.0 * vbar);
        assert_relative_eq!(e.solution.t[0], t, max_relative = 1e-12);
        assert_relative_eq!(
            e.derivative,
            (1.0 / 72.0) * t / (1.0 + vbar * t),
            max_relative = 1e-12
        );
    }

    #[test]
    fn reference_derivative_against_finite_difference() {
        let s = Scenario::reference(0.0, 1.0);
        let opts = tight();
        let h = 1e-3;
        let e = evaluate(&s, 40.0, &opts).unwrap();
        let fd = (evaluate(&s, 40.0 + h, &opts).unwrap().rate
            - evaluate(&s, 40.0 - h, &opts).unwrap().rate)
            / (2.0 * h);
        assert_relative_eq!(e.derivative, fd, max_relative = 1e-6);
        assert!(e.derivative > 0.0);
    }

    #[test]
    fn regularity_detection() {
        let sq = constant(3, 3, 2.0);
        let c = check_regularity(&sq);
        assert!(c.is_doubly_regular);
        assert_relative_eq!(c.mean.unwrap(), 2.0);
        assert!(!check_regularity(&constant(4, 2, 1.0)).is_doubly_regular);
        let circ =
            VarianceProfile::new(ProfileKind::Effective, 2, 2, vec![1.0, 3.0, 3.0, 1.0]).unwrap();
        assert!(check_regularity(&circ).is_doubly_regular);
        let skew =
            VarianceProfile::new(ProfileKind::Effective, 2, 2, vec![1.0, 3.0, 1.0, 3.0]).unwrap();
        assert!(!check_regularity(&skew).is_doubly_regular);
    }

    #[test]
    fn curvature_refuses_irregular_profile() {
        let s = Scenario::reference(0.0, 1.0);
        assert!(matches!(
            doubly_regular_curvature(&s.config, &s.raw, &s.noise, 20.0),
            Err(Error::NotDoublyRegular)
        ));
    }

    #[test]
    fn circulant_curvature_and_closed_form_rate() {
        let a = PathLossMatrix::from_rows(&[
            vec![1.5, 0.2, 0.6],
            vec![0.6, 1.5, 0.2],
            vec![0.2, 0.6, 1.5],
        ])
        .unwrap();
        let cfg = SystemConfig {
            base_stations: 3,
            antennas: 1,
            users: 3,
            subcarriers: 1,
            coherence: 1000.0,
            power: 4.0,
            backhaul: 6.0,
        };
        let s = Scenario::new(cfg, a).unwrap();
        let opts = tight();
        for tau in [3.0, 20.0, 150.0] {
            let r = doubly_regular_rates(&s.config, &s.raw, &s.noise, tau).unwrap();
            let e = evaluate(&s, tau, &opts).unwrap();
            assert_relative_eq!(r.rate, e.rate, max_relative = 1e-10);
            assert_relative_eq!(r.derivative, e.derivative, max_relative = 1e-10);
            assert!(r.curvature < 0.0);
            let h = 1e-2;
            let fd = numerical_curvature(&s, tau, h, &opts).unwrap();
            assert_relative_eq!(r.curvature, fd, max_relative = 1e-4);
        }
        let far = doubly_regular_curvature(&s.config, &s.raw, &s.noise, 1e7).unwrap();
        assert!(far < 0.0 && far > -1e-15);
    }
}
