use num_complex::Complex64;
use uplink_train::det_equiv::{evaluate, SolverOptions};
use uplink_train::monte_carlo::{estimate_net_rate, sample_effective_channel, sample_stream};
use uplink_train::system_model::Scenario;

const N: usize = 100_000;

/// Sample moments of one channel entry: E[hhat conj(herr)], Var(hhat), Var(herr).
fn entry_moments(s: &Scenario, tau: f64, i: usize, j: usize) -> (Complex64, f64, f64, f64) {
    let (mut cross, mut est, mut err) = (Complex64::new(0.0, 0.0), 0.0, 0.0);
    let mut est_sq = 0.0;
    for n in 0..N {
        let mut rng = sample_stream(7, n as u64);
        let x = sample_effective_channel(s, tau, &mut rng).unwrap().sample;
        let a = x.estimate[(i, j)];
        let b = x.error[(i, j)];
        cross += a * b.conj();
        est += a.norm_sqr();
        est_sq += a.norm_sqr().powi(2);
        err += b.norm_sqr();
    }
    let n = N as f64;
    let est_mean = est / n;
    let est_se = ((est_sq / n - est_mean * est_mean) / n).sqrt();
    (cross / n, est_mean, est_se, err / n)
}

#[test]
fn estimate_and_error_are_uncorrelated_with_predicted_variances() {
    let s = Scenario::reference(0.0, 5.0);
    let tau = 10.0;
    let (est_var, err_var) = s.estimation(tau).unwrap();
    for (i, j) in [(0, 0), (3, 1), (5, 2)] {
        let (cross, est, est_se, err) = entry_moments(&s, tau, i, j);
        let vhat = est_var.get(i, j);
        let verr = err_var.get(i, j);
        // |hhat|^2 |herr|^2 has mean vhat*verr, so the cross moment's se is sqrt(vhat verr / N)
        let cross_se = (vhat * verr / N as f64).sqrt();
        assert!(
            cross.norm() <= 4.0 * cross_se,
            "cross {cross} se {cross_se}"
        );
        assert!((est - vhat).abs() <= 4.0 * est_se, "{est} vs {vhat}");
        assert!(
            (err - verr).abs() <= 4.0 * verr / (N as f64).sqrt(),
            "{err} vs {verr}"
        );
    }
}

#[test]
fn error_vanishes_with_long_training() {
    let s = Scenario::reference(10.0, f64::INFINITY);
    let mut worst = 0.0f64;
    for n in 0..200 {
        let mut rng = sample_stream(3, n);
        let x = sample_effective_channel(&s, 1e8, &mut rng).unwrap().sample;
        worst = worst.max(x.error.iter().map(|e| e.norm_sqr()).fold(0.0, f64::max));
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn simulation_close_to_deterministic_equivalent() {
    let s = Scenario::reference(0.0, 10.0);
    let det = evaluate(&s, 40.0, &SolverOptions::default())
        .unwrap()
        .net_rate(1000.0);
    let mc = estimate_net_rate(&s, 40.0, 10_000, 11).unwrap();
    assert!((mc.mean - det).abs() <= 0.02 * det, "{} vs {det}", mc.mean);
}

#[test]
fn more_backhaul_more_rate() {
    let rates: Vec<f64> = [1.0, 5.0, 10.0]
        .iter()
        .map(|&c| {
            estimate_net_rate(&Scenario::reference(10.0, c), 40.0, 2_000, 5)
                .unwrap()
                .mean
        })
        .collect();
    assert!(rates[0] < rates[1] && rates[1] < rates[2], "{rates:?}");
}

#[test]
fn thread_count_does_not_change_results() {
    let s = Scenario::reference(5.0, 5.0);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_net_rate(&s, 25.0, 3_000, 42).unwrap())
    };
    assert_eq!(run(1), run(4));
}
