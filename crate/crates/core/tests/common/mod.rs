#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uplink_train::system_model::{PathLossMatrix, Scenario, SystemConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small random network: up to 4 cells, 3 antennas, 4 users, 2 subcarriers.
pub fn random_scenario(rng: &mut impl Rng) -> Scenario {
    let b = rng.random_range(1..=4);
    let k = rng.random_range(1..=4);
    let rows: Vec<Vec<f64>> = (0..b)
        .map(|_| (0..k).map(|_| rng.random_range(0.02..2.0)).collect())
        .collect();
    let backhaul = if rng.random_bool(0.2) {
        f64::INFINITY
    } else {
        rng.random_range(0.5..30.0)
    };
    let mut cfg = SystemConfig {
        base_stations: b,
        antennas: rng.random_range(1..=3),
        users: k,
        subcarriers: rng.random_range(1..=2),
        coherence: 1000.0,
        power: 0.0,
        backhaul,
    };
    cfg.set_snr_db(rng.random_range(-10.0..25.0));
    Scenario::new(cfg, PathLossMatrix::from_rows(&rows).unwrap()).unwrap()
}

/// Network with a circulant path-loss matrix and one antenna per cell, whose
/// effective profile is square with equal row and column sums.
pub fn random_circulant(rng: &mut impl Rng) -> Scenario {
    let n = rng.random_range(1..=5);
    let first: Vec<f64> = (0..n).map(|_| rng.random_range(0.02..2.0)).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| first[(j + n - i) % n]).collect())
        .collect();
    let backhaul = if rng.random_bool(0.2) {
        f64::INFINITY
    } else {
        rng.random_range(0.5..30.0)
    };
    let mut cfg = SystemConfig {
        base_stations: n,
        antennas: 1,
        users: n,
        subcarriers: rng.random_range(1..=2),
        coherence: 1000.0,
        power: 0.0,
        backhaul,
    };
    cfg.set_snr_db(rng.random_range(-10.0..25.0));
    Scenario::new(cfg, PathLossMatrix::from_rows(&rows).unwrap()).unwrap()
}

/// `e * E1(1)` from the convergent series of the exponential integral.
pub fn e_times_e1_at_one() -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let mut sum = 0.0;
    let mut factorial = 1.0;
    for k in 1..30 {
        factorial *= k as f64;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign / (k as f64 * factorial);
    }
    std::f64::consts::E * (-EULER_GAMMA + sum)
}
