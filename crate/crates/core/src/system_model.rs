//! System parameters and the deterministic variance algebra.
//!
//! Everything here is a pure function of its inputs: path-loss matrix to raw
//! variance profile, raw profile to per-antenna quantization noise, and from
//! there to the MMSE estimate/error profiles, the effective (noise-whitened)
//! profile and its derivatives in the training length `tau`.
//!
//! `tau` is a continuous nonnegative real at this layer. Rates are in nats.

use crate::error::{Error, Result};

/// Backhaul capacity value meaning "no compression loss".
pub const UNLIMITED_BACKHAUL: f64 = f64::INFINITY;

/// Inverse path loss preset of the three-cell, three-user example network.
pub const REFERENCE_PATH_LOSS: [[f64; 3]; 3] = [
    [2.9775, 0.0385, 1.6055],
    [0.2512, 2.7826, 0.1759],
    [0.0615, 0.0492, 1.6376],
];

/// Scalar system parameters.
///
/// `backhaul` is in bits per channel use and may be [`UNLIMITED_BACKHAUL`].
/// `power` is the total (linear) transmit power per user, split uniformly over
/// the `subcarriers`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    pub base_stations: usize,
    pub antennas: usize,
    pub users: usize,
    pub subcarriers: usize,
    pub coherence: f64,
    pub power: f64,
    pub backhaul: f64,
}

impl SystemConfig {
    /// The three-cell setup with `M = 2`, `K = 3`, `T = 1000`, `L = 1`.
    pub fn reference(snr_db: f64, backhaul: f64) -> Self {
        let mut cfg = SystemConfig {
            base_stations: 3,
            antennas: 2,
            users: 3,
            subcarriers: 1,
            coherence: 1000.0,
            power: 1.0,
            backhaul,
        };
        cfg.set_snr_db(snr_db);
        cfg
    }

    /// Total number of receive antennas `N = B * M`.
    pub fn total_antennas(&self) -> usize {
        self.base_stations * self.antennas
    }

    /// Per-subcarrier SNR, `P / L` (linear).
    pub fn snr(&self) -> f64 {
        self.power / self.subcarriers as f64
    }

    /// Sets the power so that `P / L` equals the given SNR in dB.
    pub fn set_snr_db(&mut self, snr_db: f64) {
        self.power = self.subcarriers as f64 * 10f64.powf(snr_db / 10.0);
    }

    /// `K P / L`, the inverse of the real evaluation point of the fixed point.
    pub fn load(&self) -> f64 {
        self.users as f64 * self.snr()
    }

    pub fn validate(&self) -> Result<()> {
        for (field, value) in [
            ("base_stations", self.base_stations),
            ("antennas", self.antennas),
            ("users", self.users),
            ("subcarriers", self.subcarriers),
        ] {
            if value == 0 {
                return Err(Error::validation(field, "must be at least 1"));
            }
        }
        if !(self.coherence.is_finite() && self.coherence > 0.0) {
            return Err(Error::validation(
                "coherence",
                "must be positive and finite",
            ));
        }
        if self.coherence < self.users as f64 {
            return Err(Error::validation(
                "coherence",
                format!(
                    "T = {} is shorter than the K = {} orthogonal pilots",
                    self.coherence, self.users
                ),
            ));
        }
        if !(self.power.is_finite() && self.power >= 0.0) {
            return Err(Error::validation("power", "must be nonnegative and finite"));
        }
        if self.backhaul.is_nan() || self.backhaul <= 0.0 {
            return Err(Error::Domain(format!(
                "backhaul capacity must be positive, got {}",
                self.backhaul
            )));
        }
        Ok(())
    }
}

/// Inverse path losses `a[b][k]` between base station `b` and user `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLossMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl PathLossMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 {
            return Err(Error::validation("path_loss", "matrix is empty"));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (b, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::validation(
                    "path_loss",
                    format!("row {} has {} entries, expected {}", b, row.len(), cols),
                ));
            }
            for (k, &a) in row.iter().enumerate() {
                if !(a.is_finite() && a > 0.0) {
                    return Err(Error::validation(
                        "path_loss",
                        format!("entry ({b}, {k}) = {a} is not strictly positive and finite"),
                    ));
                }
            }
            data.extend_from_slice(row);
        }
        Ok(PathLossMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn reference() -> Self {
        let rows: Vec<Vec<f64>> = REFERENCE_PATH_LOSS.iter().map(|r| r.to_vec()).collect();
        Self::from_rows(&rows).expect("preset is valid")
    }

    /// Builds `a = d^(-exponent)` from normalized distances.
    pub fn from_distances(distances: &[Vec<f64>], exponent: f64) -> Result<Self> {
        let rows: Vec<Vec<f64>> = distances
            .iter()
            .map(|r| r.iter().map(|d| d.powf(-exponent)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    /// Block replication `J_s (x) A`: `s` times as many cells and users, every
    /// replica of a user seeing every replica of a cell with the original loss.
    pub fn replicate(&self, s: usize) -> Result<Self> {
        if s == 0 {
            return Err(Error::validation("scale", "must be at least 1"));
        }
        let rows: Vec<Vec<f64>> = (0..self.rows * s)
            .map(|b| {
                (0..self.cols * s)
                    .map(|k| self.get(b % self.rows, k % self.cols))
                    .collect()
            })
            .collect();
        Self::from_rows(&rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, b: usize, k: usize) -> f64 {
        self.data[b * self.cols + k]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }
}

/// Which quantity a [`VarianceProfile`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Raw,
    Estimated,
    Error,
    Effective,
    EffectiveDerivative,
}

/// `N x K` matrix of per-link variances, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceProfile {
    kind: ProfileKind,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl VarianceProfile {
    pub fn new(kind: ProfileKind, rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::validation("profile", "must have at least one entry"));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape {
                expected: (rows, cols),
                got: (data.len() / cols.max(1), cols),
            });
        }
        if let Some(bad) = data.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::validation(
                "profile",
                format!("entry {} = {} is negative or not finite", bad, data[bad]),
            ));
        }
        Ok(VarianceProfile {
            kind,
            rows,
            cols,
            data,
        })
    }

    pub fn constant(kind: ProfileKind, rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::new(kind, rows, cols, vec![value; rows * cols])
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.data
            .chunks(self.cols)
            .map(|r| r.iter().sum())
            .collect()
    }
}

/// Per-antenna quantization noise variances `sigma^2_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationNoise(pub Vec<f64>);

impl QuantizationNoise {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Diagonal of the total noise covariance `K_z(tau)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovarianceDiag(pub Vec<f64>);

impl NoiseCovarianceDiag {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `V = A (x) 1_M`: antenna `i` inherits row `i / M` of the path-loss matrix.
pub fn build_variance_profile(a: &PathLossMatrix, antennas: usize) -> Result<VarianceProfile> {
    if antennas == 0 {
        return Err(Error::validation("antennas", "must be at least 1"));
    }
    let mut data = Vec::with_capacity(a.rows * antennas * a.cols);
    for b in 0..a.rows {
        let row = &a.data[b * a.cols..(b + 1) * a.cols];
        for _ in 0..antennas {
            data.extend_from_slice(row);
        }
    }
    VarianceProfile::new(ProfileKind::Raw, a.rows * antennas, a.cols, data)
}

/// Quantization noise of the Gaussian test-channel compressor.
///
/// Each antenna spends `C / (M L)` bits per received symbol, giving
/// `sigma^2_i = (1 + (P/L) sum_j v_ij) / (2^(C/(M L)) - 1)`.
pub fn quantization_noise(cfg: &SystemConfig, v: &VarianceProfile) -> Result<QuantizationNoise> {
    if cfg.backhaul.is_nan() || cfg.backhaul <= 0.0 {
        return Err(Error::Domain(format!(
            "backhaul capacity must be positive, got {}",
            cfg.backhaul
        )));
    }
    if cfg.backhaul.is_infinite() {
        return Ok(QuantizationNoise(vec![0.0; v.rows]));
    }
    let bits_per_symbol = cfg.backhaul / (cfg.antennas * cfg.subcarriers) as f64;
    let denom = (bits_per_symbol * std::f64::consts::LN_2).exp_m1();
    let snr = cfg.snr();
    Ok(QuantizationNoise(
        v.row_sums()
            .into_iter()
            .map(|s| (1.0 + snr * s) / denom)
            .collect(),
    ))
}

fn check_inputs(v: &VarianceProfile, noise: &QuantizationNoise, tau: f64) -> Result<()> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::Domain(format!(
            "training length must be nonnegative, got {tau}"
        )));
    }
    if noise.0.len() != v.rows {
        return Err(Error::Shape {
            expected: (v.rows, 1),
            got: (noise.0.len(), 1),
        });
    }
    Ok(())
}

/// MMSE estimate and error variance profiles after `tau` pilot symbols.
pub fn estimation_variances(
    cfg: &SystemConfig,
    v: &VarianceProfile,
    noise: &QuantizationNoise,
    tau: f64,
) -> Result<(VarianceProfile, VarianceProfile)> {
    check_inputs(v, noise, tau)?;
    let snr = cfg.snr();
    let mut est = Vec::with_capacity(v.data.len());
    let mut err = Vec::with_capacity(v.data.len());
    for i in 0..v.rows {
        let noise_var = 1.0 + noise.0[i];
        for &vij in v.row(i) {
            let denom = tau * snr * vij + noise_var;
            est.push(tau * snr * vij * vij / denom);
            err.push(vij * noise_var / denom);
        }
    }
    Ok((
        VarianceProfile::new(ProfileKind::Estimated, v.rows, v.cols, est)?,
        VarianceProfile::new(ProfileKind::Error, v.rows, v.cols, err)?,
    ))
}

/// Effective profile `K_z^-1 V_hat(tau)` and the diagonal of `K_z(tau)`.
pub fn effective_profile(
    cfg: &SystemConfig,
    v: &VarianceProfile,
    noise: &QuantizationNoise,
    tau: f64,
) -> Result<(VarianceProfile, NoiseCovarianceDiag)> {
    let (est, err) = estimation_variances(cfg, v, noise, tau)?;
    let snr = cfg.snr();
    let kz: Vec<f64> = err
        .row_sums()
        .into_iter()
        .zip(&noise.0)
        .map(|(s, n)| 1.0 + n + snr * s)
        .collect();
    let data = est
        .data
        .chunks(v.cols)
        .zip(&kz)
        .flat_map(|(row, k)| row.iter().map(move |x| x / k))
        .collect();
    Ok((
        VarianceProfile::new(ProfileKind::Effective, v.rows, v.cols, data)?,
        NoiseCovarianceDiag(kz),
    ))
}

/// Per-entry derivatives of the effective profile, first and second order.
pub(crate) struct EffectiveDerivatives {
    pub effective: Vec<f64>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

pub(crate) fn effective_derivatives(
    cfg: &SystemConfig,
    v: &VarianceProfile,
    noise: &QuantizationNoise,
    tau: f64,
) -> Result<EffectiveDerivatives> {
    check_inputs(v, noise, tau)?;
    let snr = cfg.snr();
    let n = v.data.len();
    let mut out = EffectiveDerivatives {
        effective: Vec::with_capacity(n),
        first: Vec::with_capacity(n),
        second: Vec::with_capacity(n),
    };
    let mut est = vec![0.0; v.cols];
    let mut d1 = vec![0.0; v.cols];
    let mut d2 = vec![0.0; v.cols];
    for i in 0..v.rows {
        let noise_var = 1.0 + noise.0[i];
        let mut err_sum = 0.0;
        for (j, &vij) in v.row(i).iter().enumerate() {
            let denom = tau * snr * vij + noise_var;
            est[j] = tau * snr * vij * vij / denom;
            err_sum += vij * noise_var / denom;
            d1[j] = snr * vij * vij * noise_var / (denom * denom);
            d2[j] = -2.0 * snr * vij * d1[j] / denom;
        }
        // K_z and its derivatives; the error profile moves opposite to the estimate.
        let k = noise_var + snr * err_sum;
        let k1 = -snr * d1.iter().sum::<f64>();
        let k2 = -snr * d2.iter().sum::<f64>();
        for j in 0..v.cols {
            let eff = est[j] / k;
            let eff1 = d1[j] / k - est[j] * k1 / (k * k);
            let eff2 = d2[j] / k - est[j] * k2 / (k * k) - 2.0 * k1 * eff1 / k;
            out.effective.push(eff);
            out.first.push(eff1);
            out.second.push(eff2);
        }
    }
    Ok(out)
}

/// `d V_bar / d tau`, entrywise.
pub fn effective_profile_derivative(
    cfg: &SystemConfig,
    v: &VarianceProfile,
    noise: &QuantizationNoise,
    tau: f64,
) -> Result<VarianceProfile> {
    let d = effective_derivatives(cfg, v, noise, tau)?;
    // Rounding can leave -0.0-ish values when P = 0 or tau is huge.
    let first = d.first.into_iter().map(|x| x.max(0.0)).collect();
    VarianceProfile::new(ProfileKind::EffectiveDerivative, v.rows, v.cols, first)
}

/// A validated configuration together with its raw profile and quantization noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: SystemConfig,
    pub path_loss: PathLossMatrix,
    pub raw: VarianceProfile,
    pub noise: QuantizationNoise,
}

impl Scenario {
    pub fn new(config: SystemConfig, path_loss: PathLossMatrix) -> Result<Self> {
        config.validate()?;
        if path_loss.rows() != config.base_stations || path_loss.cols() != config.users {
            return Err(Error::Shape {
                expected: (config.base_stations, config.users),
                got: (path_loss.rows(), path_loss.cols()),
            });
        }
        let raw = build_variance_profile(&path_loss, config.antennas)?;
        let noise = quantization_noise(&config, &raw)?;
        Ok(Scenario {
            config,
            path_loss,
            raw,
            noise,
        })
    }

    /// Reference three-cell network at the given SNR (dB) and backhaul (bits/channel use).
    pub fn reference(snr_db: f64, backhaul: f64) -> Self {
        Self::new(
            SystemConfig::reference(snr_db, backhaul),
            PathLossMatrix::reference(),
        )
        .expect("preset is valid")
    }

    /// Same network with `s` times as many cells, users and subcarriers, at the
    /// same SNR and the same backhaul bits per received symbol.
    pub fn scaled(&self, s: usize) -> Result<Self> {
        let mut cfg = self.config;
        let snr = cfg.snr();
        cfg.base_stations *= s;
        cfg.users *= s;
        cfg.subcarriers *= s;
        cfg.power = snr * cfg.subcarriers as f64;
        cfg.backhaul *= s as f64;
        let scaled = Self::new(cfg, self.path_loss.replicate(s)?)?;
        if scaled.noise.0.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!(
                "scaling by {s} produced a non-finite noise profile"
            )));
        }
        Ok(scaled)
    }

    pub fn estimation(&self, tau: f64) -> Result<(VarianceProfile, VarianceProfile)> {
        estimation_variances(&self.config, &self.raw, &self.noise, tau)
    }

    pub fn effective(&self, tau: f64) -> Result<(VarianceProfile, NoiseCovarianceDiag)> {
        effective_profile(&self.config, &self.raw, &self.noise, tau)
    }

    pub fn effective_derivative(&self, tau: f64) -> Result<VarianceProfile> {
        effective_profile_derivative(&self.config, &self.raw, &self.noise, tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_scalar(backhaul: f64, snr: f64) -> (SystemConfig, VarianceProfile) {
        let cfg = SystemConfig {
            base_stations: 1,
            antennas: 1,
            users: 1,
            subcarriers: 1,
            coherence: 100.0,
            power: snr,
            backhaul,
        };
        let v =
            build_variance_profile(&PathLossMatrix::from_rows(&[vec![1.0]]).unwrap(), 1).unwrap();
        (cfg, v)
    }

    #[test]
    fn kronecker_profile() {
        let v =
            build_variance_profile(&PathLossMatrix::from_rows(&[vec![1.0]]).unwrap(), 1).unwrap();
        assert_eq!(v.as_slice(), &[1.0]);

        let v = build_variance_profile(&PathLossMatrix::from_rows(&[vec![2.0, 3.0]]).unwrap(), 2)
            .unwrap();
        assert_eq!(v.shape(), (2, 2));
        assert_eq!(v.as_slice(), &[2.0, 3.0, 2.0, 3.0]);
    }

    #[test]
    fn reference_profile_rows() {
        let v = build_variance_profile(&PathLossMatrix::reference(), 2).unwrap();
        assert_eq!(v.shape(), (6, 3));
        for i in 0..6 {
            assert_eq!(v.row(i), &REFERENCE_PATH_LOSS[i / 2]);
        }
    }

    #[test]
    fn rejects_nonpositive_path_loss() {
        assert!(PathLossMatrix::from_rows(&[vec![1.0, 0.0]]).is_err());
        assert!(PathLossMatrix::from_rows(&[vec![1.0, -2.0]]).is_err());
        assert!(PathLossMatrix::from_rows(&[vec![f64::NAN]]).is_err());
        assert!(PathLossMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(PathLossMatrix::from_rows(&[]).is_err());
    }

    #[test]
    fn replicate_tiles_blocks() {
        let a = PathLossMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let r = a.replicate(2).unwrap();
        assert_eq!(r.rows(), 4);
        assert_eq!(r.to_rows()[3], vec![3.0, 4.0, 3.0, 4.0]);
    }

    #[test]
    fn quantization_noise_limits() {
        let (cfg, v) = unit_scalar(UNLIMITED_BACKHAUL, 5.0);
        assert_eq!(quantization_noise(&cfg, &v).unwrap().0, vec![0.0]);

        let (cfg, v) = unit_scalar(1.0, 0.0);
        assert_relative_eq!(
            quantization_noise(&cfg, &v).unwrap().0[0],
            1.0,
            epsilon = 1e-15
        );

        let (cfg, v) = unit_scalar(0.0, 1.0);
        assert!(matches!(
            quantization_noise(&cfg, &v),
            Err(Error::Domain(_))
        ));
        let (cfg, v) = unit_scalar(-1.0, 1.0);
        assert!(quantization_noise(&cfg, &v).is_err());
    }

    #[test]
    fn quantization_noise_reference_row() {
        let cfg = SystemConfig {
            power: 10.0,
            backhaul: 20.0,
            ..SystemConfig::reference(0.0, 20.0)
        };
        let v = build_variance_profile(&PathLossMatrix::reference(), 2).unwrap();
        let s = quantization_noise(&cfg, &v).unwrap();
        // Independent scalar evaluation: row sum 4.6215, 2^(20/2) - 1 = 1023.
        let expected = (1.0 + 10.0 * 4.6215) / 1023.0;
        assert_relative_eq!(s.0[0], expected, max_relative = 1e-12);
        assert_relative_eq!(s.0[0], 0.046154, max_relative = 1e-4);
        // Identical within each base station.
        for b in 0..3 {
            assert_eq!(s.0[2 * b], s.0[2 * b + 1]);
        }
    }

    #[test]
    fn estimation_scalar_case() {
        let (cfg, v) = unit_scalar(UNLIMITED_BACKHAUL, 1.0);
        let noise = quantization_noise(&cfg, &v).unwrap();
        let (est, err) = estimation_variances(&cfg, &v, &noise, 10.0).unwrap();
        assert_relative_eq!(est.get(0, 0), 10.0 / 11.0, max_relative = 1e-15);
        assert_relative_eq!(err.get(0, 0), 1.0 / 11.0, max_relative = 1e-15);

        let (est, err) = estimation_variances(&cfg, &v, &noise, 0.0).unwrap();
        assert_eq!(est.get(0, 0), 0.0);
        assert_eq!(err.get(0, 0), 1.0);

        assert!(estimation_variances(&cfg, &v, &noise, -1.0).is_err());
    }

    #[test]
    fn effective_scalar_case() {
        let (cfg, v) = unit_scalar(UNLIMITED_BACKHAUL, 1.0);
        let noise = quantization_noise(&cfg, &v).unwrap();
        let (eff, kz) = effective_profile(&cfg, &v, &noise, 10.0).unwrap();
        assert_relative_eq!(eff.get(0, 0), 10.0 / 12.0, max_relative = 1e-14);
        assert_relative_eq!(kz.0[0], 12.0 / 11.0, max_relative = 1e-14);

        let (eff, kz) = effective_profile(&cfg, &v, &noise, 0.0).unwrap();
        assert_eq!(eff.get(0, 0), 0.0);
        assert_eq!(kz.0[0], 2.0);
    }

    #[test]
    fn effective_large_tau_limit() {
        let s = Scenario::reference(10.0, 5.0);
        let (eff, _) = s.effective(1e12).unwrap();
        for i in 0..6 {
            for j in 0..3 {
                let lim = s.raw.get(i, j) / (1.0 + s.noise.0[i]);
                assert_relative_eq!(eff.get(i, j), lim, max_relative = 1e-9);
                assert!(eff.get(i, j) < s.raw.get(i, j));
            }
        }
    }

    #[test]
    fn derivative_scalar_case() {
        let (cfg, v) = unit_scalar(UNLIMITED_BACKHAUL, 1.0);
        let noise = quantization_noise(&cfg, &v).unwrap();
        let d = effective_profile_derivative(&cfg, &v, &noise, 10.0).unwrap();
        // d/dtau [tau / (tau + 2)] = 2 / (tau + 2)^2
        assert_relative_eq!(d.get(0, 0), 1.0 / 72.0, max_relative = 1e-14);

        let h = 1e-4;
        let fd = (effective_profile(&cfg, &v, &noise, 10.0 + h)
            .unwrap()
            .0
            .get(0, 0)
            - effective_profile(&cfg, &v, &noise, 10.0 - h)
                .unwrap()
                .0
                .get(0, 0))
            / (2.0 * h);
        assert_relative_eq!(d.get(0, 0), fd, max_relative = 1e-7);
    }

    #[test]
    fn derivative_zero_power_and_large_tau() {
        let (cfg, v) = unit_scalar(3.0, 0.0);
        let noise = quantization_noise(&cfg, &v).unwrap();
        let d = effective_profile_derivative(&cfg, &v, &noise, 5.0).unwrap();
        assert_eq!(d.get(0, 0), 0.0);

        let s = Scenario::reference(0.0, 1.0);
        let d = s.effective_derivative(1e9).unwrap();
        assert!(d.max() < 1e-15);
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        let s = Scenario::reference(0.0, 5.0);
        let tau = 30.0;
        let h = 1e-3;
        let d = effective_derivatives(&s.config, &s.raw, &s.noise, tau).unwrap();
        let up = s.effective_derivative(tau + h).unwrap();
        let dn = s.effective_derivative(tau - h).unwrap();
        for idx in 0..d.second.len() {
            let fd = (up.as_slice()[idx] - dn.as_slice()[idx]) / (2.0 * h);
            assert_relative_eq!(d.second[idx], fd, max_relative = 1e-5);
            assert!(d.second[idx] < 0.0);
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = SystemConfig::reference(0.0, 1.0);
        assert!(cfg.validate().is_ok());
        cfg.coherence = 2.0;
        assert!(cfg.validate().is_err());
        let cfg = SystemConfig {
            users: 0,
            ..SystemConfig::reference(0.0, 1.0)
        };
        assert!(cfg.validate().is_err());
        let cfg = SystemConfig::reference(0.0, f64::NAN);
        assert!(cfg.validate().is_err());
        assert!(SystemConfig::reference(0.0, UNLIMITED_BACKHAUL)
            .validate()
            .is_ok());
    }

    #[test]
    fn snr_definition() {
        let cfg = SystemConfig::reference(10.0, 1.0);
        assert_relative_eq!(cfg.snr(), 10.0, max_relative = 1e-15);
        assert_eq!(cfg.total_antennas(), 6);
        assert_relative_eq!(cfg.load(), 30.0, max_relative = 1e-15);
    }
}
