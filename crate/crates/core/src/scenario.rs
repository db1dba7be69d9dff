//! Scenario constants, delay-pattern algebra and identifiability checks.
//!
//! A scenario bundles the receiver constants (Nyquist rate, element spacing,
//! delay unit), the multi-coset delay pattern, the sampling-rate reduction
//! factor and the emitter list. Everything downstream (synthesis, covariance,
//! estimation) is a pure function of a validated `Scenario`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const C_LIGHT: f64 = 2.997_924_58e8;

/// Default number of points in the frequency scan grid.
pub const FREQ_GRID_POINTS: usize = 4096;
/// Default number of points in the DOA scan grid (0.25 degree step).
pub const DOA_GRID_POINTS: usize = 721;

/// Which estimator a check or run targets. `Etm` routes through the virtual
/// time-delay manifold and supports up to Q-1 sources; `Plain` is capped at
/// M-1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    Plain,
    Etm,
}

impl std::fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EstimatorMode::Plain => write!(f, "plain"),
            EstimatorMode::Etm => write!(f, "etm"),
        }
    }
}

/// Receiver-side constants. With the defaults (`tau = T`,
/// `d = c/(2 f_nyq)`) the spatial phase reduces to
/// `phi = pi (f/f_nyq) sin(theta)`, unambiguous over the whole band.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayConstants {
    /// Nyquist rate of the monitored band, Hz.
    pub f_nyq_hz: f64,
    /// Minimal delay unit of the coset branches, seconds.
    pub tau_s: f64,
    /// Element spacing, meters.
    pub d_m: f64,
    /// Propagation speed, m/s.
    pub c_light_m_per_s: f64,
}

impl ArrayConstants {
    /// Constants with default delay unit (`tau = T`) and half-wavelength
    /// spacing at the Nyquist frequency (`d = c/(2 f_nyq)`).
    pub fn new(f_nyq_hz: f64) -> Result<Self> {
        Self::with(f_nyq_hz, None, None, None)
    }

    pub fn with(
        f_nyq_hz: f64,
        tau_s: Option<f64>,
        d_m: Option<f64>,
        c_light_m_per_s: Option<f64>,
    ) -> Result<Self> {
        // NaN fails these positivity checks too
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(f_nyq_hz) {
            return Err(Error::InvalidScenario("f_nyq must be positive".into()));
        }
        let c = c_light_m_per_s.unwrap_or(C_LIGHT);
        let tau = tau_s.unwrap_or(1.0 / f_nyq_hz);
        let d = d_m.unwrap_or(c / (2.0 * f_nyq_hz));
        if !positive(tau) || !positive(d) || !positive(c) {
            return Err(Error::InvalidScenario(
                "tau, d and c must be positive".into(),
            ));
        }
        Ok(Self {
            f_nyq_hz,
            tau_s: tau,
            d_m: d,
            c_light_m_per_s: c,
        })
    }

    /// Nyquist sampling interval `T = 1/f_nyq`, seconds.
    pub fn nyquist_interval_s(&self) -> f64 {
        1.0 / self.f_nyq_hz
    }

    /// Unit phase of the delay branches, `omega = 2 pi f tau mod 2 pi`.
    pub fn omega(&self, f_hz: f64) -> f64 {
        (TAU * f_hz * self.tau_s).rem_euclid(TAU)
    }

    /// Spatial phase between the two elements,
    /// `phi = 2 pi d f sin(theta) / c`.
    pub fn phi(&self, f_hz: f64, theta_deg: f64) -> f64 {
        TAU * self.d_m * f_hz * theta_deg.to_radians().sin() / self.c_light_m_per_s
    }

    /// Upper edge of the unambiguous frequency scan range, `1/tau`.
    pub fn scan_limit_hz(&self) -> f64 {
        1.0 / self.tau_s
    }
}

/// Integer delay coefficients of the M coset branches, `c_1 = 0 < ... < c_M`.
/// Plays the same role as sensor positions in a sparse array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayPattern {
    coeffs: Vec<u32>,
}

impl DelayPattern {
    pub fn new(coeffs: Vec<u32>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::PatternTooShort);
        }
        if coeffs[0] != 0 {
            return Err(Error::FirstNotZero);
        }
        if coeffs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::NotAscending);
        }
        Ok(Self { coeffs })
    }

    /// Built-in minimum-redundancy patterns for M in 2..=6. These all have a
    /// hole-free difference coarray, hence the largest Q for their M.
    pub fn mra(m: usize) -> Option<Self> {
        let coeffs: &[u32] = match m {
            2 => &[0, 1],
            3 => &[0, 1, 3],
            4 => &[0, 1, 4, 6],
            5 => &[0, 1, 4, 7, 9],
            6 => &[0, 1, 6, 9, 11, 13],
            _ => return None,
        };
        Some(Self {
            coeffs: coeffs.to_vec(),
        })
    }

    pub fn coeffs(&self) -> &[u32] {
        &self.coeffs
    }

    /// Number of branches M.
    pub fn m(&self) -> usize {
        self.coeffs.len()
    }

    /// Largest coefficient `c_M`.
    pub fn max_coeff(&self) -> u32 {
        *self.coeffs.last().unwrap()
    }

    /// Virtual aperture `Q = c_M + 1`, defined only when the coarray is
    /// contiguous.
    pub fn q(&self) -> Result<u32> {
        validate_pattern(self)
    }
}

/// All pairwise differences `c_i - c_j` with multiplicities. The total count
/// over all lags is always M^2.
pub fn difference_coarray(pattern: &DelayPattern) -> BTreeMap<i64, usize> {
    let mut lags = BTreeMap::new();
    for &ci in pattern.coeffs() {
        for &cj in pattern.coeffs() {
            *lags.entry(ci as i64 - cj as i64).or_insert(0) += 1;
        }
    }
    lags
}

/// Returns `Q = c_M + 1` iff every lag in `[-c_M, c_M]` occurs in the
/// difference coarray; the virtual manifold expansion requires this.
pub fn validate_pattern(pattern: &DelayPattern) -> Result<u32> {
    if pattern.coeffs.len() < 2 {
        return Err(Error::PatternTooShort);
    }
    if pattern.coeffs[0] != 0 {
        return Err(Error::FirstNotZero);
    }
    if pattern.coeffs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::NotAscending);
    }
    let c_max = pattern.max_coeff() as i64;
    let lags = difference_coarray(pattern);
    // the coarray is symmetric (all ordered pairs), so positive lags suffice
    for lag in 1..=c_max {
        if !lags.contains_key(&lag) {
            return Err(Error::NonContiguousCoarray { missing_lag: lag });
        }
    }
    Ok(c_max as u32 + 1)
}

/// Baseband waveform family of an emitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    ComplexSinusoid,
    Qpsk,
    BandlimitedNoise,
}

/// One emitter: carrier, DOA, power and baseband description.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceParams {
    /// Carrier frequency, Hz, in `[0, f_nyq)`.
    pub f_hz: f64,
    /// Direction of arrival, degrees, in `[-90, 90]`.
    pub theta_deg: f64,
    /// Linear signal power.
    pub power: f64,
    pub kind: SourceKind,
    /// Two-sided information bandwidth, Hz (0 for a pure sinusoid).
    pub bandwidth_hz: f64,
    /// Width of a per-trial uniform carrier dither for sinusoid sources,
    /// Hz (0 disables; the default).
    pub freq_dither_hz: f64,
}

impl SourceParams {
    pub fn sinusoid(f_hz: f64, theta_deg: f64, power: f64) -> Self {
        Self {
            f_hz,
            theta_deg,
            power,
            kind: SourceKind::ComplexSinusoid,
            bandwidth_hz: 0.0,
            freq_dither_hz: 0.0,
        }
    }

    pub fn qpsk(f_hz: f64, theta_deg: f64, power: f64, bandwidth_hz: f64) -> Self {
        Self {
            f_hz,
            theta_deg,
            power,
            kind: SourceKind::Qpsk,
            bandwidth_hz,
            freq_dither_hz: 0.0,
        }
    }

    pub fn bandlimited_noise(f_hz: f64, theta_deg: f64, power: f64, bandwidth_hz: f64) -> Self {
        Self {
            f_hz,
            theta_deg,
            power,
            kind: SourceKind::BandlimitedNoise,
            bandwidth_hz,
            freq_dither_hz: 0.0,
        }
    }

    /// Occupied band `[f - B/2, f + B/2]`.
    pub fn band(&self) -> (f64, f64) {
        (
            self.f_hz - self.bandwidth_hz / 2.0,
            self.f_hz + self.bandwidth_hz / 2.0,
        )
    }
}

/// Full simulation/estimation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub constants: ArrayConstants,
    pub pattern: DelayPattern,
    /// Sampling-rate reduction factor: each branch samples at `f_nyq / L`.
    pub l: u32,
    pub sources: Vec<SourceParams>,
    /// Noise power per complex sample, linear.
    pub sigma2: f64,
    /// Snapshot count N.
    pub n_snapshots: usize,
}

/// Outcome of `Scenario::validate`: derived quantities plus warning-level
/// findings that do not block a run.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    /// Virtual aperture, when the coarray is contiguous.
    pub q: Option<u32>,
    pub warnings: Vec<String>,
}

impl Scenario {
    /// Number of sources K.
    pub fn k(&self) -> usize {
        self.sources.len()
    }

    /// Number of branches per element M.
    pub fn m(&self) -> usize {
        self.pattern.m()
    }

    /// Per-branch sampling rate `f_sub = f_nyq / L`.
    pub fn f_sub_hz(&self) -> f64 {
        self.constants.f_nyq_hz / self.l as f64
    }

    pub fn max_bandwidth_hz(&self) -> f64 {
        self.sources.iter().map(|s| s.bandwidth_hz).fold(0.0, f64::max)
    }

    /// Sum of source powers; equals the expected signal power of any single
    /// branch output.
    pub fn total_power(&self) -> f64 {
        self.sources.iter().map(|s| s.power).sum()
    }

    pub fn with_sigma2(&self, sigma2: f64) -> Self {
        let mut s = self.clone();
        s.sigma2 = sigma2;
        s
    }

    /// Checks every structural invariant; returns derived quantities and
    /// warnings. Errors here mean the scenario cannot be simulated at all.
    pub fn validate(&self) -> Result<ValidationReport> {
        let c = &self.constants;
        if !(c.f_nyq_hz > 0.0 && c.tau_s > 0.0 && c.d_m > 0.0) {
            return Err(Error::InvalidScenario(
                "array constants must be positive".into(),
            ));
        }
        if self.l == 0 {
            return Err(Error::InvalidScenario("L must be >= 1".into()));
        }
        if self.sources.is_empty() {
            return Err(Error::InvalidScenario("at least one source required".into()));
        }
        if self.n_snapshots == 0 {
            return Err(Error::InvalidScenario("n_snapshots must be >= 1".into()));
        }
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !nonneg(self.sigma2) {
            return Err(Error::InvalidScenario("sigma2 must be >= 0".into()));
        }
        for (i, s) in self.sources.iter().enumerate() {
            if !(s.f_hz >= 0.0 && s.f_hz < c.f_nyq_hz) {
                return Err(Error::InvalidScenario(format!(
                    "source {i}: carrier {} Hz outside [0, f_nyq)",
                    s.f_hz
                )));
            }
            if !(s.theta_deg >= -90.0 && s.theta_deg <= 90.0) {
                return Err(Error::InvalidScenario(format!(
                    "source {i}: DOA {} deg outside [-90, 90]",
                    s.theta_deg
                )));
            }
            if !(s.power.is_finite() && s.power > 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "source {i}: power must be positive"
                )));
            }
            if !nonneg(s.bandwidth_hz) {
                return Err(Error::InvalidScenario(format!(
                    "source {i}: bandwidth must be >= 0"
                )));
            }
            if !nonneg(s.freq_dither_hz) {
                return Err(Error::InvalidScenario(format!(
                    "source {i}: freq_dither_hz must be >= 0"
                )));
            }
            match s.kind {
                SourceKind::ComplexSinusoid => {
                    if s.bandwidth_hz != 0.0 {
                        return Err(Error::InvalidScenario(format!(
                            "source {i}: complex-sinusoid requires bandwidth 0"
                        )));
                    }
                    let half = s.freq_dither_hz / 2.0;
                    if s.f_hz - half < 0.0 || s.f_hz + half >= c.f_nyq_hz {
                        return Err(Error::InvalidScenario(format!(
                            "source {i}: carrier dither leaves [0, f_nyq)"
                        )));
                    }
                }
                SourceKind::Qpsk | SourceKind::BandlimitedNoise => {
                    if s.bandwidth_hz <= 0.0 {
                        return Err(Error::InvalidScenario(format!(
                            "source {i}: modulated kinds require bandwidth > 0"
                        )));
                    }
                    if s.freq_dither_hz != 0.0 {
                        return Err(Error::InvalidScenario(format!(
                            "source {i}: carrier dither applies to complex-sinusoid only"
                        )));
                    }
                }
            }
        }
        // disjoint information bands
        let mut bands: Vec<(f64, f64, usize)> = self
            .sources
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let (lo, hi) = s.band();
                (lo, hi, i)
            })
            .collect();
        bands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for w in bands.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(Error::InvalidScenario(format!(
                    "information bands of sources {} and {} overlap",
                    w[0].2, w[1].2
                )));
            }
        }

        let mut warnings = Vec::new();
        let f_sub = self.f_sub_hz();
        let max_b = self.max_bandwidth_hz();
        if max_b > f_sub {
            warnings.push(format!(
                "BandwidthExceedsSub: max bandwidth {max_b} Hz exceeds f_sub {f_sub} Hz; \
                 aliased sub-band spectra will overlap"
            ));
        }
        if self.n_snapshots < 2 * self.m() {
            warnings.push(format!(
                "n_snapshots {} below 2M = {}; sample covariance will be rank deficient",
                self.n_snapshots,
                2 * self.m()
            ));
        }
        let q = validate_pattern(&self.pattern).ok();
        Ok(ValidationReport { q, warnings })
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(json)?;
        Self::from_config(cfg)
    }

    pub fn from_json_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_config(cfg: ScenarioConfig) -> Result<Self> {
        let constants = ArrayConstants::with(
            cfg.array.f_nyq_hz,
            cfg.array.tau_s,
            cfg.array.d_m,
            cfg.array.c_light_m_per_s,
        )?;
        let pattern = match cfg.pattern {
            PatternConfig::Coeffs(c) => DelayPattern::new(c)?,
            PatternConfig::Mra { mra } => DelayPattern::mra(mra).ok_or_else(|| {
                Error::InvalidScenario(format!("no built-in MRA pattern for M = {mra}"))
            })?,
        };
        let sources: Vec<SourceParams> = cfg
            .sources
            .into_iter()
            .map(|s| SourceParams {
                f_hz: s.f_hz,
                theta_deg: s.theta_deg,
                power: s.power,
                kind: s.kind,
                bandwidth_hz: s.bandwidth_hz,
                freq_dither_hz: s.freq_dither_hz,
            })
            .collect();
        let sigma2 = match (cfg.sigma2, cfg.snr_db) {
            (Some(s), None) => {
                if !(s.is_finite() && s >= 0.0) {
                    return Err(Error::InvalidScenario("sigma2 must be >= 0".into()));
                }
                s
            }
            (None, Some(snr)) => {
                let total: f64 = sources.iter().map(|s| s.power).sum();
                crate::synth::sigma2_for_snr(total, snr)
            }
            (Some(_), Some(_)) => {
                return Err(Error::InvalidScenario(
                    "config must set exactly one of sigma2, snr_db".into(),
                ))
            }
            (None, None) => {
                return Err(Error::InvalidScenario(
                    "config must set one of sigma2, snr_db".into(),
                ))
            }
        };
        let scenario = Scenario {
            constants,
            pattern,
            l: cfg.l,
            sources,
            sigma2,
            n_snapshots: cfg.n_snapshots,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Result of the identifiability check: condition (ii) `f_sub >= max B_k`
/// and condition (i) `dof >= K + 1`, with `dof = Q` under ETM and `M`
/// otherwise.
#[derive(Debug, Clone)]
pub struct RateCondition {
    pub f_sub_hz: f64,
    pub max_bandwidth_hz: f64,
    /// `f_sub - max B_k`; non-negative means the aliased spectra stay intact.
    pub margin_hz: f64,
    pub rate_ok: bool,
    /// Degrees of freedom available to the chosen mode (None when ETM is
    /// requested on a non-contiguous pattern).
    pub dof: Option<usize>,
    pub k: usize,
    pub dof_ok: bool,
}

impl RateCondition {
    pub fn pass(&self) -> bool {
        self.rate_ok && self.dof_ok
    }
}

#[allow(clippy::int_plus_one)] // dof >= K + 1 mirrors the identifiability condition
pub fn check_rate_condition(scenario: &Scenario, mode: EstimatorMode) -> RateCondition {
    let f_sub = scenario.f_sub_hz();
    let max_b = scenario.max_bandwidth_hz();
    let margin = f_sub - max_b;
    let dof = match mode {
        EstimatorMode::Plain => Some(scenario.m()),
        EstimatorMode::Etm => validate_pattern(&scenario.pattern)
            .ok()
            .map(|q| q as usize),
    };
    let k = scenario.k();
    RateCondition {
        f_sub_hz: f_sub,
        max_bandwidth_hz: max_b,
        margin_hz: margin,
        rate_ok: margin >= 0.0,
        dof,
        k,
        dof_ok: dof.map(|d| d >= k + 1).unwrap_or(false),
    }
}

/// Per-source unit phases `(omega_k, phi_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitPhases {
    pub omega_rad: f64,
    pub phi_rad: f64,
}

pub fn unit_phases(scenario: &Scenario) -> Vec<UnitPhases> {
    scenario
        .sources
        .iter()
        .map(|s| UnitPhases {
            omega_rad: scenario.constants.omega(s.f_hz),
            phi_rad: scenario.constants.phi(s.f_hz, s.theta_deg),
        })
        .collect()
}

// --- JSON config ---

/// Raw JSON schema of a scenario document. Frequencies in Hz, angles in
/// degrees, powers linear; exactly one of `snr_db` / `sigma2` must be given.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Free-form remarks; ignored by the loader.
    #[serde(default)]
    pub notes: Option<String>,
    pub array: ArrayConfig,
    pub pattern: PatternConfig,
    #[serde(rename = "L")]
    pub l: u32,
    pub sources: Vec<SourceConfig>,
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub sigma2: Option<f64>,
    pub n_snapshots: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub f_nyq_hz: f64,
    #[serde(default)]
    pub tau_s: Option<f64>,
    #[serde(default)]
    pub d_m: Option<f64>,
    #[serde(default)]
    pub c_light_m_per_s: Option<f64>,
}

/// Either explicit coefficients `[0, 1, 4, 6]` or `{"mra": M}` for a
/// built-in pattern.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum PatternConfig {
    Coeffs(Vec<u32>),
    Mra { mra: usize },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub f_hz: f64,
    pub theta_deg: f64,
    #[serde(default = "default_power")]
    pub power: f64,
    pub kind: SourceKind,
    #[serde(default)]
    pub bandwidth_hz: f64,
    #[serde(default)]
    pub freq_dither_hz: f64,
}

fn default_power() -> f64 {
    1.0
}
