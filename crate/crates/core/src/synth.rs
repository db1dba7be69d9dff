//! Source synthesis and multi-coset snapshot generation.
//!
//! Branch m of the reference element carries `sum_k s~_k(t) e^{-j omega_k c_m}`
//! plus noise; the second element adds the spatial factor `e^{-j phi_k}` per
//! source. `phase-model` applies those factors literally, `exact-delay` reads
//! the delayed branches off a Nyquist-rate trace (integer shifts, so it needs
//! `tau = T`) and thereby exposes the narrowband approximation error.

use std::f64::consts::TAU;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fft;
use crate::scenario::{Scenario, SourceKind, SourceParams};

/// RRC rolloff used for QPSK shaping; occupied bandwidth = (1 + rolloff) * symbol rate.
const QPSK_ROLLOFF: f64 = 0.25;
/// RRC pulse span, symbols.
const QPSK_SPAN: usize = 8;

const DUMP_MAGIC: &[u8; 8] = b"JDFESNAP";

/// How the branch delays are realized in simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisMode {
    /// Per-source phase factors `e^{-j omega_k c_m}` on a common envelope.
    PhaseModel,
    /// Integer sample shifts of a Nyquist-rate trace (requires `tau = T`).
    ExactDelay,
}

impl std::fmt::Display for SynthesisMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SynthesisMode::PhaseModel => write!(f, "phase-model"),
            SynthesisMode::ExactDelay => write!(f, "exact-delay"),
        }
    }
}

/// Raw 2M x N channel outputs, rows 0..M = reference element branches,
/// rows M..2M = second element.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    pub data: DMatrix<Complex64>,
    pub m: usize,
    pub l: u32,
    pub seed: u64,
}

impl SnapshotMatrix {
    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    /// Binary dump: 32-byte header (magic, version, M, N, L) followed by
    /// row-major little-endian (re, im) f64 pairs.
    pub fn dump<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.m as u32).to_le_bytes())?;
        w.write_all(&(self.n() as u64).to_le_bytes())?;
        w.write_all(&self.l.to_le_bytes())?;
        w.write_all(&0u32.to_le_bytes())?;
        for r in 0..self.data.nrows() {
            for c in 0..self.data.ncols() {
                let v = self.data[(r, c)];
                w.write_all(&v.re.to_le_bytes())?;
                w.write_all(&v.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut header = [0u8; 32];
        r.read_exact(&mut header)?;
        if &header[0..8] != DUMP_MAGIC {
            return Err(Error::InvalidScenario("bad snapshot dump magic".into()));
        }
        let m = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        let n = u64::from_le_bytes(header[16..24].try_into().unwrap()) as usize;
        let l = u32::from_le_bytes(header[24..28].try_into().unwrap());
        let mut data = DMatrix::from_element(2 * m, n, Complex64::new(0.0, 0.0));
        let mut buf = [0u8; 16];
        for row in 0..2 * m {
            for col in 0..n {
                r.read_exact(&mut buf)?;
                data[(row, col)] = Complex64::new(
                    f64::from_le_bytes(buf[0..8].try_into().unwrap()),
                    f64::from_le_bytes(buf[8..16].try_into().unwrap()),
                );
            }
        }
        Ok(Self {
            data,
            m,
            l,
            seed: 0,
        })
    }
}

/// Nyquist-rate per-source modulated streams and their sum, length
/// `N*L + c_M`. Exact-delay snapshots are reads of these streams at indices
/// `n*L + c_M - c_m`.
#[derive(Debug, Clone)]
pub struct NyquistTrace {
    pub per_source: Vec<Vec<Complex64>>,
    pub combined: Vec<Complex64>,
}

/// `e^{j 2 pi cycles}` with the integer part of `cycles` removed first, so
/// precision holds over long traces.
fn unit_phasor(cycles: f64) -> Complex64 {
    Complex64::from_polar(1.0, TAU * cycles.fract())
}

enum Baseband {
    Constant,
    Qpsk {
        symbols: Vec<Complex64>,
        pulse: Vec<f64>,
        sps: usize,
    },
    Noise {
        buf: Vec<Complex64>,
    },
}

/// One emitter's sample stream at Nyquist-index granularity.
struct SourceStream {
    amp: f64,
    /// Effective carrier (nominal plus any per-trial dither), Hz.
    f_hz: f64,
    /// Carrier advance per Nyquist sample, `f / f_nyq`.
    f_cycles: f64,
    /// Random carrier phase, cycles.
    phase_cycles: f64,
    baseband: Baseband,
}

impl SourceStream {
    fn build(
        f_nyq_hz: f64,
        source: &SourceParams,
        f_eff_hz: f64,
        max_index: usize,
        phase_cycles: f64,
        seed: u64,
    ) -> Result<Self> {
        let baseband = match source.kind {
            SourceKind::ComplexSinusoid => {
                if source.bandwidth_hz != 0.0 {
                    return Err(Error::InvalidScenario(
                        "complex-sinusoid requires bandwidth 0".into(),
                    ));
                }
                Baseband::Constant
            }
            SourceKind::Qpsk => {
                let (symbols, pulse, sps) =
                    build_qpsk(f_nyq_hz, source.bandwidth_hz, max_index, seed)?;
                Baseband::Qpsk {
                    symbols,
                    pulse,
                    sps,
                }
            }
            SourceKind::BandlimitedNoise => {
                let buf = build_band_noise(f_nyq_hz, source.bandwidth_hz, max_index, seed)?;
                Baseband::Noise { buf }
            }
        };
        Ok(Self {
            amp: source.power.sqrt(),
            f_hz: f_eff_hz,
            f_cycles: f_eff_hz / f_nyq_hz,
            phase_cycles,
            baseband,
        })
    }

    /// Baseband sample s_k at Nyquist index n, scaled to power W_k.
    fn baseband(&self, n: usize) -> Complex64 {
        match &self.baseband {
            Baseband::Constant => Complex64::new(self.amp, 0.0),
            Baseband::Qpsk {
                symbols,
                pulse,
                sps,
            } => {
                let span_half = (QPSK_SPAN / 2) as isize;
                let j0 = (n / sps) as isize;
                let half_taps = span_half * *sps as isize;
                let mut acc = Complex64::new(0.0, 0.0);
                for j in (j0 - span_half)..=(j0 + span_half) {
                    let m = n as isize - j * *sps as isize;
                    if m.abs() <= half_taps {
                        let sym = symbols[(j + span_half) as usize];
                        acc += sym * pulse[(m + half_taps) as usize];
                    }
                }
                acc * self.amp
            }
            Baseband::Noise { buf } => buf[n] * self.amp,
        }
    }

    /// Modulated sample s~_k at Nyquist index n (carrier applied).
    fn modulated(&self, n: usize) -> Complex64 {
        self.baseband(n) * unit_phasor(self.f_cycles * n as f64 + self.phase_cycles)
    }
}

/// Root-raised-cosine taps at Nyquist rate plus a symbol table covering all
/// indices up to `max_index`.
fn build_qpsk(
    f_nyq_hz: f64,
    bandwidth_hz: f64,
    max_index: usize,
    seed: u64,
) -> Result<(Vec<Complex64>, Vec<f64>, usize)> {
    if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
        return Err(Error::InvalidScenario("qpsk requires bandwidth > 0".into()));
    }
    let symbol_rate = bandwidth_hz / (1.0 + QPSK_ROLLOFF);
    let sps = (f_nyq_hz / symbol_rate).round() as usize;
    if sps < 1 {
        return Err(Error::InvalidScenario(
            "qpsk bandwidth too large for the Nyquist rate".into(),
        ));
    }
    let half_taps = (QPSK_SPAN / 2) * sps;
    let mut pulse = vec![0.0f64; 2 * half_taps + 1];
    for (i, p) in pulse.iter_mut().enumerate() {
        let t = i as isize - half_taps as isize;
        *p = rrc_tap(t as f64 / sps as f64, QPSK_ROLLOFF);
    }
    // unit average power for unit-modulus symbols
    let energy: f64 = pulse.iter().map(|p| p * p).sum();
    let scale = (sps as f64 / energy).sqrt();
    for p in pulse.iter_mut() {
        *p *= scale;
    }

    let span_half = QPSK_SPAN / 2;
    let n_symbols = max_index / sps + 2 * span_half + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let constellation = [
        Complex64::new(inv_sqrt2, inv_sqrt2),
        Complex64::new(inv_sqrt2, -inv_sqrt2),
        Complex64::new(-inv_sqrt2, inv_sqrt2),
        Complex64::new(-inv_sqrt2, -inv_sqrt2),
    ];
    let symbols = (0..n_symbols)
        .map(|_| constellation[rng.random_range(0..4usize)])
        .collect();
    Ok((symbols, pulse, sps))
}

/// RRC tap at `x = t / T_symbol`.
fn rrc_tap(x: f64, beta: f64) -> f64 {
    use std::f64::consts::PI;
    if x == 0.0 {
        return 1.0 + beta * (4.0 / PI - 1.0);
    }
    let four_bx = 4.0 * beta * x;
    if (1.0 - four_bx * four_bx).abs() < 1e-9 {
        return (beta / 2.0_f64.sqrt())
            * ((1.0 + 2.0 / PI) * (PI / (4.0 * beta)).sin()
                + (1.0 - 2.0 / PI) * (PI / (4.0 * beta)).cos());
    }
    ((PI * x * (1.0 - beta)).sin() + four_bx * (PI * x * (1.0 + beta)).cos())
        / (PI * x * (1.0 - four_bx * four_bx))
}

/// Circular frequency-domain synthesis: i.i.d. Gaussian bins inside
/// `|f| <= B/2`, zero outside, unit average power. Exactly bandlimited
/// in the periodogram sense.
fn build_band_noise(
    f_nyq_hz: f64,
    bandwidth_hz: f64,
    max_index: usize,
    seed: u64,
) -> Result<Vec<Complex64>> {
    if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
        return Err(Error::InvalidScenario(
            "bandlimited-noise requires bandwidth > 0".into(),
        ));
    }
    let len = fft::next_pow2((max_index + 1).max(64));
    let half = bandwidth_hz / (2.0 * f_nyq_hz);
    let in_band: Vec<bool> = (0..len)
        .map(|b| {
            let f = if b < len / 2 {
                b as f64 / len as f64
            } else {
                b as f64 / len as f64 - 1.0
            };
            f.abs() <= half
        })
        .collect();
    let n_bins = in_band.iter().filter(|&&x| x).count().max(1);
    let gain = len as f64 / (n_bins as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (b, bin) in buf.iter_mut().enumerate() {
        if in_band[b] {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *bin = Complex64::new(re, im) * (gain * std::f64::consts::FRAC_1_SQRT_2);
        }
    }
    fft::ifft_in_place(&mut buf);
    Ok(buf)
}

/// Baseband stream of one source at the Nyquist rate, scaled to average
/// power W_k. Carrier and array phases are not applied.
pub fn gen_baseband(
    f_nyq_hz: f64,
    source: &SourceParams,
    length: usize,
    seed: u64,
) -> Result<Vec<Complex64>> {
    if length == 0 {
        return Ok(Vec::new());
    }
    let stream = SourceStream::build(f_nyq_hz, source, source.f_hz, length - 1, 0.0, seed)?;
    Ok((0..length).map(|n| stream.baseband(n)).collect())
}

/// Noise power for a target SNR, `sigma2 = total_signal_power / 10^(snr/10)`.
pub fn sigma2_for_snr(total_power: f64, snr_db: f64) -> f64 {
    total_power / 10.0_f64.powf(snr_db / 10.0)
}

/// SNR calibration per the branch-output definition
/// `SNR = E(|x_m|^2) / sigma2` with `E(|x_m|^2) = sum_k W_k`.
pub fn calibrate_sigma2(scenario: &Scenario, target_snr_db: f64) -> f64 {
    sigma2_for_snr(scenario.total_power(), target_snr_db)
}

/// Per-source streams plus the noise seed, derived from the trial seed in a
/// fixed order (per source: carrier phase, dither when enabled, stream seed;
/// then the noise seed) so that simulation and trace generation agree
/// sample-for-sample.
fn build_streams(scenario: &Scenario, seed: u64) -> Result<(Vec<SourceStream>, u64)> {
    let n = scenario.n_snapshots;
    let l = scenario.l as usize;
    let c_max = scenario.pattern.max_coeff() as usize;
    let max_index = n * l + c_max;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut streams = Vec::with_capacity(scenario.k());
    for source in &scenario.sources {
        let phase_cycles: f64 = master.random();
        let f_eff_hz = if source.freq_dither_hz > 0.0 {
            let u: f64 = master.random();
            source.f_hz + (u - 0.5) * source.freq_dither_hz
        } else {
            source.f_hz
        };
        let sub_seed = master.next_u64();
        streams.push(SourceStream::build(
            scenario.constants.f_nyq_hz,
            source,
            f_eff_hz,
            max_index,
            phase_cycles,
            sub_seed,
        )?);
    }
    let noise_seed = master.next_u64();
    Ok((streams, noise_seed))
}

/// Simulates the 2M x N snapshot matrix. Deterministic in
/// `(scenario, mode, seed)`.
pub fn simulate_snapshots(
    scenario: &Scenario,
    mode: SynthesisMode,
    seed: u64,
) -> Result<SnapshotMatrix> {
    scenario.validate()?;
    let c = &scenario.constants;
    if mode == SynthesisMode::ExactDelay {
        let tau_over_t = c.tau_s * c.f_nyq_hz;
        if (tau_over_t - 1.0).abs() > 1e-9 {
            return Err(Error::ModeUnavailable(
                "exact-delay requires tau = T".into(),
            ));
        }
    }
    let m = scenario.m();
    let n = scenario.n_snapshots;
    let l = scenario.l as usize;
    let coeffs = scenario.pattern.coeffs();
    let c_max = scenario.pattern.max_coeff() as usize;

    let (streams, noise_seed) = build_streams(scenario, seed)?;

    let mut data = DMatrix::from_element(2 * m, n, Complex64::new(0.0, 0.0));
    for (source, stream) in scenario.sources.iter().zip(&streams) {
        // the dithered carrier drives the branch and spatial phases too
        let omega = c.omega(stream.f_hz);
        let spatial = Complex64::from_polar(1.0, -c.phi(stream.f_hz, source.theta_deg));
        let branch: Vec<Complex64> = coeffs
            .iter()
            .map(|&cm| Complex64::from_polar(1.0, -omega * cm as f64))
            .collect();
        match mode {
            SynthesisMode::PhaseModel => {
                for col in 0..n {
                    let v = stream.modulated(col * l + c_max);
                    for (row, bf) in branch.iter().enumerate() {
                        let e = v * bf;
                        data[(row, col)] += e;
                        data[(m + row, col)] += e * spatial;
                    }
                }
            }
            SynthesisMode::ExactDelay => {
                for col in 0..n {
                    for (row, &cm) in coeffs.iter().enumerate() {
                        let v = stream.modulated(col * l + c_max - cm as usize);
                        data[(row, col)] += v;
                        data[(m + row, col)] += v * spatial;
                    }
                }
            }
        }
    }

    if scenario.sigma2 > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        let s = (scenario.sigma2 / 2.0).sqrt();
        for col in 0..n {
            for row in 0..2 * m {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                data[(row, col)] += Complex64::new(re * s, im * s);
            }
        }
    }

    Ok(SnapshotMatrix {
        data,
        m,
        l: scenario.l,
        seed,
    })
}

/// Materialized Nyquist-rate trace for the same seed as
/// [`simulate_snapshots`]; exact-delay reads equal
/// `per_source[k][n*L + c_M - c_m]` sample-for-sample.
pub fn nyquist_trace(scenario: &Scenario, seed: u64) -> Result<NyquistTrace> {
    scenario.validate()?;
    let len = scenario.n_snapshots * scenario.l as usize + scenario.pattern.max_coeff() as usize;
    let (streams, _) = build_streams(scenario, seed)?;
    let per_source: Vec<Vec<Complex64>> = streams
        .iter()
        .map(|s| (0..len).map(|i| s.modulated(i)).collect())
        .collect();
    let mut combined = vec![Complex64::new(0.0, 0.0); len];
    for src in &per_source {
        for (acc, v) in combined.iter_mut().zip(src) {
            *acc += v;
        }
    }
    Ok(NyquistTrace {
        per_source,
        combined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ArrayConstants, DelayPattern};

    fn constants() -> ArrayConstants {
        ArrayConstants::new(10.0e9).unwrap()
    }

    fn single_source_scenario(kind: SourceKind, bandwidth_hz: f64) -> Scenario {
        Scenario {
            constants: constants(),
            pattern: DelayPattern::mra(4).unwrap(),
            l: 400,
            sources: vec![SourceParams {
                f_hz: 1.22e9,
                theta_deg: 25.0,
                power: 1.0,
                kind,
                bandwidth_hz,
                freq_dither_hz: 0.0,
            }],
            sigma2: 0.0,
            n_snapshots: 64,
        }
    }

    #[test]
    fn sinusoid_has_constant_envelope() {
        let src = SourceParams::sinusoid(1.0e9, 0.0, 1.0);
        let s = gen_baseband(10.0e9, &src, 1000, 7).unwrap();
        for v in &s {
            assert!((v.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn qpsk_power_calibrated() {
        let src = SourceParams::qpsk(1.22e9, 0.0, 2.0, 25.0e6);
        let n = 1 << 20;
        let s = gen_baseband(10.0e9, &src, n, 42).unwrap();
        let p: f64 = s.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
        assert!(
            (p - 2.0).abs() / 2.0 < 0.05,
            "measured power {p}, want 2.0 +- 5%"
        );
    }

    #[test]
    fn band_noise_is_bandlimited() {
        let src = SourceParams::bandlimited_noise(4.0e9, 0.0, 1.0, 25.0e6);
        let n = 1 << 17;
        let s = gen_baseband(10.0e9, &src, n, 3).unwrap();
        let mut buf = s.clone();
        fft::fft_in_place(&mut buf);
        let half = 25.0e6 / 2.0 / 10.0e9;
        let mut inside = 0.0;
        let mut total = 0.0;
        for (b, v) in buf.iter().enumerate() {
            let f = if b < n / 2 {
                b as f64 / n as f64
            } else {
                b as f64 / n as f64 - 1.0
            };
            let p = v.norm_sqr();
            total += p;
            if f.abs() <= half {
                inside += p;
            }
        }
        assert!(inside / total >= 0.99, "in-band fraction {}", inside / total);
    }

    #[test]
    fn band_noise_power_close_to_target() {
        let src = SourceParams::bandlimited_noise(4.0e9, 0.0, 3.0, 100.0e6);
        let n = 1 << 16;
        let s = gen_baseband(10.0e9, &src, n, 11).unwrap();
        let p: f64 = s.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
        assert!((p - 3.0).abs() / 3.0 < 0.2, "measured power {p}");
    }

    #[test]
    fn phase_model_row_ratios_single_sinusoid() {
        let sc = single_source_scenario(SourceKind::ComplexSinusoid, 0.0);
        let snaps = simulate_snapshots(&sc, SynthesisMode::PhaseModel, 5).unwrap();
        let omega = sc.constants.omega(sc.sources[0].f_hz);
        let phi = sc.constants.phi(sc.sources[0].f_hz, sc.sources[0].theta_deg);
        let coeffs = sc.pattern.coeffs();
        for col in 0..snaps.n() {
            let base = snaps.data[(0, col)];
            for (row, &cm) in coeffs.iter().enumerate() {
                let expect = base * Complex64::from_polar(1.0, -omega * cm as f64);
                assert!((snaps.data[(row, col)] - expect).norm() < 1e-12);
            }
            // second element picks up the spatial factor
            let expect = base * Complex64::from_polar(1.0, -phi);
            assert!((snaps.data[(4, col)] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn sinusoid_modes_agree_to_fp_precision() {
        let sc = single_source_scenario(SourceKind::ComplexSinusoid, 0.0);
        let a = simulate_snapshots(&sc, SynthesisMode::PhaseModel, 9).unwrap();
        let b = simulate_snapshots(&sc, SynthesisMode::ExactDelay, 9).unwrap();
        let diff = (&a.data - &b.data).norm() / a.data.norm();
        assert!(diff < 1e-12, "relative difference {diff}");
    }

    #[test]
    fn qpsk_modes_agree_within_narrowband_bound() {
        let mut sc = single_source_scenario(SourceKind::Qpsk, 25.0e6);
        sc.n_snapshots = 256;
        let a = simulate_snapshots(&sc, SynthesisMode::PhaseModel, 9).unwrap();
        let b = simulate_snapshots(&sc, SynthesisMode::ExactDelay, 9).unwrap();
        let rel = (&a.data - &b.data).norm() / a.data.norm();
        // B * c_M * T = 25e6 * 6 * 1e-10 = 0.015
        let bound = sc.sources[0].bandwidth_hz
            * sc.pattern.max_coeff() as f64
            * sc.constants.nyquist_interval_s();
        assert!(rel > 0.0);
        assert!(rel < 3.0 * bound, "rel {rel} vs bound {bound}");
    }

    #[test]
    fn exact_delay_requires_tau_t() {
        let mut sc = single_source_scenario(SourceKind::ComplexSinusoid, 0.0);
        sc.constants.tau_s *= 2.0;
        assert!(matches!(
            simulate_snapshots(&sc, SynthesisMode::ExactDelay, 0),
            Err(Error::ModeUnavailable(_))
        ));
        assert!(simulate_snapshots(&sc, SynthesisMode::PhaseModel, 0).is_ok());
    }

    #[test]
    fn calibration_matches_definition() {
        assert_eq!(sigma2_for_snr(6.0, 0.0), 6.0);
        assert!((sigma2_for_snr(1.0, 10.0) - 0.1).abs() < 1e-15);
        assert!((sigma2_for_snr(6.0, 10.0) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn synthesis_is_deterministic() {
        let mut sc = single_source_scenario(SourceKind::Qpsk, 25.0e6);
        sc.sigma2 = 0.3;
        let a = simulate_snapshots(&sc, SynthesisMode::PhaseModel, 123).unwrap();
        let b = simulate_snapshots(&sc, SynthesisMode::PhaseModel, 123).unwrap();
        assert_eq!(a.data.as_slice(), b.data.as_slice());
        let c = simulate_snapshots(&sc, SynthesisMode::PhaseModel, 124).unwrap();
        assert_ne!(a.data.as_slice(), c.data.as_slice());
    }

    #[test]
    fn exact_delay_reads_match_trace() {
        let mut sc = single_source_scenario(SourceKind::Qpsk, 25.0e6);
        sc.l = 16;
        sc.n_snapshots = 32;
        let snaps = simulate_snapshots(&sc, SynthesisMode::ExactDelay, 77).unwrap();
        let trace = nyquist_trace(&sc, 77).unwrap();
        assert_eq!(
            trace.combined.len(),
            sc.n_snapshots * sc.l as usize + sc.pattern.max_coeff() as usize
        );
        let c_max = sc.pattern.max_coeff() as usize;
        for col in 0..snaps.n() {
            for (row, &cm) in sc.pattern.coeffs().iter().enumerate() {
                let idx = col * sc.l as usize + c_max - cm as usize;
                assert_eq!(snaps.data[(row, col)], trace.combined[idx]);
            }
        }
    }

    #[test]
    fn carrier_dither_shifts_omega_within_bounds() {
        let mut sc = single_source_scenario(SourceKind::ComplexSinusoid, 0.0);
        sc.sources[0].freq_dither_hz = 50.0e6;
        let nominal = sc.constants.omega(sc.sources[0].f_hz);
        let mut seen_shift = false;
        for seed in 0..4 {
            let snaps = simulate_snapshots(&sc, SynthesisMode::PhaseModel, seed).unwrap();
            // branch 1 vs branch 0 exposes e^{-j omega (c_2 - c_1)}
            let ratio = snaps.data[(1, 0)] / snaps.data[(0, 0)];
            let omega_hat = (-ratio.arg()).rem_euclid(TAU);
            let bound = TAU * sc.sources[0].freq_dither_hz / 2.0 / sc.constants.f_nyq_hz;
            assert!((omega_hat - nominal).abs() <= bound + 1e-9, "seed {seed}");
            if (omega_hat - nominal).abs() > 1e-12 {
                seen_shift = true;
            }
        }
        assert!(seen_shift, "dither never moved the carrier");
    }

    #[test]
    fn dither_rejected_for_modulated_kinds() {
        let mut sc = single_source_scenario(SourceKind::Qpsk, 25.0e6);
        sc.sources[0].freq_dither_hz = 1.0e6;
        assert!(sc.validate().is_err());
        // and a dither that straddles the band edge is rejected
        let mut sc = single_source_scenario(SourceKind::ComplexSinusoid, 0.0);
        sc.sources[0].f_hz = 1.0e6;
        sc.sources[0].freq_dither_hz = 4.0e6;
        assert!(sc.validate().is_err());
    }

    #[test]
    fn snapshot_dump_roundtrip() {
        let sc = single_source_scenario(SourceKind::ComplexSinusoid, 0.0);
        let snaps = simulate_snapshots(&sc, SynthesisMode::PhaseModel, 1).unwrap();
        let path = std::env::temp_dir().join("jdfe_dump_test.bin");
        snaps.dump(&path).unwrap();
        let loaded = SnapshotMatrix::load(&path).unwrap();
        assert_eq!(loaded.m, snaps.m);
        assert_eq!(loaded.l, snaps.l);
        assert_eq!(loaded.data, snaps.data);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn empty_baseband_request() {
        let src = SourceParams::sinusoid(1.0e9, 0.0, 1.0);
        assert!(gen_baseband(10.0e9, &src, 0, 0).unwrap().is_empty());
    }
}
