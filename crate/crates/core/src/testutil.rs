//! Shared scenario fixtures for unit tests.

use crate::scenario::{ArrayConstants, DelayPattern, Scenario, SourceParams};

/// Carriers used by both simulation fixtures, Hz, ascending.
pub const SIM1_FREQS_HZ: [f64; 6] = [1.22e9, 2.77e9, 4.32e9, 6.54e9, 7.64e9, 8.48e9];
/// DOAs paired with `SIM1_FREQS_HZ` in the QPSK fixture, degrees.
pub const SIM1_DOAS_DEG: [f64; 6] = [45.0, 20.0, 0.0, -30.0, 10.0, -20.0];
/// DOAs paired with the same carriers in the sinusoid fixture, degrees.
pub const SIM2_DOAS_DEG: [f64; 6] = [10.0, 20.0, 30.0, 30.0, 50.0, 80.0];

/// Six unit-power 25 MHz QPSK sources at f_sub = 25 MHz (L = 400),
/// SNR 10 dB -> sigma2 = 0.6.
pub fn sim1_scenario() -> Scenario {
    let sources = SIM1_FREQS_HZ
        .iter()
        .zip(SIM1_DOAS_DEG)
        .map(|(&f, th)| SourceParams::qpsk(f, th, 1.0, 25.0e6))
        .collect();
    Scenario {
        constants: ArrayConstants::new(10.0e9).unwrap(),
        pattern: DelayPattern::mra(4).unwrap(),
        l: 400,
        sources,
        sigma2: 0.6,
        n_snapshots: 4096,
    }
}

/// Six unit-power complex sinusoids at f_sub = 250 MHz (L = 40).
pub fn sim2_scenario() -> Scenario {
    let sources = SIM1_FREQS_HZ
        .iter()
        .zip(SIM2_DOAS_DEG)
        .map(|(&f, th)| SourceParams::sinusoid(f, th, 1.0))
        .collect();
    Scenario {
        constants: ArrayConstants::new(10.0e9).unwrap(),
        pattern: DelayPattern::mra(4).unwrap(),
        l: 40,
        sources,
        sigma2: 0.6,
        n_snapshots: 2048,
    }
}
