//! Stacked covariance estimation and its analytic (exact) counterpart.
//!
//! The 2M x 2M covariance of the stacked channel vector is
//! `A W A^H + noise * I` with `A` holding the stacked manifold vectors
//! `[a_t(omega_k); a_t(omega_k) e^{-j phi_k}]`. Its four M x M blocks carry
//! the structure the estimators work from: both diagonal blocks equal
//! `A_t W A_t^H + noise * I` (frequency only), the off-diagonal blocks add
//! the diagonal DOA factor `D_phi`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::subspace::stacked_manifold;
use crate::synth::SnapshotMatrix;

/// Which M x M block of the stacked covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockId {
    /// rows/cols 0..M
    XX,
    /// rows 0..M, cols M..2M
    XXbar,
    /// rows M..2M, cols 0..M
    XbarX,
    /// rows/cols M..2M
    XbarXbar,
}

/// Noise constant in the analytic covariance: `1` for the time-domain
/// per-sample convention, `L` for the folded-spectrum convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseScale {
    One,
    L,
}

/// Hermitian 2M x 2M covariance with block accessors. `n_used == 0` marks an
/// analytically constructed matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    full: DMatrix<Complex64>,
    m: usize,
    n_used: usize,
}

pub(crate) fn hermitian_symmetrize(a: &mut DMatrix<Complex64>) {
    let n = a.nrows();
    for i in 0..n {
        a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
        for j in i + 1..n {
            let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
}

impl CovarianceSet {
    /// Wraps a raw 2M x 2M matrix, symmetrizing it. Fails on odd dimension,
    /// non-square shape or non-finite entries.
    pub fn from_full(mut full: DMatrix<Complex64>, n_used: usize) -> Result<Self> {
        if full.nrows() != full.ncols() || !full.nrows().is_multiple_of(2) || full.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: full.nrows() / 2 * 2,
                got: full.ncols(),
            });
        }
        if full.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        hermitian_symmetrize(&mut full);
        let m = full.nrows() / 2;
        Ok(Self { full, m, n_used })
    }

    pub fn full(&self) -> &DMatrix<Complex64> {
        &self.full
    }

    /// Block size M.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Snapshot count behind the estimate; 0 for analytic matrices.
    pub fn n_used(&self) -> usize {
        self.n_used
    }

    pub fn block(&self, which: BlockId) -> DMatrix<Complex64> {
        let m = self.m;
        let (r0, c0) = match which {
            BlockId::XX => (0, 0),
            BlockId::XXbar => (0, m),
            BlockId::XbarX => (m, 0),
            BlockId::XbarXbar => (m, m),
        };
        self.full.view((r0, c0), (m, m)).into_owned()
    }

    /// Debug dump as CSV of `re,im` pairs, one matrix row per line.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        for r in 0..self.full.nrows() {
            let row: Vec<String> = (0..self.full.ncols())
                .map(|c| {
                    let v = self.full[(r, c)];
                    format!("{},{}", v.re, v.im)
                })
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Sample covariance `(1/N) Y Y^H`, Hermitian-symmetrized.
pub fn sample_covariance(snapshots: &SnapshotMatrix) -> Result<CovarianceSet> {
    let n = snapshots.n();
    if n == 0 {
        return Err(Error::DegenerateSnapshots);
    }
    let y = &snapshots.data;
    let mut full = y * y.adjoint();
    full /= Complex64::new(n as f64, 0.0);
    CovarianceSet::from_full(full, n)
}

/// Exact covariance from ground truth: `A diag(W) A^H + scale * sigma2 * I`.
pub fn analytic_covariance(scenario: &Scenario, noise_scale: NoiseScale) -> CovarianceSet {
    let m = scenario.m();
    let coeffs = scenario.pattern.coeffs();
    let c = &scenario.constants;
    let mut full = DMatrix::from_element(2 * m, 2 * m, Complex64::new(0.0, 0.0));
    for s in &scenario.sources {
        let a = stacked_manifold(coeffs, c.omega(s.f_hz), c.phi(s.f_hz, s.theta_deg));
        let w = Complex64::new(s.power, 0.0);
        for i in 0..2 * m {
            for j in 0..2 * m {
                full[(i, j)] += a[i] * w * a[j].conj();
            }
        }
    }
    let noise = match noise_scale {
        NoiseScale::One => scenario.sigma2,
        NoiseScale::L => scenario.sigma2 * scenario.l as f64,
    };
    for i in 0..2 * m {
        full[(i, i)] += Complex64::new(noise, 0.0);
    }
    hermitian_symmetrize(&mut full);
    CovarianceSet {
        full,
        m,
        n_used: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ArrayConstants, DelayPattern, SourceParams};
    use crate::subspace::{eigh, time_delay_manifold};
    use crate::synth::{simulate_snapshots, SynthesisMode};
    use crate::testutil::{sim1_scenario, sim2_scenario};
    use nalgebra::DVector;

    fn base_scenario(sources: Vec<SourceParams>, sigma2: f64) -> Scenario {
        Scenario {
            constants: ArrayConstants::new(10.0e9).unwrap(),
            pattern: DelayPattern::mra(4).unwrap(),
            l: 40,
            sources,
            sigma2,
            n_snapshots: 64,
        }
    }

    #[test]
    fn rank_one_outer_product() {
        let ones = DMatrix::from_element(4, 1, Complex64::new(1.0, 0.0));
        let snaps = SnapshotMatrix {
            data: ones,
            m: 2,
            l: 1,
            seed: 0,
        };
        let cov = sample_covariance(&snaps).unwrap();
        for v in cov.full().iter() {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_snapshots_matrix_gives_zero() {
        let snaps = SnapshotMatrix {
            data: DMatrix::from_element(4, 3, Complex64::new(0.0, 0.0)),
            m: 2,
            l: 1,
            seed: 0,
        };
        let cov = sample_covariance(&snaps).unwrap();
        assert!(cov.full().norm() == 0.0);
        assert_eq!(cov.n_used(), 3);
    }

    #[test]
    fn empty_snapshots_error() {
        let snaps = SnapshotMatrix {
            data: DMatrix::from_element(4, 0, Complex64::new(0.0, 0.0)),
            m: 2,
            l: 1,
            seed: 0,
        };
        assert!(matches!(
            sample_covariance(&snaps),
            Err(Error::DegenerateSnapshots)
        ));
    }

    #[test]
    fn analytic_single_source_is_rank_one_with_2m_eigenvalue() {
        let sc = base_scenario(vec![SourceParams::sinusoid(1.22e9, 45.0, 1.0)], 0.0);
        let cov = analytic_covariance(&sc, NoiseScale::One);
        let basis = eigh(cov.full()).unwrap();
        let m2 = 2.0 * sc.m() as f64;
        assert!((basis.values[7] - m2).abs() < 1e-10);
        for v in &basis.values[..7] {
            assert!(v.abs() < 1e-10);
        }
    }

    #[test]
    fn analytic_no_sources_is_identity() {
        let sc = base_scenario(vec![], 1.0);
        let cov = analytic_covariance(&sc, NoiseScale::One);
        let eye = DMatrix::from_diagonal_element(8, 8, Complex64::new(1.0, 0.0));
        assert!((cov.full() - eye).norm() < 1e-15);
        // every diagonal block sigma2 I, off-diagonal blocks 0
        assert!((cov.block(BlockId::XXbar)).norm() == 0.0);
        assert!((cov.block(BlockId::XbarX)).norm() == 0.0);
    }

    #[test]
    fn analytic_blocks_match_direct_construction() {
        let sc = sim1_scenario();
        let cov = analytic_covariance(&sc, NoiseScale::One);
        let m = sc.m();
        let coeffs = sc.pattern.coeffs();
        let c = &sc.constants;

        // independent construction of the Eq-level block expressions
        let mut att = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
        let mut atdt = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
        for s in &sc.sources {
            let at: DVector<Complex64> = time_delay_manifold(coeffs, c.omega(s.f_hz));
            let dphi = Complex64::from_polar(1.0, -c.phi(s.f_hz, s.theta_deg));
            for i in 0..m {
                for j in 0..m {
                    let base = at[i] * at[j].conj() * s.power;
                    att[(i, j)] += base;
                    atdt[(i, j)] += base * dphi;
                }
            }
        }
        for i in 0..m {
            att[(i, i)] += Complex64::new(sc.sigma2, 0.0);
        }

        let xx = cov.block(BlockId::XX);
        assert!((&xx - &att).norm() / att.norm() < 1e-12);
        let xbarx = cov.block(BlockId::XbarX);
        assert!((&xbarx - &atdt).norm() / atdt.norm() < 1e-12);
        // the two diagonal blocks have the same form
        let xbxb = cov.block(BlockId::XbarXbar);
        assert!((&xx - &xbxb).norm() / xx.norm() < 1e-12);
        // off-diagonal blocks are adjoints of each other
        let xxbar = cov.block(BlockId::XXbar);
        assert!((&xxbar - &xbarx.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn analytic_eigen_split_signal_noise() {
        let mut sc = sim1_scenario();
        sc.sigma2 = 0.5;
        let cov = analytic_covariance(&sc, NoiseScale::L);
        let noise = sc.sigma2 * sc.l as f64;
        let basis = eigh(cov.full()).unwrap();
        let k = sc.k();
        let dim = 2 * sc.m();
        for v in &basis.values[..dim - k] {
            assert!((v - noise).abs() / noise < 1e-10, "noise eig {v}");
        }
        for v in &basis.values[dim - k..] {
            assert!(*v > noise * (1.0 + 1e-6), "signal eig {v}");
        }
    }

    #[test]
    fn sample_covariance_converges_to_analytic_sinusoids() {
        // sinusoid carriers at L = 40 alias to distinct sub-band frequencies,
        // so the snapshot streams decorrelate and the sample covariance
        // approaches A W A^H.
        let mut sc = sim2_scenario();
        sc.sigma2 = 0.0;
        sc.n_snapshots = 1 << 14;
        let snaps = simulate_snapshots(&sc, SynthesisMode::PhaseModel, 2024).unwrap();
        let sample = sample_covariance(&snaps).unwrap();
        let exact = analytic_covariance(&sc, NoiseScale::One);
        let rel = (sample.full() - exact.full()).norm() / exact.full().norm();
        assert!(rel < 0.05, "relative Frobenius error {rel}");
    }

    #[test]
    fn sample_covariance_converges_to_analytic_qpsk() {
        let mut sc = sim1_scenario();
        sc.sigma2 = 0.0;
        sc.n_snapshots = 1 << 14;
        let snaps = simulate_snapshots(&sc, SynthesisMode::PhaseModel, 2024).unwrap();
        let sample = sample_covariance(&snaps).unwrap();
        let exact = analytic_covariance(&sc, NoiseScale::One);
        let rel = (sample.full() - exact.full()).norm() / exact.full().norm();
        assert!(rel < 0.05, "relative Frobenius error {rel}");
    }

    #[test]
    fn sample_covariance_order_invariant() {
        let mut sc = sim1_scenario();
        sc.sigma2 = 0.3;
        sc.n_snapshots = 64;
        let snaps = simulate_snapshots(&sc, SynthesisMode::PhaseModel, 8).unwrap();
        let cov = sample_covariance(&snaps).unwrap();
        // reverse snapshot order
        let n = snaps.n();
        let mut rev = snaps.clone();
        for col in 0..n {
            rev.data.set_column(col, &snaps.data.column(n - 1 - col));
        }
        let cov_rev = sample_covariance(&rev).unwrap();
        let rel = (cov.full() - cov_rev.full()).norm() / cov.full().norm();
        assert!(rel < 1e-12);
    }

    #[test]
    fn covariance_is_positive_semidefinite() {
        let mut sc = sim1_scenario();
        sc.sigma2 = 0.2;
        sc.n_snapshots = 64;
        for seed in 0..4 {
            let snaps = simulate_snapshots(&sc, SynthesisMode::PhaseModel, seed).unwrap();
            let cov = sample_covariance(&snaps).unwrap();
            let basis = eigh(cov.full()).unwrap();
            let top = basis.values.last().copied().unwrap();
            for v in &basis.values {
                assert!(*v >= -1e-10 * top, "eigenvalue {v}");
            }
        }
    }
}
