//! MUSIC machinery: eigendecomposition, noise subspaces, pseudo-spectra,
//! peak picking, and the twice-MUSIC joint estimator.
//!
//! Frequencies come from the diagonal covariance blocks (time-delay manifold
//! only), DOAs from the full stacked covariance scanned at each estimated
//! frequency, so every `(f, theta)` pair is formed without combinatorial
//! matching.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::covariance::{BlockId, CovarianceSet};
use crate::error::{Error, Result};
use crate::scenario::{ArrayConstants, EstimatorMode, DOA_GRID_POINTS, FREQ_GRID_POINTS};

/// Time-delay steering vector `a_t(omega) = [e^{-j omega c_1}, ...]` over the
/// given integer lags (branch delays, or `0..Q` for the virtual manifold).
pub fn time_delay_manifold(lags: &[u32], omega: f64) -> DVector<Complex64> {
    DVector::from_iterator(
        lags.len(),
        lags.iter()
            .map(|&c| Complex64::from_polar(1.0, -omega * c as f64)),
    )
}

/// Stacked two-element steering vector `[a_t; a_t e^{-j phi}]`.
pub fn stacked_manifold(lags: &[u32], omega: f64, phi: f64) -> DVector<Complex64> {
    let m = lags.len();
    let at = time_delay_manifold(lags, omega);
    let spatial = Complex64::from_polar(1.0, -phi);
    DVector::from_fn(2 * m, |i, _| if i < m { at[i] } else { at[i - m] * spatial })
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending and
/// eigenvectors column-matched.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

impl EigenBasis {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Hermitian eigendecomposition. The input must be Hermitian within
/// `1e-8` (scaled by its largest entry) and finite.
pub fn eigh(a: &DMatrix<Complex64>) -> Result<EigenBasis> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let scale = a.iter().map(|v| v.norm()).fold(0.0f64, f64::max).max(1.0);
    let mut max_asym = 0.0f64;
    for i in 0..a.nrows() {
        for j in i..a.ncols() {
            max_asym = max_asym.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    if max_asym > 1e-8 * scale {
        return Err(Error::NotHermitian { max_asym });
    }
    let mut sym = a.clone();
    crate::covariance::hermitian_symmetrize(&mut sym);
    let se = sym.symmetric_eigen();
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    Ok(EigenBasis { values, vectors })
}

/// Eigenvectors of the `dim - k` smallest eigenvalues, as columns.
pub fn noise_subspace(basis: &EigenBasis, k: usize) -> Result<DMatrix<Complex64>> {
    let dim = basis.dim();
    if k >= dim {
        return Err(Error::KTooLarge { k, dim });
    }
    Ok(basis.vectors.columns(0, dim - k).into_owned())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    Frequency,
    Doa,
}

/// Scan of `1 / |a^H G|^2` over a grid; peaks mark parameters.
#[derive(Debug, Clone)]
pub struct PseudoSpectrum {
    /// Hz for frequency scans, degrees for DOA scans; strictly ascending.
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: SpectrumKind,
    /// The paired frequency estimate for DOA scans.
    pub f_hat_hz: Option<f64>,
}

impl PseudoSpectrum {
    /// CSV with a comment header, then `abscissa,value` rows.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        let kind = match self.kind {
            SpectrumKind::Frequency => "frequency",
            SpectrumKind::Doa => "doa",
        };
        let f_hat = match self.f_hat_hz {
            Some(f) => format!("{f}"),
            None => "none".into(),
        };
        writeln!(w, "# kind={kind}, f_hat={f_hat}")?;
        writeln!(w, "abscissa,value")?;
        for (x, v) in self.grid.iter().zip(&self.values) {
            writeln!(w, "{x},{v}")?;
        }
        Ok(())
    }
}

/// Scan grids for the two MUSIC stages.
#[derive(Debug, Clone)]
pub struct ScanGrids {
    /// Frequency points, Hz.
    pub freq_hz: Vec<f64>,
    /// DOA points, degrees.
    pub doa_deg: Vec<f64>,
}

impl ScanGrids {
    /// Defaults: 4096 points over `[0, 1/tau)` and 721 points over
    /// `[-90, 90]` (0.25 degree step).
    pub fn with_defaults(constants: &ArrayConstants) -> Self {
        let limit = constants.scan_limit_hz();
        let freq_hz = (0..FREQ_GRID_POINTS)
            .map(|i| i as f64 * limit / FREQ_GRID_POINTS as f64)
            .collect();
        let n = DOA_GRID_POINTS;
        let doa_deg = (0..n)
            .map(|i| -90.0 + 180.0 * i as f64 / (n - 1) as f64)
            .collect();
        Self { freq_hz, doa_deg }
    }

    /// Grid step of the default frequency grid, Hz.
    pub fn freq_step_hz(&self) -> f64 {
        if self.freq_hz.len() < 2 {
            return 0.0;
        }
        self.freq_hz[1] - self.freq_hz[0]
    }

    pub fn doa_step_deg(&self) -> f64 {
        if self.doa_deg.len() < 2 {
            return 0.0;
        }
        self.doa_deg[1] - self.doa_deg[0]
    }
}

fn spectrum_value(noise: &DMatrix<Complex64>, a: &DVector<Complex64>) -> f64 {
    let proj = noise.ad_mul(a);
    1.0 / proj.norm_squared().max(1e-300)
}

/// Frequency pseudo-spectrum `1 / |a_t(omega)^H G|^2` over a Hz grid;
/// `omega = 2 pi f tau`.
pub fn freq_pseudospectrum(
    noise: &DMatrix<Complex64>,
    lags: &[u32],
    constants: &ArrayConstants,
    grid_hz: &[f64],
) -> Result<PseudoSpectrum> {
    if grid_hz.is_empty() {
        return Err(Error::GridEmpty);
    }
    debug_assert!(grid_hz.windows(2).all(|w| w[0] < w[1]), "grid must ascend");
    if noise.nrows() != lags.len() {
        return Err(Error::DimensionMismatch {
            expected: lags.len(),
            got: noise.nrows(),
        });
    }
    let values = grid_hz
        .iter()
        .map(|&f| {
            let a = time_delay_manifold(lags, constants.omega(f));
            spectrum_value(noise, &a)
        })
        .collect();
    Ok(PseudoSpectrum {
        grid: grid_hz.to_vec(),
        values,
        kind: SpectrumKind::Frequency,
        f_hat_hz: None,
    })
}

/// DOA pseudo-spectrum at a fixed frequency estimate, scanned over degrees
/// with the stacked manifold.
pub fn doa_pseudospectrum(
    noise: &DMatrix<Complex64>,
    lags: &[u32],
    constants: &ArrayConstants,
    f_hat_hz: f64,
    grid_deg: &[f64],
) -> Result<PseudoSpectrum> {
    if grid_deg.is_empty() {
        return Err(Error::GridEmpty);
    }
    debug_assert!(grid_deg.windows(2).all(|w| w[0] < w[1]), "grid must ascend");
    if noise.nrows() != 2 * lags.len() {
        return Err(Error::DimensionMismatch {
            expected: 2 * lags.len(),
            got: noise.nrows(),
        });
    }
    let omega = constants.omega(f_hat_hz);
    let values = grid_deg
        .iter()
        .map(|&theta| {
            let a = stacked_manifold(lags, omega, constants.phi(f_hat_hz, theta));
            spectrum_value(noise, &a)
        })
        .collect();
    Ok(PseudoSpectrum {
        grid: grid_deg.to_vec(),
        values,
        kind: SpectrumKind::Doa,
        f_hat_hz: Some(f_hat_hz),
    })
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Peak {
    pub x: f64,
    pub height: f64,
}

/// Three-point parabolic refinement around grid index `i`.
fn refine(grid: &[f64], values: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= grid.len() {
        return grid[i];
    }
    let (ym, y0, yp) = (values[i - 1], values[i], values[i + 1]);
    let denom = ym - 2.0 * y0 + yp;
    if denom.abs() < 1e-300 {
        return grid[i];
    }
    let delta = (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5);
    let h = (grid[i + 1] - grid[i - 1]) / 2.0;
    grid[i] + delta * h
}

pub(crate) fn pick_peaks_detailed(spec: &PseudoSpectrum, k: usize) -> Result<Vec<Peak>> {
    let v = &spec.values;
    let mut maxima: Vec<usize> = Vec::new();
    for i in 1..v.len().saturating_sub(1) {
        if v[i] > v[i - 1] && v[i] > v[i + 1] {
            maxima.push(i);
        }
    }
    if maxima.len() < k {
        return Err(Error::TooFewPeaks {
            found: maxima.len(),
            needed: k,
        });
    }
    // tallest first, ties broken toward the lower abscissa
    maxima.sort_by(|&a, &b| {
        v[b].partial_cmp(&v[a])
            .unwrap()
            .then(spec.grid[a].partial_cmp(&spec.grid[b]).unwrap())
    });
    let mut peaks: Vec<Peak> = maxima[..k]
        .iter()
        .map(|&i| Peak {
            x: refine(&spec.grid, v, i),
            height: v[i],
        })
        .collect();
    peaks.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
    Ok(peaks)
}

/// The K tallest strict local maxima, parabola-refined, ascending.
pub fn pick_peaks(spec: &PseudoSpectrum, k: usize) -> Result<Vec<f64>> {
    Ok(pick_peaks_detailed(spec, k)?.iter().map(|p| p.x).collect())
}

fn argmax_refined(spec: &PseudoSpectrum) -> Result<Peak> {
    if spec.values.is_empty() {
        return Err(Error::GridEmpty);
    }
    let mut best = 0;
    for (i, v) in spec.values.iter().enumerate() {
        if *v > spec.values[best] {
            best = i;
        }
    }
    Ok(Peak {
        x: refine(&spec.grid, &spec.values, best),
        height: spec.values[best],
    })
}

/// One auto-paired estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatePair {
    pub f_hz: f64,
    pub theta_deg: f64,
    /// Mean height of the two frequency peaks behind `f_hz`.
    pub freq_peak: f64,
    /// Height of the DOA peak.
    pub doa_peak: f64,
}

/// K auto-paired `(f, theta)` estimates, frequencies ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSet {
    pub pairs: Vec<EstimatePair>,
    pub mode: EstimatorMode,
}

impl EstimateSet {
    pub fn k(&self) -> usize {
        self.pairs.len()
    }
}

/// Spectra produced along the way, for export.
#[derive(Debug, Clone)]
pub struct JdfSpectra {
    /// The two frequency scans (XX block, then XbarXbar block).
    pub freq: Vec<PseudoSpectrum>,
    /// One DOA scan per estimated frequency, ascending.
    pub doa: Vec<PseudoSpectrum>,
}

pub(crate) fn jdf4ba_tagged(
    cov: &CovarianceSet,
    lags: &[u32],
    constants: &ArrayConstants,
    k: usize,
    grids: &ScanGrids,
    mode: EstimatorMode,
) -> Result<(EstimateSet, JdfSpectra)> {
    let m = lags.len();
    if cov.m() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: cov.m(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidScenario("K must be >= 1".into()));
    }
    if k >= m {
        return Err(Error::KTooLarge { k, dim: m });
    }

    // frequencies, twice, from the two diagonal blocks
    let g1 = noise_subspace(&eigh(&cov.block(BlockId::XX))?, k)?;
    let g2 = noise_subspace(&eigh(&cov.block(BlockId::XbarXbar))?, k)?;
    let p1 = freq_pseudospectrum(&g1, lags, constants, &grids.freq_hz)?;
    let p2 = freq_pseudospectrum(&g2, lags, constants, &grids.freq_hz)?;
    let peaks1 = pick_peaks_detailed(&p1, k)?;
    let peaks2 = pick_peaks_detailed(&p2, k)?;
    // both lists ascending; averaging paired entries keeps the order
    let f_hat: Vec<Peak> = peaks1
        .iter()
        .zip(&peaks2)
        .map(|(a, b)| Peak {
            x: 0.5 * (a.x + b.x),
            height: 0.5 * (a.height + b.height),
        })
        .collect();

    // DOA per frequency from the full stacked covariance
    let u = noise_subspace(&eigh(cov.full())?, k)?;
    let mut pairs = Vec::with_capacity(k);
    let mut doa_specs = Vec::with_capacity(k);
    for fp in &f_hat {
        let spec = doa_pseudospectrum(&u, lags, constants, fp.x, &grids.doa_deg)?;
        let peak = argmax_refined(&spec)?;
        pairs.push(EstimatePair {
            f_hz: fp.x,
            theta_deg: peak.x.clamp(-90.0, 90.0),
            freq_peak: fp.height,
            doa_peak: peak.height,
        });
        doa_specs.push(spec);
    }
    pairs.sort_by(|a, b| a.f_hz.partial_cmp(&b.f_hz).unwrap());

    Ok((
        EstimateSet { pairs, mode },
        JdfSpectra {
            freq: vec![p1, p2],
            doa: doa_specs,
        },
    ))
}

/// Joint frequency/DOA estimation on a stacked covariance with the given
/// manifold lags. `k` must be at most `lags.len() - 1`.
pub fn jdf4ba(
    cov: &CovarianceSet,
    lags: &[u32],
    constants: &ArrayConstants,
    k: usize,
    grids: &ScanGrids,
) -> Result<EstimateSet> {
    jdf4ba_tagged(cov, lags, constants, k, grids, EstimatorMode::Plain).map(|(e, _)| e)
}

/// Same as [`jdf4ba`] but also returns the scanned spectra.
pub fn jdf4ba_with_spectra(
    cov: &CovarianceSet,
    lags: &[u32],
    constants: &ArrayConstants,
    k: usize,
    grids: &ScanGrids,
) -> Result<(EstimateSet, JdfSpectra)> {
    jdf4ba_tagged(cov, lags, constants, k, grids, EstimatorMode::Plain)
}
