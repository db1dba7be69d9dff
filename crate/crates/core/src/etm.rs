//! Expansion of the time-delay manifold: vectorize the covariance blocks,
//! rearrange the Khatri-Rao virtual array onto the contiguous lag axis, and
//! rebuild a rank-restored 2Q x 2Q virtual covariance.
//!
//! The entry `(j, i)` of a diagonal covariance block carries the phase
//! `e^{-j omega (c_j - c_i)}`; collecting entries by lag `c_j - c_i` turns the
//! M^2 vectorized entries into samples of a length-(2Q-1) virtual manifold
//! whenever the difference coarray is hole-free. Sliding a Q-window over that
//! vector (the extraction stack) rebuilds a full-rank covariance on the
//! virtual uniform lags `0..Q`, which raises the number of resolvable sources
//! from M-1 to Q-1.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::covariance::{hermitian_symmetrize, BlockId, CovarianceSet};
use crate::error::{Error, Result};
use crate::scenario::{validate_pattern, ArrayConstants, DelayPattern, EstimatorMode};
use crate::subspace::{jdf4ba_tagged, EstimateSet, JdfSpectra, ScanGrids};

/// Linear operator mapping an M^2 vectorized block onto the 2Q-1 contiguous
/// virtual lags, averaging duplicate coarray entries. Row p corresponds to
/// the manifold entry `e^{j omega (Q-1-p)}`.
#[derive(Debug, Clone)]
pub struct XiOperator {
    m: usize,
    q: usize,
    /// Source indices (column-stacked block entries) contributing to each row.
    rows: Vec<Vec<usize>>,
}

impl XiOperator {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Number of virtual lags, `2Q - 1`.
    pub fn output_len(&self) -> usize {
        2 * self.q - 1
    }

    /// Applies the operator: entry p is the mean of the source entries whose
    /// pair (i, j) satisfies `c_i - c_j = Q-1-p`.
    pub fn apply(&self, r: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if r.len() != self.m * self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m * self.m,
                got: r.len(),
            });
        }
        Ok(DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|sources| {
                let sum: Complex64 = sources.iter().map(|&s| r[s]).sum();
                sum / sources.len() as f64
            }),
        ))
    }
}

/// Builds the rearrangement operator for a contiguous-coarray pattern.
pub fn build_xi(pattern: &DelayPattern) -> Result<XiOperator> {
    let q = validate_pattern(pattern)? as usize;
    let m = pattern.m();
    let coeffs = pattern.coeffs();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); 2 * q - 1];
    // source index i*M + j holds conj(a[i]) * a[j] = e^{j omega (c_i - c_j)},
    // i.e. column i, row j of the column-stacked block
    for (i, &ci) in coeffs.iter().enumerate() {
        for (j, &cj) in coeffs.iter().enumerate() {
            let lag = ci as i64 - cj as i64;
            let p = (q as i64 - 1 - lag) as usize;
            rows[p].push(i * m + j);
        }
    }
    debug_assert!(rows.iter().all(|r| !r.is_empty()));
    Ok(XiOperator { m, q, rows })
}

pub(crate) fn vec_columns(block: &DMatrix<Complex64>) -> DVector<Complex64> {
    DVector::from_column_slice(block.as_slice())
}

/// Column-vectorizations of the four blocks, in order
/// `[XX, XXbar, XbarX, XbarXbar]`. The diagonal blocks keep their embedded
/// noise term; nothing is subtracted.
pub fn vectorize_blocks(cov: &CovarianceSet) -> [DVector<Complex64>; 4] {
    [
        vec_columns(&cov.block(BlockId::XX)),
        vec_columns(&cov.block(BlockId::XXbar)),
        vec_columns(&cov.block(BlockId::XbarX)),
        vec_columns(&cov.block(BlockId::XbarXbar)),
    ]
}

/// Applies the rearrangement to all four vectorized blocks, yielding the
/// virtual-lag vectors ordered lag `Q-1` down to `-(Q-1)`.
pub fn virtual_vectors(
    xi: &XiOperator,
    vecs: &[DVector<Complex64>; 4],
) -> Result<[DVector<Complex64>; 4]> {
    Ok([
        xi.apply(&vecs[0])?,
        xi.apply(&vecs[1])?,
        xi.apply(&vecs[2])?,
        xi.apply(&vecs[3])?,
    ])
}

/// Hermitian 2Q x 2Q covariance on the virtual uniform lags.
#[derive(Debug, Clone)]
pub struct VirtualCovariance {
    cov: CovarianceSet,
    q: usize,
}

impl VirtualCovariance {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn as_cov(&self) -> &CovarianceSet {
        &self.cov
    }

    pub fn into_cov(self) -> CovarianceSet {
        self.cov
    }

    /// Integer lags `0..Q` of the virtual manifold.
    pub fn lags(&self) -> Vec<u32> {
        (0..self.q as u32).collect()
    }
}

/// Stacks the Q-window extractions of each virtual-lag vector into Q x Q
/// blocks (columns in reverse window order), assembles the 2Q x 2Q layout and
/// Hermitian-symmetrizes it.
pub fn assemble_virtual(z: &[DVector<Complex64>; 4], q: usize) -> Result<VirtualCovariance> {
    for v in z {
        if v.len() != 2 * q - 1 {
            return Err(Error::DimensionMismatch {
                expected: 2 * q - 1,
                got: v.len(),
            });
        }
    }
    let block = |v: &DVector<Complex64>| -> DMatrix<Complex64> {
        // column j holds the window starting at lag index Q-1-j
        DMatrix::from_fn(q, q, |r, j| v[q - 1 - j + r])
    };
    let blocks = [block(&z[0]), block(&z[1]), block(&z[2]), block(&z[3])];
    let mut full = DMatrix::from_element(2 * q, 2 * q, Complex64::new(0.0, 0.0));
    for r in 0..q {
        for c in 0..q {
            full[(r, c)] = blocks[0][(r, c)];
            full[(r, q + c)] = blocks[1][(r, c)];
            full[(q + r, c)] = blocks[2][(r, c)];
            full[(q + r, q + c)] = blocks[3][(r, c)];
        }
    }
    hermitian_symmetrize(&mut full);
    Ok(VirtualCovariance {
        cov: CovarianceSet::from_full(full, 0)?,
        q,
    })
}

/// Full expansion chain: vectorize, rearrange, assemble.
pub fn expand(cov: &CovarianceSet, pattern: &DelayPattern) -> Result<VirtualCovariance> {
    let xi = build_xi(pattern)?;
    if cov.m() != pattern.m() {
        return Err(Error::DimensionMismatch {
            expected: pattern.m(),
            got: cov.m(),
        });
    }
    let vecs = vectorize_blocks(cov);
    let z = virtual_vectors(&xi, &vecs)?;
    assemble_virtual(&z, xi.q())
}

/// Joint estimation through the virtual covariance; identifies up to Q-1
/// sources from M branches.
pub fn jdf4ba_etm(
    cov: &CovarianceSet,
    pattern: &DelayPattern,
    constants: &ArrayConstants,
    k: usize,
    grids: &ScanGrids,
) -> Result<EstimateSet> {
    jdf4ba_etm_with_spectra(cov, pattern, constants, k, grids).map(|(e, _)| e)
}

pub fn jdf4ba_etm_with_spectra(
    cov: &CovarianceSet,
    pattern: &DelayPattern,
    constants: &ArrayConstants,
    k: usize,
    grids: &ScanGrids,
) -> Result<(EstimateSet, JdfSpectra)> {
    let q = validate_pattern(pattern)? as usize;
    if k >= q {
        return Err(Error::KTooLarge { k, dim: q });
    }
    let vc = expand(cov, pattern)?;
    let lags = vc.lags();
    jdf4ba_tagged(vc.as_cov(), &lags, constants, k, grids, EstimatorMode::Etm)
}
