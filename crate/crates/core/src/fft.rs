//! Minimal radix-2 FFT, used for band-limited noise synthesis and spectral tests.

use num_complex::Complex64;

/// In-place forward DFT, unnormalized. Length must be a power of two.
pub fn fft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }
    // bit-reversal permutation
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * std::f64::consts::PI / len as f64;
        let wlen = Complex64::from_polar(1.0, ang);
        for start in (0..n).step_by(len) {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let u = buf[start + k];
                let v = buf[start + k + len / 2] * w;
                buf[start + k] = u + v;
                buf[start + k + len / 2] = u - v;
                w *= wlen;
            }
        }
        len <<= 1;
    }
}

/// In-place inverse DFT with 1/N normalization.
pub fn ifft_in_place(buf: &mut [Complex64]) {
    let n = buf.len() as f64;
    for v in buf.iter_mut() {
        *v = v.conj();
    }
    fft_in_place(buf);
    for v in buf.iter_mut() {
        *v = v.conj() / n;
    }
}

pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impulse_is_flat() {
        let mut buf = vec![Complex64::new(0.0, 0.0); 8];
        buf[0] = Complex64::new(1.0, 0.0);
        fft_in_place(&mut buf);
        for v in &buf {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn single_tone_lands_in_one_bin() {
        let n = 64;
        let mut buf: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * 5.0 * i as f64 / n as f64))
            .collect();
        fft_in_place(&mut buf);
        for (b, v) in buf.iter().enumerate() {
            let expect = if b == 5 { n as f64 } else { 0.0 };
            assert!((v.norm() - expect).abs() < 1e-9, "bin {b}: {v}");
        }
    }

    #[test]
    fn roundtrip() {
        let n = 128;
        let orig: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut buf = orig.clone();
        fft_in_place(&mut buf);
        ifft_in_place(&mut buf);
        for (a, b) in orig.iter().zip(&buf) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
