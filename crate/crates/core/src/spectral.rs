//! Thin 2D FFT wrapper over `rustfft`.

use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

/// In-place 2D FFT of a row-major `rows × cols` buffer. Unnormalized in both
/// directions.
pub(crate) fn fft2(data: &mut [Complex64], rows: usize, cols: usize, direction: FftDirection) {
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft(cols, direction);
    for row in data.chunks_exact_mut(cols) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft(rows, direction);
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for j in 0..cols {
        for i in 0..rows {
            column[i] = data[i * cols + j];
        }
        col_fft.process(&mut column);
        for i in 0..rows {
            data[i * cols + j] = column[i];
        }
    }
}

/// Signed frequency in cycles per sample for FFT bin `k` of an `n`-point
/// transform.
#[inline]
pub(crate) fn fft_freq(k: usize, n: usize) -> f64 {
    let k = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    k / n as f64
}

/// Magnitudes of the one-sided spectrum of a real sequence, bins `0..=n/2`.
pub(crate) fn magnitude_spectrum(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new()
        .plan_fft_forward(n)
        .process(&mut buf);
    buf[..=n / 2].iter().map(|c| c.norm()).collect()
}
