//! Grid transforms between values at Chebyshev-Lobatto points and
//! first-kind Chebyshev coefficients, plus Clenshaw-Curtis quadrature weights.
//!
//! Points are `t_j = cos(pi j / n)` for `j = 0..=n`, ordered from `1` down
//! to `-1`. Both transforms go through a length-`2n` FFT of the mirrored
//! sequence, so they cost `O(n log n)` for any `n`.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use std::cell::RefCell;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_in_place(buf: &mut [Complex<f64>]) {
    PLANNER.with(|planner| {
        let fft = planner.borrow_mut().plan_fft_forward(buf.len());
        fft.process(buf);
    });
}

/// Chebyshev-Lobatto points `cos(pi j / n)`, `j = 0..=n`, on `[-1, 1]`.
pub fn lobatto_points(n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![1.0];
    }
    let nf = n as f64;
    (0..=n)
        .map(|j| (std::f64::consts::PI * j as f64 / nf).cos())
        .collect()
}

/// Interpolation coefficients of the polynomial matching `vals` at the
/// Lobatto points of degree `vals.len() - 1`.
pub fn vals_to_coeffs(vals: &[f64]) -> Vec<f64> {
    let n = vals.len() - 1;
    if n == 0 {
        return vals.to_vec();
    }
    // Mirror to an even sequence of length 2n; its DFT is real and equals
    // twice the DCT-I of the values.
    let mut buf: Vec<Complex<f64>> = Vec::with_capacity(2 * n);
    for &v in vals.iter() {
        buf.push(Complex::new(v, 0.0));
    }
    for j in (1..n).rev() {
        buf.push(Complex::new(vals[j], 0.0));
    }
    fft_in_place(&mut buf);
    let nf = n as f64;
    let mut coeffs = Vec::with_capacity(n + 1);
    coeffs.push(buf[0].re / (2.0 * nf));
    coeffs.extend(buf[1..n].iter().map(|c| c.re / nf));
    coeffs.push(buf[n].re / (2.0 * nf));
    coeffs
}

/// Values at the Lobatto points of degree `coeffs.len() - 1`.
pub fn coeffs_to_vals(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return coeffs.to_vec();
    }
    let c0 = coeffs[0];
    let cn = coeffs[n];
    let mut buf: Vec<Complex<f64>> = Vec::with_capacity(2 * n);
    for &c in coeffs.iter() {
        buf.push(Complex::new(c, 0.0));
    }
    for k in (1..n).rev() {
        buf.push(Complex::new(coeffs[k], 0.0));
    }
    fft_in_place(&mut buf);
    (0..=n)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            0.5 * (buf[j].re + c0 + sign * cn)
        })
        .collect()
}

/// Clenshaw-Curtis weights for the `npts`-point Lobatto grid on `[-1, 1]`.
/// Exact for polynomials up to the grid degree.
pub fn cc_weights(npts: usize) -> Vec<f64> {
    assert!(npts >= 1);
    let n = npts - 1;
    if n == 0 {
        return vec![2.0];
    }
    let nf = n as f64;
    let half = n / 2;
    let mut w = Vec::with_capacity(npts);
    for j in 0..=n {
        let mut sum = 0.0;
        for k in 1..=half {
            let b = if 2 * k == n { 1.0 } else { 2.0 };
            sum += b / ((4 * k * k - 1) as f64)
                * (2.0 * std::f64::consts::PI * (k * j) as f64 / nf).cos();
        }
        let c = if j == 0 || j == n { 1.0 } else { 2.0 };
        w.push(c / nf * (1.0 - sum));
    }
    w
}
