//! Discrete Fourier transform of arbitrary length.
//!
//! Power-of-two lengths use an iterative radix-2 transform; every other
//! length goes through Bluestein's chirp-z identity on top of it.
//! Transforms are unnormalised: `forward` computes `Σ_j x_j e^{−2πijk/N}`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

pub fn forward(data: &mut [Complex64]) {
    transform(data, false);
}

/// Inverse transform without the `1/N` factor.
pub fn inverse(data: &mut [Complex64]) {
    transform(data, true);
}

fn transform(data: &mut [Complex64], inverse: bool) {
    let n = data.len();
    if n <= 1 {
        return;
    }
    if n.is_power_of_two() {
        radix2(data, inverse);
    } else {
        bluestein(data, inverse);
    }
}

fn radix2(data: &mut [Complex64], inverse: bool) {
    let n = data.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * PI / len as f64;
        let half = len / 2;
        // Twiddles computed directly rather than by recurrence to keep
        // the error at O(ε log N).
        let twiddles: Vec<Complex64> =
            (0..half).map(|k| Complex64::new(libm::cos(ang * k as f64), libm::sin(ang * k as f64))).collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let u = data[start + k];
                let v = data[start + k + half] * twiddles[k];
                data[start + k] = u + v;
                data[start + k + half] = u - v;
            }
        }
        len <<= 1;
    }
}

fn bluestein(data: &mut [Complex64], inverse: bool) {
    let n = data.len();
    let m = (2 * n - 1).next_power_of_two();
    let sign = if inverse { 1.0 } else { -1.0 };
    let two_n = 2 * n as u64;
    // k² mod 2N keeps the chirp phase exact for large k.
    let chirp: Vec<Complex64> = (0..n as u64)
        .map(|k| {
            let phase = sign * PI * ((k * k) % two_n) as f64 / n as f64;
            Complex64::new(libm::cos(phase), libm::sin(phase))
        })
        .collect();
    let mut a = vec![Complex64::new(0.0, 0.0); m];
    for k in 0..n {
        a[k] = data[k] * chirp[k];
    }
    let mut b = vec![Complex64::new(0.0, 0.0); m];
    b[0] = chirp[0].conj();
    for k in 1..n {
        b[k] = chirp[k].conj();
        b[m - k] = chirp[k].conj();
    }
    radix2(&mut a, false);
    radix2(&mut b, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    radix2(&mut a, true);
    let scale = 1.0 / m as f64;
    for k in 0..n {
        data[k] = a[k] * scale * chirp[k];
    }
}

/// Angular frequency of bin `k` on a periodic domain of length `length`
/// sampled at `n` points.
pub fn angular_frequency(k: usize, n: usize, length: f64) -> f64 {
    let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    2.0 * PI * signed / length
}
