//! n-dimensional DFT on the lattice, one axis at a time.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::LatticeSpec;

fn transform_axes(lattice: &LatticeSpec, data: &mut [Complex64], fft: &dyn Fft<f64>) {
    let m = lattice.pts_per_side();
    let n = lattice.dim();
    let total = data.len();
    let mut line = vec![Complex64::default(); m];
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    for axis in 0..n {
        let stride = m.pow((n - 1 - axis) as u32);
        let block = stride * m;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[base + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
}

/// Unnormalized forward DFT of a real field.
pub fn fft_forward(lattice: &LatticeSpec, values: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let fft = FftPlanner::new().plan_fft_forward(lattice.pts_per_side());
    transform_axes(lattice, &mut data, fft.as_ref());
    data
}

/// Inverse DFT including the `1/M^n` factor.
pub fn fft_inverse(lattice: &LatticeSpec, mut data: Vec<Complex64>) -> Vec<Complex64> {
    let fft = FftPlanner::new().plan_fft_inverse(lattice.pts_per_side());
    transform_axes(lattice, &mut data, fft.as_ref());
    let scale = 1.0 / data.len() as f64;
    for v in &mut data {
        *v *= scale;
    }
    data
}

/// Applies a real Fourier symbol (indexed like the DFT output) to a real field.
pub fn apply_symbol(lattice: &LatticeSpec, values: &[f64], symbol: &[f64]) -> Vec<f64> {
    let mut hat = fft_forward(lattice, values);
    for (v, &s) in hat.iter_mut().zip(symbol) {
        *v *= s;
    }
    fft_inverse(lattice, hat).into_iter().map(|c| c.re).collect()
}

/// Convolution kernel `K` of a symbol: `(S u)(x) = sum_y K[(x - y) mod M] u(y)`.
pub fn convolution_kernel(lattice: &LatticeSpec, symbol: &[f64]) -> Vec<f64> {
    let data = symbol.iter().map(|&s| Complex64::new(s, 0.0)).collect();
    fft_inverse(lattice, data).into_iter().map(|c| c.re).collect()
}
