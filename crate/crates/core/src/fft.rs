//! Multi-dimensional complex FFT on row-major arrays, one axis at a time.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Round up to the next 5-smooth size so the planner avoids Bluestein.
pub fn next_fast_size(mut n: usize) -> usize {
    loop {
        let mut m = n;
        for p in [2usize, 3, 5] {
            while m % p == 0 {
                m /= p;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

/// In-place FFT along every axis of a row-major array (axis 0 slowest).
pub fn fftn(data: &mut [Complex<f64>], dims: &[usize], inverse: bool) {
    let total: usize = dims.iter().product();
    assert_eq!(data.len(), total);
    let mut planner = FftPlanner::<f64>::new();
    for axis in 0..dims.len() {
        let n = dims[axis];
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let stride: usize = dims[axis + 1..].iter().product();
        let block = n * stride;
        let mut line = vec![Complex::new(0.0, 0.0); n];
        for base in (0..total).step_by(block) {
            for off in 0..stride {
                for i in 0..n {
                    line[i] = data[base + off + i * stride];
                }
                fft.process(&mut line);
                for i in 0..n {
                    data[base + off + i * stride] = line[i];
                }
            }
        }
    }
    if inverse {
        let scale = 1.0 / total as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}
