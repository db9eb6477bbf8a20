//! Stationary Gaussian field synthesis by discrete white-noise convolution.
//!
//! The stored white noise is plain iid N(0,1); the quadrature factor
//! `h^{d/2}` is applied inside [`convolve_field`] so the same noise can be
//! reused across kernels and spacings. Convolution is zero-padded so no
//! wraparound contamination reaches the output, and [`sample_smooth_field`]
//! additionally samples noise on an enlarged grid so the cropped result has
//! exactly stationary statistics over the whole requested domain.

use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;

use crate::error::CoreError;
use crate::fft::{fftn, next_fast_size};
use crate::grid::{FieldKind, Grid, GridField};
use crate::kernel::Kernel;
use crate::rng::RngState;

/// Hard cap on padded FFT cells per trial (~1.6 GiB of complex f64).
const MAX_FFT_CELLS: usize = 100_000_000;

pub fn sample_white_noise(grid: &Grid, rng: &RngState) -> GridField {
    let mut r = rng.rng();
    let n = grid.num_cells();
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(StandardNormal.sample(&mut r));
    }
    GridField {
        grid: grid.clone(),
        values,
        kind: FieldKind::WhiteNoise,
    }
}

/// Zero-padded fast convolution: `f(x_i) = h^{d/2} sum_j q(x_i - x_j) xi_j`.
/// Output lives on the noise grid; cells within the kernel support radius of
/// the grid edge see implicit zero noise outside.
pub fn convolve_field(noise: &GridField, kernel: &Kernel) -> Result<GridField, CoreError> {
    if noise.kind != FieldKind::WhiteNoise {
        return Err(CoreError::invalid("noise", "kind must be white-noise"));
    }
    if kernel.dim != noise.grid.dim {
        return Err(CoreError::invalid("kernel", "dimension mismatch with noise grid"));
    }
    let grid = &noise.grid;
    let h = grid.spacing;
    let krad_cells = (kernel.support_radius() / h).ceil() as usize;
    let dims: Vec<usize> = grid
        .extent
        .iter()
        .map(|&n| next_fast_size(n + 2 * krad_cells))
        .collect();
    let total: usize = dims.iter().product();
    if total > MAX_FFT_CELLS {
        return Err(CoreError::Budget(format!(
            "padded convolution needs {total} cells (> {MAX_FFT_CELLS}); kernel support \
             {krad_cells} cells exceeds half the affordable padded domain"
        )));
    }
    // White noise scaled by the quadrature factor, zero elsewhere.
    let amp = h.powf(grid.dim as f64 / 2.0);
    let mut noise_c = vec![Complex::new(0.0, 0.0); total];
    for lin in 0..grid.num_cells() {
        let idx = grid.multi(lin);
        let mut padded_lin = 0;
        for (k, &i) in idx.iter().enumerate() {
            padded_lin = padded_lin * dims[k] + i;
        }
        noise_c[padded_lin] = Complex::new(amp * noise.values[lin], 0.0);
    }
    // Kernel samples in wrapped layout: offset o along each axis stored at
    // index o mod dims[k].
    let mut kern_c = vec![Complex::new(0.0, 0.0); total];
    let mut offset = vec![-(krad_cells as i64); grid.dim];
    'fill: loop {
        let mut lin = 0;
        let mut r2 = 0.0;
        for k in 0..grid.dim {
            let o = offset[k];
            let wrapped = o.rem_euclid(dims[k] as i64) as usize;
            lin = lin * dims[k] + wrapped;
            let x = o as f64 * h;
            r2 += x * x;
        }
        kern_c[lin] = Complex::new(kernel.profile(r2.sqrt()), 0.0);
        let mut k = grid.dim;
        loop {
            if k == 0 {
                break 'fill;
            }
            k -= 1;
            if offset[k] < krad_cells as i64 {
                offset[k] += 1;
                for j in k + 1..grid.dim {
                    offset[j] = -(krad_cells as i64);
                }
                break;
            }
        }
    }
    fftn(&mut noise_c, &dims, false);
    fftn(&mut kern_c, &dims, false);
    for (a, b) in noise_c.iter_mut().zip(&kern_c) {
        *a *= b;
    }
    fftn(&mut noise_c, &dims, true);
    let mut values = Vec::with_capacity(grid.num_cells());
    for lin in 0..grid.num_cells() {
        let idx = grid.multi(lin);
        let mut padded_lin = 0;
        for (k, &i) in idx.iter().enumerate() {
            padded_lin = padded_lin * dims[k] + i;
        }
        values.push(noise_c[padded_lin].re);
    }
    GridField::new(grid.clone(), values, FieldKind::Smooth)
}

/// Sample `f = q * W` on `grid` with correct stationary statistics
/// everywhere: the white noise is drawn on a grid enlarged by the kernel
/// support radius, convolved, and cropped back to `grid`.
pub fn sample_smooth_field(grid: &Grid, kernel: &Kernel, rng: &RngState) -> Result<GridField, CoreError> {
    let h = grid.spacing;
    let krad_cells = (kernel.support_radius() / h).ceil() as usize;
    let big_extent: Vec<usize> = grid.extent.iter().map(|&n| n + 2 * krad_cells).collect();
    let big_origin: Vec<f64> = grid
        .origin
        .iter()
        .map(|&o| o - h * krad_cells as f64)
        .collect();
    let big = Grid::new(big_extent, h, big_origin)?;
    let noise = sample_white_noise(&big, rng);
    let f_big = convolve_field(&noise, kernel)?;
    // Crop.
    let mut values = Vec::with_capacity(grid.num_cells());
    for lin in 0..grid.num_cells() {
        let mut idx = grid.multi(lin);
        for v in idx.iter_mut() {
            *v += krad_cells;
        }
        values.push(f_big.values[f_big.grid.linear(&idx)]);
    }
    GridField::new(grid.clone(), values, FieldKind::Smooth)
}

/// Block-constant discretization: each cell takes the value of the cell at
/// the center of its aligned eps-block (the unique point of eps*Z^d whose
/// half-open eps-box contains the cell center).
pub fn discretize(field: &GridField, eps: f64) -> Result<GridField, CoreError> {
    let grid = &field.grid;
    let h = grid.spacing;
    if !(eps > 0.0) {
        return Err(CoreError::invalid("eps", "must be positive"));
    }
    let ratio = eps / h;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
        return Err(CoreError::invalid("eps", "must be a positive integer multiple of grid spacing"));
    }
    let min_side = grid
        .extent
        .iter()
        .map(|&n| n as f64 * h)
        .fold(f64::INFINITY, f64::min);
    if eps > min_side {
        return Err(CoreError::invalid("eps", "larger than domain side"));
    }
    let mut values = vec![0.0; grid.num_cells()];
    for lin in 0..grid.num_cells() {
        let x = grid.point_of_linear(lin);
        let center: Vec<f64> = x.iter().map(|&xi| eps * (xi / eps + 0.5).floor()).collect();
        let center_cell = grid.clamped_cell(&center);
        values[lin] = field.values[grid.linear(&center_cell)];
    }
    Ok(GridField {
        grid: grid.clone(),
        values,
        kind: FieldKind::BlockConstant,
    })
}

/// `max over cells of |a - b|` inside the physical box `center +- half`.
pub fn sup_difference(a: &GridField, b: &GridField, center: &[f64], half: f64) -> Result<f64, CoreError> {
    if a.grid != b.grid {
        return Err(CoreError::invalid("fields", "must share a grid"));
    }
    let cells = a.grid.cells_in_box(center, half);
    if cells.is_empty() {
        return Err(CoreError::invalid("box", "empty intersection with grid"));
    }
    Ok(cells
        .iter()
        .map(|&c| (a.values[c] - b.values[c]).abs())
        .fold(0.0, f64::max))
}

/// Central finite-difference gradient at a cell, one-sided at the boundary.
pub fn gradient_at(field: &GridField, index: &[usize]) -> Vec<f64> {
    let grid = &field.grid;
    let h = grid.spacing;
    let mut g = Vec::with_capacity(grid.dim);
    for k in 0..grid.dim {
        let n = grid.extent[k];
        let i = index[k];
        let mut up = index.to_vec();
        let mut dn = index.to_vec();
        let denom = if i > 0 && i + 1 < n {
            up[k] = i + 1;
            dn[k] = i - 1;
            2.0 * h
        } else if i + 1 < n {
            up[k] = i + 1;
            h
        } else {
            dn[k] = i - 1;
            h
        };
        g.push((field.value_at(&up) - field.value_at(&dn)) / denom);
    }
    g
}

/// Finite-difference Hessian (row-major d x d), second-order central where
/// possible; mixed partials by differencing the gradient.
pub fn hessian_at(field: &GridField, index: &[usize]) -> Vec<f64> {
    let grid = &field.grid;
    let d = grid.dim;
    let h = grid.spacing;
    let mut hess = vec![0.0; d * d];
    for k in 0..d {
        let n = grid.extent[k];
        let i = index[k];
        if i > 0 && i + 1 < n {
            let mut up = index.to_vec();
            let mut dn = index.to_vec();
            up[k] = i + 1;
            dn[k] = i - 1;
            hess[k * d + k] =
                (field.value_at(&up) - 2.0 * field.value_at(index) + field.value_at(&dn)) / (h * h);
        } else {
            // one-sided second difference
            let (a, b, c) = if i + 2 < n {
                let mut u1 = index.to_vec();
                let mut u2 = index.to_vec();
                u1[k] = i + 1;
                u2[k] = i + 2;
                (field.value_at(index), field.value_at(&u1), field.value_at(&u2))
            } else {
                let mut d1 = index.to_vec();
                let mut d2 = index.to_vec();
                d1[k] = i - 1;
                d2[k] = i - 2;
                (field.value_at(index), field.value_at(&d1), field.value_at(&d2))
            };
            hess[k * d + k] = (c - 2.0 * b + a) / (h * h);
        }
    }
    for k in 0..d {
        for l in k + 1..d {
            // d/dx_l of the k-th gradient component
            let n = grid.extent[l];
            let i = index[l];
            let (gu, gd, denom) = if i > 0 && i + 1 < n {
                let mut up = index.to_vec();
                let mut dn = index.to_vec();
                up[l] = i + 1;
                dn[l] = i - 1;
                (gradient_at(field, &up)[k], gradient_at(field, &dn)[k], 2.0 * h)
            } else if i + 1 < n {
                let mut up = index.to_vec();
                up[l] = i + 1;
                (gradient_at(field, &up)[k], gradient_at(field, index)[k], h)
            } else {
                let mut dn = index.to_vec();
                dn[l] = i - 1;
                (gradient_at(field, index)[k], gradient_at(field, &dn)[k], h)
            };
            let v = (gu - gd) / denom;
            hess[k * d + l] = v;
            hess[l * d + k] = v;
        }
    }
    hess
}

/// Spectral norm of a small symmetric matrix by fixed-start power iteration.
pub fn sym_operator_norm(m: &[f64], d: usize) -> f64 {
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lambda = 0.0;
    for _ in 0..200 {
        // multiply by M twice so negative eigenvalues cannot cancel
        let mut w = vec![0.0; d];
        for i in 0..d {
            for j in 0..d {
                w[i] += m[i * d + j] * v[j];
            }
        }
        let mut u = vec![0.0; d];
        for i in 0..d {
            for j in 0..d {
                u[i] += m[i * d + j] * w[j];
            }
        }
        let norm: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm.sqrt();
        for i in 0..d {
            v[i] = u[i] / norm;
        }
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{make_kernel, KernelKind};
    use approx::assert_relative_eq;

    fn bf2() -> Kernel {
        make_kernel(KernelKind::BargmannFock, 2, None, None).unwrap()
    }

    #[test]
    fn white_noise_is_deterministic() {
        let g = Grid::centered(vec![16, 16], 0.5, &[0.0, 0.0]).unwrap();
        let a = sample_white_noise(&g, &RngState::new(1, 0));
        let b = sample_white_noise(&g, &RngState::new(1, 0));
        assert_eq!(a.values, b.values);
        let c = sample_white_noise(&g, &RngState::new(1, 1));
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn white_noise_moments() {
        let g = Grid::centered(vec![256, 256], 1.0, &[0.0, 0.0]).unwrap();
        let w = sample_white_noise(&g, &RngState::new(42, 0));
        let m = crate::stats::mean(&w.values);
        assert!(m.abs() < 4.0 / 256.0, "mean {m}");
        let v = crate::stats::variance(&w.values);
        assert!((v - 1.0).abs() < 0.05, "variance {v}");
    }

    #[test]
    fn zero_noise_gives_zero_field() {
        let g = Grid::centered(vec![32, 32], 0.25, &[0.0, 0.0]).unwrap();
        let zero = GridField::constant(g, 0.0, FieldKind::WhiteNoise);
        let f = convolve_field(&zero, &bf2()).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn point_mass_kernel_scales_noise() {
        // A truncated kernel whose support is below one cell acts as a point
        // mass of weight q(0).
        let g = Grid::centered(vec![16, 16], 1.0, &[0.0, 0.0]).unwrap();
        let noise = sample_white_noise(&g, &RngState::new(3, 0));
        let q = make_kernel(KernelKind::BargmannFock, 2, None, Some(1.5)).unwrap();
        // support radius = 0.75 < 1 cell, so only the zero offset contributes
        let f = convolve_field(&noise, &q).unwrap();
        let a = q.profile(0.0);
        for (fv, nv) in f.values.iter().zip(&noise.values) {
            assert_relative_eq!(*fv, a * nv, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn fft_convolution_matches_direct_sum() {
        let g = Grid::centered(vec![12, 12], 0.5, &[0.0, 0.0]).unwrap();
        let noise = sample_white_noise(&g, &RngState::new(7, 0));
        let q = make_kernel(KernelKind::BargmannFock, 2, None, None).unwrap();
        let f = convolve_field(&noise, &q).unwrap();
        let h = g.spacing;
        // brute-force f(x_i) = h^{d/2} sum_j q(|x_i - x_j|) xi_j
        for lin in [0usize, 5, 77, 143] {
            let xi = g.point_of_linear(lin);
            let mut acc = 0.0;
            for j in 0..g.num_cells() {
                let xj = g.point_of_linear(j);
                let r = ((xi[0] - xj[0]).powi(2) + (xi[1] - xj[1]).powi(2)).sqrt();
                acc += q.profile(r) * noise.values[j];
            }
            acc *= h;
            assert_relative_eq!(f.values[lin], acc, max_relative = 1e-8, epsilon = 1e-10);
        }
    }

    #[test]
    fn discretize_identity_cases() {
        let g = Grid::new(vec![8, 8], 1.0, vec![0.0, 0.0]).unwrap();
        let f = GridField::constant(g.clone(), 3.5, FieldKind::Smooth);
        let d = discretize(&f, 2.0).unwrap();
        assert_eq!(d.values, f.values);
        let vals: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let f2 = GridField::new(g.clone(), vals.clone(), FieldKind::Smooth).unwrap();
        let d2 = discretize(&f2, 1.0).unwrap();
        assert_eq!(d2.values, vals);
    }

    #[test]
    fn discretize_blocks_take_center_cell_value() {
        let g = Grid::new(vec![8, 8], 1.0, vec![0.0, 0.0]).unwrap();
        let vals: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let f = GridField::new(g.clone(), vals, FieldKind::Smooth).unwrap();
        let d = discretize(&f, 2.0).unwrap();
        assert_eq!(d.kind, FieldKind::BlockConstant);
        // enumerate the block map directly from the definition
        for lin in 0..64 {
            let x = g.point_of_linear(lin);
            let cx = 2.0 * (x[0] / 2.0 + 0.5).floor();
            let cy = 2.0 * (x[1] / 2.0 + 0.5).floor();
            let center = g.clamped_cell(&[cx, cy]);
            assert_eq!(d.values[lin], f.values[g.linear(&center)]);
        }
    }

    #[test]
    fn discretize_rejects_bad_eps() {
        let g = Grid::new(vec![8, 8], 0.5, vec![0.0, 0.0]).unwrap();
        let f = GridField::constant(g, 0.0, FieldKind::Smooth);
        assert!(discretize(&f, 0.75).is_err());
        assert!(discretize(&f, 100.0).is_err());
    }

    #[test]
    fn sup_difference_basics() {
        let g = Grid::centered(vec![8, 8], 1.0, &[0.0, 0.0]).unwrap();
        let a = GridField::constant(g.clone(), 1.0, FieldKind::Smooth);
        let b = GridField::constant(g.clone(), 1.0, FieldKind::Smooth);
        assert_eq!(sup_difference(&a, &b, &[0.0, 0.0], 2.0).unwrap(), 0.0);
        let c = GridField::constant(g, 1.0 - 0.25, FieldKind::Smooth);
        assert_relative_eq!(sup_difference(&a, &c, &[0.0, 0.0], 2.0).unwrap(), 0.25);
    }

    #[test]
    fn gradient_of_linear_field_is_exact() {
        let g = Grid::centered(vec![9, 9], 0.5, &[0.0, 0.0]).unwrap();
        let vals: Vec<f64> = (0..g.num_cells())
            .map(|lin| {
                let p = g.point_of_linear(lin);
                2.0 * p[0] - 3.0 * p[1]
            })
            .collect();
        let f = GridField::new(g.clone(), vals, FieldKind::Smooth).unwrap();
        for idx in [[0usize, 0], [4, 4], [8, 8], [0, 8]] {
            let grad = gradient_at(&f, &idx);
            assert_relative_eq!(grad[0], 2.0, epsilon = 1e-9);
            assert_relative_eq!(grad[1], -3.0, epsilon = 1e-9);
            let hess = hessian_at(&f, &idx);
            assert!(hess.iter().all(|v| v.abs() < 1e-8));
        }
    }

    #[test]
    fn operator_norm_of_known_matrix() {
        // eigenvalues 3 and -1
        let m = [1.0, 2.0, 2.0, 1.0];
        assert_relative_eq!(sym_operator_norm(&m, 2), 3.0, max_relative = 1e-6);
        assert_eq!(sym_operator_norm(&[0.0; 4], 2), 0.0);
    }
}
