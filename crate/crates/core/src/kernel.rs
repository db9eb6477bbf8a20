//! Radially symmetric convolution kernels and their exact covariances.

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Smooth transition used by the bump: `S(u) = g(u) / (g(u) + g(1-u))`
/// with `g(u) = exp(-1/u)` for `u > 0`.
fn smooth_step(u: f64) -> f64 {
    fn g(u: f64) -> f64 {
        if u > 0.0 {
            (-1.0 / u).exp()
        } else {
            0.0
        }
    }
    let a = g(u);
    let b = g(1.0 - u);
    a / (a + b)
}

/// C-infinity bump: 1 on radius <= 1/4, 0 on radius >= 1/2.
pub fn bump(radius: f64) -> f64 {
    let t = radius.abs();
    if t <= 0.25 {
        1.0
    } else if t >= 0.5 {
        0.0
    } else {
        smooth_step((0.5 - t) / 0.25)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    BargmannFock,
    PolynomialDecay,
}

/// A nonnegative, radially symmetric convolution kernel, optionally
/// multiplied by the bump `x -> bump(|x|/r)` (truncation radius `r`).
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub kind: KernelKind,
    pub dim: usize,
    /// Decay exponent, polynomial kind only.
    pub beta: Option<f64>,
    pub truncation: Option<f64>,
    /// Normalization so that (q*q)(0) = 1 for the untruncated profile.
    amplitude: f64,
}

/// Relative level below the peak treated as numerically zero support.
const SUPPORT_CUTOFF: f64 = 1e-12;

pub fn make_kernel(
    kind: KernelKind,
    dim: usize,
    beta: Option<f64>,
    truncation: Option<f64>,
) -> Result<Kernel, CoreError> {
    if dim < 2 || dim > 3 {
        return Err(CoreError::invalid("dim", "must be 2 or 3"));
    }
    if let Some(r) = truncation {
        if !(r > 1.0) {
            return Err(CoreError::invalid("truncation", "must be > 1"));
        }
    }
    let (beta, amplitude) = match kind {
        KernelKind::BargmannFock => (None, (2.0 / std::f64::consts::PI).powf(dim as f64 / 4.0)),
        KernelKind::PolynomialDecay => {
            let b = beta.ok_or_else(|| CoreError::invalid("beta", "required for polynomial-decay"))?;
            if !(b > dim as f64) {
                return Err(CoreError::invalid("beta", "must exceed dim"));
            }
            // Normalize so int q^2 = (q*q)(0) = 1.
            let sq = radial_integral(dim, |r| (1.0 + r * r).powf(-b));
            (Some(b), 1.0 / sq.sqrt())
        }
    };
    Ok(Kernel { kind, dim, beta, truncation, amplitude })
}

/// `int_{R^d} g(|x|) dx` by radial quadrature with the substitution
/// r = t/(1-t) mapping [0,1) to [0,inf).
fn radial_integral(dim: usize, g: impl Fn(f64) -> f64) -> f64 {
    let surface = match dim {
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => unreachable!(),
    };
    let n = 20_000;
    let dt = 1.0 / n as f64;
    let mut sum = 0.0;
    for i in 0..n {
        // midpoint rule, integrand vanishes fast enough at both ends
        let t = (i as f64 + 0.5) * dt;
        let r = t / (1.0 - t);
        let jac = 1.0 / ((1.0 - t) * (1.0 - t));
        sum += g(r) * r.powi(dim as i32 - 1) * jac;
    }
    surface * sum * dt
}

impl Kernel {
    /// Profile value q(|x|) at the given radius, truncation included.
    pub fn profile(&self, radius: f64) -> f64 {
        let base = match self.kind {
            KernelKind::BargmannFock => self.amplitude * (-radius * radius).exp(),
            KernelKind::PolynomialDecay => {
                let b = self.beta.unwrap();
                self.amplitude * (1.0 + radius * radius).powf(-b / 2.0)
            }
        };
        match self.truncation {
            Some(r) => base * bump(radius / r),
            None => base,
        }
    }

    pub fn peak(&self) -> f64 {
        self.profile(0.0)
    }

    /// Radius beyond which the profile is below `1e-12 * peak` (or exactly
    /// zero for truncated kernels).
    pub fn support_radius(&self) -> f64 {
        let untruncated = match self.kind {
            KernelKind::BargmannFock => (-SUPPORT_CUTOFF.ln()).sqrt(),
            KernelKind::PolynomialDecay => {
                let b = self.beta.unwrap();
                (SUPPORT_CUTOFF.powf(-2.0 / b) - 1.0).max(0.0).sqrt()
            }
        };
        match self.truncation {
            Some(r) => untruncated.min(r / 2.0),
            None => untruncated,
        }
    }

    /// Exact covariance `(q*q)(v)` of the field `q * W`. Untruncated
    /// Bargmann-Fock uses the closed form `exp(-|v|^2 / 2)`; everything else
    /// falls back to tensor-grid quadrature of the convolution integral.
    pub fn covariance_exact(&self, displacement: &[f64]) -> f64 {
        let v_norm2: f64 = displacement.iter().map(|x| x * x).sum();
        if self.kind == KernelKind::BargmannFock && self.truncation.is_none() {
            return (-0.5 * v_norm2).exp();
        }
        // Integrate q(y) q(v - y) dy over the support of q.
        let s = self.support_radius().min(50.0 + 5.0 * v_norm2.sqrt());
        let n: usize = if self.dim == 2 { 601 } else { 181 };
        let h = 2.0 * s / (n as f64 - 1.0);
        // Composite Simpson weights per axis (n odd).
        let w1 = |i: usize| -> f64 {
            if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            }
        };
        let mut total = 0.0;
        let mut idx = vec![0usize; self.dim];
        'outer: loop {
            let mut w = 1.0;
            let mut r1 = 0.0;
            let mut r2 = 0.0;
            for k in 0..self.dim {
                let y = -s + h * idx[k] as f64;
                w *= w1(idx[k]);
                r1 += y * y;
                let dy = displacement[k] - y;
                r2 += dy * dy;
            }
            total += w * self.profile(r1.sqrt()) * self.profile(r2.sqrt());
            let mut k = self.dim;
            loop {
                if k == 0 {
                    break 'outer;
                }
                k -= 1;
                if idx[k] < n - 1 {
                    idx[k] += 1;
                    for j in k + 1..self.dim {
                        idx[j] = 0;
                    }
                    break;
                }
            }
        }
        total * (h / 3.0).powi(self.dim as i32)
    }
}
