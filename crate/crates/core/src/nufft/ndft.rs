//! Exact non-uniform DFT, `O(H·W·M)`. Reference for the gridding transform.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::types::{ComplexImage, KSpaceSamples, Trajectory};

/// Centered pixel coordinate `n - N/2`.
pub(crate) fn centered(n: usize, len: usize) -> f64 {
    n as f64 - (len / 2) as f64
}

fn axis_phasors(k: f64, len: usize, sign: f64) -> Vec<Complex64> {
    (0..len)
        .map(|n| Complex64::from_polar(1.0, sign * 2.0 * PI * k * centered(n, len)))
        .collect()
}

/// `y_i = Σ_n x_n exp(-2iπ k_i·r_n)`.
pub fn ndft_forward(img: &ComplexImage, traj: &Trajectory) -> KSpaceSamples {
    let (h, w) = img.shape();
    let values = traj
        .points()
        .iter()
        .map(|&[kx, ky]| {
            let ex = axis_phasors(kx, w, -1.0);
            let ey = axis_phasors(ky, h, -1.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for (r, row) in img.data().chunks_exact(w).enumerate() {
                let inner: Complex64 = row.iter().zip(&ex).map(|(x, e)| x * e).sum();
                acc += ey[r] * inner;
            }
            acc
        })
        .collect();
    KSpaceSamples::new(values).expect("finite input gives finite samples")
}

/// Conjugate transpose of [`ndft_forward`]: `x_n = Σ_i y_i exp(+2iπ k_i·r_n)`.
pub fn ndft_adjoint(
    y: &KSpaceSamples,
    traj: &Trajectory,
    shape: (usize, usize),
) -> Result<ComplexImage> {
    if y.len() != traj.len() {
        return Err(Error::Dimension {
            expected: traj.len(),
            got: y.len(),
        });
    }
    let (h, w) = shape;
    let mut out = vec![Complex64::new(0.0, 0.0); h * w];
    for (&yi, &[kx, ky]) in y.values().iter().zip(traj.points()) {
        let ex = axis_phasors(kx, w, 1.0);
        let ey = axis_phasors(ky, h, 1.0);
        for (r, row) in out.chunks_exact_mut(w).enumerate() {
            let a = yi * ey[r];
            for (px, e) in row.iter_mut().zip(&ex) {
                *px += a * e;
            }
        }
    }
    ComplexImage::new(h, w, out)
}
