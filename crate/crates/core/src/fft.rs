//! Cartesian 2D FFT.
//!
//! Forward uses `exp(-2iπ·)` without scaling; inverse uses `exp(+2iπ·)` and carries the
//! `1/(H·W)` factor, so `inverse(forward(x)) == x` and `‖forward(x)‖² = H·W·‖x‖²`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::types::ComplexImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Reusable row/column FFT plans for one grid shape.
#[derive(Clone)]
pub struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Unnormalized transform in place on a row-major `height × width` buffer.
    ///
    /// Neither direction is scaled here; callers apply `1/(H·W)` where required.
    pub fn process_unscaled(&self, data: &mut [Complex64], direction: Direction) {
        assert_eq!(data.len(), self.height * self.width);
        let (rows, cols) = match direction {
            Direction::Forward => (&self.row_fwd, &self.col_fwd),
            Direction::Inverse => (&self.row_inv, &self.col_inv),
        };
        // Rows are contiguous, so one call handles all of them.
        rows.process(data);

        let mut column = vec![Complex64::new(0.0, 0.0); self.height];
        let mut scratch = vec![Complex64::new(0.0, 0.0); cols.get_inplace_scratch_len()];
        for c in 0..self.width {
            for r in 0..self.height {
                column[r] = data[r * self.width + c];
            }
            cols.process_with_scratch(&mut column, &mut scratch);
            for r in 0..self.height {
                data[r * self.width + c] = column[r];
            }
        }
    }

    /// Transform following the project convention (inverse scaled by `1/(H·W)`).
    pub fn process(&self, data: &mut [Complex64], direction: Direction) {
        self.process_unscaled(data, direction);
        if direction == Direction::Inverse {
            let scale = 1.0 / (self.height * self.width) as f64;
            data.iter_mut().for_each(|z| *z *= scale);
        }
    }
}

/// 2D DFT of an image with the project-wide normalization.
pub fn fft2(img: &ComplexImage, direction: Direction) -> ComplexImage {
    let (h, w) = img.shape();
    let mut data = img.data().to_vec();
    Fft2::new(h, w).process(&mut data, direction);
    ComplexImage::new(h, w, data).expect("FFT of a finite image is finite")
}
