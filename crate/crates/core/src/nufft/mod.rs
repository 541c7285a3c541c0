//! Type-2 NUFFT (image to non-uniform samples) and its exact adjoint.
//!
//! The forward chain is deapodize → zero-pad onto the `σ`-oversampled grid → FFT →
//! Kaiser-Bessel interpolation at each sample. The adjoint is the literal transpose of that
//! chain: spread with the same weights → unscaled inverse FFT → crop → deapodize. Both share
//! one precomputed [`NufftPlan`], so `⟨F x, y⟩ = ⟨x, Fᴴ y⟩` holds to rounding error.

mod kernel;
mod ndft;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft::{Direction, Fft2};
use crate::types::{ComplexImage, KSpaceSamples, Trajectory};

pub use kernel::{beatty_beta, bessel_i0, KernelSpec, TABLE_RESOLUTION};
pub use ndft::{ndft_adjoint, ndft_forward};

pub const DEFAULT_SIGMA: f64 = 2.0;
pub const DEFAULT_WIDTH: usize = 6;
pub const MIN_SIGMA: f64 = 1.25;

/// Fixed chunk count for parallel spreading; keeps the reduction order independent of
/// the thread pool size.
const SPREAD_CHUNKS: usize = 8;

/// Global scaling applied to both directions of the operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Matches [`ndft_forward`]: the `k = 0` sample is the plain pixel sum.
    #[default]
    None,
    /// Both directions scaled by `1/sqrt(H·W)`, so a full Cartesian plan is unitary.
    Ortho,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    /// Single-threaded reference path.
    #[default]
    Sequential,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NufftOptions {
    pub sigma: f64,
    pub width: usize,
    pub normalization: Normalization,
    pub mode: ExecMode,
}

impl Default for NufftOptions {
    fn default() -> Self {
        Self {
            sigma: DEFAULT_SIGMA,
            width: DEFAULT_WIDTH,
            normalization: Normalization::None,
            mode: ExecMode::Sequential,
        }
    }
}

/// Precomputed gridding state binding a trajectory to an image shape.
#[derive(Debug, Clone)]
pub struct NufftPlan {
    trajectory: Trajectory,
    grid_h: usize,
    grid_w: usize,
    os_h: usize,
    os_w: usize,
    sigma: f64,
    kernel: KernelSpec,
    /// `width²` oversampled-grid indices per sample.
    interp_index: Vec<usize>,
    /// Matching real interpolation weights.
    interp_weight: Vec<f64>,
    /// Per-pixel deapodization factor, shape `(grid_h, grid_w)`.
    deapod: Vec<f64>,
    /// Oversampled-grid position of every image pixel.
    pad_index: Vec<usize>,
    scale: f64,
    normalization: Normalization,
    mode: ExecMode,
    fft: Fft2,
}

impl PartialEq for NufftPlan {
    fn eq(&self, other: &Self) -> bool {
        self.trajectory == other.trajectory
            && (self.grid_h, self.grid_w, self.os_h, self.os_w)
                == (other.grid_h, other.grid_w, other.os_h, other.os_w)
            && self.sigma.to_bits() == other.sigma.to_bits()
            && self.kernel == other.kernel
            && self.interp_index == other.interp_index
            && bits_eq(&self.interp_weight, &other.interp_weight)
            && bits_eq(&self.deapod, &other.deapod)
            && self.pad_index == other.pad_index
            && self.scale.to_bits() == other.scale.to_bits()
            && self.normalization == other.normalization
    }
}

fn bits_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Builds an unnormalized sequential plan (matches [`ndft_forward`] in scale).
pub fn make_plan(
    traj: &Trajectory,
    grid_h: usize,
    grid_w: usize,
    sigma: f64,
    width: usize,
) -> Result<NufftPlan> {
    NufftPlan::new(
        traj.clone(),
        (grid_h, grid_w),
        NufftOptions {
            sigma,
            width,
            ..NufftOptions::default()
        },
    )
}

impl NufftPlan {
    pub fn new(traj: Trajectory, shape: (usize, usize), opts: NufftOptions) -> Result<Self> {
        let (grid_h, grid_w) = shape;
        if grid_h == 0 || grid_w == 0 {
            return Err(Error::Parameter(format!(
                "grid dimensions must be positive, got {grid_h}x{grid_w}"
            )));
        }
        if !(opts.sigma.is_finite() && opts.sigma >= MIN_SIGMA) {
            return Err(Error::Parameter(format!(
                "oversampling must be >= {MIN_SIGMA}, got {}",
                opts.sigma
            )));
        }
        if opts.width < 2 {
            return Err(Error::Parameter(format!(
                "kernel width must be >= 2, got {}",
                opts.width
            )));
        }
        // Re-validate: a Trajectory can only be built valid, but keep the plan's contract local.
        for (index, &[kx, ky]) in traj.points().iter().enumerate() {
            if !((-0.5..0.5).contains(&kx) && (-0.5..0.5).contains(&ky)) {
                return Err(Error::Domain { index, kx, ky });
            }
        }

        let kernel = KernelSpec::new(opts.width, opts.sigma)?;
        let os_h = (opts.sigma * grid_h as f64).round() as usize;
        let os_w = (opts.sigma * grid_w as f64).round() as usize;
        let width = opts.width;

        let taps = width * width;
        let mut interp_index = Vec::with_capacity(traj.len() * taps);
        let mut interp_weight = Vec::with_capacity(traj.len() * taps);
        let mut wy = vec![0.0; width];
        let mut wx = vec![0.0; width];
        let mut iy = vec![0usize; width];
        let mut ix = vec![0usize; width];
        for &[kx, ky] in traj.points() {
            axis_taps(&kernel, ky * os_h as f64, os_h, &mut iy, &mut wy);
            axis_taps(&kernel, kx * os_w as f64, os_w, &mut ix, &mut wx);
            for a in 0..width {
                for b in 0..width {
                    interp_index.push(iy[a] * os_w + ix[b]);
                    interp_weight.push(wy[a] * wx[b]);
                }
            }
        }

        let fy: Vec<f64> = (0..grid_h)
            .map(|r| kernel.fourier(ndft::centered(r, grid_h) / os_h as f64))
            .collect();
        let fx: Vec<f64> = (0..grid_w)
            .map(|c| kernel.fourier(ndft::centered(c, grid_w) / os_w as f64))
            .collect();
        let mut deapod = Vec::with_capacity(grid_h * grid_w);
        let mut pad_index = Vec::with_capacity(grid_h * grid_w);
        for (r, fyr) in fy.iter().enumerate() {
            let pr = wrap(ndft::centered(r, grid_h) as i64, os_h);
            for (c, fxc) in fx.iter().enumerate() {
                deapod.push(1.0 / (fyr * fxc));
                let pc = wrap(ndft::centered(c, grid_w) as i64, os_w);
                pad_index.push(pr * os_w + pc);
            }
        }
        if let Some(i) = deapod.iter().position(|&d| !(d.is_finite() && d > 0.0)) {
            return Err(Error::Parameter(format!(
                "deapodization not positive at pixel {i}; increase oversampling"
            )));
        }

        let scale = match opts.normalization {
            Normalization::None => 1.0,
            Normalization::Ortho => 1.0 / ((grid_h * grid_w) as f64).sqrt(),
        };

        Ok(Self {
            trajectory: traj,
            grid_h,
            grid_w,
            os_h,
            os_w,
            sigma: opts.sigma,
            kernel,
            interp_index,
            interp_weight,
            deapod,
            pad_index,
            scale,
            normalization: opts.normalization,
            mode: opts.mode,
            fft: Fft2::new(os_h, os_w),
        })
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        (self.grid_h, self.grid_w)
    }

    pub fn oversampled_shape(&self) -> (usize, usize) {
        (self.os_h, self.os_w)
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn n_samples(&self) -> usize {
        self.trajectory.len()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn mode(&self) -> ExecMode {
        self.mode
    }

    pub fn with_mode(mut self, mode: ExecMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn deapodization(&self) -> &[f64] {
        &self.deapod
    }

    /// `(grid index, weight)` pairs used to interpolate sample `i`.
    pub fn interpolation(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let taps = self.kernel.width() * self.kernel.width();
        let range = i * taps..(i + 1) * taps;
        self.interp_index[range.clone()]
            .iter()
            .copied()
            .zip(self.interp_weight[range].iter().copied())
    }

    pub fn forward(&self, img: &ComplexImage) -> Result<KSpaceSamples> {
        self.check_shape(img)?;
        let mut values = vec![Complex64::new(0.0, 0.0); self.n_samples()];
        self.forward_into(img.data(), &mut values);
        Ok(KSpaceSamples::new(values).expect("finite input gives finite samples"))
    }

    pub fn adjoint(&self, y: &KSpaceSamples) -> Result<ComplexImage> {
        if y.len() != self.n_samples() {
            return Err(Error::Dimension {
                expected: self.n_samples(),
                got: y.len(),
            });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid_h * self.grid_w];
        self.adjoint_into(y.values(), &mut out);
        ComplexImage::new(self.grid_h, self.grid_w, out)
    }

    /// Forward transform on raw buffers (`img` row-major, `out` one entry per sample).
    pub fn forward_into(&self, img: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(img.len(), self.grid_h * self.grid_w);
        assert_eq!(out.len(), self.n_samples());
        let mut grid = vec![Complex64::new(0.0, 0.0); self.os_h * self.os_w];
        for ((&x, &d), &p) in img.iter().zip(&self.deapod).zip(&self.pad_index) {
            grid[p] = x * (d * self.scale);
        }
        self.fft.process_unscaled(&mut grid, Direction::Forward);

        let taps = self.kernel.width() * self.kernel.width();
        let gather = |i: usize| -> Complex64 {
            let base = i * taps;
            let idx = &self.interp_index[base..base + taps];
            let wts = &self.interp_weight[base..base + taps];
            idx.iter().zip(wts).map(|(&g, &w)| grid[g] * w).sum()
        };
        match self.mode {
            ExecMode::Sequential => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = gather(i);
                }
            }
            ExecMode::Parallel => {
                out.par_iter_mut()
                    .enumerate()
                    .for_each(|(i, o)| *o = gather(i));
            }
        }
    }

    /// Adjoint transform on raw buffers.
    pub fn adjoint_into(&self, y: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(y.len(), self.n_samples());
        assert_eq!(out.len(), self.grid_h * self.grid_w);
        let grid_len = self.os_h * self.os_w;
        let taps = self.kernel.width() * self.kernel.width();
        let spread = |range: std::ops::Range<usize>, grid: &mut [Complex64]| {
            for i in range {
                let base = i * taps;
                let yi = y[i];
                for t in base..base + taps {
                    grid[self.interp_index[t]] += yi * self.interp_weight[t];
                }
            }
        };

        let mut grid = vec![Complex64::new(0.0, 0.0); grid_len];
        match self.mode {
            ExecMode::Sequential => spread(0..y.len(), &mut grid),
            ExecMode::Parallel => {
                let chunk = y.len().div_ceil(SPREAD_CHUNKS).max(1);
                let partials: Vec<Vec<Complex64>> = (0..SPREAD_CHUNKS)
                    .into_par_iter()
                    .map(|c| {
                        let mut g = vec![Complex64::new(0.0, 0.0); grid_len];
                        let start = (c * chunk).min(y.len());
                        let end = ((c + 1) * chunk).min(y.len());
                        spread(start..end, &mut g);
                        g
                    })
                    .collect();
                for p in &partials {
                    for (g, v) in grid.iter_mut().zip(p) {
                        *g += v;
                    }
                }
            }
        }
        // Transpose of the unscaled forward DFT is the unscaled inverse DFT.
        self.fft.process_unscaled(&mut grid, Direction::Inverse);
        for ((o, &d), &p) in out.iter_mut().zip(&self.deapod).zip(&self.pad_index) {
            *o = grid[p] * (d * self.scale);
        }
    }

    /// Operator scale applied to both directions (1 or `1/sqrt(H·W)`).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Kernel interpolation from the oversampled grid to the samples, no FFT or deapodization.
    pub fn interpolate_grid(&self, grid: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(grid.len(), self.os_h * self.os_w);
        assert_eq!(out.len(), self.n_samples());
        let taps = self.kernel.width() * self.kernel.width();
        for (i, o) in out.iter_mut().enumerate() {
            let base = i * taps;
            *o = (base..base + taps)
                .map(|t| grid[self.interp_index[t]] * self.interp_weight[t])
                .sum();
        }
    }

    /// Transpose of [`Self::interpolate_grid`]: accumulates samples onto a zeroed grid.
    pub fn spread_grid(&self, y: &[Complex64], grid: &mut [Complex64]) {
        assert_eq!(grid.len(), self.os_h * self.os_w);
        assert_eq!(y.len(), self.n_samples());
        grid.iter_mut().for_each(|g| *g = Complex64::new(0.0, 0.0));
        let taps = self.kernel.width() * self.kernel.width();
        for (i, &yi) in y.iter().enumerate() {
            let base = i * taps;
            for t in base..base + taps {
                grid[self.interp_index[t]] += yi * self.interp_weight[t];
            }
        }
    }

    fn check_shape(&self, img: &ComplexImage) -> Result<()> {
        if img.shape() != (self.grid_h, self.grid_w) {
            return Err(Error::Shape {
                expected: (self.grid_h, self.grid_w),
                got: img.shape(),
            });
        }
        Ok(())
    }
}

/// Fills the `width` grid indices and weights for one axis at grid coordinate `u`.
fn axis_taps(kernel: &KernelSpec, u: f64, len: usize, idx: &mut [usize], wts: &mut [f64]) {
    let half = kernel.width() as f64 / 2.0;
    let start = (u - half).ceil() as i64;
    for (t, (i, w)) in idx.iter_mut().zip(wts.iter_mut()).enumerate() {
        let m = start + t as i64;
        *i = wrap(m, len);
        *w = kernel.eval(u - m as f64);
    }
}

fn wrap(m: i64, len: usize) -> usize {
    m.rem_euclid(len as i64) as usize
}

pub fn nufft_forward(plan: &NufftPlan, img: &ComplexImage) -> Result<KSpaceSamples> {
    plan.forward(img)
}

pub fn nufft_adjoint(plan: &NufftPlan, y: &KSpaceSamples) -> Result<ComplexImage> {
    plan.adjoint(y)
}

#[cfg(test)]
mod tests;
