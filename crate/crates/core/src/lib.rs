//! Non-Cartesian MRI reconstruction toolkit.
//!
//! The crate is organised bottom-up:
//!
//! * [`types`] and [`fft`]: dense complex images, k-space sample vectors, trajectories and
//!   the Cartesian FFT.
//! * [`nufft`]: exact non-uniform DFT oracles and the Kaiser-Bessel gridding NUFFT.
//! * [`trajectory`]: radial, spiral and full-Cartesian sampling patterns.
//! * [`dcomp`]: iterative density-compensation weights.
//! * [`recon`]: density-compensated adjoint, residual data consistency and the unrolled
//!   primal-only network.
//! * [`learn`]: reverse-mode gradients, Adam, losses and the training loop.
//! * [`metrics`]: PSNR, SSIM and MS-SSIM.
//! * [`pipeline`]: phantoms, k-space simulation, file formats and the command line.

pub mod dcomp;
pub mod error;
pub mod fft;
pub mod learn;
pub mod metrics;
pub mod nufft;
pub mod pipeline;
pub mod recon;
pub mod selftest;
pub mod trajectory;
pub mod types;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use types::{inner_product, ComplexImage, DcWeights, KSpaceSamples, Trajectory};

#[cfg(test)]
pub(crate) mod testutil;
