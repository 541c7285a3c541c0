//! Emulated single-coil acquisition: NUFFT of an image plus seeded complex Gaussian noise.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::nufft::NufftPlan;
use crate::types::{ComplexImage, KSpaceSamples};

/// `F x` plus independent `N(0, σ²)` noise on the real and imaginary part of every sample.
pub fn simulate_kspace(
    x: &ComplexImage,
    plan: &NufftPlan,
    noise_sigma: f64,
    seed: u64,
) -> Result<KSpaceSamples> {
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::Parameter(format!(
            "noise std must be finite and non-negative, got {noise_sigma}"
        )));
    }
    let mut y = plan.forward(x)?;
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).expect("validated std");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in y.values_mut() {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            *v += Complex64::new(re, im);
        }
    }
    Ok(y)
}
