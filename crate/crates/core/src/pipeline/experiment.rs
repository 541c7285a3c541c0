//! Synthetic phantom datasets and config-driven training.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dcomp::pipe_menon;
use crate::error::Result;
use crate::learn::{init_model, train, AdamConfig, Example, HistoryRow, TrainOptions};
use crate::nufft::{Normalization, NufftOptions, NufftPlan};
use crate::pipeline::config::ExperimentConfig;
use crate::pipeline::phantom::{warped_shepp_logan, Warp};
use crate::pipeline::simulate::simulate_kspace;
use crate::recon::UnrolledModel;
use crate::trajectory::radial;
use crate::types::{ComplexImage, DcWeights, KSpaceSamples, Trajectory};

/// `n` affine-warped Shepp-Logan phantoms drawn from one seeded stream. Different seeds
/// give disjoint train and validation sets.
pub fn phantom_set(n: usize, size: usize, seed: u64) -> Result<Vec<ComplexImage>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| warped_shepp_logan(size, size, &Warp::random(&mut rng)))
        .collect()
}

/// Noise seed of case `index` in a set simulated with `seed`.
pub fn case_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(index as u64)
}

/// Orthonormally scaled plan for an image grid; the scaling used by every pipeline stage.
pub fn pipeline_plan(traj: Trajectory, grid: (usize, usize)) -> Result<NufftPlan> {
    NufftPlan::new(
        traj,
        grid,
        NufftOptions {
            normalization: Normalization::Ortho,
            ..NufftOptions::default()
        },
    )
}

/// A radial acquisition with its density weights.
pub struct Acquisition {
    pub plan: NufftPlan,
    pub d: DcWeights,
}

impl Acquisition {
    pub fn new(plan: NufftPlan, dc_iters: usize) -> Result<Self> {
        let d = pipe_menon(&plan, dc_iters)?;
        Ok(Self { plan, d })
    }

    pub fn radial(size: usize, spokes: usize, samples: usize, dc_iters: usize) -> Result<Self> {
        Self::new(
            pipeline_plan(radial(spokes, samples)?, (size, size))?,
            dc_iters,
        )
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        Self::radial(cfg.size, cfg.spokes, cfg.samples, cfg.dc_iters)
    }
}

pub fn simulate_set(
    phantoms: &[ComplexImage],
    plan: &NufftPlan,
    noise: f64,
    seed: u64,
) -> Result<Vec<KSpaceSamples>> {
    phantoms
        .iter()
        .enumerate()
        .map(|(i, x)| simulate_kspace(x, plan, noise, case_seed(seed, i)))
        .collect()
}

/// Training phantoms, acquisition and noise all derive from `cfg.seed`.
pub fn train_from_config(
    cfg: &ExperimentConfig,
    acq: &Acquisition,
) -> Result<(UnrolledModel, Vec<HistoryRow>)> {
    cfg.validate()?;
    let phantoms = phantom_set(cfg.train_cases, cfg.size, cfg.seed)?;
    let ys = simulate_set(&phantoms, &acq.plan, cfg.noise, cfg.seed)?;
    let data: Vec<Example> = phantoms
        .iter()
        .zip(&ys)
        .map(|(x, y)| Example {
            plan: &acq.plan,
            d: Some(&acq.d),
            y,
            reference: x,
        })
        .collect();
    let model = init_model(
        cfg.kind(),
        cfg.n_iter,
        cfg.buffer_size,
        cfg.use_dc,
        cfg.seed,
    )?;
    let opts = TrainOptions {
        epochs: cfg.epochs,
        seed: cfg.seed,
        adam: AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        max_steps: cfg.max_steps,
    };
    train(&model, &data, &opts)
}
