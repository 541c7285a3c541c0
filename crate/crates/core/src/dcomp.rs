//! Iterative density-compensation weights.
//!
//! Starting from ones, each iteration divides the current weights by the magnitude of
//! `A d`. By default `A` is a gridding operator: spread onto the plan's oversampled grid with
//! a Kaiser-Bessel kernel of width [`DC_KERNEL_WIDTH`], then interpolate back. The update is
//! invariant to rescaling `d`, so every iterate after `d_0` is reported scaled so that the
//! density-weighted point spread function `Fᴴ(d ⊙ F δ)` of the plan sums to one; a
//! constant image is then reconstructed at its own level.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::nufft::{NufftOptions, NufftPlan};
use crate::types::{DcWeights, KSpaceSamples};

pub const DEFAULT_ITERATIONS: usize = 10;

/// Kernel width of the gridding operator used for density estimation.
pub const DC_KERNEL_WIDTH: usize = 4;

/// Below this `|A d|` the iteration is treated as singular.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;

/// Operator `A` in the update `d ← d / |A d|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DcOperator {
    /// Kernel spreading followed by kernel interpolation (positive Gram matrix).
    #[default]
    Gridding,
    /// Full NUFFT pair `F Fᴴ` of the plan. Not stable when the trajectory oversamples the
    /// image support, since `F Fᴴ` is then rank deficient.
    FullNufft,
}

/// Result of [`pipe_menon_report`]: final weights plus the last relative update.
#[derive(Debug, Clone)]
pub struct DcomputeReport {
    pub weights: DcWeights,
    /// `max_i |d_N(i)/d_{N-1}(i) - 1|`; zero when no iteration ran.
    pub last_relative_change: f64,
}

pub fn pipe_menon(plan: &NufftPlan, n_iter: usize) -> Result<DcWeights> {
    Ok(pipe_menon_report(plan, n_iter)?.weights)
}

/// Runs the iteration and returns every iterate `d_0 ..= d_{n_iter}`.
pub fn pipe_menon_history(plan: &NufftPlan, n_iter: usize) -> Result<Vec<DcWeights>> {
    pipe_menon_history_with(plan, n_iter, DcOperator::Gridding)
}

pub fn pipe_menon_history_with(
    plan: &NufftPlan,
    n_iter: usize,
    operator: DcOperator,
) -> Result<Vec<DcWeights>> {
    let m = plan.n_samples();
    let mut history = vec![DcWeights::ones(m)];
    if n_iter == 0 {
        return Ok(history);
    }
    let gridding = match operator {
        DcOperator::Gridding => Some(NufftPlan::new(
            plan.trajectory().clone(),
            plan.grid_shape(),
            NufftOptions {
                sigma: plan.sigma(),
                width: DC_KERNEL_WIDTH,
                ..NufftOptions::default()
            },
        )?),
        DcOperator::FullNufft => None,
    };
    let (h, w) = plan.grid_shape();
    let mut work = match &gridding {
        Some(g) => {
            let (oh, ow) = g.oversampled_shape();
            vec![Complex64::new(0.0, 0.0); oh * ow]
        }
        None => vec![Complex64::new(0.0, 0.0); h * w],
    };
    let mut d = vec![1.0; m];
    let mut samples = vec![Complex64::new(0.0, 0.0); m];
    let mut back = vec![Complex64::new(0.0, 0.0); m];
    for _ in 0..n_iter {
        for (s, &v) in samples.iter_mut().zip(&d) {
            *s = Complex64::new(v, 0.0);
        }
        match &gridding {
            Some(g) => {
                g.spread_grid(&samples, &mut work);
                g.interpolate_grid(&work, &mut back);
            }
            None => {
                plan.adjoint_into(&samples, &mut work);
                plan.forward_into(&work, &mut back);
            }
        }
        for (index, (di, b)) in d.iter_mut().zip(&back).enumerate() {
            let value = b.norm();
            // Also rejects NaN.
            if value.is_nan() || value < SINGULAR_THRESHOLD {
                return Err(Error::Singular { index, value });
            }
            *di /= value;
        }
        let norm = weighted_psf_gain(plan, &d);
        d.iter_mut().for_each(|v| *v /= norm);
        history.push(DcWeights::new(d.clone())?);
    }
    Ok(history)
}

/// Sum over the image of the density-weighted point spread function `Fᴴ(d ⊙ F δ)`, i.e. the
/// reconstruction gain for a constant image.
pub fn weighted_psf_gain(plan: &NufftPlan, d: &[f64]) -> f64 {
    let (h, w) = plan.grid_shape();
    let mut delta = vec![Complex64::new(0.0, 0.0); h * w];
    delta[(h / 2) * w + w / 2] = Complex64::new(1.0, 0.0);
    let mut k = vec![Complex64::new(0.0, 0.0); plan.n_samples()];
    plan.forward_into(&delta, &mut k);
    for (v, &di) in k.iter_mut().zip(d) {
        *v *= di;
    }
    plan.adjoint_into(&k, &mut delta);
    delta.iter().map(|z| z.re).sum()
}

pub fn pipe_menon_report(plan: &NufftPlan, n_iter: usize) -> Result<DcomputeReport> {
    let mut history = pipe_menon_history(plan, n_iter)?;
    let weights = history.pop().expect("history holds at least d_0");
    let last_relative_change = history
        .last()
        .filter(|_| n_iter > 0)
        .map(|prev| max_relative_change(prev, &weights))
        .unwrap_or(0.0);
    Ok(DcomputeReport {
        weights,
        last_relative_change,
    })
}

/// `max_i |b_i / a_i - 1|`.
pub fn max_relative_change(a: &DcWeights, b: &DcWeights) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (y / x - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Elementwise `d ⊙ y`.
pub fn apply_dc(d: &DcWeights, y: &KSpaceSamples) -> Result<KSpaceSamples> {
    if d.len() != y.len() {
        return Err(Error::Dimension {
            expected: d.len(),
            got: y.len(),
        });
    }
    let values = y
        .values()
        .iter()
        .zip(d.values())
        .map(|(v, &w)| v * w)
        .collect();
    KSpaceSamples::new(values)
}
