//! Built-in verification suites: NUFFT against the exact sum, adjointness, density
//! compensation, gradient exactness and metric sanity.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dcomp::{max_relative_change, pipe_menon, pipe_menon_history};
use crate::error::Result;
use crate::learn::{finite_diff_grad, init_model, loss_and_grad, loss_l1, max_relative_error};
use crate::metrics::{ms_ssim, psnr, ssim, DataRange, MagnitudeImage};
use crate::nufft::{make_plan, ndft_forward};
use crate::pipeline::experiment::pipeline_plan;
use crate::pipeline::phantom::{downsample2, shepp_logan};
use crate::recon::{unrolled_forward, CorrectionKind};
use crate::trajectory::{cartesian_full, radial, spiral};
use crate::types::{inner_product, norm, ComplexImage, KSpaceSamples, Trajectory};
use num_complex::Complex64;

pub const NUFFT_TOLERANCE: f64 = 1e-5;
pub const ADJOINT_TOLERANCE: f64 = 1e-10;
pub const DC_UNIT_TOLERANCE: f64 = 1e-3;
pub const DC_CHANGE_LIMIT: f64 = 0.05;
pub const GRADIENT_TOLERANCE: f64 = 1e-4;
pub const GRADIENT_EPS: f64 = 1e-6;
/// Gradient coordinates below this fraction of the largest one are compared in absolute
/// terms against it, since central differences cannot resolve them relatively.
pub const GRADIENT_FLOOR: f64 = 1e-3;
pub const SSIM_ORACLE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

fn timed(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckOutcome {
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

fn random_complex(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn random_trajectory(m: usize, rng: &mut ChaCha8Rng) -> Result<Trajectory> {
    Trajectory::new(
        (0..m)
            .map(|_| [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)])
            .collect(),
    )
}

/// 32×32 random image, 500 random locations, `σ = 2`, `J = 6`.
pub fn nufft_oracle() -> CheckOutcome {
    timed("nufft-oracle", || {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = ComplexImage::new(32, 32, random_complex(1024, &mut rng))?;
        let traj = random_trajectory(500, &mut rng)?;
        let plan = make_plan(&traj, 32, 32, 2.0, 6)?;
        let fast = plan.forward(&x)?;
        let exact = ndft_forward(&x, &traj);
        let diff: Vec<Complex64> = fast
            .values()
            .iter()
            .zip(exact.values())
            .map(|(a, b)| a - b)
            .collect();
        let err = norm(&diff) / exact.norm();
        Ok((
            err <= NUFFT_TOLERANCE,
            format!("relative L2 error {err:.3e}"),
        ))
    })
}

/// Worst normalized gap `|⟨Fx, y⟩ − ⟨x, Fᴴy⟩| / (‖Fx‖‖y‖)` over 20 pairs per trajectory kind.
pub fn adjointness() -> CheckOutcome {
    timed("adjointness", || {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let kinds = [
            ("radial", radial(16, 48)?, (24, 24)),
            ("spiral", spiral(6, 120, 1.5)?, (20, 28)),
            ("cartesian", cartesian_full(16, 12)?, (16, 12)),
            ("random", random_trajectory(400, &mut rng)?, (18, 18)),
        ];
        let mut worst: f64 = 0.0;
        for (_, traj, (h, w)) in kinds {
            let plan = pipeline_plan(traj, (h, w))?;
            for _ in 0..20 {
                let x = ComplexImage::new(h, w, random_complex(h * w, &mut rng))?;
                let y = KSpaceSamples::new(random_complex(plan.n_samples(), &mut rng))?;
                let fx = plan.forward(&x)?;
                let fhy = plan.adjoint(&y)?;
                let lhs = inner_product(fx.values(), y.values())?;
                let rhs = inner_product(x.data(), fhy.data())?;
                worst = worst.max((lhs - rhs).norm() / (fx.norm() * y.norm()));
            }
        }
        Ok((worst <= ADJOINT_TOLERANCE, format!("worst gap {worst:.3e}")))
    })
}

pub fn density_compensation() -> CheckOutcome {
    timed("density-compensation", || {
        let cart = pipeline_plan(cartesian_full(8, 8)?, (8, 8))?;
        let d = pipe_menon(&cart, 10)?;
        let unit = d
            .values()
            .iter()
            .map(|v| (v - 1.0).abs())
            .fold(0.0, f64::max);

        let n = 64;
        let plan = pipeline_plan(radial(20, n)?, (32, 32))?;
        let history = pipe_menon_history(&plan, 10)?;
        let change = max_relative_change(&history[9], &history[10]);
        let last = &history[10];
        let positive = last.values().iter().all(|&v| v > 0.0);
        let ordered = last.values().chunks(n).all(|s| s[n / 2] < s[n - 1]);
        let passed = unit <= DC_UNIT_TOLERANCE && change < DC_CHANGE_LIMIT && positive && ordered;
        Ok((
            passed,
            format!(
                "cartesian |d-1| {unit:.2e}, radial change {change:.4}, positive {positive}, inner<outer {ordered}"
            ),
        ))
    })
}

/// K = 3, B = 2, 4-filter CNN on an 8×8 phantom with a 6-spoke radial acquisition.
pub fn gradient_exactness() -> CheckOutcome {
    timed("gradient-exactness", || {
        let x = downsample2(&shepp_logan(16, 16)?);
        let plan = pipeline_plan(radial(6, 16)?, (8, 8))?;
        let y = plan.forward(&x)?;
        let d = pipe_menon(&plan, 10)?;
        let model = init_model(CorrectionKind::SmallCnn { filters: 4 }, 3, 2, true, 7)?;
        let (_, analytic) = loss_and_grad(&model, &plan, Some(&d), &y, &x)?;
        let mut failure = None;
        let numeric = finite_diff_grad(
            |p| {
                let run = || -> Result<f64> {
                    let m = model.with_flat_params(p)?;
                    loss_l1(&unrolled_forward(&m, &plan, Some(&d), &y)?, &x)
                };
                run().unwrap_or_else(|e| {
                    failure = Some(e);
                    f64::NAN
                })
            },
            &model.flat_params(),
            GRADIENT_EPS,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let scale = numeric.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let err = max_relative_error(&analytic, &numeric, GRADIENT_FLOOR * scale);
        Ok((
            err <= GRADIENT_TOLERANCE,
            format!(
                "{} parameters, max relative error {err:.3e}",
                analytic.len()
            ),
        ))
    })
}

/// Direct sliding-window SSIM used as the oracle.
fn naive_ssim(a: &[f64], b: &[f64], h: usize, w: usize, range: f64) -> f64 {
    let k = crate::metrics::SSIM_WINDOW;
    let n = (k * k) as f64;
    let (c1, c2) = ((0.01 * range).powi(2), (0.03 * range).powi(2));
    let mut total = 0.0;
    let mut count = 0.0;
    for r in 0..=h - k {
        for c in 0..=w - k {
            let at = |v: &[f64], i: usize, j: usize| v[(r + i) * w + c + j];
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    ma += at(a, i, j);
                    mb += at(b, i, j);
                }
            }
            ma /= n;
            mb /= n;
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    let (da, db) = (at(a, i, j) - ma, at(b, i, j) - mb);
                    va += da * da;
                    vb += db * db;
                    cov += da * db;
                }
            }
            let (va, vb, cov) = (va / (n - 1.0), vb / (n - 1.0), cov / (n - 1.0));
            total += (2.0 * ma * mb + c1) * (2.0 * cov + c2)
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1.0;
        }
    }
    total / count
}

pub fn metric_sanity() -> CheckOutcome {
    timed("metrics", || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut random = |h: usize, w: usize| -> Result<MagnitudeImage> {
            MagnitudeImage::new(
                h,
                w,
                (0..h * w).map(|_| rng.random_range(0.0..1.0)).collect(),
            )
        };
        let big = random(128, 128)?;
        let same_ssim = ssim(
            std::slice::from_ref(&big),
            std::slice::from_ref(&big),
            DataRange::Auto,
        )?;
        let same_ms = ms_ssim(
            std::slice::from_ref(&big),
            std::slice::from_ref(&big),
            DataRange::Auto,
        )?;

        let zero = MagnitudeImage::new(32, 32, vec![0.0; 1024])?;
        let offset = MagnitudeImage::new(32, 32, vec![0.1; 1024])?;
        let p = psnr(&[zero], &[offset], DataRange::Fixed(1.0))?;

        let a = random(32, 32)?;
        let b = random(32, 32)?;
        let fast = ssim(
            std::slice::from_ref(&a),
            std::slice::from_ref(&b),
            DataRange::Fixed(1.0),
        )?;
        let slow = naive_ssim(a.data(), b.data(), 32, 32, 1.0);
        let gap = (fast - slow).abs();
        let passed =
            same_ssim == 1.0 && same_ms == 1.0 && p == 20.0 && gap <= SSIM_ORACLE_TOLERANCE;
        Ok((
            passed,
            format!(
                "ssim(x,x) {same_ssim}, ms_ssim(x,x) {same_ms}, psnr {p}, ssim oracle gap {gap:.2e}"
            ),
        ))
    })
}

pub fn run_all() -> Vec<CheckOutcome> {
    vec![
        nufft_oracle(),
        adjointness(),
        density_compensation(),
        gradient_exactness(),
        metric_sanity(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_passes() {
        for outcome in run_all() {
            assert!(outcome.passed, "{}: {}", outcome.name, outcome.detail);
        }
    }
}
