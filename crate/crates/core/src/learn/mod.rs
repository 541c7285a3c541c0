//! Training the unrolled model: exact gradients through a recorded forward pass, a
//! finite-difference checker, Adam, losses and the batch-size-one training loop.

mod tape;

pub use tape::{backward, GradientTape, Gradients, Value, Var};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::{ms_ssim_complex, DataRange};
use crate::nufft::NufftPlan;
use crate::recon::{
    check_dc, measurement_scale, CnnLayout, CorrectionKind, CorrectionOp, UnrolledModel,
};
use crate::types::{ComplexImage, DcWeights, KSpaceSamples};

/// Weight of the MS-SSIM term in [`compound_loss`].
pub const DEFAULT_ALPHA: f64 = 0.98;
/// Initial step size of gradient-step corrections.
pub const INITIAL_TAU: f64 = 0.1;

fn check_shapes(a: &ComplexImage, b: &ComplexImage) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape {
            expected: b.shape(),
            got: a.shape(),
        });
    }
    Ok(())
}

/// Mean absolute difference of magnitudes.
pub fn loss_l1(x_hat: &ComplexImage, x_ref: &ComplexImage) -> Result<f64> {
    check_shapes(x_hat, x_ref)?;
    let sum: f64 = x_hat
        .data()
        .iter()
        .zip(x_ref.data())
        .map(|(a, b)| (a.norm() - b.norm()).abs())
        .sum();
    Ok(sum / x_hat.len() as f64)
}

/// `α·(1 − MS-SSIM) + (1 − α)·L1`, an evaluation-only scalar. The MS-SSIM term is skipped
/// when `α = 0`, so small images can still be scored by L1 alone.
pub fn compound_loss(x_hat: &ComplexImage, x_ref: &ComplexImage, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Parameter(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    let l1 = loss_l1(x_hat, x_ref)?;
    if alpha == 0.0 {
        return Ok(l1);
    }
    let ms = ms_ssim_complex(x_ref, x_hat, DataRange::Auto)?;
    Ok(alpha * (1.0 - ms) + (1.0 - alpha) * l1)
}

/// Central differences `(f(p + εe_i) − f(p − εe_i)) / 2ε` for every coordinate.
///
/// # Panics
/// If `eps` is not positive.
pub fn finite_diff_grad(mut f: impl FnMut(&[f64]) -> f64, params: &[f64], eps: f64) -> Vec<f64> {
    assert!(eps > 0.0, "finite-difference step must be positive");
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + eps;
            let plus = f(&p);
            p[i] = orig - eps;
            let minus = f(&p);
            p[i] = orig;
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

/// `max_i |a_i − b_i| / max(|a_i|, |b_i|, floor)`.
///
/// `floor` keeps coordinates whose gradient is at the finite-difference noise level from
/// dominating the ratio.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update; on a non-finite gradient nothing is modified.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Dimension {
            expected: state.m.len(),
            got: grads.len(),
        });
    }
    if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { index });
    }
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Seeded initialization: CNN kernels uniform in `±1/√fan_in` with zero biases, step sizes
/// at [`INITIAL_TAU`].
pub fn init_model(
    kind: CorrectionKind,
    n_iter: usize,
    buffer_size: usize,
    use_dc: bool,
    seed: u64,
) -> Result<UnrolledModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ops = (0..n_iter)
        .map(|_| {
            let params = match kind {
                CorrectionKind::GradientStep => vec![INITIAL_TAU],
                CorrectionKind::SmallCnn { filters } => {
                    let l = CnnLayout::new(buffer_size, filters);
                    let mut p = vec![0.0; kind.param_count(buffer_size)];
                    let a1 = 1.0 / ((l.cin * 9) as f64).sqrt();
                    let a2 = 1.0 / ((l.filters * 9) as f64).sqrt();
                    p[l.w1..l.b1]
                        .iter_mut()
                        .for_each(|v| *v = rng.random_range(-a1..a1));
                    p[l.w2..l.b2]
                        .iter_mut()
                        .for_each(|v| *v = rng.random_range(-a2..a2));
                    p
                }
            };
            CorrectionOp::new(kind, buffer_size, params)
        })
        .collect::<Result<_>>()?;
    UnrolledModel::new(buffer_size, ops, use_dc)
}

/// Records the unrolled forward pass of `model` on a fresh tape whose parameters are the
/// model's flat parameter vector. Returns the tape and the output image node.
pub fn record_unrolled<'a>(
    model: &UnrolledModel,
    plan: &'a NufftPlan,
    d: Option<&'a DcWeights>,
    y: &KSpaceSamples,
) -> Result<(GradientTape<'a>, Var)> {
    check_dc(model, d)?;
    let (h, w) = plan.grid_shape();
    let hw = h * w;
    let b = model.buffer_size();
    let mut tape = GradientTape::new(model.flat_params());
    let y_var = tape.constant(Value::Complex(y.values().to_vec()));
    let inv = match d {
        Some(_) => 1.0,
        None => 1.0 / measurement_scale(y)?,
    };
    let weigh = |tape: &mut GradientTape<'a>, v: Var| -> Result<Var> {
        match d {
            Some(d) => tape.apply_dc(d.values(), v),
            None => Ok(tape.scale(inv, v)),
        }
    };
    let y0 = weigh(&mut tape, y_var)?;
    let x0 = tape.nufft_adjoint(plan, y0)?;
    let mut buffer = tape.repeat(x0, b);
    for (op, offset) in model.corrections().iter().zip(model.param_offsets()) {
        let x_k = tape.slice(buffer, 0, hw)?;
        let y_k = tape.nufft_forward(plan, x_k)?;
        let diff = tape.sub(y_var, y_k)?;
        let r = weigh(&mut tape, diff)?;
        let u = tape.nufft_adjoint(plan, r)?;
        let update = match op.kind() {
            CorrectionKind::GradientStep => {
                let spread = tape.repeat(u, b);
                tape.param_scale(offset, spread)?
            }
            CorrectionKind::SmallCnn { filters } => {
                let l = CnnLayout::new(b, filters);
                let stacked = tape.concat(&[buffer, u]);
                let planes = tape.to_planes(stacked, hw)?;
                let hidden =
                    tape.conv3x3(planes, l.cin, h, w, offset + l.w1, offset + l.b1, l.filters)?;
                let act = tape.relu(hidden);
                let out =
                    tape.conv3x3(act, l.filters, h, w, offset + l.w2, offset + l.b2, l.cout)?;
                tape.from_planes(out, hw)?
            }
        };
        buffer = tape.add(buffer, update)?;
    }
    let output = tape.slice(buffer, 0, hw)?;
    Ok((tape, output))
}

/// L1 training loss of `model` on one example and its exact parameter gradient.
pub fn loss_and_grad(
    model: &UnrolledModel,
    plan: &NufftPlan,
    d: Option<&DcWeights>,
    y: &KSpaceSamples,
    reference: &ComplexImage,
) -> Result<(f64, Vec<f64>)> {
    let (mut tape, out) = record_unrolled(model, plan, d, y)?;
    let (h, w) = plan.grid_shape();
    if reference.shape() != (h, w) {
        return Err(Error::Shape {
            expected: (h, w),
            got: reference.shape(),
        });
    }
    let loss = tape.l1_magnitude(out, reference.magnitude())?;
    let value = tape.value(loss).as_real()[0];
    let grads = backward(&mut tape, loss, Value::Real(vec![1.0]))?;
    Ok((value, grads))
}

/// One training example. `d` is used only by models with density compensation.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub plan: &'a NufftPlan,
    pub d: Option<&'a DcWeights>,
    pub y: &'a KSpaceSamples,
    pub reference: &'a ComplexImage,
}

impl Example<'_> {
    fn weights_for(&self, model: &UnrolledModel) -> Result<Option<&DcWeights>> {
        match (model.use_dc(), self.d) {
            (true, None) => Err(Error::Parameter(
                "training example has no density weights for a DC model".into(),
            )),
            (true, d) => Ok(d),
            (false, _) => Ok(None),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Stop after this many optimizer steps, even mid-epoch.
    pub max_steps: Option<usize>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 1,
            seed: 0,
            adam: AdamConfig::default(),
            max_steps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub step: usize,
    /// Loss of the example before this step's update.
    pub loss: f64,
}

/// Adam with batch size one over a seeded shuffle of `dataset` each epoch.
pub fn train(
    model: &UnrolledModel,
    dataset: &[Example<'_>],
    opts: &TrainOptions,
) -> Result<(UnrolledModel, Vec<HistoryRow>)> {
    if dataset.is_empty() {
        return Err(Error::Parameter("training dataset is empty".into()));
    }
    let mut params = model.flat_params();
    let mut state = AdamState::new(params.len(), opts.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::new();
    let mut current = model.clone();
    let limit = opts.max_steps.unwrap_or(usize::MAX);
    'epochs: for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            if history.len() >= limit {
                break 'epochs;
            }
            let ex = &dataset[i];
            let d = ex.weights_for(&current)?;
            let (loss, grads) = loss_and_grad(&current, ex.plan, d, ex.y, ex.reference)?;
            adam_step(&mut params, &grads, &mut state)?;
            current = current.with_flat_params(&params)?;
            history.push(HistoryRow {
                epoch,
                step: history.len(),
                loss,
            });
        }
    }
    Ok((current, history))
}
