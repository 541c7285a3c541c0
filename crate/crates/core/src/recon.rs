//! Reconstruction: density-compensated adjoint, residual data consistency and the unrolled
//! primal-only network.
//!
//! The unrolled model keeps a buffer of `B` complex images. Each of its `K` iterations
//! evaluates the measurement residual of the first buffer channel, maps it back to image space
//! with the adjoint and adds a learned correction `CorrectionOp_k(buffer, u_k)` to the whole
//! buffer. The output is the first channel after the last iteration.

use num_complex::Complex64;

use crate::dcomp::apply_dc;
use crate::error::{Error, Result};
use crate::nufft::NufftPlan;
use crate::types::{ComplexImage, DcWeights, KSpaceSamples};

pub const DEFAULT_ITERATIONS: usize = 10;
pub const DEFAULT_BUFFER_SIZE: usize = 5;
pub const DEFAULT_FILTERS: usize = 16;

/// Architecture of one image-space correction block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectionKind {
    /// `τ · u` added to every buffer channel; one parameter.
    GradientStep,
    /// Two 3×3 convolutions with a rectifier in between:
    /// `2B + 2 → filters → 2B` real channels.
    SmallCnn { filters: usize },
}

impl CorrectionKind {
    pub fn param_count(self, buffer_size: usize) -> usize {
        match self {
            CorrectionKind::GradientStep => 1,
            CorrectionKind::SmallCnn { filters } => {
                let (cin, cout) = cnn_channels(buffer_size);
                filters * cin * 9 + filters + cout * filters * 9 + cout
            }
        }
    }
}

/// Real input and output channel counts of the small CNN for buffer size `b`.
pub fn cnn_channels(buffer_size: usize) -> (usize, usize) {
    (2 * buffer_size + 2, 2 * buffer_size)
}

/// Offsets of `(w1, b1, w2, b2)` inside a small-CNN parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CnnLayout {
    pub cin: usize,
    pub filters: usize,
    pub cout: usize,
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

impl CnnLayout {
    pub fn new(buffer_size: usize, filters: usize) -> Self {
        let (cin, cout) = cnn_channels(buffer_size);
        let w1 = 0;
        let b1 = w1 + filters * cin * 9;
        let w2 = b1 + filters;
        let b2 = w2 + cout * filters * 9;
        Self {
            cin,
            filters,
            cout,
            w1,
            b1,
            w2,
            b2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionOp {
    kind: CorrectionKind,
    buffer_size: usize,
    params: Vec<f64>,
}

impl CorrectionOp {
    pub fn new(kind: CorrectionKind, buffer_size: usize, params: Vec<f64>) -> Result<Self> {
        if buffer_size == 0 {
            return Err(Error::Parameter("buffer size must be at least 1".into()));
        }
        if let CorrectionKind::SmallCnn { filters: 0 } = kind {
            return Err(Error::Parameter(
                "small CNN needs at least one filter".into(),
            ));
        }
        let expected = kind.param_count(buffer_size);
        if params.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: params.len(),
            });
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::Parameter(format!("parameter {i} is not finite")));
        }
        Ok(Self {
            kind,
            buffer_size,
            params,
        })
    }

    pub fn zeros(kind: CorrectionKind, buffer_size: usize) -> Result<Self> {
        Self::new(kind, buffer_size, vec![0.0; kind.param_count(buffer_size)])
    }

    pub fn kind(&self) -> CorrectionKind {
        self.kind
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Update to add to each buffer channel.
    pub fn apply(&self, buffer: &[ComplexImage], u: &ComplexImage) -> Result<Vec<ComplexImage>> {
        check_buffer(buffer, self.buffer_size, u.shape())?;
        match self.kind {
            CorrectionKind::GradientStep => {
                let tau = self.params[0];
                Ok(vec![u.scaled(tau); self.buffer_size])
            }
            CorrectionKind::SmallCnn { .. } => small_cnn_apply(self, buffer, u),
        }
    }
}

fn check_buffer(buffer: &[ComplexImage], b: usize, shape: (usize, usize)) -> Result<()> {
    if buffer.len() != b {
        return Err(Error::Dimension {
            expected: b,
            got: buffer.len(),
        });
    }
    for img in buffer {
        if img.shape() != shape {
            return Err(Error::Shape {
                expected: shape,
                got: img.shape(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnrolledModel {
    buffer_size: usize,
    corrections: Vec<CorrectionOp>,
    use_dc: bool,
}

impl UnrolledModel {
    pub fn new(buffer_size: usize, corrections: Vec<CorrectionOp>, use_dc: bool) -> Result<Self> {
        if corrections.is_empty() {
            return Err(Error::Parameter(
                "unrolled model needs at least one iteration".into(),
            ));
        }
        if buffer_size == 0 {
            return Err(Error::Parameter("buffer size must be at least 1".into()));
        }
        if let Some(op) = corrections.iter().find(|op| op.buffer_size != buffer_size) {
            return Err(Error::Parameter(format!(
                "correction built for buffer size {}, model uses {buffer_size}",
                op.buffer_size
            )));
        }
        Ok(Self {
            buffer_size,
            corrections,
            use_dc,
        })
    }

    /// `K` identical blocks with all-zero parameters.
    pub fn zeros(
        kind: CorrectionKind,
        n_iter: usize,
        buffer_size: usize,
        use_dc: bool,
    ) -> Result<Self> {
        let ops = (0..n_iter)
            .map(|_| CorrectionOp::zeros(kind, buffer_size))
            .collect::<Result<_>>()?;
        Self::new(buffer_size, ops, use_dc)
    }

    pub fn n_iter(&self) -> usize {
        self.corrections.len()
    }

    pub fn buffer_size(&self) -> usize {
        self.buffer_size
    }

    pub fn use_dc(&self) -> bool {
        self.use_dc
    }

    pub fn corrections(&self) -> &[CorrectionOp] {
        &self.corrections
    }

    pub fn param_count(&self) -> usize {
        self.corrections.iter().map(|op| op.params.len()).sum()
    }

    /// All parameters concatenated in iteration order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.corrections
            .iter()
            .flat_map(|op| op.params.iter().copied())
            .collect()
    }

    /// Start offset of each correction's parameters in [`flat_params`](Self::flat_params).
    pub fn param_offsets(&self) -> Vec<usize> {
        let mut offset = 0;
        self.corrections
            .iter()
            .map(|op| {
                let start = offset;
                offset += op.params.len();
                start
            })
            .collect()
    }

    pub fn with_flat_params(&self, params: &[f64]) -> Result<Self> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut rest = params;
        let mut ops = Vec::with_capacity(self.corrections.len());
        for op in &self.corrections {
            let (head, tail) = rest.split_at(op.params.len());
            ops.push(CorrectionOp::new(op.kind, op.buffer_size, head.to_vec())?);
            rest = tail;
        }
        Self::new(self.buffer_size, ops, self.use_dc)
    }
}

/// `Fᴴ(d ⊙ y)`.
pub fn dc_adjoint_recon(
    plan: &NufftPlan,
    d: &DcWeights,
    y: &KSpaceSamples,
) -> Result<ComplexImage> {
    plan.adjoint(&apply_dc(d, y)?)
}

/// Largest sample magnitude, refusing an all-zero measurement.
pub fn measurement_scale(y: &KSpaceSamples) -> Result<f64> {
    let max = y.max_abs();
    if max == 0.0 {
        return Err(Error::Degenerate(
            "k-space is identically zero; cannot normalize by its maximum".into(),
        ));
    }
    Ok(max)
}

/// `d ⊙ (y − y_k)`, or `(y − y_k) / max|y|` without weights.
pub fn data_consistency_residual(
    y: &KSpaceSamples,
    y_k: &KSpaceSamples,
    d: Option<&DcWeights>,
) -> Result<KSpaceSamples> {
    if y.len() != y_k.len() {
        return Err(Error::Dimension {
            expected: y.len(),
            got: y_k.len(),
        });
    }
    let diff: Vec<Complex64> = y
        .values()
        .iter()
        .zip(y_k.values())
        .map(|(a, b)| a - b)
        .collect();
    match d {
        Some(d) => apply_dc(d, &KSpaceSamples::new(diff)?),
        None => {
            let inv = 1.0 / measurement_scale(y)?;
            KSpaceSamples::new(diff.into_iter().map(|v| v * inv).collect())
        }
    }
}

/// Initial image: `Fᴴ(d ⊙ y)`, or `Fᴴ(y / max|y|)` without weights.
pub fn initial_image(
    plan: &NufftPlan,
    d: Option<&DcWeights>,
    y: &KSpaceSamples,
) -> Result<ComplexImage> {
    match d {
        Some(d) => dc_adjoint_recon(plan, d, y),
        None => {
            let inv = 1.0 / measurement_scale(y)?;
            let scaled = KSpaceSamples::new(y.values().iter().map(|v| v * inv).collect())?;
            plan.adjoint(&scaled)
        }
    }
}

pub(crate) fn check_dc(model: &UnrolledModel, d: Option<&DcWeights>) -> Result<()> {
    match (model.use_dc, d.is_some()) {
        (true, false) => Err(Error::Parameter(
            "model uses density compensation but no weights were given".into(),
        )),
        (false, true) => Err(Error::Parameter(
            "model without density compensation was given weights".into(),
        )),
        _ => Ok(()),
    }
}

pub fn unrolled_forward(
    model: &UnrolledModel,
    plan: &NufftPlan,
    d: Option<&DcWeights>,
    y: &KSpaceSamples,
) -> Result<ComplexImage> {
    check_dc(model, d)?;
    let x0 = initial_image(plan, d, y)?;
    let mut buffer = vec![x0; model.buffer_size];
    for op in &model.corrections {
        let y_k = plan.forward(&buffer[0])?;
        let r = data_consistency_residual(y, &y_k, d)?;
        let u = plan.adjoint(&r)?;
        let update = op.apply(&buffer, &u)?;
        for (b, du) in buffer.iter_mut().zip(update) {
            for (v, dv) in b.data_mut().iter_mut().zip(du.data()) {
                *v += dv;
            }
        }
    }
    Ok(buffer.swap_remove(0))
}

/// Real planes fed to the CNN: `(re, im)` of every buffer channel, then of `u`.
pub fn to_planes(channels: &[&ComplexImage]) -> Vec<f64> {
    let mut out = Vec::with_capacity(channels.iter().map(|c| 2 * c.len()).sum());
    for c in channels {
        out.extend(c.data().iter().map(|z| z.re));
        out.extend(c.data().iter().map(|z| z.im));
    }
    out
}

/// Inverse of [`to_planes`] for `n` channels of `h × w`.
pub fn from_planes(planes: &[f64], n: usize, h: usize, w: usize) -> Vec<ComplexImage> {
    let hw = h * w;
    (0..n)
        .map(|c| {
            let re = &planes[2 * c * hw..(2 * c + 1) * hw];
            let im = &planes[(2 * c + 1) * hw..(2 * c + 2) * hw];
            let data = re
                .iter()
                .zip(im)
                .map(|(&a, &b)| Complex64::new(a, b))
                .collect();
            ComplexImage::new(h, w, data).expect("planes hold finite values")
        })
        .collect()
}

/// Zero-padded 3×3 convolution (cross-correlation) over `cin` planes of `h × w`.
///
/// `weights` is laid out `[cout][cin][3][3]`.
pub fn conv3x3(
    input: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    weights: &[f64],
    bias: &[f64],
) -> Vec<f64> {
    let cout = bias.len();
    let hw = h * w;
    debug_assert_eq!(input.len(), cin * hw);
    debug_assert_eq!(weights.len(), cout * cin * 9);
    let mut out = vec![0.0; cout * hw];
    for (co, plane) in out.chunks_exact_mut(hw).enumerate() {
        plane.fill(bias[co]);
        for ci in 0..cin {
            let src = &input[ci * hw..(ci + 1) * hw];
            let kernel = &weights[(co * cin + ci) * 9..(co * cin + ci + 1) * 9];
            for (t, &k) in kernel.iter().enumerate() {
                if k == 0.0 {
                    continue;
                }
                let (dy, dx) = (t as isize / 3 - 1, t as isize % 3 - 1);
                accumulate_shifted(plane, src, h, w, dy, dx, k);
            }
        }
    }
    out
}

/// `dst[r, c] += k · src[r + dy, c + dx]` wherever the source pixel exists.
pub(crate) fn accumulate_shifted(
    dst: &mut [f64],
    src: &[f64],
    h: usize,
    w: usize,
    dy: isize,
    dx: isize,
    k: f64,
) {
    let r0 = (-dy).max(0) as usize;
    let r1 = (h as isize - dy.max(0)) as usize;
    let c0 = (-dx).max(0) as usize;
    let c1 = (w as isize - dx.max(0)) as usize;
    for r in r0..r1 {
        let sr = (r as isize + dy) as usize;
        let d = &mut dst[r * w + c0..r * w + c1];
        let s = &src[sr * w + (c0 as isize + dx) as usize..sr * w + (c1 as isize + dx) as usize];
        for (a, &b) in d.iter_mut().zip(s) {
            *a += k * b;
        }
    }
}

pub fn relu(v: &mut [f64]) {
    for x in v {
        *x = x.max(0.0);
    }
}

/// Small-CNN update for a buffer: returns `B` complex channels.
pub fn small_cnn_apply(
    op: &CorrectionOp,
    buffer: &[ComplexImage],
    u: &ComplexImage,
) -> Result<Vec<ComplexImage>> {
    let filters = match op.kind {
        CorrectionKind::SmallCnn { filters } => filters,
        CorrectionKind::GradientStep => {
            return Err(Error::Parameter(
                "small_cnn_apply needs a small-CNN correction".into(),
            ))
        }
    };
    check_buffer(buffer, op.buffer_size, u.shape())?;
    let (h, w) = u.shape();
    let l = CnnLayout::new(op.buffer_size, filters);
    let p = &op.params;
    let mut inputs: Vec<&ComplexImage> = buffer.iter().collect();
    inputs.push(u);
    let planes = to_planes(&inputs);
    let mut hidden = conv3x3(&planes, l.cin, h, w, &p[l.w1..l.b1], &p[l.b1..l.w2]);
    relu(&mut hidden);
    let out = conv3x3(&hidden, l.filters, h, w, &p[l.w2..l.b2], &p[l.b2..]);
    Ok(from_planes(&out, op.buffer_size, h, w))
}

/// `‖F‖²` (largest eigenvalue of `FᴴF`) by power iteration from a fixed start vector.
pub fn normal_operator_norm(plan: &NufftPlan, iterations: usize) -> Result<f64> {
    let (h, w) = plan.grid_shape();
    // Deterministic, non-symmetric start so no eigenvector is missed by construction.
    let start: Vec<Complex64> = (0..h * w)
        .map(|i| Complex64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.05))
        .collect();
    let mut x = ComplexImage::new(h, w, start)?;
    let mut lambda = 0.0;
    for _ in 0..iterations.max(1) {
        let n = x.norm();
        x = x.scaled(1.0 / n);
        let next = plan.adjoint(&plan.forward(&x)?)?;
        lambda = next.norm();
        x = next;
    }
    Ok(lambda)
}
