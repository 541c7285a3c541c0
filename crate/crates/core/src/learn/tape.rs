//! Minimal reverse-mode differentiation over the primitives of the unrolled model.
//!
//! Values are flat vectors, complex or real. Gradients of complex values follow the
//! `∂L/∂Re + i·∂L/∂Im` convention, so a complex-linear map `A` pulls gradients back through
//! `Aᴴ`: the NUFFT and its adjoint swap roles, and real diagonal weights act on themselves.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::nufft::NufftPlan;
use crate::recon::{accumulate_shifted, conv3x3};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Complex(Vec<Complex64>),
    Real(Vec<f64>),
}

impl Value {
    pub fn len(&self) -> usize {
        match self {
            Value::Complex(v) => v.len(),
            Value::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_complex(&self) -> &[Complex64] {
        match self {
            Value::Complex(v) => v,
            Value::Real(_) => panic!("expected a complex value"),
        }
    }

    pub fn as_real(&self) -> &[f64] {
        match self {
            Value::Real(v) => v,
            Value::Complex(_) => panic!("expected a real value"),
        }
    }

    fn zeros_like(&self) -> Value {
        match self {
            Value::Complex(v) => Value::Complex(vec![Complex64::new(0.0, 0.0); v.len()]),
            Value::Real(v) => Value::Real(vec![0.0; v.len()]),
        }
    }

    fn same_kind(&self, other: &Value) -> bool {
        matches!(
            (self, other),
            (Value::Complex(_), Value::Complex(_)) | (Value::Real(_), Value::Real(_))
        )
    }

    fn add_assign(&mut self, other: &Value) {
        match (self, other) {
            (Value::Complex(a), Value::Complex(b)) => {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y)
            }
            (Value::Real(a), Value::Real(b)) => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
            _ => unreachable!("gradient kinds are fixed at record time"),
        }
    }
}

/// Handle to a recorded node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op<'a> {
    Constant,
    NufftForward(&'a NufftPlan, Var),
    NufftAdjoint(&'a NufftPlan, Var),
    ApplyDc(&'a [f64], Var),
    Scale(f64, Var),
    Add(Var, Var),
    Sub(Var, Var),
    /// `params[index] · input`.
    ParamScale(usize, Var),
    Slice {
        input: Var,
        start: usize,
    },
    Repeat {
        input: Var,
        times: usize,
    },
    Concat(Vec<Var>),
    ToPlanes {
        input: Var,
        hw: usize,
    },
    FromPlanes {
        input: Var,
        hw: usize,
    },
    Conv3x3 {
        input: Var,
        cin: usize,
        h: usize,
        w: usize,
        weights: usize,
        bias: usize,
        cout: usize,
    },
    Relu(Var),
    /// Mean of `| |x_i| − m_i |`.
    L1Magnitude {
        input: Var,
        reference: Vec<f64>,
    },
}

struct Node<'a> {
    op: Op<'a>,
    value: Value,
}

/// Record of a forward pass; [`backward`](GradientTape::backward) may run once.
pub struct GradientTape<'a> {
    params: Vec<f64>,
    nodes: Vec<Node<'a>>,
    consumed: bool,
}

/// Gradients of every recorded node plus the parameter vector.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Vec<f64>,
    nodes: Vec<Option<Value>>,
}

impl Gradients {
    /// Gradient reaching `var`, if any path led to it.
    pub fn wrt(&self, var: Var) -> Option<&Value> {
        self.nodes[var.0].as_ref()
    }
}

impl<'a> GradientTape<'a> {
    pub fn new(params: Vec<f64>) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            consumed: false,
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Value {
        &self.nodes[var.0].value
    }

    fn push(&mut self, op: Op<'a>, value: Value) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    fn complex(&self, var: Var) -> &[Complex64] {
        self.nodes[var.0].value.as_complex()
    }

    fn real(&self, var: Var) -> &[f64] {
        self.nodes[var.0].value.as_real()
    }

    pub fn constant(&mut self, value: Value) -> Var {
        self.push(Op::Constant, value)
    }

    pub fn nufft_forward(&mut self, plan: &'a NufftPlan, x: Var) -> Result<Var> {
        let (h, w) = plan.grid_shape();
        expect_len(self.complex(x).len(), h * w)?;
        let mut out = vec![Complex64::new(0.0, 0.0); plan.n_samples()];
        plan.forward_into(self.complex(x), &mut out);
        Ok(self.push(Op::NufftForward(plan, x), Value::Complex(out)))
    }

    pub fn nufft_adjoint(&mut self, plan: &'a NufftPlan, y: Var) -> Result<Var> {
        let (h, w) = plan.grid_shape();
        expect_len(self.complex(y).len(), plan.n_samples())?;
        let mut out = vec![Complex64::new(0.0, 0.0); h * w];
        plan.adjoint_into(self.complex(y), &mut out);
        Ok(self.push(Op::NufftAdjoint(plan, y), Value::Complex(out)))
    }

    pub fn apply_dc(&mut self, weights: &'a [f64], y: Var) -> Result<Var> {
        expect_len(self.complex(y).len(), weights.len())?;
        let out = self
            .complex(y)
            .iter()
            .zip(weights)
            .map(|(v, &d)| v * d)
            .collect();
        Ok(self.push(Op::ApplyDc(weights, y), Value::Complex(out)))
    }

    pub fn scale(&mut self, factor: f64, x: Var) -> Var {
        let value = match self.value(x) {
            Value::Complex(v) => Value::Complex(v.iter().map(|z| z * factor).collect()),
            Value::Real(v) => Value::Real(v.iter().map(|z| z * factor).collect()),
        };
        self.push(Op::Scale(factor, x), value)
    }

    fn binary(&mut self, a: Var, b: Var, sign: f64, op: Op<'a>) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if !va.same_kind(vb) {
            return Err(Error::Parameter(
                "cannot combine real and complex values".into(),
            ));
        }
        expect_len(vb.len(), va.len())?;
        let value = match (va, vb) {
            (Value::Complex(x), Value::Complex(y)) => Value::Complex(
                x.iter()
                    .zip(y)
                    .map(|(p, q)| if sign > 0.0 { p + q } else { p - q })
                    .collect(),
            ),
            (Value::Real(x), Value::Real(y)) => Value::Real(
                x.iter()
                    .zip(y)
                    .map(|(p, q)| if sign > 0.0 { p + q } else { p - q })
                    .collect(),
            ),
            _ => unreachable!(),
        };
        Ok(self.push(op, value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, 1.0, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, -1.0, Op::Sub(a, b))
    }

    /// `params[index] · x` for a complex `x`.
    pub fn param_scale(&mut self, index: usize, x: Var) -> Result<Var> {
        let p = *self
            .params
            .get(index)
            .ok_or_else(|| Error::Parameter(format!("parameter index {index} out of range")))?;
        let out = self.complex(x).iter().map(|z| z * p).collect();
        Ok(self.push(Op::ParamScale(index, x), Value::Complex(out)))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let total = self.value(x).len();
        if start + len > total {
            return Err(Error::Dimension {
                expected: total,
                got: start + len,
            });
        }
        let value = match self.value(x) {
            Value::Complex(v) => Value::Complex(v[start..start + len].to_vec()),
            Value::Real(v) => Value::Real(v[start..start + len].to_vec()),
        };
        Ok(self.push(Op::Slice { input: x, start }, value))
    }

    pub fn repeat(&mut self, x: Var, times: usize) -> Var {
        let value = match self.value(x) {
            Value::Complex(v) => Value::Complex(v.repeat(times)),
            Value::Real(v) => Value::Real(v.repeat(times)),
        };
        self.push(Op::Repeat { input: x, times }, value)
    }

    /// Concatenation of complex values.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let out = parts
            .iter()
            .flat_map(|&p| self.complex(p).iter().copied())
            .collect();
        self.push(Op::Concat(parts.to_vec()), Value::Complex(out))
    }

    /// Complex channels of `hw` pixels → interleaved `(re, im)` real planes.
    pub fn to_planes(&mut self, x: Var, hw: usize) -> Result<Var> {
        let v = self.complex(x);
        if hw == 0 || !v.len().is_multiple_of(hw) {
            return Err(Error::Dimension {
                expected: hw,
                got: v.len(),
            });
        }
        let mut out = Vec::with_capacity(2 * v.len());
        for ch in v.chunks_exact(hw) {
            out.extend(ch.iter().map(|z| z.re));
            out.extend(ch.iter().map(|z| z.im));
        }
        Ok(self.push(Op::ToPlanes { input: x, hw }, Value::Real(out)))
    }

    /// Inverse of [`to_planes`](Self::to_planes).
    pub fn from_planes(&mut self, x: Var, hw: usize) -> Result<Var> {
        let v = self.real(x);
        if hw == 0 || !v.len().is_multiple_of(2 * hw) {
            return Err(Error::Dimension {
                expected: 2 * hw,
                got: v.len(),
            });
        }
        let mut out = Vec::with_capacity(v.len() / 2);
        for pair in v.chunks_exact(2 * hw) {
            let (re, im) = pair.split_at(hw);
            out.extend(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)));
        }
        Ok(self.push(Op::FromPlanes { input: x, hw }, Value::Complex(out)))
    }

    /// 3×3 zero-padded convolution with kernels at `params[weights..]` (`[cout][cin][3][3]`)
    /// and biases at `params[bias..bias + cout]`.
    #[allow(clippy::too_many_arguments)]
    pub fn conv3x3(
        &mut self,
        x: Var,
        cin: usize,
        h: usize,
        w: usize,
        weights: usize,
        bias: usize,
        cout: usize,
    ) -> Result<Var> {
        expect_len(self.real(x).len(), cin * h * w)?;
        if weights + cout * cin * 9 > self.params.len() || bias + cout > self.params.len() {
            return Err(Error::Parameter(
                "convolution parameters out of range".into(),
            ));
        }
        let out = conv3x3(
            self.real(x),
            cin,
            h,
            w,
            &self.params[weights..weights + cout * cin * 9],
            &self.params[bias..bias + cout],
        );
        let op = Op::Conv3x3 {
            input: x,
            cin,
            h,
            w,
            weights,
            bias,
            cout,
        };
        Ok(self.push(op, Value::Real(out)))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.real(x).iter().map(|v| v.max(0.0)).collect();
        self.push(Op::Relu(x), Value::Real(out))
    }

    /// Scalar mean absolute difference between `|x|` and `reference`.
    pub fn l1_magnitude(&mut self, x: Var, reference: Vec<f64>) -> Result<Var> {
        let v = self.complex(x);
        expect_len(reference.len(), v.len())?;
        let loss = v
            .iter()
            .zip(&reference)
            .map(|(z, m)| (z.norm() - m).abs())
            .sum::<f64>()
            / v.len() as f64;
        Ok(self.push(
            Op::L1Magnitude {
                input: x,
                reference,
            },
            Value::Real(vec![loss]),
        ))
    }

    /// Pulls `output_grad` back from `output` through every recorded node.
    pub fn backward(&mut self, output: Var, output_grad: Value) -> Result<Gradients> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        let out_value = &self.nodes[output.0].value;
        if !out_value.same_kind(&output_grad) {
            return Err(Error::Parameter(
                "output gradient kind differs from the output".into(),
            ));
        }
        expect_len(output_grad.len(), out_value.len())?;
        self.consumed = true;

        let mut grads: Vec<Option<Value>> = vec![None; self.nodes.len()];
        let mut param_grads = vec![0.0; self.params.len()];
        grads[output.0] = Some(output_grad);

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let mut send = |var: Var, contribution: Value| {
                let slot = &mut grads[var.0];
                match slot {
                    Some(existing) => existing.add_assign(&contribution),
                    None => *slot = Some(contribution),
                }
            };
            match &node.op {
                Op::Constant => {}
                Op::NufftForward(plan, x) => {
                    let (h, w) = plan.grid_shape();
                    let mut out = vec![Complex64::new(0.0, 0.0); h * w];
                    plan.adjoint_into(g.as_complex(), &mut out);
                    send(*x, Value::Complex(out));
                }
                Op::NufftAdjoint(plan, y) => {
                    let mut out = vec![Complex64::new(0.0, 0.0); plan.n_samples()];
                    plan.forward_into(g.as_complex(), &mut out);
                    send(*y, Value::Complex(out));
                }
                Op::ApplyDc(d, y) => {
                    let out = g
                        .as_complex()
                        .iter()
                        .zip(d.iter())
                        .map(|(v, &w)| v * w)
                        .collect();
                    send(*y, Value::Complex(out));
                }
                Op::Scale(f, x) => {
                    let value = match &g {
                        Value::Complex(v) => Value::Complex(v.iter().map(|z| z * *f).collect()),
                        Value::Real(v) => Value::Real(v.iter().map(|z| z * *f).collect()),
                    };
                    send(*x, value);
                }
                Op::Add(a, b) => {
                    send(*a, g.clone());
                    send(*b, g.clone());
                }
                Op::Sub(a, b) => {
                    let neg = match &g {
                        Value::Complex(v) => Value::Complex(v.iter().map(|z| -z).collect()),
                        Value::Real(v) => Value::Real(v.iter().map(|z| -z).collect()),
                    };
                    send(*a, g.clone());
                    send(*b, neg);
                }
                Op::ParamScale(index, x) => {
                    let xv = self.nodes[x.0].value.as_complex();
                    let gv = g.as_complex();
                    param_grads[*index] += xv
                        .iter()
                        .zip(gv)
                        .map(|(a, b)| a.re * b.re + a.im * b.im)
                        .sum::<f64>();
                    let p = self.params[*index];
                    send(*x, Value::Complex(gv.iter().map(|z| z * p).collect()));
                }
                Op::Slice { input, start } => {
                    let mut full = self.nodes[input.0].value.zeros_like();
                    match (&mut full, &g) {
                        (Value::Complex(f), Value::Complex(v)) => {
                            f[*start..*start + v.len()].copy_from_slice(v)
                        }
                        (Value::Real(f), Value::Real(v)) => {
                            f[*start..*start + v.len()].copy_from_slice(v)
                        }
                        _ => unreachable!(),
                    }
                    send(*input, full);
                }
                Op::Repeat { input, times } => {
                    let n = self.nodes[input.0].value.len();
                    let mut acc = self.nodes[input.0].value.zeros_like();
                    for t in 0..*times {
                        let part = match &g {
                            Value::Complex(v) => Value::Complex(v[t * n..(t + 1) * n].to_vec()),
                            Value::Real(v) => Value::Real(v[t * n..(t + 1) * n].to_vec()),
                        };
                        acc.add_assign(&part);
                    }
                    send(*input, acc);
                }
                Op::Concat(parts) => {
                    let gv = g.as_complex();
                    let mut offset = 0;
                    for p in parts {
                        let n = self.nodes[p.0].value.len();
                        send(*p, Value::Complex(gv[offset..offset + n].to_vec()));
                        offset += n;
                    }
                }
                Op::ToPlanes { input, hw } => {
                    let gv = g.as_real();
                    let mut out = Vec::with_capacity(gv.len() / 2);
                    for pair in gv.chunks_exact(2 * hw) {
                        let (re, im) = pair.split_at(*hw);
                        out.extend(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)));
                    }
                    send(*input, Value::Complex(out));
                }
                Op::FromPlanes { input, hw } => {
                    let gv = g.as_complex();
                    let mut out = Vec::with_capacity(2 * gv.len());
                    for ch in gv.chunks_exact(*hw) {
                        out.extend(ch.iter().map(|z| z.re));
                        out.extend(ch.iter().map(|z| z.im));
                    }
                    send(*input, Value::Real(out));
                }
                Op::Conv3x3 {
                    input,
                    cin,
                    h,
                    w,
                    weights,
                    bias,
                    cout,
                } => {
                    let (cin, h, w, cout) = (*cin, *h, *w, *cout);
                    let hw = h * w;
                    let xv = self.nodes[input.0].value.as_real();
                    let gv = g.as_real();
                    let kernel = &self.params[*weights..*weights + cout * cin * 9];
                    let mut gx = vec![0.0; cin * hw];
                    for co in 0..cout {
                        let go = &gv[co * hw..(co + 1) * hw];
                        param_grads[*bias + co] += go.iter().sum::<f64>();
                        for ci in 0..cin {
                            let xi = &xv[ci * hw..(ci + 1) * hw];
                            let base = (co * cin + ci) * 9;
                            for t in 0..9 {
                                let (dy, dx) = (t as isize / 3 - 1, t as isize % 3 - 1);
                                param_grads[*weights + base + t] +=
                                    shifted_dot(go, xi, h, w, dy, dx);
                                let k = kernel[base + t];
                                if k != 0.0 {
                                    accumulate_shifted(
                                        &mut gx[ci * hw..(ci + 1) * hw],
                                        go,
                                        h,
                                        w,
                                        -dy,
                                        -dx,
                                        k,
                                    );
                                }
                            }
                        }
                    }
                    send(*input, Value::Real(gx));
                }
                Op::Relu(x) => {
                    let out = &node.value.as_real();
                    let gx = g
                        .as_real()
                        .iter()
                        .zip(out.iter())
                        .map(|(&gi, &o)| if o > 0.0 { gi } else { 0.0 })
                        .collect();
                    send(*x, Value::Real(gx));
                }
                Op::L1Magnitude { input, reference } => {
                    let seed = g.as_real()[0];
                    let xv = self.nodes[input.0].value.as_complex();
                    let n = xv.len() as f64;
                    let gx = xv
                        .iter()
                        .zip(reference)
                        .map(|(z, &m)| {
                            let r = z.norm();
                            let diff = r - m;
                            if r == 0.0 || diff == 0.0 {
                                Complex64::new(0.0, 0.0)
                            } else {
                                z * (diff.signum() * seed / (n * r))
                            }
                        })
                        .collect();
                    send(*input, Value::Complex(gx));
                }
            }
            grads[i] = Some(g);
        }
        Ok(Gradients {
            params: param_grads,
            nodes: grads,
        })
    }
}

/// `Σ a[r, c] · b[r + dy, c + dx]` over positions where both exist.
fn shifted_dot(a: &[f64], b: &[f64], h: usize, w: usize, dy: isize, dx: isize) -> f64 {
    let r0 = (-dy).max(0) as usize;
    let r1 = (h as isize - dy.max(0)) as usize;
    let c0 = (-dx).max(0) as usize;
    let c1 = (w as isize - dx.max(0)) as usize;
    let mut acc = 0.0;
    for r in r0..r1 {
        let sr = (r as isize + dy) as usize;
        let x = &a[r * w + c0..r * w + c1];
        let y = &b[sr * w + (c0 as isize + dx) as usize..sr * w + (c1 as isize + dx) as usize];
        acc += x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    }
    acc
}

fn expect_len(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

/// Parameter gradient of a scalar-or-vector output; consumes the tape.
pub fn backward(tape: &mut GradientTape<'_>, output: Var, output_grad: Value) -> Result<Vec<f64>> {
    Ok(tape.backward(output, output_grad)?.params)
}
