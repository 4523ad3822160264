//! Dense layers over one flat parameter vector, plus the optimizers.
//!
//! Weights of a layer are stored row-major as `inputs × outputs`, followed by
//! the `outputs` biases, so a batch forward pass is `Y = X·W + b`.

use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub offset: usize,
}

impl LayerShape {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.inputs * self.outputs;
        start..start + self.outputs
    }

    pub fn len(&self) -> usize {
        (self.inputs + 1) * self.outputs
    }
}

/// A set of dense layers sharing one parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layers {
    pub shapes: Vec<LayerShape>,
    pub params: Vec<f64>,
}

impl Layers {
    /// Zero-initialised layers with the given `(inputs, outputs)` pairs.
    pub fn zeros(dims: &[(usize, usize)]) -> Self {
        let mut offset = 0;
        let shapes = dims
            .iter()
            .map(|&(inputs, outputs)| {
                let s = LayerShape {
                    inputs,
                    outputs,
                    offset,
                };
                offset += s.len();
                s
            })
            .collect();
        Self {
            shapes,
            params: vec![0.0; offset],
        }
    }

    /// Glorot-uniform weights scaled by `gain[k]`, zero biases.
    pub fn glorot<R: Rng + ?Sized>(dims: &[(usize, usize)], gains: &[f64], rng: &mut R) -> Self {
        let mut layers = Self::zeros(dims);
        for (k, shape) in layers.shapes.clone().iter().enumerate() {
            let limit = (6.0 / (shape.inputs + shape.outputs) as f64).sqrt() * gains[k];
            for w in &mut layers.params[shape.weight_range()] {
                *w = rng.random_range(-limit..=limit);
            }
        }
        layers
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// `out = x·W + b` for a batch of `batch` rows.
    pub fn forward(&self, layer: usize, x: &[f64], batch: usize, out: &mut Vec<f64>) {
        let s = self.shapes[layer];
        debug_assert_eq!(x.len(), batch * s.inputs);
        out.clear();
        out.reserve(batch * s.outputs);
        let bias = &self.params[s.bias_range()];
        for _ in 0..batch {
            out.extend_from_slice(bias);
        }
        gemm(
            batch,
            s.inputs,
            s.outputs,
            x,
            (s.inputs, 1),
            &self.params[s.weight_range()],
            (s.outputs, 1),
            out,
            1.0,
        );
    }

    /// Single-row forward pass. Zero inputs are skipped, which pays off on
    /// sparse binary observations.
    pub fn forward_single(&self, layer: usize, x: &[f64], out: &mut Vec<f64>) {
        let s = self.shapes[layer];
        debug_assert_eq!(x.len(), s.inputs);
        out.clear();
        out.extend_from_slice(&self.params[s.bias_range()]);
        let w = &self.params[s.weight_range()];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &w[i * s.outputs..(i + 1) * s.outputs];
            for (o, &wv) in out.iter_mut().zip(row) {
                *o += xi * wv;
            }
        }
    }

    /// Accumulates parameter gradients of one layer into `grad` and, if
    /// requested, writes the input gradient `dy·Wᵀ` into `grad_in`.
    pub fn backward(
        &self,
        layer: usize,
        x: &[f64],
        dy: &[f64],
        batch: usize,
        grad: &mut [f64],
        grad_in: Option<&mut Vec<f64>>,
    ) {
        let s = self.shapes[layer];
        // dW += Xᵀ·dY
        gemm(
            s.inputs,
            batch,
            s.outputs,
            x,
            (1, s.inputs),
            dy,
            (s.outputs, 1),
            &mut grad[s.weight_range()],
            1.0,
        );
        let db = &mut grad[s.bias_range()];
        for row in dy.chunks_exact(s.outputs) {
            for (b, g) in db.iter_mut().zip(row) {
                *b += g;
            }
        }
        if let Some(gx) = grad_in {
            gx.clear();
            gx.resize(batch * s.inputs, 0.0);
            // dX = dY·Wᵀ
            gemm(
                batch,
                s.outputs,
                s.inputs,
                dy,
                (s.outputs, 1),
                &self.params[s.weight_range()],
                (1, s.outputs),
                gx,
                0.0,
            );
        }
    }
}

/// `C = A·B + beta·C` with `A: m×k`, `B: k×n`, row-major `C`. Strides are
/// `(row, column)` in elements.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_stride: (usize, usize),
    b: &[f64],
    b_stride: (usize, usize),
    c: &mut [f64],
    beta: f64,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n);
    if k > 0 {
        assert!(a.len() > (m - 1) * a_stride.0 + (k - 1) * a_stride.1);
        assert!(b.len() > (k - 1) * b_stride.0 + (n - 1) * b_stride.1);
    }
    // SAFETY: bounds of every operand were checked above against the
    // strides and dimensions passed to dgemm.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_stride.0 as isize,
            a_stride.1 as isize,
            b.as_ptr(),
            b_stride.0 as isize,
            b_stride.1 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn relu_inplace(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zeroes `grad` where the post-activation value is not positive.
pub fn relu_backward(activated: &[f64], grad: &mut [f64]) {
    for (g, &a) in grad.iter_mut().zip(activated) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Adaptive moment estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let mh = *m / bc1;
            let vh = *v / bc2;
            *p -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

pub fn sgd_step(params: &mut [f64], grad: &[f64], lr: f64) {
    for (p, g) in params.iter_mut().zip(grad) {
        *p -= lr * g;
    }
}
