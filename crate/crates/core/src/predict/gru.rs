//! Single-layer gated recurrent unit with an affine readout of the final
//! hidden state.
//!
//! Per step, with gates stacked as `[reset; update; candidate]`:
//!
//! ```text
//! r  = σ(Wx_r x + bx_r + Wh_r h + bh_r)
//! z  = σ(Wx_z x + bx_z + Wh_z h + bh_z)
//! n  = tanh(Wx_n x + bx_n + r ⊙ (Wh_n h + bh_n))
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```
//!
//! starting from `h = 0`, then `y = Wo h_last + bo`.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::WindowedDataset;
use crate::error::{Error, Result};
use crate::Scalar;

/// Parameters stored in one flat vector; see [`GruModel::tensors`] for the
/// layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GruModel<T> {
    input_size: usize,
    hidden_size: usize,
    output_size: usize,
    params: Vec<T>,
}

/// Named slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpan {
    pub name: &'static str,
    pub range: Range<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    wx: usize,
    wh: usize,
    bx: usize,
    bh: usize,
    wo: usize,
    bo: usize,
    end: usize,
}

impl Layout {
    fn new(d: usize, h: usize, o: usize) -> Self {
        let wx = 0;
        let wh = wx + 3 * h * d;
        let bx = wh + 3 * h * h;
        let bh = bx + 3 * h;
        let wo = bh + 3 * h;
        let bo = wo + o * h;
        Self { wx, wh, bx, bh, wo, bo, end: bo + o }
    }
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// `out[r] += Σ_c w[r·cols + c]·x[c]`
#[inline]
fn gemv_acc<T: Scalar>(w: &[T], cols: usize, x: &[T], out: &mut [T]) {
    for (row, o) in w.chunks_exact(cols).zip(out.iter_mut()) {
        let mut acc = T::zero();
        for (&a, &b) in row.iter().zip(x) {
            acc += a * b;
        }
        *o += acc;
    }
}

/// `out[c] += Σ_r w[r·cols + c]·g[r]`
#[inline]
fn gemv_t_acc<T: Scalar>(w: &[T], cols: usize, g: &[T], out: &mut [T]) {
    for (row, &gr) in w.chunks_exact(cols).zip(g) {
        if gr == T::zero() {
            continue;
        }
        for (o, &a) in out.iter_mut().zip(row) {
            *o += a * gr;
        }
    }
}

/// `w[r·cols + c] += g[r]·x[c]`
#[inline]
fn outer_acc<T: Scalar>(w: &mut [T], cols: usize, g: &[T], x: &[T]) {
    for (row, &gr) in w.chunks_exact_mut(cols).zip(g) {
        if gr == T::zero() {
            continue;
        }
        for (a, &b) in row.iter_mut().zip(x) {
            *a += gr * b;
        }
    }
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    steps: usize,
    hidden: usize,
    /// `(steps + 1) × H`; row 0 is the zero initial state.
    h: Vec<T>,
    r: Vec<T>,
    z: Vec<T>,
    n: Vec<T>,
    /// `Wh_n h + bh_n` per step, needed for the reset-gate gradient.
    hn: Vec<T>,
    pre: Vec<T>,
    y: Vec<T>,
}

impl<T: Scalar> Tape<T> {
    pub(crate) fn new(steps: usize, hidden: usize, outputs: usize) -> Self {
        Self {
            steps,
            hidden,
            h: vec![T::zero(); (steps + 1) * hidden],
            r: vec![T::zero(); steps * hidden],
            z: vec![T::zero(); steps * hidden],
            n: vec![T::zero(); steps * hidden],
            hn: vec![T::zero(); steps * hidden],
            pre: vec![T::zero(); 6 * hidden],
            y: vec![T::zero(); outputs],
        }
    }

    fn ensure(&mut self, steps: usize, hidden: usize, outputs: usize) {
        if self.steps != steps || self.hidden != hidden || self.y.len() != outputs {
            *self = Self::new(steps, hidden, outputs);
        }
    }

    pub fn output(&self) -> &[T] {
        &self.y
    }
}

/// Reusable buffers for [`GruModel::loss_and_grad`].
#[derive(Debug, Clone)]
pub struct Scratch<T> {
    tape: Tape<T>,
    dh: Vec<T>,
    dh_prev: Vec<T>,
    dax: Vec<T>,
    dah: Vec<T>,
    gy: Vec<T>,
}

impl<T: Scalar> Default for Scratch<T> {
    fn default() -> Self {
        Self { tape: Tape::new(0, 0, 0), dh: Vec::new(), dh_prev: Vec::new(), dax: Vec::new(), dah: Vec::new(), gy: Vec::new() }
    }
}

impl<T: Scalar> GruModel<T> {
    /// All-zero parameters.
    pub fn zeros(input_size: usize, hidden_size: usize, output_size: usize) -> Result<Self> {
        if input_size == 0 || hidden_size == 0 || output_size == 0 {
            return Err(Error::InvalidArgument("GRU dimensions must be positive".into()));
        }
        let n = Layout::new(input_size, hidden_size, output_size).end;
        Ok(Self { input_size, hidden_size, output_size, params: vec![T::zero(); n] })
    }

    /// Every parameter drawn uniformly from `[−1/√H, 1/√H]`.
    pub fn init_uniform(input_size: usize, hidden_size: usize, output_size: usize, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(input_size, hidden_size, output_size)?;
        let bound = 1.0 / (hidden_size as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut model.params {
            *p = T::lit(rng.random_range(-bound..=bound));
        }
        Ok(model)
    }

    pub fn from_params(input_size: usize, hidden_size: usize, output_size: usize, params: Vec<T>) -> Result<Self> {
        let model = Self::zeros(input_size, hidden_size, output_size)?;
        if params.len() != model.params.len() {
            return Err(Error::Shape(format!(
                "{} parameters given, model needs {}",
                params.len(),
                model.params.len()
            )));
        }
        Ok(Self { params, ..model })
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn layout(&self) -> Layout {
        Layout::new(self.input_size, self.hidden_size, self.output_size)
    }

    /// Named parameter tensors: input weights `w_x` (3H×D), recurrent
    /// weights `w_h` (3H×H), their biases, and the readout `w_o` (O×H), `b_o`.
    pub fn tensors(&self) -> Vec<TensorSpan> {
        let l = self.layout();
        vec![
            TensorSpan { name: "w_x", range: l.wx..l.wh },
            TensorSpan { name: "w_h", range: l.wh..l.bx },
            TensorSpan { name: "b_x", range: l.bx..l.bh },
            TensorSpan { name: "b_h", range: l.bh..l.wo },
            TensorSpan { name: "w_o", range: l.wo..l.bo },
            TensorSpan { name: "b_o", range: l.bo..l.end },
        ]
    }

    fn check_input(&self, input: &[T]) -> Result<usize> {
        if input.is_empty() || !input.len().is_multiple_of(self.input_size) {
            return Err(Error::Shape(format!(
                "input of {} values is not a nonempty sequence of {}-vectors",
                input.len(),
                self.input_size
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite model input".into()));
        }
        Ok(input.len() / self.input_size)
    }

    fn run(&self, input: &[T], tape: &mut Tape<T>) {
        let (d, hs, o) = (self.input_size, self.hidden_size, self.output_size);
        let steps = input.len() / d;
        tape.ensure(steps, hs, o);
        let l = self.layout();
        let p = &self.params;
        let (wx, wh) = (&p[l.wx..l.wh], &p[l.wh..l.bx]);
        let (bx, bh) = (&p[l.bx..l.bh], &p[l.bh..l.wo]);
        tape.h[..hs].iter_mut().for_each(|v| *v = T::zero());

        for t in 0..steps {
            let x = &input[t * d..(t + 1) * d];
            let (ax, ah) = tape.pre.split_at_mut(3 * hs);
            ax.copy_from_slice(bx);
            ah.copy_from_slice(bh);
            gemv_acc(wx, d, x, ax);
            let (h_prev, h_next) = tape.h[t * hs..(t + 2) * hs].split_at_mut(hs);
            gemv_acc(wh, hs, h_prev, ah);
            let row = t * hs..(t + 1) * hs;
            let (r, z, n, hn) = (
                &mut tape.r[row.clone()],
                &mut tape.z[row.clone()],
                &mut tape.n[row.clone()],
                &mut tape.hn[row],
            );
            for k in 0..hs {
                r[k] = sigmoid(ax[k] + ah[k]);
                z[k] = sigmoid(ax[hs + k] + ah[hs + k]);
                hn[k] = ah[2 * hs + k];
                n[k] = (ax[2 * hs + k] + r[k] * hn[k]).tanh();
                h_next[k] = (T::one() - z[k]) * n[k] + z[k] * h_prev[k];
            }
        }
        let h_last = &tape.h[steps * hs..(steps + 1) * hs];
        tape.y.copy_from_slice(&p[l.bo..l.end]);
        gemv_acc(&p[l.wo..l.bo], hs, h_last, &mut tape.y);
    }

    /// One-step-ahead prediction from a step-major `(L − 1) × D` history.
    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        let steps = self.check_input(input)?;
        let mut tape = Tape::new(steps, self.hidden_size, self.output_size);
        self.run(input, &mut tape);
        Ok(tape.y)
    }

    pub(crate) fn forward_into(&self, input: &[T], tape: &mut Tape<T>) {
        self.run(input, tape);
    }

    fn backward(&self, input: &[T], scratch: &mut Scratch<T>, grad: &mut [T]) {
        let (d, hs) = (self.input_size, self.hidden_size);
        let steps = input.len() / d;
        let l = self.layout();
        let p = &self.params;
        let Scratch { tape, dh, dh_prev, dax, dah, gy } = scratch;
        dh.resize(hs, T::zero());
        dh_prev.resize(hs, T::zero());
        dax.resize(3 * hs, T::zero());
        dah.resize(3 * hs, T::zero());

        let h_last = &tape.h[steps * hs..(steps + 1) * hs];
        outer_acc(&mut grad[l.wo..l.bo], hs, gy, h_last);
        for (g, &v) in grad[l.bo..l.end].iter_mut().zip(gy.iter()) {
            *g += v;
        }
        dh.iter_mut().for_each(|v| *v = T::zero());
        gemv_t_acc(&p[l.wo..l.bo], hs, gy, dh);

        for t in (0..steps).rev() {
            let row = t * hs..(t + 1) * hs;
            let (r, z, n, hn) = (&tape.r[row.clone()], &tape.z[row.clone()], &tape.n[row.clone()], &tape.hn[row]);
            let h_prev = &tape.h[t * hs..(t + 1) * hs];
            for k in 0..hs {
                let dn = dh[k] * (T::one() - z[k]);
                let dz = dh[k] * (h_prev[k] - n[k]);
                dh_prev[k] = dh[k] * z[k];
                let da_n = dn * (T::one() - n[k] * n[k]);
                let da_r = da_n * hn[k] * r[k] * (T::one() - r[k]);
                let da_z = dz * z[k] * (T::one() - z[k]);
                dax[k] = da_r;
                dax[hs + k] = da_z;
                dax[2 * hs + k] = da_n;
                dah[k] = da_r;
                dah[hs + k] = da_z;
                dah[2 * hs + k] = da_n * r[k];
            }
            let x = &input[t * d..(t + 1) * d];
            outer_acc(&mut grad[l.wx..l.wh], d, dax, x);
            outer_acc(&mut grad[l.wh..l.bx], hs, dah, h_prev);
            for (g, &v) in grad[l.bx..l.bh].iter_mut().zip(dax.iter()) {
                *g += v;
            }
            for (g, &v) in grad[l.bh..l.wo].iter_mut().zip(dah.iter()) {
                *g += v;
            }
            gemv_t_acc(&p[l.wh..l.bx], hs, dah, dh_prev);
            std::mem::swap(dh, dh_prev);
        }
    }

    fn check_dataset(&self, ds: &WindowedDataset<T>) -> Result<()> {
        if ds.width() != self.input_size || ds.width() != self.output_size {
            return Err(Error::Shape(format!(
                "dataset width {} does not match model ({} in, {} out)",
                ds.width(),
                self.input_size,
                self.output_size
            )));
        }
        Ok(())
    }

    /// Mean squared error over the selected samples and all outputs.
    pub fn mse(&self, ds: &WindowedDataset<T>, samples: &[usize]) -> Result<T> {
        self.check_dataset(ds)?;
        if samples.is_empty() {
            return Err(Error::InvalidArgument("no samples selected".into()));
        }
        let mut tape = Tape::new(ds.history(), self.hidden_size, self.output_size);
        let mut total = T::zero();
        for &s in samples {
            self.run(ds.input(s), &mut tape);
            for (&y, &t) in tape.y.iter().zip(ds.target(s)) {
                total += (y - t) * (y - t);
            }
        }
        Ok(total / T::from_usize_lossy(samples.len() * self.output_size))
    }

    /// Mean squared error over the selected samples, with its gradient
    /// (backpropagation through time) written into `grad` (overwritten).
    pub fn loss_and_grad(
        &self,
        ds: &WindowedDataset<T>,
        samples: &[usize],
        grad: &mut [T],
        scratch: &mut Scratch<T>,
    ) -> Result<T> {
        self.check_dataset(ds)?;
        if grad.len() != self.params.len() {
            return Err(Error::Shape("gradient buffer has the wrong length".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidArgument("no samples selected".into()));
        }
        grad.iter_mut().for_each(|g| *g = T::zero());
        let denom = T::from_usize_lossy(samples.len() * self.output_size);
        let two = T::lit(2.0);
        let mut total = T::zero();
        for &s in samples {
            let input = ds.input(s);
            self.run(input, &mut scratch.tape);
            scratch.gy.clear();
            for (&y, &t) in scratch.tape.y.iter().zip(ds.target(s)) {
                let e = y - t;
                total += e * e;
                scratch.gy.push(two * e / denom);
            }
            self.backward(input, scratch, grad);
        }
        Ok(total / denom)
    }
}
