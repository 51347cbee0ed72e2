//! Float reference model of the Minion Recurrent Unit network.
//!
//! A MiRU layer is a GRU with its gates replaced by two fixed scalars: the
//! reset coefficient `beta` scales the previous hidden state before it enters
//! the recurrent weights, and the update coefficient `lambda` interpolates
//! between the previous state and the candidate state:
//!
//! ```text
//! a_t  = x_t · W_h + (beta · h_{t-1}) · U_h + b_h
//! h~_t = tanh(a_t)
//! h_t  = lambda · h_{t-1} + (1 - lambda) · h~_t
//! y    = softmax(h_{n_T} · W_o + b_o)
//! ```
//!
//! The same code is the functional oracle for the crossbar-backed datapath.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{all_finite, softmax, tanh, Matrix};
use crate::rng::{stream, Stream};
use crate::{Error, Result};

/// Layer sizes shared by every network and task in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dims {
    pub n_x: usize,
    pub n_h: usize,
    pub n_y: usize,
    pub n_t: usize,
}

impl Dims {
    pub fn new(n_x: usize, n_h: usize, n_y: usize, n_t: usize) -> Result<Self> {
        if n_x == 0 || n_h == 0 || n_y == 0 || n_t == 0 {
            return Err(Error::Config("all network dimensions must be positive".into()));
        }
        Ok(Self { n_x, n_h, n_y, n_t })
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkParams {
    /// Input weights, `n_x × n_h`.
    pub w_h: Matrix,
    /// Recurrent weights, `n_h × n_h`.
    pub u_h: Matrix,
    /// Readout weights, `n_h × n_y`.
    pub w_o: Matrix,
    pub b_h: Vec<f64>,
    pub b_o: Vec<f64>,
    beta: f64,
    lambda: f64,
    /// Fixed random feedback projection, `n_y × n_h`.
    psi: Matrix,
}

impl NetworkParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        w_h: Matrix,
        u_h: Matrix,
        w_o: Matrix,
        b_h: Vec<f64>,
        b_o: Vec<f64>,
        beta: f64,
        lambda: f64,
        psi: Matrix,
    ) -> Result<Self> {
        let n_h = w_h.cols();
        let n_y = w_o.cols();
        u_h.check_shape("U_h", n_h, n_h)?;
        w_o.check_shape("W_o", n_h, n_y)?;
        psi.check_shape("Psi", n_y, n_h)?;
        if b_h.len() != n_h {
            return Err(Error::dim("b_h", n_h, b_h.len()));
        }
        if b_o.len() != n_y {
            return Err(Error::dim("b_o", n_y, b_o.len()));
        }
        check_coefficient("beta", beta)?;
        check_coefficient("lambda", lambda)?;
        let params = Self {
            w_h,
            u_h,
            w_o,
            b_h,
            b_o,
            beta,
            lambda,
            psi,
        };
        if !params.is_finite() {
            return Err(Error::NonFinite("NetworkParams"));
        }
        Ok(params)
    }

    /// Seeded initialization: weights uniform in `±1/√fan_in`, zero biases,
    /// feedback matrix uniform in `±1/√n_y`.
    pub fn init(dims: Dims, beta: f64, lambda: f64, seed: u64) -> Result<Self> {
        let mut rng = stream(seed, Stream::WeightInit);
        let w_h = Matrix::uniform(dims.n_x, dims.n_h, fan_in_bound(dims.n_x), &mut rng);
        let u_h = Matrix::uniform(dims.n_h, dims.n_h, fan_in_bound(dims.n_h), &mut rng);
        let w_o = Matrix::uniform(dims.n_h, dims.n_y, fan_in_bound(dims.n_h), &mut rng);
        let mut fb = stream(seed, Stream::Feedback);
        let psi = Matrix::uniform(dims.n_y, dims.n_h, fan_in_bound(dims.n_y), &mut fb);
        Self::new(
            w_h,
            u_h,
            w_o,
            vec![0.0; dims.n_h],
            vec![0.0; dims.n_y],
            beta,
            lambda,
            psi,
        )
    }

    pub fn n_x(&self) -> usize {
        self.w_h.rows()
    }

    pub fn n_h(&self) -> usize {
        self.w_h.cols()
    }

    pub fn n_y(&self) -> usize {
        self.w_o.cols()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn psi(&self) -> &Matrix {
        &self.psi
    }

    pub fn is_finite(&self) -> bool {
        self.w_h.is_finite()
            && self.u_h.is_finite()
            && self.w_o.is_finite()
            && self.psi.is_finite()
            && all_finite(&self.b_h)
            && all_finite(&self.b_o)
    }
}

fn fan_in_bound(fan_in: usize) -> f64 {
    1.0 / libm::sqrt(fan_in as f64)
}

pub(crate) fn check_coefficient(name: &'static str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::domain(name, alloc::format!("{v} not in [0, 1]")));
    }
    Ok(())
}

/// One labeled fixed-length sequence. `inputs` holds `n_T` rows of `n_x`
/// features, row-major, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Example {
    inputs: Vec<f64>,
    n_x: usize,
    label: usize,
}

impl Example {
    pub fn new(inputs: Vec<f64>, n_x: usize, label: usize) -> Result<Self> {
        if n_x == 0 || inputs.is_empty() || !inputs.len().is_multiple_of(n_x) {
            return Err(Error::dim("Example inputs", n_x.max(1), inputs.len()));
        }
        if let Some(bad) = inputs.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::domain("Example inputs", alloc::format!("{bad} not in [0, 1]")));
        }
        Ok(Self { inputs, n_x, label })
    }

    #[inline]
    pub fn n_t(&self) -> usize {
        self.inputs.len() / self.n_x
    }

    #[inline]
    pub fn n_x(&self) -> usize {
        self.n_x
    }

    #[inline]
    pub fn label(&self) -> usize {
        self.label
    }

    #[inline]
    pub fn step(&self, t: usize) -> &[f64] {
        &self.inputs[t * self.n_x..(t + 1) * self.n_x]
    }

    #[inline]
    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn one_hot(&self, n_y: usize) -> Vec<f64> {
        let mut y = vec![0.0; n_y];
        y[self.label] = 1.0;
        y
    }

    pub(crate) fn check_against(&self, n_x: usize, n_y: usize) -> Result<()> {
        if self.n_x != n_x {
            return Err(Error::dim("example n_x", n_x, self.n_x));
        }
        if self.label >= n_y {
            return Err(Error::domain(
                "example label",
                alloc::format!("class {} with n_y = {n_y}", self.label),
            ));
        }
        Ok(())
    }
}

/// A batch of examples sharing one shape.
pub type SequenceBatch = [Example];

/// Per-step values retained from a forward pass; row `t` holds step `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenTrace {
    pub h: Matrix,
    pub h_tilde: Matrix,
    pub preact: Matrix,
}

impl HiddenTrace {
    pub fn zeros(n_t: usize, n_h: usize) -> Self {
        Self {
            h: Matrix::zeros(n_t, n_h),
            h_tilde: Matrix::zeros(n_t, n_h),
            preact: Matrix::zeros(n_t, n_h),
        }
    }

    pub fn n_t(&self) -> usize {
        self.h.rows()
    }

    pub fn n_h(&self) -> usize {
        self.h.cols()
    }

    /// `h^{t}` for zero-based step index `t`.
    pub fn state(&self, t: usize) -> &[f64] {
        self.h.row(t)
    }

    pub fn last_state(&self) -> &[f64] {
        self.h.row(self.h.rows() - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub h: Vec<f64>,
    pub h_tilde: Vec<f64>,
    pub preact: Vec<f64>,
}

pub fn forward_step(params: &NetworkParams, x_t: &[f64], h_prev: &[f64]) -> Result<StepOutput> {
    if x_t.len() != params.n_x() {
        return Err(Error::dim("forward_step x_t", params.n_x(), x_t.len()));
    }
    if h_prev.len() != params.n_h() {
        return Err(Error::dim("forward_step h_prev", params.n_h(), h_prev.len()));
    }
    if !all_finite(x_t) || !all_finite(h_prev) {
        return Err(Error::NonFinite("forward_step input"));
    }
    let n_h = params.n_h();
    let mut out = StepOutput {
        h: vec![0.0; n_h],
        h_tilde: vec![0.0; n_h],
        preact: vec![0.0; n_h],
    };
    let mut scratch = vec![0.0; n_h];
    step_into(
        params,
        x_t,
        h_prev,
        &mut scratch,
        &mut out.preact,
        &mut out.h_tilde,
        &mut out.h,
    );
    Ok(out)
}

#[inline]
fn step_into(
    params: &NetworkParams,
    x_t: &[f64],
    h_prev: &[f64],
    scratch: &mut [f64],
    preact: &mut [f64],
    h_tilde: &mut [f64],
    h: &mut [f64],
) {
    preact.copy_from_slice(&params.b_h);
    params.w_h.accumulate_vec_mat(x_t, preact);
    for (s, hp) in scratch.iter_mut().zip(h_prev) {
        *s = params.beta * hp;
    }
    params.u_h.accumulate_vec_mat(scratch, preact);
    let lambda = params.lambda;
    for j in 0..preact.len() {
        h_tilde[j] = tanh(preact[j]);
        h[j] = lambda * h_prev[j] + (1.0 - lambda) * h_tilde[j];
    }
}

/// Runs the sequence from `h^0 = 0` and returns the trace with the softmax
/// readout of the final state.
pub fn forward_sequence(params: &NetworkParams, ex: &Example) -> Result<(HiddenTrace, Vec<f64>)> {
    ex.check_against(params.n_x(), params.n_y())?;
    let n_h = params.n_h();
    let n_t = ex.n_t();
    let mut trace = HiddenTrace::zeros(n_t, n_h);
    let mut h_prev = vec![0.0; n_h];
    let mut scratch = vec![0.0; n_h];
    let mut preact = vec![0.0; n_h];
    let mut h_tilde = vec![0.0; n_h];
    let mut h = vec![0.0; n_h];
    for t in 0..n_t {
        step_into(
            params,
            ex.step(t),
            &h_prev,
            &mut scratch,
            &mut preact,
            &mut h_tilde,
            &mut h,
        );
        trace.preact.row_mut(t).copy_from_slice(&preact);
        trace.h_tilde.row_mut(t).copy_from_slice(&h_tilde);
        trace.h.row_mut(t).copy_from_slice(&h);
        core::mem::swap(&mut h_prev, &mut h);
    }
    let y_hat = readout(params, &h_prev)?;
    Ok((trace, y_hat))
}

pub fn readout(params: &NetworkParams, h_last: &[f64]) -> Result<Vec<f64>> {
    let mut logits = params.b_o.clone();
    params.w_o.accumulate_vec_mat(h_last, &mut logits);
    softmax(&logits)
}
