//! Backend-agnostic training step: forward, DFA gradients averaged over the
//! batch, K-WTA sparsification, update.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::crossbar::CrossbarNetwork;
use crate::dfa::{
    apply_update_in_place, cross_entropy, dfa_gradients, dfa_gradients_with, kwta_sparsify, Feedback, GradientSet,
    TrainConfig,
};
use crate::math::argmax;
use crate::miru::{forward_sequence, Example, HiddenTrace, NetworkParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum BackendKind {
    #[default]
    Reference,
    Crossbar,
}

/// Per-entry count of nonzero updates applied to the float weights, the
/// write events a device array would have seen.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WriteTally {
    pub w_h: Vec<u64>,
    pub u_h: Vec<u64>,
    pub w_o: Vec<u64>,
}

impl WriteTally {
    fn for_params(p: &NetworkParams) -> Self {
        Self {
            w_h: vec![0; p.w_h.len()],
            u_h: vec![0; p.u_h.len()],
            w_o: vec![0; p.w_o.len()],
        }
    }

    fn record(&mut self, g: &GradientSet) {
        for (tally, m) in [
            (&mut self.w_h, &g.d_w_h),
            (&mut self.u_h, &g.d_u_h),
            (&mut self.w_o, &g.d_w_o),
        ] {
            for (c, v) in tally.iter_mut().zip(m.as_slice()) {
                if *v != 0.0 {
                    *c += 1;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[allow(clippy::large_enum_variant)]
pub enum Model {
    Reference { params: NetworkParams, tally: WriteTally },
    Crossbar(Box<CrossbarNetwork>),
}

impl Model {
    pub fn reference(params: NetworkParams) -> Self {
        let tally = WriteTally::for_params(&params);
        Model::Reference { params, tally }
    }

    pub fn crossbar(net: CrossbarNetwork) -> Self {
        Model::Crossbar(Box::new(net))
    }

    pub fn kind(&self) -> BackendKind {
        match self {
            Model::Reference { .. } => BackendKind::Reference,
            Model::Crossbar(_) => BackendKind::Crossbar,
        }
    }

    pub fn n_x(&self) -> usize {
        match self {
            Model::Reference { params, .. } => params.n_x(),
            Model::Crossbar(net) => net.dims().n_x,
        }
    }

    pub fn forward(&mut self, ex: &Example) -> Result<(HiddenTrace, Vec<f64>)> {
        match self {
            Model::Reference { params, .. } => forward_sequence(params, ex),
            Model::Crossbar(net) => net.forward(ex),
        }
    }

    /// Predicted class for a sequence. Takes only features: no task identity.
    pub fn predict(&mut self, ex: &Example) -> Result<usize> {
        let (_, y) = self.forward(ex)?;
        Ok(argmax(&y))
    }

    pub fn gradients(&self, ex: &Example, trace: &HiddenTrace, y_hat: &[f64]) -> Result<GradientSet> {
        match self {
            Model::Reference { params, .. } => dfa_gradients(params, ex, trace, y_hat),
            Model::Crossbar(net) => {
                let fb = Feedback {
                    psi: net.psi(),
                    beta: net.beta(),
                    lambda: net.lambda(),
                };
                dfa_gradients_with(&fb, net.dims().n_x, ex, trace, y_hat)
            }
        }
    }

    /// Applies `−lr · g`; returns the number of weight entries written.
    pub fn apply(&mut self, g: &GradientSet, lr: f64) -> Result<u64> {
        match self {
            Model::Reference { params, tally } => {
                apply_update_in_place(params, g, lr)?;
                tally.record(g);
                Ok(g.weight_nonzeros() as u64)
            }
            Model::Crossbar(net) => Ok(net.apply_update(g, lr)?.writes),
        }
    }

    /// Per-device write counts, one slice per weight array.
    pub fn write_counts(&self) -> Vec<&[u64]> {
        match self {
            Model::Reference { tally, .. } => vec![&tally.w_h[..], &tally.u_h[..], &tally.w_o[..]],
            Model::Crossbar(net) => net.arrays().iter().map(|a| a.write_counts()).collect(),
        }
    }

    /// Float parameters (read back from the arrays for the crossbar backend).
    pub fn params(&self) -> Result<NetworkParams> {
        match self {
            Model::Reference { params, .. } => Ok(params.clone()),
            Model::Crossbar(net) => net.to_params(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepReport {
    /// Mean cross-entropy over the batch, measured before the update.
    pub loss: f64,
    /// Weight entries written by this update.
    pub writes: u64,
    /// Nonzero weight entries of the sparsified gradient.
    pub nonzeros: u64,
}

pub fn train_step(model: &mut Model, batch: &[Example], cfg: &TrainConfig) -> Result<StepReport> {
    cfg.validate()?;
    if batch.is_empty() {
        return Err(Error::Empty("training batch"));
    }
    let mut total: Option<GradientSet> = None;
    let mut loss = 0.0;
    for ex in batch {
        let (trace, y_hat) = model.forward(ex)?;
        loss += cross_entropy(&y_hat, ex.label());
        let g = model.gradients(ex, &trace, &y_hat)?;
        match total.as_mut() {
            Some(acc) => acc.add_scaled(1.0, &g),
            None => total = Some(g),
        }
    }
    let n = batch.len() as f64;
    let mut grad = total.expect("batch is nonempty");
    if batch.len() > 1 {
        grad.scale(1.0 / n);
    }
    if !cfg.train_biases {
        grad.d_b_h.iter_mut().for_each(|v| *v = 0.0);
        grad.d_b_o.iter_mut().for_each(|v| *v = 0.0);
    }
    let sparse = kwta_sparsify(&grad, cfg.keep_ratio)?;
    if !sparse.is_finite() {
        return Err(Error::NonFinite("gradients"));
    }
    let writes = model.apply(&sparse, cfg.lr)?;
    Ok(StepReport {
        loss: loss / n,
        writes,
        nonzeros: sparse.weight_nonzeros() as u64,
    })
}
