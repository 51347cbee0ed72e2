//! Direct feedback alignment through time.
//!
//! The output error `δ_o = ŷ − y` trains the readout exactly. Hidden weights
//! receive the same error projected through the fixed random matrix `Ψ`
//! instead of the transposed forward weights, accumulated over every step of
//! the sequence:
//!
//! ```text
//! e       = δ_o · Ψ
//! δ_h^t   = λ · e ⊙ g'(a_t)            g' = 1 − tanh²
//! ∇W_h   += (x^t)ᵀ δ_h^t
//! ∇U_h   += (β h^{t−1})ᵀ δ_h^t
//! ```
//!
//! Before an update each weight gradient is sparsified by K-WTA, keeping only
//! its largest-magnitude entries so that fewer devices get written.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::math::{tanh, Matrix};
use crate::miru::{Example, HiddenTrace, NetworkParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub d_w_o: Matrix,
    pub d_w_h: Matrix,
    pub d_u_h: Matrix,
    pub d_b_h: Vec<f64>,
    pub d_b_o: Vec<f64>,
}

impl GradientSet {
    pub fn zeros(n_x: usize, n_h: usize, n_y: usize) -> Self {
        Self {
            d_w_o: Matrix::zeros(n_h, n_y),
            d_w_h: Matrix::zeros(n_x, n_h),
            d_u_h: Matrix::zeros(n_h, n_h),
            d_b_h: vec![0.0; n_h],
            d_b_o: vec![0.0; n_y],
        }
    }

    pub fn zeros_like(params: &NetworkParams) -> Self {
        Self::zeros(params.n_x(), params.n_h(), params.n_y())
    }

    pub fn add_scaled(&mut self, scale: f64, other: &GradientSet) {
        self.d_w_o.axpy(scale, &other.d_w_o);
        self.d_w_h.axpy(scale, &other.d_w_h);
        self.d_u_h.axpy(scale, &other.d_u_h);
        for (a, b) in self.d_b_h.iter_mut().zip(&other.d_b_h) {
            *a += scale * b;
        }
        for (a, b) in self.d_b_o.iter_mut().zip(&other.d_b_o) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.d_w_o.scale(s);
        self.d_w_h.scale(s);
        self.d_u_h.scale(s);
        self.d_b_h.iter_mut().for_each(|v| *v *= s);
        self.d_b_o.iter_mut().for_each(|v| *v *= s);
    }

    /// Nonzero entries across the three weight matrices (the device-backed ones).
    pub fn weight_nonzeros(&self) -> usize {
        self.d_w_o.count_nonzero() + self.d_w_h.count_nonzero() + self.d_u_h.count_nonzero()
    }

    pub fn is_finite(&self) -> bool {
        self.d_w_o.is_finite()
            && self.d_w_h.is_finite()
            && self.d_u_h.is_finite()
            && self.d_b_h.iter().chain(&self.d_b_o).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub lr: f64,
    /// Fraction of entries per weight gradient that survive K-WTA.
    pub keep_ratio: f64,
    pub train_biases: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            keep_ratio: 0.43,
            train_biases: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(alloc::format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        check_keep_ratio(self.keep_ratio)
    }
}

fn check_keep_ratio(keep_ratio: f64) -> Result<()> {
    if !(keep_ratio > 0.0 && keep_ratio <= 1.0) {
        return Err(Error::Config(alloc::format!("keep ratio {keep_ratio} not in (0, 1]")));
    }
    Ok(())
}

/// `∂ℓ/∂logits` for softmax with categorical cross-entropy: `ŷ − y`.
pub fn output_deltas(y_hat: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if y_hat.len() != y.len() {
        return Err(Error::dim("output_deltas", y.len(), y_hat.len()));
    }
    let sum: f64 = y_hat.iter().sum();
    if !sum.is_finite() || (sum - 1.0).abs() > 1e-6 || y_hat.iter().any(|p| *p < 0.0) {
        return Err(Error::domain("output_deltas", "prediction is not a probability vector"));
    }
    Ok(y_hat.iter().zip(y).map(|(p, t)| p - t).collect())
}

/// Categorical cross-entropy of a prediction against a class index.
pub fn cross_entropy(y_hat: &[f64], label: usize) -> f64 {
    -libm::log(y_hat[label].max(f64::MIN_POSITIVE))
}

/// DFA gradients for one sequence using the parameters' `Ψ`, `β`, `λ`.
pub fn dfa_gradients(params: &NetworkParams, ex: &Example, trace: &HiddenTrace, y_hat: &[f64]) -> Result<GradientSet> {
    let feedback = Feedback {
        psi: params.psi(),
        beta: params.beta(),
        lambda: params.lambda(),
    };
    dfa_gradients_with(&feedback, params.n_x(), ex, trace, y_hat)
}

/// The pieces of the network that the hidden-layer learning rule reads.
#[derive(Debug, Clone, Copy)]
pub struct Feedback<'a> {
    pub psi: &'a Matrix,
    pub beta: f64,
    pub lambda: f64,
}

pub fn dfa_gradients_with(
    feedback: &Feedback<'_>,
    n_x: usize,
    ex: &Example,
    trace: &HiddenTrace,
    y_hat: &[f64],
) -> Result<GradientSet> {
    let n_y = feedback.psi.rows();
    let n_h = feedback.psi.cols();
    if trace.n_t() != ex.n_t() {
        return Err(Error::Consistency(alloc::format!(
            "trace has {} steps but sequence has {}",
            trace.n_t(),
            ex.n_t()
        )));
    }
    if trace.n_h() != n_h {
        return Err(Error::Consistency(alloc::format!(
            "trace has {} hidden units but feedback matrix has {n_h}",
            trace.n_h()
        )));
    }
    ex.check_against(n_x, n_y)?;
    let delta_o = output_deltas(y_hat, &ex.one_hot(n_y))?;

    let mut g = GradientSet::zeros(n_x, n_h, n_y);
    g.d_w_o.add_outer(trace.last_state(), &delta_o, 1.0);
    g.d_b_o.copy_from_slice(&delta_o);

    let mut e = vec![0.0; n_h];
    feedback.psi.accumulate_vec_mat(&delta_o, &mut e);

    let zero = vec![0.0; n_h];
    let mut delta_h = vec![0.0; n_h];
    let mut h_prev_scaled = vec![0.0; n_h];
    for t in (0..trace.n_t()).rev() {
        for ((d, &ej), &a) in delta_h.iter_mut().zip(&e).zip(trace.preact.row(t)) {
            let th = tanh(a);
            *d = feedback.lambda * ej * (1.0 - th * th);
        }
        let h_prev = if t == 0 { &zero[..] } else { trace.state(t - 1) };
        for (s, &hp) in h_prev_scaled.iter_mut().zip(h_prev) {
            *s = feedback.beta * hp;
        }
        g.d_w_h.add_outer(ex.step(t), &delta_h, 1.0);
        g.d_u_h.add_outer(&h_prev_scaled, &delta_h, 1.0);
        for (b, d) in g.d_b_h.iter_mut().zip(&delta_h) {
            *b += d;
        }
    }
    Ok(g)
}

/// Number of entries K-WTA keeps out of `n`: `⌈keep_ratio · n⌉`, with the
/// product snapped to the nearest integer when it is within rounding noise
/// of one (so 0.43 · 100 keeps 43, not 44).
pub fn kwta_keep_count(keep_ratio: f64, n: usize) -> usize {
    let exact = keep_ratio * n as f64;
    let nearest = libm::round(exact);
    let k = if (exact - nearest).abs() <= 1e-9 * exact.max(1.0) {
        nearest
    } else {
        libm::ceil(exact)
    };
    (k as usize).min(n)
}

/// Keeps the `⌈keep_ratio · N⌉` largest-magnitude entries, zeroing the rest.
/// Ties are broken toward the lower flat index.
pub fn kwta_matrix(m: &mut Matrix, keep_ratio: f64) -> Result<()> {
    check_keep_ratio(keep_ratio)?;
    let n = m.len();
    let k = kwta_keep_count(keep_ratio, n);
    if k >= n {
        return Ok(());
    }
    let data = m.as_mut_slice();
    let mut order: Vec<usize> = (0..n).collect();
    let rank = |a: &usize, b: &usize| -> Ordering { data[*b].abs().total_cmp(&data[*a].abs()).then_with(|| a.cmp(b)) };
    if k > 0 {
        order.select_nth_unstable_by(k - 1, rank);
    }
    for &i in &order[k..] {
        data[i] = 0.0;
    }
    Ok(())
}

/// K-WTA applied independently to each weight gradient. Bias gradients
/// belong to digital registers, not devices, and pass through unchanged.
pub fn kwta_sparsify(g: &GradientSet, keep_ratio: f64) -> Result<GradientSet> {
    let mut out = g.clone();
    kwta_matrix(&mut out.d_w_o, keep_ratio)?;
    kwta_matrix(&mut out.d_w_h, keep_ratio)?;
    kwta_matrix(&mut out.d_u_h, keep_ratio)?;
    Ok(out)
}

/// Gradient-descent step `θ ← θ − lr · g`. `Ψ`, `β` and `λ` are untouched.
pub fn apply_update(params: &NetworkParams, g: &GradientSet, lr: f64) -> Result<NetworkParams> {
    let mut next = params.clone();
    apply_update_in_place(&mut next, g, lr)?;
    Ok(next)
}

pub fn apply_update_in_place(params: &mut NetworkParams, g: &GradientSet, lr: f64) -> Result<()> {
    g.d_w_o.check_shape("dW_o", params.n_h(), params.n_y())?;
    g.d_w_h.check_shape("dW_h", params.n_x(), params.n_h())?;
    g.d_u_h.check_shape("dU_h", params.n_h(), params.n_h())?;
    if g.d_b_h.len() != params.n_h() {
        return Err(Error::dim("db_h", params.n_h(), g.d_b_h.len()));
    }
    if g.d_b_o.len() != params.n_y() {
        return Err(Error::dim("db_o", params.n_y(), g.d_b_o.len()));
    }
    params.w_o.axpy(-lr, &g.d_w_o);
    params.w_h.axpy(-lr, &g.d_w_h);
    params.u_h.axpy(-lr, &g.d_u_h);
    for (b, d) in params.b_h.iter_mut().zip(&g.d_b_h) {
        *b -= lr * d;
    }
    for (b, d) in params.b_o.iter_mut().zip(&g.d_b_o) {
        *b -= lr * d;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miru::{forward_sequence, readout, Dims};
    use crate::rng::{stream, uniform_f64, Stream};
    use proptest::prelude::*;

    fn random_example(n_x: usize, n_t: usize, label: usize, seed: u64) -> Example {
        let mut rng = stream(seed, Stream::Dataset);
        Example::new((0..n_x * n_t).map(|_| uniform_f64(&mut rng)).collect(), n_x, label).unwrap()
    }

    #[test]
    fn output_delta_examples() {
        assert_eq!(output_deltas(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(output_deltas(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), vec![-0.5, 0.5]);
        assert!(output_deltas(&[0.7, 0.7], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn output_delta_matches_central_difference() {
        let logits = [0.3, -1.2, 2.0, 0.5];
        let label = 2;
        let y_hat = crate::math::softmax(&logits).unwrap();
        let mut y = vec![0.0; 4];
        y[label] = 1.0;
        let d = output_deltas(&y_hat, &y).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            let mut lp = logits;
            let mut lm = logits;
            lp[i] += h;
            lm[i] -= h;
            let fp = cross_entropy(&crate::math::softmax(&lp).unwrap(), label);
            let fm = cross_entropy(&crate::math::softmax(&lm).unwrap(), label);
            assert!(((fp - fm) / (2.0 * h) - d[i]).abs() < 1e-5);
        }
    }

    #[test]
    fn zero_error_gives_zero_gradients() {
        let dims = Dims::new(2, 3, 2, 3).unwrap();
        let p = NetworkParams::init(dims, 0.5, 0.5, 1).unwrap();
        let ex = random_example(2, 3, 1, 2);
        let (trace, _) = forward_sequence(&p, &ex).unwrap();
        let g = dfa_gradients(&p, &ex, &trace, &[0.0, 1.0]).unwrap();
        assert_eq!(g, GradientSet::zeros(2, 3, 2));
    }

    #[test]
    fn zero_feedback_blocks_hidden_learning() {
        let dims = Dims::new(2, 3, 2, 3).unwrap();
        let p0 = NetworkParams::init(dims, 0.5, 0.5, 1).unwrap();
        let p = NetworkParams::new(
            p0.w_h.clone(),
            p0.u_h.clone(),
            p0.w_o.clone(),
            p0.b_h.clone(),
            p0.b_o.clone(),
            0.5,
            0.5,
            Matrix::zeros(2, 3),
        )
        .unwrap();
        let ex = random_example(2, 3, 0, 5);
        let (trace, y) = forward_sequence(&p, &ex).unwrap();
        let g = dfa_gradients(&p, &ex, &trace, &y).unwrap();
        assert_eq!(g.d_w_h.count_nonzero(), 0);
        assert_eq!(g.d_u_h.count_nonzero(), 0);
        assert!(g.d_w_o.count_nonzero() > 0);
    }

    #[test]
    fn trace_length_mismatch_is_rejected() {
        let dims = Dims::new(2, 3, 2, 3).unwrap();
        let p = NetworkParams::init(dims, 0.5, 0.5, 1).unwrap();
        let ex = random_example(2, 3, 0, 5);
        let other = random_example(2, 4, 0, 5);
        let (trace, y) = forward_sequence(&p, &other).unwrap();
        assert!(matches!(dfa_gradients(&p, &ex, &trace, &y), Err(Error::Consistency(_))));
    }

    #[test]
    fn output_gradient_depends_only_on_final_state() {
        let dims = Dims::new(2, 3, 2, 4).unwrap();
        let p = NetworkParams::init(dims, 0.5, 0.5, 8).unwrap();
        let ex = random_example(2, 4, 1, 9);
        let (mut trace, y) = forward_sequence(&p, &ex).unwrap();
        let g1 = dfa_gradients(&p, &ex, &trace, &y).unwrap();
        for t in 0..3 {
            for v in trace.h.row_mut(t) {
                *v *= -0.5;
            }
        }
        let g2 = dfa_gradients(&p, &ex, &trace, &y).unwrap();
        assert_eq!(g1.d_w_o, g2.d_w_o);
        assert_eq!(g1.d_b_o, g2.d_b_o);
    }

    #[test]
    fn kwta_examples() {
        let mut m = Matrix::from_vec(2, 2, vec![1.0, -3.0, 2.0, 0.0]).unwrap();
        kwta_matrix(&mut m, 0.5).unwrap();
        assert_eq!(m.as_slice(), &[0.0, -3.0, 2.0, 0.0]);

        let orig = Matrix::from_vec(2, 2, vec![1.0, -3.0, 2.0, 0.5]).unwrap();
        let mut same = orig.clone();
        kwta_matrix(&mut same, 1.0).unwrap();
        assert_eq!(same, orig);

        let mut ties = Matrix::from_vec(1, 4, vec![1.0, -1.0, 1.0, 1.0]).unwrap();
        kwta_matrix(&mut ties, 0.5).unwrap();
        assert_eq!(ties.as_slice(), &[1.0, -1.0, 0.0, 0.0]);

        assert!(kwta_matrix(&mut ties, 0.0).is_err());
        assert!(kwta_matrix(&mut ties, 1.5).is_err());
    }

    #[test]
    fn keep_count_snaps_float_noise() {
        assert_eq!(kwta_keep_count(0.43, 100), 43);
        assert_eq!(kwta_keep_count(0.43, 10), 5);
        assert_eq!(kwta_keep_count(0.5, 3), 2);
        assert_eq!(kwta_keep_count(1e-9, 10), 1);
    }

    #[test]
    fn kwta_random_10x10_keeps_43() {
        let mut rng = stream(3, Stream::Dataset);
        let mut m = Matrix::uniform(10, 10, 1.0, &mut rng);
        let original = m.clone();
        kwta_matrix(&mut m, 0.43).unwrap();
        assert_eq!(m.count_nonzero(), 43);
        // independent oracle: full sort of magnitudes
        let mut mags: Vec<f64> = original.as_slice().iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        let threshold = mags[42];
        for (kept, orig) in m.as_slice().iter().zip(original.as_slice()) {
            if orig.abs() >= threshold {
                assert_eq!(kept, orig);
            } else {
                assert_eq!(*kept, 0.0);
            }
        }
    }

    #[test]
    fn update_examples() {
        let dims = Dims::new(2, 3, 2, 1).unwrap();
        let p = NetworkParams::init(dims, 0.5, 0.5, 1).unwrap();
        let mut g = GradientSet::zeros_like(&p);
        assert_eq!(apply_update(&p, &g, 0.1).unwrap(), p);
        g.d_w_o.set(1, 1, 0.5);
        assert_eq!(apply_update(&p, &g, 0.0).unwrap(), p);
        let q = apply_update(&p, &g, 0.1).unwrap();
        assert!((p.w_o.get(1, 1) - q.w_o.get(1, 1) - 0.05).abs() < 1e-15);
        assert_eq!(q.psi(), p.psi());
        assert_eq!(q.beta(), p.beta());
        assert_eq!(q.lambda(), p.lambda());
    }

    #[test]
    fn train_config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig {
            lr: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            keep_ratio: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    proptest! {
        #[test]
        fn sparsity_contract(
            rows in 1usize..12,
            cols in 1usize..12,
            ratio in 0.01f64..=1.0,
            seed in any::<u64>(),
        ) {
            let mut rng = stream(seed, Stream::Dataset);
            let mut m = Matrix::uniform(rows, cols, 1.0, &mut rng);
            kwta_matrix(&mut m, ratio).unwrap();
            prop_assert_eq!(m.count_nonzero(), kwta_keep_count(ratio, rows * cols));
        }

        #[test]
        fn readout_gradient_is_exact_backprop(seed in any::<u64>(), label in 0usize..3) {
            let dims = Dims::new(2, 4, 3, 3).unwrap();
            let p = NetworkParams::init(dims, 0.5, 0.4, seed).unwrap();
            let ex = random_example(2, 3, label, seed ^ 1);
            let (trace, y) = forward_sequence(&p, &ex).unwrap();
            let g = dfa_gradients(&p, &ex, &trace, &y).unwrap();
            let h = 1e-6;
            for r in 0..4 {
                for c in 0..3 {
                    let mut pp = p.clone();
                    let mut pm = p.clone();
                    pp.w_o.set(r, c, p.w_o.get(r, c) + h);
                    pm.w_o.set(r, c, p.w_o.get(r, c) - h);
                    let fp = cross_entropy(&readout(&pp, trace.last_state()).unwrap(), label);
                    let fm = cross_entropy(&readout(&pm, trace.last_state()).unwrap(), label);
                    let fd = (fp - fm) / (2.0 * h);
                    let an = g.d_w_o.get(r, c);
                    prop_assert!((fd - an).abs() <= 1e-4 * an.abs().max(1e-3));
                }
            }
        }
    }
}
