//! Weighted-bit streaming matrix-vector product.
//!
//! Input `i` carries an `n_b`-bit magnitude code and a sign. Bit-plane `k`
//! (k = 1 is the MSB) is applied as a `±v_bit` pulse of width `T_s` on every
//! row whose bit is set. Each bitline sums `v · (1/M_ji − 1/M_ri)` by
//! Kirchhoff's law; the integrator scales that plane by `(M_f/M_i)_k` and
//! accumulates `T_s/C_f · Σ_k ratio_k · I_{j,k}`.

use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use super::array::CrossbarArray;
use super::frontend::AnalogFrontEnd;
use crate::rng::gaussian;
use crate::{Error, Result};

/// How device conductances are sensed for one streamed vector.
pub enum ReadMode<'a> {
    Ideal,
    /// Multiplicative gaussian conductance noise of σ `sigma`, drawn once per
    /// device per streamed vector.
    Noisy {
        sigma: f64,
        rng: &'a mut dyn RngCore,
    },
}

/// Nearest `n_b`-bit code for `x ∈ [0, 1]`, read back as `code / 2^n_b`.
#[inline]
pub fn encode_unsigned(x: f64, n_b: u32) -> u32 {
    let top = (1u32 << n_b) - 1;
    let c = libm::round(x.clamp(0.0, 1.0) * f64::from(1u32 << n_b));
    (c as u32).min(top)
}

/// Sign and magnitude code of a value in `[−1, 1]`.
#[inline]
pub fn encode_signed(v: f64, n_b: u32) -> (u32, i8) {
    let sign = if v < 0.0 { -1 } else { 1 };
    (encode_unsigned(v.abs(), n_b), sign)
}

/// Volts of integrator output per unit of `Σ x̂_i · w_ij` for this array.
pub fn ideal_gain(xb: &CrossbarArray, fe: &AnalogFrontEnd) -> f64 {
    fe.t_s * fe.v_bit * xb.scale() / fe.c_f
}

/// Integrator voltage per column after streaming all bit-planes.
///
/// Reads never change device state. A bitline current above `I_max` in any
/// plane is an overrange error: the integrator capacitor is undersized for
/// that input.
pub fn wbs_matvec(
    xb: &CrossbarArray,
    fe: &AnalogFrontEnd,
    codes: &[u32],
    signs: &[i8],
    read: ReadMode<'_>,
) -> Result<Vec<f64>> {
    let rows = xb.rows();
    let cols = xb.cols();
    if codes.len() != rows {
        return Err(Error::dim("wbs_matvec codes", rows, codes.len()));
    }
    if signs.len() != rows {
        return Err(Error::dim("wbs_matvec signs", rows, signs.len()));
    }
    let top = (1u32 << fe.n_b) - 1;
    if let Some(c) = codes.iter().find(|c| **c > top) {
        return Err(Error::domain(
            "wbs_matvec",
            alloc::format!("code {c} exceeds {} bits", fe.n_b),
        ));
    }

    // Sensed differential conductance of every device for this read.
    let mut diff = vec![0.0; rows * cols];
    match read {
        ReadMode::Ideal => {
            for r in 0..rows {
                let g_ref = xb.reference_conductance(r);
                for c in 0..cols {
                    diff[r * cols + c] = xb.conductance(r, c) - g_ref;
                }
            }
        }
        ReadMode::Noisy { sigma, rng } => {
            for r in 0..rows {
                let g_ref = xb.reference_conductance(r);
                for c in 0..cols {
                    let noise = 1.0 + sigma * gaussian(rng);
                    diff[r * cols + c] = xb.conductance(r, c) * noise - g_ref;
                }
            }
        }
    }

    let gain = fe.t_s / fe.c_f;
    let mut v_int = vec![0.0; cols];
    let mut current = vec![0.0; cols];
    for (k, &ratio) in fe.bit_ratios().iter().enumerate() {
        let shift = fe.n_b - 1 - k as u32;
        current.iter_mut().for_each(|i| *i = 0.0);
        let mut any = false;
        for r in 0..rows {
            if (codes[r] >> shift) & 1 == 0 {
                continue;
            }
            any = true;
            let v = fe.v_bit * f64::from(signs[r]);
            for (i, d) in current.iter_mut().zip(&diff[r * cols..(r + 1) * cols]) {
                *i += v * d;
            }
        }
        if !any {
            continue;
        }
        for (column, (&i, v)) in current.iter().zip(v_int.iter_mut()).enumerate() {
            if i.abs() > fe.i_max {
                return Err(Error::Overrange {
                    column,
                    current: i,
                    limit: fe.i_max,
                });
            }
            *v += gain * ratio * i;
        }
    }
    Ok(v_int)
}
