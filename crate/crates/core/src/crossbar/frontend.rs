use alloc::vec::Vec;

use rand_core::RngCore;

use crate::rng::gaussian;
use crate::{Error, Result};

/// Integrator, bit-significance scaling and ADC parameters. SI units.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnalogFrontEnd {
    /// Pulse width of one streamed bit.
    pub t_s: f64,
    /// Integrator feedback capacitance on the compute path.
    pub c_f: f64,
    /// Capacitance assumed for the hold-phase leakage analysis.
    pub c_f_hold: f64,
    /// Worst-case bitline current.
    pub i_max: f64,
    /// Amplitude of a streamed '1'.
    pub v_bit: f64,
    /// Input bits per streamed value.
    pub n_b: u32,
    pub adc_bits: u32,
    /// ADC conversion time per channel.
    pub t_conv: f64,
    pub r_leakage: f64,
    /// Op-amp input bias current.
    pub i_bias: f64,
    /// Gain ratios `(M_f/M_i)_k`, k = 1..n_b.
    bit_ratios: Vec<f64>,
}

impl Default for AnalogFrontEnd {
    fn default() -> Self {
        Self::new(8)
    }
}

impl AnalogFrontEnd {
    pub fn new(n_b: u32) -> Self {
        Self {
            t_s: 50e-9,
            c_f: 1e-12,
            c_f_hold: 2e-12,
            i_max: 3.2e-6,
            v_bit: 0.1,
            n_b,
            adc_bits: 8,
            t_conv: 2e-9,
            r_leakage: 10e9,
            i_bias: 50e-12,
            bit_ratios: exact_ratios(n_b),
        }
    }

    /// Rebuilds the gain ratios, optionally with a static multiplicative
    /// error of σ `variability` per ratio.
    pub fn with_ratio_variability<R: RngCore + ?Sized>(mut self, variability: f64, rng: &mut R) -> Self {
        self.bit_ratios = exact_ratios(self.n_b);
        if variability > 0.0 {
            for r in &mut self.bit_ratios {
                *r *= 1.0 + variability * gaussian(rng);
            }
        }
        self
    }

    pub fn with_bits(mut self, n_b: u32) -> Self {
        self.n_b = n_b;
        self.bit_ratios = exact_ratios(n_b);
        self
    }

    pub fn bit_ratios(&self) -> &[f64] {
        &self.bit_ratios
    }

    pub fn validate(&self, v_threshold: f64) -> Result<()> {
        if !(1..=16).contains(&self.n_b) {
            return Err(Error::Config(alloc::format!("n_b {} not in 1..=16", self.n_b)));
        }
        if !(1..=24).contains(&self.adc_bits) {
            return Err(Error::Config(alloc::format!(
                "adc_bits {} not in 1..=24",
                self.adc_bits
            )));
        }
        if self.bit_ratios.len() != self.n_b as usize {
            return Err(Error::dim("bit ratios", self.n_b as usize, self.bit_ratios.len()));
        }
        for (name, v) in [
            ("t_s", self.t_s),
            ("c_f", self.c_f),
            ("c_f_hold", self.c_f_hold),
            ("i_max", self.i_max),
            ("v_bit", self.v_bit),
            ("t_conv", self.t_conv),
            ("r_leakage", self.r_leakage),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(alloc::format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.i_bias >= 0.0) {
            return Err(Error::Config("i_bias must be nonnegative".into()));
        }
        if self.v_bit >= v_threshold {
            return Err(Error::Config(alloc::format!(
                "read amplitude {} V reaches the device threshold {} V",
                self.v_bit,
                v_threshold
            )));
        }
        Ok(())
    }
}

fn exact_ratios(n_b: u32) -> Vec<f64> {
    (1..=n_b).map(|k| libm::ldexp(1.0, -(k as i32))).collect()
}

/// `Σ_{k=1..n_b} 2^-k`, accumulated term by term.
pub fn bit_ratio_sum(n_b: u32) -> f64 {
    exact_ratios(n_b).iter().sum()
}

/// Integrator ceiling `I_max · T_s / C_f`.
pub fn integrator_saturation_check(fe: &AnalogFrontEnd) -> f64 {
    let v_max = fe.i_max * fe.t_s / fe.c_f;
    debug_assert!(worst_case_accumulation(fe) <= v_max || fe.bit_ratios.iter().sum::<f64>() > 1.0);
    v_max
}

/// Voltage accumulated when every bit-plane draws `I_max`.
pub fn worst_case_accumulation(fe: &AnalogFrontEnd) -> f64 {
    fe.i_max * fe.t_s / fe.c_f * fe.bit_ratios.iter().sum::<f64>()
}

/// Hold-phase droop components over a scan of `n_channels` conversions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakageBudget {
    pub hold_window: f64,
    /// Capacitor dielectric leakage, linearized: `V·T/(R·C)`.
    pub dielectric: f64,
    /// Bias-current droop `I_b·T/C`.
    pub bias: f64,
    pub total: f64,
    /// Unlinearized dielectric droop `V·(1 − e^{−T/τ})`, `τ = R·C`.
    pub dielectric_exact: f64,
}

pub fn leakage_budget(fe: &AnalogFrontEnd, v_int: f64, n_channels: usize) -> LeakageBudget {
    let hold_window = n_channels as f64 * fe.t_conv;
    let tau = fe.r_leakage * fe.c_f_hold;
    let dielectric = v_int * hold_window / tau;
    let bias = fe.i_bias * hold_window / fe.c_f_hold;
    LeakageBudget {
        hold_window,
        dielectric,
        bias,
        total: dielectric + bias,
        dielectric_exact: v_int * -libm::expm1(-hold_window / tau),
    }
}

/// Uniform quantizer over `[−v_fullscale, +v_fullscale]` with
/// `LSB = 2·v_fullscale / 2^bits`. Zero maps to code 0; codes clamp to
/// `[−2^(bits−1), 2^(bits−1) − 1]`.
pub fn adc_quantize(v: f64, v_fullscale: f64, bits: u32) -> i32 {
    let half = 1i64 << (bits - 1);
    let lsb = 2.0 * v_fullscale / (1u64 << bits) as f64;
    let code = libm::round(v / lsb);
    let code = if code.is_nan() { 0.0 } else { code };
    (code.clamp(-(half as f64), (half - 1) as f64)) as i32
}

pub fn adc_dequantize(code: i32, v_fullscale: f64, bits: u32) -> f64 {
    f64::from(code) * 2.0 * v_fullscale / (1u64 << bits) as f64
}
