//! Behavioral model of the memristive datapath.
//!
//! Each signed weight is the conductance difference between a tunable device
//! and a fixed reference device held at the midpoint of the conductance
//! window. Inputs are streamed one bit-plane at a time as ±`v_bit` pulses;
//! each plane's bitline current is weighted by an analog gain ratio
//! `M_f/M_i = 2^-k` and accumulated on an integrator, then digitized by an
//! ADC. The candidate nonlinearity is a piecewise-linear fixed-point tanh.

mod array;
mod frontend;
mod hw_tanh;
mod network;
mod wbs;

pub use array::{
    map_weights, map_weights_with_range, program_weights, read_weights, CrossbarArray, DeviceParams, MapReport,
    ProgramReport,
};
pub use frontend::{
    adc_dequantize, adc_quantize, bit_ratio_sum, integrator_saturation_check, leakage_budget, worst_case_accumulation,
    AnalogFrontEnd, LeakageBudget,
};
pub use hw_tanh::{hw_tanh, Fixed, FRAC_BITS};
pub use network::{interpolation_schedule, CrossbarNetwork, HwConfig, LayerScale};
pub use wbs::{encode_signed, encode_unsigned, ideal_gain, wbs_matvec, ReadMode};
