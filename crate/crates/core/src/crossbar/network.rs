use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::RngCore;

use super::array::{map_weights_with_range, program_weights, read_weights, CrossbarArray, DeviceParams, ProgramReport};
use super::frontend::{adc_quantize, integrator_saturation_check, AnalogFrontEnd};
use super::hw_tanh::{hw_tanh, Fixed};
use super::wbs::{encode_signed, encode_unsigned, ideal_gain, wbs_matvec, ReadMode};
use crate::dfa::GradientSet;
use crate::math::{softmax, Matrix};
use crate::miru::{Dims, Example, HiddenTrace, NetworkParams};
use crate::rng::{stream, Stream};
use crate::{Error, Result};

/// Mapping and digitization choices for the crossbar-backed network.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct HwConfig {
    /// Weight magnitude mapped to the conductance rail in the hidden array.
    pub hidden_weight_range: f64,
    /// Same for the readout array.
    pub readout_weight_range: f64,
    /// Smallest pre-activation span the hidden ADC must cover.
    pub hidden_preact_range: f64,
    /// Smallest logit span the readout ADC must cover.
    pub readout_logit_range: f64,
    /// Interpolation tiles in the hidden layer.
    pub n_tiles: usize,
    /// σ of static error on the bit-significance gain ratios.
    pub ratio_variability: f64,
}

impl Default for HwConfig {
    fn default() -> Self {
        Self {
            hidden_weight_range: 2.0,
            readout_weight_range: 2.0,
            hidden_preact_range: 4.0,
            readout_logit_range: 8.0,
            n_tiles: 8,
            ratio_variability: 0.0,
        }
    }
}

/// Per-layer ADC range shift and the digital value of one ADC code.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerScale {
    /// The ADC full scale is the integrator ceiling divided by `2^shift`.
    pub shift: u32,
    pub v_fullscale: f64,
    /// Pre-activation (or logit) units per ADC code.
    pub value_per_code: f64,
}

impl LayerScale {
    fn choose(xb: &CrossbarArray, fe: &AnalogFrontEnd, min_range: f64) -> Self {
        let gain = ideal_gain(xb, fe);
        let v_max = integrator_saturation_check(fe);
        let mut shift = 0;
        while shift < 15 && v_max / f64::from(1u32 << (shift + 1)) / gain >= min_range {
            shift += 1;
        }
        let v_fullscale = v_max / f64::from(1u32 << shift);
        let lsb = 2.0 * v_fullscale / (1u64 << fe.adc_bits) as f64;
        Self {
            shift,
            v_fullscale,
            value_per_code: lsb / gain,
        }
    }

    /// Largest magnitude representable after digitization.
    pub fn span(&self, adc_bits: u32) -> f64 {
        self.value_per_code * (1u64 << (adc_bits - 1)) as f64
    }
}

/// Tile-major interpolation schedule: entry `[cycle][tile]` is the hidden unit
/// that tile processes in that cycle. Units are split into contiguous tiles of
/// `⌈n_h / n_tiles⌉`; every tile handles one unit per cycle.
pub fn interpolation_schedule(n_h: usize, n_tiles: usize) -> Vec<Vec<Option<usize>>> {
    let n_tiles = n_tiles.clamp(1, n_h.max(1));
    let per_tile = n_h.div_ceil(n_tiles);
    (0..per_tile)
        .map(|cycle| {
            (0..n_tiles)
                .map(|tile| {
                    let unit = tile * per_tile + cycle;
                    (unit < n_h && cycle < per_tile).then_some(unit)
                })
                .collect()
        })
        .collect()
}

/// MiRU network whose weights live on two crossbars: the hidden array stacks
/// `W_h` over `U_h` (`(n_x + n_h) × n_h`) and the readout array holds `W_o`.
/// Biases, `β`, `λ` and `Ψ` are digital.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CrossbarNetwork {
    dims: Dims,
    hidden: CrossbarArray,
    readout: CrossbarArray,
    b_h: Vec<f64>,
    b_o: Vec<f64>,
    beta: f64,
    lambda: f64,
    psi: Matrix,
    device: DeviceParams,
    frontend: AnalogFrontEnd,
    config: HwConfig,
    hidden_scale: LayerScale,
    readout_scale: LayerScale,
    read_rng: ChaCha8Rng,
    write_rng: ChaCha8Rng,
}

impl CrossbarNetwork {
    /// Programs `params` onto fresh arrays. All device randomness derives from `seed`.
    pub fn from_params(
        params: &NetworkParams,
        n_t: usize,
        device: DeviceParams,
        frontend: AnalogFrontEnd,
        config: HwConfig,
        seed: u64,
    ) -> Result<Self> {
        device.validate()?;
        let mut offsets = stream(seed, Stream::DeviceOffsets);
        let frontend = frontend.with_ratio_variability(config.ratio_variability, &mut offsets);
        frontend.validate(device.v_threshold)?;
        if config.n_tiles == 0 {
            return Err(Error::Config("n_tiles must be at least 1".into()));
        }
        let dims = Dims::new(params.n_x(), params.n_h(), params.n_y(), n_t)?;
        let mut stacked = Matrix::zeros(dims.n_x + dims.n_h, dims.n_h);
        for r in 0..dims.n_x {
            stacked.row_mut(r).copy_from_slice(params.w_h.row(r));
        }
        for r in 0..dims.n_h {
            stacked.row_mut(dims.n_x + r).copy_from_slice(params.u_h.row(r));
        }
        let (hidden, _) = map_weights_with_range(&stacked, config.hidden_weight_range, &device, &mut offsets)?;
        let (readout, _) = map_weights_with_range(&params.w_o, config.readout_weight_range, &device, &mut offsets)?;
        let hidden_scale = LayerScale::choose(&hidden, &frontend, config.hidden_preact_range);
        let readout_scale = LayerScale::choose(&readout, &frontend, config.readout_logit_range);
        Ok(Self {
            dims,
            hidden,
            readout,
            b_h: params.b_h.clone(),
            b_o: params.b_o.clone(),
            beta: params.beta(),
            lambda: params.lambda(),
            psi: params.psi().clone(),
            device,
            frontend,
            config,
            hidden_scale,
            readout_scale,
            read_rng: stream(seed, Stream::ReadNoise),
            write_rng: stream(seed, Stream::WriteNoise),
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn hidden_array(&self) -> &CrossbarArray {
        &self.hidden
    }

    pub fn readout_array(&self) -> &CrossbarArray {
        &self.readout
    }

    pub fn arrays(&self) -> [&CrossbarArray; 2] {
        [&self.hidden, &self.readout]
    }

    pub fn psi(&self) -> &Matrix {
        &self.psi
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn frontend(&self) -> &AnalogFrontEnd {
        &self.frontend
    }

    pub fn device(&self) -> &DeviceParams {
        &self.device
    }

    pub fn hidden_scale(&self) -> LayerScale {
        self.hidden_scale
    }

    pub fn readout_scale(&self) -> LayerScale {
        self.readout_scale
    }

    pub fn schedule(&self) -> Vec<Vec<Option<usize>>> {
        interpolation_schedule(self.dims.n_h, self.config.n_tiles)
    }

    /// Float view of the programmed weights.
    pub fn to_params(&self) -> Result<NetworkParams> {
        let stacked = read_weights(&self.hidden);
        let n_x = self.dims.n_x;
        let n_h = self.dims.n_h;
        let mut w_h = Matrix::zeros(n_x, n_h);
        let mut u_h = Matrix::zeros(n_h, n_h);
        for r in 0..n_x {
            w_h.row_mut(r).copy_from_slice(stacked.row(r));
        }
        for r in 0..n_h {
            u_h.row_mut(r).copy_from_slice(stacked.row(n_x + r));
        }
        NetworkParams::new(
            w_h,
            u_h,
            read_weights(&self.readout),
            self.b_h.clone(),
            self.b_o.clone(),
            self.beta,
            self.lambda,
            self.psi.clone(),
        )
    }

    /// Forward pass through the datapath using the network's own read-noise source.
    pub fn forward(&mut self, ex: &Example) -> Result<(HiddenTrace, Vec<f64>)> {
        let mut rng = self.read_rng.clone();
        let out = self.forward_with(ex, Some(&mut rng));
        self.read_rng = rng;
        out
    }

    /// Forward pass; `read_rng` supplies cycle-to-cycle noise when the device
    /// has nonzero cycle variability. `None` reads ideally.
    pub fn forward_with(
        &self,
        ex: &Example,
        mut read_rng: Option<&mut dyn RngCore>,
    ) -> Result<(HiddenTrace, Vec<f64>)> {
        ex.check_against(self.dims.n_x, self.dims.n_y)?;
        let n_x = self.dims.n_x;
        let n_h = self.dims.n_h;
        let n_b = self.frontend.n_b;
        let adc_bits = self.frontend.adc_bits;
        let sigma = self.device.cycle_variability;
        let beta = Fixed::from_f64(self.beta);
        let lambda = Fixed::from_f64(self.lambda);
        let one_minus_lambda = Fixed(Fixed::ONE.0 - lambda.0);
        let schedule = self.schedule();

        let n_t = ex.n_t();
        let mut trace = HiddenTrace::zeros(n_t, n_h);
        let mut h_prev = vec![Fixed::ZERO; n_h];
        let mut h_tilde = vec![Fixed::ZERO; n_h];
        let mut codes = vec![0u32; n_x + n_h];
        let mut signs = vec![1i8; n_x + n_h];

        for t in 0..n_t {
            for (i, &x) in ex.step(t).iter().enumerate() {
                codes[i] = encode_unsigned(x, n_b);
                signs[i] = 1;
            }
            for (j, h) in h_prev.iter().enumerate() {
                let (c, s) = encode_signed((beta * *h).to_f64(), n_b);
                codes[n_x + j] = c;
                signs[n_x + j] = s;
            }
            let read = read_mode(sigma, read_rng.as_deref_mut());
            let v_int = wbs_matvec(&self.hidden, &self.frontend, &codes, &signs, read)?;
            for j in 0..n_h {
                let code = adc_quantize(v_int[j], self.hidden_scale.v_fullscale, adc_bits);
                let preact = Fixed::from_f64(f64::from(code) * self.hidden_scale.value_per_code + self.b_h[j]);
                h_tilde[j] = hw_tanh(preact);
                trace.preact.row_mut(t)[j] = preact.to_f64();
            }
            let mut h_next = h_prev.clone();
            for cycle in &schedule {
                for unit in cycle.iter().flatten() {
                    let j = *unit;
                    h_next[j] = Fixed((lambda * h_prev[j]).0 + (one_minus_lambda * h_tilde[j]).0);
                }
            }
            h_prev = h_next;
            for j in 0..n_h {
                trace.h_tilde.row_mut(t)[j] = h_tilde[j].to_f64();
                trace.h.row_mut(t)[j] = h_prev[j].to_f64();
            }
        }

        let mut out_codes = vec![0u32; n_h];
        let mut out_signs = vec![1i8; n_h];
        for (j, h) in h_prev.iter().enumerate() {
            let (c, s) = encode_signed(h.to_f64(), n_b);
            out_codes[j] = c;
            out_signs[j] = s;
        }
        let read = read_mode(sigma, read_rng);
        let v_out = wbs_matvec(&self.readout, &self.frontend, &out_codes, &out_signs, read)?;
        // Biases enter as voltage offsets; the winner-take-all stage then
        // references every output to the largest one before digitization.
        let gain = ideal_gain(&self.readout, &self.frontend);
        let v_biased: Vec<f64> = v_out.iter().zip(&self.b_o).map(|(v, b)| v + b * gain).collect();
        let v_win = v_biased.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let logits: Vec<f64> = v_biased
            .iter()
            .map(|v| {
                let code = adc_quantize(v - v_win, self.readout_scale.v_fullscale, adc_bits);
                f64::from(code) * self.readout_scale.value_per_code
            })
            .collect();
        Ok((trace, softmax(&logits)?))
    }

    /// Writes `−lr · g` to the arrays (one write per nonzero weight entry)
    /// and updates the digital biases.
    pub fn apply_update(&mut self, g: &GradientSet, lr: f64) -> Result<ProgramReport> {
        let n_x = self.dims.n_x;
        let n_h = self.dims.n_h;
        g.d_w_h.check_shape("dW_h", n_x, n_h)?;
        g.d_u_h.check_shape("dU_h", n_h, n_h)?;
        g.d_w_o.check_shape("dW_o", n_h, self.dims.n_y)?;
        let mut hidden_delta = Matrix::zeros(n_x + n_h, n_h);
        for r in 0..n_x {
            for (d, s) in hidden_delta.row_mut(r).iter_mut().zip(g.d_w_h.row(r)) {
                *d = -lr * s;
            }
        }
        for r in 0..n_h {
            for (d, s) in hidden_delta.row_mut(n_x + r).iter_mut().zip(g.d_u_h.row(r)) {
                *d = -lr * s;
            }
        }
        let mut readout_delta = g.d_w_o.clone();
        readout_delta.scale(-lr);
        let a = program_weights(&mut self.hidden, &hidden_delta, &self.device, &mut self.write_rng)?;
        let b = program_weights(&mut self.readout, &readout_delta, &self.device, &mut self.write_rng)?;
        for (b_h, d) in self.b_h.iter_mut().zip(&g.d_b_h) {
            *b_h -= lr * d;
        }
        for (b_o, d) in self.b_o.iter_mut().zip(&g.d_b_o) {
            *b_o -= lr * d;
        }
        Ok(ProgramReport {
            writes: a.writes + b.writes,
            clipped: a.clipped + b.clipped,
        })
    }
}

fn read_mode<'a, 'b: 'a>(sigma: f64, rng: Option<&'a mut (dyn RngCore + 'b)>) -> ReadMode<'a> {
    match rng {
        Some(rng) if sigma > 0.0 => ReadMode::Noisy { sigma, rng },
        _ => ReadMode::Ideal,
    }
}
