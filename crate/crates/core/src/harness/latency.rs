//! Cycle-count latency model for one sequence step on the accelerator.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct LatencyModelParams {
    pub clock_hz: f64,
    pub n_b: u32,
    pub stream_cycles_per_bit: u32,
    /// `None` disables tiling of the activation interpolation.
    pub n_tiles: Option<usize>,
    pub adc_channels_per_scan: usize,
    pub adc_conversion_time: f64,
    pub interp_cycles_cap: usize,
    pub fixed_overhead_cycles: u64,
}

impl Default for LatencyModelParams {
    fn default() -> Self {
        Self {
            clock_hz: 20e6,
            n_b: 8,
            stream_cycles_per_bit: 1,
            n_tiles: Some(8),
            adc_channels_per_scan: 1,
            adc_conversion_time: 2e-9,
            interp_cycles_cap: 16,
            fixed_overhead_cycles: 0,
        }
    }
}

impl LatencyModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.clock_hz > 0.0) || !(self.adc_conversion_time >= 0.0) {
            return Err(Error::Config(
                "latency clock and conversion time must be positive".into(),
            ));
        }
        if self.n_b == 0 || self.adc_channels_per_scan == 0 || self.interp_cycles_cap == 0 {
            return Err(Error::Config("latency counts must be at least 1".into()));
        }
        if self.n_tiles == Some(0) {
            return Err(Error::Config("n_tiles must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LatencyBreakdown {
    pub stream_cycles: u64,
    pub adc_cycles: u64,
    pub interp_cycles: u64,
    pub overhead_cycles: u64,
    pub total_cycles: u64,
    pub seconds: f64,
}

fn adc_scan_cycles(p: &LatencyModelParams, n_h: usize) -> u64 {
    let scans = n_h.div_ceil(p.adc_channels_per_scan) as f64;
    // tolerate float noise in scans·t·f landing just above an integer
    libm::ceil(scans * p.adc_conversion_time * p.clock_hz - 1e-9).max(0.0) as u64
}

/// With tiling, each tile interpolates its `⌈n_h/n_tiles⌉` outputs inside a
/// fixed slot of `interp_cycles_cap` cycles; beyond the cap the slot grows.
fn interp_cycles(p: &LatencyModelParams, n_h: usize) -> u64 {
    match p.n_tiles {
        Some(tiles) => n_h.div_ceil(tiles).min(n_h).max(p.interp_cycles_cap) as u64,
        None => n_h as u64,
    }
}

pub fn latency_breakdown(p: &LatencyModelParams, n_h: usize, n_x: usize) -> Result<LatencyBreakdown> {
    p.validate()?;
    if n_h == 0 || n_x == 0 {
        return Err(Error::Config("latency model needs n_h, n_x >= 1".into()));
    }
    let stream_cycles = u64::from(p.n_b) * u64::from(p.stream_cycles_per_bit);
    let adc_cycles = adc_scan_cycles(p, n_h);
    let interp = interp_cycles(p, n_h);
    let total = stream_cycles + adc_cycles + interp + p.fixed_overhead_cycles;
    Ok(LatencyBreakdown {
        stream_cycles,
        adc_cycles,
        interp_cycles: interp,
        overhead_cycles: p.fixed_overhead_cycles,
        total_cycles: total,
        seconds: total as f64 / p.clock_hz,
    })
}

/// Seconds per sequence step.
pub fn estimate_latency(p: &LatencyModelParams, n_h: usize, n_x: usize) -> Result<f64> {
    Ok(latency_breakdown(p, n_h, n_x)?.seconds)
}

/// Fits `fixed_overhead_cycles` so that the model hits `target_seconds` at
/// the given sizes.
pub fn calibrate_overhead(
    p: &LatencyModelParams,
    n_h: usize,
    n_x: usize,
    target_seconds: f64,
) -> Result<LatencyModelParams> {
    let base = latency_breakdown(
        &LatencyModelParams {
            fixed_overhead_cycles: 0,
            ..*p
        },
        n_h,
        n_x,
    )?;
    let target_cycles = libm::round(target_seconds * p.clock_hz);
    if !(target_cycles >= base.total_cycles as f64) {
        return Err(Error::Config(alloc::format!(
            "target {target_seconds} s is below the {} modeled cycles",
            base.total_cycles
        )));
    }
    Ok(LatencyModelParams {
        fixed_overhead_cycles: target_cycles as u64 - base.total_cycles,
        ..*p
    })
}
