use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::math::Matrix;
use crate::rng::gaussian;
use crate::{Error, Result};

/// Memristor device characteristics. Resistances in ohms, voltages in volts.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DeviceParams {
    pub r_on: f64,
    pub r_off: f64,
    pub v_set_reset_max: f64,
    pub v_threshold: f64,
    /// σ of the per-read multiplicative conductance noise.
    pub cycle_variability: f64,
    /// σ of the per-write multiplicative error on a conductance update.
    pub write_variability: f64,
    /// σ of the static per-device write-gain multiplier.
    pub device_variability: f64,
    pub endurance_limit: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            r_on: 2.0e6,
            r_off: 20.0e6,
            v_set_reset_max: 1.2,
            v_threshold: 1.0,
            cycle_variability: 0.10,
            write_variability: 0.10,
            device_variability: 0.10,
            endurance_limit: 1.0e9,
        }
    }
}

impl DeviceParams {
    /// Same window with every variability source disabled.
    pub fn ideal() -> Self {
        Self {
            cycle_variability: 0.0,
            write_variability: 0.0,
            device_variability: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_on > 0.0 && self.r_on < self.r_off) {
            return Err(Error::Config(alloc::format!(
                "need 0 < R_on < R_off, got {} and {}",
                self.r_on,
                self.r_off
            )));
        }
        for (name, v) in [
            ("cycle_variability", self.cycle_variability),
            ("write_variability", self.write_variability),
            ("device_variability", self.device_variability),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(alloc::format!("{name} {v} not in [0, 1)")));
            }
        }
        if !(self.endurance_limit > 0.0) {
            return Err(Error::Config("endurance limit must be positive".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn g_on(&self) -> f64 {
        1.0 / self.r_on
    }

    #[inline]
    pub fn g_off(&self) -> f64 {
        1.0 / self.r_off
    }

    /// Conductance midpoint, where the reference devices sit.
    #[inline]
    pub fn g_mid(&self) -> f64 {
        0.5 * (self.g_on() + self.g_off())
    }

    /// Largest representable conductance difference from the reference.
    #[inline]
    pub fn g_half_window(&self) -> f64 {
        0.5 * (self.g_on() - self.g_off())
    }
}

/// A `rows × cols` array of tunable devices plus one reference device per
/// input row. Row `i` is driven by input `i`; column `j` is a bitline.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CrossbarArray {
    rows: usize,
    cols: usize,
    /// Tunable device conductances, siemens, row-major.
    conductance: Vec<f64>,
    /// Reference device conductance per input row.
    reference: Vec<f64>,
    write_counts: Vec<u64>,
    /// Static device-to-device write-gain multipliers.
    device_offsets: Vec<f64>,
    /// Conductance per unit weight.
    scale: f64,
    g_min: f64,
    g_max: f64,
    clipped_writes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MapReport {
    pub saturated: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ProgramReport {
    pub writes: u64,
    pub clipped: u64,
}

impl CrossbarArray {
    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        self.scale
    }

    #[inline]
    pub fn conductance(&self, r: usize, c: usize) -> f64 {
        self.conductance[r * self.cols + c]
    }

    /// Device resistance `M_ji` in ohms.
    pub fn resistance(&self, r: usize, c: usize) -> f64 {
        1.0 / self.conductance(r, c)
    }

    pub fn reference_resistance(&self, r: usize) -> f64 {
        1.0 / self.reference[r]
    }

    #[inline]
    pub fn reference_conductance(&self, r: usize) -> f64 {
        self.reference[r]
    }

    pub fn conductances(&self) -> &[f64] {
        &self.conductance
    }

    pub fn write_counts(&self) -> &[u64] {
        &self.write_counts
    }

    pub fn total_writes(&self) -> u64 {
        self.write_counts.iter().sum()
    }

    pub fn device_offsets(&self) -> &[f64] {
        &self.device_offsets
    }

    pub fn clipped_writes(&self) -> u64 {
        self.clipped_writes
    }

    pub fn conductance_bounds(&self) -> (f64, f64) {
        (self.g_min, self.g_max)
    }

    /// Unscaled weight `1/M_ji − 1/M_ri` of one device.
    #[inline]
    pub fn differential(&self, r: usize, c: usize) -> f64 {
        self.conductance(r, c) - self.reference[r]
    }

    /// Writes the weight back through the mapping without noise or counting.
    /// Used for initial programming before any training write is accounted.
    fn set_weight(&mut self, r: usize, c: usize, w: f64) -> bool {
        let target = self.reference[r] + w * self.scale;
        let clamped = target.clamp(self.g_min, self.g_max);
        self.conductance[r * self.cols + c] = clamped;
        clamped != target
    }
}

/// Maps `w` with the scale chosen so that `max|w|` lands on the conductance rail.
pub fn map_weights<R: RngCore + ?Sized>(
    w: &Matrix,
    dev: &DeviceParams,
    rng: &mut R,
) -> Result<(CrossbarArray, MapReport)> {
    let range = w.max_abs();
    map_weights_with_range(w, if range > 0.0 { range } else { 1.0 }, dev, rng)
}

/// Maps `w` so that a weight of magnitude `w_range` reaches the rail. Weights
/// beyond it saturate and are reported. `rng` draws the static device offsets.
pub fn map_weights_with_range<R: RngCore + ?Sized>(
    w: &Matrix,
    w_range: f64,
    dev: &DeviceParams,
    rng: &mut R,
) -> Result<(CrossbarArray, MapReport)> {
    dev.validate()?;
    if !(w_range > 0.0 && w_range.is_finite()) {
        return Err(Error::Config(alloc::format!("weight range {w_range} must be positive")));
    }
    if !w.is_finite() {
        return Err(Error::NonFinite("map_weights"));
    }
    let (rows, cols) = w.shape();
    let device_offsets = (0..rows * cols)
        .map(|_| {
            if dev.device_variability > 0.0 {
                (1.0 + dev.device_variability * gaussian(rng)).max(0.0)
            } else {
                1.0
            }
        })
        .collect();
    let mut xb = CrossbarArray {
        rows,
        cols,
        conductance: vec![dev.g_mid(); rows * cols],
        reference: vec![dev.g_mid(); rows],
        write_counts: vec![0; rows * cols],
        device_offsets,
        scale: dev.g_half_window() / w_range,
        g_min: dev.g_off(),
        g_max: dev.g_on(),
        clipped_writes: 0,
    };
    let mut report = MapReport::default();
    for r in 0..rows {
        for c in 0..cols {
            if xb.set_weight(r, c, w.get(r, c)) {
                report.saturated += 1;
            }
        }
    }
    Ok((xb, report))
}

/// Reads the weights back as `(1/M_ji − 1/M_ri) / scale`.
pub fn read_weights(xb: &CrossbarArray) -> Matrix {
    let mut out = Matrix::zeros(xb.rows, xb.cols);
    for r in 0..xb.rows {
        for c in 0..xb.cols {
            out.set(r, c, xb.differential(r, c) / xb.scale);
        }
    }
    out
}

/// Applies a (sparse) weight change. Every nonzero entry is one write event:
/// the conductance moves by `Δw · scale`, perturbed by write noise and the
/// device's static offset, then clipped to the window.
pub fn program_weights<R: RngCore + ?Sized>(
    xb: &mut CrossbarArray,
    delta: &Matrix,
    dev: &DeviceParams,
    rng: &mut R,
) -> Result<ProgramReport> {
    delta.check_shape("program_weights", xb.rows, xb.cols)?;
    let mut report = ProgramReport::default();
    for (idx, &dw) in delta.as_slice().iter().enumerate() {
        if dw == 0.0 {
            continue;
        }
        let noise = if dev.write_variability > 0.0 {
            1.0 + dev.write_variability * gaussian(rng)
        } else {
            1.0
        };
        let dg = dw * xb.scale * noise * xb.device_offsets[idx];
        let target = xb.conductance[idx] + dg;
        let clamped = target.clamp(xb.g_min, xb.g_max);
        if clamped != target {
            report.clipped += 1;
        }
        xb.conductance[idx] = clamped;
        xb.write_counts[idx] += 1;
        report.writes += 1;
    }
    xb.clipped_writes += report.clipped;
    Ok(report)
}
