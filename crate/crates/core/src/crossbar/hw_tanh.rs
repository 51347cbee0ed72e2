//! Fixed-point piecewise-linear tanh.

/// Fractional bits of the datapath's fixed-point format.
pub const FRAC_BITS: u32 = 12;
const ONE: i32 = 1 << FRAC_BITS;

/// Signed fixed-point value with [`FRAC_BITS`] fractional bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Fixed(pub i32);

impl Fixed {
    pub const ZERO: Fixed = Fixed(0);
    pub const ONE: Fixed = Fixed(ONE);

    /// Round-to-nearest conversion, saturating at the `i32` range.
    pub fn from_f64(v: f64) -> Self {
        let scaled = libm::round(v * f64::from(ONE));
        Fixed(scaled.clamp(f64::from(i32::MIN), f64::from(i32::MAX)) as i32)
    }

    pub fn to_f64(self) -> f64 {
        f64::from(self.0) / f64::from(ONE)
    }
}

/// Product of two fixed-point values, rounded to nearest.
impl core::ops::Mul for Fixed {
    type Output = Fixed;

    fn mul(self, other: Fixed) -> Fixed {
        let p = i64::from(self.0) * i64::from(other.0);
        Fixed(((p + (1 << (FRAC_BITS - 1))) >> FRAC_BITS) as i32)
    }
}

/// Breakpoints (x) and node values (y) on the positive half, in fixed point.
/// Nodes are a minimax fit to tanh over [0, 4] with the last node pinned to 1;
/// the output is flat beyond the last breakpoint.
const BREAKS: [i32; 6] = [0, ONE / 2, ONE, 3 * ONE / 2, 2 * ONE, 3 * ONE];
const NODES: [i32; 6] = [0, 1941, 3167, 3722, 3928, ONE];

pub fn hw_tanh(x: Fixed) -> Fixed {
    let neg = x.0 < 0;
    let a = x.0.unsigned_abs().min(i32::MAX as u32) as i32;
    let y = if a >= BREAKS[5] {
        NODES[5]
    } else {
        let seg = BREAKS.windows(2).position(|w| a < w[1]).unwrap_or(4);
        let (x0, x1) = (BREAKS[seg], BREAKS[seg + 1]);
        let (y0, y1) = (NODES[seg], NODES[seg + 1]);
        let num = i64::from(y1 - y0) * i64::from(a - x0);
        let den = i64::from(x1 - x0);
        y0 + ((num + den / 2) / den) as i32
    };
    Fixed(if neg { -y } else { y })
}
