//! Endurance statistics over per-device write counts and lifespan projection.

use alloc::vec::Vec;

use crate::{Error, Result};

pub const SECONDS_PER_YEAR: f64 = 365.25 * 86_400.0;

/// Which per-device write rate the lifespan projection is based on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum RateBasis {
    Mean,
    /// The most-stressed decile: 90th-percentile device.
    #[default]
    P90,
    Max,
}

/// How observed counts are projected forward.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Projection {
    /// Parameter updates the counts were accumulated over.
    pub observed_updates: u64,
    /// Updates over the projection horizon.
    pub horizon_updates: f64,
    pub endurance_limit: f64,
}

impl Projection {
    /// Horizon expressed as years of operation at `update_rate` updates per second.
    pub fn over_years(observed_updates: u64, years: f64, update_rate: f64, endurance_limit: f64) -> Self {
        Self {
            observed_updates,
            horizon_updates: years * update_rate * SECONDS_PER_YEAR,
            endurance_limit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CdfPoint {
    pub writes: u64,
    /// Fraction of devices with at most `writes` writes.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WriteStats {
    pub counts: Vec<u64>,
    pub mean: f64,
    pub cdf: Vec<CdfPoint>,
    /// Devices whose projected writes over the horizon reach the endurance limit.
    pub overstress_fraction: f64,
    pub projection: Projection,
}

impl WriteStats {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Nearest-rank percentile of the per-device counts, `p` in `[0, 1]`.
    pub fn percentile(&self, p: f64) -> u64 {
        let mut sorted = self.counts.clone();
        sorted.sort_unstable();
        percentile_sorted(&sorted, p)
    }

    pub fn basis_count(&self, basis: RateBasis) -> f64 {
        match basis {
            RateBasis::Mean => self.mean,
            RateBasis::P90 => self.percentile(0.9) as f64,
            RateBasis::Max => self.counts.iter().copied().max().unwrap_or(0) as f64,
        }
    }
}

fn percentile_sorted(sorted: &[u64], p: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = libm::ceil(p.clamp(0.0, 1.0) * sorted.len() as f64) as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Empirical CDF: one point per distinct count, fractions ending at exactly 1.
pub fn empirical_cdf(counts: &[u64]) -> Vec<CdfPoint> {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let mut out: Vec<CdfPoint> = Vec::new();
    for (i, &c) in sorted.iter().enumerate() {
        let fraction = if i + 1 == n { 1.0 } else { (i + 1) as f64 / n as f64 };
        match out.last_mut() {
            Some(last) if last.writes == c => last.fraction = fraction,
            _ => out.push(CdfPoint { writes: c, fraction }),
        }
    }
    out
}

/// Concatenates the write counters of every array and summarizes them.
pub fn collect_write_stats(arrays: &[&[u64]], projection: Projection) -> Result<WriteStats> {
    let counts: Vec<u64> = arrays.iter().flat_map(|a| a.iter().copied()).collect();
    if counts.is_empty() {
        return Err(Error::Empty("write counters"));
    }
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / counts.len() as f64;
    let overstress = if projection.observed_updates == 0 {
        0
    } else {
        let factor = projection.horizon_updates / projection.observed_updates as f64;
        counts
            .iter()
            .filter(|&&c| c > 0 && c as f64 * factor >= projection.endurance_limit)
            .count()
    };
    Ok(WriteStats {
        cdf: empirical_cdf(&counts),
        overstress_fraction: overstress as f64 / counts.len() as f64,
        mean,
        counts,
        projection,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LifespanEstimate {
    pub update_rate: f64,
    pub endurance_limit: f64,
    pub basis: RateBasis,
    pub writes_per_device_per_update: f64,
    pub seconds: f64,
    /// `f64::INFINITY` when the basis device is never written.
    pub years: f64,
}

impl LifespanEstimate {
    pub fn is_unbounded(&self) -> bool {
        self.years.is_infinite()
    }
}

/// Years until the basis device reaches its endurance limit:
/// `endurance / (writes_per_update · update_rate · seconds_per_year)`.
pub fn project_lifespan(
    stats: &WriteStats,
    update_rate: f64,
    endurance_limit: f64,
    basis: RateBasis,
) -> Result<LifespanEstimate> {
    if !(update_rate > 0.0) {
        return Err(Error::Config(alloc::format!(
            "update rate {update_rate} must be positive"
        )));
    }
    if !(endurance_limit > 0.0) {
        return Err(Error::Config(alloc::format!(
            "endurance limit {endurance_limit} must be positive"
        )));
    }
    let updates = stats.projection.observed_updates;
    let per_update = if updates == 0 {
        0.0
    } else {
        stats.basis_count(basis) / updates as f64
    };
    Ok(lifespan_from_rate(per_update, update_rate, endurance_limit, basis))
}

pub fn lifespan_from_rate(
    writes_per_device_per_update: f64,
    update_rate: f64,
    endurance_limit: f64,
    basis: RateBasis,
) -> LifespanEstimate {
    let seconds = if writes_per_device_per_update > 0.0 {
        endurance_limit / (writes_per_device_per_update * update_rate)
    } else {
        f64::INFINITY
    };
    LifespanEstimate {
        update_rate,
        endurance_limit,
        basis,
        writes_per_device_per_update,
        seconds,
        years: seconds / SECONDS_PER_YEAR,
    }
}

/// Paired summary of two runs that differ only in their sparsification ratio.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SparsificationReport {
    pub cdf_a: Vec<CdfPoint>,
    pub cdf_b: Vec<CdfPoint>,
    pub mean_a: f64,
    pub mean_b: f64,
    /// `100 · (mean_a − mean_b) / mean_a`.
    pub mean_reduction_pct: f64,
    pub total_a: u64,
    pub total_b: u64,
    pub overstress_a: f64,
    pub overstress_b: f64,
    pub overstress_delta: f64,
}

pub fn sparsification_comparison(run_a: &WriteStats, run_b: &WriteStats) -> Result<SparsificationReport> {
    if run_a.counts.len() != run_b.counts.len() {
        return Err(Error::Consistency(alloc::format!(
            "runs cover {} and {} devices",
            run_a.counts.len(),
            run_b.counts.len()
        )));
    }
    let mean_reduction_pct = if run_a.mean > 0.0 {
        100.0 * (run_a.mean - run_b.mean) / run_a.mean
    } else {
        0.0
    };
    Ok(SparsificationReport {
        cdf_a: run_a.cdf.clone(),
        cdf_b: run_b.cdf.clone(),
        mean_a: run_a.mean,
        mean_b: run_b.mean,
        mean_reduction_pct,
        total_a: run_a.total(),
        total_b: run_b.total(),
        overstress_a: run_a.overstress_fraction,
        overstress_b: run_b.overstress_fraction,
        overstress_delta: run_b.overstress_fraction - run_a.overstress_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn proj(updates: u64) -> Projection {
        Projection::over_years(updates, 10.0, 1000.0, 1e9)
    }

    #[test]
    fn all_zero_counts() {
        let s = collect_write_stats(&[&[0, 0, 0]], proj(10)).unwrap();
        assert_eq!(s.mean, 0.0);
        assert_eq!(s.overstress_fraction, 0.0);
        let life = project_lifespan(&s, 1000.0, 1e9, RateBasis::Mean).unwrap();
        assert!(life.is_unbounded());
    }

    #[test]
    fn hand_computed_cdf() {
        let s = collect_write_stats(&[&[3, 1], &[4, 2]], proj(4)).unwrap();
        assert_eq!(s.mean, 2.5);
        let steps: Vec<(u64, f64)> = s.cdf.iter().map(|p| (p.writes, p.fraction)).collect();
        assert_eq!(steps, vec![(1, 0.25), (2, 0.5), (3, 0.75), (4, 1.0)]);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(collect_write_stats(&[], proj(1)).is_err());
        assert!(collect_write_stats(&[&[]], proj(1)).is_err());
    }

    #[test]
    fn closed_form_lifespan() {
        // every device written on every one of 500 updates
        let s = collect_write_stats(&[&[500; 8]], proj(500)).unwrap();
        let life = project_lifespan(&s, 1000.0, 1e9, RateBasis::P90).unwrap();
        assert_eq!(life.writes_per_device_per_update, 1.0);
        assert!((life.seconds - 1e6).abs() < 1e-6);
        assert!((life.years - 1e6 / SECONDS_PER_YEAR).abs() < 1e-15);
        assert!((life.years - 0.0317).abs() < 5e-5);
    }

    #[test]
    fn halving_rate_doubles_years() {
        let a = lifespan_from_rate(0.8, 1000.0, 1e9, RateBasis::Mean);
        let b = lifespan_from_rate(0.4, 1000.0, 1e9, RateBasis::Mean);
        assert!((b.years / a.years - 2.0).abs() < 1e-12);
    }

    #[test]
    fn overstress_projection() {
        // 1 write per update projects to 3.156e11 writes in 10 years at 1 kHz
        let s = collect_write_stats(&[&[100, 0, 1, 0]], proj(100)).unwrap();
        assert_eq!(s.overstress_fraction, 0.5);
        let strict = Projection {
            horizon_updates: 1e9,
            ..proj(100)
        };
        let s = collect_write_stats(&[&[100, 0, 1, 0]], strict).unwrap();
        assert_eq!(s.overstress_fraction, 0.25);
    }

    #[test]
    fn comparison_examples() {
        let a = collect_write_stats(&[&[10, 10, 10, 10]], proj(10)).unwrap();
        let same = sparsification_comparison(&a, &a).unwrap();
        assert_eq!(same.mean_reduction_pct, 0.0);
        let b = collect_write_stats(&[&[5, 5, 6, 4]], proj(10)).unwrap();
        let r = sparsification_comparison(&a, &b).unwrap();
        assert!((r.mean_reduction_pct - 50.0).abs() < 1e-12);
        let c = collect_write_stats(&[&[1, 2, 3]], proj(10)).unwrap();
        assert!(matches!(sparsification_comparison(&a, &c), Err(Error::Consistency(_))));
    }

    #[test]
    fn percentile_nearest_rank() {
        let s = collect_write_stats(&[&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]], proj(10)).unwrap();
        assert_eq!(s.percentile(0.9), 9);
        assert_eq!(s.percentile(1.0), 10);
        assert_eq!(s.basis_count(RateBasis::Max), 10.0);
    }

    proptest! {
        #[test]
        fn cdf_monotone_and_normalized(counts in proptest::collection::vec(0u64..50, 1..200)) {
            let s = collect_write_stats(&[&counts], proj(50)).unwrap();
            let mut prev = (0u64, 0.0f64);
            for (i, p) in s.cdf.iter().enumerate() {
                if i > 0 {
                    prop_assert!(p.writes > prev.0);
                }
                prop_assert!(p.fraction > prev.1 && p.fraction <= 1.0);
                prev = (p.writes, p.fraction);
            }
            prop_assert_eq!(s.cdf.last().unwrap().fraction, 1.0);
        }

        #[test]
        fn lifespan_monotone_in_rate(a in 1e-6f64..10.0, b in 1e-6f64..10.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let y_lo = lifespan_from_rate(lo, 1000.0, 1e9, RateBasis::Mean).years;
            let y_hi = lifespan_from_rate(hi, 1000.0, 1e9, RateBasis::Mean).years;
            prop_assert!(y_lo >= y_hi);
        }
    }
}
