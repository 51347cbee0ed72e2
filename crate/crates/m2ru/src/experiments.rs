//! Experiment families behind the CLI subcommands. Each returns its results
//! as values and, separately, can write them into an output directory.

use std::fs;
use std::path::{Path, PathBuf};

use m2ru_core::crossbar::{
    encode_unsigned, ideal_gain, map_weights_with_range, wbs_matvec, CrossbarNetwork, DeviceParams, ReadMode,
};
use m2ru_core::harness::{
    build_permuted_mnist, build_split_features, calibrate_overhead, latency_breakdown, mean_accuracy,
    synthetic_digit_split, ContinualRun, LatencyBreakdown, LatencyModelParams, TaskStream,
};
use m2ru_core::math::Matrix;
use m2ru_core::miru::{Dims, NetworkParams};
use m2ru_core::reliability::{
    collect_write_stats, project_lifespan, sparsification_comparison, LifespanEstimate, Projection,
    SparsificationReport, WriteStats,
};
use m2ru_core::replay::{dequantize, stochastic_quantize, truncate_quantize};
use m2ru_core::rng::{below, stream, uniform_f64, xorshift_seed, Stream};
use m2ru_core::trainer::{BackendKind, Model};
use serde_json::{json, Value};

use crate::checkpoint::{save_checkpoint, Checkpoint};
use crate::config::{DataSource, RunConfig};
use crate::error::{io_err, Error, Result};
use crate::features::load_features;
use crate::idx::load_idx;
use crate::metrics::{accuracy_csv, cdf_csv, fmt9, num, steps_csv, summary_json, to_pretty, write_file};

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("data.{key} is required for this source")))
}

/// Builds the configured task stream.
pub fn load_stream(cfg: &RunConfig) -> Result<TaskStream> {
    cfg.check_paths()?;
    let d = &cfg.data;
    let seed = cfg.seeds.data();
    let ts = match d.source {
        DataSource::Synthetic => {
            let (train, test) = synthetic_digit_split(d.n_train, d.n_test, seed);
            build_permuted_mnist(&train, &test, d.tasks, seed)?
        }
        DataSource::Idx => {
            let train = load_idx(
                required(&d.train_images, "train_images")?,
                required(&d.train_labels, "train_labels")?,
            )?;
            let test = load_idx(
                required(&d.test_images, "test_images")?,
                required(&d.test_labels, "test_labels")?,
            )?;
            build_permuted_mnist(&train.truncated(d.n_train), &test.truncated(d.n_test), d.tasks, seed)?
        }
        DataSource::Features => {
            let train = load_features(required(&d.train_features, "train_features")?)?;
            let test = load_features(required(&d.test_features, "test_features")?)?;
            build_split_features(&train, &test, d.classes_per_task, cfg.network.n_x)?
        }
    };
    let n = &cfg.network;
    if ts.n_x != n.n_x || ts.n_t != n.n_t || ts.n_y > n.n_y {
        return Err(Error::Config(format!(
            "data gives n_x = {}, n_t = {}, {} classes but network is n_x = {}, n_t = {}, n_y = {}",
            ts.n_x, ts.n_t, ts.n_y, n.n_x, n.n_t, n.n_y
        )));
    }
    if ts.len() != d.tasks {
        return Err(Error::Config(format!(
            "data yields {} tasks, data.tasks = {}",
            ts.len(),
            d.tasks
        )));
    }
    Ok(ts)
}

pub fn build_model(cfg: &RunConfig) -> Result<Model> {
    let n = &cfg.network;
    let dims = Dims::new(n.n_x, n.n_h, n.n_y, n.n_t)?;
    let params = NetworkParams::init(dims, n.beta, n.lambda, cfg.seeds.weights())?;
    Ok(match cfg.backend {
        BackendKind::Reference => Model::reference(params),
        BackendKind::Crossbar => Model::crossbar(CrossbarNetwork::from_params(
            &params,
            n.n_t,
            cfg.device,
            cfg.frontend.build(),
            cfg.hardware,
            cfg.seeds.device(),
        )?),
    })
}

pub fn new_run(cfg: &RunConfig) -> Result<ContinualRun> {
    Ok(ContinualRun::new(
        build_model(cfg)?,
        cfg.continual(),
        cfg.data.tasks,
        cfg.seeds.training(),
    )?)
}

/// Periodic checkpointing while a run advances.
#[derive(Debug, Clone)]
pub struct CheckpointPolicy {
    pub every: usize,
    pub path: PathBuf,
}

/// Advances `run` to the end, or until `stop_after` advances have been made.
pub fn drive(
    cfg: &RunConfig,
    ts: &TaskStream,
    run: &mut ContinualRun,
    policy: Option<&CheckpointPolicy>,
    stop_after: Option<usize>,
) -> Result<()> {
    let mut done = 0usize;
    loop {
        if stop_after.is_some_and(|n| done >= n) {
            break;
        }
        if !run.advance(ts)? {
            break;
        }
        done += 1;
        if let Some(p) = policy {
            if p.every > 0 && done.is_multiple_of(p.every) {
                save_checkpoint(
                    &Checkpoint {
                        config: cfg.clone(),
                        run: run.clone(),
                    },
                    &p.path,
                )?;
            }
        }
    }
    Ok(())
}

pub fn write_stats(cfg: &RunConfig, run: &ContinualRun) -> Result<WriteStats> {
    let projection = Projection::over_years(
        run.metrics.steps.len() as u64,
        cfg.reliability.horizon_years,
        cfg.reliability.update_rate,
        cfg.device.endurance_limit,
    );
    Ok(collect_write_stats(&run.model.write_counts(), projection)?)
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Writes config echo, per-step rows, accuracy matrix, write CDF and summary.
pub fn write_run_outputs(cfg: &RunConfig, run: &ContinualRun, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let ma = mean_accuracy(&run.accuracy).ok();
    let stats = write_stats(cfg, run)?;
    write_file(dir, "config.toml", &cfg.to_toml())?;
    write_file(dir, "steps.csv", &steps_csv(&run.metrics))?;
    write_file(dir, "accuracy.csv", &accuracy_csv(&run.accuracy))?;
    write_file(dir, "write_cdf.csv", &cdf_csv(&stats.cdf))?;
    let mut summary = summary_json(&run.accuracy, &run.metrics, ma);
    summary["backend"] = json!(cfg.backend);
    summary["device_writes"] = json!({
        "total": stats.total(),
        "mean": num(stats.mean),
        "overstress_fraction": num(stats.overstress_fraction),
    });
    write_file(dir, "summary.json", &to_pretty(&summary))
}

/// Mean relative error `‖W·x̂ − W·x‖ / ‖W·x‖` over random pairs, for stochastic
/// rounding and truncation of the same inputs. `W` is uniform in `[−1, 1]`,
/// `x` holds 8-bit pixel values `k/255`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantErrors {
    pub bits: u32,
    pub stochastic: f64,
    pub truncation: f64,
}

pub fn quantized_mvm_errors(pairs: usize, rows: usize, cols: usize, bits: u32, seed: u64) -> Result<QuantErrors> {
    let mut rng = stream(seed, Stream::Dataset);
    let mut r = xorshift_seed(seed, Stream::Quantizer);
    let rel = |w: &Matrix, x: &[f64], xq: &[f64]| -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for c in 0..w.cols() {
            let (mut exact, mut approx) = (0.0, 0.0);
            for i in 0..w.rows() {
                exact += w.get(i, c) * x[i];
                approx += w.get(i, c) * xq[i];
            }
            num += (approx - exact) * (approx - exact);
            den += exact * exact;
        }
        (num / den).sqrt()
    };
    let (mut s_sum, mut t_sum) = (0.0, 0.0);
    for _ in 0..pairs {
        let w = Matrix::uniform(rows, cols, 1.0, &mut rng);
        let x: Vec<f64> = (0..rows).map(|_| below(&mut rng, 256) as f64 / 255.0).collect();
        let xs = x
            .iter()
            .map(|&v| dequantize(stochastic_quantize(v, bits, r.next_unit())?, bits))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let xt = x
            .iter()
            .map(|&v| dequantize(truncate_quantize(v, bits)?, bits))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        s_sum += rel(&w, &x, &xs);
        t_sum += rel(&w, &x, &xt);
    }
    Ok(QuantErrors {
        bits,
        stochastic: s_sum / pairs as f64,
        truncation: t_sum / pairs as f64,
    })
}

/// Per-column full-scale relative error of one streamed matvec against the
/// float product on the unquantized input: `|v/gain − W·x| / Σ|w|`.
pub fn wbs_column_errors(w: &Matrix, x: &[f64], n_b: u32, device: &DeviceParams, seed: u64) -> Result<Vec<f64>> {
    let fe = m2ru_core::crossbar::AnalogFrontEnd::new(n_b);
    let mut offsets = stream(seed, Stream::DeviceOffsets);
    let range = w.max_abs().max(f64::MIN_POSITIVE);
    let (xb, _) = map_weights_with_range(w, range, device, &mut offsets)?;
    let codes: Vec<u32> = x.iter().map(|&v| encode_unsigned(v, n_b)).collect();
    let signs = vec![1i8; x.len()];
    let mut noise = stream(seed, Stream::ReadNoise);
    let read = if device.cycle_variability > 0.0 {
        ReadMode::Noisy {
            sigma: device.cycle_variability,
            rng: &mut noise,
        }
    } else {
        ReadMode::Ideal
    };
    let v = wbs_matvec(&xb, &fe, &codes, &signs, read)?;
    let gain = ideal_gain(&xb, &fe);
    Ok((0..w.cols())
        .map(|c| {
            let exact: f64 = (0..w.rows()).map(|i| w.get(i, c) * x[i]).sum();
            let full_scale: f64 = (0..w.rows()).map(|i| w.get(i, c).abs()).sum();
            if full_scale == 0.0 {
                0.0
            } else {
                (v[c] / gain - exact).abs() / full_scale
            }
        })
        .collect())
}

/// Random `rows × cols` matrix in `[−1, 1]` and input in `[0, 1]`.
pub fn random_problem(rows: usize, cols: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let mut rng = stream(seed, Stream::WeightInit);
    let w = Matrix::uniform(rows, cols, 1.0, &mut rng);
    let x = (0..rows).map(|_| uniform_f64(&mut rng)).collect();
    (w, x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub kind: &'static str,
    pub bits: u32,
    pub size: usize,
    pub mean: f64,
    pub max: f64,
    pub truncation: Option<f64>,
}

pub fn wbs_sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    let seed = cfg.seeds.master;
    let mut rows = Vec::new();
    for &bits in &cfg.sweep.bits {
        let q = quantized_mvm_errors(cfg.sweep.pairs, cfg.network.n_h, cfg.network.n_x, bits, seed)?;
        rows.push(SweepRow {
            kind: "replay_quantization",
            bits,
            size: cfg.network.n_h,
            mean: q.stochastic,
            max: f64::NAN,
            truncation: Some(q.truncation),
        });
    }
    let trials = (cfg.sweep.pairs / 10).max(1);
    for (kind, device) in [("wbs_ideal", DeviceParams::ideal()), ("wbs_device", cfg.device)] {
        for &size in &cfg.sweep.sizes {
            let (mut sum, mut max, mut n) = (0.0, 0.0f64, 0usize);
            for t in 0..trials {
                let problem_seed = seed ^ ((size as u64) << 32) ^ t as u64;
                let (w, x) = random_problem(size, size, problem_seed);
                for e in wbs_column_errors(&w, &x, cfg.sweep.stream_bits, &device, seed.wrapping_add(t as u64))? {
                    sum += e;
                    max = max.max(e);
                    n += 1;
                }
            }
            rows.push(SweepRow {
                kind,
                bits: cfg.sweep.stream_bits,
                size,
                mean: sum / n as f64,
                max,
                truncation: None,
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("kind,bits,size,mean_error,max_error,truncation_error\n");
    for r in rows {
        let max = if r.max.is_nan() { String::new() } else { fmt9(r.max) };
        let trunc = r.truncation.map(fmt9).unwrap_or_default();
        s.push_str(&format!(
            "{},{},{},{},{max},{trunc}\n",
            r.kind,
            r.bits,
            r.size,
            fmt9(r.mean)
        ));
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityOutcome {
    pub primary: WriteStats,
    pub compare: WriteStats,
    pub lifespan_primary: LifespanEstimate,
    pub lifespan_compare: LifespanEstimate,
    pub report: SparsificationReport,
    pub mean_accuracy_primary: f64,
    pub mean_accuracy_compare: f64,
}

/// Runs the configured workload at the configured keep ratio and again at
/// the comparison keep ratio, then summarizes device wear for both.
pub fn reliability(cfg: &RunConfig, ts: &TaskStream) -> Result<ReliabilityOutcome> {
    let mut compare_cfg = cfg.clone();
    compare_cfg.trainer.keep_ratio = cfg.reliability.compare_keep_ratio;
    let mut outcomes = Vec::new();
    for c in [cfg, &compare_cfg] {
        let mut run = new_run(c)?;
        run.run_to_end(ts)?;
        let stats = write_stats(c, &run)?;
        let life = project_lifespan(
            &stats,
            c.reliability.update_rate,
            c.device.endurance_limit,
            c.reliability.basis,
        )?;
        outcomes.push((stats, life, mean_accuracy(&run.accuracy)?));
    }
    let (compare, lifespan_compare, mean_accuracy_compare) = outcomes.pop().expect("two runs");
    let (primary, lifespan_primary, mean_accuracy_primary) = outcomes.pop().expect("two runs");
    let report = sparsification_comparison(&compare, &primary)?;
    Ok(ReliabilityOutcome {
        primary,
        compare,
        lifespan_primary,
        lifespan_compare,
        report,
        mean_accuracy_primary,
        mean_accuracy_compare,
    })
}

fn lifespan_json(l: &LifespanEstimate) -> Value {
    json!({
        "basis": l.basis,
        "update_rate": num(l.update_rate),
        "endurance_limit": num(l.endurance_limit),
        "writes_per_device_per_update": num(l.writes_per_device_per_update),
        "seconds": num(l.seconds),
        "years": num(l.years),
    })
}

pub fn write_reliability_outputs(cfg: &RunConfig, out: &ReliabilityOutcome, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    write_file(dir, "config.toml", &cfg.to_toml())?;
    write_file(dir, "write_cdf_primary.csv", &cdf_csv(&out.primary.cdf))?;
    write_file(dir, "write_cdf_compare.csv", &cdf_csv(&out.compare.cdf))?;
    let r = &out.report;
    let doc = json!({
        "keep_ratio": num(cfg.trainer.keep_ratio),
        "compare_keep_ratio": num(cfg.reliability.compare_keep_ratio),
        "mean_writes": num(r.mean_b),
        "compare_mean_writes": num(r.mean_a),
        "mean_reduction_pct": num(r.mean_reduction_pct),
        "total_writes": r.total_b,
        "compare_total_writes": r.total_a,
        "overstress_fraction": num(r.overstress_b),
        "compare_overstress_fraction": num(r.overstress_a),
        "lifespan": lifespan_json(&out.lifespan_primary),
        "compare_lifespan": lifespan_json(&out.lifespan_compare),
        "mean_accuracy": num(out.mean_accuracy_primary),
        "compare_mean_accuracy": num(out.mean_accuracy_compare),
    });
    write_file(dir, "reliability.json", &to_pretty(&doc))
}

/// Least-squares line through the points; returns `(slope, intercept, R²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    (slope, intercept, r2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyOutcome {
    pub model: LatencyModelParams,
    pub calibration: LatencyBreakdown,
    /// `(n_b, breakdown)` at the calibration size, tiled.
    pub by_bits: Vec<(u32, LatencyBreakdown)>,
    /// `(n_h, tiled, untiled)`.
    pub by_size: Vec<(usize, LatencyBreakdown, LatencyBreakdown)>,
    pub bits_r2: f64,
}

pub fn latency(cfg: &RunConfig) -> Result<LatencyOutcome> {
    let l = &cfg.latency;
    let n_x = cfg.network.n_x;
    let model = match l.calibrate_to {
        Some(target) => calibrate_overhead(&l.model, l.calibrate_n_h, n_x, target)?,
        None => l.model,
    };
    let calibration = latency_breakdown(&model, l.calibrate_n_h, n_x)?;
    let by_bits = (l.n_b_range.0..=l.n_b_range.1)
        .map(|n_b| {
            Ok((
                n_b,
                latency_breakdown(&LatencyModelParams { n_b, ..model }, l.calibrate_n_h, n_x)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let untiled = LatencyModelParams { n_tiles: None, ..model };
    let tiled = LatencyModelParams {
        n_tiles: model.n_tiles.or(Some(cfg.hardware.n_tiles)),
        ..model
    };
    let by_size = l
        .n_h_values
        .iter()
        .map(|&n_h| {
            Ok((
                n_h,
                latency_breakdown(&tiled, n_h, n_x)?,
                latency_breakdown(&untiled, n_h, n_x)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = by_bits.iter().map(|(b, _)| f64::from(*b)).collect();
    let ys: Vec<f64> = by_bits.iter().map(|(_, r)| r.seconds).collect();
    let (_, _, bits_r2) = linear_fit(&xs, &ys);
    Ok(LatencyOutcome {
        model,
        calibration,
        by_bits,
        by_size,
        bits_r2,
    })
}

pub fn write_latency_outputs(cfg: &RunConfig, out: &LatencyOutcome, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let mut s = String::from(
        "sweep,n_b,n_h,tiling,stream_cycles,adc_cycles,interp_cycles,overhead_cycles,total_cycles,seconds\n",
    );
    let mut row = |sweep: &str, n_b: u32, n_h: usize, tiling: bool, b: &LatencyBreakdown| {
        s.push_str(&format!(
            "{sweep},{n_b},{n_h},{tiling},{},{},{},{},{},{}\n",
            b.stream_cycles,
            b.adc_cycles,
            b.interp_cycles,
            b.overhead_cycles,
            b.total_cycles,
            fmt9(b.seconds)
        ));
    };
    let n_h0 = cfg.latency.calibrate_n_h;
    for (n_b, b) in &out.by_bits {
        row("bits", *n_b, n_h0, out.model.n_tiles.is_some(), b);
    }
    for (n_h, t, u) in &out.by_size {
        row("size", out.model.n_b, *n_h, true, t);
        row("size", out.model.n_b, *n_h, false, u);
    }
    write_file(dir, "latency.csv", &s)?;
    let doc = json!({
        "clock_hz": num(out.model.clock_hz),
        "n_b": out.model.n_b,
        "n_h": n_h0,
        "fixed_overhead_cycles": out.model.fixed_overhead_cycles,
        "total_cycles": out.calibration.total_cycles,
        "seconds": num(out.calibration.seconds),
        "bits_r2": num(out.bits_r2),
    });
    write_file(dir, "latency.json", &to_pretty(&doc))
}
