//! TOML run configuration. Every section has defaults; unknown keys are errors.

use std::fs;
use std::path::{Path, PathBuf};

use m2ru_core::crossbar::{AnalogFrontEnd, DeviceParams, HwConfig};
use m2ru_core::dfa::TrainConfig;
use m2ru_core::harness::{ContinualConfig, LatencyModelParams, ReplayConfig};
use m2ru_core::reliability::RateBasis;
use m2ru_core::trainer::BackendKind;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendKind,
    pub out_dir: PathBuf,
    pub seeds: Seeds,
    pub network: NetworkConfig,
    pub trainer: TrainerConfig,
    pub replay: ReplaySection,
    pub data: DataConfig,
    pub device: DeviceParams,
    pub frontend: FrontendConfig,
    pub hardware: HwConfig,
    pub reliability: ReliabilityConfig,
    pub latency: LatencyConfig,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Reference,
            out_dir: PathBuf::from("out"),
            seeds: Seeds::default(),
            network: NetworkConfig::default(),
            trainer: TrainerConfig::default(),
            replay: ReplaySection::default(),
            data: DataConfig::default(),
            device: DeviceParams::default(),
            frontend: FrontendConfig::default(),
            hardware: HwConfig::default(),
            reliability: ReliabilityConfig::default(),
            latency: LatencyConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

/// `master` feeds every purpose whose own seed is unset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub master: u64,
    /// Dataset generation and task permutations.
    pub data: Option<u64>,
    /// Initial weights and the feedback matrix.
    pub weights: Option<u64>,
    /// Device offsets, read noise and write noise.
    pub device: Option<u64>,
    /// Example order, reservoir sampler, quantizer and replay draws.
    pub training: Option<u64>,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            master: 1,
            data: None,
            weights: None,
            device: None,
            training: None,
        }
    }
}

impl Seeds {
    pub fn data(&self) -> u64 {
        self.data.unwrap_or(self.master)
    }
    pub fn weights(&self) -> u64 {
        self.weights.unwrap_or(self.master)
    }
    pub fn device(&self) -> u64 {
        self.device.unwrap_or(self.master)
    }
    pub fn training(&self) -> u64 {
        self.training.unwrap_or(self.master)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub n_x: usize,
    pub n_h: usize,
    pub n_y: usize,
    pub n_t: usize,
    pub beta: f64,
    pub lambda: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_x: 28,
            n_h: 100,
            n_y: 10,
            n_t: 28,
            beta: 0.5,
            lambda: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub lr: f64,
    pub keep_ratio: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub train_biases: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            keep_ratio: 0.43,
            epochs: 1,
            batch_size: 5,
            train_biases: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplaySection {
    pub enabled: bool,
    /// Buffer slots per task in the stream.
    pub capacity_per_task: usize,
    pub bits: u32,
    /// Replayed examples per new example.
    pub ratio: f64,
}

impl Default for ReplaySection {
    fn default() -> Self {
        Self {
            enabled: true,
            capacity_per_task: 600,
            bits: 4,
            ratio: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    /// Procedurally generated digits; needs no files.
    Synthetic,
    /// IDX image/label files, presented as permuted-pixel tasks.
    Idx,
    /// Delimited feature files split into class-incremental groups.
    Features,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    pub tasks: usize,
    /// Examples per task taken from the training and test sets. Feature files
    /// are used whole.
    pub n_train: usize,
    pub n_test: usize,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub train_features: Option<PathBuf>,
    pub test_features: Option<PathBuf>,
    pub classes_per_task: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            tasks: 3,
            n_train: 5000,
            n_test: 1000,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            train_features: None,
            test_features: None,
            classes_per_task: 2,
        }
    }
}

/// Overrides for the analog front end; the bit ratios follow from `n_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontendConfig {
    pub n_b: u32,
    pub adc_bits: u32,
    pub t_s: f64,
    pub c_f: f64,
    pub c_f_hold: f64,
    pub i_max: f64,
    pub v_bit: f64,
    pub t_conv: f64,
    pub r_leakage: f64,
    pub i_bias: f64,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        let fe = AnalogFrontEnd::default();
        Self {
            n_b: fe.n_b,
            adc_bits: fe.adc_bits,
            t_s: fe.t_s,
            c_f: fe.c_f,
            c_f_hold: fe.c_f_hold,
            i_max: fe.i_max,
            v_bit: fe.v_bit,
            t_conv: fe.t_conv,
            r_leakage: fe.r_leakage,
            i_bias: fe.i_bias,
        }
    }
}

impl FrontendConfig {
    pub fn build(&self) -> AnalogFrontEnd {
        let mut fe = AnalogFrontEnd::new(self.n_b);
        fe.adc_bits = self.adc_bits;
        fe.t_s = self.t_s;
        fe.c_f = self.c_f;
        fe.c_f_hold = self.c_f_hold;
        fe.i_max = self.i_max;
        fe.v_bit = self.v_bit;
        fe.t_conv = self.t_conv;
        fe.r_leakage = self.r_leakage;
        fe.i_bias = self.i_bias;
        fe
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReliabilityConfig {
    /// Parameter updates per second.
    pub update_rate: f64,
    pub basis: RateBasis,
    pub horizon_years: f64,
    /// Keep ratio of the comparison run.
    pub compare_keep_ratio: f64,
}

impl Default for ReliabilityConfig {
    fn default() -> Self {
        Self {
            update_rate: 1000.0,
            basis: RateBasis::P90,
            horizon_years: 10.0,
            compare_keep_ratio: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyConfig {
    pub model: LatencyModelParams,
    /// Seconds per step at `calibrate_n_h` and the model's `n_b`; fitted
    /// into the overhead cycles when set.
    pub calibrate_to: Option<f64>,
    pub calibrate_n_h: usize,
    pub n_b_range: (u32, u32),
    pub n_h_values: Vec<usize>,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        Self {
            model: LatencyModelParams::default(),
            calibrate_to: Some(1.85e-6),
            calibrate_n_h: 100,
            n_b_range: (2, 12),
            n_h_values: vec![16, 32, 64, 100, 128, 256],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub pairs: usize,
    pub bits: Vec<u32>,
    pub sizes: Vec<usize>,
    /// Stream bits for the crossbar size sweep.
    pub stream_bits: u32,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            pairs: 1000,
            bits: vec![2, 3, 4, 5, 6, 8],
            sizes: vec![8, 16, 32, 64, 128],
            stream_bits: 8,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn continual(&self) -> ContinualConfig {
        ContinualConfig {
            train: self.train_config(),
            batch_size: self.trainer.batch_size,
            epochs: self.trainer.epochs,
            replay: self.replay.enabled.then_some(ReplayConfig {
                capacity: self.replay.capacity_per_task * self.data.tasks,
                bits: self.replay.bits,
                ratio: self.replay.ratio,
            }),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.trainer.lr,
            keep_ratio: self.trainer.keep_ratio,
            train_biases: self.trainer.train_biases,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.network;
        m2ru_core::miru::Dims::new(n.n_x, n.n_h, n.n_y, n.n_t)?;
        for (name, v) in [("beta", n.beta), ("lambda", n.lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("network.{name} = {v} not in [0, 1]")));
            }
        }
        self.continual().validate()?;
        if self.replay.enabled && !(1..=16).contains(&self.replay.bits) {
            return Err(Error::Config(format!(
                "replay.bits = {} not in 1..=16",
                self.replay.bits
            )));
        }
        if self.data.tasks == 0 || self.data.n_train == 0 || self.data.n_test == 0 {
            return Err(Error::Config(
                "data.tasks, n_train and n_test must be at least 1".into(),
            ));
        }
        self.device.validate()?;
        self.frontend.build().validate(self.device.v_threshold)?;
        if self.hardware.n_tiles == 0 {
            return Err(Error::Config("hardware.n_tiles must be at least 1".into()));
        }
        if !(self.reliability.update_rate > 0.0) || !(self.reliability.horizon_years > 0.0) {
            return Err(Error::Config("reliability rates must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.reliability.compare_keep_ratio) || self.reliability.compare_keep_ratio == 0.0 {
            return Err(Error::Config(
                "reliability.compare_keep_ratio must lie in (0, 1]".into(),
            ));
        }
        self.latency.model.validate()?;
        let (lo, hi) = self.latency.n_b_range;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("latency.n_b_range ({lo}, {hi}) is empty")));
        }
        if self.sweep.pairs == 0 || self.sweep.bits.iter().any(|b| !(1..=16).contains(b)) {
            return Err(Error::Config("sweep needs pairs >= 1 and bits in 1..=16".into()));
        }
        Ok(())
    }

    /// Every dataset path the configured source needs, checked before any compute.
    pub fn check_paths(&self) -> Result<()> {
        let d = &self.data;
        let needed: Vec<(&str, &Option<PathBuf>)> = match d.source {
            DataSource::Synthetic => vec![],
            DataSource::Idx => vec![
                ("train_images", &d.train_images),
                ("train_labels", &d.train_labels),
                ("test_images", &d.test_images),
                ("test_labels", &d.test_labels),
            ],
            DataSource::Features => vec![
                ("train_features", &d.train_features),
                ("test_features", &d.test_features),
            ],
        };
        for (key, path) in needed {
            match path {
                None => return Err(Error::Config(format!("data.{key} is required for this source"))),
                Some(p) if !p.is_file() => {
                    return Err(Error::Io {
                        path: p.clone(),
                        source: std::io::Error::new(std::io::ErrorKind::NotFound, "dataset file not found"),
                    })
                }
                _ => {}
            }
        }
        Ok(())
    }
}
