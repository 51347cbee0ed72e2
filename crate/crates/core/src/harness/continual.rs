//! Sequential train/replay/evaluate loop over a task stream, written as a
//! resumable state machine so a run can be checkpointed between steps.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use super::stream::TaskStream;
use crate::dfa::TrainConfig;
use crate::miru::Example;
use crate::replay::ReplayUnit;
use crate::rng::{shuffle, stream, xorshift_seed, Stream};
use crate::trainer::{train_step, Model};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ReplayConfig {
    pub capacity: usize,
    pub bits: u32,
    /// Replayed examples per new example in each step.
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContinualConfig {
    pub train: TrainConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub replay: Option<ReplayConfig>,
}

impl ContinualConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be at least 1".into()));
        }
        if let Some(r) = &self.replay {
            if r.capacity == 0 || !(r.ratio >= 0.0) || !r.ratio.is_finite() {
                return Err(Error::Config(
                    "replay needs capacity >= 1 and a finite ratio >= 0".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Lower-triangular accuracy table: row `j` holds accuracy on tasks `0..=j`
/// after training through task `j`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AccuracyMatrix {
    n_tasks: usize,
    rows: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn new(n_tasks: usize) -> Self {
        Self {
            n_tasks,
            rows: Vec::new(),
        }
    }

    pub fn n_tasks(&self) -> usize {
        self.n_tasks
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, after: usize, task: usize) -> Option<f64> {
        self.rows.get(after).and_then(|r| r.get(task)).copied()
    }

    pub fn is_complete(&self) -> bool {
        self.rows.len() == self.n_tasks
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        let j = self.rows.len();
        if j >= self.n_tasks {
            return Err(Error::Consistency("accuracy matrix already complete".into()));
        }
        if row.len() != j + 1 {
            return Err(Error::dim("accuracy row", j + 1, row.len()));
        }
        if row.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::domain("accuracy row", "entries must lie in [0, 1]"));
        }
        self.rows.push(row);
        Ok(())
    }
}

/// Mean of the final row.
pub fn mean_accuracy(r: &AccuracyMatrix) -> Result<f64> {
    if !r.is_complete() || r.n_tasks == 0 {
        return Err(Error::Consistency(alloc::format!(
            "accuracy matrix has {} of {} rows",
            r.rows.len(),
            r.n_tasks
        )));
    }
    let last = &r.rows[r.n_tasks - 1];
    Ok(last.iter().sum::<f64>() / last.len() as f64)
}

pub fn evaluate(model: &mut Model, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let mut correct = 0usize;
    for ex in examples {
        if model.predict(ex)? == ex.label() {
            correct += 1;
        }
    }
    Ok(correct as f64 / examples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub task: usize,
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub writes: u64,
    pub nonzeros: u64,
    pub replayed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WriteSnapshot {
    pub total: u64,
    pub mean: f64,
    pub p90: u64,
    pub max: u64,
}

impl WriteSnapshot {
    pub fn of(model: &Model) -> Self {
        let mut counts: Vec<u64> = model.write_counts().into_iter().flatten().copied().collect();
        counts.sort_unstable();
        let n = counts.len().max(1);
        let total = counts.iter().sum();
        let rank = libm::ceil(0.9 * n as f64) as usize;
        Self {
            total,
            mean: total as f64 / n as f64,
            p90: counts.get(rank.max(1) - 1).copied().unwrap_or(0),
            max: counts.last().copied().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TaskRecord {
    pub task: usize,
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub writes: WriteSnapshot,
    pub buffer_occupancy: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunMetrics {
    pub steps: Vec<StepRecord>,
    pub tasks: Vec<TaskRecord>,
    pub total_writes: u64,
    pub total_nonzeros: u64,
}

/// Everything that changes while a run advances. Rebuilding the stream from
/// the same configuration and continuing from a restored `ContinualRun`
/// reproduces the uninterrupted run exactly.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContinualRun {
    pub cfg: ContinualConfig,
    pub model: Model,
    pub replay: Option<ReplayUnit>,
    shuffle_rng: ChaCha8Rng,
    task: usize,
    epoch: usize,
    cursor: usize,
    order: Vec<usize>,
    pub accuracy: AccuracyMatrix,
    pub metrics: RunMetrics,
}

impl ContinualRun {
    pub fn new(model: Model, cfg: ContinualConfig, n_tasks: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if n_tasks == 0 {
            return Err(Error::Empty("task stream"));
        }
        let replay = cfg
            .replay
            .map(|r| {
                ReplayUnit::new(
                    r.capacity,
                    r.bits,
                    xorshift_seed(seed, Stream::Sampler),
                    xorshift_seed(seed, Stream::Quantizer),
                    xorshift_seed(seed ^ 0x5bd1_e995, Stream::Sampler),
                )
            })
            .transpose()?;
        Ok(Self {
            cfg,
            model,
            replay,
            shuffle_rng: stream(seed, Stream::Shuffle),
            task: 0,
            epoch: 0,
            cursor: 0,
            order: Vec::new(),
            accuracy: AccuracyMatrix::new(n_tasks),
            metrics: RunMetrics::default(),
        })
    }

    pub fn is_finished(&self) -> bool {
        self.accuracy.is_complete()
    }

    /// Index of the task currently being trained.
    pub fn current_task(&self) -> usize {
        self.task
    }

    fn check_stream(&self, ts: &TaskStream) -> Result<()> {
        if ts.len() != self.accuracy.n_tasks() {
            return Err(Error::dim("task stream length", self.accuracy.n_tasks(), ts.len()));
        }
        if ts.n_x != self.model.n_x() {
            return Err(Error::dim("task stream n_x", self.model.n_x(), ts.n_x));
        }
        Ok(())
    }

    /// Advances by one minibatch, or by one evaluation when the current task
    /// has finished its epochs. Returns `false` once the run is complete.
    pub fn advance(&mut self, ts: &TaskStream) -> Result<bool> {
        if self.is_finished() {
            return Ok(false);
        }
        self.check_stream(ts)?;
        let task = &ts.tasks[self.task];
        if task.train.is_empty() {
            return Err(Error::Empty("task training set"));
        }
        if self.epoch == self.cfg.epochs {
            self.finish_task(ts)?;
            return Ok(!self.is_finished());
        }
        if self.order.is_empty() {
            self.order = (0..task.train.len()).collect();
            shuffle(&mut self.order, &mut self.shuffle_rng);
            self.cursor = 0;
        }
        let end = (self.cursor + self.cfg.batch_size).min(self.order.len());
        let mut batch: Vec<Example> = self.order[self.cursor..end]
            .iter()
            .map(|&i| task.train[i].clone())
            .collect();
        let n_new = batch.len();
        let mut replayed = 0;
        if let (Some(unit), Some(rc)) = (self.replay.as_mut(), self.cfg.replay) {
            let n_replay = libm::round(rc.ratio * n_new as f64) as usize;
            if n_replay > 0 && unit.buffer.occupancy() > 0 {
                let extra = unit.sample(n_replay)?;
                replayed = extra.len();
                batch.extend(extra);
            }
            for ex in &batch[..n_new] {
                unit.observe(ex);
            }
        }
        let report = train_step(&mut self.model, &batch, &self.cfg.train)?;
        self.metrics.total_writes += report.writes;
        self.metrics.total_nonzeros += report.nonzeros;
        self.metrics.steps.push(StepRecord {
            task: self.task,
            epoch: self.epoch,
            step: self.cursor / self.cfg.batch_size,
            loss: report.loss,
            writes: report.writes,
            nonzeros: report.nonzeros,
            replayed,
        });
        self.cursor = end;
        if self.cursor == self.order.len() {
            self.order.clear();
            self.epoch += 1;
        }
        Ok(true)
    }

    fn finish_task(&mut self, ts: &TaskStream) -> Result<()> {
        let row = ts.tasks[..=self.task]
            .iter()
            .map(|t| evaluate(&mut self.model, &t.test))
            .collect::<Result<Vec<f64>>>()?;
        let mean_accuracy = row.iter().sum::<f64>() / row.len() as f64;
        self.metrics.tasks.push(TaskRecord {
            task: self.task,
            accuracies: row.clone(),
            mean_accuracy,
            writes: WriteSnapshot::of(&self.model),
            buffer_occupancy: self.replay.as_ref().map_or(0, |u| u.buffer.occupancy()),
        });
        self.accuracy.push_row(row)?;
        self.task += 1;
        self.epoch = 0;
        self.cursor = 0;
        Ok(())
    }

    /// Advances at most `n` times; returns whether work remains.
    pub fn advance_by(&mut self, ts: &TaskStream, n: usize) -> Result<bool> {
        for _ in 0..n {
            if !self.advance(ts)? {
                return Ok(false);
            }
        }
        Ok(!self.is_finished())
    }

    pub fn run_to_end(&mut self, ts: &TaskStream) -> Result<()> {
        while self.advance(ts)? {}
        Ok(())
    }
}

/// Trains through every task in order, evaluating all seen tasks after each.
pub fn run_continual(
    ts: &TaskStream,
    model: Model,
    cfg: ContinualConfig,
    seed: u64,
) -> Result<(AccuracyMatrix, RunMetrics, Model)> {
    if ts.is_empty() {
        return Err(Error::Empty("task stream"));
    }
    let mut run = ContinualRun::new(model, cfg, ts.len(), seed)?;
    run.run_to_end(ts)?;
    Ok((run.accuracy, run.metrics, run.model))
}
