//! Domain-incremental task streams sharing one output head.

use alloc::vec::Vec;

use super::data::{FeatureSet, ImageSet};
use crate::miru::Example;
use crate::rng::{shuffle, stream, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TaskDescriptor {
    /// `inputs[k] = image[permutation[k]]`.
    Permutation(Vec<usize>),
    Classes(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub train: Vec<Example>,
    pub test: Vec<Example>,
    pub descriptor: TaskDescriptor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskStream {
    pub tasks: Vec<Task>,
    pub n_x: usize,
    pub n_y: usize,
    pub n_t: usize,
}

impl TaskStream {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

fn permuted_examples(set: &ImageSet, perm: &[usize]) -> Result<Vec<Example>> {
    (0..set.len())
        .map(|i| {
            let img = set.image(i);
            Example::new(perm.iter().map(|&p| img[p]).collect(), set.cols, set.labels[i])
        })
        .collect()
}

/// Task 1 sees the images unchanged; every later task applies its own fixed
/// random pixel permutation to both splits. Images are presented one row per
/// step.
pub fn build_permuted_mnist(train: &ImageSet, test: &ImageSet, n_tasks: usize, seed: u64) -> Result<TaskStream> {
    if n_tasks < 1 {
        return Err(Error::Config("permuted stream needs at least one task".into()));
    }
    if (train.rows, train.cols) != (test.rows, test.cols) {
        return Err(Error::dim(
            "test image size",
            train.rows * train.cols,
            test.rows * test.cols,
        ));
    }
    let n_px = train.rows * train.cols;
    let n_y = train
        .labels
        .iter()
        .chain(&test.labels)
        .max()
        .map_or(1, |m| m + 1)
        .max(10);
    let mut rng = stream(seed, Stream::Permutation);
    let mut tasks = Vec::with_capacity(n_tasks);
    for t in 0..n_tasks {
        let mut perm: Vec<usize> = (0..n_px).collect();
        if t > 0 {
            shuffle(&mut perm, &mut rng);
        }
        tasks.push(Task {
            train: permuted_examples(train, &perm)?,
            test: permuted_examples(test, &perm)?,
            descriptor: TaskDescriptor::Permutation(perm),
        });
    }
    Ok(TaskStream {
        tasks,
        n_x: train.cols,
        n_y,
        n_t: train.rows,
    })
}

/// Partitions the classes, in label order, into disjoint tasks of
/// `classes_per_task` each. Features are min-max scaled into `[0, 1]` with
/// the training set's range and presented as `dim / n_x` steps of `n_x`.
pub fn build_split_features(
    train: &FeatureSet,
    test: &FeatureSet,
    classes_per_task: usize,
    n_x: usize,
) -> Result<TaskStream> {
    if train.is_empty() {
        return Err(Error::Empty("training features"));
    }
    if train.dim != test.dim {
        return Err(Error::dim("test feature dim", train.dim, test.dim));
    }
    if n_x == 0 || !train.dim.is_multiple_of(n_x) {
        return Err(Error::Config(alloc::format!(
            "feature dim {} does not split into steps of {n_x}",
            train.dim
        )));
    }
    let mut classes: Vec<usize> = train.labels.clone();
    classes.sort_unstable();
    classes.dedup();
    if classes_per_task == 0 || !classes.len().is_multiple_of(classes_per_task) {
        return Err(Error::Config(alloc::format!(
            "{} classes do not divide into tasks of {classes_per_task}",
            classes.len()
        )));
    }
    let n_y = classes.iter().chain(&test.labels).max().map_or(1, |m| m + 1);
    let lo = train.features.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = train.features.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let to_examples = |set: &FeatureSet, group: &[usize]| -> Result<Vec<Example>> {
        (0..set.len())
            .filter(|&i| group.contains(&set.labels[i]))
            .map(|i| {
                let x = set.row(i).iter().map(|v| ((v - lo) / span).clamp(0.0, 1.0)).collect();
                Example::new(x, n_x, set.labels[i])
            })
            .collect()
    };
    let tasks = classes
        .chunks(classes_per_task)
        .map(|group| {
            Ok(Task {
                train: to_examples(train, group)?,
                test: to_examples(test, group)?,
                descriptor: TaskDescriptor::Classes(group.to_vec()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TaskStream {
        tasks,
        n_x,
        n_y,
        n_t: train.dim / n_x,
    })
}
