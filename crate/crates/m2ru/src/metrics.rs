//! Metric files. Floats are rounded to 9 significant digits so that repeated
//! runs can be compared byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use m2ru_core::harness::{AccuracyMatrix, RunMetrics};
use m2ru_core::reliability::CdfPoint;
use serde_json::{json, Value};

use crate::error::{io_err, Result};

/// `x` rounded to 9 significant digits.
pub fn sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

/// Decimal text of `x` at 9 significant digits.
pub fn fmt9(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.8e}")
}

/// JSON number at 9 significant digits; non-finite values become strings.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(sig9(x))
    } else {
        json!(fmt9(x))
    }
}

pub fn steps_csv(m: &RunMetrics) -> String {
    let mut s = String::from("task,epoch,step,loss,writes,nonzeros,replayed\n");
    for r in &m.steps {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.task,
            r.epoch,
            r.step,
            fmt9(r.loss),
            r.writes,
            r.nonzeros,
            r.replayed
        )
        .unwrap();
    }
    s
}

pub fn accuracy_csv(r: &AccuracyMatrix) -> String {
    let mut s = String::from("after_task,task,accuracy\n");
    for (j, row) in r.rows().iter().enumerate() {
        for (i, a) in row.iter().enumerate() {
            writeln!(s, "{j},{i},{}", fmt9(*a)).unwrap();
        }
    }
    s
}

pub fn cdf_csv(cdf: &[CdfPoint]) -> String {
    let mut s = String::from("writes,fraction\n");
    for p in cdf {
        writeln!(s, "{},{}", p.writes, fmt9(p.fraction)).unwrap();
    }
    s
}

pub fn summary_json(r: &AccuracyMatrix, m: &RunMetrics, mean_accuracy: Option<f64>) -> Value {
    let rows: Vec<Value> = r
        .rows()
        .iter()
        .map(|row| Value::Array(row.iter().map(|a| num(*a)).collect()))
        .collect();
    let tasks: Vec<Value> = m
        .tasks
        .iter()
        .map(|t| {
            json!({
                "task": t.task,
                "accuracies": t.accuracies.iter().map(|a| num(*a)).collect::<Vec<_>>(),
                "mean_accuracy": num(t.mean_accuracy),
                "buffer_occupancy": t.buffer_occupancy,
                "writes": {
                    "total": t.writes.total,
                    "mean": num(t.writes.mean),
                    "p90": t.writes.p90,
                    "max": t.writes.max,
                },
            })
        })
        .collect();
    json!({
        "mean_accuracy": mean_accuracy.map(num),
        "accuracy_matrix": rows,
        "tasks": tasks,
        "steps": m.steps.len(),
        "total_writes": m.total_writes,
        "total_nonzeros": m.total_nonzeros,
    })
}

pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io_err(&path))
}
