//! Delimited feature files: one example per row, numeric features, integer
//! label in the last column, comma separated. Blank lines and `#` comments
//! are skipped.

use std::fs;
use std::path::Path;

use m2ru_core::harness::FeatureSet;

use crate::error::{io_err, Error, Result};

pub fn parse_features(text: &str, path: &Path) -> Result<FeatureSet> {
    let fail = |line: u64, detail: String| Error::Features {
        path: path.to_path_buf(),
        line,
        detail,
    };
    let mut dim: Option<usize> = None;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let record: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if record.len() < 2 {
            return Err(fail(line, "need at least one feature and a label".into()));
        }
        let width = record.len() - 1;
        match dim {
            None => dim = Some(width),
            Some(d) if d != width => {
                return Err(fail(line, format!("{width} features, earlier rows have {d}")));
            }
            _ => {}
        }
        for (col, field) in record.iter().take(width).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| fail(line, format!("column {}: {field:?} is not a number", col + 1)))?;
            if !v.is_finite() {
                return Err(fail(line, format!("column {}: {field:?} is not finite", col + 1)));
            }
            features.push(v);
        }
        let label = record[width];
        labels.push(
            label
                .parse::<usize>()
                .map_err(|_| fail(line, format!("label {label:?} is not a nonnegative integer")))?,
        );
    }
    match dim {
        Some(d) => Ok(FeatureSet::new(d, features, labels)?),
        None => Err(fail(0, "no rows".into())),
    }
}

pub fn load_features(path: &Path) -> Result<FeatureSet> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_features(&text, path)
}

/// Writes values in shortest round-trip form so loading gives the same bits.
pub fn save_features(set: &FeatureSet, path: &Path) -> Result<()> {
    let mut out = String::new();
    for i in 0..set.len() {
        for v in set.row(i) {
            out.push_str(&format!("{v:?},"));
        }
        out.push_str(&format!("{}\n", set.labels[i]));
    }
    fs::write(path, out).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("test.csv")
    }

    #[test]
    fn single_row() {
        let f = parse_features("0.1,0.2,3\n", p()).unwrap();
        assert_eq!((f.dim, f.len()), (2, 1));
        assert_eq!(f.features, vec![0.1, 0.2]);
        assert_eq!(f.labels, vec![3]);
    }

    #[test]
    fn ragged_row_reports_line() {
        let err = parse_features("1,2,0\n# note\n1,2,3,1\n", p()).unwrap_err();
        match err {
            Error::Features { line, .. } => assert_eq!(line, 3),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn bad_values_report_line() {
        for (text, line) in [("1,2,0\n1,x,0\n", 2), ("1,2,-1\n", 1), ("nan,1\n", 1), ("5\n", 1)] {
            match parse_features(text, p()).unwrap_err() {
                Error::Features { line: l, .. } => assert_eq!(l, line, "{text}"),
                other => panic!("{other}"),
            }
        }
        assert!(parse_features("", p()).is_err());
    }
}
