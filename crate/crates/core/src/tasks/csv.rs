//! Plain CSV task streams: feature columns followed by an integer label.
//!
//! Comma separated, UTF-8, `\n` line endings, at most one header line.
//! Floats are written with Rust's shortest round-trip formatting so an
//! exported stream reloads bit-exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BaseTask, Sample, Split, Task, TaskStream};
use crate::error::{Error, Result};

/// How to interpret a CSV file as a task stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    /// First line is a header and is skipped.
    #[serde(default)]
    pub header: bool,
    /// `task_labels[t]` lists the labels that belong to task `t`. Labels
    /// must cover `0..C` and each task must own a contiguous range.
    pub task_labels: Vec<Vec<usize>>,
    /// Separate file holding the test split. When absent, the last
    /// `test_fraction` of each class (in file order) becomes the test split.
    #[serde(default)]
    pub test_path: Option<PathBuf>,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Optional base pre-training file with its own label space.
    #[serde(default)]
    pub base_path: Option<PathBuf>,
}

fn default_test_fraction() -> f64 {
    0.2
}

fn read_rows(path: &Path, header: bool) -> Result<(usize, Vec<Sample>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut dim = None;
    let mut out = Vec::new();
    for (i, line) in text.split('\n').enumerate() {
        let lineno = i + 1;
        if (header && i == 0) || line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            msg,
        };
        let cells: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
        if cells.len() < 2 {
            return Err(parse_err("expected at least one feature and a label".into()));
        }
        let (feat, label) = cells.split_at(cells.len() - 1);
        let label = label[0]
            .trim()
            .parse::<usize>()
            .map_err(|_| parse_err(format!("label `{}` is not a non-negative integer", label[0])))?;
        let features = feat
            .iter()
            .enumerate()
            .map(|(c, s)| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(format!("column {}: `{s}` is not a finite number", c + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None => dim = Some(features.len()),
            Some(d) if d != features.len() => {
                return Err(parse_err(format!("expected {d} features, found {}", features.len())));
            }
            _ => {}
        }
        out.push(Sample { features, label });
    }
    let dim = dim.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: "no data rows".into(),
    })?;
    Ok((dim, out))
}

/// Loads a class-incremental stream from CSV according to `schema`.
pub fn load_csv_stream(path: &Path, schema: &CsvSchema) -> Result<TaskStream> {
    let mut task_of = BTreeMap::new();
    let mut ranges = Vec::with_capacity(schema.task_labels.len());
    let mut next = 0;
    for (t, labels) in schema.task_labels.iter().enumerate() {
        let mut sorted = labels.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.is_empty() || sorted[0] != next || sorted.len() != sorted[sorted.len() - 1] - next + 1 {
            return Err(Error::config(
                "csv.task_labels",
                format!("task {t} labels {labels:?} must be the contiguous range starting at {next}"),
            ));
        }
        for &l in &sorted {
            task_of.insert(l, t);
        }
        ranges.push(next..next + sorted.len());
        next += sorted.len();
    }
    if !(0.0..1.0).contains(&schema.test_fraction) {
        return Err(Error::config("csv.test_fraction", "must be in [0, 1)"));
    }

    let (dim, rows) = read_rows(path, schema.header)?;
    let line_of = |idx: usize| idx + 1 + usize::from(schema.header);
    let check = |samples: &[Sample], file: &Path| -> Result<()> {
        for (i, s) in samples.iter().enumerate() {
            if !task_of.contains_key(&s.label) {
                return Err(Error::Parse {
                    path: file.to_path_buf(),
                    line: line_of(i),
                    msg: format!("unknown label {}", s.label),
                });
            }
        }
        Ok(())
    };
    check(&rows, path)?;

    let mut train: Vec<Vec<Sample>> = vec![Vec::new(); ranges.len()];
    let mut test: Vec<Vec<Sample>> = vec![Vec::new(); ranges.len()];
    match &schema.test_path {
        Some(tp) => {
            let (tdim, trows) = read_rows(tp, schema.header)?;
            if tdim != dim {
                return Err(Error::Parse {
                    path: tp.clone(),
                    line: 1,
                    msg: format!("expected {dim} features, found {tdim}"),
                });
            }
            check(&trows, tp)?;
            for s in rows {
                train[task_of[&s.label]].push(s);
            }
            for s in trows {
                test[task_of[&s.label]].push(s);
            }
        }
        None => {
            let mut by_class: BTreeMap<usize, Vec<Sample>> = BTreeMap::new();
            for s in rows {
                by_class.entry(s.label).or_default().push(s);
            }
            for (label, mut samples) in by_class {
                let n_test = (samples.len() as f64 * schema.test_fraction).floor() as usize;
                let tail = samples.split_off(samples.len() - n_test);
                let t = task_of[&label];
                train[t].extend(samples);
                test[t].extend(tail);
            }
        }
    }

    let tasks = ranges
        .into_iter()
        .enumerate()
        .map(|(t, classes)| {
            Ok(Task {
                train: Split::from_samples(dim, &train[t])?,
                test: Split::from_samples(dim, &test[t])?,
                classes,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let base = match &schema.base_path {
        Some(bp) => {
            let (bdim, brows) = read_rows(bp, schema.header)?;
            if bdim != dim {
                return Err(Error::Parse {
                    path: bp.clone(),
                    line: 1,
                    msg: format!("expected {dim} features, found {bdim}"),
                });
            }
            let classes = brows.iter().map(|s| s.label + 1).max().unwrap_or(0);
            Some(BaseTask {
                train: Split::from_samples(dim, &brows)?,
                classes,
            })
        }
        None => None,
    };

    let stream = TaskStream {
        dim,
        tasks,
        base,
        descriptor: format!("csv({})", path.display()),
    };
    stream.validate()?;
    Ok(stream)
}

fn write_split(path: &Path, dim: usize, header: bool, splits: &[&Split]) -> Result<()> {
    let mut s = String::new();
    if header {
        for j in 0..dim {
            let _ = write!(s, "x{j},");
        }
        s.push_str("label\n");
    }
    for split in splits {
        for (i, y) in split.y.iter().enumerate() {
            for v in split.x.row(i) {
                let _ = write!(s, "{v},");
            }
            let _ = writeln!(s, "{y}");
        }
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Writes `<prefix>_train.csv`, `<prefix>_test.csv` (and `<prefix>_base.csv`
/// when the stream has a base task) into `dir`; returns the train path and a
/// schema that reloads the same stream.
pub fn export_csv(stream: &TaskStream, dir: &Path, prefix: &str) -> Result<(PathBuf, CsvSchema)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let train_path = dir.join(format!("{prefix}_train.csv"));
    let test_path = dir.join(format!("{prefix}_test.csv"));
    let trains: Vec<&Split> = stream.tasks.iter().map(|t| &t.train).collect();
    let tests: Vec<&Split> = stream.tasks.iter().map(|t| &t.test).collect();
    write_split(&train_path, stream.dim, true, &trains)?;
    write_split(&test_path, stream.dim, true, &tests)?;
    let base_path = match &stream.base {
        Some(b) => {
            let p = dir.join(format!("{prefix}_base.csv"));
            write_split(&p, stream.dim, true, &[&b.train])?;
            Some(p)
        }
        None => None,
    };
    let schema = CsvSchema {
        header: true,
        task_labels: stream.tasks.iter().map(|t| t.classes.clone().collect()).collect(),
        test_path: Some(test_path),
        test_fraction: default_test_fraction(),
        base_path,
    };
    Ok((train_path, schema))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(labels: Vec<Vec<usize>>) -> CsvSchema {
        CsvSchema {
            header: false,
            task_labels: labels,
            test_path: None,
            test_fraction: 0.0,
            base_path: None,
        }
    }

    #[test]
    fn minimal_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        fs::write(&p, "0.5,1.0,0\n-2,3e-1,1\n").unwrap();
        let s = load_csv_stream(&p, &schema(vec![vec![0, 1]])).unwrap();
        assert_eq!(s.num_tasks(), 1);
        assert_eq!(s.tasks[0].train.len(), 2);
        assert_eq!(s.tasks[0].train.x.row(1), &[-2.0, 0.3]);
    }

    #[test]
    fn non_numeric_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        fs::write(&p, "x,y,label\n0.5,1.0,0\n0.1,abc,1\n").unwrap();
        let mut sc = schema(vec![vec![0, 1]]);
        sc.header = true;
        let err = load_csv_stream(&p, &sc).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_label() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        fs::write(&p, "0.5,0\n0.1,7\n").unwrap();
        let err = load_csv_stream(&p, &schema(vec![vec![0]])).unwrap_err();
        assert!(err.to_string().contains("unknown label 7"), "{err}");
        assert!(err.to_string().contains(":2:"), "{err}");
    }

    #[test]
    fn non_contiguous_task_labels_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        fs::write(&p, "0.5,0\n").unwrap();
        assert!(load_csv_stream(&p, &schema(vec![vec![0, 2]])).is_err());
    }

    #[test]
    fn fraction_split_takes_tail_per_class() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let mut body = String::new();
        for i in 0..10 {
            body.push_str(&format!("{i},{}\n", i % 2));
        }
        fs::write(&p, body).unwrap();
        let mut sc = schema(vec![vec![0], vec![1]]);
        sc.test_fraction = 0.2;
        let s = load_csv_stream(&p, &sc).unwrap();
        assert_eq!(s.tasks[0].train.len(), 4);
        assert_eq!(s.tasks[0].test.x.data(), &[8.0]);
        assert_eq!(s.tasks[1].test.x.data(), &[9.0]);
    }
}
