//! Accuracy matrix and the Acc / AAA summaries derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower-triangular grid: `rows[i][j]` (j <= i) is the accuracy on task `j`'s
/// test split after training through task `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccuracyMatrix {
    rows: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn new() -> Self {
        AccuracyMatrix { rows: Vec::new() }
    }

    /// Builds from explicit rows; row `i` must have `i + 1` entries in `[0, 1]`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut m = AccuracyMatrix::new();
        for r in rows {
            m.push_row(r)?;
        }
        Ok(m)
    }

    /// Appends the evaluation row taken after the next task.
    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        let i = self.rows.len();
        if row.len() != i + 1 {
            return Err(Error::InvalidState(format!(
                "accuracy row {i} needs {} entries, got {}",
                i + 1,
                row.len()
            )));
        }
        if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidState(format!("accuracy {v} outside [0, 1]")));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn num_tasks(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.rows.get(i).and_then(|r| r.get(j)).copied()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    fn require(&self, n: usize) -> Result<()> {
        if self.rows.is_empty() || (n > 0 && self.rows.len() < n) {
            return Err(Error::InvalidState(format!(
                "accuracy matrix incomplete: {} of {} rows",
                self.rows.len(),
                n.max(1)
            )));
        }
        Ok(())
    }

    /// Mean accuracy over seen tasks after each task (one value per row).
    pub fn running_acc(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
            .collect()
    }

    /// AAA evaluated at each checkpoint.
    pub fn running_aaa(&self) -> Vec<f64> {
        let acc = self.running_acc();
        let mut out = Vec::with_capacity(acc.len());
        let mut sum = 0.0;
        for (i, a) in acc.iter().enumerate() {
            sum += a;
            out.push(sum / (i + 1) as f64);
        }
        out
    }
}

impl Default for AccuracyMatrix {
    fn default() -> Self {
        Self::new()
    }
}

/// Final average accuracy `(1/N) sum_j R[N][j]`.
pub fn compute_acc(r: &AccuracyMatrix) -> Result<f64> {
    r.require(0)?;
    Ok(*r.running_acc().last().unwrap())
}

/// Average anytime accuracy `(1/N) sum_i (1/i) sum_{j<=i} R[i][j]`.
pub fn compute_aaa(r: &AccuracyMatrix) -> Result<f64> {
    r.require(0)?;
    Ok(*r.running_aaa().last().unwrap())
}

/// Same as [`compute_acc`] but fails unless exactly `n` tasks were evaluated.
pub fn compute_acc_n(r: &AccuracyMatrix, n: usize) -> Result<f64> {
    r.require(n)?;
    compute_acc(r)
}

/// Average forgetting: for every task but the last, the drop from its best
/// earlier accuracy to its final accuracy. Zero for a single task.
pub fn compute_forgetting(r: &AccuracyMatrix) -> Result<f64> {
    r.require(0)?;
    let n = r.num_tasks();
    if n == 1 {
        return Ok(0.0);
    }
    let last = &r.rows[n - 1];
    let total: f64 = (0..n - 1)
        .map(|j| {
            let best = (j..n - 1).map(|i| r.rows[i][j]).fold(f64::NEG_INFINITY, f64::max);
            best - last[j]
        })
        .sum();
    Ok(total / (n - 1) as f64)
}

/// Sample mean and standard deviation (`n - 1` denominator; 0 when n < 2).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.iter().all(|&v| v == values[0]) {
        return (values[0], 0.0);
    }
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
