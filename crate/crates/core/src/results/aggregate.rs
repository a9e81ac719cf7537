use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean and standard error of one metric over replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub metric: String,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over `√n`.
    pub stderr: f64,
}

impl AggregateSummary {
    pub fn new(metric: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Config(format!(
                "an aggregate needs at least 2 values, got {}",
                values.len()
            )));
        }
        let (mean, stderr) = mean_stderr(&values);
        Ok(AggregateSummary {
            metric: metric.into(),
            values,
            mean,
            stderr: stderr.expect("n >= 2"),
        })
    }
}

/// Mean and (for `n ≥ 2`) standard error. Values are summed in sorted order
/// so the result does not depend on input order.
pub fn mean_stderr(values: &[f64]) -> (f64, Option<f64>) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, None);
    }
    let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    dev.sort_by(f64::total_cmp);
    let var = dev.iter().sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}
