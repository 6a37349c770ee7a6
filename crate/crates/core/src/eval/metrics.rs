use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Error statistics on the utilization-ratio scale.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub bias: f64,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
}

pub fn compute_metrics(pred: &[f64], actual: &[f64]) -> Result<Metrics> {
    if pred.len() != actual.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} actual values",
            pred.len(),
            actual.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InsufficientData("no prediction pairs".into()));
    }
    let n = pred.len() as f64;
    let (mut sum, mut abs, mut sq) = (0.0, 0.0, 0.0);
    for (p, a) in pred.iter().zip(actual) {
        let e = p - a;
        sum += e;
        abs += e.abs();
        sq += e * e;
    }
    let mse = sq / n;
    Ok(Metrics {
        bias: sum / n,
        mae: abs / n,
        mse,
        rmse: mse.sqrt(),
    })
}

/// Arithmetic mean of each field.
pub fn average(items: &[Metrics]) -> Metrics {
    let n = items.len().max(1) as f64;
    let mut m = Metrics::default();
    for x in items {
        m.bias += x.bias;
        m.mae += x.mae;
        m.mse += x.mse;
        m.rmse += x.rmse;
    }
    Metrics {
        bias: m.bias / n,
        mae: m.mae / n,
        mse: m.mse / n,
        rmse: m.rmse / n,
    }
}

/// Linear-interpolated quantile of unsorted values, `q` in [0, 1].
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Population variance.
pub fn variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_constant_error() {
        let a = [0.1, 0.5, 0.9];
        assert_eq!(compute_metrics(&a, &a).unwrap(), Metrics::default());
        let p: Vec<f64> = a.iter().map(|v| v + 0.1).collect();
        let m = compute_metrics(&p, &a).unwrap();
        for v in [m.bias, m.mae, m.rmse] {
            assert!((v - 0.1).abs() < 1e-12);
        }
        assert!((m.mse - 0.01).abs() < 1e-12);
    }

    #[test]
    fn errors_on_bad_lengths() {
        assert!(compute_metrics(&[], &[]).is_err());
        assert!(compute_metrics(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn quantiles() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert!((variance(&v) - 2.0).abs() < 1e-12);
    }
}
