use std::path::Path;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

use super::run::LearningCurve;

pub const DEFAULT_CONFIDENCE: f64 = 0.90;
/// Trailing moving-average window applied before charting.
pub const SMOOTHING_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub episode: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SummaryRow {
    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

/// Two-sided standard normal quantile for `confidence`.
pub fn z_value(confidence: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&confidence) {
        return Err(Error::Config(format!("confidence {confidence} outside [0, 1)")));
    }
    if confidence == 0.0 {
        return Ok(0.0);
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(0.5 + confidence / 2.0))
}

/// Trailing moving average; early points average what is available.
pub fn smooth(series: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(series.len());
    let mut acc = 0.0;
    for (t, &v) in series.iter().enumerate() {
        acc += v;
        if t >= window {
            acc -= series[t - window];
        }
        out.push(acc / (t + 1).min(window) as f64);
    }
    out
}

/// Cross-seed mean with a symmetric interval `mean ± z · s / √n` (sample
/// standard deviation `s`). A window of 1 disables smoothing.
pub fn summarize(curve: &LearningCurve, confidence: f64, window: usize) -> Result<Vec<SummaryRow>> {
    let n = curve.rewards.len();
    if n < 2 {
        return Err(Error::TooFewSeeds(n));
    }
    let len = curve.n_episodes();
    if curve.rewards.iter().any(|s| s.len() != len) {
        return Err(Error::Config("seed curves differ in length".into()));
    }
    let z = z_value(confidence)?;
    let smoothed: Vec<Vec<f64>> = curve.rewards.iter().map(|s| smooth(s, window)).collect();
    Ok((0..len)
        .map(|t| {
            let mean = smoothed.iter().map(|s| s[t]).sum::<f64>() / n as f64;
            let var = smoothed.iter().map(|s| (s[t] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let half = z * var.sqrt() / (n as f64).sqrt();
            SummaryRow {
                episode: t,
                mean,
                ci_low: mean - half,
                ci_high: mean + half,
            }
        })
        .collect())
}

/// Mean and interval half-width of per-seed scalars (e.g. final-decile means).
pub fn mean_and_half_width(values: &[f64], confidence: f64) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::TooFewSeeds(n));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, z_value(confidence)? * var.sqrt() / (n as f64).sqrt()))
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["episode", "mean", "ci_low", "ci_high"])?;
    for r in rows {
        w.write_record([
            r.episode.to_string(),
            r.mean.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(rewards: Vec<Vec<f64>>) -> LearningCurve {
        LearningCurve {
            seeds: (0..rewards.len() as u64).collect(),
            rewards,
        }
    }

    #[test]
    fn identical_seeds_give_zero_width() {
        let rows = summarize(&curve(vec![vec![1.0, 2.0, 3.0]; 4]), 0.9, 1).unwrap();
        for r in rows {
            assert_eq!(r.ci_low, r.ci_high);
        }
    }

    #[test]
    fn two_seed_hand_arithmetic() {
        let rows = summarize(&curve(vec![vec![0.0], vec![2.0]]), 0.9, 1).unwrap();
        assert_eq!(rows[0].mean, 1.0);
        assert!((rows[0].half_width() - 1.6448536269514722).abs() < 1e-9);
    }

    #[test]
    fn zero_confidence_collapses_to_the_mean() {
        let rows = summarize(&curve(vec![vec![0.0, 5.0], vec![2.0, -1.0]]), 0.0, 1).unwrap();
        for r in rows {
            assert_eq!((r.ci_low, r.ci_high), (r.mean, r.mean));
        }
    }

    #[test]
    fn single_seed_is_flagged() {
        assert!(matches!(
            summarize(&curve(vec![vec![1.0]]), 0.9, 1),
            Err(Error::TooFewSeeds(1))
        ));
        assert!(summarize(&curve(vec![vec![1.0], vec![1.0]]), 1.0, 1).is_err());
    }

    #[test]
    fn trailing_average() {
        assert_eq!(smooth(&[1.0, 3.0, 5.0, 7.0], 2), vec![1.0, 2.0, 4.0, 6.0]);
        assert_eq!(smooth(&[1.0, 3.0], 1), vec![1.0, 3.0]);
        let long: Vec<f64> = (0..300).map(|i| (i % 7) as f64).collect();
        let s = smooth(&long, SMOOTHING_WINDOW);
        let direct: f64 = long[200..300].iter().sum::<f64>() / 100.0;
        assert!((s[299] - direct).abs() < 1e-12);
    }
}
