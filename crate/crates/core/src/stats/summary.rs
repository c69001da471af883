use serde::Serialize;

use crate::error::{Error, Result};
use crate::task::{Choice, SessionTranscript, TrialType};

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased (n - 1) variance.
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Average ranks, 1-based.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument(
            "spearman needs two equal-length series of at least 2".into(),
        ));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean(&rx), mean(&ry));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedStatistic(
            "constant series has no rank correlation".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Gamble rates overall and per trial type. A type with no trials gets NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SessionSummary {
    pub overall: f64,
    pub mixed: f64,
    pub gain: f64,
    pub loss: f64,
}

impl SessionSummary {
    pub fn get(&self, measure: &str) -> Option<f64> {
        match measure {
            "gamble_rate" | "gamble_rate_overall" => Some(self.overall),
            "gamble_rate_mixed" => Some(self.mixed),
            "gamble_rate_gain" => Some(self.gain),
            "gamble_rate_loss" => Some(self.loss),
            _ => None,
        }
    }
}

pub fn summarize_session(transcript: &SessionTranscript) -> SessionSummary {
    let mut counts = [(0usize, 0usize); 3];
    for r in &transcript.rows {
        let k = match transcript.trial_of(r).trial_type {
            TrialType::Mixed => 0,
            TrialType::Gain => 1,
            TrialType::Loss => 2,
        };
        counts[k].1 += 1;
        if r.choice == Choice::Gamble {
            counts[k].0 += 1;
        }
    }
    let rate = |(g, n): (usize, usize)| g as f64 / n as f64;
    let total = counts
        .iter()
        .fold((0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1));
    SessionSummary {
        overall: rate(total),
        mixed: rate(counts[0]),
        gain: rate(counts[1]),
        loss: rate(counts[2]),
    }
}
