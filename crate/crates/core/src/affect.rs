//! Momentary-happiness models mM1 (CR/EV/RPE) and mM2 (CR/GR).
//!
//! Happiness after trial `t` is a baseline plus weighted, exponentially
//! discounted sums of per-trial regressors over every trial up to and
//! including `t`. Predictions are affine in the weights for fixed `gamma`,
//! which is what the profiled fit in [`crate::estimation`] relies on.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::task::{Choice, SessionTranscript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AffectModel {
    #[serde(rename = "mM1")]
    Mm1,
    #[serde(rename = "mM2")]
    Mm2,
}

impl AffectModel {
    pub const ALL: [AffectModel; 2] = [AffectModel::Mm1, AffectModel::Mm2];

    /// Number of regressors excluding the baseline.
    pub fn n_regressors(self) -> usize {
        match self {
            AffectModel::Mm1 => 3,
            AffectModel::Mm2 => 2,
        }
    }

    /// Baseline, regressor weights and the forgetting factor.
    pub fn n_params(self) -> usize {
        self.n_regressors() + 2
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AffectModel::Mm1 => "mM1",
            AffectModel::Mm2 => "mM2",
        }
    }

    /// Regressor values of one row in this model's column order.
    pub fn features(self, row: &AffectRegressorRow) -> [f64; 3] {
        match self {
            AffectModel::Mm1 => [row.cr, row.ev, row.rpe],
            AffectModel::Mm2 => [row.cr, row.gr, 0.0],
        }
    }
}

impl fmt::Display for AffectModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AffectModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AffectModel::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown affect model {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffectParams {
    pub model_id: AffectModel,
    pub beta0: f64,
    #[serde(default)]
    pub beta_cr: f64,
    #[serde(default)]
    pub beta_ev: f64,
    #[serde(default)]
    pub beta_rpe: f64,
    #[serde(default)]
    pub beta_gr: f64,
    #[serde(default)]
    pub gamma: f64,
}

impl AffectParams {
    pub fn mm1(beta0: f64, beta_cr: f64, beta_ev: f64, beta_rpe: f64, gamma: f64) -> Self {
        AffectParams {
            model_id: AffectModel::Mm1,
            beta0,
            beta_cr,
            beta_ev,
            beta_rpe,
            beta_gr: 0.0,
            gamma,
        }
    }

    pub fn mm2(beta0: f64, beta_cr: f64, beta_gr: f64, gamma: f64) -> Self {
        AffectParams {
            model_id: AffectModel::Mm2,
            beta0,
            beta_cr,
            beta_ev: 0.0,
            beta_rpe: 0.0,
            beta_gr,
            gamma,
        }
    }

    /// Baseline-only model.
    pub fn constant(beta0: f64) -> Self {
        Self::mm1(beta0, 0.0, 0.0, 0.0, 0.0)
    }

    /// `[beta0, w1, w2, w3]` in the model's column order.
    pub fn weights(&self) -> [f64; 4] {
        match self.model_id {
            AffectModel::Mm1 => [self.beta0, self.beta_cr, self.beta_ev, self.beta_rpe],
            AffectModel::Mm2 => [self.beta0, self.beta_cr, self.beta_gr, 0.0],
        }
    }

    pub fn from_weights(model: AffectModel, weights: &[f64], gamma: f64) -> Self {
        let w = |i: usize| weights.get(i).copied().unwrap_or(0.0);
        match model {
            AffectModel::Mm1 => Self::mm1(w(0), w(1), w(2), w(3), gamma),
            AffectModel::Mm2 => Self::mm2(w(0), w(1), w(2), gamma),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AffectRegressorRow {
    pub trial: usize,
    pub cr: f64,
    pub ev: f64,
    pub rpe: f64,
    pub gr: f64,
}

pub fn regressor_row(
    trial: usize,
    choice: Choice,
    outcome: f64,
    gamble_ev: f64,
) -> AffectRegressorRow {
    match choice {
        Choice::Certain => AffectRegressorRow {
            trial,
            cr: outcome,
            ..Default::default()
        },
        Choice::Gamble => AffectRegressorRow {
            trial,
            cr: 0.0,
            ev: gamble_ev,
            rpe: outcome - gamble_ev,
            gr: outcome,
        },
    }
}

pub fn regressors_from_transcript(transcript: &SessionTranscript) -> Vec<AffectRegressorRow> {
    transcript
        .rows
        .iter()
        .map(|r| {
            regressor_row(
                r.trial,
                r.choice,
                r.outcome,
                transcript.trial_of(r).gamble_ev(),
            )
        })
        .collect()
}

/// `sum_{j=1..t} gamma^(t-j) series[j]` with 1-based `t` and `gamma^0 = 1`.
pub fn decayed_sum(series: &[f64], gamma: f64, t: usize) -> Result<f64> {
    if t == 0 || t > series.len() {
        return Err(Error::InvalidArgument(format!(
            "trial index {t} outside 1..={}",
            series.len()
        )));
    }
    Ok(series[..t]
        .iter()
        .enumerate()
        .map(|(j, &x)| gamma.powi((t - 1 - j) as i32) * x)
        .sum())
}

/// All prefix decayed sums via `S(t) = gamma S(t-1) + x_t`.
pub fn decayed_sums(series: &[f64], gamma: f64) -> Vec<f64> {
    let mut acc = 0.0;
    series
        .iter()
        .map(|&x| {
            acc = gamma * acc + x;
            acc
        })
        .collect()
}

/// Design rows `[1, S_1(t), S_2(t), S_3(t)]` at each 1-based probe trial.
pub fn design_rows(
    model: AffectModel,
    rows: &[AffectRegressorRow],
    probes: &[usize],
    gamma: f64,
) -> Vec<[f64; 4]> {
    let mut out = Vec::with_capacity(probes.len());
    let mut sums = [0.0; 3];
    let mut next = probes.iter().peekable();
    for (i, row) in rows.iter().enumerate() {
        let f = model.features(row);
        for k in 0..3 {
            sums[k] = gamma * sums[k] + f[k];
        }
        while next.peek().is_some_and(|&&p| p == i + 1) {
            out.push([1.0, sums[0], sums[1], sums[2]]);
            next.next();
        }
    }
    out
}

fn dot(w: &[f64; 4], x: &[f64; 4]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Predicted happiness at each rated probe of the transcript.
pub fn predict_happiness(
    params: &AffectParams,
    transcript: &SessionTranscript,
) -> Vec<(usize, f64)> {
    let rows = regressors_from_transcript(transcript);
    let probes: Vec<usize> = transcript.ratings.iter().map(|r| r.trial).collect();
    predict_at(params, &rows, &probes)
}

pub fn predict_at(
    params: &AffectParams,
    rows: &[AffectRegressorRow],
    probes: &[usize],
) -> Vec<(usize, f64)> {
    let w = params.weights();
    design_rows(params.model_id, rows, probes, params.gamma)
        .iter()
        .zip(probes)
        .map(|(x, &t)| (t, dot(&w, x)))
        .collect()
}

/// Sum of squared residuals between observed and predicted ratings.
pub fn affect_sse(params: &AffectParams, transcript: &SessionTranscript) -> Result<f64> {
    if transcript.ratings.is_empty() {
        return Err(Error::InvalidArgument("transcript has no ratings".into()));
    }
    Ok(transcript
        .ratings
        .iter()
        .zip(predict_happiness(params, transcript))
        .map(|(obs, (_, pred))| (f64::from(obs.rating) - pred).powi(2))
        .sum())
}

/// Writes the regressor matrix as CSV (`trial,cr,ev,rpe,gr`).
pub fn write_regressors_csv<W: Write>(rows: &[AffectRegressorRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<regressors>", e))?;
    Ok(())
}
