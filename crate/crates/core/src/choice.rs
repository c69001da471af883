//! Choice models cM1-cM4: prospect-theory utilities with an optional
//! Pavlovian approach/avoidance floor-ceiling (cM3) or an additive bias
//! (cM4) on a logistic choice rule.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::task::{Choice, SessionTranscript, TrialSpec, TrialType};

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChoiceModel {
    /// Expected value: only the inverse temperature is free.
    #[serde(rename = "cM1")]
    Cm1,
    /// Prospect theory.
    #[serde(rename = "cM2")]
    Cm2,
    /// Approach-avoidance prospect theory.
    #[serde(rename = "cM3")]
    Cm3,
    /// Prospect theory with an additive gamble bias.
    #[serde(rename = "cM4")]
    Cm4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChoiceParam {
    Alpha,
    Lambda,
    Mu,
    BetaGain,
    BetaLoss,
    BetaBias,
}

impl ChoiceParam {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            ChoiceParam::Alpha => (0.3, 1.3),
            ChoiceParam::Lambda => (0.5, 5.0),
            ChoiceParam::Mu => (0.0, 10.0),
            ChoiceParam::BetaGain | ChoiceParam::BetaLoss => (-1.0, 1.0),
            ChoiceParam::BetaBias => (-20.0, 20.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChoiceParam::Alpha => "alpha",
            ChoiceParam::Lambda => "lambda",
            ChoiceParam::Mu => "mu",
            ChoiceParam::BetaGain => "beta_gain",
            ChoiceParam::BetaLoss => "beta_loss",
            ChoiceParam::BetaBias => "beta_bias",
        }
    }
}

impl ChoiceModel {
    pub const ALL: [ChoiceModel; 4] = [
        ChoiceModel::Cm1,
        ChoiceModel::Cm2,
        ChoiceModel::Cm3,
        ChoiceModel::Cm4,
    ];

    pub fn free_params(self) -> &'static [ChoiceParam] {
        use ChoiceParam::*;
        match self {
            ChoiceModel::Cm1 => &[Mu],
            ChoiceModel::Cm2 => &[Alpha, Lambda, Mu],
            ChoiceModel::Cm3 => &[Alpha, Lambda, Mu, BetaGain, BetaLoss],
            ChoiceModel::Cm4 => &[Alpha, Lambda, Mu, BetaBias],
        }
    }

    pub fn n_params(self) -> usize {
        self.free_params().len()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChoiceModel::Cm1 => "cM1",
            ChoiceModel::Cm2 => "cM2",
            ChoiceModel::Cm3 => "cM3",
            ChoiceModel::Cm4 => "cM4",
        }
    }
}

impl fmt::Display for ChoiceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChoiceModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ChoiceModel::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown choice model {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChoiceParams {
    pub model_id: ChoiceModel,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    pub mu: f64,
    #[serde(default)]
    pub beta_gain: f64,
    #[serde(default)]
    pub beta_loss: f64,
    #[serde(default)]
    pub beta_bias: f64,
}

fn one() -> f64 {
    1.0
}

impl ChoiceParams {
    pub fn cm1(mu: f64) -> Self {
        ChoiceParams {
            model_id: ChoiceModel::Cm1,
            alpha: 1.0,
            lambda: 1.0,
            mu,
            beta_gain: 0.0,
            beta_loss: 0.0,
            beta_bias: 0.0,
        }
    }

    pub fn cm2(alpha: f64, lambda: f64, mu: f64) -> Self {
        ChoiceParams {
            model_id: ChoiceModel::Cm2,
            alpha,
            lambda,
            ..Self::cm1(mu)
        }
    }

    pub fn cm3(alpha: f64, lambda: f64, mu: f64, beta_gain: f64, beta_loss: f64) -> Self {
        ChoiceParams {
            model_id: ChoiceModel::Cm3,
            beta_gain,
            beta_loss,
            ..Self::cm2(alpha, lambda, mu)
        }
    }

    pub fn cm4(alpha: f64, lambda: f64, mu: f64, beta_bias: f64) -> Self {
        ChoiceParams {
            model_id: ChoiceModel::Cm4,
            beta_bias,
            ..Self::cm2(alpha, lambda, mu)
        }
    }

    pub fn get(&self, p: ChoiceParam) -> f64 {
        match p {
            ChoiceParam::Alpha => self.alpha,
            ChoiceParam::Lambda => self.lambda,
            ChoiceParam::Mu => self.mu,
            ChoiceParam::BetaGain => self.beta_gain,
            ChoiceParam::BetaLoss => self.beta_loss,
            ChoiceParam::BetaBias => self.beta_bias,
        }
    }

    fn set(&mut self, p: ChoiceParam, v: f64) {
        match p {
            ChoiceParam::Alpha => self.alpha = v,
            ChoiceParam::Lambda => self.lambda = v,
            ChoiceParam::Mu => self.mu = v,
            ChoiceParam::BetaGain => self.beta_gain = v,
            ChoiceParam::BetaLoss => self.beta_loss = v,
            ChoiceParam::BetaBias => self.beta_bias = v,
        }
    }

    /// Builds parameters from the model's free-parameter vector; fixed
    /// parameters take their nested values.
    pub fn from_free(model: ChoiceModel, values: &[f64]) -> Self {
        let mut p = ChoiceParams {
            model_id: model,
            ..ChoiceParams::cm1(0.0)
        };
        for (&name, &v) in model.free_params().iter().zip(values) {
            p.set(name, v);
        }
        p
    }

    pub fn free_values(&self) -> Vec<f64> {
        self.model_id
            .free_params()
            .iter()
            .map(|&p| self.get(p))
            .collect()
    }

    pub fn within_bounds(&self) -> bool {
        self.model_id.free_params().iter().all(|&p| {
            let (lo, hi) = p.bounds();
            (lo..=hi).contains(&self.get(p))
        })
    }

    /// Bias applied on this trial's type (zero on mixed trials).
    pub fn trial_bias(&self, trial: &TrialSpec) -> f64 {
        match trial.trial_type {
            TrialType::Gain => self.beta_gain,
            TrialType::Loss => self.beta_loss,
            TrialType::Mixed => 0.0,
        }
    }
}

/// `x^alpha` for `x >= 0` with `0^alpha = 0`.
pub(crate) fn power(x: f64, alpha: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.powf(alpha)
    }
}

pub(crate) fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn gamble_utility(trial: &TrialSpec, params: &ChoiceParams) -> f64 {
    0.5 * power(trial.gamble_gain, params.alpha)
        - 0.5 * params.lambda * power(-trial.gamble_loss, params.alpha)
}

pub fn certain_utility(trial: &TrialSpec, params: &ChoiceParams) -> f64 {
    let v = trial.certain_value;
    if v >= 0.0 {
        power(v, params.alpha)
    } else {
        -params.lambda * power(-v, params.alpha)
    }
}

/// Applies the model's choice rule to a utility difference.
pub fn choice_rule(
    model: ChoiceModel,
    delta_u: f64,
    mu: f64,
    beta_val: f64,
    beta_bias: f64,
) -> f64 {
    match model {
        ChoiceModel::Cm1 | ChoiceModel::Cm2 => logistic(mu * delta_u),
        ChoiceModel::Cm3 => {
            let s = logistic(mu * delta_u);
            if beta_val >= 0.0 {
                (1.0 - beta_val) * s + beta_val
            } else {
                (1.0 + beta_val) * s
            }
        }
        ChoiceModel::Cm4 => logistic(mu * (delta_u + beta_bias)),
    }
}

pub fn p_gamble(trial: &TrialSpec, params: &ChoiceParams) -> f64 {
    let du = gamble_utility(trial, params) - certain_utility(trial, params);
    choice_rule(
        params.model_id,
        du,
        params.mu,
        params.trial_bias(trial),
        params.beta_bias,
    )
}

pub fn p_choice(trial: &TrialSpec, choice: Choice, params: &ChoiceParams) -> f64 {
    let p = p_gamble(trial, params);
    match choice {
        Choice::Gamble => p,
        Choice::Certain => 1.0 - p,
    }
}

pub(crate) fn neg_log(p: f64) -> f64 {
    -p.clamp(PROB_EPS, 1.0 - PROB_EPS).ln()
}

/// Negative log-likelihood of the transcript's choices.
pub fn choice_nll(params: &ChoiceParams, transcript: &SessionTranscript) -> f64 {
    transcript
        .rows
        .iter()
        .map(|r| neg_log(p_choice(transcript.trial_of(r), r.choice, params)))
        .sum()
}
