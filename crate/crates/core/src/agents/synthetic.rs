use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::affect::{predict_at, regressor_row, AffectParams, AffectRegressorRow};
use crate::choice::{p_gamble, ChoiceParams};
use crate::error::AgentError;
use crate::rng::SessionRng;
use crate::task::{Agent, Choice, TrialContext, TrialSpec};

pub fn synthetic_choose(trial: &TrialSpec, params: &ChoiceParams, rng: &mut impl Rng) -> Choice {
    let p = p_gamble(trial, params);
    if rng.random::<f64>() < p {
        Choice::Gamble
    } else {
        Choice::Certain
    }
}

/// Model prediction at the last row of `history`, plus N(0, sigma) noise,
/// rounded and clamped to 0-100.
pub fn synthetic_rate(
    history: &[AffectRegressorRow],
    affect: &AffectParams,
    sigma: f64,
    rng: &mut impl Rng,
) -> u8 {
    let t = history.len();
    let predicted = if t == 0 {
        affect.beta0
    } else {
        predict_at(affect, history, &[t])[0].1
    };
    let noise = if sigma > 0.0 {
        Normal::new(0.0, sigma)
            .expect("sigma is finite and positive")
            .sample(rng)
    } else {
        0.0
    };
    (predicted + noise).round().clamp(0.0, 100.0) as u8
}

#[derive(Debug, Clone)]
pub struct SyntheticAgent {
    id: String,
    choice: ChoiceParams,
    affect: AffectParams,
    sigma: f64,
}

impl SyntheticAgent {
    pub fn new(
        id: impl Into<String>,
        choice: ChoiceParams,
        affect: AffectParams,
        sigma: f64,
    ) -> Self {
        SyntheticAgent {
            id: id.into(),
            choice,
            affect,
            sigma,
        }
    }
}

impl Agent for SyntheticAgent {
    fn id(&self) -> &str {
        &self.id
    }

    fn choose(
        &mut self,
        ctx: &TrialContext<'_>,
        rng: &mut SessionRng,
    ) -> Result<Choice, AgentError> {
        Ok(synthetic_choose(ctx.trial, &self.choice, rng))
    }

    fn rate(&mut self, ctx: &TrialContext<'_>, rng: &mut SessionRng) -> Result<u8, AgentError> {
        let rows: Vec<_> = ctx
            .history
            .iter()
            .map(|r| {
                regressor_row(
                    r.trial,
                    r.choice,
                    r.outcome,
                    ctx.task.trial(r.trial).gamble_ev(),
                )
            })
            .collect();
        Ok(synthetic_rate(&rows, &self.affect, self.sigma, rng))
    }
}
