use rand::Rng;

use crate::error::AgentError;
use crate::rng::SessionRng;
use crate::task::{Agent, Choice, TrialContext, TrialSpec};

/// The reference agent has no affect model; it always reports this rating.
pub const EV_MAX_RATING: u8 = 50;

/// Gamble iff its expected value beats the certain option; fair coin on ties.
pub fn ev_max_choose(trial: &TrialSpec, rng: &mut impl Rng) -> Choice {
    let ev = trial.gamble_ev();
    if ev > trial.certain_value {
        Choice::Gamble
    } else if ev < trial.certain_value {
        Choice::Certain
    } else if rng.random_bool(0.5) {
        Choice::Gamble
    } else {
        Choice::Certain
    }
}

#[derive(Debug, Clone)]
pub struct EvMaxAgent {
    id: String,
}

impl EvMaxAgent {
    pub fn new(id: impl Into<String>) -> Self {
        EvMaxAgent { id: id.into() }
    }
}

impl Agent for EvMaxAgent {
    fn id(&self) -> &str {
        &self.id
    }

    fn choose(
        &mut self,
        ctx: &TrialContext<'_>,
        rng: &mut SessionRng,
    ) -> Result<Choice, AgentError> {
        Ok(ev_max_choose(ctx.trial, rng))
    }

    fn rate(&mut self, _ctx: &TrialContext<'_>, _rng: &mut SessionRng) -> Result<u8, AgentError> {
        Ok(EV_MAX_RATING)
    }
}
