use crate::error::AgentError;
use crate::rng::SessionRng;
use crate::task::{Agent, Choice, SessionTranscript, TrialContext};

/// Re-issues the choices, outcomes and ratings of a stored transcript.
#[derive(Debug, Clone)]
pub struct ReplayAgent {
    source: SessionTranscript,
}

impl ReplayAgent {
    pub fn new(source: SessionTranscript) -> Self {
        ReplayAgent { source }
    }
}

impl Agent for ReplayAgent {
    fn id(&self) -> &str {
        &self.source.agent_id
    }

    fn choose(
        &mut self,
        ctx: &TrialContext<'_>,
        _rng: &mut SessionRng,
    ) -> Result<Choice, AgentError> {
        self.source
            .rows
            .get(ctx.number - 1)
            .map(|r| r.choice)
            .ok_or_else(|| {
                AgentError::Replay(format!("no recorded choice for trial {}", ctx.number))
            })
    }

    fn rate(&mut self, ctx: &TrialContext<'_>, _rng: &mut SessionRng) -> Result<u8, AgentError> {
        self.source
            .ratings
            .iter()
            .find(|r| r.trial == ctx.number)
            .map(|r| r.rating)
            .ok_or_else(|| {
                AgentError::Replay(format!("no recorded rating after trial {}", ctx.number))
            })
    }

    fn recorded_outcome(&self, trial: usize) -> Option<f64> {
        self.source.rows.get(trial - 1).map(|r| r.outcome)
    }

    fn prompt_version(&self) -> Option<&str> {
        self.source.prompt_version.as_deref()
    }
}

/// Runs a replay of `source` and restores its batch metadata.
pub fn replay_transcript(source: &SessionTranscript) -> crate::Result<SessionTranscript> {
    let mut agent = ReplayAgent::new(source.clone());
    let mut out = crate::task::run_session(&mut agent, &source.task, source.session_seed)?;
    out.session = source.session;
    out.run_config_hash = source.run_config_hash.clone();
    Ok(out)
}
