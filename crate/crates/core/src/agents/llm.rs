use std::sync::Arc;

use serde_json::json;

use crate::error::AgentError;
use crate::rng::SessionRng;
use crate::task::{Agent, Choice, TrialContext};

use super::chat::{request_body, AuditLog, ChatMessage, ChatTransport};
use super::parse::{parse_choice, parse_rating};
use super::prompt::PromptScript;

/// A chat model sitting the task. The whole conversation so far is sent
/// with every turn.
pub struct LlmAgent {
    id: String,
    script: PromptScript,
    transport: Arc<dyn ChatTransport>,
    model_name: String,
    temperature: f64,
    max_retries: u32,
    messages: Vec<ChatMessage>,
    reported: usize,
    session: usize,
    audit: Option<AuditLog>,
    requests: usize,
}

impl LlmAgent {
    pub fn new(
        id: impl Into<String>,
        script: PromptScript,
        transport: Arc<dyn ChatTransport>,
        model_name: impl Into<String>,
        temperature: f64,
        max_retries: u32,
    ) -> Self {
        let messages = vec![ChatMessage::system(script.system_text.clone())];
        LlmAgent {
            id: id.into(),
            script,
            transport,
            model_name: model_name.into(),
            temperature,
            max_retries,
            messages,
            reported: 0,
            session: 0,
            audit: None,
            requests: 0,
        }
    }

    pub fn with_audit(mut self, audit: AuditLog, session: usize) -> Self {
        self.audit = Some(audit);
        self.session = session;
        self
    }

    pub fn messages(&self) -> &[ChatMessage] {
        &self.messages
    }

    pub fn request_count(&self) -> usize {
        self.requests
    }

    fn log(&self, entry: serde_json::Value) -> Result<(), AgentError> {
        match &self.audit {
            Some(a) => a
                .record(&entry)
                .map_err(|e| AgentError::Transport(format!("audit log: {e}"))),
            None => Ok(()),
        }
    }

    /// Outcome feedback for trials the model has not been told about yet.
    fn feedback(&mut self, ctx: &TrialContext<'_>) -> Option<String> {
        let pending: Vec<String> = ctx.history[self.reported..]
            .iter()
            .map(|r| self.script.render_outcome(r, ctx.task.trial(r.trial)))
            .collect();
        self.reported = ctx.history.len();
        (!pending.is_empty()).then(|| pending.join("\n"))
    }

    fn ask<T>(
        &mut self,
        trial: usize,
        prompt: String,
        clarification: String,
        parse: impl Fn(&str) -> Result<T, AgentError>,
    ) -> Result<T, AgentError> {
        self.messages.push(ChatMessage::user(prompt));
        let mut last_err = None;
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                self.messages.push(ChatMessage::user(clarification.clone()));
            }
            let body = request_body(&self.model_name, self.temperature, &self.messages);
            self.log(
                json!({"session": self.session, "trial": trial, "event": "request", "body": body}),
            )?;
            let exchange = self.transport.send(&body);
            self.requests += exchange.attempts.len();
            for (i, a) in exchange.attempts.iter().enumerate() {
                self.log(json!({
                    "session": self.session,
                    "trial": trial,
                    "event": "response",
                    "attempt": i,
                    "status": a.status,
                    "body": a.body,
                }))?;
            }
            let Some(reply) = exchange.content else {
                let detail = exchange
                    .attempts
                    .last()
                    .map(|a| format!("status {:?}: {}", a.status, a.body))
                    .unwrap_or_else(|| "no attempts".into());
                return Err(AgentError::Transport(format!(
                    "request failed after {} attempts: {detail}",
                    exchange.attempts.len()
                )));
            };
            self.messages.push(ChatMessage::assistant(reply.clone()));
            match parse(&reply) {
                Ok(v) => return Ok(v),
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.expect("at least one attempt was made"))
    }
}

impl Agent for LlmAgent {
    fn id(&self) -> &str {
        &self.id
    }

    fn choose(
        &mut self,
        ctx: &TrialContext<'_>,
        _rng: &mut SessionRng,
    ) -> Result<Choice, AgentError> {
        let trial_text = self
            .script
            .render_trial(ctx.number, ctx.task.len(), ctx.trial);
        let prompt = match self.feedback(ctx) {
            Some(f) => format!("{f}\n\n{trial_text}"),
            None => trial_text,
        };
        let labels = self.script.option_labels.clone();
        let order = ctx.trial.option_order;
        let clarification = self.script.choice_clarification.clone();
        self.ask(ctx.number, prompt, clarification, |reply| {
            parse_choice(reply, &labels).map(|pos| pos.choice(order))
        })
    }

    fn rate(&mut self, ctx: &TrialContext<'_>, _rng: &mut SessionRng) -> Result<u8, AgentError> {
        let probe = self.script.probe_text.clone();
        let prompt = match self.feedback(ctx) {
            Some(f) => format!("{f}\n\n{probe}"),
            None => probe,
        };
        let clarification = self.script.rating_clarification.clone();
        self.ask(ctx.number, prompt, clarification, parse_rating)
    }

    fn prompt_version(&self) -> Option<&str> {
        Some(&self.script.version)
    }
}
