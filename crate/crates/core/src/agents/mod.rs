//! Decision agents that can sit a session: parametric synthetic agents,
//! the expected-value maximizer, transcript replay and chat-API models.

mod chat;
mod llm;
mod parse;
mod prompt;
mod reference;
mod replay;
mod synthetic;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::affect::AffectParams;
use crate::choice::ChoiceParams;
use crate::error::{Error, Result};

pub use chat::{
    Attempt, AuditLog, ChatMessage, ChatTransport, Exchange, HttpChatClient, RequestLimiter,
    RetryPolicy,
};
pub use llm::LlmAgent;
pub use parse::{parse_choice, parse_rating};
pub use prompt::{OptionPosition, PromptScript};
pub use reference::{ev_max_choose, EvMaxAgent, EV_MAX_RATING};
pub use replay::{replay_transcript, ReplayAgent};
pub use synthetic::{synthetic_choose, synthetic_rate, SyntheticAgent};

pub const DEFAULT_API_KEY_ENV: &str = "RISKLAB_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmSettings {
    /// Base URL; requests go to `{endpoint}/chat/completions`.
    pub endpoint: String,
    pub model_name: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Clarification turns after an unparseable reply.
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub min_interval_ms: u64,
    /// Transport attempts per request, including the first.
    #[serde(default = "default_transport_attempts")]
    pub transport_attempts: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_temperature() -> f64 {
    1.0
}
fn default_max_retries() -> u32 {
    3
}
fn default_api_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_string()
}
fn default_max_in_flight() -> usize {
    4
}
fn default_transport_attempts() -> u32 {
    5
}
fn default_backoff_ms() -> u64 {
    500
}
fn default_timeout_secs() -> u64 {
    120
}

impl LlmSettings {
    pub fn new(endpoint: impl Into<String>, model_name: impl Into<String>) -> Self {
        LlmSettings {
            endpoint: endpoint.into(),
            model_name: model_name.into(),
            temperature: default_temperature(),
            max_retries: default_max_retries(),
            api_key_env: default_api_key_env(),
            max_in_flight: default_max_in_flight(),
            min_interval_ms: 0,
            transport_attempts: default_transport_attempts(),
            backoff_base_ms: default_backoff_ms(),
            timeout_secs: default_timeout_secs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentDescriptor {
    Synthetic {
        choice_params: ChoiceParams,
        affect_params: AffectParams,
        #[serde(default)]
        rating_noise_sigma: f64,
    },
    EvMax,
    Llm(LlmSettings),
    Replay {
        source_transcript: PathBuf,
    },
}

impl AgentDescriptor {
    pub fn validate(&self) -> Result<()> {
        match self {
            AgentDescriptor::Synthetic {
                choice_params,
                affect_params,
                rating_noise_sigma,
            } => {
                if !(rating_noise_sigma.is_finite() && *rating_noise_sigma >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "rating_noise_sigma must be >= 0, got {rating_noise_sigma}"
                    )));
                }
                if !choice_params.within_bounds() {
                    return Err(Error::InvalidArgument(format!(
                        "choice parameters outside bounds: {choice_params:?}"
                    )));
                }
                if !(0.0..=1.0).contains(&affect_params.gamma) {
                    return Err(Error::InvalidArgument(format!(
                        "gamma {} outside [0, 1]",
                        affect_params.gamma
                    )));
                }
                Ok(())
            }
            AgentDescriptor::EvMax => Ok(()),
            AgentDescriptor::Llm(s) => {
                if s.endpoint.is_empty() || s.model_name.is_empty() {
                    return Err(Error::InvalidArgument(
                        "llm agent needs endpoint and model_name".into(),
                    ));
                }
                if s.max_in_flight == 0 || s.transport_attempts == 0 {
                    return Err(Error::InvalidArgument(
                        "max_in_flight and transport_attempts must be >= 1".into(),
                    ));
                }
                Ok(())
            }
            AgentDescriptor::Replay { .. } => Ok(()),
        }
    }
}

/// A descriptor plus the group label its sessions are recorded under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub label: String,
    #[serde(flatten)]
    pub descriptor: AgentDescriptor,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_json_shape() {
        let spec = AgentSpec {
            label: "ev".into(),
            descriptor: AgentDescriptor::EvMax,
        };
        assert_eq!(
            serde_json::to_string(&spec).unwrap(),
            r#"{"label":"ev","kind":"ev_max"}"#
        );
        let llm: AgentSpec = serde_json::from_str(
            r#"{"label":"m","kind":"llm","endpoint":"http://x/v1","model_name":"gpt"}"#,
        )
        .unwrap();
        let AgentDescriptor::Llm(s) = &llm.descriptor else {
            panic!()
        };
        assert_eq!((s.temperature, s.max_retries), (1.0, 3));
        assert_eq!(s.api_key_env, "RISKLAB_API_KEY");
    }

    #[test]
    fn negative_sigma_rejected() {
        let d = AgentDescriptor::Synthetic {
            choice_params: ChoiceParams::cm1(0.5),
            affect_params: AffectParams::constant(50.0),
            rating_noise_sigma: -1.0,
        };
        assert!(d.validate().is_err());
    }
}
