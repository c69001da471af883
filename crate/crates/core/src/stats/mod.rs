//! Group-level statistics over per-agent values.

mod anova;
mod bootstrap;
mod dist;
mod hedonic;
mod summary;
mod ttest;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use anova::{one_way_anova, Anova};
pub use bootstrap::{bootstrap_vs_human, Bootstrap, MAX_DEGENERATE_FRACTION};
pub use dist::{f_sf, t_two_tailed};
pub use hedonic::{hedonic_contrast, hedonic_difference, Hedonic};
pub use summary::{mean, median, sample_variance, spearman, summarize_session, SessionSummary};
pub use ttest::{one_sample_t, two_sample_t, welch_t, TTest};

/// One value per agent for a single measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSample {
    pub label: String,
    pub values: Vec<f64>,
}

impl GroupSample {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if values.is_empty() {
            return Err(Error::InvalidArgument(format!("group {label} is empty")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "group {label} contains {v}"
            )));
        }
        Ok(GroupSample { label, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }
}
