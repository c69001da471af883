use serde::Serialize;

use crate::error::{Error, Result};
use crate::task::SessionTranscript;

use super::summary::mean;
use super::ttest::one_sample_t;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hedonic {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub d: f64,
    pub mean_contrast: f64,
    /// Agents with ratings after both a gain and a loss.
    pub n_agents: usize,
    pub contrasts: Vec<f64>,
}

/// Mean rating at probes following a positive outcome minus the mean at
/// probes following a negative one. `None` when either side is empty.
pub fn hedonic_difference(transcript: &SessionTranscript) -> Option<f64> {
    let mut after_gain = Vec::new();
    let mut after_loss = Vec::new();
    for r in &transcript.ratings {
        let outcome = transcript.rows.get(r.trial.checked_sub(1)?)?.outcome;
        if outcome > 0.0 {
            after_gain.push(f64::from(r.rating));
        } else if outcome < 0.0 {
            after_loss.push(f64::from(r.rating));
        }
    }
    if after_gain.is_empty() || after_loss.is_empty() {
        return None;
    }
    Some(mean(&after_gain) - mean(&after_loss))
}

/// One-sample t of per-agent hedonic differences against zero.
pub fn hedonic_contrast(transcripts: &[SessionTranscript]) -> Result<Hedonic> {
    let contrasts: Vec<f64> = transcripts.iter().filter_map(hedonic_difference).collect();
    if contrasts.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "hedonic contrast needs at least 2 usable agents, got {}",
            contrasts.len()
        )));
    }
    let t = one_sample_t(&contrasts)?;
    Ok(Hedonic {
        t: t.t,
        df: t.df,
        p: t.p,
        d: t.d,
        mean_contrast: mean(&contrasts),
        n_agents: contrasts.len(),
        contrasts,
    })
}
