//! Bounded multi-start maximum-likelihood fitting and BIC model comparison.

mod affect_fit;
mod choice_fit;
mod comparison;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::affect::{AffectModel, AffectParams};
use crate::choice::{ChoiceModel, ChoiceParams};
use crate::error::{Error, Result};
use crate::optim::NelderMeadOptions;
use crate::par::Exec;
use crate::rng;
use crate::task::SessionTranscript;

pub use affect_fit::{
    fit_affect, fit_affect_data, profile_weights, AffectData, WEIGHT_BOUNDS_BASELINE,
    WEIGHT_BOUNDS_SLOPE,
};
pub use choice_fit::{fit_choice, ChoiceData};
pub use comparison::{compare_models, ComparisonTable};

/// A model from either model space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ModelId {
    Choice(ChoiceModel),
    Affect(AffectModel),
}

impl ModelId {
    pub fn n_params(self) -> usize {
        match self {
            ModelId::Choice(m) => m.n_params(),
            ModelId::Affect(m) => m.n_params(),
        }
    }

    pub fn is_choice(self) -> bool {
        matches!(self, ModelId::Choice(_))
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelId::Choice(m) => m.fmt(f),
            ModelId::Affect(m) => m.fmt(f),
        }
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.parse::<ChoiceModel>()
            .map(ModelId::Choice)
            .or_else(|_| s.parse::<AffectModel>().map(ModelId::Affect))
            .map_err(|_| Error::InvalidArgument(format!("unknown model {s:?}")))
    }
}

impl From<ModelId> for String {
    fn from(m: ModelId) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for ModelId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ChoiceModel> for ModelId {
    fn from(m: ChoiceModel) -> Self {
        ModelId::Choice(m)
    }
}

impl From<AffectModel> for ModelId {
    fn from(m: AffectModel) -> Self {
        ModelId::Affect(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FittedParams {
    Choice(ChoiceParams),
    Affect(AffectParams),
}

impl FittedParams {
    pub fn model(&self) -> ModelId {
        match self {
            FittedParams::Choice(p) => ModelId::Choice(p.model_id),
            FittedParams::Affect(p) => ModelId::Affect(p.model_id),
        }
    }
}

/// One local optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    pub start: Vec<f64>,
    pub start_nll: f64,
    pub x: Vec<f64>,
    pub nll: f64,
    pub evals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: FittedParams,
    pub nll: f64,
    pub bic: f64,
    /// Pseudo-R^2 against a chance responder for choices, R^2 for affect.
    pub fit_quality: f64,
    pub n_obs: usize,
    pub n_params: usize,
    pub starts_used: usize,
    pub best_start_index: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub starts: Vec<StartOutcome>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub n_starts: usize,
    pub seed: u64,
    pub exec: Exec,
    pub optimizer: NelderMeadOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            n_starts: 50,
            seed: 0,
            exec: Exec::default(),
            optimizer: NelderMeadOptions::default(),
        }
    }
}

impl FitOptions {
    pub fn with_seed(self, seed: u64) -> Self {
        FitOptions { seed, ..self }
    }

    pub fn with_starts(self, n_starts: usize) -> Self {
        FitOptions { n_starts, ..self }
    }
}

/// `k ln(n) + 2 nll`.
pub fn bic(nll: f64, n_params: usize, n_obs: usize) -> f64 {
    debug_assert!(n_obs >= 1);
    n_params as f64 * (n_obs as f64).ln() + 2.0 * nll
}

/// McFadden pseudo-R^2 against a responder choosing at chance.
pub fn pseudo_r2(nll: f64, n_trials: usize) -> f64 {
    1.0 - nll / (n_trials as f64 * std::f64::consts::LN_2)
}

/// Picks the converged start with the lowest NLL; ties go to the lowest
/// start index.
pub(crate) fn select_best(outcomes: &[StartOutcome]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if !o.converged || !o.nll.is_finite() {
            continue;
        }
        if best.is_none_or(|b| o.nll < outcomes[b].nll) {
            best = Some(i);
        }
    }
    best.ok_or_else(|| {
        Error::EstimationFailure(format!("all {} starts failed to converge", outcomes.len()))
    })
}

/// One row of the per-agent fit table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub group: String,
    pub session: usize,
    pub model: ModelId,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub beta_gain: Option<f64>,
    pub beta_loss: Option<f64>,
    pub beta_bias: Option<f64>,
    pub beta0: Option<f64>,
    pub beta_cr: Option<f64>,
    pub beta_ev: Option<f64>,
    pub beta_rpe: Option<f64>,
    pub beta_gr: Option<f64>,
    pub gamma: Option<f64>,
    pub nll: f64,
    pub bic: f64,
    pub fit_quality: f64,
    pub n_obs: usize,
    pub n_params: usize,
    pub starts_used: usize,
    pub best_start_index: usize,
}

impl FitRecord {
    pub fn new(group: &str, session: usize, fit: &FitResult) -> Self {
        let mut rec = FitRecord {
            group: group.to_string(),
            session,
            model: fit.params.model(),
            alpha: None,
            lambda: None,
            mu: None,
            beta_gain: None,
            beta_loss: None,
            beta_bias: None,
            beta0: None,
            beta_cr: None,
            beta_ev: None,
            beta_rpe: None,
            beta_gr: None,
            gamma: None,
            nll: fit.nll,
            bic: fit.bic,
            fit_quality: fit.fit_quality,
            n_obs: fit.n_obs,
            n_params: fit.n_params,
            starts_used: fit.starts_used,
            best_start_index: fit.best_start_index,
        };
        match fit.params {
            FittedParams::Choice(p) => {
                rec.alpha = Some(p.alpha);
                rec.lambda = Some(p.lambda);
                rec.mu = Some(p.mu);
                rec.beta_gain = Some(p.beta_gain);
                rec.beta_loss = Some(p.beta_loss);
                rec.beta_bias = Some(p.beta_bias);
            }
            FittedParams::Affect(p) => {
                rec.beta0 = Some(p.beta0);
                rec.beta_cr = Some(p.beta_cr);
                rec.beta_ev = Some(p.beta_ev);
                rec.beta_rpe = Some(p.beta_rpe);
                rec.beta_gr = Some(p.beta_gr);
                rec.gamma = Some(p.gamma);
            }
        }
        rec
    }

    /// Value of a named parameter column, if populated.
    pub fn param(&self, name: &str) -> Option<f64> {
        match name {
            "alpha" => self.alpha,
            "lambda" => self.lambda,
            "mu" => self.mu,
            "beta_gain" => self.beta_gain,
            "beta_loss" => self.beta_loss,
            "beta_bias" => self.beta_bias,
            "beta0" => self.beta0,
            "beta_cr" => self.beta_cr,
            "beta_ev" => self.beta_ev,
            "beta_rpe" => self.beta_rpe,
            "beta_gr" => self.beta_gr,
            "gamma" => self.gamma,
            _ => None,
        }
    }
}

/// Fit seed for one session, independent of its position in a batch.
pub fn session_fit_seed(seed: u64, group: &str, session: usize) -> u64 {
    rng::derive_seed(seed ^ rng::label_hash(group), session as u64)
}

/// Fits every transcript under every model. Results are transcript-major
/// and in `models` order.
pub fn fit_transcripts(
    transcripts: &[SessionTranscript],
    models: &[ModelId],
    opts: &FitOptions,
) -> Vec<Result<FitRecord>> {
    let n_models = models.len();
    opts.exec.map_range(transcripts.len() * n_models, |i| {
        let tr = &transcripts[i / n_models];
        let model = models[i % n_models];
        let o = opts.with_seed(session_fit_seed(opts.seed, &tr.agent_id, tr.session));
        let fit = match model {
            ModelId::Choice(m) => fit_choice(tr, m, &o),
            ModelId::Affect(m) => fit_affect(tr, m, &o),
        }
        .map_err(|e| match e {
            Error::EstimationFailure(msg) | Error::DegenerateData(msg) => Error::EstimationFailure(
                format!("{} session {} {model}: {msg}", tr.agent_id, tr.session),
            ),
            other => other,
        })?;
        Ok(FitRecord::new(&tr.agent_id, tr.session, &fit))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bic_arithmetic() {
        assert!((bic(62.3832, 5, 90) - 147.265_448_351_651_3).abs() < 1e-9);
        assert_eq!(bic(0.0, 0, 17), 0.0);
        assert!((bic(11.0, 3, 90) - bic(10.0, 3, 90) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn model_id_strings() {
        for m in ["cM1", "cM2", "cM3", "cM4", "mM1", "mM2"] {
            assert_eq!(m.parse::<ModelId>().unwrap().to_string(), m);
        }
        assert!("xM9".parse::<ModelId>().is_err());
    }

    #[test]
    fn best_start_ties_go_low() {
        let o = |nll: f64, converged: bool| StartOutcome {
            start: vec![],
            start_nll: nll,
            x: vec![],
            nll,
            evals: 1,
            converged,
        };
        assert_eq!(
            select_best(&[o(3.0, true), o(1.0, true), o(1.0, true)]).unwrap(),
            1
        );
        assert_eq!(select_best(&[o(0.5, false), o(1.0, true)]).unwrap(), 1);
        assert!(matches!(
            select_best(&[o(1.0, false)]),
            Err(Error::EstimationFailure(_))
        ));
    }
}
