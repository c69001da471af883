use crate::choice::{choice_nll, choice_rule, neg_log, ChoiceModel, ChoiceParams};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, Bounds};
use crate::rng;
use crate::task::{Choice, SessionTranscript, TrialType};

use super::{bic, pseudo_r2, select_best, FitOptions, FitResult, FittedParams, StartOutcome};

/// Log-magnitude of a stake; `None` for a zero stake.
fn ln_mag(v: f64) -> Option<f64> {
    (v != 0.0).then(|| v.abs().ln())
}

#[derive(Debug, Clone, Copy)]
struct Obs {
    trial_type: TrialType,
    ln_gain: Option<f64>,
    ln_loss: Option<f64>,
    ln_certain: Option<f64>,
    certain_negative: bool,
    gambled: bool,
}

/// Choice data with log-magnitudes precomputed, so `x^alpha` costs one
/// `exp` per term inside the optimizer loop.
#[derive(Debug, Clone)]
pub struct ChoiceData {
    obs: Vec<Obs>,
}

impl ChoiceData {
    pub fn new(transcript: &SessionTranscript) -> Self {
        let obs = transcript
            .rows
            .iter()
            .map(|r| {
                let t = transcript.trial_of(r);
                Obs {
                    trial_type: t.trial_type,
                    ln_gain: ln_mag(t.gamble_gain),
                    ln_loss: ln_mag(t.gamble_loss),
                    ln_certain: ln_mag(t.certain_value),
                    certain_negative: t.certain_value < 0.0,
                    gambled: r.choice == Choice::Gamble,
                }
            })
            .collect();
        ChoiceData { obs }
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn nll(&self, p: &ChoiceParams) -> f64 {
        let pow = |l: Option<f64>| l.map_or(0.0, |l| (p.alpha * l).exp());
        self.obs
            .iter()
            .map(|o| {
                let u_gamble = 0.5 * pow(o.ln_gain) - 0.5 * p.lambda * pow(o.ln_loss);
                let u_certain = if o.certain_negative {
                    -p.lambda * pow(o.ln_certain)
                } else {
                    pow(o.ln_certain)
                };
                let beta_val = match o.trial_type {
                    TrialType::Gain => p.beta_gain,
                    TrialType::Loss => p.beta_loss,
                    TrialType::Mixed => 0.0,
                };
                let pg = choice_rule(
                    p.model_id,
                    u_gamble - u_certain,
                    p.mu,
                    beta_val,
                    p.beta_bias,
                );
                neg_log(if o.gambled { pg } else { 1.0 - pg })
            })
            .sum()
    }
}

pub fn fit_choice(
    transcript: &SessionTranscript,
    model: ChoiceModel,
    opts: &FitOptions,
) -> Result<FitResult> {
    if transcript.rows.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot fit an empty transcript".into(),
        ));
    }
    if opts.n_starts == 0 {
        return Err(Error::InvalidArgument("n_starts must be at least 1".into()));
    }
    let data = ChoiceData::new(transcript);
    let bounds = Bounds::new(model.free_params().iter().map(|p| p.bounds()));
    let mut start_rng = rng::stream(opts.seed, rng::STARTS);
    let starts: Vec<Vec<f64>> = (0..opts.n_starts)
        .map(|_| bounds.sample(&mut start_rng))
        .collect();
    let objective = |x: &[f64]| data.nll(&ChoiceParams::from_free(model, x));

    let outcomes = opts.exec.map_slice(&starts, |_, x0| {
        let m = nelder_mead(objective, x0, &bounds, &opts.optimizer);
        StartOutcome {
            start: x0.clone(),
            start_nll: objective(x0),
            x: m.x,
            nll: m.fx,
            evals: m.evals,
            converged: m.converged,
        }
    });
    let best = select_best(&outcomes)?;
    let params = ChoiceParams::from_free(model, &outcomes[best].x);
    let nll = choice_nll(&params, transcript);
    let n_obs = transcript.rows.len();
    Ok(FitResult {
        params: FittedParams::Choice(params),
        nll,
        bic: bic(nll, model.n_params(), n_obs),
        fit_quality: pseudo_r2(nll, n_obs),
        n_obs,
        n_params: model.n_params(),
        starts_used: outcomes.iter().filter(|o| o.converged).count(),
        best_start_index: best,
        starts: outcomes,
    })
}
