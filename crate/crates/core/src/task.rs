//! The 90-trial gambling task: trial grids, probe schedule, outcome
//! resolution and the session driver.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AgentError, Error, Result};
use crate::rng::{self, SessionRng};

pub const ENDOWMENT: f64 = 500.0;
pub const TRIALS_PER_TYPE: usize = 30;
pub const N_TRIALS: usize = 3 * TRIALS_PER_TYPE;

/// Mixed-trial gain amounts.
pub const MIXED_GAINS: [i64; 3] = [40, 45, 75];
/// Gain-trial certain amounts; loss trials use the negatives.
pub const CERTAIN_AMOUNTS: [i64; 3] = [35, 45, 55];
/// Mixed-trial loss multipliers, in hundredths.
pub const MIXED_MULTIPLIERS: [i64; 10] = [20, 34, 50, 64, 77, 89, 100, 110, 135, 200];
/// Gain- and loss-trial gamble multipliers, in hundredths.
pub const GAMBLE_MULTIPLIERS: [i64; 10] = [168, 182, 200, 222, 248, 280, 316, 360, 420, 500];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialType {
    Mixed,
    Gain,
    Loss,
}

impl TrialType {
    pub const ALL: [TrialType; 3] = [TrialType::Mixed, TrialType::Gain, TrialType::Loss];

    pub fn as_str(self) -> &'static str {
        match self {
            TrialType::Mixed => "mixed",
            TrialType::Gain => "gain",
            TrialType::Loss => "loss",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionOrder {
    GambleFirst,
    CertainFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    Gamble,
    Certain,
}

/// Product of an integer amount and a multiplier given in hundredths,
/// rounded once to the nearest `f64` (45 x 0.34 -> 15.3).
fn scaled(amount: i64, multiplier_centi: i64) -> f64 {
    (amount * multiplier_centi) as f64 / 100.0
}

fn centi_to_f64(multiplier_centi: i64) -> f64 {
    multiplier_centi as f64 / 100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub trial_type: TrialType,
    pub certain_value: f64,
    pub gamble_gain: f64,
    pub gamble_loss: f64,
    pub multiplier: f64,
    pub option_order: OptionOrder,
}

impl TrialSpec {
    pub fn mixed(gain: i64, multiplier_centi: i64, option_order: OptionOrder) -> Self {
        TrialSpec {
            trial_type: TrialType::Mixed,
            certain_value: 0.0,
            gamble_gain: gain as f64,
            gamble_loss: -scaled(gain, multiplier_centi),
            multiplier: centi_to_f64(multiplier_centi),
            option_order,
        }
    }

    pub fn gain(certain: i64, multiplier_centi: i64, option_order: OptionOrder) -> Self {
        TrialSpec {
            trial_type: TrialType::Gain,
            certain_value: certain as f64,
            gamble_gain: scaled(certain, multiplier_centi),
            gamble_loss: 0.0,
            multiplier: centi_to_f64(multiplier_centi),
            option_order,
        }
    }

    /// `certain` is the magnitude; the stored certain value is negative.
    pub fn loss(certain: i64, multiplier_centi: i64, option_order: OptionOrder) -> Self {
        TrialSpec {
            trial_type: TrialType::Loss,
            certain_value: -(certain as f64),
            gamble_gain: 0.0,
            gamble_loss: -scaled(certain, multiplier_centi),
            multiplier: centi_to_f64(multiplier_centi),
            option_order,
        }
    }

    pub fn gamble_ev(&self) -> f64 {
        0.5 * self.gamble_gain + 0.5 * self.gamble_loss
    }

    /// Checks the grid invariants for this trial's type.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Invariant(format!("{msg}: {self:?}")));
        if self.gamble_gain < 0.0 || self.gamble_loss > 0.0 {
            return bad("gamble gain must be >= 0 and loss <= 0");
        }
        let find = |set: &[i64]| {
            set.iter()
                .copied()
                .find(|&m| centi_to_f64(m) == self.multiplier)
        };
        match self.trial_type {
            TrialType::Mixed => {
                let Some(m) = find(&MIXED_MULTIPLIERS) else {
                    return bad("mixed multiplier outside grid");
                };
                let Some(g) = MIXED_GAINS
                    .iter()
                    .copied()
                    .find(|&g| g as f64 == self.gamble_gain)
                else {
                    return bad("mixed gain outside grid");
                };
                if self.certain_value != 0.0 || self.gamble_loss != -scaled(g, m) {
                    return bad("mixed trial values inconsistent");
                }
            }
            TrialType::Gain => {
                let Some(m) = find(&GAMBLE_MULTIPLIERS) else {
                    return bad("gain multiplier outside grid");
                };
                let Some(c) = CERTAIN_AMOUNTS
                    .iter()
                    .copied()
                    .find(|&c| c as f64 == self.certain_value)
                else {
                    return bad("gain certain value outside grid");
                };
                if self.gamble_loss != 0.0 || self.gamble_gain != scaled(c, m) {
                    return bad("gain trial values inconsistent");
                }
            }
            TrialType::Loss => {
                let Some(m) = find(&GAMBLE_MULTIPLIERS) else {
                    return bad("loss multiplier outside grid");
                };
                let Some(c) = CERTAIN_AMOUNTS
                    .iter()
                    .copied()
                    .find(|&c| -(c as f64) == self.certain_value)
                else {
                    return bad("loss certain value outside grid");
                };
                if self.gamble_gain != 0.0 || self.gamble_loss != -scaled(c, m) {
                    return bad("loss trial values inconsistent");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSet {
    pub trials: Vec<TrialSpec>,
    /// 1-based trial numbers after which a happiness rating is requested.
    pub probe_after: Vec<usize>,
    pub seed: u64,
}

impl TaskSet {
    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn is_probe(&self, trial: usize) -> bool {
        self.probe_after.binary_search(&trial).is_ok()
    }

    /// Trial by 1-based number.
    pub fn trial(&self, number: usize) -> &TrialSpec {
        &self.trials[number - 1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials.len() != N_TRIALS {
            return Err(Error::Invariant(format!(
                "task has {} trials, expected {N_TRIALS}",
                self.trials.len()
            )));
        }
        for t in &self.trials {
            t.validate()?;
        }
        for ty in TrialType::ALL {
            let mut cells: Vec<(u64, u64)> = self
                .trials
                .iter()
                .filter(|t| t.trial_type == ty)
                .map(|t| {
                    let amount = match ty {
                        TrialType::Mixed => t.gamble_gain,
                        _ => t.certain_value,
                    };
                    (amount.to_bits(), t.multiplier.to_bits())
                })
                .collect();
            if cells.len() != TRIALS_PER_TYPE {
                return Err(Error::Invariant(format!(
                    "{} {} trials, expected {TRIALS_PER_TYPE}",
                    cells.len(),
                    ty.as_str()
                )));
            }
            cells.sort_unstable();
            cells.dedup();
            if cells.len() != TRIALS_PER_TYPE {
                return Err(Error::Invariant(format!("duplicate {} cell", ty.as_str())));
            }
        }
        validate_probes(&self.probe_after, self.trials.len())?;
        let n = self.probe_after.len();
        if !(N_TRIALS / 3..=N_TRIALS / 2).contains(&n) {
            return Err(Error::Invariant(format!("{n} probes outside [30, 45]")));
        }
        Ok(())
    }
}

fn validate_probes(probes: &[usize], n_trials: usize) -> Result<()> {
    let Some(&first) = probes.first() else {
        return Err(Error::Invariant("empty probe schedule".into()));
    };
    if !(2..=3).contains(&first) {
        return Err(Error::Invariant(format!("first probe at {first}")));
    }
    for w in probes.windows(2) {
        let gap = w[1].wrapping_sub(w[0]);
        if !(2..=3).contains(&gap) {
            return Err(Error::Invariant(format!(
                "probe gap {gap} between {} and {}",
                w[0], w[1]
            )));
        }
    }
    if probes.last().is_some_and(|&p| p > n_trials) {
        return Err(Error::Invariant("probe beyond last trial".into()));
    }
    Ok(())
}

/// The 90 (type, amount, multiplier) cells in canonical order, all with
/// the gamble shown first.
pub fn canonical_grid() -> Vec<TrialSpec> {
    let order = OptionOrder::GambleFirst;
    let mut cells = Vec::with_capacity(N_TRIALS);
    for &g in &MIXED_GAINS {
        for &m in &MIXED_MULTIPLIERS {
            cells.push(TrialSpec::mixed(g, m, order));
        }
    }
    for &c in &CERTAIN_AMOUNTS {
        for &m in &GAMBLE_MULTIPLIERS {
            cells.push(TrialSpec::gain(c, m, order));
        }
    }
    for &c in &CERTAIN_AMOUNTS {
        for &m in &GAMBLE_MULTIPLIERS {
            cells.push(TrialSpec::loss(c, m, order));
        }
    }
    cells
}

/// Probe schedule: first probe after trial 2 or 3, then gaps drawn
/// uniformly from {2, 3} while the index stays within `n_trials`.
pub fn schedule_probes(n_trials: usize, seed: u64) -> Result<Vec<usize>> {
    if n_trials < 3 {
        return Err(Error::InvalidArgument(format!(
            "probe schedule needs at least 3 trials, got {n_trials}"
        )));
    }
    let mut rng = rng::stream(seed, rng::PROBES);
    let mut probes = Vec::with_capacity(n_trials / 2);
    let mut next = rng.random_range(2..=3usize);
    while next <= n_trials {
        probes.push(next);
        next += rng.random_range(2..=3usize);
    }
    Ok(probes)
}

pub fn build_trial_set(seed: u64) -> TaskSet {
    let mut trials = canonical_grid();
    trials.shuffle(&mut rng::stream(seed, rng::TRIAL_ORDER));
    let mut coin = rng::stream(seed, rng::OPTION_ORDER);
    for t in &mut trials {
        t.option_order = if coin.random_bool(0.5) {
            OptionOrder::GambleFirst
        } else {
            OptionOrder::CertainFirst
        };
    }
    let probe_after =
        schedule_probes(N_TRIALS, seed).expect("90 trials is a valid probe schedule length");
    TaskSet {
        trials,
        probe_after,
        seed,
    }
}

pub fn resolve_outcome(trial: &TrialSpec, choice: Choice, rng: &mut impl Rng) -> f64 {
    match choice {
        Choice::Certain => trial.certain_value,
        Choice::Gamble => {
            if rng.random_bool(0.5) {
                trial.gamble_gain
            } else {
                trial.gamble_loss
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// 1-based trial number.
    pub trial: usize,
    pub choice: Choice,
    pub outcome: f64,
    pub cumulative_points: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub trial: usize,
    pub rating: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub agent_id: String,
    #[serde(default)]
    pub session: usize,
    #[serde(default)]
    pub session_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_config_hash: Option<String>,
    pub task: TaskSet,
    pub rows: Vec<TrialRecord>,
    pub ratings: Vec<RatingRecord>,
}

/// Points are multiples of 0.01, so the running total is kept in integer
/// hundredths and never drifts.
fn to_centi(points: f64) -> i64 {
    (points * 100.0).round() as i64
}

impl SessionTranscript {
    pub fn trial_of(&self, record: &TrialRecord) -> &TrialSpec {
        self.task.trial(record.trial)
    }

    pub fn final_points(&self) -> f64 {
        self.rows.last().map_or(ENDOWMENT, |r| r.cumulative_points)
    }

    pub fn validate(&self) -> Result<()> {
        let mut total = to_centi(ENDOWMENT);
        for (i, row) in self.rows.iter().enumerate() {
            if row.trial != i + 1 || row.trial > self.task.len() {
                return Err(Error::Invariant(format!(
                    "row {i} has trial number {}",
                    row.trial
                )));
            }
            let spec = self.task.trial(row.trial);
            let legal = match row.choice {
                Choice::Certain => row.outcome == spec.certain_value,
                Choice::Gamble => {
                    row.outcome == spec.gamble_gain || row.outcome == spec.gamble_loss
                }
            };
            if !legal {
                return Err(Error::Invariant(format!(
                    "trial {}: outcome {} impossible for {:?}",
                    row.trial, row.outcome, row.choice
                )));
            }
            total += to_centi(row.outcome);
            if to_centi(row.cumulative_points) != total {
                return Err(Error::Invariant(format!(
                    "trial {}: cumulative points {} do not match running sum",
                    row.trial, row.cumulative_points
                )));
            }
        }
        let mut last = 0;
        for r in &self.ratings {
            if r.trial <= last || !self.task.is_probe(r.trial) || r.trial > self.rows.len() {
                return Err(Error::Invariant(format!(
                    "rating at non-probe trial {}",
                    r.trial
                )));
            }
            if r.rating > 100 {
                return Err(Error::Invariant(format!("rating {} above 100", r.rating)));
            }
            last = r.trial;
        }
        Ok(())
    }
}

/// What an agent sees when asked for a choice or a rating.
#[derive(Debug, Clone, Copy)]
pub struct TrialContext<'a> {
    /// 1-based number of the current trial.
    pub number: usize,
    pub trial: &'a TrialSpec,
    pub task: &'a TaskSet,
    /// Completed trials; during `rate` this includes the current trial.
    pub history: &'a [TrialRecord],
    pub ratings: &'a [RatingRecord],
}

pub trait Agent {
    fn id(&self) -> &str;

    fn choose(
        &mut self,
        ctx: &TrialContext<'_>,
        rng: &mut SessionRng,
    ) -> Result<Choice, AgentError>;

    fn rate(&mut self, ctx: &TrialContext<'_>, rng: &mut SessionRng) -> Result<u8, AgentError>;

    /// Replaying agents supply the outcome they observed originally.
    fn recorded_outcome(&self, _trial: usize) -> Option<f64> {
        None
    }

    fn prompt_version(&self) -> Option<&str> {
        None
    }
}

/// Drives `agent` through every trial of `task`. Outcomes and agent-side
/// randomness come from separate streams derived from `seed`.
pub fn run_session(agent: &mut dyn Agent, task: &TaskSet, seed: u64) -> Result<SessionTranscript> {
    let mut outcome_rng = rng::stream(seed, rng::OUTCOMES);
    let mut agent_rng = rng::stream(seed, rng::AGENT);
    let mut rows: Vec<TrialRecord> = Vec::with_capacity(task.len());
    let mut ratings: Vec<RatingRecord> = Vec::with_capacity(task.probe_after.len());
    let mut total = to_centi(ENDOWMENT);
    let abort = |agent_id: &str, trial: usize, source: AgentError| Error::SessionAborted {
        agent_id: agent_id.to_string(),
        trial,
        source,
    };

    for (i, trial) in task.trials.iter().enumerate() {
        let number = i + 1;
        let ctx = TrialContext {
            number,
            trial,
            task,
            history: &rows,
            ratings: &ratings,
        };
        let choice = agent
            .choose(&ctx, &mut agent_rng)
            .map_err(|e| abort(agent.id(), number, e))?;
        let outcome = match agent.recorded_outcome(number) {
            Some(recorded) => {
                let legal = match choice {
                    Choice::Certain => recorded == trial.certain_value,
                    Choice::Gamble => {
                        recorded == trial.gamble_gain || recorded == trial.gamble_loss
                    }
                };
                if !legal {
                    let msg = format!("recorded outcome {recorded} impossible for {choice:?}");
                    return Err(abort(agent.id(), number, AgentError::Replay(msg)));
                }
                recorded
            }
            None => resolve_outcome(trial, choice, &mut outcome_rng),
        };
        total += to_centi(outcome);
        rows.push(TrialRecord {
            trial: number,
            choice,
            outcome,
            cumulative_points: total as f64 / 100.0,
        });
        if task.is_probe(number) {
            let ctx = TrialContext {
                number,
                trial,
                task,
                history: &rows,
                ratings: &ratings,
            };
            let rating = agent
                .rate(&ctx, &mut agent_rng)
                .map_err(|e| abort(agent.id(), number, e))?;
            if rating > 100 {
                let msg = format!("rating {rating} outside 0-100");
                return Err(abort(agent.id(), number, AgentError::Replay(msg)));
            }
            ratings.push(RatingRecord {
                trial: number,
                rating,
            });
        }
    }

    Ok(SessionTranscript {
        agent_id: agent.id().to_string(),
        session: 0,
        session_seed: seed,
        prompt_version: agent.prompt_version().map(str::to_string),
        run_config_hash: None,
        task: task.clone(),
        rows,
        ratings,
    })
}

/// Expected gamble rate of an expected-value maximizer per trial type,
/// counting exact EV ties as one half.
pub fn rational_gamble_rates(trials: &[TrialSpec]) -> [(TrialType, f64); 3] {
    TrialType::ALL.map(|ty| {
        let of_type: Vec<_> = trials.iter().filter(|t| t.trial_type == ty).collect();
        let score: f64 = of_type
            .iter()
            .map(|t| match t.gamble_ev().partial_cmp(&t.certain_value) {
                Some(std::cmp::Ordering::Greater) => 1.0,
                Some(std::cmp::Ordering::Equal) => 0.5,
                _ => 0.0,
            })
            .sum();
        (ty, score / of_type.len().max(1) as f64)
    })
}
