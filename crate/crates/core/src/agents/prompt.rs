//! Text rendering of the task for chat models.

use serde::{Deserialize, Serialize};

use crate::task::{Choice, OptionOrder, TrialRecord, TrialSpec};

/// Screen position of an option; A is shown first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionPosition {
    A,
    B,
}

impl OptionPosition {
    pub fn choice(self, order: OptionOrder) -> Choice {
        match (self, order) {
            (OptionPosition::A, OptionOrder::GambleFirst)
            | (OptionPosition::B, OptionOrder::CertainFirst) => Choice::Gamble,
            _ => Choice::Certain,
        }
    }

    pub fn of(choice: Choice, order: OptionOrder) -> Self {
        if OptionPosition::A.choice(order) == choice {
            OptionPosition::A
        } else {
            OptionPosition::B
        }
    }
}

/// Prompt templates. Slots are written `{name}`.
///
/// `trial_text` slots: `{trial}`, `{n_trials}`, `{label_a}`, `{label_b}`,
/// `{option_a}`, `{option_b}`. `outcome_text` slots: `{label}`, `{result}`,
/// `{total}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptScript {
    pub version: String,
    pub system_text: String,
    pub trial_text: String,
    pub outcome_text: String,
    pub probe_text: String,
    pub choice_clarification: String,
    pub rating_clarification: String,
    /// Accepted option labels, in screen order.
    pub option_labels: [String; 2],
}

impl Default for PromptScript {
    fn default() -> Self {
        PromptScript {
            version: "risklab-text-v1".into(),
            system_text: "You are playing a points game. You start with 500 points and your goal is to end \
                with as many points as possible. On every trial you choose between two options: a sure \
                amount of points, or a gamble with a 50% chance of each of two outcomes. The outcome of \
                your choice is shown right after you choose. From time to time you will be asked how \
                happy you are right now, on a scale from 0 (very unhappy) to 100 (very happy). Answer \
                choices with \"Option A\" or \"Option B\" and happiness questions with a single whole \
                number from 0 to 100."
                .into(),
            trial_text: "Trial {trial} of {n_trials}.\nOption {label_a}: {option_a}\nOption {label_b}: \
                {option_b}\nWhich option do you choose?"
                .into(),
            outcome_text: "You chose Option {label}. {result} Your total is now {total} points.".into(),
            probe_text: "How happy are you right now? Reply with a whole number from 0 (very unhappy) \
                to 100 (very happy)."
                .into(),
            choice_clarification: "Please reply with exactly \"Option A\" or \"Option B\".".into(),
            rating_clarification: "Please reply with a single whole number between 0 and 100.".into(),
            option_labels: ["A".into(), "B".into()],
        }
    }
}

fn fill(template: &str, slots: &[(&str, String)]) -> String {
    slots.iter().fold(template.to_string(), |s, (k, v)| {
        s.replace(&format!("{{{k}}}"), v)
    })
}

fn stake(v: f64) -> String {
    if v > 0.0 {
        format!("win {v} points")
    } else if v < 0.0 {
        format!("lose {} points", -v)
    } else {
        "get 0 points".into()
    }
}

pub fn describe_certain(trial: &TrialSpec) -> String {
    let s = stake(trial.certain_value);
    let mut c = s.chars();
    let first = c.next().map(|f| f.to_ascii_uppercase()).unwrap_or_default();
    format!("{first}{} for sure.", c.as_str())
}

pub fn describe_gamble(trial: &TrialSpec) -> String {
    format!(
        "50% chance to {} and 50% chance to {}.",
        stake(trial.gamble_gain),
        stake(trial.gamble_loss)
    )
}

impl PromptScript {
    pub fn render_trial(&self, number: usize, n_trials: usize, trial: &TrialSpec) -> String {
        let (first, second) = match trial.option_order {
            OptionOrder::GambleFirst => (describe_gamble(trial), describe_certain(trial)),
            OptionOrder::CertainFirst => (describe_certain(trial), describe_gamble(trial)),
        };
        fill(
            &self.trial_text,
            &[
                ("trial", number.to_string()),
                ("n_trials", n_trials.to_string()),
                ("label_a", self.option_labels[0].clone()),
                ("label_b", self.option_labels[1].clone()),
                ("option_a", first),
                ("option_b", second),
            ],
        )
    }

    pub fn render_outcome(&self, record: &TrialRecord, trial: &TrialSpec) -> String {
        let label = match OptionPosition::of(record.choice, trial.option_order) {
            OptionPosition::A => &self.option_labels[0],
            OptionPosition::B => &self.option_labels[1],
        };
        let result = if record.outcome > 0.0 {
            format!("You won {} points.", record.outcome)
        } else if record.outcome < 0.0 {
            format!("You lost {} points.", -record.outcome)
        } else {
            "You got 0 points.".to_string()
        };
        fill(
            &self.outcome_text,
            &[
                ("label", label.clone()),
                ("result", result),
                ("total", record.cumulative_points.to_string()),
            ],
        )
    }
}
