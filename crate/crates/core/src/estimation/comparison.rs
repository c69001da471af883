use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};

use super::{FitRecord, ModelId};

/// Summed-BIC comparison of one model space, relative to the model with
/// the lowest BIC summed over all groups.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub models: Vec<ModelId>,
    pub groups: Vec<String>,
    pub winner: ModelId,
    pub n_params: Vec<usize>,
    /// Per model, summed BIC minus the winner's, over every agent.
    pub total_delta: Vec<f64>,
    /// `group_delta[model][group]`, relative to the overall winner.
    pub group_delta: Vec<Vec<f64>>,
    pub mean_fit_quality: Vec<f64>,
    /// Lowest summed-BIC model within each group.
    pub group_winners: Vec<ModelId>,
}

impl ComparisonTable {
    pub fn model_index(&self, model: ModelId) -> Option<usize> {
        self.models.iter().position(|&m| m == model)
    }
}

/// Compares the models present in `fits`. Every (group, session) agent must
/// have exactly one fit per model.
pub fn compare_models(fits: &[FitRecord]) -> Result<ComparisonTable> {
    if fits.is_empty() {
        return Err(Error::IncompleteComparison("no fits supplied".into()));
    }
    let models: Vec<ModelId> = fits
        .iter()
        .map(|f| f.model)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let groups: Vec<String> = fits
        .iter()
        .map(|f| f.group.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut cells: BTreeMap<(&str, usize), BTreeMap<ModelId, &FitRecord>> = BTreeMap::new();
    for f in fits {
        let agent = cells.entry((f.group.as_str(), f.session)).or_default();
        if agent.insert(f.model, f).is_some() {
            return Err(Error::IncompleteComparison(format!(
                "duplicate {} fit for {} session {}",
                f.model, f.group, f.session
            )));
        }
    }
    for ((group, session), by_model) in &cells {
        if let Some(missing) = models.iter().find(|m| !by_model.contains_key(m)) {
            return Err(Error::IncompleteComparison(format!(
                "{group} session {session} has no {missing} fit"
            )));
        }
    }

    let gi = |g: &str| {
        groups
            .iter()
            .position(|x| x == g)
            .expect("group collected above")
    };
    let mut sums = vec![vec![0.0; groups.len()]; models.len()];
    let mut quality = vec![0.0; models.len()];
    let mut n_params = vec![0; models.len()];
    for ((group, _), by_model) in &cells {
        for (mi, m) in models.iter().enumerate() {
            let f = by_model[m];
            sums[mi][gi(group)] += f.bic;
            quality[mi] += f.fit_quality;
            n_params[mi] = f.n_params;
        }
    }
    let n_agents = cells.len() as f64;
    let totals: Vec<f64> = sums.iter().map(|row| row.iter().sum()).collect();
    let argmin = |vals: &mut dyn Iterator<Item = f64>| {
        let mut best = (0, f64::INFINITY);
        for (i, v) in vals.enumerate() {
            if v < best.1 {
                best = (i, v);
            }
        }
        best.0
    };
    let w = argmin(&mut totals.iter().copied());
    let group_winners = (0..groups.len())
        .map(|g| models[argmin(&mut sums.iter().map(|row| row[g]))])
        .collect();

    Ok(ComparisonTable {
        winner: models[w],
        n_params,
        total_delta: totals.iter().map(|t| t - totals[w]).collect(),
        group_delta: sums
            .iter()
            .map(|row| row.iter().zip(&sums[w]).map(|(a, b)| a - b).collect())
            .collect(),
        mean_fit_quality: quality.iter().map(|q| q / n_agents).collect(),
        group_winners,
        models,
        groups,
    })
}
