//! Affect fits with the linear weights profiled out.
//!
//! For a fixed forgetting factor the prediction is linear in
//! `(beta0, weights)`, so the weights come from box-constrained least
//! squares and only `gamma` is searched numerically.

use nalgebra::{DMatrix, DVector};

use crate::affect::{
    design_rows, regressors_from_transcript, AffectModel, AffectParams, AffectRegressorRow,
};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, Bounds};
use crate::rng;
use crate::task::SessionTranscript;

use super::{bic, select_best, FitOptions, FitResult, FittedParams, StartOutcome};

pub const WEIGHT_BOUNDS_BASELINE: (f64, f64) = (-100.0, 200.0);
pub const WEIGHT_BOUNDS_SLOPE: (f64, f64) = (-10.0, 10.0);
const MIN_RATINGS: usize = 6;
const VARIANCE_FLOOR: f64 = 1e-12;

/// Regressor rows plus observed ratings at 1-based probe trials.
#[derive(Debug, Clone, PartialEq)]
pub struct AffectData {
    pub rows: Vec<AffectRegressorRow>,
    pub probes: Vec<usize>,
    pub ratings: Vec<f64>,
}

impl AffectData {
    pub fn from_transcript(transcript: &SessionTranscript) -> Self {
        AffectData {
            rows: regressors_from_transcript(transcript),
            probes: transcript.ratings.iter().map(|r| r.trial).collect(),
            ratings: transcript
                .ratings
                .iter()
                .map(|r| f64::from(r.rating))
                .collect(),
        }
    }

    fn sst(&self) -> f64 {
        let n = self.ratings.len() as f64;
        let mean = self.ratings.iter().sum::<f64>() / n;
        self.ratings.iter().map(|r| (r - mean).powi(2)).sum()
    }
}

fn weight_bounds(k: usize) -> (f64, f64) {
    if k == 0 {
        WEIGHT_BOUNDS_BASELINE
    } else {
        WEIGHT_BOUNDS_SLOPE
    }
}

/// Least squares on the columns in `free`, with the remaining columns held
/// at `fixed`. Rank-deficient systems get the minimum-norm solution.
fn solve_subset(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    free: &[usize],
    fixed: &[(usize, f64)],
) -> Option<DVector<f64>> {
    let mut target = y.clone();
    for &(k, v) in fixed {
        target -= x.column(k) * v;
    }
    let p = x.ncols();
    let mut w = DVector::zeros(p);
    for &(k, v) in fixed {
        w[k] = v;
    }
    if free.is_empty() {
        return Some(w);
    }
    let sub = x.select_columns(free);
    let xtx = sub.transpose() * &sub;
    let xty = sub.transpose() * &target;
    let diag_max = xtx.diagonal().max();
    let diag_min = xtx.diagonal().min();
    let sol = match xtx.clone().cholesky() {
        Some(ch) if diag_min > 1e-12 * diag_max => ch.solve(&xty),
        _ => {
            let svd = sub.svd(true, true);
            let tol = svd.singular_values.max() * 1e-12;
            svd.solve(&target, tol).ok()?
        }
    };
    for (i, &k) in free.iter().enumerate() {
        w[k] = sol[i];
    }
    Some(w)
}

fn in_bounds(w: &DVector<f64>) -> bool {
    w.iter().enumerate().all(|(k, v)| {
        let (lo, hi) = weight_bounds(k);
        (lo..=hi).contains(v)
    })
}

fn sse(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>) -> f64 {
    (y - x * w).norm_squared()
}

/// Least-squares weights `[beta0, w1, ..]` at `gamma` and their SSE.
pub fn profile_weights(
    data: &AffectData,
    model: AffectModel,
    gamma: f64,
) -> Result<(Vec<f64>, f64)> {
    let p = model.n_regressors() + 1;
    let design = design_rows(model, &data.rows, &data.probes, gamma);
    if design.len() != data.ratings.len() {
        return Err(Error::InvalidArgument(
            "probe beyond recorded trials".into(),
        ));
    }
    let x = DMatrix::from_fn(design.len(), p, |i, k| design[i][k]);
    let y = DVector::from_column_slice(&data.ratings);
    let all: Vec<usize> = (0..p).collect();
    let unconstrained = solve_subset(&x, &y, &all, &[])
        .ok_or_else(|| Error::EstimationFailure("least squares did not solve".into()))?;
    if in_bounds(&unconstrained) {
        let s = sse(&x, &y, &unconstrained);
        return Ok((unconstrained.iter().copied().collect(), s));
    }

    // Box-constrained least squares is convex: its optimum is the
    // unconstrained optimum of some face, so enumerate every face.
    let mut best: Option<(DVector<f64>, f64)> = None;
    for code in 0..3usize.pow(p as u32) {
        let mut free = Vec::new();
        let mut fixed = Vec::new();
        let mut c = code;
        for k in 0..p {
            let (lo, hi) = weight_bounds(k);
            match c % 3 {
                0 => free.push(k),
                1 => fixed.push((k, lo)),
                _ => fixed.push((k, hi)),
            }
            c /= 3;
        }
        let Some(w) = solve_subset(&x, &y, &free, &fixed) else {
            continue;
        };
        if !in_bounds(&w) {
            continue;
        }
        let s = sse(&x, &y, &w);
        if best.as_ref().is_none_or(|(_, b)| s < *b) {
            best = Some((w, s));
        }
    }
    let (w, s) = best.ok_or_else(|| Error::EstimationFailure("no feasible weights".into()))?;
    Ok((w.iter().copied().collect(), s))
}

/// Gaussian negative log-likelihood with the variance profiled as SSE/n.
fn gaussian_nll(sse: f64, n: usize) -> f64 {
    let n = n as f64;
    let var = (sse / n).max(VARIANCE_FLOOR);
    0.5 * n * ((2.0 * std::f64::consts::PI * var).ln() + 1.0)
}

pub fn fit_affect(
    transcript: &SessionTranscript,
    model: AffectModel,
    opts: &FitOptions,
) -> Result<FitResult> {
    fit_affect_data(&AffectData::from_transcript(transcript), model, opts)
}

pub fn fit_affect_data(
    data: &AffectData,
    model: AffectModel,
    opts: &FitOptions,
) -> Result<FitResult> {
    let n = data.ratings.len();
    if n < MIN_RATINGS {
        return Err(Error::InsufficientData(format!(
            "affect fit needs at least {MIN_RATINGS} ratings, got {n}"
        )));
    }
    if opts.n_starts == 0 {
        return Err(Error::InvalidArgument("n_starts must be at least 1".into()));
    }
    let sst = data.sst();
    if sst == 0.0 {
        return Err(Error::DegenerateData("ratings have zero variance".into()));
    }

    let bounds = Bounds::new([(0.0, 1.0)]);
    let mut start_rng = rng::stream(opts.seed, rng::STARTS);
    let starts: Vec<Vec<f64>> = (0..opts.n_starts)
        .map(|_| bounds.sample(&mut start_rng))
        .collect();
    let objective =
        |x: &[f64]| profile_weights(data, model, x[0]).map_or(f64::INFINITY, |(_, s)| s);

    let outcomes = opts.exec.map_slice(&starts, |_, x0| {
        let m = nelder_mead(objective, x0, &bounds, &opts.optimizer);
        StartOutcome {
            start: x0.clone(),
            start_nll: gaussian_nll(objective(x0), n),
            x: m.x,
            nll: gaussian_nll(m.fx, n),
            evals: m.evals,
            converged: m.converged,
        }
    });
    let best = select_best(&outcomes)?;
    let gamma = outcomes[best].x[0];
    let (weights, sse) = profile_weights(data, model, gamma)?;
    let nll = gaussian_nll(sse, n);
    Ok(FitResult {
        params: FittedParams::Affect(AffectParams::from_weights(model, &weights, gamma)),
        nll,
        bic: bic(nll, model.n_params(), n),
        fit_quality: 1.0 - sse / sst,
        n_obs: n,
        n_params: model.n_params(),
        starts_used: outcomes.iter().filter(|o| o.converged).count(),
        best_start_index: best,
        starts: outcomes,
    })
}
