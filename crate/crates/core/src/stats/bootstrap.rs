use rand::seq::index;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::rng;

use super::ttest::two_sample_t;
use super::GroupSample;

/// Largest tolerated share of iterations whose t statistic is undefined.
pub const MAX_DEGENERATE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bootstrap {
    /// `2 * min(frac(t <= 0), frac(t >= 0))`, capped at 1.
    pub p: f64,
    /// True when every usable t fell on one side, so `p` is only known to
    /// be below `1 / iters`.
    pub below_resolution: bool,
    pub iters: usize,
    pub degenerate: usize,
    pub mean_t: f64,
    pub frac_nonpositive: f64,
    pub frac_nonnegative: f64,
}

/// Compares `model` against size-matched subsamples of `human`, drawn
/// without replacement, one RNG stream per iteration.
pub fn bootstrap_vs_human(
    model: &GroupSample,
    human: &GroupSample,
    iters: usize,
    seed: u64,
    exec: Exec,
) -> Result<Bootstrap> {
    if iters == 0 {
        return Err(Error::InvalidArgument(
            "bootstrap needs at least one iteration".into(),
        ));
    }
    if human.len() < model.len() {
        return Err(Error::InvalidArgument(format!(
            "human pool {} ({}) is smaller than model group {} ({})",
            human.label,
            human.len(),
            model.label,
            model.len()
        )));
    }
    if model.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "model group {} needs at least 2 values",
            model.label
        )));
    }
    let ts: Vec<Option<f64>> = exec.map_range(iters, |i| {
        let mut r = rng::stream(rng::derive_seed(seed, i as u64), rng::BOOTSTRAP);
        let values = index::sample(&mut r, human.len(), model.len())
            .into_iter()
            .map(|k| human.values[k])
            .collect();
        let sub = GroupSample {
            label: human.label.clone(),
            values,
        };
        match two_sample_t(model, &sub) {
            Ok(t) => Some(t.t),
            Err(Error::UndefinedStatistic(_)) => None,
            Err(_) => unreachable!("group sizes checked above"),
        }
    });
    let usable: Vec<f64> = ts.iter().flatten().copied().collect();
    let degenerate = iters - usable.len();
    if degenerate as f64 > MAX_DEGENERATE_FRACTION * iters as f64 {
        return Err(Error::UndefinedStatistic(format!(
            "{degenerate} of {iters} bootstrap iterations had zero variance"
        )));
    }
    let n = usable.len() as f64;
    let nonpos = usable.iter().filter(|&&t| t <= 0.0).count() as f64 / n;
    let nonneg = usable.iter().filter(|&&t| t >= 0.0).count() as f64 / n;
    let p = (2.0 * nonpos.min(nonneg)).min(1.0);
    Ok(Bootstrap {
        p,
        below_resolution: p == 0.0,
        iters,
        degenerate,
        mean_t: usable.iter().sum::<f64>() / n,
        frac_nonpositive: nonpos,
        frac_nonnegative: nonneg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(label: &str, v: Vec<f64>) -> GroupSample {
        GroupSample::new(label, v).unwrap()
    }

    fn human_pool() -> GroupSample {
        g(
            "human",
            (0..200).map(|i| ((i * 37) % 101) as f64 / 10.0).collect(),
        )
    }

    #[test]
    fn far_group_is_below_resolution() {
        let model = g("m", (0..30).map(|i| 100.0 + i as f64 * 0.1).collect());
        let r = bootstrap_vs_human(&model, &human_pool(), 1000, 1, Exec::default()).unwrap();
        assert_eq!(r.p, 0.0);
        assert!(r.below_resolution);
        assert_eq!(r.frac_nonnegative, 1.0);
    }

    #[test]
    fn deterministic_across_exec_modes() {
        let model = g("m", human_pool().values[..30].to_vec());
        let a = bootstrap_vs_human(&model, &human_pool(), 300, 9, Exec::Sequential).unwrap();
        let b = bootstrap_vs_human(&model, &human_pool(), 300, 9, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(a.p > 0.0 && a.p <= 1.0);
    }

    #[test]
    fn whole_pool_gives_balanced_p_of_one() {
        // the only possible subsample is the pool itself, so every t is 0
        let pool = g("human", vec![1.0, 2.0, 3.0, 4.0]);
        let r = bootstrap_vs_human(&pool.clone(), &pool, 50, 2, Exec::Sequential).unwrap();
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let small = g("h", vec![1.0, 2.0]);
        let big = g("m", vec![1.0, 2.0, 3.0]);
        assert!(bootstrap_vs_human(&big, &small, 10, 0, Exec::Sequential).is_err());
        assert!(bootstrap_vs_human(&small, &big, 0, 0, Exec::Sequential).is_err());
        let flat = g("h", vec![5.0; 10]);
        let flat_model = g("m", vec![5.0; 3]);
        assert!(matches!(
            bootstrap_vs_human(&flat_model, &flat, 10, 0, Exec::Sequential),
            Err(Error::UndefinedStatistic(_))
        ));
    }
}
