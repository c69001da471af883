use serde::Serialize;

use crate::error::{Error, Result};

use super::dist::t_two_tailed;
use super::summary::{mean, sample_variance};
use super::GroupSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    /// Cohen's d.
    pub d: f64,
}

fn check_sizes(a: &GroupSample, b: &GroupSample) -> Result<()> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "t test needs at least 2 values per group ({} has {}, {} has {})",
            a.label,
            a.len(),
            b.label,
            b.len()
        )));
    }
    Ok(())
}

/// Pooled-variance Student t; d uses the pooled SD.
pub fn two_sample_t(a: &GroupSample, b: &GroupSample) -> Result<TTest> {
    check_sizes(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let pooled =
        ((na - 1.0) * sample_variance(&a.values) + (nb - 1.0) * sample_variance(&b.values)) / df;
    if pooled <= 0.0 {
        return Err(Error::UndefinedStatistic(format!(
            "zero pooled variance comparing {} and {}",
            a.label, b.label
        )));
    }
    let diff = a.mean() - b.mean();
    let t = diff / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    Ok(TTest {
        t,
        df,
        p: t_two_tailed(t, df),
        d: diff / pooled.sqrt(),
    })
}

/// Welch's unequal-variance t with Satterthwaite df; d still uses the
/// pooled SD.
pub fn welch_t(a: &GroupSample, b: &GroupSample) -> Result<TTest> {
    let student = two_sample_t(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (
        sample_variance(&a.values) / na,
        sample_variance(&b.values) / nb,
    );
    let t = (a.mean() - b.mean()) / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(TTest {
        t,
        df,
        p: t_two_tailed(t, df),
        d: student.d,
    })
}

/// One-sample t against zero; d = mean / SD.
pub fn one_sample_t(values: &[f64]) -> Result<TTest> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "one-sample t needs at least 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let sd = sample_variance(values).sqrt();
    if sd == 0.0 {
        return Err(Error::UndefinedStatistic(
            "zero variance in one-sample t".into(),
        ));
    }
    let m = mean(values);
    let t = m / (sd / n.sqrt());
    Ok(TTest {
        t,
        df: n - 1.0,
        p: t_two_tailed(t, n - 1.0),
        d: m / sd,
    })
}
