use serde::Serialize;

use crate::error::{Error, Result};

use super::dist::f_sf;
use super::GroupSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Anova {
    pub f: f64,
    pub p: f64,
    pub eta_squared: f64,
    pub df_between: f64,
    pub df_within: f64,
}

pub fn one_way_anova(groups: &[GroupSample]) -> Result<Anova> {
    if groups.len() < 2 {
        return Err(Error::InvalidArgument(
            "ANOVA needs at least 2 groups".into(),
        ));
    }
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return Err(Error::InvalidArgument(format!(
            "ANOVA needs at least 2 values per group; {} has {}",
            g.label,
            g.len()
        )));
    }
    let n: usize = groups.iter().map(GroupSample::len).sum();
    let grand = groups.iter().flat_map(|g| &g.values).sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = g.mean();
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.values.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let ss_total = ss_between + ss_within;
    if ss_total == 0.0 {
        return Err(Error::UndefinedStatistic("zero total variance".into()));
    }
    if ss_within == 0.0 {
        return Err(Error::UndefinedStatistic(
            "zero within-group variance".into(),
        ));
    }
    let df_between = (groups.len() - 1) as f64;
    let df_within = (n - groups.len()) as f64;
    let f = (ss_between / df_between) / (ss_within / df_within);
    Ok(Anova {
        f,
        p: f_sf(f, df_between, df_within),
        eta_squared: ss_between / ss_total,
        df_between,
        df_within,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::two_sample_t;

    fn g(label: &str, v: &[f64]) -> GroupSample {
        GroupSample::new(label, v.to_vec()).unwrap()
    }

    #[test]
    fn textbook_fixture() {
        let r = one_way_anova(&[
            g("a", &[1., 2., 3.]),
            g("b", &[2., 3., 4.]),
            g("c", &[3., 4., 5.]),
        ])
        .unwrap();
        assert!((r.f - 3.0).abs() < 1e-12);
        assert!((r.eta_squared - 0.5).abs() < 1e-12);
        assert_eq!((r.df_between, r.df_within), (2.0, 6.0));
        assert!((r.p - 0.125).abs() < 1e-12);
    }

    #[test]
    fn equal_means_give_zero_f() {
        let r = one_way_anova(&[g("a", &[1., 3.]), g("b", &[0., 4.])]).unwrap();
        assert_eq!(r.f, 0.0);
        assert_eq!(r.p, 1.0);
    }

    #[test]
    fn two_groups_match_squared_t() {
        let (a, b) = (g("a", &[1.0, 4.5, 2.2, 3.9]), g("b", &[5.0, 3.3, 6.1]));
        let r = one_way_anova(&[a.clone(), b.clone()]).unwrap();
        let t = two_sample_t(&a, &b).unwrap();
        assert!((r.f - t.t * t.t).abs() < 1e-9);
        assert!((r.p - t.p).abs() < 1e-10);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            one_way_anova(&[g("a", &[1., 1.]), g("b", &[1., 1.])]),
            Err(Error::UndefinedStatistic(_))
        ));
        assert!(one_way_anova(&[g("a", &[1., 2.])]).is_err());
        assert!(one_way_anova(&[g("a", &[1., 2.]), g("b", &[1.])]).is_err());
    }
}
