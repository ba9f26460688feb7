use std::collections::BTreeMap;

use super::{MatchedSample, PscoreSample};
use crate::stats::{mean, t_two_sided_p, variance};
use crate::{Error, Result};

/// Variance ratios outside this band are flagged.
pub const VARIANCE_RATIO_BAND: (f64, f64) = (0.80, 1.20);

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceStats {
    pub n_treated: usize,
    pub n_control: usize,
    pub mean_treated: f64,
    pub mean_control: f64,
    /// Standardised bias in percent; `None` when both variances are zero.
    pub bias: Option<f64>,
    pub t_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub variance_ratio: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceLine {
    pub covariate: String,
    pub before: BalanceStats,
    pub after: BalanceStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub lines: Vec<BalanceLine>,
}

impl BalanceReport {
    pub fn render(&self) -> String {
        let mut s = format!(
            "{:<20} {:<9} {:>10} {:>10} {:>8} {:>8} {:>7} {:>7}\n",
            "covariate", "sample", "treated", "control", "%bias", "t", "p>|t|", "V(T)/V(C)"
        );
        let f = |v: Option<f64>, p: usize| v.map_or("n/a".to_string(), |v| format!("{v:.p$}"));
        for l in &self.lines {
            for (label, b) in [("unmatched", &l.before), ("matched", &l.after)] {
                s.push_str(&format!(
                    "{:<20} {:<9} {:>10.3} {:>10.3} {:>8} {:>8} {:>7} {:>7}{}\n",
                    l.covariate,
                    label,
                    b.mean_treated,
                    b.mean_control,
                    f(b.bias, 1),
                    f(b.t_stat, 2),
                    f(b.p_value, 3),
                    f(b.variance_ratio, 2),
                    if b.flagged { "*" } else { "" }
                ));
            }
        }
        s
    }
}

/// Two-group comparison of one covariate. The t statistic is the pooled
/// equal-variance two-sample test.
pub fn balance_stats(treated: &[f64], control: &[f64]) -> BalanceStats {
    let (n1, n0) = (treated.len(), control.len());
    let (m1, m0) = (mean(treated), mean(control));
    let (v1, v0) = (variance(treated), variance(control));
    let pooled_sd = ((v1 + v0) / 2.0).sqrt();
    let bias = (pooled_sd > 0.0).then(|| 100.0 * (m1 - m0) / pooled_sd);
    let df = (n1 + n0) as f64 - 2.0;
    let t_stat = if n1 > 1 && n0 > 1 {
        let s2 = ((n1 - 1) as f64 * v1 + (n0 - 1) as f64 * v0) / df;
        let se = (s2 * (1.0 / n1 as f64 + 1.0 / n0 as f64)).sqrt();
        (se > 0.0).then(|| (m1 - m0) / se)
    } else {
        None
    };
    let variance_ratio = (v0 > 0.0).then(|| v1 / v0);
    BalanceStats {
        n_treated: n1,
        n_control: n0,
        mean_treated: m1,
        mean_control: m0,
        bias,
        t_stat,
        p_value: t_stat.map(|t| t_two_sided_p(t, df)),
        variance_ratio,
        flagged: variance_ratio.is_some_and(|r| r < VARIANCE_RATIO_BAND.0 || r > VARIANCE_RATIO_BAND.1),
    }
}

/// Balance of every numeric covariate before matching (all treated against
/// all controls) and after (matched pairs only).
pub fn balance_diagnostics(sample: &PscoreSample, matched: &MatchedSample) -> Result<BalanceReport> {
    if matched.pairs.is_empty() {
        return Err(Error::Precondition("balance diagnostics need at least one matched pair".into()));
    }
    let by_key: BTreeMap<(&str, i32), &super::MatchUnit> =
        sample.units.iter().map(|u| ((u.firm_id.as_str(), u.year), u)).collect();
    let lines = sample
        .numeric
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let t_all: Vec<f64> = sample.treated().map(|u| u.x[j]).collect();
            let c_all: Vec<f64> = sample.controls().map(|u| u.x[j]).collect();
            let t_m: Vec<f64> = matched.pairs.iter().map(|p| by_key[&(p.treated.as_str(), p.group)].x[j]).collect();
            let c_m: Vec<f64> = matched.pairs.iter().map(|p| by_key[&(p.control.as_str(), p.group)].x[j]).collect();
            BalanceLine {
                covariate: c.label().to_string(),
                before: balance_stats(&t_all, &c_all),
                after: balance_stats(&t_m, &c_m),
            }
        })
        .collect();
    Ok(BalanceReport { lines })
}
