//! Nearest-neighbour propensity matching and the two-way fixed-effects
//! difference-in-differences regression on the matched sample.
//!
//! Matching units are firms in the year before their takeover; controls are
//! never-treated firms observed in the same year. Each control is used at
//! most once across all cohorts.

mod balance;
mod matching;
mod twfe;

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;

pub use balance::{balance_diagnostics, balance_stats, BalanceLine, BalanceReport, BalanceStats, VARIANCE_RATIO_BAND};
pub use matching::{nn_match, Candidate, MatchOptions, MatchedSample, Pair};
pub use twfe::{matched_panel, twfe_did, FixedEffect, TwfeObs, TwfeResult, TwfeSpec};

use crate::logit::{fit_logit, LogitFit, LogitOptions};
use crate::panel::Panel;
use crate::table::{fmt_f64, fmt_opt, Manifest, TableWriter};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MatchCovariate {
    Size,
    CapitalIntensity,
    Tfp,
    Age,
    Country,
    Industry,
    Year,
}

impl MatchCovariate {
    pub const ALL: [MatchCovariate; 7] = [
        MatchCovariate::Size,
        MatchCovariate::CapitalIntensity,
        MatchCovariate::Tfp,
        MatchCovariate::Age,
        MatchCovariate::Country,
        MatchCovariate::Industry,
        MatchCovariate::Year,
    ];

    pub fn label(self) -> &'static str {
        match self {
            MatchCovariate::Size => "size",
            MatchCovariate::CapitalIntensity => "capital_intensity",
            MatchCovariate::Tfp => "tfp",
            MatchCovariate::Age => "age",
            MatchCovariate::Country => "country",
            MatchCovariate::Industry => "industry",
            MatchCovariate::Year => "year",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(
            self,
            MatchCovariate::Size | MatchCovariate::CapitalIntensity | MatchCovariate::Tfp | MatchCovariate::Age
        )
    }
}

impl std::str::FromStr for MatchCovariate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.label() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown matching covariate `{s}`")))
    }
}

/// One firm at its matching year.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchUnit {
    pub firm_id: String,
    pub year: i32,
    /// Takeover year for treated firms.
    pub cohort: Option<i32>,
    pub country: String,
    pub industry: String,
    /// Numeric covariates in the order of [`PscoreSample::numeric`].
    pub x: Vec<f64>,
    pub pscore: f64,
}

impl MatchUnit {
    pub fn treated(&self) -> bool {
        self.cohort.is_some()
    }

    pub fn candidate(&self) -> Candidate {
        Candidate {
            firm_id: self.firm_id.clone(),
            group: self.year,
            pscore: self.pscore,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PscoreSample {
    pub units: Vec<MatchUnit>,
    pub numeric: Vec<MatchCovariate>,
    pub fit: LogitFit,
    /// Units lost for a missing covariate.
    pub missing: usize,
}

impl PscoreSample {
    pub fn treated(&self) -> impl Iterator<Item = &MatchUnit> {
        self.units.iter().filter(|u| u.treated())
    }

    pub fn controls(&self) -> impl Iterator<Item = &MatchUnit> {
        self.units.iter().filter(|u| !u.treated())
    }
}

fn dummies(values: &[&str]) -> Vec<(String, Vec<f64>)> {
    let levels: BTreeSet<&str> = values.iter().copied().collect();
    levels
        .into_iter()
        .skip(1)
        .map(|lv| (lv.to_string(), values.iter().map(|v| f64::from(u8::from(*v == lv))).collect()))
        .collect()
}

/// Fits a pooled logit of treatment on covariates measured in the year
/// before takeover (treated) or the same calendar year (controls).
pub fn fit_match_pscores(panel: &Panel, covariates: &[MatchCovariate], logit: LogitOptions) -> Result<PscoreSample> {
    let derived = panel.derived()?;
    let cohorts: BTreeSet<i32> = panel.treatments().values().filter_map(|t| t.cohort).collect();
    let numeric: Vec<MatchCovariate> = covariates.iter().copied().filter(|c| c.is_numeric()).collect();
    let mut units = Vec::new();
    let mut missing = 0;
    for (r, d) in panel.rows().iter().zip(derived) {
        let cohort = panel.cohort(&r.firm_id);
        let keep = match cohort {
            Some(g) => r.year == g - 1,
            None => cohorts.contains(&(r.year + 1)),
        };
        if !keep {
            continue;
        }
        let x: Option<Vec<f64>> = numeric
            .iter()
            .map(|c| match c {
                MatchCovariate::Size => d.log_employees,
                MatchCovariate::CapitalIntensity => d.log_capital_intensity(),
                MatchCovariate::Tfp => d.tfp,
                MatchCovariate::Age => d.log_age(),
                _ => unreachable!(),
            })
            .collect();
        let Some(x) = x else {
            missing += 1;
            continue;
        };
        units.push(MatchUnit {
            firm_id: r.firm_id.clone(),
            year: r.year,
            cohort,
            country: r.country.clone(),
            industry: r.industry.clone(),
            x,
            pscore: f64::NAN,
        });
    }
    if !units.iter().any(MatchUnit::treated) || units.iter().all(MatchUnit::treated) {
        return Err(Error::Precondition(
            "matching needs treated firms and never-treated firms observed in the year before takeover".into(),
        ));
    }

    let mut names = vec!["const".to_string()];
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; units.len()]];
    for (j, c) in numeric.iter().enumerate() {
        names.push(c.label().to_string());
        cols.push(units.iter().map(|u| u.x[j]).collect());
    }
    for c in covariates.iter().filter(|c| !c.is_numeric()) {
        let values: Vec<String> = units
            .iter()
            .map(|u| match c {
                MatchCovariate::Country => u.country.clone(),
                MatchCovariate::Industry => u.industry.clone(),
                _ => u.year.to_string(),
            })
            .collect();
        let refs: Vec<&str> = values.iter().map(String::as_str).collect();
        for (lv, col) in dummies(&refs) {
            names.push(format!("{}_{lv}", c.label()));
            cols.push(col);
        }
    }
    let x = DMatrix::from_fn(units.len(), cols.len(), |i, j| cols[j][i]);
    let d: Vec<f64> = units.iter().map(|u| f64::from(u8::from(u.treated()))).collect();
    let fit = fit_logit(&x, &d, &names, logit)?;
    for (u, p) in units.iter_mut().zip(&fit.prob) {
        u.pscore = *p;
    }
    Ok(PscoreSample {
        units,
        numeric,
        fit,
        missing,
    })
}

/// Matches treated units to controls of the same year.
pub fn match_sample(sample: &PscoreSample, opts: &MatchOptions) -> MatchedSample {
    let treated: Vec<Candidate> = sample.treated().map(MatchUnit::candidate).collect();
    let controls: Vec<Candidate> = sample.controls().map(MatchUnit::candidate).collect();
    nn_match(&treated, &controls, opts)
}

pub fn write_matched_pairs_csv(path: &Path, matched: &MatchedSample, manifest: Option<&Manifest>) -> Result<()> {
    let mut w = TableWriter::create(
        path,
        manifest,
        &["treated_id", "control_id", "year", "treated_pscore", "control_pscore", "distance"],
    )?;
    for p in &matched.pairs {
        w.row([
            p.treated.clone(),
            p.control.clone(),
            p.group.to_string(),
            fmt_f64(p.treated_pscore),
            fmt_f64(p.control_pscore),
            fmt_f64(p.distance),
        ])?;
    }
    w.finish()
}

pub fn write_balance_csv(path: &Path, report: &BalanceReport, manifest: Option<&Manifest>) -> Result<()> {
    let mut w = TableWriter::create(
        path,
        manifest,
        &[
            "covariate",
            "sample",
            "mean_treated",
            "mean_control",
            "pct_bias",
            "t",
            "p",
            "variance_ratio",
            "flag",
        ],
    )?;
    for line in &report.lines {
        for (label, s) in [("unmatched", &line.before), ("matched", &line.after)] {
            w.row([
                line.covariate.clone(),
                label.to_string(),
                fmt_f64(s.mean_treated),
                fmt_f64(s.mean_control),
                fmt_opt(s.bias),
                fmt_opt(s.t_stat),
                fmt_opt(s.p_value),
                fmt_opt(s.variance_ratio),
                if s.flagged { "*" } else { "" }.to_string(),
            ])?;
        }
    }
    w.finish()
}

pub fn write_twfe_csv(path: &Path, results: &[(String, TwfeResult)], matched: bool, manifest: Option<&Manifest>) -> Result<()> {
    let mut w = TableWriter::create(
        path,
        manifest,
        &[
            "outcome",
            "coefficient",
            "se",
            "t",
            "p",
            "n_treated",
            "n_untreated",
            "n_obs",
            "clusters",
            "matched",
        ],
    )?;
    for (outcome, r) in results {
        w.row([
            outcome.clone(),
            fmt_f64(r.coefficient),
            fmt_f64(r.se),
            fmt_f64(r.t_stat),
            fmt_f64(r.p_value),
            r.n_treated.to_string(),
            r.n_untreated.to_string(),
            r.n_obs.to_string(),
            r.clusters.to_string(),
            if matched { "yes" } else { "no" }.to_string(),
        ])?;
    }
    w.finish()
}

#[cfg(test)]
mod tests;
