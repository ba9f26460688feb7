use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::panel::{DerivedVars, FirmYear, Panel};
use crate::{Error, Result};

/// Pre-treatment characteristics available to the propensity and outcome
/// models. Monetary covariates enter in logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Covariate {
    /// Log employees.
    Size,
    /// ln(1 + years since incorporation).
    Age,
    /// Log fixed assets per employee.
    CapitalIntensity,
    /// Log TFP from the production-function fit.
    Tfp,
    /// 2-digit industry indicators.
    Industry,
}

impl Covariate {
    pub const NUMERIC: [Covariate; 4] = [Covariate::Size, Covariate::Age, Covariate::CapitalIntensity, Covariate::Tfp];

    pub fn label(self) -> &'static str {
        match self {
            Covariate::Size => "size",
            Covariate::Age => "age",
            Covariate::CapitalIntensity => "capital_intensity",
            Covariate::Tfp => "tfp",
            Covariate::Industry => "industry",
        }
    }

    pub(crate) fn slot(self) -> Option<usize> {
        Covariate::NUMERIC.iter().position(|c| *c == self)
    }
}

impl fmt::Display for Covariate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Covariate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "size" => Ok(Covariate::Size),
            "age" => Ok(Covariate::Age),
            "capital_intensity" => Ok(Covariate::CapitalIntensity),
            "tfp" => Ok(Covariate::Tfp),
            "industry" => Ok(Covariate::Industry),
            other => Err(Error::Config(format!("unknown covariate `{other}`"))),
        }
    }
}

/// Outcome variable of the difference-in-differences.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    LogSales,
    MarketShare,
    LogCapitalIntensity,
    Tfp,
    VariableCostRatio,
    /// Externally supplied values keyed by `(firm_id, year)`, e.g. log markups.
    Custom {
        name: String,
        values: BTreeMap<(String, i32), f64>,
    },
}

impl Outcome {
    /// Value of the outcome on one firm-year.
    pub fn value(&self, row: &FirmYear, d: &DerivedVars) -> Option<f64> {
        match self {
            Outcome::LogSales => Some(d.log_sales),
            Outcome::MarketShare => Some(d.market_share),
            Outcome::LogCapitalIntensity => d.log_capital_intensity(),
            Outcome::Tfp => d.tfp,
            Outcome::VariableCostRatio => Some(d.variable_cost_ratio),
            Outcome::Custom { values, .. } => values.get(&(row.firm_id.clone(), row.year)).copied(),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Outcome::LogSales => "log_sales",
            Outcome::MarketShare => "market_share",
            Outcome::LogCapitalIntensity => "log_capital_intensity",
            Outcome::Tfp => "tfp",
            Outcome::VariableCostRatio => "variable_cost_ratio",
            Outcome::Custom { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DidObs {
    pub outcome: Option<f64>,
    pub industry: String,
    /// Values of [`Covariate::NUMERIC`], in that order.
    pub covariates: [Option<f64>; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DidFirm {
    pub id: String,
    pub cohort: Option<i32>,
    pub obs: BTreeMap<i32, DidObs>,
}

/// Firm histories in the shape the group-time estimator consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct DidData {
    pub outcome_name: String,
    pub firms: Vec<DidFirm>,
    pub years: Vec<i32>,
    /// Firms already treated in the first sample year, left out entirely.
    pub dropped_early: usize,
}

impl DidData {
    /// Builds from firm histories, sorting by firm id.
    ///
    /// Firms treated no later than the first year lack a pre-period and are
    /// dropped; cohorts after the last year are recoded as never treated.
    pub fn new(outcome_name: &str, mut firms: Vec<DidFirm>) -> Result<Self> {
        let years: BTreeSet<i32> = firms.iter().flat_map(|f| f.obs.keys().copied()).collect();
        let (Some(&first), Some(&last)) = (years.first(), years.last()) else {
            return Err(Error::Precondition("no observations for the difference-in-differences".into()));
        };
        firms.sort_by(|a, b| a.id.cmp(&b.id));
        for w in firms.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::Integrity(format!("firm {} listed twice", w[0].id)));
            }
        }
        let before = firms.len();
        firms.retain(|f| f.cohort.map_or(true, |g| g > first));
        for f in &mut firms {
            if f.cohort.is_some_and(|g| g > last) {
                f.cohort = None;
            }
        }
        Ok(Self {
            outcome_name: outcome_name.to_string(),
            dropped_early: before - firms.len(),
            firms,
            years: years.into_iter().collect(),
        })
    }

    pub fn from_panel(panel: &Panel, outcome: &Outcome) -> Result<Self> {
        let derived = panel.derived()?;
        let mut by_firm: BTreeMap<&str, BTreeMap<i32, DidObs>> = BTreeMap::new();
        for (r, d) in panel.rows().iter().zip(derived) {
            let y = outcome.value(r, d);
            by_firm.entry(&r.firm_id).or_default().insert(
                r.year,
                DidObs {
                    outcome: y,
                    industry: r.industry.clone(),
                    covariates: [d.log_employees, d.log_age(), d.log_capital_intensity(), d.tfp],
                },
            );
        }
        let firms = by_firm
            .into_iter()
            .map(|(id, obs)| DidFirm {
                id: id.to_string(),
                cohort: panel.cohort(id),
                obs,
            })
            .collect();
        Self::new(outcome.name(), firms)
    }

    pub fn len(&self) -> usize {
        self.firms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.firms.is_empty()
    }

    /// Treatment cohorts that have an observed base period.
    pub fn cohorts(&self) -> Vec<i32> {
        let set: BTreeSet<i32> = self.firms.iter().filter_map(|f| f.cohort).collect();
        set.into_iter().collect()
    }

    pub fn cohort_size(&self, g: i32) -> usize {
        self.firms.iter().filter(|f| f.cohort == Some(g)).count()
    }
}
