//! Firm-year panel: ingestion, validation, deflation and derived variables.
//!
//! A [`Panel`] is immutable once built. Every transformation
//! ([`Panel::apply_deflators`], [`Panel::derive_variables`],
//! [`Panel::trim_tails`], ...) consumes the panel and returns a new one, so
//! downstream estimators can share a `&Panel` across threads.

mod derive;
mod io;

use std::collections::{BTreeMap, BTreeSet};

pub use derive::DerivedVars;
pub use io::{load_deflators, load_panel, load_treatments, write_firms_csv, write_deflators_csv, write_treatments_csv, ColumnMapping};

use crate::{Error, Result};

/// One firm-year observation as read from `firms.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirmYear {
    pub firm_id: String,
    pub year: i32,
    pub country: String,
    /// 2-digit sector code (NACE Rev. 2 in the default schema).
    pub industry: String,
    pub sales: f64,
    pub materials_cost: f64,
    pub labor_cost: f64,
    pub employees: f64,
    pub fixed_assets: f64,
    pub value_added: f64,
    pub incorporation_year: Option<i32>,
    pub liquidity_ratio: Option<f64>,
    pub solvency_ratio: Option<f64>,
    pub roi: Option<f64>,
}

/// Acquirer-side information for a takeover, as carried by `treatments.csv`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AcquirerInfo {
    pub acquirer_id: Option<String>,
    pub industry: Option<String>,
    pub country: Option<String>,
    /// Number of subsidiaries the acquirer had integrated before the deal.
    pub perimeter: Option<u32>,
}

/// Treatment status of a firm. A firm is treated at most once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TreatmentInfo {
    /// First takeover year; `None` for never-treated firms.
    pub cohort: Option<i32>,
    pub deal_id: Option<String>,
    pub acquirer: AcquirerInfo,
}

/// One row of `treatments.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentRow {
    pub firm_id: String,
    pub cohort: Option<i32>,
    pub acquirer: AcquirerInfo,
}

/// Price deflators keyed by `(country, industry, year)`, base year = 1.0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeflatorTable {
    cells: BTreeMap<(String, String, i32), f64>,
}

impl DeflatorTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, country: &str, industry: &str, year: i32, value: f64) -> Result<()> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::Integrity(format!(
                "deflator for ({country}, {industry}, {year}) must be strictly positive, got {value}"
            )));
        }
        self.cells.insert((country.to_string(), industry.to_string(), year), value);
        Ok(())
    }

    pub fn get(&self, country: &str, industry: &str, year: i32) -> Option<f64> {
        self.cells.get(&(country.to_string(), industry.to_string(), year)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, String, i32), &f64)> {
        self.cells.iter()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Audit trail of what happened to the input rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DataQualityReport {
    pub rows_read: usize,
    /// Rows removed from the estimation sample, keyed by rule.
    pub dropped: BTreeMap<String, usize>,
    /// Share of empty cells per input column.
    pub missing_rates: BTreeMap<String, f64>,
    /// Rows kept in the panel but excluded from the capital-intensity sample.
    pub capital_intensity_excluded: usize,
    pub warnings: Vec<String>,
}

impl DataQualityReport {
    pub fn rows_dropped(&self) -> usize {
        self.dropped.values().sum()
    }

    pub(crate) fn drop_row(&mut self, rule: &str) {
        *self.dropped.entry(rule.to_string()).or_insert(0) += 1;
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "rows read: {}\nrows dropped: {}\n",
            self.rows_read,
            self.rows_dropped()
        );
        for (rule, n) in &self.dropped {
            out.push_str(&format!("  {rule}: {n}\n"));
        }
        out.push_str(&format!(
            "excluded from capital-intensity sample: {}\n",
            self.capital_intensity_excluded
        ));
        out.push_str("missing rates:\n");
        for (col, rate) in &self.missing_rates {
            out.push_str(&format!("  {col}: {rate:.4}\n"));
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Panel {
    rows: Vec<FirmYear>,
    derived: Option<Vec<DerivedVars>>,
    treatments: BTreeMap<String, TreatmentInfo>,
    report: DataQualityReport,
    has_incorporation_year: bool,
}

/// Exclusion rules, applied in this order; a row is counted under the first
/// rule it violates.
fn exclusion_reason(row: &FirmYear) -> Option<String> {
    let strict = [
        ("sales", row.sales),
        ("materials", row.materials_cost),
        ("labor_cost", row.labor_cost),
        ("fixed_assets", row.fixed_assets),
    ];
    if let Some((name, _)) = strict
        .iter()
        .chain(std::iter::once(&("employees", row.employees)))
        .find(|(_, v)| !v.is_finite())
    {
        return Some(format!("non-finite {name}"));
    }
    if let Some((name, _)) = strict.iter().find(|(_, v)| *v <= 0.0) {
        return Some(format!("nonpositive {name}"));
    }
    // Zero staff is kept; such rows only leave the capital-intensity sample.
    if row.employees < 0.0 {
        return Some("negative employees".into());
    }
    None
}

impl Panel {
    /// Validates raw rows into a panel.
    ///
    /// Rows breaking a positivity rule are dropped and counted; a duplicated
    /// `(firm_id, year)` key is an integrity error.
    pub fn from_rows(rows: Vec<FirmYear>) -> Result<Self> {
        let mut report = DataQualityReport {
            rows_read: rows.len(),
            ..Default::default()
        };
        let has_incorporation_year = rows.iter().any(|r| r.incorporation_year.is_some());
        Self::validate(rows, &mut report, has_incorporation_year)
    }

    fn validate(rows: Vec<FirmYear>, report: &mut DataQualityReport, has_incorporation_year: bool) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut duplicates = Vec::new();
        for r in &rows {
            if !seen.insert((r.firm_id.as_str(), r.year)) && duplicates.len() < 10 {
                duplicates.push(format!("({}, {})", r.firm_id, r.year));
            }
        }
        if !duplicates.is_empty() {
            return Err(Error::Integrity(format!(
                "duplicate (firm_id, year) keys: {}",
                duplicates.join(", ")
            )));
        }
        let mut kept = Vec::with_capacity(rows.len());
        for r in rows {
            match exclusion_reason(&r) {
                Some(rule) => report.drop_row(&rule),
                None => kept.push(r),
            }
        }
        kept.sort_by(|a, b| a.firm_id.cmp(&b.firm_id).then(a.year.cmp(&b.year)));
        if !has_incorporation_year {
            let w = "incorporation year absent: age-based covariates disabled".to_string();
            if !report.warnings.contains(&w) {
                report.warnings.push(w);
            }
        }
        Ok(Self {
            rows: kept,
            derived: None,
            treatments: BTreeMap::new(),
            report: report.clone(),
            has_incorporation_year,
        })
    }

    /// Re-applies the exclusion rules. Validation is idempotent, so this
    /// returns an identical panel for an already validated one.
    pub fn revalidate(self) -> Result<Self> {
        let mut report = self.report.clone();
        let treatments = self.treatments;
        let mut out = Self::validate(self.rows, &mut report, self.has_incorporation_year)?;
        out.treatments = treatments;
        Ok(out)
    }

    pub fn rows(&self) -> &[FirmYear] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn report(&self) -> &DataQualityReport {
        &self.report
    }

    pub fn has_age(&self) -> bool {
        self.has_incorporation_year
    }

    /// Derived variables, parallel to [`Panel::rows`].
    pub fn derived(&self) -> Result<&[DerivedVars]> {
        self.derived
            .as_deref()
            .ok_or_else(|| Error::Precondition("derived variables not computed; call derive_variables first".into()))
    }

    pub fn treatments(&self) -> &BTreeMap<String, TreatmentInfo> {
        &self.treatments
    }

    /// Treatment cohort of a firm; `None` when never treated.
    pub fn cohort(&self, firm_id: &str) -> Option<i32> {
        self.treatments.get(firm_id).and_then(|t| t.cohort)
    }

    pub fn firm_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.rows.iter().map(|r| r.firm_id.as_str()).collect();
        ids.dedup();
        ids
    }

    pub fn industries(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.rows.iter().map(|r| r.industry.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn years(&self) -> Vec<i32> {
        let set: BTreeSet<i32> = self.rows.iter().map(|r| r.year).collect();
        set.into_iter().collect()
    }

    /// Row index by `(firm_id, year)`.
    pub fn index(&self) -> BTreeMap<(&str, i32), usize> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| ((r.firm_id.as_str(), r.year), i))
            .collect()
    }

    /// Divides every monetary field by the `(country, industry, year)` deflator.
    pub fn apply_deflators(self, deflators: &DeflatorTable) -> Result<Self> {
        let mut rows = self.rows;
        for r in &mut rows {
            let d = deflators.get(&r.country, &r.industry, r.year).ok_or_else(|| {
                Error::Lookup(format!(
                    "no deflator for cell (country={}, industry={}, year={})",
                    r.country, r.industry, r.year
                ))
            })?;
            r.sales /= d;
            r.materials_cost /= d;
            r.labor_cost /= d;
            r.fixed_assets /= d;
            r.value_added /= d;
        }
        Ok(Self {
            rows,
            derived: None,
            ..self
        })
    }

    /// Populates [`DerivedVars`] for every row.
    pub fn derive_variables(self) -> Result<Self> {
        let mut report = self.report.clone();
        let derived = derive::derive(&self.rows, &mut report);
        Ok(Self {
            derived: Some(derived),
            report,
            ..self
        })
    }

    /// Attaches treatment rows. Firms listed more than once are removed from
    /// the panel entirely (multiple acquisitions are excluded), and counted.
    pub fn with_treatments(self, rows: Vec<TreatmentRow>) -> Result<Self> {
        let mut by_firm: BTreeMap<String, Vec<TreatmentRow>> = BTreeMap::new();
        for r in rows {
            by_firm.entry(r.firm_id.clone()).or_default().push(r);
        }
        let mut report = self.report.clone();
        let mut excluded = BTreeSet::new();
        let mut treatments = BTreeMap::new();
        for (firm, mut list) in by_firm {
            let cohorts: BTreeSet<Option<i32>> = list.iter().map(|r| r.cohort).collect();
            if list.len() > 1 && cohorts.len() > 1 {
                excluded.insert(firm);
                continue;
            }
            let r = list.remove(0);
            let deal_id = r.cohort.map(|g| format!("{}-{}", firm, g));
            treatments.insert(
                firm,
                TreatmentInfo {
                    cohort: r.cohort,
                    deal_id,
                    acquirer: r.acquirer,
                },
            );
        }
        let mut rows = Vec::with_capacity(self.rows.len());
        let mut derived = self.derived.as_ref().map(|_| Vec::new());
        for (i, r) in self.rows.into_iter().enumerate() {
            if excluded.contains(&r.firm_id) {
                report.drop_row("multiple acquisitions");
                continue;
            }
            if let (Some(out), Some(src)) = (derived.as_mut(), self.derived.as_ref()) {
                out.push(src[i].clone());
            }
            rows.push(r);
        }
        // Market shares must be recomputed when rows leave their cell.
        let needs_rederive = derived.is_some() && report.dropped.contains_key("multiple acquisitions");
        let mut panel = Self {
            rows,
            derived,
            treatments,
            report,
            has_incorporation_year: self.has_incorporation_year,
        };
        if needs_rederive {
            panel = panel.derive_variables()?;
        }
        Ok(panel)
    }

    /// Drops rows whose logged monetary inputs lie outside the
    /// `[lower, upper]` quantiles (symmetric tail trim).
    pub fn trim_tails(self, lower: f64, upper: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&lower) || (1.0 - upper - lower).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "trim quantiles must be symmetric with lower < 0.5, got ({lower}, {upper})"
            )));
        }
        let fields: [fn(&FirmYear) -> f64; 4] = [
            |r| r.sales.ln(),
            |r| r.materials_cost.ln(),
            |r| r.labor_cost.ln(),
            |r| r.fixed_assets.ln(),
        ];
        let bounds: Vec<(f64, f64)> = fields
            .iter()
            .map(|f| {
                let vals: Vec<f64> = self.rows.iter().map(f).collect();
                (crate::stats::quantile(&vals, lower), crate::stats::quantile(&vals, upper))
            })
            .collect();
        let mut report = self.report.clone();
        let rows: Vec<FirmYear> = self
            .rows
            .into_iter()
            .filter(|r| {
                let keep = fields
                    .iter()
                    .zip(&bounds)
                    .all(|(f, (lo, hi))| (*lo..=*hi).contains(&f(r)));
                if !keep {
                    report.drop_row("trimmed tails");
                }
                keep
            })
            .collect();
        let had_derived = self.derived.is_some();
        let panel = Self {
            rows,
            derived: None,
            treatments: self.treatments,
            report,
            has_incorporation_year: self.has_incorporation_year,
        };
        if had_derived {
            panel.derive_variables()
        } else {
            Ok(panel)
        }
    }

    /// Keeps the rows for which `keep` is true, re-deriving market shares.
    pub fn filter_rows(self, mut keep: impl FnMut(&FirmYear) -> bool) -> Result<Self> {
        let had_derived = self.derived.is_some();
        let rows: Vec<FirmYear> = self.rows.into_iter().filter(|r| keep(r)).collect();
        let firms: BTreeSet<&str> = rows.iter().map(|r| r.firm_id.as_str()).collect();
        let treatments = self
            .treatments
            .into_iter()
            .filter(|(f, _)| firms.contains(f.as_str()))
            .collect();
        let panel = Self {
            rows,
            derived: None,
            treatments,
            report: self.report,
            has_incorporation_year: self.has_incorporation_year,
        };
        if had_derived {
            panel.derive_variables()
        } else {
            Ok(panel)
        }
    }

    /// Sets the productivity (log TFP) of the listed observations.
    pub fn with_tfp(self, tfp: &BTreeMap<(String, i32), f64>) -> Result<Self> {
        let mut derived = self
            .derived
            .ok_or_else(|| Error::Precondition("derive variables before attaching TFP".into()))?;
        for (r, d) in self.rows.iter().zip(derived.iter_mut()) {
            d.tfp = tfp.get(&(r.firm_id.clone(), r.year)).copied();
        }
        Ok(Self {
            derived: Some(derived),
            ..self
        })
    }
}
