use std::collections::BTreeMap;

use super::{DataQualityReport, FirmYear};

/// Variables derived from one [`FirmYear`].
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedVars {
    /// materials + labor cost.
    pub variable_cost: f64,
    /// Fixed assets per employee; `None` when employees = 0.
    pub capital_intensity: Option<f64>,
    pub variable_cost_ratio: f64,
    /// Sales share within the (country, industry, year) cell.
    pub market_share: f64,
    pub log_sales: f64,
    pub log_materials: f64,
    pub log_labor_cost: f64,
    pub log_fixed_assets: f64,
    pub log_variable_cost: f64,
    /// `None` when value added is not positive.
    pub log_value_added: Option<f64>,
    /// `None` when employees = 0.
    pub log_employees: Option<f64>,
    /// Years since incorporation.
    pub firm_age: Option<f64>,
    /// Log TFP, filled in from a production-function fit.
    pub tfp: Option<f64>,
}

impl DerivedVars {
    /// ln(1 + age), the age covariate used by the matching and DiD models.
    pub fn log_age(&self) -> Option<f64> {
        self.firm_age.map(|a| (1.0 + a.max(0.0)).ln())
    }

    pub fn log_capital_intensity(&self) -> Option<f64> {
        self.capital_intensity.map(f64::ln)
    }
}

pub(super) fn derive(rows: &[FirmYear], report: &mut DataQualityReport) -> Vec<DerivedVars> {
    let mut cell_sales: BTreeMap<(&str, &str, i32), f64> = BTreeMap::new();
    for r in rows {
        *cell_sales.entry((&r.country, &r.industry, r.year)).or_insert(0.0) += r.sales;
    }
    report.capital_intensity_excluded = 0;
    rows.iter()
        .map(|r| {
            let variable_cost = r.materials_cost + r.labor_cost;
            let has_staff = r.employees > 0.0;
            if !has_staff {
                report.capital_intensity_excluded += 1;
            }
            DerivedVars {
                variable_cost,
                capital_intensity: has_staff.then(|| r.fixed_assets / r.employees),
                variable_cost_ratio: variable_cost / r.sales,
                market_share: r.sales / cell_sales[&(r.country.as_str(), r.industry.as_str(), r.year)],
                log_sales: r.sales.ln(),
                log_materials: r.materials_cost.ln(),
                log_labor_cost: r.labor_cost.ln(),
                log_fixed_assets: r.fixed_assets.ln(),
                log_variable_cost: variable_cost.ln(),
                log_value_added: (r.value_added > 0.0).then(|| r.value_added.ln()),
                log_employees: has_staff.then(|| r.employees.ln()),
                firm_age: r.incorporation_year.map(|y| f64::from(r.year - y)),
                tfp: None,
            }
        })
        .collect()
}
