use std::collections::BTreeMap;
use std::path::Path;

use super::{AcquirerInfo, DataQualityReport, DeflatorTable, FirmYear, Panel, TreatmentRow};
use crate::table::{fmt_f64, Manifest, TableReader, TableWriter};
use crate::{Error, Result};

/// Maps logical fields to column names in `firms.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMapping {
    pub firm_id: String,
    pub year: String,
    pub country: String,
    pub industry: String,
    pub sales: String,
    pub materials_cost: String,
    pub labor_cost: String,
    pub employees: String,
    pub fixed_assets: String,
    pub value_added: String,
    pub incorporation_year: String,
    pub liquidity_ratio: String,
    pub solvency_ratio: String,
    pub roi: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            firm_id: "firm_id".into(),
            year: "year".into(),
            country: "country".into(),
            industry: "nace2".into(),
            sales: "sales".into(),
            materials_cost: "materials".into(),
            labor_cost: "labor_cost".into(),
            employees: "employees".into(),
            fixed_assets: "fixed_assets".into(),
            value_added: "value_added".into(),
            incorporation_year: "incorporation_year".into(),
            liquidity_ratio: "liquidity".into(),
            solvency_ratio: "solvency".into(),
            roi: "roi".into(),
        }
    }
}

impl ColumnMapping {
    fn required(&self) -> [&str; 10] {
        [
            &self.firm_id,
            &self.year,
            &self.country,
            &self.industry,
            &self.sales,
            &self.materials_cost,
            &self.labor_cost,
            &self.employees,
            &self.fixed_assets,
            &self.value_added,
        ]
    }
}

/// Reads and validates `firms.csv`.
///
/// Empty cells in a required numeric column drop the row (counted as
/// `missing <column>`); unparseable cells are a parse error.
pub fn load_panel(path: &Path, schema: &ColumnMapping) -> Result<Panel> {
    let mut reader = TableReader::open(path)?;
    reader.require(&schema.required())?;
    let headers = reader.headers();
    let mut empties: BTreeMap<String, usize> = headers.iter().map(|h| (h.clone(), 0)).collect();
    let mut report = DataQualityReport::default();
    let mut rows = Vec::new();
    reader.for_each(|row| {
        report.rows_read += 1;
        for h in &headers {
            if row.raw(h).is_empty() {
                *empties.get_mut(h).expect("header listed") += 1;
            }
        }
        let numeric = [
            &schema.sales,
            &schema.materials_cost,
            &schema.labor_cost,
            &schema.employees,
            &schema.fixed_assets,
            &schema.value_added,
        ];
        let mut values = [0.0; 6];
        for (slot, col) in values.iter_mut().zip(numeric) {
            match row.opt_f64(col)? {
                Some(v) => *slot = v,
                None => {
                    report.drop_row(&format!("missing {col}"));
                    return Ok(());
                }
            }
        }
        let incorporation_year = row
            .opt_i64(&schema.incorporation_year)?
            .map(|y| i32::try_from(y).unwrap_or(i32::MIN));
        rows.push(FirmYear {
            firm_id: row.text(&schema.firm_id)?,
            year: row.i32(&schema.year)?,
            country: row.text(&schema.country)?,
            industry: row.text(&schema.industry)?,
            sales: values[0],
            materials_cost: values[1],
            labor_cost: values[2],
            employees: values[3],
            fixed_assets: values[4],
            value_added: values[5],
            incorporation_year,
            liquidity_ratio: row.opt_f64(&schema.liquidity_ratio)?,
            solvency_ratio: row.opt_f64(&schema.solvency_ratio)?,
            roi: row.opt_f64(&schema.roi)?,
        });
        Ok(())
    })?;
    let n = report.rows_read.max(1) as f64;
    report.missing_rates = empties
        .into_iter()
        .map(|(h, c)| (h, c as f64 / n))
        .collect();
    let has_incorporation_year = rows.iter().any(|r| r.incorporation_year.is_some());
    Panel::validate(rows, &mut report, has_incorporation_year)
}

/// Reads `deflators.csv` (country, nace2, year, deflator).
pub fn load_deflators(path: &Path) -> Result<DeflatorTable> {
    let mut reader = TableReader::open(path)?;
    reader.require(&["country", "nace2", "year", "deflator"])?;
    let mut table = DeflatorTable::new();
    reader.for_each(|row| {
        table.insert(
            &row.text("country")?,
            &row.text("nace2")?,
            row.i32("year")?,
            row.f64("deflator")?,
        )
    })?;
    Ok(table)
}

/// Reads `treatments.csv`. An empty `cohort_year` marks a never-treated firm.
pub fn load_treatments(path: &Path) -> Result<Vec<TreatmentRow>> {
    let mut reader = TableReader::open(path)?;
    reader.require(&["firm_id", "cohort_year"])?;
    let mut rows = Vec::new();
    reader.for_each(|row| {
        let perimeter = match row.opt_i64("acquirer_perimeter")? {
            Some(p) if p < 0 => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: row.line(),
                    column: "acquirer_perimeter".into(),
                    message: format!("negative count {p}"),
                })
            }
            Some(p) => Some(u32::try_from(p).unwrap_or(u32::MAX)),
            None => None,
        };
        rows.push(TreatmentRow {
            firm_id: row.text("firm_id")?,
            cohort: row.opt_i64("cohort_year")?.map(|g| g as i32),
            acquirer: AcquirerInfo {
                acquirer_id: row.opt_text("acquirer_id"),
                industry: row.opt_text("acquirer_nace2"),
                country: row.opt_text("acquirer_country"),
                perimeter,
            },
        });
        Ok(())
    })?;
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_firms_csv(path: &Path, rows: &[FirmYear], manifest: Option<&Manifest>) -> Result<()> {
    let s = ColumnMapping::default();
    let mut w = TableWriter::create(
        path,
        manifest,
        &[
            &s.firm_id,
            &s.year,
            &s.country,
            &s.industry,
            &s.sales,
            &s.materials_cost,
            &s.labor_cost,
            &s.employees,
            &s.fixed_assets,
            &s.value_added,
            &s.incorporation_year,
            &s.liquidity_ratio,
            &s.solvency_ratio,
            &s.roi,
        ],
    )?;
    for r in rows {
        w.row([
            r.firm_id.clone(),
            r.year.to_string(),
            r.country.clone(),
            r.industry.clone(),
            fmt_f64(r.sales),
            fmt_f64(r.materials_cost),
            fmt_f64(r.labor_cost),
            fmt_f64(r.employees),
            fmt_f64(r.fixed_assets),
            fmt_f64(r.value_added),
            r.incorporation_year.map(|y| y.to_string()).unwrap_or_default(),
            opt(r.liquidity_ratio),
            opt(r.solvency_ratio),
            opt(r.roi),
        ])?;
    }
    w.finish()
}

pub fn write_deflators_csv(path: &Path, table: &DeflatorTable, manifest: Option<&Manifest>) -> Result<()> {
    let mut w = TableWriter::create(path, manifest, &["country", "nace2", "year", "deflator"])?;
    for ((c, i, y), d) in table.iter() {
        w.row([c.clone(), i.clone(), y.to_string(), fmt_f64(*d)])?;
    }
    w.finish()
}

pub fn write_treatments_csv(path: &Path, rows: &[TreatmentRow], manifest: Option<&Manifest>) -> Result<()> {
    let mut w = TableWriter::create(
        path,
        manifest,
        &[
            "firm_id",
            "cohort_year",
            "acquirer_id",
            "acquirer_nace2",
            "acquirer_country",
            "acquirer_perimeter",
        ],
    )?;
    for r in rows {
        w.row([
            r.firm_id.clone(),
            r.cohort.map(|g| g.to_string()).unwrap_or_default(),
            r.acquirer.acquirer_id.clone().unwrap_or_default(),
            r.acquirer.industry.clone().unwrap_or_default(),
            r.acquirer.country.clone().unwrap_or_default(),
            r.acquirer.perimeter.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    w.finish()
}
