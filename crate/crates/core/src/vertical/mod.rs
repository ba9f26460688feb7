//! Horizontal / vertical / other classification of takeovers from industry
//! codes and input-output technical coefficients.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::panel::Panel;
use crate::stats::quantile;
use crate::table::{fmt_f64, Manifest, TableReader, TableWriter};
use crate::{Error, Result};

/// Technical coefficients `a(input, output)`: input from one sector per unit
/// of output of another.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IOTable {
    coefficients: BTreeMap<(String, String), f64>,
}

impl IOTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, input: &str, output: &str, a: f64) -> Result<()> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::Schema(format!("coefficient a({input}, {output}) = {a} must be finite and >= 0")));
        }
        self.coefficients.insert((input.to_string(), output.to_string()), a);
        Ok(())
    }

    /// Coefficient of `input` in `output`; absent pairs are zero.
    pub fn get(&self, input: &str, output: &str) -> f64 {
        self.coefficients
            .get(&(input.to_string(), output.to_string()))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn sectors(&self) -> BTreeSet<&str> {
        self.coefficients
            .keys()
            .flat_map(|(a, b)| [a.as_str(), b.as_str()])
            .collect()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.coefficients.values().copied()
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }
}

pub fn load_io_table(path: &Path) -> Result<IOTable> {
    let mut reader = TableReader::open(path)?;
    reader.require(&["input_code", "output_code", "coefficient"])?;
    let mut io = IOTable::new();
    reader.for_each(|row| io.insert(&row.text("input_code")?, &row.text("output_code")?, row.f64("coefficient")?))?;
    Ok(io)
}

/// Map from panel industry codes to input-output sectors. An empty bridge
/// means the codes are used as sectors directly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndustryBridge {
    map: BTreeMap<String, String>,
}

impl IndustryBridge {
    pub fn insert(&mut self, industry: &str, sector: &str) {
        self.map.insert(industry.to_string(), sector.to_string());
    }

    pub fn sector<'a>(&'a self, industry: &'a str, io: &'a IOTable) -> Result<&'a str> {
        if self.map.is_empty() {
            return if io.sectors().contains(industry) {
                Ok(industry)
            } else {
                Err(Error::Classification(format!("industry `{industry}` is not in the input-output table")))
            };
        }
        self.map
            .get(industry)
            .map(String::as_str)
            .ok_or_else(|| Error::Classification(format!("industry `{industry}` has no input-output sector in the bridge")))
    }
}

pub fn load_bridge(path: &Path) -> Result<IndustryBridge> {
    let mut reader = TableReader::open(path)?;
    reader.require(&["nace2", "io_code"])?;
    let mut bridge = IndustryBridge::default();
    reader.for_each(|row| {
        bridge.insert(&row.text("nace2")?, &row.text("io_code")?);
        Ok(())
    })?;
    Ok(bridge)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Classification {
    Horizontal,
    Vertical,
    Other,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Horizontal => "horizontal",
            Classification::Vertical => "vertical",
            Classification::Other => "other",
        })
    }
}

impl FromStr for Classification {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "horizontal" => Ok(Classification::Horizontal),
            "vertical" => Ok(Classification::Vertical),
            "other" => Ok(Classification::Other),
            _ => Err(Error::Config(format!("unknown deal type `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DealRecord {
    pub deal_id: String,
    pub target_id: String,
    pub target_industry: String,
    pub target_country: String,
    pub acquirer_id: Option<String>,
    pub acquirer_industry: String,
    pub acquirer_country: Option<String>,
    pub year: i32,
    pub perimeter: Option<u32>,
}

impl DealRecord {
    /// Acquirer located in a different country. Unknown acquirer country
    /// counts as domestic.
    pub fn foreign(&self) -> bool {
        self.acquirer_country.as_ref().is_some_and(|c| c != &self.target_country)
    }
}

/// Deals of the treated firms of a panel. Targets take the industry and
/// country of their first observation at or after the deal year (the last
/// one before it otherwise). Deals without an acquirer industry are skipped
/// and counted.
pub fn deals_from_panel(panel: &Panel) -> (Vec<DealRecord>, usize) {
    let mut firm_rows: BTreeMap<&str, Vec<&crate::panel::FirmYear>> = BTreeMap::new();
    for r in panel.rows() {
        firm_rows.entry(r.firm_id.as_str()).or_default().push(r);
    }
    let mut skipped = 0;
    let mut deals = Vec::new();
    for (id, info) in panel.treatments() {
        let Some(g) = info.cohort else { continue };
        let Some(rows) = firm_rows.get(id.as_str()) else { continue };
        let Some(acq_ind) = info.acquirer.industry.clone() else {
            skipped += 1;
            continue;
        };
        let target = rows.iter().find(|r| r.year >= g).or(rows.last()).expect("nonempty");
        deals.push(DealRecord {
            deal_id: info.deal_id.clone().unwrap_or_else(|| format!("{id}-{g}")),
            target_id: id.clone(),
            target_industry: target.industry.clone(),
            target_country: target.country.clone(),
            acquirer_id: info.acquirer.acquirer_id.clone(),
            acquirer_industry: acq_ind,
            acquirer_country: info.acquirer.country.clone(),
            year: g,
            perimeter: info.acquirer.perimeter,
        });
    }
    (deals, skipped)
}

fn two_digit(code: &str) -> &str {
    let end = code.char_indices().nth(2).map_or(code.len(), |(i, _)| i);
    &code[..end]
}

/// Same two-digit industry code.
pub fn is_horizontal(a: &str, b: &str) -> bool {
    two_digit(a.trim()) == two_digit(b.trim())
}

/// Which coefficients form the distribution the threshold is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reference {
    /// Both directional coefficients of every distinct cross-industry pair
    /// among the deals.
    #[default]
    SampleDeals,
    /// Every entry of the input-output table.
    WholeTable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub percentile: f64,
    pub value: f64,
}

/// Percentile (in `[0, 100]`) of the reference coefficient distribution,
/// type-7 interpolation.
pub fn threshold(
    deals: &[DealRecord],
    io: &IOTable,
    bridge: &IndustryBridge,
    percentile: f64,
    reference: Reference,
) -> Result<Threshold> {
    if !(0.0..=100.0).contains(&percentile) {
        return Err(Error::Config(format!("threshold percentile {percentile} outside [0, 100]")));
    }
    let values: Vec<f64> = match reference {
        Reference::WholeTable => io.values().collect(),
        Reference::SampleDeals => {
            let mut pairs = BTreeSet::new();
            for d in deals.iter().filter(|d| !is_horizontal(&d.target_industry, &d.acquirer_industry)) {
                let a = bridge.sector(&d.target_industry, io)?;
                let b = bridge.sector(&d.acquirer_industry, io)?;
                if a != b {
                    pairs.insert(if a < b { (a, b) } else { (b, a) });
                }
            }
            pairs.iter().flat_map(|(a, b)| [io.get(a, b), io.get(b, a)]).collect()
        }
    };
    if values.is_empty() {
        return Err(Error::Classification("no coefficients to form the reference distribution".into()));
    }
    Ok(Threshold {
        percentile,
        value: quantile(&values, percentile / 100.0),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedDeal {
    pub deal: DealRecord,
    pub classification: Classification,
    /// `a(target -> acquirer)`: target output used as acquirer input.
    pub forward: Option<f64>,
    /// `a(acquirer -> target)`.
    pub backward: Option<f64>,
    pub threshold: Threshold,
    pub bin: Option<&'static str>,
}

impl ClassifiedDeal {
    pub fn coefficient_used(&self) -> Option<f64> {
        match (self.forward, self.backward) {
            (Some(f), Some(b)) => Some(f.max(b)),
            _ => None,
        }
    }
}

/// Horizontal when the two-digit codes agree; otherwise vertical when the
/// larger directional coefficient strictly exceeds the threshold.
pub fn classify_deal(deal: &DealRecord, io: &IOTable, bridge: &IndustryBridge, threshold: Threshold) -> Result<ClassifiedDeal> {
    let bin = deal.perimeter.map(perimeter_bin);
    if is_horizontal(&deal.target_industry, &deal.acquirer_industry) {
        return Ok(ClassifiedDeal {
            deal: deal.clone(),
            classification: Classification::Horizontal,
            forward: None,
            backward: None,
            threshold,
            bin,
        });
    }
    let t = bridge.sector(&deal.target_industry, io)?;
    let a = bridge.sector(&deal.acquirer_industry, io)?;
    let (forward, backward) = (io.get(t, a), io.get(a, t));
    Ok(ClassifiedDeal {
        deal: deal.clone(),
        classification: if forward.max(backward) > threshold.value {
            Classification::Vertical
        } else {
            Classification::Other
        },
        forward: Some(forward),
        backward: Some(backward),
        threshold,
        bin,
    })
}

pub fn classify_deals(
    deals: &[DealRecord],
    io: &IOTable,
    bridge: &IndustryBridge,
    percentile: f64,
    reference: Reference,
) -> Result<Vec<ClassifiedDeal>> {
    let th = threshold(deals, io, bridge, percentile, reference)?;
    deals.par_iter().map(|d| classify_deal(d, io, bridge, th)).collect()
}

pub const PERIMETER_BINS: [&str; 4] = ["1-5", "6-30", "31-100", ">100"];

/// Size class of the acquirer's prior subsidiaries. A perimeter of zero
/// falls in the first class.
pub fn perimeter_bin(perimeter: u32) -> &'static str {
    match perimeter {
        0..=5 => PERIMETER_BINS[0],
        6..=30 => PERIMETER_BINS[1],
        31..=100 => PERIMETER_BINS[2],
        _ => PERIMETER_BINS[3],
    }
}

/// Bin of every deal; deals without a perimeter get `None` and are counted.
pub fn perimeter_bins(deals: &[DealRecord]) -> (Vec<Option<&'static str>>, usize) {
    let bins: Vec<Option<&'static str>> = deals.iter().map(|d| d.perimeter.map(perimeter_bin)).collect();
    let missing = bins.iter().filter(|b| b.is_none()).count();
    (bins, missing)
}

pub fn write_deals_csv(path: &Path, deals: &[ClassifiedDeal], manifest: Option<&Manifest>) -> Result<()> {
    let mut w = TableWriter::create(
        path,
        manifest,
        &[
            "deal_id",
            "target_id",
            "acquirer_id",
            "year",
            "classification",
            "coefficient_forward",
            "coefficient_backward",
            "coefficient_used",
            "threshold_percentile",
            "threshold",
            "foreign",
            "perimeter_bin",
        ],
    )?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for c in deals {
        w.row([
            c.deal.deal_id.clone(),
            c.deal.target_id.clone(),
            c.deal.acquirer_id.clone().unwrap_or_default(),
            c.deal.year.to_string(),
            c.classification.to_string(),
            opt(c.forward),
            opt(c.backward),
            opt(c.coefficient_used()),
            fmt_f64(c.threshold.percentile),
            fmt_f64(c.threshold.value),
            u8::from(c.deal.foreign()).to_string(),
            c.bin.unwrap_or("").to_string(),
        ])?;
    }
    w.finish()
}

/// Reads back the classification column of `deals_classified.csv`.
pub fn load_deal_types(path: &Path) -> Result<BTreeMap<String, Classification>> {
    let mut reader = TableReader::open(path)?;
    reader.require(&["target_id", "classification"])?;
    let mut out = BTreeMap::new();
    reader.for_each(|row| {
        out.insert(row.text("target_id")?, row.text("classification")?.parse()?);
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests;
