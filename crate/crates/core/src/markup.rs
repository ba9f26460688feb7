//! Firm-year markups `mu = theta / alpha`, where `theta` is the output
//! elasticity of a flexible input and `alpha` its expenditure share of sales.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::panel::Panel;
use crate::prodfn::ElasticitySet;
use crate::stats;
use crate::table::{fmt_f64, Manifest, TableWriter};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlexibleInput {
    Materials,
    Labor,
    /// Materials plus labor: elasticities and expenditures are summed.
    Composite,
}

impl FlexibleInput {
    pub fn label(self) -> &'static str {
        match self {
            FlexibleInput::Materials => "materials",
            FlexibleInput::Labor => "labor",
            FlexibleInput::Composite => "composite",
        }
    }
}

impl fmt::Display for FlexibleInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FlexibleInput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "materials" => Ok(Self::Materials),
            "labor" => Ok(Self::Labor),
            "composite" => Ok(Self::Composite),
            other => Err(Error::Config(format!(
                "unknown flexible input `{other}` (expected materials, labor or composite)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkupRecord {
    pub firm_id: String,
    pub year: i32,
    pub country: String,
    pub industry: String,
    pub mu: f64,
    pub theta_used: f64,
    pub alpha: f64,
    pub flexible_input: FlexibleInput,
    /// Observed (deflated) sales, used as aggregation weight.
    pub sales: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MarkupSet {
    pub records: Vec<MarkupRecord>,
    /// Rows skipped, keyed by reason.
    pub excluded: BTreeMap<String, usize>,
}

/// Markups for every panel row covered by `elasticities`.
///
/// With `correct_shares`, sales are divided by `exp(epsilon_hat)` before the
/// expenditure share is formed.
pub fn compute_markups(
    panel: &Panel,
    elasticities: &[ElasticitySet],
    flexible_input: FlexibleInput,
    correct_shares: bool,
) -> Result<MarkupSet> {
    let mut lookup: BTreeMap<&str, (&ElasticitySet, BTreeMap<(&str, i32), usize>)> = BTreeMap::new();
    for set in elasticities {
        let idx = set
            .keys
            .iter()
            .enumerate()
            .map(|(i, (f, y))| ((f.as_str(), *y), i))
            .collect();
        lookup.insert(set.industry.as_str(), (set, idx));
    }
    let mut out = MarkupSet::default();
    let mut skip = |reason: &str| *out.excluded.entry(reason.to_string()).or_insert(0) += 1;
    let mut records = Vec::with_capacity(panel.len());
    for r in panel.rows() {
        let (set, idx) = lookup.get(r.industry.as_str()).ok_or_else(|| {
            Error::Coverage(format!("no elasticities estimated for industry {}", r.industry))
        })?;
        let Some(&i) = idx.get(&(r.firm_id.as_str(), r.year)) else {
            skip("no elasticity for observation");
            continue;
        };
        let (theta, expenditure) = match flexible_input {
            FlexibleInput::Materials => (set.theta_m[i], r.materials_cost),
            FlexibleInput::Labor => (set.theta_l[i], r.labor_cost),
            FlexibleInput::Composite => (set.theta_m[i] + set.theta_l[i], r.materials_cost + r.labor_cost),
        };
        if !(expenditure > 0.0) {
            skip("zero expenditure");
            continue;
        }
        let sales = if correct_shares {
            r.sales / set.epsilon_hat[i].exp()
        } else {
            r.sales
        };
        let alpha = expenditure / sales;
        records.push(MarkupRecord {
            firm_id: r.firm_id.clone(),
            year: r.year,
            country: r.country.clone(),
            industry: r.industry.clone(),
            mu: theta / alpha,
            theta_used: theta,
            alpha,
            flexible_input,
            sales: r.sales,
        });
    }
    out.records = records;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Sales,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    Year,
    IndustryYear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub industry: Option<String>,
    pub year: i32,
    pub weighted_mean: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MarkupSeries {
    pub points: Vec<SeriesPoint>,
    pub warnings: Vec<String>,
}

/// Weighted mean markup per group. Records with nonpositive sales carry no
/// weight under sales weighting; a group left without weight is omitted.
pub fn aggregate_markups(records: &[MarkupRecord], weights: Weighting, by: Grouping) -> Result<MarkupSeries> {
    if records.is_empty() {
        return Err(Error::Precondition("no markup records to aggregate".into()));
    }
    let mut groups: BTreeMap<(Option<&str>, i32), (f64, f64, usize)> = BTreeMap::new();
    for r in records {
        let key = match by {
            Grouping::Year => (None, r.year),
            Grouping::IndustryYear => (Some(r.industry.as_str()), r.year),
        };
        let entry = groups.entry(key).or_insert((0.0, 0.0, 0));
        let w = match weights {
            Weighting::Sales if r.sales > 0.0 => r.sales,
            Weighting::Sales => continue,
            Weighting::None => 1.0,
        };
        entry.0 += w * r.mu;
        entry.1 += w;
        entry.2 += 1;
    }
    let mut series = MarkupSeries::default();
    for ((industry, year), (num, den, n)) in groups {
        let label = match industry {
            Some(i) => format!("industry {i}, year {year}"),
            None => format!("year {year}"),
        };
        if n == 0 || den <= 0.0 {
            series.warnings.push(format!("{label}: no positive weight, group omitted"));
            continue;
        }
        series.points.push(SeriesPoint {
            industry: industry.map(str::to_string),
            year,
            weighted_mean: num / den,
            n,
        });
    }
    Ok(series)
}

/// Upper end of the display range; records outside `(0, MAX_DISPLAY_MU]` are
/// left out of distribution summaries.
pub const MAX_DISPLAY_MU: f64 = 10.0;
const HIST_WIDTH: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSummary {
    pub year: i32,
    pub n: usize,
    pub trimmed: usize,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    /// 10th through 90th percentiles.
    pub deciles: [f64; 9],
    /// `(lower, upper, count)` bins of width 0.25 over `(0, 10]`.
    pub histogram: Vec<(f64, f64, usize)>,
}

pub fn markup_distribution(records: &[MarkupRecord], year: i32) -> Result<DistributionSummary> {
    let in_year: Vec<f64> = records.iter().filter(|r| r.year == year).map(|r| r.mu).collect();
    let kept: Vec<f64> = in_year
        .iter()
        .copied()
        .filter(|&m| m > 0.0 && m <= MAX_DISPLAY_MU)
        .collect();
    if kept.is_empty() {
        return Err(Error::Precondition(format!("no markups in (0, {MAX_DISPLAY_MU}] for year {year}")));
    }
    let mut sorted = kept.clone();
    sorted.sort_by(f64::total_cmp);
    let mut deciles = [0.0; 9];
    for (j, d) in deciles.iter_mut().enumerate() {
        *d = stats::quantile_sorted(&sorted, (j + 1) as f64 / 10.0);
    }
    let bins = (MAX_DISPLAY_MU / HIST_WIDTH).round() as usize;
    let mut counts = vec![0usize; bins];
    for &m in &kept {
        let b = ((m / HIST_WIDTH).ceil() as usize).clamp(1, bins) - 1;
        counts[b] += 1;
    }
    Ok(DistributionSummary {
        year,
        n: kept.len(),
        trimmed: in_year.len() - kept.len(),
        mean: stats::mean(&kept),
        median: stats::quantile_sorted(&sorted, 0.5),
        sd: stats::std_dev(&kept),
        deciles,
        histogram: counts
            .into_iter()
            .enumerate()
            .map(|(b, c)| (b as f64 * HIST_WIDTH, (b + 1) as f64 * HIST_WIDTH, c))
            .collect(),
    })
}

pub fn write_markups_csv(path: &Path, records: &[MarkupRecord], manifest: Option<&Manifest>) -> Result<()> {
    let mut w = TableWriter::create(path, manifest, &["firm_id", "year", "mu", "theta", "alpha", "flexible_input"])?;
    for r in records {
        w.row([
            r.firm_id.clone(),
            r.year.to_string(),
            fmt_f64(r.mu),
            fmt_f64(r.theta_used),
            fmt_f64(r.alpha),
            r.flexible_input.label().to_string(),
        ])?;
    }
    w.finish()
}

pub fn write_series_csv(path: &Path, series: &MarkupSeries, manifest: Option<&Manifest>) -> Result<()> {
    let mut w = TableWriter::create(path, manifest, &["industry", "year", "weighted_mean", "n"])?;
    for p in &series.points {
        w.row([
            p.industry.clone().unwrap_or_default(),
            p.year.to_string(),
            fmt_f64(p.weighted_mean),
            p.n.to_string(),
        ])?;
    }
    w.finish()
}

pub fn write_distribution_csv(path: &Path, summaries: &[DistributionSummary], manifest: Option<&Manifest>) -> Result<()> {
    let mut w = TableWriter::create(path, manifest, &["year", "statistic", "value"])?;
    for s in summaries {
        let mut stats_rows = vec![
            ("n".to_string(), s.n as f64),
            ("trimmed".to_string(), s.trimmed as f64),
            ("mean".to_string(), s.mean),
            ("median".to_string(), s.median),
            ("sd".to_string(), s.sd),
        ];
        for (j, d) in s.deciles.iter().enumerate() {
            stats_rows.push((format!("p{}", (j + 1) * 10), *d));
        }
        for (lo, hi, c) in &s.histogram {
            stats_rows.push((format!("bin_{lo}_{hi}"), *c as f64));
        }
        for (name, v) in stats_rows {
            w.row([s.year.to_string(), name, fmt_f64(v)])?;
        }
    }
    w.finish()
}
