//! Subsample restrictions. Every predicate is evaluated against attributes
//! computed on the full panel, so filters commute.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use markup_did::panel::Panel;
use markup_did::vertical::{deals_from_panel, perimeter_bin, Classification};
use markup_did::{Error, Result};

use crate::config::Filters;

const COUNTRY_GROUPS: &str = include_str!("../data/country_groups.csv");
const TECH_CLASSES: &str = include_str!("../data/tech_classes.csv");

/// Two-column CSV without quoting; `#` lines and the header are skipped.
fn pairs(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut header = true;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if header {
            header = false;
            continue;
        }
        let Some((a, b)) = line.split_once(',') else {
            return Err(Error::Parse {
                path: origin.into(),
                line: n as u64 + 1,
                column: String::new(),
                message: "expected two comma-separated fields".into(),
            });
        };
        out.push((a.trim().to_string(), b.trim().to_string()));
    }
    Ok(out)
}

fn read_or_default(path: Option<&Path>, default: &str, name: &str) -> Result<Vec<(String, String)>> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
            pairs(&text, &p.display().to_string())
        }
        None => pairs(default, name),
    }
}

/// Deal attributes of one treated firm.
#[derive(Debug, Clone, PartialEq)]
pub struct DealTraits {
    pub foreign: bool,
    pub bin: Option<&'static str>,
    pub class: Option<Classification>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterContext {
    pub country_groups: BTreeMap<String, BTreeSet<String>>,
    /// Industry code to technology class.
    pub tech_classes: BTreeMap<String, String>,
    pub deals: BTreeMap<String, DealTraits>,
}

impl FilterContext {
    pub fn build(
        panel: &Panel,
        groups: Option<&Path>,
        classes: Option<&Path>,
        deal_types: Option<&BTreeMap<String, Classification>>,
    ) -> Result<Self> {
        let mut country_groups: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (g, c) in read_or_default(groups, COUNTRY_GROUPS, "country_groups.csv")? {
            country_groups.entry(g.to_uppercase()).or_default().insert(c);
        }
        let tech_classes = read_or_default(classes, TECH_CLASSES, "tech_classes.csv")?
            .into_iter()
            .map(|(k, v)| (k, v.to_lowercase()))
            .collect();
        let (deals, _) = deals_from_panel(panel);
        let deals = deals
            .into_iter()
            .map(|d| {
                let traits = DealTraits {
                    foreign: d.foreign(),
                    bin: d.perimeter.map(perimeter_bin),
                    class: deal_types.and_then(|m| m.get(&d.target_id).copied()),
                };
                (d.target_id, traits)
            })
            .collect();
        Ok(Self {
            country_groups,
            tech_classes,
            deals,
        })
    }

    fn countries(&self, wanted: &[String]) -> BTreeSet<String> {
        wanted
            .iter()
            .flat_map(|w| match self.country_groups.get(&w.to_uppercase()) {
                Some(group) => group.iter().cloned().collect::<Vec<_>>(),
                None => vec![w.clone()],
            })
            .collect()
    }
}

/// Restricts the panel. Never-treated firms only face the country and
/// technology filters; treated firms must also pass the deal filters.
pub fn apply_filters(panel: Panel, filters: &Filters, ctx: &FilterContext) -> Result<Panel> {
    if filters.is_empty() {
        return Ok(panel);
    }
    let countries = ctx.countries(&filters.countries);
    let class = filters.tech_class.as_ref().map(|c| c.to_lowercase());
    let deal_ok: BTreeMap<&str, bool> = panel
        .treatments()
        .iter()
        .filter(|(_, t)| t.cohort.is_some())
        .map(|(id, _)| {
            let ok = match ctx.deals.get(id) {
                Some(d) => {
                    (!filters.foreign_only || d.foreign)
                        && filters.perimeter_bin.as_deref().map_or(true, |b| d.bin == Some(b))
                        && filters.deal_type.map_or(true, |t| d.class == Some(t))
                }
                None => !filters.foreign_only && filters.perimeter_bin.is_none() && filters.deal_type.is_none(),
            };
            (id.as_str(), ok)
        })
        .collect();
    let deal_ok: BTreeMap<String, bool> = deal_ok.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    panel.filter_rows(|r| {
        (countries.is_empty() || countries.contains(&r.country))
            && class
                .as_ref()
                .map_or(true, |c| ctx.tech_classes.get(&r.industry) == Some(c))
            && deal_ok.get(&r.firm_id).copied().unwrap_or(true)
    })
}
