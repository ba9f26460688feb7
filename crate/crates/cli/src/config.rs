//! Flat `key = value` run configuration.
//!
//! Lists are comma separated; `#` starts a comment. Relative paths resolve
//! against the directory of the configuration file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use markup_did::did::{ControlRule, Covariate};
use markup_did::markup::FlexibleInput;
use markup_did::prodfn::{Beta, Estimator, Form};
use markup_did::simgen::{
    CohortSpec, Effect, EffectOutcome, EffectPath, IndustryTech, MarkupRule, Selection, SimConfig,
};
use markup_did::vertical::{Classification, Reference, PERIMETER_BINS};
use markup_did::{Error, Result};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Simulate,
    EstimateProdfn,
    Markups,
    Classify,
    Did,
    EventStudy,
    PsmDid,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Simulate,
        Stage::EstimateProdfn,
        Stage::Markups,
        Stage::Classify,
        Stage::Did,
        Stage::EventStudy,
        Stage::PsmDid,
        Stage::Report,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::EstimateProdfn => "estimate-prodfn",
            Stage::Markups => "markups",
            Stage::Classify => "classify",
            Stage::Did => "did",
            Stage::EventStudy => "event-study",
            Stage::PsmDid => "psm-did",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|st| st.label() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

/// Firm outcomes of the dashboard, in display order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DashOutcome {
    Markup,
    MarketShare,
    Sales,
    VariableCost,
    VariableCostRatio,
    Tfp,
    Roi,
    CapitalIntensity,
    Liquidity,
    Solvency,
}

impl DashOutcome {
    pub const ALL: [DashOutcome; 10] = [
        DashOutcome::Markup,
        DashOutcome::MarketShare,
        DashOutcome::Sales,
        DashOutcome::VariableCost,
        DashOutcome::VariableCostRatio,
        DashOutcome::Tfp,
        DashOutcome::Roi,
        DashOutcome::CapitalIntensity,
        DashOutcome::Liquidity,
        DashOutcome::Solvency,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DashOutcome::Markup => "markup",
            DashOutcome::MarketShare => "market_share",
            DashOutcome::Sales => "sales",
            DashOutcome::VariableCost => "variable_cost",
            DashOutcome::VariableCostRatio => "variable_cost_ratio",
            DashOutcome::Tfp => "tfp",
            DashOutcome::Roi => "roi",
            DashOutcome::CapitalIntensity => "capital_intensity",
            DashOutcome::Liquidity => "liquidity",
            DashOutcome::Solvency => "solvency",
        }
    }

    /// Column heading of the dashboard.
    pub fn heading(self) -> &'static str {
        match self {
            DashOutcome::Markup => "Markup",
            DashOutcome::MarketShare => "Market Share",
            DashOutcome::Sales => "Sales",
            DashOutcome::VariableCost => "Variable Cost",
            DashOutcome::VariableCostRatio => "Variable Cost Ratio",
            DashOutcome::Tfp => "TFP",
            DashOutcome::Roi => "ROI",
            DashOutcome::CapitalIntensity => "Capital Intensity",
            DashOutcome::Liquidity => "Liquidity Ratio",
            DashOutcome::Solvency => "Solvency Ratio",
        }
    }
}

impl FromStr for DashOutcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|o| o.label() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown outcome `{s}`")))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Inputs {
    pub firms: Option<PathBuf>,
    pub deflators: Option<PathBuf>,
    pub treatments: Option<PathBuf>,
    pub io_table: Option<PathBuf>,
    pub industry_bridge: Option<PathBuf>,
    pub country_groups: Option<PathBuf>,
    pub tech_classes: Option<PathBuf>,
}

/// Subsample restrictions for the treatment-effect stages.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Filters {
    /// Country codes or group names.
    pub countries: Vec<String>,
    pub tech_class: Option<String>,
    pub foreign_only: bool,
    pub perimeter_bin: Option<String>,
    pub deal_type: Option<Classification>,
}

impl Filters {
    pub fn is_empty(&self) -> bool {
        self == &Filters::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Parsed keys after overrides, used for the manifest hash.
    pub entries: BTreeMap<String, String>,
    pub inputs: Inputs,
    pub out: PathBuf,
    pub stages: Vec<Stage>,
    pub seed: u64,
    pub prodfn_method: Estimator,
    pub prodfn_form: Form,
    pub prodfn_bootstrap_reps: usize,
    pub prodfn_min_obs: usize,
    pub flexible_input: FlexibleInput,
    pub correct_shares: bool,
    pub control_rule: ControlRule,
    pub anticipation: u32,
    pub covariates: Vec<Covariate>,
    pub outcomes: Vec<DashOutcome>,
    pub window: Option<(i32, i32)>,
    pub bootstrap_reps: usize,
    pub alpha: f64,
    pub vertical_percentile: f64,
    pub vertical_reference: Reference,
    pub filters: Filters,
    pub psm_caliper: Option<f64>,
    pub psm_replacement: bool,
    pub psm_window: (i32, i32),
    pub psm_outcomes: Vec<DashOutcome>,
    pub sim: SimConfig,
}

const KEYS: &[&str] = &[
    "firms",
    "deflators",
    "treatments",
    "io_table",
    "industry_bridge",
    "country_groups",
    "tech_classes",
    "out",
    "stages",
    "seed",
    "prodfn.method",
    "prodfn.form",
    "prodfn.bootstrap_reps",
    "prodfn.min_obs",
    "markups.flexible_input",
    "markups.correct_shares",
    "did.control",
    "did.anticipation",
    "did.covariates",
    "did.outcomes",
    "did.window",
    "did.bootstrap_reps",
    "did.alpha",
    "vertical.percentile",
    "vertical.reference",
    "filter.countries",
    "filter.tech_class",
    "filter.foreign_only",
    "filter.perimeter_bin",
    "filter.deal_type",
    "psm.caliper",
    "psm.replacement",
    "psm.window",
    "psm.outcomes",
    "simulate.firms_per_industry",
    "simulate.industries",
    "simulate.beta",
    "simulate.countries",
    "simulate.start_year",
    "simulate.end_year",
    "simulate.rho",
    "simulate.sigma_xi",
    "simulate.sigma_eps",
    "simulate.sigma_labor",
    "simulate.productivity",
    "simulate.markup",
    "simulate.cohorts",
    "simulate.selection",
    "simulate.effect",
    "simulate.effect_outcome",
    "simulate.deflate",
    "simulate.burn_in",
];

/// Keys that do not change any numeric output and stay out of the hash.
const UNHASHED: &[&str] = &["out"];

fn bad<T>(key: &str, value: &str, what: &str) -> Result<T> {
    Err(Error::Config(format!("{key} = {value}: {what}")))
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .or_else(|_| bad(key, value, "cannot parse value"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bad(key, value, "expected true or false"),
    }
}

fn parse_floats(key: &str, value: &str, n: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = list(value).iter().map(|s| parse(key, s)).collect::<Result<_>>()?;
    if v.len() != n {
        return bad(key, value, &format!("expected {n} numbers"));
    }
    Ok(v)
}

fn parse_window(key: &str, value: &str) -> Result<(i32, i32)> {
    let v = list(value);
    if v.len() != 2 {
        return bad(key, value, "expected two integers `lo, hi`");
    }
    let (lo, hi) = (parse(key, &v[0])?, parse(key, &v[1])?);
    if lo > hi {
        return bad(key, value, "window is empty");
    }
    Ok((lo, hi))
}

fn parse_markup_rule(key: &str, value: &str) -> Result<MarkupRule> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    let num = |i: usize| parts.get(i).map_or_else(|| bad(key, value, "missing parameter"), |s| parse::<f64>(key, s));
    match parts[0] {
        "constant" => Ok(MarkupRule::Constant(num(1)?)),
        "lognormal" => Ok(MarkupRule::Lognormal {
            median: num(1)?,
            sigma: num(2)?,
        }),
        "size" => Ok(MarkupRule::SizeDependent {
            mu_bar: num(1)?,
            curvature: num(2)?,
        }),
        _ => bad(key, value, "expected constant:MU, lognormal:MEDIAN:SIGMA or size:MU:CURVATURE"),
    }
}

fn parse_effect_path(key: &str, value: &str) -> Result<EffectPath> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    let d = parts.get(1).map_or_else(|| bad(key, value, "missing delta"), |s| parse::<f64>(key, s))?;
    match parts[0] {
        "constant" => Ok(EffectPath::Constant(d)),
        "linear" => Ok(EffectPath::Linear(d)),
        _ => bad(key, value, "expected constant:DELTA or linear:DELTA"),
    }
}

impl RunConfig {
    /// Parses configuration text. `base` anchors relative paths.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected `key = value`", n + 1)));
            };
            let k = k.trim();
            if !KEYS.contains(&k) && !k.starts_with("simulate.beta.") {
                return Err(Error::Config(format!("line {}: unknown key `{k}`", n + 1)));
            }
            if entries.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: key `{k}` set twice", n + 1)));
            }
        }
        Self::from_entries(entries, base)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read configuration {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn from_entries(entries: BTreeMap<String, String>, base: &Path) -> Result<Self> {
        let get = |k: &str| entries.get(k).map(String::as_str);
        let path = |k: &str| get(k).map(|v| base.join(v));
        let seed = get("seed").map_or(Ok(0), |v| parse("seed", v))?;

        let stages = match get("stages") {
            Some(v) => {
                let mut s: Vec<Stage> = list(v).iter().map(|s| s.parse()).collect::<Result<_>>()?;
                s.sort();
                s.dedup();
                s
            }
            None => Stage::ALL[1..].to_vec(),
        };
        let covariates = match get("did.covariates") {
            Some(v) => list(v).iter().map(|s| s.parse()).collect::<Result<_>>()?,
            None => vec![
                Covariate::Size,
                Covariate::Age,
                Covariate::CapitalIntensity,
                Covariate::Tfp,
                Covariate::Industry,
            ],
        };
        let outcomes = |k: &str| -> Result<Vec<DashOutcome>> {
            match get(k) {
                Some(v) => list(v).iter().map(|s| s.parse()).collect(),
                None => Ok(DashOutcome::ALL.to_vec()),
            }
        };
        let control_rule = match get("did.control").unwrap_or("never") {
            "never" => ControlRule::NeverTreated,
            "not-yet" => ControlRule::NotYetTreated,
            v => return bad("did.control", v, "expected never or not-yet"),
        };
        let vertical_percentile: f64 = get("vertical.percentile").map_or(Ok(50.0), |v| parse("vertical.percentile", v))?;
        if ![25.0, 50.0, 75.0].contains(&vertical_percentile) {
            return bad("vertical.percentile", &vertical_percentile.to_string(), "expected 25, 50 or 75");
        }
        let vertical_reference = match get("vertical.reference").unwrap_or("deals") {
            "deals" => Reference::SampleDeals,
            "table" => Reference::WholeTable,
            v => return bad("vertical.reference", v, "expected deals or table"),
        };
        let perimeter_bin = get("filter.perimeter_bin").map(str::to_string);
        if let Some(b) = &perimeter_bin {
            if !PERIMETER_BINS.contains(&b.as_str()) {
                return bad("filter.perimeter_bin", b, "expected 1-5, 6-30, 31-100 or >100");
            }
        }
        let alpha: f64 = get("did.alpha").map_or(Ok(0.05), |v| parse("did.alpha", v))?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return bad("did.alpha", &alpha.to_string(), "must lie in (0, 1)");
        }

        let cfg = Self {
            inputs: Inputs {
                firms: path("firms"),
                deflators: path("deflators"),
                treatments: path("treatments"),
                io_table: path("io_table"),
                industry_bridge: path("industry_bridge"),
                country_groups: path("country_groups"),
                tech_classes: path("tech_classes"),
            },
            out: path("out").unwrap_or_else(|| base.join("results")),
            stages,
            seed,
            prodfn_method: get("prodfn.method").map_or(Ok(Estimator::Acf), str::parse)?,
            prodfn_form: get("prodfn.form").map_or(Ok(Form::CobbDouglas), str::parse)?,
            prodfn_bootstrap_reps: get("prodfn.bootstrap_reps").map_or(Ok(0), |v| parse("prodfn.bootstrap_reps", v))?,
            prodfn_min_obs: get("prodfn.min_obs").map_or(Ok(30), |v| parse("prodfn.min_obs", v))?,
            flexible_input: get("markups.flexible_input").map_or(Ok(FlexibleInput::Materials), str::parse)?,
            correct_shares: get("markups.correct_shares").map_or(Ok(true), |v| parse_bool("markups.correct_shares", v))?,
            control_rule,
            anticipation: get("did.anticipation").map_or(Ok(0), |v| parse("did.anticipation", v))?,
            covariates,
            outcomes: outcomes("did.outcomes")?,
            window: get("did.window").map(|v| parse_window("did.window", v)).transpose()?,
            bootstrap_reps: get("did.bootstrap_reps").map_or(Ok(999), |v| parse("did.bootstrap_reps", v))?,
            alpha,
            vertical_percentile,
            vertical_reference,
            filters: Filters {
                countries: get("filter.countries").map(list).unwrap_or_default(),
                tech_class: get("filter.tech_class").map(str::to_string),
                foreign_only: get("filter.foreign_only").map_or(Ok(false), |v| parse_bool("filter.foreign_only", v))?,
                perimeter_bin,
                deal_type: get("filter.deal_type").map(str::parse).transpose()?,
            },
            psm_caliper: get("psm.caliper").map(|v| parse("psm.caliper", v)).transpose()?,
            psm_replacement: get("psm.replacement").map_or(Ok(false), |v| parse_bool("psm.replacement", v))?,
            psm_window: get("psm.window").map_or(Ok((3, 3)), |v| parse_window("psm.window", v))?,
            psm_outcomes: outcomes("psm.outcomes")?,
            sim: sim_config(&entries, seed)?,
            entries,
        };
        Ok(cfg)
    }

    /// Applies command-line overrides.
    pub fn with_overrides(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
            self.sim.seed = s;
            self.entries.insert("seed".into(), s.to_string());
        }
        if let Some(o) = out {
            self.out = o;
        }
        self
    }

    /// SHA-256 of the canonical `key=value` listing.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.entries {
            if !UNHASHED.contains(&k.as_str()) {
                h.update(format!("{k}={v}\n"));
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn sim_config(entries: &BTreeMap<String, String>, seed: u64) -> Result<SimConfig> {
    let get = |k: &str| entries.get(k).map(String::as_str);
    let mut cfg = SimConfig {
        seed,
        ..SimConfig::default()
    };
    if let Some(v) = get("simulate.firms_per_industry") {
        cfg.n_firms = parse("simulate.firms_per_industry", v)?;
    }
    let beta = match get("simulate.beta") {
        Some(v) => beta_from(&parse_floats("simulate.beta", v, 3).or_else(|_| parse_floats("simulate.beta", v, 9))?),
        None => cfg.industries[0].beta,
    };
    let codes = get("simulate.industries").map_or_else(|| vec![cfg.industries[0].code.clone()], list);
    cfg.industries = codes
        .into_iter()
        .map(|code| {
            let key = format!("simulate.beta.{code}");
            let beta = match get(&key) {
                Some(v) => beta_from(&parse_floats(&key, v, 3).or_else(|_| parse_floats(&key, v, 9))?),
                None => beta,
            };
            Ok(IndustryTech { code, beta })
        })
        .collect::<Result<_>>()?;
    if let Some(v) = get("simulate.countries") {
        cfg.countries = list(v);
    }
    if let Some(v) = get("simulate.start_year") {
        cfg.start_year = parse("simulate.start_year", v)?;
    }
    if let Some(v) = get("simulate.end_year") {
        cfg.end_year = parse("simulate.end_year", v)?;
    }
    if let Some(v) = get("simulate.rho") {
        cfg.rho = parse("simulate.rho", v)?;
    }
    if let Some(v) = get("simulate.sigma_xi") {
        cfg.sigma_xi = parse("simulate.sigma_xi", v)?;
    }
    if let Some(v) = get("simulate.sigma_eps") {
        cfg.sigma_eps = parse("simulate.sigma_eps", v)?;
    }
    if let Some(v) = get("simulate.sigma_labor") {
        cfg.sigma_labor = parse("simulate.sigma_labor", v)?;
    }
    if let Some(v) = get("simulate.productivity") {
        cfg.productivity = parse_bool("simulate.productivity", v)?;
    }
    if let Some(v) = get("simulate.markup") {
        cfg.markup = parse_markup_rule("simulate.markup", v)?;
    }
    if let Some(v) = get("simulate.cohorts") {
        cfg.cohorts = list(v)
            .iter()
            .map(|c| {
                let (y, s) = c
                    .split_once(':')
                    .map_or_else(|| bad("simulate.cohorts", v, "expected YEAR:SHARE items"), Ok)?;
                Ok(CohortSpec {
                    year: parse("simulate.cohorts", y)?,
                    share: parse("simulate.cohorts", s)?,
                })
            })
            .collect::<Result<_>>()?;
    }
    if let Some(v) = get("simulate.selection") {
        let s = parse_floats("simulate.selection", v, 3)?;
        cfg.selection = Selection {
            size: s[0],
            capital_intensity: s[1],
            tfp: s[2],
        };
    }
    let outcome = match get("simulate.effect_outcome").unwrap_or("sales") {
        "sales" => EffectOutcome::Sales,
        "markup" => EffectOutcome::Markup,
        v => return bad("simulate.effect_outcome", v, "expected sales or markup"),
    };
    let path = get("simulate.effect").map_or(Ok(EffectPath::Constant(0.0)), |v| parse_effect_path("simulate.effect", v))?;
    cfg.effect = Effect { outcome, path };
    if let Some(v) = get("simulate.deflate") {
        cfg.deflate = parse_bool("simulate.deflate", v)?;
    }
    if let Some(v) = get("simulate.burn_in") {
        cfg.burn_in = parse("simulate.burn_in", v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Three values are Cobb-Douglas `(l, k, m)`; nine are the full translog in
/// the order l, k, m, l2, k2, m2, lk, lm, km.
fn beta_from(v: &[f64]) -> Beta {
    if v.len() == 3 {
        Beta::cobb_douglas(v[0], v[1], v[2])
    } else {
        let mut b = [0.0; 9];
        b.copy_from_slice(v);
        Beta(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = RunConfig::parse("seed = 3\nstages = report, did\n", Path::new("/tmp/x")).unwrap();
        assert_eq!(cfg.stages, vec![Stage::Did, Stage::Report]);
        assert_eq!(cfg.sim.seed, 3);
        assert_eq!(cfg.out, PathBuf::from("/tmp/x/results"));
        let h = cfg.hash();
        let moved = cfg.clone().with_overrides(None, Some("/elsewhere".into()));
        assert_eq!(moved.hash(), h);
        let reseeded = cfg.with_overrides(Some(4), None);
        assert_ne!(reseeded.hash(), h);
        assert_eq!(reseeded.sim.seed, 4);
    }

    #[test]
    fn rejects_unknown_and_repeated_keys() {
        assert!(matches!(RunConfig::parse("colour = red", Path::new(".")), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("seed = 1\nseed = 2", Path::new(".")), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("vertical.percentile = 60", Path::new(".")), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("stages = fly", Path::new(".")), Err(Error::Config(_))));
    }

    #[test]
    fn simulation_keys() {
        let cfg = RunConfig::parse(
            "simulate.industries = 10, 25\nsimulate.beta.25 = 0.3, 0.1, 0.5\nsimulate.markup = lognormal:1.2:0.2\n\
             simulate.cohorts = 2012:0.1, 2015:0.2\nsimulate.effect = linear:0.01\nsimulate.effect_outcome = markup\n",
            Path::new("."),
        )
        .unwrap();
        assert_eq!(cfg.sim.industries.len(), 2);
        assert_eq!(cfg.sim.industries[1].beta, Beta::cobb_douglas(0.3, 0.1, 0.5));
        assert_eq!(cfg.sim.markup, MarkupRule::Lognormal { median: 1.2, sigma: 0.2 });
        assert_eq!(cfg.sim.cohorts[1], CohortSpec { year: 2015, share: 0.2 });
        assert_eq!(cfg.sim.effect.path, EffectPath::Linear(0.01));
        assert!(RunConfig::parse("simulate.cohorts = 2012:0.7, 2015:0.4", Path::new(".")).is_err());
    }
}
