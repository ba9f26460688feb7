//! Stage execution. Stages exchange data through files under the output
//! directory, with an in-memory cache for stages run together.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use markup_did::did::{self, CohortDesign, DidData, DidOptions, DidResults, Outcome};
use markup_did::markup::{self, Grouping, Weighting};
use markup_did::panel::{self, ColumnMapping, Panel};
use markup_did::prodfn::{self, AcfConfig, ElasticitySet, IndustrySample, TranslogSpec};
use markup_did::psm::{self, FixedEffect, MatchCovariate, MatchOptions, TwfeSpec};
use markup_did::simgen;
use markup_did::table::{fmt_f64, write_text, Manifest, TableReader, TableWriter};
use markup_did::vertical::{self, ClassifiedDeal, IndustryBridge};
use markup_did::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{DashOutcome, RunConfig, Stage};
use crate::filters::{apply_filters, FilterContext};
use crate::report;

pub const FAILED_MARKER: &str = "FAILED";

/// Output locations relative to the run directory.
pub mod paths {
    pub const SIMULATED: &str = "simulated";
    pub const ELASTICITIES: &str = "prodfn/elasticities.csv";
    pub const OBSERVATIONS: &str = "prodfn/observations.csv";
    pub const DIAGNOSTICS: &str = "prodfn/diagnostics.csv";
    pub const MARKUPS: &str = "markups/markups.csv";
    pub const SERIES: &str = "markups/series.csv";
    pub const DISTRIBUTION: &str = "markups/distribution.csv";
    pub const DEALS: &str = "vertical/deals_classified.csv";
    pub const MATCHED: &str = "psm/matched_pairs.csv";
    pub const BALANCE: &str = "psm/balance.csv";
    pub const BALANCE_TXT: &str = "psm/balance.txt";
    pub const TWFE: &str = "psm/twfe_results.csv";
    pub const DATA_QUALITY: &str = "data_quality.txt";
    pub const WARNINGS: &str = "warnings.txt";

    pub fn did_dir(outcome: &str) -> String {
        format!("did/{outcome}")
    }
}

/// Input files actually used, with simulated files filling gaps when the run
/// simulates.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub firms: Option<PathBuf>,
    pub deflators: Option<PathBuf>,
    pub treatments: Option<PathBuf>,
    pub io_table: Option<PathBuf>,
}

pub fn resolve_inputs(cfg: &RunConfig, stages: &[Stage]) -> Resolved {
    let sim = cfg.out.join(paths::SIMULATED);
    let simulating = stages.contains(&Stage::Simulate);
    let pick = |given: &Option<PathBuf>, file: &str| {
        given
            .clone()
            .or_else(|| simulating.then(|| sim.join(file)))
            .or_else(|| {
                // a previous simulate run in the same output directory
                let p = sim.join(file);
                p.exists().then_some(p)
            })
    };
    Resolved {
        firms: pick(&cfg.inputs.firms, "firms.csv"),
        deflators: pick(&cfg.inputs.deflators, "deflators.csv"),
        treatments: pick(&cfg.inputs.treatments, "treatments.csv"),
        io_table: pick(&cfg.inputs.io_table, "io_table.csv"),
    }
}

fn needs_tfp(cfg: &RunConfig, stage: Stage) -> bool {
    match stage {
        Stage::Did | Stage::EventStudy => {
            cfg.covariates.contains(&did::Covariate::Tfp) || cfg.outcomes.contains(&DashOutcome::Tfp)
        }
        Stage::PsmDid => true,
        _ => false,
    }
}

fn needs_markups(cfg: &RunConfig, stage: Stage) -> bool {
    match stage {
        Stage::Did | Stage::EventStudy => cfg.outcomes.contains(&DashOutcome::Markup),
        Stage::PsmDid => cfg.psm_outcomes.contains(&DashOutcome::Markup),
        _ => false,
    }
}

/// Checks that every stage finds its inputs, either on disk now or from an
/// earlier stage of the same run. Nothing is written.
pub fn check_launch(cfg: &RunConfig, stages: &[Stage]) -> markup_did::Result<()> {
    let missing = |what: &str, p: &Path| Error::Config(format!("{what} file {} does not exist", p.display()));
    let inputs = resolve_inputs(cfg, stages);
    let simulating = stages.contains(&Stage::Simulate);
    let configured = [
        ("firms", &cfg.inputs.firms),
        ("deflators", &cfg.inputs.deflators),
        ("treatments", &cfg.inputs.treatments),
        ("io_table", &cfg.inputs.io_table),
        ("industry_bridge", &cfg.inputs.industry_bridge),
        ("country_groups", &cfg.inputs.country_groups),
        ("tech_classes", &cfg.inputs.tech_classes),
    ];
    for (name, p) in configured {
        if let Some(p) = p {
            if !p.exists() {
                return Err(missing(name, p));
            }
        }
    }
    let on_disk = |rel: &str| cfg.out.join(rel).exists();
    for &stage in stages {
        let earlier = |s: Stage| stages.iter().any(|&x| x == s && x < stage);
        let uses_panel = !matches!(stage, Stage::Simulate | Stage::Report);
        if uses_panel && !simulating && inputs.firms.is_none() {
            return Err(Error::Config(format!("stage {stage} needs `firms`")));
        }
        let prodfn_ready = earlier(Stage::EstimateProdfn) || (on_disk(paths::ELASTICITIES) && on_disk(paths::OBSERVATIONS));
        if (stage == Stage::Markups || needs_tfp(cfg, stage)) && !prodfn_ready {
            return Err(Error::Config(format!(
                "stage {stage} needs production-function estimates: run estimate-prodfn first"
            )));
        }
        if needs_markups(cfg, stage) && !(earlier(Stage::Markups) || on_disk(paths::MARKUPS)) {
            return Err(Error::Config(format!("stage {stage} needs markups: run markups first")));
        }
        if stage == Stage::Classify && inputs.io_table.is_none() {
            return Err(Error::Config("stage classify needs `io_table`".into()));
        }
        if matches!(stage, Stage::Did | Stage::EventStudy | Stage::PsmDid)
            && cfg.filters.deal_type.is_some()
            && !(earlier(Stage::Classify) || on_disk(paths::DEALS))
        {
            return Err(Error::Config(format!("stage {stage} filters on deal type: run classify first")));
        }
    }
    Ok(())
}

#[derive(Default)]
struct Cache {
    panel: Option<Panel>,
    sets: Option<Vec<ElasticitySet>>,
    log_markups: Option<BTreeMap<(String, i32), f64>>,
    deals: Option<Vec<ClassifiedDeal>>,
    analysis: Option<Panel>,
    did: BTreeMap<DashOutcome, (DidResults, SampleSize)>,
}

/// Size of the estimation sample behind one outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSize {
    pub observations: usize,
    pub firms: usize,
    pub treated_firms: usize,
}

impl SampleSize {
    fn of(data: &DidData) -> Self {
        Self {
            observations: data.firms.iter().map(|f| f.obs.len()).sum(),
            firms: data.firms.len(),
            treated_firms: data.firms.iter().filter(|f| f.cohort.is_some()).count(),
        }
    }
}


pub struct Pipeline<'a> {
    cfg: &'a RunConfig,
    stages: Vec<Stage>,
    inputs: Resolved,
    manifest: Manifest,
    cache: Cache,
    warnings: Vec<String>,
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: &'a RunConfig, stages: &[Stage]) -> Self {
        let mut stages = stages.to_vec();
        stages.sort();
        stages.dedup();
        Self {
            cfg,
            inputs: resolve_inputs(cfg, &stages),
            stages,
            manifest: Manifest {
                config_sha256: cfg.hash(),
                seed: cfg.seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
            },
            cache: Cache::default(),
            warnings: Vec::new(),
        }
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    fn out(&self, rel: &str) -> PathBuf {
        self.cfg.out.join(rel)
    }

    fn warn(&mut self, stage: Stage, msg: impl Into<String>) {
        let msg = msg.into();
        eprintln!("warning [{stage}]: {msg}");
        self.warnings.push(format!("{stage}: {msg}"));
    }

    /// Runs every stage in dependency order. On failure the partial outputs
    /// stay in place next to a `FAILED` marker naming the stage.
    pub fn run(&mut self) -> Result<()> {
        check_launch(self.cfg, &self.stages)?;
        std::fs::create_dir_all(&self.cfg.out)
            .with_context(|| format!("creating output directory {}", self.cfg.out.display()))?;
        let marker = self.out(FAILED_MARKER);
        if marker.exists() {
            std::fs::remove_file(&marker).with_context(|| format!("removing stale {}", marker.display()))?;
        }
        for stage in self.stages.clone() {
            if let Err(e) = self.run_stage(stage).with_context(|| format!("stage {stage} failed")) {
                let text = format!("{}\n{:#}\n", self.manifest.line(), e);
                let _ = std::fs::write(&marker, text);
                return Err(e);
            }
        }
        let mut text = format!("{}\n", self.manifest.line());
        for w in &self.warnings {
            text.push_str(w);
            text.push('\n');
        }
        write_text(&self.out(paths::WARNINGS), &text)?;
        Ok(())
    }

    fn run_stage(&mut self, stage: Stage) -> Result<()> {
        match stage {
            Stage::Simulate => self.simulate(),
            Stage::EstimateProdfn => self.estimate_prodfn(),
            Stage::Markups => self.markups(),
            Stage::Classify => self.classify(),
            Stage::Did => self.did(),
            Stage::EventStudy => self.event_study(),
            Stage::PsmDid => self.psm_did(),
            Stage::Report => {
                let warnings = report::write_report(&self.cfg.out, &self.cfg.outcomes, &self.manifest)?;
                for w in warnings {
                    self.warn(stage, w);
                }
                Ok(())
            }
        }
    }

    fn simulate(&mut self) -> Result<()> {
        let sim = simgen::generate(&self.cfg.sim)?;
        let dir = self.out(paths::SIMULATED);
        sim.write(&dir, Some(&self.manifest))?;
        write_synthetic_io_table(&dir.join("io_table.csv"), &self.cfg.sim, &self.manifest)?;
        Ok(())
    }

    /// Deflated panel with treatments and derived variables.
    fn panel(&mut self) -> Result<Panel> {
        if let Some(p) = &self.cache.panel {
            return Ok(p.clone());
        }
        let firms = self.inputs.firms.clone().context("no firms file")?;
        let mut p = panel::load_panel(&firms, &ColumnMapping::default())?;
        if let Some(t) = &self.inputs.treatments {
            p = p.with_treatments(panel::load_treatments(t)?)?;
        }
        if let Some(d) = &self.inputs.deflators {
            p = p.apply_deflators(&panel::load_deflators(d)?)?;
        }
        let p = p.derive_variables()?;
        let mut report = format!("{}\n", self.manifest.line());
        report.push_str(&p.report().render());
        write_text(&self.out(paths::DATA_QUALITY), &report)?;
        self.cache.panel = Some(p.clone());
        Ok(p)
    }

    fn estimate_prodfn(&mut self) -> Result<()> {
        let panel = self.panel()?;
        let spec = TranslogSpec {
            form: self.cfg.prodfn_form,
            min_obs: self.cfg.prodfn_min_obs,
            ..TranslogSpec::default()
        };
        let acf = AcfConfig {
            seed: self.cfg.seed,
            ..AcfConfig::default()
        };
        let mut sets = Vec::new();
        for (industry, res) in prodfn::estimate_industries(&panel, self.cfg.prodfn_method, &spec, &acf) {
            match res {
                Ok(mut set) => {
                    if self.cfg.prodfn_bootstrap_reps > 0 {
                        let sample = IndustrySample::from_panel(&panel, &industry)?;
                        set.std_errors = Some(prodfn::bootstrap_std_errors(
                            &sample,
                            self.cfg.prodfn_method,
                            &spec,
                            &acf,
                            self.cfg.prodfn_bootstrap_reps,
                            self.cfg.seed,
                        )?);
                    }
                    sets.push(set);
                }
                Err(e) => self.warn(Stage::EstimateProdfn, format!("industry {industry} skipped: {e}")),
            }
        }
        if sets.is_empty() {
            return Err(Error::Estimation("no industry could be estimated".into()).into());
        }
        let m = Some(&self.manifest);
        prodfn::write_elasticities_csv(&self.out(paths::ELASTICITIES), &sets, m)?;
        prodfn::write_observations_csv(&self.out(paths::OBSERVATIONS), &sets, m)?;
        prodfn::write_diagnostics_csv(&self.out(paths::DIAGNOSTICS), &sets, m)?;
        self.cache.sets = Some(sets);
        Ok(())
    }

    fn sets(&mut self) -> Result<Vec<ElasticitySet>> {
        if let Some(s) = &self.cache.sets {
            return Ok(s.clone());
        }
        let s = prodfn::load_elasticity_sets(&self.out(paths::ELASTICITIES), &self.out(paths::OBSERVATIONS))?;
        self.cache.sets = Some(s.clone());
        Ok(s)
    }

    fn markups(&mut self) -> Result<()> {
        let sets = self.sets()?;
        let estimated: Vec<&str> = sets.iter().map(|s| s.industry.as_str()).collect();
        let panel = self.panel()?;
        let dropped = panel.rows().iter().filter(|r| !estimated.contains(&r.industry.as_str())).count();
        if dropped > 0 {
            self.warn(Stage::Markups, format!("{dropped} observations in industries without estimates"));
        }
        let panel = panel.filter_rows(|r| estimated.contains(&r.industry.as_str()))?;
        let set = markup::compute_markups(&panel, &sets, self.cfg.flexible_input, self.cfg.correct_shares)?;
        for (reason, n) in &set.excluded {
            self.warn(Stage::Markups, format!("{n} observations excluded: {reason}"));
        }
        let m = Some(&self.manifest);
        markup::write_markups_csv(&self.out(paths::MARKUPS), &set.records, m)?;
        let series = markup::aggregate_markups(&set.records, Weighting::Sales, Grouping::Year)?;
        markup::write_series_csv(&self.out(paths::SERIES), &series, m)?;
        let mut years: Vec<i32> = set.records.iter().map(|r| r.year).collect();
        years.sort_unstable();
        years.dedup();
        let dists = years
            .iter()
            .map(|&y| markup::markup_distribution(&set.records, y))
            .collect::<markup_did::Result<Vec<_>>>()?;
        markup::write_distribution_csv(&self.out(paths::DISTRIBUTION), &dists, m)?;
        self.cache.log_markups = Some(
            set.records
                .iter()
                .map(|r| ((r.firm_id.clone(), r.year), r.mu.ln()))
                .collect(),
        );
        Ok(())
    }

    fn log_markups(&mut self) -> Result<BTreeMap<(String, i32), f64>> {
        if let Some(m) = &self.cache.log_markups {
            return Ok(m.clone());
        }
        let mut out = BTreeMap::new();
        let mut reader = TableReader::open(&self.out(paths::MARKUPS))?;
        reader.require(&["firm_id", "year", "mu"])?;
        reader.for_each(|row| {
            out.insert((row.text("firm_id")?, row.i32("year")?), row.f64("mu")?.ln());
            Ok(())
        })?;
        self.cache.log_markups = Some(out.clone());
        Ok(out)
    }

    fn classify(&mut self) -> Result<()> {
        let panel = self.panel()?;
        let io = vertical::load_io_table(self.inputs.io_table.as_ref().context("no io_table")?)?;
        let bridge = match &self.cfg.inputs.industry_bridge {
            Some(p) => vertical::load_bridge(p)?,
            None => IndustryBridge::default(),
        };
        let (deals, skipped) = vertical::deals_from_panel(&panel);
        if skipped > 0 {
            self.warn(Stage::Classify, format!("{skipped} deals without acquirer industry left unclassified"));
        }
        let classified = vertical::classify_deals(
            &deals,
            &io,
            &bridge,
            self.cfg.vertical_percentile,
            self.cfg.vertical_reference,
        )?;
        vertical::write_deals_csv(&self.out(paths::DEALS), &classified, Some(&self.manifest))?;
        self.cache.deals = Some(classified);
        Ok(())
    }

    /// Panel for the treatment-effect stages: filtered, with estimated TFP.
    fn analysis_panel(&mut self, stage: Stage) -> Result<Panel> {
        if let Some(p) = &self.cache.analysis {
            return Ok(p.clone());
        }
        let mut panel = self.panel()?;
        if needs_tfp(self.cfg, stage) || self.sets_available() {
            let tfp: BTreeMap<(String, i32), f64> = self.sets()?.iter().flat_map(|s| s.tfp_map()).collect();
            panel = panel.with_tfp(&tfp)?;
        }
        if !self.cfg.filters.is_empty() {
            let deal_types = if self.cfg.filters.deal_type.is_some() {
                Some(match &self.cache.deals {
                    Some(d) => d.iter().map(|c| (c.deal.target_id.clone(), c.classification)).collect(),
                    None => vertical::load_deal_types(&self.out(paths::DEALS))?,
                })
            } else {
                None
            };
            let ctx = FilterContext::build(
                &panel,
                self.cfg.inputs.country_groups.as_deref(),
                self.cfg.inputs.tech_classes.as_deref(),
                deal_types.as_ref(),
            )?;
            panel = apply_filters(panel, &self.cfg.filters, &ctx)?;
        }
        self.cache.analysis = Some(panel.clone());
        Ok(panel)
    }

    fn sets_available(&self) -> bool {
        self.cache.sets.is_some() || (self.out(paths::ELASTICITIES).exists() && self.out(paths::OBSERVATIONS).exists())
    }

    fn outcome(&mut self, o: DashOutcome, panel: &Panel) -> Result<Outcome> {
        let custom = |name: &str, values: BTreeMap<(String, i32), f64>| Outcome::Custom {
            name: name.to_string(),
            values,
        };
        let derived = panel.derived()?;
        let from_rows = |f: &dyn Fn(&panel::FirmYear, &panel::DerivedVars) -> Option<f64>| {
            panel
                .rows()
                .iter()
                .zip(derived)
                .filter_map(|(r, d)| f(r, d).map(|v| ((r.firm_id.clone(), r.year), v)))
                .collect::<BTreeMap<_, _>>()
        };
        Ok(match o {
            DashOutcome::Markup => custom("markup", self.log_markups()?),
            DashOutcome::MarketShare => Outcome::MarketShare,
            DashOutcome::Sales => Outcome::LogSales,
            DashOutcome::VariableCost => custom("variable_cost", from_rows(&|_, d| Some(d.log_variable_cost))),
            DashOutcome::VariableCostRatio => Outcome::VariableCostRatio,
            DashOutcome::Tfp => Outcome::Tfp,
            DashOutcome::Roi => custom("roi", from_rows(&|r, _| r.roi)),
            DashOutcome::CapitalIntensity => Outcome::LogCapitalIntensity,
            DashOutcome::Liquidity => custom("liquidity", from_rows(&|r, _| r.liquidity_ratio)),
            DashOutcome::Solvency => custom("solvency", from_rows(&|r, _| r.solvency_ratio)),
        })
    }

    fn did_results(&mut self, stage: Stage, o: DashOutcome) -> Result<(DidResults, SampleSize)> {
        if let Some(r) = self.cache.did.get(&o) {
            return Ok(r.clone());
        }
        let panel = self.analysis_panel(stage)?;
        let outcome = self.outcome(o, &panel)?;
        let data = DidData::from_panel(&panel, &outcome)?;
        let size = SampleSize::of(&data);
        let mut design = CohortDesign::for_data(&data);
        design.control_rule = self.cfg.control_rule;
        design.anticipation = self.cfg.anticipation;
        design.pscore_covariates = self.cfg.covariates.clone();
        design.outcome_covariates = self.cfg.covariates.clone();
        let opts = DidOptions {
            bootstrap_reps: self.cfg.bootstrap_reps,
            seed: self.cfg.seed,
            alpha: self.cfg.alpha,
            window: self.cfg.window,
        };
        let res = did::estimate(&data, &design, &opts).with_context(|| format!("outcome {}", o.label()))?;
        for w in &res.warnings {
            self.warn(stage, format!("{}: {w}", o.label()));
        }
        self.cache.did.insert(o, (res.clone(), size));
        Ok((res, size))
    }

    fn did(&mut self) -> Result<()> {
        for o in self.cfg.outcomes.clone() {
            let (res, size) = self.did_results(Stage::Did, o)?;
            let dir = self.out(&paths::did_dir(o.label()));
            let m = Some(&self.manifest);
            did::write_att_gt_csv(&dir.join("att_gt.csv"), &res.cells, m)?;
            did::write_aggregates_csv(&dir.join("aggregates.csv"), &res, m)?;
            let mut w = TableWriter::create(&dir.join("sample.csv"), m, &["observations", "firms", "treated_firms"])?;
            w.row([size.observations.to_string(), size.firms.to_string(), size.treated_firms.to_string()])?;
            w.finish()?;
        }
        Ok(())
    }

    fn event_study(&mut self) -> Result<()> {
        for o in self.cfg.outcomes.clone() {
            let (res, _) = self.did_results(Stage::EventStudy, o)?;
            let dir = self.out(&paths::did_dir(o.label()));
            let m = Some(&self.manifest);
            did::write_event_study_csv(&dir.join("event_study.csv"), &res.event, m)?;
            did::write_pretrend_txt(&dir.join("pretrend.txt"), &res, m)?;
        }
        Ok(())
    }

    fn psm_did(&mut self) -> Result<()> {
        let panel = self.analysis_panel(Stage::PsmDid)?;
        let sample = psm::fit_match_pscores(&panel, &MatchCovariate::ALL, Default::default())?;
        if sample.missing > 0 {
            self.warn(Stage::PsmDid, format!("{} matching units lack a covariate", sample.missing));
        }
        let opts = MatchOptions {
            caliper: self.cfg.psm_caliper,
            with_replacement: self.cfg.psm_replacement,
            common_support: true,
        };
        let matched = psm::match_sample(&sample, &opts);
        if !matched.off_support.is_empty() || !matched.unmatched.is_empty() {
            self.warn(
                Stage::PsmDid,
                format!(
                    "{} treated firms off support, {} without a control",
                    matched.off_support.len(),
                    matched.unmatched.len()
                ),
            );
        }
        let balance = psm::balance_diagnostics(&sample, &matched)?;
        let manifest = self.manifest.clone();
        let m = Some(&manifest);
        psm::write_matched_pairs_csv(&self.out(paths::MATCHED), &matched, m)?;
        psm::write_balance_csv(&self.out(paths::BALANCE), &balance, m)?;
        write_text(
            &self.out(paths::BALANCE_TXT),
            &format!("{}\n{}", self.manifest.line(), balance.render()),
        )?;

        let mut results = Vec::new();
        for o in self.cfg.psm_outcomes.clone() {
            // The outcome never doubles as its own control.
            let controls: Vec<MatchCovariate> = [
                MatchCovariate::CapitalIntensity,
                MatchCovariate::Age,
                MatchCovariate::Tfp,
                MatchCovariate::Size,
            ]
            .into_iter()
            .filter(|c| {
                !matches!(
                    (o, c),
                    (DashOutcome::CapitalIntensity, MatchCovariate::CapitalIntensity)
                        | (DashOutcome::Tfp, MatchCovariate::Tfp)
                )
            })
            .collect();
            let outcome = self.outcome(o, &panel)?;
            let obs = psm::matched_panel(&panel, &matched, &outcome, &controls, self.cfg.psm_window)?;
            let spec = TwfeSpec {
                fixed_effects: vec![FixedEffect::Year, FixedEffect::Country, FixedEffect::Industry],
                controls: controls.iter().map(|c| c.label().to_string()).collect(),
            };
            match psm::twfe_did(&obs, &spec) {
                Ok(r) => results.push((o.label().to_string(), r)),
                Err(e) => self.warn(Stage::PsmDid, format!("{}: {e}", o.label())),
            }
        }
        psm::write_twfe_csv(&self.out(paths::TWFE), &results, true, m)?;
        Ok(())
    }
}

/// Random technical coefficients over the simulated industry codes and the
/// acquirer codes the generator uses.
fn write_synthetic_io_table(path: &Path, sim: &simgen::SimConfig, manifest: &Manifest) -> Result<()> {
    let mut codes: Vec<String> = sim.industries.iter().map(|i| i.code.clone()).collect();
    codes.extend(["20", "46", "70"].iter().map(|s| s.to_string()));
    codes.sort();
    codes.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed ^ 0x10_7AB1E);
    let mut w = TableWriter::create(path, Some(manifest), &["input_code", "output_code", "coefficient"])?;
    for a in &codes {
        for b in &codes {
            let v: f64 = rng.gen_range(0.0..0.3);
            w.row([a.clone(), b.clone(), fmt_f64(v)])?;
        }
    }
    w.finish()?;
    Ok(())
}
