//! Doubly robust staggered difference-in-differences.
//!
//! For each cohort `g` (firms first treated in year `g`) and year `t`,
//! [`att_gt`] compares the change `Y_t - Y_{g-1}` of the cohort with that of
//! the control firms, reweighting controls by the odds of the propensity
//! score and removing the part of the change predicted by a linear outcome
//! regression on pre-treatment covariates. Cells are combined into an overall
//! effect, per-cohort effects and an event study; inference uses a firm-level
//! multiplier bootstrap over the influence functions.

mod aggregate;
mod bootstrap;
mod cell;
mod data;

use std::path::Path;

use nalgebra::DVector;

pub use aggregate::{aggregate_by_group, aggregate_overall, event_study, AggregatedEffect, AggregationKind, EventStudy, Parameter};
pub use bootstrap::{bootstrap_se, Bootstrap};
pub use cell::{att_gt, att_gt_all, fit_pscore, AttGt, PscoreFit};
pub use data::{Covariate, DidData, DidFirm, DidObs, Outcome};

use crate::linalg::inverse_spd;
use crate::logit::LogitOptions;
use crate::stats::chi2_sf;
use crate::table::{fmt_f64, write_text, Manifest, TableWriter};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlRule {
    NeverTreated,
    /// Never-treated firms plus firms not yet treated at `max(t, g - 1)`.
    NotYetTreated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortDesign {
    /// Sorted treatment years.
    pub cohorts: Vec<i32>,
    pub control_rule: ControlRule,
    /// Periods of anticipation; the base period is `g - 1 - anticipation`.
    pub anticipation: u32,
    pub pscore_covariates: Vec<Covariate>,
    pub outcome_covariates: Vec<Covariate>,
    /// Controls with a propensity score at or above this value are dropped.
    pub overlap_ceiling: f64,
    pub logit: LogitOptions,
}

impl CohortDesign {
    pub fn new(cohorts: Vec<i32>) -> Self {
        let covariates = vec![
            Covariate::Size,
            Covariate::Age,
            Covariate::CapitalIntensity,
            Covariate::Tfp,
            Covariate::Industry,
        ];
        Self {
            cohorts,
            control_rule: ControlRule::NeverTreated,
            anticipation: 0,
            pscore_covariates: covariates.clone(),
            outcome_covariates: covariates,
            overlap_ceiling: 0.999,
            logit: LogitOptions::default(),
        }
    }

    /// Design over every cohort present in `data`.
    pub fn for_data(data: &DidData) -> Self {
        Self::new(data.cohorts())
    }

    /// Uses the same covariates in both nuisance models.
    pub fn with_covariates(mut self, covariates: Vec<Covariate>) -> Self {
        self.pscore_covariates = covariates.clone();
        self.outcome_covariates = covariates;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.cohorts.is_empty() {
            return Err(Error::Config("cohort design has no cohorts".into()));
        }
        if self.cohorts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("cohorts must be sorted and distinct".into()));
        }
        if !(self.overlap_ceiling > 0.0 && self.overlap_ceiling <= 1.0) {
            return Err(Error::Config(format!(
                "overlap ceiling {} outside (0, 1]",
                self.overlap_ceiling
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DidOptions {
    pub bootstrap_reps: usize,
    pub seed: u64,
    pub alpha: f64,
    /// Event-study window; `None` uses every available exposure.
    pub window: Option<(i32, i32)>,
}

impl Default for DidOptions {
    fn default() -> Self {
        Self {
            bootstrap_reps: 999,
            seed: 0,
            alpha: 0.05,
            window: None,
        }
    }
}

/// Joint Wald test that every pre-treatment event-study coefficient is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrendTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DidResults {
    pub outcome: String,
    pub cells: Vec<AttGt>,
    pub groups: AggregatedEffect,
    pub overall: Parameter,
    pub event: EventStudy,
    pub pretrend: Option<PretrendTest>,
    pub cell_critical_value: f64,
    pub event_critical_value: f64,
    pub warnings: Vec<String>,
}

fn set_inference(p: &mut Parameter, se: f64, crit: f64) {
    p.se = se;
    p.ci_low = p.estimate - crit * se;
    p.ci_high = p.estimate + crit * se;
}

/// Wald statistic `b' V^-1 b` for the pre-treatment coefficients.
pub fn pretrend_test(event: &EventStudy, boot: &Bootstrap, index: &[usize]) -> Result<Option<PretrendTest>> {
    let pre: Vec<f64> = event.pre().map(|(_, p)| p.estimate).collect();
    if pre.is_empty() {
        return Ok(None);
    }
    let cov = boot.covariance(index);
    let inv = inverse_spd(&cov).ok_or_else(|| {
        Error::Inference("bootstrap covariance of pre-treatment coefficients is singular".into())
    })?;
    let b = DVector::from_vec(pre);
    let statistic = (b.transpose() * inv * &b)[(0, 0)];
    let df = b.len();
    Ok(Some(PretrendTest {
        statistic,
        df,
        p_value: chi2_sf(statistic, df as f64),
    }))
}

/// Full pipeline: cells, aggregation, event study, bootstrap inference and
/// the pretrend test.
pub fn estimate(data: &DidData, design: &CohortDesign, opts: &DidOptions) -> Result<DidResults> {
    design.validate()?;
    let mut warnings = Vec::new();
    if data.dropped_early > 0 {
        warnings.push(format!(
            "{} firms treated in the first sample year were dropped",
            data.dropped_early
        ));
    }
    let mut cells = att_gt_all(data, design);
    for c in cells.iter().filter(|c| !c.feasible) {
        warnings.push(format!(
            "cell (g={}, t={}) infeasible: {}",
            c.g,
            c.t,
            c.reason.as_deref().unwrap_or("")
        ));
    }
    let mut groups = aggregate_by_group(&cells, data)?;
    let mut overall = aggregate_overall(&cells, data)?.params.remove(0);
    let (first, last) = (data.years[0], *data.years.last().expect("nonempty"));
    let min_g = design.cohorts[0];
    let max_g = *design.cohorts.last().expect("validated");
    let window = opts.window.unwrap_or((first - max_g, last - min_g));
    let mut event = event_study(&cells, data, window, design.anticipation)?;

    // One joint bootstrap over every reported parameter.
    let feasible: Vec<usize> = (0..cells.len()).filter(|&i| cells[i].feasible).collect();
    let mut inf: Vec<&[f64]> = feasible.iter().map(|&i| cells[i].influence.as_slice()).collect();
    let g0 = inf.len();
    inf.extend(groups.params.iter().map(|p| p.influence.as_slice()));
    let o0 = inf.len();
    inf.push(overall.influence.as_slice());
    let e0 = inf.len();
    inf.extend(event.coefficients.iter().map(|(_, p)| p.influence.as_slice()));
    let a0 = inf.len();
    inf.extend(event.pre_average.iter().map(|p| p.influence.as_slice()));
    inf.extend(event.post_average.iter().map(|p| p.influence.as_slice()));
    let boot = bootstrap_se(&inf, opts.bootstrap_reps, opts.seed)?;
    warnings.extend(boot.warnings.iter().cloned());

    let cell_family: Vec<usize> = (0..g0).collect();
    let group_family: Vec<usize> = (g0..o0).collect();
    let event_family: Vec<usize> = (e0..a0).collect();
    let cell_crit = boot.critical_value(&cell_family, opts.alpha);
    let group_crit = boot.critical_value(&group_family, opts.alpha);
    let event_crit = boot.critical_value(&event_family, opts.alpha);
    let pointwise = crate::stats::normal_quantile(1.0 - opts.alpha / 2.0);

    for (k, &i) in feasible.iter().enumerate() {
        let c = &mut cells[i];
        c.se = boot.se[k];
        c.ci_low = c.estimate - cell_crit * c.se;
        c.ci_high = c.estimate + cell_crit * c.se;
    }
    for (k, p) in groups.params.iter_mut().enumerate() {
        set_inference(p, boot.se[g0 + k], group_crit);
    }
    set_inference(&mut overall, boot.se[o0], pointwise);
    for (k, (_, p)) in event.coefficients.iter_mut().enumerate() {
        set_inference(p, boot.se[e0 + k], event_crit);
    }
    let mut next = a0;
    if let Some(p) = event.pre_average.as_mut() {
        set_inference(p, boot.se[next], pointwise);
        next += 1;
    }
    if let Some(p) = event.post_average.as_mut() {
        set_inference(p, boot.se[next], pointwise);
    }
    let pre_index: Vec<usize> = event
        .coefficients
        .iter()
        .enumerate()
        .filter(|(_, (e, _))| *e < 0)
        .map(|(k, _)| e0 + k)
        .collect();
    let pretrend = match pretrend_test(&event, &boot, &pre_index) {
        Ok(t) => t,
        Err(e) => {
            warnings.push(e.to_string());
            None
        }
    };
    Ok(DidResults {
        outcome: data.outcome_name.clone(),
        cells,
        groups,
        overall,
        event,
        pretrend,
        cell_critical_value: cell_crit,
        event_critical_value: event_crit,
        warnings,
    })
}

pub fn write_att_gt_csv(path: &Path, cells: &[AttGt], manifest: Option<&Manifest>) -> Result<()> {
    let mut w = TableWriter::create(
        path,
        manifest,
        &["g", "t", "estimate", "se", "ci_low", "ci_high", "n_treated", "n_control", "feasible"],
    )?;
    for c in cells {
        w.row([
            c.g.to_string(),
            c.t.to_string(),
            fmt_f64(c.estimate),
            fmt_f64(c.se),
            fmt_f64(c.ci_low),
            fmt_f64(c.ci_high),
            c.n_treated.to_string(),
            c.n_control.to_string(),
            c.feasible.to_string(),
        ])?;
    }
    w.finish()
}

pub fn write_event_study_csv(path: &Path, event: &EventStudy, manifest: Option<&Manifest>) -> Result<()> {
    let mut w = TableWriter::create(path, manifest, &["e", "estimate", "se", "ci_low", "ci_high"])?;
    for (e, p) in &event.coefficients {
        w.row([
            e.to_string(),
            fmt_f64(p.estimate),
            fmt_f64(p.se),
            fmt_f64(p.ci_low),
            fmt_f64(p.ci_high),
        ])?;
    }
    w.finish()
}

/// Overall, per-cohort and pre/post summary effects.
pub fn write_aggregates_csv(path: &Path, results: &DidResults, manifest: Option<&Manifest>) -> Result<()> {
    let mut w = TableWriter::create(path, manifest, &["kind", "label", "estimate", "se", "ci_low", "ci_high"])?;
    let mut rows: Vec<(&str, &Parameter)> = vec![("overall", &results.overall)];
    rows.extend(results.groups.params.iter().map(|p| ("group", p)));
    rows.extend(results.event.pre_average.iter().map(|p| ("event", p)));
    rows.extend(results.event.post_average.iter().map(|p| ("event", p)));
    for (kind, p) in rows {
        w.row([
            kind.to_string(),
            p.label.clone(),
            fmt_f64(p.estimate),
            fmt_f64(p.se),
            fmt_f64(p.ci_low),
            fmt_f64(p.ci_high),
        ])?;
    }
    w.finish()
}

pub fn render_pretrend(results: &DidResults) -> String {
    let mut out = format!("Pretrend test, outcome: {}\nH0: all pre-treatment effects are equal to 0\n", results.outcome);
    match &results.pretrend {
        Some(t) => out.push_str(&format!(
            "chi2({}) = {:.4}\np-value = {:.4}\n",
            t.df, t.statistic, t.p_value
        )),
        None => out.push_str("not available: no pre-treatment coefficients\n"),
    }
    if let Some(p) = &results.event.pre_average {
        out.push_str(&format!("pre-treatment average = {:.6} (se {:.6})\n", p.estimate, p.se));
    }
    if let Some(p) = &results.event.post_average {
        out.push_str(&format!("post-treatment average = {:.6} (se {:.6})\n", p.estimate, p.se));
    }
    out
}

pub fn write_pretrend_txt(path: &Path, results: &DidResults, manifest: Option<&Manifest>) -> Result<()> {
    let mut text = String::new();
    if let Some(m) = manifest {
        text.push_str(&m.line());
        text.push('\n');
    }
    text.push_str(&render_pretrend(results));
    write_text(path, &text)
}

#[cfg(test)]
mod tests;
