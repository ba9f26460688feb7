use std::collections::BTreeMap;

use super::cell::AttGt;
use super::data::DidData;
use crate::{Error, Result};

/// A scalar summary of group-time effects with its influence function.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub label: String,
    pub estimate: f64,
    pub influence: Vec<f64>,
    /// Weights on the components, summing to one.
    pub weights: Vec<(String, f64)>,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Parameter {
    fn new(label: String, estimate: f64, influence: Vec<f64>, weights: Vec<(String, f64)>) -> Self {
        Self {
            label,
            estimate,
            influence,
            weights,
            se: f64::NAN,
            ci_low: f64::NAN,
            ci_high: f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationKind {
    Overall,
    ByGroup,
    ByExposure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedEffect {
    pub kind: AggregationKind,
    pub params: Vec<Parameter>,
}

/// Share of all firms in each cohort, `P(G = g)` before normalisation.
fn cohort_probabilities(data: &DidData) -> BTreeMap<i32, f64> {
    let n = data.len() as f64;
    let mut counts: BTreeMap<i32, f64> = BTreeMap::new();
    for f in &data.firms {
        if let Some(g) = f.cohort {
            *counts.entry(g).or_insert(0.0) += 1.0;
        }
    }
    counts.into_iter().map(|(g, c)| (g, c / n)).collect()
}

/// Cohort-share weighted combination of `(g, value, influence)` components,
/// including the estimation effect of the cohort shares.
fn share_weighted(data: &DidData, label: String, parts: &[(i32, f64, &[f64])]) -> Parameter {
    let pg = cohort_probabilities(data);
    let total: f64 = parts.iter().map(|(g, _, _)| pg[g]).sum();
    let n = data.len();
    let weights: Vec<f64> = parts.iter().map(|(g, _, _)| pg[g] / total).collect();
    let estimate = parts.iter().zip(&weights).map(|((_, v, _), w)| w * v).sum();
    let mut influence = vec![0.0; n];
    for ((_, _, inf), w) in parts.iter().zip(&weights) {
        for (o, v) in influence.iter_mut().zip(inf.iter()) {
            *o += w * v;
        }
    }
    for (i, f) in data.firms.iter().enumerate() {
        let dev: Vec<f64> = parts
            .iter()
            .map(|(g, _, _)| f64::from(u8::from(f.cohort == Some(*g))) - pg[g])
            .collect();
        let dev_sum: f64 = dev.iter().sum();
        for (k, (g, v, _)) in parts.iter().enumerate() {
            let wif = dev[k] / total - dev_sum * pg[g] / (total * total);
            influence[i] += wif * v;
        }
    }
    let weights = parts
        .iter()
        .zip(weights)
        .map(|((g, _, _), w)| (format!("g={g}"), w))
        .collect();
    Parameter::new(label, estimate, influence, weights)
}

/// Per-cohort average of feasible post-treatment cells.
pub fn aggregate_by_group(cells: &[AttGt], data: &DidData) -> Result<AggregatedEffect> {
    let mut by_g: BTreeMap<i32, Vec<&AttGt>> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.feasible && c.t >= c.g) {
        by_g.entry(c.g).or_default().push(c);
    }
    if by_g.is_empty() {
        return Err(Error::Aggregation("no feasible post-treatment cell".into()));
    }
    let n = data.len();
    let params = by_g
        .into_iter()
        .map(|(g, cs)| {
            let w = 1.0 / cs.len() as f64;
            let estimate = cs.iter().map(|c| c.estimate).sum::<f64>() * w;
            let mut influence = vec![0.0; n];
            for c in &cs {
                for (o, v) in influence.iter_mut().zip(&c.influence) {
                    *o += w * v;
                }
            }
            let weights = cs.iter().map(|c| (format!("t={}", c.t), w)).collect();
            Parameter::new(format!("g={g}"), estimate, influence, weights)
        })
        .collect();
    Ok(AggregatedEffect {
        kind: AggregationKind::ByGroup,
        params,
    })
}

/// Overall effect: cohort effects weighted by the cohort's share of treated
/// firms.
pub fn aggregate_overall(cells: &[AttGt], data: &DidData) -> Result<AggregatedEffect> {
    let groups = aggregate_by_group(cells, data)?;
    let parts: Vec<(i32, f64, &[f64])> = groups
        .params
        .iter()
        .map(|p| {
            let g: i32 = p.label[2..].parse().expect("label is g=<year>");
            (g, p.estimate, p.influence.as_slice())
        })
        .collect();
    Ok(AggregatedEffect {
        kind: AggregationKind::Overall,
        params: vec![share_weighted(data, "overall".into(), &parts)],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventStudy {
    /// One coefficient per exposure `e`, labelled `e=<e>`.
    pub coefficients: Vec<(i32, Parameter)>,
    /// Average of pre-treatment coefficients (excluding the reference period).
    pub pre_average: Option<Parameter>,
    pub post_average: Option<Parameter>,
    /// Exposure of the base period, which has no coefficient.
    pub reference: i32,
}

impl EventStudy {
    pub fn pre(&self) -> impl Iterator<Item = &(i32, Parameter)> {
        self.coefficients.iter().filter(|(e, _)| *e < 0)
    }

    pub fn post(&self) -> impl Iterator<Item = &(i32, Parameter)> {
        self.coefficients.iter().filter(|(e, _)| *e >= 0)
    }
}

fn average(label: &str, params: &[&Parameter], n: usize) -> Option<Parameter> {
    if params.is_empty() {
        return None;
    }
    let w = 1.0 / params.len() as f64;
    let mut influence = vec![0.0; n];
    for p in params {
        for (o, v) in influence.iter_mut().zip(&p.influence) {
            *o += w * v;
        }
    }
    Some(Parameter::new(
        label.into(),
        params.iter().map(|p| p.estimate).sum::<f64>() * w,
        influence,
        params.iter().map(|p| (p.label.clone(), w)).collect(),
    ))
}

/// Effects by exposure `e = t - g` over `[e_min, e_max]`, each a cohort-share
/// weighted average over the cohorts observed at that exposure.
pub fn event_study(cells: &[AttGt], data: &DidData, window: (i32, i32), anticipation: u32) -> Result<EventStudy> {
    let (lo, hi) = window;
    let reference = -1 - anticipation as i32;
    if lo > hi || lo >= 0 || hi < 0 {
        return Err(Error::Precondition(format!(
            "event window [{lo}, {hi}] must include pre and post exposures"
        )));
    }
    let mut by_e: BTreeMap<i32, Vec<&AttGt>> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.feasible) {
        let e = c.exposure();
        if (lo..=hi).contains(&e) && e != reference {
            by_e.entry(e).or_default().push(c);
        }
    }
    let coefficients: Vec<(i32, Parameter)> = by_e
        .into_iter()
        .map(|(e, cs)| {
            let parts: Vec<(i32, f64, &[f64])> =
                cs.iter().map(|c| (c.g, c.estimate, c.influence.as_slice())).collect();
            (e, share_weighted(data, format!("e={e}"), &parts))
        })
        .collect();
    let pre: Vec<&Parameter> = coefficients.iter().filter(|(e, _)| *e < 0).map(|(_, p)| p).collect();
    let post: Vec<&Parameter> = coefficients.iter().filter(|(e, _)| *e >= 0).map(|(_, p)| p).collect();
    if post.is_empty() {
        return Err(Error::Aggregation("event study has no feasible post-treatment exposure".into()));
    }
    Ok(EventStudy {
        pre_average: average("pre_average", &pre, data.len()),
        post_average: average("post_average", &post, data.len()),
        coefficients,
        reference,
    })
}
