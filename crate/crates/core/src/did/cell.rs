use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::data::{Covariate, DidData, DidObs};
use super::{CohortDesign, ControlRule};
use crate::linalg::{inverse_spd, least_squares};
use crate::logit::{fit_logit, LogitFit};
use crate::{Error, Result};

/// One group-time average treatment effect on the treated.
#[derive(Debug, Clone, PartialEq)]
pub struct AttGt {
    pub g: i32,
    pub t: i32,
    pub feasible: bool,
    /// Why the cell is infeasible.
    pub reason: Option<String>,
    pub estimate: f64,
    pub n_treated: usize,
    pub n_control: usize,
    /// Controls removed for exceeding the overlap ceiling.
    pub dropped_overlap: usize,
    /// Treated firms whose industry has no control.
    pub off_support: usize,
    /// Firms lacking the outcome or a covariate at `t` or the base period.
    pub missing: usize,
    pub pscore_model: Vec<(String, f64)>,
    pub outcome_model: Vec<(String, f64)>,
    /// Influence value per firm of the data set, scaled so that
    /// `estimate - truth ~ mean(influence)`. Empty when infeasible.
    pub influence: Vec<f64>,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl AttGt {
    pub fn exposure(&self) -> i32 {
        self.t - self.g
    }

    fn infeasible(g: i32, t: i32, reason: String) -> Self {
        Self {
            g,
            t,
            feasible: false,
            reason: Some(reason),
            estimate: f64::NAN,
            n_treated: 0,
            n_control: 0,
            dropped_overlap: 0,
            off_support: 0,
            missing: 0,
            pscore_model: Vec::new(),
            outcome_model: Vec::new(),
            influence: Vec::new(),
            se: f64::NAN,
            ci_low: f64::NAN,
            ci_high: f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Treated,
    Control,
}

/// Firms participating in one cell, before the overlap rule.
struct Candidates<'a> {
    firm: Vec<usize>,
    role: Vec<Role>,
    dy: Vec<f64>,
    base: Vec<&'a DidObs>,
    missing: usize,
}

fn candidates<'a>(data: &'a DidData, design: &CohortDesign, g: i32, t: i32, base: i32) -> Candidates<'a> {
    let needed: Vec<usize> = design
        .pscore_covariates
        .iter()
        .chain(&design.outcome_covariates)
        .filter_map(|c| c.slot())
        .collect();
    let mut c = Candidates {
        firm: Vec::new(),
        role: Vec::new(),
        dy: Vec::new(),
        base: Vec::new(),
        missing: 0,
    };
    let anticipation = design.anticipation as i32;
    for (i, f) in data.firms.iter().enumerate() {
        let role = match f.cohort {
            Some(h) if h == g => Role::Treated,
            None => Role::Control,
            Some(h) if design.control_rule == ControlRule::NotYetTreated && h > t.max(base) + anticipation => {
                Role::Control
            }
            _ => continue,
        };
        let (Some(now), Some(before)) = (f.obs.get(&t), f.obs.get(&base)) else {
            c.missing += 1;
            continue;
        };
        let (Some(yt), Some(yb)) = (now.outcome, before.outcome) else {
            c.missing += 1;
            continue;
        };
        if needed.iter().any(|&s| before.covariates[s].is_none()) {
            c.missing += 1;
            continue;
        }
        c.firm.push(i);
        c.role.push(role);
        c.dy.push(yt - yb);
        c.base.push(before);
    }
    c
}

/// Regressors `[const, numeric covariates, industry dummies]` with columns
/// that are constant over `rows_for_variation` removed.
fn design_matrix(
    obs: &[&DidObs],
    covariates: &[Covariate],
    industries: &[String],
    rows_for_variation: &[usize],
) -> (DMatrix<f64>, Vec<String>) {
    let mut names = vec!["const".to_string()];
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; obs.len()]];
    for c in covariates {
        if let Some(s) = c.slot() {
            names.push(c.label().to_string());
            cols.push(obs.iter().map(|o| o.covariates[s].expect("checked")).collect());
        }
    }
    if covariates.contains(&Covariate::Industry) {
        for ind in industries.iter().skip(1) {
            names.push(format!("industry_{ind}"));
            cols.push(obs.iter().map(|o| f64::from(u8::from(&o.industry == ind))).collect());
        }
    }
    let keep: Vec<usize> = (0..cols.len())
        .filter(|&j| {
            if j == 0 {
                return true;
            }
            let first = rows_for_variation.first().map(|&i| cols[j][i]);
            rows_for_variation.iter().any(|&i| Some(cols[j][i]) != first)
        })
        .collect();
    let m = DMatrix::from_fn(obs.len(), keep.len(), |i, k| cols[keep[k]][i]);
    (m, keep.into_iter().map(|j| names[j].clone()).collect())
}

/// Sample of one cell after the support and overlap rules.
pub(crate) struct CellSample {
    pub firm: Vec<usize>,
    pub d: Vec<f64>,
    pub dy: Vec<f64>,
    pub xp: DMatrix<f64>,
    pub xo: DMatrix<f64>,
    pub pnames: Vec<String>,
    pub onames: Vec<String>,
    pub pscore: LogitFit,
    pub dropped_overlap: usize,
    pub off_support: usize,
    pub missing: usize,
}

enum Built {
    Sample(Box<CellSample>),
    Infeasible {
        reason: String,
        n_treated: usize,
        n_control: usize,
        off_support: usize,
        missing: usize,
    },
}

fn build(data: &DidData, design: &CohortDesign, g: i32, t: i32) -> Result<Built> {
    let base = g - 1 - design.anticipation as i32;
    if !data.years.contains(&base) {
        return Ok(Built::Infeasible {
            reason: format!("base period {base} not observed"),
            n_treated: 0,
            n_control: 0,
            off_support: 0,
            missing: 0,
        });
    }
    let cand = candidates(data, design, g, t, base);
    let uses_industry = design.pscore_covariates.contains(&Covariate::Industry)
        || design.outcome_covariates.contains(&Covariate::Industry);
    let mut excluded: BTreeSet<usize> = BTreeSet::new();
    let mut dropped_overlap = 0;
    loop {
        // Industry support: controls need a treated firm in their industry and
        // vice versa.
        let mut off_support = 0;
        let mut keep: Vec<usize> = (0..cand.firm.len()).filter(|i| !excluded.contains(i)).collect();
        if uses_industry {
            let treated_ind: BTreeSet<&str> = keep
                .iter()
                .filter(|&&i| cand.role[i] == Role::Treated)
                .map(|&i| cand.base[i].industry.as_str())
                .collect();
            keep.retain(|&i| cand.role[i] == Role::Treated || treated_ind.contains(cand.base[i].industry.as_str()));
            let control_ind: BTreeSet<&str> = keep
                .iter()
                .filter(|&&i| cand.role[i] == Role::Control)
                .map(|&i| cand.base[i].industry.as_str())
                .collect();
            keep.retain(|&i| {
                let ok = cand.role[i] == Role::Control || control_ind.contains(cand.base[i].industry.as_str());
                if !ok {
                    off_support += 1;
                }
                ok
            });
        }
        let n_treated = keep.iter().filter(|&&i| cand.role[i] == Role::Treated).count();
        let n_control = keep.len() - n_treated;
        if n_treated == 0 || n_control == 0 {
            return Ok(Built::Infeasible {
                reason: if n_treated == 0 { "no treated firms" } else { "no control firms" }.to_string(),
                n_treated,
                n_control,
                off_support,
                missing: cand.missing,
            });
        }
        let obs: Vec<&DidObs> = keep.iter().map(|&i| cand.base[i]).collect();
        let industries: Vec<String> = obs
            .iter()
            .map(|o| o.industry.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let d: Vec<f64> = keep
            .iter()
            .map(|&i| f64::from(u8::from(cand.role[i] == Role::Treated)))
            .collect();
        let all: Vec<usize> = (0..keep.len()).collect();
        let controls: Vec<usize> = all.iter().copied().filter(|&i| d[i] == 0.0).collect();
        let (xp, pnames) = design_matrix(&obs, &design.pscore_covariates, &industries, &all);
        let (xo, onames) = design_matrix(&obs, &design.outcome_covariates, &industries, &controls);
        let pscore = fit_logit(&xp, &d, &pnames, design.logit)?;
        let violators: Vec<usize> = controls
            .iter()
            .copied()
            .filter(|&i| pscore.prob[i] >= design.overlap_ceiling)
            .collect();
        if !violators.is_empty() {
            dropped_overlap += violators.len();
            excluded.extend(violators.into_iter().map(|i| keep[i]));
            continue;
        }
        return Ok(Built::Sample(Box::new(CellSample {
            firm: keep.iter().map(|&i| cand.firm[i]).collect(),
            dy: keep.iter().map(|&i| cand.dy[i]).collect(),
            d,
            xp,
            xo,
            pnames,
            onames,
            pscore,
            dropped_overlap,
            off_support,
            missing: cand.missing,
        })));
    }
}

pub(crate) struct DrFit {
    pub att: f64,
    /// Influence values in the cell sample (unscaled).
    pub influence: Vec<f64>,
    pub outcome_coef: DVector<f64>,
}

/// Doubly robust ATT and its influence function on a cell sample.
pub(crate) fn doubly_robust(s: &CellSample) -> Result<DrFit> {
    let n = s.d.len();
    let nf = n as f64;
    let controls: Vec<usize> = (0..n).filter(|&i| s.d[i] == 0.0).collect();
    let xc = DMatrix::from_fn(controls.len(), s.xo.ncols(), |r, j| s.xo[(controls[r], j)]);
    let yc = DVector::from_iterator(controls.len(), controls.iter().map(|&i| s.dy[i]));
    let ols = least_squares(&xc, &yc, &s.onames)?;
    let m = &s.xo * &ols.coef;
    let p = &s.pscore.prob;
    let w1: Vec<f64> = s.d.clone();
    let w0: Vec<f64> = (0..n).map(|i| p[i] * (1.0 - s.d[i]) / (1.0 - p[i])).collect();
    let r: Vec<f64> = (0..n).map(|i| s.dy[i] - m[i]).collect();
    let mean = |v: &mut dyn Iterator<Item = f64>| v.sum::<f64>() / nf;
    let mw1 = mean(&mut w1.iter().copied());
    let mw0 = mean(&mut w0.iter().copied());
    let eta1 = mean(&mut (0..n).map(|i| w1[i] * r[i])) / mw1;
    let eta0 = mean(&mut (0..n).map(|i| w0[i] * r[i])) / mw0;

    let po = s.xo.ncols();
    let pp = s.xp.ncols();
    let mut gram = DMatrix::zeros(po, po);
    let mut m1 = DVector::zeros(po);
    let mut m3 = DVector::zeros(po);
    let mut m2 = DVector::zeros(pp);
    for i in 0..n {
        let xo = s.xo.row(i).transpose();
        if s.d[i] == 0.0 {
            gram += &xo * xo.transpose();
        }
        m1 += &xo * w1[i];
        m3 += &xo * w0[i];
        m2 += s.xp.row(i).transpose() * (w0[i] * (r[i] - eta0));
    }
    gram /= nf;
    m1 /= nf;
    m2 /= nf;
    m3 /= nf;
    let gram_inv = inverse_spd(&gram)
        .ok_or_else(|| Error::Estimation("outcome regression Gram matrix is singular".into()))?;
    let a1 = &gram_inv * m1;
    let a3 = &gram_inv * m3;
    let c2 = &s.pscore.inv_hessian * m2;

    let influence = (0..n)
        .map(|i| {
            let xo = s.xo.row(i);
            let wols = (1.0 - s.d[i]) * r[i];
            let wols1 = wols * (xo * &a1)[(0, 0)];
            let wols3 = wols * (xo * &a3)[(0, 0)];
            let ps = (s.d[i] - p[i]) * (s.xp.row(i) * &c2)[(0, 0)];
            let treat = (w1[i] * r[i] - w1[i] * eta1 - wols1) / mw1;
            let cont = (w0[i] * r[i] - w0[i] * eta0 + ps - wols3) / mw0;
            treat - cont
        })
        .collect();
    Ok(DrFit {
        att: eta1 - eta0,
        influence,
        outcome_coef: ols.coef,
    })
}

/// Fitted propensity model of one cell, over the retained firms.
#[derive(Debug, Clone, PartialEq)]
pub struct PscoreFit {
    pub firm_ids: Vec<String>,
    pub treated: Vec<bool>,
    pub fit: LogitFit,
    pub dropped_overlap: usize,
}

/// Propensity-score model of cohort `g` against the controls of cell
/// `(g, t)`, with covariates at the base period. `None` when the cell has no
/// treated or no control firm.
pub fn fit_pscore(data: &DidData, design: &CohortDesign, g: i32, t: i32) -> Result<Option<PscoreFit>> {
    Ok(match build(data, design, g, t)? {
        Built::Sample(s) => Some(PscoreFit {
            firm_ids: s.firm.iter().map(|&i| data.firms[i].id.clone()).collect(),
            treated: s.d.iter().map(|&v| v == 1.0).collect(),
            fit: s.pscore,
            dropped_overlap: s.dropped_overlap,
        }),
        Built::Infeasible { .. } => None,
    })
}

/// Doubly robust ATT(g, t).
pub fn att_gt(data: &DidData, design: &CohortDesign, g: i32, t: i32) -> Result<AttGt> {
    let s = match build(data, design, g, t)? {
        Built::Sample(s) => s,
        Built::Infeasible {
            reason,
            n_treated,
            n_control,
            off_support,
            missing,
        } => {
            let mut cell = AttGt::infeasible(g, t, reason);
            cell.n_treated = n_treated;
            cell.n_control = n_control;
            cell.off_support = off_support;
            cell.missing = missing;
            return Ok(cell);
        }
    };
    let fit = doubly_robust(&s)?;
    let scale = data.len() as f64 / s.firm.len() as f64;
    let mut influence = vec![0.0; data.len()];
    for (k, &i) in s.firm.iter().enumerate() {
        influence[i] = fit.influence[k] * scale;
    }
    let n_treated = s.d.iter().filter(|&&v| v == 1.0).count();
    Ok(AttGt {
        g,
        t,
        feasible: true,
        reason: None,
        estimate: fit.att,
        n_treated,
        n_control: s.d.len() - n_treated,
        dropped_overlap: s.dropped_overlap,
        off_support: s.off_support,
        missing: s.missing,
        pscore_model: s.pnames.iter().cloned().zip(s.pscore.coef.iter().copied()).collect(),
        outcome_model: s.onames.iter().cloned().zip(fit.outcome_coef.iter().copied()).collect(),
        influence,
        se: f64::NAN,
        ci_low: f64::NAN,
        ci_high: f64::NAN,
    })
}

/// Every `(g, t)` cell of the design, in `(g, t)` order. Estimation failures
/// (e.g. separation in the propensity model) mark the cell infeasible.
pub fn att_gt_all(data: &DidData, design: &CohortDesign) -> Vec<AttGt> {
    let anticipation = design.anticipation as i32;
    let cells: Vec<(i32, i32)> = design
        .cohorts
        .iter()
        .flat_map(|&g| {
            data.years
                .iter()
                .copied()
                .filter(move |&t| t != g - 1 - anticipation)
                .map(move |t| (g, t))
        })
        .collect();
    cells
        .into_par_iter()
        .map(|(g, t)| att_gt(data, design, g, t).unwrap_or_else(|e| AttGt::infeasible(g, t, e.to_string())))
        .collect()
}
