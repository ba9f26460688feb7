//! Plain-loop reimplementation of the doubly robust group-time ATT, used as
//! an independent check. Covariates are rebuilt from raw firm fields and
//! productivity is taken from the truth file.

use std::collections::{BTreeMap, BTreeSet};

use super::SimTruth;
use crate::panel::{FirmYear, Panel};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSpec {
    /// Propensity covariates by name: size, age, capital_intensity, tfp, industry.
    pub pscore: Vec<String>,
    pub outcome: Vec<String>,
    pub not_yet_treated: bool,
    pub anticipation: i32,
    pub overlap_ceiling: f64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        let all: Vec<String> = ["size", "age", "capital_intensity", "tfp", "industry"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        Self {
            pscore: all.clone(),
            outcome: all,
            not_yet_treated: false,
            anticipation: 0,
            overlap_ceiling: 0.999,
        }
    }
}

fn numeric(row: &FirmYear, omega: Option<f64>, name: &str) -> Option<f64> {
    match name {
        "size" => (row.employees > 0.0).then(|| row.employees.ln()),
        "age" => row
            .incorporation_year
            .map(|inc| (1.0 + f64::from((row.year - inc).max(0))).ln()),
        "capital_intensity" => (row.employees > 0.0).then(|| (row.fixed_assets / row.employees).ln()),
        "tfp" => omega,
        _ => None,
    }
}

struct Unit {
    treated: bool,
    dy: f64,
    industry: String,
    x: BTreeMap<String, f64>,
}

fn columns(units: &[&Unit], names: &[String], industries: &[String], vary_over: &[bool]) -> Vec<Vec<f64>> {
    let mut cols = vec![vec![1.0; units.len()]];
    for n in names {
        if n != "industry" {
            cols.push(units.iter().map(|u| u.x[n]).collect());
        }
    }
    if names.iter().any(|n| n == "industry") {
        for ind in &industries[1..] {
            cols.push(units.iter().map(|u| if &u.industry == ind { 1.0 } else { 0.0 }).collect());
        }
    }
    let mut kept = vec![cols[0].clone()];
    for c in cols.into_iter().skip(1) {
        let mut seen: Option<f64> = None;
        let mut varies = false;
        for i in 0..c.len() {
            if !vary_over[i] {
                continue;
            }
            match seen {
                None => seen = Some(c[i]),
                Some(v) if v != c[i] => varies = true,
                _ => {}
            }
        }
        if varies {
            kept.push(c);
        }
    }
    kept
}

/// Solves `a x = b` by Gauss-Jordan elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn logit_probs(cols: &[Vec<f64>], d: &[f64]) -> Option<Vec<f64>> {
    let n = d.len();
    let p = cols.len();
    let mut beta = vec![0.0; p];
    let mut prob = vec![0.5; n];
    for _ in 0..500 {
        for i in 0..n {
            let z: f64 = (0..p).map(|j| cols[j][i] * beta[j]).sum();
            prob[i] = 1.0 / (1.0 + (-z).exp());
        }
        let mut h = vec![vec![0.0; p]; p];
        let mut s = vec![0.0; p];
        for i in 0..n {
            let w = prob[i] * (1.0 - prob[i]);
            for a in 0..p {
                s[a] += cols[a][i] * (d[i] - prob[i]);
                for b in 0..p {
                    h[a][b] += cols[a][i] * cols[b][i] * w;
                }
            }
        }
        let step = solve(h, s)?;
        let mut largest: f64 = 0.0;
        for j in 0..p {
            beta[j] += step[j];
            largest = largest.max(step[j].abs());
        }
        if !largest.is_finite() {
            return None;
        }
        if largest < 1e-13 {
            for i in 0..n {
                let z: f64 = (0..p).map(|j| cols[j][i] * beta[j]).sum();
                prob[i] = 1.0 / (1.0 + (-z).exp());
            }
            return Some(prob);
        }
    }
    None
}

/// ATT(g, t) for log sales, or `None` when the cell cannot be estimated.
pub fn brute_force_att(panel: &Panel, truth: &SimTruth, g: i32, t: i32, spec: &OracleSpec) -> Option<f64> {
    let years: BTreeSet<i32> = panel.rows().iter().map(|r| r.year).collect();
    let (&first, &last) = (years.first()?, years.last()?);
    let base = g - 1 - spec.anticipation;
    if !years.contains(&base) {
        return None;
    }
    let omega: BTreeMap<(&str, i32), f64> = truth.obs.iter().map(|o| ((o.firm_id.as_str(), o.year), o.omega)).collect();
    let mut rows: BTreeMap<&str, BTreeMap<i32, &FirmYear>> = BTreeMap::new();
    for r in panel.rows() {
        rows.entry(r.firm_id.as_str()).or_default().insert(r.year, r);
    }
    let needed: BTreeSet<&String> = spec.pscore.iter().chain(&spec.outcome).filter(|n| *n != "industry").collect();

    let mut units = Vec::new();
    for (id, obs) in &rows {
        let mut cohort = panel.cohort(id);
        if cohort.is_some_and(|h| h <= first) {
            continue;
        }
        if cohort.is_some_and(|h| h > last) {
            cohort = None;
        }
        let treated = match cohort {
            Some(h) if h == g => true,
            None => false,
            Some(h) if spec.not_yet_treated && h > t.max(base) + spec.anticipation => false,
            _ => continue,
        };
        let (Some(now), Some(before)) = (obs.get(&t), obs.get(&base)) else {
            continue;
        };
        let mut x = BTreeMap::new();
        let mut complete = true;
        for n in &needed {
            match numeric(before, omega.get(&(*id, base)).copied(), n) {
                Some(v) => {
                    x.insert((*n).clone(), v);
                }
                None => complete = false,
            }
        }
        if !complete {
            continue;
        }
        units.push(Unit {
            treated,
            dy: now.sales.ln() - before.sales.ln(),
            industry: before.industry.clone(),
            x,
        });
    }

    let uses_industry = spec.pscore.iter().chain(&spec.outcome).any(|n| n == "industry");
    let mut dropped = vec![false; units.len()];
    loop {
        let mut active: Vec<usize> = (0..units.len()).filter(|&i| !dropped[i]).collect();
        if uses_industry {
            let treated_ind: BTreeSet<&str> =
                active.iter().filter(|&&i| units[i].treated).map(|&i| units[i].industry.as_str()).collect();
            active.retain(|&i| units[i].treated || treated_ind.contains(units[i].industry.as_str()));
            let control_ind: BTreeSet<&str> =
                active.iter().filter(|&&i| !units[i].treated).map(|&i| units[i].industry.as_str()).collect();
            active.retain(|&i| !units[i].treated || control_ind.contains(units[i].industry.as_str()));
        }
        let sample: Vec<&Unit> = active.iter().map(|&i| &units[i]).collect();
        let n1 = sample.iter().filter(|u| u.treated).count();
        if n1 == 0 || n1 == sample.len() {
            return None;
        }
        let mut industries: Vec<String> = sample.iter().map(|u| u.industry.clone()).collect();
        industries.sort();
        industries.dedup();
        let d: Vec<f64> = sample.iter().map(|u| if u.treated { 1.0 } else { 0.0 }).collect();
        let everyone = vec![true; sample.len()];
        let is_control: Vec<bool> = sample.iter().map(|u| !u.treated).collect();
        let xp = columns(&sample, &spec.pscore, &industries, &everyone);
        let xo = columns(&sample, &spec.outcome, &industries, &is_control);
        let prob = logit_probs(&xp, &d)?;

        let mut violated = false;
        for (k, &i) in active.iter().enumerate() {
            if !units[i].treated && prob[k] >= spec.overlap_ceiling {
                dropped[i] = true;
                violated = true;
            }
        }
        if violated {
            continue;
        }

        let q = xo.len();
        let mut xtx = vec![vec![0.0; q]; q];
        let mut xty = vec![0.0; q];
        for i in 0..sample.len() {
            if sample[i].treated {
                continue;
            }
            for a in 0..q {
                xty[a] += xo[a][i] * sample[i].dy;
                for b in 0..q {
                    xtx[a][b] += xo[a][i] * xo[b][i];
                }
            }
        }
        let coef = solve(xtx, xty)?;
        let (mut num1, mut den1, mut num0, mut den0) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..sample.len() {
            let fitted: f64 = (0..q).map(|j| xo[j][i] * coef[j]).sum();
            let r = sample[i].dy - fitted;
            if sample[i].treated {
                num1 += r;
                den1 += 1.0;
            } else {
                let w = prob[i] / (1.0 - prob[i]);
                num0 += w * r;
                den0 += w;
            }
        }
        return Some(num1 / den1 - num0 / den0);
    }
}
