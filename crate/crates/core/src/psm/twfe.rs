use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

use super::{MatchCovariate, MatchedSample};
use crate::did::Outcome;
use crate::linalg::inverse_spd;
use crate::panel::Panel;
use crate::stats::normal_two_sided_p;
use crate::{Error, Result};

const DEMEAN_TOLERANCE: f64 = 1e-10;
const DEMEAN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedEffect {
    Year,
    Country,
    Industry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwfeObs {
    pub firm_id: String,
    pub year: i32,
    pub country: String,
    pub industry: String,
    pub treated: bool,
    pub post: bool,
    pub y: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwfeSpec {
    pub fixed_effects: Vec<FixedEffect>,
    /// Labels of the control columns in [`TwfeObs::x`].
    pub controls: Vec<String>,
}

impl Default for TwfeSpec {
    fn default() -> Self {
        Self {
            fixed_effects: vec![FixedEffect::Year, FixedEffect::Country, FixedEffect::Industry],
            controls: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwfeResult {
    /// Coefficient on treated x post.
    pub coefficient: f64,
    /// Firm-clustered standard error.
    pub se: f64,
    pub t_stat: f64,
    pub p_value: f64,
    /// Observations of treated and untreated firms.
    pub n_treated: usize,
    pub n_untreated: usize,
    pub n_obs: usize,
    pub clusters: usize,
    /// All retained coefficients; regressors absorbed by the fixed effects
    /// are omitted.
    pub coefficients: Vec<(String, f64)>,
}

/// Subtracts group means for each fixed effect in turn until the largest
/// adjustment falls below tolerance.
fn demean(cols: &mut [Vec<f64>], groups: &[Vec<usize>], levels: &[usize]) {
    for col in cols.iter_mut() {
        for _ in 0..DEMEAN_MAX_ITER {
            let mut largest: f64 = 0.0;
            for (g, &nl) in groups.iter().zip(levels) {
                let mut sum = vec![0.0; nl];
                let mut count = vec![0usize; nl];
                for (v, &k) in col.iter().zip(g) {
                    sum[k] += v;
                    count[k] += 1;
                }
                for (v, &k) in col.iter_mut().zip(g) {
                    let m = sum[k] / count[k] as f64;
                    largest = largest.max(m.abs());
                    *v -= m;
                }
            }
            if largest < DEMEAN_TOLERANCE {
                break;
            }
        }
    }
}

fn codes<'a>(values: impl Iterator<Item = &'a str>) -> (Vec<usize>, usize) {
    let v: Vec<&str> = values.collect();
    let levels: BTreeMap<&str, usize> = v
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    (v.iter().map(|s| levels[s]).collect(), levels.len())
}

/// Least squares of `y` on treated, post, treated x post and controls, with
/// the chosen fixed effects absorbed and standard errors clustered by firm.
pub fn twfe_did(obs: &[TwfeObs], spec: &TwfeSpec) -> Result<TwfeResult> {
    let n = obs.len();
    if n == 0 {
        return Err(Error::Precondition("two-way fixed-effects regression on an empty sample".into()));
    }
    if obs.iter().any(|o| o.x.len() != spec.controls.len()) {
        return Err(Error::Precondition("control columns do not match the specification".into()));
    }
    let f = |b: bool| f64::from(u8::from(b));
    let mut names = vec!["treated".to_string(), "post".to_string()];
    let mut cols = vec![
        obs.iter().map(|o| f(o.treated)).collect::<Vec<_>>(),
        obs.iter().map(|o| f(o.post)).collect(),
    ];
    for (j, c) in spec.controls.iter().enumerate() {
        names.push(c.clone());
        cols.push(obs.iter().map(|o| o.x[j]).collect());
    }
    if spec.fixed_effects.is_empty() {
        names.push("const".to_string());
        cols.push(vec![1.0; n]);
    }
    // The interaction goes last so the rank check tests it against all else.
    names.push("treated_post".to_string());
    cols.push(obs.iter().map(|o| f(o.treated && o.post)).collect());
    let last = cols.len() - 1;
    let raw_norm: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut y: Vec<f64> = obs.iter().map(|o| o.y).collect();

    let mut groups = Vec::new();
    let mut levels = Vec::new();
    for fe in &spec.fixed_effects {
        let (g, l) = match fe {
            FixedEffect::Year => {
                let years: Vec<String> = obs.iter().map(|o| o.year.to_string()).collect();
                codes(years.iter().map(String::as_str))
            }
            FixedEffect::Country => codes(obs.iter().map(|o| o.country.as_str())),
            FixedEffect::Industry => codes(obs.iter().map(|o| o.industry.as_str())),
        };
        groups.push(g);
        levels.push(l);
    }
    if !groups.is_empty() {
        demean(&mut cols, &groups, &levels);
        demean(std::slice::from_mut(&mut y), &groups, &levels);
    }

    // Keep columns in order while they add rank; absorbed ones drop out.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::new();
    for (j, c) in cols.iter().enumerate() {
        let mut r = c.clone();
        for b in &basis {
            let dot: f64 = r.iter().zip(b).map(|(x, y)| x * y).sum();
            r.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-8 * raw_norm[j].max(1e-300) {
            basis.push(r.into_iter().map(|v| v / norm).collect());
            kept.push(j);
        } else if j == last {
            return Err(Error::Estimation(
                "treated x post is collinear with the fixed effects and controls".into(),
            ));
        }
    }
    let k = kept.len();
    let x = DMatrix::from_fn(n, k, |i, j| cols[kept[j]][i]);
    let yv = DVector::from_vec(y);
    let xtx = x.transpose() * &x;
    let bread = inverse_spd(&xtx).ok_or_else(|| Error::Estimation("singular design".into()))?;
    let beta = &bread * x.transpose() * &yv;
    let resid = &yv - &x * &beta;

    let (firm, clusters) = codes(obs.iter().map(|o| o.firm_id.as_str()));
    let mut scores = DMatrix::zeros(clusters, k);
    for i in 0..n {
        for j in 0..k {
            scores[(firm[i], j)] += x[(i, j)] * resid[i];
        }
    }
    let meat = scores.transpose() * &scores;
    let absorbed = if levels.is_empty() {
        0
    } else {
        levels.iter().sum::<usize>() - (levels.len() - 1)
    };
    let dof = (k + absorbed) as f64;
    let g = clusters as f64;
    let correction = if clusters > 1 && (n as f64) > dof {
        g / (g - 1.0) * (n as f64 - 1.0) / (n as f64 - dof)
    } else {
        f64::NAN
    };
    let v = &bread * meat * &bread * correction;
    let se = v[(k - 1, k - 1)].sqrt();
    let coefficient = beta[k - 1];
    let n_treated = obs.iter().filter(|o| o.treated).count();
    Ok(TwfeResult {
        coefficient,
        se,
        t_stat: coefficient / se,
        p_value: normal_two_sided_p(coefficient / se),
        n_treated,
        n_untreated: n - n_treated,
        n_obs: n,
        clusters,
        coefficients: kept.iter().zip(beta.iter()).map(|(&j, &b)| (names[j].clone(), b)).collect(),
    })
}

/// Firm-years of matched pairs within `[g - pre, g + post]` of the takeover
/// year `g`, with contemporaneous controls. Observations lacking the outcome
/// or a control are skipped.
pub fn matched_panel(
    panel: &Panel,
    matched: &MatchedSample,
    outcome: &Outcome,
    controls: &[MatchCovariate],
    window: (i32, i32),
) -> Result<Vec<TwfeObs>> {
    if let Some(c) = controls.iter().find(|c| !c.is_numeric()) {
        return Err(Error::Config(format!("`{}` cannot enter as a regression control", c.label())));
    }
    let derived = panel.derived()?;
    let index = panel.index();
    let mut out = Vec::new();
    for p in &matched.pairs {
        let g = p.group + 1;
        for (id, treated) in [(&p.treated, true), (&p.control, false)] {
            for year in g - window.0..=g + window.1 {
                let Some(&i) = index.get(&(id.as_str(), year)) else {
                    continue;
                };
                let (r, d) = (&panel.rows()[i], &derived[i]);
                let Some(y) = outcome.value(r, d) else {
                    continue;
                };
                let x: Option<Vec<f64>> = controls
                    .iter()
                    .map(|c| match c {
                        MatchCovariate::Size => d.log_employees,
                        MatchCovariate::CapitalIntensity => d.log_capital_intensity(),
                        MatchCovariate::Tfp => d.tfp,
                        MatchCovariate::Age => d.log_age(),
                        _ => unreachable!(),
                    })
                    .collect();
                let Some(x) = x else {
                    continue;
                };
                out.push(TwfeObs {
                    firm_id: id.clone(),
                    year,
                    country: r.country.clone(),
                    industry: r.industry.clone(),
                    treated,
                    post: year >= g,
                    y,
                    x,
                });
            }
        }
    }
    Ok(out)
}
