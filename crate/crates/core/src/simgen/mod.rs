//! Synthetic firm panels with known ground truth.
//!
//! Firms accumulate capital slowly, hire labor before productivity is
//! revealed and choose materials after observing it, pricing at a markup over
//! marginal cost. The first-order condition then ties the materials share of
//! (noise-free) revenue to the true elasticity and markup: `alpha = theta /
//! mu`. Takeover cohorts are drawn from a multinomial logit on size, capital
//! intensity and productivity in the year before the first cohort.

mod oracle;

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

pub use oracle::{brute_force_att, OracleSpec};

use crate::markup::FlexibleInput;
use crate::panel::{AcquirerInfo, DeflatorTable, FirmYear, Panel, TreatmentRow};
use crate::prodfn::{output_elasticity, Beta, Diagnostics, ElasticitySet, Estimator, Form, Term};
use crate::table::{fmt_f64, fmt_opt, Manifest, TableWriter};
use crate::{Error, Result};

const K_BAR: f64 = 5.0;
const L_BAR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct IndustryTech {
    pub code: String,
    pub beta: Beta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarkupRule {
    Constant(f64),
    /// Firm-specific markup, lognormal with the given median and log-sd.
    Lognormal { median: f64, sigma: f64 },
    /// `log mu = log mu_bar + curvature * (l - l_bar)^2`: markups rise with
    /// distance from typical size. Unlike a constant markup this keeps the
    /// materials elasticity identified from revenue data.
    SizeDependent { mu_bar: f64, curvature: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectOutcome {
    /// Revenue shift at unchanged quantities (raises the markup one for one).
    Sales,
    /// Shift in the log markup; materials respond through the first-order
    /// condition.
    Markup,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EffectPath {
    /// `delta` from the takeover year on.
    Constant(f64),
    /// `delta * (e + 1)` at exposure `e >= 0`.
    Linear(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Effect {
    pub outcome: EffectOutcome,
    pub path: EffectPath,
}

impl Effect {
    pub fn delta(&self, g: i32, t: i32) -> f64 {
        if t < g {
            return 0.0;
        }
        match self.path {
            EffectPath::Constant(d) => d,
            EffectPath::Linear(d) => d * f64::from(t - g + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortSpec {
    pub year: i32,
    /// Expected share of all firms in the cohort.
    pub share: f64,
}

/// Logit slopes of cohort membership on centred covariates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub size: f64,
    pub capital_intensity: f64,
    pub tfp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Firms per industry.
    pub n_firms: usize,
    pub industries: Vec<IndustryTech>,
    pub countries: Vec<String>,
    pub start_year: i32,
    pub end_year: i32,
    pub rho: f64,
    pub sigma_xi: f64,
    pub sigma_eps: f64,
    /// Labor adjustment shock; the variation in labor that productivity
    /// does not explain.
    pub sigma_labor: f64,
    /// When false, productivity is identically zero.
    pub productivity: bool,
    pub markup: MarkupRule,
    pub cohorts: Vec<CohortSpec>,
    pub selection: Selection,
    pub effect: Effect,
    /// Draw nominal price indices; otherwise all deflators are 1.
    pub deflate: bool,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_firms: 200,
            industries: vec![IndustryTech {
                code: "10".into(),
                beta: Beta::cobb_douglas(0.25, 0.10, 0.65),
            }],
            countries: ["DE", "ES", "FR", "IT"].iter().map(|s| s.to_string()).collect(),
            start_year: 2007,
            end_year: 2021,
            rho: 0.8,
            sigma_xi: 0.1,
            sigma_eps: 0.05,
            sigma_labor: 0.3,
            productivity: true,
            markup: MarkupRule::Constant(1.3),
            cohorts: vec![
                CohortSpec { year: 2012, share: 0.1 },
                CohortSpec { year: 2014, share: 0.1 },
                CohortSpec { year: 2016, share: 0.1 },
            ],
            selection: Selection {
                size: 1.0,
                capital_intensity: 0.5,
                tfp: 2.0,
            },
            effect: Effect {
                outcome: EffectOutcome::Sales,
                path: EffectPath::Constant(0.0),
            },
            deflate: true,
            burn_in: 30,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn years(&self) -> usize {
        (self.end_year - self.start_year + 1).max(0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_firms == 0 || self.industries.is_empty() || self.countries.is_empty() {
            return bad("need at least one firm, industry and country".into());
        }
        if self.end_year <= self.start_year {
            return bad(format!("year range [{}, {}] is empty", self.start_year, self.end_year));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho = {} outside [0, 1)", self.rho));
        }
        if !(self.sigma_xi > 0.0 && self.sigma_eps > 0.0 && self.sigma_labor > 0.0) {
            return bad("sigma_xi, sigma_eps and sigma_labor must be positive".into());
        }
        match self.markup {
            MarkupRule::Constant(mu) if mu > 0.0 => {}
            MarkupRule::Lognormal { median, sigma } if median > 0.0 && sigma > 0.0 => {}
            MarkupRule::SizeDependent { mu_bar, .. } if mu_bar > 0.0 => {}
            other => return bad(format!("invalid markup rule {other:?}")),
        }
        let mut total = 0.0;
        let mut last = self.start_year;
        for c in &self.cohorts {
            if !(c.share > 0.0 && c.share < 1.0) {
                return bad(format!("cohort {} share {} outside (0, 1)", c.year, c.share));
            }
            if c.year <= last || c.year > self.end_year {
                return bad(format!(
                    "cohort years must increase within ({}, {}]",
                    self.start_year, self.end_year
                ));
            }
            last = c.year;
            total += c.share;
        }
        if total >= 1.0 {
            return bad(format!("treated shares sum to {total}, leaving no never-treated controls"));
        }
        for ind in &self.industries {
            let bm = ind.beta.get(Term::M);
            if !(bm > 0.0 && bm < 1.0) {
                return bad(format!("industry {}: materials coefficient must be in (0, 1)", ind.code));
            }
        }
        Ok(())
    }
}

/// True values for one generated observation.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthObs {
    pub firm_id: String,
    pub year: i32,
    pub industry: String,
    pub cohort: Option<i32>,
    pub mu: f64,
    pub theta_m: f64,
    pub theta_l: f64,
    pub epsilon: f64,
    pub omega: f64,
    pub delta: f64,
    /// Materials share of noise-free revenue.
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PscoreTruth {
    /// Slopes on (size, capital intensity, TFP), in raw units.
    pub slopes: [f64; 3],
    /// Intercept per cohort in raw units (logit of the cohort against never
    /// treated firms, on covariates in the year before the cohort).
    pub intercepts: Vec<(i32, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    pub betas: Vec<(String, Beta)>,
    pub effect: Effect,
    pub pscore: PscoreTruth,
    /// One entry per generated row, in row order.
    pub obs: Vec<TruthObs>,
}

impl SimTruth {
    pub fn delta(&self, g: i32, t: i32) -> f64 {
        self.effect.delta(g, t)
    }

    pub fn cohorts(&self) -> BTreeMap<String, Option<i32>> {
        self.obs.iter().map(|o| (o.firm_id.clone(), o.cohort)).collect()
    }

    pub fn tfp_map(&self) -> BTreeMap<(String, i32), f64> {
        self.obs.iter().map(|o| ((o.firm_id.clone(), o.year), o.omega)).collect()
    }

    /// Elasticity sets carrying the true elasticities and noise, so that
    /// markups computed from them reproduce the true markups.
    pub fn elasticity_sets(&self) -> Vec<ElasticitySet> {
        self.betas
            .iter()
            .map(|(code, beta)| {
                let obs: Vec<&TruthObs> = self.obs.iter().filter(|o| &o.industry == code).collect();
                let n = obs.len();
                ElasticitySet {
                    industry: code.clone(),
                    estimator: Estimator::Ols,
                    form: if Term::ALL[3..].iter().all(|t| beta.get(*t) == 0.0) {
                        Form::CobbDouglas
                    } else {
                        Form::Translog
                    },
                    beta: *beta,
                    std_errors: None,
                    keys: obs.iter().map(|o| (o.firm_id.clone(), o.year)).collect(),
                    theta_m: obs.iter().map(|o| o.theta_m).collect(),
                    theta_l: obs.iter().map(|o| o.theta_l).collect(),
                    phi_hat: vec![f64::NAN; n],
                    epsilon_hat: obs.iter().map(|o| o.epsilon).collect(),
                    omega_hat: obs.iter().map(|o| o.omega).collect(),
                    diagnostics: Diagnostics {
                        status: "truth".into(),
                        objective: None,
                        start_objective: None,
                        iterations: 0,
                        restarts_converged: 0,
                        nobs: n,
                        moment_obs: 0,
                    },
                }
            })
            .collect()
    }
}

/// A generated data set: nominal firm rows, treatments, deflators and truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub rows: Vec<FirmYear>,
    pub treatments: Vec<TreatmentRow>,
    pub deflators: DeflatorTable,
    pub truth: SimTruth,
}

impl Simulation {
    /// Validated, deflated panel with derived variables and treatments.
    pub fn panel(&self) -> Result<Panel> {
        Panel::from_rows(self.rows.clone())?
            .with_treatments(self.treatments.clone())?
            .apply_deflators(&self.deflators)?
            .derive_variables()
    }

    /// As [`Simulation::panel`], with true productivity attached as TFP.
    pub fn panel_with_true_tfp(&self) -> Result<Panel> {
        self.panel()?.with_tfp(&self.truth.tfp_map())
    }

    pub fn write(&self, dir: &Path, manifest: Option<&Manifest>) -> Result<()> {
        crate::panel::write_firms_csv(&dir.join("firms.csv"), &self.rows, manifest)?;
        crate::panel::write_treatments_csv(&dir.join("treatments.csv"), &self.treatments, manifest)?;
        crate::panel::write_deflators_csv(&dir.join("deflators.csv"), &self.deflators, manifest)?;
        write_truth_csv(&dir.join("truth.csv"), &self.truth, manifest)
    }
}

pub fn write_truth_csv(path: &Path, truth: &SimTruth, manifest: Option<&Manifest>) -> Result<()> {
    let mut w = TableWriter::create(
        path,
        manifest,
        &["firm_id", "year", "industry", "cohort", "mu", "theta_m", "theta_l", "alpha", "epsilon", "omega", "delta"],
    )?;
    for o in &truth.obs {
        w.row([
            o.firm_id.clone(),
            o.year.to_string(),
            o.industry.clone(),
            o.cohort.map(|g| g.to_string()).unwrap_or_default(),
            fmt_f64(o.mu),
            fmt_f64(o.theta_m),
            fmt_f64(o.theta_l),
            fmt_f64(o.alpha),
            fmt_f64(o.epsilon),
            fmt_f64(o.omega),
            fmt_opt(Some(o.delta)),
        ])?;
    }
    w.finish()
}

/// State path of one firm, before treatment.
struct Path0 {
    industry: usize,
    country: usize,
    incorporation: i32,
    firm_log_mu: f64,
    omega: Vec<f64>,
    k: Vec<f64>,
    l: Vec<f64>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn simulate_states(cfg: &SimConfig, i: usize) -> Path0 {
    let mut rng = stream(cfg.seed, 2 * i as u64);
    let years = cfg.years();
    let total = years + cfg.burn_in;
    let sd0 = cfg.sigma_xi / (1.0 - cfg.rho * cfg.rho).sqrt();
    let mut omega = vec![0.0; total];
    let mut k = vec![0.0; total];
    let mut l = vec![0.0; total];
    omega[0] = sd0 * normal(&mut rng);
    k[0] = K_BAR + 0.5 * normal(&mut rng);
    for t in 1..total {
        omega[t] = cfg.rho * omega[t - 1] + cfg.sigma_xi * normal(&mut rng);
        k[t] = 0.8 * k[t - 1] + 0.2 * (K_BAR + 2.0 * omega[t - 1]) + 0.15 * normal(&mut rng);
    }
    for t in 0..total {
        let prev = if t > 0 { omega[t - 1] } else { omega[0] };
        l[t] = L_BAR + 0.5 * (k[t] - K_BAR) + prev + cfg.sigma_labor * normal(&mut rng);
    }
    if !cfg.productivity {
        omega.iter_mut().for_each(|w| *w = 0.0);
    }
    let firm_log_mu = match cfg.markup {
        MarkupRule::Lognormal { median, sigma } => median.ln() + sigma * normal(&mut rng),
        _ => 0.0,
    };
    let country = rng.gen_range(0..cfg.countries.len());
    let incorporation = cfg.start_year - rng.gen_range(1..=40);
    Path0 {
        industry: i / cfg.n_firms,
        country,
        incorporation,
        firm_log_mu,
        omega: omega.split_off(cfg.burn_in),
        k: k.split_off(cfg.burn_in),
        l: l.split_off(cfg.burn_in),
    }
}

/// Materials solving `m - f(l,k,m) - omega = ln theta_m(l,k,m) - ln mu`.
fn optimal_materials(beta: &Beta, l: f64, k: f64, omega: f64, log_mu: f64) -> Result<f64> {
    let bm = beta.get(Term::M);
    let cd = (bm.ln() - log_mu + beta.get(Term::L) * l + beta.get(Term::K) * k + omega) / (1.0 - bm);
    if Term::ALL[3..].iter().all(|t| beta.get(*t) == 0.0) {
        return Ok(cd);
    }
    let mut m = cd;
    for _ in 0..200 {
        let theta = output_elasticity(beta, l, k, m).materials;
        if theta <= 0.0 {
            return Err(Error::Config(format!(
                "translog materials elasticity is not positive at (l={l:.3}, k={k:.3}, m={m:.3})"
            )));
        }
        let h = m - beta.evaluate(l, k, m) - omega - theta.ln() + log_mu;
        let dh = 1.0 - theta - 2.0 * beta.get(Term::MM) / theta;
        let step = (h / dh).clamp(-1.0, 1.0);
        m -= step;
        if step.abs() < 1e-14 * m.abs().max(1.0) {
            return Ok(m);
        }
    }
    Err(Error::Config("materials first-order condition did not converge".into()))
}

/// Draws a panel and its ground truth. Deterministic given `cfg.seed`, at any
/// thread count.
pub fn generate(cfg: &SimConfig) -> Result<Simulation> {
    cfg.validate()?;
    let n = cfg.n_firms * cfg.industries.len();
    let years = cfg.years();
    let states: Vec<Path0> = (0..n).into_par_iter().map(|i| simulate_states(cfg, i)).collect();

    // Each cohort selects on its own covariates in year g-1, centred at their
    // sample means so the intercepts match the target shares.
    let at = |g: i32| (g - 1 - cfg.start_year) as usize;
    let covariates = |p: &Path0, s: usize| [p.l[s], p.k[s] - p.l[s], p.omega[s]];
    let slopes = [cfg.selection.size, cfg.selection.capital_intensity, cfg.selection.tfp];
    let offsets: Vec<f64> = cfg
        .cohorts
        .iter()
        .map(|c| {
            let mut centre = [0.0; 3];
            for p in &states {
                for (m, v) in centre.iter_mut().zip(covariates(p, at(c.year))) {
                    *m += v / n as f64;
                }
            }
            slopes.iter().zip(&centre).map(|(b, m)| b * m).sum()
        })
        .collect();
    let never_share = 1.0 - cfg.cohorts.iter().map(|c| c.share).sum::<f64>();
    let intercepts: Vec<f64> = cfg.cohorts.iter().map(|c| (c.share / never_share).ln()).collect();

    let generated: Vec<Result<(Vec<FirmYear>, Vec<TruthObs>, TreatmentRow)>> = states
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = stream(cfg.seed, 2 * i as u64 + 1);
            let scores: Vec<f64> = cfg
                .cohorts
                .iter()
                .zip(intercepts.iter().zip(&offsets))
                .map(|(c, (a, off))| {
                    let x = covariates(p, at(c.year));
                    (a - off + slopes.iter().zip(&x).map(|(b, v)| b * v).sum::<f64>()).exp()
                })
                .collect();
            let denom = 1.0 + scores.iter().sum::<f64>();
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut cohort = None;
            for (c, s) in cfg.cohorts.iter().zip(&scores) {
                acc += s / denom;
                if u < acc {
                    cohort = Some(c.year);
                    break;
                }
            }
            firm_rows(cfg, i, p, cohort, &mut rng)
        })
        .collect();

    let mut rows = Vec::with_capacity(n * years);
    let mut truth_obs = Vec::with_capacity(n * years);
    let mut treatments = Vec::with_capacity(n);
    for g in generated {
        let (r, t, tr) = g?;
        rows.extend(r);
        truth_obs.extend(t);
        treatments.push(tr);
    }

    let mut deflators = DeflatorTable::new();
    let mut drng = stream(cfg.seed, u64::MAX);
    for c in &cfg.countries {
        for ind in &cfg.industries {
            for (j, year) in (cfg.start_year..=cfg.end_year).enumerate() {
                let v = if cfg.deflate {
                    (0.02 * j as f64 + 0.03 * normal(&mut drng)).exp()
                } else {
                    1.0
                };
                deflators.insert(c, &ind.code, year, v)?;
            }
        }
    }
    for r in &mut rows {
        let d = deflators.get(&r.country, &r.industry, r.year).expect("all cells drawn");
        r.sales *= d;
        r.materials_cost *= d;
        r.labor_cost *= d;
        r.fixed_assets *= d;
        r.value_added *= d;
    }

    let pscore = PscoreTruth {
        slopes,
        intercepts: cfg
            .cohorts
            .iter()
            .zip(intercepts.iter().zip(&offsets))
            .map(|(c, (a, off))| (c.year, a - off))
            .collect(),
    };
    Ok(Simulation {
        rows,
        treatments,
        deflators,
        truth: SimTruth {
            betas: cfg.industries.iter().map(|i| (i.code.clone(), i.beta)).collect(),
            effect: cfg.effect,
            pscore,
            obs: truth_obs,
        },
    })
}

type FirmOutput = (Vec<FirmYear>, Vec<TruthObs>, TreatmentRow);

fn firm_rows(cfg: &SimConfig, i: usize, p: &Path0, cohort: Option<i32>, rng: &mut ChaCha8Rng) -> Result<FirmOutput> {
    let tech = &cfg.industries[p.industry];
    let firm_id = format!("F{i:06}");
    let mut rows = Vec::with_capacity(p.l.len());
    let mut truth = Vec::with_capacity(p.l.len());
    for (j, year) in (cfg.start_year..=cfg.end_year).enumerate() {
        let (l, k, omega) = (p.l[j], p.k[j], p.omega[j]);
        let delta = cohort.map_or(0.0, |g| cfg.effect.delta(g, year));
        let mut log_mu = match cfg.markup {
            MarkupRule::Constant(mu) => mu.ln(),
            MarkupRule::Lognormal { .. } => p.firm_log_mu,
            MarkupRule::SizeDependent { mu_bar, curvature } => mu_bar.ln() + curvature * (l - L_BAR).powi(2),
        };
        if cfg.effect.outcome == EffectOutcome::Markup {
            log_mu += delta;
        }
        let m = optimal_materials(&tech.beta, l, k, omega, log_mu)?;
        let mut log_revenue = tech.beta.evaluate(l, k, m) + omega;
        if cfg.effect.outcome == EffectOutcome::Sales {
            log_revenue += delta;
            log_mu += delta;
        }
        let eps = cfg.sigma_eps * normal(rng);
        let e = output_elasticity(&tech.beta, l, k, m);
        let sales = (log_revenue + eps).exp();
        let materials = m.exp();
        let employees = l.exp();
        // wage bill at the static optimum for labor, plus wage noise
        let labor_cost = (log_revenue - log_mu).exp() * e.labor.max(0.01) * (0.1 * normal(rng)).exp();
        let fixed_assets = k.exp();
        rows.push(FirmYear {
            firm_id: firm_id.clone(),
            year,
            country: cfg.countries[p.country].clone(),
            industry: tech.code.clone(),
            sales,
            materials_cost: materials,
            labor_cost,
            employees,
            fixed_assets,
            value_added: sales - materials,
            incorporation_year: Some(p.incorporation),
            liquidity_ratio: Some((1.2f64.ln() + 0.3 * normal(rng)).exp()),
            solvency_ratio: Some(rng.gen_range(0.1..0.6)),
            roi: Some((sales - materials - labor_cost) / fixed_assets),
        });
        truth.push(TruthObs {
            firm_id: firm_id.clone(),
            year,
            industry: tech.code.clone(),
            cohort,
            mu: log_mu.exp(),
            theta_m: e.materials,
            theta_l: e.labor,
            epsilon: eps,
            omega,
            delta,
            alpha: (m - log_revenue).exp(),
        });
    }
    let acquirer = match cohort {
        Some(_) => {
            let codes: Vec<&str> = cfg.industries.iter().map(|t| t.code.as_str()).chain(["20", "46", "70"]).collect();
            AcquirerInfo {
                acquirer_id: Some(format!("A{:05}", rng.gen_range(0..100_000))),
                industry: Some(codes[rng.gen_range(0..codes.len())].to_string()),
                country: Some(cfg.countries[rng.gen_range(0..cfg.countries.len())].clone()),
                perimeter: Some((-(rng.gen::<f64>().max(1e-12)).ln() * 25.0).floor() as u32),
            }
        }
        None => AcquirerInfo::default(),
    };
    Ok((
        rows,
        truth,
        TreatmentRow {
            firm_id,
            cohort,
            acquirer,
        },
    ))
}

/// Flexible input whose first-order condition the generator imposes.
pub const FLEXIBLE_INPUT: FlexibleInput = FlexibleInput::Materials;

#[cfg(test)]
mod tests;
