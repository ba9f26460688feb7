//! Per-industry production functions and output elasticities.
//!
//! Output is log deflated revenue `y`; inputs are log employees `l`, log
//! fixed assets `k` and log materials `m`. Two estimators share a common
//! first stage (a polynomial in the inputs plus year dummies, giving the
//! expected-output fit `phi_hat` and the residual `epsilon_hat`):
//!
//! - [`ols_translog`]: least squares of `y` on the technology terms;
//! - [`acf_estimate`]: the proxy two-stage GMM estimator, which builds
//!   productivity `omega(beta) = phi_hat - f(x; beta)`, projects it on a
//!   polynomial in its lag and sets the innovation orthogonal to the
//!   instruments.

mod acf;
mod sample;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use acf::{acf_estimate, acf_on_sample, gmm_objective, AcfConfig, InstrumentSet};
pub use sample::IndustrySample;

use crate::linalg::least_squares;
use crate::panel::Panel;
use crate::table::{fmt_f64, fmt_opt, Manifest, TableReader, TableWriter};
use crate::{Error, Result};

/// Technology terms in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    L,
    K,
    M,
    LL,
    KK,
    MM,
    LK,
    LM,
    KM,
}

impl Term {
    pub const ALL: [Term; 9] = [
        Term::L,
        Term::K,
        Term::M,
        Term::LL,
        Term::KK,
        Term::MM,
        Term::LK,
        Term::LM,
        Term::KM,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Term::L => "l",
            Term::K => "k",
            Term::M => "m",
            Term::LL => "l2",
            Term::KK => "k2",
            Term::MM => "m2",
            Term::LK => "lk",
            Term::LM => "lm",
            Term::KM => "km",
        }
    }

    pub fn value(self, l: f64, k: f64, m: f64) -> f64 {
        match self {
            Term::L => l,
            Term::K => k,
            Term::M => m,
            Term::LL => l * l,
            Term::KK => k * k,
            Term::MM => m * m,
            Term::LK => l * k,
            Term::LM => l * m,
            Term::KM => k * m,
        }
    }

    pub fn is_first_order(self) -> bool {
        matches!(self, Term::L | Term::K | Term::M)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    CobbDouglas,
    Translog,
}

impl Form {
    pub fn label(self) -> &'static str {
        match self {
            Form::CobbDouglas => "cobb-douglas",
            Form::Translog => "translog",
        }
    }

    pub fn terms(self) -> &'static [Term] {
        match self {
            Form::CobbDouglas => &Term::ALL[..3],
            Form::Translog => &Term::ALL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslogSpec {
    pub form: Form,
    pub include_time_dummies: bool,
    /// Minimum number of observations per industry.
    pub min_obs: usize,
}

impl Default for TranslogSpec {
    fn default() -> Self {
        Self {
            form: Form::CobbDouglas,
            include_time_dummies: true,
            min_obs: 30,
        }
    }
}

impl TranslogSpec {
    pub fn translog() -> Self {
        Self {
            form: Form::Translog,
            ..Self::default()
        }
    }
}

/// Technology coefficients, one per [`Term`]; absent terms are zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Beta(pub [f64; 9]);

impl Beta {
    pub fn cobb_douglas(l: f64, k: f64, m: f64) -> Self {
        let mut b = [0.0; 9];
        b[0] = l;
        b[1] = k;
        b[2] = m;
        Beta(b)
    }

    pub fn get(&self, t: Term) -> f64 {
        self.0[t as usize]
    }

    pub fn set(&mut self, t: Term, v: f64) {
        self.0[t as usize] = v;
    }

    pub fn from_terms(terms: &[Term], values: &[f64]) -> Self {
        let mut b = Beta::default();
        for (t, v) in terms.iter().zip(values) {
            b.set(*t, *v);
        }
        b
    }

    pub fn values_for(&self, terms: &[Term]) -> Vec<f64> {
        terms.iter().map(|t| self.get(*t)).collect()
    }

    /// `f(x; beta)` without intercept.
    pub fn evaluate(&self, l: f64, k: f64, m: f64) -> f64 {
        Term::ALL.iter().map(|t| self.get(*t) * t.value(l, k, m)).sum()
    }
}

/// Output elasticities at one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Elasticities {
    pub labor: f64,
    pub capital: f64,
    pub materials: f64,
}

/// Translog output elasticities at logged inputs `(l, k, m)`.
pub fn output_elasticity(beta: &Beta, l: f64, k: f64, m: f64) -> Elasticities {
    use Term::*;
    let b = |t| beta.get(t);
    Elasticities {
        labor: b(L) + 2.0 * b(LL) * l + b(LK) * k + b(LM) * m,
        capital: b(K) + 2.0 * b(KK) * k + b(LK) * l + b(KM) * m,
        materials: b(M) + 2.0 * b(MM) * m + b(LM) * l + b(KM) * k,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Ols,
    Acf,
}

impl Estimator {
    pub fn label(self) -> &'static str {
        match self {
            Estimator::Ols => "ols",
            Estimator::Acf => "acf",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ols" => Ok(Estimator::Ols),
            "acf" => Ok(Estimator::Acf),
            _ => Err(Error::Config(format!("unknown production-function method `{s}`"))),
        }
    }
}

impl std::str::FromStr for Form {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cobb-douglas" | "cd" => Ok(Form::CobbDouglas),
            "translog" => Ok(Form::Translog),
            _ => Err(Error::Config(format!("unknown functional form `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub status: String,
    /// GMM objective at the estimate (ACF only).
    pub objective: Option<f64>,
    /// GMM objective at the OLS starting value (ACF only).
    pub start_objective: Option<f64>,
    pub iterations: u64,
    pub restarts_converged: usize,
    pub nobs: usize,
    pub moment_obs: usize,
}

/// Estimated technology for one industry with per-observation quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct ElasticitySet {
    pub industry: String,
    pub estimator: Estimator,
    pub form: Form,
    pub beta: Beta,
    /// Bootstrap standard errors, when requested.
    pub std_errors: Option<Beta>,
    /// `(firm_id, year)` for every observation below.
    pub keys: Vec<(String, i32)>,
    pub theta_m: Vec<f64>,
    pub theta_l: Vec<f64>,
    pub phi_hat: Vec<f64>,
    pub epsilon_hat: Vec<f64>,
    pub omega_hat: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl ElasticitySet {
    pub(crate) fn assemble(
        sample: &IndustrySample,
        estimator: Estimator,
        form: Form,
        beta: Beta,
        stage1: &FirstStage,
        diagnostics: Diagnostics,
    ) -> Self {
        let n = sample.len();
        let mut theta_m = Vec::with_capacity(n);
        let mut theta_l = Vec::with_capacity(n);
        let mut omega_hat = Vec::with_capacity(n);
        for i in 0..n {
            let (l, k, m) = (sample.l[i], sample.k[i], sample.m[i]);
            let e = output_elasticity(&beta, l, k, m);
            theta_m.push(e.materials);
            theta_l.push(e.labor);
            omega_hat.push(stage1.phi_hat[i] - beta.evaluate(l, k, m));
        }
        Self {
            industry: sample.industry.clone(),
            estimator,
            form,
            beta,
            std_errors: None,
            keys: sample.keys.clone(),
            theta_m,
            theta_l,
            phi_hat: stage1.phi_hat.clone(),
            epsilon_hat: stage1.epsilon_hat.clone(),
            omega_hat,
            diagnostics,
        }
    }

    /// Productivity by observation, for [`Panel::with_tfp`].
    pub fn tfp_map(&self) -> BTreeMap<(String, i32), f64> {
        self.keys.iter().cloned().zip(self.omega_hat.iter().copied()).collect()
    }
}

/// Stage-1 fit shared by both estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstStage {
    pub phi_hat: Vec<f64>,
    pub epsilon_hat: Vec<f64>,
    /// Design matrix of the polynomial regression (for diagnostics/tests).
    pub design: DMatrix<f64>,
    pub names: Vec<String>,
}

/// Monomials of degree `1..=degree` in the given columns, as exponent tuples.
fn monomials(vars: usize, degree: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, vars: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if left == 0 {
            return;
        }
        for v in start..vars {
            cur.push(v);
            rec(v, vars, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, vars, degree, &mut Vec::new(), &mut out);
    out.sort_by_key(|m| m.len());
    out
}

/// Appends one dummy per year after the first.
pub(crate) fn year_dummies(years: &[i32], names: &mut Vec<String>) -> Vec<Vec<f64>> {
    let mut distinct: Vec<i32> = years.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    distinct
        .iter()
        .skip(1)
        .map(|&y| {
            names.push(format!("year_{y}"));
            years.iter().map(|&v| f64::from(u8::from(v == y))).collect()
        })
        .collect()
}

fn columns_to_matrix(cols: &[Vec<f64>], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// Regresses `y` on a polynomial of `degree` in `(l, k, m)` plus year dummies.
pub fn first_stage(sample: &IndustrySample, degree: usize, time_dummies: bool) -> Result<FirstStage> {
    let n = sample.len();
    let centred: Vec<Vec<f64>> = [&sample.l, &sample.k, &sample.m]
        .iter()
        .map(|v| {
            let mu = crate::stats::mean(v);
            v.iter().map(|x| x - mu).collect()
        })
        .collect();
    let labels = ["l", "k", "m"];
    let mut names = vec!["const".to_string()];
    let mut cols = vec![vec![1.0; n]];
    for mono in monomials(3, degree) {
        names.push(mono.iter().map(|&v| labels[v]).collect::<Vec<_>>().join("*"));
        cols.push((0..n).map(|i| mono.iter().map(|&v| centred[v][i]).product()).collect());
    }
    if time_dummies {
        cols.extend(year_dummies(&sample.year, &mut names));
    }
    let design = columns_to_matrix(&cols, n);
    let fit = least_squares(&design, &DVector::from_column_slice(&sample.y), &names)?;
    Ok(FirstStage {
        phi_hat: fit.fitted.iter().copied().collect(),
        epsilon_hat: fit.resid.iter().copied().collect(),
        design,
        names,
    })
}

pub(crate) struct OlsFit {
    pub beta: Beta,
}

/// Least squares of `y` on the technology terms, intercept and year dummies.
pub(crate) fn ols_fit(sample: &IndustrySample, spec: &TranslogSpec) -> Result<OlsFit> {
    let n = sample.len();
    let terms = spec.form.terms();
    let mut names = vec!["const".to_string()];
    let mut cols = vec![vec![1.0; n]];
    for t in terms {
        names.push(t.label().to_string());
        cols.push((0..n).map(|i| t.value(sample.l[i], sample.k[i], sample.m[i])).collect());
    }
    if spec.include_time_dummies {
        cols.extend(year_dummies(&sample.year, &mut names));
    }
    let design = columns_to_matrix(&cols, n);
    let fit = least_squares(&design, &DVector::from_column_slice(&sample.y), &names)?;
    let values: Vec<f64> = fit.coef.iter().skip(1).take(terms.len()).copied().collect();
    Ok(OlsFit {
        beta: Beta::from_terms(terms, &values),
    })
}

fn check_size(sample: &IndustrySample, spec: &TranslogSpec) -> Result<()> {
    if sample.len() < spec.min_obs {
        return Err(Error::Precondition(format!(
            "industry {}: {} observations, below the floor of {}",
            sample.industry,
            sample.len(),
            spec.min_obs
        )));
    }
    Ok(())
}

/// Least-squares production function for one industry.
pub fn ols_translog(panel: &Panel, industry: &str, spec: &TranslogSpec) -> Result<ElasticitySet> {
    let sample = IndustrySample::from_panel(panel, industry)?;
    ols_on_sample(&sample, spec)
}

pub fn ols_on_sample(sample: &IndustrySample, spec: &TranslogSpec) -> Result<ElasticitySet> {
    check_size(sample, spec)?;
    let fit = ols_fit(sample, spec)?;
    let stage1 = first_stage(sample, 3, spec.include_time_dummies)?;
    let diagnostics = Diagnostics {
        status: "ok".into(),
        objective: None,
        start_objective: None,
        iterations: 0,
        restarts_converged: 0,
        nobs: sample.len(),
        moment_obs: 0,
    };
    Ok(ElasticitySet::assemble(sample, Estimator::Ols, spec.form, fit.beta, &stage1, diagnostics))
}

/// Runs `estimator` on every industry of the panel in parallel.
///
/// Results are returned in industry order and do not depend on the number of
/// worker threads.
pub fn estimate_industries(
    panel: &Panel,
    estimator: Estimator,
    spec: &TranslogSpec,
    config: &AcfConfig,
) -> Vec<(String, Result<ElasticitySet>)> {
    panel
        .industries()
        .into_par_iter()
        .map(|ind| {
            let res = IndustrySample::from_panel(panel, &ind).and_then(|s| match estimator {
                Estimator::Ols => ols_on_sample(&s, spec),
                Estimator::Acf => acf_on_sample(&s, spec, config),
            });
            (ind, res)
        })
        .collect()
}

/// Firm-block bootstrap standard errors of the technology coefficients.
///
/// Replications that fail to estimate are skipped; fewer than two successful
/// replications is an inference error.
pub fn bootstrap_std_errors(
    sample: &IndustrySample,
    estimator: Estimator,
    spec: &TranslogSpec,
    config: &AcfConfig,
    reps: usize,
    seed: u64,
) -> Result<Beta> {
    let draws: Vec<Beta> = (0..reps as u64)
        .into_par_iter()
        .filter_map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let s = sample.resample_firms(&mut rng);
            let est = match estimator {
                Estimator::Ols => ols_fit(&s, spec).map(|f| f.beta),
                Estimator::Acf => acf_on_sample(&s, spec, config).map(|e| e.beta),
            };
            est.ok()
        })
        .collect();
    if draws.len() < 2 {
        return Err(Error::Inference(format!(
            "industry {}: only {} of {reps} bootstrap replications succeeded",
            sample.industry,
            draws.len()
        )));
    }
    let mut se = Beta::default();
    for t in Term::ALL {
        let v: Vec<f64> = draws.iter().map(|b| b.get(t)).collect();
        se.set(t, crate::stats::std_dev(&v));
    }
    Ok(se)
}

/// Writes `elasticities.csv`: one row per industry and term.
pub fn write_elasticities_csv(path: &Path, sets: &[ElasticitySet], manifest: Option<&Manifest>) -> Result<()> {
    let mut w = TableWriter::create(
        path,
        manifest,
        &["industry", "estimator", "term", "coefficient", "std_error"],
    )?;
    for s in sets {
        for t in s.form.terms() {
            w.row([
                s.industry.clone(),
                s.estimator.label().to_string(),
                t.label().to_string(),
                fmt_f64(s.beta.get(*t)),
                s.std_errors.map(|se| fmt_f64(se.get(*t))).unwrap_or_default(),
            ])?;
        }
    }
    w.finish()
}

/// Per-observation elasticities, first-stage noise and productivity.
pub fn write_observations_csv(path: &Path, sets: &[ElasticitySet], manifest: Option<&Manifest>) -> Result<()> {
    let mut w = TableWriter::create(
        path,
        manifest,
        &["industry", "firm_id", "year", "theta_m", "theta_l", "phi_hat", "epsilon_hat", "omega_hat"],
    )?;
    for s in sets {
        for (i, (firm, year)) in s.keys.iter().enumerate() {
            w.row([
                s.industry.clone(),
                firm.clone(),
                year.to_string(),
                fmt_f64(s.theta_m[i]),
                fmt_f64(s.theta_l[i]),
                fmt_f64(s.phi_hat[i]),
                fmt_f64(s.epsilon_hat[i]),
                fmt_f64(s.omega_hat[i]),
            ])?;
        }
    }
    w.finish()
}

pub fn write_diagnostics_csv(path: &Path, sets: &[ElasticitySet], manifest: Option<&Manifest>) -> Result<()> {
    let mut w = TableWriter::create(
        path,
        manifest,
        &[
            "industry",
            "estimator",
            "form",
            "status",
            "objective",
            "start_objective",
            "iterations",
            "restarts_converged",
            "nobs",
            "moment_obs",
        ],
    )?;
    for s in sets {
        let d = &s.diagnostics;
        w.row([
            s.industry.clone(),
            s.estimator.label().to_string(),
            s.form.label().to_string(),
            d.status.clone(),
            fmt_opt(d.objective),
            fmt_opt(d.start_objective),
            d.iterations.to_string(),
            d.restarts_converged.to_string(),
            d.nobs.to_string(),
            d.moment_obs.to_string(),
        ])?;
    }
    w.finish()
}

/// Rebuilds elasticity sets from the coefficient and observation files.
/// Diagnostics are not restored.
pub fn load_elasticity_sets(coefficients: &Path, observations: &Path) -> Result<Vec<ElasticitySet>> {
    let mut sets: BTreeMap<String, ElasticitySet> = BTreeMap::new();
    let mut reader = TableReader::open(coefficients)?;
    reader.require(&["industry", "estimator", "term", "coefficient", "std_error"])?;
    reader.for_each(|row| {
        let industry = row.text("industry")?;
        let estimator: Estimator = row.text("estimator")?.parse()?;
        let label = row.text("term")?;
        let term = Term::ALL
            .into_iter()
            .find(|t| t.label() == label)
            .ok_or_else(|| Error::Schema(format!("unknown production-function term `{label}`")))?;
        let set = sets.entry(industry.clone()).or_insert_with(|| ElasticitySet {
            industry,
            estimator,
            form: Form::CobbDouglas,
            beta: Beta::default(),
            std_errors: None,
            keys: Vec::new(),
            theta_m: Vec::new(),
            theta_l: Vec::new(),
            phi_hat: Vec::new(),
            epsilon_hat: Vec::new(),
            omega_hat: Vec::new(),
            diagnostics: Diagnostics {
                status: "loaded".into(),
                objective: None,
                start_objective: None,
                iterations: 0,
                restarts_converged: 0,
                nobs: 0,
                moment_obs: 0,
            },
        });
        if !term.is_first_order() {
            set.form = Form::Translog;
        }
        set.beta.set(term, row.f64("coefficient")?);
        if let Some(se) = row.opt_f64("std_error")? {
            set.std_errors.get_or_insert_with(Beta::default).set(term, se);
        }
        Ok(())
    })?;
    let mut reader = TableReader::open(observations)?;
    reader.require(&["industry", "firm_id", "year", "theta_m", "theta_l", "epsilon_hat", "omega_hat"])?;
    reader.for_each(|row| {
        let industry = row.text("industry")?;
        let set = sets
            .get_mut(&industry)
            .ok_or_else(|| Error::Coverage(format!("observations for industry {industry} without coefficients")))?;
        set.keys.push((row.text("firm_id")?, row.i32("year")?));
        set.theta_m.push(row.f64("theta_m")?);
        set.theta_l.push(row.f64("theta_l")?);
        set.phi_hat.push(row.opt_f64("phi_hat")?.unwrap_or(f64::NAN));
        set.epsilon_hat.push(row.f64("epsilon_hat")?);
        set.omega_hat.push(row.opt_f64("omega_hat")?.unwrap_or(f64::NAN));
        Ok(())
    })?;
    for s in sets.values_mut() {
        s.diagnostics.nobs = s.keys.len();
    }
    Ok(sets.into_values().collect())
}

#[cfg(test)]
mod tests;
