use argmin::core::{CostFunction, Executor, State, TerminationReason};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{check_size, first_stage, ols_fit, year_dummies, Beta, Diagnostics, ElasticitySet, Estimator, IndustrySample, TranslogSpec};
use crate::linalg::{inverse_spd, solve_spd};
use crate::panel::Panel;
use crate::{Error, Result};

/// Instruments for the innovation moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstrumentSet {
    /// `k_t, l_t, m_{t-1}`.
    Levels,
    /// Levels plus their squares and pairwise interactions (9 instruments).
    Quadratic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcfConfig {
    pub first_stage_degree: usize,
    pub law_of_motion_degree: usize,
    pub instruments: InstrumentSet,
    /// Simplex termination: standard deviation of the vertex costs.
    pub tolerance: f64,
    pub max_iter: u64,
    pub restarts: usize,
    /// Standard deviation of the random perturbation of restart points.
    pub restart_scale: f64,
    pub seed: u64,
}

impl Default for AcfConfig {
    fn default() -> Self {
        Self {
            first_stage_degree: 3,
            law_of_motion_degree: 3,
            instruments: InstrumentSet::Quadratic,
            tolerance: 1e-8,
            max_iter: 5000,
            restarts: 5,
            restart_scale: 0.1,
            seed: 0,
        }
    }
}

impl AcfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.first_stage_degree < 2 {
            return Err(Error::Config("first_stage_degree must be at least 2".into()));
        }
        if self.law_of_motion_degree < 1 {
            return Err(Error::Config("law_of_motion_degree must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("optimizer tolerance must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Everything the GMM objective needs, precomputed once per sample.
struct Moments {
    phi_c: Vec<f64>,
    phi_l: Vec<f64>,
    /// Technology term values at current and lagged observations, by term.
    x_c: Vec<Vec<f64>>,
    x_l: Vec<Vec<f64>>,
    dummies: Vec<Vec<f64>>,
    z: DMatrix<f64>,
    w: DMatrix<f64>,
    degree: usize,
}

fn instruments(sample: &IndustrySample, set: InstrumentSet) -> DMatrix<f64> {
    let base: Vec<Vec<f64>> = vec![
        sample.pairs.iter().map(|&(c, _)| sample.k[c]).collect(),
        sample.pairs.iter().map(|&(c, _)| sample.l[c]).collect(),
        sample.pairs.iter().map(|&(_, p)| sample.m[p]).collect(),
    ];
    let mut cols = base.clone();
    if set == InstrumentSet::Quadratic {
        for b in &base {
            cols.push(b.iter().map(|v| v * v).collect());
        }
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            cols.push(base[a].iter().zip(&base[b]).map(|(x, y)| x * y).collect());
        }
    }
    DMatrix::from_fn(sample.pairs.len(), cols.len(), |i, j| cols[j][i])
}

impl Moments {
    fn new(sample: &IndustrySample, phi: &[f64], spec: &TranslogSpec, config: &AcfConfig) -> Result<Self> {
        let terms = spec.form.terms().to_vec();
        let pairs = &sample.pairs;
        let term_values = |idx: &dyn Fn(&(usize, usize)) -> usize| -> Vec<Vec<f64>> {
            terms
                .iter()
                .map(|t| {
                    pairs
                        .iter()
                        .map(|p| {
                            let i = idx(p);
                            t.value(sample.l[i], sample.k[i], sample.m[i])
                        })
                        .collect()
                })
                .collect()
        };
        let x_c = term_values(&|p| p.0);
        let x_l = term_values(&|p| p.1);
        let dummies = if spec.include_time_dummies {
            let years: Vec<i32> = pairs.iter().map(|&(c, _)| sample.year[c]).collect();
            year_dummies(&years, &mut Vec::new())
        } else {
            Vec::new()
        };
        let z = instruments(sample, config.instruments);
        let n = z.nrows() as f64;
        let w = inverse_spd(&(z.transpose() * &z / n)).ok_or_else(|| {
            Error::Estimation(format!(
                "industry {}: instrument cross-product matrix is singular",
                sample.industry
            ))
        })?;
        Ok(Self {
            phi_c: pairs.iter().map(|&(c, _)| phi[c]).collect(),
            phi_l: pairs.iter().map(|&(_, p)| phi[p]).collect(),
            x_c,
            x_l,
            dummies,
            z,
            w,
            degree: config.law_of_motion_degree,
        })
    }

    fn omega(&self, phi: &[f64], x: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let mut out = phi.to_vec();
        for (col, beta) in x.iter().zip(b) {
            for (o, v) in out.iter_mut().zip(col) {
                *o -= beta * v;
            }
        }
        out
    }

    /// Innovation `xi` from projecting `omega_t` on a polynomial in `omega_{t-1}`.
    fn innovation(&self, b: &[f64]) -> Option<Vec<f64>> {
        let w_c = self.omega(&self.phi_c, &self.x_c, b);
        let w_l = self.omega(&self.phi_l, &self.x_l, b);
        let n = w_c.len();
        // Standardising the lag leaves the polynomial span unchanged but keeps
        // the cubic well conditioned.
        let mu = crate::stats::mean(&w_l);
        let sd = crate::stats::std_dev(&w_l);
        let sd = if sd > 0.0 { sd } else { 1.0 };
        let p = 1 + self.degree + self.dummies.len();
        let g = DMatrix::from_fn(n, p, |i, j| {
            if j <= self.degree {
                ((w_l[i] - mu) / sd).powi(j as i32)
            } else {
                self.dummies[j - self.degree - 1][i]
            }
        });
        let gt = g.transpose();
        let y = DVector::from_vec(w_c);
        let coef = solve_spd(&(&gt * &g), &(&gt * &y))?;
        Some((y - g * coef).iter().copied().collect())
    }

    /// `N * g' W g` with `g = Z' xi / N`.
    fn objective(&self, b: &[f64]) -> f64 {
        let Some(xi) = self.innovation(b) else {
            return f64::MAX;
        };
        let n = xi.len() as f64;
        let g = self.z.transpose() * DVector::from_vec(xi) / n;
        let v = n * (g.transpose() * &self.w * &g)[(0, 0)];
        if v.is_finite() {
            v
        } else {
            f64::MAX
        }
    }
}

impl CostFunction for &Moments {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.objective(p))
    }
}

struct Run {
    param: Vec<f64>,
    cost: f64,
    converged: bool,
    iterations: u64,
}

fn simplex_search(moments: &Moments, start: &[f64], config: &AcfConfig) -> Result<Run> {
    let mut simplex = vec![start.to_vec()];
    for j in 0..start.len() {
        let mut v = start.to_vec();
        v[j] += 0.05;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(config.tolerance)
        .map_err(|e| Error::Config(e.to_string()))?;
    let res = Executor::new(moments, solver)
        .configure(|s| s.max_iters(config.max_iter))
        .run()
        .map_err(|e| Error::Estimation(format!("simplex search failed: {e}")))?;
    let state = res.state();
    let param = state
        .get_best_param()
        .cloned()
        .unwrap_or_else(|| start.to_vec());
    Ok(Run {
        cost: moments.objective(&param),
        param,
        converged: matches!(state.get_termination_reason(), Some(TerminationReason::SolverConverged)),
        iterations: state.get_iter(),
    })
}

/// Proxy two-stage estimator for one industry.
pub fn acf_estimate(panel: &Panel, industry: &str, spec: &TranslogSpec, config: &AcfConfig) -> Result<ElasticitySet> {
    let sample = IndustrySample::from_panel(panel, industry)?;
    acf_on_sample(&sample, spec, config)
}

pub fn acf_on_sample(sample: &IndustrySample, spec: &TranslogSpec, config: &AcfConfig) -> Result<ElasticitySet> {
    config.validate()?;
    check_size(sample, spec)?;
    let terms = spec.form.terms();
    let needed = terms.len().max(3) + config.law_of_motion_degree + 1;
    if sample.pairs.len() <= needed {
        return Err(Error::Precondition(format!(
            "industry {}: insufficient lag depth ({} consecutive firm-year pairs)",
            sample.industry,
            sample.pairs.len()
        )));
    }
    let stage1 = first_stage(sample, config.first_stage_degree, spec.include_time_dummies)?;
    let moments = Moments::new(sample, &stage1.phi_hat, spec, config)?;
    let ols = ols_fit(sample, spec)?.beta.values_for(terms);
    let start_objective = moments.objective(&ols);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.restart_scale.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let mut runs = Vec::with_capacity(config.restarts + 1);
    for r in 0..=config.restarts {
        let start: Vec<f64> = if r == 0 {
            ols.clone()
        } else {
            ols.iter().map(|b| b + noise.sample(&mut rng)).collect()
        };
        runs.push(simplex_search(&moments, &start, config)?);
    }
    let converged = runs.iter().filter(|r| r.converged).count();
    let iterations = runs.iter().map(|r| r.iterations).sum();
    let best = runs
        .into_iter()
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .expect("at least one run");
    if converged == 0 {
        return Err(Error::Estimation(format!(
            "industry {}: simplex search did not converge after {} restarts; best objective {:.6e}",
            sample.industry, config.restarts, best.cost
        )));
    }
    let diagnostics = Diagnostics {
        status: if best.converged { "converged" } else { "best run hit max_iter" }.into(),
        objective: Some(best.cost),
        start_objective: Some(start_objective),
        iterations,
        restarts_converged: converged,
        nobs: sample.len(),
        moment_obs: sample.pairs.len(),
    };
    let beta = Beta::from_terms(terms, &best.param);
    Ok(ElasticitySet::assemble(sample, Estimator::Acf, spec.form, beta, &stage1, diagnostics))
}

/// GMM objective at `beta` (N-scaled), as minimised by [`acf_estimate`].
pub fn gmm_objective(sample: &IndustrySample, spec: &TranslogSpec, config: &AcfConfig, beta: &Beta) -> Result<f64> {
    let stage1 = first_stage(sample, config.first_stage_degree, spec.include_time_dummies)?;
    let moments = Moments::new(sample, &stage1.phi_hat, spec, config)?;
    Ok(moments.objective(&beta.values_for(spec.form.terms())))
}
