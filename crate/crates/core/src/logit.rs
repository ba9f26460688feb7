//! Maximum-likelihood logistic regression by Newton iterations.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{dependent_columns, inverse_spd, solve_spd};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogitOptions {
    /// Convergence threshold on the largest absolute coefficient update.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for LogitOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogitFit {
    pub names: Vec<String>,
    pub coef: DVector<f64>,
    /// Fitted probabilities, one per row of the design.
    pub prob: Vec<f64>,
    /// `(X' W X / n)^{-1}`, the inverse average Hessian used for influence functions.
    pub inv_hessian: DMatrix<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn log_likelihood(eta: &DVector<f64>, d: &[f64]) -> f64 {
    eta.iter()
        .zip(d)
        .map(|(&z, &y)| {
            // log(1 + e^z) computed without overflow
            let log1pexp = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            y * z - log1pexp
        })
        .sum()
}

/// Screens 0/1 columns for (quasi-)complete separation: a dummy whose active
/// rows are all of one outcome class drives its coefficient to infinity.
fn binary_separation(x: &DMatrix<f64>, d: &[f64], names: &[String]) -> Option<String> {
    for j in 0..x.ncols() {
        let col = x.column(j);
        let binary = col.iter().all(|&v| v == 0.0 || v == 1.0);
        let ones = col.iter().filter(|&&v| v == 1.0).count();
        if !binary || ones == 0 || ones == col.len() {
            continue;
        }
        let treated_on = col.iter().zip(d).filter(|(&v, &y)| v == 1.0 && y == 1.0).count();
        if treated_on == 0 || treated_on == ones {
            return Some(names[j].clone());
        }
    }
    None
}

/// Fits `P(d = 1 | x) = 1 / (1 + exp(-x'b))`.
///
/// The design must already contain an intercept column if one is wanted.
pub fn fit_logit(x: &DMatrix<f64>, d: &[f64], names: &[String], opts: LogitOptions) -> Result<LogitFit> {
    let n = x.nrows();
    let p = x.ncols();
    if d.len() != n {
        return Err(Error::Precondition(format!("logit: {n} rows but {} outcomes", d.len())));
    }
    let positives = d.iter().filter(|&&v| v == 1.0).count();
    if positives == 0 || positives == n {
        return Err(Error::Inference("logit: outcome has no variation".into()));
    }
    let dependent = dependent_columns(x);
    if !dependent.is_empty() {
        let labels: Vec<&str> = dependent.iter().map(|&j| names[j].as_str()).collect();
        return Err(Error::Inference(format!(
            "logit: collinear covariates: {}",
            labels.join(", ")
        )));
    }
    if let Some(col) = binary_separation(x, d, names) {
        return Err(Error::Inference(format!("logit: perfect separation on covariate `{col}`")));
    }

    let mut coef = DVector::zeros(p);
    if let Some(j) = (0..p).find(|&j| x.column(j).iter().all(|&v| v == 1.0)) {
        let share = positives as f64 / n as f64;
        coef[j] = (share / (1.0 - share)).ln();
    }
    let mut eta = x * &coef;
    let mut ll = log_likelihood(&eta, d);
    let mut trace = vec![ll];

    for iter in 1..=opts.max_iter {
        let prob: Vec<f64> = eta.iter().map(|&z| sigmoid(z)).collect();
        let score = x.transpose() * DVector::from_iterator(n, d.iter().zip(&prob).map(|(y, q)| y - q));
        let mut xw = x.clone();
        for (i, q) in prob.iter().enumerate() {
            let w = q * (1.0 - q);
            xw.row_mut(i).scale_mut(w);
        }
        let info = x.transpose() * xw;
        let step = solve_spd(&info, &score)
            .ok_or_else(|| Error::Inference(format!("logit: singular information matrix at iteration {iter}")))?;

        // Step halving keeps the likelihood monotone.
        let mut scale = 1.0;
        let mut candidate = &coef + &step * scale;
        let mut cand_eta = x * &candidate;
        let mut cand_ll = log_likelihood(&cand_eta, d);
        while cand_ll < ll - 1e-12 * ll.abs().max(1.0) && scale > 1e-8 {
            scale *= 0.5;
            candidate = &coef + &step * scale;
            cand_eta = x * &candidate;
            cand_ll = log_likelihood(&cand_eta, d);
        }
        let delta = (&step * scale).amax();
        coef = candidate;
        eta = cand_eta;
        ll = cand_ll;
        trace.push(ll);

        if eta.amax() > 35.0 && ll > -1e-8 {
            let j = (0..p)
                .filter(|&j| !x.column(j).iter().all(|&v| v == 1.0))
                .max_by(|&a, &b| {
                    let sa = coef[a].abs() * column_sd(x, a);
                    let sb = coef[b].abs() * column_sd(x, b);
                    sa.total_cmp(&sb)
                })
                .unwrap_or(0);
            return Err(Error::Inference(format!(
                "logit: perfect separation on covariate `{}`",
                names[j]
            )));
        }

        if delta < opts.tolerance {
            let prob: Vec<f64> = eta.iter().map(|&z| sigmoid(z)).collect();
            let mut xw = x.clone();
            for (i, q) in prob.iter().enumerate() {
                xw.row_mut(i).scale_mut(q * (1.0 - q));
            }
            let avg_info = (x.transpose() * xw) / n as f64;
            let inv_hessian = inverse_spd(&avg_info)
                .ok_or_else(|| Error::Inference("logit: singular Hessian at optimum".into()))?;
            return Ok(LogitFit {
                names: names.to_vec(),
                coef,
                prob,
                inv_hessian,
                log_likelihood: ll,
                iterations: iter,
            });
        }
    }
    let shown: Vec<String> = trace.iter().map(|v| format!("{v:.6}")).collect();
    Err(Error::Inference(format!(
        "logit: no convergence after {} iterations; log-likelihood trace: [{}]",
        opts.max_iter,
        shown.join(", ")
    )))
}

fn column_sd(x: &DMatrix<f64>, j: usize) -> f64 {
    let col: Vec<f64> = x.column(j).iter().copied().collect();
    crate::stats::std_dev(&col)
}
