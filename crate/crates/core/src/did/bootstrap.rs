use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::stats::{normal_quantile, quantile};
use crate::{Error, Result};

/// Multiplier-bootstrap draws of `sqrt(N) * mean(v * influence)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bootstrap {
    pub reps: usize,
    pub n: usize,
    /// `draws[b][j]` for replication `b` and parameter `j`.
    pub draws: Vec<Vec<f64>>,
    /// Robust (interquartile) scale of each parameter's draws.
    pub sigma: Vec<f64>,
    /// Standard errors, `sigma / sqrt(N)`.
    pub se: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Firm-level Rademacher multiplier bootstrap. Replication `b` draws its
/// multipliers from a generator seeded with `seed ^ b`, so results do not
/// depend on scheduling.
pub fn bootstrap_se(influence: &[&[f64]], reps: usize, seed: u64) -> Result<Bootstrap> {
    let k = influence.len();
    let n = influence.first().map_or(0, |v| v.len());
    if n == 0 {
        return Err(Error::Inference("no influence values to bootstrap".into()));
    }
    if influence.iter().any(|v| v.len() != n) {
        return Err(Error::Inference("influence vectors differ in length".into()));
    }
    if reps < 2 {
        return Err(Error::Inference(format!("{reps} bootstrap replications requested")));
    }
    let mut warnings = Vec::new();
    if reps < 100 {
        warnings.push(format!("only {reps} bootstrap replications; standard errors will be noisy"));
    }
    let root_n = (n as f64).sqrt();
    let draws: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ b);
            let v: Vec<f64> = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
            influence
                .iter()
                .map(|inf| inf.iter().zip(&v).map(|(a, m)| a * m).sum::<f64>() / root_n)
                .collect()
        })
        .collect();
    let iqr_scale = normal_quantile(0.75) - normal_quantile(0.25);
    let sigma: Vec<f64> = (0..k)
        .map(|j| {
            let col: Vec<f64> = draws.iter().map(|d| d[j]).collect();
            let s = (quantile(&col, 0.75) - quantile(&col, 0.25)) / iqr_scale;
            if s.is_finite() && s > 1e-300 {
                s
            } else {
                0.0
            }
        })
        .collect();
    Ok(Bootstrap {
        reps,
        n,
        se: sigma.iter().map(|s| s / root_n).collect(),
        draws,
        sigma,
        warnings,
    })
}

impl Bootstrap {
    /// Critical value for simultaneous `1 - alpha` bands over `family`.
    /// Parameters with zero spread are left out of the maximum.
    pub fn critical_value(&self, family: &[usize], alpha: f64) -> f64 {
        let live: Vec<usize> = family.iter().copied().filter(|&j| self.sigma[j] > 0.0).collect();
        if live.is_empty() {
            return normal_quantile(1.0 - alpha / 2.0);
        }
        let maxima: Vec<f64> = self
            .draws
            .iter()
            .map(|d| live.iter().map(|&j| (d[j] / self.sigma[j]).abs()).fold(0.0, f64::max))
            .collect();
        quantile(&maxima, 1.0 - alpha)
    }

    /// Covariance of the estimates for the parameters in `idx`.
    pub fn covariance(&self, idx: &[usize]) -> DMatrix<f64> {
        let k = idx.len();
        let reps = self.draws.len() as f64;
        let means: Vec<f64> = idx
            .iter()
            .map(|&j| self.draws.iter().map(|d| d[j]).sum::<f64>() / reps)
            .collect();
        let mut cov = DMatrix::zeros(k, k);
        for d in &self.draws {
            let dev = DVector::from_iterator(k, idx.iter().zip(&means).map(|(&j, m)| d[j] - m));
            cov += &dev * dev.transpose();
        }
        cov / ((reps - 1.0) * self.n as f64)
    }
}
