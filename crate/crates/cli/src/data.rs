//! Synthetic single-covariate datasets for the three model families.

use oulab::glm::{Family, GlmModel};
use oulab::rng::replicate_rng;
use oulab::{Error, Result};
use rand::Rng;
use rand_distr::{Poisson, StandardNormal};

/// Stream tag for dataset generation; keeps data draws disjoint from the
/// simulation streams even when the same seed is reused.
pub const STREAM_DATA: u64 = 0x4441;

/// Recipe for a synthetic dataset. Covariates are uniform on
/// `(-cov_c, cov_c)` and responses follow the family's mean function at
/// `theta_star * x + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub family: Family,
    pub n: usize,
    pub cov_c: f64,
    pub theta_star: f64,
    pub intercept: f64,
    /// Response noise standard deviation; only the linear family uses it.
    pub noise: f64,
    pub theta_domain: Option<(f64, f64)>,
    pub data_seed: u64,
}

/// Draws the dataset deterministically from `data_seed`: all covariates
/// first, then responses in index order.
pub fn synth_data(spec: &SynthSpec) -> Result<GlmModel> {
    if spec.n < 2 {
        return Err(Error::Config("synthetic datasets need n >= 2".into()));
    }
    for (name, v) in
        [("cov_c", spec.cov_c), ("theta_star", spec.theta_star), ("intercept", spec.intercept)]
    {
        if !v.is_finite() {
            return Err(Error::Config(format!("{name} must be finite")));
        }
    }
    if !(spec.cov_c > 0.0) {
        return Err(Error::Config("cov_c must be positive".into()));
    }
    if !(spec.noise.is_finite() && spec.noise >= 0.0) {
        return Err(Error::Config("noise must be nonnegative".into()));
    }

    let mut rng = replicate_rng(spec.data_seed, STREAM_DATA, 0);
    let x: Vec<f64> =
        (0..spec.n).map(|_| rng.random_range(-spec.cov_c..spec.cov_c)).collect();

    let mut y = Vec::with_capacity(spec.n);
    for &xi in &x {
        let u = spec.theta_star * xi + spec.intercept;
        let yi = match spec.family {
            Family::Linear => {
                let noise: f64 = rng.sample(StandardNormal);
                u + spec.noise * noise
            }
            Family::Logistic => {
                let p = spec.family.mean_fn(u);
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Poisson => {
                let dist = Poisson::new(u.exp())
                    .map_err(|e| Error::Model(format!("poisson rate at x = {xi}: {e}")))?;
                rng.sample::<f64, _>(dist)
            }
        };
        y.push(yi);
    }

    if spec.family == Family::Logistic && y.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::Model(format!(
            "all {} logistic responses came out {}; the critical point is at infinity \
             (try another data_seed, larger n, or a milder signal)",
            spec.n, y[0]
        )));
    }

    GlmModel::new(spec.family, x, y, spec.intercept, spec.theta_domain)
}
