//! Checks of the conditions the error bounds rely on, plus Monte Carlo
//! estimates of the iterate-moment constants K1 and K3.
//!
//! The moment ratios are estimated on the linearized recursion (the only
//! process reconstructible from `ModelConstants` alone); for the Linear
//! family the linearized and true iterates coincide exactly, and for the
//! others the bounds treat the difference separately.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::AlgoConfig;
use crate::glm::ModelConstants;
use crate::rng::{replicate_rng, STREAM_ASSUME};
use crate::sgld::{stream_ensemble, Process};

#[derive(Debug, Clone, Copy)]
pub struct AssumptionReport {
    /// All per-observation curvatures nonnegative.
    pub curvature_ok: bool,
    /// `0 < h < 1/(2L)`.
    pub step_size_ok: bool,
    pub c_r_finite: bool,
    /// Estimated `max_k E|theta_k - theta_hat|^2 / (h tau_2^2)`.
    pub k1_hat: f64,
    /// Estimated `max_k (E|theta_k - theta_hat|^6)^{1/3} / (h tau_6^2)`.
    pub k3_hat: f64,
    pub tau2: f64,
    pub tau6: f64,
    pub replicates: usize,
}

impl AssumptionReport {
    pub fn all_ok(&self) -> bool {
        self.curvature_ok
            && self.step_size_ok
            && self.c_r_finite
            && self.k1_hat.is_finite()
            && self.k3_hat.is_finite()
    }
}

/// `tau_2` in closed form: the gradient-noise term has variance
/// `Omega / b` (batch slots are drawn independently and `psi` averages to
/// zero at the critical point) and the injected Gaussian adds
/// `2 beta_inv / h`.
pub fn tau2_closed_form(constants: &ModelConstants, config: &AlgoConfig) -> f64 {
    (constants.omega / config.b as f64 + 2.0 * config.beta_inv / config.h).sqrt()
}

/// Monte Carlo estimate of
/// `tau_q = E{ |b^{-1} sum psi_I + sqrt(2 beta_inv / h) xi|^q }^{1/q}`.
pub fn tau_mc(
    constants: &ModelConstants,
    config: &AlgoConfig,
    q: f64,
    draws: usize,
    master_seed: u64,
) -> f64 {
    assert!(q > 0.0 && draws > 0);
    let n = constants.n();
    let b = config.b as f64;
    let noise_sd = (2.0 * config.beta_inv / config.h).sqrt();
    let mut rng = replicate_rng(master_seed, STREAM_ASSUME, 0);
    let mut acc = 0.0;
    for _ in 0..draws {
        let mut s = 0.0;
        for _ in 0..config.b {
            s += constants.psi[rng.random_range(0..n)];
        }
        let xi: f64 = rng.sample(StandardNormal);
        acc += (s / b + noise_sd * xi).abs().powf(q);
    }
    (acc / draws as f64).powf(1.0 / q)
}

fn moment_ratio(numerator: f64, scale: f64) -> f64 {
    if numerator == 0.0 {
        0.0
    } else if scale == 0.0 {
        f64::INFINITY
    } else {
        numerator / scale
    }
}

/// Full report with explicit Monte Carlo effort; the iterate moments come
/// from `replicates` linearized paths and `tau_6` from `10 * replicates`
/// direct draws (all seeded from `config.master_seed`).
pub fn check_assumptions_with(
    constants: &ModelConstants,
    config: &AlgoConfig,
    replicates: usize,
) -> AssumptionReport {
    let curvature_ok = constants.sigma.iter().all(|&s| s >= 0.0);
    let step_size_ok = config.h > 0.0 && config.h < 1.0 / (2.0 * constants.l);
    let c_r_finite = constants.c_r.is_finite();

    let tau2 = tau2_closed_form(constants, config);
    let tau6 = tau_mc(constants, config, 6.0, 10 * replicates, config.master_seed);

    // The stream summary works on the rescaled path w * eta; divide the
    // scaling back out. Cell 0 is the pinned start and contributes 0.
    let summary = stream_ensemble(Process::Linearized { consts: constants }, config, replicates, |_| 0.0)
        .expect("linearized recursion cannot diverge on a finite grid");
    let w2 = config.w * config.w;
    let mean_sq = summary.max_mean_sq() / w2;
    let mean_p6 = summary.max_mean_p6() / (w2 * w2 * w2);

    AssumptionReport {
        curvature_ok,
        step_size_ok,
        c_r_finite,
        k1_hat: moment_ratio(mean_sq, config.h * tau2 * tau2),
        k3_hat: moment_ratio(mean_p6.cbrt(), config.h * tau6 * tau6),
        tau2,
        tau6,
        replicates,
    }
}

/// Report at the default Monte Carlo effort (2000 paths).
pub fn check_assumptions(constants: &ModelConstants, config: &AlgoConfig) -> AssumptionReport {
    check_assumptions_with(constants, config, 2000)
}
