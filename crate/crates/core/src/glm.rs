//! Univariate generalized linear losses and the per-model constants the
//! simulators and bound evaluators consume.
//!
//! Each observation `(x_i, y_i)` contributes the log-likelihood-style loss
//! with ascent gradient `(y_i - q(theta*x_i + intercept)) * x_i`, where `q`
//! is the family's mean function (identity, logistic, or exponential).

use crate::error::{Error, Result};
use crate::stats::pairwise_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Linear,
    Logistic,
    Poisson,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::Logistic => "logistic",
            Family::Poisson => "poisson",
        }
    }

    /// Mean function q(u).
    #[inline]
    pub fn mean_fn(self, u: f64) -> f64 {
        match self {
            Family::Linear => u,
            Family::Logistic => sigmoid(u),
            Family::Poisson => u.exp(),
        }
    }

    /// First derivative q'(u).
    #[inline]
    pub fn mean_fn_deriv(self, u: f64) -> f64 {
        match self {
            Family::Linear => 1.0,
            Family::Logistic => {
                let s = sigmoid(u);
                s * (1.0 - s)
            }
            Family::Poisson => u.exp(),
        }
    }
}

/// Numerically stable logistic function.
#[inline]
fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// A univariate GLM dataset with a fixed, known intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmModel {
    pub family: Family,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub intercept: f64,
    /// Bounded parameter interval; required for the Poisson curvature
    /// constant, optional elsewhere.
    pub theta_domain: Option<(f64, f64)>,
}

impl GlmModel {
    pub fn new(
        family: Family,
        x: Vec<f64>,
        y: Vec<f64>,
        intercept: f64,
        theta_domain: Option<(f64, f64)>,
    ) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Model("dataset is empty".into()));
        }
        if x.len() != y.len() {
            return Err(Error::Model(format!(
                "x has {} entries but y has {}",
                x.len(),
                y.len()
            )));
        }
        if !intercept.is_finite() {
            return Err(Error::Model("intercept must be finite".into()));
        }
        for (i, (&xi, &yi)) in x.iter().zip(&y).enumerate() {
            if !xi.is_finite() || !yi.is_finite() {
                return Err(Error::Model(format!("non-finite observation at row {i}")));
            }
            match family {
                Family::Logistic => {
                    if yi != 0.0 && yi != 1.0 {
                        return Err(Error::Model(format!(
                            "logistic response must be 0 or 1, got {yi} at row {i}"
                        )));
                    }
                }
                Family::Poisson => {
                    if yi < 0.0 || yi.fract() != 0.0 {
                        return Err(Error::Model(format!(
                            "poisson response must be a nonnegative integer, got {yi} at row {i}"
                        )));
                    }
                }
                Family::Linear => {}
            }
        }
        if let Some((lo, hi)) = theta_domain {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Model(format!(
                    "theta domain must be a bounded interval, got [{lo}, {hi}]"
                )));
            }
        } else if family == Family::Poisson {
            return Err(Error::Model(
                "poisson models require a bounded theta domain".into(),
            ));
        }
        Ok(GlmModel { family, x, y, intercept, theta_domain })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Linear predictor `theta * x_i + intercept`.
    #[inline]
    pub fn linpred(&self, i: usize, theta: f64) -> f64 {
        theta * self.x[i] + self.intercept
    }

    /// Ascent gradient of the i-th loss term. Panics if `i` is out of range.
    #[inline]
    pub fn gradient(&self, i: usize, theta: f64) -> f64 {
        (self.y[i] - self.family.mean_fn(self.linpred(i, theta))) * self.x[i]
    }

    /// Mean score `n^{-1} sum_i gradient(i, theta)`.
    pub fn mean_score(&self, theta: f64) -> f64 {
        let terms: Vec<f64> = (0..self.n()).map(|i| self.gradient(i, theta)).collect();
        pairwise_sum(&terms) / self.n() as f64
    }

    /// Serializes to the plain-text model format (see [`GlmModel::parse`]).
    pub fn to_text(&self) -> String {
        let mut s = format!("family={} intercept={:.16e}", self.family.name(), self.intercept);
        if let Some((lo, hi)) = self.theta_domain {
            s.push_str(&format!(" domain={:.16e},{:.16e}", lo, hi));
        }
        s.push('\n');
        for (xi, yi) in self.x.iter().zip(&self.y) {
            s.push_str(&format!("{:.16e},{:.16e}\n", xi, yi));
        }
        s
    }

    /// Parses the plain-text model format: a header line of `key=value`
    /// tokens (`family=...`, optional `intercept=...`, optional
    /// `domain=lo,hi`) followed by one `x,y` line per observation.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Model("empty model file".into()))?;
        let mut family = None;
        let mut intercept = 0.0;
        let mut domain = None;
        for tok in header.split_whitespace() {
            let (key, val) = tok
                .split_once('=')
                .ok_or_else(|| Error::Model(format!("malformed header token '{tok}'")))?;
            match key {
                "family" => {
                    family = Some(match val {
                        "linear" => Family::Linear,
                        "logistic" => Family::Logistic,
                        "poisson" => Family::Poisson,
                        other => {
                            return Err(Error::Model(format!("unknown family '{other}'")))
                        }
                    })
                }
                "intercept" => {
                    intercept = val
                        .parse()
                        .map_err(|_| Error::Model(format!("bad intercept '{val}'")))?
                }
                "domain" => {
                    let (lo, hi) = val
                        .split_once(',')
                        .ok_or_else(|| Error::Model(format!("bad domain '{val}'")))?;
                    let lo: f64 = lo
                        .parse()
                        .map_err(|_| Error::Model(format!("bad domain bound '{lo}'")))?;
                    let hi: f64 = hi
                        .parse()
                        .map_err(|_| Error::Model(format!("bad domain bound '{hi}'")))?;
                    domain = Some((lo, hi));
                }
                other => return Err(Error::Model(format!("unknown header key '{other}'"))),
            }
        }
        let family =
            family.ok_or_else(|| Error::Model("header is missing family=".into()))?;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (row, line) in lines.enumerate() {
            let (xs, ys) = line
                .split_once(',')
                .ok_or_else(|| Error::Model(format!("data row {row} is not 'x,y'")))?;
            x.push(
                xs.trim()
                    .parse()
                    .map_err(|_| Error::Model(format!("bad x value '{xs}' at row {row}")))?,
            );
            y.push(
                ys.trim()
                    .parse()
                    .map_err(|_| Error::Model(format!("bad y value '{ys}' at row {row}")))?,
            );
        }
        GlmModel::new(family, x, y, intercept, domain)
    }
}

/// Everything the simulators and bound formulas need to know about a model,
/// computed once at the critical point.
#[derive(Debug, Clone)]
pub struct ModelConstants {
    pub theta_hat: f64,
    /// Per-observation gradients at the critical point.
    pub psi: Vec<f64>,
    /// Per-observation curvatures at the critical point (all nonnegative).
    pub sigma: Vec<f64>,
    /// Smoothness constant `max(1, max_i sigma_i)`.
    pub l: f64,
    /// Curvature-remainder constant of the linearization.
    pub c_r: f64,
    /// Gradient-noise second moment `mean psi_i^2`.
    pub omega: f64,
    /// Mean curvature `mean sigma_i`.
    pub sigma_info: f64,
    /// Even moments of psi: `psi_moment[q/2 - 1] = mean psi_i^q`, q = 2,4,6.
    pub psi2: f64,
    pub psi4: f64,
    pub psi6: f64,
}

impl ModelConstants {
    /// Gradient of the linearized loss: `psi_i - sigma_i * (theta - theta_hat)`.
    #[inline]
    pub fn linearized_gradient(&self, i: usize, theta: f64) -> f64 {
        self.psi[i] - self.sigma[i] * (theta - self.theta_hat)
    }

    /// Even moment accessor; q must be 2, 4, or 6.
    pub fn psi_moment(&self, q: usize) -> f64 {
        match q {
            2 => self.psi2,
            4 => self.psi4,
            6 => self.psi6,
            _ => panic!("psi moments are tracked for q in {{2, 4, 6}}, got {q}"),
        }
    }

    pub fn n(&self) -> usize {
        self.psi.len()
    }
}

/// Mean score with saturating arithmetic, used only for root bracketing where
/// the Poisson exponential may overflow far from the root.
fn score_clamped(model: &GlmModel, theta: f64) -> f64 {
    let mut acc = 0.0f64;
    for i in 0..model.n() {
        let u = model.linpred(i, theta);
        let q = match model.family {
            Family::Poisson => u.min(700.0).exp(),
            f => f.mean_fn(u),
        };
        let term = ((model.y[i] - q) * model.x[i]).clamp(-1e300, 1e300);
        acc = (acc + term).clamp(-1e306, 1e306);
    }
    acc / model.n() as f64
}

/// Finds the root of the mean score by safeguarded Newton iteration inside a
/// sign-change bracket grown geometrically from `[-1, 1]`.
///
/// Converges when `|mean score| <= 1e-12 * (1 + mean |gradient at 0|)`.
pub fn fit_critical_point(model: &GlmModel) -> Result<f64> {
    let n = model.n() as f64;
    let g0: Vec<f64> = (0..model.n()).map(|i| model.gradient(i, 0.0).abs()).collect();
    let tol = 1e-12 * (1.0 + pairwise_sum(&g0) / n);

    if model.family == Family::Logistic {
        // Separated data: every score term x_i*(y_i - q) keeps the sign of
        // (2*y_i - 1)*x_i for all theta, so the score never crosses zero
        // (it only underflows). Refuse rather than return a spurious root.
        let signs: Vec<f64> = model
            .x
            .iter()
            .zip(&model.y)
            .map(|(&xi, &yi)| (2.0 * yi - 1.0) * xi)
            .collect();
        let one_sided = (signs.iter().all(|&s| s >= 0.0) || signs.iter().all(|&s| s <= 0.0))
            && signs.iter().any(|&s| s != 0.0);
        if one_sided {
            return Err(Error::NoBracket((2.0f64).powi(60)));
        }
    }

    if score_clamped(model, 0.0).abs() <= tol {
        return Ok(0.0);
    }

    // Grow the bracket until the (non-increasing) score changes sign.
    let mut half = 1.0f64;
    let cap = (2.0f64).powi(60);
    let (mut lo, mut hi) = loop {
        let s_lo = score_clamped(model, -half);
        let s_hi = score_clamped(model, half);
        if s_lo >= 0.0 && s_hi <= 0.0 {
            break (-half, half);
        }
        half *= 2.0;
        if half > cap {
            return Err(Error::NoBracket(cap));
        }
    };

    let mut theta = 0.5 * (lo + hi);
    for _ in 0..200 {
        let s = score_clamped(model, theta);
        if s.abs() <= tol {
            return Ok(theta);
        }
        if s > 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        // Newton step on the true (unclamped) derivative; fall back to
        // bisection whenever it would leave the bracket or stall.
        let terms: Vec<f64> = (0..model.n())
            .map(|i| model.family.mean_fn_deriv(model.linpred(i, theta)) * model.x[i] * model.x[i])
            .collect();
        let ds = -pairwise_sum(&terms) / n;
        let newton = theta - s / ds;
        theta = if ds < 0.0 && newton >= lo && newton <= hi && newton != theta {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * (1.0 + theta.abs()) {
            let s = score_clamped(model, theta);
            if s.abs() <= tol {
                return Ok(theta);
            }
            return Err(Error::NoConvergence(200));
        }
    }
    if score_clamped(model, theta).abs() <= tol {
        Ok(theta)
    } else {
        Err(Error::NoConvergence(200))
    }
}

/// Computes all model constants at the critical point.
pub fn model_constants(model: &GlmModel) -> Result<ModelConstants> {
    let theta_hat = fit_critical_point(model)?;
    let n = model.n();
    let psi: Vec<f64> = (0..n).map(|i| model.gradient(i, theta_hat)).collect();
    let sigma: Vec<f64> = (0..n)
        .map(|i| model.family.mean_fn_deriv(model.linpred(i, theta_hat)) * model.x[i] * model.x[i])
        .collect();
    for (i, &s) in sigma.iter().enumerate() {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::Model(format!(
                "curvature at the critical point is not finite and nonnegative at row {i}"
            )));
        }
    }
    let l = sigma.iter().fold(1.0f64, |a, &s| a.max(s));
    let c_r = match model.family {
        Family::Linear => 0.0,
        Family::Logistic => {
            model.x.iter().fold(0.0f64, |a, &xi| a.max(xi * xi / 27.0))
        }
        Family::Poisson => {
            let (lo, hi) = model.theta_domain.expect("validated at construction");
            let mut c = 0.0f64;
            for &theta in &[lo, hi, theta_hat] {
                for &xi in &model.x {
                    let u = xi * theta + model.intercept;
                    let bound = ((u.abs() + model.intercept.abs()).exp() / 2.0) * xi * xi;
                    c = c.max(bound);
                }
            }
            c
        }
    };
    if !c_r.is_finite() {
        return Err(Error::Model("curvature-remainder constant overflowed".into()));
    }
    let pow_mean = |p: u32| -> f64 {
        let terms: Vec<f64> = psi.iter().map(|&v| v.powi(p as i32)).collect();
        pairwise_sum(&terms) / n as f64
    };
    let omega = pow_mean(2);
    let psi4 = pow_mean(4);
    let psi6 = pow_mean(6);
    let sigma_mean = pairwise_sum(&sigma) / n as f64;
    Ok(ModelConstants {
        theta_hat,
        psi,
        sigma,
        l,
        c_r,
        omega,
        sigma_info: sigma_mean,
        psi2: omega,
        psi4,
        psi6,
    })
}
