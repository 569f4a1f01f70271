//! Order-deterministic summary statistics.
//!
//! All reductions here use a fixed pairwise tree over the input slice, so a
//! given slice always produces the same float, regardless of how many threads
//! produced the slice. Parallel callers collect per-replicate values into an
//! index-ordered buffer first and reduce single-threaded.

/// Pairwise (cascade) summation with a fixed tree shape.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Arithmetic mean. Empty input yields NaN.
pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Mean and unbiased sample variance (two-pass).
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|&x| (x - m) * (x - m)).collect();
    (m, pairwise_sum(&sq) / (xs.len() - 1) as f64)
}

/// Standard error of the sample mean.
pub fn stderr_mean(xs: &[f64]) -> f64 {
    let (_, v) = mean_var(xs);
    (v / xs.len() as f64).sqrt()
}

/// First four central moments of a sample.
#[derive(Debug, Clone, Copy)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub var: f64,
    /// Fourth central moment (biased, divisor n).
    pub m4: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        let (m, var) = mean_var(xs);
        let n = xs.len();
        let p4: Vec<f64> = xs
            .iter()
            .map(|&x| {
                let d = x - m;
                d * d * d * d
            })
            .collect();
        let m4 = if n == 0 { f64::NAN } else { pairwise_sum(&p4) / n as f64 };
        Moments { n, mean: m, var, m4 }
    }

    /// Standard error of the sample mean.
    pub fn se_mean(&self) -> f64 {
        (self.var / self.n as f64).sqrt()
    }

    /// Asymptotic standard error of the sample variance,
    /// sqrt((m4 - m2^2)/n) with biased second moment m2.
    pub fn se_var(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        let m2 = self.var * (self.n - 1) as f64 / self.n as f64;
        ((self.m4 - m2 * m2).max(0.0) / self.n as f64).sqrt()
    }
}

/// Ordinary least squares fit of `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residual variance (n - 2 dof).
    pub slope_se: f64,
}

/// Fits a straight line; callers pass already-transformed coordinates
/// (e.g. log h vs. log gap for rate estimation).
pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    assert_eq!(x.len(), y.len(), "fit_line: mismatched lengths");
    let n = x.len();
    assert!(n >= 2, "fit_line: need at least two points");
    let mx = mean(x);
    let my = mean(y);
    let sxx: Vec<f64> = x.iter().map(|&v| (v - mx) * (v - mx)).collect();
    let sxy: Vec<f64> = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).collect();
    let sxx = pairwise_sum(&sxx);
    let sxy = pairwise_sum(&sxy);
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let res: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .collect();
    let slope_se = if n > 2 {
        (pairwise_sum(&res) / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::NAN
    };
    LineFit { slope, intercept, slope_se }
}
