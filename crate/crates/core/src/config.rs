//! Algorithm configuration: step size, batch size, temperature, and the
//! space/time rescaling that maps iterates onto the diffusion clock.

use crate::error::{Error, Result};

/// How the rescaling parameters were chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Setting {
    /// All parameters supplied directly.
    Raw,
    /// Statistical calibration: for a dataset of size `n` run `m` epochs with
    /// `h = 2*w1*b/n`, `beta_inv = w2/n`, `alpha = m*n/b`, `w = sqrt(n)`.
    Statistical { w1: f64, w2: f64, m: u32, n: usize },
    /// Small-step calibration: `alpha = round(c1/h)`,
    /// `w = c2 * min(sqrt(b/h), sqrt(1/beta_inv))`, requiring `b <= c3/h^4`.
    Numerical { c1: f64, c2: f64, c3: f64 },
}

/// Parameters of one SGLD run and of the rescaled path built from it.
///
/// `beta_inv` is the inverse temperature's reciprocal (1/beta); zero means
/// no injected noise, i.e. plain SGD. The rescaled path lives on the grid
/// `{k/alpha : k = 0..alpha}` and scales space by `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoConfig {
    pub h: f64,
    pub b: usize,
    pub beta_inv: f64,
    pub alpha: usize,
    pub w: f64,
    pub master_seed: u64,
    pub setting: Setting,
}

fn pos(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be nonnegative and finite, got {v}")))
    }
}

impl AlgoConfig {
    /// All parameters supplied directly.
    pub fn raw(h: f64, b: usize, beta_inv: f64, alpha: usize, w: f64, master_seed: u64) -> Result<Self> {
        let cfg = AlgoConfig { h, b, beta_inv, alpha, w, master_seed, setting: Setting::Raw };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Statistical calibration for a dataset of size `n`: `m` epochs of
    /// batch-`b` steps, step size `2*w1*b/n`, temperature `n/w2`.
    pub fn statistical(w1: f64, w2: f64, m: u32, n: usize, b: usize, master_seed: u64) -> Result<Self> {
        pos("w1", w1)?;
        nonneg("w2", w2)?;
        if m == 0 {
            return Err(Error::Config("m (epochs) must be at least 1".into()));
        }
        if n == 0 {
            return Err(Error::Config("n (sample size) must be at least 1".into()));
        }
        let nf = n as f64;
        let cfg = AlgoConfig {
            h: 2.0 * w1 * b as f64 / nf,
            b,
            beta_inv: w2 / nf,
            alpha: (m as f64 * nf / b as f64).round() as usize,
            w: nf.sqrt(),
            master_seed,
            setting: Setting::Statistical { w1, w2, m, n },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Small-step calibration: horizon `c1` in diffusion time, space scale
    /// `c2 * min(sqrt(b/h), sqrt(1/beta_inv))`, batch cap `b <= c3/h^4`.
    pub fn numerical(
        c1: f64,
        c2: f64,
        c3: f64,
        h: f64,
        b: usize,
        beta_inv: f64,
        master_seed: u64,
    ) -> Result<Self> {
        pos("c1", c1)?;
        pos("c2", c2)?;
        pos("c3", c3)?;
        pos("h", h)?;
        nonneg("beta_inv", beta_inv)?;
        if b as f64 > c3 / (h * h * h * h) {
            return Err(Error::Config(format!(
                "batch size {b} exceeds the calibration cap c3/h^4 = {:.3e}",
                c3 / (h * h * h * h)
            )));
        }
        let scale_sgd = (b as f64 / h).sqrt();
        let scale_temp = if beta_inv > 0.0 { (1.0 / beta_inv).sqrt() } else { f64::INFINITY };
        let cfg = AlgoConfig {
            h,
            b,
            beta_inv,
            alpha: (c1 / h).round() as usize,
            w: c2 * scale_sgd.min(scale_temp),
            master_seed,
            setting: Setting::Numerical { c1, c2, c3 },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        pos("h", self.h)?;
        nonneg("beta_inv", self.beta_inv)?;
        pos("w", self.w)?;
        if self.b == 0 {
            return Err(Error::Config("batch size b must be at least 1".into()));
        }
        if self.alpha == 0 {
            return Err(Error::Config("alpha must be at least 1".into()));
        }
        Ok(())
    }

    /// Grid spacing of the rescaled path, `1/alpha`.
    pub fn dt(&self) -> f64 {
        1.0 / self.alpha as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn statistical_preset_formulas() {
        let c = AlgoConfig::statistical(0.5, 2.0, 3, 100, 4, 1).unwrap();
        assert_relative_eq!(c.h, 2.0 * 0.5 * 4.0 / 100.0);
        assert_relative_eq!(c.beta_inv, 0.02);
        assert_eq!(c.alpha, 75);
        assert_relative_eq!(c.w, 10.0);
    }

    #[test]
    fn numerical_preset_uses_smaller_scale() {
        // b/h = 64 and 1/beta_inv = 16: the temperature scale wins.
        let c = AlgoConfig::numerical(1.0, 3.0, 1e9, 0.25, 16, 1.0 / 16.0, 1).unwrap();
        assert_eq!(c.alpha, 4);
        assert_relative_eq!(c.w, 3.0 * 4.0);
        // With no injected noise the SGD scale is the only one.
        let c = AlgoConfig::numerical(1.0, 3.0, 1e9, 0.25, 16, 0.0, 1).unwrap();
        assert_relative_eq!(c.w, 3.0 * 8.0);
    }

    #[test]
    fn numerical_preset_enforces_batch_cap() {
        assert!(AlgoConfig::numerical(1.0, 1.0, 1.0, 0.5, 17, 0.0, 1).is_err());
        assert!(AlgoConfig::numerical(1.0, 1.0, 1.0, 0.5, 16, 0.0, 1).is_ok());
    }

    #[test]
    fn rejects_degenerate_parameters() {
        assert!(AlgoConfig::raw(0.0, 1, 0.0, 8, 1.0, 1).is_err());
        assert!(AlgoConfig::raw(0.1, 0, 0.0, 8, 1.0, 1).is_err());
        assert!(AlgoConfig::raw(0.1, 1, -0.5, 8, 1.0, 1).is_err());
        assert!(AlgoConfig::raw(0.1, 1, 0.0, 0, 1.0, 1).is_err());
        assert!(AlgoConfig::raw(0.1, 1, 0.0, 8, 0.0, 1).is_err());
        assert!(AlgoConfig::raw(f64::NAN, 1, 0.0, 8, 1.0, 1).is_err());
    }
}
