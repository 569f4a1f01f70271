//! Stochastic gradient iterates, their linearization, and the
//! exchangeable-pair coupling used by the error-bound analysis.
//!
//! One step of the algorithm is
//! `theta <- theta + (h/b) * sum_{i in batch} grad_i(theta) + sqrt(2*h*beta_inv) * xi`,
//! started at the critical point. The rescaled path `w*(theta_k - theta_hat)`
//! lives on the grid `{k/alpha}` next to its diffusion limit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::config::AlgoConfig;
use crate::ensemble::PathEnsemble;
use crate::error::{Error, Result};
use crate::glm::{GlmModel, ModelConstants};
use crate::rng::{derive_seed, STREAM_SGLD};

/// Every random draw one replicate consumes, materialized up front.
///
/// Generation order is fixed and never depends on algorithm parameters:
/// first the `alpha * b` batch indices (row-major by step, then slot), then
/// the `alpha` Gaussians, then the swap position `k`, then the `b` swap
/// indices, then the swap Gaussian. This layout is what makes replicates
/// reproducible and couplable across processes and thread counts.
#[derive(Debug, Clone)]
pub struct BatchDraw {
    pub alpha: usize,
    pub b: usize,
    /// `alpha * b` data indices, step-major.
    pub indices: Vec<usize>,
    /// `alpha` standard normals (consumed only when beta_inv > 0, but always
    /// drawn so the stream layout is parameter-independent).
    pub gauss: Vec<f64>,
    /// Swap position, uniform on `{0, ..., alpha-1}`.
    pub k: usize,
    /// Replacement batch for step `k`.
    pub swap_batch: Vec<usize>,
    /// Replacement Gaussian for step `k`.
    pub swap_gauss: f64,
}

impl BatchDraw {
    pub fn generate(n: usize, alpha: usize, b: usize, seed: u64) -> Self {
        assert!(n > 0 && alpha > 0 && b > 0, "degenerate draw dimensions");
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let indices = (0..alpha * b).map(|_| rng.random_range(0..n)).collect();
        let gauss = (0..alpha).map(|_| rng.sample(StandardNormal)).collect();
        let k = rng.random_range(0..alpha);
        let swap_batch = (0..b).map(|_| rng.random_range(0..n)).collect();
        let swap_gauss = rng.sample(StandardNormal);
        BatchDraw { alpha, b, indices, gauss, k, swap_batch, swap_gauss }
    }

    /// The indices of step `step`'s batch.
    #[inline]
    pub fn batch(&self, step: usize) -> &[usize] {
        &self.indices[step * self.b..(step + 1) * self.b]
    }
}

/// Runs the SGLD recursion on the true gradients; returns the `alpha + 1`
/// iterates starting at the critical point.
pub fn run_sgld(
    model: &GlmModel,
    consts: &ModelConstants,
    cfg: &AlgoConfig,
    draw: &BatchDraw,
) -> Result<Vec<f64>> {
    debug_assert_eq!(draw.alpha, cfg.alpha);
    debug_assert_eq!(draw.b, cfg.b);
    let step_scale = cfg.h / cfg.b as f64;
    let noise = (2.0 * cfg.h * cfg.beta_inv).sqrt();
    let mut theta = consts.theta_hat;
    let mut path = Vec::with_capacity(cfg.alpha + 1);
    path.push(theta);
    for k in 0..cfg.alpha {
        let mut grad = 0.0;
        for &i in draw.batch(k) {
            grad += model.gradient(i, theta);
        }
        theta += step_scale * grad + noise * draw.gauss[k];
        if !theta.is_finite() {
            return Err(Error::Diverged { step: k });
        }
        path.push(theta);
    }
    Ok(path)
}

/// Runs the recursion on the linearized gradients `psi_i - sigma_i * eta`;
/// returns the `alpha + 1` centered iterates `eta_k` starting at zero.
pub fn run_linearized(
    consts: &ModelConstants,
    cfg: &AlgoConfig,
    draw: &BatchDraw,
) -> Result<Vec<f64>> {
    let step_scale = cfg.h / cfg.b as f64;
    let noise = (2.0 * cfg.h * cfg.beta_inv).sqrt();
    let mut eta = 0.0;
    let mut path = Vec::with_capacity(cfg.alpha + 1);
    path.push(eta);
    for k in 0..cfg.alpha {
        eta = linear_step(consts, step_scale, noise, draw, k, eta);
        if !eta.is_finite() {
            return Err(Error::Diverged { step: k });
        }
        path.push(eta);
    }
    Ok(path)
}

/// One linearized step from `eta` using step `k`'s batch and Gaussian.
#[inline]
fn linear_step(
    consts: &ModelConstants,
    step_scale: f64,
    noise: f64,
    draw: &BatchDraw,
    k: usize,
    eta: f64,
) -> f64 {
    let mut grad = 0.0;
    for &i in draw.batch(k) {
        grad += consts.psi[i] - consts.sigma[i] * eta;
    }
    eta + step_scale * grad + noise * draw.gauss[k]
}

/// The contraction product `Q(j, k) = prod_{m=j}^{k-1} (1 - (h/b) * sum_{i in
/// batch m} sigma_i)`; empty products (`j >= k`) are 1.
pub fn q_product(sigma: &[f64], draw: &BatchDraw, j: usize, k: usize, h: f64, b: usize) -> f64 {
    let scale = h / b as f64;
    let mut q = 1.0;
    for m in j..k {
        let mut s = 0.0;
        for &i in draw.batch(m) {
            s += sigma[i];
        }
        q *= 1.0 - scale * s;
    }
    q
}

/// Closed-form solution of the linearized recursion,
/// `eta_k = sum_{j<k} Q(j+1, k) * [(h/b) * sum_i psi_{I(j,i)} + sqrt(2*h*beta_inv) * xi_j]`,
/// evaluated with explicit products. Cross-checks `run_linearized`.
pub fn eta_closed_form(consts: &ModelConstants, cfg: &AlgoConfig, draw: &BatchDraw) -> Vec<f64> {
    let scale = cfg.h / cfg.b as f64;
    let noise = (2.0 * cfg.h * cfg.beta_inv).sqrt();
    let factors: Vec<f64> = (0..cfg.alpha)
        .map(|m| {
            let mut s = 0.0;
            for &i in draw.batch(m) {
                s += consts.sigma[i];
            }
            1.0 - scale * s
        })
        .collect();
    let innovations: Vec<f64> = (0..cfg.alpha)
        .map(|j| {
            let mut s = 0.0;
            for &i in draw.batch(j) {
                s += consts.psi[i];
            }
            scale * s + noise * draw.gauss[j]
        })
        .collect();
    let mut path = Vec::with_capacity(cfg.alpha + 1);
    for k in 0..=cfg.alpha {
        // Walk j downward, extending the suffix product Q(j+1, k) one factor
        // at a time.
        let mut acc = 0.0;
        let mut q = 1.0;
        for j in (0..k).rev() {
            if j + 1 < k {
                q *= factors[j + 1];
            }
            acc += q * innovations[j];
        }
        path.push(acc);
    }
    path
}

/// Affine map onto the diffusion scale: `w * (value - center)`.
pub fn rescale(path: &[f64], w: f64, center: f64) -> Vec<f64> {
    path.iter().map(|&v| w * (v - center)).collect()
}

/// Builds the exchangeable pair on the rescaled linearized path: the primed
/// copy replays the same draws except at step `draw.k`, where the batch and
/// the Gaussian are replaced by the swap draws.
///
/// Returns `(y, y_prime)`, both rescaled by `cfg.w`.
pub fn exchangeable_pair(
    consts: &ModelConstants,
    cfg: &AlgoConfig,
    draw: &BatchDraw,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let eta = run_linearized(consts, cfg, draw)?;
    let step_scale = cfg.h / cfg.b as f64;
    let noise = (2.0 * cfg.h * cfg.beta_inv).sqrt();
    let k = draw.k;

    let mut eta_p = eta[..=k].to_vec();
    // Step k with the swap draws.
    let mut grad = 0.0;
    for &i in &draw.swap_batch {
        grad += consts.psi[i] - consts.sigma[i] * eta[k];
    }
    let mut cur = eta[k] + step_scale * grad + noise * draw.swap_gauss;
    eta_p.push(cur);
    // Steps k+1.. replay the original draws.
    for m in (k + 1)..cfg.alpha {
        cur = linear_step(consts, step_scale, noise, draw, m, cur);
        if !cur.is_finite() {
            return Err(Error::Diverged { step: m });
        }
        eta_p.push(cur);
    }
    Ok((rescale(&eta, cfg.w, 0.0), rescale(&eta_p, cfg.w, 0.0)))
}

/// Closed form of the rescaled pair difference: zero through cell `k`, and
/// `w * Q(k+1, m) * (eta_{k+1} - eta'_{k+1})` afterwards, with the step-k
/// discrepancy written out explicitly. Cross-checks `exchangeable_pair`.
pub fn pair_difference_oracle(
    consts: &ModelConstants,
    cfg: &AlgoConfig,
    draw: &BatchDraw,
) -> Vec<f64> {
    let scale = cfg.h / cfg.b as f64;
    let noise = (2.0 * cfg.h * cfg.beta_inv).sqrt();
    let k = draw.k;
    let eta = eta_closed_form(consts, cfg, draw);

    let (mut d_sigma, mut d_psi) = (0.0, 0.0);
    for &i in draw.batch(k) {
        d_sigma -= consts.sigma[i];
        d_psi += consts.psi[i];
    }
    for &i in &draw.swap_batch {
        d_sigma += consts.sigma[i];
        d_psi -= consts.psi[i];
    }
    // eta_{k+1} - eta'_{k+1}: curvature mismatch acting on eta_k, gradient
    // mismatch, and the Gaussian mismatch.
    let d0 = scale * (d_sigma * eta[k] + d_psi) + noise * (draw.gauss[k] - draw.swap_gauss);

    let mut diff = vec![0.0; k + 1];
    for m in (k + 1)..=cfg.alpha {
        diff.push(cfg.w * q_product(&consts.sigma, draw, k + 1, m, cfg.h, cfg.b) * d0);
    }
    diff
}

/// Which recursion an ensemble runs.
#[derive(Clone, Copy)]
pub enum Process<'a> {
    /// True gradients; paths are rescaled around the critical point.
    Sgld { model: &'a GlmModel, consts: &'a ModelConstants },
    /// Linearized gradients; paths are rescaled around zero.
    Linearized { consts: &'a ModelConstants },
}

impl<'a> Process<'a> {
    fn dataset_size(&self) -> usize {
        match self {
            Process::Sgld { consts, .. } | Process::Linearized { consts } => consts.n(),
        }
    }

    fn run_rescaled(&self, cfg: &AlgoConfig, draw: &BatchDraw) -> Result<Vec<f64>> {
        match self {
            Process::Sgld { model, consts } => {
                Ok(rescale(&run_sgld(model, consts, cfg, draw)?, cfg.w, consts.theta_hat))
            }
            Process::Linearized { consts } => {
                Ok(rescale(&run_linearized(consts, cfg, draw)?, cfg.w, 0.0))
            }
        }
    }
}

/// Simulates `r` independent replicates and materializes the rescaled paths.
///
/// Replicate `i` draws from the stream seeded by
/// `derive_seed(cfg.master_seed, STREAM_SGLD, i)`; the output is
/// bit-identical for any thread count.
pub fn make_ensemble(
    process: Process,
    cfg: &AlgoConfig,
    r: usize,
    label: &str,
) -> Result<PathEnsemble> {
    assert!(r > 0, "need at least one replicate");
    let n = process.dataset_size();
    let rows: Vec<Result<Vec<f64>>> = (0..r)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(cfg.master_seed, STREAM_SGLD, i as u64);
            let draw = BatchDraw::generate(n, cfg.alpha, cfg.b, seed);
            process.run_rescaled(cfg, &draw)
        })
        .collect();
    let mut values = Vec::with_capacity(r);
    for row in rows {
        values.push(row?);
    }
    Ok(PathEnsemble::new(values, cfg.alpha, cfg.w, label, cfg.master_seed))
}

/// Streaming summary of an ensemble that is never materialized: one
/// functional value per replicate plus per-cell moment accumulators of the
/// rescaled path (used for the iterate-moment assumption checks).
#[derive(Debug, Clone)]
pub struct StreamSummary {
    /// `eval` output per replicate, in replicate order.
    pub g_values: Vec<f64>,
    /// Per grid cell: sum over replicates of `value^2`.
    pub sum_sq: Vec<f64>,
    /// Per grid cell: sum over replicates of `|value|^6`.
    pub sum_p6: Vec<f64>,
    pub replicates: usize,
}

impl StreamSummary {
    /// Largest per-cell mean of `value^2` across the grid.
    pub fn max_mean_sq(&self) -> f64 {
        self.sum_sq.iter().fold(0.0f64, |a, &s| a.max(s)) / self.replicates as f64
    }

    /// Largest per-cell mean of `|value|^6` across the grid.
    pub fn max_mean_p6(&self) -> f64 {
        self.sum_p6.iter().fold(0.0f64, |a, &s| a.max(s)) / self.replicates as f64
    }
}

/// Replicates processed per parallel work unit. Partial sums are reduced in
/// block order on one thread, so results do not depend on thread count.
const STREAM_BLOCK: usize = 64;

/// Runs `r` replicates, applying `eval` to each rescaled path and folding
/// per-cell moments, without keeping paths in memory.
pub fn stream_ensemble(
    process: Process,
    cfg: &AlgoConfig,
    r: usize,
    eval: impl Fn(&[f64]) -> f64 + Sync,
) -> Result<StreamSummary> {
    assert!(r > 0, "need at least one replicate");
    let n = process.dataset_size();
    let cells = cfg.alpha + 1;
    let blocks = r.div_ceil(STREAM_BLOCK);
    let partials: Vec<Result<(Vec<f64>, Vec<f64>, Vec<f64>)>> = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let lo = blk * STREAM_BLOCK;
            let hi = ((blk + 1) * STREAM_BLOCK).min(r);
            let mut g = Vec::with_capacity(hi - lo);
            let mut sq = vec![0.0; cells];
            let mut p6 = vec![0.0; cells];
            for i in lo..hi {
                let seed = derive_seed(cfg.master_seed, STREAM_SGLD, i as u64);
                let draw = BatchDraw::generate(n, cfg.alpha, cfg.b, seed);
                let path = process.run_rescaled(cfg, &draw)?;
                g.push(eval(&path));
                for (c, &v) in path.iter().enumerate() {
                    let v2 = v * v;
                    sq[c] += v2;
                    p6[c] += v2 * v2 * v2;
                }
            }
            Ok((g, sq, p6))
        })
        .collect();

    let mut out = StreamSummary {
        g_values: Vec::with_capacity(r),
        sum_sq: vec![0.0; cells],
        sum_p6: vec![0.0; cells],
        replicates: r,
    };
    for part in partials {
        let (g, sq, p6) = part?;
        out.g_values.extend(g);
        for c in 0..cells {
            out.sum_sq[c] += sq[c];
            out.sum_p6[c] += p6[c];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{model_constants, Family, GlmModel};
    use approx::assert_relative_eq;

    fn linear_fixture() -> (GlmModel, ModelConstants) {
        let m = GlmModel::new(
            Family::Linear,
            vec![0.6, -0.4, 0.3, 0.5],
            vec![1.0, 0.2, -0.3, 0.8],
            0.1,
            None,
        )
        .unwrap();
        let c = model_constants(&m).unwrap();
        (m, c)
    }

    fn cfg(h: f64, b: usize, beta_inv: f64, alpha: usize) -> AlgoConfig {
        AlgoConfig::raw(h, b, beta_inv, alpha, 2.0, 77).unwrap()
    }

    #[test]
    fn draw_layout_and_ranges() {
        let d = BatchDraw::generate(7, 12, 3, 123);
        assert_eq!(d.indices.len(), 36);
        assert_eq!(d.gauss.len(), 12);
        assert_eq!(d.swap_batch.len(), 3);
        assert!(d.k < 12);
        assert!(d.indices.iter().all(|&i| i < 7));
        assert!(d.swap_batch.iter().all(|&i| i < 7));
        // Same seed, same draw; different seed, different draw.
        assert_eq!(d.indices, BatchDraw::generate(7, 12, 3, 123).indices);
        assert_ne!(d.indices, BatchDraw::generate(7, 12, 3, 124).indices);
    }

    #[test]
    fn sgld_starts_at_critical_point_and_moves() {
        let (m, c) = linear_fixture();
        let cfg = cfg(0.05, 2, 0.1, 20);
        let d = BatchDraw::generate(m.n(), cfg.alpha, cfg.b, 5);
        let path = run_sgld(&m, &c, &cfg, &d).unwrap();
        assert_eq!(path.len(), 21);
        assert_eq!(path[0], c.theta_hat);
        assert!(path.iter().any(|&v| v != c.theta_hat));
    }

    #[test]
    fn closed_form_matches_recursion() {
        let (m, c) = linear_fixture();
        let cfg = cfg(0.08, 2, 0.05, 40);
        let d = BatchDraw::generate(m.n(), cfg.alpha, cfg.b, 11);
        let rec = run_linearized(&c, &cfg, &d).unwrap();
        let closed = eta_closed_form(&c, &cfg, &d);
        let scale = rec.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        for (a, b) in rec.iter().zip(&closed) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + scale));
        }
    }

    #[test]
    fn q_product_empty_and_contracting() {
        let (m, c) = linear_fixture();
        let cfg = cfg(0.1, 1, 0.0, 30);
        let d = BatchDraw::generate(m.n(), cfg.alpha, cfg.b, 3);
        assert_eq!(q_product(&c.sigma, &d, 5, 5, cfg.h, cfg.b), 1.0);
        assert_eq!(q_product(&c.sigma, &d, 9, 4, cfg.h, cfg.b), 1.0);
        // h < 1/(2L) keeps every factor in [0, 1].
        let q = q_product(&c.sigma, &d, 0, 30, cfg.h, cfg.b);
        assert!((0.0..=1.0).contains(&q));
        // Multiplicativity: Q(0,30) = Q(0,10) * Q(10,30).
        let split =
            q_product(&c.sigma, &d, 0, 10, cfg.h, cfg.b) * q_product(&c.sigma, &d, 10, 30, cfg.h, cfg.b);
        assert_relative_eq!(q, split, max_relative = 1e-14);
    }

    #[test]
    fn pair_agrees_before_swap_and_oracle_after() {
        let (m, c) = linear_fixture();
        let cfg = cfg(0.07, 2, 0.2, 25);
        for seed in 0..20 {
            let d = BatchDraw::generate(m.n(), cfg.alpha, cfg.b, seed);
            let (y, yp) = exchangeable_pair(&c, &cfg, &d).unwrap();
            let oracle = pair_difference_oracle(&c, &cfg, &d);
            assert_eq!(&y[..=d.k], &yp[..=d.k], "prefix must match exactly");
            let scale = oracle.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            for i in 0..y.len() {
                let diff = y[i] - yp[i];
                assert!(
                    (diff - oracle[i]).abs() <= 1e-10 * (1.0 + scale),
                    "cell {i}: {diff} vs oracle {}",
                    oracle[i]
                );
            }
        }
    }

    #[test]
    fn ensembles_are_seed_deterministic() {
        let (m, c) = linear_fixture();
        let cfg = cfg(0.05, 1, 0.1, 16);
        let a = make_ensemble(Process::Sgld { model: &m, consts: &c }, &cfg, 8, "y").unwrap();
        let b = make_ensemble(Process::Sgld { model: &m, consts: &c }, &cfg, 8, "y").unwrap();
        assert_eq!(a.values, b.values);
        let lin =
            make_ensemble(Process::Linearized { consts: &c }, &cfg, 8, "ylin").unwrap();
        assert_eq!(lin.values[0][0], 0.0);
    }

    #[test]
    fn stream_summary_matches_materialized() {
        let (m, c) = linear_fixture();
        let cfg = cfg(0.05, 1, 0.3, 16);
        let proc = Process::Sgld { model: &m, consts: &c };
        let ens = make_ensemble(proc, &cfg, 100, "y").unwrap();
        let sup = |p: &[f64]| p.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let summary = stream_ensemble(proc, &cfg, 100, sup).unwrap();
        let direct: Vec<f64> = ens.values.iter().map(|p| sup(p)).collect();
        assert_eq!(summary.g_values, direct);
        let mut sq0 = 0.0;
        for row in &ens.values {
            sq0 += row[5] * row[5];
        }
        assert_relative_eq!(summary.sum_sq[5], sq0, max_relative = 1e-12);
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let (m, c) = linear_fixture();
        // Step size far above 2/L: the linear recursion explodes.
        let cfg = AlgoConfig::raw(1e6, 1, 0.0, 400, 1.0, 3).unwrap();
        let d = BatchDraw::generate(m.n(), cfg.alpha, cfg.b, 8);
        match run_sgld(&m, &c, &cfg, &d) {
            Err(Error::Diverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
