//! Replicated paths on the diffusion-time grid and their CSV encoding.

use rayon::prelude::*;

/// A set of replicate paths on the uniform grid `{k/alpha : k = 0..alpha}`.
///
/// `values[r][k]` is replicate `r` at grid cell `k`; every row has
/// `alpha + 1` cells. `w` records the spatial rescaling baked into the
/// values, `seed_base` the master seed the replicate streams derive from.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub values: Vec<Vec<f64>>,
    pub alpha: usize,
    pub w: f64,
    pub label: String,
    pub seed_base: u64,
}

impl PathEnsemble {
    pub fn new(values: Vec<Vec<f64>>, alpha: usize, w: f64, label: &str, seed_base: u64) -> Self {
        assert!(!values.is_empty(), "ensemble needs at least one replicate");
        for row in &values {
            assert_eq!(row.len(), alpha + 1, "replicate length != alpha + 1");
        }
        PathEnsemble { values, alpha, w, label: label.to_string(), seed_base }
    }

    pub fn replicates(&self) -> usize {
        self.values.len()
    }

    /// Grid time of cell `k`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.alpha as f64
    }

    /// Applies `f` to every replicate path, in replicate order.
    pub fn map_replicates<T: Send>(&self, f: impl Fn(&[f64]) -> T + Sync) -> Vec<T> {
        self.values.par_iter().map(|row| f(row)).collect()
    }

    /// CSV with header `t,rep_0,...,rep_{R-1}`: one line per grid cell, 17
    /// significant digits so values round-trip exactly.
    pub fn to_csv(&self) -> String {
        let r = self.replicates();
        let mut out = String::with_capacity((self.alpha + 2) * (r + 1) * 24);
        out.push('t');
        for i in 0..r {
            out.push_str(&format!(",rep_{i}"));
        }
        out.push('\n');
        for k in 0..=self.alpha {
            out.push_str(&format_float(self.time(k)));
            for row in &self.values {
                out.push(',');
                out.push_str(&format_float(row[k]));
            }
            out.push('\n');
        }
        out
    }

    /// Sidecar metadata: the key=value lines that regenerate this ensemble.
    pub fn metadata(&self, h: f64, b: usize, beta_inv: f64) -> String {
        format!(
            "h = {}\nb = {}\nbeta_inv = {}\nalpha = {}\nw = {}\nseed = {}\nlabel = {}\n",
            format_float(h),
            b,
            format_float(beta_inv),
            self.alpha,
            format_float(self.w),
            self.seed_base,
            self.label
        )
    }
}

/// Canonical float encoding for all emitted CSVs: scientific notation with
/// 17 significant digits (exact f64 round trip).
pub fn format_float(v: f64) -> String {
    format!("{:.16e}", v)
}
