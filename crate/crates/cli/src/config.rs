//! Experiment configuration: a flat `key = value` file format, resolution
//! into library types, and the inverse operation (manifest echo) that makes
//! every finished run rerunnable from its output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;

use oulab::config::Setting;
use oulab::functionals::PathFunctional;
use oulab::glm::{Family, GlmModel};
use oulab::{AlgoConfig, Error, Result};

use crate::data::{synth_data, SynthSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Simulate,
    Compare,
    RateStudy,
    OuVerify,
    Metrics,
    Bounds,
    VarAvg,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Simulate => "simulate",
            StudyKind::Compare => "compare",
            StudyKind::RateStudy => "rate-study",
            StudyKind::OuVerify => "ou-verify",
            StudyKind::Metrics => "metrics",
            StudyKind::Bounds => "bounds",
            StudyKind::VarAvg => "var-avg",
        }
    }
}

/// Which process a `simulate` run writes out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessKind {
    Sgld,
    Linearized,
    Ou,
}

impl ProcessKind {
    pub fn name(self) -> &'static str {
        match self {
            ProcessKind::Sgld => "sgld",
            ProcessKind::Linearized => "linearized",
            ProcessKind::Ou => "ou",
        }
    }
}

/// Where the dataset came from, kept for the manifest echo.
#[derive(Debug, Clone)]
pub enum ModelSource {
    Synthetic(SynthSpec),
    File(String),
}

/// A dataset together with its provenance.
#[derive(Debug, Clone)]
pub struct ModelHandle {
    pub source: ModelSource,
    pub model: GlmModel,
}

/// Study-specific knobs after validation. `Option` fields are resolved by
/// the study runner (they need the fitted model) and echoed resolved.
#[derive(Debug, Clone)]
pub enum StudyParams {
    Simulate {
        process: ProcessKind,
    },
    Compare,
    RateStudy {
        c1: f64,
        c2: f64,
        c3: f64,
        b: usize,
        h_grid: Vec<f64>,
        /// Temperature scaling per point: `beta_inv = beta_scale * h`.
        beta_scale: f64,
    },
    OuVerify {
        mr_grid: Vec<f64>,
        diff_grid: Vec<f64>,
        p_grid: Vec<f64>,
        grid_size: usize,
        gamma: Option<f64>,
    },
    Metrics {
        eps_grid: Vec<f64>,
        /// Dictionary entries in their textual form, e.g. `clip:1`.
        dictionary: Vec<String>,
        r_order: Option<f64>,
    },
    Bounds {
        k1: Option<f64>,
        k3: Option<f64>,
        c_num: Option<f64>,
        c_bar: Option<f64>,
        calib: f64,
    },
    VarAvg {
        eps: Option<f64>,
        panels: usize,
    },
}

/// A fully resolved experiment: everything a study runner needs.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub study: StudyKind,
    pub master_seed: u64,
    pub replicates: usize,
    pub model: Option<ModelHandle>,
    pub algo: Option<AlgoConfig>,
    pub params: StudyParams,
}

/// Key/value store with removal semantics: whatever is left at the end is an
/// unknown key and rejected.
struct Keys {
    map: BTreeMap<String, String>,
}

impl Keys {
    fn from_text(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{line}`", idx + 1))
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(Error::Config(format!("line {}: empty key or value", idx + 1)));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!("duplicate key `{k}`")));
            }
        }
        Ok(Keys { map })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<String> {
        self.take(key).ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key).map(|v| parse_f64(key, &v)).transpose()
    }

    fn req_f64(&mut self, key: &str) -> Result<f64> {
        parse_f64(key, &self.require(key)?)
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        self.take(key).map(|v| parse_usize(key, &v)).transpose()
    }

    fn req_usize(&mut self, key: &str) -> Result<usize> {
        parse_usize(key, &self.require(key)?)
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        Ok(self.usize(key)?.unwrap_or(default))
    }

    fn u64_or(&mut self, key: &str, default: u64) -> Result<u64> {
        self.take(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| Error::Config(format!("key `{key}`: invalid integer `{v}`")))
            })
            .transpose()
            .map(|o| o.unwrap_or(default))
    }

    fn f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        self.take(key)
            .map(|v| {
                v.split(',')
                    .map(|p| parse_f64(key, p.trim()))
                    .collect::<Result<Vec<f64>>>()
            })
            .transpose()
    }

    fn str_list(&mut self, key: &str) -> Option<Vec<String>> {
        self.take(key)
            .map(|v| v.split(',').map(|p| p.trim().to_string()).collect())
    }

    fn finish(self) -> Result<()> {
        if self.map.is_empty() {
            return Ok(());
        }
        let names: Vec<&str> = self.map.keys().map(|s| s.as_str()).collect();
        Err(Error::Config(format!("unknown keys: {}", names.join(", "))))
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::Config(format!("key `{key}`: invalid number `{v}`")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| Error::Config(format!("key `{key}`: invalid integer `{v}`")))
}

fn parse_family(v: &str) -> Result<Family> {
    match v {
        "linear" => Ok(Family::Linear),
        "logistic" => Ok(Family::Logistic),
        "poisson" => Ok(Family::Poisson),
        other => Err(Error::Config(format!("unknown family `{other}`"))),
    }
}

/// Parses a dictionary entry: `g1`, `g2`, `clip:<c>` or `eval:<t>:<c>`.
pub fn parse_functional(spec: &str) -> Result<PathFunctional> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["g1"] => Ok(PathFunctional::iterate_average()),
        ["g2"] => Ok(PathFunctional::squared_average()),
        ["clip", c] => Ok(PathFunctional::clipped_sup(parse_f64(spec, c)?)),
        ["eval", t, c] => Ok(PathFunctional::eval_clip(parse_f64(spec, t)?, parse_f64(spec, c)?)),
        _ => Err(Error::Config(format!(
            "unknown functional `{spec}` (expected g1, g2, clip:<c> or eval:<t>:<c>)"
        ))),
    }
}

fn parse_model(keys: &mut Keys) -> Result<ModelHandle> {
    let kind = keys.take("model").unwrap_or_else(|| "synthetic".into());
    match kind.as_str() {
        "file" => {
            let path = keys.require("model_file")?;
            let text = fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("model_file `{path}`: {e}")))?;
            let model = GlmModel::parse(&text)?;
            Ok(ModelHandle { source: ModelSource::File(path), model })
        }
        "synthetic" => {
            let family = parse_family(&keys.require("family")?)?;
            let mut theta_domain = keys
                .take("theta_domain")
                .map(|v| parse_pair("theta_domain", &v))
                .transpose()?;
            if theta_domain.is_none() && family == Family::Poisson {
                theta_domain = Some((-2.0, 2.0));
            }
            let spec = SynthSpec {
                family,
                n: keys.req_usize("n")?,
                cov_c: keys.f64_or("cov_c", 1.0)?,
                theta_star: keys.f64_or("theta_star", 1.0)?,
                intercept: keys.f64_or("intercept", 0.0)?,
                noise: keys.f64_or("noise", 0.5)?,
                theta_domain,
                data_seed: keys.u64_or("data_seed", 1)?,
            };
            let model = synth_data(&spec)?;
            Ok(ModelHandle { source: ModelSource::Synthetic(spec), model })
        }
        other => Err(Error::Config(format!("unknown model source `{other}`"))),
    }
}

fn parse_pair(key: &str, v: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(Error::Config(format!("key `{key}`: expected `lo,hi`, got `{v}`")));
    }
    Ok((parse_f64(key, parts[0])?, parse_f64(key, parts[1])?))
}

/// When a preset-derived quantity is also present as an explicit key (the
/// manifest echoes it), it must agree exactly with the recomputed value.
fn check_echo_f64(keys: &mut Keys, key: &str, expected: f64) -> Result<()> {
    if let Some(v) = keys.f64(key)? {
        if v != expected {
            return Err(Error::Config(format!(
                "key `{key}` = {v} does not match the preset-derived value {expected}"
            )));
        }
    }
    Ok(())
}

fn check_echo_usize(keys: &mut Keys, key: &str, expected: usize) -> Result<()> {
    if let Some(v) = keys.usize(key)? {
        if v != expected {
            return Err(Error::Config(format!(
                "key `{key}` = {v} does not match the preset-derived value {expected}"
            )));
        }
    }
    Ok(())
}

fn parse_algo(keys: &mut Keys, seed: u64, n_data: usize) -> Result<AlgoConfig> {
    let setting = keys.take("setting").unwrap_or_else(|| "raw".into());
    match setting.as_str() {
        "raw" => AlgoConfig::raw(
            keys.req_f64("h")?,
            keys.req_usize("b")?,
            keys.f64_or("beta_inv", 0.0)?,
            keys.req_usize("alpha")?,
            keys.req_f64("w")?,
            seed,
        ),
        "statistical" => {
            let cfg = AlgoConfig::statistical(
                keys.req_f64("w1")?,
                keys.req_f64("w2")?,
                keys.require("m")?.parse::<u32>().map_err(|_| {
                    Error::Config("key `m`: invalid integer".into())
                })?,
                n_data,
                keys.req_usize("b")?,
                seed,
            )?;
            check_echo_f64(keys, "h", cfg.h)?;
            check_echo_f64(keys, "beta_inv", cfg.beta_inv)?;
            check_echo_f64(keys, "w", cfg.w)?;
            check_echo_usize(keys, "alpha", cfg.alpha)?;
            Ok(cfg)
        }
        "numerical" => {
            let cfg = AlgoConfig::numerical(
                keys.req_f64("c1")?,
                keys.req_f64("c2")?,
                keys.req_f64("c3")?,
                keys.req_f64("h")?,
                keys.req_usize("b")?,
                keys.f64_or("beta_inv", 0.0)?,
                seed,
            )?;
            check_echo_f64(keys, "w", cfg.w)?;
            check_echo_usize(keys, "alpha", cfg.alpha)?;
            Ok(cfg)
        }
        other => Err(Error::Config(format!("unknown setting `{other}`"))),
    }
}

impl Experiment {
    /// Parses a config file for a given subcommand. `seed_override` replaces
    /// the file's `master_seed` before anything downstream is derived.
    pub fn from_text(study: StudyKind, text: &str, seed_override: Option<u64>) -> Result<Self> {
        let mut keys = Keys::from_text(text)?;

        if let Some(s) = keys.take("study") {
            if s != study.name() {
                return Err(Error::Config(format!(
                    "config is for study `{s}` but the subcommand is `{}`",
                    study.name()
                )));
            }
        }
        let mut master_seed = keys.u64_or("master_seed", 1)?;
        if let Some(s) = seed_override {
            master_seed = s;
        }

        let needs_model = !matches!(study, StudyKind::OuVerify);
        let needs_algo = !matches!(study, StudyKind::OuVerify | StudyKind::RateStudy);

        let model = if needs_model { Some(parse_model(&mut keys)?) } else { None };
        let algo = if needs_algo {
            let n = model.as_ref().map(|m| m.model.n()).unwrap_or(0);
            Some(parse_algo(&mut keys, master_seed, n)?)
        } else {
            None
        };

        let default_reps = if study == StudyKind::Bounds { 2000 } else { 1000 };
        let replicates = keys.usize_or("replicates", default_reps)?;
        if replicates == 0 {
            return Err(Error::Config("replicates must be positive".into()));
        }

        let params = match study {
            StudyKind::Simulate => {
                let p = match keys.take("process").as_deref() {
                    None | Some("sgld") => ProcessKind::Sgld,
                    Some("linearized") => ProcessKind::Linearized,
                    Some("ou") => ProcessKind::Ou,
                    Some(other) => {
                        return Err(Error::Config(format!("unknown process `{other}`")))
                    }
                };
                StudyParams::Simulate { process: p }
            }
            StudyKind::Compare => StudyParams::Compare,
            StudyKind::RateStudy => {
                if let Some(s) = keys.take("setting") {
                    if s != "numerical" {
                        return Err(Error::Config(
                            "rate-study only supports setting = numerical".into(),
                        ));
                    }
                }
                let h_grid = keys
                    .f64_list("h_grid")?
                    .ok_or_else(|| Error::Config("missing required key `h_grid`".into()))?;
                if h_grid.is_empty() || h_grid.windows(2).any(|p| p[1] >= p[0]) {
                    return Err(Error::Config("h_grid must be strictly decreasing".into()));
                }
                if h_grid.iter().any(|&h| !(h.is_finite() && h > 0.0)) {
                    return Err(Error::Config("h_grid entries must be positive".into()));
                }
                StudyParams::RateStudy {
                    c1: keys.f64_or("c1", 1.0)?,
                    c2: keys.f64_or("c2", 1.0)?,
                    c3: keys.f64_or("c3", 1.0)?,
                    b: keys.usize_or("b", 1)?,
                    h_grid,
                    beta_scale: keys.f64_or("beta_scale", 1.0)?,
                }
            }
            StudyKind::OuVerify => StudyParams::OuVerify {
                mr_grid: keys.f64_list("mr_grid")?.unwrap_or_else(|| vec![0.5, 1.0, 2.0, 4.0]),
                diff_grid: keys.f64_list("diff_grid")?.unwrap_or_else(|| vec![0.5, 2.0]),
                p_grid: keys.f64_list("p_grid")?.unwrap_or_else(|| vec![1.0, 2.0, 3.0]),
                grid_size: keys.usize_or("grid_size", 64)?,
                gamma: keys.f64("gamma")?,
            },
            StudyKind::Metrics => {
                let dictionary = keys.str_list("dictionary").unwrap_or_else(|| {
                    ["clip:1", "eval:0.25:1", "eval:0.5:1", "eval:0.75:1", "eval:1:1"]
                        .map(String::from)
                        .to_vec()
                });
                for entry in &dictionary {
                    parse_functional(entry)?;
                }
                StudyParams::Metrics {
                    eps_grid: keys
                        .f64_list("eps_grid")?
                        .unwrap_or_else(|| vec![0.025, 0.05, 0.1, 0.2, 0.4, 0.8]),
                    dictionary,
                    r_order: keys.f64("r_order")?,
                }
            }
            StudyKind::Bounds => StudyParams::Bounds {
                k1: keys.f64("k1")?,
                k3: keys.f64("k3")?,
                c_num: keys.f64("c_num")?,
                c_bar: keys.f64("c_bar")?,
                calib: keys.f64_or("calib", 1.0)?,
            },
            StudyKind::VarAvg => StudyParams::VarAvg {
                eps: keys.f64("eps")?,
                panels: keys.usize_or("panels", 512)?,
            },
        };

        keys.finish()?;
        Ok(Experiment { study, master_seed, replicates, model, algo, params })
    }

    /// Renders the fully resolved configuration back into the file format.
    /// `params` is passed separately so runners can echo values they
    /// resolved themselves (estimated constants, default thresholds).
    pub fn manifest(&self, params: &StudyParams) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("study", self.study.name().into());
        put("master_seed", self.master_seed.to_string());
        put("replicates", self.replicates.to_string());

        if let Some(handle) = &self.model {
            match &handle.source {
                ModelSource::Synthetic(spec) => {
                    put("model", "synthetic".into());
                    put("family", spec.family.name().into());
                    put("n", spec.n.to_string());
                    put("cov_c", spec.cov_c.to_string());
                    put("theta_star", spec.theta_star.to_string());
                    put("intercept", spec.intercept.to_string());
                    put("noise", spec.noise.to_string());
                    put("data_seed", spec.data_seed.to_string());
                    if let Some((lo, hi)) = spec.theta_domain {
                        put("theta_domain", format!("{lo},{hi}"));
                    }
                }
                ModelSource::File(path) => {
                    put("model", "file".into());
                    put("model_file", path.clone());
                }
            }
        }

        if let Some(cfg) = &self.algo {
            match cfg.setting {
                Setting::Raw => {
                    put("setting", "raw".into());
                    put("h", cfg.h.to_string());
                    put("b", cfg.b.to_string());
                    put("beta_inv", cfg.beta_inv.to_string());
                    put("alpha", cfg.alpha.to_string());
                    put("w", cfg.w.to_string());
                }
                Setting::Statistical { w1, w2, m, .. } => {
                    put("setting", "statistical".into());
                    put("w1", w1.to_string());
                    put("w2", w2.to_string());
                    put("m", m.to_string());
                    put("b", cfg.b.to_string());
                    put("h", cfg.h.to_string());
                    put("beta_inv", cfg.beta_inv.to_string());
                    put("alpha", cfg.alpha.to_string());
                    put("w", cfg.w.to_string());
                }
                Setting::Numerical { c1, c2, c3 } => {
                    put("setting", "numerical".into());
                    put("c1", c1.to_string());
                    put("c2", c2.to_string());
                    put("c3", c3.to_string());
                    put("h", cfg.h.to_string());
                    put("b", cfg.b.to_string());
                    put("beta_inv", cfg.beta_inv.to_string());
                    put("alpha", cfg.alpha.to_string());
                    put("w", cfg.w.to_string());
                }
            }
        }

        match params {
            StudyParams::Simulate { process } => put("process", process.name().into()),
            StudyParams::Compare => {}
            StudyParams::RateStudy { c1, c2, c3, b, h_grid, beta_scale } => {
                put("c1", c1.to_string());
                put("c2", c2.to_string());
                put("c3", c3.to_string());
                put("b", b.to_string());
                put("h_grid", join_f64(h_grid));
                put("beta_scale", beta_scale.to_string());
            }
            StudyParams::OuVerify { mr_grid, diff_grid, p_grid, grid_size, gamma } => {
                put("mr_grid", join_f64(mr_grid));
                put("diff_grid", join_f64(diff_grid));
                put("p_grid", join_f64(p_grid));
                put("grid_size", grid_size.to_string());
                if let Some(g) = gamma {
                    put("gamma", g.to_string());
                }
            }
            StudyParams::Metrics { eps_grid, dictionary, r_order } => {
                put("eps_grid", join_f64(eps_grid));
                put("dictionary", dictionary.join(","));
                if let Some(r) = r_order {
                    put("r_order", r.to_string());
                }
            }
            StudyParams::Bounds { k1, k3, c_num, c_bar, calib } => {
                if let Some(v) = k1 {
                    put("k1", v.to_string());
                }
                if let Some(v) = k3 {
                    put("k3", v.to_string());
                }
                if let Some(v) = c_num {
                    put("c_num", v.to_string());
                }
                if let Some(v) = c_bar {
                    put("c_bar", v.to_string());
                }
                put("calib", calib.to_string());
            }
            StudyParams::VarAvg { eps, panels } => {
                if let Some(v) = eps {
                    put("eps", v.to_string());
                }
                put("panels", panels.to_string());
            }
        }
        out
    }
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}
