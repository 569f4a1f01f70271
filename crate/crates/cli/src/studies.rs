//! Study runners. Each takes a resolved [`Experiment`], writes its CSV
//! artifacts plus a rerunnable `manifest.txt` into the output directory, and
//! prints a short summary. All randomness flows through the master seed, so
//! outputs are byte-identical across reruns and thread counts.

use std::fs;
use std::path::Path;

use oulab::assumptions::{check_assumptions, check_assumptions_with};
use oulab::bounds::{
    eps_components, explain as explain_bound, general_simplified_bound, iterate_average_bound,
    metric_rate_exponents, simplified_rate, BoundInputs,
};
use oulab::config::Setting;
use oulab::ensemble::{format_float, PathEnsemble};
use oulab::functionals::{
    bounded_wasserstein_lower, functional_gap, levy_prokhorov_estimate, variance_gap,
    DistanceEstimate, PathFunctional,
};
use oulab::glm::{model_constants, ModelConstants};
use oulab::ou::{
    average_variance_exact, limit_params, maximal_inequality_experiment, ou_ensemble, MaxIneqSpec,
    QKind,
};
use oulab::rng::derive_seed;
use oulab::sgld::{make_ensemble, stream_ensemble, Process};
use oulab::stats::{fit_line, Moments};
use oulab::{AlgoConfig, Error, Result};

use crate::config::{
    parse_functional, Experiment, ModelHandle, ProcessKind, StudyKind, StudyParams,
};
use crate::plot;

/// Stream tag for per-point seeds in the rate study.
pub const STREAM_RATE: u64 = 0x5254;
/// Stream tag for per-cell seeds in the maximal-inequality sweep.
pub const STREAM_CELL: u64 = 0x4d49;

/// Reads a config file, runs the study on a dedicated thread pool, and
/// writes everything under `out_dir`.
pub fn run(
    study: StudyKind,
    config_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
    threads: usize,
    explain: bool,
) -> Result<()> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| Error::Config(format!("config `{}`: {e}", config_path.display())))?;
    let exp = Experiment::from_text(study, &text, seed_override)?;
    fs::create_dir_all(out_dir)
        .map_err(|e| Error::Config(format!("output dir `{}`: {e}", out_dir.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&exp, out_dir, explain))
}

fn dispatch(exp: &Experiment, out: &Path, explain: bool) -> Result<()> {
    match exp.study {
        StudyKind::Simulate => run_simulate(exp, out),
        StudyKind::Compare => run_compare(exp, out),
        StudyKind::RateStudy => run_rate_study(exp, out),
        StudyKind::OuVerify => run_ou_verify(exp, out),
        StudyKind::Metrics => run_metrics(exp, out),
        StudyKind::Bounds => run_bounds(exp, out, explain),
        StudyKind::VarAvg => run_var_avg(exp, out),
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::Config(format!("write `{}`: {e}", path.display())))
}

fn write_manifest(exp: &Experiment, params: &StudyParams, out: &Path) -> Result<()> {
    write_file(&out.join("manifest.txt"), &exp.manifest(params))
}

fn model_of(exp: &Experiment) -> &ModelHandle {
    exp.model.as_ref().expect("study requires a model")
}

fn algo_of(exp: &Experiment) -> &AlgoConfig {
    exp.algo.as_ref().expect("study requires an algorithm configuration")
}

/// Builds the rescaled iterate ensemble `Y` for the configured model.
fn sgld_ensemble(
    handle: &ModelHandle,
    consts: &ModelConstants,
    cfg: &AlgoConfig,
    r: usize,
) -> Result<PathEnsemble> {
    make_ensemble(Process::Sgld { model: &handle.model, consts }, cfg, r, "sgld")
}

fn run_simulate(exp: &Experiment, out: &Path) -> Result<()> {
    let StudyParams::Simulate { process } = &exp.params else { unreachable!() };
    let handle = model_of(exp);
    let cfg = algo_of(exp);
    let consts = model_constants(&handle.model)?;
    let ens = match process {
        ProcessKind::Sgld => sgld_ensemble(handle, &consts, cfg, exp.replicates)?,
        ProcessKind::Linearized => make_ensemble(
            Process::Linearized { consts: &consts },
            cfg,
            exp.replicates,
            "linearized",
        )?,
        ProcessKind::Ou => ou_ensemble(
            &limit_params(&consts, cfg),
            cfg.alpha,
            exp.replicates,
            cfg.master_seed,
            "limit",
        ),
    };
    write_file(&out.join("ensemble.csv"), &ens.to_csv())?;
    write_file(&out.join("ensemble_meta.txt"), &ens.metadata(cfg.h, cfg.b, cfg.beta_inv))?;
    write_manifest(exp, &exp.params, out)?;
    println!(
        "simulate: {} replicates of `{}` on {} grid points -> {}",
        exp.replicates,
        process.name(),
        cfg.alpha + 1,
        out.display()
    );
    Ok(())
}

fn run_compare(exp: &Experiment, out: &Path) -> Result<()> {
    let handle = model_of(exp);
    let cfg = algo_of(exp);
    let consts = model_constants(&handle.model)?;
    let y = sgld_ensemble(handle, &consts, cfg, exp.replicates)?;
    let z = ou_ensemble(&limit_params(&consts, cfg), cfg.alpha, exp.replicates, cfg.master_seed, "limit");

    let mut csv = format!("{}\n", DistanceEstimate::csv_header());
    for g in [PathFunctional::iterate_average(), PathFunctional::squared_average()] {
        let d = functional_gap(&y, &z, &g)?;
        println!(
            "compare[{}]: gap = {:.6e} (se {:.6e}, R = {})",
            g.name(),
            d.value,
            d.dispersion.value(),
            d.replicates
        );
        csv.push_str(&d.csv_row());
        csv.push('\n');
    }
    write_file(&out.join("compare.csv"), &csv)?;
    write_manifest(exp, &exp.params, out)
}

const RATE_HEADER: &str = "h,alpha,gap_g2,gap_se,var_y,var_y_se,var_z,mean_y,mean_y_se,mean_rhs";

fn run_rate_study(exp: &Experiment, out: &Path) -> Result<()> {
    let StudyParams::RateStudy { c1, c2, c3, b, h_grid, beta_scale } = &exp.params else {
        unreachable!()
    };
    let handle = model_of(exp);
    let consts = model_constants(&handle.model)?;
    let g1 = PathFunctional::iterate_average();
    let g2 = PathFunctional::squared_average();

    let mut csv = format!("{RATE_HEADER}\n");
    let mut log_pts = Vec::with_capacity(h_grid.len());
    for (i, &h) in h_grid.iter().enumerate() {
        let seed_i = derive_seed(exp.master_seed, STREAM_RATE, i as u64);
        let cfg_i = AlgoConfig::numerical(*c1, *c2, *c3, h, *b, beta_scale * h, seed_i)?;
        let proc = Process::Sgld { model: &handle.model, consts: &consts };

        // identical seeds => both passes see the same paths, so g1 and g2
        // are evaluated on one ensemble without materializing it
        let s1 = stream_ensemble(proc, &cfg_i, exp.replicates, |p| g1.evaluate(p))?;
        let s2 = stream_ensemble(proc, &cfg_i, exp.replicates, |p| g2.evaluate(p))?;
        let pz = limit_params(&consts, &cfg_i);

        // the limit side needs no sampling: E g2(Z) is the variance of the
        // averaged limit process, known in closed form, so the only Monte
        // Carlo noise in the gap comes from the iterate ensemble
        let (my1, my2) = (Moments::of(&s1.g_values), Moments::of(&s2.g_values));
        let var_z = average_variance_exact(&pz);
        let norm = g2.m_norm_bound();
        let gap = (my2.mean - var_z).abs() / norm;
        let gap_se = my2.se_mean() / norm;

        let report = check_assumptions(&consts, &cfg_i);
        let inputs = BoundInputs::from_model(&consts, &cfg_i, report.k1_hat, report.k3_hat)?;
        let mean_rhs = iterate_average_bound(0.0, 0.0, &inputs).mean_rhs;

        println!(
            "rate[{i}]: h = {h:.6}, alpha = {}, gap_g2 = {:.4e} (se {:.4e}), var gap = {:.4e}",
            cfg_i.alpha,
            gap,
            gap_se,
            (my1.var - var_z).abs()
        );
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            format_float(h),
            cfg_i.alpha,
            format_float(gap),
            format_float(gap_se),
            format_float(my1.var),
            format_float(my1.se_var()),
            format_float(var_z),
            format_float(my1.mean),
            format_float(my1.se_mean()),
            format_float(mean_rhs)
        ));
        log_pts.push((h.ln(), gap.ln()));
    }
    write_file(&out.join("rate_points.csv"), &csv)?;

    let lx: Vec<f64> = log_pts.iter().map(|p| p.0).collect();
    let ly: Vec<f64> = log_pts.iter().map(|p| p.1).collect();
    let fit = fit_line(&lx, &ly);
    write_file(
        &out.join("rate_summary.csv"),
        &format!(
            "slope,slope_se,intercept,points\n{},{},{},{}\n",
            format_float(fit.slope),
            format_float(fit.slope_se),
            format_float(fit.intercept),
            log_pts.len()
        ),
    )?;
    plot::scatter_with_fit(&log_pts, fit.slope, fit.intercept, &out.join("rate.png"))?;
    write_manifest(exp, &exp.params, out)?;
    println!(
        "rate-study: slope = {:.4} (se {:.4}) over {} step sizes",
        fit.slope,
        fit.slope_se,
        log_pts.len()
    );
    Ok(())
}

const MAX_INEQ_HEADER: &str =
    "mean_reversion,diffusion_sq,p,gamma,lhs_mc,rhs_no_cp,implied_cp,stderr";

fn run_ou_verify(exp: &Experiment, out: &Path) -> Result<()> {
    let StudyParams::OuVerify { mr_grid, diff_grid, p_grid, grid_size, gamma } = &exp.params
    else {
        unreachable!()
    };
    let mut csv = format!("{MAX_INEQ_HEADER}\n");
    let mut idx = 0u64;
    let (mut cp_lo, mut cp_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &a in mr_grid {
        for &q in diff_grid {
            for &p in p_grid {
                let g = gamma.unwrap_or_else(|| MaxIneqSpec::default_gamma(a, q));
                let spec = MaxIneqSpec {
                    mean_reversion: a,
                    q_kind: QKind::ConstCoeff { diffusion_sq: q },
                    gamma: g,
                    p,
                    grid_size: *grid_size,
                    replicates: exp.replicates,
                };
                let res =
                    maximal_inequality_experiment(&spec, derive_seed(exp.master_seed, STREAM_CELL, idx))?;
                cp_lo = cp_lo.min(res.implied_cp);
                cp_hi = cp_hi.max(res.implied_cp);
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    format_float(a),
                    format_float(q),
                    format_float(p),
                    format_float(g),
                    format_float(res.lhs_mc),
                    format_float(res.rhs_no_cp),
                    format_float(res.implied_cp),
                    format_float(res.stderr)
                ));
                idx += 1;
            }
        }
    }
    write_file(&out.join("max_ineq.csv"), &csv)?;
    write_manifest(exp, &exp.params, out)?;
    println!(
        "ou-verify: {idx} cells, implied constant in [{:.4}, {:.4}]",
        cp_lo, cp_hi
    );
    Ok(())
}

fn run_metrics(exp: &Experiment, out: &Path) -> Result<()> {
    let StudyParams::Metrics { eps_grid, dictionary, r_order } = &exp.params else {
        unreachable!()
    };
    let handle = model_of(exp);
    let cfg = algo_of(exp);
    let consts = model_constants(&handle.model)?;
    let y = sgld_ensemble(handle, &consts, cfg, exp.replicates)?;
    let z = ou_ensemble(&limit_params(&consts, cfg), cfg.alpha, exp.replicates, cfg.master_seed, "limit");

    let dict: Vec<PathFunctional> =
        dictionary.iter().map(|s| parse_functional(s)).collect::<Result<_>>()?;
    let lp = levy_prokhorov_estimate(&y, &z, eps_grid)?;
    let bw = bounded_wasserstein_lower(&y, &z, &dict)?;
    println!(
        "metrics: LP <= {:.6e} (resolution {:.2e}{}), BW >= {:.6e} (se {:.2e})",
        lp.value,
        lp.dispersion.value(),
        if lp.censored { ", censored at grid edge" } else { "" },
        bw.value,
        bw.dispersion.value()
    );
    let mut csv = format!("{}\n{}\n{}\n", DistanceEstimate::csv_header(), lp.csv_row(), bw.csv_row());
    csv.pop(); // single trailing newline
    csv.push('\n');
    write_file(&out.join("metrics.csv"), &csv)?;

    if let Some(r) = r_order {
        let e = metric_rate_exponents(*r)?;
        write_file(
            &out.join("exponents.csv"),
            &format!(
                "r,lp_exponent,lp_vacuous,bw_exponent,bw_vacuous\n{},{},{},{},{}\n",
                format_float(*r),
                format_float(e.lp),
                e.lp_vacuous,
                format_float(e.bw),
                e.bw_vacuous
            ),
        )?;
    }
    write_manifest(exp, &exp.params, out)
}

fn run_bounds(exp: &Experiment, out: &Path, explain: bool) -> Result<()> {
    let StudyParams::Bounds { k1, k3, c_num, c_bar, calib } = &exp.params else { unreachable!() };
    let handle = model_of(exp);
    let cfg = algo_of(exp);
    let consts = model_constants(&handle.model)?;

    let (k1v, k3v) = match (k1, k3) {
        (Some(a), Some(b)) => (*a, *b),
        _ => {
            let rep = check_assumptions_with(&consts, cfg, exp.replicates);
            (k1.unwrap_or(rep.k1_hat), k3.unwrap_or(rep.k3_hat))
        }
    };
    let mut inputs = BoundInputs::from_model(&consts, cfg, k1v, k3v)?;
    if let Some(v) = c_num {
        inputs.c_num = *v;
    }
    if let Some(v) = c_bar {
        inputs.c_bar = *v;
    }
    inputs.validate()?;

    let bd = eps_components(&inputs)?;
    write_file(
        &out.join("bounds.csv"),
        &format!("{}\n{}\n", oulab::bounds::BoundBreakdown::csv_header(), bd.csv_row(&inputs)),
    )?;
    println!(
        "bounds: total = {:.6e} (eps_r {:.3e}, eps_z {:.3e}, eps_rem {:.3e}, eps_exch {:.3e}, eps_cov {:.3e})",
        bd.total, bd.eps_r, bd.eps_z, bd.eps_rem, bd.eps_exch, bd.eps_cov
    );
    if inputs.alpha as f64 * inputs.h <= inputs.c_bar {
        println!("bounds: coarse one-line bound = {:.6e}", general_simplified_bound(&inputs)?);
    }
    if !matches!(cfg.setting, Setting::Raw) {
        println!(
            "bounds: simplified rate for this setting = {:.6e}",
            simplified_rate(&cfg.setting, &inputs, *calib)?
        );
    }
    if bd.sigma_degenerate {
        println!("bounds: note: sigma_info = 0, log-coupling terms use their analytic limit");
    }
    if explain {
        for group in explain_bound(&inputs)? {
            println!("[{}] = {:.6e}", group.name, group.sum());
            for (label, v) in &group.terms {
                println!("    {label} = {v:.6e}");
            }
        }
    }
    let resolved = StudyParams::Bounds {
        k1: Some(k1v),
        k3: Some(k3v),
        c_num: Some(inputs.c_num),
        c_bar: Some(inputs.c_bar),
        calib: *calib,
    };
    write_manifest(exp, &resolved, out)
}

const VAR_AVG_HEADER: &str =
    "var_y,var_y_se,var_z_analytic,gap,rhs_bound,mean_y,mean_y_se,eps,panels";

fn run_var_avg(exp: &Experiment, out: &Path) -> Result<()> {
    let StudyParams::VarAvg { eps, panels } = &exp.params else { unreachable!() };
    let handle = model_of(exp);
    let cfg = algo_of(exp);
    let consts = model_constants(&handle.model)?;

    let eps_v = match eps {
        Some(v) => *v,
        None => {
            let inputs = BoundInputs::from_model_estimated(&consts, cfg)?;
            eps_components(&inputs)?.total
        }
    };
    let ens = sgld_ensemble(handle, &consts, cfg, exp.replicates)?;
    let pz = limit_params(&consts, cfg);
    let rep = variance_gap(&ens, &pz, eps_v, *panels)?;

    write_file(
        &out.join("var_avg.csv"),
        &format!(
            "{VAR_AVG_HEADER}\n{},{},{},{},{},{},{},{},{}\n",
            format_float(rep.var_y),
            format_float(rep.var_y_se),
            format_float(rep.var_z_analytic),
            format_float(rep.gap),
            format_float(rep.rhs_bound),
            format_float(rep.mean_y),
            format_float(rep.mean_y_se),
            format_float(eps_v),
            panels
        ),
    )?;
    println!(
        "var-avg: |Var - Var_limit| = {:.6e} vs bound {:.6e}; mean = {:.4e} (se {:.2e})",
        rep.gap, rep.rhs_bound, rep.mean_y, rep.mean_y_se
    );
    let resolved = StudyParams::VarAvg { eps: Some(eps_v), panels: *panels };
    write_manifest(exp, &resolved, out)
}
