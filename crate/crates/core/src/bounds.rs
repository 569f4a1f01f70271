//! Closed-form evaluators for the path-coupling error bounds: the five
//! epsilon components with their D/E constants, the coarse one-line bound,
//! the per-setting rates, the OU-to-OU comparison, the metric-rate exponents,
//! and the iterate-average mean/variance bounds.
//!
//! Every absorbed universal constant is funneled into a single caller-visible
//! `c_num` prefactor (default 1), so these functions report bound *shapes*;
//! the testable claim is how the values move over parameter grids, not
//! absolute dominance.
//!
//! Term labels use short symbol names: `h` step size, `b` batch size, `bi`
//! inverse temperature, `al` steps per unit time, `w` space scale, `om` mean
//! squared gradient noise, `sig` mean curvature, `p4`/`p6` higher noise
//! moments, `L` smoothness, `cr` curvature remainder, `K1`/`K3` iterate
//! moment constants, `log2a = ln(2*al)`.

use crate::config::{AlgoConfig, Setting};
use crate::ensemble::format_float;
use crate::error::{Error, Result};
use crate::glm::ModelConstants;

/// Every scalar the bound formulas consume, decoupled from live model state
/// so callers can evaluate bounds for hypothetical parameter combinations.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub l: f64,
    pub c_r: f64,
    pub omega: f64,
    pub sigma_info: f64,
    pub psi2: f64,
    pub psi4: f64,
    pub psi6: f64,
    pub h: f64,
    pub b: usize,
    pub beta_inv: f64,
    pub alpha: usize,
    pub w: f64,
    /// Second-moment growth constant of the iterates (supplied or estimated).
    pub k1: f64,
    /// Sixth-moment growth constant of the iterates.
    pub k3: f64,
    /// Stand-in for every absorbed universal constant.
    pub c_num: f64,
    /// Cap on `alpha * h` assumed by the coarse bound.
    pub c_bar: f64,
}

impl BoundInputs {
    /// Assembles inputs from fitted model constants and a run configuration,
    /// with `c_num = 1` and the cap set to the configuration's own `alpha*h`.
    pub fn from_model(
        constants: &ModelConstants,
        config: &AlgoConfig,
        k1: f64,
        k3: f64,
    ) -> Result<Self> {
        let inputs = BoundInputs {
            l: constants.l,
            c_r: constants.c_r,
            omega: constants.omega,
            sigma_info: constants.sigma_info,
            psi2: constants.psi2,
            psi4: constants.psi4,
            psi6: constants.psi6,
            h: config.h,
            b: config.b,
            beta_inv: config.beta_inv,
            alpha: config.alpha,
            w: config.w,
            k1,
            k3,
            c_num: 1.0,
            c_bar: config.alpha as f64 * config.h,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    /// As `from_model`, but estimates the iterate-moment constants by Monte
    /// Carlo on the linearized recursion.
    pub fn from_model_estimated(constants: &ModelConstants, config: &AlgoConfig) -> Result<Self> {
        let report = crate::assumptions::check_assumptions(constants, config);
        Self::from_model(constants, config, report.k1_hat, report.k3_hat)
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("l", self.l),
            ("c_r", self.c_r),
            ("omega", self.omega),
            ("sigma_info", self.sigma_info),
            ("psi2", self.psi2),
            ("psi4", self.psi4),
            ("psi6", self.psi6),
            ("h", self.h),
            ("beta_inv", self.beta_inv),
            ("w", self.w),
            ("k1", self.k1),
            ("k3", self.k3),
            ("c_num", self.c_num),
            ("c_bar", self.c_bar),
        ];
        for (name, v) in named {
            if !v.is_finite() {
                return Err(Error::OutOfRange(format!("{name} must be finite, got {v}")));
            }
        }
        for (name, v) in [
            ("c_r", self.c_r),
            ("omega", self.omega),
            ("sigma_info", self.sigma_info),
            ("psi2", self.psi2),
            ("psi4", self.psi4),
            ("psi6", self.psi6),
            ("w", self.w),
            ("k1", self.k1),
            ("k3", self.k3),
        ] {
            if v < 0.0 {
                return Err(Error::OutOfRange(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.h) {
            return Err(Error::OutOfRange(format!(
                "step size h must lie in [0, 1], got {}",
                self.h
            )));
        }
        if !(0.0..=1.0).contains(&self.beta_inv) {
            return Err(Error::OutOfRange(format!(
                "beta_inv must lie in [0, 1], got {}",
                self.beta_inv
            )));
        }
        if self.l < 1.0 {
            return Err(Error::OutOfRange(format!(
                "smoothness constant l must be >= 1, got {}",
                self.l
            )));
        }
        if self.b == 0 {
            return Err(Error::OutOfRange("batch size b must be >= 1".into()));
        }
        if self.alpha == 0 {
            return Err(Error::OutOfRange("alpha must be >= 1".into()));
        }
        if self.c_num <= 0.0 {
            return Err(Error::OutOfRange(format!(
                "c_num must be > 0, got {}",
                self.c_num
            )));
        }
        if self.c_bar <= 0.0 {
            return Err(Error::OutOfRange(format!(
                "c_bar must be > 0, got {}",
                self.c_bar
            )));
        }
        Ok(())
    }
}

/// The five epsilon components and the shared constants behind them. The
/// `total` is `c_num` times the component sum; `c_max` belongs to the coarse
/// bound but is reported alongside for one-stop serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundBreakdown {
    pub eps_r: f64,
    pub eps_z: f64,
    pub eps_rem: f64,
    pub eps_exch: f64,
    pub eps_cov: f64,
    pub d1: f64,
    pub d2: f64,
    pub e1: f64,
    pub c_max: f64,
    pub total: f64,
    /// True when `sigma_info = 0` forced the analytic limit of the log term
    /// inside `d1`/`d2`.
    pub sigma_degenerate: bool,
}

impl BoundBreakdown {
    pub fn csv_header() -> &'static str {
        "eps_r,eps_z,eps_rem,eps_exch,eps_cov,d1,d2,e1,c_max,total,sigma_degenerate,\
         l,c_r,omega,sigma_info,psi2,psi4,psi6,h,b,beta_inv,alpha,w,k1,k3,c_num,c_bar"
    }

    /// One CSV row: components first, then an echo of the inputs that
    /// produced them.
    pub fn csv_row(&self, inputs: &BoundInputs) -> String {
        let floats = [
            self.eps_r,
            self.eps_z,
            self.eps_rem,
            self.eps_exch,
            self.eps_cov,
            self.d1,
            self.d2,
            self.e1,
            self.c_max,
            self.total,
        ];
        let mut cols: Vec<String> = floats.iter().map(|v| format_float(*v)).collect();
        cols.push(self.sigma_degenerate.to_string());
        for v in [
            inputs.l,
            inputs.c_r,
            inputs.omega,
            inputs.sigma_info,
            inputs.psi2,
            inputs.psi4,
            inputs.psi6,
            inputs.h,
        ] {
            cols.push(format_float(v));
        }
        cols.push(inputs.b.to_string());
        cols.push(format_float(inputs.beta_inv));
        cols.push(inputs.alpha.to_string());
        for v in [inputs.w, inputs.k1, inputs.k3, inputs.c_num, inputs.c_bar] {
            cols.push(format_float(v));
        }
        cols.join(",")
    }
}

/// One named group of additive terms; the group's value is the sum.
#[derive(Debug, Clone)]
pub struct TermGroup {
    pub name: &'static str,
    pub terms: Vec<(&'static str, f64)>,
}

impl TermGroup {
    pub fn sum(&self) -> f64 {
        self.terms.iter().map(|t| t.1).sum()
    }
}

/// Numeric snapshot of the inputs under the short symbol names the formulas
/// are written in.
struct Sym {
    b: f64,
    al: f64,
    h: f64,
    bi: f64,
    w: f64,
    l: f64,
    om: f64,
    sig: f64,
    p4: f64,
    p6: f64,
    cr: f64,
    k1: f64,
    k3: f64,
    log2a: f64,
}

impl Sym {
    fn new(inp: &BoundInputs) -> Self {
        Sym {
            b: inp.b as f64,
            al: inp.alpha as f64,
            h: inp.h,
            bi: inp.beta_inv,
            w: inp.w,
            l: inp.l,
            om: inp.omega,
            sig: inp.sigma_info,
            p4: inp.psi4,
            p6: inp.psi6,
            cr: inp.c_r,
            k1: inp.k1,
            k3: inp.k3,
            log2a: (2.0 * inp.alpha as f64).ln(),
        }
    }

    /// Mixed sixth-order moment combination `M = om^3 + p4^(3/2) + p4*om + p6`.
    fn m_mixed(&self) -> f64 {
        self.om.powi(3) + self.p4.powf(1.5) + self.p4 * self.om + self.p6
    }
}

fn e1_of(s: &Sym) -> f64 {
    let q = s.p4 + s.om * s.om;
    q + s.om.sqrt() * (1.0 + s.l.powi(3)) * (q.powf(0.75) + 1.0)
        + s.om * s.l * (1.0 + s.l.powi(4)) * (s.om * s.al * s.h * s.h / s.b + s.al * s.h * s.bi)
}

/// Fourth-moment control constant `E1` shared by several components.
pub fn e1_constant(inp: &BoundInputs) -> f64 {
    e1_of(&Sym::new(inp))
}

fn s_terms(s: &Sym) -> Vec<(&'static str, f64)> {
    let e1 = e1_of(s);
    let (al, h, b, l, bi) = (s.al, s.h, s.b, s.l, s.bi);
    let a2h4 = al * al * h.powi(4);
    vec![
        (
            "al^2*h^4/b^2 * (al*h^2*L^2*E1/b + al^2*h^4*L^4*E1 + p4/b + om^2 + om)",
            a2h4 / (b * b)
                * (al * h * h * l * l * e1 / b
                    + a2h4 * l.powi(4) * e1
                    + s.p4 / b
                    + s.om * s.om
                    + s.om),
        ),
        (
            "al^2*h^2*bi^2 * (1 + al*h^2*L^2/b + al^2*h^4*L^4)",
            al * al * h * h * bi * bi * (1.0 + al * h * h * l * l / b + a2h4 * l.powi(4)),
        ),
        (
            "(1/b + al*h^2*L^2) * om^(1/2)*(1+L^3)*al^3*h^(11/2)*L^2*bi^(3/2)",
            (1.0 / b + al * h * h * l * l)
                * s.om.sqrt()
                * (1.0 + l.powi(3))
                * al.powi(3)
                * h.powf(5.5)
                * l
                * l
                * bi.powf(1.5),
        ),
    ]
}

fn eps_r_terms(s: &Sym) -> Vec<(&'static str, f64)> {
    let m = s.m_mixed();
    let sv: f64 = s_terms(s).iter().map(|t| t.1).sum();
    let (al, h, b, w, bi) = (s.al, s.h, s.b, s.w, s.bi);
    vec![
        (
            "w*al*K1*cr*(h^2*om/b + h*bi)",
            w * al * s.k1 * s.cr * (h * h * s.om / b + h * bi),
        ),
        (
            "w^3*al^3*cr^3*K3^3*(h^6*M/b^3 + h^3*bi^3)",
            w.powi(3)
                * al.powi(3)
                * s.cr.powi(3)
                * s.k3.powi(3)
                * (h.powi(6) * m / b.powi(3) + h.powi(3) * bi.powi(3)),
        ),
        (
            "w^3*S^(3/4) * w*al*h*cr*K3*(h*M^(1/3)/b + bi)",
            w.powi(3) * sv.powf(0.75) * w * al * h * s.cr * s.k3 * (h * m.powf(1.0 / 3.0) / b + bi),
        ),
    ]
}

fn eps_z_terms(s: &Sym) -> Vec<(&'static str, f64)> {
    let (al, h, b, w, bi, om, sig) = (s.al, s.h, s.b, s.w, s.bi, s.om, s.sig);
    let rl = s.log2a.sqrt();
    let rl3 = s.log2a.powf(1.5);
    vec![
        (
            "w*al^(1/2)*h^2*om^(1/2)*sig/b^(1/2)",
            w * al.sqrt() * h * h * om.sqrt() * sig / b.sqrt(),
        ),
        (
            "w*al^(1/2)*h^(3/2)*sig*bi^(1/2)",
            w * al.sqrt() * h.powf(1.5) * sig * bi.sqrt(),
        ),
        (
            "w*h*om^(1/2)*log2a^(1/2)/b^(1/2)",
            w * h * om.sqrt() * rl / b.sqrt(),
        ),
        (
            "w*h^(1/2)*log2a^(1/2)*bi^(1/2)",
            w * h.sqrt() * rl * bi.sqrt(),
        ),
        (
            "w*al^(3/2)*h^6*om^(3/2)*sig^3/b^(3/2)",
            w * al.powf(1.5) * h.powi(6) * om.powf(1.5) * sig.powi(3) / b.powf(1.5),
        ),
        (
            "w^3*al^(3/2)*h^(9/2)*sig^3*bi^(3/2)",
            w.powi(3) * al.powf(1.5) * h.powf(4.5) * sig.powi(3) * bi.powf(1.5),
        ),
        (
            "w^3*h^3*om^(3/2)*log2a^(3/2)/b^(3/2)",
            w.powi(3) * h.powi(3) * om.powf(1.5) * rl3 / b.powf(1.5),
        ),
        (
            "w^3*h^(3/2)*log2a^(3/2)*bi^(3/2)",
            w.powi(3) * h.powf(1.5) * rl3 * bi.powf(1.5),
        ),
        (
            "w^4*al^2*h^5*om^2*sig/b^2",
            w.powi(4) * al * al * h.powi(5) * om * om * sig / (b * b),
        ),
        (
            "w^4*al^(3/2)*h^4*om^2*log2a^(1/2)/b^2",
            w.powi(4) * al.powf(1.5) * h.powi(4) * om * om * rl / (b * b),
        ),
        (
            "w^4*al^2*h^3*sig*bi^2",
            w.powi(4) * al * al * h.powi(3) * sig * bi * bi,
        ),
        (
            "w^4*al^(3/2)*h^2*log2a^(1/2)*bi^2",
            w.powi(4) * al.powf(1.5) * h * h * rl * bi * bi,
        ),
    ]
}

/// Shared log-coupling square `(ln(1+al*h*sig)*(w^2*h*om/b + w^2*bi)/sig)^2`,
/// replaced by its `sig -> 0` limit `(al*h)^2*(w^2*h*om/b + w^2*bi)^2` when
/// the curvature is exactly zero.
fn log_coupling_sq(s: &Sym) -> (f64, bool) {
    let q = s.w * s.w * s.h * s.om / s.b + s.w * s.w * s.bi;
    if s.sig == 0.0 {
        ((s.al * s.h * q).powi(2), true)
    } else {
        let t = (s.al * s.h * s.sig).ln_1p() * q / s.sig;
        (t * t, false)
    }
}

fn d1_sq_terms(s: &Sym) -> (Vec<(&'static str, f64)>, bool) {
    let (lc, degenerate) = log_coupling_sq(s);
    let w4 = s.w.powi(4);
    let mut terms = vec![("1", 1.0)];
    for (name, v) in s_terms(s) {
        terms.push((name, w4 * v));
    }
    terms.push(("(ln(1+al*h*sig)*(w^2*h*om/b + w^2*bi)/sig)^2", lc));
    (terms, degenerate)
}

fn d2_sq_terms(s: &Sym) -> (Vec<(&'static str, f64)>, bool) {
    let (lc, degenerate) = log_coupling_sq(s);
    let (al, h, b, w, bi, l, om) = (s.al, s.h, s.b, s.w, s.bi, s.l, s.om);
    let e1 = e1_of(s);
    let lh = 1.0 - l * h;
    let terms = vec![
        ("1", 1.0),
        (
            "w^2*al*h^2/b * (om^(1/2)*L*(1+L^3)*al^(1/2)*h^(3/4)*bi^(3/4) + L^2*om*al*h^2 + om)",
            w * w * al * h * h / b
                * (om.sqrt() * l * (1.0 + l.powi(3)) * al.sqrt() * h.powf(0.75) * bi.powf(0.75)
                    + l * l * om * al * h * h
                    + om),
        ),
        (
            "w^2*al*h*bi * (al^(1/2)*h*L/b^(1/2) + 1 + L^2*al*h^2)",
            w * w * al * h * bi * (al.sqrt() * h * l / b.sqrt() + 1.0 + l * l * al * h * h),
        ),
        (
            "w^2*al^(3/2)*h^3*L*E1^(1/2)/b^(3/2)",
            w * w * al.powf(1.5) * h.powi(3) * l * e1.sqrt() / b.powf(1.5),
        ),
        (
            "w^2*(om*h^2/b + h*bi) * (1 + al^2*h^2*L^2/(1-L*h)^2)",
            {
                // The left factor vanishing kills the term even where the
                // L*h = 1 pole makes the right factor infinite.
                let q = om * h * h / b + h * bi;
                if q == 0.0 {
                    0.0
                } else {
                    w * w * q * (1.0 + al * al * h * h * l * l / (lh * lh))
                }
            },
        ),
        ("(ln(1+al*h*sig)*(w^2*h*om/b + w^2*bi)/sig)^2", lc),
    ];
    (terms, degenerate)
}

/// Square-root multipliers in front of the remainder and covariance
/// components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DConstants {
    pub d1: f64,
    pub d2: f64,
    pub sigma_degenerate: bool,
}

fn d_of(s: &Sym) -> DConstants {
    let (t1, degenerate) = d1_sq_terms(s);
    let (t2, _) = d2_sq_terms(s);
    DConstants {
        d1: t1.iter().map(|t| t.1).sum::<f64>().sqrt(),
        d2: t2.iter().map(|t| t.1).sum::<f64>().sqrt(),
        sigma_degenerate: degenerate,
    }
}

pub fn d_constants(inp: &BoundInputs) -> DConstants {
    d_of(&Sym::new(inp))
}

fn eps_rem_terms(s: &Sym, d1: f64) -> Vec<(&'static str, f64)> {
    let (al, h, b, w, bi, l, om) = (s.al, s.h, s.b, s.w, s.bi, s.l, s.om);
    vec![(
        "D1*al*w*h*L/b^(1/2) * ((1+al^2*h^2*L^2)*(h^2*om/b + h*bi))^(1/2)",
        d1 * al * w * h * l / b.sqrt()
            * ((1.0 + al * al * h * h * l * l) * (h * h * om / b + h * bi)).sqrt(),
    )]
}

fn eps_exch_terms(s: &Sym) -> Vec<(&'static str, f64)> {
    let e1 = e1_of(s);
    let (al, h, b, w, bi, l, om) = (s.al, s.h, s.b, s.w, s.bi, s.l, s.om);
    let w3 = w.powi(3);
    let a52 = al.powf(2.5);
    vec![
        (
            "w^3*L^3*al^(5/2)*h^6*E1^(3/4)/b^(3/2)",
            w3 * l.powi(3) * a52 * h.powi(6) * e1.powf(0.75) / b.powf(1.5),
        ),
        (
            "w^3*L^3*al^(5/2)*h^(9/2)*bi^(3/2)",
            w3 * l.powi(3) * a52 * h.powf(4.5) * bi.powf(1.5),
        ),
        (
            "w^3*om^(1/2)*L^3*(1+L^(9/4))*al^(5/2)*h^(45/8)*bi^(9/8)",
            w3 * om.sqrt()
                * l.powi(3)
                * (1.0 + l.powf(2.25))
                * a52
                * h.powf(45.0 / 8.0)
                * bi.powf(9.0 / 8.0),
        ),
        (
            "w^3*al*h^3*(p4+om^2)^(3/4)/b^(3/2)",
            w3 * al * h.powi(3) * (s.p4 + om * om).powf(0.75) / b.powf(1.5),
        ),
        (
            "w^3*al*h^(3/2)*bi^(3/2)",
            w3 * al * h.powf(1.5) * bi.powf(1.5),
        ),
    ]
}

fn eps_cov_terms(s: &Sym, d2: f64) -> Vec<(&'static str, f64)> {
    let (al, h, b, w, bi, l, om, sig) = (s.al, s.h, s.b, s.w, s.bi, s.l, s.om, s.sig);
    let p4 = s.p4;
    let pref = d2 * al * w * w * h * h;
    let q34 = (p4 + om * om).powf(0.75);
    vec![
        (
            "al*h^2*L^2/b * (p4 + om^2 + om^(1/2)*L^3*((p4+om^2)^(3/4)+1))^(1/2)",
            pref * al * h * h * l * l / b
                * (p4 + om * om + om.sqrt() * l.powi(3) * (q34 + 1.0)).sqrt(),
        ),
        (
            "L^(9/2)*al^(3/2)*h^3*om/b^(3/2)",
            pref * l.powf(4.5) * al.powf(1.5) * h.powi(3) * om / b.powf(1.5),
        ),
        (
            "L^(9/2)*al^(3/2)*h^(5/2)*om^(1/2)*bi^(1/2)/b",
            pref * l.powf(4.5) * al.powf(1.5) * h.powf(2.5) * om.sqrt() * bi.sqrt() / b,
        ),
        ("al*h*L^2*bi", pref * al * h * l * l * bi),
        (
            "L^(7/2)*om^(1/4)*al*h^(7/4)*bi^(3/4)",
            pref * l.powf(3.5) * om.powf(0.25) * al * h.powf(1.75) * bi.powf(0.75),
        ),
        ("al^(1/2)*h*om*L/b", pref * al.sqrt() * h * om * l / b),
        (
            "al^(1/2)*h^(1/2)*om^(1/2)*L*bi^(1/2)/b^(1/2)",
            pref * al.sqrt() * h.sqrt() * om.sqrt() * l * bi.sqrt() / b.sqrt(),
        ),
        (
            "w*h/b^(3/2) * (p4^(3/4) + om^(3/2))",
            pref * w * h / b.powf(1.5) * (p4.powf(0.75) + om.powf(1.5)),
        ),
        (
            "L*w*h^2*al*om^(3/2)/b^(3/2)",
            pref * l * w * h * h * al * om.powf(1.5) / b.powf(1.5),
        ),
        (
            "L*w*h^(3/2)*al*om*bi^(1/2)/b",
            pref * l * w * h.powf(1.5) * al * om * bi.sqrt() / b,
        ),
        ("L*al^(1/2)*h/b^(3/2)", pref * l * al.sqrt() * h / b.powf(1.5)),
        ("L^2*al*h^2/b^(3/2)", pref * l * l * al * h * h / b.powf(1.5)),
        ("h*om*sig/b", pref * h * om * sig / b),
        ("al*h^2*om*sig^2/b", pref * al * h * h * om * sig * sig / b),
        (
            "L*al^(1/2)*h^(1/2)*om^(1/2)*bi^(1/2)/b",
            pref * l * al.sqrt() * h.sqrt() * om.sqrt() * bi.sqrt() / b,
        ),
        ("L*al^(1/2)*bi/b^(1/2)", pref * l * al.sqrt() * bi / b.sqrt()),
        (
            "w*h^(1/2)*om*bi^(1/2)/b",
            pref * w * h.sqrt() * om * bi.sqrt() / b,
        ),
        ("w*om^(1/2)*bi/b^(1/2)", pref * w * om.sqrt() * bi / b.sqrt()),
        (
            "L*w*al*h^(3/2)*om*bi^(1/2)/b",
            pref * l * w * al * h.powf(1.5) * om * bi.sqrt() / b,
        ),
        (
            "L*w*al*h*om^(1/2)*bi/b^(1/2)",
            pref * l * w * al * h * om.sqrt() * bi / b.sqrt(),
        ),
        // The h^2 of the prefactor cancels against 1/h^(1/2); folding keeps
        // the value finite as h -> 0 instead of producing 0 * inf.
        (
            "w*bi^(3/2)/h^(1/2) (h powers folded)",
            d2 * al * w.powi(3) * h.powf(1.5) * bi.powf(1.5),
        ),
        (
            "L*al^(1/2)*bi/b^(1/2) (repeated)",
            pref * l * al.sqrt() * bi / b.sqrt(),
        ),
        (
            "L^2*al*h*bi/b^(1/2)",
            pref * l * l * al * h * bi / b.sqrt(),
        ),
        ("al*h*sig^2*bi", pref * al * h * sig * sig * bi),
        ("sig*bi", pref * sig * bi),
    ]
}

fn c_max_of(inp: &BoundInputs) -> f64 {
    1.0f64
        .max(inp.omega.powi(3))
        .max(inp.sigma_info.powi(3))
        .max(inp.psi6)
        .max(inp.c_bar.powf(19.0 / 4.0))
}

fn general_terms(s: &Sym) -> Vec<(&'static str, f64)> {
    let (h, b, w, bi, l) = (s.h, s.b, s.w, s.bi, s.l);
    let rl = s.log2a.sqrt();
    let rl3 = s.log2a.powf(1.5);
    vec![
        (
            "L^2*(h/b + h^(1/2)*bi^(1/2)/b^(1/2))",
            l * l * (h / b + h.sqrt() * bi.sqrt() / b.sqrt()),
        ),
        (
            "w*(1+K1*cr)*(h/b + bi + (h/b^(1/2) + h^(1/2)*bi^(1/2))*log2a^(1/2))",
            w * (1.0 + s.k1 * s.cr) * (h / b + bi + (h / b.sqrt() + h.sqrt() * bi.sqrt()) * rl),
        ),
        (
            "w^2*L^(13/2)*(h^(3/2)/b + h*bi + h^(7/4)*bi^(3/4) + h*bi^(1/2)/b^(1/2) + h^(1/2)*bi/b^(1/2))",
            w * w
                * l.powf(6.5)
                * (h.powf(1.5) / b
                    + h * bi
                    + h.powf(1.75) * bi.powf(0.75)
                    + h * bi.sqrt() / b.sqrt()
                    + h.sqrt() * bi / b.sqrt()),
        ),
        (
            "w^3*L^(27/4)*(1+cr^3*K3^3)*(bi^3 + h^(25/8)*bi^(9/8) + h^(7/4)*bi^(5/4) + h*bi/b^(1/2) \
             + h^(9/4)*bi^(3/4)/b^(1/2) + h^(3/2)*bi^(1/2)/b + (h^3/b^(3/2) + h^(3/2)*bi^(3/2))*log2a^(3/2))",
            w.powi(3)
                * l.powf(27.0 / 4.0)
                * (1.0 + s.cr.powi(3) * s.k3.powi(3))
                * (bi.powi(3)
                    + h.powf(25.0 / 8.0) * bi.powf(9.0 / 8.0)
                    + h.powf(1.75) * bi.powf(1.25)
                    + h * bi / b.sqrt()
                    + h.powf(2.25) * bi.powf(0.75) / b.sqrt()
                    + h.powf(1.5) * bi.sqrt() / b
                    + (h.powi(3) / b.powf(1.5) + h.powf(1.5) * bi.powf(1.5)) * rl3),
        ),
        (
            "w^4*L^(27/4)*(1+cr*K3)*(bi^(5/2) + h^(15/8)*bi^(17/8) + h^(23/8)*bi^(9/8)/b + h^2*bi^(1/2)/b^(3/2) \
             + h^(3/2)*bi/b + h^(11/4)*bi^(3/4)/b + h^(1/2)*bi^(3/2)/b^(1/2) + (h^(5/2)/b^2 + h^(1/2)*bi^2)*log2a^(1/2))",
            w.powi(4)
                * l.powf(27.0 / 4.0)
                * (1.0 + s.cr * s.k3)
                * (bi.powf(2.5)
                    + h.powf(15.0 / 8.0) * bi.powf(17.0 / 8.0)
                    + h.powf(23.0 / 8.0) * bi.powf(9.0 / 8.0) / b
                    + h * h * bi.sqrt() / b.powf(1.5)
                    + h.powf(1.5) * bi / b
                    + h.powf(11.0 / 4.0) * bi.powf(0.75) / b
                    + h.sqrt() * bi.powf(1.5) / b.sqrt()
                    + (h.powf(2.5) / (b * b) + h.sqrt() * bi * bi) * rl),
        ),
        (
            "w^5*L*(h^3/b^(5/2) + h^(1/2)*bi^(5/2) + h^(3/2)*bi^(3/2)/b + h^(5/2)*bi^(1/2)/b^2 \
             + h^2*bi/b^(3/2) + h*bi^2/b^(1/2))",
            w.powi(5)
                * l
                * (h.powi(3) / b.powf(2.5)
                    + h.sqrt() * bi.powf(2.5)
                    + h.powf(1.5) * bi.powf(1.5) / b
                    + h.powf(2.5) * bi.sqrt() / (b * b)
                    + h * h * bi / b.powf(1.5)
                    + h * bi * bi / b.sqrt()),
        ),
    ]
}

/// Evaluates the five epsilon components, the shared constants, and the
/// `c_num`-scaled total.
pub fn eps_components(inp: &BoundInputs) -> Result<BoundBreakdown> {
    inp.validate()?;
    let s = Sym::new(inp);
    let dc = d_of(&s);
    fn sum(v: Vec<(&'static str, f64)>) -> f64 {
        v.iter().map(|t| t.1).sum()
    }
    let eps_r = sum(eps_r_terms(&s));
    let eps_z = sum(eps_z_terms(&s));
    let eps_rem = sum(eps_rem_terms(&s, dc.d1));
    let eps_exch = sum(eps_exch_terms(&s));
    // At the L*h = 1 pole of d2 the bound is vacuous; report +inf rather
    // than let inf * 0 inner factors turn the sum into NaN.
    let eps_cov = if dc.d2.is_finite() {
        sum(eps_cov_terms(&s, dc.d2))
    } else {
        f64::INFINITY
    };
    Ok(BoundBreakdown {
        eps_r,
        eps_z,
        eps_rem,
        eps_exch,
        eps_cov,
        d1: dc.d1,
        d2: dc.d2,
        e1: e1_of(&s),
        c_max: c_max_of(inp),
        total: inp.c_num * (eps_r + eps_z + eps_rem + eps_exch + eps_cov),
        sigma_degenerate: dc.sigma_degenerate,
    })
}

/// Coarse one-line bound: `c_num * c_max` times a six-group bracket in
/// `(h, b, bi, w, L)`. Requires `alpha*h <= c_bar`.
pub fn general_simplified_bound(inp: &BoundInputs) -> Result<f64> {
    inp.validate()?;
    let ah = inp.alpha as f64 * inp.h;
    if ah > inp.c_bar {
        return Err(Error::OutOfRange(format!(
            "alpha*h = {ah} exceeds the assumed cap c_bar = {}",
            inp.c_bar
        )));
    }
    let s = Sym::new(inp);
    let bracket: f64 = general_terms(&s).iter().map(|t| t.1).sum();
    Ok(inp.c_num * c_max_of(inp) * bracket)
}

/// Per-setting convergence rate with the shared model prefactor
/// `calib*(cr^3 + cr*L^6 + L^7)`.
pub fn simplified_rate(setting: &Setting, inp: &BoundInputs, calib: f64) -> Result<f64> {
    let prefactor = calib * (inp.c_r.powi(3) + inp.c_r * inp.l.powi(6) + inp.l.powi(7));
    let rate = match setting {
        Setting::Raw => {
            return Err(Error::Config(
                "simplified rate needs a statistical or numerical preset".into(),
            ));
        }
        Setting::Statistical { m, n, .. } => {
            let b = inp.b as f64;
            if *n <= inp.b {
                return Err(Error::OutOfRange(format!(
                    "statistical rate needs n > b, got n = {n}, b = {}",
                    inp.b
                )));
            }
            let m6 = (*m as f64).powi(6);
            (m6 * b * ((*n as f64 / b).ln() + m6) / *n as f64).sqrt()
        }
        Setting::Numerical { .. } => {
            let hterm = if inp.h == 0.0 {
                0.0
            } else {
                inp.h * (1.0 / inp.h).ln()
            };
            (hterm + inp.beta_inv).sqrt()
        }
    };
    Ok(prefactor * rate)
}

/// Curvature-mismatch constant `C(a_t, b, b_t)` of the stationary comparison.
pub fn ou_comparison_constant(a_t: f64, b: f64, b_t: f64) -> f64 {
    a_t * (1.0 + 2.0 * b * (1.0 + 4.0 * b_t)) * (3.0 + 4.0 * b_t) * (4.0 * (b_t - b).abs()).exp()
        / (b_t * (b + b_t))
}

fn k_p(p: u32, cp: f64, a: f64, a_t: f64, b: f64, b_t: f64) -> f64 {
    let pf = p as f64;
    let first = 2f64.powf((3.0 * pf - 4.0) / 2.0) / a.min(a_t).powf(pf / 2.0);
    let c = ou_comparison_constant(a_t, b, b_t);
    let second = 2f64.powf(2.0 * (pf - 1.0))
        * (c.powf(pf / 2.0) + 2f64.powf(pf / 2.0) * a_t.powf(pf / 2.0) * (pf * (b_t - b).abs()).exp());
    cp * first.max(second)
}

fn difference_factor(a: f64, a_t: f64, b: f64, b_t: f64) -> f64 {
    let da = (a - a_t).abs();
    let db = (b - b_t).abs();
    da + db + da.powi(3) + db.powi(3)
}

/// Distance bound between two OU path laws with diffusion coefficients
/// `a`/`a_t` and mean reversions `b`/`b_t`. `cp` supplies the moment
/// constants for p = 1 and p = 3; `c3` is the separate cubic-term constant.
pub fn ou_to_ou_bound(
    a: f64,
    a_t: f64,
    b: f64,
    b_t: f64,
    cp: impl Fn(u32) -> f64,
    c3: f64,
) -> Result<f64> {
    for (name, v) in [("a", a), ("a_tilde", a_t), ("b", b), ("b_tilde", b_t)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::OutOfRange(format!(
                "ou comparison requires {name} > 0, got {v}"
            )));
        }
    }
    let k1 = k_p(1, cp(1), a, a_t, b, b_t);
    let k3 = k_p(3, cp(3), a, a_t, b, b_t);
    let k = (k1 + 2f64.powf(2.5) * c3 * a.powf(1.5) * k3.powf(1.0 / 3.0)).max(2.0 * k3);
    Ok(k * difference_factor(a, a_t, b, b_t))
}

/// Convergence-rate exponents of the two path metrics as a function of the
/// moment order `r > 1` of the test-functional envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricExponents {
    pub lp: f64,
    pub bw: f64,
    /// Exponent is nonpositive, so the corresponding rate says nothing.
    pub lp_vacuous: bool,
    pub bw_vacuous: bool,
}

pub fn metric_rate_exponents(r: f64) -> Result<MetricExponents> {
    if !r.is_finite() || r <= 1.0 {
        return Err(Error::OutOfRange(format!(
            "moment order r must be a finite number > 1, got {r}"
        )));
    }
    let lp = 1.0 / 20.0 - 9.0 / (200.0 * r - 20.0);
    let bw = 1.0 / 14.0 - 2.0 / (49.0 * r - 21.0);
    Ok(MetricExponents {
        lp,
        bw,
        lp_vacuous: lp <= 0.0,
        bw_vacuous: bw <= 0.0,
    })
}

/// Right-hand sides of the iterate-average comparison: the variance gap in
/// terms of the path-law distance `eps`, and the bias of the average itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateAverageBound {
    pub variance_rhs: f64,
    pub mean_rhs: f64,
}

pub fn iterate_average_bound(eps: f64, mean_abs_y: f64, inp: &BoundInputs) -> IterateAverageBound {
    IterateAverageBound {
        variance_rhs: (1.53 * mean_abs_y + 3.53) * eps,
        mean_rhs: inp.k1
            * inp.c_r
            * inp.w
            * inp.alpha as f64
            * inp.h
            * (inp.h * inp.omega / inp.b as f64 + 2.0 * inp.beta_inv),
    }
}

/// Term-by-term decomposition of every formula this module evaluates. Within
/// a group the listed terms sum to the group value; the S terms inside
/// `d1_sq` are already scaled by `w^4`, and every `eps_cov` term already
/// includes the `D2*al*w^2*h^2` prefactor.
pub fn explain(inp: &BoundInputs) -> Result<Vec<TermGroup>> {
    inp.validate()?;
    let s = Sym::new(inp);
    let dc = d_of(&s);
    let (d1_sq, _) = d1_sq_terms(&s);
    let (d2_sq, _) = d2_sq_terms(&s);
    Ok(vec![
        TermGroup {
            name: "e1",
            terms: vec![("E1", e1_of(&s))],
        },
        TermGroup {
            name: "s",
            terms: s_terms(&s),
        },
        TermGroup {
            name: "d1_sq",
            terms: d1_sq,
        },
        TermGroup {
            name: "d2_sq",
            terms: d2_sq,
        },
        TermGroup {
            name: "eps_r",
            terms: eps_r_terms(&s),
        },
        TermGroup {
            name: "eps_z",
            terms: eps_z_terms(&s),
        },
        TermGroup {
            name: "eps_rem",
            terms: eps_rem_terms(&s, dc.d1),
        },
        TermGroup {
            name: "eps_exch",
            terms: eps_exch_terms(&s),
        },
        TermGroup {
            name: "eps_cov",
            terms: eps_cov_terms(&s, dc.d2),
        },
        TermGroup {
            name: "general_bracket",
            terms: general_terms(&s),
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn base_inputs() -> BoundInputs {
        BoundInputs {
            l: 1.0,
            c_r: 0.1,
            omega: 1.0,
            sigma_info: 1.0,
            psi2: 1.0,
            psi4: 3.0,
            psi6: 15.0,
            h: 0.03125,
            b: 1,
            beta_inv: 0.01,
            alpha: 32,
            w: 8.0,
            k1: 1.0,
            k3: 1.0,
            c_num: 1.0,
            c_bar: 1.0,
        }
    }

    fn zero_noise_inputs() -> BoundInputs {
        BoundInputs {
            omega: 0.0,
            sigma_info: 0.0,
            psi2: 0.0,
            psi4: 0.0,
            psi6: 0.0,
            beta_inv: 0.0,
            ..base_inputs()
        }
    }

    #[test]
    fn e1_zero_when_moments_vanish() {
        let inp = zero_noise_inputs();
        assert_eq!(e1_constant(&inp), 0.0);
    }

    #[test]
    fn e1_hand_value_at_degenerate_step() {
        // With h = 0 both coupling products vanish and the display collapses
        // to 1 + 1 + 2*(2^(3/4) + 1).
        let inp = BoundInputs {
            l: 1.0,
            omega: 1.0,
            psi2: 1.0,
            psi4: 1.0,
            psi6: 1.0,
            h: 0.0,
            beta_inv: 0.0,
            ..base_inputs()
        };
        let expected = 2.0 + 2.0 * 2f64.powf(0.75) + 2.0;
        assert_relative_eq!(e1_constant(&inp), expected, max_relative = 1e-14);
    }

    #[test]
    fn e1_strictly_monotone_in_omega() {
        let inp = base_inputs();
        let doubled = BoundInputs {
            omega: 2.0 * inp.omega,
            ..inp.clone()
        };
        assert!(e1_constant(&doubled) > e1_constant(&inp));
    }

    #[test]
    fn d_constants_reduce_to_one() {
        let dc = d_constants(&zero_noise_inputs());
        assert_eq!(dc.d1, 1.0);
        assert_eq!(dc.d2, 1.0);
        assert!(dc.sigma_degenerate);

        // Same audit with positive curvature: the log term still carries a
        // zero coupling factor.
        let inp = BoundInputs {
            sigma_info: 0.7,
            ..zero_noise_inputs()
        };
        let dc = d_constants(&inp);
        assert_eq!(dc.d1, 1.0);
        assert_eq!(dc.d2, 1.0);
        assert!(!dc.sigma_degenerate);
    }

    #[test]
    fn d_constants_dominate_one_and_grow_with_w() {
        let mut prev = (0.0, 0.0);
        for scale in [1.0, 2.0, 4.0, 8.0] {
            let inp = BoundInputs {
                w: scale * 4.0,
                ..base_inputs()
            };
            let dc = d_constants(&inp);
            assert!(dc.d1 >= 1.0 && dc.d2 >= 1.0);
            assert!(dc.d1 > prev.0 && dc.d2 > prev.1);
            prev = (dc.d1, dc.d2);
        }
    }

    #[test]
    fn sigma_zero_flag_matches_small_sigma_limit() {
        let degenerate = BoundInputs {
            sigma_info: 0.0,
            ..base_inputs()
        };
        let tiny = BoundInputs {
            sigma_info: 1e-300,
            ..base_inputs()
        };
        let d_deg = d_constants(&degenerate);
        let d_tiny = d_constants(&tiny);
        assert!(d_deg.sigma_degenerate);
        assert!(!d_tiny.sigma_degenerate);
        assert_relative_eq!(d_deg.d1, d_tiny.d1, max_relative = 1e-12);
        assert_relative_eq!(d_deg.d2, d_tiny.d2, max_relative = 1e-12);
    }

    #[test]
    fn eps_r_vanishes_without_curvature_remainder() {
        let inp = BoundInputs {
            c_r: 0.0,
            ..base_inputs()
        };
        let br = eps_components(&inp).unwrap();
        assert_eq!(br.eps_r, 0.0);
        assert!(br.total > 0.0);
    }

    #[test]
    fn noise_free_breakdown_keeps_only_moment_free_terms() {
        let inp = zero_noise_inputs();
        let br = eps_components(&inp).unwrap();
        assert_eq!(br.eps_r, 0.0);
        assert_eq!(br.eps_z, 0.0);
        assert_eq!(br.eps_rem, 0.0);
        assert_eq!(br.eps_exch, 0.0);
        // Two covariance terms carry no moment or temperature factor.
        let s = Sym::new(&inp);
        let pref = 1.0 * s.al * s.w * s.w * s.h * s.h;
        let expected =
            pref * s.l * s.al.sqrt() * s.h / s.b.powf(1.5) + pref * s.l * s.l * s.al * s.h * s.h / s.b.powf(1.5);
        assert_eq!(br.eps_cov, expected);
        assert_eq!(br.total, expected);
    }

    #[test]
    fn zero_step_size_gives_zero_finite_breakdown() {
        let inp = BoundInputs {
            h: 0.0,
            beta_inv: 0.5,
            c_bar: 1.0,
            ..base_inputs()
        };
        let br = eps_components(&inp).unwrap();
        for v in [br.eps_r, br.eps_z, br.eps_rem, br.eps_exch, br.eps_cov, br.total] {
            assert_eq!(v, 0.0);
        }
        assert!(br.d1.is_finite() && br.d2.is_finite());
    }

    #[test]
    fn components_nonnegative_on_grid() {
        for h in [0.0, 0.001, 0.25, 1.0] {
            for bi in [0.0, 0.001, 1.0] {
                for om in [0.0, 0.5, 2.0] {
                    let inp = BoundInputs {
                        h,
                        beta_inv: bi,
                        omega: om,
                        psi4: 3.0 * om * om,
                        psi6: 15.0 * om * om * om,
                        psi2: om,
                        ..base_inputs()
                    };
                    let br = eps_components(&inp).unwrap();
                    let pole_free = inp.l * inp.h < 1.0;
                    for v in [
                        br.eps_r, br.eps_z, br.eps_rem, br.eps_exch, br.eps_cov, br.d1, br.d2,
                        br.e1, br.c_max, br.total,
                    ] {
                        assert!(v >= 0.0, "negative or NaN component: {v}");
                        assert!(!pole_free || v.is_finite(), "non-finite off the pole: {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn total_scales_with_c_num() {
        let inp = base_inputs();
        let br = eps_components(&inp).unwrap();
        let scaled = eps_components(&BoundInputs {
            c_num: 2.5,
            ..inp
        })
        .unwrap();
        assert_eq!(
            scaled.total,
            2.5 * (br.eps_r + br.eps_z + br.eps_rem + br.eps_exch + br.eps_cov)
        );
    }

    #[test]
    fn explain_groups_sum_to_components() {
        let inp = base_inputs();
        let br = eps_components(&inp).unwrap();
        let groups = explain(&inp).unwrap();
        let by_name = |n: &str| groups.iter().find(|g| g.name == n).unwrap().sum();
        assert_relative_eq!(by_name("eps_r"), br.eps_r, max_relative = 1e-15);
        assert_relative_eq!(by_name("eps_z"), br.eps_z, max_relative = 1e-15);
        assert_relative_eq!(by_name("eps_rem"), br.eps_rem, max_relative = 1e-15);
        assert_relative_eq!(by_name("eps_exch"), br.eps_exch, max_relative = 1e-15);
        assert_relative_eq!(by_name("eps_cov"), br.eps_cov, max_relative = 1e-15);
        assert_relative_eq!(by_name("d1_sq").sqrt(), br.d1, max_relative = 1e-15);
        assert_relative_eq!(by_name("d2_sq").sqrt(), br.d2, max_relative = 1e-15);
        assert_eq!(by_name("e1"), br.e1);
    }

    #[test]
    fn c_max_picks_largest_entry() {
        let inp = BoundInputs {
            omega: 0.5,
            sigma_info: 0.5,
            psi6: 40.0,
            c_bar: 1.0,
            ..base_inputs()
        };
        let br = eps_components(&inp).unwrap();
        assert_eq!(br.c_max, 40.0);
        let inp = BoundInputs {
            psi6: 0.0,
            c_bar: 2.0,
            ..inp
        };
        let br = eps_components(&inp).unwrap();
        assert_eq!(br.c_max, 2f64.powf(19.0 / 4.0));
    }

    #[test]
    fn general_bound_rejects_time_horizon_above_cap() {
        let inp = BoundInputs {
            alpha: 64,
            h: 0.03125,
            c_bar: 1.0,
            ..base_inputs()
        };
        assert!(matches!(
            general_simplified_bound(&inp),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn general_bound_beta_free_audit() {
        let inp = BoundInputs {
            beta_inv: 0.0,
            ..base_inputs()
        };
        let s = Sym::new(&inp);
        let terms = general_terms(&s);
        // With bi = 0 only the leading summand of the w^2 and w^5 groups
        // survives.
        assert_eq!(terms[2].1, s.w * s.w * s.l.powf(6.5) * s.h.powf(1.5) / s.b);
        assert_eq!(
            terms[5].1,
            s.w.powi(5) * s.l * s.h.powi(3) / s.b.powf(2.5)
        );
        let bound = general_simplified_bound(&inp).unwrap();
        assert!(bound > 0.0 && bound.is_finite());
    }

    #[test]
    fn rate_numerical_hand_value() {
        let h = (-1f64).exp();
        let inp = BoundInputs {
            l: 1.0,
            c_r: 0.0,
            h,
            beta_inv: 0.0,
            ..base_inputs()
        };
        let setting = Setting::Numerical {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
        };
        let rate = simplified_rate(&setting, &inp, 1.0).unwrap();
        assert_relative_eq!(rate, (-0.5f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn rate_statistical_hand_value() {
        let inp = BoundInputs {
            l: 1.0,
            c_r: 0.0,
            b: 1,
            ..base_inputs()
        };
        let setting = Setting::Statistical {
            w1: 1.0,
            w2: 1.0,
            m: 1,
            n: 100,
        };
        let rate = simplified_rate(&setting, &inp, 1.0).unwrap();
        assert_relative_eq!(
            rate,
            ((100f64.ln() + 1.0) / 100.0).sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn rate_statistical_minimized_at_unit_batch() {
        let setting = |n: usize| Setting::Statistical {
            w1: 1.0,
            w2: 1.0,
            m: 1,
            n,
        };
        for n in [256usize, 4096] {
            let rates: Vec<f64> = (1..=32)
                .map(|b| {
                    let inp = BoundInputs {
                        b,
                        ..base_inputs()
                    };
                    simplified_rate(&setting(n), &inp, 1.0).unwrap()
                })
                .collect();
            let min = rates
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            assert_eq!(rates[0], min);
        }
    }

    #[test]
    fn rate_rejects_raw_setting_and_small_n() {
        let inp = base_inputs();
        assert!(simplified_rate(&Setting::Raw, &inp, 1.0).is_err());
        let setting = Setting::Statistical {
            w1: 1.0,
            w2: 1.0,
            m: 1,
            n: 1,
        };
        let inp = BoundInputs {
            b: 4,
            ..base_inputs()
        };
        assert!(simplified_rate(&setting, &inp, 1.0).is_err());
    }

    #[test]
    fn ou_bound_zero_at_equal_parameters() {
        let bound = ou_to_ou_bound(2.0, 2.0, 1.5, 1.5, |_| 1.0, 1.0).unwrap();
        assert_eq!(bound, 0.0);
    }

    #[test]
    fn ou_comparison_constant_hand_value() {
        assert_eq!(ou_comparison_constant(1.0, 1.0, 1.0), 38.5);
    }

    #[test]
    fn ou_bound_rejects_nonpositive_parameters() {
        assert!(ou_to_ou_bound(0.0, 1.0, 1.0, 1.0, |_| 1.0, 1.0).is_err());
        assert!(ou_to_ou_bound(1.0, 1.0, 1.0, 0.0, |_| 1.0, 1.0).is_err());
        assert!(ou_to_ou_bound(1.0, f64::NAN, 1.0, 1.0, |_| 1.0, 1.0).is_err());
    }

    #[test]
    fn ou_difference_factor_exchange_invariant() {
        let f = difference_factor(2.0, 0.5, 3.0, 1.0);
        let g = difference_factor(0.5, 2.0, 1.0, 3.0);
        assert_eq!(f, g);
    }

    #[test]
    fn metric_exponents_exact_at_two() {
        let e = metric_rate_exponents(2.0).unwrap();
        assert_eq!(e.lp, 1.0 / 20.0 - 9.0 / 380.0);
        assert_eq!(e.bw, 1.0 / 14.0 - 2.0 / 77.0);
        assert!(!e.lp_vacuous && !e.bw_vacuous);
    }

    #[test]
    fn metric_exponents_approach_limits() {
        let e = metric_rate_exponents(1e12).unwrap();
        assert_relative_eq!(e.lp, 1.0 / 20.0, max_relative = 1e-9);
        assert_relative_eq!(e.bw, 1.0 / 14.0, max_relative = 1e-9);
        // Monotone in r and positive as soon as r > 1.
        let lo = metric_rate_exponents(1.0 + 1e-6).unwrap();
        let mid = metric_rate_exponents(1.5).unwrap();
        assert!(lo.lp > 0.0 && lo.bw > 0.0);
        assert!(lo.lp < mid.lp && mid.lp < e.lp);
        assert!(lo.bw < mid.bw && mid.bw < e.bw);
    }

    #[test]
    fn metric_exponents_reject_low_moment_order() {
        assert!(metric_rate_exponents(1.0).is_err());
        assert!(metric_rate_exponents(0.5).is_err());
        assert!(metric_rate_exponents(f64::NAN).is_err());
        assert!(metric_rate_exponents(f64::INFINITY).is_err());
    }

    #[test]
    fn iterate_average_hand_values() {
        let inp = base_inputs();
        let out = iterate_average_bound(0.0, 2.0, &inp);
        assert_eq!(out.variance_rhs, 0.0);
        let out = iterate_average_bound(0.1, 0.0, &inp);
        assert_eq!(out.variance_rhs, 3.53 * 0.1);
        let linear = BoundInputs {
            c_r: 0.0,
            ..base_inputs()
        };
        assert_eq!(iterate_average_bound(0.1, 1.0, &linear).mean_rhs, 0.0);
        // Hand value of the mean bound on round numbers.
        let inp = BoundInputs {
            k1: 2.0,
            c_r: 0.5,
            w: 4.0,
            alpha: 10,
            h: 0.5,
            omega: 1.0,
            b: 1,
            beta_inv: 0.25,
            ..base_inputs()
        };
        assert_eq!(
            iterate_average_bound(0.0, 0.0, &inp).mean_rhs,
            2.0 * 0.5 * 4.0 * 10.0 * 0.5 * (0.5 + 0.5)
        );
    }

    #[test]
    fn beta_zero_matches_vanishing_temperature_limit() {
        let cold = BoundInputs {
            beta_inv: 0.0,
            ..base_inputs()
        };
        let warm = BoundInputs {
            beta_inv: 1e-20,
            ..base_inputs()
        };
        let a = eps_components(&cold).unwrap().total;
        let b = eps_components(&warm).unwrap().total;
        assert_relative_eq!(a, b, max_relative = 1e-9);
        let ga = general_simplified_bound(&cold).unwrap();
        let gb = general_simplified_bound(&warm).unwrap();
        assert_relative_eq!(ga, gb, max_relative = 1e-9);
    }

    fn preset_inputs(k: u32) -> BoundInputs {
        let h = 2f64.powi(-(k as i32));
        let cfg = AlgoConfig::numerical(1.0, 1.0, 1.0, h, 1, h, 7).unwrap();
        BoundInputs {
            l: 1.0,
            c_r: 0.1,
            omega: 1.0,
            sigma_info: 1.0,
            psi2: 1.0,
            psi4: 3.0,
            psi6: 15.0,
            h,
            b: 1,
            beta_inv: h,
            alpha: cfg.alpha,
            w: cfg.w,
            k1: 1.0,
            k3: 1.0,
            c_num: 1.0,
            c_bar: 1.0,
        }
    }

    #[test]
    fn totals_decrease_along_small_step_preset() {
        let mut prev_eps = f64::INFINITY;
        let mut prev_gen = f64::INFINITY;
        for k in 4..=10 {
            let inp = preset_inputs(k);
            let eps = eps_components(&inp).unwrap().total;
            let gen = general_simplified_bound(&inp).unwrap();
            assert!(eps < prev_eps, "eps total rose at h = 2^-{k}: {eps} vs {prev_eps}");
            assert!(gen < prev_gen, "coarse bound rose at h = 2^-{k}: {gen} vs {prev_gen}");
            prev_eps = eps;
            prev_gen = gen;
        }
    }

    #[test]
    fn general_and_components_agree_within_fixed_factor() {
        let mut rng = crate::rng::replicate_rng(2024, 0x4244, 0);
        for _ in 0..20 {
            let k = rng.random_range(3..=6);
            let h = 2f64.powi(-k);
            let alpha = (1.0 / h).round() as usize;
            let b = *[1usize, 2, 4].get(rng.random_range(0..3)).unwrap();
            let om: f64 = rng.random_range(0.5..1.5);
            let inp = BoundInputs {
                l: rng.random_range(1.0..1.3),
                c_r: rng.random_range(0.0..0.2),
                omega: om,
                sigma_info: rng.random_range(0.5..1.5),
                psi2: om,
                psi4: 3.0 * om * om,
                psi6: 15.0 * om * om * om,
                h,
                b,
                beta_inv: rng.random_range(0.0..h),
                alpha,
                w: (b as f64 / h).sqrt(),
                k1: 1.0,
                k3: 1.0,
                c_num: 1.0,
                c_bar: 1.0,
            };
            let eps = eps_components(&inp).unwrap().total;
            let gen = general_simplified_bound(&inp).unwrap();
            let ratio = if eps > gen { eps / gen } else { gen / eps };
            assert!(
                ratio <= 50.0,
                "bounds diverged: eps = {eps}, general = {gen}, ratio = {ratio}"
            );
        }
    }

    #[test]
    fn validate_rejects_out_of_range_fields() {
        for bad in [
            BoundInputs {
                h: 1.5,
                ..base_inputs()
            },
            BoundInputs {
                h: -0.1,
                ..base_inputs()
            },
            BoundInputs {
                beta_inv: 2.0,
                ..base_inputs()
            },
            BoundInputs {
                l: 0.5,
                ..base_inputs()
            },
            BoundInputs {
                b: 0,
                ..base_inputs()
            },
            BoundInputs {
                alpha: 0,
                ..base_inputs()
            },
            BoundInputs {
                c_num: 0.0,
                ..base_inputs()
            },
            BoundInputs {
                c_bar: 0.0,
                ..base_inputs()
            },
            BoundInputs {
                omega: f64::NAN,
                ..base_inputs()
            },
            BoundInputs {
                k1: -1.0,
                ..base_inputs()
            },
        ] {
            assert!(bad.validate().is_err());
        }
        assert!(base_inputs().validate().is_ok());
    }

    #[test]
    fn csv_row_matches_header_layout() {
        let inp = base_inputs();
        let br = eps_components(&inp).unwrap();
        let header_cols = BoundBreakdown::csv_header().split(',').count();
        let row = br.csv_row(&inp);
        assert_eq!(row.split(',').count(), header_cols);
        assert!(row.contains("false"));
        for piece in row.split(',').take(10) {
            assert!(piece.parse::<f64>().unwrap().is_finite());
        }
    }
}
