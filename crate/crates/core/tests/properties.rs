//! Property tests for the structural invariants: linearization remainders,
//! step-propagation products, path identities, covariance geometry, and
//! bound nonnegativity, all over randomized inputs.

use oulab::bounds::{eps_components, general_simplified_bound, metric_rate_exponents, BoundInputs};
use oulab::config::AlgoConfig;
use oulab::glm::{model_constants, Family, GlmModel};
use oulab::ou::{ou_covariance, transition, OuParams};
use oulab::sgld::{q_product, rescale, run_linearized, run_sgld, BatchDraw};
use oulab::stats::{mean_var, pairwise_sum};
use proptest::prelude::*;

fn small_xs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.7..0.7f64, 4..16)
}

proptest! {
    /// The per-observation gap between the true and linearized gradients is
    /// controlled by the curvature-remainder constant times the squared
    /// distance from the critical point.
    #[test]
    fn logistic_linearization_remainder_dominated(
        xs in small_xs(),
        bits in prop::collection::vec(prop::bool::ANY, 16),
        dt in -1.5..1.5f64,
    ) {
        let ys: Vec<f64> = bits.iter().take(xs.len()).map(|&b| f64::from(u8::from(b))).collect();
        prop_assume!(ys.len() == xs.len());
        let model = GlmModel::new(Family::Logistic, xs, ys, 0.1, None).unwrap();
        let consts = match model_constants(&model) {
            Ok(c) => c,
            Err(_) => return Ok(()), // separated datasets have no critical point
        };
        let theta = consts.theta_hat + dt;
        for i in 0..model.n() {
            let gap = (model.gradient(i, theta) - consts.linearized_gradient(i, theta)).abs();
            prop_assert!(
                gap <= consts.c_r * dt * dt + 1e-12,
                "remainder {gap} exceeds bound {} at i = {i}",
                consts.c_r * dt * dt
            );
        }
    }

    #[test]
    fn poisson_linearization_remainder_dominated(
        xs in small_xs(),
        counts in prop::collection::vec(0u8..5, 16),
        dt in -1.0..1.0f64,
    ) {
        let ys: Vec<f64> = counts.iter().take(xs.len()).map(|&c| f64::from(c)).collect();
        prop_assume!(ys.len() == xs.len());
        let model = GlmModel::new(Family::Poisson, xs, ys, 0.0, Some((-2.0, 2.0))).unwrap();
        let consts = match model_constants(&model) {
            Ok(c) => c,
            Err(_) => return Ok(()),
        };
        let theta = consts.theta_hat + dt;
        prop_assume!(theta > -2.0 && theta < 2.0);
        for i in 0..model.n() {
            let gap = (model.gradient(i, theta) - consts.linearized_gradient(i, theta)).abs();
            prop_assert!(gap <= consts.c_r * dt * dt + 1e-12);
        }
    }

    /// The linear family has no remainder at all: gradients equal their
    /// linearization identically.
    #[test]
    fn linear_gradients_equal_linearized(
        xs in prop::collection::vec(-1.0..1.0f64, 4..16),
        ys in prop::collection::vec(-2.0..2.0f64, 16),
        theta in -4.0..4.0f64,
    ) {
        let ys: Vec<f64> = ys.into_iter().take(xs.len()).collect();
        prop_assume!(ys.len() == xs.len());
        let model = GlmModel::new(Family::Linear, xs, ys, 0.3, None).unwrap();
        let consts = model_constants(&model).unwrap();
        prop_assert_eq!(consts.c_r, 0.0);
        for i in 0..model.n() {
            let gap = (model.gradient(i, theta) - consts.linearized_gradient(i, theta)).abs();
            prop_assert!(gap <= 1e-12 * (1.0 + theta.abs()));
        }
    }

    /// Propagation products stay inside [0, 1] whenever the step size is
    /// below half the curvature scale.
    #[test]
    fn q_product_lies_in_unit_interval(
        sigma in prop::collection::vec(0.0..3.0f64, 1..12),
        hfrac in 0.01..0.99f64,
        b in 1usize..4,
        alpha in 1usize..40,
        seed in any::<u64>(),
        jk in (0usize..40, 0usize..41),
    ) {
        let l = sigma.iter().cloned().fold(1.0f64, f64::max);
        let h = hfrac / (2.0 * l);
        let draw = BatchDraw::generate(sigma.len(), alpha, b, seed);
        let (j, k) = (jk.0.min(alpha - 1), jk.1.min(alpha));
        prop_assume!(j <= k);
        let q = q_product(&sigma, &draw, j, k, h, b);
        prop_assert!((0.0..=1.0).contains(&q), "q = {q} outside [0, 1]");
    }

    /// For the linear family the rescaled iterate path and the rescaled
    /// linearized path coincide replicate-for-replicate under shared draws.
    #[test]
    fn linear_paths_match_linearized_paths(
        xs in prop::collection::vec(-1.0..1.0f64, 4..12),
        ys in prop::collection::vec(-2.0..2.0f64, 12),
        h in 0.01..0.4f64,
        b in 1usize..3,
        warm in prop::bool::ANY,
        alpha in 1usize..50,
        seed in any::<u64>(),
    ) {
        let ys: Vec<f64> = ys.into_iter().take(xs.len()).collect();
        prop_assume!(ys.len() == xs.len());
        let model = GlmModel::new(Family::Linear, xs, ys, 0.0, None).unwrap();
        let consts = model_constants(&model).unwrap();
        let beta_inv = if warm { 0.05 } else { 0.0 };
        let cfg = AlgoConfig::raw(h, b, beta_inv, alpha, 5.0, 0).unwrap();
        let draw = BatchDraw::generate(model.n(), alpha, b, seed);
        let y = rescale(&run_sgld(&model, &consts, &cfg, &draw).unwrap(), cfg.w, consts.theta_hat);
        let eta = rescale(&run_linearized(&consts, &cfg, &draw).unwrap(), cfg.w, 0.0);
        for (a, b) in y.iter().zip(&eta) {
            prop_assert!((a - b).abs() <= 1e-12, "paths split: {a} vs {b}");
        }
    }

    /// Every bound component is nonnegative and finite on random inputs away
    /// from the L*h = 1 pole, and the coarse bound agrees in sign.
    #[test]
    fn bound_components_nonnegative(
        l in 1.0..2.0f64,
        h in 1e-4..0.25f64,
        om in 0.0..3.0f64,
        sig in 0.0..3.0f64,
        p4 in 0.0..20.0f64,
        p6 in 0.0..100.0f64,
        cr in 0.0..1.0f64,
        bifrac in 0.0..1.0f64,
        b in 1usize..8,
        alpha in 1usize..512,
        w in 0.1..30.0f64,
        k1 in 0.0..3.0f64,
        k3 in 0.0..3.0f64,
        c_num in 0.1..2.0f64,
    ) {
        let inp = BoundInputs {
            l,
            c_r: cr,
            omega: om,
            sigma_info: sig,
            psi2: om,
            psi4: p4,
            psi6: p6,
            h,
            b,
            beta_inv: bifrac * h,
            alpha,
            w,
            k1,
            k3,
            c_num,
            c_bar: alpha as f64 * h,
        };
        let br = eps_components(&inp).unwrap();
        for v in [
            br.eps_r, br.eps_z, br.eps_rem, br.eps_exch, br.eps_cov,
            br.e1, br.c_max, br.total,
        ] {
            prop_assert!(v >= 0.0 && v.is_finite(), "bad component {v}");
        }
        prop_assert!(br.d1 >= 1.0 && br.d2 >= 1.0);
        let g = general_simplified_bound(&inp).unwrap();
        prop_assert!(g >= 0.0 && g.is_finite());
    }

    /// Stationary covariance is symmetric and satisfies Cauchy-Schwarz.
    #[test]
    fn ou_covariance_symmetric_and_bounded(
        drift in 1e-10..5.0f64,
        diff in 0.01..5.0f64,
        t in 0.0..1.0f64,
        s in 0.0..1.0f64,
    ) {
        let p = OuParams::new(drift, diff);
        let c_ts = ou_covariance(&p, t, s);
        let c_st = ou_covariance(&p, s, t);
        prop_assert_eq!(c_ts, c_st);
        let bound = (ou_covariance(&p, t, t) * ou_covariance(&p, s, s)).sqrt();
        prop_assert!(c_ts.abs() <= bound + 1e-12, "cov {c_ts} above CS bound {bound}");
    }

    /// One-step transition: decay in (0, 1], variance in [0, A*dt].
    #[test]
    fn ou_transition_shape(
        drift in 0.0..5.0f64,
        diff in 0.0..5.0f64,
        dt in 1e-6..2.0f64,
    ) {
        let p = OuParams::new(drift, diff);
        let (decay, var) = transition(&p, dt);
        prop_assert!(decay > 0.0 && decay <= 1.0);
        prop_assert!(var >= 0.0);
        prop_assert!(var <= diff * dt * (1.0 + 1e-12));
    }

    /// Pairwise summation agrees with naive summation to accumulated
    /// round-off, and the two-pass variance matches its definition.
    #[test]
    fn pairwise_sum_matches_naive(xs in prop::collection::vec(-1e3..1e3f64, 0..200)) {
        let naive: f64 = xs.iter().sum();
        let abs: f64 = xs.iter().map(|v| v.abs()).sum();
        prop_assert!((pairwise_sum(&xs) - naive).abs() <= 1e-9 * (abs + 1.0));
        if xs.len() >= 2 {
            let (m, v) = mean_var(&xs);
            let naive_var =
                xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
            prop_assert!((v - naive_var).abs() <= 1e-9 * (naive_var.abs() + 1.0));
        }
    }

    /// Metric-rate exponents are positive and increasing for every moment
    /// order above one.
    #[test]
    fn metric_exponents_positive_above_one(r in 1.000001..1000.0f64) {
        let e = metric_rate_exponents(r).unwrap();
        prop_assert!(e.lp > 0.0 && e.lp < 1.0 / 20.0);
        prop_assert!(e.bw > 0.0 && e.bw < 1.0 / 14.0);
        prop_assert!(!e.lp_vacuous && !e.bw_vacuous);
        let further = metric_rate_exponents(r + 0.5).unwrap();
        prop_assert!(further.lp > e.lp && further.bw > e.bw);
    }
}
