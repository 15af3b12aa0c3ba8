use super::*;
use crate::fisher::{fisher_information, FisherMethod};
use crate::numerics::rng::StreamRng;
use approx::assert_abs_diff_eq;

fn vecd(v: &[f64]) -> DVector<f64> {
    DVector::from_vec(v.to_vec())
}

fn specs() -> Vec<Arc<dyn ExpFam>> {
    vec![
        by_name("poisson").unwrap(),
        by_name("gaussian1d").unwrap(),
        by_name("discrete:4").unwrap(),
        by_name("gaussian-mu").unwrap(),
    ]
}

fn random_natural(spec: &dyn ExpFam, r: &mut StreamRng) -> DVector<f64> {
    match spec.name().as_str() {
        "poisson" => vecd(&[-1.5 + 4.0 * r.uniform()]),
        "gaussian1d" => vecd(&[-2.0 + 4.0 * r.uniform(), -2.0 + 1.9 * r.uniform()]),
        "gaussian-mu" => vecd(&[-3.0 + 6.0 * r.uniform()]),
        _ => DVector::from_fn(spec.dim(), |_, _| -2.0 + 4.0 * r.uniform()),
    }
}

#[test]
fn poisson_expectation_is_lambda() {
    let spec = by_name("poisson").unwrap();
    let eta = to_expectation(spec.as_ref(), &vecd(&[3f64.ln()])).unwrap();
    assert_abs_diff_eq!(eta[0], 3.0, epsilon = 1e-14);
}

#[test]
fn gaussian_standard_normal_moments() {
    // theta = (0, -1/2) is N(0,1): eta = (E[x], E[x^2]) = (0, 1), and the
    // Monte Carlo mean of t(x) agrees within CLT error.
    let spec = by_name("gaussian1d").unwrap();
    let theta = vecd(&[0.0, -0.5]);
    let eta = to_expectation(spec.as_ref(), &theta).unwrap();
    assert_abs_diff_eq!(eta[0], 0.0, epsilon = 1e-14);
    assert_abs_diff_eq!(eta[1], 1.0, epsilon = 1e-14);

    let fam = spec.family();
    let point = ParamPoint::new(vec![0.0, -0.5], "natural");
    let n = 100_000;
    let batch = families::sample(fam.as_ref(), &point, 3, n).unwrap();
    let mut mean = DVector::zeros(2);
    for &x in &batch.points {
        mean += spec.suff_stat(x);
    }
    mean /= n as f64;
    assert!((mean[0] - 0.0).abs() < 4.0 / (n as f64).sqrt());
    // Var(x^2) = 2 under N(0,1).
    assert!((mean[1] - 1.0).abs() < 4.0 * (2.0f64 / n as f64).sqrt());
}

#[test]
fn self_dual_fixed_point() {
    let spec = by_name("gaussian-mu").unwrap();
    let theta = vecd(&[1.7]);
    let eta = to_expectation(spec.as_ref(), &theta).unwrap();
    assert_eq!(eta[0], 1.7);
    let back = to_natural(spec.as_ref(), &eta).unwrap();
    assert_abs_diff_eq!(back[0], 1.7, epsilon = 1e-12);
    let fstar = legendre_conjugate(spec.as_ref(), &vecd(&[2.0])).unwrap();
    assert_abs_diff_eq!(fstar, 2.0, epsilon = 1e-12);
    let b = bregman(spec.as_ref(), &vecd(&[3.0]), &vecd(&[1.0])).unwrap();
    assert_abs_diff_eq!(b, 2.0, epsilon = 1e-12);
}

#[test]
fn poisson_natural_inversion() {
    let spec = by_name("poisson").unwrap();
    let theta = to_natural(spec.as_ref(), &vecd(&[3.0])).unwrap();
    assert_abs_diff_eq!(theta[0], 3f64.ln(), epsilon = 1e-12);
}

#[test]
fn duality_round_trips() {
    let mut r = StreamRng::from_seed(5);
    for spec in specs() {
        for _ in 0..20 {
            let theta = random_natural(spec.as_ref(), &mut r);
            let eta = to_expectation(spec.as_ref(), &theta).unwrap();
            let back = to_natural(spec.as_ref(), &eta).unwrap();
            assert!(
                (&back - &theta).norm() < 1e-8,
                "{}: {:?} -> {:?}",
                spec.name(),
                theta.as_slice(),
                back.as_slice()
            );
            let eta2 = to_expectation(spec.as_ref(), &back).unwrap();
            assert!((&eta2 - &eta).norm() < 1e-8);
        }
    }
}

#[test]
fn expectation_domain_violations() {
    let poi = by_name("poisson").unwrap();
    assert!(matches!(
        to_natural(poi.as_ref(), &vecd(&[-1.0])),
        Err(Error::ParameterDomain { .. })
    ));
    let gauss = by_name("gaussian1d").unwrap();
    // eta2 <= eta1^2 is outside the moment cone.
    assert!(matches!(
        to_natural(gauss.as_ref(), &vecd(&[1.0, 1.0])),
        Err(Error::ParameterDomain { .. })
    ));
}

#[test]
fn newton_cap_yields_solver_error() {
    let spec = by_name("poisson").unwrap();
    let err = to_natural_with(
        spec.as_ref(),
        &vecd(&[5000.0]),
        NewtonCfg {
            tol: 1e-12,
            max_iter: 2,
        },
    );
    assert!(matches!(err, Err(Error::Solver { .. })));
}

#[test]
fn poisson_conjugate_matches_grid_search() {
    // F*(eta) = eta ln eta - eta for F = exp; brute-force maximization of
    // theta*eta - exp(theta) over a grid plus ternary refinement.
    let spec = by_name("poisson").unwrap();
    let eta = 2.0;
    let computed = legendre_conjugate(spec.as_ref(), &vecd(&[eta])).unwrap();

    let g = |theta: f64| theta * eta - theta.exp();
    let mut best_theta = -5.0;
    let mut best = f64::NEG_INFINITY;
    let mut theta = -5.0;
    while theta <= 5.0 {
        if g(theta) > best {
            best = g(theta);
            best_theta = theta;
        }
        theta += 1e-3;
    }
    let (mut lo, mut hi) = (best_theta - 2e-3, best_theta + 2e-3);
    for _ in 0..80 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if g(m1) < g(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let oracle = g(0.5 * (lo + hi));
    assert_abs_diff_eq!(computed, oracle, epsilon = 1e-9);
    assert_abs_diff_eq!(computed, 2.0 * 2f64.ln() - 2.0, epsilon = 1e-12);
}

#[test]
fn biconjugate_recovers_cumulant() {
    // (F*)*(theta) = max_eta theta.eta - F*(eta), with F* evaluated through
    // the Newton inversion; grid + ternary refinement over eta.
    let spec = by_name("poisson").unwrap();
    let theta = 0.7;
    let fstar = |eta: f64| legendre_conjugate(spec.as_ref(), &vecd(&[eta])).unwrap();
    let h = |eta: f64| theta * eta - fstar(eta);
    let mut best_eta = 0.05;
    let mut best = f64::NEG_INFINITY;
    let mut eta = 0.05;
    while eta <= 12.0 {
        if h(eta) > best {
            best = h(eta);
            best_eta = eta;
        }
        eta += 0.05;
    }
    let (mut lo, mut hi) = (best_eta - 0.1, best_eta + 0.1);
    for _ in 0..60 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if h(m1) < h(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let biconj = h(0.5 * (lo + hi));
    assert!(
        (biconj - theta.exp()).abs() < 1e-6,
        "biconjugate {biconj} vs F {}",
        theta.exp()
    );
}

#[test]
fn hessians_of_dual_potentials_are_inverse() {
    // hess F(theta) * hess F*(eta) = Id, with hess F* obtained by finite
    // differences of the Newton-computed gradient map (grad F* = (grad F)^-1).
    let mut r = StreamRng::from_seed(11);
    for spec in specs() {
        let theta = random_natural(spec.as_ref(), &mut r);
        let eta = to_expectation(spec.as_ref(), &theta).unwrap();
        let d = spec.dim();
        let mut hess_star = DMatrix::zeros(d, d);
        for j in 0..d {
            let h = 1e-6 * eta[j].abs().max(1e-2);
            let mut up = eta.clone();
            let mut dn = eta.clone();
            up[j] += h;
            dn[j] -= h;
            let col = (to_natural(spec.as_ref(), &up).unwrap()
                - to_natural(spec.as_ref(), &dn).unwrap())
                / (2.0 * h);
            hess_star.set_column(j, &col);
        }
        let product = spec.hess_cumulant(&theta) * hess_star;
        let err = (&product - DMatrix::identity(d, d)).norm();
        assert!(err < 1e-6, "{}: |HF HF* - I| = {err}", spec.name());
    }
}

#[test]
fn bregman_zero_iff_equal() {
    let spec = by_name("gaussian1d").unwrap();
    let theta = vecd(&[0.5, -0.8]);
    assert_eq!(bregman(spec.as_ref(), &theta, &theta).unwrap(), 0.0);
    let other = vecd(&[0.6, -0.8]);
    assert!(bregman(spec.as_ref(), &other, &theta).unwrap() > 0.0);
}

#[test]
fn poisson_bregman_matches_kl_series() {
    // B_F(theta2 : theta1) = lambda2 - lambda1 - lambda1 ln(lambda2/lambda1)
    // equals KL(p_theta1 : p_theta2), summed term by term.
    let spec = by_name("poisson").unwrap();
    let (l1, l2) = (2.0f64, 3.0f64);
    let b = bregman(spec.as_ref(), &vecd(&[l2.ln()]), &vecd(&[l1.ln()])).unwrap();
    assert_abs_diff_eq!(b, l2 - l1 - l1 * (l2 / l1).ln(), epsilon = 1e-12);

    let pmf = |lam: f64, k: u64| {
        (-lam + k as f64 * lam.ln() - crate::numerics::special::ln_factorial(k)).exp()
    };
    let mut series = 0.0;
    for k in 0..200u64 {
        let p = pmf(l1, k);
        if p > 0.0 {
            series += p * (pmf(l1, k) / pmf(l2, k)).ln();
        }
    }
    assert_abs_diff_eq!(b, series, epsilon = 1e-12);
}

#[test]
fn bregman_three_forms_agree() {
    let mut r = StreamRng::from_seed(23);
    for spec in specs() {
        for _ in 0..10 {
            let t1 = random_natural(spec.as_ref(), &mut r);
            let t2 = random_natural(spec.as_ref(), &mut r);
            let e1 = to_expectation(spec.as_ref(), &t1).unwrap();
            let e2 = to_expectation(spec.as_ref(), &t2).unwrap();
            let primal = bregman(spec.as_ref(), &t2, &t1).unwrap();
            // Mixed canonical form C_F(theta2, eta1).
            let mixed =
                spec.cumulant(&t2) + legendre_conjugate(spec.as_ref(), &e1).unwrap() - t2.dot(&e1);
            // Dual form B_{F*}(eta1 : eta2) with grad F* from the solver.
            let dual = legendre_conjugate(spec.as_ref(), &e1).unwrap()
                - legendre_conjugate(spec.as_ref(), &e2).unwrap()
                - (&e1 - &e2).dot(&to_natural(spec.as_ref(), &e2).unwrap());
            assert!(
                (primal - mixed).abs() < 1e-8,
                "{}: primal {primal} mixed {mixed}",
                spec.name()
            );
            assert!(
                (primal - dual).abs() < 1e-8,
                "{}: primal {primal} dual {dual}",
                spec.name()
            );
        }
    }
}

#[test]
fn gaussian_kl_closed_form_via_bregman() {
    // KL(N(0,1) : N(1,1)) = 1/2; the Bregman route on swapped naturals.
    let spec = by_name("gaussian1d").unwrap();
    let t1 = vecd(&[0.0, -0.5]);
    let t2 = vecd(&[1.0, -0.5]);
    let kl = kl_via_bregman(spec.as_ref(), &t1, &t2).unwrap();
    assert_abs_diff_eq!(kl, 0.5, epsilon = 1e-12);

    // General closed form ln(s2/s1) + (s1^2 + (m1-m2)^2)/(2 s2^2) - 1/2.
    let (m1, s1, m2, s2) = (0.3, 0.9, -0.4, 1.7);
    let nat = |mu: f64, s: f64| vecd(&[mu / (s * s), -0.5 / (s * s)]);
    let kl = kl_via_bregman(spec.as_ref(), &nat(m1, s1), &nat(m2, s2)).unwrap();
    let oracle = (s2 / s1).ln() + (s1 * s1 + (m1 - m2) * (m1 - m2)) / (2.0 * s2 * s2) - 0.5;
    assert_abs_diff_eq!(kl, oracle, epsilon = 1e-12);
}

#[test]
fn mle_poisson_batch() {
    let spec = by_name("poisson").unwrap();
    let batch = SampleBatch {
        points: vec![2.0, 4.0],
        family: "poisson".into(),
        theta_star: None,
        seed: 0,
    };
    let fit = mle(spec.as_ref(), &batch).unwrap();
    assert_eq!(fit.eta[0], 3.0);
    assert_abs_diff_eq!(fit.theta[0], 3f64.ln(), epsilon = 1e-12);
}

#[test]
fn mle_gaussian_moments() {
    let spec = by_name("gaussian1d").unwrap();
    let a = 1.5;
    let batch = SampleBatch {
        points: vec![0.0, a, -a],
        family: "gaussian1d".into(),
        theta_star: None,
        seed: 0,
    };
    let fit = mle(spec.as_ref(), &batch).unwrap();
    assert_abs_diff_eq!(fit.eta[0], 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!(fit.eta[1], 2.0 * a * a / 3.0, epsilon = 1e-15);
}

#[test]
fn mle_maximizes_log_likelihood() {
    let spec = by_name("poisson").unwrap();
    let fam = spec.family();
    let batch = SampleBatch {
        points: vec![2.0, 4.0, 1.0, 3.0, 5.0],
        family: "poisson".into(),
        theta_star: None,
        seed: 0,
    };
    let fit = mle(spec.as_ref(), &batch).unwrap();
    let ll_at = |theta: f64| {
        families::log_likelihood(
            fam.as_ref(),
            &ParamPoint::new(vec![theta], "natural"),
            &batch,
        )
        .unwrap()
    };
    let peak = ll_at(fit.theta[0]);
    assert!(peak > ll_at(fit.theta[0] + 1e-3));
    assert!(peak > ll_at(fit.theta[0] - 1e-3));
}

#[test]
fn mle_boundary_statistic_is_rejected() {
    let spec = by_name("poisson").unwrap();
    let batch = SampleBatch {
        points: vec![0.0, 0.0, 0.0],
        family: "poisson".into(),
        theta_star: None,
        seed: 0,
    };
    assert!(matches!(mle(spec.as_ref(), &batch), Err(Error::Boundary)));
}

#[test]
fn log_density_bregman_residuals() {
    let poi = by_name("poisson").unwrap();
    let r = log_density_bregman_form(poi.as_ref(), &vecd(&[2f64.ln()]), 3.0).unwrap();
    assert!(r < 1e-8, "poisson interior residual {r}");
    // x = 0 puts t(x) on the boundary; the limit form still holds.
    let r = log_density_bregman_form(poi.as_ref(), &vecd(&[2f64.ln()]), 0.0).unwrap();
    assert!(r < 1e-8, "poisson boundary residual {r}");

    // Gaussian t(x) = (x, x^2) always sits on the moment-cone boundary.
    let gauss = by_name("gaussian1d").unwrap();
    let r = log_density_bregman_form(gauss.as_ref(), &vecd(&[0.0, -0.5]), 0.5).unwrap();
    assert!(r < 1e-8, "gaussian residual {r}");

    let toy = by_name("gaussian-mu").unwrap();
    let r = log_density_bregman_form(toy.as_ref(), &vecd(&[0.4]), 1.1).unwrap();
    assert!(r < 1e-12, "self-dual residual {r}");
}

#[test]
fn cumulant_matches_numeric_log_partition() {
    let mut r = StreamRng::from_seed(37);
    for spec in specs() {
        for _ in 0..20 {
            let theta = random_natural(spec.as_ref(), &mut r);
            let numeric = log_partition_numeric(spec.as_ref(), &theta).unwrap();
            let exact = spec.cumulant(&theta);
            assert!(
                (numeric - exact).abs() < 1e-8,
                "{} at {:?}: {numeric} vs {exact}",
                spec.name(),
                theta.as_slice()
            );
        }
    }
}

#[test]
fn hess_cumulant_is_natural_chart_fisher() {
    let mut r = StreamRng::from_seed(41);
    for spec in specs() {
        let theta = random_natural(spec.as_ref(), &mut r);
        let fam = spec.family();
        let point = ParamPoint {
            coords: theta.clone(),
            chart: spec.natural_chart().into(),
        };
        let fisher = fisher_information(fam.as_ref(), &point, FisherMethod::ScoreOuter).unwrap();
        let err = (&fisher.matrix - spec.hess_cumulant(&theta)).norm();
        assert!(err < 1e-6, "{}: {err}", spec.name());
    }
}
