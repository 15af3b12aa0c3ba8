use super::*;
use crate::divergences::mahalanobis_sq;
use crate::families::by_name;
use crate::fisher::{fisher_information, FisherMethod};
use crate::numerics::rng::StreamRng;
use approx::assert_abs_diff_eq;

fn vecd(v: &[f64]) -> DVector<f64> {
    DVector::from_vec(v.to_vec())
}

fn musigma(mu: f64, sigma: f64) -> ParamPoint {
    ParamPoint::new(vec![mu, sigma], "mu-sigma")
}

#[test]
fn constant_metric_has_zero_christoffel() {
    // The fixed-sigma location family has a flat (constant) metric.
    let fam = by_name("gaussian-mu").unwrap();
    let theta = ParamPoint::new(vec![0.7], "mu");
    let gamma = christoffel(fam.as_ref(), &theta).unwrap();
    assert!(
        gamma.gamma[0][(0, 0)].abs() < 1e-9,
        "{}",
        gamma.gamma[0][(0, 0)]
    );
}

#[test]
fn gaussian_christoffel_matches_closed_form_and_fd_oracle() {
    let fam = by_name("gaussian1d").unwrap();
    let (mu, sigma) = (0.4, 1.7);
    let theta = musigma(mu, sigma);
    let field = christoffel(fam.as_ref(), &theta).unwrap();
    // Closed form for ds^2 = (dmu^2 + 2 dsigma^2)/sigma^2.
    let s3 = sigma * sigma * sigma;
    assert_abs_diff_eq!(field.gamma[0][(0, 1)], -1.0 / s3, epsilon = 1e-10);
    assert_abs_diff_eq!(field.gamma[0][(1, 0)], -1.0 / s3, epsilon = 1e-10);
    assert_abs_diff_eq!(field.gamma[1][(0, 0)], 1.0 / s3, epsilon = 1e-10);
    assert_abs_diff_eq!(field.gamma[1][(1, 1)], -2.0 / s3, epsilon = 1e-10);
    assert!(field.gamma[0][(0, 0)].abs() < 1e-10);
    assert!(field.gamma[0][(1, 1)].abs() < 1e-10);
    assert!(field.gamma[1][(0, 1)].abs() < 1e-10);

    // Two-step finite-difference oracle with Richardson consistency: the
    // metric is differentiated at h and h/2 and extrapolated.
    let metric = |coords: &DVector<f64>| {
        fisher_information(
            fam.as_ref(),
            &ParamPoint {
                coords: coords.clone(),
                chart: "mu-sigma".into(),
            },
            FisherMethod::Analytic,
        )
        .unwrap()
        .matrix
    };
    let h = 1e-3;
    let d_metric = |c: usize, step: f64| {
        let mut up = theta.coords.clone();
        let mut dn = theta.coords.clone();
        up[c] += step;
        dn[c] -= step;
        (metric(&up) - metric(&dn)) / (2.0 * step)
    };
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let gamma_at = |step: f64| {
                    let dg: Vec<DMatrix<f64>> = (0..2).map(|c| d_metric(c, step)).collect();
                    0.5 * (dg[j][(i, k)] + dg[i][(k, j)] - dg[k][(i, j)])
                };
                let oracle = (4.0 * gamma_at(0.5 * h) - gamma_at(h)) / 3.0;
                assert!(
                    (field.gamma[k][(i, j)] - oracle).abs() < 1e-6,
                    "Gamma[{k}][{i}{j}]: {} vs {oracle}",
                    field.gamma[k][(i, j)]
                );
            }
        }
    }
}

#[test]
fn christoffel_is_symmetric_in_lower_indices() {
    let mut r = StreamRng::from_seed(3);
    let fams = [
        by_name("gaussian1d").unwrap(),
        by_name("discrete:3").unwrap(),
    ];
    for fam in &fams {
        for _ in 0..5 {
            let theta = match fam.name().as_str() {
                "gaussian1d" => musigma(-1.0 + 2.0 * r.uniform(), 0.5 + 2.0 * r.uniform()),
                _ => {
                    let a = 0.15 + 0.3 * r.uniform();
                    let b = 0.15 + 0.3 * r.uniform();
                    ParamPoint::new(vec![a, b], "simplex")
                }
            };
            let field = christoffel(fam.as_ref(), &theta).unwrap();
            for k in 0..theta.dim() {
                for i in 0..theta.dim() {
                    for j in 0..theta.dim() {
                        assert!(
                            (field.gamma[k][(i, j)] - field.gamma[k][(j, i)]).abs() < 1e-10,
                            "{} Gamma[{k}] not symmetric",
                            fam.name()
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn zero_velocity_shoots_a_constant_path() {
    let fam = by_name("gaussian1d").unwrap();
    let theta = musigma(0.3, 1.2);
    let path = geodesic_shoot(fam.as_ref(), &theta, &vecd(&[0.0, 0.0]), 64).unwrap();
    assert_eq!(path.length, 0.0);
    for node in &path.nodes {
        assert_eq!(node.theta, theta.coords);
    }
}

#[test]
fn small_mu_shot_has_rao_length_close_to_dmu_over_sigma() {
    let fam = by_name("gaussian1d").unwrap();
    let sigma = 1.4;
    let theta = musigma(0.0, sigma);
    let v = vecd(&[0.01, 0.0]);
    let path = geodesic_shoot(fam.as_ref(), &theta, &v, 256).unwrap();
    let endpoint = &path.nodes.last().unwrap().theta;
    let dmu = (endpoint[0] - 0.0).abs();
    // First-order: the traversed length equals |dmu|/sigma up to the
    // O(dmu^3) curvature correction.
    assert!(
        (path.length - dmu / sigma).abs() < 1e-6,
        "length {} vs {}",
        path.length,
        dmu / sigma
    );
}

#[test]
fn step_doubling_shows_fourth_order_convergence() {
    let fam = by_name("gaussian1d").unwrap();
    let theta = musigma(0.0, 1.0);
    let v = vecd(&[1.0, 0.5]);
    let reference = geodesic_shoot(fam.as_ref(), &theta, &v, 2048).unwrap();
    let end_ref = reference.nodes.last().unwrap().theta.clone();
    let err = |steps: usize| {
        let p = geodesic_shoot(fam.as_ref(), &theta, &v, steps).unwrap();
        (&p.nodes.last().unwrap().theta - &end_ref).norm()
    };
    let e32 = err(32);
    let e64 = err(64);
    let ratio = e32 / e64;
    assert!(
        (8.0..40.0).contains(&ratio),
        "expected ~16x error drop, got {ratio} ({e32} -> {e64})"
    );
}

#[test]
fn shot_paths_satisfy_the_geodesic_equation() {
    let fam = by_name("gaussian1d").unwrap();
    let theta = musigma(0.0, 1.0);
    let path = geodesic_shoot(fam.as_ref(), &theta, &vecd(&[0.8, -0.3]), 512).unwrap();
    let residual = path_ode_residual(fam.as_ref(), &path).unwrap();
    // The residual is dominated by the O(h^2) central difference of the
    // node velocities.
    assert!(residual < 1e-4, "ODE residual {residual}");
}

#[test]
fn shooting_out_of_the_domain_reports_exit_time() {
    // The Poisson boundary lambda = 0 sits at finite Rao distance
    // 2 sqrt(lambda), so a fast enough push reaches it inside [0, 1].
    // (The Gaussian sigma = 0 boundary, by contrast, is infinitely far:
    // such shots never exit.)
    let fam = by_name("poisson").unwrap();
    let theta = ParamPoint::new(vec![1.0], "lambda");
    match geodesic_shoot(fam.as_ref(), &theta, &vecd(&[-3.0]), 64) {
        Err(Error::DomainExit { exit_time }) => {
            assert!(exit_time > 0.0 && exit_time <= 1.0, "exit at {exit_time}");
        }
        other => panic!("expected a domain exit, got {other:?}"),
    }
}

#[test]
fn connect_identical_endpoints() {
    let fam = by_name("gaussian1d").unwrap();
    let theta = musigma(1.0, 2.0);
    let path = geodesic_connect(fam.as_ref(), &theta, &theta, 100, 1e-8).unwrap();
    assert_eq!(path.length, 0.0);
    assert_eq!(path.endpoint_residual, 0.0);
}

#[test]
fn gaussian_sigma_only_distance_is_sqrt2_log_ratio() {
    let fam = by_name("gaussian1d").unwrap();
    let a = musigma(0.0, 1.0);
    let b = musigma(0.0, std::f64::consts::E);
    let path = geodesic_connect(fam.as_ref(), &a, &b, 1000, 1e-8).unwrap();
    assert!(path.endpoint_residual < 1e-8);
    assert!(
        (path.length - SQRT_2).abs() < 1e-6,
        "length {}",
        path.length
    );
    let closed = rao_distance_gaussian_hyperbolic((0.0, 1.0), (0.0, std::f64::consts::E)).unwrap();
    assert_abs_diff_eq!(closed, SQRT_2, epsilon = 1e-12);

    assert!(rao_distance_gaussian_hyperbolic((0.0, -1.0), (0.0, 1.0)).is_err());
    assert!(rao_distance_gaussian_hyperbolic((0.0, 1.0), (0.0, 0.0)).is_err());
}

#[test]
fn gaussian_equal_sigma_routes_agree() {
    // Between N(0,1) and N(1,1) the geodesic is a half-plane arc shorter
    // than the straight coordinate segment; both routes see the same
    // geometry.
    let fam = by_name("gaussian1d").unwrap();
    let a = musigma(0.0, 1.0);
    let b = musigma(1.0, 1.0);
    let ode = rao_distance_numeric(fam.as_ref(), &a, &b).unwrap();
    let closed = rao_distance_gaussian_hyperbolic((0.0, 1.0), (1.0, 1.0)).unwrap();
    assert!((ode - closed).abs() < 1e-6, "ode {ode} vs closed {closed}");
    // Analytic value sqrt(2) ln 2 = sqrt(2) arcosh(1.25).
    assert_abs_diff_eq!(closed, SQRT_2 * 2f64.ln(), epsilon = 1e-12);
}

#[test]
fn numeric_and_hyperbolic_routes_agree_on_random_pairs() {
    let fam = by_name("gaussian1d").unwrap();
    let mut r = StreamRng::from_seed(77);
    for _ in 0..10 {
        let a = (
            -3.0 + 6.0 * r.uniform(),
            0.1 * (10.0f64 / 0.1).powf(r.uniform()),
        );
        let b = (
            -3.0 + 6.0 * r.uniform(),
            0.1 * (10.0f64 / 0.1).powf(r.uniform()),
        );
        let ode =
            rao_distance_numeric(fam.as_ref(), &musigma(a.0, a.1), &musigma(b.0, b.1)).unwrap();
        let closed = rao_distance_gaussian_hyperbolic(a, b).unwrap();
        assert!(
            (ode - closed).abs() < 1e-4,
            "pair {a:?} {b:?}: {ode} vs {closed}"
        );
    }
}

#[test]
fn rao_distance_metric_axioms() {
    let fam = by_name("gaussian1d").unwrap();
    let mut r = StreamRng::from_seed(91);
    // Symmetry and identity.
    for _ in 0..5 {
        let a = musigma(-2.0 + 4.0 * r.uniform(), 0.4 + 2.0 * r.uniform());
        let b = musigma(-2.0 + 4.0 * r.uniform(), 0.4 + 2.0 * r.uniform());
        let d_ab = rao_distance_numeric(fam.as_ref(), &a, &b).unwrap();
        let d_ba = rao_distance_numeric(fam.as_ref(), &b, &a).unwrap();
        assert!((d_ab - d_ba).abs() < 1e-6, "{d_ab} vs {d_ba}");
        assert_eq!(rao_distance_numeric(fam.as_ref(), &a, &a).unwrap(), 0.0);
    }
    // Triangle inequality on random triples via the closed form (the two
    // routes agree to 1e-4, and the closed form is exact).
    for _ in 0..30 {
        let p = (-2.0 + 4.0 * r.uniform(), 0.3 + 2.0 * r.uniform());
        let q = (-2.0 + 4.0 * r.uniform(), 0.3 + 2.0 * r.uniform());
        let s = (-2.0 + 4.0 * r.uniform(), 0.3 + 2.0 * r.uniform());
        let d = |x: (f64, f64), y: (f64, f64)| rao_distance_gaussian_hyperbolic(x, y).unwrap();
        assert!(d(p, s) <= d(p, q) + d(q, s) + 1e-6);
    }
}

#[test]
fn connected_paths_have_constant_speed() {
    let fam = by_name("gaussian1d").unwrap();
    let a = musigma(0.0, 0.5);
    let b = musigma(2.0, 3.0);
    let path = geodesic_connect(fam.as_ref(), &a, &b, 500, 1e-8).unwrap();
    let speeds = path.speeds(fam.as_ref()).unwrap();
    let mean: f64 = speeds.iter().sum::<f64>() / speeds.len() as f64;
    for s in &speeds {
        assert!(
            (s - mean).abs() <= 0.01 * mean,
            "speed {s} deviates from {mean}"
        );
    }
}

#[test]
fn connect_works_in_the_natural_chart() {
    // The warm start is pushed through the chart transition.
    let fam = by_name("gaussian1d").unwrap();
    let a = crate::families::reparameterize(fam.as_ref(), &musigma(0.0, 1.0), "natural").unwrap();
    let b = crate::families::reparameterize(fam.as_ref(), &musigma(0.5, 1.5), "natural").unwrap();
    let path = geodesic_connect(fam.as_ref(), &a, &b, 800, 1e-8).unwrap();
    let closed = rao_distance_gaussian_hyperbolic((0.0, 1.0), (0.5, 1.5)).unwrap();
    assert!(
        (path.length - closed).abs() < 1e-4,
        "{} vs {closed}",
        path.length
    );
}

#[test]
fn poisson_distance_has_a_closed_form() {
    // ds = d lambda / sqrt(lambda): distance = 2 |sqrt(l2) - sqrt(l1)|.
    let fam = by_name("poisson").unwrap();
    let a = ParamPoint::new(vec![1.0], "lambda");
    let b = ParamPoint::new(vec![4.0], "lambda");
    let d = rao_distance_numeric(fam.as_ref(), &a, &b).unwrap();
    assert!((d - 2.0).abs() < 1e-6, "distance {d}");
}

#[test]
fn mismatched_endpoint_charts_are_rejected() {
    let fam = by_name("gaussian1d").unwrap();
    let a = musigma(0.0, 1.0);
    let b = ParamPoint::new(vec![0.0, 1.0], "mu-sigmasq");
    assert!(geodesic_connect(fam.as_ref(), &a, &b, 100, 1e-8).is_err());
}

#[test]
fn e_and_m_geodesics_are_distinct_interpolations() {
    let spec = expfam::by_name("poisson").unwrap();
    let t1 = vecd(&[2f64.ln()]);
    let t2 = vecd(&[8f64.ln()]);
    // e-midpoint in theta: log 4.
    let mid = e_geodesic(spec.as_ref(), &t1, &t2, 0.5).unwrap();
    assert_abs_diff_eq!(mid[0], 4f64.ln(), epsilon = 1e-14);
    // m-midpoint in eta: 5, not the e-midpoint's lambda = 4.
    let e1 = vecd(&[2.0]);
    let e2 = vecd(&[8.0]);
    let mid_m = m_geodesic(spec.as_ref(), &e1, &e2, 0.5).unwrap();
    assert_abs_diff_eq!(mid_m[0], 5.0, epsilon = 1e-14);
    // Endpoints are returned exactly.
    assert_eq!(e_geodesic(spec.as_ref(), &t1, &t2, 0.0).unwrap(), t1);
    assert_eq!(e_geodesic(spec.as_ref(), &t1, &t2, 1.0).unwrap(), t2);
    assert_eq!(m_geodesic(spec.as_ref(), &e1, &e2, 0.0).unwrap(), e1);
    assert!(e_geodesic(spec.as_ref(), &t1, &t2, 1.5).is_err());
}

#[test]
fn e_curve_is_not_affine_in_expectation_coordinates() {
    let spec = expfam::by_name("gaussian1d").unwrap();
    let t1 = vecd(&[0.0, -0.5]);
    let t2 = vecd(&[1.0, -0.125]);
    let eta1 = expfam::to_expectation(spec.as_ref(), &t1).unwrap();
    let eta2 = expfam::to_expectation(spec.as_ref(), &t2).unwrap();
    let mid_theta = e_geodesic(spec.as_ref(), &t1, &t2, 0.5).unwrap();
    let eta_of_mid = expfam::to_expectation(spec.as_ref(), &mid_theta).unwrap();
    let eta_midpoint = 0.5 * (&eta1 + &eta2);
    assert!(
        (&eta_of_mid - &eta_midpoint).norm() > 1e-3,
        "e-curve unexpectedly affine in eta"
    );
    // The m-geodesic is affine in eta by construction.
    let mid_m = m_geodesic(spec.as_ref(), &eta1, &eta2, 0.5).unwrap();
    assert!((mid_m - eta_midpoint).norm() < 1e-15);
}

#[test]
fn dual_paths_report_positive_length() {
    let spec = expfam::by_name("poisson").unwrap();
    let e_path = dual_geodesic_path(
        spec.as_ref(),
        &vecd(&[2f64.ln()]),
        &vecd(&[8f64.ln()]),
        64,
        GeodesicKind::EGeodesic,
    )
    .unwrap();
    let m_path = dual_geodesic_path(
        spec.as_ref(),
        &vecd(&[2.0]),
        &vecd(&[8.0]),
        64,
        GeodesicKind::MGeodesic,
    )
    .unwrap();
    // Both exceed the Riemannian distance 2(sqrt 8 - sqrt 2).
    let rao = 2.0 * (8f64.sqrt() - 2f64.sqrt());
    assert!(e_path.length >= rao - 1e-9);
    assert!(m_path.length >= rao - 1e-9);
    assert_eq!(e_path.kind.label(), "e-geodesic");
    assert_eq!(m_path.kind.label(), "m-geodesic");
}

#[test]
fn segment_leaving_a_gap_domain_is_detected() {
    // Contrived spec whose natural domain excludes a band around zero:
    // the segment between -1 and 1 exits at its midpoint.
    struct GapExp;
    impl ExpFam for GapExp {
        fn name(&self) -> String {
            "gap".into()
        }
        fn dim(&self) -> usize {
            1
        }
        fn suff_stat(&self, x: f64) -> DVector<f64> {
            DVector::from_vec(vec![x])
        }
        fn carrier(&self, _x: f64) -> f64 {
            0.0
        }
        fn cumulant(&self, theta: &DVector<f64>) -> f64 {
            0.5 * theta[0] * theta[0]
        }
        fn grad_cumulant(&self, theta: &DVector<f64>) -> DVector<f64> {
            theta.clone()
        }
        fn hess_cumulant(&self, _theta: &DVector<f64>) -> DMatrix<f64> {
            DMatrix::identity(1, 1)
        }
        fn in_natural_domain(&self, theta: &DVector<f64>) -> bool {
            theta[0].abs() > 0.5
        }
        fn in_expectation_domain(&self, eta: &DVector<f64>) -> bool {
            eta[0].abs() > 0.5
        }
        fn newton_start(&self, eta: &DVector<f64>) -> DVector<f64> {
            eta.clone()
        }
        fn family(&self) -> std::sync::Arc<dyn Family> {
            crate::families::by_name("gaussian-mu").expect("builtin")
        }
    }
    let spec = GapExp;
    let a = vecd(&[-1.0]);
    let b = vecd(&[1.0]);
    assert!(matches!(
        e_geodesic(&spec, &a, &b, 0.5),
        Err(Error::DomainExit { .. })
    ));
    assert!(e_geodesic(&spec, &a, &b, 0.1).is_ok());
}

#[test]
fn cosine_residual_vanishes_on_random_triples() {
    let mut r = StreamRng::from_seed(19);
    let poisson = expfam::by_name("poisson").unwrap();
    let gaussian = expfam::by_name("gaussian1d").unwrap();
    for _ in 0..50 {
        let triple: Vec<DVector<f64>> = (0..3).map(|_| vecd(&[-1.0 + 3.0 * r.uniform()])).collect();
        let res = cosine_residual(poisson.as_ref(), &triple[0], &triple[1], &triple[2]).unwrap();
        assert!(res < 1e-8, "poisson residual {res}");
    }
    for _ in 0..50 {
        let triple: Vec<DVector<f64>> = (0..3)
            .map(|_| vecd(&[-2.0 + 4.0 * r.uniform(), -2.0 + 1.8 * r.uniform()]))
            .collect();
        let res = cosine_residual(gaussian.as_ref(), &triple[0], &triple[1], &triple[2]).unwrap();
        assert!(res < 1e-8, "gaussian residual {res}");
    }
    // Degenerate triple: both sides are zero.
    let q = vecd(&[0.3, -0.7]);
    let r_pt = vecd(&[0.8, -0.4]);
    assert!(cosine_residual(gaussian.as_ref(), &q, &q, &r_pt).unwrap() < 1e-12);
}

#[test]
fn orthogonal_construction_recovers_pythagoras() {
    // Pick a theta-direction u and an eta-direction I(q) v with
    // u^T I(q) v = 0; the flat divergence then adds exactly.
    let spec = expfam::by_name("gaussian1d").unwrap();
    let mut r = StreamRng::from_seed(29);
    for _ in 0..20 {
        let q = vecd(&[-1.0 + 2.0 * r.uniform(), -1.5 + 1.2 * r.uniform()]);
        let info = spec.hess_cumulant(&q);
        let u = vecd(&[0.3 + r.uniform(), -0.5 + r.uniform()]);
        // v perpendicular to I(q) u makes u^T I(q) v = 0.
        let iu = &info * &u;
        let v = vecd(&[-iu[1], iu[0]]);
        let s = 0.2 + 0.3 * r.uniform();
        let t = 0.2 + 0.3 * r.uniform();

        let p = &q + s * &u;
        let eta_q = expfam::to_expectation(spec.as_ref(), &q).unwrap();
        let eta_r = &eta_q + t * (&info * &v);
        if !spec.in_natural_domain(&p) || !spec.in_expectation_domain(&eta_r) {
            continue;
        }
        let r_pt = expfam::to_natural(spec.as_ref(), &eta_r).unwrap();

        let residual = cosine_residual(spec.as_ref(), &p, &q, &r_pt).unwrap();
        assert!(residual < 1e-8, "cosine residual {residual}");
        let d = |a: &DVector<f64>, b: &DVector<f64>| expfam::bregman(spec.as_ref(), a, b).unwrap();
        let pythagoras = (d(&p, &q) + d(&q, &r_pt) - d(&p, &r_pt)).abs();
        assert!(pythagoras < 1e-8, "pythagorean defect {pythagoras}");
    }
}

#[test]
fn tangent_embedding_matches_quadratic_form() {
    let mut r = StreamRng::from_seed(31);
    let at = musigma(0.0, 1.0);
    for _ in 0..100 {
        let d = 1 + (r.next_u64() % 5) as usize;
        let b = DMatrix::from_fn(d, d, |_, _| -1.0 + 2.0 * r.uniform());
        let m = &b.transpose() * &b + DMatrix::identity(d, d) * (0.05 + r.uniform());
        let m = 0.5 * (&m + m.transpose());
        let metric = MetricTensor::new(at.clone(), m.clone(), "test", 0.0).unwrap();
        let p = DVector::from_fn(d, |_, _| -2.0 + 4.0 * r.uniform());
        let q = DVector::from_fn(d, |_, _| -2.0 + 4.0 * r.uniform());
        let embedded = tangent_embed(&metric, &p, &q).unwrap();
        let direct = mahalanobis_sq(&m, &p, &q).unwrap();
        assert!(
            (embedded - direct).abs() < 1e-12 * direct.max(1.0),
            "{embedded} vs {direct}"
        );
        assert_eq!(tangent_embed(&metric, &p, &p).unwrap(), 0.0);
    }
    // Identity metric reduces to the squared Euclidean distance.
    let metric = MetricTensor::new(at, DMatrix::identity(2, 2), "test", 0.0).unwrap();
    let p = vecd(&[1.0, 2.0]);
    let q = vecd(&[4.0, 6.0]);
    assert_abs_diff_eq!(
        tangent_embed(&metric, &p, &q).unwrap(),
        25.0,
        epsilon = 1e-12
    );
}
