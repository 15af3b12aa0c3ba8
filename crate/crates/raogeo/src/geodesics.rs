//! Riemannian machinery for the Fisher-Rao metric: Christoffel symbols,
//! geodesic shooting, two-point boundary solves, and Rao distances; plus
//! the dually flat layer of e/m-geodesics, the generalized law of cosines,
//! and the Cholesky tangent-plane embedding.
//!
//! The geodesic equation `g_ki theta''_i + Gamma_{k,ij} theta'_i theta'_j = 0`
//! is integrated in first-order form with classical fixed-step RK4, solving
//! the SPD metric system for the acceleration at every stage. Two-point
//! problems use single shooting with a damped Newton iteration on the
//! initial velocity, warm-started from the hyperbolic closed form on the
//! Gaussian manifold and from chart-linear interpolation elsewhere.

use crate::error::{Error, Result};
use crate::expfam::{self, ExpFam};
use crate::families::{self, Family, ParamPoint};
use crate::fisher::MetricTensor;
use crate::numerics::linalg;
use nalgebra::{DMatrix, DVector};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Christoffel symbols of the first kind at a point:
/// `gamma[k][(i, j)] = Gamma_{k,ij}`, symmetric in (i, j).
#[derive(Debug, Clone)]
pub struct ChristoffelField {
    pub at: ParamPoint,
    pub gamma: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeodesicKind {
    Riemannian,
    EGeodesic,
    MGeodesic,
}

impl GeodesicKind {
    pub fn label(&self) -> &'static str {
        match self {
            GeodesicKind::Riemannian => "riemannian",
            GeodesicKind::EGeodesic => "e-geodesic",
            GeodesicKind::MGeodesic => "m-geodesic",
        }
    }
}

/// One node of a discretized path.
#[derive(Debug, Clone)]
pub struct PathNode {
    pub t: f64,
    pub theta: DVector<f64>,
    pub velocity: DVector<f64>,
}

/// A discretized curve theta(t), t in [0, 1].
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub family: String,
    pub chart: String,
    pub nodes: Vec<PathNode>,
    /// Riemannian length under the Fisher metric.
    pub length: f64,
    /// Distance of the final node from the requested endpoint (0 for
    /// pure initial-value shots).
    pub endpoint_residual: f64,
    pub kind: GeodesicKind,
}

impl GeodesicPath {
    /// Fisher speed at every node; constant along an affinely
    /// parameterized Riemannian geodesic.
    pub fn speeds(&self, family: &dyn Family) -> Result<Vec<f64>> {
        self.nodes
            .iter()
            .map(|n| {
                let g = metric_at(family, &self.chart, &n.theta)?;
                Ok((n.velocity.dot(&(&g * &n.velocity))).max(0.0).sqrt())
            })
            .collect()
    }
}

/// Fisher matrix in an arbitrary chart, without the construction gate;
/// analytic when the family supplies one, quadrature otherwise.
fn metric_at(family: &dyn Family, chart: &str, coords: &DVector<f64>) -> Result<DMatrix<f64>> {
    let primary = family.to_primary(chart, coords)?;
    if let Some(g) = family.analytic_fisher_primary(&primary) {
        let jac = family.jac_to_primary(chart, coords)?;
        let m = jac.transpose() * g * jac;
        Ok(0.5 * (&m + m.transpose()))
    } else {
        let point = ParamPoint {
            coords: coords.clone(),
            chart: chart.to_string(),
        };
        crate::fisher::fisher_information(family, &point, crate::fisher::FisherMethod::ScoreOuter)
            .map(|m| m.matrix)
    }
}

/// Partial derivatives of the metric, `out[c] = d G / d theta_c`.
///
/// Central differences with one Richardson step; the Gaussian
/// location-scale chart takes the closed form.
fn metric_derivatives(
    family: &dyn Family,
    chart: &str,
    coords: &DVector<f64>,
) -> Result<Vec<DMatrix<f64>>> {
    if family.name() == "gaussian1d" && chart == "mu-sigma" {
        let s = coords[1];
        let zero = DMatrix::zeros(2, 2);
        let mut dsigma = DMatrix::zeros(2, 2);
        dsigma[(0, 0)] = -2.0 / (s * s * s);
        dsigma[(1, 1)] = -4.0 / (s * s * s);
        return Ok(vec![zero, dsigma]);
    }
    let d = coords.len();
    let scales = family.fd_scale(chart, coords)?;
    let mut out = Vec::with_capacity(d);
    for c in 0..d {
        let h = 1e-3 * scales[c];
        for probe in [h, -h, 0.5 * h, -0.5 * h] {
            let mut moved = coords.clone();
            moved[c] += probe;
            if !family.chart_contains(chart, &moved)? {
                return Err(Error::ParameterDomain {
                    chart: chart.to_string(),
                    coords: coords.iter().copied().collect(),
                });
            }
        }
        let central = |step: f64| -> Result<DMatrix<f64>> {
            let mut up = coords.clone();
            let mut dn = coords.clone();
            up[c] += step;
            dn[c] -= step;
            Ok((metric_at(family, chart, &up)? - metric_at(family, chart, &dn)?) / (2.0 * step))
        };
        let coarse = central(h)?;
        let fine = central(0.5 * h)?;
        out.push((fine * 4.0 - coarse) / 3.0);
    }
    Ok(out)
}

/// Christoffel symbols of the first kind,
/// `Gamma_{k,ij} = (1/2)(d_j g_ik + d_i g_kj - d_k g_ij)`.
pub fn christoffel(family: &dyn Family, theta: &ParamPoint) -> Result<ChristoffelField> {
    families::check_point(family, theta)?;
    let dg = metric_derivatives(family, &theta.chart, &theta.coords)?;
    let d = theta.dim();
    let gamma = (0..d)
        .map(|k| {
            DMatrix::from_fn(d, d, |i, j| {
                0.5 * (dg[j][(i, k)] + dg[i][(k, j)] - dg[k][(i, j)])
            })
        })
        .collect();
    Ok(ChristoffelField {
        at: theta.clone(),
        gamma,
    })
}

/// Geodesic acceleration: solves `G theta'' = -Gamma theta' theta'`.
fn acceleration(
    family: &dyn Family,
    chart: &str,
    theta: &DVector<f64>,
    velocity: &DVector<f64>,
) -> Result<DVector<f64>> {
    let d = theta.len();
    let g = metric_at(family, chart, theta)?;
    let dg = metric_derivatives(family, chart, theta)?;
    let mut rhs = DVector::zeros(d);
    for k in 0..d {
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                let gamma_kij = 0.5 * (dg[j][(i, k)] + dg[i][(k, j)] - dg[k][(i, j)]);
                acc += gamma_kij * velocity[i] * velocity[j];
            }
        }
        rhs[k] = -acc;
    }
    linalg::spd_solve(&g, &rhs)
}

fn require_in_chart(family: &dyn Family, chart: &str, coords: &DVector<f64>, t: f64) -> Result<()> {
    if !family.chart_contains(chart, coords)? {
        return Err(Error::DomainExit { exit_time: t });
    }
    Ok(())
}

/// Integrate the geodesic initial-value problem over t in [0, 1] with
/// fixed-step RK4 (`steps` is rounded up to an even count for the Simpson
/// length rule). Exits with [`Error::DomainExit`] if the path leaves the
/// chart domain.
pub fn geodesic_shoot(
    family: &dyn Family,
    theta0: &ParamPoint,
    v0: &DVector<f64>,
    steps: usize,
) -> Result<GeodesicPath> {
    families::check_point(family, theta0)?;
    if v0.len() != theta0.dim() {
        return Err(Error::Dimension {
            expected: theta0.dim(),
            got: v0.len(),
        });
    }
    if steps < 16 {
        return Err(Error::InvalidArgument("need at least 16 steps".into()));
    }
    let steps = steps + steps % 2;
    let chart = theta0.chart.clone();
    let h = 1.0 / steps as f64;

    let mut theta = theta0.coords.clone();
    let mut v = v0.clone();
    let mut nodes = Vec::with_capacity(steps + 1);
    nodes.push(PathNode {
        t: 0.0,
        theta: theta.clone(),
        velocity: v.clone(),
    });

    for step in 0..steps {
        let t = step as f64 * h;
        // RK4 stages on the state (theta, v).
        let stage = |th: &DVector<f64>,
                     vel: &DVector<f64>,
                     at: f64|
         -> Result<(DVector<f64>, DVector<f64>)> {
            require_in_chart(family, &chart, th, at)?;
            Ok((vel.clone(), acceleration(family, &chart, th, vel)?))
        };
        let (k1t, k1v) = stage(&theta, &v, t)?;
        let (k2t, k2v) = stage(
            &(&theta + 0.5 * h * &k1t),
            &(&v + 0.5 * h * &k1v),
            t + 0.5 * h,
        )?;
        let (k3t, k3v) = stage(
            &(&theta + 0.5 * h * &k2t),
            &(&v + 0.5 * h * &k2v),
            t + 0.5 * h,
        )?;
        let (k4t, k4v) = stage(&(&theta + h * &k3t), &(&v + h * &k3v), t + h)?;
        theta += h / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        require_in_chart(family, &chart, &theta, t + h)?;
        nodes.push(PathNode {
            t: (step + 1) as f64 * h,
            theta: theta.clone(),
            velocity: v.clone(),
        });
    }

    let mut path = GeodesicPath {
        family: family.name(),
        chart,
        nodes,
        length: 0.0,
        endpoint_residual: 0.0,
        kind: GeodesicKind::Riemannian,
    };
    path.length = simpson_length(&path.speeds(family)?, h);
    Ok(path)
}

fn simpson_length(speeds: &[f64], h: f64) -> f64 {
    let n = speeds.len() - 1;
    let mut total = speeds[0] + speeds[n];
    for (k, &s) in speeds.iter().enumerate().take(n).skip(1) {
        total += if k % 2 == 1 { 4.0 * s } else { 2.0 * s };
    }
    total * h / 3.0
}

/// Warm-start velocity for the boundary-value problem.
fn initial_velocity(family: &dyn Family, from: &ParamPoint, to: &ParamPoint) -> DVector<f64> {
    if family.name() == "gaussian1d" {
        // Exact tangent from the half-plane model, pushed into the chart.
        let (Ok(a), Ok(b)) = (
            families::reparameterize(family, from, "mu-sigma"),
            families::reparameterize(family, to, "mu-sigma"),
        ) else {
            return &to.coords - &from.coords;
        };
        let v_musigma =
            gaussian_initial_velocity((a.coords[0], a.coords[1]), (b.coords[0], b.coords[1]));
        if from.chart == "mu-sigma" {
            return v_musigma;
        }
        if let Ok(jac) = families::chart_jacobian(family, &a, &from.chart) {
            return jac * v_musigma;
        }
    }
    &to.coords - &from.coords
}

/// Initial velocity of the unit-time Fisher-Rao geodesic between two
/// Gaussians in the (mu, sigma) chart, from the half-plane geometry.
fn gaussian_initial_velocity(a: (f64, f64), b: (f64, f64)) -> DVector<f64> {
    let (x1, y1) = (a.0 / SQRT_2, a.1);
    let (x2, y2) = (b.0 / SQRT_2, b.1);
    let d_hp = half_plane_distance((x1, y1), (x2, y2));
    let v_hp = if (x2 - x1).abs() < 1e-14 * (1.0 + x1.abs()) {
        DVector::from_vec(vec![0.0, (y2 - y1).signum() * d_hp * y1])
    } else {
        let center = (x1 * x1 + y1 * y1 - x2 * x2 - y2 * y2) / (2.0 * (x1 - x2));
        let radius = ((x1 - center) * (x1 - center) + y1 * y1).sqrt();
        let sign = (x2 - x1).signum();
        let tangent = DVector::from_vec(vec![sign * y1 / radius, sign * (center - x1) / radius]);
        tangent * (d_hp * y1)
    };
    DVector::from_vec(vec![SQRT_2 * v_hp[0], v_hp[1]])
}

fn half_plane_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let num = (a.0 - b.0) * (a.0 - b.0) + (a.1 - b.1) * (a.1 - b.1);
    let e = num / (2.0 * a.1 * b.1);
    if e < 1e-8 {
        // acosh(1 + e) loses precision for tiny e.
        (2.0 * e).sqrt() * (1.0 - e / 12.0)
    } else {
        (1.0 + e).acosh()
    }
}

/// Solve the two-point geodesic problem by single shooting: Newton on the
/// initial velocity with a finite-difference Jacobian, damped when a trial
/// leaves the domain or fails to shrink the endpoint residual.
pub fn geodesic_connect(
    family: &dyn Family,
    theta1: &ParamPoint,
    theta2: &ParamPoint,
    steps: usize,
    tol: f64,
) -> Result<GeodesicPath> {
    families::check_point(family, theta1)?;
    families::check_point(family, theta2)?;
    if theta1.chart != theta2.chart {
        return Err(Error::InvalidArgument(format!(
            "endpoints in different charts '{}' and '{}'",
            theta1.chart, theta2.chart
        )));
    }
    let d = theta1.dim();
    if (&theta2.coords - &theta1.coords).norm() == 0.0 {
        let steps = steps.max(16);
        let h = 1.0 / steps as f64;
        let nodes = (0..=steps)
            .map(|k| PathNode {
                t: k as f64 * h,
                theta: theta1.coords.clone(),
                velocity: DVector::zeros(d),
            })
            .collect();
        return Ok(GeodesicPath {
            family: family.name(),
            chart: theta1.chart.clone(),
            nodes,
            length: 0.0,
            endpoint_residual: 0.0,
            kind: GeodesicKind::Riemannian,
        });
    }

    let mut v = initial_velocity(family, theta1, theta2);
    let mut best: Option<(f64, GeodesicPath)> = None;
    let shoot = |vel: &DVector<f64>| geodesic_shoot(family, theta1, vel, steps);

    let mut path = shoot(&v)?;
    let mut residual = (&path.nodes.last().expect("nonempty").theta - &theta2.coords).norm();
    for _ in 0..50 {
        if residual <= tol {
            path.endpoint_residual = residual;
            return Ok(path);
        }
        if best.as_ref().is_none_or(|(r, _)| residual < *r) {
            best = Some((residual, path.clone()));
        }
        // One-sided difference Jacobian of the endpoint map; falls back to
        // the other side when a probe exits the domain.
        let endpoint = path.nodes.last().expect("nonempty").theta.clone();
        let mut jac = DMatrix::zeros(d, d);
        for j in 0..d {
            let delta = 1e-6 * (1.0 + v[j].abs());
            let mut probe_v = v.clone();
            probe_v[j] += delta;
            let (probe_end, signed_delta) = match shoot(&probe_v) {
                Ok(p) => (p.nodes.last().expect("nonempty").theta.clone(), delta),
                Err(_) => {
                    let mut back_v = v.clone();
                    back_v[j] -= delta;
                    let p = shoot(&back_v)?;
                    (p.nodes.last().expect("nonempty").theta.clone(), -delta)
                }
            };
            jac.set_column(j, &((probe_end - &endpoint) / signed_delta));
        }
        let f = endpoint - &theta2.coords;
        let step = jac.lu().solve(&f).ok_or(Error::Solver {
            iterations: 0,
            residual,
        })?;
        let mut lambda = 1.0f64;
        let accepted = loop {
            let trial = &v - lambda * &step;
            if let Ok(p) = shoot(&trial) {
                let r = (&p.nodes.last().expect("nonempty").theta - &theta2.coords).norm();
                if r < residual {
                    break Some((trial, p, r));
                }
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                break None;
            }
        };
        match accepted {
            Some((trial, p, r)) => {
                v = trial;
                path = p;
                residual = r;
            }
            None => {
                return Err(Error::Solver {
                    iterations: 50,
                    residual: best.map_or(residual, |(r, _)| r),
                })
            }
        }
    }
    if residual <= tol {
        path.endpoint_residual = residual;
        return Ok(path);
    }
    Err(Error::Solver {
        iterations: 50,
        residual,
    })
}

/// Rao distance as the length of the connecting geodesic (1000 RK4 steps,
/// endpoint residual 1e-8).
pub fn rao_distance_numeric(
    family: &dyn Family,
    theta1: &ParamPoint,
    theta2: &ParamPoint,
) -> Result<f64> {
    rao_distance_numeric_with(family, theta1, theta2, 1000, 1e-8)
}

pub fn rao_distance_numeric_with(
    family: &dyn Family,
    theta1: &ParamPoint,
    theta2: &ParamPoint,
    steps: usize,
    tol: f64,
) -> Result<f64> {
    geodesic_connect(family, theta1, theta2, steps, tol).map(|p| p.length)
}

/// Closed-form Rao distance between univariate Gaussians `(mu, sigma)`:
/// the manifold is the hyperbolic half-plane up to the scaling
/// `(mu, sigma) -> (mu / sqrt 2, sigma)`, with distances scaled by sqrt 2.
pub fn rao_distance_gaussian_hyperbolic(a: (f64, f64), b: (f64, f64)) -> Result<f64> {
    if !(a.1 > 0.0 && b.1 > 0.0) {
        return Err(Error::ParameterDomain {
            chart: "mu-sigma".into(),
            coords: vec![a.0, a.1, b.0, b.1],
        });
    }
    Ok(SQRT_2 * half_plane_distance((a.0 / SQRT_2, a.1), (b.0 / SQRT_2, b.1)))
}

/// Largest violation of the geodesic equation at the interior nodes,
/// comparing the integrated velocity derivative against the metric
/// acceleration; a diagnostic for shot paths.
pub fn path_ode_residual(family: &dyn Family, path: &GeodesicPath) -> Result<f64> {
    let n = path.nodes.len();
    if n < 3 {
        return Ok(0.0);
    }
    let h = path.nodes[1].t - path.nodes[0].t;
    let mut worst = 0.0f64;
    for k in 1..n - 1 {
        let fd_acc = (&path.nodes[k + 1].velocity - &path.nodes[k - 1].velocity) / (2.0 * h);
        let model = acceleration(
            family,
            &path.chart,
            &path.nodes[k].theta,
            &path.nodes[k].velocity,
        )?;
        worst = worst.max((fd_acc - model).norm());
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Dually flat layer
// ---------------------------------------------------------------------------

fn check_unit_interval(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!(
            "lambda = {lambda} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Point at parameter `lambda` on the e-geodesic: affine in the natural
/// coordinates, `theta = (1 - lambda) theta1 + lambda theta2`.
pub fn e_geodesic(
    spec: &dyn ExpFam,
    theta1: &DVector<f64>,
    theta2: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>> {
    check_unit_interval(lambda)?;
    for theta in [theta1, theta2] {
        if !spec.in_natural_domain(theta) {
            return Err(Error::ParameterDomain {
                chart: "natural".into(),
                coords: theta.iter().copied().collect(),
            });
        }
    }
    let point = (1.0 - lambda) * theta1 + lambda * theta2;
    if !spec.in_natural_domain(&point) {
        return Err(Error::DomainExit { exit_time: lambda });
    }
    Ok(point)
}

/// Point at parameter `lambda` on the m-geodesic: affine in the
/// expectation coordinates, `eta = (1 - lambda) eta1 + lambda eta2`.
pub fn m_geodesic(
    spec: &dyn ExpFam,
    eta1: &DVector<f64>,
    eta2: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>> {
    check_unit_interval(lambda)?;
    for eta in [eta1, eta2] {
        if !spec.in_expectation_domain(eta) {
            return Err(Error::ParameterDomain {
                chart: "expectation".into(),
                coords: eta.iter().copied().collect(),
            });
        }
    }
    let point = (1.0 - lambda) * eta1 + lambda * eta2;
    if !spec.in_expectation_domain(&point) {
        return Err(Error::DomainExit { exit_time: lambda });
    }
    Ok(point)
}

/// Sampled dual geodesic with Riemannian (Fisher) length for reference;
/// e-curves run in natural coordinates, m-curves in expectation
/// coordinates.
pub fn dual_geodesic_path(
    spec: &dyn ExpFam,
    from: &DVector<f64>,
    to: &DVector<f64>,
    steps: usize,
    kind: GeodesicKind,
) -> Result<GeodesicPath> {
    let steps = steps.max(16);
    let steps = steps + steps % 2;
    let h = 1.0 / steps as f64;
    let velocity = to - from;
    let mut nodes = Vec::with_capacity(steps + 1);
    let mut speeds = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let lambda = k as f64 * h;
        let (theta, speed) = match kind {
            GeodesicKind::EGeodesic => {
                let point = e_geodesic(spec, from, to, lambda)?;
                let g = spec.hess_cumulant(&point);
                let s = velocity.dot(&(&g * &velocity)).max(0.0).sqrt();
                (point, s)
            }
            GeodesicKind::MGeodesic => {
                let point = m_geodesic(spec, from, to, lambda)?;
                // Fisher metric in expectation coordinates is the inverse
                // of the natural-chart Hessian at the matching point.
                let theta = expfam::to_natural(spec, &point)?;
                let g = linalg::spd_inverse(&spec.hess_cumulant(&theta))?;
                let s = velocity.dot(&(&g * &velocity)).max(0.0).sqrt();
                (point, s)
            }
            GeodesicKind::Riemannian => {
                return Err(Error::InvalidArgument(
                    "use geodesic_connect for Riemannian paths".into(),
                ))
            }
        };
        nodes.push(PathNode {
            t: lambda,
            theta,
            velocity: velocity.clone(),
        });
        speeds.push(speed);
    }
    Ok(GeodesicPath {
        family: spec.name(),
        chart: match kind {
            GeodesicKind::EGeodesic => "natural".into(),
            _ => "expectation".into(),
        },
        nodes,
        length: simpson_length(&speeds, h),
        endpoint_residual: 0.0,
        kind,
    })
}

/// Residual of the generalized law of cosines at three members given in
/// natural coordinates:
/// `|D(p:q) + D(q:r) - D(p:r) - (theta_p - theta_q).(eta_r - eta_q)|`,
/// where D is the canonical flat divergence `D(a:b) = B_F(theta_a: theta_b)`
/// (the KL divergence with swapped arguments, `KL(b:a)`).
pub fn cosine_residual(
    spec: &dyn ExpFam,
    p: &DVector<f64>,
    q: &DVector<f64>,
    r: &DVector<f64>,
) -> Result<f64> {
    let d = |a: &DVector<f64>, b: &DVector<f64>| expfam::bregman(spec, a, b);
    let lhs = d(p, q)? + d(q, r)? - d(p, r)?;
    let eta_q = expfam::to_expectation(spec, q)?;
    let eta_r = expfam::to_expectation(spec, r)?;
    let rhs = (p - q).dot(&(eta_r - eta_q));
    Ok((lhs - rhs).abs())
}

/// Squared Mahalanobis distance in the tangent plane via the Cholesky
/// embedding: with `I(x) = L L^T`, points map to `L^T p` and the value is
/// the squared Euclidean distance `|L^T (p - q)|^2`.
pub fn tangent_embed(metric: &MetricTensor, p: &DVector<f64>, q: &DVector<f64>) -> Result<f64> {
    if p.len() != metric.dim() || q.len() != metric.dim() {
        return Err(Error::Dimension {
            expected: metric.dim(),
            got: p.len().max(q.len()),
        });
    }
    let l = linalg::cholesky(&metric.matrix)?.l();
    Ok((l.transpose() * (p - q)).norm_squared())
}

#[cfg(test)]
mod tests;
