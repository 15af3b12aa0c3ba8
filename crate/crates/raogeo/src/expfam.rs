//! Canonical exponential families: cumulant functions, dual coordinates,
//! Legendre conjugation, Bregman divergences, and the closed-form MLE.
//!
//! A member has density `p_theta(x) = exp(theta . t(x) - F(theta) + k(x))`
//! with sufficient statistic `t`, carrier `k`, and strictly convex cumulant
//! `F` on the natural domain. The expectation parameter is
//! `eta = E[t(X)] = grad F(theta)`; Legendre duality supplies the inverse
//! map and the conjugate potential `F*`.

use crate::error::{Error, Result};
use crate::families::{self, Family, ParamPoint, SampleBatch};
use crate::numerics::linalg;
use crate::numerics::special::ln_factorial;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_7;

/// A canonical exponential family.
pub trait ExpFam: Send + Sync {
    fn name(&self) -> String;
    fn dim(&self) -> usize;
    /// Sufficient statistic t(x).
    fn suff_stat(&self, x: f64) -> DVector<f64>;
    /// Carrier measure k(x).
    fn carrier(&self, x: f64) -> f64;
    /// Cumulant (log-normalizer) F(theta).
    fn cumulant(&self, theta: &DVector<f64>) -> f64;
    fn grad_cumulant(&self, theta: &DVector<f64>) -> DVector<f64>;
    fn hess_cumulant(&self, theta: &DVector<f64>) -> DMatrix<f64>;
    fn in_natural_domain(&self, theta: &DVector<f64>) -> bool;
    /// Interior of the range of grad F.
    fn in_expectation_domain(&self, eta: &DVector<f64>) -> bool;
    /// Starting iterate for the Newton inversion of grad F; deliberately
    /// crude so the solver does real work.
    fn newton_start(&self, eta: &DVector<f64>) -> DVector<f64>;
    /// The sampling-side view of the same family.
    fn family(&self) -> Arc<dyn Family>;
    /// Chart of [`Self::family`] whose coordinates are the natural
    /// parameters.
    fn natural_chart(&self) -> &'static str {
        "natural"
    }
}

/// A parameter point in both coordinate systems, `eta = grad F(theta)`.
#[derive(Debug, Clone)]
pub struct DualPoint {
    pub theta: DVector<f64>,
    pub eta: DVector<f64>,
}

/// Look up the exponential-family view of a built-in family.
pub fn by_name(name: &str) -> Result<Arc<dyn ExpFam>> {
    match name {
        "poisson" => Ok(Arc::new(PoissonExp)),
        "gaussian1d" => Ok(Arc::new(GaussianExp)),
        "gaussian-mu" => Ok(Arc::new(SelfDualExp)),
        _ => {
            if let Some(m) = name.strip_prefix("discrete:") {
                let m: usize = m
                    .parse()
                    .map_err(|_| Error::UnknownFamily(name.to_string()))?;
                Ok(Arc::new(CategoricalExp::new(m)?))
            } else {
                Err(Error::UnknownFamily(name.to_string()))
            }
        }
    }
}

fn check_natural(spec: &dyn ExpFam, theta: &DVector<f64>) -> Result<()> {
    if theta.len() != spec.dim() {
        return Err(Error::Dimension {
            expected: spec.dim(),
            got: theta.len(),
        });
    }
    if !theta.iter().all(|v| v.is_finite()) || !spec.in_natural_domain(theta) {
        return Err(Error::ParameterDomain {
            chart: "natural".into(),
            coords: theta.iter().copied().collect(),
        });
    }
    Ok(())
}

fn check_expectation(spec: &dyn ExpFam, eta: &DVector<f64>) -> Result<()> {
    if eta.len() != spec.dim() {
        return Err(Error::Dimension {
            expected: spec.dim(),
            got: eta.len(),
        });
    }
    if !eta.iter().all(|v| v.is_finite()) || !spec.in_expectation_domain(eta) {
        return Err(Error::ParameterDomain {
            chart: "expectation".into(),
            coords: eta.iter().copied().collect(),
        });
    }
    Ok(())
}

/// eta = grad F(theta).
pub fn to_expectation(spec: &dyn ExpFam, theta: &DVector<f64>) -> Result<DVector<f64>> {
    check_natural(spec, theta)?;
    Ok(spec.grad_cumulant(theta))
}

/// Newton solver settings for inverting grad F.
#[derive(Debug, Clone, Copy)]
pub struct NewtonCfg {
    /// Convergence once `|grad F(theta) - eta| <= tol * (1 + |eta|)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonCfg {
    fn default() -> Self {
        NewtonCfg {
            tol: 1e-12,
            max_iter: 100,
        }
    }
}

/// theta = (grad F)^{-1}(eta) by damped Newton on the strictly convex
/// objective `F(theta) - theta . eta`; backtracks when a step leaves the
/// natural domain or fails to decrease the objective.
pub fn to_natural(spec: &dyn ExpFam, eta: &DVector<f64>) -> Result<DVector<f64>> {
    to_natural_with(spec, eta, NewtonCfg::default())
}

pub fn to_natural_with(
    spec: &dyn ExpFam,
    eta: &DVector<f64>,
    cfg: NewtonCfg,
) -> Result<DVector<f64>> {
    check_expectation(spec, eta)?;
    let mut theta = spec.newton_start(eta);
    let mut objective = spec.cumulant(&theta) - theta.dot(eta);
    for iter in 0..cfg.max_iter {
        let grad = spec.grad_cumulant(&theta) - eta;
        let residual = grad.norm();
        if residual <= cfg.tol * (1.0 + eta.norm()) {
            return Ok(theta);
        }
        let hess = spec.hess_cumulant(&theta);
        let step = linalg::spd_solve(&hess, &grad)?;
        let slope = grad.dot(&step);
        let mut lambda = 1.0f64;
        loop {
            let cand = &theta - lambda * &step;
            if spec.in_natural_domain(&cand) {
                let cand_obj = spec.cumulant(&cand) - cand.dot(eta);
                let cand_res = (spec.grad_cumulant(&cand) - eta).norm();
                // Armijo on the objective globalizes far from the solution;
                // near it the true decrease drops below the objective's
                // floating-point resolution, so a shrinking residual norm
                // is accepted as progress instead.
                let armijo = cand_obj <= objective - 1e-4 * lambda * slope;
                let res_drop = cand_res <= (1.0 - 0.25 * lambda) * residual;
                if cand_obj.is_finite() && (armijo || res_drop) {
                    theta = cand;
                    objective = cand_obj;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-14 {
                return Err(Error::Solver {
                    iterations: iter,
                    residual,
                });
            }
        }
    }
    Err(Error::Solver {
        iterations: cfg.max_iter,
        residual: (spec.grad_cumulant(&theta) - eta).norm(),
    })
}

/// Legendre conjugate `F*(eta) = max_theta theta . eta - F(theta)`,
/// evaluated at the maximizer `theta = (grad F)^{-1}(eta)`.
pub fn legendre_conjugate(spec: &dyn ExpFam, eta: &DVector<f64>) -> Result<f64> {
    let theta = to_natural(spec, eta)?;
    Ok(theta.dot(eta) - spec.cumulant(&theta))
}

/// Bregman divergence
/// `B_F(theta2 : theta1) = F(theta2) - F(theta1) - (theta2 - theta1) . grad F(theta1)`.
pub fn bregman(spec: &dyn ExpFam, theta2: &DVector<f64>, theta1: &DVector<f64>) -> Result<f64> {
    check_natural(spec, theta2)?;
    check_natural(spec, theta1)?;
    Ok(spec.cumulant(theta2)
        - spec.cumulant(theta1)
        - (theta2 - theta1).dot(&spec.grad_cumulant(theta1)))
}

/// KL divergence between members as a Bregman divergence on the swapped
/// natural parameters: `KL(p_theta1 : p_theta2) = B_F(theta2 : theta1)`.
pub fn kl_via_bregman(
    spec: &dyn ExpFam,
    theta1: &DVector<f64>,
    theta2: &DVector<f64>,
) -> Result<f64> {
    bregman(spec, theta2, theta1)
}

/// Maximum likelihood: `eta_hat` is exactly the batch mean of t(x), and
/// `theta_hat = (grad F)^{-1}(eta_hat)`.
pub fn mle(spec: &dyn ExpFam, batch: &SampleBatch) -> Result<DualPoint> {
    if batch.points.is_empty() {
        return Err(Error::InvalidArgument("empty sample batch".into()));
    }
    let fam = spec.family();
    let mut mean = DVector::zeros(spec.dim());
    for &x in &batch.points {
        if !fam.in_support(x) {
            return Err(Error::Support(x));
        }
        mean += spec.suff_stat(x);
    }
    mean /= batch.points.len() as f64;
    if !spec.in_expectation_domain(&mean) {
        return Err(Error::Boundary);
    }
    let theta = to_natural(spec, &mean)?;
    Ok(DualPoint { theta, eta: mean })
}

/// Residual of the dual Bregman form of the log density,
/// `log p(x) = -B_{F*}(t(x) : eta) + F*(t(x)) + k(x)`.
///
/// When t(x) sits on the boundary of the expectation domain (every Gaussian
/// observation, the all-zero Poisson statistic) the divergent conjugate
/// terms cancel and the identity is evaluated in its limit form
/// `log p(x) = F*(eta) + (t(x) - eta) . theta + k(x)`.
pub fn log_density_bregman_form(spec: &dyn ExpFam, theta: &DVector<f64>, x: f64) -> Result<f64> {
    check_natural(spec, theta)?;
    if !spec.family().in_support(x) {
        return Err(Error::Support(x));
    }
    let t = spec.suff_stat(x);
    let eta = spec.grad_cumulant(theta);
    let lhs = theta.dot(&t) - spec.cumulant(theta) + spec.carrier(x);
    let fstar_eta = legendre_conjugate(spec, &eta)?;
    let theta_back = to_natural(spec, &eta)?;
    let rhs = if spec.in_expectation_domain(&t) {
        let fstar_t = legendre_conjugate(spec, &t)?;
        let breg_star = fstar_t - fstar_eta - (&t - &eta).dot(&theta_back);
        -breg_star + fstar_t + spec.carrier(x)
    } else {
        fstar_eta + (&t - &eta).dot(&theta_back) + spec.carrier(x)
    };
    Ok((lhs - rhs).abs())
}

/// Numeric log-partition `log integral exp(theta . t(x) + k(x)) dx`,
/// the independent oracle for the cumulant function.
pub fn log_partition_numeric(spec: &dyn ExpFam, theta: &DVector<f64>) -> Result<f64> {
    check_natural(spec, theta)?;
    let fam = spec.family();
    let point = ParamPoint {
        coords: theta.clone(),
        chart: spec.natural_chart().into(),
    };
    let primary = families::to_primary(fam.as_ref(), &point)?;
    let r = families::integrate_over_support(fam.as_ref(), &[primary], &|x| {
        (theta.dot(&spec.suff_stat(x)) + spec.carrier(x)).exp()
    })?;
    Ok(r.value.ln())
}

// ---------------------------------------------------------------------------
// Built-in exponential families
// ---------------------------------------------------------------------------

/// Poisson: t(x) = x, k(x) = -ln x!, F(theta) = exp(theta).
#[derive(Debug, Clone, Copy)]
pub struct PoissonExp;

impl ExpFam for PoissonExp {
    fn name(&self) -> String {
        "poisson".into()
    }

    fn dim(&self) -> usize {
        1
    }

    fn suff_stat(&self, x: f64) -> DVector<f64> {
        DVector::from_vec(vec![x])
    }

    fn carrier(&self, x: f64) -> f64 {
        -ln_factorial(x as u64)
    }

    fn cumulant(&self, theta: &DVector<f64>) -> f64 {
        theta[0].exp()
    }

    fn grad_cumulant(&self, theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![theta[0].exp()])
    }

    fn hess_cumulant(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, theta[0].exp())
    }

    fn in_natural_domain(&self, theta: &DVector<f64>) -> bool {
        theta[0].is_finite()
    }

    fn in_expectation_domain(&self, eta: &DVector<f64>) -> bool {
        eta[0] > 0.0
    }

    fn newton_start(&self, _eta: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![0.0])
    }

    fn family(&self) -> Arc<dyn Family> {
        Arc::new(families::Poisson)
    }
}

/// Univariate Gaussian in natural coordinates
/// theta = (mu/sigma^2, -1/(2 sigma^2)): t(x) = (x, x^2), k(x) = 0,
/// F(theta) = -theta1^2/(4 theta2) + (1/2) ln(-pi/theta2).
#[derive(Debug, Clone, Copy)]
pub struct GaussianExp;

impl ExpFam for GaussianExp {
    fn name(&self) -> String {
        "gaussian1d".into()
    }

    fn dim(&self) -> usize {
        2
    }

    fn suff_stat(&self, x: f64) -> DVector<f64> {
        DVector::from_vec(vec![x, x * x])
    }

    fn carrier(&self, _x: f64) -> f64 {
        0.0
    }

    fn cumulant(&self, th: &DVector<f64>) -> f64 {
        -th[0] * th[0] / (4.0 * th[1]) + 0.5 * (-std::f64::consts::PI / th[1]).ln()
    }

    fn grad_cumulant(&self, th: &DVector<f64>) -> DVector<f64> {
        let (a, b) = (th[0], th[1]);
        DVector::from_vec(vec![
            -a / (2.0 * b),
            a * a / (4.0 * b * b) - 1.0 / (2.0 * b),
        ])
    }

    fn hess_cumulant(&self, th: &DVector<f64>) -> DMatrix<f64> {
        let (a, b) = (th[0], th[1]);
        let off = a / (2.0 * b * b);
        DMatrix::from_row_slice(
            2,
            2,
            &[
                -1.0 / (2.0 * b),
                off,
                off,
                -a * a / (2.0 * b * b * b) + 1.0 / (2.0 * b * b),
            ],
        )
    }

    fn in_natural_domain(&self, th: &DVector<f64>) -> bool {
        th[1] < 0.0
    }

    fn in_expectation_domain(&self, eta: &DVector<f64>) -> bool {
        eta[1] - eta[0] * eta[0] > 0.0
    }

    fn newton_start(&self, _eta: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![0.0, -0.5])
    }

    fn family(&self) -> Arc<dyn Family> {
        Arc::new(families::Gaussian1d)
    }
}

/// Categorical on m letters over the (m-1)-dimensional natural chart
/// theta_i = ln(p_i / p_m): t(j) = indicator vector, k = 0,
/// F(theta) = ln(1 + sum_i exp(theta_i)).
#[derive(Debug, Clone, Copy)]
pub struct CategoricalExp {
    m: usize,
}

impl CategoricalExp {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!(
                "alphabet needs at least 2 letters, got {m}"
            )));
        }
        Ok(CategoricalExp { m })
    }

    fn probs(&self, theta: &DVector<f64>) -> DVector<f64> {
        let top = theta.iter().fold(0.0f64, |a, &t| a.max(t));
        let denom: f64 = (-top).exp() + theta.iter().map(|&t| (t - top).exp()).sum::<f64>();
        DVector::from_iterator(self.m - 1, theta.iter().map(|&t| (t - top).exp() / denom))
    }
}

impl ExpFam for CategoricalExp {
    fn name(&self) -> String {
        format!("discrete:{}", self.m)
    }

    fn dim(&self) -> usize {
        self.m - 1
    }

    fn suff_stat(&self, x: f64) -> DVector<f64> {
        let j = x as usize;
        DVector::from_fn(self.m - 1, |i, _| if i == j - 1 { 1.0 } else { 0.0 })
    }

    fn carrier(&self, _x: f64) -> f64 {
        0.0
    }

    fn cumulant(&self, theta: &DVector<f64>) -> f64 {
        let top = theta.iter().fold(0.0f64, |a, &t| a.max(t));
        top + ((-top).exp() + theta.iter().map(|&t| (t - top).exp()).sum::<f64>()).ln()
    }

    fn grad_cumulant(&self, theta: &DVector<f64>) -> DVector<f64> {
        self.probs(theta)
    }

    fn hess_cumulant(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let p = self.probs(theta);
        DMatrix::from_fn(self.m - 1, self.m - 1, |i, j| {
            p[i] * (if i == j { 1.0 } else { 0.0 } - p[j])
        })
    }

    fn in_natural_domain(&self, theta: &DVector<f64>) -> bool {
        theta.iter().all(|v| v.is_finite())
    }

    fn in_expectation_domain(&self, eta: &DVector<f64>) -> bool {
        eta.iter().all(|&p| p > 0.0) && eta.sum() < 1.0
    }

    fn newton_start(&self, _eta: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.m - 1)
    }

    fn family(&self) -> Arc<dyn Family> {
        Arc::new(families::FiniteDiscrete::new(self.m).expect("m validated"))
    }
}

/// The self-dual family F(theta) = theta^2/2: a unit-variance Gaussian in
/// its location parameter, with t(x) = x and
/// k(x) = -x^2/2 - (1/2) ln(2 pi). Here eta = theta and F* = F.
#[derive(Debug, Clone, Copy)]
pub struct SelfDualExp;

impl ExpFam for SelfDualExp {
    fn name(&self) -> String {
        "gaussian-mu".into()
    }

    fn dim(&self) -> usize {
        1
    }

    fn suff_stat(&self, x: f64) -> DVector<f64> {
        DVector::from_vec(vec![x])
    }

    fn carrier(&self, x: f64) -> f64 {
        -0.5 * x * x - HALF_LN_TWO_PI
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
        theta[0].is_finite()
    }

    fn in_expectation_domain(&self, eta: &DVector<f64>) -> bool {
        eta[0].is_finite()
    }

    fn newton_start(&self, _eta: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![0.0])
    }

    fn family(&self) -> Arc<dyn Family> {
        Arc::new(families::GaussianFixedSigma::new(1.0).expect("sigma is positive"))
    }
}

#[cfg(test)]
mod tests;
