//! Univariate Gaussian families.

use super::{Family, Support};
use crate::error::{Error, Result};
use crate::numerics::rng::StreamRng;
use nalgebra::{DMatrix, DVector};

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_7;

/// Mass truncation half-width in standard deviations; the excluded tail is
/// below 1e-14 of the total mass.
const TRUNC_SIGMAS: f64 = 12.0;

/// N(mu, sigma^2) with both parameters free.
///
/// Charts: `mu-sigma` (primary), `mu-sigmasq`, and `natural` with
/// theta = (mu/sigma^2, -1/(2 sigma^2)).
#[derive(Debug, Clone, Copy)]
pub struct Gaussian1d;

impl Family for Gaussian1d {
    fn name(&self) -> String {
        "gaussian1d".into()
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn charts(&self) -> Vec<&'static str> {
        vec!["mu-sigma", "mu-sigmasq", "natural"]
    }

    fn primary_chart(&self) -> &'static str {
        "mu-sigma"
    }

    fn chart_contains(&self, chart: &str, c: &DVector<f64>) -> Result<bool> {
        match chart {
            "mu-sigma" => Ok(c[1] > 0.0),
            "mu-sigmasq" => Ok(c[1] > 0.0),
            "natural" => Ok(c[1] < 0.0),
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: chart.to_string(),
            }),
        }
    }

    fn to_primary(&self, chart: &str, c: &DVector<f64>) -> Result<DVector<f64>> {
        match chart {
            "mu-sigma" => Ok(c.clone()),
            "mu-sigmasq" => Ok(DVector::from_vec(vec![c[0], c[1].sqrt()])),
            "natural" => {
                let var = -1.0 / (2.0 * c[1]);
                Ok(DVector::from_vec(vec![c[0] * var, var.sqrt()]))
            }
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: chart.to_string(),
            }),
        }
    }

    fn from_primary(&self, p: &DVector<f64>, target: &str) -> Result<DVector<f64>> {
        let (mu, sigma) = (p[0], p[1]);
        match target {
            "mu-sigma" => Ok(p.clone()),
            "mu-sigmasq" => Ok(DVector::from_vec(vec![mu, sigma * sigma])),
            "natural" => Ok(DVector::from_vec(vec![
                mu / (sigma * sigma),
                -1.0 / (2.0 * sigma * sigma),
            ])),
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: target.to_string(),
            }),
        }
    }

    fn jac_to_primary(&self, chart: &str, c: &DVector<f64>) -> Result<DMatrix<f64>> {
        match chart {
            "mu-sigma" => Ok(DMatrix::identity(2, 2)),
            "mu-sigmasq" => Ok(DMatrix::from_row_slice(
                2,
                2,
                &[1.0, 0.0, 0.0, 0.5 / c[1].sqrt()],
            )),
            "natural" => {
                let p = self.to_primary(chart, c)?;
                let (mu, sigma) = (p[0], p[1]);
                let s2 = sigma * sigma;
                Ok(DMatrix::from_row_slice(
                    2,
                    2,
                    &[s2, 2.0 * mu * s2, 0.0, s2 * sigma],
                ))
            }
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: chart.to_string(),
            }),
        }
    }

    fn jac_from_primary(&self, p: &DVector<f64>, target: &str) -> Result<DMatrix<f64>> {
        let (mu, sigma) = (p[0], p[1]);
        match target {
            "mu-sigma" => Ok(DMatrix::identity(2, 2)),
            "mu-sigmasq" => Ok(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0 * sigma])),
            "natural" => {
                let s2 = sigma * sigma;
                Ok(DMatrix::from_row_slice(
                    2,
                    2,
                    &[1.0 / s2, -2.0 * mu / (s2 * sigma), 0.0, 1.0 / (s2 * sigma)],
                ))
            }
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: target.to_string(),
            }),
        }
    }

    fn support(&self) -> Support {
        Support::Continuous
    }

    fn in_support(&self, x: f64) -> bool {
        x.is_finite()
    }

    fn log_density_primary(&self, p: &DVector<f64>, x: f64) -> f64 {
        let z = (x - p[0]) / p[1];
        -p[1].ln() - HALF_LN_TWO_PI - 0.5 * z * z
    }

    fn score_primary(&self, p: &DVector<f64>, x: f64) -> DVector<f64> {
        let (mu, sigma) = (p[0], p[1]);
        let d = x - mu;
        DVector::from_vec(vec![
            d / (sigma * sigma),
            -1.0 / sigma + d * d / (sigma * sigma * sigma),
        ])
    }

    fn sample_one(&self, p: &DVector<f64>, rng: &mut StreamRng) -> f64 {
        p[0] + p[1] * rng.standard_normal()
    }

    fn quad_interval(&self, primaries: &[DVector<f64>]) -> (f64, f64) {
        gaussian_hull(primaries.iter().map(|p| (p[0], p[1])))
    }

    fn quad_breakpoints(&self, primaries: &[DVector<f64>]) -> Vec<f64> {
        gaussian_breaks(primaries.iter().map(|p| (p[0], p[1])))
    }

    fn analytic_fisher_primary(&self, p: &DVector<f64>) -> Option<DMatrix<f64>> {
        let s2 = p[1] * p[1];
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[1.0 / s2, 0.0, 0.0, 2.0 / s2],
        ))
    }

    fn fd_scale(&self, chart: &str, coords: &DVector<f64>) -> Result<Vec<f64>> {
        match chart {
            "mu-sigma" => Ok(vec![coords[1], coords[1]]),
            "mu-sigmasq" => Ok(vec![coords[1].sqrt(), coords[1]]),
            "natural" => Ok(vec![coords[1].abs(), coords[1].abs()]),
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: chart.to_string(),
            }),
        }
    }
}

fn gaussian_hull(params: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (mu, sigma) in params {
        lo = lo.min(mu - TRUNC_SIGMAS * sigma);
        hi = hi.max(mu + TRUNC_SIGMAS * sigma);
    }
    (lo, hi)
}

fn gaussian_breaks(params: impl Iterator<Item = (f64, f64)>) -> Vec<f64> {
    let mut out = Vec::new();
    for (mu, sigma) in params {
        for k in [0.0, 1.0, 3.0, 6.0, 12.0] {
            out.push(mu - k * sigma);
            out.push(mu + k * sigma);
        }
    }
    out
}

/// N(mu, sigma0^2) with sigma0 a fixed structural constant; a one-parameter
/// subfamily used for location-only estimation experiments. With sigma0 = 1
/// its cumulant function is F(theta) = theta^2 / 2, the self-dual case.
#[derive(Debug, Clone, Copy)]
pub struct GaussianFixedSigma {
    sigma: f64,
}

impl GaussianFixedSigma {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "fixed sigma must be positive, got {sigma}"
            )));
        }
        Ok(GaussianFixedSigma { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

impl Family for GaussianFixedSigma {
    fn name(&self) -> String {
        "gaussian-mu".into()
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn charts(&self) -> Vec<&'static str> {
        vec!["mu", "natural"]
    }

    fn primary_chart(&self) -> &'static str {
        "mu"
    }

    fn chart_contains(&self, chart: &str, _c: &DVector<f64>) -> Result<bool> {
        match chart {
            "mu" | "natural" => Ok(true),
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: chart.to_string(),
            }),
        }
    }

    fn to_primary(&self, chart: &str, c: &DVector<f64>) -> Result<DVector<f64>> {
        match chart {
            "mu" => Ok(c.clone()),
            "natural" => Ok(DVector::from_vec(vec![c[0] * self.sigma * self.sigma])),
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: chart.to_string(),
            }),
        }
    }

    fn from_primary(&self, p: &DVector<f64>, target: &str) -> Result<DVector<f64>> {
        match target {
            "mu" => Ok(p.clone()),
            "natural" => Ok(DVector::from_vec(vec![p[0] / (self.sigma * self.sigma)])),
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: target.to_string(),
            }),
        }
    }

    fn jac_to_primary(&self, chart: &str, _c: &DVector<f64>) -> Result<DMatrix<f64>> {
        match chart {
            "mu" => Ok(DMatrix::identity(1, 1)),
            "natural" => Ok(DMatrix::from_element(1, 1, self.sigma * self.sigma)),
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: chart.to_string(),
            }),
        }
    }

    fn jac_from_primary(&self, _p: &DVector<f64>, target: &str) -> Result<DMatrix<f64>> {
        match target {
            "mu" => Ok(DMatrix::identity(1, 1)),
            "natural" => Ok(DMatrix::from_element(1, 1, 1.0 / (self.sigma * self.sigma))),
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: target.to_string(),
            }),
        }
    }

    fn support(&self) -> Support {
        Support::Continuous
    }

    fn in_support(&self, x: f64) -> bool {
        x.is_finite()
    }

    fn log_density_primary(&self, p: &DVector<f64>, x: f64) -> f64 {
        let z = (x - p[0]) / self.sigma;
        -self.sigma.ln() - HALF_LN_TWO_PI - 0.5 * z * z
    }

    fn score_primary(&self, p: &DVector<f64>, x: f64) -> DVector<f64> {
        DVector::from_vec(vec![(x - p[0]) / (self.sigma * self.sigma)])
    }

    fn sample_one(&self, p: &DVector<f64>, rng: &mut StreamRng) -> f64 {
        p[0] + self.sigma * rng.standard_normal()
    }

    fn quad_interval(&self, primaries: &[DVector<f64>]) -> (f64, f64) {
        gaussian_hull(primaries.iter().map(|p| (p[0], self.sigma)))
    }

    fn quad_breakpoints(&self, primaries: &[DVector<f64>]) -> Vec<f64> {
        gaussian_breaks(primaries.iter().map(|p| (p[0], self.sigma)))
    }

    fn analytic_fisher_primary(&self, _p: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, 1.0 / (self.sigma * self.sigma)))
    }

    fn fd_scale(&self, chart: &str, _coords: &DVector<f64>) -> Result<Vec<f64>> {
        match chart {
            "mu" => Ok(vec![self.sigma]),
            "natural" => Ok(vec![1.0 / self.sigma]),
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: chart.to_string(),
            }),
        }
    }
}
