//! Poisson counts.

use super::{Family, Support};
use crate::error::{Error, Result};
use crate::numerics::rng::StreamRng;
use crate::numerics::special::ln_factorial;
use nalgebra::{DMatrix, DVector};

/// Poisson(lambda); charts `lambda` (primary) and `natural` with
/// theta = ln(lambda).
#[derive(Debug, Clone, Copy)]
pub struct Poisson;

impl Family for Poisson {
    fn name(&self) -> String {
        "poisson".into()
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn charts(&self) -> Vec<&'static str> {
        vec!["lambda", "natural"]
    }

    fn primary_chart(&self) -> &'static str {
        "lambda"
    }

    fn chart_contains(&self, chart: &str, c: &DVector<f64>) -> Result<bool> {
        match chart {
            "lambda" => Ok(c[0] > 0.0),
            "natural" => Ok(true),
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: chart.to_string(),
            }),
        }
    }

    fn to_primary(&self, chart: &str, c: &DVector<f64>) -> Result<DVector<f64>> {
        match chart {
            "lambda" => Ok(c.clone()),
            "natural" => Ok(DVector::from_vec(vec![c[0].exp()])),
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: chart.to_string(),
            }),
        }
    }

    fn from_primary(&self, p: &DVector<f64>, target: &str) -> Result<DVector<f64>> {
        match target {
            "lambda" => Ok(p.clone()),
            "natural" => Ok(DVector::from_vec(vec![p[0].ln()])),
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: target.to_string(),
            }),
        }
    }

    fn jac_to_primary(&self, chart: &str, c: &DVector<f64>) -> Result<DMatrix<f64>> {
        match chart {
            "lambda" => Ok(DMatrix::identity(1, 1)),
            "natural" => Ok(DMatrix::from_element(1, 1, c[0].exp())),
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: chart.to_string(),
            }),
        }
    }

    fn jac_from_primary(&self, p: &DVector<f64>, target: &str) -> Result<DMatrix<f64>> {
        match target {
            "lambda" => Ok(DMatrix::identity(1, 1)),
            "natural" => Ok(DMatrix::from_element(1, 1, 1.0 / p[0])),
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: target.to_string(),
            }),
        }
    }

    fn support(&self) -> Support {
        Support::Counts
    }

    fn in_support(&self, x: f64) -> bool {
        x.is_finite() && x >= 0.0 && x.fract() == 0.0
    }

    fn log_density_primary(&self, p: &DVector<f64>, x: f64) -> f64 {
        let lambda = p[0];
        -lambda + x * lambda.ln() - ln_factorial(x as u64)
    }

    fn score_primary(&self, p: &DVector<f64>, x: f64) -> DVector<f64> {
        DVector::from_vec(vec![x / p[0] - 1.0])
    }

    fn sample_one(&self, p: &DVector<f64>, rng: &mut StreamRng) -> f64 {
        rng.poisson(p[0]) as f64
    }

    fn count_anchor(&self, primaries: &[DVector<f64>]) -> u64 {
        let lambda = primaries.iter().fold(1.0f64, |a, p| a.max(p[0]));
        (lambda + 12.0 * lambda.sqrt() + 30.0).ceil() as u64
    }

    fn analytic_fisher_primary(&self, p: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, 1.0 / p[0]))
    }

    fn fd_scale(&self, chart: &str, coords: &DVector<f64>) -> Result<Vec<f64>> {
        match chart {
            "lambda" => Ok(vec![coords[0]]),
            "natural" => Ok(vec![1.0]),
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: chart.to_string(),
            }),
        }
    }
}
