//! Finite discrete (categorical) family on the alphabet {1, ..., m}.

use super::{Family, Support};
use crate::error::{Error, Result};
use crate::numerics::rng::StreamRng;
use nalgebra::{DMatrix, DVector};

/// Categorical distribution on m letters, parameterized by the first m-1
/// probabilities (open simplex interior).
///
/// Charts: `simplex` (primary) and `natural` with
/// theta_i = ln(p_i / p_m) for i < m.
#[derive(Debug, Clone, Copy)]
pub struct FiniteDiscrete {
    m: usize,
}

impl FiniteDiscrete {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!(
                "alphabet needs at least 2 letters, got {m}"
            )));
        }
        Ok(FiniteDiscrete { m })
    }

    pub fn alphabet_size(&self) -> usize {
        self.m
    }

    /// Full probability vector (p_1, ..., p_m) from simplex coordinates.
    pub fn full_probs(&self, simplex: &DVector<f64>) -> Vec<f64> {
        let mut probs: Vec<f64> = simplex.iter().copied().collect();
        probs.push(1.0 - simplex.sum());
        probs
    }
}

impl Family for FiniteDiscrete {
    fn name(&self) -> String {
        format!("discrete:{}", self.m)
    }

    fn param_dim(&self) -> usize {
        self.m - 1
    }

    fn charts(&self) -> Vec<&'static str> {
        vec!["simplex", "natural"]
    }

    fn primary_chart(&self) -> &'static str {
        "simplex"
    }

    fn chart_contains(&self, chart: &str, c: &DVector<f64>) -> Result<bool> {
        match chart {
            "simplex" => Ok(c.iter().all(|&q| q > 0.0) && c.sum() < 1.0),
            "natural" => Ok(true),
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: chart.to_string(),
            }),
        }
    }

    fn to_primary(&self, chart: &str, c: &DVector<f64>) -> Result<DVector<f64>> {
        match chart {
            "simplex" => Ok(c.clone()),
            "natural" => {
                // Stabilized softmax against the implicit last letter (theta_m = 0).
                let top = c.iter().fold(0.0f64, |a, &t| a.max(t));
                let denom: f64 = (-top).exp() + c.iter().map(|&t| (t - top).exp()).sum::<f64>();
                Ok(DVector::from_iterator(
                    self.m - 1,
                    c.iter().map(|&t| (t - top).exp() / denom),
                ))
            }
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: chart.to_string(),
            }),
        }
    }

    fn from_primary(&self, p: &DVector<f64>, target: &str) -> Result<DVector<f64>> {
        match target {
            "simplex" => Ok(p.clone()),
            "natural" => {
                let last = 1.0 - p.sum();
                Ok(DVector::from_iterator(
                    self.m - 1,
                    p.iter().map(|&q| (q / last).ln()),
                ))
            }
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: target.to_string(),
            }),
        }
    }

    fn jac_to_primary(&self, chart: &str, c: &DVector<f64>) -> Result<DMatrix<f64>> {
        match chart {
            "simplex" => Ok(DMatrix::identity(self.m - 1, self.m - 1)),
            "natural" => {
                let p = self.to_primary(chart, c)?;
                // Softmax Jacobian: dp_i/dtheta_j = p_i (delta_ij - p_j).
                Ok(DMatrix::from_fn(self.m - 1, self.m - 1, |i, j| {
                    p[i] * (if i == j { 1.0 } else { 0.0 } - p[j])
                }))
            }
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: chart.to_string(),
            }),
        }
    }

    fn jac_from_primary(&self, p: &DVector<f64>, target: &str) -> Result<DMatrix<f64>> {
        match target {
            "simplex" => Ok(DMatrix::identity(self.m - 1, self.m - 1)),
            "natural" => {
                let last = 1.0 - p.sum();
                Ok(DMatrix::from_fn(self.m - 1, self.m - 1, |i, j| {
                    (if i == j { 1.0 / p[i] } else { 0.0 }) + 1.0 / last
                }))
            }
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: target.to_string(),
            }),
        }
    }

    fn support(&self) -> Support {
        Support::Alphabet(self.m)
    }

    fn in_support(&self, x: f64) -> bool {
        x.is_finite() && x.fract() == 0.0 && x >= 1.0 && x <= self.m as f64
    }

    fn log_density_primary(&self, p: &DVector<f64>, x: f64) -> f64 {
        let j = x as usize;
        if j < self.m {
            p[j - 1].ln()
        } else {
            (1.0 - p.sum()).ln()
        }
    }

    fn score_primary(&self, p: &DVector<f64>, x: f64) -> DVector<f64> {
        let j = x as usize;
        let last = 1.0 - p.sum();
        DVector::from_fn(self.m - 1, |i, _| {
            if j < self.m {
                if i == j - 1 {
                    1.0 / p[i]
                } else {
                    0.0
                }
            } else {
                -1.0 / last
            }
        })
    }

    fn sample_one(&self, p: &DVector<f64>, rng: &mut StreamRng) -> f64 {
        let probs = self.full_probs(p);
        (rng.categorical(&probs) + 1) as f64
    }

    fn analytic_fisher_primary(&self, p: &DVector<f64>) -> Option<DMatrix<f64>> {
        let last = 1.0 - p.sum();
        Some(DMatrix::from_fn(self.m - 1, self.m - 1, |i, j| {
            (if i == j { 1.0 / p[i] } else { 0.0 }) + 1.0 / last
        }))
    }

    fn fd_scale(&self, chart: &str, coords: &DVector<f64>) -> Result<Vec<f64>> {
        match chart {
            // Both the coordinate itself and the implicit last probability
            // bound how far the stencil may reach.
            "simplex" => {
                let last = 1.0 - coords.sum();
                Ok(coords.iter().map(|&q| q.min(last)).collect())
            }
            "natural" => Ok(vec![1.0; self.m - 1]),
            _ => Err(Error::UnknownChart {
                family: self.name(),
                chart: chart.to_string(),
            }),
        }
    }
}
