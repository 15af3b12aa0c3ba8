//! Cramér-Rao lower bounds and Monte Carlo estimator-efficiency reports.
//!
//! The bound: any unbiased estimator of theta from an IID sample of size n
//! has covariance `V >= n^{-1} I^{-1}(theta*)` in the Löwner order. The
//! Monte Carlo harness replays an estimator over R independent replicates
//! (one derived random stream per replicate, reduced in index order, so
//! reports are bit-stable under parallel scheduling) and reports the
//! empirical covariance against the bound.

use crate::error::{Error, Result};
use crate::families::{self, Family, ParamPoint, SampleBatch};
use crate::fisher::{fisher_information, FisherMethod};
use crate::numerics::linalg;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

type EstimatorFn = Box<dyn Fn(&SampleBatch) -> Result<ParamPoint> + Send + Sync>;

/// A point estimator mapping sample batches into a parameter chart.
pub struct Estimator {
    pub name: String,
    pub target_chart: String,
    /// Declared (not verified) unbiasedness; the Monte Carlo report
    /// measures the actual bias.
    pub unbiased_claim: bool,
    pub min_n: usize,
    map: EstimatorFn,
}

impl Estimator {
    pub fn new(
        name: impl Into<String>,
        target_chart: impl Into<String>,
        unbiased_claim: bool,
        min_n: usize,
        map: impl Fn(&SampleBatch) -> Result<ParamPoint> + Send + Sync + 'static,
    ) -> Self {
        Estimator {
            name: name.into(),
            target_chart: target_chart.into(),
            unbiased_claim,
            min_n,
            map: Box::new(map),
        }
    }

    pub fn estimate(&self, batch: &SampleBatch) -> Result<ParamPoint> {
        if batch.points.len() < self.min_n {
            return Err(Error::InvalidArgument(format!(
                "estimator '{}' needs at least {} observations",
                self.name, self.min_n
            )));
        }
        (self.map)(batch)
    }

    /// Sample mean as the parameter estimate; efficient and unbiased for
    /// the one-parameter mean charts (Poisson lambda, fixed-sigma mu).
    pub fn sample_mean(family: &dyn Family) -> Result<Estimator> {
        let chart = mean_chart(family)?;
        Ok(Estimator::new("mean", chart, true, 1, move |batch| {
            let mean = batch.points.iter().sum::<f64>() / batch.points.len() as f64;
            Ok(ParamPoint::new(vec![mean], chart))
        }))
    }

    /// First observation only: unbiased but wildly inefficient (its
    /// variance does not shrink with n), exhibiting strict Löwner
    /// dominance of the bound.
    pub fn first_observation(family: &dyn Family) -> Result<Estimator> {
        let chart = mean_chart(family)?;
        Ok(Estimator::new("first-obs", chart, true, 1, move |batch| {
            Ok(ParamPoint::new(vec![batch.points[0]], chart))
        }))
    }

    /// Ignores the data entirely; unbiased only at the pinned point.
    pub fn constant(point: ParamPoint) -> Estimator {
        let chart = point.chart.clone();
        Estimator::new("constant", chart, false, 1, move |_batch| Ok(point.clone()))
    }

    /// Registry: `mean`, `first-obs`, or `constant:c1,c2,...`.
    pub fn by_name(family: &dyn Family, name: &str) -> Result<Estimator> {
        match name {
            "mean" => Self::sample_mean(family),
            "first-obs" => Self::first_observation(family),
            _ => {
                if let Some(coords) = name.strip_prefix("constant:") {
                    let coords: std::result::Result<Vec<f64>, _> =
                        coords.split(',').map(str::parse).collect();
                    let coords = coords.map_err(|_| {
                        Error::InvalidArgument(format!("bad constant estimator '{name}'"))
                    })?;
                    Ok(Self::constant(ParamPoint::new(
                        coords,
                        family.primary_chart(),
                    )))
                } else {
                    Err(Error::EstimatorMismatch {
                        estimator: name.into(),
                        family: family.name(),
                        why: "unknown estimator".into(),
                    })
                }
            }
        }
    }
}

fn mean_chart(family: &dyn Family) -> Result<&'static str> {
    match family.name().as_str() {
        "poisson" => Ok("lambda"),
        "gaussian-mu" => Ok("mu"),
        other => Err(Error::EstimatorMismatch {
            estimator: "mean".into(),
            family: other.into(),
            why: "the sample mean estimates a one-dimensional mean parameter".into(),
        }),
    }
}

/// The Cramér-Rao matrix `n^{-1} I^{-1}(theta*)` in theta*'s chart.
pub fn crlb(family: &dyn Family, theta_star: &ParamPoint, n: usize) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be >= 1".into()));
    }
    let primary = families::to_primary(family, theta_star)?;
    let method = if family.analytic_fisher_primary(&primary).is_some() {
        FisherMethod::Analytic
    } else {
        FisherMethod::ScoreOuter
    };
    let info = fisher_information(family, theta_star, method)?;
    let inv = linalg::spd_inverse(&info.matrix)?;
    Ok(inv / n as f64)
}

/// Löwner comparison: `a >= b` iff the smallest eigenvalue of `a - b` is
/// at least `-tol`. Both inputs must be symmetric to 1e-12.
pub fn loewner_geq(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> Result<bool> {
    linalg::require_symmetric(a, 1e-12)?;
    linalg::require_symmetric(b, 1e-12)?;
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    let (min, _) = linalg::sym_eig_range(&(a - b));
    Ok(min >= -tol)
}

/// Monte Carlo estimator-efficiency record.
#[derive(Debug, Clone, Serialize)]
pub struct EstimatorReport {
    pub estimator: String,
    pub family: String,
    pub theta_star_coords: Vec<f64>,
    pub theta_star_chart: String,
    pub n: usize,
    pub replicates: usize,
    pub empirical_mean: Vec<f64>,
    /// 1/(R-1)-normalized covariance of the replicate estimates.
    pub empirical_cov: Vec<Vec<f64>>,
    pub crlb_matrix: Vec<Vec<f64>>,
    /// Smallest eigenvalue of `empirical_cov - crlb_matrix`.
    pub loewner_slack: f64,
    /// Monte Carlo standard error of the slack along its eigenvector.
    pub loewner_slack_se: f64,
    pub bias_norm: f64,
    pub seed: u64,
    /// Regularity conditions are asserted, not checked, for the built-ins.
    pub regularity: String,
    pub unbiased_claim: bool,
}

impl EstimatorReport {
    pub fn empirical_cov_matrix(&self) -> DMatrix<f64> {
        rows_to_matrix(&self.empirical_cov)
    }

    pub fn crlb(&self) -> DMatrix<f64> {
        rows_to_matrix(&self.crlb_matrix)
    }
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let d = rows.len();
    DMatrix::from_fn(d, d, |i, j| rows[i][j])
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Run the replicated experiment and keep the per-replicate estimates.
///
/// Deterministic for a fixed seed: replicate r draws from substream
/// `(seed, r)` and the reduction runs in replicate order. Covariance
/// estimates are meaningful from roughly R >= 1000.
pub fn monte_carlo_run(
    family: &dyn Family,
    theta_star: &ParamPoint,
    estimator: &Estimator,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<(EstimatorReport, Vec<DVector<f64>>)> {
    families::check_point(family, theta_star)?;
    if theta_star.chart != estimator.target_chart {
        return Err(Error::EstimatorMismatch {
            estimator: estimator.name.clone(),
            family: family.name(),
            why: format!(
                "estimator targets chart '{}' but theta* is in '{}'",
                estimator.target_chart, theta_star.chart
            ),
        });
    }
    if replicates < 2 {
        return Err(Error::InvalidArgument("need at least 2 replicates".into()));
    }
    let outcomes: Vec<Result<DVector<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let batch = families::sample_substream(family, theta_star, seed, rep as u64, n)?;
            estimator.estimate(&batch).map(|p| p.coords)
        })
        .collect();
    let failed: Vec<usize> = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| o.is_err())
        .map(|(i, _)| i)
        .collect();
    if !failed.is_empty() {
        return Err(Error::ReplicateFailure {
            failed: failed.len(),
            total: replicates,
            indices: failed.into_iter().take(16).collect(),
        });
    }
    let estimates: Vec<DVector<f64>> = outcomes
        .into_iter()
        .map(|o| o.expect("no failures"))
        .collect();

    let d = estimates[0].len();
    let mut mean = DVector::zeros(d);
    for e in &estimates {
        mean += e;
    }
    mean /= replicates as f64;

    let mut cov = DMatrix::zeros(d, d);
    for e in &estimates {
        let centered = e - &mean;
        cov += &centered * centered.transpose();
    }
    cov /= (replicates - 1) as f64;

    let bound = crlb(family, theta_star, n)?;
    let diff = &cov - &bound;
    let (slack, direction) = linalg::min_eigenpair(&diff);

    // Standard error of the covariance quadratic form along the slack
    // eigenvector, from the empirical fourth moment.
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    for e in &estimates {
        let y = direction.dot(&(e - &mean));
        m2 += y * y;
        m4 += y * y * y * y;
    }
    m2 /= replicates as f64;
    m4 /= replicates as f64;
    let slack_se = ((m4 - m2 * m2).max(0.0) / replicates as f64).sqrt();

    let star_primary = families::to_primary(family, theta_star)?;
    let _ = star_primary;
    let bias_norm = (&mean - &theta_star.coords).norm();

    let report = EstimatorReport {
        estimator: estimator.name.clone(),
        family: family.name(),
        theta_star_coords: theta_star.coords.iter().copied().collect(),
        theta_star_chart: theta_star.chart.clone(),
        n,
        replicates,
        empirical_mean: mean.iter().copied().collect(),
        empirical_cov: matrix_to_rows(&cov),
        crlb_matrix: matrix_to_rows(&bound),
        loewner_slack: slack,
        loewner_slack_se: slack_se,
        bias_norm,
        seed,
        regularity: "asserted".into(),
        unbiased_claim: estimator.unbiased_claim,
    };
    Ok((report, estimates))
}

/// [`monte_carlo_run`] without the per-replicate estimates.
pub fn monte_carlo_report(
    family: &dyn Family,
    theta_star: &ParamPoint,
    estimator: &Estimator,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<EstimatorReport> {
    monte_carlo_run(family, theta_star, estimator, n, replicates, seed).map(|(r, _)| r)
}
