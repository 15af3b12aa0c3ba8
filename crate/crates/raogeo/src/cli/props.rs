//! Randomized property suites, seeded and deterministic: the invariance,
//! monotonicity, duality, and cosine identities run as repeated spot
//! checks with the worst residual and any counterexample reported.

use crate::divergences::{
    coarse_grain, f_divergence, pushforward_density_check, DiscreteDist, Dist, FGenerator,
    Partition, SampleMap,
};
use crate::error::{Error, Result};
use crate::expfam;
use crate::families::{self, ParamPoint};
use crate::geodesics;
use crate::numerics::rng::StreamRng;
use nalgebra::DVector;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct PropReport {
    pub suite: String,
    pub trials: usize,
    pub seed: u64,
    pub pass: bool,
    /// True when trials = 0: a vacuous pass.
    pub vacuous: bool,
    pub worst_label: String,
    pub worst_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<serde_json::Value>,
}

pub fn suites() -> &'static [&'static str] {
    &["monotonicity", "invariance", "duality", "cosine"]
}

pub fn run_suite(suite: &str, trials: usize, seed: u64) -> Result<PropReport> {
    match suite {
        "monotonicity" => monotonicity(trials, seed),
        "invariance" => invariance(trials, seed),
        "duality" => duality(trials, seed),
        "cosine" => cosine(trials, seed),
        other => Err(Error::InvalidArgument(format!(
            "unknown property suite '{other}'; registered: {:?}",
            suites()
        ))),
    }
}

fn vacuous(suite: &str, seed: u64) -> PropReport {
    PropReport {
        suite: suite.into(),
        trials: 0,
        seed,
        pass: true,
        vacuous: true,
        worst_label: "0 trials".into(),
        worst_value: 0.0,
        counterexample: None,
    }
}

fn random_simplex(m: usize, r: &mut StreamRng) -> DiscreteDist {
    let raw: Vec<f64> = (0..m).map(|_| -r.uniform().ln()).collect();
    let total: f64 = raw.iter().sum();
    DiscreteDist::new(raw.iter().map(|v| v / total).collect()).expect("normalized")
}

fn random_partition(m: usize, r: &mut StreamRng) -> Partition {
    let bins_wanted = 1 + (r.next_u64() as usize) % m;
    let mut bins: Vec<Vec<usize>> = (0..bins_wanted).map(|i| vec![i]).collect();
    for letter in bins_wanted..m {
        bins[(r.next_u64() as usize) % bins_wanted].push(letter);
    }
    Partition::new(bins, m).expect("valid by construction")
}

/// Coarse-graining never increases an f-divergence (slack >= -1e-12).
fn monotonicity(trials: usize, seed: u64) -> Result<PropReport> {
    if trials == 0 {
        return Ok(vacuous("monotonicity", seed));
    }
    let generators = FGenerator::builtins();
    let mut worst_slack = f64::INFINITY;
    let mut worst_label = String::new();
    let mut counterexample = None;
    for trial in 0..trials {
        let mut r = StreamRng::substream(seed, trial as u64);
        let m = 2 + (r.next_u64() as usize) % 7;
        let p = random_simplex(m, &mut r);
        let q = random_simplex(m, &mut r);
        let part = random_partition(m, &mut r);
        let gen = &generators[trial % generators.len()];
        let fine = f_divergence(gen, &Dist::Discrete(&p), &Dist::Discrete(&q))?;
        let coarse = f_divergence(
            gen,
            &Dist::Discrete(&coarse_grain(&p, &part)?),
            &Dist::Discrete(&coarse_grain(&q, &part)?),
        )?;
        let slack = fine - coarse;
        if slack < worst_slack {
            worst_slack = slack;
            worst_label = format!("trial {trial} ({})", gen.name);
            if slack < -1e-12 {
                counterexample = Some(serde_json::json!({
                    "p": p.probs(), "q": q.probs(),
                    "bins": part.bins(), "generator": gen.name,
                    "fine": fine, "coarse": coarse,
                }));
            }
        }
    }
    Ok(PropReport {
        suite: "monotonicity".into(),
        trials,
        seed,
        pass: worst_slack >= -1e-12,
        vacuous: false,
        worst_label,
        worst_value: worst_slack,
        counterexample,
    })
}

/// f-divergences are invariant under smooth invertible sample-space maps
/// (residual < 1e-6).
fn invariance(trials: usize, seed: u64) -> Result<PropReport> {
    if trials == 0 {
        return Ok(vacuous("invariance", seed));
    }
    let family = families::by_name("gaussian1d")?;
    let mut worst = 0.0f64;
    let mut worst_label = String::new();
    let mut counterexample = None;
    for trial in 0..trials {
        let mut r = StreamRng::substream(seed, trial as u64);
        let t1 = ParamPoint::new(
            vec![-1.5 + 3.0 * r.uniform(), 0.5 + 1.5 * r.uniform()],
            "mu-sigma",
        );
        let t2 = ParamPoint::new(
            vec![-1.5 + 3.0 * r.uniform(), 0.5 + 1.5 * r.uniform()],
            "mu-sigma",
        );
        let map = if trial % 2 == 0 {
            SampleMap::affine(2.0, 1.0)?
        } else {
            SampleMap::cubic()
        };
        let gen = if trial % 4 < 2 {
            FGenerator::kl()
        } else {
            FGenerator::hellinger()
        };
        let residual = pushforward_density_check(family.as_ref(), &map, &t1, &t2, &gen)?;
        if residual > worst {
            worst = residual;
            worst_label = format!("trial {trial} ({} under {})", gen.name, map.name);
            if residual >= 1e-6 {
                counterexample = Some(serde_json::json!({
                    "theta1": t1.coords.as_slice(), "theta2": t2.coords.as_slice(),
                    "map": map.name, "generator": gen.name, "residual": residual,
                }));
            }
        }
    }
    Ok(PropReport {
        suite: "invariance".into(),
        trials,
        seed,
        pass: worst < 1e-6,
        vacuous: false,
        worst_label,
        worst_value: worst,
        counterexample,
    })
}

/// Legendre duality: round trips (1e-8), Bregman three-form equality
/// (1e-8), and the Hessian inverse-pair identity (1e-6), each residual
/// reported relative to its own tolerance.
fn duality(trials: usize, seed: u64) -> Result<PropReport> {
    if trials == 0 {
        return Ok(vacuous("duality", seed));
    }
    let specs = [
        expfam::by_name("poisson")?,
        expfam::by_name("gaussian1d")?,
        expfam::by_name("discrete:4")?,
    ];
    let mut worst_ratio = 0.0f64;
    let mut worst_value = 0.0f64;
    let mut worst_label = String::new();
    let mut counterexample = None;
    for trial in 0..trials {
        let mut r = StreamRng::substream(seed, trial as u64);
        let spec = &specs[trial % specs.len()];
        let theta = random_natural(spec.as_ref(), &mut r);
        let theta2 = random_natural(spec.as_ref(), &mut r);
        let eta = expfam::to_expectation(spec.as_ref(), &theta)?;
        let eta2 = expfam::to_expectation(spec.as_ref(), &theta2)?;

        let round_trip = (expfam::to_natural(spec.as_ref(), &eta)? - &theta).norm();
        let primal = expfam::bregman(spec.as_ref(), &theta2, &theta)?;
        let mixed = spec.cumulant(&theta2) + expfam::legendre_conjugate(spec.as_ref(), &eta)?
            - theta2.dot(&eta);
        let dual = expfam::legendre_conjugate(spec.as_ref(), &eta)?
            - expfam::legendre_conjugate(spec.as_ref(), &eta2)?
            - (&eta - &eta2).dot(&expfam::to_natural(spec.as_ref(), &eta2)?);
        let three_form = (primal - mixed).abs().max((primal - dual).abs());
        let hess_defect = {
            let hf = spec.hess_cumulant(&theta);
            let hstar = crate::numerics::linalg::spd_inverse(&hf)?;
            // Independent route: finite differences of the inverse map.
            let d = spec.dim();
            let mut fd = nalgebra::DMatrix::zeros(d, d);
            for j in 0..d {
                let h = 1e-6 * eta[j].abs().max(1e-2);
                let mut up = eta.clone();
                let mut dn = eta.clone();
                up[j] += h;
                dn[j] -= h;
                let col = (expfam::to_natural(spec.as_ref(), &up)?
                    - expfam::to_natural(spec.as_ref(), &dn)?)
                    / (2.0 * h);
                fd.set_column(j, &col);
            }
            (&fd - &hstar).norm() + (hf * fd - nalgebra::DMatrix::identity(d, d)).norm()
        };

        for (label, value, tol) in [
            ("round-trip", round_trip, 1e-8),
            ("bregman-three-form", three_form, 1e-8),
            ("hessian-inverse-pair", hess_defect, 1e-6),
        ] {
            let ratio = value / tol;
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst_value = value;
                worst_label = format!("trial {trial} ({}, {label})", spec.name());
                if ratio > 1.0 {
                    counterexample = Some(serde_json::json!({
                        "family": spec.name(), "theta": theta.as_slice(),
                        "check": label, "residual": value, "tolerance": tol,
                    }));
                }
            }
        }
    }
    Ok(PropReport {
        suite: "duality".into(),
        trials,
        seed,
        pass: worst_ratio <= 1.0,
        vacuous: false,
        worst_label,
        worst_value,
        counterexample,
    })
}

fn random_natural(spec: &dyn expfam::ExpFam, r: &mut StreamRng) -> DVector<f64> {
    match spec.name().as_str() {
        "poisson" => DVector::from_vec(vec![-1.5 + 3.5 * r.uniform()]),
        "gaussian1d" => DVector::from_vec(vec![-2.0 + 4.0 * r.uniform(), -2.0 + 1.8 * r.uniform()]),
        _ => DVector::from_fn(spec.dim(), |_, _| -2.0 + 4.0 * r.uniform()),
    }
}

/// Generalized law of cosines: residual < 1e-8 on random Poisson and
/// Gaussian triples.
fn cosine(trials: usize, seed: u64) -> Result<PropReport> {
    if trials == 0 {
        return Ok(vacuous("cosine", seed));
    }
    let specs = [expfam::by_name("poisson")?, expfam::by_name("gaussian1d")?];
    let mut worst = 0.0f64;
    let mut worst_label = String::new();
    let mut counterexample = None;
    for trial in 0..trials {
        let mut r = StreamRng::substream(seed, trial as u64);
        let spec = &specs[trial % specs.len()];
        let p = random_natural(spec.as_ref(), &mut r);
        let q = random_natural(spec.as_ref(), &mut r);
        let s = random_natural(spec.as_ref(), &mut r);
        let residual = geodesics::cosine_residual(spec.as_ref(), &p, &q, &s)?;
        if residual > worst {
            worst = residual;
            worst_label = format!("trial {trial} ({})", spec.name());
            if residual >= 1e-8 {
                counterexample = Some(serde_json::json!({
                    "family": spec.name(),
                    "p": p.as_slice(), "q": q.as_slice(), "r": s.as_slice(),
                    "residual": residual,
                }));
            }
        }
    }
    Ok(PropReport {
        suite: "cosine".into(),
        trials,
        seed,
        pass: worst < 1e-8,
        vacuous: false,
        worst_label,
        worst_value: worst,
        counterexample,
    })
}
