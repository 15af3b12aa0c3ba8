//! f-divergences and named statistical distances.
//!
//! The f-divergence of a convex generator f (standardized so that
//! f(1) = f'(1) = 0 and f''(1) = 1) is `D_f(p:q) = E_p[ f(q/p) ]`. Under
//! this integral convention the Kullback-Leibler divergence corresponds to
//! the generator `f(u) = u - 1 - ln u`; generators that differ by the
//! affine term `c (u - 1)` produce the same divergence on normalized
//! distributions, which is how the often-quoted `u ln u` form relates to
//! the reverse orientation here.
//!
//! Zero-mass conventions: a term with p(x) = 0 contributes
//! `q(x) * lim f(u)/u`, a term with q(x) = 0 contributes `p(x) * f(0+)`,
//! and both limits are declared per generator. `+inf` is a legitimate
//! result (disjoint supports), not an error.

use crate::error::{Error, Result};
use crate::families::{self, Family, ParamPoint, Support};
use crate::numerics::{linalg, quad};
use nalgebra::{DMatrix, DVector};

/// A convex f-divergence generator with its boundary limits.
pub struct FGenerator {
    pub name: String,
    f: std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// lim f(u) as u -> 0+ (may be +inf).
    pub value_at_0: f64,
    /// lim f(u)/u as u -> inf (may be +inf).
    pub slope_at_inf: f64,
    /// p * f(q/p) from log densities, overflow-safe for the built-ins.
    term: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl FGenerator {
    /// Register a generator, verifying f(1) = 0, f'(1) = 0, f''(1) = 1 by
    /// finite differences at u = 1 (tolerance 1e-6).
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        value_at_0: f64,
        slope_at_inf: f64,
    ) -> Result<Self> {
        let name = name.into();
        Self::validate_standardization(&name, &f, true)?;
        Ok(Self::assemble(name, f, value_at_0, slope_at_inf))
    }

    fn assemble(
        name: String,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        value_at_0: f64,
        slope_at_inf: f64,
    ) -> Self {
        let f: std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync> = std::sync::Arc::new(f);
        let f2 = f.clone();
        FGenerator {
            name,
            f,
            value_at_0,
            slope_at_inf,
            term: Box::new(move |lp: f64, lq: f64| lp.exp() * f2((lq - lp).exp())),
        }
    }

    fn validate_standardization(
        name: &str,
        f: &impl Fn(f64) -> f64,
        check_curvature: bool,
    ) -> Result<()> {
        let reject = |what: String| Error::InvalidGenerator {
            name: name.to_string(),
            what,
        };
        let at_one = f(1.0);
        if at_one.abs() > 1e-9 {
            return Err(reject(format!("f(1) = {at_one}, expected 0")));
        }
        let h = 1e-5;
        let d1 = (f(1.0 + h) - f(1.0 - h)) / (2.0 * h);
        if d1.abs() > 1e-6 {
            return Err(reject(format!("f'(1) = {d1}, expected 0")));
        }
        if check_curvature {
            let h = 1e-4;
            let d2 = (f(1.0 + h) - 2.0 * f(1.0) + f(1.0 - h)) / (h * h);
            if (d2 - 1.0).abs() > 1e-6 {
                return Err(reject(format!("f''(1) = {d2}, expected 1")));
            }
        }
        Ok(())
    }

    pub fn eval(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    /// p * f(q/p) evaluated from log densities.
    pub fn term(&self, log_p: f64, log_q: f64) -> f64 {
        (self.term)(log_p, log_q)
    }

    /// Generator of KL(p:q): f(u) = u - 1 - ln u.
    pub fn kl() -> Self {
        let mut g = Self::assemble("kl".into(), |u: f64| u - 1.0 - u.ln(), f64::INFINITY, 1.0);
        g.term = Box::new(|lp: f64, lq: f64| lq.exp() - lp.exp() - lp.exp() * (lq - lp));
        g
    }

    /// Generator of KL(q:p): f(u) = u ln u - u + 1.
    pub fn reverse_kl() -> Self {
        let mut g = Self::assemble(
            "reverse-kl".into(),
            |u: f64| if u == 0.0 { 1.0 } else { u * u.ln() - u + 1.0 },
            1.0,
            f64::INFINITY,
        );
        g.term = Box::new(|lp: f64, lq: f64| lq.exp() * (lq - lp) - lq.exp() + lp.exp());
        g
    }

    /// Generator of the alpha = 0 divergence, four times the squared
    /// Hellinger distance: f(u) = 2 (1 - sqrt(u))^2.
    pub fn hellinger() -> Self {
        let mut g = Self::assemble(
            "hellinger".into(),
            |u: f64| {
                let s = 1.0 - u.sqrt();
                2.0 * s * s
            },
            2.0,
            2.0,
        );
        g.term = Box::new(|lp: f64, lq: f64| {
            2.0 * (lp.exp() + lq.exp() - 2.0 * (0.5 * (lp + lq)).exp())
        });
        g
    }

    /// Total variation f(u) = |u - 1| / 2; not differentiable at 1, so it
    /// is exempt from the curvature normalization.
    pub fn total_variation() -> Self {
        let mut g = Self::assemble(
            "total-variation".into(),
            |u: f64| 0.5 * (u - 1.0).abs(),
            0.5,
            0.5,
        );
        g.term = Box::new(|lp: f64, lq: f64| 0.5 * (lq.exp() - lp.exp()).abs());
        g
    }

    /// Alpha-divergence generator for alpha != +-1, standardized with the
    /// affine correction `2/(1-alpha) (u - 1)` so that f'(1) = 0.
    pub fn alpha(alpha: f64) -> Result<Self> {
        if (1.0 - alpha * alpha).abs() < 1e-6 {
            return Err(Error::InvalidGenerator {
                name: format!("alpha:{alpha}"),
                what: "alpha too close to +-1; use the KL limits".into(),
            });
        }
        let c0 = 4.0 / (1.0 - alpha * alpha);
        let c1 = 2.0 / (1.0 - alpha);
        let expo = 0.5 * (1.0 + alpha);
        let value_at_0 = if expo > 0.0 { c0 - c1 } else { f64::INFINITY };
        let slope_at_inf = if expo < 1.0 { c1 } else { f64::INFINITY };
        let mut g = Self::assemble(
            format!("alpha:{alpha}"),
            move |u: f64| c0 * (1.0 - u.powf(expo)) + c1 * (u - 1.0),
            value_at_0,
            slope_at_inf,
        );
        g.term = Box::new(move |lp: f64, lq: f64| {
            c0 * (lp.exp() - ((1.0 - expo) * lp + expo * lq).exp()) + c1 * (lq.exp() - lp.exp())
        });
        Ok(g)
    }

    /// Look up a generator: `kl`, `reverse-kl`, `hellinger`,
    /// `total-variation`, or `alpha:A`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "kl" => Ok(Self::kl()),
            "reverse-kl" | "rkl" => Ok(Self::reverse_kl()),
            "hellinger" => Ok(Self::hellinger()),
            "total-variation" | "tv" => Ok(Self::total_variation()),
            _ => {
                if let Some(a) = name.strip_prefix("alpha:") {
                    let a: f64 = a.parse().map_err(|_| Error::InvalidGenerator {
                        name: name.into(),
                        what: "bad alpha value".into(),
                    })?;
                    Self::alpha(a)
                } else {
                    Err(Error::InvalidGenerator {
                        name: name.into(),
                        what: "unknown generator".into(),
                    })
                }
            }
        }
    }

    /// The generators exercised by the randomized property suites.
    pub fn builtins() -> Vec<FGenerator> {
        vec![
            Self::kl(),
            Self::reverse_kl(),
            Self::hellinger(),
            Self::total_variation(),
            Self::alpha(0.5).expect("alpha valid"),
            Self::alpha(-0.5).expect("alpha valid"),
        ]
    }
}

/// A discrete distribution on a finite alphabet; entries may be zero
/// (boundary distributions are legitimate divergence inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist {
    probs: Vec<f64>,
}

impl DiscreteDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty distribution".into()));
        }
        if probs.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
            return Err(Error::InvalidDistribution(
                "entries must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {total}, expected 1"
            )));
        }
        Ok(DiscreteDist { probs })
    }

    pub fn uniform(m: usize) -> Self {
        DiscreteDist {
            probs: vec![1.0 / m as f64; m],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// A partition of the alphabet {0, .., m-1} into disjoint nonempty bins.
#[derive(Debug, Clone)]
pub struct Partition {
    bins: Vec<Vec<usize>>,
    alphabet: usize,
}

impl Partition {
    pub fn new(bins: Vec<Vec<usize>>, alphabet: usize) -> Result<Self> {
        if bins.is_empty() || bins.len() > alphabet {
            return Err(Error::InvalidPartition(format!(
                "{} bins over {alphabet} letters",
                bins.len()
            )));
        }
        let mut seen = vec![false; alphabet];
        for bin in &bins {
            if bin.is_empty() {
                return Err(Error::InvalidPartition("empty bin".into()));
            }
            for &i in bin {
                if i >= alphabet {
                    return Err(Error::InvalidPartition(format!(
                        "letter {i} outside alphabet of size {alphabet}"
                    )));
                }
                if seen[i] {
                    return Err(Error::InvalidPartition(format!("letter {i} repeated")));
                }
                seen[i] = true;
            }
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::InvalidPartition("letters left uncovered".into()));
        }
        Ok(Partition { bins, alphabet })
    }

    pub fn singletons(m: usize) -> Self {
        Partition {
            bins: (0..m).map(|i| vec![i]).collect(),
            alphabet: m,
        }
    }

    pub fn bins(&self) -> &[Vec<usize>] {
        &self.bins
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }
}

/// Merge alphabet letters into bins; bin probabilities are the sums of
/// their members.
pub fn coarse_grain(p: &DiscreteDist, part: &Partition) -> Result<DiscreteDist> {
    if part.alphabet() != p.len() {
        return Err(Error::InvalidPartition(format!(
            "partition over {} letters applied to {} letters",
            part.alphabet(),
            p.len()
        )));
    }
    let probs = part
        .bins()
        .iter()
        .map(|bin| bin.iter().map(|&i| p.probs[i]).sum())
        .collect();
    DiscreteDist::new(probs)
}

/// One side of a divergence: a discrete distribution or a family member.
#[derive(Clone, Copy)]
pub enum Dist<'a> {
    Discrete(&'a DiscreteDist),
    Member {
        family: &'a dyn Family,
        theta: &'a ParamPoint,
    },
}

enum Pair<'a> {
    Discrete(&'a DiscreteDist, &'a DiscreteDist),
    Members {
        family: &'a dyn Family,
        p1: DVector<f64>,
        p2: DVector<f64>,
    },
}

fn pair<'a>(p: &Dist<'a>, q: &Dist<'a>) -> Result<Pair<'a>> {
    match (p, q) {
        (Dist::Discrete(a), Dist::Discrete(b)) => {
            if a.len() != b.len() {
                return Err(Error::SupportMismatch(format!(
                    "alphabets of size {} and {}",
                    a.len(),
                    b.len()
                )));
            }
            Ok(Pair::Discrete(a, b))
        }
        (
            Dist::Member {
                family: fa,
                theta: ta,
            },
            Dist::Member {
                family: fb,
                theta: tb,
            },
        ) => {
            if fa.name() != fb.name() {
                return Err(Error::SupportMismatch(format!(
                    "family '{}' vs '{}'",
                    fa.name(),
                    fb.name()
                )));
            }
            Ok(Pair::Members {
                family: *fa,
                p1: families::to_primary(*fa, ta)?,
                p2: families::to_primary(*fb, tb)?,
            })
        }
        _ => Err(Error::SupportMismatch(
            "cannot mix a discrete distribution with a family member".into(),
        )),
    }
}

fn member_expectation_full(
    family: &dyn Family,
    p1: &DVector<f64>,
    p2: &DVector<f64>,
    g: &dyn Fn(f64, f64) -> f64,
) -> Result<quad::QuadResult> {
    let f = |x: f64| {
        let l1 = family.log_density_primary(p1, x);
        let l2 = family.log_density_primary(p2, x);
        g(l1, l2)
    };
    families::integrate_over_support(family, &[p1.clone(), p2.clone()], &f)
}

fn member_expectation(
    family: &dyn Family,
    p1: &DVector<f64>,
    p2: &DVector<f64>,
    g: &dyn Fn(f64, f64) -> f64,
) -> Result<f64> {
    member_expectation_full(family, p1, p2, g).map(|r| r.value)
}

/// Evaluate a named divergence with its quadrature residual (0 for
/// discrete inputs); the CLI's `--kind` dispatcher.
///
/// Kinds: `kl`, `rkl`, `hellinger` (squared Hellinger), `bhattacharyya`,
/// `alpha:A`, and `f:NAME` for a registered generator.
pub fn evaluate_kind(kind: &str, p: &Dist, q: &Dist) -> Result<(f64, f64)> {
    let residual = match pair(p, q)? {
        Pair::Discrete(..) => 0.0,
        Pair::Members { family, p1, p2 } => {
            // The probe integrand bounds the quadrature difficulty of the
            // actual divergence kernels over the same region.
            member_expectation_full(family, &p1, &p2, &|l1, l2| FGenerator::kl().term(l1, l2))?
                .residual
        }
    };
    let value = match kind {
        "kl" => kl(p, q)?,
        "rkl" | "reverse-kl" => reverse_kl(p, q)?,
        "hellinger" => hellinger_sq(p, q)?,
        "bhattacharyya" => bhattacharyya(p, q)?,
        _ => {
            if let Some(alpha) = kind.strip_prefix("alpha:") {
                let alpha: f64 = alpha
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad alpha in '{kind}'")))?;
                alpha_divergence(alpha, p, q)?
            } else if let Some(name) = kind.strip_prefix("f:") {
                f_divergence(&FGenerator::by_name(name)?, p, q)?
            } else {
                return Err(Error::InvalidArgument(format!(
                    "unknown divergence kind '{kind}'"
                )));
            }
        }
    };
    Ok((value, residual))
}

/// `D_f(p:q) = E_p[f(q/p)]`, nonnegative, zero iff p = q, `+inf` when a
/// mass mismatch meets an infinite generator limit.
pub fn f_divergence(gen: &FGenerator, p: &Dist, q: &Dist) -> Result<f64> {
    match pair(p, q)? {
        Pair::Discrete(a, b) => {
            let mut total = 0.0f64;
            for (&pi, &qi) in a.probs.iter().zip(&b.probs) {
                total += if pi == 0.0 && qi == 0.0 {
                    0.0
                } else if pi == 0.0 {
                    qi * gen.slope_at_inf
                } else if qi == 0.0 {
                    pi * gen.value_at_0
                } else {
                    pi * gen.eval(qi / pi)
                };
                if total.is_infinite() {
                    return Ok(f64::INFINITY);
                }
            }
            Ok(total)
        }
        Pair::Members { family, p1, p2 } => {
            member_expectation(family, &p1, &p2, &|l1, l2| gen.term(l1, l2))
        }
    }
}

/// Kullback-Leibler divergence `KL(p:q) = E_p[ln(p/q)]`; `+inf` when q
/// vanishes where p does not.
pub fn kl(p: &Dist, q: &Dist) -> Result<f64> {
    match pair(p, q)? {
        Pair::Discrete(a, b) => {
            let mut total = 0.0f64;
            for (&pi, &qi) in a.probs.iter().zip(&b.probs) {
                if pi == 0.0 {
                    continue;
                }
                if qi == 0.0 {
                    return Ok(f64::INFINITY);
                }
                total += pi * (pi / qi).ln();
            }
            Ok(total)
        }
        Pair::Members { family, p1, p2 } => {
            member_expectation(family, &p1, &p2, &|l1, l2| l1.exp() * (l1 - l2))
        }
    }
}

/// `KL(q:p)`.
pub fn reverse_kl(p: &Dist, q: &Dist) -> Result<f64> {
    kl(q, p)
}

/// Cross-entropy `H(p:q) = E_p[-ln q]` in nats.
pub fn cross_entropy(p: &Dist, q: &Dist) -> Result<f64> {
    match pair(p, q)? {
        Pair::Discrete(a, b) => {
            let mut total = 0.0f64;
            for (&pi, &qi) in a.probs.iter().zip(&b.probs) {
                if pi == 0.0 {
                    continue;
                }
                if qi == 0.0 {
                    return Ok(f64::INFINITY);
                }
                total -= pi * qi.ln();
            }
            Ok(total)
        }
        Pair::Members { family, p1, p2 } => {
            member_expectation(family, &p1, &p2, &|l1, l2| -l1.exp() * l2)
        }
    }
}

/// Shannon (differential) entropy, the self cross-entropy `H(p:p)`.
pub fn shannon_entropy(p: &Dist) -> Result<f64> {
    cross_entropy(p, p)
}

/// Alpha-divergence `D_alpha(p:q)`; within 1e-6 of alpha = -1 or +1 the
/// call dispatches to the KL limit (`D_{-1} = KL(p:q)`, `D_{+1} = KL(q:p)`),
/// avoiding the 4/(1-alpha^2) cancellation.
pub fn alpha_divergence(alpha: f64, p: &Dist, q: &Dist) -> Result<f64> {
    if (alpha + 1.0).abs() < 1e-6 {
        return kl(p, q);
    }
    if (alpha - 1.0).abs() < 1e-6 {
        return kl(q, p);
    }
    let expo_p = 0.5 * (1.0 - alpha);
    let expo_q = 0.5 * (1.0 + alpha);
    let overlap = match pair(p, q)? {
        Pair::Discrete(a, b) => {
            let mut total = 0.0f64;
            for (&pi, &qi) in a.probs.iter().zip(&b.probs) {
                if pi == 0.0 && qi == 0.0 {
                    continue;
                }
                total += pi.powf(expo_p) * qi.powf(expo_q);
            }
            total
        }
        Pair::Members { family, p1, p2 } => member_expectation(family, &p1, &p2, &|l1, l2| {
            (expo_p * l1 + expo_q * l2).exp()
        })?,
    };
    Ok(4.0 / (1.0 - alpha * alpha) * (1.0 - overlap))
}

/// Bhattacharyya distance `B(p,q) = -ln integral sqrt(p q)`; `+inf` for
/// disjoint supports.
pub fn bhattacharyya(p: &Dist, q: &Dist) -> Result<f64> {
    let coefficient = match pair(p, q)? {
        Pair::Discrete(a, b) => a
            .probs
            .iter()
            .zip(&b.probs)
            .map(|(&pi, &qi)| (pi * qi).sqrt())
            .sum(),
        Pair::Members { family, p1, p2 } => {
            member_expectation(family, &p1, &p2, &|l1, l2| (0.5 * (l1 + l2)).exp())?
        }
    };
    Ok(-f64::ln(coefficient))
}

/// Squared Hellinger distance `H^2(p,q) = (1/2) integral (sqrt p - sqrt q)^2`,
/// in [0, 1] and symmetric; equals `1 - exp(-B)`.
pub fn hellinger_sq(p: &Dist, q: &Dist) -> Result<f64> {
    match pair(p, q)? {
        Pair::Discrete(a, b) => Ok(a
            .probs
            .iter()
            .zip(&b.probs)
            .map(|(&pi, &qi)| {
                let d = pi.sqrt() - qi.sqrt();
                0.5 * d * d
            })
            .sum()),
        Pair::Members { family, p1, p2 } => member_expectation(family, &p1, &p2, &|l1, l2| {
            let d = (0.5 * l1).exp() - (0.5 * l2).exp();
            0.5 * d * d
        }),
    }
}

/// Squared Mahalanobis distance `(x - y)^T M (x - y)` for positive
/// definite M; reduces to the squared Euclidean distance at M = I.
pub fn mahalanobis_sq(m: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    if x.len() != m.nrows() || y.len() != m.nrows() {
        return Err(Error::Dimension {
            expected: m.nrows(),
            got: x.len().max(y.len()),
        });
    }
    linalg::cholesky(m)?;
    let d = x - y;
    Ok((&d.transpose() * m * &d)[(0, 0)])
}

/// A smooth invertible sample-space map with its derivative.
pub struct SampleMap {
    pub name: String,
    forward: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    derivative: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    inverse: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl SampleMap {
    /// Strictly monotone map without a closed-form inverse; inversion runs
    /// Newton with a bisection fallback.
    pub fn new(
        name: impl Into<String>,
        forward: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        SampleMap {
            name: name.into(),
            forward: Box::new(forward),
            derivative: Box::new(derivative),
            inverse: None,
        }
    }

    /// y = a x + b with a != 0.
    pub fn affine(a: f64, b: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "affine map needs nonzero finite slope, got a={a}, b={b}"
            )));
        }
        let mut map = Self::new(format!("affine({a},{b})"), move |x| a * x + b, move |_| a);
        map.inverse = Some(Box::new(move |y| (y - b) / a));
        Ok(map)
    }

    /// y = x^3 + x, strictly increasing with derivative 3x^2 + 1.
    pub fn cubic() -> Self {
        Self::new("cubic", |x| x * x * x + x, |x| 3.0 * x * x + 1.0)
    }

    pub fn identity() -> Self {
        let mut map = Self::new("identity", |x| x, |_| 1.0);
        map.inverse = Some(Box::new(|y| y));
        map
    }

    pub fn apply(&self, x: f64) -> f64 {
        (self.forward)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.derivative)(x)
    }

    /// Solve m(x) = y; uses the analytic inverse when present, otherwise
    /// safeguarded Newton inside an expanding bracket (increasing maps).
    pub fn invert(&self, y: f64, hint: f64) -> Result<f64> {
        if let Some(inv) = &self.inverse {
            return Ok(inv(y));
        }
        let mut lo = hint - 1.0;
        let mut hi = hint + 1.0;
        for _ in 0..200 {
            if self.apply(lo) <= y {
                break;
            }
            lo -= 2.0 * (hi - lo);
        }
        for _ in 0..200 {
            if self.apply(hi) >= y {
                break;
            }
            hi += 2.0 * (hi - lo);
        }
        if self.apply(lo) > y || self.apply(hi) < y {
            return Err(Error::Solver {
                iterations: 200,
                residual: (self.apply(hint) - y).abs(),
            });
        }
        let mut x = hint.clamp(lo, hi);
        for _ in 0..100 {
            let fx = self.apply(x) - y;
            if fx.abs() <= 1e-14 * (1.0 + y.abs()) {
                return Ok(x);
            }
            if fx > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = self.derivative(x);
            let newton = x - fx / d;
            x = if d.abs() > 1e-12 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        Ok(x)
    }
}

/// Transform both members through `map`, recompute `D_f` in the image
/// space (densities `q(y) = p(x) |m'(x)|^{-1}` with x recovered by
/// inversion), and return `|D_f(transformed) - D_f(original)|`.
///
/// Statistical invariance makes the expected residual quadrature-level;
/// the acceptance bound is 1e-6.
pub fn pushforward_density_check(
    family: &dyn Family,
    map: &SampleMap,
    theta1: &ParamPoint,
    theta2: &ParamPoint,
    gen: &FGenerator,
) -> Result<f64> {
    if family.support() != Support::Continuous {
        return Err(Error::SupportMismatch(
            "pushforward check needs a continuous family".into(),
        ));
    }
    let p1 = families::to_primary(family, theta1)?;
    let p2 = families::to_primary(family, theta2)?;
    let original = member_expectation(family, &p1, &p2, &|l1, l2| gen.term(l1, l2))?;

    let primaries = [p1.clone(), p2.clone()];
    let (lo, hi) = family.quad_interval(&primaries);
    let breaks_x = family.quad_breakpoints(&primaries);
    // Jacobian must not vanish anywhere on the integration region; probe a
    // grid plus the density breakpoints and watch for sign changes.
    let mut probes: Vec<f64> = (0..=200)
        .map(|k| lo + (hi - lo) * k as f64 / 200.0)
        .collect();
    probes.extend(breaks_x.iter().copied().filter(|x| *x >= lo && *x <= hi));
    let mut prev_sign = 0.0f64;
    for &x in &probes {
        let d = map.derivative(x);
        if d.abs() < 1e-12 {
            return Err(Error::SingularJacobian(d.abs()));
        }
        if prev_sign != 0.0 && d.signum() != prev_sign {
            return Err(Error::SingularJacobian(0.0));
        }
        prev_sign = d.signum();
    }
    let (mut y_lo, mut y_hi) = (map.apply(lo), map.apply(hi));
    let increasing = y_hi > y_lo;
    if !increasing {
        std::mem::swap(&mut y_lo, &mut y_hi);
    }
    let breaks_y: Vec<f64> = breaks_x.iter().map(|&x| map.apply(x)).collect();

    let integrand = |y: f64| {
        let hint = 0.5 * (lo + hi);
        let x = map.invert(y, hint).unwrap_or(hint);
        let ld_jac = map.derivative(x).abs().ln();
        let l1 = family.log_density_primary(&p1, x) - ld_jac;
        let l2 = family.log_density_primary(&p2, x) - ld_jac;
        gen.term(l1, l2)
    };
    let transformed = quad::integrate_seeded(&integrand, y_lo, y_hi, &breaks_y)?.value;
    Ok((transformed - original).abs())
}
