//! Contraction map sets with an external factor.
//!
//! A system is certified on samples: conditions C-1 (invariance of `P` under
//! the paired iteration), C-2 (finite infima of `f_A`, `f_B`) and C-3 (the
//! contraction inequality) are checked over seeded draws from `P`. A verdict
//! is never stronger than "certified-on-samples".

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::metric::{seeded_rng, Point, Quantity, Region, SampleRng, SetPair};
use crate::{Error, Result, RESIDUAL_TOL};

/// An element of the external set `C`.
///
/// Built-in systems use coordinate vectors, named atoms (the `1` adjoined in
/// the 3-cyclic reduction) and pairs (the `C₁ × C₂` of a product system).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CElement {
    Vector(Point),
    Atom(u32),
    Pair(Box<CElement>, Box<CElement>),
}

impl CElement {
    pub fn scalar(x: f64) -> Self {
        CElement::Vector(Point::scalar(x))
    }

    pub fn pair(a: CElement, b: CElement) -> Self {
        CElement::Pair(Box::new(a), Box::new(b))
    }

    pub fn as_point(&self) -> Option<&Point> {
        match self {
            CElement::Vector(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            CElement::Vector(p) => p.is_finite(),
            CElement::Atom(_) => true,
            CElement::Pair(a, b) => a.is_finite() && b.is_finite(),
        }
    }
}

/// Text form used in trace files: `1;2` for vectors, `#1` for atoms,
/// `[a|b]` for pairs.
impl fmt::Display for CElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CElement::Vector(p) => write!(f, "{p}"),
            CElement::Atom(k) => write!(f, "#{k}"),
            CElement::Pair(a, b) => write!(f, "[{a}|{b}]"),
        }
    }
}

pub type StateMap = Arc<dyn Fn(&Point, &CElement) -> Point + Send + Sync>;
pub type FactorMap = Arc<dyn Fn(&Point, &CElement) -> CElement + Send + Sync>;
pub type FactorFn = Arc<dyn Fn(&CElement) -> f64 + Send + Sync>;
pub type CSampler = Arc<dyn Fn(&mut SampleRng) -> Option<CElement> + Send + Sync>;
pub type QuadPredicate = Arc<dyn Fn(&Quadruple) -> bool + Send + Sync>;
pub type QuadSampler = Arc<dyn Fn(&mut SampleRng) -> Option<Quadruple> + Send + Sync>;

/// A penalty `f : C → ℝ` with its infimum over `C`.
#[derive(Clone)]
pub struct ExternalFactor {
    pub f: FactorFn,
    pub inf: Quantity,
}

impl ExternalFactor {
    pub fn new(f: impl Fn(&CElement) -> f64 + Send + Sync + 'static, inf: Quantity) -> Self {
        ExternalFactor { f: Arc::new(f), inf }
    }

    pub fn zero() -> Self {
        ExternalFactor::new(|_| 0.0, Quantity::Exact(0.0))
    }

    pub fn eval(&self, c: &CElement) -> f64 {
        (self.f)(c)
    }
}

/// `(x, y, u, v) ∈ A × B × C × C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadruple {
    pub x: Point,
    pub y: Point,
    pub u: CElement,
    pub v: CElement,
}

impl Quadruple {
    pub fn new(x: Point, y: Point, u: CElement, v: CElement) -> Self {
        Quadruple { x, y, u, v }
    }
}

/// The admissible set `P ⊆ A × B × C²`.
#[derive(Clone)]
pub struct RelationP {
    pub label: String,
    contains: QuadPredicate,
    sampler: QuadSampler,
}

impl RelationP {
    pub fn new(
        label: impl Into<String>,
        contains: impl Fn(&Quadruple) -> bool + Send + Sync + 'static,
        sampler: impl Fn(&mut SampleRng) -> Option<Quadruple> + Send + Sync + 'static,
    ) -> Self {
        RelationP { label: label.into(), contains: Arc::new(contains), sampler: Arc::new(sampler) }
    }

    pub fn contains(&self, q: &Quadruple) -> bool {
        (self.contains)(q)
    }

    pub fn draw(&self, rng: &mut SampleRng) -> Result<Quadruple> {
        let q = (self.sampler)(rng)
            .ok_or_else(|| Error::EstimationFailure(format!("sampler for P = {} exhausted", self.label)))?;
        if !self.contains(&q) {
            return Err(Error::EstimationFailure(format!("sampler for P = {} produced a non-member", self.label)));
        }
        Ok(q)
    }

    /// Keeps only the members of `self` that also satisfy `extra`.
    pub fn restricted(&self, label: impl Into<String>, extra: impl Fn(&Quadruple) -> bool + Send + Sync + 'static) -> Self {
        let base = self.contains.clone();
        let sampler = self.sampler.clone();
        let extra = Arc::new(extra);
        let extra2 = extra.clone();
        RelationP::new(
            label,
            move |q| base(q) && extra(q),
            move |rng| {
                for _ in 0..64 {
                    let q = sampler(rng)?;
                    if extra2(&q) {
                        return Some(q);
                    }
                }
                None
            },
        )
    }
}

/// What `C` is, for reports and for estimating infima.
#[derive(Clone)]
pub struct CUniverse {
    pub label: String,
    pub sampler: Option<CSampler>,
}

impl CUniverse {
    pub fn new(label: impl Into<String>, sampler: impl Fn(&mut SampleRng) -> Option<CElement> + Send + Sync + 'static) -> Self {
        CUniverse { label: label.into(), sampler: Some(Arc::new(sampler)) }
    }

    pub fn opaque(label: impl Into<String>) -> Self {
        CUniverse { label: label.into(), sampler: None }
    }
}

/// `(T_A, T_B, H_A, H_B, f_A, f_B)` on `(A, B, C)` with relation `P` and
/// contraction constant `λ`.
#[derive(Clone)]
pub struct ExternalFactorSystem {
    pub name: String,
    pub pair: SetPair,
    pub c_universe: CUniverse,
    pub t_a: StateMap,
    pub h_a: FactorMap,
    pub t_b: StateMap,
    pub h_b: FactorMap,
    pub f_a: ExternalFactor,
    pub f_b: ExternalFactor,
    pub p: RelationP,
    pub lambda: f64,
}

impl fmt::Debug for ExternalFactorSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExternalFactorSystem")
            .field("name", &self.name)
            .field("space", &self.pair.space)
            .field("a", &self.pair.a)
            .field("b", &self.pair.b)
            .field("dist", &self.pair.dist)
            .field("c", &self.c_universe.label)
            .field("p", &self.p.label)
            .field("inf_f_a", &self.f_a.inf)
            .field("inf_f_b", &self.f_b.inf)
            .field("lambda", &self.lambda)
            .finish()
    }
}

/// One side of a system: the state map, factor update, penalty and target
/// region.
#[derive(Clone, Copy)]
pub struct Side<'a> {
    pub name: &'static str,
    pub t: &'a StateMap,
    pub h: &'a FactorMap,
    pub f: &'a ExternalFactor,
    pub region: &'a Region,
}

impl Side<'_> {
    pub fn step(&self, x: &Point, c: &CElement) -> (Point, CElement) {
        ((self.t)(x, c), (self.h)(x, c))
    }
}

impl ExternalFactorSystem {
    pub fn side_a(&self) -> Side<'_> {
        Side { name: "A", t: &self.t_a, h: &self.h_a, f: &self.f_a, region: &self.pair.a }
    }

    pub fn side_b(&self) -> Side<'_> {
        Side { name: "B", t: &self.t_b, h: &self.h_b, f: &self.f_b, region: &self.pair.b }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_relation(mut self, p: RelationP) -> Self {
        self.p = p;
        self
    }

    /// λ in `[0, 1)` and no infinite infima.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::InvalidInput(format!("lambda = {} is outside [0, 1)", self.lambda)));
        }
        for (name, q) in [("f_A", self.f_a.inf), ("f_B", self.f_b.inf)] {
            if let Some(v) = q.value() {
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!("inf {name} = {v} is not finite")));
                }
            }
        }
        Ok(())
    }

    /// Estimates every unresolved infimum (and `dist(A, B)`) from samples.
    pub fn resolve(&mut self, samples: usize, seed: u64) -> Result<()> {
        self.pair.resolve_distance(samples, seed)?;
        for (i, fac) in [&mut self.f_a, &mut self.f_b].into_iter().enumerate() {
            if fac.inf == Quantity::Unresolved {
                let sampler = self.c_universe.sampler.as_ref().ok_or_else(|| {
                    Error::EstimationFailure(format!("C = {} has no sampler", self.c_universe.label))
                })?;
                fac.inf = Quantity::Estimated(estimate_infimum(&fac.f, sampler, samples, seed.wrapping_add(7 + i as u64))?);
            }
        }
        Ok(())
    }

    /// `ρ(x, y) + f_A(u) + f_B(v)`
    pub fn potential(&self, q: &Quadruple) -> f64 {
        self.pair.space.distance_unchecked(&q.x.0, &q.y.0) + self.f_a.eval(&q.u) + self.f_b.eval(&q.v)
    }

    /// Image of `q` under one paired step.
    pub fn step(&self, q: &Quadruple) -> Quadruple {
        let (x, u) = self.side_a().step(&q.x, &q.u);
        let (y, v) = self.side_b().step(&q.y, &q.v);
        Quadruple { x, y, u, v }
    }
}

fn estimate_infimum(f: &FactorFn, sampler: &CSampler, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = seeded_rng(seed);
    let mut best = f64::INFINITY;
    let mut seen = 0usize;
    for _ in 0..samples {
        if let Some(c) = sampler(&mut rng) {
            let v = f(&c);
            if v.is_finite() {
                seen += 1;
                best = best.min(v);
            }
        }
    }
    if seen == 0 {
        return Err(Error::EstimationFailure("no finite f-values sampled from C".to_string()));
    }
    Ok(best)
}

/// `S = dist(A, B) + inf f_A + inf f_B`.
pub fn s_value(system: &ExternalFactorSystem) -> Result<f64> {
    let d = system.pair.dist_value()?;
    let fa = system
        .f_a
        .inf
        .value()
        .ok_or_else(|| Error::NotCertified("inf f_A has not been supplied or estimated".to_string()))?;
    let fb = system
        .f_b
        .inf
        .value()
        .ok_or_else(|| Error::NotCertified("inf f_B has not been supplied or estimated".to_string()))?;
    Ok(d + fa + fb)
}

fn residual_with(system: &ExternalFactorSystem, q: &Quadruple, s: f64) -> f64 {
    let lhs = system.potential(&system.step(q));
    let rhs = system.lambda * system.potential(q) + (1.0 - system.lambda) * s;
    rhs - lhs
}

/// RHS − LHS of the contraction inequality at `q`:
///
/// `λ(ρ(x,y) + f_A(u) + f_B(v)) + (1−λ)S − [ρ(T_A(x,u), T_B(y,v)) + f_A(H_A(x,u)) + f_B(H_B(y,v))]`.
///
/// Nonnegative exactly when the inequality holds at `q`.
pub fn contraction_residual(system: &ExternalFactorSystem, q: &Quadruple) -> Result<f64> {
    if !system.p.contains(q) {
        return Err(Error::InvalidInput(format!("quadruple is not in P = {}", system.p.label)));
    }
    Ok(residual_with(system, q, s_value(system)?))
}

/// Outcome of [`check_p_invariance`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PInvariance {
    pub holds: bool,
    pub depth: usize,
    /// First `(n, m)` with `(x_n, y_m, u_n, v_m) ∉ P`, row-major.
    pub first_failure: Option<(usize, usize)>,
}

/// Condition C-1 to a finite depth: iterates both sides from `q` and checks
/// every cross-pairing `(x_n, y_m, u_n, v_m)` for `1 ≤ n, m ≤ depth`.
pub fn check_p_invariance(system: &ExternalFactorSystem, q: &Quadruple, depth: usize) -> PInvariance {
    if !system.p.contains(q) {
        return PInvariance { holds: false, depth, first_failure: Some((0, 0)) };
    }
    let run = |side: Side<'_>, x0: &Point, c0: &CElement| {
        let mut out = Vec::with_capacity(depth + 1);
        out.push((x0.clone(), c0.clone()));
        for n in 0..depth {
            let (x, c) = &out[n];
            let next = side.step(x, c);
            out.push(next);
        }
        out
    };
    let a = run(system.side_a(), &q.x, &q.u);
    let b = run(system.side_b(), &q.y, &q.v);
    for n in 1..=depth {
        for m in 1..=depth {
            let cross = Quadruple { x: a[n].0.clone(), y: b[m].0.clone(), u: a[n].1.clone(), v: b[m].1.clone() };
            if !system.p.contains(&cross) {
                return PInvariance { holds: false, depth, first_failure: Some((n, m)) };
            }
        }
    }
    PInvariance { holds: true, depth, first_failure: None }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CertifiedOnSamples,
    Refuted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyConfig {
    pub samples: usize,
    pub seed: u64,
    /// Depth of the C-1 check run from every sampled quadruple.
    pub depth: usize,
}

impl VerifyConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        VerifyConfig { samples, seed, depth: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PFailure {
    pub start: Quadruple,
    pub n: usize,
    pub m: usize,
}

/// Result of a sampled certification campaign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub verdict: Verdict,
    /// Smallest contraction residual over the sampled quadruples (C-3).
    pub min_residual: f64,
    pub samples: usize,
    pub seed: u64,
    pub lambda: f64,
    pub s_value: f64,
    /// Quadruple attaining a residual below `-1e-10`, when refuted by C-3.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Quadruple>,
    /// C-2: both infima are finite reals.
    pub infima_finite: bool,
    /// C-1 to `p_invariance_depth`, from every sampled quadruple.
    pub p_invariant: bool,
    pub p_invariance_depth: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_failure: Option<PFailure>,
}

/// Samples `P` and checks C-1..C-3.
///
/// The verdict is `certified-on-samples` iff every sampled residual is at
/// least `-1e-10`, both infima are finite and no C-1 failure was seen.
pub fn verify_contraction(system: &ExternalFactorSystem, cfg: VerifyConfig) -> Result<CertificationReport> {
    if cfg.samples == 0 {
        return Err(Error::InvalidInput("verify_contraction needs at least one sample".to_string()));
    }
    if !(0.0..1.0).contains(&system.lambda) {
        return Err(Error::InvalidInput(format!("lambda = {} is outside [0, 1)", system.lambda)));
    }
    let infima_finite = [system.f_a.inf, system.f_b.inf]
        .iter()
        .all(|q| q.value().is_some_and(f64::is_finite));
    let s = s_value(system)?;
    let mut rng = seeded_rng(cfg.seed);
    let mut min_residual = f64::INFINITY;
    let mut witness = None;
    let mut p_failure = None;
    for _ in 0..cfg.samples {
        let q = system.p.draw(&mut rng)?;
        let r = residual_with(system, &q, s);
        if r.is_nan() {
            return Err(Error::Numeric("contraction residual is NaN".to_string()));
        }
        if r < min_residual {
            min_residual = r;
            if r < -RESIDUAL_TOL {
                witness = Some(q.clone());
            }
        }
        if p_failure.is_none() && cfg.depth > 0 {
            let inv = check_p_invariance(system, &q, cfg.depth);
            if let Some((n, m)) = inv.first_failure {
                p_failure = Some(PFailure { start: q, n, m });
            }
        }
    }
    let certified = min_residual >= -RESIDUAL_TOL && infima_finite && p_failure.is_none();
    Ok(CertificationReport {
        verdict: if certified { Verdict::CertifiedOnSamples } else { Verdict::Refuted },
        min_residual,
        samples: cfg.samples,
        seed: cfg.seed,
        lambda: system.lambda,
        s_value: s,
        witness,
        infima_finite,
        p_invariant: p_failure.is_none(),
        p_invariance_depth: cfg.depth,
        p_failure,
    })
}

/// Lower estimate of the least admissible λ: the supremum over sampled `q ∈ P`
/// of `(LHS − S) / (ρ(x,y) + f_A(u) + f_B(v) − S)`, clipped to `[0, 1]`.
/// Quadruples whose denominator is at most `1e-12` are skipped.
pub fn estimate_min_lambda(system: &ExternalFactorSystem, samples: usize, seed: u64) -> Result<f64> {
    let s = s_value(system)?;
    let mut rng = seeded_rng(seed);
    let mut best: Option<f64> = None;
    for _ in 0..samples {
        let q = system.p.draw(&mut rng)?;
        let denom = system.potential(&q) - s;
        if denom <= 1e-12 {
            continue;
        }
        let ratio = (system.potential(&system.step(&q)) - s) / denom;
        if ratio.is_nan() {
            return Err(Error::Numeric("lambda ratio is NaN".to_string()));
        }
        best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
    }
    best.map(|b| b.clamp(0.0, 1.0))
        .ok_or_else(|| Error::EstimationFailure("every sampled quadruple was degenerate".to_string()))
}
