//! Points, metric spaces, regions and set pairs.
//!
//! Built-in spaces realize points as fixed-length coordinate vectors. Product
//! spaces carry the sum metric `d = ρ₁ + ρ₂` over the concatenated
//! coordinates, which is what both the product-pair construction and the
//! 3-cyclic reduction need.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

/// Seeded generator behind every sampler in the crate.
pub type SampleRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SampleRng {
    SampleRng::seed_from_u64(seed)
}

/// A point of a built-in space: a fixed-length vector of real coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn scalar(x: f64) -> Self {
        Point(alloc::vec![x])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// First coordinate; the natural reading of a point of `ℝ`.
    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn concat(a: &Point, b: &Point) -> Point {
        let mut v = Vec::with_capacity(a.dim() + b.dim());
        v.extend_from_slice(&a.0);
        v.extend_from_slice(&b.0);
        Point(v)
    }

    /// Splits a product-space point after `left_dim` coordinates.
    pub fn split(&self, left_dim: usize) -> (Point, Point) {
        let (l, r) = self.0.split_at(left_dim.min(self.dim()));
        (Point(l.to_vec()), Point(r.to_vec()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, c| if math::abs(*c) > m { math::abs(*c) } else { m })
    }
}

/// Semicolon-joined coordinates, shortest round-trip decimal form.
impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for Point {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::InvalidInput("empty point".to_string()));
        }
        s.split([';', ','])
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidInput(format!("bad coordinate {t:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Point)
    }
}

/// A metric space over coordinate vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Space {
    /// `ℝⁿ` with the Euclidean norm. `ℝ` with `|·−·|` is `Euclidean { dim: 1 }`.
    Euclidean { dim: usize },
    /// `ℝⁿ` with the sum of coordinate gaps.
    Manhattan { dim: usize },
    /// `X₁ × X₂` with `d = ρ₁ + ρ₂`.
    Product { left: Box<Space>, right: Box<Space> },
}

impl Space {
    pub fn real() -> Self {
        Space::Euclidean { dim: 1 }
    }

    pub fn product(left: &Space, right: &Space) -> Self {
        Space::Product { left: Box::new(left.clone()), right: Box::new(right.clone()) }
    }

    pub fn dim(&self) -> usize {
        match self {
            Space::Euclidean { dim } | Space::Manhattan { dim } => *dim,
            Space::Product { left, right } => left.dim() + right.dim(),
        }
    }

    /// `ρ(x, y)`. Fails on a dimension mismatch.
    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        let d = self.dim();
        if x.dim() != d || y.dim() != d {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: space has {d}, points have {} and {}",
                x.dim(),
                y.dim()
            )));
        }
        Ok(self.distance_unchecked(&x.0, &y.0))
    }

    pub(crate) fn distance_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Space::Euclidean { dim: 1 } => math::abs(x[0] - y[0]),
            Space::Euclidean { .. } => {
                math::sqrt(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum())
            }
            Space::Manhattan { .. } => x.iter().zip(y).map(|(a, b)| math::abs(a - b)).sum(),
            Space::Product { left, right } => {
                let k = left.dim();
                left.distance_unchecked(&x[..k], &y[..k]) + right.distance_unchecked(&x[k..], &y[k..])
            }
        }
    }
}

/// `ρ(x, y)` in `space`.
pub fn distance(space: &Space, x: &Point, y: &Point) -> Result<f64> {
    space.distance(x, y)
}

/// A value that is either supplied analytically, estimated by sampling, or
/// still to be estimated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Quantity {
    Exact(f64),
    Estimated(f64),
    Unresolved,
}

impl Quantity {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Quantity::Exact(v) | Quantity::Estimated(v) => Some(v),
            Quantity::Unresolved => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Quantity::Exact(_))
    }

    /// Sum of two quantities; exact only when both are.
    pub fn plus(self, other: Quantity) -> Quantity {
        match (self, other) {
            (Quantity::Exact(a), Quantity::Exact(b)) => Quantity::Exact(a + b),
            (a, b) => match (a.value(), b.value()) {
                (Some(a), Some(b)) => Quantity::Estimated(a + b),
                _ => Quantity::Unresolved,
            },
        }
    }
}

/// Whether a set distance was supplied or estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Exact,
    Estimated,
}

pub type Membership = Arc<dyn Fn(&Point) -> bool + Send + Sync>;
pub type PointSampler = Arc<dyn Fn(&mut SampleRng) -> Option<Point> + Send + Sync>;

/// A real interval, possibly unbounded or open at either end.
///
/// Unbounded ends are sampled inside a finite window, `[-100, 100]` unless
/// overridden.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub lo_open: bool,
    #[serde(default)]
    pub hi_open: bool,
    #[serde(default)]
    pub window: Option<(f64, f64)>,
}

pub const DEFAULT_WINDOW: (f64, f64) = (-100.0, 100.0);

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_open: false, hi_open: false, window: None }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Interval { lo, hi, lo_open: true, hi_open: true, window: None }
    }

    /// `[lo, ∞)`
    pub fn at_least(lo: f64) -> Self {
        Interval::closed(lo, f64::INFINITY)
    }

    /// `(−∞, hi]`
    pub fn at_most(hi: f64) -> Self {
        Interval::closed(f64::NEG_INFINITY, hi)
    }

    pub fn with_window(mut self, lo: f64, hi: f64) -> Self {
        self.window = Some((lo, hi));
        self
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_open { x > self.lo } else { x >= self.lo };
        let below = if self.hi_open { x < self.hi } else { x <= self.hi };
        above && below
    }

    /// The part of the interval the sampler draws from.
    pub fn sampling_bounds(&self) -> (f64, f64) {
        let (wlo, whi) = self.window.unwrap_or(DEFAULT_WINDOW);
        (self.lo.max(wlo), self.hi.min(whi))
    }

    pub fn is_closed(&self) -> bool {
        !self.lo_open && !self.hi_open
    }

    /// Gap between two intervals.
    pub fn gap(&self, other: &Interval) -> f64 {
        (other.lo - self.hi).max(self.lo - other.hi).max(0.0)
    }

    fn draw(&self, rng: &mut SampleRng) -> Option<f64> {
        let (lo, hi) = self.sampling_bounds();
        if !(lo <= hi) {
            return None;
        }
        if lo == hi {
            return self.contains(lo).then_some(lo);
        }
        for _ in 0..64 {
            let x = rng.gen_range(lo..=hi);
            if self.contains(x) {
                return Some(x);
            }
        }
        None
    }
}

/// A subset of a space: a membership predicate plus a seeded sampler.
#[derive(Clone)]
pub struct Region {
    label: String,
    dim: usize,
    contains: Membership,
    sampler: PointSampler,
    complete: bool,
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Region")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("complete", &self.complete)
            .finish()
    }
}

impl Region {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        contains: impl Fn(&Point) -> bool + Send + Sync + 'static,
        sampler: impl Fn(&mut SampleRng) -> Option<Point> + Send + Sync + 'static,
    ) -> Self {
        Region {
            label: label.into(),
            dim,
            contains: Arc::new(contains),
            sampler: Arc::new(sampler),
            complete: false,
        }
    }

    /// Marks the region as complete. This is the author's assertion; it is
    /// never checked.
    pub fn with_complete(mut self, complete: bool) -> Self {
        self.complete = complete;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.dim() == self.dim && p.is_finite() && (self.contains)(p)
    }

    pub fn interval(iv: Interval) -> Self {
        let label = format!(
            "{}{}, {}{}",
            if iv.lo_open { '(' } else { '[' },
            iv.lo,
            iv.hi,
            if iv.hi_open { ')' } else { ']' }
        );
        Region::new(label, 1, move |p| iv.contains(p.x()), move |rng| iv.draw(rng).map(Point::scalar))
            .with_complete(iv.is_closed())
    }

    pub fn singleton(p: Point) -> Self {
        let q = p.clone();
        Region::new(format!("{{{p}}}"), p.dim(), move |x| *x == q, move |_| Some(p.clone()))
            .with_complete(true)
    }

    /// Circle of the given radius around `center` in the Euclidean plane.
    pub fn circle(center: (f64, f64), radius: f64) -> Self {
        let (cx, cy) = center;
        Region::new(
            format!("circle(({cx}, {cy}), {radius})"),
            2,
            move |p| {
                let r = math::sqrt((p.0[0] - cx) * (p.0[0] - cx) + (p.0[1] - cy) * (p.0[1] - cy));
                math::abs(r - radius) <= 1e-12 * (1.0 + radius)
            },
            move |rng| {
                let th = rng.gen_range(0.0..core::f64::consts::TAU);
                Some(Point(alloc::vec![cx + radius * math::cos(th), cy + radius * math::sin(th)]))
            },
        )
        .with_complete(true)
    }

    /// `R₁ × R₂` over concatenated coordinates.
    pub fn product(left: &Region, right: &Region) -> Self {
        let k = left.dim;
        let (l1, r1) = (left.clone(), right.clone());
        let (l2, r2) = (left.clone(), right.clone());
        Region::new(
            format!("{} x {}", left.label, right.label),
            left.dim + right.dim,
            move |p| {
                let (a, b) = p.split(k);
                l1.contains(&a) && r1.contains(&b)
            },
            move |rng| {
                let a = (l2.sampler)(rng)?;
                let b = (r2.sampler)(rng)?;
                Some(Point::concat(&a, &b))
            },
        )
        .with_complete(left.complete && right.complete)
    }

    /// The diagonal `{(a, a) : a ∈ R}` inside `R × R`.
    pub fn diagonal(base: &Region) -> Self {
        let k = base.dim;
        let (b1, b2) = (base.clone(), base.clone());
        Region::new(
            format!("diag({})", base.label),
            2 * k,
            move |p| {
                let (a, b) = p.split(k);
                a == b && b1.contains(&a)
            },
            move |rng| (b2.sampler)(rng).map(|a| Point::concat(&a, &a)),
        )
        .with_complete(base.complete)
    }

    /// One draw, checked for membership.
    pub fn draw(&self, rng: &mut SampleRng) -> Result<Point> {
        let p = (self.sampler)(rng)
            .ok_or_else(|| Error::EstimationFailure(format!("sampler for {} exhausted", self.label)))?;
        if !self.contains(&p) {
            return Err(Error::EstimationFailure(format!(
                "sampler for {} produced non-member {p}",
                self.label
            )));
        }
        Ok(p)
    }

    /// `n` members, reproducible per seed.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Point>> {
        let mut rng = seeded_rng(seed);
        (0..n).map(|_| self.draw(&mut rng)).collect()
    }
}

/// `sample_region`: `n` seeded members of `region`.
pub fn sample_region(region: &Region, n: usize, seed: u64) -> Result<Vec<Point>> {
    region.sample(n, seed)
}

/// Regions `A`, `B` in one space together with `dist(A, B)`.
#[derive(Clone, Debug)]
pub struct SetPair {
    pub space: Space,
    pub a: Region,
    pub b: Region,
    pub dist: Quantity,
}

impl SetPair {
    pub fn new(space: Space, a: Region, b: Region, dist: Quantity) -> Self {
        SetPair { space, a, b, dist }
    }

    pub fn dist_value(&self) -> Result<f64> {
        self.dist
            .value()
            .ok_or_else(|| Error::NotCertified("dist(A, B) has not been supplied or estimated".to_string()))
    }

    /// Replaces an unresolved distance with a sampled estimate.
    pub fn resolve_distance(&mut self, samples: usize, seed: u64) -> Result<()> {
        if self.dist == Quantity::Unresolved {
            let (v, _) = set_distance(self, samples, seed)?;
            self.dist = Quantity::Estimated(v);
        }
        Ok(())
    }
}

/// `dist(A, B)`: the supplied exact value, or the minimum cross-distance over
/// `samples × samples` seeded draws (an upper estimate of the infimum).
pub fn set_distance(pair: &SetPair, samples: usize, seed: u64) -> Result<(f64, DistanceKind)> {
    if let Quantity::Exact(v) = pair.dist {
        return Ok((v, DistanceKind::Exact));
    }
    if samples == 0 {
        return Err(Error::EstimationFailure("estimating dist(A, B) needs at least one sample".to_string()));
    }
    let xs = pair.a.sample(samples, seed)?;
    let ys = pair.b.sample(samples, seed.wrapping_add(1))?;
    let mut best = f64::INFINITY;
    for x in &xs {
        for y in &ys {
            let d = pair.space.distance_unchecked(&x.0, &y.0);
            if d < best {
                best = d;
            }
        }
    }
    Ok((best, DistanceKind::Estimated))
}

/// `(A₁ × A₂, B₁ × B₂)` in `(X₁ × X₂, ρ₁ + ρ₂)`. The distance is the sum of the
/// component distances, exact only when both are.
pub fn product_space(p1: &SetPair, p2: &SetPair) -> SetPair {
    SetPair {
        space: Space::product(&p1.space, &p2.space),
        a: Region::product(&p1.a, &p2.a),
        b: Region::product(&p1.b, &p2.b),
        dist: p1.dist.plus(p2.dist),
    }
}
