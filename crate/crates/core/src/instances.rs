//! Built-in systems.
//!
//! - the dyadic example on `A = [0, ∞)`, `B = (−∞, −1]` with `λ = 5/8`;
//! - the Banach degenerate case `A = B`, `C = {atom}`, `f ≡ 0`;
//! - products of two systems under the sum metric;
//! - the reduction of a 3-cyclic summing contraction to a paired system on
//!   `(A₁ × A₁, A₂ × A₃)` with `λ = k³`, and the best-proximity solver built on it.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cef::{CElement, CUniverse, ExternalFactor, ExternalFactorSystem, Quadruple, RelationP};
use crate::iterate::{limit_uniqueness_check, run_paired, Decision, RunConfig, StopReason};
use crate::math;
use crate::metric::{seeded_rng, Interval, Point, Quantity, Region, SampleRng, SetPair, Space};
use crate::{Error, Result, RESIDUAL_TOL};

/// Samples used by construction-time contraction probes.
pub const CONSTRUCTION_PROBES: usize = 4096;

// ---------------------------------------------------------------------------
// The dyadic example
// ---------------------------------------------------------------------------

/// `α(x) = ⌊log₂ x⌋ mod 2` for `x > 0` (Euclidean mod, so the result is in
/// `{0, 1}` also below 1), and `α(0) = 0`.
pub fn alpha_parity(x: f64) -> Result<u8> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::InvalidInput(format!("alpha is defined on [0, ∞), got {x}")));
    }
    Ok(parity(x))
}

fn parity(x: f64) -> u8 {
    if x == 0.0 {
        0
    } else {
        math::floor_log2(x).rem_euclid(2) as u8
    }
}

/// `2^⌊log₂ x⌋`, with `0` at `x = 0`.
fn leading_power(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        math::exp2i(math::floor_log2(x))
    }
}

/// `Tx = 2x·α(x) + ¼(x − 2^⌊log₂ x⌋)(1 − α(x))` on `[0, ∞)`.
pub fn example1_t(x: f64) -> Result<f64> {
    alpha_parity(x)?;
    Ok(dyadic_t(x))
}

fn dyadic_t(x: f64) -> f64 {
    if parity(x) == 1 {
        2.0 * x
    } else {
        0.25 * (x - leading_power(x))
    }
}

/// `T_B(b) = (b+1)/8 + (15/8)(b+1)·α(−b−1) − 1` on `(−∞, −1]`.
fn dyadic_t_b(b: f64) -> f64 {
    let s = -b - 1.0;
    (b + 1.0) / 8.0 + 15.0 / 8.0 * (b + 1.0) * f64::from(parity(s.max(0.0))) - 1.0
}

fn dyadic_f_a(c: &CElement) -> f64 {
    match c {
        CElement::Vector(p) if p.dim() == 1 => {
            let c = p.x();
            if c >= 0.0 {
                4.0 * c * f64::from(parity(c))
            } else if c <= -1.0 {
                0.0
            } else {
                f64::NAN
            }
        }
        _ => f64::NAN,
    }
}

fn dyadic_f_b(c: &CElement) -> f64 {
    match c {
        CElement::Vector(p) if p.dim() == 1 => {
            let c = p.x();
            if c >= 0.0 {
                0.0
            } else if c <= -1.0 {
                -4.0 * (c + 1.0) * f64::from(parity(-c - 1.0))
            } else {
                f64::NAN
            }
        }
        _ => f64::NAN,
    }
}

/// `A = [0, ∞)`, `B = (−∞, −1]`, `dist = 1`; sampled over `[0, 100]` and `[−100, −1]`.
pub fn example1_pair() -> SetPair {
    SetPair::new(
        Space::real(),
        Region::interval(Interval::at_least(0.0)),
        Region::interval(Interval::at_most(-1.0)),
        Quantity::Exact(1.0),
    )
}

/// `(a, b, a, b)`: the only admissible quadruples of the dyadic example.
pub fn example1_start(x0: f64, y0: f64) -> Quadruple {
    Quadruple::new(Point::scalar(x0), Point::scalar(y0), CElement::scalar(x0), CElement::scalar(y0))
}

/// The dyadic example system: `C = A ∪ B`, `P = {(a, b, a, b)}`, `λ = 5/8`,
/// `inf f_A = inf f_B = 0`, `dist(A, B) = 1`.
pub fn example1_system() -> ExternalFactorSystem {
    let pair = example1_pair();
    let (a1, b1) = (pair.a.clone(), pair.b.clone());
    let (a2, b2) = (pair.a.clone(), pair.b.clone());
    let (a3, b3) = (pair.a.clone(), pair.b.clone());
    let p = RelationP::new(
        "{(a, b, a, b)}",
        move |q| {
            a1.contains(&q.x) && b1.contains(&q.y) && q.u == CElement::Vector(q.x.clone()) && q.v == CElement::Vector(q.y.clone())
        },
        move |rng| {
            let x = a2.draw(rng).ok()?;
            let y = b2.draw(rng).ok()?;
            Some(Quadruple::new(x.clone(), y.clone(), CElement::Vector(x), CElement::Vector(y)))
        },
    );
    let c_universe = CUniverse::new("A ∪ B", move |rng: &mut SampleRng| {
        let side = if rng.gen_bool(0.5) { &a3 } else { &b3 };
        side.draw(rng).ok().map(CElement::Vector)
    });
    ExternalFactorSystem {
        name: "e1".to_string(),
        pair,
        c_universe,
        t_a: Arc::new(|x, _| Point::scalar(dyadic_t(x.x()))),
        h_a: Arc::new(|x, _| CElement::scalar(dyadic_t(x.x()))),
        t_b: Arc::new(|y, _| Point::scalar(dyadic_t_b(y.x()))),
        h_b: Arc::new(|y, _| CElement::scalar(dyadic_t_b(y.x()))),
        f_a: ExternalFactor::new(dyadic_f_a, Quantity::Exact(0.0)),
        f_b: ExternalFactor::new(dyadic_f_b, Quantity::Exact(0.0)),
        p,
        lambda: 5.0 / 8.0,
    }
}

/// `𝕃 = {x ≥ 0 : α(x) = 0}`
pub fn in_example1_level_set(x: f64) -> bool {
    x >= 0.0 && parity(x) == 0
}

// ---------------------------------------------------------------------------
// Banach degenerate case
// ---------------------------------------------------------------------------

/// The atom that is the whole of `C` in the Banach case.
pub const BANACH_ATOM: CElement = CElement::Atom(0);

/// The classical contraction as a degenerate system: `A = B = region`,
/// `C = {atom}`, `f_A = f_B ≡ 0`, `P = A × B × {atom}²`, so `S = 0` and the
/// contraction inequality reads `ρ(Tx, Ty) ≤ λ ρ(x, y)`.
///
/// Probes the map on [`CONSTRUCTION_PROBES`] sampled pairs and refuses it when
/// the sampled Lipschitz ratio exceeds `lipschitz` or the map leaves the region.
pub fn banach_system(
    map: impl Fn(&Point) -> Point + Send + Sync + 'static,
    space: Space,
    region: Region,
    lipschitz: f64,
) -> Result<ExternalFactorSystem> {
    banach_system_probed(map, space, region, lipschitz, CONSTRUCTION_PROBES, 0)
}

pub fn banach_system_probed(
    map: impl Fn(&Point) -> Point + Send + Sync + 'static,
    space: Space,
    region: Region,
    lipschitz: f64,
    probes: usize,
    seed: u64,
) -> Result<ExternalFactorSystem> {
    if !(0.0..1.0).contains(&lipschitz) {
        return Err(Error::InvalidInput(format!("Lipschitz constant {lipschitz} is outside [0, 1)")));
    }
    let sys = banach_system_unchecked(map, space, region, lipschitz);
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let x = sys.pair.a.draw(&mut rng)?;
        let y = sys.pair.a.draw(&mut rng)?;
        let (tx, ty) = ((sys.t_a)(&x, &BANACH_ATOM), (sys.t_a)(&y, &BANACH_ATOM));
        if !sys.pair.a.contains(&tx) || !sys.pair.a.contains(&ty) {
            return Err(Error::Refuted(format!("map sends a point of {} outside the region", sys.pair.a.label())));
        }
        let d = sys.pair.space.distance(&x, &y)?;
        if d > 1e-12 {
            worst = worst.max(sys.pair.space.distance(&tx, &ty)? / d);
        }
    }
    if worst > lipschitz + 1e-12 {
        return Err(Error::Refuted(format!("sampled Lipschitz ratio {worst} exceeds declared {lipschitz}")));
    }
    Ok(sys)
}

/// [`banach_system`] without the probe, for negative controls.
pub fn banach_system_unchecked(
    map: impl Fn(&Point) -> Point + Send + Sync + 'static,
    space: Space,
    region: Region,
    lambda: f64,
) -> ExternalFactorSystem {
    let map = Arc::new(map);
    let (m1, m2) = (map.clone(), map);
    let (r1, r2) = (region.clone(), region.clone());
    let p = RelationP::new(
        "A x B x {atom}^2",
        move |q| r1.contains(&q.x) && r1.contains(&q.y) && q.u == BANACH_ATOM && q.v == BANACH_ATOM,
        move |rng| {
            let x = r2.draw(rng).ok()?;
            let y = r2.draw(rng).ok()?;
            Some(Quadruple::new(x, y, BANACH_ATOM, BANACH_ATOM))
        },
    );
    ExternalFactorSystem {
        name: "banach".to_string(),
        pair: SetPair::new(space, region.clone(), region, Quantity::Exact(0.0)),
        c_universe: CUniverse::new("{atom}", |_| Some(BANACH_ATOM)),
        t_a: Arc::new(move |x, _| m1(x)),
        h_a: Arc::new(|_, _| BANACH_ATOM),
        t_b: Arc::new(move |x, _| m2(x)),
        h_b: Arc::new(|_, _| BANACH_ATOM),
        f_a: ExternalFactor::zero(),
        f_b: ExternalFactor::zero(),
        p,
        lambda,
    }
}

/// `x ↦ slope·x + offset` on ℝ.
pub fn affine_map(slope: f64, offset: f64) -> impl Fn(&Point) -> Point + Send + Sync + Clone + 'static {
    move |x: &Point| Point::new(x.coords().iter().map(|c| slope * c + offset).collect())
}

/// Banach start `(x₀, y₀, atom, atom)`.
pub fn banach_start(x0: Point, y0: Point) -> Quadruple {
    Quadruple::new(x0, y0, BANACH_ATOM, BANACH_ATOM)
}

// ---------------------------------------------------------------------------
// Products
// ---------------------------------------------------------------------------

/// Component-wise product of two systems on `(A₁ × A₂, B₁ × B₂)` with the sum
/// metric: `C = C₁ × C₂` (as [`CElement::Pair`]), penalties added, `P` the
/// conjunction of the component relations and `λ = max(λ₁, λ₂)`.
pub fn product_system(s1: &ExternalFactorSystem, s2: &ExternalFactorSystem) -> ExternalFactorSystem {
    let pair = crate::metric::product_space(&s1.pair, &s2.pair);
    let ka = s1.pair.space.dim();

    let split_c = |c: &CElement| -> Option<(CElement, CElement)> {
        match c {
            CElement::Pair(a, b) => Some(((**a).clone(), (**b).clone())),
            _ => None,
        }
    };

    let state = |t1: crate::cef::StateMap, t2: crate::cef::StateMap| -> crate::cef::StateMap {
        Arc::new(move |x: &Point, c: &CElement| {
            let (x1, x2) = x.split(ka);
            match split_c(c) {
                Some((c1, c2)) => Point::concat(&t1(&x1, &c1), &t2(&x2, &c2)),
                None => Point::new(vec![f64::NAN; x.dim()]),
            }
        })
    };
    let factor = |h1: crate::cef::FactorMap, h2: crate::cef::FactorMap| -> crate::cef::FactorMap {
        Arc::new(move |x: &Point, c: &CElement| {
            let (x1, x2) = x.split(ka);
            match split_c(c) {
                Some((c1, c2)) => CElement::pair(h1(&x1, &c1), h2(&x2, &c2)),
                None => CElement::Vector(Point::new(vec![f64::NAN])),
            }
        })
    };
    let penalty = |f1: &ExternalFactor, f2: &ExternalFactor| -> ExternalFactor {
        let (g1, g2) = (f1.f.clone(), f2.f.clone());
        ExternalFactor::new(
            move |c| match split_c(c) {
                Some((c1, c2)) => g1(&c1) + g2(&c2),
                None => f64::NAN,
            },
            f1.inf.plus(f2.inf),
        )
    };

    let (p1, p2) = (s1.p.clone(), s2.p.clone());
    let (p1s, p2s) = (s1.p.clone(), s2.p.clone());
    let p = RelationP::new(
        format!("{} ∧ {}", s1.p.label, s2.p.label),
        move |q| {
            let (x1, x2) = q.x.split(ka);
            let (y1, y2) = q.y.split(ka);
            match (split_c(&q.u), split_c(&q.v)) {
                (Some((u1, u2)), Some((v1, v2))) => {
                    p1.contains(&Quadruple::new(x1, y1, u1, v1)) && p2.contains(&Quadruple::new(x2, y2, u2, v2))
                }
                _ => false,
            }
        },
        move |rng| {
            let a = p1s.draw(rng).ok()?;
            let b = p2s.draw(rng).ok()?;
            Some(product_quadruple(&a, &b))
        },
    );

    let c_universe = match (&s1.c_universe.sampler, &s2.c_universe.sampler) {
        (Some(c1), Some(c2)) => {
            let (c1, c2) = (c1.clone(), c2.clone());
            CUniverse::new(format!("{} x {}", s1.c_universe.label, s2.c_universe.label), move |rng| {
                Some(CElement::pair(c1(rng)?, c2(rng)?))
            })
        }
        _ => CUniverse::opaque(format!("{} x {}", s1.c_universe.label, s2.c_universe.label)),
    };

    ExternalFactorSystem {
        name: format!("{} x {}", s1.name, s2.name),
        pair,
        c_universe,
        t_a: state(s1.t_a.clone(), s2.t_a.clone()),
        h_a: factor(s1.h_a.clone(), s2.h_a.clone()),
        t_b: state(s1.t_b.clone(), s2.t_b.clone()),
        h_b: factor(s1.h_b.clone(), s2.h_b.clone()),
        f_a: penalty(&s1.f_a, &s2.f_a),
        f_b: penalty(&s1.f_b, &s2.f_b),
        p,
        lambda: s1.lambda.max(s2.lambda),
    }
}

/// Glues two component quadruples into one of the product system.
pub fn product_quadruple(a: &Quadruple, b: &Quadruple) -> Quadruple {
    Quadruple::new(
        Point::concat(&a.x, &b.x),
        Point::concat(&a.y, &b.y),
        CElement::pair(a.u.clone(), b.u.clone()),
        CElement::pair(a.v.clone(), b.v.clone()),
    )
}

// ---------------------------------------------------------------------------
// 3-cyclic summing contractions
// ---------------------------------------------------------------------------

pub type PointMap = Arc<dyn Fn(&Point) -> Point + Send + Sync>;

/// Three regions with a cyclic map `T(Aᵢ) ⊆ Aᵢ₊₁` and the summing constant `k`.
#[derive(Clone)]
pub struct CyclicTriple {
    pub name: String,
    pub space: Space,
    pub regions: [Region; 3],
    pub map: PointMap,
    pub k: f64,
    /// `[d₁₂, d₂₃, d₃₁]`
    pub gaps: [f64; 3],
}

impl core::fmt::Debug for CyclicTriple {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("CyclicTriple")
            .field("name", &self.name)
            .field("space", &self.space)
            .field("regions", &self.regions)
            .field("k", &self.k)
            .field("gaps", &self.gaps)
            .finish()
    }
}

impl CyclicTriple {
    /// `D = d₁₂ + d₂₃ + d₃₁`
    pub fn d(&self) -> f64 {
        self.gaps.iter().sum()
    }

    /// The same triple read from `A₂` (`rotation = 1`) or `A₃` (`rotation = 2`).
    pub fn rotated(&self, rotation: usize) -> CyclicTriple {
        let r = rotation % 3;
        CyclicTriple {
            name: format!("{}@{}", self.name, r),
            space: self.space.clone(),
            regions: [0, 1, 2].map(|i| self.regions[(i + r) % 3].clone()),
            map: self.map.clone(),
            k: self.k,
            gaps: [0, 1, 2].map(|i| self.gaps[(i + r) % 3]),
        }
    }

    fn apply(&self, x: &Point) -> Point {
        (self.map)(x)
    }

    fn cube(&self, x: &Point) -> Point {
        self.apply(&self.apply(&self.apply(x)))
    }

    fn perimeter(&self, x: [&Point; 3]) -> f64 {
        let d = |a: &Point, b: &Point| self.space.distance_unchecked(&a.0, &b.0);
        d(x[0], x[1]) + d(x[1], x[2]) + d(x[2], x[0])
    }
}

/// RHS − LHS of the summing-contraction inequality at `(x₁, x₂, x₃)`:
/// `k·(Σ ρ(xᵢ, xⱼ)) + (1 − k)·D − Σ ρ(Txᵢ, Txⱼ)`.
pub fn bz_residual(ct: &CyclicTriple, x: [&Point; 3]) -> f64 {
    let tx = [ct.apply(x[0]), ct.apply(x[1]), ct.apply(x[2])];
    ct.k * ct.perimeter(x) + (1.0 - ct.k) * ct.d() - ct.perimeter([&tx[0], &tx[1], &tx[2]])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CyclicCertification {
    pub samples: usize,
    pub seed: u64,
    pub min_residual: f64,
    /// Every sampled `T(xᵢ)` lies in `Aᵢ₊₁`.
    pub cyclic: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<[Point; 3]>,
}

impl CyclicCertification {
    pub fn certified(&self) -> bool {
        self.cyclic && self.min_residual >= -RESIDUAL_TOL
    }
}

/// Samples triples `(x₁, x₂, x₃) ∈ A₁ × A₂ × A₃` and checks cyclic image
/// containment and the summing-contraction inequality.
pub fn certify_cyclic(ct: &CyclicTriple, samples: usize, seed: u64) -> Result<CyclicCertification> {
    let mut rng = seeded_rng(seed);
    let mut min_residual = f64::INFINITY;
    let mut cyclic = true;
    let mut witness = None;
    for _ in 0..samples {
        let x = [ct.regions[0].draw(&mut rng)?, ct.regions[1].draw(&mut rng)?, ct.regions[2].draw(&mut rng)?];
        for i in 0..3 {
            if !ct.regions[(i + 1) % 3].contains(&ct.apply(&x[i])) {
                cyclic = false;
            }
        }
        let r = bz_residual(ct, [&x[0], &x[1], &x[2]]);
        if r < min_residual {
            min_residual = r;
            if r < -RESIDUAL_TOL {
                witness = Some(x.clone());
            }
        }
    }
    Ok(CyclicCertification { samples, seed, min_residual, cyclic, witness })
}

/// Atom adjoined to `A₂ × A₃` to form `C` in the reduction.
pub const REDUCTION_ATOM: CElement = CElement::Atom(1);

/// Reduces a 3-cyclic summing contraction to a paired system:
///
/// `A = A₁ × A₁`, `B = A₂ × A₃`, `C = (A₂ × A₃) ∪ {1}` over the sum metric,
/// `P = {((a, a), (b, c), 1, (b, c))}`, `T_A((a₁, a₂), ·) = (T³a₁, T³a₂)`,
/// `H_A ≡ 1`, `T_B((b, c), ·) = (T³b, T³c)`, `H_B = T_B`, `f_A ≡ 0`,
/// `f_B(b, c) = ρ(b, c)` with `f_B(1) = d₂₃`, and `λ = k³`.
///
/// The triple is first probed on [`CONSTRUCTION_PROBES`] samples; a residual
/// below `-1e-10` or a broken cyclic containment refutes it.
pub fn cyclic3_reduce(ct: &CyclicTriple) -> Result<ExternalFactorSystem> {
    let cert = certify_cyclic(ct, CONSTRUCTION_PROBES, 0)?;
    if !cert.certified() {
        return Err(Error::Refuted(format!(
            "{}: summing-contraction residual {} (cyclic containment {})",
            ct.name, cert.min_residual, cert.cyclic
        )));
    }
    Ok(cyclic3_reduce_unchecked(ct))
}

pub fn cyclic3_reduce_unchecked(ct: &CyclicTriple) -> ExternalFactorSystem {
    let dim = ct.space.dim();
    let square = Space::product(&ct.space, &ct.space);
    let [a1, a2, a3] = ct.regions.clone();
    let [d12, d23, d31] = ct.gaps;
    let a = Region::product(&a1, &a1);
    let b = Region::product(&a2, &a3);
    let g = Region::diagonal(&a1);

    let cube = |ct: CyclicTriple| -> crate::cef::StateMap {
        Arc::new(move |x: &Point, _: &CElement| {
            let (l, r) = x.split(dim);
            Point::concat(&ct.cube(&l), &ct.cube(&r))
        })
    };
    let t_b = cube(ct.clone());
    let t_b2 = t_b.clone();

    let base = ct.space.clone();
    let f_b = ExternalFactor::new(
        move |c| match c {
            CElement::Vector(p) if p.dim() == 2 * dim => {
                let (l, r) = p.split(dim);
                base.distance_unchecked(&l.0, &r.0)
            }
            CElement::Atom(1) => d23,
            _ => f64::NAN,
        },
        Quantity::Exact(d23),
    );

    let (g1, b1) = (g.clone(), b.clone());
    let (g2, b2) = (g, b.clone());
    let p = RelationP::new(
        "{((a, a), (b, c), 1, (b, c))}",
        move |q| g1.contains(&q.x) && b1.contains(&q.y) && q.u == REDUCTION_ATOM && q.v == CElement::Vector(q.y.clone()),
        move |rng| {
            let x = g2.draw(rng).ok()?;
            let y = b2.draw(rng).ok()?;
            Some(Quadruple::new(x, y.clone(), REDUCTION_ATOM, CElement::Vector(y)))
        },
    );
    let b3 = b.clone();
    let c_universe = CUniverse::new("(A2 x A3) ∪ {1}", move |rng: &mut SampleRng| {
        if rng.gen_bool(0.1) {
            Some(REDUCTION_ATOM)
        } else {
            b3.draw(rng).ok().map(CElement::Vector)
        }
    });

    ExternalFactorSystem {
        name: format!("{}-reduction", ct.name),
        pair: SetPair::new(square, a, b, Quantity::Exact(d12 + d31)),
        c_universe,
        t_a: cube(ct.clone()),
        h_a: Arc::new(|_, _| REDUCTION_ATOM),
        t_b,
        h_b: Arc::new(move |y, v| CElement::Vector(t_b2(y, v))),
        f_a: ExternalFactor::zero(),
        f_b,
        p,
        lambda: ct.k * ct.k * ct.k,
    }
}

/// Start `((a, a), (b, c), 1, (b, c))` of the reduction.
pub fn reduction_start(a: &Point, b: &Point, c: &Point) -> Quadruple {
    let y = Point::concat(b, c);
    Quadruple::new(Point::concat(a, a), y.clone(), REDUCTION_ATOM, CElement::Vector(y))
}

/// `Aᵢ = {i·10}` on ℝ with `T` the 3-cycle `10 → 20 → 30 → 10`. Every
/// inequality holds with equality, for any `k`.
pub fn singleton_cyclic_triple(k: f64) -> CyclicTriple {
    let pts = [10.0, 20.0, 30.0];
    CyclicTriple {
        name: "cyclic3-singleton".to_string(),
        space: Space::real(),
        regions: pts.map(|v| Region::singleton(Point::scalar(v))),
        map: Arc::new(move |x: &Point| {
            let v = x.x();
            let next = if v == pts[0] {
                pts[1]
            } else if v == pts[1] {
                pts[2]
            } else if v == pts[2] {
                pts[0]
            } else {
                f64::NAN
            };
            Point::scalar(next)
        }),
        k,
        gaps: [10.0, 10.0, 20.0],
    }
}

/// Contraction factor of the shipped affine triple. A 41³ grid oracle over
/// the segment parameters puts the least admissible `k` at 0.5 (tight).
pub const AFFINE_K: f64 = 0.5;

/// Vertices `p₁, p₂, p₃` of the unit equilateral triangle used by
/// [`affine_cyclic_example`], and the outward unit directions `eᵢ`.
pub fn triangle_frame() -> ([[f64; 2]; 3], [[f64; 2]; 3]) {
    let h = math::sqrt(3.0) / 2.0;
    let p = [[0.0, 0.0], [1.0, 0.0], [0.5, h]];
    let c = [0.5, h / 3.0];
    let e = p.map(|v| {
        let (dx, dy) = (v[0] - c[0], v[1] - c[1]);
        let n = math::sqrt(dx * dx + dy * dy);
        [dx / n, dy / n]
    });
    (p, e)
}

const SEGMENT_SLACK: f64 = 1e-9;

fn segment_param(p: [f64; 2], e: [f64; 2], x: &Point) -> Option<f64> {
    if x.dim() != 2 {
        return None;
    }
    let (dx, dy) = (x.0[0] - p[0], x.0[1] - p[1]);
    let t = dx * e[0] + dy * e[1];
    let off = dx * e[1] - dy * e[0];
    (math::abs(off) <= SEGMENT_SLACK && (-SEGMENT_SLACK..=1.0 + SEGMENT_SLACK).contains(&t)).then_some(t.clamp(0.0, 1.0))
}

/// Three unit segments in the Euclidean plane, `Aᵢ = {pᵢ + t·eᵢ : t ∈ [0, 1]}`,
/// each pointing away from the centroid of the unit equilateral triangle
/// `p₁p₂p₃`. `T(pᵢ + t·eᵢ) = pᵢ₊₁ + (t/2)·eᵢ₊₁` maps each segment onto the
/// first half of the next one, contracting toward the facing vertex.
///
/// All three gaps equal 1 and are attained at the vertices, so the best
/// proximity points are `zᵢ = pᵢ`. The perimeter function is convex and
/// invariant under the 120° rotation, which gives the summing inequality with
/// `k = 1/2`.
pub fn affine_cyclic_example() -> CyclicTriple {
    let (p, e) = triangle_frame();
    let regions = [0, 1, 2].map(|i| {
        let (pi, ei) = (p[i], e[i]);
        Region::new(
            format!("A{}", i + 1),
            2,
            move |x| segment_param(pi, ei, x).is_some(),
            move |rng| {
                let t: f64 = rng.gen_range(0.0..=1.0);
                Some(Point::new(vec![pi[0] + t * ei[0], pi[1] + t * ei[1]]))
            },
        )
        .with_complete(true)
    });
    CyclicTriple {
        name: "cyclic3-affine".to_string(),
        space: Space::Euclidean { dim: 2 },
        regions,
        map: Arc::new(move |x: &Point| {
            for i in 0..3 {
                if let Some(t) = segment_param(p[i], e[i], x) {
                    let j = (i + 1) % 3;
                    let s = AFFINE_K * t;
                    return Point::new(vec![p[j][0] + s * e[j][0], p[j][1] + s * e[j][1]]);
                }
            }
            Point::new(vec![f64::NAN, f64::NAN])
        }),
        k: AFFINE_K,
        gaps: [1.0, 1.0, 1.0],
    }
}

/// Collinear intervals `[0, 1]`, `[2, 3]`, `[4, 5]` on ℝ with `T` contracting
/// each interval by `k` onto the end of the next one facing back. No `k < 1`
/// makes this a summing contraction: for `x₁ < x₂ < x₃` the perimeter is
/// `2(x₃ − x₁) ≥ 6 > D = 5`. Kept as a negative instance.
pub fn collinear_cyclic_triple(k: f64) -> CyclicTriple {
    let ivs = [Interval::closed(0.0, 1.0), Interval::closed(2.0, 3.0), Interval::closed(4.0, 5.0)];
    CyclicTriple {
        name: "cyclic3-collinear".to_string(),
        space: Space::real(),
        regions: ivs.map(Region::interval),
        map: Arc::new(move |x: &Point| {
            let v = x.x();
            let out = if ivs[0].contains(v) {
                2.0 + k * (1.0 - v)
            } else if ivs[1].contains(v) {
                4.0 + k * (v - 2.0)
            } else if ivs[2].contains(v) {
                1.0 - k * (5.0 - v)
            } else {
                f64::NAN
            };
            Point::scalar(out)
        }),
        k,
        gaps: [1.0, 1.0, 3.0],
    }
}

/// Best proximity points of a 3-cyclic summing contraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestProximityResult {
    pub z: [Point; 3],
    /// `|ρ(z₁, z₂) − d₁₂|`, `|ρ(z₂, z₃) − d₂₃|`, `|ρ(z₃, z₁) − d₃₁|`
    pub gap_residuals: [f64; 3],
    /// `ρ(Tz₁, z₂)`, `ρ(Tz₂, z₃)`, `ρ(Tz₃, z₁)`
    pub cycle_residuals: [f64; 3],
    pub steps: [usize; 3],
}

/// Runs the reduction from each of the three role-interchanged readings of the
/// triple. `starts[i]` must lie in `Aᵢ₊₁`; rotation `r` starts its `A`-side at
/// `(sᵣ, sᵣ)` and its `B`-side at `(sᵣ₊₁, sᵣ₊₂)`. `zᵣ₊₁` is the first half of
/// that run's limit.
pub fn cyclic3_solve(ct: &CyclicTriple, starts: &[Point; 3], cfg: RunConfig) -> Result<BestProximityResult> {
    let dim = ct.space.dim();
    let mut z: Vec<Point> = Vec::with_capacity(3);
    let mut steps = [0usize; 3];
    for r in 0..3 {
        let rt = ct.rotated(r);
        let sys = cyclic3_reduce(&rt)?;
        let q0 = reduction_start(&starts[r], &starts[(r + 1) % 3], &starts[(r + 2) % 3]);
        let (_, report) = run_paired(&sys, &q0, cfg)?;
        if report.stop_reason != StopReason::ToleranceMet {
            return Err(Error::Undecided(format!("rotation {r} stopped with {:?}", report.stop_reason)));
        }
        let alpha = report.limit.ok_or_else(|| Error::Undecided(format!("rotation {r} has no limit")))?;
        z.push(alpha.split(dim).0);
        steps[r] = report.steps;
    }
    let z: [Point; 3] = [z[0].clone(), z[1].clone(), z[2].clone()];
    let d = |a: &Point, b: &Point| ct.space.distance(a, b);
    let mut gap_residuals = [0.0; 3];
    let mut cycle_residuals = [0.0; 3];
    for i in 0..3 {
        let j = (i + 1) % 3;
        gap_residuals[i] = math::abs(d(&z[i], &z[j])? - ct.gaps[i]);
        cycle_residuals[i] = d(&ct.apply(&z[i]), &z[j])?;
    }
    Ok(BestProximityResult { z, gap_residuals, cycle_residuals, steps })
}

/// Consequence-2 check on the reduction: two diagonal starts `(a, a)`, `(a', a')`
/// sharing a `B`-side start lead to the same limit.
pub fn cyclic3_start_independence(ct: &CyclicTriple, a: &Point, a_prime: &Point, b: &Point, c: &Point, cfg: RunConfig) -> Result<Decision> {
    let sys = cyclic3_reduce(ct)?;
    limit_uniqueness_check(&sys, &reduction_start(a, b, c), &reduction_start(a_prime, b, c), cfg)
}

// ---------------------------------------------------------------------------
// Pairs and sequence generators for the UC / CD falsifiers
// ---------------------------------------------------------------------------

/// `A = (0, 1)`, `B = (2, 3)` on ℝ, `dist = 1`. Neither set is complete.
pub fn open_interval_pair() -> SetPair {
    SetPair::new(
        Space::real(),
        Region::interval(Interval::open(0.0, 1.0)),
        Region::interval(Interval::open(2.0, 3.0)),
        Quantity::Exact(1.0),
    )
}

/// `A` the unit circle around the origin, `B = {origin}`, `dist = 1`.
pub fn circle_origin_pair() -> SetPair {
    SetPair::new(
        Space::Euclidean { dim: 2 },
        Region::circle((0.0, 0.0), 1.0),
        Region::singleton(Point::new(vec![0.0, 0.0])),
        Quantity::Exact(1.0),
    )
}

/// Geometric approach `lim + sign·c·rⁿ` with random `c ∈ [0.01, 0.5]`,
/// `r ∈ [0.5, 0.9]`, for `n = 0..=n_last`.
fn geometric(lim: f64, sign: f64, n_last: usize, rng: &mut SampleRng) -> Vec<Point> {
    let c: f64 = rng.gen_range(0.01..=0.5);
    let r: f64 = rng.gen_range(0.5..=0.9);
    let mut out = Vec::with_capacity(n_last + 1);
    let mut t = c;
    for _ in 0..=n_last {
        out.push(Point::scalar(lim + sign * t));
        t *= r;
    }
    out
}

fn approach_signs(a_lim: f64, b_lim: f64) -> (f64, f64) {
    if a_lim >= b_lim {
        (1.0, -1.0)
    } else {
        (-1.0, 1.0)
    }
}

/// Candidates `({x_n}, {y_n})` for interval pairs: `x_n → a_lim` and
/// `y_n → b_lim` geometrically, each from the side facing away from the other
/// limit.
pub fn interval_cd_generator(
    a_lim: f64,
    b_lim: f64,
    n_last: usize,
) -> impl FnMut(usize, &mut SampleRng) -> crate::checkers::PairedSequences {
    let (sa, sb) = approach_signs(a_lim, b_lim);
    move |_, rng| crate::checkers::PairedSequences {
        x: geometric(a_lim, sa, n_last, rng),
        y: geometric(b_lim, sb, n_last, rng),
    }
}

/// As [`interval_cd_generator`] with a second, independently drawn `A`-side
/// sequence.
pub fn interval_uc_generator(
    a_lim: f64,
    b_lim: f64,
    n_last: usize,
) -> impl FnMut(usize, &mut SampleRng) -> crate::checkers::TripleSequences {
    let (sa, sb) = approach_signs(a_lim, b_lim);
    move |_, rng| crate::checkers::TripleSequences {
        x: geometric(a_lim, sa, n_last, rng),
        z: geometric(a_lim, sa, n_last, rng),
        y: geometric(b_lim, sb, n_last, rng),
    }
}

/// `x_n = 1 − 1/m³`, `y_n = 2 + 1/m³` with `m = max(n, 2)`, `n = 0..=n_last`:
/// the cross distances fall to `dist = 1` while `x_n` leaves `(0, 1)` through
/// its open end. With `n_last` a power of two the terms at `n_last/4`,
/// `n_last/2`, `n_last` are exact. At `n_last = 4096` the tail is within
/// `3e-11` of `dist`.
pub fn open_interval_escaping_generator(n_last: usize) -> impl FnMut(usize, &mut SampleRng) -> crate::checkers::PairedSequences {
    move |_, _| {
        let inv = |n: usize| {
            let m = n.max(2) as f64;
            1.0 / (m * m * m)
        };
        crate::checkers::PairedSequences {
            x: (0..=n_last).map(|n| Point::scalar(1.0 - inv(n))).collect(),
            y: (0..=n_last).map(|n| Point::scalar(2.0 + inv(n))).collect(),
        }
    }
}

/// Constant antipodal sequences `x_n = (cos θ, sin θ)`, `z_n = −x_n` on the
/// unit circle with `y_n` the origin; `θ` is drawn per candidate.
pub fn antipodal_generator(len: usize) -> impl FnMut(usize, &mut SampleRng) -> crate::checkers::TripleSequences {
    move |_, rng| {
        let th: f64 = rng.gen_range(0.0..core::f64::consts::TAU);
        let x = Point::new(vec![math::cos(th), math::sin(th)]);
        let z = Point::new(vec![-x.0[0], -x.0[1]]);
        crate::checkers::TripleSequences {
            x: vec![x; len],
            z: vec![z; len],
            y: vec![Point::new(vec![0.0, 0.0]); len],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cef::{check_p_invariance, s_value, verify_contraction, VerifyConfig, Verdict};
    use crate::iterate::iterate;
    use proptest::prelude::*;

    #[test]
    fn alpha_parity_examples() {
        assert_eq!(alpha_parity(3.0).unwrap(), 1);
        assert_eq!(alpha_parity(0.0).unwrap(), 0);
        assert_eq!(alpha_parity(0.5).unwrap(), 1);
        assert_eq!(alpha_parity(0.25).unwrap(), 0);
        assert!(matches!(alpha_parity(-0.1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn example1_t_examples() {
        assert_eq!(example1_t(0.0).unwrap(), 0.0);
        assert_eq!(example1_t(3.0).unwrap(), 6.0);
        assert_eq!(example1_t(6.0).unwrap(), 0.5);
        assert_eq!(example1_t(0.5).unwrap(), 1.0);
        assert_eq!(example1_t(1.0).unwrap(), 0.0);
        assert!(example1_t(-1.0).is_err());
    }

    #[test]
    fn example1_b_side_gap_shrinks_by_a_quarter_every_two_steps() {
        // s = -(y + 1): 1, 1/8, 1/4, 1/32, 1/16, 1/128, ...
        let mut y = -2.0;
        let mut gaps = vec![];
        for _ in 0..7 {
            gaps.push(-(y + 1.0));
            y = dyadic_t_b(y);
        }
        assert_eq!(gaps, [1.0, 0.125, 0.25, 1.0 / 32.0, 1.0 / 16.0, 1.0 / 128.0, 1.0 / 64.0]);
        assert_eq!(dyadic_t_b(-1.0), -1.0);
    }

    #[test]
    fn example1_penalties() {
        assert_eq!(dyadic_f_a(&CElement::scalar(3.0)), 12.0);
        assert_eq!(dyadic_f_a(&CElement::scalar(6.0)), 0.0);
        assert_eq!(dyadic_f_a(&CElement::scalar(-5.0)), 0.0);
        assert_eq!(dyadic_f_b(&CElement::scalar(-1.125)), 0.5);
        assert_eq!(dyadic_f_b(&CElement::scalar(-2.0)), 0.0);
        assert_eq!(dyadic_f_b(&CElement::scalar(4.0)), 0.0);
        assert!(dyadic_f_a(&CElement::scalar(-0.5)).is_nan());
    }

    #[test]
    fn example1_system_shape() {
        let sys = example1_system();
        assert_eq!(sys.lambda, 0.625);
        assert_eq!(s_value(&sys).unwrap(), 1.0);
        assert!(sys.p.contains(&example1_start(3.0, -2.0)));
        assert!(!sys.p.contains(&example1_start(-1.0, -2.0)));
        sys.validate().unwrap();
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100_000))]

        #[test]
        fn alpha_flips_under_doubling(x in 1e-300f64..1e300) {
            prop_assert_eq!(parity(2.0 * x), 1 - parity(x));
        }
    }

    proptest! {
        #[test]
        fn leading_power_gap_is_at_most_half(x in 1e-300f64..1e300) {
            prop_assert!(x - leading_power(x) <= x / 2.0);
        }

        #[test]
        fn dyadic_t_stays_in_a(x in 0f64..1e6) {
            prop_assert!(dyadic_t(x) >= 0.0);
        }
    }

    #[test]
    fn banach_examples() {
        let r = Region::interval(Interval::closed(-100.0, 100.0));
        let half = banach_system(affine_map(0.5, 0.0), Space::real(), r.clone(), 0.5).unwrap();
        assert_eq!(verify_contraction(&half, VerifyConfig::new(2000, 0)).unwrap().verdict, Verdict::CertifiedOnSamples);
        let id = banach_system(|x| x.clone(), Space::real(), r.clone(), 0.99);
        assert!(matches!(id, Err(Error::Refuted(_))));
        let escapes = banach_system(affine_map(0.5, 80.0), Space::real(), r, 0.5);
        assert!(matches!(escapes, Err(Error::Refuted(_))));
    }

    #[test]
    fn product_of_example_systems() {
        let e = example1_system();
        let prod = product_system(&e, &e);
        assert_eq!(prod.pair.dist, Quantity::Exact(2.0));
        assert_eq!(s_value(&prod).unwrap(), 2.0);
        assert_eq!(prod.lambda, 0.625);
        let q = product_quadruple(&example1_start(3.0, -2.0), &example1_start(5.0, -3.0));
        assert!(prod.p.contains(&q));
        let step = prod.step(&q);
        assert_eq!(step.x, Point::new(vec![6.0, 0.25]));

        let r = Region::interval(Interval::closed(-10.0, 10.0));
        let b1 = banach_system(affine_map(0.2, 1.0), Space::real(), r.clone(), 0.2).unwrap();
        let b2 = banach_system(affine_map(0.0, 3.0), Space::real(), r, 0.0).unwrap();
        let bb = product_system(&b1, &b2);
        assert_eq!(verify_contraction(&bb, VerifyConfig::new(2000, 9)).unwrap().verdict, Verdict::CertifiedOnSamples);
    }

    /// Grid oracle for the summing inequality: `(W₁ − D) / (Σ − D)` over an
    /// `n³` grid of segment parameters, computed with independent geometry.
    fn triangle_grid_k(n: usize) -> f64 {
        let (p, e) = triangle_frame();
        let pt = |i: usize, t: f64| [p[i][0] + t * e[i][0], p[i][1] + t * e[i][1]];
        let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let per = |x: [[f64; 2]; 3]| dist(x[0], x[1]) + dist(x[1], x[2]) + dist(x[2], x[0]);
        let mut worst: f64 = 0.0;
        for i in 0..=n {
            for j in 0..=n {
                for l in 0..=n {
                    let t = [i as f64 / n as f64, j as f64 / n as f64, l as f64 / n as f64];
                    let x = [pt(0, t[0]), pt(1, t[1]), pt(2, t[2])];
                    // T sends segment i at parameter t to segment i+1 at t/2.
                    let tx = [pt(1, t[0] / 2.0), pt(2, t[1] / 2.0), pt(0, t[2] / 2.0)];
                    let sigma = per(x) - 3.0;
                    if sigma > 1e-12 {
                        worst = worst.max((per(tx) - 3.0) / sigma);
                    }
                }
            }
        }
        worst
    }

    #[test]
    fn affine_triple_constant_matches_grid_oracle() {
        let k = triangle_grid_k(100);
        assert!((k - 0.5).abs() < 1e-9, "grid k = {k}");
        assert_eq!(AFFINE_K, 0.5);
    }

    #[test]
    fn affine_triple_gaps_and_bz_on_grid() {
        let ct = affine_cyclic_example();
        // Pairwise gaps on a parameter grid, attained at the vertices.
        let (p, e) = triangle_frame();
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            let mut best = f64::INFINITY;
            for a in 0..=200 {
                for b in 0..=200 {
                    let (s, t) = (a as f64 / 200.0, b as f64 / 200.0);
                    let x = [p[i][0] + s * e[i][0], p[i][1] + s * e[i][1]];
                    let y = [p[j][0] + t * e[j][0], p[j][1] + t * e[j][1]];
                    best = best.min(((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt());
                }
            }
            assert!((best - 1.0).abs() < 1e-12, "gap {i}{j} = {best}");
        }
        assert_eq!(ct.gaps, [1.0, 1.0, 1.0]);

        // 10^6 grid triples through the crate's own residual.
        let n = 99;
        let seg = |i: usize, t: f64| Point::new(vec![p[i][0] + t * e[i][0], p[i][1] + t * e[i][1]]);
        let mut worst = f64::INFINITY;
        for a in 0..=n {
            let x1 = seg(0, a as f64 / n as f64);
            for b in 0..=n {
                let x2 = seg(1, b as f64 / n as f64);
                for c in 0..=n {
                    let x3 = seg(2, c as f64 / n as f64);
                    worst = worst.min(bz_residual(&ct, [&x1, &x2, &x3]));
                }
            }
        }
        assert!(worst >= -RESIDUAL_TOL, "min bz residual {worst}");
    }

    #[test]
    fn collinear_triple_is_refuted() {
        for k in [0.1, 0.5, 0.9, 0.999] {
            let ct = collinear_cyclic_triple(k);
            let cert = certify_cyclic(&ct, 4096, 3).unwrap();
            assert!(cert.cyclic, "map is cyclic for k = {k}");
            assert!(cert.min_residual < -RESIDUAL_TOL, "k = {k}: {}", cert.min_residual);
            assert!(matches!(cyclic3_reduce(&ct), Err(Error::Refuted(_))));
        }
    }

    #[test]
    fn singleton_triple_is_an_equality_case() {
        let ct = singleton_cyclic_triple(0.3);
        let x = [Point::scalar(10.0), Point::scalar(20.0), Point::scalar(30.0)];
        assert_eq!(bz_residual(&ct, [&x[0], &x[1], &x[2]]), 0.0);
        let sys = cyclic3_reduce(&ct).unwrap();
        assert_eq!(sys.lambda, 0.3 * 0.3 * 0.3);
        assert_eq!(s_value(&sys).unwrap(), 40.0);
        let rep = verify_contraction(&sys, VerifyConfig::new(100, 0)).unwrap();
        assert_eq!(rep.verdict, Verdict::CertifiedOnSamples);
        assert_eq!(rep.min_residual, 0.0);
    }

    #[test]
    fn reduction_of_the_affine_triple_is_certified() {
        let ct = affine_cyclic_example();
        let sys = cyclic3_reduce(&ct).unwrap();
        assert_eq!(sys.lambda, 0.125);
        assert_eq!(s_value(&sys).unwrap(), 3.0);
        let rep = verify_contraction(&sys, VerifyConfig::new(10_000, 2)).unwrap();
        assert_eq!(rep.verdict, Verdict::CertifiedOnSamples, "{rep:?}");
        for r in 1..3 {
            let rep = verify_contraction(&cyclic3_reduce(&ct.rotated(r)).unwrap(), VerifyConfig::new(2_000, r as u64)).unwrap();
            assert_eq!(rep.verdict, Verdict::CertifiedOnSamples);
        }
    }

    #[test]
    fn reduction_keeps_p_invariant() {
        let ct = affine_cyclic_example();
        let sys = cyclic3_reduce(&ct).unwrap();
        let q = reduction_start(&Point::new(vec![-0.5, -0.2886751345948129]), &ct.regions[1].sample(1, 1).unwrap()[0], &ct.regions[2].sample(1, 2).unwrap()[0]);
        assert!(sys.p.contains(&q), "start not in P");
        assert!(check_p_invariance(&sys, &q, 10).holds);
        let trace = iterate(&sys.side_a(), (q.x.clone(), q.u.clone()), 5).unwrap();
        assert!(trace.states.iter().all(|(x, _)| {
            let (l, r) = x.split(2);
            l == r
        }));
    }

    #[test]
    fn solve_singleton_triple_exactly() {
        let ct = singleton_cyclic_triple(0.5);
        let starts = [Point::scalar(10.0), Point::scalar(20.0), Point::scalar(30.0)];
        let res = cyclic3_solve(&ct, &starts, RunConfig::new(100, 1e-12)).unwrap();
        assert_eq!(res.z, starts);
        assert_eq!(res.gap_residuals, [0.0; 3]);
        assert_eq!(res.cycle_residuals, [0.0; 3]);
    }
}
