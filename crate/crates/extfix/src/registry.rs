//! Named built-in instances.

use extfix_core::checkers::{PairedSequences, TripleSequences};
use extfix_core::instances::{
    affine_cyclic_example, affine_map, antipodal_generator, banach_system, circle_origin_pair, cyclic3_reduce,
    example1_pair, example1_start, example1_system, interval_cd_generator, interval_uc_generator,
    open_interval_escaping_generator, open_interval_pair, product_quadruple, product_system, reduction_start,
    singleton_cyclic_triple, triangle_frame, CyclicTriple, BANACH_ATOM, REDUCTION_ATOM,
};
use extfix_core::metric::Interval;
use extfix_core::{CElement, Error, ExternalFactorSystem, Point, Quadruple, Region, SampleRng, SetPair, Space};

/// How a start `(x₀, y₀)` is completed to a quadruple in `P`.
#[derive(Clone, Debug, PartialEq)]
pub enum StartRule {
    /// `u₀ = x₀`, `v₀ = y₀` as vectors.
    Mirror,
    /// Product of two mirrored 1-D components: `u₀ = (x₀¹, x₀²)` as a pair.
    MirrorPair,
    /// `u₀ = v₀ = atom`.
    Atom(CElement),
    /// `x₀ = (a, a)` from `a ∈ A₁`, `y₀ = (b, c)`, `u₀ = 1`, `v₀ = y₀`.
    Reduction { dim: usize },
}

impl StartRule {
    /// The `C`-element paired with an `A`-side point.
    pub fn factor_a(&self, x: &Point) -> CElement {
        match self {
            StartRule::Mirror => CElement::Vector(x.clone()),
            StartRule::MirrorPair => {
                let (l, r) = x.split(x.dim() / 2);
                CElement::pair(CElement::Vector(l), CElement::Vector(r))
            }
            StartRule::Atom(a) => a.clone(),
            StartRule::Reduction { .. } => REDUCTION_ATOM,
        }
    }

    pub fn factor_b(&self, y: &Point) -> CElement {
        match self {
            StartRule::Atom(a) => a.clone(),
            StartRule::Reduction { .. } => CElement::Vector(y.clone()),
            _ => self.factor_a(y),
        }
    }

    /// Widens an `A₁` point to the diagonal for reductions.
    pub fn a_point(&self, x: Point) -> Point {
        match self {
            StartRule::Reduction { dim } if x.dim() == *dim => Point::concat(&x, &x),
            _ => x,
        }
    }

    pub fn quadruple(&self, x: Point, y: Point) -> Quadruple {
        let x = self.a_point(x);
        let (u, v) = (self.factor_a(&x), self.factor_b(&y));
        Quadruple::new(x, y, u, v)
    }
}

pub struct SystemInstance {
    pub name: String,
    pub description: String,
    pub system: ExternalFactorSystem,
    pub rule: StartRule,
    pub default_x0: Point,
    pub default_y0: Point,
    /// The triple behind a reduction, for best-proximity reports.
    pub triple: Option<CyclicTriple>,
}

impl SystemInstance {
    pub fn start(&self, x0: Option<Point>, y0: Option<Point>) -> Quadruple {
        self.rule.quadruple(x0.unwrap_or_else(|| self.default_x0.clone()), y0.unwrap_or_else(|| self.default_y0.clone()))
    }
}

type CdGen = Box<dyn FnMut(usize, &mut SampleRng) -> PairedSequences>;
type UcGen = Box<dyn FnMut(usize, &mut SampleRng) -> TripleSequences>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PairKind {
    /// Closed or half-line intervals approached at the given limits.
    Intervals { a_lim: f64, b_lim: f64 },
    OpenIntervals,
    CircleOrigin,
}

pub struct PairInstance {
    pub name: String,
    pub description: String,
    pub pair: SetPair,
    pub kind: PairKind,
}

impl PairInstance {
    /// Candidate generator for the CD falsifier; sequences run to index `n_last`.
    pub fn cd_generator(&self, n_last: usize) -> CdGen {
        match self.kind {
            PairKind::Intervals { a_lim, b_lim } => Box::new(interval_cd_generator(a_lim, b_lim, n_last)),
            PairKind::OpenIntervals => Box::new(open_interval_escaping_generator(n_last)),
            PairKind::CircleOrigin => {
                let mut anti = antipodal_generator(n_last + 1);
                Box::new(move |i, rng| {
                    let t = anti(i, rng);
                    PairedSequences { x: t.x, y: t.y }
                })
            }
        }
    }

    /// Candidate generator for the UC falsifier.
    pub fn uc_generator(&self, n_last: usize) -> UcGen {
        match self.kind {
            PairKind::Intervals { a_lim, b_lim } => Box::new(interval_uc_generator(a_lim, b_lim, n_last)),
            PairKind::OpenIntervals => {
                let mut cd = open_interval_escaping_generator(n_last);
                Box::new(move |i, rng| {
                    let p = cd(i, rng);
                    TripleSequences { x: p.x.clone(), z: p.x, y: p.y }
                })
            }
            PairKind::CircleOrigin => Box::new(antipodal_generator(n_last + 1)),
        }
    }
}

pub enum Instance {
    System(Box<SystemInstance>),
    Pair(PairInstance),
}

impl Instance {
    pub fn name(&self) -> &str {
        match self {
            Instance::System(s) => &s.name,
            Instance::Pair(p) => &p.name,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Instance::System(_) => "system",
            Instance::Pair(_) => "pair",
        }
    }

    pub fn description(&self) -> &str {
        match self {
            Instance::System(s) => &s.description,
            Instance::Pair(p) => &p.description,
        }
    }
}

/// Built-in names, in listing order.
pub const NAMES: &[&str] = &[
    "e1",
    "banach",
    "banach-half",
    "e1-product",
    "cyclic3-singleton",
    "cyclic3-affine",
    "e1-pair",
    "open-interval-pair",
    "circle-origin",
];

fn banach_instance(name: &str, description: &str, slope: f64, offset: f64) -> Result<Instance, Error> {
    let region = Region::interval(Interval::closed(-100.0, 100.0));
    let system = banach_system(affine_map(slope, offset), Space::real(), region, slope)?;
    Ok(Instance::System(Box::new(SystemInstance {
        name: name.to_string(),
        description: description.to_string(),
        system,
        rule: StartRule::Atom(BANACH_ATOM),
        default_x0: Point::scalar(8.0),
        default_y0: Point::scalar(0.0),
        triple: None,
    })))
}

fn reduction_instance(name: &str, description: &str, ct: CyclicTriple, starts: [Point; 3]) -> Result<Instance, Error> {
    let system = cyclic3_reduce(&ct)?;
    let dim = ct.space.dim();
    let q = reduction_start(&starts[0], &starts[1], &starts[2]);
    Ok(Instance::System(Box::new(SystemInstance {
        name: name.to_string(),
        description: description.to_string(),
        system,
        rule: StartRule::Reduction { dim },
        default_x0: starts[0].clone(),
        default_y0: q.y,
        triple: Some(ct),
    })))
}

/// Default starts of the affine triple: points at parameters 0.5, 0.7, 0.3
/// along the three segments.
pub fn affine_triple_starts() -> [Point; 3] {
    let (p, e) = triangle_frame();
    let t = [0.5, 0.7, 0.3];
    [0, 1, 2].map(|i| Point::new(vec![p[i][0] + t[i] * e[i][0], p[i][1] + t[i] * e[i][1]]))
}

/// Builds a built-in instance by name.
pub fn builtin(name: &str) -> Result<Option<Instance>, Error> {
    let inst = match name {
        "e1" => Instance::System(Box::new(SystemInstance {
            name: name.into(),
            description: "dyadic example on [0, inf) x (-inf, -1], lambda = 5/8".into(),
            system: example1_system(),
            rule: StartRule::Mirror,
            default_x0: Point::scalar(3.0),
            default_y0: Point::scalar(-2.0),
            triple: None,
        })),
        "banach" => banach_instance(name, "x -> (x + 4)/2 on [-100, 100] as a degenerate system", 0.5, 2.0)?,
        "banach-half" => banach_instance(name, "x -> x/2 on [-100, 100] as a degenerate system", 0.5, 0.0)?,
        "e1-product" => {
            let e = example1_system();
            let system = product_system(&e, &e);
            let q = product_quadruple(&example1_start(3.0, -2.0), &example1_start(5.0, -3.0));
            Instance::System(Box::new(SystemInstance {
                name: name.into(),
                description: "e1 x e1 under the sum metric, lambda = 5/8".into(),
                system,
                rule: StartRule::MirrorPair,
                default_x0: q.x,
                default_y0: q.y,
                triple: None,
            }))
        }
        "cyclic3-singleton" => reduction_instance(
            name,
            "reduction of the 3-cycle 10 -> 20 -> 30 -> 10, k = 1/2",
            singleton_cyclic_triple(0.5),
            [Point::scalar(10.0), Point::scalar(20.0), Point::scalar(30.0)],
        )?,
        "cyclic3-affine" => reduction_instance(
            name,
            "reduction of three unit segments around an equilateral triangle, k = 1/2",
            affine_cyclic_example(),
            affine_triple_starts(),
        )?,
        "e1-pair" => Instance::Pair(PairInstance {
            name: name.into(),
            description: "A = [0, inf), B = (-inf, -1] on the real line".into(),
            pair: example1_pair(),
            kind: PairKind::Intervals { a_lim: 0.0, b_lim: -1.0 },
        }),
        "open-interval-pair" => Instance::Pair(PairInstance {
            name: name.into(),
            description: "A = (0, 1), B = (2, 3): incomplete, sequences escape through the open ends".into(),
            pair: open_interval_pair(),
            kind: PairKind::OpenIntervals,
        }),
        "circle-origin" => Instance::Pair(PairInstance {
            name: name.into(),
            description: "A = unit circle, B = {origin} in the Euclidean plane".into(),
            pair: circle_origin_pair(),
            kind: PairKind::CircleOrigin,
        }),
        _ => return Ok(None),
    };
    Ok(Some(inst))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_builds() {
        for name in NAMES {
            let inst = builtin(name).unwrap().unwrap();
            assert_eq!(inst.name(), *name);
        }
        assert!(builtin("nope").unwrap().is_none());
    }

    #[test]
    fn default_starts_are_in_p() {
        for name in NAMES {
            if let Instance::System(s) = builtin(name).unwrap().unwrap() {
                assert!(s.system.p.contains(&s.start(None, None)), "{name}");
            }
        }
    }
}
