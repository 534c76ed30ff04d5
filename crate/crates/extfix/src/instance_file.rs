//! JSON instance files.
//!
//! ```json
//! {
//!   "name": "shifted-half",
//!   "space": { "kind": "euclidean", "dim": 1 },
//!   "regions": { "a": { "lo": -10, "hi": 10 }, "b": { "lo": -10, "hi": 10 } },
//!   "maps": { "kind": "affine", "slope": 0.5, "offset": 1.0 },
//!   "lambda": 0.5,
//!   "dist": 0.0,
//!   "infima": { "f_a": 0.0, "f_b": 0.0 }
//! }
//! ```
//!
//! Interval ends may be `null` for an unbounded side. A region may also be a
//! list of intervals, read as their box product. `dist` and either infimum may
//! be `null`, in which case they are estimated from seeded samples at load.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use extfix_core::instances::{affine_map, banach_system, example1_system, BANACH_ATOM};
use extfix_core::metric::Interval;
use extfix_core::{Quantity, Region, Space};

use crate::registry::{StartRule, SystemInstance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalSpec {
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
    #[serde(default)]
    pub lo_open: bool,
    #[serde(default)]
    pub hi_open: bool,
    /// Sampling window for unbounded ends.
    #[serde(default)]
    pub window: Option<(f64, f64)>,
}

impl IntervalSpec {
    pub fn interval(&self) -> Interval {
        let mut iv = Interval::closed(self.lo.unwrap_or(f64::NEG_INFINITY), self.hi.unwrap_or(f64::INFINITY));
        iv.lo_open = self.lo_open;
        iv.hi_open = self.hi_open;
        iv.window = self.window;
        iv
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegionSpec {
    Interval(IntervalSpec),
    Box(Vec<IntervalSpec>),
}

impl RegionSpec {
    pub fn region(&self) -> Result<Region> {
        match self {
            RegionSpec::Interval(iv) => Ok(Region::interval(iv.interval())),
            RegionSpec::Box(ivs) => {
                let mut it = ivs.iter();
                let first = it.next().context("empty box region")?;
                Ok(it.fold(Region::interval(first.interval()), |acc, iv| {
                    Region::product(&acc, &Region::interval(iv.interval()))
                }))
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            RegionSpec::Interval(_) => 1,
            RegionSpec::Box(v) => v.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsSpec {
    pub a: RegionSpec,
    pub b: RegionSpec,
}

/// Built-in map families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MapSpec {
    /// `x ↦ slope·x + offset` coordinate-wise, as a degenerate system with
    /// `A = B`, `C = {atom}` and zero penalties. `lambda` is the declared
    /// Lipschitz constant and is probed at load.
    Affine { slope: f64, offset: f64 },
    /// The dyadic example maps. Regions must be `[0, ∞)` and `(−∞, −1]`.
    Dyadic,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfimaSpec {
    #[serde(default)]
    pub f_a: Option<f64>,
    #[serde(default)]
    pub f_b: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default)]
    pub name: Option<String>,
    pub space: Space,
    pub regions: RegionsSpec,
    pub maps: MapSpec,
    pub lambda: f64,
    #[serde(default)]
    pub dist: Option<f64>,
    #[serde(default)]
    pub infima: InfimaSpec,
}

fn quantity(v: Option<f64>) -> Quantity {
    v.map_or(Quantity::Unresolved, Quantity::Exact)
}

impl InstanceFile {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Builds the system; unresolved quantities are estimated from `samples`
    /// seeded draws.
    pub fn build(&self, samples: usize, seed: u64) -> Result<SystemInstance> {
        let name = self.name.clone().unwrap_or_else(|| "file".to_string());
        for (side, r) in [("a", &self.regions.a), ("b", &self.regions.b)] {
            if r.dim() != self.space.dim() {
                bail!("region {side} has dimension {} but the space has {}", r.dim(), self.space.dim());
            }
        }
        let (mut system, rule) = match &self.maps {
            MapSpec::Affine { slope, offset } => {
                if self.regions.a != self.regions.b {
                    bail!("affine maps describe a degenerate system and need identical regions a and b");
                }
                let region = self.regions.a.region()?;
                let sys = banach_system(affine_map(*slope, *offset), self.space.clone(), region, self.lambda)?;
                (sys, StartRule::Atom(BANACH_ATOM))
            }
            MapSpec::Dyadic => {
                let a = RegionSpec::Interval(IntervalSpec { lo: Some(0.0), hi: None, lo_open: false, hi_open: false, window: None });
                let b = RegionSpec::Interval(IntervalSpec { lo: None, hi: Some(-1.0), lo_open: false, hi_open: false, window: None });
                let same = |r: &RegionSpec, t: &RegionSpec| match (r, t) {
                    (RegionSpec::Interval(x), RegionSpec::Interval(y)) => {
                        x.lo == y.lo && x.hi == y.hi && x.lo_open == y.lo_open && x.hi_open == y.hi_open
                    }
                    _ => false,
                };
                if !same(&self.regions.a, &a) || !same(&self.regions.b, &b) {
                    bail!("dyadic maps need regions a = [0, null] and b = [null, -1]");
                }
                if self.space != Space::real() {
                    bail!("dyadic maps live on the real line");
                }
                (example1_system().with_lambda(self.lambda), StartRule::Mirror)
            }
        };
        system.name = name.clone();
        system.pair.dist = quantity(self.dist);
        system.f_a.inf = quantity(self.infima.f_a);
        system.f_b.inf = quantity(self.infima.f_b);
        system.resolve(samples, seed)?;
        system.validate()?;

        let draw_one = |r: &RegionSpec, s: u64| -> Result<extfix_core::Point> {
            Ok(r.region()?.sample(1, s)?.remove(0))
        };
        let default_x0 = draw_one(&self.regions.a, seed)?;
        let default_y0 = draw_one(&self.regions.b, seed.wrapping_add(1))?;
        Ok(SystemInstance {
            name,
            description: "loaded from an instance file".to_string(),
            system,
            rule,
            default_x0,
            default_y0,
            triple: None,
        })
    }
}
