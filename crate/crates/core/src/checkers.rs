//! Finite-data checks of the auxiliary lemmas and the UC / CD falsifiers.
//!
//! Indices follow the iterated sequences: `n = 1` is the first iterate after
//! the initial guess. Falsifiers are budgeted searches; `None` means no
//! counterexample was found within the budget, never that the property holds.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::iterate::{IterationTrace, PairedTrace};
use crate::math;
use crate::metric::{seeded_rng, Point, SampleRng, SetPair, Space};
use crate::{Error, Result, CAUCHY_WINDOW, RESIDUAL_TOL};

/// Number of trailing terms the falsifiers treat as the tail.
pub const FALSIFIER_HORIZON: usize = CAUCHY_WINDOW + 1;

/// Limit estimates closer than this (relative) to the final term are replaced
/// by the final term.
const ROUNDING_SCALE: f64 = 1e-12;

/// `sup_{k ≤ n, m ≤ N} f(n, m)` over 1-based indices.
pub fn tail_sup(f: impl Fn(usize, usize) -> f64, k: usize, horizon: usize) -> Result<f64> {
    if k == 0 || k > horizon {
        return Err(Error::InvalidInput(format!("empty index window [{k}, {horizon}]")));
    }
    let mut best = f64::NEG_INFINITY;
    for n in k..=horizon {
        for m in k..=horizon {
            best = best.max(f(n, m));
        }
    }
    Ok(best)
}

/// `sup_{n, m ≥ k} f(n, m)` for every `k` in `1..=horizon`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailSupTable {
    pub horizon: usize,
    /// `values[k - 1]`
    pub values: Vec<f64>,
}

impl TailSupTable {
    /// Builds the table from the last index down, `O(N²)` evaluations.
    pub fn build(f: impl Fn(usize, usize) -> f64, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidInput("tail_sup table needs a horizon of at least 1".to_string()));
        }
        let mut values = alloc::vec![f64::NEG_INFINITY; horizon];
        let mut running = f64::NEG_INFINITY;
        for k in (1..=horizon).rev() {
            running = running.max(f(k, k));
            for j in k + 1..=horizon {
                running = running.max(f(k, j)).max(f(j, k));
            }
            values[k - 1] = running;
        }
        Ok(TailSupTable { horizon, values })
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.values.get(i)).copied()
    }
}

/// Checks the split-limit conclusion on finite data.
///
/// For every `ε` in the schedule, finds the smallest `N` with
/// `x_n + y_n ≤ x' + y' + ε` for all `n ≥ N`, and then requires
/// `x_n ≤ x' + ε` and `y_n ≤ y' + ε` on the same tail. An `ε` whose criterion
/// is never met is passed vacuously.
pub fn split_limit_validate(x: &[f64], y: &[f64], x_floor: f64, y_floor: f64, eps_schedule: &[f64]) -> Result<bool> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!("sequence lengths differ: {} vs {}", x.len(), y.len())));
    }
    for (name, s, floor) in [("x", x, x_floor), ("y", y, y_floor)] {
        if let Some((n, v)) = s.iter().enumerate().find(|(_, v)| floor - **v > 1e-12) {
            return Err(Error::InvalidInput(format!("floor {floor} exceeds {name}_{n} = {v}")));
        }
    }
    for &eps in eps_schedule {
        let bound = x_floor + y_floor + eps;
        let mut start = x.len();
        while start > 0 && x[start - 1] + y[start - 1] <= bound {
            start -= 1;
        }
        if start == x.len() {
            continue;
        }
        let ok = (start..x.len()).all(|n| x[n] <= x_floor + eps && y[n] <= y_floor + eps);
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Boundedness check on the `A`-side:
///
/// `ρ(x_n, y₁) + f_A(u_n) ≤ ρ(x₁, y₁) + f_A(u₁) + Q/(1 − λ) + S`
/// for every `n ≥ 1`, with `Q = ρ(y₁, y₂) + λ f_B(v₁) − f_B(v₂)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1Check {
    pub holds: bool,
    pub bound: f64,
    pub q: f64,
    /// First `n` exceeding the bound by more than `1e-10`.
    pub first_violation: Option<usize>,
}

pub fn check_l1_bound(space: &Space, a: &IterationTrace, b: &IterationTrace, lambda: f64, s: f64) -> Result<L1Check> {
    if b.states.len() < 3 || a.states.len() < 2 {
        return Err(Error::InvalidInput("the boundedness check needs y_1, y_2 and x_1".to_string()));
    }
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::InvalidInput(format!("lambda = {lambda} is outside [0, 1)")));
    }
    let d = |p: &Point, q: &Point| space.distance_unchecked(&p.0, &q.0);
    let y1 = b.point(1);
    let q = d(y1, b.point(2)) + lambda * b.f_values[1] - b.f_values[2];
    let bound = d(a.point(1), y1) + a.f_values[1] + q / (1.0 - lambda) + s;
    let first_violation = (1..a.states.len()).find(|&n| d(a.point(n), y1) + a.f_values[n] > bound + RESIDUAL_TOL);
    Ok(L1Check { holds: first_violation.is_none(), bound, q, first_violation })
}

/// Certificate for `U(m, n) ≤ λ^{min(m,n)−1}·M + (1 − λ^{min(m,n)−1})·S`
/// with `M = max(sup_k U(k, 1), sup_k U(1, k))` over the trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub m: f64,
    pub lambda: f64,
    pub s: f64,
    /// Largest index checked.
    pub horizon: usize,
    /// First `(m, n)` in row-major order that exceeds the bound by more than `1e-10`.
    pub first_violation: Option<(usize, usize)>,
}

impl BoundCertificate {
    /// `λ` and `S` to check against; `M` is filled in from the trace.
    pub fn new(lambda: f64, s: f64) -> Self {
        BoundCertificate { m: f64::NAN, lambda, s, horizon: 0, first_violation: None }
    }

    pub fn holds(&self) -> bool {
        self.first_violation.is_none()
    }

    pub fn bound(&self, m: usize, n: usize) -> f64 {
        let p = math::powi(self.lambda, (m.min(n) - 1) as i32);
        p * self.m + (1.0 - p) * self.s
    }
}

/// `M` for a paired trace, over `k = 1..=N`.
pub fn l2_constant(space: &Space, paired: &PairedTrace) -> Result<f64> {
    let horizon = paired.len().saturating_sub(1);
    if horizon == 0 {
        return Err(Error::InvalidInput("the trace has no iterates beyond the initial guess".to_string()));
    }
    let mut m = f64::NEG_INFINITY;
    for k in 1..=horizon {
        m = m.max(paired.u(space, k, 1)).max(paired.u(space, 1, k));
    }
    Ok(m)
}

/// Checks the full `N × N` matrix of `U(m, n)`; fills `M`, the horizon and
/// the first violation into the returned certificate.
pub fn check_l2_bound(space: &Space, paired: &PairedTrace, cert: BoundCertificate) -> Result<BoundCertificate> {
    let mut cert = cert;
    cert.m = l2_constant(space, paired)?;
    cert.horizon = paired.len() - 1;
    cert.first_violation = None;
    'outer: for m in 1..=cert.horizon {
        for n in 1..=cert.horizon {
            if paired.u(space, m, n) > cert.bound(m, n) + RESIDUAL_TOL {
                cert.first_violation = Some((m, n));
                break 'outer;
            }
        }
    }
    Ok(cert)
}

/// Finite sequences `{x_n} ⊆ A`, `{y_n} ⊆ B` offered to the CD falsifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedSequences {
    pub x: Vec<Point>,
    pub y: Vec<Point>,
}

/// Finite sequences `{x_n}, {z_n} ⊆ A`, `{y_n} ⊆ B` offered to the UC falsifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleSequences {
    pub x: Vec<Point>,
    pub z: Vec<Point>,
    pub y: Vec<Point>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Uc,
    Cd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdCounterexample {
    pub index: usize,
    pub sequences: PairedSequences,
    pub cauchy: bool,
    /// Limit estimate that left `A`, when the window was met.
    pub limit_estimate: Option<Point>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UcCounterexample {
    pub index: usize,
    pub sequences: TripleSequences,
    /// `min ρ(x_n, z_n)` over the tail.
    pub tail_min_gap: f64,
}

/// Outcome of a budgeted falsification campaign.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalsifierReport<C> {
    pub property: Property,
    pub budget: usize,
    pub tried: usize,
    /// Candidates that met the hypothesis of the property.
    pub admissible: usize,
    pub horizon: usize,
    pub tol: f64,
    pub seed: u64,
    pub dist: f64,
    pub counterexample: Option<C>,
}

fn check_members(pair: &SetPair, xs: &[Point], inside_a: bool, name: &str) -> Result<()> {
    let region = if inside_a { &pair.a } else { &pair.b };
    if let Some((n, p)) = xs.iter().enumerate().find(|(_, p)| !region.contains(p)) {
        return Err(Error::InvalidInput(format!("{name}_{n} = {p} is not in {}", region.label())));
    }
    Ok(())
}

fn tail_start(len: usize) -> Result<usize> {
    if len < FALSIFIER_HORIZON + 1 {
        return Err(Error::InvalidInput(format!(
            "candidate sequences need more than {FALSIFIER_HORIZON} terms, got {len}"
        )));
    }
    Ok(len - FALSIFIER_HORIZON)
}

/// Aitken Δ² over `x_{N/4}`, `x_{N/2}`, `x_N`, coordinate-wise; falls back to
/// `x_N` on a vanishing denominator.
fn aitken_estimate(xs: &[Point]) -> Point {
    let n = xs.len() - 1;
    let (a, b, c) = (&xs[n / 4], &xs[n / 2], &xs[n]);
    Point::new(
        (0..c.dim())
            .map(|i| {
                let (p, q, r) = (a.0[i], b.0[i], c.0[i]);
                let den = r - 2.0 * q + p;
                let est = r - (r - q) * (r - q) / den;
                if den == 0.0 || !est.is_finite() {
                    r
                } else {
                    est
                }
            })
            .collect(),
    )
}

/// Searches for a pair `({x_n} ⊆ A, {y_n} ⊆ B)` with
/// `sup_{n,m ≥ k} ρ(x_n, y_m)` within `tol` of `dist(A, B)` on the tail whose
/// `{x_n}` does not converge in `A`: either the Cauchy window fails, or the
/// limit estimate leaves `A`. The estimate is Aitken's Δ² over the terms at
/// positions `N/4`, `N/2` and `N`.
pub fn cd_falsify(
    pair: &SetPair,
    mut gen: impl FnMut(usize, &mut SampleRng) -> PairedSequences,
    budget: usize,
    tol: f64,
    seed: u64,
) -> Result<FalsifierReport<CdCounterexample>> {
    let dist = pair.dist_value()?;
    let mut rng = seeded_rng(seed);
    let mut report = FalsifierReport {
        property: Property::Cd,
        budget,
        tried: 0,
        admissible: 0,
        horizon: FALSIFIER_HORIZON,
        tol,
        seed,
        dist,
        counterexample: None,
    };
    let d = |p: &Point, q: &Point| pair.space.distance_unchecked(&p.0, &q.0);
    for index in 0..budget {
        let cand = gen(index, &mut rng);
        report.tried += 1;
        if cand.x.len() != cand.y.len() {
            return Err(Error::InvalidInput("x and y candidates differ in length".to_string()));
        }
        check_members(pair, &cand.x, true, "x")?;
        check_members(pair, &cand.y, false, "y")?;
        let k = tail_start(cand.x.len())?;
        let sup = tail_sup(|n, m| d(&cand.x[n - 1], &cand.y[m - 1]), k + 1, cand.x.len())?;
        if sup - dist > tol {
            continue;
        }
        report.admissible += 1;
        let cauchy = (k + 1..cand.x.len()).all(|n| d(&cand.x[n - 1], &cand.x[n]) < tol);
        let limit_estimate = cauchy.then(|| {
            let last = cand.x[cand.x.len() - 1].clone();
            let est = aitken_estimate(&cand.x);
            // Below rounding scale the estimate carries no information.
            if d(&est, &last) <= ROUNDING_SCALE * (1.0 + last.max_abs()) {
                last
            } else {
                est
            }
        });
        let converges = limit_estimate.as_ref().is_some_and(|l| pair.a.contains(l));
        if !converges {
            report.counterexample = Some(CdCounterexample { index, sequences: cand, cauchy, limit_estimate });
            break;
        }
    }
    Ok(report)
}

/// Searches for `{x_n}, {z_n} ⊆ A`, `{y_n} ⊆ B` with `ρ(x_n, y_n)` and
/// `ρ(z_n, y_n)` within `tol` of `dist(A, B)` on the tail while `ρ(x_n, z_n)`
/// stays above `10·tol` there.
pub fn uc_falsify(
    pair: &SetPair,
    mut gen: impl FnMut(usize, &mut SampleRng) -> TripleSequences,
    budget: usize,
    tol: f64,
    seed: u64,
) -> Result<FalsifierReport<UcCounterexample>> {
    let dist = pair.dist_value()?;
    let mut rng = seeded_rng(seed);
    let mut report = FalsifierReport {
        property: Property::Uc,
        budget,
        tried: 0,
        admissible: 0,
        horizon: FALSIFIER_HORIZON,
        tol,
        seed,
        dist,
        counterexample: None,
    };
    let d = |p: &Point, q: &Point| pair.space.distance_unchecked(&p.0, &q.0);
    for index in 0..budget {
        let cand = gen(index, &mut rng);
        report.tried += 1;
        let len = cand.x.len();
        if cand.z.len() != len || cand.y.len() != len {
            return Err(Error::InvalidInput("x, z and y candidates differ in length".to_string()));
        }
        check_members(pair, &cand.x, true, "x")?;
        check_members(pair, &cand.z, true, "z")?;
        check_members(pair, &cand.y, false, "y")?;
        let k = tail_start(len)?;
        let near = (k..len).all(|n| d(&cand.x[n], &cand.y[n]) - dist <= tol && d(&cand.z[n], &cand.y[n]) - dist <= tol);
        if !near {
            continue;
        }
        report.admissible += 1;
        let gap = (k..len).map(|n| d(&cand.x[n], &cand.z[n])).fold(f64::INFINITY, f64::min);
        if gap > 10.0 * tol {
            report.counterexample = Some(UcCounterexample { index, sequences: cand, tail_min_gap: gap });
            break;
        }
    }
    Ok(report)
}

/// Short human-readable summary of a report.
pub fn describe<C>(report: &FalsifierReport<C>) -> String {
    format!(
        "{:?}: {} tried, {} admissible, counterexample {}",
        report.property,
        report.tried,
        report.admissible,
        if report.counterexample.is_some() { "found" } else { "not found" }
    )
}
