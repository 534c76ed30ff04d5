//! The paired iteration engine.
//!
//! `x_{n+1} = T(x_n, u_n)`, `u_{n+1} = H(x_n, u_n)`, run on both sides of a
//! system in lock-step, plus Cauchy-window limit detection and the checks
//! built on detected limits (start independence, weakly fixed points,
//! uniqueness of the limit among weakly fixed points).

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cef::{CElement, ExternalFactorSystem, Quadruple, Side};
use crate::math;
use crate::metric::{Point, SetPair, Space};
use crate::{Error, Result, CAUCHY_WINDOW};

/// Coordinates beyond this magnitude stop a run with
/// [`StopReason::DivergenceGuard`].
pub const DIVERGENCE_BOUND: f64 = 1e150;

/// States `(x_n, u_n)` for `n = 0..=steps` with `f(u_n)` alongside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub states: Vec<(Point, CElement)>,
    pub f_values: Vec<f64>,
}

impl IterationTrace {
    /// Number of transitions.
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn point(&self, n: usize) -> &Point {
        &self.states[n].0
    }

    pub fn factor(&self, n: usize) -> &CElement {
        &self.states[n].1
    }

    pub fn last_point(&self) -> &Point {
        &self.states[self.states.len() - 1].0
    }

    fn with_initial(side: &Side<'_>, x0: Point, c0: CElement, capacity: usize) -> Result<Self> {
        if !side.region.contains(&x0) {
            return Err(Error::DomainViolation {
                step: 0,
                side: side.name,
                detail: format!("initial point {x0} is not in {}", side.region.label()),
            });
        }
        let f0 = checked_f(side, &c0, 0)?;
        let mut states = Vec::with_capacity(capacity + 1);
        let mut f_values = Vec::with_capacity(capacity + 1);
        states.push((x0, c0));
        f_values.push(f0);
        Ok(IterationTrace { states, f_values })
    }

    /// Appends `(T(x_n, u_n), H(x_n, u_n))`.
    fn advance(&mut self, side: &Side<'_>) -> Result<()> {
        let step = self.states.len();
        let (x, c) = &self.states[step - 1];
        let (nx, nc) = side.step(x, c);
        if !nx.is_finite() || !nc.is_finite() {
            return Err(Error::Numeric(format!("side {} produced a non-finite state at step {step}", side.name)));
        }
        if !side.region.contains(&nx) {
            return Err(Error::DomainViolation {
                step,
                side: side.name,
                detail: format!("{nx} is not in {}", side.region.label()),
            });
        }
        let f = checked_f(side, &nc, step)?;
        self.states.push((nx, nc));
        self.f_values.push(f);
        Ok(())
    }
}

fn checked_f(side: &Side<'_>, c: &CElement, step: usize) -> Result<f64> {
    let f = side.f.eval(c);
    if !f.is_finite() {
        return Err(Error::Numeric(format!("f_{}({c}) = {f} at step {step}", side.name)));
    }
    Ok(f)
}

/// Iterated sequences of `(T, H)` from `initial`, exactly `steps` transitions.
pub fn iterate(side: &Side<'_>, initial: (Point, CElement), steps: usize) -> Result<IterationTrace> {
    let mut trace = IterationTrace::with_initial(side, initial.0, initial.1, steps)?;
    for _ in 0..steps {
        trace.advance(side)?;
    }
    Ok(trace)
}

/// Both sides of a run, same length, with `ρ(x_n, y_n)` per step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedTrace {
    pub a: IterationTrace,
    pub b: IterationTrace,
    pub rho: Vec<f64>,
}

impl PairedTrace {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// `U(m, n) = ρ(x_m, y_n) + f_A(u_m) + f_B(v_n)`
    pub fn u(&self, space: &Space, m: usize, n: usize) -> f64 {
        space.distance_unchecked(&self.a.point(m).0, &self.b.point(n).0) + self.a.f_values[m] + self.b.f_values[n]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub max_steps: usize,
    pub tol: f64,
    /// Length of the Cauchy confirmation window.
    pub window: usize,
}

impl RunConfig {
    pub fn new(max_steps: usize, tol: f64) -> Self {
        RunConfig { max_steps, tol, window: CAUCHY_WINDOW }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidInput(format!("tol must be positive, got {}", self.tol)));
        }
        if self.window == 0 {
            return Err(Error::InvalidInput("confirmation window must be at least 1".to_string()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    ToleranceMet,
    MaxSteps,
    DivergenceGuard,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// `α`, the final `x_n` when the `A`-side met the Cauchy window.
    pub limit: Option<Point>,
    /// Final `y_n`.
    pub y_tail: Point,
    /// `|ρ(α, y_N) − dist(A, B)|`
    pub proximity_residual: Option<f64>,
    /// `f_A(u_N) − inf f_A`
    pub fa_residual: Option<f64>,
    /// `f_B(v_N) − inf f_B`
    pub fb_residual: Option<f64>,
    pub steps: usize,
    pub stop_reason: StopReason,
    pub tol: f64,
    pub window: usize,
}

/// The final point of `trace` if its last `CAUCHY_WINDOW` successive distances
/// are all below `tol`.
pub fn detect_limit(space: &Space, trace: &IterationTrace, tol: f64) -> Option<Point> {
    detect_limit_window(space, trace, tol, CAUCHY_WINDOW)
}

fn detect_limit_window(space: &Space, trace: &IterationTrace, tol: f64, window: usize) -> Option<Point> {
    let n = trace.states.len();
    if n < window + 1 {
        return None;
    }
    let cauchy = (n - window..n)
        .all(|i| space.distance_unchecked(&trace.point(i - 1).0, &trace.point(i).0) < tol);
    cauchy.then(|| trace.last_point().clone())
}

/// Runs both sides from `q0 ∈ P` until the last `window` successive changes of
/// `x_n`, `ρ(x_n, y_n)`, `f_A(u_n)` and `f_B(v_n)` are all below `tol`, or for
/// `max_steps` transitions.
pub fn run_paired(system: &ExternalFactorSystem, q0: &Quadruple, cfg: RunConfig) -> Result<(PairedTrace, ConvergenceReport)> {
    cfg.validate()?;
    if !system.p.contains(q0) {
        return Err(Error::InvalidInput(format!("initial quadruple is not in P = {}", system.p.label)));
    }
    let space = &system.pair.space;
    let (sa, sb) = (system.side_a(), system.side_b());
    let mut a = IterationTrace::with_initial(&sa, q0.x.clone(), q0.u.clone(), cfg.max_steps)?;
    let mut b = IterationTrace::with_initial(&sb, q0.y.clone(), q0.v.clone(), cfg.max_steps)?;
    let mut rho = Vec::with_capacity(cfg.max_steps + 1);
    rho.push(space.distance_unchecked(&q0.x.0, &q0.y.0));

    // Consecutive steps whose changes are all below tol.
    let mut calm = 0usize;
    let mut stop_reason = StopReason::MaxSteps;
    for n in 1..=cfg.max_steps {
        a.advance(&sa)?;
        b.advance(&sb)?;
        let (x, y) = (a.point(n), b.point(n));
        let r = space.distance_unchecked(&x.0, &y.0);
        if !r.is_finite() {
            return Err(Error::Numeric(format!("rho(x_{n}, y_{n}) = {r}")));
        }
        rho.push(r);
        if x.max_abs() > DIVERGENCE_BOUND || y.max_abs() > DIVERGENCE_BOUND {
            stop_reason = StopReason::DivergenceGuard;
            break;
        }
        let moves = [
            space.distance_unchecked(&a.point(n - 1).0, &x.0),
            math::abs(rho[n] - rho[n - 1]),
            math::abs(a.f_values[n] - a.f_values[n - 1]),
            math::abs(b.f_values[n] - b.f_values[n - 1]),
        ];
        calm = if moves.iter().all(|d| *d < cfg.tol) { calm + 1 } else { 0 };
        if calm >= cfg.window {
            stop_reason = StopReason::ToleranceMet;
            break;
        }
    }

    let limit = detect_limit_window(space, &a, cfg.tol, cfg.window);
    let steps = a.steps();
    let y_tail = b.last_point().clone();
    let proximity_residual = match (&limit, system.pair.dist.value()) {
        (Some(alpha), Some(d)) => Some(math::abs(space.distance_unchecked(&alpha.0, &y_tail.0) - d)),
        _ => None,
    };
    let fa_residual = system.f_a.inf.value().map(|i| a.f_values[steps] - i);
    let fb_residual = system.f_b.inf.value().map(|i| b.f_values[steps] - i);
    let report = ConvergenceReport {
        limit,
        y_tail,
        proximity_residual,
        fa_residual,
        fb_residual,
        steps,
        stop_reason,
        tol: cfg.tol,
        window: cfg.window,
    };
    Ok((PairedTrace { a, b, rho }, report))
}

/// `|ρ(α, y_tail) − dist(A, B)|` for a report with a detected limit.
pub fn proximity_residual(report: &ConvergenceReport, pair: &SetPair) -> Result<f64> {
    let alpha = report
        .limit
        .as_ref()
        .ok_or_else(|| Error::Undecided("the run did not meet its Cauchy window".to_string()))?;
    let d = pair.dist_value()?;
    Ok(math::abs(pair.space.distance(alpha, &report.y_tail)? - d))
}

/// Three-way outcome of checks that rest on detected limits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Holds,
    Fails,
    Undecided,
}

/// Runs from `q1 = (x₀, y₀, u₀, v₀)` and `q2 = (z₀, y₀, t₀, v₀)` and compares
/// the two `A`-side limits: `Holds` when they agree within `10·tol`,
/// `Undecided` when either run has no limit.
pub fn limit_uniqueness_check(system: &ExternalFactorSystem, q1: &Quadruple, q2: &Quadruple, cfg: RunConfig) -> Result<Decision> {
    if q1.y != q2.y || q1.v != q2.v {
        return Err(Error::InvalidInput("both starts must share (y0, v0)".to_string()));
    }
    let (_, r1) = run_paired(system, q1, cfg)?;
    let (_, r2) = run_paired(system, q2, cfg)?;
    Ok(match (r1.limit, r2.limit) {
        (Some(l1), Some(l2)) => {
            if system.pair.space.distance(&l1, &l2)? <= 10.0 * cfg.tol {
                Decision::Holds
            } else {
                Decision::Fails
            }
        }
        _ => Decision::Undecided,
    })
}

/// `{c_n} ⊆ C` with `(a, y, c_n, v) ∈ P` for every `n` and `f_A(c_n) → inf f_A`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfimumSequence {
    pub anchor: Point,
    pub witness_y: Point,
    pub witness_v: CElement,
    pub elements: Vec<CElement>,
    pub f_values: Vec<f64>,
    /// Declared tolerance on the final gap `f_A(c_N) − inf f_A`.
    pub tol: f64,
}

impl InfimumSequence {
    fn quadruple(&self, c: &CElement) -> Quadruple {
        Quadruple::new(self.anchor.clone(), self.witness_y.clone(), c.clone(), self.witness_v.clone())
    }
}

/// Builds `{c_n}` from `generator(0..length)` and checks it is an infimum
/// sequence of `f_A` anchored at `anchor` with witness `(y, v)`.
pub fn make_infimum_sequence(
    system: &ExternalFactorSystem,
    anchor: Point,
    witness: (Point, CElement),
    mut generator: impl FnMut(usize) -> CElement,
    length: usize,
    tol: f64,
) -> Result<InfimumSequence> {
    if length == 0 {
        return Err(Error::InvalidInput("an infimum sequence needs at least one element".to_string()));
    }
    let inf = system
        .f_a
        .inf
        .value()
        .ok_or_else(|| Error::NotCertified("inf f_A has not been supplied or estimated".to_string()))?;
    let mut seq = InfimumSequence {
        anchor,
        witness_y: witness.0,
        witness_v: witness.1,
        elements: Vec::with_capacity(length),
        f_values: Vec::with_capacity(length),
        tol,
    };
    for n in 0..length {
        let c = generator(n);
        if !system.p.contains(&seq.quadruple(&c)) {
            return Err(Error::InvalidInput(format!("(a, y, c_{n}, v) with c_{n} = {c} is not in P = {}", system.p.label)));
        }
        seq.f_values.push(system.f_a.eval(&c));
        seq.elements.push(c);
    }
    let last = seq.f_values[length - 1];
    if !(last - inf <= tol) {
        return Err(Error::NotAnInfimumSequence(format!("f_A(c_N) = {last} is not within {tol} of inf f_A = {inf}")));
    }
    Ok(seq)
}

/// `ρ(T_A(α, c_n), α)` along an infimum sequence anchored at `α`.
pub fn weak_fixed_residuals(system: &ExternalFactorSystem, alpha: &Point, seq: &InfimumSequence) -> Result<Vec<f64>> {
    if seq.anchor != *alpha {
        return Err(Error::InvalidInput(format!("sequence is anchored at {}, not at {alpha}", seq.anchor)));
    }
    seq.elements
        .iter()
        .map(|c| {
            if !system.p.contains(&seq.quadruple(c)) {
                return Err(Error::InvalidInput(format!("(α, y, {c}, v) is not in P = {}", system.p.label)));
            }
            system.pair.space.distance(&(system.t_a)(alpha, c), alpha)
        })
        .collect()
}

/// A weakly fixed point other than the detected limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessViolation {
    pub beta: Point,
    pub distance_to_alpha: f64,
    pub tail_max_residual: f64,
}

/// Candidates `β` (the anchors of the supplied infimum sequences) whose
/// weak-fixed residual tail stays below `tol` while `ρ(β, α) > 10·tol`.
/// Candidates within `10·tol` of `α` are skipped. The tail is the last
/// `CAUCHY_WINDOW` residuals.
pub fn uniqueness_scan(
    system: &ExternalFactorSystem,
    alpha: &Point,
    candidates: &[InfimumSequence],
    tol: f64,
) -> Result<Vec<UniquenessViolation>> {
    let mut out = Vec::new();
    for seq in candidates {
        let beta = &seq.anchor;
        let d = system.pair.space.distance(beta, alpha)?;
        if d <= 10.0 * tol {
            continue;
        }
        let res = weak_fixed_residuals(system, beta, seq)?;
        let tail = &res[res.len().saturating_sub(CAUCHY_WINDOW)..];
        let worst = tail.iter().copied().fold(0.0, f64::max);
        if worst < tol {
            out.push(UniquenessViolation { beta: beta.clone(), distance_to_alpha: d, tail_max_residual: worst });
        }
    }
    Ok(out)
}
