//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use extfix_core::cef::{verify_contraction, VerifyConfig};
use extfix_core::checkers::{
    cd_falsify, check_l2_bound, split_limit_validate, tail_sup, uc_falsify, BoundCertificate, TailSupTable,
};
use extfix_core::instances::{
    affine_cyclic_example, antipodal_generator, circle_origin_pair, cyclic3_solve, example1_pair, example1_start,
    example1_system, in_example1_level_set, interval_uc_generator, open_interval_escaping_generator,
    open_interval_pair, product_quadruple, product_system, singleton_cyclic_triple, triangle_frame,
};
use extfix_core::iterate::{limit_uniqueness_check, make_infimum_sequence, run_paired, uniqueness_scan, RunConfig};
use extfix_core::metric::seeded_rng;
use extfix_core::{CElement, Decision, Point, StopReason, Verdict};
use rand::Rng;

// Pinned tolerances.
const RESIDUAL_FLOOR: f64 = -1e-10;
const TAIL_TOL: f64 = 1e-6;
const LIMIT_TOL: f64 = 1e-8;
const BP_TOL: f64 = 1e-8;
const RUN_TOL: f64 = 1e-9;
const FALSIFIER_TOL: f64 = 1e-9;
const SAMPLES: usize = 10_000;
const SEED: u64 = 0;
const BUDGET: usize = 1000;
const FIXTURES: usize = 1000;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e(err: impl std::fmt::Display) -> String {
    err.to_string()
}

fn criterion_1() -> Check {
    let sys = example1_system();
    let ok = verify_contraction(&sys, VerifyConfig::new(SAMPLES, SEED)).map_err(e)?;
    ensure(ok.verdict == Verdict::CertifiedOnSamples && ok.min_residual >= RESIDUAL_FLOOR, || {
        format!("lambda 5/8: {:?}, min residual {}", ok.verdict, ok.min_residual)
    })?;
    let bad = verify_contraction(&sys.with_lambda(0.5), VerifyConfig::new(SAMPLES, SEED)).map_err(e)?;
    ensure(bad.verdict == Verdict::Refuted && bad.witness.is_some(), || "lambda 0.5 not refuted with a witness".into())?;
    Ok(format!(
        "min residual {:.3e} at 5/8; 0.5 refuted, min residual {:.3e}",
        ok.min_residual, bad.min_residual
    ))
}

fn criterion_2() -> Check {
    let sys = example1_system();
    let (trace, rep) = run_paired(&sys, &example1_start(3.0, -2.0), RunConfig::new(1000, RUN_TOL)).map_err(e)?;
    ensure(rep.stop_reason == StopReason::ToleranceMet, || format!("stopped with {:?}", rep.stop_reason))?;
    let alpha = rep.limit.clone().ok_or("no limit")?;
    ensure(alpha == Point::scalar(0.0), || format!("limit {alpha}"))?;
    let chain: Vec<f64> = (0..=4).map(|n| trace.a.point(n).x()).collect();
    ensure(chain == [3.0, 6.0, 0.5, 1.0, 0.0], || format!("a-side chain {chain:?}"))?;
    let prox = rep.proximity_residual.ok_or("no proximity residual")?;
    let fa = rep.fa_residual.ok_or("no f_A residual")?;
    let fb = rep.fb_residual.ok_or("no f_B residual")?;
    ensure(prox <= TAIL_TOL && fa <= TAIL_TOL && fb <= TAIL_TOL, || format!("residuals {prox} {fa} {fb}"))?;
    Ok(format!("alpha = 0 at step 4; proximity {prox:.1e}, f_A {fa:.1e}, f_B {fb:.1e}"))
}

fn criterion_3() -> Check {
    let sys = example1_system();
    let (trace, _) = run_paired(&sys, &example1_start(3.0, -2.0), RunConfig::new(1000, RUN_TOL)).map_err(e)?;
    let space = &sys.pair.space;
    let cert = check_l2_bound(space, &trace, BoundCertificate::new(5.0 / 8.0, 1.0)).map_err(e)?;
    ensure(cert.holds(), || format!("violation at {:?}", cert.first_violation))?;
    let diag = (1..trace.len()).filter(|&n| trace.u(space, n, n) > cert.bound(n, n) + 1e-10).count();
    ensure(diag == 0, || format!("{diag} diagonal violations"))?;
    Ok(format!("M = {}, horizon {}, 0 violations", cert.m, cert.horizon))
}

fn criterion_4() -> Check {
    let sys = example1_system();
    let cfg = RunConfig::new(1000, RUN_TOL);
    let (q1, q2) = (example1_start(3.0, -2.0), example1_start(97.3, -2.0));
    let d = limit_uniqueness_check(&sys, &q1, &q2, cfg).map_err(e)?;
    let l1 = run_paired(&sys, &q1, cfg).map_err(e)?.1.limit.ok_or("no limit from 3")?;
    let l2 = run_paired(&sys, &q2, cfg).map_err(e)?.1.limit.ok_or("no limit from 97.3")?;
    let gap = (l1.x() - l2.x()).abs();
    ensure(d == Decision::Holds && gap <= LIMIT_TOL, || format!("{d:?}, limits {l1} and {l2}"))?;

    let mut cands = Vec::new();
    for i in 0..=200 {
        let beta = i as f64 * 0.5;
        if !in_example1_level_set(beta) {
            continue;
        }
        let s = make_infimum_sequence(&sys, Point::scalar(beta), (Point::scalar(-1.0), CElement::scalar(-1.0)), |_| {
            CElement::scalar(beta)
        }, 12, RUN_TOL)
        .map_err(e)?;
        cands.push(s);
    }
    let v = uniqueness_scan(&sys, &l1, &cands, RUN_TOL).map_err(e)?;
    ensure(v.is_empty(), || format!("{} violations, first at {}", v.len(), v[0].beta))?;
    Ok(format!("limits differ by {gap:e}; {} level-set candidates, no violations", cands.len()))
}

/// Perimeter of three points.
fn perimeter(z: &[[f64; 2]; 3]) -> f64 {
    (0..3).map(|i| {
        let (a, b) = (z[i], z[(i + 1) % 3]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    })
    .sum()
}

fn criterion_5() -> Check {
    let ct = affine_cyclic_example();
    let (p, dir) = triangle_frame();
    let at = |i: usize, t: f64| [p[i][0] + t * dir[i][0], p[i][1] + t * dir[i][1]];
    // Brute-force oracles on a 41³ parameter grid: the least k in the summing
    // inequality, and the perimeter minimiser.
    let d_sum: f64 = ct.gaps.iter().sum();
    let (mut k_needed, mut best, mut argbest) = (0.0f64, f64::INFINITY, [0usize; 3]);
    for a in 0..=40 {
        for b in 0..=40 {
            for c in 0..=40 {
                let t = [a, b, c].map(|v| v as f64 / 40.0);
                let z = [at(0, t[0]), at(1, t[1]), at(2, t[2])];
                let per = perimeter(&z);
                if per < best {
                    best = per;
                    argbest = [a, b, c];
                }
                let img = [at(1, t[0] / 2.0), at(2, t[1] / 2.0), at(0, t[2] / 2.0)];
                if per - d_sum > 1e-12 {
                    k_needed = k_needed.max((perimeter(&img) - d_sum) / (per - d_sum));
                }
            }
        }
    }
    ensure(argbest == [0, 0, 0] && (k_needed - ct.k).abs() < 0.01 && k_needed <= ct.k + 1e-12, || {
        format!("oracle k {k_needed}, minimiser {argbest:?}")
    })?;

    let starts = [at(0, 0.5), at(1, 0.7), at(2, 0.3)].map(|v| Point::new(v.to_vec()));
    let r = cyclic3_solve(&ct, &starts, RunConfig::new(1000, RUN_TOL)).map_err(e)?;
    let worst = r.gap_residuals.iter().chain(&r.cycle_residuals).fold(0.0f64, |m, v| m.max(*v));
    ensure(worst <= BP_TOL, || format!("affine residuals {:?} {:?}", r.gap_residuals, r.cycle_residuals))?;
    let off = (0..3).map(|i| ((r.z[i].0[0] - p[i][0]).abs()).max((r.z[i].0[1] - p[i][1]).abs())).fold(0.0, f64::max);
    ensure(off <= BP_TOL, || format!("z off the vertices by {off}"))?;

    let st = singleton_cyclic_triple(0.5);
    let s = cyclic3_solve(&st, &[Point::scalar(10.0), Point::scalar(20.0), Point::scalar(30.0)], RunConfig::new(1000, RUN_TOL))
        .map_err(e)?;
    ensure(s.gap_residuals == [0.0; 3] && s.cycle_residuals == [0.0; 3], || {
        format!("singleton residuals {:?} {:?}", s.gap_residuals, s.cycle_residuals)
    })?;
    Ok(format!("oracle k = {k_needed:.4}; affine worst residual {worst:.1e}; singleton exact"))
}

fn criterion_6() -> Check {
    let e1 = example1_system();
    let prod = product_system(&e1, &e1);
    let cert = verify_contraction(&prod, VerifyConfig::new(SAMPLES, SEED)).map_err(e)?;
    ensure(cert.verdict == Verdict::CertifiedOnSamples && cert.lambda == 5.0 / 8.0, || {
        format!("{:?} at lambda {}, min residual {}", cert.verdict, cert.lambda, cert.min_residual)
    })?;
    let q0 = product_quadruple(&example1_start(3.0, -2.0), &example1_start(5.0, -3.0));
    ensure(q0.x == Point::new(vec![3.0, 5.0]) && q0.y == Point::new(vec![-2.0, -3.0]), || "bad product start".into())?;
    let (_, rep) = run_paired(&prod, &q0, RunConfig::new(1000, RUN_TOL)).map_err(e)?;
    let l = rep.limit.ok_or("no limit")?;
    ensure(l.0.iter().all(|c| c.abs() <= LIMIT_TOL), || format!("limit {l}"))?;
    Ok(format!("certified, min residual {:.3e}; limit {l}", cert.min_residual))
}

fn criterion_7() -> Check {
    let uc = uc_falsify(&example1_pair(), interval_uc_generator(0.0, -1.0, 4096), BUDGET, FALSIFIER_TOL, SEED).map_err(e)?;
    ensure(uc.counterexample.is_none() && uc.tried == BUDGET, || "UC counterexample on the interval pair".into())?;
    let cd = cd_falsify(&open_interval_pair(), open_interval_escaping_generator(4096), BUDGET, FALSIFIER_TOL, SEED)
        .map_err(e)?;
    let cx = cd.counterexample.ok_or("no CD counterexample on the open pair")?;
    let circle = uc_falsify(&circle_origin_pair(), antipodal_generator(4097), BUDGET, FALSIFIER_TOL, SEED).map_err(e)?;
    let ucx = circle.counterexample.ok_or("no UC counterexample on circle/origin")?;
    ensure((ucx.tail_min_gap - 2.0).abs() < 1e-9, || format!("antipodal gap {}", ucx.tail_min_gap))?;
    Ok(format!(
        "interval UC: {}/{} admissible, none; open CD: limit estimate {:?}; circle UC: gap {}",
        uc.admissible,
        uc.tried,
        cx.limit_estimate.map(|p| p.to_string()),
        ucx.tail_min_gap
    ))
}

fn convergent_fixture(rng: &mut extfix_core::SampleRng, len: usize) -> (Vec<f64>, f64) {
    let floor: f64 = rng.gen_range(-10.0..10.0);
    let c: f64 = rng.gen_range(0.0..5.0);
    let r: f64 = rng.gen_range(0.1..0.95);
    let kind = rng.gen_range(0..3);
    let seq = (1..=len)
        .map(|n| {
            let n = n as f64;
            floor
                + match kind {
                    0 => c / n,
                    1 => c * r.powf(n),
                    _ => c / (n * n),
                }
        })
        .collect();
    (seq, floor)
}

fn criterion_8() -> Check {
    let mut rng = seeded_rng(SEED);
    let horizon = 64;
    for i in 0..FIXTURES {
        let (x, xf) = convergent_fixture(&mut rng, 256);
        let (y, yf) = convergent_fixture(&mut rng, 256);
        let ok = split_limit_validate(&x, &y, xf, yf, &[1.0, 0.1, 1e-2, 1e-3, 1e-4]).map_err(e)?;
        ensure(ok, || format!("fixture {i}: split limit rejected"))?;
        let f = |n: usize, m: usize| x[n - 1] + y[m - 1];
        let t = TailSupTable::build(f, horizon).map_err(e)?;
        ensure(t.values.windows(2).all(|w| w[1] <= w[0]), || format!("fixture {i}: table increases"))?;
        // Decreasing fixtures: the tail sup sits at n = m = k and falls to the floor.
        for k in 1..=horizon {
            let want = x[k - 1] + y[k - 1];
            let got = t.get(k).unwrap();
            ensure(got == want && got >= xf + yf, || format!("fixture {i}, k = {k}: {got} vs {want}"))?;
        }
        for k in [1, horizon / 2, horizon] {
            ensure(tail_sup(f, k, horizon).map_err(e)? == t.get(k).unwrap(), || format!("fixture {i}: direct sup differs"))?;
        }
    }
    Ok(format!("{FIXTURES} fixtures"))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Check); 8] = [
        (1, "e1 certification", criterion_1),
        (2, "e1 convergence", criterion_2),
        (3, "distance bound", criterion_3),
        (4, "uniqueness", criterion_4),
        (5, "cyclic reduction", criterion_5),
        (6, "product composition", criterion_6),
        (7, "property falsification", criterion_7),
        (8, "lemma validators", criterion_8),
    ];
    let mut failed = 0;
    for (n, name, check) in criteria {
        match check() {
            Ok(detail) => println!("criterion {n} ({name}): PASS: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
