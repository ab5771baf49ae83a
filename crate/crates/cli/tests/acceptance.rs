//! Acceptance criteria 1–9. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::time::{Duration, Instant};

use pxlap_cli::config::RunConfig;
use pxlap_cli::pipeline::{self, MuChoice};
use pxlap_core::degiorgi::{recursion_oracle, recursion_threshold};
use pxlap_core::energy::{Energy, DEFAULT_EPS_REG};
use pxlap_core::multisolve::random_smooth_direction;
use pxlap_core::nonlinearity::{truncate, truncation_growth_check, RationalCubic, TruncatedNonlinearity};
use pxlap_core::varspace::{check_modular_relations, luxemburg_norm, DEFAULT_NORM_TOL};
use pxlap_core::{validate_exponents, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn record(results: &mut Vec<bool>, id: u32, title: &str, limit: Duration, f: impl FnOnce() -> Outcome) {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let passed = out.passed && elapsed <= limit;
    println!(
        "criterion {id} {}: {title}: {} ({:.2} s, limit {} s)",
        if passed { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    results.push(passed);
}

/// Trapezoid weights on a 1D grid, computed from the spacing alone.
fn trapezoid_1d(n: usize, h: f64) -> Vec<f64> {
    (0..n).map(|i| if i == 0 || i + 1 == n { 0.5 * h } else { h }).collect()
}

fn random_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
    (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()
}

fn criterion_1() -> Outcome {
    let n = 256;
    let grid = Grid::new(&[0.0], &[1.0], &[n]).unwrap();
    let w = trapezoid_1d(n, 1.0 / (n - 1) as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for p in [1.5, 2.0, 3.0] {
        let e = vec![p; n];
        for _ in 0..100 {
            let v = random_values(&mut rng, n);
            let exact = v.iter().zip(&w).map(|(x, wi)| wi * x.abs().powf(p)).sum::<f64>().powf(1.0 / p);
            let got = luxemburg_norm(&v, &e, &grid, DEFAULT_NORM_TOL).unwrap();
            worst = worst.max((got - exact).abs() / exact);
        }
    }
    Outcome { passed: worst <= 1e-8, detail: format!("worst relative error {worst:.3e} (tolerance 1e-8)") }
}

fn criterion_2() -> Outcome {
    let n = 128;
    let grid = Grid::new(&[0.0], &[1.0], &[n]).unwrap();
    let w = trapezoid_1d(n, 1.0 / (n - 1) as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = 0;
    for _ in 0..100 {
        let v = random_values(&mut rng, n);
        let e: Vec<f64> = (0..n).map(|_| rng.gen_range(1.5..=1.8)).collect();
        let rep = check_modular_relations(&v, &e, &grid).unwrap();
        // independent evaluation of the same relations
        let norm = luxemburg_norm(&v, &e, &grid, DEFAULT_NORM_TOL).unwrap();
        let rho: f64 = v.iter().zip(&e).zip(&w).map(|((x, p), wi)| wi * x.abs().powf(*p)).sum();
        let (lo, hi) = (e.iter().cloned().fold(f64::INFINITY, f64::min), e.iter().cloned().fold(0.0, f64::max));
        let slack = 1e-8;
        let side = (norm - 1.0).abs() <= 1e-9 || (norm > 1.0) == (rho > 1.0);
        let bounds = if norm > 1.0 {
            norm.powf(lo) * (1.0 - slack) <= rho && rho <= norm.powf(hi) * (1.0 + slack)
        } else {
            norm.powf(hi) * (1.0 - slack) <= rho && rho <= norm.powf(lo) * (1.0 + slack)
        };
        if !(rep.all_passed() && side && bounds) {
            failures += 1;
        }
    }
    Outcome { passed: failures == 0, detail: format!("{failures} failures over 100 pairs") }
}

fn criterion_3() -> Outcome {
    let grid = Grid::unit(2, 64).unwrap();
    let p: Vec<f64> = (0..grid.len()).map(|i| 1.5 + 0.3 * grid.coords(i)[0]).collect();
    let exps = validate_exponents(&p, &vec![20.0; grid.len()], 2).unwrap();
    let model = RationalCubic::new(1.0, 2.8).unwrap();
    let tn = TruncatedNonlinearity::new(2.0, &exps).unwrap();
    let en = Energy::new(&grid, &exps, &model, &tn, 2.0, 0.5, DEFAULT_EPS_REG).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let interior: Vec<usize> = grid.interior_nodes().collect();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let amp = rng.gen_range(0.5..3.0);
        let u = random_smooth_direction(&grid, &mut rng);
        let u = u.scaled(amp / u.sup_norm());
        let r = en.residual(u.values());
        let scale = r.sup_norm;
        let mut x = u.values().to_vec();
        for _ in 0..16 {
            let i = interior[rng.gen_range(0..interior.len())];
            let x0 = x[i];
            x[i] = x0 + h;
            let ep = en.total(&x);
            x[i] = x0 - h;
            let em = en.total(&x);
            x[i] = x0;
            let fd = (ep - em) / (2.0 * h);
            worst = worst.max((fd - r.entries[i]).abs() / scale);
        }
        for _ in 0..4 {
            let d = random_smooth_direction(&grid, &mut rng);
            let dot: f64 = r.entries.iter().zip(d.values()).map(|(a, b)| a * b).sum();
            let up: Vec<f64> = x.iter().zip(d.values()).map(|(a, b)| a + h * b).collect();
            let um: Vec<f64> = x.iter().zip(d.values()).map(|(a, b)| a - h * b).collect();
            let fd = (en.total(&up) - en.total(&um)) / (2.0 * h);
            let norm = (r.l2_norm * d.values().iter().map(|v| v * v).sum::<f64>().sqrt()).max(f64::MIN_POSITIVE);
            worst = worst.max((fd - dot).abs() / norm);
        }
    }
    Outcome { passed: worst <= 1e-5, detail: format!("worst relative error {worst:.3e} (tolerance 1e-5)") }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_cont: f64 = 0.0;
    let mut violations = 0usize;
    for _ in 0..10 {
        let p_plus = rng.gen_range(1.2..2.9);
        let q = rng.gen_range(p_plus + 0.5..25.0);
        let k = rng.gen_range(2.0..50.0);
        let tn = TruncatedNonlinearity::from_samples(k, &[q], p_plus).unwrap();
        // both branches evaluated at K and at the neighbouring floats
        let g_at = k.powf(q - 1.0);
        for s in [k.next_down(), k, k.next_up()] {
            let g = truncate(&tn, 0, s);
            worst_cont = worst_cont.max((g - g_at).abs() / g_at);
            let gm = truncate(&tn, 0, -s);
            worst_cont = worst_cont.max((gm + g_at).abs() / g_at);
        }
        let samples: Vec<f64> = (0..10_000)
            .map(|i| match i % 4 {
                0 => rng.gen_range(-10.0 * k..10.0 * k),
                1 => rng.gen_range(-k..k),
                2 => k * (1.0 + rng.gen_range(-1e-6..1e-6)),
                _ => -k * 10f64.powf(rng.gen_range(-3.0..3.0)),
            })
            .collect();
        for &s in &samples {
            let g = truncate(&tn, 0, s).abs();
            let bound = k.powf(q - p_plus) * s.abs().powf(p_plus - 1.0);
            if g > bound * (1.0 + 1e-14) {
                violations += 1;
            }
        }
        match truncation_growth_check(&tn, &samples) {
            Ok(rep) => violations += rep.violations,
            Err(_) => violations += 1,
        }
    }
    Outcome {
        passed: worst_cont <= 1e-12 && violations == 0,
        detail: format!("continuity defect {worst_cont:.3e} (tolerance 1e-12), {violations} growth violations"),
    }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = 0;
    for i in 0..500 {
        let c = 10f64.powf(rng.gen_range(-3.0..=3.0));
        let b = (rng.gen_range(1.1f64.ln()..=48.0 * 2f64.ln())).exp();
        let eta = rng.gen_range(0.1..=5.0);
        let th = recursion_threshold(c, b, eta);
        let f = if i % 10 == 0 { 1.0 } else { rng.gen_range(1e-6..1.0) };
        let n = (200.0 * (1.0 / eta).max(1.0)).ceil() as usize;
        match recursion_oracle(c, b, eta, f * th, n) {
            Ok(out) if out.converged => {}
            _ => failures += 1,
        }
    }
    let th = recursion_threshold(1.0, 2.0, 1.0);
    let boundary = recursion_oracle(1.0, 2.0, 1.0, th, 200).map(|o| o.converged).unwrap_or(false);
    let above = recursion_oracle(1.0, 2.0, 1.0, 10.0 * th, 200).map(|o| o.diverged).unwrap_or(false);
    Outcome {
        passed: failures == 0 && boundary && above,
        detail: format!("{failures} of 500 sweep points failed, boundary converges = {boundary}, 10x threshold diverges = {above}"),
    }
}

fn solution_checks(stage: &str, t: &pxlap_core::multisolve::SolutionTriple, notes: &mut Vec<String>) -> bool {
    let mut ok = t.found_count == 3;
    for s in t.solutions() {
        ok &= s.residual_sup <= 1e-6;
    }
    let d: Vec<f64> = t.distances.iter().map(|d| d.unwrap_or(0.0)).collect();
    ok &= d.iter().all(|d| *d >= 1e-3);
    let e1 = t.u1.as_ref().map_or(f64::NAN, |u| u.report.total);
    ok &= e1 < 0.0;
    let res = t.solutions().map(|s| s.residual_sup).fold(0.0, f64::max);
    notes.push(format!(
        "{stage}: found {}, max residual {res:.2e}, min distance {:.3e}, E(u1) = {e1:.4}",
        t.found_count,
        d.iter().cloned().fold(f64::INFINITY, f64::min)
    ));
    ok
}

fn main() {
    let mut results = Vec::new();
    let secs = Duration::from_secs;
    record(&mut results, 1, "Luxemburg norm matches the discrete L^p norm", secs(5), criterion_1);
    record(&mut results, 2, "norm/modular relations", secs(10), criterion_2);
    record(&mut results, 3, "residual matches finite differences of the energy", secs(30), criterion_3);
    record(&mut results, 4, "truncation continuity and growth bound", secs(2), criterion_4);
    record(&mut results, 5, "recursion oracle below the threshold", secs(2), criterion_5);

    let cfg = RunConfig::default();
    let (_, problem) = pipeline::validate(&cfg);
    let problem = problem.expect("model configuration validates");
    let mut solved = None;
    record(&mut results, 6, "three solutions on the 48x48 model problem", secs(600), || {
        let lambda = 2.0 * problem.theta.lambda_lower;
        let run = solved.insert(problem.solve(lambda, MuChoice::DeltaFraction(1.0)));
        let run = match run {
            Ok(r) => r,
            Err(e) => return Outcome { passed: false, detail: format!("solve failed: {e}") },
        };
        let mut notes = Vec::new();
        let z = solution_checks("mu = 0", &run.stage_zero, &mut notes);
        let m = solution_checks(&format!("mu = {:.3e}", run.mu), &run.solution, &mut notes);
        let expected_mu = run.selection.as_ref().map_or(f64::NAN, |s| s.delta1.min(1e-3));
        let mu_ok = run.mu == expected_mu;
        Outcome { passed: z && m && mu_ok, detail: notes.join("; ") }
    });
    let run = solved.expect("criterion 6 ran");

    record(&mut results, 7, "certification soundness", secs(1800), || {
        let Ok(run) = &run else {
            return Outcome { passed: false, detail: "no solve".into() };
        };
        let k = run.k_selected;
        let mut ok = run.k_certified == Some(k) && run.certification.len() == 3;
        for (c, s) in run.certification.iter().zip(run.solution.solutions()) {
            ok &= c.certified && c.report.primary.iter().all(|r| r.certified_bound);
            let g = s.field.grid();
            let direct = g.interior_nodes().map(|i| s.field.values()[i].abs()).fold(0.0, f64::max);
            ok &= direct <= k;
        }
        let mut sweep_cfg = cfg.clone();
        sweep_cfg.lambda.sweep_factors = vec![1.5, 2.0, 2.5];
        sweep_cfg.mu.sweep_fractions = vec![0.0, 0.5, 1.0];
        let (_, sp) = pipeline::validate(&sweep_cfg);
        let sp = sp.expect("sweep configuration validates");
        let cells = pipeline::sweep(&sp);
        let inconsistencies = cells.iter().filter(|(c, _)| c.inconsistency).count();
        let certified = cells.iter().filter(|(c, _)| c.all_certified).count();
        ok &= cells.len() == 9 && inconsistencies == 0;
        Outcome {
            passed: ok,
            detail: format!(
                "K = {k:.4}, all three certified = {}, sweep {} cells, {certified} fully certified, {inconsistencies} inconsistencies",
                run.all_certified,
                cells.len()
            ),
        }
    });

    record(&mut results, 8, "Caccioppoli inequality on the minimizer", secs(60), || {
        let Ok(run) = &run else {
            return Outcome { passed: false, detail: "no solve".into() };
        };
        let grid = problem.grid;
        let u1 = &run.solution.u1.as_ref().expect("minimizer found").field;
        let k = run.k_certified.unwrap_or(run.k_selected);
        let Ok(checks) = problem.caccioppoli_suite(u1, run.lambda, run.mu, k, 5) else {
            return Outcome { passed: false, detail: "Caccioppoli evaluation failed".into() };
        };
        let mut ok = checks.len() == 5 && checks == run.caccioppoli;
        for c in &checks {
            ok &= c.pass && c.tol_disc == 0.05;
            ok &= c.level >= 1.0 && 0.0 < c.t && c.t < c.s && c.s <= 1.0;
            ok &= grid.ball_strictly_inside(&c.center, c.s);
            ok &= c.lhs <= (1.0 + 0.05) * c.rhs;
        }
        let worst = checks.iter().map(|c| c.lhs / c.rhs).fold(0.0, f64::max);
        Outcome { passed: ok, detail: format!("{} triples, largest lhs/rhs {worst:.3e}", checks.len()) }
    });

    record(&mut results, 9, "local minimum at zero", secs(60), || {
        let Ok(run) = &run else {
            return Outcome { passed: false, detail: "no solve".into() };
        };
        let lm = match problem.local_min(run.lambda) {
            Ok(lm) => lm,
            Err(e) => return Outcome { passed: false, detail: e.to_string() },
        };
        let same = run.local_min.as_ref() == Some(&lm);
        let radii: Vec<f64> = lm.rings.iter().map(|r| r.radius).collect();
        let last = lm.rings.last().unwrap();
        let decreasing = lm.rings.windows(2).all(|w| w[1].max_ratio < w[0].max_ratio);
        let ok = radii == [1e-1, 1e-2, 1e-3] && lm.samples == 64 && last.min_energy > 0.0 && decreasing && lm.ratio_decreasing && same;
        let ratios: Vec<String> = lm.rings.iter().map(|r| format!("{:.3e}", r.max_ratio)).collect();
        Outcome {
            passed: ok,
            detail: format!("min E on radius 1e-3 ring = {:.3e}, max J/Phi per ring [{}]", last.min_energy, ratios.join(", ")),
        }
    });

    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
