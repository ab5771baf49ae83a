//! Output directories: field CSVs, traces, `report.json` and `report.txt`.

use std::fmt::Write as _;
use std::path::Path;

use pxlap_core::degiorgi::{CertificationReport, DeGiorgiReport, RecursionOutcome};
use serde::Serialize;

use crate::error::CliError;
use crate::fieldio::{save_field, save_table};
use crate::pipeline::{SolveRun, SweepCell, ValidationReport};

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let s = serde_json::to_string_pretty(value).map_err(|e| CliError::Format { path: path.into(), detail: e.to_string() })?;
    std::fs::write(path, s + "\n").map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn opt(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.6e}"))
}

pub fn validation_text(r: &ValidationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "validation: {}", if r.passed() { "PASS" } else { "FAIL" });
    let _ = writeln!(s, "grid nodes {:?}", r.grid_nodes);
    let _ = writeln!(s, "p- = {}  p+ = {}  q- = {}  p*- = {}", opt(r.p_minus), opt(r.p_plus), opt(r.q_minus), opt(r.pstar_minus));
    let _ = writeln!(s, "theta = {}  1/theta = {}  growth C = {}", opt(r.theta), opt(r.lambda_lower), opt(r.growth_constant));
    for c in &r.checks {
        let _ = writeln!(s, "  [{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
    }
    s
}

fn ball_line(s: &mut String, r: &DeGiorgiReport) {
    let last = r.a_sequence.last().copied().unwrap_or(f64::NAN);
    let _ = writeln!(
        s,
        "    sign {:+} center {:?} R {:.4}: a0 = {:.4e} threshold = {:.4e} met = {} a_last = {:.3e} certified = {}",
        r.sign, r.center, r.radius, r.a_sequence[0], r.threshold, r.threshold_met, last, r.empirical_decay
    );
}

fn certification_text(s: &mut String, label: &str, c: &CertificationReport) {
    let _ = writeln!(
        s,
        "  {label}: certified = {} (K = {}, sup|u| = {:.6e}, balls {} checked, {} trivial, {} failed)",
        c.certified, c.k, c.direct_sup, c.balls_checked, c.balls_trivial, c.failures
    );
    for r in &c.primary {
        ball_line(s, r);
    }
    if let Some(w) = &c.worst {
        let _ = writeln!(s, "    worst nontrivial ball:");
        ball_line(s, w);
    }
}

pub fn solve_text(run: &SolveRun) -> String {
    let mut s = String::new();
    let t = &run.solution;
    let _ = writeln!(s, "lambda = {:.6e} ({:.4} / theta), theta = {:.6e}", run.lambda, run.lambda_factor, run.theta);
    let _ = writeln!(s, "mu = {:.6e} ({:?})", run.mu, run.mu_choice);
    if let Some(k) = &run.selection {
        let _ = writeln!(
            s,
            "K selected = {} (delta1 = {:.6e}, delta = {:.6e}, refined = {}), K certified = {}",
            k.k,
            k.delta1,
            k.delta,
            k.refined,
            opt(run.k_certified)
        );
    }
    let _ = writeln!(s, "growth C = {:.6e}, Sobolev S = {:.6e}", run.growth_constant, run.sobolev_constant);
    let _ = writeln!(s, "solutions found: {}", t.found_count);
    for sol in t.solutions() {
        let _ = writeln!(
            s,
            "  {}: E = {:.9e}  residual = {:.3e}  sup = {:.6e}  W1,p norm = {:.6e}",
            sol.label, sol.report.total, sol.residual_sup, sol.sup_norm, sol.sobolev_norm
        );
    }
    if let Some(e) = &t.u1_error {
        let _ = writeln!(s, "  u1 failed: {e}");
    }
    if let Some(e) = &t.u2_error {
        let _ = writeln!(s, "  u2 failed: {e}");
    }
    let [d01, d02, d12] = t.distances;
    let _ = writeln!(s, "distances d01 = {}  d02 = {}  d12 = {}", opt(d01), opt(d02), opt(d12));
    let _ = writeln!(s, "gamma_hat = {:.6e}", t.gamma_hat);
    if let Some(lm) = &run.local_min {
        let _ = writeln!(s, "local minimum at 0: smallest ring positive = {}", lm.smallest_ring_positive);
        for r in &lm.rings {
            let _ = writeln!(s, "  rho = {:.1e}: min E = {:.6e}", r.radius, r.min_energy);
        }
    }
    if let Some(e) = &run.local_min_error {
        let _ = writeln!(s, "local minimum at 0 failed: {e}");
    }
    let _ = writeln!(s, "certification: {}", if run.all_certified { "all certified" } else { "NOT certified" });
    for c in &run.certification {
        certification_text(&mut s, &c.label, &c.report);
    }
    if !run.caccioppoli.is_empty() {
        let _ = writeln!(s, "Caccioppoli checks on u1:");
        for c in &run.caccioppoli {
            let _ = writeln!(
                s,
                "  l = {:.4} t = {:.4} s = {:.4}: lhs = {:.6e} rhs = {:.6e} {}",
                c.level,
                c.t,
                c.s,
                c.lhs,
                c.rhs,
                if c.pass { "ok" } else { "FAIL" }
            );
        }
    }
    if let Some(e) = &run.eps_sensitivity {
        let _ = writeln!(
            s,
            "regularization: E(eps = {:e}) = {:.9e}, E(eps = {:e}) = {:.9e}, difference = {:.3e}, L2 shift = {:.3e}",
            e.eps_reg,
            e.energy,
            e.eps_reg_alt,
            e.energy_alt,
            e.energy_alt - e.energy,
            e.l2_shift
        );
    }
    for n in &run.notes {
        let _ = writeln!(s, "note: {n}");
    }
    s
}

/// Writes fields, traces, sequences and both reports for one solve.
pub fn write_solve(dir: &Path, run: &SolveRun) -> Result<(), CliError> {
    ensure_dir(dir)?;
    for sol in run.solution.solutions() {
        save_field(&dir.join(format!("{}.csv", sol.label)), &sol.field)?;
    }
    // warm re-solves carry no multistart trace or string; use the μ = 0 stage
    let (sol, zero) = (&run.solution, &run.stage_zero);
    if let Some(g) = sol.global_min.as_ref().or(zero.global_min.as_ref()) {
        let rows: Vec<Vec<f64>> = g.trace.iter().enumerate().map(|(i, e)| vec![i as f64, *e]).collect();
        save_table(&dir.join("u1_trace.csv"), &["iteration", "energy"], &rows)?;
    }
    let path = [sol, zero].into_iter().filter_map(|t| t.mountain_pass.as_ref()).find(|m| !m.path_energies.is_empty());
    if let Some(mp) = path {
        let rows: Vec<Vec<f64>> = mp.path_energies.iter().enumerate().map(|(i, e)| vec![i as f64, *e]).collect();
        save_table(&dir.join("u2_path.csv"), &["image", "energy"], &rows)?;
    }
    for c in &run.certification {
        for r in &c.report.primary {
            let tag = if r.sign > 0 { "pos" } else { "neg" };
            let rows: Vec<Vec<f64>> = r
                .a_sequence
                .iter()
                .zip(&r.oracle.sequence)
                .enumerate()
                .map(|(i, (a, o))| vec![i as f64, *a, *o])
                .collect();
            save_table(&dir.join(format!("{}_a_{tag}.csv", c.label)), &["i", "a", "oracle"], &rows)?;
        }
    }
    write_json(&dir.join("report.json"), run)?;
    write_text(&dir.join("report.txt"), &solve_text(run))
}

pub fn sweep_text(cells: &[SweepCell]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>12} {:>8} {:>8} {:>12} {:>5} {:>9} {:>12}", "lambda", "factor", "mu/delta", "mu", "found", "certified", "gamma_hat");
    for c in cells {
        let _ = writeln!(
            s,
            "{:>12.5e} {:>8.3} {:>8.3} {:>12} {:>5} {:>9} {:>12}",
            c.lambda,
            c.lambda_factor,
            c.mu_fraction,
            opt(c.mu),
            c.found_count.map_or("-".into(), |n| n.to_string()),
            c.all_certified,
            opt(c.gamma_hat)
        );
        if let Some(e) = &c.error {
            let _ = writeln!(s, "    error: {e}");
        }
    }
    s
}

pub fn write_sweep(dir: &Path, results: &[(SweepCell, Option<SolveRun>)]) -> Result<(), CliError> {
    ensure_dir(dir)?;
    let cells: Vec<SweepCell> = results.iter().map(|(c, _)| c.clone()).collect();
    for (i, (_, run)) in results.iter().enumerate() {
        if let Some(run) = run {
            write_solve(&dir.join(format!("cell-{i:03}")), run)?;
        }
    }
    let path = dir.join("sweep.csv");
    let err = |e: csv::Error| CliError::Format { path: path.clone(), detail: e.to_string() };
    let mut w = csv::Writer::from_path(&path).map_err(err)?;
    w.write_record([
        "cell", "lambda", "lambda_factor", "mu_fraction", "mu", "found_count", "u0_certified", "u1_certified",
        "u2_certified", "all_certified", "gamma_hat", "e0", "e1", "e2", "k_certified", "error",
    ])
    .map_err(err)?;
    let o = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v}"));
    let b = |x: Option<bool>| x.map_or(String::new(), |v| v.to_string());
    for (i, c) in cells.iter().enumerate() {
        w.write_record([
            i.to_string(),
            format!("{}", c.lambda),
            format!("{}", c.lambda_factor),
            format!("{}", c.mu_fraction),
            o(c.mu),
            c.found_count.map_or(String::new(), |n| n.to_string()),
            b(c.certified[0]),
            b(c.certified[1]),
            b(c.certified[2]),
            c.all_certified.to_string(),
            o(c.gamma_hat),
            o(c.energies[0]),
            o(c.energies[1]),
            o(c.energies[2]),
            o(c.k_certified),
            c.error.clone().unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    write_json(&dir.join("sweep.json"), &cells)?;
    write_text(&dir.join("sweep.txt"), &sweep_text(&cells))
}

pub fn recursion_text(out: &RecursionOutcome, threshold: f64, a0: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "a0 = {a0:.6e}, threshold = {threshold:.6e}, below threshold = {}", a0 <= threshold);
    let _ = writeln!(s, "converged = {}  diverged = {}  first below floor = {:?}", out.converged, out.diverged, out.first_below_floor);
    for (i, a) in out.sequence.iter().enumerate() {
        let _ = writeln!(s, "{i:>4} {a:.6e}");
    }
    s
}

pub fn certification_report_text(label: &str, c: &CertificationReport) -> String {
    let mut s = String::new();
    certification_text(&mut s, label, c);
    s
}
