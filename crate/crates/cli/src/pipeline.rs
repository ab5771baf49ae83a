//! validate → solve at μ = 0 → select K and δ → solve at μ → certify.

use pxlap_core::degiorgi::{
    caccioppoli_check, certify, compute_constants, estimate_sobolev_constant, select_k_and_delta, CaccioppoliReport,
    CertificationReport, ConstantInputs, KSelection, SobolevEstimate,
};
use pxlap_core::energy::{combined_growth_constant, default_growth_samples, default_theta_family, estimate_theta, Energy, ThetaEstimate};
use pxlap_core::multisolve::{
    eps_sensitivity, multistart_initials, solve_truncated_problem, verify_local_min_at_zero, EpsSensitivity, LocalMinReport,
    SolutionTriple, SolverParams, Starts,
};
use pxlap_core::nonlinearity::{
    check_hypotheses, ExpressionModel, HypothesisReport, LinearModel, NonlinearityModel, RationalCubic, TruncatedNonlinearity,
    ZeroModel, DEFAULT_S_LARGE, DEFAULT_S_SMALL, DEFAULT_TOL_RATIO,
};
use pxlap_core::{Error as CoreError, ExponentField, Grid, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{NonlinearityKind, RunConfig};
use crate::error::CliError;

pub fn build_model(cfg: &RunConfig, grid: &Grid) -> Result<Box<dyn NonlinearityModel>, CliError> {
    let n = &cfg.nonlinearity;
    Ok(match n.kind {
        NonlinearityKind::RationalCubic => Box::new(RationalCubic::new(n.amplitude, n.c)?),
        NonlinearityKind::Linear => Box::new(LinearModel { amplitude: n.amplitude }),
        NonlinearityKind::Zero => Box::new(ZeroModel),
        NonlinearityKind::Expression => Box::new(ExpressionModel::new(&n.expression, grid)?),
    })
}

pub fn build_exponents(cfg: &RunConfig, grid: &Grid) -> Result<ExponentField, CliError> {
    let p = cfg.exponents.p.spec().sample(grid)?;
    let q = cfg.exponents.q.spec().sample(grid)?;
    Ok(ExponentField::with_margin(&p, &q, grid.dim(), cfg.exponents.margin)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub grid_nodes: Vec<usize>,
    pub p_minus: Option<f64>,
    pub p_plus: Option<f64>,
    pub q_minus: Option<f64>,
    pub pstar_minus: Option<f64>,
    pub supercritical_gap: Option<f64>,
    pub hypotheses: Option<HypothesisReport>,
    pub theta: Option<f64>,
    pub lambda_lower: Option<f64>,
    pub growth_constant: Option<f64>,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// A validated problem: grid, exponents, nonlinearity and the derived
/// constants shared by every `(λ, μ)`.
pub struct Problem {
    pub config: RunConfig,
    pub grid: Grid,
    pub exps: ExponentField,
    pub model: Box<dyn NonlinearityModel>,
    pub hypotheses: HypothesisReport,
    pub theta: ThetaEstimate,
    pub growth_c: f64,
    pub sobolev: SobolevEstimate,
    pub k_grid: Vec<f64>,
}

fn check(checks: &mut Vec<Check>, name: &str, passed: bool, detail: String) {
    checks.push(Check { name: name.into(), passed, detail });
}

/// Runs every hypothesis check, recording each outcome. The error is the
/// first failed check.
pub fn validate(cfg: &RunConfig) -> (ValidationReport, Result<Problem, CliError>) {
    let mut rep = ValidationReport {
        grid_nodes: cfg.grid.nodes.clone(),
        p_minus: None,
        p_plus: None,
        q_minus: None,
        pstar_minus: None,
        supercritical_gap: None,
        hypotheses: None,
        theta: None,
        lambda_lower: None,
        growth_constant: None,
        checks: Vec::new(),
    };
    let res = validate_into(cfg, &mut rep);
    (rep, res)
}

fn validate_into(cfg: &RunConfig, rep: &mut ValidationReport) -> Result<Problem, CliError> {
    let checks = &mut rep.checks;
    let grid = cfg.grid().inspect_err(|e| check(checks, "grid", false, e.to_string()))?;
    check(checks, "grid", true, format!("{} nodes", grid.len()));
    let exps = match build_exponents(cfg, &grid) {
        Ok(e) => e,
        Err(e) => {
            let name = match &e {
                CliError::Core(CoreError::SupercriticalityGap { .. }) => "supercriticality q > p*",
                CliError::Core(CoreError::ExponentRange { .. }) => "exponent range 1 < p- <= p+ < N",
                _ => "exponent data",
            };
            check(checks, name, false, e.to_string());
            return Err(e);
        }
    };
    rep.p_minus = Some(exps.p_minus());
    rep.p_plus = Some(exps.p_plus());
    rep.q_minus = Some(exps.q_minus());
    rep.pstar_minus = Some(exps.pstar_minus());
    rep.supercritical_gap = Some(exps.supercritical_gap());
    check(checks, "exponent range 1 < p- <= p+ < N", true, format!("p in [{}, {}]", exps.p_minus(), exps.p_plus()));
    check(checks, "supercriticality q > p*", true, format!("inf(q - p*) = {}", exps.supercritical_gap()));
    let model = build_model(cfg, &grid).inspect_err(|e| check(checks, "nonlinearity", false, e.to_string()))?;
    let hyp = check_hypotheses(&*model, &exps, DEFAULT_S_SMALL, DEFAULT_S_LARGE, DEFAULT_TOL_RATIO);
    let items = [
        ("f vanishes at s = 0", hyp.vanishes_at_zero),
        ("f bounded", hyp.bounded),
        ("f/|s|^(p-1) -> 0 as s -> 0", hyp.decays_at_zero),
        ("f/|s|^(p-1) -> 0 as |s| -> inf", hyp.decays_at_infinity),
    ];
    let mut first_failed = None;
    for (name, ok) in items {
        let detail = format!(
            "sup|f| = {:e}, ratio near 0 = {:e}, ratio at infinity = {:e}",
            hyp.sup_abs_f, hyp.ratio_small, hyp.ratio_large
        );
        check(checks, name, ok, detail);
        if !ok && first_failed.is_none() {
            first_failed = Some(name);
        }
    }
    rep.hypotheses = Some(hyp.clone());
    if let Some(name) = first_failed {
        return Err(CliError::Hypothesis(name.into()));
    }
    let growth_c = combined_growth_constant(&*model, &exps, &default_growth_samples())
        .inspect_err(|e| check(checks, "growth constant", false, e.to_string()))?;
    rep.growth_constant = Some(growth_c);
    let theta = estimate_theta(&*model, &exps, &default_theta_family(&grid), cfg.solver.eps_reg)
        .inspect_err(|e| check(checks, "positive primitive: theta > 0", false, e.to_string()))?;
    check(checks, "positive primitive: theta > 0", true, format!("theta = {}", theta.theta));
    rep.theta = Some(theta.theta);
    rep.lambda_lower = Some(theta.lambda_lower);
    if let Some(lam) = cfg.lambda.value {
        let ok = lam > theta.lambda_lower;
        check(checks, "lambda.value > 1/theta", ok, format!("lambda = {lam}, 1/theta = {}", theta.lambda_lower));
        if !ok {
            return Err(CliError::Lambda(format!("lambda = {lam} does not exceed 1/theta = {}", theta.lambda_lower)));
        }
    }
    if let Some([a, b]) = cfg.lambda.interval {
        let ok = a > theta.lambda_lower && b >= a;
        check(checks, "lambda.interval inside (1/theta, inf)", ok, format!("[{a}, {b}], 1/theta = {}", theta.lambda_lower));
        if !ok {
            return Err(CliError::Lambda(format!("[{a}, {b}] is not inside (1/theta, inf) = ({}, inf)", theta.lambda_lower)));
        }
    }
    let sobolev = estimate_sobolev_constant(&exps, &grid, cfg.certify.sobolev_samples.max(1))?;
    let k_grid = cfg.k_grid.grid();
    Ok(Problem { config: cfg.clone(), grid, exps, model, hypotheses: hyp, theta, growth_c, sobolev, k_grid })
}

/// How μ is chosen for a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MuChoice {
    Value(f64),
    /// multiple of `δ = min(δ₁, cap)`
    DeltaFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionCertification {
    pub label: String,
    pub certified: bool,
    pub report: CertificationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRun {
    pub lambda: f64,
    pub lambda_factor: f64,
    pub theta: f64,
    pub mu: f64,
    pub mu_choice: MuChoice,
    pub selection: Option<KSelection>,
    pub k_selected: f64,
    pub k_certified: Option<f64>,
    pub stage_zero: SolutionTriple,
    pub solution: SolutionTriple,
    pub local_min: Option<LocalMinReport>,
    pub local_min_error: Option<String>,
    pub certification: Vec<SolutionCertification>,
    pub all_certified: bool,
    pub caccioppoli: Vec<CaccioppoliReport>,
    pub eps_sensitivity: Option<EpsSensitivity>,
    pub growth_constant: f64,
    pub sobolev_constant: f64,
    pub notes: Vec<String>,
}

impl Problem {
    pub fn solver_params(&self) -> SolverParams {
        self.config.solver.params(self.config.seed)
    }

    pub fn inputs(&self, lambda: f64, mu: f64) -> ConstantInputs<'_> {
        ConstantInputs { exps: &self.exps, lambda, mu, growth_c: self.growth_c, sobolev_s: self.sobolev.s }
    }

    fn stage(&self, lambda: f64, mu: f64, k: f64, starts: Starts<'_>) -> Result<SolutionTriple, CliError> {
        let tn = TruncatedNonlinearity::new(k, &self.exps)?;
        let en = Energy::new(&self.grid, &self.exps, &*self.model, &tn, lambda, mu, self.config.solver.eps_reg)?;
        Ok(solve_truncated_problem(&en, starts, &self.solver_params())?)
    }

    /// The μ = 0 stage: multistart minimizer and mountain pass.
    pub fn solve_zero_mu(&self, lambda: f64) -> Result<SolutionTriple, CliError> {
        let params = self.solver_params();
        let initials = multistart_initials(&self.grid, &self.theta.witness, params.multistart, params.seed);
        let lower = Some(self.theta.lambda_lower);
        self.stage(lambda, 0.0, 2.0, Starts::Fresh { initials: &initials, lambda_lower: lower })
    }

    pub fn local_min(&self, lambda: f64) -> Result<LocalMinReport, CliError> {
        let tn = TruncatedNonlinearity::new(2.0, &self.exps)?;
        let en = Energy::new(&self.grid, &self.exps, &*self.model, &tn, lambda, 0.0, self.config.solver.eps_reg)?;
        let lm = &self.config.local_min;
        Ok(verify_local_min_at_zero(&en, &lm.radii, lm.samples, self.config.seed ^ 0x10ca1)?)
    }

    pub fn select_k(&self, triple: &SolutionTriple, lambda: f64) -> Result<KSelection, CliError> {
        let fields: Vec<&ScalarField> = triple.solutions().map(|s| &s.field).collect();
        Ok(select_k_and_delta(&fields, &self.inputs(lambda, 0.0), &self.config.certify.params(), &self.k_grid, self.config.mu.cap)?)
    }

    pub fn certify_triple(&self, triple: &SolutionTriple, lambda: f64, mu: f64, k: f64) -> Result<Vec<SolutionCertification>, CliError> {
        let inputs = self.inputs(lambda, mu);
        let params = self.config.certify.params();
        triple
            .solutions()
            .map(|s| {
                let report = certify(&s.field, &inputs, k, &params)?;
                Ok(SolutionCertification { label: s.label.clone(), certified: report.certified, report })
            })
            .collect()
    }

    /// Caccioppoli comparison at random `(l, t, s)` and interior centers.
    pub fn caccioppoli_suite(&self, u: &ScalarField, lambda: f64, mu: f64, k: f64, count: usize) -> Result<Vec<CaccioppoliReport>, CliError> {
        let consts = compute_constants(&self.exps, lambda, mu, k, self.config.certify.radius, self.growth_c, self.sobolev.s)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ 0xcacc);
        let g = &self.grid;
        let d = g.dim();
        let top = (0.9 * u.sup_norm()).max(1.0);
        let mut out = Vec::new();
        while out.len() < count {
            let c: Vec<f64> =
                (0..d).map(|k| g.lower()[k] + (g.upper()[k] - g.lower()[k]) * rng.gen_range(0.3..0.7)).collect();
            let smax = (0.999 * g.distance_to_boundary(&c)).min(1.0);
            let s = smax * rng.gen_range(0.4..1.0);
            let t = s * rng.gen_range(0.2..0.9);
            let l = rng.gen_range(1.0..=top);
            out.push(caccioppoli_check(u, &consts, l, t, s, &c, self.config.certify.tol_disc)?);
        }
        Ok(out)
    }

    /// Full solve at `λ` with μ from `choice`, including the post-hoc K loop.
    pub fn solve(&self, lambda: f64, choice: MuChoice) -> Result<SolveRun, CliError> {
        let stage_zero = self.solve_zero_mu(lambda)?;
        self.solve_from(lambda, choice, stage_zero, true)
    }

    /// Continues from a finished μ = 0 stage.
    pub fn solve_from(&self, lambda: f64, choice: MuChoice, stage_zero: SolutionTriple, diagnostics: bool) -> Result<SolveRun, CliError> {
        let mut notes = Vec::new();
        if lambda <= self.theta.lambda_lower {
            notes.push(format!("lambda = {lambda} does not exceed 1/theta = {}", self.theta.lambda_lower));
        }
        let (local_min, local_min_error) = if diagnostics {
            match self.local_min(lambda) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            }
        } else {
            (None, None)
        };
        let selection = self.select_k(&stage_zero, lambda)?;
        let delta = selection.delta;
        let mu = match choice {
            MuChoice::Value(m) => m,
            MuChoice::DeltaFraction(f) => f * delta,
        };
        if mu > delta {
            notes.push(format!("mu = {mu:e} exceeds delta = {delta:e}; certification is not guaranteed"));
        }
        let mut k = selection.k;
        let params = self.solver_params();
        let mut solution = if mu > 0.0 { self.warm_stage(lambda, mu, k, &stage_zero)? } else { stage_zero.clone() };
        if mu == 0.0 {
            solution.k = k;
        }
        let mut certification;
        let mut k_certified = None;
        let mut next = self.k_grid.iter().position(|&g| g > k);
        loop {
            certification = self.certify_triple(&solution, lambda, mu, k)?;
            if certification.iter().all(|c| c.certified) {
                k_certified = Some(k);
                break;
            }
            let Some(j) = next else {
                notes.push(format!("K grid exhausted at K = {k}"));
                break;
            };
            notes.push(format!("certification failed at K = {k}; advancing to K = {}", self.k_grid[j]));
            k = self.k_grid[j];
            next = if j + 1 < self.k_grid.len() { Some(j + 1) } else { None };
            if mu > 0.0 {
                solution = self.warm_stage(lambda, mu, k, &solution)?;
            } else {
                solution.k = k;
            }
        }
        let all_certified = k_certified.is_some();
        let kc = k_certified.unwrap_or(k);
        let caccioppoli = match (&solution.u1, diagnostics) {
            (Some(u1), true) => self.caccioppoli_suite(&u1.field, lambda, mu, kc, self.config.certify.caccioppoli_samples)?,
            _ => Vec::new(),
        };
        let eps_sens = match (&solution.u1, diagnostics) {
            (Some(u1), true) => {
                let tn = TruncatedNonlinearity::new(kc, &self.exps)?;
                let en = Energy::new(&self.grid, &self.exps, &*self.model, &tn, lambda, mu, params.eps_reg)?;
                match eps_sensitivity(&en, &u1.field, &params) {
                    Ok(s) => Some(s),
                    Err(e) => {
                        notes.push(format!("regularization sensitivity failed: {e}"));
                        None
                    }
                }
            }
            _ => None,
        };
        Ok(SolveRun {
            lambda,
            lambda_factor: lambda / self.theta.lambda_lower,
            theta: self.theta.theta,
            mu,
            mu_choice: choice,
            k_selected: selection.k,
            selection: Some(selection),
            k_certified,
            stage_zero,
            solution,
            local_min,
            local_min_error,
            certification,
            all_certified,
            caccioppoli,
            eps_sensitivity: eps_sens,
            growth_constant: self.growth_c,
            sobolev_constant: self.sobolev.s,
            notes,
        })
    }

    /// Re-solves from the points of `prev`; keeps `prev`'s points that fail
    /// to continue out of the result.
    fn warm_stage(&self, lambda: f64, mu: f64, k: f64, prev: &SolutionTriple) -> Result<SolutionTriple, CliError> {
        match &prev.u1 {
            Some(u1) => {
                let u2 = prev.u2.as_ref().map(|s| &s.field);
                self.stage(lambda, mu, k, Starts::Warm { u1: &u1.field, u2 })
            }
            None => {
                let params = self.solver_params();
                let initials = multistart_initials(&self.grid, &self.theta.witness, params.multistart, params.seed);
                self.stage(lambda, mu, k, Starts::Fresh { initials: &initials, lambda_lower: None })
            }
        }
    }

    /// λ for `solve`: the configured value or `factor/θ̂`.
    pub fn solve_lambda(&self) -> f64 {
        self.config.lambda.value.unwrap_or(self.config.lambda.factor * self.theta.lambda_lower)
    }

    pub fn solve_mu(&self) -> MuChoice {
        match self.config.mu.value {
            Some(m) => MuChoice::Value(m),
            None => MuChoice::DeltaFraction(self.config.mu.fraction),
        }
    }

    /// Sweep λ values: interval samples, or factors of 1/θ̂.
    pub fn sweep_lambdas(&self) -> Vec<f64> {
        let l = &self.config.lambda;
        match l.interval {
            Some([a, b]) if l.samples > 1 => (0..l.samples).map(|i| a + (b - a) * i as f64 / (l.samples - 1) as f64).collect(),
            Some([a, _]) => vec![a],
            None => l.sweep_factors.iter().map(|f| f * self.theta.lambda_lower).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub lambda: f64,
    pub lambda_factor: f64,
    pub mu_fraction: f64,
    pub mu: Option<f64>,
    pub found_count: Option<usize>,
    /// per solution `u0, u1, u2`; `None` when the solution was not found
    pub certified: [Option<bool>; 3],
    pub all_certified: bool,
    pub gamma_hat: Option<f64>,
    pub energies: [Option<f64>; 3],
    pub k_certified: Option<f64>,
    pub inconsistency: bool,
    pub error: Option<String>,
}

impl SweepCell {
    pub fn from_run(run: &SolveRun, fraction: f64) -> Self {
        let mut certified = [None; 3];
        let mut energies = [None; 3];
        for (i, s) in run.solution.solutions().enumerate() {
            let slot = match s.label.as_str() {
                "u0" => 0,
                "u1" => 1,
                _ => 2,
            };
            energies[slot] = Some(s.report.total);
            certified[slot] = run.certification.get(i).map(|c| c.certified);
        }
        SweepCell {
            lambda: run.lambda,
            lambda_factor: run.lambda_factor,
            mu_fraction: fraction,
            mu: Some(run.mu),
            found_count: Some(run.solution.found_count),
            certified,
            all_certified: run.all_certified,
            gamma_hat: Some(run.solution.gamma_hat),
            energies,
            k_certified: run.k_certified,
            inconsistency: false,
            error: None,
        }
    }

    pub fn failed(lambda: f64, lambda_factor: f64, fraction: f64, err: &CliError) -> Self {
        SweepCell {
            lambda,
            lambda_factor,
            mu_fraction: fraction,
            mu: None,
            found_count: None,
            certified: [None; 3],
            all_certified: false,
            gamma_hat: None,
            energies: [None; 3],
            k_certified: None,
            inconsistency: matches!(err, CliError::Core(CoreError::CertifierInconsistency { .. })),
            error: Some(err.to_string()),
        }
    }
}

/// One sweep row per `(λ, μ-fraction)`. Cells sharing a λ reuse its μ = 0
/// stage; failures are recorded and the sweep continues.
pub fn sweep(problem: &Problem) -> Vec<(SweepCell, Option<SolveRun>)> {
    use rayon::prelude::*;
    let lambdas = problem.sweep_lambdas();
    let fractions = problem.config.mu.sweep_fractions.clone();
    let work = || {
        lambdas
            .par_iter()
            .flat_map_iter(|&lambda| {
                let factor = lambda / problem.theta.lambda_lower;
                let zero = problem.solve_zero_mu(lambda);
                fractions
                    .iter()
                    .map(|&f| {
                        let run = zero
                            .as_ref()
                            .map_err(|e| CliError::Incomplete(e.to_string()))
                            .and_then(|z| problem.solve_from(lambda, MuChoice::DeltaFraction(f), z.clone(), false));
                        match run {
                            Ok(r) => (SweepCell::from_run(&r, f), Some(r)),
                            Err(e) => (SweepCell::failed(lambda, factor, f, &e), None),
                        }
                    })
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(problem.config.workers).build() {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    }
}
