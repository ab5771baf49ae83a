//! Three critical points of the truncated energy: the zero field, the global
//! minimizer `v_λ`, and a mountain-pass point between them.
//!
//! The mountain pass is located in two stages. An elastic string joining the
//! endpoints is relaxed with the endpoints held fixed, which gives a rough
//! location of the pass. That guess is refined by minimizing the ray maximum
//!
//! ```text
//! M(w) = E(u_a + t₁(ŵ) ŵ),   ŵ = w/‖w‖,
//! ```
//!
//! where `t₁` is the first local maximum of `t ↦ E(u_a + tŵ)`. Critical points
//! of `M` are critical points of `E`, and `∇M = (t₁/‖w‖)(I − ŵŵᵀ)∇E`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::{Cell, RefCell};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{Energy, EnergyReport, DEFAULT_EPS_REG};
use crate::fmath;
use crate::grid::{Grid, ScalarField};
use crate::optim::{minimize, sup_norm, LbfgsParams, Objective};
use crate::varspace::{sobolev_norm, DEFAULT_NORM_TOL};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    /// residual sup norm at which descent stops
    pub tolerance: f64,
    pub max_iter: usize,
    pub contraction: f64,
    pub sufficient_decrease: f64,
    pub lbfgs_memory: usize,
    pub multistart: usize,
    pub path_nodes: usize,
    pub string_iterations: usize,
    /// distinctness threshold, multiplied by `|Ω|^{1/2}`
    pub distinct_threshold: f64,
    pub eps_reg: f64,
    /// second regularization used for the sensitivity report
    pub eps_reg_alt: f64,
    pub seed: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            tolerance: 1e-8,
            max_iter: 20_000,
            contraction: 0.5,
            sufficient_decrease: 1e-4,
            lbfgs_memory: 10,
            multistart: 16,
            path_nodes: 21,
            string_iterations: 200,
            distinct_threshold: 1e-3,
            eps_reg: DEFAULT_EPS_REG,
            eps_reg_alt: 1e-6,
            seed: 20240917,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("tolerance", self.tolerance),
            ("distinct_threshold", self.distinct_threshold),
            ("sufficient_decrease", self.sufficient_decrease),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.contraction > 0.0 && self.contraction < 1.0) {
            return Err(Error::InvalidParameter(format!("contraction = {} must lie in (0, 1)", self.contraction)));
        }
        if self.multistart < 1 || self.max_iter < 1 || self.lbfgs_memory < 1 {
            return Err(Error::InvalidParameter("multistart, max_iter and lbfgs_memory must be at least 1".into()));
        }
        if self.path_nodes < 3 {
            return Err(Error::InvalidParameter("path_nodes must be at least 3".into()));
        }
        if !(self.eps_reg >= 0.0 && self.eps_reg_alt >= 0.0) {
            return Err(Error::InvalidParameter("regularizations must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn lbfgs(&self) -> LbfgsParams {
        LbfgsParams {
            tolerance: self.tolerance,
            max_iter: self.max_iter,
            memory: self.lbfgs_memory,
            sufficient_decrease: self.sufficient_decrease,
            contraction: self.contraction,
            ..LbfgsParams::default()
        }
    }

    /// Absolute L² distinctness threshold on `grid`.
    pub fn distinct_l2(&self, grid: &Grid) -> f64 {
        self.distinct_threshold * fmath::sqrt(grid.domain_volume())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentOutcome {
    pub field: ScalarField,
    pub report: EnergyReport,
    pub iterations: usize,
    /// energy after each accepted step
    pub trace: Vec<f64>,
}

/// L-BFGS descent on the discrete energy from `u_init`.
pub fn minimize_energy(energy: &Energy<'_>, u_init: &ScalarField, params: &SolverParams) -> Result<DescentOutcome> {
    params.validate()?;
    energy.grid().check_len(u_init.values().len())?;
    if !u_init.satisfies_dirichlet() {
        return Err(Error::InvalidParameter("initial field violates the Dirichlet boundary mask".into()));
    }
    let out = minimize(energy, u_init.values(), &params.lbfgs());
    if !out.converged {
        return Err(Error::DescentStagnation { iterations: out.iterations, residual: out.stationarity });
    }
    let field = ScalarField::new(*energy.grid(), out.x)?;
    let report = energy.report(field.values());
    Ok(DescentOutcome { field, report, iterations: out.iterations, trace: out.trace })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub index: usize,
    pub initial_energy: f64,
    pub final_energy: Option<f64>,
    pub residual_sup: Option<f64>,
    pub iterations: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalMinReport {
    pub field: ScalarField,
    pub report: EnergyReport,
    pub best_start: usize,
    pub starts: Vec<StartRecord>,
    pub trace: Vec<f64>,
}

/// Initial fields for the multistart: the witness first, then random bumps
/// scaled relative to the witness amplitude.
pub fn multistart_initials(grid: &Grid, witness: &ScalarField, count: usize, seed: u64) -> Vec<ScalarField> {
    let mut out = vec![witness.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = witness.sup_norm().max(1.0);
    let d = grid.dim();
    let min_len = (0..d).map(|k| grid.upper()[k] - grid.lower()[k]).fold(f64::INFINITY, f64::min);
    while out.len() < count {
        let mut c = [0.0; 3];
        for (k, ck) in c.iter_mut().enumerate().take(d) {
            let (a, b) = (grid.lower()[k], grid.upper()[k]);
            *ck = a + (b - a) * rng.gen_range(0.25..0.75);
        }
        let w = min_len * rng.gen_range(0.2..0.5);
        let amp = scale * fmath::exp(rng.gen_range(-1.5f64..1.5));
        out.push(ScalarField::from_fn_dirichlet(*grid, |x| {
            let r2: f64 = (0..d).map(|k| (x[k] - c[k]) * (x[k] - c[k])).sum::<f64>() / (w * w);
            if r2 < 1.0 {
                amp * (1.0 - r2) * (1.0 - r2)
            } else {
                0.0
            }
        }));
    }
    out.truncate(count.max(1));
    out
}

/// Multistart descent; returns the lowest converged energy. Earlier starts
/// win ties within a relative margin of `1e-10`.
///
/// When `lambda_lower` is given and `λ` exceeds it, a best energy that is not
/// negative is reported as a landscape inconsistency.
pub fn find_global_minimizer(
    energy: &Energy<'_>,
    initials: &[ScalarField],
    lambda_lower: Option<f64>,
    params: &SolverParams,
) -> Result<GlobalMinReport> {
    if initials.is_empty() {
        return Err(Error::InvalidParameter("multistart needs at least one initial field".into()));
    }
    let mut best: Option<(usize, DescentOutcome)> = None;
    let mut starts = Vec::new();
    let mut last_err = None;
    for (i, u0) in initials.iter().enumerate() {
        let e0 = energy.total(u0.values());
        match minimize_energy(energy, u0, params) {
            Ok(out) => {
                starts.push(StartRecord {
                    index: i,
                    initial_energy: e0,
                    final_energy: Some(out.report.total),
                    residual_sup: Some(out.report.residual_sup),
                    iterations: out.iterations,
                    error: None,
                });
                let better = match &best {
                    None => true,
                    Some((_, b)) => out.report.total < b.report.total - 1e-10 * b.report.total.abs(),
                };
                if better {
                    best = Some((i, out));
                }
            }
            Err(e) => {
                starts.push(StartRecord {
                    index: i,
                    initial_energy: e0,
                    final_energy: None,
                    residual_sup: None,
                    iterations: 0,
                    error: Some(format!("{e}")),
                });
                last_err = Some(e);
            }
        }
    }
    let Some((best_start, out)) = best else {
        return Err(last_err.unwrap_or(Error::LandscapeInconsistency));
    };
    if let Some(lo) = lambda_lower {
        if energy.lambda > lo && !(out.report.total < 0.0) {
            return Err(Error::LandscapeInconsistency);
        }
    }
    Ok(GlobalMinReport { field: out.field, report: out.report, best_start, starts, trace: out.trace })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingRecord {
    pub radius: f64,
    pub min_energy: f64,
    /// largest sampled `J/Φ`
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMinReport {
    pub rings: Vec<RingRecord>,
    pub samples: usize,
    pub smallest_ring_positive: bool,
    pub ratio_decreasing: bool,
}

/// Random smooth zero-boundary direction: a sine series with decaying
/// coefficients.
pub fn random_smooth_direction(grid: &Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    let d = grid.dim();
    let modes = 4usize;
    let count = modes.pow(d as u32);
    let coeffs: Vec<f64> = (0..count).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ScalarField::from_fn_dirichlet(*grid, |x| {
        let mut s = 0.0;
        for (idx, a) in coeffs.iter().enumerate() {
            let mut rem = idx;
            let mut term = *a;
            for k in 0..d {
                let m = (rem % modes + 1) as f64;
                rem /= modes;
                let (lo, hi) = (grid.lower()[k], grid.upper()[k]);
                term *= fmath::sin(m * core::f64::consts::PI * (x[k] - lo) / (hi - lo)) / m;
            }
            s += term;
        }
        s
    })
}

/// Samples the energy on Sobolev-norm rings around zero.
///
/// Fails if any sampled energy on the smallest ring is not positive.
pub fn verify_local_min_at_zero(
    energy: &Energy<'_>,
    ring_radii: &[f64],
    sample_count: usize,
    seed: u64,
) -> Result<LocalMinReport> {
    if ring_radii.is_empty() || sample_count == 0 || ring_radii.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("ring radii must be a non-empty decreasing sequence".into()));
    }
    let grid = *energy.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<ScalarField> = (0..sample_count)
        .map(|_| {
            let v = random_smooth_direction(&grid, &mut rng);
            let n = sobolev_norm(&v, energy.exps.p(), DEFAULT_NORM_TOL)?;
            Ok(v.scaled(1.0 / n))
        })
        .collect::<Result<_>>()?;
    let mut rings = Vec::new();
    for &r in ring_radii {
        let mut min_e = f64::INFINITY;
        let mut max_ratio = f64::NEG_INFINITY;
        let mut sum_ratio = 0.0;
        for d in &dirs {
            let u = d.scaled(r);
            let (phi, j, psi) = energy.parts(u.values());
            let e = phi - energy.lambda * j - energy.mu * psi;
            min_e = min_e.min(e);
            let ratio = j / phi;
            max_ratio = max_ratio.max(ratio);
            sum_ratio += ratio;
        }
        rings.push(RingRecord { radius: r, min_energy: min_e, max_ratio, mean_ratio: sum_ratio / dirs.len() as f64 });
    }
    let last = rings.last().unwrap();
    let smallest_ring_positive = last.min_energy > 0.0;
    let ratio_decreasing = rings.windows(2).all(|w| w[1].max_ratio < w[0].max_ratio);
    if !smallest_ring_positive {
        return Err(Error::LocalMinVerification { radius: last.radius, energy: last.min_energy });
    }
    Ok(LocalMinReport { rings, samples: sample_count, smallest_ring_positive, ratio_decreasing })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MountainPassReport {
    pub point: Vec<f64>,
    pub energy: f64,
    pub residual_sup: f64,
    /// energies of the relaxed string
    pub path_energies: Vec<f64>,
    pub path_max_index: usize,
    pub path_max_energy: f64,
    pub minimax_iterations: usize,
    pub distance_to_a: f64,
    pub distance_to_b: f64,
}

fn weighted_dist(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    fmath::sqrt(a.iter().zip(b).zip(w).map(|((x, y), wi)| wi * (x - y) * (x - y)).sum())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Relaxes a string of `nodes` images between `a` and `b` by per-image
/// gradient steps with Armijo backtracking, each sweep followed by
/// reparametrization to equal arc length in the `weights` metric. A step never
/// moves an image by more than a quarter of the current segment length.
pub fn relax_string(
    obj: &dyn Objective,
    a: &[f64],
    b: &[f64],
    weights: &[f64],
    nodes: usize,
    iterations: usize,
) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut path: Vec<Vec<f64>> = (0..nodes)
        .map(|k| {
            let s = k as f64 / (nodes - 1) as f64;
            a.iter().zip(b).map(|(x, y)| (1.0 - s) * x + s * y).collect()
        })
        .collect();
    let mut steps = vec![1.0f64; nodes];
    let mut g = vec![0.0; n];
    let mut trial = vec![0.0; n];
    for _ in 0..iterations {
        let seg = (1..nodes).map(|k| weighted_dist(&path[k], &path[k - 1], weights)).sum::<f64>() / (nodes - 1) as f64;
        for k in 1..nodes - 1 {
            let f0 = obj.value_and_gradient(&path[k], &mut g);
            let gg = dot(&g, &g);
            if gg == 0.0 {
                continue;
            }
            let gw = fmath::sqrt(g.iter().zip(weights).map(|(gi, w)| w * gi * gi).sum());
            let mut h = steps[k].min(0.25 * seg / gw);
            let mut ok = false;
            for _ in 0..50 {
                trial.iter_mut().zip(path[k].iter().zip(&g)).for_each(|(t, (x, gi))| *t = x - h * gi);
                let ft = obj.value(&trial);
                if ft <= f0 - 1e-4 * h * gg {
                    ok = true;
                    break;
                }
                h *= 0.5;
            }
            if ok {
                path[k].copy_from_slice(&trial);
            }
            steps[k] = 2.0 * h;
        }
        reparametrize(&mut path, weights);
    }
    path
}

fn reparametrize(path: &mut [Vec<f64>], w: &[f64]) {
    let m = path.len();
    let mut arc = vec![0.0; m];
    for k in 1..m {
        arc[k] = arc[k - 1] + weighted_dist(&path[k], &path[k - 1], w);
    }
    let total = arc[m - 1];
    if !(total > 0.0) {
        return;
    }
    let old: Vec<Vec<f64>> = path.to_vec();
    let mut seg = 0;
    for (k, slot) in path.iter_mut().enumerate().take(m - 1).skip(1) {
        let target = total * k as f64 / (m - 1) as f64;
        while seg + 1 < m - 1 && arc[seg + 1] < target {
            seg += 1;
        }
        let len = arc[seg + 1] - arc[seg];
        let s = if len > 0.0 { (target - arc[seg]) / len } else { 0.0 };
        for (i, v) in slot.iter_mut().enumerate() {
            *v = (1.0 - s) * old[seg][i] + s * old[seg + 1][i];
        }
    }
}

/// The ray-maximum objective `M(w)` about `base`.
struct RayMax<'a> {
    obj: &'a dyn Objective,
    base: &'a [f64],
    t_warm: Cell<f64>,
    t_max: f64,
    tolerance: f64,
    /// full gradient of `E` at the last evaluated ray maximum
    last_grad: RefCell<Vec<f64>>,
    failed: Cell<bool>,
}

impl RayMax<'_> {
    fn point(&self, dir: &[f64], t: f64, out: &mut [f64]) {
        out.iter_mut().zip(self.base.iter().zip(dir)).for_each(|(o, (b, d))| *o = b + t * d);
    }

    /// `h'(t) = ⟨∇E(base + t dir), dir⟩` with the value, writing `∇E` into `g`.
    fn slope(&self, dir: &[f64], t: f64, x: &mut [f64], g: &mut [f64]) -> (f64, f64) {
        self.point(dir, t, x);
        let v = self.obj.value_and_gradient(x, g);
        (dot(g, dir), v)
    }

    /// First local maximum of `t ↦ E(base + t dir)` for a unit `dir`.
    fn ray_max(&self, dir: &[f64], x: &mut [f64], g: &mut [f64]) -> Option<(f64, f64)> {
        // bracket [lo, hi] with h'(lo) > 0 > h'(hi)
        let warm = self.t_warm.get();
        let (mut lo, mut hi);
        let (mut slo, mut shi);
        let mut bracket = None;
        if warm > 0.0 {
            let (s1, _) = self.slope(dir, 0.9 * warm, x, g);
            let (s2, _) = self.slope(dir, 1.1 * warm, x, g);
            if s1 > 0.0 && s2 < 0.0 {
                bracket = Some((0.9 * warm, s1, 1.1 * warm, s2));
            }
        }
        if bracket.is_none() {
            let mut t = 1e-9 * self.t_max;
            let mut prev: Option<(f64, f64)> = None;
            while t <= self.t_max {
                let (s, _) = self.slope(dir, t, x, g);
                if let Some((tp, sp)) = prev {
                    if sp > 0.0 && s < 0.0 {
                        bracket = Some((tp, sp, t, s));
                        break;
                    }
                }
                prev = Some((t, s));
                t *= 1.15;
            }
        }
        let (a, sa, b, sb) = bracket?;
        lo = a;
        slo = sa;
        hi = b;
        shi = sb;
        // Illinois regula falsi on h'
        let mut side = 0i8;
        let mut t = 0.5 * (lo + hi);
        let mut val = 0.0;
        for _ in 0..200 {
            t = (lo * shi - hi * slo) / (shi - slo);
            if !(t > lo && t < hi) {
                t = 0.5 * (lo + hi);
            }
            let (s, v) = self.slope(dir, t, x, g);
            val = v;
            if s.abs() <= 0.01 * self.tolerance || hi - lo <= 1e-15 * hi {
                break;
            }
            if s > 0.0 {
                lo = t;
                slo = s;
                if side == 1 {
                    shi *= 0.5;
                }
                side = 1;
            } else {
                hi = t;
                shi = s;
                if side == -1 {
                    slo *= 0.5;
                }
                side = -1;
            }
        }
        Some((t, val))
    }
}

fn normalized(w: &[f64]) -> (Vec<f64>, f64) {
    let n = fmath::sqrt(dot(w, w));
    (w.iter().map(|x| x / n).collect(), n)
}

impl Objective for RayMax<'_> {
    fn len(&self) -> usize {
        self.base.len()
    }

    fn value(&self, w: &[f64]) -> f64 {
        let mut g = vec![0.0; w.len()];
        self.value_and_gradient(w, &mut g)
    }

    fn value_and_gradient(&self, w: &[f64], gm: &mut [f64]) -> f64 {
        let (dir, norm) = normalized(w);
        let mut x = vec![0.0; w.len()];
        let mut g = vec![0.0; w.len()];
        let Some((t, v)) = (if norm > 0.0 { self.ray_max(&dir, &mut x, &mut g) } else { None }) else {
            self.failed.set(true);
            gm.iter_mut().for_each(|x| *x = 0.0);
            return f64::INFINITY;
        };
        let along = dot(&g, &dir);
        for i in 0..w.len() {
            gm[i] = t / norm * (g[i] - along * dir[i]);
        }
        self.t_warm.set(t);
        *self.last_grad.borrow_mut() = g;
        v
    }

    fn stationarity(&self, _w: &[f64], _g: &[f64]) -> f64 {
        sup_norm(&self.last_grad.borrow())
    }
}

/// Mountain-pass search between critical points `u_a` and `u_b` of `obj`.
pub fn mountain_pass(
    obj: &dyn Objective,
    u_a: &[f64],
    u_b: &[f64],
    weights: &[f64],
    distinct: f64,
    params: &SolverParams,
) -> Result<MountainPassReport> {
    let path = relax_string(obj, u_a, u_b, weights, params.path_nodes, params.string_iterations);
    let path_energies: Vec<f64> = path.iter().map(|p| obj.value(p)).collect();
    // the barrier can sit below the first image, so only interior images are
    // candidates and the ray scan decides whether a pass exists
    let last = path.len() - 1;
    let (imax, _) = path_energies[1..last]
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |acc, (i, e)| if *e > *acc.1 { (i, e) } else { acc });
    let imax = imax + 1;
    let w0: Vec<f64> = path[imax].iter().zip(u_a).map(|(p, a)| p - a).collect();
    refine_from_direction(obj, u_a, u_b, &w0, weights, distinct, params, path_energies, imax)
}

/// Minimax refinement from the direction `w0` (used directly for warm starts).
#[allow(clippy::too_many_arguments)]
pub fn refine_from_direction(
    obj: &dyn Objective,
    u_a: &[f64],
    u_b: &[f64],
    w0: &[f64],
    weights: &[f64],
    distinct: f64,
    params: &SolverParams,
    path_energies: Vec<f64>,
    path_max_index: usize,
) -> Result<MountainPassReport> {
    let (_, n0) = normalized(w0);
    if !(n0 > 0.0) {
        return Err(Error::CollapseToEndpoint);
    }
    let span = fmath::sqrt(u_b.iter().zip(u_a).map(|(b, a)| (b - a) * (b - a)).sum());
    let ray = RayMax {
        obj,
        base: u_a,
        t_warm: Cell::new(n0),
        t_max: 1e3 * span.max(n0),
        tolerance: params.tolerance,
        last_grad: RefCell::new(vec![0.0; u_a.len()]),
        failed: Cell::new(false),
    };
    let mut g = vec![0.0; w0.len()];
    let m0 = ray.value_and_gradient(w0, &mut g);
    if !m0.is_finite() {
        return Err(Error::CollapseToEndpoint);
    }
    let out = minimize(&ray, w0, &params.lbfgs());
    // re-evaluate to pin t₁ at the final direction
    let mut g = vec![0.0; w0.len()];
    let value = ray.value_and_gradient(&out.x, &mut g);
    if !value.is_finite() {
        return Err(Error::CollapseToEndpoint);
    }
    let (dir, _) = normalized(&out.x);
    let t = ray.t_warm.get();
    let point: Vec<f64> = u_a.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
    let residual_sup = sup_norm(&ray.last_grad.borrow());
    let distance_to_a = weighted_dist(&point, u_a, weights);
    let distance_to_b = weighted_dist(&point, u_b, weights);
    if distance_to_a < distinct || distance_to_b < distinct {
        return Err(Error::CollapseToEndpoint);
    }
    if !(out.converged || residual_sup <= params.tolerance) {
        return Err(Error::SaddleSearchFailed(format!(
            "minimax stopped after {} iterations with residual {residual_sup:e}",
            out.iterations
        )));
    }
    let path_max_energy = path_energies.get(path_max_index).copied().unwrap_or(f64::NAN);
    Ok(MountainPassReport {
        point,
        energy: value,
        residual_sup,
        path_energies,
        path_max_index,
        path_max_energy,
        minimax_iterations: out.iterations,
        distance_to_a,
        distance_to_b,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub label: String,
    pub field: ScalarField,
    pub report: EnergyReport,
    pub residual_sup: f64,
    pub sup_norm: f64,
    pub sobolev_norm: f64,
}

impl SolutionRecord {
    pub fn new(label: &str, energy: &Energy<'_>, field: ScalarField) -> Result<Self> {
        let report = energy.report(field.values());
        let sob = sobolev_norm(&field, energy.exps.p(), DEFAULT_NORM_TOL)?;
        Ok(SolutionRecord {
            label: label.into(),
            residual_sup: report.residual_sup,
            sup_norm: field.sup_norm(),
            sobolev_norm: sob,
            report,
            field,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsSensitivity {
    pub eps_reg: f64,
    pub eps_reg_alt: f64,
    pub energy: f64,
    pub energy_alt: f64,
    /// L² distance between the minimizers at the two regularizations
    pub l2_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionTriple {
    pub lambda: f64,
    pub mu: f64,
    pub k: f64,
    pub u0: SolutionRecord,
    pub u1: Option<SolutionRecord>,
    pub u2: Option<SolutionRecord>,
    pub u1_error: Option<String>,
    pub u2_error: Option<String>,
    /// L² distances `(d01, d02, d12)` among the reported solutions
    pub distances: [Option<f64>; 3],
    pub found_count: usize,
    /// largest Sobolev norm among the reported solutions
    pub gamma_hat: f64,
    pub global_min: Option<GlobalMinReport>,
    pub mountain_pass: Option<MountainPassReport>,
    pub eps_sensitivity: Option<EpsSensitivity>,
    pub distinct_threshold: f64,
}

impl SolutionTriple {
    pub fn solutions(&self) -> impl Iterator<Item = &SolutionRecord> {
        core::iter::once(&self.u0).chain(self.u1.as_ref()).chain(self.u2.as_ref())
    }
}

/// Initial data for a solve: multistart fields, or converged points to
/// continue from.
pub enum Starts<'a> {
    Fresh { initials: &'a [ScalarField], lambda_lower: Option<f64> },
    Warm { u1: &'a ScalarField, u2: Option<&'a ScalarField> },
}

/// Zero solution, global minimizer and mountain pass for one `(λ, μ, K)`.
pub fn solve_truncated_problem(energy: &Energy<'_>, starts: Starts<'_>, params: &SolverParams) -> Result<SolutionTriple> {
    params.validate()?;
    let grid = *energy.grid();
    let weights = grid.weights();
    let distinct = params.distinct_l2(&grid);
    let u0 = SolutionRecord::new("u0", energy, ScalarField::zeros(grid))?;

    let (u1_res, warm_u2) = match starts {
        Starts::Fresh { initials, lambda_lower } => {
            (find_global_minimizer(energy, initials, lambda_lower, params).map(|g| (g.field.clone(), Some(g))), None)
        }
        Starts::Warm { u1, u2 } => (minimize_energy(energy, u1, params).map(|o| (o.field, None)), u2),
    };

    let mut triple = SolutionTriple {
        lambda: energy.lambda,
        mu: energy.mu,
        k: energy.tn.k(),
        u0,
        u1: None,
        u2: None,
        u1_error: None,
        u2_error: None,
        distances: [None; 3],
        found_count: 1,
        gamma_hat: 0.0,
        global_min: None,
        mountain_pass: None,
        eps_sensitivity: None,
        distinct_threshold: distinct,
    };

    let (v, gm) = match u1_res {
        Ok(x) => x,
        Err(e) => {
            triple.u1_error = Some(format!("{e}"));
            return Ok(triple);
        }
    };
    let rec1 = SolutionRecord::new("u1", energy, v)?;
    let d01 = rec1.field.l2_distance(&triple.u0.field);
    triple.global_min = gm;
    if rec1.residual_sup > params.tolerance || d01 < distinct {
        triple.u1_error = Some(format!(
            "minimizer not distinct from zero or not converged (distance {d01:e}, residual {:e})",
            rec1.residual_sup
        ));
        triple.gamma_hat = triple.u0.sobolev_norm;
        return Ok(triple);
    }
    triple.distances[0] = Some(d01);
    triple.found_count = 2;

    let zeros = vec![0.0; grid.len()];
    let mp = match warm_u2 {
        Some(u2) => refine_from_direction(energy, &zeros, rec1.field.values(), u2.values(), &weights, distinct, params, Vec::new(), 0),
        None => mountain_pass(energy, &zeros, rec1.field.values(), &weights, distinct, params),
    };
    match mp {
        Ok(mp) => {
            let f2 = ScalarField::new(grid, mp.point.clone())?;
            let rec2 = SolutionRecord::new("u2", energy, f2)?;
            let d02 = rec2.field.l2_distance(&triple.u0.field);
            let d12 = rec2.field.l2_distance(&rec1.field);
            if rec2.residual_sup <= params.tolerance && d02 >= distinct && d12 >= distinct {
                triple.distances[1] = Some(d02);
                triple.distances[2] = Some(d12);
                triple.found_count = 3;
                triple.u2 = Some(rec2);
            } else {
                triple.u2_error = Some(format!(
                    "saddle point rejected (residual {:e}, distances {d02:e}, {d12:e})",
                    rec2.residual_sup
                ));
            }
            triple.mountain_pass = Some(mp);
        }
        Err(e) => triple.u2_error = Some(format!("{e}")),
    }
    triple.u1 = Some(rec1);
    triple.gamma_hat = triple.solutions().map(|s| s.sobolev_norm).fold(0.0, f64::max);
    Ok(triple)
}

/// Re-minimizes `u1` at `params.eps_reg_alt` and reports the shift.
pub fn eps_sensitivity(energy: &Energy<'_>, u1: &ScalarField, params: &SolverParams) -> Result<EpsSensitivity> {
    let alt = Energy::new(energy.grid(), energy.exps, energy.model, energy.tn, energy.lambda, energy.mu, params.eps_reg_alt)?;
    let out = minimize_energy(&alt, u1, params)?;
    Ok(EpsSensitivity {
        eps_reg: energy.eps_reg,
        eps_reg_alt: params.eps_reg_alt,
        energy: energy.total(u1.values()),
        energy_alt: out.report.total,
        l2_shift: out.field.l2_distance(u1),
    })
}
