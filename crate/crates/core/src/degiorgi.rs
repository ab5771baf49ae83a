//! Level-set certification of the bound `|u| ≤ K`.
//!
//! On a ball `B_R(x₀) ⊂⊂ Ω` the truncation energies
//!
//! ```text
//! a_i = ∫_{A_{K_i, ρ_i}} |u − K_i|^{p*₋},   ρ_i = R/2 + R/2^{i+1},   K_i = K(1 − 2^{−(i+1)})
//! ```
//!
//! satisfy `a_{i+1} ≤ c bⁱ a_i^{1+η}`. If `a₀ ≤ c^{−1/η} b^{−1/η²}` the sequence
//! tends to zero, hence `u ≤ K` on `B_{R/2}`. Constants are evaluated in log
//! space because `b` and `c` overflow quickly as `p₋` approaches `N`.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exponents::ExponentField;
use crate::fmath;
use crate::grid::{gradient_magnitude, integrate, level_set_measure, Grid, ScalarField};
use crate::multisolve::random_smooth_direction;
use crate::{Error, Result};

pub const DEFAULT_I_MAX: usize = 40;
pub const DECAY_FLOOR: f64 = 1e-14;
pub const DEFAULT_TOL_DISC: f64 = 0.05;
/// slack allowed between a certified bound and the nodal maximum
pub const DIRECT_SUP_TOL: f64 = 1e-12;

const LN2: f64 = core::f64::consts::LN_2;

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + fmath::ln(1.0 + fmath::exp(lo - hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeGiorgiConstants {
    pub dim_n: usize,
    pub p_minus: f64,
    pub p_plus: f64,
    pub q_plus: f64,
    pub pstar_minus: f64,
    pub lambda: f64,
    pub mu: f64,
    pub k: f64,
    pub radius: f64,
    pub eta: f64,
    pub b: f64,
    pub ln_b: f64,
    pub sobolev_s: f64,
    pub growth_c: f64,
    /// `ε` fixed by `(p₊ − 1) ε^{p₊/(p₊−1)} = 1/2`
    pub epsilon: f64,
    pub c_p_eps: f64,
    /// `C' = 2C_{p,ε} + Cλ2^{p₊} + 1`
    pub c_prime: f64,
    /// `C'' = 2^{p₊+1}`
    pub c_double_prime: f64,
    /// `C_{μ,K} = C' + C'' μ K^{q₊−p₊}`
    pub c_mu_k: f64,
    /// `ln(2^{3p*₋}/R^{p*₋} + 2^{2p*₋+1})`
    pub ln_x: f64,
    /// `ln(2^{p₋}/R^{p₋} + 2^{p₋+2p*₋}/R^{p₋})`
    pub ln_y: f64,
    pub c: f64,
    pub ln_c: f64,
    pub threshold: f64,
    pub ln_threshold: f64,
}

/// Everything the constants need besides `K` and `R`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantInputs<'a> {
    pub exps: &'a ExponentField,
    pub lambda: f64,
    pub mu: f64,
    pub growth_c: f64,
    pub sobolev_s: f64,
}

impl ConstantInputs<'_> {
    pub fn constants(&self, k: f64, radius: f64) -> Result<DeGiorgiConstants> {
        compute_constants(self.exps, self.lambda, self.mu, k, radius, self.growth_c, self.sobolev_s)
    }
}

pub fn compute_constants(
    exps: &ExponentField,
    lambda: f64,
    mu: f64,
    k: f64,
    radius: f64,
    growth_c: f64,
    sobolev_s: f64,
) -> Result<DeGiorgiConstants> {
    if !(radius > 0.0 && radius <= 1.0) {
        return Err(Error::RadiusOutOfRange(radius));
    }
    if !(k >= 2.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(alloc::format!("K = {k} must be at least 2")));
    }
    if !(sobolev_s > 0.0 && sobolev_s.is_finite()) {
        return Err(Error::InvalidParameter(alloc::format!("Sobolev constant {sobolev_s} must be positive")));
    }
    for (name, v) in [("lambda", lambda), ("mu", mu), ("growth constant", growth_c)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("{name} = {v} must be nonnegative")));
        }
    }
    let n = exps.dim_n() as f64;
    let (pm, pp, qp) = (exps.p_minus(), exps.p_plus(), exps.q_plus());
    let ps = exps.pstar_minus();
    let eta = pm / (n - pm);
    let ln_b = 2.0 * ps * ps / pm * LN2;
    let epsilon = fmath::powf(1.0 / (2.0 * (pp - 1.0)), (pp - 1.0) / pp);
    let c_p_eps = pp / pm * fmath::powf(2.0, pp) * fmath::powf(2.0 * pp - 2.0, (pp - 1.0) * pm / pp);
    let c_prime = 2.0 * c_p_eps + growth_c * lambda * fmath::powf(2.0, pp) + 1.0;
    let c_double_prime = fmath::powf(2.0, pp + 1.0);
    let c_mu_k = c_prime + c_double_prime * mu * fmath::powf(k, qp - pp);
    let ln_r = fmath::ln(radius);
    let ln_x = log_add(3.0 * ps * LN2 - ps * ln_r, (2.0 * ps + 1.0) * LN2);
    let ln_y = log_add(pm * LN2 - pm * ln_r, (pm + 2.0 * ps) * LN2 - pm * ln_r);
    let ln_bracket = log_add(fmath::ln(c_mu_k) + ln_x, ln_y);
    let ln_c = -ps / pm * fmath::ln(sobolev_s) + ps * LN2 + ps / pm * ln_bracket;
    let ln_threshold = -ln_c / eta - ln_b / (eta * eta);
    Ok(DeGiorgiConstants {
        dim_n: exps.dim_n(),
        p_minus: pm,
        p_plus: pp,
        q_plus: qp,
        pstar_minus: ps,
        lambda,
        mu,
        k,
        radius,
        eta,
        b: fmath::exp(ln_b),
        ln_b,
        sobolev_s,
        growth_c,
        epsilon,
        c_p_eps,
        c_prime,
        c_double_prime,
        c_mu_k,
        ln_x,
        ln_y,
        c: fmath::exp(ln_c),
        ln_c,
        threshold: fmath::exp(ln_threshold),
        ln_threshold,
    })
}

impl DeGiorgiConstants {
    pub fn threshold_met(&self, a0: f64) -> bool {
        a0 <= 0.0 || fmath::ln(a0) <= self.ln_threshold
    }

    /// `X⁻¹[S 2^{−p₋−2N} a₀^{−p₋/N} − Y] − C'`; positive iff `a₀` clears the
    /// threshold at `μ = 0`. Infinite for `a₀ = 0`.
    pub fn bracket(&self, a0: f64) -> f64 {
        if a0 <= 0.0 {
            return f64::INFINITY;
        }
        let n = self.dim_n as f64;
        let ln_top = fmath::ln(self.sobolev_s) - (self.p_minus + 2.0 * n) * LN2 - self.p_minus / n * fmath::ln(a0);
        let top = fmath::exp(ln_top - self.ln_x);
        let y = fmath::exp(self.ln_y - self.ln_x);
        top - y - self.c_prime
    }

    /// Largest admissible `μ` for this `K` and `a₀`.
    pub fn delta_one(&self, a0: f64) -> f64 {
        let br = self.bracket(a0);
        if br == f64::INFINITY {
            return br;
        }
        br / (fmath::powf(self.k, self.q_plus - self.p_plus) * self.c_double_prime)
    }
}

/// `a_0, …, a_{i_max}` for `u` on `B_R(center)`.
pub fn compute_sequence(
    u: &ScalarField,
    k: f64,
    radius: f64,
    center: &[f64],
    i_max: usize,
    pstar_minus: f64,
) -> Result<Vec<f64>> {
    if !(k >= 2.0) || i_max < 1 {
        return Err(Error::InvalidParameter(alloc::format!("need K ≥ 2 and i_max ≥ 1, got K = {k}, i_max = {i_max}")));
    }
    let grid = u.grid();
    if !grid.ball_strictly_inside(center, radius) {
        return Err(Error::BallContainment { radius });
    }
    let vol = grid.cell_volume();
    let ball = grid.nodes_in_ball(center, radius);
    let ball_max = ball.iter().map(|&i| u.values()[i]).fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::with_capacity(i_max + 1);
    for i in 0..=i_max {
        let scale = fmath::powf(2.0, -((i + 1) as f64));
        let ki = k * (1.0 - scale);
        if ki >= ball_max {
            out.push(0.0);
            continue;
        }
        let rho = radius / 2.0 + radius * scale;
        let set = level_set_measure(u, ki, rho, center, true)?;
        let a: f64 = set.nodes.iter().map(|&n| fmath::powf(u.values()[n] - ki, pstar_minus)).sum();
        out.push(a * vol);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionOutcome {
    pub sequence: Vec<f64>,
    /// `a_n < 10⁻¹⁴`
    pub converged: bool,
    pub diverged: bool,
    pub first_below_floor: Option<usize>,
}

/// Iterates the equality `a_{i+1} = c bⁱ a_i^{1+η}` for `i < n` in log space.
///
/// Writing `a_i = θ b^{−i/η} r_i` with `θ = c^{−1/η} b^{−1/η²}` turns the
/// recursion into `r_{i+1} = r_i^{1+η}`, which is what is iterated. At
/// `a₀ = θ` the direct iteration amplifies rounding by `1 + η` per step, so
/// `|ln r₀| < 1e-12` is treated as exactly on the threshold.
pub fn recursion_oracle_log(ln_c: f64, ln_b: f64, eta: f64, ln_a0: f64, n: usize) -> Result<RecursionOutcome> {
    if !(ln_b > 0.0 && eta > 0.0 && ln_c.is_finite() && ln_b.is_finite() && !ln_a0.is_nan()) {
        return Err(Error::InvalidParameter("recursion needs c > 0, b > 1, η > 0 and a₀ ≥ 0".into()));
    }
    let ln_floor = fmath::ln(DECAY_FLOOR);
    let ln_max = fmath::ln(f64::MAX);
    let ln_theta = -ln_c / eta - ln_b / (eta * eta);
    let mut ln_r = ln_a0 - ln_theta;
    if ln_r.abs() < 1e-12 {
        ln_r = 0.0;
    }
    let mut seq = vec![fmath::exp(ln_a0)];
    let mut la = ln_a0;
    let mut first = if la < ln_floor { Some(0) } else { None };
    let mut diverged = la > ln_max;
    for i in 0..n {
        if diverged {
            break;
        }
        if ln_r != f64::NEG_INFINITY {
            ln_r *= 1.0 + eta;
        }
        la = ln_theta - (i + 1) as f64 * ln_b / eta + ln_r;
        if la > ln_max || la.is_nan() {
            diverged = true;
            seq.push(f64::INFINITY);
            break;
        }
        seq.push(fmath::exp(la));
        if first.is_none() && la < ln_floor {
            first = Some(i + 1);
        }
    }
    let converged = !diverged && la < ln_floor;
    Ok(RecursionOutcome { sequence: seq, converged, diverged, first_below_floor: first })
}

/// The equality version of `a_{i+1} ≤ c bⁱ a_i^{1+η}`, `n` steps from `a₀`.
pub fn recursion_oracle(c: f64, b: f64, eta: f64, a0: f64, n: usize) -> Result<RecursionOutcome> {
    if !(c > 0.0 && b > 1.0 && eta > 0.0 && a0 >= 0.0) {
        return Err(Error::InvalidParameter("recursion needs c > 0, b > 1, η > 0 and a₀ ≥ 0".into()));
    }
    let la = if a0 == 0.0 { f64::NEG_INFINITY } else { fmath::ln(a0) };
    recursion_oracle_log(fmath::ln(c), fmath::ln(b), eta, la, n)
}

/// `c^{−1/η} b^{−1/η²}`.
pub fn recursion_threshold(c: f64, b: f64, eta: f64) -> f64 {
    fmath::exp(-fmath::ln(c) / eta - fmath::ln(b) / (eta * eta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaccioppoliReport {
    pub level: f64,
    pub t: f64,
    pub s: f64,
    pub center: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub tol_disc: f64,
    pub pass: bool,
}

/// Both sides of the Caccioppoli inequality on `A_{l,t} ⊂ A_{l,s}`, with
/// `∇u` from nodal central differences.
pub fn caccioppoli_check(
    u: &ScalarField,
    constants: &DeGiorgiConstants,
    level: f64,
    t: f64,
    s: f64,
    center: &[f64],
    tol_disc: f64,
) -> Result<CaccioppoliReport> {
    if !(level >= 1.0 && 0.0 <= t && t < s && s <= 1.0) {
        return Err(Error::InvalidParameter(alloc::format!(
            "need l ≥ 1 and 0 ≤ t < s ≤ 1, got l = {level}, t = {t}, s = {s}"
        )));
    }
    let grid = u.grid();
    let vol = grid.cell_volume();
    let grad = gradient_magnitude(u);
    let lhs = if t > 0.0 {
        let inner = level_set_measure(u, level, t, center, true)?;
        inner.nodes.iter().map(|&n| fmath::powf(grad[n], constants.p_minus)).sum::<f64>() * vol
    } else {
        0.0
    };
    let outer = level_set_measure(u, level, s, center, true)?;
    let tail: f64 = outer
        .nodes
        .iter()
        .map(|&n| fmath::powf((u.values()[n] - level) / (s - t), constants.pstar_minus))
        .sum::<f64>()
        * vol;
    let rhs = constants.c_mu_k * (tail + (fmath::powf(level, constants.p_plus) + 1.0) * outer.measure);
    Ok(CaccioppoliReport {
        level,
        t,
        s,
        center: center.to_vec(),
        lhs,
        rhs,
        tol_disc,
        pass: lhs <= rhs * (1.0 + tol_disc),
    })
}

/// `∫|∇v|^p / (∫|v|^r)^{p/r}` with nodal central differences.
pub fn embedding_ratio(v: &ScalarField, p: f64, r: f64) -> Result<Option<f64>> {
    let grid = v.grid();
    let gm: Vec<f64> = gradient_magnitude(v).iter().map(|g| fmath::powf(*g, p)).collect();
    let num = integrate(&gm, grid)?;
    let vr: Vec<f64> = v.values().iter().map(|x| fmath::powf(x.abs(), r)).collect();
    let den = integrate(&vr, grid)?;
    if !(den > 0.0 && num.is_finite() && den.is_finite()) {
        return Ok(None);
    }
    Ok(Some(num / fmath::powf(den, p / r)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolevEstimate {
    pub s: f64,
    pub samples: usize,
    pub best_index: usize,
}

/// Zero-boundary test fields: the lowest sine mode, centred bumps of several
/// widths and sharpness, then `random` seeded sine series.
pub fn embedding_family(grid: &Grid, random: usize, seed: u64) -> Vec<ScalarField> {
    let d = grid.dim();
    let mut out = Vec::new();
    out.push(ScalarField::from_fn_dirichlet(*grid, |x| {
        (0..d)
            .map(|k| {
                let (a, b) = (grid.lower()[k], grid.upper()[k]);
                fmath::sin(core::f64::consts::PI * (x[k] - a) / (b - a))
            })
            .product()
    }));
    let half = (0..d).map(|k| 0.5 * (grid.upper()[k] - grid.lower()[k])).fold(f64::INFINITY, f64::min);
    let h = grid.spacing().iter().cloned().fold(0.0, f64::max);
    let mut w = half;
    while w > 3.0 * h {
        for m in [2.0, 3.0, 4.0] {
            out.push(ScalarField::from_fn_dirichlet(*grid, |x| {
                let r2: f64 = (0..d)
                    .map(|k| {
                        let c = 0.5 * (grid.lower()[k] + grid.upper()[k]);
                        (x[k] - c) * (x[k] - c)
                    })
                    .sum::<f64>()
                    / (w * w);
                if r2 < 1.0 {
                    fmath::powf(1.0 - r2, m)
                } else {
                    0.0
                }
            }));
        }
        w *= 0.7;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        out.push(random_smooth_direction(grid, &mut rng));
    }
    out
}

/// Smallest sampled embedding ratio with exponents `(p, r)`.
pub fn estimate_embedding_constant(grid: &Grid, p: f64, r: f64, sample_count: usize, seed: u64) -> Result<SobolevEstimate> {
    if sample_count < 1 {
        return Err(Error::InvalidParameter("sample_count must be at least 1".into()));
    }
    let family = embedding_family(grid, sample_count, seed);
    let mut best = (f64::INFINITY, 0usize);
    let mut used = 0;
    for (i, v) in family.iter().enumerate() {
        if let Some(q) = embedding_ratio(v, p, r)? {
            used += 1;
            if q < best.0 {
                best = (q, i);
            }
        }
    }
    if used == 0 {
        return Err(Error::InvalidParameter("every embedding sample was degenerate".into()));
    }
    Ok(SobolevEstimate { s: best.0, samples: used, best_index: best.1 })
}

/// Estimate of the embedding constant `S` for `W₀^{1,p₋} ↪ L^{p*₋}`.
pub fn estimate_sobolev_constant(exps: &ExponentField, grid: &Grid, sample_count: usize) -> Result<SobolevEstimate> {
    grid.check_len(exps.len())?;
    estimate_embedding_constant(grid, exps.p_minus(), exps.pstar_minus(), sample_count, 0x5eed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeGiorgiReport {
    /// `+1` certifies `u ≤ K`, `-1` certifies `−u ≤ K`
    pub sign: i8,
    pub center: Vec<f64>,
    pub radius: f64,
    pub k: f64,
    pub a_sequence: Vec<f64>,
    pub oracle: RecursionOutcome,
    pub constants: DeGiorgiConstants,
    pub threshold: f64,
    pub threshold_met: bool,
    pub empirical_decay: bool,
    pub certified_bound: bool,
    /// nodal maximum of `sign·u` over `B_{R/2}`
    pub direct_sup: f64,
}

/// One-sided certification of `sign·u ≤ K` on `B_{R/2}(center)`.
pub fn certify_ball(
    u: &ScalarField,
    sign: i8,
    inputs: &ConstantInputs<'_>,
    k: f64,
    radius: f64,
    center: &[f64],
    i_max: usize,
) -> Result<DeGiorgiReport> {
    let constants = inputs.constants(k, radius)?;
    let v = if sign < 0 { u.negated() } else { u.clone() };
    let a = compute_sequence(&v, k, radius, center, i_max, constants.pstar_minus)?;
    let a0 = a[0];
    let threshold_met = constants.threshold_met(a0);
    let la0 = if a0 > 0.0 { fmath::ln(a0) } else { f64::NEG_INFINITY };
    let oracle = recursion_oracle_log(constants.ln_c, constants.ln_b, constants.eta, la0, i_max)?;
    let empirical_decay = a.last().is_some_and(|x| *x < DECAY_FLOOR);
    let certified_bound = threshold_met && empirical_decay;
    let grid = v.grid();
    let direct_sup = grid
        .nodes_in_ball(center, radius / 2.0)
        .iter()
        .map(|&i| v.values()[i])
        .fold(f64::NEG_INFINITY, f64::max);
    if certified_bound && direct_sup > k + DIRECT_SUP_TOL {
        return Err(Error::CertifierInconsistency { direct_sup, k });
    }
    Ok(DeGiorgiReport {
        sign: if sign < 0 { -1 } else { 1 },
        center: center.to_vec(),
        radius,
        k,
        a_sequence: a,
        oracle,
        threshold: constants.threshold,
        constants,
        threshold_met,
        empirical_decay,
        certified_bound,
        direct_sup,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyParams {
    /// ball radius `R ∈ (0, 1]`
    pub radius: f64,
    pub i_max: usize,
    /// primary ball center; the domain center when absent
    pub center: Option<Vec<f64>>,
    /// extend the verdict to every interior node
    pub covering: bool,
}

impl Default for CertifyParams {
    fn default() -> Self {
        CertifyParams { radius: 0.45, i_max: DEFAULT_I_MAX, center: None, covering: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSummary {
    pub sign: i8,
    pub center: Vec<f64>,
    pub radius: f64,
    pub a0: f64,
    pub ln_threshold: f64,
    pub certified: bool,
    pub direct_sup: f64,
}

impl From<&DeGiorgiReport> for BallSummary {
    fn from(r: &DeGiorgiReport) -> Self {
        BallSummary {
            sign: r.sign,
            center: r.center.clone(),
            radius: r.radius,
            a0: r.a_sequence[0],
            ln_threshold: r.constants.ln_threshold,
            certified: r.certified_bound,
            direct_sup: r.direct_sup,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub k: f64,
    pub radius: f64,
    /// primary ball, `+u` then `−u`
    pub primary: [DeGiorgiReport; 2],
    pub balls_checked: usize,
    /// balls on which `±u ≤ K/2`, certified without iteration
    pub balls_trivial: usize,
    /// covering balls needing the full sequence
    pub nontrivial: Vec<BallSummary>,
    /// nontrivial ball with the largest `ln a₀ − ln threshold`
    pub worst: Option<DeGiorgiReport>,
    pub failures: usize,
    /// nodal maximum of `|u|` over the interior
    pub direct_sup: f64,
    pub certified: bool,
}

/// Ball radius used for the covering ball centred at `center`.
pub fn covering_radius(grid: &Grid, center: &[f64], radius: f64) -> f64 {
    radius.min(0.999 * grid.distance_to_boundary(center))
}

/// Certifies `|u| ≤ K`: the primary ball, then (with `covering`) one ball per
/// interior node so that every node lies in some certified `B_{R/2}`.
pub fn certify(u: &ScalarField, inputs: &ConstantInputs<'_>, k: f64, params: &CertifyParams) -> Result<CertificationReport> {
    let grid = *u.grid();
    grid.check_len(inputs.exps.len())?;
    let d = grid.dim();
    let center: Vec<f64> =
        params.center.clone().unwrap_or_else(|| (0..d).map(|k| 0.5 * (grid.lower()[k] + grid.upper()[k])).collect());
    let primary = [
        certify_ball(u, 1, inputs, k, params.radius, &center, params.i_max)?,
        certify_ball(u, -1, inputs, k, params.radius, &center, params.i_max)?,
    ];
    let mut certified = primary.iter().all(|r| r.certified_bound);
    let mut failures = primary.iter().filter(|r| !r.certified_bound).count();
    let mut balls_checked = 2;
    let mut balls_trivial = 0;
    let mut nontrivial = Vec::new();
    let mut worst: Option<(f64, DeGiorgiReport)> = None;
    let direct_sup = grid.interior_nodes().map(|i| u.values()[i].abs()).fold(0.0, f64::max);
    if params.covering {
        for sign in [1i8, -1] {
            let hot: Vec<usize> = (0..grid.len()).filter(|&i| f64::from(sign) * u.values()[i] > k / 2.0).collect();
            for c_idx in grid.interior_nodes() {
                let c = grid.coords(c_idx);
                let c = &c[..d];
                let r = covering_radius(&grid, c, params.radius);
                balls_checked += 1;
                let touches = hot.iter().any(|&n| {
                    let x = grid.coords(n);
                    (0..d).map(|k| (x[k] - c[k]) * (x[k] - c[k])).sum::<f64>() < r * r
                });
                if !touches {
                    balls_trivial += 1;
                    continue;
                }
                let rep = certify_ball(u, sign, inputs, k, r, c, params.i_max)?;
                if !rep.certified_bound {
                    certified = false;
                    failures += 1;
                }
                let a0 = rep.a_sequence[0];
                let excess = if a0 > 0.0 { fmath::ln(a0) - rep.constants.ln_threshold } else { f64::NEG_INFINITY };
                nontrivial.push(BallSummary::from(&rep));
                if worst.as_ref().is_none_or(|(e, _)| excess > *e) {
                    worst = Some((excess, rep));
                }
            }
        }
        if certified && direct_sup > k + DIRECT_SUP_TOL {
            return Err(Error::CertifierInconsistency { direct_sup, k });
        }
    }
    Ok(CertificationReport {
        k,
        radius: params.radius,
        primary,
        balls_checked,
        balls_trivial,
        nontrivial,
        worst: worst.map(|w| w.1),
        failures,
        direct_sup,
        certified,
    })
}

/// Center and `a₀` of the ball attaining the smallest bracket.
pub type WorstBall = (Vec<f64>, f64);

/// Smallest bracket over all covering balls and both signs of all `fields`.
pub fn min_bracket(
    fields: &[&ScalarField],
    inputs: &ConstantInputs<'_>,
    k: f64,
    params: &CertifyParams,
) -> Result<(f64, Option<WorstBall>)> {
    let mut worst = f64::INFINITY;
    let mut at = None;
    for u in fields {
        let grid = *u.grid();
        let d = grid.dim();
        for sign in [1.0f64, -1.0] {
            let hot: Vec<usize> = (0..grid.len()).filter(|&i| sign * u.values()[i] > k / 2.0).collect();
            if hot.is_empty() {
                continue;
            }
            let v = if sign < 0.0 { u.negated() } else { (*u).clone() };
            for c_idx in grid.interior_nodes() {
                let c = grid.coords(c_idx);
                let c = &c[..d];
                let r = covering_radius(&grid, c, params.radius);
                let touches = hot.iter().any(|&n| {
                    let x = grid.coords(n);
                    (0..d).map(|k| (x[k] - c[k]) * (x[k] - c[k])).sum::<f64>() < r * r
                });
                if !touches {
                    continue;
                }
                let consts = inputs.constants(k, r)?;
                let set = level_set_measure(&v, k / 2.0, r, c, true)?;
                let a0: f64 = set
                    .nodes
                    .iter()
                    .map(|&n| fmath::powf(v.values()[n] - k / 2.0, consts.pstar_minus))
                    .sum::<f64>()
                    * grid.cell_volume();
                let br = consts.bracket(a0);
                if br < worst {
                    worst = br;
                    at = Some((c.to_vec(), a0));
                }
            }
        }
    }
    Ok((worst, at))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k: f64,
    pub bracket: f64,
    pub delta1: f64,
    /// `min(δ₁, μ cap)`
    pub delta: f64,
    pub grid_index: usize,
    /// `K` was refined by bisection inside the grid gap
    pub refined: bool,
    pub worst_center: Option<Vec<f64>>,
    pub worst_a0: f64,
    pub scanned: Vec<(f64, f64)>,
}

/// Smallest `K` making the bracket positive for every field, and the
/// corresponding `δ₁`.
///
/// The bracket is nondecreasing in `K`, so the grid is bisected. When the
/// first admissible grid value clears every ball outright (`a₀ = 0`, `δ₁ = ∞`)
/// the crossing inside the preceding gap is located by bisection to relative
/// accuracy `1e-10`, which yields a finite `δ₁`.
pub fn select_k_and_delta(
    fields: &[&ScalarField],
    inputs: &ConstantInputs<'_>,
    params: &CertifyParams,
    k_grid: &[f64],
    mu_cap: f64,
) -> Result<KSelection> {
    if k_grid.is_empty() || k_grid[0] < 2.0 || k_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("K grid must be increasing and start at 2 or above".into()));
    }
    let zero_mu = ConstantInputs { mu: 0.0, ..*inputs };
    let mut scanned = Vec::new();
    let eval = |k: f64, scanned: &mut Vec<(f64, f64)>| -> Result<(f64, Option<WorstBall>)> {
        let r = min_bracket(fields, &zero_mu, k, params)?;
        scanned.push((k, r.0));
        Ok(r)
    };
    let last = k_grid.len() - 1;
    let top = eval(k_grid[last], &mut scanned)?;
    if !(top.0 > 0.0) {
        return Err(Error::NoAdmissibleK { best_bracket: top.0 });
    }
    let (mut lo, mut hi) = (None::<usize>, last);
    let first = eval(k_grid[0], &mut scanned)?;
    let mut hi_val = top;
    if first.0 > 0.0 {
        hi = 0;
        hi_val = first;
    } else {
        let mut l = 0usize;
        while hi - l > 1 {
            let mid = (l + hi) / 2;
            let m = eval(k_grid[mid], &mut scanned)?;
            if m.0 > 0.0 {
                hi = mid;
                hi_val = m;
            } else {
                l = mid;
            }
        }
        lo = Some(l);
    }
    let mut k = k_grid[hi];
    let mut refined = false;
    if hi_val.0 == f64::INFINITY {
        if let Some(l) = lo {
            let (mut a, mut b) = (k_grid[l], k_grid[hi]);
            while (b - a) > 1e-10 * b {
                let m = 0.5 * (a + b);
                let v = eval(m, &mut scanned)?;
                if v.0 > 0.0 {
                    b = m;
                    hi_val = v;
                } else {
                    a = m;
                }
            }
            k = b;
            refined = true;
        }
    }
    let (bracket, at) = hi_val;
    let delta1 = if bracket == f64::INFINITY {
        f64::INFINITY
    } else {
        let c2 = fmath::powf(2.0, inputs.exps.p_plus() + 1.0);
        bracket / (fmath::powf(k, inputs.exps.q_plus() - inputs.exps.p_plus()) * c2)
    };
    let (worst_center, worst_a0) = match at {
        Some((c, a0)) => (Some(c), a0),
        None => (None, 0.0),
    };
    Ok(KSelection {
        k,
        bracket,
        delta1,
        delta: delta1.min(mu_cap),
        grid_index: hi,
        refined,
        worst_center,
        worst_a0,
        scanned,
    })
}

/// Geometric `K` grid from 2 with the given ratio.
pub fn default_k_grid(ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| 2.0 * fmath::powf(ratio, j as f64)).collect()
}
