//! Nonlinearities `f(x, s)`, their primitives, and the truncated supercritical
//! term `g_K`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::exponents::ExponentField;
use crate::expr::Expr;
use crate::fmath;
use crate::grid::Grid;
use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

/// A model `f(x, s)` bound to the nodes of a grid.
///
/// `primitive(node, s)` must equal `∫₀ˢ f(node, t) dt`; every model is required
/// to satisfy `f(node, 0) = 0`.
pub trait NonlinearityModel: Send + Sync {
    fn name(&self) -> String;
    fn f(&self, node: usize, s: f64) -> f64;
    fn primitive(&self, node: usize, s: f64) -> f64;
}

/// `f ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroModel;

impl NonlinearityModel for ZeroModel {
    fn name(&self) -> String {
        "zero".into()
    }
    fn f(&self, _: usize, _: f64) -> f64 {
        0.0
    }
    fn primitive(&self, _: usize, _: f64) -> f64 {
        0.0
    }
}

/// `f(s) = a s`.
#[derive(Debug, Clone, Copy)]
pub struct LinearModel {
    pub amplitude: f64,
}

impl NonlinearityModel for LinearModel {
    fn name(&self) -> String {
        format!("linear(a={})", self.amplitude)
    }
    fn f(&self, _: usize, s: f64) -> f64 {
        self.amplitude * s
    }
    fn primitive(&self, _: usize, s: f64) -> f64 {
        0.5 * self.amplitude * s * s
    }
}

const TABLE_START: f64 = 1e-3;
const TABLE_RATIO: f64 = 1.005;
const TABLE_END: f64 = 1e4;
const GL_POINTS: usize = 10;

/// Cubic Hermite table of `F(s) = ∫₀ˢ f` on `[-TABLE_END, TABLE_END]`.
///
/// Knots are geometric from `TABLE_START`, so the interpolation error is
/// relative to `F` even where `F` vanishes to high order at zero. Each panel
/// is integrated with Gauss–Legendre. Below the first knot and beyond the last
/// the primitive is evaluated by direct quadrature.
#[derive(Debug, Clone)]
pub struct PrimitiveTable {
    gl: GaussLegendre,
    knots: Vec<f64>,
    pos: Side,
    neg: Side,
}

#[derive(Debug, Clone)]
struct Side {
    f: Vec<f64>,
    big_f: Vec<f64>,
}

fn table_knots() -> Vec<f64> {
    let mut k = alloc::vec![TABLE_START];
    let mut s = TABLE_START;
    while s < TABLE_END {
        s = (s * TABLE_RATIO).min(TABLE_END);
        k.push(s);
    }
    k
}

impl PrimitiveTable {
    pub fn build(f: impl Fn(f64) -> f64) -> Self {
        let gl = GaussLegendre::new(GL_POINTS);
        let knots = table_knots();
        let side = |sign: f64| {
            let mut fv = Vec::with_capacity(knots.len());
            let mut big = Vec::with_capacity(knots.len());
            let mut acc = gl.integrate(0.0, TABLE_START, |t| sign * f(sign * t));
            for (j, &s) in knots.iter().enumerate() {
                if j > 0 {
                    acc += gl.integrate(knots[j - 1], s, |t| sign * f(sign * t));
                }
                fv.push(f(sign * s));
                big.push(acc);
            }
            Side { f: fv, big_f: big }
        };
        let (pos, neg) = (side(1.0), side(-1.0));
        PrimitiveTable { gl, knots, pos, neg }
    }

    pub fn eval(&self, s: f64, f: impl Fn(f64) -> f64) -> f64 {
        let (side, a, sign) = if s >= 0.0 { (&self.pos, s, 1.0) } else { (&self.neg, -s, -1.0) };
        if a == 0.0 {
            return 0.0;
        }
        let n = self.knots.len();
        if a <= TABLE_START {
            return self.gl.integrate(0.0, a, |t| sign * f(sign * t));
        }
        if a >= TABLE_END {
            return side.big_f[n - 1] + tail_integral(TABLE_END, a, |t| sign * f(sign * t));
        }
        let j = self.locate(a);
        let (x0, x1) = (self.knots[j], self.knots[j + 1]);
        let h = x1 - x0;
        let t = (a - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        // Hermite basis; the slopes are sign·f(sign·s) since d/da F(sign·a) = sign·f
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * side.big_f[j]
            + h10 * h * sign * side.f[j]
            + h01 * side.big_f[j + 1]
            + h11 * h * sign * side.f[j + 1]
    }

    fn locate(&self, a: f64) -> usize {
        match self.knots.binary_search_by(|k| k.partial_cmp(&a).unwrap()) {
            Ok(j) => j.min(self.knots.len() - 2),
            Err(j) => j - 1,
        }
    }
}

/// `∫_a^b f` for `0 < a < b` over panels that double in length.
fn tail_integral(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let gl = GaussLegendre::new(GL_POINTS);
    let mut lo = a;
    let mut acc = 0.0;
    while lo < b {
        let hi = (lo * 1.25).min(b);
        acc += gl.integrate(lo, hi, &f);
        lo = hi;
    }
    acc
}

/// `∫₀ˢ f` by direct composite quadrature, used where no table is kept.
pub fn primitive_by_quadrature(s: f64, f: impl Fn(f64) -> f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let gl = GaussLegendre::new(GL_POINTS);
    let sign = if s > 0.0 { 1.0 } else { -1.0 };
    let a = s.abs();
    let g = |t: f64| sign * f(sign * t);
    let first = a.min(1.0);
    let mut acc = crate::quadrature::composite(&gl, 0.0, first, 16, g);
    if a > 1.0 {
        acc += tail_integral(1.0, a, g);
    }
    acc
}

/// `f(s) = a s³ / (1 + |s|^c)`, the shipped model.
///
/// Near zero `f ~ s³`, at infinity `f ~ s^{3−c}`, so both limit hypotheses hold
/// for `p₋ > 4 − c` and `p₊ < 4`.
#[derive(Debug, Clone)]
pub struct RationalCubic {
    amplitude: f64,
    c: f64,
    table: PrimitiveTable,
}

impl RationalCubic {
    pub fn new(amplitude: f64, c: f64) -> Result<Self> {
        if !(amplitude.is_finite() && c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!("rational cubic needs finite amplitude and c > 0 (c = {c})")));
        }
        let table = PrimitiveTable::build(|s| rational_cubic(1.0, c, s));
        Ok(RationalCubic { amplitude, c, table })
    }

    pub fn exponent_c(&self) -> f64 {
        self.c
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
}

fn rational_cubic(a: f64, c: f64, s: f64) -> f64 {
    a * s * s * s / (1.0 + fmath::powf(s.abs(), c))
}

impl NonlinearityModel for RationalCubic {
    fn name(&self) -> String {
        format!("rational_cubic(a={}, c={})", self.amplitude, self.c)
    }
    fn f(&self, _: usize, s: f64) -> f64 {
        rational_cubic(self.amplitude, self.c, s)
    }
    fn primitive(&self, _: usize, s: f64) -> f64 {
        let c = self.c;
        self.amplitude * self.table.eval(s, |t| rational_cubic(1.0, c, t))
    }
}

/// `f` given as an expression in `s` and the coordinates.
///
/// x-independent expressions share a single primitive table; x-dependent ones
/// integrate per evaluation.
pub struct ExpressionModel {
    expr: Expr,
    coords: Vec<[f64; 3]>,
    dim: usize,
    table: Option<PrimitiveTable>,
}

impl ExpressionModel {
    pub fn new(src: &str, grid: &Grid) -> Result<Self> {
        let expr = Expr::parse(src)?;
        if expr.max_coord() > grid.dim() {
            return Err(Error::Expression(format!(
                "nonlinearity '{src}' uses x{} on a {}-dimensional grid",
                expr.max_coord(),
                grid.dim()
            )));
        }
        let coords: Vec<[f64; 3]> = (0..grid.len()).map(|i| grid.coords(i)).collect();
        let dim = grid.dim();
        let table = if expr.uses_coords() {
            None
        } else {
            let e = expr.clone();
            Some(PrimitiveTable::build(move |s| e.eval(&[], s)))
        };
        Ok(ExpressionModel { expr, coords, dim, table })
    }
}

impl NonlinearityModel for ExpressionModel {
    fn name(&self) -> String {
        format!("expression({})", self.expr.source())
    }
    fn f(&self, node: usize, s: f64) -> f64 {
        self.expr.eval(&self.coords[node][..self.dim], s)
    }
    fn primitive(&self, node: usize, s: f64) -> f64 {
        let x = &self.coords[node][..self.dim];
        match &self.table {
            Some(t) => t.eval(s, |v| self.expr.eval(x, v)),
            None => primitive_by_quadrature(s, |v| self.expr.eval(x, v)),
        }
    }
}

/// `κ f` for a boxed model.
pub struct ScaledModel {
    pub factor: f64,
    pub inner: Box<dyn NonlinearityModel>,
}

impl NonlinearityModel for ScaledModel {
    fn name(&self) -> String {
        format!("{}*{}", self.factor, self.inner.name())
    }
    fn f(&self, node: usize, s: f64) -> f64 {
        self.factor * self.inner.f(node, s)
    }
    fn primitive(&self, node: usize, s: f64) -> f64 {
        self.factor * self.inner.primitive(node, s)
    }
}

/// Cutoff `K` with the exponent data that define `g_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNonlinearity {
    k: f64,
    q: Vec<f64>,
    p_plus: f64,
    /// `K^{q_i − p₊}` per node
    k_pow: Vec<f64>,
}

impl TruncatedNonlinearity {
    pub fn new(k: f64, exps: &ExponentField) -> Result<Self> {
        Self::from_samples(k, exps.q(), exps.p_plus())
    }

    pub fn from_samples(k: f64, q: &[f64], p_plus: f64) -> Result<Self> {
        if !(k.is_finite() && k >= 2.0) {
            return Err(Error::InvalidParameter(format!("cutoff K = {k} must be a real number >= 2")));
        }
        let k_pow = q.iter().map(|qi| fmath::powf(k, qi - p_plus)).collect();
        Ok(TruncatedNonlinearity { k, q: q.to_vec(), p_plus, k_pow })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// `K^{q(x) − p₊}` at `node`.
    pub fn growth_factor(&self, node: usize) -> f64 {
        self.k_pow[node]
    }

    pub fn with_k(&self, k: f64) -> Result<Self> {
        Self::from_samples(k, &self.q, self.p_plus)
    }
}

/// `g_K(x, s)`: `|s|^{q−2}s` for `|s| ≤ K`, `K^{q−p₊}|s|^{p₊−2}s` beyond.
pub fn truncate(tn: &TruncatedNonlinearity, node: usize, s: f64) -> f64 {
    if s.abs() <= tn.k {
        fmath::signed_pow(s, tn.q[node])
    } else {
        tn.k_pow[node] * fmath::signed_pow(s, tn.p_plus)
    }
}

/// `G_K(x, u) = ∫₀ᵘ g_K(x, s) ds`.
pub fn primitive_g(tn: &TruncatedNonlinearity, node: usize, u: f64) -> f64 {
    let a = u.abs();
    let q = tn.q[node];
    if a <= tn.k {
        if a == 0.0 {
            0.0
        } else {
            fmath::powf(a, q) / q
        }
    } else {
        let p = tn.p_plus;
        fmath::powf(tn.k, q) / q + tn.k_pow[node] * (fmath::powf(a, p) - fmath::powf(tn.k, p)) / p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthCheckReport {
    pub samples: usize,
    pub violations: usize,
    /// smallest `bound − |g|` over the samples
    pub min_slack: f64,
    /// largest `bound − |g|` over the samples
    pub max_slack: f64,
    /// worst relative continuity defect `|g(K⁻) − g(K⁺)| / |g(K)|` over nodes
    pub continuity_defect: f64,
}

/// Relative allowance for roundoff in `|s|^{q−1}` versus `K^{q−p₊}|s|^{p₊−1}`
/// on the untruncated branch near `|s| = K`.
const GROWTH_RTOL: f64 = 1e-14;

/// Checks `|g_K(x,s)| ≤ K^{q(x)−p₊}|s|^{p₊−1}` at every node and sample.
pub fn truncation_growth_check(tn: &TruncatedNonlinearity, samples: &[f64]) -> Result<GrowthCheckReport> {
    let mut rep = GrowthCheckReport {
        samples: 0,
        violations: 0,
        min_slack: f64::INFINITY,
        max_slack: f64::NEG_INFINITY,
        continuity_defect: 0.0,
    };
    let mut first = None;
    let mut nodes: Vec<usize> = Vec::new();
    // identical exponents give identical checks; test each distinct q once
    for (i, qi) in tn.q.iter().enumerate() {
        if !nodes.iter().any(|&j| tn.q[j] == *qi) {
            nodes.push(i);
        }
    }
    for &node in &nodes {
        for &s in samples {
            let g = truncate(tn, node, s).abs();
            let bound = if s == 0.0 { 0.0 } else { tn.k_pow[node] * fmath::powf(s.abs(), tn.p_plus - 1.0) };
            let slack = bound - g;
            rep.samples += 1;
            rep.min_slack = rep.min_slack.min(slack);
            rep.max_slack = rep.max_slack.max(slack);
            if slack < -GROWTH_RTOL * bound {
                rep.violations += 1;
                first.get_or_insert(Error::GrowthBoundViolated { s, value: g, bound });
            }
        }
        let lower = fmath::signed_pow(tn.k, tn.q[node]);
        let upper = tn.k_pow[node] * fmath::signed_pow(tn.k, tn.p_plus);
        rep.continuity_defect = rep.continuity_defect.max((lower - upper).abs() / lower.abs());
    }
    match first {
        Some(e) => Err(e),
        None => Ok(rep),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub model: String,
    /// `max |f(x, s)|` over nodes and `s ∈ [−s_large, s_large]` samples
    pub sup_abs_f: f64,
    /// `max_x |f(x, ±s_small)| / s_small^{p(x)−1}`
    pub ratio_small: f64,
    /// `max_x |f(x, ±s_large)| / s_large^{p(x)−1}`
    pub ratio_large: f64,
    pub bounded: bool,
    pub decays_at_zero: bool,
    pub decays_at_infinity: bool,
    pub vanishes_at_zero: bool,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.bounded && self.decays_at_zero && self.decays_at_infinity && self.vanishes_at_zero
    }
}

pub const DEFAULT_S_SMALL: f64 = 1e-3;
pub const DEFAULT_S_LARGE: f64 = 1e4;
pub const DEFAULT_TOL_RATIO: f64 = 0.1;

/// Finite-sample check of boundedness on compacts, the two limit hypotheses on
/// `|f|/|s|^{p−1}`, and `f(x, 0) = 0`.
pub fn check_hypotheses(
    model: &dyn NonlinearityModel,
    exps: &ExponentField,
    s_small: f64,
    s_large: f64,
    tol_ratio: f64,
) -> HypothesisReport {
    let p = exps.p();
    let n = p.len();
    let mut ratio_small: f64 = 0.0;
    let mut ratio_large: f64 = 0.0;
    let mut sup: f64 = 0.0;
    let mut zero_ok = true;
    let samples = 201;
    for node in 0..n {
        for s in [s_small, -s_small] {
            ratio_small = ratio_small.max(model.f(node, s).abs() / fmath::powf(s_small, p[node] - 1.0));
        }
        for s in [s_large, -s_large] {
            ratio_large = ratio_large.max(model.f(node, s).abs() / fmath::powf(s_large, p[node] - 1.0));
        }
        if model.f(node, 0.0) != 0.0 {
            zero_ok = false;
        }
    }
    // boundedness on [−M, M], sampled at a subset of nodes
    let stride = (n / 64).max(1);
    for node in (0..n).step_by(stride) {
        for k in 0..samples {
            let s = -s_large + 2.0 * s_large * k as f64 / (samples - 1) as f64;
            sup = sup.max(model.f(node, s).abs());
        }
    }
    let ok = |r: f64| r.is_finite() && r <= tol_ratio;
    HypothesisReport {
        model: model.name(),
        sup_abs_f: sup,
        ratio_small,
        ratio_large,
        bounded: sup.is_finite(),
        decays_at_zero: ok(ratio_small),
        decays_at_infinity: ok(ratio_large),
        vanishes_at_zero: zero_ok,
    }
}
