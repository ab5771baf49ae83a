//! Modulars and Luxemburg norms of the variable-exponent Lebesgue and Sobolev
//! spaces, evaluated with the grid's trapezoid quadrature.
//!
//! All statements below are about the discrete modular
//! `ρ(u) = Σ_i w_i |u_i|^{e_i}`, for which the classical relations between
//! norm and modular hold exactly.

use serde::{Deserialize, Serialize};

use crate::exponents::ExponentField;
use crate::fmath;
use crate::grid::{gradient_magnitude, Grid, ScalarField};
use crate::{Error, Result};

pub const DEFAULT_NORM_TOL: f64 = 1e-10;
pub const NORM_MAX_ITER: usize = 200;

/// Which exponent a modular is taken with.
#[derive(Debug, Clone, Copy)]
pub enum ExponentSelector<'a> {
    P,
    PStar,
    Q,
    Custom(&'a [f64]),
}

impl<'a> ExponentSelector<'a> {
    pub fn resolve(self, exps: &'a ExponentField) -> &'a [f64] {
        match self {
            ExponentSelector::P => exps.p(),
            ExponentSelector::PStar => exps.pstar(),
            ExponentSelector::Q => exps.q(),
            ExponentSelector::Custom(e) => e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ModularValue(pub f64);

impl ModularValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `Σ w_i |v_i|^{e_i}` over raw nodal samples.
pub fn modular_raw(values: &[f64], exponent: &[f64], grid: &Grid) -> Result<f64> {
    grid.check_len(values.len())?;
    grid.check_len(exponent.len())?;
    Ok(values
        .iter()
        .zip(exponent)
        .enumerate()
        .map(|(i, (v, e))| if *v == 0.0 { 0.0 } else { grid.weight(i) * fmath::powf(v.abs(), *e) })
        .sum())
}

pub fn modular(u: &ScalarField, selector: ExponentSelector<'_>, exps: &ExponentField) -> Result<ModularValue> {
    let e = selector.resolve(exps);
    modular_raw(u.values(), e, u.grid()).map(ModularValue)
}

fn scaled_modular(values: &[f64], exponent: &[f64], grid: &Grid, t: f64) -> f64 {
    values
        .iter()
        .zip(exponent)
        .enumerate()
        .map(|(i, (v, e))| if *v == 0.0 { 0.0 } else { grid.weight(i) * fmath::powf(v.abs() / t, *e) })
        .sum()
}

/// Luxemburg norm `inf { t > 0 : ρ(v/t) ≤ 1 }`, located by bisection until
/// `|ρ(v/t) − 1| ≤ tol`.
pub fn luxemburg_norm(values: &[f64], exponent: &[f64], grid: &Grid, tol: f64) -> Result<f64> {
    grid.check_len(values.len())?;
    grid.check_len(exponent.len())?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!("norm tolerance {tol} must be positive")));
    }
    if values.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let rho = |t: f64| scaled_modular(values, exponent, grid, t);
    let mut lo = 1.0;
    let mut hi = 1.0;
    let mut iterations = 0;
    let r1 = rho(1.0);
    if (r1 - 1.0).abs() <= tol {
        return Ok(1.0);
    }
    if r1 > 1.0 {
        while rho(hi) > 1.0 {
            lo = hi;
            hi *= 2.0;
            iterations += 1;
            if iterations >= NORM_MAX_ITER || !hi.is_finite() {
                return Err(Error::NormBisection { lo, hi, iterations });
            }
        }
    } else {
        while rho(lo) < 1.0 {
            hi = lo;
            lo *= 0.5;
            iterations += 1;
            if iterations >= NORM_MAX_ITER || lo == 0.0 {
                return Err(Error::NormBisection { lo, hi, iterations });
            }
        }
    }
    while iterations < NORM_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let r = rho(mid);
        if (r - 1.0).abs() <= tol {
            return Ok(mid);
        }
        if r > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if mid == lo && mid == hi {
            break;
        }
        iterations += 1;
    }
    Err(Error::NormBisection { lo, hi, iterations })
}

/// `‖u‖ = ‖∇u‖_{L^{p(x)}}` using the nodal gradient magnitude.
pub fn sobolev_norm(u: &ScalarField, p: &[f64], tol: f64) -> Result<f64> {
    if !u.satisfies_dirichlet() {
        return Err(Error::InvalidParameter("field violates the Dirichlet boundary mask".into()));
    }
    let g = gradient_magnitude(u);
    luxemburg_norm(&g, p, u.grid(), tol)
}

/// One norm/modular relation with its computed slack (positive means satisfied
/// with room to spare).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationCheck {
    pub applicable: bool,
    pub passed: bool,
    pub slack: f64,
}

impl RelationCheck {
    fn not_applicable() -> Self {
        RelationCheck { applicable: false, passed: true, slack: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModularRelationReport {
    pub norm: f64,
    pub modular: f64,
    pub e_minus: f64,
    pub e_plus: f64,
    /// norm and modular on the same side of 1
    pub same_side_of_one: RelationCheck,
    /// `‖u‖ > 1 ⇒ ‖u‖^{e₋} ≤ ρ(u) ≤ ‖u‖^{e₊}`
    pub above_one_bounds: RelationCheck,
    /// `‖u‖ < 1 ⇒ ‖u‖^{e₊} ≤ ρ(u) ≤ ‖u‖^{e₋}`
    pub below_one_bounds: RelationCheck,
}

impl ModularRelationReport {
    pub fn all_passed(&self) -> bool {
        self.same_side_of_one.passed && self.above_one_bounds.passed && self.below_one_bounds.passed
    }
}

/// Relative tolerance for comparing modular values that should agree exactly
/// in exact arithmetic; it covers the bisection tolerance of the norm.
const RELATION_RTOL: f64 = 1e-8;

/// Evaluates the norm/modular relations for `values` with exponent samples `e`.
pub fn check_modular_relations(values: &[f64], e: &[f64], grid: &Grid) -> Result<ModularRelationReport> {
    let norm = luxemburg_norm(values, e, grid, DEFAULT_NORM_TOL)?;
    let modular = modular_raw(values, e, grid)?;
    let e_minus = e.iter().copied().fold(f64::INFINITY, f64::min);
    let e_plus = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let side = |x: f64, tol: f64| -> i8 {
        if (x - 1.0).abs() <= tol {
            0
        } else if x > 1.0 {
            1
        } else {
            -1
        }
    };
    let sn = side(norm, RELATION_RTOL);
    let sm = side(modular, 10.0 * e_plus * RELATION_RTOL);
    let same_side_of_one = RelationCheck { applicable: true, passed: sn == sm, slack: (modular - 1.0) * (norm - 1.0).signum() };

    let bounds = |lo_exp: f64, hi_exp: f64| {
        let lower = fmath::powf(norm, lo_exp);
        let upper = fmath::powf(norm, hi_exp);
        let slack = (modular - lower).min(upper - modular);
        let tol = RELATION_RTOL * e_plus * modular.max(upper).max(1e-300);
        RelationCheck { applicable: true, passed: slack >= -tol, slack }
    };
    let above_one_bounds = if sn > 0 { bounds(e_minus, e_plus) } else { RelationCheck::not_applicable() };
    let below_one_bounds = if sn < 0 && norm > 0.0 { bounds(e_plus, e_minus) } else { RelationCheck::not_applicable() };

    Ok(ModularRelationReport { norm, modular, e_minus, e_plus, same_side_of_one, above_one_bounds, below_one_bounds })
}
