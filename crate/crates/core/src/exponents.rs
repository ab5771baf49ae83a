//! Variable exponents `p(x)`, `q(x)` and the quantities derived from them.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::expr::Expr;
use crate::grid::Grid;
use crate::{Error, Result};

/// Margin used for the strict inequalities on exponents.
pub const DEFAULT_EXPONENT_MARGIN: f64 = 1e-12;

/// How an exponent is described before it is sampled at grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentSpec {
    Constant(f64),
    Nodal(Vec<f64>),
    Expression(String),
}

impl ExponentSpec {
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        match self {
            ExponentSpec::Constant(c) => Ok(alloc::vec![*c; grid.len()]),
            ExponentSpec::Nodal(v) => {
                grid.check_len(v.len())?;
                Ok(v.clone())
            }
            ExponentSpec::Expression(src) => {
                let e = Expr::parse(src)?;
                if e.uses_s() {
                    return Err(Error::Expression(format!("exponent '{src}' may not depend on s")));
                }
                if e.max_coord() > grid.dim() {
                    return Err(Error::Expression(format!(
                        "exponent '{src}' uses x{} on a {}-dimensional grid",
                        e.max_coord(),
                        grid.dim()
                    )));
                }
                Ok((0..grid.len()).map(|i| e.eval(&grid.coords(i)[..grid.dim()], 0.0)).collect())
            }
        }
    }
}

/// Validated nodal exponents with cached extrema and the critical exponent
/// `p*(x) = N p(x) / (N − p(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentField {
    p: Vec<f64>,
    q: Vec<f64>,
    dim_n: usize,
    p_minus: f64,
    p_plus: f64,
    q_minus: f64,
    q_plus: f64,
    pstar: Vec<f64>,
    pstar_minus: f64,
    margin: f64,
}

fn critical(n: f64, p: f64) -> f64 {
    n * p / (n - p)
}

/// Validates `1 < p₋ ≤ p₊ < N`, `p₊ < p*(x)` and `inf (q − p*) > 0` with the
/// default margin.
pub fn validate_exponents(p: &[f64], q: &[f64], dim_n: usize) -> Result<ExponentField> {
    ExponentField::with_margin(p, q, dim_n, DEFAULT_EXPONENT_MARGIN)
}

impl ExponentField {
    pub fn with_margin(p: &[f64], q: &[f64], dim_n: usize, margin: f64) -> Result<Self> {
        if p.is_empty() || p.len() != q.len() {
            return Err(Error::MalformedExponent(format!(
                "sample arrays must be non-empty and equally long (p: {}, q: {})",
                p.len(),
                q.len()
            )));
        }
        if dim_n < 2 {
            return Err(Error::MalformedExponent(format!("dimension N = {dim_n} must be at least 2")));
        }
        if let Some(i) = p.iter().chain(q).position(|v| !v.is_finite()) {
            let (which, node) = if i < p.len() { ("p", i) } else { ("q", i - p.len()) };
            return Err(Error::MalformedExponent(format!("{which} is not finite at node {node}")));
        }
        let n = dim_n as f64;
        let (imin, &p_minus) = argmin(p);
        let (imax, &p_plus) = argmax(p);
        if p_minus - 1.0 <= margin {
            return Err(Error::ExponentRange { node: imin, detail: format!("p_- = {p_minus} must exceed 1") });
        }
        if n - p_plus <= margin {
            return Err(Error::ExponentRange {
                node: imax,
                detail: format!("p_+ = {p_plus} must be below N = {dim_n}"),
            });
        }
        let pstar: Vec<f64> = p.iter().map(|&pi| critical(n, pi)).collect();
        // p* is increasing in p, so its minimum sits where p is smallest
        if critical(n, p_minus) - p_plus <= margin {
            return Err(Error::ExponentRange {
                node: imin,
                detail: format!("p_+ = {p_plus} must be below p*(x) = {}", critical(n, p_minus)),
            });
        }
        let mut worst = (0usize, f64::INFINITY);
        for (i, (qi, si)) in q.iter().zip(&pstar).enumerate() {
            let gap = qi - si;
            if gap < worst.1 {
                worst = (i, gap);
            }
        }
        if worst.1 <= margin {
            return Err(Error::SupercriticalityGap { node: worst.0, gap: worst.1 });
        }
        let q_minus = q.iter().copied().fold(f64::INFINITY, f64::min);
        let q_plus = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(ExponentField {
            p: p.to_vec(),
            q: q.to_vec(),
            dim_n,
            p_minus,
            p_plus,
            q_minus,
            q_plus,
            pstar,
            pstar_minus: critical(n, p_minus),
            margin,
        })
    }

    /// Samples both specs on `grid` and validates with `N = grid.dim()`.
    pub fn from_specs(p: &ExponentSpec, q: &ExponentSpec, grid: &Grid) -> Result<Self> {
        let ps = p.sample(grid)?;
        let qs = q.sample(grid)?;
        validate_exponents(&ps, &qs, grid.dim())
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn pstar(&self) -> &[f64] {
        &self.pstar
    }

    pub fn dim_n(&self) -> usize {
        self.dim_n
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn q_minus(&self) -> f64 {
        self.q_minus
    }

    pub fn q_plus(&self) -> f64 {
        self.q_plus
    }

    pub fn pstar_minus(&self) -> f64 {
        self.pstar_minus
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// `inf (q − p*)`.
    pub fn supercritical_gap(&self) -> f64 {
        self.q.iter().zip(&self.pstar).map(|(q, s)| q - s).fold(f64::INFINITY, f64::min)
    }
}

fn argmin(v: &[f64]) -> (usize, &f64) {
    v.iter().enumerate().fold((0, &v[0]), |acc, (i, x)| if *x < *acc.1 { (i, x) } else { acc })
}

fn argmax(v: &[f64]) -> (usize, &f64) {
    v.iter().enumerate().fold((0, &v[0]), |acc, (i, x)| if *x > *acc.1 { (i, x) } else { acc })
}
