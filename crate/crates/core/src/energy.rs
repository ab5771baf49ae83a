//! The truncated energy `E = Φ − λJ − μΨ` on a box grid, its exact discrete
//! gradient (the weak-form residual), the combined growth constant and the
//! `θ` estimate.
//!
//! `Φ` is assembled cell by cell. Every cell corner gets its own gradient,
//! built from the `N` cell edges that meet at that corner, and carries `1/2^N`
//! of the cell volume:
//!
//! ```text
//! Φ_h(u) = Σ_cells Σ_corners (|c|/2^N) (1/p_c) [ (|g_c|² + ε²)^{p_c/2} − ε^{p_c} ]
//! ```
//!
//! For `p ≡ 2` its gradient is the 3-point (1D) / 5-point (2D) Laplacian times
//! the cell volume. `J` and `Ψ` use the trapezoid node weights.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::exponents::ExponentField;
use crate::fmath;
use crate::grid::{Grid, ScalarField};
use crate::nonlinearity::{primitive_g, truncate, NonlinearityModel, TruncatedNonlinearity};
use crate::optim::Objective;
use crate::{Error, Result};

pub const DEFAULT_EPS_REG: f64 = 1e-8;

/// Cell/corner bookkeeping for the gradient quadrature of `Φ`.
#[derive(Debug, Clone)]
pub struct PhiAssembly {
    grid: Grid,
    cells: Vec<usize>,
    /// node offset of each of the `2^N` corners relative to the cell base
    corner_offset: Vec<usize>,
    stride: [usize; 3],
    inv_h: [f64; 3],
    corner_weight: f64,
}

impl PhiAssembly {
    pub fn new(grid: &Grid) -> Self {
        let d = grid.dim();
        let mut stride = [0; 3];
        let mut inv_h = [0.0; 3];
        for k in 0..d {
            stride[k] = grid.stride(k);
            inv_h[k] = 1.0 / grid.spacing()[k];
        }
        let corner_offset = (0..1usize << d)
            .map(|b| (0..d).filter(|k| b >> k & 1 == 1).map(|k| stride[k]).sum())
            .collect();
        let cells = (0..grid.len())
            .filter(|&i| {
                let m = grid.multi_index(i);
                (0..d).all(|k| m[k] + 1 < grid.nodes_per_axis()[k])
            })
            .collect();
        PhiAssembly {
            grid: *grid,
            cells,
            corner_offset,
            stride,
            inv_h,
            corner_weight: grid.cell_volume() / (1usize << d) as f64,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Gradient at corner `b` of the cell with base node `base`.
    #[inline]
    fn corner_gradient(&self, u: &[f64], base: usize, b: usize) -> [f64; 3] {
        let mut g = [0.0; 3];
        let off = self.corner_offset[b];
        for (k, gk) in g.iter_mut().enumerate().take(self.grid.dim()) {
            // the edge along axis k through this corner
            let lo = base + off - if b >> k & 1 == 1 { self.stride[k] } else { 0 };
            *gk = (u[lo + self.stride[k]] - u[lo]) * self.inv_h[k];
        }
        g
    }

    /// `Φ_h(u)`, and its gradient added into `grad` when given.
    pub fn eval(&self, u: &[f64], p: &[f64], eps: f64, mut grad: Option<&mut [f64]>) -> f64 {
        let d = self.grid.dim();
        let eps2 = eps * eps;
        let mut total = 0.0;
        for &base in &self.cells {
            for b in 0..self.corner_offset.len() {
                let node = base + self.corner_offset[b];
                let g = self.corner_gradient(u, base, b);
                let g2: f64 = g[..d].iter().map(|x| x * x).sum();
                if g2 == 0.0 {
                    continue;
                }
                let pc = p[node];
                let a = g2 + eps2;
                let t = fmath::powf(a, 0.5 * pc - 1.0);
                let floor = if eps == 0.0 { 0.0 } else { fmath::powf(eps, pc) };
                total += self.corner_weight * (a * t - floor) / pc;
                if let Some(gr) = grad.as_deref_mut() {
                    let w = self.corner_weight * t;
                    let off = self.corner_offset[b];
                    for k in 0..d {
                        let lo = base + off - if b >> k & 1 == 1 { self.stride[k] } else { 0 };
                        let c = w * g[k] * self.inv_h[k];
                        gr[lo + self.stride[k]] += c;
                        gr[lo] -= c;
                    }
                }
            }
        }
        total
    }
}

/// `Φ(u) = ∫ (1/p)|∇u|^p` with the corner-gradient quadrature.
pub fn phi(u: &ScalarField, exps: &ExponentField, eps_reg: f64) -> Result<f64> {
    u.grid().check_len(exps.len())?;
    Ok(PhiAssembly::new(u.grid()).eval(u.values(), exps.p(), eps_reg, None))
}

/// `J(u) = ∫ F(x, u)`.
pub fn j_functional(u: &ScalarField, model: &dyn NonlinearityModel) -> f64 {
    let g = u.grid();
    u.values()
        .iter()
        .enumerate()
        .map(|(i, &v)| if v == 0.0 { 0.0 } else { g.weight(i) * model.primitive(i, v) })
        .sum()
}

/// `Ψ(u) = ∫ G_K(x, u)`.
pub fn psi_functional(u: &ScalarField, tn: &TruncatedNonlinearity) -> Result<f64> {
    let g = u.grid();
    g.check_len(tn.len())?;
    Ok(u.values()
        .iter()
        .enumerate()
        .map(|(i, &v)| if v == 0.0 { 0.0 } else { g.weight(i) * primitive_g(tn, i, v) })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub phi: f64,
    pub j: f64,
    pub psi: f64,
    pub lambda: f64,
    pub mu: f64,
    pub total: f64,
    pub residual_sup: f64,
}

/// Entries are `∂E_h/∂u_i`: the divergence-form residual weighted by cell
/// volume, zero on boundary nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualVector {
    pub entries: Vec<f64>,
    pub sup_norm: f64,
    /// Euclidean norm of the entries
    pub l2_norm: f64,
}

impl ResidualVector {
    fn from_entries(entries: Vec<f64>) -> Self {
        let sup_norm = entries.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let l2_norm = fmath::sqrt(entries.iter().map(|r| r * r).sum());
        ResidualVector { entries, sup_norm, l2_norm }
    }
}

/// The discrete truncated energy at fixed `(λ, μ, K, ε_reg)`.
pub struct Energy<'a> {
    pub exps: &'a ExponentField,
    pub model: &'a dyn NonlinearityModel,
    pub tn: &'a TruncatedNonlinearity,
    pub lambda: f64,
    pub mu: f64,
    pub eps_reg: f64,
    assembly: PhiAssembly,
    weights: Vec<f64>,
    interior: Vec<bool>,
}

impl<'a> Energy<'a> {
    pub fn new(
        grid: &Grid,
        exps: &'a ExponentField,
        model: &'a dyn NonlinearityModel,
        tn: &'a TruncatedNonlinearity,
        lambda: f64,
        mu: f64,
        eps_reg: f64,
    ) -> Result<Self> {
        grid.check_len(exps.len())?;
        grid.check_len(tn.len())?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("lambda = {lambda} must be positive")));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("mu = {mu} must be nonnegative")));
        }
        if !(eps_reg >= 0.0 && eps_reg.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("eps_reg = {eps_reg} must be nonnegative")));
        }
        Ok(Energy {
            exps,
            model,
            tn,
            lambda,
            mu,
            eps_reg,
            assembly: PhiAssembly::new(grid),
            weights: grid.weights(),
            interior: (0..grid.len()).map(|i| !grid.is_boundary(i)).collect(),
        })
    }

    pub fn grid(&self) -> &Grid {
        self.assembly.grid()
    }

    pub fn with_mu(&self, mu: f64) -> Result<Energy<'a>> {
        Energy::new(self.grid(), self.exps, self.model, self.tn, self.lambda, mu, self.eps_reg)
    }

    fn jpsi(&self, u: &[f64]) -> (f64, f64) {
        let mut j = 0.0;
        let mut psi = 0.0;
        for (i, &v) in u.iter().enumerate() {
            if v == 0.0 || !self.interior[i] {
                continue;
            }
            j += self.weights[i] * self.model.primitive(i, v);
            if self.mu != 0.0 {
                psi += self.weights[i] * primitive_g(self.tn, i, v);
            }
        }
        (j, psi)
    }

    /// `(Φ, J, Ψ)`.
    pub fn parts(&self, u: &[f64]) -> (f64, f64, f64) {
        let phi = self.assembly.eval(u, self.exps.p(), self.eps_reg, None);
        let (j, psi) = self.jpsi(u);
        (phi, j, psi)
    }

    pub fn total(&self, u: &[f64]) -> f64 {
        let (phi, j, psi) = self.parts(u);
        phi - self.lambda * j - self.mu * psi
    }

    /// Energy and its exact gradient; boundary entries of `grad` are zero.
    pub fn total_and_gradient(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let phi = self.assembly.eval(u, self.exps.p(), self.eps_reg, Some(grad));
        let mut j = 0.0;
        let mut psi = 0.0;
        for (i, &v) in u.iter().enumerate() {
            if !self.interior[i] {
                grad[i] = 0.0;
                continue;
            }
            let w = self.weights[i];
            if v != 0.0 {
                j += w * self.model.primitive(i, v);
            }
            let mut h = self.lambda * self.model.f(i, v);
            if self.mu != 0.0 {
                if v != 0.0 {
                    psi += w * primitive_g(self.tn, i, v);
                }
                h += self.mu * truncate(self.tn, i, v);
            }
            grad[i] -= w * h;
        }
        phi - self.lambda * j - self.mu * psi
    }

    pub fn residual(&self, u: &[f64]) -> ResidualVector {
        let mut g = vec![0.0; u.len()];
        self.total_and_gradient(u, &mut g);
        ResidualVector::from_entries(g)
    }

    pub fn report(&self, u: &[f64]) -> EnergyReport {
        let (phi, j, psi) = self.parts(u);
        EnergyReport {
            phi,
            j,
            psi,
            lambda: self.lambda,
            mu: self.mu,
            total: phi - self.lambda * j - self.mu * psi,
            residual_sup: self.residual(u).sup_norm,
        }
    }
}

impl Objective for Energy<'_> {
    fn len(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.total(x)
    }

    fn value_and_gradient(&self, x: &[f64], g: &mut [f64]) -> f64 {
        self.total_and_gradient(x, g)
    }
}

/// Weak-form residual of the truncated problem at `u`.
pub fn residual(
    u: &ScalarField,
    exps: &ExponentField,
    model: &dyn NonlinearityModel,
    tn: &TruncatedNonlinearity,
    lambda: f64,
    mu: f64,
    eps_reg: f64,
) -> Result<ResidualVector> {
    if !u.satisfies_dirichlet() {
        return Err(Error::InvalidParameter("field violates the Dirichlet boundary mask".into()));
    }
    Ok(Energy::new(u.grid(), exps, model, tn, lambda, mu, eps_reg)?.residual(u.values()))
}

/// Magnitudes `10^{-6} … 10^{6}` on a log grid, 20 points per decade.
pub fn default_growth_samples() -> Vec<f64> {
    (0..=240).map(|k| fmath::powf(10.0, -6.0 + k as f64 / 20.0)).collect()
}

/// Smallest sampled `C` with `|f(x,s)| ≤ C|s|^{p(x)−1}`, times 1.1.
///
/// `magnitudes` must be positive and increasing; both signs are sampled. A
/// maximum at either end of the range means the ratio does not decay there.
pub fn combined_growth_constant(model: &dyn NonlinearityModel, exps: &ExponentField, magnitudes: &[f64]) -> Result<f64> {
    if magnitudes.len() < 3 || magnitudes.windows(2).any(|w| !(w[0] > 0.0 && w[1] > w[0])) {
        return Err(Error::InvalidParameter("growth samples must be positive, increasing, at least 3".into()));
    }
    let p = exps.p();
    let mut per_sample = vec![0.0f64; magnitudes.len()];
    for node in 0..p.len() {
        for (k, &s) in magnitudes.iter().enumerate() {
            let denom = fmath::powf(s, p[node] - 1.0);
            let r = model.f(node, s).abs().max(model.f(node, -s).abs()) / denom;
            if !r.is_finite() {
                return Err(Error::GrowthRatioUnbounded { detail: alloc::format!("ratio not finite at s = {s}") });
            }
            per_sample[k] = per_sample[k].max(r);
        }
    }
    let (kmax, &rmax) = per_sample
        .iter()
        .enumerate()
        .fold((0, &0.0), |acc, (k, r)| if *r > *acc.1 { (k, r) } else { acc });
    if rmax == 0.0 {
        return Ok(0.0);
    }
    if kmax == 0 || kmax + 1 == magnitudes.len() {
        return Err(Error::GrowthRatioUnbounded {
            detail: alloc::format!("largest ratio {rmax} sits at the sample end s = {}", magnitudes[kmax]),
        });
    }
    Ok(1.1 * rmax)
}

/// Result of maximizing `J/Φ` over a candidate family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub theta: f64,
    pub witness_index: usize,
    pub witness: ScalarField,
    pub candidates: usize,
    /// `1/θ̂`, the lower end of the admissible open λ interval
    pub lambda_lower: f64,
}

/// Radial bumps `A (1 − (r/w)²)²₊` about the box centre, sine products and
/// polynomial products, with amplitudes on a log grid `10^{-2} … 10^{3}`.
pub fn default_theta_family(grid: &Grid) -> Vec<ScalarField> {
    let d = grid.dim();
    let mut centre = [0.0; 3];
    let mut half = f64::INFINITY;
    for k in 0..d {
        centre[k] = 0.5 * (grid.lower()[k] + grid.upper()[k]);
        half = half.min(0.5 * (grid.upper()[k] - grid.lower()[k]));
    }
    let amplitudes: Vec<f64> = (0..=25).map(|k| fmath::powf(10.0, -2.0 + 0.2 * k as f64)).collect();
    let mut shapes: Vec<ScalarField> = Vec::new();
    for frac in [0.3, 0.5, 0.7, 0.85, 1.0] {
        let w = frac * half;
        shapes.push(ScalarField::from_fn_dirichlet(*grid, |x| {
            let r2: f64 = (0..d).map(|k| (x[k] - centre[k]) * (x[k] - centre[k])).sum::<f64>() / (w * w);
            if r2 < 1.0 {
                (1.0 - r2) * (1.0 - r2)
            } else {
                0.0
            }
        }));
    }
    shapes.push(ScalarField::from_fn_dirichlet(*grid, |x| {
        (0..d)
            .map(|k| fmath::sin(core::f64::consts::PI * (x[k] - grid.lower()[k]) / (grid.upper()[k] - grid.lower()[k])))
            .product()
    }));
    shapes.push(ScalarField::from_fn_dirichlet(*grid, |x| {
        (0..d)
            .map(|k| {
                let (a, b) = (grid.lower()[k], grid.upper()[k]);
                4.0 * (x[k] - a) * (b - x[k]) / ((b - a) * (b - a))
            })
            .product()
    }));
    let mut out = Vec::with_capacity(shapes.len() * amplitudes.len());
    for s in &shapes {
        for &a in &amplitudes {
            out.push(s.scaled(a));
        }
    }
    out
}

/// `θ̂ = max J/Φ` over `family`.
pub fn estimate_theta(
    model: &dyn NonlinearityModel,
    exps: &ExponentField,
    family: &[ScalarField],
    eps_reg: f64,
) -> Result<ThetaEstimate> {
    let first = family.first().ok_or_else(|| Error::InvalidParameter("empty candidate family".into()))?;
    let grid = *first.grid();
    grid.check_len(exps.len())?;
    let asm = PhiAssembly::new(&grid);
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (i, u) in family.iter().enumerate() {
        grid.check_len(u.values().len())?;
        let ph = asm.eval(u.values(), exps.p(), eps_reg, None);
        if ph <= 0.0 {
            continue;
        }
        let r = j_functional(u, model) / ph;
        if r > best.0 {
            best = (r, i);
        }
    }
    let theta = best.0.max(0.0);
    if !(theta > 0.0) {
        return Err(Error::ThetaNotWitnessed { theta });
    }
    Ok(ThetaEstimate {
        theta,
        witness_index: best.1,
        witness: family[best.1].clone(),
        candidates: family.len(),
        lambda_lower: 1.0 / theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{LinearModel, RationalCubic, ZeroModel};
    use crate::validate_exponents;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model_exps(g: &Grid) -> ExponentField {
        let p: Vec<f64> = (0..g.len()).map(|i| 1.5 + 0.3 * g.coords(i)[0]).collect();
        validate_exponents(&p, &vec![20.0; g.len()], 2).unwrap()
    }

    fn tn(e: &ExponentField) -> TruncatedNonlinearity {
        TruncatedNonlinearity::new(3.0, e).unwrap()
    }

    #[test]
    fn phi_examples() {
        let g = Grid::unit(1, 257).unwrap();
        let e2 = validate_exponents(&vec![1.9; g.len()], &vec![60.0; g.len()], 2).unwrap();
        let zero = ScalarField::zeros(g);
        assert_eq!(phi(&zero, &e2, DEFAULT_EPS_REG).unwrap(), 0.0);

        // p ≡ 2 cannot be validated with N = 2; evaluate the assembly directly
        let asm = PhiAssembly::new(&g);
        let u = ScalarField::from_fn(g, |x| x[0] * (1.0 - x[0]));
        let v = asm.eval(u.values(), &vec![2.0; g.len()], 0.0, None);
        // midpoint rule of (1-2x)^2 / 2: 1/6 - h^2/6
        let h = g.spacing()[0];
        assert_relative_eq!(v, 1.0 / 6.0 - h * h / 6.0, max_relative = 1e-12);
        assert!((v - 1.0 / 6.0).abs() < 1e-5);

        let p1 = phi(&u, &e2, 0.0).unwrap();
        let p3 = phi(&u.scaled(3.0), &e2, 0.0).unwrap();
        assert_relative_eq!(p3, 3f64.powf(1.9) * p1, max_relative = 1e-12);
    }

    #[test]
    fn p2_residual_is_laplacian_stencil() {
        for dim in [1usize, 2] {
            let g = Grid::unit(dim, 9).unwrap();
            let p = vec![2.0; g.len()];
            let asm = PhiAssembly::new(&g);
            let u = ScalarField::from_fn_dirichlet(g, |x| x.iter().map(|t| fmath::sin(3.0 * t) + t * t).product());
            let mut grad = vec![0.0; g.len()];
            asm.eval(u.values(), &p, 0.0, Some(&mut grad));
            let v = u.values();
            for i in g.interior_nodes() {
                let mut lap = 0.0;
                for k in 0..dim {
                    let s = g.stride(k);
                    let h = g.spacing()[k];
                    lap += (v[i + s] - 2.0 * v[i] + v[i - s]) / (h * h);
                }
                assert_relative_eq!(grad[i], -lap * g.cell_volume(), max_relative = 1e-11, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn zero_field_is_a_solution() {
        let g = Grid::unit(2, 12).unwrap();
        let e = model_exps(&g);
        let m = RationalCubic::new(1.0, 2.8).unwrap();
        let t = tn(&e);
        let r = residual(&ScalarField::zeros(g), &e, &m, &t, 3.0, 0.5, DEFAULT_EPS_REG).unwrap();
        assert_eq!(r.sup_norm, 0.0);
        assert!(r.entries.iter().all(|x| *x == 0.0));
    }

    fn smooth_field(g: &Grid, rng: &mut ChaCha8Rng) -> ScalarField {
        let modes: Vec<(f64, f64, f64)> =
            (0..4).map(|_| (rng.gen_range(0.2..2.0), rng.gen_range(1.0..4.0), rng.gen_range(1.0..4.0))).collect();
        ScalarField::from_fn_dirichlet(*g, |x| {
            modes
                .iter()
                .map(|(a, kx, ky)| {
                    a * fmath::sin(kx.round() * core::f64::consts::PI * x[0])
                        * fmath::sin(ky.round() * core::f64::consts::PI * x[1])
                })
                .sum()
        })
    }

    #[test]
    fn gradient_consistency() {
        let g = Grid::unit(2, 24).unwrap();
        let e = model_exps(&g);
        let m = RationalCubic::new(1.0, 2.8).unwrap();
        let t = tn(&e);
        let en = Energy::new(&g, &e, &m, &t, 4.0, 0.01, DEFAULT_EPS_REG).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let u = smooth_field(&g, &mut rng);
            let d = smooth_field(&g, &mut rng);
            let r = en.residual(u.values());
            let dot: f64 = r.entries.iter().zip(d.values()).map(|(a, b)| a * b).sum();
            let h = 1e-5;
            let up: Vec<f64> = u.values().iter().zip(d.values()).map(|(a, b)| a + h * b).collect();
            let um: Vec<f64> = u.values().iter().zip(d.values()).map(|(a, b)| a - h * b).collect();
            let fd = (en.total(&up) - en.total(&um)) / (2.0 * h);
            assert!((fd - dot).abs() / fd.abs().max(1.0) <= 1e-5, "{fd} vs {dot}");
        }
    }

    #[test]
    fn mu_zero_ignores_truncation() {
        let g = Grid::unit(2, 10).unwrap();
        let e = model_exps(&g);
        let m = RationalCubic::new(1.0, 2.8).unwrap();
        let (t1, t2) = (TruncatedNonlinearity::new(2.0, &e).unwrap(), TruncatedNonlinearity::new(9.0, &e).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = smooth_field(&g, &mut rng).scaled(3.0);
        let a = residual(&u, &e, &m, &t1, 2.0, 0.0, DEFAULT_EPS_REG).unwrap();
        let b = residual(&u, &e, &m, &t2, 2.0, 0.0, DEFAULT_EPS_REG).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn report_identity_and_psi() {
        let g = Grid::unit(2, 10).unwrap();
        let e = model_exps(&g);
        let m = RationalCubic::new(1.0, 2.8).unwrap();
        let t = tn(&e);
        let en = Energy::new(&g, &e, &m, &t, 2.5, 0.3, DEFAULT_EPS_REG).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = smooth_field(&g, &mut rng);
        let r = en.report(u.values());
        assert_eq!(r.total, r.phi - r.lambda * r.j - r.mu * r.psi);
        assert_eq!(psi_functional(&u, &t).unwrap(), psi_functional(&u.negated(), &t).unwrap());
        assert!(r.psi >= 0.0 && r.phi > 0.0);
    }

    #[test]
    fn psi_and_j_examples() {
        let g = Grid::unit(1, 33).unwrap();
        let t = TruncatedNonlinearity::from_samples(2.0, &vec![6.0; g.len()], 2.0).unwrap();
        let two = ScalarField::from_fn(g, |_| 2.0);
        assert_relative_eq!(psi_functional(&two, &t).unwrap(), 32.0 / 3.0, max_relative = 1e-14);
        assert_eq!(psi_functional(&ScalarField::zeros(g), &t).unwrap(), 0.0);

        let m = RationalCubic::new(1.0, 2.8).unwrap();
        let one = ScalarField::from_fn(g, |_| 1.0);
        // F(1) by a fine composite Simpson rule
        let n = 20000;
        let f = |s: f64| s * s * s / (1.0 + s.powf(2.8));
        let hh = 1.0 / n as f64;
        let mut simpson = f(0.0) + f(1.0);
        for k in 1..n {
            simpson += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * hh);
        }
        simpson *= hh / 3.0;
        assert_relative_eq!(j_functional(&one, &m), simpson, max_relative = 1e-10);
        assert_eq!(j_functional(&ScalarField::zeros(g), &m), 0.0);
    }

    #[test]
    fn j_is_lipschitz_on_bounded_fields() {
        let g = Grid::unit(2, 10).unwrap();
        let m = RationalCubic::new(1.0, 2.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // |F'| = |f| ≤ sup over [-M, M]; with |Ω| = 1 this bounds the Lipschitz constant
        let big_m: f64 = 4.0;
        let lip = (0..=4000).map(|k| m.f(0, -big_m + 2.0 * big_m * k as f64 / 4000.0).abs()).fold(0.0, f64::max);
        for _ in 0..10 {
            let u = ScalarField::from_fn_dirichlet(g, |_| rng.gen_range(-3.0..3.0));
            let du = ScalarField::from_fn_dirichlet(g, |_| rng.gen_range(-0.5..0.5));
            let v = ScalarField::new(g, u.values().iter().zip(du.values()).map(|(a, b)| a + b).collect()).unwrap();
            assert!((j_functional(&v, &m) - j_functional(&u, &m)).abs() <= lip * du.sup_norm() * 1.000001);
        }
    }

    #[test]
    fn growth_constant_examples() {
        let g = Grid::unit(2, 9).unwrap();
        let e = model_exps(&g);
        let s = default_growth_samples();
        assert_eq!(combined_growth_constant(&ZeroModel, &e, &s).unwrap(), 0.0);
        let m = RationalCubic::new(1.0, 2.8).unwrap();
        let c = combined_growth_constant(&m, &e, &s).unwrap();
        // dense oracle over p in [1.5, 1.8] and s
        let mut best: f64 = 0.0;
        for i in 0..g.len() {
            let p = e.p()[i];
            for k in 0..=24000 {
                let x = 10f64.powf(-6.0 + k as f64 / 2000.0);
                best = best.max(x.powi(3) / (1.0 + x.powf(2.8)) / x.powf(p - 1.0));
            }
        }
        assert!(c >= best * 1.1 * (1.0 - 1e-3) && c <= best * 1.1 * (1.0 + 1e-9));
        let m2 = RationalCubic::new(2.0, 2.8).unwrap();
        assert_relative_eq!(combined_growth_constant(&m2, &e, &s).unwrap(), 2.0 * c, max_relative = 1e-12);
        let lin = LinearModel { amplitude: 1.0 };
        assert!(matches!(combined_growth_constant(&lin, &e, &s), Err(Error::GrowthRatioUnbounded { .. })));
    }

    #[test]
    fn theta_examples() {
        let g = Grid::unit(2, 17).unwrap();
        let e = model_exps(&g);
        let fam = default_theta_family(&g);
        assert!(fam.iter().all(|u| u.satisfies_dirichlet()));
        assert!(matches!(
            estimate_theta(&ZeroModel, &e, &fam, DEFAULT_EPS_REG),
            Err(Error::ThetaNotWitnessed { .. })
        ));
        let m = RationalCubic::new(1.0, 2.8).unwrap();
        let th = estimate_theta(&m, &e, &fam, DEFAULT_EPS_REG).unwrap();
        assert!(th.theta > 0.0);
        assert_relative_eq!(th.lambda_lower * th.theta, 1.0, max_relative = 1e-15);
        let small = estimate_theta(&m, &e, &fam[..fam.len() / 2], DEFAULT_EPS_REG).unwrap();
        assert!(small.theta <= th.theta);
    }
}
