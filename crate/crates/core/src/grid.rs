//! Tensor-product box grids, nodal fields, discrete gradients, quadrature and
//! level sets on balls.
//!
//! Nodes are numbered with axis 0 running fastest. All quadrature uses the
//! trapezoid weights of the tensor grid, which coincide with averaging nodal
//! values over cell corners.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::fmath;
use crate::{Error, Result};

pub const MAX_DIM: usize = 3;

/// Axis-aligned box `Π [lower_k, upper_k]` sampled with `nodes[k]` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    lower: [f64; MAX_DIM],
    upper: [f64; MAX_DIM],
    nodes: [usize; MAX_DIM],
    spacing: [f64; MAX_DIM],
}

impl Grid {
    pub fn new(lower: &[f64], upper: &[f64], nodes: &[usize]) -> Result<Self> {
        let dim = lower.len();
        if !(1..=MAX_DIM).contains(&dim) || upper.len() != dim || nodes.len() != dim {
            return Err(Error::InvalidGrid(alloc::format!(
                "dimension must be 1..=3 with matching extents (got {}, {}, {})",
                lower.len(),
                upper.len(),
                nodes.len()
            )));
        }
        let mut g = Grid { dim, lower: [0.0; 3], upper: [0.0; 3], nodes: [1; 3], spacing: [1.0; 3] };
        for k in 0..dim {
            if nodes[k] < 3 {
                return Err(Error::GridTooCoarse { axis: k, nodes: nodes[k] });
            }
            if !(lower[k].is_finite() && upper[k].is_finite() && upper[k] > lower[k]) {
                return Err(Error::InvalidGrid(alloc::format!("axis {k} has empty extent")));
            }
            g.lower[k] = lower[k];
            g.upper[k] = upper[k];
            g.nodes[k] = nodes[k];
            g.spacing[k] = (upper[k] - lower[k]) / (nodes[k] - 1) as f64;
        }
        Ok(g)
    }

    /// Unit cube `[0,1]^dim` with `n` nodes per axis.
    pub fn unit(dim: usize, n: usize) -> Result<Self> {
        Self::new(&[0.0; 3][..dim.min(3)], &[1.0; 3][..dim.min(3)], &[n; 3][..dim.min(3)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower[..self.dim]
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper[..self.dim]
    }

    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.nodes[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn len(&self) -> usize {
        self.nodes[..self.dim].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing[..self.dim].iter().product()
    }

    pub fn domain_volume(&self) -> f64 {
        (0..self.dim).map(|k| self.upper[k] - self.lower[k]).product()
    }

    /// Stride of axis `k` in the linear node numbering.
    pub fn stride(&self, k: usize) -> usize {
        self.nodes[..k].iter().product()
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut m = [0; MAX_DIM];
        for (k, slot) in m.iter_mut().enumerate().take(self.dim) {
            *slot = idx % self.nodes[k];
            idx /= self.nodes[k];
        }
        m
    }

    pub fn linear_index(&self, m: &[usize]) -> usize {
        let mut idx = 0;
        for k in (0..self.dim).rev() {
            idx = idx * self.nodes[k] + m[k];
        }
        idx
    }

    fn axis_coord(&self, k: usize, m: usize) -> f64 {
        if m + 1 == self.nodes[k] {
            self.upper[k]
        } else {
            self.lower[k] + m as f64 * self.spacing[k]
        }
    }

    /// Node coordinates; the last node of each axis sits exactly on `upper`.
    pub fn coords(&self, idx: usize) -> [f64; MAX_DIM] {
        let m = self.multi_index(idx);
        let mut x = [0.0; MAX_DIM];
        for k in 0..self.dim {
            x[k] = self.axis_coord(k, m[k]);
        }
        x
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let m = self.multi_index(idx);
        (0..self.dim).any(|k| m[k] == 0 || m[k] + 1 == self.nodes[k])
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.is_boundary(i)).collect()
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| !self.is_boundary(i))
    }

    /// Trapezoid weight of node `idx`.
    pub fn weight(&self, idx: usize) -> f64 {
        let m = self.multi_index(idx);
        let mut w = self.cell_volume();
        for k in 0..self.dim {
            if m[k] == 0 || m[k] + 1 == self.nodes[k] {
                w *= 0.5;
            }
        }
        w
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// Distance from `center` to the nearest face of the box (negative if outside).
    pub fn distance_to_boundary(&self, center: &[f64]) -> f64 {
        (0..self.dim)
            .map(|k| (center[k] - self.lower[k]).min(self.upper[k] - center[k]))
            .fold(f64::INFINITY, f64::min)
    }

    /// `B_r(center) ⊂⊂ Ω` for the box.
    pub fn ball_strictly_inside(&self, center: &[f64], radius: f64) -> bool {
        radius > 0.0 && self.distance_to_boundary(center) > radius
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::FieldMismatch { expected: self.len(), got: n });
        }
        Ok(())
    }

    /// Nodes with Euclidean distance to `center` strictly below `radius`.
    pub fn nodes_in_ball(&self, center: &[f64], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let mut lo = [0usize; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        for k in 0..self.dim {
            let a = ((center[k] - radius - self.lower[k]) / self.spacing[k]).max(0.0);
            let b = ((center[k] + radius - self.lower[k]) / self.spacing[k]).max(0.0);
            lo[k] = (fmath::floor(a) as usize).min(self.nodes[k] - 1);
            hi[k] = ((fmath::floor(b) as usize) + 1).min(self.nodes[k] - 1);
        }
        let r2 = radius * radius;
        let mut m = lo;
        loop {
            let mut d2 = 0.0;
            for k in 0..self.dim {
                let x = self.axis_coord(k, m[k]);
                d2 += (x - center[k]) * (x - center[k]);
            }
            if d2 < r2 {
                out.push(self.linear_index(&m));
            }
            // odometer increment over the bounding box
            let mut k = 0;
            loop {
                if k == self.dim {
                    out.sort_unstable();
                    return out;
                }
                if m[k] < hi[k] {
                    m[k] += 1;
                    break;
                }
                m[k] = lo[k];
                k += 1;
            }
        }
    }
}

/// Nodal samples on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        ScalarField { values: vec![0.0; grid.len()], grid }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i)[..grid.dim()])).collect();
        ScalarField { grid, values }
    }

    /// Like [`ScalarField::from_fn`] but zero on the boundary layer.
    pub fn from_fn_dirichlet(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| if grid.is_boundary(i) { 0.0 } else { f(&grid.coords(i)[..grid.dim()]) })
            .collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn satisfies_dirichlet(&self) -> bool {
        (0..self.grid.len()).all(|i| !self.grid.is_boundary(i) || self.values[i] == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        ScalarField { grid: self.grid, values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete L² norm with trapezoid weights.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().enumerate().map(|(i, v)| self.grid.weight(i) * v * v).sum();
        fmath::sqrt(s)
    }

    pub fn l2_distance(&self, other: &ScalarField) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(i, (a, b))| self.grid.weight(i) * (a - b) * (a - b))
            .sum();
        fmath::sqrt(s)
    }
}

/// Central differences at interior nodes, second-order one-sided differences on
/// the outer layer of each axis. Entries beyond `grid.dim()` are zero.
pub fn gradient(u: &ScalarField) -> Vec<[f64; MAX_DIM]> {
    let g = u.grid();
    let v = u.values();
    let mut out = vec![[0.0; MAX_DIM]; g.len()];
    for (idx, slot) in out.iter_mut().enumerate() {
        let m = g.multi_index(idx);
        for k in 0..g.dim() {
            let st = g.stride(k);
            let h = g.spacing()[k];
            let n = g.nodes_per_axis()[k];
            slot[k] = if m[k] == 0 {
                (-3.0 * v[idx] + 4.0 * v[idx + st] - v[idx + 2 * st]) / (2.0 * h)
            } else if m[k] + 1 == n {
                (3.0 * v[idx] - 4.0 * v[idx - st] + v[idx - 2 * st]) / (2.0 * h)
            } else {
                (v[idx + st] - v[idx - st]) / (2.0 * h)
            };
        }
    }
    out
}

/// Pointwise Euclidean magnitude of [`gradient`].
pub fn gradient_magnitude(u: &ScalarField) -> Vec<f64> {
    gradient(u)
        .iter()
        .map(|d| fmath::sqrt(d.iter().map(|x| x * x).sum()))
        .collect()
}

/// Trapezoid-rule integral of nodal samples.
pub fn integrate(f: &[f64], grid: &Grid) -> Result<f64> {
    grid.check_len(f.len())?;
    Ok(f.iter().enumerate().map(|(i, v)| grid.weight(i) * v).sum())
}

/// The set `A_{l,s} = { x ∈ B_s(center) : u(x) > l }` resolved at nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSetMeasure {
    pub level: f64,
    pub radius: f64,
    pub center: Vec<f64>,
    /// `nodes.len() × cell volume`
    pub measure: f64,
    pub nodes: Vec<usize>,
}

/// Enumerates `A_{l,s}`. With `strict`, the ball must be compactly inside the box.
pub fn level_set_measure(
    u: &ScalarField,
    level: f64,
    radius: f64,
    center: &[f64],
    strict: bool,
) -> Result<LevelSetMeasure> {
    let g = u.grid();
    if !(radius > 0.0) || center.len() != g.dim() {
        return Err(Error::InvalidParameter(alloc::format!(
            "level set needs radius > 0 and a {}-dimensional center",
            g.dim()
        )));
    }
    if strict && !g.ball_strictly_inside(center, radius) {
        return Err(Error::BallContainment { radius });
    }
    let nodes: Vec<usize> =
        g.nodes_in_ball(center, radius).into_iter().filter(|&i| u.values()[i] > level).collect();
    Ok(LevelSetMeasure {
        level,
        radius,
        center: center.to_vec(),
        measure: nodes.len() as f64 * g.cell_volume(),
        nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spacing_and_boundary_layers() {
        let g = Grid::new(&[0.0, -1.0], &[1.0, 1.0], &[11, 21]).unwrap();
        assert_abs_diff_eq!(g.spacing()[0], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(g.spacing()[1], 0.1, epsilon = 1e-15);
        let mask = g.boundary_mask();
        assert_eq!(mask.iter().filter(|b| **b).count(), 2 * 11 + 2 * 19);
        assert_abs_diff_eq!(g.weights().iter().sum::<f64>(), 2.0, epsilon = 1e-13);
        assert!(matches!(Grid::unit(2, 2), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn index_round_trip() {
        let g = Grid::new(&[0.0; 3], &[1.0; 3], &[4, 5, 6]).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.linear_index(&g.multi_index(i)), i);
        }
        assert_eq!(g.stride(2), 20);
    }

    #[test]
    fn gradient_of_constant_linear_quadratic() {
        let g = Grid::unit(1, 17).unwrap();
        let c = ScalarField::from_fn(g, |_| 3.0);
        assert!(gradient(&c).iter().all(|d| d[0] == 0.0));
        let lin = ScalarField::from_fn(g, |x| x[0]);
        for (i, d) in gradient(&lin).iter().enumerate() {
            assert_abs_diff_eq!(d[0], 1.0, epsilon = 1e-12);
            let _ = i;
        }
        let quad = ScalarField::from_fn(g, |x| x[0] * x[0]);
        for (i, d) in gradient(&quad).iter().enumerate() {
            assert_abs_diff_eq!(d[0], 2.0 * g.coords(i)[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn integrate_examples() {
        let g1 = Grid::unit(1, 33).unwrap();
        assert_abs_diff_eq!(integrate(&vec![1.0; g1.len()], &g1).unwrap(), 1.0, epsilon = 1e-14);
        let x = ScalarField::from_fn(g1, |x| x[0]);
        assert_abs_diff_eq!(integrate(x.values(), &g1).unwrap(), 0.5, epsilon = 1e-12);
        let g2 = Grid::unit(2, 9).unwrap();
        assert_abs_diff_eq!(integrate(&vec![1.0; g2.len()], &g2).unwrap(), 1.0, epsilon = 1e-14);
        assert!(matches!(integrate(&[1.0; 3], &g2), Err(Error::FieldMismatch { .. })));
    }

    #[test]
    fn level_set_examples() {
        let g = Grid::unit(1, 101).unwrap();
        let zero = ScalarField::zeros(g);
        let a = level_set_measure(&zero, 1.0, 0.3, &[0.5], true).unwrap();
        assert_eq!(a.measure, 0.0);
        assert!(a.nodes.is_empty());

        let three = ScalarField::from_fn(g, |_| 3.0);
        let full = level_set_measure(&three, 1.0, 10.0, &[0.5], false).unwrap();
        assert!((full.measure - 1.0).abs() <= g.cell_volume() + 1e-12);

        let x = ScalarField::from_fn(g, |x| x[0]);
        let a = level_set_measure(&x, 0.5, 0.4, &[0.5], true).unwrap();
        // brute-force enumeration over nodes
        let expected: Vec<usize> = (0..g.len())
            .filter(|&i| {
                let xi = g.coords(i)[0];
                (xi - 0.5).abs() < 0.4 && xi > 0.5
            })
            .collect();
        assert_eq!(a.nodes, expected);
        assert!((a.measure - 0.4).abs() <= 2.0 * g.cell_volume());
        assert!(a.nodes.iter().all(|&i| g.coords(i)[0] > 0.5 && g.coords(i)[0] < 0.9));

        assert!(matches!(
            level_set_measure(&x, 0.5, 0.5, &[0.5], true),
            Err(Error::BallContainment { .. })
        ));
    }

    #[test]
    fn ball_enumeration_matches_brute_force() {
        let g = Grid::new(&[0.0, 0.0], &[1.0, 2.0], &[13, 17]).unwrap();
        let center = [0.37, 1.1];
        for r in [0.05, 0.2, 0.61, 3.0] {
            let brute: Vec<usize> = (0..g.len())
                .filter(|&i| {
                    let x = g.coords(i);
                    (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2) < r * r
                })
                .collect();
            assert_eq!(g.nodes_in_ball(&center, r), brute);
        }
    }
}
