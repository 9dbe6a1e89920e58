use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ReducedDomain;

pub const MIN_NODES: usize = 16;

/// Tensor-product grid over a (radial, angular) rectangle.
///
/// Downstairs this is the uniform (ρ, φ) grid on [R1,R2] × [0,π]; the
/// upstairs grid is its pointwise image r = √(2ρ), θ = φ/2 and is therefore
/// non-uniform in the radial direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub radial: Vec<f64>,
    pub angular: Vec<f64>,
}

impl Grid {
    /// Uniform grid on [R1,R2] × [0,π] for the reduced problem.
    pub fn reduced(dom: &ReducedDomain, n_radial: usize, n_angular: usize) -> Result<Arc<Grid>> {
        if n_radial < MIN_NODES || n_angular < MIN_NODES {
            return Err(Error::Param(format!(
                "grid must have at least {MIN_NODES} nodes per direction, got {n_radial}x{n_angular}"
            )));
        }
        let radial = linspace(dom.r1, dom.r2, n_radial);
        let angular = linspace(0.0, std::f64::consts::PI, n_angular);
        Ok(Arc::new(Grid { radial, angular }))
    }

    /// Image of a reduced grid under the lift r = √(2ρ), θ = φ/2.
    pub fn lifted(reduced: &Grid) -> Arc<Grid> {
        Arc::new(Grid {
            radial: reduced.radial.iter().map(|&rho| (2.0 * rho).sqrt()).collect(),
            angular: reduced.angular.iter().map(|&phi| 0.5 * phi).collect(),
        })
    }

    pub fn n_radial(&self) -> usize {
        self.radial.len()
    }

    pub fn n_angular(&self) -> usize {
        self.angular.len()
    }

    pub fn len(&self) -> usize {
        self.radial.len() * self.angular.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.angular.len() + j
    }

    /// Radial spacing of a uniform grid (first gap; uniform by construction).
    pub fn radial_spacing(&self) -> f64 {
        self.radial[1] - self.radial[0]
    }

    pub fn angular_spacing(&self) -> f64 {
        self.angular[1] - self.angular[0]
    }

    fn same_shape(&self, other: &Grid) -> bool {
        self.radial.len() == other.radial.len() && self.angular.len() == other.angular.len()
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n as f64 - 1.0);
    let mut v: Vec<f64> = (0..n).map(|k| lo + k as f64 * h).collect();
    v[n - 1] = hi;
    v
}

/// Real-valued function sampled on a [`Grid`], stored row-major over
/// (radial index, angular index).
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Arc<Grid>) -> Field {
        let n = grid.len();
        Field {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Field {
        let mut values = Vec::with_capacity(grid.len());
        for &x in &grid.radial {
            for &y in &grid.angular {
                values.push(f(x, y));
            }
        }
        Field { grid, values }
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "value buffer has {} entries for a {}x{} grid",
                values.len(),
                grid.n_radial(),
                grid.n_angular()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("field contains non-finite entries".into()));
        }
        Ok(Field { grid, values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.values[k] = v;
    }

    /// Checks that `other` lives on a grid with identical nodes.
    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) {
            return Ok(());
        }
        if !self.grid.same_shape(&other.grid)
            || self.grid.radial != other.grid.radial
            || self.grid.angular != other.grid.angular
        {
            return Err(Error::Shape("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// In-place y ← y + c·x.
    pub fn axpy(&mut self, c: f64, x: &Field) {
        for (y, &v) in self.values.iter_mut().zip(x.values.iter()) {
            *y += c * v;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for y in self.values.iter_mut() {
            *y *= c;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn abs(&self) -> Field {
        self.map(f64::abs)
    }

    /// Positive part max(v, 0).
    pub fn positive_part(&self) -> Field {
        self.map(|v| v.max(0.0))
    }

    /// Negative part max(−v, 0), so that v = v⁺ − v⁻.
    pub fn negative_part(&self) -> Field {
        self.map(|v| (-v).max(0.0))
    }

    /// Zeroes the radial Dirichlet rows (first and last radial index).
    pub fn zero_radial_boundary(&mut self) {
        let (nr, na) = (self.grid.n_radial(), self.grid.n_angular());
        for j in 0..na {
            let k0 = self.grid.idx(0, j);
            let k1 = self.grid.idx(nr - 1, j);
            self.values[k0] = 0.0;
            self.values[k1] = 0.0;
        }
    }

    pub fn radial_boundary_max_abs(&self) -> f64 {
        let (nr, na) = (self.grid.n_radial(), self.grid.n_angular());
        let mut m = 0.0_f64;
        for j in 0..na {
            m = m.max(self.at(0, j).abs()).max(self.at(nr - 1, j).abs());
        }
        m
    }

    /// Reflects the field in the angular direction (φ → π − φ downstairs).
    pub fn angular_flip(&self) -> Field {
        let (nr, na) = (self.grid.n_radial(), self.grid.n_angular());
        let mut out = Field::zeros(self.grid.clone());
        for i in 0..nr {
            for j in 0..na {
                out.set(i, j, self.at(i, na - 1 - j));
            }
        }
        out
    }

    /// Bilinear interpolation at an arbitrary in-range point.
    pub fn interp(&self, x: f64, y: f64) -> f64 {
        let i = bracket(&self.grid.radial, x);
        let j = bracket(&self.grid.angular, y);
        let (x0, x1) = (self.grid.radial[i], self.grid.radial[i + 1]);
        let (y0, y1) = (self.grid.angular[j], self.grid.angular[j + 1]);
        let tx = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
        let ty = ((y - y0) / (y1 - y0)).clamp(0.0, 1.0);
        let v00 = self.at(i, j);
        let v01 = self.at(i, j + 1);
        let v10 = self.at(i + 1, j);
        let v11 = self.at(i + 1, j + 1);
        v00 * (1.0 - tx) * (1.0 - ty) + v10 * tx * (1.0 - ty) + v01 * (1.0 - tx) * ty + v11 * tx * ty
    }
}

/// Largest index i with nodes[i] <= x < nodes[i+1] (clamped to valid cells).
fn bracket(nodes: &[f64], x: f64) -> usize {
    let n = nodes.len();
    match nodes.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => i.min(n - 2),
        Err(0) => 0,
        Err(i) => (i - 1).min(n - 2),
    }
}

/// Second-order finite-difference radial derivative on a possibly
/// non-uniform grid (central 3-point inside, one-sided at the ends).
pub fn radial_derivative(f: &Field) -> Field {
    let g = f.grid().clone();
    let (nr, na) = (g.n_radial(), g.n_angular());
    let x = &g.radial;
    let mut out = Field::zeros(g.clone());
    for j in 0..na {
        for i in 0..nr {
            let d = if i == 0 {
                one_sided(x[0], x[1], x[2], f.at(0, j), f.at(1, j), f.at(2, j))
            } else if i == nr - 1 {
                one_sided(
                    x[nr - 1],
                    x[nr - 2],
                    x[nr - 3],
                    f.at(nr - 1, j),
                    f.at(nr - 2, j),
                    f.at(nr - 3, j),
                )
            } else {
                central(
                    x[i] - x[i - 1],
                    x[i + 1] - x[i],
                    f.at(i - 1, j),
                    f.at(i, j),
                    f.at(i + 1, j),
                )
            };
            out.set(i, j, d);
        }
    }
    out
}

/// Same for the angular direction.
pub fn angular_derivative(f: &Field) -> Field {
    let g = f.grid().clone();
    let (nr, na) = (g.n_radial(), g.n_angular());
    let y = &g.angular;
    let mut out = Field::zeros(g.clone());
    for i in 0..nr {
        for j in 0..na {
            let d = if j == 0 {
                one_sided(y[0], y[1], y[2], f.at(i, 0), f.at(i, 1), f.at(i, 2))
            } else if j == na - 1 {
                one_sided(
                    y[na - 1],
                    y[na - 2],
                    y[na - 3],
                    f.at(i, na - 1),
                    f.at(i, na - 2),
                    f.at(i, na - 3),
                )
            } else {
                central(
                    y[j] - y[j - 1],
                    y[j + 1] - y[j],
                    f.at(i, j - 1),
                    f.at(i, j),
                    f.at(i, j + 1),
                )
            };
            out.set(i, j, d);
        }
    }
    out
}

#[inline]
fn central(hm: f64, hp: f64, fm: f64, f0: f64, fp: f64) -> f64 {
    (hm * hm * (fp - f0) + hp * hp * (f0 - fm)) / (hm * hp * (hm + hp))
}

#[inline]
fn one_sided(x0: f64, x1: f64, x2: f64, f0: f64, f1: f64, f2: f64) -> f64 {
    // Derivative at x0 from the quadratic through (x0,f0),(x1,f1),(x2,f2).
    let h1 = x1 - x0;
    let h2 = x2 - x0;
    (f1 - f0) * h2 / (h1 * (h2 - h1)) - (f2 - f0) * h1 / (h2 * (h2 - h1))
}

/// Grid metadata persisted next to binary field dumps.
///
/// Bounds always refer to the reduced (ρ, φ) rectangle; `kind` records which
/// parameterization the stored field values use.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridMeta {
    pub n_radial: usize,
    pub n_angular: usize,
    pub r1: f64,
    pub r2: f64,
    /// "reduced" for the uniform downstairs grid, "lifted" for its image.
    pub kind: String,
}

impl GridMeta {
    pub fn reduced(grid: &Grid) -> GridMeta {
        GridMeta {
            n_radial: grid.n_radial(),
            n_angular: grid.n_angular(),
            r1: grid.radial[0],
            r2: grid.radial[grid.n_radial() - 1],
            kind: "reduced".into(),
        }
    }

    /// Metadata for the lift of `reduced_grid`.
    pub fn lifted(reduced_grid: &Grid) -> GridMeta {
        let mut meta = GridMeta::reduced(reduced_grid);
        meta.kind = "lifted".into();
        meta
    }

    pub fn rebuild(&self) -> Result<Arc<Grid>> {
        let dom = ReducedDomain {
            r1: self.r1,
            r2: self.r2,
            n_dim: 0,
        };
        let reduced = Grid::reduced(&dom, self.n_radial, self.n_angular)?;
        match self.kind.as_str() {
            "reduced" => Ok(reduced),
            "lifted" => Ok(Grid::lifted(&reduced)),
            other => Err(Error::Config(format!("unknown grid kind '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn demo_grid() -> Arc<Grid> {
        let dom = ReducedDomain {
            r1: 0.5,
            r2: 2.0,
            n_dim: 3,
        };
        Grid::reduced(&dom, 32, 16).unwrap()
    }

    #[test]
    fn rejects_small_grids() {
        let dom = ReducedDomain {
            r1: 0.5,
            r2: 2.0,
            n_dim: 3,
        };
        assert!(Grid::reduced(&dom, 8, 32).is_err());
        assert!(Grid::reduced(&dom, 32, 8).is_err());
    }

    #[test]
    fn endpoints_included() {
        let g = demo_grid();
        assert_relative_eq!(g.radial[0], 0.5);
        assert_relative_eq!(g.radial[31], 2.0);
        assert_relative_eq!(g.angular[0], 0.0);
        assert_relative_eq!(g.angular[15], std::f64::consts::PI);
    }

    #[test]
    fn lifted_nodes_are_pointwise_images() {
        let g = demo_grid();
        let up = Grid::lifted(&g);
        for (r, rho) in up.radial.iter().zip(g.radial.iter()) {
            assert_relative_eq!(r * r, 2.0 * rho, epsilon = 1e-14);
        }
        for (th, ph) in up.angular.iter().zip(g.angular.iter()) {
            assert_relative_eq!(2.0 * th, *ph, epsilon = 1e-15);
        }
    }

    #[test]
    fn derivative_is_exact_on_quadratics() {
        let g = demo_grid();
        let up = Grid::lifted(&g); // non-uniform radial nodes
        let f = Field::from_fn(up.clone(), |r, _| r * r);
        let d = radial_derivative(&f);
        for i in 0..up.n_radial() {
            assert_relative_eq!(d.at(i, 3), 2.0 * up.radial[i], epsilon = 1e-10);
        }
        let f = Field::from_fn(up, |_, t| 3.0 * t * t - t);
        let d = angular_derivative(&f);
        for j in 0..16 {
            let t = d.grid().angular[j];
            assert_relative_eq!(d.at(5, j), 6.0 * t - 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn interp_reproduces_bilinear_data() {
        let g = demo_grid();
        let f = Field::from_fn(g, |x, y| 2.0 * x - 3.0 * y + 0.25);
        assert_relative_eq!(f.interp(0.77, 1.3), 2.0 * 0.77 - 3.0 * 1.3 + 0.25, epsilon = 1e-12);
        // node values hit exactly
        assert_relative_eq!(f.interp(0.5, 0.0), f.at(0, 0), epsilon = 1e-15);
    }

    #[test]
    fn flip_reverses_angular_axis() {
        let g = demo_grid();
        let f = Field::from_fn(g, |_, y| y);
        let r = f.angular_flip();
        let na = f.grid().n_angular();
        for j in 0..na {
            assert_relative_eq!(r.at(4, j), f.at(4, na - 1 - j));
        }
    }

    #[test]
    fn grid_meta_roundtrip() {
        let g = demo_grid();
        let meta = GridMeta::reduced(&g);
        let re = meta.rebuild().unwrap();
        assert_eq!(*re, *g);
        let up = Grid::lifted(&g);
        let meta = GridMeta::lifted(&g);
        let re = meta.rebuild().unwrap();
        assert_eq!(*re, *up);
    }
}
