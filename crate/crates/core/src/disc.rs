//! Discrete weighted Laplacians and quadrature on the tensor-product grids.
//!
//! Both operators are built in flux form: the radial and angular parts are
//! divided differences of face fluxes divided by exact cell masses of the
//! respective measure density.  This makes every operator exactly
//! self-adjoint in its weighted inner product and negative semidefinite,
//! while staying second-order consistent (including the pole rows, where the
//! vanishing angular weight regularizes the cot singularity automatically).
//!
//! The downstairs radial face weights are calibrated by a one-term recursion
//! so the stencil differentiates v = 2ρ exactly; combined with the exact
//! correspondence of the angular parts under θ = φ/2 this keeps the discrete
//! defect of Δ_{2m}u = 2ρ·Δ_{m+1}v at roundoff level for the coordinate
//! fields u = r² and u = r²cos2θ.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::params::unit_sphere_area;

/// 8-point Gauss–Legendre nodes/weights on [-1, 1].
const GL8: [(f64, f64); 8] = [
    (-0.9602898564975363, 0.1012285362903763),
    (-0.7966664774136267, 0.2223810344533745),
    (-0.5255324099163290, 0.3137066458778873),
    (-0.1834346424956498, 0.3626837833783620),
    (0.1834346424956498, 0.3626837833783620),
    (0.5255324099163290, 0.3137066458778873),
    (0.7966664774136267, 0.2223810344533745),
    (0.9602898564975363, 0.1012285362903763),
];

fn gauss_integral(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    GL8.iter().map(|&(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

/// Compensated summation; keeps long quadrature reductions at O(eps)
/// instead of O(n·eps), which the gradient finite-difference checks need.
#[derive(Default)]
pub(crate) struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Face positions (arithmetic midpoints) and per-node cell bounds.
fn faces_of(nodes: &[f64]) -> Vec<f64> {
    nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

fn cell_bounds(nodes: &[f64], faces: &[f64], i: usize) -> (f64, f64) {
    let lo = if i == 0 { nodes[0] } else { faces[i - 1] };
    let hi = if i + 1 == nodes.len() { nodes[nodes.len() - 1] } else { faces[i] };
    (lo, hi)
}

/// Geometry of one axially symmetric measure x^α·s(y) on a tensor grid:
/// exact cell masses and face weights for the flux-form Laplacian.
#[derive(Clone)]
pub(crate) struct Geometry {
    pub grid: Arc<Grid>,
    /// Exact radial cell masses ∫ x^α dx.
    pub radial_mass: Vec<f64>,
    /// Angular cell masses ∫ s(y) dy (pole cells are one-sided).
    pub angular_mass: Vec<f64>,
    /// Radial face weights (≈ x^α at faces).
    pub radial_face: Vec<f64>,
    /// Angular face weights s(y_face).
    pub angular_face: Vec<f64>,
    /// 1/x_i² metric factor of the angular part.
    pub inv_x2: Vec<f64>,
}

impl Geometry {
    /// Downstairs measure ρ^{N−1} sin^{N−2}φ with calibrated radial faces.
    fn downstairs(grid: Arc<Grid>, n_dim: u32) -> Geometry {
        let alpha = (n_dim - 1) as i32;
        let x = &grid.radial;
        let xf = faces_of(x);
        let radial_mass: Vec<f64> = (0..x.len())
            .map(|i| {
                let (lo, hi) = cell_bounds(x, &xf, i);
                (hi.powi(alpha + 1) - lo.powi(alpha + 1)) / (alpha + 1) as f64
            })
            .collect();
        // Face weights from the recursion A_f = A_{f-1} + (N-1)·R_i/x_i, anchored
        // at the first face; this keeps the stencil exact on v = 2ρ.
        let mut radial_face = vec![0.0; xf.len()];
        radial_face[0] = xf[0].powi(alpha);
        for i in 1..xf.len() {
            radial_face[i] = radial_face[i - 1] + alpha as f64 * radial_mass[i] / x[i];
        }
        let s = |phi: f64| phi.sin().powi(alpha - 1);
        let (angular_mass, angular_face) = angular_geometry(&grid.angular, s);
        let inv_x2 = x.iter().map(|&v| 1.0 / (v * v)).collect();
        Geometry {
            grid,
            radial_mass,
            angular_mass,
            radial_face,
            angular_face,
            inv_x2,
        }
    }

    /// Upstairs measure r^{2m−1} (cosθ sinθ)^{m−1}.
    fn upstairs(grid: Arc<Grid>, m: u32) -> Geometry {
        let alpha = (2 * m - 1) as i32;
        let x = &grid.radial;
        let xf = faces_of(x);
        let radial_mass: Vec<f64> = (0..x.len())
            .map(|i| {
                let (lo, hi) = cell_bounds(x, &xf, i);
                (hi.powi(alpha + 1) - lo.powi(alpha + 1)) / (alpha + 1) as f64
            })
            .collect();
        let radial_face: Vec<f64> = xf.iter().map(|&f| f.powi(alpha)).collect();
        let k = (m - 1) as i32;
        let s = move |theta: f64| (theta.cos() * theta.sin()).powi(k);
        let (angular_mass, angular_face) = angular_geometry(&grid.angular, s);
        let inv_x2 = x.iter().map(|&v| 1.0 / (v * v)).collect();
        Geometry {
            grid,
            radial_mass,
            angular_mass,
            radial_face,
            angular_face,
            inv_x2,
        }
    }

    /// w_ij = R_i·S_j node masses (2D measure, no sphere factors).
    pub fn node_mass(&self, i: usize, j: usize) -> f64 {
        self.radial_mass[i] * self.angular_mass[j]
    }
}

fn angular_geometry(y: &[f64], s: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
    let yf = faces_of(y);
    let mass: Vec<f64> = (0..y.len())
        .map(|j| {
            let (lo, hi) = cell_bounds(y, &yf, j);
            gauss_integral(lo, hi, &s)
        })
        .collect();
    let face: Vec<f64> = yf.iter().map(|&f| s(f)).collect();
    (mass, face)
}

/// A self-adjoint second-order operator sign·Δ_w + q on a grid, together
/// with the weight of the inner product in which it is symmetric and the
/// mass density of its generalized eigenproblem.
pub struct WeightedOperator {
    geom: Geometry,
    sign: f64,
    potential: Option<Vec<f64>>,
    /// Density B of the eigenproblem  L g = μ B g  (w-weighted): 1 for the
    /// plain Laplacians, 1/(2ρ) for linearizations of the reduced problem.
    eigen_mass: Vec<f64>,
    symmetry_defect: f64,
}

impl WeightedOperator {
    fn new(geom: Geometry, sign: f64, potential: Option<Vec<f64>>) -> WeightedOperator {
        let n = geom.grid.len();
        let mut op = WeightedOperator {
            geom,
            sign,
            potential,
            eigen_mass: vec![1.0; n],
            symmetry_defect: 0.0,
        };
        op.symmetry_defect = op.measure_symmetry_defect();
        op
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.geom.grid
    }

    pub fn eigen_mass(&self) -> &[f64] {
        &self.eigen_mass
    }

    pub(crate) fn set_eigen_mass(&mut self, density: Vec<f64>) {
        assert_eq!(density.len(), self.geom.grid.len());
        self.eigen_mass = density;
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn potential(&self) -> Option<&[f64]> {
        self.potential.as_deref()
    }

    /// Operator with flipped sign (−L); keeps weights and eigen mass.
    pub fn flipped(&self) -> WeightedOperator {
        let mut op = self.variant(
            -self.sign,
            self.potential
                .as_ref()
                .map(|q| q.iter().map(|v| -v).collect()),
            None,
        );
        op.eigen_mass = self.eigen_mass.clone();
        op
    }

    /// New operator sharing this geometry with a different sign, potential,
    /// and (optionally) eigenproblem mass density.
    pub(crate) fn variant(
        &self,
        sign: f64,
        potential: Option<Vec<f64>>,
        eigen_mass: Option<Vec<f64>>,
    ) -> WeightedOperator {
        let mut op = WeightedOperator::new(self.geom.clone(), sign, potential);
        if let Some(em) = eigen_mass {
            op.set_eigen_mass(em);
        }
        op
    }

    /// Applies the operator; radial Dirichlet rows of the output are zero.
    pub fn apply(&self, f: &Field) -> Field {
        let mut out = Field::zeros(self.geom.grid.clone());
        self.apply_into(f.values(), out.values_mut());
        out
    }

    pub(crate) fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let g = &self.geom.grid;
        let (nr, na) = (g.n_radial(), g.n_angular());
        let x = &g.radial;
        let y = &g.angular;
        let geo = &self.geom;
        for j in 0..na {
            out[j] = 0.0;
            out[(nr - 1) * na + j] = 0.0;
        }
        for i in 1..nr - 1 {
            let rm = geo.radial_mass[i];
            let af_l = geo.radial_face[i - 1];
            let af_r = geo.radial_face[i];
            let dx_l = x[i] - x[i - 1];
            let dx_r = x[i + 1] - x[i];
            let ix2 = geo.inv_x2[i];
            let row = i * na;
            for j in 0..na {
                let k = row + j;
                let radial = (af_r * (v[k + na] - v[k]) / dx_r - af_l * (v[k] - v[k - na]) / dx_l) / rm;
                let angular = if j == 0 {
                    geo.angular_face[0] * (v[k + 1] - v[k]) / (y[1] - y[0])
                } else if j == na - 1 {
                    -geo.angular_face[na - 2] * (v[k] - v[k - 1]) / (y[na - 1] - y[na - 2])
                } else {
                    geo.angular_face[j] * (v[k + 1] - v[k]) / (y[j + 1] - y[j])
                        - geo.angular_face[j - 1] * (v[k] - v[k - 1]) / (y[j] - y[j - 1])
                };
                let mut val = self.sign * (radial + ix2 * angular / geo.angular_mass[j]);
                if let Some(q) = &self.potential {
                    val += q[k] * v[k];
                }
                out[k] = val;
            }
        }
    }

    /// ⟨Lf, g⟩_w with the operator's own 2D node masses.
    pub fn bilinear(&self, f: &Field, g: &Field) -> f64 {
        let lf = self.apply(f);
        let grid = &self.geom.grid;
        let (nr, na) = (grid.n_radial(), grid.n_angular());
        let mut acc = KahanSum::default();
        for i in 0..nr {
            for j in 0..na {
                acc.add(lf.at(i, j) * g.at(i, j) * self.geom.node_mass(i, j));
            }
        }
        acc.value()
    }

    /// Symmetry defect |⟨Lf,g⟩−⟨f,Lg⟩| / (‖f‖‖g‖) on seeded random interior fields.
    fn measure_symmetry_defect(&self) -> f64 {
        let grid = self.geom.grid.clone();
        let (nr, na) = (grid.n_radial(), grid.n_angular());
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_001);
        let mut worst = 0.0_f64;
        for _ in 0..2 {
            let mut f = Field::zeros(grid.clone());
            let mut g = Field::zeros(grid.clone());
            for i in 1..nr - 1 {
                for j in 0..na {
                    f.set(i, j, rng.random_range(-1.0..1.0));
                    g.set(i, j, rng.random_range(-1.0..1.0));
                }
            }
            let lfg = self.bilinear(&f, &g);
            let flg = self.bilinear(&g, &f);
            let nf = self.norm_w(&f);
            let ng = self.norm_w(&g);
            worst = worst.max((lfg - flg).abs() / (nf * ng));
        }
        worst
    }

    fn norm_w(&self, f: &Field) -> f64 {
        let grid = &self.geom.grid;
        let (nr, na) = (grid.n_radial(), grid.n_angular());
        let mut acc = 0.0;
        for i in 0..nr {
            for j in 0..na {
                let v = f.at(i, j);
                acc += v * v * self.geom.node_mass(i, j);
            }
        }
        acc.sqrt()
    }

    pub fn symmetry_defect(&self) -> f64 {
        self.symmetry_defect
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.symmetry_defect <= 1e-10
    }
}

/// Discrete axially symmetric Laplacian on D ⊂ R^N in (ρ, φ):
/// v_ρρ + (N−1)/ρ·v_ρ + (N−2)/ρ²·cotφ·v_φ + v_φφ/ρ², Dirichlet in ρ,
/// self-adjoint w.r.t. ρ^{N−1} sin^{N−2}φ.
pub fn assemble_axisym_laplacian(grid: Arc<Grid>, n_dim: u32) -> Result<WeightedOperator> {
    if n_dim < 3 {
        return Err(Error::Param(format!("axisymmetric Laplacian needs N ≥ 3, got {n_dim}")));
    }
    Ok(WeightedOperator::new(Geometry::downstairs(grid, n_dim), 1.0, None))
}

/// Discrete Laplacian of R^{2m} restricted to doubly radial functions u(r, θ):
/// u_rr + (2m−1)/r·u_r + (m−1)/r²(cotθ − tanθ)u_θ + u_θθ/r², Dirichlet in r,
/// self-adjoint w.r.t. r^{2m−1} cos^{m−1}θ sin^{m−1}θ.  Supports the
/// non-uniform radial grids produced by lifting.
pub fn assemble_upstairs_laplacian(grid: Arc<Grid>, m: u32) -> Result<WeightedOperator> {
    if m < 2 {
        return Err(Error::Param(format!("upstairs Laplacian needs m ≥ 2, got {m}")));
    }
    Ok(WeightedOperator::new(Geometry::upstairs(grid, m), 1.0, None))
}

/// Interior-node symmetric form of a [`WeightedOperator`]: the band matrix
/// A = W·(sign·Δ + q) over the Dirichlet-interior degrees of freedom,
/// together with the node masses and eigen-mass diagonal.
pub(crate) struct InteriorSystem {
    pub grid: Arc<Grid>,
    pub a: crate::linalg::BandMatrix,
    pub node_mass: Vec<f64>,
    pub eigen_mass: Vec<f64>,
}

impl InteriorSystem {
    pub fn restrict(&self, f: &Field) -> Vec<f64> {
        let (nr, na) = (self.grid.n_radial(), self.grid.n_angular());
        let mut v = Vec::with_capacity((nr - 2) * na);
        for i in 1..nr - 1 {
            for j in 0..na {
                v.push(f.at(i, j));
            }
        }
        v
    }

    pub fn extend(&self, v: &[f64]) -> Field {
        let (nr, na) = (self.grid.n_radial(), self.grid.n_angular());
        let mut f = Field::zeros(self.grid.clone());
        for i in 1..nr - 1 {
            for j in 0..na {
                f.set(i, j, v[(i - 1) * na + j]);
            }
        }
        f
    }

    /// Standard-form symmetric matrix C = D^{−1/2} A D^{−1/2}, D = eigen mass.
    pub fn scaled(&self) -> crate::linalg::BandMatrix {
        let n = self.a.n;
        let bw = self.a.bw;
        let scale: Vec<f64> = self.eigen_mass.iter().map(|&m| 1.0 / m.sqrt()).collect();
        let mut c = crate::linalg::BandMatrix::zeros(n, bw);
        for j in 0..n {
            for d in 0..=bw.min(n - 1 - j) {
                let v = self.a.get(d, j);
                if v != 0.0 {
                    c.set(d, j, v * scale[j] * scale[j + d]);
                }
            }
        }
        c
    }
}

impl WeightedOperator {
    /// Assembles the interior symmetric band system of this operator.
    pub(crate) fn interior_system(&self) -> InteriorSystem {
        let grid = self.geom.grid.clone();
        let (nr, na) = (grid.n_radial(), grid.n_angular());
        let x = &grid.radial;
        let y = &grid.angular;
        let geo = &self.geom;
        let n = (nr - 2) * na;
        let mut a = crate::linalg::BandMatrix::zeros(n, na);
        let mut node_mass = Vec::with_capacity(n);
        let mut eigen_mass = Vec::with_capacity(n);
        for i in 1..nr - 1 {
            let dx_l = x[i] - x[i - 1];
            let dx_r = x[i + 1] - x[i];
            let af_l = geo.radial_face[i - 1];
            let af_r = geo.radial_face[i];
            let ri = geo.radial_mass[i];
            let ix2 = geo.inv_x2[i];
            for j in 0..na {
                let dof = (i - 1) * na + j;
                let w = geo.node_mass(i, j);
                node_mass.push(w);
                eigen_mass.push(w * self.eigen_mass[grid.idx(i, j)]);
                let mut diag = -self.sign * geo.angular_mass[j] * (af_r / dx_r + af_l / dx_l);
                if j + 1 < na {
                    let dy = y[j + 1] - y[j];
                    let coup = self.sign * ri * ix2 * geo.angular_face[j] / dy;
                    a.add(1, dof, coup);
                    diag -= coup;
                }
                if j > 0 {
                    let dy = y[j] - y[j - 1];
                    diag -= self.sign * ri * ix2 * geo.angular_face[j - 1] / dy;
                }
                if i + 1 < nr - 1 {
                    a.add(na, dof, self.sign * geo.angular_mass[j] * af_r / dx_r);
                }
                if let Some(q) = &self.potential {
                    diag += w * q[grid.idx(i, j)];
                }
                a.add(0, dof, diag);
            }
        }
        InteriorSystem {
            grid,
            a,
            node_mass,
            eigen_mass,
        }
    }
}

/// Which measure a weighted inner product integrates against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    /// ρ^{N−1} sin^{N−2}φ, times |S^{N−2}|: the volume of D ⊂ R^N.
    Volume,
    /// The volume measure divided by 2ρ.
    VolumeOver2Rho,
    /// r^{2m−1} cos^{m−1}θ sin^{m−1}θ times |S^{m−1}|²: the volume of A ⊂ R^{2m}.
    UpstairsVolume,
}

/// Nodal quadrature masses for one of the weighted measures; values of
/// integrals match the true integrals over D or A for symmetric functions.
pub struct Measure {
    grid: Arc<Grid>,
    masses: Vec<f64>,
    pub kind: WeightKind,
}

impl Measure {
    pub fn volume(grid: Arc<Grid>, n_dim: u32) -> Measure {
        let geo = Geometry::downstairs(grid.clone(), n_dim);
        let sphere = unit_sphere_area(n_dim - 2);
        let masses = mass_product(&geo, |_x| sphere);
        Measure {
            grid,
            masses,
            kind: WeightKind::Volume,
        }
    }

    pub fn volume_over_2rho(grid: Arc<Grid>, n_dim: u32) -> Measure {
        let geo = Geometry::downstairs(grid.clone(), n_dim);
        let sphere = unit_sphere_area(n_dim - 2);
        let masses = mass_product(&geo, |x| sphere / (2.0 * x));
        Measure {
            grid,
            masses,
            kind: WeightKind::VolumeOver2Rho,
        }
    }

    /// `grid` must be an upstairs (r, θ) grid.
    pub fn upstairs_volume(grid: Arc<Grid>, m: u32) -> Measure {
        let geo = Geometry::upstairs(grid.clone(), m);
        let sphere = unit_sphere_area(m - 1);
        let factor = sphere * sphere;
        let masses = mass_product(&geo, |_x| factor);
        Measure {
            grid,
            masses,
            kind: WeightKind::UpstairsVolume,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn inner(&self, f: &Field, g: &Field) -> Result<f64> {
        f.check_same_grid(g)?;
        self.check_grid(f)?;
        let mut acc = KahanSum::default();
        for ((&fv, &gv), &m) in f.values().iter().zip(g.values()).zip(&self.masses) {
            acc.add(fv * gv * m);
        }
        Ok(acc.value())
    }

    pub fn norm(&self, f: &Field) -> Result<f64> {
        Ok(self.inner(f, f)?.max(0.0).sqrt())
    }

    pub fn integrate(&self, f: &Field) -> Result<f64> {
        self.check_grid(f)?;
        let mut acc = KahanSum::default();
        for (&fv, &m) in f.values().iter().zip(&self.masses) {
            acc.add(fv * m);
        }
        Ok(acc.value())
    }

    fn check_grid(&self, f: &Field) -> Result<()> {
        if f.grid().len() != self.grid.len()
            || f.grid().radial != self.grid.radial
            || f.grid().angular != self.grid.angular
        {
            return Err(Error::Shape("field does not match measure grid".into()));
        }
        Ok(())
    }
}

fn mass_product(geo: &Geometry, radial_factor: impl Fn(f64) -> f64) -> Vec<f64> {
    let grid = &geo.grid;
    let (nr, na) = (grid.n_radial(), grid.n_angular());
    let mut masses = Vec::with_capacity(nr * na);
    for i in 0..nr {
        let rf = geo.radial_mass[i] * radial_factor(grid.radial[i]);
        for j in 0..na {
            masses.push(rf * geo.angular_mass[j]);
        }
    }
    masses
}

/// Trapezoid-type weighted quadrature of ∫ f·g over the measure.
pub fn weighted_inner_product(f: &Field, g: &Field, measure: &Measure) -> Result<f64> {
    measure.inner(f, g)
}
