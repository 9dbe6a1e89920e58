//! Energy functional of the reduced problem
//!     −Δv = (|v|^{p−1}v − λv)/(2|z|)  in D,  v = 0 on ∂D,
//! Nehari projections, and minimization solvers for the least-energy
//! positive solution and the least-energy sign-changing solution.

use std::sync::Arc;

use serde::Serialize;

use crate::disc::{assemble_axisym_laplacian, Measure, WeightedOperator};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::linalg::{band_cholesky, band_ldlt};
use crate::params::{ProblemParams, ReducedDomain};

/// The pieces of J_λ(v) = ∫ ½|∇v|² + (λ/(4|z|))v² − |v|^{p+1}/(2(p+1)|z|).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyBreakdown {
    /// ∫ |∇v|²/2.
    pub dirichlet: f64,
    /// (λ/2)·∫ v²/(2|z|).
    pub mass: f64,
    /// (1/(p+1))·∫ |v|^{p+1}/(2|z|).
    pub power: f64,
    /// dirichlet + mass − power.
    pub total: f64,
}

/// Result of a positive or nodal solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub field: Field,
    pub energy: EnergyBreakdown,
    /// Weighted L² norm of −Δv − (|v|^{p−1}v − λv)/(2ρ) over interior nodes.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescentKind {
    /// Explicit weighted-L² gradient steps.
    PlainL2,
    /// Steps preconditioned by (−Δ + λ/(2ρ))⁻¹ (one Cholesky, reused).
    Preconditioned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitSide {
    Inner,
    Outer,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Convergence tolerance on the weighted gradient norm.
    pub tol: f64,
    pub max_iters: usize,
    pub descent: DescentKind,
    pub init_side: InitSide,
    /// Switch to Newton polishing once the residual falls below this factor
    /// times the initial residual (and after a minimum descent phase).
    pub newton: bool,
    pub init: Option<Field>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_iters: 50_000,
            descent: DescentKind::Preconditioned,
            init_side: InitSide::Inner,
            newton: true,
            init: None,
        }
    }
}

/// Discrete setting of the reduced problem on one grid.
pub struct ReducedProblem {
    pub params: ProblemParams,
    pub dom: ReducedDomain,
    pub grid: Arc<Grid>,
    /// Downstairs Laplacian Δ.
    pub lap: WeightedOperator,
    pub vol: Measure,
    pub vol_over_2rho: Measure,
    inv_2rho: Vec<f64>,
}

impl ReducedProblem {
    pub fn new(params: ProblemParams, grid: Arc<Grid>) -> Result<ReducedProblem> {
        let dom = params.reduced();
        let lap = assemble_axisym_laplacian(grid.clone(), dom.n_dim)?;
        let vol = Measure::volume(grid.clone(), dom.n_dim);
        let vol_over_2rho = Measure::volume_over_2rho(grid.clone(), dom.n_dim);
        let mut inv_2rho = Vec::with_capacity(grid.len());
        for &rho in &grid.radial {
            for _ in 0..grid.n_angular() {
                inv_2rho.push(1.0 / (2.0 * rho));
            }
        }
        Ok(ReducedProblem {
            params,
            dom,
            grid,
            lap,
            vol,
            vol_over_2rho,
            inv_2rho,
        })
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<ReducedProblem> {
        ReducedProblem::new(self.params.with_lambda(lambda)?, self.grid.clone())
    }

    pub fn inv_2rho(&self) -> &[f64] {
        &self.inv_2rho
    }

    fn check_boundary(&self, v: &Field) -> Result<()> {
        let bmax = v.radial_boundary_max_abs();
        if bmax > 1e-14 * v.max_abs().max(1.0) {
            return Err(Error::Contract(format!(
                "field must vanish on the Dirichlet boundary (max boundary value {bmax:.3e})"
            )));
        }
        Ok(())
    }

    /// J_λ(v) with its three components.
    pub fn energy(&self, v: &Field) -> Result<EnergyBreakdown> {
        self.check_boundary(v)?;
        let p = self.params.p;
        let lam = self.params.lambda;
        let dirichlet = -0.5 * self.vol.inner(&self.lap.apply(v), v)?;
        let mass = 0.5 * lam * self.vol_over_2rho.inner(v, v)?;
        let vpow = v.map(|t| t.abs().powf(p + 1.0));
        let power = self.vol_over_2rho.integrate(&vpow)? / (p + 1.0);
        Ok(EnergyBreakdown {
            dirichlet,
            mass,
            power,
            total: dirichlet + mass - power,
        })
    }

    /// Weighted-L² Riesz gradient of J_λ: −Δv + (λv − |v|^{p−1}v)/(2ρ);
    /// vanishes at discrete solutions of the reduced problem.
    pub fn gradient(&self, v: &Field) -> Result<Field> {
        self.check_boundary(v)?;
        let p = self.params.p;
        let lam = self.params.lambda;
        let mut g = self.lap.apply(v);
        let vals = g.values_mut();
        for (k, (&vk, &q)) in v.values().iter().zip(&self.inv_2rho).enumerate() {
            vals[k] = -vals[k] + (lam * vk - vk.abs().powf(p - 1.0) * vk) * q;
        }
        let mut g = Field::from_values(self.grid.clone(), g.values().to_vec())?;
        g.zero_radial_boundary();
        Ok(g)
    }

    pub fn residual_norm(&self, v: &Field) -> Result<f64> {
        self.vol.norm(&self.gradient(v)?)
    }

    /// Dirichlet + mass part ⟨−Δv,v⟩ + λ∫v²/(2ρ) and power part ∫|v|^{p+1}/(2ρ).
    fn nehari_parts(&self, v: &Field) -> Result<(f64, f64)> {
        let quad = -self.vol.inner(&self.lap.apply(v), v)?
            + self.params.lambda * self.vol_over_2rho.inner(v, v)?;
        let p = self.params.p;
        let vpow = v.map(|t| t.abs().powf(p + 1.0));
        let pw = self.vol_over_2rho.integrate(&vpow)?;
        Ok((quad, pw))
    }

    /// ⟨J'_λ(v), v⟩; zero on the Nehari manifold.
    pub fn nehari_defect(&self, v: &Field) -> Result<f64> {
        let (quad, pw) = self.nehari_parts(v)?;
        Ok(quad - pw)
    }

    /// Scales v onto the Nehari manifold:
    /// t* = [(∫|∇v|² + λ∫v²/(2ρ)) / ∫|v|^{p+1}/(2ρ)]^{1/(p−1)}.
    pub fn nehari_project(&self, v: &Field) -> Result<(f64, Field)> {
        let (quad, pw) = self.nehari_parts(v)?;
        let scale = v.max_abs();
        if pw <= 1e-300 || scale == 0.0 {
            return Err(Error::Degenerate(
                "cannot project the zero field onto the Nehari manifold".into(),
            ));
        }
        let t = (quad / pw).powf(1.0 / (self.params.p - 1.0));
        let mut scaled = v.clone();
        scaled.scale(t);
        Ok((t, scaled))
    }

    /// ⟨J'_λ(v), v⁺⟩ and ⟨J'_λ(v), −v⁻⟩ (signed parts of the nodal Nehari defect).
    pub fn nodal_defects(&self, v: &Field) -> Result<(f64, f64)> {
        let g = self.gradient(v)?;
        let vp = v.positive_part();
        let vm = v.map(|t| t.min(0.0)); // −v⁻
        Ok((self.vol.inner(&g, &vp)?, self.vol.inner(&g, &vm)?))
    }

    /// Scales v⁺ and v⁻ separately onto the Nehari manifold.
    pub fn nodal_project(&self, v: &Field) -> Result<Field> {
        let vp = v.positive_part();
        let vm = v.negative_part();
        let scale = v.max_abs();
        if vp.max_abs() <= 1e-13 * scale || vm.max_abs() <= 1e-13 * scale {
            return Err(Error::DegenerateDescent(
                "one sign component collapsed during nodal projection".into(),
            ));
        }
        let (_, sp) = self.nehari_project(&vp)?;
        let (_, sm) = self.nehari_project(&vm)?;
        let mut out = sp;
        out.axpy(-1.0, &sm);
        Ok(out)
    }

    /// Default initial bump: Gaussian in the chordal distance to the axis
    /// point (ρ₀, φ₀), cut off to vanish on the Dirichlet boundary.
    pub fn bump(&self, rho0: f64, phi0: f64, width: f64) -> Field {
        let (r1, r2) = (self.dom.r1, self.dom.r2);
        let half = 0.5 * (r2 - r1);
        Field::from_fn(self.grid.clone(), |rho, phi| {
            let d2 = rho * rho + rho0 * rho0 - 2.0 * rho * rho0 * (phi - phi0).cos();
            let cutoff = ((rho - r1) * (r2 - rho) / (half * half)).max(0.0);
            cutoff * (-d2 / (2.0 * width * width)).exp()
        })
    }

    fn default_init(&self, nodal: bool, side: InitSide) -> Field {
        let dr = self.dom.width();
        let rho0 = match side {
            InitSide::Inner => self.dom.r1 + 0.1 * dr,
            InitSide::Outer => self.dom.r2 - 0.1 * dr,
        };
        let width = (2.0 * self.dom.r1 / self.params.lambda).sqrt().max(0.02 * dr) * 1.5;
        let mut v = self.bump(rho0, 0.0, width);
        if nodal {
            let neg = self.bump(rho0, std::f64::consts::PI, width);
            v.axpy(-1.0, &neg);
        }
        v
    }

    /// Least-energy positive solution by Nehari-projected descent with
    /// |·| positivity enforcement, plus optional Newton polishing.
    pub fn solve_positive(&self, opts: &SolveOptions) -> Result<SolveOutcome> {
        self.solve(false, opts)
    }

    /// Least-energy nodal solution: descent with separate Nehari scaling of
    /// the positive and negative parts each iteration.
    pub fn solve_nodal(&self, opts: &SolveOptions) -> Result<SolveOutcome> {
        self.solve(true, opts)
    }

    fn project(&self, v: &Field, nodal: bool) -> Result<Field> {
        if nodal {
            self.nodal_project(v)
        } else {
            let (_, w) = self.nehari_project(&v.abs())?;
            Ok(w)
        }
    }

    fn solve(&self, nodal: bool, opts: &SolveOptions) -> Result<SolveOutcome> {
        let mut v = match &opts.init {
            Some(f) => {
                if f.grid().radial != self.grid.radial || f.grid().angular != self.grid.angular {
                    return Err(Error::Shape(
                        "initial field does not live on the problem grid".into(),
                    ));
                }
                f.clone()
            }
            None => self.default_init(nodal, opts.init_side),
        };
        v.zero_radial_boundary();
        v = self.project(&v, nodal)?;

        // preconditioner: (−Δ + λ/(2ρ)), SPD, factored once
        let precond = match opts.descent {
            DescentKind::Preconditioned => {
                let q: Vec<f64> = self.inv_2rho.iter().map(|&t| self.params.lambda * t).collect();
                let op = self.lap.variant(-1.0, Some(q), None);
                let sys = op.interior_system();
                let chol = band_cholesky(&sys.a)?;
                Some((sys, chol))
            }
            DescentKind::PlainL2 => None,
        };

        let mut energy = self.energy(&v)?;
        let mut tau = if precond.is_some() { 1.0 } else { 1e-4 };
        let mut iters = 0usize;
        let mut res = f64::INFINITY;
        let mut newton_failures = 0usize;

        while iters < opts.max_iters {
            let grad = self.gradient(&v)?;
            res = self.vol.norm(&grad)?;
            if res <= opts.tol {
                break;
            }

            // Newton polish once the iterate is in the basin
            if opts.newton && newton_failures < 3 && iters >= 10 && res <= 1e-3 * (1.0 + energy.total.abs())
            {
                match self.newton_polish(&v, opts.tol, 30) {
                    Ok((vn, extra)) => {
                        iters += extra;
                        let rn = self.residual_norm(&vn)?;
                        if rn < res {
                            v = vn;
                            energy = self.energy(&v)?;
                            res = rn;
                            if res <= opts.tol {
                                break;
                            }
                        } else {
                            newton_failures += 1;
                        }
                    }
                    Err(_) => newton_failures += 1,
                }
            }

            let dir = match &precond {
                Some((sys, chol)) => {
                    let gi = sys.restrict(&grad);
                    let rhs: Vec<f64> = gi
                        .iter()
                        .zip(&sys.node_mass)
                        .map(|(&g, &m)| g * m)
                        .collect();
                    let mut di = vec![0.0; rhs.len()];
                    chol.solve(&rhs, &mut di);
                    sys.extend(&di)
                }
                None => grad.clone(),
            };
            let slope = self.vol.inner(&grad, &dir)?;
            if !(slope > 0.0) {
                // preconditioner lost descent (roundoff floor); stop here
                break;
            }

            let mut accepted = false;
            let mut t = tau;
            let eps_j = f64::EPSILON * (1.0 + energy.total.abs());
            for _ in 0..60 {
                let mut trial = v.clone();
                trial.axpy(-t, &dir);
                let trial = match self.project(&trial, nodal) {
                    Ok(w) => w,
                    Err(Error::Degenerate(_)) | Err(Error::DegenerateDescent(_)) => {
                        t *= 0.5;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                // Armijo on J while its decrease is resolvable in f64; below
                // that floor accept on residual decrease instead
                let ok = if 1e-4 * t * slope >= 50.0 * eps_j {
                    let etrial = self.energy(&trial)?;
                    etrial.total <= energy.total - 1e-4 * t * slope
                } else {
                    self.residual_norm(&trial)? < res
                };
                if ok {
                    v = trial;
                    energy = self.energy(&v)?;
                    tau = (t * 1.6).min(1e6);
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            iters += 1;
            if !accepted {
                // line search exhausted: force a Newton attempt or give up
                if opts.newton {
                    if let Ok((vn, extra)) = self.newton_polish(&v, opts.tol, 40) {
                        iters += extra;
                        let rn = self.residual_norm(&vn)?;
                        if rn < res {
                            v = vn;
                            energy = self.energy(&v)?;
                            res = rn;
                            if res <= opts.tol {
                                break;
                            }
                            continue;
                        }
                    }
                }
                break;
            }
        }

        // positivity is enforced by construction; the final |·| only clears
        // roundoff-level sign noise and cannot move the residual meaningfully
        if !nodal {
            v = v.abs();
        }
        v = align_axis(v, nodal);
        let grad = self.gradient(&v)?;
        let res_final = self.vol.norm(&grad)?;
        let energy = self.energy(&v)?;
        let converged = res_final <= opts.tol;
        let outcome = SolveOutcome {
            field: v,
            energy,
            residual_norm: res_final,
            iterations: iters,
            converged,
        };
        if !converged {
            let _ = res;
            return Err(Error::NonConvergence {
                residual: res_final,
                iterations: iters,
                last: Box::new(outcome),
            });
        }
        Ok(outcome)
    }

    /// Damped Newton iteration on the full residual; returns the polished
    /// field and the number of Newton steps spent.
    fn newton_polish(&self, v0: &Field, tol: f64, max_steps: usize) -> Result<(Field, usize)> {
        let p = self.params.p;
        let lam = self.params.lambda;
        let mut v = v0.clone();
        let mut res = self.residual_norm(&v)?;
        let mut steps = 0usize;
        while steps < max_steps && res > 0.25 * tol {
            let q: Vec<f64> = v
                .values()
                .iter()
                .zip(&self.inv_2rho)
                .map(|(&t, &w)| (lam - p * t.abs().powf(p - 1.0)) * w)
                .collect();
            let op = self.lap.variant(-1.0, Some(q), None);
            let sys = op.interior_system();
            let fac = band_ldlt(&sys.a)?;
            let grad = self.gradient(&v)?;
            let gi = sys.restrict(&grad);
            let rhs: Vec<f64> = gi
                .iter()
                .zip(&sys.node_mass)
                .map(|(&g, &m)| -g * m)
                .collect();
            let mut di = vec![0.0; rhs.len()];
            fac.solve(&rhs, &mut di);
            let delta = sys.extend(&di);
            let mut s = 1.0;
            let mut improved = false;
            for _ in 0..25 {
                let mut trial = v.clone();
                trial.axpy(s, &delta);
                let rt = self.residual_norm(&trial)?;
                if rt < res * (1.0 - 0.25 * s) || rt <= 0.25 * tol {
                    v = trial;
                    res = rt;
                    improved = true;
                    break;
                }
                s *= 0.5;
            }
            steps += 1;
            if !improved {
                return Err(Error::NonConvergence {
                    residual: res,
                    iterations: steps,
                    last: Box::new(SolveOutcome {
                        field: v.clone(),
                        energy: self.energy(&v)?,
                        residual_norm: res,
                        iterations: steps,
                        converged: false,
                    }),
                });
            }
        }
        Ok((v, steps))
    }
}

/// Reflects the field so its (positive) peak sits on the φ = 0 side.
fn align_axis(v: Field, nodal: bool) -> Field {
    let g = v.grid().clone();
    let (nr, na) = (g.n_radial(), g.n_angular());
    let mut best = (0usize, 0usize);
    let mut best_val = f64::NEG_INFINITY;
    for i in 0..nr {
        for j in 0..na {
            let val = if nodal { v.at(i, j) } else { v.at(i, j).abs() };
            if val > best_val {
                best_val = val;
                best = (i, j);
            }
        }
    }
    let phi_peak = g.angular[best.1];
    if phi_peak > std::f64::consts::FRAC_PI_2 {
        v.angular_flip()
    } else {
        v
    }
}

/// Connected components (4-neighbor) of the strictly positive and strictly
/// negative node sets, ignoring |v| below `rel_floor`·max|v|.
pub fn count_nodal_regions(v: &Field, rel_floor: f64) -> (usize, usize) {
    let g = v.grid();
    let (nr, na) = (g.n_radial(), g.n_angular());
    let floor = rel_floor * v.max_abs();
    let sign_of = |i: usize, j: usize| -> i8 {
        let t = v.at(i, j);
        if t > floor {
            1
        } else if t < -floor {
            -1
        } else {
            0
        }
    };
    let mut seen = vec![false; nr * na];
    let mut counts = (0usize, 0usize);
    for i in 0..nr {
        for j in 0..na {
            let s = sign_of(i, j);
            if s == 0 || seen[g.idx(i, j)] {
                continue;
            }
            if s > 0 {
                counts.0 += 1;
            } else {
                counts.1 += 1;
            }
            let mut stack = vec![(i, j)];
            seen[g.idx(i, j)] = true;
            while let Some((ci, cj)) = stack.pop() {
                let mut push = |ni: usize, nj: usize| {
                    if !seen[g.idx(ni, nj)] && sign_of(ni, nj) == s {
                        seen[g.idx(ni, nj)] = true;
                        stack.push((ni, nj));
                    }
                };
                if ci > 0 {
                    push(ci - 1, cj);
                }
                if ci + 1 < nr {
                    push(ci + 1, cj);
                }
                if cj > 0 {
                    push(ci, cj - 1);
                }
                if cj + 1 < na {
                    push(ci, cj + 1);
                }
            }
        }
    }
    counts
}

/// Checks axial monotonicity (foliated Schwarz property): v(ρ, ·)
/// nonincreasing in φ, allowing `slack` of violation per node pair.
pub fn max_monotonicity_violation(v: &Field) -> f64 {
    let g = v.grid();
    let (nr, na) = (g.n_radial(), g.n_angular());
    let mut worst = 0.0_f64;
    for i in 0..nr {
        for j in 0..na - 1 {
            worst = worst.max(v.at(i, j + 1) - v.at(i, j));
        }
    }
    worst
}
