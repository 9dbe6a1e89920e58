//! Change of variables between doubly radial coordinates (r, θ) on the
//! annulus A ⊂ R^{2m} and axially symmetric coordinates (ρ, φ) on the
//! annulus D ⊂ R^{m+1}:  ρ = r²/2,  φ = 2θ,  v(ρ, φ) = u(√(2ρ), φ/2).
//!
//! The upstairs grid is defined as the exact pointwise image of the
//! downstairs grid, so field transport is a relabeling with zero
//! interpolation error.

use std::sync::Arc;

use crate::disc::{assemble_axisym_laplacian, assemble_upstairs_laplacian};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::params::ProblemParams;

/// Point of A ⊂ R^{2m} in (r, θ) coordinates, r = |x|, tanθ = |y₂|/|y₁|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint2m {
    pub r: f64,
    pub theta: f64,
}

/// Point of D ⊂ R^{m+1} in (ρ, φ) coordinates, ρ = |z|, φ = polar angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPointD {
    pub rho: f64,
    pub phi: f64,
}

const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;
const PI: f64 = std::f64::consts::PI;

/// ρ = r²/2, φ = 2θ.
pub fn reduce_point(params: &ProblemParams, pt: PolarPoint2m) -> Result<PolarPointD> {
    if !(pt.r >= params.a && pt.r <= params.b) {
        return Err(Error::Domain(format!(
            "radius {} outside [{}, {}]",
            pt.r, params.a, params.b
        )));
    }
    if !(pt.theta >= 0.0 && pt.theta <= HALF_PI) {
        return Err(Error::Domain(format!("angle {} outside [0, π/2]", pt.theta)));
    }
    Ok(PolarPointD {
        rho: 0.5 * pt.r * pt.r,
        phi: 2.0 * pt.theta,
    })
}

/// r = √(2ρ), θ = φ/2; exact inverse of [`reduce_point`].
pub fn lift_point(params: &ProblemParams, pt: PolarPointD) -> Result<PolarPoint2m> {
    if pt.rho <= 0.0 {
        return Err(Error::Domain(format!("rho must be positive, got {}", pt.rho)));
    }
    let dom = params.reduced();
    if !(pt.rho >= dom.r1 && pt.rho <= dom.r2) {
        return Err(Error::Domain(format!(
            "rho {} outside [{}, {}]",
            pt.rho, dom.r1, dom.r2
        )));
    }
    if !(pt.phi >= 0.0 && pt.phi <= PI) {
        return Err(Error::Domain(format!("angle {} outside [0, π]", pt.phi)));
    }
    Ok(PolarPoint2m {
        r: (2.0 * pt.rho).sqrt(),
        theta: 0.5 * pt.phi,
    })
}

fn check_reduced_grid(f: &Field) -> Result<()> {
    let g = f.grid();
    if (g.angular[g.n_angular() - 1] - PI).abs() > 1e-12 {
        return Err(Error::Shape(
            "expected a reduced-grid field with φ ∈ [0, π]".into(),
        ));
    }
    Ok(())
}

fn check_lifted_grid(f: &Field) -> Result<()> {
    let g = f.grid();
    if (g.angular[g.n_angular() - 1] - HALF_PI).abs() > 1e-12 {
        return Err(Error::Shape(
            "expected an upstairs-grid field with θ ∈ [0, π/2]".into(),
        ));
    }
    Ok(())
}

/// Transports v(ρ, φ) to u(r, θ) = v(r²/2, 2θ) on the image grid.
/// Grid nodes map exactly; values are relabeled, never interpolated.
pub fn lift_field(v: &Field) -> Result<Field> {
    check_reduced_grid(v)?;
    let up = Grid::lifted(v.grid());
    Field::from_values(up, v.values().to_vec())
}

/// Inverse of [`lift_field`]: samples u back onto the reduced grid.
pub fn reduce_field(u: &Field, reduced_grid: &Arc<Grid>) -> Result<Field> {
    check_lifted_grid(u)?;
    let expected = Grid::lifted(reduced_grid);
    if *expected != *u.grid().as_ref() {
        return Err(Error::Shape(
            "upstairs field does not live on the image of the reduced grid".into(),
        ));
    }
    Field::from_values(reduced_grid.clone(), u.values().to_vec())
}

/// Maximum interior-node defect of the identity Δ_{2m}u = 2ρ·Δ_{m+1}v for a
/// paired smooth field, using the independent discrete operators of the two
/// grids.  Second-order small for smooth fields; exact to roundoff for
/// u = r² and u = r²cos2θ.
pub fn verify_laplacian_identity(
    v: &Field,
    m: u32,
) -> Result<f64> {
    check_reduced_grid(v)?;
    let grid = v.grid().clone();
    let lap_down = assemble_axisym_laplacian(grid.clone(), m + 1)?;
    let up_grid = Grid::lifted(&grid);
    let lap_up = assemble_upstairs_laplacian(up_grid, m)?;
    let u = lift_field(v)?;

    let dv = lap_down.apply(v);
    let du = lap_up.apply(&u);

    let (nr, na) = (grid.n_radial(), grid.n_angular());
    let mut worst = 0.0_f64;
    for i in 1..nr - 1 {
        let rho = grid.radial[i];
        for j in 0..na {
            let defect = (du.at(i, j) - 2.0 * rho * dv.at(i, j)).abs();
            worst = worst.max(defect);
        }
    }
    Ok(worst)
}

/// Residuals of a reduced-problem solution after lifting.
///
/// The transported residual is the exact image of the downstairs residual
/// under the bijection (factor 2ρ nodewise), so its ratio to the downstairs
/// norm is bounded by the measure transport alone.  The independent residual
/// re-evaluates the upstairs equation with the independently discretized
/// upstairs operator and is only O(h²)-small relative to the field scale.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct LiftedResidualReport {
    pub downstairs_norm: f64,
    pub transported_norm: f64,
    /// transported_norm / downstairs_norm.
    pub transported_ratio: f64,
    pub independent_norm: f64,
}

pub fn lifted_residual_report(
    problem: &crate::nehari::ReducedProblem,
    v: &Field,
) -> Result<LiftedResidualReport> {
    use crate::disc::Measure;
    let grad = problem.gradient(v)?;
    let downstairs_norm = problem.vol.norm(&grad)?;

    // transported: res_up = 2ρ·res_down relabeled onto the upstairs grid
    let grid = problem.grid.clone();
    let mut transported = grad.clone();
    {
        let vals = transported.values_mut();
        let na = grid.n_angular();
        for (k, val) in vals.iter_mut().enumerate() {
            let rho = grid.radial[k / na];
            *val *= 2.0 * rho;
        }
    }
    let transported_up = lift_field(&transported)?;
    let m = problem.params.m;
    let up_vol = Measure::upstairs_volume(transported_up.grid().clone(), m);
    let transported_norm = up_vol.norm(&transported_up)?;

    // independent: −Δ_h u + λu − |u|^{p−1}u with the upstairs operator
    let u = lift_field(v)?;
    let lap_up = assemble_upstairs_laplacian(u.grid().clone(), m)?;
    let mut res = lap_up.apply(&u);
    let (p, lam) = (problem.params.p, problem.params.lambda);
    {
        let vals = res.values_mut();
        for (rv, &uv) in vals.iter_mut().zip(u.values()) {
            *rv = -*rv + lam * uv - uv.abs().powf(p - 1.0) * uv;
        }
    }
    let mut res = Field::from_values(u.grid().clone(), res.values().to_vec())?;
    res.zero_radial_boundary();
    let independent_norm = up_vol.norm(&res)?;

    Ok(LiftedResidualReport {
        downstairs_norm,
        transported_norm,
        transported_ratio: transported_norm / downstairs_norm,
        independent_norm,
    })
}
