//! Linearized operators at computed solutions, their smallest eigenvalues
//! and Morse indices, the first symmetric eigenpair (μ₁, g₁), and the
//! quadratic form Q on the spherical-harmonic test functions Φᵏ, reduced
//! exactly to 2D quadrature in (r, θ).
//!
//! The downstairs realization of the upstairs eigenproblem carries the mass
//! density 1/(2ρ): the change of variables maps L g = μ g on A ⊂ R^{2m} to
//! −Δ_{m+1}h + (λ − p v^{p−1})h/(2ρ) = μ·h/(2ρ) on D.  Counting negative
//! eigenvalues is independent of that (positive) mass, so Morse indices are
//! computed by Sylvester inertia of the assembled symmetric form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::disc::WeightedOperator;
use crate::error::{Error, Result};
use crate::grid::{angular_derivative, radial_derivative, Field, Grid};
use crate::linalg::{inertia_below, smallest_eigenpairs};
use crate::nehari::ReducedProblem;
use crate::params::unit_sphere_area;

/// Sorted eigenvalues with eigenfields of a linearized operator.
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenfields: Vec<Field>,
    /// Negative-eigenvalue count of the whole operator (by inertia), not
    /// just among the returned pairs.
    pub count_negative: usize,
}

/// Q(Φᵏ) = Q0 + ν_k·Q_ang, the quadratic form at the solution evaluated on
/// Φᵏ = g₁(r,θ)[cos²θ ψ_k(σ₁) + sin²θ ψ_k(σ₂)].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PhiKReport {
    pub k: u32,
    pub nu_k: f64,
    pub q_value: f64,
    pub q0: f64,
    pub q_ang: f64,
}

/// Eigenvalue of −Δ on S^{m−1} for the k-th spherical harmonic: k(k+m−2).
pub fn nu_k(k: u32, m: u32) -> Result<f64> {
    if k < 1 {
        return Err(Error::Domain(format!("spherical-harmonic index k must be ≥ 1, got {k}")));
    }
    if m < 2 {
        return Err(Error::Domain(format!("m must be ≥ 2, got {m}")));
    }
    Ok((k * (k + m - 2)) as f64)
}

/// L_v = −Δ + (λ − p|v|^{p−1})/(2ρ) on D, self-adjoint in the volume-weighted
/// inner product, with eigen mass 1/(2ρ).
pub fn linearized_operator(problem: &ReducedProblem, v: &Field) -> WeightedOperator {
    let p = problem.params.p;
    let lam = problem.params.lambda;
    let q: Vec<f64> = v
        .values()
        .iter()
        .zip(problem.inv_2rho())
        .map(|(&t, &w)| (lam - p * t.abs().powf(p - 1.0)) * w)
        .collect();
    problem
        .lap
        .variant(-1.0, Some(q), Some(problem.inv_2rho().to_vec()))
}

/// k smallest eigenvalues of the generalized problem L g = μ B g, where B is
/// the operator's eigen-mass density, via shift-invert Lanczos on the
/// symmetrized band form.  Returned eigenfields are B-orthonormal.
pub fn eigs_smallest(op: &WeightedOperator, k: usize, tol: f64, seed: u64) -> Result<Spectrum> {
    let sys = op.interior_system();
    let c = sys.scaled();
    let pairs = smallest_eigenpairs(&c, k, tol, seed)?;
    let scale: Vec<f64> = sys.eigen_mass.iter().map(|&m| 1.0 / m.sqrt()).collect();
    let mut eigenfields = Vec::with_capacity(pairs.vectors.len());
    for y in &pairs.vectors {
        let g: Vec<f64> = y.iter().zip(&scale).map(|(&yi, &s)| yi * s).collect();
        eigenfields.push(sys.extend(&g));
    }
    let (count_negative, _) = inertia_below(&c, 0.0)?;
    Ok(Spectrum {
        eigenvalues: pairs.values,
        eigenfields,
        count_negative,
    })
}

/// Morse index of a solution in the axially symmetric class: the number of
/// eigenvalues below −tol_eig, by Sylvester inertia of the linearized form.
/// Errors as indeterminate when eigenvalues sit within tol_eig of zero.
pub fn morse_index(problem: &ReducedProblem, v: &Field, tol_eig: Option<f64>) -> Result<usize> {
    let tol = tol_eig.unwrap_or(1e-8 * problem.params.lambda);
    let op = linearized_operator(problem, v);
    let sys = op.interior_system();
    let c = sys.scaled();
    let (below_neg, nz1) = inertia_below(&c, -tol)?;
    let (below_pos, nz2) = inertia_below(&c, tol)?;
    let near_zero = below_pos.saturating_sub(below_neg) + nz1 + nz2;
    if near_zero > 0 {
        return Err(Error::IndeterminateIndex {
            near_zero,
            tol,
        });
    }
    Ok(below_neg)
}

/// First eigenpair (μ₁, g₁) of the linearized operator at v, with g₁
/// normalized in the upstairs L² measure (∫_A g₁² = 1) and positive inside.
pub fn first_symmetric_eigenpair(problem: &ReducedProblem, v: &Field) -> Result<(f64, Field)> {
    let op = linearized_operator(problem, v);
    let spec = eigs_smallest(&op, 1, 1e-9, 0x51)?;
    let mu1 = spec.eigenvalues[0];
    let mut g = spec.eigenfields.into_iter().next().unwrap();
    if problem.vol.integrate(&g)? < 0.0 {
        g.scale(-1.0);
    }
    let sphere = unit_sphere_area(problem.params.m - 1);
    let upstairs_sq = sphere * problem.vol_over_2rho.inner(&g, &g)?;
    g.scale(1.0 / upstairs_sq.sqrt());
    Ok((mu1, g))
}

/// Upstairs quadrature pieces of Q(Φᵏ) that do not depend on k (`q0`) and
/// the coefficient of ν_k (`q_ang`).
pub struct PhiQuadrature {
    pub q0: f64,
    pub q_ang: f64,
    pub m: u32,
    /// ∫∫ g₁²(cos⁴θ+sin⁴θ) w / ∫∫ g₁² w, the mass-retention ratio ≥ 1/2.
    pub mass_ratio: f64,
}

/// Exact angular reduction of Q_{u_λ}(Φᵏ) to 2D quadrature over (r, θ):
/// the spherical harmonics enter only through ∫ψ²=1, ∫ψ=0, ∫|∇ψ|²=ν_k and
/// the vanishing of all ψ(σ₁)ψ(σ₂) cross terms.
pub fn phi_quadrature(
    problem: &ReducedProblem,
    g1_down: &Field,
    v_down: &Field,
) -> Result<PhiQuadrature> {
    g1_down.check_same_grid(v_down)?;
    let m = problem.params.m;
    let p = problem.params.p;
    let lam = problem.params.lambda;
    let g1 = crate::coords::lift_field(g1_down)?;
    let u = crate::coords::lift_field(v_down)?;
    let gr = radial_derivative(&g1);
    let gt = angular_derivative(&g1);
    let up = g1.grid().clone();
    let masses = upstairs_masses_2d(&up, m);
    let (nr, na) = (up.n_radial(), up.n_angular());
    let (mut a, mut b, mut cterm, mut d) = (0.0, 0.0, 0.0, 0.0);
    let (mut gsq_w, mut gsq_cs_w) = (0.0, 0.0);
    for i in 0..nr {
        let r = up.radial[i];
        let inv_r2 = 1.0 / (r * r);
        for j in 0..na {
            let w = masses[up.idx(i, j)];
            if w == 0.0 {
                continue;
            }
            let th = up.angular[j];
            let (c2, s2) = (th.cos() * th.cos(), th.sin() * th.sin());
            let cs4 = c2 * c2 + s2 * s2;
            let sin2t = (2.0 * th).sin();
            let g = g1.at(i, j);
            let grv = gr.at(i, j);
            let gtv = gt.at(i, j);
            a += grv * grv * cs4 * w;
            let t1 = gtv * c2 - g * sin2t;
            let t2 = gtv * s2 + g * sin2t;
            b += (t1 * t1 + t2 * t2) * inv_r2 * w;
            cterm += g * g * inv_r2 * w;
            d += (lam - p * u.at(i, j).abs().powf(p - 1.0)) * g * g * cs4 * w;
            gsq_w += g * g * w;
            gsq_cs_w += g * g * cs4 * w;
        }
    }
    let sphere = unit_sphere_area(m - 1);
    Ok(PhiQuadrature {
        q0: sphere * (a + b + d),
        q_ang: sphere * cterm,
        m,
        mass_ratio: gsq_cs_w / gsq_w,
    })
}

impl PhiQuadrature {
    pub fn report(&self, k: u32) -> Result<PhiKReport> {
        let nu = nu_k(k, self.m)?;
        Ok(PhiKReport {
            k,
            nu_k: nu,
            q_value: self.q0 + nu * self.q_ang,
            q0: self.q0,
            q_ang: self.q_ang,
        })
    }
}

/// Q(Φᵏ) for one k.
pub fn quadratic_form_phi_k(
    problem: &ReducedProblem,
    g1_down: &Field,
    v_down: &Field,
    k: u32,
) -> Result<PhiKReport> {
    phi_quadrature(problem, g1_down, v_down)?.report(k)
}

/// Q(Φᵏ) for k = 1..=k_max with the quadrature computed once.
pub fn phi_k_reports(
    problem: &ReducedProblem,
    g1_down: &Field,
    v_down: &Field,
    k_max: u32,
) -> Result<Vec<PhiKReport>> {
    let quad = phi_quadrature(problem, g1_down, v_down)?;
    (1..=k_max).map(|k| quad.report(k)).collect()
}

/// #{k : Q(Φᵏ) < 0}: a lower bound for the upstairs Morse index, since the
/// Φᵏ are pairwise L²-orthogonal.
pub fn morse_lower_bound_upstairs(reports: &[PhiKReport]) -> usize {
    reports.iter().filter(|r| r.q_value < 0.0).count()
}

/// Plain 2D masses r^{2m−1}cos^{m−1}θ sin^{m−1}θ drdθ (no sphere factors).
fn upstairs_masses_2d(up: &Grid, m: u32) -> Vec<f64> {
    let measure = crate::disc::Measure::upstairs_volume(std::sync::Arc::new(up.clone()), m);
    let sphere = unit_sphere_area(m - 1);
    let norm = sphere * sphere;
    measure.masses().iter().map(|&v| v / norm).collect()
}

/// Monte-Carlo estimate of Q(Φᵏ) as a genuine integral over A ⊂ R⁴ (m = 2
/// only): explicit circle harmonics ψ_k(α) = cos(kα)/√π, with the sphere
/// angles (α₁, α₂) sampled uniformly on the torus — stratified over the
/// (r, θ) grid cells so the noise probes exactly what the reduction claims
/// (the ∫ψ², ∫ψ, ∫|∇ψ|² identities and the vanishing ψ(σ₁)ψ(σ₂) cross
/// terms).  Plain 4D sampling is hopeless here: spike solutions make the
/// integrand a small difference of huge localized terms, so the radial
/// marginal must be integrated exactly.
pub fn mc_quadratic_form_phi_k(
    problem: &ReducedProblem,
    g1_down: &Field,
    v_down: &Field,
    k: u32,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if problem.params.m != 2 {
        return Err(Error::Param(
            "the Monte-Carlo cross-check is implemented for m = 2 only".into(),
        ));
    }
    if k < 1 {
        return Err(Error::Domain("k must be ≥ 1".into()));
    }
    let p = problem.params.p;
    let lam = problem.params.lambda;
    let g1 = crate::coords::lift_field(g1_down)?;
    let u = crate::coords::lift_field(v_down)?;
    let gr = radial_derivative(&g1);
    let gt = angular_derivative(&g1);
    let up = g1.grid().clone();
    let masses = upstairs_masses_2d(&up, 2);
    let (nr, na) = (up.n_radial(), up.n_angular());
    let two_pi = 2.0 * std::f64::consts::PI;
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    let kf = k as f64;

    // allocate the sample budget by each cell's integrand magnitude; the
    // per-cell torus mean is unbiased for any allocation
    let mut scores = vec![0.0_f64; nr * na];
    let mut total_score = 0.0;
    for i in 0..nr {
        let inv_r2 = 1.0 / (up.radial[i] * up.radial[i]);
        for j in 0..na {
            let w = masses[up.idx(i, j)];
            let g = g1.at(i, j);
            let grv = gr.at(i, j);
            let gtv = gt.at(i, j);
            let uv = u.at(i, j);
            let pot = (lam - p * uv.abs().powf(p - 1.0)).abs();
            let s = w
                * (grv * grv
                    + (gtv * gtv + (1.0 + kf * kf) * g * g) * inv_r2
                    + pot * g * g);
            scores[up.idx(i, j)] = s;
            total_score += s;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0_f64;
    for i in 0..nr {
        let rn = up.radial[i];
        let inv_r2 = 1.0 / (rn * rn);
        for j in 0..na {
            let w = masses[up.idx(i, j)];
            if w == 0.0 {
                continue;
            }
            let per_cell = ((samples as f64 * scores[up.idx(i, j)] / total_score) as usize).max(4);
            let tn = up.angular[j];
            let (co, si) = (tn.cos(), tn.sin());
            let (c2, s2) = (co * co, si * si);
            let sin2t = 2.0 * co * si;
            let g = g1.at(i, j);
            let grv = gr.at(i, j);
            let gtv = gt.at(i, j);
            let uv = u.at(i, j);
            let pot = lam - p * uv.abs().powf(p - 1.0);
            let mut cell = 0.0_f64;
            for _ in 0..per_cell {
                let a1 = rng.random_range(0.0..two_pi);
                let a2 = rng.random_range(0.0..two_pi);
                let psi1 = (kf * a1).cos() * inv_sqrt_pi;
                let psi2 = (kf * a2).cos() * inv_sqrt_pi;
                let dpsi1 = -kf * (kf * a1).sin() * inv_sqrt_pi;
                let dpsi2 = -kf * (kf * a2).sin() * inv_sqrt_pi;
                let phi = g * (c2 * psi1 + s2 * psi2);
                let phi_r = grv * (c2 * psi1 + s2 * psi2);
                let phi_t = (gtv * c2 - g * sin2t) * psi1 + (gtv * s2 + g * sin2t) * psi2;
                let grad_sq = phi_r * phi_r
                    + phi_t * phi_t * inv_r2
                    + g * g * (c2 * dpsi1 * dpsi1 + s2 * dpsi2 * dpsi2) * inv_r2;
                cell += grad_sq + pot * phi * phi;
            }
            // (2π)² × torus average = the exact dσ₁dσ₂ integral estimate
            acc += w * two_pi * two_pi * cell / per_cell as f64;
        }
    }
    Ok(acc)
}
