//! Ground-state radial profiles of −Δz + c·z − c·z^p = 0 on R^N by
//! shooting, the limit energy law I_d(w_d) = √(2d)·I(z), and concentration
//! diagnostics (peak location, boundary distance, decay outside the limit
//! peak) across λ-sweeps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::nehari::EnergyBreakdown;
use crate::params::{unit_sphere_area, ProblemParams};
use crate::spectral::PhiKReport;

/// Radial profile of the decaying positive solution of
/// z'' + (N−1)/s·z' − c·z + c·z^p = 0, z'(0) = 0, z(∞) = 0.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub n_dim: u32,
    pub p: f64,
    /// Coefficient c of the linear and power terms (1 for the reference
    /// ground state; 1/(2d) for the rescaled profiles w_d).
    pub coeff: f64,
    /// z(0).
    pub z0: f64,
    pub s: Vec<f64>,
    pub z: Vec<f64>,
    pub dz: Vec<f64>,
    /// I(z) = ∫ [½|∇z|² + c(½z² − z^{p+1}/(p+1))] over R^N.
    pub energy: f64,
}

#[derive(PartialEq)]
enum Shot {
    Undershoot, // turned back up while still positive
    Overshoot,  // crossed zero
}

const S_MAX: f64 = 50.0;

struct OdeParams {
    n_dim: f64,
    p: f64,
    c: f64,
}

impl OdeParams {
    #[inline]
    fn rhs(&self, s: f64, y: &[f64; 3]) -> [f64; 3] {
        let (z, dz) = (y[0], y[1]);
        let friction = if s > 0.0 { (self.n_dim - 1.0) / s } else { 0.0 };
        let zp = if z > 0.0 { z.powf(self.p) } else { -(-z).powf(self.p) };
        let acc = -friction * dz + self.c * (z - zp);
        // energy density (½z'² + c(½z² − z^{p+1}/(p+1)))·s^{N−1}
        let zp1 = z.abs().powf(self.p + 1.0);
        let e = (0.5 * dz * dz + self.c * (0.5 * z * z - zp1 / (self.p + 1.0)))
            * s.powf(self.n_dim - 1.0);
        [dz, acc, e]
    }
}

/// One adaptive RKF45 step; returns (new_y, error_estimate).
fn rkf45_step(p: &OdeParams, s: f64, y: &[f64; 3], h: f64) -> ([f64; 3], f64) {
    const A: [f64; 5] = [0.25, 3.0 / 8.0, 12.0 / 13.0, 1.0, 0.5];
    let k1 = p.rhs(s, y);
    let add = |y: &[f64; 3], terms: &[(f64, &[f64; 3])]| -> [f64; 3] {
        let mut out = *y;
        for (c, k) in terms {
            for i in 0..3 {
                out[i] += h * c * k[i];
            }
        }
        out
    };
    let k2 = p.rhs(s + A[0] * h, &add(y, &[(0.25, &k1)]));
    let k3 = p.rhs(s + A[1] * h, &add(y, &[(3.0 / 32.0, &k1), (9.0 / 32.0, &k2)]));
    let k4 = p.rhs(
        s + A[2] * h,
        &add(
            y,
            &[
                (1932.0 / 2197.0, &k1),
                (-7200.0 / 2197.0, &k2),
                (7296.0 / 2197.0, &k3),
            ],
        ),
    );
    let k5 = p.rhs(
        s + A[3] * h,
        &add(
            y,
            &[
                (439.0 / 216.0, &k1),
                (-8.0, &k2),
                (3680.0 / 513.0, &k3),
                (-845.0 / 4104.0, &k4),
            ],
        ),
    );
    let k6 = p.rhs(
        s + A[4] * h,
        &add(
            y,
            &[
                (-8.0 / 27.0, &k1),
                (2.0, &k2),
                (-3544.0 / 2565.0, &k3),
                (1859.0 / 4104.0, &k4),
                (-11.0 / 40.0, &k5),
            ],
        ),
    );
    let y5 = add(
        y,
        &[
            (16.0 / 135.0, &k1),
            (6656.0 / 12825.0, &k3),
            (28561.0 / 56430.0, &k4),
            (-9.0 / 50.0, &k5),
            (2.0 / 55.0, &k6),
        ],
    );
    let y4 = add(
        y,
        &[
            (25.0 / 216.0, &k1),
            (1408.0 / 2565.0, &k3),
            (2197.0 / 4104.0, &k4),
            (-0.2, &k5),
        ],
    );
    let mut err = 0.0_f64;
    for i in 0..2 {
        err = err.max((y5[i] - y4[i]).abs());
    }
    (y5, err)
}

struct Trajectory {
    s: Vec<f64>,
    z: Vec<f64>,
    dz: Vec<f64>,
    energy_acc: f64,
    outcome: Shot,
}

/// Integrates from the series start until the trajectory classifies, with
/// optional dense recording.
fn integrate(p: &OdeParams, z0: f64, record: bool, rtol: f64, h_max: f64) -> Trajectory {
    let s0 = 1e-6;
    let a = p.c * (z0 - z0.powf(p.p)) / (2.0 * p.n_dim);
    let mut y = [z0 + a * s0 * s0, 2.0 * a * s0, 0.0];
    let mut s = s0;
    let mut h = 1e-4_f64;
    let mut out = Trajectory {
        s: vec![0.0, s0],
        z: vec![z0, y[0]],
        dz: vec![0.0, y[1]],
        energy_acc: 0.0,
        outcome: Shot::Undershoot,
    };
    if !record {
        out.s.clear();
        out.z.clear();
        out.dz.clear();
    }
    let atol = rtol * 1e-2;
    loop {
        let h_eff = h.min(h_max).min(S_MAX - s).max(1e-12);
        let (ynew, err) = rkf45_step(p, s, &y, h_eff);
        let scale = rtol * (y[0].abs() + y[1].abs() + 1.0) + atol;
        if err > scale && h_eff > 1e-11 {
            h = 0.5 * h_eff;
            continue;
        }
        s += h_eff;
        y = ynew;
        if record {
            out.s.push(s);
            out.z.push(y[0]);
            out.dz.push(y[1]);
        }
        if err < 0.1 * scale {
            h = (h_eff * 1.9).min(h_max);
        } else {
            h = h_eff * 0.9 * (scale / err).powf(0.2).clamp(0.2, 1.9);
        }
        if y[0] <= 0.0 {
            out.outcome = Shot::Overshoot;
            break;
        }
        if y[1] >= 0.0 && y[0] < 1.0 {
            out.outcome = Shot::Undershoot;
            break;
        }
        if y[0] <= 1e-9 || s >= S_MAX - 1e-9 {
            out.outcome = Shot::Undershoot;
            break;
        }
    }
    out.energy_acc = y[2];
    out
}

/// Shooting solver for the c-scaled ground-state equation.
pub fn ground_state_shoot_scaled(n_dim: u32, p: f64, c: f64) -> Result<GroundState> {
    ground_state_shoot_tol(n_dim, p, c, 1e-11)
}

/// Same with an explicit relative ODE tolerance (for self-convergence checks).
pub fn ground_state_shoot_tol(n_dim: u32, p: f64, c: f64, rtol: f64) -> Result<GroundState> {
    if n_dim < 1 {
        return Err(Error::Param("dimension must be ≥ 1".into()));
    }
    if p <= 1.0 {
        return Err(Error::Param(format!("power must be > 1, got {p}")));
    }
    if n_dim >= 3 {
        let crit = (n_dim as f64 + 2.0) / (n_dim as f64 - 2.0);
        if p >= crit {
            return Err(Error::Param(format!(
                "supercritical power p={p} ≥ {crit} in dimension {n_dim}: no decaying ground state"
            )));
        }
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Param(format!("coefficient must be positive, got {c}")));
    }
    let ode = OdeParams {
        n_dim: n_dim as f64,
        p,
        c,
    };
    // bracket: z0 slightly above the constant solution 1 undershoots;
    // grow the upper end until it overshoots
    let mut lo = 1.0 + 1e-6;
    if integrate(&ode, lo, false, rtol, 0.05).outcome != Shot::Undershoot {
        return Err(Error::Param("shooting bracket failed at the lower end".into()));
    }
    let mut hi = 2.0;
    let mut bracketed = false;
    for _ in 0..60 {
        if integrate(&ode, hi, false, rtol, 0.05).outcome == Shot::Overshoot {
            bracketed = true;
            break;
        }
        hi *= 2.0;
    }
    if !bracketed {
        return Err(Error::Param("shooting bracket not found (no overshoot)".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match integrate(&ode, mid, false, rtol, 0.05).outcome {
            Shot::Overshoot => hi = mid,
            Shot::Undershoot => lo = mid,
        }
    }
    let z0 = lo;
    let mut traj = integrate(&ode, z0, true, rtol, 0.005);

    // exponential tail graft past the ODE stopping point
    let kappa = c.sqrt();
    let s1 = *traj.s.last().unwrap();
    let z1 = traj.z.last().unwrap().max(1e-300);
    let half_exp = (n_dim as f64 - 1.0) / 2.0;
    let tail = |s: f64| -> (f64, f64) {
        let amp = z1 * (s1 / s).powf(half_exp) * (-kappa * (s - s1)).exp();
        let damp = amp * (-kappa - half_exp / s);
        (amp, damp)
    };
    let mut energy = traj.energy_acc;
    let ds = 0.01;
    let mut s = s1;
    let mut prev_e = {
        let (z, dz) = (traj.z[traj.z.len() - 1], traj.dz[traj.dz.len() - 1]);
        (0.5 * dz * dz + c * (0.5 * z * z - z.abs().powf(p + 1.0) / (p + 1.0)))
            * s.powf(n_dim as f64 - 1.0)
    };
    while s < S_MAX {
        s += ds;
        let (z, dz) = tail(s);
        let e = (0.5 * dz * dz + c * (0.5 * z * z - z.powf(p + 1.0) / (p + 1.0)))
            * s.powf(n_dim as f64 - 1.0);
        energy += 0.5 * (prev_e + e) * ds;
        prev_e = e;
        traj.s.push(s);
        traj.z.push(z);
        traj.dz.push(dz);
        if z <= 0.5e-8 {
            break;
        }
    }
    if *traj.z.last().unwrap() > 1e-8 {
        return Err(Error::Param(
            "ground-state profile failed to decay below 1e-8 before the radius cap".into(),
        ));
    }
    let sphere = unit_sphere_area(n_dim - 1);
    Ok(GroundState {
        n_dim,
        p,
        coeff: c,
        z0,
        s: traj.s,
        z: traj.z,
        dz: traj.dz,
        energy: sphere * energy,
    })
}

/// Ground state of −Δz + z − z^p = 0 (c = 1).
pub fn ground_state_shoot(n_dim: u32, p: f64) -> Result<GroundState> {
    ground_state_shoot_scaled(n_dim, p, 1.0)
}

impl GroundState {
    /// Cubic-Hermite evaluation of the profile (0 beyond the stored range).
    pub fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return self.z0;
        }
        let n = self.s.len();
        if s >= self.s[n - 1] {
            return 0.0;
        }
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.s[mid] <= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = self.s[hi] - self.s[lo];
        let t = (s - self.s[lo]) / h;
        let (z0, z1) = (self.z[lo], self.z[hi]);
        let (m0, m1) = (self.dz[lo] * h, self.dz[hi] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * z0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * z1
            + (t3 - t2) * m1
    }

    pub fn s_max(&self) -> f64 {
        *self.s.last().unwrap()
    }
}

/// √(2d)·I(z), the limit energy of a spike at distance-to-origin d.
pub fn limit_energy(d: f64, gs: &GroundState) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    Ok((2.0 * d).sqrt() * gs.energy)
}

/// Location and scale diagnostics of a solution's peak.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PeakDiagnostics {
    pub radial_index: usize,
    pub angular_index: usize,
    /// |P_λ| = ρ at the peak.
    pub radius: f64,
    pub polar_angle: f64,
    pub value: f64,
    /// d(P_λ, ∂D) = min(|P|−R1, R2−|P|).
    pub boundary_distance: f64,
    /// √λ·d(P_λ, ∂D).
    pub scaled_distance: f64,
    /// Whether the peak sits on the symmetry axis (φ ∈ {0, π}).
    pub on_axis: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PeakReport {
    /// Peak of the positive part (or of |v| for sign-definite fields).
    pub primary: PeakDiagnostics,
    /// Peak of the negative part, for sign-changing fields.
    pub secondary: Option<PeakDiagnostics>,
    /// Euclidean distance between the two peaks downstairs.
    pub separation: Option<f64>,
}

/// Peak diagnostics of a converged solution field.
pub fn peak_diagnostics(v: &Field, params: &ProblemParams) -> Result<PeakReport> {
    let scale = v.max_abs();
    if !(scale > 0.0) || (v.max_value() - v.min_value()).abs() <= 1e-14 * scale {
        return Err(Error::Degenerate("field is flat; no peak to locate".into()));
    }
    let dom = params.reduced();
    let grid = v.grid().clone();
    let (nr, na) = (grid.n_radial(), grid.n_angular());
    let floor = 1e-8 * scale;
    let locate = |sign: f64| -> Option<PeakDiagnostics> {
        let mut best = f64::NEG_INFINITY;
        let mut at = (0usize, 0usize);
        for i in 0..nr {
            for j in 0..na {
                let t = sign * v.at(i, j);
                if t > best {
                    best = t;
                    at = (i, j);
                }
            }
        }
        if best <= floor {
            return None;
        }
        let rho = grid.radial[at.0];
        let phi = grid.angular[at.1];
        let d = (rho - dom.r1).min(dom.r2 - rho).max(0.0);
        Some(PeakDiagnostics {
            radial_index: at.0,
            angular_index: at.1,
            radius: rho,
            polar_angle: phi,
            value: sign * best,
            boundary_distance: d,
            scaled_distance: params.lambda.sqrt() * d,
            on_axis: at.1 == 0 || at.1 == na - 1,
        })
    };
    let pos = locate(1.0);
    let neg = locate(-1.0);
    let (primary, secondary) = match (pos, neg) {
        (Some(p), n) => (p, n),
        (None, Some(n)) => (n, None),
        (None, None) => return Err(Error::Degenerate("field has no peak above floor".into())),
    };
    let separation = secondary.map(|sec| {
        let (r1, f1) = (primary.radius, primary.polar_angle);
        let (r2, f2) = (sec.radius, sec.polar_angle);
        (r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * (f1 - f2).cos()).max(0.0).sqrt()
    });
    Ok(PeakReport {
        primary,
        secondary,
        separation,
    })
}

/// sup of |v| over nodes at downstairs distance > radius from (ρc, φc).
pub fn sup_outside_ball(v: &Field, rho_c: f64, phi_c: f64, radius: f64) -> f64 {
    let grid = v.grid();
    let mut worst = 0.0_f64;
    for (i, &rho) in grid.radial.iter().enumerate() {
        for (j, &phi) in grid.angular.iter().enumerate() {
            let d2 = rho * rho + rho_c * rho_c - 2.0 * rho * rho_c * (phi - phi_c).cos();
            if d2 > radius * radius {
                worst = worst.max(v.at(i, j).abs());
            }
        }
    }
    worst
}

/// Everything recorded per sweep point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub status: String,
    pub converged_positive: bool,
    pub iterations_positive: usize,
    pub residual_positive: f64,
    pub energy_positive: f64,
    pub dirichlet: f64,
    pub mass: f64,
    pub power: f64,
    pub sup_norm_positive: f64,
    pub peak: PeakDiagnostics,
    /// |P_λ| − R1.
    pub peak_gap: f64,
    /// λ-normalized energy over the limit law √(2R1)·I(z).
    pub energy_ratio: f64,
    pub sup_outside_ball: f64,
    pub mu1: f64,
    /// (1−p)·λ, the test-function upper bound for μ₁.
    pub mu1_bound: f64,
    pub morse_index_positive: usize,
    pub phi_negative_count: usize,
    pub q_phi_1: f64,
    pub phi_reports: Vec<PhiKReport>,
    pub converged_nodal: bool,
    pub iterations_nodal: usize,
    pub residual_nodal: f64,
    pub energy_nodal: f64,
    pub nodal_regions: usize,
    pub nehari_defect_positive_part: f64,
    pub nehari_defect_negative_part: f64,
    pub morse_index_nodal: usize,
    pub peak_positive_radius: f64,
    pub peak_negative_radius: f64,
    pub peak_separation: f64,
    pub mu1_nodal: f64,
    pub mu2_nodal: f64,
    pub wall_ms: u128,
}

impl SweepRow {
    pub fn energy_breakdown(&self) -> EnergyBreakdown {
        EnergyBreakdown {
            dirichlet: self.dirichlet,
            mass: self.mass,
            power: self.power,
            total: self.energy_positive,
        }
    }
}

/// Pass/fail trend flags over a λ-sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrendFlags {
    /// |P_λ| − R1 strictly decreasing.
    pub peak_gap_decreasing: bool,
    /// √λ·d(P_λ, ∂D) nondecreasing over the last three λ.
    pub scaled_distance_tail_nondecreasing: bool,
    /// sup|v_λ| outside the fixed ball around the limit peak decreasing.
    pub sup_outside_decreasing: bool,
    /// |energy ratio − 1| nonincreasing (ratio → 1).
    pub energy_ratio_toward_one: bool,
    /// μ₁ strictly decreasing.
    pub mu1_decreasing: bool,
    /// μ₁ ≤ (1−p)λ at every point.
    pub mu1_below_bound: bool,
    /// #{k: Q(Φᵏ) < 0} nondecreasing.
    pub phi_count_nondecreasing: bool,
}

impl TrendFlags {
    pub fn all_pass(&self) -> bool {
        self.peak_gap_decreasing
            && self.scaled_distance_tail_nondecreasing
            && self.sup_outside_decreasing
            && self.energy_ratio_toward_one
            && self.mu1_decreasing
            && self.mu1_below_bound
            && self.phi_count_nondecreasing
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub flags: Option<TrendFlags>,
}

/// Aggregates per-λ rows into trend diagnostics.  Requires at least three
/// sweep points with strictly increasing λ; with fewer rows the flags are
/// reported as not applicable (None) by [`concentration_report_lenient`].
pub fn concentration_report(rows: &[SweepRow]) -> Result<SweepReport> {
    if rows.len() < 3 {
        return Err(Error::Contract(format!(
            "trend verification needs at least 3 sweep points, got {}",
            rows.len()
        )));
    }
    check_lambdas(rows)?;
    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.converged_positive).collect();
    if ok.len() < 3 {
        return Err(Error::Contract(
            "fewer than 3 converged sweep points; trends are not meaningful".into(),
        ));
    }
    let dec = |f: &dyn Fn(&SweepRow) -> f64| ok.windows(2).all(|w| f(w[1]) < f(w[0]));
    let flags = TrendFlags {
        peak_gap_decreasing: dec(&|r| r.peak_gap),
        scaled_distance_tail_nondecreasing: {
            let tail = &ok[ok.len().saturating_sub(3)..];
            tail.windows(2)
                .all(|w| w[1].peak.scaled_distance >= w[0].peak.scaled_distance)
        },
        sup_outside_decreasing: dec(&|r| r.sup_outside_ball),
        energy_ratio_toward_one: ok
            .windows(2)
            .all(|w| (w[1].energy_ratio - 1.0).abs() <= (w[0].energy_ratio - 1.0).abs() + 1e-12),
        mu1_decreasing: dec(&|r| r.mu1),
        mu1_below_bound: ok.iter().all(|r| r.mu1 <= r.mu1_bound),
        phi_count_nondecreasing: ok
            .windows(2)
            .all(|w| w[1].phi_negative_count >= w[0].phi_negative_count),
    };
    Ok(SweepReport {
        rows: rows.to_vec(),
        flags: Some(flags),
    })
}

/// Like [`concentration_report`] but reports `flags: None` when fewer than
/// three sweep points (or fewer than three converged rows) are available.
pub fn concentration_report_lenient(rows: &[SweepRow]) -> Result<SweepReport> {
    check_lambdas(rows)?;
    if rows.len() < 3 || rows.iter().filter(|r| r.converged_positive).count() < 3 {
        return Ok(SweepReport {
            rows: rows.to_vec(),
            flags: None,
        });
    }
    concentration_report(rows)
}

fn check_lambdas(rows: &[SweepRow]) -> Result<()> {
    for w in rows.windows(2) {
        if !(w[1].lambda > w[0].lambda) {
            return Err(Error::Contract(format!(
                "sweep λ values must be strictly increasing ({} then {})",
                w[0].lambda, w[1].lambda
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use approx::assert_relative_eq;

    #[test]
    fn one_dimensional_soliton_closed_form() {
        // z(s) = √2·sech(s) for N = 1, p = 3: z0 = √2, I(z) = 4/3.
        let gs = ground_state_shoot(1, 3.0).unwrap();
        assert_relative_eq!(gs.z0, std::f64::consts::SQRT_2, epsilon = 1e-6);
        for &s in &[0.0_f64, 0.3, 1.0, 2.5, 5.0] {
            let exact = std::f64::consts::SQRT_2 / s.cosh();
            assert_relative_eq!(gs.eval(s), exact, epsilon = 1e-6);
        }
        assert_relative_eq!(gs.energy, 4.0 / 3.0, max_relative = 1e-6);
    }

    #[test]
    fn profile_invariants() {
        let gs = ground_state_shoot(3, 3.0).unwrap();
        assert!(gs.z.windows(2).all(|w| w[1] <= w[0] + 1e-12), "profile not decreasing");
        assert!(*gs.z.last().unwrap() <= 1e-8);
        assert!(gs.dz[0].abs() < 1e-8);
        assert!(gs.z0 > 1.0);
    }

    #[test]
    fn shooter_self_convergence() {
        // halving the ODE tolerance moves z0 and I(z) by less than 1e-6
        let gs = ground_state_shoot_tol(3, 3.0, 1.0, 1e-10).unwrap();
        let gs2 = ground_state_shoot_tol(3, 3.0, 1.0, 0.5e-10).unwrap();
        assert_relative_eq!(gs.z0, gs2.z0, max_relative = 1e-6);
        assert_relative_eq!(gs.energy, gs2.energy, max_relative = 1e-6);
    }

    #[test]
    fn rescaling_identity() {
        // w_d(s) = z(s/√(2d)) solves the c = 1/(2d) equation
        let gs = ground_state_shoot(3, 3.0).unwrap();
        for d in [0.5, 1.0, 2.0] {
            let c = 1.0 / (2.0 * d);
            let wd = ground_state_shoot_scaled(3, 3.0, c).unwrap();
            assert_relative_eq!(wd.z0, gs.z0, max_relative = 1e-7);
            let sqrt2d = (2.0 * d).sqrt();
            let s_hi = wd.s_max().min(gs.s_max() * sqrt2d);
            let mut s = 0.0;
            while s < s_hi {
                let expect = gs.eval(s / sqrt2d);
                assert!(
                    (wd.eval(s) - expect).abs() < 1e-6,
                    "d={d}, s={s}: {} vs {}",
                    wd.eval(s),
                    expect
                );
                s += 0.37;
            }
            // I_d(w_d) = (2d)^{N/2−1}·I(z) = √(2d)·I(z) at N = 3
            assert_relative_eq!(wd.energy, sqrt2d * gs.energy, max_relative = 1e-6);
            assert_relative_eq!(limit_energy(d, &gs).unwrap(), sqrt2d * gs.energy, max_relative = 1e-12);
        }
    }

    #[test]
    fn limit_energy_contract() {
        let gs = ground_state_shoot(3, 3.0).unwrap();
        assert_relative_eq!(limit_energy(0.5, &gs).unwrap(), gs.energy, epsilon = 1e-14);
        assert!(limit_energy(-1.0, &gs).is_err());
        assert!(limit_energy(0.0, &gs).is_err());
        // monotone increasing in d
        let mut prev = 0.0;
        for d in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let e = limit_energy(d, &gs).unwrap();
            assert!(e > prev);
            prev = e;
        }
    }

    #[test]
    fn supercritical_power_is_rejected() {
        assert!(ground_state_shoot(3, 5.5).is_err());
        assert!(ground_state_shoot(3, 1.0).is_err());
    }

    #[test]
    fn peak_diagnostics_basics() {
        let params = ProblemParams::new(2, 1.0, 2.0, 3.0, 100.0).unwrap();
        let grid = Grid::reduced(&params.reduced(), 32, 16).unwrap();
        // bump with max on the inner boundary node
        let v = Field::from_fn(grid.clone(), |rho, phi| {
            (-(rho - 0.5) * 4.0).exp() * (1.0 + phi.cos())
        });
        let rep = peak_diagnostics(&v, &params).unwrap();
        assert_eq!(rep.primary.radial_index, 0);
        assert_eq!(rep.primary.boundary_distance, 0.0);
        assert!(rep.primary.on_axis);
        assert!(rep.secondary.is_none());

        let flat = Field::from_fn(grid.clone(), |_, _| 1.0);
        assert!(peak_diagnostics(&flat, &params).is_err());

        // sign-changing: peaks at both poles
        let v = Field::from_fn(grid, |rho, phi| {
            let bump = (-(rho - 1.0) * (rho - 1.0) * 30.0).exp();
            bump * phi.cos()
        });
        let rep = peak_diagnostics(&v, &params).unwrap();
        assert!(rep.secondary.is_some());
        let sep = rep.separation.unwrap();
        // peaks near (1, 0) and (1, π): separation ≈ 2
        assert_relative_eq!(sep, rep.primary.radius + rep.secondary.unwrap().radius, epsilon = 1e-12);
    }

    #[test]
    fn sup_outside_excludes_the_ball() {
        let params = ProblemParams::new(2, 1.0, 2.0, 3.0, 100.0).unwrap();
        let grid = Grid::reduced(&params.reduced(), 48, 24).unwrap();
        let v = Field::from_fn(grid, |rho, phi| {
            let d2 = rho * rho + 0.25 - 2.0 * rho * 0.5 * phi.cos();
            (-d2 * 40.0).exp()
        });
        let all = sup_outside_ball(&v, 0.5, 0.0, 0.0);
        let outside = sup_outside_ball(&v, 0.5, 0.0, 0.4);
        assert!(outside < all);
        assert!(outside < 0.05);
    }

    fn demo_row(lambda: f64, gap: f64, sd: f64, sup: f64, ratio: f64, mu1: f64, cnt: usize) -> SweepRow {
        let peak = PeakDiagnostics {
            radial_index: 1,
            angular_index: 0,
            radius: 0.5 + gap,
            polar_angle: 0.0,
            value: 1.0,
            boundary_distance: gap,
            scaled_distance: sd,
            on_axis: true,
        };
        SweepRow {
            lambda,
            status: "ok".into(),
            converged_positive: true,
            iterations_positive: 10,
            residual_positive: 1e-9,
            energy_positive: 1.0,
            dirichlet: 1.0,
            mass: 0.5,
            power: 0.5,
            sup_norm_positive: 1.0,
            peak,
            peak_gap: gap,
            energy_ratio: ratio,
            sup_outside_ball: sup,
            mu1,
            mu1_bound: -2.0 * lambda,
            morse_index_positive: 1,
            phi_negative_count: cnt,
            q_phi_1: -1.0,
            phi_reports: vec![],
            converged_nodal: true,
            iterations_nodal: 10,
            residual_nodal: 1e-9,
            energy_nodal: 2.0,
            nodal_regions: 2,
            nehari_defect_positive_part: 0.0,
            nehari_defect_negative_part: 0.0,
            morse_index_nodal: 2,
            peak_positive_radius: 0.6,
            peak_negative_radius: 0.6,
            peak_separation: 1.2,
            mu1_nodal: mu1,
            mu2_nodal: mu1 * 0.9,
            wall_ms: 1,
        }
    }

    #[test]
    fn trend_flags_on_synthetic_sweep() {
        let rows = vec![
            demo_row(50.0, 0.30, 1.0, 0.50, 1.40, -100.0, 1),
            demo_row(100.0, 0.20, 1.2, 0.30, 1.25, -220.0, 2),
            demo_row(200.0, 0.12, 1.5, 0.10, 1.12, -450.0, 4),
        ];
        let rep = concentration_report(&rows).unwrap();
        assert!(rep.flags.unwrap().all_pass());
    }

    #[test]
    fn sweep_contract_errors() {
        let rows = vec![demo_row(50.0, 0.3, 1.0, 0.5, 1.4, -100.0, 1)];
        assert!(concentration_report(&rows).is_err());
        let lenient = concentration_report_lenient(&rows).unwrap();
        assert!(lenient.flags.is_none());
        // duplicated λ
        let rows = vec![
            demo_row(50.0, 0.3, 1.0, 0.5, 1.4, -100.0, 1),
            demo_row(50.0, 0.2, 1.2, 0.3, 1.2, -200.0, 2),
            demo_row(80.0, 0.1, 1.5, 0.1, 1.1, -400.0, 3),
        ];
        assert!(concentration_report(&rows).is_err());
        assert!(concentration_report_lenient(&rows).is_err());
    }
}
