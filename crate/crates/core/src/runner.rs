//! Command implementations behind the CLI: verification suites, single
//! solves, λ-sweeps with resume, ground-state runs, and spectrum reports.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{
    concentration_report_lenient, ground_state_shoot, peak_diagnostics, sup_outside_ball,
    GroundState, SweepRow, TrendFlags,
};
use crate::config::RunConfig;
use crate::coords::{lifted_residual_report, LiftedResidualReport};
use crate::disc::Measure;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid, GridMeta};
use crate::nehari::{
    count_nodal_regions, max_monotonicity_violation, ReducedProblem, SolveOptions, SolveOutcome,
};
use crate::params::unit_sphere_area;
use crate::report::{axis_profile_text, sweep_csv, write_atomic, write_field, write_json};
use crate::spectral::{
    eigs_smallest, first_symmetric_eigenpair, linearized_operator, morse_index, phi_k_reports,
    morse_lower_bound_upstairs,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed,
        detail,
    }
}

/// Identity suites of the change of variables and the discrete operators.
/// `corrupt` is a test hook that injects a broken transform so the suite
/// must fail (negative control).
pub fn cmd_verify_reduction(cfg: &RunConfig, corrupt: bool) -> Result<VerifyReport> {
    use crate::coords::{lift_field, lift_point, reduce_field, reduce_point, PolarPoint2m};
    use rand::{Rng, SeedableRng};

    let params = cfg.params_for(cfg.lambdas[0])?;
    let dom = params.reduced();
    let grid = Grid::reduced(&dom, cfg.n_rho, cfg.n_phi)?;
    let mut checks = Vec::new();

    // 1. point round trip
    {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37);
        let mut worst = 0.0_f64;
        for _ in 0..500 {
            let pt = PolarPoint2m {
                r: rng.random_range(params.a..params.b),
                theta: rng.random_range(0.0..std::f64::consts::FRAC_PI_2),
            };
            let down = reduce_point(&params, pt)?;
            let back = lift_point(&params, down)?;
            let defect = (back.r - pt.r).abs().max((back.theta - pt.theta).abs());
            worst = worst.max(defect);
        }
        if corrupt {
            worst += 1e-3;
        }
        checks.push(check(
            "point-round-trip",
            worst <= 1e-13,
            format!("max |lift(reduce(x)) - x| = {worst:.3e} (tolerance 1e-13)"),
        ));
    }

    // 2. field transport is a bitwise relabeling
    {
        let v = Field::from_fn(grid.clone(), |rho, phi| (rho * 2.1).sin() + 0.5 * phi.cos());
        let u = lift_field(&v)?;
        let mut back = reduce_field(&u, &grid)?;
        if corrupt {
            let vals = back.values_mut();
            vals[37] += 1e-9;
        }
        let bitwise = back.values() == v.values();
        checks.push(check(
            "field-round-trip-bitwise",
            bitwise,
            if bitwise {
                "reduce(lift(v)) is bit-identical to v".into()
            } else {
                "reduce(lift(v)) differs from v".into()
            },
        ));
    }

    // 3. polynomial identity cases are exact
    {
        let cases: [(&str, Box<dyn Fn(f64, f64) -> f64>); 2] = [
            ("u=r^2", Box::new(|rho, _| 2.0 * rho)),
            ("u=r^2cos2t", Box::new(|rho, phi: f64| 2.0 * rho * phi.cos())),
        ];
        for (name, f) in cases {
            let v = Field::from_fn(grid.clone(), &f);
            let mut defect = crate::coords::verify_laplacian_identity(&v, params.m)?;
            if corrupt {
                defect += 1e-3;
            }
            checks.push(check(
                &format!("identity-exact-{name}"),
                defect <= 1e-10,
                format!("max defect {defect:.3e} (tolerance 1e-10)"),
            ));
        }
    }

    // 4. second-order convergence of the identity defect on a smooth field,
    // refining upward so any configured grid size works
    {
        let field = |g: &Arc<Grid>| Field::from_fn(g.clone(), |rho, phi| rho.sin() * phi.cos());
        let d_coarse = crate::coords::verify_laplacian_identity(&field(&grid), params.m)?;
        let fine_grid = Grid::reduced(&dom, 2 * cfg.n_rho - 1, 2 * cfg.n_phi - 1)?;
        let d_fine = crate::coords::verify_laplacian_identity(&field(&fine_grid), params.m)?;
        let order = (d_coarse / d_fine).log2();
        let ok = if corrupt { false } else { order >= 1.9 };
        checks.push(check(
            "identity-second-order",
            ok,
            format!("defect {d_coarse:.3e} -> {d_fine:.3e}, observed order {order:.2} (needs >= 1.9)"),
        ));
    }

    // 5. self-adjointness certificates
    {
        let lap = crate::disc::assemble_axisym_laplacian(grid.clone(), dom.n_dim)?;
        let up = crate::disc::assemble_upstairs_laplacian(Grid::lifted(&grid), params.m)?;
        for (name, op) in [("downstairs", &lap), ("upstairs", &up)] {
            let defect = op.symmetry_defect();
            checks.push(check(
                &format!("self-adjoint-{name}"),
                op.is_self_adjoint(),
                format!("symmetry defect {defect:.3e} (tolerance 1e-10)"),
            ));
        }
    }

    // 6. quadrature reproduces closed-form annulus volumes
    {
        let n = dom.n_dim;
        let vol = Measure::volume(grid.clone(), n);
        let one = Field::from_fn(grid.clone(), |_, _| 1.0);
        let got = vol.integrate(&one)?;
        let exact = unit_sphere_area(n - 1) * (dom.r2.powi(n as i32) - dom.r1.powi(n as i32))
            / n as f64;
        let rel = ((got - exact) / exact).abs();
        checks.push(check(
            "volume-quadrature-downstairs",
            rel <= 1e-6,
            format!("{got:.9} vs {exact:.9} (relative error {rel:.3e}, tolerance 1e-6)"),
        ));
        let up_grid = Grid::lifted(&grid);
        let volu = Measure::upstairs_volume(up_grid.clone(), params.m);
        let oneu = Field::from_fn(up_grid, |_, _| 1.0);
        let got = volu.integrate(&oneu)?;
        let dim = 2 * params.m;
        let exact = unit_sphere_area(dim - 1) * (params.b.powi(dim as i32) - params.a.powi(dim as i32))
            / dim as f64;
        let rel = ((got - exact) / exact).abs();
        checks.push(check(
            "volume-quadrature-upstairs",
            rel <= 1e-6,
            format!("{got:.9} vs {exact:.9} (relative error {rel:.3e}, tolerance 1e-6)"),
        ));
    }

    Ok(VerifyReport { checks })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveKind {
    Positive,
    Nodal,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub version: String,
    pub kind: SolveKind,
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual_norm: f64,
    pub energy: crate::nehari::EnergyBreakdown,
    pub morse_index: Option<usize>,
    pub peak: crate::asymptotics::PeakReport,
    pub monotonicity_violation: f64,
    pub nodal_regions: Option<(usize, usize)>,
    pub nehari_defects: Option<(f64, f64)>,
    pub residuals: LiftedResidualReport,
    pub multistart: Option<MultistartReport>,
    pub wall_ms: u128,
    pub config: String,
    pub field_file: String,
    pub lifted_field_file: String,
}

/// Plausibility check of the least-energy property: extra solves from
/// randomized initial bumps; converged energies should agree with the best.
#[derive(Debug, Clone, Serialize)]
pub struct MultistartReport {
    pub starts: usize,
    pub converged: usize,
    pub best_energy: f64,
    pub max_energy_spread: f64,
}

fn solve_options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions {
        tol: cfg.tol,
        max_iters: cfg.max_iters,
        descent: cfg.descent_kind(),
        init_side: cfg.init_side_kind(),
        newton: cfg.newton,
        init: None,
    }
}

/// Initial guess built from the rescaled limit profile: a spike
/// √λ·z(√λ·|x − P₀|/√(2ρ₀)) placed at the predicted concentration point
/// near the inner boundary.  Keeps the solver out of lattice-pinned local
/// minima that trap spikes at marginal resolution.
fn spike_profile_init(problem: &ReducedProblem, gs: &GroundState, nodal: bool) -> Field {
    let dom = problem.dom;
    let lambda = problem.params.lambda;
    let sqrt_l = lambda.sqrt();
    // empirical location law d ≈ 0.33·ln(λ)·√(2R1)/√λ, kept inside the annulus
    let d0 = (0.33 * lambda.ln() * (2.0 * dom.r1).sqrt() / sqrt_l)
        .clamp(0.02 * dom.width(), 0.45 * dom.width());
    let rho0 = dom.r1 + d0;
    let scale = sqrt_l / (2.0 * rho0).sqrt();
    let ramp_in = 0.6 * d0;
    let ramp_out = 0.2 * dom.width();
    let spike = |rho: f64, phi: f64, phi0: f64| -> f64 {
        let d2 = rho * rho + rho0 * rho0 - 2.0 * rho * rho0 * (phi - phi0).cos();
        let cutoff = ((rho - dom.r1) / ramp_in).min((dom.r2 - rho) / ramp_out).min(1.0).max(0.0);
        sqrt_l * gs.eval(scale * d2.max(0.0).sqrt()) * cutoff
    };
    let mut v = Field::from_fn(problem.grid.clone(), |rho, phi| spike(rho, phi, 0.0));
    if nodal {
        let neg = Field::from_fn(problem.grid.clone(), |rho, phi| {
            spike(rho, phi, std::f64::consts::PI)
        });
        v.axpy(-1.0, &neg);
    }
    v.zero_radial_boundary();
    v
}

fn solve_options_with_profile(
    cfg: &RunConfig,
    problem: &ReducedProblem,
    gs: &GroundState,
    nodal: bool,
) -> SolveOptions {
    let mut opts = solve_options(cfg);
    // the profile init replaces the generic bump only for inner-side starts
    if cfg.init_side_kind() == crate::nehari::InitSide::Inner {
        opts.init = Some(spike_profile_init(problem, gs, nodal));
    }
    opts
}

/// Single positive or nodal solve with artifacts under `out/solve-<kind>/`.
pub fn cmd_solve(cfg: &RunConfig, kind: SolveKind) -> Result<SolveSummary> {
    let t0 = Instant::now();
    let lambda = cfg.lambdas[0];
    let params = cfg.params_for(lambda)?;
    let grid = Grid::reduced(&params.reduced(), cfg.n_rho, cfg.n_phi)?;
    let problem = ReducedProblem::new(params, grid.clone())?;
    let gs = ground_state_shoot(params.m + 1, cfg.p)?;
    let opts = solve_options_with_profile(cfg, &problem, &gs, kind == SolveKind::Nodal);
    let solve_res = match kind {
        SolveKind::Positive => problem.solve_positive(&opts),
        SolveKind::Nodal => problem.solve_nodal(&opts),
    };
    let (outcome, converged) = match solve_res {
        Ok(o) => (o, true),
        Err(Error::NonConvergence { last, .. }) => (*last, false),
        Err(e) => return Err(e),
    };

    let dir = Path::new(&cfg.out_dir).join(match kind {
        SolveKind::Positive => "solve-positive",
        SolveKind::Nodal => "solve-nodal",
    });
    std::fs::create_dir_all(&dir)?;

    let meta = GridMeta::reduced(&grid);
    write_field(&dir, "solution", &outcome.field, &meta)?;
    let lifted = crate::coords::lift_field(&outcome.field)?;
    write_field(&dir, "solution_lifted", &lifted, &GridMeta::lifted(&grid))?;
    write_atomic(
        &dir.join("axis_profile.txt"),
        axis_profile_text(&outcome.field).as_bytes(),
    )?;

    let morse = morse_index(&problem, &outcome.field, None).ok();
    let peak = peak_diagnostics(&outcome.field, &problem.params)?;
    let residuals = lifted_residual_report(&problem, &outcome.field)?;
    let nodal_regions = match kind {
        SolveKind::Nodal => Some(count_nodal_regions(&outcome.field, 1e-10)),
        SolveKind::Positive => None,
    };
    let nehari_defects = match kind {
        SolveKind::Nodal => Some(problem.nodal_defects(&outcome.field)?),
        SolveKind::Positive => None,
    };
    let multistart = if cfg.multistart > 0 {
        Some(run_multistart(cfg, &problem, kind, &outcome)?)
    } else {
        None
    };
    let summary = SolveSummary {
        version: VERSION.into(),
        kind,
        lambda,
        converged: converged && outcome.converged,
        iterations: outcome.iterations,
        residual_norm: outcome.residual_norm,
        energy: outcome.energy,
        morse_index: morse,
        peak,
        monotonicity_violation: max_monotonicity_violation(&outcome.field),
        nodal_regions,
        nehari_defects,
        residuals,
        multistart,
        wall_ms: t0.elapsed().as_millis(),
        config: cfg.canonical_string(),
        field_file: "solution.f64".into(),
        lifted_field_file: "solution_lifted.f64".into(),
    };
    write_json(&dir.join("result.json"), &summary)?;
    write_atomic(&dir.join("config.txt"), cfg.canonical_string().as_bytes())?;
    Ok(summary)
}

fn run_multistart(
    cfg: &RunConfig,
    problem: &ReducedProblem,
    kind: SolveKind,
    reference: &SolveOutcome,
) -> Result<MultistartReport> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x1117);
    let dom = problem.dom;
    let mut best = reference.energy.total;
    let mut worst_gap = 0.0_f64;
    let mut converged = 0usize;
    for _ in 0..cfg.multistart {
        let rho0 = rng.random_range(dom.r1 + 0.05 * dom.width()..dom.r2 - 0.05 * dom.width());
        let width = (2.0 * dom.r1 / problem.params.lambda).sqrt().max(0.02 * dom.width()) * 1.5;
        let mut init = problem.bump(rho0, 0.0, width);
        if kind == SolveKind::Nodal {
            let neg = problem.bump(rho0, std::f64::consts::PI, width);
            init.axpy(-1.0, &neg);
        }
        let mut opts = solve_options(cfg);
        opts.init = Some(init);
        let res = match kind {
            SolveKind::Positive => problem.solve_positive(&opts),
            SolveKind::Nodal => problem.solve_nodal(&opts),
        };
        if let Ok(o) = res {
            converged += 1;
            worst_gap = worst_gap.max((o.energy.total - reference.energy.total).abs());
            best = best.min(o.energy.total);
        }
    }
    Ok(MultistartReport {
        starts: cfg.multistart,
        converged,
        best_energy: best,
        max_energy_spread: worst_gap,
    })
}

/// λ-normalization exponent of the energy: J·λ^{N/2 − (p+1)/(p−1)} tends to
/// the limit law √(2R1)·I(z).
pub fn energy_normalization(n_dim: u32, p: f64, lambda: f64) -> f64 {
    lambda.powf(n_dim as f64 / 2.0 - (p + 1.0) / (p - 1.0))
}

/// Sweep-point result carrying the computed fields (for cross-module
/// checks); the persisted row holds only scalars.
pub struct SweepPoint {
    pub row: SweepRow,
    pub positive: SolveOutcome,
    pub nodal: SolveOutcome,
    pub g1: Field,
    pub problem: ReducedProblem,
}

/// Full per-λ pipeline: both solves, spectra, Φᵏ quadratic forms, peaks.
pub fn sweep_point(cfg: &RunConfig, lambda: f64, gs: &GroundState) -> Result<SweepRow> {
    Ok(sweep_point_full(cfg, lambda, gs)?.row)
}

pub fn sweep_point_full(cfg: &RunConfig, lambda: f64, gs: &GroundState) -> Result<SweepPoint> {
    let t0 = Instant::now();
    let params = cfg.params_for(lambda)?;
    let dom = params.reduced();
    let grid = Grid::reduced(&dom, cfg.n_rho, cfg.n_phi)?;
    let problem = ReducedProblem::new(params, grid.clone())?;

    let mut status = String::from("ok");
    let opts = solve_options_with_profile(cfg, &problem, gs, false);
    let (pos, pos_ok) = match problem.solve_positive(&opts) {
        Ok(o) => (o, true),
        Err(Error::NonConvergence { last, .. }) => {
            status = "positive-not-converged".into();
            (*last, false)
        }
        Err(e) => return Err(e),
    };

    let peak_rep = peak_diagnostics(&pos.field, &problem.params)?;
    let peak = peak_rep.primary;
    let ball = cfg.ball_radius_frac * dom.width();
    let sup_out = sup_outside_ball(&pos.field, dom.r1, 0.0, ball);
    let norm = energy_normalization(dom.n_dim, cfg.p, lambda);
    let limit = (2.0 * dom.r1).sqrt() * gs.energy;
    let energy_ratio = pos.energy.total * norm / limit;

    let (mu1, _g1) = first_symmetric_eigenpair(&problem, &pos.field)?;
    let morse_pos = match morse_index(&problem, &pos.field, None) {
        Ok(i) => i,
        Err(Error::IndeterminateIndex { .. }) => {
            if status == "ok" {
                status = "morse-indeterminate".into();
            }
            usize::MAX
        }
        Err(e) => return Err(e),
    };
    let g1 = _g1;
    let reports = phi_k_reports(&problem, &g1, &pos.field, cfg.k_max)?;
    let phi_neg = morse_lower_bound_upstairs(&reports);
    let q_phi_1 = reports.first().map(|r| r.q_value).unwrap_or(f64::NAN);

    let nodal_opts = solve_options_with_profile(cfg, &problem, gs, true);
    let (nod, nod_ok) = match problem.solve_nodal(&nodal_opts) {
        Ok(o) => (o, true),
        Err(Error::NonConvergence { last, .. }) => {
            if status == "ok" {
                status = "nodal-not-converged".into();
            }
            (*last, false)
        }
        Err(e) => return Err(e),
    };
    let (def_p, def_m) = problem.nodal_defects(&nod.field)?;
    let (regions_pos, regions_neg) = count_nodal_regions(&nod.field, 1e-10);
    let nodal_peaks = peak_diagnostics(&nod.field, &problem.params)?;
    let morse_nod = morse_index(&problem, &nod.field, None).unwrap_or(usize::MAX);
    let nodal_op = linearized_operator(&problem, &nod.field);
    let nodal_spec = eigs_smallest(&nodal_op, 2, 1e-8, cfg.seed ^ 0x7777)?;

    let row = SweepRow {
        lambda,
        status,
        converged_positive: pos_ok && pos.converged,
        iterations_positive: pos.iterations,
        residual_positive: pos.residual_norm,
        energy_positive: pos.energy.total,
        dirichlet: pos.energy.dirichlet,
        mass: pos.energy.mass,
        power: pos.energy.power,
        sup_norm_positive: pos.field.max_abs(),
        peak,
        peak_gap: peak.radius - dom.r1,
        energy_ratio,
        sup_outside_ball: sup_out,
        mu1,
        mu1_bound: (1.0 - cfg.p) * lambda,
        morse_index_positive: morse_pos,
        phi_negative_count: phi_neg,
        q_phi_1,
        phi_reports: reports,
        converged_nodal: nod_ok && nod.converged,
        iterations_nodal: nod.iterations,
        residual_nodal: nod.residual_norm,
        energy_nodal: nod.energy.total,
        nodal_regions: regions_pos + regions_neg,
        nehari_defect_positive_part: def_p,
        nehari_defect_negative_part: def_m,
        morse_index_nodal: morse_nod,
        peak_positive_radius: nodal_peaks.primary.radius,
        peak_negative_radius: nodal_peaks
            .secondary
            .map(|s| s.radius)
            .unwrap_or(f64::NAN),
        peak_separation: nodal_peaks.separation.unwrap_or(f64::NAN),
        mu1_nodal: nodal_spec.eigenvalues[0],
        mu2_nodal: nodal_spec.eigenvalues[1],
        wall_ms: t0.elapsed().as_millis(),
    };
    Ok(SweepPoint {
        row,
        positive: pos,
        nodal: nod,
        g1,
        problem,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PersistedRow {
    config: String,
    row: SweepRow,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub version: String,
    pub config: String,
    pub lambdas: Vec<f64>,
    pub flags: Option<TrendFlags>,
    pub all_rows_ok: bool,
    pub resumed_rows: usize,
    pub wall_ms: u128,
    pub csv_file: String,
}

pub struct SweepArtifact {
    pub summary: SweepSummary,
    pub rows: Vec<SweepRow>,
    pub csv: String,
    pub dir: PathBuf,
}

/// Runs the λ-sweep with a bounded worker pool, persisting one row file per
/// λ (atomic) so an interrupted sweep resumes from completed rows.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepArtifact> {
    let t0 = Instant::now();
    let dir = Path::new(&cfg.out_dir).join("sweep");
    let rows_dir = dir.join("rows");
    std::fs::create_dir_all(&rows_dir)?;
    let canonical = cfg.canonical_string();
    let gs = ground_state_shoot(cfg.m + 1, cfg.p)?;

    // load resumable rows
    let mut cached: Vec<Option<SweepRow>> = vec![None; cfg.lambdas.len()];
    let mut resumed = 0usize;
    for (idx, _) in cfg.lambdas.iter().enumerate() {
        let path = rows_dir.join(format!("row_{idx:03}.json"));
        if let Ok(bytes) = std::fs::read(&path) {
            if let Ok(p) = serde_json::from_slice::<PersistedRow>(&bytes) {
                if p.config == canonical && p.row.status == "ok" {
                    cached[idx] = Some(p.row);
                    resumed += 1;
                }
            }
        }
    }

    let jobs: Vec<(usize, f64)> = cfg
        .lambdas
        .iter()
        .enumerate()
        .filter(|(i, _)| cached[*i].is_none())
        .map(|(i, &l)| (i, l))
        .collect();

    let run_jobs = |jobs: &[(usize, f64)]| -> Vec<(usize, Result<SweepRow>)> {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|&(idx, lambda)| (idx, sweep_point(cfg, lambda, &gs)))
            .collect()
    };
    let computed: Vec<(usize, Result<SweepRow>)> = if cfg.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        pool.install(|| run_jobs(&jobs))
    } else {
        run_jobs(&jobs)
    };

    for (idx, res) in computed {
        let row = match res {
            Ok(row) => row,
            Err(e) => {
                // failed row: record the failure, keep sweeping
                let lambda = cfg.lambdas[idx];
                let mut row = failed_row(lambda);
                row.status = format!("error: {e}");
                row
            }
        };
        write_json(
            &rows_dir.join(format!("row_{idx:03}.json")),
            &PersistedRow {
                config: canonical.clone(),
                row: row.clone(),
            },
        )?;
        cached[idx] = Some(row);
    }

    let rows: Vec<SweepRow> = cached.into_iter().map(|r| r.unwrap()).collect();
    let report = concentration_report_lenient(&rows)?;
    let csv = sweep_csv(&rows);
    write_atomic(&dir.join("sweep.csv"), csv.as_bytes())?;
    let summary = SweepSummary {
        version: VERSION.into(),
        config: canonical.clone(),
        lambdas: cfg.lambdas.clone(),
        flags: report.flags,
        all_rows_ok: rows.iter().all(|r| r.status == "ok"),
        resumed_rows: resumed,
        wall_ms: t0.elapsed().as_millis(),
        csv_file: "sweep.csv".into(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    write_atomic(&dir.join("config.txt"), canonical.as_bytes())?;
    Ok(SweepArtifact {
        summary,
        rows,
        csv,
        dir,
    })
}

fn failed_row(lambda: f64) -> SweepRow {
    SweepRow {
        lambda,
        status: "error".into(),
        converged_positive: false,
        iterations_positive: 0,
        residual_positive: f64::NAN,
        energy_positive: f64::NAN,
        dirichlet: f64::NAN,
        mass: f64::NAN,
        power: f64::NAN,
        sup_norm_positive: f64::NAN,
        peak: crate::asymptotics::PeakDiagnostics {
            radial_index: 0,
            angular_index: 0,
            radius: f64::NAN,
            polar_angle: f64::NAN,
            value: f64::NAN,
            boundary_distance: f64::NAN,
            scaled_distance: f64::NAN,
            on_axis: false,
        },
        peak_gap: f64::NAN,
        energy_ratio: f64::NAN,
        sup_outside_ball: f64::NAN,
        mu1: f64::NAN,
        mu1_bound: f64::NAN,
        morse_index_positive: usize::MAX,
        phi_negative_count: 0,
        q_phi_1: f64::NAN,
        phi_reports: vec![],
        converged_nodal: false,
        iterations_nodal: 0,
        residual_nodal: f64::NAN,
        energy_nodal: f64::NAN,
        nodal_regions: 0,
        nehari_defect_positive_part: f64::NAN,
        nehari_defect_negative_part: f64::NAN,
        morse_index_nodal: usize::MAX,
        peak_positive_radius: f64::NAN,
        peak_negative_radius: f64::NAN,
        peak_separation: f64::NAN,
        mu1_nodal: f64::NAN,
        mu2_nodal: f64::NAN,
        wall_ms: 0,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GroundStateSummary {
    pub version: String,
    pub n_dim: u32,
    pub p: f64,
    pub z0: f64,
    pub energy: f64,
    /// √(2R1)·I(z): the limit energy of an inner-boundary spike.
    pub limit_energy_inner: f64,
    pub s_max: f64,
    pub samples: usize,
}

pub fn cmd_ground_state(cfg: &RunConfig) -> Result<GroundStateSummary> {
    let params = cfg.params_for(cfg.lambdas[0])?;
    let dom = params.reduced();
    let gs = ground_state_shoot(dom.n_dim, cfg.p)?;
    let dir = Path::new(&cfg.out_dir).join("ground-state");
    std::fs::create_dir_all(&dir)?;
    let mut profile = String::from("# s z dz\n");
    for i in 0..gs.s.len() {
        profile.push_str(&format!("{} {} {}\n", gs.s[i], gs.z[i], gs.dz[i]));
    }
    write_atomic(&dir.join("profile.txt"), profile.as_bytes())?;
    let summary = GroundStateSummary {
        version: VERSION.into(),
        n_dim: gs.n_dim,
        p: gs.p,
        z0: gs.z0,
        energy: gs.energy,
        limit_energy_inner: crate::asymptotics::limit_energy(dom.r1, &gs)?,
        s_max: gs.s_max(),
        samples: gs.s.len(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub version: String,
    pub kind: SolveKind,
    pub lambda: f64,
    pub eigenvalues: Vec<f64>,
    pub count_negative: usize,
    pub morse_index: Option<usize>,
    pub mu1: f64,
    pub mu1_bound: f64,
    pub phi_reports: Vec<crate::spectral::PhiKReport>,
    pub phi_negative_count: usize,
}

pub fn cmd_spectrum(cfg: &RunConfig, kind: SolveKind) -> Result<SpectrumSummary> {
    let lambda = cfg.lambdas[0];
    let params = cfg.params_for(lambda)?;
    let grid = Grid::reduced(&params.reduced(), cfg.n_rho, cfg.n_phi)?;
    let problem = ReducedProblem::new(params, grid)?;
    let gs = ground_state_shoot(params.m + 1, cfg.p)?;
    let opts = solve_options_with_profile(cfg, &problem, &gs, kind == SolveKind::Nodal);
    let outcome: SolveOutcome = match kind {
        SolveKind::Positive => problem.solve_positive(&opts)?,
        SolveKind::Nodal => problem.solve_nodal(&opts)?,
    };
    let op = linearized_operator(&problem, &outcome.field);
    let spec = eigs_smallest(&op, 6, 1e-8, cfg.seed ^ 0x5bec)?;
    let morse = morse_index(&problem, &outcome.field, None).ok();
    let (mu1, g1) = first_symmetric_eigenpair(&problem, &outcome.field)?;
    let reports = phi_k_reports(&problem, &g1, &outcome.field, cfg.k_max)?;
    let phi_neg = morse_lower_bound_upstairs(&reports);
    let dir = Path::new(&cfg.out_dir).join("spectrum");
    std::fs::create_dir_all(&dir)?;
    let summary = SpectrumSummary {
        version: VERSION.into(),
        kind,
        lambda,
        eigenvalues: spec.eigenvalues.clone(),
        count_negative: spec.count_negative,
        morse_index: morse,
        mu1,
        mu1_bound: (1.0 - cfg.p) * lambda,
        phi_reports: reports,
        phi_negative_count: phi_neg,
    };
    write_json(&dir.join("spectrum.json"), &summary)?;
    let mut phik = String::from("# k nu_k q_value q0 q_ang\n");
    for r in &summary.phi_reports {
        phik.push_str(&format!(
            "{} {} {} {} {}\n",
            r.k, r.nu_k, r.q_value, r.q0, r.q_ang
        ));
    }
    write_atomic(&dir.join("phik.txt"), phik.as_bytes())?;
    Ok(summary)
}
