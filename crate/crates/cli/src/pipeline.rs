//! Orchestration of the `check`, `solve`, `picard`, `verify` and `mms` runs.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use evolve_surf::coefficients::{estimate_c_sharp, lambda_select, m_quantities, smallness_report, SmallnessOptions};
use evolve_surf::diagnostics::{
    decay_report, dilation_identity, energy_report, mms_convergence, regularity_report, weighted_asymmetry, DecayReport,
    MmsOptions, RegularityReport,
};
use evolve_surf::grid::linspace;
use evolve_surf::operator::{assemble_a, assemble_b_parts, assemble_l, verify_anisotropic_identities, OperatorTag};
use evolve_surf::sparse::{CsrMatrix, SolverOptions};
use evolve_surf::timestepper::{solve_direct, solve_picard, NoForcing, PicardOptions};
use evolve_surf::{
    nondegeneracy_scan, Chart, ConditionReport, ConvergenceTable, Diffusion, EnergyLedger, GridSpec, PicardHistory,
    Rect, SeparableMode, Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{RunConfig, SolverMode};

/// Number of scan times over `[0, T]`.
pub const SCAN_TIMES: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Check,
    Solve,
    Picard,
    Verify,
    Mms,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Solve => "solve",
            Command::Picard => "picard",
            Command::Verify => "verify",
            Command::Mms => "mms",
        }
    }
}

/// One named assertion; only `hard` failures change the exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: String,
    pub passed: bool,
    pub hard: bool,
}

#[derive(Debug, Default)]
pub struct RunReport {
    pub command: Option<Command>,
    pub conditions: Option<ConditionReport>,
    pub energy: Option<EnergyLedger>,
    pub decay: Option<DecayReport>,
    pub regularity: Option<RegularityReport>,
    pub picard: Option<PicardHistory>,
    /// Max nodal difference between Picard and direct, relative to the direct peak.
    pub agreement: Option<f64>,
    pub convergence: Option<ConvergenceTable>,
    pub trajectory: Option<Trajectory>,
    pub matrices: Vec<(String, CsrMatrix)>,
    pub checks: Vec<Check>,
    pub timings: Vec<(String, Duration)>,
    pub manifest: Vec<PathBuf>,
}

impl RunReport {
    /// `true` iff no hard check failed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.hard)
    }

    fn check(&mut self, name: &str, value: f64, limit: impl Into<String>, passed: bool, hard: bool) {
        self.checks.push(Check { name: name.to_string(), value, limit: limit.into(), passed, hard });
    }

    fn time<T>(&mut self, label: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.timings.push((label.to_string(), start.elapsed()));
        out
    }
}

/// Geometry, coefficient and grid objects built from a configuration.
pub struct Setup {
    pub chart: Chart,
    pub kappa: Diffusion,
    pub grid: GridSpec,
    pub scan: Vec<f64>,
    pub v0: Vec<f64>,
}

impl Setup {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let s = &config.surface;
        let chart = Chart::preset(s.preset, s.domain, s.horizon).context("geometry: building chart")?;
        let grid = GridSpec::new(s.domain, config.grid.n1, config.grid.n2).context("geometry: building grid")?;
        let v0 = grid.sample(|x| evolve_surf::ExactSolution::value(&SeparableMode::new(s.domain, 1.0, 0.0), x, 0.0));
        Ok(Setup { chart, kappa: config.diffusion.build(), grid, scan: linspace(0.0, s.horizon, SCAN_TIMES), v0 })
    }
}

fn smallness(config: &RunConfig, setup: &Setup) -> Result<ConditionReport> {
    let opts = SmallnessOptions {
        margin: config.solver.margin,
        probes: config.solver.probes,
        seed: config.solver.seed,
        ..Default::default()
    };
    smallness_report(&setup.chart, &setup.kappa, &setup.grid, &setup.scan, &opts).context("coefficients: smallness report")
}

fn max_rel_difference(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let mut diff = 0.0_f64;
    let mut peak = 0.0_f64;
    for (x, y) in a.iter().zip(b) {
        for (p, q) in x.iter().zip(y) {
            diff = diff.max((p - q).abs());
            peak = peak.max(q.abs());
        }
    }
    if peak > 0.0 {
        diff / peak
    } else {
        diff
    }
}

/// Runs one subcommand. Hard assertion failures are recorded in the report;
/// evaluation errors are returned.
pub fn run_pipeline(config: &RunConfig, command: Command) -> Result<RunReport> {
    let setup = Setup::new(config)?;
    let mut report = RunReport { command: Some(command), ..Default::default() };
    match command {
        Command::Check => run_check(config, &setup, &mut report)?,
        Command::Solve => run_solve(config, &setup, &mut report)?,
        Command::Picard => run_picard(config, &setup, &mut report)?,
        Command::Verify => run_verify(config, &setup, &mut report)?,
        Command::Mms => run_mms(config, &setup, &mut report)?,
    }
    if config.output.dump_matrices {
        dump_matrices(config, &setup, &mut report)?;
    }
    Ok(report)
}

fn run_check(config: &RunConfig, setup: &Setup, report: &mut RunReport) -> Result<()> {
    let cond = report.time("smallness", || smallness(config, setup))?;
    let finite = [cond.lambda1(), cond.lambda2(), cond.c_sharp_est, cond.c_a_est, cond.c_star_est]
        .iter()
        .chain(&cond.m.m)
        .all(|v| v.is_finite());
    report.check("report_finite", if finite { 1.0 } else { 0.0 }, "all scalars finite", finite, true);
    let horizons = cond.t_star_24.min(cond.t_star_25);
    report.check("horizons_positive", horizons, "> 0", horizons > 0.0, true);
    report.check("condition_thm24", cond.lhs[0], "informational", cond.condition_thm24, false);
    report.check("condition_thm25", cond.lhs[1], "informational", cond.condition_thm25, false);
    report.check("condition_thm26", cond.lhs[2], "informational", cond.condition_thm26, false);
    report.conditions = Some(cond);
    Ok(())
}

fn solver_opts() -> SolverOptions {
    SolverOptions::default()
}

/// Accepted true residual of the linear solves (the iteration stops on its recursive residual).
fn residual_limit() -> f64 {
    10.0 * solver_opts().rel_tol
}

fn run_solve(config: &RunConfig, setup: &Setup, report: &mut RunReport) -> Result<()> {
    let t = &config.time;
    let horizon = config.surface.horizon;
    let traj = match config.solver.mode {
        SolverMode::Direct => report.time("solve_direct", || {
            solve_direct(&setup.chart, &setup.kappa, &setup.grid, &setup.v0, horizon, t.dt, t.theta, &NoForcing, solver_opts())
                .context("timestepper: direct solve")
        })?,
        SolverMode::Picard => {
            let sel = lambda_select(&setup.chart, &setup.kappa, &setup.grid, &setup.scan, config.solver.margin)
                .context("coefficients: lambda selection")?;
            let opts = picard_opts(config);
            let (traj, hist) = report.time("solve_picard", || {
                solve_picard(&setup.chart, &setup.kappa, &setup.grid, sel.lambda1, sel.lambda2, &setup.v0, horizon, t.dt, &opts)
                    .context("timestepper: Picard solve")
            })?;
            report.check("picard_converged", hist.iterations as f64, "diff ≤ tol", hist.converged, true);
            report.picard = Some(hist);
            traj
        }
    };
    report.check(
        "solver_residual",
        traj.max_solve_residual,
        format!("≤ {:e}", residual_limit()),
        traj.max_solve_residual <= residual_limit(),
        true,
    );
    post_process(setup, &traj, report)?;
    report.trajectory = Some(traj);
    Ok(())
}

fn post_process(setup: &Setup, traj: &Trajectory, report: &mut RunReport) -> Result<()> {
    let energy = report.time("energy", || {
        energy_report(traj, &setup.chart, &setup.kappa, &setup.grid).context("diagnostics: energy report")
    })?;
    let rel = energy.max_residual_rel();
    report.check("energy_residual_finite", rel, "finite", rel.is_finite(), true);
    report.check("energy_residual_rel", rel, "≤ 5e-3", rel <= 5e-3, false);
    let horizon = traj.final_time();
    if setup.v0.iter().any(|v| *v != 0.0) {
        let decay = decay_report(traj, &setup.chart, &setup.grid, horizon / 10.0, horizon).context("diagnostics: decay report")?;
        report.check("decay_bound_finite", decay.sup_bound, "finite", decay.sup_bound.is_finite(), true);
        report.check("decay_monotone", if decay.monotone { 1.0 } else { 0.0 }, "informational", decay.monotone, false);
        report.decay = Some(decay);
        if traj.len() >= 3 {
            let reg = regularity_report(traj, &setup.chart, &setup.kappa, &setup.grid).context("diagnostics: regularity report")?;
            report.check("regularity_ratio_finite", reg.ratio, "finite", reg.ratio.is_finite(), true);
            report.regularity = Some(reg);
        }
    }
    report.energy = Some(energy);
    Ok(())
}

fn picard_opts(config: &RunConfig) -> PicardOptions {
    PicardOptions {
        theta: config.time.theta,
        tol: config.solver.tol,
        max_iter: config.solver.max_iter,
        solver: solver_opts(),
    }
}

fn run_picard(config: &RunConfig, setup: &Setup, report: &mut RunReport) -> Result<()> {
    let cond = report.time("smallness", || smallness(config, setup))?;
    let horizon = config.surface.horizon;
    let t = &config.time;
    let opts = picard_opts(config);
    let (traj, hist) = report.time("solve_picard", || {
        solve_picard(&setup.chart, &setup.kappa, &setup.grid, cond.lambda1(), cond.lambda2(), &setup.v0, horizon, t.dt, &opts)
            .context("timestepper: Picard solve")
    })?;
    let direct = report.time("solve_direct", || {
        solve_direct(&setup.chart, &setup.kappa, &setup.grid, &setup.v0, horizon, t.dt, t.theta, &NoForcing, solver_opts())
            .context("timestepper: direct solve")
    })?;
    let agreement = max_rel_difference(&traj.states, &direct.states);
    let limit = 10.0 * config.solver.tol;
    report.check("picard_converged", hist.iterations as f64, "diff ≤ tol", hist.converged, true);
    report.check("picard_direct_agreement", agreement, format!("≤ {limit:e}"), agreement <= limit, true);
    report.check(
        "picard_stage_residual",
        hist.max_stage_residual,
        format!("≤ {:e}", residual_limit()),
        hist.max_stage_residual <= residual_limit(),
        true,
    );
    let max_ratio = hist.max_ratio();
    report.check(
        "contraction_ratio",
        max_ratio,
        if cond.condition_thm26 { "≤ 0.55" } else { "≤ 0.55 (informational: condition not met)" },
        max_ratio <= 0.55,
        cond.condition_thm26,
    );
    report.conditions = Some(cond);
    report.picard = Some(hist);
    report.agreement = Some(agreement);
    post_process(setup, &traj, report)?;
    report.trajectory = Some(traj);
    Ok(())
}

/// Smallest grid for the refinement oracles of `verify`.
const ORACLE_MIN_NODES: usize = 32;

fn run_verify(config: &RunConfig, setup: &Setup, report: &mut RunReport) -> Result<()> {
    let (chart, kappa, grid, scan) = (&setup.chart, &setup.kappa, &setup.grid, &setup.scan);

    // metric identities and nondegeneracy
    let mut defect = 0.0_f64;
    for &t in scan {
        for x in grid.closure_nodes() {
            defect = defect.max(chart.metric(x, t).context("geometry: metric sample")?.inverse_defect());
        }
    }
    report.check("metric_inverse_identity", defect, "≤ 1e-12", defect <= 1e-12, true);
    let nd = nondegeneracy_scan(chart, grid, scan).context("geometry: nondegeneracy scan")?;
    report.check("nondegeneracy_min", nd.lambda_min_est, "> 0", nd.lambda_min_est > 0.0, true);

    // analytic partials against differences with the configured step
    let h = config.grid.h_fd;
    let mut jet_err = 0.0_f64;
    for &t in scan {
        for x in grid.closure_nodes() {
            let exact = chart.jet(x, t)?;
            let fd = chart.fd_jet_with_steps(x, t, h, h.max(1e-4), h.max(2e-3));
            for a in 0..2 {
                for j in 0..3 {
                    jet_err = jet_err.max((exact.dx[a][j] - fd.dx[a][j]).abs());
                }
            }
        }
    }
    report.check("fd_jet_agreement", jet_err, "≤ 1e-6", jet_err <= 1e-6, true);

    // operator structure
    let sel = lambda_select(chart, kappa, grid, scan, config.solver.margin).context("coefficients: lambda selection")?;
    let a = assemble_a(grid, sel.lambda1, sel.lambda2)?;
    report.check("a_symmetry", a.matrix.asymmetry(), "≤ 1e-12", a.matrix.asymmetry() <= 1e-12, true);
    let mut bsum = 0.0_f64;
    let mut asym = 0.0_f64;
    let mut bs = Vec::new();
    for &t in scan {
        let parts = assemble_b_parts(chart, kappa, grid, sel.lambda1, sel.lambda2, t)?;
        let b = assemble_l(chart, kappa, grid, t)?.minus(&a, OperatorTag::B);
        bsum = bsum.max(parts.sum().matrix.max_abs_diff(&b.matrix));
        asym = asym.max(weighted_asymmetry(chart, kappa, grid, t)?);
        bs.push(b);
    }
    report.check("b_decomposition", bsum, "≤ 1e-10", bsum <= 1e-10, true);
    report.check("weighted_symmetry", asym, "≤ 1e-10", asym <= 1e-10, true);

    // relative bound with estimated constants
    let m = m_quantities(chart, kappa, sel.lambda1, sel.lambda2, grid, scan)?;
    let c_sharp = estimate_c_sharp(&a, grid, config.solver.probes, config.solver.seed)?;
    let bound = 2.0 * c_sharp * m.sum(5) * 1.1;
    let mut rng = ChaCha8Rng::seed_from_u64(config.solver.seed);
    let mut worst = 0.0_f64;
    for _ in 0..32 {
        let f: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let af = grid.l2_norm(&a.apply(&f));
        for b in &bs {
            worst = worst.max(grid.l2_norm(&b.apply(&f)) / (bound * af));
        }
    }
    report.check("relative_bound", worst, "≤ 1 (ratio to 2.2·C♯Σℳ‖Af‖)", worst <= 1.0, true);

    // anisotropic oracles on a translated copy of the grid
    let shifted = Rect::new(1.0, 2.0, 1.0, 2.0)?;
    let coarse = GridSpec::new(shifted, grid.n1.max(ORACLE_MIN_NODES), grid.n2.max(ORACLE_MIN_NODES))?;
    let fine = coarse.refined();
    let r0 = verify_anisotropic_identities(&coarse, sel.lambda1, sel.lambda2)?;
    let r1 = verify_anisotropic_identities(&fine, sel.lambda1, sel.lambda2)?;
    let fr = r0.fundsol_residual / r1.fundsol_residual;
    let hr = r0.scaled_heat_residual / r1.scaled_heat_residual;
    report.check("fundsol_refinement_ratio", fr, "∈ [3.5, 4.5]", (3.5..=4.5).contains(&fr), true);
    report.check("scaled_heat_refinement_ratio", hr, "∈ [3.5, 4.5]", (3.5..=4.5).contains(&hr), true);

    // integrated dilation against the rate of change of the area
    let step = (config.surface.horizon / 10.0).min(1e-3);
    let mut dil = 0.0_f64;
    for &t in scan {
        let d = dilation_identity(chart, grid, t, step)?;
        dil = dil.max(d.residual / d.integral.abs().max(1.0));
    }
    report.check("dilation_identity", dil, "≤ 1e-5", dil <= 1e-5, true);
    Ok(())
}

fn run_mms(config: &RunConfig, setup: &Setup, report: &mut RunReport) -> Result<()> {
    let horizon = config.surface.horizon;
    let opts = MmsOptions {
        levels: config.solver.mms_levels,
        horizon,
        theta: config.time.theta,
        dt_space: config.time.dt.min(horizon / 10.0).min(1e-3),
        dt_coarse: horizon / 4.0,
        ..Default::default()
    };
    let sol = SeparableMode::new(config.surface.domain, 1.0, 1.0);
    let table = report.time("mms", || {
        mms_convergence(&setup.chart, &setup.kappa, &sol, &opts).context("diagnostics: manufactured solution sweep")
    })?;
    let expected_time = if config.time.theta == 0.5 { 2.0 } else { 1.0 };
    for (k, name) in ["max", "l2"].iter().enumerate() {
        let s = table.fitted_space_order[k];
        report.check(&format!("space_order_{name}"), s, "∈ [1.8, 2.2]", (1.8..=2.2).contains(&s), true);
        let t = table.fitted_time_order[k];
        let band = (expected_time - 0.2)..=(expected_time + 0.2);
        report.check(
            &format!("time_order_{name}"),
            t,
            format!("∈ [{}, {}]", band.start(), band.end()),
            band.contains(&t),
            true,
        );
    }
    report.check("errors_monotone", if table.non_monotone { 0.0 } else { 1.0 }, "informational", !table.non_monotone, false);
    report.convergence = Some(table);
    Ok(())
}

fn dump_matrices(config: &RunConfig, setup: &Setup, report: &mut RunReport) -> Result<()> {
    let sel = lambda_select(&setup.chart, &setup.kappa, &setup.grid, &setup.scan, config.solver.margin)
        .context("coefficients: lambda selection")?;
    let a = assemble_a(&setup.grid, sel.lambda1, sel.lambda2)?;
    let l0 = assemble_l(&setup.chart, &setup.kappa, &setup.grid, 0.0)?;
    let lt = assemble_l(&setup.chart, &setup.kappa, &setup.grid, config.surface.horizon)?;
    let parts = assemble_b_parts(&setup.chart, &setup.kappa, &setup.grid, sel.lambda1, sel.lambda2, 0.0)?;
    report.matrices.push(("A".into(), a.matrix));
    report.matrices.push(("L_t0".into(), l0.matrix));
    report.matrices.push(("L_tT".into(), lt.matrix));
    for (k, p) in parts.parts.into_iter().enumerate() {
        report.matrices.push((format!("B{}_t0", k + 1), p.matrix));
    }
    Ok(())
}
