//! Surface quantities of pulled-back fields and the checks built on them:
//! energy balance, decay, regularity and manufactured-solution convergence.

use std::fmt::Write as _;

use crate::coefficients::Diffusion;
use crate::error::{param, Error, Result};
use crate::geometry::{Chart, Vec3};
use crate::grid::GridSpec;
use crate::manufactured::{apply_continuous_l, boundary_defect, ExactSolution};
use crate::operator::{assemble_l, check_len, difference_norms, nodal_coefficients, NodeCoefficients};
use crate::sparse::{CsrMatrix, SolverOptions};
use crate::timestepper::{solve_direct, step_plan, trapezoid, Field, Forcing, Trajectory};

/// `∫_U ψ̂ √𝒢 dX` by the trapezoid rule on the closed grid.
pub fn surface_integral(psi: impl Fn([f64; 2]) -> f64, chart: &Chart, grid: &GridSpec, t: f64) -> Result<f64> {
    let (e1, e2) = grid.ext_dims();
    let mut sum = 0.0;
    for q in 0..e2 {
        let wq = if q == 0 || q == e2 - 1 { 0.5 } else { 1.0 };
        for p in 0..e1 {
            let wp = if p == 0 || p == e1 - 1 { 0.5 } else { 1.0 };
            let x = grid.ext_node(p, q);
            sum += wp * wq * psi(x) * chart.metric(x, t)?.sqrt_det;
        }
    }
    Ok(sum * grid.h1 * grid.h2)
}

/// `∫_U v √𝒢 w dX` for interior fields (zero on the boundary).
fn weighted_sum(grid: &GridSpec, coef: &[NodeCoefficients], f: impl Fn(usize, &NodeCoefficients) -> f64) -> f64 {
    let mut s = 0.0;
    for j in 0..grid.n2 {
        for i in 0..grid.n1 {
            let c = &coef[grid.ext_index(i + 1, j + 1)];
            s += f(grid.index(i, j), c) * c.sqrt_det;
        }
    }
    s * grid.h1 * grid.h2
}

/// `‖u(t)‖²_{L²(Γ(t))} = ∫_U v² √𝒢 dX`.
pub fn surface_l2_sq(v: &[f64], chart: &Chart, grid: &GridSpec, t: f64) -> Result<f64> {
    check_len(grid, v)?;
    let coef = nodal_coefficients(chart, &Diffusion::constant(1.0), grid, t)?;
    Ok(weighted_sum(grid, &coef, |k, _| v[k] * v[k]))
}

fn centered_partials(grid: &GridSpec, v: &[f64], p: usize, q: usize) -> [f64; 2] {
    let f = |a: usize, b: usize| grid.ext_value(v, a, b);
    [
        (f(p + 1, q) - f(p - 1, q)) / (2.0 * grid.h1),
        (f(p, q + 1) - f(p, q - 1)) / (2.0 * grid.h2),
    ]
}

/// `∇_Γ u = g^{αβ} (∂x̂/∂X_α) ∂_β û` at interior node `(i, j)`.
pub fn tangential_gradient(v: &[f64], chart: &Chart, grid: &GridSpec, t: f64, i: usize, j: usize) -> Result<Vec3> {
    check_len(grid, v)?;
    let x = grid.node(i, j);
    let m = chart.metric(x, t)?;
    let d = centered_partials(grid, v, i + 1, j + 1);
    let tangents = [m.g1, m.g2];
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        for a in 0..2 {
            for b in 0..2 {
                *o += m.ginv[a][b] * tangents[a][c] * d[b];
            }
        }
    }
    Ok(out)
}

/// `g^{αβ} ∂_α û ∂_β û` at interior node `(i, j)`.
pub fn contracted_grad_sq(v: &[f64], chart: &Chart, grid: &GridSpec, t: f64, i: usize, j: usize) -> Result<f64> {
    check_len(grid, v)?;
    let m = chart.metric(grid.node(i, j), t)?;
    let d = centered_partials(grid, v, i + 1, j + 1);
    Ok((0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| m.ginv[a][b] * d[a] * d[b]).sum())
}

/// `∫_U κ̂ g^{αβ} ∂_α v ∂_β v √𝒢 dX` in the face form that matches the
/// flux discretization of `L(t)`.
pub fn gradient_energy(v: &[f64], chart: &Chart, kappa: Option<&Diffusion>, grid: &GridSpec, t: f64) -> Result<f64> {
    check_len(grid, v)?;
    let one = Diffusion::constant(1.0);
    let coef = nodal_coefficients(chart, kappa.unwrap_or(&one), grid, t)?;
    Ok(gradient_energy_from(grid, &coef, v))
}

fn gradient_energy_from(grid: &GridSpec, coef: &[NodeCoefficients], v: &[f64]) -> f64 {
    let c = |p: usize, q: usize| &coef[grid.ext_index(p, q)];
    let f = |p: usize, q: usize| grid.ext_value(v, p, q);
    let mut s = 0.0;
    for q in 1..=grid.n2 {
        for p in 0..=grid.n1 {
            let d = (f(p + 1, q) - f(p, q)) / grid.h1;
            s += 0.5 * (c(p, q).flux(0) + c(p + 1, q).flux(0)) * d * d;
        }
    }
    for q in 0..=grid.n2 {
        for p in 1..=grid.n1 {
            let d = (f(p, q + 1) - f(p, q)) / grid.h2;
            s += 0.5 * (c(p, q).flux(2) + c(p, q + 1).flux(2)) * d * d;
        }
    }
    for q in 1..=grid.n2 {
        for p in 1..=grid.n1 {
            let d = centered_partials(grid, v, p, q);
            s += 2.0 * c(p, q).flux(1) * d[0] * d[1];
        }
    }
    s * grid.h1 * grid.h2
}

/// `‖∇_Γ u‖²_{L²(Γ(t))}`.
pub fn surface_grad_sq(v: &[f64], chart: &Chart, grid: &GridSpec, t: f64) -> Result<f64> {
    gradient_energy(v, chart, None, grid, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRow {
    pub time: f64,
    /// `½‖u(t)‖²`
    pub mass: f64,
    /// `∫₀ᵗ ‖√κ ∇_Γ u‖²`
    pub dissipation: f64,
    /// `∫₀ᵗ ½∫ (div_Γ w) u²`
    pub dilation: f64,
    pub residual_abs: f64,
    pub residual_rel: f64,
}

/// Both sides of the energy balance from `s = 0` to every snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    pub rows: Vec<EnergyRow>,
}

impl EnergyLedger {
    pub const CSV_HEADER: &'static str = "time,mass,dissipation,residual_abs,residual_rel";

    pub fn max_residual_rel(&self) -> f64 {
        self.rows.iter().map(|r| r.residual_rel).fold(0.0, f64::max)
    }

    pub fn max_residual_abs(&self) -> f64 {
        self.rows.iter().map(|r| r.residual_abs).fold(0.0, f64::max)
    }

    pub fn csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.time, r.mass, r.dissipation, r.residual_abs, r.residual_rel);
        }
        s
    }
}

/// `½‖u(t)‖² + ∫₀ᵗ‖√κ∇_Γu‖² + ∫₀ᵗ½∫(div_Γ w)u² − ½‖u(0)‖²` at every snapshot,
/// with time integrals by the trapezoid rule.
pub fn energy_report(traj: &Trajectory, chart: &Chart, kappa: &Diffusion, grid: &GridSpec) -> Result<EnergyLedger> {
    if traj.is_empty() {
        return param("energy report needs a non-empty trajectory");
    }
    let mut mass = Vec::with_capacity(traj.len());
    let mut diss = Vec::with_capacity(traj.len());
    let mut dil = Vec::with_capacity(traj.len());
    for (v, &t) in traj.states.iter().zip(&traj.times) {
        check_len(grid, v)?;
        let coef = nodal_coefficients(chart, kappa, grid, t)?;
        mass.push(0.5 * weighted_sum(grid, &coef, |k, _| v[k] * v[k]));
        dil.push(0.5 * weighted_sum(grid, &coef, |k, c| v[k] * v[k] * c.dilation));
        diss.push(gradient_energy_from(grid, &coef, v));
    }
    let m0 = mass[0];
    let mut rows = Vec::with_capacity(traj.len());
    let (mut cd, mut cz) = (0.0, 0.0);
    for k in 0..traj.len() {
        if k > 0 {
            let h = traj.times[k] - traj.times[k - 1];
            cd += 0.5 * h * (diss[k] + diss[k - 1]);
            cz += 0.5 * h * (dil[k] + dil[k - 1]);
        }
        let res = (mass[k] + cd + cz - m0).abs();
        rows.push(EnergyRow {
            time: traj.times[k],
            mass: mass[k],
            dissipation: cd,
            dilation: cz,
            residual_abs: res,
            residual_rel: if m0 > 0.0 { res / m0 } else { res },
        });
    }
    Ok(EnergyLedger { rows })
}

/// `(‖f‖² + ‖∇f‖²)^{1/2}` with the one-sided difference norms.
pub fn w12_norm(grid: &GridSpec, v: &[f64]) -> Result<f64> {
    let d = difference_norms(grid, v)?;
    Ok((d.l2 * d.l2 + d.grad_sq[0] + d.grad_sq[1]).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayReport {
    /// max over the window of `t^{1/2}‖u(t)‖_{L²(Γ(t))} / ‖û₀‖_{W^{1,2}}`
    pub sup_bound: f64,
    /// `‖u(t)‖_{L²(Γ(t))}` non-increasing over the whole trajectory.
    pub monotone: bool,
    pub initial_w12: f64,
}

/// Decay ratio over snapshots with `t ∈ [t_min, t_max]`, `t_min > 0`.
pub fn decay_report(traj: &Trajectory, chart: &Chart, grid: &GridSpec, t_min: f64, t_max: f64) -> Result<DecayReport> {
    if !(t_min > 0.0 && t_max >= t_min) {
        return param(format!("decay window must satisfy 0 < t_min ≤ t_max, got [{t_min}, {t_max}]"));
    }
    if traj.is_empty() {
        return param("decay report needs a non-empty trajectory");
    }
    let w12 = w12_norm(grid, &traj.states[0])?;
    if w12 == 0.0 {
        return Err(Error::Precondition("decay ratio is undefined for a zero initial datum".into()));
    }
    let mut sup = 0.0_f64;
    let mut monotone = true;
    let mut prev = f64::INFINITY;
    let mut any = false;
    for (v, &t) in traj.states.iter().zip(&traj.times) {
        let norm = surface_l2_sq(v, chart, grid, t)?.sqrt();
        if norm > prev * (1.0 + 1e-12) {
            monotone = false;
        }
        prev = norm;
        if t >= t_min - 1e-12 && t <= t_max + 1e-12 {
            any = true;
            sup = sup.max(t.sqrt() * norm / w12);
        }
    }
    if !any {
        return param(format!("no snapshot lies in the decay window [{t_min}, {t_max}]"));
    }
    Ok(DecayReport { sup_bound: sup, monotone, initial_w12: w12 })
}

/// Centered time difference of the pulled-back field at an interior snapshot.
pub fn material_derivative(traj: &Trajectory, index: usize) -> Result<Field> {
    if index == 0 || index + 1 >= traj.len() {
        return param(format!("material derivative needs an interior snapshot index, got {index} of {}", traj.len()));
    }
    let h = traj.times[index + 1] - traj.times[index - 1];
    let values = traj.states[index + 1].iter().zip(&traj.states[index - 1]).map(|(a, b)| (a - b) / h).collect();
    Ok(Field { time: traj.times[index], values })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityReport {
    /// `‖D_t^w u‖_{L²L²(Γ)}`
    pub material_norm: f64,
    /// `‖div_Γ(κ∇_Γ u)‖_{L²L²(Γ)}`
    pub diffusion_norm: f64,
    /// `(material_norm + diffusion_norm) / ‖û₀‖_{W^{1,2}}`
    pub ratio: f64,
}

/// Left side of the regularity bound relative to the initial datum.
pub fn regularity_report(traj: &Trajectory, chart: &Chart, kappa: &Diffusion, grid: &GridSpec) -> Result<RegularityReport> {
    let n = traj.len();
    if n < 3 {
        return param("regularity report needs at least three snapshots");
    }
    let w12 = w12_norm(grid, &traj.states[0])?;
    if w12 == 0.0 {
        return Err(Error::Precondition("regularity ratio is undefined for a zero initial datum".into()));
    }
    let mut dt_sq = Vec::with_capacity(n);
    let mut div_sq = Vec::with_capacity(n);
    for k in 0..n {
        let t = traj.times[k];
        let d: Vec<f64> = if k == 0 || k == n - 1 {
            let (a, b) = if k == 0 { (1, 0) } else { (n - 1, n - 2) };
            let h = traj.times[a] - traj.times[b];
            traj.states[a].iter().zip(&traj.states[b]).map(|(x, y)| (x - y) / h).collect()
        } else {
            material_derivative(traj, k)?.values
        };
        dt_sq.push(surface_l2_sq(&d, chart, grid, t)?);
        let coef = nodal_coefficients(chart, kappa, grid, t)?;
        let l = assemble_l(chart, kappa, grid, t)?.matrix;
        let lv = l.mul_vec(&traj.states[k]);
        let div: Vec<f64> = (0..grid.len())
            .map(|i| {
                let (a, b) = grid.coords(i);
                -(lv[i] - coef[grid.ext_index(a + 1, b + 1)].dilation * traj.states[k][i])
            })
            .collect();
        div_sq.push(surface_l2_sq(&div, chart, grid, t)?);
    }
    let material_norm = trapezoid(&traj.times, &dt_sq).sqrt();
    let diffusion_norm = trapezoid(&traj.times, &div_sq).sqrt();
    Ok(RegularityReport { material_norm, diffusion_norm, ratio: (material_norm + diffusion_norm) / w12 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DilationCheck {
    /// `∫_U (1/2𝒢)(d𝒢/dt) √𝒢 dX`
    pub integral: f64,
    /// centered difference of `∫_U √𝒢 dX`
    pub derivative: f64,
    pub residual: f64,
}

/// Compares the integrated dilation with the rate of change of the area.
pub fn dilation_identity(chart: &Chart, grid: &GridSpec, t: f64, dt: f64) -> Result<DilationCheck> {
    if !(dt > 0.0) {
        return param(format!("difference step must be positive, got {dt}"));
    }
    let horizon = chart.horizon();
    let integral = surface_integral(|_| 1.0, chart, grid, t)?;
    let _ = integral;
    let dil = {
        let (e1, e2) = grid.ext_dims();
        let mut sum = 0.0;
        for q in 0..e2 {
            let wq = if q == 0 || q == e2 - 1 { 0.5 } else { 1.0 };
            for p in 0..e1 {
                let wp = if p == 0 || p == e1 - 1 { 0.5 } else { 1.0 };
                let m = chart.metric(grid.ext_node(p, q), t)?;
                sum += wp * wq * m.dilation() * m.sqrt_det;
            }
        }
        sum * grid.h1 * grid.h2
    };
    let area = |s: f64| surface_integral(|_| 1.0, chart, grid, s);
    let derivative = if t - dt >= 0.0 && t + dt <= horizon {
        (area(t + dt)? - area(t - dt)?) / (2.0 * dt)
    } else if t + 2.0 * dt <= horizon {
        (-3.0 * area(t)? + 4.0 * area(t + dt)? - area(t + 2.0 * dt)?) / (2.0 * dt)
    } else {
        (3.0 * area(t)? - 4.0 * area(t - dt)? + area(t - 2.0 * dt)?) / (2.0 * dt)
    };
    Ok(DilationCheck { integral: dil, derivative, residual: (dil - derivative).abs() })
}

/// Forcing `∂_t û + Lû` from the continuous operator.
pub struct ContinuousForcing<'a> {
    pub chart: &'a Chart,
    pub kappa: &'a Diffusion,
    pub solution: &'a dyn ExactSolution,
}

impl Forcing for ContinuousForcing<'_> {
    fn sample(&self, grid: &GridSpec, t: f64) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(grid.len());
        for j in 0..grid.n2 {
            for i in 0..grid.n1 {
                let x = grid.node(i, j);
                out.push(self.solution.time_derivative(x, t) + apply_continuous_l(self.chart, self.kappa, self.solution, x, t)?);
            }
        }
        Ok(out)
    }
}

/// Forcing `∂_t û + L_h û` from the assembled operator; removes the spatial
/// truncation error so that only the time discretization is measured.
pub struct DiscreteForcing<'a> {
    pub chart: &'a Chart,
    pub kappa: &'a Diffusion,
    pub solution: &'a dyn ExactSolution,
}

impl Forcing for DiscreteForcing<'_> {
    fn sample(&self, grid: &GridSpec, t: f64) -> Result<Vec<f64>> {
        let u = grid.sample(|x| self.solution.value(x, t));
        let lu = assemble_l(self.chart, self.kappa, grid, t)?.matrix.mul_vec(&u);
        Ok(grid.sample(|x| self.solution.time_derivative(x, t)).iter().zip(lu).map(|(a, b)| a + b).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub dt: f64,
    pub err_max: f64,
    pub err_l2: f64,
    pub order_space: Option<f64>,
    pub order_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    /// Spatial sweep (fixed small `dt`).
    pub space: Vec<ConvergenceRow>,
    /// Temporal sweep (fixed grid).
    pub time: Vec<ConvergenceRow>,
    /// Least-squares slopes `[max, l2]`.
    pub fitted_space_order: [f64; 2],
    pub fitted_time_order: [f64; 2],
    /// Set when some error failed to decrease under refinement.
    pub non_monotone: bool,
}

impl ConvergenceTable {
    pub const CSV_HEADER: &'static str = "h,dt,err_max,err_l2,order_space,order_time";

    pub fn csv(&self) -> String {
        let opt = |o: Option<f64>| o.map(|v| v.to_string()).unwrap_or_default();
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in self.space.iter().chain(&self.time) {
            let _ = writeln!(s, "{},{},{},{},{},{}", r.h, r.dt, r.err_max, r.err_l2, opt(r.order_space), opt(r.order_time));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmsOptions {
    pub levels: usize,
    pub horizon: f64,
    pub theta: f64,
    /// Interior nodes per axis on the coarsest spatial level.
    pub n_coarse: usize,
    /// Step for the spatial sweep.
    pub dt_space: f64,
    /// Interior nodes per axis for the temporal sweep.
    pub n_time: usize,
    /// Coarsest step of the temporal sweep.
    pub dt_coarse: f64,
    pub solver: SolverOptions,
}

impl Default for MmsOptions {
    fn default() -> Self {
        MmsOptions {
            levels: 3,
            horizon: 0.1,
            theta: 0.5,
            n_coarse: 7,
            dt_space: 1e-3,
            n_time: 15,
            dt_coarse: 0.025,
            solver: SolverOptions::default(),
        }
    }
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(_, y)| **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Manufactured-solution convergence in space and in time.
///
/// The spatial sweep refines `h` by halving (`n → 2n + 1`) with the forcing
/// from the continuous operator; the temporal sweep halves `dt` on a fixed
/// grid with the forcing from the discrete operator.
pub fn mms_convergence(chart: &Chart, kappa: &Diffusion, solution: &dyn ExactSolution, opts: &MmsOptions) -> Result<ConvergenceTable> {
    if opts.levels < 3 {
        return param(format!("order fits need at least 3 levels, got {}", opts.levels));
    }
    if opts.horizon > chart.horizon() {
        return param(format!("MMS horizon {} exceeds the chart horizon {}", opts.horizon, chart.horizon()));
    }
    let domain = chart.domain();
    let finest = GridSpec::new(domain, (opts.n_coarse + 1) * (1 << (opts.levels - 1)) - 1, (opts.n_coarse + 1) * (1 << (opts.levels - 1)) - 1)?;
    let scale = (0..=4)
        .map(|k| opts.horizon * k as f64 / 4.0)
        .flat_map(|t| finest.closure_nodes().map(move |x| (x, t)).collect::<Vec<_>>())
        .map(|(x, t)| solution.value(x, t).abs())
        .fold(0.0_f64, f64::max)
        .max(1.0);
    let defect = boundary_defect(solution, &finest, &crate::grid::linspace(0.0, opts.horizon, 5));
    if defect > 1e-12 * scale {
        return Err(Error::Precondition(format!(
            "exact solution must vanish on the boundary, found |û| = {defect:e}"
        )));
    }

    let run = |grid: &GridSpec, dt: f64, forcing: &dyn Forcing| -> Result<(f64, f64, f64)> {
        let v0 = grid.sample(|x| solution.value(x, 0.0));
        let traj = solve_direct(chart, kappa, grid, &v0, opts.horizon, dt, opts.theta, forcing, opts.solver)?;
        let exact = grid.sample(|x| solution.value(x, opts.horizon));
        let err: Vec<f64> = traj.last().values.iter().zip(&exact).map(|(a, b)| a - b).collect();
        let emax = err.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
        Ok((traj.dt, emax, grid.l2_norm(&err)))
    };

    let mut space = Vec::with_capacity(opts.levels);
    for k in 0..opts.levels {
        let n = (opts.n_coarse + 1) * (1 << k) - 1;
        let grid = GridSpec::new(domain, n, n)?;
        let forcing = ContinuousForcing { chart, kappa, solution };
        let (dt, emax, el2) = run(&grid, opts.dt_space, &forcing)?;
        let order_space = space.last().map(|p: &ConvergenceRow| (p.err_max / emax).ln() / (p.h / grid.h1).ln());
        space.push(ConvergenceRow { h: grid.h1, dt, err_max: emax, err_l2: el2, order_space, order_time: None });
    }
    let grid = GridSpec::new(domain, opts.n_time, opts.n_time)?;
    let mut time = Vec::with_capacity(opts.levels);
    for k in 0..opts.levels {
        let forcing = DiscreteForcing { chart, kappa, solution };
        let (steps, _) = step_plan(opts.horizon, opts.dt_coarse)?;
        let dt_level = opts.horizon / (steps << k) as f64;
        let (dt, emax, el2) = run(&grid, dt_level, &forcing)?;
        let order_time = time.last().map(|p: &ConvergenceRow| (p.err_max / emax).ln() / (p.dt / dt).ln());
        time.push(ConvergenceRow { h: grid.h1, dt, err_max: emax, err_l2: el2, order_space: None, order_time });
    }
    let slope = |rows: &[ConvergenceRow], by_h: bool| -> [f64; 2] {
        let xs: Vec<f64> = rows.iter().map(|r| if by_h { r.h } else { r.dt }).collect();
        [
            fit_slope(&xs, &rows.iter().map(|r| r.err_max).collect::<Vec<_>>()),
            fit_slope(&xs, &rows.iter().map(|r| r.err_l2).collect::<Vec<_>>()),
        ]
    };
    let decreasing = |rows: &[ConvergenceRow]| rows.windows(2).all(|w| w[1].err_max < w[0].err_max && w[1].err_l2 < w[0].err_l2);
    Ok(ConvergenceTable {
        fitted_space_order: slope(&space, true),
        fitted_time_order: slope(&time, false),
        non_monotone: !(decreasing(&space) && decreasing(&time)),
        space,
        time,
    })
}

/// `(W (L − D₀))` asymmetry, `W = diag(√𝒢 h₁h₂)`; zero up to rounding for the
/// flux discretization.
pub fn weighted_asymmetry(chart: &Chart, kappa: &Diffusion, grid: &GridSpec, t: f64) -> Result<f64> {
    let coef = nodal_coefficients(chart, kappa, grid, t)?;
    let l = assemble_l(chart, kappa, grid, t)?.matrix;
    let mut w = Vec::with_capacity(grid.len());
    let mut d0 = Vec::with_capacity(grid.len());
    for j in 0..grid.n2 {
        for i in 0..grid.n1 {
            let c = &coef[grid.ext_index(i + 1, j + 1)];
            w.push(c.sqrt_det * grid.h1 * grid.h2);
            d0.push(c.dilation);
        }
    }
    let m = l.sub(&CsrMatrix::diagonal(&d0)).scale_rows(&w);
    Ok(m.asymmetry())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Preset;
    use crate::grid::Rect;
    use crate::manufactured::SeparableMode;
    use crate::timestepper::NoForcing;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn chart(p: Preset, horizon: f64) -> Chart {
        Chart::preset(p, Rect::unit(), horizon).unwrap()
    }

    #[test]
    fn surface_integral_examples() {
        let g = GridSpec::unit_square(63).unwrap();
        assert_relative_eq!(surface_integral(|_| 1.0, &chart(Preset::FlatStatic, 1.0), &g, 0.3).unwrap(), 1.0, max_relative = 1e-12);
        let c = chart(Preset::IsotropicScaling { gamma: 1.0 }, 1.0);
        assert_relative_eq!(surface_integral(|_| 1.0, &c, &g, 0.7).unwrap(), 1.4f64.exp(), max_relative = 1e-12);
        let s = surface_integral(|x| (PI * x[0]).sin() * (PI * x[1]).sin(), &chart(Preset::FlatStatic, 1.0), &g, 0.0).unwrap();
        assert_relative_eq!(s, 4.0 / (PI * PI), max_relative = 1e-3);
    }

    #[test]
    fn gradient_examples() {
        let c = chart(Preset::FlatStatic, 1.0);
        let g = GridSpec::unit_square(127).unwrap();
        assert_eq!(surface_grad_sq(&vec![0.0; g.len()], &c, &g, 0.0).unwrap(), 0.0);
        let f = g.sample(|x| (PI * x[0]).sin() * (PI * x[1]).sin());
        assert_relative_eq!(surface_grad_sq(&f, &c, &g, 0.0).unwrap(), PI * PI / 2.0, max_relative = 1e-3);
    }

    #[test]
    fn tangential_gradient_contracts() {
        let c = chart(Preset::GraphOscillation { epsilon: 0.3, omega: 1.0 }, 2.0);
        let g = GridSpec::unit_square(9).unwrap();
        let f = g.sample(|x| x[0] * (1.0 - x[0]) * (x[1] + 0.3).sin());
        for (i, j) in [(0, 0), (4, 2), (8, 8)] {
            let v = tangential_gradient(&f, &c, &g, 1.0, i, j).unwrap();
            let sq: f64 = v.iter().map(|a| a * a).sum();
            let contracted = contracted_grad_sq(&f, &c, &g, 1.0, i, j).unwrap();
            assert!((sq - contracted).abs() <= 1e-10 * contracted.max(1.0));
        }
    }

    #[test]
    fn face_energy_is_weighted_quadratic_form() {
        let c = chart(Preset::GraphOscillation { epsilon: 0.3, omega: 2.0 }, 2.0);
        let k = Diffusion::bump(1.0, 0.4);
        let g = GridSpec::new(Rect::unit(), 8, 6).unwrap();
        let t = 0.9;
        let f: Vec<f64> = (0..g.len()).map(|k| ((k * 17 % 9) as f64 - 4.0) / 4.0).collect();
        let coef = nodal_coefficients(&c, &k, &g, t).unwrap();
        let lf = assemble_l(&c, &k, &g, t).unwrap().apply(&f);
        let form = weighted_sum(&g, &coef, |i, cc| f[i] * (lf[i] - cc.dilation * f[i]));
        assert_relative_eq!(gradient_energy(&f, &c, Some(&k), &g, t).unwrap(), form, max_relative = 1e-12);
        assert!(weighted_asymmetry(&c, &k, &g, t).unwrap() < 1e-10);
    }

    #[test]
    fn zero_trajectory_ledgers() {
        let c = chart(Preset::FlatStatic, 0.1);
        let g = GridSpec::unit_square(5).unwrap();
        let k = Diffusion::constant(1.0);
        let tr = solve_direct(&c, &k, &g, &vec![0.0; g.len()], 0.1, 0.01, 0.5, &NoForcing, SolverOptions::default()).unwrap();
        let e = energy_report(&tr, &c, &k, &g).unwrap();
        assert_eq!(e.max_residual_abs(), 0.0);
        assert!(e.csv().starts_with("time,mass,dissipation,residual_abs,residual_rel\n"));
        assert!(decay_report(&tr, &c, &g, 0.05, 0.1).is_err());
        assert!(material_derivative(&tr, 0).is_err());
        assert!(material_derivative(&tr, tr.len() - 1).is_err());
        assert!(material_derivative(&tr, 3).unwrap().values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn eigenmode_material_derivative() {
        let c = chart(Preset::FlatStatic, 0.1);
        let g = GridSpec::unit_square(15).unwrap();
        let k = Diffusion::constant(1.0);
        let (mode, mu) = g.lowest_mode(1.0, 1.0);
        let tr = solve_direct(&c, &k, &g, &mode, 0.1, 1e-3, 0.5, &NoForcing, SolverOptions::default()).unwrap();
        let d = material_derivative(&tr, 50).unwrap();
        let v = &tr.states[50];
        for (a, b) in d.values.iter().zip(v) {
            assert!((a + mu * b).abs() <= 1e-4 * mu * b.abs().max(1e-3));
        }
    }

    #[test]
    fn dilation_identity_on_presets() {
        let g = GridSpec::unit_square(31).unwrap();
        for p in [Preset::IsotropicScaling { gamma: 0.5 }, Preset::GraphOscillation { epsilon: 0.2, omega: 1.0 }] {
            let c = chart(p, 1.0);
            for t in [0.0, 0.5, 1.0] {
                let r = dilation_identity(&c, &g, t, 1e-3).unwrap();
                assert!(r.residual < 1e-4 * r.integral.abs().max(1.0), "{p:?} {t} {r:?}");
            }
        }
    }

    #[test]
    fn mms_rejects_boundary_violation() {
        struct Offset;
        impl ExactSolution for Offset {
            fn value(&self, _x: [f64; 2], _t: f64) -> f64 {
                1.0
            }
            fn time_derivative(&self, _x: [f64; 2], _t: f64) -> f64 {
                0.0
            }
            fn gradient(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
                [0.0; 2]
            }
            fn hessian(&self, _x: [f64; 2], _t: f64) -> [[f64; 2]; 2] {
                [[0.0; 2]; 2]
            }
        }
        let c = chart(Preset::FlatStatic, 1.0);
        let r = mms_convergence(&c, &Diffusion::constant(1.0), &Offset, &MmsOptions::default());
        assert!(matches!(r, Err(Error::Precondition(_))));
        let r = mms_convergence(&c, &Diffusion::constant(1.0), &SeparableMode::unit(1.0), &MmsOptions { levels: 2, ..Default::default() });
        assert!(r.is_err());
    }

    #[test]
    fn mms_flat_orders() {
        let c = chart(Preset::FlatStatic, 1.0);
        let t = mms_convergence(&c, &Diffusion::constant(1.0), &SeparableMode::unit(1.0), &MmsOptions::default()).unwrap();
        for o in t.fitted_space_order.iter().chain(&t.fitted_time_order) {
            assert!((1.8..=2.2).contains(o), "{t:?}");
        }
        assert!(!t.non_monotone);
        assert_eq!(t.csv().lines().count(), 7);
    }
}
