//! θ-scheme time stepping of `∂_t v + L(t) v = F` and the Picard iteration
//! `∂_t v_{m+1} + A v_{m+1} = −B(t) v_m`.

use crate::coefficients::Diffusion;
use crate::error::{param, Error, Result};
use crate::geometry::Chart;
use crate::grid::GridSpec;
use crate::operator::{assemble_a, assemble_l, check_len, OperatorMatrix};
use crate::sparse::{bicgstab, conjugate_gradient, CsrMatrix, SolveStats, SolverOptions};

/// A grid function on the interior nodes at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub time: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Direct,
    Picard,
}

/// Snapshots at uniformly spaced times starting from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: GridSpec,
    pub dt: f64,
    pub theta: f64,
    pub scheme: Scheme,
    pub forced: bool,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Largest relative residual of any linear solve.
    pub max_solve_residual: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn field(&self, k: usize) -> Field {
        Field { time: self.times[k], values: self.states[k].clone() }
    }

    pub fn last(&self) -> Field {
        self.field(self.len() - 1)
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Index of the snapshot closest to `t`.
    pub fn index_near(&self, t: f64) -> usize {
        let k = (t / self.dt).round().max(0.0) as usize;
        k.min(self.len().saturating_sub(1))
    }
}

/// Source term sampled at interior nodes.
pub trait Forcing {
    fn sample(&self, grid: &GridSpec, t: f64) -> Result<Vec<f64>>;

    fn is_zero(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoForcing;

impl Forcing for NoForcing {
    fn sample(&self, grid: &GridSpec, _t: f64) -> Result<Vec<f64>> {
        Ok(vec![0.0; grid.len()])
    }

    fn is_zero(&self) -> bool {
        true
    }
}

impl<F: Fn([f64; 2], f64) -> f64> Forcing for F {
    fn sample(&self, grid: &GridSpec, t: f64) -> Result<Vec<f64>> {
        Ok(grid.sample(|x| self(x, t)))
    }
}

/// Source of the spatial operator at a given time.
pub trait OperatorProvider {
    fn operator(&self, t: f64) -> Result<CsrMatrix>;
}

/// `L(t)` for a chart and coefficient.
pub struct SurfaceOperator<'a> {
    pub chart: &'a Chart,
    pub kappa: &'a Diffusion,
    pub grid: &'a GridSpec,
}

impl OperatorProvider for SurfaceOperator<'_> {
    fn operator(&self, t: f64) -> Result<CsrMatrix> {
        Ok(assemble_l(self.chart, self.kappa, self.grid, t)?.matrix)
    }
}

/// A time-independent operator.
pub struct FrozenOperator(pub CsrMatrix);

impl OperatorProvider for FrozenOperator {
    fn operator(&self, _t: f64) -> Result<CsrMatrix> {
        Ok(self.0.clone())
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.5..=1.0).contains(&theta) {
        return param(format!("theta must lie in [0.5, 1], got {theta}"));
    }
    Ok(())
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return param(format!("time step must be positive, got {dt}"));
    }
    Ok(())
}

/// Nonsymmetric solve with a CG fallback for symmetric systems.
fn solve_general(m: &CsrMatrix, rhs: &[f64], x: &mut [f64], opts: SolverOptions) -> Result<SolveStats> {
    match bicgstab(m, rhs, x, opts) {
        Ok(s) => Ok(s),
        Err(e) if m.asymmetry() == 0.0 => {
            x.iter_mut().for_each(|v| *v = 0.0);
            conjugate_gradient(m, rhs, x, opts).map_err(|_| e)
        }
        Err(e) => Err(e),
    }
}

/// `v + dt(θF(t+dt) + (1−θ)F(t)) − (1−θ)dt L(t) v`
fn theta_rhs(v: &[f64], l_now: &CsrMatrix, dt: f64, theta: f64, f_now: &[f64], f_next: &[f64]) -> Vec<f64> {
    let lv = l_now.mul_vec(v);
    (0..v.len())
        .map(|i| v[i] - (1.0 - theta) * dt * lv[i] + dt * (theta * f_next[i] + (1.0 - theta) * f_now[i]))
        .collect()
}

/// One θ-step: `(I + θdt L(t+dt)) v' = (I − (1−θ)dt L(t)) v + dt(θF(t+dt) + (1−θ)F(t))`.
pub fn theta_step(
    v: &Field,
    dt: f64,
    theta: f64,
    grid: &GridSpec,
    operators: &dyn OperatorProvider,
    forcing: &dyn Forcing,
    opts: SolverOptions,
) -> Result<Field> {
    check_theta(theta)?;
    check_dt(dt)?;
    check_len(grid, &v.values)?;
    let (t, tn) = (v.time, v.time + dt);
    let l_now = operators.operator(t)?;
    let l_next = operators.operator(tn)?;
    let (next, _) = theta_step_matrices(&v.values, &l_now, &l_next, dt, theta, &forcing.sample(grid, t)?, &forcing.sample(grid, tn)?, opts)?;
    Ok(Field { time: tn, values: next })
}

#[allow(clippy::too_many_arguments)]
fn theta_step_matrices(
    v: &[f64],
    l_now: &CsrMatrix,
    l_next: &CsrMatrix,
    dt: f64,
    theta: f64,
    f_now: &[f64],
    f_next: &[f64],
    opts: SolverOptions,
) -> Result<(Vec<f64>, SolveStats)> {
    let rhs = theta_rhs(v, l_now, dt, theta, f_now, f_next);
    let system = l_next.shifted_identity(theta * dt);
    let mut x = v.to_vec();
    let stats = solve_general(&system, &rhs, &mut x, opts)?;
    Ok((x, stats))
}

/// Uniform step count and size covering `[0, T]` with steps no larger than `dt`.
pub fn step_plan(horizon: f64, dt: f64) -> Result<(usize, f64)> {
    check_dt(dt)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return param(format!("final time must be positive, got {horizon}"));
    }
    let steps = ((horizon / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    Ok((steps, horizon / steps as f64))
}

/// Direct θ-scheme solve of the pulled-back system on `[0, T]`.
#[allow(clippy::too_many_arguments)]
pub fn solve_direct(
    chart: &Chart,
    kappa: &Diffusion,
    grid: &GridSpec,
    v0: &[f64],
    horizon: f64,
    dt: f64,
    theta: f64,
    forcing: &dyn Forcing,
    opts: SolverOptions,
) -> Result<Trajectory> {
    let ops = SurfaceOperator { chart, kappa, grid };
    solve_with(&ops, grid, v0, horizon, dt, theta, forcing, opts)
}

/// θ-scheme solve with an arbitrary operator source.
#[allow(clippy::too_many_arguments)]
pub fn solve_with(
    operators: &dyn OperatorProvider,
    grid: &GridSpec,
    v0: &[f64],
    horizon: f64,
    dt: f64,
    theta: f64,
    forcing: &dyn Forcing,
    opts: SolverOptions,
) -> Result<Trajectory> {
    check_theta(theta)?;
    check_len(grid, v0)?;
    if v0.iter().any(|v| !v.is_finite()) {
        return param("initial datum must be finite");
    }
    let (steps, dt) = step_plan(horizon, dt)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(v0.to_vec());
    let mut l_now = operators.operator(0.0)?;
    let mut f_now = forcing.sample(grid, 0.0)?;
    let mut worst = 0.0_f64;
    for k in 0..steps {
        let tn = if k + 1 == steps { horizon } else { (k + 1) as f64 * dt };
        let l_next = operators.operator(tn)?;
        let f_next = forcing.sample(grid, tn)?;
        let (next, stats) = theta_step_matrices(&states[k], &l_now, &l_next, dt, theta, &f_now, &f_next, opts)?;
        worst = worst.max(stats.rel_residual);
        times.push(tn);
        states.push(next);
        l_now = l_next;
        f_now = f_next;
    }
    Ok(Trajectory {
        grid: *grid,
        dt,
        theta,
        scheme: Scheme::Direct,
        forced: !forcing.is_zero(),
        times,
        states,
        max_solve_residual: worst,
    })
}

/// Discrete `Z_T` norm of a sequence of states on uniform times.
///
/// `sup e^{−t}‖φ‖ + ‖φ'‖_{L²L²} + ‖Aφ‖_{L²L²}` with centered time differences
/// (second-order one-sided at the ends) and trapezoid quadrature.
pub fn z_norm_states(states: &[Vec<f64>], times: &[f64], a: &CsrMatrix, grid: &GridSpec) -> Result<f64> {
    if states.is_empty() || states.len() != times.len() {
        return param("Z-norm needs a non-empty trajectory with one time per state");
    }
    for s in states {
        check_len(grid, s)?;
    }
    let n = states.len();
    let sup = states
        .iter()
        .zip(times)
        .map(|(s, t)| (-t).exp() * grid.l2_norm(s))
        .fold(0.0_f64, f64::max);
    if n == 1 {
        return Ok(sup);
    }
    let derivative = |k: usize| -> Vec<f64> {
        let d = |i: usize, j: usize, c: f64| -> Vec<f64> {
            states[i].iter().zip(&states[j]).map(|(a, b)| c * (a - b)).collect()
        };
        if n == 2 {
            return d(1, 0, 1.0 / (times[1] - times[0]));
        }
        if k == 0 {
            let h = times[1] - times[0];
            return (0..grid.len())
                .map(|i| (-3.0 * states[0][i] + 4.0 * states[1][i] - states[2][i]) / (2.0 * h))
                .collect();
        }
        if k == n - 1 {
            let h = times[n - 1] - times[n - 2];
            return (0..grid.len())
                .map(|i| (3.0 * states[n - 1][i] - 4.0 * states[n - 2][i] + states[n - 3][i]) / (2.0 * h))
                .collect();
        }
        d(k + 1, k - 1, 1.0 / (times[k + 1] - times[k - 1]))
    };
    let mut dt_sq = Vec::with_capacity(n);
    let mut a_sq = Vec::with_capacity(n);
    for k in 0..n {
        dt_sq.push(grid.l2_norm(&derivative(k)).powi(2));
        a_sq.push(grid.l2_norm(&a.mul_vec(&states[k])).powi(2));
    }
    Ok(sup + trapezoid(times, &dt_sq).sqrt() + trapezoid(times, &a_sq).sqrt())
}

/// Trapezoid rule on arbitrary abscissae.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

pub fn z_norm(traj: &Trajectory, a: &OperatorMatrix, grid: &GridSpec) -> Result<f64> {
    z_norm_states(&traj.states, &traj.times, &a.matrix, grid)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub theta: f64,
    /// Stop once the Z-norm of the consecutive difference is at most `tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub solver: SolverOptions,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions { theta: 0.5, tol: 1e-8, max_iter: 50, solver: SolverOptions::default() }
    }
}

/// Per-correction record of the Picard iteration.
///
/// Entry `k` describes `v_{k+2}` (with `v_0 := 0`): its Z-norm, the Z-norm
/// of `v_{k+2} − v_{k+1}` and the ratio to the previous difference.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardHistory {
    pub iterate_norms: Vec<f64>,
    pub diff_norms: Vec<f64>,
    pub ratios: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Z-norm of the first iterate `v_1`.
    pub first_norm: f64,
    /// Largest relative residual over every stage solve.
    pub max_stage_residual: f64,
}

impl PicardHistory {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("iteration,z_norm,diff_norm,ratio\n");
        for k in 0..self.iterations {
            s.push_str(&format!("{},{},{},{}\n", k + 1, self.iterate_norms[k], self.diff_norms[k], self.ratios[k]));
        }
        s
    }
}

/// Operators `B(t_n) = L(t_n) − A` at every step time, cached when small.
enum PerturbationSource<'a> {
    Cached(Vec<CsrMatrix>),
    OnDemand { ops: SurfaceOperator<'a>, a: &'a CsrMatrix, times: &'a [f64] },
}

impl PerturbationSource<'_> {
    fn get(&self, n: usize) -> Result<std::borrow::Cow<'_, CsrMatrix>> {
        match self {
            PerturbationSource::Cached(v) => Ok(std::borrow::Cow::Borrowed(&v[n])),
            PerturbationSource::OnDemand { ops, a, times } => Ok(std::borrow::Cow::Owned(ops.operator(times[n])?.sub(a))),
        }
    }
}

const CACHE_LIMIT_NNZ: usize = 20_000_000;

/// Picard iteration with θ-scheme stages sharing the direct solver's steps.
#[allow(clippy::too_many_arguments)]
pub fn solve_picard(
    chart: &Chart,
    kappa: &Diffusion,
    grid: &GridSpec,
    lambda1: f64,
    lambda2: f64,
    v0: &[f64],
    horizon: f64,
    dt: f64,
    opts: &PicardOptions,
) -> Result<(Trajectory, PicardHistory)> {
    check_theta(opts.theta)?;
    check_len(grid, v0)?;
    if !(opts.tol > 0.0) {
        return param(format!("Picard tolerance must be positive, got {}", opts.tol));
    }
    if opts.max_iter == 0 {
        return param("Picard iteration needs max_iter ≥ 1");
    }
    let (steps, dt) = step_plan(horizon, dt)?;
    let times: Vec<f64> = (0..=steps).map(|k| if k == steps { horizon } else { k as f64 * dt }).collect();
    let a = assemble_a(grid, lambda1, lambda2)?;
    let theta = opts.theta;
    let system = a.matrix.shifted_identity(theta * dt);
    let ops = SurfaceOperator { chart, kappa, grid };
    let source = if (steps + 1) * 9 * grid.len() <= CACHE_LIMIT_NNZ {
        let mut v = Vec::with_capacity(steps + 1);
        for &t in &times {
            v.push(ops.operator(t)?.sub(&a.matrix));
        }
        PerturbationSource::Cached(v)
    } else {
        PerturbationSource::OnDemand { ops, a: &a.matrix, times: &times }
    };

    let mut worst = 0.0_f64;
    let mut stage = |prev: Option<&Vec<Vec<f64>>>| -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(steps + 1);
        out.push(v0.to_vec());
        let mut b_prev = match prev {
            Some(p) => source.get(0)?.mul_vec(&p[0]),
            None => vec![0.0; grid.len()],
        };
        for n in 0..steps {
            let b_next = match prev {
                Some(p) => source.get(n + 1)?.mul_vec(&p[n + 1]),
                None => vec![0.0; grid.len()],
            };
            let cur = &out[n];
            let av = a.matrix.mul_vec(cur);
            let rhs: Vec<f64> = (0..grid.len())
                .map(|i| cur[i] - (1.0 - theta) * dt * av[i] - dt * (theta * b_next[i] + (1.0 - theta) * b_prev[i]))
                .collect();
            let mut x = cur.clone();
            let stats = conjugate_gradient(&system, &rhs, &mut x, opts.solver)?;
            worst = worst.max(stats.rel_residual);
            out.push(x);
            b_prev = b_next;
        }
        Ok(out)
    };

    let mut current = stage(None)?;
    let first_norm = z_norm_states(&current, &times, &a.matrix, grid)?;
    let mut history = PicardHistory {
        iterate_norms: Vec::new(),
        diff_norms: Vec::new(),
        ratios: Vec::new(),
        converged: false,
        iterations: 0,
        first_norm,
        max_stage_residual: 0.0,
    };
    let mut prev_diff = first_norm;
    for _ in 0..opts.max_iter {
        let next = stage(Some(&current))?;
        let diff: Vec<Vec<f64>> = next
            .iter()
            .zip(&current)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        let diff_norm = z_norm_states(&diff, &times, &a.matrix, grid)?;
        let ratio = if prev_diff > 0.0 { diff_norm / prev_diff } else { 0.0 };
        history.iterate_norms.push(z_norm_states(&next, &times, &a.matrix, grid)?);
        history.diff_norms.push(diff_norm);
        history.ratios.push(ratio);
        history.iterations += 1;
        prev_diff = diff_norm;
        current = next;
        if diff_norm <= opts.tol {
            history.converged = true;
            break;
        }
    }
    history.max_stage_residual = worst;
    if !history.converged {
        let last = *history.ratios.last().unwrap_or(&0.0);
        if last >= 1.0 {
            return Err(Error::Divergence { iterations: history.iterations, ratio: last });
        }
    }
    let traj = Trajectory {
        grid: *grid,
        dt,
        theta,
        scheme: Scheme::Picard,
        forced: false,
        times,
        states: current,
        max_solve_residual: worst,
    };
    Ok((traj, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Preset;
    use crate::grid::Rect;
    use crate::sparse::norm2;
    use approx::assert_relative_eq;

    fn chart(p: Preset, horizon: f64) -> Chart {
        Chart::preset(p, Rect::unit(), horizon).unwrap()
    }

    #[test]
    fn crank_nicolson_eigenmode_factor() {
        let g = GridSpec::unit_square(9).unwrap();
        let (mode, mu) = g.lowest_mode(1.0, 1.0);
        let a = assemble_a(&g, 1.0, 1.0).unwrap().matrix;
        let dt = 0.01;
        let v = Field { time: 0.0, values: mode.clone() };
        let next = theta_step(&v, dt, 0.5, &g, &FrozenOperator(a), &NoForcing, SolverOptions::default()).unwrap();
        let factor = (1.0 - dt * mu / 2.0) / (1.0 + dt * mu / 2.0);
        for (x, m) in next.values.iter().zip(&mode) {
            assert_relative_eq!(*x, factor * m, max_relative = 1e-8, epsilon = 1e-12);
        }
        assert_relative_eq!(next.time, dt);
    }

    #[test]
    fn zero_stays_zero() {
        let g = GridSpec::unit_square(5).unwrap();
        let c = chart(Preset::GraphOscillation { epsilon: 0.1, omega: 1.0 }, 0.1);
        let tr = solve_direct(&c, &Diffusion::constant(1.0), &g, &vec![0.0; g.len()], 0.1, 0.01, 0.5, &NoForcing, SolverOptions::default())
            .unwrap();
        assert_eq!(tr.len(), 11);
        assert!(tr.states.iter().all(|s| s.iter().all(|v| *v == 0.0)));
        let a = assemble_a(&g, 1.0, 1.0).unwrap();
        assert_eq!(z_norm(&tr, &a, &g).unwrap(), 0.0);
    }

    #[test]
    fn backward_euler_consistency_first_order() {
        let g = GridSpec::unit_square(5).unwrap();
        let a = assemble_a(&g, 1.0, 1.0).unwrap().matrix;
        let v: Vec<f64> = (0..g.len()).map(|k| ((k * 7 % 5) as f64 - 2.0) * 0.1).collect();
        let f = |x: [f64; 2], _t: f64| x[0] * x[1];
        let target: Vec<f64> = {
            let lv = a.mul_vec(&v);
            let fs = g.sample(|x| x[0] * x[1]);
            lv.iter().zip(&fs).map(|(l, s)| -l + s).collect()
        };
        let mut errs = Vec::new();
        for dt in [1e-5, 5e-6] {
            let next = theta_step(&Field { time: 0.0, values: v.clone() }, dt, 1.0, &g, &FrozenOperator(a.clone()), &f, SolverOptions::default())
                .unwrap();
            let q: Vec<f64> = next.values.iter().zip(&v).zip(&target).map(|((n, o), t)| (n - o) / dt - t).collect();
            errs.push(norm2(&q));
        }
        assert_relative_eq!(errs[0] / errs[1], 2.0, max_relative = 0.05);
    }

    #[test]
    fn step_plan_covers_horizon() {
        assert_eq!(step_plan(0.1, 1e-3).unwrap().0, 100);
        let (n, dt) = step_plan(0.1, 0.03).unwrap();
        assert_eq!(n, 4);
        assert_relative_eq!(dt, 0.025);
        assert!(step_plan(0.1, 0.0).is_err());
    }

    #[test]
    fn translating_frame_matches_flat() {
        let g = GridSpec::unit_square(7).unwrap();
        let (mode, _) = g.lowest_mode(1.0, 1.0);
        let k = Diffusion::constant(1.0);
        let run = |p| solve_direct(&chart(p, 0.05), &k, &g, &mode, 0.05, 0.01, 0.5, &NoForcing, SolverOptions::default()).unwrap();
        let a = run(Preset::FlatStatic);
        let b = run(Preset::TranslatingPatch { speed: 2.0 });
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn z_norm_constant_trajectory() {
        let g = GridSpec::unit_square(4).unwrap();
        let a = assemble_a(&g, 1.0, 1.0).unwrap();
        let f0: Vec<f64> = (0..g.len()).map(|k| k as f64 * 0.1).collect();
        let times = crate::grid::linspace(0.0, 0.5, 6);
        let states = vec![f0.clone(); 6];
        let z = z_norm_states(&states, &times, &a.matrix, &g).unwrap();
        let expect = g.l2_norm(&f0) + 0.5f64.sqrt() * g.l2_norm(&a.apply(&f0));
        assert_relative_eq!(z, expect, max_relative = 1e-12);
        let scaled: Vec<Vec<f64>> = states.iter().map(|s| s.iter().map(|v| -3.0 * v).collect()).collect();
        assert_relative_eq!(z_norm_states(&scaled, &times, &a.matrix, &g).unwrap(), 3.0 * z, max_relative = 1e-12);
    }

    #[test]
    fn picard_flat_fixed_point_after_one_correction() {
        let g = GridSpec::unit_square(7).unwrap();
        let (mode, _) = g.lowest_mode(1.0, 1.0);
        let c = chart(Preset::FlatStatic, 0.05);
        let k = Diffusion::constant(1.0);
        let (tr, h) = solve_picard(&c, &k, &g, 1.0, 1.0, &mode, 0.05, 0.01, &PicardOptions::default()).unwrap();
        assert!(h.converged);
        assert_eq!(h.iterations, 1);
        assert_eq!(h.diff_norms[0], 0.0);
        let direct = solve_direct(&c, &k, &g, &mode, 0.05, 0.01, 0.5, &NoForcing, SolverOptions::default()).unwrap();
        for (p, d) in tr.states.iter().zip(&direct.states) {
            for (x, y) in p.iter().zip(d) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        assert!(h.csv().starts_with("iteration,z_norm,diff_norm,ratio\n1,"));
    }

    #[test]
    fn picard_reports_divergence() {
        // λ far below κ̂g^{αα} makes B dominate A
        let g = GridSpec::unit_square(7).unwrap();
        let (mode, _) = g.lowest_mode(1.0, 1.0);
        let c = chart(Preset::FlatStatic, 0.5);
        let opts = PicardOptions { max_iter: 4, ..Default::default() };
        let r = solve_picard(&c, &Diffusion::constant(1.0), &g, 0.01, 0.01, &mode, 0.5, 0.05, &opts);
        assert!(matches!(r, Err(Error::Divergence { .. })), "{r:?}");
    }
}
