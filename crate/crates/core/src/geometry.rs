//! Evolving charts `x̂(X, t)` over the fixed parameter rectangle and the metric
//! data derived from them.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{param, Error, Result};
use crate::grid::{GridSpec, Rect};

pub type Vec3 = [f64; 3];

/// Default finite-difference step, relative to the domain size.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Built-in charts with analytic partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    /// `x̂ = (X₁, X₂, 0)`
    FlatStatic,
    /// `x̂ = (e^{γt} X₁, e^{γt} X₂, 0)`
    IsotropicScaling { gamma: f64 },
    /// `x̂ = (X₁, X₂, ε sin(ωt) sin(πX₁) sin(πX₂))`
    GraphOscillation { epsilon: f64, omega: f64 },
    /// `x̂ = (X₁ + ct, X₂, 0)`
    TranslatingPatch { speed: f64 },
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::FlatStatic => "flat_static",
            Preset::IsotropicScaling { .. } => "isotropic_scaling",
            Preset::GraphOscillation { .. } => "graph_oscillation",
            Preset::TranslatingPatch { .. } => "translating_patch",
        }
    }

    fn jet(&self, x: [f64; 2], t: f64) -> ChartJet {
        let mut jet = ChartJet::default();
        match *self {
            Preset::FlatStatic => {
                jet.position = [x[0], x[1], 0.0];
                jet.dx = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
            }
            Preset::TranslatingPatch { speed } => {
                jet.position = [x[0] + speed * t, x[1], 0.0];
                jet.dx = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
                jet.dt = [speed, 0.0, 0.0];
            }
            Preset::IsotropicScaling { gamma } => {
                let e = (gamma * t).exp();
                jet.position = [e * x[0], e * x[1], 0.0];
                jet.dx = [[e, 0.0, 0.0], [0.0, e, 0.0]];
                jet.dt = [gamma * e * x[0], gamma * e * x[1], 0.0];
                jet.dtx = [[gamma * e, 0.0, 0.0], [0.0, gamma * e, 0.0]];
            }
            Preset::GraphOscillation { epsilon, omega } => {
                let (s, c) = (omega * t).sin_cos();
                let (s1, c1) = (PI * x[0]).sin_cos();
                let (s2, c2) = (PI * x[1]).sin_cos();
                let amp = epsilon * s;
                let amp_t = epsilon * omega * c;
                jet.position = [x[0], x[1], amp * s1 * s2];
                jet.dx = [[1.0, 0.0, amp * PI * c1 * s2], [0.0, 1.0, amp * PI * s1 * c2]];
                let h11 = -PI * PI * s1 * s2;
                let h12 = PI * PI * c1 * c2;
                let h22 = -PI * PI * s1 * s2;
                jet.dxx = [
                    [[0.0, 0.0, amp * h11], [0.0, 0.0, amp * h12]],
                    [[0.0, 0.0, amp * h12], [0.0, 0.0, amp * h22]],
                ];
                jet.dt = [0.0, 0.0, amp_t * s1 * s2];
                jet.dtx = [[0.0, 0.0, amp_t * PI * c1 * s2], [0.0, 0.0, amp_t * PI * s1 * c2]];
                jet.dtxx = [
                    [[0.0, 0.0, amp_t * h11], [0.0, 0.0, amp_t * h12]],
                    [[0.0, 0.0, amp_t * h12], [0.0, 0.0, amp_t * h22]],
                ];
            }
        }
        jet
    }
}

/// Position of the chart and its partials at one `(X, t)`.
///
/// `dx[a]` is `∂x̂/∂X_a`, `dxx[a][b]` is `∂²x̂/∂X_a∂X_b`, `dtx[a]` is
/// `∂²x̂/∂t∂X_a` and `dtxx[a][b]` is `∂³x̂/∂t∂X_a∂X_b`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ChartJet {
    pub position: Vec3,
    pub dx: [Vec3; 2],
    pub dxx: [[Vec3; 2]; 2],
    pub dt: Vec3,
    pub dtx: [Vec3; 2],
    pub dtxx: [[Vec3; 2]; 2],
}

type ChartFn = dyn Fn([f64; 2], f64) -> Vec3 + Send + Sync;

#[derive(Clone)]
enum ChartKind {
    Preset(Preset),
    Custom(Arc<ChartFn>),
}

/// An evolving parametrization `x̂(·, t): Ū → ℝ³` for `t ∈ [0, T]`.
///
/// Presets carry analytic partials. Custom charts are differentiated by
/// central differences with a step relative to the domain size; near `t = 0`
/// and `t = T` the time differences become one-sided.
#[derive(Clone)]
pub struct Chart {
    kind: ChartKind,
    domain: Rect,
    horizon: f64,
    fd_step: f64,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            ChartKind::Preset(p) => format!("{p:?}"),
            ChartKind::Custom(_) => "Custom".to_string(),
        };
        f.debug_struct("Chart")
            .field("kind", &kind)
            .field("domain", &self.domain)
            .field("horizon", &self.horizon)
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

impl Chart {
    pub fn preset(preset: Preset, domain: Rect, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return param(format!("horizon must be positive, got {horizon}"));
        }
        Ok(Self { kind: ChartKind::Preset(preset), domain, horizon, fd_step: DEFAULT_FD_STEP })
    }

    /// A user chart differentiated numerically. `fd_step` is relative to the domain size.
    pub fn custom<F>(f: F, domain: Rect, horizon: f64, fd_step: f64) -> Result<Self>
    where
        F: Fn([f64; 2], f64) -> Vec3 + Send + Sync + 'static,
    {
        if !(horizon > 0.0) {
            return param(format!("horizon must be positive, got {horizon}"));
        }
        if !(fd_step > 0.0 && fd_step < 0.1) {
            return param(format!("finite-difference step must lie in (0, 0.1), got {fd_step}"));
        }
        Ok(Self { kind: ChartKind::Custom(Arc::new(f)), domain, horizon, fd_step })
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn preset_kind(&self) -> Option<Preset> {
        match self.kind {
            ChartKind::Preset(p) => Some(p),
            ChartKind::Custom(_) => None,
        }
    }

    pub fn name(&self) -> &'static str {
        self.preset_kind().map_or("custom", |p| p.name())
    }

    /// Same chart with a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return param(format!("horizon must be positive, got {horizon}"));
        }
        Ok(Self { horizon, ..self.clone() })
    }

    fn check(&self, x: [f64; 2], t: f64) -> Result<()> {
        let t_tol = 1e-12 * self.horizon.clamp(1e-300, 1.0);
        if !self.domain.contains_closed(x) || !(t >= -t_tol && t <= self.horizon + t_tol) {
            return Err(Error::Domain { x1: x[0], x2: x[1], t });
        }
        Ok(())
    }

    fn raw(&self, x: [f64; 2], t: f64) -> Vec3 {
        match &self.kind {
            ChartKind::Preset(p) => p.jet(x, t).position,
            ChartKind::Custom(f) => f(x, t),
        }
    }

    /// `x̂(X, t)`.
    pub fn eval(&self, x: [f64; 2], t: f64) -> Result<Vec3> {
        self.check(x, t)?;
        Ok(self.raw(x, t))
    }

    /// Position and partials; analytic for presets, differenced otherwise.
    pub fn jet(&self, x: [f64; 2], t: f64) -> Result<ChartJet> {
        self.check(x, t)?;
        Ok(match &self.kind {
            ChartKind::Preset(p) => p.jet(x, t),
            ChartKind::Custom(_) => self.fd_jet(x, t),
        })
    }

    /// Finite-difference jet with the chart's default steps. Valid for presets
    /// too, which is how the two paths are cross-checked.
    pub fn fd_jet(&self, x: [f64; 2], t: f64) -> ChartJet {
        let s = self.fd_step * self.domain.scale();
        let l = self.domain.scale();
        self.fd_jet_with_steps(x, t, s, s.max(1e-4 * l), s.max(2e-3 * l))
    }

    /// Finite-difference jet with explicit steps for first, second and third
    /// order partials.
    pub fn fd_jet_with_steps(&self, x: [f64; 2], t: f64, h1: f64, h2: f64, h3: f64) -> ChartJet {
        let f = |x: [f64; 2], t: f64| self.raw(x, t);
        let shift = |x: [f64; 2], a: usize, d: f64| {
            let mut y = x;
            y[a] += d;
            y
        };
        let first = |x: [f64; 2], t: f64, a: usize, h: f64| -> Vec3 {
            let p = f(shift(x, a, h), t);
            let m = f(shift(x, a, -h), t);
            std::array::from_fn(|k| (p[k] - m[k]) / (2.0 * h))
        };
        let second = |x: [f64; 2], t: f64, a: usize, b: usize, h: f64| -> Vec3 {
            if a == b {
                let p = f(shift(x, a, h), t);
                let c = f(x, t);
                let m = f(shift(x, a, -h), t);
                std::array::from_fn(|k| (p[k] - 2.0 * c[k] + m[k]) / (h * h))
            } else {
                let pp = f(shift(shift(x, a, h), b, h), t);
                let pm = f(shift(shift(x, a, h), b, -h), t);
                let mp = f(shift(shift(x, a, -h), b, h), t);
                let mm = f(shift(shift(x, a, -h), b, -h), t);
                std::array::from_fn(|k| (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * h * h))
            }
        };
        let horizon = self.horizon;
        let time_diff = |g: &dyn Fn(f64) -> Vec3, h: f64| -> Vec3 {
            if t - h >= 0.0 && t + h <= horizon {
                let (p, m) = (g(t + h), g(t - h));
                std::array::from_fn(|k| (p[k] - m[k]) / (2.0 * h))
            } else if t - h < 0.0 {
                let (a, b, c) = (g(t), g(t + h), g(t + 2.0 * h));
                std::array::from_fn(|k| (-3.0 * a[k] + 4.0 * b[k] - c[k]) / (2.0 * h))
            } else {
                let (a, b, c) = (g(t), g(t - h), g(t - 2.0 * h));
                std::array::from_fn(|k| (3.0 * a[k] - 4.0 * b[k] + c[k]) / (2.0 * h))
            }
        };

        let mut jet = ChartJet { position: f(x, t), ..Default::default() };
        for a in 0..2 {
            jet.dx[a] = first(x, t, a, h1);
            for b in 0..2 {
                jet.dxx[a][b] = second(x, t, a, b, h2);
                jet.dtxx[a][b] = time_diff(&|s| second(x, s, a, b, h3), h3);
            }
            jet.dtx[a] = time_diff(&|s| first(x, s, a, h2), h2);
        }
        jet.dt = time_diff(&|s| f(x, s), h1);
        jet
    }

    /// Motion velocity `w = ∂x̂/∂t` at the surface point `x̂(X, t)`.
    pub fn motion_velocity(&self, x: [f64; 2], t: f64) -> Result<Vec3> {
        Ok(self.jet(x, t)?.dt)
    }

    /// Pointwise metric package at `(X, t)`.
    pub fn metric(&self, x: [f64; 2], t: f64) -> Result<MetricSample> {
        let jet = self.jet(x, t)?;
        MetricSample::from_jet(&jet).map_err(|det| Error::DegenerateChart { x1: x[0], x2: x[1], t, det })
    }
}

pub fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross3(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// First fundamental form and its derived quantities at one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSample {
    pub g1: Vec3,
    pub g2: Vec3,
    /// `g_ab = g_a · g_b`
    pub g: [[f64; 2]; 2],
    /// inverse metric `g^{ab}`
    pub ginv: [[f64; 2]; 2],
    /// `𝒢 = g₁₁g₂₂ − g₁₂g₂₁`
    pub det: f64,
    pub det_dt: f64,
    pub sqrt_det: f64,
    /// `dg[c][a][b] = ∂g_ab/∂X_c`
    pub dg: [[[f64; 2]; 2]; 2],
    /// `∂𝒢/∂X_c`
    pub ddet: [f64; 2],
}

impl MetricSample {
    /// Builds the package; returns the offending determinant when it is not positive.
    pub fn from_jet(jet: &ChartJet) -> std::result::Result<Self, f64> {
        let gv = jet.dx;
        let g = [[dot3(&gv[0], &gv[0]), dot3(&gv[0], &gv[1])], [dot3(&gv[1], &gv[0]), dot3(&gv[1], &gv[1])]];
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        if !(det > 1e-14) {
            return Err(det);
        }
        let ginv = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];

        // ∂_t g_ab = g_a,t · g_b + g_a · g_b,t
        let gt = |a: usize, b: usize| dot3(&jet.dtx[a], &gv[b]) + dot3(&gv[a], &jet.dtx[b]);
        let det_dt = gt(0, 0) * g[1][1] + g[0][0] * gt(1, 1) - gt(0, 1) * g[1][0] - g[0][1] * gt(1, 0);

        let mut dg = [[[0.0; 2]; 2]; 2];
        for (c, dgc) in dg.iter_mut().enumerate() {
            for a in 0..2 {
                for b in 0..2 {
                    dgc[a][b] = dot3(&jet.dxx[c][a], &gv[b]) + dot3(&gv[a], &jet.dxx[c][b]);
                }
            }
        }
        let ddet = std::array::from_fn(|c| {
            let d = &dg[c];
            d[0][0] * g[1][1] + g[0][0] * d[1][1] - d[0][1] * g[1][0] - g[0][1] * d[1][0]
        });
        Ok(Self { g1: gv[0], g2: gv[1], g, ginv, det, det_dt, sqrt_det: det.sqrt(), dg, ddet })
    }

    /// `∂g^{ab}/∂X_c = −(g⁻¹ ∂_c g g⁻¹)_{ab}`.
    pub fn dginv(&self, c: usize) -> [[f64; 2]; 2] {
        let gi = &self.ginv;
        let d = &self.dg[c];
        let mut out = [[0.0; 2]; 2];
        for (a, row) in out.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        s += gi[a][k] * d[k][l] * gi[l][b];
                    }
                }
                *v = -s;
            }
        }
        out
    }

    /// Zeroth-order coefficient `(1/2𝒢) d𝒢/dt`; equals `div_Γ w` under the pull-back.
    pub fn dilation(&self) -> f64 {
        0.5 * self.det_dt / self.det
    }

    /// Largest entry of `|g^{-1} g − I|`.
    pub fn inverse_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for a in 0..2 {
            for b in 0..2 {
                let p = self.ginv[a][0] * self.g[0][b] + self.ginv[a][1] * self.g[1][b];
                let id = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((p - id).abs());
            }
        }
        worst
    }
}

/// Extremes of the nondegeneracy and boundedness quantities over a scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NondegeneracyScan {
    /// min of `𝒢 = |g₁ × g₂|²`
    pub lambda_min_est: f64,
    /// max of `|∂x̂_j/∂X_a| + |∂²x̂_j/∂X_a∂X_b| + |∂²x̂_j/∂t∂X_a| + |∂³x̂_j/∂t∂X_a∂X_b|`
    pub lambda_max_est: f64,
}

/// Scans every grid node (boundary included) at every listed time.
pub fn nondegeneracy_scan(chart: &Chart, grid: &GridSpec, times: &[f64]) -> Result<NondegeneracyScan> {
    if times.is_empty() {
        return param("nondegeneracy scan needs at least one time");
    }
    let mut lmin = f64::INFINITY;
    let mut lmax = 0.0_f64;
    for &t in times {
        for x in grid.closure_nodes() {
            let jet = chart.jet(x, t)?;
            let n = cross3(&jet.dx[0], &jet.dx[1]);
            let area = dot3(&n, &n);
            if !(area > 1e-14) {
                return Err(Error::DegenerateChart { x1: x[0], x2: x[1], t, det: area });
            }
            lmin = lmin.min(area);
            for j in 0..3 {
                for a in 0..2 {
                    for b in 0..2 {
                        let s = jet.dx[a][j].abs()
                            + jet.dxx[a][b][j].abs()
                            + jet.dtx[a][j].abs()
                            + jet.dtxx[a][b][j].abs();
                        lmax = lmax.max(s);
                    }
                }
            }
        }
    }
    Ok(NondegeneracyScan { lambda_min_est: lmin, lambda_max_est: lmax })
}
