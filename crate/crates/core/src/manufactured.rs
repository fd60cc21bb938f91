//! Closed-form solution fields and the continuous operator applied to them.

use std::f64::consts::PI;

use crate::coefficients::Diffusion;
use crate::error::Result;
use crate::geometry::Chart;
use crate::grid::{GridSpec, Rect};

/// A smooth pulled-back field `û(X, t)` with its partials.
pub trait ExactSolution: Send + Sync {
    fn value(&self, x: [f64; 2], t: f64) -> f64;
    fn time_derivative(&self, x: [f64; 2], t: f64) -> f64;
    fn gradient(&self, x: [f64; 2], t: f64) -> [f64; 2];
    fn hessian(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2];
}

/// `a · e^{−rt} · sin(πξ₁) sin(πξ₂)` with `ξ` the rectangle coordinates
/// rescaled to the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparableMode {
    pub domain: Rect,
    pub amplitude: f64,
    pub rate: f64,
}

impl SeparableMode {
    pub fn new(domain: Rect, amplitude: f64, rate: f64) -> Self {
        SeparableMode { domain, amplitude, rate }
    }

    /// `e^{−rt} sin(πX₁) sin(πX₂)` on the unit square.
    pub fn unit(rate: f64) -> Self {
        SeparableMode::new(Rect::unit(), 1.0, rate)
    }

    fn parts(&self, x: [f64; 2], t: f64) -> (f64, [f64; 2], [(f64, f64); 2]) {
        let k = [PI / self.domain.width(), PI / self.domain.height()];
        let a = [k[0] * (x[0] - self.domain.x_min), k[1] * (x[1] - self.domain.y_min)];
        let amp = self.amplitude * (-self.rate * t).exp();
        (amp, k, [a[0].sin_cos(), a[1].sin_cos()])
    }
}

impl ExactSolution for SeparableMode {
    fn value(&self, x: [f64; 2], t: f64) -> f64 {
        let (amp, _, [(s1, _), (s2, _)]) = self.parts(x, t);
        amp * s1 * s2
    }

    fn time_derivative(&self, x: [f64; 2], t: f64) -> f64 {
        -self.rate * self.value(x, t)
    }

    fn gradient(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let (amp, k, [(s1, c1), (s2, c2)]) = self.parts(x, t);
        [amp * k[0] * c1 * s2, amp * k[1] * s1 * c2]
    }

    fn hessian(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        let (amp, k, [(s1, c1), (s2, c2)]) = self.parts(x, t);
        let d12 = amp * k[0] * k[1] * c1 * c2;
        [[-amp * k[0] * k[0] * s1 * s2, d12], [d12, -amp * k[1] * k[1] * s1 * s2]]
    }
}

/// The pulled-back operator in non-divergence form,
/// `Lû = −κ̂ g^{αβ} ∂_αβ û − (1/√𝒢) ∂_α(κ̂ √𝒢 g^{αβ}) ∂_β û + (1/2𝒢)(d𝒢/dt) û`.
pub fn apply_continuous_l(chart: &Chart, kappa: &Diffusion, sol: &dyn ExactSolution, x: [f64; 2], t: f64) -> Result<f64> {
    let m = chart.metric(x, t)?;
    let kj = kappa.jet(x, t)?;
    let grad = sol.gradient(x, t);
    let hess = sol.hessian(x, t);
    let dq = [m.dginv(0), m.dginv(1)];
    let mut out = m.dilation() * sol.value(x, t);
    for a in 0..2 {
        let dlog_s = 0.5 * m.ddet[a] / m.det;
        for b in 0..2 {
            out -= kj.value * m.ginv[a][b] * hess[a][b];
            let coeff = kj.dx[a] * m.ginv[a][b] + kj.value * dlog_s * m.ginv[a][b] + kj.value * dq[a][a][b];
            out -= coeff * grad[b];
        }
    }
    Ok(out)
}

/// Largest `|û|` over the boundary nodes of the grid at the listed times.
pub fn boundary_defect(sol: &dyn ExactSolution, grid: &GridSpec, times: &[f64]) -> f64 {
    let (e1, e2) = grid.ext_dims();
    let mut worst = 0.0_f64;
    for &t in times {
        for q in 0..e2 {
            for p in 0..e1 {
                if grid.interior_of_ext(p, q).is_none() {
                    worst = worst.max(sol.value(grid.ext_node(p, q), t).abs());
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Preset;
    use approx::assert_relative_eq;

    #[test]
    fn separable_partials_match_differences() {
        let s = SeparableMode::new(Rect::new(0.5, 2.0, -1.0, 1.0).unwrap(), 1.3, 0.7);
        let (x, t, h) = ([1.1, 0.2], 0.4, 1e-5);
        let g = s.gradient(x, t);
        assert_relative_eq!(g[0], (s.value([x[0] + h, x[1]], t) - s.value([x[0] - h, x[1]], t)) / (2.0 * h), max_relative = 1e-8);
        let hx = s.hessian(x, t);
        let d = (s.gradient([x[0], x[1] + h], t)[0] - s.gradient([x[0], x[1] - h], t)[0]) / (2.0 * h);
        assert_relative_eq!(hx[0][1], d, max_relative = 1e-8);
        assert_relative_eq!(s.time_derivative(x, t), (s.value(x, t + h) - s.value(x, t - h)) / (2.0 * h), max_relative = 1e-8);
        assert!(boundary_defect(&s, &GridSpec::new(s.domain, 5, 5).unwrap(), &[0.0, 1.0]) < 1e-15);
    }

    #[test]
    fn flat_operator_is_negative_laplacian() {
        let c = Chart::preset(Preset::FlatStatic, Rect::unit(), 1.0).unwrap();
        let s = SeparableMode::unit(0.0);
        let x = [0.3, 0.6];
        let lu = apply_continuous_l(&c, &Diffusion::constant(2.0), &s, x, 0.1).unwrap();
        assert_relative_eq!(lu, 2.0 * 2.0 * PI * PI * s.value(x, 0.1), max_relative = 1e-12);
    }

    #[test]
    fn scaling_operator_reduction() {
        let c = Chart::preset(Preset::IsotropicScaling { gamma: 1.0 }, Rect::unit(), 1.0).unwrap();
        let s = SeparableMode::unit(0.0);
        let (x, t) = ([0.3, 0.6], 0.5);
        let lu = apply_continuous_l(&c, &Diffusion::constant(1.0), &s, x, t).unwrap();
        let expect = ((-2.0 * t).exp() * 2.0 * PI * PI + 2.0) * s.value(x, t);
        assert_relative_eq!(lu, expect, max_relative = 1e-10);
    }
}
