//! Sparse discretizations of the comparison operator `A`, the pulled-back
//! surface operator `L(t)` and the perturbation parts `B₁ … B₅`.
//!
//! `L(t)` is assembled in flux form with face-averaged coefficients
//! `c^{αβ} = κ̂ √𝒢 g^{αβ}` and a centered cross stencil for the mixed terms.
//! The B-parts are a second, independent assembly: nodal second-order terms
//! plus first-order remainders obtained by splitting every coefficient
//! difference `Δ(κ̂ · √𝒢 · g^{αβ})` with the exact discrete product rule.

use crate::coefficients::Diffusion;
use crate::error::{param, Error, Result};
use crate::geometry::Chart;
use crate::grid::GridSpec;
use crate::sparse::{CsrMatrix, RowAssembler};

/// Number of power iterations for B-part norms.
pub const NORM_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorTag {
    A,
    L,
    B,
    B1,
    B2,
    B3,
    B4,
    B5,
}

/// A sparse operator on the interior unknowns of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub tag: OperatorTag,
    /// Assembly time for time-dependent operators.
    pub time: Option<f64>,
    pub matrix: CsrMatrix,
}

impl OperatorMatrix {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(v)
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `self − other`, retagged.
    pub fn minus(&self, other: &OperatorMatrix, tag: OperatorTag) -> OperatorMatrix {
        OperatorMatrix { tag, time: self.time.or(other.time), matrix: self.matrix.sub(&other.matrix) }
    }
}

/// Standard 5-point `−(λ₁∂₁² + λ₂∂₂²)` with homogeneous Dirichlet rows eliminated.
pub fn assemble_a(grid: &GridSpec, lambda1: f64, lambda2: f64) -> Result<OperatorMatrix> {
    if !(lambda1 > 0.0 && lambda2 > 0.0) || !lambda1.is_finite() || !lambda2.is_finite() {
        return param(format!("comparison operator needs positive coefficients, got ({lambda1}, {lambda2})"));
    }
    let w1 = lambda1 / (grid.h1 * grid.h1);
    let w2 = lambda2 / (grid.h2 * grid.h2);
    let mut asm = RowAssembler::new(grid.len(), 5 * grid.len());
    for j in 0..grid.n2 {
        for i in 0..grid.n1 {
            if j > 0 {
                asm.add(grid.index(i, j - 1), -w2);
            }
            if i > 0 {
                asm.add(grid.index(i - 1, j), -w1);
            }
            asm.add(grid.index(i, j), 2.0 * w1 + 2.0 * w2);
            if i + 1 < grid.n1 {
                asm.add(grid.index(i + 1, j), -w1);
            }
            if j + 1 < grid.n2 {
                asm.add(grid.index(i, j + 1), -w2);
            }
            asm.finish_row();
        }
    }
    Ok(OperatorMatrix { tag: OperatorTag::A, time: None, matrix: asm.build() })
}

/// Coefficient data at one grid node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeCoefficients {
    pub kappa: f64,
    pub sqrt_det: f64,
    /// `(g^{11}, g^{12}, g^{22})`
    pub ginv: [f64; 3],
    /// `(1/2𝒢) d𝒢/dt`
    pub dilation: f64,
}

impl NodeCoefficients {
    /// `c^{αβ} = κ̂ √𝒢 g^{αβ}` for component `comp ∈ {0: 11, 1: 12, 2: 22}`.
    #[inline]
    pub fn flux(&self, comp: usize) -> f64 {
        self.kappa * self.sqrt_det * self.ginv[comp]
    }
}

/// Coefficients at every node of the closed grid (extended indexing).
pub fn nodal_coefficients(chart: &Chart, kappa: &Diffusion, grid: &GridSpec, t: f64) -> Result<Vec<NodeCoefficients>> {
    let (e1, e2) = grid.ext_dims();
    let mut out = Vec::with_capacity(e1 * e2);
    for q in 0..e2 {
        for p in 0..e1 {
            let x = grid.ext_node(p, q);
            let m = chart.metric(x, t)?;
            let k = kappa.value(x, t)?;
            out.push(NodeCoefficients {
                kappa: k,
                sqrt_det: m.sqrt_det,
                ginv: [m.ginv[0][0], m.ginv[0][1], m.ginv[1][1]],
                dilation: m.dilation(),
            });
        }
    }
    Ok(out)
}

struct Stencil<'a> {
    grid: &'a GridSpec,
}

impl Stencil<'_> {
    /// Adds `val` at extended column `(p, q)` unless it is a boundary node.
    #[inline]
    fn add(&self, asm: &mut RowAssembler, p: usize, q: usize, val: f64) {
        if let Some(k) = self.grid.interior_of_ext(p, q) {
            asm.add(k, val);
        }
    }
}

/// Flux-form assembly of `L(t)`.
pub fn assemble_l(chart: &Chart, kappa: &Diffusion, grid: &GridSpec, t: f64) -> Result<OperatorMatrix> {
    let coef = nodal_coefficients(chart, kappa, grid, t)?;
    Ok(assemble_l_from(grid, &coef, t))
}

pub(crate) fn assemble_l_from(grid: &GridSpec, coef: &[NodeCoefficients], t: f64) -> OperatorMatrix {
    let st = Stencil { grid };
    let c = |p: usize, q: usize| &coef[grid.ext_index(p, q)];
    let (ih1, ih2) = (1.0 / (grid.h1 * grid.h1), 1.0 / (grid.h2 * grid.h2));
    let ihx = 1.0 / (4.0 * grid.h1 * grid.h2);
    let mut asm = RowAssembler::new(grid.len(), 9 * grid.len());
    for q in 1..=grid.n2 {
        for p in 1..=grid.n1 {
            let node = c(p, q);
            let w = -1.0 / node.sqrt_det;
            // ∂₁(c¹¹ ∂₁ f) and ∂₂(c²² ∂₂ f) with face means
            let ce = 0.5 * (node.flux(0) + c(p + 1, q).flux(0));
            let cw = 0.5 * (node.flux(0) + c(p - 1, q).flux(0));
            let cn = 0.5 * (node.flux(2) + c(p, q + 1).flux(2));
            let cs = 0.5 * (node.flux(2) + c(p, q - 1).flux(2));
            st.add(&mut asm, p + 1, q, w * ce * ih1);
            st.add(&mut asm, p - 1, q, w * cw * ih1);
            st.add(&mut asm, p, q + 1, w * cn * ih2);
            st.add(&mut asm, p, q - 1, w * cs * ih2);
            st.add(&mut asm, p, q, -w * ((ce + cw) * ih1 + (cn + cs) * ih2) + node.dilation);
            // ∂₁(c¹² ∂₂ f): centered cross differences of the flux
            let (c12e, c12w) = (c(p + 1, q).flux(1), c(p - 1, q).flux(1));
            st.add(&mut asm, p + 1, q + 1, w * c12e * ihx);
            st.add(&mut asm, p + 1, q - 1, -w * c12e * ihx);
            st.add(&mut asm, p - 1, q + 1, -w * c12w * ihx);
            st.add(&mut asm, p - 1, q - 1, w * c12w * ihx);
            // ∂₂(c²¹ ∂₁ f)
            let (c12n, c12s) = (c(p, q + 1).flux(1), c(p, q - 1).flux(1));
            st.add(&mut asm, p + 1, q + 1, w * c12n * ihx);
            st.add(&mut asm, p - 1, q + 1, -w * c12n * ihx);
            st.add(&mut asm, p + 1, q - 1, -w * c12s * ihx);
            st.add(&mut asm, p - 1, q - 1, w * c12s * ihx);
            asm.finish_row();
        }
    }
    OperatorMatrix { tag: OperatorTag::L, time: Some(t), matrix: asm.build() }
}

/// The five perturbation parts at one time and their operator norms.
#[derive(Debug, Clone, PartialEq)]
pub struct BParts {
    pub parts: [OperatorMatrix; 5],
    /// Induced discrete L²→L² norms (power iteration).
    pub norms: [f64; 5],
}

impl BParts {
    pub fn sum(&self) -> OperatorMatrix {
        let mut m = self.parts[0].matrix.clone();
        for p in &self.parts[1..] {
            m = m.add(&p.matrix);
        }
        OperatorMatrix { tag: OperatorTag::B, time: self.parts[0].time, matrix: m }
    }
}

/// Splits `Δ(κ s q)` along an edge `a → b` into `(Δs, Δq, Δκ)` contributions
/// so that their sum is exactly `c_b − c_a`.
fn split_difference(a: &NodeCoefficients, b: &NodeCoefficients, comp: usize) -> [f64; 3] {
    let (ka, kb) = (a.kappa, b.kappa);
    let (sa, sb) = (a.sqrt_det, b.sqrt_det);
    let (qa, qb) = (a.ginv[comp], b.ginv[comp]);
    let kbar = 0.5 * (ka + kb);
    let d_kappa = (kb - ka) * 0.5 * (sa * qa + sb * qb);
    let d_sqrt = kbar * (sb - sa) * 0.5 * (qa + qb);
    let d_ginv = kbar * 0.5 * (sa + sb) * (qb - qa);
    [d_sqrt, d_ginv, d_kappa]
}

/// Assembles `B₁ … B₅` with `Σ Bᵢ = L(t) − A(λ₁, λ₂)` up to rounding.
///
/// `B₁` carries the nodal second-order remainder, `B₂` the √𝒢-gradient terms,
/// `B₃` the metric-gradient terms, `B₄` the κ̂-gradient terms and `B₅` the
/// zeroth-order dilation.
pub fn assemble_b_parts(
    chart: &Chart,
    kappa: &Diffusion,
    grid: &GridSpec,
    lambda1: f64,
    lambda2: f64,
    t: f64,
) -> Result<BParts> {
    if !(lambda1 > 0.0 && lambda2 > 0.0) {
        return param(format!("comparison operator needs positive coefficients, got ({lambda1}, {lambda2})"));
    }
    let coef = nodal_coefficients(chart, kappa, grid, t)?;
    Ok(b_parts_from(grid, &coef, lambda1, lambda2, t))
}

pub(crate) fn b_parts_from(grid: &GridSpec, coef: &[NodeCoefficients], lambda1: f64, lambda2: f64, t: f64) -> BParts {
    let st = Stencil { grid };
    let c = |p: usize, q: usize| &coef[grid.ext_index(p, q)];
    let (ih1, ih2) = (1.0 / (grid.h1 * grid.h1), 1.0 / (grid.h2 * grid.h2));
    let ihx = 1.0 / (4.0 * grid.h1 * grid.h2);
    let n = grid.len();
    let mut asms: Vec<RowAssembler> = (0..5).map(|_| RowAssembler::new(n, 9 * n)).collect();

    for q in 1..=grid.n2 {
        for p in 1..=grid.n1 {
            let node = c(p, q);
            let inv_s = 1.0 / node.sqrt_det;

            // B₁: −(κ̂g¹¹ − λ₁)∂₁² − (κ̂g²² − λ₂)∂₂² − 2κ̂g¹²∂₁∂₂ with nodal coefficients
            let a11 = node.flux(0) * inv_s - lambda1;
            let a22 = node.flux(2) * inv_s - lambda2;
            let a12 = node.flux(1) * inv_s;
            let b1 = &mut asms[0];
            st.add(b1, p + 1, q, -a11 * ih1);
            st.add(b1, p - 1, q, -a11 * ih1);
            st.add(b1, p, q + 1, -a22 * ih2);
            st.add(b1, p, q - 1, -a22 * ih2);
            st.add(b1, p, q, 2.0 * a11 * ih1 + 2.0 * a22 * ih2);
            let m = -2.0 * a12 * ihx;
            st.add(b1, p + 1, q + 1, m);
            st.add(b1, p - 1, q - 1, m);
            st.add(b1, p + 1, q - 1, -m);
            st.add(b1, p - 1, q + 1, -m);

            // B₅
            st.add(&mut asms[4], p, q, node.dilation);

            // First-order remainders, edge by edge: weight · Δc · (stencil on f)
            let mut edge = |a: (usize, usize), b: (usize, usize), comp: usize, weight: f64, f: &[(usize, usize, f64)]| {
                let parts = split_difference(c(a.0, a.1), c(b.0, b.1), comp);
                for (k, d) in parts.iter().enumerate() {
                    let asm = &mut asms[1 + k];
                    for &(fp, fq, fc) in f {
                        st.add(asm, fp, fq, -inv_s * weight * d * fc);
                    }
                }
            };
            let (e, w, nn, s) = ((p + 1, q), (p - 1, q), (p, q + 1), (p, q - 1));
            // ∂₁(c¹¹∂₁f): [(c_E − c_P)(f_E − f_P) + (c_P − c_W)(f_P − f_W)] / 2h₁²
            edge((p, q), e, 0, 0.5 * ih1, &[(p + 1, q, 1.0), (p, q, -1.0)]);
            edge(w, (p, q), 0, 0.5 * ih1, &[(p, q, 1.0), (p - 1, q, -1.0)]);
            // ∂₂(c²²∂₂f)
            edge((p, q), nn, 2, 0.5 * ih2, &[(p, q + 1, 1.0), (p, q, -1.0)]);
            edge(s, (p, q), 2, 0.5 * ih2, &[(p, q, 1.0), (p, q - 1, -1.0)]);
            // ∂₁(c¹²∂₂f): [(c_E − c_P)(f_NE − f_SE) + (c_P − c_W)(f_NW − f_SW)] / 4h₁h₂
            edge((p, q), e, 1, ihx, &[(p + 1, q + 1, 1.0), (p + 1, q - 1, -1.0)]);
            edge(w, (p, q), 1, ihx, &[(p - 1, q + 1, 1.0), (p - 1, q - 1, -1.0)]);
            // ∂₂(c²¹∂₁f): [(c_N − c_P)(f_NE − f_NW) + (c_P − c_S)(f_SE − f_SW)] / 4h₁h₂
            edge((p, q), nn, 1, ihx, &[(p + 1, q + 1, 1.0), (p - 1, q + 1, -1.0)]);
            edge(s, (p, q), 1, ihx, &[(p + 1, q - 1, 1.0), (p - 1, q - 1, -1.0)]);

            asms.iter_mut().for_each(RowAssembler::finish_row);
        }
    }
    let tags = [OperatorTag::B1, OperatorTag::B2, OperatorTag::B3, OperatorTag::B4, OperatorTag::B5];
    let mut parts: Vec<OperatorMatrix> = asms
        .into_iter()
        .zip(tags)
        .map(|(a, tag)| OperatorMatrix { tag, time: Some(t), matrix: a.build() })
        .collect();
    let norms = std::array::from_fn(|k| parts[k].matrix.operator_norm(NORM_ITERATIONS));
    let parts: [OperatorMatrix; 5] = std::array::from_fn(|_| parts.remove(0));
    BParts { parts, norms }
}

/// Discrete norms of a grid function with zero Dirichlet extension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferenceNorms {
    pub l2: f64,
    /// `‖∂₁f‖²` and `‖∂₂f‖²` from forward differences over every face.
    pub grad_sq: [f64; 2],
    /// `‖∂₁²f‖`, `‖∂₁∂₂f‖` and `‖∂₂²f‖` squared; the mixed part is the forward
    /// cross difference over every cell.
    pub hess_sq: [f64; 3],
}

impl DifferenceNorms {
    pub fn grad(&self) -> f64 {
        (self.grad_sq[0] + self.grad_sq[1]).sqrt()
    }

    /// Frobenius norm `(‖f₁₁‖² + 2‖f₁₂‖² + ‖f₂₂‖²)^{1/2}`.
    pub fn hess(&self) -> f64 {
        (self.hess_sq[0] + 2.0 * self.hess_sq[1] + self.hess_sq[2]).sqrt()
    }
}

pub fn difference_norms(grid: &GridSpec, v: &[f64]) -> Result<DifferenceNorms> {
    check_len(grid, v)?;
    let (h1, h2) = (grid.h1, grid.h2);
    let w = h1 * h2;
    let f = |p: usize, q: usize| grid.ext_value(v, p, q);
    let mut g1 = 0.0;
    let mut g2 = 0.0;
    let mut mixed = 0.0;
    for q in 0..=grid.n2 + 1 {
        for p in 0..=grid.n1 {
            let d = (f(p + 1, q) - f(p, q)) / h1;
            g1 += d * d;
        }
    }
    for q in 0..=grid.n2 {
        for p in 0..=grid.n1 + 1 {
            let d = (f(p, q + 1) - f(p, q)) / h2;
            g2 += d * d;
        }
        for p in 0..=grid.n1 {
            let d = (f(p + 1, q + 1) - f(p, q + 1) - f(p + 1, q) + f(p, q)) / (h1 * h2);
            mixed += d * d;
        }
    }
    let mut d11 = 0.0;
    let mut d22 = 0.0;
    for q in 1..=grid.n2 {
        for p in 1..=grid.n1 {
            let a = (f(p + 1, q) - 2.0 * f(p, q) + f(p - 1, q)) / (h1 * h1);
            let b = (f(p, q + 1) - 2.0 * f(p, q) + f(p, q - 1)) / (h2 * h2);
            d11 += a * a;
            d22 += b * b;
        }
    }
    Ok(DifferenceNorms {
        l2: grid.l2_norm(v),
        grad_sq: [g1 * w, g2 * w],
        hess_sq: [d11 * w, mixed * w, d22 * w],
    })
}

pub(crate) fn check_len(grid: &GridSpec, v: &[f64]) -> Result<()> {
    if v.len() != grid.len() {
        return Err(Error::Shape { expected: grid.len(), actual: v.len() });
    }
    Ok(())
}

/// `‖A^{1/2} f‖ = (λ₁‖∂₁f‖² + λ₂‖∂₂f‖²)^{1/2}` with one-sided differences.
pub fn half_power_norm(field: &[f64], grid: &GridSpec, lambda1: f64, lambda2: f64) -> Result<f64> {
    let d = difference_norms(grid, field)?;
    Ok((lambda1 * d.grad_sq[0] + lambda2 * d.grad_sq[1]).sqrt())
}

/// Residuals of the discrete comparison operator on two closed-form solutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnisotropicResiduals {
    /// max over interior nodes of `|A_h ℰ|`, `ℰ = ½ log(λ₂X₁² + λ₁X₂²)`
    pub fundsol_residual: f64,
    /// max residual of one Crank–Nicolson step of `∂_tΦ + AΦ = 0` on the
    /// rescaled heat solution `Φ(X, t) = φ(X₁/√λ₁, X₂/√λ₂, t)`
    pub scaled_heat_residual: f64,
}

/// Start time of the scaled heat check; its step is `dt = min(h₁, h₂) / 4`.
pub const HEAT_CHECK_TIME: f64 = 0.05;

pub fn verify_anisotropic_identities(grid: &GridSpec, lambda1: f64, lambda2: f64) -> Result<AnisotropicResiduals> {
    if !(lambda1 > 0.0 && lambda2 > 0.0) {
        return param(format!("comparison operator needs positive coefficients, got ({lambda1}, {lambda2})"));
    }
    if grid.domain.contains_point([0.0, 0.0]) {
        return param("fundamental-solution check needs a domain away from the origin");
    }
    let apply_a = |u: &dyn Fn([f64; 2]) -> f64, p: usize, q: usize| {
        let c = u(grid.ext_node(p, q));
        let d1 = (u(grid.ext_node(p + 1, q)) - 2.0 * c + u(grid.ext_node(p - 1, q))) / (grid.h1 * grid.h1);
        let d2 = (u(grid.ext_node(p, q + 1)) - 2.0 * c + u(grid.ext_node(p, q - 1))) / (grid.h2 * grid.h2);
        -(lambda1 * d1 + lambda2 * d2)
    };
    let e = |x: [f64; 2]| 0.5 * (lambda2 * x[0] * x[0] + lambda1 * x[1] * x[1]).ln();
    let pi = std::f64::consts::PI;
    let phi = |x: [f64; 2], t: f64| {
        (-2.0 * pi * pi * t).exp() * (pi * x[0] / lambda1.sqrt()).sin() * (pi * x[1] / lambda2.sqrt()).sin()
    };
    let dt = 0.25 * grid.h1.min(grid.h2);
    let t0 = HEAT_CHECK_TIME;
    let now = |x: [f64; 2]| phi(x, t0);
    let next = |x: [f64; 2]| phi(x, t0 + dt);

    let mut fund = 0.0_f64;
    let mut heat = 0.0_f64;
    for q in 1..=grid.n2 {
        for p in 1..=grid.n1 {
            fund = fund.max(apply_a(&e, p, q).abs());
            let x = grid.ext_node(p, q);
            let r = (next(x) - now(x)) / dt + 0.5 * (apply_a(&next, p, q) + apply_a(&now, p, q));
            heat = heat.max(r.abs());
        }
    }
    Ok(AnisotropicResiduals { fundsol_residual: fund, scaled_heat_residual: heat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Preset;
    use crate::grid::Rect;
    use approx::assert_relative_eq;

    fn chart(p: Preset) -> Chart {
        Chart::preset(p, Rect::unit(), 10.0).unwrap()
    }

    #[test]
    fn five_point_stencil_values() {
        let g = GridSpec::unit_square(3).unwrap();
        let a = assemble_a(&g, 1.0, 1.0).unwrap();
        let c = g.index(1, 1);
        assert_eq!(a.matrix.get(c, c), 64.0);
        for nb in [g.index(0, 1), g.index(2, 1), g.index(1, 0), g.index(1, 2)] {
            assert_eq!(a.matrix.get(c, nb), -16.0);
        }
        assert_eq!(a.matrix.row_len(c), 5);
        assert_eq!(a.matrix.asymmetry(), 0.0);
        assert!(assemble_a(&g, 0.0, 1.0).is_err());
    }

    #[test]
    fn quadratic_form_matches_half_power_norm() {
        let g = GridSpec::new(Rect::unit(), 9, 6).unwrap();
        let (l1, l2) = (0.7, 2.3);
        let a = assemble_a(&g, l1, l2).unwrap();
        let f: Vec<f64> = (0..g.len()).map(|k| ((k * 37 % 11) as f64 - 5.0) / 3.0).collect();
        let lhs = g.l2_dot(&a.apply(&f), &f);
        let rhs = half_power_norm(&f, &g, l1, l2).unwrap().powi(2);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }

    #[test]
    fn half_power_norm_of_eigenfunction() {
        assert_eq!(half_power_norm(&vec![0.0; 64], &GridSpec::unit_square(8).unwrap(), 1.0, 1.0).unwrap(), 0.0);
        let pi = std::f64::consts::PI;
        let g = GridSpec::unit_square(255).unwrap();
        let f = g.sample(|x| (pi * x[0]).sin() * (pi * x[1]).sin());
        let v = half_power_norm(&f, &g, 1.0, 1.0).unwrap();
        assert_relative_eq!(v, pi / 2f64.sqrt(), max_relative = 1e-4);
        let v2 = half_power_norm(&f, &g, 2.0, 2.0).unwrap();
        assert_relative_eq!(v2, 2f64.sqrt() * v, max_relative = 1e-14);
        assert!(half_power_norm(&f[1..], &g, 1.0, 1.0).is_err());
    }

    #[test]
    fn hessian_norm_identity_for_dirichlet_fields() {
        // ‖f₁₁‖² + 2‖f₁₂‖² + ‖f₂₂‖² = ‖Δ_h f‖² by summation by parts
        let g = GridSpec::new(Rect::unit(), 7, 5).unwrap();
        let f: Vec<f64> = (0..g.len()).map(|k| ((k * 13 % 7) as f64).sin()).collect();
        let d = difference_norms(&g, &f).unwrap();
        let lap = assemble_a(&g, 1.0, 1.0).unwrap().apply(&f);
        assert_relative_eq!(d.hess(), g.l2_norm(&lap), max_relative = 1e-12);
    }

    #[test]
    fn flat_l_equals_a() {
        let g = GridSpec::unit_square(6).unwrap();
        let l = assemble_l(&chart(Preset::FlatStatic), &Diffusion::constant(1.0), &g, 0.3).unwrap();
        let a = assemble_a(&g, 1.0, 1.0).unwrap();
        assert_eq!(l.matrix.max_abs_diff(&a.matrix), 0.0);
    }

    #[test]
    fn scaling_chart_reduces_to_shifted_a() {
        let g = GridSpec::unit_square(6).unwrap();
        let a = assemble_a(&g, 1.0, 1.0).unwrap();
        for t in [0.0, 0.5, 1.0] {
            let l = assemble_l(&chart(Preset::IsotropicScaling { gamma: 1.0 }), &Diffusion::constant(1.0), &g, t).unwrap();
            let expect = a.matrix.linear_combination((-2.0 * t).exp(), &CsrMatrix::identity(g.len()), 2.0);
            assert!(l.matrix.max_abs_diff(&expect) < 1e-10);
        }
    }

    #[test]
    fn b_parts_vanish_on_flat_chart() {
        let g = GridSpec::unit_square(5).unwrap();
        let b = assemble_b_parts(&chart(Preset::FlatStatic), &Diffusion::constant(1.0), &g, 1.0, 1.0, 0.2).unwrap();
        for (p, nrm) in b.parts.iter().zip(b.norms) {
            assert_eq!(p.matrix.max_abs(), 0.0);
            assert_eq!(nrm, 0.0);
        }
    }

    #[test]
    fn b_parts_on_scaling_chart() {
        let g = GridSpec::unit_square(5).unwrap();
        let t0: f64 = 0.4;
        let lam = (-2.0 * t0).exp();
        let b = assemble_b_parts(&chart(Preset::IsotropicScaling { gamma: 1.0 }), &Diffusion::constant(1.0), &g, lam, lam, t0)
            .unwrap();
        assert!(b.parts[0].matrix.max_abs() < 1e-9);
        assert!(b.parts[4].matrix.max_abs_diff(&CsrMatrix::diagonal(&vec![2.0; g.len()])) < 1e-12);
        assert_relative_eq!(b.norms[4], 2.0, max_relative = 1e-10);
    }

    #[test]
    fn b_parts_sum_to_l_minus_a() {
        let g = GridSpec::unit_square(9).unwrap();
        let k = Diffusion::bump(1.0, 0.3);
        let c = chart(Preset::GraphOscillation { epsilon: 0.2, omega: 1.0 });
        let (l1, l2) = (0.8, 0.9);
        let a = assemble_a(&g, l1, l2).unwrap();
        for t in [0.3, 1.1] {
            let b = assemble_b_parts(&c, &k, &g, l1, l2, t).unwrap();
            let l = assemble_l(&c, &k, &g, t).unwrap();
            let diff = b.sum().matrix.max_abs_diff(&l.minus(&a, OperatorTag::B).matrix);
            assert!(diff < 1e-10, "{diff}");
            assert!(b.parts[3].matrix.max_abs() > 0.0, "κ̂-gradient part must be active");
        }
    }

    #[test]
    fn row_pattern_fits_nine_point_stencil() {
        let g = GridSpec::unit_square(6).unwrap();
        let l = assemble_l(&chart(Preset::GraphOscillation { epsilon: 0.2, omega: 1.0 }), &Diffusion::constant(1.0), &g, 0.7)
            .unwrap();
        assert!((0..g.len()).all(|i| l.matrix.row_len(i) <= 9));
        assert_eq!(l.matrix.row_len(g.index(2, 2)), 9);
    }

    #[test]
    fn fundamental_solution_needs_domain_off_origin() {
        let g = GridSpec::unit_square(4).unwrap();
        assert!(verify_anisotropic_identities(&g, 1.0, 1.0).is_err());
        let g = GridSpec::new(Rect::new(1.0, 2.0, 1.0, 2.0).unwrap(), 8, 8).unwrap();
        let r = verify_anisotropic_identities(&g, 1.0, 1.0).unwrap();
        assert!(r.fundsol_residual < 1e-2 && r.scaled_heat_residual < 5.0, "{r:?}");
    }
}
