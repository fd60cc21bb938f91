//! Uniform tensor grids over an axis-aligned parameter rectangle.
//!
//! Unknowns live on interior nodes only; Dirichlet nodes on the boundary are
//! eliminated. Interior nodes are numbered row-major with the first axis
//! running fastest.

use crate::error::{param, Result};

/// The parameter rectangle `U = (x_min, x_max) × (y_min, y_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let finite = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite());
        if !finite || x_max <= x_min || y_max <= y_min {
            return param(format!(
                "domain ({x_min}, {x_max}) x ({y_min}, {y_max}) is not a proper rectangle"
            ));
        }
        Ok(Self { x_min, x_max, y_min, y_max })
    }

    pub fn unit() -> Self {
        Self { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Characteristic length used to scale finite-difference steps.
    pub fn scale(&self) -> f64 {
        self.width().max(self.height())
    }

    /// Membership in the closed rectangle, with a relative slack of `1e-12`.
    pub fn contains_closed(&self, x: [f64; 2]) -> bool {
        let tol = 1e-12 * self.scale();
        x[0] >= self.x_min - tol
            && x[0] <= self.x_max + tol
            && x[1] >= self.y_min - tol
            && x[1] <= self.y_max + tol
    }

    pub fn contains_point(&self, x: [f64; 2]) -> bool {
        x[0] >= self.x_min && x[0] <= self.x_max && x[1] >= self.y_min && x[1] <= self.y_max
    }
}

/// A uniform grid with `n1 × n2` interior nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub domain: Rect,
    pub n1: usize,
    pub n2: usize,
    pub h1: f64,
    pub h2: f64,
}

impl GridSpec {
    pub fn new(domain: Rect, n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return param("grid needs at least one interior node per axis");
        }
        Ok(Self {
            domain,
            n1,
            n2,
            h1: domain.width() / (n1 + 1) as f64,
            h2: domain.height() / (n2 + 1) as f64,
        })
    }

    /// Unit square with `n` interior nodes per axis.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(Rect::unit(), n, n)
    }

    /// Number of interior unknowns.
    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Interior index of interior node `(i, j)`, both zero-based.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n1 + i
    }

    /// Inverse of [`GridSpec::index`].
    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.n1, k / self.n1)
    }

    /// Parameter point of interior node `(i, j)`.
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        self.ext_node(i + 1, j + 1)
    }

    /// Extended indexing including boundary nodes: `p ∈ 0..=n1+1`, `q ∈ 0..=n2+1`.
    #[inline]
    pub fn ext_node(&self, p: usize, q: usize) -> [f64; 2] {
        [
            self.domain.x_min + p as f64 * self.h1,
            self.domain.y_min + q as f64 * self.h2,
        ]
    }

    pub fn ext_dims(&self) -> (usize, usize) {
        (self.n1 + 2, self.n2 + 2)
    }

    #[inline]
    pub fn ext_index(&self, p: usize, q: usize) -> usize {
        q * (self.n1 + 2) + p
    }

    /// Interior index of an extended node, or `None` on the boundary.
    #[inline]
    pub fn interior_of_ext(&self, p: usize, q: usize) -> Option<usize> {
        if p == 0 || q == 0 || p > self.n1 || q > self.n2 {
            None
        } else {
            Some(self.index(p - 1, q - 1))
        }
    }

    /// Every grid node including the boundary, in extended row-major order.
    pub fn closure_nodes(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        let (e1, e2) = self.ext_dims();
        (0..e2).flat_map(move |q| (0..e1).map(move |p| self.ext_node(p, q)))
    }

    /// Samples a function at the interior nodes.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.n2 {
            for i in 0..self.n1 {
                out.push(f(self.node(i, j)));
            }
        }
        out
    }

    /// Same grid with both interior counts refined as `n -> 2n + 1` (mesh width halved).
    pub fn refined(&self) -> Self {
        Self::new(self.domain, 2 * self.n1 + 1, 2 * self.n2 + 1).expect("refinement keeps a valid grid")
    }

    /// Discrete L² norm over `U` (zero boundary values, trapezoid weights).
    pub fn l2_norm(&self, v: &[f64]) -> f64 {
        self.l2_dot(v, v).sqrt()
    }

    pub fn l2_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * self.h1 * self.h2
    }

    /// Interior value with zero Dirichlet extension, extended indices.
    #[inline]
    pub fn ext_value(&self, v: &[f64], p: usize, q: usize) -> f64 {
        self.interior_of_ext(p, q).map_or(0.0, |k| v[k])
    }

    /// The lowest discrete Dirichlet eigenvector `sin(π ξ₁) sin(π ξ₂)` (unit
    /// L²-normalised) and its eigenvalue for `−(λ₁∂₁² + λ₂∂₂²)`.
    pub fn lowest_mode(&self, lambda1: f64, lambda2: f64) -> (Vec<f64>, f64) {
        let (w, h) = (self.domain.width(), self.domain.height());
        let mut v = Vec::with_capacity(self.len());
        for j in 0..self.n2 {
            for i in 0..self.n1 {
                let s1 = (std::f64::consts::PI * (i + 1) as f64 * self.h1 / w).sin();
                let s2 = (std::f64::consts::PI * (j + 1) as f64 * self.h2 / h).sin();
                v.push(s1 * s2);
            }
        }
        let norm = self.l2_norm(&v);
        v.iter_mut().for_each(|x| *x /= norm);
        (v, self.lowest_eigenvalue(lambda1, lambda2))
    }

    /// Smallest eigenvalue of the discrete 5-point operator `−(λ₁∂₁² + λ₂∂₂²)`.
    pub fn lowest_eigenvalue(&self, lambda1: f64, lambda2: f64) -> f64 {
        let half = std::f64::consts::FRAC_PI_2;
        let s1 = (half * self.h1 / self.domain.width()).sin();
        let s2 = (half * self.h2 / self.domain.height()).sin();
        4.0 * lambda1 * s1 * s1 / (self.h1 * self.h1) + 4.0 * lambda2 * s2 * s2 / (self.h2 * self.h2)
    }
}

/// `count` evenly spaced times covering `[t0, t1]` inclusive.
pub fn linspace(t0: f64, t1: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![t0],
        _ => (0..count)
            .map(|k| t0 + (t1 - t0) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_widths_follow_interior_counts() {
        let g = GridSpec::new(Rect::new(0.0, 2.0, 1.0, 2.0).unwrap(), 3, 4).unwrap();
        assert_eq!(g.h1, 0.5);
        assert_eq!(g.h2, 0.2);
        assert_eq!(g.len(), 12);
        assert_eq!(g.coords(g.index(2, 3)), (2, 3));
        assert_eq!(g.interior_of_ext(0, 2), None);
        assert_eq!(g.interior_of_ext(1, 1), Some(0));
    }

    #[test]
    fn bad_rectangles_are_rejected() {
        assert!(Rect::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(Rect::new(0.0, f64::NAN, 0.0, 1.0).is_err());
        assert!(GridSpec::new(Rect::unit(), 0, 3).is_err());
    }

    #[test]
    fn lowest_eigenvalue_approaches_two_pi_squared() {
        let g = GridSpec::unit_square(255).unwrap();
        let mu = g.lowest_eigenvalue(1.0, 1.0);
        let exact = 2.0 * std::f64::consts::PI.powi(2);
        assert!((mu - exact).abs() / exact < 1e-4);
    }

    #[test]
    fn linspace_hits_endpoints() {
        let t = linspace(0.0, 1.0, 5);
        assert_eq!(t, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(linspace(0.0, 1.0, 0).is_empty());
    }
}
