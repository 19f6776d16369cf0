//! The ℤₙ Schwinger–Weyl pair on a single link.
//!
//! A link carries an n-dimensional space with orthonormal basis `|v_k⟩`,
//! `k ∈ ℤₙ`. The comparator `U` cyclically shifts `k → k+1` and `V` is the
//! diagonal clock `e^{-2πik/n}`. Chain operators never materialize these
//! matrices: they act on labels by modular arithmetic. The dense forms exist
//! for checking the group relations.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Electric spectrum of one link for group order `n` and background offset `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkAlgebra {
    n: usize,
    phi: f64,
}

impl LinkAlgebra {
    pub fn new(n: usize, phi: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("group order n = {n} must be ≥ 2")));
        }
        if !phi.is_finite() {
            return Err(Error::InvalidArgument("background field must be finite".into()));
        }
        Ok(Self { n, phi })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Spacing of the physical spectrum, √(2π/n).
    pub fn quantum(&self) -> f64 {
        (2.0 * PI / self.n as f64).sqrt()
    }

    /// Dimensionless eigenvalue Ẽ_k = k − (n−1)/2 + φ.
    #[inline]
    pub fn tilde(&self, k: usize) -> f64 {
        k as f64 - (self.n as f64 - 1.0) / 2.0 + self.phi
    }

    /// Physical eigenvalue e_k = √(2π/n)·Ẽ_k.
    #[inline]
    pub fn field(&self, k: usize) -> f64 {
        self.quantum() * self.tilde(k)
    }

    pub fn tilde_eigenvalues(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.tilde(k)).collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.field(k)).collect()
    }

    /// Label acted on by U.
    #[inline]
    pub fn raise(&self, k: usize) -> usize {
        (k + 1) % self.n
    }

    /// Label acted on by U†.
    #[inline]
    pub fn lower(&self, k: usize) -> usize {
        (k + self.n - 1) % self.n
    }

    /// The label whose Ẽ is closest to zero from below: Ẽ = φ for odd n,
    /// Ẽ = φ − 1/2 for even n.
    pub fn neutral_label(&self) -> usize {
        if self.n % 2 == 1 {
            (self.n - 1) / 2
        } else {
            self.n / 2 - 1
        }
    }
}

/// Ordered electric eigenvalues e_0 < … < e_{n−1}.
pub fn electric_eigenvalues(n: usize, phi: f64) -> Result<Vec<f64>> {
    Ok(LinkAlgebra::new(n, phi)?.eigenvalues())
}

/// Dense matrices of the Weyl pair in the `|v_k⟩` basis.
#[derive(Debug, Clone)]
pub struct WeylPair {
    pub u: DMatrix<Complex64>,
    pub v: DMatrix<Complex64>,
}

/// U is the cyclic shift `U|v_k⟩ = |v_{k+1}⟩`, V the clock `V|v_k⟩ = e^{-2πik/n}|v_k⟩`.
pub fn weyl_pair(n: usize) -> Result<WeylPair> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("group order n = {n} must be ≥ 2")));
    }
    let mut u = DMatrix::zeros(n, n);
    let mut v = DMatrix::zeros(n, n);
    for k in 0..n {
        u[((k + 1) % n, k)] = Complex64::new(1.0, 0.0);
        v[(k, k)] = root_of_unity(n, -(k as i64));
    }
    Ok(WeylPair { u, v })
}

/// e^{2πi·j/n}, reduced mod n before evaluating so equal phases are bit-identical.
pub fn root_of_unity(n: usize, j: i64) -> Complex64 {
    let r = j.rem_euclid(n as i64) as f64;
    Complex64::from_polar(1.0, 2.0 * PI * r / n as f64)
}

impl WeylPair {
    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    /// max |(U^ℓ V^k − e^{2πikℓ/n} V^k U^ℓ)_{ij}|.
    pub fn commutator_defect(&self, l: usize, k: usize) -> f64 {
        let ul = matrix_power(&self.u, l);
        let vk = matrix_power(&self.v, k);
        let phase = root_of_unity(self.n(), (k * l) as i64);
        let diff = &ul * &vk - (&vk * &ul) * phase;
        diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// max deviation of U†U and V†V from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let id = DMatrix::<Complex64>::identity(self.n(), self.n());
        let du = self.u.adjoint() * &self.u - &id;
        let dv = self.v.adjoint() * &self.v - &id;
        du.iter().chain(dv.iter()).map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// max deviation of Uⁿ and Vⁿ from the identity.
    pub fn order_defect(&self) -> f64 {
        let n = self.n();
        let id = DMatrix::<Complex64>::identity(n, n);
        let du = matrix_power(&self.u, n) - &id;
        let dv = matrix_power(&self.v, n) - &id;
        du.iter().chain(dv.iter()).map(|z| z.norm()).fold(0.0, f64::max)
    }
}

fn matrix_power(m: &DMatrix<Complex64>, p: usize) -> DMatrix<Complex64> {
    let mut out = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..p {
        out = &out * m;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn z3_spectrum_is_symmetric_with_zero() {
        let e = electric_eigenvalues(3, 0.0).unwrap();
        assert_abs_diff_eq!(e[0], -1.4472, epsilon = 1e-4);
        assert_abs_diff_eq!(e[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e[2], 1.4472, epsilon = 1e-4);
    }

    #[test]
    fn z2_spectrum_is_half_root_pi() {
        let e = electric_eigenvalues(2, 0.0).unwrap();
        assert_abs_diff_eq!(e[0], -PI.sqrt() / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[1], PI.sqrt() / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e[0], -0.8862, epsilon = 1e-4);
    }

    #[test]
    fn z3_with_third_background() {
        // e_k = sqrt(2π/3)·(k − 1 + 1/3): −(2/3)q, (1/3)q, (4/3)q with q = 1.44720.
        let e = electric_eigenvalues(3, 1.0 / 3.0).unwrap();
        assert_abs_diff_eq!(e[0], -0.9648, epsilon = 1e-4);
        assert_abs_diff_eq!(e[1], 0.4824, epsilon = 1e-4);
        assert_abs_diff_eq!(e[2], 1.9297, epsilon = 1e-4);
    }

    #[test]
    fn rejects_trivial_group() {
        assert!(electric_eigenvalues(1, 0.0).is_err());
        assert!(weyl_pair(0).is_err());
    }

    #[test]
    fn z2_pair_is_pauli() {
        let w = weyl_pair(2).unwrap();
        let one = Complex64::new(1.0, 0.0);
        assert_eq!(w.u[(0, 1)], one);
        assert_eq!(w.u[(1, 0)], one);
        assert_eq!(w.u[(0, 0)].norm(), 0.0);
        assert_abs_diff_eq!((w.v[(0, 0)] - one).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((w.v[(1, 1)] + one).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn z3_commutes_up_to_phase() {
        let w = weyl_pair(3).unwrap();
        assert!(w.order_defect() < 1e-12);
        let uv = &w.u * &w.v;
        let vu = &w.v * &w.u;
        let diff = uv - vu * root_of_unity(3, 1);
        assert!(diff.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn neutral_label_has_smallest_field() {
        assert_eq!(LinkAlgebra::new(3, 0.0).unwrap().neutral_label(), 1);
        let even = LinkAlgebra::new(4, 0.0).unwrap();
        assert_eq!(even.tilde(even.neutral_label()), -0.5);
    }
}
