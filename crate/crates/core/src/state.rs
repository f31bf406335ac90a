//! Two-qubit polarization density operators in the basis {HH, HV, VH, VV}.

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;

use crate::{Error, Result};

pub type C4 = Matrix4<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    Normalized,
    /// Trace below one after frequency post-selection.
    PostSelected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    pub rho: C4,
    pub normalization: Normalization,
}

pub const HH: usize = 0;
pub const HV: usize = 1;
pub const VH: usize = 2;
pub const VV: usize = 3;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// |Ψ+⟩ = (|HV⟩ + |VH⟩)/√2.
pub fn psi_plus() -> Vector4<Complex64> {
    let s = c(std::f64::consts::FRAC_1_SQRT_2);
    Vector4::new(c(0.0), s, s, c(0.0))
}

pub fn projector(v: &Vector4<Complex64>) -> C4 {
    v * v.adjoint()
}

impl TwoQubitState {
    pub fn new(rho: C4, normalization: Normalization) -> Result<Self> {
        let s = Self { rho, normalization };
        s.validate()?;
        Ok(s)
    }

    pub fn from_matrix_unchecked(rho: C4, normalization: Normalization) -> Self {
        Self { rho, normalization }
    }

    pub fn bell_psi_plus() -> Self {
        Self::from_matrix_unchecked(projector(&psi_plus()), Normalization::Normalized)
    }

    /// Werner-type mixture V|Ψ+⟩⟨Ψ+| + (1−V)I/4, whose Z and X error rates are (1−V)/2.
    pub fn werner(visibility: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&visibility) {
            return Err(Error::Parameter {
                name: "visibility",
                reason: format!("{visibility} not in [0, 1]"),
            });
        }
        let rho = projector(&psi_plus()) * c(visibility) + C4::identity() * c((1.0 - visibility) / 4.0);
        Ok(Self::from_matrix_unchecked(rho, Normalization::Normalized))
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.rho - self.rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vector4<f64> {
        hermitian_eigenvalues(&self.rho)
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > 1e-12 {
            return Err(Error::Parameter {
                name: "rho",
                reason: format!("not Hermitian (deviation {herm:e})"),
            });
        }
        let min = self.eigenvalues().min();
        if min < -1e-10 {
            return Err(Error::Parameter {
                name: "rho",
                reason: format!("not positive semidefinite (eigenvalue {min:e})"),
            });
        }
        if self.normalization == Normalization::Normalized && (self.trace() - 1.0).abs() > 1e-10 {
            return Err(Error::Parameter {
                name: "rho",
                reason: format!("trace {} for a normalized state", self.trace()),
            });
        }
        Ok(())
    }

    pub fn normalized(&self) -> Self {
        let t = self.trace();
        Self::from_matrix_unchecked(self.rho / c(t), Normalization::Normalized)
    }

    pub fn fidelity_psi_plus(&self) -> f64 {
        let v = psi_plus();
        (v.adjoint() * self.rho * v)[(0, 0)].re / self.trace()
    }

    /// Partial transpose over the second qubit.
    pub fn partial_transpose(&self) -> C4 {
        partial_transpose_second(&self.rho)
    }

    /// Wootters concurrence of the normalized state.
    pub fn concurrence(&self) -> f64 {
        let rho = self.normalized().rho;
        let sy = Matrix2::new(c(0.0), Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0), c(0.0));
        let yy = sy.kronecker(&sy);
        let tilde = yy * rho.conjugate() * yy;
        let sq = hermitian_sqrt(&rho);
        let r = sq * tilde * sq;
        let r = (r + r.adjoint()) * c(0.5);
        let mut l: Vec<f64> = hermitian_eigenvalues(&r).iter().map(|x| x.max(0.0).sqrt()).collect();
        l.sort_by(|a, b| b.partial_cmp(a).unwrap());
        (l[0] - l[1] - l[2] - l[3]).max(0.0)
    }

    /// Probability (unnormalized by trace) of the joint projective outcome
    /// onto |a⟩⊗|b⟩.
    pub fn outcome_weight(&self, a: &nalgebra::Vector2<Complex64>, b: &nalgebra::Vector2<Complex64>) -> f64 {
        let v = a.kronecker(b);
        (v.adjoint() * self.rho * v)[(0, 0)].re
    }
}

pub fn partial_transpose_second(rho: &C4) -> C4 {
    C4::from_fn(|r, col| {
        let (a, b) = (r / 2, r % 2);
        let (cc, d) = (col / 2, col % 2);
        rho[(2 * a + d, 2 * cc + b)]
    })
}

pub fn hermitian_eigenvalues(m: &C4) -> Vector4<f64> {
    let h = (m + m.adjoint()) * c(0.5);
    SymmetricEigen::new(h).eigenvalues
}

fn hermitian_sqrt(m: &C4) -> C4 {
    let e = SymmetricEigen::new((m + m.adjoint()) * c(0.5));
    let d = C4::from_diagonal(&e.eigenvalues.map(|x| c(x.max(0.0).sqrt())));
    e.eigenvectors * d * e.eigenvectors.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_state_properties() {
        let s = TwoQubitState::bell_psi_plus();
        s.validate().unwrap();
        assert!((s.fidelity_psi_plus() - 1.0).abs() < 1e-12);
        assert!((s.concurrence() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn partial_transpose_spectrum_of_bell_state() {
        let s = TwoQubitState::bell_psi_plus();
        let mut ev: Vec<f64> = hermitian_eigenvalues(&s.partial_transpose()).iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want = [-0.5, 0.5, 0.5, 0.5];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_transpose_is_involution() {
        let m = C4::from_fn(|r, col| Complex64::new((r * 4 + col) as f64, (r as f64) - (col as f64)));
        let back = partial_transpose_second(&partial_transpose_second(&m));
        assert_eq!(back, m);
    }

    #[test]
    fn werner_concurrence_closed_form() {
        for v in [0.2, 1.0 / 3.0, 0.5, 0.9] {
            let s = TwoQubitState::werner(v).unwrap();
            let want = ((3.0 * v - 1.0) / 2.0).max(0.0);
            assert!((s.concurrence() - want).abs() < 1e-7, "v={v}");
        }
    }
}
