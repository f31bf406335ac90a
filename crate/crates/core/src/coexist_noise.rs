//! Forward Raman noise from a co-propagating classical channel, and the
//! white-noise / amplitude-damping qubit channels with their negativity.

use std::io::Read;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::state::{hermitian_eigenvalues, projector, psi_plus, Normalization, TwoQubitState};
use crate::units::{db_per_km_to_per_km, dbm_to_watts, PLANCK, LIGHT_SPEED};
use crate::{Error, Result};

/// Reference pump wavelength of the measured cross-section curve.
pub const RAMAN_REFERENCE_NM: f64 = 1555.0;

/// Spontaneous Raman cross-section β(λ_δ) per nm of filter bandwidth,
/// measured against a 1555 nm pump.
#[derive(Debug, Clone, PartialEq)]
pub struct RamanTable {
    wavelengths: Vec<f64>,
    beta: Vec<f64>,
}

impl RamanTable {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Table("need at least two knots".into()));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Table("wavelengths must be strictly increasing".into()));
        }
        if knots.iter().any(|k| !(k.1 >= 0.0 && k.1.is_finite() && k.0 > 0.0)) {
            return Err(Error::Table("cross-sections must be finite and nonnegative".into()));
        }
        let (wavelengths, beta) = knots.into_iter().unzip();
        Ok(Self { wavelengths, beta })
    }

    /// Two-column CSV with a header row: wavelength_nm, beta.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let mut knots = Vec::new();
        for (i, rec) in rdr.deserialize::<(f64, f64)>().enumerate() {
            let rec = rec.map_err(|e| Error::Table(format!("row {}: {e}", i + 2)))?;
            knots.push(rec);
        }
        Self::new(knots)
    }

    /// Placeholder curve for standard single-mode fiber: a triangular
    /// gain profile peaking at a 13.2 THz shift, weighted by the thermal
    /// phonon occupation at 300 K (n+1 on the Stokes side, n on the
    /// anti-Stokes side). Knots every 2 nm over 1450–1670 nm.
    pub fn synthetic() -> Self {
        const PEAK: f64 = 3.0e-8;
        let thermal_thz = 1.380_649e-23 * 300.0 / PLANCK * 1e-12;
        let knots = (0..=110)
            .map(|k| {
                let l = 1450.0 + 2.0 * k as f64;
                let shift = LIGHT_SPEED * 1e-3 * (1.0 / RAMAN_REFERENCE_NM - 1.0 / l);
                let s = shift.abs();
                let gain = if s <= 13.2 {
                    s / 13.2
                } else {
                    (-((s - 13.2) / 2.5).powi(2)).exp()
                };
                let occupation = if s < 1e-9 {
                    thermal_thz / 13.2
                } else {
                    let n = 1.0 / ((s / thermal_thz).exp() - 1.0);
                    gain * if shift > 0.0 { n + 1.0 } else { n }
                };
                (l, PEAK * occupation)
            })
            .collect();
        Self::new(knots).expect("synthetic table is well formed")
    }

    pub fn span(&self) -> (f64, f64) {
        (self.wavelengths[0], self.wavelengths[self.wavelengths.len() - 1])
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.wavelengths.iter().copied().zip(self.beta.iter().copied())
    }

    pub fn interpolate(&self, lambda_nm: f64) -> Result<f64> {
        let (lo, hi) = self.span();
        if !(lambda_nm >= lo && lambda_nm <= hi) {
            return Err(Error::Extrapolation {
                wavelength_nm: lambda_nm,
                lo,
                hi,
            });
        }
        let i = self.wavelengths.partition_point(|w| *w <= lambda_nm).clamp(1, self.wavelengths.len() - 1) - 1;
        let (x0, x1) = (self.wavelengths[i], self.wavelengths[i + 1]);
        if lambda_nm == x0 {
            return Ok(self.beta[i]);
        }
        let t = (lambda_nm - x0) / (x1 - x0);
        Ok(self.beta[i] * (1.0 - t) + self.beta[i + 1] * t)
    }
}

/// Wavelength at which the reference curve has the same frequency shift
/// as the (classical, quantum) pair.
pub fn raman_shift_wavelength(classical_nm: f64, quantum_nm: f64) -> Result<f64> {
    if !(classical_nm > 0.0 && quantum_nm > 0.0) {
        return Err(Error::Parameter {
            name: "wavelength",
            reason: "wavelengths must be positive".into(),
        });
    }
    let inv = 1.0 / RAMAN_REFERENCE_NM - (1.0 / classical_nm - 1.0 / quantum_nm);
    if !(inv > 0.0) {
        return Err(Error::Domain {
            what: "shifted wavelength reciprocal (1/nm)",
            value: inv,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    Ok(1.0 / inv)
}

pub fn raman_cross_section(classical_nm: f64, quantum_nm: f64, table: &RamanTable) -> Result<f64> {
    let shifted = raman_shift_wavelength(classical_nm, quantum_nm)?;
    Ok((shifted / quantum_nm).powi(4) * table.interpolate(shifted)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoexistenceLink {
    pub length_km: f64,
    pub atten_db_per_km: f64,
    /// Classical launch power; `-inf` switches the classical channel off.
    pub launch_dbm: f64,
    pub classical_nm: f64,
    pub bandwidth_nm: f64,
}

impl CoexistenceLink {
    pub fn validate(&self, quantum_nm: f64) -> Result<()> {
        if !(self.length_km >= 0.0) {
            return Err(Error::Parameter {
                name: "length_km",
                reason: "must be nonnegative".into(),
            });
        }
        if !(self.bandwidth_nm > 0.0) {
            return Err(Error::Parameter {
                name: "bandwidth_nm",
                reason: "must be positive".into(),
            });
        }
        if !(self.atten_db_per_km >= 0.0) {
            return Err(Error::Parameter {
                name: "atten_db_per_km",
                reason: "must be nonnegative".into(),
            });
        }
        if quantum_nm == self.classical_nm {
            return Err(Error::Parameter {
                name: "classical_nm",
                reason: "coincides with a quantum wavelength".into(),
            });
        }
        Ok(())
    }

    pub fn launch_watts(&self) -> f64 {
        dbm_to_watts(self.launch_dbm)
    }
}

/// Forward Raman photons per second inside the quantum filter at the far end.
pub fn raman_photon_rate(link: &CoexistenceLink, quantum_nm: f64, table: &RamanTable) -> Result<f64> {
    link.validate(quantum_nm)?;
    let p = link.launch_watts();
    if p == 0.0 {
        return Ok(0.0);
    }
    let beta = raman_cross_section(link.classical_nm, quantum_nm, table)?;
    let decay = (-db_per_km_to_per_km(link.atten_db_per_km) * link.length_km).exp();
    Ok(p * decay * link.bandwidth_nm * quantum_nm * 1e-9 * beta / (2.0 * PLANCK * LIGHT_SPEED))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseChannelParams {
    pub white: f64,
    pub damping_1: f64,
    pub damping_2: f64,
    pub pairs: usize,
}

impl NoiseChannelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("white", self.white), ("damping_1", self.damping_1), ("damping_2", self.damping_2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Parameter {
                    name,
                    reason: format!("{v} not in [0, 1]"),
                });
            }
        }
        if self.pairs == 0 {
            return Err(Error::Parameter {
                name: "pairs",
                reason: "need at least one frequency pair".into(),
            });
        }
        Ok(())
    }
}

/// Polarization state left after tracing out the frequency pairs of a
/// white-noise-mixed hyperentangled state: trace 1 − p + p/N.
pub fn white_noise_state(p: f64, n: usize) -> TwoQubitState {
    let mut rho = projector(&psi_plus()) * Complex64::new(1.0 - p, 0.0);
    let floor = p / (4.0 * n as f64);
    for k in 0..4 {
        rho[(k, k)] += floor;
    }
    TwoQubitState::from_matrix_unchecked(rho, Normalization::PostSelected)
}

fn damping_kraus(gamma: f64) -> [Matrix2<Complex64>; 2] {
    let c = |x: f64| Complex64::new(x, 0.0);
    [
        Matrix2::new(c(1.0), c(0.0), c(0.0), c((1.0 - gamma).sqrt())),
        Matrix2::new(c(0.0), c(gamma.sqrt()), c(0.0), c(0.0)),
    ]
}

fn kron(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> Matrix4<Complex64> {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// Independent amplitude damping on each photon.
pub fn amplitude_damp(rho: &TwoQubitState, gamma_1: f64, gamma_2: f64) -> TwoQubitState {
    let mut out = Matrix4::zeros();
    for a in damping_kraus(gamma_1) {
        for b in damping_kraus(gamma_2) {
            let k = kron(&a, &b);
            out += k * rho.rho * k.adjoint();
        }
    }
    TwoQubitState::from_matrix_unchecked(out, rho.normalization)
}

/// Closed-form negativity of the damped isotropic state, transcribed
/// term by term.
pub fn negativity_closed(p: f64, gamma_1: f64, gamma_2: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    let (g1, g2) = (gamma_1, gamma_2);
    let q = -1.0 + p;
    let m = nf + p - nf * p;
    let delta = 4.0 * nf * nf * q * q + m * m * g1 * g1 - 4.0 * nf * nf * q * q * g2
        + m * m * g2 * g2
        + 2.0 * g1 * (-2.0 * nf * nf * q * q + (nf * nf * q * q + 2.0 * nf * q * p - p * p) * g2);
    if delta < 0.0 {
        return Err(Error::ComplexBranch(delta));
    }
    let inner = p + nf * g1 - nf * p * g1 + nf * g2 - nf * p * g2 - 2.0 * nf * g1 * g2 - p * g1 * g2
        + 2.0 * nf * p * g1 * g2
        - delta.sqrt();
    Ok(inner / (2.0 * nf * q - 2.0 * p))
}

/// Sum of the magnitudes of the negative eigenvalues of the partial
/// transpose over the second photon.
pub fn negativity_numeric(rho: &TwoQubitState) -> f64 {
    hermitian_eigenvalues(&rho.partial_transpose()).iter().filter(|v| **v < 0.0).map(|v| -v).sum()
}
