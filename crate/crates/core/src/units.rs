//! Physical constants and unit conversions. Internal units are SI unless a
//! field name says otherwise.

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const LIGHT_SPEED: f64 = 299_792_458.0;
/// Speed of light in nm/ps, for angular frequencies in rad/ps.
pub const LIGHT_SPEED_NM_PER_PS: f64 = 299_792.458;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Power attenuation coefficient in 1/km from a dB/km figure.
pub fn db_per_km_to_per_km(db: f64) -> f64 {
    db * std::f64::consts::LN_10 / 10.0
}

pub fn db_to_transmission(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

pub fn wavelength_nm_to_omega(lambda_nm: f64) -> f64 {
    2.0 * std::f64::consts::PI * LIGHT_SPEED_NM_PER_PS / lambda_nm
}

pub fn omega_to_wavelength_nm(omega: f64) -> f64 {
    2.0 * std::f64::consts::PI * LIGHT_SPEED_NM_PER_PS / omega
}

/// Frequency in THz of a vacuum wavelength in nm.
pub fn wavelength_nm_to_thz(lambda_nm: f64) -> f64 {
    LIGHT_SPEED_NM_PER_PS / lambda_nm
}
