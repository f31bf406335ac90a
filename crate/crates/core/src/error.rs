use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} = {value} outside valid window [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("invalid parameter {name}: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("singular layer ratio: zero transverse wavevector in a {thickness_nm} nm layer")]
    SingularRatio { thickness_nm: f64 },
    #[error("unit cell determinant {det} deviates from 1")]
    Determinant { det: f64 },
    #[error("mode is stale for this waveguide (residual {residual:e})")]
    StaleMode { residual: f64 },
    #[error("profile grids cannot be aligned: {0}")]
    Shape(String),
    #[error("frequencies off the energy-conservation manifold by {mismatch:e} rad/ps")]
    OffManifold { mismatch: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("{wavelength_nm} nm outside table span [{lo}, {hi}] nm")]
    Extrapolation { wavelength_nm: f64, lo: f64, hi: f64 },
    #[error("negative discriminant {0:e} in closed-form negativity")]
    ComplexBranch(f64),
    #[error("cannot partition {fine} bins into {coarse} equal groups")]
    Partition { fine: usize, coarse: usize },
    #[error("undefined QBER: zero total counts")]
    UndefinedQber,
    #[error("table error: {0}")]
    Table(String),
}
