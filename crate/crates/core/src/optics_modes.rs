//! Transfer-matrix solver for the guided modes of a symmetric Bragg
//! reflection waveguide (core slab between two periodic claddings), plus the
//! three-wave modal overlap used to rank SPDC designs.
//!
//! Coordinates are in nm and wavevectors in rad/nm. The cladding field in
//! each layer is written as `a cos(k u) + b sin(k u)`; a period maps the
//! coefficient pair of one cell onto the next by a 2×2 matrix whose
//! determinant is one.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarization {
    TE,
    TM,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeClass {
    /// Confined by total internal reflection (index above the reference cladding).
    Tir,
    /// Confined by transverse Bragg reflection.
    Brw,
}

/// Core parity used for TM modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TmParity {
    /// cos(k_c x) core field, the fundamental mode.
    Even,
    /// sin(k_c x) core field.
    Odd,
    /// Pick by comparing |n_a² k_b / (n_b² k_a)| with one.
    SignTest,
}

/// Which cladding index separates TIR from Bragg-guided modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TirThreshold {
    /// Outer, low-index layer b.
    LowIndexLayer,
    /// Inner, high-index layer a.
    HighIndexLayer,
}

pub trait IndexModel: Send + Sync + std::fmt::Debug {
    /// Refractive index of Al_x Ga_(1−x) As at a vacuum wavelength in nm.
    fn index(&self, al_fraction: f64, lambda_nm: f64) -> Result<f64>;
}

/// Single-oscillator AlGaAs dispersion (Afromowitz 1974), valid below the
/// direct gap of each composition.
#[derive(Debug, Clone, PartialEq)]
pub struct Afromowitz {
    pub lambda_min_nm: f64,
    pub lambda_max_nm: f64,
}

impl Default for Afromowitz {
    fn default() -> Self {
        Self {
            lambda_min_nm: 700.0,
            lambda_max_nm: 2000.0,
        }
    }
}

const HC_EV_NM: f64 = 1239.841_984_332_002_6;

impl Afromowitz {
    fn gap_ev(x: f64) -> f64 {
        1.424 + 1.266 * x + 0.26 * x * x
    }

    /// Shortest usable wavelength for a composition.
    pub fn lambda_floor(&self, x: f64) -> f64 {
        self.lambda_min_nm.max(HC_EV_NM / Self::gap_ev(x))
    }
}

impl IndexModel for Afromowitz {
    fn index(&self, x: f64, lambda_nm: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain {
                what: "Al fraction",
                value: x,
                lo: 0.0,
                hi: 1.0,
            });
        }
        let lo = self.lambda_floor(x);
        if !(lambda_nm > lo && lambda_nm <= self.lambda_max_nm) {
            return Err(Error::Domain {
                what: "wavelength (nm)",
                value: lambda_nm,
                lo,
                hi: self.lambda_max_nm,
            });
        }
        let e = HC_EV_NM / lambda_nm;
        let e0 = 3.65 + 0.871 * x + 0.179 * x * x;
        let ed = 36.1 - 2.45 * x;
        let eg = Self::gap_ev(x);
        let eta = PI * ed / (2.0 * e0.powi(3) * (e0 * e0 - eg * eg));
        let log = ((2.0 * e0 * e0 - eg * eg - e * e) / (eg * eg - e * e)).ln();
        let n2 = 1.0 + ed / e0 + ed * e * e / e0.powi(3) + eta / PI * e.powi(4) * log;
        Ok(n2.sqrt())
    }
}

/// Bilinear interpolation over a rectangular (Al fraction, wavelength) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TableIndex {
    fractions: Vec<f64>,
    wavelengths: Vec<f64>,
    /// Row-major by fraction.
    values: Vec<f64>,
}

impl TableIndex {
    pub fn new(fractions: Vec<f64>, wavelengths: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
        if fractions.is_empty() || wavelengths.is_empty() || !increasing(&fractions) || !increasing(&wavelengths) {
            return Err(Error::Table("axes must be nonempty and strictly increasing".into()));
        }
        if values.len() != fractions.len() * wavelengths.len() {
            return Err(Error::Table(format!(
                "expected {} values, got {}",
                fractions.len() * wavelengths.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 1.0)) {
            return Err(Error::Table("indices must be finite and above 1".into()));
        }
        Ok(Self {
            fractions,
            wavelengths,
            values,
        })
    }

    /// Rows of `(al_fraction, lambda_nm, index)` covering a full grid in any order.
    pub fn from_rows(rows: &[(f64, f64, f64)]) -> Result<Self> {
        let mut fr: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut wl: Vec<f64> = rows.iter().map(|r| r.1).collect();
        fr.sort_by(f64::total_cmp);
        fr.dedup();
        wl.sort_by(f64::total_cmp);
        wl.dedup();
        let mut values = vec![f64::NAN; fr.len() * wl.len()];
        for &(x, l, n) in rows {
            let i = fr.iter().position(|v| *v == x).unwrap();
            let j = wl.iter().position(|v| *v == l).unwrap();
            values[i * wl.len() + j] = n;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Table("grid has missing knots".into()));
        }
        Self::new(fr, wl, values)
    }

    fn locate(axis: &[f64], v: f64, what: &'static str) -> Result<(usize, f64)> {
        let (lo, hi) = (axis[0], axis[axis.len() - 1]);
        if !(v >= lo && v <= hi) {
            return Err(Error::Domain { what, value: v, lo, hi });
        }
        if axis.len() == 1 {
            return Ok((0, 0.0));
        }
        let i = axis.partition_point(|a| *a <= v).clamp(1, axis.len() - 1) - 1;
        let t = (v - axis[i]) / (axis[i + 1] - axis[i]);
        Ok((i, t))
    }
}

impl IndexModel for TableIndex {
    fn index(&self, x: f64, lambda_nm: f64) -> Result<f64> {
        let (i, s) = Self::locate(&self.fractions, x, "Al fraction")?;
        let (j, t) = Self::locate(&self.wavelengths, lambda_nm, "wavelength (nm)")?;
        let w = self.wavelengths.len();
        let at = |i: usize, j: usize| self.values[i * w + j];
        let i1 = (i + 1).min(self.fractions.len() - 1);
        let j1 = (j + 1).min(w - 1);
        if s == 0.0 && t == 0.0 {
            return Ok(at(i, j));
        }
        let v0 = at(i, j) * (1.0 - t) + at(i, j1) * t;
        let v1 = at(i1, j) * (1.0 - t) + at(i1, j1) * t;
        Ok(v0 * (1.0 - s) + v1 * s)
    }
}

/// Symmetric slab: core of thickness `core_nm`, then `periods` cells of
/// (layer a, layer b) on each side.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredWaveguide {
    pub core_nm: f64,
    pub core_al: f64,
    pub a_nm: f64,
    pub a_al: f64,
    pub b_nm: f64,
    pub b_al: f64,
    pub periods: usize,
}

impl LayeredWaveguide {
    /// The fabricated six-period design.
    pub fn reference_design() -> Self {
        Self {
            core_nm: 230.0,
            core_al: 0.17,
            a_nm: 127.0,
            a_al: 0.28,
            b_nm: 622.0,
            b_al: 0.72,
            periods: 6,
        }
    }

    pub fn period_nm(&self) -> f64 {
        self.a_nm + self.b_nm
    }

    pub fn half_width_nm(&self) -> f64 {
        self.core_nm / 2.0 + self.periods as f64 * self.period_nm()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("core_nm", self.core_nm), ("a_nm", self.a_nm), ("b_nm", self.b_nm)] {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Parameter {
                    name,
                    reason: format!("thickness {t} must be positive"),
                });
            }
        }
        for (name, x) in [("core_al", self.core_al), ("a_al", self.a_al), ("b_al", self.b_al)] {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Parameter {
                    name,
                    reason: format!("fraction {x} not in [0, 1]"),
                });
            }
        }
        Ok(())
    }

    pub fn indices(&self, model: &dyn IndexModel, lambda_nm: f64) -> Result<LayerIndices> {
        Ok(LayerIndices {
            core: model.index(self.core_al, lambda_nm)?,
            a: model.index(self.a_al, lambda_nm)?,
            b: model.index(self.b_al, lambda_nm)?,
        })
    }

    /// Checks the index ordering core > a > b at a wavelength.
    pub fn check_ordering(&self, model: &dyn IndexModel, lambda_nm: f64) -> Result<LayerIndices> {
        let n = self.indices(model, lambda_nm)?;
        if !(n.core > n.a && n.a > n.b) {
            return Err(Error::Parameter {
                name: "layer compositions",
                reason: format!("index ordering violated at {lambda_nm} nm: {n:?}"),
            });
        }
        Ok(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerIndices {
    pub core: f64,
    pub a: f64,
    pub b: f64,
}

pub fn transverse_wavevector(n_layer: f64, n_eff: f64, lambda_nm: f64) -> Complex64 {
    let k0 = 2.0 * PI / lambda_nm;
    Complex64::new(n_layer * n_layer - n_eff * n_eff, 0.0).sqrt() * k0
}

/// Maps (a, b) coefficients at the start of a layer of thickness `d` to the
/// coefficients at the start of the next layer. `ratio` is k/k′ for TE and
/// n′²k/(n²k′) for TM.
pub fn layer_matrix(k: Complex64, d: f64, ratio: Complex64) -> Matrix2<Complex64> {
    let (c, s) = ((k * d).cos(), (k * d).sin());
    Matrix2::new(c, s, -ratio * s, ratio * c)
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    ka: Complex64,
    kb: Complex64,
    /// a → b boundary ratio.
    r_ab: Complex64,
    /// b → a boundary ratio.
    r_ba: Complex64,
    a: f64,
    b: f64,
}

impl Cell {
    fn new(pol: Polarization, lambda_nm: f64, n_eff: f64, n: LayerIndices, a: f64, b: f64) -> Result<Self> {
        let ka = transverse_wavevector(n.a, n_eff, lambda_nm);
        let kb = transverse_wavevector(n.b, n_eff, lambda_nm);
        if a == 0.0 && b == 0.0 {
            let one = Complex64::new(1.0, 0.0);
            return Ok(Self { ka, kb, r_ab: one, r_ba: one, a, b });
        }
        for (k, d) in [(ka, a), (kb, b)] {
            if k.norm() == 0.0 {
                return Err(Error::SingularRatio { thickness_nm: d.max(a).max(b) });
            }
        }
        let (r_ab, r_ba) = match pol {
            Polarization::TE => (ka / kb, kb / ka),
            Polarization::TM => (ka / kb * (n.b * n.b / (n.a * n.a)), kb / ka * (n.a * n.a / (n.b * n.b))),
        };
        Ok(Self { ka, kb, r_ab, r_ba, a, b })
    }

    fn matrix(&self) -> Matrix2<Complex64> {
        layer_matrix(self.kb, self.b, self.r_ba) * layer_matrix(self.ka, self.a, self.r_ab)
    }
}

pub fn unit_cell_matrix(
    pol: Polarization,
    lambda_nm: f64,
    n_eff: f64,
    wg: &LayeredWaveguide,
    model: &dyn IndexModel,
) -> Result<Matrix2<Complex64>> {
    let n = wg.indices(model, lambda_nm)?;
    Ok(Cell::new(pol, lambda_nm, n_eff, n, wg.a_nm, wg.b_nm)?.matrix())
}

/// Floquet multiplier exp(iKΛ) of a unimodular cell: the root of
/// x² − (A+D)x + 1 with modulus at most one.
pub fn bloch_factor(cell: &Matrix2<Complex64>) -> Result<Complex64> {
    let det = cell.determinant();
    let scale = cell.iter().map(|z| z.norm_sqr()).sum::<f64>().max(1.0);
    if (det - 1.0).norm() > 1e-9 * scale {
        return Err(Error::Determinant { det: det.re });
    }
    let h = (cell[(0, 0)] + cell[(1, 1)]) * 0.5;
    let disc = h * h - 1.0;
    if disc.norm() < 1e-14 {
        return Ok(h);
    }
    let s = disc.sqrt();
    let (r1, r2) = (h + s, h - s);
    let (m1, m2) = (r1.norm(), r2.norm());
    if (m1 - m2).abs() <= 1e-12 * m1.max(m2) {
        return Ok(if r1.im >= 0.0 { r1 } else { r2 });
    }
    Ok(if m1 < m2 { r1 } else { r2 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Residual {
    Value(f64),
    /// Near a cot/tan or Bloch-denominator singularity.
    Pole,
    /// Inside a Bloch pass band, so the cladding field does not decay.
    Unguided,
}

impl Residual {
    pub fn value(self) -> Option<f64> {
        match self {
            Residual::Value(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub scan_points_per_unit: usize,
    pub tolerance: f64,
    pub tm_parity: TmParity,
    pub tir_threshold: TirThreshold,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            scan_points_per_unit: 2000,
            tolerance: 1e-10,
            tm_parity: TmParity::Even,
            tir_threshold: TirThreshold::LowIndexLayer,
        }
    }
}

/// Everything needed to evaluate the dispersion relation and the field at
/// one (polarization, wavelength, n_eff).
#[derive(Debug, Clone, Copy)]
struct Setup {
    pol: Polarization,
    n: LayerIndices,
    k0: f64,
    kc: Complex64,
    cell: Cell,
    m: Matrix2<Complex64>,
    half_core: f64,
    parity: TmParity,
}

impl Setup {
    fn new(
        pol: Polarization,
        lambda_nm: f64,
        n_eff: f64,
        wg: &LayeredWaveguide,
        model: &dyn IndexModel,
        parity: TmParity,
    ) -> Result<Self> {
        let n = wg.indices(model, lambda_nm)?;
        let cell = Cell::new(pol, lambda_nm, n_eff, n, wg.a_nm, wg.b_nm)?;
        let mut s = Self {
            pol,
            n,
            k0: 2.0 * PI / lambda_nm,
            kc: transverse_wavevector(n.core, n_eff, lambda_nm),
            m: cell.matrix(),
            cell,
            half_core: wg.core_nm / 2.0,
            parity: TmParity::Even,
        };
        s.parity = match (pol, parity) {
            (Polarization::TE, _) => TmParity::Even,
            (Polarization::TM, TmParity::SignTest) => {
                let t = (cell.kb / cell.ka * (n.a * n.a / (n.b * n.b))).norm();
                if t < 1.0 {
                    TmParity::Even
                } else {
                    TmParity::Odd
                }
            }
            (Polarization::TM, p) => p,
        };
        Ok(s)
    }

    /// Core-side weight n_layer²/n_core² on the flux for TM, 1 for TE.
    fn flux_weight(&self) -> f64 {
        match self.pol {
            Polarization::TE => 1.0,
            Polarization::TM => self.n.a * self.n.a / (self.n.core * self.n.core),
        }
    }

    /// Cladding coefficients at the core boundary from field and flux continuity.
    fn initial_coefficients(&self) -> Vector2<Complex64> {
        let phase = self.kc * self.half_core;
        let w = self.flux_weight();
        match self.parity {
            TmParity::Odd => Vector2::new(phase.sin(), self.kc / self.cell.ka * w * phase.cos()),
            _ => Vector2::new(phase.cos(), -(self.kc / self.cell.ka) * w * phase.sin()),
        }
    }

    fn residual(&self) -> Result<Residual> {
        let lam = bloch_factor(&self.m)?;
        if (lam.norm() - 1.0).abs() < 1e-12 {
            return Ok(Residual::Unguided);
        }
        let denom = lam - self.m[(0, 0)];
        let phase = self.kc * self.half_core;
        let (sin, cos) = (phase.sin(), phase.cos());
        let core_term = match self.parity {
            TmParity::Odd => {
                if cos.norm() < 1e-12 {
                    return Ok(Residual::Pole);
                }
                -(sin / cos) / self.kc
            }
            _ => {
                if sin.norm() < 1e-12 {
                    return Ok(Residual::Pole);
                }
                (cos / sin) / self.kc
            }
        };
        if denom.norm() < 1e-14 * (1.0 + self.m[(0, 1)].norm()) {
            return Ok(Residual::Pole);
        }
        let clad = self.m[(0, 1)] / denom / self.cell.ka * self.flux_weight();
        let r = (clad + core_term) * self.k0;
        if !r.re.is_finite() {
            return Ok(Residual::Pole);
        }
        Ok(Residual::Value(r.re))
    }
}

/// Dimensionless mismatch between the cladding and core sides of the
/// boundary condition at the core edge; zero at a guided mode.
pub fn dispersion_residual(
    n_eff: f64,
    lambda_nm: f64,
    pol: Polarization,
    wg: &LayeredWaveguide,
    model: &dyn IndexModel,
    parity: TmParity,
) -> Result<Residual> {
    Setup::new(pol, lambda_nm, n_eff, wg, model, parity)?.residual()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSolution {
    pub polarization: Polarization,
    pub lambda_nm: f64,
    pub n_eff: f64,
    pub class: ModeClass,
    pub bloch: Complex64,
    pub parity: TmParity,
}

pub fn solve_modes(
    lambda_nm: f64,
    pol: Polarization,
    wg: &LayeredWaveguide,
    model: &dyn IndexModel,
    window: (f64, f64),
    opts: &SolverOptions,
) -> Result<Vec<ModeSolution>> {
    wg.validate()?;
    let (lo, hi) = window;
    if !(hi > lo) {
        return Ok(Vec::new());
    }
    let n = wg.indices(model, lambda_nm)?;
    let eval = |x: f64| -> Result<Option<f64>> {
        Ok(dispersion_residual(x, lambda_nm, pol, wg, model, opts.tm_parity)?.value())
    };
    let count = (((hi - lo) * opts.scan_points_per_unit as f64).ceil() as usize).max(2);
    let xs: Vec<f64> = (0..=count).map(|i| lo + (hi - lo) * i as f64 / count as f64).collect();
    let fs: Vec<Option<f64>> = xs.iter().map(|&x| eval(x)).collect::<Result<_>>()?;
    let mut roots = Vec::new();
    for i in 0..count {
        let (Some(fa), Some(fb)) = (fs[i], fs[i + 1]) else { continue };
        if fa == 0.0 {
            roots.push(xs[i]);
            continue;
        }
        if fa * fb > 0.0 {
            continue;
        }
        if let Some(r) = bisect(&eval, xs[i], fa, xs[i + 1], fb, opts.tolerance)? {
            roots.push(r);
        }
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let threshold = match opts.tir_threshold {
        TirThreshold::LowIndexLayer => n.b,
        TirThreshold::HighIndexLayer => n.a,
    };
    let mut out = Vec::with_capacity(roots.len());
    for r in roots {
        let s = Setup::new(pol, lambda_nm, r, wg, model, opts.tm_parity)?;
        out.push(ModeSolution {
            polarization: pol,
            lambda_nm,
            n_eff: r,
            class: if r > threshold { ModeClass::Tir } else { ModeClass::Brw },
            bloch: bloch_factor(&s.m)?,
            parity: s.parity,
        });
    }
    out.sort_by(|a, b| b.n_eff.total_cmp(&a.n_eff));
    Ok(out)
}

/// Default search window (1, highest layer index).
pub fn default_window(wg: &LayeredWaveguide, model: &dyn IndexModel, lambda_nm: f64) -> Result<(f64, f64)> {
    let n = wg.indices(model, lambda_nm)?;
    Ok((1.0 + 1e-9, n.core.max(n.a).max(n.b) - 1e-9))
}

fn bisect(
    eval: &dyn Fn(f64) -> Result<Option<f64>>,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    tol: f64,
) -> Result<Option<f64>> {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let Some(fm) = eval(m)? else { return Ok(None) };
        if fm == 0.0 {
            return Ok(Some(m));
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    let (x, f) = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    Ok((f.abs() < tol).then_some(x))
}

/// Analytic transverse field of a solved mode: E_y for TE, H_y for TM.
#[derive(Debug, Clone)]
pub struct ModeField {
    mode: ModeSolution,
    setup: Setup,
    v0: Vector2<Complex64>,
    periods: usize,
    scale: f64,
}

impl ModeField {
    pub fn new(mode: &ModeSolution, wg: &LayeredWaveguide, model: &dyn IndexModel) -> Result<Self> {
        let setup = Setup::new(mode.polarization, mode.lambda_nm, mode.n_eff, wg, model, mode.parity)?;
        match setup.residual()? {
            Residual::Value(r) if r.abs() < 1e-9 => {}
            Residual::Value(r) => return Err(Error::StaleMode { residual: r }),
            _ => return Err(Error::StaleMode { residual: f64::INFINITY }),
        }
        let mut f = Self {
            mode: *mode,
            v0: setup.initial_coefficients(),
            setup,
            periods: wg.periods,
            scale: 1.0,
        };
        let peak = f.core_value(0.0).norm().max(f.core_value(f.setup.half_core).norm());
        let clad_peak = (0..=200)
            .map(|i| f.eval_complex(f.setup.half_core + f.period() * i as f64 / 200.0).norm())
            .fold(0.0, f64::max);
        f.scale = peak.max(clad_peak);
        Ok(f)
    }

    pub fn mode(&self) -> &ModeSolution {
        &self.mode
    }

    fn period(&self) -> f64 {
        self.setup.cell.a + self.setup.cell.b
    }

    fn core_value(&self, x: f64) -> Complex64 {
        let p = self.setup.kc * x;
        match self.setup.parity {
            TmParity::Odd => p.sin(),
            _ => p.cos(),
        }
    }

    fn cell_coefficients(&self, n: usize) -> Vector2<Complex64> {
        self.v0 * self.mode.bloch.powi(n as i32)
    }

    /// Field inside cell n at offset u from the cell start, from coefficients `v`.
    fn cell_value(&self, v: Vector2<Complex64>, u: f64) -> Complex64 {
        let c = &self.setup.cell;
        if u <= c.a {
            v[0] * (c.ka * u).cos() + v[1] * (c.ka * u).sin()
        } else {
            let w = layer_matrix(c.ka, c.a, c.r_ab) * v;
            w[0] * (c.kb * (u - c.a)).cos() + w[1] * (c.kb * (u - c.a)).sin()
        }
    }

    fn eval_complex(&self, x: f64) -> Complex64 {
        let x = x.abs();
        let h = self.setup.half_core;
        if x <= h {
            return self.core_value(x);
        }
        let u = x - h;
        let period = self.period();
        let n = ((u / period).floor() as usize).min(self.periods.saturating_sub(1));
        self.cell_value(self.cell_coefficients(n), u - n as f64 * period)
    }

    /// Real field at a position, normalized so the peak magnitude is near one.
    pub fn value(&self, x_nm: f64) -> f64 {
        self.eval_complex(x_nm).re / self.scale
    }

    /// Largest relative jump of the field across any layer boundary, each
    /// side evaluated from its own layer's expansion.
    pub fn interface_mismatch(&self) -> f64 {
        let c = self.setup.cell;
        let mut worst: f64 = 0.0;
        let mut push = |l: Complex64, r: Complex64| worst = worst.max((l - r).norm() / self.scale);
        push(self.core_value(self.setup.half_core), self.cell_coefficients(0)[0]);
        for n in 0..self.periods {
            let v = self.cell_coefficients(n);
            let a_end = v[0] * (c.ka * c.a).cos() + v[1] * (c.ka * c.a).sin();
            let w = layer_matrix(c.ka, c.a, c.r_ab) * v;
            push(a_end, w[0]);
            let b_end = w[0] * (c.kb * c.b).cos() + w[1] * (c.kb * c.b).sin();
            let next = self.v0 * self.mode.bloch.powi(n as i32 + 1);
            push(b_end, next[0]);
        }
        worst
    }

    /// Largest deviation, relative to the peak field, between the field one
    /// period further out (coefficients propagated by the cell matrix) and
    /// the Bloch factor times the field here.
    pub fn floquet_error(&self) -> f64 {
        let period = self.period();
        let mut worst: f64 = 0.0;
        for n in 0..self.periods {
            let v = self.cell_coefficients(n);
            let next = self.setup.m * v;
            for i in 0..=64 {
                let u = period * i as f64 / 64.0;
                let here = self.cell_value(v, u) * self.mode.bloch;
                let there = self.cell_value(next, u);
                worst = worst.max((there - here).norm() / self.scale);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldProfile {
    pub polarization: Polarization,
    pub lambda_nm: f64,
    pub n_eff: f64,
    pub class: ModeClass,
    pub x_nm: Vec<f64>,
    pub field: Vec<f64>,
}

impl FieldProfile {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# mode={:?}/{:?} lambda_nm={} n_eff={:.12}",
            self.polarization, self.class, self.lambda_nm, self.n_eff
        )?;
        writeln!(w, "x_nm,field")?;
        for (x, f) in self.x_nm.iter().zip(&self.field) {
            writeln!(w, "{x},{f:.12e}")?;
        }
        Ok(())
    }
}

/// Samples a solved mode over the whole stack, mirrored about x = 0 and
/// scaled to unit peak.
pub fn field_profile(
    mode: &ModeSolution,
    wg: &LayeredWaveguide,
    model: &dyn IndexModel,
    spacing_nm: f64,
) -> Result<FieldProfile> {
    if !(spacing_nm > 0.0) {
        return Err(Error::Parameter {
            name: "spacing_nm",
            reason: "must be positive".into(),
        });
    }
    let field = ModeField::new(mode, wg, model)?;
    let steps = (wg.half_width_nm() / spacing_nm).floor() as i64;
    let x_nm: Vec<f64> = (-steps..=steps).map(|i| i as f64 * spacing_nm).collect();
    let mut values: Vec<f64> = x_nm.iter().map(|&x| field.value(x)).collect();
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        values.iter_mut().for_each(|v| *v /= peak);
    }
    Ok(FieldProfile {
        polarization: mode.polarization,
        lambda_nm: mode.lambda_nm,
        n_eff: mode.n_eff,
        class: mode.class,
        x_nm,
        field: values,
    })
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(xw, yw)| 0.5 * (xw[1] - xw[0]) * (yw[0] + yw[1])).sum()
}

fn interpolate(x: &[f64], y: &[f64], at: f64) -> f64 {
    let i = x.partition_point(|v| *v <= at).clamp(1, x.len() - 1) - 1;
    let t = (at - x[i]) / (x[i + 1] - x[i]);
    y[i] * (1.0 - t) + y[i + 1] * t
}

/// Three-wave overlap |∫E_p E_s E_i dx| normalized by the product of the
/// L³ norms, which bounds it to [0, 1] and makes it scale invariant.
pub fn modal_overlap(pump: &FieldProfile, signal: &FieldProfile, idler: &FieldProfile) -> Result<f64> {
    for p in [pump, signal, idler] {
        if p.x_nm.len() < 2 || p.x_nm.len() != p.field.len() || p.x_nm.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Shape("profile grid must be strictly increasing and match its samples".into()));
        }
    }
    let lo = pump.x_nm[0].max(signal.x_nm[0]).max(idler.x_nm[0]);
    let hi = pump.x_nm[pump.x_nm.len() - 1]
        .min(signal.x_nm[signal.x_nm.len() - 1])
        .min(idler.x_nm[idler.x_nm.len() - 1]);
    let x: Vec<f64> = pump.x_nm.iter().copied().filter(|v| *v >= lo && *v <= hi).collect();
    if x.len() < 2 {
        return Err(Error::Shape(format!("profiles share no common span ({lo}..{hi} nm)")));
    }
    let resample = |p: &FieldProfile| -> Vec<f64> { x.iter().map(|&v| interpolate(&p.x_nm, &p.field, v)).collect() };
    let (ep, es, ei) = (resample(pump), resample(signal), resample(idler));
    let triple: Vec<f64> = (0..x.len()).map(|k| ep[k] * es[k] * ei[k]).collect();
    let cube = |e: &[f64]| trapezoid(&x, &e.iter().map(|v| v.abs().powi(3)).collect::<Vec<_>>()).cbrt();
    let norm = cube(&ep) * cube(&es) * cube(&ei);
    if norm == 0.0 {
        return Err(Error::Degenerate("a profile is identically zero".into()));
    }
    Ok(trapezoid(&x, &triple).abs() / norm)
}

/// Pump Bragg mode and the two cross-polarized TIR modes of the
/// degenerate type-II process, with their overlap.
#[derive(Debug, Clone)]
pub struct OverlapReport {
    pub pump: ModeSolution,
    pub signal: ModeSolution,
    pub idler: ModeSolution,
    pub overlap: f64,
}

pub fn type2_overlap(
    wg: &LayeredWaveguide,
    model: &dyn IndexModel,
    pump_nm: f64,
    opts: &SolverOptions,
    spacing_nm: f64,
) -> Result<OverlapReport> {
    let pick = |lambda: f64, pol: Polarization, class: ModeClass| -> Result<ModeSolution> {
        let w = default_window(wg, model, lambda)?;
        solve_modes(lambda, pol, wg, model, w, opts)?
            .into_iter()
            .find(|m| m.class == class)
            .ok_or_else(|| Error::Degenerate(format!("no {class:?} {pol:?} mode at {lambda} nm")))
    };
    let pump = pick(pump_nm, Polarization::TE, ModeClass::Brw)?;
    let signal = pick(2.0 * pump_nm, Polarization::TE, ModeClass::Tir)?;
    let idler = pick(2.0 * pump_nm, Polarization::TM, ModeClass::Tir)?;
    let prof = |m: &ModeSolution| field_profile(m, wg, model, spacing_nm);
    let overlap = modal_overlap(&prof(&pump)?, &prof(&signal)?, &prof(&idler)?)?;
    Ok(OverlapReport {
        pump,
        signal,
        idler,
        overlap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn afro() -> Afromowitz {
        Afromowitz::default()
    }

    #[test]
    fn gaaas_reference_index() {
        let n = afro().index(0.0, 1550.0).unwrap();
        assert!((n - 3.377).abs() < 2e-3, "{n}");
    }

    // Independent evaluation of the oscillator formula through the
    // ε = n² form with explicit photon energies.
    fn oracle_index(x: f64, lambda_nm: f64) -> f64 {
        let e = 1239.8419843320026 / lambda_nm;
        let e0 = 3.65 + 0.871 * x + 0.179 * x.powi(2);
        let ed = 36.1 - 2.45 * x;
        let eg = 1.424 + 1.266 * x + 0.26 * x.powi(2);
        let ef2 = 2.0 * e0.powi(2) - eg.powi(2);
        let eta = std::f64::consts::PI * ed / (2.0 * e0.powi(3) * (e0.powi(2) - eg.powi(2)));
        let m1 = eta / (2.0 * std::f64::consts::PI) * (ef2.powi(2) - eg.powi(4));
        let m3 = eta / std::f64::consts::PI * (ef2 - eg.powi(2));
        let chi = m1 + m3 * e.powi(2) + eta / std::f64::consts::PI * e.powi(4) * ((ef2 - e * e) / (eg * eg - e * e)).ln();
        (1.0 + chi).sqrt()
    }

    #[test]
    fn index_matches_moment_form() {
        for &(x, l) in &[(0.28, 1560.0), (0.17, 780.08), (0.72, 1560.16), (0.0, 1300.0)] {
            let a = afro().index(x, l).unwrap();
            assert!((a - oracle_index(x, l)).abs() < 1e-12, "x={x} l={l}");
        }
        let frozen = afro().index(0.28, 1560.0).unwrap();
        assert!((frozen - 3.234_165_882_409_299).abs() < 1e-12);
    }

    #[test]
    fn index_decreases_with_aluminium() {
        let m = afro();
        assert!(m.index(0.17, 1560.0).unwrap() > m.index(0.72, 1560.0).unwrap());
    }

    #[test]
    fn above_gap_is_domain_error() {
        let e = afro().index(0.0, 780.0).unwrap_err();
        assert!(matches!(e, Error::Domain { .. }));
    }

    #[test]
    fn table_reproduces_knots() {
        let t = TableIndex::from_rows(&[
            (0.17, 1500.0, 3.32),
            (0.17, 1600.0, 3.28),
            (0.28, 1500.0, 3.33),
            (0.28, 1560.0, 3.30),
            (0.28, 1600.0, 3.26),
            (0.17, 1560.0, 3.31),
        ])
        .unwrap();
        assert_eq!(t.index(0.28, 1560.0).unwrap(), 3.30);
        let mid = t.index(0.225, 1580.0).unwrap();
        assert!((mid - 0.5 * (0.5 * (3.31 + 3.28) + 0.5 * (3.30 + 3.26))).abs() < 1e-12);
        assert!(t.index(0.5, 1560.0).is_err());
    }

    #[test]
    fn wavevector_regimes() {
        assert_eq!(transverse_wavevector(3.0, 3.0, 1560.0), c(0.0));
        let k = transverse_wavevector(3.0, 0.0, 1560.0);
        assert!((k.re - 2.0 * PI / 1560.0 * 3.0).abs() < 1e-15 && k.im == 0.0);
        let k = transverse_wavevector(3.0, 3.2, 1560.0);
        assert!(k.re == 0.0 && (k.im - 2.0 * PI / 1560.0 * (3.2f64 * 3.2 - 9.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_thickness_cell_is_identity() {
        let mut wg = LayeredWaveguide::reference_design();
        wg.a_nm = 0.0;
        wg.b_nm = 0.0;
        for pol in [Polarization::TE, Polarization::TM] {
            let m = unit_cell_matrix(pol, 1560.0, 3.1, &wg, &afro()).unwrap();
            assert!((m - Matrix2::identity()).norm() < 1e-15);
        }
    }

    #[test]
    fn cell_matches_explicit_product() {
        let wg = LayeredWaveguide::reference_design();
        let m = unit_cell_matrix(Polarization::TE, 1560.0, 3.1, &wg, &afro()).unwrap();
        let na = afro().index(0.28, 1560.0).unwrap();
        let nb = afro().index(0.72, 1560.0).unwrap();
        let k0 = 2.0 * PI / 1560.0;
        // both layers propagate at n_eff = 3.1 > n_b? n_b ≈ 3.02, so b is evanescent
        let ka = k0 * (na * na - 3.1f64.powi(2)).sqrt();
        let qb = k0 * (3.1f64.powi(2) - nb * nb).sqrt();
        // real-arithmetic layer a, hyperbolic layer b (k_b = i q_b)
        let (ca, sa) = ((ka * 127.0).cos(), (ka * 127.0).sin());
        let (cb, sb) = ((qb * 622.0).cosh(), (qb * 622.0).sinh());
        // M_a rows: [ca, sa], [-(ka/kb) sa, (ka/kb) ca] with ka/kb = -i ka/qb
        let ra = Complex64::new(0.0, -ka / qb);
        let ma = Matrix2::new(c(ca), c(sa), -ra * sa, ra * ca);
        // M_b rows: [cosh, i sinh], [-(kb/ka) i sinh, (kb/ka) cosh] with kb/ka = i qb/ka
        let rb = Complex64::new(0.0, qb / ka);
        let i = Complex64::new(0.0, 1.0);
        let mb = Matrix2::new(c(cb), i * sb, -rb * i * sb, rb * cb);
        assert!((m - mb * ma).norm() < 1e-9 * m.norm());
    }

    #[test]
    fn bloch_factor_branches() {
        let cell = |h: f64| {
            // unimodular matrix with trace 2h
            Matrix2::new(c(h), c(1.0), c(h * h - 1.0), c(h))
        };
        assert!((bloch_factor(&cell(1.0)).unwrap() - 1.0).norm() < 1e-12);
        let z = bloch_factor(&cell(0.3)).unwrap();
        assert!((z.norm() - 1.0).abs() < 1e-12);
        let z = bloch_factor(&cell(2.0)).unwrap();
        assert!((z - (2.0 - 3f64.sqrt())).norm() < 1e-12);
        let bad = Matrix2::new(c(2.0), c(0.0), c(0.0), c(2.0));
        assert!(matches!(bloch_factor(&bad), Err(Error::Determinant { .. })));
    }

    #[test]
    fn reference_design_modes() {
        let wg = LayeredWaveguide::reference_design();
        let m = afro();
        let opts = SolverOptions::default();
        let pump = solve_modes(780.08, Polarization::TE, &wg, &m, default_window(&wg, &m, 780.08).unwrap(), &opts).unwrap();
        assert!(pump.iter().any(|s| s.class == ModeClass::Brw));
        for pol in [Polarization::TE, Polarization::TM] {
            let w = default_window(&wg, &m, 1560.16).unwrap();
            let modes = solve_modes(1560.16, pol, &wg, &m, w, &opts).unwrap();
            assert!(modes.iter().any(|s| s.class == ModeClass::Tir), "{pol:?}");
            for s in &modes {
                let r = dispersion_residual(s.n_eff, 1560.16, pol, &wg, &m, opts.tm_parity).unwrap().value().unwrap();
                assert!(r.abs() < 1e-10);
                assert!(s.bloch.norm() <= 1.0 + 1e-12);
            }
            assert!(modes.windows(2).all(|w| w[0].n_eff >= w[1].n_eff));
        }
    }

    #[test]
    fn empty_window_gives_no_modes() {
        let wg = LayeredWaveguide::reference_design();
        let modes = solve_modes(1560.0, Polarization::TE, &wg, &afro(), (3.0, 3.0), &SolverOptions::default()).unwrap();
        assert!(modes.is_empty());
    }

    #[test]
    fn residual_changes_sign_in_scan() {
        let wg = LayeredWaveguide::reference_design();
        for pol in [Polarization::TE, Polarization::TM] {
            let vals: Vec<f64> = (0..2000)
                .filter_map(|i| {
                    dispersion_residual(3.0 + 0.25 * i as f64 / 2000.0, 1560.0, pol, &wg, &afro(), TmParity::Even)
                        .unwrap()
                        .value()
                })
                .collect();
            assert!(vals.windows(2).any(|w| w[0] * w[1] < 0.0), "{pol:?}");
        }
    }

    #[test]
    fn profiles_are_symmetric_continuous_and_floquet() {
        let wg = LayeredWaveguide::reference_design();
        let m = afro();
        let opts = SolverOptions::default();
        for (l, pol) in [(780.08, Polarization::TE), (1560.16, Polarization::TE), (1560.16, Polarization::TM)] {
            let modes = solve_modes(l, pol, &wg, &m, default_window(&wg, &m, l).unwrap(), &opts).unwrap();
            for mode in modes {
                let f = ModeField::new(&mode, &wg, &m).unwrap();
                assert!(f.interface_mismatch() < 1e-9, "{:?} {}", pol, f.interface_mismatch());
                assert!(f.floquet_error() < 1e-8, "{:?} {}", pol, f.floquet_error());
                let p = field_profile(&mode, &wg, &m, 1.0).unwrap();
                let n = p.field.len();
                for k in 0..n / 2 {
                    assert_eq!(p.field[k], p.field[n - 1 - k]);
                }
                assert!((p.field.iter().fold(0.0f64, |a, v| a.max(v.abs())) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stale_mode_is_rejected() {
        let wg = LayeredWaveguide::reference_design();
        let mode = ModeSolution {
            polarization: Polarization::TE,
            lambda_nm: 1560.0,
            n_eff: 3.1,
            class: ModeClass::Tir,
            bloch: c(0.5),
            parity: TmParity::Even,
        };
        assert!(matches!(field_profile(&mode, &wg, &afro(), 1.0), Err(Error::StaleMode { .. })));
    }

    fn gaussian(center: f64, width: f64) -> FieldProfile {
        let x: Vec<f64> = (-400..=400).map(|i| i as f64).collect();
        FieldProfile {
            polarization: Polarization::TE,
            lambda_nm: 1560.0,
            n_eff: 3.0,
            class: ModeClass::Tir,
            field: x.iter().map(|v| (-((v - center) / width).powi(2)).exp()).collect(),
            x_nm: x,
        }
    }

    #[test]
    fn overlap_shift_and_parity() {
        let g = gaussian(0.0, 60.0);
        let same = modal_overlap(&g, &g, &g).unwrap();
        assert!((same - 1.0).abs() < 1e-12);
        let shifted = modal_overlap(&g, &gaussian(230.0, 60.0), &g).unwrap();
        assert!(shifted < same);
        let mut odd = g.clone();
        odd.field = g.x_nm.iter().zip(&g.field).map(|(x, f)| x * f).collect();
        assert!(modal_overlap(&odd, &g, &g).unwrap() < 1e-12);
    }

    #[test]
    fn overlap_resamples_mismatched_grids() {
        let g = gaussian(0.0, 60.0);
        let mut h = g.clone();
        h.x_nm = h.x_nm.iter().step_by(2).copied().collect();
        h.field = h.field.iter().step_by(2).copied().collect();
        let v = modal_overlap(&g, &h, &g).unwrap();
        assert!((v - 1.0).abs() < 1e-3);
        let mut far = g.clone();
        far.x_nm.iter_mut().for_each(|x| *x += 10_000.0);
        assert!(matches!(modal_overlap(&g, &far, &g), Err(Error::Shape(_))));
    }

    #[test]
    fn reference_overlap_near_expected_value() {
        let r = type2_overlap(&LayeredWaveguide::reference_design(), &afro(), 780.08, &SolverOptions::default(), 1.0).unwrap();
        assert!((r.overlap - 0.1557).abs() < 0.02, "{}", r.overlap);
    }
}
