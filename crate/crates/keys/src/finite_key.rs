//! Finite-size secure key length: the composable security budget split
//! into correctness, parameter estimation and privacy amplification terms,
//! and a deterministic optimizer over the free parameters.

use serde::{Deserialize, Serialize};

use crate::error::{KeyError, Result};

pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// Correctness exponent t with 2^−t = 10^−(s+2).
pub fn correctness_exponent(s: f64) -> f64 {
    (s + 2.0) * 10f64.log2()
}

/// Form of the parameter-estimation term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EstimationForm {
    /// Both exponents exactly as typeset. The first exponent stays O(1)
    /// and the bracket multiplies the second term, so the value exceeds 1
    /// at any practical block length.
    #[default]
    AsPrinted,
    /// m² in the first exponent and the bracket moved inside the second
    /// exponent, which makes both terms decay with m.
    Regrouped,
}

/// Form of the privacy-amplification term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AmplificationForm {
    #[default]
    AsPrinted,
    /// Uses h2(Ē + ν) for the phase-error entropy.
    SlackShifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Formulas {
    pub estimation: EstimationForm,
    pub amplification: AmplificationForm,
}

impl Formulas {
    pub fn regrouped() -> Self {
        Self {
            estimation: EstimationForm::Regrouped,
            amplification: AmplificationForm::SlackShifted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteKeyParams {
    /// Sifted key length in bits.
    pub m: u64,
    pub qber: f64,
    pub alpha: f64,
    pub beta: f64,
    pub nu: f64,
    pub xi: f64,
    /// Security exponent: the total failure budget is 10^−s.
    pub s: f64,
    /// Reconciliation efficiency.
    pub f: f64,
}

impl FiniteKeyParams {
    pub fn t(&self) -> f64 {
        correctness_exponent(self.s)
    }

    /// Bits left after sacrificing the estimation sample.
    pub fn n(&self) -> u64 {
        ((1.0 - self.beta) * self.m as f64).round() as u64
    }

    pub fn l(&self) -> u64 {
        (self.alpha * self.m as f64).floor() as u64
    }

    pub fn eps_qkd(&self) -> f64 {
        10f64.powf(-self.s)
    }

    /// 0 < ξ < ν < 1/2 − Ē together with 0 < α, β < 1.
    pub fn in_range(&self) -> bool {
        0.0 < self.alpha
            && self.alpha < 1.0
            && 0.0 < self.beta
            && self.beta < 1.0
            && 0.0 < self.xi
            && self.xi < self.nu
            && self.nu < 0.5 - self.qber
    }
}

pub fn eps_pe(m: u64, beta: f64, nu: f64, xi: f64, qber: f64, form: EstimationForm) -> Result<f64> {
    let m = m as f64;
    let k = m * (qber + xi);
    let tail = 1.0 / (k + 1.0) + 1.0 / (m - k + 1.0);
    let spread = m * m * (1.0 - beta).powi(2) * (nu - xi).powi(2) - 1.0;
    let radicand = match form {
        EstimationForm::AsPrinted => {
            (-2.0 * m * beta * xi * xi / (m * (1.0 - beta) + 1.0)).exp() + (-2.0 * tail).exp() * spread
        }
        EstimationForm::Regrouped => {
            (-2.0 * m * m * beta * xi * xi / (m * (1.0 - beta) + 1.0)).exp() + (-2.0 * tail * spread).exp()
        }
    };
    if radicand < 0.0 {
        return Err(KeyError::FormulaDomain(radicand));
    }
    Ok(radicand.sqrt())
}

/// log2 of the quantity under the square root, without the key length.
fn amplification_exponent(n: u64, qber: f64, nu: f64, f: f64, t: f64, form: AmplificationForm) -> f64 {
    let n = n as f64;
    let phase = match form {
        AmplificationForm::AsPrinted => qber,
        AmplificationForm::SlackShifted => (qber + nu).min(0.5),
    };
    -n * (1.0 - binary_entropy(phase)) + f * binary_entropy(qber) * n + t
}

pub fn eps_pa(n: u64, qber: f64, nu: f64, f: f64, t: f64, l: u64, form: AmplificationForm) -> f64 {
    0.5 * (amplification_exponent(n, qber, nu, f, t, form) + l as f64).exp2().sqrt()
}

/// Security inequality plus the parameter ranges. A domain failure of
/// the estimation term counts as insecure.
pub fn is_secure(p: &FiniteKeyParams, forms: Formulas) -> bool {
    if !p.in_range() || !(p.qber >= 0.0 && p.qber < 0.5) {
        return false;
    }
    let Ok(pe) = eps_pe(p.m, p.beta, p.nu, p.xi, p.qber, forms.estimation) else {
        return false;
    };
    let pa = eps_pa(p.n(), p.qber, p.nu, p.f, p.t(), p.l(), forms.amplification);
    (-p.t()).exp2() + 2.0 * pe + pa <= p.eps_qkd()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub l: u64,
    pub params: FiniteKeyParams,
    /// Set when no parameter choice yields a positive key length.
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, Copy)]
struct Problem {
    m: u64,
    qber: f64,
    f: f64,
    s: f64,
    forms: Formulas,
}

impl Problem {
    fn nu_max(&self) -> f64 {
        0.5 - self.qber
    }

    fn params(&self, beta: f64, nu: f64, xi: f64, l: u64) -> FiniteKeyParams {
        FiniteKeyParams {
            m: self.m,
            qber: self.qber,
            alpha: (l as f64 + 0.5) / self.m as f64,
            beta,
            nu,
            xi,
            s: self.s,
            f: self.f,
        }
    }

    /// Largest real l admitted by the budget at (β, ν, ξ), or −∞.
    fn length_bound(&self, beta: f64, nu: f64, xi: f64) -> f64 {
        if !(0.0 < beta && beta < 1.0 && 0.0 < xi && xi < nu && nu < self.nu_max()) {
            return f64::NEG_INFINITY;
        }
        let t = correctness_exponent(self.s);
        let Ok(pe) = eps_pe(self.m, beta, nu, xi, self.qber, self.forms.estimation) else {
            return f64::NEG_INFINITY;
        };
        let budget = 10f64.powf(-self.s) - (-t).exp2() - 2.0 * pe;
        if budget <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let n = ((1.0 - beta) * self.m as f64).round() as u64;
        let x = amplification_exponent(n, self.qber, nu, self.f, t, self.forms.amplification);
        (2.0 * (2.0 * budget).log2() - x).min(self.m as f64 - 1.0)
    }

    /// Integer length at a point, stepped down until the inequality holds
    /// at the returned parameters.
    fn settle(&self, beta: f64, nu: f64, xi: f64) -> Option<(u64, FiniteKeyParams)> {
        let bound = self.length_bound(beta, nu, xi);
        if bound < 1.0 {
            return None;
        }
        let mut l = bound.floor() as u64;
        while l >= 1 {
            let p = self.params(beta, nu, xi, l);
            if is_secure(&p, self.forms) {
                return Some((l, p));
            }
            l -= 1;
        }
        None
    }
}

const GRID: usize = 15;
const ROUNDS: usize = 3;
const SHRINK: f64 = 0.3;
const LINE_POINTS: i32 = 4;

fn geometric(lo: f64, hi: f64, k: usize, points: usize) -> f64 {
    lo * (hi / lo).powf(k as f64 / (points - 1) as f64)
}

/// Maximizes l = ⌊αm⌋ over (α, β, ν, ξ). For fixed (β, ν, ξ) the best α is
/// found in closed form, so the search runs over a 15-point grid per
/// axis in (log β, log ν, ξ/ν), followed by cyclic coordinate refinement.
pub fn optimize_key_length(m: u64, qber: f64, f: f64, s: f64, forms: Formulas) -> Optimum {
    let pb = Problem { m, qber, f, s, forms };
    let infeasible = |why: &str| Optimum {
        l: 0,
        params: pb.params(0.1, 0.0, 0.0, 0),
        diagnostic: Some(why.to_string()),
    };
    if !(0.0..0.5).contains(&qber) || m < 2 {
        return infeasible("empty feasible region: need 0 <= E < 1/2 and m >= 2");
    }
    let (lb_lo, lb_hi) = (1e-4f64.ln(), 0.95f64.ln());
    let (ln_lo, ln_hi) = ((pb.nu_max() * 1e-4).ln(), (pb.nu_max() * (1.0 - 1e-9)).ln());
    let eval = |x: &[f64; 3]| pb.length_bound(x[0].exp(), x[1].exp(), x[2] * x[1].exp());
    let mut best = [lb_lo, ln_lo, 0.5];
    let mut best_val = f64::NEG_INFINITY;
    for i in 0..GRID {
        for j in 0..GRID {
            for k in 1..=GRID {
                let x = [
                    geometric(1e-4, 0.95, i, GRID).ln(),
                    geometric(pb.nu_max() * 1e-4, pb.nu_max() * (1.0 - 1e-9), j, GRID).ln(),
                    k as f64 / (GRID + 1) as f64,
                ];
                let v = eval(&x);
                if v > best_val {
                    best_val = v;
                    best = x;
                }
            }
        }
    }
    if best_val == f64::NEG_INFINITY {
        return infeasible("no grid point satisfies the security budget");
    }
    let bounds = [(lb_lo, lb_hi), (ln_lo, ln_hi), (1e-6, 1.0 - 1e-6)];
    let mut step = [
        (lb_hi - lb_lo) / (GRID - 1) as f64,
        (ln_hi - ln_lo) / (GRID - 1) as f64,
        1.0 / (GRID + 1) as f64,
    ];
    for _ in 0..ROUNDS {
        for _pass in 0..8 {
            let mut moved = false;
            for axis in 0..3 {
                for j in -LINE_POINTS..=LINE_POINTS {
                    let mut x = best;
                    x[axis] = (best[axis] + step[axis] * j as f64 / LINE_POINTS as f64).clamp(bounds[axis].0, bounds[axis].1);
                    let v = eval(&x);
                    if v > best_val {
                        best_val = v;
                        best = x;
                        moved = true;
                    }
                }
            }
            if !moved {
                break;
            }
        }
        step.iter_mut().for_each(|s| *s *= SHRINK);
    }
    let (beta, nu) = (best[0].exp(), best[1].exp());
    match pb.settle(beta, nu, best[2] * nu) {
        Some((l, params)) => Optimum {
            l,
            params,
            diagnostic: None,
        },
        None => infeasible("security budget admits no positive key length"),
    }
}

/// Dense uniform grid over (α, β, ν, ξ) with `points` values per axis,
/// checked directly against the security inequality.
pub fn grid_baseline(m: u64, qber: f64, f: f64, s: f64, forms: Formulas, points: usize) -> u64 {
    let step = 1.0 / (points + 1) as f64;
    let nu_max = 0.5 - qber;
    let mut best = 0;
    for ia in 1..=points {
        for ib in 1..=points {
            for iv in 1..=points {
                for ix in 1..iv {
                    let p = FiniteKeyParams {
                        m,
                        qber,
                        alpha: ia as f64 * step,
                        beta: ib as f64 * step,
                        nu: iv as f64 * step * nu_max,
                        xi: ix as f64 * step * nu_max,
                        s,
                        f,
                    };
                    if p.l() > best && is_secure(&p, forms) {
                        best = p.l();
                    }
                }
            }
        }
    }
    best
}
