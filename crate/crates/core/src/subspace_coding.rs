//! Frequency-bin subspace bookkeeping: coarse-graining of joint spectra and
//! QBER / SNR / concurrence as functions of the number of bin pairs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::spdc_source::{coincidence_rates, RamanPhotons, SourceParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

impl std::fmt::Display for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Basis::Z => "Z",
            Basis::X => "X",
        })
    }
}

/// Coincidences over (signal bin, idler bin), ordered so that energy-matched
/// pairs sit on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCoincidenceMatrix {
    pub basis: Basis,
    pub size: usize,
    /// Row-major, signal bin by idler bin.
    pub counts: Vec<f64>,
    /// Signal-bin center wavelengths, strictly increasing.
    pub labels_nm: Vec<f64>,
    pub integration_s: f64,
}

impl JointCoincidenceMatrix {
    pub fn new(basis: Basis, counts: Vec<f64>, labels_nm: Vec<f64>, integration_s: f64) -> Result<Self> {
        let size = labels_nm.len();
        if size == 0 || counts.len() != size * size {
            return Err(Error::Shape(format!("{} counts for {} labels", counts.len(), size)));
        }
        if counts.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::Shape("counts must be finite and nonnegative".into()));
        }
        if labels_nm.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Shape("labels must be strictly increasing".into()));
        }
        Ok(Self {
            basis,
            size,
            counts,
            labels_nm,
            integration_s,
        })
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.counts[i * self.size + j]
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn diagonal_mass(&self) -> f64 {
        (0..self.size).map(|i| self.at(i, i)).sum()
    }

    /// Mean count of an off-diagonal cell, zero for a 1×1 matrix.
    pub fn off_diagonal_mean(&self) -> f64 {
        if self.size < 2 {
            return 0.0;
        }
        (self.total() - self.diagonal_mass()) / (self.size * (self.size - 1)) as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# basis={} integration_s={}\nlabel_nm", self.basis, self.integration_s);
        for l in &self.labels_nm {
            let _ = write!(s, ",{l}");
        }
        s.push('\n');
        for i in 0..self.size {
            let _ = write!(s, "{}", self.labels_nm[i]);
            for j in 0..self.size {
                let _ = write!(s, ",{}", self.at(i, j));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| Error::Shape("empty matrix file".into()))?;
        let mut basis = None;
        let mut integration_s = None;
        for tok in head.trim_start_matches('#').split_whitespace() {
            match tok.split_once('=') {
                Some(("basis", "Z")) => basis = Some(Basis::Z),
                Some(("basis", "X")) => basis = Some(Basis::X),
                Some(("integration_s", v)) => integration_s = v.parse::<f64>().ok(),
                _ => return Err(Error::Shape(format!("unrecognized header token {tok:?}"))),
            }
        }
        let (Some(basis), Some(integration_s)) = (basis, integration_s) else {
            return Err(Error::Shape("header needs basis and integration_s".into()));
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| Error::Shape(format!("{t:?}: {e}")));
        let labels_line = lines.next().ok_or_else(|| Error::Shape("missing label row".into()))?;
        let labels: Vec<f64> = labels_line.split(',').skip(1).map(num).collect::<Result<_>>()?;
        let mut counts = Vec::with_capacity(labels.len() * labels.len());
        for (i, line) in lines.enumerate() {
            let mut cells = line.split(',');
            let row_label = num(cells.next().unwrap_or(""))?;
            if labels.get(i) != Some(&row_label) {
                return Err(Error::Shape(format!("row {i} label {row_label} does not match column labels")));
            }
            for c in cells {
                counts.push(num(c)?);
            }
        }
        Self::new(basis, counts, labels, integration_s)
    }
}

/// Contiguous equal-size grouping of `fine` bins into `groups`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubspacePartition {
    pub fine: usize,
    pub groups: usize,
}

impl SubspacePartition {
    pub fn new(fine: usize, groups: usize) -> Result<Self> {
        if groups == 0 || fine == 0 || fine % groups != 0 {
            return Err(Error::Partition { fine, coarse: groups });
        }
        Ok(Self { fine, groups })
    }

    pub fn group_size(&self) -> usize {
        self.fine / self.groups
    }

    pub fn group_of(&self, bin: usize) -> usize {
        bin / self.group_size()
    }
}

pub fn coarse_grain(j: &JointCoincidenceMatrix, groups: usize) -> Result<JointCoincidenceMatrix> {
    let part = SubspacePartition::new(j.size, groups)?;
    let mut counts = vec![0.0; groups * groups];
    for r in 0..j.size {
        for c in 0..j.size {
            counts[part.group_of(r) * groups + part.group_of(c)] += j.at(r, c);
        }
    }
    let g = part.group_size();
    let labels = (0..groups).map(|k| j.labels_nm[k * g..(k + 1) * g].iter().sum::<f64>() / g as f64).collect();
    JointCoincidenceMatrix::new(j.basis, counts, labels, j.integration_s)
}

/// Error fraction of one basis from its four outcome counts, ordered
/// (HH, HV, VH, VV) or (DD, DA, AD, AA). The target is |Ψ+⟩, anticorrelated
/// in Z and correlated in X.
pub fn qber_from_counts(basis: Basis, counts: [f64; 4]) -> Result<f64> {
    let total: f64 = counts.iter().sum();
    if !(total > 0.0) {
        return Err(Error::UndefinedQber);
    }
    Ok(match basis {
        Basis::Z => (counts[0] + counts[3]) / total,
        Basis::X => (counts[1] + counts[2]) / total,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceQber {
    /// Count-pooled QBER over all defined subspaces.
    pub pooled: f64,
    pub per_subspace: Vec<Option<f64>>,
    /// Subspaces with no coincidences.
    pub excluded: Vec<usize>,
}

/// QBER of the diagonal subspaces of one basis. The per-cell accidental
/// level is estimated from the off-diagonal cells of the fine matrix; the
/// rest of each diagonal block is signal carrying `e_pol` errors, while
/// accidentals carry errors with weight 1/2.
pub fn subspace_qber_basis(j: &JointCoincidenceMatrix, groups: usize, e_pol: f64) -> Result<SubspaceQber> {
    let part = SubspacePartition::new(j.size, groups)?;
    let floor = j.off_diagonal_mean();
    let g = part.group_size();
    let mut per = Vec::with_capacity(groups);
    let mut excluded = Vec::new();
    let (mut err, mut tot) = (0.0, 0.0);
    for k in 0..groups {
        let bins = k * g..(k + 1) * g;
        let block: f64 = bins.clone().flat_map(|r| bins.clone().map(move |c| (r, c))).map(|(r, c)| j.at(r, c)).sum();
        if block <= 0.0 {
            per.push(None);
            excluded.push(k);
            continue;
        }
        let diag: f64 = bins.clone().map(|r| j.at(r, r)).sum();
        let signal = (diag - g as f64 * floor).clamp(0.0, block);
        let e = signal * e_pol + 0.5 * (block - signal);
        per.push(Some(e / block));
        err += e;
        tot += block;
    }
    if tot <= 0.0 {
        return Err(Error::UndefinedQber);
    }
    Ok(SubspaceQber {
        pooled: err / tot,
        per_subspace: per,
        excluded,
    })
}

/// Pooled (Z, X) QBERs at a division count.
pub fn subspace_qber(
    j_z: &JointCoincidenceMatrix,
    j_x: &JointCoincidenceMatrix,
    groups: usize,
    e_pol: f64,
) -> Result<(SubspaceQber, SubspaceQber)> {
    if j_z.size != j_x.size {
        return Err(Error::Shape("Z and X matrices differ in size".into()));
    }
    Ok((subspace_qber_basis(j_z, groups, e_pol)?, subspace_qber_basis(j_x, groups, e_pol)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Accidentals {
    /// Only bin pairs that carry the same subspace label.
    #[default]
    Matched,
    /// Every bin pair, as in the literal double sum.
    Full,
}

/// Coincidence-model QBER (CC_t e_pol + CC_acc/2)/(CC_t + CC_acc) with
/// e_pol = (1 − V)/2.
pub fn model_qber(
    params: &SourceParams,
    pump_mw: f64,
    raman: RamanPhotons,
    n: usize,
    visibility: f64,
    acc: Accidentals,
) -> f64 {
    let c = coincidence_rates(params, pump_mw, n, raman);
    let a = match acc {
        Accidentals::Matched => c.acc_matched_hz,
        Accidentals::Full => c.acc_full_hz,
    };
    let e_pol = (1.0 - visibility) / 2.0;
    if c.true_hz + a <= 0.0 {
        return 0.5;
    }
    (c.true_hz * e_pol + 0.5 * a) / (c.true_hz + a)
}

pub fn snr(params: &SourceParams, pump_mw: f64, raman: RamanPhotons, n: usize, acc: Accidentals) -> f64 {
    let c = coincidence_rates(params, pump_mw, n, raman);
    let a = match acc {
        Accidentals::Matched => c.acc_matched_hz,
        Accidentals::Full => c.acc_full_hz,
    };
    c.true_hz / a
}

pub fn concurrence_lower_bound(v_z: f64, v_x: f64) -> f64 {
    (v_z + v_x - 1.0).max(0.0)
}

/// Visibility implied by a QBER of the modeled family.
pub fn visibility_from_qber(qber: f64) -> f64 {
    1.0 - 2.0 * qber
}
