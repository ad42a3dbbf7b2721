//! Variance-based global sensitivity indices computed directly from PC
//! coefficients.
//!
//! With independent inputs, the multi-index support of each term decides
//! where its variance share c_k^2 <Psi_k^2> lands: terms supported on a
//! single dimension feed the first-order index of that dimension, terms
//! supported on exactly a pair feed that pair's second-order index, every
//! term touching dimension i feeds its total index, and every term with
//! more than one active dimension feeds the aggregate interaction ("mixed")
//! index. Dividing by the total variance makes the shares indices.
//!
//! Joint indices of three or more inputs are not itemized; their aggregate
//! is available as T_mix minus the sum of second-order indices.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::projection::PcSurrogate;
use crate::util::{fmt_g17, KahanSum};

/// First, second, total, and mixed indices per output column.
///
/// Zero-variance columns have no defined indices; they are flagged in
/// `defined` and their entries are NaN rather than fabricated zeros.
#[derive(Debug, Clone)]
pub struct SensitivityReport {
    pub dim: usize,
    pub output_labels: Vec<String>,
    /// d x M first-order indices, row-major by dimension.
    pub first: Vec<f64>,
    /// Dimension pairs (i, j), i < j, indexing the rows of `second`.
    pub pairs: Vec<(usize, usize)>,
    /// (d choose 2) x M second-order indices, row-major by pair.
    pub second: Vec<f64>,
    /// d x M total indices.
    pub total: Vec<f64>,
    /// Length-M aggregate interaction index.
    pub mixed: Vec<f64>,
    /// Length-M total variance.
    pub variance: Vec<f64>,
    /// Length-M flag: false where variance is zero and indices are undefined.
    pub defined: Vec<bool>,
}

impl SensitivityReport {
    pub fn n_outputs(&self) -> usize {
        self.output_labels.len()
    }

    pub fn first_index(&self, dim: usize, output: usize) -> f64 {
        self.first[dim * self.n_outputs() + output]
    }

    pub fn second_index(&self, pair: usize, output: usize) -> f64 {
        self.second[pair * self.n_outputs() + output]
    }

    pub fn total_index(&self, dim: usize, output: usize) -> f64 {
        self.total[dim * self.n_outputs() + output]
    }

    /// One row per output label: S_1..S_d, S_ij pairs, T_1..T_d, T_mix,
    /// variance, defined flag.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label");
        for i in 1..=self.dim {
            out.push_str(&format!(",S_{i}"));
        }
        for &(i, j) in &self.pairs {
            out.push_str(&format!(",S_{}{}", i + 1, j + 1));
        }
        for i in 1..=self.dim {
            out.push_str(&format!(",T_{i}"));
        }
        out.push_str(",T_mix,variance,defined\n");
        for (m, label) in self.output_labels.iter().enumerate() {
            out.push_str(label);
            for i in 0..self.dim {
                out.push(',');
                out.push_str(&fmt_g17(self.first_index(i, m)));
            }
            for p in 0..self.pairs.len() {
                out.push(',');
                out.push_str(&fmt_g17(self.second_index(p, m)));
            }
            for i in 0..self.dim {
                out.push(',');
                out.push_str(&fmt_g17(self.total_index(i, m)));
            }
            out.push(',');
            out.push_str(&fmt_g17(self.mixed[m]));
            out.push(',');
            out.push_str(&fmt_g17(self.variance[m]));
            out.push(',');
            out.push_str(if self.defined[m] { "true" } else { "false" });
            out.push('\n');
        }
        out
    }
}

/// How one basis term contributes to the decomposition.
enum TermClass {
    Constant,
    Single(usize),
    /// Active pair (i, j) with its row in the pair list.
    Pair(usize, usize, usize),
    /// Three or more active dimensions.
    Higher(Vec<usize>),
}

/// Sobol' indices of every output column of a direct (non-log) surrogate.
///
/// Indices of a log-transformed expansion would describe ln X, not X, so log
/// surrogates are rejected; project the quantity directly for sensitivity
/// work.
pub fn sobol_indices(surrogate: &PcSurrogate) -> Result<SensitivityReport> {
    if surrogate.is_log_transformed() {
        return Err(Error::SensitivityOfLogSurrogate);
    }
    let basis = surrogate.basis();
    let d = basis.dim();
    let m = surrogate.n_outputs();
    let norms = basis.norms();

    let mut pairs = Vec::new();
    let mut pair_row = vec![usize::MAX; d * d];
    for i in 0..d {
        for j in (i + 1)..d {
            pair_row[i * d + j] = pairs.len();
            pairs.push((i, j));
        }
    }
    let classes: Vec<TermClass> = basis
        .terms()
        .iter()
        .map(|mi| {
            let support: Vec<usize> = mi.support().collect();
            match support.len() {
                0 => TermClass::Constant,
                1 => TermClass::Single(support[0]),
                2 => TermClass::Pair(
                    support[0],
                    support[1],
                    pair_row[support[0] * d + support[1]],
                ),
                _ => TermClass::Higher(support),
            }
        })
        .collect();

    let n_pairs = pairs.len();
    let columns: Vec<ColumnIndices> = (0..m)
        .into_par_iter()
        .map(|col| {
            let mut variance = KahanSum::new();
            let mut first = vec![0.0; d];
            let mut second = vec![0.0; n_pairs];
            let mut total = vec![0.0; d];
            let mut mixed = 0.0;
            for (k, class) in classes.iter().enumerate() {
                let share = {
                    let c = surrogate.coeff(k, col);
                    c * c * norms[k]
                };
                match class {
                    TermClass::Constant => {}
                    TermClass::Single(i) => {
                        variance.add(share);
                        first[*i] += share;
                        total[*i] += share;
                    }
                    TermClass::Pair(i, j, row) => {
                        variance.add(share);
                        second[*row] += share;
                        total[*i] += share;
                        total[*j] += share;
                        mixed += share;
                    }
                    TermClass::Higher(support) => {
                        variance.add(share);
                        for &i in support {
                            total[i] += share;
                        }
                        mixed += share;
                    }
                }
            }
            let var = variance.value();
            if var <= 0.0 {
                return ColumnIndices {
                    variance: 0.0,
                    defined: false,
                    first: vec![f64::NAN; d],
                    second: vec![f64::NAN; n_pairs],
                    total: vec![f64::NAN; d],
                    mixed: f64::NAN,
                };
            }
            for v in first.iter_mut().chain(&mut second).chain(&mut total) {
                *v /= var;
            }
            ColumnIndices {
                variance: var,
                defined: true,
                first,
                second,
                total,
                mixed: mixed / var,
            }
        })
        .collect();

    let mut report = SensitivityReport {
        dim: d,
        output_labels: surrogate.output_labels().to_vec(),
        first: vec![f64::NAN; d * m],
        pairs,
        second: vec![f64::NAN; n_pairs * m],
        total: vec![f64::NAN; d * m],
        mixed: vec![f64::NAN; m],
        variance: vec![0.0; m],
        defined: vec![false; m],
    };
    for (col, c) in columns.into_iter().enumerate() {
        report.variance[col] = c.variance;
        report.defined[col] = c.defined;
        report.mixed[col] = c.mixed;
        for i in 0..d {
            report.first[i * m + col] = c.first[i];
            report.total[i * m + col] = c.total[i];
        }
        for p in 0..n_pairs {
            report.second[p * m + col] = c.second[p];
        }
    }
    Ok(report)
}

struct ColumnIndices {
    variance: f64,
    defined: bool,
    first: Vec<f64>,
    second: Vec<f64>,
    total: Vec<f64>,
    mixed: f64,
}

/// Time-series variant: identical decomposition, with the surrogate's output
/// labels (time stamps) carried through so index trajectories can be plotted
/// against time.
pub fn sensitivity_timeseries(surrogate: &PcSurrogate) -> Result<SensitivityReport> {
    sobol_indices(surrogate)
}
