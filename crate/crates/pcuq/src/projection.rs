//! Non-intrusive spectral projection: PC coefficients from model evaluations
//! at quadrature nodes, coefficient moments, and cross-validated relative L2
//! errors.
//!
//! Each coefficient is the quadrature approximation of <X Psi_k> divided by
//! the analytic norm <Psi_k^2>. The log variant projects ln(X) and evaluates
//! as exp of the expansion, which keeps the reconstructed quantity strictly
//! positive. All quadrature sums use compensated accumulation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::basis::{MultiIndex, PcBasis, PolyFamily};
use crate::error::{Error, Result};
use crate::quadrature::{check_discrete_orthogonality, OrthogonalityReport, QuadratureRule};
use crate::util::{atomic_write, KahanSum};

/// Deviation above which projection reports that the rule does not preserve
/// discrete orthogonality of the basis. A warning, not an error: the caller
/// may knowingly run an under-resolved grid.
pub const ORTHOGONALITY_WARN_TOL: f64 = 1e-8;

/// Model outputs evaluated at the nodes of a quadrature rule.
///
/// Rows follow the rule's node ordering; columns are output indices (time
/// labels, spatial cells, or scalar QoIs).
#[derive(Debug, Clone)]
pub struct EvaluationTable {
    rule_fingerprint: u64,
    n_rows: usize,
    n_outputs: usize,
    /// Row-major N_q x M.
    outputs: Vec<f64>,
    output_labels: Vec<String>,
}

impl EvaluationTable {
    /// Bind a row-major output matrix to `rule`. Rejects row-count mismatch
    /// and non-finite entries.
    pub fn new(
        rule: &QuadratureRule,
        outputs: Vec<f64>,
        output_labels: Vec<String>,
    ) -> Result<Self> {
        let n_outputs = output_labels.len();
        if n_outputs == 0 || outputs.len() % n_outputs != 0 {
            return Err(Error::Protocol(format!(
                "output matrix of {} values is not divisible into {} labeled columns",
                outputs.len(),
                n_outputs
            )));
        }
        let n_rows = outputs.len() / n_outputs;
        if n_rows != rule.len() {
            return Err(Error::RowCountMismatch {
                rows: n_rows,
                nodes: rule.len(),
            });
        }
        for (i, &v) in outputs.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    row: i / n_outputs,
                    col: i % n_outputs,
                });
            }
        }
        Ok(Self {
            rule_fingerprint: rule.fingerprint(),
            n_rows,
            n_outputs,
            outputs,
            output_labels,
        })
    }

    /// Evaluate `model` at every node of `rule`.
    pub fn from_model<F>(
        rule: &QuadratureRule,
        output_labels: Vec<String>,
        model: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64> + Sync,
    {
        let m = output_labels.len();
        let nodes: Vec<&[f64]> = (0..rule.len()).map(|j| rule.node(j)).collect();
        let mut outputs = vec![0.0; rule.len() * m];
        outputs
            .par_chunks_mut(m)
            .zip(nodes.par_iter())
            .for_each(|(row, node)| {
                let values = model(node);
                row.copy_from_slice(&values);
            });
        Self::new(rule, outputs, output_labels)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn output_labels(&self) -> &[String] {
        &self.output_labels
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.outputs[j * self.n_outputs..(j + 1) * self.n_outputs]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.outputs[row * self.n_outputs + col]
    }

    pub fn rule_fingerprint(&self) -> u64 {
        self.rule_fingerprint
    }

    /// Verify this table was built against `rule`.
    pub fn check_rule(&self, rule: &QuadratureRule) -> Result<()> {
        if self.rule_fingerprint != rule.fingerprint() || self.n_rows != rule.len() {
            return Err(Error::RuleMismatch);
        }
        Ok(())
    }
}

/// Truncated PC expansion of a (possibly vector-valued) model response.
#[derive(Debug, Clone)]
pub struct PcSurrogate {
    basis: PcBasis,
    /// Row-major (P+1) x M coefficients.
    coeffs: Vec<f64>,
    log_transformed: bool,
    output_labels: Vec<String>,
}

/// Per-output mean and variance read directly off the coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

impl PcSurrogate {
    /// Assemble a surrogate from raw parts; coefficient layout is
    /// term-major (P+1) x M.
    pub fn from_parts(
        basis: PcBasis,
        coeffs: Vec<f64>,
        log_transformed: bool,
        output_labels: Vec<String>,
    ) -> Result<Self> {
        if coeffs.len() != basis.len() * output_labels.len() {
            return Err(Error::Protocol(format!(
                "coefficient matrix has {} entries, expected {} terms x {} outputs",
                coeffs.len(),
                basis.len(),
                output_labels.len()
            )));
        }
        Ok(Self {
            basis,
            coeffs,
            log_transformed,
            output_labels,
        })
    }

    pub fn basis(&self) -> &PcBasis {
        &self.basis
    }

    pub fn is_log_transformed(&self) -> bool {
        self.log_transformed
    }

    pub fn n_outputs(&self) -> usize {
        self.output_labels.len()
    }

    pub fn output_labels(&self) -> &[String] {
        &self.output_labels
    }

    /// Coefficient c_k for output m.
    pub fn coeff(&self, k: usize, m: usize) -> f64 {
        self.coeffs[k * self.n_outputs() + m]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Evaluate all outputs at a canonical point.
    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_outputs()];
        let mut psi = vec![0.0; self.basis.len()];
        self.eval_into(point, &mut psi, &mut out)?;
        Ok(out)
    }

    /// Evaluation with caller-provided scratch (`psi`, length P+1) and output
    /// buffers; the hot path for samplers.
    pub fn eval_into(&self, point: &[f64], psi: &mut [f64], out: &mut [f64]) -> Result<()> {
        self.basis.eval_into(point, psi)?;
        let m = self.n_outputs();
        out.fill(0.0);
        for (k, &pk) in psi.iter().enumerate() {
            let row = &self.coeffs[k * m..(k + 1) * m];
            for (o, &c) in out.iter_mut().zip(row) {
                *o += pk * c;
            }
        }
        if self.log_transformed {
            for o in out.iter_mut() {
                *o = o.exp();
            }
        }
        Ok(())
    }

    /// Evaluate a single output column at a canonical point.
    pub fn eval_output(&self, point: &[f64], output: usize, psi: &mut [f64]) -> Result<f64> {
        self.basis.eval_into(point, psi)?;
        let m = self.n_outputs();
        let mut acc = 0.0;
        for (k, &pk) in psi.iter().enumerate() {
            acc += pk * self.coeffs[k * m + output];
        }
        Ok(if self.log_transformed { acc.exp() } else { acc })
    }

    /// Mean and variance per output from the coefficients: mean is c_0 and
    /// the variance is the norm-weighted sum of squared higher coefficients.
    ///
    /// Not defined for log-transformed surrogates (the coefficients describe
    /// ln X, not X); those go through the sampling path in `analysis`.
    pub fn moments(&self) -> Result<Vec<Moments>> {
        if self.log_transformed {
            return Err(Error::MomentsOfLogSurrogate);
        }
        let m = self.n_outputs();
        let norms = self.basis.norms();
        Ok((0..m)
            .map(|col| {
                let mut var = KahanSum::new();
                for k in 1..self.basis.len() {
                    let c = self.coeff(k, col);
                    var.add(c * c * norms[k]);
                }
                Moments {
                    mean: self.coeff(0, col),
                    variance: var.value().max(0.0),
                }
            })
            .collect())
    }

    /// Write the expansion archive (JSON) atomically.
    pub fn write_archive(&self, path: &Path) -> Result<()> {
        let archive = ExpansionArchive::from_surrogate(self);
        let bytes = serde_json::to_vec_pretty(&archive)?;
        atomic_write(path, &bytes)?;
        Ok(())
    }

    /// Read an expansion archive written by [`PcSurrogate::write_archive`].
    pub fn read_archive(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let archive: ExpansionArchive = serde_json::from_slice(&bytes)?;
        archive.into_surrogate()
    }
}

/// Serialized form of a surrogate. The multi-index list is stored explicitly
/// so the file is self-describing, and is re-derived and cross-checked on
/// load: coefficient ordering is part of the format.
#[derive(Debug, Serialize, Deserialize)]
struct ExpansionArchive {
    basis: ArchiveBasis,
    log_transformed: bool,
    output_labels: Vec<String>,
    /// Row-major (P+1) x M.
    coeffs: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArchiveBasis {
    dim: usize,
    order: usize,
    families: Vec<PolyFamily>,
    multi_indices: Vec<MultiIndex>,
}

impl ExpansionArchive {
    fn from_surrogate(s: &PcSurrogate) -> Self {
        Self {
            basis: ArchiveBasis {
                dim: s.basis.dim(),
                order: s.basis.order(),
                families: s.basis.families().to_vec(),
                multi_indices: s.basis.terms().to_vec(),
            },
            log_transformed: s.log_transformed,
            output_labels: s.output_labels.clone(),
            coeffs: s.coeffs.clone(),
        }
    }

    fn into_surrogate(self) -> Result<PcSurrogate> {
        let basis = PcBasis::new(self.basis.dim, self.basis.order, self.basis.families)?;
        if basis.terms() != self.basis.multi_indices.as_slice() {
            return Err(Error::Archive(
                "multi-index list does not match the canonical graded-lexicographic ordering"
                    .into(),
            ));
        }
        for (i, &c) in self.coeffs.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::Archive(format!(
                    "non-finite coefficient at index {i}"
                )));
            }
        }
        PcSurrogate::from_parts(basis, self.coeffs, self.log_transformed, self.output_labels)
    }
}

/// Result of a projection: the surrogate plus the discrete-orthogonality
/// report for the (basis, rule) pair that produced it.
#[derive(Debug, Clone)]
pub struct Projection {
    pub surrogate: PcSurrogate,
    pub orthogonality: OrthogonalityReport,
}

/// Project `table` onto `basis` using the quadrature rule that generated it.
///
/// With `log_transform`, the natural log of each output is projected instead
/// and the surrogate evaluates as exp of the expansion. Outputs must then be
/// strictly positive.
pub fn project(
    table: &EvaluationTable,
    rule: &QuadratureRule,
    basis: &PcBasis,
    log_transform: bool,
) -> Result<Projection> {
    table.check_rule(rule)?;
    if basis.dim() != rule.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: rule.dim(),
        });
    }
    if log_transform {
        for row in 0..table.n_rows() {
            for col in 0..table.n_outputs() {
                let v = table.value(row, col);
                if v <= 0.0 {
                    return Err(Error::NonPositiveOutput { row, col, value: v });
                }
            }
        }
    }
    let orthogonality = check_discrete_orthogonality(basis, rule, ORTHOGONALITY_WARN_TOL)?;

    let n_terms = basis.len();
    let n_outputs = table.n_outputs();
    let n_nodes = rule.len();

    // Basis values at every node, reused across output columns.
    let mut design = vec![0.0; n_nodes * n_terms];
    for j in 0..n_nodes {
        basis.eval_into(rule.node(j), &mut design[j * n_terms..(j + 1) * n_terms])?;
    }

    // One independent accumulation per output column.
    let columns: Vec<Vec<f64>> = (0..n_outputs)
        .into_par_iter()
        .map(|col| {
            let mut acc = vec![KahanSum::new(); n_terms];
            for j in 0..n_nodes {
                let y = table.value(j, col);
                let y = if log_transform { y.ln() } else { y };
                let wy = rule.weights()[j] * y;
                let psi = &design[j * n_terms..(j + 1) * n_terms];
                for (a, &p) in acc.iter_mut().zip(psi) {
                    a.add(wy * p);
                }
            }
            acc.iter()
                .zip(basis.norms())
                .map(|(a, &norm)| a.value() / norm)
                .collect()
        })
        .collect();
    let mut coeffs = vec![0.0; n_terms * n_outputs];
    for (col, column) in columns.iter().enumerate() {
        for (k, &c) in column.iter().enumerate() {
            coeffs[k * n_outputs + col] = c;
        }
    }

    let surrogate = PcSurrogate::from_parts(
        basis.clone(),
        coeffs,
        log_transform,
        table.output_labels().to_vec(),
    )?;
    Ok(Projection {
        surrogate,
        orthogonality,
    })
}

/// Relative L2 errors of a surrogate against an independent evaluation table,
/// estimated by quadrature on the validation rule.
///
/// `fit_space` is the error in the space the expansion was fit in (log space
/// for log surrogates); `physical` is the error of the reconstructed quantity
/// (exp of the expansion for log surrogates). The two coincide for direct
/// projections. The validation grid should not be nested in the construction
/// grid; that property is documented, not enforced.
#[derive(Debug, Clone)]
pub struct RelativeL2 {
    pub fit_space: Vec<f64>,
    pub physical: Vec<f64>,
}

pub fn relative_l2_error(
    surrogate: &PcSurrogate,
    validation: &EvaluationTable,
    validation_rule: &QuadratureRule,
) -> Result<RelativeL2> {
    validation.check_rule(validation_rule)?;
    if surrogate.basis().dim() != validation_rule.dim() {
        return Err(Error::DimensionMismatch {
            expected: surrogate.basis().dim(),
            got: validation_rule.dim(),
        });
    }
    if surrogate.n_outputs() != validation.n_outputs() {
        return Err(Error::DimensionMismatch {
            expected: surrogate.n_outputs(),
            got: validation.n_outputs(),
        });
    }
    if surrogate.is_log_transformed() {
        for row in 0..validation.n_rows() {
            for col in 0..validation.n_outputs() {
                let v = validation.value(row, col);
                if v <= 0.0 {
                    return Err(Error::NonPositiveOutput { row, col, value: v });
                }
            }
        }
    }

    let m = surrogate.n_outputs();
    let n_terms = surrogate.basis().len();
    #[derive(Clone)]
    struct Acc {
        num_fit: KahanSum,
        den_fit: KahanSum,
        num_phys: KahanSum,
        den_phys: KahanSum,
    }
    let mut accs = vec![
        Acc {
            num_fit: KahanSum::new(),
            den_fit: KahanSum::new(),
            num_phys: KahanSum::new(),
            den_phys: KahanSum::new(),
        };
        m
    ];
    let mut psi = vec![0.0; n_terms];
    for j in 0..validation_rule.len() {
        surrogate
            .basis()
            .eval_into(validation_rule.node(j), &mut psi)?;
        let w = validation_rule.weights()[j];
        for (col, acc) in accs.iter_mut().enumerate() {
            let mut pred = 0.0;
            for (k, &pk) in psi.iter().enumerate() {
                pred += pk * surrogate.coeff(k, col);
            }
            let raw = validation.value(j, col);
            if surrogate.is_log_transformed() {
                let fit_ref = raw.ln();
                acc.num_fit.add(w * (fit_ref - pred).powi(2));
                acc.den_fit.add(w * fit_ref * fit_ref);
                let phys_pred = pred.exp();
                acc.num_phys.add(w * (raw - phys_pred).powi(2));
                acc.den_phys.add(w * raw * raw);
            } else {
                acc.num_fit.add(w * (raw - pred).powi(2));
                acc.den_fit.add(w * raw * raw);
            }
        }
    }
    let mut fit_space = Vec::with_capacity(m);
    let mut physical = Vec::with_capacity(m);
    for (col, acc) in accs.iter().enumerate() {
        let den = acc.den_fit.value();
        if den <= 0.0 {
            return Err(Error::ZeroDenominator {
                label: validation.output_labels()[col].clone(),
            });
        }
        let e_fit = (acc.num_fit.value() / den).max(0.0).sqrt();
        fit_space.push(e_fit);
        if surrogate.is_log_transformed() {
            let den_p = acc.den_phys.value();
            if den_p <= 0.0 {
                return Err(Error::ZeroDenominator {
                    label: validation.output_labels()[col].clone(),
                });
            }
            physical.push((acc.num_phys.value() / den_p).max(0.0).sqrt());
        } else {
            physical.push(e_fit);
        }
    }
    Ok(RelativeL2 {
        fit_space,
        physical,
    })
}
