//! Batch command-line front end: each subcommand wires one stage of the
//! pipeline and drops plot-ready CSV artifacts plus a run-summary JSON into
//! the output directory.
//!
//! Summaries record the configuration fingerprint, seeds, tool version, and
//! every warning raised during the run (orthogonality deviations, censored
//! QoIs, non-monotone sweeps), so a study directory is self-describing.
//! All artifacts are written atomically; re-running a command with identical
//! inputs and seeds reproduces every byte.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::analysis::{self, GridSpec};
use crate::basis::PcBasis;
use crate::design::{failure_probability, optimal_design, sweep_csv, CanonicalMap, DesignProblem};
use crate::error::{Error, Result};
use crate::models::{self, Distribution, ParameterSpec};
use crate::projection::{self, PcSurrogate};
use crate::quadrature::QuadratureRule;
use crate::sensitivity;
use crate::util::{atomic_write, fmt_g17, fnv1a};

/// Which forward model produces the evaluation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ishigami,
    ToyLeakage,
    /// Evaluations come from an external solver via the results-file
    /// protocol; `evaluate` is unavailable.
    External,
}

/// Study configuration, normally loaded from a JSON file and overridden by
/// command-line flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// Path to a parameter-spec JSON; relative paths resolve against the
    /// config file's directory. Omitted: the built-in spec for the model.
    #[serde(default)]
    pub spec: Option<PathBuf>,
    pub model: ModelKind,
    /// Total-degree basis order p.
    pub order: usize,
    /// Quadrature points per dimension (isotropic).
    pub nq: usize,
    #[serde(default)]
    pub log_transform: bool,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Output time stamps for the time-series model.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    /// Ishigami shape parameters.
    #[serde(default = "default_ishigami_a")]
    pub ishigami_a: f64,
    #[serde(default = "default_ishigami_b")]
    pub ishigami_b: f64,
    /// Arrival threshold for QoI extraction.
    #[serde(default = "default_arrival_threshold")]
    pub arrival_threshold: f64,
}

fn default_seed() -> u64 {
    2024
}

fn default_samples() -> usize {
    1_000_000
}

fn default_ishigami_a() -> f64 {
    7.0
}

fn default_ishigami_b() -> f64 {
    0.1
}

fn default_arrival_threshold() -> f64 {
    models::DEFAULT_ARRIVAL_THRESHOLD
}

impl StudyConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: StudyConfig = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Config(format!("bad config {}: {e}", path.display())))?;
        if let (Some(spec), Some(dir)) = (&config.spec, path.parent()) {
            if spec.is_relative() {
                config.spec = Some(dir.join(spec));
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nq == 0 {
            return Err(Error::Config("nq must be at least 1".into()));
        }
        if self.samples == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        if let Some(times) = &self.times {
            if times.is_empty() {
                return Err(Error::Config("times must not be empty".into()));
            }
        }
        Ok(())
    }

    /// The parameter spec for this study: the configured file, or the
    /// built-in default for the model.
    pub fn parameter_spec(&self) -> Result<ParameterSpec> {
        match &self.spec {
            Some(path) => ParameterSpec::read_json(path),
            None => match self.model {
                ModelKind::Ishigami => Ok(ParameterSpec::ishigami_benchmark()),
                ModelKind::ToyLeakage => Ok(ParameterSpec::leakage_benchmark()),
                ModelKind::External => Err(Error::Config(
                    "external model requires a parameter spec file".into(),
                )),
            },
        }
    }

    pub fn rule(&self, spec: &ParameterSpec) -> Result<QuadratureRule> {
        QuadratureRule::tensor(&spec.families(), &vec![self.nq; spec.dim()])
    }

    pub fn basis(&self, spec: &ParameterSpec) -> Result<PcBasis> {
        PcBasis::new(spec.dim(), self.order, spec.families())
    }

    pub fn times(&self) -> Vec<f64> {
        self.times
            .clone()
            .unwrap_or_else(|| (0..=30).map(|i| 50.0 * i as f64).collect())
    }

    fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        format!("{:016x}", fnv1a(&canonical))
    }
}

/// Machine-readable warning in the run summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Warning {
    pub code: String,
    pub message: String,
}

/// Per-command reproducibility record, written next to the artifacts.
#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    command: &'a str,
    version: &'a str,
    config_fingerprint: String,
    seed: u64,
    samples: usize,
    warnings: &'a [Warning],
    /// Artifact file names relative to the output directory.
    outputs: Vec<String>,
}

/// Context shared by all commands: configuration, output directory, and the
/// warning sink that feeds the run summary.
pub struct Runner {
    pub config: StudyConfig,
    pub out_dir: PathBuf,
    warnings: Vec<Warning>,
}

impl Runner {
    pub fn new(config: StudyConfig, out_dir: PathBuf) -> Result<Self> {
        config.validate()?;
        std::fs::create_dir_all(&out_dir)?;
        Ok(Self {
            config,
            out_dir,
            warnings: Vec::new(),
        })
    }

    pub fn warn(&mut self, code: &str, message: String) {
        self.warnings.push(Warning {
            code: code.into(),
            message,
        });
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    fn write_artifact(&self, name: &str, bytes: &[u8]) -> Result<()> {
        atomic_write(&self.out_dir.join(name), bytes)?;
        Ok(())
    }

    fn finish(&self, command: &str, outputs: Vec<String>) -> Result<()> {
        let summary = RunSummary {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config_fingerprint: self.config.fingerprint(),
            seed: self.config.seed,
            samples: self.config.samples,
            warnings: &self.warnings,
            outputs,
        };
        let name = format!("{command}_summary.json");
        self.write_artifact(&name, &serde_json::to_vec_pretty(&summary)?)?;
        for w in &self.warnings {
            eprintln!("warning[{}]: {}", w.code, w.message);
        }
        Ok(())
    }

    /// `gen-nodes`: write the node table for the configured grid.
    pub fn gen_nodes(&mut self) -> Result<()> {
        let spec = self.config.parameter_spec()?;
        let rule = self.config.rule(&spec)?;
        models::write_nodes_csv(&self.out_dir.join("nodes.csv"), &rule, &spec)?;
        spec.write_json(&self.out_dir.join("spec.json"))?;
        self.finish("gen-nodes", vec!["nodes.csv".into(), "spec.json".into()])
    }

    /// `evaluate`: run the built-in model at the grid nodes and write
    /// results.csv (plus QoI results for the time-series model).
    pub fn evaluate(&mut self, with_qois: bool) -> Result<()> {
        let spec = self.config.parameter_spec()?;
        let rule = self.config.rule(&spec)?;
        let mut outputs = vec!["results.csv".into()];
        let table = match self.config.model {
            ModelKind::Ishigami => {
                models::ishigami_table(&rule, self.config.ishigami_a, self.config.ishigami_b)?
            }
            ModelKind::ToyLeakage => {
                models::toy_leakage_table(&rule, &spec, &self.config.times())?
            }
            ModelKind::External => {
                return Err(Error::Config(
                    "evaluate needs a built-in model; external results come from your solver".into(),
                ))
            }
        };
        self.write_artifact("results.csv", results_csv(&table).as_bytes())?;
        if with_qois {
            if self.config.model != ModelKind::ToyLeakage {
                return Err(Error::Config("QoI extraction needs the time-series model".into()));
            }
            let (qois, censored) = models::toy_leakage_qoi_table(
                &rule,
                &spec,
                &self.config.times(),
                self.config.arrival_threshold,
            )?;
            if censored > 0 {
                self.warn(
                    "censored-qois",
                    format!(
                        "{censored} of {} realizations never crossed the arrival threshold {}; \
                         their arrival times are censored at the horizon",
                        rule.len(),
                        self.config.arrival_threshold
                    ),
                );
            }
            self.write_artifact("results_qois.csv", results_csv(&qois).as_bytes())?;
            outputs.push("results_qois.csv".into());
        }
        self.finish("evaluate", outputs)
    }

    /// `project`: NISP on a results file, writing the expansion archive.
    pub fn project(&mut self, results: &Path) -> Result<()> {
        let spec = self.config.parameter_spec()?;
        let rule = self.config.rule(&spec)?;
        let basis = self.config.basis(&spec)?;
        let table = models::ingest_results_file(results, &rule)?;
        let projection = projection::project(&table, &rule, &basis, self.config.log_transform)?;
        if !projection.orthogonality.pass {
            self.warn(
                "discrete-orthogonality",
                format!(
                    "the nq={} rule does not preserve discrete orthogonality of the order-{} \
                     basis: max deviation {:.3e} exceeds {:.0e}; coefficients alias",
                    self.config.nq,
                    self.config.order,
                    projection.orthogonality.max_deviation,
                    projection.orthogonality.tol
                ),
            );
        }
        projection
            .surrogate
            .write_archive(&self.out_dir.join("expansion.json"))?;
        self.finish("project", vec!["expansion.json".into()])
    }

    /// `validate`: relative L2 error of an expansion against an independent
    /// results file on a lower-resolution (non-nested) grid.
    pub fn validate(
        &mut self,
        expansion: &Path,
        validation_results: &Path,
        validation_nq: usize,
    ) -> Result<()> {
        let spec = self.config.parameter_spec()?;
        let surrogate = PcSurrogate::read_archive(expansion)?;
        let vrule = QuadratureRule::tensor(&spec.families(), &vec![validation_nq; spec.dim()])?;
        if validation_nq == self.config.nq {
            self.warn(
                "nested-validation",
                format!(
                    "validation grid (nq={validation_nq}) is identical to the construction grid; \
                     the error estimate is not a cross validation"
                ),
            );
        }
        let vtable = models::ingest_results_file(validation_results, &vrule)?;
        let errors = projection::relative_l2_error(&surrogate, &vtable, &vrule)?;
        let mut csv = String::from("label,e_rel_fit_space,e_rel_physical\n");
        for (i, label) in surrogate.output_labels().iter().enumerate() {
            csv.push_str(label);
            csv.push(',');
            csv.push_str(&fmt_g17(errors.fit_space[i]));
            csv.push(',');
            csv.push_str(&fmt_g17(errors.physical[i]));
            csv.push('\n');
        }
        self.write_artifact("validation.csv", csv.as_bytes())?;
        self.finish("validate", vec!["validation.csv".into()])
    }

    /// `moments`: coefficient-based mean and variance per output.
    pub fn moments(&mut self, expansion: &Path) -> Result<()> {
        let surrogate = PcSurrogate::read_archive(expansion)?;
        let mut csv = String::from("label,mean,variance\n");
        if surrogate.is_log_transformed() {
            // Coefficient moments describe ln X; report sampled moments of X
            // instead, as the archive's physical quantity.
            self.warn(
                "sampled-moments",
                "expansion is log-transformed; moments estimated by sampling the surrogate"
                    .into(),
            );
            let stats =
                analysis::sample_moments(&surrogate, self.config.samples, self.config.seed)?;
            for (label, (mean, var)) in surrogate.output_labels().iter().zip(stats) {
                csv.push_str(&format!("{label},{},{}\n", fmt_g17(mean), fmt_g17(var)));
            }
        } else {
            for (label, m) in surrogate
                .output_labels()
                .iter()
                .zip(surrogate.moments()?)
            {
                csv.push_str(&format!(
                    "{label},{},{}\n",
                    fmt_g17(m.mean),
                    fmt_g17(m.variance)
                ));
            }
        }
        self.write_artifact("moments.csv", csv.as_bytes())?;
        self.finish("moments", vec!["moments.csv".into()])
    }

    /// `pdf`: KDE density curves for selected output columns.
    pub fn pdf(&mut self, expansion: &Path, labels: Option<Vec<String>>) -> Result<()> {
        let surrogate = PcSurrogate::read_archive(expansion)?;
        let selected = select_columns(&surrogate, labels)?;
        let mut outputs = Vec::new();
        for (col, label) in selected {
            let values =
                analysis::sample_column(&surrogate, col, self.config.samples, self.config.seed)?;
            let est = analysis::kde(&values, GridSpec::default())?;
            let name = format!("pdf_{}.csv", sanitize(&label));
            self.write_artifact(&name, est.to_csv().as_bytes())?;
            outputs.push(name);
        }
        self.finish("pdf", outputs)
    }

    /// `percentiles`: quantile bands over all output labels.
    pub fn percentiles(&mut self, expansion: &Path, quantiles: &[f64]) -> Result<()> {
        let surrogate = PcSurrogate::read_archive(expansion)?;
        let bands = analysis::percentiles(
            &surrogate,
            quantiles,
            self.config.samples,
            self.config.seed,
        )?;
        let csv = analysis::percentiles_csv(surrogate.output_labels(), quantiles, &bands);
        self.write_artifact("percentiles.csv", csv.as_bytes())?;
        self.finish("percentiles", vec!["percentiles.csv".into()])
    }

    /// `sobol`: sensitivity indices per output label.
    pub fn sobol(&mut self, expansion: &Path) -> Result<()> {
        let surrogate = PcSurrogate::read_archive(expansion)?;
        let report = sensitivity::sensitivity_timeseries(&surrogate)?;
        if report.defined.iter().any(|&d| !d) {
            let undefined: Vec<&str> = report
                .defined
                .iter()
                .zip(surrogate.output_labels())
                .filter(|(d, _)| !**d)
                .map(|(_, l)| l.as_str())
                .collect();
            self.warn(
                "zero-variance-outputs",
                format!(
                    "indices undefined for zero-variance outputs: {:?}",
                    &undefined[..undefined.len().min(8)]
                ),
            );
        }
        self.write_artifact("sobol.csv", report.to_csv().as_bytes())?;
        self.finish("sobol", vec!["sobol.csv".into()])
    }

    /// `risk`: exceedance-probability curve per threshold.
    pub fn risk(&mut self, expansion: &Path, thresholds: &[f64]) -> Result<()> {
        if thresholds.is_empty() {
            return Err(Error::Config("risk needs at least one --threshold".into()));
        }
        let surrogate = PcSurrogate::read_archive(expansion)?;
        let mut outputs = Vec::new();
        for &threshold in thresholds {
            let estimates = analysis::exceedance_probability(
                &surrogate,
                threshold,
                self.config.samples,
                self.config.seed,
            )?;
            let csv = analysis::exceedance_csv(surrogate.output_labels(), &estimates);
            let name = format!("exceedance_{}.csv", sanitize(&format!("{threshold}")));
            self.write_artifact(&name, csv.as_bytes())?;
            outputs.push(name);
        }
        self.finish("risk", outputs)
    }

    /// `design-opt`: chance-constrained search over one design dimension.
    #[allow(clippy::too_many_arguments)]
    pub fn design_opt(
        &mut self,
        expansion: &Path,
        design_dim: usize,
        threshold: f64,
        target_prob: f64,
        lo: f64,
        hi: f64,
        tol: f64,
    ) -> Result<()> {
        let spec = self.config.parameter_spec()?;
        let surrogate = PcSurrogate::read_archive(expansion)?;
        if design_dim == 0 || design_dim > spec.dim() {
            return Err(Error::Config(format!(
                "--design-dim is 1-based and must lie in 1..={}",
                spec.dim()
            )));
        }
        let dim0 = design_dim - 1;
        let map = match spec.parameters[dim0].distribution {
            // The design variable enters the surrogate through its germ:
            // xi = (ln Q - mu) / sigma for lognormal parameters, matching the
            // parameterization the expansion was built with, and
            // xi = (Q - mu) / sigma for normal ones.
            Distribution::Lognormal { mu, sigma } => {
                self.warn(
                    "log-design-scale",
                    format!(
                        "design parameter '{}' is lognormal; search bounds and the optimum are in \
                         log space: xi = (ln Q - mu)/sigma",
                        spec.parameters[dim0].name
                    ),
                );
                CanonicalMap { mean: mu, sd: sigma }
            }
            Distribution::Normal { mu, sigma } => CanonicalMap { mean: mu, sd: sigma },
            Distribution::Uniform { a, b } => CanonicalMap {
                mean: 0.5 * (a + b),
                sd: 0.5 * (b - a),
            },
        };
        let problem = DesignProblem::new(surrogate, dim0, map, threshold, target_prob)?;
        let search = optimal_design(
            &problem,
            lo,
            hi,
            self.config.samples,
            self.config.seed,
            tol,
        )?;
        for w in &search.warnings {
            self.warn("design-search", w.clone());
        }
        self.write_artifact("design_sweep.csv", sweep_csv(&search.curve).as_bytes())?;
        #[derive(Serialize)]
        struct DesignOut {
            q_star: f64,
            probability_at_q_star: f64,
            verification_probability: f64,
            verification_stderr: f64,
            target_prob: f64,
            threshold: f64,
            design_dim: usize,
            n: usize,
            seed: u64,
        }
        let out = DesignOut {
            q_star: search.design_value,
            probability_at_q_star: search.probability,
            verification_probability: search.verification.probability,
            verification_stderr: search.verification.stderr,
            target_prob,
            threshold,
            design_dim,
            n: self.config.samples,
            seed: self.config.seed,
        };
        self.write_artifact("design_opt.json", &serde_json::to_vec_pretty(&out)?)?;
        self.finish(
            "design-opt",
            vec!["design_sweep.csv".into(), "design_opt.json".into()],
        )
    }

    /// `failure-prob`: one CRN failure-probability evaluation, for scripting.
    pub fn failure_prob(
        &mut self,
        expansion: &Path,
        design_dim: usize,
        threshold: f64,
        design_value: f64,
    ) -> Result<()> {
        let spec = self.config.parameter_spec()?;
        let surrogate = PcSurrogate::read_archive(expansion)?;
        if design_dim == 0 || design_dim > spec.dim() {
            return Err(Error::Config(format!(
                "--design-dim is 1-based and must lie in 1..={}",
                spec.dim()
            )));
        }
        let dim0 = design_dim - 1;
        let map = match spec.parameters[dim0].distribution {
            Distribution::Lognormal { mu, sigma } | Distribution::Normal { mu, sigma } => {
                CanonicalMap { mean: mu, sd: sigma }
            }
            Distribution::Uniform { a, b } => CanonicalMap {
                mean: 0.5 * (a + b),
                sd: 0.5 * (b - a),
            },
        };
        let problem = DesignProblem::new(surrogate, dim0, map, threshold, 0.5)?;
        let est = failure_probability(
            &problem,
            design_value,
            self.config.samples,
            self.config.seed,
        )?;
        let csv = format!(
            "design_value,prob,stderr\n{},{},{}\n",
            fmt_g17(design_value),
            fmt_g17(est.probability),
            fmt_g17(est.stderr)
        );
        self.write_artifact("failure_prob.csv", csv.as_bytes())?;
        self.finish("failure-prob", vec!["failure_prob.csv".into()])
    }
}

fn results_csv(table: &crate::projection::EvaluationTable) -> String {
    let mut out = String::from("node_id");
    for label in table.output_labels() {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    for row in 0..table.n_rows() {
        out.push_str(&row.to_string());
        for &v in table.row(row) {
            out.push(',');
            out.push_str(&fmt_g17(v));
        }
        out.push('\n');
    }
    out
}

fn select_columns(
    surrogate: &PcSurrogate,
    labels: Option<Vec<String>>,
) -> Result<Vec<(usize, String)>> {
    match labels {
        None => Ok(surrogate
            .output_labels()
            .iter()
            .enumerate()
            .map(|(i, l)| (i, l.clone()))
            .collect()),
        Some(wanted) => wanted
            .into_iter()
            .map(|w| {
                surrogate
                    .output_labels()
                    .iter()
                    .position(|l| *l == w)
                    .map(|i| (i, w.clone()))
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "label '{w}' not found; expansion has {:?}",
                            &surrogate.output_labels()
                                [..surrogate.output_labels().len().min(8)]
                        ))
                    })
            })
            .collect(),
    }
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
