//! Forward-model sources: canonical-to-physical parameter specs, built-in
//! analytic test models, QoI extraction from time series, and the CSV
//! protocol that couples external simulators to the projection pipeline.
//!
//! The protocol is non-intrusive: `emit_nodes` writes one row per quadrature
//! node with both canonical and physical coordinates; the user's solver fills
//! in a results file keyed by `node_id`; `ingest_results` validates it and
//! binds it back to the rule.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use crate::basis::PolyFamily;
use crate::error::{Error, Result};
use crate::projection::EvaluationTable;
use crate::quadrature::QuadratureRule;
use crate::util::{atomic_write, fmt_g17};

/// Marginal distribution of one uncertain parameter, with its canonical germ.
///
/// Lognormal and normal parameters ride on a standard normal germ (Hermite
/// dimension); uniform parameters on a U(-1,1) germ (Legendre dimension).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Distribution {
    Lognormal { mu: f64, sigma: f64 },
    Normal { mu: f64, sigma: f64 },
    Uniform { a: f64, b: f64 },
}

impl Distribution {
    /// Polynomial family orthogonal to this parameter's germ.
    pub fn family(&self) -> PolyFamily {
        match self {
            Distribution::Lognormal { .. } | Distribution::Normal { .. } => {
                PolyFamily::HermiteProbabilist
            }
            Distribution::Uniform { .. } => PolyFamily::Legendre,
        }
    }

    /// Map a canonical germ value to the physical parameter. Strictly
    /// increasing for every valid distribution.
    pub fn to_physical(&self, xi: f64) -> f64 {
        match *self {
            Distribution::Lognormal { mu, sigma } => (mu + sigma * xi).exp(),
            Distribution::Normal { mu, sigma } => mu + sigma * xi,
            Distribution::Uniform { a, b } => 0.5 * (a + b) + 0.5 * (b - a) * xi,
        }
    }

    /// Median of the physical parameter (germ at zero).
    pub fn median(&self) -> f64 {
        self.to_physical(0.0)
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = match *self {
            Distribution::Lognormal { sigma, .. } | Distribution::Normal { sigma, .. } => {
                sigma > 0.0
            }
            Distribution::Uniform { a, b } => a < b,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name: name.to_string(),
                reason: "requires sigma > 0 (or a < b)".into(),
            })
        }
    }
}

/// One named uncertain parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub distribution: Distribution,
}

/// Ordered set of uncertain parameters; dimension i of the germ drives
/// parameter i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub parameters: Vec<Parameter>,
}

impl ParameterSpec {
    pub fn new(parameters: Vec<Parameter>) -> Result<Self> {
        if parameters.is_empty() {
            return Err(Error::ZeroDimension);
        }
        for p in &parameters {
            p.distribution.validate(&p.name)?;
        }
        Ok(Self { parameters })
    }

    /// The four lognormal parameters of the shipped leakage toy model:
    /// log-porosity N(-1.8971, 0.2^2), log-absolute permeability
    /// N(-30.002, 1.2^2), log-leaky-well permeability N(-27.631, 0.3679)
    /// (variance as stated, sigma = sqrt(0.3679)), log-injection rate
    /// N(2.1827, 0.2^2).
    pub fn leakage_benchmark() -> Self {
        let sigma_kl = 0.3679f64.sqrt();
        Self {
            parameters: vec![
                Parameter {
                    name: "porosity".into(),
                    distribution: Distribution::Lognormal {
                        mu: -1.8971,
                        sigma: 0.2,
                    },
                },
                Parameter {
                    name: "abs_permeability".into(),
                    distribution: Distribution::Lognormal {
                        mu: -30.002,
                        sigma: 1.2,
                    },
                },
                Parameter {
                    name: "leaky_permeability".into(),
                    distribution: Distribution::Lognormal {
                        mu: -27.631,
                        sigma: sigma_kl,
                    },
                },
                Parameter {
                    name: "injection_rate".into(),
                    distribution: Distribution::Lognormal {
                        mu: 2.1827,
                        sigma: 0.2,
                    },
                },
            ],
        }
    }

    /// Three uniform inputs on [-pi, pi] for the Ishigami benchmark.
    pub fn ishigami_benchmark() -> Self {
        let parameters = (1..=3)
            .map(|i| Parameter {
                name: format!("x{i}"),
                distribution: Distribution::Uniform {
                    a: -std::f64::consts::PI,
                    b: std::f64::consts::PI,
                },
            })
            .collect();
        Self { parameters }
    }

    pub fn dim(&self) -> usize {
        self.parameters.len()
    }

    pub fn families(&self) -> Vec<PolyFamily> {
        self.parameters
            .iter()
            .map(|p| p.distribution.family())
            .collect()
    }

    pub fn names(&self) -> Vec<&str> {
        self.parameters.iter().map(|p| p.name.as_str()).collect()
    }

    /// Map a canonical germ vector to physical parameter values.
    pub fn to_physical(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: xi.len(),
            });
        }
        Ok(self
            .parameters
            .iter()
            .zip(xi)
            .map(|(p, &x)| p.distribution.to_physical(x))
            .collect())
    }

    /// Physical values at the germ median (all-zero germ).
    pub fn medians(&self) -> Vec<f64> {
        self.parameters
            .iter()
            .map(|p| p.distribution.median())
            .collect()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(self)?;
        atomic_write(path, &bytes)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let spec: ParameterSpec = serde_json::from_slice(&bytes)?;
        Self::new(spec.parameters)
    }
}

/// Ishigami test function on canonical uniforms: the germ is scaled to
/// [-pi, pi] internally. The standard benchmark for variance-based
/// sensitivity machinery, with a known analytic decomposition.
pub fn ishigami(xi: &[f64], a: f64, b: f64) -> Result<f64> {
    if xi.len() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: xi.len(),
        });
    }
    let x1 = std::f64::consts::PI * xi[0];
    let x2 = std::f64::consts::PI * xi[1];
    let x3 = std::f64::consts::PI * xi[2];
    Ok(x1.sin() + a * x2.sin().powi(2) + b * x3.powi(4) * x1.sin())
}

/// One realization of a time-series output.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesOutput {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeriesOutput {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::EmptyTimeSeries);
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::NonMonotoneTimes);
        }
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: values.len(),
            });
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Default arrival-detection threshold for the leakage toy model, in the
/// same percent units as the model output.
pub const DEFAULT_ARRIVAL_THRESHOLD: f64 = 3.0e-3;

// Closed form of the leakage stand-in, fixed here forever. All four physical
// parameters are strictly positive; REF_* are the medians of the benchmark
// distributions, so the median germ reproduces the reference curve.
//
//   arrival(phi, q)   = TAU0 * (phi/REF_PHI)^0.8  * (q/REF_Q)^-0.8     [days]
//   width(arrival)    = W0 * sqrt(arrival/TAU0)                        [days]
//   amp(ka, kl, q)    = A0 * (kl/REF_KL)^0.5 * (ka/REF_KA)^-0.35
//                          * (q/REF_Q)^0.4                             [%]
//   leak(t)           = amp * logistic((t - arrival)/width)
//                           / (1 + DELTA * (1 - exp(-t/T_DECAY)))
//
// The curve rises smoothly through the arrival threshold, peaks at an
// interior time, then relaxes toward amp/(1+DELTA). Arrival is driven by
// porosity and injection rate, the plateau level by the two permeabilities
// (and weakly by injection rate), so the sensitivity balance shifts from
// {porosity, injection rate} at early times to {permeabilities} late.
const TAU0: f64 = 150.0;
const W0: f64 = 35.0;
const A0: f64 = 0.05;
const DELTA: f64 = 0.8;
const T_DECAY: f64 = 500.0;

fn leakage_refs() -> [f64; 4] {
    let medians = ParameterSpec::leakage_benchmark().medians();
    [medians[0], medians[1], medians[2], medians[3]]
}

/// Synthetic leakage-rate curve for physical parameters
/// (porosity, absolute permeability, leaky-well permeability, injection
/// rate), evaluated at `times` (days). See the module source for the exact
/// closed form; it is a stand-in with plausible shape and sensitivity
/// structure, not a physics model.
pub fn toy_leakage(params: &[f64], times: &[f64]) -> Result<TimeSeriesOutput> {
    if params.len() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: params.len(),
        });
    }
    for (i, &p) in params.iter().enumerate() {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::NonPositiveModelParameter { index: i, value: p });
        }
    }
    let [ref_phi, ref_ka, ref_kl, ref_q] = leakage_refs();
    let (phi, ka, kl, q) = (params[0], params[1], params[2], params[3]);
    let arrival = TAU0 * (phi / ref_phi).powf(0.8) * (q / ref_q).powf(-0.8);
    let width = W0 * (arrival / TAU0).sqrt();
    let amp = A0 * (kl / ref_kl).powf(0.5) * (ka / ref_ka).powf(-0.35) * (q / ref_q).powf(0.4);
    let values = times
        .iter()
        .map(|&t| {
            let rise = 1.0 / (1.0 + (-(t - arrival) / width).exp());
            let relax = 1.0 + DELTA * (1.0 - (-t / T_DECAY).exp());
            amp * rise / relax
        })
        .collect();
    TimeSeriesOutput::new(times.to_vec(), values)
}

/// Scalar quantities of interest extracted from one leakage realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qois {
    /// First time the series exceeds the arrival threshold, interpolated
    /// linearly between the bracketing samples. Equal to the final time
    /// label when censored.
    pub t_arrival: f64,
    /// True when the series never exceeds the threshold within the horizon.
    pub censored: bool,
    /// Maximum value over the series.
    pub q_max: f64,
    /// Time label at which the maximum is attained (first, on ties).
    pub t_maxleak: f64,
}

/// Extract arrival time, peak value, and peak time from a realization.
pub fn extract_qois(series: &TimeSeriesOutput, arrival_threshold: f64) -> Qois {
    let times = series.times();
    let values = series.values();
    let mut max_idx = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[max_idx] {
            max_idx = i;
        }
    }
    let q_max = values[max_idx];
    let t_maxleak = times[max_idx];
    if q_max <= arrival_threshold {
        return Qois {
            t_arrival: *times.last().unwrap(),
            censored: true,
            q_max,
            t_maxleak,
        };
    }
    let cross = values.iter().position(|&v| v > arrival_threshold).unwrap();
    let t_arrival = if cross == 0 {
        times[0]
    } else {
        let (t0, t1) = (times[cross - 1], times[cross]);
        let (v0, v1) = (values[cross - 1], values[cross]);
        t0 + (arrival_threshold - v0) * (t1 - t0) / (v1 - v0)
    };
    Qois {
        t_arrival,
        censored: false,
        q_max,
        t_maxleak,
    }
}

/// Write the node table for an external solver: one row per node in the
/// rule's odometer order, with canonical coordinates, physical parameter
/// values, and the quadrature weight, all at 17 significant digits.
pub fn emit_nodes(rule: &QuadratureRule, spec: &ParameterSpec) -> Result<String> {
    if spec.dim() != rule.dim() {
        return Err(Error::DimensionMismatch {
            expected: rule.dim(),
            got: spec.dim(),
        });
    }
    for (i, (param, &fam)) in spec.parameters.iter().zip(rule.families()).enumerate() {
        if param.distribution.family() != fam {
            return Err(Error::InvalidParameter {
                name: param.name.clone(),
                reason: format!(
                    "distribution requires a {} germ but rule dimension {} uses {}",
                    param.distribution.family().name(),
                    i + 1,
                    fam.name()
                ),
            });
        }
    }
    let mut out = String::new();
    out.push_str("node_id");
    for i in 1..=rule.dim() {
        out.push_str(&format!(",xi_{i}"));
    }
    for name in spec.names() {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",weight\n");
    for j in 0..rule.len() {
        let node = rule.node(j);
        out.push_str(&j.to_string());
        for &x in node {
            out.push(',');
            out.push_str(&fmt_g17(x));
        }
        for value in spec.to_physical(node)? {
            out.push(',');
            out.push_str(&fmt_g17(value));
        }
        out.push(',');
        out.push_str(&fmt_g17(rule.weights()[j]));
        out.push('\n');
    }
    Ok(out)
}

/// Write `emit_nodes` output to a file atomically.
pub fn write_nodes_csv(path: &Path, rule: &QuadratureRule, spec: &ParameterSpec) -> Result<()> {
    let body = emit_nodes(rule, spec)?;
    atomic_write(path, body.as_bytes())?;
    Ok(())
}

/// Read a results file (`node_id,<label_1>,...,<label_M>`) and bind it to
/// `rule` as an evaluation table.
///
/// Rows may arrive in any order, but every node id must appear exactly once
/// and every value must be finite.
pub fn ingest_results<R: Read>(reader: R, rule: &QuadratureRule) -> Result<EvaluationTable> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    if headers.is_empty() || headers.get(0) != Some("node_id") {
        return Err(Error::Protocol(
            "results header must start with 'node_id'".into(),
        ));
    }
    let labels: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    if labels.is_empty() {
        return Err(Error::Protocol("results file has no output columns".into()));
    }
    let n_nodes = rule.len();
    let m = labels.len();
    let mut outputs = vec![f64::NAN; n_nodes * m];
    let mut seen: HashSet<usize> = HashSet::with_capacity(n_nodes);
    for (line, record) in csv_reader.records().enumerate() {
        let record = record?;
        if record.len() != m + 1 {
            return Err(Error::Protocol(format!(
                "row {} has {} fields, expected {} (node_id plus {} labels)",
                line + 2,
                record.len(),
                m + 1,
                m
            )));
        }
        let id: usize = record[0].parse().map_err(|_| {
            Error::Protocol(format!("row {}: bad node_id '{}'", line + 2, &record[0]))
        })?;
        if id >= n_nodes {
            return Err(Error::Protocol(format!(
                "node_id {id} out of range for a rule with {n_nodes} nodes"
            )));
        }
        if !seen.insert(id) {
            return Err(Error::Protocol(format!("duplicate node_id {id}")));
        }
        for (col, field) in record.iter().skip(1).enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Protocol(format!(
                    "node_id {id}, column '{}': bad value '{field}'",
                    labels[col]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Protocol(format!(
                    "node_id {id}, column '{}': non-finite value",
                    labels[col]
                )));
            }
            outputs[id * m + col] = v;
        }
    }
    if seen.len() != n_nodes {
        let missing: Vec<usize> = (0..n_nodes).filter(|id| !seen.contains(id)).collect();
        return Err(Error::Protocol(format!(
            "missing node_id{} {:?}",
            if missing.len() == 1 { "" } else { "s" },
            &missing[..missing.len().min(8)]
        )));
    }
    EvaluationTable::new(rule, outputs, labels)
}

/// Read a results file from disk.
pub fn ingest_results_file(path: &Path, rule: &QuadratureRule) -> Result<EvaluationTable> {
    let file = std::fs::File::open(path)?;
    ingest_results(std::io::BufReader::new(file), rule)
}

/// Evaluate the leakage toy model at every node of `rule`, labeling columns
/// with the time stamps.
pub fn toy_leakage_table(
    rule: &QuadratureRule,
    spec: &ParameterSpec,
    times: &[f64],
) -> Result<EvaluationTable> {
    if spec.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: spec.dim(),
        });
    }
    let labels: Vec<String> = times.iter().map(|t| format!("{t}")).collect();
    let mut outputs = Vec::with_capacity(rule.len() * times.len());
    for j in 0..rule.len() {
        let params = spec.to_physical(rule.node(j))?;
        let series = toy_leakage(&params, times)?;
        outputs.extend_from_slice(series.values());
    }
    EvaluationTable::new(rule, outputs, labels)
}

/// Evaluate the leakage toy model and reduce each realization to its QoIs
/// (arrival time, peak leakage, peak time).
pub fn toy_leakage_qoi_table(
    rule: &QuadratureRule,
    spec: &ParameterSpec,
    times: &[f64],
    arrival_threshold: f64,
) -> Result<(EvaluationTable, usize)> {
    let labels = vec![
        "t_arrival".to_string(),
        "q_max".to_string(),
        "t_maxleak".to_string(),
    ];
    let mut outputs = Vec::with_capacity(rule.len() * 3);
    let mut censored = 0;
    for j in 0..rule.len() {
        let params = spec.to_physical(rule.node(j))?;
        let series = toy_leakage(&params, times)?;
        let qois = extract_qois(&series, arrival_threshold);
        if qois.censored {
            censored += 1;
        }
        outputs.extend_from_slice(&[qois.t_arrival, qois.q_max, qois.t_maxleak]);
    }
    Ok((EvaluationTable::new(rule, outputs, labels)?, censored))
}

/// Evaluate the Ishigami function at every node of `rule`.
pub fn ishigami_table(rule: &QuadratureRule, a: f64, b: f64) -> Result<EvaluationTable> {
    if rule.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: rule.dim(),
        });
    }
    EvaluationTable::from_model(rule, vec!["ishigami".into()], |x| {
        vec![ishigami(x, a, b).expect("dimension checked above")]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::PolyFamily;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn ishigami_point_values() {
        assert_abs_diff_eq!(ishigami(&[0.0, 0.0, 0.0], 7.0, 0.1).unwrap(), 0.0);
        assert_abs_diff_eq!(
            ishigami(&[0.5, 0.0, 0.0], 7.0, 0.1).unwrap(),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn ishigami_mean_matches_analytic() {
        // E[f] = a/2: the sin^2 term averages to 1/2, the others to zero.
        let a = 7.0;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        let n = 10_000_000usize;
        let mut sum = 0.0;
        for _ in 0..n {
            let xi = [
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            ];
            sum += ishigami(&xi, a, 0.1).unwrap();
        }
        let mc = sum / n as f64;
        assert!((mc - a / 2.0).abs() < 0.01, "MC mean {mc}");
    }

    #[test]
    fn leakage_benchmark_physical_transform() {
        let spec = ParameterSpec::leakage_benchmark();
        assert_eq!(spec.dim(), 4);
        assert!(spec
            .families()
            .iter()
            .all(|&f| f == PolyFamily::HermiteProbabilist));
        // porosity at xi = -1, +1: exp(-1.8971 -+ 0.2)
        let phys_lo = spec.parameters[0].distribution.to_physical(-1.0);
        let phys_hi = spec.parameters[0].distribution.to_physical(1.0);
        assert_abs_diff_eq!(phys_lo, (-2.0971f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(phys_hi, (-1.6971f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn transforms_are_strictly_increasing() {
        let spec = ParameterSpec::leakage_benchmark();
        let uniform = Distribution::Uniform { a: 2.0, b: 5.0 };
        let grid: Vec<f64> = (-40..=40).map(|i| i as f64 / 10.0).collect();
        for dist in spec
            .parameters
            .iter()
            .map(|p| p.distribution)
            .chain([uniform])
        {
            for w in grid.windows(2) {
                assert!(dist.to_physical(w[0]) < dist.to_physical(w[1]), "{dist:?}");
            }
        }
    }

    #[test]
    fn invalid_distributions_rejected() {
        assert!(ParameterSpec::new(vec![Parameter {
            name: "bad".into(),
            distribution: Distribution::Normal {
                mu: 0.0,
                sigma: 0.0
            },
        }])
        .is_err());
        assert!(ParameterSpec::new(vec![Parameter {
            name: "bad".into(),
            distribution: Distribution::Uniform { a: 1.0, b: 1.0 },
        }])
        .is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = ParameterSpec::leakage_benchmark();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spec.json");
        spec.write_json(&path).unwrap();
        let back = ParameterSpec::read_json(&path).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn toy_leakage_median_curve_shape() {
        let spec = ParameterSpec::leakage_benchmark();
        let times: Vec<f64> = (0..=60).map(|i| 25.0 * i as f64).collect();
        let series = toy_leakage(&spec.medians(), &times).unwrap();
        // starts below the arrival threshold, peaks strictly inside the
        // horizon, decays after the peak
        assert!(series.values()[0] < DEFAULT_ARRIVAL_THRESHOLD);
        let qois = extract_qois(&series, DEFAULT_ARRIVAL_THRESHOLD);
        assert!(!qois.censored);
        assert!(qois.t_maxleak > times[0] && qois.t_maxleak < *times.last().unwrap());
        assert!(*series.values().last().unwrap() < qois.q_max);
        assert!(series.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn toy_leakage_rejects_bad_params() {
        assert!(matches!(
            toy_leakage(&[0.1, 1e-27, -1.0, 8.0], &[0.0, 1.0]),
            Err(Error::NonPositiveModelParameter { index: 2, .. })
        ));
        assert!(toy_leakage(&[0.1, 1e-27], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn toy_leakage_scaling_in_injection_rate() {
        // Doubling Q scales amp by 2^0.4 and shrinks arrival by 2^-0.8,
        // per the documented closed form.
        let spec = ParameterSpec::leakage_benchmark();
        let med = spec.medians();
        let mut boosted = med.clone();
        boosted[3] *= 2.0;
        let t_late = [1.0, 2000.0];
        let base = toy_leakage(&med, &t_late).unwrap();
        let fast = toy_leakage(&boosted, &t_late).unwrap();
        // At t far beyond both arrival scales the sigmoid factors are ~1 and
        // the ratio approaches the amplitude ratio 2^0.4.
        let ratio = fast.values()[1] / base.values()[1];
        assert_abs_diff_eq!(ratio, 2.0f64.powf(0.4), epsilon = 1e-3);
    }

    /// Realization-envelope fidelity: every draw crosses the threshold,
    /// attains an interior maximum, and stays positive.
    #[test]
    fn toy_leakage_qualitative_fidelity_100_draws() {
        let spec = ParameterSpec::leakage_benchmark();
        let times: Vec<f64> = (0..=60).map(|i| 25.0 * i as f64).collect();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
        for _ in 0..100 {
            let xi: Vec<f64> = (0..4)
                .map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng))
                .collect();
            let params = spec.to_physical(&xi).unwrap();
            let series = toy_leakage(&params, &times).unwrap();
            assert!(series.values().iter().all(|&v| v > 0.0));
            let qois = extract_qois(&series, DEFAULT_ARRIVAL_THRESHOLD);
            assert!(!qois.censored, "params {params:?} never crossed");
            let max_idx = series
                .values()
                .iter()
                .position(|&v| v == qois.q_max)
                .unwrap();
            assert!(max_idx > 0 && max_idx < times.len() - 1, "boundary max");
        }
    }

    #[test]
    fn qoi_interpolation_on_monotone_ramp() {
        let series = TimeSeriesOutput::new(vec![0.0, 10.0], vec![0.0, 1.0]).unwrap();
        let qois = extract_qois(&series, 0.5);
        assert_abs_diff_eq!(qois.t_arrival, 5.0);
        assert!(!qois.censored);
        assert_abs_diff_eq!(qois.q_max, 1.0);
        assert_abs_diff_eq!(qois.t_maxleak, 10.0);
    }

    #[test]
    fn qoi_censoring_below_threshold() {
        let series = TimeSeriesOutput::new(vec![0.0, 1.0, 2.0], vec![0.1, 0.1, 0.1]).unwrap();
        let qois = extract_qois(&series, 0.5);
        assert!(qois.censored);
        assert_abs_diff_eq!(qois.t_arrival, 2.0);
        // censored iff the max never exceeds the threshold
        let qois2 = extract_qois(&series, 0.05);
        assert!(!qois2.censored);
    }

    #[test]
    fn time_series_validates_ordering() {
        assert!(matches!(
            TimeSeriesOutput::new(vec![0.0, 0.0], vec![1.0, 2.0]),
            Err(Error::NonMonotoneTimes)
        ));
        assert!(matches!(
            TimeSeriesOutput::new(vec![], vec![]),
            Err(Error::EmptyTimeSeries)
        ));
    }

    #[test]
    fn emit_nodes_two_node_lognormal() {
        let rule = QuadratureRule::isotropic(1, PolyFamily::HermiteProbabilist, 2).unwrap();
        let spec = ParameterSpec::new(vec![Parameter {
            name: "porosity".into(),
            distribution: Distribution::Lognormal {
                mu: -1.8971,
                sigma: 0.2,
            },
        }])
        .unwrap();
        let csv = emit_nodes(&rule, &spec).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "node_id,xi_1,porosity,weight");
        let row0: Vec<&str> = lines.next().unwrap().split(',').collect();
        let row1: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row0[0], "0");
        let phys0: f64 = row0[2].parse().unwrap();
        let phys1: f64 = row1[2].parse().unwrap();
        assert_abs_diff_eq!(phys0, (-2.0971f64).exp(), epsilon = 1e-10);
        assert_abs_diff_eq!(phys1, (-1.6971f64).exp(), epsilon = 1e-10);
        let w0: f64 = row0[3].parse().unwrap();
        assert_abs_diff_eq!(w0, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn emit_nodes_rejects_family_mismatch() {
        let rule = QuadratureRule::isotropic(1, PolyFamily::Legendre, 2).unwrap();
        let spec = ParameterSpec::new(vec![Parameter {
            name: "x".into(),
            distribution: Distribution::Normal {
                mu: 0.0,
                sigma: 1.0,
            },
        }])
        .unwrap();
        assert!(matches!(
            emit_nodes(&rule, &spec),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn ingest_validates_completeness_and_ids() {
        let rule = QuadratureRule::isotropic(1, PolyFamily::HermiteProbabilist, 3).unwrap();
        let ok = "node_id,y\n2,3.0\n0,1.0\n1,2.0\n";
        let table = ingest_results(ok.as_bytes(), &rule).unwrap();
        assert_eq!(table.n_rows(), 3);
        assert_eq!(table.value(0, 0), 1.0);
        assert_eq!(table.value(2, 0), 3.0);

        let missing = "node_id,y\n0,1.0\n2,3.0\n";
        let err = ingest_results(missing.as_bytes(), &rule).unwrap_err();
        assert!(err.to_string().contains("missing node_id"), "{err}");
        assert!(err.to_string().contains('1'), "{err}");

        let duplicate = "node_id,y\n0,1.0\n0,2.0\n1,3.0\n";
        let err = ingest_results(duplicate.as_bytes(), &rule).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");

        let non_finite = "node_id,y\n0,1.0\n1,nan\n2,3.0\n";
        assert!(ingest_results(non_finite.as_bytes(), &rule).is_err());

        let ragged = "node_id,y\n0,1.0,9.0\n1,2.0\n2,3.0\n";
        assert!(ingest_results(ragged.as_bytes(), &rule).is_err());
    }

    #[test]
    fn emit_ingest_round_trip_matches_in_process_evaluation() {
        let spec = ParameterSpec::leakage_benchmark();
        let rule = QuadratureRule::isotropic(4, PolyFamily::HermiteProbabilist, 2).unwrap();
        let times: Vec<f64> = vec![0.0, 100.0, 400.0, 1000.0];
        let direct = toy_leakage_table(&rule, &spec, &times).unwrap();

        // Simulate the external-solver loop: read nodes.csv, evaluate from
        // the physical columns, write results.csv in scrambled order.
        let nodes_csv = emit_nodes(&rule, &spec).unwrap();
        let mut results = String::from("node_id,0,100,400,1000\n");
        let mut rows: Vec<&str> = nodes_csv.lines().skip(1).collect();
        rows.reverse();
        for row in rows {
            let fields: Vec<&str> = row.split(',').collect();
            let params: Vec<f64> = fields[5..9].iter().map(|s| s.parse().unwrap()).collect();
            let series = toy_leakage(&params, &times).unwrap();
            results.push_str(fields[0]);
            for v in series.values() {
                results.push(',');
                results.push_str(&fmt_g17(*v));
            }
            results.push('\n');
        }
        let ingested = ingest_results(results.as_bytes(), &rule).unwrap();
        assert_eq!(ingested.n_outputs(), direct.n_outputs());
        for row in 0..rule.len() {
            for col in 0..direct.n_outputs() {
                assert_eq!(
                    ingested.value(row, col).to_bits(),
                    direct.value(row, col).to_bits(),
                    "row {row} col {col}"
                );
            }
        }
    }

    #[test]
    fn qoi_table_counts_censored_realizations() {
        let spec = ParameterSpec::leakage_benchmark();
        let rule = QuadratureRule::isotropic(4, PolyFamily::HermiteProbabilist, 2).unwrap();
        let times: Vec<f64> = (0..=30).map(|i| 50.0 * i as f64).collect();
        let (table, censored) =
            toy_leakage_qoi_table(&rule, &spec, &times, DEFAULT_ARRIVAL_THRESHOLD).unwrap();
        assert_eq!(table.n_outputs(), 3);
        assert_eq!(censored, 0);
        // an absurd threshold censors everything
        let (_, censored_all) = toy_leakage_qoi_table(&rule, &spec, &times, 1e9).unwrap();
        assert_eq!(censored_all, rule.len());
    }
}
