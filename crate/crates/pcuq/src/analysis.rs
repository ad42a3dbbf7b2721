//! Statistical characterization of a surrogate by cheap sampling: Monte Carlo
//! batches, kernel density estimates, percentile bands, and exceedance
//! probabilities.
//!
//! Sampling is deterministic and thread-count independent: the index range is
//! split into fixed chunks of [`SAMPLE_CHUNK`] draws, and chunk `c` derives
//! its own counter-based stream from `(seed, c)`. Workers may process chunks
//! in any order without changing a single bit of the output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution as RandDistribution, StandardNormal};
use rayon::prelude::*;

use crate::basis::PolyFamily;
use crate::error::{Error, Result};
use crate::projection::PcSurrogate;
use crate::util::kahan_sum;

/// Fixed sampling chunk size; part of the reproducibility contract.
pub const SAMPLE_CHUNK: usize = 8192;

/// Canonical input distribution for one germ dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputDistribution {
    /// N(0, 1), matching Hermite dimensions.
    StandardNormal,
    /// U(-1, 1), matching Legendre dimensions.
    UniformSymmetric,
}

impl InputDistribution {
    /// The canonical sampler for a polynomial family.
    pub fn canonical_for(family: PolyFamily) -> Self {
        match family {
            PolyFamily::HermiteProbabilist => InputDistribution::StandardNormal,
            PolyFamily::Legendre => InputDistribution::UniformSymmetric,
        }
    }

    fn matches(self, family: PolyFamily) -> bool {
        self == Self::canonical_for(family)
    }

    #[inline]
    fn draw(self, rng: &mut ChaCha12Rng) -> f64 {
        match self {
            InputDistribution::StandardNormal => StandardNormal.sample(rng),
            InputDistribution::UniformSymmetric => rng.random::<f64>() * 2.0 - 1.0,
        }
    }
}

/// Monte Carlo ensemble of surrogate outputs.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    /// Row-major n x m draws.
    pub draws: Vec<f64>,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
}

impl SampleBatch {
    /// Column `m` as a contiguous vector.
    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.draws[i * self.m + col]).collect()
    }
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn canonical_dists(surrogate: &PcSurrogate) -> Vec<InputDistribution> {
    surrogate
        .basis()
        .families()
        .iter()
        .map(|&f| InputDistribution::canonical_for(f))
        .collect()
}

fn validate_dists(surrogate: &PcSurrogate, dists: &[InputDistribution]) -> Result<()> {
    let families = surrogate.basis().families();
    if dists.len() != families.len() {
        return Err(Error::DimensionMismatch {
            expected: families.len(),
            got: dists.len(),
        });
    }
    for (dim, (&dist, &fam)) in dists.iter().zip(families).enumerate() {
        if !dist.matches(fam) {
            return Err(Error::SamplerFamilyMismatch { dim });
        }
    }
    Ok(())
}

/// Draw the canonical inputs of chunk `c` into `points` (chunk_len x d,
/// row-major). The per-chunk stream makes this independent of how chunks are
/// scheduled across workers.
pub(crate) fn fill_chunk_inputs(
    dists: &[InputDistribution],
    seed: u64,
    chunk: usize,
    chunk_len: usize,
    points: &mut Vec<f64>,
) {
    let mut rng = chunk_rng(seed, chunk as u64);
    points.clear();
    points.reserve(chunk_len * dists.len());
    for _ in 0..chunk_len {
        for &dist in dists {
            points.push(dist.draw(&mut rng));
        }
    }
}

fn chunk_bounds(n: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    // (chunk index, start, len)
    (0..n.div_ceil(SAMPLE_CHUNK)).map(move |c| {
        let start = c * SAMPLE_CHUNK;
        (c, start, SAMPLE_CHUNK.min(n - start))
    })
}

/// Sample all outputs of the surrogate at `n` iid canonical inputs.
pub fn sample(surrogate: &PcSurrogate, n: usize, seed: u64) -> Result<SampleBatch> {
    sample_with(surrogate, &canonical_dists(surrogate), n, seed)
}

/// Sample with an explicit input distribution per dimension; each must match
/// the basis family of that dimension.
pub fn sample_with(
    surrogate: &PcSurrogate,
    dists: &[InputDistribution],
    n: usize,
    seed: u64,
) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    validate_dists(surrogate, dists)?;
    let m = surrogate.n_outputs();
    let d = surrogate.basis().dim();
    let mut draws = vec![0.0; n * m];
    let chunks: Vec<(usize, usize, usize)> = chunk_bounds(n).collect();
    // Split the output buffer at chunk boundaries so each worker owns its slice.
    let mut slices: Vec<(usize, usize, &mut [f64])> = Vec::with_capacity(chunks.len());
    {
        let mut rest = draws.as_mut_slice();
        for &(c, _, len) in &chunks {
            let (head, tail) = rest.split_at_mut(len * m);
            slices.push((c, len, head));
            rest = tail;
        }
    }
    slices.par_iter_mut().try_for_each(|(c, len, out)| {
        let mut points = Vec::new();
        fill_chunk_inputs(dists, seed, *c, *len, &mut points);
        let mut psi = vec![0.0; surrogate.basis().len()];
        for i in 0..*len {
            let point = &points[i * d..(i + 1) * d];
            surrogate.eval_into(point, &mut psi, &mut out[i * m..(i + 1) * m])?;
        }
        Ok::<(), Error>(())
    })?;
    Ok(SampleBatch { draws, n, m, seed })
}

/// Sample a single output column; bit-identical to the corresponding column
/// of [`sample`] with the same `(n, seed)`.
pub fn sample_column(surrogate: &PcSurrogate, output: usize, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let dists = canonical_dists(surrogate);
    let d = surrogate.basis().dim();
    let chunks: Vec<(usize, usize, usize)> = chunk_bounds(n).collect();
    let parts: Vec<Vec<f64>> = chunks
        .par_iter()
        .map(|&(c, _, len)| {
            let mut points = Vec::new();
            fill_chunk_inputs(&dists, seed, c, len, &mut points);
            let mut psi = vec![0.0; surrogate.basis().len()];
            let mut out = Vec::with_capacity(len);
            for i in 0..len {
                let point = &points[i * d..(i + 1) * d];
                out.push(surrogate.eval_output(point, output, &mut psi)?);
            }
            Ok::<Vec<f64>, Error>(out)
        })
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(n);
    for part in parts {
        values.extend(part);
    }
    Ok(values)
}

/// Streaming per-column mean and variance over `n` draws, without
/// materializing the batch. Deterministic: per-chunk partial sums are
/// combined in chunk order.
pub fn sample_moments(surrogate: &PcSurrogate, n: usize, seed: u64) -> Result<Vec<(f64, f64)>> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let dists = canonical_dists(surrogate);
    let m = surrogate.n_outputs();
    let d = surrogate.basis().dim();
    let chunks: Vec<(usize, usize, usize)> = chunk_bounds(n).collect();
    let partials: Vec<(Vec<f64>, Vec<f64>)> = chunks
        .par_iter()
        .map(|&(c, _, len)| {
            let mut points = Vec::new();
            fill_chunk_inputs(&dists, seed, c, len, &mut points);
            let mut psi = vec![0.0; surrogate.basis().len()];
            let mut out = vec![0.0; m];
            let mut sum = vec![0.0; m];
            let mut sum_sq = vec![0.0; m];
            for i in 0..len {
                let point = &points[i * d..(i + 1) * d];
                surrogate.eval_into(point, &mut psi, &mut out)?;
                for col in 0..m {
                    sum[col] += out[col];
                    sum_sq[col] += out[col] * out[col];
                }
            }
            Ok::<(Vec<f64>, Vec<f64>), Error>((sum, sum_sq))
        })
        .collect::<Result<_>>()?;
    Ok((0..m)
        .map(|col| {
            let total = kahan_sum(partials.iter().map(|(s, _)| s[col]));
            let total_sq = kahan_sum(partials.iter().map(|(_, s)| s[col]));
            let mean = total / n as f64;
            let var = (total_sq - n as f64 * mean * mean) / (n as f64 - 1.0);
            (mean, var.max(0.0))
        })
        .collect())
}

/// Gaussian-kernel density estimate on a grid.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl DensityEstimate {
    /// Trapezoidal integral over the grid; ~1 when the grid covers the data.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1]))
            .sum()
    }

    /// Grid point with the highest density.
    pub fn mode(&self) -> f64 {
        let mut best = 0;
        for (i, &d) in self.density.iter().enumerate() {
            if d > self.density[best] {
                best = i;
            }
        }
        self.grid[best]
    }

    /// `x,pdf` rows for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,pdf\n");
        for (x, d) in self.grid.iter().zip(&self.density) {
            out.push_str(&crate::util::fmt_g17(*x));
            out.push(',');
            out.push_str(&crate::util::fmt_g17(*d));
            out.push('\n');
        }
        out
    }
}

/// Evaluation grid for a density estimate.
#[derive(Debug, Clone, Copy)]
pub enum GridSpec {
    /// Cover the data range padded by four bandwidths.
    Auto { points: usize },
    /// Explicit closed interval.
    Range { lo: f64, hi: f64, points: usize },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Auto { points: 512 }
    }
}

// The sample is binned to this resolution before kernel evaluation; with
// thousands of bins the binning error is far below the kernel bias at any
// sample size this tool runs.
const KDE_BINS: usize = 4096;

/// Gaussian KDE with Silverman's bandwidth 1.06 * sigma * n^(-1/5).
///
/// The bandwidth is recorded in the output. Requires at least two distinct
/// values; a constant sample has no density estimate.
pub fn kde(values: &[f64], grid: GridSpec) -> Result<DensityEstimate> {
    let n = values.len();
    if n < 2 {
        return Err(Error::DegenerateSample);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let sigma = var.sqrt();
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::DegenerateSample);
    }
    let bandwidth = 1.06 * sigma * (n as f64).powf(-0.2);

    let (lo_data, hi_data) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let (lo, hi, points) = match grid {
        GridSpec::Auto { points } => (
            lo_data - 4.0 * bandwidth,
            hi_data + 4.0 * bandwidth,
            points,
        ),
        GridSpec::Range { lo, hi, points } => (lo, hi, points),
    };
    if points < 2 || !(hi > lo) {
        return Err(Error::Config(format!(
            "density grid must have at least 2 points and hi > lo; got [{lo}, {hi}] x {points}"
        )));
    }

    // Bin the data once, then evaluate against bin centers.
    let bin_width = (hi_data - lo_data) / KDE_BINS as f64;
    let mut counts = vec![0u64; KDE_BINS];
    if bin_width > 0.0 {
        for &v in values {
            let b = (((v - lo_data) / bin_width) as usize).min(KDE_BINS - 1);
            counts[b] += 1;
        }
    } else {
        counts[0] = n as u64;
    }
    let centers: Vec<f64> = (0..KDE_BINS)
        .map(|b| lo_data + (b as f64 + 0.5) * bin_width)
        .collect();

    let norm = 1.0 / (n as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let grid_points: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    let density: Vec<f64> = grid_points
        .par_iter()
        .map(|&x| {
            let mut acc = 0.0;
            for (count, &c) in counts.iter().zip(&centers) {
                if *count > 0 {
                    let u = (x - c) / bandwidth;
                    if u.abs() < 8.0 {
                        acc += *count as f64 * (-0.5 * u * u).exp();
                    }
                }
            }
            acc * norm
        })
        .collect();
    Ok(DensityEstimate {
        grid: grid_points,
        density,
        bandwidth,
    })
}

/// Empirical quantiles per output column: M x quantiles matrix.
///
/// Quantiles use sorted order statistics with linear interpolation. Columns
/// are processed independently but from the same underlying input draws, so
/// the result for any column equals what a full batch would give.
pub fn percentiles(
    surrogate: &PcSurrogate,
    quantiles: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    for &q in quantiles {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::QuantileOutOfRange(q));
        }
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    (0..surrogate.n_outputs())
        .into_par_iter()
        .map(|col| {
            let mut values = sample_column(surrogate, col, n, seed)?;
            values.sort_unstable_by(f64::total_cmp);
            Ok(quantiles
                .iter()
                .map(|&q| interpolate_quantile(&values, q))
                .collect())
        })
        .collect()
}

fn interpolate_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
    }
}

/// Exceedance probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExceedanceEstimate {
    pub probability: f64,
    pub stderr: f64,
}

/// P(output > threshold) per output column, from `n` canonical draws.
///
/// The standard error makes sub-percent probabilities interpretable at a
/// given sample size.
pub fn exceedance_probability(
    surrogate: &PcSurrogate,
    threshold: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<ExceedanceEstimate>> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if !threshold.is_finite() {
        return Err(Error::Config("threshold must be finite".into()));
    }
    let dists = canonical_dists(surrogate);
    let m = surrogate.n_outputs();
    let d = surrogate.basis().dim();
    let chunks: Vec<(usize, usize, usize)> = chunk_bounds(n).collect();
    let counts: Vec<Vec<u64>> = chunks
        .par_iter()
        .map(|&(c, _, len)| {
            let mut points = Vec::new();
            fill_chunk_inputs(&dists, seed, c, len, &mut points);
            let mut psi = vec![0.0; surrogate.basis().len()];
            let mut out = vec![0.0; m];
            let mut count = vec![0u64; m];
            for i in 0..len {
                let point = &points[i * d..(i + 1) * d];
                surrogate.eval_into(point, &mut psi, &mut out)?;
                for col in 0..m {
                    if out[col] > threshold {
                        count[col] += 1;
                    }
                }
            }
            Ok::<Vec<u64>, Error>(count)
        })
        .collect::<Result<_>>()?;
    Ok((0..m)
        .map(|col| {
            let exceed: u64 = counts.iter().map(|c| c[col]).sum();
            let p = exceed as f64 / n as f64;
            ExceedanceEstimate {
                probability: p,
                stderr: (p * (1.0 - p) / n as f64).sqrt(),
            }
        })
        .collect())
}

/// CSV emitter for percentile bands: one row per output label.
pub fn percentiles_csv(labels: &[String], quantiles: &[f64], bands: &[Vec<f64>]) -> String {
    let mut out = String::from("label");
    for q in quantiles {
        out.push_str(&format!(",q{:02.0}", q * 100.0));
    }
    out.push('\n');
    for (label, row) in labels.iter().zip(bands) {
        out.push_str(label);
        for v in row {
            out.push(',');
            out.push_str(&crate::util::fmt_g17(*v));
        }
        out.push('\n');
    }
    out
}

/// CSV emitter for exceedance curves: one row per output label.
pub fn exceedance_csv(labels: &[String], estimates: &[ExceedanceEstimate]) -> String {
    let mut out = String::from("label,prob,stderr\n");
    for (label, e) in labels.iter().zip(estimates) {
        out.push_str(label);
        out.push(',');
        out.push_str(&crate::util::fmt_g17(e.probability));
        out.push(',');
        out.push_str(&crate::util::fmt_g17(e.stderr));
        out.push('\n');
    }
    out
}
