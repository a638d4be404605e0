//! Monte Carlo propagation of input uncertainty through a scalar model.

use serde::{Deserialize, Serialize};

use crate::dataset::{sample_stream, DistributionSpec};
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 50;
pub const MIN_SAMPLES: usize = 100;
/// Inputs are drawn and evaluated in chunks of this many points.
const CHUNK: usize = 1 << 14;

/// Equal-width histogram with densities normalized to unit area.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
}

impl Histogram {
    /// `bins` equal-width bins over `[min, max]` of `values`. A constant
    /// sample gets a unit-width range centred on it.
    pub fn from_values(values: &[f64], bins: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("histogram needs at least one value".into()));
        }
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        Self::on_range(values, lo, hi, bins)
    }

    /// Like [`Histogram::from_values`] on a fixed range; values outside are
    /// rejected.
    pub fn on_range(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 bins, got {bins}")));
        }
        if !(hi > lo && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid histogram range [{lo}, {hi}]")));
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            if !(lo..=hi).contains(&v) {
                return Err(Error::InvalidArgument(format!("value {v} outside [{lo}, {hi}]")));
            }
            // the top edge belongs to the last bin
            let i = (((v - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        let total = values.len() as f64;
        let density = counts
            .iter()
            .zip(edges.windows(2))
            .map(|(&c, e)| c as f64 / (total * (e[1] - e[0])))
            .collect();
        Ok(Self { edges, counts, density })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.edges[i] + self.edges[i + 1])
    }

    /// First bin of maximal density.
    pub fn mode_bin(&self) -> usize {
        let mut best = 0;
        for i in 1..self.bins() {
            if self.density[i] > self.density[best] {
                best = i;
            }
        }
        best
    }

    pub fn mode(&self) -> f64 {
        self.center(self.mode_bin())
    }

    /// `Σ density · width`; 1 up to rounding.
    pub fn area(&self) -> f64 {
        self.density.iter().enumerate().map(|(i, d)| d * self.width(i)).sum()
    }

    /// Probability mass of `[a, b]`, assuming uniform density inside bins.
    fn mass(&self, a: f64, b: f64) -> f64 {
        let mut m = 0.0;
        for i in 0..self.bins() {
            let lo = self.edges[i].max(a);
            let hi = self.edges[i + 1].min(b);
            if hi > lo {
                m += self.density[i] * (hi - lo);
            }
        }
        m
    }

    /// Redistributes mass onto `edges` in proportion to bin overlap.
    pub fn rebin(&self, edges: &[f64]) -> Vec<f64> {
        edges
            .windows(2)
            .map(|e| self.mass(e[0], e[1]) / (e[1] - e[0]))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// `m₃ / m₂^{3/2}` from central sample moments; 0 for constant data.
    pub skewness: f64,
}

pub fn moments(values: &[f64]) -> Result<Moments> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument("moments need at least two values".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3) = (0.0, 0.0);
    for v in values {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    let skewness = if m2 > 0.0 { (m3 / n) / (m2 / n).powf(1.5) } else { 0.0 };
    Ok(Moments {
        mean,
        variance: m2 / (n - 1.0),
        skewness,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UqSummary {
    pub histogram: Histogram,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub n_samples: usize,
    pub distribution: DistributionSpec,
    pub seed: u64,
}

/// Draws `n` inputs from `spec`, evaluates `model` on them in chunks, and
/// summarizes the outputs.
pub fn propagate(
    mut model: impl FnMut(&[Vec<f64>]) -> Result<Vec<f64>>,
    spec: &DistributionSpec,
    n: usize,
    bins: usize,
    seed: u64,
) -> Result<UqSummary> {
    let values = push_forward(&mut model, spec, n, seed)?;
    summarize(&values, spec, bins, seed)
}

/// Model outputs at `n` inputs drawn from `spec`.
pub fn push_forward(
    mut model: impl FnMut(&[Vec<f64>]) -> Result<Vec<f64>>,
    spec: &DistributionSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!("need at least {MIN_SAMPLES} samples, got {n}")));
    }
    let mut stream = sample_stream(spec, seed)?;
    let mut values = Vec::with_capacity(n);
    let mut bad = 0;
    while values.len() < n {
        let chunk: Vec<Vec<f64>> = stream.by_ref().take(CHUNK.min(n - values.len())).collect();
        let out = model(&chunk)?;
        if out.len() != chunk.len() {
            return Err(Error::DimensionMismatch {
                expected: chunk.len(),
                got: out.len(),
            });
        }
        bad += out.iter().filter(|v| !v.is_finite()).count();
        values.extend(out);
    }
    if bad > 0 {
        return Err(Error::NonFiniteOutput { count: bad });
    }
    Ok(values)
}

pub fn summarize(values: &[f64], spec: &DistributionSpec, bins: usize, seed: u64) -> Result<UqSummary> {
    let m = moments(values)?;
    Ok(UqSummary {
        histogram: Histogram::from_values(values, bins)?,
        mean: m.mean,
        variance: m.variance,
        skewness: m.skewness,
        n_samples: values.len(),
        distribution: spec.clone(),
        seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramComparison {
    /// `∫ |p_a − p_b|` on the common grid: 0 for identical, 2 for disjoint.
    pub l1_distance: f64,
    /// Modal bin centre of `b` minus that of `a`, on the common grid.
    pub mode_shift: f64,
    pub mean_shift: f64,
}

/// Rebins both histograms onto equal-width bins spanning the union of their
/// ranges, with as many bins as the finer of the two.
pub fn compare_histograms(a: &UqSummary, b: &UqSummary) -> HistogramComparison {
    let (ha, hb) = (&a.histogram, &b.histogram);
    let lo = ha.edges[0].min(hb.edges[0]);
    let hi = ha.edges[ha.bins()].max(hb.edges[hb.bins()]);
    let bins = ha.bins().max(hb.bins());
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
    let (da, db) = (ha.rebin(&edges), hb.rebin(&edges));
    let l1 = da.iter().zip(&db).map(|(x, y)| (x - y).abs()).sum::<f64>() * width;
    let argmax = |d: &[f64]| (1..d.len()).fold(0, |best, i| if d[i] > d[best] { i } else { best });
    HistogramComparison {
        l1_distance: l1,
        mode_shift: (argmax(&db) as f64 - argmax(&da) as f64) * width,
        mean_shift: b.mean - a.mean,
    }
}
