//! Sample storage, CSV ingestion, normalization, space-filling designs and
//! input-uncertainty distributions.

use std::path::Path;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{check_dim, Error, Result};

/// Minimum separation between two points of the same fidelity level, measured
/// in normalized coordinates.
pub const DUPLICATE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub x: Vec<f64>,
    pub y: f64,
}

impl SamplePoint {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    Cheap,
    Expensive,
}

impl std::fmt::Display for Fidelity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Fidelity::Cheap => f.write_str("cheap"),
            Fidelity::Expensive => f.write_str("expensive"),
        }
    }
}

/// Header names selecting the input columns and the output column of a CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub inputs: Vec<String>,
    pub output: String,
}

impl ColumnMap {
    pub fn new<S: Into<String>>(inputs: impl IntoIterator<Item = S>, output: impl Into<String>) -> Self {
        Self {
            inputs: inputs.into_iter().map(Into::into).collect(),
            output: output.into(),
        }
    }
}

fn open_csv(path: &Path) -> Result<(csv::Reader<std::fs::File>, csv::StringRecord)> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    Ok((reader, headers))
}

fn column_indices(path: &Path, headers: &csv::StringRecord, names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn {
                    path: path.to_path_buf(),
                    column: name.to_string(),
                })
        })
        .collect()
}

fn parse_cell(record: &csv::StringRecord, row: usize, idx: usize, name: &str) -> Result<f64> {
    let cell = record.get(idx).unwrap_or("");
    cell.parse::<f64>().map_err(|_| Error::Parse {
        row,
        column: name.to_string(),
        value: cell.to_string(),
    })
}

/// Header names of a CSV, skipping leading `#` comment lines.
pub fn csv_headers(path: &Path) -> Result<Vec<String>> {
    let (_, headers) = open_csv(path)?;
    Ok(headers.iter().map(str::to_string).collect())
}

/// Every column but the last is an input; the last is the output.
pub fn default_columns(path: &Path) -> Result<ColumnMap> {
    let mut names = csv_headers(path)?;
    if names.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "{} needs at least one input column and one output column",
            path.display()
        )));
    }
    let output = names.pop().expect("length checked");
    Ok(ColumnMap::new(names, output))
}

/// Reads one fidelity level from a headed CSV. Columns are looked up by
/// header name; row order is preserved and values are kept in raw units.
pub fn ingest_csv(path: &Path, fidelity: Fidelity, columns: &ColumnMap) -> Result<Vec<SamplePoint>> {
    let (mut reader, headers) = open_csv(path)?;
    let input_idx = column_indices(path, &headers, &columns.inputs)?;
    let output_idx = column_indices(path, &headers, std::slice::from_ref(&columns.output))?[0];

    let mut points = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let x = input_idx
            .iter()
            .zip(&columns.inputs)
            .map(|(&i, name)| parse_cell(&record, row, i, name))
            .collect::<Result<Vec<_>>>()?;
        let y = parse_cell(&record, row, output_idx, &columns.output)?;
        points.push(SamplePoint { x, y });
    }
    if points.is_empty() {
        warn!("{}: no {fidelity} samples after the header row", path.display());
    }
    Ok(points)
}

/// Reads input coordinates only, e.g. prediction sites.
pub fn read_inputs(path: &Path, inputs: &[String]) -> Result<Vec<Vec<f64>>> {
    let (mut reader, headers) = open_csv(path)?;
    let idx = column_indices(path, &headers, inputs)?;
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        out.push(
            idx.iter()
                .zip(inputs)
                .map(|(&i, name)| parse_cell(&record, row, i, name))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(out)
}

/// Per-dimension affine map from raw units onto `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Normalization {
    pub fn identity(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_identity(&self) -> bool {
        self.lower.iter().all(|&l| l == 0.0) && self.upper.iter().all(|&u| u == 1.0)
    }

    /// Width of dimension `j` in raw units.
    pub fn scale(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| (v - self.lower[j]) / self.scale(j))
            .collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(j, &v)| self.lower[j] + v * self.scale(j))
            .collect()
    }

    /// The map equivalent to applying `self` and then `next`.
    fn then(&self, next: &Normalization) -> Normalization {
        let lower = (0..self.dim())
            .map(|j| self.lower[j] + next.lower[j] * self.scale(j))
            .collect();
        let upper = (0..self.dim())
            .map(|j| self.lower[j] + next.upper[j] * self.scale(j))
            .collect();
        Normalization { lower, upper }
    }
}

/// Paired cheap and expensive samples over a shared input space.
///
/// Coordinates are stored in "model space"; `normalization` records the map
/// from raw units to model space (identity until [`normalize`] is applied).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiFidelityDataset {
    pub cheap: Vec<SamplePoint>,
    pub expensive: Vec<SamplePoint>,
    pub dim: usize,
    pub normalization: Normalization,
}

impl MultiFidelityDataset {
    pub fn new(cheap: Vec<SamplePoint>, expensive: Vec<SamplePoint>) -> Result<Self> {
        let dim = cheap
            .first()
            .or_else(|| expensive.first())
            .map(|p| p.x.len())
            .ok_or_else(|| Error::InvalidArgument("dataset needs at least one sample".into()))?;
        if dim == 0 {
            return Err(Error::InvalidArgument("samples must have at least one input".into()));
        }
        if cheap.is_empty() || expensive.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "need at least one sample per fidelity (cheap = {}, expensive = {})",
                cheap.len(),
                expensive.len()
            )));
        }
        for p in cheap.iter().chain(&expensive) {
            check_dim(dim, p.x.len())?;
        }
        if cheap.len() < expensive.len() {
            warn!(
                "fewer cheap samples ({}) than expensive samples ({})",
                cheap.len(),
                expensive.len()
            );
        }
        let ds = Self {
            cheap,
            expensive,
            dim,
            normalization: Normalization::identity(dim),
        };
        let scales = ds.union_ranges().map(|(lo, hi)| if hi > lo { hi - lo } else { 1.0 });
        let scales: Vec<f64> = scales.collect();
        for (level, points) in [(Fidelity::Cheap, &ds.cheap), (Fidelity::Expensive, &ds.expensive)] {
            if let Some((i, j)) = find_duplicate(points, &scales, DUPLICATE_TOL) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate {level} samples at rows {i} and {j}"
                )));
            }
        }
        Ok(ds)
    }

    /// (min, max) per dimension over the union of both fidelity levels.
    fn union_ranges(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.dim).map(move |j| {
            self.cheap
                .iter()
                .chain(&self.expensive)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p.x[j]), hi.max(p.x[j]))
                })
        })
    }

    pub fn xs(&self, level: Fidelity) -> Vec<Vec<f64>> {
        self.level(level).iter().map(|p| p.x.clone()).collect()
    }

    pub fn ys(&self, level: Fidelity) -> Vec<f64> {
        self.level(level).iter().map(|p| p.y).collect()
    }

    pub fn level(&self, level: Fidelity) -> &[SamplePoint] {
        match level {
            Fidelity::Cheap => &self.cheap,
            Fidelity::Expensive => &self.expensive,
        }
    }

    /// Appends an expensive sample given in model-space coordinates.
    pub fn push_expensive(&mut self, point: SamplePoint) -> Result<()> {
        check_dim(self.dim, point.x.len())?;
        if self
            .expensive
            .iter()
            .any(|p| euclidean(&p.x, &point.x) <= DUPLICATE_TOL)
        {
            return Err(Error::InvalidArgument(format!(
                "expensive sample at {:?} already exists",
                point.x
            )));
        }
        self.expensive.push(point);
        Ok(())
    }
}

/// Maps every coordinate onto `[0, 1]` using the union range of both fidelity
/// levels. Idempotent: normalizing normalized data returns it unchanged.
pub fn normalize(dataset: &MultiFidelityDataset) -> Result<MultiFidelityDataset> {
    let mut step = Normalization::identity(dataset.dim);
    for (j, (lo, hi)) in dataset.union_ranges().enumerate() {
        if !(hi > lo) {
            return Err(Error::ConstantDimension { dim: j, value: lo });
        }
        step.lower[j] = lo;
        step.upper[j] = hi;
    }
    if step.is_identity() {
        return Ok(dataset.clone());
    }
    let map = |points: &[SamplePoint]| {
        points
            .iter()
            .map(|p| SamplePoint::new(step.to_unit(&p.x), p.y))
            .collect::<Vec<_>>()
    };
    Ok(MultiFidelityDataset {
        cheap: map(&dataset.cheap),
        expensive: map(&dataset.expensive),
        dim: dataset.dim,
        normalization: dataset.normalization.then(&step),
    })
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Returns the first pair of points closer than `tol` after dividing each
/// coordinate by `scales`. Sort-and-sweep on the first coordinate.
fn find_duplicate(points: &[SamplePoint], scales: &[f64], tol: f64) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    let key = |i: usize| points[i].x[0] / scales[0];
    order.sort_by(|&a, &b| key(a).total_cmp(&key(b)));
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if key(j) - key(i) > tol {
                break;
            }
            let dist = points[i]
                .x
                .iter()
                .zip(&points[j].x)
                .zip(scales)
                .map(|((a, b), s)| ((a - b) / s).powi(2))
                .sum::<f64>()
                .sqrt();
            if dist <= tol {
                return Some((i.min(j), i.max(j)));
            }
        }
    }
    None
}

/// Latin hypercube design on `[0, 1)^dim`: in every dimension each of the `n`
/// strata `[i/n, (i+1)/n)` holds exactly one point.
pub fn latin_hypercube(n: usize, dim: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 || dim == 0 {
        return Err(Error::InvalidArgument(format!(
            "latin hypercube needs n >= 1 and dim >= 1 (got n = {n}, dim = {dim})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![vec![0.0; dim]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..dim {
        // Fisher-Yates
        for i in (1..n).rev() {
            let k = rng.gen_range(0..=i);
            perm.swap(i, k);
        }
        for (point, &stratum) in points.iter_mut().zip(&perm) {
            let lo = stratum as f64 / n as f64;
            let hi = (stratum + 1) as f64 / n as f64;
            let v = lo + rng.gen::<f64>() * (hi - lo);
            point[j] = if v < hi { v } else { lo };
        }
    }
    Ok(points)
}

/// Independent per-dimension input law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistributionSpec {
    Uniform {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    GaussianTruncated {
        mean: Vec<f64>,
        stddev: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
}

impl DistributionSpec {
    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        let spec = DistributionSpec::Uniform {
            lower: vec![lower; dim],
            upper: vec![upper; dim],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn truncated_gaussian(dim: usize, mean: f64, stddev: f64, lower: f64, upper: f64) -> Result<Self> {
        let spec = DistributionSpec::GaussianTruncated {
            mean: vec![mean; dim],
            stddev: vec![stddev; dim],
            lower: vec![lower; dim],
            upper: vec![upper; dim],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.bounds().0.len()
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        match self {
            DistributionSpec::Uniform { lower, upper } => (lower, upper),
            DistributionSpec::GaussianTruncated { lower, upper, .. } => (lower, upper),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lower, upper) = self.bounds();
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidArgument("distribution bounds must be non-empty and of equal length".into()));
        }
        if let Some(j) = (0..lower.len()).find(|&j| !(lower[j] < upper[j])) {
            return Err(Error::InvalidArgument(format!(
                "distribution dimension {j}: lower {} must be below upper {}",
                lower[j], upper[j]
            )));
        }
        if let DistributionSpec::GaussianTruncated { mean, stddev, .. } = self {
            if mean.len() != lower.len() || stddev.len() != lower.len() {
                return Err(Error::InvalidArgument("gaussian parameters must match the bound dimension".into()));
            }
            if let Some(j) = stddev.iter().position(|&s| !(s > 0.0)) {
                return Err(Error::InvalidArgument(format!("stddev in dimension {j} must be positive")));
            }
        }
        Ok(())
    }

    fn marginals(&self) -> Vec<Marginal> {
        match self {
            DistributionSpec::Uniform { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(&l, &u)| Marginal::Uniform { lower: l, upper: u })
                .collect(),
            DistributionSpec::GaussianTruncated {
                mean,
                stddev,
                lower,
                upper,
            } => (0..lower.len())
                .map(|j| Marginal::truncated(mean[j], stddev[j], lower[j], upper[j]))
                .collect(),
        }
    }
}

enum Marginal {
    Uniform {
        lower: f64,
        upper: f64,
    },
    Truncated {
        normal: Normal,
        lower: f64,
        upper: f64,
        cdf_lower: f64,
        mass: f64,
    },
}

impl Marginal {
    fn truncated(mean: f64, stddev: f64, lower: f64, upper: f64) -> Self {
        let normal = Normal::new(mean, stddev).expect("validated stddev");
        let cdf_lower = normal.cdf(lower);
        let mass = normal.cdf(upper) - cdf_lower;
        Marginal::Truncated {
            normal,
            lower,
            upper,
            cdf_lower,
            mass,
        }
    }

    fn sample(&self, u: f64) -> f64 {
        match *self {
            Marginal::Uniform { lower, upper } => lower + u * (upper - lower),
            Marginal::Truncated {
                ref normal,
                lower,
                upper,
                cdf_lower,
                mass,
            } => normal.inverse_cdf(cdf_lower + u * mass).clamp(lower, upper),
        }
    }

    fn density(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { lower, upper } => {
                if (lower..=upper).contains(&x) {
                    1.0 / (upper - lower)
                } else {
                    0.0
                }
            }
            Marginal::Truncated {
                ref normal,
                lower,
                upper,
                mass,
                ..
            } => {
                if (lower..=upper).contains(&x) {
                    normal.pdf(x) / mass
                } else {
                    0.0
                }
            }
        }
    }
}

/// Draws `n` input vectors; deterministic in `(spec, n, seed)`. Truncated
/// Gaussians are sampled by inverse CDF on the truncated interval.
pub fn sample_distribution(spec: &DistributionSpec, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    Ok(sample_stream(spec, seed)?.take(n).collect())
}

/// Endless version of [`sample_distribution`]: the first `n` items are the
/// same `n` points.
pub fn sample_stream(spec: &DistributionSpec, seed: u64) -> Result<impl Iterator<Item = Vec<f64>>> {
    spec.validate()?;
    let marginals = spec.marginals();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(std::iter::repeat_with(move || marginals.iter().map(|m| m.sample(rng.gen::<f64>())).collect()))
}

/// Joint density: the product of the marginal densities, zero outside the box.
pub fn pdf(spec: &DistributionSpec, x: &[f64]) -> Result<f64> {
    check_dim(spec.dim(), x.len())?;
    Ok(spec
        .marginals()
        .iter()
        .zip(x)
        .map(|(m, &v)| m.density(v))
        .product())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn aoa_map() -> ColumnMap {
        ColumnMap::new(["aoa"], "cl")
    }

    #[test]
    fn ingest_lift_tables() {
        let f = write_csv("aoa,cl\n1,0.4797\n3,0.6368\n");
        let pts = ingest_csv(f.path(), Fidelity::Cheap, &aoa_map()).unwrap();
        assert_eq!(pts[0], SamplePoint::new(vec![1.0], 0.4797));
        assert_eq!(pts[1], SamplePoint::new(vec![3.0], 0.6368));

        let f = write_csv("cl,aoa\n0.6270,1\n");
        let pts = ingest_csv(f.path(), Fidelity::Expensive, &aoa_map()).unwrap();
        assert_eq!(pts, vec![SamplePoint::new(vec![1.0], 0.6270)]);
    }

    #[test]
    fn ingest_empty_and_errors() {
        let f = write_csv("aoa,cl\n");
        assert!(ingest_csv(f.path(), Fidelity::Cheap, &aoa_map()).unwrap().is_empty());

        let f = write_csv("aoa,cd\n1,0.1\n");
        match ingest_csv(f.path(), Fidelity::Cheap, &aoa_map()) {
            Err(Error::MissingColumn { column, .. }) => assert_eq!(column, "cl"),
            other => panic!("unexpected {other:?}"),
        }

        let f = write_csv("aoa,cl\n1,0.1\n3,abc\n");
        match ingest_csv(f.path(), Fidelity::Cheap, &aoa_map()) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(column, "cl");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn default_columns_take_last_as_output() {
        let f = write_csv("# config_sha256=ab\nx1,x2,y\n0,1,2\n3,4,5\n");
        let map = default_columns(f.path()).unwrap();
        assert_eq!(map, ColumnMap::new(["x1", "x2"], "y"));
        let xs = read_inputs(f.path(), &map.inputs).unwrap();
        assert_eq!(xs, vec![vec![0.0, 1.0], vec![3.0, 4.0]]);
        assert!(default_columns(write_csv("y\n1\n").path()).is_err());
    }

    fn aoa_dataset() -> MultiFidelityDataset {
        let pts = |ys: [f64; 4]| {
            [1.0, 3.0, 5.0, 7.0]
                .iter()
                .zip(ys)
                .map(|(&a, y)| SamplePoint::new(vec![a], y))
                .collect::<Vec<_>>()
        };
        MultiFidelityDataset::new(pts([0.4797, 0.6368, 0.8192, 0.9572]), pts([0.6270, 0.7623, 0.9333, 0.9929])).unwrap()
    }

    #[test]
    fn normalize_aoa() {
        let ds = normalize(&aoa_dataset()).unwrap();
        let xs: Vec<f64> = ds.cheap.iter().map(|p| p.x[0]).collect();
        assert_eq!(xs, vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert_eq!(ds.normalization.lower, vec![1.0]);
        assert_eq!(ds.normalization.upper, vec![7.0]);

        let again = normalize(&ds).unwrap();
        assert_eq!(again, ds);

        let raw = ds.normalization.from_unit(&ds.expensive[2].x);
        assert!((raw[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_constant_dimension() {
        let p = |a: f64, y: f64| SamplePoint::new(vec![a, 5.0], y);
        let ds = MultiFidelityDataset::new(vec![p(0.0, 1.0), p(1.0, 2.0)], vec![p(0.5, 1.0)]).unwrap();
        match normalize(&ds) {
            Err(Error::ConstantDimension { dim, value }) => {
                assert_eq!(dim, 1);
                assert_eq!(value, 5.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicates_rejected() {
        let p = |a: f64| SamplePoint::new(vec![a], 0.0);
        assert!(MultiFidelityDataset::new(vec![p(0.0), p(0.0)], vec![p(0.0)]).is_err());
        // the same site may appear once per fidelity level
        assert!(MultiFidelityDataset::new(vec![p(0.0), p(1.0)], vec![p(0.0)]).is_ok());
    }

    fn stratum(v: f64, n: usize) -> usize {
        let mut i = ((v * n as f64) as usize).min(n - 1);
        while (i as f64 / n as f64) > v {
            i -= 1;
        }
        while ((i + 1) as f64 / n as f64) <= v {
            i += 1;
        }
        i
    }

    fn assert_stratified(points: &[Vec<f64>], n: usize, dim: usize) {
        assert_eq!(points.len(), n);
        for j in 0..dim {
            let mut seen = vec![false; n];
            for p in points {
                assert!((0.0..1.0).contains(&p[j]));
                let s = stratum(p[j], n);
                assert!(!seen[s], "stratum {s} hit twice in dim {j}");
                seen[s] = true;
            }
        }
    }

    #[test]
    fn lhs_examples() {
        assert_stratified(&latin_hypercube(4, 1, 99).unwrap(), 4, 1);
        let one = latin_hypercube(1, 3, 5).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0].iter().all(|v| (0.0..1.0).contains(v)));
        assert_eq!(latin_hypercube(50, 4, 11).unwrap(), latin_hypercube(50, 4, 11).unwrap());
        assert!(latin_hypercube(0, 2, 1).is_err());
        assert_stratified(&latin_hypercube(10_000, 3, 2).unwrap(), 10_000, 3);
        assert_stratified(&latin_hypercube(200, 100, 3).unwrap(), 200, 100);
    }

    #[test]
    fn uniform_mean() {
        let spec = DistributionSpec::uniform(1, 0.6, 0.8).unwrap();
        let xs = sample_distribution(&spec, 100_000, 3).unwrap();
        let mean = xs.iter().map(|x| x[0]).sum::<f64>() / xs.len() as f64;
        assert!((mean - 0.7).abs() < 0.002, "mean {mean}");
        assert!(sample_distribution(&spec, 0, 3).is_err());
    }

    #[test]
    fn truncated_bounds() {
        let spec = DistributionSpec::truncated_gaussian(1, 0.7, 0.03, 0.6, 0.8).unwrap();
        let xs = sample_distribution(&spec, 20_000, 1).unwrap();
        assert!(xs.iter().all(|x| (0.6..=0.8).contains(&x[0])));

        let spec = DistributionSpec::truncated_gaussian(32, 0.0, 1.0, -3.0, 3.0).unwrap();
        let xs = sample_distribution(&spec, 500, 2).unwrap();
        assert!(xs.iter().all(|x| x.len() == 32 && x.iter().all(|v| (-3.0..=3.0).contains(v))));
    }

    #[test]
    fn pdf_values() {
        let spec = DistributionSpec::uniform(1, 0.6, 0.8).unwrap();
        assert!((pdf(&spec, &[0.7]).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(pdf(&spec, &[0.9]).unwrap(), 0.0);
        assert!(pdf(&spec, &[0.7, 0.7]).is_err());
    }

    #[test]
    fn invalid_specs() {
        assert!(DistributionSpec::uniform(1, 1.0, 1.0).is_err());
        assert!(DistributionSpec::truncated_gaussian(1, 0.0, 0.0, -1.0, 1.0).is_err());
    }
}
