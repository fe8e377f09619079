//! Timestamped measurement streams: CSV ingestion, time splits and spatial
//! standardization.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Every record carries a phenomenon value `a`.
    Valued,
    /// Every record is one detection event without a value.
    Event,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Valued => "valued",
            Mode::Event => "event",
        }
    }
}

/// One observation: value `a` (absent in event mode) measured at spatial
/// coordinates `x` and time `t` (seconds).
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement<F: Scalar> {
    pub t: f64,
    pub x: Vec<F>,
    pub a: Option<F>,
}

impl<F: Scalar> Measurement<F> {
    pub fn valued(t: f64, a: F, x: Vec<F>) -> Self {
        Self { t, x, a: Some(a) }
    }

    pub fn event(t: f64, x: Vec<F>) -> Self {
        Self { t, x, a: None }
    }
}

/// Immutable collection of measurements sorted ascending by time.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F: Scalar> {
    records: Vec<Measurement<F>>,
    spatial_dim: usize,
    mode: Mode,
}

impl<F: Scalar> Dataset<F> {
    /// Validates and time-sorts `records`. An empty record list is accepted
    /// here; training entry points reject it.
    pub fn new(mut records: Vec<Measurement<F>>, spatial_dim: usize, mode: Mode) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if !r.t.is_finite() {
                return Err(Error::InvalidRecord(format!(
                    "record {i}: non-finite timestamp"
                )));
            }
            if r.x.len() != spatial_dim {
                return Err(Error::DimensionMismatch {
                    expected: spatial_dim,
                    found: r.x.len(),
                });
            }
            if r.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidRecord(format!(
                    "record {i}: non-finite coordinate"
                )));
            }
            match (mode, r.a) {
                (Mode::Valued, Some(a)) if a.is_finite() => {}
                (Mode::Valued, Some(_)) => {
                    return Err(Error::InvalidRecord(format!(
                        "record {i}: non-finite value"
                    )))
                }
                (Mode::Valued, None) => {
                    return Err(Error::InvalidRecord(format!("record {i}: missing value")))
                }
                (Mode::Event, Some(_)) => {
                    return Err(Error::InvalidRecord(format!(
                        "record {i}: value present in event-mode data"
                    )))
                }
                (Mode::Event, None) => {}
            }
        }
        records.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(Self {
            records,
            spatial_dim,
            mode,
        })
    }

    /// Infers dimension and mode from the first record.
    pub fn from_records(records: Vec<Measurement<F>>) -> Result<Self> {
        let first = records.first().ok_or(Error::EmptyDataset)?;
        let d = first.x.len();
        let mode = if first.a.is_some() {
            Mode::Valued
        } else {
            Mode::Event
        };
        Self::new(records, d, mode)
    }

    pub fn records(&self) -> &[Measurement<F>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn spatial_dim(&self) -> usize {
        self.spatial_dim
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    /// Values in record order; zeros are never substituted, event data
    /// yields an empty vector.
    pub fn values(&self) -> Vec<F> {
        self.records.iter().filter_map(|r| r.a).collect()
    }

    pub fn time_range(&self) -> Option<(f64, f64)> {
        Some((self.records.first()?.t, self.records.last()?.t))
    }

    pub fn duration(&self) -> f64 {
        self.time_range().map_or(0.0, |(lo, hi)| hi - lo)
    }

    pub fn require_non_empty(&self) -> Result<()> {
        if self.records.is_empty() {
            Err(Error::EmptyDataset)
        } else {
            Ok(())
        }
    }

    pub fn require_mode(&self, mode: Mode) -> Result<()> {
        if self.mode == mode {
            Ok(())
        } else {
            Err(Error::ModeMismatch {
                expected: mode.name(),
            })
        }
    }

    /// Records with `t` in `[lo, hi)`.
    pub fn slice_time(&self, lo: f64, hi: f64) -> Self {
        Self {
            records: self
                .records
                .iter()
                .filter(|r| r.t >= lo && r.t < hi)
                .cloned()
                .collect(),
            spatial_dim: self.spatial_dim,
            mode: self.mode,
        }
    }
}

/// Column positions for files without a header row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub t: usize,
    pub a: Option<usize>,
    pub x: Vec<usize>,
}

impl CsvSchema {
    /// Canonical layout: `t`, then `a` when valued, then `x1..xd`.
    pub fn canonical(spatial_dim: usize, mode: Mode) -> Self {
        let offset = match mode {
            Mode::Valued => 2,
            Mode::Event => 1,
        };
        Self {
            t: 0,
            a: (mode == Mode::Valued).then_some(1),
            x: (0..spatial_dim).map(|k| k + offset).collect(),
        }
    }

    fn from_header(header: &csv::StringRecord) -> Result<Self> {
        let mut t = None;
        let mut a = None;
        let mut xs = BTreeMap::new();
        for (col, name) in header.iter().enumerate() {
            let name = name.trim();
            match name {
                "t" => t = Some(col),
                "a" => a = Some(col),
                _ => {
                    let k = name
                        .strip_prefix('x')
                        .and_then(|k| k.parse::<usize>().ok())
                        .filter(|&k| k >= 1)
                        .ok_or_else(|| Error::Parse {
                            line: 1,
                            message: format!("unknown column '{name}'"),
                        })?;
                    if xs.insert(k, col).is_some() {
                        return Err(Error::Parse {
                            line: 1,
                            message: format!("duplicate column '{name}'"),
                        });
                    }
                }
            }
        }
        let t = t.ok_or_else(|| Error::Parse {
            line: 1,
            message: "missing 't' column".into(),
        })?;
        for (expected, k) in xs.keys().enumerate() {
            if *k != expected + 1 {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("spatial columns must be x1..x{}", xs.len()),
                });
            }
        }
        Ok(Self {
            t,
            a,
            x: xs.into_values().collect(),
        })
    }

    fn width(&self) -> usize {
        self.x
            .iter()
            .copied()
            .chain(self.a)
            .chain(std::iter::once(self.t))
            .max()
            .map_or(0, |m| m + 1)
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Explicit schema; required when the file has no header row.
    pub schema: Option<CsvSchema>,
    pub headerless: bool,
}

pub fn load_csv<F: Scalar>(path: &Path, opts: &LoadOptions) -> Result<Dataset<F>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, opts)
}

pub fn read_csv<F: Scalar, R: Read>(reader: R, opts: &LoadOptions) -> Result<Dataset<F>> {
    let (records, spatial_dim, mode) = read_records(reader, opts)?;
    Dataset::new(records, spatial_dim, mode)
}

/// Parses rows in file order, returning them with the spatial dimension
/// and mode implied by the schema.
pub fn read_records<F: Scalar, R: Read>(
    reader: R,
    opts: &LoadOptions,
) -> Result<(Vec<Measurement<F>>, usize, Mode)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = rdr.records();

    let schema = if opts.headerless {
        opts.schema
            .clone()
            .ok_or_else(|| Error::InvalidConfig("headerless CSV needs an explicit schema".into()))?
    } else {
        let header = rows.next().ok_or(Error::EmptyDataset)??;
        match &opts.schema {
            Some(s) => s.clone(),
            None => CsvSchema::from_header(&header)?,
        }
    };
    let width = schema.width();
    let mode = if schema.a.is_some() {
        Mode::Valued
    } else {
        Mode::Event
    };

    let mut records = Vec::new();
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, found {}", row.len()),
            });
        }
        let field = |col: usize| -> Result<f64> {
            row[col].parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("'{}' is not a number", &row[col]),
            })
        };
        let scalar = |col: usize| -> Result<F> {
            row[col].parse::<F>().map_err(|_| Error::Parse {
                line,
                message: format!("'{}' is not a number", &row[col]),
            })
        };
        let t = field(schema.t)?;
        let a = schema.a.map(scalar).transpose()?;
        let x = schema
            .x
            .iter()
            .map(|&c| scalar(c))
            .collect::<Result<Vec<_>>>()?;
        if !t.is_finite() || x.iter().chain(a.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line,
                message: "non-finite field".into(),
            });
        }
        records.push(Measurement { t, x, a });
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok((records, schema.x.len(), mode))
}

/// Writes the canonical `t[,a],x1..` layout with a header row.
pub fn write_csv<F: Scalar, W: Write>(ds: &Dataset<F>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    if ds.mode == Mode::Valued {
        header.push("a".into());
    }
    header.extend((1..=ds.spatial_dim).map(|k| format!("x{k}")));
    w.write_record(&header)?;
    for r in &ds.records {
        let mut row = vec![r.t.to_string()];
        if let Some(a) = r.a {
            row.push(a.to_string());
        }
        row.extend(r.x.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv writer>".into(),
        source,
    })?;
    Ok(())
}

/// Splits into records with `t < boundary` and the rest.
pub fn split_by_time<F: Scalar>(
    ds: &Dataset<F>,
    boundary: f64,
) -> Result<(Dataset<F>, Dataset<F>)> {
    let (min, max) = ds.time_range().ok_or(Error::EmptyDataset)?;
    if !(boundary >= min && boundary <= max) {
        return Err(Error::BoundaryOutOfRange { boundary, min, max });
    }
    let cut = ds.records.partition_point(|r| r.t < boundary);
    if cut == 0 || cut == ds.records.len() {
        return Err(Error::EmptyPartition { boundary });
    }
    let part = |records: &[Measurement<F>]| Dataset {
        records: records.to_vec(),
        spatial_dim: ds.spatial_dim,
        mode: ds.mode,
    };
    Ok((part(&ds.records[..cut]), part(&ds.records[cut..])))
}

/// Per-dimension mean and standard deviation of the spatial coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SpatialStats<F: Scalar> {
    pub mean: Vec<F>,
    pub std: Vec<F>,
}

impl<F: Scalar> SpatialStats<F> {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![F::zero(); dim],
            std: vec![F::one(); dim],
        }
    }

    /// Population statistics; a zero-variance dimension gets `std = 1`.
    pub fn from_dataset(ds: &Dataset<F>) -> Result<Self> {
        ds.require_non_empty()?;
        let n = F::from_usize_lossy(ds.len());
        let d = ds.spatial_dim;
        let mut mean = vec![F::zero(); d];
        for r in &ds.records {
            for (m, &v) in mean.iter_mut().zip(&r.x) {
                *m = *m + v;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / n);
        let mut var = vec![F::zero(); d];
        for r in &ds.records {
            for k in 0..d {
                let dv = r.x[k] - mean[k];
                var[k] = var[k] + dv * dv;
            }
        }
        let std = var
            .iter()
            .zip(&mean)
            .map(|(&v, &m)| {
                let s = (v / n).sqrt();
                let tiny = F::epsilon() * F::lit(16.0) * (F::one() + m.abs());
                if s > tiny && s.is_finite() {
                    s
                } else {
                    F::one()
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[F]) -> Result<Vec<F>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect())
    }

    /// Product of the standard deviations: the volume scale between raw and
    /// standardized coordinates.
    pub fn volume_scale(&self) -> F {
        self.std.iter().fold(F::one(), |acc, &s| acc * s)
    }
}

pub fn standardize<F: Scalar>(ds: &Dataset<F>, stats: &SpatialStats<F>) -> Result<Dataset<F>> {
    if stats.dim() != ds.spatial_dim {
        return Err(Error::DimensionMismatch {
            expected: ds.spatial_dim,
            found: stats.dim(),
        });
    }
    let records = ds
        .records
        .iter()
        .map(|r| {
            Ok(Measurement {
                t: r.t,
                a: r.a,
                x: stats.apply(&r.x)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        records,
        spatial_dim: ds.spatial_dim,
        mode: ds.mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset<f64>> {
        read_csv(text.as_bytes(), &LoadOptions::default())
    }

    #[test]
    fn loads_valued_without_space() {
        let ds = parse("t,a\n0,1\n60,0").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.spatial_dim(), 0);
        assert_eq!(ds.mode(), Mode::Valued);
        assert_eq!(ds.values(), vec![1.0, 0.0]);
    }

    #[test]
    fn infers_event_mode() {
        let ds = parse("t,x1,x2\n0,1.0,2.0").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.spatial_dim(), 2);
        assert_eq!(ds.mode(), Mode::Event);
        assert_eq!(ds.records()[0].x, vec![1.0, 2.0]);
    }

    #[test]
    fn reports_line_of_bad_field() {
        let err = parse("t,a\nabc,1").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn reports_wrong_arity() {
        let err = parse("t,a\n0,1\n1,2,3").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn empty_inputs_are_errors() {
        assert!(matches!(parse(""), Err(Error::EmptyDataset)));
        assert!(matches!(parse("t,a\n"), Err(Error::EmptyDataset)));
    }

    #[test]
    fn header_order_is_free_and_sorted_by_time() {
        let ds = parse("x1,a,t\n5,1,100\n6,0,50").unwrap();
        assert_eq!(ds.times(), vec![50.0, 100.0]);
        assert_eq!(ds.records()[0].x, vec![6.0]);
    }

    #[test]
    fn headerless_needs_schema() {
        let opts = LoadOptions {
            headerless: true,
            schema: None,
        };
        assert!(read_csv::<f64, _>("0,1\n".as_bytes(), &opts).is_err());
        let opts = LoadOptions {
            headerless: true,
            schema: Some(CsvSchema::canonical(1, Mode::Valued)),
        };
        let ds: Dataset<f64> = read_csv("0,1,3\n10,0,4\n".as_bytes(), &opts).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.records()[1].x, vec![4.0]);
    }

    #[test]
    fn unknown_column_rejected() {
        assert!(parse("t,speed\n0,1").is_err());
    }

    fn ten() -> Dataset<f64> {
        Dataset::from_records(
            (0..10)
                .map(|i| Measurement::valued(i as f64, 1.0, vec![]))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn split_partitions_at_boundary() {
        let (a, b) = split_by_time(&ten(), 5.0).unwrap();
        assert_eq!((a.len(), b.len()), (5, 5));
        assert!(a.times().iter().all(|&t| t < 5.0));
    }

    #[test]
    fn split_rejects_empty_or_out_of_range() {
        assert!(matches!(
            split_by_time(&ten(), 0.0),
            Err(Error::EmptyPartition { .. })
        ));
        assert!(matches!(
            split_by_time(&ten(), 20.0),
            Err(Error::BoundaryOutOfRange { .. })
        ));
    }

    fn spatial(xs: &[f64]) -> Dataset<f64> {
        Dataset::from_records(
            xs.iter()
                .enumerate()
                .map(|(i, &x)| Measurement::event(i as f64, vec![x]))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn standardize_two_points() {
        let ds = spatial(&[0.0, 2.0]);
        let stats = SpatialStats::from_dataset(&ds).unwrap();
        assert_eq!(stats.mean, vec![1.0]);
        assert_eq!(stats.std, vec![1.0]);
        let z = standardize(&ds, &stats).unwrap();
        assert_eq!(z.records()[0].x, vec![-1.0]);
        assert_eq!(z.records()[1].x, vec![1.0]);
    }

    #[test]
    fn identity_stats_are_identity() {
        let ds = spatial(&[0.3, 7.0, -2.0]);
        let z = standardize(&ds, &SpatialStats::identity(1)).unwrap();
        assert_eq!(z, ds);
    }

    #[test]
    fn constant_column_clamps_std() {
        let ds = spatial(&[4.2, 4.2, 4.2]);
        let stats = SpatialStats::from_dataset(&ds).unwrap();
        assert_eq!(stats.std, vec![1.0]);
        let z = standardize(&ds, &stats).unwrap();
        assert!(z.records().iter().all(|r| r.x[0].abs() < 1e-12));
    }

    #[test]
    fn standardize_dimension_mismatch() {
        let ds = spatial(&[1.0, 2.0]);
        assert!(standardize(&ds, &SpatialStats::identity(2)).is_err());
    }

    #[test]
    fn valued_record_without_value_rejected() {
        let r = vec![Measurement::<f64>::event(0.0, vec![])];
        assert!(Dataset::new(r, 0, Mode::Valued).is_err());
    }

    #[test]
    fn file_round_trip_and_missing_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let ds = parse("t,a,x1\n2,0.5,1\n1,0.25,3\n").unwrap();
        write_csv(&ds, File::create(&path).unwrap()).unwrap();
        let back: Dataset<f64> = load_csv(&path, &LoadOptions::default()).unwrap();
        assert_eq!(back, ds);
        let missing = dir.path().join("missing.csv");
        let err = load_csv::<f64>(&missing, &LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("missing.csv"));
    }
}
