//! Samples, datasets, seeded random streams and the dataset CSV format.
//!
//! The CSV layout is `f0,...,f{d-1},label[,oracle]`: one header row, one
//! sample per line, labels written as `-1` or `1`. Floats are written with
//! Rust's shortest round-trip formatting, so `read(write(ds)) == ds` exactly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn from_sign(v: f64) -> Label {
        if v > 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Negative => -1,
            Label::Positive => 1,
        }
    }
}

impl TryFrom<i64> for Label {
    type Error = String;

    fn try_from(v: i64) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(Label::Negative),
            1 => Ok(Label::Positive),
            other => Err(format!("label must be -1 or 1, got {other}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: Label,
    /// Privileged ordering score, available at training time only.
    pub oracle: Option<f64>,
}

impl LabeledSample {
    pub fn new(features: Vec<f64>, label: Label, oracle: Option<f64>) -> Self {
        LabeledSample {
            features,
            label,
            oracle,
        }
    }

    pub fn y(&self) -> f64 {
        self.label.as_f64()
    }
}

/// An immutable collection of samples sharing one feature dimension.
///
/// Oracle values are either present on every sample or on none.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    dim: usize,
}

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let with_oracle = samples.first().map(|s| s.oracle.is_some()).unwrap_or(false);
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.features.len(),
                });
            }
            if s.oracle.is_some() != with_oracle {
                return Err(Error::InvalidArgument(format!(
                    "sample {i}: oracle values must be present on all samples or none"
                )));
            }
            if let Some(o) = s.oracle {
                if !o.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "sample {i}: non-finite oracle"
                    )));
                }
            }
        }
        Ok(Dataset { samples, dim })
    }

    /// Builds a dataset from row-major features.
    pub fn from_parts(
        features: Vec<Vec<f64>>,
        labels: Vec<Label>,
        oracle: Option<Vec<f64>>,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                found: labels.len(),
            });
        }
        if let Some(o) = &oracle {
            if o.len() != labels.len() {
                return Err(Error::DimensionMismatch {
                    expected: labels.len(),
                    found: o.len(),
                });
            }
        }
        let dim = features.first().map(|f| f.len()).unwrap_or(1);
        let samples = features
            .into_iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (f, l))| LabeledSample::new(f, l, oracle.as_ref().map(|o| o[i])))
            .collect();
        Dataset::new(samples, dim)
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn has_oracle(&self) -> bool {
        self.samples
            .first()
            .map(|s| s.oracle.is_some())
            .unwrap_or(false)
    }

    pub fn labels(&self) -> Vec<Label> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.y()).collect()
    }

    pub fn oracle(&self) -> Option<Vec<f64>> {
        self.samples.iter().map(|s| s.oracle).collect()
    }

    pub fn features(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.iter().map(|s| s.features.as_slice())
    }

    /// (negatives, positives)
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self
            .samples
            .iter()
            .filter(|s| s.label == Label::Positive)
            .count();
        (self.samples.len() - pos, pos)
    }

    pub fn require_both_classes(&self) -> Result<()> {
        let (neg, pos) = self.class_counts();
        if neg == 0 {
            return Err(Error::EmptyClass(-1));
        }
        if pos == 0 {
            return Err(Error::EmptyClass(1));
        }
        Ok(())
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            dim: self.dim,
        }
    }

    pub fn without_oracle(&self) -> Dataset {
        Dataset {
            samples: self
                .samples
                .iter()
                .map(|s| LabeledSample::new(s.features.clone(), s.label, None))
                .collect(),
            dim: self.dim,
        }
    }
}

/// Identifies one reproducible random stream.
///
/// Streams come from ChaCha20 (`rand_chacha::ChaCha20Rng`) keyed by
/// `seed_from_u64(seed)`, with the 64-bit ChaCha stream selector set to
/// `stream_id`. Different realizations of an experiment use different
/// stream ids under one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSeed {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngSeed { seed, stream_id }
    }

    pub fn with_stream(self, stream_id: u64) -> Self {
        RngSeed { stream_id, ..self }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Draws disjoint uniform subsets of the requested sizes, without replacement.
pub fn split(
    ds: &Dataset,
    sizes: [usize; 3],
    seed: RngSeed,
) -> Result<(Dataset, Dataset, Dataset)> {
    if sizes.contains(&0) {
        return Err(Error::InvalidArgument(
            "split sizes must be positive".into(),
        ));
    }
    let total: usize = sizes.iter().sum();
    if total > ds.len() {
        return Err(Error::InsufficientData {
            requested: total,
            available: ds.len(),
        });
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut seed.rng());
    let (a, rest) = idx.split_at(sizes[0]);
    let (b, rest) = rest.split_at(sizes[1]);
    let c = &rest[..sizes[2]];
    Ok((ds.subset(a), ds.subset(b), ds.subset(c)))
}

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset_to(ds, file).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn write_dataset_to(ds: &Dataset, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..ds.dim()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    if ds.has_oracle() {
        header.push("oracle".into());
    }
    w.write_record(&header).map_err(csv_io)?;
    for s in ds.samples() {
        let mut rec: Vec<String> = s.features.iter().map(|v| v.to_string()).collect();
        rec.push(s.label.as_i8().to_string());
        if let Some(o) = s.oracle {
            rec.push(o.to_string());
        }
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush().map_err(|e| Error::io("<writer>", e))?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset_from(file)
}

pub fn read_dataset_from(input: impl Read) -> Result<Dataset> {
    let table = read_table(input)?;
    let label_col = table
        .header
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| Error::Parse {
            line: 1,
            msg: "missing `label` column".into(),
        })?;
    let oracle_col = table.header.iter().position(|h| h == "oracle");
    parse_labeled_rows(&table, label_col, oracle_col, None)
}

pub(crate) struct Table {
    pub header: Vec<String>,
    /// (line number, fields)
    pub rows: Vec<(usize, Vec<String>)>,
}

pub(crate) fn read_table(input: impl Read) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        rows.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(Table { header, rows })
}

/// Every column other than label/oracle is a feature, in header order.
pub(crate) fn parse_labeled_rows(
    table: &Table,
    label_col: usize,
    oracle_col: Option<usize>,
    expected_dim: Option<usize>,
) -> Result<Dataset> {
    let feature_cols: Vec<usize> = (0..table.header.len())
        .filter(|&c| c != label_col && Some(c) != oracle_col)
        .collect();
    let dim = feature_cols.len();
    if let Some(exp) = expected_dim {
        if dim != exp {
            return Err(Error::DimensionMismatch {
                expected: exp,
                found: dim,
            });
        }
    }
    if dim == 0 {
        return Err(Error::Parse {
            line: 1,
            msg: "no feature columns".into(),
        });
    }
    let mut samples = Vec::with_capacity(table.rows.len());
    for (line, fields) in &table.rows {
        let line = *line;
        if fields.len() != table.header.len() {
            return Err(Error::Parse {
                line,
                msg: format!(
                    "expected {} fields, found {}",
                    table.header.len(),
                    fields.len()
                ),
            });
        }
        let features = feature_cols
            .iter()
            .map(|&c| parse_f64(&fields[c], line))
            .collect::<Result<Vec<_>>>()?;
        let label_raw: i64 = fields[label_col].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("invalid label `{}`", fields[label_col]),
        })?;
        let label = Label::try_from(label_raw).map_err(|msg| Error::Parse { line, msg })?;
        let oracle = match oracle_col {
            Some(c) => {
                let v = parse_f64(&fields[c], line)?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        msg: "oracle must be finite".into(),
                    });
                }
                Some(v)
            }
            None => None,
        };
        samples.push(LabeledSample::new(features, label, oracle));
    }
    Dataset::new(samples, dim)
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid number `{s}`"),
    })
}

fn csv_io(e: csv::Error) -> Error {
    Error::io("<csv>", std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::collections::HashSet;

    fn toy(n: usize) -> Dataset {
        let samples = (0..n)
            .map(|i| {
                let l = if i % 2 == 0 {
                    Label::Positive
                } else {
                    Label::Negative
                };
                LabeledSample::new(vec![i as f64], l, None)
            })
            .collect();
        Dataset::new(samples, 1).unwrap()
    }

    #[test]
    fn split_partitions_and_is_deterministic() {
        let ds = toy(10);
        let seed = RngSeed::new(7, 0);
        let (a, b, c) = split(&ds, [5, 3, 2], seed).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (5, 3, 2));
        let all: HashSet<u64> = a
            .features()
            .chain(b.features())
            .chain(c.features())
            .map(|f| f[0] as u64)
            .collect();
        assert_eq!(all.len(), 10);

        let again = split(&ds, [5, 3, 2], seed).unwrap();
        assert_eq!(again, (a, b, c));
    }

    #[test]
    fn split_rejects_oversized_request() {
        let err = split(&toy(10), [8, 8, 8], RngSeed::new(1, 0)).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientData {
                requested: 24,
                available: 10
            }
        ));
    }

    #[test]
    fn streams_differ_by_id() {
        let a: u64 = RngSeed::new(3, 0).rng().random();
        let b: u64 = RngSeed::new(3, 1).rng().random();
        let a2: u64 = RngSeed::new(3, 0).rng().random();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }

    #[test]
    fn parses_single_row_with_oracle() {
        let ds = read_dataset_from("f0,label,oracle\n0.5,1,0.3\n".as_bytes()).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.dim(), 1);
        let s = &ds.samples()[0];
        assert_eq!(s.features, vec![0.5]);
        assert_eq!(s.label, Label::Positive);
        assert_eq!(s.oracle, Some(0.3));
    }

    #[test]
    fn zero_label_is_a_parse_error() {
        let err = read_dataset_from("f0,label\n0.5,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn ragged_row_is_reported_with_line() {
        let err = read_dataset_from("f0,f1,label\n1,2,1\n1,-1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn round_trip_random_samples() {
        let mut rng = RngSeed::new(11, 0).rng();
        let samples = (0..100)
            .map(|_| {
                let f = (0..3).map(|_| rng.random_range(-1e3..1e3)).collect();
                let l = if rng.random_bool(0.5) {
                    Label::Positive
                } else {
                    Label::Negative
                };
                LabeledSample::new(f, l, Some(rng.random::<f64>()))
            })
            .collect();
        let ds = Dataset::new(samples, 3).unwrap();
        let mut buf = Vec::new();
        write_dataset_to(&ds, &mut buf).unwrap();
        let back = read_dataset_from(buf.as_slice()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn mixed_oracle_presence_rejected() {
        let samples = vec![
            LabeledSample::new(vec![0.0], Label::Positive, Some(1.0)),
            LabeledSample::new(vec![1.0], Label::Negative, None),
        ];
        assert!(Dataset::new(samples, 1).is_err());
    }
}
