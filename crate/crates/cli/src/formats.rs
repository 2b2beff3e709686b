//! On-disk formats: the binary feature file, CSV feature import, score and
//! ROC CSVs, and verification pair lists.
//!
//! Feature file layout (all integers and floats little-endian):
//!
//! ```text
//! magic    b"CSRC"
//! version  u32 = 1
//! flag     u8   0 = flat vectors, 1 = activation tensors
//! dims     flat: u32 D, u32 M    tensor: u32 n1, u32 n2, u32 n, u32 M
//! records  M x (record length) f64
//! labels   M x u32
//! ids      M x (u32 byte length, UTF-8 bytes)
//! ```
//!
//! Tensor records are stored in flattened order: map by map, each map row by
//! row.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sparserec::evaluation::{RocPoint, ScoreRecord, ScoreSet};
use sparserec::features::ActivationTensor;
use sparserec::{Dataset, FeatureVector};
use thiserror::Error;

use crate::error::{CliError, CliResult};

pub const FEATURE_MAGIC: [u8; 4] = *b"CSRC";
pub const FEATURE_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum FormatError {
    #[error("bad magic bytes \"{found}\" (expected \"{expected}\")")]
    BadMagic { found: String, expected: &'static str },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("truncated file: {section} needs {needed} bytes at byte offset {offset}, {available} available")]
    TruncatedFile {
        section: &'static str,
        offset: usize,
        needed: usize,
        available: usize,
    },

    #[error("{extra} unexpected trailing bytes at byte offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },

    #[error("unknown layout flag {0}")]
    InvalidFlag(u8),

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("id of record {record} is not valid UTF-8")]
    InvalidUtf8 { record: usize },

    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
}

/// Shape of the records in a feature file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureLayout {
    Flat { dim: usize },
    Tensor { n1: usize, n2: usize, channels: usize },
}

impl FeatureLayout {
    pub fn record_len(&self) -> usize {
        match *self {
            FeatureLayout::Flat { dim } => dim,
            FeatureLayout::Tensor { n1, n2, channels } => n1 * n2 * channels,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub layout: FeatureLayout,
    pub records: Vec<Vec<f64>>,
    pub labels: Vec<u32>,
    pub ids: Vec<String>,
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pub(crate) pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    /// Checks the 4-byte magic and the version word.
    pub(crate) fn header(&mut self, magic: &'static [u8; 4], version: u32) -> Result<(), FormatError> {
        let expected = std::str::from_utf8(magic).unwrap_or_default();
        let found = &self.bytes[..self.bytes.len().min(4)];
        if found != magic {
            return Err(FormatError::BadMagic {
                found: found.escape_ascii().to_string(),
                expected,
            });
        }
        self.pos = 4;
        let found = self.u32("version")?;
        if found != version {
            return Err(FormatError::VersionMismatch { found, expected: version });
        }
        Ok(())
    }

    pub(crate) fn finish(&self) -> Result<(), FormatError> {
        if self.pos != self.bytes.len() {
            return Err(FormatError::TrailingBytes {
                offset: self.pos,
                extra: self.bytes.len() - self.pos,
            });
        }
        Ok(())
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize, section: &'static str) -> Result<&'a [u8], FormatError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(FormatError::TruncatedFile {
                section,
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn u32(&mut self, section: &'static str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4, section)?.try_into().unwrap()))
    }

    pub(crate) fn f64s(&mut self, n: usize, section: &'static str) -> Result<Vec<f64>, FormatError> {
        let raw = self.take(n.saturating_mul(8), section)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

fn dim_u32(value: usize, what: &str) -> Result<u32, FormatError> {
    u32::try_from(value).map_err(|_| FormatError::InvalidDimensions(format!("{what} = {value} exceeds u32")))
}

impl FeatureFile {
    pub fn flat(records: Vec<Vec<f64>>, labels: Vec<u32>, ids: Vec<String>) -> Result<Self, FormatError> {
        let dim = records.first().map_or(0, |r| r.len());
        Self::with_layout(FeatureLayout::Flat { dim }, records, labels, ids)
    }

    pub fn with_layout(
        layout: FeatureLayout,
        records: Vec<Vec<f64>>,
        labels: Vec<u32>,
        ids: Vec<String>,
    ) -> Result<Self, FormatError> {
        if layout.record_len() == 0 {
            return Err(FormatError::InvalidDimensions("record length must be positive".into()));
        }
        if labels.len() != records.len() || ids.len() != records.len() {
            return Err(FormatError::InvalidDimensions(format!(
                "{} records, {} labels, {} ids",
                records.len(),
                labels.len(),
                ids.len()
            )));
        }
        if let Some(i) = records.iter().position(|r| r.len() != layout.record_len()) {
            return Err(FormatError::InvalidDimensions(format!(
                "record {i} has length {}, layout needs {}",
                records[i].len(),
                layout.record_len()
            )));
        }
        Ok(Self {
            layout,
            records,
            labels,
            ids,
        })
    }

    pub fn from_dataset(ds: &Dataset) -> Result<Self, FormatError> {
        let labels = ds
            .samples()
            .iter()
            .map(|s| dim_u32(s.class_label, "class label"))
            .collect::<Result<_, _>>()?;
        Self::flat(
            ds.samples().iter().map(|s| s.values.clone()).collect(),
            labels,
            ds.samples().iter().map(|s| s.id.clone()).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Samples as a dataset; tensor records are used in their stored
    /// (flattened) order.
    pub fn to_dataset(&self) -> sparserec::Result<Dataset> {
        Dataset::new(
            self.records
                .iter()
                .zip(&self.labels)
                .zip(&self.ids)
                .map(|((r, &l), id)| FeatureVector::new(id.clone(), l as usize, r.clone()))
                .collect(),
        )
    }

    /// One activation tensor per record. Fails for flat files.
    pub fn tensors(&self) -> sparserec::Result<Vec<ActivationTensor>> {
        let FeatureLayout::Tensor { n1, n2, channels } = self.layout else {
            return Err(sparserec::Error::InvalidParameters(
                "feature file holds flat vectors, not activation tensors".into(),
            ));
        };
        self.records
            .iter()
            .map(|r| {
                let maps: Vec<Vec<f64>> = r.chunks_exact(n1 * n2).map(<[f64]>::to_vec).collect();
                debug_assert_eq!(maps.len(), channels);
                ActivationTensor::new(n1, n2, maps)
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, FormatError> {
        let m = self.records.len();
        let mut out = Vec::with_capacity(32 + m * (self.layout.record_len() * 8 + 8));
        out.extend_from_slice(&FEATURE_MAGIC);
        out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
        match self.layout {
            FeatureLayout::Flat { dim } => {
                out.push(0);
                out.extend_from_slice(&dim_u32(dim, "D")?.to_le_bytes());
            }
            FeatureLayout::Tensor { n1, n2, channels } => {
                out.push(1);
                for (v, what) in [(n1, "n1"), (n2, "n2"), (channels, "n")] {
                    out.extend_from_slice(&dim_u32(v, what)?.to_le_bytes());
                }
            }
        }
        out.extend_from_slice(&dim_u32(m, "M")?.to_le_bytes());
        for r in &self.records {
            for v in r {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for l in &self.labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
        for id in &self.ids {
            out.extend_from_slice(&dim_u32(id.len(), "id length")?.to_le_bytes());
            out.extend_from_slice(id.as_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader::new(bytes);
        r.header(&FEATURE_MAGIC, FEATURE_VERSION)?;
        let layout = match r.take(1, "layout flag")?[0] {
            0 => FeatureLayout::Flat {
                dim: r.u32("dimension header")? as usize,
            },
            1 => FeatureLayout::Tensor {
                n1: r.u32("dimension header")? as usize,
                n2: r.u32("dimension header")? as usize,
                channels: r.u32("dimension header")? as usize,
            },
            other => return Err(FormatError::InvalidFlag(other)),
        };
        let m = r.u32("record count")? as usize;
        let len = layout.record_len();
        if len == 0 {
            return Err(FormatError::InvalidDimensions("record length must be positive".into()));
        }
        // check the payload size before allocating for it
        let needed = m.saturating_mul(len).saturating_mul(8);
        if needed > r.remaining() {
            return Err(FormatError::TruncatedFile {
                section: "feature records",
                offset: r.pos,
                needed,
                available: r.remaining(),
            });
        }
        let mut records = Vec::with_capacity(m);
        for _ in 0..m {
            records.push(r.f64s(len, "feature records")?);
        }
        let mut labels = Vec::with_capacity(m);
        for _ in 0..m {
            labels.push(r.u32("label block")?);
        }
        let mut ids = Vec::with_capacity(m);
        for record in 0..m {
            let n = r.u32("id block")? as usize;
            let raw = r.take(n, "id block")?;
            ids.push(
                String::from_utf8(raw.to_vec()).map_err(|_| FormatError::InvalidUtf8 { record })?,
            );
        }
        r.finish()?;
        Self::with_layout(layout, records, labels, ids)
    }

    /// Parses `id,class,v1,...,vD` lines. A first line starting with `id,` is
    /// treated as a header; blank lines and `#` comments are skipped.
    pub fn from_csv(text: &str) -> Result<Self, FormatError> {
        let mut records = Vec::new();
        let mut labels = Vec::new();
        let mut ids = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (records.is_empty() && line.starts_with("id,")) {
                continue;
            }
            let csv = |message: String| FormatError::Csv { line: i + 1, message };
            let mut fields = line.split(',').map(str::trim);
            let id = fields.next().unwrap_or_default().to_string();
            let label = fields
                .next()
                .ok_or_else(|| csv("missing class column".into()))?
                .parse::<u32>()
                .map_err(|e| csv(format!("class: {e}")))?;
            let values = fields
                .map(|f| f.parse::<f64>().map_err(|e| csv(format!("value `{f}`: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(first) = records.first() {
                let first: &Vec<f64> = first;
                if first.len() != values.len() {
                    return Err(csv(format!("{} values, earlier rows have {}", values.len(), first.len())));
                }
            }
            records.push(values);
            labels.push(label);
            ids.push(id);
        }
        Self::flat(records, labels, ids)
    }

    /// Reads a binary feature file, or a CSV feature table when the path ends
    /// in `.csv`.
    pub fn read(path: &Path) -> CliResult<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        let parsed = if is_csv && !bytes.starts_with(&FEATURE_MAGIC) {
            let text = String::from_utf8(bytes).map_err(|_| FormatError::Csv {
                line: 0,
                message: "not UTF-8".into(),
            });
            text.and_then(|t| Self::from_csv(&t))
        } else {
            Self::from_bytes(&bytes)
        };
        parsed.map_err(|e| CliError::format(path, e))
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let bytes = self.to_bytes().map_err(|e| CliError::format(path, e))?;
        fs::write(path, bytes).map_err(|e| CliError::io(path, e))
    }
}

/// Full-precision float for machine-readable outputs (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

pub const SCORE_CSV_HEADER: &str = "probe_id,claimed_class,score,is_genuine";

pub fn scores_to_csv(s: &ScoreSet) -> String {
    let mut out = String::with_capacity(s.len() * 48);
    out.push_str(SCORE_CSV_HEADER);
    out.push('\n');
    for r in s.records() {
        writeln!(out, "{},{},{},{}", r.probe_id, r.claimed_class, fmt_f64(r.score), r.is_genuine).unwrap();
    }
    out
}

pub fn scores_from_csv(text: &str) -> Result<ScoreSet, FormatError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SCORE_CSV_HEADER => {}
        _ => {
            return Err(FormatError::Csv {
                line: 1,
                message: format!("expected header `{SCORE_CSV_HEADER}`"),
            })
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let csv = |message: String| FormatError::Csv { line: i + 1, message };
        // ids may contain commas, the last three fields may not
        let mut parts = line.rsplitn(4, ',');
        let is_genuine = parts.next().unwrap_or_default();
        let score = parts.next().ok_or_else(|| csv("missing score".into()))?;
        let claimed = parts.next().ok_or_else(|| csv("missing claimed_class".into()))?;
        let probe_id = parts.next().ok_or_else(|| csv("missing probe_id".into()))?;
        records.push(ScoreRecord {
            probe_id: probe_id.to_string(),
            claimed_class: claimed.parse().map_err(|e| csv(format!("claimed_class: {e}")))?,
            score: score.parse().map_err(|e| csv(format!("score: {e}")))?,
            is_genuine: is_genuine.trim().parse().map_err(|e| csv(format!("is_genuine: {e}")))?,
        });
    }
    ScoreSet::new(records).map_err(|e| FormatError::Csv {
        line: 0,
        message: e.to_string(),
    })
}

pub fn roc_to_csv(points: &[RocPoint]) -> String {
    let mut out = String::from("threshold,far,gmr\n");
    for p in points {
        writeln!(out, "{},{},{}", fmt_f64(p.threshold), fmt_f64(p.far), fmt_f64(p.gmr)).unwrap();
    }
    out
}

/// Parses a `probe_id,claimed_class` pair list (optional header).
pub fn pairs_from_csv(text: &str) -> Result<Vec<(String, usize)>, FormatError> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("probe_id")) {
            continue;
        }
        let (id, class) = line.rsplit_once(',').ok_or_else(|| FormatError::Csv {
            line: i + 1,
            message: "expected `probe_id,claimed_class`".into(),
        })?;
        let class = class.trim().parse().map_err(|e| FormatError::Csv {
            line: i + 1,
            message: format!("claimed_class: {e}"),
        })?;
        pairs.push((id.trim().to_string(), class));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_file() -> FeatureFile {
        FeatureFile::flat(
            vec![vec![1.5, -2.0, 0.1], vec![0.0, 3.25, 1e-300]],
            vec![0, 3],
            vec!["a".into(), "ünï,code".into()],
        )
        .unwrap()
    }

    #[test]
    fn header_layout_is_exact() {
        let bytes = sample_file().to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"CSRC");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(bytes[8], 0);
        assert_eq!(&bytes[9..13], &3u32.to_le_bytes());
        assert_eq!(&bytes[13..17], &2u32.to_le_bytes());
        assert_eq!(&bytes[17..25], &1.5f64.to_le_bytes());
        let expected_len = 17 + 2 * 3 * 8 + 2 * 4 + (4 + 1) + (4 + "ünï,code".len());
        assert_eq!(bytes.len(), expected_len);
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let mut bytes = sample_file().to_bytes().unwrap();
        bytes[4] = 2;
        assert_eq!(
            FeatureFile::from_bytes(&bytes),
            Err(FormatError::VersionMismatch { found: 2, expected: 1 })
        );
        bytes[0] = b'X';
        assert!(matches!(FeatureFile::from_bytes(&bytes), Err(FormatError::BadMagic { .. })));
        assert!(matches!(FeatureFile::from_bytes(b"CS"), Err(FormatError::BadMagic { .. })));
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = sample_file().to_bytes().unwrap();
        let err = FeatureFile::from_bytes(&bytes[..30]).unwrap_err();
        assert_eq!(
            err,
            FormatError::TruncatedFile {
                section: "feature records",
                offset: 17,
                needed: 48,
                available: 13
            }
        );
        assert!(err.to_string().contains("byte offset 17"));
        let err = FeatureFile::from_bytes(&bytes[..bytes.len() - 1]).unwrap_err();
        assert!(matches!(err, FormatError::TruncatedFile { section: "id block", .. }));
    }

    #[test]
    fn rejects_trailing_bytes() {
        let mut bytes = sample_file().to_bytes().unwrap();
        bytes.push(0);
        assert!(matches!(FeatureFile::from_bytes(&bytes), Err(FormatError::TrailingBytes { extra: 1, .. })));
    }

    #[test]
    fn tensor_layout() {
        let f = FeatureFile::with_layout(
            FeatureLayout::Tensor { n1: 2, n2: 2, channels: 2 },
            vec![vec![1., 2., 3., 4., 5., 6., 7., 8.]],
            vec![0],
            vec!["t".into()],
        )
        .unwrap();
        let back = FeatureFile::from_bytes(&f.to_bytes().unwrap()).unwrap();
        assert_eq!(back, f);
        let t = &back.tensors().unwrap()[0];
        assert_eq!(t.get(1, 0, 1), 6.0);
        assert!(sample_file().tensors().is_err());
    }

    #[test]
    fn csv_import() {
        let f = FeatureFile::from_csv("id,class,f1,f2\n# comment\nx,0,1.0,2\ny,1,3,4.5\n").unwrap();
        assert_eq!(f.records, vec![vec![1.0, 2.0], vec![3.0, 4.5]]);
        assert_eq!(f.labels, vec![0, 1]);
        assert_eq!(f.ids, vec!["x", "y"]);
        assert!(matches!(
            FeatureFile::from_csv("x,0,1\ny,1,1,2\n"),
            Err(FormatError::Csv { line: 2, .. })
        ));
        assert!(matches!(FeatureFile::from_csv("x,zero,1\n"), Err(FormatError::Csv { line: 1, .. })));
    }

    #[test]
    fn score_csv_round_trip() {
        let s = ScoreSet::new(vec![
            ScoreRecord { probe_id: "p,1".into(), claimed_class: 2, score: 0.1 + 0.2, is_genuine: true },
            ScoreRecord { probe_id: "q".into(), claimed_class: 0, score: -1e-17, is_genuine: false },
        ])
        .unwrap();
        let text = scores_to_csv(&s);
        assert!(text.starts_with("probe_id,claimed_class,score,is_genuine\n"));
        assert_eq!(scores_from_csv(&text).unwrap(), s);
    }

    #[test]
    fn pair_lists() {
        let pairs = pairs_from_csv("probe_id,claimed_class\na,1\nb , 0\n").unwrap();
        assert_eq!(pairs, vec![("a".to_string(), 1), ("b".to_string(), 0)]);
        assert!(pairs_from_csv("a;1\n").is_err());
    }

    proptest! {
        #[test]
        fn binary_round_trip_is_bit_exact(
            rows in prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 4), 1..8),
            ids in prop::collection::vec("[a-z0-9_ ]{0,12}", 8),
        ) {
            let m = rows.len();
            let f = FeatureFile::flat(rows, (0..m as u32).collect(), ids[..m].to_vec()).unwrap();
            let back = FeatureFile::from_bytes(&f.to_bytes().unwrap()).unwrap();
            for (a, b) in back.records.iter().flatten().zip(f.records.iter().flatten()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            prop_assert_eq!(back, f);
        }

        #[test]
        fn fmt_f64_round_trips(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
