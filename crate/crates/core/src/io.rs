//! Instance generation, benchmark readers and the dataset container.
//!
//! # Dataset container layout (version 1)
//!
//! ```text
//! offset  size  field
//! 0       8     magic "PFSSDATA"
//! 8       1     format version (currently 1)
//! 9       4     header length H, u32 little-endian
//! 13      H     UTF-8 JSON header (see [`DatasetHeader`])
//! 13+H    ...   body: for each instance, machines*jobs f64 little-endian,
//!               row-major (machine-major)
//! ```
//!
//! The header records the instance shapes, so the body length is fully
//! determined and checked on load.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Gamma, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::PfssError;
use crate::instance::{Instance, Metadata};

pub const DATASET_MAGIC: &[u8; 8] = b"PFSSDATA";
pub const DATASET_VERSION: u8 = 1;
/// Generator pinned in dataset headers.
pub const RNG_NAME: &str = "chacha8/stream-per-instance";

#[derive(Error, Debug)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported container version {found} (expected {expected})")]
    VersionMismatch { found: u8, expected: u8 },
    #[error("corrupt container: {0}")]
    Corrupt(String),
    #[error("invalid header: {0}")]
    Header(#[from] serde_json::Error),
    #[error(transparent)]
    Instance(#[from] PfssError),
}

pub type DataResult<T> = std::result::Result<T, DataError>;

/// Entry distribution of generated instances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TimeDistribution {
    Gamma { shape: f64, scale: f64 },
    /// Samples below zero are clamped to zero.
    Normal { mean: f64, std_dev: f64 },
}

impl TimeDistribution {
    pub const GAMMA_DEFAULT: Self = Self::Gamma { shape: 1.0, scale: 2.0 };
    pub const NORMAL_DEFAULT: Self = Self::Normal { mean: 6.0, std_dev: 6.0 };

    pub fn normal_sweep(std_dev: f64) -> Self {
        Self::Normal { mean: 6.0, std_dev }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub count: usize,
    pub jobs: usize,
    pub machines: usize,
    pub distribution: TimeDistribution,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), PfssError> {
        let bad = |m: String| Err(PfssError::InvalidParameter(m));
        if self.count == 0 {
            return bad("dataset needs at least one instance".into());
        }
        if self.jobs == 0 || self.machines == 0 {
            return bad(format!("shape {}x{} is empty", self.machines, self.jobs));
        }
        match self.distribution {
            TimeDistribution::Gamma { shape, scale } if !(shape > 0.0 && scale > 0.0) => {
                bad(format!("gamma parameters must be positive, got k={shape}, theta={scale}"))
            }
            TimeDistribution::Normal { mean, std_dev } if !(mean.is_finite() && std_dev >= 0.0 && std_dev.is_finite()) => {
                bad(format!("normal parameters invalid: mu={mean}, sigma={std_dev}"))
            }
            _ => Ok(()),
        }
    }
}

/// Draws `spec.count` instances. Instance `i` uses stream `i` of a ChaCha8
/// generator keyed by `spec.seed`, so any single instance can be regenerated
/// on its own.
pub fn generate(spec: &DatasetSpec) -> Result<Vec<Instance>, PfssError> {
    spec.validate()?;
    (0..spec.count).map(|i| generate_one(spec, i as u64)).collect()
}

pub fn generate_one(spec: &DatasetSpec, index: u64) -> Result<Instance, PfssError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);
    let len = spec.machines * spec.jobs;
    let times: Vec<f64> = match spec.distribution {
        TimeDistribution::Gamma { shape, scale } => {
            let d = Gamma::new(shape, scale).map_err(|e| PfssError::InvalidParameter(e.to_string()))?;
            (0..len).map(|_| d.sample(&mut rng)).collect()
        }
        TimeDistribution::Normal { mean, std_dev } if std_dev == 0.0 => vec![mean.max(0.0); len],
        TimeDistribution::Normal { mean, std_dev } => {
            let d = Normal::new(mean, std_dev).map_err(|e| PfssError::InvalidParameter(e.to_string()))?;
            (0..len).map(|_| d.sample(&mut rng).max(0.0)).collect()
        }
    };
    let meta = Metadata { name: Some(format!("gen-{index}")), source: Some("generated".into()), seed: Some(spec.seed) };
    Ok(Instance::new(spec.machines, spec.jobs, times)?.with_meta(meta))
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { inner: text.lines().enumerate(), last: 0 }
    }

    /// Next non-blank line with its 1-based number.
    fn next_nonblank(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            if !l.trim().is_empty() {
                return Some((i + 1, l));
            }
        }
        None
    }
}

fn numbers(line: &str, lineno: usize) -> DataResult<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| DataError::Parse { line: lineno, msg: format!("expected a number, found {tok:?}") })
        })
        .collect()
}

fn has_letters(line: &str) -> bool {
    line.chars().any(|c| c.is_ascii_alphabetic())
}

fn count(v: f64, what: &str, line: usize) -> DataResult<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e9 {
        Ok(v as usize)
    } else {
        Err(DataError::Parse { line, msg: format!("{what} must be a positive integer, got {v}") })
    }
}

/// Reads Taillard flow-shop files: repeated blocks of a descriptive line, a
/// line `jobs machines seed upper lower`, a `processing times :` line and
/// `machines` rows of `jobs` integers. The compact variant with a bare
/// `jobs machines` header and no label lines is accepted too.
pub fn parse_taillard(text: &str) -> DataResult<Vec<Instance>> {
    let mut lines = Lines::new(text);
    let mut out = Vec::new();
    while let Some((mut lineno, mut line)) = lines.next_nonblank() {
        if has_letters(line) {
            (lineno, line) = lines.next_nonblank().ok_or(DataError::Parse {
                line: lines.last + 1,
                msg: "missing header values after label".into(),
            })?;
        }
        let header = numbers(line, lineno)?;
        if header.len() < 2 {
            return Err(DataError::Parse { line: lineno, msg: "header needs job and machine counts".into() });
        }
        let jobs = count(header[0], "job count", lineno)?;
        let machines = count(header[1], "machine count", lineno)?;
        let seed = header.get(2).map(|&s| s as u64);

        let mut rows = Vec::with_capacity(machines);
        while rows.len() < machines {
            let Some((no, l)) = lines.next_nonblank() else {
                return Err(DataError::Parse {
                    line: lines.last + 1,
                    msg: format!("missing machine row {} of {machines} (file truncated)", rows.len() + 1),
                });
            };
            if has_letters(l) {
                if rows.is_empty() {
                    continue; // "processing times :"
                }
                return Err(DataError::Parse {
                    line: no,
                    msg: format!("missing machine row {} of {machines}", rows.len() + 1),
                });
            }
            let row = numbers(l, no)?;
            if row.len() != jobs {
                return Err(DataError::Parse {
                    line: no,
                    msg: format!("machine row {} has {} entries, expected {jobs}", rows.len() + 1, row.len()),
                });
            }
            rows.push(row);
        }
        let meta = Metadata {
            name: Some(format!("taillard-{jobs}x{machines}-{}", out.len() + 1)),
            source: Some("taillard".into()),
            seed,
        };
        out.push(Instance::from_rows(&rows)?.with_meta(meta));
    }
    Ok(out)
}

/// Reads VRF files: a `jobs machines` line, then one line per job listing
/// `machine time` pairs for machines `0..machines` in order. Several
/// instances may follow each other.
pub fn parse_vrf(text: &str) -> DataResult<Vec<Instance>> {
    let mut lines = Lines::new(text);
    let mut out = Vec::new();
    while let Some((lineno, line)) = lines.next_nonblank() {
        let header = numbers(line, lineno)?;
        if header.len() != 2 {
            return Err(DataError::Parse { line: lineno, msg: "header must be `jobs machines`".into() });
        }
        let jobs = count(header[0], "job count", lineno)?;
        let machines = count(header[1], "machine count", lineno)?;
        let mut times = vec![0.0; machines * jobs];
        for j in 0..jobs {
            let (no, l) = lines.next_nonblank().ok_or(DataError::Parse {
                line: lines.last + 1,
                msg: format!("missing job row {} of {jobs} (file truncated)", j + 1),
            })?;
            let vals = numbers(l, no)?;
            if vals.len() != 2 * machines {
                return Err(DataError::Parse {
                    line: no,
                    msg: format!("job row {} has {} values, expected {} machine/time pairs", j + 1, vals.len(), machines),
                });
            }
            for (i, pair) in vals.chunks(2).enumerate() {
                if pair[0] != i as f64 {
                    return Err(DataError::Parse {
                        line: no,
                        msg: format!("job row {}: expected machine index {i}, found {}", j + 1, pair[0]),
                    });
                }
                times[i * jobs + j] = pair[1];
            }
        }
        let meta = Metadata {
            name: Some(format!("vrf-{jobs}x{machines}-{}", out.len() + 1)),
            source: Some("vrf".into()),
            seed: None,
        };
        out.push(Instance::new(machines, jobs, times)?.with_meta(meta));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceHeader {
    pub machines: usize,
    pub jobs: usize,
    #[serde(default)]
    pub meta: Metadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub version: u8,
    pub rng: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<DatasetSpec>,
    pub count: usize,
    pub instances: Vec<InstanceHeader>,
}

/// Serializes a dataset into container bytes.
pub fn encode_dataset(instances: &[Instance], spec: Option<&DatasetSpec>) -> DataResult<Vec<u8>> {
    let header = DatasetHeader {
        version: DATASET_VERSION,
        rng: RNG_NAME.into(),
        spec: spec.cloned(),
        count: instances.len(),
        instances: instances
            .iter()
            .map(|x| InstanceHeader { machines: x.machines(), jobs: x.jobs(), meta: x.meta.clone() })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let body: usize = instances.iter().map(|x| x.times().len() * 8).sum();
    let mut buf = Vec::with_capacity(13 + json.len() + body);
    buf.extend_from_slice(DATASET_MAGIC);
    buf.push(DATASET_VERSION);
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    for inst in instances {
        for t in inst.times() {
            buf.extend_from_slice(&t.to_le_bytes());
        }
    }
    Ok(buf)
}

/// Splits a container into its JSON header and body, checking magic and version.
pub(crate) fn split_container<'a>(bytes: &'a [u8], magic: &[u8; 8], version: u8) -> DataResult<(&'a [u8], &'a [u8])> {
    if bytes.len() < 13 || &bytes[..8] != magic {
        return Err(DataError::Corrupt("bad magic".into()));
    }
    if bytes[8] != version {
        return Err(DataError::VersionMismatch { found: bytes[8], expected: version });
    }
    let len = u32::from_le_bytes(bytes[9..13].try_into().expect("4 bytes")) as usize;
    let end = 13usize.checked_add(len).filter(|&e| e <= bytes.len()).ok_or_else(|| DataError::Corrupt("header overruns file".into()))?;
    Ok((&bytes[13..end], &bytes[end..]))
}

pub fn decode_dataset(bytes: &[u8]) -> DataResult<(DatasetHeader, Vec<Instance>)> {
    let (json, body) = split_container(bytes, DATASET_MAGIC, DATASET_VERSION)?;
    let header: DatasetHeader = serde_json::from_slice(json)?;
    if header.version != DATASET_VERSION {
        return Err(DataError::VersionMismatch { found: header.version, expected: DATASET_VERSION });
    }
    if header.count != header.instances.len() {
        return Err(DataError::Corrupt(format!("count {} but {} shapes", header.count, header.instances.len())));
    }
    let expected: usize = header.instances.iter().map(|h| h.machines * h.jobs * 8).sum();
    if body.len() != expected {
        return Err(DataError::Corrupt(format!("body has {} bytes, expected {expected}", body.len())));
    }
    let mut out = Vec::with_capacity(header.count);
    let mut at = 0;
    for h in &header.instances {
        let len = h.machines * h.jobs;
        let times = body[at..at + len * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        at += len * 8;
        out.push(Instance::new(h.machines, h.jobs, times)?.with_meta(h.meta.clone()));
    }
    Ok((header, out))
}

pub fn save_dataset(path: impl AsRef<Path>, instances: &[Instance], spec: Option<&DatasetSpec>) -> DataResult<()> {
    fs::write(path, encode_dataset(instances, spec)?)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> DataResult<Vec<Instance>> {
    Ok(decode_dataset(&fs::read(path)?)?.1)
}

/// Loads a dataset container or, by content sniffing, a Taillard or VRF text file.
pub fn load_any(path: impl AsRef<Path>) -> DataResult<Vec<Instance>> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(DATASET_MAGIC) {
        return Ok(decode_dataset(&bytes)?.1);
    }
    let text = String::from_utf8(bytes).map_err(|_| DataError::Corrupt("neither a container nor text".into()))?;
    if has_letters(&text) {
        return parse_taillard(&text);
    }
    // VRF job rows carry machine/time pairs, so the second line is twice as wide
    // as a Taillard row would suggest
    let mut it = text.lines().filter(|l| !l.trim().is_empty());
    let first = it.next().map(|l| l.split_whitespace().count()).unwrap_or(0);
    let second = it.next().map(|l| l.split_whitespace().count()).unwrap_or(0);
    let header = text.split_whitespace().take(2).filter_map(|t| t.parse::<usize>().ok()).collect::<Vec<_>>();
    if first == 2 && header.len() == 2 && second == 2 * header[1] {
        parse_vrf(&text)
    } else {
        parse_taillard(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_normal_is_constant() {
        let spec = DatasetSpec { count: 3, jobs: 7, machines: 4, distribution: TimeDistribution::normal_sweep(0.0), seed: 5 };
        for inst in generate(&spec).unwrap() {
            assert!(inst.times().iter().all(|&t| t == 6.0));
        }
    }

    #[test]
    fn generation_is_reproducible_per_index() {
        let spec = DatasetSpec { count: 4, jobs: 5, machines: 3, distribution: TimeDistribution::GAMMA_DEFAULT, seed: 11 };
        let a = generate(&spec).unwrap();
        assert_eq!(a, generate(&spec).unwrap());
        assert_eq!(a[2], generate_one(&spec, 2).unwrap());
        assert_ne!(a[0].times(), a[1].times());
    }

    #[test]
    fn invalid_specs() {
        let mut spec = DatasetSpec { count: 1, jobs: 2, machines: 2, distribution: TimeDistribution::Gamma { shape: 0.0, scale: 2.0 }, seed: 0 };
        assert!(generate(&spec).is_err());
        spec.distribution = TimeDistribution::Normal { mean: 6.0, std_dev: -1.0 };
        assert!(generate(&spec).is_err());
        spec.distribution = TimeDistribution::GAMMA_DEFAULT;
        spec.count = 0;
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn taillard_snippet() {
        let text = "number of jobs, number of machines, initial seed, upper bound and lower bound :\n\
                    2 2 42 10 9\nprocessing times :\n 1 2\n 3 4\n";
        let v = parse_taillard(text).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].row(0), &[1.0, 2.0]);
        assert_eq!(v[0].row(1), &[3.0, 4.0]);
        assert_eq!(v[0].meta.seed, Some(42));
        let compact = parse_taillard("2 2\n1 2\n3 4\n").unwrap();
        assert_eq!(compact[0].times(), v[0].times());
    }

    #[test]
    fn taillard_truncated_names_missing_row() {
        let text = "number of jobs...\n 3 3 1 1 1\nprocessing times :\n 1 2 3\n 4 5 6\n";
        let err = parse_taillard(text).unwrap_err();
        match err {
            DataError::Parse { line, msg } => {
                assert_eq!(line, 6);
                assert!(msg.contains("missing machine row 3 of 3"), "{msg}");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_taillard("2 2\n1 2 3\n4 5\n"), Err(DataError::Parse { line: 2, .. })));
    }

    #[test]
    fn vrf_snippet_and_bad_machine_index() {
        let v = parse_vrf("2 2\n0 1 1 3\n0 2 1 4\n").unwrap();
        assert_eq!(v[0].row(0), &[1.0, 2.0]);
        assert_eq!(v[0].row(1), &[3.0, 4.0]);
        let err = parse_vrf("2 2\n0 1 1 3\n0 2 2 4\n").unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 3, .. }), "{err:?}");
        assert!(matches!(parse_vrf("2 2\n0 1 1 3\n"), Err(DataError::Parse { .. })));
    }

    #[test]
    fn empty_dataset_round_trips() {
        let bytes = encode_dataset(&[], None).unwrap();
        let (h, v) = decode_dataset(&bytes).unwrap();
        assert_eq!(h.count, 0);
        assert!(v.is_empty());
    }

    #[test]
    fn flipped_version_byte_is_rejected() {
        let spec = DatasetSpec { count: 2, jobs: 3, machines: 2, distribution: TimeDistribution::GAMMA_DEFAULT, seed: 1 };
        let mut bytes = encode_dataset(&generate(&spec).unwrap(), Some(&spec)).unwrap();
        bytes[8] ^= 0xff;
        assert!(matches!(decode_dataset(&bytes), Err(DataError::VersionMismatch { expected: 1, .. })));
    }

    #[test]
    fn truncated_body_is_corrupt() {
        let spec = DatasetSpec { count: 2, jobs: 3, machines: 2, distribution: TimeDistribution::GAMMA_DEFAULT, seed: 1 };
        let bytes = encode_dataset(&generate(&spec).unwrap(), Some(&spec)).unwrap();
        assert!(matches!(decode_dataset(&bytes[..bytes.len() - 8]), Err(DataError::Corrupt(_))));
    }
}
