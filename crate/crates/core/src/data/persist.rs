//! File formats: `.geoms.jsonl`, `.gflow.ckpt`, `.pairs.bin`, `metrics.csv`.
//!
//! Binary formats start with one JSON header line followed by little-endian
//! `f64` payloads.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SizeHistogram;
use crate::costs::CostSpace;
use crate::error::{Error, Result};
use crate::flow::{CouplingPair, CouplingSet, PairSource, TrainConfig};
use crate::geometry::{Geometry, LatentGeometry, PointSet};
use crate::nn::{ModelArch, Parameterized, VectorFieldModel};

pub const CHECKPOINT_VERSION: u64 = 1;
pub const PAIRS_VERSION: u64 = 1;

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    Ok(bytes)
}

/// One JSON object per geometry per line. An empty list writes an empty file.
pub fn save_geometries(path: impl AsRef<Path>, data: &[Geometry]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for g in data {
        serde_json::to_writer(&mut out, g).map_err(|e| Error::malformed(path, e.to_string()))?;
        out.push(b'\n');
    }
    write_file(path, &out)
}

/// Rejects empty files; blank lines are skipped.
pub fn load_geometries(path: impl AsRef<Path>) -> Result<Vec<Geometry>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let g: Geometry = serde_json::from_str(&line).map_err(|e| Error::malformed(path, format!("line {}: {e}", i + 1)))?;
        out.push(g);
    }
    if out.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    Ok(out)
}

/// Split `bytes` at the first newline and parse the JSON header before it.
fn split_header<H: for<'de> Deserialize<'de>>(path: &Path, bytes: &[u8]) -> Result<(H, usize)> {
    let end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::truncated(path, "header line not terminated"))?;
    let value: serde_json::Value =
        serde_json::from_slice(&bytes[..end]).map_err(|e| Error::malformed(path, format!("header: {e}")))?;
    Ok((header_from_value(path, value)?, end + 1))
}

fn header_from_value<H: for<'de> Deserialize<'de>>(path: &Path, value: serde_json::Value) -> Result<H> {
    serde_json::from_value(value).map_err(|e| Error::malformed(path, format!("header: {e}")))
}

fn check_version(path: &Path, bytes: &[u8], expected: u64) -> Result<()> {
    let end = bytes.iter().position(|&b| b == b'\n').unwrap_or(bytes.len());
    let value: serde_json::Value =
        serde_json::from_slice(&bytes[..end]).map_err(|e| Error::malformed(path, format!("header: {e}")))?;
    match value.get("version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == expected => Ok(()),
        Some(found) => Err(Error::Version {
            path: path.to_path_buf(),
            found,
            expected,
        }),
        None => Err(Error::malformed(path, "header has no version")),
    }
}

/// Checkpoint header. `sizes`, `config` and `data` are extras beyond the
/// required fields so a checkpoint alone can drive sampling and reflow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub arch: ModelArch,
    pub k: usize,
    pub d: usize,
    pub param_count: usize,
    pub version: u64,
    #[serde(default)]
    pub sizes: SizeHistogram,
    #[serde(default)]
    pub config: Option<TrainConfig>,
    #[serde(default)]
    pub data: Option<String>,
}

/// A model plus what generation needs to know about its training data.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: VectorFieldModel,
    pub sizes: SizeHistogram,
    pub config: Option<TrainConfig>,
    pub data: Option<String>,
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let params = ckpt.model.to_flat();
    let header = CheckpointHeader {
        arch: ckpt.model.arch.clone(),
        k: ckpt.model.arch.k,
        d: ckpt.model.arch.d,
        param_count: params.len(),
        version: CHECKPOINT_VERSION,
        sizes: ckpt.sizes.clone(),
        config: ckpt.config.clone(),
        data: ckpt.data.clone(),
    };
    let mut out = serde_json::to_vec(&header).map_err(|e| Error::malformed(path, e.to_string()))?;
    out.push(b'\n');
    out.reserve(8 * params.len());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    write_file(path, &out)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    check_version(path, &bytes, CHECKPOINT_VERSION)?;
    let (header, start): (CheckpointHeader, usize) = split_header(path, &bytes)?;
    let mut model = VectorFieldModel::init(header.arch.clone(), 0).map_err(|e| Error::malformed(path, e.to_string()))?;
    if model.param_count() != header.param_count || header.k != header.arch.k || header.d != header.arch.d {
        return Err(Error::malformed(path, "header fields disagree with the architecture"));
    }
    let body = &bytes[start..];
    let expected = 8 * header.param_count;
    if body.len() < expected {
        return Err(Error::truncated(path, format!("{} of {expected} parameter bytes", body.len())));
    }
    if body.len() > expected {
        return Err(Error::malformed(path, format!("{} trailing bytes", body.len() - expected)));
    }
    let params: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    model.load_flat(&params)?;
    Ok(Checkpoint {
        model,
        sizes: header.sizes,
        config: header.config,
        data: header.data,
    })
}

#[derive(Serialize, Deserialize)]
struct PairsHeader {
    count: usize,
    k: usize,
    version: u64,
    #[serde(default = "latent_space")]
    space: CostSpace,
}

fn latent_space() -> CostSpace {
    CostSpace::Latent
}

fn source_byte(s: PairSource) -> u8 {
    match s {
        PairSource::Random => 0,
        PairSource::Estimated => 1,
    }
}

fn valid_byte(v: Option<bool>) -> u8 {
    match v {
        Some(false) => 0,
        Some(true) => 1,
        None => 2,
    }
}

/// Header line, then per pair: `n` (u64), `z0`, `z1` (flat f64), then a
/// source byte, a valid byte (0/1, 2 = unchecked) and an aligned byte.
pub fn save_pairs(path: impl AsRef<Path>, set: &CouplingSet) -> Result<()> {
    let path = path.as_ref();
    let header = PairsHeader {
        count: set.len(),
        k: set.k(),
        version: PAIRS_VERSION,
        space: set.space,
    };
    let mut out = serde_json::to_vec(&header).map_err(|e| Error::malformed(path, e.to_string()))?;
    out.push(b'\n');
    for p in &set.pairs {
        out.extend_from_slice(&(p.z0.n() as u64).to_le_bytes());
        for v in p.z0.to_flat().into_iter().chain(p.z1.to_flat()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(source_byte(p.source));
        out.push(valid_byte(p.valid));
        out.push(u8::from(p.aligned));
    }
    write_file(path, &out)
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, len: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < len {
            return Err(Error::truncated(self.path, format!("ran out of bytes reading {what}")));
        }
        let s = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(8 * count, what)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    fn byte(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<CouplingSet> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    check_version(path, &bytes, PAIRS_VERSION)?;
    let (header, start): (PairsHeader, usize) = split_header(path, &bytes)?;
    let mut cur = Cursor { path, bytes: &bytes, pos: start };
    let mut pairs = Vec::with_capacity(header.count);
    for i in 0..header.count {
        let n = cur.u64(&format!("pair {i} size"))? as usize;
        if n == 0 || n > 1 << 20 {
            return Err(Error::malformed(path, format!("pair {i} has n = {n}")));
        }
        let len = n * (3 + header.k);
        let z0 = cur.f64s(len, &format!("pair {i} z0"))?;
        let z1 = cur.f64s(len, &format!("pair {i} z1"))?;
        let source = match cur.byte("source")? {
            0 => PairSource::Random,
            1 => PairSource::Estimated,
            b => return Err(Error::malformed(path, format!("pair {i} source byte {b}"))),
        };
        let valid = match cur.byte("valid")? {
            0 => Some(false),
            1 => Some(true),
            2 => None,
            b => return Err(Error::malformed(path, format!("pair {i} valid byte {b}"))),
        };
        let aligned = match cur.byte("aligned")? {
            0 => false,
            1 => true,
            b => return Err(Error::malformed(path, format!("pair {i} aligned byte {b}"))),
        };
        let bad = |e: Error| Error::malformed(path, format!("pair {i}: {e}"));
        pairs.push(CouplingPair {
            z0: LatentGeometry::from_flat(&z0, n, header.k).map_err(bad)?,
            z1: LatentGeometry::from_flat(&z1, n, header.k).map_err(bad)?,
            aligned,
            source,
            valid,
        });
    }
    if cur.pos != bytes.len() {
        return Err(Error::malformed(path, format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    Ok(CouplingSet::new(header.space, pairs))
}

/// One row of `metrics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub phase: String,
    pub distribution_cost: f64,
    pub per_atom_cost: f64,
    pub mean_steps: f64,
    pub median_steps: f64,
    pub validity_rate: f64,
    pub wall_seconds: f64,
    pub seed: u64,
    pub config_hash: String,
}

pub const METRICS_HEADER: &str =
    "phase,distribution_cost,per_atom_cost,mean_steps,median_steps,validity_rate,wall_seconds,seed,config_hash";

/// Append rows, writing the header first when the file is new or empty.
pub fn append_metrics(path: impl AsRef<Path>, rows: &[RunMetrics]) -> Result<()> {
    let path = path.as_ref();
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(BufWriter::new(file));
    for r in rows {
        w.serialize(r).map_err(|e| Error::malformed(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_metrics(path: impl AsRef<Path>) -> Result<Vec<RunMetrics>> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let headers = reader.headers().map_err(|e| Error::malformed(path, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>().join(",") != METRICS_HEADER {
        return Err(Error::malformed(path, "unexpected metrics header"));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::malformed(path, e.to_string())))
        .collect()
}

/// Loss curve as `step,loss` CSV.
pub fn save_loss_curve(path: impl AsRef<Path>, losses: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut out = BufWriter::new(Vec::new());
    writeln!(out, "step,loss").map_err(|e| Error::io(path, e))?;
    for (i, l) in losses.iter().enumerate() {
        writeln!(out, "{i},{l}").map_err(|e| Error::io(path, e))?;
    }
    let bytes = out.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_file(path, &bytes)
}
