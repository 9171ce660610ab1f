//! Text formats for system tensors, sinograms, CP factors and iteration logs.
//!
//! Floats are written with Rust's shortest round-trip representation, so a
//! write/read cycle is lossless and repeated runs produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use lrtomo_core::system::Entry;
use lrtomo_core::{CpFactors, FactorMatrix, ReconRecord, ScanGeometry, Sinogram, SparseSystemTensor};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Core(#[from] lrtomo_core::Error),
}

fn parse_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse { line, msg: msg.into() }
}

// ---------------------------------------------------------------- tensor

/// Header `b i j count=N shape=BxKxK`, then `b i j length` per entry in
/// ascending ray-major order.
pub fn encode_system_tensor(l: &SparseSystemTensor) -> String {
    let (b, k, _) = l.shape();
    let mut out = format!("b i j count={} shape={b}x{k}x{k}\n", l.nnz());
    for e in l.entries() {
        let _ = writeln!(out, "{} {} {} {}", e.ray, e.row, e.col, e.length);
    }
    out
}

pub fn write_system_tensor(l: &SparseSystemTensor, path: impl AsRef<Path>) -> Result<(), FormatError> {
    fs::write(path, encode_system_tensor(l))?;
    Ok(())
}

/// Reads a triplet file; the shape in the header must match `geometry`.
pub fn read_system_tensor(path: impl AsRef<Path>, geometry: &ScanGeometry) -> Result<SparseSystemTensor, FormatError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "empty file"))??;
    let (count, shape) = parse_tensor_header(&header)?;
    let k = geometry.grid_size();
    if shape != (geometry.num_rays(), k, k) {
        return Err(parse_err(1, format!("shape {shape:?} does not match the scan geometry")));
    }
    let mut entries = Vec::with_capacity(count);
    let mut last: Option<(usize, usize, usize)> = None;
    for (n, line) in lines.enumerate() {
        let line = line?;
        let lineno = n + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut field = |name: &str| {
            it.next()
                .ok_or_else(|| parse_err(lineno, format!("missing {name}")))
        };
        let ray = field("b")?.parse().map_err(|_| parse_err(lineno, "bad ray index"))?;
        let row = field("i")?.parse().map_err(|_| parse_err(lineno, "bad row index"))?;
        let col = field("j")?.parse().map_err(|_| parse_err(lineno, "bad column index"))?;
        let length: f64 = field("length")?.parse().map_err(|_| parse_err(lineno, "bad length"))?;
        if last.is_some_and(|p| p.0 > ray) {
            return Err(parse_err(lineno, "entries must be in ascending ray order"));
        }
        last = Some((ray, row, col));
        entries.push(Entry { ray, row, col, length });
    }
    if entries.len() != count {
        return Err(parse_err(1, format!("header count {count} but {} entries", entries.len())));
    }
    Ok(SparseSystemTensor::from_entries(geometry, &entries)?)
}

fn parse_tensor_header(header: &str) -> Result<(usize, (usize, usize, usize)), FormatError> {
    let mut it = header.split_whitespace();
    if it.next() != Some("b") || it.next() != Some("i") || it.next() != Some("j") {
        return Err(parse_err(1, "header must start with `b i j`"));
    }
    let count = it
        .next()
        .and_then(|t| t.strip_prefix("count="))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| parse_err(1, "missing count=N"))?;
    let dims: Vec<usize> = it
        .next()
        .and_then(|t| t.strip_prefix("shape="))
        .map(|v| v.split('x').filter_map(|d| d.parse().ok()).collect())
        .unwrap_or_default();
    if dims.len() != 3 || dims[1] != dims[2] {
        return Err(parse_err(1, "shape must be BxKxK"));
    }
    Ok((count, (dims[0], dims[1], dims[2])))
}

// ---------------------------------------------------------------- sinogram

#[derive(Debug, Serialize, Deserialize)]
struct SinogramRow {
    angle_index: usize,
    beamlet_index: usize,
    value: f64,
}

/// CSV with header `angle_index,beamlet_index,value`, rows in ray order.
pub fn write_sinogram_csv(s: &Sinogram, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_path(path)?;
    for a in 0..s.num_angles() {
        for t in 0..s.num_beamlets() {
            w.serialize(SinogramRow {
                angle_index: a,
                beamlet_index: t,
                value: s.get(a, t),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows may come in any order but must cover every `(angle, beamlet)` cell
/// exactly once.
pub fn read_sinogram_csv(path: impl AsRef<Path>, num_angles: usize, num_beamlets: usize) -> Result<Sinogram, FormatError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut values = vec![None; num_angles * num_beamlets];
    for (n, row) in r.deserialize::<SinogramRow>().enumerate() {
        let row = row?;
        if row.angle_index >= num_angles || row.beamlet_index >= num_beamlets {
            return Err(parse_err(n + 2, "index outside the sinogram"));
        }
        let slot = &mut values[row.angle_index * num_beamlets + row.beamlet_index];
        if slot.replace(row.value).is_some() {
            return Err(parse_err(n + 2, "duplicate sinogram cell"));
        }
    }
    let values = values
        .into_iter()
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| parse_err(0, "sinogram has missing cells"))?;
    Ok(Sinogram::new(num_angles, num_beamlets, values)?)
}

// ---------------------------------------------------------------- factors

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorMeta {
    #[serde(rename = "K")]
    pub size: usize,
    #[serde(rename = "R")]
    pub rank: usize,
    pub iteration: usize,
}

fn encode_factor(f: &FactorMatrix) -> String {
    let mut out = String::new();
    for i in 0..f.size() {
        let row: Vec<String> = (0..f.rank()).map(|r| f.get(i, r).to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn decode_factor(text: &str, size: usize, rank: usize) -> Result<FactorMatrix, FormatError> {
    let mut data = vec![0.0; size * rank];
    let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if rows.len() != size {
        return Err(parse_err(0, format!("expected {size} factor rows, found {}", rows.len())));
    }
    for (i, line) in rows.iter().enumerate() {
        let vals: Vec<&str> = line.split(',').collect();
        if vals.len() != rank {
            return Err(parse_err(i + 1, format!("expected {rank} columns")));
        }
        for (r, v) in vals.iter().enumerate() {
            data[r * size + i] = v.trim().parse().map_err(|_| parse_err(i + 1, "bad number"))?;
        }
    }
    Ok(FactorMatrix::from_vec(size, rank, data)?)
}

/// Writes `<prefix>_w1.csv`, `<prefix>_w2.csv` (K rows x R columns) and
/// `<prefix>_meta.json`.
pub fn write_factors(f: &CpFactors, iteration: usize, dir: impl AsRef<Path>, prefix: &str) -> Result<(), FormatError> {
    let dir = dir.as_ref();
    fs::write(dir.join(format!("{prefix}_w1.csv")), encode_factor(f.w1()))?;
    fs::write(dir.join(format!("{prefix}_w2.csv")), encode_factor(f.w2()))?;
    let meta = FactorMeta {
        size: f.size(),
        rank: f.rank(),
        iteration,
    };
    fs::write(dir.join(format!("{prefix}_meta.json")), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

pub fn read_factors(dir: impl AsRef<Path>, prefix: &str) -> Result<(CpFactors, FactorMeta), FormatError> {
    let dir = dir.as_ref();
    let meta: FactorMeta = serde_json::from_str(&fs::read_to_string(dir.join(format!("{prefix}_meta.json")))?)?;
    let w1 = decode_factor(&fs::read_to_string(dir.join(format!("{prefix}_w1.csv")))?, meta.size, meta.rank)?;
    let w2 = decode_factor(&fs::read_to_string(dir.join(format!("{prefix}_w2.csv")))?, meta.size, meta.rank)?;
    Ok((CpFactors::new(w1, w2)?, meta))
}

// ---------------------------------------------------------------- records

pub const RECORD_HEADER: &str = "iter,objective,datafit,penalty,rmse,seconds";

/// `iter,objective,datafit,penalty,rmse,seconds`; `rmse` is empty when no
/// ground truth was supplied.
pub fn encode_records(records: &[ReconRecord]) -> String {
    let mut out = String::from(RECORD_HEADER);
    out.push('\n');
    for r in records {
        let rmse = r.rmse.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iter, r.objective, r.datafit, r.penalty, rmse, r.seconds
        );
    }
    out
}

pub fn write_records(records: &[ReconRecord], path: impl AsRef<Path>) -> Result<(), FormatError> {
    fs::write(path, encode_records(records))?;
    Ok(())
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<ReconRecord>, FormatError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(RECORD_HEADER) {
        return Err(parse_err(1, "unexpected record header"));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(parse_err(n + 2, "expected 6 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err(n + 2, "bad number"));
            Ok(ReconRecord {
                iter: f[0].parse().map_err(|_| parse_err(n + 2, "bad iteration"))?,
                objective: num(f[1])?,
                datafit: num(f[2])?,
                penalty: num(f[3])?,
                rmse: if f[4].is_empty() { None } else { Some(num(f[4])?) },
                seconds: num(f[5])?,
            })
        })
        .collect()
}
