//! Point-set input formats and the binary sketch file.
//!
//! Sketch file layout, all little-endian:
//!
//! ```text
//! magic "GSKETCH1" | version u32 | variant u8 | d u32 | s u32 | dims u32.. | seed u64
//! fingerprint [u8; 32]            SHA-256 of every byte above
//! records u64
//! per record: points u64, then output_dim f64 values
//! ```

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::planner::Variant;
use crate::point_set::{LabeledSet, PointSet};
use crate::sketchers::{Embedding, Fingerprint, SketchConfig, SKETCH_FORMAT_VERSION, SKETCH_MAGIC};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Csv,
    Jsonl,
}

impl InputFormat {
    /// Guesses from the file extension; anything but `.jsonl`/`.json` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => InputFormat::Jsonl,
            _ => InputFormat::Csv,
        }
    }
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(InputFormat::Csv),
            "jsonl" => Ok(InputFormat::Jsonl),
            other => Err(Error::InvalidParameter(format!("unknown input format {other:?}"))),
        }
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// One point per non-blank line, comma separated. Lines starting with `#` are skipped.
pub fn parse_csv<R: BufRead>(reader: R) -> Result<PointSet> {
    let mut dim = None;
    let mut data = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut count = 0;
        for field in trimmed.split(',') {
            let field = field.trim();
            let v: f64 = field
                .parse()
                .map_err(|_| parse_error(lineno, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_error(lineno, format!("non-finite value {field:?}")));
            }
            data.push(v);
            count += 1;
        }
        match dim {
            None => dim = Some(count),
            Some(d) if d != count => {
                return Err(Error::Shape {
                    context: "csv row length",
                    expected: d,
                    got: count,
                })
            }
            _ => {}
        }
    }
    match dim {
        Some(d) => PointSet::new(d, data),
        None => Err(Error::EmptyInput("csv contains no points")),
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    label: String,
    points: Vec<Vec<f64>>,
}

/// One `{"label": .., "points": [[..], ..]}` object per non-blank line.
/// All sets must share one dimension.
pub fn parse_jsonl<R: BufRead>(reader: R) -> Result<Vec<LabeledSet>> {
    let mut out: Vec<LabeledSet> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord = serde_json::from_str(&line).map_err(|e| parse_error(lineno, e.to_string()))?;
        if rec.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(parse_error(lineno, "non-finite coordinate"));
        }
        let points = if rec.points.is_empty() {
            return Err(parse_error(lineno, format!("set {:?} has no points", rec.label)));
        } else {
            PointSet::from_rows(&rec.points)?
        };
        if let Some(first) = out.first() {
            if first.points.dim() != points.dim() {
                return Err(Error::Shape {
                    context: "jsonl set dimension",
                    expected: first.points.dim(),
                    got: points.dim(),
                });
            }
        }
        out.push(LabeledSet { label: rec.label, points });
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("jsonl contains no sets"));
    }
    Ok(out)
}

/// Reads labeled sets from either format; a CSV file becomes one set labeled by its file stem.
pub fn parse_pointset(path: &Path, format: InputFormat) -> Result<Vec<LabeledSet>> {
    let reader = BufReader::new(fs::File::open(path)?);
    match format {
        InputFormat::Csv => {
            let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("set").to_string();
            Ok(vec![LabeledSet {
                label,
                points: parse_csv(reader)?,
            }])
        }
        InputFormat::Jsonl => parse_jsonl(reader),
    }
}

/// Contents of a sketch file.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchFile {
    pub config: SketchConfig,
    pub embeddings: Vec<Embedding>,
}

pub fn write_sketch<W: Write>(mut w: W, config: &SketchConfig, embeddings: &[Embedding]) -> Result<()> {
    let fp = config.fingerprint();
    let m = config.output_dim();
    for e in embeddings {
        if e.fingerprint != fp {
            return Err(Error::FingerprintMismatch);
        }
        if e.vector.len() != m {
            return Err(Error::Shape {
                context: "embedding length",
                expected: m,
                got: e.vector.len(),
            });
        }
    }
    w.write_all(&config.header_prefix())?;
    w.write_all(&fp.0)?;
    w.write_all(&(embeddings.len() as u64).to_le_bytes())?;
    for e in embeddings {
        w.write_all(&(e.count as u64).to_le_bytes())?;
        for v in &e.vector {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated file: {e}")))?;
    Ok(buf)
}

fn take_u32<R: Read>(r: &mut R) -> Result<usize> {
    Ok(u32::from_le_bytes(take(r)?) as usize)
}

fn take_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(take(r)?))
}

pub fn read_sketch<R: Read>(mut r: R) -> Result<SketchFile> {
    if &take::<8, _>(&mut r)? != SKETCH_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut r)?);
    if version != SKETCH_FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let [code] = take::<1, _>(&mut r)?;
    let variant = Variant::from_code(code).ok_or_else(|| Error::Format(format!("unknown variant code {code}")))?;
    let d = take_u32(&mut r)?;
    let s = take_u32(&mut r)?;
    let blocks = match variant {
        Variant::Gs => 1,
        Variant::Hd => s,
    };
    let dims = (0..blocks).map(|_| take_u32(&mut r)).collect::<Result<Vec<_>>>()?;
    let seed = take_u64(&mut r)?;
    let config = SketchConfig::new(variant, d, s, &dims, seed).map_err(|e| Error::Format(e.to_string()))?;
    if config.dims != dims {
        return Err(Error::Format("block dimensions are not powers of two".into()));
    }
    let stored = Fingerprint(take(&mut r)?);
    let fingerprint = config.fingerprint();
    if stored != fingerprint {
        return Err(Error::FingerprintMismatch);
    }
    let records = take_u64(&mut r)?;
    let m = config.output_dim();
    let mut embeddings = Vec::new();
    for _ in 0..records {
        let count = take_u64(&mut r)? as usize;
        let vector = (0..m)
            .map(|_| Ok(f64::from_le_bytes(take(&mut r)?)))
            .collect::<Result<Vec<_>>>()?;
        embeddings.push(Embedding {
            vector,
            fingerprint,
            count,
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after last record".into()));
    }
    Ok(SketchFile { config, embeddings })
}

pub fn write_sketch_file(path: &Path, config: &SketchConfig, embeddings: &[Embedding]) -> Result<()> {
    let mut buf = Vec::new();
    write_sketch(&mut buf, config, embeddings)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_sketch_file(path: &Path) -> Result<SketchFile> {
    read_sketch(BufReader::new(fs::File::open(path)?))
}
