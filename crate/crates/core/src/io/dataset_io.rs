//! Datasets as CSV (first row holds cardinalities or column names) and as a
//! checksummed binary matrix.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::circuit_io::open_binary;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub const DATASET_VERSION: u32 = 1;
const DATASET_MAGIC: &[u8; 4] = b"PCDS";

fn data_err(row: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Data { row, col, msg: msg.into() }
}

/// Reads CSV. A numeric header row declares cardinalities; any other header is
/// treated as column names and cardinalities are inferred as `max + 1`.
/// `declared` overrides both. Row numbers in errors count data rows from 0.
pub fn read_csv<R: Read>(reader: R, declared: Option<&[u32]>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| data_err(0, 0, format!("header: {e}")))?,
        None => return Err(data_err(0, 0, "missing header row")),
    };
    let width = header.len();
    let header_cards: Option<Vec<u32>> = header.iter().map(|f| f.parse::<u32>().ok().filter(|&k| k >= 1)).collect();
    if let Some(d) = declared {
        if d.len() != width {
            return Err(data_err(0, 0, format!("{} declared cardinalities for {width} columns", d.len())));
        }
    }
    let mut cells: Vec<u32> = Vec::new();
    let mut rows = 0;
    for (r, rec) in records.enumerate() {
        let rec = rec.map_err(|e| data_err(r, 0, e.to_string()))?;
        if rec.len() != width {
            return Err(data_err(r, rec.len().min(width), format!("expected {width} columns, found {}", rec.len())));
        }
        for (c, field) in rec.iter().enumerate() {
            let v: u32 = match field.parse::<i64>() {
                Ok(v) if v < 0 => return Err(data_err(r, c, format!("negative value {v}"))),
                Ok(v) => u32::try_from(v).map_err(|_| data_err(r, c, format!("value {v} too large")))?,
                Err(_) => return Err(data_err(r, c, format!("not an integer: {field:?}"))),
            };
            cells.push(v);
        }
        rows += 1;
    }
    let cards: Vec<u32> = match (declared, header_cards) {
        (Some(d), _) => d.to_vec(),
        (None, Some(h)) => h,
        (None, None) => {
            (0..width).map(|c| (0..rows).map(|r| cells[r * width + c]).max().map_or(1, |m| m + 1)).collect()
        }
    };
    for r in 0..rows {
        for c in 0..width {
            let v = cells[r * width + c];
            if v >= cards[c] {
                return Err(data_err(r, c, format!("value {v} >= cardinality {}", cards[c])));
            }
        }
    }
    Ok(Dataset::from_cells_unchecked(cards, cells))
}

/// Writes the cardinality header followed by one line per row.
pub fn write_csv<W: Write>(data: &Dataset, mut w: W) -> Result<()> {
    let join = |xs: &[u32]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    writeln!(w, "{}", join(data.cardinalities()))?;
    for row in data.rows() {
        writeln!(w, "{}", join(row))?;
    }
    Ok(())
}

pub fn dataset_to_bytes(data: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 4 * data.cells().len());
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(&(data.num_vars() as u32).to_le_bytes());
    for &k in data.cardinalities() {
        out.extend_from_slice(&k.to_le_bytes());
    }
    out.extend_from_slice(&(data.len() as u64).to_le_bytes());
    for &v in data.cells() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn dataset_from_bytes(bytes: &[u8]) -> Result<Dataset> {
    let mut r = open_binary(bytes, DATASET_MAGIC, "binary dataset", DATASET_VERSION)?;
    let n = r.u32()? as usize;
    if n > r.remaining() / 4 {
        return Err(Error::Parse { line: 0, msg: "column count exceeds file size".into() });
    }
    let cards = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let rows = r.u64()? as usize;
    let expected = rows.checked_mul(n).and_then(|c| c.checked_mul(4));
    if expected != Some(r.remaining()) {
        return Err(Error::Parse { line: 0, msg: "cell count does not match file size".into() });
    }
    let cells = (0..rows * n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    for (i, &v) in cells.iter().enumerate() {
        let c = i % n.max(1);
        if v >= cards[c] {
            return Err(data_err(i / n.max(1), c, format!("value {v} >= cardinality {}", cards[c])));
        }
    }
    Ok(Dataset::from_cells_unchecked(cards, cells))
}

/// Loads CSV, or the binary format for `.pcd` / `.bin` files.
pub fn load_dataset(path: &Path, declared: Option<&[u32]>) -> Result<Dataset> {
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
    let data = match path.extension().and_then(|e| e.to_str()) {
        Some("pcd") | Some("bin") => {
            let d = dataset_from_bytes(&fs::read(path)?)?;
            if let Some(k) = declared {
                if k != d.cardinalities() {
                    return Err(data_err(0, 0, "declared cardinalities differ from the file"));
                }
            }
            d
        }
        _ => read_csv(fs::File::open(path)?, declared)?,
    };
    Ok(data.with_name(name))
}

pub fn save_dataset(data: &Dataset, path: &Path) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pcd") | Some("bin") => fs::write(path, dataset_to_bytes(data))?,
        _ => {
            let mut buf = Vec::new();
            write_csv(data, &mut buf)?;
            fs::write(path, buf)?;
        }
    }
    Ok(())
}
