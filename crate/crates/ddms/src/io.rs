//! Raw field files and diagram output.

use std::fmt::Write as _;
use std::path::Path;

use dms_core::{GridShape, PersistenceDiagram};
use serde::Serialize;

use crate::Error;

/// Element type of a little-endian raw volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ScalarType {
    F32,
    F64,
    U8,
    U16,
    I16,
}

impl ScalarType {
    pub fn width(self) -> usize {
        match self {
            ScalarType::U8 => 1,
            ScalarType::U16 | ScalarType::I16 => 2,
            ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            ScalarType::U8 => b[0] as f64,
            ScalarType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::F32 => f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64,
            ScalarType::F64 => f64::from_le_bytes(b.try_into().expect("8 bytes")),
        }
    }

    fn encode(self, v: f64, out: &mut Vec<u8>) {
        match self {
            ScalarType::U8 => out.push(v as u8),
            ScalarType::U16 => out.extend((v as u16).to_le_bytes()),
            ScalarType::I16 => out.extend((v as i16).to_le_bytes()),
            ScalarType::F32 => out.extend((v as f32).to_le_bytes()),
            ScalarType::F64 => out.extend(v.to_le_bytes()),
        }
    }
}

pub fn decode_field(bytes: &[u8], shape: GridShape, dtype: ScalarType) -> Result<Vec<f64>, Error> {
    let expected = shape.vertex_count() * dtype.width() as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::Format(format!(
            "field size mismatch: {} bytes, grid {shape} of {dtype:?} needs {expected}",
            bytes.len()
        )));
    }
    Ok(bytes.chunks_exact(dtype.width()).map(|c| dtype.decode(c)).collect())
}

pub fn load_field(path: &Path, shape: GridShape, dtype: ScalarType) -> Result<Vec<f64>, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(path.display().to_string(), e))?;
    decode_field(&bytes, shape, dtype)
}

pub fn encode_field(values: &[f64], dtype: ScalarType) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * dtype.width());
    for &v in values {
        dtype.encode(v, &mut out);
    }
    out
}

pub fn save_field(path: &Path, values: &[f64], dtype: ScalarType) -> Result<(), Error> {
    std::fs::write(path, encode_field(values, dtype)).map_err(|e| Error::Io(path.display().to_string(), e))
}

pub const CSV_HEADER: &str = "dim,birth_order,death_order,birth_value,death_value,birth_simplex,death_simplex,finite";

/// One CSV row per pair and per essential class, in canonical order.
pub fn diagram_csv(d: &PersistenceDiagram) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows(d) {
        match row.death_order {
            Some(death) => writeln!(
                out,
                "{},{},{},{},{},{},{},1",
                row.dim,
                row.birth_order,
                death,
                row.birth_value,
                row.death_value.unwrap_or_default(),
                row.birth_simplex,
                row.death_simplex.as_deref().unwrap_or_default()
            ),
            None => writeln!(
                out,
                "{},{},,{},,{},,0",
                row.dim, row.birth_order, row.birth_value, row.birth_simplex
            ),
        }
        .expect("writing to a String");
    }
    out
}

#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct Row {
    pub dim: u8,
    pub birth_order: u32,
    pub death_order: Option<u32>,
    pub birth_value: f64,
    pub death_value: Option<f64>,
    pub birth_simplex: String,
    pub death_simplex: Option<String>,
    pub finite: bool,
}

/// Finite pairs and essential classes merged into one list sorted by
/// `(dim, birth_order)`.
pub fn rows(d: &PersistenceDiagram) -> Vec<Row> {
    let mut keyed: Vec<(u8, dms_core::SimplexKey, dms_core::SimplexKey, Row)> = d
        .pairs
        .iter()
        .map(|p| {
            (
                p.dim,
                p.birth_key,
                p.death_key,
                Row {
                    dim: p.dim,
                    birth_order: p.birth_order(),
                    death_order: Some(p.death_order()),
                    birth_value: p.birth_value,
                    death_value: Some(p.death_value),
                    birth_simplex: p.birth.to_string(),
                    death_simplex: Some(p.death.to_string()),
                    finite: true,
                },
            )
        })
        .chain(d.essential.iter().map(|e| {
            (
                e.dim,
                e.birth_key,
                dms_core::SimplexKey(u128::MAX),
                Row {
                    dim: e.dim,
                    birth_order: e.birth_order(),
                    death_order: None,
                    birth_value: e.birth_value,
                    death_value: None,
                    birth_simplex: e.birth.to_string(),
                    death_simplex: None,
                    finite: false,
                },
            )
        }))
        .collect();
    keyed.sort_by_key(|(dim, b, dk, _)| (*dim, *b, *dk));
    keyed.into_iter().map(|k| k.3).collect()
}

pub fn diagram_json(d: &PersistenceDiagram) -> String {
    serde_json::to_string_pretty(&rows(d)).expect("rows serialize")
}
