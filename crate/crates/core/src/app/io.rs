//! File formats: binary field and far-field files with JSON sidecars, CSV far-field
//! import, JSON datasets and the on-disk basis cache.
//!
//! Field files start with a 32-byte header: `b"IBS2FLD\0"`, version `u32`, grid
//! size `u32`, dtype `u32` (0 real, 1 complex), flags `u32` (bit 0: disk masked),
//! 8 reserved bytes; then row-major little-endian `f64` values (complex values as
//! interleaved pairs). Far-field files use `b"IBS2FAR\0"`, version `u32`, `n_in`
//! `u32`, frequency `f64`, 8 reserved bytes, then the receiver-major matrix as
//! interleaved complex pairs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::born::ScatterDataset;
use crate::error::{Error, Result};
use crate::grids::{ComplexField, DirectionSet, FarFieldMatrix, PixelGrid, RealField};
use crate::pswf::{build_basis, BasisCaps, PswfBasis};

pub const FIELD_MAGIC: &[u8; 8] = b"IBS2FLD\0";
pub const FAR_MAGIC: &[u8; 8] = b"IBS2FAR\0";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;
/// Environment variable naming the basis cache directory.
pub const CACHE_ENV: &str = "IBS2_CACHE_DIR";

const DTYPE_REAL: u32 = 0;
const DTYPE_COMPLEX: u32 = 1;
const FLAG_MASKED: u32 = 1;

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// Serializes `value` as pretty JSON and writes it atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// A real or complex pixel field.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Real(RealField),
    Complex(ComplexField),
}

impl FieldData {
    pub fn grid(&self) -> PixelGrid {
        match self {
            FieldData::Real(f) => f.grid(),
            FieldData::Complex(f) => f.grid(),
        }
    }

    /// Real part (the field itself when real).
    pub fn real(&self) -> RealField {
        match self {
            FieldData::Real(f) => f.clone(),
            FieldData::Complex(f) => f.re(),
        }
    }
}

/// Sidecar metadata of a field file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub label: String,
    pub n: usize,
    pub dtype: String,
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default)]
    pub provenance: Option<serde_json::Value>,
}

/// Path of the JSON sidecar next to a data file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn encode_field(field: &FieldData) -> Vec<u8> {
    let (n, dtype) = match field {
        FieldData::Real(f) => (f.grid().n(), DTYPE_REAL),
        FieldData::Complex(f) => (f.grid().n(), DTYPE_COMPLEX),
    };
    let mut out = Vec::with_capacity(HEADER_LEN + n * n * 16);
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&dtype.to_le_bytes());
    out.extend_from_slice(&FLAG_MASKED.to_le_bytes());
    out.extend_from_slice(&[0u8; 8]);
    match field {
        FieldData::Real(f) => f.values().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        FieldData::Complex(f) => f.values().iter().for_each(|v| {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }),
    }
    out
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().expect("8 bytes"))
}

pub fn decode_field(bytes: &[u8]) -> Result<FieldData> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != FIELD_MAGIC {
        return format_err("not a field file");
    }
    let version = u32_at(bytes, 8);
    if version != FORMAT_VERSION {
        return format_err(format!("unsupported field file version {version}"));
    }
    let n = u32_at(bytes, 12) as usize;
    let dtype = u32_at(bytes, 16);
    let grid = PixelGrid::new(n).map_err(|e| Error::Format(e.to_string()))?;
    let width = match dtype {
        DTYPE_REAL => 8,
        DTYPE_COMPLEX => 16,
        other => return format_err(format!("unknown dtype tag {other}")),
    };
    let body = &bytes[HEADER_LEN..];
    if body.len() != n * n * width {
        return format_err(format!("field body has {} bytes, expected {}", body.len(), n * n * width));
    }
    let field = if dtype == DTYPE_REAL {
        let values = (0..n * n).map(|i| f64_at(body, 8 * i)).collect();
        FieldData::Real(RealField::from_values(grid, values).map_err(|e| Error::Format(e.to_string()))?)
    } else {
        let values = (0..n * n)
            .map(|i| Complex64::new(f64_at(body, 16 * i), f64_at(body, 16 * i + 8)))
            .collect();
        FieldData::Complex(ComplexField::from_values(grid, values).map_err(|e| Error::Format(e.to_string()))?)
    };
    Ok(field)
}

/// Writes a field file and its sidecar.
pub fn write_field(path: &Path, field: &FieldData, label: &str, k: Option<f64>, provenance: Option<serde_json::Value>) -> Result<()> {
    write_atomic(path, &encode_field(field))?;
    let meta = FieldMeta {
        label: label.to_string(),
        n: field.grid().n(),
        dtype: match field {
            FieldData::Real(_) => "real".into(),
            FieldData::Complex(_) => "complex".into(),
        },
        k,
        provenance,
    };
    write_json(&sidecar_path(path), &meta)
}

pub fn read_field(path: &Path) -> Result<FieldData> {
    decode_field(&fs::read(path)?)
}

pub fn read_field_meta(path: &Path) -> Result<FieldMeta> {
    read_json(&sidecar_path(path))
}

pub fn encode_farfield(f: &FarFieldMatrix) -> Vec<u8> {
    let n = f.directions().len();
    let mut out = Vec::with_capacity(HEADER_LEN + n * n * 16);
    out.extend_from_slice(FAR_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&f.k().to_le_bytes());
    out.extend_from_slice(&[0u8; 8]);
    for v in f.data() {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

pub fn decode_farfield(bytes: &[u8]) -> Result<FarFieldMatrix> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != FAR_MAGIC {
        return format_err("not a far-field file");
    }
    let version = u32_at(bytes, 8);
    if version != FORMAT_VERSION {
        return format_err(format!("unsupported far-field file version {version}"));
    }
    let n = u32_at(bytes, 12) as usize;
    let k = f64_at(bytes, 16);
    let body = &bytes[HEADER_LEN..];
    if body.len() != n * n * 16 {
        return format_err(format!("far-field body has {} bytes, expected {}", body.len(), n * n * 16));
    }
    let data = (0..n * n)
        .map(|i| Complex64::new(f64_at(body, 16 * i), f64_at(body, 16 * i + 8)))
        .collect();
    let dirs = DirectionSet::new(n).map_err(|e| Error::Format(e.to_string()))?;
    FarFieldMatrix::new(k, dirs, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_farfield(path: &Path, f: &FarFieldMatrix) -> Result<()> {
    write_atomic(path, &encode_farfield(f))
}

pub fn read_farfield(path: &Path) -> Result<FarFieldMatrix> {
    decode_farfield(&fs::read(path)?)
}

/// Parses `i,j,re,im` lines (receiver `i`, incidence `j`); a non-numeric first line
/// is treated as a header. Every entry of the square matrix must appear once.
pub fn parse_farfield_csv(text: &str, k: f64) -> Result<FarFieldMatrix> {
    let mut rows: Vec<(usize, usize, Complex64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 4 {
            return format_err(format!("line {}: expected 4 columns", lineno + 1));
        }
        let parsed = (
            cols[0].parse::<usize>(),
            cols[1].parse::<usize>(),
            cols[2].parse::<f64>(),
            cols[3].parse::<f64>(),
        );
        match parsed {
            (Ok(i), Ok(j), Ok(re), Ok(im)) => rows.push((i, j, Complex64::new(re, im))),
            _ if rows.is_empty() && lineno == 0 => continue,
            _ => return format_err(format!("line {}: malformed entry", lineno + 1)),
        }
    }
    let n = rows.iter().map(|r| r.0.max(r.1) + 1).max().unwrap_or(0);
    if rows.len() != n * n {
        return format_err(format!("expected {} entries for a {n}x{n} matrix, got {}", n * n, rows.len()));
    }
    let mut data = vec![None; n * n];
    for (i, j, v) in rows {
        if data[i * n + j].replace(v).is_some() {
            return format_err(format!("duplicate entry ({i}, {j})"));
        }
    }
    let data = data.into_iter().map(|v| v.expect("all entries present")).collect();
    let dirs = DirectionSet::new(n).map_err(|e| Error::Format(e.to_string()))?;
    FarFieldMatrix::new(k, dirs, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_dataset(path: &Path, data: &ScatterDataset) -> Result<()> {
    write_json(path, data)
}

pub fn read_dataset(path: &Path) -> Result<ScatterDataset> {
    let ds: ScatterDataset = read_json(path)?;
    if ds.low.pnodes != ds.high.pnodes || ds.low.values.len() != ds.low.pnodes.len() || ds.high.values.len() != ds.high.pnodes.len() {
        return format_err("dataset components are inconsistent with the node set");
    }
    Ok(ds)
}

/// Cache directory from the environment, if set.
pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// File name of a cached basis; keyed by the exact bits of `c` and `α̃` and the caps.
pub fn basis_cache_name(c: f64, alpha_tilde: f64, caps: BasisCaps) -> String {
    format!(
        "pswf_c{:016x}_a{:016x}_m{}_n{}.json",
        c.to_bits(),
        alpha_tilde.to_bits(),
        caps.m_max,
        caps.n_max
    )
}

/// Loads a basis from `cache_dir` or builds and stores it. Returns whether the cache hit.
pub fn load_or_build_basis(c: f64, alpha_tilde: f64, caps: BasisCaps, cache_dir: Option<&Path>) -> Result<(Arc<PswfBasis>, bool)> {
    if let Some(dir) = cache_dir {
        let path = dir.join(basis_cache_name(c, alpha_tilde, caps));
        if path.exists() {
            let basis: PswfBasis = read_json(&path)?;
            return Ok((Arc::new(basis), true));
        }
        let basis = build_basis(c, alpha_tilde, caps)?;
        fs::create_dir_all(dir)?;
        write_json(&path, &basis)?;
        return Ok((Arc::new(basis), false));
    }
    Ok((Arc::new(build_basis(c, alpha_tilde, caps)?), false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bad_headers_rejected() {
        assert!(decode_field(b"short").is_err());
        let g = PixelGrid::new(8).unwrap();
        let mut bytes = encode_field(&FieldData::Real(RealField::from_fn(g, |x| x[0])));
        bytes[8] = 9;
        assert!(decode_field(&bytes).is_err());
        let mut bytes = encode_field(&FieldData::Real(RealField::from_fn(g, |x| x[0])));
        bytes[16] = 7;
        assert!(decode_field(&bytes).is_err());
        let mut bytes = encode_field(&FieldData::Real(RealField::from_fn(g, |x| x[0])));
        bytes.pop();
        assert!(decode_field(&bytes).is_err());
        assert!(decode_farfield(&bytes).is_err());
    }

    #[test]
    fn header_layout() {
        let g = PixelGrid::new(8).unwrap();
        let bytes = encode_field(&FieldData::Complex(ComplexField::zeros(g)));
        assert_eq!(&bytes[..8], FIELD_MAGIC);
        assert_eq!(u32_at(&bytes, 12), 8);
        assert_eq!(u32_at(&bytes, 16), DTYPE_COMPLEX);
        assert_eq!(bytes.len(), HEADER_LEN + 64 * 16);
    }

    #[test]
    fn csv_parsing() {
        let text = "i,j,re,im\n0,0,1,0\n0,1,2,0\n1,0,3,0\n1,1,4,-1\n";
        assert_eq!(parse_farfield_csv(text, 2.0).unwrap().get(1, 1), Complex64::new(4.0, -1.0));
        assert!(parse_farfield_csv("0,0,1,0\n1,1,2,0\n", 2.0).is_err());
        let mut text = String::from("i,j,re,im\n");
        for i in 0..4 {
            for j in 0..4 {
                text.push_str(&format!("{i},{j},{},{}\n", i * 4 + j, -(j as f64)));
            }
        }
        let f = parse_farfield_csv(&text, 2.0).unwrap();
        assert_eq!(f.get(2, 3), Complex64::new(11.0, -3.0));
        let dup = text.replace("3,3,15,-3", "3,2,15,-3");
        assert!(parse_farfield_csv(&dup, 2.0).is_err());
        assert!(parse_farfield_csv("0,0,1,1\n0,1,x,1\n", 2.0).is_err());
        assert!(parse_farfield_csv("0,0,1\n", 2.0).is_err());
    }

    #[test]
    fn cache_names_distinguish_parameters() {
        let caps = BasisCaps { m_max: 10, n_max: 6 };
        let a = basis_cache_name(10.0, 0.9, caps);
        assert_ne!(a, basis_cache_name(10.0 + 1e-12, 0.9, caps));
        assert_ne!(a, basis_cache_name(10.0, 0.8, caps));
        assert_ne!(a, basis_cache_name(10.0, 0.9, BasisCaps { m_max: 11, n_max: 6 }));
    }
}
