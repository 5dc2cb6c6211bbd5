//! Binary field dumps: `"NLOC"`, `u16` version, `u32 n`, `f64 L`, `f64 t`,
//! then `u` and `v` as little-endian `f64`, row-major.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{Field2D, FieldState};

pub const MAGIC: &[u8; 4] = b"NLOC";
pub const DUMP_VERSION: u16 = 1;

pub fn encode_dump(state: &FieldState) -> Vec<u8> {
    let n = state.n();
    let mut out = Vec::with_capacity(26 + 16 * n * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&DUMP_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&state.half_width().to_le_bytes());
    out.extend_from_slice(&state.t.to_le_bytes());
    for f in [&state.u, &state.v] {
        for z in &f.data {
            out.extend_from_slice(&z.re.to_le_bytes());
        }
    }
    out
}

pub fn decode_dump(bytes: &[u8]) -> Result<FieldState> {
    let bad = |m: &str| Error::Format(m.to_string());
    if bytes.len() < 26 || &bytes[..4] != MAGIC {
        return Err(bad("not an NLOC dump"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != DUMP_VERSION {
        return Err(Error::Format(format!("unsupported dump version {version}")));
    }
    let n = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let f64_at = |k: usize| f64::from_le_bytes(bytes[k..k + 8].try_into().unwrap());
    let (l, t) = (f64_at(10), f64_at(18));
    let expected = n.checked_mul(n).and_then(|m| m.checked_mul(16)).map(|m| m + 26);
    if expected != Some(bytes.len()) {
        return Err(Error::Format(format!("dump length {} does not match n = {n}", bytes.len())));
    }
    let read = |offset: usize| -> Vec<f64> { (0..n * n).map(|k| f64_at(offset + 8 * k)).collect() };
    let u = Field2D::from_real(n, l, &read(26))?;
    let v = Field2D::from_real(n, l, &read(26 + 8 * n * n))?;
    FieldState::new(t, u, v)
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(e) => format!("{}.tmp", e.to_string_lossy()),
        None => "tmp".into(),
    });
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_dump(path: impl AsRef<Path>, state: &FieldState) -> Result<()> {
    write_atomic(path.as_ref(), &encode_dump(state))
}

pub fn read_dump(path: impl AsRef<Path>) -> Result<FieldState> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_dump(&bytes)
}
