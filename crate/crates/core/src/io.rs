//! Matrix files, CSV tables and JSON output.
//!
//! Binary matrix layout: the magic bytes `SBMM`, the dimension `n` as a
//! little-endian `u32`, then the `n (n + 1) / 2` lower-triangle entries
//! (row-major, `(0,0), (1,0), (1,1), ...`) as little-endian `f64`.
//!
//! CSV matrix layout: one line per row of the lower triangle, row `i`
//! holding `i + 1` comma-separated values.

use std::io::{Read, Write};

use serde::Serialize;

use crate::spectral::Spectrum;
use crate::{Error, Real, Result, SymMatrix};

pub const MAGIC: &[u8; 4] = b"SBMM";

/// Writes `x` with 17 significant digits (round-trips every `f64`).
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn write_binary<T: Real>(m: &SymMatrix<T>, mut w: impl Write) -> Result<()> {
    let n = u32::try_from(m.dim()).map_err(|_| Error::Format(format!("dimension {} exceeds u32", m.dim())))?;
    let mut buf = Vec::with_capacity(8 + 8 * m.dim() * (m.dim() + 1) / 2);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&n.to_le_bytes());
    for i in 0..m.dim() {
        for &v in &m.row(i)[..=i] {
            buf.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_binary(bytes: &[u8]) -> Result<SymMatrix<f64>> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing SBMM header".into()));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let count = n * (n + 1) / 2;
    let body = &bytes[8..];
    if body.len() != 8 * count {
        return Err(Error::Format(format!("expected {} payload bytes for n = {n}, found {}", 8 * count, body.len())));
    }
    let packed: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    SymMatrix::from_packed_lower(n, &packed)
}

pub fn write_csv<T: Real>(m: &SymMatrix<T>, mut w: impl Write) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.dim() {
        let line: Vec<String> = m.row(i)[..=i].iter().map(|v| fmt_f64(v.to_f64_lossy())).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_csv(text: &str) -> Result<SymMatrix<f64>> {
    let mut packed = Vec::new();
    let mut n = 0;
    for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let before = packed.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("row {i}: cannot parse {field:?}")))?;
            packed.push(v);
        }
        if packed.len() - before != i + 1 {
            return Err(Error::Format(format!("row {i} has {} values, expected {}", packed.len() - before, i + 1)));
        }
        n = i + 1;
    }
    SymMatrix::from_packed_lower(n, &packed)
}

/// Reads either format, choosing by the leading magic bytes.
pub fn read_matrix(mut r: impl Read) -> Result<SymMatrix<f64>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.starts_with(MAGIC) {
        read_binary(&bytes)
    } else {
        let text = std::str::from_utf8(&bytes).map_err(|_| Error::Format("matrix is neither SBMM nor UTF-8 CSV".into()))?;
        read_csv(text)
    }
}

/// CSV with header `index,eigenvalue`, largest first.
pub fn spectrum_csv<T: Real>(spec: &Spectrum<T>) -> String {
    let mut out = String::from("index,eigenvalue\n");
    for (i, v) in spec.values().iter().enumerate() {
        out.push_str(&format!("{i},{}\n", fmt_f64(v.to_f64_lossy())));
    }
    out
}

/// serde_json formatter writing every float with 17 significant digits.
#[derive(Clone, Copy, Debug, Default)]
pub struct SigDigits;

impl serde_json::ser::Formatter for SigDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        w.write_all(fmt_f64(value as f64).as_bytes())
    }
}

/// Compact JSON with 17-significant-digit floats.
pub fn to_json_string<S: Serialize + ?Sized>(value: &S) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigDigits);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}
