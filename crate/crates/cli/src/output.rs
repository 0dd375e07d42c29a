//! Output encodings: CSV with a `#` metadata header, JSON with a `meta` object,
//! and the columnar `MVB1` path format.

use std::io::{self, Write};

use mvbridge_core::sde::PathEnsemble;
use serde::Serialize;

use crate::config::ResolvedConfig;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const BINARY_MAGIC: &[u8; 4] = b"MVB1";
pub const BINARY_VERSION: u32 = 1;

/// Formats `x` like C's `%.17g`: 17 significant digits, trailing zeros removed.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let m = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0');
    t.trim_end_matches('.').to_string()
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub config: &'a ResolvedConfig,
}

impl<'a> Meta<'a> {
    pub fn new(config: &'a ResolvedConfig, seed: Option<u64>) -> Self {
        Meta {
            tool: "mvbridge",
            version: TOOL_VERSION,
            config_hash: config.hash(),
            seed,
            config,
        }
    }

    pub fn write_csv_header<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "# {} {}", self.tool, self.version)?;
        writeln!(w, "# config_hash: {}", self.config_hash)?;
        match self.seed {
            Some(s) => writeln!(w, "# seed: {s}")?,
            None => writeln!(w, "# seed: none")?,
        }
        writeln!(w, "# config: {}", self.config.to_json())
    }
}

/// Writes `{"meta": ..., <fields of body>}` as pretty JSON.
pub fn write_json_with_meta<W: Write, T: Serialize>(w: &mut W, meta: &Meta, body: &T) -> io::Result<()> {
    let mut value = serde_json::to_value(body).map_err(io::Error::other)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| io::Error::other("JSON body must be an object"))?;
    let mut out = serde_json::Map::new();
    out.insert("meta".into(), serde_json::to_value(meta).map_err(io::Error::other)?);
    out.append(obj);
    serde_json::to_writer_pretty(&mut *w, &serde_json::Value::Object(out)).map_err(io::Error::other)?;
    writeln!(w)
}

pub fn write_paths_csv<W: Write>(w: &mut W, meta: &Meta, e: &PathEnsemble) -> io::Result<()> {
    meta.write_csv_header(w)?;
    writeln!(w, "path_id,t,value")?;
    let ts = e.grid.times();
    for i in 0..e.n_paths() {
        for (t, v) in ts.iter().zip(e.path(i)) {
            writeln!(w, "{i},{},{}", fmt_f64(*t), fmt_f64(*v))?;
        }
    }
    Ok(())
}

/// `MVB1` layout, all little-endian: magic, `u32` format version, `u32` length
/// of the metadata JSON, the metadata bytes, `u64` path count, `u64` time count,
/// the times as `f64`, then one column of `f64` path values per time.
pub fn write_paths_binary<W: Write>(w: &mut W, meta: &Meta, e: &PathEnsemble) -> io::Result<()> {
    let meta_json = serde_json::to_vec(meta).map_err(io::Error::other)?;
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&BINARY_VERSION.to_le_bytes())?;
    let len = u32::try_from(meta_json.len()).map_err(io::Error::other)?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(&meta_json)?;
    w.write_all(&(e.n_paths() as u64).to_le_bytes())?;
    w.write_all(&(e.n_times() as u64).to_le_bytes())?;
    for t in e.grid.times() {
        w.write_all(&t.to_le_bytes())?;
    }
    for j in 0..e.n_times() {
        for i in 0..e.n_paths() {
            w.write_all(&e.value(i, j).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Decoded `MVB1` file.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryPaths {
    pub meta: serde_json::Value,
    pub times: Vec<f64>,
    /// `columns[j][i]` is path `i` at `times[j]`.
    pub columns: Vec<Vec<f64>>,
}

pub fn read_paths_binary(bytes: &[u8]) -> io::Result<BinaryPaths> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let mut pos = 0usize;
    let mut take = |n: usize| -> io::Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated MVB1 file"))?;
        pos += n;
        Ok(s)
    };
    if take(4)? != BINARY_MAGIC {
        return Err(bad("missing MVB1 magic"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != BINARY_VERSION {
        return Err(bad("unsupported MVB1 version"));
    }
    let len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    let meta = serde_json::from_slice(take(len)?).map_err(|e| bad(&e.to_string()))?;
    let n_paths = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let n_times = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let mut f64s = |n: usize| -> io::Result<Vec<f64>> {
        Ok(take(8 * n)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let times = f64s(n_times)?;
    let columns = (0..n_times).map(|_| f64s(n_paths)).collect::<io::Result<_>>()?;
    Ok(BinaryPaths { meta, times, columns })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digit_format() {
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(1.0), "1");
        assert_eq!(fmt_f64(0.1), "0.10000000000000001");
        assert_eq!(fmt_f64(-2.5), "-2.5");
        assert_eq!(fmt_f64(1e-7), "9.9999999999999995e-08");
        assert_eq!(fmt_f64(1.5e20), "1.5e+20");
        assert_eq!(fmt_f64(123456.0), "123456");
        assert_eq!(fmt_f64(0.000123), "0.00012300000000000001");
    }

    #[test]
    fn format_round_trips() {
        for &x in &[std::f64::consts::PI, 1.0 / 3.0, 6.02214076e23, -1.602e-19, 0.1 + 0.2, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x, "{x}");
        }
    }
}
