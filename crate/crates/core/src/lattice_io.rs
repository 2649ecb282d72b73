//! Lattice dumps of [`GridFunction`]s.
//!
//! Text format, one item per line:
//!
//! ```text
//! nlelliptic-lattice 1
//! n 2
//! h 0.0625
//! R 2
//! sigma 1.5
//! exterior constant 0
//! count 5041
//! <value>
//! ...
//! ```
//!
//! Binary format, all fields little-endian: the 8-byte magic `NLLAT\0\0\x01`,
//! `n: u32`, `h: f64`, `R: f64`, `sigma: f64`, exterior tag `u8`
//! (0 constant, 1 power decay, 2 not representable) followed by two `f64`
//! parameters, `count: u64`, then `count` values as `f64`.
//!
//! Values follow the node order of [`GridFunction::node_index`]. Exterior data
//! given by a closure cannot be stored; it is written with tag 2 and read back
//! as the zero constant.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{Exterior, Field, GridFunction};

const MAGIC: [u8; 8] = *b"NLLAT\0\0\x01";
const TEXT_TAG: &str = "nlelliptic-lattice 1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeHeader {
    pub n: usize,
    pub h: f64,
    pub radius: f64,
    pub sigma: f64,
}

fn exterior_fields(e: &Exterior) -> (u8, f64, f64) {
    match e {
        Exterior::Constant(c) => (0, *c, 0.0),
        Exterior::PowerDecay { amplitude, power } => (1, *amplitude, *power),
        Exterior::Function { .. } => (2, 0.0, 0.0),
    }
}

fn exterior_from(tag: u8, a: f64, b: f64) -> Result<Exterior> {
    match tag {
        0 => Ok(Exterior::Constant(a)),
        1 => Ok(Exterior::PowerDecay { amplitude: a, power: b }),
        2 => Ok(Exterior::Constant(0.0)),
        t => Err(Error::Io(format!("unknown exterior tag {t}"))),
    }
}

pub fn to_text(u: &GridFunction, sigma: f64) -> String {
    let (tag, a, b) = exterior_fields(u.exterior());
    let ext = match tag {
        0 => format!("constant {a}"),
        1 => format!("power {a} {b}"),
        _ => "opaque".to_string(),
    };
    let mut s = format!(
        "{TEXT_TAG}\nn {}\nh {}\nR {}\nsigma {}\nexterior {ext}\ncount {}\n",
        u.dim(),
        u.spacing(),
        u.radius(),
        sigma,
        u.values().len()
    );
    for v in u.values() {
        s.push_str(&format!("{v}\n"));
    }
    s
}

pub fn to_binary(u: &GridFunction, sigma: f64) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 8 * u.values().len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(u.dim() as u32).to_le_bytes());
    out.extend_from_slice(&u.spacing().to_le_bytes());
    out.extend_from_slice(&u.radius().to_le_bytes());
    out.extend_from_slice(&sigma.to_le_bytes());
    let (tag, a, b) = exterior_fields(u.exterior());
    out.push(tag);
    out.extend_from_slice(&a.to_le_bytes());
    out.extend_from_slice(&b.to_le_bytes());
    out.extend_from_slice(&(u.values().len() as u64).to_le_bytes());
    for v in u.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Io(msg.into())
}

pub fn from_text(text: &str) -> Result<(GridFunction, LatticeHeader)> {
    let mut lines = text.lines();
    if lines.next() != Some(TEXT_TAG) {
        return Err(bad("not a text lattice dump"));
    }
    let mut field = |name: &str| -> Result<Vec<String>> {
        let line = lines.next().ok_or_else(|| bad(format!("missing '{name}' line")))?;
        let mut it = line.split_whitespace();
        if it.next() != Some(name) {
            return Err(bad(format!("expected '{name}' line, found '{line}'")));
        }
        Ok(it.map(str::to_string).collect())
    };
    let num = |v: &[String], i: usize| -> Result<f64> {
        v.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| bad("malformed header number"))
    };
    let n = num(&field("n")?, 0)? as usize;
    let h = num(&field("h")?, 0)?;
    let radius = num(&field("R")?, 0)?;
    let sigma = num(&field("sigma")?, 0)?;
    let e = field("exterior")?;
    let exterior = match e.first().map(String::as_str) {
        Some("constant") => Exterior::Constant(num(&e, 1)?),
        Some("power") => Exterior::PowerDecay { amplitude: num(&e, 1)?, power: num(&e, 2)? },
        Some("opaque") => Exterior::Constant(0.0),
        _ => return Err(bad("malformed exterior line")),
    };
    let count = num(&field("count")?, 0)? as usize;
    let values: Vec<f64> = lines
        .take(count)
        .map(|l| l.trim().parse::<f64>().map_err(|_| bad(format!("malformed value '{l}'"))))
        .collect::<Result<_>>()?;
    if values.len() != count {
        return Err(bad(format!("expected {count} values, found {}", values.len())));
    }
    let u = GridFunction::from_values(n, h, radius, values, exterior).map_err(|e| bad(e.to_string()))?;
    Ok((u, LatticeHeader { n, h, radius, sigma }))
}

pub fn from_binary(bytes: &[u8]) -> Result<(GridFunction, LatticeHeader)> {
    let mut pos = 0usize;
    let mut take = |k: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + k).ok_or_else(|| bad("truncated binary lattice dump"))?;
        pos += k;
        Ok(s)
    };
    if take(8)? != MAGIC {
        return Err(bad("not a binary lattice dump"));
    }
    let f64_at = |s: &[u8]| f64::from_le_bytes(s.try_into().expect("8 bytes"));
    let n = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
    let h = f64_at(take(8)?);
    let radius = f64_at(take(8)?);
    let sigma = f64_at(take(8)?);
    let tag = take(1)?[0];
    let a = f64_at(take(8)?);
    let b = f64_at(take(8)?);
    let count = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    let body = take(count.checked_mul(8).ok_or_else(|| bad("value count overflows"))?)?;
    let values: Vec<f64> = body.chunks_exact(8).map(f64_at).collect();
    let u = GridFunction::from_values(n, h, radius, values, exterior_from(tag, a, b)?).map_err(|e| bad(e.to_string()))?;
    Ok((u, LatticeHeader { n, h, radius, sigma }))
}

pub fn write(path: &Path, u: &GridFunction, sigma: f64, binary: bool) -> Result<()> {
    let mut f = fs::File::create(path)?;
    if binary {
        f.write_all(&to_binary(u, sigma))?;
    } else {
        f.write_all(to_text(u, sigma).as_bytes())?;
    }
    Ok(())
}

/// Reads either format, recognized by its leading bytes.
pub fn read(path: &Path) -> Result<(GridFunction, LatticeHeader)> {
    let bytes = fs::read(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    if bytes.starts_with(&MAGIC) {
        from_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| bad("lattice dump is neither binary nor UTF-8 text"))?;
        from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GridFunction {
        GridFunction::from_fn(2, 0.25, 1.0, |x| (x[0] * 3.0).sin() + x[1] / 3.0, Exterior::PowerDecay { amplitude: 0.5, power: 0.5 })
            .unwrap()
    }

    #[test]
    fn text_round_trip_is_exact() {
        let u = sample();
        let (v, hdr) = from_text(&to_text(&u, 1.5)).unwrap();
        assert_eq!(u.values(), v.values());
        assert_eq!(hdr, LatticeHeader { n: 2, h: 0.25, radius: 1.0, sigma: 1.5 });
        assert!(!to_text(&u, 1.5).contains('\r'));
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let u = sample();
        let bytes = to_binary(&u, 1.25);
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        let (v, hdr) = from_binary(&bytes).unwrap();
        assert_eq!(u.values(), v.values());
        assert_eq!(hdr.sigma, 1.25);
        assert!(from_binary(&bytes[..bytes.len() - 3]).is_err());
    }
}
