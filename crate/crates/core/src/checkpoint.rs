//! Checkpoints of a [`FlowState`]: vorticity coefficients plus a header.
//!
//! Binary layout, all little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `b"SHEARCK1"` |
//! | 8 x 3 | `n1`, `n2`, `m` as `u64` |
//! | 8 x 3 | `t`, `mean.0`, `mean.1` as `f64` |
//! | 16 x (n1/2+1) x n2 | coefficients `(re, im)` as `f64`, row-major in `(i1, i2)` |
//!
//! The CSV form has a comment header `# n1=..,n2=..,m=..,t=..,mean1=..,mean2=..`
//! followed by rows `i1,index2,re,im` in the same order.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler::FlowState;
use crate::field::SpectralField;
use crate::grid::TorusGrid;

const MAGIC: &[u8; 8] = b"SHEARCK1";

/// On-disk checkpoint encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointFormat {
    #[default]
    None,
    Binary,
    Csv,
}

pub fn write_binary(state: &FlowState, w: impl Write) -> Result<()> {
    let mut w = BufWriter::new(w);
    let g = state.grid();
    w.write_all(MAGIC)?;
    for v in [g.n1(), g.n2(), g.m()] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    for v in [state.t, state.mean.0, state.mean.1] {
        w.write_all(&v.to_le_bytes())?;
    }
    for c in state.omega.coeffs() {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary(r: impl Read) -> Result<FlowState> {
    let mut r = BufReader::new(r);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Validation(
            "not a checkpoint file (bad magic)".into(),
        ));
    }
    let mut word = [0u8; 8];
    let mut next_u64 = |r: &mut BufReader<_>| -> Result<u64> {
        r.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word))
    };
    let n1 = next_u64(&mut r)? as usize;
    let n2 = next_u64(&mut r)? as usize;
    let m = next_u64(&mut r)? as usize;
    let mut f = [0.0; 3];
    for v in &mut f {
        *v = f64::from_bits(next_u64(&mut r)?);
    }
    let g = TorusGrid::new(n1, n2, m)?;
    let mut coeffs = Vec::with_capacity(g.spectral_len());
    for _ in 0..g.spectral_len() {
        let re = f64::from_bits(next_u64(&mut r)?);
        let im = f64::from_bits(next_u64(&mut r)?);
        coeffs.push(Complex64::new(re, im));
    }
    let omega = SpectralField::from_coeffs(&g, coeffs)?;
    Ok(FlowState {
        omega,
        mean: (f[1], f[2]),
        t: f[0],
    })
}

pub fn write_csv(state: &FlowState, w: impl Write) -> Result<()> {
    let mut w = BufWriter::new(w);
    let g = state.grid();
    writeln!(
        w,
        "# n1={},n2={},m={},t={},mean1={},mean2={}",
        g.n1(),
        g.n2(),
        g.m(),
        state.t,
        state.mean.0,
        state.mean.1
    )?;
    writeln!(w, "i1,index2,re,im")?;
    let n2 = g.n2();
    for (k, c) in state.omega.coeffs().iter().enumerate() {
        writeln!(w, "{},{},{},{}", k / n2, g.index2(k % n2), c.re, c.im)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(r: impl Read) -> Result<FlowState> {
    let mut r = BufReader::new(r);
    let mut header = String::new();
    r.read_line(&mut header)?;
    let bad = |what: &str| Error::Validation(format!("checkpoint CSV: {what}"));
    let fields: std::collections::HashMap<&str, &str> = header
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| bad("missing header line"))?
        .split(',')
        .filter_map(|kv| kv.trim().split_once('='))
        .collect();
    let get = |k: &str| -> Result<&str> {
        fields
            .get(k)
            .copied()
            .ok_or_else(|| bad(&format!("header lacks {k}")))
    };
    let parse_usize = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| bad(k)) };
    let parse_f64 = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| bad(k)) };
    let g = TorusGrid::new(parse_usize("n1")?, parse_usize("n2")?, parse_usize("m")?)?;
    let (t, mean) = (parse_f64("t")?, (parse_f64("mean1")?, parse_f64("mean2")?));
    let mut reader = csv::Reader::from_reader(r);
    let mut omega = SpectralField::zeros(&g);
    let mut count = 0;
    for rec in reader.deserialize::<(usize, i64, f64, f64)>() {
        let (i1, index2, re, im) = rec?;
        if i1 >= g.nh() || index2.unsigned_abs() as usize > g.n2() / 2 {
            return Err(bad("mode out of range"));
        }
        omega.set_coeff(i1, index2, Complex64::new(re, im));
        count += 1;
    }
    if count != g.spectral_len() {
        return Err(Error::Shape {
            expected: g.spectral_len(),
            got: count,
        });
    }
    Ok(FlowState { omega, mean, t })
}

/// Writes `state` to `path` in the given format (no-op for `None`).
pub fn save(state: &FlowState, path: &Path, format: CheckpointFormat) -> Result<()> {
    match format {
        CheckpointFormat::None => Ok(()),
        CheckpointFormat::Binary => write_binary(state, std::fs::File::create(path)?),
        CheckpointFormat::Csv => write_csv(state, std::fs::File::create(path)?),
    }
}

/// Reads a checkpoint, choosing the format from the file contents.
pub fn load(path: &Path) -> Result<FlowState> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        read_binary(&bytes[..])
    } else {
        read_csv(&bytes[..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state() -> FlowState {
        let g = TorusGrid::new(16, 32, 2).unwrap();
        let mut w = crate::field::tests::random_smooth(&g, 4, 4);
        w.coeffs_mut()[0] = Default::default();
        let mut s = FlowState::new(w, (0.25, -0.5)).unwrap();
        s.t = 1.0 / 3.0;
        s
    }

    fn same(a: &FlowState, b: &FlowState) {
        assert_eq!(a.grid(), b.grid());
        assert_eq!(a.t.to_bits(), b.t.to_bits());
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.omega.coeffs(), b.omega.coeffs());
    }

    #[test]
    fn binary_round_trip_is_bitwise() {
        let s = state();
        let mut buf = Vec::new();
        write_binary(&s, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 48 + 16 * s.grid().spectral_len());
        same(&s, &read_binary(&buf[..]).unwrap());
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let s = state();
        let mut buf = Vec::new();
        write_csv(&s, &mut buf).unwrap();
        same(&s, &read_csv(&buf[..]).unwrap());
    }

    #[test]
    fn files_are_detected_by_content() {
        let dir = tempfile::tempdir().unwrap();
        let s = state();
        for (name, fmt) in [
            ("a.bin", CheckpointFormat::Binary),
            ("a.csv", CheckpointFormat::Csv),
        ] {
            let p = dir.path().join(name);
            save(&s, &p, fmt).unwrap();
            same(&s, &load(&p).unwrap());
        }
    }

    #[test]
    fn corrupt_input_is_rejected() {
        assert!(read_binary(&b"NOTACKPT"[..]).is_err());
        let s = state();
        let mut buf = Vec::new();
        write_binary(&s, &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_binary(&buf[..]).is_err());
    }
}
