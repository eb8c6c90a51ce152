//! Binary snapshots: `GQK1` for states, `GQKF` for matrix-valued fields.
//!
//! Both start with the magic bytes, `u32 n`, `f64 L` and `u32 two_s`
//! (little endian). A state then has a `u8` representation tag and
//! `n³ (2s+1)` complex values; a field has `n³ (2s+1)²` complex values,
//! one row-major matrix per lattice point. Complex values are `(re, im)`
//! pairs of `f64` in layout order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;

use crate::error::{GqkError, Result};
use crate::field::LatticeField;
use crate::grid::{GridSpec, Representation, SpinSpec, State};

const STATE_MAGIC: &[u8; 4] = b"GQK1";
const FIELD_MAGIC: &[u8; 4] = b"GQKF";

fn write_header(out: &mut Vec<u8>, magic: &[u8; 4], grid: GridSpec, two_s: u32) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    out.extend_from_slice(&grid.box_length().to_le_bytes());
    out.extend_from_slice(&two_s.to_le_bytes());
}

fn write_values(out: &mut Vec<u8>, values: &[C64]) {
    for v in values {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos + k;
        if end > self.buf.len() {
            return Err(GqkError::Format(format!(
                "truncated: need {k} bytes at offset {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn values(&mut self, count: usize) -> Result<Vec<C64>> {
        (0..count)
            .map(|_| Ok(C64::new(self.f64()?, self.f64()?)))
            .collect()
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(GqkError::Format(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn read_header(cur: &mut Cursor<'_>, magic: &[u8; 4]) -> Result<(GridSpec, SpinSpec)> {
    let m = cur.take(4)?;
    if m != magic {
        return Err(GqkError::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(m),
            String::from_utf8_lossy(magic)
        )));
    }
    let n = cur.u32()? as usize;
    let l = cur.f64()?;
    let two_s = cur.u32()?;
    let grid = GridSpec::new(n, l).map_err(|e| GqkError::Format(e.to_string()))?;
    Ok((grid, SpinSpec::new(two_s)))
}

pub fn encode_state(psi: &State) -> Vec<u8> {
    let mut out = Vec::with_capacity(21 + 16 * psi.amplitudes().len());
    write_header(&mut out, STATE_MAGIC, psi.grid(), psi.spin().two_s());
    out.push(psi.representation().tag());
    write_values(&mut out, psi.amplitudes());
    out
}

pub fn decode_state(bytes: &[u8]) -> Result<State> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let (grid, spin) = read_header(&mut cur, STATE_MAGIC)?;
    let rep = match cur.take(1)?[0] {
        0 => Representation::Position,
        1 => Representation::Momentum,
        t => return Err(GqkError::Format(format!("unknown representation tag {t}"))),
    };
    let amps = cur.values(grid.points() * spin.dim())?;
    cur.finish()?;
    State::from_amplitudes(grid, spin, rep, amps)
}

pub fn encode_field(field: &LatticeField, two_s: u32) -> Result<Vec<u8>> {
    if field.dim() != two_s as usize + 1 {
        return Err(GqkError::SpecMismatch(format!(
            "field of dimension {} with 2s = {two_s}",
            field.dim()
        )));
    }
    let mut out = Vec::with_capacity(20 + 16 * field.raw().len());
    write_header(&mut out, FIELD_MAGIC, field.grid(), two_s);
    write_values(&mut out, field.raw());
    Ok(out)
}

pub fn decode_field(bytes: &[u8]) -> Result<(LatticeField, SpinSpec)> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let (grid, spin) = read_header(&mut cur, FIELD_MAGIC)?;
    let d = spin.dim();
    let data = cur.values(grid.points() * d * d)?;
    cur.finish()?;
    Ok((LatticeField::from_raw(grid, d, data)?, spin))
}

pub fn write_state(path: &Path, psi: &State) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_state(psi))?;
    Ok(())
}

pub fn read_state(path: &Path) -> Result<State> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    decode_state(&buf)
}

pub fn write_field(path: &Path, field: &LatticeField, two_s: u32) -> Result<()> {
    fs::write(path, encode_field(field, two_s)?)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<(LatticeField, SpinSpec)> {
    decode_field(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{standard_states, to_momentum};

    #[test]
    fn state_round_trip_is_bit_exact() {
        let g = GridSpec::new(8, 4.0).unwrap();
        let s = SpinSpec::new(1);
        let psi = standard_states(g, s, 3, 1).remove(0);
        let k = to_momentum(&psi).unwrap();
        for st in [psi, k] {
            let bytes = encode_state(&st);
            assert_eq!(&bytes[..4], b"GQK1");
            assert_eq!(bytes.len(), 4 + 4 + 8 + 4 + 1 + 16 * 512 * 2);
            let back = decode_state(&bytes).unwrap();
            assert_eq!(back.amplitudes(), st.amplitudes());
            assert_eq!(back.representation(), st.representation());
        }
    }

    #[test]
    fn layout_is_spin_fastest() {
        let g = GridSpec::new(4, 4.0).unwrap();
        let s = SpinSpec::new(1);
        let psi = State::from_fn(g, s, |x, sp| C64::new(x[0] + 10.0 * x[1] + 100.0 * x[2], sp as f64));
        let bytes = encode_state(&psi);
        let val = |k: usize| {
            let off = 21 + 16 * k;
            (
                f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()),
                f64::from_le_bytes(bytes[off + 8..off + 16].try_into().unwrap()),
            )
        };
        // index 0: point (0,0,0) spin 0; index 1: same point spin 1; index 2: x1 advanced
        assert_eq!(val(0), (-222.0, 0.0));
        assert_eq!(val(1), (-222.0, 1.0));
        assert_eq!(val(2), (-221.0, 0.0));
        assert_eq!(val(8), (-212.0, 0.0));
    }

    #[test]
    fn rejects_corrupt_input() {
        let g = GridSpec::new(4, 4.0).unwrap();
        let psi = State::zeros(g, SpinSpec::new(0));
        let mut bytes = encode_state(&psi);
        assert!(decode_state(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(matches!(decode_state(&bytes), Err(GqkError::Format(_))));
        let field = LatticeField::zeros(g, 1);
        let fb = encode_field(&field, 0).unwrap();
        assert!(decode_state(&fb).is_err());
        assert!(decode_field(&fb).is_ok());
    }
}
