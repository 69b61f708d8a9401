//! Little-endian binary snapshots of lattice and envelope fields.
//!
//! Header: magic `FPUT2D\0`, version `u32`, form tag `u8`, side `u32`,
//! time `f64`; then row-major `f64` arrays. Lattice displacement snapshots
//! hold `q, w`; strain snapshots hold `u, v, ut, vt`; envelope snapshots
//! hold one complex array as interleaved `(re, im)` pairs.

use std::io::{self, Read, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::dispersion::Variant;
use crate::lattice::{Form, LatticeError, LatticeState};
use crate::nls::{EnvelopeField, NlsError};

pub const MAGIC: &[u8; 7] = b"FPUT2D\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    Version(u32),
    #[error("unknown form tag {0}")]
    FormTag(u8),
    #[error("expected a {expected} snapshot")]
    WrongKind { expected: &'static str },
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Envelope(#[from] NlsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotForm {
    Displacement = 0,
    Strain = 1,
    Envelope = 2,
}

impl SnapshotForm {
    fn from_tag(tag: u8) -> Result<Self, SnapshotError> {
        match tag {
            0 => Ok(Self::Displacement),
            1 => Ok(Self::Strain),
            2 => Ok(Self::Envelope),
            t => Err(SnapshotError::FormTag(t)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub form: SnapshotForm,
    pub side: u32,
    pub time: f64,
}

fn write_header(w: &mut impl Write, h: &Header) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[h.form as u8])?;
    w.write_all(&h.side.to_le_bytes())?;
    w.write_all(&h.time.to_le_bytes())
}

fn read_header(r: &mut impl Read) -> Result<Header, SnapshotError> {
    let mut magic = [0u8; 7];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(SnapshotError::Version(version));
    }
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let form = SnapshotForm::from_tag(tag[0])?;
    r.read_exact(&mut b4)?;
    let side = u32::from_le_bytes(b4);
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    Ok(Header {
        form,
        side,
        time: f64::from_le_bytes(b8),
    })
}

fn write_f64s(w: &mut impl Write, values: &[f64]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

fn read_f64s(r: &mut impl Read, count: usize) -> io::Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn write_lattice(w: &mut impl Write, state: &LatticeState) -> io::Result<()> {
    let form = match state.form() {
        Form::Displacement => SnapshotForm::Displacement,
        Form::Strain => SnapshotForm::Strain,
    };
    write_header(
        w,
        &Header {
            form,
            side: state.side() as u32,
            time: state.time,
        },
    )?;
    for p in state.positions() {
        write_f64s(w, p)?;
    }
    for v in state.velocities() {
        write_f64s(w, v)?;
    }
    Ok(())
}

pub fn read_lattice(r: &mut impl Read) -> Result<LatticeState, SnapshotError> {
    let h = read_header(r)?;
    let n = h.side as usize;
    let len = n * n;
    let mut state = match h.form {
        SnapshotForm::Displacement => {
            let q = read_f64s(r, len)?;
            let w = read_f64s(r, len)?;
            LatticeState::displacement(n, q, w)?
        }
        SnapshotForm::Strain => {
            let u = read_f64s(r, len)?;
            let v = read_f64s(r, len)?;
            let ut = read_f64s(r, len)?;
            let vt = read_f64s(r, len)?;
            LatticeState::strain(n, u, v, ut, vt)?
        }
        SnapshotForm::Envelope => return Err(SnapshotError::WrongKind { expected: "lattice" }),
    };
    state.time = h.time;
    Ok(state)
}

/// The box length is not part of the header; callers record it elsewhere.
pub fn write_envelope(w: &mut impl Write, field: &EnvelopeField) -> io::Result<()> {
    write_header(
        w,
        &Header {
            form: SnapshotForm::Envelope,
            side: field.side() as u32,
            time: field.time,
        },
    )?;
    let flat: Vec<f64> = field.data.iter().flat_map(|z| [z.re, z.im]).collect();
    write_f64s(w, &flat)
}

pub fn read_envelope(
    r: &mut impl Read,
    length: f64,
    variant: Variant,
) -> Result<EnvelopeField, SnapshotError> {
    let h = read_header(r)?;
    if h.form != SnapshotForm::Envelope {
        return Err(SnapshotError::WrongKind { expected: "envelope" });
    }
    let n = h.side as usize;
    let flat = read_f64s(r, 2 * n * n)?;
    let data = flat.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    let mut field = EnvelopeField::new(n, length, variant, data)?;
    field.time = h.time;
    Ok(field)
}
