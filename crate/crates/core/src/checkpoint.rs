//! Binary restart files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic        8 bytes  "NDQCCKPT"
//! version      u32      1
//! precision    u32      2 (complex128 payload)
//! grid         f64 r_max, u32 n_r, u32 n_theta, u32 n_phi, u32 radial_order,
//!              f64 absorber_fraction, f64 absorber_exponent
//! config hash  32 bytes
//! step         u64
//! t            f64
//! R, P         6 × f64
//! payload      u64 count, then count × (f64 re, f64 im), row-major [radial, angular]
//! series       f64 t0, f64 dt, u64 count, then count × 14 f64 rows
//! ```
//!
//! Files are written to a sibling temporary file and renamed into place.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::observables::{Sample, TimeSeries};
use crate::potentials::ClassicalState;

pub const MAGIC: &[u8; 8] = b"NDQCCKPT";
pub const VERSION: u32 = 1;
pub const PRECISION_COMPLEX128: u32 = 2;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub spec: GridSpec,
    pub config_hash: [u8; 32],
    pub step: u64,
    pub cm: ClassicalState,
    pub amplitudes: Array2<C64>,
    pub series: TimeSeries,
}

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn u32(&mut self, v: u32) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn bytes(&mut self, v: &[u8]) -> Result<()> {
        Ok(self.0.write_all(v)?)
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0
            .read_exact(&mut b)
            .map_err(|e| Error::Checkpoint(format!("truncated file: {e}")))?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{what} = {v} does not fit in u32")))
}

fn encode<W: Write>(w: &mut Writer<W>, c: &Checkpoint) -> Result<()> {
    w.bytes(MAGIC)?;
    w.u32(VERSION)?;
    w.u32(PRECISION_COMPLEX128)?;
    let s = &c.spec;
    w.f64(s.r_max)?;
    w.u32(to_u32(s.n_r, "n_r")?)?;
    w.u32(to_u32(s.n_theta, "n_theta")?)?;
    w.u32(to_u32(s.n_phi, "n_phi")?)?;
    w.u32(to_u32(s.radial_order, "radial_order")?)?;
    w.f64(s.absorber_fraction)?;
    w.f64(s.absorber_exponent)?;
    w.bytes(&c.config_hash)?;
    w.u64(c.step)?;
    w.f64(c.cm.t)?;
    for v in c.cm.r.iter().chain(&c.cm.p) {
        w.f64(*v)?;
    }
    let amp = c.amplitudes.as_standard_layout();
    w.u64(amp.len() as u64)?;
    for z in amp.iter() {
        w.f64(z.re)?;
        w.f64(z.im)?;
    }
    w.f64(c.series.t0())?;
    w.f64(c.series.dt())?;
    w.u64(c.series.len() as u64)?;
    for s in c.series.samples() {
        for v in s.to_row() {
            w.f64(v)?;
        }
    }
    Ok(())
}

/// Writes atomically: a temporary file in the same directory is renamed
/// over `path` once complete.
pub fn write_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Checkpoint(format!("invalid checkpoint path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let file = fs::File::create(&tmp)?;
        let mut w = Writer(BufWriter::new(file));
        encode(&mut w, checkpoint)?;
        let file = w.0.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = Reader(BufReader::new(fs::File::open(path)?));
    let magic: [u8; 8] = r.array()?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let precision = r.u32()?;
    if precision != PRECISION_COMPLEX128 {
        return Err(Error::Checkpoint(format!("unsupported precision flag {precision}")));
    }
    let r_max = r.f64()?;
    let n_r = r.u32()? as usize;
    let n_theta = r.u32()? as usize;
    let n_phi = r.u32()? as usize;
    let order = r.u32()? as usize;
    let fraction = r.f64()?;
    let exponent = r.f64()?;
    let spec = GridSpec::new(r_max, n_r, n_theta, n_phi)
        .with_radial_order(order)
        .with_absorber(fraction, exponent);
    spec.validate()
        .map_err(|e| Error::Checkpoint(format!("stored grid is invalid: {e}")))?;
    let config_hash: [u8; 32] = r.array()?;
    let step = r.u64()?;
    let t = r.f64()?;
    let mut cm = [0.0; 6];
    for v in cm.iter_mut() {
        *v = r.f64()?;
    }
    let count = r.u64()? as usize;
    let n_radial = (n_r / order) * order;
    let n_ang = n_theta * n_phi;
    if count != n_radial * n_ang {
        return Err(Error::Checkpoint(format!(
            "payload holds {count} values, grid needs {}",
            n_radial * n_ang
        )));
    }
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        let re = r.f64()?;
        let im = r.f64()?;
        data.push(C64::new(re, im));
    }
    let amplitudes = Array2::from_shape_vec((n_radial, n_ang), data)
        .map_err(|e| Error::Checkpoint(format!("payload shape: {e}")))?;
    let t0 = r.f64()?;
    let dt = r.f64()?;
    let len = r.u64()? as usize;
    let mut series = TimeSeries::new(t0, dt).map_err(|e| Error::Checkpoint(e.to_string()))?;
    for _ in 0..len {
        let mut row = [0.0; 14];
        for v in row.iter_mut() {
            *v = r.f64()?;
        }
        series.push(Sample::from_row(&row))?;
    }
    let mut rest = Vec::new();
    r.0.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    Ok(Checkpoint {
        spec,
        config_hash,
        step,
        cm: ClassicalState::new([cm[0], cm[1], cm[2]], [cm[3], cm[4], cm[5]], t),
        amplitudes,
        series,
    })
}
