//! Binary field snapshots.
//!
//! Layout, all integers and floats little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `NEMTHSIM` |
//! | 4 | version (u32) |
//! | 4 | dims (u32) |
//! | 4 × dims | resolution per axis (u32) |
//! | 4 + len | field name, length-prefixed ASCII |
//! | 4 | component count (u32) |
//! | 8 | time (f64) |
//! | 8 | eps (f64, 0 for the limit system) |
//! | 8 × cells × components | payload (f64) |
//!
//! The payload walks the cells with the first axis fastest and stores the
//! components of each cell together. Staggered velocity components are
//! stored per forward face, which has the same index as its cell.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{DirectorField, Grid, ScalarField, VectorField};
use crate::state::{Regularization, State};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"NEMTHSIM";
pub const SNAPSHOT_VERSION: u32 = 1;

/// The names under which [`write_state`] stores the fields of a state.
pub const STATE_FIELDS: [&str; 4] = ["u", "p", "d", "theta"];

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub version: u32,
    pub resolution: Vec<usize>,
    pub field: String,
    pub components: usize,
    pub t: f64,
    pub eps: f64,
}

impl SnapshotHeader {
    pub fn new(grid: &Grid, field: &str, components: usize, t: f64, eps: Regularization) -> SnapshotHeader {
        SnapshotHeader {
            version: SNAPSHOT_VERSION,
            resolution: grid.resolution().to_vec(),
            field: field.into(),
            components,
            t,
            eps: eps.as_header_value(),
        }
    }

    pub fn cells(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn payload_len(&self) -> usize {
        self.cells() * self.components * 8
    }

    pub fn regularization(&self) -> Regularization {
        if self.eps == 0.0 {
            Regularization::Limit
        } else {
            Regularization::Finite(self.eps)
        }
    }
}

/// Header plus payload values in storage order.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub values: Vec<f64>,
}

fn u32_of(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Snapshot(format!("{what} {v} does not fit in u32")))
}

pub fn write_snapshot(header: &SnapshotHeader, values: &[f64]) -> Result<Vec<u8>> {
    if !header.field.is_ascii() {
        return Err(Error::Snapshot(format!("field name {:?} is not ASCII", header.field)));
    }
    if values.len() * 8 != header.payload_len() {
        return Err(Error::Snapshot(format!(
            "{} values do not match {} cells x {} components",
            values.len(),
            header.cells(),
            header.components
        )));
    }
    let mut out = Vec::with_capacity(64 + header.payload_len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&header.version.to_le_bytes());
    out.extend_from_slice(&u32_of(header.resolution.len(), "dims")?.to_le_bytes());
    for &n in &header.resolution {
        out.extend_from_slice(&u32_of(n, "resolution")?.to_le_bytes());
    }
    out.extend_from_slice(&u32_of(header.field.len(), "name length")?.to_le_bytes());
    out.extend_from_slice(header.field.as_bytes());
    out.extend_from_slice(&u32_of(header.components, "components")?.to_le_bytes());
    out.extend_from_slice(&header.t.to_le_bytes());
    out.extend_from_slice(&header.eps.to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Snapshot(format!("truncated header: {what} needs {n} bytes at offset {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

pub fn read_snapshot(bytes: &[u8]) -> Result<Snapshot> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic")? != SNAPSHOT_MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let version = r.u32("version")?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let dims = r.u32("dims")? as usize;
    if !(1..=3).contains(&dims) {
        return Err(Error::Snapshot(format!("dims {dims} outside 1..=3")));
    }
    let resolution = (0..dims).map(|_| r.u32("resolution").map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let name_len = r.u32("name length")? as usize;
    let name = r.take(name_len, "field name")?;
    let field = std::str::from_utf8(name)
        .ok()
        .filter(|s| s.is_ascii())
        .ok_or_else(|| Error::Snapshot("field name is not ASCII".into()))?
        .to_string();
    let components = r.u32("components")? as usize;
    let t = r.f64("time")?;
    let eps = r.f64("eps")?;
    let header = SnapshotHeader {
        version,
        resolution,
        field,
        components,
        t,
        eps,
    };
    let payload = &bytes[r.pos..];
    if payload.len() != header.payload_len() {
        return Err(Error::Snapshot(format!(
            "payload length mismatch: expected {} bytes, found {}",
            header.payload_len(),
            payload.len()
        )));
    }
    let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(Snapshot { header, values })
}

fn interleave(comps: &[&[f64]]) -> Vec<f64> {
    let n = comps.first().map_or(0, |c| c.len());
    (0..n).flat_map(|c| comps.iter().map(move |v| v[c])).collect()
}

fn deinterleave(values: &[f64], components: usize) -> Vec<Vec<f64>> {
    (0..components).map(|k| values.iter().skip(k).step_by(components).copied().collect()).collect()
}

pub fn scalar_snapshot(f: &ScalarField, name: &str, t: f64, eps: Regularization) -> Snapshot {
    Snapshot {
        header: SnapshotHeader::new(f.grid(), name, 1, t, eps),
        values: f.values().to_vec(),
    }
}

pub fn vector_snapshot(f: &VectorField, name: &str, t: f64, eps: Regularization) -> Snapshot {
    let comps: Vec<&[f64]> = f.components().iter().map(|c| c.as_slice()).collect();
    Snapshot {
        header: SnapshotHeader::new(f.grid(), name, f.dims(), t, eps),
        values: interleave(&comps),
    }
}

pub fn director_snapshot(f: &DirectorField, name: &str, t: f64, eps: Regularization) -> Snapshot {
    let comps: Vec<&[f64]> = f.components().iter().map(|c| c.as_slice()).collect();
    Snapshot {
        header: SnapshotHeader::new(f.grid(), name, 3, t, eps),
        values: interleave(&comps),
    }
}

impl Snapshot {
    fn check(&self, grid: &Grid, components: usize) -> Result<()> {
        if self.header.resolution != grid.resolution() {
            return Err(Error::Snapshot(format!(
                "{}: resolution {:?} does not match the grid {:?}",
                self.header.field,
                self.header.resolution,
                grid.resolution()
            )));
        }
        if self.header.components != components {
            return Err(Error::Snapshot(format!(
                "{}: {} components, expected {components}",
                self.header.field, self.header.components
            )));
        }
        Ok(())
    }

    pub fn to_scalar(&self, grid: &Grid) -> Result<ScalarField> {
        self.check(grid, 1)?;
        ScalarField::from_values(grid, self.values.clone())
    }

    /// A staggered vector field.
    pub fn to_vector(&self, grid: &Grid) -> Result<VectorField> {
        self.check(grid, grid.dims())?;
        VectorField::from_components(grid, deinterleave(&self.values, grid.dims()), true)
    }

    pub fn to_director(&self, grid: &Grid) -> Result<DirectorField> {
        self.check(grid, 3)?;
        let mut c = deinterleave(&self.values, 3).into_iter();
        let mut next = || c.next().expect("three components");
        DirectorField::from_components(grid, [next(), next(), next()])
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        write_snapshot(&self.header, &self.values)
    }
}

/// Writes the four fields of `state` as `<dir>/<name>.bin`.
pub fn write_state(dir: &Path, state: &State) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (t, e) = (state.t, state.eps);
    let snaps = [
        vector_snapshot(&state.u, "u", t, e),
        scalar_snapshot(&state.p, "p", t, e),
        director_snapshot(&state.d, "d", t, e),
        scalar_snapshot(&state.theta, "theta", t, e),
    ];
    for s in &snaps {
        fs::write(dir.join(format!("{}.bin", s.header.field)), s.to_bytes()?)?;
    }
    Ok(())
}

/// Reads a state written by [`write_state`] on `grid`.
pub fn read_state(dir: &Path, grid: &Grid) -> Result<State> {
    let load = |name: &str| -> Result<Snapshot> {
        let bytes = fs::read(dir.join(format!("{name}.bin")))?;
        let s = read_snapshot(&bytes).map_err(|e| Error::Snapshot(format!("{name}.bin: {e}")))?;
        if s.header.field != name {
            return Err(Error::Snapshot(format!("{name}.bin holds field `{}`", s.header.field)));
        }
        Ok(s)
    };
    let u = load("u")?;
    let (t, eps) = (u.header.t, u.header.regularization());
    let rest = [load("p")?, load("d")?, load("theta")?];
    if rest.iter().any(|s| s.header.t != t || s.header.eps != u.header.eps) {
        return Err(Error::Snapshot(format!("fields in {} disagree on time or eps", dir.display())));
    }
    let [p, d, theta] = rest;
    Ok(State {
        u: u.to_vector(grid)?,
        p: p.to_scalar(grid)?,
        d: d.to_director(grid)?,
        theta: theta.to_scalar(grid)?,
        t,
        eps,
    })
}
