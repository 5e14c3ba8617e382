//! Flat binary field container and CSV debug dump.
//!
//! Layout: magic `PHOM`, format version (u32), `d` (u32), `N` (u32), field
//! kind tag (u32), then little-endian f64 values in lexicographic site order,
//! component-major. Kind tags: 0 scalar (1 plane), 1 vector (`d` planes),
//! 2 skew matrix (`d(d−1)/2` upper-triangle planes, `(i,j)` with `i<j` in
//! lexicographic order), 3 matrix (`d²` row-major planes).

use std::io::{Read, Write};

use super::{skew_pairs, LatticeError, MatrixField, ScalarField, SkewMatrixField, TorusGrid, VectorField};

pub const MAGIC: &[u8; 4] = b"PHOM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug)]
pub enum IoError {
    Io(std::io::Error),
    BadMagic,
    BadVersion(u32),
    BadKind(u32),
    Lattice(LatticeError),
}

impl std::fmt::Display for IoError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IoError::Io(e) => write!(f, "io error: {e}"),
            IoError::BadMagic => write!(f, "bad magic, not a PHOM container"),
            IoError::BadVersion(v) => write!(f, "unsupported format version {v}"),
            IoError::BadKind(k) => write!(f, "unknown field kind tag {k}"),
            IoError::Lattice(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for IoError {}

impl From<std::io::Error> for IoError {
    fn from(e: std::io::Error) -> Self {
        IoError::Io(e)
    }
}

impl From<LatticeError> for IoError {
    fn from(e: LatticeError) -> Self {
        IoError::Lattice(e)
    }
}

/// A deserialized field of any kind.
#[derive(Debug, Clone)]
pub enum FieldPayload {
    Scalar(ScalarField),
    Vector(VectorField),
    Skew(SkewMatrixField),
    Matrix(MatrixField),
}

impl FieldPayload {
    pub fn kind_tag(&self) -> u32 {
        match self {
            FieldPayload::Scalar(_) => 0,
            FieldPayload::Vector(_) => 1,
            FieldPayload::Skew(_) => 2,
            FieldPayload::Matrix(_) => 3,
        }
    }

    pub fn grid(&self) -> TorusGrid {
        match self {
            FieldPayload::Scalar(f) => f.grid(),
            FieldPayload::Vector(f) => f.grid(),
            FieldPayload::Skew(f) => f.grid(),
            FieldPayload::Matrix(f) => f.grid(),
        }
    }

    fn planes(&self) -> usize {
        let d = self.grid().d();
        match self {
            FieldPayload::Scalar(_) => 1,
            FieldPayload::Vector(_) => d,
            FieldPayload::Skew(_) => d * (d - 1) / 2,
            FieldPayload::Matrix(_) => d * d,
        }
    }

    fn raw(&self) -> &[f64] {
        match self {
            FieldPayload::Scalar(f) => f.values(),
            FieldPayload::Vector(f) => f.values(),
            FieldPayload::Skew(f) => &f.values,
            FieldPayload::Matrix(f) => f.values(),
        }
    }
}

/// Write a field to the binary container.
pub fn write_field<W: Write>(w: &mut W, field: &FieldPayload) -> Result<(), IoError> {
    let grid = field.grid();
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(grid.d() as u32).to_le_bytes())?;
    w.write_all(&(grid.n() as u32).to_le_bytes())?;
    w.write_all(&field.kind_tag().to_le_bytes())?;
    for v in field.raw() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Read a field from the binary container.
pub fn read_field<R: Read>(r: &mut R) -> Result<FieldPayload, IoError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(IoError::BadMagic);
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(IoError::BadVersion(version));
    }
    r.read_exact(&mut word)?;
    let d = u32::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let n = u32::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let kind = u32::from_le_bytes(word);
    let grid = TorusGrid::new(d, n)?;
    let planes = match kind {
        0 => 1,
        1 => d,
        2 => d * (d - 1) / 2,
        3 => d * d,
        k => return Err(IoError::BadKind(k)),
    };
    let count = planes * grid.sites();
    let mut values = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    Ok(match kind {
        0 => FieldPayload::Scalar(ScalarField::from_values(grid, values)?),
        1 => FieldPayload::Vector(VectorField::from_values(grid, values)?),
        2 => {
            let mut h = SkewMatrixField::zeros(grid);
            h.values.copy_from_slice(&values);
            FieldPayload::Skew(h)
        }
        _ => FieldPayload::Matrix(MatrixField::from_values(grid, values)?),
    })
}

/// Plain-text CSV debug dump: one row per site, coordinates then components.
pub fn write_csv_dump<W: Write>(w: &mut W, field: &FieldPayload) -> Result<(), IoError> {
    let grid = field.grid();
    let d = grid.d();
    let planes = field.planes();
    let sites = grid.sites();
    let raw = field.raw();

    for axis in 0..d {
        write!(w, "x{}{}", axis + 1, if axis + 1 < d || planes > 0 { "," } else { "" })?;
    }
    let comp_names: Vec<String> = match field {
        FieldPayload::Scalar(_) => vec!["f".to_string()],
        FieldPayload::Vector(_) => (0..d).map(|i| format!("v{}", i + 1)).collect(),
        FieldPayload::Skew(_) => {
            skew_pairs(d).iter().map(|(i, j)| format!("h{}{}", i + 1, j + 1)).collect()
        }
        FieldPayload::Matrix(_) => {
            (0..d).flat_map(|i| (0..d).map(move |j| format!("m{}{}", i + 1, j + 1))).collect()
        }
    };
    writeln!(w, "{}", comp_names.join(","))?;

    let mut coords = [0i64; 3];
    for site in 0..sites {
        grid.coords(site, &mut coords[..d]);
        for c in &coords[..d] {
            write!(w, "{c},")?;
        }
        let row: Vec<String> = (0..planes).map(|p| format!("{:.17e}", raw[p * sites + site])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
