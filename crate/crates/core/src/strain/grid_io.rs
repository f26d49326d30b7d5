//! Binary persistence of the main layer of a [`DeformationGrid`].
//!
//! Layout: a 64-byte little-endian header
//!
//! | offset | size | content                       |
//! |--------|------|-------------------------------|
//! | 0      | 8    | magic `LCS3DGRD`              |
//! | 8      | 4    | format version (u32)          |
//! | 12     | 4    | nx (u32)                      |
//! | 16     | 4    | ny (u32)                      |
//! | 20     | 4    | number of fields (u32)        |
//! | 24     | 40   | s1, t0, T, hx, hy (f64)       |
//!
//! followed by `nfields` blocks of `nx * ny` f64 values in row-major order
//! (`i + nx j`), in the order of [`FIELD_NAMES`].

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::grid::{DeformationGrid, HelicitySet, PointRecord, PointStatus};
use super::shear_normals_from;
use crate::error::{LcsError, Result};
use crate::{Mat3, Vec3};

pub const MAGIC: &[u8; 8] = b"LCS3DGRD";
pub const VERSION: u32 = 1;

pub const FIELD_NAMES: [&str; 38] = [
    "x",
    "y",
    "mask",
    "lambda1",
    "lambda2",
    "lambda3",
    "xi1_x",
    "xi1_y",
    "xi1_z",
    "xi2_x",
    "xi2_y",
    "xi2_z",
    "xi3_x",
    "xi3_y",
    "xi3_z",
    "n_plus_x",
    "n_plus_y",
    "n_plus_z",
    "n_minus_x",
    "n_minus_y",
    "n_minus_z",
    "helicity_xi3",
    "helicity_xi1",
    "helicity_n_plus",
    "helicity_n_minus",
    "det_grad_f",
    "flow_map_x",
    "flow_map_y",
    "flow_map_z",
    "grad_f_xx",
    "grad_f_xy",
    "grad_f_xz",
    "grad_f_yx",
    "grad_f_yy",
    "grad_f_yz",
    "grad_f_zx",
    "grad_f_zy",
    "grad_f_zz",
];

/// Path of the text sidecar describing a grid file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".fields.txt");
    PathBuf::from(s)
}

fn point_values(grid: &DeformationGrid, n: usize) -> [f64; 38] {
    let r = &grid.main[n];
    let mut v = [f64::NAN; 38];
    v[0] = r.x0[0];
    v[1] = r.x0[1];
    v[2] = r.status.code();
    if r.status != PointStatus::EigenFailure {
        v[3..6].copy_from_slice(&r.lambda);
        for k in 0..3 {
            v[6 + 3 * k..9 + 3 * k].copy_from_slice(r.xi[k].as_slice());
        }
    }
    if r.status == PointStatus::InU {
        let s = shear_normals_from(r.lambda[0], r.lambda[2], &r.xi[0], &r.xi[2]);
        v[15..18].copy_from_slice(s.n_plus.as_slice());
        v[18..21].copy_from_slice(s.n_minus.as_slice());
    }
    let h = &grid.helicity;
    for (k, field) in [&h.xi3, &h.xi1, &h.n_plus, &h.n_minus].iter().enumerate() {
        v[21 + k] = field.get(n).copied().unwrap_or(f64::NAN);
    }
    v[25] = r.grad_f.determinant();
    v[26..29].copy_from_slice(r.f_val.as_slice());
    for a in 0..3 {
        for b in 0..3 {
            v[29 + 3 * a + b] = r.grad_f[(a, b)];
        }
    }
    v
}

pub fn write_grid(grid: &DeformationGrid, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_grid_to(grid, &mut w)?;
    w.flush()?;
    std::fs::write(sidecar_path(path), sidecar_text(grid))?;
    Ok(())
}

pub fn write_grid_to<W: Write>(grid: &DeformationGrid, w: &mut W) -> Result<()> {
    let npts = grid.nx * grid.ny;
    w.write_all(MAGIC)?;
    for u in [
        VERSION,
        grid.nx as u32,
        grid.ny as u32,
        FIELD_NAMES.len() as u32,
    ] {
        w.write_all(&u.to_le_bytes())?;
    }
    for f in [grid.s1, grid.t0, grid.t, grid.hx, grid.hy] {
        w.write_all(&f.to_le_bytes())?;
    }
    let rows: Vec<[f64; 38]> = (0..npts).map(|n| point_values(grid, n)).collect();
    for k in 0..FIELD_NAMES.len() {
        for row in &rows {
            w.write_all(&row[k].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn sidecar_text(grid: &DeformationGrid) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "format LCS3DGRD version {VERSION}\nnx {}\nny {}\ns1 {:?}\nt0 {:?}\nT {:?}\nhx {:?}\nhy {:?}\nhz {:?}\n",
        grid.nx, grid.ny, grid.s1, grid.t0, grid.t, grid.hx, grid.hy, grid.hz
    ));
    s.push_str(
        "mask 0 = distinct eigenvalues, 1 = eigenvalue gap below tolerance, 2 = eigen-decomposition failed\n\
         NaN marks values unavailable at a point: eigen data when mask = 2, shear normals when mask != 0, \
         helicity where the point or its stencil is masked\n",
    );
    s.push_str("fields\n");
    for (k, name) in FIELD_NAMES.iter().enumerate() {
        s.push_str(&format!("{k} {name}\n"));
    }
    s
}

fn read_sidecar_hz(path: &Path) -> Option<f64> {
    let text = std::fs::read_to_string(sidecar_path(path)).ok()?;
    text.lines()
        .find_map(|l| l.strip_prefix("hz "))
        .and_then(|v| v.trim().parse().ok())
}

pub fn read_grid(path: &Path) -> Result<DeformationGrid> {
    let mut r = BufReader::new(File::open(path)?);
    let mut grid = read_grid_from(&mut r)?;
    if let Some(hz) = read_sidecar_hz(path) {
        grid.hz = hz;
    }
    Ok(grid)
}

pub fn read_grid_from<R: Read>(r: &mut R) -> Result<DeformationGrid> {
    let mut header = [0u8; 64];
    r.read_exact(&mut header)
        .map_err(|_| LcsError::Format("truncated grid header".into()))?;
    if &header[0..8] != MAGIC {
        return Err(LcsError::Format("not a grid file (bad magic)".into()));
    }
    let u = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let f = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    if u(8) != VERSION {
        return Err(LcsError::Format(format!(
            "unsupported grid version {}",
            u(8)
        )));
    }
    let (nx, ny, nfields) = (u(12) as usize, u(16) as usize, u(20) as usize);
    if nfields != FIELD_NAMES.len() {
        return Err(LcsError::Format(format!(
            "expected 38 fields, found {nfields}"
        )));
    }
    if nx < 2 || ny < 2 {
        return Err(LcsError::Format(format!("bad grid dimensions {nx}x{ny}")));
    }
    let (s1, t0, t, hx, hy) = (f(24), f(32), f(40), f(48), f(56));
    let npts = nx * ny;
    let mut bytes = vec![0u8; npts * nfields * 8];
    r.read_exact(&mut bytes)
        .map_err(|_| LcsError::Format("truncated grid data".into()))?;
    let val = |k: usize, n: usize| {
        let o = 8 * (k * npts + n);
        f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap())
    };
    let mut main = Vec::with_capacity(npts);
    let mut helicity = HelicitySet::default();
    for n in 0..npts {
        let status = PointStatus::from_code(val(2, n))
            .ok_or_else(|| LcsError::Format(format!("bad mask value at point {n}")))?;
        let v3 = |k: usize| Vec3::new(val(k, n), val(k + 1, n), val(k + 2, n));
        main.push(PointRecord {
            x0: Vec3::new(val(0, n), val(1, n), s1),
            f_val: v3(26),
            grad_f: Mat3::from_fn(|a, b| val(29 + 3 * a + b, n)),
            lambda: [val(3, n), val(4, n), val(5, n)],
            xi: [v3(6), v3(9), v3(12)],
            status,
        });
        helicity.xi3.push(val(21, n));
        helicity.xi1.push(val(22, n));
        helicity.n_plus.push(val(23, n));
        helicity.n_minus.push(val(24, n));
    }
    Ok(DeformationGrid {
        s1,
        t0,
        t,
        nx,
        ny,
        x_min: main[0].x0[0],
        y_min: main[0].x0[1],
        hx,
        hy,
        hz: hx.min(hy),
        main,
        below: Vec::new(),
        above: Vec::new(),
        helicity,
    })
}
