use super::experiments::TracerExperiment;
use super::surface::BarrierSurface;
use crate::error::Result;
use std::io::Write;

fn lambda2(surface: &BarrierSurface) -> Option<Vec<f64>> {
    surface
        .strain
        .as_ref()
        .map(|s| s.iter().map(|v| v.lambda[1]).collect())
}

/// ASCII PLY with per-vertex `helicity` and, when strain data is attached,
/// `lambda2`.
pub fn write_ply<W: Write>(surface: &BarrierSurface, mut w: W) -> Result<()> {
    let mesh = &surface.mesh;
    let l2 = lambda2(surface);
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "comment kind {}", surface.kind.label())?;
    writeln!(w, "element vertex {}", mesh.vertices.len())?;
    for p in ["x", "y", "z", "helicity"] {
        writeln!(w, "property double {p}")?;
    }
    if l2.is_some() {
        writeln!(w, "property double lambda2")?;
    }
    writeln!(w, "element face {}", mesh.faces.len())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "end_header")?;
    for (k, p) in mesh.vertices.iter().enumerate() {
        write!(w, "{} {} {} {}", p[0], p[1], p[2], surface.helicity[k])?;
        if let Some(l) = &l2 {
            write!(w, " {}", l[k])?;
        }
        writeln!(w)?;
    }
    for f in &mesh.faces {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}

/// Legacy ASCII VTK polydata with the same point scalars as [`write_ply`].
pub fn write_vtk<W: Write>(surface: &BarrierSurface, mut w: W) -> Result<()> {
    let mesh = &surface.mesh;
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{} barrier surface", surface.kind.label())?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET POLYDATA")?;
    writeln!(w, "POINTS {} double", mesh.vertices.len())?;
    for p in &mesh.vertices {
        writeln!(w, "{} {} {}", p[0], p[1], p[2])?;
    }
    writeln!(w, "POLYGONS {} {}", mesh.faces.len(), 4 * mesh.faces.len())?;
    for f in &mesh.faces {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    writeln!(w, "POINT_DATA {}", mesh.vertices.len())?;
    let mut scalars = vec![("helicity", surface.helicity.clone())];
    if let Some(l) = lambda2(surface) {
        scalars.push(("lambda2", l));
    }
    for (name, values) in scalars {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in values {
            writeln!(w, "{v}")?;
        }
    }
    Ok(())
}

/// One CSV row per stored trajectory sample: `seed,class,t,x,y,z`.
pub fn write_trajectories_csv<W: Write>(exp: &TracerExperiment, mut w: W) -> Result<()> {
    writeln!(w, "seed,class,t,x,y,z")?;
    for (k, (traj, class)) in exp.trajectories.iter().zip(&exp.classes).enumerate() {
        let class = class.label();
        for (t, p) in traj {
            writeln!(w, "{k},{class},{t},{},{},{}", p[0], p[1], p[2])?;
        }
    }
    Ok(())
}
