//! The `grid`, `lines`, `surfaces` and `forcing-gen` subcommands.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use lcs3d::barriers::{
    build_surface, match_closed_curves, match_open_curves, mesh_area, sweep_surface, torus_embed,
    write_ply, write_vtk, BarrierSurface, CenterCurve, ChainEnd, EdgeReport,
};
use lcs3d::flow::VelocityField;
use lcs3d::lines::{
    extract_lines, read_lines_csv, write_lines_csv, LineConfig, LineKind, ReducedLine,
};
use lcs3d::strain::grid_io::{read_grid, write_grid};
use lcs3d::strain::sample_plane;
use lcs3d::Vec3;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, StageConfig};
use crate::{kind_dir, read_json, rel, resolve, write_json, CliError, Kind, Outcome};

pub const GRID_MANIFEST: &str = "grid_manifest.json";
pub const LINES_MANIFEST: &str = "manifest.json";
pub const SURFACES_REPORT: &str = "surfaces.json";

pub fn stage(cfg: &RunConfig, kind: Kind) -> &StageConfig {
    if kind.is_elliptic() {
        &cfg.elliptic
    } else {
        &cfg.hyperbolic
    }
}

pub fn stage_dir(cfg: &RunConfig, kind: Kind) -> PathBuf {
    cfg.output.join(kind.stage_name())
}

pub fn lines_dir(cfg: &RunConfig, kind: Kind, line: LineKind) -> PathBuf {
    stage_dir(cfg, kind).join("lines").join(kind_dir(line))
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPlane {
    pub index: usize,
    pub s1: f64,
    /// Grid file relative to the stage directory; absent when the plane
    /// failed.
    pub file: Option<String>,
    pub error: Option<String>,
    pub masked_fraction: Option<f64>,
    pub max_volume_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridManifest {
    pub tool: String,
    pub version: String,
    pub stage: String,
    pub t0: f64,
    pub t: f64,
    pub config: RunConfig,
    pub planes: Vec<GridPlane>,
}

/// Sample every plane of the stage selected by `kind` and write one grid
/// file per plane plus `grid_manifest.json`.
pub fn cmd_grid(cfg: &RunConfig, kind: Kind) -> Result<Outcome, CliError> {
    let field = cfg.build_field()?;
    let st = stage(cfg, kind);
    let family = st.planes.family()?;
    let dir = stage_dir(cfg, kind);
    std::fs::create_dir_all(dir.join("grids"))?;
    let mut planes = Vec::with_capacity(family.len());
    for (index, &s1) in family.values().iter().enumerate() {
        let file = rel(&["grids", &format!("plane_{index:04}.grid")]);
        let started = std::time::Instant::now();
        let entry = match sample_plane(&field, &st.plane(s1), cfg.t0, st.t, &cfg.grid) {
            Ok(g) => {
                write_grid(&g, &resolve(&dir, &file))?;
                log::info!(
                    "plane {index} (z={s1}): {}x{} in {:.1?}, masked {:.2}%",
                    g.nx,
                    g.ny,
                    started.elapsed(),
                    100.0 * g.masked_fraction()
                );
                GridPlane {
                    index,
                    s1,
                    file: Some(file),
                    error: None,
                    masked_fraction: finite(g.masked_fraction()),
                    max_volume_error: finite(g.max_volume_error()),
                }
            }
            Err(e) => {
                log::warn!("plane {index} (z={s1}) failed: {e}");
                GridPlane {
                    index,
                    s1,
                    file: None,
                    error: Some(e.to_string()),
                    masked_fraction: None,
                    max_volume_error: None,
                }
            }
        };
        planes.push(entry);
    }
    let failed = planes.iter().filter(|p| p.file.is_none()).count();
    let manifest = GridManifest {
        tool: "lcs3d".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        stage: kind.stage_name().into(),
        t0: cfg.t0,
        t: st.t,
        config: cfg.clone(),
        planes,
    };
    write_json(&dir.join(GRID_MANIFEST), &manifest)?;
    println!(
        "grid: {} of {} planes written to {}",
        family.len() - failed,
        family.len(),
        dir.display()
    );
    if failed == family.len() {
        return Err(CliError::Compute("every plane failed".into()));
    }
    Ok(Outcome::partial_if(failed > 0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinePlane {
    pub index: usize,
    pub s1: f64,
    /// CSV file relative to the kind's line directory.
    pub file: Option<String>,
    pub error: Option<String>,
    pub lines: usize,
    pub closed: usize,
    /// Mean over lines of the mean |helicity| along each line.
    pub mean_abs_helicity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinesManifest {
    pub tool: String,
    pub version: String,
    pub kind: LineKind,
    pub t0: f64,
    pub t: f64,
    pub line_config: LineConfig,
    pub config: RunConfig,
    pub planes: Vec<LinePlane>,
}

fn read_grid_manifest(cfg: &RunConfig, kind: Kind) -> Result<GridManifest, CliError> {
    let path = stage_dir(cfg, kind).join(GRID_MANIFEST);
    if !path.is_file() {
        return Err(CliError::Compute(format!(
            "no grids at {}; run `lcs3d grid --kind {}` first",
            path.display(),
            kind_arg(kind)
        )));
    }
    read_json(&path, "grid manifest")
}

fn kind_arg(kind: Kind) -> &'static str {
    match kind {
        Kind::Strain => "strain",
        Kind::Stretch => "stretch",
        Kind::Shear => "shear",
    }
}

fn failed_plane(index: usize, s1: f64, error: String) -> LinePlane {
    LinePlane {
        index,
        s1,
        file: None,
        error: Some(error),
        lines: 0,
        closed: 0,
        mean_abs_helicity: None,
    }
}

/// Extract reduced lines from the stage grids and write one CSV per plane
/// and line kind, plus a manifest per kind.
pub fn cmd_lines(cfg: &RunConfig, kind: Kind) -> Result<Outcome, CliError> {
    let grids = read_grid_manifest(cfg, kind)?;
    let dir = stage_dir(cfg, kind);
    let lcfg = stage(cfg, kind).line_config(&cfg.lines);
    let kinds = kind.line_kinds();
    let mut entries: Vec<Vec<LinePlane>> = vec![Vec::new(); kinds.len()];
    for k in &kinds {
        std::fs::create_dir_all(lines_dir(cfg, kind, *k))?;
    }
    let mut partial = false;
    for plane in &grids.planes {
        let Some(file) = &plane.file else {
            partial = true;
            for e in entries.iter_mut() {
                e.push(failed_plane(plane.index, plane.s1, "no grid".into()));
            }
            continue;
        };
        let path = resolve(&dir, file);
        if !path.is_file() {
            return Err(CliError::Compute(format!(
                "grid of plane {} (z={}) is missing: {}",
                plane.index,
                plane.s1,
                path.display()
            )));
        }
        let grid = read_grid(&path)?;
        for (e, &k) in entries.iter_mut().zip(&kinds) {
            let entry = match extract_lines(&grid, k, &lcfg) {
                Ok(lines) => {
                    let name = format!("plane_{:04}.csv", plane.index);
                    let out = BufWriter::new(File::create(lines_dir(cfg, kind, k).join(&name))?);
                    write_lines_csv(&lines, out)?;
                    let hel: Vec<f64> = lines.iter().map(|l| l.mean_abs_helicity()).collect();
                    LinePlane {
                        index: plane.index,
                        s1: plane.s1,
                        file: Some(name),
                        error: None,
                        lines: lines.len(),
                        closed: lines.iter().filter(|l| l.closed).count(),
                        mean_abs_helicity: finite(hel.iter().sum::<f64>() / hel.len() as f64),
                    }
                }
                Err(err) => {
                    log::warn!("plane {} {}: {err}", plane.index, k.label());
                    partial = true;
                    failed_plane(plane.index, plane.s1, err.to_string())
                }
            };
            e.push(entry);
        }
    }
    for (e, &k) in entries.into_iter().zip(&kinds) {
        let total: usize = e.iter().map(|p| p.lines).sum();
        let closed: usize = e.iter().map(|p| p.closed).sum();
        if total == 0 {
            log::warn!("no {} lines found", k.label());
        }
        println!(
            "lines: {} {} lines ({closed} closed) over {} planes",
            total,
            k.label(),
            e.len()
        );
        let manifest = LinesManifest {
            tool: "lcs3d".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            kind: k,
            t0: grids.t0,
            t: grids.t,
            line_config: lcfg,
            config: cfg.clone(),
            planes: e,
        };
        write_json(&lines_dir(cfg, kind, k).join(LINES_MANIFEST), &manifest)?;
    }
    Ok(Outcome::partial_if(partial))
}

pub fn read_lines_manifest(
    cfg: &RunConfig,
    kind: Kind,
    line: LineKind,
) -> Result<LinesManifest, CliError> {
    let path = lines_dir(cfg, kind, line).join(LINES_MANIFEST);
    if !path.is_file() {
        return Err(CliError::Compute(format!(
            "no {} lines at {}; run `lcs3d lines --kind {}` first",
            line.label(),
            path.display(),
            kind_arg(kind)
        )));
    }
    read_json(&path, "lines manifest")
}

/// Lines of every plane listed in the manifest (empty for failed planes).
pub fn load_plane_lines(
    dir: &Path,
    manifest: &LinesManifest,
) -> Result<Vec<Vec<ReducedLine>>, CliError> {
    manifest
        .planes
        .iter()
        .map(|p| match &p.file {
            Some(f) => {
                let path = dir.join(f);
                let file = File::open(&path).map_err(|e| {
                    CliError::Compute(format!(
                        "lines of plane {} (z={}) are missing: {}: {e}",
                        p.index,
                        p.s1,
                        path.display()
                    ))
                })?;
                Ok(read_lines_csv(BufReader::new(file))?)
            }
            None => Ok(Vec::new()),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurfaceEntry {
    pub ply: String,
    pub vtk: String,
    pub torus_ply: Option<String>,
    pub rows: usize,
    pub closed: bool,
    pub area: f64,
    /// Mean distance of the first row from its centroid.
    pub first_radius: f64,
    /// `(plane, line)` members when built from a chain of planes.
    pub chain: Option<Vec<(usize, usize)>>,
    pub chain_end: Option<ChainEnd>,
    pub edges: EdgeReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurfacesReport {
    pub kind: LineKind,
    /// `chain` (matched across planes) or `sweep` (one plane, advected).
    pub mode: String,
    pub surfaces: Vec<SurfaceEntry>,
}

fn first_row_radius(s: &BarrierSurface) -> f64 {
    let row = s.curve(0);
    let c: Vec3 = row.iter().sum::<Vec3>() / row.len() as f64;
    row.iter().map(|p| (p - c).norm()).sum::<f64>() / row.len() as f64
}

fn center_curve(cfg: &RunConfig, field: &VelocityField) -> Option<CenterCurve> {
    let t = cfg.surfaces.torus.as_ref()?;
    let period = field.period.map(|p| p[2]);
    match CenterCurve::from_advection(
        field,
        &Vec3::from(t.center),
        cfg.t0,
        std::f64::consts::TAU,
        t.max_time,
        &cfg.grid.integrator,
        period,
    ) {
        Ok(c) => Some(c),
        Err(e) => {
            log::warn!("no toroidal embedding: {e}");
            None
        }
    }
}

/// Assemble barrier surfaces from the extracted lines. Several planes are
/// chained plane by plane; a single plane is swept by advection.
pub fn cmd_surfaces(cfg: &RunConfig, kind: Kind) -> Result<Outcome, CliError> {
    let mut field: Option<VelocityField> = None;
    let mut partial = false;
    for line_kind in kind.line_kinds() {
        let ldir = lines_dir(cfg, kind, line_kind);
        let manifest = read_lines_manifest(cfg, kind, line_kind)?;
        partial |= manifest.planes.iter().any(|p| p.file.is_none());
        let planes = load_plane_lines(&ldir, &manifest)?;
        let want_closed = line_kind.is_shear();
        let m = cfg.surfaces.m;
        type Source = Option<(Vec<(usize, usize)>, ChainEnd)>;
        let mut built: Vec<(BarrierSurface, Source)> = Vec::new();
        let mode = if planes.len() == 1 {
            let f = match &field {
                Some(f) => f,
                None => field.insert(cfg.build_field()?),
            };
            let t1 = manifest.t0 + cfg.surfaces.sweep_time;
            for l in planes[0].iter().filter(|l| l.closed == want_closed) {
                match sweep_surface(
                    f,
                    l,
                    manifest.t0,
                    t1,
                    m,
                    cfg.surfaces.sweep_rows,
                    &cfg.grid.integrator,
                ) {
                    Ok(s) => built.push((s, None)),
                    Err(e) => {
                        log::warn!("sweep of a {} line failed: {e}", line_kind.label());
                        partial = true;
                    }
                }
            }
            "sweep"
        } else {
            let chains = if want_closed {
                match_closed_curves(&planes, &cfg.matching)
            } else {
                match_open_curves(&planes, &cfg.matching)
            };
            for c in chains.iter().filter(|c| c.len() >= cfg.surfaces.min_chain) {
                match build_surface(&c.lines(&planes), m, manifest.t0, manifest.t) {
                    Ok(s) => built.push((s, Some((c.members.clone(), c.end)))),
                    Err(e) => {
                        log::warn!("chain surface failed: {e}");
                        partial = true;
                    }
                }
            }
            "chain"
        };
        if want_closed {
            // Nesting order: innermost first.
            built.sort_by(|a, b| first_row_radius(&a.0).total_cmp(&first_row_radius(&b.0)));
        }
        let center = if want_closed && cfg.surfaces.torus.is_some() && !built.is_empty() {
            let f = match &field {
                Some(f) => f,
                None => field.insert(cfg.build_field()?),
            };
            center_curve(cfg, f)
        } else {
            None
        };
        let sdir = stage_dir(cfg, kind)
            .join("surfaces")
            .join(kind_dir(line_kind));
        std::fs::create_dir_all(&sdir)?;
        let mut entries = Vec::new();
        for (i, (s, chain)) in built.iter().enumerate() {
            let ply = format!("surface_{i:03}.ply");
            let vtk = format!("surface_{i:03}.vtk");
            write_ply(s, BufWriter::new(File::create(sdir.join(&ply))?))?;
            write_vtk(s, BufWriter::new(File::create(sdir.join(&vtk))?))?;
            let mut torus_ply = None;
            if let (Some(c), Some(t)) = (&center, &cfg.surfaces.torus) {
                match torus_embed(s, c, t.r1, t.r2) {
                    Ok(e) => {
                        let name = format!("surface_{i:03}_torus.ply");
                        write_ply(&e, BufWriter::new(File::create(sdir.join(&name))?))?;
                        torus_ply = Some(name);
                    }
                    Err(e) => log::warn!("surface {i}: {e}"),
                }
            }
            entries.push(SurfaceEntry {
                ply,
                vtk,
                torus_ply,
                rows: s.rows(),
                closed: s.closed,
                area: mesh_area(s),
                first_radius: first_row_radius(s),
                chain: chain.as_ref().map(|c| c.0.clone()),
                chain_end: chain.as_ref().map(|c| c.1),
                edges: s.mesh.edge_report(),
            });
        }
        if entries.is_empty() {
            log::warn!("no {} surfaces could be assembled", line_kind.label());
        }
        println!(
            "surfaces: {} {} surfaces ({mode}) in {}",
            entries.len(),
            line_kind.label(),
            sdir.display()
        );
        let report = SurfacesReport {
            kind: line_kind,
            mode: mode.into(),
            surfaces: entries,
        };
        write_json(&sdir.join(SURFACES_REPORT), &report)?;
    }
    Ok(Outcome::partial_if(partial))
}

/// Generate the Duffing forcing over `forcing.t_span` and write it as CSV.
pub fn cmd_forcing_gen(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let signal = cfg.generate_forcing()?;
    std::fs::create_dir_all(&cfg.output)?;
    let path = cfg.output.join("forcing.csv");
    signal.write_csv(BufWriter::new(File::create(&path)?))?;
    println!(
        "forcing-gen: {} samples written to {}",
        signal.len(),
        path.display()
    );
    Ok(Outcome::Success)
}
