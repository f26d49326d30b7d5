//! Run configuration: shipped presets, JSON overlays and validation.

use std::f64::consts::{PI, TAU};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use lcs3d::barriers::{MatchConfig, PlaneFamily, TracerConfig};
use lcs3d::flow::{
    generate_duffing_forcing, AbcForcing, AbcParams, DuffingParams, ForcingSignal, VelocityField,
};
use lcs3d::lines::LineConfig;
use lcs3d::strain::{GridConfig, PlaneSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const PRESETS: [&str; 3] = ["steady-abc", "periodic-abc", "chaotic-abc"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldModelSpec {
    SteadyAbc,
    PeriodicAbc,
    ChaoticAbc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSpec {
    pub model: FieldModelSpec,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Amplitude of the `sin t` term of the periodic model.
    pub amplitude: f64,
    /// Tabulated forcing for the chaotic model. Without it the Duffing
    /// signal described by `forcing` is generated in memory.
    pub forcing_file: Option<PathBuf>,
    /// Use the `A (A + F) cos z` form of the chaotic y-equation.
    pub printed_variant: bool,
}

impl Default for FieldSpec {
    fn default() -> Self {
        let p = AbcParams::default();
        FieldSpec {
            model: FieldModelSpec::SteadyAbc,
            a: p.a,
            b: p.b,
            c: p.c,
            amplitude: 0.1,
            forcing_file: None,
            printed_variant: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlaneSet {
    List(Vec<f64>),
    Uniform {
        start: f64,
        step: f64,
        count: usize,
    },
    /// `count` planes `2πk/count`.
    Periodic {
        count: usize,
    },
}

impl PlaneSet {
    pub fn family(&self) -> lcs3d::Result<PlaneFamily> {
        match self {
            PlaneSet::List(v) => PlaneFamily::new(v.clone()),
            PlaneSet::Uniform { start, step, count } => PlaneFamily::uniform(*start, *step, *count),
            PlaneSet::Periodic { count } => PlaneFamily::periodic(*count),
        }
    }
}

/// Time window, lattices and helicity threshold of one extraction stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageConfig {
    pub t: f64,
    pub eps0: f64,
    pub nx: usize,
    pub ny: usize,
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub seed_nx: usize,
    pub seed_ny: usize,
    pub planes: PlaneSet,
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig {
            t: 1.0,
            eps0: 1e-2,
            nx: 100,
            ny: 100,
            x_range: [0.0, TAU],
            y_range: [0.0, TAU],
            seed_nx: 100,
            seed_ny: 100,
            planes: PlaneSet::List(vec![0.0]),
        }
    }
}

impl StageConfig {
    pub fn plane(&self, s1: f64) -> PlaneSpec {
        PlaneSpec::new(s1, self.nx, self.ny, self.x_range, self.y_range)
    }

    /// The shared line settings with this stage's threshold and seeds.
    pub fn line_config(&self, base: &LineConfig) -> LineConfig {
        LineConfig {
            eps0: self.eps0,
            seed_nx: self.seed_nx,
            seed_ny: self.seed_ny,
            ..*base
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TorusConfig {
    pub r1: f64,
    pub r2: f64,
    /// Vortex center point on the first plane; its trajectory is the core.
    pub center: [f64; 3],
    /// Longest advection used to trace the core over one `z` period.
    pub max_time: f64,
}

impl Default for TorusConfig {
    fn default() -> Self {
        TorusConfig {
            r1: 3.0,
            r2: 1.0,
            center: [3.7167, 4.7124, 0.0],
            max_time: 50.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    /// Vertices per resampled curve.
    pub m: usize,
    /// Shortest chain of planes turned into a surface.
    pub min_chain: usize,
    /// With a single plane, lines are swept into surfaces by advecting them
    /// over this time.
    pub sweep_time: f64,
    pub sweep_rows: usize,
    pub torus: Option<TorusConfig>,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig {
            m: 128,
            min_chain: 2,
            sweep_time: 7.0,
            sweep_rows: 71,
            torus: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForcingConfig {
    pub duffing: DuffingParams,
    pub dt: f64,
    pub t_span: [f64; 2],
}

impl Default for ForcingConfig {
    fn default() -> Self {
        ForcingConfig {
            duffing: DuffingParams::default(),
            dt: 0.01,
            t_span: [0.0, 200.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub tracer: TracerConfig,
    pub tracer_time: f64,
    /// Offset of the perturbed copies and its direction.
    pub perturb_delta: f64,
    pub perturb_offset: [f64; 3],
    pub perturb_rows: usize,
    /// Random cases of the oracle suite.
    pub oracle_cases: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            tracer: TracerConfig::default(),
            tracer_time: 10.0 * PI,
            perturb_delta: 0.01,
            perturb_offset: [1.0, 0.0, 0.0],
            perturb_rows: 16,
            oracle_cases: 10,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Name of the preset the file was layered on, if any.
    pub preset: Option<String>,
    pub field: FieldSpec,
    pub t0: f64,
    /// Shear (elliptic) extraction.
    pub elliptic: StageConfig,
    /// Strain and stretch (hyperbolic) extraction.
    pub hyperbolic: StageConfig,
    pub grid: GridConfig,
    pub lines: LineConfig,
    pub matching: MatchConfig,
    pub surfaces: SurfaceConfig,
    pub forcing: ForcingConfig,
    pub verify: VerifyConfig,
    /// Worker threads; all cores when unset.
    pub workers: Option<usize>,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        preset("steady-abc").expect("built-in preset")
    }
}

fn full_stage(t: f64, eps0: f64, n: usize, seeds: [usize; 2], planes: PlaneSet) -> StageConfig {
    StageConfig {
        t,
        eps0,
        nx: n,
        ny: n,
        seed_nx: seeds[0],
        seed_ny: seeds[1],
        planes,
        ..StageConfig::default()
    }
}

/// The shipped parameter sets of the three ABC experiments.
pub fn preset(name: &str) -> Option<RunConfig> {
    let base = |model, elliptic, hyperbolic, surfaces| RunConfig {
        preset: Some(name.to_string()),
        field: FieldSpec {
            model,
            ..FieldSpec::default()
        },
        t0: 0.0,
        elliptic,
        hyperbolic,
        grid: GridConfig::default(),
        lines: LineConfig::default(),
        matching: MatchConfig::default(),
        surfaces,
        forcing: ForcingConfig::default(),
        verify: VerifyConfig::default(),
        workers: None,
        output: PathBuf::from("out"),
    };
    let z0 = || PlaneSet::List(vec![0.0]);
    let thin = || PlaneSet::Uniform {
        start: 0.0,
        step: 0.005,
        count: 21,
    };
    let torus = Some(TorusConfig::default());
    match name {
        "steady-abc" => Some(base(
            FieldModelSpec::SteadyAbc,
            full_stage(40.0, 1e-2, 1000, [100, 100], z0()),
            full_stage(3.0, 1e-4, 500, [100, 100], z0()),
            SurfaceConfig {
                torus,
                ..SurfaceConfig::default()
            },
        )),
        "periodic-abc" => Some(base(
            FieldModelSpec::PeriodicAbc,
            full_stage(30.0 * PI, 1e-2, 500, [100, 100], z0()),
            full_stage(4.0, 1e-4, 500, [600, 10], thin()),
            SurfaceConfig {
                sweep_time: TAU,
                sweep_rows: 64,
                torus,
                ..SurfaceConfig::default()
            },
        )),
        "chaotic-abc" => Some(base(
            FieldModelSpec::ChaoticAbc,
            full_stage(
                100.0,
                1e-2,
                500,
                [100, 100],
                PlaneSet::Periodic { count: 150 },
            ),
            full_stage(5.0, 1e-4, 500, [600, 10], thin()),
            SurfaceConfig::default(),
        )),
        _ => None,
    }
}

/// Recursively overlay `patch` onto `base`; objects merge key by key,
/// everything else is replaced.
/// Keys holding a tagged enum; merging two variants would produce a map
/// with two tags, so the overlay replaces them whole.
const REPLACED_KEYS: &[&str] = &["planes"];

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot)
                        if slot.is_object()
                            && v.is_object()
                            && !REPLACED_KEYS.contains(&k.as_str()) =>
                    {
                        merge(slot, v)
                    }
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

/// Resolve the configuration: start from `preset_name` (or the file's
/// `preset` key, or `steady-abc`) and overlay the file. A run manifest is
/// accepted too; its embedded `config` is used.
pub fn load(path: Option<&Path>, preset_name: Option<&str>) -> Result<RunConfig, CliError> {
    let file: Option<Value> = match path {
        Some(p) => {
            let f = File::open(p)
                .map_err(|e| CliError::Config(format!("cannot open {}: {e}", p.display())))?;
            let v: Value = serde_json::from_reader(BufReader::new(f))
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            Some(match v.get("config") {
                Some(inner) if inner.is_object() => inner.clone(),
                _ => v,
            })
        }
        None => None,
    };
    let name = preset_name
        .map(str::to_string)
        .or_else(|| {
            file.as_ref()
                .and_then(|v| v.get("preset"))
                .and_then(Value::as_str)
                .map(str::to_string)
        })
        .unwrap_or_else(|| "steady-abc".to_string());
    let base = preset(&name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown preset `{name}` (expected one of {})",
            PRESETS.join(", ")
        ))
    })?;
    let mut value = serde_json::to_value(&base).expect("config serializes");
    if let Some(f) = file {
        if !f.is_object() {
            return Err(CliError::Config("config must be a JSON object".into()));
        }
        merge(&mut value, f);
    }
    let mut cfg: RunConfig =
        serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
    if preset_name.is_some() {
        cfg.preset = Some(name);
    }
    Ok(cfg)
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(msg()))
    }
}

fn check_stage(name: &str, s: &StageConfig) -> Result<(), CliError> {
    check(s.t.is_finite() && s.t != 0.0, || {
        format!("{name}.t must be finite and nonzero")
    })?;
    check(s.eps0 > 0.0 && s.eps0.is_finite(), || {
        format!("{name}.eps0 must be positive")
    })?;
    check(s.nx >= 8 && s.ny >= 8, || {
        format!("{name} grid is {}x{}, need at least 8x8", s.nx, s.ny)
    })?;
    check(s.seed_nx >= 1 && s.seed_ny >= 1, || {
        format!("{name} seed lattice must be non-empty")
    })?;
    let family = s
        .planes
        .family()
        .map_err(|e| CliError::Config(format!("{name}.planes: {e}")))?;
    for &s1 in family.values() {
        s.plane(s1)
            .validate()
            .map_err(|e| CliError::Config(format!("{name}: {e}")))?;
    }
    Ok(())
}

impl RunConfig {
    /// Check everything that can be checked before computing.
    pub fn validate(&self) -> Result<(), CliError> {
        let f = &self.field;
        check(
            [f.a, f.b, f.c, f.amplitude, self.t0]
                .iter()
                .all(|v| v.is_finite()),
            || "field parameters and t0 must be finite".into(),
        )?;
        if let Some(p) = &f.forcing_file {
            check(p.is_file(), || {
                format!("forcing file {} does not exist", p.display())
            })?;
        }
        check_stage("elliptic", &self.elliptic)?;
        check_stage("hyperbolic", &self.hyperbolic)?;
        self.grid
            .integrator
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        check(self.grid.gap_tol >= 0.0, || {
            "grid.gap_tol must be >= 0".into()
        })?;
        self.lines
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        check(self.matching.jump_factor > 0.0, || {
            "matching.jump_factor must be positive".into()
        })?;
        let s = &self.surfaces;
        check(s.m >= 3 && s.min_chain >= 2 && s.sweep_rows >= 2, || {
            "surfaces need m >= 3, min_chain >= 2 and sweep_rows >= 2".into()
        })?;
        check(s.sweep_time > 0.0, || {
            "surfaces.sweep_time must be positive".into()
        })?;
        if let Some(t) = &s.torus {
            check(t.r1 > 0.0 && t.r2 > 0.0 && t.max_time > 0.0, || {
                "torus radii and max_time must be positive".into()
            })?;
        }
        let fc = &self.forcing;
        check(fc.dt > 0.0 && fc.t_span[1] > fc.t_span[0], || {
            "forcing needs dt > 0 and an increasing t_span".into()
        })?;
        let v = &self.verify;
        check(v.tracer_time > 0.0 && v.perturb_delta > 0.0, || {
            "verify times and offsets must be positive".into()
        })?;
        check(v.perturb_rows >= 2 && v.oracle_cases >= 1, || {
            "verify needs perturb_rows >= 2 and oracle_cases >= 1".into()
        })?;
        check(self.workers != Some(0), || {
            "workers must be at least 1".into()
        })?;
        Ok(())
    }

    /// Build the velocity field, reading or generating the forcing signal.
    pub fn build_field(&self) -> Result<VelocityField, CliError> {
        let f = &self.field;
        let forcing = match f.model {
            FieldModelSpec::SteadyAbc => AbcForcing::None,
            FieldModelSpec::PeriodicAbc => AbcForcing::Sinusoidal {
                amplitude: f.amplitude,
            },
            FieldModelSpec::ChaoticAbc => AbcForcing::Tabulated {
                signal: Arc::new(self.forcing_signal()?),
                printed_variant: f.printed_variant,
            },
        };
        Ok(VelocityField::abc(AbcParams {
            a: f.a,
            b: f.b,
            c: f.c,
            forcing,
        }))
    }

    pub fn forcing_signal(&self) -> Result<ForcingSignal, CliError> {
        match &self.field.forcing_file {
            Some(p) => {
                let file =
                    File::open(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                ForcingSignal::read_csv(BufReader::new(file))
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
            }
            None => self.generate_forcing(),
        }
    }

    pub fn generate_forcing(&self) -> Result<ForcingSignal, CliError> {
        let fc = &self.forcing;
        generate_duffing_forcing(&fc.duffing, (fc.t_span[0], fc.t_span[1]), fc.dt)
            .map_err(|e| CliError::Compute(e.to_string()))
    }
}
