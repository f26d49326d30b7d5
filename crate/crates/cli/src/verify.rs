//! The `verify` subcommand: pass/fail reports for the oracle suite, the
//! area test, tracer confinement and the perturbed-strainline experiment.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::BufWriter;

use clap::ValueEnum;
use lcs3d::barriers::{
    advect_surface, attach_flow_strain, mesh_area, perturbed_strainline_experiment, plane_patch,
    predicted_area, surface_from_curves, tracer_experiment, write_ply, write_trajectories_csv,
    AreaModel, SeedClass,
};
use lcs3d::flow::{ShearProfiles, TrigShearParams, VelocityField};
use lcs3d::integrator::flow_map_sample;
use lcs3d::lines::{LineKind, ReducedLine};
use lcs3d::oracle::{brute_max_repulsion, brute_max_shear, parallel_shear_cg};
use lcs3d::strain::{
    eigen_frame, normal_repulsion, shear_normals, symmetric_eigen, tangential_shear,
};
use lcs3d::{Mat3, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::commands::{lines_dir, load_plane_lines, read_lines_manifest};
use crate::config::RunConfig;
use crate::{write_json, CliError, Kind, Outcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Tracers,
    PerturbedStrainline,
    Area,
    Oracles,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Tracers => "tracers",
            Experiment::PerturbedStrainline => "perturbed-strainline",
            Experiment::Area => "area",
            Experiment::Oracles => "oracles",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub relation: &'static str,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn le(name: &str, measured: f64, threshold: f64) -> Self {
        Check::new(name, measured, "<=", threshold, measured <= threshold)
    }

    fn lt(name: &str, measured: f64, threshold: f64) -> Self {
        Check::new(name, measured, "<", threshold, measured < threshold)
    }

    fn gt(name: &str, measured: f64, threshold: f64) -> Self {
        Check::new(name, measured, ">", threshold, measured > threshold)
    }

    fn new(name: &str, measured: f64, relation: &'static str, threshold: f64, pass: bool) -> Self {
        Check {
            name: name.into(),
            measured,
            relation,
            threshold,
            pass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub experiment: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub details: Value,
}

/// Run one experiment and write `verify/<name>.json`. Failed checks give
/// a partial outcome.
pub fn cmd_verify(cfg: &RunConfig, experiment: Experiment) -> Result<Outcome, CliError> {
    let (checks, details) = match experiment {
        Experiment::Oracles => oracles(cfg)?,
        Experiment::Area => area(cfg)?,
        Experiment::Tracers => tracers(cfg)?,
        Experiment::PerturbedStrainline => perturbed(cfg)?,
    };
    let pass = checks.iter().all(|c| c.pass);
    let report = Report {
        experiment: experiment.name().into(),
        pass,
        checks,
        details,
    };
    let path = cfg
        .output
        .join("verify")
        .join(format!("{}.json", experiment.name()));
    write_json(&path, &report)?;
    for c in &report.checks {
        println!(
            "{} {}: {:.6e} {} {:.6e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.relation,
            c.threshold
        );
    }
    println!("verify {}: report in {}", experiment.name(), path.display());
    Ok(Outcome::partial_if(!pass))
}

fn random_trig(rng: &mut ChaCha8Rng) -> TrigShearParams {
    let mut mode = || {
        [
            rng.random_range(-1.0..1.0),
            rng.random_range(0.5..2.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(0.5..2.0),
            rng.random_range(-1.0..1.0),
        ]
    };
    let (u, v) = (mode(), mode());
    TrigShearParams {
        u,
        v,
        w0: rng.random_range(-0.5..0.5),
        w1: rng.random_range(-0.5..0.5),
        w_freq: rng.random_range(0.5..2.0),
    }
}

/// Orthogonal matrix from the QR factorization of a random matrix.
fn random_rotation(rng: &mut ChaCha8Rng) -> Mat3 {
    Mat3::from_fn(|_, _| rng.random_range(-1.0..1.0)).qr().q()
}

/// SPD tensor with eigenvalues spread over two decades and pairwise
/// separated by at least 10%.
fn random_spd(rng: &mut ChaCha8Rng) -> Mat3 {
    let lambda = loop {
        let mut l: Vec<f64> = (0..3)
            .map(|_| rng.random_range(-2.3f64..2.3).exp())
            .collect();
        l.sort_by(f64::total_cmp);
        if l[1] > 1.1 * l[0] && l[2] > 1.1 * l[1] {
            break l;
        }
    };
    let q = random_rotation(rng);
    q * Mat3::from_diagonal(&Vec3::new(lambda[0], lambda[1], lambda[2])) * q.transpose()
}

fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    a.normalize()
        .dot(&b.normalize())
        .abs()
        .min(1.0)
        .acos()
        .to_degrees()
}

fn oracles(cfg: &RunConfig) -> Result<(Vec<Check>, Value), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.verify.seed);
    let icfg = &cfg.grid.integrator;
    let (mut cg_err, mut l2_err) = (0.0f64, 0.0f64);
    for _ in 0..cfg.verify.oracle_cases {
        let profiles = ShearProfiles::trigonometric(random_trig(&mut rng));
        let z0 = rng.random_range(0.0..TAU);
        let t = 2.0;
        let analytic = parallel_shear_cg(&profiles, z0, 0.0, t, icfg.dt)?;
        let field = VelocityField::parallel_shear(profiles);
        let s = flow_map_sample(&field, &Vec3::new(0.3, 0.7, z0), 0.0, t, icfg)?;
        for (n, a) in s.c.iter().zip(analytic.c.iter()) {
            cg_err = cg_err.max((n - a).abs() / a.abs().max(1.0));
        }
        let (lambda, _) = symmetric_eigen(&s.c);
        l2_err = l2_err.max((lambda[1] - 1.0).abs());
    }
    let (mut rho_err, mut rho_angle, mut sigma_err, mut sigma_angle) =
        (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let c = random_spd(&mut rng);
        let frame = eigen_frame(&c, 1e-6)?;
        let (d, rho) = brute_max_repulsion(&c, 10_000)?;
        rho_err = rho_err.max((rho - frame.lambda3().sqrt()).abs());
        rho_angle = rho_angle.max(angle_deg(&d, &frame.xi3()));
        let (d, sigma) = brute_max_shear(&c, 10_000)?;
        sigma_err =
            sigma_err.max((sigma - (frame.lambda3().sqrt() - frame.lambda1().sqrt())).abs());
        let n = shear_normals(&frame)?;
        sigma_angle = sigma_angle.max(angle_deg(&d, &n.n_plus).min(angle_deg(&d, &n.n_minus)));
    }
    let mut identity_err = 0.0f64;
    for _ in 0..10_000 {
        let sv = Vec3::from_fn(|_, _| rng.random_range(-2.0f64..2.0).exp());
        let g = random_rotation(&mut rng) * Mat3::from_diagonal(&sv) * random_rotation(&mut rng);
        let c = g.transpose() * g;
        let n0 = random_rotation(&mut rng) * Vec3::z();
        let rho = normal_repulsion(&c, &n0)?;
        let sigma = tangential_shear(&c, &n0)?;
        identity_err = identity_err.max((sigma * sigma + rho * rho - n0.dot(&(c * n0))).abs());
    }
    let checks = vec![
        Check::le("parallel-shear Cauchy-Green relative error", cg_err, 1e-5),
        Check::le("parallel-shear |lambda2 - 1|", l2_err, 1e-6),
        Check::le("max repulsion error", rho_err, 1e-3),
        Check::le("max repulsion direction error (deg)", rho_angle, 1.0),
        Check::le("max shear error", sigma_err, 1e-3),
        Check::le("max shear direction error (deg)", sigma_angle, 1.0),
        Check::le("sigma^2 + rho^2 identity error", identity_err, 1e-10),
    ];
    Ok((
        checks,
        json!({ "parallel_shear_cases": cfg.verify.oracle_cases, "spd_cases": 100, "identity_cases": 10_000 }),
    ))
}

fn area(cfg: &RunConfig) -> Result<(Vec<Check>, Value), CliError> {
    let params = TrigShearParams {
        u: [0.8, 1.0, 0.5, 0.3, 2.0, -0.4],
        v: [0.5, 1.5, -0.3, 0.6, 0.7, 0.2],
        w0: 0.1,
        w1: 0.2,
        w_freq: 1.0,
    };
    let field = VelocityField::parallel_shear(ShearProfiles::trigonometric(params));
    let rows: Vec<Vec<Vec3>> = (0..11)
        .map(|r| {
            (0..11)
                .map(|c| Vec3::new(1.0 + 0.1 * c as f64, 1.0 + 0.1 * r as f64, 1.0))
                .collect()
        })
        .collect();
    let s1: Vec<f64> = (0..11).map(|r| r as f64).collect();
    let t = 3.0;
    let mut patch =
        surface_from_curves(LineKind::ShearPlus, &s1, &rows, &[], false, 11, cfg.t0, t)?;
    let a0 = mesh_area(&patch);
    let moved = advect_surface(&field, &patch, cfg.t0 + t, &cfg.grid.integrator)?;
    let a1 = mesh_area(&moved);
    attach_flow_strain(&mut patch, &field, &cfg.grid.integrator)?;
    let predicted = predicted_area(&patch, AreaModel::Shear)?;
    // The horizontal patch above is normal to one shear normal; a small flat
    // patch normal to the other, tilted one is not invariant under the flow
    // and keeps its area only to first order in its size.
    let center = Vec3::new(1.5, 1.5, 1.0);
    let sample = flow_map_sample(&field, &center, cfg.t0, cfg.t0 + t, &cfg.grid.integrator)?;
    let frame = eigen_frame(&sample.c, cfg.grid.gap_tol)?;
    let normals = shear_normals(&frame)?;
    let tilted = [normals.n_plus, normals.n_minus]
        .into_iter()
        .min_by(|a, b| a.z.abs().total_cmp(&b.z.abs()))
        .expect("two normals");
    let rows = plane_patch(&center, &tilted, 0.01, 11)?;
    let tilted_patch =
        surface_from_curves(LineKind::ShearPlus, &s1, &rows, &[], false, 11, cfg.t0, t)?;
    let b0 = mesh_area(&tilted_patch);
    let b1 = mesh_area(&advect_surface(
        &field,
        &tilted_patch,
        cfg.t0 + t,
        &cfg.grid.integrator,
    )?);
    let checks = vec![
        Check::le(
            "advected patch area relative change",
            ((a1 - a0) / a0).abs(),
            1e-2,
        ),
        Check::le(
            "predicted shear area relative error",
            ((predicted - a1) / a1).abs(),
            1e-2,
        ),
        Check::le(
            "tilted shear patch area relative change",
            ((b1 - b0) / b0).abs(),
            1e-2,
        ),
    ];
    Ok((
        checks,
        json!({
            "initial_area": a0,
            "advected_area": a1,
            "predicted_area": predicted,
            "tilted_normal": [tilted.x, tilted.y, tilted.z],
            "tilted_initial_area": b0,
            "tilted_advected_area": b1,
            "t": t
        }),
    ))
}

fn plane_zero_lines(
    cfg: &RunConfig,
    kind: Kind,
    line: LineKind,
) -> Result<Vec<ReducedLine>, CliError> {
    let manifest = read_lines_manifest(cfg, kind, line)?;
    let mut planes = load_plane_lines(&lines_dir(cfg, kind, line), &manifest)?;
    Ok(if planes.is_empty() {
        Vec::new()
    } else {
        planes.swap_remove(0)
    })
}

fn tracers(cfg: &RunConfig) -> Result<(Vec<Check>, Value), CliError> {
    let mut closed: Vec<ReducedLine> = Vec::new();
    for line in Kind::Shear.line_kinds() {
        closed.extend(
            plane_zero_lines(cfg, Kind::Shear, line)?
                .into_iter()
                .filter(|l| l.closed),
        );
    }
    let barrier = closed
        .into_iter()
        .max_by(|a, b| a.mean_radius().total_cmp(&b.mean_radius()))
        .ok_or_else(|| CliError::Compute("no closed shearline on the first plane".into()))?;
    let field = cfg.build_field()?;
    let t1 = cfg.t0 + cfg.verify.tracer_time;
    let exp = tracer_experiment(
        &field,
        &barrier,
        cfg.t0,
        t1,
        &cfg.verify.tracer,
        &cfg.grid.integrator,
    )?;
    let path = cfg.output.join("verify").join("tracers.csv");
    std::fs::create_dir_all(path.parent().expect("has parent"))?;
    write_trajectories_csv(&exp, BufWriter::new(File::create(&path)?))?;
    let summary = exp.summary();
    let mut checks = Vec::new();
    for s in &summary {
        checks.push(match s.class {
            SeedClass::Inside | SeedClass::OnBarrier => Check::le(
                &format!("{} seeds max deviation / tube", s.class.label()),
                s.max_ratio,
                1.0,
            ),
            SeedClass::Outside => Check::gt("outside seeds min excursion / tube", s.min_ratio, 1.0),
        });
    }
    let c = barrier.centroid();
    Ok((
        checks,
        json!({
            "barrier_centroid": [c[0], c[1], c[2]],
            "barrier_mean_radius": barrier.mean_radius(),
            "tube_bound": exp.tube_bound,
            "t0": cfg.t0,
            "t1": t1,
            "summary": summary,
            "trajectories": "tracers.csv",
        }),
    ))
}

fn perturbed(cfg: &RunConfig) -> Result<(Vec<Check>, Value), CliError> {
    let line = plane_zero_lines(cfg, Kind::Strain, LineKind::Strain)?
        .into_iter()
        .filter(|l| !l.closed)
        .max_by(|a, b| a.length().total_cmp(&b.length()))
        .ok_or_else(|| CliError::Compute("no open strainline on the first plane".into()))?;
    let field = cfg.build_field()?;
    let v = &cfg.verify;
    let t1 = cfg.t0 + cfg.hyperbolic.t;
    let exp = perturbed_strainline_experiment(
        &field,
        &line,
        v.perturb_delta,
        Vec3::from(v.perturb_offset),
        cfg.t0,
        t1,
        cfg.surfaces.m,
        v.perturb_rows,
        &cfg.grid.integrator,
    )?;
    let dir = cfg.output.join("verify");
    std::fs::create_dir_all(&dir)?;
    for (s, name) in exp.surfaces.iter().zip(["center", "plus", "minus"]) {
        write_ply(
            s,
            BufWriter::new(File::create(dir.join(format!("perturbed_{name}.ply")))?),
        )?;
    }
    let [center, plus, minus] = exp.drift;
    let checks = vec![
        Check::lt(
            "|mean z-drift| of the strainline vs +offset",
            center.mean.abs(),
            plus.mean.abs(),
        ),
        Check::lt(
            "|mean z-drift| of the strainline vs -offset",
            center.mean.abs(),
            minus.mean.abs(),
        ),
    ];
    Ok((
        checks,
        json!({ "line_length": line.length(), "t1": t1, "drift": { "center": center, "plus": plus, "minus": minus } }),
    ))
}
