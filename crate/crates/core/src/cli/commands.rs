use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;

use super::io::{
    encode_field, grid_descriptor, read_field, FileRecord, RunManifest, MANIFEST_NAME,
    SCENARIO_NAME,
};
use super::scenario::{Prepared, Scenario};
use crate::error::{Error, Result};
use crate::fields::{MultiTimeField, MultiTimeGrid, SpatialLayout};
use crate::geometry::{ScaleFactorModel, SpacetimeKind, SpatialPoint};
use crate::solver::{
    contraction_bound, picard_solve_with, residual_with, unreduce_conformal, Operator,
    SolutionReport, ABOVE_BOUND,
};

/// Relative tolerance of time values that may be snapped onto [0, T].
const SNAP_TOLERANCE: f64 = 1e-9;

/// Outcome of a completed run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub out_dir: PathBuf,
}

fn solve(prepared: &Prepared, scenario: &Scenario) -> Result<(Operator, SolutionReport)> {
    let op = Operator::build(&prepared.model, prepared.grid.clone())?;
    let mut report = picard_solve_with(
        &op,
        &prepared.chi_free,
        scenario.solver.tol,
        scenario.solver.max_iter,
    )?;
    if prepared.model.spacetime == SpacetimeKind::ClosedFlrw3 {
        let bound = contraction_bound(&prepared.model)?;
        report.lambda_bound = Some(bound);
        if prepared.model.lambda.norm() >= bound {
            report.warnings.push(ABOVE_BOUND.to_string());
        }
    }
    Ok((op, report))
}

/// Solves the scenario and writes χ, χ_free, the residual history, requested
/// slices and the manifest into `out_dir`. Nothing is written unless the
/// scenario is valid and the iteration stayed finite.
pub fn run(scenario_path: &Path, out_dir: &Path) -> Result<RunOutcome> {
    let start = Instant::now();
    let scenario = Scenario::load(scenario_path)?;
    let prepared = scenario.prepare()?;
    let (op, report) = solve(&prepared, &scenario)?;
    let residual = residual_with(&op, &report.chi, &prepared.chi_free)?;

    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    files.push((SCENARIO_NAME.into(), scenario.canonical_text().into_bytes()));
    for (stem, field) in [("chi", &report.chi), ("chi_free", &prepared.chi_free)] {
        let (hdr, bin) = encode_field(stem, field);
        files.push((format!("{stem}.hdr"), hdr.into_bytes()));
        files.push((format!("{stem}.bin"), bin));
    }
    let history: String =
        report
            .residual_history
            .iter()
            .enumerate()
            .fold(String::new(), |mut s, (i, r)| {
                let _ = writeln!(s, "{}\t{:.17e}", i + 1, r);
                s
            });
    files.push(("residuals.txt".into(), history.into_bytes()));
    for (n, &[e1, e2]) in scenario.outputs.time_slices.iter().enumerate() {
        let text = slice_text(&prepared, &report.chi, &Fixed::Times(e1, e2))?;
        files.push((format!("slice_{n}.csv"), text.into_bytes()));
    }

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        scenario_sha256: scenario.checksum(),
        grid: grid_descriptor(&prepared.grid),
        iterations: report.iterations,
        converged: report.converged,
        residual,
        residual_history: report.residual_history.clone(),
        lambda_re: prepared.model.lambda.re,
        lambda_im: prepared.model.lambda.im,
        lambda_bound: report.lambda_bound,
        warnings: report.warnings.clone(),
        elapsed_seconds: start.elapsed().as_secs_f64(),
        files: files.iter().map(|(n, b)| FileRecord::of(n, b)).collect(),
    };
    fs::create_dir_all(out_dir)?;
    for (name, bytes) in &files {
        fs::write(out_dir.join(name), bytes)?;
    }
    fs::write(out_dir.join(MANIFEST_NAME), manifest.to_text())?;
    Ok(RunOutcome {
        manifest,
        out_dir: out_dir.to_path_buf(),
    })
}

/// Accepts either a manifest file or the run directory holding one.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_NAME)
    } else {
        path.to_path_buf()
    }
}

struct Loaded {
    manifest: RunManifest,
    dir: PathBuf,
    prepared: Prepared,
    chi: MultiTimeField,
}

fn load_run(path: &Path) -> Result<Loaded> {
    let mpath = manifest_path(path);
    let manifest = RunManifest::load(&mpath)?;
    let dir = mpath.parent().map(Path::to_path_buf).unwrap_or_default();
    for rec in &manifest.files {
        rec.check(&dir)?;
    }
    let scenario = Scenario::load(&dir.join(SCENARIO_NAME))?;
    if scenario.checksum() != manifest.scenario_sha256 {
        return Err(Error::Verification {
            file: SCENARIO_NAME.into(),
            reason: "scenario checksum mismatch".into(),
        });
    }
    let prepared = scenario.prepare()?;
    if grid_descriptor(&prepared.grid) != manifest.grid {
        return Err(Error::Verification {
            file: MANIFEST_NAME.into(),
            reason: "grid descriptor mismatch".into(),
        });
    }
    let chi = read_field(&dir, "chi", prepared.grid.clone())?;
    Ok(Loaded {
        manifest,
        dir,
        prepared,
        chi,
    })
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub recorded: f64,
    pub recomputed: f64,
    pub files_checked: usize,
}

/// Checks every recorded file and recomputes the residual from the
/// persisted χ and χ_free.
pub fn verify(path: &Path) -> Result<VerifyReport> {
    let run = load_run(path)?;
    let free = read_field(&run.dir, "chi_free", run.prepared.grid.clone())?;
    if free.values() != run.prepared.chi_free.values() {
        return Err(Error::Verification {
            file: "chi_free.bin".into(),
            reason: "stored free field differs from the scenario's".into(),
        });
    }
    let op = Operator::build(&run.prepared.model, run.prepared.grid.clone())?;
    let recomputed = residual_with(&op, &run.chi, &free)?;
    let recorded = run.manifest.residual;
    if !((recomputed - recorded).abs() <= 1e-12) {
        return Err(Error::Verification {
            file: MANIFEST_NAME.into(),
            reason: format!("recorded residual {recorded:e}, recomputed {recomputed:e}"),
        });
    }
    Ok(VerifyReport {
        recorded,
        recomputed,
        files_checked: run.manifest.files.len(),
    })
}

/// What an exported slice holds fixed.
#[derive(Clone, Debug, PartialEq)]
pub enum Fixed {
    Times(f64, f64),
    Points(Vec<f64>, Vec<f64>),
}

fn node_coords(grid: &MultiTimeGrid, k: usize) -> Vec<f64> {
    match grid.space().layout() {
        SpatialLayout::Cartesian { dim, .. } => {
            grid.space().box_coords(k).expect("box layout")[..*dim].to_vec()
        }
        SpatialLayout::HyperbolicChart { .. } => {
            grid.space().box_coords(k).expect("box layout").to_vec()
        }
        SpatialLayout::Sphere => match grid.space().points()[k] {
            SpatialPoint::Sphere(q) => q.to_vec(),
            _ => unreachable!("sphere grids hold S³ points"),
        },
    }
}

fn snap_time(grid: &MultiTimeGrid, eta: f64, name: &str) -> Result<(usize, String)> {
    let t = grid.time().horizon();
    if !(eta >= -SNAP_TOLERANCE * t && eta <= t * (1.0 + SNAP_TOLERANCE)) {
        return Err(Error::domain(format!(
            "{name} = {eta} lies outside [0, {t}]"
        )));
    }
    let (i, dist) = grid.time().nearest(eta);
    let node = grid.time().nodes()[i];
    Ok((
        i,
        format!("# {name} requested {eta} snapped {node} distance {dist:.6e}\n"),
    ))
}

fn snap_point(grid: &MultiTimeGrid, x: &[f64], name: &str) -> Result<(usize, String)> {
    let ns = grid.space().len();
    let dim = node_coords(grid, 0).len();
    if x.len() != dim {
        return Err(Error::domain(format!(
            "{name} needs {dim} coordinates, got {}",
            x.len()
        )));
    }
    match grid.space().layout() {
        SpatialLayout::Sphere => {
            let n = x.iter().map(|c| c * c).sum::<f64>().sqrt();
            if (n - 1.0).abs() > 1e-6 {
                return Err(Error::domain(format!(
                    "{name} is not a unit vector in ℝ⁴ (norm {n})"
                )));
            }
        }
        _ => {
            let half = node_coords(grid, ns - 1)[0];
            let step = grid.space().step().unwrap_or(0.0);
            if x.iter().any(|c| c.abs() > half + 1e-9 * step.max(1.0)) {
                return Err(Error::domain(format!(
                    "{name} lies outside the box of half-width {half}"
                )));
            }
        }
    }
    let (k, d2) = (0..ns)
        .map(|k| {
            (
                k,
                node_coords(grid, k)
                    .iter()
                    .zip(x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>(),
            )
        })
        .fold((0, f64::INFINITY), |m, c| if c.1 < m.1 { c } else { m });
    Ok((
        k,
        format!(
            "# {name} requested {x:?} snapped {:?} distance {:.6e}\n",
            node_coords(grid, k),
            d2.sqrt()
        ),
    ))
}

fn psi_values(prepared: &Prepared, chi: &MultiTimeField) -> Result<Vec<Option<Complex64>>> {
    match &prepared.model.scale {
        Some(scale) => {
            Ok(unreduce_conformal(chi, prepared.model.spatial_dim())?.materialize(scale))
        }
        None => Ok(chi.values().iter().map(|v| Some(*v)).collect()),
    }
}

fn push_value(line: &mut String, v: Option<Complex64>) {
    match v {
        Some(v) => {
            let _ = write!(line, ",{:.17e},{:.17e},{:.17e}", v.re, v.im, v.norm());
        }
        None => line.push_str(",,,"),
    }
}

/// Delimited text of χ (and ψ where its weight is finite) on a slice.
pub fn slice_text(prepared: &Prepared, chi: &MultiTimeField, fixed: &Fixed) -> Result<String> {
    let grid: &Arc<MultiTimeGrid> = &prepared.grid;
    let psi = psi_values(prepared, chi)?;
    let mut out = String::new();
    let dim = node_coords(grid, 0).len();
    let cols = |p: &str| {
        (0..dim)
            .map(|a| format!("{p}_{a}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    let value_cols = "chi_re,chi_im,chi_abs,psi_re,psi_im,psi_abs";
    match fixed {
        Fixed::Times(e1, e2) => {
            let (i1, s1) = snap_time(grid, *e1, "eta1")?;
            let (i2, s2) = snap_time(grid, *e2, "eta2")?;
            out.push_str(&s1);
            out.push_str(&s2);
            let _ = writeln!(out, "{},{},{value_cols}", cols("x1"), cols("x2"));
            let ns = grid.space().len();
            for k1 in 0..ns {
                for k2 in 0..ns {
                    let idx = chi.index(i1, k1, i2, k2);
                    let mut line = node_coords(grid, k1)
                        .iter()
                        .chain(node_coords(grid, k2).iter())
                        .map(|c| format!("{c:.17e}"))
                        .collect::<Vec<_>>()
                        .join(",");
                    push_value(&mut line, Some(chi.values()[idx]));
                    push_value(&mut line, psi[idx]);
                    out.push_str(&line);
                    out.push('\n');
                }
            }
        }
        Fixed::Points(x1, x2) => {
            let (k1, s1) = snap_point(grid, x1, "x1")?;
            let (k2, s2) = snap_point(grid, x2, "x2")?;
            out.push_str(&s1);
            out.push_str(&s2);
            let _ = writeln!(out, "eta1,eta2,{value_cols}");
            let nodes = grid.time().nodes();
            for (i1, t1) in nodes.iter().enumerate() {
                for (i2, t2) in nodes.iter().enumerate() {
                    let idx = chi.index(i1, k1, i2, k2);
                    let mut line = format!("{t1:.17e},{t2:.17e}");
                    push_value(&mut line, Some(chi.values()[idx]));
                    push_value(&mut line, psi[idx]);
                    out.push_str(&line);
                    out.push('\n');
                }
            }
        }
    }
    Ok(out)
}

pub fn export_slice(manifest: &Path, fixed: &Fixed, out_path: &Path) -> Result<String> {
    let run = load_run(manifest)?;
    let text = slice_text(&run.prepared, &run.chi, fixed)?;
    fs::write(out_path, &text)?;
    Ok(text)
}

pub fn bound(scenario_path: &Path) -> Result<f64> {
    let scenario = Scenario::load(scenario_path)?;
    contraction_bound(&scenario.model()?)
}

/// One line of the built-in oracle suite.
#[derive(Clone, Debug)]
pub struct OracleLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Dense solves against Picard on tiny built-in grids, plus the S³ pair integral.
pub fn oracle_suite() -> Result<Vec<OracleLine>> {
    use crate::fields::{esu_mode_closed, product_free};
    use crate::kernels::{natural_kernel_1d, singular_kernel_closed};
    use crate::oracle::{dense_linear_solve, mc_identity_sin2};
    use crate::solver::{picard_solve, reduce_conformal, GreensSupport, ModelSpec};
    use std::f64::consts::PI;

    let mut lines = Vec::new();
    let mut compare = |name: &str, model: &ModelSpec, free: &MultiTimeField| -> Result<()> {
        let dense = dense_linear_solve(model, free)?;
        let rep = picard_solve(model, free, 1e-14, 400)?;
        let d = dense.sub(&rep.chi)?.bnorm();
        lines.push(OracleLine {
            name: name.into(),
            passed: d <= 1e-10,
            detail: format!("bnorm difference {d:.3e}"),
        });
        Ok(())
    };

    let g = Arc::new(MultiTimeGrid::flat(1, 1.0, 5, 0.0)?);
    let free = MultiTimeField::from_fn(g.clone(), |a, b| {
        Complex64::new(1.0 + 0.1 * a as f64, 0.05 * b as f64)
    })?;
    let model = ModelSpec {
        spacetime: SpacetimeKind::MinkowskiHalfSpace(1),
        scale: None,
        greens_support: GreensSupport::Retarded,
        kernel: natural_kernel_1d(),
        lambda: Complex64::new(1.0, 0.0),
        masses: (0.0, 0.0),
        horizon: 1.0,
    };
    compare("dense vs picard, minkowski d=1", &model, &free)?;

    let gs = Arc::new(MultiTimeGrid::sphere(2.0 * PI, 3, 8)?);
    let mut closed = ModelSpec {
        spacetime: SpacetimeKind::ClosedFlrw3,
        scale: Some(ScaleFactorModel::closed_dust()),
        greens_support: GreensSupport::Symmetric,
        kernel: singular_kernel_closed(|_, _| Complex64::new(1.0, 0.0), 1.0)?,
        lambda: Complex64::new(0.0, 0.0),
        masses: (0.0, 0.0),
        horizon: 2.0 * PI,
    };
    closed.lambda = Complex64::new(0.5 * contraction_bound(&closed)?, 0.0);
    let mode = esu_mode_closed(gs, 1, "zonal")?;
    let free = reduce_conformal(
        &product_free(&mode, &mode)?,
        &ScaleFactorModel::closed_dust(),
        3,
    )?;
    compare("dense vs picard, closed dust at half bound", &closed, &free)?;

    let (est, se) = mc_identity_sin2(200_000, 7)?;
    let target = 8.0 * PI.powi(4);
    lines.push(OracleLine {
        name: "S3 x S3 integral of 1/sin^2 s".into(),
        passed: (est - target).abs() <= 3.0 * se,
        detail: format!("estimate {est:.3} +- {se:.3}, exact {target:.3}"),
    });
    Ok(lines)
}
