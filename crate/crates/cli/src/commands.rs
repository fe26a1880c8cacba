//! The four subcommands.

use std::fs;
use std::path::Path;
use std::time::Instant;

use kinred::error_estimate;
use kinred::{AnsatzPoint, DistributionField, Error, ScenarioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::files::{
    config_hash, csv_table, Manifest, OutputDir, SnapshotBlock, AUDIT, DISTRIBUTION_MAGIC, ERROR_SUMMARY, ERROR_TABLE,
    PARAMETERS, PARAMETER_MAGIC, SNAPSHOTS, TIMINGS, TRAJECTORY,
};
use crate::CliError;

/// Reads, parses and validates a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let config: ScenarioConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    config.validate().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(config)
}

fn runtime(e: Error) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Serialize)]
struct Timings<'a> {
    command: &'a str,
    config_hash: String,
    solve_seconds: f64,
    write_seconds: f64,
}

fn moment_header(count: usize) -> Vec<String> {
    let mut h = vec!["time".to_string()];
    h.extend((0..count).map(|k| format!("c{k}")));
    h.push("entropy".into());
    h
}

fn trajectory_rows(times: &[f64], totals: &[Vec<f64>], entropy: &[f64]) -> Vec<Vec<f64>> {
    times
        .iter()
        .zip(totals)
        .zip(entropy)
        .map(|((t, c), h)| {
            let mut row = vec![*t];
            row.extend_from_slice(c);
            row.push(*h);
            row
        })
        .collect()
}

pub fn reduce(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let config = load_config(config_path)?;
    let hash = config_hash(&config);
    let clock = Instant::now();
    let traj = config.run_reduced().map_err(runtime)?;
    let solve_seconds = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let grid = config.grid().map_err(runtime)?;
    let mut f_data = Vec::new();
    let mut w_data = Vec::new();
    for points in &traj.fields {
        for p in points {
            f_data.extend(p.evaluate(&grid).map_err(runtime)?);
            w_data.extend_from_slice(p.omega());
        }
    }
    let block = |magic: &[u8; 8], width: usize, data: Vec<f64>| SnapshotBlock {
        magic: *magic,
        times: traj.times.len(),
        cells: config.mesh.cells,
        width,
        half_width: config.velocity.half_width,
        dx: config.mesh.length / config.mesh.cells as f64,
        config_hash: hash,
        data,
    };
    let mut dir = OutputDir::create(out)?;
    let width = traj.totals.first().map_or(0, Vec::len);
    dir.write(
        TRAJECTORY,
        &csv_table(
            &format!("config_hash={}", hex::encode(hash)),
            &moment_header(width),
            &trajectory_rows(&traj.times, &traj.totals, &traj.entropy),
        ),
    )?;
    dir.write(SNAPSHOTS, &block(DISTRIBUTION_MAGIC, grid.len(), f_data).to_bytes())?;
    dir.write(PARAMETERS, &block(PARAMETER_MAGIC, config.manifold.dim(), w_data).to_bytes())?;
    let write_seconds = clock.elapsed().as_secs_f64();
    dir.write_unlisted(
        TIMINGS,
        &Timings { command: "reduce", config_hash: hex::encode(hash), solve_seconds, write_seconds },
    )?;
    dir.finish("reduce", &config, &traj.times, traj.steps)
}

pub fn reference(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let config = load_config(config_path)?;
    let hash = config_hash(&config);
    let clock = Instant::now();
    let traj = config.run_reference().map_err(runtime)?;
    let solve_seconds = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let nodes = traj.snapshots[0].nodes();
    let data: Vec<f64> = traj.snapshots.iter().flat_map(|f| f.values().iter().copied()).collect();
    let block = SnapshotBlock {
        magic: *DISTRIBUTION_MAGIC,
        times: traj.times.len(),
        cells: config.mesh.cells,
        width: nodes,
        half_width: config.velocity.half_width,
        dx: config.mesh.length / config.mesh.cells as f64,
        config_hash: hash,
        data,
    };
    let totals: Vec<Vec<f64>> = traj.totals.iter().map(|c| c.to_vec()).collect();
    let mut dir = OutputDir::create(out)?;
    dir.write(
        TRAJECTORY,
        &csv_table(
            &format!("config_hash={}", hex::encode(hash)),
            &moment_header(3),
            &trajectory_rows(&traj.times, &totals, &traj.entropy),
        ),
    )?;
    dir.write(SNAPSHOTS, &block.to_bytes())?;
    let write_seconds = clock.elapsed().as_secs_f64();
    dir.write_unlisted(
        TIMINGS,
        &Timings { command: "reference", config_hash: hex::encode(hash), solve_seconds, write_seconds },
    )?;
    dir.finish("reference", &config, &traj.times, traj.steps)
}

pub fn audit(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let config = load_config(config_path)?;
    let hash = hex::encode(config_hash(&config));
    let report = config.audit().map_err(runtime)?;
    let mut yong = serde_json::to_value(&report.yong).expect("report serializes");
    yong["pass"] = json!(report.yong.pass());
    let doc = json!({
        "config_hash": hash,
        "hyperbolicity": report.hyperbolicity,
        "speed": report.speed,
        "gusc": report.gusc,
        "yong": yong,
    });
    let mut dir = OutputDir::create(out)?;
    dir.write_json(AUDIT, &doc)?;
    println!("hyperbolicity {}", verdict(report.hyperbolicity.pass));
    println!("speed {}", verdict(report.speed.pass));
    for g in &report.gusc {
        println!("gusc {:?} {}", g.model, verdict(g.report.pass));
    }
    println!("yong {}", verdict(report.yong.pass()));
    dir.finish("audit", &config, &[], 0)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

/// Every mismatch between the two runs that makes a comparison meaningless.
fn check_compatible(a: &ScenarioConfig, b: &ScenarioConfig, ta: &[f64], tb: &[f64]) -> Result<(), CliError> {
    let mismatch = |what: &str| Err(CliError::Input(format!("manifest mismatch: {what} differs between the runs")));
    if a.velocity != b.velocity {
        return mismatch("velocity");
    }
    if a.mesh != b.mesh {
        return mismatch("mesh");
    }
    if a.collision != b.collision {
        return mismatch("collision");
    }
    if ta != tb {
        return mismatch("output times");
    }
    Ok(())
}

fn check_block(block: &SnapshotBlock, manifest: &Manifest, width: usize, name: &str) -> Result<(), CliError> {
    let bad = |what: &str| Err(CliError::Input(format!("{name}: {what} does not match its manifest")));
    if hex::encode(block.config_hash) != manifest.config_hash {
        return bad("config hash");
    }
    if block.times != manifest.times.len() {
        return bad("number of outputs");
    }
    if block.cells != manifest.config.mesh.cells || block.width != width {
        return bad("shape");
    }
    Ok(())
}

pub fn estimate(reduced_dir: &Path, reference_dir: &Path, out: &Path) -> Result<(), CliError> {
    let rm = Manifest::read(reduced_dir)?;
    let km = Manifest::read(reference_dir)?;
    if rm.command != "reduce" {
        return Err(CliError::Input(format!("{} does not hold a reduce run", reduced_dir.display())));
    }
    if km.command != "reference" && km.command != "reduce" {
        return Err(CliError::Input(format!("{} holds no distribution snapshots", reference_dir.display())));
    }
    check_compatible(&rm.config, &km.config, &rm.times, &km.times)?;
    let config = &rm.config;
    let grid = config.grid().map_err(|e| CliError::Input(e.to_string()))?;
    let mesh = config.mesh().map_err(|e| CliError::Input(e.to_string()))?;

    let omega = SnapshotBlock::read(&reduced_dir.join(PARAMETERS))?;
    check_block(&omega, &rm, config.manifold.dim(), PARAMETERS)?;
    let snaps = SnapshotBlock::read(&reference_dir.join(SNAPSHOTS))?;
    check_block(&snaps, &km, grid.len(), SNAPSHOTS)?;

    let points: Vec<Vec<AnsatzPoint>> = (0..omega.times)
        .map(|t| {
            (0..omega.cells)
                .map(|i| AnsatzPoint::new(config.manifold, omega.row(t, i).to_vec()))
                .collect::<kinred::Result<Vec<_>>>()
        })
        .collect::<kinred::Result<_>>()
        .map_err(|e| CliError::Input(format!("{PARAMETERS}: {e}")))?;
    let fields: Vec<DistributionField> = (0..snaps.times)
        .map(|t| DistributionField::new(grid.clone(), mesh, snaps.frame(t).to_vec()))
        .collect::<kinred::Result<_>>()
        .map_err(|e| CliError::Input(format!("{SNAPSHOTS}: {e}")))?;

    let model = config.model().map_err(runtime)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let report =
        error_estimate::estimate(&rm.times, &points, &fields, &model, config.norm_p, &mut rng).map_err(runtime)?;
    let ratio = report.ratio();
    let rows: Vec<Vec<f64>> = (0..report.times.len())
        .map(|k| vec![report.times[k], report.residual_norms[k], report.bound[k], report.actual[k], ratio[k]])
        .collect();
    let header: Vec<String> =
        ["time", "residual_norm", "bound", "actual", "ratio"].iter().map(|s| s.to_string()).collect();
    let provenance = format!("reduced_config_hash={},reference_config_hash={}", rm.config_hash, km.config_hash);
    let violations = report.actual.iter().zip(&report.bound).filter(|(a, b)| a > b).count();
    let summary = json!({
        "reduced_config_hash": rm.config_hash,
        "reference_config_hash": km.config_hash,
        "p": report.p,
        "lipschitz": report.lipschitz,
        "max_actual": report.actual.iter().copied().fold(0.0, f64::max),
        "max_bound": report.bound.iter().copied().fold(0.0, f64::max),
        "min_ratio": ratio.iter().copied().fold(f64::INFINITY, f64::min),
        "violations": violations,
        "bound_holds": violations == 0,
    });
    let mut dir = OutputDir::create(out)?;
    dir.write(ERROR_TABLE, &csv_table(&provenance, &header, &rows))?;
    dir.write_json(ERROR_SUMMARY, &summary)?;
    println!(
        "bound {} at all {} output times (min ratio {:.3})",
        if violations == 0 { "holds" } else { "VIOLATED" },
        report.times.len(),
        summary["min_ratio"].as_f64().unwrap_or(f64::INFINITY)
    );
    dir.finish("estimate", config, &rm.times, 0)
}
