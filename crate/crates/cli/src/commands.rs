use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use log::info;
use reachkit::error::MapError;
use reachkit::inverse::{invert_map, InverseReachabilityMap};
use reachkit::io::{self, LoadOptions, PlacementReport};
use reachkit::kinematics::IkSettings;
use reachkit::placement::{build_union_map, find_base, vertical_union_map, PlacementMethod, PlacementParams};
use reachkit::reachability::{generate_reachability_map, ColorBin, MapParams, ReachabilityMap};
use reachkit::robot::{parse_robot, KinematicChain};
use reachkit::{Error, Warning};
use serde::Serialize;
use serde_json::json;

use crate::manifest::{manifest_path, read_manifest, write_manifest, FileHash, RunManifest};
use crate::{Cli, Command, ExportPlyArgs, GenerateArgs, InspectArgs, InvertArgs, PlaceArgs};

/// What a finished command reports for its manifest.
struct Outcome {
    command: &'static str,
    rng_seed: u64,
    params: serde_json::Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    warnings: Vec<Warning>,
    /// Where the manifest goes; `None` when the command wrote no file.
    manifest: Option<PathBuf>,
}

pub fn run(cli: Cli, args: Vec<String>) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Replay(r) => replay(&r.manifest),
        command => {
            execute(command, args)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn execute(command: Command, args: Vec<String>) -> Result<(), Error> {
    let start = Instant::now();
    let outcome = match command {
        Command::Generate(a) => generate(a)?,
        Command::Invert(a) => invert(a)?,
        Command::Place(a) => place(a)?,
        Command::Inspect(a) => inspect(a)?,
        Command::ExportPly(a) => export_ply(a)?,
        Command::Replay(_) => return Err(Error::Format("a replay cannot replay another replay".into())),
    };
    let Some(path) = outcome.manifest else {
        return Ok(());
    };
    let hash_all = |paths: &[PathBuf]| paths.iter().map(|p| FileHash::of(p)).collect::<Result<Vec<_>, _>>();
    let cwd = std::env::current_dir().map_err(|source| Error::Io {
        path: PathBuf::from("."),
        source,
    })?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: outcome.command.into(),
        args,
        cwd,
        rng_seed: outcome.rng_seed,
        params: outcome.params,
        inputs: hash_all(&outcome.inputs)?,
        outputs: hash_all(&outcome.outputs)?,
        warnings: outcome.warnings.iter().map(ToString::to_string).collect(),
        duration_seconds: start.elapsed().as_secs_f64(),
    };
    write_manifest(&manifest, &path)?;
    info!("manifest written to {}", path.display());
    Ok(())
}

fn replay(path: &Path) -> Result<ExitCode, Error> {
    let manifest = read_manifest(path)?;
    std::env::set_current_dir(&manifest.cwd).map_err(|source| Error::Io {
        path: manifest.cwd.clone(),
        source,
    })?;
    // a seed given on the recorded command line still wins over this
    std::env::set_var("REACHKIT_SEED", manifest.rng_seed.to_string());
    let argv = std::iter::once(manifest.tool.clone()).chain(manifest.args.iter().cloned());
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::Format(format!("recorded arguments: {e}")))?;
    execute(cli.command, manifest.args.clone())?;

    let mut mismatched = 0;
    for recorded in &manifest.outputs {
        let now = FileHash::of(&recorded.path)?;
        if now.sha256 == recorded.sha256 {
            println!("match     {}", recorded.path.display());
        } else {
            mismatched += 1;
            println!("MISMATCH  {} ({} != {})", recorded.path.display(), now.sha256, recorded.sha256);
        }
    }
    if mismatched > 0 {
        eprintln!("{mismatched} of {} outputs differ", manifest.outputs.len());
        return Ok(ExitCode::FAILURE);
    }
    println!("{} outputs reproduced", manifest.outputs.len());
    Ok(ExitCode::SUCCESS)
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn load_robot(path: &Path) -> Result<(KinematicChain, Vec<Warning>), Error> {
    let robot = parse_robot(&read_text(path)?)?;
    Ok((robot.value, robot.warnings))
}

fn generate(a: GenerateArgs) -> Result<Outcome, Error> {
    let (chain, mut warnings) = load_robot(&a.robot)?;
    let settings = IkSettings {
        match_mode: a.match_mode.into(),
        restarts: a.restarts,
        max_iterations: a.max_iterations,
        rng_seed: a.seed.seed,
        ..IkSettings::default()
    };
    let params = MapParams {
        resolution: a.resolution,
        radius: a.radius,
        samples_per_sphere: a.samples,
        workers: a.workers,
    };
    let map = generate_reachability_map(&chain, &params, &settings)?;
    warnings.extend(map.warnings);
    let map = map.value;
    io::save_map(&map, &a.out)?;
    let ply = a.out.with_extension("ply");
    io::write_text(&ply, &io::reachability_ply(&map))?;
    println!(
        "{} spheres, {} reachable poses -> {}",
        map.spheres.len(),
        map.pose_count(),
        a.out.display()
    );
    Ok(Outcome {
        command: "generate",
        rng_seed: settings.rng_seed,
        params: json!({
            "resolution": params.resolution,
            "radius": params.radius,
            "samples_per_sphere": params.samples_per_sphere,
            "workers": params.workers,
            "ik_settings": settings,
        }),
        inputs: vec![a.robot],
        manifest: Some(manifest_path(&a.out)),
        outputs: vec![a.out, ply],
        warnings,
    })
}

fn invert(a: InvertArgs) -> Result<Outcome, Error> {
    let map = io::load_map(&a.map, &LoadOptions::default())?;
    let mut warnings = map.warnings;
    let irm = invert_map(&map.value)?;
    warnings.extend(irm.warnings);
    let irm = irm.value;
    io::save_inverse_map(&irm, &a.out)?;
    let ply = a.out.with_extension("ply");
    io::write_text(&ply, &io::inverse_ply(&irm))?;
    println!(
        "{} spheres, {} base poses -> {}",
        irm.spheres.len(),
        irm.pose_count(),
        a.out.display()
    );
    Ok(Outcome {
        command: "invert",
        rng_seed: irm.settings.rng_seed,
        params: json!({ "resolution": irm.resolution, "radius": irm.radius }),
        inputs: vec![a.map],
        manifest: Some(manifest_path(&a.out)),
        outputs: vec![a.out, ply],
        warnings,
    })
}

fn place(a: PlaceArgs) -> Result<Outcome, Error> {
    let mut params = PlacementParams {
        n: a.n,
        m: a.m,
        yaw_samples: a.yaw_samples,
        ground_z: a.ground_z,
        placebase_mode: a.placebase_mode.into(),
        settings: IkSettings::default(),
    };
    // cheap checks before any file is read
    params.validate()?;

    let (chain, mut warnings) = load_robot(&a.robot)?;
    let opts = LoadOptions {
        expected_fingerprint: Some(chain.fingerprint()),
        allow_fingerprint_mismatch: a.allow_fingerprint_mismatch,
    };
    let irm = io::load_inverse_map(&a.irm, &opts)?;
    warnings.extend(irm.warnings);
    let irm = irm.value;
    let tasks = io::load_tasks(&a.tasks)?;
    params.settings = IkSettings {
        rng_seed: a.seed.seed,
        ..irm.settings.clone()
    };

    let method: PlacementMethod = a.method.into();
    let found = find_base(method, &irm, &tasks, &chain, &params)?;
    warnings.extend(found.warnings);
    let report = PlacementReport {
        method,
        parameters: params.clone(),
        task_count: tasks.len(),
        candidates: found.value,
        warnings: warnings.clone(),
    };
    io::write_text(&a.out, &io::report_to_json(&report)?)?;
    for (rank, c) in report.candidates.iter().enumerate() {
        let t = c.base_pose.position;
        println!(
            "#{} base ({:.3}, {:.3}, {:.3}) yaw {:.3} score {:.2} reaches {}/{}",
            rank + 1,
            t.x,
            t.y,
            t.z,
            c.base_pose.rpy()[2],
            c.score,
            c.reached(),
            tasks.len()
        );
    }

    let mut outputs = vec![a.out.clone()];
    if let Some(ply) = a.ply {
        let union = if method == PlacementMethod::Vertical {
            vertical_union_map(&irm, &tasks, &chain, &params)?
        } else {
            build_union_map(&irm, &tasks, params.placebase_mode)?
        };
        io::write_text(&ply, &io::union_ply(&union.value))?;
        outputs.push(ply);
    }
    Ok(Outcome {
        command: "place",
        rng_seed: params.settings.rng_seed,
        params: serde_json::to_value(&params).map_err(|e| Error::Format(e.to_string()))?,
        inputs: vec![a.irm, a.tasks, a.robot],
        manifest: Some(manifest_path(&a.out)),
        outputs,
        warnings,
    })
}

/// Either kind of map file, loaded without a robot to check against.
enum AnyMap {
    Forward(ReachabilityMap),
    Inverse(InverseReachabilityMap),
}

fn load_any(path: &Path) -> Result<(AnyMap, Vec<Warning>), Error> {
    let text = read_text(path)?;
    let opts = LoadOptions::default();
    match io::map_kind(&text)?.as_str() {
        "reachability" => {
            let m = io::reachability_map_from_json(&text, &opts)?;
            Ok((AnyMap::Forward(m.value), m.warnings))
        }
        "inverse" => {
            let m = io::inverse_map_from_json(&text, &opts)?;
            Ok((AnyMap::Inverse(m.value), m.warnings))
        }
        other => Err(MapError::WrongKind {
            expected: "reachability or inverse".into(),
            found: other.into(),
        }
        .into()),
    }
}

#[derive(Debug, Serialize)]
struct MapSummary {
    map_kind: &'static str,
    chain_fingerprint: String,
    resolution: f64,
    radius: f64,
    samples_per_sphere: usize,
    sphere_count: usize,
    pose_count: usize,
    /// Sphere counts over ten equal measure bins; the last includes 100.
    histogram: [usize; 10],
    color_bins: BTreeMap<String, usize>,
}

fn summarize(map: &AnyMap) -> MapSummary {
    let (kind, fp, res, radius, samples, measures, bins, poses) = match map {
        AnyMap::Forward(m) => (
            "reachability",
            &m.chain_fingerprint,
            m.resolution,
            m.radius,
            m.samples_per_sphere,
            m.spheres.iter().map(|s| s.reach_measure).collect::<Vec<_>>(),
            m.spheres.iter().map(|s| s.color_bin).collect::<Vec<_>>(),
            m.pose_count(),
        ),
        AnyMap::Inverse(m) => (
            "inverse",
            &m.chain_fingerprint,
            m.resolution,
            m.radius,
            m.samples_per_sphere,
            m.spheres.iter().map(|s| s.measure).collect(),
            m.spheres.iter().map(|s| s.color_bin).collect(),
            m.pose_count(),
        ),
    };
    let mut histogram = [0usize; 10];
    for d in &measures {
        histogram[((d / 10.0).floor().max(0.0) as usize).min(9)] += 1;
    }
    let color_bins = ColorBin::ALL
        .iter()
        .map(|b| (format!("{b:?}"), bins.iter().filter(|x| *x == b).count()))
        .collect();
    MapSummary {
        map_kind: kind,
        chain_fingerprint: fp.clone(),
        resolution: res,
        radius,
        samples_per_sphere: samples,
        sphere_count: measures.len(),
        pose_count: poses,
        histogram,
        color_bins,
    }
}

fn inspect(a: InspectArgs) -> Result<Outcome, Error> {
    let (map, warnings) = load_any(&a.map)?;
    let summary = summarize(&map);
    let summary_json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Format(e.to_string()))?;
    if a.json {
        println!("{summary_json}");
    } else {
        println!("kind        {}", summary.map_kind);
        println!("fingerprint {}", summary.chain_fingerprint);
        println!("resolution  {}  radius {}  samples/sphere {}", summary.resolution, summary.radius, summary.samples_per_sphere);
        println!("spheres     {}", summary.sphere_count);
        println!("poses       {}", summary.pose_count);
        println!("measure histogram:");
        for (i, count) in summary.histogram.iter().enumerate() {
            let close = if i == 9 { ']' } else { ')' };
            println!("  [{:>3}, {:>3}{close} {count}", i * 10, (i + 1) * 10);
        }
        println!("color bins:");
        for (bin, count) in &summary.color_bins {
            println!("  {bin:<8} {count}");
        }
    }
    let mut outputs = Vec::new();
    if let Some(out) = &a.out {
        io::write_text(out, &(summary_json + "\n"))?;
        outputs.push(out.clone());
    }
    Ok(Outcome {
        command: "inspect",
        rng_seed: 0,
        params: json!({ "json": a.json }),
        inputs: vec![a.map],
        manifest: a.out.as_deref().map(manifest_path),
        outputs,
        warnings,
    })
}

fn export_ply(a: ExportPlyArgs) -> Result<Outcome, Error> {
    let (map, warnings) = load_any(&a.map)?;
    let ply = match &map {
        AnyMap::Forward(m) => io::reachability_ply(m),
        AnyMap::Inverse(m) => io::inverse_ply(m),
    };
    io::write_text(&a.out, &ply)?;
    Ok(Outcome {
        command: "export-ply",
        rng_seed: 0,
        params: json!({}),
        inputs: vec![a.map],
        manifest: Some(manifest_path(&a.out)),
        outputs: vec![a.out],
        warnings,
    })
}
