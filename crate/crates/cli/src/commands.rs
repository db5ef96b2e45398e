use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use puk_core::pipeline::{estimate_trials, evaluate_trials, score_reports, ErrorReport, PipelineConfig, SequenceSpec};
use puk_core::rpe::RpeConfig;
use puk_core::scene::{build_scene, builtin_markers, synthetic_depths, DepthSample, Plane, SceneConfig};
use puk_core::sim::{DifficultyProfile, NoiseModel, ORACLE_TRIAL_OFFSET};
use puk_core::trajectory::{Trajectory, TrialSet};
use puk_core::tum::{parse_trajectory_file, write_trajectory_file, TrajectoryFormat};
use puk_service::ServiceConfig;
use serde::de::DeserializeOwned;

use crate::args::{
    ClassArgs, EstimateArgs, EvaluateArgs, ProfileArg, SceneArgs, ScoreArgs, ServeArgs, SimulateArgs, WindowArgs,
};
use crate::error::{CliError, CliResult};

fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
            }
            fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            info!("wrote {}", path.display());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Internal(format!("stdout: {e}")))?;
        }
    }
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_trajectories(paths: &[PathBuf]) -> CliResult<Vec<Trajectory>> {
    paths
        .iter()
        .map(|p| parse_trajectory_file(p, TrajectoryFormat::Tum).map_err(CliError::from))
        .collect()
}

fn pipeline(window: &WindowArgs, class: &ClassArgs, setting: Option<&str>) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        rpe: RpeConfig {
            window_frames: window.window_frames,
            align: window.align,
            max_dt: window.max_dt,
        },
        boundaries: class.boundaries,
        rule: class.boundary_rule.into(),
        ..PipelineConfig::default()
    };
    if let Some(s) = setting {
        cfg.setting = s.to_string();
    }
    cfg
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let gt = parse_trajectory_file(&args.reference, TrajectoryFormat::Tum)?;
    let trials = TrialSet::reference(read_trajectories(&args.trials)?)?;
    let report = evaluate_trials(&gt, &trials, &pipeline(&args.window, &args.class, None))?;
    emit(&report.to_json()?, args.out.as_deref())
}

pub fn estimate(args: &EstimateArgs) -> CliResult<()> {
    let trials = TrialSet::estimation(read_trajectories(&args.trials)?)?;
    let cfg = pipeline(&args.window, &args.class, Some(&args.setting));
    let report = estimate_trials(&trials, &cfg)?;
    info!("{} trials, {} evaluations", report.n_trials, report.evaluations);
    emit(&report.to_json()?, args.out.as_deref())
}

fn sequence_spec(args: &SimulateArgs) -> CliResult<SequenceSpec> {
    let difficulty = match &args.difficulty {
        Some(d) if d.is_empty() => return Err(CliError::Usage("--difficulty needs at least one value".into())),
        Some(d) => d.clone(),
        None => match args.profile {
            ProfileArg::Ramp => DifficultyProfile::ramp(args.windows)?.d,
            ProfileArg::Flat => DifficultyProfile::flat(args.windows, args.level)?.d,
        },
    };
    let noise = NoiseModel {
        sigma_base: args.sigma_base,
        sigma_gain: args.sigma_gain,
        rot_sigma: args.rot_sigma,
        bias_mode: args.bias,
        bias_scale: args.bias_scale,
        seed: args.seed,
    };
    Ok(SequenceSpec {
        shape: args.shape,
        difficulty,
        window_frames: args.window_frames,
        noise,
    })
}

fn write_set(dir: &Path, trials: &[Trajectory]) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    for (i, t) in trials.iter().enumerate() {
        write_trajectory_file(t, dir.join(format!("trial_{i:04}.tum")))?;
    }
    Ok(())
}

/// Writes `sequence.json`, `ground_truth.tum`, `estimation/` and, unless
/// disabled, `reference/` under the output directory.
pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let spec = sequence_spec(args)?;
    spec.profile()?;
    let gt = spec.ground_truth()?;
    let out = &args.out;
    fs::create_dir_all(out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;

    let mut meta = serde_json::to_string_pretty(&spec).map_err(|e| CliError::Internal(e.to_string()))?;
    meta.push('\n');
    emit(&meta, Some(&out.join("sequence.json")))?;
    write_trajectory_file(&gt, out.join("ground_truth.tum"))?;
    write_set(&out.join("estimation"), &spec.trials(&gt, 0, args.trials)?)?;
    if args.reference_trials > 0 {
        let reference = spec.trials(&gt, ORACLE_TRIAL_OFFSET, args.reference_trials)?;
        write_set(&out.join("reference"), &reference)?;
    }
    info!(
        "{} windows, {} estimation and {} reference trials in {}",
        spec.difficulty.len(),
        args.trials,
        args.reference_trials,
        out.display()
    );
    Ok(())
}

pub fn score(args: &ScoreArgs) -> CliResult<()> {
    let estimate: ErrorReport = read_json(&args.estimate)?;
    let truth: ErrorReport = read_json(&args.truth)?;
    let report = score_reports(
        &estimate,
        &truth,
        &args.class.boundaries,
        args.class.boundary_rule.into(),
        args.averaging.into(),
    )?;
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    emit(&text, args.out.as_deref())
}

pub fn scene(args: &SceneArgs) -> CliResult<()> {
    let style = builtin_markers().get(&args.style)?;
    let traj = parse_trajectory_file(&args.trajectory, TrajectoryFormat::Tum)?;
    let report: ErrorReport = read_json(&args.estimate)?;
    let estimate = report.to_estimate()?;
    let depths: Vec<DepthSample> = match (&args.depths, &args.planes) {
        (Some(path), _) => read_json(path)?,
        (None, Some(path)) => {
            let planes: Vec<Plane> = read_json(path)?;
            synthetic_depths(&traj, report.window_frames, &planes)?
        }
        (None, None) => return Err(CliError::Usage("one of --depths or --planes is required".into())),
    };
    let cfg = SceneConfig {
        window_frames: report.window_frames,
        max_regions: args.max_regions,
    };
    let doc = build_scene(&traj, &estimate, &report.classes(), &depths, style.as_ref(), &cfg)?;
    emit(&doc.to_json()?, args.out.as_deref())
}

pub fn serve(args: &ServeArgs) -> CliResult<()> {
    if !(args.rt_factor >= 0.0 && args.rt_factor.is_finite()) {
        return Err(CliError::Usage(format!("real-time factor {} must be finite and >= 0", args.rt_factor)));
    }
    let config = ServiceConfig {
        host: args.host.clone(),
        port: args.port,
        workers: args.workers,
        rt_factor: args.rt_factor,
        seed: args.seed,
        jobs_dir: args.jobs_dir.clone(),
    };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    runtime.block_on(puk_service::serve(config))?;
    Ok(())
}
