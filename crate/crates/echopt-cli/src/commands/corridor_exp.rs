use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use echopt_core::net::ModelParams;
use echopt_core::predict::{
    run_corridor_experiment, Condition, CorridorConfig, CorridorRun,
};
use echopt_core::predict::corridor::{poses_to_csv, runs_to_csv};
use echopt_core::predict::slip::median;

#[derive(Debug, Parser)]
pub struct Args {
    #[arg(long, default_value = "corridor")]
    world: String,
    #[arg(long)]
    sensor: Option<PathBuf>,
    /// Experiment config JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// clean, noisy, noisy-predict, or all.
    #[arg(long, default_value = "all")]
    condition: String,
    /// Checkpoint stem (needed for noisy-predict).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let world = super::load_world(&args.world)?;
    let sensor = super::load_sensor(&args.sensor)?;
    let mut cfg: CorridorConfig = match &args.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => CorridorConfig::default(),
    };
    if let Some(runs) = args.runs {
        cfg.runs = runs;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }

    let conditions: Vec<Condition> = match args.condition.as_str() {
        "clean" => vec![Condition::Clean],
        "noisy" => vec![Condition::Noisy],
        "noisy-predict" => vec![Condition::NoisyPredict],
        "all" => vec![Condition::Clean, Condition::Noisy, Condition::NoisyPredict],
        other => anyhow::bail!("unknown condition '{other}'"),
    };

    let params = if conditions.contains(&Condition::NoisyPredict) {
        let stem = args
            .checkpoint
            .as_ref()
            .context("condition noisy-predict needs --checkpoint")?;
        Some(ModelParams::load(stem)?)
    } else {
        None
    };

    let mut all_runs: Vec<CorridorRun> = Vec::new();
    for condition in conditions {
        let runs =
            run_corridor_experiment(&cfg, &world, &sensor, condition, params.as_ref())?;
        let times: Vec<f64> = runs.iter().map(|r| r.travel_time).collect();
        let devs: Vec<f64> = runs.iter().map(|r| r.median_abs_deviation()).collect();
        let arrivals = runs.iter().filter(|r| r.arrived).count();
        println!(
            "{:>14}: {arrivals}/{} arrivals, median travel {:.1} s, median |dev| {:.3} m",
            condition.name(),
            runs.len(),
            median(&times),
            median(&devs)
        );
        all_runs.extend(runs);
    }

    std::fs::create_dir_all(&args.out_dir)?;
    std::fs::write(args.out_dir.join("corridor_runs.csv"), runs_to_csv(&all_runs))?;
    std::fs::write(args.out_dir.join("corridor_poses.csv"), poses_to_csv(&all_runs))?;
    crate::manifest::write_manifest(&args.out_dir, &[cfg.seed], &cfg)?;
    println!("per-run and per-step CSVs in {}", args.out_dir.display());
    Ok(())
}
