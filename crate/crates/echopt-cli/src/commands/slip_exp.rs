use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use echopt_core::net::ModelParams;
use echopt_core::predict::{run_slip_experiment, Predictor, SlipExperimentConfig};

#[derive(Debug, Parser)]
pub struct Args {
    /// World file path or built-in name.
    #[arg(long, default_value = "corridor")]
    world: String,
    #[arg(long)]
    sensor: Option<PathBuf>,
    /// Experiment config JSON (defaults: 45 s cruise, slip windows at
    /// 10-16 s both wheels and 30-36 s left wheel, horizons 1/3/5).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint stem; omit to run the analytic predictors only.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let world = super::load_world(&args.world)?;
    let sensor = super::load_sensor(&args.sensor)?;
    let mut cfg: SlipExperimentConfig = match &args.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => SlipExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }

    let mut predictors = vec![Predictor::Naive, Predictor::Flow];
    if let Some(stem) = &args.checkpoint {
        let params = ModelParams::load(stem)
            .with_context(|| format!("loading checkpoint {}", stem.display()))?;
        predictors.push(Predictor::EchoPt(Box::new(params)));
    }

    let result = run_slip_experiment(&cfg, &world, &sensor, &predictors)?;
    std::fs::create_dir_all(&args.out_dir)?;
    std::fs::write(args.out_dir.join("slip_epsilon.csv"), result.to_csv())?;
    crate::manifest::write_manifest(&args.out_dir, &[cfg.seed], &cfg)?;

    for sig in &result.signals {
        let eps: Vec<f64> = sig.series.iter().map(|(_, e)| *e).collect();
        println!(
            "{:>7} AR-{}: median epsilon {:.3}",
            sig.predictor,
            sig.horizon,
            echopt_core::predict::slip::median(&eps)
        );
    }
    println!("epsilon series in {}", args.out_dir.display());
    Ok(())
}
