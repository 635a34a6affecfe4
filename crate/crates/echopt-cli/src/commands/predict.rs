use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use echopt_core::dataset::{read_dataset, FrameStack};
use echopt_core::metrics::{cross_corr_coeff, nrmsd};
use echopt_core::net::ModelParams;
use echopt_core::predict::{predict_ar, Predictor};
use echopt_core::VelocityCommand;

#[derive(Debug, Parser)]
pub struct Args {
    /// Dataset providing the history window and ground truth.
    #[arg(long)]
    data: PathBuf,
    /// naive, flow, or echopt.
    #[arg(long)]
    method: String,
    /// Checkpoint stem (required for --method echopt).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Start frame of the history window (>= 1 for command lookback).
    #[arg(long, default_value_t = 1)]
    window: usize,
    /// Auto-regressive horizon.
    #[arg(long, default_value_t = 1)]
    ar: usize,
    #[arg(long, default_value_t = 3)]
    n_frames: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn predictor_by_name(name: &str, checkpoint: &Option<PathBuf>) -> anyhow::Result<Predictor> {
    match name {
        "naive" => Ok(Predictor::Naive),
        "flow" => Ok(Predictor::Flow),
        "echopt" => {
            let stem = checkpoint
                .as_ref()
                .context("--method echopt needs --checkpoint")?;
            let params = ModelParams::load(stem)
                .with_context(|| format!("loading checkpoint {}", stem.display()))?;
            Ok(Predictor::EchoPt(Box::new(params)))
        }
        other => anyhow::bail!("unknown method '{other}' (expected naive, flow, echopt)"),
    }
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let ds = read_dataset(&args.data)?;
    let n = args.n_frames;
    let k = args.ar;
    anyhow::ensure!(k >= 1, "--ar must be >= 1");
    let i = args.window.max(1);
    anyhow::ensure!(
        i + n - 1 + k < ds.records.len(),
        "window {i} with horizon {k} runs past the dataset ({} frames)",
        ds.records.len()
    );
    let predictor = predictor_by_name(&args.method, &args.checkpoint)?;

    let stack = FrameStack {
        frames: (i..i + n).map(|j| ds.records[j].scape.clone()).collect(),
        commands: (i - 1..i + n).map(|j| ds.records[j].commanded).collect(),
        target: None,
    };
    let future: Vec<VelocityCommand> = (i + n - 1..i + n - 1 + k)
        .map(|j| ds.records[j].commanded)
        .collect();
    let preds = predict_ar(&predictor, &stack, &future, k, ds.header.frame_period)?;

    std::fs::create_dir_all(&args.out_dir)?;
    let mut csv = String::from("run_id,method,horizon,window,cc,nrmsd\n");
    for (step, pred) in preds.iter().enumerate() {
        let target = &ds.records[i + n + step].scape;
        let cc = cross_corr_coeff(pred, target)?;
        let nr = nrmsd(pred, target)?;
        let _ = writeln!(
            csv,
            "predict,{},{},{i},{cc:.6},{nr:.6}",
            args.method,
            step + 1
        );
        crate::pgm::write_pgm(
            pred,
            &args.out_dir.join(format!("pred_{}_{:02}.pgm", args.method, step + 1)),
        )?;
    }
    std::fs::write(args.out_dir.join("metrics.csv"), csv)?;
    crate::manifest::write_manifest(
        &args.out_dir,
        &[],
        &serde_json::json!({
            "method": args.method,
            "window": i,
            "ar": k,
            "n_frames": n,
            "data": args.data.display().to_string(),
        }),
    )?;
    println!(
        "wrote {k} predicted frames and metrics to {}",
        args.out_dir.display()
    );
    Ok(())
}
