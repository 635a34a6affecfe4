use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use echopt_core::dataset::{make_stacks, make_stacks_with_targets, read_dataset, Dataset};
use echopt_core::net::{build_model, count_params, train, EchoPTConfig, OptimSettings};
use serde::Serialize;

#[derive(Debug, Parser)]
pub struct Args {
    /// Training dataset.
    #[arg(long)]
    train: PathBuf,
    /// Validation dataset (defaults to reusing a tail of the training set).
    #[arg(long)]
    val: Option<PathBuf>,
    /// Frame-aligned dataset supplying training targets (for example a
    /// clean render of the same drive); inputs stay on --train frames.
    #[arg(long)]
    target_data: Option<PathBuf>,
    /// Frame-aligned target dataset for validation.
    #[arg(long)]
    val_target_data: Option<PathBuf>,
    /// Network config JSON (defaults to the desk-scale architecture).
    #[arg(long)]
    net_config: Option<PathBuf>,
    /// Optimizer config JSON mirroring the training-recipe field names.
    #[arg(long)]
    optim_config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Cap on training stacks (evenly subsampled) to bound epoch cost.
    #[arg(long)]
    max_stacks: Option<usize>,
    /// Cap on validation stacks.
    #[arg(long)]
    max_val_stacks: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Serialize)]
struct EffectiveConfig<'a> {
    net: &'a EchoPTConfig,
    optim: &'a OptimSettings,
    input_scale: f64,
    train_stacks: usize,
    val_stacks: usize,
}

fn subsample<T: Clone>(items: Vec<T>, cap: Option<usize>) -> Vec<T> {
    match cap {
        Some(cap) if cap > 0 && items.len() > cap => {
            let step = items.len() as f64 / cap as f64;
            (0..cap)
                .map(|i| items[(i as f64 * step) as usize].clone())
                .collect()
        }
        _ => items,
    }
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let train_ds = read_dataset(&args.train).context("reading training dataset")?;
    let cfg: EchoPTConfig = match &args.net_config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => EchoPTConfig {
            num_ranges: train_ds.header.sensor.num_ranges,
            num_azimuths: train_ds.header.sensor.num_azimuths,
            ..EchoPTConfig::toy()
        },
    };
    cfg.validate()?;

    let mut optim: OptimSettings = match &args.optim_config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => OptimSettings::default(),
    };
    if let Some(e) = args.epochs {
        optim.epochs = e;
    }
    if let Some(lr) = args.lr {
        optim.learning_rate = lr;
    }
    if let Some(bs) = args.batch_size {
        optim.batch_size = bs;
    }
    optim.seed = args.seed;

    let stacks_of = |ds: &Dataset, targets: &Option<PathBuf>| -> anyhow::Result<_> {
        Ok(match targets {
            Some(p) => {
                let target_ds = read_dataset(p).context("reading target dataset")?;
                make_stacks_with_targets(ds, &target_ds, cfg.n_frames)?
            }
            None => make_stacks(ds, cfg.n_frames),
        })
    };
    let mut train_stacks = stacks_of(&train_ds, &args.target_data)?;
    anyhow::ensure!(!train_stacks.is_empty(), "training dataset has too few frames");
    let val_stacks = match &args.val {
        Some(p) => {
            let val_ds = read_dataset(p).context("reading validation dataset")?;
            stacks_of(&val_ds, &args.val_target_data)?
        }
        None => {
            // Hold out the last 10% of training stacks.
            let split = train_stacks.len() * 9 / 10;
            train_stacks.split_off(split)
        }
    };
    let train_stacks = subsample(train_stacks, args.max_stacks);
    let val_stacks = subsample(val_stacks, args.max_val_stacks);

    let mut params = build_model(&cfg, args.seed)?;
    println!(
        "training {} parameters on {} stacks ({} validation), lr {}, {} epochs",
        count_params(&params),
        train_stacks.len(),
        val_stacks.len(),
        optim.learning_rate,
        optim.epochs
    );

    let report = train(&mut params, &train_stacks, &val_stacks, &optim)?;

    std::fs::create_dir_all(&args.out_dir)?;
    params.save(&args.out_dir.join("checkpoint"))?;
    let mut curve = String::from("epoch,train_loss,val_loss\n");
    for e in &report.epochs {
        let _ = writeln!(curve, "{},{:.8e},{:.8e}", e.epoch, e.train_loss, e.val_loss);
    }
    std::fs::write(args.out_dir.join("loss_curve.csv"), curve)?;
    crate::manifest::write_manifest(
        &args.out_dir,
        &[args.seed],
        &EffectiveConfig {
            net: &cfg,
            optim: &optim,
            input_scale: params.input_scale,
            train_stacks: train_stacks.len(),
            val_stacks: val_stacks.len(),
        },
    )?;
    println!(
        "best validation loss {:.6e} at epoch {}; checkpoint in {}",
        report.best_val_loss,
        report.best_epoch,
        args.out_dir.display()
    );
    Ok(())
}
