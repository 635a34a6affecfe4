use std::path::PathBuf;

use clap::Parser;
use echopt_core::dataset::{generate_dataset, write_dataset, GenOptions};

#[derive(Debug, Parser)]
pub struct Args {
    /// World file path or built-in name (corridor, room).
    #[arg(long, default_value = "corridor")]
    world: String,
    /// Sensor config JSON (defaults to the 128x64, 5 m, 120 deg sensor).
    #[arg(long)]
    sensor: Option<PathBuf>,
    /// Simulated drive duration in seconds (5 Hz frames).
    #[arg(long)]
    duration: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-frame noise SNR in dB; omit for clean renders.
    #[arg(long)]
    snr_db: Option<f64>,
    /// Output dataset path.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let world = super::load_world(&args.world)?;
    let sensor = super::load_sensor(&args.sensor)?;
    let opts = GenOptions {
        snr_db: args.snr_db,
        ..GenOptions::default()
    };
    let dataset = generate_dataset(&world, &sensor, args.duration, args.seed, &opts)?;
    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    write_dataset(&dataset, &args.out)?;
    println!(
        "wrote {} frames ({}x{} grid) to {}",
        dataset.records.len(),
        sensor.num_ranges,
        sensor.num_azimuths,
        args.out.display()
    );
    Ok(())
}
