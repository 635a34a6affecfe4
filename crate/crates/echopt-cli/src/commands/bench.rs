use std::path::PathBuf;

use clap::Parser;
use echopt_core::dataset::read_dataset;
use echopt_core::predict::{run_bench, BenchConfig};

#[derive(Debug, Parser)]
pub struct Args {
    /// Held-out dataset to score on.
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated methods.
    #[arg(long, default_value = "naive,flow,echopt")]
    methods: String,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Number of evaluation windows.
    #[arg(long, default_value_t = 200)]
    stacks: usize,
    /// Comma-separated prediction horizons.
    #[arg(long, default_value = "1,3,5,10")]
    horizons: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "bench")]
    run_id: String,
    #[arg(long)]
    out_dir: PathBuf,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let ds = read_dataset(&args.data)?;
    let mut predictors = Vec::new();
    for name in args.methods.split(',') {
        predictors.push(super::predict::predictor_by_name(
            name.trim(),
            &args.checkpoint,
        )?);
    }
    let cfg = BenchConfig {
        horizons: super::parse_horizons(&args.horizons)?,
        num_stacks: args.stacks,
        n_frames: 3,
        seed: args.seed,
        run_id: args.run_id.clone(),
    };
    let result = run_bench(&cfg, &ds, &predictors)?;

    std::fs::create_dir_all(&args.out_dir)?;
    std::fs::write(args.out_dir.join("bench_rows.csv"), result.rows_csv())?;
    std::fs::write(args.out_dir.join("bench_summary.csv"), result.summary_csv())?;
    crate::manifest::write_manifest(&args.out_dir, &[args.seed], &cfg)?;

    for s in &result.summary {
        let p = s
            .p_cc_vs_echopt
            .map(|p| format!("  p_cc_vs_echopt {p:.2e}"))
            .unwrap_or_default();
        println!(
            "{:>7}  AR-{:<2}  cc {:.4} ({:.4})  nrmsd {:.4} ({:.4}){p}",
            s.method, s.horizon, s.cc_mean, s.cc_std, s.nrmsd_mean, s.nrmsd_std
        );
    }
    println!("results in {}", args.out_dir.display());
    Ok(())
}
