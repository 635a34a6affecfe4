use std::path::PathBuf;

use clap::Parser;
use echopt_core::dataset::read_dataset;

#[derive(Debug, Parser)]
pub struct Args {
    #[arg(long)]
    data: PathBuf,
    /// Frame index to export.
    #[arg(long)]
    index: usize,
    /// Output image path; extension selects the format unless --png.
    #[arg(long)]
    out: PathBuf,
    /// Write PNG instead of PGM.
    #[arg(long, default_value_t = false)]
    png: bool,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let ds = read_dataset(&args.data)?;
    anyhow::ensure!(
        args.index < ds.records.len(),
        "frame {} out of range ({} frames)",
        args.index,
        ds.records.len()
    );
    let scape = &ds.records[args.index].scape;
    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let as_png = args.png || args.out.extension().is_some_and(|e| e == "png");
    if as_png {
        crate::pgm::write_png(scape, &args.out)?;
    } else {
        crate::pgm::write_pgm(scape, &args.out)?;
    }
    println!(
        "exported frame {} (t = {:.2} s) to {}",
        args.index,
        ds.records[args.index].timestamp,
        args.out.display()
    );
    Ok(())
}
