//! Grayscale frame dumps: binary PGM (P5) and optional PNG.
//!
//! Pixels map linearly: 255 corresponds to the frame's maximum cell,
//! 0 to zero energy. Rows are range bins (near range at the top),
//! columns azimuth bins.

use std::io::Write;
use std::path::Path;

use echopt_core::Energyscape;

pub fn to_gray_bytes(scape: &Energyscape) -> Vec<u8> {
    let max = scape.max_value();
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    scape
        .data
        .iter()
        .map(|&v| (v as f64 * scale).round().clamp(0.0, 255.0) as u8)
        .collect()
}

pub fn write_pgm(scape: &Energyscape, path: &Path) -> anyhow::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "P5\n{} {}\n255\n", scape.num_azimuths, scape.num_ranges)?;
    f.write_all(&to_gray_bytes(scape))?;
    f.flush()?;
    Ok(())
}

pub fn write_png(scape: &Energyscape, path: &Path) -> anyhow::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut encoder = png::Encoder::new(
        std::io::BufWriter::new(file),
        scape.num_azimuths as u32,
        scape.num_ranges as u32,
    );
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header()?;
    writer.write_image_data(&to_gray_bytes(scape))?;
    Ok(())
}
