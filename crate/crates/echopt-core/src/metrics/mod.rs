//! Image-comparison metrics and the statistics used to score predictors.

pub mod stats;

pub use stats::{student_t_cdf, summarize, welch_t_test, TTestResult};

use crate::error::{CoreError, Result};
use crate::sim::sensor::Energyscape;

/// Per-frame comparison report: zero-shift Pearson coefficient, target-RMS
/// normalized root mean squared difference, and the correlogram peak
/// offset in (range bins, azimuth bins).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub cc: f64,
    pub nrmsd: f64,
    pub correlogram_peak_offset: (i64, i64),
}

fn check_same_shape(a: &Energyscape, b: &Energyscape, op: &'static str) -> Result<()> {
    if a.num_ranges != b.num_ranges || a.num_azimuths != b.num_azimuths {
        return Err(CoreError::ShapeMismatch {
            op,
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    Ok(())
}

/// Pearson correlation coefficient over all cells. A constant image has
/// undefined correlation; that case is reported as 0.
pub fn cross_corr_coeff(a: &Energyscape, b: &Energyscape) -> Result<f64> {
    check_same_shape(a, b, "cross_corr_coeff")?;
    Ok(pearson(&a.data, &b.data))
}

pub(crate) fn pearson(a: &[f32], b: &[f32]) -> f64 {
    let n = a.len() as f64;
    let mean_a = a.iter().map(|&v| v as f64).sum::<f64>() / n;
    let mean_b = b.iter().map(|&v| v as f64).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let da = x as f64 - mean_a;
        let db = y as f64 - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a <= 0.0 || var_b <= 0.0 {
        return 0.0;
    }
    cov / (var_a * var_b).sqrt()
}

/// Normalized 2D cross-correlation over integer shifts.
#[derive(Debug, Clone)]
pub struct Correlogram {
    /// Row-major map, `(2 * num_ranges - 1) x (2 * num_azimuths - 1)`
    /// shifts; index `[0][0]` is shift `(-(R-1), -(A-1))`.
    pub map: Vec<f64>,
    pub shifts_r: usize,
    pub shifts_az: usize,
    /// Peak location relative to zero shift: positive means `b` content
    /// sits at higher (range, azimuth) bins than `a` content.
    pub peak_offset: (i64, i64),
    pub peak_value: f64,
}

/// Computes the correlogram of `a` against `b`: at every integer shift,
/// the zero-padded cross-correlation normalized by the two global L2
/// norms, so identical images peak at exactly (0, 0) with value 1 and
/// small-overlap shifts cannot produce spurious peaks. The peak offset
/// is the displacement of `b`'s content relative to `a`'s.
pub fn correlogram(a: &Energyscape, b: &Energyscape) -> Result<Correlogram> {
    check_same_shape(a, b, "correlogram")?;
    let nr = a.num_ranges as i64;
    let na = a.num_azimuths as i64;
    let shifts_r = (2 * nr - 1) as usize;
    let shifts_az = (2 * na - 1) as usize;

    let norm = |e: &Energyscape| {
        e.data
            .iter()
            .map(|&v| (v as f64) * (v as f64))
            .sum::<f64>()
            .sqrt()
    };
    let denom = norm(a) * norm(b);

    let rows = crate::parallel::par_map_range(shifts_r, |si| {
        let shift_r = si as i64 - (nr - 1);
        let mut row = vec![0.0f64; shifts_az];
        for (sj, out) in row.iter_mut().enumerate() {
            let shift_az = sj as i64 - (na - 1);
            *out = shifted_product(a, b, shift_r, shift_az, denom);
        }
        row
    });
    let map: Vec<f64> = rows.into_iter().flatten().collect();

    let mut peak_idx = 0;
    let mut peak_value = f64::NEG_INFINITY;
    for (i, &v) in map.iter().enumerate() {
        if v > peak_value {
            peak_value = v;
            peak_idx = i;
        }
    }
    let peak_offset = (
        (peak_idx / shifts_az) as i64 - (nr - 1),
        (peak_idx % shifts_az) as i64 - (na - 1),
    );
    Ok(Correlogram {
        map,
        shifts_r,
        shifts_az,
        peak_offset,
        peak_value,
    })
}

/// Correlation mass of `a[k, j] * b[k + shift_r, j + shift_az]` over valid
/// indices (zero padding outside), divided by `denom`.
fn shifted_product(
    a: &Energyscape,
    b: &Energyscape,
    shift_r: i64,
    shift_az: i64,
    denom: f64,
) -> f64 {
    if denom <= 0.0 {
        return 0.0;
    }
    let nr = a.num_ranges as i64;
    let na = a.num_azimuths as i64;
    let k_lo = (-shift_r).max(0);
    let k_hi = (nr - shift_r).min(nr);
    let j_lo = (-shift_az).max(0);
    let j_hi = (na - shift_az).min(na);
    if k_lo >= k_hi || j_lo >= j_hi {
        return 0.0;
    }
    let mut acc = 0.0f64;
    for k in k_lo..k_hi {
        for j in j_lo..j_hi {
            acc += a.cell(k as usize, j as usize)
                * b.cell((k + shift_r) as usize, (j + shift_az) as usize);
        }
    }
    acc / denom
}

/// Root mean squared difference normalized by the target's RMS, so that
/// predicting all zeros scores exactly 1. An all-zero target is
/// undefined and flagged as NaN.
pub fn nrmsd(predicted: &Energyscape, target: &Energyscape) -> Result<f64> {
    check_same_shape(predicted, target, "nrmsd")?;
    let n = target.data.len() as f64;
    let mut diff_sq = 0.0f64;
    let mut target_sq = 0.0f64;
    for (&p, &t) in predicted.data.iter().zip(target.data.iter()) {
        let d = p as f64 - t as f64;
        diff_sq += d * d;
        target_sq += (t as f64) * (t as f64);
    }
    if target_sq <= 0.0 {
        return Ok(f64::NAN);
    }
    Ok((diff_sq / n).sqrt() / (target_sq / n).sqrt())
}

/// Full report for one prediction/target pair.
pub fn metric_report(predicted: &Energyscape, target: &Energyscape) -> Result<MetricReport> {
    Ok(MetricReport {
        cc: cross_corr_coeff(predicted, target)?,
        nrmsd: nrmsd(predicted, target)?,
        correlogram_peak_offset: correlogram(predicted, target)?.peak_offset,
    })
}
