//! Benchmark grid: one-shot and auto-regressive prediction metrics over
//! held-out stacks, with Welch tests of EchoPT against each baseline.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FrameStack};
use crate::error::{CoreError, Result};
use crate::metrics::{cross_corr_coeff, nrmsd, summarize, welch_t_test};
use crate::parallel::par_map;
use crate::sim::kinematics::VelocityCommand;

use super::{predict_ar, Predictor};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub horizons: Vec<usize>,
    pub num_stacks: usize,
    pub n_frames: usize,
    pub seed: u64,
    pub run_id: String,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            horizons: vec![1, 3, 5, 10],
            num_stacks: 200,
            n_frames: 3,
            seed: 0,
            run_id: "bench".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub method: String,
    pub horizon: usize,
    pub window: usize,
    pub cc: f64,
    pub nrmsd: f64,
}

#[derive(Debug, Clone)]
pub struct BenchSummary {
    pub method: String,
    pub horizon: usize,
    pub cc_mean: f64,
    pub cc_std: f64,
    pub nrmsd_mean: f64,
    pub nrmsd_std: f64,
    /// Welch two-sided p of this method's CC sample against EchoPT's.
    pub p_cc_vs_echopt: Option<f64>,
    pub p_nrmsd_vs_echopt: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
    pub summary: Vec<BenchSummary>,
}

impl BenchResult {
    /// Per-window metric rows: `run_id,method,horizon,window,cc,nrmsd`.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("run_id,method,horizon,window,cc,nrmsd\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6}",
                self.config.run_id, r.method, r.horizon, r.window, r.cc, r.nrmsd
            );
        }
        out
    }

    /// Mean (std) per method and horizon plus Welch p-values vs EchoPT.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "run_id,method,horizon,cc_mean,cc_std,nrmsd_mean,nrmsd_std,p_cc_vs_echopt,p_nrmsd_vs_echopt\n",
        );
        for s in &self.summary {
            let fmt_p = |p: Option<f64>| match p {
                Some(v) => format!("{v:.6e}"),
                None => String::new(),
            };
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6},{:.6},{},{}",
                self.config.run_id,
                s.method,
                s.horizon,
                s.cc_mean,
                s.cc_std,
                s.nrmsd_mean,
                s.nrmsd_std,
                fmt_p(s.p_cc_vs_echopt),
                fmt_p(s.p_nrmsd_vs_echopt)
            );
        }
        out
    }

    pub fn mean_cc(&self, method: &str, horizon: usize) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.method == method && s.horizon == horizon)
            .map(|s| s.cc_mean)
    }

    pub fn mean_nrmsd(&self, method: &str, horizon: usize) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.method == method && s.horizon == horizon)
            .map(|s| s.nrmsd_mean)
    }

    pub fn cc_samples(&self, method: &str, horizon: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.horizon == horizon)
            .map(|r| r.cc)
            .collect()
    }
}

/// Evenly spread window start indices over the valid range, after a
/// seeded rotation so different seeds sample different windows.
fn select_windows(valid: std::ops::Range<usize>, count: usize, seed: u64) -> Vec<usize> {
    let len = valid.len();
    let count = count.min(len);
    if count == 0 {
        return Vec::new();
    }
    let offset = (seed as usize) % len.max(1);
    (0..count)
        .map(|i| valid.start + (offset + i * len / count) % len)
        .collect()
}

/// Runs every predictor over the same windows at every horizon. One
/// rollout per (predictor, window) reaches the maximum horizon and is
/// scored at each requested depth against the measured frames.
pub fn run_bench(
    cfg: &BenchConfig,
    dataset: &Dataset,
    predictors: &[Predictor],
) -> Result<BenchResult> {
    let n = cfg.n_frames;
    let k_max = *cfg
        .horizons
        .iter()
        .max()
        .ok_or_else(|| CoreError::InvalidArgument("no horizons".into()))?;
    if cfg.horizons.iter().any(|&k| k == 0) {
        return Err(CoreError::InvalidArgument("horizon 0 in bench".into()));
    }
    let records = &dataset.records;
    // Window i needs a command at i-1 and a target at i+n-1+k_max.
    if records.len() < n + k_max + 2 {
        return Err(CoreError::InvalidArgument(format!(
            "dataset of {} frames too short for horizon {k_max}",
            records.len()
        )));
    }
    let valid = 1..records.len() - (n + k_max) + 1;
    let windows = select_windows(valid, cfg.num_stacks, cfg.seed);
    let dt = dataset.header.frame_period;

    let mut rows: Vec<BenchRow> = Vec::new();
    for predictor in predictors {
        let per_window: Vec<Result<Vec<BenchRow>>> = par_map(&windows, |&i| {
            let stack = FrameStack {
                frames: (i..i + n).map(|j| records[j].scape.clone()).collect(),
                commands: (i - 1..i + n).map(|j| records[j].commanded).collect(),
                target: None,
            };
            let future: Vec<VelocityCommand> = (i + n - 1..i + n - 1 + k_max)
                .map(|j| records[j].commanded)
                .collect();
            let preds = predict_ar(predictor, &stack, &future, k_max, dt)?;
            let mut out = Vec::with_capacity(cfg.horizons.len());
            for &k in &cfg.horizons {
                let target = &records[i + n - 1 + k].scape;
                out.push(BenchRow {
                    method: predictor.name().to_string(),
                    horizon: k,
                    window: i,
                    cc: cross_corr_coeff(&preds[k - 1], target)?,
                    nrmsd: nrmsd(&preds[k - 1], target)?,
                });
            }
            Ok(out)
        });
        for r in per_window {
            rows.extend(r?);
        }
    }

    // Summaries and Welch tests against EchoPT per horizon.
    let methods: Vec<String> = predictors.iter().map(|p| p.name().to_string()).collect();
    let mut summary = Vec::new();
    for method in &methods {
        for &k in &cfg.horizons {
            let ccs: Vec<f64> = rows
                .iter()
                .filter(|r| &r.method == method && r.horizon == k)
                .map(|r| r.cc)
                .collect();
            let nrs: Vec<f64> = rows
                .iter()
                .filter(|r| &r.method == method && r.horizon == k && r.nrmsd.is_finite())
                .map(|r| r.nrmsd)
                .collect();
            let (cc_mean, cc_std) = summarize(&ccs)?;
            let (nrmsd_mean, nrmsd_std) = summarize(&nrs)?;
            let (p_cc, p_nr) = if method != "echopt" && methods.iter().any(|m| m == "echopt") {
                let echo_cc: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.method == "echopt" && r.horizon == k)
                    .map(|r| r.cc)
                    .collect();
                let echo_nr: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.method == "echopt" && r.horizon == k && r.nrmsd.is_finite())
                    .map(|r| r.nrmsd)
                    .collect();
                (
                    Some(welch_t_test(&ccs, &echo_cc)?.p),
                    Some(welch_t_test(&nrs, &echo_nr)?.p),
                )
            } else {
                (None, None)
            };
            summary.push(BenchSummary {
                method: method.clone(),
                horizon: k,
                cc_mean,
                cc_std,
                nrmsd_mean,
                nrmsd_std,
                p_cc_vs_echopt: p_cc,
                p_nrmsd_vs_echopt: p_nr,
            });
        }
    }

    Ok(BenchResult {
        config: cfg.clone(),
        rows,
        summary,
    })
}
