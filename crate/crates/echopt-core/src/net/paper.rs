//! The published full-scale dimension inventory.
//!
//! The published table aggregates some rows (a single layer-norm entry
//! across the whole network, shared conv bias entries) and does not state
//! the source image grid, so this inventory is a direct transcription
//! used for parameter accounting; it does not wire a runnable forward
//! pass. The desk-scale architecture in [`super::build_model`] is the
//! runnable analogue.

use super::params::{ModelParams, ParamTensor};
use super::EchoPTConfig;

/// Learnable parameters inside the eight transformer layers.
pub const PAPER_TRANSFORMER_PARAMS: usize = 7_809_952;

/// Every named tensor of the full-scale model with its published shape.
pub fn paper_inventory() -> Vec<(String, Vec<usize>)> {
    let mut rows: Vec<(String, Vec<usize>)> = vec![
        ("embedding.w".into(), vec![25, 5, 3, 376]),
        ("embedding.b".into(), vec![376]),
        ("posembed_input".into(), vec![376, 2000]),
    ];
    for l in 1..=8 {
        for proj in ["query", "key", "value", "output"] {
            rows.push((format!("tf{l}.{proj}.w"), vec![384, 384]));
        }
        for proj in ["query", "key", "value", "output"] {
            rows.push((format!("tf{l}.{proj}.b"), vec![384]));
        }
        rows.push((format!("tf{l}.conv1d_projection.w"), vec![1, 384, 500]));
        rows.push((format!("tf{l}.conv1d_projection.b"), vec![500]));
        rows.push((format!("tf{l}.conv1d.w"), vec![1, 500, 384]));
        rows.push((format!("tf{l}.conv1d.b"), vec![384]));
    }
    rows.extend([
        ("layernorms.offset".to_string(), vec![3488]),
        ("layernorms.scale".to_string(), vec![3488]),
        ("batchnorm.offset".to_string(), vec![384]),
        ("batchnorm.scale".to_string(), vec![384]),
        ("unembed.w".to_string(), vec![384, 125]),
        ("conv.w1".to_string(), vec![20, 5, 1, 16]),
        ("conv.w2".to_string(), vec![20, 5, 16, 32]),
        ("conv.w3".to_string(), vec![20, 5, 3, 16]),
        ("conv.w4".to_string(), vec![20, 5, 65, 16]),
        ("conv.b1".to_string(), vec![16]),
        ("conv.b2".to_string(), vec![32]),
        ("tconv.w1".to_string(), vec![20, 5, 16, 16]),
        ("tconv.w2".to_string(), vec![20, 5, 4, 16]),
        ("tconv.b1".to_string(), vec![16]),
        ("tconv.b2".to_string(), vec![4]),
        ("conv2.w".to_string(), vec![20, 5, 4]),
        ("conv2.b".to_string(), vec![1]),
        ("fc.w".to_string(), vec![10, 8]),
        ("fc.b".to_string(), vec![10]),
        ("fc_1.w".to_string(), vec![10, 10]),
        ("fc_1.b".to_string(), vec![10]),
        ("fc_2.w".to_string(), vec![200, 10]),
        ("fc_2.b".to_string(), vec![200]),
    ]);
    rows
}

impl ModelParams {
    /// Builds the model at the published full-scale dimensions, for
    /// parameter accounting. All tensors are zero-initialized.
    pub fn paper_scale() -> Self {
        let tensors = paper_inventory()
            .into_iter()
            .map(|(name, shape)| {
                let n: usize = shape.iter().product();
                ParamTensor {
                    name,
                    shape,
                    data: vec![0.0; n],
                    learnable: true,
                    decay: false,
                }
            })
            .collect();
        Self {
            cfg: EchoPTConfig::paper_scale(),
            tensors,
            input_scale: 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::params::count_params;
    use super::*;

    #[test]
    fn transformer_layer_block_matches_published_subtotal() {
        let per_layer: usize = 4 * 384 * 384 + 4 * 384 + 384 * 500 + 500 + 500 * 384 + 384;
        assert_eq!(8 * per_layer, PAPER_TRANSFORMER_PARAMS);
        let params = ModelParams::paper_scale();
        let tf_total: usize = params
            .tensors
            .iter()
            .filter(|t| t.name.starts_with("tf"))
            .map(ParamTensor::numel)
            .sum();
        assert_eq!(tf_total, PAPER_TRANSFORMER_PARAMS);
    }

    #[test]
    fn full_scale_count_is_near_nine_million() {
        let total = count_params(&ModelParams::paper_scale());
        let rel = (total as f64 - 9.0e6).abs() / 9.0e6;
        assert!(rel < 0.10, "total {total}");
    }
}
