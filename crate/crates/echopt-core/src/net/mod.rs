//! The EchoPT network: a transformer branch over patch-embedded frame
//! stacks, a convolutional branch over the stacked frames, and an MLP
//! branch over the velocity commands, fused by a final convolutional
//! stack into one predicted energyscape.

mod forward;
mod paper;
mod params;
mod train;

pub use forward::{forward_stack, predict_next, velocity_features};
pub use paper::{paper_inventory, PAPER_TRANSFORMER_PARAMS};
pub use params::{build_model, count_params, ModelParams, ParamTensor};
pub use train::{
    full_model_grad_check, sample_loss_and_grads, train, validation_loss,
    EpochStats, OptimSettings, TrainReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Architecture dimensions. The attention width is the embedding width
/// plus the velocity features, because the velocity scalars are
/// depth-concatenated onto every patch token after positional embedding.
///
/// `conv_channels` holds six entries: two for the conv stack after the
/// transformer's unembedding, two for the conv branch over the input
/// frames, and two for the fusion stack. `mlp_dims` are the velocity-MLP
/// layer widths, the last of which must equal `mlp_map.0 * mlp_map.1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoPTConfig {
    pub num_ranges: usize,
    pub num_azimuths: usize,
    pub n_frames: usize,
    pub patch_h: usize,
    pub patch_w: usize,
    pub embed_dim: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub qkv_dim: usize,
    pub ffn_dim: usize,
    pub conv_channels: Vec<usize>,
    pub mlp_dims: Vec<usize>,
    pub mlp_map: (usize, usize),
    pub conv_kernel: (usize, usize),
    pub velocity_inputs: usize,
}

impl EchoPTConfig {
    /// Desk-scale configuration, trainable in minutes on a CPU.
    pub fn toy() -> Self {
        Self {
            num_ranges: 128,
            num_azimuths: 64,
            n_frames: 3,
            patch_h: 16,
            patch_w: 8,
            embed_dim: 64,
            n_layers: 2,
            n_heads: 4,
            qkv_dim: 72,
            ffn_dim: 128,
            conv_channels: vec![8, 8, 8, 16, 8, 8],
            mlp_dims: vec![10, 10, 200],
            mlp_map: (20, 10),
            conv_kernel: (3, 5),
            velocity_inputs: 8,
        }
    }

    /// The published model dimensions: patch 25x5, embedding 376,
    /// 8 transformer layers with 6 heads over 384 channels, FFN 500.
    /// The source image grid is not part of the published dimension
    /// table; a nominal patch-divisible grid stands in for it.
    pub fn paper_scale() -> Self {
        Self {
            num_ranges: 500,
            num_azimuths: 100,
            n_frames: 3,
            patch_h: 25,
            patch_w: 5,
            embed_dim: 376,
            n_layers: 8,
            n_heads: 6,
            qkv_dim: 384,
            ffn_dim: 500,
            conv_channels: vec![16, 32, 16, 16, 16, 4],
            mlp_dims: vec![10, 10, 200],
            mlp_map: (20, 10),
            conv_kernel: (20, 5),
            velocity_inputs: 8,
        }
    }

    pub fn num_patches(&self) -> usize {
        (self.num_ranges / self.patch_h) * (self.num_azimuths / self.patch_w)
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_h * self.patch_w * self.n_frames
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(CoreError::InvalidConfig(msg));
        if self.num_ranges == 0 || self.num_azimuths == 0 {
            return err("zero grid".into());
        }
        if self.patch_h == 0
            || self.patch_w == 0
            || self.num_ranges % self.patch_h != 0
            || self.num_azimuths % self.patch_w != 0
        {
            return err(format!(
                "grid {}x{} not divisible by patch {}x{}",
                self.num_ranges, self.num_azimuths, self.patch_h, self.patch_w
            ));
        }
        if self.velocity_inputs != 2 * (self.n_frames + 1) {
            return err(format!(
                "velocity_inputs {} != 2 * (n_frames {} + 1)",
                self.velocity_inputs, self.n_frames
            ));
        }
        if self.qkv_dim != self.embed_dim + self.velocity_inputs {
            return err(format!(
                "qkv_dim {} != embed_dim {} + velocity_inputs {}",
                self.qkv_dim, self.embed_dim, self.velocity_inputs
            ));
        }
        if self.n_heads == 0 || self.qkv_dim % self.n_heads != 0 {
            return err(format!(
                "qkv_dim {} not divisible by {} heads",
                self.qkv_dim, self.n_heads
            ));
        }
        if self.n_layers == 0 || self.ffn_dim == 0 {
            return err("empty transformer".into());
        }
        if self.conv_channels.len() != 6 || self.conv_channels.iter().any(|&c| c == 0) {
            return err("conv_channels must hold 6 nonzero entries".into());
        }
        if self.mlp_dims.is_empty() || *self.mlp_dims.last().unwrap() != self.mlp_map.0 * self.mlp_map.1
        {
            return err(format!(
                "mlp_dims must end at mlp_map {}x{}",
                self.mlp_map.0, self.mlp_map.1
            ));
        }
        if self.conv_kernel.0 == 0 || self.conv_kernel.1 == 0 {
            return err("zero conv kernel".into());
        }
        // The strided branches halve the grid, the fusion stack doubles
        // it back; both need even dimensions.
        if self.num_ranges % 2 != 0 || self.num_azimuths % 2 != 0 {
            return err("grid dimensions must be even".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_and_paper_configs_validate() {
        EchoPTConfig::toy().validate().unwrap();
        EchoPTConfig::paper_scale().validate().unwrap();
        assert_eq!(EchoPTConfig::toy().num_patches(), 64);
        // Published widths: 376 embedding + 8 velocities = 384 attention.
        let p = EchoPTConfig::paper_scale();
        assert_eq!(p.embed_dim + p.velocity_inputs, 384);
    }

    #[test]
    fn bad_configs_rejected() {
        let mut c = EchoPTConfig::toy();
        c.patch_h = 15;
        assert!(c.validate().is_err());
        let mut c = EchoPTConfig::toy();
        c.qkv_dim = 64;
        assert!(c.validate().is_err());
        let mut c = EchoPTConfig::toy();
        c.n_heads = 5;
        assert!(c.validate().is_err());
        let mut c = EchoPTConfig::toy();
        c.velocity_inputs = 6;
        assert!(c.validate().is_err());
    }
}
