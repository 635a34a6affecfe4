//! Model parameter storage, initialization, and checkpointing.

use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::tensor::serialize::{read_checkpoint, write_checkpoint, NamedTensor};

use super::EchoPTConfig;

#[derive(Debug, Clone)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    /// Learnable tensors are counted, optimized, and gradient-carrying;
    /// batch-norm running statistics are stored but not learnable.
    pub learnable: bool,
    /// L2 regularization applies to weight matrices and kernels only.
    pub decay: bool,
}

impl ParamTensor {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// All named tensors of one model plus the input normalization scale
/// applied to energyscape cells before they enter the network.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub cfg: EchoPTConfig,
    pub tensors: Vec<ParamTensor>,
    pub input_scale: f64,
}

/// Sum of learnable tensor sizes; running statistics are excluded.
pub fn count_params(params: &ModelParams) -> usize {
    params
        .tensors
        .iter()
        .filter(|t| t.learnable)
        .map(ParamTensor::numel)
        .sum()
}

/// Allocates and initializes every branch of the architecture for `cfg`:
/// scaled-uniform fan-in weights, zero biases, unit norms.
pub fn build_model(cfg: &EchoPTConfig, seed: u64) -> Result<ModelParams> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors: Vec<ParamTensor> = Vec::new();

    fn xavier(
        rng: &mut ChaCha8Rng,
        name: &str,
        shape: &[usize],
        fan_in: usize,
        fan_out: usize,
    ) -> ParamTensor {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-a..a)).collect();
        ParamTensor {
            name: name.to_string(),
            shape: shape.to_vec(),
            data,
            learnable: true,
            decay: true,
        }
    }
    let constant = |name: &str, shape: &[usize], v: f64, learnable: bool| ParamTensor {
        name: name.to_string(),
        shape: shape.to_vec(),
        data: vec![v; shape.iter().product()],
        learnable,
        decay: false,
    };

    let p = cfg.num_patches();
    let d = cfg.qkv_dim;
    let e = cfg.embed_dim;
    let (kh, kw) = cfg.conv_kernel;
    let pix = cfg.patch_h * cfg.patch_w;

    tensors.push(xavier(
        &mut rng,
        "embed.w",
        &[cfg.patch_dim(), e],
        cfg.patch_dim(),
        e,
    ));
    tensors.push(constant("embed.b", &[e], 0.0, true));
    {
        // Positional embedding: small uniform, no weight decay.
        let a = 0.02;
        let data = (0..p * e).map(|_| rng.random_range(-a..a)).collect();
        tensors.push(ParamTensor {
            name: "posembed".into(),
            shape: vec![p, e],
            data,
            learnable: true,
            decay: false,
        });
    }

    for l in 0..cfg.n_layers {
        let pre = format!("tf{l}");
        tensors.push(constant(&format!("{pre}.ln1.g"), &[d], 1.0, true));
        tensors.push(constant(&format!("{pre}.ln1.b"), &[d], 0.0, true));
        for proj in ["q", "k", "v", "o"] {
            tensors.push(xavier(&mut rng, &format!("{pre}.{proj}.w"), &[d, d], d, d));
            tensors.push(constant(&format!("{pre}.{proj}.b"), &[d], 0.0, true));
        }
        tensors.push(constant(&format!("{pre}.ln2.g"), &[d], 1.0, true));
        tensors.push(constant(&format!("{pre}.ln2.b"), &[d], 0.0, true));
        tensors.push(xavier(
            &mut rng,
            &format!("{pre}.ffn1.w"),
            &[d, cfg.ffn_dim],
            d,
            cfg.ffn_dim,
        ));
        tensors.push(constant(&format!("{pre}.ffn1.b"), &[cfg.ffn_dim], 0.0, true));
        tensors.push(xavier(
            &mut rng,
            &format!("{pre}.ffn2.w"),
            &[cfg.ffn_dim, d],
            cfg.ffn_dim,
            d,
        ));
        tensors.push(constant(&format!("{pre}.ffn2.b"), &[d], 0.0, true));
    }

    tensors.push(constant("final_ln.g", &[d], 1.0, true));
    tensors.push(constant("final_ln.b", &[d], 0.0, true));
    tensors.push(constant("bn.g", &[d], 1.0, true));
    tensors.push(constant("bn.b", &[d], 0.0, true));
    tensors.push(constant("bn.running_mean", &[d], 0.0, false));
    tensors.push(constant("bn.running_var", &[d], 1.0, false));

    tensors.push(xavier(&mut rng, "unembed.w", &[d, pix], d, pix));

    let cc = &cfg.conv_channels;
    fn conv(
        rng: &mut ChaCha8Rng,
        name: &str,
        c_out: usize,
        c_in: usize,
        kh: usize,
        kw: usize,
    ) -> ParamTensor {
        xavier(
            rng,
            name,
            &[c_out, c_in, kh, kw],
            c_in * kh * kw,
            c_out * kh * kw,
        )
    }
    tensors.push(conv(&mut rng, "tfconv1.w", cc[0], 1, kh, kw));
    tensors.push(constant("tfconv1.b", &[cc[0]], 0.0, true));
    tensors.push(conv(&mut rng, "tfconv2.w", cc[1], cc[0], kh, kw));
    tensors.push(constant("tfconv2.b", &[cc[1]], 0.0, true));

    tensors.push(conv(&mut rng, "imgconv1.w", cc[2], cfg.n_frames, kh, kw));
    tensors.push(constant("imgconv1.b", &[cc[2]], 0.0, true));
    tensors.push(conv(&mut rng, "imgconv2.w", cc[3], cc[2], kh, kw));
    tensors.push(constant("imgconv2.b", &[cc[3]], 0.0, true));

    let mut widths = vec![cfg.velocity_inputs];
    widths.extend_from_slice(&cfg.mlp_dims);
    for (i, pair) in widths.windows(2).enumerate() {
        tensors.push(xavier(
            &mut rng,
            &format!("mlp{i}.w"),
            &[pair[0], pair[1]],
            pair[0],
            pair[1],
        ));
        tensors.push(constant(&format!("mlp{i}.b"), &[pair[1]], 0.0, true));
    }

    let fused_in = cc[1] + cc[3] + 1;
    tensors.push(conv(&mut rng, "fuse1.w", cc[4], fused_in, kh, kw));
    tensors.push(constant("fuse1.b", &[cc[4]], 0.0, true));
    tensors.push(conv(&mut rng, "fuse2.w", cc[5], cc[4], kh, kw));
    tensors.push(constant("fuse2.b", &[cc[5]], 0.0, true));

    // Transposed conv kernel equals its stride for exact 2x upsampling.
    tensors.push(xavier(
        &mut rng,
        "up.w",
        &[cc[5], cc[5], 2, 2],
        cc[5] * 4,
        cc[5] * 4,
    ));
    tensors.push(constant("up.b", &[cc[5]], 0.0, true));

    // The head sees the upsampled fusion, the transformer image, and
    // the raw input frames at full resolution. It starts at zero so the
    // untrained model predicts exactly its residual anchor (the newest
    // frame) instead of init noise.
    let head_in = cc[5] + 1 + cfg.n_frames;
    tensors.push(ParamTensor {
        name: "out.w".into(),
        shape: vec![1, head_in, kh, kw],
        data: vec![0.0; head_in * kh * kw],
        learnable: true,
        decay: true,
    });
    tensors.push(constant("out.b", &[1], 0.0, true));

    Ok(ModelParams {
        cfg: cfg.clone(),
        tensors,
        input_scale: 1.0,
    })
}

impl ModelParams {
    /// Empty parameter set (counts to zero).
    pub fn empty() -> Self {
        Self {
            cfg: EchoPTConfig::toy(),
            tensors: Vec::new(),
            input_scale: 1.0,
        }
    }

    pub fn idx(&self, name: &str) -> Result<usize> {
        self.tensors
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| CoreError::InvalidArgument(format!("no tensor named {name}")))
    }

    pub fn tensor(&self, name: &str) -> Result<&ParamTensor> {
        Ok(&self.tensors[self.idx(name)?])
    }

    pub fn save(&self, stem: &Path) -> Result<()> {
        let named: Vec<NamedTensor<'_>> = self
            .tensors
            .iter()
            .map(|t| NamedTensor {
                name: &t.name,
                shape: &t.shape,
                data: &t.data,
                learnable: t.learnable,
            })
            .collect();
        let meta = serde_json::json!({
            "config": self.cfg,
            "input_scale": self.input_scale,
        });
        write_checkpoint(stem, &named, meta)
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let (manifest, buffers) = read_checkpoint(stem)?;
        let cfg: EchoPTConfig = serde_json::from_value(manifest.meta["config"].clone())?;
        let input_scale = manifest.meta["input_scale"]
            .as_f64()
            .ok_or_else(|| CoreError::DataFormat("checkpoint missing input_scale".into()))?;
        let reference = build_model(&cfg, 0)?;
        let mut tensors = Vec::with_capacity(manifest.tensors.len());
        for (entry, data) in manifest.tensors.iter().zip(buffers) {
            let decay = reference
                .tensors
                .iter()
                .find(|t| t.name == entry.name)
                .map(|t| t.decay)
                .unwrap_or(false);
            tensors.push(ParamTensor {
                name: entry.name.clone(),
                shape: entry.shape.clone(),
                data,
                learnable: entry.learnable,
                decay,
            });
        }
        let loaded = Self {
            cfg,
            tensors,
            input_scale,
        };
        // A checkpoint must carry exactly the tensors the config implies.
        for t in &reference.tensors {
            let found = loaded.tensor(&t.name)?;
            if found.shape != t.shape {
                return Err(CoreError::ShapeMismatch {
                    op: "load_checkpoint",
                    lhs: found.shape.clone(),
                    rhs: t.shape.clone(),
                });
            }
        }
        Ok(loaded)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_params_count_zero() {
        assert_eq!(count_params(&ModelParams::empty()), 0);
    }

    #[test]
    fn single_matrix_plus_bias_counts() {
        let mut p = ModelParams::empty();
        p.tensors.push(ParamTensor {
            name: "w".into(),
            shape: vec![384, 384],
            data: vec![0.0; 384 * 384],
            learnable: true,
            decay: true,
        });
        p.tensors.push(ParamTensor {
            name: "b".into(),
            shape: vec![384],
            data: vec![0.0; 384],
            learnable: true,
            decay: false,
        });
        assert_eq!(count_params(&p), 147_840);
    }

    #[test]
    fn running_stats_not_counted() {
        let params = build_model(&EchoPTConfig::toy(), 1).unwrap();
        let total = count_params(&params);
        let with_stats: usize = params.tensors.iter().map(ParamTensor::numel).sum();
        assert_eq!(with_stats - total, 2 * params.cfg.qkv_dim);
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = std::env::temp_dir().join("echopt_params_rt");
        std::fs::create_dir_all(&dir).unwrap();
        let stem = dir.join("toy");
        let mut params = build_model(&EchoPTConfig::toy(), 5).unwrap();
        params.input_scale = 0.25;
        params.save(&stem).unwrap();
        let back = ModelParams::load(&stem).unwrap();
        assert_eq!(back.cfg, params.cfg);
        assert_eq!(back.input_scale, 0.25);
        assert_eq!(back.tensors.len(), params.tensors.len());
        for (a, b) in params.tensors.iter().zip(&back.tensors) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.shape, b.shape);
            assert_eq!(a.learnable, b.learnable);
            for (x, y) in a.data.iter().zip(&b.data) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
    }

    #[test]
    fn deterministic_init_per_seed() {
        let a = build_model(&EchoPTConfig::toy(), 9).unwrap();
        let b = build_model(&EchoPTConfig::toy(), 9).unwrap();
        let c = build_model(&EchoPTConfig::toy(), 10).unwrap();
        assert_eq!(a.tensors[0].data, b.tensors[0].data);
        assert_ne!(a.tensors[0].data, c.tensors[0].data);
    }
}
