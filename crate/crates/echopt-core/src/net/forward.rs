//! Tape construction for the three-branch forward pass.

use crate::dataset::FrameStack;
use crate::error::{CoreError, Result};
use crate::sim::kinematics::VelocityCommand;
use crate::sim::sensor::Energyscape;
use crate::tensor::{Tape, Var};

use super::params::ModelParams;

/// Velocity command scaling so both components span roughly [-1, 1]:
/// the dataset generator draws v in [-0.3, 0.3] and omega in [-1, 1].
const V_SCALE: f64 = 1.0 / 0.3;
const W_SCALE: f64 = 1.0;

/// Flattens commands (oldest first) into the network's velocity features.
pub fn velocity_features(commands: &[VelocityCommand]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * commands.len());
    for c in commands {
        out.push(c.v_lin * V_SCALE);
        out.push(c.omega_r * W_SCALE);
    }
    out
}

/// A forward pass: the tape, the `[1, H, W]` output, the tape handle of
/// every learnable parameter (aligned with `params.tensors` indices),
/// and, in training mode, the batch-norm batch statistics.
///
/// `raw_output` is the head's value before the non-negativity relu; the
/// training loss targets it so cells clipped to zero keep a gradient.
/// `scale_used` is the factor applied to the input cells (and to the
/// target, by the trainer); predictions divide by it to return to
/// sensor units.
pub struct ForwardPass {
    pub tape: Tape,
    pub output: Var,
    pub raw_output: Var,
    pub param_vars: Vec<(usize, Var)>,
    pub bn_batch: Option<(Vec<f64>, Vec<f64>)>,
    pub scale_used: f64,
}

/// Echo energies span several decades with 1/r^2 spreading, so each
/// stack is normalized by its own RMS cell value (times the model's
/// `input_scale` multiplier). The network always sees unit-RMS inputs
/// regardless of how close the scene is.
pub fn stack_scale(params: &ModelParams, stack: &FrameStack) -> f64 {
    let mut sum_sq = 0.0f64;
    let mut count = 0usize;
    for f in &stack.frames {
        sum_sq += f.data.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>();
        count += f.data.len();
    }
    let rms = (sum_sq / count.max(1) as f64).sqrt();
    if rms > 0.0 {
        params.input_scale / rms
    } else {
        params.input_scale
    }
}

struct Ctx<'p> {
    tape: Tape,
    params: &'p ModelParams,
    used: Vec<(usize, Var)>,
}

impl<'p> Ctx<'p> {
    fn param(&mut self, name: &str) -> Result<Var> {
        let idx = self.params.idx(name)?;
        let t = &self.params.tensors[idx];
        let var = self.tape.leaf(t.data.clone(), &t.shape)?;
        if t.learnable {
            self.used.push((idx, var));
        }
        Ok(var)
    }

    fn linear(&mut self, x: Var, stem: &str) -> Result<Var> {
        let w = self.param(&format!("{stem}.w"))?;
        let b = self.param(&format!("{stem}.b"))?;
        let y = self.tape.matmul(x, w)?;
        self.tape.add_bias(y, b)
    }

    fn conv(&mut self, x: Var, stem: &str, stride: (usize, usize)) -> Result<Var> {
        let w = self.param(&format!("{stem}.w"))?;
        let b = self.param(&format!("{stem}.b"))?;
        self.tape.conv2d(x, w, b, stride)
    }
}

/// Builds the full forward graph for one stack. `training` selects
/// batch-norm mode; the target (when present in the stack) is not used
/// here, so the same pass serves prediction and training.
pub fn forward_stack(
    params: &ModelParams,
    stack: &FrameStack,
    training: bool,
) -> Result<ForwardPass> {
    let cfg = &params.cfg;
    stack.validate()?;
    if stack.frames.len() != cfg.n_frames {
        return Err(CoreError::ShapeMismatch {
            op: "forward_stack frames",
            lhs: vec![stack.frames.len()],
            rhs: vec![cfg.n_frames],
        });
    }
    let (h, w) = (cfg.num_ranges, cfg.num_azimuths);
    for f in &stack.frames {
        if f.num_ranges != h || f.num_azimuths != w {
            return Err(CoreError::ShapeMismatch {
                op: "forward_stack grid",
                lhs: f.shape(),
                rhs: vec![h, w],
            });
        }
    }

    let mut ctx = Ctx {
        tape: Tape::new(),
        params,
        used: Vec::new(),
    };

    // Input frames, normalized, stacked as channels: [n, H, W].
    let scale = stack_scale(params, stack);
    let mut frame_data = Vec::with_capacity(cfg.n_frames * h * w);
    for f in &stack.frames {
        frame_data.extend(f.data.iter().map(|&v| v as f64 * scale));
    }
    let frames = ctx.tape.leaf(frame_data, &[cfg.n_frames, h, w])?;

    let vel = velocity_features(&stack.commands);
    debug_assert_eq!(vel.len(), cfg.velocity_inputs);

    // ---- transformer branch ----
    let p = cfg.num_patches();
    let patches = ctx.tape.patchify(frames, cfg.patch_h, cfg.patch_w)?;
    let mut x = ctx.linear(patches, "embed")?;
    let pos = ctx.param("posembed")?;
    x = ctx.tape.add(x, pos)?;

    // Velocity features depth-concatenated onto every token.
    let vel_rows: Vec<f64> = (0..p).flat_map(|_| vel.iter().copied()).collect();
    let vel_tok = ctx.tape.leaf(vel_rows, &[p, cfg.velocity_inputs])?;
    x = ctx.tape.concat(&[x, vel_tok], 1)?;

    let d = cfg.qkv_dim;
    let dh = d / cfg.n_heads;
    let att_scale = 1.0 / (dh as f64).sqrt();
    for l in 0..cfg.n_layers {
        let pre = format!("tf{l}");
        let g1 = ctx.param(&format!("{pre}.ln1.g"))?;
        let b1 = ctx.param(&format!("{pre}.ln1.b"))?;
        let normed = ctx.tape.layer_norm(x, g1, b1, 1e-5)?;
        let q = ctx.linear(normed, &format!("{pre}.q"))?;
        let k = ctx.linear(normed, &format!("{pre}.k"))?;
        let v = ctx.linear(normed, &format!("{pre}.v"))?;
        let mut heads = Vec::with_capacity(cfg.n_heads);
        for hh in 0..cfg.n_heads {
            let qh = ctx.tape.slice(q, 1, hh * dh, dh)?;
            let kh = ctx.tape.slice(k, 1, hh * dh, dh)?;
            let vh = ctx.tape.slice(v, 1, hh * dh, dh)?;
            let scores = ctx.tape.matmul_nt(qh, kh)?;
            let scores = ctx.tape.scale(scores, att_scale);
            let attn = ctx.tape.softmax_lastdim(scores);
            heads.push(ctx.tape.matmul(attn, vh)?);
        }
        let merged = ctx.tape.concat(&heads, 1)?;
        let proj = ctx.linear(merged, &format!("{pre}.o"))?;
        x = ctx.tape.add(x, proj)?;

        let g2 = ctx.param(&format!("{pre}.ln2.g"))?;
        let b2 = ctx.param(&format!("{pre}.ln2.b"))?;
        let normed2 = ctx.tape.layer_norm(x, g2, b2, 1e-5)?;
        let f1 = ctx.linear(normed2, &format!("{pre}.ffn1"))?;
        let f1 = ctx.tape.relu(f1);
        let f2 = ctx.linear(f1, &format!("{pre}.ffn2"))?;
        x = ctx.tape.add(x, f2)?;
    }

    let gf = ctx.param("final_ln.g")?;
    let bf = ctx.param("final_ln.b")?;
    x = ctx.tape.layer_norm(x, gf, bf, 1e-5)?;

    let bn_g = ctx.param("bn.g")?;
    let bn_b = ctx.param("bn.b")?;
    // Statistics over the token axis in both modes: each forward sees a
    // single sample, so per-sample statistics are the only choice that
    // keeps training and inference computing the same function. Running
    // statistics are still maintained for the checkpoint.
    let (x, bn_mean, bn_var) = ctx.tape.batch_norm(x, bn_g, bn_b, None, 1e-5)?;

    let un_w = ctx.param("unembed.w")?;
    let unembedded = ctx.tape.matmul(x, un_w)?;
    let img_t = ctx
        .tape
        .unpatchify(unembedded, cfg.patch_h, cfg.patch_w, h, w)?;

    let t1 = ctx.conv(img_t, "tfconv1", (2, 2))?;
    let t1 = ctx.tape.relu(t1);
    let t2 = ctx.conv(t1, "tfconv2", (1, 1))?;
    let t2 = ctx.tape.relu(t2);

    // ---- conv branch over the stacked input frames ----
    let i1 = ctx.conv(frames, "imgconv1", (2, 2))?;
    let i1 = ctx.tape.relu(i1);
    let i2 = ctx.conv(i1, "imgconv2", (1, 1))?;
    let i2 = ctx.tape.relu(i2);

    // ---- velocity MLP branch ----
    let vel_in = ctx.tape.leaf(vel.clone(), &[1, cfg.velocity_inputs])?;
    let mut m = vel_in;
    let n_mlp = cfg.mlp_dims.len();
    for i in 0..n_mlp {
        m = ctx.linear(m, &format!("mlp{i}"))?;
        if i + 1 < n_mlp {
            m = ctx.tape.relu(m);
        }
    }
    let (mh, mw) = cfg.mlp_map;
    let vmap = ctx.tape.reshape(m, &[1, mh, mw])?;
    let vmap = ctx.tape.resize_bilinear(vmap, h / 2, w / 2)?;

    // ---- fusion at the conv branch's spatial size ----
    let fused = ctx.tape.concat(&[t2, i2, vmap], 0)?;
    let f1 = ctx.conv(fused, "fuse1", (1, 1))?;
    let f1 = ctx.tape.relu(f1);
    let f2 = ctx.conv(f1, "fuse2", (1, 1))?;
    let f2 = ctx.tape.relu(f2);

    let up_w = ctx.param("up.w")?;
    let up_b = ctx.param("up.b")?;
    let up = ctx.tape.transposed_conv2d(f2, up_w, up_b, (2, 2))?;
    let up = ctx.tape.relu(up);

    // The final convolution sees full resolution: the upsampled fusion,
    // the transformer image, and the raw input frames, so fine structure
    // and local denoising are not limited by the half-resolution path.
    let tail = ctx.tape.concat(&[up, img_t, frames], 0)?;
    let delta = ctx.conv(tail, "out", (1, 1))?;
    // The head predicts the change from the newest frame; anchoring on
    // the frame keeps the output relu's operand positive where energy
    // lives, so the single-channel head cannot die under sparse targets.
    let newest = ctx.tape.slice(frames, 0, cfg.n_frames - 1, 1)?;
    let raw = ctx.tape.add(delta, newest)?;
    let out = ctx.tape.relu(raw);

    Ok(ForwardPass {
        tape: ctx.tape,
        output: out,
        raw_output: raw,
        param_vars: ctx.used,
        bn_batch: if training { Some((bn_mean, bn_var)) } else { None },
        scale_used: scale,
    })
}

/// Runs the network in inference mode and reassembles an energyscape in
/// sensor units (the output is de-normalized by `1 / input_scale`).
pub fn predict_next(params: &ModelParams, stack: &FrameStack) -> Result<Energyscape> {
    let pass = forward_stack(params, stack, false)?;
    let out = pass.tape.value(pass.output);
    let last = stack.frames.last().expect("validated stack");
    let inv = 1.0 / pass.scale_used;
    let mut scape = Energyscape {
        data: out.iter().map(|&v| (v * inv) as f32).collect(),
        num_ranges: last.num_ranges,
        num_azimuths: last.num_azimuths,
        r_max: last.r_max,
        fov: last.fov,
        timestamp: last.timestamp + stack.dt(),
    };
    for v in scape.data.iter_mut() {
        if !v.is_finite() {
            return Err(CoreError::NonFinite("network output"));
        }
        *v = v.max(0.0);
    }
    Ok(scape)
}
