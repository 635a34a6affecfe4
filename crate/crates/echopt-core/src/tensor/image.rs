//! Spatial ops on `[channels, height, width]` tensors: convolution,
//! transposed convolution, bilinear resize, and patch (dis)assembly.

use crate::error::{CoreError, Result};

use super::{Op, Tape, Var};

/// Saved geometry for conv and transposed-conv backward passes.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvSpec {
    pub c_in: usize,
    pub c_out: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub out_h: usize,
    pub out_w: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ResizeSpec {
    pub c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl Tape {
    /// 2D convolution with explicit "same" zero padding.
    ///
    /// `x [c_in, h, w]`, `weight [c_out, c_in, kh, kw]`, `bias [c_out]`.
    /// Output is `[c_out, ceil(h/sh), ceil(w/sw)]`.
    pub fn conv2d(
        &mut self,
        x: Var,
        weight: Var,
        bias: Var,
        stride: (usize, usize),
    ) -> Result<Var> {
        let xs = self.nodes[x.0].shape.clone();
        let ws = self.nodes[weight.0].shape.clone();
        if xs.len() != 3 || ws.len() != 4 || ws[1] != xs[0] {
            return Err(CoreError::ShapeMismatch {
                op: "conv2d",
                lhs: xs,
                rhs: ws,
            });
        }
        let (c_in, h, w) = (xs[0], xs[1], xs[2]);
        let (c_out, kh, kw) = (ws[0], ws[2], ws[3]);
        if self.nodes[bias.0].shape != [c_out] {
            return Err(CoreError::ShapeMismatch {
                op: "conv2d bias",
                lhs: self.nodes[bias.0].shape.clone(),
                rhs: vec![c_out],
            });
        }
        let (sh, sw) = stride;
        if sh == 0 || sw == 0 {
            return Err(CoreError::InvalidArgument("conv2d zero stride".into()));
        }
        let out_h = h.div_ceil(sh);
        let out_w = w.div_ceil(sw);
        let pad_h = ((out_h - 1) * sh + kh).saturating_sub(h);
        let pad_w = ((out_w - 1) * sw + kw).saturating_sub(w);
        let spec = ConvSpec {
            c_in,
            c_out,
            h,
            w,
            kh,
            kw,
            sh,
            sw,
            pad_top: pad_h / 2,
            pad_left: pad_w / 2,
            out_h,
            out_w,
        };

        let mut out = vec![0.0; c_out * out_h * out_w];
        {
            let xd = &self.nodes[x.0].data;
            let wd = &self.nodes[weight.0].data;
            let bd = &self.nodes[bias.0].data;
            for o in 0..c_out {
                let plane = &mut out[o * out_h * out_w..(o + 1) * out_h * out_w];
                plane.fill(bd[o]);
                for c in 0..c_in {
                    let x_plane = &xd[c * h * w..(c + 1) * h * w];
                    for u in 0..kh {
                        for v in 0..kw {
                            let wv = wd[((o * c_in + c) * kh + u) * kw + v];
                            if wv == 0.0 {
                                continue;
                            }
                            accumulate_conv_row(plane, x_plane, wv, &spec, u, v);
                        }
                    }
                }
            }
        }
        Ok(self.push(
            vec![c_out, out_h, out_w],
            out,
            Op::Conv2d {
                x: x.0,
                w: weight.0,
                b: bias.0,
                spec,
            },
        ))
    }

    /// Transposed 2D convolution (upsampling).
    ///
    /// `x [c_in, h, w]`, `weight [c_in, c_out, kh, kw]`, `bias [c_out]`.
    /// Output is `[c_out, (h-1)*sh + kh, (w-1)*sw + kw]`; with `kh = sh`
    /// and `kw = sw` this is an exact integer upsampling.
    pub fn transposed_conv2d(
        &mut self,
        x: Var,
        weight: Var,
        bias: Var,
        stride: (usize, usize),
    ) -> Result<Var> {
        let xs = self.nodes[x.0].shape.clone();
        let ws = self.nodes[weight.0].shape.clone();
        if xs.len() != 3 || ws.len() != 4 || ws[0] != xs[0] {
            return Err(CoreError::ShapeMismatch {
                op: "transposed_conv2d",
                lhs: xs,
                rhs: ws,
            });
        }
        let (c_in, h, w) = (xs[0], xs[1], xs[2]);
        let (c_out, kh, kw) = (ws[1], ws[2], ws[3]);
        if self.nodes[bias.0].shape != [c_out] {
            return Err(CoreError::ShapeMismatch {
                op: "transposed_conv2d bias",
                lhs: self.nodes[bias.0].shape.clone(),
                rhs: vec![c_out],
            });
        }
        let (sh, sw) = stride;
        if sh == 0 || sw == 0 {
            return Err(CoreError::InvalidArgument(
                "transposed_conv2d zero stride".into(),
            ));
        }
        let out_h = (h - 1) * sh + kh;
        let out_w = (w - 1) * sw + kw;
        let spec = ConvSpec {
            c_in,
            c_out,
            h,
            w,
            kh,
            kw,
            sh,
            sw,
            pad_top: 0,
            pad_left: 0,
            out_h,
            out_w,
        };

        let mut out = vec![0.0; c_out * out_h * out_w];
        {
            let xd = &self.nodes[x.0].data;
            let wd = &self.nodes[weight.0].data;
            let bd = &self.nodes[bias.0].data;
            for o in 0..c_out {
                out[o * out_h * out_w..(o + 1) * out_h * out_w].fill(bd[o]);
            }
            for c in 0..c_in {
                let x_plane = &xd[c * h * w..(c + 1) * h * w];
                for o in 0..c_out {
                    let plane = &mut out[o * out_h * out_w..(o + 1) * out_h * out_w];
                    for u in 0..kh {
                        for v in 0..kw {
                            let wv = wd[((c * c_out + o) * kh + u) * kw + v];
                            if wv == 0.0 {
                                continue;
                            }
                            for i in 0..h {
                                let orow = (i * sh + u) * out_w;
                                let xrow = i * w;
                                for j in 0..w {
                                    plane[orow + j * sw + v] += wv * x_plane[xrow + j];
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(self.push(
            vec![c_out, out_h, out_w],
            out,
            Op::TransposedConv2d {
                x: x.0,
                w: weight.0,
                b: bias.0,
                spec,
            },
        ))
    }

    /// Bilinear resize of `x [c, h, w]` to `[c, out_h, out_w]`
    /// (half-pixel centers, clamped at the borders).
    pub fn resize_bilinear(&mut self, x: Var, out_h: usize, out_w: usize) -> Result<Var> {
        let xs = self.nodes[x.0].shape.clone();
        if xs.len() != 3 || out_h == 0 || out_w == 0 {
            return Err(CoreError::ShapeMismatch {
                op: "resize_bilinear",
                lhs: xs,
                rhs: vec![out_h, out_w],
            });
        }
        let spec = ResizeSpec {
            c: xs[0],
            in_h: xs[1],
            in_w: xs[2],
            out_h,
            out_w,
        };
        let (ys, xsamp) = resize_weights(&spec);
        let xd = &self.nodes[x.0].data;
        let mut out = vec![0.0; spec.c * out_h * out_w];
        for c in 0..spec.c {
            let plane = &xd[c * spec.in_h * spec.in_w..(c + 1) * spec.in_h * spec.in_w];
            let oplane = &mut out[c * out_h * out_w..(c + 1) * out_h * out_w];
            for i in 0..out_h {
                let (y0, y1, fy) = ys[i];
                for j in 0..out_w {
                    let (x0, x1, fx) = xsamp[j];
                    let v = (1.0 - fy)
                        * ((1.0 - fx) * plane[y0 * spec.in_w + x0]
                            + fx * plane[y0 * spec.in_w + x1])
                        + fy * ((1.0 - fx) * plane[y1 * spec.in_w + x0]
                            + fx * plane[y1 * spec.in_w + x1]);
                    oplane[i * out_w + j] = v;
                }
            }
        }
        Ok(self.push(
            vec![spec.c, out_h, out_w],
            out,
            Op::ResizeBilinear { x: x.0, spec },
        ))
    }

    /// Splits `x [c, h, w]` into non-overlapping `ph x pw` patches:
    /// output `[p, ph*pw*c]` with patches row-major over the patch grid
    /// and elements ordered (py, px, c).
    pub fn patchify(&mut self, x: Var, ph: usize, pw: usize) -> Result<Var> {
        let xs = self.nodes[x.0].shape.clone();
        if xs.len() != 3 || ph == 0 || pw == 0 || xs[1] % ph != 0 || xs[2] % pw != 0 {
            return Err(CoreError::ShapeMismatch {
                op: "patchify",
                lhs: xs,
                rhs: vec![ph, pw],
            });
        }
        let (c_n, h, w) = (xs[0], xs[1], xs[2]);
        let (gh, gw) = (h / ph, w / pw);
        let p = gh * gw;
        let dim = ph * pw * c_n;
        let xd = &self.nodes[x.0].data;
        let mut out = vec![0.0; p * dim];
        for gy in 0..gh {
            for gx in 0..gw {
                let patch = (gy * gw + gx) * dim;
                for py in 0..ph {
                    for px in 0..pw {
                        let base = patch + (py * pw + px) * c_n;
                        for c in 0..c_n {
                            out[base + c] =
                                xd[c * h * w + (gy * ph + py) * w + gx * pw + px];
                        }
                    }
                }
            }
        }
        Ok(self.push(vec![p, dim], out, Op::Patchify { x: x.0, ph, pw }))
    }

    /// Reassembles per-patch pixel vectors `[p, ph*pw]` into a one-channel
    /// image `[1, h, w]`; inverse of the spatial part of [`Tape::patchify`].
    pub fn unpatchify(&mut self, x: Var, ph: usize, pw: usize, h: usize, w: usize) -> Result<Var> {
        let xs = self.nodes[x.0].shape.clone();
        if xs.len() != 2
            || ph == 0
            || pw == 0
            || h % ph != 0
            || w % pw != 0
            || xs[0] != (h / ph) * (w / pw)
            || xs[1] != ph * pw
        {
            return Err(CoreError::ShapeMismatch {
                op: "unpatchify",
                lhs: xs,
                rhs: vec![h, w, ph, pw],
            });
        }
        let gw = w / pw;
        let xd = &self.nodes[x.0].data;
        let mut out = vec![0.0; h * w];
        for (p, patch) in xd.chunks_exact(ph * pw).enumerate() {
            let gy = p / gw;
            let gx = p % gw;
            for py in 0..ph {
                for px in 0..pw {
                    out[(gy * ph + py) * w + gx * pw + px] = patch[py * pw + px];
                }
            }
        }
        Ok(self.push(
            vec![1, h, w],
            out,
            Op::Unpatchify {
                x: x.0,
                ph,
                pw,
                h,
                w,
            },
        ))
    }
}

/// Adds `wv * x` over the valid output positions of one kernel tap.
/// Unit column stride runs on contiguous slices so the loop vectorizes.
fn accumulate_conv_row(
    out_plane: &mut [f64],
    x_plane: &[f64],
    wv: f64,
    spec: &ConvSpec,
    u: usize,
    v: usize,
) {
    let (j_lo, j_hi) = tap_range(spec.out_w, spec.w, spec.sw, spec.pad_left, v);
    if j_lo >= j_hi {
        return;
    }
    for i in 0..spec.out_h {
        let y = (i * spec.sh + u) as i64 - spec.pad_top as i64;
        if y < 0 || y >= spec.h as i64 {
            continue;
        }
        let xrow = y as usize * spec.w;
        let orow = i * spec.out_w;
        if spec.sw == 1 {
            let xc0 = (j_lo + v) - spec.pad_left;
            let src = &x_plane[xrow + xc0..xrow + xc0 + (j_hi - j_lo)];
            let dst = &mut out_plane[orow + j_lo..orow + j_hi];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += wv * s;
            }
        } else {
            for j in j_lo..j_hi {
                let xc = (j * spec.sw + v) - spec.pad_left;
                out_plane[orow + j] += wv * x_plane[xrow + xc];
            }
        }
    }
}

/// Output-column range for which `j*sw + v - pad` lies inside `[0, w)`.
fn tap_range(out_w: usize, w: usize, sw: usize, pad: usize, v: usize) -> (usize, usize) {
    let lo = if v >= pad { 0 } else { (pad - v).div_ceil(sw) };
    let hi_num = (w + pad) as i64 - v as i64; // exclusive numerator
    if hi_num <= 0 {
        return (0, 0);
    }
    let hi = ((hi_num as usize - 1) / sw + 1).min(out_w);
    (lo.min(hi), hi)
}

pub(crate) fn conv2d_backward(
    tape: &Tape,
    x: usize,
    w: usize,
    b: usize,
    spec: &ConvSpec,
    grad: &[f64],
    adj: &mut [Vec<f64>],
) {
    let xd = &tape.nodes[x].data;
    let wd = &tape.nodes[w].data;
    for o in 0..spec.c_out {
        let g: f64 = grad[o * spec.out_h * spec.out_w..(o + 1) * spec.out_h * spec.out_w]
            .iter()
            .sum();
        adj[b][o] += g;
    }
    let mut dx = std::mem::take(&mut adj[x]);
    let mut dw = std::mem::take(&mut adj[w]);
    for o in 0..spec.c_out {
        let gplane = &grad[o * spec.out_h * spec.out_w..(o + 1) * spec.out_h * spec.out_w];
        for c in 0..spec.c_in {
            let x_plane = &xd[c * spec.h * spec.w..(c + 1) * spec.h * spec.w];
            let dx_plane = &mut dx[c * spec.h * spec.w..(c + 1) * spec.h * spec.w];
            for u in 0..spec.kh {
                for v in 0..spec.kw {
                    let wv = wd[((o * spec.c_in + c) * spec.kh + u) * spec.kw + v];
                    let mut dw_acc = 0.0;
                    let (j_lo, j_hi) = tap_range(spec.out_w, spec.w, spec.sw, spec.pad_left, v);
                    if j_lo >= j_hi {
                        continue;
                    }
                    for i in 0..spec.out_h {
                        let y = (i * spec.sh + u) as i64 - spec.pad_top as i64;
                        if y < 0 || y >= spec.h as i64 {
                            continue;
                        }
                        let xrow = y as usize * spec.w;
                        let orow = i * spec.out_w;
                        if spec.sw == 1 {
                            let xc0 = (j_lo + v) - spec.pad_left;
                            let n = j_hi - j_lo;
                            let gs = &gplane[orow + j_lo..orow + j_lo + n];
                            let xs = &x_plane[xrow + xc0..xrow + xc0 + n];
                            let dxs = &mut dx_plane[xrow + xc0..xrow + xc0 + n];
                            for k in 0..n {
                                let g = gs[k];
                                dxs[k] += g * wv;
                                dw_acc += g * xs[k];
                            }
                        } else {
                            for j in j_lo..j_hi {
                                let xc = (j * spec.sw + v) - spec.pad_left;
                                let g = gplane[orow + j];
                                dx_plane[xrow + xc] += g * wv;
                                dw_acc += g * x_plane[xrow + xc];
                            }
                        }
                    }
                    dw[((o * spec.c_in + c) * spec.kh + u) * spec.kw + v] += dw_acc;
                }
            }
        }
    }
    adj[x] = dx;
    adj[w] = dw;
}

pub(crate) fn tconv2d_backward(
    tape: &Tape,
    x: usize,
    w: usize,
    b: usize,
    spec: &ConvSpec,
    grad: &[f64],
    adj: &mut [Vec<f64>],
) {
    let xd = &tape.nodes[x].data;
    let wd = &tape.nodes[w].data;
    for o in 0..spec.c_out {
        let g: f64 = grad[o * spec.out_h * spec.out_w..(o + 1) * spec.out_h * spec.out_w]
            .iter()
            .sum();
        adj[b][o] += g;
    }
    let mut dx = std::mem::take(&mut adj[x]);
    let mut dw = std::mem::take(&mut adj[w]);
    for c in 0..spec.c_in {
        let x_plane = &xd[c * spec.h * spec.w..(c + 1) * spec.h * spec.w];
        let dx_plane = &mut dx[c * spec.h * spec.w..(c + 1) * spec.h * spec.w];
        for o in 0..spec.c_out {
            let gplane = &grad[o * spec.out_h * spec.out_w..(o + 1) * spec.out_h * spec.out_w];
            for u in 0..spec.kh {
                for v in 0..spec.kw {
                    let wv = wd[((c * spec.c_out + o) * spec.kh + u) * spec.kw + v];
                    let mut dw_acc = 0.0;
                    for i in 0..spec.h {
                        let orow = (i * spec.sh + u) * spec.out_w;
                        let xrow = i * spec.w;
                        for j in 0..spec.w {
                            let g = gplane[orow + j * spec.sw + v];
                            dx_plane[xrow + j] += g * wv;
                            dw_acc += g * x_plane[xrow + j];
                        }
                    }
                    dw[((c * spec.c_out + o) * spec.kh + u) * spec.kw + v] += dw_acc;
                }
            }
        }
    }
    adj[x] = dx;
    adj[w] = dw;
}

fn resize_weights(
    spec: &ResizeSpec,
) -> (Vec<(usize, usize, f64)>, Vec<(usize, usize, f64)>) {
    let axis = |n_in: usize, n_out: usize| -> Vec<(usize, usize, f64)> {
        (0..n_out)
            .map(|i| {
                let src = ((i as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5)
                    .clamp(0.0, (n_in - 1) as f64);
                let i0 = src.floor() as usize;
                let f = src - i0 as f64;
                let i1 = (i0 + 1).min(n_in - 1);
                (i0, i1, f)
            })
            .collect()
    };
    (axis(spec.in_h, spec.out_h), axis(spec.in_w, spec.out_w))
}

pub(crate) fn resize_backward(x: usize, spec: &ResizeSpec, grad: &[f64], adj: &mut [Vec<f64>]) {
    let (ys, xsamp) = resize_weights(spec);
    let dx = &mut adj[x];
    for c in 0..spec.c {
        let dplane = &mut dx[c * spec.in_h * spec.in_w..(c + 1) * spec.in_h * spec.in_w];
        let gplane = &grad[c * spec.out_h * spec.out_w..(c + 1) * spec.out_h * spec.out_w];
        for i in 0..spec.out_h {
            let (y0, y1, fy) = ys[i];
            for j in 0..spec.out_w {
                let (x0, x1, fx) = xsamp[j];
                let g = gplane[i * spec.out_w + j];
                dplane[y0 * spec.in_w + x0] += g * (1.0 - fy) * (1.0 - fx);
                dplane[y0 * spec.in_w + x1] += g * (1.0 - fy) * fx;
                dplane[y1 * spec.in_w + x0] += g * fy * (1.0 - fx);
                dplane[y1 * spec.in_w + x1] += g * fy * fx;
            }
        }
    }
}

pub(crate) fn patchify_backward(
    tape: &Tape,
    x: usize,
    ph: usize,
    pw: usize,
    grad: &[f64],
    adj: &mut [Vec<f64>],
) {
    let xs = &tape.nodes[x].shape;
    let (c_n, h, w) = (xs[0], xs[1], xs[2]);
    let gw = w / pw;
    let dim = ph * pw * c_n;
    let dx = &mut adj[x];
    for (p, gpatch) in grad.chunks_exact(dim).enumerate() {
        let gy = p / gw;
        let gx = p % gw;
        for py in 0..ph {
            for px in 0..pw {
                let base = (py * pw + px) * c_n;
                for c in 0..c_n {
                    dx[c * h * w + (gy * ph + py) * w + gx * pw + px] += gpatch[base + c];
                }
            }
        }
    }
}

pub(crate) fn unpatchify_backward(
    x: usize,
    ph: usize,
    pw: usize,
    _h: usize,
    w: usize,
    grad: &[f64],
    adj: &mut [Vec<f64>],
) {
    let gw = w / pw;
    let dx = &mut adj[x];
    for p in 0..dx.len() / (ph * pw) {
        let gy = p / gw;
        let gx = p % gw;
        let patch = &mut dx[p * ph * pw..(p + 1) * ph * pw];
        for py in 0..ph {
            for px in 0..pw {
                patch[py * pw + px] += grad[(gy * ph + py) * w + gx * pw + px];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv2d_same_padding_shape_and_value() {
        let mut t = Tape::new();
        // 1x3x3 input, 1x1x3x3 averaging-ish kernel
        let x = t
            .leaf(
                vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0],
                &[1, 3, 3],
            )
            .unwrap();
        let w = t.leaf(vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], &[1, 1, 3, 3]).unwrap();
        let b = t.leaf(vec![0.5], &[1]).unwrap();
        let y = t.conv2d(x, w, b, (1, 1)).unwrap();
        assert_eq!(t.shape(y), &[1, 3, 3]);
        // Center tap only: output = input + bias.
        for i in 0..9 {
            assert!((t.value(y)[i] - (t.value(x)[i] + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn conv2d_stride_two_shape() {
        let mut t = Tape::new();
        let x = t.leaf(vec![0.0; 2 * 8 * 6], &[2, 8, 6]).unwrap();
        let w = t.leaf(vec![0.1; 3 * 2 * 3 * 3], &[3, 2, 3, 3]).unwrap();
        let b = t.leaf(vec![0.0; 3], &[3]).unwrap();
        let y = t.conv2d(x, w, b, (2, 2)).unwrap();
        assert_eq!(t.shape(y), &[3, 4, 3]);
    }

    #[test]
    fn transposed_conv_upsamples_exactly() {
        let mut t = Tape::new();
        let x = t.leaf(vec![1.0, 2.0, 3.0, 4.0], &[1, 2, 2]).unwrap();
        // kernel 2x2 of ones, stride 2: each input pixel becomes a 2x2 block
        let w = t.leaf(vec![1.0; 4], &[1, 1, 2, 2]).unwrap();
        let b = t.leaf(vec![0.0], &[1]).unwrap();
        let y = t.transposed_conv2d(x, w, b, (2, 2)).unwrap();
        assert_eq!(t.shape(y), &[1, 4, 4]);
        assert_eq!(t.value(y)[0], 1.0);
        assert_eq!(t.value(y)[1], 1.0);
        assert_eq!(t.value(y)[5], 1.0);
        assert_eq!(t.value(y)[10], 4.0);
        assert_eq!(t.value(y)[15], 4.0);
    }

    #[test]
    fn resize_identity_when_same_size() {
        let mut t = Tape::new();
        let x = t.leaf((0..12).map(|v| v as f64).collect(), &[1, 3, 4]).unwrap();
        let y = t.resize_bilinear(x, 3, 4).unwrap();
        assert_eq!(t.value(x), t.value(y));
    }

    #[test]
    fn resize_doubling_preserves_mean() {
        let mut t = Tape::new();
        let x = t.leaf(vec![1.0, 3.0, 5.0, 7.0], &[1, 2, 2]).unwrap();
        let y = t.resize_bilinear(x, 4, 4).unwrap();
        let mean_in = 4.0;
        let mean_out: f64 = t.value(y).iter().sum::<f64>() / 16.0;
        assert!((mean_in - mean_out).abs() < 1e-12);
    }

    #[test]
    fn patchify_unpatchify_round_trip() {
        let mut t = Tape::new();
        let x = t
            .leaf((0..24).map(|v| v as f64).collect(), &[1, 4, 6])
            .unwrap();
        let p = t.patchify(x, 2, 3).unwrap();
        assert_eq!(t.shape(p), &[4, 6]);
        let back = t.unpatchify(p, 2, 3, 4, 6).unwrap();
        assert_eq!(t.value(back), t.value(x));
    }

    #[test]
    fn patchify_orders_channels_innermost() {
        let mut t = Tape::new();
        // 2 channels of 2x2: patch vector should interleave (py, px, c).
        let x = t
            .leaf(vec![1.0, 2.0, 3.0, 4.0, 10.0, 20.0, 30.0, 40.0], &[2, 2, 2])
            .unwrap();
        let p = t.patchify(x, 2, 2).unwrap();
        assert_eq!(
            t.value(p),
            &[1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0]
        );
    }
}
