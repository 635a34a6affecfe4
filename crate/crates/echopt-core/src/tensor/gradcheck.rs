//! Gradient verification against central finite differences.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};

use super::{Tape, Var};

/// Compares the analytic gradient of a scalar-valued tensor function
/// against central finite differences `(f(x+eps e) - f(x-eps e)) / 2 eps`
/// and returns the maximum relative error, with the relative denominator
/// `max(|analytic|, |numeric|, 1e-8)`.
///
/// All coordinates are checked when there are at most `max_coords` of
/// them; otherwise a seeded random subset of `max_coords` coordinates
/// (at least 50) is used. `f` must be deterministic.
pub fn grad_check<F>(
    f: F,
    x0: &[f64],
    shape: &[usize],
    eps: f64,
    max_coords: usize,
    seed: u64,
) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let eval = |data: Vec<f64>| -> Result<f64> {
        let mut tape = Tape::new();
        let x = tape.leaf(data, shape)?;
        let loss = f(&mut tape, x)?;
        if tape.value(loss).len() != 1 {
            return Err(CoreError::InvalidArgument(
                "grad_check: f must be scalar-valued".into(),
            ));
        }
        Ok(tape.value(loss)[0])
    };

    // Analytic gradient.
    let analytic = {
        let mut tape = Tape::new();
        let x = tape.leaf(x0.to_vec(), shape)?;
        let loss = f(&mut tape, x)?;
        if tape.value(loss).len() != 1 {
            return Err(CoreError::InvalidArgument(
                "grad_check: f must be scalar-valued".into(),
            ));
        }
        tape.backward(loss)?;
        tape.grad(x).to_vec()
    };

    let n_check = max_coords.max(50).min(x0.len());
    let coords: Vec<usize> = if n_check == x0.len() {
        (0..x0.len()).collect()
    } else {
        let mut all: Vec<usize> = (0..x0.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        all.shuffle(&mut rng);
        all.truncate(n_check);
        all
    };

    let mut max_rel = 0.0f64;
    for &i in &coords {
        let mut plus = x0.to_vec();
        plus[i] += eps;
        let mut minus = x0.to_vec();
        minus[i] -= eps;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if rel > max_rel {
            max_rel = rel;
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(lo..hi)).collect()
    }

    /// Inputs nudged away from zero keep relu finite differences clean.
    fn off_zero(v: &mut [f64]) {
        for x in v.iter_mut() {
            if x.abs() < 0.05 {
                *x += 0.1_f64.copysign(if *x == 0.0 { 1.0 } else { *x });
            }
        }
    }

    #[test]
    fn linear_function_is_exact() {
        let err = grad_check(
            |t, x| {
                let s = t.scale(x, 3.5);
                Ok(t.sum(s))
            },
            &[1.0, -2.0, 0.5],
            &[3],
            1e-5,
            64,
            0,
        )
        .unwrap();
        assert!(err < 1e-10, "err {err}");
    }

    #[test]
    fn matmul_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x0 = random_vec(&mut rng, 12, -1.0, 1.0);
        let w = random_vec(&mut rng, 20, -1.0, 1.0);
        let err = grad_check(
            move |t, x| {
                let wv = t.leaf(w.clone(), &[4, 5])?;
                let y = t.matmul(x, wv)?;
                let sq = t.mul(y, y)?;
                Ok(t.sum(sq))
            },
            &x0,
            &[3, 4],
            1e-5,
            64,
            2,
        )
        .unwrap();
        assert!(err < 1e-6, "err {err}");
    }

    #[test]
    fn matmul_nt_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x0 = random_vec(&mut rng, 12, -1.0, 1.0);
        let b = random_vec(&mut rng, 8, -1.0, 1.0);
        let err = grad_check(
            move |t, x| {
                let bv = t.leaf(b.clone(), &[2, 4])?;
                let y = t.matmul_nt(x, bv)?;
                let sq = t.mul(y, y)?;
                Ok(t.sum(sq))
            },
            &x0,
            &[3, 4],
            1e-5,
            64,
            3,
        )
        .unwrap();
        assert!(err < 1e-6, "err {err}");
    }

    #[test]
    fn relu_grad_off_kinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x0 = random_vec(&mut rng, 20, -1.0, 1.0);
        off_zero(&mut x0);
        let err = grad_check(
            |t, x| {
                let y = t.relu(x);
                let sq = t.mul(y, y)?;
                Ok(t.sum(sq))
            },
            &x0,
            &[4, 5],
            1e-5,
            64,
            4,
        )
        .unwrap();
        assert!(err < 1e-6, "err {err}");
    }

    #[test]
    fn softmax_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x0 = random_vec(&mut rng, 15, -2.0, 2.0);
        let w = random_vec(&mut rng, 15, -1.0, 1.0);
        let err = grad_check(
            move |t, x| {
                let y = t.softmax_lastdim(x);
                let wv = t.leaf(w.clone(), &[3, 5])?;
                let z = t.mul(y, wv)?;
                Ok(t.sum(z))
            },
            &x0,
            &[3, 5],
            1e-5,
            64,
            6,
        )
        .unwrap();
        assert!(err < 1e-6, "err {err}");
    }

    #[test]
    fn layer_norm_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x0 = random_vec(&mut rng, 24, -1.0, 1.0);
        let g = random_vec(&mut rng, 6, 0.5, 1.5);
        let b = random_vec(&mut rng, 6, -0.5, 0.5);
        let w = random_vec(&mut rng, 24, -1.0, 1.0);
        let err = grad_check(
            move |t, x| {
                let gv = t.leaf(g.clone(), &[6])?;
                let bv = t.leaf(b.clone(), &[6])?;
                let y = t.layer_norm(x, gv, bv, 1e-5)?;
                let wv = t.leaf(w.clone(), &[4, 6])?;
                let z = t.mul(y, wv)?;
                Ok(t.sum(z))
            },
            &x0,
            &[4, 6],
            1e-5,
            64,
            8,
        )
        .unwrap();
        assert!(err < 1e-6, "err {err}");
    }

    #[test]
    fn batch_norm_training_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x0 = random_vec(&mut rng, 40, -1.0, 1.0);
        let g = random_vec(&mut rng, 5, 0.5, 1.5);
        let b = random_vec(&mut rng, 5, -0.5, 0.5);
        let w = random_vec(&mut rng, 40, -1.0, 1.0);
        let err = grad_check(
            move |t, x| {
                let gv = t.leaf(g.clone(), &[5])?;
                let bv = t.leaf(b.clone(), &[5])?;
                let (y, _, _) = t.batch_norm(x, gv, bv, None, 1e-5)?;
                let wv = t.leaf(w.clone(), &[8, 5])?;
                let z = t.mul(y, wv)?;
                Ok(t.sum(z))
            },
            &x0,
            &[8, 5],
            1e-5,
            64,
            10,
        )
        .unwrap();
        assert!(err < 1e-6, "err {err}");
    }

    #[test]
    fn conv2d_grad_wrt_input_and_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x0 = random_vec(&mut rng, 2 * 6 * 5, -1.0, 1.0);
        let w0 = random_vec(&mut rng, 3 * 2 * 3 * 3, -0.5, 0.5);
        let b0 = random_vec(&mut rng, 3, -0.1, 0.1);
        let (w1, b1) = (w0.clone(), b0.clone());
        let err = grad_check(
            move |t, x| {
                let w = t.leaf(w1.clone(), &[3, 2, 3, 3])?;
                let b = t.leaf(b1.clone(), &[3])?;
                let y = t.conv2d(x, w, b, (2, 1))?;
                let sq = t.mul(y, y)?;
                Ok(t.sum(sq))
            },
            &x0,
            &[2, 6, 5],
            1e-5,
            64,
            12,
        )
        .unwrap();
        assert!(err < 1e-6, "input err {err}");

        let x1 = x0.clone();
        let err = grad_check(
            move |t, w| {
                let x = t.leaf(x1.clone(), &[2, 6, 5])?;
                let b = t.leaf(b0.clone(), &[3])?;
                let y = t.conv2d(x, w, b, (2, 1))?;
                let sq = t.mul(y, y)?;
                Ok(t.sum(sq))
            },
            &w0,
            &[3, 2, 3, 3],
            1e-5,
            64,
            13,
        )
        .unwrap();
        assert!(err < 1e-6, "weight err {err}");
    }

    #[test]
    fn transposed_conv2d_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let x0 = random_vec(&mut rng, 2 * 3 * 4, -1.0, 1.0);
        let w0 = random_vec(&mut rng, 2 * 3 * 2 * 2, -0.5, 0.5);
        let b0 = random_vec(&mut rng, 3, -0.1, 0.1);
        let err = grad_check(
            move |t, x| {
                let w = t.leaf(w0.clone(), &[2, 3, 2, 2])?;
                let b = t.leaf(b0.clone(), &[3])?;
                let y = t.transposed_conv2d(x, w, b, (2, 2))?;
                let sq = t.mul(y, y)?;
                Ok(t.sum(sq))
            },
            &x0,
            &[2, 3, 4],
            1e-5,
            64,
            16,
        )
        .unwrap();
        assert!(err < 1e-6, "err {err}");
    }

    #[test]
    fn resize_patchify_mse_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x0 = random_vec(&mut rng, 2 * 4 * 6, -1.0, 1.0);
        let target = random_vec(&mut rng, 2 * 3 * 4, -1.0, 1.0);
        let err = grad_check(
            move |t, x| {
                let y = t.resize_bilinear(x, 3, 4)?;
                let tv = t.leaf(target.clone(), &[2, 3, 4])?;
                t.mean_sq_error(y, tv)
            },
            &x0,
            &[2, 4, 6],
            1e-5,
            64,
            18,
        )
        .unwrap();
        assert!(err < 1e-6, "resize err {err}");

        let x1 = random_vec(&mut rng, 3 * 4 * 4, -1.0, 1.0);
        let err = grad_check(
            |t, x| {
                let p = t.patchify(x, 2, 2)?;
                let sq = t.mul(p, p)?;
                Ok(t.sum(sq))
            },
            &x1,
            &[3, 4, 4],
            1e-5,
            64,
            19,
        )
        .unwrap();
        assert!(err < 1e-6, "patchify err {err}");
    }

    #[test]
    fn concat_slice_add_bias_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x0 = random_vec(&mut rng, 12, -1.0, 1.0);
        let other = random_vec(&mut rng, 8, -1.0, 1.0);
        let bias = random_vec(&mut rng, 5, -0.5, 0.5);
        let err = grad_check(
            move |t, x| {
                let o = t.leaf(other.clone(), &[4, 2])?;
                let c = t.concat(&[x, o], 1)?;
                let b = t.leaf(bias.clone(), &[5])?;
                let cb = t.add_bias(c, b)?;
                let s = t.slice(cb, 0, 1, 3)?;
                let sq = t.mul(s, s)?;
                Ok(t.sum(sq))
            },
            &x0,
            &[4, 3],
            1e-5,
            64,
            22,
        )
        .unwrap();
        // slice drops row 0, so some coordinates legitimately have zero
        // gradient; the check still compares them against ~0 numerics.
        assert!(err < 1e-6, "err {err}");
    }
}
