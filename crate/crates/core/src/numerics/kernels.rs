//! Slice-level kernels shared by the autodiff tape and the inference path.

use crate::error::{Error, Result};

use super::Tensor;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// `c (+)= a[m×k] · b[k×n]`, all row-major.
pub fn gemm(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64], accumulate: bool) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    if k == 0 {
        if !accumulate {
            c.fill(0.0);
        }
        return;
    }
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c += a[m×n] · b[k×n]ᵀ` giving `[m×k]`.
pub fn gemm_nt_acc(m: usize, n: usize, k: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * k);
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    unsafe {
        matrixmultiply::dgemm(
            m,
            n,
            k,
            1.0,
            a.as_ptr(),
            n as isize,
            1,
            b.as_ptr(),
            1,
            n as isize,
            1.0,
            c.as_mut_ptr(),
            k as isize,
            1,
        );
    }
}

/// `c += a[m×k]ᵀ · b[m×n]` giving `[k×n]`.
pub fn gemm_tn_acc(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(c.len(), k * n);
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    unsafe {
        matrixmultiply::dgemm(
            k,
            m,
            n,
            1.0,
            a.as_ptr(),
            1,
            k as isize,
            b.as_ptr(),
            n as isize,
            1,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Matrix product of two rank-2 tensors.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2()?;
    let (k2, n) = b.dims2()?;
    if k != k2 {
        return Err(Error::Shape {
            op: "matmul",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let mut out = vec![0.0; m * n];
    gemm(m, k, n, a.values(), b.values(), &mut out, false);
    Tensor::new(vec![m, n], out)
}

/// `rows[i] += bias` for every row.
pub fn add_bias(rows: &mut [f64], bias: &[f64]) {
    for row in rows.chunks_exact_mut(bias.len()) {
        for (x, b) in row.iter_mut().zip(bias) {
            *x += b;
        }
    }
}

/// Layer normalisation over the last dimension. Returns per-row `(mean, rstd)`.
pub fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64], out: &mut [f64]) -> Vec<(f64, f64)> {
    let d = gain.len();
    let mut stats = Vec::with_capacity(x.len() / d);
    for (row, out_row) in x.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let rstd = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        for j in 0..d {
            out_row[j] = (row[j] - mean) * rstd * gain[j] + bias[j];
        }
        stats.push((mean, rstd));
    }
    stats
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// GELU, tanh approximation.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let inner = GELU_C * (x + 0.044715 * x * x * x);
    let t = inner.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

/// In-place numerically stable softmax of one row.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// `ln Σ exp(row)`.
pub fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Weighted cross-entropy over rows of `logits` ([rows × classes]).
///
/// Returns `Σ_t w_t · (−log softmax(logits_t)[target_t])` and, when `probs` is
/// given, fills it with the row softmax.
pub(crate) fn weighted_cross_entropy(
    logits: &[f64],
    classes: usize,
    targets: &[usize],
    weights: &[f64],
    mut probs: Option<&mut [f64]>,
) -> Result<f64> {
    let mut loss = 0.0;
    for (t, row) in logits.chunks_exact(classes).enumerate() {
        let target = targets[t];
        if target >= classes {
            return Err(Error::TargetOutOfRange {
                id: target,
                classes,
            });
        }
        if let Some(p) = probs.as_deref_mut() {
            let prow = &mut p[t * classes..(t + 1) * classes];
            prow.copy_from_slice(row);
            softmax_in_place(prow);
        }
        if weights[t] != 0.0 {
            loss += weights[t] * (log_sum_exp(row) - row[target]);
        }
    }
    Ok(loss)
}

/// Mean softmax cross-entropy of `logits` ([T × V]) against `targets`.
///
/// Returns the loss and its gradient with respect to the logits,
/// `(softmax − one_hot) / T`.
pub fn softmax_cross_entropy(logits: &Tensor, targets: &[usize]) -> Result<(f64, Tensor)> {
    let (rows, classes) = logits.dims2()?;
    if rows != targets.len() {
        return Err(Error::Shape {
            op: "softmax_cross_entropy",
            lhs: logits.shape().to_vec(),
            rhs: vec![targets.len()],
        });
    }
    if rows == 0 {
        return Err(Error::Empty("softmax_cross_entropy targets"));
    }
    let w = 1.0 / rows as f64;
    let weights = vec![w; rows];
    let mut probs = vec![0.0; rows * classes];
    let loss = weighted_cross_entropy(logits.values(), classes, targets, &weights, Some(&mut probs))?;
    for (t, &target) in targets.iter().enumerate() {
        probs[t * classes + target] -= 1.0;
    }
    for p in probs.iter_mut() {
        *p *= w;
    }
    Ok((loss, Tensor::new(vec![rows, classes], probs)?))
}

/// Causal multi-head attention for one sequence with precomputed keys/values.
///
/// `q` holds `new` query rows of width `d` at absolute positions
/// `start..start+new`; `k` and `v` hold `start+new` rows. Attention
/// probabilities for each head are written into `probs` (if given) as
/// `[heads × new × (start+new)]`, zero above the diagonal.
#[allow(clippy::too_many_arguments)]
pub(crate) fn causal_attention(
    q: &[f64],
    k: &[f64],
    v: &[f64],
    q_stride: usize,
    kv_stride: usize,
    d: usize,
    heads: usize,
    start: usize,
    new: usize,
    out: &mut [f64],
    mut probs: Option<&mut [f64]>,
) {
    let dh = d / heads;
    let total = start + new;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut scores = vec![0.0; total];
    for h in 0..heads {
        let off = h * dh;
        for i in 0..new {
            let pos = start + i;
            let qi = &q[i * q_stride + off..i * q_stride + off + dh];
            let s = &mut scores[..=pos];
            for (j, sj) in s.iter_mut().enumerate() {
                let kj = &k[j * kv_stride + off..j * kv_stride + off + dh];
                *sj = dot(qi, kj) * scale;
            }
            softmax_in_place(s);
            let orow = &mut out[i * d + off..i * d + off + dh];
            orow.fill(0.0);
            for (j, &p) in s.iter().enumerate() {
                let vj = &v[j * kv_stride + off..j * kv_stride + off + dh];
                for (o, x) in orow.iter_mut().zip(vj) {
                    *o += p * x;
                }
            }
            if let Some(pb) = probs.as_deref_mut() {
                let base = (h * new + i) * total;
                pb[base..base + pos + 1].copy_from_slice(s);
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
