//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation in evaluation order. Nodes only refer to
//! earlier nodes, so walking the tape backwards from the loss visits every
//! node after all of its consumers.

use crate::error::{Error, Result};

use super::kernels::{self, gelu, gelu_grad};
use super::Tensor;

/// Handle to a node on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Gelu(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        stats: Vec<(f64, f64)>,
    },
    Embed {
        table: Var,
        ids: Vec<usize>,
    },
    CausalAttention {
        qkv: Var,
        heads: usize,
        seq_len: usize,
        probs: Vec<f64>,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        weights: Vec<f64>,
        probs: Vec<f64>,
    },
    Sum(Var),
}

struct Node {
    value: Tensor,
    grad: Option<Vec<f64>>,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient accumulated at `v` by the last [`Graph::backward`] call.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Vec<f64>> {
        self.nodes[v.0].grad.take()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn dims2(&self, v: Var) -> Result<(usize, usize)> {
        self.value(v).dims2()
    }

    fn shape_err(&self, op: &'static str, a: Var, b: Var) -> Error {
        Error::Shape {
            op,
            lhs: self.value(a).shape().to_vec(),
            rhs: self.value(b).shape().to_vec(),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = kernels::matmul(self.value(a), self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(self.shape_err("add", a, b));
        }
        let values = self
            .value(a)
            .values()
            .iter()
            .zip(self.value(b).values())
            .map(|(x, y)| x + y)
            .collect();
        let value = Tensor::new(self.value(a).shape().to_vec(), values)?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    /// Adds a `[d]` bias to every row of an `[n×d]` input.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (_, d) = self.dims2(x)?;
        if self.value(bias).len() != d {
            return Err(self.shape_err("add_bias", x, bias));
        }
        let mut out = self.value(x).clone();
        kernels::add_bias(out.values_mut(), self.value(bias).values());
        Ok(self.push(out, Op::AddBias(x, bias)))
    }

    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let src = self.value(x);
        let values = src.values().iter().map(|&v| gelu(v)).collect();
        let value = Tensor::new(src.shape().to_vec(), values)?;
        Ok(self.push(value, Op::Gelu(x)))
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let (n, d) = self.dims2(x)?;
        if self.value(gain).len() != d || self.value(bias).len() != d {
            return Err(self.shape_err("layer_norm", x, gain));
        }
        let mut out = vec![0.0; n * d];
        let stats = kernels::layer_norm(
            self.value(x).values(),
            self.value(gain).values(),
            self.value(bias).values(),
            &mut out,
        );
        let value = Tensor::new(vec![n, d], out)?;
        Ok(self.push(value, Op::LayerNorm { x, gain, bias, stats }))
    }

    /// Gathers rows of `table` ([rows × d]).
    pub fn embed(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (rows, d) = self.dims2(table)?;
        let src = self.value(table).values();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= rows {
                return Err(Error::TargetOutOfRange { id, classes: rows });
            }
            out.extend_from_slice(&src[id * d..(id + 1) * d]);
        }
        let value = Tensor::new(vec![ids.len(), d], out)?;
        Ok(self.push(
            value,
            Op::Embed {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Causal self-attention over `qkv` ([batch·seq_len × 3d], rows grouped by
    /// sequence). Returns `[batch·seq_len × d]`.
    pub fn causal_attention(&mut self, qkv: Var, heads: usize, seq_len: usize) -> Result<Var> {
        let (rows, width) = self.dims2(qkv)?;
        if width % 3 != 0 || (width / 3) % heads != 0 || seq_len == 0 || rows % seq_len != 0 {
            return Err(Error::Shape {
                op: "causal_attention",
                lhs: vec![rows, width],
                rhs: vec![heads, seq_len],
            });
        }
        let d = width / 3;
        let batch = rows / seq_len;
        let src = self.value(qkv).values();
        let mut out = vec![0.0; rows * d];
        let per_seq = heads * seq_len * seq_len;
        let mut probs = vec![0.0; batch * per_seq];
        for b in 0..batch {
            let base = &src[b * seq_len * width..(b + 1) * seq_len * width];
            kernels::causal_attention(
                base,
                &base[d..],
                &base[2 * d..],
                width,
                width,
                d,
                heads,
                0,
                seq_len,
                &mut out[b * seq_len * d..(b + 1) * seq_len * d],
                Some(&mut probs[b * per_seq..(b + 1) * per_seq]),
            );
        }
        let value = Tensor::new(vec![rows, d], out)?;
        Ok(self.push(
            value,
            Op::CausalAttention {
                qkv,
                heads,
                seq_len,
                probs,
            },
        ))
    }

    /// `Σ_t w_t · CE(logits_t, target_t)`, a scalar.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], weights: &[f64]) -> Result<Var> {
        let (rows, classes) = self.dims2(logits)?;
        if targets.len() != rows || weights.len() != rows {
            return Err(Error::Shape {
                op: "cross_entropy",
                lhs: vec![rows, classes],
                rhs: vec![targets.len(), weights.len()],
            });
        }
        let mut probs = vec![0.0; rows * classes];
        let loss = kernels::weighted_cross_entropy(
            self.value(logits).values(),
            classes,
            targets,
            weights,
            Some(&mut probs),
        )?;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                weights: weights.to_vec(),
                probs,
            },
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).values().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Back-propagate from a scalar `root`. Gradients of earlier calls are
    /// discarded.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.value(root).len() != 1 {
            return Err(Error::Shape {
                op: "backward",
                lhs: self.value(root).shape().to_vec(),
                rhs: vec![1],
            });
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.nodes[root.0].grad = Some(vec![1.0]);
        for i in (0..=root.0).rev() {
            let (before, rest) = self.nodes.split_at_mut(i);
            let node = &mut rest[0];
            let Some(g) = node.grad.as_deref() else {
                continue;
            };
            backprop(&node.op, &node.value, g, before);
        }
        Ok(())
    }
}

fn grad_buf<'a>(nodes: &'a mut [Node], v: Var) -> &'a mut [f64] {
    let node = &mut nodes[v.0];
    let n = node.value.len();
    node.grad.get_or_insert_with(|| vec![0.0; n])
}

fn backprop(op: &Op, out: &Tensor, g: &[f64], nodes: &mut [Node]) {
    match op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (m, k) = nodes[a.0].value.dims2().expect("rank-2");
            let (_, n) = nodes[b.0].value.dims2().expect("rank-2");
            let bv = nodes[b.0].value.values().to_vec();
            kernels::gemm_nt_acc(m, n, k, g, &bv, grad_buf(nodes, *a));
            let av = nodes[a.0].value.values().to_vec();
            kernels::gemm_tn_acc(m, k, n, &av, g, grad_buf(nodes, *b));
        }
        Op::Add(a, b) => {
            for x in [a, b] {
                for (d, s) in grad_buf(nodes, *x).iter_mut().zip(g) {
                    *d += s;
                }
            }
        }
        Op::AddBias(x, bias) => {
            for (d, s) in grad_buf(nodes, *x).iter_mut().zip(g) {
                *d += s;
            }
            let db = grad_buf(nodes, *bias);
            let d = db.len();
            for row in g.chunks_exact(d) {
                for (acc, s) in db.iter_mut().zip(row) {
                    *acc += s;
                }
            }
        }
        Op::Gelu(x) => {
            let xs = nodes[x.0].value.values().to_vec();
            for ((d, s), xv) in grad_buf(nodes, *x).iter_mut().zip(g).zip(xs) {
                *d += s * gelu_grad(xv);
            }
        }
        Op::LayerNorm { x, gain, bias, stats } => {
            let d = nodes[gain.0].value.len();
            let xs = nodes[x.0].value.values().to_vec();
            let gs = nodes[gain.0].value.values().to_vec();
            let mut dgain = vec![0.0; d];
            let mut dbias = vec![0.0; d];
            let mut xhat = vec![0.0; d];
            let mut dxhat = vec![0.0; d];
            let dx = grad_buf(nodes, *x);
            for (r, &(mean, rstd)) in stats.iter().enumerate() {
                let row = &xs[r * d..(r + 1) * d];
                let grow = &g[r * d..(r + 1) * d];
                for j in 0..d {
                    xhat[j] = (row[j] - mean) * rstd;
                    dxhat[j] = grow[j] * gs[j];
                    dgain[j] += grow[j] * xhat[j];
                    dbias[j] += grow[j];
                }
                let mean_dxhat = dxhat.iter().sum::<f64>() / d as f64;
                let mean_dxhat_xhat =
                    dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                for j in 0..d {
                    dx[r * d + j] += rstd * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
                }
            }
            for (acc, v) in grad_buf(nodes, *gain).iter_mut().zip(&dgain) {
                *acc += v;
            }
            for (acc, v) in grad_buf(nodes, *bias).iter_mut().zip(&dbias) {
                *acc += v;
            }
        }
        Op::Embed { table, ids } => {
            let d = out.shape()[1];
            let dt = grad_buf(nodes, *table);
            for (r, &id) in ids.iter().enumerate() {
                for (acc, s) in dt[id * d..(id + 1) * d].iter_mut().zip(&g[r * d..(r + 1) * d]) {
                    *acc += s;
                }
            }
        }
        Op::CausalAttention {
            qkv,
            heads,
            seq_len,
            probs,
        } => {
            let width = nodes[qkv.0].value.shape()[1];
            let src = nodes[qkv.0].value.values().to_vec();
            attention_backward(&src, g, probs, width, *heads, *seq_len, grad_buf(nodes, *qkv));
        }
        Op::CrossEntropy {
            logits,
            targets,
            weights,
            probs,
        } => {
            let classes = nodes[logits.0].value.shape()[1];
            let scale = g[0];
            let dl = grad_buf(nodes, *logits);
            for (t, (&target, &w)) in targets.iter().zip(weights).enumerate() {
                if w == 0.0 {
                    continue;
                }
                let f = w * scale;
                let row = &mut dl[t * classes..(t + 1) * classes];
                for (acc, p) in row.iter_mut().zip(&probs[t * classes..(t + 1) * classes]) {
                    *acc += f * p;
                }
                row[target] -= f;
            }
        }
        Op::Sum(x) => {
            for d in grad_buf(nodes, *x).iter_mut() {
                *d += g[0];
            }
        }
    }
}

fn attention_backward(
    src: &[f64],
    g: &[f64],
    probs: &[f64],
    width: usize,
    heads: usize,
    t_len: usize,
    dqkv: &mut [f64],
) {
    let d = width / 3;
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let batch = src.len() / (t_len * width);
    let mut dp = vec![0.0; t_len];
    for b in 0..batch {
        let rows = b * t_len;
        for h in 0..heads {
            let pbase = ((b * heads + h) * t_len) * t_len;
            let (qo, ko, vo) = (h * dh, d + h * dh, 2 * d + h * dh);
            for t in 0..t_len {
                let p = &probs[pbase + t * t_len..pbase + t * t_len + t + 1];
                let gout = &g[(rows + t) * d + h * dh..(rows + t) * d + (h + 1) * dh];
                let mut rowdot = 0.0;
                for s in 0..=t {
                    let vs = &src[(rows + s) * width + vo..(rows + s) * width + vo + dh];
                    dp[s] = kernels::dot(gout, vs);
                    rowdot += p[s] * dp[s];
                    let dv = &mut dqkv[(rows + s) * width + vo..(rows + s) * width + vo + dh];
                    for (acc, go) in dv.iter_mut().zip(gout) {
                        *acc += p[s] * go;
                    }
                }
                let qt: Vec<f64> = src[(rows + t) * width + qo..(rows + t) * width + qo + dh].to_vec();
                for s in 0..=t {
                    let ds = p[s] * (dp[s] - rowdot) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    let ks = (rows + s) * width + ko;
                    for j in 0..dh {
                        dqkv[(rows + t) * width + qo + j] += ds * src[ks + j];
                        dqkv[ks + j] += ds * qt[j];
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_difference_gradient, relative_error};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Checks d(loss)/d(inputs[which]) against central differences, where
    /// `build` maps graph inputs to a scalar loss.
    fn check<F>(inputs: &[Tensor], build: F)
    where
        F: Fn(&mut Graph, &[Var]) -> Var,
    {
        let mut g = Graph::new();
        let vars: Vec<Var> = inputs.iter().map(|t| g.input(t.clone())).collect();
        let loss = build(&mut g, &vars);
        g.backward(loss).unwrap();
        for (i, x) in inputs.iter().enumerate() {
            let analytic = g.grad(vars[i]).map(|s| s.to_vec()).unwrap_or(vec![0.0; x.len()]);
            let numeric = finite_difference_gradient(
                |probe| {
                    let mut g = Graph::new();
                    let vars: Vec<Var> = inputs
                        .iter()
                        .enumerate()
                        .map(|(j, t)| g.input(if j == i { probe.clone() } else { t.clone() }))
                        .collect();
                    let loss = build(&mut g, &vars);
                    g.value(loss).values()[0]
                },
                x,
                1e-5,
            );
            for (a, n) in analytic.iter().zip(numeric.values()) {
                if a.abs() > 1e-6 || n.abs() > 1e-6 {
                    assert!(relative_error(*a, *n) <= 1e-3, "input {i}: {a} vs {n}");
                }
            }
        }
    }

    /// Project a tensor to a scalar with fixed random weights so that every
    /// output element influences the loss differently.
    fn project(g: &mut Graph, x: Var, seed: u64) -> Var {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = g.value(x).shape().to_vec();
        let (rows, cols) = (shape[0], shape[1]);
        let w = random_tensor(&mut rng, &[cols, 1]);
        let wv = g.input(w);
        let y = g.matmul(x, wv).unwrap();
        let _ = rows;
        g.sum(y)
    }

    #[test]
    fn matmul_gradient_of_sum_is_row_sums_of_b() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_tensor(&mut rng, &[3, 4]);
        let b = random_tensor(&mut rng, &[4, 2]);
        let mut g = Graph::new();
        let (va, vb) = (g.input(a.clone()), g.input(b.clone()));
        let c = g.matmul(va, vb).unwrap();
        let s = g.sum(c);
        g.backward(s).unwrap();
        let ga = g.grad(va).unwrap();
        for i in 0..3 {
            for k in 0..4 {
                let row_sum = b.values()[k * 2] + b.values()[k * 2 + 1];
                assert!((ga[i * 4 + k] - row_sum).abs() < 1e-12);
            }
        }
        check(&[a, b], |g, v| {
            let c = g.matmul(v[0], v[1]).unwrap();
            g.sum(c)
        });
    }

    #[test]
    fn random_instances_of_every_op_pass_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..20u64 {
            let n = rng.random_range(1..5);
            let d = rng.random_range(1..6);
            let k = rng.random_range(1..5);
            let x = random_tensor(&mut rng, &[n, d]);
            let w = random_tensor(&mut rng, &[d, k]);
            let y = random_tensor(&mut rng, &[n, d]);
            let bias = random_tensor(&mut rng, &[d]);
            let gain = random_tensor(&mut rng, &[d]);

            check(&[x.clone(), w.clone()], |g, v| {
                let c = g.matmul(v[0], v[1]).unwrap();
                project(g, c, trial)
            });
            check(&[x.clone(), y.clone()], |g, v| {
                let c = g.add(v[0], v[1]).unwrap();
                project(g, c, trial)
            });
            check(&[x.clone(), bias.clone()], |g, v| {
                let c = g.add_bias(v[0], v[1]).unwrap();
                project(g, c, trial)
            });
            check(&[x.clone()], |g, v| {
                let c = g.gelu(v[0]).unwrap();
                project(g, c, trial)
            });
            if d > 1 {
                check(&[x.clone(), gain.clone(), bias.clone()], |g, v| {
                    let c = g.layer_norm(v[0], v[1], v[2]).unwrap();
                    project(g, c, trial)
                });
            }
            let ids: Vec<usize> = (0..k + 2).map(|_| rng.random_range(0..n)).collect();
            check(&[x.clone()], |g, v| {
                let c = g.embed(v[0], &ids).unwrap();
                project(g, c, trial)
            });
            let classes = d + 1;
            let logits = random_tensor(&mut rng, &[n, classes]);
            let targets: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
            let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            check(&[logits], |g, v| g.cross_entropy(v[0], &targets, &weights).unwrap());

            let heads = rng.random_range(1..3);
            let dh = rng.random_range(1..4);
            let seq = rng.random_range(1..5);
            let batch = rng.random_range(1..3);
            let qkv = random_tensor(&mut rng, &[batch * seq, 3 * heads * dh]);
            check(&[qkv], |g, v| {
                let c = g.causal_attention(v[0], heads, seq).unwrap();
                project(g, c, trial)
            });
        }
    }

    #[test]
    fn attention_is_causal() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let qkv = random_tensor(&mut rng, &[5, 12]);
        let mut g = Graph::new();
        let v = g.input(qkv.clone());
        let out = g.causal_attention(v, 2, 5).unwrap();
        let before = g.value(out).values().to_vec();
        let mut perturbed = qkv.clone();
        for j in 0..12 {
            perturbed.values_mut()[4 * 12 + j] += 1.0;
        }
        let v2 = g.input(perturbed);
        let out2 = g.causal_attention(v2, 2, 5).unwrap();
        assert_eq!(&before[..16], &g.value(out2).values()[..16]);
    }

    #[test]
    fn backward_requires_scalar_root() {
        let mut g = Graph::new();
        let v = g.input(Tensor::zeros(&[2, 2]));
        assert!(g.backward(v).is_err());
    }
}
