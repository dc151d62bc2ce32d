use std::cell::{Ref, RefCell};
use std::collections::HashSet;
use std::rc::Rc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

type BackFn = Box<dyn Fn(&Inner)>;

pub(crate) struct Inner {
    shape: Vec<usize>,
    data: RefCell<Vec<f64>>,
    grad: RefCell<Vec<f64>>,
    requires_grad: bool,
    parents: Vec<Tensor>,
    back: Option<BackFn>,
}

/// Dense row-major f64 tensor. Cloning is cheap (shared storage); every
/// operation allocates a fresh output and records its backward closure when
/// any input requires gradients.
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<Inner>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Right-aligned numpy broadcasting.
fn broadcast_shape(a: &[usize], b: &[usize]) -> Vec<usize> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i < rank - a.len() { 1 } else { a[i - (rank - a.len())] };
        let db = if i < rank - b.len() { 1 } else { b[i - (rank - b.len())] };
        assert!(
            da == db || da == 1 || db == 1,
            "shape mismatch in broadcast: {a:?} vs {b:?}"
        );
        out[i] = da.max(db);
    }
    out
}

/// For each linear index of `out_shape`, the linear index into `src_shape`.
/// Walks an odometer over the output coordinates instead of doing div/mod
/// per element; this sits on the hot path of every broadcast op.
fn index_map(out_shape: &[usize], src_shape: &[usize]) -> Vec<usize> {
    let rank = out_shape.len();
    let pad = rank - src_shape.len();
    let mut padded = vec![1; rank];
    padded[pad..].copy_from_slice(src_shape);
    let src_strides = strides(&padded);
    let n = numel(out_shape);
    let mut map = Vec::with_capacity(n);
    let mut idx = vec![0usize; rank];
    let mut src = 0usize;
    for _ in 0..n {
        map.push(src);
        for d in (0..rank).rev() {
            idx[d] += 1;
            if padded[d] != 1 {
                src += src_strides[d];
            }
            if idx[d] < out_shape[d] {
                break;
            }
            idx[d] = 0;
            if padded[d] != 1 {
                // a broadcast-participating axis has padded[d] == out_shape[d]
                src -= out_shape[d] * src_strides[d];
            }
        }
    }
    map
}

impl Tensor {
    fn build(
        shape: Vec<usize>,
        data: Vec<f64>,
        requires_grad: bool,
        parents: Vec<Tensor>,
        back: Option<BackFn>,
    ) -> Tensor {
        debug_assert_eq!(numel(&shape), data.len());
        Tensor {
            inner: Rc::new(Inner {
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(Vec::new()),
                requires_grad,
                parents,
                back,
            }),
        }
    }

    /// Constant (non-differentiable) tensor.
    pub fn constant(shape: &[usize], data: Vec<f64>) -> Tensor {
        assert_eq!(numel(shape), data.len(), "constant: shape/data length mismatch");
        Tensor::build(shape.to_vec(), data, false, Vec::new(), None)
    }

    /// Trainable leaf.
    pub fn param(shape: &[usize], data: Vec<f64>) -> Tensor {
        assert_eq!(numel(shape), data.len(), "param: shape/data length mismatch");
        Tensor::build(shape.to_vec(), data, true, Vec::new(), None)
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor::constant(shape, vec![0.0; numel(shape)])
    }

    pub fn scalar(x: f64) -> Tensor {
        Tensor::constant(&[], vec![x])
    }

    /// Trainable leaf with N(0, std^2) entries.
    pub fn randn_param(shape: &[usize], std: f64, rng: &mut ChaCha8Rng) -> Tensor {
        let n = numel(shape);
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            // Box-Muller
            let u1: f64 = rng.gen::<f64>().max(1e-300);
            let u2: f64 = rng.gen();
            data.push((-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos() * std);
        }
        Tensor::param(shape, data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        numel(&self.inner.shape)
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn data(&self) -> Ref<'_, Vec<f64>> {
        self.inner.data.borrow()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.inner.data.borrow().clone()
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.numel(), 1, "item() on non-scalar tensor");
        self.inner.data.borrow()[0]
    }

    /// Accumulated gradient of a leaf (zeros if backward never reached it).
    pub fn grad(&self) -> Vec<f64> {
        let g = self.inner.grad.borrow();
        if g.is_empty() {
            vec![0.0; self.numel()]
        } else {
            g.clone()
        }
    }

    pub fn zero_grad(&self) {
        self.inner.grad.borrow_mut().clear();
    }

    /// Mutate leaf values in place (optimizer updates, finite differences).
    pub fn update_data(&self, f: impl FnOnce(&mut [f64])) {
        f(&mut self.inner.data.borrow_mut());
    }

    fn accumulate_grad(inner: &Inner, contribution: impl FnOnce(&mut [f64])) {
        let mut g = inner.grad.borrow_mut();
        if g.is_empty() {
            g.resize(numel(&inner.shape), 0.0);
        }
        contribution(&mut g);
    }

    /// Reverse-mode sweep from a scalar. Each node is visited exactly once in
    /// reverse topological order.
    pub fn backward(&self) {
        assert_eq!(self.numel(), 1, "backward() requires a scalar loss");
        // Iterative post-order DFS over the Rc graph.
        let mut order: Vec<Tensor> = Vec::new();
        let mut visited: HashSet<*const Inner> = HashSet::new();
        let mut stack: Vec<(Tensor, bool)> = vec![(self.clone(), false)];
        while let Some((node, expanded)) = stack.pop() {
            let key = Rc::as_ptr(&node.inner);
            if expanded {
                order.push(node);
                continue;
            }
            if !visited.insert(key) {
                continue;
            }
            stack.push((node.clone(), true));
            for p in &node.inner.parents {
                if p.inner.requires_grad {
                    stack.push((p.clone(), false));
                }
            }
        }
        Tensor::accumulate_grad(&self.inner, |g| g[0] += 1.0);
        for node in order.iter().rev() {
            if let Some(back) = &node.inner.back {
                back(&node.inner);
            }
        }
    }

    fn out_of(&self, shape: Vec<usize>, data: Vec<f64>, back: Option<BackFn>, parents: Vec<Tensor>) -> Tensor {
        let requires = parents.iter().any(|p| p.inner.requires_grad);
        if requires {
            Tensor::build(shape, data, true, parents, back)
        } else {
            Tensor::build(shape, data, false, Vec::new(), None)
        }
    }

    // ---- elementwise binary ops with broadcasting ----

    fn binary(
        &self,
        other: &Tensor,
        fwd: impl Fn(f64, f64) -> f64,
        // (out_grad, a_val, b_val) -> (da, db)
        bwd: impl Fn(f64, f64, f64) -> (f64, f64) + 'static,
    ) -> Tensor {
        if self.shape() == other.shape() {
            // Equal shapes need no index maps; this is the common case and
            // the dominant cost of the attention logits, so keep it lean.
            let data: Vec<f64> = {
                let a = self.data();
                let b = other.data();
                a.iter().zip(b.iter()).map(|(&x, &y)| fwd(x, y)).collect()
            };
            let back: BackFn = Box::new(move |inner: &Inner| {
                let g = inner.grad.borrow();
                let pa = &inner.parents[0];
                let pb = &inner.parents[1];
                let av = pa.data();
                let bv = pb.data();
                if pa.inner.requires_grad {
                    Tensor::accumulate_grad(&pa.inner, |ga| {
                        for k in 0..g.len() {
                            ga[k] += bwd(g[k], av[k], bv[k]).0;
                        }
                    });
                }
                if pb.inner.requires_grad {
                    Tensor::accumulate_grad(&pb.inner, |gb| {
                        for k in 0..g.len() {
                            gb[k] += bwd(g[k], av[k], bv[k]).1;
                        }
                    });
                }
            });
            return self.out_of(
                self.shape().to_vec(),
                data,
                Some(back),
                vec![self.clone(), other.clone()],
            );
        }
        let out_shape = broadcast_shape(self.shape(), other.shape());
        let map_a = index_map(&out_shape, self.shape());
        let map_b = index_map(&out_shape, other.shape());
        let data: Vec<f64> = {
            let a = self.data();
            let b = other.data();
            map_a
                .iter()
                .zip(&map_b)
                .map(|(&ia, &ib)| fwd(a[ia], b[ib]))
                .collect()
        };
        let back: BackFn = Box::new(move |inner: &Inner| {
            let g = inner.grad.borrow();
            let pa = &inner.parents[0];
            let pb = &inner.parents[1];
            let av = pa.data();
            let bv = pb.data();
            if pa.inner.requires_grad {
                Tensor::accumulate_grad(&pa.inner, |ga| {
                    for (k, (&ia, &ib)) in map_a.iter().zip(&map_b).enumerate() {
                        ga[ia] += bwd(g[k], av[ia], bv[ib]).0;
                    }
                });
            }
            if pb.inner.requires_grad {
                Tensor::accumulate_grad(&pb.inner, |gb| {
                    for (k, (&ia, &ib)) in map_a.iter().zip(&map_b).enumerate() {
                        gb[ib] += bwd(g[k], av[ia], bv[ib]).1;
                    }
                });
            }
        });
        self.out_of(out_shape, data, Some(back), vec![self.clone(), other.clone()])
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        self.binary(other, |a, b| a + b, |g, _, _| (g, g))
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        self.binary(other, |a, b| a - b, |g, _, _| (g, -g))
    }

    pub fn mul(&self, other: &Tensor) -> Tensor {
        self.binary(other, |a, b| a * b, |g, a, b| (g * b, g * a))
    }

    pub fn div(&self, other: &Tensor) -> Tensor {
        self.binary(other, |a, b| a / b, |g, a, b| (g / b, -g * a / (b * b)))
    }

    // ---- elementwise unary ops ----

    fn unary(
        &self,
        fwd: impl Fn(f64) -> f64,
        // (out_grad, in_val, out_val) -> din
        bwd: impl Fn(f64, f64, f64) -> f64 + 'static,
    ) -> Tensor {
        let data: Vec<f64> = self.data().iter().map(|&x| fwd(x)).collect();
        let back: BackFn = Box::new(move |inner: &Inner| {
            let g = inner.grad.borrow();
            let out = inner.data.borrow();
            let p = &inner.parents[0];
            let xs = p.data();
            Tensor::accumulate_grad(&p.inner, |gp| {
                for k in 0..g.len() {
                    gp[k] += bwd(g[k], xs[k], out[k]);
                }
            });
        });
        self.out_of(self.shape().to_vec(), data, Some(back), vec![self.clone()])
    }

    pub fn neg(&self) -> Tensor {
        self.unary(|x| -x, |g, _, _| -g)
    }

    pub fn scale(&self, c: f64) -> Tensor {
        self.unary(move |x| c * x, move |g, _, _| c * g)
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        self.unary(move |x| x + c, |g, _, _| g)
    }

    pub fn relu(&self) -> Tensor {
        self.unary(|x| x.max(0.0), |g, x, _| if x > 0.0 { g } else { 0.0 })
    }

    pub fn exp(&self) -> Tensor {
        self.unary(f64::exp, |g, _, y| g * y)
    }

    pub fn ln(&self) -> Tensor {
        self.unary(f64::ln, |g, x, _| g / x)
    }

    pub fn sigmoid(&self) -> Tensor {
        self.unary(|x| 1.0 / (1.0 + (-x).exp()), |g, _, y| g * y * (1.0 - y))
    }

    pub fn abs(&self) -> Tensor {
        self.unary(f64::abs, |g, x, _| if x >= 0.0 { g } else { -g })
    }

    /// Gradient is identity inside [lo, hi] (inclusive) and zero outside.
    pub fn clamp(&self, lo: f64, hi: f64) -> Tensor {
        self.unary(
            move |x| x.clamp(lo, hi),
            move |g, x, _| if (lo..=hi).contains(&x) { g } else { 0.0 },
        )
    }

    /// Replace entries where `mask` is true with `value` (gradient blocked
    /// there). `value` may be -inf; combined with softmax this yields exact
    /// zeros at masked positions.
    pub fn masked_fill(&self, mask: &[bool], value: f64) -> Tensor {
        assert_eq!(mask.len(), self.numel(), "masked_fill: mask length mismatch");
        let mask: Rc<[bool]> = mask.into();
        let data: Vec<f64> = self
            .data()
            .iter()
            .zip(mask.iter())
            .map(|(&x, &m)| if m { value } else { x })
            .collect();
        let mask_b = Rc::clone(&mask);
        let back: BackFn = Box::new(move |inner: &Inner| {
            let g = inner.grad.borrow();
            let p = &inner.parents[0];
            Tensor::accumulate_grad(&p.inner, |gp| {
                for k in 0..g.len() {
                    if !mask_b[k] {
                        gp[k] += g[k];
                    }
                }
            });
        });
        self.out_of(self.shape().to_vec(), data, Some(back), vec![self.clone()])
    }

    /// Inverted dropout: scales kept entries by 1/(1-p) at train time, is the
    /// identity in eval.
    pub fn dropout(&self, p: f64, rng: &mut ChaCha8Rng, training: bool) -> Tensor {
        if !training || p == 0.0 {
            return self.clone();
        }
        assert!((0.0..1.0).contains(&p), "dropout probability must be in [0,1)");
        let keep = 1.0 - p;
        let mask: Vec<f64> = (0..self.numel())
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        self.mul(&Tensor::constant(self.shape(), mask))
    }

    // ---- shape ops ----

    pub fn reshape(&self, shape: &[usize]) -> Tensor {
        assert_eq!(numel(shape), self.numel(), "reshape: element count mismatch");
        let data = self.to_vec();
        let back: BackFn = Box::new(move |inner: &Inner| {
            let g = inner.grad.borrow();
            let p = &inner.parents[0];
            Tensor::accumulate_grad(&p.inner, |gp| {
                for k in 0..g.len() {
                    gp[k] += g[k];
                }
            });
        });
        self.out_of(shape.to_vec(), data, Some(back), vec![self.clone()])
    }

    /// Swap the last two axes (rank 2 or 3).
    pub fn transpose_last2(&self) -> Tensor {
        let rank = self.shape().len();
        assert!(rank == 2 || rank == 3, "transpose_last2: rank must be 2 or 3");
        let (batch, r, c) = if rank == 2 {
            (1, self.shape()[0], self.shape()[1])
        } else {
            (self.shape()[0], self.shape()[1], self.shape()[2])
        };
        let src = self.data();
        let mut data = vec![0.0; src.len()];
        for b in 0..batch {
            for i in 0..r {
                for j in 0..c {
                    data[b * r * c + j * r + i] = src[b * r * c + i * c + j];
                }
            }
        }
        drop(src);
        let mut shape = self.shape().to_vec();
        let n = shape.len();
        shape.swap(n - 1, n - 2);
        let back: BackFn = Box::new(move |inner: &Inner| {
            let g = inner.grad.borrow();
            let p = &inner.parents[0];
            Tensor::accumulate_grad(&p.inner, |gp| {
                for bi in 0..batch {
                    for i in 0..r {
                        for j in 0..c {
                            gp[bi * r * c + i * c + j] += g[bi * r * c + j * r + i];
                        }
                    }
                }
            });
        });
        self.out_of(shape, data, Some(back), vec![self.clone()])
    }

    pub fn concat(tensors: &[Tensor], axis: usize) -> Tensor {
        assert!(!tensors.is_empty(), "concat of empty list");
        let rank = tensors[0].shape().len();
        assert!(axis < rank, "concat: axis out of range");
        for t in tensors {
            assert_eq!(t.shape().len(), rank, "concat: rank mismatch");
            for d in 0..rank {
                if d != axis {
                    assert_eq!(t.shape()[d], tensors[0].shape()[d], "concat: shape mismatch");
                }
            }
        }
        let mut out_shape = tensors[0].shape().to_vec();
        out_shape[axis] = tensors.iter().map(|t| t.shape()[axis]).sum();
        let outer: usize = out_shape[..axis].iter().product();
        let inner_len: usize = out_shape[axis + 1..].iter().product();
        let total = numel(&out_shape);
        let mut data = vec![0.0; total];
        let axis_sizes: Vec<usize> = tensors.iter().map(|t| t.shape()[axis]).collect();
        let out_axis = out_shape[axis];
        let mut offset = 0;
        for (t, &ax) in tensors.iter().zip(&axis_sizes) {
            let src = t.data();
            for o in 0..outer {
                for a in 0..ax {
                    let src_base = (o * ax + a) * inner_len;
                    let dst_base = (o * out_axis + offset + a) * inner_len;
                    data[dst_base..dst_base + inner_len]
                        .copy_from_slice(&src[src_base..src_base + inner_len]);
                }
            }
            offset += ax;
        }
        let sizes = axis_sizes.clone();
        let back: BackFn = Box::new(move |inner: &Inner| {
            let g = inner.grad.borrow();
            let mut offset = 0;
            for (pi, &ax) in sizes.iter().enumerate() {
                let p = &inner.parents[pi];
                if p.inner.requires_grad {
                    Tensor::accumulate_grad(&p.inner, |gp| {
                        for o in 0..outer {
                            for a in 0..ax {
                                let src_base = (o * out_axis + offset + a) * inner_len;
                                let dst_base = (o * ax + a) * inner_len;
                                for k in 0..inner_len {
                                    gp[dst_base + k] += g[src_base + k];
                                }
                            }
                        }
                    });
                }
                offset += ax;
            }
        });
        let parents = tensors.to_vec();
        let requires = parents.iter().any(|p| p.inner.requires_grad);
        if requires {
            Tensor::build(out_shape, data, true, parents, Some(back))
        } else {
            Tensor::build(out_shape, data, false, Vec::new(), None)
        }
    }

    // ---- reductions ----

    pub fn sum_all(&self) -> Tensor {
        let s: f64 = self.data().iter().sum();
        let n = self.numel();
        let back: BackFn = Box::new(move |inner: &Inner| {
            let g = inner.grad.borrow()[0];
            let p = &inner.parents[0];
            Tensor::accumulate_grad(&p.inner, |gp| {
                for k in 0..n {
                    gp[k] += g;
                }
            });
        });
        self.out_of(vec![], vec![s], Some(back), vec![self.clone()])
    }

    pub fn mean_all(&self) -> Tensor {
        let n = self.numel() as f64;
        self.sum_all().scale(1.0 / n)
    }

    /// Sum over one axis; the axis is kept with size 1 when `keepdim`.
    pub fn sum_axis(&self, axis: usize, keepdim: bool) -> Tensor {
        let shape = self.shape().to_vec();
        assert!(axis < shape.len(), "sum_axis: axis out of range");
        let outer: usize = shape[..axis].iter().product();
        let ax = shape[axis];
        let inner_len: usize = shape[axis + 1..].iter().product();
        let src = self.data();
        let mut data = vec![0.0; outer * inner_len];
        for o in 0..outer {
            for a in 0..ax {
                let base = (o * ax + a) * inner_len;
                for k in 0..inner_len {
                    data[o * inner_len + k] += src[base + k];
                }
            }
        }
        drop(src);
        let mut out_shape: Vec<usize> = shape.clone();
        if keepdim {
            out_shape[axis] = 1;
        } else {
            out_shape.remove(axis);
        }
        let back: BackFn = Box::new(move |inner: &Inner| {
            let g = inner.grad.borrow();
            let p = &inner.parents[0];
            Tensor::accumulate_grad(&p.inner, |gp| {
                for o in 0..outer {
                    for a in 0..ax {
                        let base = (o * ax + a) * inner_len;
                        for k in 0..inner_len {
                            gp[base + k] += g[o * inner_len + k];
                        }
                    }
                }
            });
        });
        self.out_of(out_shape, data, Some(back), vec![self.clone()])
    }

    pub fn mean_axis(&self, axis: usize, keepdim: bool) -> Tensor {
        let n = self.shape()[axis] as f64;
        self.sum_axis(axis, keepdim).scale(1.0 / n)
    }

    // ---- matrix products ----

    /// 2-D matrix product (n,k) x (k,m) -> (n,m).
    pub fn matmul(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.shape().len(), 2, "matmul: lhs must be rank 2");
        assert_eq!(other.shape().len(), 2, "matmul: rhs must be rank 2");
        let (n, k) = (self.shape()[0], self.shape()[1]);
        let (k2, m) = (other.shape()[0], other.shape()[1]);
        assert_eq!(k, k2, "matmul: inner dims {k} vs {k2}");
        let data = matmul_raw(&self.data(), &other.data(), 1, n, k, m);
        let back: BackFn = Box::new(move |inner: &Inner| {
            matmul_backward(inner, 1, n, k, m);
        });
        self.out_of(vec![n, m], data, Some(back), vec![self.clone(), other.clone()])
    }

    /// Batched matrix product (B,n,k) x (B,k,m) -> (B,n,m).
    pub fn bmm(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.shape().len(), 3, "bmm: lhs must be rank 3");
        assert_eq!(other.shape().len(), 3, "bmm: rhs must be rank 3");
        let (b, n, k) = (self.shape()[0], self.shape()[1], self.shape()[2]);
        let (b2, k2, m) = (other.shape()[0], other.shape()[1], other.shape()[2]);
        assert_eq!(b, b2, "bmm: batch dims {b} vs {b2}");
        assert_eq!(k, k2, "bmm: inner dims {k} vs {k2}");
        let data = matmul_raw(&self.data(), &other.data(), b, n, k, m);
        let back: BackFn = Box::new(move |inner: &Inner| {
            matmul_backward(inner, b, n, k, m);
        });
        self.out_of(vec![b, n, m], data, Some(back), vec![self.clone(), other.clone()])
    }

    // ---- lane ops over the last axis ----

    /// Softmax along the last axis. -inf entries produce exact zeros; an
    /// all -inf lane yields an all-zero lane.
    pub fn softmax_last(&self) -> Tensor {
        let shape = self.shape().to_vec();
        let lane = *shape.last().expect("softmax_last: rank >= 1");
        let lanes = self.numel() / lane;
        let src = self.data();
        let mut data = vec![0.0; src.len()];
        for l in 0..lanes {
            let xs = &src[l * lane..(l + 1) * lane];
            let max = xs.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                continue; // all masked: exact zeros
            }
            let mut sum = 0.0;
            for (k, &x) in xs.iter().enumerate() {
                let e = if x == f64::NEG_INFINITY { 0.0 } else { (x - max).exp() };
                data[l * lane + k] = e;
                sum += e;
            }
            for k in 0..lane {
                data[l * lane + k] /= sum;
            }
        }
        drop(src);
        let back: BackFn = Box::new(move |inner: &Inner| {
            let g = inner.grad.borrow();
            let y = inner.data.borrow();
            let p = &inner.parents[0];
            Tensor::accumulate_grad(&p.inner, |gp| {
                for l in 0..lanes {
                    let base = l * lane;
                    let dot: f64 = (0..lane).map(|k| g[base + k] * y[base + k]).sum();
                    for k in 0..lane {
                        gp[base + k] += y[base + k] * (g[base + k] - dot);
                    }
                }
            });
        });
        self.out_of(shape, data, Some(back), vec![self.clone()])
    }

    /// Numerically stable log-softmax along the last axis (finite inputs).
    pub fn log_softmax_last(&self) -> Tensor {
        let shape = self.shape().to_vec();
        let lane = *shape.last().expect("log_softmax_last: rank >= 1");
        let lanes = self.numel() / lane;
        let src = self.data();
        let mut data = vec![0.0; src.len()];
        for l in 0..lanes {
            let xs = &src[l * lane..(l + 1) * lane];
            let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_sum = xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln() + max;
            for (k, &x) in xs.iter().enumerate() {
                data[l * lane + k] = x - log_sum;
            }
        }
        drop(src);
        let back: BackFn = Box::new(move |inner: &Inner| {
            let g = inner.grad.borrow();
            let y = inner.data.borrow();
            let p = &inner.parents[0];
            Tensor::accumulate_grad(&p.inner, |gp| {
                for l in 0..lanes {
                    let base = l * lane;
                    let gsum: f64 = (0..lane).map(|k| g[base + k]).sum();
                    for k in 0..lane {
                        gp[base + k] += g[base + k] - y[base + k].exp() * gsum;
                    }
                }
            });
        });
        self.out_of(shape, data, Some(back), vec![self.clone()])
    }

    /// Layer normalization over the last axis with affine gain/bias of that
    /// width. Variance uses epsilon 1e-5; a constant lane normalizes to zero
    /// before the affine map.
    pub fn layer_norm_last(&self, gain: &Tensor, bias: &Tensor) -> Tensor {
        const EPS: f64 = 1e-5;
        let shape = self.shape().to_vec();
        let lane = *shape.last().expect("layer_norm_last: rank >= 1");
        assert_eq!(gain.shape(), &[lane], "layer_norm_last: gain width");
        assert_eq!(bias.shape(), &[lane], "layer_norm_last: bias width");
        let lanes = self.numel() / lane;
        let src = self.data();
        let gv = gain.to_vec();
        let bv = bias.to_vec();
        let mut data = vec![0.0; src.len()];
        let mut normalized = vec![0.0; src.len()];
        let mut inv_std = vec![0.0; lanes];
        for l in 0..lanes {
            let xs = &src[l * lane..(l + 1) * lane];
            let mean = xs.iter().sum::<f64>() / lane as f64;
            let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / lane as f64;
            let istd = 1.0 / (var + EPS).sqrt();
            inv_std[l] = istd;
            for (k, &x) in xs.iter().enumerate() {
                let xn = (x - mean) * istd;
                normalized[l * lane + k] = xn;
                data[l * lane + k] = xn * gv[k] + bv[k];
            }
        }
        drop(src);
        let back: BackFn = Box::new(move |inner: &Inner| {
            let g = inner.grad.borrow();
            let px = &inner.parents[0];
            let pg = &inner.parents[1];
            let pb = &inner.parents[2];
            let gval = pg.data().clone();
            if px.inner.requires_grad {
                Tensor::accumulate_grad(&px.inner, |gx| {
                    for l in 0..lanes {
                        let base = l * lane;
                        let istd = inv_std[l];
                        let mut mean_dxn = 0.0;
                        let mut mean_dxn_xn = 0.0;
                        for k in 0..lane {
                            let dxn = g[base + k] * gval[k];
                            mean_dxn += dxn;
                            mean_dxn_xn += dxn * normalized[base + k];
                        }
                        mean_dxn /= lane as f64;
                        mean_dxn_xn /= lane as f64;
                        for k in 0..lane {
                            let dxn = g[base + k] * gval[k];
                            gx[base + k] +=
                                istd * (dxn - mean_dxn - normalized[base + k] * mean_dxn_xn);
                        }
                    }
                });
            }
            if pg.inner.requires_grad {
                Tensor::accumulate_grad(&pg.inner, |gg| {
                    for l in 0..lanes {
                        for k in 0..lane {
                            gg[k] += g[l * lane + k] * normalized[l * lane + k];
                        }
                    }
                });
            }
            if pb.inner.requires_grad {
                Tensor::accumulate_grad(&pb.inner, |gb| {
                    for l in 0..lanes {
                        for k in 0..lane {
                            gb[k] += g[l * lane + k];
                        }
                    }
                });
            }
        });
        self.out_of(shape, data, Some(back), vec![self.clone(), gain.clone(), bias.clone()])
    }

    /// Pick one entry per lane along the last axis: input (..., C) with one
    /// index per leading position -> output of the leading shape.
    pub fn select_last(&self, indices: &[usize]) -> Tensor {
        let shape = self.shape().to_vec();
        let lane = *shape.last().expect("select_last: rank >= 1");
        let lanes = self.numel() / lane;
        assert_eq!(indices.len(), lanes, "select_last: one index per lane");
        let src = self.data();
        let data: Vec<f64> = indices
            .iter()
            .enumerate()
            .map(|(l, &c)| {
                assert!(c < lane, "select_last: index {c} out of range {lane}");
                src[l * lane + c]
            })
            .collect();
        drop(src);
        let idx: Vec<usize> = indices.to_vec();
        let back: BackFn = Box::new(move |inner: &Inner| {
            let g = inner.grad.borrow();
            let p = &inner.parents[0];
            Tensor::accumulate_grad(&p.inner, |gp| {
                for (l, &c) in idx.iter().enumerate() {
                    gp[l * lane + c] += g[l];
                }
            });
        });
        self.out_of(shape[..shape.len() - 1].to_vec(), data, Some(back), vec![self.clone()])
    }
}

fn matmul_raw(a: &[f64], b: &[f64], batch: usize, n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; batch * n * m];
    for bi in 0..batch {
        let ab = &a[bi * n * k..(bi + 1) * n * k];
        let bb = &b[bi * k * m..(bi + 1) * k * m];
        let ob = &mut out[bi * n * m..(bi + 1) * n * m];
        for i in 0..n {
            for p in 0..k {
                let aip = ab[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                let brow = &bb[p * m..(p + 1) * m];
                let orow = &mut ob[i * m..(i + 1) * m];
                for j in 0..m {
                    orow[j] += aip * brow[j];
                }
            }
        }
    }
    out
}

fn matmul_backward(inner: &Inner, batch: usize, n: usize, k: usize, m: usize) {
    let g = inner.grad.borrow();
    let pa = &inner.parents[0];
    let pb = &inner.parents[1];
    let av = pa.data();
    let bv = pb.data();
    if pa.inner.requires_grad {
        // dA = dC * B^T
        Tensor::accumulate_grad(&pa.inner, |ga| {
            for bi in 0..batch {
                let gb = &g[bi * n * m..(bi + 1) * n * m];
                let bb = &bv[bi * k * m..(bi + 1) * k * m];
                let gab = &mut ga[bi * n * k..(bi + 1) * n * k];
                for i in 0..n {
                    for j in 0..m {
                        let gij = gb[i * m + j];
                        if gij == 0.0 {
                            continue;
                        }
                        for p in 0..k {
                            gab[i * k + p] += gij * bb[p * m + j];
                        }
                    }
                }
            }
        });
    }
    if pb.inner.requires_grad {
        // dB = A^T * dC
        Tensor::accumulate_grad(&pb.inner, |gbuf| {
            for bi in 0..batch {
                let gb = &g[bi * n * m..(bi + 1) * n * m];
                let ab = &av[bi * n * k..(bi + 1) * n * k];
                let gbb = &mut gbuf[bi * k * m..(bi + 1) * k * m];
                for i in 0..n {
                    for p in 0..k {
                        let aip = ab[i * k + p];
                        if aip == 0.0 {
                            continue;
                        }
                        for j in 0..m {
                            gbb[p * m + j] += aip * gb[i * m + j];
                        }
                    }
                }
            }
        });
    }
}
