//! Learned positional encoders over Laplacian eigenpairs.
//!
//! Each node (or node pair) gets a length-m sequence built from the lowest
//! eigenpairs, expanded by a linear layer and run through a small
//! transformer encoder; sum pooling over unmasked positions produces a fixed
//! k-dimensional encoding. Padded positions (when m exceeds the node count)
//! are masked out of both attention and pooling, so they contribute exactly
//! nothing.

use rand_chacha::ChaCha8Rng;

use crate::autodiff::nn::{Linear, Mlp, ParamSet};
use crate::autodiff::nn::LayerNorm;
use crate::autodiff::Tensor;
use crate::spectral::EigSelection;
use crate::{Error, Result};

/// One post-norm encoder block: multi-head self-attention with residual and
/// norm, then a two-layer feed-forward with residual and norm.
pub struct EncoderLayer {
    heads: Vec<(Linear, Linear, Linear)>,
    out: Linear,
    ffn: Mlp,
    norm1: LayerNorm,
    norm2: LayerNorm,
}

impl EncoderLayer {
    pub fn new(width: usize, num_heads: usize, rng: &mut ChaCha8Rng) -> Self {
        assert!(num_heads >= 1 && width % num_heads == 0, "width must be divisible by heads");
        let dk = width / num_heads;
        let heads = (0..num_heads)
            .map(|_| {
                (
                    Linear::new(width, dk, rng),
                    Linear::new(width, dk, rng),
                    Linear::new(width, dk, rng),
                )
            })
            .collect();
        EncoderLayer {
            heads,
            out: Linear::new(width, width, rng),
            ffn: Mlp::new(width, 2 * width, width, rng),
            norm1: LayerNorm::new(width),
            norm2: LayerNorm::new(width),
        }
    }

    /// `x` is (batch, seq, width); `key_pad[i]` marks sequence position i as
    /// padding. Padded keys receive exactly zero attention weight.
    pub fn forward(&self, x: &Tensor, key_pad: &[bool]) -> Tensor {
        let shape = x.shape();
        let (b, m, width) = (shape[0], shape[1], shape[2]);
        assert_eq!(key_pad.len(), m, "key_pad length must match sequence length");
        let dk = width / self.heads.len();
        let scale = 1.0 / (dk as f64).sqrt();

        let mut logit_mask = Vec::with_capacity(b * m * m);
        for _ in 0..b * m {
            logit_mask.extend_from_slice(key_pad);
        }

        let mut head_outs = Vec::with_capacity(self.heads.len());
        for (q, k, v) in &self.heads {
            let qh = q.forward(x);
            let kh = k.forward(x);
            let vh = v.forward(x);
            let logits = qh
                .bmm(&kh.transpose_last2())
                .scale(scale)
                .masked_fill(&logit_mask, f64::NEG_INFINITY);
            head_outs.push(logits.softmax_last().bmm(&vh));
        }
        let attn = self.out.forward(&Tensor::concat(&head_outs, 2));
        let h = self.norm1.forward(&x.add(&attn));
        self.norm2.forward(&h.add(&self.ffn.forward(&h)))
    }

    /// A copy sharing the same underlying parameter tensors.
    pub fn shallow_clone(&self) -> EncoderLayer {
        EncoderLayer {
            heads: self.heads.clone(),
            out: self.out.clone(),
            ffn: self.ffn.clone(),
            norm1: self.norm1.clone(),
            norm2: self.norm2.clone(),
        }
    }

    pub fn register(&self, params: &mut ParamSet, prefix: &str) {
        for (i, (q, k, v)) in self.heads.iter().enumerate() {
            q.register(params, &format!("{prefix}.head{i}.q"));
            k.register(params, &format!("{prefix}.head{i}.k"));
            v.register(params, &format!("{prefix}.head{i}.v"));
        }
        self.out.register(params, &format!("{prefix}.out"));
        self.ffn.register(params, &format!("{prefix}.ffn"));
        self.norm1.register(params, &format!("{prefix}.norm1"));
        self.norm2.register(params, &format!("{prefix}.norm2"));
    }
}

/// Node-wise positional encoder: per node, the sequence of (lambda_i,
/// phi_{i,j}) pairs over the m lowest eigenpairs.
pub struct NodeLpeParams {
    pub m: usize,
    pub k: usize,
    pub input_linear: Linear,
    pub encoder: Vec<EncoderLayer>,
}

impl NodeLpeParams {
    pub fn new(m: usize, k: usize, num_heads: usize, layers: usize, rng: &mut ChaCha8Rng) -> Self {
        assert!(k % num_heads == 0, "k must be divisible by the head count");
        NodeLpeParams {
            m,
            k,
            input_linear: Linear::new(2, k, rng),
            encoder: (0..layers).map(|_| EncoderLayer::new(k, num_heads, rng)).collect(),
        }
    }

    pub fn register(&self, params: &mut ParamSet, prefix: &str) {
        self.input_linear.register(params, &format!("{prefix}.input"));
        for (i, layer) in self.encoder.iter().enumerate() {
            layer.register(params, &format!("{prefix}.enc{i}"));
        }
    }
}

/// Edge-wise positional encoder over sign-invariant pair features.
pub struct EdgeLpeParams {
    pub m: usize,
    pub k: usize,
    pub input_linear: Linear,
    pub encoder: Vec<EncoderLayer>,
}

impl EdgeLpeParams {
    pub fn new(m: usize, k: usize, num_heads: usize, layers: usize, rng: &mut ChaCha8Rng) -> Self {
        assert!(k % num_heads == 0, "k must be divisible by the head count");
        EdgeLpeParams {
            m,
            k,
            input_linear: Linear::new(3, k, rng),
            encoder: (0..layers).map(|_| EncoderLayer::new(k, num_heads, rng)).collect(),
        }
    }

    pub fn register(&self, params: &mut ParamSet, prefix: &str) {
        self.input_linear.register(params, &format!("{prefix}.input"));
        for (i, layer) in self.encoder.iter().enumerate() {
            layer.register(params, &format!("{prefix}.enc{i}"));
        }
    }
}

fn check_m(sel: &EigSelection, m: usize, what: &str) -> Result<()> {
    if sel.m() != m {
        return Err(Error::ShapeMismatch {
            op: what.into(),
            details: format!("selection has m = {}, parameters expect m = {}", sel.m(), m),
        });
    }
    Ok(())
}

/// Pooling that skips padded sequence positions: multiply by the 0/1 mask
/// column and sum over the sequence axis.
fn masked_sum_pool(x: &Tensor, mask: &[bool]) -> Tensor {
    let m = mask.len();
    let weights: Vec<f64> = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    x.mul(&Tensor::constant(&[m, 1], weights)).sum_axis(1, false)
}

/// Positional encodings for every node: an N x k matrix (as a Tensor).
pub fn node_lpe_forward(sel: &EigSelection, p: &NodeLpeParams) -> Result<Tensor> {
    check_m(sel, p.m, "node_lpe_forward")?;
    let n = sel.n;
    let m = sel.m();
    let mut data = Vec::with_capacity(n * m * 2);
    for j in 0..n {
        for i in 0..m {
            data.push(sel.eigenvalues[i]);
            data.push(sel.eigenvectors[i][j]);
        }
    }
    let input = Tensor::constant(&[n, m, 2], data);
    let mut x = p.input_linear.forward(&input);
    let key_pad: Vec<bool> = sel.mask.iter().map(|&real| !real).collect();
    for layer in &p.encoder {
        x = layer.forward(&x, &key_pad);
    }
    Ok(masked_sum_pool(&x, &sel.mask))
}

/// The m x 3 sign-invariant feature matrix for a node pair: per eigenpair,
/// (lambda_i, |phi_{i,j1} - phi_{i,j2}|, phi_{i,j1} * phi_{i,j2}).
pub fn edge_lpe_features(sel: &EigSelection, j1: usize, j2: usize) -> Result<Vec<[f64; 3]>> {
    if j1 >= sel.n || j2 >= sel.n {
        return Err(Error::InvalidArgument(format!(
            "node pair ({j1}, {j2}) out of range for {} nodes",
            sel.n
        )));
    }
    Ok((0..sel.m())
        .map(|i| {
            let (a, b) = (sel.eigenvectors[i][j1], sel.eigenvectors[i][j2]);
            [sel.eigenvalues[i], (a - b).abs(), a * b]
        })
        .collect())
}

/// Positional encodings for a list of node pairs: a |pairs| x k matrix.
pub fn edge_lpe_forward(
    sel: &EigSelection,
    pairs: &[(usize, usize)],
    p: &EdgeLpeParams,
) -> Result<Tensor> {
    check_m(sel, p.m, "edge_lpe_forward")?;
    let m = sel.m();
    let mut data = Vec::with_capacity(pairs.len() * m * 3);
    for &(j1, j2) in pairs {
        for row in edge_lpe_features(sel, j1, j2)? {
            data.extend_from_slice(&row);
        }
    }
    let input = Tensor::constant(&[pairs.len(), m, 3], data);
    let mut x = p.input_linear.forward(&input);
    let key_pad: Vec<bool> = sel.mask.iter().map(|&real| !real).collect();
    for layer in &p.encoder {
        x = layer.forward(&x, &key_pad);
    }
    Ok(masked_sum_pool(&x, &sel.mask))
}
