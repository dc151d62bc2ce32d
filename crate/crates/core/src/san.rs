//! The main graph transformer: dual attention over real and added edges with
//! a gamma-controlled mixture between the two.
//!
//! Every ordered node pair is classified as "real" (connected in the input
//! graph) or "added" (the full-graph complement). Each class has its own
//! query/key/edge projections. Per query node the attention weights are a
//! softmax within each class, mixed with coefficients 1/(1+gamma) and
//! gamma/(1+gamma); gamma = 0 recovers sparse attention exactly.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::nn::{LayerNorm, Linear, Mlp, ParamSet};
use crate::autodiff::Tensor;
use crate::graph::{Graph, Task};
use crate::lpe::{edge_lpe_forward, node_lpe_forward, EdgeLpeParams, NodeLpeParams};
use crate::spectral::EigSelection;
use crate::{Error, Result};

pub const LOGIT_CLAMP: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    Mean,
    Sum,
}

/// Which branch the self pair (i, i) attends through. Either way it uses the
/// dedicated self-loop embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelfLoopBranch {
    Real,
    Added,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpeKind {
    Node,
    Edge,
    None,
}

/// `Sparse` drops the added branch entirely: no added-pair logits are ever
/// computed. It is the reference implementation that `gamma = 0` must match
/// bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionKind {
    Sparse,
    Full,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "L")]
    pub num_layers: usize,
    #[serde(rename = "H")]
    pub num_heads: usize,
    pub d: usize,
    pub k_lpe: usize,
    pub m: usize,
    pub gamma: f64,
    pub readout: Readout,
    pub self_loop_branch: SelfLoopBranch,
    pub lpe_kind: LpeKind,
    pub attention: AttentionKind,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            num_layers: 2,
            num_heads: 4,
            d: 32,
            k_lpe: 16,
            m: 8,
            gamma: 0.1,
            readout: Readout::Mean,
            self_loop_branch: SelfLoopBranch::Real,
            lpe_kind: LpeKind::Node,
            attention: AttentionKind::Full,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.num_heads == 0 || self.d == 0 || self.m == 0 {
            return Err(Error::InvalidArgument("L, H, d, m must all be >= 1".into()));
        }
        if self.d % self.num_heads != 0 {
            return Err(Error::InvalidArgument(format!(
                "d = {} must be divisible by H = {}",
                self.d, self.num_heads
            )));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::InvalidArgument("gamma must be a nonnegative number".into()));
        }
        if self.lpe_kind != LpeKind::None && self.k_lpe == 0 {
            return Err(Error::InvalidArgument("k_lpe must be >= 1 when an LPE is active".into()));
        }
        Ok(())
    }
}

pub struct HeadParams {
    pub q1: Linear,
    pub k1: Linear,
    pub e1: Linear,
    pub q2: Linear,
    pub k2: Linear,
    pub e2: Linear,
    pub v: Linear,
}

pub struct LayerParams {
    pub heads: Vec<HeadParams>,
    pub o: Linear,
    pub ffn: Mlp,
    pub norm1: LayerNorm,
    pub norm2: LayerNorm,
}

/// All learnable weights: positional encoder plus the main transformer.
pub struct SanParams {
    pub config: ModelConfig,
    pub d_in: usize,
    pub edge_dim: usize,
    pub out_dim: usize,
    pub node_embed: Linear,
    /// Reconciles the width after concatenating the positional encoding:
    /// (d + k_lpe) -> d. Absent when no node LPE is used.
    pub input_proj: Option<Linear>,
    pub edge_embed_real: Linear,
    pub added_embed: Tensor,
    pub self_embed: Tensor,
    /// Projects edge positional encodings into the pair-embedding width.
    pub edge_pe_proj: Option<Linear>,
    pub node_lpe: Option<NodeLpeParams>,
    pub edge_lpe: Option<EdgeLpeParams>,
    pub layers: Vec<LayerParams>,
    pub readout_mlp: Mlp,
}

fn lpe_heads(k: usize) -> usize {
    [4usize, 2, 1].into_iter().find(|h| k % h == 0).unwrap()
}

impl SanParams {
    /// `d_in` is the node feature width (1 for featureless graphs),
    /// `edge_dim` the edge feature width (1 when absent), `out_dim` the
    /// prediction width.
    pub fn new(
        config: ModelConfig,
        d_in: usize,
        edge_dim: usize,
        out_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        config.validate()?;
        if d_in == 0 || edge_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidArgument("d_in, edge_dim, out_dim must be >= 1".into()));
        }
        let d = config.d;
        let k = config.k_lpe;
        let node_lpe = match config.lpe_kind {
            LpeKind::Node => Some(NodeLpeParams::new(config.m, k, lpe_heads(k), 1, rng)),
            _ => None,
        };
        let edge_lpe = match config.lpe_kind {
            LpeKind::Edge => Some(EdgeLpeParams::new(config.m, k, lpe_heads(k), 1, rng)),
            _ => None,
        };
        let input_proj = node_lpe.as_ref().map(|_| Linear::new(d + k, d, rng));
        let edge_pe_proj = edge_lpe.as_ref().map(|_| Linear::new(k, d, rng));
        let dk = d / config.num_heads;
        let layers = (0..config.num_layers)
            .map(|_| LayerParams {
                heads: (0..config.num_heads)
                    .map(|_| HeadParams {
                        q1: Linear::new(d, dk, rng),
                        k1: Linear::new(d, dk, rng),
                        e1: Linear::new(d, dk, rng),
                        q2: Linear::new(d, dk, rng),
                        k2: Linear::new(d, dk, rng),
                        e2: Linear::new(d, dk, rng),
                        v: Linear::new(d, dk, rng),
                    })
                    .collect(),
                o: Linear::new(d, d, rng),
                ffn: Mlp::new(d, 2 * d, d, rng),
                norm1: LayerNorm::new(d),
                norm2: LayerNorm::new(d),
            })
            .collect();
        let scale = (2.0 / (d + d) as f64).sqrt();
        Ok(SanParams {
            node_embed: Linear::new(d_in, d, rng),
            input_proj,
            edge_embed_real: Linear::new(edge_dim, d, rng),
            added_embed: Tensor::randn_param(&[d], scale, rng),
            self_embed: Tensor::randn_param(&[d], scale, rng),
            edge_pe_proj,
            node_lpe,
            edge_lpe,
            layers,
            readout_mlp: Mlp::new(d, d, out_dim, rng),
            config,
            d_in,
            edge_dim,
            out_dim,
        })
    }

    pub fn named_params(&self) -> Vec<(String, Tensor)> {
        let mut ps = ParamSet::new();
        self.node_embed.register(&mut ps, "node_embed");
        if let Some(p) = &self.input_proj {
            p.register(&mut ps, "input_proj");
        }
        self.edge_embed_real.register(&mut ps, "edge_embed_real");
        ps.register("added_embed", &self.added_embed);
        ps.register("self_embed", &self.self_embed);
        if let Some(p) = &self.edge_pe_proj {
            p.register(&mut ps, "edge_pe_proj");
        }
        if let Some(p) = &self.node_lpe {
            p.register(&mut ps, "node_lpe");
        }
        if let Some(p) = &self.edge_lpe {
            p.register(&mut ps, "edge_lpe");
        }
        for (l, layer) in self.layers.iter().enumerate() {
            for (h, head) in layer.heads.iter().enumerate() {
                let pfx = format!("layers.{l}.heads.{h}");
                head.q1.register(&mut ps, &format!("{pfx}.q1"));
                head.k1.register(&mut ps, &format!("{pfx}.k1"));
                head.e1.register(&mut ps, &format!("{pfx}.e1"));
                head.q2.register(&mut ps, &format!("{pfx}.q2"));
                head.k2.register(&mut ps, &format!("{pfx}.k2"));
                head.e2.register(&mut ps, &format!("{pfx}.e2"));
                head.v.register(&mut ps, &format!("{pfx}.v"));
            }
            layer.o.register(&mut ps, &format!("layers.{l}.o"));
            layer.ffn.register(&mut ps, &format!("layers.{l}.ffn"));
            layer.norm1.register(&mut ps, &format!("layers.{l}.norm1"));
            layer.norm2.register(&mut ps, &format!("layers.{l}.norm2"));
        }
        self.readout_mlp.register(&mut ps, "readout");
        ps.into_vec()
    }
}

/// One graph prepared for the forward pass. The eigenpair selection is
/// optional only when no positional encoder is configured.
pub struct SanInput<'a> {
    pub graph: &'a Graph,
    pub sel: Option<&'a EigSelection>,
}

/// Pair classification masks, row-major over ordered pairs (i, j).
pub struct PairMasks {
    pub real: Vec<bool>,
    pub added: Vec<bool>,
    pub self_: Vec<bool>,
}

pub fn pair_masks(g: &Graph, branch: SelfLoopBranch) -> PairMasks {
    let n = g.num_nodes;
    let mut real = vec![false; n * n];
    let mut added = vec![false; n * n];
    let mut self_ = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            let idx = i * n + j;
            if i == j {
                self_[idx] = true;
                match branch {
                    SelfLoopBranch::Real => real[idx] = true,
                    SelfLoopBranch::Added => added[idx] = true,
                }
            } else if g.has_edge(i, j) {
                real[idx] = true;
            } else {
                added[idx] = true;
            }
        }
    }
    PairMasks { real, added, self_ }
}

fn mask_to_column(mask: &[bool]) -> Vec<f64> {
    mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

/// Dense (N*N, d) pair-embedding tensor: real edges through the edge-feature
/// linear, added pairs through a shared learned vector, self pairs through a
/// dedicated one. When the sparse reference path is active the added
/// embedding never enters the computation.
fn pair_embeddings(input: &SanInput, p: &SanParams, masks: &PairMasks) -> Result<Tensor> {
    let g = input.graph;
    let n = g.num_nodes;
    let d = p.config.d;
    let f = p.edge_dim;

    let mut feats = vec![0.0; n * n * f];
    for (eidx, &(a, b)) in g.edges().iter().enumerate() {
        let row: Vec<f64> = match &g.edge_features {
            Some(ef) => {
                if ef[eidx].len() != f {
                    return Err(Error::ShapeMismatch {
                        op: "san_forward".into(),
                        details: format!(
                            "edge feature width {} does not match model edge_dim {}",
                            ef[eidx].len(),
                            f
                        ),
                    });
                }
                ef[eidx].clone()
            }
            None => {
                if f != 1 {
                    return Err(Error::ShapeMismatch {
                        op: "san_forward".into(),
                        details: format!("graph has no edge features but model edge_dim = {f}"),
                    });
                }
                vec![1.0]
            }
        };
        for (i, j) in [(a, b), (b, a)] {
            feats[(i * n + j) * f..(i * n + j + 1) * f].copy_from_slice(&row);
        }
    }
    let real_part = p
        .edge_embed_real
        .forward(&Tensor::constant(&[n * n, f], feats))
        .mul(&Tensor::constant(&[n * n, 1], mask_to_column(&edges_only(masks))));

    let self_part = p
        .self_embed
        .reshape(&[1, d])
        .mul(&Tensor::constant(&[n * n, 1], mask_to_column(&masks.self_)));

    let mut e = real_part.add(&self_part);
    if p.config.attention == AttentionKind::Full {
        let added_offdiag: Vec<bool> = masks
            .added
            .iter()
            .zip(&masks.self_)
            .map(|(&a, &s)| a && !s)
            .collect();
        let added_part = p
            .added_embed
            .reshape(&[1, d])
            .mul(&Tensor::constant(&[n * n, 1], mask_to_column(&added_offdiag)));
        e = e.add(&added_part);
    }

    if let (Some(lpe), Some(proj)) = (&p.edge_lpe, &p.edge_pe_proj) {
        let sel = input.sel.ok_or_else(|| {
            Error::InvalidArgument("edge LPE requires an eigenpair selection".into())
        })?;
        let pairs: Vec<(usize, usize)> =
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        let pe = edge_lpe_forward(sel, &pairs, lpe)?;
        e = e.add(&proj.forward(&pe));
    }
    Ok(e)
}

/// Real off-diagonal pairs plus real-branch self pairs get zero here; only
/// actual edges carry the edge-feature embedding.
fn edges_only(masks: &PairMasks) -> Vec<bool> {
    masks
        .real
        .iter()
        .zip(&masks.self_)
        .map(|(&r, &s)| r && !s)
        .collect()
}

/// Clamped attention logits for one branch of one head: per ordered pair,
/// sum over the head width of (Q h_i) (K h_j) (E e_ij), scaled by 1/sqrt(dk).
pub fn attention_logits(
    h: &Tensor,
    pair_embed: &Tensor,
    q: &Linear,
    k: &Linear,
    e: &Linear,
) -> Tensor {
    let n = h.shape()[0];
    let dk = q.weight.shape()[1];
    let qh = q.forward(h).reshape(&[n, 1, dk]);
    let kh = k.forward(h).reshape(&[1, n, dk]);
    let eh = e.forward(pair_embed).reshape(&[n, n, dk]);
    qh.mul(&kh)
        .mul(&eh)
        .sum_axis(2, false)
        .scale(1.0 / (dk as f64).sqrt())
        .clamp(-LOGIT_CLAMP, LOGIT_CLAMP)
}

/// Mix the two branch softmaxes. Each branch is softmaxed within its own
/// pair class; rows where one class is empty give the other class full
/// weight. `added_logits` is `None` on the sparse path.
pub fn attention_weights(
    real_logits: &Tensor,
    added_logits: Option<&Tensor>,
    masks: &PairMasks,
    gamma: f64,
) -> Tensor {
    let n = real_logits.shape()[0];
    let not_real: Vec<bool> = masks.real.iter().map(|&b| !b).collect();
    let w_real = real_logits.masked_fill(&not_real, f64::NEG_INFINITY).softmax_last();

    let added_logits = match added_logits {
        Some(t) => t,
        None => return w_real,
    };
    let not_added: Vec<bool> = masks.added.iter().map(|&b| !b).collect();
    let w_added = added_logits.masked_fill(&not_added, f64::NEG_INFINITY).softmax_last();

    // per-row mixture coefficients; an empty class hands its mass to the other
    let mut c_real = vec![0.0; n];
    let mut c_added = vec![0.0; n];
    for i in 0..n {
        let has_real = masks.real[i * n..(i + 1) * n].iter().any(|&b| b);
        let has_added = masks.added[i * n..(i + 1) * n].iter().any(|&b| b);
        match (has_real, has_added) {
            (true, true) => {
                c_real[i] = 1.0 / (1.0 + gamma);
                c_added[i] = gamma / (1.0 + gamma);
            }
            (true, false) => c_real[i] = 1.0,
            (false, true) => c_added[i] = 1.0,
            (false, false) => unreachable!("every row contains its self pair"),
        }
    }
    w_real
        .mul(&Tensor::constant(&[n, 1], c_real))
        .add(&w_added.mul(&Tensor::constant(&[n, 1], c_added)))
}

/// One transformer layer: dual attention, output projection, then the
/// post-norm residual / feed-forward sequence. Returns the new node states
/// and the summed non-neighbor attention mass for diagnostics.
pub fn san_layer(
    h: &Tensor,
    pair_embed: &Tensor,
    masks: &PairMasks,
    layer: &LayerParams,
    config: &ModelConfig,
) -> (Tensor, f64) {
    let n = h.shape()[0];
    let mut head_outs = Vec::with_capacity(layer.heads.len());
    let mut added_mass = 0.0;
    for head in &layer.heads {
        let real_logits = attention_logits(h, pair_embed, &head.q1, &head.k1, &head.e1);
        let added_logits = (config.attention == AttentionKind::Full)
            .then(|| attention_logits(h, pair_embed, &head.q2, &head.k2, &head.e2));
        let w = attention_weights(&real_logits, added_logits.as_ref(), masks, config.gamma);
        {
            let wd = w.data();
            for (idx, &is_added) in masks.added.iter().enumerate() {
                if is_added {
                    added_mass += wd[idx];
                }
            }
        }
        head_outs.push(w.matmul(&head.v.forward(h)));
    }
    added_mass /= (n * layer.heads.len()) as f64;
    let attn = layer.o.forward(&Tensor::concat(&head_outs, 1));
    let h1 = layer.norm1.forward(&h.add(&attn));
    let h2 = layer.norm2.forward(&h1.add(&layer.ffn.forward(&h1)));
    (h2, added_mass)
}

pub struct SanOutput {
    /// Node tasks: (N, out_dim). Graph tasks: (1, out_dim).
    pub pred: Tensor,
    /// Mean attention mass on added pairs, averaged over rows, heads, layers.
    pub nonneighbor_mass: f64,
}

pub fn san_forward(input: &SanInput, p: &SanParams, task: Task) -> Result<SanOutput> {
    let g = input.graph;
    let n = g.num_nodes;
    let d_in = p.d_in;

    let x = match &g.node_features {
        Some(feats) => {
            let w = feats.first().map_or(0, Vec::len);
            if w != d_in {
                return Err(Error::ShapeMismatch {
                    op: "san_forward".into(),
                    details: format!("node feature width {w} does not match model d_in {d_in}"),
                });
            }
            Tensor::constant(&[n, d_in], feats.iter().flatten().copied().collect())
        }
        None => {
            if d_in != 1 {
                return Err(Error::ShapeMismatch {
                    op: "san_forward".into(),
                    details: format!("graph has no node features but model d_in = {d_in}"),
                });
            }
            Tensor::constant(&[n, 1], vec![1.0; n])
        }
    };

    let mut h = p.node_embed.forward(&x);
    if let (Some(lpe), Some(proj)) = (&p.node_lpe, &p.input_proj) {
        let sel = input.sel.ok_or_else(|| {
            Error::InvalidArgument("node LPE requires an eigenpair selection".into())
        })?;
        if sel.n != n {
            return Err(Error::ShapeMismatch {
                op: "san_forward".into(),
                details: format!("selection is for {} nodes, graph has {n}", sel.n),
            });
        }
        let pe = node_lpe_forward(sel, lpe)?;
        h = proj.forward(&Tensor::concat(&[h, pe], 1));
    }

    let masks = pair_masks(g, p.config.self_loop_branch);
    let pair_embed = pair_embeddings(input, p, &masks)?;

    let mut mass_sum = 0.0;
    for layer in &p.layers {
        let (next, mass) = san_layer(&h, &pair_embed, &masks, layer, &p.config);
        h = next;
        mass_sum += mass;
    }
    let nonneighbor_mass = mass_sum / p.layers.len() as f64;

    let pred = match task {
        Task::NodeClassification => p.readout_mlp.forward(&h),
        Task::GraphRegression | Task::GraphClassification => {
            let pooled = match p.config.readout {
                Readout::Mean => h.mean_axis(0, false),
                Readout::Sum => h.sum_axis(0, false),
            };
            p.readout_mlp.forward(&pooled.reshape(&[1, p.config.d]))
        }
    };
    Ok(SanOutput { pred, nonneighbor_mass })
}
