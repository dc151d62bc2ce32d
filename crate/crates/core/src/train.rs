//! Training loop: Adam with reduce-on-plateau scheduling, per-task losses,
//! sign-flip augmentation, and the gamma-sweep harness.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::graph::{Dataset, Graph, Label, Task};
use crate::san::{san_forward, LpeKind, ModelConfig, SanInput, SanParams};
use crate::spectral::{
    eigendecompose, random_sign_flip, select_eigpairs, EigSelection, LaplacianKind,
};
use crate::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub lr_init: f64,
    pub lr_reduce_factor: f64,
    pub patience: usize,
    pub lr_min: f64,
    pub weight_decay: f64,
    /// Input-feature dropout probability, applied during training only.
    pub dropout: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub sign_flip_augment: bool,
    #[serde(default)]
    pub gamma_sweep: Option<Vec<f64>>,
    /// Stop once the learning rate has been reduced to `lr_min` and another
    /// full plateau passes there.
    #[serde(default = "default_true")]
    pub stop_when_floored: bool,
}

fn default_true() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr_init: 5e-3,
            lr_reduce_factor: 0.5,
            patience: 10,
            lr_min: 1e-5,
            weight_decay: 0.0,
            dropout: 0.0,
            batch_size: 16,
            max_epochs: 100,
            seed: 0,
            sign_flip_augment: true,
            gamma_sweep: None,
            stop_when_floored: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_min <= self.lr_init) {
            return Err(Error::InvalidArgument("lr_min must be <= lr_init".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidArgument("patience must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument("dropout must be in [0, 1)".into()));
        }
        if !(self.lr_reduce_factor > 0.0 && self.lr_reduce_factor < 1.0) {
            return Err(Error::InvalidArgument("lr_reduce_factor must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// First/second moment estimates, one pair of buffers per parameter tensor.
pub struct AdamState {
    pub t: usize,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &[(String, Tensor)]) -> Self {
        AdamState {
            t: 0,
            m: params.iter().map(|(_, p)| vec![0.0; p.numel()]).collect(),
            v: params.iter().map(|(_, p)| vec![0.0; p.numel()]).collect(),
        }
    }
}

/// Standard bias-corrected Adam update, reading gradients off the tensors.
/// Weight decay is the classic L2 form folded into the gradient.
pub fn adam_step(
    params: &[(String, Tensor)],
    state: &mut AdamState,
    lr: f64,
    weight_decay: f64,
) {
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    for (idx, (_, p)) in params.iter().enumerate() {
        let grad = p.grad();
        let m = &mut state.m[idx];
        let v = &mut state.v[idx];
        p.update_data(|data| {
            for k in 0..data.len() {
                let g = grad[k] + weight_decay * data[k];
                m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * g;
                v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * g * g;
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                data[k] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        });
    }
}

/// Reduce-on-plateau scheduler over a lower-is-better validation metric.
pub struct PlateauState {
    pub lr: f64,
    factor: f64,
    patience: usize,
    lr_min: f64,
    best: f64,
    since_improve: usize,
    /// Set once a plateau is hit while the learning rate already sits at the
    /// minimum; callers may stop training then.
    pub floored: bool,
}

impl PlateauState {
    pub fn new(cfg: &TrainConfig) -> Self {
        PlateauState {
            lr: cfg.lr_init,
            factor: cfg.lr_reduce_factor,
            patience: cfg.patience,
            lr_min: cfg.lr_min,
            best: f64::INFINITY,
            since_improve: 0,
            floored: false,
        }
    }

    /// Feed one epoch's validation metric; returns the learning rate to use
    /// from now on.
    pub fn observe(&mut self, metric: f64) -> f64 {
        if metric < self.best {
            self.best = metric;
            self.since_improve = 0;
            return self.lr;
        }
        self.since_improve += 1;
        if self.since_improve >= self.patience {
            self.since_improve = 0;
            if self.lr <= self.lr_min {
                self.floored = true;
            } else {
                self.lr = (self.lr * self.factor).max(self.lr_min);
            }
        }
        self.lr
    }
}

/// Inverse-frequency class weights from label counts; absent classes get 0.
fn class_weights(counts: &[usize]) -> Vec<f64> {
    let total: usize = counts.iter().sum();
    let present = counts.iter().filter(|&&c| c > 0).count().max(1);
    counts
        .iter()
        .map(|&c| if c > 0 { total as f64 / (present as f64 * c as f64) } else { 0.0 })
        .collect()
}

fn graph_scalar_label(g: &Graph) -> Result<f64> {
    match &g.graph_label {
        Some(Label::Scalar(y)) => Ok(*y),
        _ => Err(Error::TaskMismatch("graph regression needs a scalar graph label".into())),
    }
}

fn graph_class_label(g: &Graph) -> Result<usize> {
    match &g.graph_label {
        Some(Label::Class(c)) => Ok(*c),
        _ => Err(Error::TaskMismatch("graph classification needs a class graph label".into())),
    }
}

fn node_labels(g: &Graph) -> Result<&[usize]> {
    g.node_labels
        .as_deref()
        .ok_or_else(|| Error::TaskMismatch("node classification needs node labels".into()))
}

/// Class-weighted cross entropy for one graph's node predictions, with the
/// weights supplied by the caller (computed per batch).
fn node_ce_terms(pred: &Tensor, labels: &[usize], weights: &[f64]) -> (Tensor, f64) {
    let n = labels.len();
    let logp = pred.log_softmax_last();
    let picked = logp.select_last(labels);
    let w: Vec<f64> = labels.iter().map(|&c| weights[c]).collect();
    let w_sum: f64 = w.iter().sum();
    let weighted = picked.mul(&Tensor::constant(&[n], w)).sum_all().neg();
    (weighted, w_sum)
}

/// Binary cross entropy with a logit input, in the numerically stable
/// `relu(x) - x y + ln(1 + exp(-|x|))` form.
fn bce_with_logit(pred: &Tensor, y: f64) -> Tensor {
    let x = pred.sum_all();
    x.relu()
        .sub(&x.scale(y))
        .add(&x.abs().neg().exp().add_scalar(1.0).ln())
}

/// Loss for a single graph. Node-classification class weights are the
/// inverse class frequencies of this graph's own labels; batched training
/// computes them over the whole batch instead.
pub fn loss(task: Task, pred: &Tensor, g: &Graph) -> Result<Tensor> {
    match task {
        Task::GraphRegression => {
            let y = graph_scalar_label(g)?;
            Ok(pred.sum_all().add_scalar(-y).abs())
        }
        Task::GraphClassification => {
            let y = graph_class_label(g)?;
            if y > 1 {
                return Err(Error::TaskMismatch("binary classification needs labels in {0,1}".into()));
            }
            Ok(bce_with_logit(pred, y as f64))
        }
        Task::NodeClassification => {
            let labels = node_labels(g)?;
            let num_classes = pred.shape()[1];
            let mut counts = vec![0usize; num_classes];
            for &c in labels {
                if c >= num_classes {
                    return Err(Error::TaskMismatch(format!(
                        "node label {c} out of range for {num_classes} classes"
                    )));
                }
                counts[c] += 1;
            }
            let weights = class_weights(&counts);
            let (terms, w_sum) = node_ce_terms(pred, labels, &weights);
            Ok(terms.scale(1.0 / w_sum))
        }
    }
}

/// Mean per-class recall over the classes present in `labels`.
pub fn weighted_accuracy(preds: &[usize], labels: &[usize], num_classes: usize) -> f64 {
    let mut hit = vec![0usize; num_classes];
    let mut count = vec![0usize; num_classes];
    for (&p, &y) in preds.iter().zip(labels) {
        count[y] += 1;
        if p == y {
            hit[y] += 1;
        }
    }
    let mut recall_sum = 0.0;
    let mut present = 0;
    for c in 0..num_classes {
        if count[c] > 0 {
            recall_sum += hit[c] as f64 / count[c] as f64;
            present += 1;
        }
    }
    if present == 0 {
        0.0
    } else {
        recall_sum / present as f64
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_metric: f64,
    pub test_metric: f64,
}

/// One training run's artifact: per-epoch curves plus the restored-best test
/// evaluation. Metrics are in natural units (accuracy for classification,
/// mean absolute error for regression).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub task: Task,
    pub gamma: f64,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub test_metric: f64,
    pub final_train_loss: f64,
    /// Mean attention mass on non-neighbor pairs, measured on the test split
    /// with the restored best parameters.
    pub nonneighbor_mass: f64,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl RunRecord {
    /// CSV with a header row; floats carry 17 significant digits so output
    /// comparison can be exact.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,lr,train_loss,val_metric,test_metric\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                e.epoch, e.lr, e.train_loss, e.val_metric, e.test_metric
            ));
        }
        out
    }
}

struct Prepared {
    sels: Vec<Option<EigSelection>>,
    d_in: usize,
    edge_dim: usize,
    out_dim: usize,
}

/// Model dimensions implied by a dataset: (d_in, edge_dim, out_dim).
pub fn data_dims(ds: &Dataset) -> Result<(usize, usize, usize)> {
    let first = ds
        .graphs
        .first()
        .ok_or_else(|| Error::InvalidArgument("dataset has no graphs".into()))?;
    let d_in = first.node_feature_dim().max(1);
    let edge_dim = first.edge_feature_dim().max(1);
    let out_dim = match ds.task {
        Task::GraphRegression | Task::GraphClassification => 1,
        Task::NodeClassification => {
            let max = ds
                .graphs
                .iter()
                .filter_map(|g| g.node_labels.as_ref())
                .flatten()
                .copied()
                .max()
                .ok_or_else(|| Error::TaskMismatch("no node labels in dataset".into()))?;
            max + 1
        }
    };
    Ok((d_in, edge_dim, out_dim))
}

fn prepare(ds: &Dataset, model_cfg: &ModelConfig) -> Result<Prepared> {
    let (d_in, edge_dim, out_dim) = data_dims(ds)?;
    let sels = if model_cfg.lpe_kind == LpeKind::None {
        vec![None; ds.graphs.len()]
    } else {
        ds.graphs
            .iter()
            .map(|g| {
                let sd = eigendecompose(g, LaplacianKind::Combinatorial)?;
                Ok(Some(select_eigpairs(&sd, model_cfg.m)?))
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(Prepared { sels, d_in, edge_dim, out_dim })
}

fn forward_graph(
    g: &Graph,
    sel: Option<&EigSelection>,
    params: &SanParams,
    task: Task,
) -> Result<crate::san::SanOutput> {
    san_forward(&SanInput { graph: g, sel }, params, task)
}

/// Evaluate a split with canonical eigenvector signs. Returns
/// (mean loss, metric, mean non-neighbor mass).
fn eval_split(
    ds: &Dataset,
    indices: &[usize],
    prepared: &Prepared,
    params: &SanParams,
) -> Result<(f64, f64, f64)> {
    if indices.is_empty() {
        return Ok((0.0, 0.0, 0.0));
    }
    let task = ds.task;
    let mut loss_sum = 0.0;
    let mut mass_sum = 0.0;
    let mut preds = Vec::new();
    let mut labels = Vec::new();
    let mut abs_err_sum = 0.0;
    let mut node_count = 0usize;
    for &gi in indices {
        let g = &ds.graphs[gi];
        let out = forward_graph(g, prepared.sels[gi].as_ref(), params, task)?;
        mass_sum += out.nonneighbor_mass;
        loss_sum += loss(task, &out.pred, g)?.item();
        match task {
            Task::GraphRegression => {
                abs_err_sum += (out.pred.item() - graph_scalar_label(g)?).abs();
            }
            Task::GraphClassification => {
                preds.push(usize::from(out.pred.item() > 0.0));
                labels.push(graph_class_label(g)?);
            }
            Task::NodeClassification => {
                let data = out.pred.to_vec();
                let c = prepared.out_dim;
                for (j, &y) in node_labels(g)?.iter().enumerate() {
                    preds.push(argmax(&data[j * c..(j + 1) * c]));
                    labels.push(y);
                }
                node_count += g.num_nodes;
            }
        }
    }
    let _ = node_count;
    let metric = match task {
        Task::GraphRegression => abs_err_sum / indices.len() as f64,
        Task::GraphClassification => weighted_accuracy(&preds, &labels, 2),
        Task::NodeClassification => weighted_accuracy(&preds, &labels, prepared.out_dim),
    };
    Ok((loss_sum / indices.len() as f64, metric, mass_sum / indices.len() as f64))
}

/// Lower-is-better transform for scheduling and best-model selection.
fn scheduler_metric(task: Task, metric: f64) -> f64 {
    match task {
        Task::GraphRegression => metric,
        Task::GraphClassification | Task::NodeClassification => 1.0 - metric,
    }
}

/// Batch loss over a set of graphs. Node-classification class weights are
/// the inverse class frequencies over the whole batch.
fn batch_loss(
    ds: &Dataset,
    batch: &[usize],
    prepared: &Prepared,
    params: &SanParams,
    epoch_sels: &[Option<EigSelection>],
) -> Result<Tensor> {
    let task = ds.task;
    if task == Task::NodeClassification {
        let mut counts = vec![0usize; prepared.out_dim];
        for &gi in batch {
            for &c in node_labels(&ds.graphs[gi])? {
                if c >= prepared.out_dim {
                    return Err(Error::TaskMismatch(format!(
                        "node label {c} out of range for {} classes",
                        prepared.out_dim
                    )));
                }
                counts[c] += 1;
            }
        }
        let weights = class_weights(&counts);
        let mut total: Option<Tensor> = None;
        let mut w_total = 0.0;
        for &gi in batch {
            let g = &ds.graphs[gi];
            let out = forward_graph(g, epoch_sels[gi].as_ref(), params, task)?;
            let (term, w_sum) = node_ce_terms(&out.pred, node_labels(g)?, &weights);
            w_total += w_sum;
            total = Some(match total {
                Some(t) => t.add(&term),
                None => term,
            });
        }
        Ok(total.expect("non-empty batch").scale(1.0 / w_total))
    } else {
        let mut total: Option<Tensor> = None;
        for &gi in batch {
            let g = &ds.graphs[gi];
            let out = forward_graph(g, epoch_sels[gi].as_ref(), params, task)?;
            let term = loss(task, &out.pred, g)?;
            total = Some(match total {
                Some(t) => t.add(&term),
                None => term,
            });
        }
        Ok(total.expect("non-empty batch").scale(1.0 / batch.len() as f64))
    }
}

fn snapshot(params: &[(String, Tensor)]) -> Vec<Vec<f64>> {
    params.iter().map(|(_, t)| t.to_vec()).collect()
}

fn restore(params: &[(String, Tensor)], snap: &[Vec<f64>]) {
    for ((_, t), values) in params.iter().zip(snap) {
        t.update_data(|d| d.copy_from_slice(values));
    }
}

/// Apply input-feature dropout to a graph (training-time regularization).
fn dropout_features(g: &Graph, p: f64, rng: &mut ChaCha8Rng) -> Graph {
    let mut out = g.clone();
    if let Some(feats) = &mut out.node_features {
        let keep = 1.0 - p;
        for row in feats.iter_mut() {
            for x in row.iter_mut() {
                if rng.gen::<f64>() < keep {
                    *x /= keep;
                } else {
                    *x = 0.0;
                }
            }
        }
    }
    out
}

pub fn train_model(
    ds: &Dataset,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<RunRecord> {
    Ok(train_model_full(ds, model_cfg, train_cfg)?.0)
}

/// Like [`train_model`] but also hands back the trained parameters
/// (restored to the best validation epoch) for checkpointing.
pub fn train_model_full(
    ds: &Dataset,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<(RunRecord, SanParams)> {
    train_cfg.validate()?;
    model_cfg.validate()?;
    let start = Instant::now();
    let task = ds.task;
    let prepared = prepare(ds, model_cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
    let params = SanParams::new(
        model_cfg.clone(),
        prepared.d_in,
        prepared.edge_dim,
        prepared.out_dim,
        &mut rng,
    )?;
    let named = params.named_params();
    let mut adam = AdamState::new(&named);
    let mut plateau = PlateauState::new(train_cfg);

    let mut best = snapshot(&named);
    let mut best_metric = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut epochs = Vec::new();
    let mut final_train_loss = f64::NAN;

    let mut train_order: Vec<usize> = ds.split.train.clone();
    for epoch in 1..=train_cfg.max_epochs {
        train_order.shuffle(&mut rng);

        // one flip pattern per train graph per epoch, drawn unconditionally
        // so the rng stream does not depend on the augmentation switch
        let mut epoch_sels: Vec<Option<EigSelection>> = prepared.sels.clone();
        for &gi in &train_order {
            let flip_seed: u64 = rng.gen();
            if train_cfg.sign_flip_augment && model_cfg.lpe_kind != LpeKind::None {
                if let Some(sel) = &prepared.sels[gi] {
                    epoch_sels[gi] = Some(random_sign_flip(sel, flip_seed));
                }
            }
        }

        let use_dropout = train_cfg.dropout > 0.0;
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in train_order.chunks(train_cfg.batch_size) {
            for (_, t) in &named {
                t.zero_grad();
            }
            let total = if use_dropout {
                // rebuild the batch with feature dropout applied
                let dropped: Vec<Graph> = batch
                    .iter()
                    .map(|&gi| dropout_features(&ds.graphs[gi], train_cfg.dropout, &mut rng))
                    .collect();
                let mut sub = ds.clone();
                for (&gi, g) in batch.iter().zip(&dropped) {
                    sub.graphs[gi] = g.clone();
                }
                batch_loss(&sub, batch, &prepared, &params, &epoch_sels)?
            } else {
                batch_loss(ds, batch, &prepared, &params, &epoch_sels)?
            };
            let value = total.item();
            if !value.is_finite() {
                return Err(Error::Numerical(format!(
                    "training diverged: non-finite loss {value} at epoch {epoch}"
                )));
            }
            total.backward();
            adam_step(&named, &mut adam, plateau.lr, train_cfg.weight_decay);
            loss_sum += value;
            batches += 1;
        }
        let train_loss = loss_sum / batches.max(1) as f64;
        final_train_loss = train_loss;

        let (_, val_metric, _) = eval_split(ds, &ds.split.val, &prepared, &params)?;
        let (_, test_metric, _) = eval_split(ds, &ds.split.test, &prepared, &params)?;
        let sched = scheduler_metric(task, val_metric);
        if sched < best_metric {
            best_metric = sched;
            best_epoch = epoch;
            best = snapshot(&named);
        }
        let lr_used = plateau.lr;
        plateau.observe(sched);
        epochs.push(EpochRecord { epoch, lr: lr_used, train_loss, val_metric, test_metric });
        if train_cfg.stop_when_floored && plateau.floored {
            break;
        }
    }

    restore(&named, &best);
    let (_, test_metric, mass) = eval_split(ds, &ds.split.test, &prepared, &params)?;
    let record = RunRecord {
        task,
        gamma: model_cfg.gamma,
        seed: train_cfg.seed,
        epochs,
        best_epoch,
        test_metric,
        final_train_loss,
        nonneighbor_mass: mass,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    Ok((record, params))
}

/// Per-split evaluation of fixed parameters: mean loss, metric in natural
/// units, mean non-neighbor attention mass.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub loss: f64,
    pub metric: f64,
    pub nonneighbor_mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalSummary {
    pub train: EvalReport,
    pub val: EvalReport,
    pub test: EvalReport,
}

/// Evaluate trained parameters on all three splits of a dataset.
pub fn evaluate(ds: &Dataset, params: &SanParams) -> Result<EvalSummary> {
    let prepared = prepare(ds, &params.config)?;
    let mut reports = Vec::with_capacity(3);
    for indices in [&ds.split.train, &ds.split.val, &ds.split.test] {
        let (loss, metric, mass) = eval_split(ds, indices, &prepared, params)?;
        reports.push(EvalReport { loss, metric, nonneighbor_mass: mass });
    }
    let test = reports.pop().expect("three splits");
    let val = reports.pop().expect("three splits");
    let train = reports.pop().expect("three splits");
    Ok(EvalSummary { train, val, test })
}

/// Train once per gamma value, same seed and data, one record per run.
pub fn gamma_sweep(
    ds: &Dataset,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    gammas: &[f64],
) -> Result<Vec<RunRecord>> {
    gammas
        .iter()
        .map(|&gamma| {
            let mut cfg = model_cfg.clone();
            cfg.gamma = gamma;
            train_model(ds, &cfg, train_cfg)
        })
        .collect()
}

/// Synthetic node-classification dataset in the style of the CLUSTER
/// benchmark: SBM graphs whose node labels are their communities, with one
/// randomly chosen seed node per community carrying a one-hot community
/// feature (all other features zero). Without the seed features the task is
/// unlearnable, since community identities are arbitrary.
pub fn make_cluster_dataset(
    num_graphs: usize,
    n: usize,
    communities: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<Dataset> {
    use crate::graph::{gen_sbm, Split};
    if num_graphs < 3 {
        return Err(Error::InvalidArgument("need at least 3 graphs for a split".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graphs = Vec::with_capacity(num_graphs);
    for i in 0..num_graphs {
        let g = gen_sbm(n, communities, p_in, p_out, seed.wrapping_add(1 + i as u64))?;
        let labels = g.node_labels.clone().expect("sbm assigns community labels");
        let mut feats = vec![vec![0.0; communities]; n];
        for c in 0..communities {
            let members: Vec<usize> =
                (0..n).filter(|&j| labels[j] == c).collect();
            let pick = members[rng.gen_range(0..members.len())];
            feats[pick][c] = 1.0;
        }
        graphs.push(g.with_node_features(feats)?);
    }
    let n_test = (num_graphs / 5).max(1);
    let n_val = (num_graphs / 5).max(1);
    let n_train = num_graphs - n_val - n_test;
    let split = Split {
        train: (0..n_train).collect(),
        val: (n_train..n_train + n_val).collect(),
        test: (n_train + n_val..num_graphs).collect(),
    };
    Dataset::new(graphs, Task::NodeClassification, split)
}
