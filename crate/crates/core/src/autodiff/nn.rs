//! Small layer helpers shared by the positional encoders and the main model.

use rand_chacha::ChaCha8Rng;

use super::Tensor;

/// Collects `(name, tensor)` pairs for optimizers and checkpoints.
/// Names use a dotted path, e.g. `layers.0.attn.q.weight`.
#[derive(Default)]
pub struct ParamSet {
    params: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, t: &Tensor) {
        self.params.push((name.into(), t.clone()));
    }

    pub fn into_vec(self) -> Vec<(String, Tensor)> {
        self.params
    }
}

/// Fully connected layer `x W + b` with Glorot-scaled init.
#[derive(Clone)]
pub struct Linear {
    pub weight: Tensor, // (in, out)
    pub bias: Tensor,   // (out)
}

impl Linear {
    pub fn new(d_in: usize, d_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let std = (2.0 / (d_in + d_out) as f64).sqrt();
        Linear {
            weight: Tensor::randn_param(&[d_in, d_out], std, rng),
            bias: Tensor::param(&[d_out], vec![0.0; d_out]),
        }
    }

    /// Accepts rank-2 `(n, in)` or rank-3 `(b, n, in)` inputs; higher ranks
    /// are flattened to rows for the matmul and restored afterwards.
    pub fn forward(&self, x: &Tensor) -> Tensor {
        let shape = x.shape().to_vec();
        let d_in = *shape.last().expect("Linear: input must have at least one axis");
        assert_eq!(d_in, self.weight.shape()[0], "Linear: input width mismatch");
        let rows = x.numel() / d_in;
        let flat = x.reshape(&[rows, d_in]);
        let out = flat.matmul(&self.weight).add(&self.bias);
        let mut out_shape = shape;
        *out_shape.last_mut().unwrap() = self.weight.shape()[1];
        out.reshape(&out_shape)
    }

    pub fn register(&self, params: &mut ParamSet, prefix: &str) {
        params.register(format!("{prefix}.weight"), &self.weight);
        params.register(format!("{prefix}.bias"), &self.bias);
    }
}

/// Layer normalization over the last axis with learned gain and bias.
#[derive(Clone)]
pub struct LayerNorm {
    pub gain: Tensor,
    pub bias: Tensor,
}

impl LayerNorm {
    pub fn new(width: usize) -> Self {
        LayerNorm {
            gain: Tensor::param(&[width], vec![1.0; width]),
            bias: Tensor::param(&[width], vec![0.0; width]),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        x.layer_norm_last(&self.gain, &self.bias)
    }

    pub fn register(&self, params: &mut ParamSet, prefix: &str) {
        params.register(format!("{prefix}.gain"), &self.gain);
        params.register(format!("{prefix}.bias"), &self.bias);
    }
}

/// Two-layer MLP `relu(x W1 + b1) W2 + b2`.
#[derive(Clone)]
pub struct Mlp {
    pub fc1: Linear,
    pub fc2: Linear,
}

impl Mlp {
    pub fn new(d_in: usize, d_hidden: usize, d_out: usize, rng: &mut ChaCha8Rng) -> Self {
        Mlp { fc1: Linear::new(d_in, d_hidden, rng), fc2: Linear::new(d_hidden, d_out, rng) }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        self.fc2.forward(&self.fc1.forward(x).relu())
    }

    pub fn register(&self, params: &mut ParamSet, prefix: &str) {
        self.fc1.register(params, &format!("{prefix}.fc1"));
        self.fc2.register(params, &format!("{prefix}.fc2"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn linear_matches_manual_matmul() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let lin = Linear::new(3, 2, &mut rng);
        let x = Tensor::constant(&[2, 3], vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.0]);
        let y = lin.forward(&x);
        let w = lin.weight.to_vec();
        let b = lin.bias.to_vec();
        let xv = x.to_vec();
        for r in 0..2 {
            for c in 0..2 {
                let want: f64 =
                    (0..3).map(|k| xv[r * 3 + k] * w[k * 2 + c]).sum::<f64>() + b[c];
                assert!((y.to_vec()[r * 2 + c] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_rank3_matches_flattened() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let lin = Linear::new(4, 3, &mut rng);
        let data: Vec<f64> = (0..24).map(|i| i as f64 * 0.1).collect();
        let x3 = Tensor::constant(&[2, 3, 4], data.clone());
        let x2 = Tensor::constant(&[6, 4], data);
        let y3 = lin.forward(&x3);
        assert_eq!(y3.shape(), &[2, 3, 3]);
        assert_eq!(y3.to_vec(), lin.forward(&x2).to_vec());
    }

    #[test]
    fn layer_norm_identity_init_normalizes() {
        let ln = LayerNorm::new(4);
        let x = Tensor::constant(&[1, 4], vec![1.0, 2.0, 3.0, 4.0]);
        let y = ln.forward(&x).to_vec();
        let mean: f64 = y.iter().sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn param_registration_collects_all() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mlp = Mlp::new(3, 5, 2, &mut rng);
        let mut ps = ParamSet::new();
        mlp.register(&mut ps, "head");
        let v = ps.into_vec();
        let names: Vec<&str> = v.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(
            names,
            ["head.fc1.weight", "head.fc1.bias", "head.fc2.weight", "head.fc2.bias"]
        );
        assert!(v.iter().all(|(_, t)| t.requires_grad()));
    }
}
