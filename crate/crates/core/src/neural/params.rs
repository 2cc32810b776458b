use ndarray::{Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Shape descriptor shared by the prior and the agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub n_layers: usize,
}

impl ModelDims {
    /// Desk-scale defaults: one recurrent layer, 128 hidden units, 64-wide embedding.
    pub fn desk(vocab_size: usize) -> Self {
        ModelDims { vocab_size, embed_dim: 64, hidden_dim: 128, n_layers: 1 }
    }
}

/// One gated recurrent layer. Gate columns are laid out as
/// `[update | reset | candidate]`, each `hidden_dim` wide.
#[derive(Clone, Debug, PartialEq)]
pub struct GruLayer {
    /// input_dim × 3H
    pub w_input: Array2<f64>,
    /// H × 3H; the candidate block multiplies `reset ⊙ h`.
    pub w_hidden: Array2<f64>,
    /// 1 × 3H
    pub bias: Array2<f64>,
}

/// Embedding, stacked recurrent layers and the output projection.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    /// V × E
    pub embedding: Array2<f64>,
    pub layers: Vec<GruLayer>,
    /// H × V
    pub w_out: Array2<f64>,
    /// 1 × V
    pub b_out: Array2<f64>,
}

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Self {
        let h = dims.hidden_dim;
        let layers = (0..dims.n_layers)
            .map(|l| {
                let input = if l == 0 { dims.embed_dim } else { h };
                GruLayer {
                    w_input: Array2::zeros((input, 3 * h)),
                    w_hidden: Array2::zeros((h, 3 * h)),
                    bias: Array2::zeros((1, 3 * h)),
                }
            })
            .collect();
        ModelParams {
            dims,
            embedding: Array2::zeros((dims.vocab_size, dims.embed_dim)),
            layers,
            w_out: Array2::zeros((h, dims.vocab_size)),
            b_out: Array2::zeros((1, dims.vocab_size)),
        }
    }

    /// Uniform(±1/√H) for recurrent and output weights, Uniform(±0.1) for the embedding.
    pub fn init(dims: ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(dims);
        let bound = 1.0 / (dims.hidden_dim as f64).sqrt();
        p.embedding.mapv_inplace(|_| rng.random_range(-0.1..0.1));
        for block in p.blocks_mut().into_iter().skip(1) {
            block.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        p
    }

    /// Canonical block names, in the same order as [`blocks`](Self::blocks).
    pub fn block_names(&self) -> Vec<String> {
        let mut names = vec!["embedding".to_string()];
        for l in 0..self.layers.len() {
            names.push(format!("layer{l}.w_input"));
            names.push(format!("layer{l}.w_hidden"));
            names.push(format!("layer{l}.bias"));
        }
        names.push("output.weight".into());
        names.push("output.bias".into());
        names
    }

    pub fn blocks(&self) -> Vec<&Array2<f64>> {
        let mut out = vec![&self.embedding];
        for l in &self.layers {
            out.extend([&l.w_input, &l.w_hidden, &l.bias]);
        }
        out.extend([&self.w_out, &self.b_out]);
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = vec![&mut self.embedding];
        for l in &mut self.layers {
            out.extend([&mut l.w_input, &mut l.w_hidden, &mut l.bias]);
        }
        out.push(&mut self.w_out);
        out.push(&mut self.b_out);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Shapes agree with the dimension descriptor.
    pub fn shapes_consistent(&self) -> bool {
        let expect = Self::zeros(self.dims);
        self.layers.len() == self.dims.n_layers
            && self.blocks().iter().zip(expect.blocks()).all(|(a, b)| a.dim() == b.dim())
    }

    /// Independent deep copy.
    pub fn clone_params(&self) -> Self {
        self.clone()
    }

    /// `self += scale * other`, block by block.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for (a, b) in self.blocks_mut().into_iter().zip(other.blocks()) {
            Zip::from(a).and(b).for_each(|x, &y| *x += scale * y);
        }
    }

    /// Round every value to the nearest `f32`, as stored in checkpoints.
    pub fn round_to_f32(&mut self) {
        for b in self.blocks_mut() {
            b.mapv_inplace(|v| v as f32 as f64);
        }
    }

    /// Bitwise equality of every parameter value.
    pub fn bitwise_eq(&self, other: &ModelParams) -> bool {
        self.dims == other.dims
            && self
                .blocks()
                .iter()
                .zip(other.blocks())
                .all(|(a, b)| a.dim() == b.dim() && a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()))
    }
}
