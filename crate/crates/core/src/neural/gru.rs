//! Forward pass, exact sequence likelihood, sampling and backpropagation
//! through time for the stacked gated recurrent model.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::params::ModelParams;
use super::NeuralError;
use crate::smiles::{TokenSequence, Vocabulary, MAX_LEN};

/// Rows per work unit when a batch is split across threads. Fixed so that
/// results never depend on the number of worker threads.
pub const CHUNK_ROWS: usize = 32;

/// Per-layer hidden activations for a batch (rows) of sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenState {
    pub layers: Vec<Array2<f64>>,
}

impl HiddenState {
    pub fn zeros(params: &ModelParams, rows: usize) -> Self {
        HiddenState { layers: (0..params.dims.n_layers).map(|_| Array2::zeros((rows, params.dims.hidden_dim))).collect() }
    }

    pub fn rows(&self) -> usize {
        self.layers.first().map_or(0, |l| l.nrows())
    }
}

struct LayerCache {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    z: Array2<f64>,
    r: Array2<f64>,
    n: Array2<f64>,
    rh: Array2<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One recurrent layer step for a batch. Returns the new hidden state and,
/// when `keep` is set, the activations needed for the backward pass.
fn layer_step(
    layer: &super::params::GruLayer,
    x: &Array2<f64>,
    h_prev: &Array2<f64>,
    keep: bool,
) -> (Array2<f64>, Option<LayerCache>) {
    let hd = h_prev.ncols();
    let mut a = x.dot(&layer.w_input);
    a += &layer.bias;
    let mut a_zr = a.slice(s![.., 0..2 * hd]).to_owned();
    general_mat_mul(1.0, h_prev, &layer.w_hidden.slice(s![.., 0..2 * hd]), 1.0, &mut a_zr);
    let z = a_zr.slice(s![.., 0..hd]).mapv(sigmoid);
    let r = a_zr.slice(s![.., hd..2 * hd]).mapv(sigmoid);
    let rh = &r * h_prev;
    let mut a_n = a.slice(s![.., 2 * hd..]).to_owned();
    general_mat_mul(1.0, &rh, &layer.w_hidden.slice(s![.., 2 * hd..]), 1.0, &mut a_n);
    let n = a_n.mapv(f64::tanh);
    let mut h = Array2::zeros(h_prev.raw_dim());
    Zip::from(&mut h).and(&z).and(&n).and(h_prev).for_each(|h, &z, &n, &hp| *h = (1.0 - z) * n + z * hp);
    let cache = keep.then(|| LayerCache { x: x.clone(), h_prev: h_prev.clone(), z, r, n, rh });
    (h, cache)
}

fn embed(params: &ModelParams, tokens: &[usize]) -> Array2<f64> {
    params.embedding.select(Axis(0), tokens)
}

fn check_tokens(params: &ModelParams, tokens: &[usize]) -> Result<(), NeuralError> {
    match tokens.iter().find(|&&t| t >= params.dims.vocab_size) {
        Some(&t) => Err(NeuralError::ShapeMismatch(format!("token {t} outside vocabulary of {}", params.dims.vocab_size))),
        None => Ok(()),
    }
}

/// Advance every row by one token. Returns logits (rows × V) and the next state.
pub fn forward_batch(
    params: &ModelParams,
    tokens: &[usize],
    hidden: &HiddenState,
) -> Result<(Array2<f64>, HiddenState), NeuralError> {
    check_tokens(params, tokens)?;
    if hidden.layers.len() != params.dims.n_layers
        || hidden.layers.iter().any(|h| h.dim() != (tokens.len(), params.dims.hidden_dim))
    {
        return Err(NeuralError::ShapeMismatch("hidden state does not match model".into()));
    }
    let mut x = embed(params, tokens);
    let mut next = Vec::with_capacity(params.layers.len());
    for (layer, h_prev) in params.layers.iter().zip(&hidden.layers) {
        let (h, _) = layer_step(layer, &x, h_prev, false);
        x = h.clone();
        next.push(h);
    }
    let mut logits = x.dot(&params.w_out);
    logits += &params.b_out;
    Ok((logits, HiddenState { layers: next }))
}

/// Single-sequence step: logits over the vocabulary and the next hidden state.
pub fn forward_step(
    params: &ModelParams,
    token: usize,
    hidden: &HiddenState,
) -> Result<(Array1<f64>, HiddenState), NeuralError> {
    let (logits, next) = forward_batch(params, &[token], hidden)?;
    Ok((logits.row(0).to_owned(), next))
}

/// Numerically stable log-softmax of each row.
pub fn log_softmax_rows(logits: &ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

pub fn softmax(logits: &Array1<f64>) -> Array1<f64> {
    let m = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e = logits.mapv(|v| (v - m).exp());
    let s = e.sum();
    e / s
}

/// Negative log-likelihood of each sequence and, optionally, the gradient of
/// `Σ_i weights[i] · nll_i` with respect to every parameter.
fn chunk_nll_grad(
    params: &ModelParams,
    seqs: &[&TokenSequence],
    weights: Option<&[f64]>,
) -> (Vec<f64>, Option<ModelParams>) {
    let b = seqs.len();
    let steps = seqs.iter().map(|s| s.len()).max().unwrap_or(0).saturating_sub(1);
    let want_grad = weights.is_some();
    let mut nll = vec![0.0; b];
    let mut hidden = HiddenState::zeros(params, b);
    let mut caches: Vec<Vec<LayerCache>> = Vec::with_capacity(if want_grad { steps } else { 0 });
    let mut douts: Vec<Array2<f64>> = Vec::new();
    let mut tops: Vec<Array2<f64>> = Vec::new();

    for t in 0..steps {
        let tokens: Vec<usize> = seqs.iter().map(|s| s.ids()[t]).collect();
        let mut x = embed(params, &tokens);
        let mut step_cache = Vec::with_capacity(params.layers.len());
        for (l, layer) in params.layers.iter().enumerate() {
            let (h, cache) = layer_step(layer, &x, &hidden.layers[l], want_grad);
            if let Some(c) = cache {
                step_cache.push(c);
            }
            hidden.layers[l] = h.clone();
            x = h;
        }
        let mut logits = x.dot(&params.w_out);
        logits += &params.b_out;
        let logp = log_softmax_rows(&logits.view());
        let mut dlogits = if want_grad { Some(Array2::zeros(logp.raw_dim())) } else { None };
        for (i, s) in seqs.iter().enumerate() {
            if t + 1 < s.len() {
                let target = s.ids()[t + 1];
                nll[i] -= logp[[i, target]];
                if let (Some(d), Some(w)) = (dlogits.as_mut(), weights) {
                    let mut row = d.row_mut(i);
                    Zip::from(&mut row).and(logp.row(i)).for_each(|g, &lp| *g = w[i] * lp.exp());
                    row[target] -= w[i];
                }
            }
        }
        if let Some(d) = dlogits {
            caches.push(step_cache);
            douts.push(d);
            tops.push(x);
        }
    }

    if !want_grad {
        return (nll, None);
    }

    let hd = params.dims.hidden_dim;
    let mut grads = ModelParams::zeros(params.dims);
    let mut dh_next: Vec<Array2<f64>> = (0..params.layers.len()).map(|_| Array2::zeros((b, hd))).collect();
    for t in (0..steps).rev() {
        let dlogits = &douts[t];
        general_mat_mul(1.0, &tops[t].t(), dlogits, 1.0, &mut grads.w_out);
        grads.b_out += &dlogits.sum_axis(Axis(0)).insert_axis(Axis(0));
        let mut above = dlogits.dot(&params.w_out.t());
        for l in (0..params.layers.len()).rev() {
            let c = &caches[t][l];
            let layer = &params.layers[l];
            let g = &mut grads.layers[l];
            let dh = above + &dh_next[l];

            let mut da = Array2::<f64>::zeros((b, 3 * hd));
            let mut dh_prev = Array2::<f64>::zeros((b, hd));
            // candidate path first: d(a_n) = dh·(1−z)·(1−n²)
            {
                let mut da_n = da.slice_mut(s![.., 2 * hd..]);
                Zip::from(&mut da_n).and(&dh).and(&c.z).and(&c.n).for_each(|d, &dh, &z, &n| {
                    *d = dh * (1.0 - z) * (1.0 - n * n);
                });
            }
            let d_rh = da.slice(s![.., 2 * hd..]).dot(&layer.w_hidden.slice(s![.., 2 * hd..]).t());
            {
                let (mut da_z, mut da_r) = {
                    let (zr, _) = da.view_mut().split_at(Axis(1), 2 * hd);
                    zr.split_at(Axis(1), hd)
                };
                Zip::from(&mut da_z).and(&dh).and(&c.z).and(&c.n).and(&c.h_prev).for_each(|d, &dh, &z, &n, &hp| {
                    *d = dh * (hp - n) * z * (1.0 - z);
                });
                Zip::from(&mut da_r).and(&d_rh).and(&c.r).and(&c.h_prev).for_each(|d, &drh, &r, &hp| {
                    *d = drh * hp * r * (1.0 - r);
                });
            }
            Zip::from(&mut dh_prev).and(&dh).and(&c.z).and(&d_rh).and(&c.r).for_each(|o, &dh, &z, &drh, &r| {
                *o = dh * z + drh * r;
            });

            general_mat_mul(1.0, &c.x.t(), &da, 1.0, &mut g.w_input);
            g.bias += &da.sum_axis(Axis(0)).insert_axis(Axis(0));
            {
                let da_zr = da.slice(s![.., 0..2 * hd]);
                let mut gw = g.w_hidden.slice_mut(s![.., 0..2 * hd]);
                general_mat_mul(1.0, &c.h_prev.t(), &da_zr, 1.0, &mut gw);
                general_mat_mul(1.0, &da_zr, &layer.w_hidden.slice(s![.., 0..2 * hd]).t(), 1.0, &mut dh_prev);
            }
            {
                let mut gw = g.w_hidden.slice_mut(s![.., 2 * hd..]);
                general_mat_mul(1.0, &c.rh.t(), &da.slice(s![.., 2 * hd..]), 1.0, &mut gw);
            }
            above = da.dot(&layer.w_input.t());
            dh_next[l] = dh_prev;
        }
        for (i, s) in seqs.iter().enumerate() {
            let tok = s.ids()[t];
            let mut row = grads.embedding.row_mut(tok);
            row += &above.row(i);
        }
    }
    (nll, Some(grads))
}

/// −Σ log P(token_t | tokens_<t) over the logical length (padding excluded).
pub fn sequence_nll(params: &ModelParams, seq: &TokenSequence) -> f64 {
    chunk_nll_grad(params, &[seq], None).0[0]
}

/// Per-sequence NLL for a batch, computed in fixed-size chunks.
pub fn batch_nll(params: &ModelParams, seqs: &[TokenSequence]) -> Vec<f64> {
    let refs: Vec<&TokenSequence> = seqs.iter().collect();
    refs.par_chunks(CHUNK_ROWS).map(|c| chunk_nll_grad(params, c, None).0).collect::<Vec<_>>().concat()
}

/// Gradient of `Σ_i weights[i] · nll_i` plus the per-sequence NLLs.
pub fn backprop_weighted(
    params: &ModelParams,
    seqs: &[TokenSequence],
    weights: &[f64],
) -> Result<(ModelParams, Vec<f64>), NeuralError> {
    if seqs.is_empty() {
        return Err(NeuralError::EmptyBatch);
    }
    if seqs.len() != weights.len() {
        return Err(NeuralError::ShapeMismatch("one weight per sequence required".into()));
    }
    for s in seqs {
        check_tokens(params, s.logical())?;
    }
    let refs: Vec<&TokenSequence> = seqs.iter().collect();
    let parts: Vec<(Vec<f64>, Option<ModelParams>)> = refs
        .par_chunks(CHUNK_ROWS)
        .zip(weights.par_chunks(CHUNK_ROWS))
        .map(|(c, w)| chunk_nll_grad(params, c, Some(w)))
        .collect();
    let mut grads = ModelParams::zeros(params.dims);
    let mut nll = Vec::with_capacity(seqs.len());
    for (n, g) in parts {
        nll.extend(n);
        grads.add_scaled(&g.expect("gradient requested"), 1.0);
    }
    Ok((grads, nll))
}

/// Exact gradient of the mean sequence NLL over the batch.
pub fn backprop_nll(params: &ModelParams, seqs: &[TokenSequence]) -> Result<(ModelParams, f64), NeuralError> {
    let w = vec![1.0 / seqs.len().max(1) as f64; seqs.len()];
    let (g, nll) = backprop_weighted(params, seqs, &w)?;
    let mean = nll.iter().sum::<f64>() / nll.len() as f64;
    Ok((g, mean))
}

/// A generated sequence with the model log-probability of every emitted token.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub seq: TokenSequence,
    pub step_logprobs: Vec<f64>,
}

impl Sample {
    pub fn logprob(&self) -> f64 {
        self.step_logprobs.iter().sum()
    }

    /// Whether generation stopped on the end token (as opposed to the length cap).
    pub fn terminated(&self, end: usize) -> bool {
        self.seq.logical().last() == Some(&end)
    }
}

/// Draw one sequence per seed. Every row starts at `G` and stops at `E` or at
/// `max_len` tokens. Log-probabilities are those of the untempered model.
pub fn sample_batch(
    params: &ModelParams,
    vocab: &Vocabulary,
    seeds: &[u64],
    max_len: usize,
    temperature: f64,
) -> Vec<Sample> {
    let max_len = max_len.clamp(2, MAX_LEN);
    seeds
        .par_chunks(CHUNK_ROWS)
        .map(|chunk| sample_chunk(params, vocab, chunk, max_len, temperature))
        .collect::<Vec<_>>()
        .concat()
}

fn sample_chunk(params: &ModelParams, vocab: &Vocabulary, seeds: &[u64], max_len: usize, temperature: f64) -> Vec<Sample> {
    let b = seeds.len();
    let mut rngs: Vec<ChaCha8Rng> = seeds.iter().map(|&s| ChaCha8Rng::seed_from_u64(s)).collect();
    let mut ids: Vec<Vec<usize>> = vec![vec![vocab.start()]; b];
    let mut logps: Vec<Vec<f64>> = vec![Vec::new(); b];
    let mut done = vec![false; b];
    let mut hidden = HiddenState::zeros(params, b);
    while done.iter().any(|d| !d) {
        let tokens: Vec<usize> = ids.iter().map(|s| *s.last().unwrap()).collect();
        let (logits, next) = forward_batch(params, &tokens, &hidden).expect("sampled tokens are in vocabulary");
        hidden = next;
        let logp = log_softmax_rows(&logits.view());
        for i in 0..b {
            if done[i] {
                continue;
            }
            let row = logp.row(i);
            let u: f64 = rngs[i].random();
            let choice = if temperature == 1.0 {
                draw(row.iter().map(|lp| lp.exp()), u)
            } else {
                let scaled: Array1<f64> = logits.row(i).mapv(|v| v / temperature);
                draw(softmax(&scaled).into_iter(), u)
            };
            // pad is never a legal emission; redirect to end
            let choice = if choice == vocab.pad() { vocab.end() } else { choice };
            ids[i].push(choice);
            logps[i].push(row[choice]);
            if choice == vocab.end() || ids[i].len() >= max_len {
                done[i] = true;
            }
        }
    }
    ids.into_iter()
        .zip(logps)
        .map(|(ids, step_logprobs)| Sample {
            seq: TokenSequence::from_logical(&ids).expect("length capped"),
            step_logprobs,
        })
        .collect()
}

/// Inverse-CDF draw from unnormalized-but-summing-to-one weights.
fn draw(probs: impl Iterator<Item = f64>, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}
