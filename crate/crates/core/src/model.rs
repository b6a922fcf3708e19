//! The joint model: embedding table(s) plus both classifier components,
//! with a combined forward pass and the accumulating backward used by
//! training.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::attention::{attn_backward, attn_forward, AttnOutput, BiLstmParams};
use crate::bpe::{SubwordSequence, PAD_ID};
use crate::cnn::{cnn_backward, cnn_forward, CnnOutput, CnnParams};
use crate::embedding::EmbeddingTable;
use crate::ensemble::{combine_mode, EnsembleError, EnsembleMode, Prediction};
use crate::ops::{cross_entropy, cross_entropy_backward, embedding_lookup_backward, OpError};
use crate::tensor::Tensor;

/// Structural sizes of a model, fixed at initialization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelDims {
    pub vocab: usize,
    pub embed_dim: usize,
    pub hidden_size: usize,
    pub filter_count: usize,
    pub share_embedding: bool,
}

/// Every trainable weight. With `share_embedding` the attention component
/// reads the CNN component's table and `embedding_att` is `None`.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub embedding_cnn: EmbeddingTable,
    pub embedding_att: Option<EmbeddingTable>,
    pub cnn: CnnParams,
    pub attention: BiLstmParams,
}

/// One example as the model consumes it.
#[derive(Clone, Debug)]
pub struct Example {
    pub uid: String,
    pub label: Option<usize>,
    pub seq: SubwordSequence,
}

/// Errors surfaced by the joint forward/backward passes.
#[derive(Clone, Debug)]
pub enum ModelError {
    Op(OpError),
    Ensemble(EnsembleError),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::Op(e) => write!(f, "{e}"),
            ModelError::Ensemble(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ModelError {}

impl From<OpError> for ModelError {
    fn from(e: OpError) -> Self {
        ModelError::Op(e)
    }
}

impl From<EnsembleError> for ModelError {
    fn from(e: EnsembleError) -> Self {
        ModelError::Ensemble(e)
    }
}

impl ModelParams {
    /// Fixed initialization order (CNN embedding, attention embedding, CNN
    /// banks, attention cells) so a seed fully determines the weights.
    pub fn init<R: Rng>(dims: &ModelDims, rng: &mut R) -> Self {
        let embedding_cnn = EmbeddingTable::init(dims.vocab, dims.embed_dim, true, rng);
        let embedding_att = if dims.share_embedding {
            None
        } else {
            Some(EmbeddingTable::init(dims.vocab, dims.embed_dim, true, rng))
        };
        let cnn = CnnParams::init(dims.embed_dim, dims.filter_count, rng);
        let attention = BiLstmParams::init(dims.embed_dim, dims.hidden_size, rng);
        Self {
            embedding_cnn,
            embedding_att,
            cnn,
            attention,
        }
    }

    /// All-zero parameters of the given sizes; checkpoint loading fills
    /// these in by name.
    pub fn zeros(dims: &ModelDims) -> Self {
        let zero_table = || EmbeddingTable {
            weights: Tensor::zeros(alloc::vec![dims.vocab, dims.embed_dim]),
            trainable: true,
        };
        let zero_cell = || crate::ops::LstmParams {
            w_input: Tensor::zeros(alloc::vec![4 * dims.hidden_size, dims.embed_dim]),
            w_hidden: Tensor::zeros(alloc::vec![4 * dims.hidden_size, dims.hidden_size]),
            bias: Tensor::zeros(alloc::vec![4 * dims.hidden_size]),
        };
        Self {
            embedding_cnn: zero_table(),
            embedding_att: if dims.share_embedding {
                None
            } else {
                Some(zero_table())
            },
            cnn: CnnParams {
                banks: crate::cnn::FILTER_WIDTHS.map(|width| crate::cnn::ConvBank {
                    filters: Tensor::zeros(alloc::vec![
                        dims.filter_count,
                        width,
                        dims.embed_dim
                    ]),
                    bias: Tensor::zeros(alloc::vec![dims.filter_count]),
                }),
                fc_weight: Tensor::zeros(alloc::vec![
                    crate::preprocess::NUM_CLASSES,
                    3 * dims.filter_count
                ]),
                fc_bias: Tensor::zeros(alloc::vec![crate::preprocess::NUM_CLASSES]),
            },
            attention: BiLstmParams {
                forward: zero_cell(),
                backward: zero_cell(),
                fc_weight: Tensor::zeros(alloc::vec![
                    crate::preprocess::NUM_CLASSES,
                    2 * dims.hidden_size
                ]),
                fc_bias: Tensor::zeros(alloc::vec![crate::preprocess::NUM_CLASSES]),
            },
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            vocab: self.embedding_cnn.vocab(),
            embed_dim: self.embedding_cnn.dim(),
            hidden_size: self.attention.hidden_size(),
            filter_count: self.cnn.filter_count(),
            share_embedding: self.embedding_att.is_none(),
        }
    }

    /// The table the attention component reads.
    pub fn attention_embedding(&self) -> &EmbeddingTable {
        self.embedding_att.as_ref().unwrap_or(&self.embedding_cnn)
    }

    /// Same-shape copy with every tensor zeroed; used for gradient and
    /// optimizer-moment buffers.
    pub fn zeros_like(&self) -> Self {
        let mut copy = self.clone();
        for (_, t) in copy.tensors_mut() {
            t.fill(0.0);
        }
        copy
    }

    pub fn zero(&mut self) {
        for (_, t) in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    /// Named tensors in the canonical order used by checkpoints and the
    /// optimizer.
    pub fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        let mut out: Vec<(&'static str, &Tensor)> = Vec::with_capacity(18);
        out.push(("embedding_cnn.table", &self.embedding_cnn.weights));
        if let Some(e) = &self.embedding_att {
            out.push(("embedding_attention.table", &e.weights));
        }
        out.push(("cnn.width2.filters", &self.cnn.banks[0].filters));
        out.push(("cnn.width2.bias", &self.cnn.banks[0].bias));
        out.push(("cnn.width3.filters", &self.cnn.banks[1].filters));
        out.push(("cnn.width3.bias", &self.cnn.banks[1].bias));
        out.push(("cnn.width4.filters", &self.cnn.banks[2].filters));
        out.push(("cnn.width4.bias", &self.cnn.banks[2].bias));
        out.push(("cnn.fc.weight", &self.cnn.fc_weight));
        out.push(("cnn.fc.bias", &self.cnn.fc_bias));
        out.push(("attention.forward.w_input", &self.attention.forward.w_input));
        out.push((
            "attention.forward.w_hidden",
            &self.attention.forward.w_hidden,
        ));
        out.push(("attention.forward.bias", &self.attention.forward.bias));
        out.push((
            "attention.backward.w_input",
            &self.attention.backward.w_input,
        ));
        out.push((
            "attention.backward.w_hidden",
            &self.attention.backward.w_hidden,
        ));
        out.push(("attention.backward.bias", &self.attention.backward.bias));
        out.push(("attention.fc.weight", &self.attention.fc_weight));
        out.push(("attention.fc.bias", &self.attention.fc_bias));
        out
    }

    /// Mutable variant of [`ModelParams::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let mut out: Vec<(&'static str, &mut Tensor)> = Vec::with_capacity(18);
        out.push(("embedding_cnn.table", &mut self.embedding_cnn.weights));
        if let Some(e) = &mut self.embedding_att {
            out.push(("embedding_attention.table", &mut e.weights));
        }
        let [bank2, bank3, bank4] = &mut self.cnn.banks;
        out.push(("cnn.width2.filters", &mut bank2.filters));
        out.push(("cnn.width2.bias", &mut bank2.bias));
        out.push(("cnn.width3.filters", &mut bank3.filters));
        out.push(("cnn.width3.bias", &mut bank3.bias));
        out.push(("cnn.width4.filters", &mut bank4.filters));
        out.push(("cnn.width4.bias", &mut bank4.bias));
        out.push(("cnn.fc.weight", &mut self.cnn.fc_weight));
        out.push(("cnn.fc.bias", &mut self.cnn.fc_bias));
        out.push((
            "attention.forward.w_input",
            &mut self.attention.forward.w_input,
        ));
        out.push((
            "attention.forward.w_hidden",
            &mut self.attention.forward.w_hidden,
        ));
        out.push(("attention.forward.bias", &mut self.attention.forward.bias));
        out.push((
            "attention.backward.w_input",
            &mut self.attention.backward.w_input,
        ));
        out.push((
            "attention.backward.w_hidden",
            &mut self.attention.backward.w_hidden,
        ));
        out.push(("attention.backward.bias", &mut self.attention.backward.bias));
        out.push(("attention.fc.weight", &mut self.attention.fc_weight));
        out.push(("attention.fc.bias", &mut self.attention.fc_bias));
        out
    }
}

/// Both components' outputs plus the combined prediction.
#[derive(Clone, Debug)]
pub struct ExampleOutput {
    pub cnn: CnnOutput,
    pub attention: AttnOutput,
    pub prediction: Prediction,
}

/// Optional inverted-dropout masks for one training example.
#[derive(Clone, Debug, Default)]
pub struct DropoutMasks {
    pub cnn: Option<Tensor>,
    pub attention: Option<Tensor>,
}

/// Inference-mode forward pass: no dropout, distributions combined under
/// `mode`.
pub fn forward_example(
    params: &ModelParams,
    seq: &SubwordSequence,
    mode: EnsembleMode,
) -> Result<ExampleOutput, ModelError> {
    let x_cnn = params.embedding_cnn.embed(seq)?;
    let (cnn_out, _) = cnn_forward(&x_cnn, seq.real_len, &params.cnn, None)?;
    let x_att = params.attention_embedding().embed(seq)?;
    let (att_out, _) = attn_forward(&x_att, seq.real_len, &params.attention, None)?;
    let prediction = combine_mode(&cnn_out.probs, &att_out.probs, mode)?;
    Ok(ExampleOutput {
        cnn: cnn_out,
        attention: att_out,
        prediction,
    })
}

/// Training-mode forward and backward for one example. Returns the joint
/// loss `xent(p_cnn) + xent(p_att)` and adds the gradients into `grads`
/// (which must mirror `params`).
pub fn train_step_example(
    params: &ModelParams,
    seq: &SubwordSequence,
    gold: usize,
    masks: &DropoutMasks,
    grads: &mut ModelParams,
) -> Result<f64, ModelError> {
    let vocab = params.embedding_cnn.vocab();

    let x_cnn = params.embedding_cnn.embed(seq)?;
    let (cnn_out, cnn_cache) = cnn_forward(&x_cnn, seq.real_len, &params.cnn, masks.cnn.as_ref())?;
    let x_att = params.attention_embedding().embed(seq)?;
    let (att_out, att_cache) = attn_forward(
        &x_att,
        seq.real_len,
        &params.attention,
        masks.attention.as_ref(),
    )?;

    let loss = cross_entropy(&cnn_out.probs, gold)? + cross_entropy(&att_out.probs, gold)?;

    let d_p_cnn = cross_entropy_backward(&cnn_out.probs, gold);
    let (d_x_cnn, cnn_grads) = cnn_backward(&params.cnn, &cnn_cache, &d_p_cnn);
    for b in 0..3 {
        grads.cnn.banks[b].filters.add_assign(&cnn_grads.banks[b].filters);
        grads.cnn.banks[b].bias.add_assign(&cnn_grads.banks[b].bias);
    }
    grads.cnn.fc_weight.add_assign(&cnn_grads.d_fc_weight);
    grads.cnn.fc_bias.add_assign(&cnn_grads.d_fc_bias);
    grads
        .embedding_cnn
        .weights
        .add_assign(&embedding_lookup_backward(vocab, &seq.ids, &d_x_cnn));

    let d_p_att = cross_entropy_backward(&att_out.probs, gold);
    let (d_x_att, att_grads) = attn_backward(&params.attention, &att_cache, &d_p_att);
    grads
        .attention
        .forward
        .w_input
        .add_assign(&att_grads.forward.w_input);
    grads
        .attention
        .forward
        .w_hidden
        .add_assign(&att_grads.forward.w_hidden);
    grads.attention.forward.bias.add_assign(&att_grads.forward.bias);
    grads
        .attention
        .backward
        .w_input
        .add_assign(&att_grads.backward.w_input);
    grads
        .attention
        .backward
        .w_hidden
        .add_assign(&att_grads.backward.w_hidden);
    grads
        .attention
        .backward
        .bias
        .add_assign(&att_grads.backward.bias);
    grads.attention.fc_weight.add_assign(&att_grads.d_fc_weight);
    grads.attention.fc_bias.add_assign(&att_grads.d_fc_bias);
    // pad rows only ever see zero upstream gradient here, but the attention
    // table may be the shared CNN table, so route accordingly
    let d_table_att = embedding_lookup_backward(vocab, &seq.ids, &d_x_att);
    match &mut grads.embedding_att {
        Some(e) => e.weights.add_assign(&d_table_att),
        None => grads.embedding_cnn.weights.add_assign(&d_table_att),
    }

    Ok(loss)
}

/// Per-example sentence vectors of both components, for export and
/// projection.
#[derive(Clone, Debug)]
pub struct SentenceVectors {
    pub uid: String,
    pub label: Option<usize>,
    pub cnn_pooled: Vec<f64>,
    pub attention_sentence: Vec<f64>,
}

/// Eval-mode sentence vectors for every example.
pub fn sentence_vectors(
    params: &ModelParams,
    examples: &[Example],
    mode: EnsembleMode,
) -> Result<Vec<SentenceVectors>, ModelError> {
    let mut out = Vec::with_capacity(examples.len());
    for example in examples {
        let fwd = forward_example(params, &example.seq, mode)?;
        out.push(SentenceVectors {
            uid: example.uid.clone(),
            label: example.label,
            cnn_pooled: fwd.cnn.pooled.data().to_vec(),
            attention_sentence: fwd.attention.sentence.data().to_vec(),
        });
    }
    Ok(out)
}

/// Zeroes gradient rows that must never move: the pad embedding row always,
/// and whole tables marked not trainable.
pub fn mask_frozen_gradients(grads: &mut ModelParams, params: &ModelParams) {
    if params.embedding_cnn.trainable {
        grads.embedding_cnn.weights.row_mut(PAD_ID as usize).fill(0.0);
    } else {
        grads.embedding_cnn.weights.fill(0.0);
    }
    if let (Some(g), Some(p)) = (&mut grads.embedding_att, &params.embedding_att) {
        if p.trainable {
            g.weights.row_mut(PAD_ID as usize).fill(0.0);
        } else {
            g.weights.fill(0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{grad_check_report, DEFAULT_EPS};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dims(share: bool) -> ModelDims {
        ModelDims {
            vocab: 9,
            embed_dim: 3,
            hidden_size: 2,
            filter_count: 2,
            share_embedding: share,
        }
    }

    fn seq(ids: Vec<u32>, real_len: usize) -> SubwordSequence {
        let max_len = ids.len();
        let mut mask = alloc::vec![false; max_len];
        for m in mask.iter_mut().take(real_len) {
            *m = true;
        }
        SubwordSequence {
            ids,
            mask,
            real_len,
        }
    }

    #[test]
    fn tensor_enumeration_is_stable_and_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let params = ModelParams::init(&dims(false), &mut rng);
        let names: Vec<&str> = params.tensors().iter().map(|(n, _)| *n).collect();
        assert_eq!(names.len(), 18);
        assert_eq!(names[0], "embedding_cnn.table");
        assert_eq!(names[1], "embedding_attention.table");
        assert_eq!(names[17], "attention.fc.bias");

        let shared = ModelParams::init(&dims(true), &mut rng);
        assert_eq!(shared.tensors().len(), 17);

        let mut copy = params.clone();
        let mut_names: Vec<&str> = copy.tensors_mut().iter().map(|(n, _)| *n).collect();
        assert_eq!(names, mut_names);
    }

    #[test]
    fn forward_produces_three_probability_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let params = ModelParams::init(&dims(false), &mut rng);
        let s = seq(alloc::vec![3, 4, 5, 0, 0, 0], 3);
        let out = forward_example(&params, &s, EnsembleMode::Product).unwrap();
        for p in [
            &out.cnn.probs,
            &out.attention.probs,
            &out.prediction.p_final,
        ] {
            let sum: f64 = p.data().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
        assert_eq!(out.attention.weights.numel(), 3);
    }

    #[test]
    fn shared_embedding_uses_one_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let params = ModelParams::init(&dims(true), &mut rng);
        assert!(params.embedding_att.is_none());
        assert_eq!(
            params.attention_embedding().weights.data().as_ptr(),
            params.embedding_cnn.weights.data().as_ptr()
        );
    }

    #[test]
    fn joint_gradients_flow_only_to_real_non_pad_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let params = ModelParams::init(&dims(false), &mut rng);
        let mut grads = params.zeros_like();
        let s = seq(alloc::vec![3, 4, 0, 0], 2);
        train_step_example(&params, &s, 1, &DropoutMasks::default(), &mut grads).unwrap();
        mask_frozen_gradients(&mut grads, &params);
        // pad row untouched
        assert!(grads.embedding_cnn.weights.row(0).iter().all(|&v| v == 0.0));
        // real rows moved
        assert!(grads.embedding_cnn.weights.row(3).iter().any(|&v| v != 0.0));
        assert!(grads.embedding_cnn.weights.row(4).iter().any(|&v| v != 0.0));
        // rows never referenced stay zero
        assert!(grads.embedding_cnn.weights.row(7).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn joint_loss_gradient_on_embeddings_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let params = ModelParams::init(&dims(false), &mut rng);
        let s = seq(alloc::vec![3, 4, 5, 0], 3);
        let gold = 2usize;
        let mut grads = params.zeros_like();
        train_step_example(&params, &s, gold, &DropoutMasks::default(), &mut grads).unwrap();

        let inputs = alloc::vec![
            params.embedding_cnn.weights.clone(),
            params.embedding_att.as_ref().unwrap().weights.clone(),
        ];
        let analytic = alloc::vec![
            grads.embedding_cnn.weights.clone(),
            grads.embedding_att.as_ref().unwrap().weights.clone(),
        ];
        let report = grad_check_report(
            |args| {
                let mut p = params.clone();
                p.embedding_cnn.weights = args[0].clone();
                p.embedding_att.as_mut().unwrap().weights = args[1].clone();
                let out = forward_example(&p, &s, EnsembleMode::Product).unwrap();
                crate::ops::cross_entropy(&out.cnn.probs, gold).unwrap()
                    + crate::ops::cross_entropy(&out.attention.probs, gold).unwrap()
            },
            &inputs,
            &analytic,
            DEFAULT_EPS,
            1e-5,
        );
        assert!(report.passes(), "gradient check failed: {report:?}");
    }

    #[test]
    fn shared_table_accumulates_both_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let shared = ModelParams::init(&dims(true), &mut rng);
        let s = seq(alloc::vec![3, 4, 0, 0], 2);
        let gold = 0usize;
        let mut grads = shared.zeros_like();
        train_step_example(&shared, &s, gold, &DropoutMasks::default(), &mut grads).unwrap();

        let inputs = alloc::vec![shared.embedding_cnn.weights.clone()];
        let analytic = alloc::vec![grads.embedding_cnn.weights.clone()];
        let report = grad_check_report(
            |args| {
                let mut p = shared.clone();
                p.embedding_cnn.weights = args[0].clone();
                let out = forward_example(&p, &s, EnsembleMode::Product).unwrap();
                crate::ops::cross_entropy(&out.cnn.probs, gold).unwrap()
                    + crate::ops::cross_entropy(&out.attention.probs, gold).unwrap()
            },
            &inputs,
            &analytic,
            DEFAULT_EPS,
            1e-5,
        );
        assert!(report.passes(), "gradient check failed: {report:?}");
    }
}
