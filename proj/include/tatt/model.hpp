// Bidirectional transformer encoder with token, position and (in temporal
// modes) time-point embeddings, post-LN sublayers, GELU feed-forward and an
// MLM head tied to the token embeddings.
//
// Parameter blocks, in checkpoint order:
//
//   token_embedding      V x D
//   position_embedding   max_len x D
//   time_embedding       TV x D          temporal modes only
//   embedding_ln.gain / .bias            1 x D
//   per layer l (prefix "layer<l>."):
//     w_q b_q w_k b_k w_v b_v            D x D / 1 x D
//     w_t                                D x D, temporal modes only, no bias
//     w_o b_o                            D x D / 1 x D
//     ln1.gain ln1.bias                  1 x D
//     ff1.w ff1.b ff2.w ff2.b            D x F / 1 x F / F x D / 1 x D
//     ln2.gain ln2.bias                  1 x D
//   mlm_bias             1 x V
//
// The D x D projections are the H per-head D x d_k matrices side by side:
// columns [h*d_k, (h+1)*d_k) belong to head h.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tatt/attention.hpp"
#include "tatt/matrix.hpp"
#include "tatt/sequence.hpp"
#include "tatt/tape.hpp"
#include "tatt/vocab.hpp"

namespace tatt {

struct ModelConfig {
    std::size_t layers = 2;
    std::size_t hidden = 128;
    std::size_t heads = 2;
    std::size_t head_dim = 64;
    std::size_t ff_dim = 512;
    std::size_t max_len = 128;
    std::size_t token_vocab_size = 0;
    std::size_t time_vocab_size = kNumReservedTimes;
    AttentionMode mode = AttentionMode::temporal;
    std::uint64_t seed = 0;
    double init_std = 0.02;
    double ln_eps = 1e-12;

    /// Throws ConfigError describing the first violated invariant.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct BlockShape {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

std::vector<BlockShape> parameter_layout(const ModelConfig& cfg);

struct Parameter {
    std::string name;
    Matrix value;
};

/// Positions of each block inside Model::params.
struct LayerSlots {
    std::size_t w_q, b_q, w_k, b_k, w_v, b_v, w_t, w_o, b_o;
    std::size_t ln1_gain, ln1_bias, ff1_w, ff1_b, ff2_w, ff2_b, ln2_gain, ln2_bias;
};

struct ParamSlots {
    std::size_t token_embedding, position_embedding, time_embedding;
    std::size_t emb_ln_gain, emb_ln_bias;
    std::vector<LayerSlots> layers;
    std::size_t mlm_bias;
};

/// Blocks absent from a mode (time table, w_t) get index npos.
ParamSlots parameter_slots(const ModelConfig& cfg);

struct Model {
    ModelConfig config;
    /// Empty when the model was built from a bare config.
    Vocab vocab;
    TimeVocab time_vocab;
    std::vector<Parameter> params;
    ParamSlots slots;

    const Matrix& block(std::size_t slot) const { return params.at(slot).value; }
};

/// Deterministic initialization from cfg.seed: truncated normal(0, init_std)
/// at +-2 sigma for weights and tables, zero biases, unit LN gains. Time
/// table rows are re-drawn while their norm is below 0.1 * sqrt(D) * init_std.
Model build_model(const ModelConfig& cfg);

/// Fills the vocabulary sizes of cfg from the vocabularies and attaches them.
Model build_model(ModelConfig cfg, Vocab vocab, TimeVocab time_vocab);

struct ParameterCount {
    std::size_t total = 0;
    std::vector<std::pair<std::string, std::size_t>> blocks;
    /// Sum over all w_t blocks (per layer, per head).
    std::size_t time_projection = 0;
    /// Size of the time embedding table.
    std::size_t time_table = 0;
};

ParameterCount count_parameters(const ModelConfig& cfg);
ParameterCount count_parameters(const Model& m);

/// Outputs of the L transformer layers; the embedding layer is excluded.
struct HiddenStates {
    std::vector<Matrix> layers;
};

/// Validates ids and length against m. Throws VocabError / LengthError /
/// ContractError.
void check_sequence(const Model& m, const TimedSequence& s);

HiddenStates encode(const Model& m, const TimedSequence& s);

/// Same as encode() for each sequence; sequences are processed together.
std::vector<HiddenStates> encode_batch(const Model& m, std::span<const TimedSequence> seqs);

struct EncodeDetail {
    HiddenStates hidden;
    /// attention[layer][head], each n x n row-stochastic.
    std::vector<std::vector<Matrix>> attention;
};

EncodeDetail encode_with_attention(const Model& m, const TimedSequence& s);

/// h_last * token_embedding^T + mlm_bias.
Matrix mlm_logits(const Model& m, const Matrix& h_last);

// Tape-level interface used by training and the gradient checks.

struct ForwardPass {
    /// One Var per Model::params entry.
    std::vector<Var> params;
    /// Stacked layer outputs (sum of sequence lengths x D), one per layer.
    std::vector<Var> layers;
    /// Row offset of each sequence in the stacked outputs.
    std::vector<std::size_t> offsets;
    /// attention[layer][head][sequence]; filled when requested.
    std::vector<std::vector<std::vector<Var>>> attention;
};

/// Runs the encoder on a tape. With trainable set, parameters enter the
/// tape as variables; otherwise as constants.
ForwardPass forward(Tape& tape, const Model& m, std::span<const TimedSequence> seqs, bool trainable,
                    bool keep_attention = false);

Var mlm_logits(const Model& m, const ForwardPass& pass, Var hidden_rows);

/// Mean cross-entropy over all (sequence, position) pairs given.
/// positions[i] / labels[i] belong to seqs[i].
Var mlm_loss(const Model& m, const ForwardPass& pass, std::span<const std::vector<std::size_t>> positions,
             std::span<const std::vector<std::size_t>> labels);

}  // namespace tatt
