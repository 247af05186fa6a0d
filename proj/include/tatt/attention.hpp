// Self-attention score variants: standard scaled dot-product, temporal
// (time-conditioned bilinear form), and the fixed per-time-point scaled
// baselines.
//
// Temporal logits for one head:
//
//     logits = Q * (T^T T / ||T||_F) * K^T / sqrt(d_k)
//
// T holds one time representation per row, row-aligned with Q, K and V. The
// d_k x d_k middle factor keeps the logits n x n. ||T||_F must exceed
// kNormFloor; an all-zero T is rejected.
//
// Scaled baselines multiply row i of the standard logits by a positive s_i
// that depends only on row i's time point (see scale_factor()).
//
// Prepend modes are not score math: they rewrite the input sequence (a time
// token at position 0) and then use standard or temporal scores.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tatt/matrix.hpp"
#include "tatt/tape.hpp"

namespace tatt {

enum class AttentionMode {
    standard,
    temporal,
    prepend,
    temporal_and_prepend,
    scaled_linear,
    scaled_exponential,
    scaled_doc_count,
};

std::string_view to_string(AttentionMode mode);
/// Accepts the names produced by to_string(); throws ConfigError otherwise.
AttentionMode parse_attention_mode(std::string_view name);

/// Modes whose model owns a time table and per-head W_T.
bool uses_temporal_scores(AttentionMode mode);
bool uses_time_prepend(AttentionMode mode);
bool uses_scaled_scores(AttentionMode mode);

inline constexpr double kNormFloor = 1e-8;

struct AttentionInputs {
    Matrix q;
    Matrix k;
    Matrix v;
    std::optional<Matrix> t;
    std::optional<std::vector<double>> scale;
};

struct AttentionOutput {
    Matrix y;
    /// n x n, row-stochastic.
    Matrix weights;
};

AttentionOutput standard_attention(const AttentionInputs& in);
AttentionOutput temporal_attention(const AttentionInputs& in);
AttentionOutput scaled_attention(const AttentionInputs& in);

/// Pre-softmax temporal scores (including the 1/sqrt(d_k) factor).
Matrix temporal_logits(const Matrix& q, const Matrix& k, const Matrix& t);

/// Per-row scale for the scaled baselines. time_index is 1-based among the
/// model's time points; doc_counts holds one entry per time point, so
/// time_index must lie in [1, doc_counts.size()].
///   scaled_linear      -> time_index
///   scaled_exponential -> 2^time_index
///   scaled_doc_count   -> doc_counts[time_index-1] / sum(doc_counts)
double scale_factor(AttentionMode mode, std::size_t time_index, std::span<const double> doc_counts);

/// Differentiable forms used by the encoder. weights is exposed for
/// inspection; y = weights * v.
struct HeadVars {
    Var y;
    Var weights;
};

Var standard_logits(Var q, Var k);
Var temporal_logits(Var q, Var k, Var t);
Var scaled_logits(Var q, Var k, std::vector<double> scale);
HeadVars attend(Var logits, Var v);

}  // namespace tatt
