#include "tatt/attention.hpp"

#include <array>
#include <cmath>
#include <utility>

#include "tatt/error.hpp"

namespace tatt {

namespace {

constexpr std::array<std::pair<AttentionMode, std::string_view>, 7> kModeNames{{
    {AttentionMode::standard, "standard"},
    {AttentionMode::temporal, "temporal"},
    {AttentionMode::prepend, "prepend"},
    {AttentionMode::temporal_and_prepend, "temporal_and_prepend"},
    {AttentionMode::scaled_linear, "scaled_linear"},
    {AttentionMode::scaled_exponential, "scaled_exponential"},
    {AttentionMode::scaled_doc_count, "scaled_doc_count"},
}};

void check_qkv(const Matrix& q, const Matrix& k, const Matrix& v) {
    if (q.empty() || q.rows() != k.rows() || q.rows() != v.rows() || q.cols() != k.cols() ||
        q.cols() != v.cols()) {
        throw ShapeError("attention inputs must share n and d_k: q " + q.shape() + ", k " + k.shape() + ", v " +
                         v.shape());
    }
}

AttentionOutput to_output(const HeadVars& head) { return {head.y.value(), head.weights.value()}; }

}  // namespace

std::string_view to_string(AttentionMode mode) {
    for (const auto& [m, name] : kModeNames) {
        if (m == mode) {
            return name;
        }
    }
    return "unknown";
}

AttentionMode parse_attention_mode(std::string_view name) {
    for (const auto& [m, n] : kModeNames) {
        if (n == name) {
            return m;
        }
    }
    throw ConfigError("unknown attention mode '" + std::string(name) + "'");
}

bool uses_temporal_scores(AttentionMode mode) {
    return mode == AttentionMode::temporal || mode == AttentionMode::temporal_and_prepend;
}

bool uses_time_prepend(AttentionMode mode) {
    return mode == AttentionMode::prepend || mode == AttentionMode::temporal_and_prepend;
}

bool uses_scaled_scores(AttentionMode mode) {
    return mode == AttentionMode::scaled_linear || mode == AttentionMode::scaled_exponential ||
           mode == AttentionMode::scaled_doc_count;
}

Var standard_logits(Var q, Var k) {
    if (q.rows() != k.rows() || q.cols() != k.cols()) {
        throw ShapeError("attention q " + q.value().shape() + " vs k " + k.value().shape());
    }
    return scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(q.cols())));
}

Var temporal_logits(Var q, Var k, Var t) {
    if (t.rows() != q.rows() || t.cols() != q.cols()) {
        throw ShapeError("time representation " + t.value().shape() + " must match q " + q.value().shape());
    }
    Var norm = frobenius_norm(t);
    if (!(norm.value()(0, 0) > kNormFloor)) {
        throw DegenerateTimeError("||T|| = " + std::to_string(norm.value()(0, 0)) + " is at or below the floor " +
                                  std::to_string(kNormFloor));
    }
    // d_k x d_k bilinear factor T^T T / ||T||.
    Var bilinear = divide_by_scalar(matmul(transpose(t), t), norm);
    return standard_logits(matmul(q, bilinear), k);
}

Var scaled_logits(Var q, Var k, std::vector<double> factors) {
    for (double s : factors) {
        if (!(s > 0.0)) {
            throw ContractError("scaled attention needs positive scale factors, got " + std::to_string(s));
        }
    }
    return scale_rows(standard_logits(q, k), std::move(factors));
}

HeadVars attend(Var logits, Var v) {
    Var w = softmax_rows(logits);
    return {matmul(w, v), w};
}

AttentionOutput standard_attention(const AttentionInputs& in) {
    if (in.t || in.scale) {
        throw ContractError("standard attention takes neither a time matrix nor scale factors");
    }
    check_qkv(in.q, in.k, in.v);
    Tape tape;
    Var q = tape.constant_ref(in.q);
    Var k = tape.constant_ref(in.k);
    Var v = tape.constant_ref(in.v);
    return to_output(attend(standard_logits(q, k), v));
}

AttentionOutput temporal_attention(const AttentionInputs& in) {
    if (!in.t) {
        throw ContractError("temporal attention requires a time matrix");
    }
    if (in.scale) {
        throw ContractError("temporal attention does not take scale factors");
    }
    check_qkv(in.q, in.k, in.v);
    Tape tape;
    Var q = tape.constant_ref(in.q);
    Var k = tape.constant_ref(in.k);
    Var v = tape.constant_ref(in.v);
    Var t = tape.constant_ref(*in.t);
    return to_output(attend(temporal_logits(q, k, t), v));
}

AttentionOutput scaled_attention(const AttentionInputs& in) {
    if (!in.scale) {
        throw ContractError("scaled attention requires scale factors");
    }
    if (in.t) {
        throw ContractError("scaled attention does not take a time matrix");
    }
    check_qkv(in.q, in.k, in.v);
    Tape tape;
    Var q = tape.constant_ref(in.q);
    Var k = tape.constant_ref(in.k);
    Var v = tape.constant_ref(in.v);
    return to_output(attend(scaled_logits(q, k, *in.scale), v));
}

Matrix temporal_logits(const Matrix& q, const Matrix& k, const Matrix& t) {
    check_qkv(q, k, q);
    Tape tape;
    return temporal_logits(tape.constant_ref(q), tape.constant_ref(k), tape.constant_ref(t)).value();
}

double scale_factor(AttentionMode mode, std::size_t time_index, std::span<const double> doc_counts) {
    if (!uses_scaled_scores(mode)) {
        throw ContractError("scale_factor is undefined for mode " + std::string(to_string(mode)));
    }
    if (time_index < 1 || time_index > doc_counts.size()) {
        throw ContractError("time index " + std::to_string(time_index) + " out of range");
    }
    switch (mode) {
        case AttentionMode::scaled_linear:
            return static_cast<double>(time_index);
        case AttentionMode::scaled_exponential:
            return std::ldexp(1.0, static_cast<int>(time_index));
        default: {
            double total = 0.0;
            for (double c : doc_counts) {
                if (!(c > 0.0)) {
                    throw ContractError("document counts must be positive");
                }
                total += c;
            }
            return doc_counts[time_index - 1] / total;
        }
    }
}

}  // namespace tatt
