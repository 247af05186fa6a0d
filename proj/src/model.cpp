#include "tatt/model.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "tatt/error.hpp"

namespace tatt {

namespace {

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

std::string layer_prefix(std::size_t l) { return "layer" + std::to_string(l) + "."; }

bool is_gain(const std::string& name) { return name.ends_with(".gain"); }

bool is_bias(const std::string& name) {
    return name.ends_with(".bias") || name.ends_with(".b") || name.ends_with("b_q") || name.ends_with("b_k") ||
           name.ends_with("b_v") || name.ends_with("b_o") || name == "mlm_bias";
}

double truncated_normal(std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> normal(0.0, stddev);
    for (;;) {
        const double v = normal(rng);
        if (std::abs(v) <= 2.0 * stddev) {
            return v;
        }
    }
}

/// Per-row scale factors for the scaled baselines. Rows carrying a reserved
/// time id use 1.
std::vector<double> row_scales(const Model& m, const std::vector<std::size_t>& time_ids) {
    const auto& cfg = m.config;
    std::vector<double> counts;
    if (m.time_vocab.point_count() > 0) {
        counts = m.time_vocab.doc_counts();
    } else {
        counts.assign(cfg.time_vocab_size - kNumReservedTimes, 1.0);
    }
    std::vector<double> out;
    out.reserve(time_ids.size());
    for (std::size_t tid : time_ids) {
        if (tid < kNumReservedTimes) {
            out.push_back(1.0);
        } else {
            out.push_back(scale_factor(cfg.mode, tid - kNumReservedTimes + 1, counts));
        }
    }
    return out;
}

}  // namespace

void ModelConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (layers < 1) {
        fail("layers must be at least 1");
    }
    if (heads < 1 || head_dim < 1) {
        fail("heads and head_dim must be positive");
    }
    if (hidden != heads * head_dim) {
        fail("hidden (" + std::to_string(hidden) + ") must equal heads * head_dim (" + std::to_string(heads) + " * " +
             std::to_string(head_dim) + ")");
    }
    if (ff_dim < 1) {
        fail("ff_dim must be positive");
    }
    if (max_len < 2) {
        fail("max_len must be at least 2");
    }
    if (token_vocab_size <= kNumSpecialTokens) {
        fail("token vocabulary must hold more than the special tokens");
    }
    if (time_vocab_size <= kNumReservedTimes) {
        fail("time vocabulary must hold at least one time point besides the reserved ids");
    }
    if (!(init_std > 0.0) || !(ln_eps > 0.0)) {
        fail("init_std and ln_eps must be positive");
    }
}

std::vector<BlockShape> parameter_layout(const ModelConfig& cfg) {
    cfg.validate();
    const std::size_t d = cfg.hidden;
    const std::size_t f = cfg.ff_dim;
    const bool temporal = uses_temporal_scores(cfg.mode);
    std::vector<BlockShape> out;
    out.push_back({"token_embedding", cfg.token_vocab_size, d});
    out.push_back({"position_embedding", cfg.max_len, d});
    if (temporal) {
        out.push_back({"time_embedding", cfg.time_vocab_size, d});
    }
    out.push_back({"embedding_ln.gain", 1, d});
    out.push_back({"embedding_ln.bias", 1, d});
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const auto p = layer_prefix(l);
        out.push_back({p + "w_q", d, d});
        out.push_back({p + "b_q", 1, d});
        out.push_back({p + "w_k", d, d});
        out.push_back({p + "b_k", 1, d});
        out.push_back({p + "w_v", d, d});
        out.push_back({p + "b_v", 1, d});
        if (temporal) {
            out.push_back({p + "w_t", d, d});
        }
        out.push_back({p + "w_o", d, d});
        out.push_back({p + "b_o", 1, d});
        out.push_back({p + "ln1.gain", 1, d});
        out.push_back({p + "ln1.bias", 1, d});
        out.push_back({p + "ff1.w", d, f});
        out.push_back({p + "ff1.b", 1, f});
        out.push_back({p + "ff2.w", f, d});
        out.push_back({p + "ff2.b", 1, d});
        out.push_back({p + "ln2.gain", 1, d});
        out.push_back({p + "ln2.bias", 1, d});
    }
    out.push_back({"mlm_bias", 1, cfg.token_vocab_size});
    return out;
}

ParamSlots parameter_slots(const ModelConfig& cfg) {
    const bool temporal = uses_temporal_scores(cfg.mode);
    std::size_t i = 0;
    ParamSlots s{};
    s.token_embedding = i++;
    s.position_embedding = i++;
    s.time_embedding = temporal ? i++ : npos;
    s.emb_ln_gain = i++;
    s.emb_ln_bias = i++;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        LayerSlots ls{};
        ls.w_q = i++;
        ls.b_q = i++;
        ls.w_k = i++;
        ls.b_k = i++;
        ls.w_v = i++;
        ls.b_v = i++;
        ls.w_t = temporal ? i++ : npos;
        ls.w_o = i++;
        ls.b_o = i++;
        ls.ln1_gain = i++;
        ls.ln1_bias = i++;
        ls.ff1_w = i++;
        ls.ff1_b = i++;
        ls.ff2_w = i++;
        ls.ff2_b = i++;
        ls.ln2_gain = i++;
        ls.ln2_bias = i++;
        s.layers.push_back(ls);
    }
    s.mlm_bias = i++;
    return s;
}

Model build_model(const ModelConfig& cfg) {
    Model m;
    m.config = cfg;
    const auto layout = parameter_layout(cfg);
    m.slots = parameter_slots(cfg);
    std::mt19937_64 rng(cfg.seed);
    const double min_time_norm = 0.1 * std::sqrt(static_cast<double>(cfg.hidden)) * cfg.init_std;
    for (const auto& b : layout) {
        Parameter p{b.name, Matrix(b.rows, b.cols)};
        if (is_gain(b.name)) {
            p.value.fill(1.0);
        } else if (!is_bias(b.name)) {
            for (std::size_t r = 0; r < b.rows; ++r) {
                auto row = p.value.row(r);
                do {
                    double sq = 0.0;
                    for (double& v : row) {
                        v = truncated_normal(rng, cfg.init_std);
                        sq += v * v;
                    }
                    if (b.name != "time_embedding" || std::sqrt(sq) >= min_time_norm) {
                        break;
                    }
                } while (true);
            }
        }
        m.params.push_back(std::move(p));
    }
    return m;
}

Model build_model(ModelConfig cfg, Vocab vocab, TimeVocab time_vocab) {
    cfg.token_vocab_size = vocab.size();
    cfg.time_vocab_size = time_vocab.size();
    if (uses_time_prepend(cfg.mode) && vocab.time_token_count() < time_vocab.point_count()) {
        throw ConfigError("prepend modes need one time token per time point in the vocabulary");
    }
    Model m = build_model(cfg);
    m.vocab = std::move(vocab);
    m.time_vocab = std::move(time_vocab);
    return m;
}

ParameterCount count_parameters(const ModelConfig& cfg) {
    ParameterCount c;
    for (const auto& b : parameter_layout(cfg)) {
        const std::size_t n = b.rows * b.cols;
        c.total += n;
        c.blocks.emplace_back(b.name, n);
        if (b.name.ends_with(".w_t")) {
            c.time_projection += n;
        } else if (b.name == "time_embedding") {
            c.time_table += n;
        }
    }
    return c;
}

ParameterCount count_parameters(const Model& m) {
    ParameterCount c;
    for (const auto& p : m.params) {
        const std::size_t n = p.value.size();
        c.total += n;
        c.blocks.emplace_back(p.name, n);
        if (p.name.ends_with(".w_t")) {
            c.time_projection += n;
        } else if (p.name == "time_embedding") {
            c.time_table += n;
        }
    }
    return c;
}

void check_sequence(const Model& m, const TimedSequence& s) {
    const auto& cfg = m.config;
    if (s.token_ids.size() != s.time_ids.size()) {
        throw ContractError("token_ids and time_ids differ in length (" + std::to_string(s.token_ids.size()) +
                            " vs " + std::to_string(s.time_ids.size()) + ")");
    }
    if (s.size() == 0) {
        throw ContractError("empty sequence");
    }
    if (s.size() > cfg.max_len) {
        throw LengthError("sequence length " + std::to_string(s.size()) + " exceeds max_len " +
                          std::to_string(cfg.max_len));
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.token_ids[i] >= cfg.token_vocab_size) {
            throw VocabError("token id " + std::to_string(s.token_ids[i]) + " at position " + std::to_string(i) +
                             " outside vocabulary of size " + std::to_string(cfg.token_vocab_size));
        }
        if (s.time_ids[i] >= cfg.time_vocab_size) {
            throw VocabError("time id " + std::to_string(s.time_ids[i]) + " at position " + std::to_string(i) +
                             " outside time vocabulary of size " + std::to_string(cfg.time_vocab_size));
        }
    }
}

ForwardPass forward(Tape& tape, const Model& m, std::span<const TimedSequence> seqs, bool trainable,
                    bool keep_attention) {
    if (seqs.empty()) {
        throw ContractError("forward() needs at least one sequence");
    }
    const auto& cfg = m.config;
    const auto& slots = m.slots;
    const std::size_t dk = cfg.head_dim;
    const bool temporal = uses_temporal_scores(cfg.mode);
    const bool scaled = uses_scaled_scores(cfg.mode);

    ForwardPass pass;
    pass.params.reserve(m.params.size());
    for (const auto& p : m.params) {
        pass.params.push_back(trainable ? tape.variable(p.value) : tape.constant_ref(p.value));
    }
    auto P = [&](std::size_t slot) { return pass.params[slot]; };

    std::vector<std::size_t> tokens;
    std::vector<std::size_t> positions;
    std::vector<std::size_t> times;
    for (const auto& s : seqs) {
        check_sequence(m, s);
        pass.offsets.push_back(tokens.size());
        tokens.insert(tokens.end(), s.token_ids.begin(), s.token_ids.end());
        times.insert(times.end(), s.time_ids.begin(), s.time_ids.end());
        for (std::size_t i = 0; i < s.size(); ++i) {
            positions.push_back(i);
        }
    }

    Var x = add(gather_rows(P(slots.token_embedding), tokens), gather_rows(P(slots.position_embedding), positions));
    x = layer_norm(x, P(slots.emb_ln_gain), P(slots.emb_ln_bias), cfg.ln_eps);

    Var time_rows;
    if (temporal) {
        time_rows = gather_rows(P(slots.time_embedding), times);
    }
    std::vector<double> scales;
    if (scaled) {
        scales = row_scales(m, times);
    }

    if (keep_attention) {
        pass.attention.assign(cfg.layers, std::vector<std::vector<Var>>(cfg.heads));
    }

    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const LayerSlots& ls = slots.layers[l];
        Var q = add_row(matmul(x, P(ls.w_q)), P(ls.b_q));
        Var k = add_row(matmul(x, P(ls.w_k)), P(ls.b_k));
        Var v = add_row(matmul(x, P(ls.w_v)), P(ls.b_v));
        Var t;
        if (temporal) {
            t = matmul(time_rows, P(ls.w_t));
        }

        std::vector<Var> seq_outputs;
        seq_outputs.reserve(seqs.size());
        for (std::size_t s = 0; s < seqs.size(); ++s) {
            const std::size_t off = pass.offsets[s];
            const std::size_t n = seqs[s].size();
            Var qs = row_slice(q, off, n);
            Var ks = row_slice(k, off, n);
            Var vs = row_slice(v, off, n);
            Var ts = temporal ? row_slice(t, off, n) : Var{};
            std::vector<double> seq_scales;
            if (scaled) {
                seq_scales.assign(scales.begin() + static_cast<std::ptrdiff_t>(off),
                                  scales.begin() + static_cast<std::ptrdiff_t>(off + n));
            }
            std::vector<Var> heads;
            heads.reserve(cfg.heads);
            for (std::size_t h = 0; h < cfg.heads; ++h) {
                Var qh = col_slice(qs, h * dk, dk);
                Var kh = col_slice(ks, h * dk, dk);
                Var vh = col_slice(vs, h * dk, dk);
                Var logits;
                if (temporal) {
                    logits = temporal_logits(qh, kh, col_slice(ts, h * dk, dk));
                } else if (scaled) {
                    logits = scaled_logits(qh, kh, seq_scales);
                } else {
                    logits = standard_logits(qh, kh);
                }
                HeadVars out = attend(logits, vh);
                if (keep_attention) {
                    pass.attention[l][h].push_back(out.weights);
                }
                heads.push_back(out.y);
            }
            seq_outputs.push_back(cfg.heads == 1 ? heads.front() : concat_cols(heads));
        }
        Var attn = seq_outputs.size() == 1 ? seq_outputs.front() : concat_rows(seq_outputs);
        Var proj = add_row(matmul(attn, P(ls.w_o)), P(ls.b_o));
        x = layer_norm(add(x, proj), P(ls.ln1_gain), P(ls.ln1_bias), cfg.ln_eps);
        Var ff = gelu(add_row(matmul(x, P(ls.ff1_w)), P(ls.ff1_b)));
        ff = add_row(matmul(ff, P(ls.ff2_w)), P(ls.ff2_b));
        x = layer_norm(add(x, ff), P(ls.ln2_gain), P(ls.ln2_bias), cfg.ln_eps);
        pass.layers.push_back(x);
    }
    return pass;
}

std::vector<HiddenStates> encode_batch(const Model& m, std::span<const TimedSequence> seqs) {
    Tape tape;
    const ForwardPass pass = forward(tape, m, seqs, false);
    std::vector<HiddenStates> out(seqs.size());
    for (std::size_t s = 0; s < seqs.size(); ++s) {
        out[s].layers.reserve(pass.layers.size());
        for (const Var& layer : pass.layers) {
            const Matrix& all = layer.value();
            const auto rows = all.data().subspan(pass.offsets[s] * all.cols(), seqs[s].size() * all.cols());
            out[s].layers.emplace_back(seqs[s].size(), all.cols(), std::vector<double>(rows.begin(), rows.end()));
        }
    }
    return out;
}

HiddenStates encode(const Model& m, const TimedSequence& s) {
    return std::move(encode_batch(m, std::span<const TimedSequence>(&s, 1)).front());
}

EncodeDetail encode_with_attention(const Model& m, const TimedSequence& s) {
    Tape tape;
    const ForwardPass pass = forward(tape, m, std::span<const TimedSequence>(&s, 1), false, true);
    EncodeDetail out;
    for (const Var& layer : pass.layers) {
        out.hidden.layers.push_back(layer.value());
    }
    for (const auto& layer : pass.attention) {
        std::vector<Matrix> heads;
        for (const auto& head : layer) {
            heads.push_back(head.front().value());
        }
        out.attention.push_back(std::move(heads));
    }
    return out;
}

Var mlm_logits(const Model& m, const ForwardPass& pass, Var hidden_rows) {
    return add_row(matmul_nt(hidden_rows, pass.params[m.slots.token_embedding]), pass.params[m.slots.mlm_bias]);
}

Matrix mlm_logits(const Model& m, const Matrix& h_last) {
    if (h_last.cols() != m.config.hidden) {
        throw ShapeError("mlm_logits: hidden states " + h_last.shape() + " but model width is " +
                         std::to_string(m.config.hidden));
    }
    Tape tape;
    Var h = tape.constant_ref(h_last);
    Var emb = tape.constant_ref(m.block(m.slots.token_embedding));
    Var bias = tape.constant_ref(m.block(m.slots.mlm_bias));
    return add_row(matmul_nt(h, emb), bias).value();
}

Var mlm_loss(const Model& m, const ForwardPass& pass, std::span<const std::vector<std::size_t>> positions,
             std::span<const std::vector<std::size_t>> labels) {
    if (positions.size() != pass.offsets.size() || labels.size() != pass.offsets.size()) {
        throw ContractError("mlm_loss: one position/label list per sequence required");
    }
    std::vector<std::size_t> rows;
    std::vector<std::size_t> flat_labels;
    for (std::size_t s = 0; s < positions.size(); ++s) {
        if (positions[s].size() != labels[s].size()) {
            throw ContractError("mlm_loss: positions and labels differ in length");
        }
        for (std::size_t i = 0; i < positions[s].size(); ++i) {
            rows.push_back(pass.offsets[s] + positions[s][i]);
            flat_labels.push_back(labels[s][i]);
        }
    }
    if (rows.empty()) {
        throw ContractError("mlm_loss: no masked positions");
    }
    Var hidden = gather_rows(pass.layers.back(), std::move(rows));
    return cross_entropy(mlm_logits(m, pass, hidden), std::move(flat_labels));
}

}  // namespace tatt
