#include "tatt/change_detection.hpp"

#include <algorithm>
#include <cmath>

#include "tatt/error.hpp"
#include "tatt/io.hpp"

namespace tatt {

namespace {

constexpr std::size_t kEncodeBatch = 32;

std::uint64_t word_hash(std::string_view w) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : w) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

std::mt19937_64 word_rng(std::uint64_t seed, std::string_view word) {
    const std::uint64_t wh = word_hash(word);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(wh), static_cast<std::uint32_t>(wh >> 32)};
    return std::mt19937_64(seq);
}

void check_h(const Model& m, std::size_t h) {
    if (h < 1 || h > m.config.layers) {
        throw ConfigError("h = " + std::to_string(h) + " must lie in [1, " + std::to_string(m.config.layers) + "]");
    }
}

std::size_t word_id(const Model& m, std::string_view word) {
    const auto id = m.vocab.find(word);
    if (!id || m.vocab.is_special(*id) || m.vocab.is_time_token(*id)) {
        throw AbsentWordError("word '" + std::string(word) + "' is not in the model vocabulary");
    }
    return *id;
}

}  // namespace

std::vector<std::vector<double>> embed_occurrences(const Model& m, std::span<const std::string> sentences,
                                                   std::string_view time_point, std::string_view word, std::size_t h) {
    check_h(m, h);
    const std::size_t wid = word_id(m, word);
    const std::size_t d = m.config.hidden;
    const std::size_t first_layer = m.config.layers - h;
    std::vector<std::vector<double>> out;
    for (std::size_t start = 0; start < sentences.size(); start += kEncodeBatch) {
        const std::size_t end = std::min(sentences.size(), start + kEncodeBatch);
        std::vector<TimedSequence> batch;
        for (std::size_t i = start; i < end; ++i) {
            auto seq = encode_sequence(m.vocab, m.time_vocab, sentences[i], time_point, m.config.mode, m.config.max_len);
            if (std::find(seq.token_ids.begin(), seq.token_ids.end(), wid) != seq.token_ids.end()) {
                batch.push_back(std::move(seq));
            }
        }
        if (batch.empty()) {
            continue;
        }
        const auto states = encode_batch(m, batch);
        for (std::size_t s = 0; s < batch.size(); ++s) {
            for (std::size_t pos = 0; pos < batch[s].size(); ++pos) {
                if (batch[s].token_ids[pos] != wid) {
                    continue;
                }
                std::vector<double> v(d, 0.0);
                for (std::size_t l = first_layer; l < m.config.layers; ++l) {
                    const auto row = states[s].layers[l].row(pos);
                    for (std::size_t c = 0; c < d; ++c) {
                        v[c] += row[c];
                    }
                }
                for (double& x : v) {
                    x /= static_cast<double>(h);
                }
                out.push_back(std::move(v));
            }
        }
    }
    return out;
}

std::vector<std::vector<double>> embed_occurrence(const Model& m, std::string_view sentence,
                                                  std::string_view time_point, std::string_view word, std::size_t h) {
    const std::string s(sentence);
    auto out = embed_occurrences(m, std::span<const std::string>(&s, 1), time_point, word, h);
    if (out.empty()) {
        throw AbsentWordError("word '" + std::string(word) + "' does not occur in the sentence");
    }
    return out;
}

WordTimeEmbedding time_specific_embedding(const Model& m, const Corpus& corpus, std::string_view word, std::size_t n,
                                          std::size_t h, std::mt19937_64& rng) {
    check_h(m, h);
    const auto sentences = sample_sentences(corpus, word, n, rng);
    const auto occurrences = embed_occurrences(m, sentences, corpus.time_point, word, h);
    if (occurrences.empty()) {
        throw AbsentWordError("word '" + std::string(word) + "' has no occurrence within max_len at time point '" +
                              corpus.time_point + "'");
    }
    WordTimeEmbedding out{std::string(word), corpus.time_point, std::vector<double>(m.config.hidden, 0.0),
                          occurrences.size()};
    for (const auto& v : occurrences) {
        for (std::size_t c = 0; c < v.size(); ++c) {
            out.vector[c] += v[c];
        }
    }
    for (double& x : out.vector) {
        x /= static_cast<double>(occurrences.size());
    }
    return out;
}

double cosine_distance(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw ShapeError("cosine_distance: lengths " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
    }
    double dot = 0.0;
    double nu = 0.0;
    double nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (!(nu > 0.0) || !(nv > 0.0)) {
        throw DegenerateVectorError("cosine distance of a zero vector");
    }
    const double d = 1.0 - dot / (std::sqrt(nu) * std::sqrt(nv));
    return std::clamp(d, 0.0, 2.0);
}

ScoreReport semantic_change_scores(const Model& m, const Corpus& first, const Corpus& second,
                                   std::span<const TargetWordRecord> targets, std::size_t n, std::size_t h,
                                   std::uint64_t seed) {
    check_h(m, h);
    ScoreReport report{n, h, seed, {}};
    std::vector<ScoreEntry> scored;
    std::vector<ScoreEntry> unscored;
    for (const auto& t : targets) {
        ScoreEntry e{t.word, t.gold_score, std::nullopt, 0, 0, {}};
        std::optional<WordTimeEmbedding> e1;
        std::optional<WordTimeEmbedding> e2;
        std::vector<std::string> missing;
        {
            auto rng = word_rng(seed, t.word);
            try {
                e1 = time_specific_embedding(m, first, t.word, n, h, rng);
                e.support_t1 = e1->support;
            } catch (const AbsentWordError&) {
                missing.push_back(first.time_point);
            }
        }
        {
            auto rng = word_rng(seed, t.word);
            try {
                e2 = time_specific_embedding(m, second, t.word, n, h, rng);
                e.support_t2 = e2->support;
            } catch (const AbsentWordError&) {
                missing.push_back(second.time_point);
            }
        }
        if (!missing.empty()) {
            e.reason = "absent@" + missing.front();
            for (std::size_t i = 1; i < missing.size(); ++i) {
                e.reason += "," + missing[i];
            }
            unscored.push_back(std::move(e));
            continue;
        }
        try {
            e.score = cosine_distance(e1->vector, e2->vector);
            scored.push_back(std::move(e));
        } catch (const DegenerateVectorError&) {
            e.reason = "degenerate";
            unscored.push_back(std::move(e));
        }
    }
    std::sort(scored.begin(), scored.end(), [](const ScoreEntry& a, const ScoreEntry& b) {
        if (*a.score != *b.score) {
            return *a.score > *b.score;
        }
        return a.word < b.word;
    });
    std::sort(unscored.begin(), unscored.end(), [](const ScoreEntry& a, const ScoreEntry& b) { return a.word < b.word; });
    report.entries = std::move(scored);
    report.entries.insert(report.entries.end(), std::make_move_iterator(unscored.begin()),
                          std::make_move_iterator(unscored.end()));
    return report;
}

std::string format_score_report(const ScoreReport& report) {
    std::string out = "# n=" + std::to_string(report.n) + " h=" + std::to_string(report.h) +
                      " seed=" + std::to_string(report.seed) + "\n";
    for (const auto& e : report.entries) {
        out += e.word + "\t" + (e.score ? format_real(*e.score) : std::string("NA")) + "\t" +
               std::to_string(e.support_t1) + "\t" + std::to_string(e.support_t2);
        if (!e.score) {
            out += "\t" + e.reason;
        }
        out += "\n";
    }
    return out;
}

void write_score_report(const std::filesystem::path& path, const ScoreReport& report) {
    write_file_atomic(path, format_score_report(report));
}

}  // namespace tatt
