// Time-specific word representations and semantic-change scoring.
//
// For a word w and time point t: sample up to n sentences containing w from
// the corpus of t, run each through the model at time t, take the vectors at
// every occurrence of w from the last h transformer layers and average them
// per occurrence, then take the flat mean over all occurrence vectors. The
// change score is the cosine distance between the means at t1 and t2.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tatt/corpus.hpp"
#include "tatt/model.hpp"

namespace tatt {

struct WordTimeEmbedding {
    std::string word;
    std::string time_point;
    std::vector<double> vector;
    /// Number of occurrence vectors averaged.
    std::size_t support = 0;
};

/// One D-vector per occurrence of word in sentence. Throws AbsentWordError
/// when the word does not occur (within max_len), ConfigError unless
/// 1 <= h <= L.
std::vector<std::vector<double>> embed_occurrence(const Model& m, std::string_view sentence,
                                                  std::string_view time_point, std::string_view word, std::size_t h);

/// Occurrence vectors for many sentences, encoded in batches. Sentences
/// without the word contribute nothing.
std::vector<std::vector<double>> embed_occurrences(const Model& m, std::span<const std::string> sentences,
                                                   std::string_view time_point, std::string_view word, std::size_t h);

WordTimeEmbedding time_specific_embedding(const Model& m, const Corpus& corpus, std::string_view word, std::size_t n,
                                          std::size_t h, std::mt19937_64& rng);

/// 1 - u.v / (|u||v|), clamped to [0, 2]. Throws DegenerateVectorError for a
/// zero vector.
double cosine_distance(std::span<const double> u, std::span<const double> v);

struct ScoreEntry {
    std::string word;
    double gold = 0.0;
    /// Empty when the word could not be scored.
    std::optional<double> score;
    std::size_t support_t1 = 0;
    std::size_t support_t2 = 0;
    /// e.g. "absent@t2"; empty for scored words.
    std::string reason;
};

struct ScoreReport {
    std::size_t n = 0;
    std::size_t h = 0;
    std::uint64_t seed = 0;
    /// Scored entries by descending score (ties by word), then unscored
    /// entries by word.
    std::vector<ScoreEntry> entries;
};

/// Sampling for each word uses a generator seeded from (seed, word), so both
/// time slices draw from the same stream.
ScoreReport semantic_change_scores(const Model& m, const Corpus& first, const Corpus& second,
                                   std::span<const TargetWordRecord> targets, std::size_t n, std::size_t h,
                                   std::uint64_t seed);

/// TSV: a `# ...` header comment line with n, h, seed, then
/// `word<TAB>score<TAB>support_t1<TAB>support_t2` per scored word, then
/// `word<TAB>NA<TAB>support_t1<TAB>support_t2<TAB>reason` per unscored word.
std::string format_score_report(const ScoreReport& report);
void write_score_report(const std::filesystem::path& path, const ScoreReport& report);

}  // namespace tatt
