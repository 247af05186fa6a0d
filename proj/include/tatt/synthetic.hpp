// Synthetic two-slice corpus with planted meaning changes.
//
// Context words come in topic pools. Every sentence holds one target word
// surrounded by words from that target's topic, some background words and
// function words. Stable targets keep their topic in both slices; planted
// targets move to the next topic in the second slice.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tatt/corpus.hpp"

namespace tatt {

struct SynthConfig {
    std::size_t sentences_per_slice = 2000;
    std::size_t planted = 3;
    std::size_t stable = 9;
    std::size_t topic_words = 5;
    std::size_t function_words = 3;
    /// Chance that a context slot takes a background word instead of a topic word.
    double noise = 0.15;
    std::uint64_t seed = 1;
};

struct SynthDataset {
    std::vector<std::string> first;
    std::vector<std::string> second;
    /// Gold 1 for planted targets, 0 for stable ones.
    std::vector<TargetWordRecord> targets;
};

SynthDataset make_planted_dataset(const SynthConfig& cfg);

/// Writes corpus_t1.txt, corpus_t2.txt and targets.tsv into dir.
void write_dataset(const std::filesystem::path& dir, const SynthDataset& data);

}  // namespace tatt
