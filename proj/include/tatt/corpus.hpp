// Time-sliced corpora: loading, tokenization, vocabulary construction,
// sequence encoding, MLM masking and sentence sampling.
#pragma once

#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tatt/attention.hpp"
#include "tatt/sequence.hpp"
#include "tatt/vocab.hpp"

namespace tatt {

struct Corpus {
    std::string time_point;
    std::vector<std::string> sentences;
    std::size_t doc_count = 0;
};

struct TargetWordRecord {
    std::string word;
    double gold_score = 0.0;
};

struct LoadOptions {
    bool lowercase = true;
};

/// One sentence per line; blank lines dropped. Throws IoError for a missing
/// file or invalid UTF-8, EmptyCorpusError when nothing remains.
Corpus load_corpus(const std::filesystem::path& path, std::string time_point, LoadOptions opts = {});

/// Corpus from in-memory sentences, with the same normalization as load_corpus.
Corpus make_corpus(std::vector<std::string> sentences, std::string time_point, LoadOptions opts = {});

/// `word<TAB>gold_score` per line, no header. Throws ParseError with the
/// line number on malformed input.
std::vector<TargetWordRecord> load_targets(const std::filesystem::path& path, LoadOptions opts = {});

/// Whitespace split, with ASCII punctuation other than _ - ' split off into
/// single-character tokens.
std::vector<std::string> tokenize(std::string_view sentence);

bool contains_token(std::string_view sentence, std::string_view word);

/// Words with frequency >= min_freq plus every target word, and one time
/// token per corpus time point.
Vocab build_vocab(std::span<const Corpus> corpora, std::span<const TargetWordRecord> targets,
                  std::size_t min_freq = 2);

/// Time points in corpus order, doc counts taken from each corpus.
TimeVocab build_time_vocab(std::span<const Corpus> corpora);

/// Maps a sentence to ids at one time point. Prepend modes insert the time
/// token at position 0. Sequences longer than max_len are truncated.
TimedSequence encode_sequence(const Vocab& vocab, const TimeVocab& times, std::string_view sentence,
                              std::string_view time_point, AttentionMode mode, std::size_t max_len);

std::vector<std::string> decode(const Vocab& vocab, const TimedSequence& seq);

/// Right-pads every sequence to the longest with [PAD] / the pad time id.
std::vector<TimedSequence> pad_batch(std::span<const TimedSequence> batch);

struct MaskedSequence {
    TimedSequence input;
    std::vector<std::size_t> positions;
    std::vector<std::size_t> labels;
};

/// BERT-style corruption. Per eligible position (not a special token, not a
/// time token), in order: u ~ U[0,1); selected when u < mask_prob. For a
/// selected position r ~ U[0,1): r < 0.8 -> [MASK], r < 0.9 -> a uniform
/// ordinary word, else unchanged. In temporal modes a [MASK] position takes
/// the reserved mask time id.
MaskedSequence mask_for_mlm(const TimedSequence& seq, const Vocab& vocab, std::mt19937_64& rng, double mask_prob,
                            AttentionMode mode);

/// Uniform sample without replacement among sentences containing word as a
/// whole token, in corpus order. All matches are returned when fewer than n.
std::vector<std::string> sample_sentences(const Corpus& corpus, std::string_view word, std::size_t n,
                                          std::mt19937_64& rng);

}  // namespace tatt
