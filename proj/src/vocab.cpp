#include "tatt/vocab.hpp"

#include "tatt/error.hpp"

namespace tatt {

namespace {

const std::string kReservedTimeLabels[kNumReservedTimes] = {"[PAD]", "[UNK]", "[MASK]"};

}  // namespace

std::string time_token(std::string_view label) { return "<" + std::string(label) + ">"; }

Vocab::Vocab(std::vector<std::string> tokens, std::set<std::string> targets, std::size_t time_tokens)
    : targets_(std::move(targets)), time_tokens_(time_tokens) {
    tokens_ = {"[PAD]", "[UNK]", "[MASK]"};
    tokens_.insert(tokens_.end(), std::make_move_iterator(tokens.begin()), std::make_move_iterator(tokens.end()));
    if (time_tokens_ > tokens_.size() - kNumSpecialTokens) {
        throw VocabError("more time tokens than vocabulary entries");
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!ids_.emplace(tokens_[i], i).second) {
            throw VocabError("duplicate vocabulary token '" + tokens_[i] + "'");
        }
    }
    for (const auto& t : targets_) {
        if (!ids_.contains(t)) {
            throw VocabError("target word '" + t + "' missing from vocabulary");
        }
    }
}

std::optional<std::size_t> Vocab::find(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    if (it == ids_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::size_t Vocab::id_or_unk(std::string_view token) const { return find(token).value_or(kUnkId); }

const std::string& Vocab::token(std::size_t id) const {
    if (id >= tokens_.size()) {
        throw VocabError("token id " + std::to_string(id) + " out of range (vocabulary size " +
                         std::to_string(tokens_.size()) + ")");
    }
    return tokens_[id];
}

TimeVocab::TimeVocab(std::vector<TimePoint> points) : points_(std::move(points)) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (points_[i].label == points_[j].label) {
                throw VocabError("duplicate time point '" + points_[i].label + "'");
            }
        }
    }
}

std::optional<std::size_t> TimeVocab::find(std::string_view label) const {
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (points_[i].label == label) {
            return kNumReservedTimes + i;
        }
    }
    return std::nullopt;
}

std::size_t TimeVocab::id(std::string_view label) const {
    if (auto id = find(label)) {
        return *id;
    }
    throw VocabError("unknown time point '" + std::string(label) + "'");
}

const std::string& TimeVocab::label(std::size_t time_id) const {
    if (time_id < kNumReservedTimes) {
        return kReservedTimeLabels[time_id];
    }
    if (time_id >= size()) {
        throw VocabError("time id " + std::to_string(time_id) + " out of range");
    }
    return points_[time_id - kNumReservedTimes].label;
}

std::size_t TimeVocab::index(std::size_t time_id) const noexcept {
    if (time_id < kNumReservedTimes || time_id >= size()) {
        return 0;
    }
    return time_id - kNumReservedTimes + 1;
}

std::vector<double> TimeVocab::doc_counts() const {
    std::vector<double> out;
    out.reserve(points_.size());
    for (const auto& p : points_) {
        out.push_back(p.doc_count);
    }
    return out;
}

}  // namespace tatt
