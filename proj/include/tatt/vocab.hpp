// Token and time-point vocabularies.
//
// Token ids: [PAD]=0, [UNK]=1, [MASK]=2, then injected target words, then
// corpus words by descending frequency, then one "<label>" time token per
// time point (used only by the prepend modes).
//
// Time ids: 0..2 are reserved for [PAD], [UNK] and [MASK]; time point k
// (1-based) has id 2 + k.
#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tatt {

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kUnkId = 1;
inline constexpr std::size_t kMaskId = 2;
inline constexpr std::size_t kNumSpecialTokens = 3;

inline constexpr std::size_t kPadTime = 0;
inline constexpr std::size_t kUnkTime = 1;
inline constexpr std::size_t kMaskTime = 2;
inline constexpr std::size_t kNumReservedTimes = 3;

std::string time_token(std::string_view label);

class Vocab {
public:
    Vocab() = default;

    /// tokens excludes the three specials, which are always prepended.
    /// time_tokens must be the trailing entries of tokens.
    Vocab(std::vector<std::string> tokens, std::set<std::string> targets, std::size_t time_tokens);

    std::size_t size() const noexcept { return tokens_.size(); }
    bool empty() const noexcept { return tokens_.empty(); }

    std::optional<std::size_t> find(std::string_view token) const;
    std::size_t id_or_unk(std::string_view token) const;
    const std::string& token(std::size_t id) const;

    bool is_special(std::size_t id) const noexcept { return id < kNumSpecialTokens; }
    bool is_time_token(std::size_t id) const noexcept { return id >= regular_end() && id < size(); }
    /// Ids in [kNumSpecialTokens, regular_end()) are ordinary words.
    std::size_t regular_end() const noexcept { return tokens_.size() - time_tokens_; }
    std::size_t time_token_count() const noexcept { return time_tokens_; }

    const std::set<std::string>& targets() const noexcept { return targets_; }
    /// All tokens in id order, specials included.
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    friend bool operator==(const Vocab& a, const Vocab& b) {
        return a.tokens_ == b.tokens_ && a.targets_ == b.targets_ && a.time_tokens_ == b.time_tokens_;
    }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> ids_;
    std::set<std::string> targets_;
    std::size_t time_tokens_ = 0;
};

struct TimePoint {
    std::string label;
    double doc_count = 0.0;

    friend bool operator==(const TimePoint&, const TimePoint&) = default;
};

class TimeVocab {
public:
    TimeVocab() = default;
    explicit TimeVocab(std::vector<TimePoint> points);

    /// Reserved ids plus one per time point.
    std::size_t size() const noexcept { return kNumReservedTimes + points_.size(); }
    std::size_t point_count() const noexcept { return points_.size(); }
    const std::vector<TimePoint>& points() const noexcept { return points_; }

    std::optional<std::size_t> find(std::string_view label) const;
    /// Throws VocabError naming the label when absent.
    std::size_t id(std::string_view label) const;
    const std::string& label(std::size_t time_id) const;

    bool is_reserved(std::size_t time_id) const noexcept { return time_id < kNumReservedTimes; }
    /// 1-based index among time points; 0 for reserved ids.
    std::size_t index(std::size_t time_id) const noexcept;
    std::vector<double> doc_counts() const;

    friend bool operator==(const TimeVocab&, const TimeVocab&) = default;

private:
    std::vector<TimePoint> points_;
};

}  // namespace tatt
