#pragma once

#include <cstddef>
#include <vector>

namespace tatt {

/// Token ids with a time id per position; both vectors have equal length.
struct TimedSequence {
    std::vector<std::size_t> token_ids;
    std::vector<std::size_t> time_ids;

    std::size_t size() const noexcept { return token_ids.size(); }

    friend bool operator==(const TimedSequence&, const TimedSequence&) = default;
};

}  // namespace tatt
