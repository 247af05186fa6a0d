#include "tatt/synthetic.hpp"

#include <algorithm>
#include <array>
#include <random>

#include "tatt/error.hpp"
#include "tatt/io.hpp"

namespace tatt {

namespace {

constexpr std::size_t kTopics = 3;

const std::array<std::vector<std::string>, 3>& topic_pools() {
    static const std::array<std::vector<std::string>, 3> pools = {
        std::vector<std::string>{"harbor", "wave", "sail", "tide", "anchor", "shore", "fish", "salt", "deck",
                                 "storm", "current", "reef", "gull", "net", "mast", "boat"},
        std::vector<std::string>{"field", "wheat", "plough", "barn", "cattle", "seed", "harvest", "soil",
                                 "fence", "orchard", "hay", "sheep", "tractor", "furrow", "meadow", "goat"},
        std::vector<std::string>{"gear", "furnace", "steam", "lathe", "bolt", "forge", "piston", "iron",
                                 "engine", "boiler", "shaft", "rivet", "valve", "smoke", "wheel", "coal"},
    };
    return pools;
}

const std::vector<std::string>& background_pool() {
    static const std::vector<std::string> words = {"day", "man", "woman", "year", "house", "time", "town",
                                                   "road", "hand", "night", "friend", "letter", "morning",
                                                   "window", "child", "story"};
    return words;
}

const std::vector<std::string>& function_pool() {
    static const std::vector<std::string> words = {"the", "of", "and", "a", "in", "to", "with", "was", "on", "by"};
    return words;
}

const std::vector<std::string>& target_pool() {
    static const std::vector<std::string> words = {"bank",  "line",  "plant", "crane", "spring", "press",
                                                   "bark",  "pitch", "mine",  "stock", "yard",   "ring",
                                                   "board", "trunk", "chest", "seal", "match",  "stall"};
    return words;
}

template <class T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
    return v[d(rng)];
}

std::string sentence(const std::string& target, std::size_t topic, const SynthConfig& cfg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::string> words;
    words.push_back(target);
    for (std::size_t i = 0; i < cfg.topic_words; ++i) {
        words.push_back(u(rng) < cfg.noise ? pick(background_pool(), rng) : pick(topic_pools()[topic], rng));
    }
    for (std::size_t i = 0; i < cfg.function_words; ++i) {
        words.push_back(pick(function_pool(), rng));
    }
    std::shuffle(words.begin(), words.end(), rng);
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) {
            out += ' ';
        }
        out += w;
    }
    return out;
}

}  // namespace

SynthDataset make_planted_dataset(const SynthConfig& cfg) {
    const std::size_t n_targets = cfg.planted + cfg.stable;
    if (n_targets == 0 || n_targets > target_pool().size()) {
        throw ConfigError("synthetic generator supports 1.." + std::to_string(target_pool().size()) + " targets");
    }
    if (cfg.sentences_per_slice < n_targets) {
        throw ConfigError("need at least one sentence per target and slice");
    }
    if (!(cfg.noise >= 0.0 && cfg.noise <= 1.0)) {
        throw ConfigError("noise must lie in [0, 1]");
    }
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::string> words(target_pool().begin(), target_pool().begin() + static_cast<long>(n_targets));
    std::shuffle(words.begin(), words.end(), rng);

    SynthDataset data;
    std::vector<std::size_t> topic1(n_targets);
    std::vector<std::size_t> topic2(n_targets);
    for (std::size_t i = 0; i < n_targets; ++i) {
        const bool planted = i < cfg.planted;
        topic1[i] = i % kTopics;
        topic2[i] = planted ? (topic1[i] + 1) % kTopics : topic1[i];
        data.targets.push_back({words[i], planted ? 1.0 : 0.0});
    }
    for (std::size_t s = 0; s < cfg.sentences_per_slice; ++s) {
        const std::size_t i = s % n_targets;
        data.first.push_back(sentence(words[i], topic1[i], cfg, rng));
    }
    for (std::size_t s = 0; s < cfg.sentences_per_slice; ++s) {
        const std::size_t i = s % n_targets;
        data.second.push_back(sentence(words[i], topic2[i], cfg, rng));
    }
    std::shuffle(data.first.begin(), data.first.end(), rng);
    std::shuffle(data.second.begin(), data.second.end(), rng);
    std::sort(data.targets.begin(), data.targets.end(), [](const auto& a, const auto& b) { return a.word < b.word; });
    return data;
}

void write_dataset(const std::filesystem::path& dir, const SynthDataset& data) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create '" + dir.string() + "'");
    }
    auto join = [](const std::vector<std::string>& lines) {
        std::string out;
        for (const auto& l : lines) {
            out += l;
            out += '\n';
        }
        return out;
    };
    write_file_atomic(dir / "corpus_t1.txt", join(data.first));
    write_file_atomic(dir / "corpus_t2.txt", join(data.second));
    std::string targets;
    for (const auto& t : data.targets) {
        targets += t.word + "\t" + format_real(t.gold_score) + "\n";
    }
    write_file_atomic(dir / "targets.tsv", targets);
}

}  // namespace tatt
