#include "tatt/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>

#include "tatt/error.hpp"

namespace tatt {

namespace {

bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::size_t extra = 0;
        std::uint32_t cp = 0;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            extra = 1;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            extra = 2;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            extra = 3;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + extra >= s.size()) {
            return false;
        }
        for (std::size_t k = 1; k <= extra; ++k) {
            const auto cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xC0) != 0x80) {
                return false;
            }
            cp = (cp << 6) | (cc & 0x3F);
        }
        // Overlong encodings, surrogates, out of range.
        if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000) ||
            cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            return false;
        }
        i += extra + 1;
    }
    return true;
}

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

std::string normalize(std::string_view line, const LoadOptions& opts) {
    std::string out(line);
    if (opts.lowercase) {
        for (char& c : out) {
            const auto u = static_cast<unsigned char>(c);
            if (u < 0x80) {
                c = static_cast<char>(std::tolower(u));
            }
        }
    }
    return out;
}

bool is_split_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) && c != '_' && c != '-' && c != '\''; }

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    std::vector<std::string> lines;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!valid_utf8(line)) {
            throw IoError("invalid UTF-8 in '" + path.string() + "' at line " + std::to_string(line_no));
        }
        lines.push_back(std::move(line));
    }
    return lines;
}

}  // namespace

Corpus make_corpus(std::vector<std::string> sentences, std::string time_point, LoadOptions opts) {
    Corpus c;
    c.time_point = std::move(time_point);
    for (auto& s : sentences) {
        if (!is_blank(s)) {
            c.sentences.push_back(normalize(s, opts));
        }
    }
    if (c.sentences.empty()) {
        throw EmptyCorpusError("corpus for time point '" + c.time_point + "' has no sentences");
    }
    c.doc_count = c.sentences.size();
    return c;
}

Corpus load_corpus(const std::filesystem::path& path, std::string time_point, LoadOptions opts) {
    auto lines = read_lines(path);
    try {
        return make_corpus(std::move(lines), std::move(time_point), opts);
    } catch (const EmptyCorpusError&) {
        throw EmptyCorpusError("corpus file '" + path.string() + "' has no sentences");
    }
}

std::vector<TargetWordRecord> load_targets(const std::filesystem::path& path, LoadOptions opts) {
    const auto lines = read_lines(path);
    std::vector<TargetWordRecord> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (is_blank(line)) {
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw ParseError(path.string(), i + 1, "expected word<TAB>gold_score");
        }
        std::string_view score_text = std::string_view(line).substr(tab + 1);
        if (const auto tab2 = score_text.find('\t'); tab2 != std::string_view::npos) {
            score_text = score_text.substr(0, tab2);
        }
        double score = 0.0;
        const auto [ptr, ec] = std::from_chars(score_text.data(), score_text.data() + score_text.size(), score);
        if (ec != std::errc() || ptr != score_text.data() + score_text.size()) {
            throw ParseError(path.string(), i + 1, "unparseable gold score '" + std::string(score_text) + "'");
        }
        if (!(score >= 0.0 && score <= 1.0)) {
            throw ParseError(path.string(), i + 1, "gold score outside [0, 1]");
        }
        out.push_back({normalize(line.substr(0, tab), opts), score});
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view sentence) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    };
    for (char ch : sentence) {
        const auto c = static_cast<unsigned char>(ch);
        if (c < 0x80 && std::isspace(c)) {
            flush();
        } else if (is_split_punct(c)) {
            flush();
            out.emplace_back(1, ch);
        } else {
            cur.push_back(ch);
        }
    }
    flush();
    return out;
}

bool contains_token(std::string_view sentence, std::string_view word) {
    const auto toks = tokenize(sentence);
    return std::find(toks.begin(), toks.end(), word) != toks.end();
}

Vocab build_vocab(std::span<const Corpus> corpora, std::span<const TargetWordRecord> targets, std::size_t min_freq) {
    if (min_freq < 1) {
        throw ContractError("min_freq must be at least 1");
    }
    std::map<std::string, std::size_t> freq;
    for (const auto& c : corpora) {
        for (const auto& s : c.sentences) {
            for (auto& tok : tokenize(s)) {
                ++freq[std::move(tok)];
            }
        }
    }
    std::set<std::string> target_set;
    for (const auto& t : targets) {
        target_set.insert(t.word);
    }
    std::set<std::string> time_tokens;
    std::vector<std::string> time_order;
    for (const auto& c : corpora) {
        auto tok = time_token(c.time_point);
        if (time_tokens.insert(tok).second) {
            time_order.push_back(std::move(tok));
        }
    }

    std::vector<std::string> tokens(target_set.begin(), target_set.end());
    std::vector<std::pair<std::string, std::size_t>> words;
    for (const auto& [w, f] : freq) {
        if (f >= min_freq && !target_set.contains(w) && !time_tokens.contains(w) && w != "[PAD]" &&
            w != "[UNK]" && w != "[MASK]") {
            words.emplace_back(w, f);
        }
    }
    // freq is a std::map, so a stable sort on count keeps lexicographic ties.
    std::stable_sort(words.begin(), words.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (auto& [w, f] : words) {
        tokens.push_back(std::move(w));
    }
    const std::size_t n_time = time_order.size();
    tokens.insert(tokens.end(), time_order.begin(), time_order.end());
    return Vocab(std::move(tokens), std::move(target_set), n_time);
}

TimeVocab build_time_vocab(std::span<const Corpus> corpora) {
    std::vector<TimePoint> points;
    for (const auto& c : corpora) {
        points.push_back({c.time_point, static_cast<double>(c.doc_count)});
    }
    return TimeVocab(std::move(points));
}

TimedSequence encode_sequence(const Vocab& vocab, const TimeVocab& times, std::string_view sentence,
                              std::string_view time_point, AttentionMode mode, std::size_t max_len) {
    const auto toks = tokenize(sentence);
    if (toks.empty()) {
        throw ContractError("cannot encode an empty sentence");
    }
    const std::size_t tid = times.id(time_point);
    TimedSequence seq;
    if (uses_time_prepend(mode)) {
        const auto tok = vocab.find(time_token(time_point));
        if (!tok) {
            throw VocabError("vocabulary has no time token for '" + std::string(time_point) + "'");
        }
        seq.token_ids.push_back(*tok);
        seq.time_ids.push_back(tid);
    }
    for (const auto& t : toks) {
        if (seq.size() >= max_len) {
            break;
        }
        seq.token_ids.push_back(vocab.id_or_unk(t));
        seq.time_ids.push_back(tid);
    }
    return seq;
}

std::vector<std::string> decode(const Vocab& vocab, const TimedSequence& seq) {
    std::vector<std::string> out;
    out.reserve(seq.size());
    for (std::size_t id : seq.token_ids) {
        out.push_back(vocab.token(id));
    }
    return out;
}

std::vector<TimedSequence> pad_batch(std::span<const TimedSequence> batch) {
    std::size_t longest = 0;
    for (const auto& s : batch) {
        longest = std::max(longest, s.size());
    }
    std::vector<TimedSequence> out(batch.begin(), batch.end());
    for (auto& s : out) {
        s.token_ids.resize(longest, kPadId);
        s.time_ids.resize(longest, kPadTime);
    }
    return out;
}

MaskedSequence mask_for_mlm(const TimedSequence& seq, const Vocab& vocab, std::mt19937_64& rng, double mask_prob,
                            AttentionMode mode) {
    if (!(mask_prob >= 0.0 && mask_prob <= 1.0)) {
        throw ContractError("mask_prob must lie in [0, 1]");
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool ordinary_words = vocab.regular_end() > kNumSpecialTokens;
    std::uniform_int_distribution<std::size_t> word(kNumSpecialTokens,
                                                     ordinary_words ? vocab.regular_end() - 1 : kNumSpecialTokens);
    MaskedSequence out{seq, {}, {}};
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const std::size_t id = seq.token_ids[i];
        if (vocab.is_special(id) || vocab.is_time_token(id)) {
            continue;
        }
        if (!(unit(rng) < mask_prob)) {
            continue;
        }
        out.positions.push_back(i);
        out.labels.push_back(id);
        const double r = unit(rng);
        if (r < 0.8) {
            out.input.token_ids[i] = kMaskId;
            if (uses_temporal_scores(mode)) {
                out.input.time_ids[i] = kMaskTime;
            }
        } else if (r < 0.9 && ordinary_words) {
            out.input.token_ids[i] = word(rng);
        }
    }
    return out;
}

std::vector<std::string> sample_sentences(const Corpus& corpus, std::string_view word, std::size_t n,
                                          std::mt19937_64& rng) {
    if (n < 1) {
        throw ContractError("sample size must be at least 1");
    }
    std::vector<std::string> matches;
    for (const auto& s : corpus.sentences) {
        if (contains_token(s, word)) {
            matches.push_back(s);
        }
    }
    if (matches.empty()) {
        throw AbsentWordError("word '" + std::string(word) + "' does not occur at time point '" + corpus.time_point +
                              "'");
    }
    if (matches.size() <= n) {
        return matches;
    }
    std::vector<std::string> out;
    out.reserve(n);
    std::sample(matches.begin(), matches.end(), std::back_inserter(out), n, rng);
    return out;
}

}  // namespace tatt
