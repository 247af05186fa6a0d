#include "tatt/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "tatt/error.hpp"
#include "tatt/io.hpp"

namespace tatt {

namespace {

constexpr char kMagic[4] = {'T', 'A', 'T', 'T'};

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

template <class T>
void put_le(std::string& out, T v) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

template <class T>
T get_le(std::string_view in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) {
        throw CorruptionError("checkpoint truncated");
    }
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<T>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    }
    pos += sizeof(T);
    return v;
}

std::string header_text(const Model& m) {
    const auto& c = m.config;
    std::ostringstream h;
    h << "layers=" << c.layers << "\n"
      << "hidden=" << c.hidden << "\n"
      << "heads=" << c.heads << "\n"
      << "head_dim=" << c.head_dim << "\n"
      << "ff_dim=" << c.ff_dim << "\n"
      << "max_len=" << c.max_len << "\n"
      << "token_vocab_size=" << c.token_vocab_size << "\n"
      << "time_vocab_size=" << c.time_vocab_size << "\n"
      << "mode=" << to_string(c.mode) << "\n"
      << "seed=" << c.seed << "\n"
      << "init_std=" << format_real(c.init_std) << "\n"
      << "ln_eps=" << format_real(c.ln_eps) << "\n";
    h << "[vocab]\n";
    h << "tokens=" << m.vocab.size() << "\n";
    for (const auto& t : m.vocab.tokens()) {
        h << t << "\n";
    }
    h << "time_tokens=" << m.vocab.time_token_count() << "\n";
    h << "targets=" << m.vocab.targets().size() << "\n";
    for (const auto& t : m.vocab.targets()) {
        h << t << "\n";
    }
    h << "[time_vocab]\n";
    h << "points=" << m.time_vocab.point_count() << "\n";
    for (const auto& p : m.time_vocab.points()) {
        h << p.label << "\t" << format_real(p.doc_count) << "\n";
    }
    h << "[parameters]\n";
    h << "blocks=" << m.params.size() << "\n";
    for (const auto& p : m.params) {
        h << p.name << "\t" << p.value.rows() << "\t" << p.value.cols() << "\n";
    }
    return h.str();
}

class HeaderReader {
public:
    explicit HeaderReader(std::string_view text) : text_(text) {}

    std::string_view line() {
        if (pos_ >= text_.size()) {
            throw CorruptionError("checkpoint header ends early");
        }
        const auto nl = text_.find('\n', pos_);
        if (nl == std::string_view::npos) {
            throw CorruptionError("checkpoint header line not terminated");
        }
        auto out = text_.substr(pos_, nl - pos_);
        pos_ = nl + 1;
        return out;
    }

    std::string_view value(std::string_view key) {
        const auto l = line();
        if (!l.starts_with(key) || l.size() <= key.size() || l[key.size()] != '=') {
            throw CorruptionError("checkpoint header: expected '" + std::string(key) + "=' but found '" +
                                  std::string(l) + "'");
        }
        return l.substr(key.size() + 1);
    }

    template <class T>
    T number(std::string_view key) {
        const auto v = value(key);
        return parse_number<T>(v, key);
    }

    void expect(std::string_view exact) {
        const auto l = line();
        if (l != exact) {
            throw CorruptionError("checkpoint header: expected '" + std::string(exact) + "'");
        }
    }

    bool done() const { return pos_ == text_.size(); }

    template <class T>
    static T parse_number(std::string_view v, std::string_view what) {
        T out{};
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || ptr != v.data() + v.size()) {
            throw CorruptionError("checkpoint header: bad number for " + std::string(what));
        }
        return out;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
};

std::vector<std::string_view> split_tabs(std::string_view l) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto tab = l.find('\t', start);
        out.push_back(l.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) {
            return out;
        }
        start = tab + 1;
    }
}

}  // namespace

void save_checkpoint(const Model& m, const std::filesystem::path& path) {
    std::string bytes(kMagic, 4);
    put_le<std::uint32_t>(bytes, kCheckpointVersion);
    const std::string header = header_text(m);
    put_le<std::uint64_t>(bytes, header.size());
    bytes += header;
    for (const auto& p : m.params) {
        for (double v : p.value.data()) {
            put_le<std::uint64_t>(bytes, std::bit_cast<std::uint64_t>(v));
        }
    }
    put_le<std::uint64_t>(bytes, fnv1a(bytes));
    write_file_atomic(path, bytes);
}

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open checkpoint '" + path.string() + "'");
    }
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string_view all(bytes);

    if (all.size() < 4 || std::memcmp(all.data(), kMagic, 4) != 0) {
        throw CorruptionError("'" + path.string() + "' is not a checkpoint (bad magic)");
    }
    std::size_t pos = 4;
    const auto version = get_le<std::uint32_t>(all, pos);
    if (version != kCheckpointVersion) {
        throw VersionError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(kCheckpointVersion) + ")");
    }
    if (all.size() < pos + 8 + 8) {
        throw CorruptionError("checkpoint truncated");
    }
    const std::size_t body_end = all.size() - 8;
    std::size_t hash_pos = body_end;
    const auto stored_hash = get_le<std::uint64_t>(all, hash_pos);
    const auto header_len = get_le<std::uint64_t>(all, pos);
    if (header_len > body_end - pos) {
        throw CorruptionError("checkpoint truncated (header)");
    }
    HeaderReader h(all.substr(pos, header_len));
    pos += header_len;

    ModelConfig c;
    c.layers = h.number<std::size_t>("layers");
    c.hidden = h.number<std::size_t>("hidden");
    c.heads = h.number<std::size_t>("heads");
    c.head_dim = h.number<std::size_t>("head_dim");
    c.ff_dim = h.number<std::size_t>("ff_dim");
    c.max_len = h.number<std::size_t>("max_len");
    c.token_vocab_size = h.number<std::size_t>("token_vocab_size");
    c.time_vocab_size = h.number<std::size_t>("time_vocab_size");
    try {
        c.mode = parse_attention_mode(h.value("mode"));
    } catch (const ConfigError& e) {
        throw CorruptionError(std::string("checkpoint header: ") + e.what());
    }
    c.seed = h.number<std::uint64_t>("seed");
    c.init_std = h.number<double>("init_std");
    c.ln_eps = h.number<double>("ln_eps");

    h.expect("[vocab]");
    const auto n_tokens = h.number<std::size_t>("tokens");
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < n_tokens; ++i) {
        tokens.emplace_back(h.line());
    }
    const auto n_time_tokens = h.number<std::size_t>("time_tokens");
    const auto n_targets = h.number<std::size_t>("targets");
    std::set<std::string> targets;
    for (std::size_t i = 0; i < n_targets; ++i) {
        targets.emplace(h.line());
    }
    h.expect("[time_vocab]");
    const auto n_points = h.number<std::size_t>("points");
    std::vector<TimePoint> points;
    for (std::size_t i = 0; i < n_points; ++i) {
        const auto parts = split_tabs(h.line());
        if (parts.size() != 2) {
            throw CorruptionError("checkpoint header: bad time point line");
        }
        points.push_back({std::string(parts[0]), HeaderReader::parse_number<double>(parts[1], "doc_count")});
    }
    h.expect("[parameters]");
    const auto n_blocks = h.number<std::size_t>("blocks");

    Model m;
    try {
        c.validate();
        m.config = c;
        if (n_tokens > 0) {
            if (n_tokens < kNumSpecialTokens || tokens[0] != "[PAD]" || tokens[1] != "[UNK]" || tokens[2] != "[MASK]") {
                throw CorruptionError("checkpoint vocabulary lacks the special tokens");
            }
            m.vocab = Vocab(std::vector<std::string>(tokens.begin() + kNumSpecialTokens, tokens.end()),
                            std::move(targets), n_time_tokens);
            if (m.vocab.size() != c.token_vocab_size) {
                throw CorruptionError("checkpoint vocabulary size disagrees with config");
            }
        }
        if (n_points > 0) {
            m.time_vocab = TimeVocab(std::move(points));
            if (m.time_vocab.size() != c.time_vocab_size) {
                throw CorruptionError("checkpoint time vocabulary size disagrees with config");
            }
        }
    } catch (const ConfigError& e) {
        throw CorruptionError(std::string("checkpoint config invalid: ") + e.what());
    } catch (const VocabError& e) {
        throw CorruptionError(std::string("checkpoint vocabulary invalid: ") + e.what());
    }

    const auto layout = parameter_layout(c);
    if (n_blocks != layout.size()) {
        throw CorruptionError("checkpoint has " + std::to_string(n_blocks) + " parameter blocks, expected " +
                              std::to_string(layout.size()));
    }
    std::size_t expected_values = 0;
    for (const auto& b : layout) {
        const auto parts = split_tabs(h.line());
        if (parts.size() != 3 || parts[0] != b.name ||
            HeaderReader::parse_number<std::size_t>(parts[1], "rows") != b.rows ||
            HeaderReader::parse_number<std::size_t>(parts[2], "cols") != b.cols) {
            throw CorruptionError("checkpoint parameter block '" + b.name + "' does not match the layout");
        }
        expected_values += b.rows * b.cols;
    }
    if (!h.done()) {
        throw CorruptionError("checkpoint header has trailing content");
    }
    if (body_end - pos != expected_values * 8) {
        throw CorruptionError("checkpoint truncated or padded: " + std::to_string(body_end - pos) +
                              " parameter bytes, expected " + std::to_string(expected_values * 8));
    }
    if (fnv1a(all.substr(0, body_end)) != stored_hash) {
        throw CorruptionError("checkpoint hash mismatch");
    }

    m.slots = parameter_slots(c);
    m.params.reserve(layout.size());
    for (const auto& b : layout) {
        std::vector<double> data(b.rows * b.cols);
        for (double& v : data) {
            v = std::bit_cast<double>(get_le<std::uint64_t>(all, pos));
        }
        Matrix value(b.rows, b.cols, std::move(data));
        if (!value.all_finite()) {
            throw CorruptionError("checkpoint block '" + b.name + "' holds non-finite values");
        }
        m.params.push_back({b.name, std::move(value)});
    }
    return m;
}

}  // namespace tatt
