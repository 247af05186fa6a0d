#include "tatt/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "tatt/error.hpp"
#include "tatt/io.hpp"

namespace tatt {

namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw ShapeError("correlation of lengths " + std::to_string(x.size()) + " and " + std::to_string(y.size()));
    }
    if (x.size() < 3) {
        throw ContractError("correlation needs at least 3 points, got " + std::to_string(x.size()));
    }
}

double mean(std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

template <class T>
bool parse_number(std::string_view s, T& v) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && ptr == s.data() + s.size();
}

struct Joined {
    std::vector<std::string> words;
    std::vector<double> gold;
    std::vector<double> predicted;
    std::size_t unscored = 0;
};

Joined join(const ScoreReport& report, std::span<const TargetWordRecord> targets) {
    std::map<std::string, double, std::less<>> scores;
    for (const auto& e : report.entries) {
        if (e.score) {
            scores[e.word] = *e.score;
        }
    }
    std::vector<TargetWordRecord> sorted(targets.begin(), targets.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.word < b.word; });
    Joined j;
    for (const auto& t : sorted) {
        const auto it = scores.find(t.word);
        if (it == scores.end()) {
            ++j.unscored;
            continue;
        }
        j.words.push_back(t.word);
        j.gold.push_back(t.gold_score);
        j.predicted.push_back(it->second);
    }
    return j;
}

}  // namespace

double pearson_r(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y);
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) {
        throw DegenerateMetricError("correlation undefined: zero variance");
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) {
            ++j;
        }
        // positions i..j (0-based) share rank ((i+1)+(j+1))/2
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = r;
        }
        i = j + 1;
    }
    return ranks;
}

double spearman_rho(std::span<const double> x, std::span<const double> y) {
    check_pair(x, y);
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    try {
        return pearson_r(rx, ry);
    } catch (const DegenerateMetricError&) {
        throw DegenerateMetricError("rank correlation undefined: all values tied");
    }
}

EvalReport evaluate(const ScoreReport& report, std::span<const TargetWordRecord> targets) {
    const Joined j = join(report, targets);
    if (j.words.size() < 3) {
        throw EvaluationError("only " + std::to_string(j.words.size()) + " scored target words; need at least 3");
    }
    EvalReport r;
    r.pearson_r = pearson_r(j.predicted, j.gold);
    r.spearman_rho = spearman_rho(j.predicted, j.gold);
    r.n_scored = j.words.size();
    r.n_unscored = j.unscored;
    return r;
}

std::vector<ScatterRow> rank_scatter(const ScoreReport& report, std::span<const TargetWordRecord> targets) {
    const Joined j = join(report, targets);
    const auto gold_ranks = average_ranks(j.gold);
    const auto pred_ranks = average_ranks(j.predicted);
    std::vector<ScatterRow> rows;
    for (std::size_t i = 0; i < j.words.size(); ++i) {
        rows.push_back({j.words[i], gold_ranks[i], pred_ranks[i]});
    }
    return rows;
}

std::string format_metrics(const EvalReport& r) {
    return "pearson=" + format_fixed(r.pearson_r, 6) + "\nspearman=" + format_fixed(r.spearman_rho, 6) + "\n";
}

std::string format_scatter(std::span<const ScatterRow> rows) {
    std::string out = "word,gold_rank,predicted_rank\n";
    for (const auto& r : rows) {
        out += r.word + "," + format_real(r.gold_rank) + "," + format_real(r.predicted_rank) + "\n";
    }
    return out;
}

ScoreReport load_score_report(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    ScoreReport report;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto fields = split_tabs(line);
        if (fields.size() < 2 || fields[0].empty()) {
            throw ParseError(path.string(), line_no, "expected word<TAB>score");
        }
        ScoreEntry e;
        e.word = std::string(fields[0]);
        for (char& c : e.word) {
            const auto u = static_cast<unsigned char>(c);
            if (u < 0x80) {
                c = static_cast<char>(std::tolower(u));
            }
        }
        if (fields[1] != "NA") {
            double v = 0.0;
            if (!parse_number(fields[1], v) || !std::isfinite(v)) {
                throw ParseError(path.string(), line_no, "unparseable score '" + std::string(fields[1]) + "'");
            }
            e.score = v;
        }
        if (fields.size() >= 4) {
            if (!parse_number(fields[2], e.support_t1) || !parse_number(fields[3], e.support_t2)) {
                throw ParseError(path.string(), line_no, "unparseable support counts");
            }
        }
        if (fields.size() >= 5) {
            e.reason = std::string(fields[4]);
        }
        report.entries.push_back(std::move(e));
    }
    return report;
}

}  // namespace tatt
