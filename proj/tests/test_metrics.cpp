#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "tatt/error.hpp"
#include "tatt/metrics.hpp"

using namespace tatt;
namespace fs = std::filesystem;

namespace {

double direct_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

std::vector<double> brute_ranks(const std::vector<double>& x) {
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double below = 0, equal = 0;
        for (double v : x) {
            below += v < x[i] ? 1 : 0;
            equal += v == x[i] ? 1 : 0;
        }
        r[i] = below + (equal + 1.0) / 2.0;
    }
    return r;
}

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng, bool ties) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> k(0, 6);
    std::vector<double> v(n);
    for (double& x : v) {
        x = ties ? k(rng) / 6.0 : u(rng);
    }
    return v;
}

ScoreReport report_of(const std::vector<std::pair<std::string, std::optional<double>>>& rows) {
    ScoreReport r;
    for (const auto& [w, s] : rows) {
        ScoreEntry e;
        e.word = w;
        e.score = s;
        r.entries.push_back(e);
    }
    return r;
}

}  // namespace

TEST_CASE("pearson basics") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y, z;
    for (double v : x) {
        y.push_back(2 * v + 1);
        z.push_back(-v);
    }
    CHECK(std::abs(pearson_r(x, y) - 1.0) <= 1e-15);
    CHECK(std::abs(pearson_r(x, z) + 1.0) <= 1e-15);
    CHECK_THROWS_AS(pearson_r(x, std::vector<double>(5, 2.0)), DegenerateMetricError);
    CHECK_THROWS_AS(pearson_r(std::vector<double>{1, 2}, std::vector<double>{1, 2}), ContractError);
    CHECK_THROWS_AS(pearson_r(x, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST_CASE("spearman basics") {
    const std::vector<double> x{0.1, 0.5, 0.2, 0.9, 0.3};
    std::vector<double> cube, rev;
    for (double v : x) {
        cube.push_back(v * v * v + 7);
        rev.push_back(-v);
    }
    CHECK(std::abs(spearman_rho(x, cube) - 1.0) <= 1e-15);
    CHECK(std::abs(spearman_rho(x, rev) + 1.0) <= 1e-15);
    CHECK_THROWS_AS(spearman_rho(x, std::vector<double>(5, 1.0)), DegenerateMetricError);
}

TEST_CASE("average ranks") {
    CHECK(average_ranks(std::vector<double>{10, 30, 20}) == std::vector<double>{1, 3, 2});
    CHECK(average_ranks(std::vector<double>{5, 1, 5, 5, 0}) == std::vector<double>{4, 2, 4, 4, 1});
    std::mt19937_64 rng(2);
    for (int c = 0; c < 20; ++c) {
        const auto v = random_vec(37, rng, true);
        CHECK(average_ranks(v) == brute_ranks(v));
    }
}

TEST_CASE("metrics against oracles") {
    std::mt19937_64 rng(37);
    double worst_p = 0.0, worst_s = 0.0;
    for (int c = 0; c < 50; ++c) {
        const bool ties = c % 2 == 1;
        const auto x = random_vec(37, rng, ties);
        const auto y = random_vec(37, rng, ties);
        worst_p = std::max(worst_p, std::abs(pearson_r(x, y) - direct_pearson(x, y)));
        worst_s = std::max(worst_s, std::abs(spearman_rho(x, y) - direct_pearson(brute_ranks(x), brute_ranks(y))));
        CHECK(spearman_rho(x, y) == pearson_r(average_ranks(x), average_ranks(y)));
        CHECK(std::abs(pearson_r(x, y) - pearson_r(y, x)) <= 1e-15);
        CHECK(std::abs(spearman_rho(x, y) - spearman_rho(y, x)) <= 1e-15);

        std::vector<double> affine, monotone;
        for (double v : x) {
            affine.push_back(3.5 * v - 2.0);
            monotone.push_back(std::exp(2.0 * v));
        }
        CHECK(std::abs(pearson_r(affine, y) - pearson_r(x, y)) <= 1e-12);
        CHECK(std::abs(spearman_rho(monotone, y) - spearman_rho(x, y)) <= 1e-12);
    }
    CHECK(worst_p <= 1e-12);
    CHECK(worst_s <= 1e-12);
}

TEST_CASE("evaluate") {
    const std::vector<TargetWordRecord> gold{{"a", 0.1}, {"b", 0.4}, {"c", 0.2}, {"d", 0.9}, {"e", 0.5}};
    std::vector<std::pair<std::string, std::optional<double>>> same, flipped;
    for (const auto& g : gold) {
        same.emplace_back(g.word, g.gold_score);
        flipped.emplace_back(g.word, 1.0 - g.gold_score);
    }
    const auto r1 = evaluate(report_of(same), gold);
    CHECK(std::abs(r1.pearson_r - 1.0) <= 1e-15);
    CHECK(std::abs(r1.spearman_rho - 1.0) <= 1e-15);
    CHECK(r1.n_scored == 5);
    CHECK(r1.n_unscored == 0);
    CHECK(std::abs(evaluate(report_of(flipped), gold).spearman_rho + 1.0) <= 1e-15);

    auto mixed = same;
    mixed[1].second.reset();
    mixed.emplace_back("zzz", 0.3);
    const auto r2 = evaluate(report_of(mixed), gold);
    CHECK(r2.n_scored == 4);
    CHECK(r2.n_unscored == 1);
    const std::vector<TargetWordRecord> without_b{gold[0], gold[2], gold[3], gold[4]};
    CHECK(r2.pearson_r == evaluate(report_of(same), without_b).pearson_r);

    const auto few = report_of({{"a", 0.1}, {"b", 0.2}, {"c", std::nullopt}});
    CHECK_THROWS_AS(evaluate(few, gold), EvaluationError);
}

TEST_CASE("rank scatter") {
    const std::vector<TargetWordRecord> gold{{"c", 0.3}, {"a", 0.1}, {"b", 0.2}};
    const auto rows = rank_scatter(report_of({{"a", 0.1}, {"b", 0.2}, {"c", 0.3}}), gold);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].word == "a");
    CHECK(rows[0].gold_rank == 1);
    CHECK(rows[0].predicted_rank == 1);
    CHECK(rows[2].gold_rank == 3);
    CHECK(rows[2].predicted_rank == 3);

    const std::vector<TargetWordRecord> tied{{"a", 0.5}, {"b", 0.5}, {"c", 0.1}};
    const auto t = rank_scatter(report_of({{"a", 0.1}, {"b", 0.2}, {"c", 0.3}}), tied);
    CHECK(t[0].gold_rank == 2.5);
    CHECK(t[1].gold_rank == 2.5);
    CHECK(t[2].gold_rank == 1);

    // hand ranked
    const std::vector<TargetWordRecord> g5{{"e", 0.0}, {"d", 1.0}, {"c", 0.5}, {"b", 0.5}, {"a", 0.25}};
    const auto h = rank_scatter(
        report_of({{"a", 0.7}, {"b", 0.1}, {"c", 0.3}, {"d", 0.3}, {"e", 0.9}, {"x", std::nullopt}}), g5);
    REQUIRE(h.size() == 5);
    const std::vector<double> gold_ranks{2, 3.5, 3.5, 5, 1};
    const std::vector<double> pred_ranks{4, 1, 2.5, 2.5, 5};
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(h[i].gold_rank == gold_ranks[i]);
        CHECK(h[i].predicted_rank == pred_ranks[i]);
    }
    CHECK(format_scatter(h).rfind("word,gold_rank,predicted_rank\na,2,4\nb,3.5,1\n", 0) == 0);
}

TEST_CASE("metrics file") {
    EvalReport r;
    r.pearson_r = 0.5;
    r.spearman_rho = -0.1234567;
    CHECK(format_metrics(r) == "pearson=0.500000\nspearman=-0.123457\n");
}

TEST_CASE("score file parsing") {
    const fs::path dir = fs::temp_directory_path() / ("tatt_metrics_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& body) {
        std::ofstream(dir / name, std::ios::binary) << body;
        return dir / name;
    };
    const auto r = load_score_report(write("s.tsv", "# n=5 h=1 seed=0\nA\t0.5\t3\t4\nb\tNA\t2\t0\tabsent@t2\nc\t1\n"));
    REQUIRE(r.entries.size() == 3);
    CHECK(r.entries[0].word == "a");
    CHECK(*r.entries[0].score == 0.5);
    CHECK(r.entries[0].support_t2 == 4);
    CHECK_FALSE(r.entries[1].score);
    CHECK(r.entries[1].reason == "absent@t2");
    CHECK(*r.entries[2].score == 1.0);
    try {
        load_score_report(write("bad.tsv", "a\t0.5\nb\t0.6\nc 0.7\n"));
        FAIL("expected parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(load_score_report(write("num.tsv", "a\tx\n")), ParseError);
    CHECK_THROWS_AS(load_score_report(dir / "none.tsv"), IoError);
    fs::remove_all(dir);
}
