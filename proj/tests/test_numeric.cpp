#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "tatt/error.hpp"
#include "tatt/matrix.hpp"
#include "tatt/tape.hpp"

using namespace tatt;
using tatt::testing::check_gradients;
using tatt::testing::random_matrix;

namespace {

Matrix loop_matmul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                s += a(i, k) * b(k, j);
            }
            out(i, j) = s;
        }
    }
    return out;
}

// sum(out .* w) so every output entry gets a distinct upstream gradient
Var weighted_sum(Tape& tape, Var out, const Matrix& w) { return sum(hadamard(out, tape.constant(w))); }

constexpr double kStep = 1e-5;
constexpr double kFloor = 1e-6;

}  // namespace

TEST_CASE("matmul small cases") {
    const Matrix a{{1, 2}, {3, 4}};
    CHECK(matmul(Matrix::identity(2), a) == a);
    CHECK(matmul(a, Matrix(2, 2)) == Matrix(2, 2));
    CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
    try {
        matmul(Matrix(2, 3), Matrix(4, 5));
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2x3") != std::string::npos);
        CHECK(msg.find("4x5") != std::string::npos);
    }
}

TEST_CASE("matmul agrees with triple loop on random shapes") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> dim(1, 9);
    double worst = 0.0;
    for (int c = 0; c < 100; ++c) {
        const std::size_t m = dim(rng), k = dim(rng), n = dim(rng);
        const Matrix a = random_matrix(m, k, rng, -2, 2);
        const Matrix b = random_matrix(k, n, rng, -2, 2);
        worst = std::max(worst, max_abs_diff(matmul(a, b), loop_matmul(a, b)));
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("gemm transposes and accumulates") {
    std::mt19937_64 rng(5);
    const Matrix a = random_matrix(3, 4, rng);
    const Matrix b = random_matrix(5, 4, rng);
    Matrix out(3, 5, 1.0);
    kernel::gemm(a, false, b, true, out, true);
    Matrix expect = loop_matmul(a, transpose(b));
    expect += Matrix(3, 5, 1.0);
    CHECK(max_abs_diff(out, expect) <= 1e-12);
}

TEST_CASE("softmax rows") {
    const Matrix half = softmax_rows(Matrix{{0, 0}});
    CHECK(half(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    const Matrix q = softmax_rows(Matrix{{0, std::log(3.0)}});
    CHECK(std::abs(q(0, 0) - 0.25) <= 1e-15);
    CHECK(std::abs(q(0, 1) - 0.75) <= 1e-15);

    std::mt19937_64 rng(3);
    const Matrix m = random_matrix(4, 6, rng, -5, 5);
    const Matrix s = softmax_rows(m);
    Matrix shifted = m;
    for (std::size_t i = 0; i < 4; ++i) {
        for (double& x : shifted.row(i)) {
            x += 100.0 * static_cast<double>(i + 1);
        }
    }
    for (std::size_t i = 0; i < 4; ++i) {
        double total = 0.0;
        for (double x : s.row(i)) {
            CHECK(x >= 0.0);
            total += x;
        }
        CHECK(std::abs(total - 1.0) <= 1e-12);
    }
    CHECK(max_abs_diff(s, softmax_rows(shifted)) <= 1e-12);
    CHECK(softmax_rows(Matrix{{1000.0, 0.0}}).all_finite());
    CHECK_THROWS_AS(softmax_rows(Matrix()), ContractError);
}

TEST_CASE("frobenius norm") {
    CHECK(frobenius_norm(Matrix{{3, 4}}) == 5.0);
    CHECK(frobenius_norm(Matrix(3, 2)) == 0.0);
    CHECK(frobenius_norm(Matrix{{1, 1}, {1, 1}}) == 2.0);
}

TEST_CASE("layer norm") {
    const std::vector<double> one3(3, 1.0), zero3(3, 0.0);
    const Matrix flat = layer_norm(Matrix{{1, 1, 1}}, one3, zero3, 1e-12);
    for (double x : flat.data()) {
        CHECK(x == 0.0);
    }
    const std::vector<double> one2(2, 1.0), zero2(2, 0.0);
    const Matrix unit = layer_norm(Matrix{{-1, 1}}, one2, zero2, 1e-15);
    CHECK(std::abs(unit(0, 0) + 1.0) <= 1e-12);
    CHECK(std::abs(unit(0, 1) - 1.0) <= 1e-12);
    CHECK_THROWS_AS(layer_norm(Matrix(1, 3), one2, zero2, 1e-12), ShapeError);

    std::mt19937_64 rng(8);
    const Matrix x = random_matrix(3, 7, rng, -2, 2);
    const Matrix g = random_matrix(1, 7, rng);
    const Matrix b = random_matrix(1, 7, rng);
    const Matrix y = layer_norm(x, g.row(0), b.row(0), 1e-5);
    for (std::size_t i = 0; i < 3; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < 7; ++j) {
            mean += x(i, j);
        }
        mean /= 7.0;
        double var = 0.0;
        for (std::size_t j = 0; j < 7; ++j) {
            var += (x(i, j) - mean) * (x(i, j) - mean);
        }
        var /= 7.0;
        for (std::size_t j = 0; j < 7; ++j) {
            const double expect = g(0, j) * (x(i, j) - mean) / std::sqrt(var + 1e-5) + b(0, j);
            CHECK(std::abs(y(i, j) - expect) <= 1e-12);
        }
    }
}

TEST_CASE("gelu uses the tanh form") {
    const Matrix y = gelu(Matrix{{-1.0, 0.0, 0.5, 3.0}});
    const double c = std::sqrt(2.0 / std::acos(-1.0));
    for (std::size_t j = 0; j < 4; ++j) {
        const double x = Matrix{{-1.0, 0.0, 0.5, 3.0}}(0, j);
        const double expect = 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
        CHECK(std::abs(y(0, j) - expect) <= 1e-15);
    }
}

TEST_CASE("tape: analytic square") {
    Tape tape;
    const Matrix x{{3.0}};
    Var v = tape.variable(x);
    Var y = hadamard(v, v);
    tape.backward(y);
    CHECK(tape.grad(v)(0, 0) == 6.0);
}

TEST_CASE("tape: unused variable gets exact zero") {
    Tape tape;
    const Matrix a{{1.0, 2.0}};
    const Matrix b{{5.0, 6.0}};
    Var va = tape.variable(a);
    Var vb = tape.variable(b);
    Var loss = sum(scale(va, 2.0));
    tape.backward(loss);
    CHECK(tape.grad(vb) == Matrix(1, 2));
    CHECK(tape.grad(va) == Matrix{{2.0, 2.0}});
}

TEST_CASE("tape: contract errors") {
    Tape tape;
    const Matrix a(2, 2, 1.0);
    Var v = tape.variable(a);
    CHECK_THROWS_AS(tape.backward(v), ContractError);
    Tape other;
    Var w = other.variable(a);
    CHECK_THROWS_AS(add(v, w), ContractError);
    Var loss = sum(v);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), ContractError);
}

TEST_CASE("tape: non-finite output is rejected") {
    Tape tape;
    Var v = tape.constant(Matrix{{1e308}});
    CHECK_THROWS_AS(scale(v, 10.0), NumericError);
}

TEST_CASE("tape: replay reproduces snapshots") {
    std::mt19937_64 rng(2);
    const Matrix a = random_matrix(3, 4, rng);
    const Matrix b = random_matrix(4, 3, rng);
    Tape tape;
    Var x = gelu(matmul(tape.variable(a), tape.constant(b)));
    Var y = softmax_rows(x);
    tape.backward(cross_entropy(y, {0, 1, 2}));
    CHECK(tape.replay_matches());
}

TEST_CASE("finite differences: every primitive") {
    std::mt19937_64 rng(21);
    auto R = [&](std::size_t r, std::size_t c) { return random_matrix(r, c, rng, -2, 2); };
    const Matrix w34 = R(3, 4), w33 = R(3, 3), w43 = R(4, 3), w11 = R(1, 1), w24 = R(2, 4), w35 = R(3, 5);
    struct Case {
        const char* name;
        testing::LossFn f;
        std::vector<Matrix> inputs;
    };
    std::vector<Case> cases;
    cases.push_back({"matmul", [&](Tape& t, const auto& v) { return weighted_sum(t, matmul(v[0], v[1]), w34); },
                     {R(3, 5), R(5, 4)}});
    cases.push_back({"matmul_nt",
                     [&](Tape& t, const auto& v) { return weighted_sum(t, matmul_nt(v[0], v[1]), w33); },
                     {R(3, 5), R(3, 5)}});
    cases.push_back({"transpose",
                     [&](Tape& t, const auto& v) { return weighted_sum(t, transpose(v[0]), w43); }, {R(3, 4)}});
    cases.push_back({"add", [&](Tape& t, const auto& v) { return weighted_sum(t, add(v[0], v[1]), w34); },
                     {R(3, 4), R(3, 4)}});
    cases.push_back({"hadamard",
                     [&](Tape& t, const auto& v) { return weighted_sum(t, hadamard(v[0], v[1]), w34); },
                     {R(3, 4), R(3, 4)}});
    cases.push_back({"scale", [&](Tape& t, const auto& v) { return weighted_sum(t, scale(v[0], -1.7), w34); },
                     {R(3, 4)}});
    cases.push_back({"divide_by_scalar",
                     [&](Tape& t, const auto& v) {
                         Var s = add(hadamard(v[1], v[1]), t.constant(Matrix{{0.5}}));
                         return weighted_sum(t, divide_by_scalar(v[0], s), w34);
                     },
                     {R(3, 4), R(1, 1)}});
    cases.push_back({"add_row", [&](Tape& t, const auto& v) { return weighted_sum(t, add_row(v[0], v[1]), w34); },
                     {R(3, 4), R(1, 4)}});
    cases.push_back({"scale_rows",
                     [&](Tape& t, const auto& v) {
                         return weighted_sum(t, scale_rows(v[0], {0.5, 2.0, 3.0}), w34);
                     },
                     {R(3, 4)}});
    cases.push_back({"softmax_rows",
                     [&](Tape& t, const auto& v) { return weighted_sum(t, softmax_rows(v[0]), w34); }, {R(3, 4)}});
    cases.push_back({"layer_norm",
                     [&](Tape& t, const auto& v) {
                         return weighted_sum(t, layer_norm(v[0], v[1], v[2], 1e-5), w34);
                     },
                     {R(3, 4), R(1, 4), R(1, 4)}});
    cases.push_back({"gelu", [&](Tape& t, const auto& v) { return weighted_sum(t, gelu(v[0]), w34); }, {R(3, 4)}});
    cases.push_back({"gather_rows",
                     [&](Tape& t, const auto& v) { return weighted_sum(t, gather_rows(v[0], {2, 0, 2}), w34); },
                     {R(4, 4)}});
    cases.push_back({"row_slice",
                     [&](Tape& t, const auto& v) { return weighted_sum(t, row_slice(v[0], 1, 2), w24); },
                     {R(4, 4)}});
    cases.push_back({"col_slice",
                     [&](Tape& t, const auto& v) { return weighted_sum(t, col_slice(v[0], 2, 4), w34); },
                     {R(3, 7)}});
    cases.push_back({"concat_cols",
                     [&](Tape& t, const auto& v) { return weighted_sum(t, concat_cols({v[0], v[1]}), w35); },
                     {R(3, 2), R(3, 3)}});
    cases.push_back({"concat_rows",
                     [&](Tape& t, const auto& v) { return weighted_sum(t, concat_rows({v[0], v[1]}), w34); },
                     {R(1, 4), R(2, 4)}});
    cases.push_back({"frobenius_norm",
                     [&](Tape& t, const auto& v) { return weighted_sum(t, frobenius_norm(v[0]), w11); },
                     {R(3, 4)}});
    cases.push_back({"cross_entropy",
                     [&](Tape&, const auto& v) { return cross_entropy(v[0], {1, 4, 0}); }, {R(3, 5)}});

    for (const auto& c : cases) {
        CAPTURE(c.name);
        const auto r = check_gradients(c.f, c.inputs, kStep, kFloor);
        CHECK(r.checked > 0);
        CHECK(r.max_rel < 1e-4);
    }
}
