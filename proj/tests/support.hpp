// Shared helpers for the test binaries.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "tatt/matrix.hpp"
#include "tatt/tape.hpp"

namespace tatt::testing {

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    Matrix m(r, c);
    for (double& x : m.data()) {
        x = d(rng);
    }
    return m;
}

inline double rel_error(double a, double n, double floor) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

/// Builds a 1x1 loss from leaf vars.
using LossFn = std::function<Var(Tape&, const std::vector<Var>&)>;

struct GradCheck {
    double max_rel = 0.0;
    double max_abs = 0.0;
    std::size_t checked = 0;
};

/// Compares tape gradients against central differences on every entry of
/// every input.
inline GradCheck check_gradients(const LossFn& f, std::vector<Matrix> inputs, double step, double floor) {
    std::vector<Matrix> analytic;
    {
        Tape tape;
        std::vector<Var> vars;
        for (const auto& m : inputs) {
            vars.push_back(tape.variable(m));
        }
        Var loss = f(tape, vars);
        tape.backward(loss);
        for (const auto& v : vars) {
            analytic.push_back(tape.grad(v));
        }
    }
    auto eval = [&] {
        Tape tape;
        std::vector<Var> vars;
        for (const auto& m : inputs) {
            vars.push_back(tape.constant_ref(m));
        }
        return f(tape, vars).value()(0, 0);
    };
    GradCheck out;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        for (std::size_t j = 0; j < inputs[i].size(); ++j) {
            double& x = inputs[i].data()[j];
            const double saved = x;
            x = saved + step;
            const double up = eval();
            x = saved - step;
            const double down = eval();
            x = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic[i].data()[j];
            out.max_rel = std::max(out.max_rel, rel_error(a, numeric, floor));
            out.max_abs = std::max(out.max_abs, std::abs(a - numeric));
            ++out.checked;
        }
    }
    return out;
}

}  // namespace tatt::testing
