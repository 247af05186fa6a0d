#include "tatt/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tatt/error.hpp"
#include "tatt/io.hpp"

namespace tatt {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) {
        throw ConfigError("learning_rate must be positive");
    }
    if (epochs < 1) {
        throw ConfigError("epochs must be at least 1");
    }
    if (batch_size < 1) {
        throw ConfigError("batch_size must be at least 1");
    }
    if (!(mask_prob >= 0.0 && mask_prob <= 1.0)) {
        throw ConfigError("mask_prob must lie in [0, 1]");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0)) {
        throw ConfigError("Adam needs 0 <= beta < 1 and eps > 0");
    }
    if (!(clip_norm > 0.0)) {
        throw ConfigError("clip_norm must be positive");
    }
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, OptimizerState& state,
               const TrainConfig& cfg) {
    if (params.size() != grads.size()) {
        throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
    }
    if (state.first_moment.empty()) {
        for (const Matrix* p : params) {
            state.first_moment.emplace_back(p->rows(), p->cols());
            state.second_moment.emplace_back(p->rows(), p->cols());
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw ShapeError("adam_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                         " parameters, got " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Matrix& p = *params[i];
        if (grads[i].rows() != p.rows() || grads[i].cols() != p.cols() || state.first_moment[i].rows() != p.rows() ||
            state.first_moment[i].cols() != p.cols()) {
            throw ShapeError("adam_step: parameter " + std::to_string(i) + " is " + p.shape() + ", gradient " +
                             grads[i].shape() + ", state " + state.first_moment[i].shape());
        }
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(cfg.beta1, t);
    const double correction2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i]->data();
        auto g = grads[i].data();
        auto m = state.first_moment[i].data();
        auto v = state.second_moment[i].data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            const double m_hat = m[j] / correction1;
            const double v_hat = v[j] / correction2;
            p[j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
        }
    }
}

double clip_global_norm(std::span<Matrix> grads, double max_norm) {
    double sq = 0.0;
    for (const Matrix& g : grads) {
        for (double v : g.data()) {
            sq += v * v;
        }
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double s = max_norm / norm;
        for (Matrix& g : grads) {
            g *= s;
        }
    }
    return norm;
}

TrainResult train_mlm(Model& model, std::span<const Corpus> corpora, const TrainConfig& cfg,
                      const std::function<void(const LossRecord&)>& on_step) {
    cfg.validate();
    if (model.vocab.empty() || model.time_vocab.point_count() == 0) {
        throw ContractError("train_mlm needs a model with attached vocabularies");
    }
    std::vector<TimedSequence> data;
    for (const auto& c : corpora) {
        if (!model.time_vocab.find(c.time_point)) {
            throw ContractError("time point '" + c.time_point + "' is not in the model's time vocabulary");
        }
        for (const auto& s : c.sentences) {
            if (tokenize(s).empty()) {
                continue;
            }
            data.push_back(
                encode_sequence(model.vocab, model.time_vocab, s, c.time_point, model.config.mode, model.config.max_len));
        }
    }
    if (data.empty()) {
        throw TrainingError("no sentences to train on");
    }

    std::mt19937_64 rng(cfg.seed);
    OptimizerState opt;
    TrainResult result;
    std::vector<Matrix*> param_ptrs;
    for (auto& p : model.params) {
        param_ptrs.push_back(&p.value);
    }
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t step = 0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_sum = 0.0;
        std::size_t epoch_steps = 0;
        for (std::size_t start = 0, batch = 0; start < order.size(); start += cfg.batch_size, ++batch) {
            if (cfg.max_steps != 0 && step >= cfg.max_steps) {
                break;
            }
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<TimedSequence> inputs;
            std::vector<std::vector<std::size_t>> positions;
            std::vector<std::vector<std::size_t>> labels;
            std::size_t masked = 0;
            for (std::size_t i = start; i < end; ++i) {
                auto ms = mask_for_mlm(data[order[i]], model.vocab, rng, cfg.mask_prob, model.config.mode);
                masked += ms.positions.size();
                inputs.push_back(std::move(ms.input));
                positions.push_back(std::move(ms.positions));
                labels.push_back(std::move(ms.labels));
            }
            if (masked == 0) {
                result.skipped.push_back({epoch, batch});
                continue;
            }

            ++step;
            double loss_value = 0.0;
            std::vector<Matrix> grads;
            try {
                Tape tape;
                const ForwardPass pass = forward(tape, model, inputs, true);
                Var loss = mlm_loss(model, pass, positions, labels);
                loss_value = loss.value()(0, 0);
                tape.backward(loss);
                grads.reserve(pass.params.size());
                for (const Var& p : pass.params) {
                    grads.push_back(tape.grad(p));
                }
            } catch (const NumericError& e) {
                throw TrainingError("non-finite value at step " + std::to_string(step) + ": " + e.what());
            }
            if (!std::isfinite(loss_value)) {
                throw TrainingError("non-finite loss at step " + std::to_string(step));
            }
            clip_global_norm(grads, cfg.clip_norm);
            adam_step(param_ptrs, grads, opt, cfg);
            for (const Matrix* p : param_ptrs) {
                if (!p->all_finite()) {
                    throw TrainingError("parameters became non-finite at step " + std::to_string(step));
                }
            }

            LossRecord rec{step, epoch, loss_value};
            result.log.push_back(rec);
            if (on_step) {
                on_step(rec);
            }
            epoch_sum += loss_value;
            ++epoch_steps;
        }
        result.epoch_loss.push_back(epoch_steps == 0 ? 0.0 : epoch_sum / static_cast<double>(epoch_steps));
        if (cfg.max_steps != 0 && step >= cfg.max_steps) {
            break;
        }
    }
    return result;
}

void write_loss_log(const std::filesystem::path& path, std::span<const LossRecord> log) {
    std::string out = "step,epoch,loss\n";
    for (const auto& r : log) {
        out += std::to_string(r.step) + "," + std::to_string(r.epoch) + "," + format_real(r.loss) + "\n";
    }
    write_file_atomic(path, out);
}

}  // namespace tatt
