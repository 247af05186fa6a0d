// Masked-language-model training with Adam.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "tatt/corpus.hpp"
#include "tatt/model.hpp"

namespace tatt {

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t epochs = 3;
    std::size_t batch_size = 32;
    double mask_prob = 0.15;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    /// Global gradient-norm clip threshold.
    double clip_norm = 1.0;
    /// Stop after this many optimizer steps; 0 means no limit.
    std::size_t max_steps = 0;

    void validate() const;
};

struct OptimizerState {
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;
    std::size_t step = 0;
};

/// One Adam update with bias correction. Moment buffers are created on the
/// first call.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, OptimizerState& state,
               const TrainConfig& cfg);

/// Scales grads in place so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(std::span<Matrix> grads, double max_norm);

struct LossRecord {
    std::size_t step = 0;
    std::size_t epoch = 0;
    double loss = 0.0;
};

struct SkippedBatch {
    std::size_t epoch = 0;
    std::size_t batch = 0;
};

struct TrainResult {
    std::vector<LossRecord> log;
    /// Mean step loss per epoch.
    std::vector<double> epoch_loss;
    /// Batches with no masked position; no optimizer step was taken.
    std::vector<SkippedBatch> skipped;
};

/// Trains on the union of the corpora, each sentence carrying its corpus's
/// time point. Sentence order is reshuffled every epoch from cfg.seed; the
/// loss is cross-entropy over masked positions only. Throws TrainingError
/// (with the step index) on a non-finite loss or when there is nothing to
/// train on.
TrainResult train_mlm(Model& model, std::span<const Corpus> corpora, const TrainConfig& cfg,
                      const std::function<void(const LossRecord&)>& on_step = {});

/// CSV with header `step,epoch,loss`.
void write_loss_log(const std::filesystem::path& path, std::span<const LossRecord> log);

}  // namespace tatt
